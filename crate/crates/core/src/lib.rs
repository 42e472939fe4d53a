//! Train tracks for pseudo-Anosov monodromies presented by veering folding
//! sequences: layered triangulations, flow graphs, walls, and the contraction
//! of infinitesimal branches into an invariant track with an irreducible
//! transition matrix.

#![allow(clippy::needless_range_loop)]

pub mod contraction;
pub mod dot;
pub mod error;
pub mod folding;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod pipeline;
pub mod track;
pub mod search;
pub mod veering;
pub mod walls;

pub use error::{Error, Result};
