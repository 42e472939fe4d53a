//! Exact nonnegative integer matrices, characteristic polynomials and
//! certified spectral radius bounds.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::graph::Digraph;

/// Square nonnegative integer matrix. Entry `(r, c)` counts how often the
/// image of branch `c` passes over branch `r`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<BigUint>,
}

impl TransitionMatrix {
    pub fn zeros(n: usize) -> Self {
        TransitionMatrix { n, data: vec![BigUint::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = BigUint::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (c, v) in row.iter().enumerate() {
                m.data[r * n + c] = BigUint::from(*v);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> &BigUint {
        &self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: BigUint) {
        self.data[row * self.n + col] = value;
    }

    pub fn add_to(&mut self, row: usize, col: usize, value: &BigUint) {
        self.data[row * self.n + col] += value;
    }

    pub fn mul(&self, rhs: &TransitionMatrix) -> TransitionMatrix {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &rhs.data[k * n + j];
                    if !b.is_zero() {
                        out.data[i * n + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn column_sum(&self, col: usize) -> BigUint {
        (0..self.n).map(|r| self.get(r, col)).sum()
    }

    pub fn column(&self, col: usize) -> Vec<BigUint> {
        (0..self.n).map(|r| self.get(r, col).clone()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<BigUint>> {
        (0..self.n).map(|r| self.data[r * self.n..(r + 1) * self.n].to_vec()).collect()
    }

    /// Restriction to the given indices, kept in the given order.
    pub fn principal_submatrix(&self, indices: &[usize]) -> TransitionMatrix {
        let mut out = Self::zeros(indices.len());
        for (i, &r) in indices.iter().enumerate() {
            for (j, &c) in indices.iter().enumerate() {
                out.set(i, j, self.get(r, c).clone());
            }
        }
        out
    }

    /// Reorders rows and columns: entry `(i, j)` of the result is entry
    /// `(order[i], order[j])` of `self`.
    pub fn permuted(&self, order: &[usize]) -> TransitionMatrix {
        self.principal_submatrix(order)
    }

    pub fn is_permutation(&self) -> bool {
        let n = self.n;
        let mut col_hit = vec![false; n];
        for r in 0..n {
            let mut ones = 0;
            for c in 0..n {
                let v = self.get(r, c);
                if v.is_zero() {
                    continue;
                }
                if !v.is_one() || col_hit[c] {
                    return false;
                }
                col_hit[c] = true;
                ones += 1;
            }
            if ones != 1 {
                return false;
            }
        }
        true
    }

    /// Digraph with an edge `c → r` of multiplicity `M[r][c]`.
    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::new(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                let v = self.get(r, c);
                if !v.is_zero() {
                    g.add_edge(c, r, v.clone());
                }
            }
        }
        g
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v.to_f64().unwrap_or(f64::INFINITY)).collect())
            .collect()
    }

    /// Characteristic polynomial `det(xI − M)`, computed exactly with the
    /// Faddeev–LeVerrier recursion.
    pub fn charpoly(&self) -> Polynomial {
        let n = self.n;
        let a: Vec<BigInt> = self.data.iter().map(|v| BigInt::from(v.clone())).collect();
        let mut coeffs = vec![BigInt::zero(); n + 1];
        coeffs[n] = BigInt::one();
        let mut mk = vec![BigInt::zero(); n * n];
        for k in 1..=n {
            // mk <- A * mk + c_{n-k+1} I
            let mut next = vec![BigInt::zero(); n * n];
            for i in 0..n {
                for l in 0..n {
                    let x = &a[i * n + l];
                    if x.is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        let y = &mk[l * n + j];
                        if !y.is_zero() {
                            next[i * n + j] += x * y;
                        }
                    }
                }
            }
            for i in 0..n {
                next[i * n + i] += &coeffs[n - k + 1];
            }
            mk = next;
            // trace(A * mk)
            let mut tr = BigInt::zero();
            for i in 0..n {
                for l in 0..n {
                    tr += &a[i * n + l] * &mk[l * n + i];
                }
            }
            let q = -tr / BigInt::from(k);
            coeffs[n - k] = q;
        }
        Polynomial::new(coeffs)
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Integer polynomial, coefficients stored from the constant term upward.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    coeffs: Vec<BigInt>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(BigInt::zero());
        }
        Polynomial { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn one() -> Self {
        Self::from_i64(&[1])
    }

    /// `x^k − 1`.
    pub fn cycle(k: usize) -> Self {
        let mut c = vec![BigInt::zero(); k + 1];
        c[0] = BigInt::from(-1);
        c[k] = BigInt::one();
        Self::new(c)
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero()
    }

    pub fn mul(&self, rhs: &Polynomial) -> Polynomial {
        let mut out = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// Division by a monic polynomial; returns `(quotient, remainder)`.
    pub fn div_rem_monic(&self, divisor: &Polynomial) -> (Polynomial, Polynomial) {
        assert!(
            divisor.coeffs.last().is_some_and(One::is_one),
            "divisor must be monic"
        );
        let d = divisor.degree();
        if self.degree() < d || self.is_zero() {
            return (Polynomial::from_i64(&[0]), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![BigInt::zero(); self.degree() - d + 1];
        for i in (0..quot.len()).rev() {
            let lead = rem[i + d].clone();
            if lead.is_zero() {
                continue;
            }
            for (j, c) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= &lead * c;
            }
            quot[i] = lead;
        }
        rem.truncate(d.max(1));
        (Polynomial::new(quot), Polynomial::new(rem))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::NAN))
    }

    /// Largest real root, located by bisection above the Cauchy bound.
    pub fn largest_real_root(&self) -> Option<f64> {
        let n = self.degree();
        if n == 0 {
            return None;
        }
        let lead = self.coeffs[n].to_f64()?.abs();
        let bound = 1.0
            + self.coeffs[..n]
                .iter()
                .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY) / lead)
                .fold(0.0, f64::max);
        // scan downward for the first sign change
        let steps = 4096;
        let sign_hi = self.eval(bound).signum();
        let mut hi = bound;
        for i in 1..=steps {
            let lo = bound - 2.0 * bound * i as f64 / steps as f64;
            let v = self.eval(lo);
            if v == 0.0 {
                return Some(lo);
            }
            if v.signum() != sign_hi {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if self.eval(m).signum() == sign_hi {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                return Some(0.5 * (a + b));
            }
            hi = lo;
        }
        None
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() && !(first && i == 0) {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let show_coeff = !mag.is_one() || i == 0;
            if show_coeff {
                write!(f, "{mag}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

/// Rows of entries; entries beyond `u64` are written as decimal strings.
impl serde::Serialize for TransitionMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut rows = serializer.serialize_seq(Some(self.n))?;
        for row in self.rows() {
            let row: Vec<serde_json::Value> = row
                .iter()
                .map(|v| match v.to_u64() {
                    Some(x) => serde_json::Value::from(x),
                    None => serde_json::Value::from(v.to_string()),
                })
                .collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

/// A spectral radius estimate with rigorous enclosing bounds.
#[derive(Copy, Clone, Debug, PartialEq, serde::Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SpectralEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Spectral radius of a nonnegative matrix. The radius is the maximum over
/// the strongly connected blocks of the matrix digraph; each block is
/// handled by power iteration on `B + I` with Collatz–Wielandt bounds.
pub fn spectral_radius(m: &TransitionMatrix, tolerance: f64) -> SpectralEstimate {
    let g = m.digraph();
    let mut best = SpectralEstimate { value: 0.0, lower: 0.0, upper: 0.0 };
    for comp in g.strongly_connected_components() {
        let est = if comp.len() == 1 {
            let v = m.get(comp[0], comp[0]).to_f64().unwrap_or(f64::INFINITY);
            SpectralEstimate { value: v, lower: v, upper: v }
        } else {
            irreducible_radius(&m.principal_submatrix(&comp), tolerance)
        };
        if est.value > best.value {
            best = est;
        }
    }
    best
}

fn irreducible_radius(m: &TransitionMatrix, tolerance: f64) -> SpectralEstimate {
    let a = m.to_f64_rows();
    let n = a.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    for _ in 0..100_000 {
        // y = (A + I) x
        let mut y: Vec<f64> = x.clone();
        for i in 0..n {
            for j in 0..n {
                y[i] += a[i][j] * x[j];
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        lower = f64::max(lower, lo - 1.0);
        upper = f64::min(upper, hi - 1.0);
        let s: f64 = y.iter().sum();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / s;
        }
        if upper - lower <= tolerance * 0.01 * upper.max(1.0) {
            break;
        }
    }
    SpectralEstimate { value: 0.5 * (lower + upper), lower, upper }
}
