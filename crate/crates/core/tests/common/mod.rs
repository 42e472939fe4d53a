//! Shared helpers for the integration tests: the fixture corpus and small
//! numeric oracles written independently of the library.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use num_traits::ToPrimitive;
use ttforge::folding::FoldingSequence;
use ttforge::io::parse_input;
use ttforge::matrix::TransitionMatrix;

/// Corpus directory: `TTFORGE_FIXTURES` if set, else `fixtures/` at the
/// workspace root.
pub fn fixtures_dir() -> PathBuf {
    std::env::var_os("TTFORGE_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"))
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    let mut entries: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            if p.file_name().is_some_and(|n| n != "invalid") {
                collect(&p, out);
            }
        } else if p.to_string_lossy().ends_with(".ttf.json") {
            out.push(p);
        }
    }
}

/// Every valid corpus file, sorted by path.
pub fn fixture_paths() -> Vec<PathBuf> {
    let mut out = Vec::new();
    collect(&fixtures_dir(), &mut out);
    out
}

pub fn invalid_fixture_paths() -> Vec<PathBuf> {
    let mut out = Vec::new();
    collect(&fixtures_dir().join("invalid"), &mut out);
    out
}

pub fn load(path: &Path) -> FoldingSequence {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_input(&text, true)
        .and_then(|d| d.to_sequence())
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Corpus fixtures with a display name.
pub fn fixtures() -> Vec<(String, FoldingSequence)> {
    fixture_paths()
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let seq = load(&p);
            (name, seq)
        })
        .collect()
}

pub fn to_i128(m: &TransitionMatrix) -> Vec<Vec<i128>> {
    m.rows()
        .iter()
        .map(|r| r.iter().map(|v| v.to_i128().expect("entry fits")).collect())
        .collect()
}

/// Spectral radius of an irreducible nonnegative matrix: power iteration on
/// `A + I` until the Collatz–Wielandt bounds meet.
pub fn perron_root(m: &TransitionMatrix) -> f64 {
    let a: Vec<Vec<f64>> = to_i128(m).iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let n = a.len();
    let mut x = vec![1.0; n];
    for _ in 0..100_000 {
        let y: Vec<f64> = (0..n).map(|i| x[i] + (0..n).map(|j| a[i][j] * x[j]).sum::<f64>()).collect();
        let ratios = (0..n).map(|i| y[i] / x[i]);
        let (lo, hi) = ratios.fold((f64::MAX, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y.iter().map(|v| v / norm).collect();
        if hi - lo < 1e-13 * hi {
            return (lo + hi) / 2.0 - 1.0;
        }
    }
    panic!("power iteration did not converge")
}

/// Vertices reachable from `start` along edges `c -> r` with `m[r][c] > 0`.
pub fn reachable(m: &[Vec<i128>], start: usize) -> Vec<bool> {
    let n = m.len();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(c) = stack.pop() {
        for r in 0..n {
            if m[r][c] > 0 && !seen[r] {
                seen[r] = true;
                stack.push(r);
            }
        }
    }
    seen
}

pub fn strongly_connected(m: &[Vec<i128>]) -> bool {
    let n = m.len();
    let t: Vec<Vec<i128>> = (0..n).map(|r| (0..n).map(|c| m[c][r]).collect()).collect();
    n == 0 || (reachable(m, 0).iter().all(|&b| b) && reachable(&t, 0).iter().all(|&b| b))
}

/// Exact determinant by fraction-free Bareiss elimination.
pub fn det(mut a: Vec<Vec<i128>>) -> i128 {
    let n = a.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    if n == 0 {
        1
    } else {
        sign * a[n - 1][n - 1]
    }
}

/// `det(xI − M)` interpolated from its values at `0..=n`; coefficients from
/// the constant term up.
pub fn charpoly_by_interpolation(m: &[Vec<i128>]) -> Vec<i128> {
    let n = m.len();
    let values: Vec<i128> = (0..=n as i128)
        .map(|x| {
            let a = (0..n)
                .map(|i| (0..n).map(|j| if i == j { x - m[i][j] } else { -m[i][j] }).collect())
                .collect();
            det(a)
        })
        .collect();
    // Newton divided differences over the integer nodes 0..=n
    let mut dd: Vec<(i128, i128)> = values.iter().map(|&v| (v, 1)).collect();
    let mut newton = vec![dd[0]];
    for level in 1..=n {
        for i in (level..=n).rev() {
            let (a, b) = dd[i];
            let (c, d) = dd[i - 1];
            let num = a * d - c * b;
            let den = b * d * level as i128;
            let g = gcd(num, den);
            dd[i] = (num / g, den / g);
        }
        newton.push(dd[level]);
    }
    // expand sum newton[k] * x(x-1)...(x-k+1)
    let mut coeffs = vec![0i128; n + 1];
    let mut basis = vec![1i128];
    for (k, &(num, den)) in newton.iter().enumerate() {
        assert!(num % den == 0, "interpolated coefficient not integral");
        for (i, &b) in basis.iter().enumerate() {
            coeffs[i] += num / den * b;
        }
        let mut next = vec![0i128; basis.len() + 1];
        for (i, &b) in basis.iter().enumerate() {
            next[i + 1] += b;
            next[i] -= k as i128 * b;
        }
        basis = next;
    }
    trim(coeffs)
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    if a == 0 {
        1
    } else {
        a
    }
}

pub fn trim(mut p: Vec<i128>) -> Vec<i128> {
    while p.len() > 1 && *p.last().unwrap() == 0 {
        p.pop();
    }
    p
}

pub fn poly_mul(a: &[i128], b: &[i128]) -> Vec<i128> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

/// Long division by a monic divisor: (quotient, remainder).
pub fn poly_divmod(a: &[i128], d: &[i128]) -> (Vec<i128>, Vec<i128>) {
    assert_eq!(*d.last().unwrap(), 1, "divisor must be monic");
    let mut r = a.to_vec();
    if a.len() < d.len() {
        return (vec![0], trim(r));
    }
    let mut q = vec![0; a.len() - d.len() + 1];
    for k in (0..q.len()).rev() {
        let c = r[k + d.len() - 1];
        q[k] = c;
        for (i, &y) in d.iter().enumerate() {
            r[k + i] -= c * y;
        }
    }
    (trim(q), trim(r))
}
