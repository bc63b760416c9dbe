//! Randomized Hadamard rotation and norm scaling.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::update::l2_norm;

/// Length after zero-padding to a power of two (0 stays 0).
pub fn padded_len(d: usize) -> usize {
    if d == 0 {
        0
    } else {
        d.next_power_of_two()
    }
}

/// In-place orthonormal Walsh-Hadamard transform; `x.len()` must be a
/// power of two. The transform is its own inverse.
pub fn fwht(x: &mut [f64]) {
    let n = x.len();
    assert!(n == 0 || n.is_power_of_two(), "length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, t) = (*a + *b, *a - *b);
                *a = s;
                *b = t;
            }
        }
        h *= 2;
    }
    if n > 1 {
        let scale = 1.0 / (n as f64).sqrt();
        x.iter_mut().for_each(|v| *v *= scale);
    }
}

/// The random diagonal: `+1` or `-1` per coordinate, keyed by `(seed, i)`.
pub fn rademacher_signs(seed: u64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if Rng::word_at(seed, i as u64) >> 63 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// `H D u` for an explicit sign diagonal; `u` is zero-padded to `signs.len()`.
pub fn hadamard_with_signs(u: &[f64], signs: &[f64]) -> Vec<f64> {
    assert!(u.len() <= signs.len());
    let mut y = vec![0.0; signs.len()];
    for ((y, &v), &s) in y.iter_mut().zip(u).zip(signs) {
        *y = s * v;
    }
    fwht(&mut y);
    y
}

/// `D H y`, truncated to `original_d`.
pub fn inverse_hadamard_with_signs(y: &[f64], signs: &[f64], original_d: usize) -> Vec<f64> {
    let mut x = y.to_vec();
    fwht(&mut x);
    x.truncate(original_d);
    x.iter_mut().zip(signs).for_each(|(v, &s)| *v *= s);
    x
}

/// Rotates `u`, zero-padded to the next power of two, by `H D`.
pub fn randomized_hadamard(u: &[f64], seed: u64) -> Vec<f64> {
    hadamard_with_signs(u, &rademacher_signs(seed, padded_len(u.len())))
}

pub fn inverse_hadamard(y: &[f64], seed: u64, original_d: usize) -> Result<Vec<f64>> {
    let n = padded_len(original_d);
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: n,
        });
    }
    Ok(inverse_hadamard_with_signs(y, &rademacher_signs(seed, n), original_d))
}

/// `(u / |u|, |u|)`; the zero vector maps to itself with norm 0.
pub fn normalize(u: &[f64]) -> (Vec<f64>, f64) {
    let norm = l2_norm(u);
    if norm == 0.0 {
        return (u.to_vec(), 0.0);
    }
    (u.iter().map(|v| v / norm).collect(), norm)
}

pub fn descale(v: &[f64], norm: f64) -> Vec<f64> {
    v.iter().map(|x| x * norm).collect()
}
