//! Rate-distortion control: the per-client Lagrangian, step-size voting,
//! sweeps over a step grid, and budget-driven step selection.

use rayon::prelude::*;
use serde::Serialize;

use crate::bitcode::UniversalCode;
use crate::codec::symbols_bit_len;
use crate::error::{Error, Result};
use crate::quantizer::stochastic_round;
use crate::rng::{derive_seed, Rng};
use crate::update::{check_step, symbol_stats, ClientUpdate};

/// Step sizes spanning 0.05 to 17.5, roughly log-spaced.
pub const DEFAULT_GRID: [f64; 16] = [
    0.05, 0.075, 0.1, 0.15, 0.25, 0.35, 0.5, 0.75, 1.0, 1.5, 2.5, 3.5, 5.0, 7.5, 12.5, 17.5,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RDPoint {
    pub delta: f64,
    /// Payload bits per element.
    pub mean_rate: f64,
    /// Squared error per element.
    pub mean_distortion: f64,
    /// Empirical entropy of the quantized symbols, bits per symbol.
    pub mean_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeSetting {
    pub lambda: f64,
    pub delta_grid: Vec<f64>,
}

impl LagrangeSetting {
    pub fn new(lambda: f64, delta_grid: Vec<f64>) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        validate_grid(&delta_grid)?;
        Ok(Self { lambda, delta_grid })
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("step grid"));
    }
    for &d in grid {
        check_step(d)?;
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("step grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Stream used for the rounding draw of one update at one step size.
pub fn draw_rng(base: u64, delta: f64) -> Rng {
    Rng::new(derive_seed(base, &[delta.to_bits()]))
}

/// Rate and distortion of one realized stochastic rounding. Payload bits
/// are counted without materializing the bit string.
fn rate_distortion(u: &[f64], delta: f64, rng: &mut Rng) -> Result<(usize, f64, Vec<i64>)> {
    let step = delta as f32 as f64;
    let q = stochastic_round(u, step, rng)?;
    let bits = symbols_bit_len(&q, UniversalCode::Gamma);
    let dist = u
        .iter()
        .zip(&q)
        .map(|(&v, &s)| {
            let e = v - step * s as f64;
            e * e
        })
        .sum();
    Ok((bits, dist, q))
}

/// Payload bits of the encoded update plus `lambda` times its realized
/// squared error. Both terms come from the same rounding draw.
pub fn client_objective(u: &[f64], delta: f64, lambda: f64, rng: &mut Rng) -> Result<f64> {
    let (bits, dist, _) = rate_distortion(u, delta, rng)?;
    Ok(bits as f64 + lambda * dist)
}

/// The grid step minimizing the client objective, ties toward the larger
/// step. One word of `rng` keys the per-step rounding draws.
pub fn client_vote(u: &[f64], lambda: f64, grid: &[f64], rng: &mut Rng) -> Result<f64> {
    validate_grid(grid)?;
    let base = rng.next_word();
    let mut best = (f64::INFINITY, grid[0]);
    for &delta in grid {
        let obj = client_objective(u, delta, lambda, &mut draw_rng(base, delta))?;
        if obj <= best.0 {
            best = (obj, delta);
        }
    }
    Ok(best.1)
}

/// Stream for one update, derived from the master seed.
pub fn update_rng(master_seed: u64, update: &ClientUpdate) -> Rng {
    Rng::for_client(master_seed, update.round, update.client_id)
}

/// Vote counts per grid step, in grid order; totals the number of updates.
pub fn vote_histogram(
    updates: &[ClientUpdate],
    lambda: f64,
    grid: &[f64],
    master_seed: u64,
) -> Result<Vec<(f64, usize)>> {
    if updates.is_empty() {
        return Err(Error::Empty("no updates to vote"));
    }
    validate_grid(grid)?;
    let votes = updates
        .par_iter()
        .map(|up| client_vote(&up.values, lambda, grid, &mut update_rng(master_seed, up)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(grid
        .iter()
        .map(|&d| (d, votes.iter().filter(|&&v| v == d).count()))
        .collect())
}

/// Most-voted step (smaller step on a tie) and its share of the votes.
pub fn modal_vote(histogram: &[(f64, usize)]) -> Option<(f64, f64)> {
    let total: usize = histogram.iter().map(|h| h.1).sum();
    if total == 0 {
        return None;
    }
    let (delta, count) = histogram
        .iter()
        .fold((f64::NAN, 0), |acc, &(d, c)| if c > acc.1 { (d, c) } else { acc });
    Some((delta, count as f64 / total as f64))
}

/// Mean per-element rate, distortion and entropy over `updates` at each
/// grid step.
pub fn rd_sweep(updates: &[ClientUpdate], grid: &[f64], master_seed: u64) -> Result<Vec<RDPoint>> {
    if updates.is_empty() {
        return Err(Error::Empty("no updates to sweep"));
    }
    validate_grid(grid)?;
    grid.iter()
        .map(|&delta| {
            let per_update = updates
                .par_iter()
                .map(|up| {
                    let base = update_rng(master_seed, up).next_word();
                    let (bits, dist, q) = rate_distortion(&up.values, delta, &mut draw_rng(base, delta))?;
                    let d = up.dim().max(1) as f64;
                    let entropy = if q.is_empty() { 0.0 } else { symbol_stats(&q)?.entropy_bits };
                    Ok((bits as f64 / d, dist / d, entropy))
                })
                .collect::<Result<Vec<_>>>()?;
            let n = per_update.len() as f64;
            let (r, dd, h) = per_update
                .iter()
                .fold((0.0, 0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2));
            Ok(RDPoint {
                delta,
                mean_rate: r / n,
                mean_distortion: dd / n,
                mean_entropy: h / n,
            })
        })
        .collect()
}

/// Smallest step whose mean rate fits the budget.
pub fn select_delta_for_budget(curve: &[RDPoint], budget_bits_per_element: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Empty("rate-distortion curve"));
    }
    curve
        .iter()
        .filter(|p| p.mean_rate <= budget_bits_per_element)
        .map(|p| p.delta)
        .min_by(|a, b| a.total_cmp(b))
        .ok_or_else(|| Error::InfeasibleBudget {
            budget: budget_bits_per_element,
            coarsest: curve.iter().map(|p| p.mean_rate).fold(f64::INFINITY, f64::min),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_update, encode_update};
    use crate::update::distortion;

    /// Objective computed the long way: full encode, full decode.
    fn objective_oracle(u: &[f64], delta: f64, lambda: f64, base: u64) -> f64 {
        let e = encode_update(u, delta, &mut draw_rng(base, delta), UniversalCode::Gamma).unwrap();
        let rec = decode_update(&e).unwrap();
        e.payload.len() as f64 + lambda * distortion(u, &rec).unwrap()
    }

    #[test]
    fn objective_examples() {
        let mut r = Rng::new(0);
        assert_eq!(client_objective(&[1.0], 1.0, 10.0, &mut r).unwrap(), 3.0);
        assert_eq!(client_objective(&[1.0], 0.5, 10.0, &mut r).unwrap(), 5.0);
        let u = [0.3, -1.2, 0.0, 4.4];
        let a = client_objective(&u, 0.7, 0.0, &mut Rng::new(5)).unwrap();
        let b = client_objective(&u, 0.7, 3.0, &mut Rng::new(5)).unwrap();
        assert!(a <= b);
        assert_eq!(a, a.round());
    }

    #[test]
    fn objective_matches_full_codec() {
        let mut src = Rng::new(17);
        for _ in 0..50 {
            let u: Vec<f64> = (0..64).map(|_| 6.0 * src.next_f64() - 3.0).collect();
            let delta = 0.05 + src.next_f64();
            let lambda = 10.0 * src.next_f64();
            let base = src.next_word();
            let fast = client_objective(&u, delta, lambda, &mut draw_rng(base, delta)).unwrap();
            assert!((fast - objective_oracle(&u, delta, lambda, base)).abs() < 1e-9);
        }
    }

    #[test]
    fn vote_examples() {
        assert_eq!(client_vote(&[1.0], 10.0, &[0.5, 1.0], &mut Rng::new(0)).unwrap(), 1.0);
        let u = [0.3, -2.0, 0.01];
        assert_eq!(client_vote(&u, 0.0, &DEFAULT_GRID, &mut Rng::new(0)).unwrap(), 17.5);
        assert!(client_vote(&u, 1.0, &[], &mut Rng::new(0)).is_err());
        assert!(client_vote(&u, 1.0, &[1.0, 0.5], &mut Rng::new(0)).is_err());
    }

    #[test]
    fn single_and_identical_clients() {
        let up = ClientUpdate::new(vec![0.4, -0.9, 2.0], 1.0, 3, 0).unwrap();
        let h = vote_histogram(std::slice::from_ref(&up), 1.0, &DEFAULT_GRID, 1).unwrap();
        assert_eq!(h.iter().map(|x| x.1).sum::<usize>(), 1);
        assert_eq!(h.iter().filter(|x| x.1 > 0).count(), 1);
        // Same id and round means the same derived stream.
        let h = vote_histogram(&vec![up; 5], 1.0, &DEFAULT_GRID, 1).unwrap();
        assert_eq!(h.iter().filter(|x| x.1 > 0).count(), 1);
        assert_eq!(modal_vote(&h).unwrap().1, 1.0);
    }

    #[test]
    fn lambda_extremes() {
        let mut src = Rng::new(4);
        let u: Vec<f64> = (0..256).map(|_| 2.0 * src.next_f64() - 1.0).collect();
        assert_eq!(client_vote(&u, 1e12, &DEFAULT_GRID, &mut Rng::new(1)).unwrap(), 0.05);
        assert_eq!(client_vote(&u, 0.0, &DEFAULT_GRID, &mut Rng::new(1)).unwrap(), 17.5);
    }

    fn point(delta: f64, rate: f64) -> RDPoint {
        RDPoint {
            delta,
            mean_rate: rate,
            mean_distortion: 0.0,
            mean_entropy: 0.0,
        }
    }

    #[test]
    fn budget_selection() {
        let curve = vec![point(0.1, 8.0), point(0.5, 4.0), point(1.0, 2.0)];
        assert_eq!(select_delta_for_budget(&curve, 10.0).unwrap(), 0.1);
        assert_eq!(select_delta_for_budget(&curve, 5.0).unwrap(), 0.5);
        assert_eq!(select_delta_for_budget(&curve, 2.0).unwrap(), 1.0);
        assert!(matches!(
            select_delta_for_budget(&curve, 1.0),
            Err(Error::InfeasibleBudget { coarsest, .. }) if coarsest == 2.0
        ));
    }

    #[test]
    fn sweep_basics() {
        let zero = ClientUpdate::new(vec![0.0; 32], 1.0, 0, 0).unwrap();
        let pts = rd_sweep(&[zero.clone()], &[0.1, 1.0], 0).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|p| p.mean_distortion == 0.0 && p.mean_entropy == 0.0));
        assert_eq!(rd_sweep(&[zero], &[0.3], 0).unwrap().len(), 1);
        assert!(rd_sweep(&[], &[0.3], 0).is_err());
    }
}
