//! One driver per experiment kind, plus the reusable analyses they wrap.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{ExperimentConfig, Output, UpdateSource};
use crate::bitcode::UniversalCode;
use crate::codec::{decode_update, encode_with, symbols_bit_len, HEADER_BITS};
use crate::compress::Compressor;
use crate::error::{Error, Result};
use crate::fedsim::{generate_task, run_training_observed, FedConfig, FederatedDataset, TaskSpec, TrainingTrace};
use crate::quantizer::stochastic_round;
use crate::rd::{draw_rng, modal_vote, rd_sweep, update_rng, vote_histogram, RDPoint};
use crate::rng::derive_seed;
use crate::transforms::{inverse_hadamard, randomized_hadamard};
use crate::update::{distortion, l2_norm, symbol_stats, ClientUpdate, QuantizerKind};

const TASK_TAG: u64 = 0x7a5c;
const TRAIN_TAG: u64 = 0x7a1e;
const ROTATION_TAG: u64 = 0x207a;
const DRIVE_TAG: u64 = 0xd21e;

/// CSV cell; `f64` uses the shortest round-trip form.
fn cell(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(cell).unwrap_or_default()
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        writeln!(out, "{}", r.join(",")).unwrap();
    }
    out
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Seeds for trial `t`: the dataset and the training loop.
pub fn trial_seeds(master_seed: u64, t: usize) -> (u64, u64) {
    (
        derive_seed(master_seed, &[TASK_TAG, t as u64]),
        derive_seed(master_seed, &[TRAIN_TAG, t as u64]),
    )
}

pub fn trial_task(spec: &TaskSpec, master_seed: u64, t: usize) -> Result<FederatedDataset> {
    let (task_seed, _) = trial_seeds(master_seed, t);
    generate_task(&TaskSpec {
        master_seed: task_seed,
        ..spec.clone()
    })
}

/// Updates for update-based experiments: synthetic, or raw client
/// updates observed during trial 0 of the configured training run.
pub fn collect_updates(cfg: &ExperimentConfig) -> Result<Vec<ClientUpdate>> {
    let source = cfg.updates.as_ref().ok_or(Error::Empty("no [updates] section"))?;
    match source {
        UpdateSource::Training { every } => {
            let (spec, tr) = cfg.task.as_ref().zip(cfg.training.as_ref()).ok_or_else(|| {
                Error::InvalidParameter("training updates need [task] and [training]".into())
            })?;
            let task = trial_task(spec, cfg.master_seed, 0)?;
            let compressor = tr.compressor.clone().unwrap_or(Compressor::Identity);
            let fed = tr.fed_config(compressor, trial_seeds(cfg.master_seed, 0).1);
            let mut out = Vec::new();
            run_training_observed(&task, &fed, |round, ups| {
                if round % every == 0 {
                    out.extend_from_slice(ups);
                }
            })?;
            Ok(out)
        }
        synthetic => super::generate_updates(synthetic, cfg.master_seed),
    }
}

// ---- rd sweep -------------------------------------------------------------

pub const RD_HEADER: &str = "delta,mean_rate_bits_per_elem,mean_distortion_per_elem,mean_entropy_bits";

pub fn rd_csv(points: &[RDPoint]) -> String {
    csv(
        RD_HEADER,
        points.iter().map(|p| {
            vec![cell(p.delta), cell(p.mean_rate), cell(p.mean_distortion), cell(p.mean_entropy)]
        }),
    )
}

/// Sparsity and coding overhead at each step, from the same draws as
/// [`rd_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolRow {
    pub delta: f64,
    pub mean_sparsity: f64,
    pub payload_bits_per_elem: f64,
    pub total_bits_per_elem: f64,
    pub mean_entropy_bits: f64,
}

pub const SYMBOL_HEADER: &str = "delta,mean_sparsity,payload_bits_per_elem,total_bits_per_elem_with_header,mean_entropy_bits,payload_over_entropy";

pub fn symbol_rows(updates: &[ClientUpdate], grid: &[f64], master_seed: u64) -> Result<Vec<SymbolRow>> {
    grid.iter()
        .map(|&delta| {
            let step = delta as f32 as f64;
            let per = updates
                .par_iter()
                .map(|up| {
                    let base = update_rng(master_seed, up).next_word();
                    let q = stochastic_round(&up.values, step, &mut draw_rng(base, delta))?;
                    let d = up.dim().max(1) as f64;
                    let bits = symbols_bit_len(&q, UniversalCode::Gamma) as f64;
                    let s = if q.is_empty() { Default::default() } else { symbol_stats(&q)? };
                    Ok((s.sparsity, bits / d, (bits + HEADER_BITS as f64) / d, s.entropy_bits))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SymbolRow {
                delta,
                mean_sparsity: mean(per.iter().map(|p| p.0)),
                payload_bits_per_elem: mean(per.iter().map(|p| p.1)),
                total_bits_per_elem: mean(per.iter().map(|p| p.2)),
                mean_entropy_bits: mean(per.iter().map(|p| p.3)),
            })
        })
        .collect()
}

pub fn run_rd_sweep(cfg: &ExperimentConfig, summary: &mut BTreeMap<String, f64>) -> Result<Vec<Output>> {
    let updates = collect_updates(cfg)?;
    let points = rd_sweep(&updates, &cfg.grid, cfg.master_seed)?;
    let symbols = symbol_rows(&updates, &cfg.grid, cfg.master_seed)?;
    summary.insert("num_updates".into(), updates.len() as f64);
    let stats = csv(
        SYMBOL_HEADER,
        symbols.iter().map(|r| {
            let overhead = if r.mean_entropy_bits > 0.0 {
                r.payload_bits_per_elem / r.mean_entropy_bits
            } else {
                f64::INFINITY
            };
            vec![
                cell(r.delta),
                cell(r.mean_sparsity),
                cell(r.payload_bits_per_elem),
                cell(r.total_bits_per_elem),
                cell(r.mean_entropy_bits),
                cell(overhead),
            ]
        }),
    );
    Ok(vec![
        Output {
            name: "rd_sweep.csv".into(),
            contents: rd_csv(&points),
        },
        Output {
            name: "symbol_stats.csv".into(),
            contents: stats,
        },
    ])
}

// ---- votes ----------------------------------------------------------------

pub const VOTE_HEADER: &str = "lambda,delta,votes,fraction";
pub const VOTE_SUMMARY_HEADER: &str = "lambda,modal_delta,modal_fraction,num_updates";

pub fn run_vote(cfg: &ExperimentConfig, summary: &mut BTreeMap<String, f64>) -> Result<Vec<Output>> {
    let updates = collect_updates(cfg)?;
    let mut rows = Vec::new();
    let mut modal_rows = Vec::new();
    for &lambda in &cfg.lambdas {
        let hist = vote_histogram(&updates, lambda, &cfg.grid, cfg.master_seed)?;
        let total = updates.len() as f64;
        for &(delta, count) in &hist {
            rows.push(vec![cell(lambda), cell(delta), count.to_string(), cell(count as f64 / total)]);
        }
        let (delta, frac) = modal_vote(&hist).expect("nonempty votes");
        summary.insert(format!("modal_fraction@lambda={lambda}"), frac);
        summary.insert(format!("modal_delta@lambda={lambda}"), delta);
        modal_rows.push(vec![cell(lambda), cell(delta), cell(frac), updates.len().to_string()]);
    }
    Ok(vec![
        Output {
            name: "votes.csv".into(),
            contents: csv(VOTE_HEADER, rows),
        },
        Output {
            name: "vote_summary.csv".into(),
            contents: csv(VOTE_SUMMARY_HEADER, modal_rows),
        },
    ])
}

// ---- training ---------------------------------------------------------------

/// Runs `trials` independent trainings of one compressor.
pub fn train_trials(
    spec: &TaskSpec,
    section: &super::TrainingSection,
    compressor: &Compressor,
    master_seed: u64,
    trials: usize,
) -> Result<Vec<(FedConfig, TrainingTrace)>> {
    (0..trials)
        .map(|t| {
            let task = trial_task(spec, master_seed, t)?;
            let fed = section.fed_config(compressor.clone(), trial_seeds(master_seed, t).1);
            let trace = run_training_observed(&task, &fed, |_, _| {})?;
            Ok((fed, trace))
        })
        .collect()
}

fn training_sections(cfg: &ExperimentConfig) -> Result<(&TaskSpec, &super::TrainingSection)> {
    cfg.task
        .as_ref()
        .zip(cfg.training.as_ref())
        .ok_or_else(|| Error::InvalidParameter("needs [task] and [training]".into()))
}

#[derive(serde::Serialize)]
struct Sidecar<'a> {
    task: TaskSpec,
    training: &'a FedConfig,
}

pub fn run_train(cfg: &ExperimentConfig, summary: &mut BTreeMap<String, f64>) -> Result<Vec<Output>> {
    let (spec, section) = training_sections(cfg)?;
    let compressor = section
        .compressor
        .clone()
        .ok_or_else(|| Error::InvalidParameter("train needs [training.compressor]".into()))?;
    let runs = train_trials(spec, section, &compressor, cfg.master_seed, cfg.trials)?;
    let mut outputs = Vec::new();
    for (t, (fed, trace)) in runs.iter().enumerate() {
        let suffix = if t == 0 { String::new() } else { format!("_trial{t}") };
        let sidecar = Sidecar {
            task: TaskSpec {
                master_seed: trial_seeds(cfg.master_seed, t).0,
                ..spec.clone()
            },
            training: fed,
        };
        outputs.push(Output {
            name: format!("training{suffix}.csv"),
            contents: trace.to_csv(),
        });
        outputs.push(Output {
            name: format!("training{suffix}.config.toml"),
            contents: toml::to_string(&sidecar).expect("sidecar serializes"),
        });
        if let Some(a) = trace.final_accuracy() {
            summary.insert(format!("final_accuracy_trial{t}"), a);
        }
        if let Some(l) = trace.final_loss() {
            summary.insert(format!("final_loss_trial{t}"), l);
        }
        summary.insert(format!("upstream_bits_trial{t}"), trace.total_bits() as f64);
    }
    Ok(outputs)
}

// ---- compare ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: &'static str,
    pub parameter: f64,
    pub trials: usize,
    pub mean_rate: f64,
    pub mean_upstream_bits: f64,
    pub final_accuracy: Option<f64>,
    pub final_accuracy_std: Option<f64>,
    pub final_loss: Option<f64>,
    pub mean_distortion: f64,
}

pub const COMPARE_HEADER: &str = "method,parameter,trials,mean_rate_bits_per_elem,mean_upstream_bits,final_accuracy,final_accuracy_std,final_eval_loss,mean_distortion_per_elem";

pub fn summarize_runs(compressor: &Compressor, runs: &[(FedConfig, TrainingTrace)]) -> CompareRow {
    let acc: Vec<f64> = runs.iter().filter_map(|r| r.1.final_accuracy()).collect();
    let loss: Vec<f64> = runs.iter().filter_map(|r| r.1.final_loss()).collect();
    CompareRow {
        method: compressor.method(),
        parameter: compressor.parameter(),
        trials: runs.len(),
        mean_rate: mean(runs.iter().map(|r| r.1.mean_rate())),
        mean_upstream_bits: mean(runs.iter().map(|r| r.1.total_bits() as f64)),
        final_accuracy: (!acc.is_empty()).then(|| mean(acc.iter().copied())),
        final_accuracy_std: (!acc.is_empty()).then(|| std_dev(&acc)),
        final_loss: (!loss.is_empty()).then(|| mean(loss.iter().copied())),
        mean_distortion: mean(runs.iter().map(|r| r.1.mean_distortion())),
    }
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    csv(
        COMPARE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.method.to_string(),
                cell(r.parameter),
                r.trials.to_string(),
                cell(r.mean_rate),
                cell(r.mean_upstream_bits),
                opt_cell(r.final_accuracy),
                opt_cell(r.final_accuracy_std),
                opt_cell(r.final_loss),
                cell(r.mean_distortion),
            ]
        }),
    )
}

pub fn run_compare(cfg: &ExperimentConfig, summary: &mut BTreeMap<String, f64>) -> Result<Vec<Output>> {
    let (spec, section) = training_sections(cfg)?;
    let grid = cfg.compare.clone().unwrap_or_default();
    let compressors = grid.compressors(&cfg.grid, derive_seed(cfg.master_seed, &[DRIVE_TAG]));
    let mut rows = Vec::with_capacity(compressors.len());
    for c in &compressors {
        log::info!("compare: {c}");
        let runs = train_trials(spec, section, c, cfg.master_seed, cfg.trials)?;
        rows.push(summarize_runs(c, &runs));
    }
    summary.insert("rows".into(), rows.len() as f64);
    Ok(vec![Output {
        name: "compare.csv".into(),
        contents: compare_csv(&rows),
    }])
}

// ---- rotation ablation ------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RotationRow {
    pub delta: f64,
    pub entropy_plain: f64,
    pub entropy_rotated: f64,
    pub distortion_plain: f64,
    pub distortion_rotated: f64,
    pub rate_plain: f64,
    pub rate_rotated: f64,
}

pub const ROTATION_HEADER: &str = "delta,entropy_plain_bits,entropy_rotated_bits,distortion_plain_per_elem,distortion_rotated_per_elem,rate_plain_bits_per_elem,rate_rotated_bits_per_elem";

/// Stochastic rounding with and without a fixed randomized Hadamard
/// rotation (one global seed). Rotated entropy excludes padded
/// coordinates; rotated rate counts them.
pub fn rotation_ablation(
    updates: &[ClientUpdate],
    grid: &[f64],
    master_seed: u64,
) -> Result<Vec<RotationRow>> {
    let rot_seed = derive_seed(master_seed, &[ROTATION_TAG]);
    let rotated: Vec<Vec<f64>> = updates.par_iter().map(|u| randomized_hadamard(&u.values, rot_seed)).collect();
    grid.iter()
        .map(|&delta| {
            let step = delta as f32 as f64;
            let per = updates
                .par_iter()
                .zip(&rotated)
                .map(|(up, y)| {
                    let d = up.dim();
                    let df = d.max(1) as f64;
                    let base = update_rng(master_seed, up).next_word();
                    let q = stochastic_round(&up.values, step, &mut draw_rng(base, delta))?;
                    let rec: Vec<f64> = q.iter().map(|&s| step * s as f64).collect();
                    let qr = stochastic_round(y, step, &mut draw_rng(base ^ ROTATION_TAG, delta))?;
                    let yr: Vec<f64> = qr.iter().map(|&s| step * s as f64).collect();
                    let rec_r = inverse_hadamard(&yr, rot_seed, d)?;
                    let h = |s: &[i64]| -> Result<f64> {
                        Ok(if s.is_empty() { 0.0 } else { symbol_stats(s)?.entropy_bits })
                    };
                    Ok([
                        h(&q)?,
                        h(&qr[..d])?,
                        distortion(&up.values, &rec)? / df,
                        distortion(&up.values, &rec_r)? / df,
                        symbols_bit_len(&q, UniversalCode::Gamma) as f64 / df,
                        symbols_bit_len(&qr, UniversalCode::Gamma) as f64 / df,
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            let m = |i: usize| mean(per.iter().map(|p| p[i]));
            Ok(RotationRow {
                delta,
                entropy_plain: m(0),
                entropy_rotated: m(1),
                distortion_plain: m(2),
                distortion_rotated: m(3),
                rate_plain: m(4),
                rate_rotated: m(5),
            })
        })
        .collect()
}

pub fn run_ablate_rotation(cfg: &ExperimentConfig, summary: &mut BTreeMap<String, f64>) -> Result<Vec<Output>> {
    let updates = collect_updates(cfg)?;
    let rows = rotation_ablation(&updates, &cfg.grid, cfg.master_seed)?;
    let held = rows.iter().filter(|r| r.entropy_rotated >= r.entropy_plain).count();
    summary.insert("entropy_increase_fraction".into(), held as f64 / rows.len() as f64);
    let body = csv(
        ROTATION_HEADER,
        rows.iter().map(|r| {
            vec![
                cell(r.delta),
                cell(r.entropy_plain),
                cell(r.entropy_rotated),
                cell(r.distortion_plain),
                cell(r.distortion_rotated),
                cell(r.rate_plain),
                cell(r.rate_rotated),
            ]
        }),
    );
    Ok(vec![Output {
        name: "ablate_rotation.csv".into(),
        contents: body,
    }])
}

// ---- normalization ablation -------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationRow {
    pub delta: f64,
    pub rate_fixed: f64,
    pub distortion_fixed: f64,
    /// Step applied to the unit-norm update.
    pub normalized_step: f64,
    pub rate_normalized: f64,
    pub distortion_normalized: f64,
    /// `|R_norm - R_fixed| / R_fixed`.
    pub rate_gap: f64,
}

pub const NORMALIZATION_HEADER: &str = "delta,rate_fixed_bits_per_elem,distortion_fixed_per_elem,normalized_step,rate_normalized_bits_per_elem,distortion_normalized_per_elem,relative_rate_gap";

/// Total payload bits and total squared error over all updates.
fn totals(per: &[(f64, f64)]) -> (f64, f64) {
    per.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1))
}

fn fixed_point(updates: &[ClientUpdate], delta: f64, master_seed: u64) -> Result<(f64, f64)> {
    let step = delta as f32 as f64;
    let per = updates
        .par_iter()
        .map(|up| {
            let base = update_rng(master_seed, up).next_word();
            let q = stochastic_round(&up.values, step, &mut draw_rng(base, delta))?;
            let rec: Vec<f64> = q.iter().map(|&s| step * s as f64).collect();
            Ok((symbols_bit_len(&q, UniversalCode::Gamma) as f64, distortion(&up.values, &rec)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(totals(&per))
}

/// Per-client step `||u|| * s`, sent in the header's step field, so no
/// extra side bits. One rounding stream per update regardless of `s`,
/// which keeps the rate nearly monotone for the bisection.
fn normalized_point(updates: &[ClientUpdate], s: f64, master_seed: u64) -> Result<(f64, f64)> {
    let per = updates
        .par_iter()
        .map(|up| {
            let norm = l2_norm(&up.values);
            if norm == 0.0 {
                let zeros = vec![0i64; up.dim()];
                return Ok((symbols_bit_len(&zeros, UniversalCode::Gamma) as f64, 0.0));
            }
            let step = (norm * s) as f32 as f64;
            let mut rng = update_rng(master_seed, up).fork(0xa0);
            let q = stochastic_round(&up.values, step, &mut rng)?;
            let rec: Vec<f64> = q.iter().map(|&v| step * v as f64).collect();
            Ok((symbols_bit_len(&q, UniversalCode::Gamma) as f64, distortion(&up.values, &rec)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(totals(&per))
}

/// For each fixed step, finds a normalized step with matching total rate
/// by geometric bisection and compares distortion.
pub fn normalization_ablation(
    updates: &[ClientUpdate],
    grid: &[f64],
    master_seed: u64,
) -> Result<Vec<NormalizationRow>> {
    if updates.is_empty() {
        return Err(Error::Empty("no updates"));
    }
    let elems: f64 = updates.iter().map(|u| u.dim() as f64).sum::<f64>().max(1.0);
    grid.iter()
        .map(|&delta| {
            let (r_fixed, d_fixed) = fixed_point(updates, delta, master_seed)?;
            let (mut lo, mut hi) = (1e-9f64, 1e3f64);
            let mut best: Option<(f64, f64, f64, f64)> = None; // gap, s, rate, dist
            for _ in 0..60 {
                let s = (lo * hi).sqrt();
                let (r, d) = normalized_point(updates, s, master_seed)?;
                let gap = (r - r_fixed).abs() / r_fixed.max(1.0);
                if best.map_or(true, |b| gap < b.0) {
                    best = Some((gap, s, r, d));
                }
                if gap < 0.002 {
                    break;
                }
                if r > r_fixed {
                    lo = s;
                } else {
                    hi = s;
                }
            }
            let (gap, s, r, d) = best.expect("at least one probe");
            Ok(NormalizationRow {
                delta,
                rate_fixed: r_fixed / elems,
                distortion_fixed: d_fixed / elems,
                normalized_step: s,
                rate_normalized: r / elems,
                distortion_normalized: d / elems,
                rate_gap: gap,
            })
        })
        .collect()
}

pub fn run_ablate_normalization(cfg: &ExperimentConfig, summary: &mut BTreeMap<String, f64>) -> Result<Vec<Output>> {
    let updates = collect_updates(cfg)?;
    let rows = normalization_ablation(&updates, &cfg.grid, cfg.master_seed)?;
    let matched: Vec<&NormalizationRow> = rows.iter().filter(|r| r.rate_gap <= 0.05).collect();
    let wins = matched.iter().filter(|r| r.distortion_fixed <= r.distortion_normalized).count();
    summary.insert("rate_matched_rows".into(), matched.len() as f64);
    summary.insert("fixed_step_wins".into(), wins as f64);
    let body = csv(
        NORMALIZATION_HEADER,
        rows.iter().map(|r| {
            vec![
                cell(r.delta),
                cell(r.rate_fixed),
                cell(r.distortion_fixed),
                cell(r.normalized_step),
                cell(r.rate_normalized),
                cell(r.distortion_normalized),
                cell(r.rate_gap),
            ]
        }),
    );
    Ok(vec![Output {
        name: "ablate_normalization.csv".into(),
        contents: body,
    }])
}

// ---- rounding comparison ----------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingRow {
    pub quantizer: QuantizerKind,
    pub delta: f64,
    pub rate: f64,
    pub distortion: f64,
    pub entropy: f64,
    /// Mean signed reconstruction error per element.
    pub bias: f64,
}

pub const ROUNDING_HEADER: &str = "quantizer,delta,payload_bits_per_elem,distortion_per_elem,mean_entropy_bits,mean_error_per_elem";

/// Full encode/decode of every update with each quantizer at each step.
pub fn rounding_comparison(
    updates: &[ClientUpdate],
    grid: &[f64],
    master_seed: u64,
) -> Result<Vec<RoundingRow>> {
    let mut rows = Vec::new();
    for kind in QuantizerKind::ALL {
        for &delta in grid {
            let per = updates
                .par_iter()
                .map(|up| {
                    let base = update_rng(master_seed, up).next_word();
                    let mut rng = draw_rng(base, delta);
                    let e = encode_with(&up.values, delta, kind, &mut rng, UniversalCode::Gamma)?;
                    let rec = decode_update(&e)?;
                    let sym = crate::codec::decode_symbols(&e)?.symbols;
                    let df = up.dim().max(1) as f64;
                    let bias = rec.iter().zip(&up.values).map(|(a, b)| a - b).sum::<f64>() / df;
                    let h = if sym.is_empty() { 0.0 } else { symbol_stats(&sym)?.entropy_bits };
                    Ok([e.payload.len() as f64 / df, distortion(&up.values, &rec)? / df, h, bias])
                })
                .collect::<Result<Vec<_>>>()?;
            let m = |i: usize| mean(per.iter().map(|p| p[i]));
            rows.push(RoundingRow {
                quantizer: kind,
                delta,
                rate: m(0),
                distortion: m(1),
                entropy: m(2),
                bias: m(3),
            });
        }
    }
    Ok(rows)
}

pub fn run_rounding_compare(cfg: &ExperimentConfig, summary: &mut BTreeMap<String, f64>) -> Result<Vec<Output>> {
    let updates = collect_updates(cfg)?;
    let rows = rounding_comparison(&updates, &cfg.grid, cfg.master_seed)?;
    summary.insert("rows".into(), rows.len() as f64);
    let body = csv(
        ROUNDING_HEADER,
        rows.iter().map(|r| {
            vec![
                r.quantizer.name().to_string(),
                cell(r.delta),
                cell(r.rate),
                cell(r.distortion),
                cell(r.entropy),
                cell(r.bias),
            ]
        }),
    );
    Ok(vec![Output {
        name: "rounding_compare.csv".into(),
        contents: body,
    }])
}
