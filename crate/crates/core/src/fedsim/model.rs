//! Flat-parameter models: linear regression (squared error), multinomial
//! logistic regression and a one-hidden-layer tanh network (both
//! cross-entropy).

use std::ops::Range;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::task::{Dataset, TaskKind, TaskSpec};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Model {
    pub kind: TaskKind,
    pub dim: usize,
    pub classes: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub loss: f64,
    /// `None` for regression.
    pub accuracy: Option<f64>,
}

#[inline]
fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| a * b as f64).sum()
}

#[inline]
fn axpy(acc: &mut [f64], a: f64, x: &[f32]) {
    acc.iter_mut().zip(x).for_each(|(g, &v)| *g += a * v as f64);
}

/// Softmax probabilities in place; returns log-sum-exp.
fn softmax(logits: &mut [f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    logits.iter_mut().for_each(|l| *l /= sum);
    max + sum.ln()
}

impl Model {
    pub fn for_task(spec: &TaskSpec) -> Self {
        Self {
            kind: spec.kind,
            dim: spec.dim,
            classes: if spec.kind.is_classification() { spec.num_classes } else { 1 },
            hidden: spec.hidden,
        }
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            TaskKind::LinearRegression => self.dim + 1,
            TaskKind::LogisticRegression => self.classes * (self.dim + 1),
            TaskKind::SmallMlp => self.hidden * (self.dim + 1) + self.classes * (self.hidden + 1),
        }
    }

    /// Named parameter ranges, one per weight or bias block.
    pub fn segments(&self) -> Vec<(String, Range<usize>)> {
        let (d, c, h) = (self.dim, self.classes, self.hidden);
        match self.kind {
            TaskKind::LinearRegression => vec![("weights".into(), 0..d), ("bias".into(), d..d + 1)],
            TaskKind::LogisticRegression => {
                vec![("weights".into(), 0..c * d), ("bias".into(), c * d..c * (d + 1))]
            }
            TaskKind::SmallMlp => {
                let w1 = h * d;
                let b1 = w1 + h;
                let w2 = b1 + c * h;
                vec![
                    ("hidden.weights".into(), 0..w1),
                    ("hidden.bias".into(), w1..b1),
                    ("output.weights".into(), b1..w2),
                    ("output.bias".into(), w2..w2 + c),
                ]
            }
        }
    }

    /// Zeros for the linear models; small Gaussian weights for the network.
    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        if self.kind == TaskKind::SmallMlp {
            let s1 = 1.0 / (self.dim as f64).sqrt();
            let s2 = 1.0 / (self.hidden as f64).sqrt();
            let w1 = self.hidden * self.dim;
            let b1 = w1 + self.hidden;
            for v in &mut p[..w1] {
                *v = s1 * Distribution::<f64>::sample(&StandardNormal, rng);
            }
            for v in &mut p[b1..b1 + self.classes * self.hidden] {
                *v = s2 * Distribution::<f64>::sample(&StandardNormal, rng);
            }
        }
        p
    }

    /// Mean loss over `idx`; writes the mean gradient into `grad`.
    pub fn loss_grad(&self, params: &[f64], data: &Dataset, idx: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if idx.is_empty() {
            return 0.0;
        }
        let mut loss = 0.0;
        match self.kind {
            TaskKind::LinearRegression => {
                let (w, b) = params.split_at(self.dim);
                for &i in idx {
                    let x = data.row(i);
                    let r = dot(w, x) + b[0] - data.labels[i];
                    loss += 0.5 * r * r;
                    axpy(&mut grad[..self.dim], r, x);
                    grad[self.dim] += r;
                }
            }
            TaskKind::LogisticRegression => {
                let (d, c) = (self.dim, self.classes);
                let mut logits = vec![0.0; c];
                for &i in idx {
                    let x = data.row(i);
                    let y = data.labels[i] as usize;
                    for (k, l) in logits.iter_mut().enumerate() {
                        *l = dot(&params[k * d..(k + 1) * d], x) + params[c * d + k];
                    }
                    let z = logits[y];
                    loss += softmax(&mut logits) - z;
                    for k in 0..c {
                        let delta = logits[k] - if k == y { 1.0 } else { 0.0 };
                        axpy(&mut grad[k * d..(k + 1) * d], delta, x);
                        grad[c * d + k] += delta;
                    }
                }
            }
            TaskKind::SmallMlp => {
                let (d, c, h) = (self.dim, self.classes, self.hidden);
                let w1 = h * d;
                let b1 = w1 + h;
                let w2 = b1 + c * h;
                let mut act = vec![0.0; h];
                let mut logits = vec![0.0; c];
                let mut back = vec![0.0; h];
                for &i in idx {
                    let x = data.row(i);
                    let y = data.labels[i] as usize;
                    for (j, a) in act.iter_mut().enumerate() {
                        *a = (dot(&params[j * d..(j + 1) * d], x) + params[w1 + j]).tanh();
                    }
                    for (k, l) in logits.iter_mut().enumerate() {
                        let row = &params[b1 + k * h..b1 + (k + 1) * h];
                        *l = row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>() + params[w2 + k];
                    }
                    let z = logits[y];
                    loss += softmax(&mut logits) - z;
                    back.iter_mut().for_each(|b| *b = 0.0);
                    for k in 0..c {
                        let delta = logits[k] - if k == y { 1.0 } else { 0.0 };
                        for j in 0..h {
                            grad[b1 + k * h + j] += delta * act[j];
                            back[j] += delta * params[b1 + k * h + j];
                        }
                        grad[w2 + k] += delta;
                    }
                    for j in 0..h {
                        let pre = back[j] * (1.0 - act[j] * act[j]);
                        axpy(&mut grad[j * d..(j + 1) * d], pre, x);
                        grad[w1 + j] += pre;
                    }
                }
            }
        }
        let n = idx.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        loss / n
    }

    /// Class scores (or the regression prediction) for one example.
    pub fn predict(&self, params: &[f64], x: &[f32]) -> Vec<f64> {
        match self.kind {
            TaskKind::LinearRegression => vec![dot(&params[..self.dim], x) + params[self.dim]],
            TaskKind::LogisticRegression => {
                let (d, c) = (self.dim, self.classes);
                (0..c)
                    .map(|k| dot(&params[k * d..(k + 1) * d], x) + params[c * d + k])
                    .collect()
            }
            TaskKind::SmallMlp => {
                let (d, c, h) = (self.dim, self.classes, self.hidden);
                let w1 = h * d;
                let b1 = w1 + h;
                let act: Vec<f64> = (0..h)
                    .map(|j| (dot(&params[j * d..(j + 1) * d], x) + params[w1 + j]).tanh())
                    .collect();
                (0..c)
                    .map(|k| {
                        params[b1 + k * h..b1 + (k + 1) * h]
                            .iter()
                            .zip(&act)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            + params[b1 + c * h + k]
                    })
                    .collect()
            }
        }
    }

    /// Mean loss and (for classification) accuracy. Ties in the arg-max go
    /// to the lowest class.
    pub fn evaluate(&self, params: &[f64], data: &Dataset) -> Metrics {
        if data.is_empty() {
            return Metrics {
                loss: 0.0,
                accuracy: self.kind.is_classification().then_some(0.0),
            };
        }
        let mut loss = 0.0;
        let mut correct = 0usize;
        for i in 0..data.len() {
            let mut out = self.predict(params, data.row(i));
            let y = data.labels[i];
            if self.kind.is_classification() {
                let label = y as usize;
                let best = out
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (k, &v)| if v > b.1 { (k, v) } else { b })
                    .0;
                correct += (best == label) as usize;
                let z = out[label];
                loss += softmax(&mut out) - z;
            } else {
                let r = out[0] - y;
                loss += 0.5 * r * r;
            }
        }
        let n = data.len() as f64;
        Metrics {
            loss: loss / n,
            accuracy: self.kind.is_classification().then(|| correct as f64 / n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedsim::task::generate_task;

    fn tiny(kind: TaskKind) -> (Model, Dataset) {
        let spec = TaskSpec {
            max_size: 30,
            test_size: 16,
            hidden: 4,
            num_classes: 3,
            ..TaskSpec::new(kind, 5, 2, 11)
        };
        let data = generate_task(&spec).unwrap();
        (Model::for_task(&spec), data.test)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [TaskKind::LinearRegression, TaskKind::LogisticRegression, TaskKind::SmallMlp] {
            let (model, data) = tiny(kind);
            let mut rng = Rng::new(2);
            let params: Vec<f64> = (0..model.param_count())
                .map(|_| 0.3 * (2.0 * rng.next_f64() - 1.0))
                .collect();
            let idx: Vec<usize> = (0..data.len()).collect();
            let mut grad = vec![0.0; params.len()];
            model.loss_grad(&params, &data, &idx, &mut grad);
            let mut scratch = vec![0.0; params.len()];
            let h = 1e-6;
            for j in 0..params.len() {
                let mut p = params.clone();
                p[j] += h;
                let up = model.loss_grad(&p, &data, &idx, &mut scratch);
                p[j] -= 2.0 * h;
                let down = model.loss_grad(&p, &data, &idx, &mut scratch);
                let fd = (up - down) / (2.0 * h);
                assert!((fd - grad[j]).abs() < 1e-6 * (1.0 + fd.abs()), "{kind:?} param {j}: {fd} vs {}", grad[j]);
            }
        }
    }

    #[test]
    fn segments_tile_parameters() {
        for kind in [TaskKind::LinearRegression, TaskKind::LogisticRegression, TaskKind::SmallMlp] {
            let (model, _) = tiny(kind);
            let segs = model.segments();
            assert_eq!(segs[0].1.start, 0);
            assert_eq!(segs.last().unwrap().1.end, model.param_count());
            assert!(segs.windows(2).all(|w| w[0].1.end == w[1].1.start));
        }
    }

    #[test]
    fn perfect_fit_scores_one() {
        // One feature, two classes: class 1 iff x > 0.
        let data = Dataset {
            dim: 1,
            features: vec![-2.0, -1.0, 1.0, 3.0],
            labels: vec![0.0, 0.0, 1.0, 1.0],
        };
        let model = Model {
            kind: TaskKind::LogisticRegression,
            dim: 1,
            classes: 2,
            hidden: 0,
        };
        let params = [-10.0, 10.0, 0.0, 0.0];
        let m = model.evaluate(&params, &data);
        assert_eq!(m.accuracy, Some(1.0));
        assert!(m.loss < 1e-4);
        assert_eq!(model.evaluate(&params, &data), m);
    }

    #[test]
    fn random_predictor_is_a_coin() {
        // Balanced binary labels, scores from an independent stream.
        let n = 20_000;
        let mut rng = Rng::new(5);
        let data = Dataset {
            dim: 1,
            features: (0..n).map(|_| (2.0 * rng.next_f64() - 1.0) as f32).collect(),
            labels: (0..n).map(|i| (i % 2) as f64).collect(),
        };
        let model = Model {
            kind: TaskKind::LogisticRegression,
            dim: 1,
            classes: 2,
            hidden: 0,
        };
        let acc = model.evaluate(&[0.0, 1.0, 0.0, 0.0], &data).accuracy.unwrap();
        // Binomial: sd = 0.5 / sqrt(n).
        assert!((acc - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "{acc}");
    }
}
