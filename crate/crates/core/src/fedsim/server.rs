//! Server optimizers treating the aggregate as a gradient estimate.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerOpt {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-3
}

impl ServerOpt {
    pub fn adam() -> Self {
        Self::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

/// Moment estimates for Adam; empty for SGD.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl ServerState {
    /// Applies one update to `theta` in place.
    pub fn apply(&mut self, theta: &mut [f64], g: &[f64], opt: ServerOpt, lr: f64) {
        assert_eq!(theta.len(), g.len());
        self.step += 1;
        match opt {
            ServerOpt::Sgd => {
                theta.iter_mut().zip(g).for_each(|(t, &gi)| *t -= lr * gi);
            }
            ServerOpt::Adam { beta1, beta2, eps } => {
                if self.m.len() != g.len() {
                    self.m = vec![0.0; g.len()];
                    self.v = vec![0.0; g.len()];
                }
                let c1 = 1.0 - beta1.powi(self.step as i32);
                let c2 = 1.0 - beta2.powi(self.step as i32);
                for i in 0..g.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// Functional form of [`ServerState::apply`].
pub fn server_update(
    theta: &[f64],
    g: &[f64],
    state: &ServerState,
    opt: ServerOpt,
    lr: f64,
) -> (Vec<f64>, ServerState) {
    let mut theta = theta.to_vec();
    let mut state = state.clone();
    state.apply(&mut theta, g, opt, lr);
    (theta, state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let (t, _) = server_update(&[1.0], &[0.5], &ServerState::default(), ServerOpt::Sgd, 0.1);
        assert_eq!(t, vec![0.95]);
        let (t, _) = server_update(&[1.0, -2.0], &[0.0, 0.0], &ServerState::default(), ServerOpt::Sgd, 0.1);
        assert_eq!(t, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_is_normalized_gradient() {
        let g = [0.5, -2.0, 1e-4];
        let lr = 0.1;
        let (t, s) = server_update(&[0.0; 3], &g, &ServerState::default(), ServerOpt::adam(), lr);
        for (ti, gi) in t.iter().zip(g) {
            let expected = -lr * gi / (gi.abs() + 1e-3);
            assert!((ti - expected).abs() < 1e-12, "{ti} vs {expected}");
        }
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_second_step_matches_hand_algebra() {
        let opt = ServerOpt::Adam { beta1: 0.5, beta2: 0.5, eps: 0.0 };
        let (t1, s1) = server_update(&[0.0], &[1.0], &ServerState::default(), opt, 1.0);
        let (t2, _) = server_update(&t1, &[3.0], &s1, opt, 1.0);
        // m = 0.5*0.5 + 0.5*3 = 1.75, m_hat = 1.75/0.75; v = 0.25 + 4.5 = 4.75, v_hat = 4.75/0.75.
        let step = (1.75 / 0.75) / (4.75f64 / 0.75).sqrt();
        assert!((t2[0] - (t1[0] - step)).abs() < 1e-12);
    }

    #[test]
    fn parses() {
        let o: ServerOpt = toml::from_str("kind = \"adam\"\neps = 0.01").unwrap();
        assert_eq!(o, ServerOpt::Adam { beta1: 0.9, beta2: 0.999, eps: 0.01 });
        let o: ServerOpt = toml::from_str("kind = \"sgd\"").unwrap();
        assert_eq!(o, ServerOpt::Sgd);
    }
}
