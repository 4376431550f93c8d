//! Independent oracles used to verify the solver.
//!
//! Nothing here shares code with the optimized path beyond the matrix type:
//! the prox of `‖·‖₁` is found by grid search, ball projection is checked
//! against random feasible points, and the iteration oracle solves the full
//! projection system from scratch at every step.

#![allow(clippy::needless_range_loop)]

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::graph_projection::project_kkt_oracle;
use crate::instance::ProblemInstance;
use crate::proximal::ball_project;
use crate::solver::{PrimalDualState, SolverConfig};

/// Minimizes `|x| + (x − v)² / (2 kappa)` over a uniform grid of spacing
/// `grid_step` that covers `[v − 2 kappa − 1, v + 2 kappa + 1]` and zero.
pub fn prox_g_oracle(v: f64, kappa: f64, grid_step: f64) -> f64 {
    let lo = (v - 2.0 * kappa - 1.0).min(0.0);
    let hi = (v + 2.0 * kappa + 1.0).max(0.0);
    // Anchor the grid at zero so the kink is always a candidate.
    let first = (lo / grid_step).floor() as i64;
    let last = (hi / grid_step).ceil() as i64;
    let objective = |x: f64| x.abs() + (x - v) * (x - v) / (2.0 * kappa);
    let mut best = 0.0;
    let mut best_val = objective(0.0);
    for i in first..=last {
        let x = i as f64 * grid_step;
        let val = objective(x);
        if val < best_val {
            best = x;
            best_val = val;
        }
    }
    best
}

/// A random feasible point that was closer to `v` than the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceViolation {
    pub sample: usize,
    pub projection_distance: f64,
    pub sample_distance: f64,
}

impl fmt::Display for DominanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sample {} is closer ({}) than the projection ({})",
            self.sample, self.sample_distance, self.projection_distance
        )
    }
}

/// Samples `trials` points in the ball `{w : ‖w − y‖ ≤ eta}` (uniformly by
/// volume) and checks that none is closer to `v` than `ball_project(v)`,
/// up to `1e-9`.
pub fn prox_f_oracle(
    v: &[f64],
    y: &[f64],
    eta: f64,
    trials: usize,
    seed: u64,
) -> std::result::Result<(), DominanceViolation> {
    let p = ball_project(v, y, eta).expect("valid ball");
    let dist = |a: &[f64]| {
        a.iter()
            .zip(v)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    };
    let dp = dist(&p);
    let n = v.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sample in 0..trials {
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir
            .iter()
            .map(|e| e * e)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let radius = eta * rng.random::<f64>().powf(1.0 / n as f64);
        let w: Vec<f64> = dir
            .iter()
            .zip(y)
            .map(|(d, c)| c + radius * d / norm)
            .collect();
        let dw = dist(&w);
        if dp > dw + 1e-9 {
            return Err(DominanceViolation {
                sample,
                projection_distance: dp,
                sample_distance: dw,
            });
        }
    }
    Ok(())
}

/// Runs `steps` ADMM iterations from the zero state, written out literally:
/// scalar soft thresholding, explicit ball scaling, and a fresh solve of the
/// full projection system each time.
pub fn scripted_iteration_oracle(
    instance: &ProblemInstance,
    config: &SolverConfig,
    steps: usize,
) -> Result<PrimalDualState> {
    let (m, d) = (instance.m(), instance.d());
    let rho = config.rho;
    let mut s = PrimalDualState::zeros(d, m);
    for _ in 0..steps {
        for i in 0..d {
            let v = s.x_g[i] - s.xt[i];
            s.x[i] = if v > 1.0 / rho {
                v - 1.0 / rho
            } else if v < -1.0 / rho {
                v + 1.0 / rho
            } else {
                0.0
            };
        }
        let w: Vec<f64> = (0..m).map(|i| s.z_g[i] - s.zt[i]).collect();
        let r = (0..m)
            .map(|i| (w[i] - instance.y[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        for i in 0..m {
            s.z[i] = if r <= instance.eta {
                w[i]
            } else {
                instance.y[i] + instance.eta * (w[i] - instance.y[i]) / r
            };
        }

        let px: Vec<f64> = (0..d).map(|i| s.x[i] + s.xt[i]).collect();
        let pz: Vec<f64> = (0..m).map(|i| s.z[i] + s.zt[i]).collect();
        let (xg, zg) = project_kkt_oracle(&instance.a, &px, &pz)?;
        s.x_g = xg;
        s.z_g = zg;

        for i in 0..d {
            s.xt[i] += s.x[i] - s.x_g[i];
        }
        for i in 0..m {
            s.zt[i] += s.z[i] - s.z_g[i];
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn prox_g_oracle_cases() {
        assert_eq!(prox_g_oracle(0.0, 0.7, 1e-4), 0.0);
        assert!((prox_g_oracle(2.0, 1.0, 1e-4) - 1.0).abs() <= 1e-4);
        assert!((prox_g_oracle(-3.0, 0.5, 1e-4) + 2.5).abs() <= 1e-4);
    }

    #[test]
    fn prox_f_oracle_cases() {
        // interior point: projection is v itself
        prox_f_oracle(&[0.1, 0.1], &[0.0, 0.0], 1.0, 100, 1).unwrap();
        // huge ball
        prox_f_oracle(&[5.0, -7.0], &[0.0, 0.0], 1e3, 100, 2).unwrap();
        prox_f_oracle(&[5.0, -7.0, 2.0], &[1.0, 0.0, 0.0], 0.3, 1000, 3).unwrap();
    }

    #[test]
    fn zero_steps_is_the_initial_state() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let inst = ProblemInstance::new(a, vec![1.0], 0.5).unwrap();
        let s = scripted_iteration_oracle(&inst, &SolverConfig::default(), 0).unwrap();
        assert_eq!(s, PrimalDualState::zeros(2, 1));
    }

    #[test]
    fn single_step_by_hand() {
        // A = [1 0], y = 1, eta = 0.5, rho = 1, zero start:
        // x = S(0) = 0; z = proj(0) = 0.5;
        // project (0,0; 0.5): z' = (1·0.5 + 0)/2 = 0.25, x' = (0.25, 0);
        // x̃ = (−0.25, 0), z̃ = 0.25.
        let a = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let inst = ProblemInstance::new(a, vec![1.0], 0.5).unwrap();
        let s = scripted_iteration_oracle(&inst, &SolverConfig::default(), 1).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&s.x, &[0.0, 0.0]));
        assert!(close(&s.z, &[0.5]));
        assert!(close(&s.x_g, &[0.25, 0.0]));
        assert!(close(&s.z_g, &[0.25]));
        assert!(close(&s.xt, &[-0.25, 0.0]));
        assert!(close(&s.zt, &[0.25]));
    }
}
