//! ADMM with graph-projection splitting.
//!
//! Each iteration runs, in order:
//!
//! 1. the prox step `x ← S_{1/ρ}(x' − x̃)`, `z ← Π_Ω(z' − z̃)`;
//! 2. the graph projection `(x', z') ← Π_G(x + x̃, z + z̃)`;
//! 3. the scaled dual update `(x̃, z̃) ← (x̃, z̃) + (x − x', z − z')`, using
//!    the projection just computed.
//!
//! Certificates use the unscaled duals `(v_x, v_z) = ρ (x̃, z̃)`.

use std::time::{Duration, Instant};

use crate::duality::{certify, Certificates};
use crate::error::{Error, Result};
use crate::graph_projection::GraphProjector;
use crate::instance::ProblemInstance;
use crate::linalg::{dist2, norm1, norm_inf};
use crate::proximal::{ball_project_in_place, shrink, soft_threshold_into};

/// Tunables of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Augmented-Lagrangian penalty.
    pub rho: f64,
    pub max_iter: usize,
    pub eps_p: f64,
    pub eps_d: f64,
    pub eps_gap: f64,
    /// Relative slack used when evaluating the indicator functions in the gap.
    pub feas_tol: f64,
    /// Residual-balancing updates of `rho`.
    pub adaptive_rho: bool,
    /// Record every `history_stride`-th iteration.
    pub history_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 100_000,
            eps_p: 1e-4,
            eps_d: 1e-4,
            eps_gap: 1e-3,
            feas_tol: 1e-6,
            adaptive_rho: false,
            history_stride: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("rho", self.rho)?;
        positive("eps_p", self.eps_p)?;
        positive("eps_d", self.eps_d)?;
        positive("eps_gap", self.eps_gap)?;
        if !self.feas_tol.is_finite() || self.feas_tol < 0.0 {
            return Err(Error::InvalidParameter {
                name: "feas_tol",
                reason: format!("must be nonnegative, got {}", self.feas_tol),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if self.history_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "history_stride",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// One ADMM iterate: prox outputs `(x, z)`, graph-projection outputs
/// `(x_g, z_g)`, and scaled duals `(xt, zt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub x_g: Vec<f64>,
    pub z_g: Vec<f64>,
    pub xt: Vec<f64>,
    pub zt: Vec<f64>,
}

/// Consensus residuals of one step, used for residual balancing.
#[derive(Debug, Clone, Copy)]
pub struct StepResiduals {
    /// `‖(x, z) − (x', z')‖`.
    pub consensus: f64,
    /// `ρ ‖(x', z')_new − (x', z')_old‖`.
    pub movement: f64,
}

/// Scratch buffers for [`PrimalDualState::step`].
///
/// The sweep over `A` at the end of a step already computes the next prox
/// point `x_next` and `A x_next`. They stay valid for the next step as long
/// as the state and `rho` are unchanged (`primed`).
///
/// With `invariant` set, the right-hand side `G (z + z̃) + A (x + x̃)` of the
/// projection, `G = A Aᵀ`, is formed as `G z + A x`. Started from zero, the
/// scaled duals satisfy `x̃ = −Aᵀ z̃` after every step
/// (`x̃ + x − x' = −Aᵀ(z + z̃ − z')`), so the two agree up to rounding, and
/// `A x` only touches the nonzeros of `x`.
struct Workspace {
    x_next: Vec<f64>,
    u: Vec<f64>,
    zin: Vec<f64>,
    au: Vec<f64>,
    ax: Vec<f64>,
    diff: Vec<f64>,
    primed: bool,
    invariant: bool,
}

impl Workspace {
    fn new(d: usize, m: usize, invariant: bool) -> Self {
        Self {
            x_next: vec![0.0; d],
            u: vec![0.0; d],
            zin: vec![0.0; m],
            au: vec![0.0; m],
            ax: vec![0.0; m],
            diff: vec![0.0; m],
            primed: false,
            invariant,
        }
    }
}

/// Quantities of one step, computed on the fly.
#[derive(Debug, Clone, Copy)]
struct StepInfo {
    residuals: StepResiduals,
    r_p: f64,
    r_d: f64,
}

impl PrimalDualState {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            x: vec![0.0; d],
            z: vec![0.0; m],
            x_g: vec![0.0; d],
            z_g: vec![0.0; m],
            xt: vec![0.0; d],
            zt: vec![0.0; m],
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.x, &self.z, &self.x_g, &self.z_g, &self.xt, &self.zt]
            .iter()
            .all(|v| v.iter().all(|e| e.is_finite()))
    }

    /// Unscaled duals `(v_x, v_z) = ρ (x̃, z̃)`.
    pub fn duals(&self, rho: f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.xt.iter().map(|v| rho * v).collect(),
            self.zt.iter().map(|v| rho * v).collect(),
        )
    }

    /// Advances the state by one iteration in place.
    pub fn step(
        &mut self,
        projector: &GraphProjector<'_>,
        instance: &ProblemInstance,
        rho: f64,
    ) -> Result<StepResiduals> {
        let mut ws = Workspace::new(self.x.len(), self.z.len(), false);
        Ok(self.step_with(projector, instance, rho, &mut ws)?.residuals)
    }

    // The x-part of the prox step is done by the previous step's sweep when
    // the workspace is primed; otherwise it is computed here.
    fn step_with(
        &mut self,
        projector: &GraphProjector<'_>,
        instance: &ProblemInstance,
        rho: f64,
        ws: &mut Workspace,
    ) -> Result<StepInfo> {
        let a = projector.matrix();
        let kappa = 1.0 / rho;

        // prox step
        if ws.primed {
            std::mem::swap(&mut self.x, &mut ws.x_next);
        } else {
            for ((u, g), t) in ws.u.iter_mut().zip(&self.x_g).zip(&self.xt) {
                *u = g - t;
            }
            soft_threshold_into(&ws.u, kappa, &mut self.x);
            a.matvec_sparse_into(&self.x, &mut ws.ax)?;
        }
        ws.primed = false;
        for ((zi, g), t) in self.z.iter_mut().zip(&self.z_g).zip(&self.zt) {
            *zi = g - t;
        }
        ball_project_in_place(&mut self.z, &instance.y, instance.eta);
        let r_p = dist2(&ws.ax, &self.z);

        // graph projection of (u, zin) = (x + x̃, z + z̃): z' first, from
        // G zin + A u, which the invariant reduces to G z + A x
        for ((w, z), t) in ws.zin.iter_mut().zip(&self.z).zip(&self.zt) {
            *w = z + t;
        }
        if ws.invariant {
            projector.solve_z_into(&self.z, &ws.ax, &mut ws.diff)?;
        } else {
            for ((u, x), t) in ws.u.iter_mut().zip(&self.x).zip(&self.xt) {
                *u = x + t;
            }
            a.matvec_into(&ws.u, &mut ws.au)?;
            projector.solve_z_into(&ws.zin, &ws.au, &mut ws.diff)?;
        }
        let mut consensus = 0.0;
        let mut movement = 0.0;
        for i in 0..self.z.len() {
            let zg = ws.diff[i];
            let r = self.z[i] - zg;
            consensus += r * r;
            let dz = zg - self.z_g[i];
            movement += dz * dz;
            self.zt[i] += r;
            self.z_g[i] = zg;
            ws.diff[i] = ws.zin[i] - zg;
        }

        // x' = Aᵀ(zin − z') + u, the dual update with the fresh x', and the
        // next prox point, all in one sweep that also yields Aᵀz̃ for r_d
        let mut rd2 = 0.0;
        let (x, x_g, xt) = (&self.x, &mut self.x_g, &mut self.xt);
        a.sweep_into(
            &ws.diff,
            &self.zt,
            &mut ws.x_next,
            &mut ws.ax,
            |j0, atd, atz, x_next| {
                for k in 0..atd.len() {
                    let j = j0 + k;
                    let xj = x[j];
                    let xg = atd[k] + (xj + xt[j]);
                    let r = xj - xg;
                    consensus += r * r;
                    let dx = xg - x_g[j];
                    movement += dx * dx;
                    let t = xt[j] + r;
                    xt[j] = t;
                    x_g[j] = xg;
                    let s = atz[k] + t;
                    rd2 += s * s;
                    x_next[k] = shrink(xg - t, kappa);
                }
            },
        )?;
        ws.primed = true;
        Ok(StepInfo {
            residuals: StepResiduals {
                consensus: consensus.sqrt(),
                movement: rho * movement.sqrt(),
            },
            r_p,
            r_d: rho * rd2.sqrt(),
        })
    }

    /// Multiplies the scaled duals by `factor` (used when `rho` changes).
    fn rescale_duals(&mut self, factor: f64) {
        self.xt.iter_mut().for_each(|v| *v *= factor);
        self.zt.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Applies one iteration to a copy of `state`.
pub fn iterate_once(
    state: &PrimalDualState,
    projector: &GraphProjector<'_>,
    instance: &ProblemInstance,
    config: &SolverConfig,
) -> Result<PrimalDualState> {
    let mut next = state.clone();
    next.step(projector, instance, config.rho)?;
    Ok(next)
}

/// Per-iteration certificate values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub r_p: f64,
    pub r_d: f64,
    pub gap: f64,
    /// `‖x‖₁`.
    pub objective: f64,
}

/// Certificates of `state` with duals `ρ (x̃, z̃)` for `config.rho`.
pub fn evaluate_certificates(
    state: &PrimalDualState,
    instance: &ProblemInstance,
    config: &SolverConfig,
) -> Result<Certificates> {
    let (v_x, v_z) = state.duals(config.rho);
    crate::duality::duality_gap(instance, &state.x, &state.z, &v_x, &v_z, config.feas_tol)
}

fn record(
    iter: usize,
    state: &PrimalDualState,
    instance: &ProblemInstance,
    rho: f64,
    feas_tol: f64,
    info: &StepInfo,
) -> IterationRecord {
    let (v_x, v_z) = state.duals(rho);
    let c = certify(
        instance, &state.x, &state.z, &v_x, &v_z, info.r_p, info.r_d, feas_tol,
    );
    IterationRecord {
        iter,
        r_p: c.r_p,
        r_d: c.r_d,
        gap: c.gap,
        objective: norm1(&state.x),
    }
}

/// Exact bounds attached to the returned point.
///
/// The iterate `x` only satisfies `A x ≈ z` and the dual `ρ z̃` only
/// `‖Aᵀ v‖∞ ≈ 1`, both to within the stopping tolerances. The returned
/// `solution_x = x + Aᵀw` solves `A x̂ = z` (so it is feasible) and the
/// returned dual is `ρ z̃` scaled into `‖Aᵀ v‖∞ ≤ 1`, so
/// `dual_objective ≤ optimum ≤ primal_objective` holds up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionCertificate {
    /// `‖x̂‖₁`.
    pub primal_objective: f64,
    /// `yᵀv − η‖v‖₂` for the scaled dual.
    pub dual_objective: f64,
    /// `primal_objective − dual_objective`.
    pub gap: f64,
    /// `‖A x̂ − y‖₂ − η`; nonpositive up to rounding.
    pub constraint_excess: f64,
}

fn certify_solution(
    projector: &GraphProjector<'_>,
    instance: &ProblemInstance,
    state: &PrimalDualState,
    rho: f64,
) -> Result<(Vec<f64>, Vec<f64>, SolutionCertificate)> {
    let a = projector.matrix();
    let (x_hat, _) = projector.restore_feasibility(&state.x, &state.z)?;
    let mut v: Vec<f64> = state.zt.iter().map(|t| rho * t).collect();
    let mut atv = vec![0.0; a.cols()];
    a.matvec_transpose_into(&v, &mut atv)?;
    let s = norm_inf(&atv);
    if s > 1.0 {
        v.iter_mut().for_each(|e| *e /= s);
    }
    let mut ax = vec![0.0; a.rows()];
    a.matvec_into(&x_hat, &mut ax)?;
    let primal_objective = norm1(&x_hat);
    let dual_objective = crate::duality::dual_objective(instance, &v);
    let cert = SolutionCertificate {
        primal_objective,
        dual_objective,
        gap: primal_objective - dual_objective,
        constraint_excess: dist2(&ax, &instance.y) - instance.eta,
    };
    Ok((x_hat, v, cert))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterReached,
    Diverged,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIterReached => "MaxIterReached",
            SolveStatus::Diverged => "Diverged",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Feasible point built from the final iterate (the raw iterate when the
    /// solve diverged).
    pub solution_x: Vec<f64>,
    /// Dual point matching `certificate`; empty when the solve diverged.
    pub dual_z: Vec<f64>,
    /// `None` when the solve diverged.
    pub certificate: Option<SolutionCertificate>,
    pub iterations: usize,
    pub final_record: IterationRecord,
    pub history: Vec<IterationRecord>,
    /// Final iterate, for independent re-certification.
    pub state: PrimalDualState,
    /// Penalty in effect at the final iterate (differs from the configured
    /// one only with adaptive rho).
    pub final_rho: f64,
    /// Cholesky factorizations performed during the solve.
    pub factorizations: usize,
    pub factorization_time: Duration,
    pub iteration_time: Duration,
}

impl SolveReport {
    /// `‖solution_x‖₁`.
    pub fn objective(&self) -> f64 {
        norm1(&self.solution_x)
    }

    pub fn total_time(&self) -> Duration {
        self.factorization_time + self.iteration_time
    }
}

/// Ratio between the two residuals that triggers a change of `rho`.
const BALANCE_RATIO: f64 = 10.0;
/// Iterations between two residual-balancing checks.
const BALANCE_EVERY: usize = 10;
/// Changes of `rho` allowed in one solve; afterwards it stays fixed.
const MAX_RHO_CHANGES: usize = 20;

/// Runs ADMM until all three certificates are below their tolerances or
/// `max_iter` iterations have run.
///
/// When the certificates of the iterate pass, the solve only stops if the
/// gap of the returned feasible pair (see [`SolutionCertificate`]) is also
/// below `eps_gap`.
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveReport> {
    instance.validate().map_err(Error::InvalidInstance)?;
    config.validate()?;
    let (m, d) = (instance.m(), instance.d());

    let t0 = Instant::now();
    let projector = GraphProjector::build(&instance.a)?;
    let factorization_time = t0.elapsed();

    let t1 = Instant::now();
    let mut state = PrimalDualState::zeros(d, m);
    let mut ws = Workspace::new(d, m, true);
    let mut rho = config.rho;
    let mut rho_changes = 0;
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIterReached;
    let mut last = IterationRecord {
        iter: 0,
        r_p: 0.0,
        r_d: 0.0,
        gap: f64::INFINITY,
        objective: 0.0,
    };
    let mut output = None;
    let mut iterations = 0;

    for k in 1..=config.max_iter {
        iterations = k;
        let info = state.step_with(&projector, instance, rho, &mut ws)?;
        let res = info.residuals;
        if !state.is_finite() {
            status = SolveStatus::Diverged;
            last = IterationRecord {
                iter: k,
                r_p: f64::NAN,
                r_d: f64::NAN,
                gap: f64::NAN,
                objective: norm1(&state.x),
            };
            history.push(last);
            break;
        }
        last = record(k, &state, instance, rho, config.feas_tol, &info);
        if k % config.history_stride == 0 {
            history.push(last);
        }
        if last.r_p <= config.eps_p && last.r_d <= config.eps_d && last.gap <= config.eps_gap {
            let out = certify_solution(&projector, instance, &state, rho)?;
            if out.2.gap <= config.eps_gap {
                output = Some(out);
                status = SolveStatus::Converged;
                break;
            }
        }
        if config.adaptive_rho && rho_changes < MAX_RHO_CHANGES && k % BALANCE_EVERY == 0 {
            let factor = if res.consensus > BALANCE_RATIO * res.movement {
                2.0
            } else if res.movement > BALANCE_RATIO * res.consensus {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                rho_changes += 1;
                state.rescale_duals(1.0 / factor);
                ws.primed = false;
            }
        }
    }
    if history.last().map(|r| r.iter) != Some(last.iter) {
        history.push(last);
    }
    if output.is_none() && status != SolveStatus::Diverged {
        output = Some(certify_solution(&projector, instance, &state, rho)?);
    }
    let (solution_x, dual_z, certificate) = match output {
        Some((x, v, c)) => (x, v, Some(c)),
        None => (state.x.clone(), Vec::new(), None),
    };

    Ok(SolveReport {
        status,
        solution_x,
        dual_z,
        certificate,
        iterations,
        final_record: last,
        history,
        state,
        final_rho: rho,
        factorizations: projector.factor_count(),
        factorization_time,
        iteration_time: t1.elapsed(),
    })
}
