//! Residuals and the duality-gap certificate.
//!
//! The solver's dual pair `(v_x, v_z)` belongs to the consensus constraint
//! `(x, z) = (x', z')`. At a fixed point `−v_z` is a normal vector of the
//! ball at `z` and `−v_x` a subgradient of `‖·‖₁` at `x`, so the dual
//! variable of `A x = z` is `v = −v_z`. With the conjugate of the ball
//! indicator `f*(w) = yᵀw + η‖w‖₂` (its support function) and the conjugate
//! of `‖·‖₁` being the indicator of the unit `ℓ∞` ball, the gap is
//!
//! ```text
//! gap = ‖x‖₁ + f*(−v_z) = ‖x‖₁ − yᵀv_z + η‖v_z‖₂
//! ```
//!
//! whenever `z` lies in the ball and `‖v_x‖∞ ≤ 1`, and `+∞` otherwise.

use crate::error::{check_len, Result};
use crate::instance::ProblemInstance;
use crate::linalg::{dist2, dot, norm1, norm2, norm_inf, DenseMatrix};

/// Optimality certificates for one primal/dual tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificates {
    pub r_p: f64,
    pub r_d: f64,
    /// Finite only when both feasibility flags hold.
    pub gap: f64,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
}

/// `‖A x − z‖₂`.
pub fn primal_residual(a: &DenseMatrix, x: &[f64], z: &[f64]) -> Result<f64> {
    check_len("primal_residual z", a.rows(), z.len())?;
    let mut ax = vec![0.0; a.rows()];
    a.matvec_into(x, &mut ax)?;
    Ok(dist2(&ax, z))
}

/// `‖Aᵀ v_z + v_x‖₂`.
pub fn dual_residual(a: &DenseMatrix, v_x: &[f64], v_z: &[f64]) -> Result<f64> {
    check_len("dual_residual v_x", a.cols(), v_x.len())?;
    let mut atv = vec![0.0; a.cols()];
    a.matvec_transpose_into(v_z, &mut atv)?;
    let mut s = 0.0;
    for (p, q) in atv.iter().zip(v_x) {
        let t = p + q;
        s += t * t;
    }
    Ok(s.sqrt())
}

/// Support function of the ball `{z : ‖z − y‖₂ ≤ η}` at `w`.
pub fn ball_support(y: &[f64], eta: f64, w: &[f64]) -> f64 {
    dot(y, w) + eta * norm2(w)
}

/// `yᵀ v_z − η ‖v_z‖₂`, a lower bound on the optimal value whenever
/// `‖Aᵀ v_z‖∞ ≤ 1`.
pub fn dual_objective(instance: &ProblemInstance, v_z: &[f64]) -> f64 {
    dot(&instance.y, v_z) - instance.eta * norm2(v_z)
}

/// Full certificate: residuals plus the duality gap.
pub fn duality_gap(
    instance: &ProblemInstance,
    x: &[f64],
    z: &[f64],
    v_x: &[f64],
    v_z: &[f64],
    feas_tol: f64,
) -> Result<Certificates> {
    check_len("duality_gap v_z", instance.m(), v_z.len())?;
    let r_p = primal_residual(&instance.a, x, z)?;
    let r_d = dual_residual(&instance.a, v_x, v_z)?;
    Ok(certify(instance, x, z, v_x, v_z, r_p, r_d, feas_tol))
}

/// Gap and flags from residuals that were already computed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn certify(
    instance: &ProblemInstance,
    x: &[f64],
    z: &[f64],
    v_x: &[f64],
    v_z: &[f64],
    r_p: f64,
    r_d: f64,
    feas_tol: f64,
) -> Certificates {
    let primal_feasible = dist2(z, &instance.y) <= instance.eta * (1.0 + feas_tol);
    let dual_feasible = norm_inf(v_x) <= 1.0 + feas_tol;
    let gap = if primal_feasible && dual_feasible {
        norm1(x) - dual_objective(instance, v_z)
    } else {
        f64::INFINITY
    };
    Certificates {
        r_p,
        r_d,
        gap,
        primal_feasible,
        dual_feasible,
    }
}
