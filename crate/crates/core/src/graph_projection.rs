//! Euclidean projection onto the graph `{(x, z) : A x = z}`.
//!
//! [`GraphProjector`] caches `A Aᵀ` and the Cholesky factor of `A Aᵀ + I`
//! so that every projection costs two triangular solves plus two
//! products with `A`. [`project_tall`] and [`project_kkt_oracle`] compute
//! the same projection by other routes and exist for cross-checking.

use crate::error::{check_len, Result};
use crate::linalg::{
    cholesky, dist2, gram, matvec, matvec_transpose, norm2, solve_dense, DenseMatrix,
    LowerTriangular,
};

/// Factorize-once projector onto the graph of `A`.
#[derive(Debug, Clone)]
pub struct GraphProjector<'a> {
    a: &'a DenseMatrix,
    gram: DenseMatrix,
    gram_plus_i: DenseMatrix,
    factor: LowerTriangular,
    factor_count: usize,
}

impl<'a> GraphProjector<'a> {
    /// Forms `A Aᵀ` and factors `A Aᵀ + I`. This is the only factorization
    /// the projector ever performs.
    pub fn build(a: &'a DenseMatrix) -> Result<Self> {
        let gram = gram(a);
        let mut gram_plus_i = gram.clone();
        gram_plus_i.add_diagonal(1.0);
        let factor = cholesky(&gram_plus_i)?;
        Ok(Self {
            a,
            gram,
            gram_plus_i,
            factor,
            factor_count: 1,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        self.a
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn gram_plus_identity(&self) -> &DenseMatrix {
        &self.gram_plus_i
    }

    pub fn factor(&self) -> &LowerTriangular {
        &self.factor
    }

    /// Number of Cholesky factorizations performed over the projector's life.
    pub fn factor_count(&self) -> usize {
        self.factor_count
    }

    /// Returns the projection `(x', z')` of `(x, z)`.
    pub fn project(&self, x: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut xp = vec![0.0; self.a.cols()];
        let mut zp = vec![0.0; self.a.rows()];
        self.project_into(x, z, &mut xp, &mut zp)?;
        Ok((xp, zp))
    }

    /// Projection written into caller-provided buffers:
    /// `z' = (AAᵀ + I)⁻¹ (AAᵀ z + A x)` and `x' = Aᵀ (z − z') + x`.
    pub fn project_into(
        &self,
        x: &[f64],
        z: &[f64],
        x_out: &mut [f64],
        z_out: &mut [f64],
    ) -> Result<()> {
        let (m, d) = (self.a.rows(), self.a.cols());
        check_len("project x", d, x.len())?;
        check_len("project z", m, z.len())?;
        check_len("project x_out", d, x_out.len())?;
        check_len("project z_out", m, z_out.len())?;

        let mut ax = vec![0.0; m];
        self.a.matvec_into(x, &mut ax)?;
        self.solve_z_into(z, &ax, z_out)?;

        let diff: Vec<f64> = z.iter().zip(z_out.iter()).map(|(a, b)| a - b).collect();
        self.a.matvec_transpose_into(&diff, x_out)?;
        for (o, v) in x_out.iter_mut().zip(x) {
            *o += v;
        }
        Ok(())
    }
}

impl GraphProjector<'_> {
    /// The `z` half of the projection given `A x` precomputed:
    /// `z_out = (AAᵀ + I)⁻¹ (AAᵀ z + A x)`. The `x` half is then
    /// `x' = Aᵀ (z − z') + x`.
    pub fn solve_z_into(&self, z: &[f64], ax: &[f64], z_out: &mut [f64]) -> Result<()> {
        check_len("solve_z ax", self.a.rows(), ax.len())?;
        self.gram.matvec_into(z, z_out)?;
        for (r, v) in z_out.iter_mut().zip(ax) {
            *r += v;
        }
        self.factor.solve_in_place(z_out)
    }

    /// Smallest correction `x̂ = x + Aᵀw` with `A x̂ = target`.
    ///
    /// `A Aᵀ w = target − A x` is solved by iterative refinement on the cached
    /// factor of `A Aᵀ + I`, so no new factorization is needed. Returns `x̂`
    /// and the final residual `‖A x̂ − target‖₂`.
    pub fn restore_feasibility(&self, x: &[f64], target: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (m, d) = (self.a.rows(), self.a.cols());
        check_len("restore_feasibility x", d, x.len())?;
        check_len("restore_feasibility target", m, target.len())?;
        let mut ax = vec![0.0; m];
        self.a.matvec_into(x, &mut ax)?;
        let r: Vec<f64> = target.iter().zip(&ax).map(|(t, a)| t - a).collect();
        let tol = 4.0 * f64::EPSILON * (1.0 + norm2(&r));
        let mut w = vec![0.0; m];
        let mut gw = vec![0.0; m];
        for _ in 0..MAX_REFINEMENTS {
            self.gram.matvec_into(&w, &mut gw)?;
            let mut res: Vec<f64> = r.iter().zip(&gw).map(|(a, b)| a - b).collect();
            if norm2(&res) <= tol {
                break;
            }
            self.factor.solve_in_place(&mut res)?;
            for (wi, c) in w.iter_mut().zip(&res) {
                *wi += c;
            }
        }
        let mut xh = vec![0.0; d];
        self.a.matvec_transpose_into(&w, &mut xh)?;
        for (o, v) in xh.iter_mut().zip(x) {
            *o += v;
        }
        self.a.matvec_into(&xh, &mut ax)?;
        Ok((xh, dist2(&ax, target)))
    }
}

/// Refinement sweeps in [`GraphProjector::restore_feasibility`]; each one
/// shrinks the error by `1 / (1 + λ_min(AAᵀ))`.
const MAX_REFINEMENTS: usize = 200;

/// Same projection through the `d × d` system
/// `x' = (AᵀA + I)⁻¹ (x + Aᵀ z)`, `z' = A x'`.
pub fn project_tall(a: &DenseMatrix, x: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("project_tall x", a.cols(), x.len())?;
    check_len("project_tall z", a.rows(), z.len())?;
    let mut m = gram(&a.transpose());
    m.add_diagonal(1.0);
    let l = cholesky(&m)?;
    let mut xp = matvec_transpose(a, z)?;
    for (o, v) in xp.iter_mut().zip(x) {
        *o += v;
    }
    l.solve_in_place(&mut xp)?;
    let zp = matvec(a, &xp)?;
    Ok((xp, zp))
}

/// Solves the full optimality system of the projection problem with
/// Gaussian elimination. Unknowns are `(x', z', λ)`:
///
/// ```text
/// A x' − z'       = 0
/// x'  + Aᵀ λ      = x
/// z'        − λ   = z
/// ```
///
/// Intended as a test oracle; it is `O((d + m)³)`.
pub fn project_kkt_oracle(a: &DenseMatrix, x: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (m, d) = (a.rows(), a.cols());
    check_len("project_kkt_oracle x", d, x.len())?;
    check_len("project_kkt_oracle z", m, z.len())?;
    let n = d + 2 * m;
    let (xo, zo, lo) = (0, d, d + m);
    let mut k = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for i in 0..m {
        let row = i;
        for j in 0..d {
            k[row * n + xo + j] = a.get(i, j);
        }
        k[row * n + zo + i] = -1.0;
    }
    for j in 0..d {
        let row = m + j;
        k[row * n + xo + j] = 1.0;
        for i in 0..m {
            k[row * n + lo + i] = a.get(i, j);
        }
        rhs[row] = x[j];
    }
    for i in 0..m {
        let row = m + d + i;
        k[row * n + zo + i] = 1.0;
        k[row * n + lo + i] = -1.0;
        rhs[row] = z[i];
    }
    let sol = solve_dense(&DenseMatrix::from_row_major(n, n, k)?, &rhs)?;
    Ok((sol[xo..zo].to_vec(), sol[zo..lo].to_vec()))
}
