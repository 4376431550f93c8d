//! Problem container and the synthetic instance generator.

use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2, DenseMatrix};

/// `minimize ‖x‖₁ subject to ‖y − A x‖₂ ≤ eta`, with `A` of shape `m × d`, `m < d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub a: DenseMatrix,
    pub y: Vec<f64>,
    pub eta: f64,
    /// Sparse signal the measurements were generated from, if synthetic.
    pub ground_truth_x: Option<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

/// One reason an instance is malformed.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EtaNotPositive(f64),
    Dimension {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    NotUnderdetermined {
        rows: usize,
        cols: usize,
    },
    NonFinite {
        field: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EtaNotPositive(eta) => write!(f, "eta must be positive (got {eta})"),
            Violation::Dimension {
                field,
                expected,
                got,
            } => write!(
                f,
                "dimension error: `{field}` has length {got}, expected {expected}"
            ),
            Violation::NotUnderdetermined { rows, cols } => {
                write!(f, "A must have fewer rows than columns (got {rows}x{cols})")
            }
            Violation::NonFinite { field } => write!(f, "`{field}` contains non-finite entries"),
        }
    }
}

impl ProblemInstance {
    /// Builds and validates an instance without generator metadata.
    pub fn new(a: DenseMatrix, y: Vec<f64>, eta: f64) -> Result<Self> {
        let inst = Self {
            a,
            y,
            eta,
            ground_truth_x: None,
            noise: None,
            seed: None,
        };
        inst.validate().map_err(Error::InvalidInstance)?;
        Ok(inst)
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// Signal dimension.
    pub fn d(&self) -> usize {
        self.a.cols()
    }

    /// Checks every structural requirement and collects all violations.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let (m, d) = (self.a.rows(), self.a.cols());
        let mut v = Vec::new();
        if !self.eta.is_finite() || self.eta <= 0.0 {
            v.push(Violation::EtaNotPositive(self.eta));
        }
        if m == 0 || m >= d {
            v.push(Violation::NotUnderdetermined { rows: m, cols: d });
        }
        if self.y.len() != m {
            v.push(Violation::Dimension {
                field: "y",
                expected: m,
                got: self.y.len(),
            });
        }
        if self.a.as_slice().iter().any(|x| !x.is_finite()) {
            v.push(Violation::NonFinite { field: "A" });
        }
        if self.y.iter().any(|x| !x.is_finite()) {
            v.push(Violation::NonFinite { field: "y" });
        }
        if let Some(x) = &self.ground_truth_x {
            if x.len() != d {
                v.push(Violation::Dimension {
                    field: "ground_truth_x",
                    expected: d,
                    got: x.len(),
                });
            }
            if x.iter().any(|e| !e.is_finite()) {
                v.push(Violation::NonFinite {
                    field: "ground_truth_x",
                });
            }
        }
        if let Some(n) = &self.noise {
            if n.len() != m {
                v.push(Violation::Dimension {
                    field: "noise",
                    expected: m,
                    got: n.len(),
                });
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

/// Parameters of the synthetic generator.
///
/// `k = round(p_s·d)` nonzeros and `m = round(p_m·d)` measurements, both
/// rounded half up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub d: usize,
    pub p_s: f64,
    pub p_m: f64,
    pub eta: f64,
    pub seed: u64,
    /// Scale the noise to `0.99·eta` instead of `eta`, so the ground truth
    /// is strictly feasible.
    #[serde(default)]
    pub strict_interior: bool,
}

/// Noise norm relative to `eta` when `strict_interior` is set.
pub const INTERIOR_SLACK: f64 = 0.99;

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

impl GeneratorParams {
    pub fn new(d: usize, p_s: f64, p_m: f64, eta: f64, seed: u64) -> Self {
        Self {
            d,
            p_s,
            p_m,
            eta,
            seed,
            strict_interior: false,
        }
    }

    pub fn with_strict_interior(mut self, on: bool) -> Self {
        self.strict_interior = on;
        self
    }

    /// Number of nonzeros in the ground truth.
    pub fn sparsity(&self) -> usize {
        round_half_up(self.p_s * self.d as f64)
    }

    /// Number of measurements.
    pub fn measurements(&self) -> usize {
        round_half_up(self.p_m * self.d as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.p_s > 0.0 && self.p_s <= 1.0) {
            return bad("p_s", format!("must lie in (0, 1], got {}", self.p_s));
        }
        if !(self.p_m > 0.0 && self.p_m < 1.0) {
            return bad("p_m", format!("must lie in (0, 1), got {}", self.p_m));
        }
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return bad("eta", format!("must be positive, got {}", self.eta));
        }
        let m = self.measurements();
        if m < 1 || m >= self.d {
            return bad(
                "p_m",
                format!("round(p_m*d) = {m} must satisfy 1 <= m < d = {}", self.d),
            );
        }
        if self.sparsity() > self.d {
            return bad("p_s", "round(p_s*d) exceeds d".into());
        }
        Ok(())
    }
}

/// Draws a synthetic instance.
///
/// With a ChaCha8 stream seeded from `params.seed`, draws in order: the
/// entries of `A` (row-major, standard normal), the support of `x*`
/// (uniform without replacement), the nonzero values of `x*` (standard
/// normal, in support order), and the noise (standard normal, then scaled to
/// norm `eta`). Finally `y = A x* + noise`.
pub fn generate(params: &GeneratorParams) -> Result<ProblemInstance> {
    params.validate()?;
    let d = params.d;
    let m = params.measurements();
    let k = params.sparsity();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let entries: Vec<f64> = (0..m * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let a = DenseMatrix::from_row_major(m, d, entries)?;

    let mut x = vec![0.0; d];
    let support = index::sample(&mut rng, d, k);
    for i in support.iter() {
        x[i] = StandardNormal.sample(&mut rng);
    }

    let mut noise: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let target = if params.strict_interior {
        INTERIOR_SLACK * params.eta
    } else {
        params.eta
    };
    let nn = norm2(&noise);
    if nn > 0.0 {
        let s = target / nn;
        noise.iter_mut().for_each(|v| *v *= s);
    }

    let ax = matvec(&a, &x)?;
    let y = ax.iter().zip(&noise).map(|(p, q)| p + q).collect();
    let inst = ProblemInstance {
        a,
        y,
        eta: params.eta,
        ground_truth_x: Some(x),
        noise: Some(noise),
        seed: Some(params.seed),
    };
    inst.validate().map_err(Error::InvalidInstance)?;
    Ok(inst)
}
