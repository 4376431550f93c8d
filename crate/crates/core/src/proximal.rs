//! Closed-form proximal operators for the ℓ₁ norm and for the indicator of
//! the ball `{z : ‖z − y‖₂ ≤ η}`.

use crate::error::{check_len, Error, Result};
use crate::linalg::dist2;

/// Elementwise soft thresholding with threshold `kappa` (the prox of
/// `‖·‖₁` with penalty `1/kappa`).
pub fn soft_threshold(v: &[f64], kappa: f64) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    let mut out = vec![0.0; v.len()];
    soft_threshold_into(v, kappa, &mut out);
    Ok(out)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "kappa",
            reason: format!("must be positive and finite, got {kappa}"),
        })
    }
}

#[inline]
pub(crate) fn shrink(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

pub(crate) fn soft_threshold_into(v: &[f64], kappa: f64, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(v) {
        *o = shrink(x, kappa);
    }
}

/// Euclidean projection of `v` onto the ball of radius `eta` around `y`.
///
/// Points already inside the ball are returned unchanged.
pub fn ball_project(v: &[f64], y: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_eta(eta)?;
    check_len("ball_project", y.len(), v.len())?;
    let mut out = v.to_vec();
    ball_project_in_place(&mut out, y, eta);
    Ok(out)
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("must be positive and finite, got {eta}"),
        })
    }
}

/// Relative slack under which a point counts as inside the ball. It absorbs
/// the rounding of a previous projection so that projecting twice is exact.
const BALL_SLACK: f64 = 1e-14;

pub(crate) fn ball_project_in_place(v: &mut [f64], y: &[f64], eta: f64) {
    let r = dist2(v, y);
    if r <= eta * (1.0 + BALL_SLACK) {
        return;
    }
    let scale = eta / r;
    for (vi, yi) in v.iter_mut().zip(y) {
        *vi = yi + scale * (*vi - yi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm1;
    use crate::reference::{prox_f_oracle, prox_g_oracle};
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(
            soft_threshold(&[2.0, -0.5, -3.0], 1.0).unwrap(),
            vec![1.0, 0.0, -2.0]
        );
        assert_eq!(soft_threshold(&[0.0; 4], 0.3).unwrap(), vec![0.0; 4]);
        assert!(soft_threshold(&[1.0], 0.0).is_err());
        assert!(soft_threshold(&[1.0], -1.0).is_err());
    }

    #[test]
    fn soft_threshold_matches_grid_minimizer() {
        for &(v, kappa) in &[(2.0, 1.0), (-0.7, 0.5), (0.3, 0.8), (-4.2, 1.7), (9.0, 0.1)] {
            let grid = prox_g_oracle(v, kappa, 1e-4);
            let closed = soft_threshold(&[v], kappa).unwrap()[0];
            assert!((grid - closed).abs() <= 1e-4, "v={v} kappa={kappa}");
        }
    }

    #[test]
    fn ball_project_cases() {
        let y = [0.0, 0.0];
        let p = ball_project(&[3.0, 4.0], &y, 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(ball_project(&[0.1, 0.2], &y, 1.0).unwrap(), vec![0.1, 0.2]);
        // v == y: the zero-denominator case is interior
        assert_eq!(
            ball_project(&[1.0, 2.0], &[1.0, 2.0], 0.5).unwrap(),
            vec![1.0, 2.0]
        );
        assert!(ball_project(&[1.0], &[0.0], 0.0).is_err());
        assert!(ball_project(&[1.0, 2.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn ball_project_dominates_random_candidates() {
        let v = [3.0, -1.0, 2.5];
        let y = [0.5, 0.5, 0.0];
        prox_f_oracle(&v, &y, 1.2, 1000, 11).unwrap();
    }

    fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    }

    proptest! {
        #[test]
        fn soft_threshold_nonexpansive_and_shrinking(
            (u, v) in (1usize..12).prop_flat_map(vec_pair),
            kappa in 0.01..5.0f64,
        ) {
            let pu = soft_threshold(&u, kappa).unwrap();
            let pv = soft_threshold(&v, kappa).unwrap();
            prop_assert!(dist2(&pu, &pv) <= dist2(&u, &v) + 1e-12);
            prop_assert!(norm1(&pu) <= norm1(&u));
        }

        #[test]
        fn ball_project_nonexpansive_idempotent_feasible(
            (u, v) in (1usize..12).prop_flat_map(vec_pair),
            yseed in prop::collection::vec(-3.0..3.0f64, 12),
            eta in 0.01..8.0f64,
        ) {
            let y = &yseed[..u.len()];
            let pu = ball_project(&u, y, eta).unwrap();
            let pv = ball_project(&v, y, eta).unwrap();
            prop_assert!(dist2(&pu, &pv) <= dist2(&u, &v) + 1e-12);
            prop_assert!(dist2(&pu, y) <= eta * (1.0 + 1e-12));
            prop_assert_eq!(ball_project(&pu, y, eta).unwrap(), pu.clone());
        }
    }
}
