//! Seeded sampling, dense least squares, and a fixed-step RK4 integrator.

use crate::error::{Error, Result};
use crate::symexpr::Sym;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;

pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// One sample with every component drawn uniformly from [-2,-0.5] u [0.5,2]
/// (positive-flagged symbols stay in [0.5,2]), avoiding degenerate zeros.
pub fn sample_point(rng: &mut ChaCha12Rng, syms: &[(Sym, bool)]) -> BTreeMap<Sym, f64> {
    let mut out = BTreeMap::new();
    for (s, positive) in syms {
        let mag: f64 = rng.random_range(0.5..=2.0);
        let sign = if *positive || rng.random_bool(0.5) { 1.0 } else { -1.0 };
        out.insert(s.clone(), sign * mag);
    }
    out
}

pub struct LeastSquaresFit {
    pub solution: Vec<f64>,
    pub rank: usize,
    pub nullspace_dim: usize,
    /// A unit vector spanning part of the nullspace when it is nontrivial.
    pub witness: Option<Vec<f64>>,
}

/// Minimum-norm least-squares solution of `A x = b` with SVD rank detection.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquaresFit> {
    let ncols = a.ncols();
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = if s_max > 0.0 { s_max * 1e-10 } else { 1e-30 };
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let solution = svd
        .solve(b, eps)
        .map_err(|e| Error::Invalid(format!("SVD solve failed: {e}")))?;
    let nullspace_dim = ncols - rank;
    let witness = if nullspace_dim > 0 {
        svd.v_t.as_ref().map(|vt| vt.row(vt.nrows() - 1).iter().cloned().collect())
    } else {
        None
    };
    Ok(LeastSquaresFit {
        solution: solution.iter().cloned().collect(),
        rank,
        nullspace_dim,
        witness,
    })
}

/// Classic fixed-step fourth-order Runge-Kutta. Calls `observe(t, state)`
/// after every accepted step (and once at t0); rejects non-finite states.
pub fn rk4<F, O>(
    deriv: F,
    state0: &[f64],
    t_end: f64,
    dt: f64,
    mut observe: O,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]),
{
    assert!(dt > 0.0 && t_end >= 0.0);
    let n = state0.len();
    let mut y = state0.to_vec();
    let mut t = 0.0;
    observe(t, &y);
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        let k1 = deriv(&y)?;
        let mut y2 = vec![0.0; n];
        for i in 0..n {
            y2[i] = y[i] + 0.5 * dt * k1[i];
        }
        let k2 = deriv(&y2)?;
        let mut y3 = vec![0.0; n];
        for i in 0..n {
            y3[i] = y[i] + 0.5 * dt * k2[i];
        }
        let k3 = deriv(&y3)?;
        let mut y4 = vec![0.0; n];
        for i in 0..n {
            y4[i] = y[i] + dt * k3[i];
        }
        let k4 = deriv(&y4)?;
        for i in 0..n {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepRejected(t));
        }
        observe(t, &y);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_avoids_the_origin_and_respects_positivity() {
        let mut rng = seeded_rng(42);
        let syms = vec![(Sym::even("a"), false), (Sym::even("m"), true)];
        for _ in 0..200 {
            let p = sample_point(&mut rng, &syms);
            let a = p[&Sym::even("a")];
            let m = p[&Sym::even("m")];
            assert!((0.5..=2.0).contains(&a.abs()));
            assert!((0.5..=2.0).contains(&m));
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let syms = vec![(Sym::even("a"), false)];
        let p1 = sample_point(&mut seeded_rng(7), &syms);
        let p2 = sample_point(&mut seeded_rng(7), &syms);
        assert_eq!(p1, p2);
    }

    #[test]
    fn least_squares_recovers_exact_solution_and_rank() {
        // overdetermined consistent system
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0]);
        let b = DVector::from_vec(vec![3.0, -1.0, 2.0, 5.0]);
        let fit = least_squares(&a, &b).unwrap();
        assert_eq!(fit.rank, 2);
        assert_eq!(fit.nullspace_dim, 0);
        assert!((fit.solution[0] - 3.0).abs() < 1e-12);
        assert!((fit.solution[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_reports_nullspace() {
        // second column is a copy of the first
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let fit = least_squares(&a, &b).unwrap();
        assert_eq!(fit.rank, 1);
        assert_eq!(fit.nullspace_dim, 1);
        assert!(fit.witness.is_some());
    }

    #[test]
    fn rk4_integrates_the_exponential() {
        let end = rk4(|y| Ok(vec![y[0]]), &[1.0], 1.0, 1e-3, |_, _| {}).unwrap();
        assert!((end[0] - 1.0f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn rk4_rejects_blowup() {
        // dx/dt = x^2 from 1 blows up at t = 1
        let r = rk4(|y| Ok(vec![y[0] * y[0]]), &[1.0], 2.0, 1e-3, |_, _| {});
        assert!(matches!(r, Err(Error::StepRejected(_))));
    }
}
