//! The two-time crossing inequality
//!
//! ```text
//! E[U 1{X_s < a, d < X_t < e}] E[V 1{X_s > a, b < X_t < c}]
//!     <= E[U 1{X_s < a, b < X_t < c}] E[V 1{X_s > a, d < X_t < e}]
//! ```
//!
//! for `s < t`, `b < c <= d < e`, and nonnegative weights `U`, `V` that only
//! look at the path up to time `s`. All inequalities in the events are
//! strict, so ties with a threshold fall outside every event.

use serde::Serialize;

use super::Z99;
use crate::error::{invalid, Result};
use crate::grid::PathEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityParams {
    pub s: f64,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl InequalityParams {
    fn validate(&self) -> Result<()> {
        if !(self.s < self.t) {
            return Err(invalid(format!("need s < t, got s = {}, t = {}", self.s, self.t)));
        }
        if !(self.b < self.c && self.c <= self.d && self.d < self.e) {
            return Err(invalid(format!(
                "need b < c <= d < e, got {}, {}, {}, {}",
                self.b, self.c, self.d, self.e
            )));
        }
        if ![self.s, self.t, self.a, self.b, self.c, self.d, self.e]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(invalid("parameters must be finite"));
        }
        if self.s < 0.0 {
            return Err(invalid("s must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub params: InequalityParams,
    pub lhs_estimate: f64,
    pub rhs_estimate: f64,
    pub lhs_ci: f64,
    pub rhs_ci: f64,
    pub satisfied_within_ci: bool,
    pub sample_size: usize,
}

/// Unweighted check (`U = V = 1`).
pub fn crossing_inequality_check(ens: &PathEnsemble, params: InequalityParams) -> Result<InequalityReport> {
    crossing_inequality_check_weighted(ens, params, None)
}

/// A weight functional of the path values up to `s`.
pub type Weight<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Weights `(U, V)` receive the path values at nodes `t_k <= s`.
pub fn crossing_inequality_check_weighted(
    ens: &PathEnsemble,
    params: InequalityParams,
    weights: Option<(Weight<'_>, Weight<'_>)>,
) -> Result<InequalityReport> {
    params.validate()?;
    let xs = ens.marginal(params.s)?;
    let xt = ens.marginal(params.t)?;
    let ks = ens.grid().index_at(params.s)?;
    let InequalityParams { a, b, c, d, e, .. } = params;

    // Per path: [U 1{lo, de}, V 1{hi, bc}, U 1{lo, bc}, V 1{hi, de}].
    let mut rows = Vec::with_capacity(ens.len());
    for (i, path) in ens.paths().iter().enumerate() {
        let (u, v) = match weights {
            Some((wu, wv)) => {
                let past = &path.values()[..=ks];
                let (u, v) = (wu(past), wv(past));
                if !(u >= 0.0 && v >= 0.0 && u.is_finite() && v.is_finite()) {
                    return Err(invalid(format!("weights must be finite and nonnegative (path {i})")));
                }
                (u, v)
            }
            None => (1.0, 1.0),
        };
        let (x_s, x_t) = (xs[i], xt[i]);
        let lo = x_s < a;
        let hi = x_s > a;
        let in_bc = b < x_t && x_t < c;
        let in_de = d < x_t && x_t < e;
        let ind = |q: bool| if q { 1.0 } else { 0.0 };
        rows.push([
            u * ind(lo && in_de),
            v * ind(hi && in_bc),
            u * ind(lo && in_bc),
            v * ind(hi && in_de),
        ]);
    }

    let n = rows.len() as f64;
    let mut mean = [0.0f64; 4];
    for r in &rows {
        for k in 0..4 {
            mean[k] += r[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = [[0.0f64; 4]; 4];
    for r in &rows {
        for j in 0..4 {
            for k in 0..4 {
                cov[j][k] += (r[j] - mean[j]) * (r[k] - mean[k]);
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= denom;
        }
    }

    // Delta method for a product of two means.
    let product_ci = |p: usize, q: usize| {
        let var =
            (mean[q] * mean[q] * cov[p][p] + mean[p] * mean[p] * cov[q][q] + 2.0 * mean[p] * mean[q] * cov[p][q]) / n;
        Z99 * var.max(0.0).sqrt()
    };
    let lhs = mean[0] * mean[1];
    let rhs = mean[2] * mean[3];
    let lhs_ci = product_ci(0, 1);
    let rhs_ci = product_ci(2, 3);
    Ok(InequalityReport {
        params,
        lhs_estimate: lhs,
        rhs_estimate: rhs,
        lhs_ci,
        rhs_ci,
        satisfied_within_ci: lhs <= rhs + lhs_ci + rhs_ci,
        sample_size: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{inequality_violator, refl_bm_limit};
    use crate::grid::{make_uniform_grid, Path};
    use crate::seed::{derive_path_seed, PathRng, Seed};
    use proptest::prelude::*;

    fn params(a: f64) -> InequalityParams {
        InequalityParams {
            s: 0.5,
            t: 1.0,
            a,
            b: 0.1,
            c: 0.4,
            d: 0.8,
            e: 1.5,
        }
    }

    fn random_ensemble(seed: u64, n: usize) -> PathEnsemble {
        let g = make_uniform_grid(1.0, 4).unwrap();
        let mut rng = PathRng::new(Seed(seed));
        let paths = (0..n)
            .map(|_| {
                let mut x = 0.0;
                let mut v = vec![0.0];
                for _ in 0..4 {
                    x += 0.6 * rng.standard_normal();
                    v.push(x);
                }
                Path::new(g, v).unwrap()
            })
            .collect();
        PathEnsemble::new(g, paths, Seed(seed), "gauss").unwrap()
    }

    #[test]
    fn threshold_below_the_sample_gives_zeros() {
        let ens = random_ensemble(1, 500);
        let r = crossing_inequality_check(&ens, params(-100.0)).unwrap();
        assert_eq!((r.lhs_estimate, r.rhs_estimate), (0.0, 0.0));
        assert!(r.satisfied_within_ci);
    }

    #[test]
    fn crafted_violator_is_flagged() {
        let g = make_uniform_grid(1.0, 4).unwrap();
        let ens = inequality_violator(&g, 1000, 0.5, 0.7, (0.1, 0.4), (0.8, 1.5)).unwrap();
        let r = crossing_inequality_check(&ens, params(0.7)).unwrap();
        assert_eq!(r.lhs_estimate, 0.25);
        assert_eq!(r.rhs_estimate, 0.0);
        assert!(!r.satisfied_within_ci);
    }

    #[test]
    fn parameter_order_is_enforced() {
        let ens = random_ensemble(2, 10);
        let mut p = params(0.5);
        p.c = 0.9;
        assert!(crossing_inequality_check(&ens, p).is_err());
        let mut p = params(0.5);
        p.s = 1.0;
        assert!(crossing_inequality_check(&ens, p).is_err());
    }

    #[test]
    fn horizon_is_enforced() {
        let ens = random_ensemble(3, 10);
        let mut p = params(0.5);
        p.t = 2.0;
        assert!(crossing_inequality_check(&ens, p).is_err());
    }

    #[test]
    fn unit_weights_match_the_unweighted_check() {
        let ens = random_ensemble(4, 300);
        let one = |_: &[f64]| 1.0;
        let w = crossing_inequality_check_weighted(&ens, params(0.2), Some((&one, &one))).unwrap();
        assert_eq!(w, crossing_inequality_check(&ens, params(0.2)).unwrap());
    }

    #[test]
    fn negative_weights_are_rejected() {
        let ens = random_ensemble(5, 10);
        let neg = |_: &[f64]| -1.0;
        let one = |_: &[f64]| 1.0;
        assert!(crossing_inequality_check_weighted(&ens, params(0.2), Some((&neg, &one))).is_err());
    }

    #[test]
    fn reflecting_limit_satisfies_the_inequality() {
        let g = make_uniform_grid(1.0, 100).unwrap();
        let paths = (0..4000)
            .map(|i| refl_bm_limit(&g, derive_path_seed(Seed(6), i)).unwrap())
            .collect();
        let ens = PathEnsemble::new(g, paths, Seed(6), "refl").unwrap();
        let r = crossing_inequality_check(&ens, params(0.7)).unwrap();
        assert!(r.satisfied_within_ci, "{r:?}");
    }

    proptest! {
        #[test]
        fn relabelling_paths_keeps_the_verdict(seed in 0u64..1000, a in -1.0f64..1.0) {
            let ens = random_ensemble(seed, 200);
            let mut paths = ens.paths().to_vec();
            paths.reverse();
            paths.rotate_left((seed % 200) as usize);
            let shuffled = PathEnsemble::new(*ens.grid(), paths, Seed(seed), "gauss").unwrap();
            let p = InequalityParams { s: 0.25, t: 0.75, a, b: -1.0, c: -0.2, d: 0.1, e: 1.2 };
            let r0 = crossing_inequality_check(&ens, p).unwrap();
            let r1 = crossing_inequality_check(&shuffled, p).unwrap();
            prop_assert_eq!(r0.satisfied_within_ci, r1.satisfied_within_ci);
            prop_assert!((r0.lhs_estimate - r1.lhs_estimate).abs() < 1e-12);
            prop_assert!((r0.rhs_estimate - r1.rhs_estimate).abs() < 1e-12);
        }
    }
}
