//! Kolmogorov-Smirnov distance to a reference CDF and the energy-distance
//! two-sample permutation test.

use serde::Serialize;

use super::DiagnosticReport;
use crate::error::{invalid, Error, Result};
use crate::grid::PathEnsemble;
use crate::parallel::map_indexed;
use crate::seed::{PathRng, Seed};

/// `sup_x |F_N(x) - F(x)|`, taking both one-sided limits at every sample
/// point. The left limit of `F` at `x` is read as `F(x.next_down())`, so
/// step reference CDFs are handled exactly.
pub fn ks_distance(sample: &[f64], reference_cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(invalid("sample contains NaN"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let upto = j as f64 / n;
        d = d.max((upto - reference_cdf(x)).abs());
        d = d.max((reference_cdf(x.next_down()) - below).abs());
        i = j;
    }
    Ok(d.min(1.0))
}

pub const DEFAULT_PERMUTATIONS: usize = 199;

/// Values of every path at each of `times`, row-major (`len(times)` columns).
pub fn marginal_rows(ens: &PathEnsemble, times: &[f64]) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(invalid("need at least one time"));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("times must be strictly increasing"));
    }
    let cols = times.iter().map(|&t| ens.marginal(t)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(ens.len() * times.len());
    for i in 0..ens.len() {
        rows.extend(cols.iter().map(|c| c[i]));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub n_x: usize,
    pub n_y: usize,
}

/// `nm/(n+m) * (2 E|X-Y| - E|X-X'| - E|Y-Y'|)` with V-statistic means, on
/// row-major samples of dimension `dim`.
pub fn energy_statistic(x: &[f64], y: &[f64], dim: usize) -> Result<f64> {
    let (pooled, n, m) = pool(x, y, dim)?;
    let labels: Vec<bool> = (0..n + m).map(|i| i < n).collect();
    Ok(statistics(&pooled, dim, n, m, &[labels])[0])
}

/// Energy statistic and its permutation p-value `(1 + #{T* >= T}) / (1 + P)`.
/// Relabelings are drawn in sequence from one stream seeded by `seed`.
pub fn energy_test(x: &[f64], y: &[f64], dim: usize, n_permutations: usize, seed: Seed) -> Result<EnergyTest> {
    if n_permutations == 0 {
        return Err(invalid("need at least one permutation"));
    }
    let (pooled, n, m) = pool(x, y, dim)?;
    let mut labelings = Vec::with_capacity(n_permutations + 1);
    labelings.push((0..n + m).map(|i| i < n).collect::<Vec<bool>>());
    let mut rng = PathRng::new(seed);
    let mut order: Vec<usize> = (0..n + m).collect();
    for _ in 0..n_permutations {
        rng.shuffle(&mut order);
        let mut lab = vec![false; n + m];
        for &k in &order[..n] {
            lab[k] = true;
        }
        labelings.push(lab);
    }
    let stats = statistics(&pooled, dim, n, m, &labelings);
    let observed = stats[0];
    let exceed = stats[1..].iter().filter(|&&s| s >= observed).count();
    Ok(EnergyTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + n_permutations) as f64,
        n_permutations,
        n_x: n,
        n_y: m,
    })
}

/// Energy permutation test between the finite-dimensional marginals of two
/// ensembles at `times`. Passes (same law not rejected) when `p >= 0.01`.
pub fn fdd_two_sample(
    ens_a: &PathEnsemble,
    ens_b: &PathEnsemble,
    times: &[f64],
    n_permutations: usize,
    seed: Seed,
) -> Result<DiagnosticReport> {
    let x = marginal_rows(ens_a, times)?;
    let y = marginal_rows(ens_b, times)?;
    let test = energy_test(&x, &y, times.len(), n_permutations, seed)?;
    Ok(p_value_report(&test))
}

pub(crate) fn p_value_report(test: &EnergyTest) -> DiagnosticReport {
    let p = test.p_value;
    DiagnosticReport {
        statistic_name: "energy_permutation_p_value".into(),
        value: p,
        ci_halfwidth: super::Z99 * (p * (1.0 - p) / test.n_permutations as f64).sqrt(),
        threshold: 0.01,
        pass: p >= 0.01,
        sample_size: test.n_x + test.n_y,
    }
}

fn pool(x: &[f64], y: &[f64], dim: usize) -> Result<(Vec<f64>, usize, usize)> {
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !x.len().is_multiple_of(dim) || !y.len().is_multiple_of(dim) {
        return Err(invalid("sample length is not a multiple of the dimension"));
    }
    let (n, m) = (x.len() / dim, y.len() / dim);
    if n < 2 || m < 2 {
        return Err(Error::InsufficientData("each sample needs at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let mut pooled = x.to_vec();
    pooled.extend_from_slice(y);
    Ok((pooled, n, m))
}

/// Statistic for each labeling (`true` marks the first sample).
fn statistics(pooled: &[f64], dim: usize, n: usize, m: usize, labelings: &[Vec<bool>]) -> Vec<f64> {
    let within = if dim == 1 {
        within_sums_1d(pooled, labelings)
    } else {
        within_sums(pooled, dim, labelings)
    };
    let total = within.total;
    let (nf, mf) = (n as f64, m as f64);
    within
        .pairs
        .iter()
        .map(|&(aa, bb)| {
            let ab = total - aa - bb;
            nf * mf / (nf + mf) * (2.0 * ab / (nf * mf) - 2.0 * aa / (nf * nf) - 2.0 * bb / (mf * mf))
        })
        .collect()
}

struct WithinSums {
    /// Sum of `|z_i - z_j|` over all unordered pairs.
    total: f64,
    /// Per labeling, the same sum restricted to pairs inside each group.
    pairs: Vec<(f64, f64)>,
}

fn within_sums_1d(pooled: &[f64], labelings: &[Vec<bool>]) -> WithinSums {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]).then(i.cmp(&j)));
    let sorted: Vec<f64> = order.iter().map(|&i| pooled[i]).collect();
    let run = |keep: &dyn Fn(usize) -> bool| {
        let (mut count, mut sum, mut acc) = (0.0f64, 0.0f64, 0.0f64);
        for (r, &v) in sorted.iter().enumerate() {
            if keep(order[r]) {
                acc += count * v - sum;
                count += 1.0;
                sum += v;
            }
        }
        acc
    };
    let total = run(&|_| true);
    let pairs = map_indexed(labelings.len(), |p| {
        let lab = &labelings[p];
        (run(&|i| lab[i]), run(&|i| !lab[i]))
    });
    WithinSums { total, pairs }
}

const BATCH: usize = 64;

/// Pairwise Euclidean distances are computed on the fly, once per batch of
/// 64 labelings: row `i` accumulates `sum_{j > i} |z_i - z_j| w_j[p]` for
/// every labeling `p` of the batch at once.
fn within_sums(pooled: &[f64], dim: usize, labelings: &[Vec<bool>]) -> WithinSums {
    let len = pooled.len() / dim;
    let dist = |i: usize, j: usize| {
        let (a, b) = (&pooled[i * dim..(i + 1) * dim], &pooled[j * dim..(j + 1) * dim]);
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    let mut total = 0.0;
    let mut pairs = Vec::with_capacity(labelings.len());
    for (batch_index, batch) in labelings.chunks(BATCH).enumerate() {
        let mut weights = vec![0.0f64; len * BATCH];
        for (p, lab) in batch.iter().enumerate() {
            for (j, &l) in lab.iter().enumerate() {
                if l {
                    weights[j * BATCH + p] = 1.0;
                }
            }
        }
        let rows = map_indexed(len, |i| {
            let mut s = [0.0f64; BATCH];
            let mut r = 0.0;
            for j in i + 1..len {
                let d = dist(i, j);
                r += d;
                let w = &weights[j * BATCH..(j + 1) * BATCH];
                for p in 0..BATCH {
                    s[p] += d * w[p];
                }
            }
            (r, s)
        });
        let mut aa = [0.0f64; BATCH];
        let mut bb = [0.0f64; BATCH];
        let mut batch_total = 0.0;
        for (i, (r, s)) in rows.iter().enumerate() {
            batch_total += r;
            for p in 0..batch.len() {
                if batch[p][i] {
                    aa[p] += s[p];
                } else {
                    bb[p] += r - s[p];
                }
            }
        }
        if batch_index == 0 {
            total = batch_total;
        }
        pairs.extend((0..batch.len()).map(|p| (aa[p], bb[p])));
    }
    WithinSums { total, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_path_seed;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normal_cdf(x: f64) -> f64 {
        Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = PathRng::new(Seed(seed));
        (0..n).map(|_| rng.standard_normal() + shift).collect()
    }

    #[test]
    fn point_mass_at_the_median() {
        assert!((ks_distance(&[0.0; 10], normal_cdf).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_mass_against_its_own_step() {
        let step = |x: f64| if x >= 2.0 { 1.0 } else { 0.0 };
        assert_eq!(ks_distance(&[2.0; 7], step).unwrap(), 0.0);
    }

    #[test]
    fn exact_sample_is_close() {
        let xs = normals(11, 100_000, 0.0);
        assert!(ks_distance(&xs, normal_cdf).unwrap() < 0.01);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert_eq!(ks_distance(&[], normal_cdf).unwrap_err(), Error::EmptySample);
    }

    #[test]
    fn single_point_distance() {
        // F_N jumps 0 -> 1 at x; the distance is max(F(x), 1 - F(x)).
        let d = ks_distance(&[1.0], normal_cdf).unwrap();
        assert!((d - normal_cdf(1.0)).abs() < 1e-15);
    }

    fn brute_force_energy(x: &[f64], y: &[f64], dim: usize) -> f64 {
        let row = |s: &[f64], i: usize| s[i * dim..(i + 1) * dim].to_vec();
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        let (n, m) = (x.len() / dim, y.len() / dim);
        let mean = |s: &[f64], ns: usize, t: &[f64], nt: usize| {
            let mut acc = 0.0;
            for i in 0..ns {
                for j in 0..nt {
                    acc += d(&row(s, i), &row(t, j));
                }
            }
            acc / (ns * nt) as f64
        };
        let (nf, mf) = (n as f64, m as f64);
        nf * mf / (nf + mf) * (2.0 * mean(x, n, y, m) - mean(x, n, x, n) - mean(y, m, y, m))
    }

    #[test]
    fn energy_matches_brute_force() {
        for dim in 1..=3 {
            let x = normals(1, 40 * dim, 0.0);
            let y = normals(2, 30 * dim, 0.5);
            let fast = energy_statistic(&x, &y, dim).unwrap();
            let slow = brute_force_energy(&x, &y, dim);
            assert!(
                (fast - slow).abs() < 1e-10 * slow.abs().max(1.0),
                "dim {dim}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn one_dimensional_shortcut_matches_the_general_kernel() {
        let pooled = normals(3, 300, 0.0);
        let mut rng = PathRng::new(Seed(4));
        let labelings: Vec<Vec<bool>> = (0..70)
            .map(|_| {
                let mut order: Vec<usize> = (0..300).collect();
                rng.shuffle(&mut order);
                let mut lab = vec![false; 300];
                for &k in &order[..120] {
                    lab[k] = true;
                }
                lab
            })
            .collect();
        let a = within_sums_1d(&pooled, &labelings);
        let b = within_sums(&pooled, 1, &labelings);
        assert!((a.total - b.total).abs() < 1e-9 * a.total);
        for (p, q) in a.pairs.iter().zip(&b.pairs) {
            assert!((p.0 - q.0).abs() < 1e-9 * a.total && (p.1 - q.1).abs() < 1e-9 * a.total);
        }
    }

    #[test]
    fn shifted_samples_are_rejected() {
        let x = normals(5, 400, 0.0);
        let y = normals(6, 400, 1.0);
        let t = energy_test(&x, &y, 1, 199, Seed(7)).unwrap();
        assert_eq!(t.p_value, 0.005);
    }

    #[test]
    fn p_values_are_roughly_uniform_under_the_null() {
        let reps = 200;
        let mut small = 0;
        for r in 0..reps {
            let s = derive_path_seed(Seed(8), r);
            let x = normals(s.0, 60, 0.0);
            let y = normals(s.child(1).0, 60, 0.0);
            if energy_test(&x, &y, 2, 99, s.child(2)).unwrap().p_value < 0.05 {
                small += 1;
            }
        }
        let rate = small as f64 / reps as f64;
        assert!((rate - 0.05).abs() < 0.04, "type I error {rate}");
    }

    #[test]
    fn reproducible_for_a_seed() {
        let x = normals(9, 50, 0.0);
        let y = normals(10, 50, 0.2);
        assert_eq!(
            energy_test(&x, &y, 2, 150, Seed(3)).unwrap(),
            energy_test(&x, &y, 2, 150, Seed(3)).unwrap()
        );
    }

    proptest! {
        #[test]
        fn ks_is_invariant_under_increasing_maps(
            xs in prop::collection::vec(-4.0f64..4.0, 1..80),
            scale in 0.1f64..5.0,
            shift in -3.0f64..3.0,
        ) {
            let d0 = ks_distance(&xs, normal_cdf).unwrap();
            let ys: Vec<f64> = xs.iter().map(|x| (scale * x + shift).exp()).collect();
            let d1 = ks_distance(&ys, |y: f64| if y <= 0.0 { 0.0 } else { normal_cdf((y.ln() - shift) / scale) }).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-9, "{} vs {}", d0, d1);
        }
    }
}
