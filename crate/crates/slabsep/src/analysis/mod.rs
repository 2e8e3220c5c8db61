//! Statistical estimators over simulator and passage-field output: projected
//! total-variation lower bounds with bootstrap intervals, scalar summaries,
//! proportion intervals, and log-log least-squares fits.

pub mod experiments;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Pcg64;
use crate::tasep::Configuration;

/// Projection of a configuration to a low-dimensional summary: particle
/// counts in `prefixes` equal prefixes (quantized by `bin`), the total count,
/// and the indicator of a hole majority. Total variation between projected
/// laws never exceeds the total variation between the full laws, so
/// estimates built on it are lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatisticSpec {
    pub prefixes: usize,
    pub bin: usize,
    pub include_total: bool,
    pub include_hole_majority: bool,
}

impl StatisticSpec {
    pub fn default_for(n: usize) -> Self {
        StatisticSpec {
            prefixes: 8.min(n.max(1)),
            bin: 1,
            include_total: true,
            include_hole_majority: true,
        }
    }

    pub fn project(&self, eta: &Configuration) -> Vec<u16> {
        let n = eta.len();
        let mut key = Vec::with_capacity(self.prefixes + 2);
        let acc_at = |bound: usize| -> u16 {
            eta.0[..bound].iter().map(|v| *v as usize).sum::<usize>() as u16
        };
        let mut prev = 0u16;
        for i in 0..self.prefixes {
            let bound = (i + 1) * n / self.prefixes;
            let cum = acc_at(bound);
            key.push((cum - prev) / self.bin as u16);
            prev = cum;
        }
        let total = eta.particles() as u16;
        if self.include_total {
            key.push(total / self.bin as u16);
        }
        if self.include_hole_majority {
            key.push((2 * (n as u16 - total) > n as u16) as u16);
        }
        key
    }

    /// One rung coarser: wider count bins first, then fewer prefixes.
    /// `None` once maximally coarse.
    pub fn coarsen(&self, n: usize) -> Option<Self> {
        let mut next = *self;
        if next.prefixes > 1 && next.bin >= 4 {
            next.prefixes /= 2;
        } else if next.bin < n.max(2) {
            next.bin *= 2;
        } else if next.prefixes > 1 {
            next.prefixes /= 2;
        } else {
            return None;
        }
        Some(next)
    }
}

/// Half-L1 between two weighted key maps (weights need not be normalized;
/// they are normalized here).
pub fn tv_between_maps(a: &BTreeMap<Vec<u16>, f64>, b: &BTreeMap<Vec<u16>, f64>) -> f64 {
    let za: f64 = a.values().sum();
    let zb: f64 = b.values().sum();
    let mut acc = 0.0;
    for (k, va) in a {
        let vb = b.get(k).copied().unwrap_or(0.0);
        acc += (va / za - vb / zb).abs();
    }
    for (k, vb) in b {
        if !a.contains_key(k) {
            acc += vb / zb;
        }
    }
    0.5 * acc
}

fn histogram(samples: &[Configuration], spec: StatisticSpec) -> BTreeMap<Vec<u16>, f64> {
    let mut map = BTreeMap::new();
    for s in samples {
        *map.entry(spec.project(s)).or_insert(0.0) += 1.0;
    }
    map
}

/// Pushes an exact distribution over `2^n` states through the projection.
pub fn project_exact(dist: &[f64], n: usize, spec: StatisticSpec) -> BTreeMap<Vec<u16>, f64> {
    let mut map = BTreeMap::new();
    for (state, p) in dist.iter().enumerate() {
        if *p > 0.0 {
            *map.entry(spec.project(&Configuration::from_bits(state, n)))
                .or_insert(0.0) += *p;
        }
    }
    map
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TvEstimate {
    /// Projected total variation: a lower bound for the full-law distance.
    pub tv: f64,
    /// Bootstrap percentile interval.
    pub ci: (f64, f64),
    /// Whether the projection had to be coarsened to fit the sample size.
    pub coarsened: bool,
    pub spec: StatisticSpec,
}

/// Total variation between two empirical laws under the projection, with a
/// bootstrap interval. When the projected image is too rich for the sample
/// size (empirical TV between identical laws would not be near zero), the
/// projection is coarsened automatically and the estimate flagged.
pub fn tv_lower_estimate(
    a: &[Configuration],
    b: &[Configuration],
    spec: StatisticSpec,
    bootstrap: usize,
    seed: u64,
) -> Result<TvEstimate> {
    if a.len() < 100 || b.len() < 100 {
        return Err(Error::InvalidParameter(
            "need at least 100 samples per side".into(),
        ));
    }
    let n = a[0].len();
    let budget = a.len().min(b.len()) / 20;
    let mut spec = spec;
    let mut coarsened = false;
    let (ha, hb) = loop {
        let ha = histogram(a, spec);
        let hb = histogram(b, spec);
        let support = ha.len().max(hb.len());
        if support <= budget.max(4) {
            break (ha, hb);
        }
        match spec.coarsen(n) {
            Some(next) => {
                spec = next;
                coarsened = true;
            }
            None => break (ha, hb),
        }
    };
    let tv = tv_between_maps(&ha, &hb);

    let mut rng = Pcg64::seed_from(seed);
    let mut boots = Vec::with_capacity(bootstrap);
    let proj_a: Vec<Vec<u16>> = a.iter().map(|s| spec.project(s)).collect();
    let proj_b: Vec<Vec<u16>> = b.iter().map(|s| spec.project(s)).collect();
    for _ in 0..bootstrap {
        let mut ra: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for _ in 0..proj_a.len() {
            *ra.entry(proj_a[rng.below(proj_a.len())].clone()).or_insert(0.0) += 1.0;
        }
        let mut rb: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for _ in 0..proj_b.len() {
            *rb.entry(proj_b[rng.below(proj_b.len())].clone()).or_insert(0.0) += 1.0;
        }
        boots.push(tv_between_maps(&ra, &rb));
    }
    boots.sort_by(f64::total_cmp);
    let ci = if bootstrap >= 40 {
        (
            boots[(0.025 * bootstrap as f64) as usize],
            boots[((0.975 * bootstrap as f64) as usize).min(bootstrap - 1)],
        )
    } else {
        (tv, tv)
    };
    Ok(TvEstimate {
        tv,
        ci,
        coarsened,
        spec,
    })
}

/// Sample mean and (unbiased) standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Complementary error function (Numerical Recipes rational fit; absolute
/// error below 1.2e-7, ample for test p-values).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Upper tail of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Two-sample two-proportion z-test p-value (two-sided).
pub fn two_proportion_p(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let p1 = x1 as f64 / n1f;
    let p2 = x2 as f64 / n2f;
    let pool = (x1 + x2) as f64 / (n1f + n2f);
    let se = (pool * (1.0 - pool) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    if se == 0.0 {
        return 1.0;
    }
    2.0 * normal_sf(((p1 - p2) / se).abs())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; NaN with fewer than 3 points (slope
    /// reported, no interval).
    pub slope_se: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(Fit {
        slope,
        intercept,
        slope_se,
    })
}

/// Log-log exponent fit.
pub fn loglog_fit(ns: &[f64], values: &[f64]) -> Option<Fit> {
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    ols(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_of_exact_vectors() {
        let mut a = BTreeMap::new();
        a.insert(vec![0u16], 0.7);
        a.insert(vec![1u16], 0.3);
        let mut b = BTreeMap::new();
        b.insert(vec![0u16], 0.4);
        b.insert(vec![1u16], 0.6);
        assert!((tv_between_maps(&a, &b) - 0.3).abs() < 1e-12);
        assert_eq!(tv_between_maps(&a, &a), 0.0);
    }

    #[test]
    fn projection_respects_data_processing_on_exact_laws() {
        // Projected TV <= full TV for arbitrary exact inputs.
        let n = 5;
        let m = 1usize << n;
        let mut rng = Pcg64::seed_from(4);
        for _ in 0..50 {
            let mut p: Vec<f64> = (0..m).map(|_| rng.open01()).collect();
            let mut q: Vec<f64> = (0..m).map(|_| rng.open01()).collect();
            let (zp, zq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
            p.iter_mut().for_each(|x| *x /= zp);
            q.iter_mut().for_each(|x| *x /= zq);
            let full = crate::oracle::tv_distance(&p, &q);
            for spec in [
                StatisticSpec::default_for(n),
                StatisticSpec {
                    prefixes: 2,
                    bin: 2,
                    include_total: true,
                    include_hole_majority: false,
                },
            ] {
                let proj = tv_between_maps(
                    &project_exact(&p, n, spec),
                    &project_exact(&q, n, spec),
                );
                assert!(proj <= full + 1e-12, "{proj} > {full}");
            }
        }
    }

    #[test]
    fn tv_estimate_identical_and_disjoint_samples() {
        let a: Vec<Configuration> = (0..500).map(|_| Configuration::full(8)).collect();
        let b: Vec<Configuration> = (0..500).map(|_| Configuration::empty(8)).collect();
        let same = tv_lower_estimate(&a, &a, StatisticSpec::default_for(8), 50, 1).unwrap();
        assert_eq!(same.tv, 0.0);
        let diff = tv_lower_estimate(&a, &b, StatisticSpec::default_for(8), 50, 1).unwrap();
        assert_eq!(diff.tv, 1.0);
    }

    #[test]
    fn tv_estimate_requires_samples_and_coarsens() {
        let a: Vec<Configuration> = (0..50).map(|_| Configuration::full(4)).collect();
        assert!(tv_lower_estimate(&a, &a, StatisticSpec::default_for(4), 10, 1).is_err());

        // Rich image over few samples triggers coarsening.
        let mut rng = Pcg64::seed_from(9);
        let n = 64;
        let rand_cfg = |rng: &mut Pcg64| {
            Configuration((0..n).map(|_| rng.below(2) as u8).collect())
        };
        let a: Vec<Configuration> = (0..150).map(|_| rand_cfg(&mut rng)).collect();
        let b: Vec<Configuration> = (0..150).map(|_| rand_cfg(&mut rng)).collect();
        let est = tv_lower_estimate(&a, &b, StatisticSpec::default_for(n), 40, 2).unwrap();
        assert!(est.coarsened);
        // Same law, so after coarsening the estimate should sit well below 1.
        assert!(est.tv < 0.6, "tv {}", est.tv);
    }

    #[test]
    fn wilson_interval_sane() {
        let (lo, hi) = wilson_ci(50, 100, 1.96);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.25);
        let (lo, hi) = wilson_ci(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi < 0.06);
    }

    #[test]
    fn normal_tail_and_erfc() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_sf(1.96) - 0.025).abs() < 3e-4);
        assert!((erfc(0.0) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn ols_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.1, 4.0, 5.9, 8.1];
        let fit = ols(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.1);
        assert!(fit.slope_se.is_finite());
        // Two points: slope, no interval.
        let fit = ols(&xs[..2], &ys[..2]).unwrap();
        assert!(fit.slope_se.is_nan());
    }
}
