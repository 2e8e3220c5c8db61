//! Geometric detectors on top of the passage engine: boundary hits of
//! geodesics, the slab-traversal event, semi-infinite geodesic prefixes via
//! far-line doubling, band-restricted passage times, boundary flow counts,
//! and the two-sided deviation event over restricted passage times.

use crate::error::{Error, Result};
use crate::model::Point;

use super::field::{best_target, geodesic, passage_values_at, Geodesic, GeodesicOptions};
use super::{Band, Environment, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Upper diagonal `{(x, x)}`.
    Upper,
    /// Lower diagonal `{(x + N, x)}`.
    Lower,
}

/// Offset of the first point of the path on the requested boundary: the `x`
/// of `p_x` on the upper diagonal, or the `z` with `q_{z + N/2} = (z + N, z)`
/// on the lower one. `None` if the path never touches it.
pub fn first_boundary_hit(geo: &Geodesic, env: &Environment, boundary: Boundary) -> Option<i64> {
    let slab = env.slab()?;
    geo.points.iter().find_map(|p| match boundary {
        Boundary::Upper => (p.x == p.y).then_some(p.x),
        Boundary::Lower => (p.x == p.y + slab.n).then_some(p.y),
    })
}

/// The traversal event: the geodesic from `q_{-N/2} = (0, -N)` to `p_m`
/// touches the upper boundary at some `p_{x1}` and later the lower boundary
/// at some `q_{x2}` with `N <= x1 <= x2 <= m`. Offsets are compared exactly
/// via doubling (`x2 = y + N/2` can be half-integral for odd `N`).
pub fn traversing_event(env: &Environment, m: i64) -> Result<bool> {
    let Some(slab) = env.slab() else {
        return Err(Error::InvalidParameter(
            "traversal event requires slab mode".into(),
        ));
    };
    let n = slab.n;
    if m < n {
        return Ok(false);
    }
    let g = geodesic(
        env,
        Point::new(0, -n),
        Point::new(m, m),
        GeodesicOptions::default(),
    )?;
    let mut first_hit_2x1: Option<i64> = None;
    for p in &g.points {
        if p.x == p.y {
            let two_x = 2 * p.x;
            if first_hit_2x1.is_none() && two_x >= 2 * n && two_x <= 2 * m {
                first_hit_2x1 = Some(two_x);
            }
        } else if p.x == p.y + n {
            let two_x2 = 2 * p.y + n;
            if let Some(two_x1) = first_hit_2x1 {
                if two_x2 >= two_x1 && two_x2 <= 2 * m {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

#[derive(Debug, Clone)]
pub struct SemiInfinitePrefix {
    pub points: Vec<Point>,
    /// Far-line horizon at which one more doubling left the prefix
    /// unchanged; `None` means the prefix never stabilized within budget
    /// (the reported points are from the largest horizon tried).
    pub stabilized_at_m: Option<i64>,
    pub attempts: u32,
}

/// Approximates the first `depth` steps of the semi-infinite geodesic from
/// `start` by shooting geodesics at the far line segment `L_m` and doubling
/// `m` until the prefix stops changing.
pub fn semi_infinite_prefix(
    env: &Environment,
    start: Point,
    depth: usize,
    m_budget: Option<i64>,
) -> Result<SemiInfinitePrefix> {
    let Mode::Slab { n, beta, .. } = env.mode else {
        return Err(Error::InvalidParameter(
            "semi-infinite geodesics require slab mode".into(),
        ));
    };
    if !env.contains(start) {
        return Err(Error::OutOfRegion {
            x: start.x,
            y: start.y,
        });
    }
    let slab = env.slab().unwrap();
    let b = (1.0 - beta) / beta;
    let mut m = start.x + 2 * depth as i64 + 2 * n;
    let budget = m_budget.unwrap_or_else(|| (64 * m).max(16 * n * n));

    let mut prev: Option<Vec<Point>> = None;
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let targets: Vec<Point> = slab
            .line_segment(m, b)
            .into_iter()
            .filter(|t| start.le(t))
            .collect();
        if targets.is_empty() {
            return Err(Error::Unreachable { x: m, y: m });
        }
        let (idx, _) = best_target(env, &[start], &targets, None)?;
        let g = geodesic(env, start, targets[idx], GeodesicOptions::default())?;
        let prefix: Vec<Point> = g.points.iter().take(depth + 1).copied().collect();
        if let Some(p) = &prev {
            if *p == prefix {
                return Ok(SemiInfinitePrefix {
                    points: prefix,
                    stabilized_at_m: Some(m),
                    attempts,
                });
            }
        }
        prev = Some(prefix);
        if m > budget {
            return Ok(SemiInfinitePrefix {
                points: prev.unwrap(),
                stabilized_at_m: None,
                attempts,
            });
        }
        m *= 2;
    }
}

/// Band-restricted passage time; always at most the unrestricted one.
/// `Err(NoPath)` when the band admits no path (for instance width 0 with
/// distinct endpoints).
pub fn restricted_passage(env: &Environment, band: Band, u: Point, v: Point) -> Result<f64> {
    let (d_lo, d_hi) = band.d_bounds(env)?;
    for p in [u, v] {
        if !env.contains(p) {
            return Err(Error::OutOfRegion { x: p.x, y: p.y });
        }
        let d = p.x - p.y;
        if d < d_lo || d > d_hi {
            return Err(Error::InvalidParameter(format!(
                "endpoint ({}, {}) outside the band",
                p.x, p.y
            )));
        }
    }
    if !u.le(&v) {
        return Err(Error::Unreachable { x: v.x, y: v.y });
    }
    let t = passage_values_at(env, &[u], &[v], Some(band))?[0];
    if t == f64::NEG_INFINITY {
        return Err(Error::NoPath);
    }
    Ok(t)
}

/// Boundary flow counts for the all-empty start with source `p_0`:
/// `M1' = #{m >= 1 : entry of the m-th particle by time t}` and
/// `M2  = #{m >= 1 : exit of the m-th particle by time t}`, read off the
/// completion times `T(p_0, c) + omega(c)` of the upper-boundary cells
/// `c = p_{m-1}` and lower-boundary cells `c = (N+m-1, m-1)`. Their
/// difference is exactly the particle count at time `t`.
pub fn flow_counts(env: &Environment, t: f64) -> Result<(u64, u64)> {
    let Some(slab) = env.slab() else {
        return Err(Error::InvalidParameter(
            "flow counts require slab mode".into(),
        ));
    };
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    let n = slab.n as usize;
    let neg = f64::NEG_INFINITY;

    // Rolling DP over anti-diagonal levels with rows indexed by d = x - y.
    let mut prev_out = vec![neg; n + 1];
    let mut cur_t = vec![neg; n + 1];
    let mut cur_out = vec![neg; n + 1];
    let (mut m1, mut m2) = (0u64, 0u64);
    let (mut m1_done, mut m2_done) = (false, false);
    let mut s: i64 = 0;
    while !(m1_done && m2_done) {
        for d in 0..=n {
            cur_t[d] = neg;
            cur_out[d] = neg;
            if (d as i64 + s) & 1 != 0 {
                continue;
            }
            let via_e1 = if d >= 1 { prev_out[d - 1] } else { neg };
            let via_e2 = if d + 1 <= n { prev_out[d + 1] } else { neg };
            let mut val = via_e1.max(via_e2);
            if s == 0 && d == 0 {
                val = val.max(0.0);
            }
            if val > neg {
                let p = Point::new((s + d as i64) / 2, (s - d as i64) / 2);
                cur_t[d] = val;
                cur_out[d] = val + env.weight_unchecked(p);
            }
        }
        // Completion times along each boundary are strictly increasing, so
        // the first exceedance closes the count.
        if s % 2 == 0 && cur_out[0] > neg {
            if cur_out[0] <= t {
                m1 += 1;
            } else {
                m1_done = true;
            }
        }
        if (s - slab.n) % 2 == 0 && s >= slab.n && cur_out[n] > neg {
            if cur_out[n] <= t {
                m2 += 1;
            } else {
                m2_done = true;
            }
        }
        std::mem::swap(&mut prev_out, &mut cur_out);
        s += 1;
    }
    Ok((m1, m2))
}

/// Largest two-sided deviation `|T_restricted(i, j) - (j - i) / rho_alpha|`
/// over all index pairs in the window `[n0, n0 + floor(r N^2)]`, taken over
/// both boundary rays with their hugging bands. The deviation event holds
/// for threshold `d` iff this maximum is at most `d N`, so it is monotone in
/// `d` by construction.
pub fn event_b_max_deviation(
    env: &Environment,
    n0: i64,
    r: f64,
    band_width: Option<i64>,
) -> Result<f64> {
    let Mode::Slab { n, alpha, beta } = env.mode else {
        return Err(Error::InvalidParameter(
            "deviation event requires slab mode".into(),
        ));
    };
    if (alpha - beta).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "deviation event is defined on the coexistence line (alpha = beta)".into(),
        ));
    }
    if r < 0.0 {
        return Err(Error::InvalidParameter("negative window scale".into()));
    }
    let width = band_width.unwrap_or_else(|| super::default_band_width(n));
    let rho = alpha * (1.0 - alpha);
    let len = (r * (n * n) as f64).floor() as i64;

    let mut max_dev = 0.0f64;
    for (ray, band) in [
        (Boundary::Upper, Band::Upper { width }),
        (Boundary::Lower, Band::Lower { width }),
    ] {
        let at = |i: i64| match ray {
            Boundary::Upper => Point::new(i, i),
            Boundary::Lower => Point::new(n0 + n + (i - n0), n0 + (i - n0)),
        };
        for i in n0..=n0 + len {
            let targets: Vec<Point> = (i..=n0 + len).map(&at).collect();
            let vals = passage_values_at(env, &[at(i)], &targets, Some(band))?;
            for (k, v) in vals.iter().enumerate() {
                let gap = k as f64 / rho;
                let dev = if *v == f64::NEG_INFINITY {
                    f64::INFINITY
                } else {
                    (v - gap).abs()
                };
                max_dev = max_dev.max(dev);
            }
        }
    }
    Ok(max_dev)
}

/// The two-sided deviation event: every restricted passage time between
/// window indices on both boundaries sits within `d N` of its mean-field
/// value `(j - i) / rho_alpha`.
pub fn event_b(
    env: &Environment,
    n0: i64,
    r: f64,
    d: f64,
    band_width: Option<i64>,
) -> Result<bool> {
    if d < 0.0 {
        return Err(Error::InvalidParameter("negative deviation threshold".into()));
    }
    let n = env.slab().map(|s| s.n).unwrap_or(0);
    Ok(event_b_max_deviation(env, n0, r, band_width)? <= d * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpp::interface_from_config;
    use crate::lpp::{config_from_interface, evolve_interface};
    use crate::tasep::Configuration;

    fn slab(n: i64, alpha: f64, beta: f64, seed: u64) -> Environment {
        Environment::new(Mode::Slab { n, alpha, beta }, seed)
    }

    #[test]
    fn boundary_hit_offsets() {
        let env = slab(4, 0.6, 0.2, 5);
        // A geodesic that starts on the lower boundary reports its own
        // starting offset.
        let g = geodesic(
            &env,
            Point::new(4, 0),
            Point::new(9, 5),
            GeodesicOptions::default(),
        )
        .unwrap();
        assert_eq!(first_boundary_hit(&g, &env, Boundary::Lower), Some(0));

        // A single upper-boundary step never leaves the upper diagonal.
        let g = geodesic(
            &env,
            Point::new(2, 2),
            Point::new(3, 2),
            GeodesicOptions::default(),
        )
        .unwrap();
        assert_eq!(first_boundary_hit(&g, &env, Boundary::Lower), None);
        assert_eq!(first_boundary_hit(&g, &env, Boundary::Upper), Some(2));
    }

    #[test]
    fn traversal_trivially_false_below_n() {
        let env = slab(6, 0.3, 0.3, 8);
        assert!(!traversing_event(&env, 5).unwrap());
    }

    #[test]
    fn traversal_positive_fraction_at_coexistence() {
        // Smoke-scale version of the experiment: some seeds traverse.
        let mut hits = 0;
        for seed in 0..40 {
            let env = slab(6, 0.3, 0.3, 3000 + seed);
            if traversing_event(&env, 36).unwrap() {
                hits += 1;
            }
        }
        assert!(hits > 0, "no traversals in 40 seeds");
    }

    #[test]
    fn semi_infinite_first_step_is_forced() {
        let env = slab(5, 0.3, 0.3, 77);
        // From the upper boundary the e2 successor leaves the slab.
        let pre = semi_infinite_prefix(&env, Point::new(1, 1), 3, None).unwrap();
        assert_eq!(pre.points[1], Point::new(2, 1));
        // From the lower boundary the e1 successor leaves the slab.
        let pre = semi_infinite_prefix(&env, Point::new(5, 0), 3, None).unwrap();
        assert_eq!(pre.points[1], Point::new(5, 1));
    }

    #[test]
    fn restricted_passage_band_rules() {
        let env = slab(4, 0.5, 0.5, 3);
        let u = Point::new(0, 0);
        let v = Point::new(7, 4);
        let full = passage_values_at(&env, &[u], &[v], None).unwrap()[0];
        // Band covering the whole strip: identical path sets, identical value.
        let same = restricted_passage(&env, Band::Upper { width: 4 }, u, v).unwrap();
        assert_eq!(full.to_bits(), same.to_bits());
        // Band narrower: never larger.
        let narrow = restricted_passage(&env, Band::Upper { width: 1 }, u, v).unwrap();
        assert!(narrow <= full);
        // Width zero between distinct diagonal points: no admissible path.
        assert!(matches!(
            restricted_passage(&env, Band::Upper { width: 0 }, u, Point::new(2, 2)),
            Err(Error::NoPath)
        ));
        // Lower band around the lower boundary.
        let lo = restricted_passage(&env, Band::Lower { width: 1 }, Point::new(4, 0), v).unwrap();
        assert!(lo <= full);
    }

    #[test]
    fn flow_counts_zero_time_and_hand_environment() {
        let env = slab(3, 0.5, 0.5, 11);
        assert_eq!(flow_counts(&env, 0.0).unwrap(), (0, 0));

        // N = 2 with pinned cells: entry times are 0.5 then 0.5 + 1.0 + w;
        // at t = 1.6 exactly one particle has entered and none exited.
        let n = 2;
        let mut pins = vec![(Point::new(0, 0), 0.5), (Point::new(1, 0), 1.0)];
        for (p, w) in [
            (Point::new(1, 1), 9.0),
            (Point::new(2, 0), 9.0),
            (Point::new(2, 1), 9.0),
            (Point::new(3, 1), 9.0),
            (Point::new(2, 2), 9.0),
        ] {
            pins.push((p, w));
        }
        let env = Environment::with_overrides(
            Mode::Slab {
                n,
                alpha: 0.5,
                beta: 0.5,
            },
            1,
            &pins,
        );
        assert_eq!(flow_counts(&env, 1.6).unwrap(), (1, 0));
        // Before the first entry completes, nothing has flowed.
        assert_eq!(flow_counts(&env, 0.4).unwrap(), (0, 0));
    }

    #[test]
    fn flow_counts_conserve_particles() {
        // M1' - M2 equals the particle count of the evolved all-empty
        // interface in the same environment, exactly.
        let mut checked = 0;
        for seed in 0..60 {
            let n = 2 + (seed % 4) as i64;
            let env = slab(n, 0.55, 0.45, 5000 + seed);
            let t = 0.3 * ((seed % 9) as f64 + 1.0);
            let g0 = interface_from_config(&Configuration::empty(n as usize), 0);
            let out = evolve_interface(&env, &g0, t, false).unwrap();
            let count = config_from_interface(&out.interface).particles() as i64;
            let (m1, m2) = flow_counts(&env, t).unwrap();
            assert_eq!(m1 as i64 - m2 as i64, count, "seed {seed} t {t}");
            checked += 1;
        }
        assert_eq!(checked, 60);
    }

    #[test]
    fn event_b_trivial_cases_and_monotonicity() {
        let env = slab(4, 0.3, 0.3, 21);
        // Window shorter than one lattice step: only i = j terms.
        assert!(event_b(&env, 0, 0.05, 0.0, Some(2)).unwrap());
        // Huge threshold dominates everything.
        assert!(event_b(&env, 0, 1.0, 1e6, Some(2)).unwrap());
        // Monotone in d at fixed r: the event thresholds one deviation
        // statistic, so it flips exactly once along the d axis.
        let dev = event_b_max_deviation(&env, 0, 1.0, Some(2)).unwrap();
        assert!(dev > 0.0);
        assert!(!event_b(&env, 0, 1.0, dev / 4.0 * 0.99, Some(2)).unwrap());
        assert!(event_b(&env, 0, 1.0, dev / 4.0 * 1.01, Some(2)).unwrap());
    }

    #[test]
    fn event_b_requires_coexistence() {
        let env = slab(4, 0.5, 0.2, 2);
        assert!(event_b(&env, 0, 1.0, 1.0, Some(2)).is_err());
    }
}
