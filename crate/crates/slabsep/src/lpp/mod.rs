//! Last-passage percolation on the slab, the half-quadrant, and the plane:
//! reproducible exponential weight fields, passage-time dynamic programming,
//! geodesics with backtracking, the growth-interface codec and its exact
//! event-driven evolution, and the geometric event detectors built on top.

mod field;
mod interface;
mod ops;

pub use field::{
    best_target, geodesic, geodesic_between, passage_field, passage_values_at, Geodesic,
    GeodesicOptions, PassageField, Window, DEFAULT_CELL_BUDGET,
};
pub use interface::{
    config_from_interface, evolve_interface, interface_from_config, EvolveResult, GrowthEvent,
    GrowthInterface, Step,
};
pub use ops::{
    event_b, event_b_max_deviation, first_boundary_hit, flow_counts, restricted_passage,
    semi_infinite_prefix, traversing_event, Boundary, SemiInfinitePrefix,
};

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Point, SlabGeometry};
use crate::rng;

/// Which weight field the environment generates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Strip `{y <= x <= y + n}`: rate-alpha weights on the upper diagonal,
    /// rate-beta on the lower, rate 1 in the bulk.
    Slab { n: i64, alpha: f64, beta: f64 },
    /// Half-quadrant `{x >= y}` with rate-alpha weights on the diagonal.
    HalfQuadrant { alpha: f64 },
    /// All of Z^2 at rate 1.
    FullPlane,
}

/// A reproducible weight field: `omega(v)` is regenerated from `(seed, v)` on
/// every query instead of being stored, so fields over millions of cells and
/// re-queries across operations are cheap and consistent.
#[derive(Debug, Clone)]
pub struct Environment {
    pub mode: Mode,
    pub seed: u64,
    overrides: Option<Arc<HashMap<Point, f64>>>,
}

impl Environment {
    pub fn new(mode: Mode, seed: u64) -> Self {
        Environment {
            mode,
            seed,
            overrides: None,
        }
    }

    /// Pins specific cells to fixed values. For deterministic fixtures in
    /// tests and worked examples; everything else still hashes.
    pub fn with_overrides(mode: Mode, seed: u64, cells: &[(Point, f64)]) -> Self {
        Environment {
            mode,
            seed,
            overrides: Some(Arc::new(cells.iter().cloned().collect())),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self.mode {
            Mode::Slab { n, .. } => p.y <= p.x && p.x <= p.y + n,
            Mode::HalfQuadrant { .. } => p.x >= p.y,
            Mode::FullPlane => true,
        }
    }

    /// Exponential rate of the weight at `p` (the rate tag, not a sample).
    pub fn rate(&self, p: Point) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfRegion { x: p.x, y: p.y });
        }
        Ok(match self.mode {
            Mode::Slab { n, alpha, beta } => {
                if p.x == p.y {
                    alpha
                } else if p.x == p.y + n {
                    beta
                } else {
                    1.0
                }
            }
            Mode::HalfQuadrant { alpha } => {
                if p.x == p.y {
                    alpha
                } else {
                    1.0
                }
            }
            Mode::FullPlane => 1.0,
        })
    }

    /// The weight at `p`; strictly positive, and a pure function of
    /// `(seed, p)` unless overridden.
    pub fn weight(&self, p: Point) -> Result<f64> {
        let rate = self.rate(p)?;
        if let Some(map) = &self.overrides {
            if let Some(w) = map.get(&p) {
                return Ok(*w);
            }
        }
        Ok(rng::exp_at(self.seed, p.x, p.y, rate))
    }

    /// Hot-path weight lookup; caller guarantees membership.
    #[inline]
    pub(crate) fn weight_unchecked(&self, p: Point) -> f64 {
        debug_assert!(self.contains(p));
        if let Some(map) = &self.overrides {
            if let Some(w) = map.get(&p) {
                return *w;
            }
        }
        let rate = match self.mode {
            Mode::Slab { n, alpha, beta } => {
                if p.x == p.y {
                    alpha
                } else if p.x == p.y + n {
                    beta
                } else {
                    1.0
                }
            }
            Mode::HalfQuadrant { alpha } => {
                if p.x == p.y {
                    alpha
                } else {
                    1.0
                }
            }
            Mode::FullPlane => 1.0,
        };
        rng::exp_at(self.seed, p.x, p.y, rate)
    }

    pub fn slab(&self) -> Option<SlabGeometry> {
        match self.mode {
            Mode::Slab { n, .. } => Some(SlabGeometry { n }),
            _ => None,
        }
    }

    /// Inclusive bounds on the diagonal coordinate `d = x - y` imposed by the
    /// region itself.
    pub(crate) fn d_bounds(&self) -> (i64, i64) {
        match self.mode {
            Mode::Slab { n, .. } => (0, n),
            Mode::HalfQuadrant { .. } => (0, field::D_UNBOUNDED),
            Mode::FullPlane => (-field::D_UNBOUNDED, field::D_UNBOUNDED),
        }
    }
}

/// Band restriction for passage times: a sub-strip hugging one side of the
/// region, in the diagonal coordinate `d = x - y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// `0 <= d <= width` (hugs the upper diagonal).
    Upper { width: i64 },
    /// `n - width <= d <= n` (hugs the lower diagonal; slab only).
    Lower { width: i64 },
}

impl Band {
    pub(crate) fn d_bounds(&self, env: &Environment) -> Result<(i64, i64)> {
        match *self {
            Band::Upper { width } => {
                if width < 0 {
                    return Err(Error::InvalidParameter("negative band width".into()));
                }
                Ok((0, width))
            }
            Band::Lower { width } => {
                let Mode::Slab { n, .. } = env.mode else {
                    return Err(Error::InvalidParameter(
                        "lower band requires slab mode".into(),
                    ));
                };
                if width < 0 {
                    return Err(Error::InvalidParameter("negative band width".into()));
                }
                Ok((n - width, n))
            }
        }
    }
}

/// Band width used by the restricted passage times when none is given:
/// `ceil(ln(n)^9)`, clamped to the slab width. At asymptotic scales this
/// pins paths near one boundary; at desk scales it usually degenerates to
/// the whole strip, which is why every caller that cares passes a width.
pub fn default_band_width(n: i64) -> i64 {
    let w = (n as f64).ln().powi(9).ceil();
    (w as i64).clamp(1, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_tags_by_region() {
        let env = Environment::new(
            Mode::Slab {
                n: 5,
                alpha: 0.7,
                beta: 0.2,
            },
            1,
        );
        assert_eq!(env.rate(Point::new(3, 3)).unwrap(), 0.7);
        assert_eq!(env.rate(Point::new(8, 3)).unwrap(), 0.2);
        assert_eq!(env.rate(Point::new(5, 3)).unwrap(), 1.0);
        assert!(matches!(
            env.rate(Point::new(9, 3)),
            Err(Error::OutOfRegion { .. })
        ));

        let h = Environment::new(Mode::HalfQuadrant { alpha: 0.25 }, 1);
        assert_eq!(h.rate(Point::new(4, 4)).unwrap(), 0.25);
        assert_eq!(h.rate(Point::new(5, 4)).unwrap(), 1.0);
        assert!(h.rate(Point::new(3, 4)).is_err());
    }

    #[test]
    fn weights_repeat_and_have_unit_mean_in_bulk() {
        let env = Environment::new(
            Mode::Slab {
                n: 64,
                alpha: 0.5,
                beta: 0.5,
            },
            42,
        );
        let v = Point::new(10, 3);
        assert_eq!(
            env.weight(v).unwrap().to_bits(),
            env.weight(v).unwrap().to_bits()
        );

        let n = 100_000;
        let mut sum = 0.0;
        for i in 0..n {
            // march down the bulk of the strip
            let p = Point::new(i + 7, i);
            sum += env.weight(p).unwrap();
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn overrides_pin_cells() {
        let env = Environment::with_overrides(
            Mode::FullPlane,
            3,
            &[(Point::new(0, 0), 1.0), (Point::new(1, 0), 2.0)],
        );
        assert_eq!(env.weight(Point::new(0, 0)).unwrap(), 1.0);
        assert_eq!(env.weight(Point::new(1, 0)).unwrap(), 2.0);
        assert!(env.weight(Point::new(5, 5)).unwrap() > 0.0);
    }

    #[test]
    fn default_band_clamps_to_strip() {
        assert_eq!(default_band_width(16), 16);
        assert!(default_band_width(1_000_000) < 1_000_000);
        assert!(default_band_width(2) >= 1);
    }
}
