//! Boundary parameters, derived constants, phase classification, and the
//! geometry of the slab the last-passage representation lives on.
//!
//! Everything here is pure arithmetic over immutable inputs and safe to call
//! from any number of workers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entry rate `alpha` at site 1 and exit rate `beta` at site N, both in (0, 1].
///
/// Rates above 1 would make the derived ratios `a = (1-alpha)/alpha` and
/// `b = (1-beta)/beta` negative, so they are rejected up front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BoundaryParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidRate {
                name: "alpha",
                value: alpha,
            });
        }
        if !(beta > 0.0 && beta <= 1.0) || !beta.is_finite() {
            return Err(Error::InvalidRate {
                name: "beta",
                value: beta,
            });
        }
        Ok(BoundaryParams { alpha, beta })
    }
}

/// The five regions of the phase diagram in the (alpha, beta) unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    HighDensity,
    LowDensity,
    MaxCurrent,
    CoexistenceLine,
    TriplePoint,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::HighDensity => "high-density",
            Phase::LowDensity => "low-density",
            Phase::MaxCurrent => "max-current",
            Phase::CoexistenceLine => "coexistence-line",
            Phase::TriplePoint => "triple-point",
        }
    }
}

/// Classifies (alpha, beta). The five predicates partition (0, 1]^2:
/// high density iff `beta < min(alpha, 1/2)`, low density iff
/// `alpha < min(beta, 1/2)`, the coexistence line iff `alpha = beta < 1/2`,
/// the triple point at `alpha = beta = 1/2`, and maximal current on the rest
/// (`alpha, beta >= 1/2`, excluding the triple point).
pub fn classify_phase(alpha: f64, beta: f64) -> Result<Phase> {
    let p = BoundaryParams::new(alpha, beta)?;
    Ok(classify(&p))
}

fn classify(p: &BoundaryParams) -> Phase {
    let (a, b) = (p.alpha, p.beta);
    if b < a.min(0.5) {
        Phase::HighDensity
    } else if a < b.min(0.5) {
        Phase::LowDensity
    } else if a == b && a < 0.5 {
        Phase::CoexistenceLine
    } else if a == 0.5 && b == 0.5 {
        Phase::TriplePoint
    } else {
        Phase::MaxCurrent
    }
}

/// Every derived constant used downstream. Fields that are only defined in a
/// particular phase (`sigma2` needs `alpha < 1/2`; `x_star` and `c_high` need
/// high density; `c_low` needs low density) are `None` elsewhere rather than
/// a sentinel number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub alpha: f64,
    pub beta: f64,
    /// (1 - alpha) / alpha
    pub a: f64,
    /// (1 - beta) / beta
    pub b: f64,
    /// max(1, a)
    pub a_hat: f64,
    /// max(1, b)
    pub b_hat: f64,
    /// alpha (1 - alpha)
    pub rho_alpha: f64,
    /// beta (1 - beta)
    pub rho_beta: f64,
    /// (1 - 2 alpha) / (alpha^2 (1 - alpha)^2), the limiting variance scale of
    /// boundary-pinned half-quadrant passage times; defined for alpha < 1/2.
    pub sigma2: Option<f64>,
    /// a_hat (b+1)(b-1) / ((b - a_hat)(a_hat b - 1)), the geodesic-span
    /// constant of the high density phase.
    pub x_star: Option<f64>,
    pub phase: Phase,
    /// High-density mixing constant: lim t_mix / N.
    pub c_high: Option<f64>,
    /// Low-density mixing constant: lim t_mix / N.
    pub c_low: Option<f64>,
    // The clamped rates min(alpha, 1/2) / min(beta, 1/2) also appear in the
    // closed forms; they are carried for the identity checks but are not part
    // of the serialized report schema.
    #[serde(skip)]
    pub alpha_hat_half: f64,
    #[serde(skip)]
    pub beta_hat_half: f64,
}

/// Computes every derived constant for valid boundary rates.
pub fn derive(params: BoundaryParams) -> DerivedParams {
    let alpha = params.alpha;
    let beta = params.beta;
    let a = (1.0 - alpha) / alpha;
    let b = (1.0 - beta) / beta;
    let a_hat = a.max(1.0);
    let b_hat = b.max(1.0);
    let rho_alpha = alpha * (1.0 - alpha);
    let rho_beta = beta * (1.0 - beta);
    let alpha_hat_half = alpha.min(0.5);
    let beta_hat_half = beta.min(0.5);
    let phase = classify(&params);

    let sigma2 = (alpha < 0.5)
        .then(|| (1.0 - 2.0 * alpha) / (alpha * alpha * (1.0 - alpha) * (1.0 - alpha)));

    let (x_star, c_high) = if phase == Phase::HighDensity {
        let xs = a_hat * (b + 1.0) * (b - 1.0) / ((b - a_hat) * (a_hat * b - 1.0));
        let ch = (a_hat + 1.0) * (a_hat + 1.0) * (b + 1.0) * (b - 1.0)
            / ((a_hat * b - 1.0) * (b - a_hat));
        (Some(xs), Some(ch))
    } else {
        (None, None)
    };
    let c_low = (phase == Phase::LowDensity).then(|| {
        (b_hat + 1.0) * (b_hat + 1.0) * (a + 1.0) * (a - 1.0) / ((a * b_hat - 1.0) * (a - b_hat))
    });

    DerivedParams {
        alpha,
        beta,
        a,
        b,
        a_hat,
        b_hat,
        rho_alpha,
        rho_beta,
        sigma2,
        x_star,
        phase,
        c_high,
        c_low,
        alpha_hat_half,
        beta_hat_half,
    }
}

impl DerivedParams {
    /// Second closed form of the high-density mixing constant,
    /// `(1 - 2 beta) / ((1 - alpha_hat - beta)(alpha_hat - beta))` with
    /// `alpha_hat = min(alpha, 1/2)`. Agrees with `c_high` to rounding.
    pub fn c_high_density_form(&self) -> Option<f64> {
        (self.phase == Phase::HighDensity).then(|| {
            (1.0 - 2.0 * self.beta)
                / ((1.0 - self.alpha_hat_half - self.beta) * (self.alpha_hat_half - self.beta))
        })
    }

    /// Second closed form of the low-density constant.
    pub fn c_low_density_form(&self) -> Option<f64> {
        (self.phase == Phase::LowDensity).then(|| {
            (1.0 - 2.0 * self.alpha)
                / ((1.0 - self.beta_hat_half - self.alpha) * (self.beta_hat_half - self.alpha))
        })
    }
}

/// A lattice point of the slab (or of the half-quadrant / plane).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Point { x, y }
    }

    /// Componentwise partial order: `self` can reach `other` by up-right steps.
    pub fn le(&self, other: &Point) -> bool {
        self.x <= other.x && self.y <= other.y
    }

    /// Anti-diagonal level x + y; up-right steps increase it by one.
    pub fn level(&self) -> i64 {
        self.x + self.y
    }
}

pub const E1: Point = Point::new(1, 0);
pub const E2: Point = Point::new(0, 1);

/// Floor with a snap to the nearest integer when within 1e-9 of it, so a
/// mathematically integral quotient computed with rounding error does not
/// land one lattice step off.
fn floor_snapped(a: f64) -> i64 {
    let r = a.round();
    if (a - r).abs() < 1e-9 {
        r as i64
    } else {
        a.floor() as i64
    }
}

/// The slab of width `n`: `{(x, y) : y <= x <= y + n}`, with upper boundary
/// `{(x, x)}` (entry weights) and lower boundary `{(x + n, x)}` (exit weights).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlabGeometry {
    pub n: i64,
}

impl SlabGeometry {
    pub fn new(n: i64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter(format!(
                "slab width must be at least 1, got {n}"
            )));
        }
        Ok(SlabGeometry { n })
    }

    pub fn contains(&self, p: Point) -> bool {
        p.y <= p.x && p.x <= p.y + self.n
    }

    pub fn on_boundary1(&self, p: Point) -> bool {
        p.x == p.y
    }

    pub fn on_boundary2(&self, p: Point) -> bool {
        p.x == p.y + self.n
    }

    /// `p_x = (floor(x), floor(x))` on the upper boundary.
    pub fn p(&self, x: f64) -> Point {
        let fx = x.floor() as i64;
        Point::new(fx, fx)
    }

    /// `q_x = (floor(x + N/2), ceil(x - N/2))`. Lands on the lower boundary
    /// whenever `x + N/2` is an integer (always for even N; half-odd `x`
    /// for odd N).
    pub fn q(&self, x: f64) -> Point {
        let half = self.n as f64 / 2.0;
        Point::new((x + half).floor() as i64, (x - half).ceil() as i64)
    }

    /// Offset `z` such that the lower-boundary point `(z + N, z)` is
    /// `q_{z + N/2}`; inverse of `q` on the boundary.
    pub fn q_offset(&self, p: Point) -> Option<i64> {
        self.on_boundary2(p).then_some(p.y)
    }

    /// The line segment `L_x`: points `(x + y, x - ceil(b y))` for integer
    /// `y` in `0..=floor(N / (b+1))`, running from `p_x` on the upper
    /// boundary toward the lower one with slope `-b`, staying inside the
    /// slab. The terminal point `q_{x + ((1+b)^{-1} - 1/2) N}` is appended
    /// when the integer sampling does not already produce it, so both
    /// endpoints named in the construction are always present. Ordered by
    /// non-decreasing first coordinate.
    pub fn line_segment(&self, x: i64, b: f64) -> Vec<Point> {
        let y_max = floor_snapped(self.n as f64 / (b + 1.0));
        let mut points: Vec<Point> = (0..=y_max)
            .map(|y| Point::new(x + y, x - (b * y as f64).ceil() as i64))
            .collect();
        // q_{x + ((1+b)^{-1} - 1/2) N} = (x + floor(N/(1+b)), x - floor(Nb/(1+b)))
        // in exact arithmetic; keeping the first coordinate symbolic avoids
        // floor flips at representable-boundary values of b.
        let tail = Point::new(
            x + y_max,
            x - floor_snapped(self.n as f64 * b / (1.0 + b)),
        );
        if *points.last().expect("y = 0 always present") != tail {
            points.push(tail);
        }
        points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn rejects_rates_outside_unit_interval() {
        assert!(BoundaryParams::new(0.0, 0.5).is_err());
        assert!(BoundaryParams::new(0.5, 1.2).is_err());
        assert!(BoundaryParams::new(-0.1, 0.5).is_err());
        assert!(BoundaryParams::new(f64::NAN, 0.5).is_err());
        assert!(BoundaryParams::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn derive_high_density_example() {
        // alpha = 0.6, beta = 0.2: b = 4, a = 2/3, a_hat = 1, rho_beta = 0.16,
        // x_star = 5/3 and c_high = 20/3.
        let d = derive(BoundaryParams::new(0.6, 0.2).unwrap());
        assert!(close(d.b, 4.0, 1e-14));
        assert!(close(d.a, 2.0 / 3.0, 1e-14));
        assert_eq!(d.a_hat, 1.0);
        assert!(close(d.rho_beta, 0.16, 1e-14));
        assert!(close(d.x_star.unwrap(), 5.0 / 3.0, 1e-14));
        assert!(close(d.c_high.unwrap(), 20.0 / 3.0, 1e-14));
        assert_eq!(d.phase, Phase::HighDensity);
        assert!(d.c_low.is_none());
    }

    #[test]
    fn derive_triple_point_and_sigma2() {
        let d = derive(BoundaryParams::new(0.5, 0.5).unwrap());
        assert_eq!(d.phase, Phase::TriplePoint);
        assert!(close(d.rho_alpha, 0.25, 1e-15));
        assert!(close(d.rho_beta, 0.25, 1e-15));
        assert!(d.sigma2.is_none(), "sigma2 must be absent at alpha = 1/2");
        assert!(d.x_star.is_none() && d.c_high.is_none() && d.c_low.is_none());

        let d = derive(BoundaryParams::new(0.25, 0.25).unwrap());
        assert!(close(d.sigma2.unwrap(), 0.5 / (0.0625 * 0.5625), 1e-13));
        assert!(close(d.sigma2.unwrap(), 14.222222222222221, 1e-12));
    }

    #[test]
    fn phase_examples() {
        assert_eq!(classify_phase(0.6, 0.2).unwrap(), Phase::HighDensity);
        assert_eq!(classify_phase(0.2, 0.6).unwrap(), Phase::LowDensity);
        assert_eq!(classify_phase(0.3, 0.3).unwrap(), Phase::CoexistenceLine);
        assert_eq!(classify_phase(0.5, 0.5).unwrap(), Phase::TriplePoint);
        assert_eq!(classify_phase(0.7, 0.5).unwrap(), Phase::MaxCurrent);
        assert_eq!(classify_phase(0.5, 0.7).unwrap(), Phase::MaxCurrent);
    }

    #[test]
    fn phases_partition_a_dense_grid() {
        // Exactly one predicate fires everywhere on a grid that includes the
        // boundaries alpha = beta and alpha, beta = 1/2.
        let mut grid: Vec<f64> = (1..=40).map(|i| i as f64 / 40.0).collect();
        grid.push(0.5);
        for &a in &grid {
            for &b in &grid {
                let phase = classify_phase(a, b).unwrap();
                let preds = [
                    b < a.min(0.5),
                    a < b.min(0.5),
                    a >= 0.5 && b >= 0.5 && !(a == 0.5 && b == 0.5),
                    a == b && a < 0.5,
                    a == 0.5 && b == 0.5,
                ];
                assert_eq!(preds.iter().filter(|p| **p).count(), 1, "a={a} b={b}");
                let expect = match preds.iter().position(|p| *p).unwrap() {
                    0 => Phase::HighDensity,
                    1 => Phase::LowDensity,
                    2 => Phase::MaxCurrent,
                    3 => Phase::CoexistenceLine,
                    _ => Phase::TriplePoint,
                };
                assert_eq!(phase, expect);
            }
        }
    }

    #[test]
    fn c_high_closed_forms_agree_with_span_constant() {
        // 1000 grid points in the high density region.
        let mut checked = 0;
        for i in 1..=50 {
            for j in 1..=49 {
                let alpha = i as f64 / 50.0;
                let beta = j as f64 / 100.0;
                if !(beta < alpha.min(0.5)) {
                    continue;
                }
                let d = derive(BoundaryParams::new(alpha, beta).unwrap());
                let c1 = d.c_high.unwrap();
                let c2 = d.c_high_density_form().unwrap();
                let c3 = (d.a_hat + 1.0).powi(2) / d.a_hat * d.x_star.unwrap();
                assert!(close(c1, c2, 1e-12), "alpha={alpha} beta={beta}: {c1} vs {c2}");
                assert!(close(c1, c3, 1e-12), "alpha={alpha} beta={beta}: {c1} vs {c3}");
                checked += 1;
            }
        }
        assert!(checked >= 1000, "only {checked} high-density grid points");
    }

    #[test]
    fn particle_hole_duality_swaps_derived_fields() {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        for &a in &grid {
            for &b in &grid {
                let d = derive(BoundaryParams::new(a, b).unwrap());
                let s = derive(BoundaryParams::new(b, a).unwrap());
                assert_eq!(d.a.to_bits(), s.b.to_bits());
                assert_eq!(d.a_hat.to_bits(), s.b_hat.to_bits());
                assert_eq!(d.rho_alpha.to_bits(), s.rho_beta.to_bits());
                match (d.phase, s.phase) {
                    (Phase::HighDensity, Phase::LowDensity)
                    | (Phase::LowDensity, Phase::HighDensity) => {}
                    (x, y) => assert_eq!(x, y, "a={a} b={b}"),
                }
                if d.phase == Phase::HighDensity {
                    let ch = d.c_high.unwrap();
                    let cl = s.c_low.unwrap();
                    assert!(close(ch, cl, 1e-12));
                }
            }
        }
    }

    #[test]
    fn slab_point_constructors() {
        let g = SlabGeometry::new(4).unwrap();
        assert_eq!(g.p(0.0), Point::new(0, 0));
        assert_eq!(g.q(0.0), Point::new(2, -2));
        let g = SlabGeometry::new(3).unwrap();
        assert_eq!(g.q(-1.5), Point::new(0, -3));
        assert!(g.on_boundary2(g.q(-1.5)));
        // q_{-N/2} = (0, -N) for either parity.
        for n in 1..=8 {
            let g = SlabGeometry::new(n).unwrap();
            assert_eq!(g.q(-(n as f64) / 2.0), Point::new(0, -n));
        }
    }

    #[test]
    fn line_segment_example_and_membership() {
        let g = SlabGeometry::new(8).unwrap();
        let line = g.line_segment(0, 3.0);
        assert_eq!(
            line,
            vec![Point::new(0, 0), Point::new(1, -3), Point::new(2, -6)]
        );
        // Last point is q_{x + ((1+b)^{-1} - 1/2) N} = q_{-2}.
        assert_eq!(*line.last().unwrap(), g.q(-2.0));

        // Ordered by first coordinate, every point inside the slab, and the
        // advertised endpoints present, across a parameter sweep. The tail
        // check uses exact integer arithmetic on rational b to sidestep
        // float-boundary floor flips.
        for n in 1..=40i64 {
            let g = SlabGeometry::new(n).unwrap();
            for b10 in 11..=60i64 {
                let b = b10 as f64 / 10.0;
                for x in [-7i64, 0, 13] {
                    let line = g.line_segment(x, b);
                    assert_eq!(line[0], g.p(x as f64));
                    // Exact tail: (x + floor(10N/(10+b10)), x - floor(N b10/(10+b10))).
                    let tail = Point::new(
                        x + 10 * n / (10 + b10),
                        x - n * b10 / (10 + b10),
                    );
                    assert_eq!(*line.last().unwrap(), tail, "n={n} b={b} x={x}");
                    for w in line.windows(2) {
                        assert!(w[0].x <= w[1].x, "n={n} b={b} x={x}");
                        assert!(w[0] != w[1]);
                    }
                    for p in &line {
                        assert!(g.contains(*p), "n={n} b={b} x={x} point {p:?}");
                    }
                }
            }
        }
    }
}
