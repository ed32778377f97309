//! The concrete dynamical systems, their phase-space metrics, and orbit
//! iteration.
//!
//! Four systems are supported:
//!
//! * `Henon { a, b }` — the quadratic planar map `(x, y) -> (1 - a x^2 + y, b x)`;
//! * `IntermittentCircle { gamma, d }` — a degree-`d` circle map with a
//!   neutral fixed point at 0, `f(x) = x (1 + (d x)^gamma)` on `[0, 1/d)`
//!   and full affine branches `f(x) = d x - j` on `[j/d, (j+1)/d)`;
//! * `IntermittentSolenoid { gamma, d }` — the skew product over the same
//!   circle map with disk fibers contracted by 1/10 and driven by
//!   `(cos, sin)` of the base angle with amplitude 1/2;
//! * `Doubling` — `x -> 2x mod 1` on the unit interval, the exactly solvable
//!   reference system.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Hard cap on `iterate`; guards against runaway orbit lengths in configs.
pub const MAX_ITERATIONS: u64 = 1 << 40;

/// A planar orbit whose |x| exceeds this is declared escaped.
pub const ESCAPE_RADIUS: f64 = 1e6;

/// Caveat attached to every report derived from Henon data. The exponential
/// mixing results for this family hold on a positive-measure parameter set
/// with no checkable membership test, so all Henon output is empirical.
pub const HENON_EMPIRICAL_CAVEAT: &str =
    "empirical: Henon parameters not verified to lie in the exponentially mixing set";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec<R> {
    Henon { a: R, b: R },
    IntermittentCircle { gamma: R, d: u32 },
    IntermittentSolenoid { gamma: R, d: u32 },
    Doubling,
}

impl<R: Real> SystemSpec<R> {
    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Henon { .. } => "henon",
            SystemSpec::IntermittentCircle { .. } => "intermittent_circle",
            SystemSpec::IntermittentSolenoid { .. } => "intermittent_solenoid",
            SystemSpec::Doubling => "doubling",
        }
    }

    /// Phase-space dimension (1, 2, or 3).
    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::Henon { .. } => 2,
            SystemSpec::IntermittentSolenoid { .. } => 3,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SystemSpec::Henon { a, b } => {
                if !a.is_finite() || !b.is_finite() || b == R::zero() {
                    return Err(Error::InvalidParameter(format!(
                        "henon requires finite a and b != 0, got a={a}, b={b}"
                    )));
                }
            }
            SystemSpec::IntermittentCircle { gamma, d }
            | SystemSpec::IntermittentSolenoid { gamma, d } => {
                if gamma <= R::zero() || gamma >= R::one() {
                    return Err(Error::InvalidParameter(format!(
                        "intermittency exponent must satisfy 0 < gamma < 1, got {gamma}"
                    )));
                }
                if d < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "circle map degree must be >= 2, got {d}"
                    )));
                }
            }
            SystemSpec::Doubling => {}
        }
        Ok(())
    }

    /// True for systems whose base coordinate lives on the circle/interval.
    pub fn is_circle_type(&self) -> bool {
        matches!(
            self,
            SystemSpec::IntermittentCircle { .. }
                | SystemSpec::IntermittentSolenoid { .. }
                | SystemSpec::Doubling
        )
    }

    /// Diameter of the phase space under `distance`. For the unbounded Henon
    /// plane this is the diameter of the standard seeding box.
    pub fn space_diameter(&self) -> R {
        match self {
            SystemSpec::Henon { .. } => {
                let b = default_seed_box::<R>();
                let dx = b.x.1 - b.x.0;
                let dy = b.y.1 - b.y.0;
                (dx * dx + dy * dy).sqrt()
            }
            // Arc metric on the circle.
            SystemSpec::IntermittentCircle { .. } => R::of(0.5),
            // Max of arc diameter (1/2) and fiber diameter (2).
            SystemSpec::IntermittentSolenoid { .. } => R::of(2.0),
            // The doubling map is kept on the plain interval so that the
            // sawtooth observable is uniformly continuous.
            SystemSpec::Doubling => R::one(),
        }
    }

    pub fn empirical_caveat(&self) -> Option<&'static str> {
        match self {
            SystemSpec::Henon { .. } => Some(HENON_EMPIRICAL_CAVEAT),
            _ => None,
        }
    }
}

/// A phase-space point. Serialized as a bare number (1D) or an array (2D/3D).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point<R> {
    Interval(R),
    Plane(R, R),
    Solenoid(R, R, R),
}

impl<R: Real> Point<R> {
    pub fn dim(&self) -> usize {
        match self {
            Point::Interval(_) => 1,
            Point::Plane(_, _) => 2,
            Point::Solenoid(_, _, _) => 3,
        }
    }

    /// Base (first) coordinate.
    pub fn x(&self) -> R {
        match *self {
            Point::Interval(x) => x,
            Point::Plane(x, _) => x,
            Point::Solenoid(x, _, _) => x,
        }
    }
}

fn dim_error<R: Real, T>(system: &SystemSpec<R>, p: &Point<R>) -> Result<T> {
    Err(Error::DimensionMismatch {
        expected: system.name(),
        expected_dim: system.dim(),
        got: p.dim(),
    })
}

/// Reduce into [0, 1) by subtracting the floor; the `>= 1` guard absorbs the
/// rounding case where `x - floor(x)` lands exactly on 1.
pub fn wrap_unit<R: Real>(x: R) -> R {
    let y = x - x.floor();
    if y >= R::one() {
        R::zero()
    } else {
        y
    }
}

/// Arc distance on the circle of circumference 1.
pub fn arc_distance<R: Real>(x: R, y: R) -> R {
    let d = (x - y).abs();
    d.min(R::one() - d)
}

/// One branch step of the degree-`d` intermittent circle map.
///
/// The neutral branch is evaluated as `x + x * (d x)^gamma`, which has no
/// cancellation near the fixed point.
fn circle_map<R: Real>(gamma: R, d: u32, x: R) -> R {
    let dr = R::of_usize(d as usize);
    if x * dr < R::one() {
        wrap_unit(x + x * (dr * x).powf(gamma))
    } else {
        wrap_unit(dr * x)
    }
}

/// One application of the map.
pub fn step<R: Real>(system: &SystemSpec<R>, p: &Point<R>) -> Result<Point<R>> {
    match (*system, *p) {
        (SystemSpec::Henon { a, b }, Point::Plane(x, y)) => {
            Ok(Point::Plane(R::one() - a * x * x + y, b * x))
        }
        (SystemSpec::IntermittentCircle { gamma, d }, Point::Interval(x)) => {
            Ok(Point::Interval(circle_map(gamma, d, x)))
        }
        (SystemSpec::Doubling, Point::Interval(x)) => {
            Ok(Point::Interval(wrap_unit(x + x)))
        }
        (SystemSpec::IntermittentSolenoid { gamma, d }, Point::Solenoid(x, y, z)) => {
            // Angle 2*pi*x for the fiber drive; the base coordinate is kept
            // in [0, 1).
            let angle = R::of(2.0) * R::PI() * x;
            let tenth = R::of(0.1);
            let half = R::of(0.5);
            Ok(Point::Solenoid(
                circle_map(gamma, d, x),
                tenth * y + half * angle.cos(),
                tenth * z + half * angle.sin(),
            ))
        }
        _ => dim_error(system, p),
    }
}

/// n-fold composition of `step`; `iterate(s, p, 0) = p`.
pub fn iterate<R: Real>(system: &SystemSpec<R>, p: &Point<R>, n: u64) -> Result<Point<R>> {
    if n > MAX_ITERATIONS {
        return Err(Error::IterationBudget(n, MAX_ITERATIONS));
    }
    let mut q = *p;
    for _ in 0..n {
        q = step(system, &q)?;
    }
    Ok(q)
}

/// Derivative of the base circle map. Defined for the intermittent circle
/// map and for the doubling map (constant 2), which serves as the affine
/// oracle in the tower tests.
pub fn base_derivative<R: Real>(system: &SystemSpec<R>, x: R) -> Result<R> {
    match *system {
        SystemSpec::IntermittentCircle { gamma, d }
        | SystemSpec::IntermittentSolenoid { gamma, d } => {
            let dr = R::of_usize(d as usize);
            if x * dr < R::one() {
                Ok(R::one() + (gamma + R::one()) * (dr * x).powf(gamma))
            } else {
                Ok(dr)
            }
        }
        SystemSpec::Doubling => Ok(R::of(2.0)),
        _ => Err(Error::WrongSystem {
            required: "circle-type",
            got: system.name(),
        }),
    }
}

/// Metric on the phase space: Euclidean on the plane, arc distance on the
/// circle, plain |x - y| on the doubling interval, and the product
/// max(arc, fiber Euclidean) on the solenoid.
pub fn distance<R: Real>(system: &SystemSpec<R>, p: &Point<R>, q: &Point<R>) -> Result<R> {
    match (*system, *p, *q) {
        (SystemSpec::Henon { .. }, Point::Plane(x1, y1), Point::Plane(x2, y2)) => {
            let dx = x1 - x2;
            let dy = y1 - y2;
            Ok((dx * dx + dy * dy).sqrt())
        }
        (SystemSpec::IntermittentCircle { .. }, Point::Interval(x), Point::Interval(y)) => {
            Ok(arc_distance(x, y))
        }
        (SystemSpec::Doubling, Point::Interval(x), Point::Interval(y)) => Ok((x - y).abs()),
        (
            SystemSpec::IntermittentSolenoid { .. },
            Point::Solenoid(x1, y1, z1),
            Point::Solenoid(x2, y2, z2),
        ) => {
            let dy = y1 - y2;
            let dz = z1 - z2;
            let fiber = (dy * dy + dz * dz).sqrt();
            Ok(arc_distance(x1, x2).max(fiber))
        }
        _ => {
            if p.dim() != system.dim() {
                dim_error(system, p)
            } else {
                dim_error(system, q)
            }
        }
    }
}

/// Axis-aligned box in the plane used to seed Henon ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedBox<R> {
    pub x: (R, R),
    pub y: (R, R),
}

impl<R: Real> SeedBox<R> {
    pub fn contains(&self, p: &Point<R>) -> bool {
        match *p {
            Point::Plane(x, y) => x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1,
            _ => false,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Point<R> {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        Point::Plane(
            self.x.0 + (self.x.1 - self.x.0) * R::of(u),
            self.y.0 + (self.y.1 - self.y.0) * R::of(v),
        )
    }
}

/// The standard seeding box for the classical parameter region.
pub fn default_seed_box<R: Real>() -> SeedBox<R> {
    SeedBox {
        x: (R::of(-1.8), R::of(1.8)),
        y: (R::of(-0.6), R::of(0.6)),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrapOptions {
    /// Test seeds drawn per candidate box.
    pub seeds: usize,
    /// Steps each test seed is iterated.
    pub horizon: u64,
    /// Acceptable fraction of escaping seeds. A sizable part of the standard
    /// box lies outside the basin of attraction, so this is deliberately not
    /// zero; escapees are excluded (and counted) during ensemble sampling.
    pub max_escape_fraction: f64,
}

impl Default for TrapOptions {
    fn default() -> Self {
        TrapOptions {
            seeds: 2000,
            horizon: 2000,
            max_escape_fraction: 0.5,
        }
    }
}

fn escape_fraction<R: Real>(
    system: &SystemSpec<R>,
    b: &SeedBox<R>,
    opts: &TrapOptions,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut escaped = 0usize;
    let radius = R::of(ESCAPE_RADIUS);
    for _ in 0..opts.seeds {
        let mut p = b.sample(rng);
        for _ in 0..opts.horizon {
            p = match step(system, &p) {
                Ok(q) => q,
                Err(_) => break,
            };
            if p.x().abs() > radius {
                escaped += 1;
                break;
            }
        }
    }
    escaped as f64 / opts.seeds as f64
}

/// Find a seeding box for a Henon ensemble. Candidate boxes are checked
/// empirically: uniform seeds must stay bounded over the horizon except for
/// at most `max_escape_fraction` of them.
pub fn trapping_region<R: Real>(
    system: &SystemSpec<R>,
    opts: &TrapOptions,
    seed: u64,
) -> Result<SeedBox<R>> {
    let (a, b) = match *system {
        SystemSpec::Henon { a, b } => (a, b),
        _ => {
            return Err(Error::WrongSystem {
                required: "henon",
                got: system.name(),
            })
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if a == R::zero() {
        // Affine system: unique fixed point at (1/(1-b), b/(1-b)).
        if b.abs() >= R::one() {
            return Err(Error::EscapeRate {
                fraction: 1.0,
                limit: opts.max_escape_fraction,
            });
        }
        let fx = R::one() / (R::one() - b);
        let fy = b * fx;
        let one = R::one();
        let bx = SeedBox {
            x: (fx - one, fx + one),
            y: (fy - one, fy + one),
        };
        let frac = escape_fraction(system, &bx, opts, &mut rng);
        if frac <= opts.max_escape_fraction {
            return Ok(bx);
        }
        return Err(Error::EscapeRate {
            fraction: frac,
            limit: opts.max_escape_fraction,
        });
    }

    let base = default_seed_box::<R>();
    let mut best = 1.0f64;
    for scale in [1.0, 0.75, 0.5, 0.35, 1.25] {
        let s = R::of(scale);
        let candidate = SeedBox {
            x: (base.x.0 * s, base.x.1 * s),
            y: (base.y.0 * s, base.y.1 * s),
        };
        let frac = escape_fraction(system, &candidate, opts, &mut rng);
        if frac <= opts.max_escape_fraction {
            return Ok(candidate);
        }
        best = best.min(frac);
    }
    Err(Error::EscapeRate {
        fraction: best,
        limit: opts.max_escape_fraction,
    })
}

/// All preimages of `y` under the base circle map, one per branch where a
/// preimage exists. Only defined for circle-type base maps.
pub fn preimages<R: Real>(system: &SystemSpec<R>, y: R) -> Result<Vec<R>> {
    let (gamma, d): (Option<R>, u32) = match *system {
        SystemSpec::IntermittentCircle { gamma, d } => (Some(gamma), d),
        SystemSpec::Doubling => (None, 2),
        _ => {
            return Err(Error::WrongSystem {
                required: "circle-type",
                got: system.name(),
            })
        }
    };
    let dr = R::of_usize(d as usize);
    let mut out = Vec::new();
    // Neutral (or first affine) branch [0, 1/d): image is [0, f(1/d^-)).
    match gamma {
        None => {
            // Doubling: first branch is affine with image [0, 1).
            out.push(y / dr);
        }
        Some(g) => {
            let upper = {
                // Image of the neutral branch approaches 2/d from below.
                R::of(2.0) / dr
            };
            if y < upper {
                out.push(invert_monotone(
                    |x| x + x * (dr * x).powf(g),
                    y,
                    R::zero(),
                    R::one() / dr,
                ));
            }
        }
    }
    // Affine branches j = 1..d-1: x = (y + j)/d.
    for j in 1..d {
        out.push((y + R::of_usize(j as usize)) / dr);
    }
    Ok(out)
}

/// Bisection inverse of a strictly increasing map on [lo, hi]. Runs until the
/// bracket cannot shrink, i.e. to one ulp.
pub(crate) fn invert_monotone<R: Real>(f: impl Fn(R) -> R, y: R, lo: R, hi: R) -> R {
    let mut lo = lo;
    let mut hi = hi;
    loop {
        let mid = (lo + hi) * R::of(0.5);
        if mid <= lo || mid >= hi {
            return mid.max(lo).min(hi);
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
