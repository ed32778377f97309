//! Observables with prescribed modulus-of-continuity classes, and the
//! empirical modulus estimator.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::systems::{default_seed_box, distance, wrap_unit, Point, SystemSpec};

/// Modulus-of-continuity class R(eps), nondecreasing with R(eps) -> 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ModulusClass<R> {
    /// R(eps) = eps^alpha, alpha in (0, 1].
    Hoelder { alpha: R },
    /// R(eps) = exp(-|ln eps|^alpha), alpha in (0, 1).
    ExpLogPower { alpha: R },
    /// R(eps) = |ln eps|^(-alpha), alpha > 0.
    LogPoly { alpha: R },
    /// R(eps) = l * eps.
    Lipschitz { l: R },
}

impl<R: Real> ModulusClass<R> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            ModulusClass::Hoelder { alpha } => {
                if alpha <= R::zero() || alpha > R::one() {
                    return bad(format!("Hoelder exponent must be in (0, 1], got {alpha}"));
                }
            }
            ModulusClass::ExpLogPower { alpha } => {
                if alpha <= R::zero() || alpha >= R::one() {
                    return bad(format!("ExpLogPower exponent must be in (0, 1), got {alpha}"));
                }
            }
            ModulusClass::LogPoly { alpha } => {
                if alpha <= R::zero() {
                    return bad(format!("LogPoly exponent must be positive, got {alpha}"));
                }
            }
            ModulusClass::Lipschitz { l } => {
                if l <= R::zero() {
                    return bad(format!("Lipschitz constant must be positive, got {l}"));
                }
            }
        }
        Ok(())
    }

    /// True for classes whose formula involves |ln eps| and therefore
    /// requires eps < 1.
    pub fn is_log_based(&self) -> bool {
        matches!(
            self,
            ModulusClass::ExpLogPower { .. } | ModulusClass::LogPoly { .. }
        )
    }

    /// The analytic value R(eps).
    pub fn bound(&self, eps: R) -> Result<R> {
        if eps <= R::zero() {
            return Err(Error::InvalidParameter(format!(
                "modulus argument must be positive, got {eps}"
            )));
        }
        if self.is_log_based() && eps >= R::one() {
            return Err(Error::InvalidParameter(format!(
                "log-based modulus needs eps < 1, got {eps}"
            )));
        }
        Ok(match *self {
            ModulusClass::Hoelder { alpha } => eps.powf(alpha),
            ModulusClass::ExpLogPower { alpha } => (-eps.ln().abs().powf(alpha)).exp(),
            ModulusClass::LogPoly { alpha } => eps.ln().abs().powf(-alpha),
            ModulusClass::Lipschitz { l } => l * eps,
        })
    }
}

/// Modulus of a pair of observables: the pointwise max of the two moduli.
pub fn combined_modulus_bound<R: Real>(
    a: &ModulusClass<R>,
    b: &ModulusClass<R>,
    eps: R,
) -> Result<R> {
    Ok(a.bound(eps)?.max(b.bound(eps)?))
}

/// Regularity declared for an observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeclaredClass<R> {
    Class(ModulusClass<R>),
    /// No modulus tracked (piecewise-smooth kinds like coordinates).
    Smooth,
}

#[derive(Clone, Debug)]
enum Kind<R> {
    Constant(R),
    /// x - 1/2 on the base coordinate; the oracle observable.
    Sawtooth,
    /// cos(2 pi x) of the base coordinate.
    Cosine,
    Coordinate(usize),
    /// h(d(x, anchor)) with h(r) = R_class(min(r, cap)).
    RadialBump {
        anchor: Point<R>,
        class: ModulusClass<R>,
        cap: R,
    },
    Sum(Box<Observable<R>>, Box<Observable<R>>),
    Scale(R, Box<Observable<R>>),
    /// inner composed with `steps` applications of the system map.
    Shifted(u64, Box<Observable<R>>),
}

/// A bounded real-valued function on the phase space of one system.
#[derive(Clone, Debug)]
pub struct Observable<R> {
    system: SystemSpec<R>,
    kind: Kind<R>,
    sup_norm: R,
    declared: DeclaredClass<R>,
}

impl<R: Real> Observable<R> {
    pub fn system(&self) -> &SystemSpec<R> {
        &self.system
    }

    pub fn sup_norm(&self) -> R {
        self.sup_norm
    }

    pub fn declared_class(&self) -> &DeclaredClass<R> {
        &self.declared
    }

    /// The declared modulus evaluated at `eps`: the class bound when one is
    /// declared, zero for constants, `None` for kinds without a tracked
    /// modulus.
    pub fn declared_modulus(&self, eps: R) -> Option<R> {
        match (&self.declared, &self.kind) {
            (DeclaredClass::Class(c), _) => c.bound(eps).ok(),
            (DeclaredClass::Smooth, Kind::Constant(_)) => Some(R::zero()),
            (DeclaredClass::Smooth, _) => None,
        }
    }

    pub fn constant(system: SystemSpec<R>, c: R) -> Observable<R> {
        Observable {
            system,
            kind: Kind::Constant(c),
            sup_norm: c.abs(),
            declared: DeclaredClass::Smooth,
        }
    }

    pub fn sawtooth(system: SystemSpec<R>) -> Result<Observable<R>> {
        if !system.is_circle_type() {
            return Err(Error::WrongSystem {
                required: "circle-type",
                got: system.name(),
            });
        }
        Ok(Observable {
            system,
            kind: Kind::Sawtooth,
            sup_norm: R::of(0.5),
            declared: DeclaredClass::Class(ModulusClass::Lipschitz { l: R::one() }),
        })
    }

    pub fn cosine(system: SystemSpec<R>) -> Result<Observable<R>> {
        if !system.is_circle_type() {
            return Err(Error::WrongSystem {
                required: "circle-type",
                got: system.name(),
            });
        }
        Ok(Observable {
            system,
            kind: Kind::Cosine,
            sup_norm: R::one(),
            declared: DeclaredClass::Class(ModulusClass::Lipschitz {
                l: R::of(2.0) * R::PI(),
            }),
        })
    }

    pub fn coordinate(system: SystemSpec<R>, axis: usize) -> Result<Observable<R>> {
        if axis >= system.dim() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for {}",
                system.name()
            )));
        }
        // Bounded on the circle/disk factors by construction; on the plane,
        // bounded over the standard seeding box.
        let sup = match (&system, axis) {
            (SystemSpec::Henon { .. }, 0) => {
                let b = default_seed_box::<R>();
                b.x.0.abs().max(b.x.1.abs())
            }
            (SystemSpec::Henon { .. }, _) => {
                let b = default_seed_box::<R>();
                b.y.0.abs().max(b.y.1.abs())
            }
            _ => R::one(),
        };
        Ok(Observable {
            system,
            kind: Kind::Coordinate(axis),
            sup_norm: sup,
            declared: DeclaredClass::Smooth,
        })
    }

    /// Sum of two observables on the same system.
    pub fn sum(a: Observable<R>, b: Observable<R>) -> Result<Observable<R>> {
        if a.system != b.system {
            return Err(Error::InvalidParameter(
                "cannot add observables of different systems".into(),
            ));
        }
        let sup = a.sup_norm + b.sup_norm;
        let system = a.system;
        Ok(Observable {
            system,
            kind: Kind::Sum(Box::new(a), Box::new(b)),
            sup_norm: sup,
            declared: DeclaredClass::Smooth,
        })
    }

    pub fn scale(c: R, inner: Observable<R>) -> Observable<R> {
        let sup = c.abs() * inner.sup_norm;
        let system = inner.system;
        let declared = inner.declared;
        Observable {
            system,
            kind: Kind::Scale(c, Box::new(inner)),
            sup_norm: sup,
            declared,
        }
    }

    /// The push-forward observable x -> inner(f^steps x).
    pub fn shifted(steps: u64, inner: Observable<R>) -> Observable<R> {
        let sup = inner.sup_norm;
        let system = inner.system;
        Observable {
            system,
            kind: Kind::Shifted(steps, Box::new(inner)),
            sup_norm: sup,
            declared: DeclaredClass::Smooth,
        }
    }

    pub fn eval(&self, p: &Point<R>) -> Result<R> {
        if p.dim() != self.system.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.system.name(),
                expected_dim: self.system.dim(),
                got: p.dim(),
            });
        }
        Ok(match &self.kind {
            Kind::Constant(c) => *c,
            Kind::Sawtooth => p.x() - R::of(0.5),
            Kind::Cosine => (R::of(2.0) * R::PI() * p.x()).cos(),
            Kind::Coordinate(axis) => match (*p, axis) {
                (Point::Interval(x), _) => x,
                (Point::Plane(x, _), 0) => x,
                (Point::Plane(_, y), _) => y,
                (Point::Solenoid(x, _, _), 0) => x,
                (Point::Solenoid(_, y, _), 1) => y,
                (Point::Solenoid(_, _, z), _) => z,
            },
            Kind::RadialBump { anchor, class, cap } => {
                let r = distance(&self.system, p, anchor)?;
                if r <= R::zero() {
                    // h extends continuously by 0 at the anchor.
                    R::zero()
                } else {
                    class.bound(r.min(*cap))?
                }
            }
            Kind::Sum(a, b) => a.eval(p)? + b.eval(p)?,
            Kind::Scale(c, inner) => *c * inner.eval(p)?,
            Kind::Shifted(steps, inner) => {
                inner.eval(&crate::systems::iterate(&self.system, p, *steps)?)?
            }
        })
    }
}

/// Build the radial observable phi(x) = h(d(x, anchor)) with h equal to the
/// class modulus up to a cap at a quarter of the space diameter, constant
/// beyond it. Near the anchor the exact modulus of phi equals the class
/// modulus, which is what makes these observables useful as estimator ground
/// truth.
pub fn make_observable<R: Real>(
    system: SystemSpec<R>,
    class: ModulusClass<R>,
    anchor: Point<R>,
) -> Result<Observable<R>> {
    class.validate()?;
    system.validate()?;
    if anchor.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.name(),
            expected_dim: system.dim(),
            got: anchor.dim(),
        });
    }
    let quarter = system.space_diameter() * R::of(0.25);
    // Log-based moduli need arguments < 1.
    let cap = if class.is_log_based() {
        quarter.min(R::of(0.5))
    } else {
        quarter
    };
    let sup_norm = class.bound(cap)?;
    Ok(Observable {
        system,
        kind: Kind::RadialBump { anchor, class, cap },
        sup_norm,
        declared: DeclaredClass::Class(class),
    })
}

/// The analytic modulus bound R_class(eps); thin wrapper kept as a free
/// function to mirror `make_observable`.
pub fn modulus_bound<R: Real>(class: &ModulusClass<R>, eps: R) -> Result<R> {
    class.bound(eps)
}

/// Source of phase-space points for the modulus estimator.
pub enum SpaceSampler<'a, R> {
    /// Uniform on the system's base space (circle/interval coordinates
    /// uniform; solenoid fibers uniform on the disk).
    Uniform,
    /// Draw from a stored ensemble (the only option for Henon).
    Points(&'a [Point<R>]),
}

impl<R: Real> SpaceSampler<'_, R> {
    fn draw(&self, system: &SystemSpec<R>, rng: &mut ChaCha8Rng) -> Result<Point<R>> {
        match self {
            SpaceSampler::Points(pts) => {
                if pts.is_empty() {
                    return Err(Error::EmptyEnsemble);
                }
                Ok(pts[rng.gen_range(0..pts.len())])
            }
            SpaceSampler::Uniform => match system {
                SystemSpec::IntermittentCircle { .. } | SystemSpec::Doubling => {
                    Ok(Point::Interval(R::of(rng.gen::<f64>())))
                }
                SystemSpec::IntermittentSolenoid { .. } => {
                    let x = R::of(rng.gen::<f64>());
                    loop {
                        let y = R::of(rng.gen::<f64>() * 2.0 - 1.0);
                        let z = R::of(rng.gen::<f64>() * 2.0 - 1.0);
                        if y * y + z * z <= R::one() {
                            return Ok(Point::Solenoid(x, y, z));
                        }
                    }
                }
                SystemSpec::Henon { .. } => Err(Error::WrongSystem {
                    required: "ensemble-backed sampler (henon has no uniform law)",
                    got: "uniform",
                }),
            },
        }
    }
}

/// One estimated modulus value. `r_hat` is `None` when no sampled pair with
/// distance below `eps` was available, which is reported rather than
/// silently treated as zero.
#[derive(Clone, Copy, Debug)]
pub struct ModulusPoint<R> {
    pub eps: R,
    pub r_hat: Option<R>,
    /// Pairs accepted at this tolerance (new pairs only).
    pub pairs: usize,
}

/// Estimate the modulus of continuity on a grid of tolerances.
///
/// For each eps, pairs are drawn by sampling x and perturbing it inside the
/// eps-ball (for ensembles: picking a second point and filtering by
/// distance). The estimate is the running max of |phi(x) - phi(y)| over all
/// pairs with d(x, y) < eps, so it is nondecreasing in eps by construction
/// and approaches the true sup from below.
pub fn estimate_modulus<R: Real>(
    obs: &Observable<R>,
    sampler: &SpaceSampler<R>,
    eps_grid: &[R],
    pairs_per_eps: usize,
    rng_seed: u64,
) -> Result<Vec<ModulusPoint<R>>> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("empty eps grid".into()));
    }
    for w in eps_grid.windows(2) {
        if w[0] <= R::zero() || w[1] <= w[0] {
            return Err(Error::InvalidParameter(
                "eps grid must be positive and strictly ascending".into(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let system = obs.system();
    let mut running: Option<R> = None;
    let mut out = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let mut accepted = 0usize;
        for _ in 0..pairs_per_eps {
            let x = sampler.draw(system, &mut rng)?;
            if let Some(y) = draw_near(system, sampler, &x, eps, &mut rng)? {
                debug_assert!(distance(system, &x, &y)? < eps);
                let diff = (obs.eval(&x)? - obs.eval(&y)?).abs();
                running = Some(match running {
                    Some(m) => m.max(diff),
                    None => diff,
                });
                accepted += 1;
            }
        }
        out.push(ModulusPoint {
            eps,
            r_hat: running,
            pairs: accepted,
        });
    }
    Ok(out)
}

/// Draw a partner point within distance `eps` of `x`, or `None` if the
/// sampler cannot produce one in a bounded number of attempts.
fn draw_near<R: Real>(
    system: &SystemSpec<R>,
    sampler: &SpaceSampler<R>,
    x: &Point<R>,
    eps: R,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Point<R>>> {
    let unit = |rng: &mut ChaCha8Rng| R::of(rng.gen::<f64>() * 2.0 - 1.0);
    match (system, sampler) {
        (_, SpaceSampler::Points(pts)) => {
            for _ in 0..64 {
                let y = pts[rng.gen_range(0..pts.len())];
                if distance(system, x, &y)? < eps {
                    return Ok(Some(y));
                }
            }
            Ok(None)
        }
        (SystemSpec::IntermittentCircle { .. }, _) => {
            let u = unit(rng) * eps;
            let y = Point::Interval(wrap_unit(x.x() + u));
            if distance(system, x, &y)? < eps {
                Ok(Some(y))
            } else {
                Ok(None)
            }
        }
        (SystemSpec::Doubling, _) => {
            for _ in 0..8 {
                let y = x.x() + unit(rng) * eps;
                if y >= R::zero() && y < R::one() && (y - x.x()).abs() < eps {
                    return Ok(Some(Point::Interval(y)));
                }
            }
            Ok(None)
        }
        (SystemSpec::IntermittentSolenoid { .. }, _) => {
            if let Point::Solenoid(bx, by, bz) = *x {
                for _ in 0..8 {
                    let y = Point::Solenoid(
                        wrap_unit(bx + unit(rng) * eps),
                        by + unit(rng) * eps,
                        bz + unit(rng) * eps,
                    );
                    if let Point::Solenoid(_, fy, fz) = y {
                        if fy * fy + fz * fz <= R::one() && distance(system, x, &y)? < eps {
                            return Ok(Some(y));
                        }
                    }
                }
                Ok(None)
            } else {
                Ok(None)
            }
        }
        (SystemSpec::Henon { .. }, SpaceSampler::Uniform) => Err(Error::WrongSystem {
            required: "ensemble-backed sampler",
            got: "uniform",
        }),
    }
}
