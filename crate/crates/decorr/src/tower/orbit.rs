//! Orbit drivers for tower dynamics. They expose, besides plain stepping,
//! the symbolic address of the surrounding dynamical cylinder (the labels of
//! the next `window` steps), which is what piecewise-constant coarsened
//! observables are keyed on.

use std::collections::HashMap;
use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::observables::Observable;
use crate::real::Real;
use crate::systems::{iterate, step, Point, SystemSpec};
use crate::tower::{TowerKind, TowerModel, TowerState, REMAINDER_CELL};

/// Cap on the measured return time of a remainder excursion.
const REMAINDER_RETURN_CAP: u64 = 50_000_000;

pub trait OrbitDriver<R: Real> {
    fn step(&mut self) -> Result<()>;
    fn level(&self) -> u32;
    fn cell(&self) -> u32;
    /// Cylinder address: `[level, cell, cells entered at returns occurring
    /// within the next `window` steps]`.
    fn address(&mut self, window: u32) -> Result<Vec<u32>>;
    /// Ambient projection of the current state (induced towers only).
    fn projected(&self) -> Option<Point<R>>;
    /// Ambient projection of the state k tower-steps ahead.
    fn projected_forward(&mut self, k: u32) -> Result<Option<Point<R>>>;
    fn remainder_hits(&self) -> usize;
}

/// Cell id and return time of the excursion starting at base point `z`;
/// points in the unresolved remainder get the sentinel id and a directly
/// measured first-return time.
fn classify_base_point<R: Real>(
    tower: &TowerModel<R>,
    system: &SystemSpec<R>,
    base_lo: R,
    z: R,
    remainder_hits: &mut usize,
) -> Result<(u32, u32)> {
    if let Some(c) = tower.locate_cell(z) {
        return Ok((c, tower.return_time(c)?));
    }
    *remainder_hits += 1;
    let mut x = z;
    let mut r = 0u64;
    loop {
        x = step(system, &Point::Interval(x))?.x();
        r += 1;
        if x >= base_lo {
            return Ok((REMAINDER_CELL, r as u32));
        }
        if r > REMAINDER_RETURN_CAP {
            return Err(Error::InvalidState(
                "remainder excursion exceeded the return-time cap".into(),
            ));
        }
    }
}

pub struct InducedOrbit<'t, R: Real> {
    tower: &'t TowerModel<R>,
    system: SystemSpec<R>,
    base_lo: R,
    /// Projected coordinate of the current state.
    p: R,
    cell: u32,
    ret: u32,
    level: u32,
    /// Upcoming returns: (cell, return time, level-0 coordinate).
    future: VecDeque<(u32, u32, R)>,
    /// Level-0 coordinate and return time of the last enumerated excursion.
    ahead: R,
    ahead_ret: u32,
    remainder_hits: usize,
}

impl<'t, R: Real> InducedOrbit<'t, R> {
    pub fn new(tower: &'t TowerModel<R>, state: TowerState<R>) -> Result<InducedOrbit<'t, R>> {
        let (system, base) = match tower.kind() {
            TowerKind::Induced { system, base } => (*system, *base),
            TowerKind::Synthetic { .. } => {
                return Err(Error::WrongSystem {
                    required: "induced tower",
                    got: "synthetic tower",
                })
            }
        };
        let z = state.coord.ok_or_else(|| {
            Error::InvalidState("induced orbit needs a base coordinate".into())
        })?;
        let ret = tower.return_time(state.cell)?;
        if state.level >= ret {
            return Err(Error::InvalidState("level at or above return time".into()));
        }
        let p = iterate(&system, &Point::Interval(z), state.level as u64)?.x();
        Ok(InducedOrbit {
            tower,
            system,
            base_lo: base.0,
            p,
            cell: state.cell,
            ret,
            level: state.level,
            future: VecDeque::new(),
            ahead: z,
            ahead_ret: ret,
            remainder_hits: 0,
        })
    }

    fn extend_future(&mut self) -> Result<()> {
        let z_next = iterate(
            &self.system,
            &Point::Interval(self.ahead),
            self.ahead_ret as u64,
        )?
        .x();
        let (c, r) = classify_base_point(
            self.tower,
            &self.system,
            self.base_lo,
            z_next,
            &mut self.remainder_hits,
        )?;
        self.future.push_back((c, r, z_next));
        self.ahead = z_next;
        self.ahead_ret = r;
        Ok(())
    }
}

impl<R: Real> OrbitDriver<R> for InducedOrbit<'_, R> {
    fn step(&mut self) -> Result<()> {
        if self.level + 1 < self.ret {
            self.level += 1;
            self.p = step(&self.system, &Point::Interval(self.p))?.x();
        } else {
            if self.future.is_empty() {
                self.extend_future()?;
            }
            let (c, r, z) = self.future.pop_front().expect("extended above");
            self.cell = c;
            self.ret = r;
            self.level = 0;
            self.p = z;
        }
        Ok(())
    }

    fn level(&self) -> u32 {
        self.level
    }

    fn cell(&self) -> u32 {
        self.cell
    }

    fn address(&mut self, window: u32) -> Result<Vec<u32>> {
        let mut addr = vec![self.level, self.cell];
        let mut t = (self.ret - self.level) as u64;
        let mut i = 0usize;
        while t < window as u64 {
            while self.future.len() <= i {
                self.extend_future()?;
            }
            let (c, r, _) = self.future[i];
            addr.push(c);
            t += r as u64;
            i += 1;
        }
        Ok(addr)
    }

    fn projected(&self) -> Option<Point<R>> {
        Some(Point::Interval(self.p))
    }

    fn projected_forward(&mut self, k: u32) -> Result<Option<Point<R>>> {
        Ok(Some(iterate(
            &self.system,
            &Point::Interval(self.p),
            k as u64,
        )?))
    }

    fn remainder_hits(&self) -> usize {
        self.remainder_hits
    }
}

pub struct SyntheticOrbit<'t, R: Real> {
    tower: &'t TowerModel<R>,
    cell: u32,
    ret: u32,
    level: u32,
    future: VecDeque<u32>,
    rng: ChaCha8Rng,
    _marker: std::marker::PhantomData<R>,
}

impl<'t, R: Real> SyntheticOrbit<'t, R> {
    pub fn new(
        tower: &'t TowerModel<R>,
        state: TowerState<R>,
        rng: ChaCha8Rng,
    ) -> Result<SyntheticOrbit<'t, R>> {
        let ret = tower.return_time(state.cell)?;
        if state.level >= ret {
            return Err(Error::InvalidState("level at or above return time".into()));
        }
        Ok(SyntheticOrbit {
            tower,
            cell: state.cell,
            ret,
            level: state.level,
            future: VecDeque::new(),
            rng,
            _marker: std::marker::PhantomData,
        })
    }
}

impl<R: Real> OrbitDriver<R> for SyntheticOrbit<'_, R> {
    fn step(&mut self) -> Result<()> {
        if self.level + 1 < self.ret {
            self.level += 1;
        } else {
            if self.future.is_empty() {
                let c = self.tower.draw_cell(&mut self.rng);
                self.future.push_back(c);
            }
            let c = self.future.pop_front().expect("extended above");
            self.cell = c;
            self.ret = self.tower.return_time(c)?;
            self.level = 0;
        }
        Ok(())
    }

    fn level(&self) -> u32 {
        self.level
    }

    fn cell(&self) -> u32 {
        self.cell
    }

    fn address(&mut self, window: u32) -> Result<Vec<u32>> {
        let mut addr = vec![self.level, self.cell];
        let mut t = (self.ret - self.level) as u64;
        let mut i = 0usize;
        while t < window as u64 {
            while self.future.len() <= i {
                let c = self.tower.draw_cell(&mut self.rng);
                self.future.push_back(c);
            }
            let c = self.future[i];
            addr.push(c);
            t += self.tower.return_time(c)? as u64;
            i += 1;
        }
        Ok(addr)
    }

    fn projected(&self) -> Option<Point<R>> {
        None
    }

    fn projected_forward(&mut self, _k: u32) -> Result<Option<Point<R>>> {
        Ok(None)
    }

    fn remainder_hits(&self) -> usize {
        0
    }
}

/// Either orbit kind behind one type, so estimators stay non-generic.
pub enum TowerOrbit<'t, R: Real> {
    Induced(InducedOrbit<'t, R>),
    Synthetic(SyntheticOrbit<'t, R>),
}

impl<'t, R: Real> TowerOrbit<'t, R> {
    /// Start an orbit from an invariant-law draw.
    pub fn from_invariant(tower: &'t TowerModel<R>, rng: &mut ChaCha8Rng) -> Result<Self> {
        let state = tower.draw_invariant_state(rng);
        match tower.kind() {
            TowerKind::Induced { .. } => Ok(TowerOrbit::Induced(InducedOrbit::new(tower, state)?)),
            TowerKind::Synthetic { .. } => {
                // Independent stream for the return redraws.
                let child = ChaCha8Rng::seed_from_u64_stream(rng.gen(), 1);
                Ok(TowerOrbit::Synthetic(SyntheticOrbit::new(
                    tower, state, child,
                )?))
            }
        }
    }
}

trait SeedStream {
    fn seed_from_u64_stream(seed: u64, stream: u64) -> Self;
}

impl SeedStream for ChaCha8Rng {
    fn seed_from_u64_stream(seed: u64, stream: u64) -> Self {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}

impl<R: Real> OrbitDriver<R> for TowerOrbit<'_, R> {
    fn step(&mut self) -> Result<()> {
        match self {
            TowerOrbit::Induced(o) => OrbitDriver::<R>::step(o),
            TowerOrbit::Synthetic(o) => OrbitDriver::<R>::step(o),
        }
    }

    fn level(&self) -> u32 {
        match self {
            TowerOrbit::Induced(o) => OrbitDriver::<R>::level(o),
            TowerOrbit::Synthetic(o) => OrbitDriver::<R>::level(o),
        }
    }

    fn cell(&self) -> u32 {
        match self {
            TowerOrbit::Induced(o) => OrbitDriver::<R>::cell(o),
            TowerOrbit::Synthetic(o) => OrbitDriver::<R>::cell(o),
        }
    }

    fn address(&mut self, window: u32) -> Result<Vec<u32>> {
        match self {
            TowerOrbit::Induced(o) => o.address(window),
            TowerOrbit::Synthetic(o) => OrbitDriver::<R>::address(o, window),
        }
    }

    fn projected(&self) -> Option<Point<R>> {
        match self {
            TowerOrbit::Induced(o) => OrbitDriver::<R>::projected(o),
            TowerOrbit::Synthetic(o) => OrbitDriver::<R>::projected(o),
        }
    }

    fn projected_forward(&mut self, k: u32) -> Result<Option<Point<R>>> {
        match self {
            TowerOrbit::Induced(o) => o.projected_forward(k),
            TowerOrbit::Synthetic(o) => OrbitDriver::<R>::projected_forward(o, k),
        }
    }

    fn remainder_hits(&self) -> usize {
        match self {
            TowerOrbit::Induced(o) => OrbitDriver::<R>::remainder_hits(o),
            TowerOrbit::Synthetic(o) => OrbitDriver::<R>::remainder_hits(o),
        }
    }
}

/// A function constant on the cells of the 2k-step dynamical cylinder
/// partition: the sampled infimum of phi at the k-step push-forward over
/// each cylinder.
pub struct CoarseObservable<R: Real> {
    k: u32,
    window: u32,
    source: Observable<R>,
    values: HashMap<Vec<u32>, R>,
    /// Cylinders seen during construction sampling.
    pub sampled_cells: usize,
    /// Cylinders first met during evaluation and filled on contact.
    pub lazy_fills: usize,
}

impl<R: Real> CoarseObservable<R> {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn cylinder_count(&self) -> usize {
        self.values.len()
    }

    /// The coarsened function never exceeds the source bound.
    pub fn sup_norm(&self) -> R {
        self.source.sup_norm()
    }

    pub fn source(&self) -> &Observable<R> {
        &self.source
    }

    /// Value on the cylinder of the orbit's current state. A cylinder never
    /// seen before is filled from this very state (it joins the cylinder's
    /// sample set) and stays constant afterwards.
    pub fn eval_on<D: OrbitDriver<R>>(&mut self, orbit: &mut D) -> Result<R> {
        let addr = orbit.address(self.window)?;
        if let Some(v) = self.values.get(&addr) {
            return Ok(*v);
        }
        let p = orbit.projected_forward(self.k)?.ok_or(Error::WrongSystem {
            required: "induced tower",
            got: "synthetic tower",
        })?;
        let v = self.source.eval(&p)?;
        self.values.insert(addr, v);
        self.lazy_fills += 1;
        Ok(v)
    }
}

/// Coarsen an observable to the 2k-step cylinder partition of an induced
/// tower: each sampled cylinder carries the minimum of phi over the k-step
/// images of its sampled states. Cylinders that receive no sample stay
/// absent and are filled on first contact during evaluation.
pub fn discretize_observable<R: Real>(
    tower: &TowerModel<R>,
    obs: &Observable<R>,
    k: u32,
    samples: usize,
    rng_seed: u64,
) -> Result<CoarseObservable<R>> {
    let (system, base) = match tower.kind() {
        TowerKind::Induced { system, base } => (*system, *base),
        TowerKind::Synthetic { .. } => {
            return Err(Error::WrongSystem {
                required: "induced tower",
                got: "synthetic tower",
            })
        }
    };
    if *obs.system() != system {
        return Err(Error::InvalidParameter(
            "observable is defined on a different system than the tower base".into(),
        ));
    }
    let window = (2 * k).max(1);
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut values: HashMap<Vec<u32>, R> = HashMap::new();
    let mut remainder_hits = 0usize;
    for _ in 0..samples {
        let s = tower.draw_invariant_state(&mut rng);
        let z = s.coord.expect("induced state");
        let mut addr = vec![s.level, s.cell];
        let mut cur_ret = tower.return_time(s.cell)?;
        let mut t = (cur_ret - s.level) as u64;
        let mut q = z;
        while t < window as u64 {
            q = iterate(&system, &Point::Interval(q), cur_ret as u64)?.x();
            let (c, r) = classify_base_point(tower, &system, base.0, q, &mut remainder_hits)?;
            addr.push(c);
            cur_ret = r;
            t += r as u64;
        }
        let image = iterate(&system, &Point::Interval(z), (s.level + k) as u64)?;
        let v = obs.eval(&image)?;
        values
            .entry(addr)
            .and_modify(|m| {
                if v < *m {
                    *m = v
                }
            })
            .or_insert(v);
    }
    let sampled_cells = values.len();
    Ok(CoarseObservable {
        k,
        window,
        source: obs.clone(),
        values,
        sampled_cells,
        lazy_fills: 0,
    })
}
