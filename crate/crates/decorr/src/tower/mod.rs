//! Return-time towers over a base set: built explicitly for circle maps by
//! first-return inducing, or synthetically from a prescribed return-time
//! tail law.
//!
//! A tower is a list of base cells, each carrying a return time `R_i` and a
//! normalized base-measure weight. The tower map climbs levels `0..R_i` and
//! drops back to level 0 through the induced return map (induced kind) or an
//! independent redraw of the next cell (synthetic kind).

mod induced;
mod orbit;
mod synthetic;

pub mod io;

pub use induced::{
    build_induced_tower, DeltaEstimate, DistortionFit, DistortionReport, InducedBuildOptions,
    ReturnCylinder, TowerCylinder,
};
pub use orbit::{
    discretize_observable, CoarseObservable, InducedOrbit, OrbitDriver, SyntheticOrbit,
    TowerOrbit,
};
pub use synthetic::synth_tower;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::systems::{iterate, Point, SystemSpec};

/// Sentinel cell id for base points that fall outside the enumerated cells
/// (the remainder of an induced construction).
pub const REMAINDER_CELL: u32 = u32::MAX;

/// Prescribed return-time tail m{R > n}, truncated at a cutoff when a tower
/// is synthesized from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tail", rename_all = "snake_case")]
pub enum TailLaw<R> {
    /// m{R > n} = theta^n.
    ExpTail { theta: R },
    /// m{R > n} = exp(-c n^eta).
    StretchedTail { c: R, eta: R },
    /// m{R > n} = n^(-alpha), alpha > 1 (integrable return times).
    PolyTail { alpha: R },
}

impl<R: Real> TailLaw<R> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            TailLaw::ExpTail { theta } => {
                if theta <= R::zero() || theta >= R::one() {
                    return bad(format!("exp tail needs theta in (0,1), got {theta}"));
                }
            }
            TailLaw::StretchedTail { c, eta } => {
                if c <= R::zero() || eta <= R::zero() || eta >= R::one() {
                    return bad(format!(
                        "stretched tail needs c > 0 and eta in (0,1), got c={c}, eta={eta}"
                    ));
                }
            }
            TailLaw::PolyTail { alpha } => {
                if alpha <= R::one() {
                    return bad(format!(
                        "polynomial tail needs alpha > 1 for integrable returns, got {alpha}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Unnormalized tail value m{R > n}; equals 1 at n = 0.
    pub fn tail(&self, n: u64) -> R {
        if n == 0 {
            return R::one();
        }
        let nr = R::of_usize(n as usize);
        match *self {
            TailLaw::ExpTail { theta } => theta.powf(nr),
            TailLaw::StretchedTail { c, eta } => (-c * nr.powf(eta)).exp(),
            TailLaw::PolyTail { alpha } => nr.powf(-alpha),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TailLaw::ExpTail { .. } => "exp",
            TailLaw::StretchedTail { .. } => "stretched",
            TailLaw::PolyTail { .. } => "poly",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TowerCell<R> {
    /// Base subinterval for induced towers; `None` for synthetic cells.
    pub interval: Option<(R, R)>,
    pub return_time: u32,
    /// Normalized base-measure mass of the cell.
    pub weight: R,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TowerKind<R> {
    Induced {
        system: SystemSpec<R>,
        /// The base set: the domain of the rightmost affine branch.
        base: (R, R),
    },
    Synthetic {
        law: TailLaw<R>,
        branching: u32,
    },
}

#[derive(Clone, Debug)]
pub struct TowerModel<R> {
    kind: TowerKind<R>,
    /// Sorted by interval position for induced towers; by (return, branch)
    /// for synthetic ones.
    cells: Vec<TowerCell<R>>,
    /// Base mass not resolved into cells (returns deeper than the enumerated
    /// depth plus pruned slivers). Bookkeeping treats it as one virtual cell
    /// with return time `max_return + 1`.
    remainder_mass: R,
    /// Tail mass cut at the synthetic cutoff, before renormalization.
    truncation_mass: R,
    max_return: u32,
    /// m{R > n} for n = 0..=max_return (includes the remainder).
    tail: Vec<R>,
    /// Cumulative cell weights for synthetic redraws.
    cum_weights: Vec<R>,
    /// Induced only: per first-entry depth j (1-indexed), the maximal
    /// diameter of the entry intervals at that depth.
    entry_diams: Vec<R>,
}

/// A point of the tower: base cell, level, and (induced) the base coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TowerState<R> {
    pub cell: u32,
    pub level: u32,
    pub coord: Option<R>,
}

impl<R: Real> TowerModel<R> {
    pub(crate) fn assemble(
        kind: TowerKind<R>,
        cells: Vec<TowerCell<R>>,
        remainder_mass: R,
        truncation_mass: R,
        entry_diams: Vec<R>,
    ) -> Result<TowerModel<R>> {
        if cells.is_empty() {
            return Err(Error::Construction("no cells".into()));
        }
        let mut gcd = 0u32;
        let mut max_return = 0u32;
        for c in &cells {
            if c.return_time == 0 {
                return Err(Error::Construction("cell with return time 0".into()));
            }
            if c.weight <= R::zero() {
                return Err(Error::Construction("cell with nonpositive weight".into()));
            }
            gcd = gcd_u32(gcd, c.return_time);
            max_return = max_return.max(c.return_time);
        }
        if gcd != 1 {
            return Err(Error::Construction(format!(
                "return times share the common divisor {gcd}; the tower map would not be aperiodic"
            )));
        }

        // Tail table m{R > n}; the remainder counts as return max_return + 1.
        let mut tail = vec![R::zero(); max_return as usize + 1];
        for c in &cells {
            for slot in tail.iter_mut().take(c.return_time as usize) {
                *slot = *slot + c.weight;
            }
        }
        for slot in tail.iter_mut() {
            *slot = *slot + remainder_mass;
        }

        let kac: R = tail.iter().copied().sum();
        if !kac.is_finite() {
            return Err(Error::Construction(
                "non-finite return-time mean".into(),
            ));
        }

        let mut cum_weights = Vec::with_capacity(cells.len());
        let mut acc = R::zero();
        for c in &cells {
            acc = acc + c.weight;
            cum_weights.push(acc);
        }

        Ok(TowerModel {
            kind,
            cells,
            remainder_mass,
            truncation_mass,
            max_return,
            tail,
            cum_weights,
            entry_diams,
        })
    }

    pub fn kind(&self) -> &TowerKind<R> {
        &self.kind
    }

    pub fn cells(&self) -> &[TowerCell<R>] {
        &self.cells
    }

    pub fn is_induced(&self) -> bool {
        matches!(self.kind, TowerKind::Induced { .. })
    }

    pub fn remainder_mass(&self) -> R {
        self.remainder_mass
    }

    pub fn truncation_mass(&self) -> R {
        self.truncation_mass
    }

    pub fn max_return(&self) -> u32 {
        self.max_return
    }

    pub(crate) fn entry_diams(&self) -> &[R] {
        &self.entry_diams
    }

    pub fn base_system(&self) -> Option<&SystemSpec<R>> {
        match &self.kind {
            TowerKind::Induced { system, .. } => Some(system),
            TowerKind::Synthetic { .. } => None,
        }
    }

    pub fn base_interval(&self) -> Option<(R, R)> {
        match &self.kind {
            TowerKind::Induced { base, .. } => Some(*base),
            TowerKind::Synthetic { .. } => None,
        }
    }

    pub fn return_time(&self, cell: u32) -> Result<u32> {
        self.cells
            .get(cell as usize)
            .map(|c| c.return_time)
            .ok_or_else(|| Error::InvalidState(format!("cell index {cell} out of range")))
    }

    /// m{R > n}, including the remainder mass, for n = 0..=max_return.
    pub fn tail_mass(&self, n: u64) -> R {
        if n as usize >= self.tail.len() {
            return R::zero();
        }
        self.tail[n as usize]
    }

    pub fn tail_table(&self) -> &[R] {
        &self.tail
    }

    /// Mean return time over the stored weights: sum over n of m{R > n}.
    pub fn kac_mass(&self) -> R {
        self.tail.iter().copied().sum()
    }

    /// Level weights of the invariant tower probability: level l carries
    /// mass proportional to m{R > l}. Trailing zero-mass levels are dropped.
    pub fn invariant_levels(&self) -> Result<Vec<R>> {
        let kac = self.kac_mass();
        if !kac.is_finite() || kac <= R::zero() {
            return Err(Error::Construction("non-finite level normalization".into()));
        }
        let mut w: Vec<R> = self.tail.iter().map(|&t| t / kac).collect();
        while w.last() == Some(&R::zero()) {
            w.pop();
        }
        Ok(w)
    }

    /// Index of the induced cell containing base coordinate `z`, if any.
    pub fn locate_cell(&self, z: R) -> Option<u32> {
        let idx = self
            .cells
            .partition_point(|c| c.interval.map(|(_, hi)| hi <= z).unwrap_or(false));
        let c = self.cells.get(idx)?;
        let (lo, hi) = c.interval?;
        (z >= lo && z < hi).then_some(idx as u32)
    }

    /// Draw a cell index according to the base measure.
    pub fn draw_cell(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total = *self.cum_weights.last().expect("non-empty");
        let u = R::of(rng.gen::<f64>()) * total;
        let idx = self.cum_weights.partition_point(|&c| c <= u);
        idx.min(self.cells.len() - 1) as u32
    }

    /// Draw a tower state from the invariant probability: cells weighted by
    /// R_i * w_i, level uniform below the return time, coordinate uniform in
    /// the cell (induced).
    pub fn draw_invariant_state(&self, rng: &mut ChaCha8Rng) -> TowerState<R> {
        // Kac-weighted cell draw by inversion on R_i * w_i.
        let total: R = self
            .cells
            .iter()
            .map(|c| R::of_usize(c.return_time as usize) * c.weight)
            .sum();
        let mut u = R::of(rng.gen::<f64>()) * total;
        let mut cell = 0u32;
        for (i, c) in self.cells.iter().enumerate() {
            let m = R::of_usize(c.return_time as usize) * c.weight;
            if u < m || i == self.cells.len() - 1 {
                cell = i as u32;
                break;
            }
            u = u - m;
        }
        let c = &self.cells[cell as usize];
        let level = rng.gen_range(0..c.return_time);
        let coord = c.interval.map(|(lo, hi)| {
            let t = R::of(rng.gen::<f64>());
            lo + (hi - lo) * t
        });
        TowerState { cell, level, coord }
    }

    fn check_state(&self, s: &TowerState<R>) -> Result<()> {
        let r = self.return_time(s.cell)?;
        if s.level >= r {
            return Err(Error::InvalidState(format!(
                "level {} not below return time {r}",
                s.level
            )));
        }
        if self.is_induced() {
            match (s.coord, self.cells[s.cell as usize].interval) {
                (Some(z), Some((lo, hi))) => {
                    if z < lo || z >= hi {
                        return Err(Error::InvalidState(format!(
                            "coordinate {z} outside cell [{lo}, {hi})"
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidState(
                        "induced state needs a base coordinate".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// One step of the tower map: climb a level, or return to level 0 via
    /// the induced return map (induced) / an independent cell redraw with
    /// the supplied generator (synthetic).
    pub fn tower_step(&self, s: &TowerState<R>, rng: &mut ChaCha8Rng) -> Result<TowerState<R>> {
        self.check_state(s)?;
        let r = self.cells[s.cell as usize].return_time;
        if s.level + 1 < r {
            return Ok(TowerState {
                cell: s.cell,
                level: s.level + 1,
                coord: s.coord,
            });
        }
        match &self.kind {
            TowerKind::Induced { system, .. } => {
                let z = s.coord.expect("checked above");
                let image = iterate(system, &Point::Interval(z), r as u64)?.x();
                match self.locate_cell(image) {
                    Some(cell) => Ok(TowerState {
                        cell,
                        level: 0,
                        coord: Some(image),
                    }),
                    None => Err(Error::InvalidState(format!(
                        "return image {image} lies in the unresolved remainder"
                    ))),
                }
            }
            TowerKind::Synthetic { .. } => Ok(TowerState {
                cell: self.draw_cell(rng),
                level: 0,
                coord: None,
            }),
        }
    }

    /// Project a tower state to the ambient circle: the level-th image of
    /// the base coordinate.
    pub fn project(&self, s: &TowerState<R>) -> Result<Point<R>> {
        match &self.kind {
            TowerKind::Induced { system, .. } => {
                self.check_state(s)?;
                let z = s.coord.expect("checked");
                iterate(system, &Point::Interval(z), s.level as u64)
            }
            TowerKind::Synthetic { .. } => Err(Error::WrongSystem {
                required: "induced tower",
                got: "synthetic tower",
            }),
        }
    }

    /// Stopping times S_0 = 0, S_{i+1} = S_i + return time of the cell
    /// reached at the i-th return, for a level-0 start.
    pub fn stopping_times(
        &self,
        s0: &TowerState<R>,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<StoppingTimes> {
        self.check_state(s0)?;
        if s0.level != 0 {
            return Err(Error::InvalidState(
                "stopping times start from level 0".into(),
            ));
        }
        let mut times = Vec::with_capacity(k + 1);
        times.push(0u64);
        let mut cell = s0.cell;
        let mut coord = s0.coord;
        let mut complete = true;
        for _ in 0..k {
            let r = self.cells[cell as usize].return_time;
            let s = times.last().unwrap() + r as u64;
            times.push(s);
            match &self.kind {
                TowerKind::Induced { system, .. } => {
                    let z = coord.expect("induced state has coordinate");
                    let image = iterate(system, &Point::Interval(z), r as u64)?.x();
                    match self.locate_cell(image) {
                        Some(c) => {
                            cell = c;
                            coord = Some(image);
                        }
                        None => {
                            complete = false;
                            break;
                        }
                    }
                }
                TowerKind::Synthetic { .. } => {
                    cell = self.draw_cell(rng);
                }
            }
        }
        Ok(StoppingTimes { times, complete })
    }

    /// Number of returns before the return orbits of two base points land in
    /// different cells, capped. Returns `cap` if they stay together that long.
    pub fn separation_time(&self, x: R, y: R, cap: u32) -> Result<u32> {
        let system = match &self.kind {
            TowerKind::Induced { system, .. } => system,
            _ => {
                return Err(Error::WrongSystem {
                    required: "induced tower",
                    got: "synthetic tower",
                })
            }
        };
        let mut a = x;
        let mut b = y;
        for s in 0..cap {
            let ca = self.locate_cell(a);
            let cb = self.locate_cell(b);
            match (ca, cb) {
                (Some(ca), Some(cb)) if ca == cb => {
                    let r = self.cells[ca as usize].return_time as u64;
                    a = iterate(system, &Point::Interval(a), r)?.x();
                    b = iterate(system, &Point::Interval(b), r)?.x();
                }
                _ => return Ok(s),
            }
        }
        Ok(cap)
    }
}

#[derive(Clone, Debug)]
pub struct StoppingTimes {
    pub times: Vec<u64>,
    /// False when the orbit left the enumerated cells (induced remainder).
    pub complete: bool,
}

fn gcd_u32(a: u32, b: u32) -> u32 {
    if a == 0 {
        b
    } else {
        gcd_u32(b % a, a)
    }
}
