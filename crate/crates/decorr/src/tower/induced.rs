//! First-return tower construction for circle-type base maps, and the
//! geometric estimators that live on it: diameters of pushed-forward
//! dynamical cylinders and the return-map distortion check.
//!
//! The base set is the domain of the rightmost affine branch,
//! `[(d-1)/d, 1)`. Points leaving the base wander through the first-entry
//! sets of the complement until they re-enter; cells with return time `n+1`
//! are affine pullbacks into the base of the first-entry intervals at depth
//! `n`. Those entry intervals are produced by pulling the base back through
//! the branch inverses, one depth per pass, with interval endpoints solved
//! by bisection to one ulp.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::systems::{invert_monotone, iterate, step, Point, SystemSpec};
use crate::tower::{TowerCell, TowerKind, TowerModel};

#[derive(Clone, Copy, Debug)]
pub struct InducedBuildOptions {
    /// Entry intervals narrower than this are aggregated into the remainder.
    pub prune_width: f64,
    /// Enumeration stops (with the rest reported as remainder) beyond this
    /// many cells.
    pub max_cells: usize,
}

impl Default for InducedBuildOptions {
    fn default() -> Self {
        InducedBuildOptions {
            prune_width: 1e-13,
            max_cells: 4_000_000,
        }
    }
}

/// The base circle map viewed branch by branch.
pub(crate) struct BaseMap<R> {
    pub system: SystemSpec<R>,
    pub d: u32,
    gamma: Option<R>,
}

impl<R: Real> BaseMap<R> {
    pub fn new(system: &SystemSpec<R>) -> Result<BaseMap<R>> {
        match *system {
            SystemSpec::IntermittentCircle { gamma, d } => {
                system.validate()?;
                Ok(BaseMap {
                    system: *system,
                    d,
                    gamma: Some(gamma),
                })
            }
            SystemSpec::Doubling => Ok(BaseMap {
                system: *system,
                d: 2,
                gamma: None,
            }),
            _ => Err(Error::WrongSystem {
                required: "intermittent circle or doubling",
                got: system.name(),
            }),
        }
    }

    fn dr(&self) -> R {
        R::of_usize(self.d as usize)
    }

    /// The base set: domain of the rightmost affine branch.
    pub fn base(&self) -> (R, R) {
        ((self.dr() - R::one()) / self.dr(), R::one())
    }

    /// Supremum of the image of the first branch [0, 1/d).
    fn first_image_hi(&self) -> R {
        match self.gamma {
            Some(_) => R::of(2.0) / self.dr(),
            None => R::one(),
        }
    }

    /// Inverse of the first branch at y in [0, first_image_hi).
    fn first_branch_inverse(&self, y: R) -> R {
        match self.gamma {
            None => y / self.dr(),
            Some(g) => {
                let dr = self.dr();
                invert_monotone(|x| x + x * (dr * x).powf(g), y, R::zero(), R::one() / dr)
            }
        }
    }

    /// Inverse through the affine branch j (1 <= j <= d-1): x = (y + j)/d.
    fn affine_inverse(&self, j: u32, y: R) -> R {
        (y + R::of_usize(j as usize)) / self.dr()
    }

    /// Pullback of the base set into the base through its own affine branch.
    fn base_branch_inverse(&self, y: R) -> R {
        self.affine_inverse(self.d - 1, y)
    }
}

/// Build the first-return tower for an intermittent circle map (or the
/// doubling map, which serves as the affine oracle). `depth` bounds the
/// maximal enumerated return time; deeper returns are reported as remainder
/// mass.
pub fn build_induced_tower<R: Real>(
    system: &SystemSpec<R>,
    depth: u32,
    opts: &InducedBuildOptions,
) -> Result<TowerModel<R>> {
    if depth < 2 {
        return Err(Error::InvalidParameter(format!(
            "depth must be at least 2, got {depth}"
        )));
    }
    let bm = BaseMap::new(system)?;
    let base = bm.base();
    let prune = R::of(opts.prune_width);

    let mut cells: Vec<TowerCell<R>> = Vec::new();
    let mut entry_diams: Vec<R> = vec![R::zero(); depth as usize];
    let mut truncated = false;

    // Return time 1: the part of the base mapping straight back into it.
    cells.push(TowerCell {
        interval: Some((bm.base_branch_inverse(base.0), bm.base_branch_inverse(base.1))),
        return_time: 1,
        weight: base.1 - base.0,
    });

    // First-entry intervals of the complement, one depth at a time.
    let mut current: Vec<(R, R)> = vec![base];
    for n in 1..depth {
        let mut next: Vec<(R, R)> = Vec::with_capacity(current.len() * (bm.d as usize - 1));
        for &(lo, hi) in &current {
            // First branch: image is [0, first_image_hi).
            let cap = bm.first_image_hi();
            if lo < cap {
                let a = bm.first_branch_inverse(lo);
                let b = bm.first_branch_inverse(hi.min(cap));
                if b - a >= prune {
                    next.push((a, b));
                }
            }
            // Interior affine branches (full image), absent for d = 2.
            for j in 1..bm.d.saturating_sub(1) {
                let a = bm.affine_inverse(j, lo);
                let b = bm.affine_inverse(j, hi);
                if b - a >= prune {
                    next.push((a, b));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        let mut level_max = R::zero();
        for &(lo, hi) in &next {
            level_max = level_max.max(hi - lo);
            cells.push(TowerCell {
                interval: Some((bm.base_branch_inverse(lo), bm.base_branch_inverse(hi))),
                return_time: n + 1,
                weight: hi - lo,
            });
        }
        entry_diams[n as usize] = level_max;
        if cells.len() > opts.max_cells {
            truncated = true;
            break;
        }
        current = next;
    }
    if truncated {
        log::warn!(
            "cell enumeration stopped at {} cells; deeper returns go to the remainder",
            cells.len()
        );
    }

    cells.sort_by(|a, b| {
        a.interval
            .unwrap()
            .0
            .partial_cmp(&b.interval.unwrap().0)
            .unwrap()
    });
    let total: R = cells.iter().map(|c| c.weight).sum();
    let remainder = (R::one() - total).max(R::zero());
    if remainder.as_f64() > 0.05 {
        log::warn!(
            "remainder mass {:.3e} after depth {depth}; tail statistics above that depth are unresolved",
            remainder.as_f64()
        );
    }

    TowerModel::assemble(
        TowerKind::Induced {
            system: bm.system,
            base,
        },
        cells,
        remainder,
        R::zero(),
        entry_diams,
    )
}

/// A sampled estimate of a supremum of cylinder diameters.
#[derive(Clone, Copy, Debug)]
pub struct DeltaEstimate<R> {
    pub value: R,
    /// Sampled cylinders inspected (the structured component is exact and
    /// not counted here).
    pub samples: usize,
}

/// A cylinder of the return-map partition: the word of cells visited at
/// consecutive returns, with its base interval for induced towers.
#[derive(Clone, Debug)]
pub struct ReturnCylinder<R> {
    pub word: Vec<u32>,
    pub interval: Option<(R, R)>,
}

/// An element of the n-step tower partition: starting cell and level plus
/// the cells entered at the returns inside the window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerCylinder {
    pub cell: u32,
    pub level: u32,
    pub word: Vec<u32>,
}

impl<R: Real> TowerModel<R> {
    fn induced_parts(&self) -> Result<(&SystemSpec<R>, (R, R))> {
        match self.kind() {
            TowerKind::Induced { system, base } => Ok((system, *base)),
            TowerKind::Synthetic { .. } => Err(Error::WrongSystem {
                required: "induced tower",
                got: "synthetic tower",
            }),
        }
    }

    /// Diameter of the image of a base interval after `steps` applications
    /// of the map. Endpoints are pushed directly; the upper endpoint is
    /// pulled inside by a relative 1e-9 so that half-open intervals ending
    /// on a branch boundary stay on their branch.
    pub(crate) fn pushed_diam(&self, interval: (R, R), steps: u64) -> Result<R> {
        let (system, _) = self.induced_parts()?;
        let (a, b) = interval;
        if b <= a {
            return Ok(R::zero());
        }
        let width = b - a;
        let b_in = b - width * R::of(1e-9);
        let fa = iterate(system, &Point::Interval(a), steps)?.x();
        let fb = iterate(system, &Point::Interval(b_in.max(a)), steps)?.x();
        Ok((fb - fa).abs())
    }

    /// The subinterval of `cell` whose return-map image lies in `target`
    /// (a subset of the base). Solved by bisection against the full return
    /// iterate, which is monotone on the cell.
    pub(crate) fn pull_through_return(&self, cell: u32, target: (R, R)) -> Result<(R, R)> {
        let (system, base) = self.induced_parts()?;
        let c = &self.cells()[cell as usize];
        let (clo, chi) = c.interval.ok_or_else(|| {
            Error::InvalidState("induced cell without interval".into())
        })?;
        let r = c.return_time as u64;
        let f = |z: R| {
            iterate(system, &Point::Interval(z), r)
                .expect("circle iteration")
                .x()
        };
        let lo = if target.0 <= base.0 {
            clo
        } else {
            invert_monotone(f, target.0, clo, chi)
        };
        let hi = if target.1 >= base.1 {
            chi
        } else {
            invert_monotone(f, target.1, clo, chi)
        };
        Ok((lo, hi))
    }

    /// Base interval of the return-word cylinder `word` (cells visited at
    /// consecutive returns, first entry included).
    pub(crate) fn word_interval(&self, word: &[u32]) -> Result<(R, R)> {
        let last = *word.last().ok_or_else(|| {
            Error::InvalidParameter("empty cylinder word".into())
        })?;
        let mut x = self.cells()[last as usize]
            .interval
            .ok_or_else(|| Error::InvalidState("cell without interval".into()))?;
        for &c in word[..word.len() - 1].iter().rev() {
            x = self.pull_through_return(c, x)?;
        }
        Ok(x)
    }

    /// Supremum (lower estimate) of the diameters of `l`-step images of
    /// return-refined cylinders, following the two-case split on the
    /// refinement index. The structured component (full-cell images along
    /// climbs) is computed exactly from the stored first-entry diameters,
    /// the rest is sampled.
    pub fn delta_bar(&self, k: u32, budget: usize, rng_seed: u64) -> Result<DeltaEstimate<R>> {
        self.induced_parts()?;
        let mut value = R::zero();

        // Exact component: images of full cells at l < R - k are the
        // first-entry intervals of depth > k; include the cell widths (l=0).
        for j in (k as usize + 1)..self.entry_diams().len() {
            value = value.max(self.entry_diams()[j]);
        }
        for c in self.cells() {
            if c.return_time > k {
                if let Some((lo, hi)) = c.interval {
                    value = value.max(hi - lo);
                }
            }
        }

        // Sampled component: refined cylinders inside a cell, pushed to the
        // level dictated by the refinement index m = k - R + 1 + l.
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let offsets: [u32; 12] = [0, 1, 2, 3, 5, 7, 11, 15, 23, 31, 47, 63];
        let mut samples = 0usize;
        for _ in 0..budget {
            let q = self.draw_cell(&mut rng);
            let r = self.return_time(q)?;
            let m_lo = (k as i64 - r as i64 + 1).max(1) as u32;
            if m_lo > k {
                continue;
            }
            let m = (m_lo + offsets[rng.gen_range(0..offsets.len())]).min(k);
            let mut word = Vec::with_capacity(m as usize + 1);
            word.push(q);
            for _ in 0..m {
                word.push(self.draw_cell(&mut rng));
            }
            let cyl = self.word_interval(&word)?;
            let level = (m as i64 + r as i64 - 1 - k as i64) as u64;
            debug_assert!(level < r as u64);
            value = value.max(self.pushed_diam(cyl, level)?);
            samples += 1;
        }
        Ok(DeltaEstimate { value, samples })
    }

    /// Supremum (lower estimate) of diam of the projected n-step image of
    /// the 2n-step dynamical cylinders.
    pub fn delta_n(&self, n: u32, budget: usize, rng_seed: u64) -> Result<DeltaEstimate<R>> {
        self.induced_parts()?;
        let mut value = R::zero();

        // Climb-only cylinders: the projected image is a full first-entry
        // interval of depth j >= n+1; realizable while a cell of return
        // time >= j + n exists.
        let max_j = (self.max_return() as i64 - n as i64).max(0) as usize;
        for j in (n as usize + 1)..self.entry_diams().len().min(max_j + 1) {
            value = value.max(self.entry_diams()[j]);
        }
        for c in self.cells() {
            if c.return_time > 2 * n {
                if let Some((lo, hi)) = c.interval {
                    value = value.max(hi - lo);
                }
            }
        }

        // Sampled cylinders with returns inside the window.
        let window = 2 * n as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut samples = 0usize;
        for _ in 0..budget {
            let state = self.draw_invariant_state(&mut rng);
            let r = self.return_time(state.cell)?;
            let mut word = vec![state.cell];
            let mut t = (r - state.level) as u64;
            while t < window {
                let c = self.draw_cell(&mut rng);
                word.push(c);
                t += self.return_time(c)? as u64;
            }
            let cyl = self.word_interval(&word)?;
            value = value.max(self.pushed_diam(cyl, state.level as u64 + n as u64)?);
            samples += 1;
        }
        Ok(DeltaEstimate { value, samples })
    }

    /// Enumerate the return-word partition of the base at refinement k:
    /// all words of k+1 consecutive return cells.
    pub fn return_partition(&self, k: u32, budget: usize) -> Result<Vec<ReturnCylinder<R>>> {
        let n_cells = self.cells().len();
        let mut count: usize = 1;
        for _ in 0..=k {
            count = count.saturating_mul(n_cells);
            if count > budget {
                return Err(Error::PartitionBudget {
                    attempted: count,
                    budget,
                });
            }
        }
        let mut out = Vec::with_capacity(count);
        let mut word = Vec::with_capacity(k as usize + 1);
        self.enumerate_words(k as usize + 1, &mut word, &mut out)?;
        Ok(out)
    }

    fn enumerate_words(
        &self,
        len: usize,
        word: &mut Vec<u32>,
        out: &mut Vec<ReturnCylinder<R>>,
    ) -> Result<()> {
        if word.len() == len {
            let interval = if self.is_induced() {
                Some(self.word_interval(word)?)
            } else {
                None
            };
            out.push(ReturnCylinder {
                word: word.clone(),
                interval,
            });
            return Ok(());
        }
        for c in 0..self.cells().len() as u32 {
            word.push(c);
            self.enumerate_words(len, word, out)?;
            word.pop();
        }
        Ok(())
    }

    /// Enumerate the n-step tower partition: elements are (cell, level)
    /// pieces refined by the cells entered at returns inside the window.
    /// n = 0 gives the base partition into (cell, level) pieces.
    pub fn tower_partition(&self, n: u32, budget: usize) -> Result<Vec<TowerCylinder>> {
        let window = n.max(1) as u64;
        let mut out = Vec::new();
        for (i, c) in self.cells().iter().enumerate() {
            for level in 0..c.return_time {
                let t = (c.return_time - level) as u64;
                self.extend_tower_words(
                    i as u32,
                    level,
                    t,
                    window,
                    &mut Vec::new(),
                    &mut out,
                    budget,
                )?;
            }
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_tower_words(
        &self,
        cell: u32,
        level: u32,
        t: u64,
        window: u64,
        word: &mut Vec<u32>,
        out: &mut Vec<TowerCylinder>,
        budget: usize,
    ) -> Result<()> {
        if t >= window {
            if out.len() >= budget {
                return Err(Error::PartitionBudget {
                    attempted: out.len() + 1,
                    budget,
                });
            }
            out.push(TowerCylinder {
                cell,
                level,
                word: word.clone(),
            });
            return Ok(());
        }
        for c in 0..self.cells().len() as u32 {
            word.push(c);
            let r = self.return_time(c)? as u64;
            self.extend_tower_words(cell, level, t + r, window, word, out, budget)?;
            word.pop();
        }
        Ok(())
    }

    /// Log-derivative of the full return iterate at a base point.
    pub fn log_return_derivative(&self, z: R) -> Result<R> {
        let (system, _) = self.induced_parts()?;
        let cell = self
            .locate_cell(z)
            .ok_or_else(|| Error::InvalidState("point in the unresolved remainder".into()))?;
        let r = self.return_time(cell)?;
        let mut acc = R::zero();
        let mut x = z;
        for _ in 0..r {
            acc = acc + crate::systems::base_derivative(system, x)?.ln();
            x = step(system, &Point::Interval(x))?.x();
        }
        Ok(acc)
    }

    /// Sample pairs within common cells and check that the log-ratio of
    /// return-map derivatives is controlled by an exponential in the
    /// separation time of the images.
    pub fn distortion_check(&self, pairs: usize, rng_seed: u64) -> Result<DistortionReport<R>> {
        let (system, _) = self.induced_parts()?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut discarded = 0usize;
        let mut data: Vec<(u32, R)> = Vec::with_capacity(pairs);
        let mut max_log_ratio = R::zero();
        const SEP_CAP: u32 = 48;
        for _ in 0..pairs {
            let cell = self.draw_cell(&mut rng);
            let (lo, hi) = self.cells()[cell as usize].interval.unwrap();
            let u = R::of(rng.gen::<f64>());
            let v = R::of(rng.gen::<f64>());
            let x = lo + (hi - lo) * u;
            let y = lo + (hi - lo) * v;
            let r = self.return_time(cell)? as u64;
            let dx = self.log_return_derivative(x);
            let dy = self.log_return_derivative(y);
            let (dx, dy) = match (dx, dy) {
                (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a, b),
                _ => {
                    discarded += 1;
                    continue;
                }
            };
            let log_ratio = (dx - dy).abs();
            max_log_ratio = max_log_ratio.max(log_ratio);
            let ix = iterate(system, &Point::Interval(x), r)?.x();
            let iy = iterate(system, &Point::Interval(y), r)?.x();
            let s = self.separation_time(ix, iy, SEP_CAP)?;
            data.push((s, log_ratio));
        }

        // Envelope fit: log |D| against the separation time, then inflate
        // the constant to cover every sample.
        let pts: Vec<(R, R)> = data
            .iter()
            .filter(|(_, d)| *d > R::zero())
            .map(|&(s, d)| (R::of_usize(s as usize), d.ln()))
            .collect();
        let fitted = if pts.len() >= 8 {
            let xs: Vec<R> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<R> = pts.iter().map(|p| p.1).collect();
            match crate::rates::linear_fit(&xs, &ys) {
                Ok((slope, inter)) => {
                    let beta = slope.exp().min(R::of(0.999999));
                    let mut c_env = inter.exp();
                    for &(s, d) in &data {
                        if d > R::zero() {
                            c_env = c_env.max(d / beta.powf(R::of_usize(s as usize)));
                        }
                    }
                    Some(DistortionFit {
                        constant: c_env,
                        beta,
                    })
                }
                Err(_) => None,
            }
        } else {
            None
        };
        Ok(DistortionReport {
            max_log_ratio,
            fit: fitted,
            discarded,
            samples: data.len(),
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DistortionFit<R> {
    /// Envelope constant, inflated to dominate every sample.
    pub constant: R,
    pub beta: R,
}

#[derive(Clone, Debug)]
pub struct DistortionReport<R> {
    pub max_log_ratio: R,
    /// None when the data is degenerate (affine return branches give
    /// identically zero log-ratios).
    pub fit: Option<DistortionFit<R>>,
    pub discarded: usize,
    pub samples: usize,
}
