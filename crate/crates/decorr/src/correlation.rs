//! Correlation estimation: ensembles sampled from the physical measure,
//! lag-covariance estimators with batch-means error bars, the exact doubling
//! oracle, tower-orbit estimators, and the coarse-approximation comparison.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::Observable;
use crate::real::Real;
use crate::systems::{
    iterate, step, trapping_region, Point, SystemSpec, TrapOptions, ESCAPE_RADIUS,
};
use crate::tower::{CoarseObservable, OrbitDriver, TowerModel, TowerOrbit};

/// Points sampled from the empirical physical measure of one system.
#[derive(Clone, Debug)]
pub struct Ensemble<R> {
    pub system: SystemSpec<R>,
    pub points: Vec<Point<R>>,
    pub burn_in: u64,
    pub spacing: u64,
    pub seed: u64,
    /// Seeds that escaped during burn-in or collection and were excluded.
    pub escaped: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    EnsembleShift,
    TimeAverage,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::EnsembleShift => "ensemble",
            EstimatorKind::TimeAverage => "time_average",
        }
    }
}

/// Signed lag covariances with batch-means standard errors. Index n holds
/// the estimate of the covariance between the observable pushed n steps and
/// the second observable; the reported decay quantity is its absolute value.
#[derive(Clone, Debug)]
pub struct CorrelationSeries<R> {
    pub estimates: Vec<R>,
    pub std_errors: Vec<R>,
    pub estimator: EstimatorKind,
    pub sample_size: usize,
    pub seed: u64,
}

impl<R: Real> CorrelationSeries<R> {
    pub fn n_max(&self) -> usize {
        self.estimates.len().saturating_sub(1)
    }

    pub fn abs_at(&self, n: usize) -> R {
        self.estimates[n].abs()
    }

    /// CSV with the stable column set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,estimate,std_error,estimator,N,seed\n");
        for n in 0..self.estimates.len() {
            out.push_str(&format!(
                "{n},{:?},{:?},{},{},{}\n",
                self.estimates[n].as_f64(),
                self.std_errors[n].as_f64(),
                self.estimator.name(),
                self.sample_size,
                self.seed
            ));
        }
        out
    }
}

/// Exact autocovariance of the centered sawtooth under the doubling map.
pub fn oracle_doubling_autocov<R: Real>(n: u32) -> R {
    R::of(0.5).powi(n as i32) / R::of(12.0)
}

// ---------------------------------------------------------------------------
// Ensemble sampling

/// A bit tape: the symbolic representation of a Lebesgue-typical doubling
/// orbit. Reading 53 bits at position t gives the orbit point at time t;
/// naive float iteration would instead exhaust the mantissa within 53 steps
/// and collapse to 0.
struct BitTape {
    words: Vec<u64>,
    bits: usize,
}

impl BitTape {
    fn generate(bits: usize, rng: &mut ChaCha8Rng) -> BitTape {
        let n_words = bits / 64 + 2;
        let words = (0..n_words).map(|_| rng.gen::<u64>()).collect();
        BitTape { words, bits }
    }

    fn value_at(&self, pos: usize) -> f64 {
        debug_assert!(pos + 53 <= self.bits + 64);
        let i = pos / 64;
        let off = pos % 64;
        let joined = ((self.words[i] as u128) << 64) | self.words[i + 1] as u128;
        let mantissa = ((joined >> (128 - off - 53)) & ((1u128 << 53) - 1)) as u64;
        mantissa as f64 / (1u64 << 53) as f64
    }
}

/// Sample points from the empirical physical measure: uniform seeds, a
/// burn-in, then one point kept every `spacing` steps along the orbit.
/// Planar orbits that blow up are excluded and counted.
pub fn sample_srb<R: Real>(
    system: &SystemSpec<R>,
    n_points: usize,
    burn_in: u64,
    spacing: u64,
    rng_seed: u64,
) -> Result<Ensemble<R>> {
    system.validate()?;
    if n_points == 0 {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    if burn_in == 0 || spacing == 0 {
        return Err(Error::InvalidParameter(
            "burn-in and spacing must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut points = Vec::with_capacity(n_points);
    let mut escaped = 0u64;

    match system {
        SystemSpec::Doubling => {
            let bits = burn_in as usize + (n_points - 1) * spacing as usize + 53;
            let tape = BitTape::generate(bits, &mut rng);
            for i in 0..n_points {
                let pos = burn_in as usize + i * spacing as usize;
                points.push(Point::Interval(R::of(tape.value_at(pos))));
            }
        }
        SystemSpec::IntermittentCircle { .. } | SystemSpec::IntermittentSolenoid { .. } => {
            let mut p = uniform_point(system, &mut rng);
            p = iterate(system, &p, burn_in)?;
            points.push(p);
            for _ in 1..n_points {
                p = iterate(system, &p, spacing)?;
                points.push(p);
            }
        }
        SystemSpec::Henon { .. } => {
            let seed_box = trapping_region(system, &TrapOptions::default(), rng_seed ^ 0x5eed)?;
            let radius = R::of(ESCAPE_RADIUS);
            let mut attempts = 0u64;
            'outer: while points.len() < n_points {
                attempts += 1;
                if attempts >= 20 && escaped * 2 > attempts {
                    return Err(Error::EscapeRate {
                        fraction: escaped as f64 / attempts as f64,
                        limit: 0.5,
                    });
                }
                let mut p = seed_box.sample(&mut rng);
                for _ in 0..burn_in {
                    p = step(system, &p)?;
                    if p.x().abs() > radius {
                        escaped += 1;
                        continue 'outer;
                    }
                }
                loop {
                    points.push(p);
                    if points.len() == n_points {
                        break 'outer;
                    }
                    for _ in 0..spacing {
                        p = step(system, &p)?;
                        if p.x().abs() > radius {
                            escaped += 1;
                            continue 'outer;
                        }
                    }
                }
            }
        }
    }
    Ok(Ensemble {
        system: *system,
        points,
        burn_in,
        spacing,
        seed: rng_seed,
        escaped,
    })
}

fn uniform_point<R: Real>(system: &SystemSpec<R>, rng: &mut ChaCha8Rng) -> Point<R> {
    match system {
        SystemSpec::IntermittentCircle { .. } | SystemSpec::Doubling => {
            Point::Interval(R::of(rng.gen::<f64>()))
        }
        SystemSpec::IntermittentSolenoid { .. } => loop {
            let y = rng.gen::<f64>() * 2.0 - 1.0;
            let z = rng.gen::<f64>() * 2.0 - 1.0;
            if y * y + z * z <= 1.0 {
                break Point::Solenoid(R::of(rng.gen::<f64>()), R::of(y), R::of(z));
            }
        },
        SystemSpec::Henon { .. } => unreachable!("planar seeds come from the seed box"),
    }
}

// ---------------------------------------------------------------------------
// Estimators

const BATCHES: usize = 32;

struct BatchAcc<R> {
    cross: Vec<R>,
    sum_phi: Vec<R>,
    sum_psi: R,
    count: usize,
}

/// Lag covariance over an ensemble:
/// cross moment of (phi pushed n steps, psi) minus the product of the
/// separate means, for n = 0..=n_max. Standard errors by batch means over
/// 32 contiguous batches.
pub fn estimate_correlation<R: Real>(
    phi: &Observable<R>,
    psi: &Observable<R>,
    ensemble: &Ensemble<R>,
    n_max: usize,
) -> Result<CorrelationSeries<R>> {
    if ensemble.points.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if phi.system() != &ensemble.system || psi.system() != &ensemble.system {
        return Err(Error::InvalidParameter(
            "observables and ensemble disagree on the system".into(),
        ));
    }
    let n_pts = ensemble.points.len();
    let b = BATCHES.min(n_pts);
    let system = ensemble.system;

    let accs: Vec<BatchAcc<R>> = (0..b)
        .into_par_iter()
        .map(|bi| -> Result<BatchAcc<R>> {
            let lo = bi * n_pts / b;
            let hi = (bi + 1) * n_pts / b;
            let mut acc = BatchAcc {
                cross: vec![R::zero(); n_max + 1],
                sum_phi: vec![R::zero(); n_max + 1],
                sum_psi: R::zero(),
                count: hi - lo,
            };
            for i in lo..hi {
                let x = ensemble.points[i];
                let psi_x = psi.eval(&x)?;
                acc.sum_psi = acc.sum_psi + psi_x;
                let mut cur = x;
                for n in 0..=n_max {
                    let phi_n = phi.eval(&cur)?;
                    acc.cross[n] = acc.cross[n] + phi_n * psi_x;
                    acc.sum_phi[n] = acc.sum_phi[n] + phi_n;
                    if n < n_max {
                        cur = step(&system, &cur)?;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    series_from_batches(accs, n_max, EstimatorKind::EnsembleShift, ensemble.seed)
}

fn series_from_batches<R: Real>(
    accs: Vec<BatchAcc<R>>,
    n_max: usize,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<CorrelationSeries<R>> {
    let total: usize = accs.iter().map(|a| a.count).sum();
    let n_r = R::of_usize(total);
    let mut estimates = Vec::with_capacity(n_max + 1);
    let mut std_errors = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let cross: R = accs.iter().map(|a| a.cross[n]).sum();
        let sphi: R = accs.iter().map(|a| a.sum_phi[n]).sum();
        let spsi: R = accs.iter().map(|a| a.sum_psi).sum();
        let est = cross / n_r - (sphi / n_r) * (spsi / n_r);
        estimates.push(est);

        let vals: Vec<R> = accs
            .iter()
            .filter(|a| a.count > 0)
            .map(|a| {
                let nb = R::of_usize(a.count);
                a.cross[n] / nb - (a.sum_phi[n] / nb) * (a.sum_psi / nb)
            })
            .collect();
        std_errors.push(batch_std_error(&vals));
    }
    Ok(CorrelationSeries {
        estimates,
        std_errors,
        estimator,
        sample_size: total,
        seed,
    })
}

fn batch_std_error<R: Real>(vals: &[R]) -> R {
    let b = vals.len();
    if b < 2 {
        return R::zero();
    }
    let br = R::of_usize(b);
    let mean = vals.iter().copied().sum::<R>() / br;
    let var = vals
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<R>()
        / R::of_usize(b - 1);
    (var / br).sqrt()
}

/// Lag covariance along a single orbit (cross-check estimator). The window
/// is aligned so every lag averages exactly `n_points` products.
pub fn estimate_correlation_time_avg<R: Real>(
    phi: &Observable<R>,
    psi: &Observable<R>,
    system: &SystemSpec<R>,
    start: &Point<R>,
    n_points: usize,
    n_max: usize,
    burn_in: u64,
    seed_label: u64,
) -> Result<CorrelationSeries<R>> {
    if n_points == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut p = iterate(system, start, burn_in)?;
    // Values for times 0..n_points+n_max; psi ring buffer of n_max+1 slots.
    let mut psi_ring = vec![R::zero(); n_max + 1];
    let b = BATCHES.min(n_points);
    let mut accs: Vec<BatchAcc<R>> = (0..b)
        .map(|bi| BatchAcc {
            cross: vec![R::zero(); n_max + 1],
            sum_phi: vec![R::zero(); n_max + 1],
            sum_psi: R::zero(),
            count: (bi + 1) * n_points / b - bi * n_points / b,
        })
        .collect();
    for t in 0..(n_points + n_max) {
        let phi_t = phi.eval(&p)?;
        let psi_t = psi.eval(&p)?;
        let slot = t % (n_max + 1);
        psi_ring[slot] = psi_t;
        if t >= n_max {
            let i = t - n_max; // pair index 0..n_points
            let acc = &mut accs[i * b / n_points];
            for n in 0..=n_max {
                let psi_lag = psi_ring[(t - n) % (n_max + 1)];
                acc.cross[n] = acc.cross[n] + phi_t * psi_lag;
                acc.sum_phi[n] = acc.sum_phi[n] + phi_t;
            }
            // One shared psi window (lag n_max); the per-lag windows differ
            // from it by O(n_max / n_points) boundary terms.
            acc.sum_psi = acc.sum_psi + psi_ring[(t - n_max) % (n_max + 1)];
        }
        p = step(system, &p)?;
    }
    series_from_batches(accs, n_max, EstimatorKind::TimeAverage, seed_label)
}

// ---------------------------------------------------------------------------
// Tower estimators

/// Functions on tower states accepted by the tower estimators. The coarse
/// variant is piecewise constant on dynamical cylinders; the lifted variant
/// composes an ambient observable with the projection (induced towers).
pub enum TowerFunction<'a, R: Real> {
    Coarse(&'a mut CoarseObservable<R>),
    LevelIndicator(u32),
    Constant(R),
    Lifted(&'a Observable<R>),
}

impl<R: Real> TowerFunction<'_, R> {
    fn eval(&mut self, orbit: &mut TowerOrbit<R>) -> Result<R> {
        match self {
            TowerFunction::Coarse(c) => c.eval_on(orbit),
            TowerFunction::LevelIndicator(l) => Ok(if orbit.level() == *l {
                R::one()
            } else {
                R::zero()
            }),
            TowerFunction::Constant(c) => Ok(*c),
            TowerFunction::Lifted(obs) => {
                let p = orbit.projected().ok_or(Error::WrongSystem {
                    required: "induced tower",
                    got: "synthetic tower",
                })?;
                obs.eval(&p)
            }
        }
    }
}

/// Lag covariance of two tower functions along one long tower orbit started
/// from the invariant level law.
pub fn estimate_correlation_tower<R: Real>(
    tower: &TowerModel<R>,
    phi: &mut TowerFunction<R>,
    psi: &mut TowerFunction<R>,
    n_max: usize,
    samples: usize,
    burn_in: usize,
    rng_seed: u64,
) -> Result<CorrelationSeries<R>> {
    if samples == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut orbit = TowerOrbit::from_invariant(tower, &mut rng)?;
    for _ in 0..burn_in {
        orbit.step()?;
    }
    let mut psi_ring = vec![R::zero(); n_max + 1];
    let b = BATCHES.min(samples);
    let mut accs: Vec<BatchAcc<R>> = (0..b)
        .map(|bi| BatchAcc {
            cross: vec![R::zero(); n_max + 1],
            sum_phi: vec![R::zero(); n_max + 1],
            sum_psi: R::zero(),
            count: (bi + 1) * samples / b - bi * samples / b,
        })
        .collect();
    for t in 0..(samples + n_max) {
        let phi_t = phi.eval(&mut orbit)?;
        let psi_t = psi.eval(&mut orbit)?;
        psi_ring[t % (n_max + 1)] = psi_t;
        if t >= n_max {
            let i = t - n_max;
            let acc = &mut accs[i * b / samples];
            for n in 0..=n_max {
                let psi_lag = psi_ring[(t - n) % (n_max + 1)];
                acc.cross[n] = acc.cross[n] + phi_t * psi_lag;
                acc.sum_phi[n] = acc.sum_phi[n] + phi_t;
            }
            acc.sum_psi = acc.sum_psi + psi_ring[(t - n_max) % (n_max + 1)];
        }
        orbit.step()?;
    }
    series_from_batches(accs, n_max, EstimatorKind::TimeAverage, rng_seed)
}

// ---------------------------------------------------------------------------
// Coarse-approximation comparison

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApproxRow<R> {
    pub k: u32,
    pub n: usize,
    /// |difference of the two lag covariances|.
    pub lhs: R,
    /// 2 (sup phi + sup psi) max(modulus at delta_k).
    pub bound: R,
    pub std_error: R,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct ApproxReport<R> {
    pub rows: Vec<ApproxRow<R>>,
    pub delta_hat: Vec<(u32, R)>,
    pub pass: bool,
    pub inconclusive: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ApproxOptions {
    pub orbits: usize,
    pub burn_in: usize,
    pub discretize_samples: usize,
    pub delta_budget: usize,
    pub seed: u64,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            orbits: 20_000,
            burn_in: 64,
            discretize_samples: 100_000,
            delta_budget: 400,
            seed: 0xD1FF,
        }
    }
}

/// Compare the lag covariance of lifted observables with that of their
/// cylinder coarsenings on the same tower orbits, against the modulus bound
/// evaluated at the measured cylinder diameter.
///
/// Evaluating both series on shared orbits makes the difference estimate
/// nearly noise-free; the residual batch error enters the tolerance as
/// three standard errors of the difference.
pub fn verify_approximation<R: Real>(
    tower: &TowerModel<R>,
    phi: &Observable<R>,
    psi: &Observable<R>,
    k_grid: &[u32],
    n_max: usize,
    opts: &ApproxOptions,
) -> Result<ApproxReport<R>> {
    if !tower.is_induced() {
        return Err(Error::WrongSystem {
            required: "induced tower",
            got: "synthetic tower",
        });
    }
    let prefactor = R::of(2.0) * (phi.sup_norm() + psi.sup_norm());
    let mut coarse: Vec<(u32, CoarseObservable<R>, CoarseObservable<R>, R)> = Vec::new();
    for (i, &k) in k_grid.iter().enumerate() {
        let pk = crate::tower::discretize_observable(
            tower,
            phi,
            k,
            opts.discretize_samples,
            opts.seed ^ (0xA0 + i as u64),
        )?;
        let sk = crate::tower::discretize_observable(
            tower,
            psi,
            k,
            opts.discretize_samples,
            opts.seed ^ (0xB0 + i as u64),
        )?;
        let delta = tower
            .delta_n(k, opts.delta_budget, opts.seed ^ (0xC0 + i as u64))?
            .value;
        coarse.push((k, pk, sk, delta));
    }

    // Shared-orbit ensemble pass. For each orbit: lifted pair and, per k,
    // the coarse pair, all at lags 0..=n_max against the time-0 value.
    let n_k = coarse.len();
    let b = BATCHES.min(opts.orbits);
    // Accumulators: per batch, per series (0 = lifted, 1.. = coarse k),
    // cross[n], sum_phi[n], sum_psi.
    let mut cross = vec![vec![vec![R::zero(); n_max + 1]; n_k + 1]; b];
    let mut sum_phi = vec![vec![vec![R::zero(); n_max + 1]; n_k + 1]; b];
    let mut sum_psi = vec![vec![R::zero(); n_k + 1]; b];
    let mut counts = vec![0usize; b];

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for oi in 0..opts.orbits {
        let bi = oi * b / opts.orbits;
        let mut orbit = TowerOrbit::from_invariant(tower, &mut rng)?;
        for _ in 0..opts.burn_in {
            orbit.step()?;
        }
        let p0 = orbit.projected().ok_or(Error::WrongSystem {
            required: "induced tower",
            got: "synthetic tower",
        })?;
        let psi0 = psi.eval(&p0)?;
        let mut psi0_k = Vec::with_capacity(n_k);
        for (_, _, sk, _) in coarse.iter_mut() {
            psi0_k.push(sk.eval_on(&mut orbit)?);
        }
        sum_psi[bi][0] = sum_psi[bi][0] + psi0;
        for (j, v) in psi0_k.iter().enumerate() {
            sum_psi[bi][j + 1] = sum_psi[bi][j + 1] + *v;
        }
        counts[bi] += 1;
        for n in 0..=n_max {
            let pt = orbit.projected().expect("induced orbit");
            let phi_t = phi.eval(&pt)?;
            cross[bi][0][n] = cross[bi][0][n] + phi_t * psi0;
            sum_phi[bi][0][n] = sum_phi[bi][0][n] + phi_t;
            for (j, (_, pk, _, _)) in coarse.iter_mut().enumerate() {
                let v = pk.eval_on(&mut orbit)?;
                cross[bi][j + 1][n] = cross[bi][j + 1][n] + v * psi0_k[j];
                sum_phi[bi][j + 1][n] = sum_phi[bi][j + 1][n] + v;
            }
            if n < n_max {
                orbit.step()?;
            }
        }
    }

    // Per-batch difference lifted-minus-coarse, then batch means.
    let mut rows = Vec::new();
    let mut pass = true;
    let mut inconclusive = 0usize;
    let three = R::of(3.0);
    for (j, (k, _, _, delta)) in coarse.iter().enumerate() {
        let m_phi = phi.declared_modulus(*delta).ok_or_else(|| {
            Error::InvalidParameter("first observable has no declared modulus".into())
        })?;
        let m_psi = psi.declared_modulus(*delta).ok_or_else(|| {
            Error::InvalidParameter("second observable has no declared modulus".into())
        })?;
        let bound = prefactor * m_phi.max(m_psi);
        for n in 0..=n_max {
            let mut diffs = Vec::with_capacity(b);
            for bi in 0..b {
                if counts[bi] == 0 {
                    continue;
                }
                let nb = R::of_usize(counts[bi]);
                let lifted = cross[bi][0][n] / nb
                    - (sum_phi[bi][0][n] / nb) * (sum_psi[bi][0] / nb);
                let coarse_v = cross[bi][j + 1][n] / nb
                    - (sum_phi[bi][j + 1][n] / nb) * (sum_psi[bi][j + 1] / nb);
                diffs.push(lifted - coarse_v);
            }
            let total = R::of_usize(diffs.len());
            let mean_diff = diffs.iter().copied().sum::<R>() / total;
            let se = batch_std_error(&diffs);
            let lhs = mean_diff.abs();
            let verdict = if lhs <= bound + three * se {
                Verdict::Pass
            } else if three * se > bound {
                inconclusive += 1;
                Verdict::Inconclusive
            } else {
                pass = false;
                Verdict::Fail
            };
            rows.push(ApproxRow {
                k: *k,
                n,
                lhs,
                bound,
                std_error: se,
                verdict,
            });
        }
    }
    Ok(ApproxReport {
        rows,
        delta_hat: coarse.iter().map(|(k, _, _, d)| (*k, *d)).collect(),
        pass,
        inconclusive,
    })
}
