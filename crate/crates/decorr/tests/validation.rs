//! Independent oracles cross-checking the estimators: exact quadrature for
//! the doubling autocovariance, brute-force first-return statistics on a
//! fine grid, and a hand-rolled transfer matrix for the invariant level
//! weights. Each oracle must stay independent of the implementation path it
//! checks.

use decorr::correlation::{
    estimate_correlation_tower, oracle_doubling_autocov, TowerFunction,
};
use decorr::rates::check_bound;
use decorr::systems::iterate;
use decorr::tower::{build_induced_tower, synth_tower, InducedBuildOptions, TailLaw};
use decorr::{Point, SystemSpec};

/// Exact integral of (2^n x mod 1 - 1/2)(x - 1/2) over [0, 1): piecewise
/// quadratic, integrated with two-point Gauss quadrature per linear piece
/// (exact for polynomials of degree 3).
fn quadrature_autocov(n: u32) -> f64 {
    let pieces = 1u64 << n;
    let scale = pieces as f64;
    let node = 0.5 / 3.0f64.sqrt();
    let mut total = 0.0;
    for j in 0..pieces {
        let a = j as f64 / scale;
        let b = (j + 1) as f64 / scale;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for t in [mid - half * 2.0 * node, mid + half * 2.0 * node] {
            let fx = (scale * t - j as f64) - 0.5; // 2^n t mod 1, centered
            total += half * fx * (t - 0.5);
        }
    }
    total
}

#[test]
fn closed_form_matches_quadrature() {
    for n in 0..=10u32 {
        let q = quadrature_autocov(n);
        let c = oracle_doubling_autocov::<f64>(n);
        assert!(
            (q - c).abs() < 1e-12,
            "n={n}: quadrature {q} vs closed form {c}"
        );
    }
}

#[test]
fn induced_tail_matches_brute_force_first_returns() {
    // Doubling-induced construction against direct orbit measurement: take a
    // fine grid of base points, measure the first return to [1/2, 1) by
    // iteration, and compare the empirical tail with the enumerated one.
    let tower =
        build_induced_tower(&SystemSpec::Doubling, 24, &InducedBuildOptions::default()).unwrap();
    let m = 200_000usize;
    let mut counts = vec![0usize; 16];
    for i in 0..m {
        let z = 0.5 + 0.5 * (i as f64 + 0.5) / m as f64;
        let mut x = z;
        let mut r = 0u32;
        loop {
            x = iterate(&SystemSpec::Doubling, &Point::Interval(x), 1).unwrap().x();
            r += 1;
            if x >= 0.5 || r as usize >= counts.len() {
                break;
            }
        }
        for (n, slot) in counts.iter_mut().enumerate() {
            if r as usize > n {
                *slot += 1;
            }
        }
    }
    for n in 0..10usize {
        let empirical = counts[n] as f64 / m as f64;
        let enumerated = tower.tail_mass(n as u64);
        assert!(
            (empirical - enumerated).abs() < 2.0 / m as f64 * (n as f64 + 1.0) + 1e-5,
            "n={n}: grid {empirical} vs cells {enumerated}"
        );
    }
}

#[test]
fn intermittent_tail_matches_brute_force_first_returns() {
    let sys = SystemSpec::IntermittentCircle { gamma: 0.5, d: 2 };
    let tower = build_induced_tower(&sys, 400, &InducedBuildOptions::default()).unwrap();
    let m = 100_000usize;
    let mut counts = vec![0usize; 64];
    for i in 0..m {
        let z = 0.5 + 0.5 * (i as f64 + 0.5) / m as f64;
        let mut x = z;
        let mut r = 0u32;
        loop {
            x = iterate(&sys, &Point::Interval(x), 1).unwrap().x();
            r += 1;
            if x >= 0.5 || r as usize >= counts.len() {
                break;
            }
        }
        for (n, slot) in counts.iter_mut().enumerate() {
            if r as usize > n {
                *slot += 1;
            }
        }
    }
    for n in [0usize, 1, 3, 7, 15, 31] {
        let empirical = counts[n] as f64 / m as f64;
        let enumerated = tower.tail_mass(n as u64);
        assert!(
            (empirical - enumerated).abs() < 5e-4 + 2.0 * enumerated / (m as f64).sqrt(),
            "n={n}: grid {empirical} vs cells {enumerated}"
        );
    }
}

/// Explicit transfer matrix on (cell, level) states of a synthetic tower:
/// climbing moves mass up one level, the top level redistributes onto
/// level 0 by the base weights. The stored level weights must be exactly
/// stationary for it.
#[test]
fn level_weights_are_transfer_stationary() {
    let tower = synth_tower::<f64>(TailLaw::PolyTail { alpha: 3.0 }, 2, 50, 1.0).unwrap();
    let cells = tower.cells();
    let kac = tower.kac_mass();
    // State index: (cell i, level l) with l < R_i.
    let mut offsets = Vec::with_capacity(cells.len());
    let mut total_states = 0usize;
    for c in cells {
        offsets.push(total_states);
        total_states += c.return_time as usize;
    }
    let mut mu = vec![0.0f64; total_states];
    for (i, c) in cells.iter().enumerate() {
        for l in 0..c.return_time as usize {
            mu[offsets[i] + l] = c.weight / kac;
        }
    }
    // One push through the dynamics.
    let mut pushed = vec![0.0f64; total_states];
    for (i, c) in cells.iter().enumerate() {
        let r = c.return_time as usize;
        for l in 0..r {
            let mass = mu[offsets[i] + l];
            if l + 1 < r {
                pushed[offsets[i] + l + 1] += mass;
            } else {
                for (j, cj) in cells.iter().enumerate() {
                    pushed[offsets[j]] += mass * cj.weight;
                }
            }
        }
    }
    for (a, b) in mu.iter().zip(&pushed) {
        assert!((a - b).abs() < 1e-14, "stationarity violated: {a} vs {b}");
    }
    // And the level marginals match the stored table.
    let levels = tower.invariant_levels().unwrap();
    for (l, &w) in levels.iter().enumerate() {
        let marginal: f64 = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| (c.return_time as usize) > l)
            .map(|(i, _)| mu[offsets[i] + l])
            .sum();
        assert!((marginal - w).abs() < 1e-14, "level {l}");
    }
}

#[test]
fn level_occupancy_matches_invariant_weights() {
    // Long synthetic orbit: occupancy frequencies against the level law.
    let tower = synth_tower::<f64>(TailLaw::ExpTail { theta: 0.5 }, 2, 64, 1e-9).unwrap();
    use decorr::rng::{ChaCha8Rng, SeedableRng};
    use decorr::tower::{OrbitDriver, TowerOrbit};
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut orbit = TowerOrbit::from_invariant(&tower, &mut rng).unwrap();
    let n = 400_000usize;
    let levels = tower.invariant_levels().unwrap();
    let mut freq = vec![0usize; levels.len()];
    for _ in 0..n {
        freq[OrbitDriver::<f64>::level(&orbit) as usize] += 1;
        OrbitDriver::<f64>::step(&mut orbit).unwrap();
    }
    for (l, &w) in levels.iter().enumerate().take(8) {
        let f = freq[l] as f64 / n as f64;
        let tol = 5.0 * (w / n as f64).sqrt() + 1e-3;
        assert!((f - w).abs() < tol, "level {l}: freq {f} vs {w}");
    }
}

#[test]
fn geometric_tower_autocovariance_sits_inside_exponential_envelope() {
    // With a geometric return law the level-0 indicator is uncorrelated at
    // positive lags; that is consistent with (and far inside) the
    // exponential envelope, checked one-sided.
    let tower = synth_tower::<f64>(TailLaw::ExpTail { theta: 0.5 }, 2, 500, 1e-9).unwrap();
    let mut phi = TowerFunction::LevelIndicator(0);
    let mut psi = TowerFunction::LevelIndicator(0);
    let series =
        estimate_correlation_tower(&tower, &mut phi, &mut psi, 24, 500_000, 200, 3).unwrap();
    let bound: Vec<f64> = (0..=24u32).map(|n| 0.5f64.powi(n as i32)).collect();
    let chk = check_bound(&series, &bound, 1.0).unwrap();
    assert!(chk.pass, "max ratio {}", chk.max_ratio);
    // The positive-lag estimates themselves are statistical zeros.
    for n in 1..=24usize {
        assert!(
            series.estimates[n].abs() <= 5.0 * series.std_errors[n].max(1e-7),
            "lag {n} not a statistical zero: {}",
            series.estimates[n]
        );
    }
}

#[test]
fn tower_estimator_annihilates_constants_exactly() {
    let tower = synth_tower::<f64>(TailLaw::PolyTail { alpha: 3.0 }, 2, 1000, 1e-2).unwrap();
    let mut phi = TowerFunction::LevelIndicator(0);
    let mut psi = TowerFunction::Constant(7.5);
    let series =
        estimate_correlation_tower(&tower, &mut phi, &mut psi, 16, 200_000, 100, 9).unwrap();
    for n in 0..=16usize {
        assert!(series.estimates[n].abs() < 1e-12, "lag {n}");
    }
}

#[test]
fn shift_consistency_of_estimators() {
    use decorr::correlation::{estimate_correlation, estimate_correlation_time_avg, sample_srb};
    use decorr::observables::Observable;
    let sys = SystemSpec::IntermittentCircle { gamma: 0.5, d: 2 };
    let bump = decorr::observables::make_observable(
        sys,
        decorr::observables::ModulusClass::Hoelder { alpha: 0.5 },
        Point::Interval(0.25),
    )
    .unwrap();
    let k = 3u64;
    let shifted = Observable::shifted(k, bump.clone());

    // Ensemble estimator: the lag-n covariance of (phi, psi) equals the
    // lag-(n-k) covariance of (phi composed with f^k, psi) exactly, since
    // both average the same products over the same points.
    let ens = sample_srb(&sys, 30_000, 1_000, 4, 91).unwrap();
    let base = estimate_correlation(&bump, &bump, &ens, 8).unwrap();
    let comp = estimate_correlation(&shifted, &bump, &ens, 8 - k as usize).unwrap();
    for n in k as usize..=8 {
        let d = (base.estimates[n] - comp.estimates[n - k as usize]).abs();
        assert!(d < 1e-12, "lag {n}: {d}");
    }

    // Single-orbit estimator: equal up to boundary terms of order k/N.
    let n_points = 100_000usize;
    let base = estimate_correlation_time_avg(
        &bump,
        &bump,
        &sys,
        &Point::Interval(0.41),
        n_points,
        8,
        500,
        0,
    )
    .unwrap();
    let comp = estimate_correlation_time_avg(
        &shifted,
        &bump,
        &sys,
        &Point::Interval(0.41),
        n_points,
        8 - k as usize,
        500,
        0,
    )
    .unwrap();
    for n in k as usize..=8 {
        let d = (base.estimates[n] - comp.estimates[n - k as usize]).abs();
        assert!(
            d < 50.0 * k as f64 / n_points as f64,
            "lag {n}: boundary discrepancy {d}"
        );
    }
}

#[test]
fn separation_time_matches_label_itineraries() {
    // Two base points separate at return s exactly when their tower-label
    // itineraries agree for the first S_s steps; cross-check the two
    // definitions on sampled pairs.
    let sys = SystemSpec::IntermittentCircle { gamma: 0.5, d: 2 };
    let tower = build_induced_tower(&sys, 2_000, &InducedBuildOptions::default()).unwrap();
    use decorr::rng::{ChaCha8Rng, SeedableRng};
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 200 {
        let cell = tower.draw_cell(&mut rng);
        let (lo, hi) = tower.cells()[cell as usize].interval.unwrap();
        let x = lo + (hi - lo) * rng.gen::<f64>();
        let y = lo + (hi - lo) * rng.gen::<f64>();
        let cap = 24u32;
        let s = tower.separation_time(x, y, cap).unwrap();
        if s == cap {
            continue;
        }
        // Independent computation: walk both return orbits, recording the
        // cells; the first disagreement index is the separation time.
        let mut a = x;
        let mut b = y;
        let mut split = None;
        for i in 0..cap {
            let ca = tower.locate_cell(a);
            let cb = tower.locate_cell(b);
            match (ca, cb) {
                (Some(ca), Some(cb)) if ca == cb => {
                    let r = tower.cells()[ca as usize].return_time as u64;
                    a = iterate(&sys, &Point::Interval(a), r).unwrap().x();
                    b = iterate(&sys, &Point::Interval(b), r).unwrap().x();
                }
                _ => {
                    split = Some(i);
                    break;
                }
            }
        }
        assert_eq!(split, Some(s), "separation mismatch for pair in cell {cell}");
        checked += 1;
    }
}

#[test]
fn approximation_report_trivial_for_constants() {
    use decorr::correlation::{verify_approximation, ApproxOptions, Verdict};
    use decorr::observables::Observable;
    let sys = SystemSpec::IntermittentCircle { gamma: 0.5, d: 2 };
    let tower = build_induced_tower(&sys, 500, &InducedBuildOptions::default()).unwrap();
    let c1 = Observable::constant(sys, 2.0);
    let c2 = Observable::constant(sys, -1.0);
    let opts = ApproxOptions {
        orbits: 500,
        burn_in: 8,
        discretize_samples: 2_000,
        delta_budget: 50,
        seed: 4,
    };
    let rep = verify_approximation(&tower, &c1, &c2, &[2, 4], 8, &opts).unwrap();
    assert!(rep.pass);
    for r in &rep.rows {
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.lhs < 1e-12 && r.bound == 0.0);
    }
}

#[test]
fn doubling_fit_recovers_half_rate() {
    use decorr::correlation::{estimate_correlation, sample_srb};
    use decorr::observables::Observable;
    use decorr::rates::{fit_rate, RateFamily, RateLaw};
    let ens = sample_srb(&SystemSpec::Doubling, 1_000_000, 10_000, 16, 20_005).unwrap();
    let saw = Observable::sawtooth(SystemSpec::Doubling).unwrap();
    let series = estimate_correlation(&saw, &saw, &ens, 10).unwrap();
    let fit = fit_rate(
        &series,
        (0, 10),
        &[RateFamily::Exponential, RateFamily::Polynomial],
    )
    .unwrap();
    match fit.model.law {
        RateLaw::Exponential { theta } => {
            assert!((0.45..=0.55).contains(&theta), "theta {theta}");
        }
        other => panic!("selected {other:?}"),
    }
}

#[test]
fn distortion_envelope_on_large_sample() {
    let sys = SystemSpec::IntermittentCircle { gamma: 0.5, d: 2 };
    let tower = build_induced_tower(&sys, 1_000, &InducedBuildOptions::default()).unwrap();
    let rep = tower.distortion_check(100_000, 123).unwrap();
    assert!(rep.samples + rep.discarded == 100_000);
    assert!(rep.discarded == 0, "derivatives stayed finite");
    let fit = rep.fit.expect("nonlinear branches separate pairs");
    assert!(fit.beta < 1.0);
    // The envelope constant is inflated to dominate every sample.
    assert!(rep.max_log_ratio <= fit.constant);
}

#[test]
fn stopping_time_mean_matches_kac_mass() {
    // Law of large numbers along the return chain, cross-checked against
    // the tail-sum identity for the mean return time.
    let sys = SystemSpec::IntermittentCircle { gamma: 0.5, d: 2 };
    let tower = build_induced_tower(&sys, 5_000, &InducedBuildOptions::default()).unwrap();
    use decorr::rng::{ChaCha8Rng, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total_time = 0u64;
    let mut total_returns = 0u64;
    for _ in 0..200 {
        let mut s = tower.draw_invariant_state(&mut rng);
        s.level = 0;
        let st = tower.stopping_times(&s, 500, &mut rng).unwrap();
        total_time += *st.times.last().unwrap();
        total_returns += (st.times.len() - 1) as u64;
    }
    let mean = total_time as f64 / total_returns as f64;
    let kac = tower.kac_mass();
    assert!(
        (mean - kac).abs() < 0.1 * kac,
        "empirical mean return {mean} vs tail-sum {kac}"
    );
}
