//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with its measured quantities. Run with `--nocapture` to
//! see the lines for passing criteria too.

use std::time::Instant;

use decorr::correlation::{
    estimate_correlation, estimate_correlation_tower, oracle_doubling_autocov, sample_srb,
    verify_approximation, ApproxOptions, TowerFunction, Verdict,
};
use decorr::observables::{estimate_modulus, make_observable, Observable, SpaceSampler};
use decorr::rates::{linear_fit, predict_bound, RateFamily, RateLaw, RateModel};
use decorr::rng::{ChaCha8Rng, SeedableRng};
use decorr::tower::{
    build_induced_tower, discretize_observable, synth_tower, InducedBuildOptions, TailLaw,
    TowerOrbit,
};
use decorr::{Point, SystemSpec};

fn report(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "ACCEPTANCE {id} ({name}): {} -- {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            (lo * (hi / lo).powf(t)).round() as u64
        })
        .collect();
    out.dedup();
    out
}

fn circle() -> SystemSpec {
    SystemSpec::IntermittentCircle { gamma: 0.5, d: 2 }
}

#[test]
fn criterion_1_doubling_oracle_exactness() {
    let t0 = Instant::now();
    let ens = sample_srb(&SystemSpec::Doubling, 1_000_000, 10_000, 16, 20_005).unwrap();
    let saw = Observable::sawtooth(SystemSpec::Doubling).unwrap();
    let series = estimate_correlation(&saw, &saw, &ens, 8).unwrap();
    let mut ok = true;
    let mut worst_z = 0.0f64;
    let mut worst_rel = 0.0f64;
    for n in 0..=8u32 {
        let oracle = oracle_doubling_autocov::<f64>(n);
        let err = (series.estimates[n as usize] - oracle).abs();
        let se = series.std_errors[n as usize];
        worst_z = worst_z.max(err / se);
        if err > 3.0 * se {
            ok = false;
        }
        if n <= 6 {
            let rel = err / oracle;
            worst_rel = worst_rel.max(rel);
            if rel >= 0.10 {
                ok = false;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    if secs >= 60.0 {
        ok = false;
    }
    let pass = report(
        1,
        "doubling oracle exactness",
        ok,
        &format!(
            "N=1e6, worst |err|/se = {worst_z:.2} (<= 3), worst rel err n<=6 = {:.1}% (< 10%), runtime {secs:.1}s (< 60s)",
            100.0 * worst_rel
        ),
    );
    assert!(pass);
}

/// Same law family, parameters equal to relative 1e-12 (the caller-side
/// arithmetic for expected parameters can differ from the composition's by
/// one rounding, e.g. alpha * (1/gamma) against alpha / gamma).
fn law_matches(a: &RateLaw<f64>, b: &RateLaw<f64>) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    match (*a, *b) {
        (RateLaw::Exponential { theta: x }, RateLaw::Exponential { theta: y }) => close(x, y),
        (RateLaw::Polynomial { p: x }, RateLaw::Polynomial { p: y }) => close(x, y),
        (RateLaw::LogPolynomial { alpha: x }, RateLaw::LogPolynomial { alpha: y }) => close(x, y),
        (RateLaw::ExpLogPower { alpha: x }, RateLaw::ExpLogPower { alpha: y }) => close(x, y),
        (
            RateLaw::StretchedExp { c: cx, eta: ex },
            RateLaw::StretchedExp { c: cy, eta: ey },
        ) => close(cx, cy) && close(ex, ey),
        _ => false,
    }
}

#[test]
fn criterion_2_corollary_table() {
    let mut ok = true;
    let mut check = |got: &RateLaw<f64>, want: &RateLaw<f64>, case: &str| {
        if !law_matches(got, want) {
            println!("  case {case}: got {got:?}, want {want:?}");
            ok = false;
        }
    };
    // Exponential-base cases, run over several parameter values.
    for theta in [0.3f64, 0.5, 0.8] {
        let delta = RateModel::unit(RateLaw::Exponential { theta });
        let tail = TailLaw::ExpTail { theta };
        for alpha in [0.25f64, 0.5, 1.0] {
            let p = predict_bound(&decorr::ModulusClass::Hoelder { alpha }, &tail, &delta)
                .unwrap();
            // Exponential rate exp(-alpha |ln theta|), i.e. theta^alpha.
            check(
                &p.dominant.law,
                &RateLaw::Exponential {
                    theta: theta.powf(alpha),
                },
                "hoelder/exp",
            );
        }
        for alpha in [0.3f64, 0.7] {
            let p = predict_bound(
                &decorr::ModulusClass::ExpLogPower { alpha },
                &tail,
                &delta,
            )
            .unwrap();
            check(
                &p.dominant.law,
                &RateLaw::StretchedExp {
                    c: theta.ln().abs().powf(alpha),
                    eta: alpha,
                },
                "exp_log_power/exp",
            );
        }
        for alpha in [1.0f64, 2.5] {
            let p = predict_bound(&decorr::ModulusClass::LogPoly { alpha }, &tail, &delta)
                .unwrap();
            check(&p.dominant.law, &RateLaw::Polynomial { p: alpha }, "log_poly/exp");
        }
    }
    // Polynomial-base cases (intermittent class with exponent 1/gamma).
    for gamma in [0.4f64, 0.5, 0.8] {
        let delta = RateModel::unit(RateLaw::Polynomial { p: 1.0 / gamma });
        let tail = TailLaw::PolyTail { alpha: 1.0 / gamma };
        for alpha in [0.25f64, 0.6, 1.0] {
            let p = predict_bound(&decorr::ModulusClass::Hoelder { alpha }, &tail, &delta)
                .unwrap();
            check(
                &p.dominant.law,
                &RateLaw::Polynomial {
                    p: (alpha / gamma).min(1.0 / gamma - 1.0),
                },
                "hoelder/poly",
            );
        }
        for alpha in [0.3f64, 0.7] {
            let p = predict_bound(
                &decorr::ModulusClass::ExpLogPower { alpha },
                &tail,
                &delta,
            )
            .unwrap();
            check(&p.dominant.law, &RateLaw::ExpLogPower { alpha }, "exp_log_power/poly");
        }
        for alpha in [0.8f64, 2.0] {
            let p = predict_bound(&decorr::ModulusClass::LogPoly { alpha }, &tail, &delta)
                .unwrap();
            check(
                &p.dominant.law,
                &RateLaw::LogPolynomial { alpha },
                "log_poly/poly",
            );
        }
    }
    let pass = report(
        2,
        "symbolic bound table",
        ok,
        "all six law compositions reproduced over parameter sweeps",
    );
    assert!(pass);
}

#[test]
fn criterion_3_return_time_tail_slope() {
    let tower = build_induced_tower(&circle(), 10_000, &InducedBuildOptions::default()).unwrap();
    let grid = log_spaced(100.0, 10_000.0, 40);
    let xs: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = grid.iter().map(|&n| tower.tail_mass(n).ln()).collect();
    let (slope, _) = linear_fit(&xs, &ys).unwrap();
    let ok = (slope + 2.0).abs() <= 0.3;
    let pass = report(
        3,
        "return-time tail slope",
        ok,
        &format!("fitted slope {slope:.3}, target -2 +/- 0.3, remainder {:.2e}", tower.remainder_mass()),
    );
    assert!(pass);
}

#[test]
fn criterion_4_diameter_sequence_slope() {
    let tower = build_induced_tower(&circle(), 10_000, &InducedBuildOptions::default()).unwrap();
    let grid = log_spaced(10.0, 1000.0, 16);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &k in &grid {
        let est = tower.delta_bar(k as u32, 300, 40_000 + k).unwrap();
        xs.push((k as f64).ln());
        ys.push(est.value.ln());
    }
    let (slope, _) = linear_fit(&xs, &ys).unwrap();
    let ok = (slope + 2.0).abs() <= 0.4;
    // The refined-cylinder diameters of this family genuinely decay one
    // power faster than the return-time tail: the entry-interval gaps
    // scale like the derivative of the tail, slope -(1 + 1/gamma). The
    // -2 +/- 0.4 target treats the k^(-1/gamma) upper envelope as tight,
    // which the measurement shows it is not; the doubling-map oracle, where
    // envelope and gaps share one exponential rate, reproduces its expected
    // slope exactly (see the unit suite).
    let pass = report(
        4,
        "diameter sequence slope",
        ok,
        &format!("fitted slope {slope:.3}, stated target -2 +/- 0.4 (true exponent -(1+1/gamma) = -3)"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_tower_rate_trichotomy() {
    // Exponential tail: the criterion asks the fit to select the
    // exponential law on the level-0 indicator autocovariance.
    let exp_tower = synth_tower::<f64>(TailLaw::ExpTail { theta: 0.5 }, 2, 2_000, 1e-9).unwrap();
    let mut phi = TowerFunction::LevelIndicator(0);
    let mut psi = TowerFunction::LevelIndicator(0);
    let series = estimate_correlation_tower(
        &exp_tower,
        &mut phi,
        &mut psi,
        40,
        10_000_000,
        1_000,
        50_001,
    )
    .unwrap();
    let exp_fit = decorr::rates::fit_rate(
        &series,
        (1, 40),
        &[RateFamily::Exponential, RateFamily::Polynomial],
    );
    let (exp_ok, exp_detail) = match &exp_fit {
        Ok(f) => (
            matches!(f.model.law, RateLaw::Exponential { .. }),
            format!("selected {}", f.model.law.name()),
        ),
        Err(e) => (false, format!("fit failed: {e}")),
    };

    // Polynomial tail: fitted exponent at least 1.5 (one-sided against the
    // n^(1-alpha) = n^-2 envelope).
    let poly_tower =
        synth_tower::<f64>(TailLaw::PolyTail { alpha: 3.0 }, 2, 100_000, 1e-3).unwrap();
    let mut phi = TowerFunction::LevelIndicator(0);
    let mut psi = TowerFunction::LevelIndicator(0);
    let series = estimate_correlation_tower(
        &poly_tower,
        &mut phi,
        &mut psi,
        60,
        10_000_000,
        1_000,
        50_002,
    )
    .unwrap();
    let poly_fit = decorr::rates::fit_rate(&series, (2, 60), &[RateFamily::Polynomial]);
    let (poly_ok, poly_detail) = match &poly_fit {
        Ok(f) => match f.model.law {
            RateLaw::Polynomial { p } => (p >= 1.5, format!("fitted p = {p:.2} (>= 1.5)")),
            _ => (false, "unexpected law".into()),
        },
        Err(e) => (false, format!("fit failed: {e}")),
    };

    // A geometric return law makes the level process memoryless, so its
    // level-0 autocovariance is identically zero for positive lags and the
    // exponential half has nothing to fit; the criterion is reported as
    // stated.
    let pass = report(
        5,
        "tower rate trichotomy",
        exp_ok && poly_ok,
        &format!("exp case: {exp_detail}; poly case: {poly_detail}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_approximation_inequality() {
    let tower = build_induced_tower(&circle(), 10_000, &InducedBuildOptions::default()).unwrap();
    let phi = make_observable(
        circle(),
        decorr::ModulusClass::Hoelder { alpha: 0.5 },
        Point::Interval(0.2),
    )
    .unwrap();
    let psi = make_observable(
        circle(),
        decorr::ModulusClass::Hoelder { alpha: 0.5 },
        Point::Interval(0.6),
    )
    .unwrap();
    let opts = ApproxOptions {
        orbits: 20_000,
        burn_in: 64,
        discretize_samples: 100_000,
        delta_budget: 400,
        seed: 60_001,
    };
    let rep = verify_approximation(&tower, &phi, &psi, &[2, 4, 8, 16], 64, &opts).unwrap();
    let failures = rep
        .rows
        .iter()
        .filter(|r| r.verdict != Verdict::Pass)
        .count();
    let worst = rep
        .rows
        .iter()
        .map(|r| r.lhs / (r.bound + 3.0 * r.std_error))
        .fold(0.0f64, f64::max);
    let pass = report(
        6,
        "coarse-approximation inequality",
        failures == 0,
        &format!(
            "k in {{2,4,8,16}}, n <= 64: {} rows, worst lhs/bound = {worst:.3e}, delta_hat = {:?}",
            rep.rows.len(),
            rep.delta_hat
                .iter()
                .map(|(k, d)| format!("k{k}:{d:.2e}"))
                .collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_modulus_estimator_exponent() {
    let bump = make_observable(
        circle(),
        decorr::ModulusClass::Hoelder { alpha: 0.5 },
        Point::Interval(0.35),
    )
    .unwrap();
    let grid: Vec<f64> = (0..20)
        .map(|i| 1e-3 * (100.0f64).powf(i as f64 / 19.0))
        .collect();
    let pts = estimate_modulus(&bump, &SpaceSampler::Uniform, &grid, 50_000, 70_001).unwrap();
    let xs: Vec<f64> = pts.iter().map(|p| p.eps.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.r_hat.unwrap().ln()).collect();
    let (slope, _) = linear_fit(&xs, &ys).unwrap();
    let ok = (slope - 0.5).abs() <= 0.05;
    let pass = report(
        7,
        "modulus estimator exponent",
        ok,
        &format!("1e6 pairs, fitted exponent {slope:.4}, target 0.5 +/- 0.05"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_henon_empirical_regime() {
    let sys = SystemSpec::Henon { a: 1.4, b: 0.3 };
    let ens = sample_srb(&sys, 10_000_000, 1_000, 4, 80_001).unwrap();
    let phi = make_observable(
        sys,
        decorr::ModulusClass::Hoelder { alpha: 0.5 },
        Point::Plane(0.0, 0.0),
    )
    .unwrap();
    let psi = make_observable(
        sys,
        decorr::ModulusClass::Hoelder { alpha: 0.5 },
        Point::Plane(0.8, 0.2),
    )
    .unwrap();
    let series = estimate_correlation(&phi, &psi, &ens, 24).unwrap();
    let fit = decorr::rates::fit_rate(
        &series,
        (1, 20),
        &[RateFamily::Exponential, RateFamily::Polynomial],
    );
    let (selected_exp, detail) = match &fit {
        Ok(f) => (
            matches!(f.model.law, RateLaw::Exponential { .. }),
            format!(
                "selected {} (residual {:.2e}, {} censored)",
                f.model.law.name(),
                f.residual,
                f.censored
            ),
        ),
        Err(e) => (false, format!("fit failed: {e}")),
    };
    // Every planar report carries the empirical caveat.
    let caveat = sys.empirical_caveat().unwrap_or_default();
    let report_line = format!("{detail} [{caveat}]");
    let caveat_present = report_line.contains("parameters not verified");
    let pass = report(
        8,
        "planar quadratic map empirical regime",
        selected_exp && caveat_present,
        &report_line,
    );
    assert!(pass);
}

#[test]
fn criterion_9_invariant_suites() {
    let mut ok = true;
    let mut notes: Vec<String> = Vec::new();

    // Constant annihilation, exact to float roundoff.
    {
        let ens = sample_srb(&SystemSpec::Doubling, 100_000, 1_000, 8, 90_001).unwrap();
        let saw = Observable::sawtooth(SystemSpec::Doubling).unwrap();
        let c = Observable::constant(SystemSpec::Doubling, 3.0);
        let s = estimate_correlation(&saw, &c, &ens, 8).unwrap();
        let worst = s.estimates.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if worst > 1e-12 {
            ok = false;
        }
        notes.push(format!("constant annihilation {worst:.1e}"));
    }

    // Projection commutes with the dynamics on 1e5 sampled states.
    {
        let tower =
            build_induced_tower(&circle(), 10_000, &InducedBuildOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(90_002);
        let mut worst = 0.0f64;
        let mut checked = 0usize;
        while checked < 100_000 {
            let s = tower.draw_invariant_state(&mut rng);
            let here = tower.project(&s).unwrap();
            let ambient = decorr::systems::step(&circle(), &here).unwrap().x();
            match tower.tower_step(&s, &mut rng) {
                Ok(next) => {
                    let there = tower.project(&next).unwrap().x();
                    worst = worst.max((there - ambient).abs() / ambient.abs().max(1e-6));
                    checked += 1;
                }
                Err(_) => continue,
            }
        }
        if worst > 1e-10 {
            ok = false;
        }
        notes.push(format!("semiconjugacy rel {worst:.1e}"));

        // Kac normalization, exact arithmetic identity on stored weights.
        let kac = tower.kac_mass();
        let direct: f64 = tower
            .cells()
            .iter()
            .map(|c| c.return_time as f64 * c.weight)
            .sum::<f64>()
            + (tower.max_return() as f64 + 1.0) * tower.remainder_mass();
        let kac_err = (kac - direct).abs() / kac;
        let levels = tower.invariant_levels().unwrap();
        let level_err = (levels.iter().sum::<f64>() - 1.0).abs();
        if kac_err > 1e-9 || level_err > 1e-12 {
            ok = false;
        }
        notes.push(format!("kac {kac_err:.1e}, levels {level_err:.1e}"));

        // Stopping-time recursion, exact integer identity.
        let mut rng = ChaCha8Rng::seed_from_u64(90_003);
        let mut recursion_ok = true;
        for _ in 0..200 {
            let mut s = tower.draw_invariant_state(&mut rng);
            s.level = 0;
            let st = tower.stopping_times(&s, 50, &mut rng).unwrap();
            let mut z = s.coord.unwrap();
            for w in st.times.windows(2) {
                let cell = match tower.locate_cell(z) {
                    Some(c) => c,
                    None => break,
                };
                let r = tower.return_time(cell).unwrap() as u64;
                if w[1] - w[0] != r {
                    recursion_ok = false;
                }
                z = decorr::systems::iterate(&circle(), &Point::Interval(z), r)
                    .unwrap()
                    .x();
            }
        }
        if !recursion_ok {
            ok = false;
        }
        notes.push(format!("stopping recursion exact: {recursion_ok}"));
    }

    // Partition nesting, exact on an enumerable tower.
    {
        let small = build_induced_tower(
            &SystemSpec::Doubling,
            3,
            &InducedBuildOptions::default(),
        )
        .unwrap();
        let mut nest_ok = true;
        for n in 0..4u32 {
            let coarse = small.tower_partition(n, 1_000_000).unwrap();
            let fine = small.tower_partition(n + 1, 1_000_000).unwrap();
            for e in &fine {
                let parents = coarse
                    .iter()
                    .filter(|p| {
                        p.cell == e.cell
                            && p.level == e.level
                            && e.word.len() >= p.word.len()
                            && e.word[..p.word.len()] == p.word[..]
                    })
                    .count();
                if parents != 1 {
                    nest_ok = false;
                }
            }
        }
        if !nest_ok {
            ok = false;
        }
        notes.push(format!("partition nesting exact: {nest_ok}"));
    }

    // Determinism: identical seeds give byte-identical artifacts.
    {
        let a = sample_srb(&circle(), 20_000, 1_000, 8, 90_004).unwrap();
        let b = sample_srb(&circle(), 20_000, 1_000, 8, 90_004).unwrap();
        let same_points = a.points == b.points;
        let t1 = build_induced_tower(&circle(), 500, &InducedBuildOptions::default()).unwrap();
        let t2 = build_induced_tower(&circle(), 500, &InducedBuildOptions::default()).unwrap();
        let mut f1 = Vec::new();
        let mut f2 = Vec::new();
        decorr::tower::io::write_tower(&mut f1, &t1, false).unwrap();
        decorr::tower::io::write_tower(&mut f2, &t2, false).unwrap();
        let same_tower = f1 == f2;
        if !(same_points && same_tower) {
            ok = false;
        }
        notes.push(format!("determinism: points {same_points}, tower bytes {same_tower}"));
    }

    // Coarse estimator: a constant second function annihilates exactly.
    {
        let tower =
            build_induced_tower(&circle(), 2_000, &InducedBuildOptions::default()).unwrap();
        let bump = make_observable(
            circle(),
            decorr::ModulusClass::Hoelder { alpha: 0.5 },
            Point::Interval(0.3),
        )
        .unwrap();
        let mut coarse = discretize_observable(&tower, &bump, 2, 20_000, 90_005).unwrap();
        let mut phi = TowerFunction::Coarse(&mut coarse);
        let mut psi = TowerFunction::Constant(2.0);
        let s =
            estimate_correlation_tower(&tower, &mut phi, &mut psi, 8, 50_000, 100, 90_006)
                .unwrap();
        let worst = s.estimates.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if worst > 1e-12 {
            ok = false;
        }
        notes.push(format!("tower constant annihilation {worst:.1e}"));
    }

    let joined = notes.join("; ");
    let pass = report(9, "invariant suites", ok, &joined);
    assert!(pass);

    // Keep the orbit machinery honest: a synthetic orbit refuses projection.
    let syn = synth_tower::<f64>(TailLaw::ExpTail { theta: 0.5 }, 2, 100, 1e-9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let orbit = TowerOrbit::from_invariant(&syn, &mut rng).unwrap();
    assert!(decorr::tower::OrbitDriver::<f64>::projected(&orbit).is_none());
}
