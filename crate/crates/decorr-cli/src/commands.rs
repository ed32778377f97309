use std::fmt::Write as _;
use std::path::Path;

use decorr::correlation::{
    estimate_correlation, sample_srb, verify_approximation, ApproxOptions, CorrelationSeries,
    Ensemble,
};
use decorr::observables::Observable;
use decorr::rates::{check_bound, predict_bound, RateLaw, RateModel};
use decorr::systems::{step, Point, SystemSpec};
use decorr::tower::{build_induced_tower, synth_tower, InducedBuildOptions, TowerModel};
use decorr::ModulusClass;

use crate::config::ExperimentConfig;
use crate::output::ExperimentDir;
use crate::{
    CmdResult, Failure, PredictArgs, RunArgs, EXIT_CONFIG, EXIT_CONSTRUCTION,
    EXIT_MISSING_INPUT, EXIT_UNSUPPORTED,
};

struct Ctx {
    config: ExperimentConfig,
    dir: ExperimentDir,
}

fn code_of(e: &decorr::Error) -> u8 {
    use decorr::Error::*;
    match e {
        Construction(_) | TruncationMass { .. } | EscapeRate { .. } => EXIT_CONSTRUCTION,
        UnsupportedComposition(_) => EXIT_UNSUPPORTED,
        _ => 1,
    }
}

fn lib_err(e: decorr::Error) -> Failure {
    Failure::new(code_of(&e), e.to_string())
}

fn setup(args: &RunArgs) -> Result<Ctx, Failure> {
    let threads = crate::resolve_threads(args.threads);
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();

    let raw = std::fs::read_to_string(&args.config).map_err(|e| {
        Failure::new(
            EXIT_CONFIG,
            format!("cannot read config {}: {e}", args.config.display()),
        )
    })?;
    let mut config: ExperimentConfig = serde_json::from_str(&raw).map_err(|e| {
        Failure::new(
            EXIT_CONFIG,
            format!(
                "config {} line {} column {}: {e}",
                args.config.display(),
                e.line(),
                e.column()
            ),
        )
    })?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.display().to_string());
    }
    config
        .validate()
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let out = config.output.clone().unwrap_or_else(|| ".".into());
    let dir = ExperimentDir::acquire(Path::new(&out))
        .map_err(|e| Failure::new(EXIT_CONSTRUCTION, e.to_string()))?;
    Ok(Ctx { config, dir })
}

fn write_meta(ctx: &Ctx, command: &str, extras: serde_json::Value) -> Result<(), Failure> {
    let mut notes: Vec<&str> = Vec::new();
    if let Some(c) = ctx.config.system.empirical_caveat() {
        notes.push(c);
    }
    let doc = serde_json::json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "command": command,
        "config": ctx.config,
        "notes": notes,
        "results": extras,
    });
    ctx.dir
        .write("meta.json", &serde_json::to_string_pretty(&doc).unwrap())
        .map_err(|e| Failure::new(1, e.to_string()))?;
    Ok(())
}

fn ensemble_csv(ens: &Ensemble<f64>) -> String {
    let mut s = String::new();
    match ens.system.dim() {
        1 => s.push_str("x\n"),
        2 => s.push_str("x,y\n"),
        _ => s.push_str("x,y,z\n"),
    }
    for p in &ens.points {
        match *p {
            Point::Interval(x) => {
                let _ = writeln!(s, "{x:?}");
            }
            Point::Plane(x, y) => {
                let _ = writeln!(s, "{x:?},{y:?}");
            }
            Point::Solenoid(x, y, z) => {
                let _ = writeln!(s, "{x:?},{y:?},{z:?}");
            }
        }
    }
    s
}

fn load_ensemble(ctx: &Ctx) -> Result<Ensemble<f64>, Failure> {
    let path = ctx.dir.file("ensemble.csv");
    let raw = std::fs::read_to_string(&path).map_err(|e| {
        Failure::new(
            EXIT_MISSING_INPUT,
            format!("missing ensemble input {}: {e}", path.display()),
        )
    })?;
    let mut lines = raw.lines();
    let header = lines.next().unwrap_or("");
    let dim = header.split(',').count();
    if dim != ctx.config.system.dim() {
        return Err(Failure::new(
            EXIT_MISSING_INPUT,
            format!(
                "ensemble has {dim} columns, system {} expects {}",
                ctx.config.system.name(),
                ctx.config.system.dim()
            ),
        ));
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let vals: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
        let vals = vals.map_err(|e| {
            Failure::new(EXIT_MISSING_INPUT, format!("ensemble row {}: {e}", i + 2))
        })?;
        points.push(match vals.len() {
            1 => Point::Interval(vals[0]),
            2 => Point::Plane(vals[0], vals[1]),
            _ => Point::Solenoid(vals[0], vals[1], vals[2]),
        });
    }
    Ok(Ensemble {
        system: ctx.config.system,
        points,
        burn_in: ctx.config.estimator.burn_in,
        spacing: ctx.config.estimator.spacing,
        seed: ctx.config.seed,
        escaped: 0,
    })
}

fn built_observables(ctx: &Ctx) -> Result<Vec<Observable<f64>>, Failure> {
    ctx.config
        .observables
        .iter()
        .map(|spec| {
            spec.build(&ctx.config.system)
                .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))
        })
        .collect()
}

pub fn simulate(args: &RunArgs) -> CmdResult {
    let ctx = setup(args)?;
    let est = &ctx.config.estimator;
    let ens = sample_srb(
        &ctx.config.system,
        est.n_points,
        est.burn_in,
        est.spacing,
        ctx.config.seed,
    )
    .map_err(lib_err)?;
    ctx.dir
        .write("ensemble.csv", &ensemble_csv(&ens))
        .map_err(|e| Failure::new(1, e.to_string()))?;
    write_meta(
        &ctx,
        "simulate",
        serde_json::json!({"points": ens.points.len(), "escaped": ens.escaped}),
    )?;
    println!(
        "simulate: {} points, {} escaped, seed {}",
        ens.points.len(),
        ens.escaped,
        ctx.config.seed
    );
    Ok(())
}

/// Measured-diameter bound overlay: slack * (2 (sup phi + sup psi)
/// max(modulus at delta_n) + tail mass at n), per lag.
fn measured_bound(
    ctx: &Ctx,
    phi: &Observable<f64>,
    psi: &Observable<f64>,
    n_max: usize,
) -> Result<Vec<f64>, Failure> {
    if !ctx.config.system.is_circle_type() {
        return Err(Failure::new(
            EXIT_UNSUPPORTED,
            "bound overlay needs a circle-type system (the planar mixing rate is existential)",
        ));
    }
    let tower = build_induced_tower(
        &ctx.config.system,
        ctx.config.tower.depth,
        &InducedBuildOptions::default(),
    )
    .map_err(lib_err)?;
    let prefactor = 2.0 * (phi.sup_norm() + psi.sup_norm());
    let budget = ctx.config.tower.sample_budget;
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let delta = tower
            .delta_n(n as u32, budget, ctx.config.seed ^ (0x3300 + n as u64))
            .map_err(lib_err)?
            .value;
        let m_phi = phi.declared_modulus(delta).ok_or_else(|| {
            Failure::new(
                EXIT_UNSUPPORTED,
                "bound overlay needs observables with a declared modulus class",
            )
        })?;
        let m_psi = psi.declared_modulus(delta).ok_or_else(|| {
            Failure::new(
                EXIT_UNSUPPORTED,
                "bound overlay needs observables with a declared modulus class",
            )
        })?;
        let u_n = tower.tail_mass(n as u64);
        out.push(ctx.config.analysis.slack * (prefactor * m_phi.max(m_psi) + u_n));
    }
    Ok(out)
}

pub fn correlate(args: &RunArgs) -> CmdResult {
    let ctx = setup(args)?;
    let est = ctx.config.estimator.clone();
    let obs = built_observables(&ctx)?;
    if obs.is_empty() {
        return Err(Failure::new(
            EXIT_CONFIG,
            "correlate needs at least one observable",
        ));
    }
    let phi = obs[0].clone();
    let psi = obs.get(1).cloned().unwrap_or_else(|| obs[0].clone());

    let ens = if est.reuse_ensemble {
        load_ensemble(&ctx)?
    } else {
        sample_srb(
            &ctx.config.system,
            est.n_points,
            est.burn_in,
            est.spacing,
            ctx.config.seed,
        )
        .map_err(lib_err)?
    };
    let series = estimate_correlation(&phi, &psi, &ens, est.n_max).map_err(lib_err)?;
    ctx.dir
        .write("correlation.csv", &series.to_csv())
        .map_err(|e| Failure::new(1, e.to_string()))?;

    let bound = if ctx.config.analysis.bound_overlay {
        Some(measured_bound(&ctx, &phi, &psi, est.n_max)?)
    } else {
        None
    };
    let mut plot = String::from("n,estimate,std_error,bound\n");
    for n in 0..=est.n_max {
        let b = bound
            .as_ref()
            .map(|v| format!("{:?}", v[n]))
            .unwrap_or_default();
        let _ = writeln!(
            plot,
            "{n},{:?},{:?},{b}",
            series.estimates[n], series.std_errors[n]
        );
    }
    ctx.dir
        .write("plotdata.csv", &plot)
        .map_err(|e| Failure::new(1, e.to_string()))?;
    ctx.dir
        .write("plot.gp", PLOT_SCRIPT)
        .map_err(|e| Failure::new(1, e.to_string()))?;
    write_meta(
        &ctx,
        "correlate",
        serde_json::json!({
            "n_max": est.n_max,
            "points": ens.points.len(),
            "escaped": ens.escaped,
            "bound_overlay": bound.is_some(),
        }),
    )?;
    println!(
        "correlate: {} lags over {} points{}",
        est.n_max + 1,
        ens.points.len(),
        ctx.config
            .system
            .empirical_caveat()
            .map(|c| format!(" [{c}]"))
            .unwrap_or_default()
    );
    Ok(())
}

const PLOT_SCRIPT: &str = "\
set datafile separator ','
set logscale y
set xlabel 'n'
set ylabel '|estimate|'
plot 'plotdata.csv' every ::1 using 1:(abs($2)) with linespoints title 'estimate', \\
     'plotdata.csv' every ::1 using 1:4 with lines title 'bound'
";

fn build_tower(ctx: &Ctx) -> Result<TowerModel<f64>, Failure> {
    if let Some(syn) = &ctx.config.tower.synthetic {
        synth_tower(
            syn.tail,
            syn.branching,
            ctx.config.tower.cutoff,
            ctx.config.tower.max_truncation,
        )
        .map_err(lib_err)
    } else {
        if !ctx.config.system.is_circle_type() {
            return Err(Failure::new(
                EXIT_UNSUPPORTED,
                "induced towers exist for circle-type systems only; configure tower.synthetic otherwise",
            ));
        }
        let t = build_induced_tower(
            &ctx.config.system,
            ctx.config.tower.depth,
            &InducedBuildOptions::default(),
        )
        .map_err(lib_err)?;
        if t.remainder_mass() > ctx.config.tower.remainder_threshold {
            return Err(Failure::new(
                EXIT_CONSTRUCTION,
                format!(
                    "remainder mass {:.3e} above threshold {:.3e}",
                    t.remainder_mass(),
                    ctx.config.tower.remainder_threshold
                ),
            ));
        }
        Ok(t)
    }
}

pub fn tower(args: &RunArgs) -> CmdResult {
    let ctx = setup(args)?;
    let t = build_tower(&ctx)?;

    let mut buf = Vec::new();
    decorr::tower::io::write_tower(&mut buf, &t, ctx.config.tower.binary_cells)
        .map_err(lib_err)?;
    ctx.dir
        .write_bytes("tower.txt", &buf)
        .map_err(|e| Failure::new(1, e.to_string()))?;

    let mut tail = String::from("n,tail\n");
    for n in 0..=t.max_return() as u64 {
        let _ = writeln!(tail, "{n},{:?}", t.tail_mass(n));
    }
    ctx.dir
        .write("tail.csv", &tail)
        .map_err(|e| Failure::new(1, e.to_string()))?;

    if t.is_induced() {
        let mut delta = String::from("k,delta_bar,samples\n");
        for &k in &ctx.config.tower.delta_grid {
            if k >= ctx.config.tower.depth {
                continue;
            }
            let est = t
                .delta_bar(
                    k,
                    ctx.config.tower.sample_budget,
                    ctx.config.seed ^ (0xD0000 + k as u64),
                )
                .map_err(lib_err)?;
            let _ = writeln!(delta, "{k},{:?},{}", est.value, est.samples);
        }
        ctx.dir
            .write("delta_bar.csv", &delta)
            .map_err(|e| Failure::new(1, e.to_string()))?;
    }

    write_meta(
        &ctx,
        "tower",
        serde_json::json!({
            "cells": t.cells().len(),
            "max_return": t.max_return(),
            "remainder_mass": t.remainder_mass(),
            "truncation_mass": t.truncation_mass(),
            "mean_return": t.kac_mass(),
        }),
    )?;
    println!(
        "tower: {} cells, max return {}, remainder {:.3e}",
        t.cells().len(),
        t.max_return(),
        t.remainder_mass()
    );
    Ok(())
}

struct VerifyRow {
    check: String,
    lhs: f64,
    rhs: f64,
    verdict: &'static str,
}

fn row(check: impl Into<String>, lhs: f64, rhs: f64) -> VerifyRow {
    VerifyRow {
        check: check.into(),
        lhs,
        rhs,
        verdict: if lhs <= rhs { "pass" } else { "fail" },
    }
}

pub fn verify(args: &RunArgs) -> CmdResult {
    let ctx = setup(args)?;
    let system = ctx.config.system;
    let est = ctx.config.estimator.clone();
    let mut rows: Vec<VerifyRow> = Vec::new();
    let obs = built_observables(&ctx)?;

    // Determinism: a repeated small run must produce identical bytes.
    {
        let n = est.n_points.min(10_000);
        let a = sample_srb(&system, n, est.burn_in, est.spacing, ctx.config.seed)
            .map_err(lib_err)?;
        let b = sample_srb(&system, n, est.burn_in, est.spacing, ctx.config.seed)
            .map_err(lib_err)?;
        let identical = ensemble_csv(&a) == ensemble_csv(&b);
        rows.push(row("determinism_byte_identity", f64::from(!identical as u8), 0.0));
    }

    // Constant annihilation is exact up to float roundoff.
    {
        let n = est.n_points.min(50_000);
        let ens =
            sample_srb(&system, n, est.burn_in, est.spacing, ctx.config.seed).map_err(lib_err)?;
        let phi = obs
            .first()
            .cloned()
            .unwrap_or_else(|| Observable::constant(system, 1.0));
        let c = Observable::constant(system, 4.0);
        let s = estimate_correlation(&phi, &c, &ens, est.n_max.min(16)).map_err(lib_err)?;
        let worst = s
            .estimates
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        rows.push(row("constant_annihilation", worst, 1e-12));
    }

    // Exact autocovariance oracle for the doubling map.
    if matches!(system, SystemSpec::Doubling) {
        let ens = sample_srb(&system, est.n_points, est.burn_in, est.spacing, ctx.config.seed)
            .map_err(lib_err)?;
        let saw = Observable::sawtooth(system).map_err(lib_err)?;
        let s = estimate_correlation(&saw, &saw, &ens, 8).map_err(lib_err)?;
        for n in 0..=8u32 {
            let oracle = decorr::correlation::oracle_doubling_autocov::<f64>(n);
            rows.push(row(
                format!("oracle_match_n{n}"),
                (s.estimates[n as usize] - oracle).abs(),
                3.0 * s.std_errors[n as usize],
            ));
        }
    }

    // Tower identities and the approximation inequality for circle systems.
    if system.is_circle_type() {
        let t = build_tower(&ctx)?;
        let kac = t.kac_mass();
        let direct: f64 = t
            .cells()
            .iter()
            .map(|c| c.return_time as f64 * c.weight)
            .sum::<f64>()
            + (t.max_return() as f64 + 1.0) * t.remainder_mass();
        rows.push(row("kac_identity", (kac - direct).abs(), 1e-9 * kac));
        let levels = t.invariant_levels().map_err(lib_err)?;
        rows.push(row(
            "level_normalization",
            (levels.iter().sum::<f64>() - 1.0).abs(),
            1e-12,
        ));

        // Stopping times recomputed two ways must agree exactly.
        {
            use decorr::tower::TowerState;
            use rand_chacha_reexport::{ChaCha8Rng, SeedableRng};
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed ^ 0x57);
            let mut ok = true;
            'outer: for _ in 0..32 {
                let mut s = t.draw_invariant_state(&mut rng);
                s = TowerState {
                    cell: s.cell,
                    level: 0,
                    coord: s.coord,
                };
                let st = t.stopping_times(&s, 64, &mut rng).map_err(lib_err)?;
                // Independent accumulation through the ambient orbit.
                let mut z = s.coord.unwrap();
                let mut total = 0u64;
                for w in st.times.windows(2) {
                    let cell = match t.locate_cell(z) {
                        Some(c) => c,
                        None => continue 'outer,
                    };
                    let r = t.return_time(cell).map_err(lib_err)? as u64;
                    total += r;
                    if total != w[1] {
                        ok = false;
                        break 'outer;
                    }
                    z = decorr::systems::iterate(&system, &Point::Interval(z), r)
                        .map_err(lib_err)?
                        .x();
                }
            }
            rows.push(row("stopping_time_recursion", f64::from(!ok as u8), 0.0));
        }

        // Projection commutes with the dynamics on sampled states.
        {
            use rand_chacha_reexport::{ChaCha8Rng, SeedableRng};
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed ^ 0x5c);
            let mut worst = 0.0f64;
            let mut checked = 0usize;
            while checked < 10_000 {
                let s = t.draw_invariant_state(&mut rng);
                let here = t.project(&s).map_err(lib_err)?;
                let ambient = step(&system, &here).map_err(lib_err)?.x();
                match t.tower_step(&s, &mut rng) {
                    Ok(next) => {
                        let there = t.project(&next).map_err(lib_err)?.x();
                        let scale = ambient.abs().max(1e-6);
                        worst = worst.max((there - ambient).abs() / scale);
                        checked += 1;
                    }
                    Err(_) => continue,
                }
            }
            rows.push(row("semiconjugacy_relative", worst, 1e-10));
        }

        // Coarse-approximation inequality for declared-modulus pairs.
        if obs.len() >= 2
            && obs[0].declared_modulus(0.1).is_some()
            && obs[1].declared_modulus(0.1).is_some()
            && t.is_induced()
        {
            let opts = ApproxOptions {
                orbits: est.n_points.min(20_000),
                burn_in: 64,
                discretize_samples: 50_000,
                delta_budget: ctx.config.tower.sample_budget,
                seed: ctx.config.seed ^ 0xA9,
            };
            let rep = verify_approximation(
                &t,
                &obs[0],
                &obs[1],
                &ctx.config.analysis.k_grid,
                est.n_max,
                &opts,
            )
            .map_err(lib_err)?;
            for r in &rep.rows {
                rows.push(VerifyRow {
                    check: format!("approximation_k{}_n{}", r.k, r.n),
                    lhs: r.lhs,
                    rhs: r.bound + 3.0 * r.std_error,
                    verdict: match r.verdict {
                        decorr::correlation::Verdict::Pass => "pass",
                        decorr::correlation::Verdict::Fail => "fail",
                        decorr::correlation::Verdict::Inconclusive => "inconclusive",
                    },
                });
            }
        }

        // One-sided envelope check against the measured bound.
        if obs.len() >= 2 && ctx.config.analysis.bound_overlay {
            let ens = sample_srb(&system, est.n_points, est.burn_in, est.spacing, ctx.config.seed)
                .map_err(lib_err)?;
            let series: CorrelationSeries<f64> =
                estimate_correlation(&obs[0], &obs[1], &ens, est.n_max).map_err(lib_err)?;
            let bound = measured_bound(&ctx, &obs[0], &obs[1], est.n_max)?;
            let chk = check_bound(&series, &bound, ctx.config.analysis.slack).map_err(lib_err)?;
            rows.push(row("bound_envelope_max_ratio", chk.max_ratio, 1.0));
        }
    }

    let mut csv = String::from("check,lhs,rhs,verdict\n");
    let mut failed = 0usize;
    let mut inconclusive = 0usize;
    for r in &rows {
        let _ = writeln!(csv, "{},{:?},{:?},{}", r.check, r.lhs, r.rhs, r.verdict);
        println!("{:<40} lhs={:<12.4e} rhs={:<12.4e} {}", r.check, r.lhs, r.rhs, r.verdict);
        match r.verdict {
            "fail" => failed += 1,
            "inconclusive" => inconclusive += 1,
            _ => {}
        }
    }
    if let Some(c) = system.empirical_caveat() {
        println!("note: {c}");
    }
    if inconclusive > 0 {
        println!("note: {inconclusive} checks inconclusive (insufficient statistical power)");
    }
    ctx.dir
        .write("verify.csv", &csv)
        .map_err(|e| Failure::new(1, e.to_string()))?;
    write_meta(
        &ctx,
        "verify",
        serde_json::json!({"checks": rows.len(), "failed": failed, "inconclusive": inconclusive}),
    )?;
    if failed > 0 {
        return Err(Failure::new(1, format!("{failed} checks failed")));
    }
    println!("verify: all {} non-inconclusive checks passed", rows.len());
    Ok(())
}

fn describe(model: &RateModel<f64>) -> String {
    match model.law {
        RateLaw::Exponential { theta } => {
            format!("exponential C*theta^n with theta = {theta}")
        }
        RateLaw::StretchedExp { c, eta } => {
            format!("stretched exponential C*exp(-c*n^eta) with c = {c}, eta = {eta}")
        }
        RateLaw::Polynomial { p } => format!("polynomial C*n^(-p) with p = {p}"),
        RateLaw::LogPolynomial { alpha } => {
            format!("log-polynomial C*(ln n)^(-alpha) with alpha = {alpha}")
        }
        RateLaw::ExpLogPower { alpha } => {
            format!("exp-log-power C*exp(-(ln n)^alpha) with alpha = {alpha}")
        }
    }
}

pub fn predict(args: &PredictArgs) -> CmdResult {
    let modulus: ModulusClass = match args.modulus.as_str() {
        "hoelder" => ModulusClass::Hoelder {
            alpha: args
                .alpha
                .ok_or_else(|| Failure::new(EXIT_CONFIG, "--alpha required for hoelder"))?,
        },
        "exp_log_power" => ModulusClass::ExpLogPower {
            alpha: args
                .alpha
                .ok_or_else(|| Failure::new(EXIT_CONFIG, "--alpha required for exp_log_power"))?,
        },
        "log_poly" => ModulusClass::LogPoly {
            alpha: args
                .alpha
                .ok_or_else(|| Failure::new(EXIT_CONFIG, "--alpha required for log_poly"))?,
        },
        "lipschitz" => ModulusClass::Lipschitz {
            l: args.lipschitz.unwrap_or(1.0),
        },
        other => {
            return Err(Failure::new(
                EXIT_UNSUPPORTED,
                format!(
                    "unsupported modulus class {other:?}; supported: hoelder, exp_log_power, log_poly, lipschitz"
                ),
            ))
        }
    };
    modulus
        .validate()
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;

    let (tail, delta, note) = match args.system_class.as_str() {
        "henon" => {
            let theta = args.theta.ok_or_else(|| {
                Failure::new(
                    EXIT_CONFIG,
                    "--theta required for the henon class (the mixing rate is existential; supply an empirical fit)",
                )
            })?;
            if !(0.0..1.0).contains(&theta) || theta <= 0.0 {
                return Err(Failure::new(EXIT_CONFIG, "--theta must lie in (0, 1)"));
            }
            (
                decorr::TailLaw::ExpTail { theta },
                RateModel::unit(RateLaw::Exponential { theta }),
                Some(decorr::systems::HENON_EMPIRICAL_CAVEAT),
            )
        }
        "solenoid" => {
            let gamma = args.gamma.ok_or_else(|| {
                Failure::new(EXIT_CONFIG, "--gamma required for the solenoid class")
            })?;
            if !(0.0..1.0).contains(&gamma) || gamma <= 0.0 {
                return Err(Failure::new(EXIT_CONFIG, "--gamma must lie in (0, 1)"));
            }
            (
                decorr::TailLaw::PolyTail { alpha: 1.0 / gamma },
                RateModel::unit(RateLaw::Polynomial { p: 1.0 / gamma }),
                None,
            )
        }
        other => {
            return Err(Failure::new(
                EXIT_UNSUPPORTED,
                format!("unsupported system class {other:?}; supported: henon, solenoid"),
            ))
        }
    };

    let pred = predict_bound(&modulus, &tail, &delta).map_err(lib_err)?;
    println!("modulus term : {}", describe(&pred.modulus_term));
    println!("tail term    : {}", describe(&pred.tail_term));
    println!("dominant law : {}", describe(&pred.dominant));
    if let Some(n) = note {
        println!("note         : {n}");
    }
    Ok(())
}

// Chacha types used by verify, via the library re-export.
mod rand_chacha_reexport {
    pub use decorr::rng::{ChaCha8Rng, SeedableRng};
}
