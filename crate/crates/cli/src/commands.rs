use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use gramor::benchmark::{
    generate_heat_system, heat_stochastic, HeatBenchmarkSpec, HeatMode, HeatSystem,
};
use gramor::bounds::{BilinearBoundContext, BoundContext, ErrorBoundReport};
use gramor::io::{from_rows, to_rows, AnySystem, Rows, SystemFile};
use gramor::parallel::Execution;
use gramor::reduction::{
    balanced_truncation_reduce, galerkin_reduce, hankel_singular_values, observability_gramian,
    GramianOptions,
};
use gramor::simulate::{
    bilinear_simulate_paired, euler_maruyama_paired, MeanErrorCurve, SimulationConfig,
};
use gramor::stability::{spectral_abscissa, StabilityOptions};
use gramor::{
    input_l2_norm, GalerkinRom, InputSignal, Mat, ReductionMethod, Signal, StochasticLinearSystem,
};
use serde_json::json;

use crate::artifacts::{num, read_manifest, read_table, sha256_hex, Run};
use crate::{
    BoundsArgs, Cli, Command, GenerateArgs, InputArgs, MethodArg, ModeArg, ReduceArgs,
    Representation, ReproduceArgs, RerunArgs, SimulateArgs, StabilityArgs, Target, UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

pub fn dispatch(cli: Cli, argv: Vec<String>) -> Result<()> {
    if let Command::Rerun(args) = &cli.command {
        return rerun(args, &cli);
    }
    let config = serde_json::to_value(&cli)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::GenerateBenchmark(a) => generate(a, out, cli.seed, argv, config),
        Command::Reduce(a) => reduce(a, Run::new(out, cli.seed, argv, config)?),
        Command::Bounds(a) => bounds(a, Run::new(out, cli.seed, argv, config)?),
        Command::Simulate(a) => simulate(a, Run::new(out, cli.seed, argv, config)?),
        Command::StabilityCheck(a) => stability(a, Run::new(out, cli.seed, argv, config)?),
        Command::Reproduce(a) => reproduce(a, Run::new(out, cli.seed, argv, config)?),
        Command::Rerun(_) => unreachable!(),
    }
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

fn generate(
    a: &GenerateArgs,
    out: PathBuf,
    seed: u64,
    argv: Vec<String>,
    config: serde_json::Value,
) -> Result<()> {
    let (dir, file) = if out.extension().is_some_and(|e| e == "json") {
        let dir = out
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .map(Path::to_path_buf);
        (dir.unwrap_or_else(|| PathBuf::from(".")), out)
    } else {
        (out.clone(), out.join("system.json"))
    };
    let mut run = Run::new(dir, seed, argv, config)?;
    let spec = HeatBenchmarkSpec {
        robin_coefficient: a.robin,
        gamma: a.gamma,
        ..HeatBenchmarkSpec::new(
            a.k,
            match a.mode {
                ModeArg::Stochastic => HeatMode::Stochastic,
                ModeArg::Bilinear => HeatMode::Bilinear,
            },
        )
    };
    let sys = generate_heat_system(&spec)?;
    let f = match &sys {
        HeatSystem::Stochastic(s) => SystemFile::from_stochastic(s),
        HeatSystem::Bilinear(s) => SystemFile::from_bilinear(s),
    };
    run.effective("n", f.n);
    run.effective("m", f.m);
    run.effective("q", f.q);
    run.write_text(&file, &f.to_json()?)?;
    log::info!("wrote {}-dimensional system to {}", f.n, file.display());
    run.finish()?;
    Ok(())
}

fn kind_name(sys: &AnySystem) -> &'static str {
    match sys {
        AnySystem::Stochastic(_) => "stochastic",
        AnySystem::Bilinear(_) => "bilinear",
    }
}

fn check_order(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(usage(format!("reduced order r = {r} must lie in 1..={n}")));
    }
    Ok(())
}

fn load_rows(run: &mut Run, path: &Path, n: usize) -> Result<Mat> {
    let (bytes, _) = run.read_input(path)?;
    let rows: Rows =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Ok(from_rows("Gramian", &rows, n, n)?)
}

fn observability(
    run: &mut Run,
    data: &StochasticLinearSystem,
    given: Option<&Path>,
    opts: &GramianOptions,
) -> Result<Mat> {
    if let Some(p) = given {
        return load_rows(run, p, data.dim());
    }
    let t = Instant::now();
    let q = observability_gramian(data, opts)?.x;
    let secs = elapsed(t);
    log::info!(
        "computed observability Gramian (n = {}) in {secs:.2} s",
        data.dim()
    );
    run.timing("observabilityGramian", secs);
    run.write_json("observability.json", &to_rows(&q))?;
    Ok(q)
}

fn reduce(a: &ReduceArgs, mut run: Run) -> Result<()> {
    let (_, sys, sha) = run.load_system(&a.system)?;
    let data = sys.reduction_view();
    check_order(a.r, data.dim())?;
    let opts = GramianOptions::default();
    let mut ctx = bound_context(&mut run, &data, &opts)?;
    let spectrum = ctx.spectrum()?.clone();
    let rows: Vec<Vec<String>> = spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
        .collect();
    run.write_csv("spectrum.csv", &["index", "eigenvalue"], &rows)?;

    let mut roms = Vec::new();
    if matches!(a.method, MethodArg::Os | MethodArg::Both) {
        roms.push(galerkin_reduce(&data, &spectrum, a.r)?);
    }
    if matches!(a.method, MethodArg::Bt | MethodArg::Both) {
        let q = observability(&mut run, &data, a.observability.as_deref(), &opts)?;
        let hsv = hankel_singular_values(ctx.gramian(), &q)?;
        let rows: Vec<Vec<String>> = hsv
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
            .collect();
        run.write_csv("hankel.csv", &["index", "hankelSingularValue"], &rows)?;
        roms.push(balanced_truncation_reduce(&data, ctx.gramian(), &q, a.r)?);
    }
    for rom in &roms {
        let rep = spectral_abscissa(&rom.reduced_a, &rom.reduced_n, &opts.stability)?;
        let tag = rom.method.to_string().to_lowercase();
        run.effective(&format!("{tag}Abscissa"), rep.abscissa);
        run.effective(&format!("{tag}Verdict"), rep.verdict);
        let file = SystemFile::from_rom(rom, &sys, Some(sha.clone()));
        let path = run.path(&format!("rom-{tag}.json"));
        run.write_text(&path, &file.to_json()?)?;
    }
    run.effective("kind", kind_name(&sys));
    run.effective("n", data.dim());
    run.effective("r", a.r);
    run.finish()?;
    Ok(())
}

fn bound_context(
    run: &mut Run,
    data: &StochasticLinearSystem,
    opts: &GramianOptions,
) -> Result<BoundContext> {
    let t = Instant::now();
    let ctx = BoundContext::new(data, opts)?;
    let secs = elapsed(t);
    log::info!(
        "computed reachability Gramian (n = {}) in {secs:.2} s",
        data.dim()
    );
    run.timing("reachabilityGramian", secs);
    Ok(ctx)
}

fn parse_signal(run: &mut Run, spec: &str) -> Result<Signal> {
    if let Some(v) = spec.strip_prefix("const:") {
        let value: f64 = v
            .parse()
            .map_err(|_| usage(format!("bad constant input `{spec}`")))?;
        return Ok(Signal::Constant { value });
    }
    if let Some(p) = spec.strip_prefix("table:") {
        let (bytes, _) = run.read_input(Path::new(p))?;
        let (t, v) = read_table(&bytes).map_err(|e| usage(format!("input table {p}: {e:#}")))?;
        return Ok(Signal::table(t, v)?);
    }
    Ok(Signal::named(spec)?)
}

fn build_input(run: &mut Run, args: &InputArgs, sys: &AnySystem) -> Result<InputSignal> {
    let (m, default_horizon) = match sys {
        AnySystem::Stochastic(s) => (s.inputs(), 1.0),
        AnySystem::Bilinear(s) => (s.inputs(), 10.0),
    };
    let horizon = args.horizon.unwrap_or(default_horizon);
    let signals = args
        .input
        .iter()
        .map(|s| parse_signal(run, s))
        .collect::<Result<Vec<_>>>()?;
    let u = match signals.len() {
        1 => InputSignal::tied(signals[0].clone(), m, horizon)?,
        k if k == m => InputSignal::new(signals, horizon)?,
        k => {
            return Err(usage(format!(
                "{k} input signals given for a system with {m} inputs"
            )))
        }
    };
    run.effective("input", &args.input);
    run.effective("horizon", horizon);
    run.effective("inputNorm", input_l2_norm(&u)?);
    Ok(u)
}

fn load_rom(run: &mut Run, path: &Path, system_sha: &str) -> Result<GalerkinRom> {
    let (bytes, _) = run.read_input(path)?;
    let text =
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let file =
        SystemFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(parent) = file
        .projection
        .as_ref()
        .and_then(|p| p.parent_sha256.as_deref())
    {
        if parent != system_sha {
            return Err(usage(format!(
                "{} was reduced from a different system file",
                path.display()
            )));
        }
    }
    file.to_rom()
        .with_context(|| format!("reading reduced model {}", path.display()))
}

fn bound_row(r: usize, method: ReductionMethod, rep: &ErrorBoundReport) -> Vec<String> {
    vec![
        r.to_string(),
        method.to_string(),
        num(rep.terms.tr_p),
        num(rep.terms.tr_phat),
        num(rep.terms.tr_p2_vt),
        num(rep.input_independent_factor),
        num(rep.input_norm),
        num(rep.exponential_factor),
        num(rep.bound),
    ]
}

const BOUND_HEADER: [&str; 9] = [
    "r",
    "method",
    "trP",
    "trPhat",
    "trP2Vt",
    "inputIndependentFactor",
    "inputNorm",
    "exponentialFactor",
    "bound",
];

enum AnyContext {
    Stochastic(BoundContext),
    Bilinear(BilinearBoundContext),
}

impl AnyContext {
    fn inner(&mut self) -> &mut BoundContext {
        match self {
            AnyContext::Stochastic(c) => c,
            AnyContext::Bilinear(c) => c.scaled_context(),
        }
    }

    fn reports(
        &mut self,
        roms: &[GalerkinRom],
        u: &InputSignal,
        repr: Representation,
    ) -> Result<Vec<ErrorBoundReport>> {
        let norm = input_l2_norm(u)?;
        let out: Vec<Result<ErrorBoundReport>> = match (self, repr) {
            (AnyContext::Stochastic(c), Representation::General) => c
                .general_sweep(roms, norm, Execution::Parallel)
                .into_iter()
                .map(|r| r.map_err(Into::into))
                .collect(),
            (AnyContext::Bilinear(c), Representation::General) => c
                .general_sweep(roms, u, Execution::Parallel)
                .into_iter()
                .map(|r| r.map_err(Into::into))
                .collect(),
            (AnyContext::Stochastic(c), Representation::Weighted) => roms
                .iter()
                .map(|rom| c.weighted(rom, norm).map_err(Into::into))
                .collect(),
            (AnyContext::Bilinear(c), Representation::Weighted) => roms
                .iter()
                .map(|rom| c.weighted(rom, u).map_err(Into::into))
                .collect(),
        };
        out.into_iter()
            .zip(roms)
            .map(|(r, rom)| {
                r.with_context(|| format!("{} reduced model of order {}", rom.method, rom.order()))
            })
            .collect()
    }
}

fn bounds(a: &BoundsArgs, mut run: Run) -> Result<()> {
    let (_, sys, sha) = run.load_system(&a.system)?;
    let u = build_input(&mut run, &a.input, &sys)?;
    let data = sys.reduction_view();
    let opts = GramianOptions::default();
    if a.representation == Representation::Weighted
        && a.method != MethodArg::Os
        && a.sweep.is_some()
    {
        return Err(usage(
            "the weighted representation applies to OS reduced models only",
        ));
    }
    let t = Instant::now();
    let mut ctx = match &sys {
        AnySystem::Stochastic(s) => AnyContext::Stochastic(BoundContext::new(s, &opts)?),
        AnySystem::Bilinear(s) => AnyContext::Bilinear(BilinearBoundContext::new(s, &opts)?),
    };
    run.timing("reachabilityGramian", elapsed(t));
    let roms = match (&a.rom, &a.sweep) {
        (Some(path), _) => vec![load_rom(&mut run, path, &sha)?],
        (None, Some(sw)) => {
            check_order(sw.max, data.dim())?;
            let spectrum = ctx.inner().spectrum()?.clone();
            let mut roms = Vec::new();
            if matches!(a.method, MethodArg::Os | MethodArg::Both) {
                for r in sw.min..=sw.max {
                    roms.push(galerkin_reduce(&data, &spectrum, r)?);
                }
            }
            if matches!(a.method, MethodArg::Bt | MethodArg::Both) {
                let q = observability(&mut run, &data, a.observability.as_deref(), &opts)?;
                let p = ctx.inner().gramian().clone();
                for r in sw.min..=sw.max {
                    roms.push(balanced_truncation_reduce(&data, &p, &q, r)?);
                }
            }
            roms
        }
        (None, None) => unreachable!("clap requires --rom or --sweep"),
    };
    let t = Instant::now();
    let reports = ctx.reports(&roms, &u, a.representation)?;
    run.timing("bounds", elapsed(t));
    let rows: Vec<Vec<String>> = roms
        .iter()
        .zip(&reports)
        .map(|(rom, rep)| bound_row(rom.order(), rom.method, rep))
        .collect();
    run.write_csv("bounds.csv", &BOUND_HEADER, &rows)?;
    run.effective("kind", kind_name(&sys));
    run.effective("representation", a.representation);
    run.finish()?;
    Ok(())
}

fn curve_rows(c: &MeanErrorCurve) -> Vec<Vec<String>> {
    c.time_grid
        .iter()
        .zip(&c.mean_error)
        .zip(&c.stderr)
        .map(|((t, e), s)| vec![num(*t), num(*e), num(*s)])
        .collect()
}

const CURVE_HEADER: [&str; 3] = ["t", "meanError", "stderr"];

fn simulate(a: &SimulateArgs, mut run: Run) -> Result<()> {
    let (_, sys, sha) = run.load_system(&a.system)?;
    let rom = load_rom(&mut run, &a.rom, &sha)?;
    let u = build_input(&mut run, &a.input, &sys)?;
    let cfg = SimulationConfig {
        step_size: a.step,
        horizon: u.horizon,
        samples: a.samples,
        seed: run.seed,
        rk_rel_tol: a.rk_rtol,
        rk_abs_tol: a.rk_atol,
        execution: Execution::Parallel,
    };
    let t = Instant::now();
    let curve = match &sys {
        AnySystem::Stochastic(s) => {
            let (steps, h) = cfg.grid()?;
            run.effective("steps", steps);
            run.effective("effectiveStep", h);
            euler_maruyama_paired(s, &rom, &u, &cfg)?
        }
        AnySystem::Bilinear(s) => bilinear_simulate_paired(s, &rom, &u, &cfg)?,
    };
    run.timing("simulate", elapsed(t));
    run.effective("supValue", curve.sup_value);
    run.effective("argmaxTime", curve.time_grid[curve.argmax()]);
    run.write_csv("simulate.csv", &CURVE_HEADER, &curve_rows(&curve))?;
    run.finish()?;
    Ok(())
}

fn stability(a: &StabilityArgs, mut run: Run) -> Result<()> {
    let (_, sys, _) = run.load_system(&a.system)?;
    let data = sys.reduction_view();
    let mut opts = StabilityOptions::default();
    if let Some(c) = a.dense_cutoff {
        opts.dense_cutoff = c;
    }
    let t = Instant::now();
    let rep = spectral_abscissa(&data.a, &data.n, &opts)?;
    run.timing("abscissa", elapsed(t));
    let report = json!({
        "abscissa": rep.abscissa,
        "verdict": rep.verdict,
        "method": rep.method,
        "tolerance": rep.tolerance,
        "n": data.dim(),
        "rescaled": matches!(sys, AnySystem::Bilinear(_)),
    });
    run.write_json("stability.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    run.finish()?;
    Ok(())
}

/// Adds the stage name to errors from one step of a chained recipe.
fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.with_context(|| format!("stage `{name}` failed"))
}

fn reproduce(a: &ReproduceArgs, mut run: Run) -> Result<()> {
    let t = Instant::now();
    let sys = stage("generate", heat_stochastic(a.k).map_err(Into::into))?;
    let file = SystemFile::from_stochastic(&sys);
    let text = file.to_json()?;
    let sha = sha256_hex(text.as_bytes());
    let path = run.path("system.json");
    run.write_text(&path, &text)?;
    run.timing("generate", elapsed(t));
    check_order(a.r, sys.dim())?;
    let any = AnySystem::Stochastic(sys.clone());
    let opts = GramianOptions::default();

    let t = Instant::now();
    let mut ctx = stage("reduce", bound_context(&mut run, &sys, &opts))?;
    let spectrum = stage("reduce", ctx.spectrum().cloned().map_err(Into::into))?;
    let q = stage("reduce", observability(&mut run, &sys, None, &opts))?;
    run.timing("reduce", elapsed(t));
    run.effective("k", a.k);
    run.effective("n", sys.dim());

    match a.target {
        Target::Table1 => {
            let os = stage(
                "reduce",
                galerkin_reduce(&sys, &spectrum, a.r).map_err(Into::into),
            )?;
            let bt = stage(
                "reduce",
                balanced_truncation_reduce(&sys, ctx.gramian(), &q, a.r).map_err(Into::into),
            )?;
            let u = InputSignal::tied(Signal::named("damped-sine")?, 1, 1.0)?;
            let norm = input_l2_norm(&u)?;
            let cfg = SimulationConfig {
                samples: a.samples,
                seed: run.seed,
                ..SimulationConfig::default()
            };
            run.effective("r", a.r);
            run.effective("samples", a.samples);
            run.effective("stepSize", cfg.step_size);
            run.effective("inputNorm", norm);
            let mut rows = Vec::new();
            for rom in [&os, &bt] {
                let tag = rom.method.to_string().to_lowercase();
                let rom_file = SystemFile::from_rom(rom, &any, Some(sha.clone()));
                let p = run.path(&format!("rom-{tag}.json"));
                run.write_text(&p, &rom_file.to_json()?)?;
                let t = Instant::now();
                let rep = stage("bounds", ctx.general(rom, norm).map_err(Into::into))?;
                run.timing(&format!("bounds-{tag}"), elapsed(t));
                let t = Instant::now();
                let curve = stage(
                    "simulate",
                    euler_maruyama_paired(&sys, rom, &u, &cfg).map_err(Into::into),
                )?;
                run.timing(&format!("simulate-{tag}"), elapsed(t));
                run.write_csv(
                    &format!("table1-{tag}-curve.csv"),
                    &CURVE_HEADER,
                    &curve_rows(&curve),
                )?;
                let i = curve.argmax();
                rows.push(vec![
                    rom.method.to_string(),
                    num(rep.input_independent_factor),
                    num(curve.sup_value),
                    num(curve.stderr[i]),
                    num(curve.time_grid[i]),
                    num(rep.bound),
                ]);
            }
            run.write_csv(
                "table1.csv",
                &[
                    "method",
                    "errorBound",
                    "maxMeanError",
                    "maxMeanErrorStderr",
                    "argmaxTime",
                    "errorBoundTimesInputNorm",
                ],
                &rows,
            )?;
        }
        Target::Fig3 => {
            let mut roms = Vec::new();
            for r in 1..=a.r {
                roms.push(stage(
                    "reduce",
                    galerkin_reduce(&sys, &spectrum, r).map_err(Into::into),
                )?);
            }
            for r in 1..=a.r {
                roms.push(stage(
                    "reduce",
                    balanced_truncation_reduce(&sys, ctx.gramian(), &q, r).map_err(Into::into),
                )?);
            }
            let t = Instant::now();
            let factors = ctx
                .factor_sweep(&roms, Execution::Parallel)
                .into_iter()
                .map(|f| f.map(|(e, _)| e).map_err(Into::into))
                .collect::<Result<Vec<f64>>>();
            let factors = stage("bounds", factors)?;
            run.timing("bounds", elapsed(t));
            let rows: Vec<Vec<String>> = (0..a.r)
                .map(|i| vec![(i + 1).to_string(), num(factors[i]), num(factors[a.r + i])])
                .collect();
            run.write_csv("fig3.csv", &["r", "OS", "BT"], &rows)?;
        }
    }
    run.finish()?;
    Ok(())
}

/// Replaces every occurrence of a global `--flag VALUE` in `argv`.
fn override_flag(argv: &[String], flag: &str, value: Option<String>) -> Vec<String> {
    let Some(value) = value else {
        return argv.to_vec();
    };
    let prefix = format!("{flag}=");
    let mut out = Vec::with_capacity(argv.len() + 2);
    let mut it = argv.iter();
    while let Some(tok) = it.next() {
        if tok == flag {
            it.next();
        } else if !tok.starts_with(&prefix) {
            out.push(tok.clone());
        }
    }
    out.push(flag.into());
    out.push(value);
    out
}

fn rerun(a: &RerunArgs, cli: &Cli) -> Result<()> {
    let manifest = read_manifest(&a.manifest)?;
    if manifest.argv.first().is_some_and(|c| c == "rerun") {
        return Err(usage("a rerun manifest cannot be replayed again"));
    }
    for rec in &manifest.inputs {
        let bytes = std::fs::read(&rec.path)
            .with_context(|| format!("reading recorded input {}", rec.path.display()))?;
        if sha256_hex(&bytes) != rec.sha256 {
            bail!(
                "input {} changed since the recorded run",
                rec.path.display()
            );
        }
    }
    if manifest.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest written by version {}, replaying with {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let argv = override_flag(
        &manifest.argv,
        "--out",
        cli.out.as_ref().map(|p| p.display().to_string()),
    );
    let argv = override_flag(&argv, "--threads", cli.threads.map(|n| n.to_string()));
    log::info!("replaying: gramor {}", argv.join(" "));
    crate::run(argv)
}
