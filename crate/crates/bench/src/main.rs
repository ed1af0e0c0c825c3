use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rknsplit::problems::ARENSTORF_MU;
use rknsplit::schrodinger::{evolve_sampled, initial_gaussian, poschl_teller_potential, SpatialGrid};
use rknsplit::splitting::{integrate, TrajectoryRecorder};
use rknsplit::{coefficient_norms, load_external, SchemeRegistry, RKN8_SCHEMES};
use rknsplit_bench::order::{convergence_study, fit_in_window, geometric_counts, Reference};
use rknsplit_bench::{
    arenstorf_run, log_grid, parameter_scan, run_sweep, write_records, MethodSpec, ProblemSpec, SweepConfig,
};

#[derive(Parser)]
#[command(name = "rknsplit-bench", version, about = "Experiments with eighth-order RKN splitting methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the built-in coefficient tables.
    Schemes {
        #[command(subcommand)]
        action: SchemesAction,
    },
    /// Max energy error against cost for each scheme.
    Sweep(SweepArgs),
    /// Max energy error against the problem parameter at fixed cost.
    Scan(ScanArgs),
    /// Step-halving study with a least-squares order fit.
    Convergence(ConvergenceArgs),
    /// Return error after one Arenstorf period.
    Arenstorf(ArenstorfArgs),
    /// Split-step Fourier run with the Poschl-Teller well.
    Schrodinger(SchrodingerArgs),
    /// Single run writing the trajectory.
    Integrate(IntegrateArgs),
}

#[derive(Subcommand)]
enum SchemesAction {
    List {
        #[arg(long = "external-coeffs")]
        external: Vec<PathBuf>,
    },
    Check {
        name: String,
        #[arg(long = "external-coeffs")]
        external: Vec<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value = "kepler")]
    problem: String,
    /// Comma-separated scheme names; EXTRAP4/6/8 select extrapolation.
    #[arg(long, value_delimiter = ',', default_value = "A17,A18,A19,B17,B18,B19")]
    schemes: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    e: f64,
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1000.0)]
    tf: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "external-coeffs")]
    external: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// `lo:hi:n`, log-spaced.
    #[arg(long, default_value = "50:2000:12")]
    costs: String,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// `lo:hi:n`, evenly spaced.
    #[arg(long, default_value = "0:0.8:17")]
    params: String,
    #[arg(long, default_value_t = 340.0)]
    cost: f64,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// `nmin:nmax:ratio` steps over the interval.
    #[arg(long, default_value = "16:1024:1.189207115002721")]
    steps: String,
    /// Error window used by the fit, `lo:hi`.
    #[arg(long, default_value = "1e-12:1e-6")]
    window: String,
}

#[derive(Args)]
struct ArenstorfArgs {
    #[arg(long, value_delimiter = ',', default_value = "A19")]
    schemes: Vec<String>,
    /// `nmin:nmax:ratio` steps per period.
    #[arg(long, default_value = "200:20000:1.4142135623730951")]
    steps: String,
    #[arg(long, default_value_t = ARENSTORF_MU)]
    mu: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "external-coeffs")]
    external: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct SchrodingerArgs {
    #[arg(long, default_value = "A19")]
    scheme: String,
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    #[arg(long, default_value_t = 1000.0)]
    tf: f64,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 10.0)]
    depth: f64,
    #[arg(long, default_value_t = 10)]
    sample_every: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "external-coeffs")]
    external: Vec<PathBuf>,
}

#[derive(Args)]
struct IntegrateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

fn registry(external: &[PathBuf]) -> anyhow::Result<SchemeRegistry> {
    let mut reg = SchemeRegistry::builtin();
    for path in external {
        let scheme = load_external(path).with_context(|| format!("loading {}", path.display()))?;
        reg.insert(scheme);
    }
    Ok(reg)
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn triple(text: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("expected lo:hi:n, got {text:?}");
    }
    Ok((parts[0].parse()?, parts[1].parse()?, parts[2].parse()?))
}

fn problem_of(c: &Common) -> anyhow::Result<ProblemSpec> {
    Ok(ProblemSpec::from_name(&c.problem, c.e, c.alpha, c.mu)?)
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Schemes { action } => schemes(action),
        Command::Sweep(a) => {
            let reg = registry(&a.common.external)?;
            let methods = MethodSpec::resolve_all(&a.common.schemes, &reg)?;
            let (lo, hi, n) = triple(&a.costs)?;
            let costs = log_grid(lo, hi, n as usize)?;
            let problem = problem_of(&a.common)?;
            let recs = run_sweep(&problem, &methods, &costs, a.common.tf, SweepConfig { workers: a.common.workers })?;
            write_records(&recs, output(&a.common.out)?)?;
            Ok(())
        }
        Command::Scan(a) => {
            let reg = registry(&a.common.external)?;
            let methods = MethodSpec::resolve_all(&a.common.schemes, &reg)?;
            let (lo, hi, n) = triple(&a.params)?;
            let n = n as usize;
            let params: Vec<f64> =
                (0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect();
            let family = problem_of(&a.common)?;
            let recs = parameter_scan(
                &family,
                &methods,
                &params,
                a.cost,
                a.common.tf,
                SweepConfig { workers: a.common.workers },
            )?;
            write_records(&recs, output(&a.common.out)?)?;
            Ok(())
        }
        Command::Convergence(a) => convergence(a),
        Command::Arenstorf(a) => {
            let reg = registry(&a.external)?;
            let mut names = a.schemes.clone();
            for extra in ["RKN4_6", "RKN6_11"] {
                if reg.get(extra).is_ok() {
                    names.push(extra.into());
                } else {
                    eprintln!("note: {extra} not loaded (pass --external-coeffs), skipping");
                }
            }
            names.dedup();
            let (lo, hi, ratio) = triple(&a.steps)?;
            let steps = geometric_counts(lo as u64, hi as u64, ratio);
            let mut recs = Vec::new();
            for name in &names {
                let m = MethodSpec::resolve(name, &reg)?;
                recs.extend(arenstorf_run(&m, &steps, a.mu, SweepConfig { workers: a.workers })?);
            }
            write_records(&recs, output(&a.out)?)?;
            Ok(())
        }
        Command::Schrodinger(a) => {
            let reg = registry(&a.external)?;
            let scheme = reg.get(&a.scheme)?;
            let schedule = scheme.unfold()?;
            let grid = SpatialGrid::new(-8.0, 8.0, a.n)?;
            let v = poschl_teller_potential(&grid, a.depth);
            let run = evolve_sampled(&schedule, &v, &initial_gaussian(&grid), a.h, a.tf, a.sample_every)?;
            run.write_csv(output(&a.out)?)?;
            eprintln!("max norm error {:e}, max energy error {:e}", run.max_norm_err(), run.max_energy_err());
            Ok(())
        }
        Command::Integrate(a) => {
            let reg = registry(&a.common.external)?;
            let Some(name) = a.common.schemes.first() else { bail!("no scheme given") };
            let m = MethodSpec::resolve(name, &reg)?;
            let inst = problem_of(&a.common)?.instance()?;
            let mut rec = TrajectoryRecorder::new(a.stride);
            let r =
                integrate(m.stepper.as_ref(), inst.system.as_ref(), a.h, &inst.initial, a.common.tf, &mut [&mut rec])?;
            rec.write_csv(output(&a.common.out)?)?;
            eprintln!("{} steps, {} force evaluations", r.steps, r.stats.force_evaluations);
            Ok(())
        }
    }
}

fn schemes(action: SchemesAction) -> anyhow::Result<()> {
    match action {
        SchemesAction::List { external } => {
            let reg = registry(&external)?;
            println!(
                "{:<12} {:>4} {:>6} {:>5} {:>9} {:>9}  argmax",
                "name", "kind", "stages", "order", "Delta", "delta"
            );
            for s in reg.iter() {
                let norms = coefficient_norms(s);
                println!(
                    "{:<12} {:>4} {:>6} {:>5} {:>9.4} {:>9.4}  {}",
                    s.name,
                    s.kind.to_string(),
                    s.stages,
                    s.order,
                    norms.delta_1,
                    norms.delta_max,
                    norms.argmax
                );
            }
            Ok(())
        }
        SchemesAction::Check { name, external } => {
            let reg = registry(&external)?;
            let s = reg.get(&name)?;
            let norms = coefficient_norms(s);
            println!("{} ({}, {} stages, order {})", s.name, s.kind, s.stages, s.order);
            if let Ok(sched) = s.unfold() {
                let sum = |k| sched.entries().iter().filter(|f| f.kind == k).map(|f| f.coeff).sum::<f64>();
                println!("  drift sum - 1 = {:e}", sum(rknsplit::FlowKind::Drift) - 1.0);
                println!("  kick sum - 1  = {:e}", sum(rknsplit::FlowKind::Kick) - 1.0);
                println!("  palindromic   = {}", sched.is_palindromic());
            }
            println!("  Delta = {:.4} (table {:?})", norms.delta_1, s.metadata.delta_1norm);
            println!(
                "  delta = {:.4} at {} (table {:?} at {:?})",
                norms.delta_max, norms.argmax, s.metadata.delta_maxnorm, s.metadata.delta_argmax
            );
            if RKN8_SCHEMES.contains(&s.name.as_str()) {
                println!("  effective error (table) = {:?}", s.metadata.effective_error);
            }
            Ok(())
        }
    }
}

fn convergence(a: ConvergenceArgs) -> anyhow::Result<()> {
    let reg = registry(&a.common.external)?;
    let methods = MethodSpec::resolve_all(&a.common.schemes, &reg)?;
    let problem = problem_of(&a.common)?;
    let (lo, hi, ratio) = triple(&a.steps)?;
    let counts = geometric_counts(lo as u64, hi as u64, ratio);
    let window: Vec<f64> = a.window.split(':').map(str::parse).collect::<Result<_, _>>()?;
    if window.len() != 2 {
        bail!("window must be lo:hi");
    }
    let reference = match problem.exact(a.common.tf) {
        Some(s) => Reference::State(s),
        None => Reference::Doubled,
    };
    let mut out = output(&a.common.out)?;
    writeln!(out, "scheme,steps,h,force_evals,error")?;
    for m in &methods {
        let pts = convergence_study(&problem, m, a.common.tf, &counts, &reference)?;
        for p in &pts {
            writeln!(out, "{},{},{:e},{},{:e}", m.name, p.steps, p.h, p.force_evals, p.error)?;
        }
        let hs: Vec<(f64, f64)> = pts.iter().map(|p| (p.h, p.error)).collect();
        match fit_in_window(&hs, window[0], window[1]) {
            Ok((slope, used)) => eprintln!("{}: slope {slope:.3} from {used} points", m.name),
            Err(e) => eprintln!("{}: no fit ({e})", m.name),
        }
    }
    Ok(())
}
