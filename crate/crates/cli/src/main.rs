use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use opsample::channel::{
    apply_channel, assemble_system, quasiperiodize, zak_transform, DiscreteSpreadingFunction, IdentifierTrain,
};
use opsample::gabor::{build_gabor_matrix, generate_window, spark, spark_at_least, SparkTarget, Window, SPARK_LIMIT};
use opsample::io::{read_response_csv, read_spreading_csv, write_response_csv, write_spreading_csv, write_zak_csv, WindowFile};
use opsample::rates::{bunched_window_plan, rate_report};
use opsample::reconstruct::{recover_eta_smooth, recover_known, recover_symplectic, smooth_windows, ReconstructionReport};
use opsample::sparse::{recover_unknown_support, UnknownSupportOptions};
use opsample::support::{bandwidth, rectify, CellSupport, SupportFile};
use opsample::{Error, Result};
use rand::SeedableRng;

#[derive(Parser)]
#[command(name = "opsample", version, about = "Identify time-varying channels from delta-train responses")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "OPSAMPLE_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Relative rank threshold.
    #[arg(long, global = true, default_value_t = opsample::gabor::DEFAULT_RANK_TOL)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a window with a certified spark.
    GenWindow(GenWindowArgs),
    /// Spark of the Gabor matrix of a window.
    Spark(SparkArgs),
    /// Occupancy classes and bandwidth of a support.
    Rectify(SupportArg),
    /// Apply a channel to an identifier; write the response and its Zak transform.
    Simulate(SimulateArgs),
    /// Recover the spreading function from a response.
    Identify(IdentifyArgs),
    /// Estimate the active cells, then recover.
    RecoverSupport(RecoverSupportArgs),
    /// Sampling-rate diagnostics, optionally planning a bunched window.
    Rates(RatesArgs),
    /// Check the per-point linear system on simulated files.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Full,
    #[value(name = "spark_k")]
    SparkK,
}

#[derive(Args)]
struct GenWindowArgs {
    #[arg(long = "L")]
    l: usize,
    #[arg(long, value_enum, default_value = "full")]
    target: Target,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    max_draws: usize,
    /// Window JSON destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SparkArgs {
    #[arg(long)]
    window: PathBuf,
    /// Only check that every subset smaller than this is independent.
    #[arg(long)]
    at_least: Option<usize>,
}

#[derive(Args)]
struct SupportArg {
    #[arg(long)]
    support: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    support: PathBuf,
    #[arg(long)]
    window: PathBuf,
    /// Spreading-function CSV; a seeded random one when absent.
    #[arg(long)]
    eta: Option<PathBuf>,
    /// Chirp rate `a` of the identifier weights.
    #[arg(long)]
    chirp: Option<f64>,
    #[arg(long)]
    response: PathBuf,
    #[arg(long)]
    zak: Option<PathBuf>,
    /// Where to save the generated spreading function.
    #[arg(long)]
    eta_out: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    window: PathBuf,
    #[arg(long)]
    response: PathBuf,
    /// Known support; required unless `--unknown-support`.
    #[arg(long)]
    support: Option<PathBuf>,
    #[arg(long)]
    unknown_support: bool,
    #[arg(long, default_value_t = 2)]
    kmax: usize,
    #[arg(long)]
    chirp: Option<f64>,
    /// Overlap of smooth windows in subcells.
    #[arg(long)]
    smooth: Option<usize>,
    /// True spreading function for the error figure.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    eta_out: Option<PathBuf>,
    /// Report JSON destination; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverSupportArgs {
    #[arg(long)]
    window: PathBuf,
    #[arg(long)]
    response: PathBuf,
    #[arg(long, default_value_t = 2)]
    kmax: usize,
    #[arg(long, default_value_t = 1e-9)]
    residual_tol: f64,
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    /// Write the estimated support here.
    #[arg(long)]
    support_out: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    support: PathBuf,
    /// Identifier window; required unless `--bunched`.
    #[arg(long)]
    window: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Plan a bunched window instead of reading one.
    #[arg(long)]
    bunched: bool,
    #[arg(long, default_value_t = 1000)]
    max_draws: usize,
    #[arg(long)]
    window_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    eta: PathBuf,
    #[arg(long)]
    window: PathBuf,
    #[arg(long)]
    response: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    max_residual: f64,
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    Ok(std::fs::write(path, text)?)
}

fn emit(path: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => write(p, &(text + "\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_window(path: &Path) -> Result<Window> {
    serde_json::from_str::<WindowFile>(&read(path)?)?.to_window()
}

fn load_support(path: &Path) -> Result<CellSupport> {
    serde_json::from_str::<SupportFile>(&read(path)?)?.to_support()
}

fn train(t: f64, window: Window, chirp: Option<f64>) -> IdentifierTrain {
    match chirp {
        Some(a) => IdentifierTrain::chirped(t, window, a),
        None => IdentifierTrain::new(t, window),
    }
}

fn gen_window(cli: &Cli, a: &GenWindowArgs) -> Result<()> {
    let target = match (a.target, a.k) {
        (Target::Full, _) => SparkTarget::Full,
        (Target::SparkK, Some(k)) => SparkTarget::K(k),
        (Target::SparkK, None) => return Err(Error::InvalidParameters("--target spark_k needs --k".into())),
    };
    let gen = generate_window(a.l, target, cli.seed, a.max_draws)?;
    let value = serde_json::to_value(WindowFile::from_window(&gen.window))?;
    emit(a.out.as_deref(), &value)?;
    println!("spark={}", gen.spark);
    Ok(())
}

fn spark_cmd(cli: &Cli, a: &SparkArgs) -> Result<()> {
    let g = build_gabor_matrix(&load_window(&a.window)?);
    match a.at_least {
        Some(s) => println!("spark>={s}: {}", spark_at_least(&g, s, cli.tol)?),
        None if g.l() <= SPARK_LIMIT => println!("spark={}", spark(&g, cli.tol)?),
        None => {
            return Err(Error::SearchBudgetExceeded(format!(
                "L = {} is above {SPARK_LIMIT}; use --at-least",
                g.l()
            )))
        }
    }
    Ok(())
}

fn rectify_cmd(a: &SupportArg) -> Result<()> {
    let s = load_support(&a.support)?;
    let r = rectify(&s)?;
    let classes: Vec<Value> = r
        .nonempty_classes()
        .map(|c| json!({ "gamma": c.gamma, "points": c.points.len() }))
        .collect();
    emit(
        None,
        &json!({
            "gamma": r.gamma,
            "classes": classes,
            "num_classes": classes.len(),
            "max_cover": r.max_cover,
            "exact_cover": r.exact_cover,
            "bandwidth": bandwidth(&s),
            "omega": s.omega(),
            "subcell_height": s.dnu(),
        }),
    )
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let s = load_support(&a.support)?;
    let eta = match &a.eta {
        Some(p) => {
            let eta = read_spreading_csv(&read(p)?)?;
            if eta.grid() != s.grid() {
                return Err(Error::GridMismatch("spreading function and support use different grids".into()));
            }
            eta
        }
        None => DiscreteSpreadingFunction::random(&s, &mut rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed)),
    };
    let g = train(s.t(), load_window(&a.window)?, a.chirp);
    let hg = apply_channel(&eta, &g)?;
    write(&a.response, &write_response_csv(&hg))?;
    if let Some(p) = &a.zak {
        write(p, &write_zak_csv(&zak_transform(&hg, 1.0 / s.omega())?))?;
    }
    if let Some(p) = &a.eta_out {
        write(p, &write_spreading_csv(&eta))?;
    }
    Ok(())
}

fn finish(report: ReconstructionReport, truth: Option<&Path>, eta_out: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let report = match truth {
        Some(p) => report.with_truth(&read_spreading_csv(&read(p)?)?),
        None => report,
    };
    if let Some(p) = eta_out {
        write(p, &write_spreading_csv(&report.eta_hat))?;
    }
    emit(out, &report.to_json())
}

fn identify(cli: &Cli, a: &IdentifyArgs) -> Result<()> {
    let window = load_window(&a.window)?;
    let g = build_gabor_matrix(&window);
    let hg = read_response_csv(&read(&a.response)?)?;
    let report = if a.unknown_support {
        let z = zak_transform(&hg, 1.0 / hg.grid.omega())?;
        let mut opts = UnknownSupportOptions::new(a.kmax);
        opts.seed = cli.seed;
        recover_unknown_support(&z, &g, &opts)?.report
    } else {
        let path = a
            .support
            .as_ref()
            .ok_or_else(|| Error::InvalidParameters("known-support mode needs --support".into()))?;
        let s = load_support(path)?;
        match (a.chirp, a.smooth) {
            (Some(chirp), _) => recover_symplectic(&hg, &g, &s, chirp)?,
            (None, Some(e)) => {
                let z = zak_transform(&hg, 1.0 / s.omega())?;
                recover_eta_smooth(&z, &g, &s, &smooth_windows(s.grid(), e)?)?
            }
            (None, None) => recover_known(&zak_transform(&hg, 1.0 / s.omega())?, &g, &s)?,
        }
    };
    finish(report, a.truth.as_deref(), a.eta_out.as_deref(), a.report.as_deref())
}

fn recover_support(cli: &Cli, a: &RecoverSupportArgs) -> Result<()> {
    let g = build_gabor_matrix(&load_window(&a.window)?);
    let hg = read_response_csv(&read(&a.response)?)?;
    let z = zak_transform(&hg, 1.0 / hg.grid.omega())?;
    let mut opts = UnknownSupportOptions::new(a.kmax);
    opts.tol = a.residual_tol;
    opts.blocks = a.blocks;
    opts.seed = cli.seed;
    let rep = recover_unknown_support(&z, &g, &opts)?;
    if let Some(p) = &a.support_out {
        write(p, &serde_json::to_string_pretty(&SupportFile::from_support(&rep.support))?)?;
    }
    emit(None, &json!({ "gamma": rep.support.active_cells(), "estimates": rep.estimates }))
}

fn rates(cli: &Cli, a: &RatesArgs) -> Result<()> {
    let s = load_support(&a.support)?;
    let (window, report) = if a.bunched {
        bunched_window_plan(&s, a.eps, cli.seed, a.max_draws)?
    } else {
        let path = a
            .window
            .as_ref()
            .ok_or_else(|| Error::InvalidParameters("rates needs --window or --bunched".into()))?;
        let w = load_window(path)?;
        let r = rate_report(&IdentifierTrain::new(s.t(), w.clone()), &s, a.eps);
        (w, r)
    };
    if let Some(p) = &a.window_out {
        write(p, &serde_json::to_string_pretty(&WindowFile::from_window(&window))?)?;
    }
    emit(None, &serde_json::to_value(report)?)
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let eta = read_spreading_csv(&read(&a.eta)?)?;
    let window = load_window(&a.window)?;
    let hg = read_response_csv(&read(&a.response)?)?;
    let grid = eta.grid();
    if hg.grid != grid {
        return Err(Error::GridMismatch("response and spreading function use different grids".into()));
    }
    let z = zak_transform(&hg, 1.0 / grid.omega())?;
    let qp = quasiperiodize(&eta);
    let g = build_gabor_matrix(&window);
    let mut worst: f64 = 0.0;
    for u in 0..grid.p {
        for v in 0..grid.p {
            let sys = assemble_system(&qp, &z, &g, u, v)?;
            let scale = 1.0 + sys.eta.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(sys.residual(&g) / scale);
        }
    }
    let ok = worst <= a.max_residual;
    println!("max_residual={worst:.16e} {}", if ok { "ok" } else { "FAILED" });
    Ok(ok)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::RankDeficient { .. }
        | Error::NoConvergence { .. }
        | Error::GenerationFailed { .. }
        | Error::SparkTargetUnmet { .. } => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::GenWindow(a) => gen_window(cli, a)?,
        Command::Spark(a) => spark_cmd(cli, a)?,
        Command::Rectify(a) => rectify_cmd(a)?,
        Command::Simulate(a) => simulate(cli, a)?,
        Command::Identify(a) => identify(cli, a)?,
        Command::RecoverSupport(a) => recover_support(cli, a)?,
        Command::Rates(a) => rates(cli, a)?,
        Command::Verify(a) => return verify(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
