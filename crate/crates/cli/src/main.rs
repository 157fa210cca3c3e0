use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use stratsim::diagnostics::{
    band_bump, duhamel_strichartz_ratio, linear_decay_fit, log_spaced_times, loglog_fit, strichartz_ratio,
    AdmissiblePair, DiagnosticError,
};
use stratsim::experiments::{
    fit_scaling, lifespan_sweep, make_initial_data, simulate, time_scaling_check, ExperimentError, InitialState,
    ModelKind, SweepPlan, SweepRecord,
};
use stratsim::io::{
    fmt_f64, load_config, plot_script, save_checkpoint, write_norm_reports, write_records, write_table, Checkpoint,
    CheckpointError, ConfigError, RunConfig,
};
use stratsim::selftest::run_selftest;
use stratsim::spectral::{make_grid, SpectralField};

#[derive(Parser, Debug)]
#[command(name = "stratsim", version, about = "Dispersive stratified flow simulator and measurement harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the initial data, overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write a matplotlib script next to every CSV.
    #[arg(long, global = true)]
    emit_plots: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One nonlinear trajectory with its norm time series.
    Simulate,
    /// Lifespan sweep over the epsilon and kappa axes.
    Sweep {
        /// 128^2 grid and three epsilon points.
        #[arg(long)]
        quick: bool,
    },
    /// Linear decay fits for bands -1..=2.
    Decay {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Box side in units of pi.
        #[arg(long, default_value_t = 200.0)]
        length_pi: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 5.0)]
        t_min: f64,
        #[arg(long, default_value_t = 150.0)]
        t_max: f64,
    },
    /// Homogeneous and Duhamel Strichartz ratios across kappa.
    Strichartz {
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 100.0)]
        length_pi: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0])]
        kappas: Vec<f64>,
    },
    /// Time-scaling symmetry discrepancy at dt and dt/2.
    Symmetry {
        #[arg(long, default_value_t = 4.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
    },
    /// Exact invariants on random states.
    Selftest {
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidParameter(_) | ExperimentError::ResolutionMismatch => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<DiagnosticError> for Failure {
    fn from(e: DiagnosticError) -> Self {
        match e {
            DiagnosticError::NonFinite => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Context {
    config: RunConfig,
    out: PathBuf,
    emit_plots: bool,
}

impl Context {
    fn new(common: &Common) -> Result<Self, Failure> {
        let mut config = match &common.config {
            Some(path) => load_config(path)?,
            None => RunConfig::defaults(ModelKind::Boussinesq),
        };
        if let Some(seed) = common.seed {
            config.initial.seed = seed;
        }
        let out = common.out.clone().unwrap_or_else(|| config.output_dir.clone());
        fs::create_dir_all(&out)?;
        Ok(Context { config, out, emit_plots: common.emit_plots })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Outcome {
        write_table(fs::File::create(self.path(name))?, header, rows)?;
        Ok(())
    }

    fn plot(&self, csv_name: &str, x: &str, ys: &[&str], loglog: bool, title: &str) -> Outcome {
        if self.emit_plots {
            let script = Path::new(csv_name).with_extension("py");
            fs::write(self.path(&script.to_string_lossy()), plot_script(csv_name, x, ys, loglog, title))?;
        }
        Ok(())
    }
}

fn run_simulate(ctx: &Context) -> Outcome {
    let cfg = &ctx.config;
    let init = make_initial_data(&cfg.initial, cfg.model, cfg.kappa, &cfg.make_grid())?;
    info!("simulating {} to t = {}", cfg.model, cfg.stepper.t_end);
    let sim = simulate(&init, &cfg.stepper, cfg.initial.n_regularity)?;
    write_norm_reports(&sim.reports, fs::File::create(ctx.path("norms.csv"))?)?;
    let checkpoint = match sim.final_state {
        InitialState::Boussinesq(z) => Checkpoint::Dispersive(z),
        InitialState::Sqg(s) => Checkpoint::Sqg(s),
    };
    save_checkpoint(&checkpoint, &ctx.path("final.ckpt"))?;
    ctx.plot("norms.csv", "time", &["sobolev_hn", "besov_b1_inf_1", "grad_linf"], false, "norms")?;
    let last = sim.reports.last().expect("at least the initial report");
    println!("model {} kappa {} epsilon {}", cfg.model, cfg.kappa, cfg.initial.epsilon);
    println!("steps {} final time {:.6}", sim.steps, last.time);
    println!("relative L2 energy drift {:.3e}", sim.energy_drift);
    println!("accumulated bootstrap norm {:.6e}", last.accumulated_bootstrap);
    Ok(())
}

fn strictly_decreasing(records: &[&SweepRecord]) -> bool {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    sorted.windows(2).all(|w| w[1].t_star < w[0].t_star)
}

fn run_sweep(ctx: &Context, quick: bool) -> Outcome {
    let mut plan = ctx.config.sweep_plan();
    if quick {
        let q = SweepPlan::quick();
        plan.grid_n = q.grid_n;
        plan.eps_axis = q.eps_axis;
        plan.kappa_axis = q.kappa_axis;
    }
    info!("running {} sweep points", plan.points().len());
    let records = lifespan_sweep(&plan)?;
    let (csv_path, json_path) = write_records(&records, &ctx.path("sweep"))?;
    ctx.plot("sweep.csv", "epsilon", &["T_star"], true, "lifespan")?;
    for r in &records {
        println!("eps {:.4} kappa {:.4} T* {:.4} ({})", r.epsilon, r.kappa, r.t_star, r.stop_reason);
    }
    let eps_axis: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| r.kappa == plan.eps_axis_kappa && !r.stop_reason.is_censored())
        .collect();
    println!(
        "T* strictly decreasing in epsilon: {} ({} uncensored points)",
        strictly_decreasing(&eps_axis),
        eps_axis.len()
    );
    match fit_scaling(&records, plan.eps_axis_kappa, plan.kappa_axis_eps) {
        Ok(fit) => {
            let verdict = |r2: f64| if r2 >= 0.95 { "accepted as a fit" } else { "not accepted as a fit" };
            println!(
                "alpha {:.4} (reference -4/3), R^2 {:.4}, {}",
                fit.alpha_eps,
                fit.r_squared_eps,
                verdict(fit.r_squared_eps)
            );
            println!(
                "beta {:.4} (reference +1/3), R^2 {:.4}, {}",
                fit.beta_kappa,
                fit.r_squared_kappa,
                verdict(fit.r_squared_kappa)
            );
        }
        Err(e) => println!("no scaling fit: {e}"),
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn run_decay(ctx: &Context, n: usize, length_pi: f64, kappa: f64, t_min: f64, t_max: f64) -> Outcome {
    let l = length_pi * PI;
    let grid = make_grid::<f64>(n, l, ctx.config.grid.dealias_fraction).map_err(|e| Failure::Config(e.to_string()))?;
    let times = log_spaced_times(t_min, t_max, 10);
    let bands = [-1, 0, 1, 2];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut summary = Vec::new();
    for k in bands {
        let f = band_bump(&grid, k, [1.0, 2.0], [l / 2.0, l / 2.0]);
        let fit = linear_decay_fit(&f, kappa, k, &times, Some(4.0))?;
        let (_, l4, l4_fit) = fit.lp.expect("requested");
        println!(
            "band {k}: sup slope {:.4} (R^2 {:.4}), L4 slope {:.4} (R^2 {:.4})",
            fit.sup_fit.slope, fit.sup_fit.r_squared, l4_fit.slope, l4_fit.r_squared
        );
        summary.push(vec![
            k.to_string(),
            fmt_f64(fit.sup_fit.slope),
            fmt_f64(fit.sup_fit.r_squared),
            fmt_f64(l4_fit.slope),
            fmt_f64(l4_fit.r_squared),
        ]);
        columns.push(fit.sup_norms);
        columns.push(l4);
    }
    let header: Vec<String> = std::iter::once("time".to_string())
        .chain(bands.iter().flat_map(|k| [format!("sup_band_{k}"), format!("l4_band_{k}")]))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| std::iter::once(fmt_f64(t)).chain(columns.iter().map(|c| fmt_f64(c[i]))).collect())
        .collect();
    ctx.table("decay.csv", &header_refs, &rows)?;
    ctx.table("decay_fits.csv", &["band", "sup_slope", "sup_r_squared", "l4_slope", "l4_r_squared"], &summary)?;
    let sups: Vec<&str> = header_refs.iter().copied().filter(|h| h.starts_with("sup")).collect();
    ctx.plot("decay.csv", "time", &sups, true, "linear decay")?;
    Ok(())
}

fn pulse_forcing(base: SpectralField<f64>) -> impl Fn(f64) -> SpectralField<f64> {
    let centers = [2.0, 6.0, 10.0, 14.0, 18.0];
    let weights = [1.0, 0.6, 1.3, 0.8, 1.1];
    let width: f64 = 0.2;
    move |s| {
        let a: f64 = centers
            .iter()
            .zip(&weights)
            .map(|(c, w)| w * (-(s - c) * (s - c) / (2.0 * width * width)).exp())
            .sum();
        base.scaled(a)
    }
}

fn run_strichartz(ctx: &Context, n: usize, length_pi: f64, kappas: &[f64]) -> Outcome {
    let l = length_pi * PI;
    let grid = make_grid::<f64>(n, l, ctx.config.grid.dealias_fraction).map_err(|e| Failure::Config(e.to_string()))?;
    let center = [l / 2.0, l / 2.0];
    let pair = AdmissiblePair::from_q(4.0)?;
    let data = band_bump(&grid, 0, [1.0, 2.0], center);
    let forcing = band_bump(&grid, 0, [1.0, 1.0], center);
    let mut rows = Vec::new();
    let mut lhs = Vec::new();
    for &kappa in kappas {
        let m = strichartz_ratio(&data, kappa, pair, 0, l / 32.0)?;
        // the pulse train needs the longer horizon, which only fits the window for kappa <= 4
        let duhamel = if 4.0 * kappa <= 16.0 {
            let d = duhamel_strichartz_ratio(pulse_forcing(forcing.clone()), kappa, pair, 0, l / 16.0, 0.05)?;
            println!("kappa {kappa}: lhs {:.6e} ratio {:.6} duhamel ratio {:.6}", m.lhs, m.ratio, d.ratio);
            fmt_f64(d.ratio)
        } else {
            println!("kappa {kappa}: lhs {:.6e} ratio {:.6} duhamel skipped (outside the window)", m.lhs, m.ratio);
            String::new()
        };
        rows.push(vec![fmt_f64(kappa), fmt_f64(m.lhs), fmt_f64(m.ratio), duhamel]);
        lhs.push(m.lhs);
    }
    if kappas.len() >= 2 {
        let fit = loglog_fit(kappas, &lhs)?;
        println!("kappa exponent of the (4, inf) norm {:.4} (R^2 {:.4}), scaling predicts -0.25", fit.slope, fit.r_squared);
    }
    let at = |k: i32| -> Result<f64, Failure> {
        let m = strichartz_ratio(&band_bump(&grid, k, [1.0, 2.0], center), 1.0, pair, k, l / 32.0)?;
        Ok(m.lhs / m.data_norm)
    };
    println!("band shift factor {:.4}, scaling predicts 2", at(1)? / at(0)?);
    ctx.table("strichartz.csv", &["kappa", "lhs", "ratio", "duhamel_ratio"], &rows)?;
    ctx.plot("strichartz.csv", "kappa", &["lhs"], true, "L4 Linf norm against kappa")?;
    Ok(())
}

fn run_symmetry(ctx: &Context, kappa: f64, horizon: f64, dt: f64) -> Outcome {
    let cfg = &ctx.config;
    let init = make_initial_data(&cfg.initial, ModelKind::Boussinesq, 1.0, &cfg.make_grid())?;
    let InitialState::Boussinesq(z) = init else { unreachable!("asked for Boussinesq data") };
    let v = z.to_vorticity();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for h in [dt, dt / 2.0] {
        let d = time_scaling_check(&v.omega, &v.rho, kappa, horizon, h)?;
        println!("dt {h}: discrepancy {d:.4e}");
        rows.push(vec![fmt_f64(h), fmt_f64(d)]);
        values.push(d);
    }
    println!("halving ratio {:.3} (fourth order gives 16)", values[0] / values[1]);
    ctx.table("symmetry.csv", &["dt", "discrepancy"], &rows)?;
    ctx.plot("symmetry.csv", "dt", &["discrepancy"], true, "time-scaling discrepancy")?;
    Ok(())
}

fn run_selftest_command(ctx: &Context, samples: usize) -> Outcome {
    let checks = run_selftest(ctx.config.initial.seed, samples);
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.to_string(), fmt_f64(c.value), fmt_f64(c.limit), c.passed.to_string()])
        .collect();
    for c in &checks {
        println!("[{}] {}: {:.3e} (limit {:.0e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    ctx.table("selftest.csv", &["check", "value", "limit", "passed"], &rows)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} self-test checks failed")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    if let Some(k) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    let ctx = Context::new(&cli.common)?;
    match cli.command {
        Command::Simulate => run_simulate(&ctx),
        Command::Sweep { quick } => run_sweep(&ctx, quick),
        Command::Decay { n, length_pi, kappa, t_min, t_max } => run_decay(&ctx, n, length_pi, kappa, t_min, t_max),
        Command::Strichartz { n, length_pi, ref kappas } => run_strichartz(&ctx, n, length_pi, kappas),
        Command::Symmetry { kappa, horizon, dt } => run_symmetry(&ctx, kappa, horizon, dt),
        Command::Selftest { samples } => run_selftest_command(&ctx, samples),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
