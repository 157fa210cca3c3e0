//! Run configuration, checkpoints and result files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use serde::Deserialize;
use thiserror::Error;

use crate::diagnostics::NormReport;
use crate::experiments::{InitialSpec, ModelKind, Profile, SweepPlan, SweepRecord, Thresholds};
use crate::model::{ModelError, SqgState, VorticityState, ZState};
use crate::spectral::{make_grid, Grid, SpectralError, SpectralField};
use crate::timestepper::{Scheme, StepSize, StepperConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

impl ConfigError {
    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field, message: message.into() }
    }

    /// Dotted path of the offending field, for validation errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelKind,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    physics: RawPhysics,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    stepper: RawStepper,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Option<usize>,
    length: Option<f64>,
    dealias_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    kappa: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    profile: Option<Profile>,
    epsilon: Option<f64>,
    n_regularity: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStepper {
    scheme: Option<String>,
    dt: Option<f64>,
    cfl_safety: Option<f64>,
    t_end: Option<f64>,
    diagnostic_stride: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    h_n_factor: Option<f64>,
    bootstrap_threshold: Option<f64>,
    eps_axis: Option<Vec<f64>>,
    eps_axis_kappa: Option<f64>,
    kappa_axis: Option<Vec<f64>>,
    kappa_axis_eps: Option<f64>,
    horizon_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
    pub dealias_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub thresholds: Thresholds,
    pub eps_axis: Vec<f64>,
    pub eps_axis_kappa: f64,
    pub kappa_axis: Vec<f64>,
    pub kappa_axis_eps: f64,
    pub horizon_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub grid: GridConfig,
    pub kappa: f64,
    pub initial: InitialSpec,
    pub stepper: StepperConfig<f64>,
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
}

pub const DEFAULT_T_END: f64 = 20.0;
pub const DEFAULT_CFL_SAFETY: f64 = 0.5;

impl RunConfig {
    /// Every setting at its default.
    pub fn defaults(model: ModelKind) -> Self {
        let plan = SweepPlan::default();
        RunConfig {
            model,
            grid: GridConfig {
                n: plan.grid_n,
                length: plan.length,
                dealias_fraction: plan.dealias_fraction,
            },
            kappa: 1.0,
            initial: InitialSpec {
                profile: Profile::GaussianPair,
                epsilon: 0.3,
                n_regularity: plan.n_regularity,
                seed: 0,
            },
            stepper: StepperConfig {
                scheme: Scheme::Ifrk4,
                step: StepSize::Cfl(DEFAULT_CFL_SAFETY),
                t_end: DEFAULT_T_END,
                diagnostic_stride: plan.diagnostic_stride,
            },
            experiment: ExperimentConfig {
                thresholds: plan.thresholds,
                eps_axis: plan.eps_axis,
                eps_axis_kappa: plan.eps_axis_kappa,
                kappa_axis: plan.kappa_axis,
                kappa_axis_eps: plan.kappa_axis_eps,
                horizon_factor: plan.horizon_factor,
            },
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn make_grid(&self) -> Grid<f64> {
        make_grid(self.grid.n, self.grid.length, self.grid.dealias_fraction).expect("validated at load")
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        SweepPlan {
            model: self.model,
            grid_n: self.grid.n,
            length: self.grid.length,
            dealias_fraction: self.grid.dealias_fraction,
            profile: self.initial.profile,
            n_regularity: self.initial.n_regularity,
            seed: self.initial.seed,
            eps_axis: self.experiment.eps_axis.clone(),
            eps_axis_kappa: self.experiment.eps_axis_kappa,
            kappa_axis: self.experiment.kappa_axis.clone(),
            kappa_axis_eps: self.experiment.kappa_axis_eps,
            thresholds: self.experiment.thresholds,
            horizon_factor: self.experiment.horizon_factor,
            step: self.stepper.step,
            diagnostic_stride: self.stepper.diagnostic_stride,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        make_grid::<f64>(self.grid.n, self.grid.length, self.grid.dealias_fraction).map_err(|e| match e {
            SpectralError::InvalidResolution(_) => ConfigError::invalid("grid.n", e.to_string()),
            SpectralError::InvalidLength(_) => ConfigError::invalid("grid.length", e.to_string()),
            _ => ConfigError::invalid("grid.dealias_fraction", e.to_string()),
        })?;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(ConfigError::invalid("physics.kappa", format!("must be finite and >= 0, got {}", self.kappa)));
        }
        positive("initial.epsilon", self.initial.epsilon)?;
        if !(self.initial.n_regularity > 3.0 && self.initial.n_regularity.is_finite()) {
            return Err(ConfigError::invalid(
                "initial.n_regularity",
                format!("must exceed 3, got {}", self.initial.n_regularity),
            ));
        }
        match self.stepper.step {
            StepSize::Fixed(dt) => positive("stepper.dt", dt)?,
            StepSize::Cfl(s) if !(s > 0.0 && s < 1.0) => {
                return Err(ConfigError::invalid("stepper.cfl_safety", format!("must lie in (0, 1), got {s}")));
            }
            StepSize::Cfl(_) => {}
        }
        positive("stepper.t_end", self.stepper.t_end)?;
        if self.stepper.diagnostic_stride == 0 {
            return Err(ConfigError::invalid("stepper.diagnostic_stride", "must be at least 1"));
        }
        let e = &self.experiment;
        positive("experiment.h_n_factor", e.thresholds.h_n_factor - 1.0)
            .map_err(|_| ConfigError::invalid("experiment.h_n_factor", "must exceed 1"))?;
        positive("experiment.bootstrap_threshold", e.thresholds.bootstrap)?;
        positive("experiment.eps_axis_kappa", e.eps_axis_kappa)?;
        positive("experiment.kappa_axis_eps", e.kappa_axis_eps)?;
        positive("experiment.horizon_factor", e.horizon_factor)?;
        for &x in &e.eps_axis {
            positive("experiment.eps_axis", x)?;
        }
        for &x in &e.kappa_axis {
            positive("experiment.kappa_axis", x)?;
        }
        Ok(())
    }
}

fn positive(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be finite and > 0, got {x}")))
    }
}

/// Parses and validates a TOML configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") {
            ConfigError::UnknownKey(msg)
        } else {
            ConfigError::Parse(msg)
        }
    })?;
    let mut cfg = RunConfig::defaults(raw.model);
    let g = raw.grid;
    cfg.grid.n = g.n.unwrap_or(cfg.grid.n);
    cfg.grid.length = g.length.unwrap_or(cfg.grid.length);
    cfg.grid.dealias_fraction = g.dealias_fraction.unwrap_or(cfg.grid.dealias_fraction);
    cfg.kappa = raw.physics.kappa.unwrap_or(cfg.kappa);
    let i = raw.initial;
    cfg.initial.profile = i.profile.unwrap_or(cfg.initial.profile);
    cfg.initial.epsilon = i.epsilon.unwrap_or(cfg.initial.epsilon);
    cfg.initial.n_regularity = i.n_regularity.unwrap_or(cfg.initial.n_regularity);
    cfg.initial.seed = i.seed.unwrap_or(cfg.initial.seed);
    let s = raw.stepper;
    if let Some(name) = s.scheme {
        cfg.stepper.scheme = match name.as_str() {
            "ifrk4" => Scheme::Ifrk4,
            "rk4" => Scheme::Rk4,
            other => return Err(ConfigError::invalid("stepper.scheme", format!("expected ifrk4 or rk4, got {other:?}"))),
        };
    }
    cfg.stepper.step = match (s.dt, s.cfl_safety) {
        (Some(_), Some(_)) => return Err(ConfigError::invalid("stepper.dt", "give either dt or cfl_safety, not both")),
        (Some(dt), None) => StepSize::Fixed(dt),
        (None, Some(c)) => StepSize::Cfl(c),
        (None, None) => cfg.stepper.step,
    };
    cfg.stepper.t_end = s.t_end.unwrap_or(cfg.stepper.t_end);
    cfg.stepper.diagnostic_stride = s.diagnostic_stride.unwrap_or(cfg.stepper.diagnostic_stride);
    let e = raw.experiment;
    let x = &mut cfg.experiment;
    x.thresholds.h_n_factor = e.h_n_factor.unwrap_or(x.thresholds.h_n_factor);
    x.thresholds.bootstrap = e.bootstrap_threshold.unwrap_or(x.thresholds.bootstrap);
    x.eps_axis = e.eps_axis.unwrap_or(std::mem::take(&mut x.eps_axis));
    x.eps_axis_kappa = e.eps_axis_kappa.unwrap_or(x.eps_axis_kappa);
    x.kappa_axis = e.kappa_axis.unwrap_or(std::mem::take(&mut x.kappa_axis));
    x.kappa_axis_eps = e.kappa_axis_eps.unwrap_or(x.kappa_axis_eps);
    x.horizon_factor = e.horizon_factor.unwrap_or(x.horizon_factor);
    if let Some(dir) = raw.output.dir {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown model tag {0}")]
    UnknownModel(u32),
    #[error("truncated checkpoint: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint has {found} trailing bytes")]
    TrailingBytes { found: usize },
    #[error("checkpoint grid (n = {n}, L = {length}) does not match the run grid")]
    GridMismatch { n: usize, length: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"STRATSIM";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 3 + 8 * 3;

#[derive(Debug, Clone)]
pub enum Checkpoint {
    Vorticity(VorticityState<f64>),
    Dispersive(ZState<f64>),
    Sqg(SqgState<f64>),
}

impl Checkpoint {
    fn tag(&self) -> u32 {
        match self {
            Checkpoint::Vorticity(_) => 0,
            Checkpoint::Dispersive(_) => 1,
            Checkpoint::Sqg(_) => 2,
        }
    }

    fn field_count(tag: u32) -> Result<usize, CheckpointError> {
        match tag {
            0 | 1 => Ok(2),
            2 => Ok(1),
            t => Err(CheckpointError::UnknownModel(t)),
        }
    }

    fn parts(&self) -> (Vec<&SpectralField<f64>>, f64, f64) {
        match self {
            Checkpoint::Vorticity(s) => (vec![&s.omega, &s.rho], s.kappa, s.time),
            Checkpoint::Dispersive(s) => (vec![&s.z_plus, &s.z_minus], s.kappa, s.time),
            Checkpoint::Sqg(s) => (vec![&s.theta], s.kappa, s.time),
        }
    }

    pub fn fields(&self) -> Vec<&SpectralField<f64>> {
        self.parts().0
    }

    pub fn time(&self) -> f64 {
        self.parts().2
    }

    pub fn kappa(&self) -> f64 {
        self.parts().1
    }
}

/// Serializes a state: magic, version, model tag, `n`, `L`, `kappa`, time,
/// then each field's coefficients as little-endian `(re, im)` pairs in the
/// grid's flat FFT order.
pub fn encode_checkpoint(state: &Checkpoint) -> Vec<u8> {
    let (fields, kappa, time) = state.parts();
    let grid = fields[0].grid();
    let mut out = Vec::with_capacity(HEADER_LEN + fields.len() * grid.len() * 16);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&state.tag().to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&grid.length().to_le_bytes());
    out.extend_from_slice(&kappa.to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for f in fields {
        for c in f.coeffs() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("four bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("eight bytes"))
}

/// Inverse of [`encode_checkpoint`]. The grid is rebuilt with
/// `dealias_fraction`, which the format does not store.
pub fn decode_checkpoint(bytes: &[u8], dealias_fraction: f64) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    let version = u32_at(bytes, 8);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let tag = u32_at(bytes, 12);
    let count = Checkpoint::field_count(tag)?;
    let n = u32_at(bytes, 16) as usize;
    let length = f64_at(bytes, 20);
    let kappa = f64_at(bytes, 28);
    let time = f64_at(bytes, 36);
    let grid = make_grid(n, length, dealias_fraction)?;
    let expected = HEADER_LEN + count * n * n * 16;
    if bytes.len() < expected {
        return Err(CheckpointError::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(CheckpointError::TrailingBytes { found: bytes.len() - expected });
    }
    let mut fields = (0..count).map(|k| {
        let base = HEADER_LEN + k * n * n * 16;
        let coeffs = (0..n * n)
            .map(|i| Complex::new(f64_at(bytes, base + 16 * i), f64_at(bytes, base + 16 * i + 8)))
            .collect();
        SpectralField::from_coeffs(&grid, coeffs)
    });
    let mut next = || fields.next().expect("count checked").map_err(CheckpointError::from);
    Ok(match tag {
        0 => {
            let mut s = VorticityState::new(next()?, next()?, kappa)?;
            s.time = time;
            Checkpoint::Vorticity(s)
        }
        1 => {
            let mut s = ZState::new(next()?, next()?, kappa)?;
            s.time = time;
            Checkpoint::Dispersive(s)
        }
        _ => {
            let mut s = SqgState::new(next()?, kappa)?;
            s.time = time;
            Checkpoint::Sqg(s)
        }
    })
}

pub fn save_checkpoint(state: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(state))?;
    Ok(())
}

/// Loads a checkpoint on a grid with the default 2/3 dealiasing.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    decode_checkpoint(&fs::read(path)?, 2.0 / 3.0)
}

/// Loads a checkpoint to continue a run on `grid`, which must match the
/// stored resolution and box.
pub fn load_checkpoint_into(path: &Path, grid: &Grid<f64>) -> Result<Checkpoint, CheckpointError> {
    let state = decode_checkpoint(&fs::read(path)?, grid.dealias_fraction())?;
    let g = state.fields()[0].grid().clone();
    if g.n() != grid.n() || g.length() != grid.length() {
        return Err(CheckpointError::GridMismatch { n: g.n(), length: g.length() });
    }
    Ok(state)
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "model",
    "epsilon",
    "kappa",
    "n_regularity",
    "T_star",
    "stop_reason",
    "seed",
    "grid_n",
    "L",
    "dt",
];

/// Seventeen significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn record_row(r: &SweepRecord) -> [String; 10] {
    [
        r.model.to_string(),
        fmt_f64(r.epsilon),
        fmt_f64(r.kappa),
        fmt_f64(r.n_regularity),
        fmt_f64(r.t_star),
        r.stop_reason.to_string(),
        r.seed.to_string(),
        r.grid_n.to_string(),
        fmt_f64(r.length),
        fmt_f64(r.dt),
    ]
}

/// Writes a header row and one row per entry.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv<W: Write>(records: &[SweepRecord], out: W) -> csv::Result<()> {
    let rows: Vec<Vec<String>> = records.iter().map(|r| record_row(r).to_vec()).collect();
    write_table(out, &RECORD_COLUMNS, &rows)
}

pub fn write_records_json<W: Write>(records: &[SweepRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "[")?;
    for (i, r) in records.iter().enumerate() {
        let row = record_row(r);
        let fields: Vec<String> = RECORD_COLUMNS
            .iter()
            .zip(row.iter())
            .enumerate()
            .map(|(k, (key, v))| {
                // model and stop_reason are the only string columns
                if k == 0 || k == 5 {
                    format!("\"{key}\": \"{v}\"")
                } else {
                    format!("\"{key}\": {v}")
                }
            })
            .collect();
        let sep = if i + 1 == records.len() { "" } else { "," };
        writeln!(out, "  {{{}}}{sep}", fields.join(", "))?;
    }
    writeln!(out, "]")
}

/// Writes `<stem>.csv` and `<stem>.json` and returns both paths.
pub fn write_records(records: &[SweepRecord], stem: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    let csv_path = stem.with_extension("csv");
    let json_path = stem.with_extension("json");
    write_records_csv(records, fs::File::create(&csv_path)?).map_err(std::io::Error::other)?;
    write_records_json(records, std::io::BufWriter::new(fs::File::create(&json_path)?))?;
    Ok((csv_path, json_path))
}

pub const REPORT_COLUMNS: [&str; 7] = [
    "time",
    "sobolev_hn",
    "besov_b1_inf_1",
    "grad_linf",
    "l2_energy",
    "accumulated_bootstrap",
    "accumulated_blowup",
];

pub fn write_norm_reports<W: Write>(reports: &[NormReport<f64>], out: W) -> csv::Result<()> {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            [
                r.time,
                r.sobolev_hn,
                r.besov_b1_inf_1,
                r.grad_linf,
                r.l2_energy,
                r.accumulated_bootstrap,
                r.accumulated_blowup,
            ]
            .iter()
            .map(|&x| fmt_f64(x))
            .collect()
        })
        .collect();
    write_table(out, &REPORT_COLUMNS, &rows)
}

/// A standalone matplotlib script that reads `csv_name` from its own
/// directory and plots `y_columns` against `x_column`, on log axes if asked.
pub fn plot_script(csv_name: &str, x_column: &str, y_columns: &[&str], loglog: bool, title: &str) -> String {
    let ys: Vec<String> = y_columns.iter().map(|c| format!("{c:?}")).collect();
    let scale = if loglog { "ax.set_xscale(\"log\")\nax.set_yscale(\"log\")\n" } else { "" };
    format!(
        "import csv\nimport os\nimport matplotlib.pyplot as plt\n\n\
here = os.path.dirname(os.path.abspath(__file__))\n\
with open(os.path.join(here, {csv_name:?})) as fh:\n    rows = list(csv.DictReader(fh))\n\n\
fig, ax = plt.subplots()\n\
for col in [{ys}]:\n    ax.plot([float(r[{x_column:?}]) for r in rows], [float(r[col]) for r in rows], \"o-\", label=col)\n\
{scale}ax.set_xlabel({x_column:?})\nax.set_title({title:?})\nax.legend()\n\
fig.savefig(os.path.join(here, {png:?}), dpi=150)\n",
        ys = ys.join(", "),
        png = Path::new(csv_name).with_extension("png").display().to_string(),
    )
}
