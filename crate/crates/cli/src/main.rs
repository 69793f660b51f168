use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ionprobe::config::ConfigDocument;
use ionprobe::dataset::ScanKind;
use ionprobe::engine::{differential_shift, ShiftEngine};
use ionprobe::fit::{
    alignment_report, fit_beam_profile, fit_frequency, fit_hwp_scan, fit_power_law,
    fit_rabi_profile, sensitivity_analysis, FitError, FitResult, FixedAngles, HwpModel,
};
use ionprobe::selftest::{run_selftest, SelftestOptions};
use ionprobe::sim::SimError;
use ionprobe::{
    load_config, Angle, ConfigError, EngineError, ExperimentConfig, NoiseModel, ScanDataset,
    Simulator,
};

const SEED_ENV: &str = "IONPROBE_SEED";
const DEFAULT_RABI_PEAK_HZ: f64 = 270e3;

#[derive(Parser)]
#[command(
    name = "ionprobe",
    version,
    about = "Four-photon Stark shift modeling, scans and fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the single-beam differential shift as JSON.
    #[command(allow_negative_numbers = true)]
    Shift(ShiftArgs),
    /// Simulate a scan and write it as CSV.
    #[command(allow_negative_numbers = true)]
    Scan(ScanArgs),
    /// Fit a scan CSV and write the result as JSON.
    #[command(allow_negative_numbers = true)]
    Fit(FitArgs),
    /// Tabulate Rabi vs Stark-shift sensitivity to beam misalignment.
    #[command(allow_negative_numbers = true)]
    Sensitivity(SensitivityArgs),
    /// Compare fitted beam centers with the ion position.
    #[command(allow_negative_numbers = true)]
    AlignReport(AlignArgs),
    /// Run the built-in consistency checks.
    Selftest(SelftestArgs),
}

/// Values that override the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    hwp_deg: Option<f64>,
    #[arg(long)]
    qwp_deg: Option<f64>,
    #[arg(long)]
    alpha_deg: Option<f64>,
    #[arg(long)]
    beta_deg: Option<f64>,
    /// Power of the selected beam.
    #[arg(long)]
    power_mw: Option<f64>,
}

#[derive(Args)]
struct ShiftArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    beam: usize,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ramsey,
    Power,
    Hwp,
    Position,
    Rabi,
}

impl From<Kind> for ScanKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ramsey => ScanKind::Ramsey,
            Kind::Power => ScanKind::Power,
            Kind::Hwp => ScanKind::Hwp,
            Kind::Position => ScanKind::Position,
            Kind::Rabi => ScanKind::Rabi,
        }
    }
}

#[derive(Args)]
struct ScanArgs {
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// First x value, in the scan's unit (s, mW, deg or μm).
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    beam: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Perturb analytic values instead of simulating each Ramsey fringe.
    #[arg(long)]
    fast: bool,
    /// Turn every noise source off.
    #[arg(long)]
    noiseless: bool,
    /// Peak two-beam Rabi frequency for `rabi` scans.
    #[arg(long, default_value_t = DEFAULT_RABI_PEAK_HZ)]
    rabi_peak_hz: f64,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct FitArgs {
    kind: Kind,
    #[arg(long)]
    input: PathBuf,
    /// Needed for `hwp` fits of CSV files without a metadata line.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Beam-to-axis angle for profile fits; defaults to the scanned beam's.
    #[arg(long)]
    projection_deg: Option<f64>,
    #[arg(long)]
    fix_alpha_deg: Option<f64>,
    #[arg(long)]
    fix_beta_deg: Option<f64>,
    #[arg(long)]
    fix_phi_deg: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long, default_value_t = 27.0)]
    waist_um: f64,
    #[arg(long, default_value_t = 45.0)]
    projection_deg: f64,
    #[arg(long, default_value_t = 20.0)]
    d_max: f64,
    #[arg(long, default_value_t = 41)]
    points: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    /// Profile fit JSON files, one per beam, in beam order.
    #[arg(long, num_args = 1.., required = true)]
    fits: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    ion_position_um: f64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, hide = true)]
    corrupt_constant: bool,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Engine(String),
    NotConverged(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Engine(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Engine(m) | CliError::NotConverged(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(format!("config: {e}"))
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => c.into(),
            other => CliError::Engine(other.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::NonConvergence(_) | FitError::Degenerate(_) | FitError::RankDeficient(_) => {
                CliError::NotConverged(e.to_string())
            }
            FitError::Engine(e) => e.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            SimError::Engine(e) => e.into(),
            SimError::InvalidInput(m) => CliError::Input(m),
            e @ SimError::Extraction { .. } => CliError::NotConverged(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn load(path: &Path, overrides: &Overrides, beam: usize) -> Result<ExperimentConfig> {
    let mut config = load_config(&read(path)?)?;
    if let Some(v) = overrides.hwp_deg {
        config.hwp_angle = Angle::from_degrees(v);
    }
    if let Some(v) = overrides.qwp_deg {
        config.qwp_angle = Angle::from_degrees(v);
    }
    if let Some(v) = overrides.alpha_deg {
        config.field.alpha = Angle::from_degrees(v);
    }
    if let Some(v) = overrides.beta_deg {
        config.field.beta = Angle::from_degrees(v);
    }
    if let Some(v) = overrides.power_mw {
        let n = config.beams.len();
        config
            .beams
            .get_mut(beam)
            .ok_or_else(|| {
                CliError::Input(format!("--beam {beam} but only {n} beam(s) configured"))
            })?
            .power_mw = v;
    }
    config.validate()?;
    Ok(config)
}

/// --seed, then IONPROBE_SEED, then the config file.
fn resolve_seed(flag: Option<u64>, config: &ExperimentConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(config.noise.seed),
    }
}

fn grid(from: f64, to: f64, points: usize) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite()) {
        return Err(CliError::Input("--from and --to must be finite".into()));
    }
    match points {
        0 => Err(CliError::Input("--points must be at least 1".into())),
        1 => Ok(vec![from]),
        n => Ok((0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

fn cmd_shift(args: ShiftArgs) -> Result<()> {
    let config = load(&args.config, &args.overrides, args.beam)?;
    let breakdown = differential_shift(&config, args.beam)?;
    emit(None, &to_json(&breakdown))
}

fn cmd_scan(args: ScanArgs) -> Result<()> {
    let mut config = load(&args.config, &args.overrides, args.beam)?;
    let seed = resolve_seed(args.seed, &config)?;
    if args.noiseless {
        config.noise = NoiseModel {
            shots: config.noise.shots,
            ..NoiseModel::none()
        };
    }
    config.noise.seed = seed;
    let xs = grid(args.from, args.to, args.points)?;
    let sim = Simulator::new(config)?.with_fast(args.fast);
    let data = match args.kind {
        Kind::Ramsey => sim.ramsey(args.beam, &xs)?,
        Kind::Power => sim.power_scan(args.beam, &xs)?,
        Kind::Hwp => {
            let angles: Vec<Angle> = xs.iter().map(|d| Angle::from_degrees(*d)).collect();
            sim.hwp_scan(args.beam, &angles)?
        }
        Kind::Position => sim.position_scan(args.beam, &xs)?,
        Kind::Rabi => sim.rabi_scan(&xs, args.rabi_peak_hz)?,
    };
    emit(args.out.as_deref(), &data.to_csv())
}

fn metadata_config(data: &ScanDataset) -> Option<ConfigDocument> {
    data.metadata.as_ref().map(|m| m.config.clone())
}

fn projection_for(args: &FitArgs, data: &ScanDataset) -> Angle {
    if let Some(deg) = args.projection_deg {
        return Angle::from_degrees(deg);
    }
    data.metadata
        .as_ref()
        .and_then(|m| {
            let beams = m.config.beams.as_ref()?;
            let beam = beams.get(m.beam_index.unwrap_or(0))?;
            beam.projection_deg
        })
        .map(Angle::from_degrees)
        .unwrap_or(Angle::from_degrees(
            ionprobe::config::DEFAULT_PROJECTION_DEG,
        ))
}

fn fit_config(args: &FitArgs, data: &ScanDataset) -> Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        return load(path, &Overrides::default(), 0);
    }
    let doc = metadata_config(data).ok_or_else(|| {
        CliError::Input("hwp fits need --config when the CSV has no metadata line".into())
    })?;
    Ok(doc.into_config()?)
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let text = read(&args.input)?;
    let kind: ScanKind = args.kind.into();
    let data = ScanDataset::from_csv(&text, Some(kind))
        .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
    let result: FitResult = match args.kind {
        Kind::Ramsey => fit_frequency(&data)?,
        Kind::Power => fit_power_law(&data)?,
        Kind::Hwp => {
            let config = fit_config(&args, &data)?;
            let model = HwpModel::new(ShiftEngine::from_config(&config)?)?;
            let fixed = FixedAngles {
                alpha: args.fix_alpha_deg.map(Angle::from_degrees),
                beta: args.fix_beta_deg.map(Angle::from_degrees),
                phi: args.fix_phi_deg.map(Angle::from_degrees),
            };
            fit_hwp_scan(&data, &model, fixed)?
        }
        Kind::Position => fit_beam_profile(&data, projection_for(&args, &data))?,
        Kind::Rabi => fit_rabi_profile(&data, projection_for(&args, &data))?,
    };
    emit(args.out.as_deref(), &to_json(&result))
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<()> {
    if !(args.d_max >= 0.0) {
        return Err(CliError::Input("--d-max must be non-negative".into()));
    }
    let d = grid(0.0, args.d_max, args.points)?;
    let curve = sensitivity_analysis(args.waist_um, Angle::from_degrees(args.projection_deg), &d)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = String::from("d_um,f_rabi,f_stark,ratio\n");
    for i in 0..curve.d_um.len() {
        writeln!(
            out,
            "{},{},{},{}",
            curve.d_um[i], curve.f_rabi[i], curve.f_stark[i], curve.ratio[i]
        )
        .expect("write to String");
    }
    emit(args.out.as_deref(), &out)
}

fn cmd_align(args: AlignArgs) -> Result<()> {
    let fits = args
        .fits
        .iter()
        .map(|p| {
            serde_json::from_str::<FitResult>(&read(p)?)
                .map_err(|e| CliError::Input(format!("{}: not a fit result: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = alignment_report(&fits, args.ion_position_um)
        .map_err(|e| CliError::Input(e.to_string()))?;
    emit(args.out.as_deref(), &to_json(&report))
}

fn cmd_selftest(args: SelftestArgs) -> ExitCode {
    let report = run_selftest(SelftestOptions {
        corrupt_constant: args.corrupt_constant,
    });
    print!("{}", report.table());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        for c in report.failures() {
            eprintln!("failed: {}", c.name);
        }
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Shift(a) => cmd_shift(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::AlignReport(a) => cmd_align(a),
        Command::Selftest(a) => return cmd_selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
