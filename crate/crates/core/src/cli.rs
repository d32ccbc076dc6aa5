//! Command-line front end: single-point queries, sweeps, oracle verification
//! and Monte Carlo campaigns.
//!
//! Exit codes: 0 success, 1 numerical or domain failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::detection::{run_campaign, CampaignSpec};
use crate::metrics::{self, FisherReport};
use crate::oracle::{self, ProbeConfig, ProbeFamily, AGREEMENT};
use crate::sweep::{Axis, Output, SweepSpec, PRESETS};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qillum", version, about = "Fisher-information analysis of quantum illumination probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form QFI (and optionally the numerical oracle) for one probe.
    Qfi(QfiArgs),
    /// Sweep one axis and write CSV.
    Sweep(SweepArgs),
    /// Compare closed forms against the numerical oracle over a grid.
    Verify(VerifyArgs),
    /// Monte Carlo campaign of the M-copy threshold test.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Coherent,
    GeneralizedCoherent,
    Tmsv,
    Mpa,
    Mps,
    PsiPlus,
    PsiMinus,
}

impl From<FamilyArg> for ProbeFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Coherent => ProbeFamily::Coherent,
            FamilyArg::GeneralizedCoherent => ProbeFamily::GeneralizedCoherent,
            FamilyArg::Tmsv => ProbeFamily::Tmsv,
            FamilyArg::Mpa => ProbeFamily::Mpa,
            FamilyArg::Mps => ProbeFamily::Mps,
            FamilyArg::PsiPlus => ProbeFamily::PsiPlus,
            FamilyArg::PsiMinus => ProbeFamily::PsiMinus,
        }
    }
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Photons added or subtracted per mode (mpa/mps).
    #[arg(long, default_value_t = 0)]
    kappa: usize,
    /// Squeezing parameter tanh r.
    #[arg(long, conflicts_with_all = ["r", "ns"], allow_negative_numbers = true)]
    z: Option<f64>,
    /// Squeezing strength r.
    #[arg(long, conflicts_with = "ns", allow_negative_numbers = true)]
    r: Option<f64>,
    /// Mean signal photon number.
    #[arg(long, allow_negative_numbers = true)]
    ns: Option<f64>,
    /// Coherent amplitude as `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    alpha: Option<[f64; 2]>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    chi: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    epsilon: f64,
    /// Superposition weight of the two-term toy states.
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    /// Thermal mean photon number.
    #[arg(long, allow_negative_numbers = true)]
    nb: f64,
    /// Signal/idler cutoff (fitted from --tail when absent).
    #[arg(long)]
    cutoff: Option<usize>,
    /// Bath cutoff (fitted from --tail when absent).
    #[arg(long)]
    bath_cutoff: Option<usize>,
    #[arg(long, default_value_t = oracle::DEFAULT_TAIL)]
    tail: f64,
}

fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    match parts.as_slice() {
        [re] => Ok([parse(re)?, 0.0]),
        [re, im] => Ok([parse(re)?, parse(im)?]),
        _ => Err("expected `re` or `re,im`".into()),
    }
}

impl ProbeArgs {
    fn config(&self) -> ProbeConfig {
        let family: ProbeFamily = self.family.into();
        let mut c = ProbeConfig::new(family, self.nb);
        c.kappa = self.kappa;
        c.z = self.z.or(self.r.map(f64::tanh));
        c.n_s = self.ns;
        c.alpha = self.alpha;
        c.chi = self.chi;
        c.epsilon = self.epsilon;
        c.p = self.p;
        c.cutoff = self.cutoff;
        c.bath_cutoff = self.bath_cutoff;
        c.tail_tolerance = self.tail;
        c
    }
}

#[derive(Debug, Args)]
struct QfiArgs {
    #[command(flatten)]
    probe: ProbeArgs,
    /// Reflectivity amplitude used for the SNR.
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    eta: f64,
    /// Also run the numerical oracle.
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["preset", "spec", "family"])))]
struct SweepArgs {
    #[arg(long, value_parser = PRESETS, conflicts_with_all = ["spec", "family"])]
    preset: Option<String>,
    /// JSON sweep specification.
    #[arg(long, conflicts_with = "family")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, requires_all = ["axis", "min", "max", "outputs"])]
    family: Option<FamilyArg>,
    /// Comma-separated κ values; 0 is the TMSV baseline.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    kappa: Vec<usize>,
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    nb: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    outputs: Vec<OutputArg>,
    #[arg(long, default_value_t = 0.0)]
    chi: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    R,
    #[value(name = "N_S", alias = "ns")]
    Ns,
    P,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputArg {
    Qfi,
    #[value(alias = "averaged_qfi")]
    AveragedQfi,
    #[value(alias = "snr_over_eta")]
    SnrOverEta,
    Advantage,
    G2,
    #[value(alias = "mean_photon")]
    MeanPhoton,
}

impl From<OutputArg> for Output {
    fn from(o: OutputArg) -> Self {
        match o {
            OutputArg::Qfi => Output::Qfi,
            OutputArg::AveragedQfi => Output::AveragedQfi,
            OutputArg::SnrOverEta => Output::SnrOverEta,
            OutputArg::Advantage => Output::Advantage,
            OutputArg::G2 => Output::G2,
            OutputArg::MeanPhoton => Output::MeanPhoton,
        }
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// JSON list of probe configurations; built-in grid when absent.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Include every per-configuration report.
    #[arg(long)]
    reports: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    probe: ProbeArgs,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    eta: f64,
    /// Copies per decision.
    #[arg(long)]
    m: u64,
    /// Decisions simulated per hypothesis.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Quadrature phase offset from the matched phase (coherent families).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phase_offset: f64,
}

/// Failure of a command after successful parsing.
#[derive(Debug)]
struct Failure {
    kind: String,
    message: String,
    offenders: Vec<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let offenders = match &e {
            Error::Configuration { index, source } => vec![json!({
                "index": index,
                "kind": source.kind(),
                "message": source.to_string(),
            })],
            _ => Vec::new(),
        };
        Failure {
            kind: e.kind().into(),
            message: e.to_string(),
            offenders,
        }
    }
}

fn io_failure(what: &str, e: impl std::fmt::Display) -> Failure {
    Failure {
        kind: "io".into(),
        message: format!("{what}: {e}"),
        offenders: Vec::new(),
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Qfi(a) => cmd_qfi(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let mut body = json!({ "error": f.kind, "message": f.message });
            if !f.offenders.is_empty() {
                body["offenders"] = Value::Array(f.offenders);
            }
            let _ = writeln!(err, "{body}");
            EXIT_FAILURE
        }
    }
}

fn print_json(out: &mut dyn Write, v: &impl serde::Serialize) -> std::result::Result<(), Failure> {
    let s = serde_json::to_string_pretty(v).map_err(|e| io_failure("json", e))?;
    writeln!(out, "{s}").map_err(|e| io_failure("stdout", e))
}

fn cmd_qfi(a: &QfiArgs, out: &mut dyn Write) -> CmdResult {
    let config = a.probe.config();
    let report = if a.oracle {
        oracle::verify_one(&config)?
    } else {
        let resolved = config.resolve()?;
        let analytic = config.qfi_analytic(&resolved)?;
        let moments = resolved.analytic_moments(config.n_b, a.eta)?;
        let mut echo = serde_json::to_value(&config).map_err(|e| io_failure("json", e))?;
        echo["N_S"] = resolved.mean_photon().into();
        let mut r = FisherReport::new(analytic, echo);
        r.snr_over_eta = Some(metrics::snr(&moments)? / a.eta);
        r
    };
    print_json(out, &report)?;
    Ok(EXIT_OK)
}

fn sweep_spec(a: &SweepArgs) -> std::result::Result<SweepSpec, Failure> {
    let mut spec = if let Some(p) = &a.preset {
        SweepSpec::preset(p)?
    } else if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path).map_err(|e| io_failure(&path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Failure {
            kind: "parse".into(),
            message: format!("{}: {e}", path.display()),
            offenders: Vec::new(),
        })?
    } else if let Some(f) = a.family {
        SweepSpec {
            family: f.into(),
            kappa_list: a.kappa.clone(),
            axis: match a.axis.expect("required by clap") {
                AxisArg::R => Axis::R,
                AxisArg::Ns => Axis::NS,
                AxisArg::P => Axis::P,
            },
            axis_min: a.min.expect("required by clap"),
            axis_max: a.max.expect("required by clap"),
            axis_points: crate::sweep::PRESET_POINTS,
            n_b: 10.0,
            eta: 0.01,
            outputs: a.outputs.iter().map(|&o| o.into()).collect(),
            chi: a.chi,
            epsilon: a.epsilon,
        }
    } else {
        unreachable!("clap requires one sweep source")
    };
    if let Some(n) = a.points {
        spec.axis_points = n;
    }
    if let Some(nb) = a.nb {
        spec.n_b = nb;
    }
    if let Some(eta) = a.eta {
        spec.eta = eta;
    }
    Ok(spec)
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CmdResult {
    let spec = sweep_spec(a)?;
    let csv = spec.to_csv()?;
    match &a.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| io_failure(&path.display().to_string(), e))?,
        None => out.write_all(csv.as_bytes()).map_err(|e| io_failure("stdout", e))?,
    }
    Ok(EXIT_OK)
}

fn load_grid(path: &PathBuf) -> std::result::Result<Vec<ProbeConfig>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(&path.display().to_string(), e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    serde_json::from_str(&text).map_err(|e| Failure {
        kind: "parse".into(),
        message: format!("{}: {e}", path.display()),
        offenders: Vec::new(),
    })
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let grid = match &a.grid {
        Some(p) => load_grid(p)?,
        None => oracle::default_grid(),
    };
    let results = oracle::verify_each(&grid);
    let mut per_family: BTreeMap<&str, f64> = BTreeMap::new();
    let mut offenders = Vec::new();
    let mut reports = Vec::new();
    let mut overall: f64 = 0.0;
    for (index, (cfg, r)) in grid.iter().zip(results).enumerate() {
        match r {
            Ok(rep) => {
                let d = rep.relative_discrepancy().unwrap_or(f64::INFINITY);
                let slot = per_family.entry(cfg.family.name()).or_insert(0.0);
                *slot = slot.max(d);
                overall = overall.max(d);
                if !(d < AGREEMENT) {
                    offenders.push(json!({
                        "index": index,
                        "kind": "discrepancy",
                        "message": format!("relative discrepancy {d:e}"),
                    }));
                }
                if let Err(e) = rep.check_hierarchy(1e-9) {
                    offenders.push(json!({ "index": index, "kind": e.kind(), "message": e.to_string() }));
                }
                reports.push(rep);
            }
            Err(e) => offenders.push(json!({ "index": index, "kind": e.kind(), "message": e.to_string() })),
        }
    }
    let passed = offenders.is_empty();
    let mut summary = json!({
        "configurations": grid.len(),
        "max_relative_discrepancy": per_family,
        "overall_max_relative_discrepancy": overall,
        "threshold": AGREEMENT,
        "passed": passed,
        "offenders": offenders,
    });
    if a.reports {
        summary["reports"] = serde_json::to_value(&reports).map_err(|e| io_failure("json", e))?;
    }
    print_json(out, &summary)?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let config = a.probe.config();
    let resolved = config.resolve()?;
    let mut moments = resolved.analytic_moments(config.n_b, a.eta)?;
    if a.phase_offset != 0.0 {
        if let oracle::ResolvedProbe::Ci { a_expect, .. } = &resolved {
            moments = metrics::moments_quadrature(*a_expect, a_expect.arg() + a.phase_offset, config.n_b, a.eta)?;
        }
    }
    let spec = CampaignSpec {
        moments,
        m: a.m,
        trials: a.trials,
        seed: a.seed,
    };
    let result = run_campaign(&spec)?;
    let r = metrics::snr(&moments)?;
    let x = (a.m as f64 / 2.0).sqrt() * r;
    let exp_bound = metrics::perr_snr_exp_bound(r.abs(), a.m)?;
    let deviation = if result.stderr > 0.0 {
        (result.empirical_perr - result.analytic_perr) / result.stderr
    } else {
        0.0
    };
    let body = json!({
        "spec": spec,
        "result": result,
        "snr": r,
        "erfc_argument": x,
        "exp_bound": exp_bound,
        "deviation_in_stderr": deviation,
    });
    print_json(out, &body)?;
    Ok(EXIT_OK)
}

/// Entry point for the binary.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run(args, &mut out, &mut err);
    let _ = out.flush();
    code
}
