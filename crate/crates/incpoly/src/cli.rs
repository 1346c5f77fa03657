//! Command-line front end: scenario files in, CSV/JSON artifacts out.
//!
//! A scenario is a JSON document `{"command": ..., "inputs": {...},
//! "precision": ...}`. Each command reads its own `inputs` schema, writes its
//! artifacts into the output directory and finishes with `manifest.json`.
//! Every artifact carries the configuration hash, a SHA-256 digest of the
//! canonical (key-sorted) JSON of the command, inputs and precision after
//! command-line overrides.
//!
//! Exit status: 0 on success, 2 when a checked property fails, 1 on any
//! input or runtime error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::approx::{self, FitOptions, IncompletenessSchedule};
use crate::density::{self, IndexSet, WeightFamily, WeightSequence};
use crate::error::{Error, Result};
use crate::freqsets::{self, ExponentSchedule, FrequencyFamily};
use crate::geometry::{self, CompactSetSample, SetDescriptor};
use crate::par;
use crate::poly::Polynomial;
use crate::potential::{self, FeketeMode, Harnack};
use crate::uts::{self, Exhaustion, LogConstants, TargetEnumeration, TauChoice, UtsState};
use crate::xprec::{Precision, MIN_EXTENDED_BITS};
use crate::C64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "kebab-case")]
pub enum Command {
    Potential,
    Approx,
    Density,
    Freqsets,
    UtsBuild,
    UtsVerify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Potential => "potential",
            Command::Approx => "approx",
            Command::Density => "density",
            Command::Freqsets => "freqsets",
            Command::UtsBuild => "uts-build",
            Command::UtsVerify => "uts-verify",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        <Command as ValueEnum>::from_str(s, false).ok()
    }
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// `standard` or `ext:<bits>`.
    #[arg(long)]
    pub precision: Option<String>,
    /// Overrides the scenario horizon.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Parser)]
#[command(name = "incpoly", version, about = "Incomplete polynomials, densities and universal Taylor series")]
pub struct Cli {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Debug, Subcommand)]
pub enum Action {
    /// Fekete tuples, transfinite diameters, capacity and theta tables.
    Potential(ScenarioArgs),
    /// Incomplete polynomial decay curves.
    Approx(ScenarioArgs),
    /// Weighted lower and upper densities.
    Density(ScenarioArgs),
    /// Frequency-set families and their exact scans.
    Freqsets(ScenarioArgs),
    /// Builds a universal series and saves its state.
    UtsBuild(ScenarioArgs),
    /// Verifies a saved series against its scenario.
    UtsVerify(ScenarioArgs),
    /// Runs `command` on a scenario file given positionally.
    Run {
        command: Command,
        scenario: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Converts a CSV table into whitespace-separated plot columns.
    Plotdata {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `standard` or `ext:<bits>`.
pub fn parse_precision(s: &str) -> Result<Precision> {
    let s = s.trim();
    if s == "standard" {
        return Ok(Precision::Standard);
    }
    let bits = s
        .strip_prefix("ext:")
        .and_then(|b| b.parse::<usize>().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("precision must be `standard` or `ext:<bits>`, got `{s}`")))?;
    if bits < MIN_EXTENDED_BITS {
        return Err(Error::InvalidArgument(format!("extended precision needs at least {MIN_EXTENDED_BITS} bits")));
    }
    Ok(Precision::Extended(bits))
}

fn precision_label(p: Precision) -> String {
    match p {
        Precision::Standard => "standard".into(),
        Precision::Extended(b) => format!("ext:{b}"),
    }
}

/// Deserializes `v`, reporting failures with the JSON pointer `base` + path.
pub fn from_value<T: DeserializeOwned>(v: &Value, base: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let mut pointer = base.to_string();
        for seg in e.path().iter() {
            use serde_path_to_error::Segment;
            match seg {
                Segment::Seq { index } => write!(pointer, "/{index}").ok(),
                Segment::Map { key } => write!(pointer, "/{}", key.replace('~', "~0").replace('/', "~1")).ok(),
                Segment::Enum { variant } => write!(pointer, "/{variant}").ok(),
                Segment::Unknown => None,
            };
        }
        Error::Input {
            pointer: if pointer.is_empty() { "/".into() } else { pointer },
            message: e.into_inner().to_string(),
        }
    })
}

fn input_err(pointer: &str, message: impl Into<String>) -> Error {
    Error::Input {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// A parsed scenario with command-line overrides applied.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub command: Command,
    pub inputs: Value,
    pub precision: Precision,
    pub output_dir: PathBuf,
    pub config_hash: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    command: Option<String>,
    inputs: Value,
    #[serde(default)]
    precision: Option<String>,
}

impl Scenario {
    /// Reads a scenario from JSON text. `command` must agree with the file's
    /// own `command` field when both are given.
    pub fn parse(text: &str, command: Option<Command>, flags: &Flags) -> Result<Scenario> {
        let raw: Value = serde_json::from_str(text).map_err(|e| input_err("/", format!("malformed JSON: {e}")))?;
        let file: ScenarioFile = from_value(&raw, "")?;
        let named = match &file.command {
            Some(c) => Some(Command::parse(c).ok_or_else(|| input_err("/command", format!("unknown command `{c}`")))?),
            None => None,
        };
        let command = match (command, named) {
            (Some(a), Some(b)) if a != b => {
                return Err(input_err("/command", format!("scenario is for `{}`, not `{}`", b.name(), a.name())))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(input_err("/command", "no command given")),
        };
        if !file.inputs.is_object() {
            return Err(input_err("/inputs", "inputs must be an object"));
        }
        let mut inputs = file.inputs;
        let obj = inputs.as_object_mut().expect("checked object");
        if let Some(h) = flags.horizon {
            obj.insert("horizon".into(), json!(h));
        }
        if let Some(s) = flags.seed {
            obj.insert("seed".into(), json!(s));
        }
        let precision = match (&flags.precision, &file.precision) {
            (Some(p), _) => parse_precision(p)?,
            (None, Some(p)) => parse_precision(p).map_err(|e| input_err("/precision", e.to_string()))?,
            (None, None) => Precision::Standard,
        };
        let canonical = json!({
            "command": command.name(),
            "inputs": inputs,
            "precision": precision_label(precision),
        });
        Ok(Scenario {
            command,
            config_hash: crate::config_hash(&canonical),
            inputs,
            precision,
            output_dir: flags.out.clone(),
        })
    }

    pub fn load(path: &Path, command: Option<Command>, flags: &Flags) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::parse(&text, command, flags)
    }
}

/// Artifacts and violation count of one run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub violations: Vec<String>,
    pub summary: Value,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            EXIT_OK
        } else {
            EXIT_VIOLATION
        }
    }
}

/// Exit status for a failed run.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::ConstraintViolation { .. }
        | Error::NoFeasibleTau { .. }
        | Error::ParameterInfeasible(_)
        | Error::PreconditionViolated(_) => EXIT_VIOLATION,
        _ => EXIT_INPUT,
    }
}

struct Writer<'a> {
    dir: &'a Path,
    hash: &'a str,
    artifacts: Vec<PathBuf>,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut s = format!("# config_hash={}\n{}\n", self.hash, header.join(","));
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.put(name, s)
    }

    fn json(&mut self, name: &str, mut v: Value) -> Result<PathBuf> {
        if let Some(o) = v.as_object_mut() {
            o.insert("config_hash".into(), json!(self.hash));
        }
        self.put(name, serde_json::to_string_pretty(&v)? + "\n")
    }

    fn put(&mut self, name: &str, text: String) -> Result<PathBuf> {
        let p = self.dir.join(name);
        std::fs::write(&p, text)?;
        self.artifacts.push(p.clone());
        Ok(p)
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

/// Runs a scenario, writing its artifacts and the run manifest.
pub fn run(scenario: &Scenario) -> Result<Outcome> {
    par::init_threads();
    std::fs::create_dir_all(&scenario.output_dir)?;
    let start = Instant::now();
    let mut w = Writer {
        dir: &scenario.output_dir,
        hash: &scenario.config_hash,
        artifacts: Vec::new(),
    };
    let (summary, violations) = match scenario.command {
        Command::Potential => run_potential(scenario, &mut w)?,
        Command::Approx => run_approx(scenario, &mut w)?,
        Command::Density => run_density(scenario, &mut w)?,
        Command::Freqsets => run_freqsets(scenario, &mut w)?,
        Command::UtsBuild => run_uts_build(scenario, &mut w)?,
        Command::UtsVerify => run_uts_verify(scenario, &mut w)?,
    };
    let artifacts: Vec<String> = w
        .artifacts
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "command": scenario.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "precision": precision_label(scenario.precision),
        "parallel": cfg!(feature = "parallel"),
        "threads": std::env::var(par::THREADS_ENV).ok(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "violations": violations.len(),
        "artifacts": artifacts,
    });
    w.json("manifest.json", manifest)?;
    Ok(Outcome {
        artifacts: w.artifacts,
        violations,
        summary,
    })
}

fn field<'v>(inputs: &'v Value, key: &str) -> Result<&'v Value> {
    inputs.get(key).ok_or_else(|| input_err(&format!("/inputs/{key}"), "missing field"))
}

fn compact(v: &Value, pointer: &str) -> Result<CompactSetSample> {
    if let Some(i) = v.get("nestoridis") {
        let i: usize = from_value(i, &format!("{pointer}/nestoridis"))?;
        return Ok(uts::nestoridis_family(i));
    }
    let d: SetDescriptor = from_value(v, pointer)?;
    geometry::make_compact(&d).map_err(|e| input_err(pointer, e.to_string()))
}

fn harnack(v: Option<&Value>, pointer: &str) -> Result<Harnack> {
    match v {
        None => Ok(Harnack::Bound(potential::DEFAULT_HARNACK_BOUND)),
        Some(Value::String(s)) if s == "exact-disc" => Ok(Harnack::ExactDisc),
        Some(Value::Number(n)) => Ok(Harnack::Bound(n.as_f64().unwrap_or(f64::NAN))),
        Some(_) => Err(input_err(pointer, "harnack must be a number or \"exact-disc\"")),
    }
}

fn c64s(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialInputs {
    #[serde(rename = "K")]
    k: Value,
    #[serde(default = "default_n_max")]
    n_max: usize,
    #[serde(default = "default_fekete_ns")]
    fekete_n: Vec<usize>,
    #[serde(default = "default_mode")]
    mode: FeketeMode,
    #[serde(default)]
    theta: Option<ThetaInputs>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaInputs {
    #[serde(rename = "L", default)]
    l: Option<Value>,
    #[serde(default = "default_n_max")]
    m_max: usize,
    #[serde(default)]
    harnack: Option<Value>,
    #[serde(default = "default_nodes")]
    contour_nodes: usize,
}

fn default_n_max() -> usize {
    40
}
fn default_fekete_ns() -> Vec<usize> {
    (2..=12).collect()
}
fn default_mode() -> FeketeMode {
    FeketeMode::Greedy
}
fn default_nodes() -> usize {
    512
}

fn run_potential(s: &Scenario, w: &mut Writer<'_>) -> Result<(Value, Vec<String>)> {
    let inp: PotentialInputs = from_value(&s.inputs, "/inputs")?;
    let k = compact(&inp.k, "/inputs/K")?;
    let tuples = par::map_slice(&inp.fekete_n, |&n| potential::fekete_tuple(&k, n, inp.mode));
    let mut rows = Vec::new();
    for t in tuples {
        let t = t?;
        let pts: Vec<String> = t.points.iter().map(|z| format!("{}{:+}i", num(z.re), num(z.im))).collect();
        rows.push(vec![t.n.to_string(), num(t.delta_n), pts.join(";")]);
    }
    w.csv("fekete.csv", &["n", "delta_n", "tuple"], &rows)?;
    let cap = potential::capacity(&k, inp.n_max)?;
    let report = json!({"capacity": cap.capacity, "polar": cap.polar, "delta_table": cap.delta_table, "monotone": cap.monotone});
    w.json("capacity.json", report.clone())?;
    if let Some(th) = inp.theta {
        let l = th.l.as_ref().map(|v| compact(v, "/inputs/theta/L")).transpose()?;
        let kul = l.as_ref().map_or_else(|| k.clone(), |l| k.union(l));
        let exclude: Vec<CompactSetSample> = l.into_iter().collect();
        let gamma = geometry::make_contour(&k, &exclude, 0.0, th.contour_nodes, None)?;
        let table = potential::theta_sequence(&kul, &gamma, th.m_max, harnack(th.harnack.as_ref(), "/inputs/theta/harnack")?)?;
        let rows: Vec<Vec<String>> = table.rows.iter().map(|r| vec![r.0.to_string(), num(r.1), num(r.2)]).collect();
        w.csv("theta.csv", &["m", "delta_m", "theta_m"], &rows)?;
    }
    Ok((report, Vec::new()))
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApproxInputs {
    phi: Vec<[f64; 2]>,
    #[serde(rename = "K")]
    k: Value,
    #[serde(rename = "L", default)]
    l: Option<Value>,
    schedule: IncompletenessSchedule,
    n_grid: Vec<usize>,
    #[serde(default)]
    precision: Option<String>,
    #[serde(default)]
    bound: Option<BoundInputs>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundInputs {
    #[serde(default)]
    harnack: Option<Value>,
    #[serde(default = "default_n_max")]
    m_max: usize,
    #[serde(default = "default_nodes")]
    contour_nodes: usize,
    #[serde(default = "default_green")]
    green_degree: usize,
}

fn default_green() -> usize {
    128
}

fn run_approx(s: &Scenario, w: &mut Writer<'_>) -> Result<(Value, Vec<String>)> {
    let inp: ApproxInputs = from_value(&s.inputs, "/inputs")?;
    let k = compact(&inp.k, "/inputs/K")?;
    let l = inp.l.as_ref().map(|v| compact(v, "/inputs/L")).transpose()?;
    let phi = Polynomial::from_coeffs(c64s(&inp.phi));
    let precision = match &inp.precision {
        Some(p) => parse_precision(p).map_err(|e| input_err("/inputs/precision", e.to_string()))?,
        None => s.precision,
    };
    let opts = FitOptions {
        precision,
        skip_monomial: true,
        ..FitOptions::default()
    };
    let (setup, phi_norm) = match &inp.bound {
        Some(b) => {
            let exclude: Vec<CompactSetSample> = l.iter().cloned().collect();
            let gamma = geometry::make_contour(&k, &exclude, 0.0, b.contour_nodes, None)?;
            let h = harnack(b.harnack.as_ref(), "/inputs/bound/harnack")?;
            let setup = approx::bound_setup(&k, l.as_ref(), &gamma, b.m_max, h, b.green_degree)?;
            // maximum modulus: the norm on the enclosed region is attained on the contour
            let norm = gamma.nodes.iter().map(|&z| phi.eval(z).norm()).fold(0.0, f64::max);
            (Some(setup), norm)
        }
        None => (None, 1.0),
    };
    let curve = approx::decay_curve(&phi, &k, l.as_ref(), &inp.schedule, &inp.n_grid, setup.as_ref(), phi_norm, &opts)?;
    let rows: Vec<Vec<String>> = curve
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), num(r.tau), num(r.err_k), num(r.err_l), opt(r.bound), opt(r.bound_root)])
        .collect();
    w.csv("decay.csv", &["n", "tau", "err_K", "err_L", "bound", "bound_root"], &rows)?;
    let violations: Vec<String> = curve
        .rows
        .iter()
        .filter(|r| r.bound.is_some_and(|b| r.err_k > b))
        .map(|r| format!("n = {}: err_K {:e} exceeds the bound {:e}", r.n, r.err_k, r.bound.unwrap_or(f64::NAN)))
        .collect();
    let summary = json!({"fitted_rate": curve.fitted_rate, "violations": violations});
    w.json("summary.json", summary.clone())?;
    Ok((summary, violations))
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityInputs {
    weight: WeightFamily,
    set: Value,
    horizon: u64,
}

fn index_set(v: &Value, pointer: &str) -> Result<IndexSet> {
    if v.is_array() {
        let elements: Vec<u64> = from_value(v, pointer)?;
        return Ok(IndexSet::explicit(elements));
    }
    let mut v = v.clone();
    // the block-union and modular specs may omit the tag
    if let Some(o) = v.as_object_mut() {
        if !o.contains_key("kind") {
            let kind = if o.contains_key("modulus") {
                Some("modular")
            } else if o.contains_key("a") {
                Some("block-union")
            } else {
                None
            };
            if let Some(kind) = kind {
                o.insert("kind".into(), json!(kind));
            }
        }
    }
    let set: IndexSet = from_value(&v, pointer)?;
    set.validate().map_err(|e| input_err(pointer, e.to_string()))?;
    Ok(set)
}

fn run_density(s: &Scenario, w: &mut Writer<'_>) -> Result<(Value, Vec<String>)> {
    let inp: DensityInputs = from_value(&s.inputs, "/inputs")?;
    let set = index_set(&inp.set, "/inputs/set")?;
    let alpha = WeightSequence::new(inp.weight).map_err(|e| input_err("/inputs/weight", e.to_string()))?;
    let lo = density::lower_density(&set, &alpha, inp.horizon)?;
    let up = density::upper_density(&set, &alpha, inp.horizon)?;
    let rows: Vec<Vec<String>> = lo.trace.iter().map(|p| vec![p.n.to_string(), num(p.ratio)]).collect();
    let trace = w.csv("trace.csv", &["n", "ratio"], &rows)?;
    let summary = json!({
        "dlow": lo.estimate,
        "dup": up.estimate,
        "dlow_attained_at": lo.attained_at,
        "dup_attained_at": up.attained_at,
        "horizon": inp.horizon,
        "trace_csv_path": trace.to_string_lossy(),
    });
    w.json("density.json", summary.clone())?;
    Ok((summary, Vec::new()))
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NaturalFamilyInputs {
    kappa: f64,
    #[serde(default = "one")]
    nu: u64,
    floors: Vec<u64>,
    count: usize,
    a: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(default = "cyclic")]
    schedule: ExponentSchedule,
    horizon: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LogFamilyInputs {
    a: f64,
    eps: f64,
    floors: Vec<Vec<u64>>,
    count_p: usize,
    count_i: usize,
    #[serde(default = "cyclic")]
    schedule: ExponentSchedule,
    max_bits: u64,
    /// Horizon of the density estimates.
    horizon: u64,
}

fn one() -> u64 {
    1
}
fn cyclic() -> ExponentSchedule {
    ExponentSchedule::Cyclic
}

fn without(v: &Value, key: &str) -> Value {
    let mut v = v.clone();
    if let Some(o) = v.as_object_mut() {
        o.remove(key);
    }
    v
}

fn run_freqsets(s: &Scenario, w: &mut Writer<'_>) -> Result<(Value, Vec<String>)> {
    let kind = field(&s.inputs, "kind")?.as_str().unwrap_or_default().to_string();
    let rest = without(&s.inputs, "kind");
    let (family, alpha, horizon) = match kind.as_str() {
        "natural" => {
            let f: NaturalFamilyInputs = from_value(&rest, "/inputs")?;
            let fam = freqsets::build_natural_family(f.kappa, f.nu, &f.floors, f.count, f.a, f.c, f.schedule, f.horizon)?;
            (fam, WeightSequence::constant(), f.horizon)
        }
        "log" => {
            let f: LogFamilyInputs = from_value(&rest, "/inputs")?;
            let fam = freqsets::build_log_family(f.a, f.eps, &f.floors, f.count_p, f.count_i, f.schedule, f.max_bits)?;
            (fam, WeightSequence::log(), f.horizon)
        }
        other => return Err(input_err("/inputs/kind", format!("kind must be `natural` or `log`, got `{other}`"))),
    };
    let report = freqsets::verify_family(&family, &alpha, horizon);
    let rows: Vec<Vec<String>> = report
        .sets
        .iter()
        .map(|r| {
            vec![
                r.p.to_string(),
                r.i.to_string(),
                opt(r.density),
                r.min_element.clone().unwrap_or_default(),
                r.blocks.to_string(),
            ]
        })
        .collect();
    w.csv("sets.csv", &["p", "i", "density", "min_element", "blocks"], &rows)?;
    let violations: Vec<String> = report.violations.iter().map(|v| serde_json::to_string(v).unwrap_or_default()).collect();
    if !report.complete {
        eprintln!("warning: the element scan stopped early; separation is only partially certified");
    }
    let summary = json!({"family": family, "report": report});
    w.json("family.json", summary.clone())?;
    Ok((json!({"sets": report.sets.len(), "violations": violations.len(), "complete": report.complete}), violations))
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetInputs {
    count: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantInputs {
    /// `measured` or `bound`.
    source: String,
    #[serde(default = "default_probes")]
    probes: Vec<u64>,
    #[serde(default = "default_margin")]
    margin: f64,
    #[serde(default)]
    harnack: Option<Value>,
    #[serde(default = "default_n_max")]
    m_max: usize,
    #[serde(default = "default_nodes")]
    contour_nodes: usize,
}

fn default_probes() -> Vec<u64> {
    vec![16, 32, 48, 64]
}
fn default_margin() -> f64 {
    0.05
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NaturalUtsFamily {
    #[serde(default)]
    kappa: Option<f64>,
    #[serde(default = "one")]
    nu: u64,
    a: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(default = "cyclic")]
    schedule: ExponentSchedule,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LogUtsFamily {
    a: f64,
    eps: f64,
    #[serde(default = "cyclic")]
    schedule: ExponentSchedule,
    max_bits: u64,
    #[serde(default = "one")]
    repeat: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UtsInputs {
    density: String,
    #[serde(rename = "K")]
    k: Vec<Value>,
    #[serde(rename = "U")]
    u: Value,
    targets: TargetInputs,
    constants: ConstantInputs,
    family: Value,
    horizon: u64,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    state: Option<PathBuf>,
}

/// Everything a construction needs, rebuilt deterministically from a scenario.
pub struct UtsSetup {
    pub compacts: Vec<CompactSetSample>,
    pub u_sets: Vec<Vec<C64>>,
    pub targets: TargetEnumeration,
    pub family: FrequencyFamily,
    pub horizon: u64,
    pub kind: UtsKind,
    pub state_path: Option<PathBuf>,
}

pub enum UtsKind {
    Natural(TauChoice),
    Log(Vec<LogConstants>, Exhaustion),
}

fn circle_samples(u: &CompactSetSample) -> Vec<C64> {
    u.all_samples()
}

pub fn uts_setup(inputs: &Value) -> Result<UtsSetup> {
    let inp: UtsInputs = from_value(inputs, "/inputs")?;
    let compacts: Vec<CompactSetSample> = inp
        .k
        .iter()
        .enumerate()
        .map(|(j, v)| compact(v, &format!("/inputs/K/{j}")))
        .collect::<Result<_>>()?;
    if compacts.is_empty() {
        return Err(input_err("/inputs/K", "need at least one compact"));
    }
    let seed = inp.seed.unwrap_or(inp.targets.seed);
    let cn = compacts.len();
    match inp.density.as_str() {
        "natural" => {
            let u = circle_samples(&compact(&inp.u, "/inputs/U")?);
            let fam: NaturalUtsFamily = from_value(&inp.family, "/inputs/family")?;
            let union = compacts.iter().skip(1).fold(compacts[0].clone(), |a, b| a.union(b));
            let choice = match inp.constants.source.as_str() {
                "measured" => uts::calibrate_tau(&union, &u, &inp.constants.probes, inp.constants.margin)?,
                "bound" => {
                    let l = geometry::make_compact(&SetDescriptor::circle(C64::new(0.0, 0.0), 1.0, std::f64::consts::TAU / 512.0))?;
                    let gamma = geometry::make_contour(&union, std::slice::from_ref(&l), 0.0, inp.constants.contour_nodes, None)?;
                    let h = harnack(inp.constants.harnack.as_ref(), "/inputs/constants/harnack")?;
                    let setup = approx::bound_setup(&union, Some(&l), &gamma, inp.constants.m_max, h, 128)?;
                    uts::choose_tau(&setup, &u, inp.constants.margin)?
                }
                other => return Err(input_err("/inputs/constants/source", format!("unknown source `{other}`"))),
            };
            let targets = uts::enumerate_targets(&u, inp.targets.count, seed)?;
            let radii: Vec<f64> = (0..inp.targets.count * cn).map(|p| targets.targets[p / cn].radius).collect();
            let floors = uts::natural_floors(choice.contraction, &radii, choice.n)?;
            let kappa = fam.kappa.unwrap_or(choice.tau + 1.0);
            let family = freqsets::build_natural_family(kappa, fam.nu, &floors, radii.len(), fam.a, fam.c, fam.schedule, inp.horizon)?;
            Ok(UtsSetup {
                compacts,
                u_sets: vec![u],
                targets,
                family,
                horizon: inp.horizon,
                kind: UtsKind::Natural(choice),
                state_path: inp.state,
            })
        }
        "log" => {
            let us: Vec<Value> = from_value(&inp.u, "/inputs/U")?;
            if us.len() != cn {
                return Err(input_err("/inputs/U", format!("need one U per compact ({cn})")));
            }
            let u_sets: Vec<Vec<C64>> = us
                .iter()
                .enumerate()
                .map(|(j, v)| compact(v, &format!("/inputs/U/{j}")).map(|c| circle_samples(&c)))
                .collect::<Result<_>>()?;
            if inp.constants.source != "measured" {
                return Err(input_err("/inputs/constants/source", "logarithmic constructions use measured constants"));
            }
            let fam: LogUtsFamily = from_value(&inp.family, "/inputs/family")?;
            let constants: Vec<LogConstants> = compacts
                .iter()
                .zip(&u_sets)
                .map(|(k, u)| uts::calibrate_log(k, u, &inp.constants.probes))
                .collect::<Result<_>>()?;
            let all_u: Vec<C64> = u_sets.concat();
            let targets = uts::enumerate_targets(&all_u, inp.targets.count, seed)?;
            let floors = uts::log_floors(&constants, &targets, &u_sets, inp.targets.count)?;
            let family = freqsets::build_log_family(fam.a, fam.eps, &floors, inp.targets.count, cn, fam.schedule, fam.max_bits)?;
            Ok(UtsSetup {
                compacts,
                u_sets,
                targets,
                family,
                horizon: inp.horizon,
                kind: UtsKind::Log(constants, Exhaustion { repeat: fam.repeat }),
                state_path: inp.state,
            })
        }
        other => Err(input_err("/inputs/density", format!("density must be `natural` or `log`, got `{other}`"))),
    }
}

/// Builds the series described by a setup.
pub fn uts_build(setup: &UtsSetup) -> Result<UtsState> {
    match &setup.kind {
        UtsKind::Natural(choice) => {
            uts::build_multi_futs(&setup.compacts, &setup.u_sets[0], &setup.targets, &setup.family, choice, setup.horizon)
        }
        UtsKind::Log(constants, exhaustion) => uts::build_log_futs(
            &setup.compacts,
            &setup.u_sets,
            constants,
            *exhaustion,
            &setup.targets,
            &setup.family,
            setup.horizon,
        ),
    }
}

fn state_path(s: &Scenario, setup: &UtsSetup) -> PathBuf {
    setup.state_path.clone().unwrap_or_else(|| s.output_dir.join("state.json"))
}

fn run_uts_build(s: &Scenario, w: &mut Writer<'_>) -> Result<(Value, Vec<String>)> {
    let setup = uts_setup(&s.inputs)?;
    let state = uts_build(&setup)?;
    let path = state_path(s, &setup);
    state.save(&path)?;
    w.artifacts.push(path.clone());
    let rows: Vec<Vec<String>> = state
        .blocks
        .iter()
        .map(|b| {
            let (v, d) = b.window.as_ref().map_or((None, None), |w| (w.valuation(), w.degree()));
            vec![
                b.n.to_string(),
                b.s.to_string(),
                b.set.to_string(),
                b.compact.to_string(),
                b.target.to_string(),
                v.map_or(String::new(), |x| x.to_string()),
                d.map_or(String::new(), |x| x.to_string()),
                opt(b.log_err_k),
                opt(b.log_norm_l),
                opt(b.log_bound),
            ]
        })
        .collect();
    w.csv(
        "blocks.csv",
        &["n", "s", "set", "compact", "target", "valuation", "degree", "ln_err_K", "ln_norm_L", "ln_bound"],
        &rows,
    )?;
    let summary = json!({
        "blocks": state.blocks.len(),
        "nonzero_blocks": state.nonzero_blocks().count(),
        "bits": state.bits,
        "state_hash": state.config_hash,
        "state_path": path.to_string_lossy(),
        "constants": match &setup.kind {
            UtsKind::Natural(tau) => json!(tau),
            UtsKind::Log(consts, exhaustion) => json!({"source": "measured", "compacts": consts, "exhaustion": exhaustion}),
        },
    });
    w.json("build.json", summary.clone())?;
    Ok((summary, Vec::new()))
}

fn run_uts_verify(s: &Scenario, w: &mut Writer<'_>) -> Result<(Value, Vec<String>)> {
    let setup = uts_setup(&s.inputs)?;
    let path = state_path(s, &setup);
    let state = UtsState::load(&path).map_err(|e| input_err("/inputs/state", format!("{}: {e}", path.display())))?;
    let rebuilt = uts_build(&setup)?;
    if rebuilt.config_hash != state.config_hash {
        return Err(input_err("/inputs", "the saved state was built from a different configuration"));
    }
    let rep = uts::verify_futs(&state, &setup.compacts, &setup.targets, &setup.family, setup.horizon)?;
    let targets: Vec<Value> = rep
        .targets
        .iter()
        .map(|t| {
            json!({
                "p": t.p, "i": t.i, "set": t.set, "compact": t.compact, "target": t.target,
                "elements": t.elements, "hits": t.hits, "misses": t.misses,
                "worst_error": t.worst_error, "worst_at": t.worst_at,
                "density_estimate": t.density_estimate,
            })
        })
        .collect();
    let report = json!({
        "targets": targets,
        "tail_sum": rep.tail_sum,
        "late_increment": rep.late_increment,
        "violations": rep.violations,
        "horizon": rep.horizon,
    });
    w.json("verify.json", report.clone())?;
    Ok((report, rep.violations))
}

// ---------------------------------------------------------------------------

/// Writes whitespace-separated `x y` columns from a CSV table; `#` lines are
/// skipped and the first remaining line is the header. Rows whose value is
/// not a positive number are dropped from log-scaled columns. An empty table
/// yields an empty file and a warning. Returns the number of rows written.
pub fn emit_plotdata(table: &Path, x: &str, y: &str, log_x: bool, log_y: bool, out: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(table)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let Some(header) = lines.next() else {
        eprintln!("warning: {} is empty", table.display());
        std::fs::write(out, "")?;
        return Ok(0);
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name).ok_or_else(|| Error::MissingColumn(name.into()));
    let (ix, iy) = (find(x)?, find(y)?);
    let mut s = format!("# {} {}\n", if log_x { format!("log10({x})") } else { x.into() }, if log_y { format!("log10({y})") } else { y.into() });
    let mut count = 0;
    let scale = |v: &str, log: bool| -> Option<f64> {
        let v: f64 = v.trim().parse().ok()?;
        if log {
            (v > 0.0).then(|| v.log10())
        } else {
            v.is_finite().then_some(v)
        }
    };
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (Some(a), Some(b)) = (f.get(ix), f.get(iy)) else { continue };
        if let (Some(a), Some(b)) = (scale(a, log_x), scale(b, log_y)) {
            writeln!(s, "{a} {b}").ok();
            count += 1;
        }
    }
    if count == 0 {
        eprintln!("warning: {} has no plottable rows", table.display());
    }
    std::fs::write(out, s)?;
    Ok(count)
}

/// Runs the command line `args` (including the program name) and returns
/// the exit status.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            e.print().ok();
            return code;
        }
    };
    let (command, path, flags) = match cli.action {
        Action::Plotdata {
            table,
            x,
            y,
            log_x,
            log_y,
            out,
        } => {
            return match emit_plotdata(&table, &x, &y, log_x, log_y, &out) {
                Ok(_) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_INPUT
                }
            };
        }
        Action::Run { command, scenario, flags } => (command, scenario, flags),
        Action::Potential(a) => (Command::Potential, a.scenario, a.flags),
        Action::Approx(a) => (Command::Approx, a.scenario, a.flags),
        Action::Density(a) => (Command::Density, a.scenario, a.flags),
        Action::Freqsets(a) => (Command::Freqsets, a.scenario, a.flags),
        Action::UtsBuild(a) => (Command::UtsBuild, a.scenario, a.flags),
        Action::UtsVerify(a) => (Command::UtsVerify, a.scenario, a.flags),
    };
    let result = Scenario::load(&path, Some(command), &flags).and_then(|s| run(&s));
    match result {
        Ok(o) => {
            for v in &o.violations {
                eprintln!("violation: {v}");
            }
            println!("{}", serde_json::to_string(&o.summary).unwrap_or_default());
            o.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}
