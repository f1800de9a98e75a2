//! The `hrigid` command line: configuration, commands, reports, exit codes.
//!
//! Exit codes: 0 success, 1 error (configuration, IO, domain), 2
//! indeterminate result, 3 negative result (non-rigid, no solution family,
//! rotation check above tolerance).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::directions::{
    classify, estimate_profile, sample_direction_set, ArcProfile, Case, CaseLabel,
    ClassifierTolerances, DirectionMeta, SampleBox,
};
use crate::expr::ScalarField;
use crate::funceq::{
    classify_solution, FamilyKind, FamilyVerdict, FuncEqSystem, FuncEqTolerances, SystemSpec,
};
use crate::rigidity::{
    full_rigidity_pipeline, rotation_lemma_check, Decision, NonRigidThresholds, PipelineReport,
    RigidityConfig, RotationCheckOptions, DEFAULT_SCALES,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INDETERMINATE: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

/// `x0,x1,y0,y1`, from a flag string or a JSON string or array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ListRepr")]
pub struct BoxArg(pub [f64; 4]);

/// Comma-separated scales, from a flag string or a JSON string or array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ListRepr")]
pub struct ScalesArg(pub Vec<f64>);

#[derive(Deserialize)]
#[serde(untagged)]
enum ListRepr {
    Text(String),
    Numbers(Vec<f64>),
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect()
}

impl FromStr for BoxArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_list(s)?;
        let arr: [f64; 4] = v
            .try_into()
            .map_err(|v: Vec<f64>| format!("box needs 4 numbers x0,x1,y0,y1, got {}", v.len()))?;
        Ok(BoxArg(arr))
    }
}

impl TryFrom<ListRepr> for BoxArg {
    type Error = String;

    fn try_from(r: ListRepr) -> Result<Self, Self::Error> {
        match r {
            ListRepr::Text(s) => s.parse(),
            ListRepr::Numbers(v) => {
                let n = v.len();
                Ok(BoxArg(v.try_into().map_err(|_| format!("box needs 4 numbers, got {n}"))?))
            }
        }
    }
}

impl FromStr for ScalesArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_list(s).map(ScalesArg)
    }
}

impl TryFrom<ListRepr> for ScalesArg {
    type Error = String;

    fn try_from(r: ListRepr) -> Result<Self, Self::Error> {
        match r {
            ListRepr::Text(s) => s.parse(),
            ListRepr::Numbers(v) => Ok(ScalesArg(v)),
        }
    }
}

/// Every setting any command reads. The same keys (snake_case) are accepted
/// in a JSON config file; flags override file values.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON config file; explicit flags take precedence over its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Field expression in x and y (one-variable for rotation-check --g).
    #[arg(long, allow_hyphen_values = true)]
    pub field: Option<String>,
    /// Sampling box "x0,x1,y0,y1".
    #[arg(long = "box", allow_hyphen_values = true)]
    #[serde(rename = "box")]
    pub sample_box: Option<BoxArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub pair_budget: Option<usize>,
    /// Scale list, e.g. "2,5,10".
    #[arg(long, allow_hyphen_values = true)]
    pub scales: Option<ScalesArg>,
    /// Report path (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Profile JSON path (directions-export).
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    /// Scale–shift system file (funceq).
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// One-variable function g (rotation-check).
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub fiber_step: Option<f64>,
    #[arg(long)]
    pub check_points: Option<usize>,
    #[arg(long)]
    pub tol_pole: Option<f64>,
    #[arg(long)]
    pub tol_zero: Option<f64>,
    #[arg(long)]
    pub tol_arc: Option<f64>,
    #[arg(long)]
    pub tol_len_bins: Option<f64>,
    #[arg(long)]
    pub tol_align: Option<f64>,
    #[arg(long)]
    pub tol_dir: Option<f64>,
    #[arg(long)]
    pub tol_sys: Option<f64>,
    #[arg(long)]
    pub tol_fit: Option<f64>,
    #[arg(long)]
    pub tol_rotation: Option<f64>,
    #[arg(long)]
    pub thr_rms: Option<f64>,
    #[arg(long)]
    pub thr_obstruction: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    /// File values (if `--config` is given) overlaid with these flags.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str::<RunConfig>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let top = self;
        overlay!(base, top; field, sample_box, n, seed, bins, pair_budget, scales, out,
            profile_out, system, g, d, c, lo, hi, fiber_step, check_points, tol_pole, tol_zero,
            tol_arc, tol_len_bins, tol_align, tol_dir, tol_sys, tol_fit, tol_rotation, thr_rms,
            thr_obstruction);
        base.config = None;
        base.check_tolerances()?;
        Ok(base)
    }

    fn check_tolerances(&self) -> anyhow::Result<()> {
        let named = [
            ("tol-pole", self.tol_pole),
            ("tol-zero", self.tol_zero),
            ("tol-arc", self.tol_arc),
            ("tol-len-bins", self.tol_len_bins),
            ("tol-align", self.tol_align),
            ("tol-dir", self.tol_dir),
            ("tol-sys", self.tol_sys),
            ("tol-fit", self.tol_fit),
            ("tol-rotation", self.tol_rotation),
            ("thr-rms", self.thr_rms),
            ("thr-obstruction", self.thr_obstruction),
            ("fiber-step", self.fiber_step),
        ];
        for (name, v) in named {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    bail!("{name} must be positive, got {v}");
                }
            }
        }
        Ok(())
    }

    fn field2(&self) -> anyhow::Result<ScalarField> {
        let src = self.field.as_deref().ok_or_else(|| anyhow!("--field is required"))?;
        Ok(ScalarField::parse2(src)?)
    }

    fn sample_box(&self) -> anyhow::Result<SampleBox> {
        let [x0, x1, y0, y1] = self.sample_box.map_or([-3.0, 3.0, -3.0, 3.0], |b| b.0);
        let b = SampleBox::new(x0, x1, y0, y1);
        if !b.is_valid() {
            bail!("box must satisfy x0 < x1 and y0 < y1, got {:?}", [x0, x1, y0, y1]);
        }
        Ok(b)
    }

    fn classifier(&self) -> ClassifierTolerances {
        let d = ClassifierTolerances::default();
        ClassifierTolerances {
            eps_pole: self.tol_pole.unwrap_or(d.eps_pole),
            eps_zero: self.tol_zero.unwrap_or(d.eps_zero),
            eps_arc: self.tol_arc.unwrap_or(d.eps_arc),
            eps_len_bins: self.tol_len_bins.unwrap_or(d.eps_len_bins),
        }
    }

    fn funceq_tolerances(&self) -> FuncEqTolerances {
        let d = FuncEqTolerances::default();
        FuncEqTolerances {
            sys: self.tol_sys.unwrap_or(d.sys),
            fit: self.tol_fit.unwrap_or(d.fit),
            param: d.param,
        }
    }

    fn rigidity(&self) -> anyhow::Result<RigidityConfig> {
        let d = RigidityConfig::default();
        let n = self.n.unwrap_or(d.n);
        if n < 4 {
            bail!("n must be at least 4, got {n}");
        }
        Ok(RigidityConfig {
            sample_box: self.sample_box()?,
            n,
            seed: self.seed.unwrap_or(0),
            bins: self.bins.unwrap_or(d.bins),
            pair_budget: self.pair_budget.unwrap_or(d.pair_budget),
            classifier: self.classifier(),
            tol_align: self.tol_align.unwrap_or(d.tol_align),
            tol_dir: self.tol_dir.unwrap_or(d.tol_dir),
            thresholds: NonRigidThresholds {
                rms: self.thr_rms.unwrap_or(d.thresholds.rms),
                obstruction: self.thr_obstruction.unwrap_or(d.thresholds.obstruction),
            },
            funceq: self.funceq_tolerances(),
            ..d
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "hrigid", version, about = "Horizontal rigidity laboratory for z = f(x, y)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the direction set, estimate its arc profile and classify it (Cases A–D).
    Classify(RunConfig),
    /// Run the rigidity pipeline over a scale list.
    Rigidity(RunConfig),
    /// Classify the solution family of a scale–shift system file.
    Funceq(RunConfig),
    /// Check the rotated cross-section of g(x) + d·y against −w·g.
    RotationCheck(RunConfig),
    /// Write direction samples (CSV) and the arc profile (JSON).
    DirectionsExport(RunConfig),
}

/// Report plus the exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: serde_json::Value,
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    case: &'a str,
    label: &'a CaseLabel,
    profile: &'a ArcProfile,
    thresholds: &'a ClassifierTolerances,
    bins: usize,
    meta: &'a DirectionMeta,
}

#[derive(Serialize)]
struct RigidityReport<'a> {
    scales: &'a [f64],
    config: &'a RigidityConfig,
    #[serde(flatten)]
    result: &'a PipelineReport,
}

#[derive(Serialize)]
struct RotationReport {
    g: String,
    d: f64,
    c: f64,
    lo: f64,
    hi: f64,
    fiber_step: f64,
    alpha: f64,
    w: f64,
    max_error: f64,
    tol: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ExportSummary {
    samples: usize,
    csv: Option<PathBuf>,
    profile: Option<PathBuf>,
    meta: DirectionMeta,
}

/// Writes `bytes` to `path` via a temporary file in the same directory and
/// an atomic rename, or to standard output when `path` is `None`.
pub fn write_atomic(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating temporary file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn cmd_classify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let field = cfg.field2()?;
    let rc = cfg.rigidity()?;
    let ds = sample_direction_set(&field, rc.sample_box, rc.n, rc.seed, rc.pair_budget)?;
    let profile = estimate_profile(&ds, rc.bins)?;
    let label = classify(&profile, &rc.classifier);
    let report = ClassifyReport {
        case: label.case.as_str(),
        label: &label,
        profile: &profile,
        thresholds: &rc.classifier,
        bins: rc.bins,
        meta: &ds.meta,
    };
    let bytes = to_json(&report)?;
    write_atomic(cfg.out.as_deref(), &bytes)?;
    let code = if label.case == Case::Indeterminate { EXIT_INDETERMINATE } else { EXIT_OK };
    Ok(Outcome {
        code,
        report: serde_json::to_value(&report)?,
    })
}

pub fn cmd_rigidity(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let field = cfg.field2()?;
    let rc = cfg.rigidity()?;
    let scales = cfg
        .scales
        .as_ref()
        .map_or_else(|| DEFAULT_SCALES.to_vec(), |s| s.0.clone());
    if scales.is_empty() {
        bail!("scale list is empty");
    }
    let result = full_rigidity_pipeline(&field, &scales, &rc)?;
    let report = RigidityReport {
        scales: &scales,
        config: &rc,
        result: &result,
    };
    let bytes = to_json(&report)?;
    write_atomic(cfg.out.as_deref(), &bytes)?;
    let code = match result.summary.decision {
        Decision::Rigid => EXIT_OK,
        Decision::NotRigid => EXIT_NEGATIVE,
        Decision::Indeterminate => EXIT_INDETERMINATE,
    };
    Ok(Outcome {
        code,
        report: serde_json::to_value(&report)?,
    })
}

pub fn cmd_funceq(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let path = cfg.system.as_ref().ok_or_else(|| anyhow!("--system is required"))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: SystemSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let system = FuncEqSystem::from_spec(&spec)?;
    // a violated system is an error (exit 1), not a negative result
    let verdict: FamilyVerdict = classify_solution(&system, &cfg.funceq_tolerances())?.verdict();
    let bytes = to_json(&verdict)?;
    write_atomic(cfg.out.as_deref(), &bytes)?;
    let code = if verdict.kind == FamilyKind::None { EXIT_NEGATIVE } else { EXIT_OK };
    Ok(Outcome {
        code,
        report: serde_json::to_value(&verdict)?,
    })
}

pub fn cmd_rotation_check(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let src = cfg
        .g
        .as_deref()
        .or(cfg.field.as_deref())
        .ok_or_else(|| anyhow!("--g is required"))?;
    let g = ScalarField::parse1(src)?;
    let d = cfg.d.ok_or_else(|| anyhow!("--d is required"))?;
    if d == 0.0 {
        bail!("d must be nonzero");
    }
    let c = cfg.c.unwrap_or(2.0);
    let (lo, hi) = (cfg.lo.unwrap_or(-2.0), cfg.hi.unwrap_or(2.0));
    let defaults = RotationCheckOptions::default();
    let opts = RotationCheckOptions {
        fiber_step: cfg.fiber_step.unwrap_or(defaults.fiber_step),
        check_points: cfg.check_points.unwrap_or(defaults.check_points),
    };
    let check = rotation_lemma_check(&g, d, c, lo, hi, &opts)?;
    let tol = cfg.tol_rotation.unwrap_or(1e-6);
    let report = RotationReport {
        g: g.source().to_string(),
        d,
        c,
        lo,
        hi,
        fiber_step: opts.fiber_step,
        alpha: check.alpha,
        w: check.w,
        max_error: check.max_error,
        tol,
        pass: check.max_error <= tol,
    };
    let bytes = to_json(&report)?;
    write_atomic(cfg.out.as_deref(), &bytes)?;
    Ok(Outcome {
        code: if report.pass { EXIT_OK } else { EXIT_NEGATIVE },
        report: serde_json::to_value(&report)?,
    })
}

pub fn cmd_directions_export(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let field = cfg.field2()?;
    let rc = cfg.rigidity()?;
    let ds = sample_direction_set(&field, rc.sample_box, rc.n, rc.seed, rc.pair_budget)?;
    let profile = estimate_profile(&ds, rc.bins)?;
    let csv = ds.to_csv();
    let profile_bytes = to_json(&profile)?;
    // write nothing unless everything was computed
    match (&cfg.out, &cfg.profile_out) {
        (None, None) => write_atomic(None, csv.as_bytes())?,
        (out, prof) => {
            if let Some(p) = out {
                write_atomic(Some(p), csv.as_bytes())?;
            }
            if let Some(p) = prof {
                write_atomic(Some(p), &profile_bytes)?;
            }
        }
    }
    let summary = ExportSummary {
        samples: ds.len(),
        csv: cfg.out.clone(),
        profile: cfg.profile_out.clone(),
        meta: ds.meta.clone(),
    };
    Ok(Outcome {
        code: EXIT_OK,
        report: serde_json::to_value(&summary)?,
    })
}

pub fn execute(command: &Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Classify(c) => cmd_classify(&c.resolve()?),
        Command::Rigidity(c) => cmd_rigidity(&c.resolve()?),
        Command::Funceq(c) => cmd_funceq(&c.resolve()?),
        Command::RotationCheck(c) => cmd_rotation_check(&c.resolve()?),
        Command::DirectionsExport(c) => cmd_directions_export(&c.resolve()?),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => outcome.code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
