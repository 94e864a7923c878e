//! Command-line front end: configuration, subcommands and rendering.
//!
//! Every subcommand is a pure function of its [`RunConfig`]; the binary only
//! parses arguments, writes the rendered text and maps errors to exit codes.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::curve::{quantile_grid, tabulate, Curve};
use crate::density::joint_overlap_density;
use crate::error::{Error, Result};
use crate::mc::{default_suite, midsample_suite, verify_spec, MCReport, VerifyOptions};
use crate::overlap::{probability_table, OverlapSpec};
use crate::parent::{ModelSpec, ParentModel};
use crate::rational::format_sig;
use crate::reconstruct::{
    from_adjacent_regression, from_max_regression, from_min_regression, F_from_hprime,
    ReconstructionResult, Tabulated,
};
use crate::regression::{closed_form_r1, special_form, Direction, LemmaForm, R1Item};

/// Version stamped into every JSON document and CSV header.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit status for success.
pub const EXIT_OK: u8 = 0;
/// Exit status for malformed configuration or arguments.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for well-formed input that is mathematically invalid.
pub const EXIT_INVALID_INPUT: u8 = 3;
/// Exit status for a failed Monte Carlo verification.
pub const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DensityPart {
    /// `x,y,continuous` on the quantile grid squared.
    Continuous,
    /// `x,atom` along the diagonal.
    Atom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegressionDirection {
    /// Original-sample statistic given the extended-sample one.
    Ce,
    /// Extended-sample statistic given the original-sample one.
    Ec,
}

impl From<RegressionDirection> for Direction {
    fn from(d: RegressionDirection) -> Self {
        match d {
            RegressionDirection::Ce => Direction::OrigGivenExt,
            RegressionDirection::Ec => Direction::ExtGivenOrig,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructMethod {
    /// `E(X_{1:n} | X_{1:m})`, needs `n`, `m`.
    Min,
    /// `E(X_{n:n} | X_{m:m})`, needs `n`, `m`.
    Max,
    /// `E(X_{i:m+1} | X_{i:m})`, needs `i` and optionally `b`.
    Adjacent,
    /// `h'` of `E(X_{j:n} | X_{1:1})`, needs `j`, `n`.
    Hprime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Tie tables, rectangles and regressions for several specs and parents.
    Default,
    /// Identity checks for the parents built from the midsample quantile density.
    Midsample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// The value column is the regression curve itself.
    Regression,
    /// For `adjacent`: the value column is `h(x) = x - E(...)`.
    H,
}

/// Model descriptor as a `family:p1,p2` string or a full object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelField {
    Text(String),
    Full(ModelSpec),
}

impl FromStr for ModelField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelSpec::from_str(s)?;
        Ok(ModelField::Text(s.to_string()))
    }
}

/// All knobs of a run. Read from flags, a JSON file, or both (flags win).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand name; only meaningful inside a JSON config file.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    /// Shift between the two samples.
    #[arg(long)]
    #[serde(default)]
    pub r: Option<u32>,
    /// Size of the original sample.
    #[arg(long)]
    #[serde(default)]
    pub m: Option<u32>,
    /// Size of the extended sample.
    #[arg(long)]
    #[serde(default)]
    pub n: Option<u32>,
    /// Rank within the original sample.
    #[arg(long)]
    #[serde(default)]
    pub i: Option<u32>,
    /// Rank within the extended sample.
    #[arg(long)]
    #[serde(default)]
    pub j: Option<u32>,
    /// All five indices at once as `r,m,n,i,j`.
    #[arg(long, value_name = "R,M,N,I,J")]
    #[serde(default)]
    pub spec: Option<String>,

    /// Parent distribution, e.g. `uniform`, `exponential`, `power:2`, `cb:1.5,1.5`.
    #[arg(long)]
    #[serde(default)]
    pub model: Option<ModelField>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub location: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub scale: Option<f64>,

    /// Number of quantile grid points.
    #[arg(long)]
    #[serde(default)]
    pub grid: Option<usize>,
    /// Output file (standard output when absent).
    #[arg(long, short)]
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(default)]
    pub format: Option<Format>,

    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,
    /// Monte Carlo replicates.
    #[arg(long)]
    #[serde(default)]
    pub reps: Option<u64>,
    /// Largest admissible |z| in verification.
    #[arg(long)]
    #[serde(default)]
    pub zmax: Option<f64>,
    /// Quadrature tolerance for mass audits.
    #[arg(long)]
    #[serde(default)]
    pub tol: Option<f64>,
    /// Bins for binned regression checks.
    #[arg(long)]
    #[serde(default)]
    pub bins: Option<usize>,
    /// verify: built-in suite to run when no spec is given.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub suite: Option<Suite>,

    /// density: which table to write.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub part: Option<DensityPart>,
    /// regress: conditioning direction of the general curve.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub direction: Option<RegressionDirection>,
    /// regress: closed form for r = 1, m = n = 2 (`i`..`iv` or `2:2|2:2` style).
    #[arg(long)]
    #[serde(default)]
    pub item: Option<String>,
    /// regress: special form `min:m,n`, `max:m,n`, `adjacent:i,m` or `single:j,n`.
    #[arg(long)]
    #[serde(default)]
    pub lemma: Option<String>,

    /// reconstruct: which inversion to apply.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub method: Option<ReconstructMethod>,
    /// reconstruct: curve CSV with `x` and `value` columns.
    #[arg(long)]
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// reconstruct: meaning of the value column.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub input_kind: Option<InputKind>,
    /// reconstruct: right end of the support for `adjacent` (default +inf).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub b: Option<f64>,
    /// reconstruct: where to write the diagnostics JSON.
    #[arg(long)]
    #[serde(default)]
    pub diagnostics: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlaid(mut self, flags: &RunConfig) -> Self {
        overlay!(
            self,
            flags,
            command,
            r,
            m,
            n,
            i,
            j,
            spec,
            model,
            location,
            scale,
            grid,
            output,
            format,
            seed,
            reps,
            zmax,
            tol,
            bins,
            suite,
            part,
            direction,
            item,
            lemma,
            method,
            input,
            input_kind,
            b,
            diagnostics
        );
        self
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }

    /// The five indices from `--spec` or the individual flags (those win).
    pub fn overlap_spec(&self) -> Result<OverlapSpec> {
        let mut v: [Option<u32>; 5] = [None; 5];
        if let Some(s) = &self.spec {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            if parts.len() != 5 {
                return Err(Error::Parse(format!(
                    "--spec needs five comma-separated integers, got {s:?}"
                )));
            }
            for (slot, p) in v.iter_mut().zip(parts) {
                *slot = Some(
                    p.parse()
                        .map_err(|_| Error::Parse(format!("bad index {p:?} in --spec")))?,
                );
            }
        }
        let names = ["r", "m", "n", "i", "j"];
        let own = [self.r, self.m, self.n, self.i, self.j];
        let mut idx = [0u32; 5];
        for k in 0..5 {
            idx[k] = own[k]
                .or(v[k])
                .ok_or_else(|| Error::InvalidSpec(format!("missing --{} (or --spec)", names[k])))?;
        }
        OverlapSpec::new(idx[0], idx[1], idx[2], idx[3], idx[4])
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut spec = match &self.model {
            None => ModelSpec::new("uniform", &[]),
            Some(ModelField::Text(s)) => ModelSpec::from_str(s)?,
            Some(ModelField::Full(m)) => m.clone(),
        };
        if let Some(l) = self.location {
            spec.location = l;
        }
        if let Some(s) = self.scale {
            spec.scale = s;
        }
        Ok(spec)
    }

    pub fn model(&self) -> Result<ParentModel> {
        self.model_spec()?.build()
    }

    fn need<T: Copy>(value: Option<T>, name: &str, command: &str) -> Result<T> {
        value.ok_or_else(|| Error::InvalidSpec(format!("{command} needs --{name}")))
    }
}

/// Top-level argument parser.
#[derive(Debug, Parser)]
#[command(
    name = "overlapstat",
    version,
    about = "Order statistics from overlapping samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact table of tie probabilities over global ranks.
    Probs(Invocation),
    /// Joint density: continuous part on a grid, or the diagonal atom profile.
    Density(Invocation),
    /// Regression curve on a quantile grid.
    Regress(Invocation),
    /// Parent cdf from a regression curve CSV.
    Reconstruct(Invocation),
    /// Monte Carlo verification; exits 4 if any |z| exceeds zmax.
    Verify(Invocation),
}

#[derive(Debug, Args)]
pub struct Invocation {
    /// JSON file with any of the flag fields; flags win on conflict.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: RunConfig,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Probs(_) => "probs",
            Command::Density(_) => "density",
            Command::Regress(_) => "regress",
            Command::Reconstruct(_) => "reconstruct",
            Command::Verify(_) => "verify",
        }
    }

    fn invocation(&self) -> &Invocation {
        match self {
            Command::Probs(a)
            | Command::Density(a)
            | Command::Regress(a)
            | Command::Reconstruct(a)
            | Command::Verify(a) => a,
        }
    }

    /// The merged configuration: file first, then flags.
    pub fn config(&self) -> Result<RunConfig> {
        let inv = self.invocation();
        let base = match &inv.config {
            Some(path) => RunConfig::from_json(&fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &base.command {
            if c != self.name() {
                return Err(Error::Parse(format!(
                    "config file is for {c:?}, not {:?}",
                    self.name()
                )));
            }
        }
        Ok(base.overlaid(&inv.flags))
    }
}

/// Text produced by a subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    /// Goes to `--output` or standard output.
    pub main: String,
    /// Secondary document (reconstruction diagnostics).
    pub side: Option<String>,
    pub status: u8,
}

impl Rendered {
    fn ok(main: String) -> Self {
        Self {
            main,
            side: None,
            status: EXIT_OK,
        }
    }
}

/// Maps an error to its exit status.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidSpec(_)
        | Error::InvalidParameter(_)
        | Error::Parse(_)
        | Error::Json(_)
        | Error::Io(_) => EXIT_CONFIG,
        Error::BudgetExceeded { .. }
        | Error::Quadrature { .. }
        | Error::InfiniteMean(_)
        | Error::InvalidRegression(_)
        | Error::EmptyBin { .. } => EXIT_INVALID_INPUT,
    }
}

/// Runs one subcommand on a merged configuration.
pub fn execute(command: &str, cfg: &RunConfig) -> Result<Rendered> {
    match command {
        "probs" => cmd_probs(cfg),
        "density" => cmd_density(cfg),
        "regress" => cmd_regress(cfg),
        "reconstruct" => cmd_reconstruct(cfg),
        "verify" => cmd_verify(cfg),
        other => Err(Error::Parse(format!("unknown subcommand {other:?}"))),
    }
}

fn header(command: &str, formula: &[&str], extra: &[(&str, String)]) -> String {
    let mut out = format!(
        "# overlapstat {command}\n# schema: {SCHEMA_VERSION}\n# formula: {}\n",
        formula.join(", ")
    );
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out
}

fn spec_text(s: &OverlapSpec) -> String {
    format!("r={} m={} n={} i={} j={}", s.r, s.m, s.n, s.i, s.j)
}

fn pretty(value: serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(&value).expect("json values serialize");
    s.push('\n');
    s
}

fn sig(v: f64) -> String {
    format_sig(v, 12)
}

pub fn cmd_probs(cfg: &RunConfig) -> Result<Rendered> {
    let spec = cfg.overlap_spec()?;
    let table = probability_table(&spec)?;
    let formula = ["tie-prob-below", "tie-prob-diagonal", "tie-prob-above"];
    let rationals = |v: Vec<crate::rational::ExactRational>| {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>()
    };
    Ok(Rendered::ok(match cfg.format() {
        Format::Json => {
            let mut doc = table.to_json();
            doc["schema"] = json!(SCHEMA_VERSION);
            doc["formula"] = json!(formula);
            doc["row_sums"] = json!(rationals(table.row_sums()));
            doc["column_sums"] = json!(rationals(table.column_sums()));
            pretty(doc)
        }
        Format::Csv => {
            let tie = table.tie_mass();
            let mut out = header(
                "probs",
                &formula,
                &[
                    ("spec", spec_text(&spec)),
                    ("total", table.total().to_string()),
                    ("tie_mass", format!("{tie} ({})", tie.to_decimal())),
                    ("row_sums", rationals(table.row_sums()).join(" ")),
                    ("column_sums", rationals(table.column_sums()).join(" ")),
                ],
            );
            out.push_str(&table.to_csv());
            out
        }
    }))
}

pub fn cmd_density(cfg: &RunConfig) -> Result<Rendered> {
    let spec = cfg.overlap_spec()?;
    let model = cfg.model()?;
    let size = cfg.grid.unwrap_or(21);
    if size < 2 {
        return Err(Error::InvalidParameter("--grid must be at least 2".into()));
    }
    let tol = cfg.tol.unwrap_or(1e-8);
    let density = joint_overlap_density(&spec, &model)?;
    let xs: Vec<f64> = quantile_grid(size)
        .into_iter()
        .map(|u| model.quantile(u))
        .collect();
    let total = density.nu_total_mass(tol)?;
    let atom_mass = density.atom_mass(tol)?;
    let weight = density.atom_weight();
    let formula = ["joint-density-pairs", "diagonal-atom"];
    let part = cfg.part.unwrap_or(DensityPart::Continuous);
    Ok(Rendered::ok(match cfg.format() {
        Format::Json => {
            let cont: Vec<Vec<f64>> = xs
                .iter()
                .map(|&x| xs.iter().map(|&y| density.continuous(x, y)).collect())
                .collect();
            let atom: Vec<f64> = xs.iter().map(|&x| density.atom(x)).collect();
            pretty(json!({
                "schema": SCHEMA_VERSION,
                "formula": formula,
                "spec": spec,
                "model": model.id(),
                "grid": xs,
                "continuous": cont,
                "atom": atom,
                "total_mass": total,
                "atom_mass": atom_mass,
                "atom_weight": weight,
            }))
        }
        Format::Csv => {
            let mut out = header(
                "density",
                &formula,
                &[
                    ("spec", spec_text(&spec)),
                    ("model", model.id()),
                    ("total_mass", sig(total)),
                    ("atom_mass", sig(atom_mass)),
                    ("atom_weight", format!("{weight} ({})", weight.to_decimal())),
                ],
            );
            match part {
                DensityPart::Continuous => {
                    out.push_str("x,y,continuous\n");
                    for &x in &xs {
                        for &y in &xs {
                            let _ = writeln!(
                                out,
                                "{},{},{}",
                                sig(x),
                                sig(y),
                                sig(density.continuous(x, y))
                            );
                        }
                    }
                }
                DensityPart::Atom => {
                    out.push_str("x,atom\n");
                    for &x in &xs {
                        let _ = writeln!(out, "{},{}", sig(x), sig(density.atom(x)));
                    }
                }
            }
            out
        }
    }))
}

fn parse_lemma(text: &str) -> Result<LemmaForm> {
    let bad = || {
        Error::Parse(format!(
            "bad --lemma {text:?}; use min:m,n | max:m,n | adjacent:i,m | single:j,n"
        ))
    };
    let (name, rest) = text.split_once(':').ok_or_else(bad)?;
    let nums: Vec<u32> = rest
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [a, b] = nums[..] else { return Err(bad()) };
    let form = match name.trim() {
        "min" => LemmaForm::Min { m: a, n: b },
        "max" => LemmaForm::Max { m: a, n: b },
        "adjacent" => LemmaForm::Adjacent { i: a, m: b },
        "single" => LemmaForm::Single { j: a, n: b },
        _ => return Err(bad()),
    };
    form.spec()?;
    Ok(form)
}

pub fn cmd_regress(cfg: &RunConfig) -> Result<Rendered> {
    let model = cfg.model()?;
    let size = cfg.grid.unwrap_or(99);
    let (curve, tag, label) = if let Some(item) = &cfg.item {
        let item = R1Item::from_str(item)?;
        let meaning = format!("closed form {item}, {}", model.id());
        (
            tabulate(&model, size, &meaning, |y| closed_form_r1(item, &model, y))?,
            item.tag(),
            spec_text(&item.spec()),
        )
    } else if let Some(lemma) = &cfg.lemma {
        let form = parse_lemma(lemma)?;
        let meaning = format!("{lemma}, {}", model.id());
        (
            tabulate(&model, size, &meaning, |x| special_form(form, &model, x))?,
            form.tag(),
            spec_text(&form.spec()?),
        )
    } else {
        let spec = cfg.overlap_spec()?;
        let direction: Direction = cfg.direction.unwrap_or(RegressionDirection::Ce).into();
        let curve = crate::regression::regression_curve(&spec, &model, direction, size)?;
        (curve, direction.tag(), spec_text(&spec))
    };
    Ok(Rendered::ok(match cfg.format() {
        Format::Json => pretty(json!({
            "schema": SCHEMA_VERSION,
            "formula": tag,
            "spec": label,
            "model": model.id(),
            "curve": curve,
        })),
        Format::Csv => {
            let mut out = header(
                "regress",
                &[tag],
                &[
                    ("spec", label),
                    ("model", model.id()),
                    ("meaning", curve.meaning.clone()),
                ],
            );
            out.push_str(&curve.to_csv());
            out
        }
    }))
}

fn adjacent_h(curve: Curve, kind: InputKind) -> Result<Curve> {
    match kind {
        InputKind::H => Ok(curve),
        InputKind::Regression => {
            let h: Vec<f64> = curve
                .x
                .iter()
                .zip(&curve.values)
                .map(|(x, g)| x - g)
                .collect();
            let mut out = Curve::new(format!("h = x - [{}]", curve.meaning), curve.x.clone(), h)?;
            if let Some(u) = curve.u {
                out = out.with_quantiles(u)?;
            }
            if let Some(d) = curve.derivative {
                out = out.with_derivative(d.iter().map(|g| 1.0 - g).collect())?;
            }
            Ok(out)
        }
    }
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<Rendered> {
    let method = RunConfig::need(cfg.method, "method", "reconstruct")?;
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("reconstruct needs --input".into()))?;
    let curve = Curve::from_csv(&path.display().to_string(), &fs::read_to_string(path)?)?;
    let need = |v, name| RunConfig::need(v, name, "reconstruct");
    let (result, tag): (ReconstructionResult, &str) = match method {
        ReconstructMethod::Min => (
            from_min_regression(&Tabulated::new(curve), need(cfg.n, "n")?, need(cfg.m, "m")?)?,
            "reconstruct-from-min",
        ),
        ReconstructMethod::Max => (
            from_max_regression(&Tabulated::new(curve), need(cfg.n, "n")?, need(cfg.m, "m")?)?,
            "reconstruct-from-max",
        ),
        ReconstructMethod::Adjacent => {
            let h = adjacent_h(curve, cfg.input_kind.unwrap_or(InputKind::Regression))?;
            let b = cfg.b.unwrap_or(f64::INFINITY);
            (
                from_adjacent_regression(&Tabulated::new(h), need(cfg.i, "i")?, b)?,
                "reconstruct-from-adjacent",
            )
        }
        ReconstructMethod::Hprime => (
            F_from_hprime(&Tabulated::new(curve), need(cfg.j, "j")?, need(cfg.n, "n")?)?,
            "reconstruct-from-hprime",
        ),
    };
    let d = &result.diagnostics;
    let status = if d.in_unit_interval && d.nondecreasing {
        EXIT_OK
    } else {
        EXIT_INVALID_INPUT
    };
    let diagnostics = json!({
        "schema": SCHEMA_VERSION,
        "formula": tag,
        "gauge": result.gauge,
        "diagnostics": result.diagnostics,
    });
    let (main, side) = match cfg.format() {
        Format::Json => (
            pretty(json!({
                "schema": SCHEMA_VERSION,
                "formula": tag,
                "gauge": result.gauge,
                "cdf": result.cdf,
                "diagnostics": result.diagnostics,
            })),
            None,
        ),
        Format::Csv => {
            let mut out = header(
                "reconstruct",
                &[tag],
                &[
                    ("gauge", result.gauge.clone()),
                    ("meaning", result.cdf.meaning.clone()),
                ],
            );
            out.push_str(&result.cdf.to_csv());
            (out, Some(pretty(diagnostics)))
        }
    };
    Ok(Rendered { main, side, status })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Rendered> {
    let seed = cfg.seed.unwrap_or(VerifyOptions::default().seed);
    let zmax = cfg.zmax.unwrap_or(4.0);
    if !(zmax > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "--zmax must be positive, got {zmax}"
        )));
    }
    let explicit = cfg.spec.is_some()
        || [cfg.r, cfg.m, cfg.n, cfg.i, cfg.j]
            .iter()
            .any(Option::is_some);
    let reports: Vec<MCReport> = if explicit {
        let spec = cfg.overlap_spec()?;
        let reps = cfg.reps.unwrap_or(1_000_000);
        if reps == 0 {
            return Err(Error::InvalidParameter("--reps must be at least 1".into()));
        }
        let mut opts = VerifyOptions {
            reps,
            regression_reps: reps,
            seed,
            zmax,
            ..VerifyOptions::default()
        };
        if let Some(b) = cfg.bins {
            opts.bins = b;
        }
        vec![verify_spec(&spec, &cfg.model()?, &opts)?]
    } else {
        match cfg.suite.unwrap_or(Suite::Default) {
            Suite::Default => default_suite(seed, zmax)?,
            Suite::Midsample => midsample_suite(cfg.reps.unwrap_or(10_000_000), seed, zmax)?,
        }
    };
    let passed = reports.iter().all(MCReport::passed);
    let main = pretty(json!({
        "schema": SCHEMA_VERSION,
        "formula": "monte-carlo-z-scores",
        "verdict": if passed { "pass" } else { "fail" },
        "reports": reports,
    }));
    Ok(Rendered {
        main,
        side: None,
        status: if passed { EXIT_OK } else { EXIT_VERIFY_FAILED },
    })
}

/// Parses `args`, runs the subcommand and writes its outputs. Returns the
/// process exit status; messages go to standard error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = cli.command.config().and_then(|cfg| {
        let rendered = execute(cli.command.name(), &cfg)?;
        write_outputs(&cfg, &rendered)?;
        Ok(rendered.status)
    });
    match outcome {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_outputs(cfg: &RunConfig, rendered: &Rendered) -> Result<()> {
    match &cfg.output {
        Some(path) => fs::write(path, &rendered.main)?,
        None => print!("{}", rendered.main),
    }
    if let Some(side) = &rendered.side {
        let target = cfg.diagnostics.clone().or_else(|| {
            cfg.output.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".diagnostics.json");
                PathBuf::from(s)
            })
        });
        match target {
            Some(path) => fs::write(path, side)?,
            None => eprint!("{side}"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(r: u32, m: u32, n: u32, i: u32, j: u32) -> RunConfig {
        RunConfig {
            r: Some(r),
            m: Some(m),
            n: Some(n),
            i: Some(i),
            j: Some(j),
            ..RunConfig::default()
        }
    }

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig::from_json(
            r#"{"r": 1, "m": 2, "n": 2, "i": 1, "j": 1, "model": "exponential"}"#,
        )
        .unwrap();
        let top = RunConfig {
            j: Some(2),
            model: Some(ModelField::Text("logistic".into())),
            ..RunConfig::default()
        };
        let merged = file.overlaid(&top);
        assert_eq!(
            merged.overlap_spec().unwrap(),
            OverlapSpec::new(1, 2, 2, 1, 2).unwrap()
        );
        assert_eq!(merged.model_spec().unwrap().family, "logistic");
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_json(r#"{"r": 1, "bogus": 3}"#).is_err());
        let full = RunConfig::from_json(
            r#"{"model": {"family": "power", "params": [2.0], "scale": 2.0}}"#,
        )
        .unwrap();
        assert_eq!(full.model_spec().unwrap().scale, 2.0);
    }

    #[test]
    fn spec_string_and_overrides() {
        let cfg = RunConfig {
            spec: Some("1,3,3,2,2".into()),
            j: Some(1),
            ..RunConfig::default()
        };
        assert_eq!(
            cfg.overlap_spec().unwrap(),
            OverlapSpec::new(1, 3, 3, 2, 1).unwrap()
        );
        let bad = RunConfig {
            spec: Some("1,3".into()),
            ..RunConfig::default()
        };
        assert_eq!(exit_code(&bad.overlap_spec().unwrap_err()), EXIT_CONFIG);
    }

    #[test]
    fn probs_lists_support_entries() {
        let out = cmd_probs(&flags(1, 2, 2, 1, 1)).unwrap().main;
        let rows: Vec<&str> = out
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .collect();
        assert_eq!(rows.len(), 4);
        assert!(out.contains("1,2,1,3,"));
        assert!(out.contains("2,2,0,1,0,"));
    }

    #[test]
    fn lemma_parsing() {
        assert_eq!(
            parse_lemma("adjacent:2,3").unwrap(),
            LemmaForm::Adjacent { i: 2, m: 3 }
        );
        assert!(parse_lemma("min:3,3").is_err());
        assert!(parse_lemma("sideways:1,2").is_err());
    }
}
