//! Flat experiment configuration: one table of string values per run.
//!
//! Sources are merged in the order defaults < `--config` document < CLI
//! pairs < explicit flags. Every value stays a string so that the canonical
//! form round-trips byte for byte.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;

use fraclat_core::lattice::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    KernelDump,
    Apply,
    UcpLattice,
    UcpTorus,
    Slab1d,
    Slab2d,
    Transference,
    ExtensionTrace,
    CarlemanCommutator,
    CarlemanProbe,
    BoundaryBulk,
    InverseSweep,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::KernelDump,
        Experiment::Apply,
        Experiment::UcpLattice,
        Experiment::UcpTorus,
        Experiment::Slab1d,
        Experiment::Slab2d,
        Experiment::Transference,
        Experiment::ExtensionTrace,
        Experiment::CarlemanCommutator,
        Experiment::CarlemanProbe,
        Experiment::BoundaryBulk,
        Experiment::InverseSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::KernelDump => "kernel-dump",
            Experiment::Apply => "apply",
            Experiment::UcpLattice => "ucp-lattice",
            Experiment::UcpTorus => "ucp-torus",
            Experiment::Slab1d => "slab-1d",
            Experiment::Slab2d => "slab-2d",
            Experiment::Transference => "transference",
            Experiment::ExtensionTrace => "extension-trace",
            Experiment::CarlemanCommutator => "carleman-commutator",
            Experiment::CarlemanProbe => "carleman-probe",
            Experiment::BoundaryBulk => "boundary-bulk",
            Experiment::InverseSweep => "inverse-sweep",
        }
    }

    /// Accepted parameters with their defaults (`None` = required).
    pub fn schema(self) -> Vec<Field> {
        use Kind::*;
        const fn f(key: &'static str, kind: Kind, default: Option<&'static str>) -> Field {
            Field { key, kind, default }
        }
        match self {
            Experiment::KernelDump => vec![
                f("s", Order, None),
                f("h", Positive, Some("1")),
                f("d", Dim, Some("1")),
                f("radius", Size(0, 400), Some("10")),
                f("rel_tol", Positive, Some("1e-8")),
            ],
            Experiment::Apply => vec![
                f("s", Order, None),
                f("N", Size(1, 64), Some("6")),
                f("d", Dim, Some("1")),
                f("samples", Size(1, 1000), Some("10")),
                f("tol", Positive, Some("1e-10")),
            ],
            Experiment::UcpLattice => vec![
                f("s", Order, None),
                f("h", Positive, Some("1")),
                f("d", Dim, Some("1")),
                f("X", Points, None),
                f("Y", OptPoints, Some("auto")),
                f("tol", Positive, Some("1e-9")),
            ],
            Experiment::UcpTorus => vec![
                f("s", Order, None),
                f("N", Size(1, 64), Some("8")),
                f("d", Dim, Some("1")),
                f("X", Points, None),
                f("tol", Positive, Some("1e-10")),
            ],
            Experiment::Slab1d => vec![
                f("s", Order, None),
                f("h", Positive, Some("1")),
                f("tol", Positive, Some("1e-10")),
            ],
            Experiment::Slab2d => vec![
                f("s", Order, None),
                f("h", Positive, Some("1")),
                f("radius", Size(10, 2000), Some("200")),
                f("j2", Ints, Some("0,3,-7,20,-45")),
                f("tol", Positive, Some("0.5")),
            ],
            Experiment::Transference => vec![
                f("s", Order, None),
                f("N", Size(1, 32), Some("4")),
                f("d", Dim, Some("1")),
                f("pairs", Size(1, 1000), Some("20")),
                f("tol", Positive, Some("1e-8")),
            ],
            Experiment::ExtensionTrace => vec![
                f("s", Order, None),
                f("N", Size(1, 64), Some("6")),
                f("d", Dim, Some("1")),
                f("fit", Size(4, 64), Some("16")),
                f("t_min", Positive, Some("1e-6")),
                f("ratio", Positive, Some("1.05")),
                f("t_max", Positive, Some("1")),
                f("tol", Positive, Some("1e-4")),
            ],
            Experiment::CarlemanCommutator => vec![
                f("d", Dim, Some("1")),
                f("h", Positive, Some("0.1")),
                f("tau", Positive, Some("3")),
                f("c0", Positive, Some("2")),
                f("delta0", Positive, Some("0.5")),
                f("radius", Size(1, 200), Some("10")),
                f("trials", Size(1, 1000), Some("5")),
                f("tol", Positive, Some("1e-10")),
            ],
            Experiment::CarlemanProbe => vec![
                f("d", Dim, Some("1")),
                f("h", Positive, Some("0.02")),
                f("c0", Positive, Some("2")),
                f("tau", Floats, Some("5,10,20")),
                f("delta0", Positive, Some("0.5")),
                f("tau0", Positive, Some("1")),
                f("band", Positive, Some("10")),
            ],
            Experiment::BoundaryBulk => vec![
                f("N", Sizes(4, 400), Some("31,62")),
                f("r0", Order, Some("0.5")),
                f("samples", Size(1, 100), Some("10")),
                f("spread", Positive, Some("0.2")),
            ],
            Experiment::InverseSweep => vec![
                f("N", Size(2, 256), Some("16")),
                f("W", Size(1, 256), Some("6")),
                f("Omega", Size(1, 256), Some("9")),
                f("separation", Size(1, 256), Some("3")),
                f("eps", Floats, Some("0.1,0.01,0.001,0.0001,0.00001,0.000001")),
                f("trials", Size(1, 1000), Some("10")),
                f("reg_lambda", Positive, Some("1e-20")),
                f("noiseless_tol", Positive, Some("1e-3")),
                f("r2_min", Positive, Some("0.9")),
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

/// Value domain of one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// Real in the open interval (0, 1).
    Order,
    /// Real > 0.
    Positive,
    /// Lattice dimension 1..=3.
    Dim,
    /// Integer in an inclusive range.
    Size(usize, usize),
    /// Comma list of integers in an inclusive range.
    Sizes(usize, usize),
    /// Comma list of integers.
    Ints,
    /// Comma list of positive reals.
    Floats,
    /// Point set, points separated by `;`, coordinates by `,`.
    Points,
    /// Point set or `auto`.
    OptPoints,
}

#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
}

/// One offending configuration entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown experiment `{0}` (expected one of: {list})", list = experiment_list())]
    UnknownExperiment(String),
    #[error("no experiment given")]
    MissingExperiment,
    #[error("malformed parameter `{0}`: expected key=value")]
    Malformed(String),
    #[error("config document: {0}")]
    Document(String),
    #[error("invalid configuration:{}", render_issues(.0))]
    Invalid(Vec<FieldIssue>),
}

impl ConfigError {
    /// Names of the offending fields for validation errors.
    pub fn fields(&self) -> Vec<&str> {
        match self {
            ConfigError::Invalid(v) => v.iter().map(|i| i.field.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

fn experiment_list() -> String {
    Experiment::ALL.iter().map(|e| e.name()).collect::<Vec<_>>().join(", ")
}

fn render_issues(v: &[FieldIssue]) -> String {
    v.iter().map(|i| format!("\n  {}: {}", i.field, i.message)).collect()
}

const RESERVED: [&str; 3] = ["experiment", "output_dir", "seed"];

/// Document syntax accepted by `--config`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Toml,
}

impl Format {
    /// `.toml` files are TOML, everything else JSON.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Format::Toml,
            _ => Format::Json,
        }
    }
}

/// Flatten a JSON or TOML document into string values. Arrays become comma
/// lists; arrays of arrays become point sets.
pub fn parse_document(text: &str, format: Format) -> Result<BTreeMap<String, String>, ConfigError> {
    let value: Value = match format {
        Format::Json => serde_json::from_str(text).map_err(|e| ConfigError::Document(e.to_string()))?,
        Format::Toml => {
            let t: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Document(e.to_string()))?;
            serde_json::to_value(t).map_err(|e| ConfigError::Document(e.to_string()))?
        }
    };
    let Value::Object(map) = value else {
        return Err(ConfigError::Document("top level must be a table".into()));
    };
    let mut out = BTreeMap::new();
    for (k, v) in map {
        let s = flatten(&v).ok_or_else(|| ConfigError::Document(format!("`{k}` is not a flat value")))?;
        out.insert(k, s);
    }
    Ok(out)
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn flatten(v: &Value) -> Option<String> {
    match v {
        Value::Array(items) => {
            if items.iter().all(|i| matches!(i, Value::Array(_))) && !items.is_empty() {
                let rows: Option<Vec<String>> = items
                    .iter()
                    .map(|row| match row {
                        Value::Array(c) => c.iter().map(scalar).collect::<Option<Vec<_>>>().map(|c| c.join(",")),
                        _ => None,
                    })
                    .collect();
                rows.map(|r| r.join(";"))
            } else {
                items.iter().map(scalar).collect::<Option<Vec<_>>>().map(|c| c.join(","))
            }
        }
        other => scalar(other),
    }
}

/// Split `key=value` CLI arguments.
pub fn parse_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for p in pairs {
        let p = p.as_ref();
        let (k, v) = p.split_once('=').ok_or_else(|| ConfigError::Malformed(p.to_string()))?;
        if k.is_empty() {
            return Err(ConfigError::Malformed(p.to_string()));
        }
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn parse_points(text: &str) -> Result<Vec<Point>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty point set".into());
    }
    let mut pts = Vec::new();
    for chunk in text.split(';') {
        let p: Result<Point, _> = chunk.split(',').map(|c| c.trim().parse::<i64>()).collect();
        pts.push(p.map_err(|_| format!("`{chunk}` is not a list of integers"))?);
    }
    let d = pts[0].len();
    if pts.iter().any(|p| p.len() != d) {
        return Err("points have different dimensions".into());
    }
    let mut sorted = pts.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != pts.len() {
        return Err("repeated point".into());
    }
    Ok(pts)
}

pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, _> = text.split(',').map(|c| c.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("`{text}` is not a comma list")),
    }
}

fn check_kind(kind: Kind, raw: &str) -> Result<(), String> {
    let real = |r: &str| r.trim().parse::<f64>().map_err(|_| format!("`{r}` is not a number"));
    match kind {
        Kind::Order => {
            let v = real(raw)?;
            (v > 0.0 && v < 1.0).then_some(()).ok_or_else(|| format!("{v} is outside (0, 1)"))
        }
        Kind::Positive => {
            let v = real(raw)?;
            (v > 0.0 && v.is_finite()).then_some(()).ok_or_else(|| format!("{v} must be positive"))
        }
        Kind::Dim => match raw.trim().parse::<usize>() {
            Ok(d) if (1..=3).contains(&d) => Ok(()),
            _ => Err(format!("`{raw}` is not a dimension in 1..=3")),
        },
        Kind::Size(lo, hi) => match raw.trim().parse::<usize>() {
            Ok(n) if (lo..=hi).contains(&n) => Ok(()),
            _ => Err(format!("`{raw}` is not an integer in {lo}..={hi}")),
        },
        Kind::Sizes(lo, hi) => {
            let v: Vec<usize> = parse_list(raw)?;
            v.iter()
                .all(|n| (lo..=hi).contains(n))
                .then_some(())
                .ok_or_else(|| format!("entries must lie in {lo}..={hi}"))
        }
        Kind::Ints => parse_list::<i64>(raw).map(|_| ()),
        Kind::Floats => {
            let v: Vec<f64> = parse_list(raw)?;
            v.iter()
                .all(|x| *x > 0.0 && x.is_finite())
                .then_some(())
                .ok_or_else(|| "entries must be positive".into())
        }
        Kind::Points => parse_points(raw).map(|_| ()),
        Kind::OptPoints if raw.trim() == "auto" => Ok(()),
        Kind::OptPoints => parse_points(raw).map(|_| ()),
    }
}

/// Validated configuration of one run; `params` includes defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Raw inputs before validation.
#[derive(Debug, Clone, Default)]
pub struct Sources {
    pub experiment: Option<String>,
    pub document: BTreeMap<String, String>,
    pub pairs: BTreeMap<String, String>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "out";

impl ExperimentConfig {
    /// Convenience constructor from CLI-style pairs.
    pub fn from_pairs<S: AsRef<str>>(experiment: &str, pairs: &[S]) -> Result<Self, ConfigError> {
        Self::assemble(Sources {
            experiment: Some(experiment.to_string()),
            pairs: parse_pairs(pairs)?,
            ..Sources::default()
        })
    }

    /// Merge, fill defaults and validate. All offending fields are reported
    /// together.
    pub fn assemble(src: Sources) -> Result<Self, ConfigError> {
        let mut merged = src.document;
        merged.extend(src.pairs);
        let mut issues = Vec::new();
        let experiment = match src.experiment.or_else(|| merged.get("experiment").cloned()) {
            Some(e) => e.parse::<Experiment>()?,
            None => return Err(ConfigError::MissingExperiment),
        };
        if let Some(e) = merged.get("experiment") {
            if e != experiment.name() {
                issues.push(FieldIssue {
                    field: "experiment".into(),
                    message: format!("document names `{e}` but `{experiment}` was requested"),
                });
            }
        }
        let output_dir = src
            .output_dir
            .or_else(|| merged.get("output_dir").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let seed = match (src.seed, merged.get("seed")) {
            (Some(s), _) => s,
            (None, Some(raw)) => raw.parse::<u64>().unwrap_or_else(|_| {
                issues.push(FieldIssue {
                    field: "seed".into(),
                    message: format!("`{raw}` is not an unsigned integer"),
                });
                0
            }),
            (None, None) => 0,
        };
        let schema = experiment.schema();
        let mut params = BTreeMap::new();
        for k in merged.keys() {
            if RESERVED.contains(&k.as_str()) {
                continue;
            }
            if !schema.iter().any(|f| f.key == k) {
                issues.push(FieldIssue {
                    field: k.clone(),
                    message: format!("not a parameter of {experiment}"),
                });
            }
        }
        for field in &schema {
            match merged.get(field.key).map(String::as_str).or(field.default) {
                None => issues.push(FieldIssue {
                    field: field.key.into(),
                    message: "required".into(),
                }),
                Some(raw) => {
                    if let Err(message) = check_kind(field.kind, raw) {
                        issues.push(FieldIssue {
                            field: field.key.into(),
                            message,
                        });
                    }
                    params.insert(field.key.to_string(), raw.to_string());
                }
            }
        }
        let cfg = ExperimentConfig {
            experiment,
            params,
            output_dir,
            seed,
        };
        if issues.is_empty() {
            cfg.cross_check(&mut issues);
        }
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    fn cross_check(&self, issues: &mut Vec<FieldIssue>) {
        let mut bad = |field: &str, message: String| {
            issues.push(FieldIssue {
                field: field.into(),
                message,
            })
        };
        match self.experiment {
            Experiment::UcpLattice | Experiment::UcpTorus => {
                let d = self.usize("d").unwrap_or(1);
                let x = self.points("X").unwrap_or_default();
                if x.first().is_some_and(|p| p.len() != d) {
                    bad("X", format!("points must have {d} coordinates"));
                }
                if self.experiment == Experiment::UcpTorus {
                    let n = self.usize("N").unwrap_or(0);
                    if x.len() > n {
                        bad("X", format!("|X| = {} exceeds N = {n}", x.len()));
                    }
                    if x.iter().flatten().any(|c| c.unsigned_abs() as usize > n) {
                        bad("X", format!("coordinates must lie in -{n}..={n}"));
                    }
                } else if let Ok(Some(y)) = self.opt_points("Y") {
                    if y.first().is_some_and(|p| p.len() != d) {
                        bad("Y", format!("points must have {d} coordinates"));
                    }
                    if y.len() != x.len() + 1 {
                        bad("Y", format!("|Y| must be |X| + 1 = {}", x.len() + 1));
                    }
                    if y.iter().any(|p| x.contains(p)) {
                        bad("Y", "X and Y must be disjoint".into());
                    }
                }
            }
            Experiment::ExtensionTrace => {
                let (lo, hi) = (self.f64("t_min").unwrap_or(0.0), self.f64("t_max").unwrap_or(0.0));
                if lo > 1e-4 {
                    bad("t_min", format!("{lo} is too large to resolve the boundary (need ≤ 1e-4)"));
                }
                if hi <= lo {
                    bad("t_max", "must exceed t_min".into());
                }
                if self.f64("ratio").unwrap_or(0.0) <= 1.0 {
                    bad("ratio", "must exceed 1".into());
                }
            }
            Experiment::CarlemanCommutator => {
                let (h, tau, delta0) = (self.f64("h").unwrap_or(0.0), self.f64("tau").unwrap_or(0.0), self.f64("delta0").unwrap_or(0.0));
                if tau * h > delta0 {
                    bad("tau", format!("tau·h = {} exceeds delta0 = {delta0}", tau * h));
                }
            }
            Experiment::CarlemanProbe => {
                let (h, delta0, tau0) = (self.f64("h").unwrap_or(0.0), self.f64("delta0").unwrap_or(0.0), self.f64("tau0").unwrap_or(0.0));
                for tau in self.floats("tau").unwrap_or_default() {
                    if tau * h > delta0 {
                        bad("tau", format!("tau·h = {} exceeds delta0 = {delta0}", tau * h));
                    }
                    if tau <= tau0 {
                        bad("tau", format!("{tau} does not exceed tau0 = {tau0}"));
                    }
                }
                if self.f64("band").unwrap_or(0.0) < 1.0 {
                    bad("band", "a ratio band must be at least 1".into());
                }
            }
            Experiment::InverseSweep => {
                let n = self.usize("N").unwrap_or(0);
                let (w, om, sep) = (self.usize("W").unwrap_or(0), self.usize("Omega").unwrap_or(0), self.usize("separation").unwrap_or(0));
                if w > n {
                    bad("W", format!("|W| = {w} exceeds N = {n}"));
                }
                if sep + om > n + 2 {
                    bad("Omega", format!("the observation block ends at {} beyond N = {n}", sep + om - 2));
                }
                let eps = self.floats("eps").unwrap_or_default();
                if eps.iter().any(|e| *e >= 1.0) {
                    bad("eps", "noise levels must lie in (0, 1)".into());
                }
                if eps.windows(2).any(|p| p[1] >= p[0]) {
                    bad("eps", "noise levels must be strictly decreasing".into());
                }
                if self.f64("r2_min").unwrap_or(0.0) > 1.0 {
                    bad("r2_min", "must not exceed 1".into());
                }
            }
            _ => {}
        }
    }

    fn raw(&self, key: &str) -> Result<&str, ConfigError> {
        self.params.get(key).map(String::as_str).ok_or_else(|| {
            ConfigError::Invalid(vec![FieldIssue {
                field: key.into(),
                message: "missing".into(),
            }])
        })
    }

    fn typed<T>(&self, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        parse(self.raw(key)?).map_err(|message| {
            ConfigError::Invalid(vec![FieldIssue {
                field: key.into(),
                message,
            }])
        })
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.typed(key, |r| r.trim().parse().map_err(|_| format!("`{r}` is not a number")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.typed(key, |r| r.trim().parse().map_err(|_| format!("`{r}` is not an integer")))
    }

    pub fn floats(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.typed(key, parse_list)
    }

    pub fn sizes(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.typed(key, parse_list)
    }

    pub fn ints(&self, key: &str) -> Result<Vec<i64>, ConfigError> {
        self.typed(key, parse_list)
    }

    pub fn points(&self, key: &str) -> Result<Vec<Point>, ConfigError> {
        self.typed(key, parse_points)
    }

    /// `None` for `auto`.
    pub fn opt_points(&self, key: &str) -> Result<Option<Vec<Point>>, ConfigError> {
        self.typed(key, |r| if r.trim() == "auto" { Ok(None) } else { parse_points(r).map(Some) })
    }

    /// Every entry, reserved keys included, as one sorted flat table.
    pub fn flat(&self) -> BTreeMap<String, String> {
        let mut all = self.params.clone();
        all.insert("experiment".into(), self.experiment.name().into());
        all.insert("output_dir".into(), self.output_dir.display().to_string());
        all.insert("seed".into(), self.seed.to_string());
        all
    }

    /// Sorted-key JSON of [`flat`](Self::flat); stable under
    /// `parse_document` + `assemble`.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.flat()).expect("string map serializes");
        s.push('\n');
        s
    }

    pub fn from_canonical_json(text: &str) -> Result<Self, ConfigError> {
        Self::assemble(Sources {
            document: parse_document(text, Format::Json)?,
            ..Sources::default()
        })
    }
}
