//! Flat `key = value` run configuration and its manifest form.
//!
//! One assignment per line, `#` starts a comment. List-valued keys
//! (`strategy`, `belief`) take comma-separated items; a sweep reads
//! `sweep = eta: 0, 0.0001, 0.001`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use invmm::{Belief, FillModel, MidPriceModel, Penalty, SimConfig, Strategy, StrategyParams};

const REQUIRED: [&str; 8] = ["kind", "sigma", "s0", "A", "k", "T", "strategy", "seed"];

const KNOWN: [&str; 28] = [
    "kind",
    "sigma",
    "s0",
    "b",
    "a",
    "mu",
    "A",
    "k",
    "T",
    "gamma",
    "eta",
    "strategy",
    "penalty",
    "belief",
    "fill_model",
    "seed",
    "n_steps",
    "n_paths",
    "q0",
    "x0",
    "sweep",
    "output_dir",
    "emit_trajectories",
    "table_format",
    "q_max",
    "ode_steps",
    "histogram_bins",
    "path_index",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Abm,
    Ou,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Eta,
    Gamma,
    Mu,
    B,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Eta => "eta",
            SweepParam::Gamma => "gamma",
            SweepParam::Mu => "mu",
            SweepParam::B => "b",
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "eta" => Ok(SweepParam::Eta),
            "gamma" => Ok(SweepParam::Gamma),
            "mu" => Ok(SweepParam::Mu),
            "b" => Ok(SweepParam::B),
            other => Err(format!("cannot sweep `{other}` (expected eta, gamma, mu or b)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ModelKind,
    pub sigma: f64,
    pub s0: f64,
    pub b: Option<f64>,
    pub a: Option<f64>,
    pub mu: Option<f64>,
    /// Fill intensity at zero distance (`A`).
    pub intensity: f64,
    pub k: f64,
    pub horizon: f64,
    pub gamma: Option<f64>,
    pub eta: f64,
    pub strategies: Vec<Strategy>,
    pub beliefs: Vec<Belief>,
    pub fill_model: FillModel,
    pub seed: u64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub q0: i64,
    pub x0: f64,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
    pub emit_trajectories: bool,
    pub table_format: TableFormat,
    pub q_max: i64,
    pub ode_steps: usize,
    pub histogram_bins: Option<usize>,
    /// Which ensemble member `path` replays.
    pub path_index: u64,
}

/// One value of the swept parameter, or none when there is no sweep.
pub type SweepPoint = Option<(SweepParam, f64)>;

/// One table row / trajectory column group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub strategy: Strategy,
    pub belief: Belief,
    pub point: SweepPoint,
}

impl Case {
    pub fn label(&self) -> String {
        let mut label = format!("{}_{}", self.strategy.name(), self.belief.name());
        if let Some((param, value)) = self.point {
            let _ = write!(label, "_{}={}", param.name(), value);
        }
        label
    }
}

impl RunConfig {
    pub fn points(&self) -> Vec<SweepPoint> {
        match &self.sweep {
            None => vec![None],
            Some(sweep) => sweep.values.iter().map(|&v| Some((sweep.param, v))).collect(),
        }
    }

    /// Strategy-major, then belief, then sweep point.
    pub fn cases(&self) -> Vec<Case> {
        let points = self.points();
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &belief in &self.beliefs {
                for &point in &points {
                    out.push(Case { strategy, belief, point });
                }
            }
        }
        out
    }

    pub fn model_at(&self, point: SweepPoint) -> MidPriceModel {
        let mut b = self.b.unwrap_or(0.0);
        let mut mu = self.mu.unwrap_or(self.s0);
        match point {
            Some((SweepParam::B, v)) => b = v,
            Some((SweepParam::Mu, v)) => mu = v,
            _ => {}
        }
        match self.kind {
            ModelKind::Abm => MidPriceModel::arithmetic(b, self.sigma, self.s0),
            ModelKind::Ou => {
                MidPriceModel::mean_reverting(self.a.unwrap_or(0.0), mu, self.sigma, self.s0)
            }
        }
    }

    pub fn params_at(&self, strategy: Strategy, point: SweepPoint) -> StrategyParams {
        let mut gamma = self.gamma.unwrap_or(0.0);
        let mut eta = self.eta;
        match point {
            Some((SweepParam::Gamma, v)) => gamma = v,
            Some((SweepParam::Eta, v)) => eta = v,
            _ => {}
        }
        StrategyParams {
            a: self.intensity,
            k: self.k,
            gamma,
            eta,
            horizon: self.horizon,
            utility: strategy.utility(),
        }
    }

    pub fn sim_config(&self, case: &Case) -> SimConfig {
        let mut cfg = SimConfig::new(
            self.model_at(case.point),
            self.params_at(case.strategy, case.point),
            case.strategy,
            self.seed,
        );
        cfg.belief = case.belief;
        cfg.fill_model = self.fill_model;
        cfg.n_steps = self.n_steps;
        cfg.n_paths = self.n_paths;
        cfg.q0 = self.q0;
        cfg.x0 = self.x0;
        cfg.ode_q_max = self.q_max;
        cfg.ode_steps = self.ode_steps;
        cfg
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Document {
    entries: HashMap<String, Entry>,
}

impl Document {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                err(Some(line), format!("expected `key = value`, found `{content}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN.contains(&key) {
                return Err(err(Some(line), format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(err(Some(line), format!("key `{key}` has no value")));
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                return Err(err(
                    Some(line),
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
            entries.insert(key.to_string(), Entry { line, value: value.to_string() });
        }
        Ok(Self { entries })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn get<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                err(Some(e.line), format!("`{key}` must be {what}, found `{}`", e.value))
            }),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.get(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => {
                Err(err(self.line(key), format!("`{key}` must be finite")))
            }
            other => Ok(other),
        }
    }

    fn required_number(&self, key: &str) -> Result<f64, ConfigError> {
        self.number(key)?.ok_or_else(|| missing(key))
    }
}

fn missing(key: &str) -> ConfigError {
    err(None, format!("missing required key `{key}`"))
}

fn parse_strategy(token: &str, penalty: Option<Penalty>) -> Result<Strategy, String> {
    match token {
        "linear" => Ok(Strategy::Linear),
        "linear_penalty" => Ok(Strategy::LinearPenalty),
        "general_penalty" => penalty
            .map(Strategy::GeneralPenalty)
            .ok_or_else(|| "general_penalty needs a `penalty` key (one or square)".to_string()),
        "exponential" => Ok(Strategy::Exponential),
        "ode_exponential" => Ok(Strategy::OdeExponential),
        other => Err(format!(
            "unknown strategy `{other}` (expected linear, linear_penalty, general_penalty, \
             exponential or ode_exponential)"
        )),
    }
}

fn parse_belief(token: &str) -> Result<Belief, String> {
    match token {
        "model" => Ok(Belief::Model),
        "martingale" => Ok(Belief::Martingale),
        other => Err(format!("unknown belief `{other}` (expected model or martingale)")),
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc = Document::parse(text)?;
    for key in REQUIRED {
        if doc.raw(key).is_none() {
            return Err(missing(key));
        }
    }

    let kind_entry = doc.raw("kind").expect("checked above");
    let kind = match kind_entry.value.as_str() {
        "abm" => ModelKind::Abm,
        "ou" => ModelKind::Ou,
        other => {
            return Err(err(
                Some(kind_entry.line),
                format!("unknown model kind `{other}` (expected abm or ou)"),
            ))
        }
    };

    let penalty = match doc.raw("penalty") {
        None => None,
        Some(e) => Some(e.value.parse::<Penalty>().map_err(|x| err(Some(e.line), x.to_string()))?),
    };

    let strategy_entry = doc.raw("strategy").expect("checked above");
    let strategies = list(&strategy_entry.value)
        .map(|t| parse_strategy(t, penalty))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|m| err(Some(strategy_entry.line), m))?;
    if penalty.is_some() && !strategies.iter().any(|s| matches!(s, Strategy::GeneralPenalty(_))) {
        return Err(err(doc.line("penalty"), "`penalty` is only read by general_penalty"));
    }

    let beliefs = match doc.raw("belief") {
        None => vec![Belief::Model],
        Some(e) => list(&e.value)
            .map(parse_belief)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| err(Some(e.line), m))?,
    };

    let sweep = match doc.raw("sweep") {
        None => None,
        Some(e) => Some(parse_sweep(&e.value).map_err(|m| err(Some(e.line), m))?),
    };

    let fill_model = match doc.raw("fill_model") {
        None => FillModel::Poisson,
        Some(e) => match e.value.as_str() {
            "poisson" => FillModel::Poisson,
            "bernoulli" => FillModel::Bernoulli,
            other => {
                return Err(err(
                    Some(e.line),
                    format!("unknown fill_model `{other}` (expected poisson or bernoulli)"),
                ))
            }
        },
    };

    let table_format = match doc.raw("table_format") {
        None => TableFormat::Csv,
        Some(e) => match e.value.as_str() {
            "csv" => TableFormat::Csv,
            "json" => TableFormat::Json,
            other => {
                return Err(err(
                    Some(e.line),
                    format!("unknown table_format `{other}` (expected csv or json)"),
                ))
            }
        },
    };

    let cfg = RunConfig {
        kind,
        sigma: doc.required_number("sigma")?,
        s0: doc.required_number("s0")?,
        b: doc.number("b")?,
        a: doc.number("a")?,
        mu: doc.number("mu")?,
        intensity: doc.required_number("A")?,
        k: doc.required_number("k")?,
        horizon: doc.required_number("T")?,
        gamma: doc.number("gamma")?,
        eta: doc.number("eta")?.unwrap_or(0.0),
        strategies,
        beliefs,
        fill_model,
        seed: doc.get("seed", "a non-negative integer")?.expect("checked above"),
        n_steps: doc.get("n_steps", "a positive integer")?.unwrap_or(1000),
        n_paths: doc.get("n_paths", "a positive integer")?.unwrap_or(20_000),
        q0: doc.get("q0", "an integer")?.unwrap_or(0),
        x0: doc.number("x0")?.unwrap_or(0.0),
        sweep,
        output_dir: doc
            .raw("output_dir")
            .map_or_else(|| PathBuf::from("out"), |e| PathBuf::from(&e.value)),
        emit_trajectories: doc.get("emit_trajectories", "true or false")?.unwrap_or(false),
        table_format,
        q_max: doc.get("q_max", "a positive integer")?.unwrap_or(invmm::ode::DEFAULT_Q_MAX),
        ode_steps: doc.get("ode_steps", "a positive integer")?.unwrap_or(invmm::ode::DEFAULT_STEPS),
        histogram_bins: doc.get("histogram_bins", "a positive integer")?,
        path_index: doc.get("path_index", "a non-negative integer")?.unwrap_or(0),
    };
    validate(&cfg, &doc)?;
    Ok(cfg)
}

fn parse_sweep(value: &str) -> Result<Sweep, String> {
    let (name, values) = value
        .split_once(':')
        .ok_or_else(|| format!("expected `sweep = <param>: v1, v2, ...`, found `{value}`"))?;
    let param: SweepParam = name.trim().parse()?;
    let values = list(values)
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("sweep value `{v}` is not a finite number"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep { param, values })
}

fn validate(cfg: &RunConfig, doc: &Document) -> Result<(), ConfigError> {
    if cfg.eta < 0.0 {
        return Err(err(doc.line("eta"), "`eta` must be non-negative"));
    }
    match cfg.kind {
        ModelKind::Ou => {
            if cfg.a.is_none() {
                return Err(err(doc.line("kind"), "kind = ou needs `a`"));
            }
            if cfg.mu.is_none() {
                return Err(err(doc.line("kind"), "kind = ou needs `mu`"));
            }
            if cfg.b.is_some() {
                return Err(err(doc.line("b"), "`b` only applies to kind = abm"));
            }
        }
        ModelKind::Abm => {
            for key in ["a", "mu"] {
                if doc.raw(key).is_some() {
                    return Err(err(doc.line(key), format!("`{key}` only applies to kind = ou")));
                }
            }
        }
    }
    if let Some(sweep) = &cfg.sweep {
        let line = doc.line("sweep");
        let fits = match sweep.param {
            SweepParam::Mu => cfg.kind == ModelKind::Ou,
            SweepParam::B => cfg.kind == ModelKind::Abm,
            _ => true,
        };
        if !fits {
            return Err(err(
                line,
                format!("cannot sweep `{}` for this model kind", sweep.param.name()),
            ));
        }
        if sweep.param == SweepParam::Eta && sweep.values.iter().any(|&v| v < 0.0) {
            return Err(err(line, "`eta` must be non-negative"));
        }
    }
    let sweeps_gamma = matches!(&cfg.sweep, Some(s) if s.param == SweepParam::Gamma);
    let needs_gamma = cfg
        .strategies
        .iter()
        .any(|s| matches!(s, Strategy::Exponential | Strategy::OdeExponential));
    if needs_gamma && cfg.gamma.is_none() && !sweeps_gamma {
        return Err(err(doc.line("strategy"), "exponential strategies need `gamma`"));
    }
    if cfg.strategies.contains(&Strategy::OdeExponential)
        && cfg.kind == ModelKind::Ou
        && cfg.beliefs.contains(&Belief::Model)
    {
        return Err(err(
            doc.line("strategy"),
            "ode_exponential needs an arithmetic quoting model (kind = abm or belief = martingale)",
        ));
    }
    if cfg.path_index >= cfg.n_paths as u64 {
        return Err(err(doc.line("path_index"), "`path_index` must be below n_paths"));
    }
    if cfg.histogram_bins == Some(0) {
        return Err(err(doc.line("histogram_bins"), "`histogram_bins` must be at least 1"));
    }
    for case in cfg.cases() {
        cfg.sim_config(&case).validate().map_err(|e| {
            let line = match case.point {
                Some(_) => doc.line("sweep"),
                None => None,
            };
            err(line, format!("{}: {e}", case.label()))
        })?;
    }
    Ok(())
}

/// Manifest text; `parse_config(&emit(c)) == Ok(c)`.
pub fn emit(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        let _ = writeln!(out, "{key} = {value}");
    };
    put(
        "kind",
        match cfg.kind {
            ModelKind::Abm => "abm",
            ModelKind::Ou => "ou",
        }
        .into(),
    );
    put("sigma", cfg.sigma.to_string());
    put("s0", cfg.s0.to_string());
    for (key, value) in [("b", cfg.b), ("a", cfg.a), ("mu", cfg.mu)] {
        if let Some(v) = value {
            put(key, v.to_string());
        }
    }
    put("A", cfg.intensity.to_string());
    put("k", cfg.k.to_string());
    put("T", cfg.horizon.to_string());
    if let Some(g) = cfg.gamma {
        put("gamma", g.to_string());
    }
    put("eta", cfg.eta.to_string());
    put("strategy", cfg.strategies.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "));
    let penalty = cfg.strategies.iter().find_map(|s| match s {
        Strategy::GeneralPenalty(p) => Some(*p),
        _ => None,
    });
    if let Some(p) = penalty {
        put("penalty", p.to_string());
    }
    put("belief", cfg.beliefs.iter().map(|b| b.name()).collect::<Vec<_>>().join(", "));
    put("fill_model", cfg.fill_model.name().into());
    put("seed", cfg.seed.to_string());
    put("n_steps", cfg.n_steps.to_string());
    put("n_paths", cfg.n_paths.to_string());
    put("q0", cfg.q0.to_string());
    put("x0", cfg.x0.to_string());
    if let Some(sweep) = &cfg.sweep {
        let values: Vec<String> = sweep.values.iter().map(f64::to_string).collect();
        put("sweep", format!("{}: {}", sweep.param.name(), values.join(", ")));
    }
    put("output_dir", cfg.output_dir.display().to_string());
    put("emit_trajectories", cfg.emit_trajectories.to_string());
    put(
        "table_format",
        match cfg.table_format {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
        .into(),
    );
    put("q_max", cfg.q_max.to_string());
    put("ode_steps", cfg.ode_steps.to_string());
    if let Some(bins) = cfg.histogram_bins {
        put("histogram_bins", bins.to_string());
    }
    put("path_index", cfg.path_index.to_string());
    out
}
