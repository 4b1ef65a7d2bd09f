//! Flat `section.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Matrices are written
//! row by row, rows separated by `;` and entries by `,`; each entry is a real
//! number or a complex number such as `0.5-1i`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use effcap::asymptotics::Growth;
use effcap::channel::ChannelModel;
use effcap::engine::{CovarianceStrategy, QosScenario};
use effcap::linalg::CMat;
use num_complex::Complex64;

use crate::CliError;

/// Which of the two exponent parameterizations was given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    /// QoS exponent θ, 1/bit.
    Theta(f64),
    /// Normalized exponent θ̂ = θ·T·B·log₂e.
    ThetaHat(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBlock {
    pub exponent: Exponent,
    pub t: f64,
    pub b: f64,
    pub n_r: usize,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBlock {
    Iid,
    Fixed { h: CMat },
    Kronecker { r_r: CMat, r_t: CMat },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Uniform,
    Waterfilling,
    Beamforming,
    Fixed,
    Statistical,
}

impl StrategyName {
    fn as_str(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Waterfilling => "waterfilling",
            Self::Beamforming => "beamforming",
            Self::Fixed => "fixed",
            Self::Statistical => "statistical",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "uniform" => Self::Uniform,
            "waterfilling" => Self::Waterfilling,
            "beamforming" => Self::Beamforming,
            "fixed" => Self::Fixed,
            "statistical" => Self::Statistical,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyBlock {
    pub name: StrategyName,
    /// Covariance for the `fixed` strategy.
    pub k: Option<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub snr_db_start: f64,
    pub snr_db_stop: f64,
    pub n_points: usize,
}

impl SweepBlock {
    /// Grid evenly spaced in dB.
    pub fn snr_db_grid(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.snr_db_start];
        }
        let step = (self.snr_db_stop - self.snr_db_start) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| self.snr_db_start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McBlock {
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    pub growth: Growth,
    /// Subchannel count at the first coherence bandwidth.
    pub m: usize,
    /// Subchannel count at the last coherence bandwidth (sublinear growth).
    pub m_stop: usize,
    pub p_over_n0: f64,
    pub b_c_start: f64,
    pub b_c_stop: f64,
    pub n_points: usize,
}

impl SparseBlock {
    /// Coherence bandwidths, log-spaced.
    pub fn b_c_grid(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.b_c_start];
        }
        let ratio = (self.b_c_stop / self.b_c_start).ln();
        (0..self.n_points)
            .map(|i| self.b_c_start * (ratio * i as f64 / (self.n_points - 1) as f64).exp())
            .collect()
    }

    /// Subchannel count at coherence bandwidth `b_c`: constant for bounded
    /// growth, a power law through `(b_c_start, m)` and `(b_c_stop, m_stop)`
    /// otherwise.
    pub fn m_at(&self, b_c: f64) -> usize {
        match self.growth {
            Growth::BoundedM => self.m,
            Growth::Sublinear => {
                if self.b_c_stop == self.b_c_start {
                    return self.m;
                }
                let p = (self.m_stop as f64 / self.m as f64).ln() / (self.b_c_stop / self.b_c_start).ln();
                (self.m as f64 * (b_c / self.b_c_start).powf(p)).round().max(1.0) as usize
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueBlock {
    pub n_blocks: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    /// `None` writes to standard output.
    pub path: Option<String>,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioBlock,
    pub model: ModelBlock,
    pub strategy: StrategyBlock,
    pub sweep: SweepBlock,
    pub mc: McBlock,
    pub sparse: Option<SparseBlock>,
    pub queue: QueueBlock,
    pub output: OutputBlock,
}

pub const DEFAULT_SAMPLES: usize = 200_000;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioBlock { exponent: Exponent::ThetaHat(1.0), t: 1e-3, b: 1e5, n_r: 1, n_t: 1 },
            model: ModelBlock::Iid,
            strategy: StrategyBlock { name: StrategyName::Uniform, k: None },
            sweep: SweepBlock { snr_db_start: -10.0, snr_db_stop: 30.0, n_points: 41 },
            mc: McBlock { n_samples: DEFAULT_SAMPLES, seed: 1 },
            sparse: None,
            queue: QueueBlock { n_blocks: 1_000_000, snr_db: 10.0 },
            output: OutputBlock { path: None, format: "csv".into() },
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "scenario.theta",
    "scenario.theta_hat",
    "scenario.T",
    "scenario.B",
    "scenario.n_R",
    "scenario.n_T",
    "model.variant",
    "model.H",
    "model.R_r",
    "model.R_t",
    "strategy.name",
    "strategy.K",
    "sweep.snr_db_start",
    "sweep.snr_db_stop",
    "sweep.n_points",
    "sweep.spacing",
    "mc.n_samples",
    "mc.seed",
    "sparse.growth",
    "sparse.m",
    "sparse.m_stop",
    "sparse.p_over_n0",
    "sparse.b_c_start",
    "sparse.b_c_stop",
    "sparse.n_points",
    "queue.n_blocks",
    "queue.snr_db",
    "output.path",
    "output.format",
];

/// Raw key/value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses configuration text. Repeated keys within one text are errors.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = Self::default();
        let mut errors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match split_pair(line) {
                Some((k, v)) => {
                    if raw.entries.contains_key(k) {
                        errors.push(format!("line {}: duplicate key {k}", lineno + 1));
                    }
                    raw.set(k, v);
                }
                None => errors.push(format!("line {}: expected key = value", lineno + 1)),
            }
        }
        if errors.is_empty() {
            Ok(raw)
        } else {
            Err(CliError::Config(errors.join("; ")))
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = split_pair(pair).ok_or_else(|| CliError::Config(format!("override {pair:?} is not key=value")))?;
        self.set(k, v);
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) {
        // the two exponent keys are alternatives: the latest one wins
        match key {
            "scenario.theta" => {
                self.entries.remove("scenario.theta_hat");
            }
            "scenario.theta_hat" => {
                self.entries.remove("scenario.theta");
            }
            _ => {}
        }
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn build(&self) -> Result<RunConfig, CliError> {
        let mut b = Builder { raw: &self.entries, errors: Vec::new() };
        for k in self.entries.keys() {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                b.errors.push(format!("{k}: unknown key"));
            }
        }
        let d = RunConfig::default();
        let theta = b.f64("scenario.theta", None);
        let theta_hat = b.f64("scenario.theta_hat", None);
        let exponent = match (theta, theta_hat) {
            (Some(t), None) => Exponent::Theta(t),
            (None, Some(t)) => Exponent::ThetaHat(t),
            _ => d.scenario.exponent,
        };
        let scenario = ScenarioBlock {
            exponent,
            t: b.f64("scenario.T", Some(d.scenario.t)).unwrap_or(d.scenario.t),
            b: b.f64("scenario.B", Some(d.scenario.b)).unwrap_or(d.scenario.b),
            n_r: b.usize("scenario.n_R", d.scenario.n_r),
            n_t: b.usize("scenario.n_T", d.scenario.n_t),
        };
        let model = match b.str("model.variant", "iid").as_str() {
            "iid" => ModelBlock::Iid,
            "fixed" => match b.matrix("model.H") {
                Some(h) => ModelBlock::Fixed { h },
                None => {
                    b.errors.push("model.H: required for model.variant = fixed".into());
                    ModelBlock::Iid
                }
            },
            "kronecker" => match (b.matrix("model.R_r"), b.matrix("model.R_t")) {
                (Some(r_r), Some(r_t)) => ModelBlock::Kronecker { r_r, r_t },
                _ => {
                    b.errors.push("model.R_r, model.R_t: both required for model.variant = kronecker".into());
                    ModelBlock::Iid
                }
            },
            other => {
                b.errors.push(format!("model.variant: unknown variant {other:?}"));
                ModelBlock::Iid
            }
        };
        let name_text = b.str("strategy.name", "uniform");
        let name = StrategyName::parse(&name_text).unwrap_or_else(|| {
            b.errors.push(format!("strategy.name: unknown strategy {name_text:?}"));
            StrategyName::Uniform
        });
        let k = b.matrix("strategy.K");
        if name == StrategyName::Fixed && k.is_none() {
            b.errors.push("strategy.K: required for strategy.name = fixed".into());
        }
        let spacing = b.str("sweep.spacing", "linear-dB");
        if spacing != "linear-dB" {
            b.errors.push(format!("sweep.spacing: only linear-dB is supported, got {spacing:?}"));
        }
        let sweep = SweepBlock {
            snr_db_start: b.f64("sweep.snr_db_start", Some(d.sweep.snr_db_start)).unwrap_or(0.0),
            snr_db_stop: b.f64("sweep.snr_db_stop", Some(d.sweep.snr_db_stop)).unwrap_or(0.0),
            n_points: b.usize("sweep.n_points", d.sweep.n_points),
        };
        let mc = McBlock {
            n_samples: b.usize("mc.n_samples", d.mc.n_samples),
            seed: b.u64("mc.seed", d.mc.seed),
        };
        let sparse = if self.entries.keys().any(|k| k.starts_with("sparse.")) {
            let growth = match b.str("sparse.growth", "bounded").as_str() {
                "bounded" => Growth::BoundedM,
                "sublinear" => Growth::Sublinear,
                other => {
                    b.errors.push(format!("sparse.growth: expected bounded or sublinear, got {other:?}"));
                    Growth::BoundedM
                }
            };
            let m = b.usize("sparse.m", 5);
            Some(SparseBlock {
                growth,
                m,
                m_stop: b.usize("sparse.m_stop", m),
                p_over_n0: b.f64("sparse.p_over_n0", Some(1e4)).unwrap_or(1e4),
                b_c_start: b.f64("sparse.b_c_start", Some(1e4)).unwrap_or(1e4),
                b_c_stop: b.f64("sparse.b_c_stop", Some(1e7)).unwrap_or(1e7),
                n_points: b.usize("sparse.n_points", 31),
            })
        } else {
            None
        };
        let queue = QueueBlock {
            n_blocks: b.usize("queue.n_blocks", d.queue.n_blocks),
            snr_db: b.f64("queue.snr_db", Some(d.queue.snr_db)).unwrap_or(0.0),
        };
        let output = OutputBlock {
            path: self.entries.get("output.path").cloned().filter(|p| !p.is_empty() && p != "-"),
            format: b.str("output.format", "csv"),
        };
        let cfg = RunConfig { scenario, model, strategy: StrategyBlock { name, k }, sweep, mc, sparse, queue, output };
        let mut errors = b.errors;
        errors.extend(cfg.check());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Config(errors.join("; ")))
        }
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k, v.trim()))
}

struct Builder<'a> {
    raw: &'a BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Builder<'_> {
    fn parsed<T: FromStr>(&mut self, key: &str) -> Option<T> {
        let v = self.raw.get(key)?;
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.errors.push(format!("{key}: cannot parse {v:?}"));
                None
            }
        }
    }

    fn f64(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        if !self.raw.contains_key(key) {
            return default;
        }
        self.parsed(key)
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.parsed(key).unwrap_or(default)
    }

    fn u64(&mut self, key: &str, default: u64) -> u64 {
        self.parsed(key).unwrap_or(default)
    }

    fn str(&mut self, key: &str, default: &str) -> String {
        self.raw.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    fn matrix(&mut self, key: &str) -> Option<CMat> {
        let v = self.raw.get(key)?;
        match parse_matrix(v) {
            Ok(m) => Some(m),
            Err(e) => {
                self.errors.push(format!("{key}: {e}"));
                None
            }
        }
    }
}

/// Parses `a, b; c, d` into a matrix.
pub fn parse_matrix(text: &str) -> Result<CMat, String> {
    let rows: Vec<Vec<Complex64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|e| {
                    let e = e.trim();
                    Complex64::from_str(e).map_err(|_| format!("bad matrix entry {e:?}"))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, |r| r.len());
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err("matrix rows must be nonempty and of equal length".into());
    }
    Ok(CMat::from_rows(&rows))
}

pub fn format_matrix(m: &CMat) -> String {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m[(r, c)].to_string()).collect::<Vec<_>>().join(", "))
        .collect::<Vec<_>>()
        .join("; ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        RawConfig::parse(text)?.build()
    }

    /// Semantic checks; each entry names the offending field.
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        let s = &self.scenario;
        match s.exponent {
            Exponent::Theta(t) if !(t >= 0.0 && t.is_finite()) => e.push(format!("scenario.theta: must be finite and >= 0, got {t}")),
            Exponent::ThetaHat(t) if !(t >= 0.0 && t.is_finite()) => {
                e.push(format!("scenario.theta_hat: must be finite and >= 0, got {t}"))
            }
            _ => {}
        }
        if !(s.t > 0.0 && s.t.is_finite()) {
            e.push(format!("scenario.T: must be positive, got {}", s.t));
        }
        if !(s.b > 0.0 && s.b.is_finite()) {
            e.push(format!("scenario.B: must be positive, got {}", s.b));
        }
        if s.n_r == 0 {
            e.push("scenario.n_R: must be at least 1".into());
        }
        if s.n_t == 0 {
            e.push("scenario.n_T: must be at least 1".into());
        }
        match &self.model {
            ModelBlock::Iid => {}
            ModelBlock::Fixed { h } => {
                if h.shape() != (s.n_r, s.n_t) {
                    e.push(format!("model.H: shape {:?} does not match n_R x n_T = {:?}", h.shape(), (s.n_r, s.n_t)));
                }
            }
            ModelBlock::Kronecker { r_r, r_t } => {
                if r_r.shape() != (s.n_r, s.n_r) {
                    e.push(format!("model.R_r: must be {0}x{0}", s.n_r));
                }
                if r_t.shape() != (s.n_t, s.n_t) {
                    e.push(format!("model.R_t: must be {0}x{0}", s.n_t));
                }
            }
        }
        if let Some(k) = &self.strategy.k {
            if k.shape() != (s.n_t, s.n_t) {
                e.push(format!("strategy.K: must be {0}x{0}", s.n_t));
            }
        }
        let w = &self.sweep;
        if !(w.snr_db_start.is_finite() && w.snr_db_stop.is_finite()) {
            e.push("sweep.snr_db_start, sweep.snr_db_stop: must be finite".into());
        } else if w.snr_db_start >= w.snr_db_stop {
            e.push(format!("sweep.snr_db_start: must be below sweep.snr_db_stop ({} >= {})", w.snr_db_start, w.snr_db_stop));
        }
        if w.n_points == 0 {
            e.push("sweep.n_points: must be at least 1".into());
        }
        if self.mc.n_samples == 0 {
            e.push("mc.n_samples: must be at least 1".into());
        }
        if let Some(sp) = &self.sparse {
            if sp.m == 0 || sp.m_stop == 0 {
                e.push("sparse.m, sparse.m_stop: must be at least 1".into());
            }
            if !(sp.p_over_n0 > 0.0 && sp.p_over_n0.is_finite()) {
                e.push("sparse.p_over_n0: must be positive".into());
            }
            if !(sp.b_c_start > 0.0 && sp.b_c_start < sp.b_c_stop && sp.b_c_stop.is_finite()) {
                e.push("sparse.b_c_start, sparse.b_c_stop: need 0 < start < stop".into());
            }
            if sp.n_points == 0 {
                e.push("sparse.n_points: must be at least 1".into());
            }
        }
        if self.queue.n_blocks < effcap::queue::MIN_BLOCKS {
            e.push(format!("queue.n_blocks: must be at least {}", effcap::queue::MIN_BLOCKS));
        }
        if !self.queue.snr_db.is_finite() {
            e.push("queue.snr_db: must be finite".into());
        }
        if self.output.format != "csv" {
            e.push(format!("output.format: only csv is supported, got {:?}", self.output.format));
        }
        e
    }

    /// Canonical text form; parsing it yields an equal configuration.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let s = &self.scenario;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match s.exponent {
            Exponent::Theta(t) => kv("scenario.theta", t.to_string()),
            Exponent::ThetaHat(t) => kv("scenario.theta_hat", t.to_string()),
        }
        kv("scenario.T", s.t.to_string());
        kv("scenario.B", s.b.to_string());
        kv("scenario.n_R", s.n_r.to_string());
        kv("scenario.n_T", s.n_t.to_string());
        match &self.model {
            ModelBlock::Iid => kv("model.variant", "iid".into()),
            ModelBlock::Fixed { h } => {
                kv("model.variant", "fixed".into());
                kv("model.H", format_matrix(h));
            }
            ModelBlock::Kronecker { r_r, r_t } => {
                kv("model.variant", "kronecker".into());
                kv("model.R_r", format_matrix(r_r));
                kv("model.R_t", format_matrix(r_t));
            }
        }
        kv("strategy.name", self.strategy.name.as_str().into());
        if let Some(k) = &self.strategy.k {
            kv("strategy.K", format_matrix(k));
        }
        kv("sweep.snr_db_start", self.sweep.snr_db_start.to_string());
        kv("sweep.snr_db_stop", self.sweep.snr_db_stop.to_string());
        kv("sweep.n_points", self.sweep.n_points.to_string());
        kv("sweep.spacing", "linear-dB".into());
        kv("mc.n_samples", self.mc.n_samples.to_string());
        kv("mc.seed", self.mc.seed.to_string());
        if let Some(sp) = &self.sparse {
            kv("sparse.growth", if sp.growth == Growth::BoundedM { "bounded" } else { "sublinear" }.into());
            kv("sparse.m", sp.m.to_string());
            kv("sparse.m_stop", sp.m_stop.to_string());
            kv("sparse.p_over_n0", sp.p_over_n0.to_string());
            kv("sparse.b_c_start", sp.b_c_start.to_string());
            kv("sparse.b_c_stop", sp.b_c_stop.to_string());
            kv("sparse.n_points", sp.n_points.to_string());
        }
        kv("queue.n_blocks", self.queue.n_blocks.to_string());
        kv("queue.snr_db", self.queue.snr_db.to_string());
        kv("output.path", self.output.path.clone().unwrap_or_else(|| "-".into()));
        kv("output.format", self.output.format.clone());
        out
    }

    pub fn scenario(&self) -> Result<QosScenario, CliError> {
        let s = &self.scenario;
        let r = match s.exponent {
            Exponent::Theta(t) => QosScenario::new(t, s.t, s.b, s.n_r, s.n_t),
            Exponent::ThetaHat(t) => QosScenario::from_theta_hat(t, s.t, s.b, s.n_r, s.n_t),
        };
        r.map_err(|e| CliError::Config(format!("scenario: {e}")))
    }

    pub fn channel_model(&self) -> Result<ChannelModel, CliError> {
        let (n_r, n_t) = (self.scenario.n_r, self.scenario.n_t);
        let r = match &self.model {
            ModelBlock::Iid => ChannelModel::iid(n_r, n_t),
            ModelBlock::Fixed { h } => ChannelModel::fixed(h.clone()),
            ModelBlock::Kronecker { r_r, r_t } => ChannelModel::kronecker(r_r.clone(), r_t.clone()),
        };
        r.map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn covariance_strategy(&self) -> Result<CovarianceStrategy, CliError> {
        Ok(match self.strategy.name {
            StrategyName::Uniform => CovarianceStrategy::UniformIdentity,
            StrategyName::Waterfilling => CovarianceStrategy::WaterfillingCsit,
            StrategyName::Beamforming => CovarianceStrategy::BeamformingCsit,
            StrategyName::Statistical => CovarianceStrategy::StatisticalOptimized,
            StrategyName::Fixed => {
                let k = self.strategy.k.clone().ok_or_else(|| CliError::Config("strategy.K: missing".into()))?;
                CovarianceStrategy::fixed(k).map_err(|e| CliError::Config(format!("strategy.K: {e}")))?
            }
        })
    }
}
