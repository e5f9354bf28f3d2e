//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{kappa, PairwiseKernel};
use crate::learner::{Engine, EtaRule, Schedule};
use crate::measure::{DiscreteMeasure, Measure, SamplerMeasure, TargetFunction};
use crate::theory::SpectralModel;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "kernel",
    "dim",
    "support",
    "probs",
    "f_rho",
    "norm_target",
    "noise_half_width",
    "box",
    "mode",
    "engine",
    "T",
    "theta",
    "mu",
    "R",
    "eta",
    "seed",
    "n_trials",
    "delta",
    "beta",
    "record_at",
    "output",
    "workers",
    "mc_pairs",
    "merge_centers",
    "max_T",
    "t_min",
];

/// Largest horizon accepted for the direct engine unless raised by `max_T`.
pub const DEFAULT_MAX_T: usize = 3000;
pub const DEFAULT_T_MIN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    Opera,
    Pogd,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Opera => "opera",
            Mode::Pogd => "pogd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "opera" => Ok(Mode::Opera),
            "pogd" => Ok(Mode::Pogd),
            other => Err(Error::parse("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// POGD step size choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    Lipschitz,
    RadiusSquared,
    Schedule,
    Value(f64),
}

/// Where the indices to record come from.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordSpec {
    /// Only `T + 1` for every horizon.
    Horizons,
    /// Powers of two in `[2, T_max + 1]`, plus every `T + 1`.
    Log2,
    List(Vec<usize>),
}

/// How the target is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Values(Vec<f64>),
    Spectral { beta: f64, seed: u64 },
    Expr(TargetFunction),
}

/// A validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Effective key/value entries after overrides.
    pub entries: BTreeMap<String, String>,
    pub kernel: PairwiseKernel,
    pub dim: usize,
    pub measure: Measure,
    pub target: TargetSpec,
    pub norm_target: f64,
    pub modes: Vec<Mode>,
    pub engine: Engine,
    pub horizons: Vec<usize>,
    pub theta: f64,
    pub mu: f64,
    pub kappa: f64,
    pub radius: Option<f64>,
    pub eta: EtaSpec,
    pub seed: u64,
    pub n_trials: usize,
    pub delta: f64,
    pub beta: f64,
    pub record: RecordSpec,
    pub output: PathBuf,
    pub workers: Option<usize>,
    pub mc_pairs: usize,
    pub merge_centers: bool,
    pub max_t: usize,
    pub t_min: usize,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::config(format!("line {}: unknown key `{k}`", n + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

/// Parses `key=value` overrides (a leading `--` is accepted).
pub fn parse_overrides(args: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for a in args {
        let s = a.trim_start_matches("--");
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{a}` is not of the form key=value")))?;
        if !KEYS.contains(&k) {
            return Err(Error::config(format!("unknown key `{k}` in override")));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::parse(key, format!("cannot parse `{v}`")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn bool_value(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::parse(key, format!("expected a boolean, got `{other}`"))),
    }
}

/// `linspace:A:B:M`, points separated by `;` with `,` between coordinates,
/// or (in one dimension) a comma-separated list.
fn parse_support(v: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(rest) = v.trim().strip_prefix("linspace:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 || dim != 1 {
            return Err(Error::parse("support", "linspace takes A:B:M and needs dim = 1"));
        }
        let a: f64 = num("support", parts[0])?;
        let b: f64 = num("support", parts[1])?;
        let m: usize = num("support", parts[2])?;
        if m < 1 {
            return Err(Error::parse("support", "linspace needs M >= 1"));
        }
        if m == 1 {
            return Ok(vec![vec![a]]);
        }
        return Ok((0..m).map(|i| vec![a + (b - a) * i as f64 / (m - 1) as f64]).collect());
    }
    let points: Vec<Vec<f64>> = if v.contains(';') {
        v.split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|p| list("support", p))
            .collect::<Result<_>>()?
    } else if dim == 1 {
        list::<f64>("support", v)?.into_iter().map(|x| vec![x]).collect()
    } else {
        vec![list("support", v)?]
    };
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::parse("support", format!("every point needs {dim} coordinates")));
    }
    Ok(points)
}

/// `lo:hi` per axis, axes separated by `,`.
fn parse_box(v: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for axis in v.split(',') {
        let (a, b) = axis
            .split_once(':')
            .ok_or_else(|| Error::parse("box", format!("axis `{axis}` is not lo:hi")))?;
        lo.push(num("box", a)?);
        hi.push(num("box", b)?);
    }
    if lo.len() == 1 && dim > 1 {
        lo = vec![lo[0]; dim];
        hi = vec![hi[0]; dim];
    }
    if lo.len() != dim {
        return Err(Error::parse("box", format!("expected {dim} axes, got {}", lo.len())));
    }
    Ok((lo, hi))
}

fn parse_target(v: &str, default_beta: f64) -> Result<TargetSpec> {
    let v = v.trim();
    if let Some(name) = v.strip_prefix("expr:") {
        return Ok(TargetSpec::Expr(TargetFunction::parse(name)?));
    }
    if let Some(rest) = v.strip_prefix("spectral") {
        let mut beta = default_beta;
        let mut seed = 0u64;
        for part in rest.split(':').filter(|s| !s.is_empty()) {
            match part.split_once('=') {
                Some(("beta", b)) => beta = num("f_rho", b)?,
                Some(("seed", s)) => seed = num("f_rho", s)?,
                _ => return Err(Error::parse("f_rho", format!("unknown spectral option `{part}`"))),
            }
        }
        if !(beta > 0.0) {
            return Err(Error::parse("f_rho", "spectral beta must be positive"));
        }
        return Ok(TargetSpec::Spectral { beta, seed });
    }
    Ok(TargetSpec::Values(list("f_rho", v)?))
}

fn parse_record(v: &str) -> Result<RecordSpec> {
    match v.trim() {
        "log2" => Ok(RecordSpec::Log2),
        "" | "T" => Ok(RecordSpec::Horizons),
        s => Ok(RecordSpec::List(list("record_at", s)?)),
    }
}

impl ExperimentConfig {
    /// Reads a file and applies overrides on top.
    pub fn load(path: &Path, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config `{}`: {e}", path.display())))?;
        let mut entries = parse_entries(&text)?;
        entries.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        Self::from_entries(entries)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_entries(parse_entries(text)?)
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = entries.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::config(format!("unknown key `{k}`")));
        }
        let get = |k: &str| entries.get(k).map(String::as_str);
        let dim: usize = get("dim").map(|v| num("dim", v)).transpose()?.unwrap_or(1);
        if dim == 0 {
            return Err(Error::parse("dim", "must be positive"));
        }
        let kernel_spec = get("kernel").ok_or_else(|| Error::config("missing key `kernel`"))?;
        let kernel = PairwiseKernel::parse(kernel_spec, dim)?;
        let beta: f64 = get("beta").map(|v| num("beta", v)).transpose()?.unwrap_or(1.0);
        if !(beta > 0.0) {
            return Err(Error::parse("beta", "must be positive"));
        }
        let norm_target: f64 = get("norm_target")
            .map(|v| num("norm_target", v))
            .transpose()?
            .unwrap_or(1.0);
        if !(norm_target > 0.0) {
            return Err(Error::parse("norm_target", "must be positive"));
        }
        let noise: f64 = get("noise_half_width")
            .map(|v| num("noise_half_width", v))
            .transpose()?
            .unwrap_or(0.1);
        let target = get("f_rho")
            .map(|v| parse_target(v, beta))
            .transpose()?
            .ok_or_else(|| Error::config("missing key `f_rho`"))?;

        let measure = match (get("support"), get("box")) {
            (Some(_), Some(_)) => return Err(Error::config("give either `support` or `box`, not both")),
            (None, None) => return Err(Error::config("missing key `support` or `box`")),
            (None, Some(b)) => {
                let (lo, hi) = parse_box(b, dim)?;
                let f = match &target {
                    TargetSpec::Expr(f) => *f,
                    _ => return Err(Error::config("a box measure needs `f_rho = expr:NAME`")),
                };
                if get("probs").is_some() {
                    return Err(Error::config("`probs` applies only to a discrete support"));
                }
                Measure::Sampler(SamplerMeasure::new(lo, hi, f, noise)?)
            }
            (Some(s), None) => {
                let support = parse_support(s, dim)?;
                let m = support.len();
                let probs = match get("probs") {
                    Some(p) => list("probs", p)?,
                    None => vec![1.0 / m as f64; m],
                };
                let values = match &target {
                    TargetSpec::Values(v) => v.clone(),
                    TargetSpec::Expr(f) => support.iter().map(|x| f.eval(x)).collect(),
                    TargetSpec::Spectral { .. } => vec![0.0; m],
                };
                let mut d = DiscreteMeasure::new(support, probs, values, noise)?;
                if let TargetSpec::Spectral { beta, seed } = target {
                    if kernel.base().is_none() {
                        return Err(Error::config("a spectral target needs an induced kernel"));
                    }
                    let model = SpectralModel::build(&kernel, &d)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let built = model.construct_regular_target(beta, norm_target, &mut rng)?;
                    d = d.with_f_rho(built.f_rho_values)?;
                }
                Measure::Discrete(d)
            }
        };

        let modes: Vec<Mode> = match get("mode") {
            Some(v) => {
                let mut m: Vec<Mode> = v.split(',').map(Mode::parse).collect::<Result<_>>()?;
                m.dedup();
                m
            }
            None => vec![Mode::Opera],
        };
        if modes.is_empty() {
            return Err(Error::parse("mode", "no mode given"));
        }
        let engine = match get("engine").unwrap_or("auto") {
            "auto" => {
                if kernel.base().is_some() {
                    Engine::Reduced
                } else {
                    Engine::Direct
                }
            }
            "reduced" => Engine::Reduced,
            "direct" => Engine::Direct,
            other => return Err(Error::parse("engine", format!("unknown engine `{other}`"))),
        };
        if engine == Engine::Reduced && kernel.base().is_none() {
            return Err(Error::config("the reduced engine needs an induced kernel"));
        }

        let mut horizons: Vec<usize> = get("T")
            .map(|v| list("T", v))
            .transpose()?
            .ok_or_else(|| Error::config("missing key `T`"))?;
        horizons.sort_unstable();
        horizons.dedup();
        if horizons.is_empty() || horizons[0] < 2 {
            return Err(Error::parse("T", "every horizon must be at least 2"));
        }
        let max_t: usize = get("max_T")
            .map(|v| num("max_T", v))
            .transpose()?
            .unwrap_or(DEFAULT_MAX_T);
        let t_last = *horizons.last().unwrap();
        if engine == Engine::Direct && t_last > max_t {
            return Err(Error::config(format!(
                "T = {t_last} exceeds max_T = {max_t} for the direct engine"
            )));
        }

        let theta: f64 = get("theta").map(|v| num("theta", v)).transpose()?.unwrap_or(2.0 / 3.0);
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::parse("theta", "must lie in (0, 1)"));
        }
        let kappa = kappa(&kernel, &measure.domain())?.value;
        let mu = match get("mu").unwrap_or("auto") {
            "auto" => (kappa * kappa).max(f64::MIN_POSITIVE),
            v => num("mu", v)?,
        };
        if !(mu > 0.0) {
            return Err(Error::parse("mu", "must be positive"));
        }
        let radius: Option<f64> = get("R").map(|v| num("R", v)).transpose()?;
        if modes.contains(&Mode::Pogd) {
            match radius {
                Some(r) if r > 0.0 => {}
                _ => return Err(Error::config("mode pogd needs a positive `R`")),
            }
        }
        let eta = match get("eta").unwrap_or("lipschitz") {
            "lipschitz" => EtaSpec::Lipschitz,
            "radius2" => EtaSpec::RadiusSquared,
            "schedule" => EtaSpec::Schedule,
            v => {
                let x: f64 = num("eta", v)?;
                if !(x > 0.0) {
                    return Err(Error::parse("eta", "must be positive"));
                }
                EtaSpec::Value(x)
            }
        };
        let seed: u64 = get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(0);
        let n_trials: usize = get("n_trials").map(|v| num("n_trials", v)).transpose()?.unwrap_or(1);
        if n_trials == 0 {
            return Err(Error::parse("n_trials", "must be at least 1"));
        }
        let delta: f64 = get("delta").map(|v| num("delta", v)).transpose()?.unwrap_or(0.1);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::parse("delta", "must lie in (0, 1)"));
        }
        let record = parse_record(get("record_at").unwrap_or(""))?;
        if let RecordSpec::List(l) = &record {
            if let Some(bad) = l.iter().find(|t| **t < 1 || **t > t_last + 1) {
                return Err(Error::parse(
                    "record_at",
                    format!("index {bad} outside [1, {}]", t_last + 1),
                ));
            }
        }
        let output = PathBuf::from(get("output").unwrap_or("results"));
        let workers: Option<usize> = get("workers").map(|v| num("workers", v)).transpose()?;
        if workers == Some(0) {
            return Err(Error::parse("workers", "must be at least 1"));
        }
        let mc_pairs: usize = get("mc_pairs")
            .map(|v| num("mc_pairs", v))
            .transpose()?
            .unwrap_or(crate::measure::DEFAULT_MC_PAIRS);
        if mc_pairs < 2 {
            return Err(Error::parse("mc_pairs", "must be at least 2"));
        }
        let merge_centers = get("merge_centers")
            .map(|v| bool_value("merge_centers", v))
            .transpose()?
            .unwrap_or(false);
        let t_min: usize = get("t_min")
            .map(|v| num("t_min", v))
            .transpose()?
            .unwrap_or(DEFAULT_T_MIN);

        Ok(ExperimentConfig {
            entries,
            kernel,
            dim,
            measure,
            target,
            norm_target,
            modes,
            engine,
            horizons,
            theta,
            mu,
            kappa,
            radius,
            eta,
            seed,
            n_trials,
            delta,
            beta,
            record,
            output,
            workers,
            mc_pairs,
            merge_centers,
            max_t,
            t_min,
        })
    }

    pub fn max_horizon(&self) -> usize {
        *self.horizons.last().expect("validated nonempty")
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self.theta, self.mu)
    }

    pub fn eta_rule(&self) -> Result<EtaRule> {
        Ok(match self.eta {
            EtaSpec::Lipschitz => EtaRule::Lipschitz,
            EtaSpec::RadiusSquared => EtaRule::RadiusSquared,
            EtaSpec::Schedule => EtaRule::Schedule(self.schedule()?),
            EtaSpec::Value(v) => EtaRule::Value(v),
        })
    }

    /// Sorted, deduplicated hypothesis indices to record.
    pub fn record_indices(&self) -> Vec<usize> {
        let t_max = self.max_horizon();
        let mut out: Vec<usize> = self.horizons.iter().map(|t| t + 1).collect();
        match &self.record {
            RecordSpec::Horizons => {}
            RecordSpec::Log2 => {
                let mut p = 2;
                while p <= t_max + 1 {
                    out.push(p);
                    p *= 2;
                }
            }
            RecordSpec::List(l) => out.extend(l.iter().copied()),
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// SHA-256 over the sorted `key=value` lines of the effective entries.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Returns a copy with the base seed replaced (recorded in the entries).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.entries.insert("seed".into(), seed.to_string());
        self
    }
}
