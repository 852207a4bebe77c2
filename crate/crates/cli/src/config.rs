//! Flat `key = value` run configuration.
//!
//! Sources are merged in order (config file, `--model`, dedicated flags,
//! `--set`), later sources overriding earlier ones, and then validated once.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gibbsbound::oracle::BinRule;
use gibbsbound::search::{GammaGrid, WGrid};
use gibbsbound::{build_drift_tightest, ModelSpec, SearchGrids};

/// Keys accepted in config files and `--set`.
pub const KNOWN_KEYS: &[&str] = &[
    "family",
    "nu",
    "sigma2",
    "tau2",
    "n",
    "alpha",
    "beta",
    "x0",
    "omega",
    "seed",
    "out",
    "format",
    "lmax",
    "r",
    "gamma",
    "w",
    "epsilon",
    "epsilon_scale",
    "grid_r",
    "grid_gamma",
    "grid_w",
    "samples",
    "replicates",
    "length",
    "tv_steps",
    "bins",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }
}

/// Raw key/value pairs before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize_key(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            bail!("unknown config key '{key}'");
        }
        self.0.insert(key, value.into().trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{raw}'", lineno + 1))?;
            map.set(k.trim(), v).with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_text(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// `--model` argument: a preset name, a config file, or inline
    /// `key=value,key=value`.
    pub fn from_model_arg(arg: &str) -> Result<Self> {
        let mut map = Self::new();
        match arg.trim() {
            "worked" => {
                map.set("family", "gaussian")?;
                map.set("nu", "0")?;
                map.set("sigma2", "0.25")?;
                map.set("tau2", "0.25")?;
                return Ok(map);
            }
            s if Path::new(s).is_file() => return Self::from_file(Path::new(s)),
            _ => {}
        }
        for part in arg.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("--model expects key=value pairs, a config file or 'worked'; got '{part}'"))?;
            map.set(k.trim(), v)?;
        }
        Ok(map)
    }

    /// A `--set key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got '{assignment}'"))?;
        self.set(k.trim(), v)
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Validated settings shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub x0: f64,
    pub omega: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub lmax: u64,
    pub r: f64,
    /// `None` means the tightest rate `ch`.
    pub gamma: Option<f64>,
    pub w: f64,
    pub epsilon: Option<f64>,
    pub epsilon_scale: f64,
    /// Explicit search grids; `None` runs the default coarse-then-refine search.
    pub grids: Option<SearchGrids>,
    pub samples: usize,
    pub replicates: usize,
    pub length: usize,
    pub tv_steps: u64,
    pub bins: BinRule,
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let model = parse_model(map)?;
        let x0 = num(map, "x0")?.unwrap_or(0.0);
        model.check_support(x0).context("x0")?;
        let omega = num(map, "omega")?.unwrap_or(0.01);
        if !(omega > 0.0 && omega < 1.0) {
            bail!("omega must lie in (0, 1), got {omega}");
        }
        let format = match map.get("format").unwrap_or("csv") {
            "csv" => OutputFormat::Csv,
            "jsonl" | "json-lines" | "json_lines" => OutputFormat::JsonLines,
            other => bail!("format must be csv or jsonl, got '{other}'"),
        };
        let lmax = int(map, "lmax")?.unwrap_or(200);
        if lmax == 0 {
            bail!("lmax must be at least 1");
        }
        let r = num(map, "r")?.unwrap_or(0.1895820);
        if !(r > 0.0 && r < 1.0) {
            bail!("r must lie in (0, 1), got {r}");
        }
        let gamma = num(map, "gamma")?;
        let w = num(map, "w")?.unwrap_or(2.203030);
        if !(w > 0.0 && w.is_finite()) {
            bail!("w must be positive, got {w}");
        }
        let epsilon = num(map, "epsilon")?;
        if let Some(e) = epsilon {
            if !(e > 0.0 && e <= 1.0) {
                bail!("epsilon must lie in (0, 1], got {e}");
            }
        }
        let epsilon_scale = num(map, "epsilon_scale")?.unwrap_or(1.0);
        if !(epsilon_scale > 0.0 && epsilon_scale.is_finite()) {
            bail!("epsilon_scale must be positive, got {epsilon_scale}");
        }
        let grids = parse_grids(map, &model)?;
        let bins = match map.get("bins").unwrap_or("fd") {
            "fd" | "freedman_diaconis" => BinRule::FreedmanDiaconis,
            "sturges" => BinRule::Sturges,
            other => BinRule::Count {
                bins: other
                    .parse()
                    .map_err(|_| anyhow!("bins must be fd, sturges or a count, got '{other}'"))?,
            },
        };
        Ok(Self {
            model,
            x0,
            omega,
            seed: int(map, "seed")?.unwrap_or(20_240_601),
            out: PathBuf::from(map.get("out").unwrap_or("out")),
            format,
            lmax,
            r,
            gamma,
            w,
            epsilon,
            epsilon_scale,
            grids,
            samples: count(map, "samples", 100_000, 1_000)?,
            replicates: count(map, "replicates", 10_000, 1)?,
            length: count(map, "length", 10_000, 1)?,
            tv_steps: int(map, "tv_steps")?.unwrap_or(10),
            bins,
        })
    }
}

fn num(map: &ConfigMap, key: &str) -> Result<Option<f64>> {
    map.get(key)
        .map(|v| {
            let x: f64 = v.parse().map_err(|_| anyhow!("{key} must be a number, got '{v}'"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(anyhow!("{key} must be finite, got '{v}'"))
            }
        })
        .transpose()
}

fn int(map: &ConfigMap, key: &str) -> Result<Option<u64>> {
    map.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| anyhow!("{key} must be a nonnegative integer, got '{v}'"))
        })
        .transpose()
}

fn count(map: &ConfigMap, key: &str, default: usize, min: usize) -> Result<usize> {
    let value = int(map, key)?.map_or(default, |v| v as usize);
    if value < min {
        bail!("{key} must be at least {min}, got {value}");
    }
    Ok(value)
}

fn require(map: &ConfigMap, key: &str, family: &str) -> Result<f64> {
    num(map, key)?.ok_or_else(|| anyhow!("the {family} family needs '{key}'"))
}

fn parse_model(map: &ConfigMap) -> Result<ModelSpec> {
    let family: gibbsbound::Family = map
        .get("family")
        .ok_or_else(|| anyhow!("no model given: set 'family' (gaussian, beta_binomial or poisson_gamma)"))?
        .parse()?;
    let spec = match family {
        gibbsbound::Family::Gaussian => ModelSpec::gaussian(
            num(map, "nu")?.unwrap_or(0.0),
            require(map, "sigma2", "gaussian")?,
            require(map, "tau2", "gaussian")?,
        ),
        gibbsbound::Family::BetaBinomial => {
            let n = int(map, "n")?.ok_or_else(|| anyhow!("the beta_binomial family needs 'n'"))?;
            let n = u32::try_from(n).map_err(|_| anyhow!("n = {n} is too large"))?;
            ModelSpec::beta_binomial(
                n,
                require(map, "alpha", "beta_binomial")?,
                require(map, "beta", "beta_binomial")?,
            )
        }
        gibbsbound::Family::PoissonGamma => ModelSpec::poisson_gamma(
            require(map, "alpha", "poisson_gamma")?,
            require(map, "beta", "poisson_gamma")?,
        ),
    };
    Ok(spec?)
}

/// Grid syntax: `a,b,c` (explicit values), `lin:lo:hi:n` or `log:lo:hi:n`.
/// For γ, `ch:n` is the default family `ch + i(1 − ch)/n`; for `w`,
/// `above:upper:n` is `n` log-spaced points above `2L/(1 − γ)`.
pub fn parse_grid_values(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let range = |parts: &[&str]| -> Result<(f64, f64, usize)> {
        if parts.len() != 3 {
            bail!("range grid needs lo:hi:n, got '{spec}'");
        }
        let lo: f64 = parts[0].parse().map_err(|_| anyhow!("bad grid bound '{}'", parts[0]))?;
        let hi: f64 = parts[1].parse().map_err(|_| anyhow!("bad grid bound '{}'", parts[1]))?;
        let n: usize = parts[2].parse().map_err(|_| anyhow!("bad grid size '{}'", parts[2]))?;
        Ok((lo, hi, n))
    };
    match parts[0] {
        "lin" => {
            let (lo, hi, n) = range(&parts[1..])?;
            Ok(gibbsbound::minorization::linspace(lo, hi, n))
        }
        "log" => {
            let (lo, hi, n) = range(&parts[1..])?;
            if !(lo > 0.0 && hi > 0.0) {
                bail!("log grid needs positive bounds, got '{spec}'");
            }
            Ok(gibbsbound::minorization::linspace(lo.ln(), hi.ln(), n)
                .into_iter()
                .map(f64::exp)
                .collect())
        }
        _ if spec.is_empty() || spec == "none" => Ok(Vec::new()),
        _ => spec
            .split([',', ' '])
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| anyhow!("bad grid value '{s}'")))
            .collect(),
    }
}

fn parse_grids(map: &ConfigMap, model: &ModelSpec) -> Result<Option<SearchGrids>> {
    let (gr, gg, gw) = (map.get("grid_r"), map.get("grid_gamma"), map.get("grid_w"));
    if gr.is_none() && gg.is_none() && gw.is_none() {
        return Ok(None);
    }
    let mut grids = SearchGrids::default_coarse();
    if let Some(spec) = gr {
        grids.r = parse_grid_values(spec).context("grid_r")?;
    }
    if let Some(spec) = gg {
        grids.gamma = match spec.trim().strip_prefix("ch:") {
            Some(n) => GammaGrid::FromContraction {
                points: n.parse().map_err(|_| anyhow!("grid_gamma ch:n needs an integer n"))?,
            },
            None => GammaGrid::Values {
                values: parse_grid_values(spec).context("grid_gamma")?,
            },
        };
    }
    if let Some(spec) = gw {
        grids.w = match spec.trim().strip_prefix("above:") {
            Some(rest) => {
                let (upper, n) = rest
                    .split_once(':')
                    .ok_or_else(|| anyhow!("grid_w above:upper:n needs both fields"))?;
                WGrid::LogAboveThreshold {
                    upper: upper.parse().map_err(|_| anyhow!("bad grid_w upper '{upper}'"))?,
                    points: n.parse().map_err(|_| anyhow!("bad grid_w size '{n}'"))?,
                }
            }
            None => WGrid::Values {
                values: parse_grid_values(spec).context("grid_w")?,
            },
        };
    }
    check_grids(&grids, model)?;
    Ok(Some(grids))
}

/// Parse-time checks on explicit grid values; infeasible `w` cells are left to
/// the search, which skips them.
fn check_grids(grids: &SearchGrids, model: &ModelSpec) -> Result<()> {
    if let Some(r) = grids.r.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        bail!("grid_r value {r} is outside (0, 1)");
    }
    if let GammaGrid::Values { values } = &grids.gamma {
        let ch = model.moments()?.contraction();
        if let Some(g) = values.iter().find(|&&g| !(g >= ch && g < 1.0)) {
            bail!("grid_gamma value {g} is outside [ch, 1) = [{ch}, 1)");
        }
    }
    if let WGrid::Values { values } = &grids.w {
        if let Some(w) = values.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            bail!("grid_w value {w} must be positive");
        }
    }
    build_drift_tightest(&model.moments()?)?;
    Ok(())
}
