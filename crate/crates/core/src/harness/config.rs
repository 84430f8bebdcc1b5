//! Line-oriented `key = value` experiment configuration.
//!
//! ```text
//! # Curie-Weiss, Glauber random scan, total magnetization
//! model = curie_weiss
//! n_sites = 10
//! beta = 0.5
//! kernel = glauber_random_scan
//! observable = magnetization
//! c = 10
//! n = 100000
//! runs = 10000
//! gap_source = analytic
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors. See [`KEYS`] for the full list.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::bounds::Formula;
use crate::spin::{Family, UpdateScheme};
use crate::{Error, Result};

/// Every accepted key with a short description.
pub const KEYS: &[(&str, &str)] = &[
    ("model", "curie_weiss | ising_1d | ising_2d | dag"),
    ("n_sites", "number of spins (perfect square for ising_2d)"),
    ("beta", "inverse temperature"),
    ("h", "external field (default 0)"),
    (
        "kernel",
        "glauber_random_scan | glauber_systematic_scan | metropolis (spin models)",
    ),
    ("dataset", "CSV of 0/1 rows (dag); relative to the config file"),
    (
        "dataset_header",
        "true if the dataset has a header line (default false)",
    ),
    (
        "equivalent_sample_size",
        "prior equivalent sample size S (dag, default 4)",
    ),
    (
        "observable",
        "magnetization | sign_magnetization | edge:I-J (1-based nodes)",
    ),
    (
        "gap_observables",
        "extra comma-separated observables for the minimum-gap estimate",
    ),
    ("n", "chain length N of each evaluation run"),
    ("runs", "number of independent evaluation runs (default 10000)"),
    ("seed", "base seed (default 0)"),
    ("estimation_n", "length of the estimation run (default 1000000)"),
    ("estimation_t0", "estimation burn-in override"),
    ("estimation_k", "autocovariance window override"),
    (
        "sigma2",
        "known asymptotic variance; with v_f and analytic gaps skips estimation",
    ),
    ("v_f", "known stationary variance"),
    ("c", "bound C on |f - E f|"),
    ("gap_source", "analytic | estimated (default estimated)"),
    (
        "formulas",
        "comma-separated subset of chebyshev, bernstein, bernstein_one_sided, normal",
    ),
    ("delta", "confidence level for dag-posterior intervals (default 0.05)"),
    ("grid_points", "number of t grid points (default 200)"),
    (
        "grid_half_width",
        "half-width of the t grid (default 6 sigma / sqrt(N - t0))",
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Spin {
        family: Family,
        n_sites: usize,
        beta: f64,
        h: f64,
    },
    Dag {
        dataset: PathBuf,
        has_header: bool,
        equivalent_sample_size: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Magnetization,
    SignMagnetization,
    /// Edge indicator with 0-based endpoints.
    Edge {
        from: usize,
        to: usize,
    },
}

impl Observable {
    fn parse(text: &str) -> Result<Self> {
        match text {
            "magnetization" => Ok(Observable::Magnetization),
            "sign_magnetization" => Ok(Observable::SignMagnetization),
            _ => {
                let spec = text
                    .strip_prefix("edge:")
                    .ok_or_else(|| Error::config(format!("unknown observable {text:?}")))?;
                let (a, b) = spec
                    .split_once('-')
                    .ok_or_else(|| Error::config(format!("edge observable {text:?} is not edge:I-J")))?;
                let parse_node = |s: &str| -> Result<usize> {
                    match s.trim().parse::<usize>() {
                        Ok(v) if v >= 1 => Ok(v - 1),
                        _ => Err(Error::config(format!("bad node {s:?} in {text:?} (nodes are 1-based)"))),
                    }
                };
                let (from, to) = (parse_node(a)?, parse_node(b)?);
                if from == to {
                    return Err(Error::config(format!("edge observable {text:?} is a self-loop")));
                }
                Ok(Observable::Edge { from, to })
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Observable::Magnetization => "magnetization".into(),
            Observable::SignMagnetization => "sign_magnetization".into(),
            Observable::Edge { from, to } => format!("edge:{}-{}", from + 1, to + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapSource {
    Analytic,
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationBlock {
    pub n_hat: usize,
    pub t0_hat: Option<usize>,
    pub k: Option<usize>,
    pub sigma2: Option<f64>,
    pub v_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundBlock {
    pub c: f64,
    pub formulas: Vec<Formula>,
    pub gap_source: GapSource,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// `None` for DAG models, which have a single kernel.
    pub kernel: Option<UpdateScheme>,
    pub observable: Observable,
    pub gap_observables: Vec<Observable>,
    pub n: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub estimation: EstimationBlock,
    pub bound: BoundBlock,
    pub grid: GridSpec,
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::CurieWeiss => "curie_weiss",
        Family::Ising1D => "ising_1d",
        Family::Ising2D => "ising_2d",
    }
}

fn scheme_name(s: UpdateScheme) -> &'static str {
    match s {
        UpdateScheme::GlauberRandomScan => "glauber_random_scan",
        UpdateScheme::GlauberSystematicScan => "glauber_systematic_scan",
        UpdateScheme::MetropolisSpinFlip => "metropolis",
    }
}

/// Parse `key = value` lines into a map, rejecting unknown and repeated keys.
pub fn parse_key_values<'a>(text: &'a str, allowed: &[&str]) -> Result<BTreeMap<&'a str, &'a str>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key = value", no + 1)))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(Error::config(format!("line {}: unknown key {key:?}", no + 1)));
        }
        if map.insert(key, value.trim()).is_some() {
            return Err(Error::config(format!("line {}: duplicate key {key:?}", no + 1)));
        }
    }
    Ok(map)
}

pub(crate) struct Fields<'a>(pub BTreeMap<&'a str, &'a str>);

impl Fields<'_> {
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).copied()
    }

    pub fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::config(format!("bad value {v:?} for {key:?}")))
            })
            .transpose()
    }

    pub fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.opt(key)?
            .ok_or_else(|| Error::config(format!("missing required key {key:?}")))
    }

    pub fn positive(&self, key: &str, default: Option<usize>) -> Result<usize> {
        let v = match default {
            Some(d) => self.opt(key)?.unwrap_or(d),
            None => self.req(key)?,
        };
        if v == 0 {
            return Err(Error::config(format!("{key:?} must be positive")));
        }
        Ok(v)
    }
}

impl ExperimentConfig {
    /// Parse configuration text. Relative dataset paths stay relative.
    pub fn parse(text: &str) -> Result<Self> {
        let keys: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
        let f = Fields(parse_key_values(text, &keys)?);

        let model_name: String = f.req("model")?;
        let (model, kernel) = if model_name == "dag" {
            for key in ["n_sites", "beta", "h", "kernel"] {
                if f.raw(key).is_some() {
                    return Err(Error::config(format!("{key:?} does not apply to dag models")));
                }
            }
            let s: f64 = f.opt("equivalent_sample_size")?.unwrap_or(4.0);
            if !(s > 0.0) {
                return Err(Error::config("equivalent_sample_size must be positive"));
            }
            (
                ModelSpec::Dag {
                    dataset: PathBuf::from(f.req::<String>("dataset")?),
                    has_header: f.opt("dataset_header")?.unwrap_or(false),
                    equivalent_sample_size: s,
                },
                None,
            )
        } else {
            let family = match model_name.as_str() {
                "curie_weiss" => Family::CurieWeiss,
                "ising_1d" => Family::Ising1D,
                "ising_2d" => Family::Ising2D,
                other => return Err(Error::config(format!("unknown model {other:?}"))),
            };
            for key in ["dataset", "dataset_header", "equivalent_sample_size"] {
                if f.raw(key).is_some() {
                    return Err(Error::config(format!("{key:?} only applies to dag models")));
                }
            }
            let kernel = match f.req::<String>("kernel")?.as_str() {
                "glauber_random_scan" => UpdateScheme::GlauberRandomScan,
                "glauber_systematic_scan" => UpdateScheme::GlauberSystematicScan,
                "metropolis" => UpdateScheme::MetropolisSpinFlip,
                other => return Err(Error::config(format!("unknown kernel {other:?}"))),
            };
            let beta: f64 = f.req("beta")?;
            let h: f64 = f.opt("h")?.unwrap_or(0.0);
            if !beta.is_finite() || !h.is_finite() {
                return Err(Error::config("beta and h must be finite"));
            }
            (
                ModelSpec::Spin {
                    family,
                    n_sites: f.positive("n_sites", None)?,
                    beta,
                    h,
                },
                Some(kernel),
            )
        };

        let observable = Observable::parse(&f.req::<String>("observable")?)?;
        let gap_observables = match f.raw("gap_observables") {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|s| Observable::parse(s.trim()))
                .collect::<Result<_>>()?,
        };
        for obs in std::iter::once(&observable).chain(&gap_observables) {
            let is_edge = matches!(obs, Observable::Edge { .. });
            if is_edge != matches!(model, ModelSpec::Dag { .. }) {
                return Err(Error::config(format!(
                    "observable {} does not fit model {model_name}",
                    obs.name()
                )));
            }
        }

        let formulas = match f.raw("formulas") {
            None => Formula::ALL.to_vec(),
            Some(list) => {
                let mut out = Vec::new();
                for name in list.split(',').map(str::trim) {
                    let formula = Formula::from_name(name).map_err(|e| Error::config(e.to_string()))?;
                    if !out.contains(&formula) {
                        out.push(formula);
                    }
                }
                out
            }
        };
        let gap_source = match f.opt::<String>("gap_source")?.as_deref() {
            None | Some("estimated") => GapSource::Estimated,
            Some("analytic") => GapSource::Analytic,
            Some(other) => return Err(Error::config(format!("unknown gap_source {other:?}"))),
        };
        let c: f64 = f.req("c")?;
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::config("c must be positive and finite"));
        }
        let delta: f64 = f.opt("delta")?.unwrap_or(0.05);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config("delta must lie in (0, 1)"));
        }
        let sigma2: Option<f64> = f.opt("sigma2")?;
        let v_f: Option<f64> = f.opt("v_f")?;
        if sigma2.is_some_and(|s| !(s > 0.0)) || v_f.is_some_and(|v| !(v >= 0.0)) {
            return Err(Error::config("sigma2 must be positive and v_f non-negative"));
        }
        let half_width: Option<f64> = f.opt("grid_half_width")?;
        if half_width.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::config("grid_half_width must be positive"));
        }
        let t0_hat: Option<usize> = f.opt("estimation_t0")?;
        let k: Option<usize> = f.opt("estimation_k")?;
        if k == Some(0) {
            return Err(Error::config("estimation_k must be positive"));
        }

        let cfg = ExperimentConfig {
            model,
            kernel,
            observable,
            gap_observables,
            n: f.positive("n", None)?,
            runs: f.positive("runs", Some(10_000))?,
            base_seed: f.opt("seed")?.unwrap_or(0),
            estimation: EstimationBlock {
                n_hat: f.positive("estimation_n", Some(1_000_000))?,
                t0_hat,
                k,
                sigma2,
                v_f,
            },
            bound: BoundBlock {
                c,
                formulas,
                gap_source,
                delta,
            },
            grid: GridSpec {
                points: f.positive("grid_points", Some(200))?,
                half_width,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file; a relative dataset path is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&fs::read_to_string(path)?)?;
        if let ModelSpec::Dag { dataset, .. } = &mut cfg.model {
            if dataset.is_relative() {
                if let Some(dir) = path.parent() {
                    *dataset = dir.join(&*dataset);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bound.gap_source == GapSource::Analytic && self.analytic_available().is_none() {
            return Err(Error::config(
                "gap_source = analytic needs curie_weiss with glauber_random_scan, \
                 or ising_1d with a Glauber kernel",
            ));
        }
        Ok(())
    }

    /// Family and scheme when closed-form gap approximations exist.
    pub fn analytic_available(&self) -> Option<(Family, UpdateScheme)> {
        match (&self.model, self.kernel) {
            (
                ModelSpec::Spin {
                    family: Family::CurieWeiss,
                    ..
                },
                Some(UpdateScheme::GlauberRandomScan),
            ) => Some((Family::CurieWeiss, UpdateScheme::GlauberRandomScan)),
            (
                ModelSpec::Spin {
                    family: Family::Ising1D,
                    ..
                },
                Some(s @ (UpdateScheme::GlauberRandomScan | UpdateScheme::GlauberSystematicScan)),
            ) => Some((Family::Ising1D, s)),
            _ => None,
        }
    }

    /// Every field with defaults resolved, one `key = value` per line in the
    /// order of [`KEYS`]. Parsing the result gives back an equal config.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.model {
            ModelSpec::Spin {
                family,
                n_sites,
                beta,
                h,
            } => {
                put("model", family_name(*family).into());
                put("n_sites", n_sites.to_string());
                put("beta", beta.to_string());
                put("h", h.to_string());
                put(
                    "kernel",
                    scheme_name(self.kernel.expect("spin models have a kernel")).into(),
                );
            }
            ModelSpec::Dag {
                dataset,
                has_header,
                equivalent_sample_size,
            } => {
                put("model", "dag".into());
                put("dataset", dataset.display().to_string());
                put("dataset_header", has_header.to_string());
                put("equivalent_sample_size", equivalent_sample_size.to_string());
            }
        }
        put("observable", self.observable.name());
        if !self.gap_observables.is_empty() {
            let names: Vec<String> = self.gap_observables.iter().map(Observable::name).collect();
            put("gap_observables", names.join(","));
        }
        put("n", self.n.to_string());
        put("runs", self.runs.to_string());
        put("seed", self.base_seed.to_string());
        put("estimation_n", self.estimation.n_hat.to_string());
        if let Some(t0) = self.estimation.t0_hat {
            put("estimation_t0", t0.to_string());
        }
        if let Some(k) = self.estimation.k {
            put("estimation_k", k.to_string());
        }
        if let Some(s) = self.estimation.sigma2 {
            put("sigma2", s.to_string());
        }
        if let Some(v) = self.estimation.v_f {
            put("v_f", v.to_string());
        }
        put("c", self.bound.c.to_string());
        put(
            "gap_source",
            match self.bound.gap_source {
                GapSource::Analytic => "analytic",
                GapSource::Estimated => "estimated",
            }
            .into(),
        );
        let names: Vec<&str> = self.bound.formulas.iter().map(|f| f.name()).collect();
        put("formulas", names.join(","));
        put("delta", self.bound.delta.to_string());
        put("grid_points", self.grid.points.to_string());
        if let Some(w) = self.grid.half_width {
            put("grid_half_width", w.to_string());
        }
        out
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
