//! Trace-based estimates of the quantities the bounds depend on.
//!
//! All functions take the raw values `f(X_1), …, f(X_N̂)` of one estimation
//! run as a slice (index 0 holds `f(X_1)`) and a burn-in `t̂₀` that is
//! discarded before estimating.
//!
//! Internally the values are centred at their window mean before any sum is
//! formed. Every estimator here is exactly invariant under adding a constant,
//! so centring changes nothing mathematically but keeps the sums small.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::numeric::integer_cbrt;
use crate::numeric::{dot, mean, CompensatedSum};
use crate::{Error, Result};

/// Default `(t̂₀, k)`: `t̂₀ = ⌊0.1 N̂⌋` and `k = 10 ⌊N̂^{1/3}⌋`.
pub fn default_policy(n_hat: usize) -> Result<(usize, usize)> {
    let t0 = n_hat / 10;
    let k = 10 * integer_cbrt(n_hat as u64) as usize;
    if k == 0 || k + 1 > n_hat - t0 {
        return Err(Error::invalid(format!(
            "default window k = {k} does not fit an estimation run of length {n_hat} \
             (need 1 <= k <= N̂ - t̂₀ - 1 = {})",
            (n_hat - t0).saturating_sub(1)
        )));
    }
    Ok((t0, k))
}

fn window(values: &[f64], t0_hat: usize) -> Result<&[f64]> {
    if t0_hat >= values.len() {
        return Err(Error::invalid(format!(
            "burn-in {t0_hat} leaves nothing of a trace of length {}",
            values.len()
        )));
    }
    Ok(&values[t0_hat..])
}

fn centred(w: &[f64]) -> Vec<f64> {
    let pivot = mean(w);
    w.iter().map(|x| x - pivot).collect()
}

/// `V̂_f`: mean of squares minus squared mean over `t̂₀+1..N̂`.
pub fn variance_hat(values: &[f64], t0_hat: usize) -> Result<f64> {
    let w = window(values, t0_hat)?;
    if w.len() < 2 {
        return Err(Error::invalid("variance estimate needs N̂ - t̂₀ >= 2"));
    }
    let y = centred(w);
    let n = y.len() as f64;
    let m = mean(&y);
    Ok((dot(&y, &y) / n - m * m).max(0.0))
}

/// Lag-`i` autocovariances `γ̂_0..=γ̂_k` of an already centred window.
///
/// The product sum runs over `j = t̂₀+1..N̂−k` for every lag; the two centring
/// means run over that range and over the same range shifted by `i`.
fn autocovariances(y: &[f64], k: usize) -> Vec<f64> {
    let n_w = y.len() - k;
    let len = n_w as f64;
    // prefix[j] = y[0] + … + y[j-1]
    let mut prefix = Vec::with_capacity(y.len() + 1);
    let mut acc = CompensatedSum::new();
    prefix.push(0.0);
    for &v in y {
        acc.add(v);
        prefix.push(acc.value());
    }
    let head = &y[..n_w];
    let m1 = prefix[n_w] / len;
    (0..=k)
        .map(|i| {
            let m2 = (prefix[i + n_w] - prefix[i]) / len;
            dot(head, &y[i..i + n_w]) / len - 0.5 * m1 * m1 - 0.5 * m2 * m2
        })
        .collect()
}

/// `γ̂_i` for window `k` and `0 <= i <= k`.
pub fn autocov_hat(values: &[f64], t0_hat: usize, k: usize, i: usize) -> Result<f64> {
    if i > k {
        return Err(Error::invalid(format!("lag {i} exceeds window k = {k}")));
    }
    let w = window(values, t0_hat)?;
    if w.len() < k + 2 {
        return Err(Error::invalid("autocovariance needs N̂ - t̂₀ - k >= 2"));
    }
    let y = centred(w);
    let n_w = y.len() - k;
    let len = n_w as f64;
    let m1 = mean(&y[..n_w]);
    let m2 = mean(&y[i..i + n_w]);
    Ok(dot(&y[..n_w], &y[i..i + n_w]) / len - 0.5 * m1 * m1 - 0.5 * m2 * m2)
}

/// `σ̂²(k) = (γ̂_0 + 2 Σ_{i=1..k} γ̂_i) · (N̂−t̂₀+k+1)/(N̂−t̂₀−k)`.
///
/// Can be negative for short or pathological traces; the value is returned
/// as computed and [`gamma_hat`] rejects it.
pub fn sigma2_hat(values: &[f64], t0_hat: usize, k: usize) -> Result<f64> {
    let w = window(values, t0_hat)?;
    let n = w.len();
    if k == 0 || k + 1 > n {
        return Err(Error::invalid(format!(
            "window k = {k} outside 1..={} for N̂ - t̂₀ = {n}",
            n.saturating_sub(1)
        )));
    }
    let gammas = autocovariances(&centred(w), k);
    let mut s = CompensatedSum::new();
    s.add(gammas[0]);
    for g in &gammas[1..] {
        s.add(2.0 * g);
    }
    Ok(s.value() * (n + k + 1) as f64 / (n - k) as f64)
}

/// Gap estimate from `(V̂_f, σ̂²)` pairs of one or more observables:
/// `min 2V̂/σ̂²` for reversible chains, `min 4V̂/σ̂²` (the pseudo spectral gap)
/// otherwise, clamped to at most 1.
pub fn gamma_hat(pairs: &[(f64, f64)], reversible: bool) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("gap estimate needs at least one observable"));
    }
    let factor = if reversible { 2.0 } else { 4.0 };
    let mut best = f64::INFINITY;
    for (idx, &(v, s2)) in pairs.iter().enumerate() {
        if !(s2 > 0.0) {
            return Err(Error::EstimationFailure(format!(
                "asymptotic variance estimate {s2} of observable {idx} is not positive; \
                 increase the estimation run length N̂"
            )));
        }
        let ratio = factor * v / s2;
        if !(ratio > 0.0) {
            return Err(Error::EstimationFailure(format!(
                "variance estimate of observable {idx} is zero; \
                 increase the estimation run length N̂"
            )));
        }
        best = best.min(ratio);
    }
    Ok(best.min(1.0))
}

/// `t̂_mix = 1/γ̂` (reversible) or `2/γ̂_ps` (non-reversible).
pub fn tmix_hat(gamma_hat: f64, reversible: bool) -> Result<f64> {
    if !(gamma_hat > 0.0) || gamma_hat > 1.0 {
        return Err(Error::invalid(format!("gap estimate {gamma_hat} outside (0, 1]")));
    }
    Ok(if reversible { 1.0 } else { 2.0 } / gamma_hat)
}

/// All estimates for one observable of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub v_hat: f64,
    pub sigma2_hat: f64,
    pub k: usize,
    pub n_hat: usize,
    pub t0_hat: usize,
    /// `γ̂` for reversible chains, `γ̂_ps` otherwise. When several observables
    /// were estimated together this is their common minimum.
    pub gamma_hat: f64,
    pub tmix_hat: f64,
    pub reversible: bool,
    /// Uniform bound on `|f − E_π f|`, supplied by the caller.
    pub c_bound: f64,
}

const RECORD_KEYS: [&str; 9] = [
    "v_hat",
    "sigma2_hat",
    "k",
    "n_hat",
    "t0_hat",
    "gamma_hat",
    "tmix_hat",
    "reversible",
    "c_bound",
];

impl EstimatorReport {
    /// Estimate from one trace. `window` overrides the default `(t̂₀, k)`.
    pub fn from_values(values: &[f64], reversible: bool, c_bound: f64, window: Option<(usize, usize)>) -> Result<Self> {
        let mut reports = estimate_many(&[values], reversible, c_bound, window)?;
        Ok(reports.remove(0))
    }

    /// Flat `key=value` record, one pair per line, fixed key order.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        for key in RECORD_KEYS {
            let value = match key {
                "v_hat" => self.v_hat.to_string(),
                "sigma2_hat" => self.sigma2_hat.to_string(),
                "k" => self.k.to_string(),
                "n_hat" => self.n_hat.to_string(),
                "t0_hat" => self.t0_hat.to_string(),
                "gamma_hat" => self.gamma_hat.to_string(),
                "tmix_hat" => self.tmix_hat.to_string(),
                "reversible" => self.reversible.to_string(),
                _ => self.c_bound.to_string(),
            };
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }

    /// Inverse of [`to_record`](Self::to_record). Blank lines and `#`
    /// comments are ignored; extra keys are an error.
    pub fn parse_record(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("record line {line:?} has no '='")))?;
            let key = key.trim();
            if !RECORD_KEYS.contains(&key) {
                return Err(Error::config(format!("unknown record key {key:?}")));
            }
            if fields.insert(key, value.trim()).is_some() {
                return Err(Error::config(format!("duplicate record key {key:?}")));
            }
        }
        fn get<T: std::str::FromStr>(fields: &BTreeMap<&str, &str>, key: &str) -> Result<T> {
            let raw = fields
                .get(key)
                .ok_or_else(|| Error::config(format!("record is missing {key:?}")))?;
            raw.parse()
                .map_err(|_| Error::config(format!("bad value {raw:?} for {key:?}")))
        }
        Ok(Self {
            v_hat: get(&fields, "v_hat")?,
            sigma2_hat: get(&fields, "sigma2_hat")?,
            k: get(&fields, "k")?,
            n_hat: get(&fields, "n_hat")?,
            t0_hat: get(&fields, "t0_hat")?,
            gamma_hat: get(&fields, "gamma_hat")?,
            tmix_hat: get(&fields, "tmix_hat")?,
            reversible: get(&fields, "reversible")?,
            c_bound: get(&fields, "c_bound")?,
        })
    }
}

/// Estimate several observables of the same run. The gap and mixing time
/// are the minimum over observables and shared by every returned report.
pub fn estimate_many(
    traces: &[&[f64]],
    reversible: bool,
    c_bound: f64,
    window: Option<(usize, usize)>,
) -> Result<Vec<EstimatorReport>> {
    let n_hat = traces
        .first()
        .ok_or_else(|| Error::invalid("no traces to estimate from"))?
        .len();
    if traces.iter().any(|t| t.len() != n_hat) {
        return Err(Error::invalid("traces of one estimation run must have equal length"));
    }
    if !(c_bound > 0.0) {
        return Err(Error::invalid(format!("bound C must be positive, got {c_bound}")));
    }
    let (t0_hat, k) = match window {
        Some(w) => w,
        None => default_policy(n_hat)?,
    };
    let pairs: Vec<(f64, f64)> = traces
        .iter()
        .map(|t| Ok((variance_hat(t, t0_hat)?, sigma2_hat(t, t0_hat, k)?)))
        .collect::<Result<_>>()?;
    let gamma = gamma_hat(&pairs, reversible)?;
    let tmix = tmix_hat(gamma, reversible)?;
    Ok(pairs
        .into_iter()
        .map(|(v_hat, sigma2_hat)| EstimatorReport {
            v_hat,
            sigma2_hat,
            k,
            n_hat,
            t0_hat,
            gamma_hat: gamma,
            tmix_hat: tmix,
            reversible,
            c_bound,
        })
        .collect())
}
