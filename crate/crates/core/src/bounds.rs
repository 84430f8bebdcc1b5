//! Closed-form tail bounds for MCMC averages and for the estimators.
//!
//! All probability bounds are capped at 1. Tail bounds are also available on
//! the log scale, where they stay finite far beyond `f64` underflow.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use crate::numeric::ln_normal_upper_tail;
use crate::{Error, Result};

/// Parameters shared by the Chebyshev and Bernstein bounds.
///
/// `gamma` is the spectral gap for reversible chains and the pseudo spectral
/// gap otherwise. With `n_chains = m > 1` the bounds describe the average of
/// `m` independent runs: `N − t₀` becomes `m(N − t₀)` and `E(t₀)` becomes
/// `m·E(t₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub v_f: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub tmix: f64,
    pub c: f64,
    pub n: usize,
    pub t0: usize,
    pub e_t0: f64,
    pub reversible: bool,
    pub n_chains: usize,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(what.to_string()))
            }
        };
        check(self.v_f >= 0.0 && self.v_f.is_finite(), "V_f must be finite and >= 0")?;
        check(
            self.sigma2 >= 0.0 && self.sigma2.is_finite(),
            "sigma^2 must be finite and >= 0",
        )?;
        check(self.gamma > 0.0 && self.gamma <= 1.0, "gap must lie in (0, 1]")?;
        check(self.tmix > 0.0 && self.tmix.is_finite(), "t_mix must be finite and > 0")?;
        check(self.c > 0.0 && self.c.is_finite(), "C must be finite and > 0")?;
        check(self.n > self.t0, "need N > t0")?;
        check((0.0..=1.0).contains(&self.e_t0), "E(t0) must lie in [0, 1]")?;
        check(self.n_chains >= 1, "need at least one chain")
    }

    /// `m (N − t₀)`.
    pub fn effective_length(&self) -> f64 {
        self.n_chains as f64 * (self.n - self.t0) as f64
    }

    /// `m E(t₀)`.
    pub fn effective_e_t0(&self) -> f64 {
        self.n_chains as f64 * self.e_t0
    }
}

/// `2^{−⌊t₀/t_mix⌋}` for uniformly ergodic chains.
pub fn e_t0_uniform(t0: usize, tmix: f64) -> Result<f64> {
    if !(tmix > 0.0) {
        return Err(Error::invalid(format!("t_mix must be positive, got {tmix}")));
    }
    Ok(2f64.powf(-(t0 as f64 / tmix).floor()).min(1.0))
}

/// Spectral burn-in bound from the χ² contrast `n_q` of the initial law:
/// `½(1−γ*)^{t₀}√(N_q−1)` (reversible, absolute gap) or
/// `½(1−γ_ps)^{(t₀−1/γ_ps)/2}√(N_q−1)` (non-reversible).
pub fn e_t0_spectral(t0: usize, gap: f64, n_q: f64, reversible: bool) -> Result<f64> {
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(Error::invalid(format!("gap {gap} outside (0, 1]")));
    }
    if !(n_q >= 1.0) {
        return Err(Error::invalid(format!("chi-square contrast N_q = {n_q} is below 1")));
    }
    if n_q == 1.0 {
        return Ok(0.0);
    }
    let exponent = if reversible {
        t0 as f64
    } else {
        (t0 as f64 - 1.0 / gap) / 2.0
    };
    let base = 1.0 - gap;
    let factor = if base == 0.0 {
        if exponent > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        base.powf(exponent)
    };
    Ok((0.5 * factor * (n_q - 1.0).sqrt()).min(1.0))
}

/// Smallest available burn-in bound; `None` for a source that is not
/// computable. At least one source is required.
pub fn e_t0_min(uniform: Option<f64>, spectral: Option<f64>) -> Result<f64> {
    match (uniform, spectral) {
        (Some(a), Some(b)) => Ok(a.min(b)),
        (Some(a), None) | (None, Some(a)) => Ok(a),
        (None, None) => Err(Error::invalid("no burn-in error bound is computable")),
    }
}

/// Chebyshev bound before capping at 1.
pub fn chebyshev_tail_uncapped(inputs: &BoundInputs, t: f64) -> Result<f64> {
    inputs.validate()?;
    if !(t > 0.0) {
        return Err(Error::invalid(format!("Chebyshev bound needs t > 0, got {t}")));
    }
    let len = inputs.effective_length();
    let correction = if inputs.reversible {
        4.0 * inputs.v_f / (len * inputs.gamma * inputs.gamma)
    } else {
        16.0 * inputs.v_f / (len * inputs.gamma * inputs.gamma)
    };
    Ok((inputs.sigma2 + correction) / (len * t * t) + inputs.effective_e_t0())
}

/// `P(|Z − E_π f| ≥ t)` bound from the variance of the average.
pub fn chebyshev_tail(inputs: &BoundInputs, t: f64) -> Result<f64> {
    Ok(chebyshev_tail_uncapped(inputs, t)?.min(1.0))
}

/// Exponent `x` of the Bernstein bound `2e^{−x} + E(t₀)`.
fn bernstein_exponent(inputs: &BoundInputs, t: f64) -> Result<f64> {
    inputs.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("Bernstein bound needs finite t >= 0, got {t}")));
    }
    let len = inputs.effective_length();
    if !inputs.reversible && len <= 1.0 / inputs.gamma {
        return Err(Error::invalid(format!(
            "non-reversible Bernstein bound is vacuous: m(N - t0) = {len} <= 1/gamma_ps = {}",
            1.0 / inputs.gamma
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(if inputs.reversible {
        len * t * t / (2.0 * (inputs.sigma2 + 0.8 * inputs.v_f) + 10.0 * t * inputs.c / inputs.gamma)
    } else {
        (len - 1.0 / inputs.gamma) * t * t * inputs.gamma / (8.0 * inputs.v_f + 20.0 * inputs.c * t)
    })
}

/// `ln(a·e^{−x} + e)` without underflow.
fn ln_exp_plus(ln_a: f64, x: f64, e: f64) -> f64 {
    let head = ln_a - x;
    if e <= 0.0 {
        return head;
    }
    let ln_e = e.ln();
    let (hi, lo) = if head > ln_e { (head, ln_e) } else { (ln_e, head) };
    hi + (lo - hi).exp().ln_1p()
}

/// Two-sided Bernstein bound before capping at 1.
pub fn bernstein_tail_uncapped(inputs: &BoundInputs, t: f64) -> Result<f64> {
    Ok(2.0 * (-bernstein_exponent(inputs, t)?).exp() + inputs.effective_e_t0())
}

/// `P(|Z − E_π f| ≥ t)` bound for `f` with `|f − E_π f| ≤ C`.
pub fn bernstein_tail(inputs: &BoundInputs, t: f64) -> Result<f64> {
    Ok(bernstein_tail_uncapped(inputs, t)?.min(1.0))
}

/// Natural log of [`bernstein_tail_uncapped`], finite deep in the tail.
pub fn bernstein_log_tail_uncapped(inputs: &BoundInputs, t: f64) -> Result<f64> {
    let x = bernstein_exponent(inputs, t)?;
    Ok(ln_exp_plus(LN_2, x, inputs.effective_e_t0()))
}

/// One-sided Bernstein bound (upper or lower tail only), capped at 1.
pub fn bernstein_one_sided_tail(inputs: &BoundInputs, t: f64) -> Result<f64> {
    Ok(((-bernstein_exponent(inputs, t)?).exp() + inputs.effective_e_t0()).min(1.0))
}

pub fn bernstein_one_sided_log_tail_uncapped(inputs: &BoundInputs, t: f64) -> Result<f64> {
    let x = bernstein_exponent(inputs, t)?;
    Ok(ln_exp_plus(0.0, x, inputs.effective_e_t0()))
}

/// Smallest `t` with `bernstein_tail(inputs, t) <= delta`: the half-width of
/// a `1 − δ` confidence interval.
pub fn invert_bernstein(inputs: &BoundInputs, delta: f64) -> Result<f64> {
    inputs.validate()?;
    let e = inputs.effective_e_t0();
    if !(delta < 1.0) {
        return Err(Error::invalid(format!("confidence level delta = {delta} must be < 1")));
    }
    if delta <= e {
        return Err(Error::Infeasible(format!(
            "burn-in error {e} alone exceeds delta = {delta}; increase t0"
        )));
    }
    let target = (2.0 / (delta - e)).ln();
    let within = |t: f64| -> Result<bool> { Ok(bernstein_tail_uncapped(inputs, t)? <= delta) };
    if inputs.reversible {
        // L t² = ℓ (a + b t)
        let len = inputs.effective_length();
        let a = 2.0 * (inputs.sigma2 + 0.8 * inputs.v_f);
        let b = 10.0 * inputs.c / inputs.gamma;
        let lb = target * b;
        let mut t = (lb + (lb * lb + 4.0 * len * target * a).sqrt()) / (2.0 * len);
        // absorb rounding in the root
        while !within(t)? {
            t = t.next_up();
        }
        return Ok(t);
    }
    bernstein_exponent(inputs, 1.0)?;
    let (mut lo, mut hi) = (0.0, 1.0);
    while !within(hi)? {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if within(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `ln(1 − Φ(t √(N−t₀) / σ))`, the CLT approximation to the upper tail.
pub fn normal_log_tail(sigma2: f64, n: usize, t0: usize, t: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("normal tail needs sigma^2 > 0, got {sigma2}")));
    }
    if n <= t0 {
        return Err(Error::invalid("need N > t0"));
    }
    Ok(ln_normal_upper_tail(t * ((n - t0) as f64 / sigma2).sqrt()))
}

/// Error term and bias offset for `V̂_f`:
/// `P(V_f − V̂_f ≥ 8t_mix/(N̂−t̂₀) + T) ≤ exp(−(N̂−t̂₀)T²/(200C⁴t_mix)) + E(t̂₀)`.
/// Returns `(exponential term, bias offset)`; the caller adds `E(t̂₀)`.
pub fn vhat_error_bound(big_t: f64, n_hat: usize, t0_hat: usize, c: f64, tmix: f64) -> Result<(f64, f64)> {
    if !(big_t >= 0.0) {
        return Err(Error::invalid(format!("T must be >= 0, got {big_t}")));
    }
    if n_hat <= t0_hat || !(c > 0.0) || !(tmix > 0.0) {
        return Err(Error::invalid("need N̂ > t̂₀, C > 0 and t_mix > 0"));
    }
    let n = (n_hat - t0_hat) as f64;
    let term = (-n * big_t * big_t / (200.0 * c.powi(4) * tmix)).exp();
    Ok((term, 8.0 * tmix / n))
}

fn sigma2_denominator(k: usize, n_hat: usize, t0_hat: usize) -> Result<(f64, f64)> {
    let n = n_hat as f64 - t0_hat as f64;
    let d = n - 3.0 * k as f64 - 1.0;
    if !(d > 0.0) {
        return Err(Error::invalid(format!(
            "N̂ - t̂₀ - 3k - 1 = {d} must be positive (k = {k}, N̂ - t̂₀ = {n})"
        )));
    }
    Ok((n, d))
}

/// Bias interval for `σ̂²(k)`: returns `(lo, hi)` with
/// `lo <= σ² − E_π σ̂²(k) <= hi`.
///
/// Reversible chains use `gamma` (spectral gap) and `gamma_star` (absolute
/// gap) and need even `k`; non-reversible chains use `gamma_ps` only and
/// the interval is symmetric.
#[allow(clippy::too_many_arguments)]
pub fn sigma2_bias_bounds(
    k: usize,
    n_hat: usize,
    t0_hat: usize,
    v_f: f64,
    gamma: f64,
    gamma_star: f64,
    gamma_ps: f64,
    reversible: bool,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::invalid("window k must be at least 1"));
    }
    if !(v_f >= 0.0) {
        return Err(Error::invalid("V_f must be >= 0"));
    }
    let (n, d) = sigma2_denominator(k, n_hat, t0_hat)?;
    let kf = k as f64;
    let finite = (2.0 * kf + 1.0) / ((n - kf) * (n - kf));
    if reversible {
        if k % 2 == 1 {
            return Err(Error::invalid(format!("reversible bias bounds need even k, got {k}")));
        }
        if !(gamma > 0.0) || !(gamma_star > 0.0) {
            return Err(Error::invalid("gaps must be positive"));
        }
        let ratio = (n - kf) / d;
        let tail = 4.0 * v_f / (gamma * gamma) * finite;
        let l_k = ((v_f).min(2.0 * v_f / gamma * (1.0 - gamma_star).powf(kf + 1.0)) + tail) * ratio;
        let u_k = (2.0 * v_f / gamma * (1.0 - gamma.min(1.0)).powf(kf + 1.0) + tail) * ratio;
        Ok((-l_k, u_k))
    } else {
        if !(gamma_ps > 0.0 && gamma_ps <= 1.0) {
            return Err(Error::invalid("pseudo spectral gap must lie in (0, 1]"));
        }
        let geometric = if gamma_ps == 1.0 {
            0.0
        } else {
            (1.0 - gamma_ps).powf((kf + 1.0 - 1.0 / gamma_ps) / 2.0)
        };
        let w_k = 4.0 * v_f / gamma_ps * geometric + 16.0 * v_f / (gamma_ps * gamma_ps) * finite;
        Ok((-w_k, w_k))
    }
}

fn sigma2_exponent(t: f64, k: usize, n_hat: usize, t0_hat: usize, c: f64, tmix: f64) -> Result<f64> {
    if !(t >= 0.0) || !(c > 0.0) || !(tmix > 0.0) {
        return Err(Error::invalid("need t >= 0, C > 0 and t_mix > 0"));
    }
    let (_, d) = sigma2_denominator(k, n_hat, t0_hat)?;
    let w = 2.0 * k as f64 + 1.0;
    Ok(t * t * d / (512.0 * w * w * c.powi(4) * tmix))
}

/// `P_π(|σ̂²(k) − E_π σ̂²(k)| ≥ t)` bound, capped at 1.
pub fn sigma2_concentration(t: f64, k: usize, n_hat: usize, t0_hat: usize, c: f64, tmix: f64) -> Result<f64> {
    Ok((2.0 * (-sigma2_exponent(t, k, n_hat, t0_hat, c, tmix)?).exp()).min(1.0))
}

/// One-sided version from an arbitrary start: bounds
/// `P_q(σ² − σ̂²(k) ≥ bias + t)` where `bias` is `U_k` or `W_k`.
#[allow(clippy::too_many_arguments)]
pub fn sigma2_one_sided(
    t: f64,
    k: usize,
    n_hat: usize,
    t0_hat: usize,
    c: f64,
    tmix: f64,
    e_t0_hat: f64,
) -> Result<f64> {
    Ok(((-sigma2_exponent(t, k, n_hat, t0_hat, c, tmix)?).exp() + e_t0_hat).min(1.0))
}

/// Approximate gap and mixing time of Glauber dynamics for the Curie-Weiss
/// model at high temperature: `γ = (1−β)/n_s`,
/// `t_mix = ½ n_s ln((1−β)² n_s)/(1−β)`.
pub fn analytic_cw_glauber(n_s: usize, beta: f64) -> Result<(f64, f64)> {
    if !(beta < 1.0) {
        return Err(Error::OutOfRegime(format!(
            "Curie-Weiss approximation needs beta < 1, got {beta}"
        )));
    }
    let gap = 1.0 - beta;
    let arg = gap * gap * n_s as f64;
    if !(arg > 1.0) {
        return Err(Error::OutOfRegime(format!(
            "(1 - beta)^2 n_s = {arg} <= 1 gives a non-positive mixing time"
        )));
    }
    Ok((gap / n_s as f64, 0.5 * n_s as f64 * arg.ln() / gap))
}

/// Approximate gaps and mixing times of the periodic 1D Ising model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ising1dGaps {
    pub gamma_random_scan: f64,
    pub tmix_random_scan: f64,
    pub gamma_ps_systematic: f64,
    pub tmix_systematic: f64,
}

pub fn analytic_ising1d(n_s: usize, beta: f64) -> Result<Ising1dGaps> {
    if n_s < 2 || !(beta >= 0.0) {
        return Err(Error::invalid("need n_s >= 2 and beta >= 0"));
    }
    let ns = n_s as f64;
    let q = (-4.0 * beta).exp();
    let log_term = (4.0 * ns).ln();
    Ok(Ising1dGaps {
        gamma_random_scan: 2.0 / ns * q / (1.0 + q),
        tmix_random_scan: ns / 2.0 * (1.0 + (4.0 * beta).exp()) * log_term,
        gamma_ps_systematic: 8.0 * q * (1.0 + q) / ((1.0 + 3.0 * q) * (1.0 + 3.0 * q)),
        tmix_systematic: 0.25 * (3.0 + (4.0 * beta).exp()) * log_term,
    })
}

/// Mixing-time interval implied by a gap: the lower end from
/// `γ* ≥ 1/(1 + t_mix/ln 2)` (reversible) or `γ_ps ≥ 1/(2t_mix)`, the upper
/// end (finite state spaces, needs `π_min`) from
/// `t_mix ≤ (2ln2 + ln(1/π_min))/(2γ*)` or `(1 + 2ln2 + ln(1/π_min))/γ_ps`.
pub fn gap_tmix_relations(gap: f64, pi_min: Option<f64>, reversible: bool) -> Result<(f64, Option<f64>)> {
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(Error::invalid(format!("gap {gap} outside (0, 1]")));
    }
    let lower = if reversible {
        LN_2 * (1.0 / gap - 1.0)
    } else {
        1.0 / (2.0 * gap)
    };
    let upper = match pi_min {
        None => None,
        Some(p) if p > 0.0 && p <= 1.0 => Some(if reversible {
            (2.0 * LN_2 - p.ln()) / (2.0 * gap)
        } else {
            (1.0 + 2.0 * LN_2 - p.ln()) / gap
        }),
        Some(p) => return Err(Error::invalid(format!("pi_min = {p} outside (0, 1]"))),
    };
    Ok((lower, upper))
}

/// Odd spacing `m ≥ 1/γ` for subsampling a reversible chain and the gap
/// `γ' = 1 − (1−γ)^m` of the subsampled chain.
pub fn subsample_params(gamma: f64) -> Result<(usize, f64)> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gap {gamma} outside (0, 1]")));
    }
    let mut m = (1.0 / gamma).ceil() as usize;
    // guard against 1/γ landing just above an integer through rounding
    if m > 1 && (m - 1) as f64 * gamma >= 1.0 {
        m -= 1;
    }
    if m.is_multiple_of(2) {
        m += 1;
    }
    Ok((m, 1.0 - (1.0 - gamma).powi(m as i32)))
}

/// Pseudo spectral gap `m·γ_ps` of a non-reversible chain subsampled with
/// spacing `m`, for the caller-supplied `m` attaining the maximum in the
/// definition of `γ_ps` (not estimable from traces).
pub fn subsample_pseudo_gap(gamma_ps: f64, m: usize) -> Result<f64> {
    if !(gamma_ps > 0.0 && gamma_ps <= 1.0) || m == 0 {
        return Err(Error::invalid("need gamma_ps in (0, 1] and m >= 1"));
    }
    Ok(m as f64 * gamma_ps)
}

/// Which tail formula a curve evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    Chebyshev,
    Bernstein,
    BernsteinOneSided,
    /// CLT approximation `ln(1 − Φ(t√(N−t₀)/σ))`; not a bound.
    Normal,
}

impl Formula {
    pub const ALL: [Formula; 4] = [
        Formula::Chebyshev,
        Formula::Bernstein,
        Formula::BernsteinOneSided,
        Formula::Normal,
    ];

    /// Short name used in configs and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Formula::Chebyshev => "chebyshev",
            Formula::Bernstein => "bernstein",
            Formula::BernsteinOneSided => "bernstein_one_sided",
            Formula::Normal => "normal",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Formula::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown formula {name:?}")))
    }

    pub fn id(self, reversible: bool) -> &'static str {
        match (self, reversible) {
            (Formula::Chebyshev, true) => "chebyshev_reversible",
            (Formula::Chebyshev, false) => "chebyshev_nonreversible",
            (Formula::Bernstein, true) => "bernstein_reversible",
            (Formula::Bernstein, false) => "bernstein_nonreversible",
            (Formula::BernsteinOneSided, true) => "bernstein_one_sided_reversible",
            (Formula::BernsteinOneSided, false) => "bernstein_one_sided_nonreversible",
            (Formula::Normal, _) => "normal",
        }
    }
}

/// A bound evaluated on a grid of deviations `t ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub formula_id: &'static str,
    pub grid: Vec<f64>,
    /// `ln min(1, bound)`.
    pub log_probabilities: Vec<f64>,
    pub uncapped: Vec<f64>,
}

/// `ln` of the uncapped bound at `t >= 0`.
fn log_uncapped(inputs: &BoundInputs, formula: Formula, t: f64) -> Result<f64> {
    match formula {
        Formula::Chebyshev if t == 0.0 => Ok(f64::INFINITY),
        Formula::Chebyshev => Ok(chebyshev_tail_uncapped(inputs, t)?.ln()),
        Formula::Bernstein => bernstein_log_tail_uncapped(inputs, t),
        Formula::BernsteinOneSided => bernstein_one_sided_log_tail_uncapped(inputs, t),
        Formula::Normal => {
            let n = inputs.t0 + inputs.n_chains * (inputs.n - inputs.t0);
            normal_log_tail(inputs.sigma2, n, inputs.t0, t)
        }
    }
}

/// Evaluate `formula` at every `|t|` of `grid`.
pub fn tail_curve(inputs: &BoundInputs, formula: Formula, grid: &[f64]) -> Result<TailCurve> {
    inputs.validate()?;
    let mut log_probabilities = Vec::with_capacity(grid.len());
    let mut uncapped = Vec::with_capacity(grid.len());
    for &t in grid {
        let l = log_uncapped(inputs, formula, t.abs())?;
        log_probabilities.push(l.min(0.0));
        uncapped.push(l.exp());
    }
    Ok(TailCurve {
        formula_id: formula.id(inputs.reversible),
        grid: grid.to_vec(),
        log_probabilities,
        uncapped,
    })
}

impl TailCurve {
    /// CSV with header `t,log_bound,bound_uncapped,formula_id`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,log_bound,bound_uncapped,formula_id\n");
        for ((t, l), u) in self.grid.iter().zip(&self.log_probabilities).zip(&self.uncapped) {
            let _ = writeln!(out, "{t},{l},{u},{}", self.formula_id);
        }
        out
    }
}
