//! Experiment protocol: estimate parameters on one long run, then compare
//! the spread of many independent run averages with the bounds.

use crate::bounds::{
    analytic_cw_glauber, analytic_ising1d, e_t0_uniform, invert_bernstein, tail_curve, BoundInputs, Formula, TailCurve,
};
use crate::chain::{chain_start, parallel_averages, run_chain_multi, Kernel, ObservableFn};
use crate::dag::{exact_posterior, load_dataset, mh_dag_kernel, BmaConfig, Dag, DagKernel};
use crate::estimators::{default_policy, estimate_many, EstimatorReport};
use crate::numeric::{mean, CompensatedSum};
use crate::rng::{stream_seed, ChainRng, ESTIMATION_STREAM, EVALUATION_STREAM};
use crate::spin::{Family, SpinConfig, SpinKernel, SpinModel, UpdateScheme};
use crate::{Error, Result};

use super::config::{ExperimentConfig, GapSource, ModelSpec, Observable};

/// Burn-in multiple of the mixing time used for evaluation runs.
pub const BURN_IN_MIXING_TIMES: f64 = 30.0;

/// Every parameter that enters the bounds, after estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedParameters {
    pub gamma: f64,
    pub tmix: f64,
    pub sigma2: f64,
    pub v_f: f64,
    pub c: f64,
    pub n: usize,
    pub t0: usize,
    pub e_t0: f64,
    pub runs: usize,
    pub reversible: bool,
    pub gap_source: GapSource,
}

impl ResolvedParameters {
    pub fn bound_inputs(&self) -> BoundInputs {
        BoundInputs {
            v_f: self.v_f,
            sigma2: self.sigma2,
            gamma: self.gamma,
            tmix: self.tmix,
            c: self.c,
            n: self.n,
            t0: self.t0,
            e_t0: self.e_t0,
            reversible: self.reversible,
            n_chains: 1,
        }
    }
}

/// Mean-shifted empirical log-tails of a sample of run averages.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTail {
    pub pooled_mean: f64,
    /// `#{Ê − Ē ≤ t}` for `t < 0`, `#{Ê − Ē > t}` for `t ≥ 0`.
    pub counts: Vec<usize>,
    /// `ln(count / m)`; `None` where the count is zero.
    pub l_hat: Vec<Option<f64>>,
}

/// `L̂(t) = ln F̂(t)` for `t < 0` and `ln(1 − F̂(t))` for `t ≥ 0`, where `F̂`
/// is the empirical CDF of the estimates shifted by their mean.
pub fn empirical_log_tail(estimates: &[f64], grid: &[f64]) -> Result<EmpiricalTail> {
    if estimates.is_empty() {
        return Err(Error::invalid("empirical tail needs at least one estimate"));
    }
    let pooled_mean = mean(estimates);
    let mut shifted: Vec<f64> = estimates.iter().map(|x| x - pooled_mean).collect();
    shifted.sort_by(f64::total_cmp);
    let m = shifted.len();
    let counts: Vec<usize> = grid
        .iter()
        .map(|&t| {
            let at_most = shifted.partition_point(|&d| d <= t);
            if t < 0.0 {
                at_most
            } else {
                m - at_most
            }
        })
        .collect();
    let l_hat = counts
        .iter()
        .map(|&c| (c > 0).then(|| (c as f64 / m as f64).ln()))
        .collect();
    Ok(EmpiricalTail {
        pooled_mean,
        counts,
        l_hat,
    })
}

/// `points` evenly spaced values from `−half_width` to `half_width`.
pub fn symmetric_grid(points: usize, half_width: f64) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    // mirror image of the upper half, so g[i] == -g[points-1-i] exactly
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| {
            let j = (points - 1 - i).min(i) as f64;
            let v = half_width * (last - 2.0 * j) / last;
            if 2 * i < points - 1 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct TailSummary {
    pub observable: String,
    /// Per-run averages `Ê^{(j)}`, in run order.
    pub estimates: Vec<f64>,
    pub grid: Vec<f64>,
    pub tail: EmpiricalTail,
    pub curves: Vec<TailCurve>,
    /// Present unless estimation was skipped.
    pub report: Option<EstimatorReport>,
    pub params: ResolvedParameters,
}

impl TailSummary {
    pub fn curve(&self, formula_id_prefix: &str) -> Option<&TailCurve> {
        self.curves.iter().find(|c| c.formula_id.starts_with(formula_id_prefix))
    }
}

type Observer<'a, S> = Box<dyn Fn(&S) -> f64 + Sync + 'a>;
type Sampler<'a, S> = Box<dyn Fn(&mut ChainRng) -> S + Sync + 'a>;

/// A kernel with its initial law and observables (evaluated first, then
/// the extra gap observables).
struct Plan<'a, K: Kernel> {
    kernel: K,
    initial: Sampler<'a, K::State>,
    observables: Vec<Observer<'a, K::State>>,
    analytic: Option<(f64, f64)>,
}

fn spin_observer(obs: Observable) -> Result<Observer<'static, SpinConfig>> {
    match obs {
        Observable::Magnetization => Ok(Box::new(|w: &SpinConfig| w.magnetization() as f64)),
        Observable::SignMagnetization => Ok(Box::new(|w: &SpinConfig| w.sign_magnetization() as f64)),
        Observable::Edge { .. } => Err(Error::config("edge observables need a dag model")),
    }
}

fn spin_plan(cfg: &ExperimentConfig) -> Result<Plan<'static, SpinKernel>> {
    let ModelSpec::Spin {
        family,
        n_sites,
        beta,
        h,
    } = cfg.model
    else {
        unreachable!("spin_plan called on a dag config");
    };
    let scheme = cfg.kernel.ok_or_else(|| Error::config("spin models need a kernel"))?;
    let model = SpinModel::new(family, n_sites, beta, h).map_err(|e| Error::config(e.to_string()))?;
    let analytic = match cfg.bound.gap_source {
        GapSource::Estimated => None,
        GapSource::Analytic => {
            if h != 0.0 {
                return Err(Error::OutOfRegime(format!(
                    "analytic gap formulas assume h = 0, got h = {h}"
                )));
            }
            Some(match (family, scheme) {
                (Family::CurieWeiss, UpdateScheme::GlauberRandomScan) => analytic_cw_glauber(n_sites, beta)?,
                (Family::Ising1D, UpdateScheme::GlauberRandomScan) => {
                    let g = analytic_ising1d(n_sites, beta)?;
                    (g.gamma_random_scan, g.tmix_random_scan)
                }
                (Family::Ising1D, UpdateScheme::GlauberSystematicScan) => {
                    let g = analytic_ising1d(n_sites, beta)?;
                    (g.gamma_ps_systematic, g.tmix_systematic)
                }
                _ => return Err(Error::config("no analytic gap formula for this model and kernel")),
            })
        }
    };
    let observables = std::iter::once(cfg.observable)
        .chain(cfg.gap_observables.iter().copied())
        .map(spin_observer)
        .collect::<Result<_>>()?;
    Ok(Plan {
        kernel: SpinKernel::new(model, scheme),
        initial: Box::new(move |rng: &mut ChainRng| SpinConfig::uniform(n_sites, rng)),
        observables,
        analytic,
    })
}

fn load_dag_kernel(cfg: &ExperimentConfig) -> Result<DagKernel> {
    let ModelSpec::Dag {
        dataset,
        has_header,
        equivalent_sample_size,
    } = &cfg.model
    else {
        unreachable!("load_dag_kernel called on a spin config");
    };
    let data = load_dataset(dataset, *has_header)?;
    Ok(mh_dag_kernel(data, BmaConfig::new(*equivalent_sample_size)?))
}

fn dag_plan(cfg: &ExperimentConfig) -> Result<Plan<'static, DagKernel>> {
    let kernel = load_dag_kernel(cfg)?;
    let n = kernel.data().n();
    let observables = std::iter::once(cfg.observable)
        .chain(cfg.gap_observables.iter().copied())
        .map(|obs| match obs {
            Observable::Edge { from, to } if from < n && to < n => {
                Ok(Box::new(move |g: &Dag| g.has_edge(from, to) as u8 as f64) as Observer<'static, Dag>)
            }
            Observable::Edge { .. } => Err(Error::config(format!(
                "observable {} refers to a node beyond the dataset's {n} columns",
                obs.name()
            ))),
            _ => Err(Error::config("dag models only support edge observables")),
        })
        .collect::<Result<_>>()?;
    Ok(Plan {
        kernel,
        // chains start from the empty graph
        initial: Box::new(move |_: &mut ChainRng| Dag::empty(n).expect("dataset has 1..=64 columns")),
        observables,
        analytic: None,
    })
}

/// Seeds of the estimation run and of the evaluation batch.
pub fn derived_seeds(base_seed: u64) -> (u64, u64) {
    (
        stream_seed(base_seed, ESTIMATION_STREAM),
        stream_seed(base_seed, EVALUATION_STREAM),
    )
}

fn estimation_window(cfg: &ExperimentConfig) -> Result<Option<(usize, usize)>> {
    let e = &cfg.estimation;
    Ok(match (e.t0_hat, e.k) {
        (None, None) => None,
        (t0, k) => {
            let (d_t0, d_k) = default_policy(e.n_hat).unwrap_or((e.n_hat / 10, 1));
            Some((t0.unwrap_or(d_t0), k.unwrap_or(d_k)))
        }
    })
}

fn estimate_with<K: Kernel>(cfg: &ExperimentConfig, plan: &Plan<K>) -> Result<EstimatorReport> {
    let (est_seed, _) = derived_seeds(cfg.base_seed);
    let (seed, initial) = chain_start(&plan.initial, est_seed, 0);
    let refs: Vec<&ObservableFn<'_, K::State>> = plan.observables.iter().map(|b| b.as_ref()).collect();
    let traces = run_chain_multi(&plan.kernel, initial, &refs, cfg.estimation.n_hat, seed)?;
    let values: Vec<&[f64]> = traces.iter().map(|t| t.values()).collect();
    let mut reports = estimate_many(
        &values,
        plan.kernel.is_reversible(),
        cfg.bound.c,
        estimation_window(cfg)?,
    )?;
    Ok(reports.swap_remove(0))
}

fn resolve<K: Kernel>(cfg: &ExperimentConfig, plan: &Plan<K>) -> Result<(ResolvedParameters, Option<EstimatorReport>)> {
    let known = match (cfg.estimation.sigma2, cfg.estimation.v_f, plan.analytic) {
        (Some(s), Some(v), Some(_)) => Some((s, v)),
        _ => None,
    };
    let report = match known {
        Some(_) => None,
        None => Some(estimate_with(cfg, plan)?),
    };
    let (sigma2, v_f) = known.unwrap_or_else(|| {
        let r = report.as_ref().expect("estimated above");
        (r.sigma2_hat, r.v_hat)
    });
    let (gamma, tmix) = match plan.analytic {
        Some(pair) => pair,
        None => {
            let r = report.as_ref().expect("estimated gaps need an estimation run");
            (r.gamma_hat, r.tmix_hat)
        }
    };
    let t0 = (BURN_IN_MIXING_TIMES * tmix).floor() as usize;
    if t0 >= cfg.n {
        return Err(Error::config(format!(
            "burn-in t0 = {t0} (30 t_mix) leaves nothing of a run of length N = {}",
            cfg.n
        )));
    }
    Ok((
        ResolvedParameters {
            gamma,
            tmix,
            sigma2,
            v_f,
            c: cfg.bound.c,
            n: cfg.n,
            t0,
            e_t0: e_t0_uniform(t0, tmix)?,
            runs: cfg.runs,
            reversible: plan.kernel.is_reversible(),
            gap_source: cfg.bound.gap_source,
        },
        report,
    ))
}

fn tails_with<K: Kernel>(cfg: &ExperimentConfig, plan: &Plan<K>) -> Result<TailSummary> {
    let (params, report) = resolve(cfg, plan)?;
    let (_, eval_seed) = derived_seeds(cfg.base_seed);
    let observable = &plan.observables[0];
    let estimates = parallel_averages(
        &plan.kernel,
        &plan.initial,
        |s: &K::State| observable(s),
        cfg.runs,
        cfg.n,
        params.t0,
        eval_seed,
    )?;
    let half_width = cfg
        .grid
        .half_width
        .unwrap_or(6.0 * params.sigma2.sqrt() / ((params.n - params.t0) as f64).sqrt());
    if !(half_width > 0.0) {
        return Err(Error::EstimationFailure(
            "asymptotic variance is zero, so the default grid is empty; set grid_half_width".into(),
        ));
    }
    let grid = symmetric_grid(cfg.grid.points, half_width);
    let tail = empirical_log_tail(&estimates, &grid)?;
    let inputs = params.bound_inputs();
    let curves = cfg
        .bound
        .formulas
        .iter()
        .map(|&f| tail_curve(&inputs, f, &grid))
        .collect::<Result<_>>()?;
    Ok(TailSummary {
        observable: cfg.observable.name(),
        estimates,
        grid,
        tail,
        curves,
        report,
        params,
    })
}

/// Gap, mixing time, variances and burn-in as an experiment would use them,
/// running the estimation chain when the config does not pin them.
pub fn resolve_parameters(cfg: &ExperimentConfig) -> Result<(ResolvedParameters, Option<EstimatorReport>)> {
    cfg.validate()?;
    match cfg.model {
        ModelSpec::Spin { .. } => resolve(cfg, &spin_plan(cfg)?),
        ModelSpec::Dag { .. } => resolve(cfg, &dag_plan(cfg)?),
    }
}

/// Full protocol: estimation run, `t₀ = ⌊30 t_mix⌋`, `runs` independent
/// evaluation runs of length `N`, empirical log-tails and bound curves.
/// Deterministic in the config alone.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TailSummary> {
    cfg.validate()?;
    match cfg.model {
        ModelSpec::Spin { .. } => tails_with(cfg, &spin_plan(cfg)?),
        ModelSpec::Dag { .. } => tails_with(cfg, &dag_plan(cfg)?),
    }
}

/// Only the estimation run of an experiment.
pub fn run_estimation(cfg: &ExperimentConfig) -> Result<EstimatorReport> {
    cfg.validate()?;
    match cfg.model {
        ModelSpec::Spin { .. } => estimate_with(cfg, &spin_plan(cfg)?),
        ModelSpec::Dag { .. } => estimate_with(cfg, &dag_plan(cfg)?),
    }
}

/// Posterior edge probability from one long run with a Bernstein interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DagPosterior {
    pub observable: String,
    pub estimate: f64,
    /// Half-width `t` with `P(|estimate − truth| ≥ t) ≤ delta`.
    pub half_width: f64,
    pub delta: f64,
    /// Exact posterior by enumeration, for graphs of at most 4 nodes.
    pub exact: Option<f64>,
    pub report: EstimatorReport,
    pub params: ResolvedParameters,
}

pub fn run_dag_posterior(cfg: &ExperimentConfig) -> Result<DagPosterior> {
    if !matches!(cfg.model, ModelSpec::Dag { .. }) {
        return Err(Error::config("dag-posterior needs model = dag"));
    }
    let plan = dag_plan(cfg)?;
    let (params, report) = resolve(cfg, &plan)?;
    let report = report.expect("dag models always run the estimation");
    let (_, eval_seed) = derived_seeds(cfg.base_seed);
    let observable = &plan.observables[0];
    let estimate = parallel_averages(
        &plan.kernel,
        &plan.initial,
        |g: &Dag| observable(g),
        1,
        cfg.n,
        params.t0,
        eval_seed,
    )?[0];
    let half_width = invert_bernstein(&params.bound_inputs(), cfg.bound.delta)?;
    let exact = if plan.kernel.data().n() <= 4 {
        let post = exact_posterior(plan.kernel.data(), plan.kernel.config())?;
        let mut acc = CompensatedSum::new();
        for (g, p) in &post {
            acc.add(observable(g) * p);
        }
        Some(acc.value())
    } else {
        None
    };
    Ok(DagPosterior {
        observable: cfg.observable.name(),
        estimate,
        half_width,
        delta: cfg.bound.delta,
        exact,
        report,
        params,
    })
}

/// Bound curves for directly supplied parameters.
pub fn bound_curves(inputs: &BoundInputs, formulas: &[Formula], grid: &[f64]) -> Result<Vec<TailCurve>> {
    formulas.iter().map(|&f| tail_curve(inputs, f, grid)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_tail_examples() {
        let t = empirical_log_tail(&[0.0; 4], &[0.5, 1.0]).unwrap();
        assert_eq!(t.l_hat, vec![None, None]);
        let t = empirical_log_tail(&[-1.0, 1.0], &[-0.5, 0.5]).unwrap();
        assert_eq!(t.pooled_mean, 0.0);
        assert_eq!(t.l_hat, vec![Some(0.5f64.ln()), Some(0.5f64.ln())]);
        // shifted by the pooled mean
        let t = empirical_log_tail(&[9.0, 11.0], &[-0.5, 0.5]).unwrap();
        assert_eq!(t.counts, vec![1, 1]);
        assert!(empirical_log_tail(&[], &[0.0]).is_err());
    }

    #[test]
    fn log_tail_step_semantics() {
        // F̂ is right-continuous: a point exactly at t counts as ≤ t
        let t = empirical_log_tail(&[-2.0, 0.0, 2.0], &[-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(t.counts, vec![1, 1, 0]);
    }

    #[test]
    fn grid_shape() {
        let g = symmetric_grid(200, 3.0);
        assert_eq!(g.len(), 200);
        assert_eq!((g[0], g[199]), (-3.0, 3.0));
        for i in 0..200 {
            assert_eq!(g[i], -g[199 - i]);
            assert!(i == 0 || g[i] > g[i - 1]);
        }
        assert_eq!(symmetric_grid(1, 3.0), vec![0.0]);
        assert_eq!(symmetric_grid(5, 1.0), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    fn small_cw(extra: &str) -> ExperimentConfig {
        let text = format!(
            "model = curie_weiss\nn_sites = 6\nbeta = 0.5\nkernel = glauber_random_scan\n\
             observable = magnetization\nc = 6\nn = 2000\nruns = 40\nestimation_n = 20000\n{extra}"
        );
        ExperimentConfig::parse(&text).unwrap()
    }

    #[test]
    fn experiment_is_deterministic_and_consistent() {
        let cfg = small_cw("seed = 5\n");
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimates.len(), 40);
        assert_eq!(a.grid.len(), 200);
        assert_eq!(a.curves.len(), 4);
        let report = a.report.as_ref().unwrap();
        assert_eq!(a.params.t0, (30.0 * report.tmix_hat).floor() as usize);
        let direct: f64 = a.estimates.iter().sum::<f64>() / 40.0;
        assert!((a.tail.pooled_mean - direct).abs() < 1e-12);
        let other = run_experiment(&small_cw("seed = 6\n")).unwrap();
        assert_ne!(other.estimates, a.estimates);
    }

    #[test]
    fn analytic_with_known_variances_skips_estimation() {
        let cfg = small_cw("gap_source = analytic\nsigma2 = 100\nv_f = 5\n");
        let s = run_experiment(&cfg).unwrap();
        assert!(s.report.is_none());
        let (gamma, tmix) = analytic_cw_glauber(6, 0.5).unwrap();
        assert_eq!((s.params.gamma, s.params.tmix), (gamma, tmix));
        assert_eq!(s.params.t0, (30.0 * tmix).floor() as usize);
    }

    #[test]
    fn burn_in_beyond_run_is_a_config_error() {
        let cfg = small_cw("gap_source = analytic\nsigma2 = 100\nv_f = 5\n")
            .canonical()
            .replace("n = 2000", "n = 50");
        let cfg = ExperimentConfig::parse(&cfg).unwrap();
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
