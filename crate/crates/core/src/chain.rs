//! Markov kernels, seeded chain drivers and trace transforms.
//!
//! A chain started at `X_0` produces `X_1, …, X_N` by repeated application of
//! [`Kernel::step`]; a [`Trace`] records `f(X_1), …, f(X_N)` for one
//! observable `f`. Traces never store states.

use rand::Rng;
use rayon::prelude::*;

use crate::numeric::CompensatedSum;
use crate::rng::{chain_rng, initial_state_seed, split_seed, ChainRng};
use crate::{Error, Result};

/// A Markov transition kernel.
///
/// `step` must be a pure function of the current state and the random
/// stream: the same state and the same stream position always produce the
/// same next state. Kernels are shared between concurrently running chains
/// and must not hold interior mutable state.
pub trait Kernel: Sync {
    type State: Clone + Send;

    /// Advance `state` by one transition.
    fn step<R: Rng + ?Sized>(&self, state: &mut Self::State, rng: &mut R);

    /// Whether the kernel satisfies detailed balance with respect to its
    /// stationary law. Selects the reversible or non-reversible bounds.
    fn is_reversible(&self) -> bool;
}

/// Observable values `f(X_{b+s}), f(X_{b+2s}), …` of one chain, where `b` is
/// the burn-in and `s` the subsampling spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    values: Vec<f64>,
    n_total: usize,
    burn_in: usize,
    spacing: usize,
    seed: u64,
}

impl Trace {
    /// Wrap raw values as an unsubsampled trace without burn-in.
    pub fn from_values(values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("a trace needs at least one value"));
        }
        let n_total = values.len();
        Ok(Self {
            values,
            n_total,
            burn_in: 0,
            spacing: 1,
            seed,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of chain steps `N` simulated.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn spacing(&self) -> usize {
        self.spacing
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Compensated mean of the retained values.
    pub fn mean(&self) -> f64 {
        crate::numeric::mean(&self.values)
    }

    /// Discard a further `t0` chain steps from the front.
    ///
    /// `t0` counts steps of the underlying chain, so on a subsampled trace it
    /// must be a multiple of the spacing.
    pub fn apply_burn_in(&self, t0: usize) -> Result<Trace> {
        if self.burn_in + t0 >= self.n_total {
            return Err(Error::invalid(format!(
                "burn-in {} leaves no samples of a {}-step chain (already discarded {})",
                t0, self.n_total, self.burn_in
            )));
        }
        if !t0.is_multiple_of(self.spacing) {
            return Err(Error::invalid(format!(
                "burn-in {t0} is not a multiple of the spacing {}",
                self.spacing
            )));
        }
        let drop = t0 / self.spacing;
        Ok(Trace {
            values: self.values[drop..].to_vec(),
            n_total: self.n_total,
            burn_in: self.burn_in + t0,
            spacing: self.spacing,
            seed: self.seed,
        })
    }

    /// Keep every `m`-th value (positions `m, 2m, 3m, …`).
    ///
    /// For reversible chains callers should pick `m` odd so that the
    /// subsampled chain keeps a positive spectral gap `1 − (1 − γ)^m`.
    pub fn subsample(&self, m: usize) -> Result<Trace> {
        if m == 0 {
            return Err(Error::invalid("subsampling step must be at least 1"));
        }
        Ok(Trace {
            values: self.values.iter().skip(m - 1).step_by(m).copied().collect(),
            n_total: self.n_total,
            burn_in: self.burn_in,
            spacing: self.spacing * m,
            seed: self.seed,
        })
    }
}

/// See [`Trace::apply_burn_in`].
pub fn apply_burn_in(trace: &Trace, t0: usize) -> Result<Trace> {
    trace.apply_burn_in(t0)
}

/// See [`Trace::subsample`].
pub fn subsample(trace: &Trace, m: usize) -> Result<Trace> {
    trace.subsample(m)
}

/// Run `n` steps from `state`, calling `visit` on each new state.
pub fn simulate<K, R, V>(kernel: &K, state: &mut K::State, n: usize, rng: &mut R, mut visit: V)
where
    K: Kernel,
    R: Rng + ?Sized,
    V: FnMut(&K::State),
{
    for _ in 0..n {
        kernel.step(state, rng);
        visit(state);
    }
}

/// Run a single chain of `n` steps from `initial` and record `f(X_1..X_n)`.
pub fn run_chain<K, F>(kernel: &K, initial: K::State, observable: F, n: usize, seed: u64) -> Result<Trace>
where
    K: Kernel,
    F: Fn(&K::State) -> f64,
{
    if n == 0 {
        return Err(Error::invalid("a chain needs at least one step"));
    }
    let mut rng = chain_rng(seed);
    let mut state = initial;
    let mut values = Vec::with_capacity(n);
    simulate(kernel, &mut state, n, &mut rng, |s| values.push(observable(s)));
    Ok(Trace {
        values,
        n_total: n,
        burn_in: 0,
        spacing: 1,
        seed,
    })
}

/// An observable shared between chains.
pub type ObservableFn<'a, S> = dyn Fn(&S) -> f64 + Sync + 'a;

/// Run a single chain and record several observables at once.
pub fn run_chain_multi<K>(
    kernel: &K,
    initial: K::State,
    observables: &[&ObservableFn<'_, K::State>],
    n: usize,
    seed: u64,
) -> Result<Vec<Trace>>
where
    K: Kernel,
{
    if n == 0 {
        return Err(Error::invalid("a chain needs at least one step"));
    }
    let mut rng = chain_rng(seed);
    let mut state = initial;
    let mut columns: Vec<Vec<f64>> = observables.iter().map(|_| Vec::with_capacity(n)).collect();
    simulate(kernel, &mut state, n, &mut rng, |s| {
        for (col, f) in columns.iter_mut().zip(observables) {
            col.push(f(s));
        }
    });
    Ok(columns
        .into_iter()
        .map(|values| Trace {
            values,
            n_total: n,
            burn_in: 0,
            spacing: 1,
            seed,
        })
        .collect())
}

/// Seed and initial state of chain `index` of a parallel batch.
///
/// The initial state is drawn from its own stream so that chain `index`
/// coincides with `run_chain(kernel, initial, f, n, split_seed(base, index))`.
pub fn chain_start<S, I>(initial_sampler: &I, base_seed: u64, index: usize) -> (u64, S)
where
    I: Fn(&mut ChainRng) -> S,
{
    let seed = split_seed(base_seed, index as u64);
    let mut init_rng = chain_rng(initial_state_seed(seed));
    (seed, initial_sampler(&mut init_rng))
}

fn check_chains(n_chains: usize) -> Result<()> {
    if n_chains == 0 {
        return Err(Error::invalid("at least one chain is required"));
    }
    Ok(())
}

/// Run `n_chains` independent chains of `n` steps each.
///
/// Chain `i` runs on `split_seed(base_seed, i)`; the result is ordered by
/// chain index and does not depend on the rayon pool size.
pub fn parallel_traces<K, I, F>(
    kernel: &K,
    initial_sampler: I,
    observable: F,
    n_chains: usize,
    n: usize,
    base_seed: u64,
) -> Result<Vec<Trace>>
where
    K: Kernel,
    I: Fn(&mut ChainRng) -> K::State + Sync,
    F: Fn(&K::State) -> f64 + Sync,
{
    check_chains(n_chains)?;
    (0..n_chains)
        .into_par_iter()
        .map(|i| {
            let (seed, initial) = chain_start(&initial_sampler, base_seed, i);
            run_chain(kernel, initial, &observable, n, seed)
        })
        .collect()
}

/// Per-chain empirical averages `Σ_{i=t0+1}^{N} f(X_i) / (N − t0)` of
/// `n_chains` independent chains, without storing traces.
pub fn parallel_averages<K, I, F>(
    kernel: &K,
    initial_sampler: I,
    observable: F,
    n_chains: usize,
    n: usize,
    t0: usize,
    base_seed: u64,
) -> Result<Vec<f64>>
where
    K: Kernel,
    I: Fn(&mut ChainRng) -> K::State + Sync,
    F: Fn(&K::State) -> f64 + Sync,
{
    check_chains(n_chains)?;
    if t0 >= n {
        return Err(Error::invalid(format!(
            "burn-in {t0} must be smaller than the chain length {n}"
        )));
    }
    Ok((0..n_chains)
        .into_par_iter()
        .map(|i| {
            let (seed, mut state) = chain_start(&initial_sampler, base_seed, i);
            let mut rng = chain_rng(seed);
            simulate(kernel, &mut state, t0, &mut rng, |_| {});
            let mut acc = CompensatedSum::new();
            simulate(kernel, &mut state, n - t0, &mut rng, |s| acc.add(observable(s)));
            acc.value() / (n - t0) as f64
        })
        .collect())
}

/// Terminal observable values `f(X_N^{(i)})` of `n_chains` independent
/// chains. With `n = 0` this is `f` of each initial state.
///
/// If `d_TV(q P^N, π) < ε`, the average of these values behaves like an
/// i.i.d. average from `π` up to an additive `n_chains · ε` in probability;
/// see [`coupling_penalty`].
pub fn final_state_samples<K, I, F>(
    kernel: &K,
    initial_sampler: I,
    observable: F,
    n_chains: usize,
    n: usize,
    base_seed: u64,
) -> Result<Vec<f64>>
where
    K: Kernel,
    I: Fn(&mut ChainRng) -> K::State + Sync,
    F: Fn(&K::State) -> f64 + Sync,
{
    check_chains(n_chains)?;
    Ok((0..n_chains)
        .into_par_iter()
        .map(|i| {
            let (seed, mut state) = chain_start(&initial_sampler, base_seed, i);
            let mut rng = chain_rng(seed);
            simulate(kernel, &mut state, n, &mut rng, |_| {});
            observable(&state)
        })
        .collect())
}

/// Additive coupling penalty `M·ε` of the approximately-independent
/// parallel estimator.
pub fn coupling_penalty(n_chains: usize, tv_epsilon: f64) -> f64 {
    n_chains as f64 * tv_epsilon
}
