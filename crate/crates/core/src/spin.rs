//! Curie-Weiss and periodic Ising spin models.
//!
//! The target law is `P(ω) ∝ exp(H(ω))` with
//!
//! * Curie-Weiss: `H(ω) = β/n · Σ_{i<j} ω_i ω_j + h Σ_i ω_i`
//! * Ising:       `H(ω) = β Σ_{i~j} ω_i ω_j + h Σ_i ω_i`
//!
//! on a ring (1D) or an `L × L` torus (2D, row-major: site `(r, c)` is
//! `r·L + c`). Note the plus sign: larger energy means more probable.
//!
//! All kernels work from the integer "field sum" of a site (sum of the spins
//! it interacts with), so acceptance and resampling probabilities are looked
//! up in per-model tables instead of evaluating `exp` per step.

use std::collections::BTreeMap;

use rand::Rng;

use crate::chain::Kernel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    CurieWeiss,
    Ising1D,
    Ising2D,
}

/// A configuration of `±1` spins with its cached total magnetization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    spins: Vec<i8>,
    total: i64,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(pos) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!(
                "spin {pos} is {} (must be -1 or +1)",
                spins[pos]
            )));
        }
        let total = spins.iter().map(|&s| s as i64).sum();
        Ok(Self { spins, total })
    }

    pub fn all_up(n: usize) -> Self {
        Self {
            spins: vec![1; n],
            total: n as i64,
        }
    }

    /// Independent fair coin per site (uniform law on `{−1, 1}^n`).
    pub fn uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let spins: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let total = spins.iter().map(|&s| s as i64).sum();
        Self { spins, total }
    }

    /// Configuration with bit `i` of `index` set meaning spin `i` is `+1`.
    pub fn from_index(n: usize, index: usize) -> Self {
        let spins: Vec<i8> = (0..n).map(|i| if index >> i & 1 == 1 { 1 } else { -1 }).collect();
        let total = spins.iter().map(|&s| s as i64).sum();
        Self { spins, total }
    }

    /// Inverse of [`SpinConfig::from_index`].
    pub fn to_index(&self) -> usize {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .map(|(i, _)| 1usize << i)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn get(&self, site: usize) -> i8 {
        self.spins[site]
    }

    #[inline]
    fn set(&mut self, site: usize, value: i8) {
        let old = self.spins[site];
        if old != value {
            self.spins[site] = value;
            self.total += (value - old) as i64;
        }
        #[cfg(feature = "paranoid")]
        self.check_consistency();
    }

    /// Panics if the cached magnetization disagrees with a full recount.
    pub fn check_consistency(&self) {
        let recount: i64 = self.spins.iter().map(|&s| s as i64).sum();
        assert_eq!(recount, self.total, "cached magnetization out of sync");
    }

    /// Total magnetization `Σ ω_i`.
    #[inline]
    pub fn magnetization(&self) -> i64 {
        self.total
    }

    /// `sgn(Σ ω_i)` with `sgn(0) = 0`.
    #[inline]
    pub fn sign_magnetization(&self) -> i64 {
        self.total.signum()
    }
}

/// See [`SpinConfig::magnetization`].
pub fn magnetization(w: &SpinConfig) -> i64 {
    w.magnetization()
}

/// See [`SpinConfig::sign_magnetization`].
pub fn sign_magnetization(w: &SpinConfig) -> i64 {
    w.sign_magnetization()
}

#[derive(Debug, Clone)]
pub struct SpinModel {
    family: Family,
    n_sites: usize,
    beta: f64,
    h: f64,
    /// Interaction strength per unit of field sum: `β/n` or `β`.
    coupling: f64,
    /// Flattened neighbour lists (Ising only), `degree` entries per site.
    neighbors: Vec<usize>,
    degree: usize,
    /// Largest possible |field sum|.
    max_field: i64,
    /// `P(ω_i = +1 | rest)` indexed by `field sum + max_field`.
    plus_prob: Vec<f64>,
    /// Metropolis flip acceptance indexed by `[spin is +1][field sum + max_field]`.
    flip_accept: [Vec<f64>; 2],
}

impl SpinModel {
    pub fn curie_weiss(n_sites: usize, beta: f64, h: f64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::invalid("the Curie-Weiss model needs at least one site"));
        }
        Self::build(Family::CurieWeiss, n_sites, beta, h, Vec::new(), 0)
    }

    /// Ising model on a ring of `n_sites` sites. On two sites the two
    /// periodic edges join the same pair and both count.
    pub fn ising_1d(n_sites: usize, beta: f64, h: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::invalid("the 1D Ising ring needs at least two sites"));
        }
        let mut neighbors = Vec::with_capacity(2 * n_sites);
        for i in 0..n_sites {
            neighbors.push((i + n_sites - 1) % n_sites);
            neighbors.push((i + 1) % n_sites);
        }
        Self::build(Family::Ising1D, n_sites, beta, h, neighbors, 2)
    }

    /// Ising model on an `side × side` torus.
    pub fn ising_2d(side: usize, beta: f64, h: f64) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid("the 2D Ising torus needs side length at least 2"));
        }
        let n = side * side;
        let mut neighbors = Vec::with_capacity(4 * n);
        for r in 0..side {
            for c in 0..side {
                neighbors.push(((r + side - 1) % side) * side + c);
                neighbors.push(((r + 1) % side) * side + c);
                neighbors.push(r * side + (c + side - 1) % side);
                neighbors.push(r * side + (c + 1) % side);
            }
        }
        Self::build(Family::Ising2D, n, beta, h, neighbors, 4)
    }

    /// Build a model from a family and a site count (`n_sites` must be a
    /// perfect square for the 2D model).
    pub fn new(family: Family, n_sites: usize, beta: f64, h: f64) -> Result<Self> {
        match family {
            Family::CurieWeiss => Self::curie_weiss(n_sites, beta, h),
            Family::Ising1D => Self::ising_1d(n_sites, beta, h),
            Family::Ising2D => {
                let side = (n_sites as f64).sqrt().round() as usize;
                if side * side != n_sites {
                    return Err(Error::invalid(format!(
                        "2D Ising needs a square number of sites, got {n_sites}"
                    )));
                }
                Self::ising_2d(side, beta, h)
            }
        }
    }

    fn build(family: Family, n_sites: usize, beta: f64, h: f64, neighbors: Vec<usize>, degree: usize) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid(format!("inverse temperature must be >= 0, got {beta}")));
        }
        if !h.is_finite() {
            return Err(Error::invalid("external field must be finite"));
        }
        let (coupling, max_field) = match family {
            Family::CurieWeiss => (beta / n_sites as f64, n_sites as i64 - 1),
            _ => (beta, degree as i64),
        };
        let width = (2 * max_field + 1) as usize;
        let mut plus_prob = Vec::with_capacity(width);
        let mut accept_minus = Vec::with_capacity(width);
        let mut accept_plus = Vec::with_capacity(width);
        for s in -max_field..=max_field {
            let local = coupling * s as f64 + h;
            plus_prob.push(plus_probability(local));
            // H(ω') − H(ω) = −2 ω_i · local
            accept_minus.push((2.0 * local).exp().min(1.0));
            accept_plus.push((-2.0 * local).exp().min(1.0));
        }
        Ok(Self {
            family,
            n_sites,
            beta,
            h,
            coupling,
            neighbors,
            degree,
            max_field,
            plus_prob,
            flip_accept: [accept_minus, accept_plus],
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Neighbours of `site` in the lattice (empty for Curie-Weiss, where every
    /// pair interacts).
    pub fn neighbors(&self, site: usize) -> &[usize] {
        if self.degree == 0 {
            &[]
        } else {
            &self.neighbors[site * self.degree..(site + 1) * self.degree]
        }
    }

    fn check_len(&self, w: &SpinConfig) -> Result<()> {
        if w.len() != self.n_sites {
            return Err(Error::invalid(format!(
                "configuration has {} spins, model has {}",
                w.len(),
                self.n_sites
            )));
        }
        Ok(())
    }

    /// Sum of the spins that interact with `site`.
    #[inline]
    fn field_sum(&self, w: &SpinConfig, site: usize) -> i64 {
        match self.family {
            Family::CurieWeiss => w.total - w.spins[site] as i64,
            _ => self.neighbors(site).iter().map(|&j| w.spins[j] as i64).sum(),
        }
    }

    #[inline]
    fn table_index(&self, w: &SpinConfig, site: usize) -> usize {
        (self.field_sum(w, site) + self.max_field) as usize
    }

    /// Local field `m_i` such that `H(ω⁺) − H(ω⁻) = 2 m_i`.
    pub fn local_field(&self, w: &SpinConfig, site: usize) -> Result<f64> {
        self.check_len(w)?;
        self.check_site(site)?;
        Ok(self.coupling * self.field_sum(w, site) as f64 + self.h)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(Error::invalid(format!(
                "site {site} out of range for {} sites",
                self.n_sites
            )));
        }
        Ok(())
    }

    /// Exact energy `H_{β,h}(ω)`.
    pub fn energy(&self, w: &SpinConfig) -> Result<f64> {
        self.check_len(w)?;
        let m = w.total as f64;
        let interaction = match self.family {
            Family::CurieWeiss => self.coupling * (m * m - self.n_sites as f64) / 2.0,
            _ => {
                // each edge appears in the neighbour lists of both endpoints
                let twice: i64 = (0..self.n_sites)
                    .map(|i| w.spins[i] as i64 * self.field_sum(w, i))
                    .sum();
                self.beta * twice as f64 / 2.0
            }
        };
        Ok(interaction + self.h * m)
    }

    /// Probability that Glauber resampling sets `site` to `+1`.
    pub fn conditional_plus_probability(&self, w: &SpinConfig, site: usize) -> Result<f64> {
        Ok(plus_probability(self.local_field(w, site)?))
    }
}

/// `e^m / (e^m + e^{−m})`, written to stay finite for large `|m|`.
fn plus_probability(local: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * local).exp())
}

/// See [`SpinModel::energy`].
pub fn energy(model: &SpinModel, w: &SpinConfig) -> Result<f64> {
    model.energy(w)
}

/// See [`SpinModel::conditional_plus_probability`].
pub fn conditional_plus_probability(model: &SpinModel, w: &SpinConfig, site: usize) -> Result<f64> {
    model.conditional_plus_probability(w, site)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateScheme {
    /// Resample one uniformly chosen site from its conditional law.
    GlauberRandomScan,
    /// Resample sites `0, 1, …, n−1` in order; one step is one full sweep.
    GlauberSystematicScan,
    /// Propose flipping one uniformly chosen site, accept with
    /// `min{1, exp(H(ω') − H(ω))}`.
    MetropolisSpinFlip,
}

/// A spin-model kernel. Immutable once built, so one kernel serves any
/// number of concurrently running chains.
#[derive(Debug, Clone)]
pub struct SpinKernel {
    model: SpinModel,
    scheme: UpdateScheme,
}

pub fn glauber_random_scan_kernel(model: SpinModel) -> SpinKernel {
    SpinKernel::new(model, UpdateScheme::GlauberRandomScan)
}

pub fn glauber_systematic_scan_kernel(model: SpinModel) -> SpinKernel {
    SpinKernel::new(model, UpdateScheme::GlauberSystematicScan)
}

pub fn metropolis_spin_flip_kernel(model: SpinModel) -> SpinKernel {
    SpinKernel::new(model, UpdateScheme::MetropolisSpinFlip)
}

impl SpinKernel {
    pub fn new(model: SpinModel, scheme: UpdateScheme) -> Self {
        Self { model, scheme }
    }

    pub fn model(&self) -> &SpinModel {
        &self.model
    }

    pub fn scheme(&self) -> UpdateScheme {
        self.scheme
    }

    #[inline]
    fn resample<R: Rng + ?Sized>(&self, w: &mut SpinConfig, site: usize, rng: &mut R) {
        let p = self.model.plus_prob[self.model.table_index(w, site)];
        let value = if rng.random::<f64>() < p { 1 } else { -1 };
        w.set(site, value);
    }

    /// Exact one-step law from `w`, as `(next state index, probability)`
    /// pairs sorted by [`SpinConfig::to_index`]. Intended for small systems.
    pub fn transitions(&self, w: &SpinConfig) -> Result<Vec<(usize, f64)>> {
        let model = &self.model;
        model.check_len(w)?;
        let n = model.n_sites;
        let mut law: BTreeMap<usize, f64> = BTreeMap::new();
        match self.scheme {
            UpdateScheme::GlauberRandomScan => {
                for site in 0..n {
                    for (next, p) in resample_outcomes(model, w, site)? {
                        *law.entry(next.to_index()).or_default() += p / n as f64;
                    }
                }
            }
            UpdateScheme::GlauberSystematicScan => {
                let mut current: BTreeMap<usize, f64> = BTreeMap::from([(w.to_index(), 1.0)]);
                for site in 0..n {
                    let mut next_law: BTreeMap<usize, f64> = BTreeMap::new();
                    for (&idx, &mass) in &current {
                        let state = SpinConfig::from_index(n, idx);
                        for (next, p) in resample_outcomes(model, &state, site)? {
                            *next_law.entry(next.to_index()).or_default() += mass * p;
                        }
                    }
                    current = next_law;
                }
                law = current;
            }
            UpdateScheme::MetropolisSpinFlip => {
                let here = model.energy(w)?;
                for site in 0..n {
                    let mut flipped = w.clone();
                    flipped.set(site, -w.get(site));
                    let accept = (model.energy(&flipped)? - here).exp().min(1.0);
                    *law.entry(flipped.to_index()).or_default() += accept / n as f64;
                    *law.entry(w.to_index()).or_default() += (1.0 - accept) / n as f64;
                }
            }
        }
        Ok(law.into_iter().filter(|&(_, p)| p > 0.0).collect())
    }
}

fn resample_outcomes(model: &SpinModel, w: &SpinConfig, site: usize) -> Result<[(SpinConfig, f64); 2]> {
    let p = model.conditional_plus_probability(w, site)?;
    let mut up = w.clone();
    up.set(site, 1);
    let mut down = w.clone();
    down.set(site, -1);
    Ok([(up, p), (down, 1.0 - p)])
}

impl Kernel for SpinKernel {
    type State = SpinConfig;

    #[inline]
    fn step<R: Rng + ?Sized>(&self, w: &mut SpinConfig, rng: &mut R) {
        let n = self.model.n_sites;
        match self.scheme {
            UpdateScheme::GlauberRandomScan => {
                let site = rng.random_range(0..n);
                self.resample(w, site, rng);
            }
            UpdateScheme::GlauberSystematicScan => {
                for site in 0..n {
                    self.resample(w, site, rng);
                }
            }
            UpdateScheme::MetropolisSpinFlip => {
                let site = rng.random_range(0..n);
                let spin = w.get(site);
                let accept = self.model.flip_accept[(spin == 1) as usize][self.model.table_index(w, site)];
                if accept >= 1.0 || rng.random::<f64>() < accept {
                    w.set(site, -spin);
                }
            }
        }
    }

    fn is_reversible(&self) -> bool {
        !matches!(self.scheme, UpdateScheme::GlauberSystematicScan)
    }
}
