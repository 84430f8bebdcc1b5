use std::collections::BTreeMap;

use mcmc_ci::chain::{run_chain, Kernel};
use mcmc_ci::dag::{exact_posterior, generate_dataset, mh_dag_kernel, BinaryDataset, BmaConfig, Dag};
use mcmc_ci::rng::chain_rng;
use mcmc_ci::spin::{SpinConfig, SpinKernel, SpinModel, UpdateScheme};

const SCHEMES: [UpdateScheme; 3] = [
    UpdateScheme::GlauberRandomScan,
    UpdateScheme::GlauberSystematicScan,
    UpdateScheme::MetropolisSpinFlip,
];

/// Boltzmann weights `exp(β Σ_{i~j} ω_i ω_j + h Σ ω_i)` on a 3x3 torus,
/// computed from an independent edge list.
fn torus_boltzmann(beta: f64, h: f64) -> Vec<f64> {
    let side = 3;
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            edges.push((i, r * side + (c + 1) % side));
            edges.push((i, ((r + 1) % side) * side + c));
        }
    }
    let n = side * side;
    let weights: Vec<f64> = (0..1usize << n)
        .map(|idx| {
            let w = SpinConfig::from_index(n, idx);
            let s = |i: usize| w.get(i) as f64;
            let pair: f64 = edges.iter().map(|&(i, j)| s(i) * s(j)).sum();
            (beta * pair + h * w.magnetization() as f64).exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

#[test]
fn ising_2d_kernels_preserve_boltzmann_law() {
    for (beta, h) in [(0.4, 0.0), (0.9, -0.3)] {
        let pi = torus_boltzmann(beta, h);
        let model = SpinModel::ising_2d(3, beta, h).unwrap();
        for scheme in SCHEMES {
            let kernel = SpinKernel::new(model.clone(), scheme);
            let mut next = vec![0.0; pi.len()];
            for (idx, &p) in pi.iter().enumerate() {
                let law = kernel.transitions(&SpinConfig::from_index(9, idx)).unwrap();
                let total: f64 = law.iter().map(|&(_, q)| q).sum();
                assert!((total - 1.0).abs() < 1e-12);
                for (j, q) in law {
                    next[j] += p * q;
                }
            }
            let worst = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-14, "{scheme:?} beta={beta} h={h}: {worst:e}");
        }
    }
}

#[test]
fn long_run_magnetization_frequencies() {
    // Curie-Weiss on 6 sites: π(M) ∝ C(6, k) exp(β (M² − 6)/12 + h M)
    let (n, beta, h) = (6usize, 0.8, 0.2);
    let mut pi = BTreeMap::new();
    for k in 0..=n {
        let m = 2.0 * k as f64 - n as f64;
        let binom = (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        pi.insert(
            m as i64,
            binom * (beta * (m * m - n as f64) / (2.0 * n as f64) + h * m).exp(),
        );
    }
    let z: f64 = pi.values().sum();
    let model = SpinModel::curie_weiss(n, beta, h).unwrap();
    for scheme in SCHEMES {
        let kernel = SpinKernel::new(model.clone(), scheme);
        let steps = 400_000;
        let trace = run_chain(&kernel, SpinConfig::all_up(n), |w| w.magnetization() as f64, steps, 7).unwrap();
        let mut counts = BTreeMap::new();
        for &m in trace.values() {
            *counts.entry(m as i64).or_insert(0usize) += 1;
        }
        for (&m, &w) in &pi {
            let p = w / z;
            let f = *counts.get(&m).unwrap_or(&0) as f64 / steps as f64;
            // generous: autocorrelated samples, a few hundred effective sweeps
            assert!((f - p).abs() < 0.02 + 0.1 * p, "{scheme:?} M={m}: {f} vs {p}");
        }
    }
}

fn three_columns(data: &BinaryDataset) -> BinaryDataset {
    let rows = data.rows().iter().map(|r| r[..3].to_vec()).collect();
    BinaryDataset::new(3, rows).unwrap()
}

#[test]
fn dag_kernel_preserves_exact_posterior() {
    let data = three_columns(&generate_dataset(12, &mut chain_rng(9)));
    let cfg = BmaConfig::new(4.0).unwrap();
    let posterior = exact_posterior(&data, &cfg).unwrap();
    assert_eq!(posterior.len(), 25);
    let pi: BTreeMap<Dag, f64> = posterior.into_iter().collect();
    let kernel = mh_dag_kernel(data, cfg);
    let mut next: BTreeMap<Dag, f64> = BTreeMap::new();
    for (g, &p) in &pi {
        for (h, q) in kernel.transitions(g) {
            // detailed balance
            let back = kernel
                .transitions(&h)
                .into_iter()
                .find(|(k, _)| k == g)
                .map_or(0.0, |(_, r)| r);
            if &h != g {
                assert!((p * q - pi[&h] * back).abs() < 1e-14);
            }
            *next.entry(h).or_default() += p * q;
        }
    }
    for (g, p) in &pi {
        assert!((next[g] - p).abs() < 1e-14);
    }
    assert!(kernel.is_reversible());
}
