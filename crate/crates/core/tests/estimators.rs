use mcmc_ci::chain::{run_chain, Kernel};
use mcmc_ci::estimators::{autocov_hat, sigma2_hat, variance_hat, EstimatorReport};
use mcmc_ci::rng::chain_rng;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian AR(1): `X' = ρ X + ε`, `ε ~ N(0, 1)`.
struct Ar1 {
    rho: f64,
}

impl Kernel for Ar1 {
    type State = f64;

    fn step<R: Rng + ?Sized>(&self, x: &mut f64, rng: &mut R) {
        let eps: f64 = StandardNormal.sample(rng);
        *x = self.rho * *x + eps;
    }

    fn is_reversible(&self) -> bool {
        true
    }
}

fn iid_normal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = chain_rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn iid_autocovariances_vanish() {
    let x = iid_normal(200_000, 1);
    let v = variance_hat(&x, 0).unwrap();
    assert!((v - 1.0).abs() < 0.02, "{v}");
    let g0 = autocov_hat(&x, 0, 20, 0).unwrap();
    assert!((g0 - v).abs() < 0.01);
    // sd of a lag-i autocovariance is about 1/sqrt(n)
    for i in 1..=20 {
        let g = autocov_hat(&x, 0, 20, i).unwrap();
        assert!(g.abs() < 5.0 / (200_000f64).sqrt(), "lag {i}: {g}");
    }
    let s2 = sigma2_hat(&x, 0, 20).unwrap();
    assert!((s2 - 1.0).abs() < 0.1, "{s2}");
}

#[test]
fn ar1_estimates_converge() {
    // V = 1/(1 − ρ²), σ² = 1/(1 − ρ)², spectral gap 1 − ρ
    let rho = 0.6;
    let (v, s2, gap) = (1.0 / (1.0 - rho * rho), 1.0 / ((1.0 - rho) * (1.0 - rho)), 1.0 - rho);
    let kernel = Ar1 { rho };
    let seeds = 25;
    let mut rms = Vec::new();
    for n_hat in [20_000usize, 400_000] {
        let reports: Vec<EstimatorReport> = (0..seeds)
            .map(|seed| {
                let trace = run_chain(&kernel, 0.0, |x| *x, n_hat, 100 + seed).unwrap();
                EstimatorReport::from_values(trace.values(), true, 10.0, None).unwrap()
            })
            .collect();
        let avg = |f: &dyn Fn(&EstimatorReport) -> f64| reports.iter().map(f).sum::<f64>() / seeds as f64;
        rms.push(avg(&|r| (r.sigma2_hat / s2 - 1.0).powi(2)).sqrt());
        // flat-window relative sd of σ̂² is about sqrt(2(2k + 1)/(N̂ − t̂₀))
        let r = &reports[0];
        let sd = (2.0 * (2 * r.k + 1) as f64 / (n_hat - r.t0_hat) as f64).sqrt();
        let mean_s2 = avg(&|r| r.sigma2_hat);
        assert!(
            (mean_s2 / s2 - 1.0).abs() < 4.0 * sd / (seeds as f64).sqrt(),
            "sigma2 {mean_s2} vs {s2}"
        );
        let mean_v = avg(&|r| r.v_hat);
        assert!((mean_v / v - 1.0).abs() < 0.05, "V {mean_v} vs {v}");
        if n_hat == 400_000 {
            // f is the slowest eigenfunction, so σ² = V(2/γ − 1) exactly and
            // γ̂ → 2V/σ² = 2γ/(2 − γ)
            let ratio = 2.0 * v / s2;
            assert!((ratio - 2.0 * gap / (2.0 - gap)).abs() < 1e-12);
            let med_gap = median(reports.iter().map(|r| r.gamma_hat).collect());
            assert!((med_gap / ratio - 1.0).abs() < 0.1, "{med_gap} vs {ratio}");
        }
    }
    assert!(rms[1] < 0.6 * rms[0], "{rms:?}");
}

proptest! {
    #[test]
    fn variance_is_shift_invariant_and_quadratic(
        xs in prop::collection::vec(-50.0f64..50.0, 40..200),
        shift in -1e3f64..1e3,
        scale in 0.1f64..10.0,
    ) {
        let v = variance_hat(&xs, 3).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
        prop_assert!((variance_hat(&shifted, 3).unwrap() - v).abs() <= 1e-8 * (1.0 + v));
        prop_assert!((variance_hat(&scaled, 3).unwrap() - scale * scale * v).abs() <= 1e-9 * (1.0 + scale * scale * v));
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn sigma2_is_shift_invariant_and_quadratic(
        xs in prop::collection::vec(-5.0f64..5.0, 60..300),
        shift in -100.0f64..100.0,
        scale in 0.1f64..10.0,
        k in 1usize..8,
    ) {
        let s = sigma2_hat(&xs, 5, k).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
        let tol = 1e-9 * (1.0 + s.abs()) * (1.0 + shift.abs());
        prop_assert!((sigma2_hat(&shifted, 5, k).unwrap() - s).abs() <= tol);
        prop_assert!((sigma2_hat(&scaled, 5, k).unwrap() - scale * scale * s).abs() <= 1e-9 * (1.0 + scale * scale * s.abs()));
    }

    #[test]
    fn burn_in_discards_prefix(
        xs in prop::collection::vec(-5.0f64..5.0, 50..150),
        t0 in 0usize..30,
    ) {
        let tail = xs[t0..].to_vec();
        prop_assert_eq!(variance_hat(&xs, t0).unwrap(), variance_hat(&tail, 0).unwrap());
        prop_assert_eq!(sigma2_hat(&xs, t0, 4).unwrap(), sigma2_hat(&tail, 0, 4).unwrap());
    }
}
