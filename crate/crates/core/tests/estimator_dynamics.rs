//! End-to-end estimator checks on simulated dynamics with known spectra.

use genspec_core::estimator::{
    fit_bundle, fit_dual, fit_primal, fit_primal_with_matrix, Basis, FitConfig, Observable,
};
use genspec_core::features::{DictionarySpec, KernelSpec};
use genspec_core::quadrature::{bundle_matrix, nonuniform_weights, trapezoid_weights};
use genspec_core::simulate::{euler_maruyama, OuSpec, ProcessSpec};
use genspec_core::trajectory::{Trajectory, TrajectoryBundle};
use ndarray::{array, Array2};

fn ou_trajectory(n: usize, dt: f64, seed: u64) -> Trajectory {
    let spec = OuSpec::new(array![[-1.0]], array![[2.0f64.sqrt()]], dt, 0, seed).unwrap();
    euler_maruyama(&ProcessSpec::Ou(spec), n, 1).unwrap()
}

fn linear_dict() -> DictionarySpec {
    DictionarySpec::Monomials { dim: 1, max_degree: 1 }
}

fn cfg(mu: f64, dt: f64, ell: usize, gamma: f64, rank: usize) -> FitConfig {
    FitConfig {
        gamma,
        rank,
        weights: trapezoid_weights(mu, dt, ell).unwrap(),
        self_adjoint: true,
    }
}

#[test]
fn ou_primal_recovers_leading_eigenvalues() {
    let traj = ou_trajectory(10_000, 0.01, 6);
    let cfg = cfg(1.0, 0.01, 1000, 1e-8, 2);
    let model = fit_primal(&linear_dict(), &traj.states().view(), &cfg).unwrap();
    // generator acts exactly on span{1, x}: L·1 = 0, L·x = −x; a T = 100
    // trajectory of a unit-relaxation-time process carries ~100 effective
    // samples, so the Monte-Carlo tolerance is 0.2
    assert!(
        model.eigenvalues[0].norm() < 0.05,
        "λ̂₁ = {}",
        model.eigenvalues[0]
    );
    assert!(
        (model.eigenvalues[1].re + 1.0).abs() < 0.2,
        "λ̂₂ = {}",
        model.eigenvalues[1]
    );
}

#[test]
fn primal_dual_equivalence_linear_kernel() {
    let traj = ou_trajectory(2_000, 0.01, 11);
    let dict = DictionarySpec::Monomials { dim: 1, max_degree: 2 };
    let cfg = cfg(1.0, 0.01, 1000, 1e-6, 3);
    let primal = fit_primal(&dict, &traj.states().view(), &cfg).unwrap();
    let kernel = KernelSpec::Dictionary { spec: dict };
    let dual = fit_dual(&kernel, &traj.states().view(), &cfg).unwrap();
    let mut p: Vec<f64> = primal.eigenvalues.iter().map(|v| v.re).collect();
    let mut d: Vec<f64> = dual.eigenvalues.iter().map(|v| v.re).collect();
    p.sort_by(|a, b| b.partial_cmp(a).unwrap());
    d.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (a, b) in p.iter().zip(d.iter()) {
        assert!((a - b).abs() < 1e-6, "primal {a} vs dual {b}");
    }
}

#[test]
fn shift_consistency() {
    let traj = ou_trajectory(20_000, 0.01, 13);
    let mut spectra = Vec::new();
    for &mu in &[0.5f64, 2.0] {
        let ell = (10.0 / (mu * 0.01)).ceil() as usize;
        let c = cfg(mu, 0.01, ell, 1e-8, 2);
        let model = fit_primal(&linear_dict(), &traj.states().view(), &c).unwrap();
        spectra.push(model.eigenvalues.iter().map(|v| v.re).collect::<Vec<_>>());
    }
    // the generator spectrum does not depend on the shift; only the map does.
    // Each shift weighs the same noisy correlations differently, so the two
    // estimates agree only to Monte-Carlo accuracy
    for (a, b) in spectra[0].iter().zip(spectra[1].iter()) {
        assert!((a - b).abs() < 0.35, "mu=0.5 gives {a}, mu=2 gives {b}");
    }
}

#[test]
fn rank_monotonicity() {
    let traj = ou_trajectory(5_000, 0.01, 17);
    let dict = DictionarySpec::Monomials { dim: 1, max_degree: 3 };
    let c2 = cfg(1.0, 0.01, 1000, 1e-6, 2);
    let c3 = cfg(1.0, 0.01, 1000, 1e-6, 3);
    let m2 = fit_primal(&dict, &traj.states().view(), &c2).unwrap();
    let m3 = fit_primal(&dict, &traj.states().view(), &c3).unwrap();
    if m2.singular_values[1] - m2.singular_values[2] < 1e-3 {
        // whitened spectrum too flat for subspace stability
        return;
    }
    // Rayleigh-Ritz values shift when the subspace grows, so nesting is
    // approximate, not exact
    for lam2 in &m2.eigenvalues {
        let matched = m3
            .eigenvalues
            .iter()
            .any(|lam3| (lam2 - lam3).norm() < 0.02);
        assert!(matched, "rank-2 eigenvalue {lam2} missing from rank-3 fit");
    }
}

#[test]
fn forecast_matches_ou_conditional_mean() {
    let traj = ou_trajectory(10_000, 0.01, 19);
    let cfg = cfg(1.0, 0.01, 1000, 1e-8, 2);
    let model = fit_primal(&linear_dict(), &traj.states().view(), &cfg).unwrap();
    let obs = Observable::Coordinate { index: 0 };
    let x0 = array![1.0];
    for &t in &[0.0, 0.5, 1.0] {
        let pred = model.forecast(&obs, &x0.view(), t).unwrap();
        let exact = (-t as f64).exp();
        assert!((pred - exact).abs() < 0.1, "t={t}: {pred} vs {exact}");
    }
    // ergodic limit: the conditional mean decays to the stationary mean 0
    let far = model.forecast(&obs, &x0.view(), 50.0).unwrap();
    assert!(far.abs() < 0.1, "t→∞ forecast {far}");
}

#[test]
fn bundle_single_trajectory_consistency() {
    // one trajectory on a non-uniform grid: the bundle fit must agree with
    // the explicit-matrix fit on the same stacked sample to round-off
    let times = vec![0.0, 0.05, 0.15, 0.3, 0.5, 0.75, 1.05, 1.4, 1.8, 2.25];
    let n_grid = times.len();
    let states = Array2::from_shape_fn((n_grid, 1), |(i, _)| ((i * i) as f64 * 0.13).sin());
    let traj = Trajectory::new(
        states.clone(),
        ndarray::Array1::from_vec(times.clone()),
        Default::default(),
    )
    .unwrap();
    let bundle = TrajectoryBundle::new(vec![traj]).unwrap();
    let weights = nonuniform_weights(1.0, &times).unwrap();
    // a single trajectory anchors every pair at t₀, so the cross-covariance
    // has rank 1; request rank 1 to keep the eigenvalue finite
    let cfg = FitConfig {
        gamma: 1e-6,
        rank: 1,
        weights: weights.clone(),
        self_adjoint: false,
    };
    let dict = linear_dict();
    let via_bundle = fit_bundle(&bundle, &Basis::Dictionary { dict: dict.clone() }, &cfg).unwrap();
    let m = bundle_matrix(&weights, 1).unwrap();
    let direct = fit_primal_with_matrix(&dict, &states.view(), &m, &cfg).unwrap();
    for (a, b) in via_bundle.eigenvalues.iter().zip(direct.eigenvalues.iter()) {
        assert!((a - b).norm() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn dual_gaussian_on_ou_leading_eigenvalue() {
    let traj = ou_trajectory(20_000, 0.01, 23);
    let sub = traj.subsample(10).unwrap();
    // subsampled: n=2000 at Δt=0.1
    let cfg = FitConfig {
        gamma: 1e-5,
        rank: 3,
        weights: trapezoid_weights(1.0, 0.1, 100).unwrap(),
        self_adjoint: true,
    };
    let kernel = KernelSpec::Gaussian { length_scale: 1.0 };
    let model = fit_dual(&kernel, &sub.states().view(), &cfg).unwrap();
    assert!(
        model.eigenvalues[0].norm() < 0.05,
        "λ̂₁ = {}",
        model.eigenvalues[0]
    );
    for lam in &model.eigenvalues {
        assert_eq!(lam.im, 0.0);
    }
    // normalization contract u_iᵀ K K_γ u_i = 1 is internal; spot-check the
    // public contract instead: unit empirical norm of ĥᵢ
    let h = model.eval_right(&sub.states().view()).unwrap();
    for i in 0..model.rank() {
        let rms =
            (h.column(i).iter().map(|v| v.norm_sqr()).sum::<f64>() / sub.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-8, "rms {rms}");
    }
}
