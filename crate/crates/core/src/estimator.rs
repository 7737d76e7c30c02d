//! Reduced-rank regression onto the resolvent of the generator, in primal
//! (feature-space) and dual (sample-space) form.
//!
//! Both fits solve the same whitened generalized eigenproblem: regress the
//! quadrature-weighted combination of lagged feature pairs (an approximation
//! of `R_μ = (μI − L)⁻¹`) onto the features, truncate to rank `r`, and read
//! eigenvalues of the generator off the resolvent eigenvalues via
//! `λ̂ = μ − 1/ν̂`. The single-lag transfer-operator baseline runs through
//! the same code path with degenerate weights and the map `λ̂ = ln(ν̂)/Δt`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{
    evaluate_dictionary, gram_matrix, kernel_matrix, DictionarySpec, KernelSpec,
};
use crate::linalg;
use crate::quadrature::{
    bundle_matrix, symmetrize, toeplitz_matrix, CombinationMatrix, LaplaceWeights, WeightMode,
};
use crate::trajectory::TrajectoryBundle;

/// Resolvent eigenvalues smaller than this are reported as the infinite
/// sentinel instead of being inverted.
pub const NU_SENTINEL: f64 = 1e-14;

/// Hyperparameters of a fit.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitConfig {
    /// Tikhonov regularization added to the feature covariance.
    pub gamma: f64,
    /// Rank of the reduced-rank estimator.
    pub rank: usize,
    /// Laplace quadrature weights; also carry the shift `μ` and the mode.
    pub weights: LaplaceWeights,
    /// Symmetrize the combination matrix and solve symmetric eigenproblems,
    /// forcing an exactly real spectrum (time-reversible dynamics).
    pub self_adjoint: bool,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be positive"));
        }
        if self.rank < 1 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        Ok(())
    }

    /// Shift `μ` carried by the weights.
    pub fn mu(&self) -> f64 {
        self.weights.mu
    }
}

/// Feature representation a model was fitted in.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum Basis {
    /// Explicit dictionary; eigenfunction coefficients live in feature space.
    Dictionary { dict: DictionarySpec },
    /// Kernel; eigenfunction coefficients live in sample space and expand
    /// through `k(x_i, ·)`.
    Kernel { kernel: KernelSpec },
}

/// Fitted spectral decomposition of the generator.
///
/// Eigenvalues are sorted by descending real part (ties by descending
/// imaginary part); infinite sentinels (resolvent eigenvalue at numerical
/// zero) sort last. Right eigenfunctions `ĥᵢ` are normalized to unit
/// empirical L² norm with the largest-modulus training value real positive;
/// left eigenfunctions `ĝᵢ` are scaled so `⟨ĝᵢ, ĥᵢ⟩_emp = 1`, which makes
/// the spectral forecast formula directly usable. Biorthogonality across
/// `i ≠ j` is approximate and checked by tests, not enforced.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    /// Generator eigenvalues `λ̂ᵢ`.
    pub eigenvalues: Vec<Complex64>,
    /// Resolvent eigenvalues `ν̂ᵢ` (before the eigenvalue map).
    pub resolvent_eigenvalues: Vec<Complex64>,
    /// Whitened singular values `σ̂₁..σ̂ᵣ₊₁` (descending).
    pub singular_values: Vec<f64>,
    /// Metric distortions `η̂ᵢ = ‖ĥᵢ‖_ℋ / ‖Ŝĥᵢ‖`.
    pub metric_distortions: Vec<f64>,
    pub config: FitConfig,
    pub basis: Basis,
    /// Training states (rowwise); needed to evaluate dual eigenfunctions and
    /// empirical inner products.
    pub training_states: Array2<f64>,
    /// SHA-256 of the training states (row-major little-endian f64 bytes).
    pub data_sha256: String,
    /// Coefficients of `ĥᵢ` (columns), in feature space (primal) or sample
    /// space (dual).
    pub right_coeffs: Array2<Complex64>,
    /// Coefficients of `ĝᵢ` (columns).
    pub left_coeffs: Array2<Complex64>,
}

/// Map a resolvent eigenvalue to a generator eigenvalue: `μ − 1/ν` for the
/// quadrature modes, principal `ln(ν)/Δt` for the transfer-operator mode.
/// `|ν|` below [`NU_SENTINEL`] yields the infinite sentinel.
pub fn eigenvalue_map(nu: Complex64, w: &LaplaceWeights) -> Complex64 {
    match w.mode {
        WeightMode::TransferOperator => {
            let dt = w.nodes[0];
            if nu.norm() < NU_SENTINEL {
                log::warn!("transfer-operator eigenvalue at numerical zero");
                return Complex64::new(f64::NEG_INFINITY, 0.0);
            }
            if nu.im == 0.0 && nu.re < 0.0 {
                log::warn!("transfer-operator eigenvalue on the log branch cut");
            }
            nu.ln() / dt
        }
        _ => {
            if nu.norm() < NU_SENTINEL {
                log::warn!("resolvent eigenvalue at numerical zero; reporting infinite sentinel");
                return Complex64::new(f64::INFINITY, 0.0);
            }
            Complex64::new(w.mu, 0.0) - Complex64::new(1.0, 0.0) / nu
        }
    }
}

/// Fit with an explicit dictionary on a single trajectory sample, building
/// the banded combination matrix from the config's weights.
pub fn fit_primal(
    dict: &DictionarySpec,
    states: &ArrayView2<f64>,
    cfg: &FitConfig,
) -> Result<SpectralModel> {
    let m = single_trajectory_matrix(cfg, states.nrows())?;
    fit_primal_with_matrix(dict, states, &m, cfg)
}

/// Fit with a kernel on a single trajectory sample, building the banded
/// combination matrix from the config's weights.
pub fn fit_dual(
    kernel: &KernelSpec,
    states: &ArrayView2<f64>,
    cfg: &FitConfig,
) -> Result<SpectralModel> {
    let m = single_trajectory_matrix(cfg, states.nrows())?;
    fit_dual_with_matrix(kernel, states, &m, cfg)
}

/// Fit a bundle of trajectories sharing a (possibly non-uniform) time grid,
/// using the block combination matrix and the grid-major sample stacking
/// (all trajectories at `t₀`, then all at `t₁`, …).
pub fn fit_bundle(
    bundle: &TrajectoryBundle,
    basis: &Basis,
    cfg: &FitConfig,
) -> Result<SpectralModel> {
    cfg.validate()?;
    let grid = bundle.trajectories()[0].times().as_slice().unwrap();
    if cfg.weights.nodes.len() != grid.len()
        || cfg
            .weights
            .nodes
            .iter()
            .zip(grid.iter())
            .any(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Err(Error::invalid(
            "quadrature nodes do not match the bundle's time grid",
        ));
    }
    let mut m = bundle_matrix(&cfg.weights, bundle.count())?;
    if cfg.self_adjoint {
        m = symmetrize(&m);
    }
    let states = bundle.stacked_states();
    match basis {
        Basis::Dictionary { dict } => fit_primal_with_matrix(dict, &states.view(), &m, cfg),
        Basis::Kernel { kernel } => fit_dual_with_matrix(kernel, &states.view(), &m, cfg),
    }
}

fn single_trajectory_matrix(cfg: &FitConfig, n: usize) -> Result<CombinationMatrix> {
    cfg.validate()?;
    toeplitz_matrix(&cfg.weights, n, cfg.self_adjoint)
}

/// Primal fit against an explicit combination matrix (exposed for bundle
/// consistency checks and custom aggregation schemes).
pub fn fit_primal_with_matrix(
    dict: &DictionarySpec,
    states: &ArrayView2<f64>,
    m: &CombinationMatrix,
    cfg: &FitConfig,
) -> Result<SpectralModel> {
    cfg.validate()?;
    let n = states.nrows();
    if m.size() != n {
        return Err(Error::invalid("combination matrix size does not match sample"));
    }
    let z = evaluate_dictionary(dict, states)?;
    let nf = z.nrows();
    if cfg.rank > nf.min(n) {
        return Err(Error::invalid(format!(
            "rank {} exceeds min(features {nf}, samples {n})",
            cfg.rank
        )));
    }
    let n_f = n as f64;
    // Z_∫ = Z·M, H = (1/n)·Z_∫·Zᵀ, C_γ = (1/n)·Z·Zᵀ + γI
    let z_int = m.apply_right(&z);
    let h = z_int.dot(&z.t()) / n_f;
    let mut c_g = z.dot(&z.t()) / n_f;
    for i in 0..nf {
        c_g[[i, i]] += cfg.gamma;
    }
    // whitened problem H·Hᵀ v = σ̂² C_γ v (always symmetric)
    let a = h.dot(&h.t());
    let k = (cfg.rank + 1).min(nf);
    let (sig2, v) = linalg::generalized_symmetric_topk(&a, &c_g, k)?;
    let singular_values = collect_singular(&sig2, cfg.rank);
    let vr = v.slice(s![.., ..cfg.rank]).to_owned();
    let hvr = h.dot(&vr);
    let t = vr.t().dot(&hvr);
    let (nus, wr, wl) = small_eigentriples(&t, cfg.self_adjoint)?;
    let right = real_complex_matmul(&vr, &wr);
    let left = real_complex_matmul(&hvr, &wl);
    // training values through the dictionary
    let h_train = complex_t_dot(&z, &right);
    let g_train = complex_t_dot(&z, &left);
    assemble_model(
        nus,
        right,
        left,
        h_train,
        g_train,
        singular_values,
        cfg,
        Basis::Dictionary { dict: dict.clone() },
        states,
        None,
    )
}

/// Dual fit against an explicit combination matrix.
pub fn fit_dual_with_matrix(
    kernel: &KernelSpec,
    states: &ArrayView2<f64>,
    m: &CombinationMatrix,
    cfg: &FitConfig,
) -> Result<SpectralModel> {
    cfg.validate()?;
    let n = states.nrows();
    if m.size() != n {
        return Err(Error::invalid("combination matrix size does not match sample"));
    }
    if cfg.rank > n {
        return Err(Error::invalid(format!(
            "rank {} exceeds sample size {n}",
            cfg.rank
        )));
    }
    let k_mat = gram_matrix(kernel, states, true)?;
    // K_∫ = M·K·Mᵀ is symmetric for symmetric K regardless of M
    let k_int_raw = m.apply_right_t(&m.apply_left(&k_mat));
    let k_int = (&k_int_raw + &k_int_raw.t()) * 0.5;
    // K and K_γ = K + γI commute, so the generalized problem
    // K_∫ K u = σ̂² K_γ u is equivalent to the symmetric problem
    // (G K_∫ G) y = σ̂² y with G = K^{1/2} K_γ^{−1/2}, and
    // u = K_γ⁻¹ K_∫ G y / σ̂².
    let (lam, q) = linalg::eigh_sym(&k_mat)?;
    let gamma = cfg.gamma;
    let g_diag = lam.mapv(|l| {
        let lc = l.max(0.0);
        (lc / (lc + gamma)).sqrt()
    });
    let mut q_scaled = q.clone();
    for (j, mut col) in q_scaled.columns_mut().into_iter().enumerate() {
        col *= g_diag[j];
    }
    let g = q_scaled.dot(&q.t());
    let s_raw = g.dot(&k_int.dot(&g));
    let s_mat = (&s_raw + &s_raw.t()) * 0.5;
    let (vals, vecs) = linalg::eigh_sym(&s_mat)?;
    let k_top = (cfg.rank + 1).min(n);
    let mut sig2 = Array1::zeros(k_top);
    for j in 0..k_top {
        sig2[j] = vals[n - 1 - j];
    }
    let singular_values = collect_singular(&sig2, cfg.rank);
    // recover and normalize u_i
    let mut ur = Array2::zeros((n, cfg.rank));
    for i in 0..cfg.rank {
        let s2 = sig2[i];
        if s2 <= NU_SENTINEL {
            return Err(Error::numerical(
                "whitened operator is rank deficient at the requested rank; \
                 reduce the rank or the regularization",
            ));
        }
        let y = vecs.column(n - 1 - i).to_owned();
        let w = k_int.dot(&g.dot(&y));
        // K_γ⁻¹ via the eigenbasis of K
        let alpha = q.t().dot(&w);
        let alpha = Array1::from_shape_fn(n, |j| alpha[j] / (lam[j] + gamma));
        let u = q.dot(&alpha) / s2;
        // normalize uᵀ K K_γ u = 1
        let ku = k_mat.dot(&u);
        let kgu = &ku + &(&u * gamma);
        let norm2 = ku.dot(&kgu);
        if !(norm2 > 0.0) {
            return Err(Error::numerical("dual eigenvector has zero K-norm"));
        }
        let u = u / norm2.sqrt();
        ur.column_mut(i).assign(&u);
    }
    let vr = k_mat.dot(&ur);
    let mvr = m.apply_left(&vr);
    let t = vr.t().dot(&mvr);
    let (nus, wr, wl) = small_eigentriples(&t, cfg.self_adjoint)?;
    let right = real_complex_matmul(&ur, &wr);
    let mtvr = m.apply_left_t(&vr);
    let mut left = real_complex_matmul(&mtvr, &wl);
    for (i, &nu) in nus.iter().enumerate() {
        if nu.norm() >= NU_SENTINEL {
            let inv = Complex64::new(1.0, 0.0) / nu.conj();
            left.column_mut(i).mapv_inplace(|v| v * inv);
        } else {
            log::warn!("skipping 1/ν̄ scaling of left eigenfunction {i}: ν at numerical zero");
        }
    }
    // training values: ĥ(x_j) = √n (K a)_j under the sampling-operator
    // convention Ŝ*a = n^{-1/2} Σ a_k k(x_k, ·)
    let sqrt_n = n_f_sqrt(n);
    let h_train = real_complex_matmul(&k_mat, &right).mapv(|v| v * sqrt_n);
    let g_train = real_complex_matmul(&k_mat, &left).mapv(|v| v * sqrt_n);
    assemble_model(
        nus,
        right,
        left,
        h_train,
        g_train,
        singular_values,
        cfg,
        Basis::Kernel { kernel: kernel.clone() },
        states,
        Some(&k_mat),
    )
}

fn n_f_sqrt(n: usize) -> f64 {
    (n as f64).sqrt()
}

fn collect_singular(sig2: &Array1<f64>, rank: usize) -> Vec<f64> {
    let mut out = vec![0.0; rank + 1];
    for (i, &s2) in sig2.iter().enumerate().take(rank + 1) {
        out[i] = s2.max(0.0).sqrt();
    }
    out
}

/// Eigentriples of the small projected matrix: symmetric route when
/// self-adjoint (exactly real spectrum, left = right), two-sided dense
/// eigensolve otherwise.
fn small_eigentriples(
    t: &Array2<f64>,
    self_adjoint: bool,
) -> Result<(Array1<Complex64>, Array2<Complex64>, Array2<Complex64>)> {
    if self_adjoint {
        let t_sym = (t + &t.t()) * 0.5;
        let (nus, right, left) = linalg::eigh_two_sided(&t_sym)?;
        Ok((nus, right, left))
    } else {
        linalg::eig_two_sided(t)
    }
}

/// Real matrix times complex matrix via two real products.
fn real_complex_matmul(a: &Array2<f64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let br = b.mapv(|v| v.re);
    let bi = b.mapv(|v| v.im);
    let pr = a.dot(&br);
    let pi = a.dot(&bi);
    Array2::from_shape_fn(pr.raw_dim(), |(i, j)| Complex64::new(pr[[i, j]], pi[[i, j]]))
}

/// `Aᵀ · B` for real `A`, complex `B`.
fn complex_t_dot(a: &Array2<f64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let at = a.t().as_standard_layout().to_owned();
    real_complex_matmul(&at, b)
}

#[allow(clippy::too_many_arguments)]
fn assemble_model(
    nus: Array1<Complex64>,
    mut right: Array2<Complex64>,
    mut left: Array2<Complex64>,
    mut h_train: Array2<Complex64>,
    mut g_train: Array2<Complex64>,
    singular_values: Vec<f64>,
    cfg: &FitConfig,
    basis: Basis,
    states: &ArrayView2<f64>,
    k_mat: Option<&Array2<f64>>,
) -> Result<SpectralModel> {
    let n = states.nrows();
    let r = nus.len();
    let n_f = n as f64;
    let mut metric_distortions = Vec::with_capacity(r);
    for i in 0..r {
        // unit empirical norm, largest-modulus training value real positive
        let mut imax = 0;
        let mut vmax = 0.0;
        let mut sumsq = 0.0;
        for (j, v) in h_train.column(i).iter().enumerate() {
            let a = v.norm();
            sumsq += a * a;
            if a > vmax {
                vmax = a;
                imax = j;
            }
        }
        let rms = (sumsq / n_f).sqrt();
        if rms == 0.0 {
            return Err(Error::numerical("eigenfunction vanishes on sample"));
        }
        let phase = h_train[[imax, i]] / vmax;
        let scale = Complex64::new(1.0, 0.0) / (phase * rms);
        h_train.column_mut(i).mapv_inplace(|v| v * scale);
        right.column_mut(i).mapv_inplace(|v| v * scale);
        // biorthonormalize: ⟨ĝᵢ, ĥᵢ⟩_emp = 1
        let mut ip = Complex64::new(0.0, 0.0);
        for (gv, hv) in g_train.column(i).iter().zip(h_train.column(i).iter()) {
            ip += gv.conj() * hv;
        }
        ip /= n_f;
        if ip.norm() > 1e-12 {
            let adj = Complex64::new(1.0, 0.0) / ip.conj();
            g_train.column_mut(i).mapv_inplace(|v| v * adj);
            left.column_mut(i).mapv_inplace(|v| v * adj);
        } else {
            log::warn!("left/right eigenfunction pair {i} is numerically orthogonal; \
                        skipping biorthonormalization");
        }
        // metric distortion η̂ᵢ = ‖ĥᵢ‖_ℋ / ‖Ŝĥᵢ‖; the empirical norm is 1
        // after the rescaling above.
        let rkhs_norm = match k_mat {
            None => right.column(i).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(),
            Some(k) => {
                let a = right.column(i).to_owned();
                let ar = a.mapv(|v| v.re);
                let ai = a.mapv(|v| v.im);
                let q = ar.dot(&k.dot(&ar)) + ai.dot(&k.dot(&ai));
                q.max(0.0).sqrt()
            }
        };
        if !(rkhs_norm > 0.0) || !rkhs_norm.is_finite() {
            return Err(Error::numerical("eigenfunction has degenerate RKHS norm"));
        }
        metric_distortions.push(rkhs_norm);
    }
    // eigenvalue map and spectral sort
    let lambdas: Vec<Complex64> = nus.iter().map(|&nu| eigenvalue_map(nu, &cfg.weights)).collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        let sa = !lambdas[a].re.is_finite();
        let sb = !lambdas[b].re.is_finite();
        sa.cmp(&sb)
            .then(lambdas[b].re.partial_cmp(&lambdas[a].re).unwrap_or(std::cmp::Ordering::Equal))
            .then(lambdas[b].im.partial_cmp(&lambdas[a].im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let pick = |m: &Array2<Complex64>| {
        let mut out = Array2::zeros(m.raw_dim());
        for (dst, &src) in order.iter().enumerate() {
            out.column_mut(dst).assign(&m.column(src));
        }
        out
    };
    let eigenvalues: Vec<Complex64> = order.iter().map(|&i| lambdas[i]).collect();
    let resolvent_eigenvalues: Vec<Complex64> = order.iter().map(|&i| nus[i]).collect();
    let metric_distortions: Vec<f64> = order.iter().map(|&i| metric_distortions[i]).collect();
    let right = pick(&right);
    let left = pick(&left);
    Ok(SpectralModel {
        eigenvalues,
        resolvent_eigenvalues,
        singular_values,
        metric_distortions,
        config: cfg.clone(),
        basis,
        training_states: states.to_owned(),
        data_sha256: states_sha256(states),
        right_coeffs: right,
        left_coeffs: left,
    })
}

/// SHA-256 of a rowwise state matrix (row-major little-endian f64 bytes).
pub fn states_sha256(states: &ArrayView2<f64>) -> String {
    let mut hasher = Sha256::new();
    for v in states.iter() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl SpectralModel {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// "primal" or "dual".
    pub fn mode(&self) -> &'static str {
        match self.basis {
            Basis::Dictionary { .. } => "primal",
            Basis::Kernel { .. } => "dual",
        }
    }

    /// Metric distortion `η̂ᵢ` (0-based index).
    pub fn metric_distortion(&self, i: usize) -> Result<f64> {
        self.metric_distortions
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("eigenfunction index {i} out of range")))
    }

    /// The (r+1)-th whitened singular value; 0 when the problem rank is ≤ r.
    pub fn singular_tail(&self) -> f64 {
        *self.singular_values.last().unwrap()
    }

    /// Evaluate right eigenfunctions `ĥᵢ` at a batch of states: returns a
    /// `batch × r` matrix.
    pub fn eval_right(&self, x: &ArrayView2<f64>) -> Result<Array2<Complex64>> {
        self.eval(x, &self.right_coeffs)
    }

    /// Evaluate left eigenfunctions `ĝᵢ` at a batch of states.
    pub fn eval_left(&self, x: &ArrayView2<f64>) -> Result<Array2<Complex64>> {
        self.eval(x, &self.left_coeffs)
    }

    fn eval(&self, x: &ArrayView2<f64>, coeffs: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        match &self.basis {
            Basis::Dictionary { dict } => {
                let z = evaluate_dictionary(dict, x)?;
                Ok(complex_t_dot(&z, coeffs))
            }
            Basis::Kernel { kernel } => {
                // ĥ(x) = n^{-1/2} Σ_k a_k k(x_k, x)
                let kx = kernel_matrix(kernel, x, &self.training_states.view())?;
                let scale = 1.0 / n_f_sqrt(self.training_states.nrows());
                Ok(real_complex_matmul(&kx, coeffs).mapv(|v| v * scale))
            }
        }
    }

    /// Spectral forecast `E[h(X_t) | X_0 = x0] ≈ Σᵢ e^{λ̂ᵢt} ⟨ĝᵢ,h⟩_emp ĥᵢ(x0)`,
    /// with the inner product taken empirically over the training sample.
    /// Infinite-sentinel eigenvalues are skipped with a warning. Self-adjoint
    /// models error if the residual imaginary part exceeds 1e-10; otherwise
    /// the real part is returned.
    pub fn forecast(&self, h: &Observable, x0: &ArrayView1<f64>, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::invalid("forecast time must be non-negative"));
        }
        let h_vals = h.evaluate(&self.training_states.view())?;
        let g_train = self.eval_left(&self.training_states.view())?;
        let x0m = x0.insert_axis(Axis(0));
        let h_at_x0 = self.eval_right(&x0m)?;
        let n_f = self.training_states.nrows() as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..self.rank() {
            let lam = self.eigenvalues[i];
            if !lam.re.is_finite() {
                log::warn!("forecast skips infinite-sentinel eigenvalue {i}");
                continue;
            }
            let mut ip = Complex64::new(0.0, 0.0);
            for (gv, &hv) in g_train.column(i).iter().zip(h_vals.iter()) {
                ip += gv.conj() * hv;
            }
            ip /= n_f;
            sum += (lam * t).exp() * ip * h_at_x0[[0, i]];
        }
        if self.config.self_adjoint && sum.im.abs() > 1e-10 {
            return Err(Error::numerical(format!(
                "self-adjoint forecast has residual imaginary part {:.3e}",
                sum.im
            )));
        }
        Ok(sum.re)
    }
}

/// Observable whose conditional expectation is forecast.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// `h(x) = x_j`.
    Coordinate { index: usize },
    /// `h(x) = 1{x_j > threshold}`.
    IndicatorAbove { index: usize, threshold: f64 },
    /// Values of `h` at the training points, in training order.
    Values { values: Vec<f64> },
}

impl Observable {
    /// Values of the observable at a batch of states.
    pub fn evaluate(&self, states: &ArrayView2<f64>) -> Result<Array1<f64>> {
        match self {
            Observable::Coordinate { index } => {
                if *index >= states.ncols() {
                    return Err(Error::invalid(format!(
                        "coordinate {index} out of range for dimension {}",
                        states.ncols()
                    )));
                }
                Ok(states.column(*index).to_owned())
            }
            Observable::IndicatorAbove { index, threshold } => {
                if *index >= states.ncols() {
                    return Err(Error::invalid(format!(
                        "coordinate {index} out of range for dimension {}",
                        states.ncols()
                    )));
                }
                Ok(states
                    .column(*index)
                    .mapv(|v| if v > *threshold { 1.0 } else { 0.0 }))
            }
            Observable::Values { values } => {
                if values.len() != states.nrows() {
                    return Err(Error::invalid(format!(
                        "observable has {} values for {} states",
                        values.len(),
                        states.nrows()
                    )));
                }
                Ok(Array1::from_vec(values.clone()))
            }
        }
    }
}

// --- JSON serialization -----------------------------------------------------

/// Serialized form of a [`SpectralModel`]; field order is fixed so repeated
/// fits serialize byte-identically apart from `timestamp`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelJson {
    pub timestamp: u64,
    pub mode: String,
    pub config: FitConfig,
    pub basis: Basis,
    pub eigenvalues_re: Vec<f64>,
    pub eigenvalues_im: Vec<f64>,
    pub resolvent_re: Vec<f64>,
    pub resolvent_im: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub metric_distortions: Vec<f64>,
    pub data_sha256: String,
    /// Optional path of the training data file this model was fitted on.
    pub data_path: Option<String>,
    pub right_coeffs_re: Vec<Vec<f64>>,
    pub right_coeffs_im: Vec<Vec<f64>>,
    pub left_coeffs_re: Vec<Vec<f64>>,
    pub left_coeffs_im: Vec<Vec<f64>>,
    pub training_states: Vec<Vec<f64>>,
}

fn columns_re(m: &Array2<Complex64>) -> Vec<Vec<f64>> {
    m.columns().into_iter().map(|c| c.iter().map(|v| v.re).collect()).collect()
}

fn columns_im(m: &Array2<Complex64>) -> Vec<Vec<f64>> {
    m.columns().into_iter().map(|c| c.iter().map(|v| v.im).collect()).collect()
}

impl SpectralModel {
    /// Convert to the serializable form. `timestamp` is seconds since the
    /// Unix epoch; comparisons for determinism should ignore it.
    pub fn to_json(&self, data_path: Option<String>) -> ModelJson {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ModelJson {
            timestamp,
            mode: self.mode().to_string(),
            config: self.config.clone(),
            basis: self.basis.clone(),
            eigenvalues_re: self.eigenvalues.iter().map(|v| v.re).collect(),
            eigenvalues_im: self.eigenvalues.iter().map(|v| v.im).collect(),
            resolvent_re: self.resolvent_eigenvalues.iter().map(|v| v.re).collect(),
            resolvent_im: self.resolvent_eigenvalues.iter().map(|v| v.im).collect(),
            singular_values: self.singular_values.clone(),
            metric_distortions: self.metric_distortions.clone(),
            data_sha256: self.data_sha256.clone(),
            data_path,
            right_coeffs_re: columns_re(&self.right_coeffs),
            right_coeffs_im: columns_im(&self.right_coeffs),
            left_coeffs_re: columns_re(&self.left_coeffs),
            left_coeffs_im: columns_im(&self.left_coeffs),
            training_states: self
                .training_states
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        }
    }

    /// Rebuild a model from its serialized form.
    pub fn from_json(j: &ModelJson) -> Result<SpectralModel> {
        let n = j.training_states.len();
        let d = j.training_states.first().map(|r| r.len()).unwrap_or(0);
        if n == 0 || d == 0 {
            return Err(Error::invalid("model JSON has no training states"));
        }
        let mut training_states = Array2::zeros((n, d));
        for (i, row) in j.training_states.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invalid("ragged training state rows"));
            }
            for (c, &v) in row.iter().enumerate() {
                training_states[[i, c]] = v;
            }
        }
        let r = j.eigenvalues_re.len();
        let unpack = |re: &Vec<Vec<f64>>, im: &Vec<Vec<f64>>| -> Result<Array2<Complex64>> {
            if re.len() != r || im.len() != r {
                return Err(Error::invalid("coefficient column count mismatch"));
            }
            let rows = re.first().map(|c| c.len()).unwrap_or(0);
            let mut m = Array2::zeros((rows, r));
            for (c, (cr, ci)) in re.iter().zip(im.iter()).enumerate() {
                if cr.len() != rows || ci.len() != rows {
                    return Err(Error::invalid("ragged coefficient columns"));
                }
                for i in 0..rows {
                    m[[i, c]] = Complex64::new(cr[i], ci[i]);
                }
            }
            Ok(m)
        };
        Ok(SpectralModel {
            eigenvalues: j
                .eigenvalues_re
                .iter()
                .zip(j.eigenvalues_im.iter())
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
            resolvent_eigenvalues: j
                .resolvent_re
                .iter()
                .zip(j.resolvent_im.iter())
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
            singular_values: j.singular_values.clone(),
            metric_distortions: j.metric_distortions.clone(),
            config: j.config.clone(),
            basis: j.basis.clone(),
            training_states,
            data_sha256: j.data_sha256.clone(),
            right_coeffs: unpack(&j.right_coeffs_re, &j.right_coeffs_im)?,
            left_coeffs: unpack(&j.left_coeffs_re, &j.left_coeffs_im)?,
        })
    }

    /// Serialize to pretty JSON at `path`.
    pub fn save_json(&self, path: &std::path::Path, data_path: Option<String>) -> Result<()> {
        let j = self.to_json(data_path);
        let text = serde_json::to_string_pretty(&j)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Load a model serialized by [`SpectralModel::save_json`].
    pub fn load_json(path: &std::path::Path) -> Result<SpectralModel> {
        let text = std::fs::read_to_string(path)?;
        let j: ModelJson = serde_json::from_str(&text)?;
        SpectralModel::from_json(&j)
    }
}
