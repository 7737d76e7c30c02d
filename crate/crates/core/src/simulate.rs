//! Euler–Maruyama simulation of the two benchmark SDE families: overdamped
//! Langevin dynamics in a 1D potential and linear (Ornstein–Uhlenbeck)
//! diffusions, with stationarity warm-up.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, Eig, Solve, UPLO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// 1D potential with closed-form value and derivative.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Potential {
    /// `U(x) = 4(x⁸ + 0.8e^{−80x²} + 0.2e^{−80(x−0.5)²} + 0.5e^{−40(x+0.5)²})`:
    /// an octic confinement with three Gaussian barriers, giving three
    /// metastable wells inside `[−1, 1]`.
    TripleWell,
    /// `V(x) = x²/2`; Langevin dynamics in this potential is the standard OU
    /// process.
    Quadratic,
    /// Polynomial plus Gaussian bumps: `Σ c_k x^k + Σ h e^{−w(x−c)²}`.
    Table {
        poly: Vec<f64>,
        gaussians: Vec<GaussianBump>,
    },
}

/// One Gaussian term `height · e^{−width (x − center)²}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianBump {
    pub height: f64,
    pub width: f64,
    pub center: f64,
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::TripleWell => {
                4.0 * (x.powi(8)
                    + 0.8 * (-80.0 * x * x).exp()
                    + 0.2 * (-80.0 * (x - 0.5).powi(2)).exp()
                    + 0.5 * (-40.0 * (x + 0.5).powi(2)).exp())
            }
            Potential::Quadratic => 0.5 * x * x,
            Potential::Table { poly, gaussians } => {
                let mut v = 0.0;
                let mut xk = 1.0;
                for c in poly {
                    v += c * xk;
                    xk *= x;
                }
                for g in gaussians {
                    v += g.height * (-g.width * (x - g.center).powi(2)).exp();
                }
                v
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::TripleWell => {
                4.0 * (8.0 * x.powi(7)
                    + 0.8 * (-160.0 * x) * (-80.0 * x * x).exp()
                    + 0.2 * (-160.0 * (x - 0.5)) * (-80.0 * (x - 0.5).powi(2)).exp()
                    + 0.5 * (-80.0 * (x + 0.5)) * (-40.0 * (x + 0.5).powi(2)).exp())
            }
            Potential::Quadratic => x,
            Potential::Table { poly, gaussians } => {
                let mut dv = 0.0;
                for (k, c) in poly.iter().enumerate().skip(1) {
                    dv += c * k as f64 * x.powi(k as i32 - 1);
                }
                for g in gaussians {
                    dv += g.height * (-2.0 * g.width * (x - g.center))
                        * (-g.width * (x - g.center).powi(2)).exp();
                }
                dv
            }
        }
    }

    /// Approximate location of the global minimum, found by a grid scan.
    /// Used as the burn-in starting point.
    pub fn start_point(&self) -> f64 {
        let (a, b) = match self {
            Potential::TripleWell => (-1.2, 1.2),
            Potential::Quadratic => (-1.0, 1.0),
            Potential::Table { .. } => (-3.0, 3.0),
        };
        let mut best_x = a;
        let mut best_v = f64::INFINITY;
        let g = 4000;
        for i in 0..=g {
            let x = a + (b - a) * i as f64 / g as f64;
            let v = self.value(x);
            if v < best_v {
                best_v = v;
                best_x = x;
            }
        }
        best_x
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::TripleWell => "triple_well",
            Potential::Quadratic => "quadratic",
            Potential::Table { .. } => "table",
        }
    }
}

/// Overdamped Langevin dynamics `dX = −γ⁻¹V′(X) dt + √(2kT/γ) dW` in 1D.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LangevinSpec {
    pub potential: Potential,
    pub gamma: f64,
    pub k_t: f64,
    /// Integration step `h`.
    pub step: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl LangevinSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be positive"));
        }
        if self.k_t <= 0.0 || !self.k_t.is_finite() {
            return Err(Error::invalid("kT must be positive"));
        }
        if self.step <= 0.0 || !self.step.is_finite() {
            return Err(Error::invalid("integration step must be positive"));
        }
        Ok(())
    }

    pub fn drift(&self, x: f64) -> f64 {
        -self.potential.derivative(x) / self.gamma
    }

    pub fn noise_amplitude(&self) -> f64 {
        (2.0 * self.k_t / self.gamma).sqrt()
    }
}

/// Linear diffusion `dX = AX dt + B dW` with stable drift matrix `A`.
#[derive(Debug, Clone)]
pub struct OuSpec {
    drift: Array2<f64>,
    diffusion: Array2<f64>,
    pub step: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl OuSpec {
    /// Stability of `A` (all eigenvalue real parts strictly negative) is
    /// checked here, at construction.
    pub fn new(
        drift: Array2<f64>,
        diffusion: Array2<f64>,
        step: f64,
        burn_in: usize,
        seed: u64,
    ) -> Result<Self> {
        let d = drift.nrows();
        if drift.ncols() != d {
            return Err(Error::invalid("drift matrix must be square"));
        }
        if diffusion.nrows() != d {
            return Err(Error::invalid("diffusion matrix row count must match drift dimension"));
        }
        if step <= 0.0 || !step.is_finite() {
            return Err(Error::invalid("integration step must be positive"));
        }
        let eig = drift_eigenvalues(&drift)?;
        if eig.iter().any(|z| z.re >= 0.0) {
            return Err(Error::invalid(format!(
                "drift matrix is not stable: eigenvalue with Re >= 0 in {eig:?}"
            )));
        }
        Ok(Self { drift, diffusion, step, burn_in, seed })
    }

    pub fn drift_matrix(&self) -> &Array2<f64> {
        &self.drift
    }

    pub fn diffusion_matrix(&self) -> &Array2<f64> {
        &self.diffusion
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }
}

fn drift_eigenvalues(a: &Array2<f64>) -> Result<Vec<Complex64>> {
    let (eig, _) = a
        .eig()
        .map_err(|e| Error::numerical(format!("eigendecomposition of drift failed: {e}")))?;
    Ok(eig.to_vec())
}

/// Either benchmark process, for the shared integrator entry point.
#[derive(Debug, Clone)]
pub enum ProcessSpec {
    Langevin(LangevinSpec),
    Ou(OuSpec),
}

impl ProcessSpec {
    pub fn dim(&self) -> usize {
        match self {
            ProcessSpec::Langevin(_) => 1,
            ProcessSpec::Ou(s) => s.dim(),
        }
    }

    fn step(&self) -> f64 {
        match self {
            ProcessSpec::Langevin(s) => s.step,
            ProcessSpec::Ou(s) => s.step,
        }
    }

    fn burn_in(&self) -> usize {
        match self {
            ProcessSpec::Langevin(s) => s.burn_in,
            ProcessSpec::Ou(s) => s.burn_in,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ProcessSpec::Langevin(s) => s.seed,
            ProcessSpec::Ou(s) => s.seed,
        }
    }

    fn noise_dim(&self) -> usize {
        match self {
            ProcessSpec::Langevin(_) => 1,
            ProcessSpec::Ou(s) => s.diffusion.ncols(),
        }
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ProcessSpec::Langevin(s) => out[0] = s.drift(x[0]),
            ProcessSpec::Ou(s) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = s.drift.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    /// Add `b(x)·ξ·√h` to the state.
    fn add_noise(&self, x: &mut [f64], xi: &[f64], sqrt_h: f64) {
        match self {
            ProcessSpec::Langevin(s) => x[0] += s.noise_amplitude() * xi[0] * sqrt_h,
            ProcessSpec::Ou(s) => {
                for i in 0..x.len() {
                    let bi: f64 =
                        s.diffusion.row(i).iter().zip(xi.iter()).map(|(a, b)| a * b).sum();
                    x[i] += bi * sqrt_h;
                }
            }
        }
    }

    /// Burn-in starting point: the potential minimum for Langevin, a draw
    /// from the stationary Gaussian for OU (which makes the subsequent
    /// burn-in redundant but harmless).
    fn default_start(&self, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
        match self {
            ProcessSpec::Langevin(s) => Ok(vec![s.potential.start_point()]),
            ProcessSpec::Ou(s) => {
                let sigma = stationary_covariance(s)?;
                let f = covariance_factor(&sigma)?;
                let d = s.dim();
                let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                Ok((0..d)
                    .map(|i| f.row(i).iter().zip(xi.iter()).map(|(a, b)| a * b).sum())
                    .collect())
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            ProcessSpec::Langevin(s) => format!(
                "langevin(potential={}, gamma={}, kT={})",
                s.potential.name(),
                s.gamma,
                s.k_t
            ),
            ProcessSpec::Ou(s) => format!("ou(d={})", s.dim()),
        }
    }
}

/// Integrate the SDE with the Euler–Maruyama scheme
/// `X_{k+1} = X_k + a(X_k)h + b(X_k)√h ξ_k`, after the spec's burn-in from
/// its default starting point. Emits `n_out` rows at times `i·h·out_stride`.
/// Deterministic given `(spec, seed, n_out, out_stride)`.
pub fn euler_maruyama(spec: &ProcessSpec, n_out: usize, out_stride: usize) -> Result<Trajectory> {
    if let ProcessSpec::Langevin(s) = spec {
        s.validate()?;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed());
    let mut x = spec.default_start(&mut rng)?;
    integrate(spec, &mut rng, &mut x, spec.burn_in(), n_out, out_stride)
}

/// Same integrator, but starting exactly at `x0` with no burn-in. Used for
/// deterministic convergence checks and for continuing a trajectory.
pub fn euler_maruyama_from(
    spec: &ProcessSpec,
    x0: &[f64],
    n_out: usize,
    out_stride: usize,
) -> Result<Trajectory> {
    if let ProcessSpec::Langevin(s) = spec {
        s.validate()?;
    }
    if x0.len() != spec.dim() {
        return Err(Error::invalid("initial state dimension mismatch"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed());
    let mut x = x0.to_vec();
    integrate(spec, &mut rng, &mut x, 0, n_out, out_stride)
}

fn integrate(
    spec: &ProcessSpec,
    rng: &mut ChaCha12Rng,
    x: &mut Vec<f64>,
    burn_in: usize,
    n_out: usize,
    out_stride: usize,
) -> Result<Trajectory> {
    if n_out < 2 {
        return Err(Error::invalid("n_out must be >= 2"));
    }
    if out_stride < 1 {
        return Err(Error::invalid("out_stride must be >= 1"));
    }
    let d = spec.dim();
    let p = spec.noise_dim();
    let h = spec.step();
    let sqrt_h = h.sqrt();
    let mut drift = vec![0.0; d];
    let mut xi = vec![0.0; p];
    let mut step_count: usize = 0;

    let mut advance = |x: &mut Vec<f64>, rng: &mut ChaCha12Rng| -> Result<()> {
        spec.drift_into(x, &mut drift);
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..d {
            x[i] += drift[i] * h;
        }
        spec.add_noise(x, &xi, sqrt_h);
        step_count += 1;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "blow-up at step {step_count}: state became non-finite (reduce the step size)"
            )));
        }
        Ok(())
    };

    for _ in 0..burn_in {
        advance(x, rng)?;
    }

    let mut states = Array2::zeros((n_out, d));
    let mut times = Array1::zeros(n_out);
    states.row_mut(0).assign(&Array1::from_vec(x.clone()));
    for k in 1..n_out {
        for _ in 0..out_stride {
            advance(x, rng)?;
        }
        states.row_mut(k).assign(&Array1::from_vec(x.clone()));
        times[k] = k as f64 * h * out_stride as f64;
    }

    let traj = Trajectory::new(states, times, Default::default())?
        .with_meta("process", spec.describe())
        .with_meta("rng", "chacha12")
        .with_meta("seed", spec.seed().to_string())
        .with_meta("step", spec.step().to_string())
        .with_meta("burn_in", burn_in.to_string())
        .with_meta("out_stride", out_stride.to_string());
    Ok(traj)
}

/// Solve the Lyapunov equation `AΣ + ΣAᵀ = −BBᵀ` for the stationary
/// covariance of the OU process, via the Kronecker-product linear system.
pub fn stationary_covariance(spec: &OuSpec) -> Result<Array2<f64>> {
    let a = &spec.drift;
    let d = spec.dim();
    let bbt = spec.diffusion.dot(&spec.diffusion.t());

    // (I ⊗ A + A ⊗ I) vec(Σ) = −vec(BBᵀ), column-major vec.
    let m = d * d;
    let mut k = Array2::zeros((m, m));
    for col in 0..d {
        for row in 0..d {
            let eq = col * d + row;
            for j in 0..d {
                k[[eq, col * d + j]] += a[[row, j]]; // (I ⊗ A)
                k[[eq, j * d + row]] += a[[col, j]]; // (A ⊗ I), vec(ΣAᵀ)
            }
        }
    }
    let mut rhs = Array1::zeros(m);
    for col in 0..d {
        for row in 0..d {
            rhs[col * d + row] = -bbt[[row, col]];
        }
    }
    let sol = k
        .solve(&rhs)
        .map_err(|e| Error::numerical(format!("Lyapunov solve failed: {e}")))?;
    let mut sigma = Array2::zeros((d, d));
    for col in 0..d {
        for row in 0..d {
            sigma[[row, col]] = sol[col * d + row];
        }
    }
    // enforce exact symmetry
    let sigma = (&sigma + &sigma.t()) * 0.5;

    let resid = a.dot(&sigma) + sigma.dot(&a.t()) + &bbt;
    let scale = bbt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rmax = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if rmax > 1e-10 * scale.max(1e-300) && scale > 0.0 {
        return Err(Error::numerical(format!(
            "Lyapunov residual {rmax:.3e} exceeds tolerance for scale {scale:.3e}"
        )));
    }
    Ok(sigma)
}

/// Factor `F` with `FFᵀ = Σ`: Cholesky when positive definite, symmetric
/// eigenvalue factorization with clipped spectrum otherwise.
fn covariance_factor(sigma: &Array2<f64>) -> Result<Array2<f64>> {
    if let Ok(l) = sigma.cholesky(UPLO::Lower) {
        return Ok(l);
    }
    let (vals, vecs) = ndarray_linalg::Eigh::eigh(sigma, UPLO::Lower)
        .map_err(|e| Error::numerical(format!("covariance factorization failed: {e}")))?;
    let d = sigma.nrows();
    let mut f = vecs;
    for j in 0..d {
        let s = vals[j].max(0.0).sqrt();
        f.column_mut(j).mapv_inplace(|v| v * s);
    }
    Ok(f)
}

/// Draw `count` i.i.d. samples from the stationary Gaussian `N(0, Σ_∞)`.
pub fn sample_stationary(spec: &OuSpec, count: usize, seed: u64) -> Result<Array2<f64>> {
    let sigma = stationary_covariance(spec)?;
    let f = covariance_factor(&sigma)?;
    let d = spec.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((count, d));
    let mut xi = vec![0.0; d];
    for mut row in out.rows_mut() {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..d {
            row[i] = f.row(i).iter().zip(xi.iter()).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn scalar_ou(a: f64, b: f64, step: f64, seed: u64) -> OuSpec {
        OuSpec::new(array![[a]], array![[b]], step, 0, seed).unwrap()
    }

    #[test]
    fn zero_noise_is_deterministic_euler() {
        let spec = ProcessSpec::Ou(scalar_ou(-1.0, 0.0, 0.01, 0));
        let t = euler_maruyama_from(&spec, &[1.0], 3, 1).unwrap();
        let xs: Vec<f64> = t.states().column(0).to_vec();
        assert_abs_diff_eq!(xs[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(xs[1], 0.99, epsilon = 1e-15);
        assert_abs_diff_eq!(xs[2], 0.9801, epsilon = 1e-14);
    }

    #[test]
    fn determinism_same_seed() {
        let spec = ProcessSpec::Langevin(LangevinSpec {
            potential: Potential::Quadratic,
            gamma: 1.0,
            k_t: 1.0,
            step: 1e-3,
            burn_in: 100,
            seed: 42,
        });
        let a = euler_maruyama(&spec, 50, 3).unwrap();
        let b = euler_maruyama(&spec, 50, 3).unwrap();
        assert_eq!(a.states(), b.states());
        assert_eq!(a.times(), b.times());
    }

    #[test]
    fn quadratic_langevin_matches_boltzmann_variance() {
        // Boltzmann distribution for V = x²/2 at kT=1 is N(0,1).
        let spec = ProcessSpec::Langevin(LangevinSpec {
            potential: Potential::Quadratic,
            gamma: 1.0,
            k_t: 1.0,
            step: 1e-3,
            burn_in: 10_000,
            seed: 11,
        });
        let t = euler_maruyama(&spec, 1_000_000, 1).unwrap();
        let xs = t.states().column(0);
        let mean = xs.mean().unwrap();
        let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / xs.len() as f64;
        // MC standard error with correlation time ~1/(h·n_eff): the OU
        // autocorrelation time is 1, so n_eff ≈ n·h/2 = 500 and
        // se(var) ≈ √(2/n_eff) ≈ 0.063.
        assert!((var - 1.0).abs() < 3.0 * 0.063, "variance {var}");
    }

    #[test]
    fn blow_up_is_reported() {
        let spec = ProcessSpec::Langevin(LangevinSpec {
            potential: Potential::TripleWell,
            gamma: 1.0,
            k_t: 1.0,
            step: 10.0, // way past stability
            burn_in: 0,
            seed: 0,
        });
        let err = euler_maruyama_from(&spec, &[1.0], 10, 1).unwrap_err();
        assert!(err.to_string().contains("blow-up at step"), "{err}");
    }

    #[test]
    fn lyapunov_scalar_and_diagonal() {
        let s = scalar_ou(-1.0, std::f64::consts::SQRT_2, 0.01, 0);
        let sigma = stationary_covariance(&s).unwrap();
        assert_abs_diff_eq!(sigma[[0, 0]], 1.0, epsilon = 1e-12);

        let s2 = OuSpec::new(
            array![[-1.0, 0.0], [0.0, -1.0]],
            array![[1.0, 0.0], [0.0, 1.0]],
            0.01,
            0,
            0,
        )
        .unwrap();
        let sigma2 = stationary_covariance(&s2).unwrap();
        assert_abs_diff_eq!(sigma2[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma2[[1, 1]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma2[[0, 1]], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_nondiagonal_matches_hand_solve() {
        // A=[[−1,1],[0,−2]], B=I. Unknowns s11,s12,s22:
        //   −2s11 + 2s12 = −1
        //   −3s12 + s22  =  0
        //   −4s22        = −1
        // → s22 = 1/4, s12 = 1/12, s11 = 7/12.
        let s = OuSpec::new(
            array![[-1.0, 1.0], [0.0, -2.0]],
            array![[1.0, 0.0], [0.0, 1.0]],
            0.01,
            0,
            0,
        )
        .unwrap();
        let sigma = stationary_covariance(&s).unwrap();
        assert_abs_diff_eq!(sigma[[0, 0]], 7.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma[[0, 1]], 1.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma[[1, 1]], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn unstable_drift_rejected() {
        assert!(OuSpec::new(array![[0.5]], array![[1.0]], 0.01, 0, 0).is_err());
        assert!(OuSpec::new(array![[0.0]], array![[1.0]], 0.01, 0, 0).is_err());
    }

    #[test]
    fn stationary_sampling_moments() {
        let s = scalar_ou(-1.0, std::f64::consts::SQRT_2, 0.01, 0);
        let x = sample_stationary(&s, 100_000, 3).unwrap();
        let col = x.column(0);
        let var = col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64;
        // se of the sample variance of N(0,1) with n=1e5 is √(2/n) ≈ 0.0045
        assert!((var - 1.0).abs() < 3.0 * 0.0045, "variance {var}");

        let empty = sample_stationary(&s, 0, 0).unwrap();
        assert_eq!(empty.nrows(), 0);
    }

    #[test]
    fn degenerate_noise_samples_are_zero() {
        let s = scalar_ou(-1.0, 0.0, 0.01, 0);
        let x = sample_stationary(&s, 10, 1).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn euler_endpoint_error_halves_with_step() {
        // zero-noise case: compare against exact e^{At}x0 at t=1
        let exact = (-1.0f64).exp();
        let mut errs = Vec::new();
        for &h in &[0.02, 0.01] {
            let spec = ProcessSpec::Ou(scalar_ou(-1.0, 0.0, h, 0));
            let n = (1.0 / h).round() as usize + 1;
            let t = euler_maruyama_from(&spec, &[1.0], n, 1).unwrap();
            errs.push((t.states()[[n - 1, 0]] - exact).abs());
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 1.6 && ratio < 2.4, "first-order ratio {ratio}");
    }

    #[test]
    fn triple_well_shape() {
        let p = Potential::TripleWell;
        // barriers sit at −0.5, 0, 0.5; wells in between and near ±0.8
        assert!(p.value(0.0) > p.value(0.25));
        assert!(p.value(0.5) > p.value(0.25));
        // derivative consistent with finite differences
        for &x in &[-0.9, -0.3, 0.1, 0.4, 0.8] {
            let fd = (p.value(x + 1e-6) - p.value(x - 1e-6)) / 2e-6;
            assert_abs_diff_eq!(p.derivative(x), fd, epsilon = 1e-4);
        }
    }
}
