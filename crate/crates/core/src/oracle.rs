//! Ground-truth generator spectra for validation.
//!
//! Two independent sources: a conservative finite-volume discretization of
//! the 1D overdamped Langevin generator `Lf = −(V′/γ)f′ + (kT/γ)f″` with
//! reflecting (zero-flux) boundaries, and the analytic spectrum lattice of a
//! linear (Ornstein–Uhlenbeck) drift. The two cross-certify each other on
//! the quadratic potential.

use ndarray::{Array1, Array2};
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::simulate::Potential;

/// Discretized 1D Langevin generator on a uniform cell-centered grid.
///
/// The operator is assembled in flux form,
/// `(Lf)ᵢ = (kT/γ)·[w_{i+1/2}(f_{i+1}−f_i) − w_{i−1/2}(f_i−f_{i−1})] / (Δx² πᵢ)`
/// with `w` the Boltzmann weight `π ∝ e^{−V/kT}` at cell midpoints and zero
/// boundary flux. This form has exactly zero row sums (constants in the
/// kernel) and is exactly symmetric under `D = diag(πᵢ)`, so the spectrum is
/// real by construction.
#[derive(Debug, Clone)]
pub struct GridGenerator1D {
    /// Cell centers `x₁..x_G`.
    pub grid: Array1<f64>,
    /// Assembled `G×G` operator matrix.
    pub matrix: Array2<f64>,
    /// Unnormalized Boltzmann weights `π(xᵢ)` at the cell centers.
    pub weights: Array1<f64>,
    pub potential: Potential,
    pub gamma: f64,
    pub k_t: f64,
    pub a: f64,
    pub b: f64,
}

/// Assemble the finite-volume discretization of the generator of
/// `dX = −(V′/γ)dt + √(2kT/γ)dW` on `[a, b]` with `g` cells.
pub fn discretize_langevin_1d(
    potential: &Potential,
    gamma: f64,
    k_t: f64,
    a: f64,
    b: f64,
    g: usize,
) -> Result<GridGenerator1D> {
    if !(gamma > 0.0) || !(k_t > 0.0) {
        return Err(Error::invalid("gamma and kT must be positive"));
    }
    if !(b > a) {
        return Err(Error::invalid("interval must satisfy b > a"));
    }
    if g < 50 {
        return Err(Error::invalid("grid must have at least 50 cells"));
    }
    let dx = (b - a) / g as f64;
    let grid = Array1::from_shape_fn(g, |i| a + (i as f64 + 0.5) * dx);
    // shift the potential by its minimum on the grid before exponentiating
    // so the weights stay in floating-point range
    let mut vmin = f64::INFINITY;
    for &x in grid.iter() {
        vmin = vmin.min(potential.value(x));
    }
    let weights = grid.mapv(|x| (-(potential.value(x) - vmin) / k_t).exp());
    // midpoint weights w_{i+1/2} = π(x_i + Δx/2), zero at the boundary
    let mut flux = Array1::zeros(g + 1);
    for i in 1..g {
        let xm = a + i as f64 * dx;
        flux[i] = (-(potential.value(xm) - vmin) / k_t).exp();
    }
    let scale = k_t / (gamma * dx * dx);
    let mut matrix = Array2::zeros((g, g));
    for i in 0..g {
        let wl = flux[i];
        let wr = flux[i + 1];
        if i > 0 {
            matrix[[i, i - 1]] = scale * wl / weights[i];
        }
        if i + 1 < g {
            matrix[[i, i + 1]] = scale * wr / weights[i];
        }
        matrix[[i, i]] = -scale * (wl + wr) / weights[i];
    }
    let gen = GridGenerator1D {
        grid,
        matrix,
        weights,
        potential: potential.clone(),
        gamma,
        k_t,
        a,
        b,
    };
    gen.check_invariants()?;
    Ok(gen)
}

impl GridGenerator1D {
    /// Verify zero row sums and Boltzmann-weighted symmetry of the assembled
    /// matrix (both exact up to round-off by construction).
    pub fn check_invariants(&self) -> Result<()> {
        let g = self.grid.len();
        let max_entry = self
            .matrix
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        for i in 0..g {
            let row_sum: f64 = self.matrix.row(i).sum();
            if row_sum.abs() > 1e-8 * max_entry {
                return Err(Error::numerical(format!(
                    "discretized generator row {i} sums to {row_sum:.3e}"
                )));
            }
        }
        let mut max_asym = 0.0f64;
        let mut max_dl = 0.0f64;
        for i in 0..g {
            for j in 0..g {
                let dl = self.weights[i] * self.matrix[[i, j]];
                let dlt = self.weights[j] * self.matrix[[j, i]];
                max_asym = max_asym.max((dl - dlt).abs());
                max_dl = max_dl.max(dl.abs());
            }
        }
        if max_asym > 1e-8 * max_dl {
            return Err(Error::numerical(format!(
                "discretized generator breaks detailed balance by {max_asym:.3e}"
            )));
        }
        Ok(())
    }

    /// Top-`k` eigenvalues (descending, real) with grid eigenfunctions as
    /// columns, normalized to unit discrete L²(π) norm with positive-mean
    /// sign convention.
    pub fn spectrum(&self, k: usize) -> Result<(Vec<f64>, Array2<f64>)> {
        let g = self.grid.len();
        if k > g {
            return Err(Error::invalid(format!("requested {k} eigenvalues from {g} cells")));
        }
        // symmetrize: B = D^{1/2} L D^{−1/2} with D = diag(π)
        let sqrt_w = self.weights.mapv(f64::sqrt);
        let mut b = Array2::zeros((g, g));
        for i in 0..g {
            for j in 0..g {
                if self.matrix[[i, j]] != 0.0 {
                    b[[i, j]] = sqrt_w[i] * self.matrix[[i, j]] / sqrt_w[j];
                }
            }
        }
        let b = (&b + &b.t()) * 0.5;
        let (vals, vecs) = linalg::eigh_sym(&b)?;
        // discrete probability weights for the L²(π) norm
        let total: f64 = self.weights.sum();
        let prob = self.weights.mapv(|w| w / total);
        let mut eigenvalues = Vec::with_capacity(k);
        let mut funcs = Array2::zeros((g, k));
        for out in 0..k {
            let src = g - 1 - out;
            eigenvalues.push(vals[src]);
            // back-transform f = D^{−1/2} u
            let mut f = Array1::from_shape_fn(g, |i| vecs[[i, src]] / sqrt_w[i]);
            let norm2: f64 = f.iter().zip(prob.iter()).map(|(v, p)| v * v * p).sum();
            f /= norm2.sqrt();
            let mean: f64 = f.sum();
            let flip = if mean.abs() > 1e-8 * (g as f64).sqrt() {
                mean < 0.0
            } else {
                // mean-zero eigenfunction: pin the largest-magnitude entry
                let mut imax = 0;
                for (i, v) in f.iter().enumerate() {
                    if v.abs() > f[imax].abs() {
                        imax = i;
                    }
                }
                f[imax] < 0.0
            };
            if flip {
                f.mapv_inplace(|v| -v);
            }
            funcs.column_mut(out).assign(&f);
        }
        Ok((eigenvalues, funcs))
    }
}

/// Top-`k` generator eigenvalues of the linear SDE `dX = AX dt + B dW`: the
/// lattice `{Σᵢ nᵢ αᵢ : nᵢ ∈ ℕ₀}` over the eigenvalues `αᵢ` of `A`,
/// enumerated by bounded total degree, deduplicated within 1e-9, sorted by
/// descending real part (ties by descending imaginary part).
pub fn ou_spectrum(a: &Array2<f64>, k: usize) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::invalid("drift matrix must be square and non-empty"));
    }
    if k == 0 {
        return Err(Error::invalid("need k >= 1 eigenvalues"));
    }
    let (alphas, vecs) = a
        .eig()
        .map_err(|e| Error::numerical(format!("drift eigensolve failed: {e}")))?;
    for al in alphas.iter() {
        if al.re >= 0.0 {
            return Err(Error::invalid("drift matrix is not stable"));
        }
    }
    // diagonalizability check via the conditioning of the eigenvector matrix
    let cond = eigvec_condition(&vecs)?;
    if cond > 1e8 {
        return Err(Error::numerical(
            "Jordan-block case unsupported: drift eigenvectors are numerically dependent",
        ));
    }
    let d = a.nrows();
    // total degree up to k suffices: each unit of degree moves the real part
    // left by at least min |Re αᵢ| > 0
    let max_deg = k;
    let mut values: Vec<Complex64> = Vec::new();
    let mut counts = vec![0usize; d];
    enumerate_lattice(&mut counts, 0, max_deg, &alphas.to_vec(), &mut values);
    values.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap()
            .then(y.im.partial_cmp(&x.im).unwrap())
    });
    let mut dedup: Vec<Complex64> = Vec::new();
    for v in values {
        if dedup.last().map_or(true, |p| (p - v).norm() > 1e-9) {
            dedup.push(v);
        }
    }
    dedup.truncate(k);
    Ok(dedup)
}

fn enumerate_lattice(
    counts: &mut Vec<usize>,
    idx: usize,
    budget: usize,
    alphas: &[Complex64],
    out: &mut Vec<Complex64>,
) {
    if idx == counts.len() {
        let mut v = Complex64::new(0.0, 0.0);
        for (c, al) in counts.iter().zip(alphas.iter()) {
            v += al * *c as f64;
        }
        out.push(v);
        return;
    }
    for c in 0..=budget {
        counts[idx] = c;
        enumerate_lattice(counts, idx + 1, budget - c, alphas, out);
    }
    counts[idx] = 0;
}

fn eigvec_condition(v: &Array2<Complex64>) -> Result<f64> {
    use ndarray_linalg::SVD;
    let (_, s, _) = v
        .svd(false, false)
        .map_err(|e| Error::numerical(format!("SVD failed: {e}")))?;
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

/// Grid metadata recorded in spectrum fixtures.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FixtureGrid {
    pub a: f64,
    pub b: f64,
    pub cells: usize,
}

/// Reference spectrum computed by the oracle and frozen into the repository;
/// never hand-entered.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectrumFixture {
    pub tool_version: String,
    pub potential: String,
    pub gamma: f64,
    pub k_t: f64,
    pub grid: FixtureGrid,
    pub eigenvalues: Vec<f64>,
}

impl SpectrumFixture {
    /// Compute a fixture for a potential on `[a, b]` with `g` cells.
    pub fn compute(
        potential: &Potential,
        gamma: f64,
        k_t: f64,
        a: f64,
        b: f64,
        g: usize,
        k: usize,
    ) -> Result<SpectrumFixture> {
        let gen = discretize_langevin_1d(potential, gamma, k_t, a, b, g)?;
        let (eigenvalues, _) = gen.spectrum(k)?;
        Ok(SpectrumFixture {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            potential: potential.name().to_string(),
            gamma,
            k_t,
            grid: FixtureGrid { a, b, cells: g },
            eigenvalues,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<SpectrumFixture> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A zero potential (free diffusion).
pub fn free_potential() -> Potential {
    Potential::Table {
        poly: vec![0.0],
        gaussians: vec![],
    }
}

/// The quadratic potential `θx²/2`, whose Langevin dynamics is the 1D OU
/// process with drift `−θ`.
pub fn quadratic_potential(theta: f64) -> Potential {
    Potential::Table {
        poly: vec![0.0, 0.0, theta / 2.0],
        gaussians: vec![],
    }
}
