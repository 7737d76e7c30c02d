//! Laplace-transform quadrature: node times and weights approximating
//! `R_μ = ∫₀^∞ A_t e^{−μt} dt ≈ Σ_j m_j A_{t_j}`, and the combination matrix
//! `M` that turns raw samples into the aggregated cross-covariance
//! `Ŝ*MŜ` of the resolvent approximation.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// How the quadrature nodes were produced; drives both the matrix assembly
/// and the eigenvalue map applied by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Trapezoid rule on the uniform grid `t_j = jΔt`.
    Uniform,
    /// Trapezoid rule on an arbitrary strictly increasing grid with `t_0=0`.
    NonUniform,
    /// Degenerate single-lag weights selecting the transfer operator
    /// `A_Δt` itself; the estimator then maps `λ̂ = ln(ν̂)/Δt` instead of
    /// `μ − 1/ν̂`.
    TransferOperator,
}

/// Quadrature nodes `t_0 < … < t_ℓ` with weights `m_0..m_ℓ` and shift `μ`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LaplaceWeights {
    pub mu: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub mode: WeightMode,
}

impl LaplaceWeights {
    /// Index of the last node (ℓ for the quadrature modes).
    pub fn ell(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Conditioning `κ` of the time discretization: max gap over min gap.
    /// Reported for diagnostics, never used to reject.
    pub fn kappa(&self) -> f64 {
        if self.nodes.len() < 3 {
            return 1.0;
        }
        let mut min_gap = f64::INFINITY;
        let mut max_gap = 0.0f64;
        for i in 1..self.nodes.len() {
            let g = self.nodes[i] - self.nodes[i - 1];
            min_gap = min_gap.min(g);
            max_gap = max_gap.max(g);
        }
        max_gap / min_gap
    }

    /// Largest node time (the truncation horizon `t_ℓ`).
    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

/// Trapezoid weights on the uniform grid: `m_j = Δt·e^{−μjΔt}`, halved at
/// both endpoints.
pub fn trapezoid_weights(mu: f64, dt: f64, ell: usize) -> Result<LaplaceWeights> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid("shift mu must be positive"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt must be positive"));
    }
    if ell < 1 {
        return Err(Error::invalid(
            "ell must be >= 1 (use transfer_operator_weights for the single-lag baseline)",
        ));
    }
    let mut nodes = Vec::with_capacity(ell + 1);
    let mut weights = Vec::with_capacity(ell + 1);
    for j in 0..=ell {
        let t = j as f64 * dt;
        let w = (-mu * t).exp() * if j == 0 || j == ell { dt / 2.0 } else { dt };
        nodes.push(t);
        weights.push(w);
    }
    Ok(LaplaceWeights { mu, nodes, weights, mode: WeightMode::Uniform })
}

/// Trapezoid weights for a non-uniform grid `0 = t_0 < … < t_ℓ`:
/// half-gap sums `m_j = (t_{j+1} − t_{j−1})/2 · e^{−μ t_j}` with one-sided
/// gaps at the endpoints. Reduces to [`trapezoid_weights`] on a uniform grid.
pub fn nonuniform_weights(mu: f64, times: &[f64]) -> Result<LaplaceWeights> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid("shift mu must be non-negative"));
    }
    let ell = times.len().saturating_sub(1);
    if ell < 1 {
        return Err(Error::invalid("need at least two node times"));
    }
    if times[0] != 0.0 {
        return Err(Error::invalid("first node time must be 0"));
    }
    for i in 1..times.len() {
        if !(times[i] > times[i - 1]) {
            return Err(Error::invalid(format!(
                "node times must be strictly increasing (violated at index {i})"
            )));
        }
    }
    let mut weights = Vec::with_capacity(ell + 1);
    for j in 0..=ell {
        let gap = if j == 0 {
            times[1] - times[0]
        } else if j == ell {
            times[ell] - times[ell - 1]
        } else {
            times[j + 1] - times[j - 1]
        };
        weights.push(gap / 2.0 * (-mu * times[j]).exp());
    }
    Ok(LaplaceWeights {
        mu,
        nodes: times.to_vec(),
        weights,
        mode: WeightMode::NonUniform,
    })
}

/// Degenerate weights for the single time-lag transfer-operator baseline:
/// one node at `Δt` with unit weight.
pub fn transfer_operator_weights(dt: f64) -> Result<LaplaceWeights> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt must be positive"));
    }
    Ok(LaplaceWeights {
        mu: 0.0,
        nodes: vec![dt],
        weights: vec![1.0],
        mode: WeightMode::TransferOperator,
    })
}

/// Smallest `ℓ` such that `μ·ℓ·Δt >= target` (default horizon rule uses
/// `target = 10`, making the truncation term `e^{−μt_ℓ}/μ` negligible next
/// to the `O(Δt)` discretization term).
pub fn horizon_ell(mu: f64, dt: f64, target: f64) -> usize {
    ((target / (mu * dt)).ceil() as usize).max(1)
}

/// The combination matrix `M` with `Ŝ*MŜ` equal to the aggregated empirical
/// cross-covariance. Stored structurally: the single-trajectory form is
/// banded with `ℓ+1` constant diagonals, the bundle form touches only the
/// first block-row of blocks. Dense materialization is capped at 2000 rows
/// and meant for tests.
#[derive(Debug, Clone, PartialEq)]
pub enum CombinationMatrix {
    /// `M_{i,i+j} = value[j]` for lags `0 <= j <= ℓ` (and mirrored below the
    /// diagonal when symmetrized).
    Banded {
        n: usize,
        /// Value on the j-th superdiagonal.
        upper: Vec<f64>,
        /// Value on the j-th subdiagonal (index 0 unused; equals `upper`
        /// halved when symmetrized, all zero in raw form).
        lower: Vec<f64>,
        symmetrized: bool,
    },
    /// `M_{i, jn+i} = block[j]` for `i < n`, i.e. nonzeros only in the first
    /// block-row of `(ℓ+1)×(ℓ+1)` blocks of size `n`.
    Block {
        n_traj: usize,
        /// Scale on block `j` of the first block-row.
        block: Vec<f64>,
        symmetrized: bool,
    },
}

impl CombinationMatrix {
    /// Total matrix size.
    pub fn size(&self) -> usize {
        match self {
            CombinationMatrix::Banded { n, .. } => *n,
            CombinationMatrix::Block { n_traj, block, .. } => n_traj * block.len(),
        }
    }

    pub fn is_symmetrized(&self) -> bool {
        match self {
            CombinationMatrix::Banded { symmetrized, .. }
            | CombinationMatrix::Block { symmetrized, .. } => *symmetrized,
        }
    }

    /// `M · A` for a dense `size × k` matrix.
    pub fn apply_left(&self, a: &Array2<f64>) -> Array2<f64> {
        assert_eq!(a.nrows(), self.size(), "shape mismatch in M·A");
        let mut out = Array2::zeros(a.raw_dim());
        match self {
            CombinationMatrix::Banded { n, upper, lower, .. } => {
                for (j, &u) in upper.iter().enumerate() {
                    if u != 0.0 {
                        for i in 0..n - j {
                            let src = a.row(i + j);
                            let mut dst = out.row_mut(i);
                            dst.zip_mut_with(&src, |o, s| *o += u * s);
                        }
                    }
                }
                for (j, &l) in lower.iter().enumerate().skip(1) {
                    if l != 0.0 {
                        for i in j..*n {
                            let src = a.row(i - j);
                            let mut dst = out.row_mut(i);
                            dst.zip_mut_with(&src, |o, s| *o += l * s);
                        }
                    }
                }
            }
            CombinationMatrix::Block { n_traj, block, symmetrized } => {
                let n = *n_traj;
                for (j, &w) in block.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let (row_w, col_w) = if *symmetrized {
                        if j == 0 {
                            (w, 0.0)
                        } else {
                            (w / 2.0, w / 2.0)
                        }
                    } else {
                        (w, 0.0)
                    };
                    for i in 0..n {
                        if row_w != 0.0 {
                            let src = a.row(j * n + i);
                            let mut dst = out.row_mut(i);
                            dst.zip_mut_with(&src, |o, s| *o += row_w * s);
                        }
                        if col_w != 0.0 && j > 0 {
                            let src = a.row(i);
                            let mut dst = out.row_mut(j * n + i);
                            dst.zip_mut_with(&src, |o, s| *o += col_w * s);
                        }
                    }
                }
            }
        }
        out
    }

    /// `Mᵀ · A`.
    pub fn apply_left_t(&self, a: &Array2<f64>) -> Array2<f64> {
        assert_eq!(a.nrows(), self.size(), "shape mismatch in Mᵀ·A");
        match self {
            CombinationMatrix::Banded { n, upper, lower, symmetrized } => {
                if *symmetrized {
                    return self.apply_left(a);
                }
                // transpose swaps the band halves
                let mut u = vec![0.0; upper.len().max(lower.len())];
                let mut l = vec![0.0; u.len()];
                u[0] = upper[0];
                for (j, &v) in lower.iter().enumerate().skip(1) {
                    u[j] = v;
                }
                for (j, &v) in upper.iter().enumerate().skip(1) {
                    l[j] = v;
                }
                CombinationMatrix::Banded { n: *n, upper: u, lower: l, symmetrized: false }
                    .apply_left(a)
            }
            CombinationMatrix::Block { n_traj, block, symmetrized } => {
                if *symmetrized {
                    return self.apply_left(a);
                }
                // Mᵀ row jn+i picks block[j] times A row i
                let n = *n_traj;
                let mut out = Array2::zeros(a.raw_dim());
                for (j, &w) in block.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        let src = a.row(i);
                        let mut dst = out.row_mut(j * n + i);
                        dst.zip_mut_with(&src, |o, s| *o += w * s);
                    }
                }
                out
            }
        }
    }

    /// `A · M` for a dense `k × size` matrix.
    pub fn apply_right(&self, a: &Array2<f64>) -> Array2<f64> {
        // A·M = (Mᵀ·Aᵀ)ᵀ
        let at = a.t().as_standard_layout().to_owned();
        let r = self.apply_left_t(&at);
        r.t().as_standard_layout().to_owned()
    }

    /// `A · Mᵀ`.
    pub fn apply_right_t(&self, a: &Array2<f64>) -> Array2<f64> {
        let at = a.t().as_standard_layout().to_owned();
        let r = self.apply_left(&at);
        r.t().as_standard_layout().to_owned()
    }

    /// Dense materialization; only allowed up to 2000 rows (test scale).
    pub fn to_dense(&self) -> Result<Array2<f64>> {
        let s = self.size();
        if s > 2000 {
            return Err(Error::invalid(format!(
                "dense materialization of a {s}x{s} combination matrix is capped at 2000"
            )));
        }
        let mut m = Array2::zeros((s, s));
        match self {
            CombinationMatrix::Banded { n, upper, lower, .. } => {
                for (j, &u) in upper.iter().enumerate() {
                    for i in 0..n - j {
                        m[[i, i + j]] += u;
                    }
                }
                for (j, &l) in lower.iter().enumerate().skip(1) {
                    for i in j..*n {
                        m[[i, i - j]] += l;
                    }
                }
            }
            CombinationMatrix::Block { n_traj, block, symmetrized } => {
                let n = *n_traj;
                for (j, &w) in block.iter().enumerate() {
                    for i in 0..n {
                        if *symmetrized && j > 0 {
                            m[[i, j * n + i]] += w / 2.0;
                            m[[j * n + i, i]] += w / 2.0;
                        } else {
                            m[[i, j * n + i]] += w;
                        }
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Assemble the banded single-trajectory combination matrix from uniform or
/// transfer-operator weights: `M_{i,i+j} = n·m_j/(n−j)` on the lag
/// diagonals, optionally replaced by `(M+Mᵀ)/2`.
pub fn toeplitz_matrix(
    w: &LaplaceWeights,
    n: usize,
    symmetrize: bool,
) -> Result<CombinationMatrix> {
    let lags: Vec<(usize, f64)> = match w.mode {
        WeightMode::Uniform => w.weights.iter().cloned().enumerate().collect(),
        WeightMode::TransferOperator => vec![(1, w.weights[0])],
        WeightMode::NonUniform => {
            return Err(Error::invalid(
                "non-uniform weights require the bundle combination matrix",
            ))
        }
    };
    let max_lag = lags.iter().map(|(j, _)| *j).max().unwrap_or(0);
    if n <= max_lag {
        return Err(Error::invalid(format!(
            "trajectory shorter than quadrature horizon: n={n} <= max lag {max_lag}"
        )));
    }
    let mut upper = vec![0.0; max_lag + 1];
    for (j, m) in lags {
        upper[j] = n as f64 * m / (n - j) as f64;
    }
    let lower = if symmetrize {
        let mut l = vec![0.0; upper.len()];
        for j in 1..upper.len() {
            l[j] = upper[j] / 2.0;
        }
        for u in upper.iter_mut().skip(1) {
            *u /= 2.0;
        }
        l
    } else {
        vec![0.0; upper.len()]
    };
    Ok(CombinationMatrix::Banded { n, upper, lower, symmetrized: symmetrize })
}

/// Assemble the multi-trajectory block combination matrix
/// `M_{i,jn+i} = (ℓ+1)·m_j` for a bundle of `n_traj` trajectories sharing
/// the weight grid.
pub fn bundle_matrix(w: &LaplaceWeights, n_traj: usize) -> Result<CombinationMatrix> {
    if n_traj < 1 {
        return Err(Error::invalid("bundle needs at least one trajectory"));
    }
    if w.mode == WeightMode::TransferOperator {
        return Err(Error::invalid(
            "transfer-operator weights have no bundle combination matrix",
        ));
    }
    let scale = w.nodes.len() as f64;
    let block: Vec<f64> = w.weights.iter().map(|m| scale * m).collect();
    Ok(CombinationMatrix::Block { n_traj, block, symmetrized: false })
}

/// Symmetrize a combination matrix: `(M + Mᵀ)/2`.
pub fn symmetrize(m: &CombinationMatrix) -> CombinationMatrix {
    match m {
        CombinationMatrix::Banded { n, upper, lower, symmetrized } => {
            if *symmetrized {
                return m.clone();
            }
            let mut u = upper.clone();
            let mut l = lower.clone();
            l.resize(u.len(), 0.0);
            for j in 1..u.len() {
                let avg = (u[j] + l[j]) / 2.0;
                u[j] = avg;
                l[j] = avg;
            }
            CombinationMatrix::Banded { n: *n, upper: u, lower: l, symmetrized: true }
        }
        CombinationMatrix::Block { n_traj, block, symmetrized } => {
            if *symmetrized {
                return m.clone();
            }
            CombinationMatrix::Block {
                n_traj: *n_traj,
                block: block.clone(),
                symmetrized: true,
            }
        }
    }
}

/// Evaluate the scalar quadrature against the closed form: returns
/// `(Σ_j m_j e^{λ t_j}, 1/(μ−λ), |difference|)` for `Re λ <= 0 < μ`.
pub fn scalar_quadrature_check(
    w: &LaplaceWeights,
    lambda: Complex64,
) -> (Complex64, Complex64, f64) {
    let approx: Complex64 = w
        .nodes
        .iter()
        .zip(w.weights.iter())
        .map(|(&t, &m)| (lambda * t).exp() * m)
        .sum();
    let exact = Complex64::new(1.0, 0.0) / (Complex64::new(w.mu, 0.0) - lambda);
    let err = (approx - exact).norm();
    (approx, exact, err)
}
