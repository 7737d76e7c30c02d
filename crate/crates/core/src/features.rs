//! Feature dictionaries and kernels.
//!
//! The primal estimator works on an explicit dictionary `z: R^d -> R^N`
//! evaluated columnwise over the sample; the dual estimator works on a
//! kernel Gram matrix. Random Fourier features bridge the two by giving an
//! explicit finite dictionary whose inner products approximate a Gaussian
//! kernel.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Explicit feature dictionary.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionarySpec {
    /// All monomials `x_1^{a_1}···x_d^{a_d}` with total degree
    /// `a_1 + … + a_d <= max_degree`, ordered by total degree then
    /// lexicographically in the exponent vector. Degree 0 is the constant 1.
    Monomials { dim: usize, max_degree: usize },
    /// Random Fourier features `z_k(x) = sqrt(2/N) cos(ω_kᵀx + b_k)` with
    /// `ω_k ~ N(0, (2/ℓ²)I)` and `b_k ~ U[0, 2π)`, drawn from a seeded
    /// generator so the dictionary is reproducible.
    RandomFourier {
        dim: usize,
        count: usize,
        length_scale: f64,
        seed: u64,
    },
}

impl DictionarySpec {
    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        match self {
            DictionarySpec::Monomials { dim, .. } => *dim,
            DictionarySpec::RandomFourier { dim, .. } => *dim,
        }
    }

    /// Number of features `N`.
    pub fn len(&self) -> usize {
        match self {
            DictionarySpec::Monomials { dim, max_degree } => {
                monomial_exponents(*dim, *max_degree).len()
            }
            DictionarySpec::RandomFourier { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Check internal consistency before any evaluation.
    pub fn validate(&self) -> Result<()> {
        match self {
            DictionarySpec::Monomials { dim, .. } => {
                if *dim == 0 {
                    return Err(Error::invalid("dictionary dimension must be positive"));
                }
            }
            DictionarySpec::RandomFourier { dim, count, length_scale, .. } => {
                if *dim == 0 {
                    return Err(Error::invalid("dictionary dimension must be positive"));
                }
                if *count == 0 {
                    return Err(Error::invalid("random Fourier feature count must be positive"));
                }
                if !(*length_scale > 0.0) || !length_scale.is_finite() {
                    return Err(Error::invalid("length scale must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Exponent vectors for [`DictionarySpec::Monomials`], in evaluation order.
pub fn monomial_exponents(dim: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max_degree {
        let mut stack = vec![(Vec::new(), total)];
        let mut level = Vec::new();
        while let Some((prefix, rest)) = stack.pop() {
            if prefix.len() == dim - 1 {
                let mut e = prefix;
                e.push(rest);
                level.push(e);
                continue;
            }
            // push in reverse so lexicographic order pops first
            for a in (0..=rest).rev() {
                let mut p = prefix.clone();
                p.push(a);
                stack.push((p, rest - a));
            }
        }
        level.sort();
        out.extend(level);
    }
    out
}

/// Frozen random Fourier parameters: rows of `omega` are the frequencies,
/// `offset` the phases.
#[derive(Debug, Clone)]
pub struct FourierParams {
    pub omega: Array2<f64>,
    pub offset: Array1<f64>,
}

/// Draw the frequency/phase table for a [`DictionarySpec::RandomFourier`]
/// dictionary. Deterministic in the spec's seed.
pub fn fourier_params(dim: usize, count: usize, length_scale: f64, seed: u64) -> FourierParams {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (2.0f64).sqrt() / length_scale).unwrap();
    let mut omega = Array2::zeros((count, dim));
    for v in omega.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let mut offset = Array1::zeros(count);
    for v in offset.iter_mut() {
        *v = rng.gen::<f64>() * std::f64::consts::TAU;
    }
    FourierParams { omega, offset }
}

/// Evaluate the dictionary over a sample: returns the `N x n` matrix `Z`
/// with `Z[k, i] = z_k(x_i)` for states stored rowwise in `x` (`n x d`).
pub fn evaluate_dictionary(spec: &DictionarySpec, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
    spec.validate()?;
    if x.ncols() != spec.dim() {
        return Err(Error::invalid(format!(
            "state dimension {} does not match dictionary dimension {}",
            x.ncols(),
            spec.dim()
        )));
    }
    let n = x.nrows();
    match spec {
        DictionarySpec::Monomials { dim, max_degree } => {
            let exps = monomial_exponents(*dim, *max_degree);
            let mut z = Array2::zeros((exps.len(), n));
            for (k, e) in exps.iter().enumerate() {
                for i in 0..n {
                    let mut v = 1.0;
                    for (c, &a) in e.iter().enumerate() {
                        if a > 0 {
                            v *= x[[i, c]].powi(a as i32);
                        }
                    }
                    z[[k, i]] = v;
                }
            }
            Ok(z)
        }
        DictionarySpec::RandomFourier { dim, count, length_scale, seed } => {
            let p = fourier_params(*dim, *count, *length_scale, *seed);
            let amp = (2.0 / *count as f64).sqrt();
            // ω·xᵀ gives count x n phases
            let phase = p.omega.dot(&x.t());
            let mut z = phase;
            for (k, mut row) in z.rows_mut().into_iter().enumerate() {
                let b = p.offset[k];
                row.mapv_inplace(|t| amp * (t + b).cos());
            }
            Ok(z)
        }
    }
}

/// Kernel used by the dual (sample-space) estimator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `k(x, y) = exp(−‖x−y‖² / ℓ²)`.
    Gaussian { length_scale: f64 },
    /// `k(x, y) = z(x)ᵀ z(y)` for an explicit dictionary; makes the dual
    /// estimator reproduce the primal one exactly.
    Dictionary { spec: DictionarySpec },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { length_scale } => {
                if !(*length_scale > 0.0) || !length_scale.is_finite() {
                    return Err(Error::invalid("length scale must be positive"));
                }
                Ok(())
            }
            KernelSpec::Dictionary { spec } => spec.validate(),
        }
    }

    /// Evaluate `k(x, y)` for a single pair.
    pub fn eval(&self, x: &ArrayView1<f64>, y: &ArrayView1<f64>) -> Result<f64> {
        match self {
            KernelSpec::Gaussian { length_scale } => {
                let mut d2 = 0.0;
                for (a, b) in x.iter().zip(y.iter()) {
                    d2 += (a - b) * (a - b);
                }
                Ok((-d2 / (length_scale * length_scale)).exp())
            }
            KernelSpec::Dictionary { spec } => {
                let xm = x.insert_axis(ndarray::Axis(0));
                let ym = y.insert_axis(ndarray::Axis(0));
                let zx = evaluate_dictionary(spec, &xm)?;
                let zy = evaluate_dictionary(spec, &ym)?;
                Ok(zx.column(0).dot(&zy.column(0)))
            }
        }
    }
}

/// Cross-kernel matrix `K[i, j] = k(x_i, y_j)` for rowwise state matrices.
pub fn kernel_matrix(
    spec: &KernelSpec,
    x: &ArrayView2<f64>,
    y: &ArrayView2<f64>,
) -> Result<Array2<f64>> {
    spec.validate()?;
    if x.ncols() != y.ncols() {
        return Err(Error::invalid("state dimensions differ between samples"));
    }
    match spec {
        KernelSpec::Gaussian { length_scale } => {
            let inv = 1.0 / (length_scale * length_scale);
            let mut k = Array2::zeros((x.nrows(), y.nrows()));
            for i in 0..x.nrows() {
                let xi = x.row(i);
                for j in 0..y.nrows() {
                    let mut d2 = 0.0;
                    for (a, b) in xi.iter().zip(y.row(j).iter()) {
                        d2 += (a - b) * (a - b);
                    }
                    k[[i, j]] = (-d2 * inv).exp();
                }
            }
            Ok(k)
        }
        KernelSpec::Dictionary { spec } => {
            let zx = evaluate_dictionary(spec, x)?;
            let zy = evaluate_dictionary(spec, y)?;
            Ok(zx.t().dot(&zy))
        }
    }
}

/// Gram matrix `[k(x_i, x_j)]`, exactly symmetric, divided by `n` when
/// `scale_by_n` (the convention the sample-space estimator expects).
pub fn gram_matrix(
    spec: &KernelSpec,
    x: &ArrayView2<f64>,
    scale_by_n: bool,
) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let mut k = kernel_matrix(spec, x, x)?;
    let scale = if scale_by_n { 1.0 / n as f64 } else { 1.0 };
    for i in 0..n {
        for j in 0..i {
            let avg = (k[[i, j]] + k[[j, i]]) / 2.0 * scale;
            k[[i, j]] = avg;
            k[[j, i]] = avg;
        }
        k[[i, i]] *= scale;
    }
    Ok(k)
}

/// Median pairwise distance over a subsample, the usual default for a
/// Gaussian length scale. Subsamples deterministically (even stride) when
/// the sample exceeds `cap` points.
pub fn median_heuristic(x: &ArrayView2<f64>, cap: usize) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("need at least two points for the median heuristic"));
    }
    let stride = (n + cap - 1) / cap.max(1);
    let idx: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for a in 0..idx.len() {
        for b in 0..a {
            let mut d2 = 0.0;
            for (p, q) in x.row(idx[a]).iter().zip(x.row(idx[b]).iter()) {
                d2 += (p - q) * (p - q);
            }
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        (dists[m / 2 - 1] + dists[m / 2]) / 2.0
    };
    if !(median > 0.0) {
        return Err(Error::invalid("median pairwise distance is zero"));
    }
    Ok(median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn monomial_order_1d() {
        let e = monomial_exponents(1, 3);
        assert_eq!(e, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn monomial_order_2d() {
        let e = monomial_exponents(2, 2);
        assert_eq!(
            e,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![1, 0],
                vec![0, 2],
                vec![1, 1],
                vec![2, 0]
            ]
        );
    }

    #[test]
    fn monomial_count_matches_binomial() {
        // C(d + k, k) features in dimension d up to degree k
        let spec = DictionarySpec::Monomials { dim: 3, max_degree: 4 };
        assert_eq!(spec.len(), 35);
    }

    #[test]
    fn monomial_evaluation() {
        let spec = DictionarySpec::Monomials { dim: 1, max_degree: 2 };
        let x = array![[0.0], [2.0], [-1.5]];
        let z = evaluate_dictionary(&spec, &x.view()).unwrap();
        assert_eq!(z.shape(), &[3, 3]);
        assert_abs_diff_eq!(z[[0, 1]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[[1, 1]], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[[2, 1]], 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[[2, 2]], 2.25, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = DictionarySpec::Monomials { dim: 2, max_degree: 1 };
        let x = array![[1.0], [2.0]];
        assert!(evaluate_dictionary(&spec, &x.view()).is_err());
    }

    #[test]
    fn gaussian_kernel_values() {
        let k = KernelSpec::Gaussian { length_scale: 1.0 };
        let x = array![0.0];
        let y = array![2.0];
        let v = k.eval(&x.view(), &y.view()).unwrap();
        assert_abs_diff_eq!(v, (-4.0f64).exp(), epsilon = 1e-15);
        let same = k.eval(&x.view(), &x.view()).unwrap();
        assert_abs_diff_eq!(same, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_half_value_distance() {
        // distance l·sqrt(ln 2) gives k = 1/2
        for &l in &[1.0, 0.35, 2.5] {
            let k = KernelSpec::Gaussian { length_scale: l };
            let x = array![[0.0], [l * (2.0f64).ln().sqrt()]];
            let g = gram_matrix(&k, &x.view(), false).unwrap();
            assert_abs_diff_eq!(g[[0, 1]], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn gram_identical_points_and_scaling() {
        let k = KernelSpec::Gaussian { length_scale: 1.0 };
        let x = array![[0.3], [0.3]];
        let g = gram_matrix(&k, &x.view(), false).unwrap();
        for v in g.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-15);
        }
        let y = array![[0.0], [0.4], [-1.0]];
        let raw = gram_matrix(&k, &y.view(), false).unwrap();
        let scaled = gram_matrix(&k, &y.view(), true).unwrap();
        for (a, b) in raw.iter().zip(scaled.iter()) {
            assert_abs_diff_eq!(a / 3.0, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn gram_symmetric_psd() {
        let k = KernelSpec::Gaussian { length_scale: 0.7 };
        let x = array![[0.0], [0.3], [-1.1], [2.0]];
        let g = gram_matrix(&k, &x.view(), true).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(g[[i, i]], 0.25, epsilon = 1e-15);
            for j in 0..4 {
                assert_eq!(g[[i, j]].to_bits(), g[[j, i]].to_bits());
            }
        }
        for v in [array![1.0, 1.0, 1.0, 1.0], array![1.0, -1.0, 0.5, -0.5]] {
            let q = v.dot(&g.dot(&v));
            assert!(q >= -1e-12, "quadratic form {q}");
        }
    }

    #[test]
    fn dictionary_gram_equals_ztz() {
        let spec = DictionarySpec::Monomials { dim: 1, max_degree: 2 };
        let x = array![[0.2], [-0.7], [1.1]];
        let z = evaluate_dictionary(&spec, &x.view()).unwrap();
        let g = gram_matrix(&KernelSpec::Dictionary { spec }, &x.view(), false).unwrap();
        let want = z.t().dot(&z);
        for (a, b) in g.iter().zip(want.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn dictionary_kernel_matches_inner_product() {
        let spec = DictionarySpec::Monomials { dim: 1, max_degree: 2 };
        let k = KernelSpec::Dictionary { spec };
        let x = array![1.5];
        let y = array![-0.5];
        let v = k.eval(&x.view(), &y.view()).unwrap();
        // 1 + xy + x²y² = 1 − 0.75 + 0.5625
        assert_abs_diff_eq!(v, 0.8125, epsilon = 1e-14);
    }

    #[test]
    fn fourier_features_reproducible_and_bounded() {
        let spec = DictionarySpec::RandomFourier {
            dim: 2,
            count: 64,
            length_scale: 1.0,
            seed: 7,
        };
        let x = array![[0.1, -0.2], [1.0, 0.5]];
        let z1 = evaluate_dictionary(&spec, &x.view()).unwrap();
        let z2 = evaluate_dictionary(&spec, &x.view()).unwrap();
        assert_eq!(z1, z2);
        let bound = (2.0f64 / 64.0).sqrt();
        assert!(z1.iter().all(|v| v.abs() <= bound + 1e-15));

        let other = DictionarySpec::RandomFourier {
            dim: 2,
            count: 64,
            length_scale: 1.0,
            seed: 8,
        };
        let z3 = evaluate_dictionary(&other, &x.view()).unwrap();
        assert_ne!(z1, z3);
    }

    #[test]
    fn fourier_inner_product_approximates_gaussian_kernel() {
        let ls = 1.3;
        let spec = DictionarySpec::RandomFourier {
            dim: 1,
            count: 20_000,
            length_scale: ls,
            seed: 11,
        };
        let x = array![[0.0], [0.9]];
        let z = evaluate_dictionary(&spec, &x.view()).unwrap();
        let approx = z.column(0).dot(&z.column(1));
        let exact = (-(0.9f64 * 0.9) / (ls * ls)).exp();
        assert!((approx - exact).abs() < 0.03, "approx {approx} exact {exact}");
    }

    #[test]
    fn median_heuristic_simple() {
        let x = array![[0.0], [1.0], [3.0]];
        // pairwise distances 1, 2, 3 -> median 2
        let m = median_heuristic(&x.view(), 1000).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn median_heuristic_rejects_degenerate() {
        let x = array![[1.0], [1.0]];
        assert!(median_heuristic(&x.view(), 100).is_err());
        let y = array![[1.0]];
        assert!(median_heuristic(&y.view(), 100).is_err());
    }
}
