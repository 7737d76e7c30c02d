//! TOML run configuration. Unknown keys are rejected everywhere so typos
//! fail before any computation.

use std::path::Path;

use genspec_core::error::{Error, Result};
use genspec_core::features::{DictionarySpec, KernelSpec};
use genspec_core::simulate::{LangevinSpec, OuSpec, Potential, ProcessSpec};
use ndarray::Array2;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub process: Option<ProcessConfig>,
    pub features: Option<FeaturesConfig>,
    pub estimator: Option<EstimatorConfig>,
    pub output: Option<OutputConfig>,
    pub oracle: Option<OracleConfig>,
    pub compare: Option<CompareConfig>,
    pub forecast: Option<ForecastConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("config error: {e}")))
    }

    pub fn process(&self) -> Result<&ProcessConfig> {
        self.process
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the [process] section"))
    }

    pub fn features(&self) -> Result<&FeaturesConfig> {
        self.features
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the [features] section"))
    }

    pub fn estimator(&self) -> Result<&EstimatorConfig> {
        self.estimator
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the [estimator] section"))
    }

    pub fn oracle(&self) -> Result<&OracleConfig> {
        self.oracle
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the [oracle] section"))
    }

    pub fn compare(&self) -> Result<&CompareConfig> {
        self.compare
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the [compare] section"))
    }

    pub fn forecast(&self) -> Result<&ForecastConfig> {
        self.forecast
            .as_ref()
            .ok_or_else(|| Error::invalid("config is missing the [forecast] section"))
    }
}

fn default_count() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessConfig {
    /// 1D overdamped Langevin dynamics in a named potential.
    Langevin {
        potential: PotentialConfig,
        gamma: f64,
        k_t: f64,
        step: f64,
        burn_in: usize,
        seed: u64,
        n_out: usize,
        out_stride: usize,
        #[serde(default = "default_count")]
        count: usize,
    },
    /// Linear SDE `dX = AX dt + B dW`.
    Ou {
        drift: Vec<Vec<f64>>,
        diffusion: Vec<Vec<f64>>,
        step: f64,
        burn_in: usize,
        seed: u64,
        n_out: usize,
        out_stride: usize,
        #[serde(default = "default_count")]
        count: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialConfig {
    TripleWell,
    Quadratic,
}

impl PotentialConfig {
    pub fn to_potential(&self) -> Potential {
        match self {
            PotentialConfig::TripleWell => Potential::TripleWell,
            PotentialConfig::Quadratic => Potential::Quadratic,
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map(|v| v.len()).unwrap_or(0);
    if r == 0 || c == 0 {
        return Err(Error::invalid(format!("{what} matrix is empty")));
    }
    let mut m = Array2::zeros((r, c));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::invalid(format!("{what} matrix has ragged rows")));
        }
        for (j, &v) in row.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

impl ProcessConfig {
    /// Build the simulator spec for trajectory index `i` (seeds are
    /// `seed + i`), with an optional seed override from the command line.
    pub fn to_spec(&self, index: usize, seed_override: Option<u64>) -> Result<ProcessSpec> {
        match self {
            ProcessConfig::Langevin { potential, gamma, k_t, step, burn_in, seed, .. } => {
                let spec = LangevinSpec {
                    potential: potential.to_potential(),
                    gamma: *gamma,
                    k_t: *k_t,
                    step: *step,
                    burn_in: *burn_in,
                    seed: seed_override.unwrap_or(*seed) + index as u64,
                };
                spec.validate()?;
                Ok(ProcessSpec::Langevin(spec))
            }
            ProcessConfig::Ou { drift, diffusion, step, burn_in, seed, .. } => {
                let a = matrix_from_rows(drift, "drift")?;
                let b = matrix_from_rows(diffusion, "diffusion")?;
                let spec = OuSpec::new(
                    a,
                    b,
                    *step,
                    *burn_in,
                    seed_override.unwrap_or(*seed) + index as u64,
                )?;
                Ok(ProcessSpec::Ou(spec))
            }
        }
    }

    pub fn count(&self) -> usize {
        match self {
            ProcessConfig::Langevin { count, .. } | ProcessConfig::Ou { count, .. } => *count,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            ProcessConfig::Langevin { n_out, .. } | ProcessConfig::Ou { n_out, .. } => *n_out,
        }
    }

    pub fn out_stride(&self) -> usize {
        match self {
            ProcessConfig::Langevin { out_stride, .. } | ProcessConfig::Ou { out_stride, .. } => {
                *out_stride
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeaturesConfig {
    /// Monomial dictionary up to a total degree (primal mode).
    Monomials { dim: usize, max_degree: usize },
    /// Gaussian kernel (dual mode); omit `length_scale` to use the median
    /// pairwise-distance heuristic on the training sample.
    Gaussian { length_scale: Option<f64> },
    /// Random Fourier feature dictionary (primal mode).
    RandomFourier {
        dim: usize,
        count: usize,
        length_scale: f64,
        seed: u64,
    },
    /// Linear-in-features kernel over a monomial dictionary (dual mode);
    /// reproduces the primal fit exactly.
    DictionaryKernel { dim: usize, max_degree: usize },
}

impl FeaturesConfig {
    pub fn to_dictionary(&self) -> Result<DictionarySpec> {
        match self {
            FeaturesConfig::Monomials { dim, max_degree } => Ok(DictionarySpec::Monomials {
                dim: *dim,
                max_degree: *max_degree,
            }),
            FeaturesConfig::RandomFourier { dim, count, length_scale, seed } => {
                Ok(DictionarySpec::RandomFourier {
                    dim: *dim,
                    count: *count,
                    length_scale: *length_scale,
                    seed: *seed,
                })
            }
            _ => Err(Error::invalid(
                "primal mode needs a dictionary (monomials or random_fourier features)",
            )),
        }
    }

    /// Kernel spec; `length_scale_hint` supplies the median heuristic value
    /// when the config leaves the Gaussian length scale open.
    pub fn to_kernel(&self, length_scale_hint: Option<f64>) -> Result<KernelSpec> {
        match self {
            FeaturesConfig::Gaussian { length_scale } => {
                let l = length_scale.or(length_scale_hint).ok_or_else(|| {
                    Error::invalid("gaussian kernel needs a length scale or a training sample")
                })?;
                Ok(KernelSpec::Gaussian { length_scale: l })
            }
            FeaturesConfig::DictionaryKernel { dim, max_degree } => Ok(KernelSpec::Dictionary {
                spec: DictionarySpec::Monomials { dim: *dim, max_degree: *max_degree },
            }),
            _ => Err(Error::invalid(
                "dual mode needs a kernel (gaussian or dictionary_kernel features)",
            )),
        }
    }

    pub fn needs_median_heuristic(&self) -> bool {
        matches!(self, FeaturesConfig::Gaussian { length_scale: None })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    Primal,
    Dual,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    /// Laplace shift μ; ignored in transfer-operator mode.
    pub mu: f64,
    pub gamma: f64,
    pub rank: usize,
    /// Quadrature horizon index; defaults to the μ·t_ℓ ≥ 10 rule.
    pub ell: Option<usize>,
    /// Observation lag; defaults to the trajectory's detected time step.
    pub dt: Option<f64>,
    #[serde(default)]
    pub self_adjoint: bool,
    /// Use the single-lag transfer-operator baseline instead of the
    /// resolvent quadrature.
    #[serde(default)]
    pub transfer_operator: bool,
    /// Keep every k-th sample before fitting (caps Gram size in dual mode).
    pub subsample: Option<usize>,
    /// Treat the input trajectories as a bundle on a shared (possibly
    /// non-uniform) grid and fit a single model.
    #[serde(default)]
    pub bundle: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Path to the reference spectrum fixture (JSON).
    pub fixture: String,
    /// Fitted model files to score against the fixture.
    pub models: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    Coordinate { index: usize },
    IndicatorAbove { index: usize, threshold: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    pub model: String,
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub observable: ObservableConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub potential: PotentialConfig,
    pub gamma: f64,
    pub k_t: f64,
    pub a: f64,
    pub b: f64,
    pub cells: usize,
    /// Number of leading eigenvalues to record.
    pub count: usize,
}
