//! Subcommand implementations.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use genspec_core::error::{Error, Result};
use genspec_core::estimator::{
    fit_bundle, fit_dual, fit_primal, Basis, FitConfig, Observable, SpectralModel,
};
use genspec_core::features::median_heuristic;
use genspec_core::oracle::SpectrumFixture;
use genspec_core::quadrature::{
    horizon_ell, nonuniform_weights, transfer_operator_weights, trapezoid_weights, LaplaceWeights,
};
use genspec_core::simulate::euler_maruyama;
use genspec_core::trajectory::{Trajectory, TrajectoryBundle, UNIFORM_REL_TOL};
use ndarray::Array1;
use rayon::prelude::*;

use crate::config::{
    EstimatorConfig, EstimatorMode, FeaturesConfig, ObservableConfig, RunConfig,
};

/// Resolve the output directory: `--out` wins, then `[output].directory`,
/// then the current directory. Created if absent.
pub fn resolve_out_dir(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => cfg
            .output
            .as_ref()
            .and_then(|o| o.directory.as_deref())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::invalid(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn simulate(cfg: &RunConfig, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let process = cfg.process()?;
    let dir = resolve_out_dir(cfg, out)?;
    let count = process.count();
    let results: Vec<Result<(PathBuf, usize, usize)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = process.to_spec(i, seed)?;
            let traj = euler_maruyama(&spec, process.n_out(), process.out_stride())?;
            let path = dir.join(format!("traj_{i:03}.csv"));
            traj.save_csv(&path)?;
            Ok((path, traj.len(), traj.dim()))
        })
        .collect();
    for r in results {
        let (path, n, d) = r?;
        println!("wrote {} ({n} samples, dim {d})", path.display());
    }
    println!("simulated {count} trajectories into {}", dir.display());
    Ok(())
}

/// Build quadrature weights for a uniformly sampled trajectory according to
/// the estimator settings.
fn uniform_weights(est: &EstimatorConfig, traj_dt: f64) -> Result<LaplaceWeights> {
    let dt = est.dt.unwrap_or(traj_dt);
    if est.transfer_operator {
        return transfer_operator_weights(dt);
    }
    let ell = est.ell.unwrap_or_else(|| horizon_ell(est.mu, dt, 10.0));
    trapezoid_weights(est.mu, dt, ell)
}

fn fit_one(
    features: &FeaturesConfig,
    est: &EstimatorConfig,
    traj: &Trajectory,
) -> Result<SpectralModel> {
    let traj = match est.subsample {
        Some(k) => traj.subsample(k)?,
        None => traj.clone(),
    };
    let dt = traj.is_uniform(UNIFORM_REL_TOL).ok_or_else(|| {
        Error::invalid("trajectory is not uniformly sampled; use bundle mode with explicit nodes")
    })?;
    let weights = uniform_weights(est, dt)?;
    let fit_cfg = FitConfig {
        gamma: est.gamma,
        rank: est.rank,
        weights,
        self_adjoint: est.self_adjoint,
    };
    let states = traj.states().view();
    match est.mode {
        EstimatorMode::Primal => fit_primal(&features.to_dictionary()?, &states, &fit_cfg),
        EstimatorMode::Dual => {
            let hint = if features.needs_median_heuristic() {
                Some(median_heuristic(&states, 1000)?)
            } else {
                None
            };
            fit_dual(&features.to_kernel(hint)?, &states, &fit_cfg)
        }
    }
}

fn fit_bundle_from_files(
    features: &FeaturesConfig,
    est: &EstimatorConfig,
    paths: &[PathBuf],
) -> Result<SpectralModel> {
    let mut trajs = Vec::with_capacity(paths.len());
    for p in paths {
        trajs.push(Trajectory::load_csv(p)?);
    }
    let bundle = TrajectoryBundle::new(trajs)?;
    let times: Vec<f64> = bundle.times().to_vec();
    let weights = nonuniform_weights(est.mu, &times)?;
    let fit_cfg = FitConfig {
        gamma: est.gamma,
        rank: est.rank,
        weights,
        self_adjoint: est.self_adjoint,
    };
    let basis = match est.mode {
        EstimatorMode::Primal => Basis::Dictionary {
            dict: features.to_dictionary()?,
        },
        EstimatorMode::Dual => {
            let hint = if features.needs_median_heuristic() {
                Some(median_heuristic(&bundle.stacked_states().view(), 1000)?)
            } else {
                None
            };
            Basis::Kernel {
                kernel: features.to_kernel(hint)?,
            }
        }
    };
    fit_bundle(&bundle, &basis, &fit_cfg)
}

fn print_model_table(label: &str, model: &SpectralModel) {
    println!("model {label} ({} mode, rank {})", model.mode(), model.rank());
    println!("{:>4}  {:>24}  {:>12}  {:>12}", "i", "eigenvalue", "sigma", "eta");
    for i in 0..model.rank() {
        let lam = model.eigenvalues[i];
        let lam_str = if lam.im == 0.0 {
            format!("{:.6}", lam.re)
        } else {
            format!("{:.6}{:+.6}i", lam.re, lam.im)
        };
        println!(
            "{:>4}  {:>24}  {:>12.6e}  {:>12.6}",
            i + 1,
            lam_str,
            model.singular_values[i],
            model.metric_distortions[i]
        );
    }
    println!("singular tail: {:.6e}", model.singular_tail());
}

pub fn fit(cfg: &RunConfig, trajectories: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let features = cfg.features()?;
    let est = cfg.estimator()?;
    if trajectories.is_empty() {
        return Err(Error::invalid("fit needs at least one trajectory CSV path"));
    }
    for p in trajectories {
        if !p.exists() {
            return Err(Error::invalid(format!(
                "trajectory file not found: {}",
                p.display()
            )));
        }
    }
    let dir = resolve_out_dir(cfg, out)?;
    if est.bundle {
        let model = fit_bundle_from_files(features, est, trajectories)?;
        let path = dir.join("model_bundle.json");
        model.save_json(&path, None)?;
        print_model_table("bundle", &model);
        println!("wrote {}", path.display());
        return Ok(());
    }
    let results: Vec<Result<(PathBuf, SpectralModel)>> = trajectories
        .par_iter()
        .map(|p| {
            let traj = Trajectory::load_csv(p)?;
            let model = fit_one(features, est, &traj)?;
            let stem = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("trajectory");
            let path = dir.join(format!("model_{stem}.json"));
            model.save_json(&path, Some(p.display().to_string()))?;
            Ok((path, model))
        })
        .collect();
    for (r, src) in results.into_iter().zip(trajectories) {
        let (path, model) = r?;
        print_model_table(&src.display().to_string(), &model);
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// References with |λ| below this are scored with absolute error: relative
/// error against a zero eigenvalue is meaningless.
const TRIVIAL_REFERENCE_TOL: f64 = 1e-6;

pub fn compare(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let cc = cfg.compare()?;
    let fixture = SpectrumFixture::load(Path::new(&cc.fixture))?;
    let dir = resolve_out_dir(cfg, out)?;
    let csv_path = dir.join("compare.csv");
    let mut rows = String::new();
    rows.push_str(
        "model,index,index_nontrivial,estimate_re,estimate_im,reference,error,absolute_error\n",
    );
    let mut rel_errors: Vec<Vec<f64>> = Vec::new();
    for model_path in &cc.models {
        let model = SpectralModel::load_json(Path::new(model_path))?;
        let k = model.rank().min(fixture.eigenvalues.len());
        // both files sort eigenvalues by descending real part, so the
        // pairing is positional; index counts from 1 including the trivial
        // eigenvalue, index_nontrivial from 0 so the leading nontrivial
        // pair is index_nontrivial = 1 in both conventions
        for i in 0..k {
            let est = model.eigenvalues[i];
            let reference = fixture.eigenvalues[i];
            let absolute = reference.abs() < TRIVIAL_REFERENCE_TOL;
            let err = if absolute {
                est.norm()
            } else {
                (est - reference).norm() / reference.abs()
            };
            if !absolute {
                if rel_errors.len() < i + 1 {
                    rel_errors.resize(i + 1, Vec::new());
                }
                rel_errors[i].push(err);
            }
            rows.push_str(&format!(
                "{model_path},{},{},{},{},{},{},{}\n",
                i + 1,
                i,
                est.re,
                est.im,
                reference,
                err,
                absolute
            ));
        }
    }
    std::fs::write(&csv_path, &rows)?;
    println!("wrote {}", csv_path.display());
    for (i, errs) in rel_errors.iter().enumerate() {
        if errs.is_empty() {
            continue;
        }
        let mut sorted = errs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let median = sorted[sorted.len() / 2];
        println!(
            "eigenvalue {} relative error: mean {mean:.4}, median {median:.4}, worst {:.4}",
            i + 1,
            sorted[sorted.len() - 1]
        );
    }
    Ok(())
}

pub fn forecast(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let fc = cfg.forecast()?;
    let model = SpectralModel::load_json(Path::new(&fc.model))?;
    let obs = match &fc.observable {
        ObservableConfig::Coordinate { index } => Observable::Coordinate { index: *index },
        ObservableConfig::IndicatorAbove { index, threshold } => Observable::IndicatorAbove {
            index: *index,
            threshold: *threshold,
        },
    };
    let x0 = Array1::from_vec(fc.x0.clone());
    let dir = resolve_out_dir(cfg, out)?;
    let path = dir.join("forecast.csv");
    let file = std::fs::File::create(&path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "t,prediction")?;
    for &t in &fc.times {
        let pred = model.forecast(&obs, &x0.view(), t)?;
        writeln!(w, "{t},{pred}")?;
        println!("t = {t:>8}: {pred}");
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn oracle(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let oc = cfg.oracle()?;
    let fixture = SpectrumFixture::compute(
        &oc.potential.to_potential(),
        oc.gamma,
        oc.k_t,
        oc.a,
        oc.b,
        oc.cells,
        oc.count,
    )?;
    let dir = resolve_out_dir(cfg, out)?;
    let path = dir.join(format!("{}_spectrum.json", fixture.potential));
    fixture.save(&path)?;
    println!(
        "{} potential on [{}, {}], {} cells:",
        fixture.potential, oc.a, oc.b, oc.cells
    );
    for (i, lam) in fixture.eigenvalues.iter().enumerate() {
        println!("lambda_{} = {lam:.10}", i + 1);
    }
    println!("wrote {}", path.display());
    Ok(())
}
