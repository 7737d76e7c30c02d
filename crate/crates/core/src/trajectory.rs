//! Time-stamped state samples of a stochastic process, plus CSV interchange.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// One realization of a Markov process sampled at strictly increasing times.
///
/// `states` is `n × d` in time order; `times` holds the `n` sampling times.
/// Values are immutable after construction, so a `Trajectory` can be shared
/// freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Array2<f64>,
    times: Array1<f64>,
    meta: BTreeMap<String, String>,
}

impl Trajectory {
    /// Build a trajectory, validating the type invariants: at least two
    /// samples, finite states, non-negative strictly increasing times.
    pub fn new(
        states: Array2<f64>,
        times: Array1<f64>,
        meta: BTreeMap<String, String>,
    ) -> Result<Self> {
        let n = states.nrows();
        if n < 2 {
            return Err(Error::invalid(format!("trajectory needs n >= 2 samples, got {n}")));
        }
        if times.len() != n {
            return Err(Error::invalid(format!(
                "times length {} does not match {} state rows",
                times.len(),
                n
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trajectory states contain non-finite entries"));
        }
        if times[0] < 0.0 {
            return Err(Error::invalid("trajectory times must be non-negative"));
        }
        for i in 1..n {
            if !(times[i] > times[i - 1]) {
                return Err(Error::invalid(format!(
                    "times must be strictly increasing (violated at index {i})"
                )));
            }
        }
        Ok(Self { states, times, meta })
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    pub fn times(&self) -> &Array1<f64> {
        &self.times
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 2 by construction
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    /// Detect a uniform time grid: returns the mean step when
    /// `max_gap/min_gap − 1 <= rel_tol`, `None` otherwise.
    ///
    /// Uniformity is detected rather than declared so the uniform-lag
    /// Toeplitz path cannot silently run on non-uniform data. The default
    /// tolerance used by callers is [`UNIFORM_REL_TOL`].
    pub fn is_uniform(&self, rel_tol: f64) -> Option<f64> {
        let t = &self.times;
        let mut min_gap = f64::INFINITY;
        let mut max_gap = 0.0f64;
        for i in 1..t.len() {
            let gap = t[i] - t[i - 1];
            min_gap = min_gap.min(gap);
            max_gap = max_gap.max(gap);
        }
        if max_gap / min_gap - 1.0 <= rel_tol {
            let span = t[t.len() - 1] - t[0];
            Some(span / (t.len() - 1) as f64)
        } else {
            None
        }
    }

    /// Keep rows `0, stride, 2·stride, …`.
    pub fn subsample(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        if stride >= self.len() {
            return Err(Error::invalid(format!(
                "empty result: stride {} >= trajectory length {}",
                stride,
                self.len()
            )));
        }
        let idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        let states = self.states.select(Axis(0), &idx);
        let times = Array1::from_iter(idx.iter().map(|&i| self.times[i]));
        Trajectory::new(states, times, self.meta.clone())
    }

    /// Write as CSV with header `t,x1,...,xd`, 17+ significant digits.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "t")?;
        for j in 1..=self.dim() {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{:.17e}", self.times[i])?;
            for j in 0..self.dim() {
                write!(w, ",{:.17e}", self.states[[i, j]])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Parse from the CSV format written by [`Trajectory::save_csv`].
    /// Errors cite the 1-based physical line number.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
        let file = std::fs::File::open(&path).map_err(|e| {
            Error::invalid(format!("cannot open {}: {e}", path.as_ref().display()))
        })?;
        Self::read_csv(BufReader::new(file))
    }

    pub fn read_csv(r: impl BufRead) -> Result<Trajectory> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, msg: "empty file".into() })?
            .map_err(Error::Io)?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.first() != Some(&"t") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header starting with 't', got '{header}'"),
            });
        }
        let d = cols.len() - 1;
        for (j, c) in cols.iter().skip(1).enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected column 'x{}', got '{c}'", j + 1),
                });
            }
        }
        if d == 0 {
            return Err(Error::Parse { line: 1, msg: "header has no state columns".into() });
        }
        let mut times = Vec::new();
        let mut flat = Vec::new();
        for (k, line) in lines.enumerate() {
            let lineno = k + 2;
            let line = line.map_err(Error::Io)?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} fields, got {}", d + 1, fields.len()),
                });
            }
            let mut row = Vec::with_capacity(d + 1);
            for f in &fields {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("non-numeric cell '{f}'"),
                })?;
                row.push(v);
            }
            if let Some(&prev) = times.last() {
                if row[0] <= prev {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("time {} not greater than previous {}", row[0], prev),
                    });
                }
            }
            times.push(row[0]);
            flat.extend_from_slice(&row[1..]);
        }
        let n = times.len();
        if n < 2 {
            return Err(Error::Parse {
                line: n + 1,
                msg: format!("trajectory needs at least 2 samples, got {n}"),
            });
        }
        let states = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Trajectory::new(states, Array1::from_vec(times), BTreeMap::new())
    }

    /// Attach a metadata entry (builder style; used by the simulators).
    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }
}

/// Default relative tolerance for [`Trajectory::is_uniform`]; simulator time
/// grids accumulate rounding on the order of machine epsilon per step.
pub const UNIFORM_REL_TOL: f64 = 1e-6;

/// Several trajectories observed at byte-identical times, as produced by
/// tracking `n` copies of the same process over one grid of `ℓ+1` instants.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle {
    trajectories: Vec<Trajectory>,
}

impl TrajectoryBundle {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::invalid("bundle must contain at least one trajectory"))?;
        for (i, t) in trajectories.iter().enumerate().skip(1) {
            if t.dim() != first.dim() {
                return Err(Error::invalid(format!(
                    "bundle member {i} has dimension {} != {}",
                    t.dim(),
                    first.dim()
                )));
            }
            if t.times().len() != first.times().len()
                || t.times()
                    .iter()
                    .zip(first.times().iter())
                    .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                return Err(Error::invalid(format!(
                    "bundle member {i} has a different time grid"
                )));
            }
        }
        Ok(Self { trajectories })
    }

    /// Number of trajectories.
    pub fn count(&self) -> usize {
        self.trajectories.len()
    }

    /// Number of grid instants (`ℓ+1`).
    pub fn grid_len(&self) -> usize {
        self.trajectories[0].times().len()
    }

    pub fn times(&self) -> &Array1<f64> {
        self.trajectories[0].times()
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    /// Stack all samples in grid-major order: all trajectories at `t_0`,
    /// then all at `t_1`, and so on. Returns an `n(ℓ+1) × d` matrix.
    pub fn stacked_states(&self) -> Array2<f64> {
        let n = self.count();
        let g = self.grid_len();
        let d = self.dim();
        let mut out = Array2::zeros((n * g, d));
        for j in 0..g {
            for (i, traj) in self.trajectories.iter().enumerate() {
                out.row_mut(j * n + i).assign(&traj.states().row(j));
            }
        }
        out
    }
}
