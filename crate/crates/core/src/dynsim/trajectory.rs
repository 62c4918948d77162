use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{param, Error, Result};

/// Uniformly sampled oscillator states. `states` and `rates` are `n × T`
/// with one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Displacements (mass-spring) or unwrapped phases (Kuramoto).
    pub states: DMatrix<f64>,
    /// Velocities or instantaneous phase velocities.
    pub rates: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: DMatrix<f64>, rates: DMatrix<f64>) -> Result<Self> {
        if states.shape() != rates.shape() {
            return param("states and rates differ in shape");
        }
        if states.ncols() != times.len() {
            return param("sample count does not match time grid");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return param("time grid is not strictly increasing");
        }
        if times.len() > 2 {
            let dt = times[1] - times[0];
            let scale = times[0].abs().max(times[times.len() - 1].abs()).max(1.0);
            if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-12 * scale) {
                return param("time grid is not uniform");
            }
        }
        Ok(Self { times, states, rates })
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Samples whose time lies in `[start, end]`; times are not rebased.
    pub fn window(&self, start: f64, end: f64) -> Trajectory {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= start - 1e-9 && self.times[i] <= end + 1e-9)
            .collect();
        self.select(&idx)
    }

    /// Every `step`-th sample starting with the first.
    pub fn decimate(&self, step: usize) -> Trajectory {
        let idx: Vec<usize> = (0..self.len()).step_by(step.max(1)).collect();
        self.select(&idx)
    }

    /// Copy with independent Gaussian noise of standard deviation `std` added
    /// to states and rates, as a sensor would record them.
    pub fn with_observation_noise(&self, std: f64, seed: u64) -> Result<Trajectory> {
        if !(std >= 0.0 && std.is_finite()) {
            return param(format!("noise std must be a non-negative number, got {std}"));
        }
        let normal = Normal::new(0.0, std).map_err(|e| Error::Parameter(format!("noise std {std}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.states.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        out.rates.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        Ok(out)
    }

    fn select(&self, idx: &[usize]) -> Trajectory {
        Trajectory {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            states: self.states.select_columns(idx),
            rates: self.rates.select_columns(idx),
        }
    }

    /// CSV with header `t,x_0..x_{n-1},v_0..v_{n-1}`; values use the
    /// shortest decimal that round-trips.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("t");
        for i in 0..n {
            write!(out, ",x_{i}").unwrap();
        }
        for i in 0..n {
            write!(out, ",v_{i}").unwrap();
        }
        out.push('\n');
        for (c, t) in self.times.iter().enumerate() {
            write!(out, "{t:?}").unwrap();
            for i in 0..n {
                write!(out, ",{:?}", self.states[(i, c)]).unwrap();
            }
            for i in 0..n {
                write!(out, ",{:?}", self.rates[(i, c)]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() % 2 != 1 {
            return Err(Error::Parse("trajectory header must be t,x_0..,v_0..".into()));
        }
        let n = (cols.len() - 1) / 2;
        for i in 0..n {
            if cols[1 + i] != format!("x_{i}") || cols[1 + n + i] != format!("v_{i}") {
                return Err(Error::Parse(format!("unexpected trajectory header column near index {i}")));
            }
        }
        let mut times = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!("row {} has {} fields, expected {}", lineno + 2, fields.len(), cols.len())));
            }
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.trim().parse::<f64>()).collect();
            let parsed = parsed.map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            times.push(parsed[0]);
            values.extend_from_slice(&parsed[1..]);
        }
        let t = times.len();
        let states = DMatrix::from_fn(n, t, |i, c| values[c * 2 * n + i]);
        let rates = DMatrix::from_fn(n, t, |i, c| values[c * 2 * n + n + i]);
        Trajectory::new(times, states, rates)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
