//! Simulated fingertip load cell: raw signal, bias, noise, calibration and
//! contact detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::GraspError;

pub const GAMMA_FINGER1: f64 = 11.02;
pub const GAMMA_FINGER2: f64 = 11.03;
pub const DEFAULT_BIAS_RAW: f64 = 0.5;
pub const BIAS_SAMPLES: usize = 1000;
/// Peak unloaded calibrated noise, taken as five standard deviations.
pub const NOISE_PEAK_N: f64 = 0.1;

/// Raw-unit noise sigma such that `5 σ γ` equals [`NOISE_PEAK_N`].
pub fn default_noise_sigma(gamma: f64) -> f64 {
    NOISE_PEAK_N / (5.0 * gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorParams {
    /// Nominal N per raw unit used for calibration.
    pub gamma: f64,
    /// Raw offset of the unloaded cell.
    pub bias: f64,
    pub noise_sigma: f64,
    /// Relative error of the physical gain versus `gamma`. A value of 0.01
    /// makes the calibrated reading 1% low.
    pub gain_error: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self::for_gamma(GAMMA_FINGER1)
    }
}

impl SensorParams {
    pub fn for_gamma(gamma: f64) -> Self {
        Self { gamma, bias: DEFAULT_BIAS_RAW, noise_sigma: default_noise_sigma(gamma), gain_error: 0.0 }
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(GraspError::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(GraspError::InvalidParameter(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !(self.bias.is_finite() && self.gain_error.is_finite() && self.gain_error > -1.0) {
            return Err(GraspError::InvalidParameter("bias / gain_error out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub raw: f64,
    pub calibrated: f64,
    pub timestamp: f64,
}

/// One load cell with its own deterministic noise stream.
#[derive(Debug, Clone)]
pub struct SensorModel {
    params: SensorParams,
    seed: u64,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    bias_estimate: Option<f64>,
}

impl SensorModel {
    pub fn new(params: SensorParams, seed: u64) -> Result<Self, GraspError> {
        params.validate()?;
        let noise = (params.noise_sigma > 0.0).then(|| Normal::new(0.0, params.noise_sigma).expect("sigma validated"));
        Ok(Self { params, seed, rng: ChaCha8Rng::seed_from_u64(seed), noise, bias_estimate: None })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn bias_estimate(&self) -> Option<f64> {
        self.bias_estimate
    }

    /// Overrides the stored bias estimate.
    pub fn set_bias_estimate(&mut self, b: f64) {
        self.bias_estimate = Some(b);
    }

    pub fn sample_raw(&mut self, true_force: f64) -> f64 {
        let physical_gamma = self.params.gamma * (1.0 + self.params.gain_error);
        let n = self.noise.map_or(0.0, |d| d.sample(&mut self.rng));
        true_force / physical_gamma + self.params.bias + n
    }

    /// Averages `n_samples` unloaded readings and stores the result.
    pub fn estimate_bias(&mut self, n_samples: usize) -> Result<f64, GraspError> {
        if n_samples < 1 {
            return Err(GraspError::InvalidParameter("bias estimation needs at least one sample".into()));
        }
        let sum: f64 = (0..n_samples).map(|_| self.sample_raw(0.0)).sum();
        let b = sum / n_samples as f64;
        self.bias_estimate = Some(b);
        Ok(b)
    }

    /// Calibrated reading in N. Uses the stored bias estimate, or zero bias
    /// before calibration.
    pub fn calibrate(&self, raw: f64) -> f64 {
        calibrate(raw, self.params.gamma, self.bias_estimate.unwrap_or(0.0))
    }

    pub fn read(&mut self, true_force: f64, timestamp: f64) -> SensorReading {
        let raw = self.sample_raw(true_force);
        SensorReading { raw, calibrated: self.calibrate(raw), timestamp }
    }
}

pub fn calibrate(raw: f64, gamma: f64, bias_estimate: f64) -> f64 {
    gamma * (raw - bias_estimate)
}

pub fn contact_detected(f_calibrated: f64, f_theta: f64) -> bool {
    f_calibrated > f_theta
}

/// Threshold detector with an optional minimum-detectable floor and a
/// consecutive-tick debounce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactDetector {
    pub f_theta: f64,
    pub floor: f64,
    pub debounce: u32,
    count: u32,
}

impl ContactDetector {
    pub fn new(f_theta: f64, floor: f64, debounce: u32) -> Self {
        Self { f_theta, floor, debounce: debounce.max(1), count: 0 }
    }

    pub fn update(&mut self, f_calibrated: f64) -> bool {
        if contact_detected(f_calibrated, self.f_theta.max(self.floor)) {
            self.count = self.count.saturating_add(1);
        } else {
            self.count = 0;
        }
        self.count >= self.debounce
    }

    pub fn reset(&mut self) {
        self.count = 0;
    }
}
