//! Crossbars that realize prescribed logits, for sweeps and statistical checks.
//!
//! A probe with `n_rows` devices per column drives the first half of the rows
//! at `x = 1` with weights `z_j/h` and parks the second half at `x = 0` with
//! weights `−z_j/h` (`h = n_rows/2`). Every column then carries the same total
//! conductance `n_rows·Gref`, so all neurons see identical noise and the
//! logit is exactly `z_j`.

use serde::{Deserialize, Serialize};

use crate::crossbar::{map_weights, Crossbar, WeightMapSpec};
use crate::error::{RacaError, Result};
use crate::matrix::Matrix;
use crate::neurons::calibrate_bandwidth;
use crate::noise::NoisePhysics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitProbe {
    /// Devices per column (even, at least 2).
    pub n_rows: usize,
    /// Siemens.
    pub g_min: f64,
    pub g_max: f64,
    /// Volts.
    pub v_r: f64,
    /// Largest |logit| the probe must represent.
    pub logit_range: f64,
}

impl Default for LogitProbe {
    fn default() -> Self {
        Self {
            n_rows: 2,
            g_min: 1e-6,
            g_max: 1e-5,
            v_r: 0.05,
            logit_range: 8.0,
        }
    }
}

/// A realized probe: crossbar, its input activations and mapping.
#[derive(Debug, Clone)]
pub struct ProbeInstance {
    pub crossbar: Crossbar,
    pub activations: Vec<f64>,
    pub spec: WeightMapSpec,
}

impl LogitProbe {
    fn half(&self) -> Result<f64> {
        if self.n_rows < 2 || !self.n_rows.is_multiple_of(2) {
            return Err(RacaError::domain(format!(
                "probe needs an even row count >= 2, got {}",
                self.n_rows
            )));
        }
        Ok((self.n_rows / 2) as f64)
    }

    /// Mapping whose weight range covers `±logit_range/h`.
    pub fn spec(&self) -> Result<WeightMapSpec> {
        let h = self.half()?;
        WeightMapSpec::symmetric(self.logit_range / h, self.g_min, self.g_max, self.v_r)
    }

    pub fn build(&self, logits: &[f64]) -> Result<ProbeInstance> {
        let h = self.half()?;
        if logits.is_empty() {
            return Err(RacaError::domain("probe needs at least one logit"));
        }
        if let Some(z) = logits.iter().find(|z| !(z.abs() <= self.logit_range)) {
            return Err(RacaError::domain(format!(
                "logit {z} exceeds the probe range ±{}",
                self.logit_range
            )));
        }
        let spec = self.spec()?;
        let half = self.n_rows / 2;
        let weights = Matrix::from_fn(self.n_rows, logits.len(), |i, j| {
            let w = logits[j] / h;
            if i < half {
                w
            } else {
                -w
            }
        });
        let crossbar = map_weights(&weights, &spec)?;
        let activations = (0..self.n_rows).map(|i| if i < half { 1.0 } else { 0.0 }).collect();
        Ok(ProbeInstance {
            crossbar,
            activations,
            spec,
        })
    }

    /// Physics at `temperature` whose bandwidth gives total noise
    /// `lambda·Vr·G0` on this probe.
    pub fn calibrated_physics(&self, temperature: f64, lambda: f64) -> Result<NoisePhysics> {
        let inst = self.build(&[0.0])?;
        let base = NoisePhysics::new(temperature, 0.0)?;
        let df = calibrate_bandwidth(&inst.spec, &inst.crossbar, &base, lambda)?;
        base.with_bandwidth(df)
    }
}
