//! Weight-to-conductance mapping and the noisy analog multiply-accumulate.
//!
//! Algorithmic weights are mapped linearly onto device conductances,
//! `G = W·G0 + Gref`, with `G0` and `Gref` chosen so that the weight range
//! lands exactly on the conductance window. A shared reference column of
//! `Gref` devices is subtracted from every data column, so the noiseless
//! current difference is `Vr·G0·Σ W x`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RacaError, Result};
use crate::matrix::Matrix;
use crate::noise::{gaussian, NoisePhysics};

/// Linear mapping between algorithmic weights and conductances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMapSpec {
    pub w_min: f64,
    pub w_max: f64,
    /// Siemens.
    pub g_min: f64,
    pub g_max: f64,
    /// Siemens per unit weight.
    pub g0: f64,
    /// Siemens.
    pub g_ref: f64,
    /// Read-voltage amplitude in volts.
    pub v_r: f64,
}

impl WeightMapSpec {
    pub fn new(w_min: f64, w_max: f64, g_min: f64, g_max: f64, v_r: f64) -> Result<Self> {
        build_map_spec(w_min, w_max, g_min, g_max, v_r)
    }

    /// Mapping for the symmetric weight range `[-w_abs_max, w_abs_max]`.
    pub fn symmetric(w_abs_max: f64, g_min: f64, g_max: f64, v_r: f64) -> Result<Self> {
        build_map_spec(-w_abs_max, w_abs_max, g_min, g_max, v_r)
    }

    pub fn conductance(&self, w: f64) -> f64 {
        w * self.g0 + self.g_ref
    }

    pub fn weight(&self, g: f64) -> f64 {
        (g - self.g_ref) / self.g0
    }

    pub fn contains(&self, w: f64) -> bool {
        w >= self.w_min && w <= self.w_max
    }

    /// Current difference produced by a unit logit, `Vr·G0` (amperes).
    pub fn unit_current(&self) -> f64 {
        self.v_r * self.g0
    }
}

/// Derives `G0 = (Gmax − Gmin)/(Wmax − Wmin)` and
/// `Gref = (Wmax·Gmin − Wmin·Gmax)/(Wmax − Wmin)`.
pub fn build_map_spec(w_min: f64, w_max: f64, g_min: f64, g_max: f64, v_r: f64) -> Result<WeightMapSpec> {
    let finite = [w_min, w_max, g_min, g_max, v_r].iter().all(|v| v.is_finite());
    if !finite {
        return Err(RacaError::domain("weight map bounds must be finite"));
    }
    if !(w_max > w_min) {
        return Err(RacaError::domain(format!(
            "weight range is degenerate: [{w_min}, {w_max}]"
        )));
    }
    if !(g_min > 0.0 && g_max > g_min) {
        return Err(RacaError::domain(format!(
            "conductance window must satisfy 0 < g_min < g_max, got [{g_min}, {g_max}]"
        )));
    }
    if !(v_r > 0.0) {
        return Err(RacaError::domain(format!("read voltage must be positive, got {v_r}")));
    }
    let span = w_max - w_min;
    Ok(WeightMapSpec {
        w_min,
        w_max,
        g_min,
        g_max,
        g0: (g_max - g_min) / span,
        g_ref: (w_max * g_min - w_min * g_max) / span,
        v_r,
    })
}

/// How thermal noise is drawn for a crossbar read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseResolution {
    /// One Gaussian per device (data and reference column).
    #[default]
    PerDevice,
    /// One Gaussian per column with the summed device variance. Equal in
    /// distribution to `PerDevice`, with far fewer draws.
    PerColumn,
}

/// A programmed crossbar: one data column per neuron plus a shared reference
/// column of `g_ref` devices.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossbar {
    spec: WeightMapSpec,
    weights: Matrix,
    conductances: Matrix,
    /// `sqrt(G_ij)`, cached for the per-device sampler.
    sqrt_g: Matrix,
    /// `Σ_i G_ij` per column.
    column_conductance: Vec<f64>,
}

/// Output of one crossbar read.
#[derive(Debug, Clone, PartialEq)]
pub struct MacResult {
    /// `I_j` in amperes.
    pub column_currents: Vec<f64>,
    /// `I_ref` in amperes.
    pub reference_current: f64,
    /// `z_j = Σ_i W_ij x_i`.
    pub noiseless_logit: Vec<f64>,
}

impl MacResult {
    /// `I_j − I_ref` for every column.
    pub fn differences(&self) -> Vec<f64> {
        self.column_currents
            .iter()
            .map(|i| i - self.reference_current)
            .collect()
    }
}

/// Maps every weight with `G_ij = W_ij·G0 + Gref`.
pub fn map_weights(weights: &Matrix, spec: &WeightMapSpec) -> Result<Crossbar> {
    if weights.rows() == 0 || weights.cols() == 0 {
        return Err(RacaError::domain("crossbar needs at least one row and one column"));
    }
    for i in 0..weights.rows() {
        for (j, &w) in weights.row(i).iter().enumerate() {
            if !spec.contains(w) {
                return Err(RacaError::WeightOutOfRange {
                    layer: 0,
                    row: i,
                    col: j,
                    value: w,
                    w_min: spec.w_min,
                    w_max: spec.w_max,
                });
            }
        }
    }
    let conductances = Matrix::from_fn(weights.rows(), weights.cols(), |i, j| {
        // Clamp away the last-ulp overshoot at the window edges.
        spec.conductance(weights.get(i, j)).clamp(spec.g_min, spec.g_max)
    });
    let sqrt_g = Matrix::from_fn(weights.rows(), weights.cols(), |i, j| conductances.get(i, j).sqrt());
    let mut column_conductance = vec![0.0; weights.cols()];
    for i in 0..weights.rows() {
        for (acc, g) in column_conductance.iter_mut().zip(conductances.row(i)) {
            *acc += g;
        }
    }
    Ok(Crossbar {
        spec: *spec,
        weights: weights.clone(),
        conductances,
        sqrt_g,
        column_conductance,
    })
}

/// `V_i = x_i·Vr`. Activations must lie in `[0, 1]`.
pub fn encode_inputs(x: &[f64], v_r: f64) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            if (0.0..=1.0).contains(&xi) {
                Ok(xi * v_r)
            } else {
                Err(RacaError::domain(format!(
                    "activation {xi} at input {i} is outside [0, 1]"
                )))
            }
        })
        .collect()
}

impl Crossbar {
    pub fn spec(&self) -> &WeightMapSpec {
        &self.spec
    }

    /// Number of input rows (devices per column).
    pub fn n_rows(&self) -> usize {
        self.conductances.rows()
    }

    /// Number of neuron columns, excluding the reference column.
    pub fn n_cols(&self) -> usize {
        self.conductances.cols()
    }

    pub fn g_ref(&self) -> f64 {
        self.spec.g_ref
    }

    pub fn conductances(&self) -> &Matrix {
        &self.conductances
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// `Σ_i (G_ij + Gref)`: the conductance whose thermal noise reaches the
    /// comparator of column `j` after reference subtraction.
    pub fn noise_conductance(&self, column: usize) -> f64 {
        self.column_conductance[column] + self.n_rows() as f64 * self.spec.g_ref
    }

    /// Mean of [`Crossbar::noise_conductance`] over all columns.
    pub fn mean_noise_conductance(&self) -> f64 {
        let n = self.n_cols() as f64;
        (0..self.n_cols()).map(|j| self.noise_conductance(j)).sum::<f64>() / n
    }

    /// Standard deviation of `I_j − I_ref` for column `j`.
    pub fn difference_std(&self, column: usize, physics: &NoisePhysics) -> f64 {
        (physics.variance_per_siemens() * self.noise_conductance(column)).sqrt()
    }

    fn check_rows(&self, len: usize, context: &str) -> Result<()> {
        if len != self.n_rows() {
            return Err(RacaError::dimension(context, self.n_rows(), len));
        }
        Ok(())
    }

    /// `z_j = Σ_i W_ij x_i` from the stored weights.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_rows(x.len(), "crossbar activations")?;
        Ok(self.weights.vec_mul(x))
    }

    /// Noiseless column and reference currents for the given row voltages.
    pub fn signal_currents(&self, voltages: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_rows(voltages.len(), "crossbar voltages")?;
        let currents = self.conductances.vec_mul(voltages);
        let reference = voltages.iter().sum::<f64>() * self.spec.g_ref;
        Ok((currents, reference))
    }

    /// Adds one read's worth of thermal noise to `currents` and `reference`.
    ///
    /// Per-device draws are taken row by row, data columns first and the
    /// reference device last.
    pub fn add_noise<R: Rng + ?Sized>(
        &self,
        physics: &NoisePhysics,
        resolution: NoiseResolution,
        currents: &mut [f64],
        reference: &mut f64,
        stream: &mut R,
    ) {
        if physics.is_noiseless() {
            return;
        }
        let unit = physics.variance_per_siemens().sqrt();
        match resolution {
            NoiseResolution::PerDevice => {
                let ref_std = unit * self.spec.g_ref.sqrt();
                for i in 0..self.n_rows() {
                    for (c, &sg) in currents.iter_mut().zip(self.sqrt_g.row(i)) {
                        *c += gaussian(unit * sg, stream);
                    }
                    *reference += gaussian(ref_std, stream);
                }
            }
            NoiseResolution::PerColumn => {
                for (c, &g) in currents.iter_mut().zip(&self.column_conductance) {
                    *c += gaussian(unit * g.sqrt(), stream);
                }
                let ref_g = self.n_rows() as f64 * self.spec.g_ref;
                *reference += gaussian(unit * ref_g.sqrt(), stream);
            }
        }
    }

    /// One noisy read with an explicit noise resolution.
    pub fn read<R: Rng + ?Sized>(
        &self,
        voltages: &[f64],
        physics: &NoisePhysics,
        resolution: NoiseResolution,
        stream: &mut R,
    ) -> Result<MacResult> {
        let (mut currents, mut reference) = self.signal_currents(voltages)?;
        self.add_noise(physics, resolution, &mut currents, &mut reference, stream);
        let x: Vec<f64> = voltages.iter().map(|v| v / self.spec.v_r).collect();
        Ok(MacResult {
            column_currents: currents,
            reference_current: reference,
            noiseless_logit: self.weights.vec_mul(&x),
        })
    }
}

/// Noisy multiply-accumulate with one independent noise draw per device:
/// `I_j = Σ_i (V_i·G_ij + n_ij)` and `I_ref = Σ_i (V_i·Gref + n_i)`.
pub fn noisy_mac<R: Rng + ?Sized>(
    cb: &Crossbar,
    voltages: &[f64],
    physics: &NoisePhysics,
    stream: &mut R,
) -> Result<MacResult> {
    cb.read(voltages, physics, NoiseResolution::PerDevice, stream)
}

/// Deterministic `Vr·G0·z_j`, the mean of `I_j − I_ref`.
pub fn expected_current_difference(cb: &Crossbar, x: &[f64]) -> Result<Vec<f64>> {
    let unit = cb.spec.unit_current();
    Ok(cb.logits(x)?.into_iter().map(|z| unit * z).collect())
}
