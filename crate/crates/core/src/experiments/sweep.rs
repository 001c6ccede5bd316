//! Comparator firing probability versus logit while one physical knob moves.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, SweepAxis, SweepConfig};
use crate::error::{RacaError, Result};
use crate::neurons::{analytic_fire_probability, logistic};
use crate::noise::NoisePhysics;
use crate::probe::{LogitProbe, ProbeInstance};
use crate::rng::derive_stream;

const CHUNK: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub knob: f64,
    pub z: f64,
    pub trials: u64,
    pub fired: u64,
    pub empirical: f64,
    pub analytic: f64,
    pub logistic: f64,
}

/// Noise level and slope of one knob setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSetting {
    pub axis: &'static str,
    pub knob: f64,
    pub n_rows: usize,
    pub v_r: f64,
    pub g0: f64,
    pub bandwidth_hz: f64,
    /// Noise standard deviation of `I_j − I_ref` over `Vr·G0`.
    pub noise_over_unit: f64,
    /// `20·log10(Vr·G0 / σ)`, the SNR of a unit logit.
    pub snr_db: f64,
    /// `dP/dz` at `z = 0` from the erf expression.
    pub slope_at_zero: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidSweep {
    pub rows: Vec<SweepRow>,
    pub settings: Vec<SweepSetting>,
}

fn z_grid(s: &SweepConfig) -> Vec<f64> {
    let step = (s.z_max - s.z_min) / (s.z_count - 1) as f64;
    (0..s.z_count).map(|k| s.z_min + k as f64 * step).collect()
}

/// Probe and physics at knob value `v`. The bandwidth is calibrated once at
/// the base setting and then held, except on the bandwidth axis.
fn setting(s: &SweepConfig, v: f64, z_range: f64) -> Result<(LogitProbe, NoisePhysics)> {
    let base_rows = match s.axis {
        SweepAxis::NCol => s.values.iter().cloned().fold(f64::INFINITY, f64::min) as usize,
        _ => s.n_rows,
    };
    let base = LogitProbe {
        n_rows: base_rows,
        g_min: s.g_min,
        g_max: s.g_max,
        v_r: s.v_r,
        logit_range: z_range,
    };
    let physics = base
        .calibrated_physics(s.temperature, s.lambda)
        .map_err(|e| RacaError::Config(format!("sigmoid_sweep base setting: {e}")))?;
    Ok(match s.axis {
        SweepAxis::VR => (LogitProbe { v_r: v, ..base }, physics),
        SweepAxis::G0 => (
            LogitProbe {
                g_min: s.g_min * v,
                g_max: s.g_max * v,
                ..base
            },
            physics,
        ),
        SweepAxis::Bandwidth => (base, physics.with_bandwidth(physics.bandwidth * v)?),
        SweepAxis::NCol => {
            // Same per-device weight range as the base probe.
            let n = v as usize;
            let range = z_range * n as f64 / base_rows as f64;
            (
                LogitProbe {
                    n_rows: n,
                    logit_range: range,
                    ..base
                },
                physics,
            )
        }
    })
}

fn count_fires(inst: &ProbeInstance, physics: &NoisePhysics, s: &SweepConfig, seed: u64, k: usize) -> Result<Vec<u64>> {
    let cb = &inst.crossbar;
    let voltages: Vec<f64> = inst.activations.iter().map(|x| x * cb.spec().v_r).collect();
    let (signal, reference) = cb.signal_currents(&voltages)?;
    let n_chunks = s.trials.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = derive_stream(seed, &[k as u64, c as u64]);
            let mut counts = vec![0u64; cb.n_cols()];
            let mut currents = signal.clone();
            let trials = CHUNK.min(s.trials - c * CHUNK);
            for _ in 0..trials {
                currents.copy_from_slice(&signal);
                let mut r = reference;
                cb.add_noise(physics, s.noise_resolution, &mut currents, &mut r, &mut stream);
                for (n, i) in counts.iter_mut().zip(&currents) {
                    *n += u64::from(i - r > 0.0);
                }
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; cb.n_cols()];
    for c in per_chunk {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(total)
}

pub fn run_sigmoid_sweep(cfg: &ExperimentConfig) -> Result<SigmoidSweep> {
    let s = &cfg.sigmoid_sweep;
    if s.values.is_empty() {
        return Err(RacaError::Config("sigmoid_sweep.values is empty".into()));
    }
    let zs = z_grid(s);
    let z_range = zs.iter().fold(0.0f64, |m, z| m.max(z.abs())).max(f64::MIN_POSITIVE);
    let mut rows = Vec::with_capacity(zs.len() * s.values.len());
    let mut settings = Vec::with_capacity(s.values.len());
    for (k, &v) in s.values.iter().enumerate() {
        let (probe, physics) = setting(s, v, z_range)?;
        let inst = probe
            .build(&zs)
            .map_err(|e| RacaError::Config(format!("sigmoid_sweep {} = {v}: {e}", s.axis.name())))?;
        let fired = count_fires(&inst, &physics, s, cfg.seed, k)?;
        let cb = &inst.crossbar;
        let unit = cb.spec().unit_current();
        let noise = cb.difference_std(0, &physics) / unit;
        settings.push(SweepSetting {
            axis: s.axis.name(),
            knob: v,
            n_rows: probe.n_rows,
            v_r: probe.v_r,
            g0: cb.spec().g0,
            bandwidth_hz: physics.bandwidth,
            noise_over_unit: noise,
            snr_db: -20.0 * noise.log10(),
            slope_at_zero: 1.0 / (noise * (2.0 * std::f64::consts::PI).sqrt()),
        });
        for (j, &z) in zs.iter().enumerate() {
            rows.push(SweepRow {
                axis: s.axis.name(),
                knob: v,
                z,
                trials: s.trials as u64,
                fired: fired[j],
                empirical: fired[j] as f64 / s.trials as f64,
                analytic: analytic_fire_probability(z, cb, j, &physics)?,
                logistic: logistic(z),
            });
        }
    }
    Ok(SigmoidSweep { rows, settings })
}
