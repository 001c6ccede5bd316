//! Step-by-step traces of WTA decisions and the resulting win distribution.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{RacaError, Result};
use crate::neurons::{softmax, wta_decide, wta_decide_traced, CrossbarOutputs, WtaConfig};
use crate::probe::LogitProbe;
use crate::rng::derive_stream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RasterRow {
    pub decision: usize,
    pub step: usize,
    pub neuron: usize,
    pub output: f64,
    pub threshold: f64,
    /// 1 on the step and neuron that won the decision.
    pub winner: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub neuron: usize,
    pub logit: f64,
    pub wins: u64,
    pub empirical: f64,
    pub softmax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtaRaster {
    pub logits: Vec<f64>,
    pub trace: Vec<RasterRow>,
    pub distribution: Vec<DistributionRow>,
    pub decisions: u64,
    pub abstentions: u64,
}

impl WtaRaster {
    /// Winners per traced decision, in decision order.
    pub fn traced_winners(&self) -> Vec<Vec<usize>> {
        let n = self.trace.iter().map(|r| r.decision + 1).max().unwrap_or(0);
        let mut w = vec![Vec::new(); n];
        for r in self.trace.iter().filter(|r| r.winner == 1) {
            w[r.decision].push(r.neuron);
        }
        w
    }
}

pub fn run_wta_raster(cfg: &ExperimentConfig) -> Result<WtaRaster> {
    let r = &cfg.wta_raster;
    let net = &cfg.network;
    let logits: Vec<f64> = if r.logits.is_empty() {
        let mut s = derive_stream(cfg.seed, &[2]);
        (0..r.n_neurons).map(|_| s.random_range(-r.logit_bound..=r.logit_bound)).collect()
    } else {
        r.logits.clone()
    };
    if logits.len() < 2 {
        return Err(RacaError::Config("wta_raster needs at least two neurons".into()));
    }
    let probe = LogitProbe {
        n_rows: r.n_rows,
        g_min: net.g_min,
        g_max: net.g_max,
        v_r: net.v_r,
        logit_range: logits.iter().fold(1.0f64, |m, z| m.max(z.abs())),
    };
    let inst = probe.build(&logits).map_err(|e| RacaError::Config(format!("wta_raster: {e}")))?;
    let physics = probe.calibrated_physics(net.temperature, net.output_lambda)?;
    let wta = WtaConfig {
        calibration_lambda: net.output_lambda,
        v_th0: net.v_th0,
        v_supply: net.v_supply,
        max_steps: net.max_steps,
        coincidence: net.coincidence,
    };
    wta.validate().map_err(|e| RacaError::Config(e.to_string()))?;
    let voltages: Vec<f64> = inst.activations.iter().map(|x| x * probe.v_r).collect();
    let source = CrossbarOutputs::new(&inst.crossbar, &voltages, physics, net.noise_resolution)?;

    let mut trace = Vec::new();
    for d in 0..r.traced_decisions {
        let (record, steps) = wta_decide_traced(&source, &wta, &mut derive_stream(cfg.seed, &[0, d as u64]));
        for s in steps {
            for (j, &u) in s.outputs.iter().enumerate() {
                trace.push(RasterRow {
                    decision: d,
                    step: s.step,
                    neuron: j,
                    output: u,
                    threshold: s.threshold,
                    winner: u8::from(s.winner == Some(j) && record.winner == Some(j)),
                });
            }
        }
    }

    let winners: Vec<Option<usize>> = (0..r.decisions as u64)
        .into_par_iter()
        .map(|d| wta_decide(&source, &wta, &mut derive_stream(cfg.seed, &[1, d])).winner)
        .collect();
    let mut wins = vec![0u64; logits.len()];
    let mut abstentions = 0;
    for w in winners {
        match w {
            Some(j) => wins[j] += 1,
            None => abstentions += 1,
        }
    }
    let decided = (r.decisions as u64 - abstentions).max(1);
    let reference = softmax(&logits);
    let distribution = (0..logits.len())
        .map(|j| DistributionRow {
            neuron: j,
            logit: logits[j],
            wins: wins[j],
            empirical: wins[j] as f64 / decided as f64,
            softmax: reference[j],
        })
        .collect();
    Ok(WtaRaster {
        logits,
        trace,
        distribution,
        decisions: r.decisions as u64,
        abstentions,
    })
}
