//! Exact event tallies of stochastic inference runs.
//!
//! Per forward trial: one DAC conversion per input pixel; `rows·cols`
//! row-column products and `cols` comparator evaluations for every hidden
//! crossbar; and, for every WTA sampling step, `rows·cols` products and
//! `cols` comparator evaluations on the output crossbar. Rows include the
//! bias row. The ADC baseline reads every column of a single deterministic
//! pass through an ADC instead.

use rayon::prelude::*;
use serde::Serialize;

use super::accuracy::{load_test_set, load_trained_weights};
use super::config::{EventEnergies, ExperimentConfig};
use crate::error::Result;
use crate::network::{build_network, Network};
use crate::rng::derive_seed;

/// Hardware figures published for the FCNN-on-MNIST comparison, reproduced
/// for context only: `(quantity, ADC baseline, ADC-free design, unit)`.
pub const REPORTED_HARDWARE_METRICS: [(&str, f64, f64, &str); 3] = [
    ("energy", 8.7e5, 3.63e5, "pJ"),
    ("area", 8.51, 5.24, "mm^2"),
    ("efficiency", 61.3, 148.58, "TOPS/W"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub dims: Vec<usize>,
    pub n_inputs: u64,
    pub n_trials: u64,
    pub dac_conversions: u64,
    pub mac_products: u64,
    pub comparator_evaluations: u64,
    pub wta_steps: u64,
    pub adc_conversions_baseline: u64,
    pub mac_products_baseline: u64,
    pub dac_conversions_baseline: u64,
    pub energies: Option<EventEnergies>,
    /// Picojoules.
    pub weighted_total: Option<f64>,
    pub baseline_total: Option<f64>,
    /// `baseline_total / weighted_total`.
    pub baseline_ratio: Option<f64>,
}

/// One CSV row of a cost report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub quantity: String,
    pub value: f64,
    pub unit: &'static str,
    pub source: &'static str,
}

impl CostReport {
    pub fn rows(&self) -> Vec<CostRow> {
        let sim = |q: &str, v: f64, unit| CostRow {
            quantity: q.to_string(),
            value: v,
            unit,
            source: "simulated",
        };
        let mut rows = vec![
            sim("inputs", self.n_inputs as f64, "count"),
            sim("trials_per_input", self.n_trials as f64, "count"),
            sim("dac_conversions", self.dac_conversions as f64, "count"),
            sim("mac_products", self.mac_products as f64, "count"),
            sim("comparator_evaluations", self.comparator_evaluations as f64, "count"),
            sim("wta_steps", self.wta_steps as f64, "count"),
            sim("baseline_dac_conversions", self.dac_conversions_baseline as f64, "count"),
            sim("baseline_mac_products", self.mac_products_baseline as f64, "count"),
            sim("baseline_adc_conversions", self.adc_conversions_baseline as f64, "count"),
        ];
        if let (Some(t), Some(b), Some(r)) = (self.weighted_total, self.baseline_total, self.baseline_ratio) {
            rows.push(sim("weighted_total", t, "pJ"));
            rows.push(sim("baseline_weighted_total", b, "pJ"));
            rows.push(sim("baseline_to_design_ratio", r, "ratio"));
        }
        for (q, base, design, unit) in REPORTED_HARDWARE_METRICS {
            for (tag, v) in [("baseline", base), ("design", design)] {
                rows.push(CostRow {
                    quantity: format!("{q}_{tag}"),
                    value: v,
                    unit,
                    source: "reported-not-simulated",
                });
            }
        }
        rows
    }
}

/// Runs `n_trials` stochastic trials per input and tallies every event.
/// Input `i`, trial `t` uses the stream at `(derive_seed(seed, i), t)`.
pub fn tally_costs(
    net: &Network,
    inputs: &[&[f64]],
    n_trials: usize,
    seed: u64,
    energies: Option<EventEnergies>,
) -> Result<CostReport> {
    let steps_per_input: Vec<u64> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let recs = net.run_trials(x, n_trials, derive_seed(seed, &[i as u64]))?;
            Ok(recs.iter().map(|r| r.steps as u64).sum())
        })
        .collect::<Result<_>>()?;
    let wta_steps: u64 = steps_per_input.iter().sum();
    let n_forward = (inputs.len() * n_trials) as u64;

    let layers = net.layers();
    let (hidden, out) = layers.split_at(layers.len() - 1);
    let out = &out[0].crossbar();
    let products = |cb: &crate::crossbar::Crossbar| (cb.n_rows() * cb.n_cols()) as u64;
    let hidden_products: u64 = hidden.iter().map(|l| products(l.crossbar())).sum();
    let hidden_cols: u64 = hidden.iter().map(|l| l.n_outputs() as u64).sum();
    let n_in = net.input_len() as u64;

    let dac_conversions = n_forward * n_in;
    let mac_products = n_forward * hidden_products + wta_steps * products(out);
    let comparator_evaluations = n_forward * hidden_cols + wta_steps * out.n_cols() as u64;
    let n = inputs.len() as u64;
    let dac_conversions_baseline = n * n_in;
    let mac_products_baseline = n * (hidden_products + products(out));
    let adc_conversions_baseline = n * (hidden_cols + out.n_cols() as u64);

    let (weighted_total, baseline_total, baseline_ratio) = match energies {
        Some(e) => {
            let t = e.dac * dac_conversions as f64
                + e.mac * mac_products as f64
                + e.comparator * comparator_evaluations as f64;
            let b = e.dac * dac_conversions_baseline as f64
                + e.mac * mac_products_baseline as f64
                + e.adc * adc_conversions_baseline as f64;
            let r = if t > 0.0 { b / t } else { f64::NAN };
            (Some(t), Some(b), Some(r))
        }
        None => (None, None, None),
    };
    Ok(CostReport {
        dims: net.dims().to_vec(),
        n_inputs: n,
        n_trials: n_trials as u64,
        dac_conversions,
        mac_products,
        comparator_evaluations,
        wta_steps,
        adc_conversions_baseline,
        mac_products_baseline,
        dac_conversions_baseline,
        energies,
        weighted_total,
        baseline_total,
        baseline_ratio,
    })
}

/// Tallies a run over the first test images with the trained weights.
pub fn run_cost_report(cfg: &ExperimentConfig) -> Result<CostReport> {
    let weights = load_trained_weights(cfg)?;
    let mut data_cfg = cfg.clone();
    if cfg.cost.inputs > 0 {
        data_cfg.data.test_limit = cfg.cost.inputs;
    }
    let test = load_test_set(&data_cfg)?;
    let net = build_network(&weights, &cfg.network.spec(cfg.network.v_th0, 1.0)?)?;
    let inputs: Vec<&[f64]> = (0..test.len()).map(|i| test.image(i)).collect();
    tally_costs(&net, &inputs, cfg.cost.trials, cfg.seed, cfg.cost.energies)
}
