//! Stochastic binary neurons driven by crossbar thermal noise.
//!
//! A sigmoid neuron is a comparator on `I_j − I_ref`: it fires when the noisy
//! difference is positive, so its firing probability is a Gaussian CDF of the
//! logit. With the noise calibrated to `λ·Vr·G0` and `λ = 1.702` that CDF
//! tracks the logistic function to within 0.0095.
//!
//! The winner-takes-all (WTA) output layer compares normalized output
//! voltages `u_j = (I_j − I_ref)/(Vr·G0)` against an adaptive threshold that
//! rests `v_th0` above the static mean output (zero after reference
//! subtraction) and is pulled to `v_supply` once a neuron wins.

use rand::Rng;
use serde::{Deserialize, Serialize};
use libm::erf;

use crate::crossbar::{Crossbar, MacResult, NoiseResolution, WeightMapSpec};
use crate::error::{RacaError, Result};
use crate::noise::NoisePhysics;

/// Noise-to-signal ratio that makes a Gaussian CDF match the logistic.
pub const PROBIT_LOGIT_LAMBDA: f64 = 1.702;

/// Default total-noise ratio for WTA layers. The reference column's noise is
/// common to every neuron and carries about half the variance, so this puts
/// the independent per-column part at [`PROBIT_LOGIT_LAMBDA`].
pub const WTA_LAMBDA: f64 = PROBIT_LOGIT_LAMBDA * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidNeuronConfig {
    /// Target ratio of the total noise standard deviation to `Vr·G0`.
    pub calibration_lambda: f64,
    /// Comparator offset in amperes; fires iff `I_j − I_ref > threshold`.
    pub comparator_threshold: f64,
}

impl Default for SigmoidNeuronConfig {
    fn default() -> Self {
        Self {
            calibration_lambda: PROBIT_LOGIT_LAMBDA,
            comparator_threshold: 0.0,
        }
    }
}

impl SigmoidNeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.calibration_lambda > 0.0 && self.calibration_lambda.is_finite()) {
            return Err(RacaError::domain(format!(
                "calibration lambda must be positive, got {}",
                self.calibration_lambda
            )));
        }
        Ok(())
    }
}

/// What happens when several WTA neurons cross the threshold in the same step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoincidencePolicy {
    /// The step is discarded and the race continues; a decision needs exactly
    /// one crossing. Win probabilities are then proportional to the firing
    /// odds `p_j/(1 − p_j)`, which is `exp(z_j − θ)` for logistic firing.
    #[default]
    Exclusive,
    /// The neuron with the largest margin over the threshold wins, ties to
    /// the lowest index.
    LargestMargin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtaConfig {
    /// Target ratio of the total noise standard deviation to `Vr·G0`.
    pub calibration_lambda: f64,
    /// Rest-state threshold above the static mean output, in logit units.
    pub v_th0: f64,
    /// Threshold level after a win, in logit units.
    pub v_supply: f64,
    /// Sampling steps before a decision is declared winner-less.
    pub max_steps: usize,
    #[serde(default)]
    pub coincidence: CoincidencePolicy,
}

impl Default for WtaConfig {
    fn default() -> Self {
        Self {
            calibration_lambda: WTA_LAMBDA,
            v_th0: 0.05,
            v_supply: 1.0e3,
            max_steps: 1000,
            coincidence: CoincidencePolicy::Exclusive,
        }
    }
}

impl WtaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.calibration_lambda > 0.0 && self.calibration_lambda.is_finite()) {
            return Err(RacaError::domain(format!(
                "calibration lambda must be positive, got {}",
                self.calibration_lambda
            )));
        }
        if !(self.v_th0 >= 0.0 && self.v_supply > self.v_th0) {
            return Err(RacaError::domain(format!(
                "WTA thresholds need v_supply > v_th0 >= 0, got v_th0 = {}, v_supply = {}",
                self.v_th0, self.v_supply
            )));
        }
        if self.max_steps == 0 {
            return Err(RacaError::domain("WTA max_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn with_v_th0(mut self, v_th0: f64) -> Self {
        self.v_th0 = v_th0;
        self
    }
}

/// Outcome of one layer evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    /// `y_j` per neuron.
    pub fired: Vec<bool>,
    /// WTA layers only: the winning neuron.
    pub winner: Option<usize>,
    /// WTA layers: sampling steps consumed (1-based step of the win, or
    /// `max_steps` when nobody won). Zero for sigmoid layers.
    pub steps: usize,
}

impl TrialRecord {
    fn wta(n: usize, winner: Option<usize>, steps: usize) -> Self {
        let mut fired = vec![false; n];
        if let Some(w) = winner {
            fired[w] = true;
        }
        Self { fired, winner, steps }
    }
}

/// Logistic function `1/(1 + e^(−z))`.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// `P(mean + N(0, std²) > 0)`. A zero `std` gives the step function.
pub fn fire_probability(mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return if mean > 0.0 { 1.0 } else if mean < 0.0 { 0.0 } else { 0.5 };
    }
    normal_cdf(mean / std)
}

/// Comparator decisions: bit `j` is set iff `I_j − I_ref > threshold`.
pub fn sigmoid_fire(mac: &MacResult, cfg: &SigmoidNeuronConfig) -> Vec<bool> {
    mac.column_currents
        .iter()
        .map(|i| i - mac.reference_current > cfg.comparator_threshold)
        .collect()
}

/// Probability that column `column` fires for logit `z`:
/// `½[1 + erf(Vr·G0·z / (sqrt(4kTΔf·Σ_i(G_ij + Gref))·√2))]`.
pub fn analytic_fire_probability(
    z: f64,
    cb: &Crossbar,
    column: usize,
    physics: &NoisePhysics,
) -> Result<f64> {
    if column >= cb.n_cols() {
        return Err(RacaError::domain(format!(
            "column {column} out of range for a crossbar with {} columns",
            cb.n_cols()
        )));
    }
    Ok(fire_probability(
        cb.spec().unit_current() * z,
        cb.difference_std(column, physics),
    ))
}

/// Analytic firing probability of every column for activations `x`.
pub fn analytic_fire_probabilities(cb: &Crossbar, x: &[f64], physics: &NoisePhysics) -> Result<Vec<f64>> {
    cb.logits(x)?
        .iter()
        .enumerate()
        .map(|(j, &z)| analytic_fire_probability(z, cb, j, physics))
        .collect()
}

/// Bandwidth at which the mean column of `cb` has total difference noise
/// `λ·Vr·G0`, i.e. `Δf = (λ·Vr·G0)² / (4kT·Σ_i(G_ij + Gref))`.
pub fn calibrate_bandwidth(
    spec: &WeightMapSpec,
    cb: &Crossbar,
    physics: &NoisePhysics,
    lambda: f64,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(RacaError::domain(format!("lambda must be positive, got {lambda}")));
    }
    let conductance = cb.mean_noise_conductance();
    if !(conductance > 0.0) {
        return Err(RacaError::domain("crossbar has zero total conductance"));
    }
    let target = lambda * spec.unit_current();
    Ok(target * target / (4.0 * physics.boltzmann_k * physics.temperature * conductance))
}

/// Source of per-step normalized WTA output voltages.
pub trait OutputSource {
    fn n_outputs(&self) -> usize;

    /// Writes one noisy sample of every output into `out`.
    fn draw<R: Rng + ?Sized>(&self, stream: &mut R, out: &mut [f64]);
}

/// WTA outputs read from a crossbar with fixed input voltages; every draw is
/// a fresh thermal-noise realization.
#[derive(Debug, Clone)]
pub struct CrossbarOutputs<'a> {
    cb: &'a Crossbar,
    physics: NoisePhysics,
    resolution: NoiseResolution,
    currents: Vec<f64>,
    reference: f64,
}

impl<'a> CrossbarOutputs<'a> {
    pub fn new(
        cb: &'a Crossbar,
        voltages: &[f64],
        physics: NoisePhysics,
        resolution: NoiseResolution,
    ) -> Result<Self> {
        let (currents, reference) = cb.signal_currents(voltages)?;
        Ok(Self {
            cb,
            physics,
            resolution,
            currents,
            reference,
        })
    }

    /// Outputs around precomputed noiseless column and reference currents.
    pub fn from_signal(
        cb: &'a Crossbar,
        currents: Vec<f64>,
        reference: f64,
        physics: NoisePhysics,
        resolution: NoiseResolution,
    ) -> Self {
        debug_assert_eq!(currents.len(), cb.n_cols());
        Self {
            cb,
            physics,
            resolution,
            currents,
            reference,
        }
    }

    /// Noiseless normalized outputs, i.e. the logits.
    pub fn mean_outputs(&self) -> Vec<f64> {
        let unit = self.cb.spec().unit_current();
        self.currents.iter().map(|c| (c - self.reference) / unit).collect()
    }
}

impl OutputSource for CrossbarOutputs<'_> {
    fn n_outputs(&self) -> usize {
        self.currents.len()
    }

    fn draw<R: Rng + ?Sized>(&self, stream: &mut R, out: &mut [f64]) {
        out.copy_from_slice(&self.currents);
        let mut reference = self.reference;
        self.cb
            .add_noise(&self.physics, self.resolution, out, &mut reference, stream);
        let unit = self.cb.spec().unit_current();
        for v in out.iter_mut() {
            *v = (*v - reference) / unit;
        }
    }
}

/// One sampling step of a WTA decision, for raster output.
#[derive(Debug, Clone, PartialEq)]
pub struct WtaStep {
    pub step: usize,
    pub outputs: Vec<f64>,
    /// Threshold in force during this step.
    pub threshold: f64,
    pub winner: Option<usize>,
}

fn resolve_step(outputs: &[f64], threshold: f64, policy: CoincidencePolicy) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut crossings = 0usize;
    for (j, &u) in outputs.iter().enumerate() {
        let margin = u - threshold;
        if margin > 0.0 {
            crossings += 1;
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((j, margin));
            }
        }
    }
    match policy {
        CoincidencePolicy::Exclusive if crossings > 1 => None,
        _ => best.map(|(j, _)| j),
    }
}

fn run_decision<S, R, F>(source: &S, cfg: &WtaConfig, stream: &mut R, mut on_step: F) -> TrialRecord
where
    S: OutputSource + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &[f64], Option<usize>),
{
    let n = source.n_outputs();
    let mut outputs = vec![0.0; n];
    for step in 1..=cfg.max_steps {
        source.draw(stream, &mut outputs);
        let winner = resolve_step(&outputs, cfg.v_th0, cfg.coincidence);
        on_step(step, &outputs, winner);
        if winner.is_some() {
            return TrialRecord::wta(n, winner, step);
        }
    }
    TrialRecord::wta(n, None, cfg.max_steps)
}

/// Runs one WTA decision: draws noisy outputs step by step until a neuron
/// crosses the rest threshold, after which the threshold locks at `v_supply`.
pub fn wta_decide<S, R>(source: &S, cfg: &WtaConfig, stream: &mut R) -> TrialRecord
where
    S: OutputSource + ?Sized,
    R: Rng + ?Sized,
{
    run_decision(source, cfg, stream, |_, _, _| {})
}

/// Like [`wta_decide`], also returning every sampled step. The step after
/// the win is recorded with the locked threshold so traces show the lockout.
pub fn wta_decide_traced<S, R>(source: &S, cfg: &WtaConfig, stream: &mut R) -> (TrialRecord, Vec<WtaStep>)
where
    S: OutputSource + ?Sized,
    R: Rng + ?Sized,
{
    let mut trace = Vec::new();
    let record = run_decision(source, cfg, stream, |step, outputs, winner| {
        trace.push(WtaStep {
            step,
            outputs: outputs.to_vec(),
            threshold: cfg.v_th0,
            winner,
        });
    });
    if record.winner.is_some() {
        let mut outputs = vec![0.0; source.n_outputs()];
        source.draw(stream, &mut outputs);
        trace.push(WtaStep {
            step: record.steps + 1,
            outputs,
            threshold: cfg.v_supply,
            winner: None,
        });
    }
    (record, trace)
}

/// Normalized win counts over the records that produced a winner.
pub fn wta_empirical_distribution(records: &[TrialRecord]) -> Result<Vec<f64>> {
    let n = records.first().map_or(0, |r| r.fired.len());
    let mut counts = vec![0u64; n];
    for r in records {
        if let Some(w) = r.winner {
            if w >= n {
                return Err(RacaError::domain("records disagree on the neuron count"));
            }
            counts[w] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(RacaError::domain("no record has a winner"));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Total-variation distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::{encode_inputs, noisy_mac};
    use crate::probe::LogitProbe;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn calibrated(lambda: f64) -> (LogitProbe, NoisePhysics) {
        let probe = LogitProbe::default();
        let physics = probe.calibrated_physics(300.0, lambda).unwrap();
        (probe, physics)
    }

    /// Bisection on the analytic oracle: the logit whose firing probability is `p`.
    fn invert(p: f64, probe: &LogitProbe, physics: &NoisePhysics) -> f64 {
        let inst = probe.build(&[0.0]).unwrap();
        let (mut lo, mut hi) = (-probe.logit_range, probe.logit_range);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if analytic_fire_probability(mid, &inst.crossbar, 0, physics).unwrap() < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn firing_frequency(z: f64, probe: &LogitProbe, physics: &NoisePhysics, n: usize, seed: u64) -> f64 {
        let inst = probe.build(&[z]).unwrap();
        let v = encode_inputs(&inst.activations, probe.v_r).unwrap();
        let cfg = SigmoidNeuronConfig::default();
        let mut s = rng::stream(seed);
        let fired = (0..n)
            .filter(|_| sigmoid_fire(&noisy_mac(&inst.crossbar, &v, physics, &mut s).unwrap(), &cfg)[0])
            .count();
        fired as f64 / n as f64
    }

    #[test]
    fn noiseless_comparator_is_a_step() {
        let probe = LogitProbe::default();
        let inst = probe.build(&[1.5, -0.5]).unwrap();
        let v = encode_inputs(&inst.activations, probe.v_r).unwrap();
        let mut s = rng::stream(0);
        let mac = noisy_mac(&inst.crossbar, &v, &NoisePhysics::noiseless(), &mut s).unwrap();
        assert_eq!(sigmoid_fire(&mac, &SigmoidNeuronConfig::default()), vec![true, false]);
    }

    #[test]
    fn zero_logit_fires_half_the_time() {
        let (probe, physics) = calibrated(PROBIT_LOGIT_LAMBDA);
        let f = firing_frequency(0.0, &probe, &physics, 100_000, 17);
        assert!((f - 0.5).abs() <= 0.01, "{f}");
    }

    #[test]
    fn reported_example_probabilities_are_reproduced() {
        let (probe, physics) = calibrated(PROBIT_LOGIT_LAMBDA);
        let n = 100_000;
        for (k, p) in [0.014, 0.745].into_iter().enumerate() {
            let z = invert(p, &probe, &physics);
            let f = firing_frequency(z, &probe, &physics, n, 100 + k as u64);
            let tol = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() <= tol, "p {p}: z {z} freq {f} tol {tol}");
        }
    }

    #[test]
    fn analytic_probability_limits() {
        let (probe, physics) = calibrated(PROBIT_LOGIT_LAMBDA);
        let cb = probe.build(&[0.0]).unwrap().crossbar;
        assert_eq!(analytic_fire_probability(0.0, &cb, 0, &physics).unwrap(), 0.5);
        assert!(analytic_fire_probability(8.0, &cb, 0, &physics).unwrap() > 1.0 - 1e-4);
        assert!(analytic_fire_probability(-8.0, &cb, 0, &physics).unwrap() < 1e-4);
        assert!(analytic_fire_probability(0.0, &cb, 1, &physics).is_err());
    }

    #[test]
    fn zero_noise_is_exact_step() {
        let probe = LogitProbe::default();
        let cb = probe.build(&[0.0]).unwrap().crossbar;
        let quiet = NoisePhysics::noiseless();
        assert_eq!(analytic_fire_probability(0.3, &cb, 0, &quiet).unwrap(), 1.0);
        assert_eq!(analytic_fire_probability(-0.3, &cb, 0, &quiet).unwrap(), 0.0);
    }

    #[test]
    fn calibration_matches_logistic_on_dense_grid() {
        let (probe, physics) = calibrated(PROBIT_LOGIT_LAMBDA);
        let cb = probe.build(&[0.0]).unwrap().crossbar;
        let mut worst: f64 = 0.0;
        for k in 0..=1600 {
            let z = -8.0 + 0.01 * k as f64;
            let p = analytic_fire_probability(z, &cb, 0, &physics).unwrap();
            worst = worst.max((p - logistic(z)).abs());
        }
        assert!(worst <= 0.0095, "{worst}");
    }

    #[test]
    fn doubling_lambda_halves_the_slope_at_zero() {
        let slope = |lambda: f64| {
            let (probe, physics) = calibrated(lambda);
            let cb = probe.build(&[0.0]).unwrap().crossbar;
            let h = 1e-5;
            (analytic_fire_probability(h, &cb, 0, &physics).unwrap()
                - analytic_fire_probability(-h, &cb, 0, &physics).unwrap())
                / (2.0 * h)
        };
        let ratio = slope(1.702) / slope(3.404);
        assert!((ratio - 2.0).abs() < 1e-6, "{ratio}");
    }

    #[test]
    fn vanishing_lambda_recovers_step() {
        let (probe, physics) = calibrated(1e-9);
        let cb = probe.build(&[0.0]).unwrap().crossbar;
        assert!(analytic_fire_probability(0.01, &cb, 0, &physics).unwrap() > 1.0 - 1e-12);
        assert!(analytic_fire_probability(-0.01, &cb, 0, &physics).unwrap() < 1e-12);
    }

    #[test]
    fn calibration_rejects_bad_lambda() {
        let probe = LogitProbe::default();
        let inst = probe.build(&[0.0]).unwrap();
        let p = NoisePhysics::noiseless();
        assert!(calibrate_bandwidth(&inst.spec, &inst.crossbar, &p, 0.0).is_err());
        assert!(calibrate_bandwidth(&inst.spec, &inst.crossbar, &p, -1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(WtaConfig::default().validate().is_ok());
        assert!(WtaConfig::default().with_v_th0(-0.1).validate().is_err());
        assert!(WtaConfig { v_supply: 0.01, ..WtaConfig::default() }.validate().is_err());
        assert!(WtaConfig { max_steps: 0, ..WtaConfig::default() }.validate().is_err());
        assert!(SigmoidNeuronConfig { calibration_lambda: 0.0, ..Default::default() }.validate().is_err());
    }

    struct Fixed(Vec<Vec<f64>>, std::cell::Cell<usize>);

    impl OutputSource for Fixed {
        fn n_outputs(&self) -> usize {
            self.0[0].len()
        }
        fn draw<R: Rng + ?Sized>(&self, _: &mut R, out: &mut [f64]) {
            let k = self.1.get();
            out.copy_from_slice(&self.0[k.min(self.0.len() - 1)]);
            self.1.set(k + 1);
        }
    }

    #[test]
    fn coincidence_policies() {
        let cfg = WtaConfig::default().with_v_th0(0.5);
        let seq = vec![vec![0.9, 0.7, 0.0], vec![0.0, 0.6, 0.1]];
        let mut s = rng::stream(0);
        let r = wta_decide(&Fixed(seq.clone(), 0.into()), &cfg, &mut s);
        assert_eq!((r.winner, r.steps), (Some(1), 2));
        let margin = WtaConfig {
            coincidence: CoincidencePolicy::LargestMargin,
            ..cfg
        };
        let r = wta_decide(&Fixed(seq, 0.into()), &margin, &mut s);
        assert_eq!((r.winner, r.steps), (Some(0), 1));
        let tie = vec![vec![0.9, 0.9]];
        let r = wta_decide(&Fixed(tie, 0.into()), &margin, &mut s);
        assert_eq!(r.winner, Some(0));
    }

    #[test]
    fn silent_outputs_abstain() {
        let cfg = WtaConfig {
            max_steps: 7,
            ..WtaConfig::default()
        };
        let mut s = rng::stream(0);
        let r = wta_decide(&Fixed(vec![vec![-1.0, -2.0]], 0.into()), &cfg, &mut s);
        assert_eq!(r.winner, None);
        assert_eq!(r.steps, 7);
        assert!(r.fired.iter().all(|f| !f));
    }

    fn wta_instance(logits: &[f64]) -> (crate::probe::ProbeInstance, NoisePhysics, LogitProbe) {
        let (probe, physics) = calibrated(WTA_LAMBDA);
        (probe.build(logits).unwrap(), physics, probe)
    }

    fn run_wta(logits: &[f64], cfg: &WtaConfig, n: usize, seed: u64) -> Vec<TrialRecord> {
        let (inst, physics, probe) = wta_instance(logits);
        let v = encode_inputs(&inst.activations, probe.v_r).unwrap();
        let src = CrossbarOutputs::new(&inst.crossbar, &v, physics, NoiseResolution::PerDevice).unwrap();
        let mut s = rng::stream(seed);
        (0..n).map(|_| wta_decide(&src, cfg, &mut s)).collect()
    }

    #[test]
    fn dominant_neuron_wins_immediately() {
        let recs = run_wta(&[7.5], &WtaConfig::default(), 2000, 1);
        let first = recs.iter().filter(|r| r.winner == Some(0) && r.steps == 1).count();
        assert!(first as f64 / 2000.0 > 0.99);
    }

    #[test]
    fn identical_logits_split_evenly() {
        let recs = run_wta(&[0.5, 0.5], &WtaConfig::default(), 10_000, 2);
        let p = wta_empirical_distribution(&recs).unwrap();
        assert!((p[0] - 0.5).abs() <= 0.02, "{p:?}");
    }

    #[test]
    fn wta_tracks_softmax_on_small_instance() {
        let z = [2f64.ln(), 0.0, 0.0];
        let recs = run_wta(&z, &WtaConfig::default(), 100_000, 3);
        assert!(recs.iter().all(|r| r.fired.iter().filter(|&&f| f).count() <= 1));
        let p = wta_empirical_distribution(&recs).unwrap();
        let tv = total_variation(&p, &softmax(&z));
        assert!(tv <= 0.02, "{p:?} tv {tv}");
    }

    /// Exact win distribution of the exclusive race. Given the shared
    /// reference noise `r`, neuron `j` crosses with `q_j = Φ((z_j − θ − r)/s)`
    /// independently, and a step decides for `j` with probability
    /// `q_j Π_{k≠j}(1 − q_k)`. Integrated over `r` by the trapezoid rule.
    fn exclusive_oracle(z: &[f64], cb: &Crossbar, physics: &NoisePhysics, theta: f64) -> Vec<f64> {
        let unit = cb.spec().unit_current();
        let var = physics.variance_per_siemens();
        let s_ref = (var * cb.n_rows() as f64 * cb.g_ref()).sqrt() / unit;
        let s_col: Vec<f64> = (0..z.len())
            .map(|j| (var * (cb.noise_conductance(j) - cb.n_rows() as f64 * cb.g_ref())).sqrt() / unit)
            .collect();
        let n = 20_000;
        let (lo, hi) = (-12.0 * s_ref, 12.0 * s_ref);
        let h = (hi - lo) / n as f64;
        let mut acc = vec![0.0; z.len()];
        for k in 0..=n {
            let r = lo + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let dens = (-0.5 * (r / s_ref).powi(2)).exp();
            let q: Vec<f64> = z.iter().zip(&s_col).map(|(zj, s)| normal_cdf((zj - theta - r) / s)).collect();
            for j in 0..z.len() {
                let others: f64 = (0..z.len()).filter(|&k| k != j).map(|k| 1.0 - q[k]).product();
                acc[j] += w * dens * q[j] * others;
            }
        }
        let total: f64 = acc.iter().sum();
        acc.iter().map(|a| a / total).collect()
    }

    #[test]
    fn exclusive_policy_matches_its_oracle() {
        let z = [1.0, 0.2, -0.7, 0.0];
        let cfg = WtaConfig::default();
        let (inst, physics, _) = wta_instance(&z);
        let oracle = exclusive_oracle(&z, &inst.crossbar, &physics, cfg.v_th0);
        let n = 100_000;
        let p = wta_empirical_distribution(&run_wta(&z, &cfg, n, 4)).unwrap();
        for j in 0..z.len() {
            let tol = 4.0 * (oracle[j] * (1.0 - oracle[j]) / n as f64).sqrt();
            assert!((p[j] - oracle[j]).abs() <= tol, "neuron {j}: {} vs {}", p[j], oracle[j]);
        }
    }

    #[test]
    fn traced_decision_records_lockout() {
        let (inst, physics, probe) = wta_instance(&[1.0, 0.0, -1.0]);
        let v = encode_inputs(&inst.activations, probe.v_r).unwrap();
        let src = CrossbarOutputs::new(&inst.crossbar, &v, physics, NoiseResolution::PerDevice).unwrap();
        let cfg = WtaConfig::default();
        let mut s = rng::stream(5);
        let (rec, trace) = wta_decide_traced(&src, &cfg, &mut s);
        let w = rec.winner.expect("winner");
        assert_eq!(trace.len(), rec.steps + 1);
        assert_eq!(trace[rec.steps - 1].winner, Some(w));
        let last = trace.last().unwrap();
        assert_eq!(last.threshold, cfg.v_supply);
        assert!(last.outputs.iter().all(|&u| u < last.threshold));
    }

    #[test]
    fn empirical_distribution_cases() {
        let rec = |w: Option<usize>| TrialRecord::wta(3, w, 1);
        let p = wta_empirical_distribution(&[rec(Some(0)), rec(Some(0))]).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = wta_empirical_distribution(&[rec(Some(0)), rec(Some(1)), rec(Some(2)), rec(None)]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(wta_empirical_distribution(&[rec(None)]).is_err());
        assert!(wta_empirical_distribution(&[]).is_err());
    }

    #[test]
    fn erf_oracle_agrees_with_quadrature() {
        // Trapezoid integration of the standard normal density.
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &x in &[-3.0, -1.2, 0.0, 0.4, 2.5] {
            let n = 200_000;
            let lo = -12.0;
            let h = (x - lo) / n as f64;
            let mut acc = 0.5 * (pdf(lo) + pdf(x));
            for k in 1..n {
                acc += pdf(lo + k as f64 * h);
            }
            assert!((acc * h - normal_cdf(x)).abs() < 1e-9, "x {x}");
        }
    }

    proptest! {
        #[test]
        fn analytic_probability_is_monotone_and_odd(z in -10.0f64..10.0, dz in 1e-3f64..1.0) {
            let (probe, physics) = calibrated(PROBIT_LOGIT_LAMBDA);
            let cb = probe.build(&[0.0]).unwrap().crossbar;
            let p = |z| analytic_fire_probability(z, &cb, 0, &physics).unwrap();
            prop_assert!(p(z + dz) >= p(z));
            prop_assert!((p(z) + p(-z) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn wta_records_have_at_most_one_winner(
            z in proptest::collection::vec(-3.0f64..3.0, 2..8),
            seed in any::<u64>(),
        ) {
            for rec in run_wta(&z, &WtaConfig::default(), 20, seed) {
                let set = rec.fired.iter().filter(|&&f| f).count();
                prop_assert!(set <= 1);
                prop_assert_eq!(set == 1, rec.winner.is_some());
            }
        }
    }
}
