//! Layered stack of crossbars: stochastic sigmoid hidden layers and a WTA
//! output layer, plus the floating-point reference pass.
//!
//! Weight matrices are `n_in × n_out`, optionally with one extra last row
//! holding the biases. A bias row is programmed onto the crossbar as an
//! always-on input (`x = 1`).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossbar::{map_weights, Crossbar, NoiseResolution, WeightMapSpec};
use crate::error::{RacaError, Result};
use crate::matrix::Matrix;
use crate::neurons::{
    calibrate_bandwidth, logistic, softmax, wta_decide, CoincidencePolicy, CrossbarOutputs,
    SigmoidNeuronConfig, TrialRecord, WtaConfig,
};
use crate::noise::{NoisePhysics, DEFAULT_TEMPERATURE};
use crate::rng::derive_stream;

/// Device and readout settings of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerSettings {
    /// Largest admissible `|W|`. Weights are rescaled by their own max-abs
    /// before mapping, so this only bounds what the layer accepts.
    pub w_limit: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub v_r: f64,
    pub temperature: f64,
    /// Readout bandwidth in hertz; `None` calibrates it from the neuron
    /// config's lambda.
    pub bandwidth: Option<f64>,
}

impl Default for LayerSettings {
    fn default() -> Self {
        Self {
            w_limit: 1.0,
            g_min: 1.0e-6,
            g_max: 1.0e-5,
            v_r: 0.1,
            temperature: DEFAULT_TEMPERATURE,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_dims: Vec<usize>,
    /// One entry per weight layer.
    pub layers: Vec<LayerSettings>,
    pub hidden: SigmoidNeuronConfig,
    pub output: WtaConfig,
    pub noise_resolution: NoiseResolution,
}

impl NetworkSpec {
    /// Default settings for the given dims. Per-column noise is the default
    /// here since it is equal in distribution and much cheaper.
    pub fn new(layer_dims: Vec<usize>) -> Result<Self> {
        let n_layers = layer_dims.len().saturating_sub(1);
        let spec = Self {
            layer_dims,
            layers: vec![LayerSettings::default(); n_layers],
            hidden: SigmoidNeuronConfig::default(),
            output: WtaConfig::default(),
            noise_resolution: NoiseResolution::PerColumn,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn desk_scale() -> Self {
        Self::new(vec![784, 64, 32, 10]).expect("static dims are valid")
    }

    pub fn full_scale() -> Self {
        Self::new(vec![784, 500, 300, 10]).expect("static dims are valid")
    }

    /// Switches thermal noise off in every layer.
    pub fn noiseless(mut self) -> Self {
        for l in &mut self.layers {
            l.bandwidth = Some(0.0);
        }
        self
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(RacaError::domain(format!(
                "a network needs at least two layer dims, got {:?}",
                self.layer_dims
            )));
        }
        if let Some(i) = self.layer_dims.iter().position(|&d| d == 0) {
            return Err(RacaError::domain(format!("layer dim {i} is zero")));
        }
        if *self.layer_dims.last().unwrap() < 2 {
            return Err(RacaError::domain("the WTA output layer needs at least two neurons"));
        }
        if self.layers.len() != self.layer_dims.len() - 1 {
            return Err(RacaError::dimension(
                "per-layer settings",
                self.layer_dims.len() - 1,
                self.layers.len(),
            ));
        }
        for (l, s) in self.layers.iter().enumerate() {
            if !(s.w_limit > 0.0 && s.w_limit.is_finite()) {
                return Err(layer_err(l, format!("w_limit must be positive, got {}", s.w_limit)));
            }
            if let Some(b) = s.bandwidth {
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(layer_err(l, format!("bandwidth must be non-negative, got {b}")));
                }
            }
        }
        self.hidden.validate()?;
        self.output.validate()
    }
}

fn layer_err(layer: usize, message: impl Into<String>) -> RacaError {
    RacaError::Layer {
        layer,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronKind {
    Sigmoid(SigmoidNeuronConfig),
    Wta(WtaConfig),
}

#[derive(Debug, Clone)]
pub struct Layer {
    crossbar: Crossbar,
    physics: NoisePhysics,
    has_bias: bool,
    kind: NeuronKind,
}

impl Layer {
    pub fn crossbar(&self) -> &Crossbar {
        &self.crossbar
    }

    pub fn physics(&self) -> &NoisePhysics {
        &self.physics
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    pub fn kind(&self) -> &NeuronKind {
        &self.kind
    }

    /// Inputs excluding the bias row.
    pub fn n_inputs(&self) -> usize {
        self.crossbar.n_rows() - usize::from(self.has_bias)
    }

    pub fn n_outputs(&self) -> usize {
        self.crossbar.n_cols()
    }

    /// Row voltages for activations `x` (bias row appended).
    fn voltages(&self, x: impl Iterator<Item = f64>) -> Vec<f64> {
        let v_r = self.crossbar.spec().v_r;
        let mut v: Vec<f64> = x.map(|xi| xi * v_r).collect();
        if self.has_bias {
            v.push(v_r);
        }
        v
    }
}

/// Immutable, programmed network.
#[derive(Debug, Clone)]
pub struct Network {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    resolution: NoiseResolution,
}

/// Whether a matrix fed by `n_in` activations carries a bias row.
fn bias_rows(layer: usize, m: &Matrix, n_in: usize) -> Result<bool> {
    if m.rows() == n_in {
        Ok(false)
    } else if m.rows() == n_in + 1 {
        Ok(true)
    } else {
        Err(layer_err(
            layer,
            format!(
                "weight matrix has {} rows; expected {n_in} or {} with a bias row",
                m.rows(),
                n_in + 1
            ),
        ))
    }
}

/// Programs one crossbar per weight matrix. Each layer maps
/// `[-max|W|, max|W|]` onto the conductance window, which folds the scale
/// into `G0` and leaves the logits in the original weight units.
pub fn build_network(weights: &[Matrix], spec: &NetworkSpec) -> Result<Network> {
    spec.validate()?;
    if weights.len() != spec.n_layers() {
        return Err(RacaError::dimension("weight layers", spec.n_layers(), weights.len()));
    }
    let mut layers = Vec::with_capacity(weights.len());
    for (l, (w, settings)) in weights.iter().zip(&spec.layers).enumerate() {
        let (n_in, n_out) = (spec.layer_dims[l], spec.layer_dims[l + 1]);
        let has_bias = bias_rows(l, w, n_in)?;
        if w.cols() != n_out {
            return Err(layer_err(
                l,
                format!("weight matrix has {} columns; expected {n_out}", w.cols()),
            ));
        }
        for i in 0..w.rows() {
            for (j, &v) in w.row(i).iter().enumerate() {
                if !(v.abs() <= settings.w_limit) {
                    return Err(RacaError::WeightOutOfRange {
                        layer: l,
                        row: i,
                        col: j,
                        value: v,
                        w_min: -settings.w_limit,
                        w_max: settings.w_limit,
                    });
                }
            }
        }
        let scale = match w.max_abs() {
            s if s > 0.0 => s,
            _ => settings.w_limit,
        };
        let map = WeightMapSpec::symmetric(scale, settings.g_min, settings.g_max, settings.v_r)
            .map_err(|e| layer_err(l, e.to_string()))?;
        let crossbar = map_weights(w, &map).map_err(|e| layer_err(l, e.to_string()))?;
        let is_output = l + 1 == spec.n_layers();
        let lambda = if is_output {
            spec.output.calibration_lambda
        } else {
            spec.hidden.calibration_lambda
        };
        let base = NoisePhysics::new(settings.temperature, 0.0).map_err(|e| layer_err(l, e.to_string()))?;
        let bandwidth = match settings.bandwidth {
            Some(b) => b,
            None => calibrate_bandwidth(&map, &crossbar, &base, lambda)?,
        };
        let physics = base.with_bandwidth(bandwidth)?;
        let kind = if is_output {
            let mut cfg = spec.output;
            // A noiseless race repeats the same step forever under the
            // exclusive rule; the largest overdrive switches first instead.
            if physics.is_noiseless() {
                cfg.coincidence = CoincidencePolicy::LargestMargin;
            }
            NeuronKind::Wta(cfg)
        } else {
            NeuronKind::Sigmoid(spec.hidden)
        };
        layers.push(Layer {
            crossbar,
            physics,
            has_bias,
            kind,
        });
    }
    Ok(Network {
        dims: spec.layer_dims.clone(),
        layers,
        resolution: spec.noise_resolution,
    })
}

/// Binary hidden activity and the output decision of one forward trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardTrace {
    pub hidden: Vec<Vec<bool>>,
    pub output: TrialRecord,
}

/// Noiseless first-layer currents for one input, reusable across trials.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    currents: Vec<f64>,
    reference: f64,
}

impl Network {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn input_len(&self) -> usize {
        self.dims[0]
    }

    pub fn noise_resolution(&self) -> NoiseResolution {
        self.resolution
    }

    /// Encodes `input` as row voltages and computes the first layer's signal.
    pub fn prepare(&self, input: &[f64]) -> Result<PreparedInput> {
        if input.len() != self.input_len() {
            return Err(RacaError::dimension("network input", self.input_len(), input.len()));
        }
        if let Some(i) = input.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(RacaError::domain(format!(
                "activation {} at input {i} is outside [0, 1]",
                input[i]
            )));
        }
        let first = &self.layers[0];
        let (currents, reference) = first
            .crossbar
            .signal_currents(&first.voltages(input.iter().copied()))?;
        Ok(PreparedInput { currents, reference })
    }

    /// One stochastic forward trial: one noise draw per hidden layer, then a
    /// WTA race that draws fresh output noise every step.
    pub fn forward_stochastic<R: Rng + ?Sized>(&self, input: &[f64], stream: &mut R) -> Result<TrialRecord> {
        Ok(self.forward_prepared(&self.prepare(input)?, stream).output)
    }

    pub fn forward_traced<R: Rng + ?Sized>(&self, input: &[f64], stream: &mut R) -> Result<ForwardTrace> {
        Ok(self.forward_prepared(&self.prepare(input)?, stream))
    }

    pub fn forward_prepared<R: Rng + ?Sized>(&self, prepared: &PreparedInput, stream: &mut R) -> ForwardTrace {
        let last = self.layers.len() - 1;
        let mut hidden = Vec::with_capacity(last);
        let mut currents = prepared.currents.clone();
        let mut reference = prepared.reference;
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                let prev: &Vec<bool> = &hidden[l - 1];
                let v = layer.voltages(prev.iter().map(|&b| if b { 1.0 } else { 0.0 }));
                (currents, reference) = layer
                    .crossbar
                    .signal_currents(&v)
                    .expect("layer shapes are checked at build time");
            }
            match &layer.kind {
                NeuronKind::Sigmoid(cfg) => {
                    layer
                        .crossbar
                        .add_noise(&layer.physics, self.resolution, &mut currents, &mut reference, stream);
                    hidden.push(
                        currents
                            .iter()
                            .map(|i| i - reference > cfg.comparator_threshold)
                            .collect(),
                    );
                }
                NeuronKind::Wta(cfg) => {
                    let source = CrossbarOutputs::from_signal(
                        &layer.crossbar,
                        std::mem::take(&mut currents),
                        reference,
                        layer.physics,
                        self.resolution,
                    );
                    let output = wta_decide(&source, cfg, stream);
                    return ForwardTrace { hidden, output };
                }
            }
        }
        unreachable!("the last layer is always a WTA layer")
    }

    /// `n_trials` independent forward trials; trial `t` uses the stream at
    /// `(seed, t)`, so results do not depend on the worker pool.
    pub fn run_trials(&self, input: &[f64], n_trials: usize, seed: u64) -> Result<Vec<TrialRecord>> {
        if n_trials == 0 {
            return Err(RacaError::domain("n_trials must be at least 1"));
        }
        let prepared = self.prepare(input)?;
        Ok((0..n_trials as u64)
            .into_par_iter()
            .map(|t| self.forward_prepared(&prepared, &mut derive_stream(seed, &[t])).output)
            .collect())
    }
}

/// Win counts accumulated over repeated trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeVote {
    pub counts: Vec<u64>,
    pub abstentions: u64,
    pub n_trials: u64,
    /// Most-voted class, ties to the lowest index; `None` when every trial
    /// abstained.
    pub predicted_class: Option<usize>,
}

impl CumulativeVote {
    pub fn from_records(records: &[TrialRecord], n_classes: usize) -> Self {
        let mut counts = vec![0u64; n_classes];
        let mut abstentions = 0;
        for r in records {
            match r.winner {
                Some(w) => counts[w] += 1,
                None => abstentions += 1,
            }
        }
        let mut predicted_class = None;
        let mut best = 0;
        for (j, &c) in counts.iter().enumerate() {
            if c > best {
                best = c;
                predicted_class = Some(j);
            }
        }
        Self {
            counts,
            abstentions,
            n_trials: records.len() as u64,
            predicted_class,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.predicted_class.is_some()
    }
}

/// Majority vote over `n_trials` stochastic inferences.
pub fn infer_majority(net: &Network, input: &[f64], n_trials: usize, seed: u64) -> Result<CumulativeVote> {
    let records = net.run_trials(input, n_trials, seed)?;
    Ok(CumulativeVote::from_records(&records, net.n_classes()))
}

/// Hidden-layer nonlinearity of the float pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Logistic,
    /// `1` iff the logit is positive: the noiseless comparator.
    Step,
}

/// Output-layer logits of the float network.
pub fn reference_logits(weights: &[Matrix], input: &[f64], activation: HiddenActivation) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(RacaError::domain("no weight layers"));
    }
    let mut x = input.to_vec();
    for (l, w) in weights.iter().enumerate() {
        if bias_rows(l, w, x.len())? {
            x.push(1.0);
        }
        let z = w.vec_mul(&x);
        if l + 1 == weights.len() {
            return Ok(z);
        }
        x = match activation {
            HiddenActivation::Logistic => z.into_iter().map(logistic).collect(),
            HiddenActivation::Step => z.into_iter().map(|v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
        };
    }
    unreachable!()
}

/// Float pass with logistic hidden units and a softmax output.
pub fn forward_reference(weights: &[Matrix], input: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&reference_logits(weights, input, HiddenActivation::Logistic)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurons::argmax;
    use crate::rng;
    use rand::Rng;

    fn random_weights(dims: &[usize], scale: f64, seed: u64) -> Vec<Matrix> {
        let mut r = rng::stream(seed);
        dims.windows(2)
            .map(|d| Matrix::from_fn(d[0] + 1, d[1], |_, _| r.random_range(-scale..=scale)))
            .collect()
    }

    #[test]
    fn minimal_identity_stack_builds() {
        let eye = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let spec = NetworkSpec::new(vec![2, 2, 2]).unwrap();
        let net = build_network(&[eye.clone(), eye], &spec).unwrap();
        assert_eq!(net.layers().len(), 2);
        assert!(!net.layers()[0].has_bias());
    }

    #[test]
    fn shape_mismatch_names_the_layer() {
        let spec = NetworkSpec::new(vec![3, 4, 2]).unwrap();
        let w0 = Matrix::zeros(4, 4);
        let bad = Matrix::zeros(5, 3);
        match build_network(&[w0, bad], &spec) {
            Err(RacaError::Layer { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_weight_names_the_layer() {
        let spec = NetworkSpec::new(vec![2, 2, 2]).unwrap();
        let mut w1 = Matrix::zeros(3, 2);
        w1.set(2, 1, 1.5);
        match build_network(&[Matrix::zeros(3, 2), w1], &spec) {
            Err(RacaError::WeightOutOfRange { layer, row, col, .. }) => assert_eq!((layer, row, col), (1, 2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_scale_spec_builds_three_crossbars() {
        let spec = NetworkSpec::full_scale();
        let w = random_weights(&spec.layer_dims, 0.1, 1);
        let net = build_network(&w, &spec).unwrap();
        assert_eq!(net.layers().len(), 3);
        let shapes: Vec<_> = net.layers().iter().map(|l| (l.crossbar().n_rows(), l.n_outputs())).collect();
        assert_eq!(shapes, vec![(785, 500), (501, 300), (301, 10)]);
    }

    #[test]
    fn calibrated_layers_hit_their_lambda() {
        let spec = NetworkSpec::desk_scale();
        let net = build_network(&random_weights(&spec.layer_dims, 0.3, 2), &spec).unwrap();
        for (l, layer) in net.layers().iter().enumerate() {
            let cb = layer.crossbar();
            let lambda = if l == 2 { spec.output.calibration_lambda } else { spec.hidden.calibration_lambda };
            let mean_var = (0..cb.n_cols())
                .map(|j| cb.difference_std(j, layer.physics()).powi(2))
                .sum::<f64>()
                / cb.n_cols() as f64;
            let ratio = mean_var.sqrt() / cb.spec().unit_current();
            assert!((ratio - lambda).abs() < 1e-9 * lambda, "layer {l}: {ratio}");
        }
    }

    #[test]
    fn zero_input_zero_weights_fire_half_the_time() {
        let spec = NetworkSpec::new(vec![6, 5, 4, 3]).unwrap();
        let w: Vec<Matrix> = spec.layer_dims.windows(2).map(|d| Matrix::zeros(d[0] + 1, d[1])).collect();
        let net = build_network(&w, &spec).unwrap();
        let n = 20_000;
        let mut fired = vec![0u32; 9];
        let mut r = rng::stream(3);
        for _ in 0..n {
            let t = net.forward_traced(&[0.0; 6], &mut r).unwrap();
            for (k, b) in t.hidden.concat().into_iter().enumerate() {
                fired[k] += u32::from(b);
            }
        }
        let tol = 4.0 * (0.25 / n as f64).sqrt();
        for f in fired {
            assert!((f as f64 / n as f64 - 0.5).abs() < tol, "{f}");
        }
    }

    #[test]
    fn noiseless_pass_matches_hard_threshold_reference() {
        let spec = NetworkSpec::new(vec![12, 8, 6, 4]).unwrap().noiseless();
        let mut r = rng::stream(4);
        for k in 0..50 {
            let w = random_weights(&spec.layer_dims, 1.0, 100 + k);
            let net = build_network(&w, &spec).unwrap();
            let x: Vec<f64> = (0..12).map(|_| r.random::<f64>()).collect();
            let z = reference_logits(&w, &x, HiddenActivation::Step).unwrap();
            let t = net.forward_traced(&x, &mut r).unwrap();
            let mut h = x.clone();
            for (l, layer_bits) in t.hidden.iter().enumerate() {
                h.push(1.0);
                let expect: Vec<bool> = w[l].vec_mul(&h).iter().map(|&v| v > 0.0).collect();
                assert_eq!(layer_bits, &expect);
                h = expect.iter().map(|&b| f64::from(u8::from(b))).collect();
            }
            let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let expected = (top > spec.output.v_th0).then(|| argmax(&z).unwrap());
            assert_eq!(t.output.winner, expected);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let spec = NetworkSpec::new(vec![10, 8, 5]).unwrap();
        let net = build_network(&random_weights(&spec.layer_dims, 0.8, 5), &spec).unwrap();
        let x = [0.3; 10];
        let a = net.forward_stochastic(&x, &mut rng::derive_stream(9, &[1])).unwrap();
        let b = net.forward_stochastic(&x, &mut rng::derive_stream(9, &[1])).unwrap();
        assert_eq!(a, b);
        assert_eq!(infer_majority(&net, &x, 64, 7).unwrap(), infer_majority(&net, &x, 64, 7).unwrap());
    }

    #[test]
    fn single_trial_vote_is_that_trials_winner() {
        let spec = NetworkSpec::new(vec![10, 8, 5]).unwrap();
        let net = build_network(&random_weights(&spec.layer_dims, 0.8, 6), &spec).unwrap();
        let x = [0.7; 10];
        for seed in 0..20 {
            let vote = infer_majority(&net, &x, 1, seed).unwrap();
            let rec = net.forward_stochastic(&x, &mut rng::derive_stream(seed, &[0])).unwrap();
            assert_eq!(vote.predicted_class, rec.winner);
            assert_eq!(vote.counts.iter().sum::<u64>() + vote.abstentions, 1);
        }
    }

    #[test]
    fn all_abstaining_vote_is_invalid() {
        let records = vec![TrialRecord { fired: vec![false; 3], winner: None, steps: 5 }; 4];
        let vote = CumulativeVote::from_records(&records, 3);
        assert_eq!(vote.counts, vec![0, 0, 0]);
        assert_eq!(vote.abstentions, 4);
        assert!(!vote.is_valid());
    }

    #[test]
    fn vote_ties_go_to_lowest_index() {
        let rec = |w| TrialRecord { fired: vec![false; 3], winner: Some(w), steps: 1 };
        let vote = CumulativeVote::from_records(&[rec(2), rec(1), rec(2), rec(1)], 3);
        assert_eq!(vote.predicted_class, Some(1));
    }

    #[test]
    fn vote_counts_add_up() {
        let spec = NetworkSpec::new(vec![10, 8, 5]).unwrap();
        let net = build_network(&random_weights(&spec.layer_dims, 0.8, 8), &spec).unwrap();
        let vote = infer_majority(&net, &[0.5; 10], 100, 3).unwrap();
        assert_eq!(vote.counts.iter().sum::<u64>() + vote.abstentions, vote.n_trials);
        assert_eq!(vote.n_trials, 100);
    }

    #[test]
    fn zero_weights_give_uniform_reference() {
        let w = vec![Matrix::zeros(5, 3), Matrix::zeros(4, 4)];
        let p = forward_reference(&w, &[0.2; 4]).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_logit_concentrates_reference() {
        let mut w1 = Matrix::zeros(3, 4);
        w1.set(2, 2, 30.0);
        let w = vec![Matrix::zeros(3, 2), w1];
        let p = forward_reference(&w, &[1.0, 0.0]).unwrap();
        assert!(p[2] > 0.999_999);
    }

    #[test]
    fn reference_outputs_are_normalized() {
        for seed in 0..20 {
            let w = random_weights(&[7, 6, 5, 4], 2.0, seed);
            let p = forward_reference(&w, &[0.1, 0.9, 0.4, 0.0, 1.0, 0.5, 0.3]).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_rejects_bad_shapes() {
        let w = vec![Matrix::zeros(5, 3), Matrix::zeros(7, 4)];
        assert!(matches!(forward_reference(&w, &[0.0; 4]), Err(RacaError::Layer { layer: 1, .. })));
    }

    #[test]
    fn bad_input_is_rejected() {
        let spec = NetworkSpec::new(vec![3, 2, 2]).unwrap();
        let net = build_network(&random_weights(&spec.layer_dims, 0.5, 9), &spec).unwrap();
        let mut r = rng::stream(0);
        assert!(net.forward_stochastic(&[0.0; 4], &mut r).is_err());
        assert!(net.forward_stochastic(&[0.0, 1.2, 0.0], &mut r).is_err());
    }

    #[test]
    fn more_trials_stabilize_the_vote() {
        let spec = NetworkSpec::new(vec![10, 8, 4]).unwrap();
        let w = random_weights(&spec.layer_dims, 1.0, 10);
        let net = build_network(&w, &spec).unwrap();
        let x = [0.6; 10];
        let records = net.run_trials(&x, 2000, 11).unwrap();
        let full = CumulativeVote::from_records(&records, 4);
        let half = CumulativeVote::from_records(&records[..1000], 4);
        assert_eq!(full.predicted_class, half.predicted_class);
    }
}
