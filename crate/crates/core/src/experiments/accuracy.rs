//! Majority-vote test accuracy as a function of the number of trials.
//!
//! Each input runs `max(trial_grid)` trials once per setting; the vote at
//! `n` trials uses the first `n`. Input `i` draws from the same streams under
//! every setting, so settings are compared on common random numbers.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{AccuracyConfig, ExperimentConfig, NetworkConfig};
use crate::data_io::{accuracy_of, load_weights, Dataset, MnistFiles};
use crate::error::{RacaError, Result};
use crate::matrix::Matrix;
use crate::network::{build_network, forward_reference, CumulativeVote, Network};
use crate::neurons::{argmax, TrialRecord};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub v_th0: f64,
    pub noise_scale: f64,
    /// SNR of a unit logit at the hidden layers, `-20·log10(λ)`.
    pub snr_db: f64,
    pub n_trials: usize,
    pub accuracy: f64,
    /// Fraction of trials whose WTA race ended without a winner.
    pub abstention_rate: f64,
    /// Inputs whose every trial abstained.
    pub invalid_votes: usize,
    pub mean_wta_steps: f64,
    pub float_baseline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCurve {
    pub rows: Vec<AccuracyRow>,
    /// Per-input correctness behind each row, in input order.
    pub correct: Vec<Vec<bool>>,
    pub float_baseline: f64,
    pub n_inputs: usize,
}

impl AccuracyCurve {
    /// Paired comparison of rows `a` and `b` on the same inputs: the accuracy
    /// difference `a − b` and its standard error from the discordant pairs.
    pub fn paired_difference(&self, a: usize, b: usize) -> (f64, f64) {
        let (ca, cb) = (&self.correct[a], &self.correct[b]);
        let n = ca.len() as f64;
        let only_a = ca.iter().zip(cb).filter(|(x, y)| **x && !**y).count() as f64;
        let only_b = ca.iter().zip(cb).filter(|(x, y)| !**x && **y).count() as f64;
        ((only_a - only_b) / n, (only_a + only_b).sqrt() / n)
    }

    /// Index of the row for a setting and trial count.
    pub fn row_index(&self, v_th0: f64, noise_scale: f64, n_trials: usize) -> Option<usize> {
        self.rows
            .iter()
            .position(|r| r.v_th0 == v_th0 && r.noise_scale == noise_scale && r.n_trials == n_trials)
    }

    /// Rows of one setting, in trial-grid order.
    pub fn series(&self, v_th0: f64, noise_scale: f64) -> Vec<&AccuracyRow> {
        self.rows
            .iter()
            .filter(|r| r.v_th0 == v_th0 && r.noise_scale == noise_scale)
            .collect()
    }
}

fn input_records(net: &Network, test: &Dataset, n: usize, seed: u64) -> Result<Vec<Vec<TrialRecord>>> {
    (0..test.len())
        .into_par_iter()
        .map(|i| net.run_trials(test.image(i), n, derive_seed(seed, &[i as u64])))
        .collect()
}

/// Evaluates every (v_th0, noise scale) setting over the trial grid.
pub fn evaluate_accuracy(
    weights: &[Matrix],
    test: &Dataset,
    net_cfg: &NetworkConfig,
    acc: &AccuracyConfig,
    seed: u64,
) -> Result<AccuracyCurve> {
    if test.is_empty() {
        return Err(RacaError::domain("empty test set"));
    }
    let float_baseline = accuracy_of(test, |x| forward_reference(weights, x).ok().and_then(|p| argmax(&p)));
    let max_trials = *acc.trial_grid.iter().max().ok_or_else(|| RacaError::Config("empty trial grid".into()))?;
    let mut grid = acc.trial_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let mut rows = Vec::new();
    let mut correct = Vec::new();
    for &noise_scale in &acc.noise_scales {
        for &v_th0 in &acc.v_th0 {
            let net = build_network(weights, &net_cfg.spec(v_th0, noise_scale)?)?;
            let records = input_records(&net, test, max_trials, seed)?;
            let snr_db = if noise_scale == 0.0 {
                f64::INFINITY
            } else {
                -20.0 * (net_cfg.hidden_lambda * noise_scale).log10()
            };
            for &n in &grid {
                let mut hits = 0;
                let mut right = Vec::with_capacity(test.len());
                let mut invalid = 0;
                let mut abstained = 0u64;
                let mut steps = 0u64;
                for (i, rec) in records.iter().enumerate() {
                    let prefix = &rec[..n];
                    let vote = CumulativeVote::from_records(prefix, net.n_classes());
                    let ok = vote.predicted_class == Some(test.label(i));
                    hits += usize::from(ok);
                    right.push(ok);
                    invalid += usize::from(!vote.is_valid());
                    abstained += vote.abstentions;
                    steps += prefix.iter().map(|r| r.steps as u64).sum::<u64>();
                }
                correct.push(right);
                let total_trials = (n * test.len()) as f64;
                rows.push(AccuracyRow {
                    v_th0,
                    noise_scale,
                    snr_db,
                    n_trials: n,
                    accuracy: hits as f64 / test.len() as f64,
                    abstention_rate: abstained as f64 / total_trials,
                    invalid_votes: invalid,
                    mean_wta_steps: steps as f64 / total_trials,
                    float_baseline,
                });
            }
        }
    }
    Ok(AccuracyCurve {
        rows,
        correct,
        float_baseline,
        n_inputs: test.len(),
    })
}

/// Loads trained weights, or explains how to produce them.
pub fn load_trained_weights(cfg: &ExperimentConfig) -> Result<Vec<Matrix>> {
    let p = &cfg.weights_path();
    if !p.is_file() {
        return Err(RacaError::Data {
            path: p.to_path_buf(),
            message: "weight archive not found; run `raca train` first".into(),
        });
    }
    load_weights(p)
}

pub fn load_test_set(cfg: &ExperimentConfig) -> Result<Dataset> {
    let files = MnistFiles::in_dir(&cfg.data.mnist_dir);
    let limit = if cfg.data.test_limit == 0 { usize::MAX } else { cfg.data.test_limit };
    Ok(files.load_test()?.head(limit))
}

pub fn run_accuracy_vs_trials(cfg: &ExperimentConfig) -> Result<AccuracyCurve> {
    let weights = load_trained_weights(cfg)?;
    let test = load_test_set(cfg)?;
    evaluate_accuracy(&weights, &test, &cfg.network, &cfg.accuracy, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::train_reference_network;
    use crate::rng;
    use rand::Rng;

    /// Two well separated classes in 12 dimensions.
    fn toy(n: usize, seed: u64) -> Dataset {
        let mut r = rng::stream(seed);
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..10)).collect();
        let images = Matrix::from_fn(n, 12, |i, j| {
            let c = labels[i] as usize;
            if j == c || j == 10 + c % 2 { 0.9 } else { r.random_range(0.0..0.2) }
        });
        Dataset::new(images, labels).unwrap()
    }

    fn small_setup() -> (Vec<Matrix>, Dataset, NetworkConfig) {
        let train = toy(600, 1);
        let w = train_reference_network(&[12, 16, 10], &train, 30, 1.0, 3).unwrap();
        let net = NetworkConfig {
            dims: vec![12, 16, 10],
            ..NetworkConfig::default()
        };
        (w, toy(200, 2), net)
    }

    #[test]
    fn noiseless_accuracy_is_flat() {
        let (w, test, net) = small_setup();
        let acc = AccuracyConfig {
            trial_grid: vec![1, 2, 4, 8],
            v_th0: vec![0.05],
            noise_scales: vec![0.0],
        };
        let curve = evaluate_accuracy(&w, &test, &net, &acc, 4).unwrap();
        let a: Vec<f64> = curve.rows.iter().map(|r| r.accuracy).collect();
        assert!(a.iter().all(|&x| x == a[0]), "{a:?}");
    }

    #[test]
    fn votes_improve_with_trials() {
        let (w, test, net) = small_setup();
        let acc = AccuracyConfig {
            trial_grid: vec![1, 32],
            v_th0: vec![0.05],
            noise_scales: vec![1.0],
        };
        let curve = evaluate_accuracy(&w, &test, &net, &acc, 5).unwrap();
        assert!(curve.float_baseline > 0.9, "{}", curve.float_baseline);
        assert!(curve.rows[1].accuracy >= curve.rows[0].accuracy, "{:?}", curve.rows);
    }

    #[test]
    fn missing_weights_point_to_the_trainer() {
        let mut cfg = ExperimentConfig::default();
        cfg.data.weights = Some("/nonexistent/weights.bin".into());
        let err = run_accuracy_vs_trials(&cfg).unwrap_err();
        assert!(err.to_string().contains("raca train"));
        assert_eq!(err.exit_code(), 2);
    }
}
