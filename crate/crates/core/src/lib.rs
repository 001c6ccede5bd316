//! Behavioral simulator of an ADC-free ReRAM analog computing-in-memory
//! accelerator.
//!
//! Crossbar columns accumulate `Σ V_i·G_ij` plus Johnson-Nyquist noise from
//! every device. Hidden layers binarize the reference-subtracted current with
//! a comparator, which turns the thermal noise into a sigmoid-shaped firing
//! probability; the output layer is a winner-takes-all race whose win
//! frequencies approximate a softmax. Repeating a stochastic inference and
//! taking a majority vote recovers the accuracy of the floating-point network.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crossbar;
pub mod data_io;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod network;
pub mod neurons;
pub mod noise;
pub mod probe;
pub mod rng;

pub use crossbar::{
    build_map_spec, encode_inputs, expected_current_difference, map_weights, noisy_mac, Crossbar,
    MacResult, NoiseResolution, WeightMapSpec,
};
pub use data_io::{load_idx, load_weights, save_weights, train_reference_network, Dataset};
pub use error::{RacaError, Result};
pub use matrix::Matrix;
pub use neurons::{
    analytic_fire_probability, calibrate_bandwidth, sigmoid_fire, wta_decide, wta_empirical_distribution,
    CoincidencePolicy, SigmoidNeuronConfig, TrialRecord, WtaConfig,
};
pub use network::{
    build_network, forward_reference, infer_majority, CumulativeVote, LayerSettings, Network, NetworkSpec,
};
pub use noise::{
    noise_power_from_current, sample_noise_current, snr_db, thermal_noise_rms, NoisePhysics, SnrReport,
    BOLTZMANN,
};
