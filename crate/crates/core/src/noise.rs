//! Thermal (Johnson-Nyquist) noise statistics and SNR arithmetic.
//!
//! [`thermal_variance`] is the one place the noise variance `4kTGΔf` is
//! computed; the RMS value, the samplers and the analytic firing
//! probabilities all go through it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RacaError, Result};

/// Boltzmann constant in J/K (CODATA 2018, exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Room temperature used when a configuration does not specify one.
pub const DEFAULT_TEMPERATURE: f64 = 300.0;

/// Physical constants governing the thermal-noise variance of a device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePhysics {
    pub boltzmann_k: f64,
    /// Kelvin.
    pub temperature: f64,
    /// Readout bandwidth in hertz. Zero switches noise off entirely.
    pub bandwidth: f64,
}

impl NoisePhysics {
    pub fn new(temperature: f64, bandwidth: f64) -> Result<Self> {
        Self::with_boltzmann(BOLTZMANN, temperature, bandwidth)
    }

    /// Overrides the Boltzmann constant. Only meant for tests.
    pub fn with_boltzmann(boltzmann_k: f64, temperature: f64, bandwidth: f64) -> Result<Self> {
        if !(boltzmann_k > 0.0 && boltzmann_k.is_finite()) {
            return Err(RacaError::domain(format!(
                "Boltzmann constant must be positive, got {boltzmann_k}"
            )));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(RacaError::domain(format!(
                "temperature must be positive, got {temperature} K"
            )));
        }
        if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
            return Err(RacaError::domain(format!(
                "bandwidth must be non-negative, got {bandwidth} Hz"
            )));
        }
        Ok(Self {
            boltzmann_k,
            temperature,
            bandwidth,
        })
    }

    /// Noiseless physics at room temperature.
    pub fn noiseless() -> Self {
        Self {
            boltzmann_k: BOLTZMANN,
            temperature: DEFAULT_TEMPERATURE,
            bandwidth: 0.0,
        }
    }

    pub fn with_bandwidth(self, bandwidth: f64) -> Result<Self> {
        Self::with_boltzmann(self.boltzmann_k, self.temperature, bandwidth)
    }

    /// `4kTΔf`: variance per siemens of conductance, in A²/S.
    pub fn variance_per_siemens(&self) -> f64 {
        4.0 * self.boltzmann_k * self.temperature * self.bandwidth
    }

    pub fn is_noiseless(&self) -> bool {
        self.bandwidth == 0.0
    }
}

/// Signal and noise powers with the resulting SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub signal_power: f64,
    pub noise_power: f64,
    /// Set when the noise power was derived from an RMS current.
    pub resistance: Option<f64>,
    pub snr_db: f64,
}

impl SnrReport {
    pub fn from_powers(signal_power: f64, noise_power: f64) -> Result<Self> {
        Ok(Self {
            signal_power,
            noise_power,
            resistance: None,
            snr_db: snr_db(signal_power, noise_power)?,
        })
    }

    pub fn from_noise_current(signal_power: f64, i_rms: f64, resistance: f64) -> Result<Self> {
        let noise_power = noise_power_from_current(i_rms, resistance)?;
        Ok(Self {
            signal_power,
            noise_power,
            resistance: Some(resistance),
            snr_db: snr_db(signal_power, noise_power)?,
        })
    }
}

fn check_conductance(g: f64) -> Result<()> {
    if g >= 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(RacaError::domain(format!(
            "conductance must be non-negative, got {g} S"
        )))
    }
}

/// Variance `4kTGΔf` (A²) of the thermal noise current through conductance `g`.
pub fn thermal_variance(g: f64, physics: &NoisePhysics) -> Result<f64> {
    check_conductance(g)?;
    Ok(physics.variance_per_siemens() * g)
}

/// RMS thermal noise current `sqrt(4kTGΔf)` in amperes.
pub fn thermal_noise_rms(g: f64, physics: &NoisePhysics) -> Result<f64> {
    thermal_variance(g, physics).map(f64::sqrt)
}

/// Noise power `i²R` dissipated by an RMS current in a resistance.
pub fn noise_power_from_current(i_rms: f64, resistance: f64) -> Result<f64> {
    if !(resistance > 0.0) {
        return Err(RacaError::domain(format!(
            "resistance must be positive, got {resistance} ohm"
        )));
    }
    Ok(i_rms * i_rms * resistance)
}

/// Signal-to-noise ratio in decibels.
pub fn snr_db(signal_power: f64, noise_power: f64) -> Result<f64> {
    if !(signal_power > 0.0 && noise_power > 0.0) {
        return Err(RacaError::domain(format!(
            "SNR needs positive powers, got signal {signal_power} W and noise {noise_power} W"
        )));
    }
    Ok(10.0 * (signal_power / noise_power).log10())
}

/// Draws one zero-mean Gaussian with standard deviation `std`.
///
/// A zero standard deviation returns exactly zero without touching the stream.
#[inline]
pub(crate) fn gaussian<R: Rng + ?Sized>(std: f64, stream: &mut R) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    let n: f64 = stream.sample(StandardNormal);
    std * n
}

/// Draws one thermal noise current sample for a device of conductance `g`.
pub fn sample_noise_current<R: Rng + ?Sized>(
    g: f64,
    physics: &NoisePhysics,
    stream: &mut R,
) -> Result<f64> {
    let rms = thermal_noise_rms(g, physics)?;
    Ok(gaussian(rms, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn room(bandwidth: f64) -> NoisePhysics {
        NoisePhysics::new(300.0, bandwidth).unwrap()
    }

    #[test]
    fn zero_conductance_is_silent() {
        assert_eq!(thermal_noise_rms(0.0, &room(1e9)).unwrap(), 0.0);
        let mut s = rng::stream(1);
        assert_eq!(sample_noise_current(0.0, &room(1e9), &mut s).unwrap(), 0.0);
    }

    #[test]
    fn rms_reference_point() {
        // sqrt(4 * 1.380649e-23 * 300 * 1e-4 * 1e9)
        let expected = (4.0f64 * 1.380649e-23 * 300.0 * 1e-4 * 1e9).sqrt();
        let got = thermal_noise_rms(1e-4, &room(1e9)).unwrap();
        assert!((got - expected).abs() <= 1e-15 * expected);
        assert!((got - 4.07e-8).abs() < 0.01e-8, "got {got}");
    }

    #[test]
    fn doubling_bandwidth_scales_by_sqrt2() {
        let a = thermal_noise_rms(2e-5, &room(1e8)).unwrap();
        let b = thermal_noise_rms(2e-5, &room(2e8)).unwrap();
        assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn negative_conductance_rejected() {
        assert!(matches!(
            thermal_noise_rms(-1e-6, &room(1e9)),
            Err(RacaError::Domain(_))
        ));
        let mut s = rng::stream(0);
        assert!(sample_noise_current(-1e-6, &room(1e9), &mut s).is_err());
    }

    #[test]
    fn invalid_physics_rejected() {
        assert!(NoisePhysics::new(0.0, 1e9).is_err());
        assert!(NoisePhysics::new(300.0, -1.0).is_err());
        assert!(NoisePhysics::with_boltzmann(-1.0, 300.0, 1.0).is_err());
    }

    #[test]
    fn noise_power_cases() {
        assert_eq!(noise_power_from_current(0.0, 50.0).unwrap(), 0.0);
        assert!((noise_power_from_current(1e-6, 1e3).unwrap() - 1e-9).abs() < 1e-24);
        assert_eq!(noise_power_from_current(1.0, 1.0).unwrap(), 1.0);
        assert!(noise_power_from_current(1.0, 0.0).is_err());
        assert!(noise_power_from_current(1.0, -3.0).is_err());
    }

    #[test]
    fn snr_cases() {
        assert_eq!(snr_db(3.0, 3.0).unwrap(), 0.0);
        assert!((snr_db(100.0, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert!((snr_db(2.0, 1.0).unwrap() - 3.010_299_956_639_812).abs() < 1e-12);
        assert!(snr_db(0.0, 1.0).is_err());
        assert!(snr_db(1.0, -1.0).is_err());
    }

    #[test]
    fn snr_report_from_current() {
        let r = SnrReport::from_noise_current(1e-7, 1e-6, 1e3).unwrap();
        assert_eq!(r.resistance, Some(1e3));
        assert!((r.snr_db - 20.0).abs() < 1e-9);
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = room(1e9);
        let mut a = rng::stream(42);
        let mut b = rng::stream(42);
        for _ in 0..100 {
            assert_eq!(
                sample_noise_current(1e-4, &p, &mut a).unwrap(),
                sample_noise_current(1e-4, &p, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn sampler_moments_match_nyquist() {
        let p = room(1e9);
        let g = 1e-4;
        let n = 1_000_000;
        let rms = thermal_noise_rms(g, &p).unwrap();
        let mut s = rng::stream(2024);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_noise_current(g, &p, &mut s).unwrap();
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() <= 4.0 * rms / (n as f64).sqrt(), "mean {mean}");
        assert!((var / (rms * rms) - 1.0).abs() < 0.02, "var ratio {}", var / (rms * rms));
        assert!((var.sqrt() / rms - 1.0).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn rms_squared_is_the_sampler_variance(g in 0.0f64..1e-3, df in 1.0f64..1e10) {
            let p = room(df);
            let rms = thermal_noise_rms(g, &p).unwrap();
            let var = thermal_variance(g, &p).unwrap();
            prop_assert!((rms * rms - var).abs() <= 1e-12 * var.max(1e-300));
        }

        #[test]
        fn snr_is_scale_invariant(p in 1e-12f64..1e3, q in 1e-12f64..1e3, a in 1e-6f64..1e6) {
            let lhs = snr_db(a * p, a * q).unwrap();
            let rhs = snr_db(p, q).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
