//! Matched-filter range profiles for point-target scenes.
//!
//! Echoes are circular delays of the transmitted block (cyclic-prefixed
//! operation), quantized to the nearest sample. The profile is the squared
//! magnitude of the correlation between the echo and the whole transmitted
//! block.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::acf::fft_in_place;
use super::complex_normal;
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;
use crate::seed;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub range_m: f64,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeScene {
    pub targets: Vec<Target>,
    /// Sampling rate of the transmitted block (Hz).
    pub fs: f64,
    /// Per-sample noise variance, `CN(0, noise_power)`.
    pub noise_power: f64,
    /// Rotate every target by an independent uniform phase per realization.
    #[serde(default)]
    pub random_phase: bool,
}

impl RangeScene {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::invalid("scene needs at least one target"));
        }
        if let Some(t) = self.targets.iter().find(|t| !(t.range_m >= 0.0 && t.range_m.is_finite())) {
            return Err(Error::invalid(format!("target range must be finite and ≥ 0, got {}", t.range_m)));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::invalid(format!("sampling rate must be positive, got {}", self.fs)));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::invalid(format!("noise power must be ≥ 0, got {}", self.noise_power)));
        }
        Ok(())
    }

    /// Nearest sample bin of the round-trip delay for a range.
    pub fn delay_bin(&self, range_m: f64) -> usize {
        (2.0 * range_m / SPEED_OF_LIGHT * self.fs).round() as usize
    }

    /// Range of delay bin `k`.
    pub fn bin_range(&self, k: usize) -> f64 {
        k as f64 * SPEED_OF_LIGHT / (2.0 * self.fs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeProfile {
    pub ranges_m: Vec<f64>,
    pub power: Vec<f64>,
}

impl RangeProfile {
    pub fn peak_bin(&self) -> usize {
        argmax(&self.power, 0..self.power.len())
    }

    /// Bins whose range lies in `[lo, hi]`.
    pub fn bins_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.ranges_m.iter().position(|&r| r >= lo).unwrap_or(self.ranges_m.len());
        let end = self.ranges_m.iter().rposition(|&r| r <= hi).map_or(start, |e| e + 1);
        start..end.max(start)
    }
}

pub(crate) fn argmax(v: &[f64], range: std::ops::Range<usize>) -> usize {
    range.fold(usize::MAX, |best, i| if best == usize::MAX || v[i] > v[best] { i } else { best })
}

/// Range profile of `signal` against `scene`.
///
/// With a pulse, `signal` is taken at symbol rate and shaped first, and
/// `scene.fs` must equal the pulse's sample rate. Noise and random target
/// phases are drawn from `seed`.
pub fn range_profile(
    signal: &[Complex64],
    scene: &RangeScene,
    pulse: Option<&PulseSpec>,
    seed: u64,
) -> Result<RangeProfile> {
    scene.validate()?;
    let x = match pulse {
        Some(p) => {
            let rate = p.sample_rate();
            if ((rate - scene.fs) / scene.fs).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "scene sampling rate {} Hz differs from the pulse sample rate {rate} Hz",
                    scene.fs
                )));
            }
            p.shape(signal)?
        }
        None => signal.to_vec(),
    };
    let len = x.len();
    if len < 2 {
        return Err(Error::invalid("range profile needs at least 2 samples"));
    }
    let mut rng = seed::rng(seed);
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for t in &scene.targets {
        let d = scene.delay_bin(t.range_m);
        if d >= len {
            return Err(Error::invalid(format!(
                "target at {} m lies beyond the unambiguous window of {:.3} m",
                t.range_m,
                scene.bin_range(len)
            )));
        }
        let amp = if scene.random_phase {
            t.amplitude * Complex64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>())
        } else {
            t.amplitude
        };
        for (n, xn) in x.iter().enumerate() {
            y[(n + d) % len] += amp * xn;
        }
    }
    if scene.noise_power > 0.0 {
        y.iter_mut().for_each(|v| *v += complex_normal(&mut rng, scene.noise_power));
    }
    let mut xf = x;
    fft_in_place(&mut xf, false);
    fft_in_place(&mut y, false);
    y.iter_mut().zip(&xf).for_each(|(a, b)| *a *= b.conj());
    fft_in_place(&mut y, true);
    let scale = 1.0 / len as f64;
    Ok(RangeProfile {
        ranges_m: (0..len).map(|k| scene.bin_range(k)).collect(),
        power: y.iter().map(|v| (v * scale).norm_sqr()).collect(),
    })
}
