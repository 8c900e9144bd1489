//! Weak-target detection behind a strong target.
//!
//! A strong reflector and a weaker one further out are illuminated by a
//! shaped random block. Detection looks for the profile peak inside a range
//! gate that excludes the strong target's mainlobe, so the strong echo only
//! enters through its sidelobes (this gating is the cancellation step). A
//! trial counts as a detection when the gated peak falls within half a symbol
//! period of the weak target's delay.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PulseSpec;
use crate::error::{Error, Result};
use crate::metrics::range::argmax;
use crate::metrics::{range_profile, RangeScene, SymbolSource, Target};
use crate::seed;
use crate::waveform::ModulationBasis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakTargetScene {
    pub strong_range_m: f64,
    pub weak_range_m: f64,
    /// Weak-target amplitude relative to the strong one, in dB (power).
    pub weak_level_db: f64,
    /// Range gate `[lo, hi]` in meters.
    pub region_m: [f64; 2],
    /// Per-sample noise variance relative to the unit transmit sample power.
    pub noise_power: f64,
    pub random_phase: bool,
}

impl Default for WeakTargetScene {
    fn default() -> Self {
        WeakTargetScene {
            strong_range_m: 20.0,
            weak_range_m: 30.0,
            weak_level_db: -20.0,
            region_m: [23.74, 31.24],
            noise_power: 0.01,
            random_phase: true,
        }
    }
}

impl WeakTargetScene {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.region_m;
        if !(lo < hi) {
            return Err(Error::invalid(format!("range gate [{lo}, {hi}] is empty")));
        }
        if !(self.weak_level_db.is_finite()) || self.weak_level_db == 0.0 {
            return Err(Error::invalid("weak and strong targets need distinct finite amplitudes"));
        }
        if !(lo..=hi).contains(&self.weak_range_m) {
            return Err(Error::invalid(format!("weak target at {} m is outside the range gate", self.weak_range_m)));
        }
        if (lo..=hi).contains(&self.strong_range_m) {
            return Err(Error::invalid("strong target must lie outside the range gate"));
        }
        Ok(())
    }

    /// Delay interval of the gate relative to the strong target, useful as a
    /// pulse design region.
    pub fn relative_region(&self) -> Result<super::DelayRegion> {
        let [lo, hi] = self.region_m;
        super::DelayRegion::from_ranges(lo - self.strong_range_m, hi - self.strong_range_m)
    }

    fn range_scene(&self, fs: f64) -> RangeScene {
        RangeScene {
            targets: vec![
                Target { range_m: self.strong_range_m, amplitude: Complex64::new(1.0, 0.0) },
                Target {
                    range_m: self.weak_range_m,
                    amplitude: Complex64::new(10f64.powf(self.weak_level_db / 20.0), 0.0),
                },
            ],
            fs,
            noise_power: self.noise_power,
            random_phase: self.random_phase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionStats {
    pub p_detect: f64,
    pub hits: usize,
    pub trials: usize,
    /// Binomial standard error of `p_detect`.
    pub std_error: f64,
}

/// Per-trial detection outcomes; trial `t` uses the same symbols, phases
/// and noise for any pulse, so comparisons use common random numbers.
fn detection_outcomes(
    scene: &WeakTargetScene,
    pulse: &PulseSpec,
    basis: &ModulationBasis,
    source: &SymbolSource,
    trials: usize,
    seed: u64,
) -> Result<Vec<bool>> {
    scene.validate()?;
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let rs = scene.range_scene(pulse.sample_rate());
    let weak_bin = rs.delay_bin(scene.weak_range_m) as isize;
    let tolerance = (pulse.oversampling() / 2) as isize;
    let n = basis.n();
    let outcomes: Vec<Result<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = seed::trial_seed(seed, t);
            let mut rng = seed::rng(seed::derive(ts, "symbols", 0));
            let mut symbols = vec![Complex64::new(0.0, 0.0); n];
            source.sample_into(&mut rng, &mut symbols);
            let x = basis.modulate(&symbols)?.time_samples;
            let profile = range_profile(&x, &rs, Some(pulse), seed::derive(ts, "echo", 0))?;
            let gate = profile.bins_in(scene.region_m[0], scene.region_m[1]);
            if gate.is_empty() {
                return Err(Error::invalid("range gate contains no delay bins"));
            }
            let k = argmax(&profile.power, gate) as isize;
            Ok((k - weak_bin).abs() <= tolerance)
        })
        .collect();
    outcomes.into_iter().collect()
}

/// Probability that the gated profile peak lands on the weak target.
pub fn weak_target_detection(
    scene: &WeakTargetScene,
    pulse: &PulseSpec,
    basis: &ModulationBasis,
    source: &SymbolSource,
    trials: usize,
    seed: u64,
) -> Result<DetectionStats> {
    let hits = detection_outcomes(scene, pulse, basis, source, trials, seed)?.iter().filter(|&&h| h).count();
    let p = hits as f64 / trials as f64;
    Ok(DetectionStats { p_detect: p, hits, trials, std_error: (p * (1.0 - p) / trials as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Improvement {
    pub baseline: DetectionStats,
    pub candidate: DetectionStats,
    /// `(e_a − e_b) / e_a` with `e = 1 − p_detect`; `e_a` is floored at
    /// `1/trials` so a perfect baseline does not divide by zero.
    pub relative_error_reduction: f64,
    /// Standard error of the paired difference `p_b − p_a`.
    pub paired_std_error: f64,
}

/// Relative reduction in weak-target miss probability of `pulse_b` over
/// `pulse_a`, evaluated on common random numbers.
pub fn weak_target_improvement(
    scene: &WeakTargetScene,
    pulse_a: &PulseSpec,
    pulse_b: &PulseSpec,
    basis: &ModulationBasis,
    source: &SymbolSource,
    trials: usize,
    seed: u64,
) -> Result<Improvement> {
    let a = detection_outcomes(scene, pulse_a, basis, source, trials, seed)?;
    let b = detection_outcomes(scene, pulse_b, basis, source, trials, seed)?;
    let stats = |v: &[bool]| {
        let hits = v.iter().filter(|&&h| h).count();
        let p = hits as f64 / trials as f64;
        DetectionStats { p_detect: p, hits, trials, std_error: (p * (1.0 - p) / trials as f64).sqrt() }
    };
    let (sa, sb) = (stats(&a), stats(&b));
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| y as u8 as f64 - x as u8 as f64).collect();
    let mean = diffs.iter().sum::<f64>() / trials as f64;
    let var =
        if trials > 1 { diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials - 1) as f64 } else { 0.0 };
    let ea = (1.0 - sa.p_detect).max(1.0 / trials as f64);
    let eb = 1.0 - sb.p_detect;
    Ok(Improvement {
        baseline: sa,
        candidate: sb,
        relative_error_reduction: if sa.hits == sb.hits { 0.0 } else { (ea - eb) / ea },
        paired_std_error: (var / trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::rrc_pulse;
    use crate::waveform::{BasisKind, BasisParams};

    #[test]
    fn identical_pulses_give_zero_improvement() {
        let p = rrc_pulse(12.5e-9, 0.35, 16, 16).unwrap();
        let b = ModulationBasis::new(BasisKind::Ofdm, 32, BasisParams::default()).unwrap();
        let src = SymbolSource::from_label("16QAM").unwrap();
        let r = weak_target_improvement(&WeakTargetScene::default(), &p, &p, &b, &src, 50, 1).unwrap();
        assert_eq!(r.relative_error_reduction, 0.0);
        assert_eq!(r.baseline, r.candidate);
        assert_eq!(r.paired_std_error, 0.0);
    }

    #[test]
    fn detection_is_reproducible() {
        let p = rrc_pulse(12.5e-9, 0.35, 8, 16).unwrap();
        let b = ModulationBasis::new(BasisKind::Sc, 32, BasisParams::default()).unwrap();
        let src = SymbolSource::from_label("QPSK").unwrap();
        let s = WeakTargetScene::default();
        let a = weak_target_detection(&s, &p, &b, &src, 40, 9).unwrap();
        let c = weak_target_detection(&s, &p, &b, &src, 40, 9).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn noiseless_isolated_weak_target_is_found() {
        let p = rrc_pulse(12.5e-9, 0.35, 16, 16).unwrap();
        let b = ModulationBasis::new(BasisKind::Ofdm, 64, BasisParams::default()).unwrap();
        let src = SymbolSource::from_label("QPSK").unwrap();
        let s = WeakTargetScene { noise_power: 0.0, weak_level_db: -3.0, ..Default::default() };
        let d = weak_target_detection(&s, &p, &b, &src, 20, 2).unwrap();
        assert_eq!(d.p_detect, 1.0);
    }

    #[test]
    fn degenerate_scenes_are_rejected() {
        let bad = [
            WeakTargetScene { weak_level_db: 0.0, ..Default::default() },
            WeakTargetScene { weak_range_m: 40.0, ..Default::default() },
            WeakTargetScene { strong_range_m: 25.0, ..Default::default() },
            WeakTargetScene { region_m: [30.0, 20.0], ..Default::default() },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
    }
}
