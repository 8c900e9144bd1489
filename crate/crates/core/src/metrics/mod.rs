//! Sensing metrics under random signaling.
//!
//! Deterministic per-realization quantities (ACF, PSD, ISL, range profiles)
//! live in [`acf`] and [`range`]. Their distribution over random symbol
//! blocks is summarized by [`SensingStats`] (mean, variance, tail probability)
//! and by the per-lag profiles in [`montecarlo`].

pub mod acf;
pub mod montecarlo;
pub mod range;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::seed;

pub use acf::{acf, isl, psd, Acf, AcfMode};
pub use montecarlo::{eisl, expected_acf_profile, AcfProfile};
pub use range::{range_profile, RangeProfile, RangeScene, Target};

/// Distribution of the data symbols feeding a modulation basis.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolSource {
    /// Circularly-symmetric complex Gaussian codebook, `CN(0, 1)`.
    Gaussian,
    Constellation(Constellation),
}

impl SymbolSource {
    /// `GAUSSIAN` (or `GAUSS`) or any label accepted by [`Constellation::standard`].
    pub fn from_label(label: &str) -> Result<Self> {
        match label.to_ascii_uppercase().as_str() {
            "GAUSSIAN" | "GAUSS" => Ok(SymbolSource::Gaussian),
            _ => Ok(SymbolSource::Constellation(Constellation::standard(label, None)?)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SymbolSource::Gaussian => "GAUSSIAN".into(),
            SymbolSource::Constellation(c) => c.label().into(),
        }
    }

    /// E|x|⁴ / (E|x|²)²; 2 for the Gaussian codebook.
    pub fn kurtosis(&self) -> f64 {
        match self {
            SymbolSource::Gaussian => 2.0,
            SymbolSource::Constellation(c) => c.kurtosis(),
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64]) {
        match self {
            SymbolSource::Gaussian => out.iter_mut().for_each(|o| *o = complex_normal(rng, 1.0)),
            SymbolSource::Constellation(c) => c.sample_into(rng, out),
        }
    }
}

/// One draw from `CN(0, variance)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Monte-Carlo summary of a random sensing loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingStats {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Fraction of trials with loss ≥ `threshold`.
    pub tail_prob: f64,
    pub threshold: f64,
    pub trials: usize,
    /// 95% normal-approximation half-width for the mean.
    pub ci_halfwidth: f64,
    pub seed: u64,
}

impl SensingStats {
    pub fn from_samples(samples: &[f64], threshold: f64, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        if let Some(trial) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { trial });
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance =
            if samples.len() > 1 { samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let tail = samples.iter().filter(|&&x| x >= threshold).count() as f64 / n;
        Ok(SensingStats {
            mean,
            variance,
            tail_prob: tail,
            threshold,
            trials: samples.len(),
            ci_halfwidth: 1.96 * (variance / n).sqrt(),
            seed,
        })
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.trials as f64).sqrt()
    }
}

pub const MIN_STATS_TRIALS: usize = 100;

/// Mean, variance and tail probability `P[f ≥ threshold]` of a loss sampled
/// once per trial. `loss_sampler` receives the trial's derived seed; trials
/// run in parallel and are reduced in trial order.
pub fn sensing_stats<F>(loss_sampler: F, threshold: f64, trials: usize, seed: u64) -> Result<SensingStats>
where
    F: Fn(u64) -> f64 + Sync,
{
    if trials < MIN_STATS_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_STATS_TRIALS} trials, got {trials}")));
    }
    let samples: Vec<f64> = (0..trials).into_par_iter().map(|t| loss_sampler(seed::trial_seed(seed, t))).collect();
    SensingStats::from_samples(&samples, threshold, seed)
}

/// Fallible variant of [`sensing_stats`]; the first failing trial (in trial
/// order) aborts the estimate.
pub fn try_sensing_stats<F>(loss_sampler: F, threshold: f64, trials: usize, seed: u64) -> Result<SensingStats>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if trials < MIN_STATS_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_STATS_TRIALS} trials, got {trials}")));
    }
    let samples: Vec<Result<f64>> =
        (0..trials).into_par_iter().map(|t| loss_sampler(seed::trial_seed(seed, t))).collect();
    let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
    SensingStats::from_samples(&samples, threshold, seed)
}

/// Element-wise running mean / M2 accumulator (Welford), mergeable in a fixed
/// order so parallel reductions stay bit-reproducible.
#[derive(Debug, Clone)]
pub(crate) struct VecMoments {
    pub n: usize,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl VecMoments {
    pub fn new(dim: usize) -> Self {
        VecMoments { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(mut self, other: &VecMoments) -> Self {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other.clone();
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
        self
    }

    pub fn variance(&self) -> Vec<f64> {
        let denom = (self.n.max(2) - 1) as f64;
        self.m2.iter().map(|s| (s / denom).max(0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_loss() {
        let s = sensing_stats(|_| 5.0, 3.0, 100, 1).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.tail_prob, 1.0);
        assert_eq!(s.ci_halfwidth, 0.0);
        let s = sensing_stats(|_| 5.0, 7.0, 100, 1).unwrap();
        assert_eq!(s.tail_prob, 0.0);
    }

    #[test]
    fn uniform_tail() {
        let s = sensing_stats(
            |seed| {
                let mut r = crate::seed::rng(seed);
                r.random::<f64>()
            },
            0.5,
            100_000,
            11,
        )
        .unwrap();
        assert!((s.tail_prob - 0.5).abs() < 0.005);
        assert!((s.mean - 0.5).abs() < 0.005);
        assert!((s.variance - 1.0 / 12.0).abs() < 0.002);
        assert_abs_diff_eq!(s.ci_halfwidth, 1.96 * (s.variance / 1e5).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn errors() {
        assert!(sensing_stats(|_| 1.0, 0.0, 99, 0).is_err());
        let e = sensing_stats(|s| if s == seed::trial_seed(0, 17) { f64::NAN } else { 1.0 }, 0.0, 100, 0);
        assert!(matches!(e, Err(Error::NonFinite { trial: 17 })));
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let data: Vec<[f64; 2]> = (0..50).map(|i| [i as f64, (i * i % 7) as f64]).collect();
        let mut all = VecMoments::new(2);
        data.iter().for_each(|x| all.push(x));
        let mut a = VecMoments::new(2);
        let mut b = VecMoments::new(2);
        data[..20].iter().for_each(|x| a.push(x));
        data[20..].iter().for_each(|x| b.push(x));
        let merged = a.merge(&b);
        for i in 0..2 {
            assert_abs_diff_eq!(merged.mean[i], all.mean[i], epsilon = 1e-12);
            assert_abs_diff_eq!(merged.m2[i], all.m2[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn source_labels() {
        assert_eq!(SymbolSource::from_label("gaussian").unwrap(), SymbolSource::Gaussian);
        assert_eq!(SymbolSource::from_label("16QAM").unwrap().label(), "16QAM");
        assert!(SymbolSource::from_label("nope").is_err());
        assert_eq!(SymbolSource::Gaussian.kurtosis(), 2.0);
    }
}
