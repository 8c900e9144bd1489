//! Monte-Carlo ACF statistics over i.i.d. symbol blocks.
//!
//! Each realization is normalized by its own zero lag before averaging, so
//! the per-lag values are `|r[k]|² / |r[0]|²` and their sum over sidelobe
//! lags is the realization's ISL.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::acf::{acf, isl, AcfMode};
use super::{SensingStats, SymbolSource, VecMoments};
use crate::error::{Error, Result};
use crate::seed;
use crate::waveform::ModulationBasis;

const CHUNK: usize = 256;

#[derive(Debug, Clone, Serialize)]
pub struct AcfProfile {
    pub lags: Vec<isize>,
    /// Mean of `|r[k]|²/|r[0]|²` per lag.
    pub mean: Vec<f64>,
    /// Variance of `|r[k]|²/|r[0]|²` per lag.
    pub variance: Vec<f64>,
    pub trials: usize,
    pub mode: AcfMode,
}

impl AcfProfile {
    /// Standard error of the per-lag mean.
    pub fn std_error(&self) -> Vec<f64> {
        self.variance.iter().map(|v| (v / self.trials as f64).sqrt()).collect()
    }
}

fn normalized_power_profile(
    basis: &ModulationBasis,
    source: &SymbolSource,
    mode: AcfMode,
    trial_seed: u64,
    symbols: &mut [Complex64],
    time: &mut [Complex64],
) -> Result<Vec<f64>> {
    let mut rng = seed::rng(trial_seed);
    source.sample_into(&mut rng, symbols);
    basis.modulate_into(symbols, time)?;
    let r = acf(time, mode)?;
    let r0 = r.zero_lag().norm_sqr();
    if r0 == 0.0 {
        // A zero block has no sidelobes to speak of.
        let mut out = vec![0.0; r.values().len()];
        let zero_idx = r.lags().iter().position(|&k| k == 0).unwrap_or(0);
        out[zero_idx] = 1.0;
        return Ok(out);
    }
    Ok(r.values().iter().map(|v| v.norm_sqr() / r0).collect())
}

/// Per-lag mean and variance of the normalized `|ACF|²`.
pub fn expected_acf_profile(
    basis: &ModulationBasis,
    source: &SymbolSource,
    trials: usize,
    mode: AcfMode,
    seed: u64,
) -> Result<AcfProfile> {
    if trials < 2 {
        return Err(Error::invalid(format!("need at least 2 trials, got {trials}")));
    }
    let n = basis.n();
    let lags: Vec<isize> = match mode {
        AcfMode::Periodic => (0..n as isize).collect(),
        AcfMode::Aperiodic => (-(n as isize - 1)..n as isize).collect(),
    };
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Result<VecMoments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = VecMoments::new(lags.len());
            let mut symbols = vec![Complex64::new(0.0, 0.0); n];
            let mut time = symbols.clone();
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let p =
                    normalized_power_profile(basis, source, mode, seed::trial_seed(seed, t), &mut symbols, &mut time)?;
                acc.push(&p);
            }
            Ok(acc)
        })
        .collect();
    let mut total = VecMoments::new(lags.len());
    for p in partial {
        total = total.merge(&p?);
    }
    Ok(AcfProfile { lags, variance: total.variance(), mean: total.mean, trials, mode })
}

/// Expected ISL over random blocks, with per-realization ISL statistics.
pub fn eisl(
    basis: &ModulationBasis,
    source: &SymbolSource,
    trials: usize,
    mode: AcfMode,
    exclude_mainlobe_lags: usize,
    threshold: f64,
    seed: u64,
) -> Result<SensingStats> {
    let n = basis.n();
    super::try_sensing_stats(
        |trial_seed| {
            let mut rng = seed::rng(trial_seed);
            let mut symbols = vec![Complex64::new(0.0, 0.0); n];
            let mut time = symbols.clone();
            source.sample_into(&mut rng, &mut symbols);
            basis.modulate_into(&symbols, &mut time)?;
            isl(&acf(&time, mode)?, exclude_mainlobe_lags)
        },
        threshold,
        trials,
        seed,
    )
}
