//! MIMO precoding for target-response estimation under random data.
//!
//! A mono-static receiver with `n_rx` antennas observes `Y = G·X + N`, where
//! `X = W·S` is the `n_tx × L` transmit block and `G` the target impulse
//! response. With the data `S` known at the receiver, the least-squares and
//! LMMSE estimates of `G` have errors
//!
//! ```text
//! LSE   = σ² n_rx tr((X Xᴴ)⁻¹)
//! LMMSE = n_rx tr((γ⁻¹ I + X Xᴴ / σ²)⁻¹)
//! ```
//!
//! Both depend on the random data through `X Xᴴ`; the ergodic versions
//! average over it.

mod dip;

pub use dip::{dip_precoder, DipOptions, DipResult};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{SensingStats, SymbolSource, MIN_STATS_TRIALS};
use crate::seed;

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below this fraction of the largest count as zero.
pub const SINGULAR_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TirModel {
    pub n_tx: usize,
    pub n_rx: usize,
    pub noise_var: f64,
    /// Prior variance of each i.i.d. `CN(0, γ)` TIR entry, for LMMSE.
    #[serde(default)]
    pub prior_var: Option<f64>,
    pub frame_len: usize,
}

impl TirModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.frame_len == 0 {
            return Err(Error::invalid("n_tx, n_rx and frame_len must be positive"));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be ≥ 0, got {}", self.noise_var)));
        }
        if let Some(g) = self.prior_var {
            if !(g > 0.0) {
                return Err(Error::invalid(format!("prior variance must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ErrorMetric {
    Lse,
    Lmmse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodedFrame {
    w: CMatrix,
    s: CMatrix,
    power_budget: f64,
}

impl PrecodedFrame {
    pub fn new(w: CMatrix, s: CMatrix, power_budget: f64) -> Result<Self> {
        if w.ncols() != s.nrows() {
            return Err(Error::DimensionMismatch { expected: w.ncols(), got: s.nrows() });
        }
        if !(power_budget > 0.0) {
            return Err(Error::invalid(format!("power budget must be positive, got {power_budget}")));
        }
        Ok(PrecodedFrame { w, s, power_budget })
    }

    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    pub fn x(&self) -> CMatrix {
        &self.w * &self.s
    }

    /// `tr(X Xᴴ) − P·L`; nonpositive when the frame meets its budget.
    pub fn power_excess(&self) -> f64 {
        self.x().norm_squared() - self.power_budget * self.s.ncols() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommLink {
    pub h: CMatrix,
    pub noise_var: f64,
    pub rate_floor: f64,
}

impl CommLink {
    pub fn validate(&self, n_tx: usize) -> Result<()> {
        if self.h.ncols() != n_tx {
            return Err(Error::DimensionMismatch { expected: n_tx, got: self.h.ncols() });
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::invalid(format!("link noise variance must be positive, got {}", self.noise_var)));
        }
        if !(self.rate_floor >= 0.0 && self.rate_floor.is_finite()) {
            return Err(Error::invalid(format!("rate floor must be ≥ 0, got {}", self.rate_floor)));
        }
        Ok(())
    }
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
}

fn gram(x: &CMatrix) -> CMatrix {
    x * x.adjoint()
}

/// `σ² n_rx tr((X Xᴴ)⁻¹)` for a transmit block `x`.
pub fn lse_error_of(x: &CMatrix, model: &TirModel) -> Result<f64> {
    let ev = hermitian_eigenvalues(&gram(x));
    let max = ev.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || ev.iter().any(|&l| l < SINGULAR_RTOL * max) {
        return Err(Error::Singular("X·Xᴴ is rank deficient".into()));
    }
    Ok(model.noise_var * model.n_rx as f64 * ev.iter().map(|l| 1.0 / l).sum::<f64>())
}

/// `n_rx tr((γ⁻¹ I + X Xᴴ/σ²)⁻¹)` for a transmit block `x`.
pub fn lmmse_error_of(x: &CMatrix, model: &TirModel) -> Result<f64> {
    let gamma = model.prior_var.ok_or_else(|| Error::invalid("LMMSE needs a prior variance"))?;
    let s2 = model.noise_var;
    let ev = hermitian_eigenvalues(&gram(x));
    let max = ev.iter().copied().fold(0.0, f64::max);
    let per_mode = |l: f64| {
        if s2 == 0.0 {
            if l > SINGULAR_RTOL * max && l > 0.0 {
                0.0
            } else {
                gamma
            }
        } else {
            gamma * s2 / (s2 + gamma * l.max(0.0))
        }
    };
    Ok(model.n_rx as f64 * ev.into_iter().map(per_mode).sum::<f64>())
}

pub fn lse_error(frame: &PrecodedFrame, model: &TirModel) -> Result<f64> {
    check_frame(frame, model)?;
    lse_error_of(&frame.x(), model)
}

pub fn lmmse_error(frame: &PrecodedFrame, model: &TirModel) -> Result<f64> {
    check_frame(frame, model)?;
    lmmse_error_of(&frame.x(), model)
}

fn check_frame(frame: &PrecodedFrame, model: &TirModel) -> Result<()> {
    model.validate()?;
    if frame.w.nrows() != model.n_tx {
        return Err(Error::DimensionMismatch { expected: model.n_tx, got: frame.w.nrows() });
    }
    Ok(())
}

pub(crate) fn metric_of(x: &CMatrix, model: &TirModel, metric: ErrorMetric) -> Result<f64> {
    match metric {
        ErrorMetric::Lse => lse_error_of(x, model),
        ErrorMetric::Lmmse => lmmse_error_of(x, model),
    }
}

/// Random `n × L` symbol block with i.i.d. entries from `source`.
pub fn sample_symbols(source: &SymbolSource, rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = seed::rng(seed);
    let mut v = vec![Complex64::new(0.0, 0.0); rows * cols];
    source.sample_into(&mut rng, &mut v);
    CMatrix::from_vec(rows, cols, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErgodicError {
    /// Statistics over the nonsingular frames.
    pub stats: SensingStats,
    /// Frames with a rank-deficient `X Xᴴ` (LSE undefined), counted as
    /// outage events.
    pub singular_frames: usize,
}

/// Monte-Carlo ergodic error of a fixed precoder `w` over i.i.d. blocks.
pub fn ergodic_error(
    w: &CMatrix,
    model: &TirModel,
    source: &SymbolSource,
    metric: ErrorMetric,
    trials: usize,
    threshold: f64,
    seed: u64,
) -> Result<ErgodicError> {
    model.validate()?;
    if w.nrows() != model.n_tx {
        return Err(Error::DimensionMismatch { expected: model.n_tx, got: w.nrows() });
    }
    if trials < MIN_STATS_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_STATS_TRIALS} trials, got {trials}")));
    }
    let ns = w.ncols();
    let samples: Vec<Result<Option<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_symbols(source, ns, model.frame_len, seed::trial_seed(seed, t));
            match metric_of(&(w * s), model, metric) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Singular(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let singular = samples.iter().filter(|s| s.is_none()).count();
    let values: Vec<f64> = samples.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(Error::Singular(format!("all {trials} frames are rank deficient")));
    }
    Ok(ErgodicError { stats: SensingStats::from_samples(&values, threshold, seed)?, singular_frames: singular })
}

/// Monte-Carlo error of the data-dependent precoder, recomputed for every
/// block. Blocks with a singular `S Sᴴ` count as outages.
pub fn ddp_ergodic_error(
    model: &TirModel,
    source: &SymbolSource,
    power: f64,
    metric: ErrorMetric,
    trials: usize,
    threshold: f64,
    seed: u64,
) -> Result<ErgodicError> {
    model.validate()?;
    if trials < MIN_STATS_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_STATS_TRIALS} trials, got {trials}")));
    }
    let n = model.n_tx;
    let samples: Vec<Result<Option<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_symbols(source, n, model.frame_len, seed::trial_seed(seed, t));
            let w = match ddp_precoder(&s, power, n) {
                Ok(w) => w,
                Err(Error::Singular(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            metric_of(&(w * s), model, metric).map(Some)
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let singular = samples.iter().filter(|s| s.is_none()).count();
    let values: Vec<f64> = samples.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(Error::Singular(format!("all {trials} frames are rank deficient")));
    }
    Ok(ErgodicError { stats: SensingStats::from_samples(&values, threshold, seed)?, singular_frames: singular })
}

/// `√(P/n_tx)·I`, the fixed isotropic precoder.
pub fn identity_precoder(n_tx: usize, power: f64) -> CMatrix {
    CMatrix::identity(n_tx, n_tx) * Complex64::new((power / n_tx as f64).sqrt(), 0.0)
}

/// Data-dependent precoder `W = √(P L / n_tx) (S Sᴴ)^{−1/2}`, which whitens
/// the block so that `X Xᴴ = (P L / n_tx) I`.
pub fn ddp_precoder(s: &CMatrix, power: f64, n_tx: usize) -> Result<CMatrix> {
    if s.nrows() != n_tx {
        return Err(Error::DimensionMismatch { expected: n_tx, got: s.nrows() });
    }
    if !(power > 0.0) {
        return Err(Error::invalid(format!("power must be positive, got {power}")));
    }
    let a = gram(s);
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || eig.eigenvalues.iter().any(|&l| l < SINGULAR_RTOL * max) {
        return Err(Error::Singular("S·Sᴴ is rank deficient".into()));
    }
    let scale = (power * s.ncols() as f64 / n_tx as f64).sqrt();
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(scale / l.sqrt(), 0.0)));
    let u = &eig.eigenvectors;
    Ok(u * d * u.adjoint())
}

/// `log₂ det(I + H W Wᴴ Hᴴ / σ_c²)`.
pub fn comm_rate(w: &CMatrix, comm: &CommLink) -> Result<f64> {
    if comm.h.ncols() != w.nrows() {
        return Err(Error::DimensionMismatch { expected: w.nrows(), got: comm.h.ncols() });
    }
    let hw = &comm.h * w;
    Ok(hermitian_eigenvalues(&gram(&hw)).into_iter().map(|l| (1.0 + l.max(0.0) / comm.noise_var).log2()).sum())
}

/// Water-filling capacity of the link at total power `power`, and a
/// precoder (`n_tx × n_tx`) achieving it.
pub fn link_capacity(comm: &CommLink, power: f64) -> Result<(f64, CMatrix)> {
    let n = comm.h.ncols();
    let eig = SymmetricEigen::new({
        let g = comm.h.adjoint() * &comm.h;
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    });
    let gains: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0) / comm.noise_var).collect();
    let mut order: Vec<usize> = (0..n).filter(|&k| gains[k] > 1e-14).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    // Largest active set whose water level keeps every allocation positive.
    let mut alloc = vec![0.0; n];
    for m in (1..=order.len()).rev() {
        let inv: f64 = order[..m].iter().map(|&k| 1.0 / gains[k]).sum();
        let mu = (power + inv) / m as f64;
        if mu - 1.0 / gains[order[m - 1]] > 0.0 {
            for &k in &order[..m] {
                alloc[k] = mu - 1.0 / gains[k];
            }
            break;
        }
    }
    let rate = (0..n).map(|k| (1.0 + gains[k] * alloc[k]).log2()).sum();
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        alloc.iter().map(|p| Complex64::new(p.sqrt(), 0.0)),
    ));
    Ok((rate, &eig.eigenvectors * d))
}
