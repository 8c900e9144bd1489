//! Mutual information of discrete inputs over the complex AWGN channel.
//!
//! With `Y = X + Z`, `Z ~ CN(0, σ²)`, the per-symbol divergence is
//!
//! ```text
//! D_i = −E_Z log Σ_j p_j exp(−(|x_i − x_j + Z|² − |Z|²) / σ²)
//! ```
//!
//! and `I(X;Y) = Σ_i p_i D_i`. The expectation over `Z` is evaluated with a
//! tensor Gauss–Hermite rule or by plain Monte Carlo.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::metrics::complex_normal;
use crate::seed;

pub const DEFAULT_QUADRATURE_ORDER: usize = 16;
pub const MIN_QUADRATURE_ORDER: usize = 8;
pub const MIN_MC_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwgnChannel {
    noise_variance: f64,
}

impl AwgnChannel {
    pub fn new(noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_variance}")));
        }
        Ok(AwgnChannel { noise_variance })
    }

    /// Channel with `SNR = 1/σ²` for unit-power inputs.
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        Self::new(10f64.powf(-snr_db / 10.0))
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.noise_variance.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiMethod {
    Quadrature { order: usize },
    MonteCarlo { trials: usize, seed: u64 },
}

impl Default for MiMethod {
    fn default() -> Self {
        MiMethod::Quadrature { order: DEFAULT_QUADRATURE_ORDER }
    }
}

/// Gauss–Hermite nodes and weights for `∫ e^{−t²} f(t) dt`, from the
/// eigen-decomposition of the Jacobi matrix.
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::invalid("quadrature order must be positive"));
    }
    let jacobi =
        DMatrix::from_fn(
            order,
            order,
            |i, j| {
                if i + 1 == j || j + 1 == i {
                    (i.max(j) as f64 / 2.0).sqrt()
                } else {
                    0.0
                }
            },
        );
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize so that mirrored nodes carry bit-identical weights.
    let n = pairs.len();
    for k in 0..n / 2 {
        let t = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
        let w = 0.5 * (pairs[k].1 + pairs[n - 1 - k].1);
        pairs[k] = (-t, w);
        pairs[n - 1 - k] = (t, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    Ok(pairs.into_iter().unzip())
}

/// Noise samples `Z` with weights summing to one.
#[derive(Debug, Clone)]
pub(crate) struct NoiseRule {
    pub z: Vec<Complex64>,
    pub w: Vec<f64>,
}

impl NoiseRule {
    pub fn quadrature(ch: &AwgnChannel, order: usize) -> Result<Self> {
        if order < MIN_QUADRATURE_ORDER {
            return Err(Error::invalid(format!("quadrature order must be ≥ {MIN_QUADRATURE_ORDER}, got {order}")));
        }
        let (t, w) = gauss_hermite(order)?;
        let sigma = ch.noise_variance.sqrt();
        let mut z = Vec::with_capacity(order * order);
        let mut ww = Vec::with_capacity(order * order);
        for (ta, wa) in t.iter().zip(&w) {
            for (tb, wb) in t.iter().zip(&w) {
                z.push(Complex64::new(sigma * ta, sigma * tb));
                ww.push(wa * wb / std::f64::consts::PI);
            }
        }
        Ok(NoiseRule { z, w: ww })
    }
}

/// `D_i` in nats for every constellation point under input law `probs`.
pub(crate) fn divergences(points: &[Complex64], probs: &[f64], ch: &AwgnChannel, rule: &NoiseRule) -> Vec<f64> {
    let inv = 1.0 / ch.noise_variance;
    let support: Vec<(Complex64, f64)> =
        points.iter().zip(probs).filter(|(_, &p)| p > 0.0).map(|(x, &p)| (*x, p.ln())).collect();
    points
        .par_iter()
        .map(|xi| {
            let mut acc = 0.0;
            let mut expo = Vec::with_capacity(support.len());
            for (z, w) in rule.z.iter().zip(&rule.w) {
                expo.clear();
                let zz = z.norm_sqr();
                let mut m = f64::NEG_INFINITY;
                for (xj, lp) in &support {
                    let e = lp - ((xi - xj + z).norm_sqr() - zz) * inv;
                    m = m.max(e);
                    expo.push(e);
                }
                let s: f64 = expo.iter().map(|e| (e - m).exp()).sum();
                acc -= w * (m + s.ln());
            }
            acc
        })
        .collect()
}

/// `exp(−(|x_i − x_j + z_k|² − |z_k|²)/σ²)` for every `(i, k, j)`, which does
/// not depend on the input law. The `j = i` entry is exactly one and the
/// exponent never exceeds `|z_k|²/σ²`, so the table neither underflows to an
/// all-zero row nor overflows for any practical quadrature order.
pub(crate) struct LikelihoodTable {
    n: usize,
    nodes: usize,
    w: Vec<f64>,
    e: Vec<f64>,
}

impl LikelihoodTable {
    pub fn new(points: &[Complex64], ch: &AwgnChannel, rule: &NoiseRule) -> Self {
        let n = points.len();
        let nodes = rule.z.len();
        let inv = 1.0 / ch.noise_variance;
        let e = points
            .par_iter()
            .flat_map_iter(|xi| {
                rule.z.iter().flat_map(move |z| {
                    let zz = z.norm_sqr();
                    points.iter().map(move |xj| (-((xi - xj + z).norm_sqr() - zz) * inv).exp())
                })
            })
            .collect();
        LikelihoodTable { n, nodes, w: rule.w.clone(), e }
    }

    /// `D_i` in nats under input law `probs`.
    pub fn divergences(&self, probs: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for k in 0..self.nodes {
                    let row = &self.e[(i * self.nodes + k) * self.n..][..self.n];
                    let s: f64 = row.iter().zip(probs).map(|(e, p)| e * p).sum();
                    acc -= self.w[k] * s.ln();
                }
                acc
            })
            .collect()
    }
}

/// `I(X;Y)` in bits.
pub fn mutual_information(c: &Constellation, ch: &AwgnChannel, method: MiMethod) -> Result<f64> {
    match method {
        MiMethod::Quadrature { order } => {
            let rule = NoiseRule::quadrature(ch, order)?;
            let d = divergences(c.points(), c.probs(), ch, &rule);
            Ok(c.probs().iter().zip(&d).map(|(p, d)| p * d).sum::<f64>() / std::f64::consts::LN_2)
        }
        MiMethod::MonteCarlo { trials, seed } => monte_carlo_mi(c, ch, trials, seed),
    }
}

fn monte_carlo_mi(c: &Constellation, ch: &AwgnChannel, trials: usize, seed: u64) -> Result<f64> {
    if trials < MIN_MC_TRIALS {
        return Err(Error::invalid(format!("Monte-Carlo MI needs at least {MIN_MC_TRIALS} samples, got {trials}")));
    }
    const CHUNK: usize = 4096;
    let inv = 1.0 / ch.noise_variance;
    let support: Vec<(Complex64, f64)> =
        c.points().iter().zip(c.probs()).filter(|(_, &p)| p > 0.0).map(|(x, &p)| (*x, p)).collect();
    let chunk_sums: Vec<f64> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(seed::derive(seed, "mi", k as u64));
            let mut x = [Complex64::new(0.0, 0.0)];
            let mut sum = 0.0;
            for _ in k * CHUNK..((k + 1) * CHUNK).min(trials) {
                c.sample_into(&mut rng, &mut x);
                let z = complex_normal(&mut rng, ch.noise_variance);
                let y = x[0] + z;
                let num = -z.norm_sqr() * inv;
                let terms: Vec<f64> = support.iter().map(|(xj, p)| p.ln() - (y - xj).norm_sqr() * inv).collect();
                let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let den = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
                sum += num - den;
            }
            sum
        })
        .collect();
    Ok(chunk_sums.iter().sum::<f64>() / trials as f64 / std::f64::consts::LN_2)
}
