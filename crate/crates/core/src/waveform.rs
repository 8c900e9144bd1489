//! Unitary modulation bases.
//!
//! All four waveforms map a block of `n` data symbols to `n` time samples
//! through a unitary matrix `U`:
//!
//! - SC: `U = I`.
//! - OFDM: normalized IDFT, `U[n, m] = exp(+j2πnm/N) / √N`.
//! - OTFS: inverse discrete Zak transform over an `L × M` delay-Doppler grid,
//!   `x[l + mL] = (1/√M) Σ_k X[l, k] exp(+j2πkm/M)`. Both the time samples and
//!   the symbol grid are vectorized delay-major (`X[l, k]` sits at `l + kL`).
//! - AFDM: `U = Λ(c1) · IDFT · Λ(c2)` with `Λ(c) = diag(exp(+j2πc·n²))`.
//!
//! Matrices are materialized densely; this is intended for blocks up to a few
//! thousand samples.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DENSE_N: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKind {
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "OFDM")]
    Ofdm,
    #[serde(rename = "OTFS")]
    Otfs,
    #[serde(rename = "AFDM")]
    Afdm,
}

impl BasisKind {
    pub const ALL: [BasisKind; 4] = [BasisKind::Sc, BasisKind::Ofdm, BasisKind::Otfs, BasisKind::Afdm];

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Sc => "SC",
            BasisKind::Ofdm => "OFDM",
            BasisKind::Otfs => "OTFS",
            BasisKind::Afdm => "AFDM",
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SC" => Ok(BasisKind::Sc),
            "OFDM" => Ok(BasisKind::Ofdm),
            "OTFS" => Ok(BasisKind::Otfs),
            "AFDM" => Ok(BasisKind::Afdm),
            _ => Err(Error::invalid(format!("unknown basis kind '{s}'"))),
        }
    }
}

/// Kind-specific parameters. Unset fields take defaults at build time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisParams {
    /// OTFS delay bins `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_bins: Option<usize>,
    /// OTFS Doppler bins `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_bins: Option<usize>,
    /// AFDM chirp rate applied to time samples (default `1/(2N)`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    /// AFDM chirp rate applied to symbols (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

impl BasisParams {
    pub fn otfs(delay_bins: usize, doppler_bins: usize) -> Self {
        BasisParams { delay_bins: Some(delay_bins), doppler_bins: Some(doppler_bins), ..Default::default() }
    }

    pub fn afdm(c1: f64, c2: f64) -> Self {
        BasisParams { c1: Some(c1), c2: Some(c2), ..Default::default() }
    }
}

/// Serializable basis description; the matrix itself is never serialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisDescriptor {
    pub kind: BasisKind,
    pub n: usize,
    #[serde(default)]
    pub params: BasisParams,
}

impl BasisDescriptor {
    pub fn build(&self) -> Result<ModulationBasis> {
        ModulationBasis::new(self.kind, self.n, self.params)
    }
}

#[derive(Debug, Clone)]
pub struct ModulationBasis {
    kind: BasisKind,
    n: usize,
    params: BasisParams,
    matrix: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    pub time_samples: Vec<Complex64>,
    pub source_symbols: Vec<Complex64>,
    pub basis_kind: BasisKind,
}

/// Most balanced factorization `n = L·M` with `L ≤ M` and `L ≥ 2`.
pub fn balanced_factorization(n: usize) -> Option<(usize, usize)> {
    let mut l = (n as f64).sqrt().floor() as usize;
    while l >= 2 {
        if n.is_multiple_of(l) {
            return Some((l, n / l));
        }
        l -= 1;
    }
    None
}

/// Resolves OTFS grid dimensions against `n`.
pub fn otfs_grid(n: usize, params: &BasisParams) -> Result<(usize, usize)> {
    match (params.delay_bins, params.doppler_bins) {
        (Some(l), Some(m)) if l >= 1 && m >= 1 && l * m == n => Ok((l, m)),
        (Some(l), Some(m)) => Err(Error::invalid(format!("OTFS grid {l}x{m} does not factor block length {n}"))),
        (Some(l), None) if l >= 1 && n.is_multiple_of(l) => Ok((l, n / l)),
        (None, Some(m)) if m >= 1 && n.is_multiple_of(m) => Ok((n / m, m)),
        (None, None) => balanced_factorization(n)
            .ok_or_else(|| Error::invalid(format!("OTFS block length {n} has no non-trivial factorization"))),
        _ => Err(Error::invalid(format!("OTFS grid does not factor block length {n}"))),
    }
}

fn idft(n: usize) -> DMatrix<Complex64> {
    let scale = (n as f64).sqrt().recip();
    // Reduce nm mod N before forming the phase to keep the argument small.
    DMatrix::from_fn(n, n, |r, c| Complex64::from_polar(scale, 2.0 * PI * ((r * c) % n) as f64 / n as f64))
}

fn chirp(n: usize, c: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            Complex64::from_polar(1.0, 2.0 * PI * c * k * k)
        })
        .collect()
}

impl ModulationBasis {
    /// Checks that `new` would accept these arguments without building the
    /// matrix.
    pub fn check(kind: BasisKind, n: usize, params: &BasisParams) -> Result<()> {
        if n < 2 {
            return Err(Error::invalid(format!("basis dimension must be at least 2, got {n}")));
        }
        if n > MAX_DENSE_N {
            return Err(Error::invalid(format!("basis dimension {n} exceeds {MAX_DENSE_N}")));
        }
        match kind {
            BasisKind::Otfs => otfs_grid(n, params).map(|_| ()),
            BasisKind::Afdm if !params.c1.unwrap_or(0.0).is_finite() || !params.c2.unwrap_or(0.0).is_finite() => {
                Err(Error::invalid("AFDM chirp rates must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn new(kind: BasisKind, n: usize, params: BasisParams) -> Result<Self> {
        Self::check(kind, n, &params)?;
        let mut params = params;
        let matrix = match kind {
            BasisKind::Sc => DMatrix::identity(n, n),
            BasisKind::Ofdm => idft(n),
            BasisKind::Otfs => {
                let (l, m) = otfs_grid(n, &params)?;
                params.delay_bins = Some(l);
                params.doppler_bins = Some(m);
                let scale = (m as f64).sqrt().recip();
                let mut u = DMatrix::zeros(n, n);
                for delay in 0..l {
                    for slot in 0..m {
                        for doppler in 0..m {
                            let phase = 2.0 * PI * ((doppler * slot) % m) as f64 / m as f64;
                            u[(delay + slot * l, delay + doppler * l)] = Complex64::from_polar(scale, phase);
                        }
                    }
                }
                u
            }
            BasisKind::Afdm => {
                let c1 = params.c1.unwrap_or(1.0 / (2.0 * n as f64));
                let c2 = params.c2.unwrap_or(0.0);
                if !c1.is_finite() || !c2.is_finite() {
                    return Err(Error::invalid("AFDM chirp rates must be finite"));
                }
                params.c1 = Some(c1);
                params.c2 = Some(c2);
                let (l1, l2) = (chirp(n, c1), chirp(n, c2));
                let mut u = idft(n);
                for c in 0..n {
                    for r in 0..n {
                        u[(r, c)] *= l1[r] * l2[c];
                    }
                }
                u
            }
        };
        Ok(ModulationBasis { kind, n, params, matrix })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Parameters with defaults resolved.
    pub fn params(&self) -> BasisParams {
        self.params
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor { kind: self.kind, n: self.n, params: self.params }
    }

    /// `out = U · symbols` without allocating.
    pub fn modulate_into(&self, symbols: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if symbols.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: symbols.len() });
        }
        if out.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: out.len() });
        }
        if self.kind == BasisKind::Sc {
            out.copy_from_slice(symbols);
            return Ok(());
        }
        out.fill(Complex64::new(0.0, 0.0));
        for (col, &s) in self.matrix.column_iter().zip(symbols) {
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, u) in out.iter_mut().zip(col.iter()) {
                *o += u * s;
            }
        }
        Ok(())
    }

    pub fn modulate(&self, symbols: &[Complex64]) -> Result<SignalBlock> {
        let mut time = vec![Complex64::new(0.0, 0.0); self.n];
        self.modulate_into(symbols, &mut time)?;
        Ok(SignalBlock { time_samples: time, source_symbols: symbols.to_vec(), basis_kind: self.kind })
    }

    /// `Uᴴ · samples`.
    pub fn demodulate(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: samples.len() });
        }
        Ok(self.matrix.column_iter().map(|col| col.iter().zip(samples).map(|(u, x)| u.conj() * x).sum()).collect())
    }

    /// `‖U·Uᴴ − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = &self.matrix * self.matrix.adjoint();
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram[(r, c)] - target).norm());
            }
        }
        worst
    }
}
