//! Autocorrelation, power spectrum and integrated sidelobe level.
//!
//! Lag convention: `r[k] = Σ_n s[n+k] · s*[n]`, so a delayed echo produces a
//! matched-filter peak at its own delay and `DFT(r_periodic) = |DFT(s)|²`
//! holds bin by bin.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    plan.process(buf);
}

/// Unnormalized forward DFT, `X[m] = Σ_n x[n] e^{-j2πnm/N}`.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    fft_in_place(&mut buf, false);
    buf
}

/// Normalized inverse DFT, `x[n] = (1/N) Σ_m X[m] e^{+j2πnm/N}`.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    fft_in_place(&mut buf, true);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcfMode {
    /// Circular correlation over the block (cyclic-prefixed transmission).
    #[default]
    Periodic,
    /// Linear correlation, lags `-(N-1)..=N-1`.
    Aperiodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acf {
    /// Periodic: lags `0..N`. Aperiodic: lags `-(N-1)..=N-1` in order.
    values: Vec<Complex64>,
    mode: AcfMode,
    normalized: bool,
    signal_len: usize,
}

impl Acf {
    pub fn mode(&self) -> AcfMode {
        self.mode
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// Lags in the order of [`Acf::values`].
    pub fn lags(&self) -> Vec<isize> {
        let n = self.signal_len as isize;
        match self.mode {
            AcfMode::Periodic => (0..n).collect(),
            AcfMode::Aperiodic => (-(n - 1)..n).collect(),
        }
    }

    /// Value at lag `k`; periodic lags wrap, aperiodic lags outside the span are 0.
    pub fn lag(&self, k: isize) -> Complex64 {
        let n = self.signal_len as isize;
        match self.mode {
            AcfMode::Periodic => self.values[k.rem_euclid(n) as usize],
            AcfMode::Aperiodic if k.abs() < n => self.values[(k + n - 1) as usize],
            AcfMode::Aperiodic => Complex64::new(0.0, 0.0),
        }
    }

    pub fn zero_lag(&self) -> Complex64 {
        self.lag(0)
    }

    /// Divides every lag by `r[0]`.
    pub fn normalize(mut self) -> Result<Self> {
        let r0 = self.zero_lag();
        if r0.norm() == 0.0 {
            return Err(Error::invalid("cannot normalize an ACF with zero energy"));
        }
        self.values.iter_mut().for_each(|v| *v /= r0);
        self.normalized = true;
        Ok(self)
    }

    /// `max_k |r[-k] - conj(r[k])|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.signal_len as isize;
        (0..n).map(|k| (self.lag(-k) - self.lag(k).conj()).norm()).fold(0.0, f64::max)
    }

    /// Sidelobe lags with `|k| ≤ exclude` removed.
    pub fn sidelobe_lags(&self, exclude: usize) -> Result<Vec<isize>> {
        let n = self.signal_len as isize;
        let w = exclude as isize;
        let lags: Vec<isize> = match self.mode {
            AcfMode::Periodic => (w + 1..n - w).collect(),
            AcfMode::Aperiodic => (-(n - 1)..n).filter(|k| k.abs() > w).collect(),
        };
        if lags.is_empty() {
            return Err(Error::invalid(format!(
                "mainlobe exclusion of {exclude} lags leaves no sidelobes for length {}",
                self.signal_len
            )));
        }
        Ok(lags)
    }
}

/// ACF of `signal` in the requested mode.
pub fn acf(signal: &[Complex64], mode: AcfMode) -> Result<Acf> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::invalid(format!("ACF needs at least 2 samples, got {n}")));
    }
    let size = match mode {
        AcfMode::Periodic => n,
        AcfMode::Aperiodic => (2 * n - 1).next_power_of_two(),
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    buf[..n].copy_from_slice(signal);
    fft_in_place(&mut buf, false);
    buf.iter_mut().for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
    fft_in_place(&mut buf, true);
    let scale = 1.0 / size as f64;
    let values = match mode {
        AcfMode::Periodic => buf.iter().map(|v| v * scale).collect(),
        AcfMode::Aperiodic => {
            (-(n as isize - 1)..n as isize).map(|k| buf[k.rem_euclid(size as isize) as usize] * scale).collect()
        }
    };
    Ok(Acf { values, mode, normalized: false, signal_len: n })
}

/// Direct O(N²) evaluation of the lag sum; slow, used as a cross-check.
pub fn acf_direct(signal: &[Complex64], mode: AcfMode) -> Result<Acf> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::invalid(format!("ACF needs at least 2 samples, got {n}")));
    }
    let lag = |k: isize| -> Complex64 {
        (0..n as isize)
            .filter_map(|i| {
                let j = i + k;
                match mode {
                    AcfMode::Periodic => Some(signal[j.rem_euclid(n as isize) as usize] * signal[i as usize].conj()),
                    AcfMode::Aperiodic if (0..n as isize).contains(&j) => {
                        Some(signal[j as usize] * signal[i as usize].conj())
                    }
                    AcfMode::Aperiodic => None,
                }
            })
            .sum()
    };
    let values = match mode {
        AcfMode::Periodic => (0..n as isize).map(lag).collect(),
        AcfMode::Aperiodic => (-(n as isize - 1)..n as isize).map(lag).collect(),
    };
    Ok(Acf { values, mode, normalized: false, signal_len: n })
}

/// `|DFT(signal)|²`.
pub fn psd(signal: &[Complex64]) -> Result<Vec<f64>> {
    if signal.len() < 2 {
        return Err(Error::invalid("PSD needs at least 2 samples"));
    }
    Ok(dft(signal).iter().map(|v| v.norm_sqr()).collect())
}

/// Integrated sidelobe level `Σ_{sidelobes} |r[k]|² / |r[0]|²`, lags with
/// `|k| ≤ exclude_mainlobe_lags` excluded.
pub fn isl(acf: &Acf, exclude_mainlobe_lags: usize) -> Result<f64> {
    let r0 = acf.zero_lag().norm_sqr();
    if r0 == 0.0 {
        return Err(Error::invalid("ISL undefined for a zero-energy ACF"));
    }
    let lags = acf.sidelobe_lags(exclude_mainlobe_lags)?;
    Ok(lags.iter().map(|&k| acf.lag(k).norm_sqr()).sum::<f64>() / r0)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ones(n: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); n]
    }

    #[test]
    fn hand_computed_aperiodic() {
        let r = acf(&ones(4), AcfMode::Aperiodic).unwrap();
        let mags: Vec<f64> = (0..4).map(|k| r.lag(k).norm()).collect();
        for (m, e) in mags.iter().zip([4.0, 3.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(*m, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(isl(&r, 0).unwrap(), 1.75, epsilon = 1e-12);
        assert_eq!(r.lags().len(), 7);
    }

    #[test]
    fn zero_lag_is_energy() {
        let s: Vec<Complex64> = (0..9).map(|i| Complex64::new(i as f64 * 0.3, 1.0 - i as f64)).collect();
        let energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        for mode in [AcfMode::Periodic, AcfMode::Aperiodic] {
            let r = acf(&s, mode).unwrap();
            assert_abs_diff_eq!(r.zero_lag().re, energy, epsilon = 1e-10);
            assert!(r.hermitian_defect() < 1e-10);
            let d = acf_direct(&s, mode).unwrap();
            for (a, b) in r.values().iter().zip(d.values()) {
                assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn lag_direction_follows_delay() {
        // s[n+k] s*[n]: a signal and its one-sample delay correlate at lag 1.
        let s = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)];
        let r = acf_direct(&s, AcfMode::Aperiodic).unwrap();
        assert_abs_diff_eq!((r.lag(1) - Complex64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn impulse_has_flat_psd() {
        let mut e0 = vec![Complex64::new(0.0, 0.0); 16];
        e0[0] = Complex64::new(1.0, 0.0);
        for v in psd(&e0).unwrap() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        }
        let r = acf(&e0, AcfMode::Periodic).unwrap();
        assert!(isl(&r, 0).unwrap() < 1e-30);
    }

    #[test]
    fn constant_modulus_chirp_has_ideal_periodic_acf() {
        let n = 16;
        let s: Vec<Complex64> =
            (0..n).map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * (k * k) as f64 / n as f64)).collect();
        let p = psd(&s).unwrap();
        for v in &p {
            assert_abs_diff_eq!(*v, n as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn exclusion_window_errors() {
        let r = acf(&ones(4), AcfMode::Periodic).unwrap();
        assert!(isl(&r, 1).is_ok());
        assert!(isl(&r, 2).is_err());
        let r = acf(&ones(4), AcfMode::Aperiodic).unwrap();
        assert!(isl(&r, 2).is_ok());
        assert!(isl(&r, 3).is_err());
        assert!(acf(&ones(1), AcfMode::Periodic).is_err());
    }

    #[test]
    fn normalize() {
        let r = acf(&ones(4), AcfMode::Aperiodic).unwrap().normalize().unwrap();
        assert!(r.is_normalized());
        assert_abs_diff_eq!(r.zero_lag().norm(), 1.0, epsilon = 1e-15);
        let zero = vec![Complex64::new(0.0, 0.0); 4];
        assert!(acf(&zero, AcfMode::Periodic).unwrap().normalize().is_err());
    }
}
