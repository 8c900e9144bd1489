//! Nyquist pulses described by their squared-magnitude spectrum.
//!
//! A pulse is parameterized by `G(f) = |P(f)|²` sampled on the grid
//! `f_i = i·Δf`, `Δf = 1/(S·T)`, where `S` (the span) is the number of grid
//! points per `1/T`. The matched-filter response is the pulse ACF
//!
//! ```text
//! g(τ) = Δf · [G_0 + 2 Σ_{i≥1} G_i cos(2π i Δf τ)]
//! ```
//!
//! which is periodic with period `S·T`. Because shifts by `1/T` are exactly
//! `S` grid bins, the folded-spectrum condition `Σ_m G(f − m/T) = T` is a set
//! of linear equalities on `G`, one per residue class of the bin index mod `S`,
//! and it forces `g(kT) = 0` for every `k ≢ 0 (mod S)`.
//!
//! The time pulse is the zero-phase square root, `P = √G`, sampled at `K`
//! points per symbol.

mod design;
mod scene;

pub use design::{design_pulse, project_feasible, DesignOptions, DesignReport, PulseDesign};
pub use scene::{weak_target_detection, weak_target_improvement, DetectionStats, Improvement, WeakTargetScene};

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::metrics::acf::fft_in_place;

pub const DEFAULT_OVERSAMPLING: usize = 16;
pub const DEFAULT_SPAN: usize = 16;

/// Largest one-sided bin index inside `|f| ≤ (1+β)/(2T)`.
pub(crate) fn support_bins(span: usize, rolloff: f64) -> usize {
    (span as f64 * (1.0 + rolloff) / 2.0 + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSpec {
    symbol_period: f64,
    rolloff: f64,
    oversampling: usize,
    span: usize,
    /// One-sided `G_i = |P(i·Δf)|²` in seconds, `i = 0..=I`.
    spectrum: Vec<f64>,
}

/// Delay interval `[start, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DelayRegion {
    pub start: f64,
    pub end: f64,
}

impl DelayRegion {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || end <= start {
            return Err(Error::invalid(format!("delay region [{start}, {end}] must satisfy 0 ≤ start < end")));
        }
        Ok(DelayRegion { start, end })
    }

    /// Region given in symbol periods.
    pub fn in_symbols(start: f64, end: f64, symbol_period: f64) -> Result<Self> {
        Self::new(start * symbol_period, end * symbol_period)
    }

    /// Two-way delay region for a range interval in meters.
    pub fn from_ranges(start_m: f64, end_m: f64) -> Result<Self> {
        let c = crate::SPEED_OF_LIGHT;
        Self::new(2.0 * start_m / c, 2.0 * end_m / c)
    }
}

impl PulseSpec {
    /// Pulse from a one-sided squared-magnitude spectrum. Nyquist validity is
    /// not enforced here; see [`PulseSpec::folded_spectrum_defect`].
    pub fn from_spectrum(
        symbol_period: f64,
        rolloff: f64,
        oversampling: usize,
        span: usize,
        spectrum: Vec<f64>,
    ) -> Result<Self> {
        if !(symbol_period.is_finite() && symbol_period > 0.0) {
            return Err(Error::invalid(format!("symbol period must be positive, got {symbol_period}")));
        }
        if !(0.0..=1.0).contains(&rolloff) {
            return Err(Error::invalid(format!("roll-off must lie in [0, 1], got {rolloff}")));
        }
        if oversampling < 4 {
            return Err(Error::invalid(format!("oversampling must be at least 4, got {oversampling}")));
        }
        if span < 8 || !span.is_multiple_of(2) {
            return Err(Error::invalid(format!("span must be an even number ≥ 8, got {span}")));
        }
        let bins = support_bins(span, rolloff);
        if spectrum.len() != bins + 1 {
            return Err(Error::DimensionMismatch { expected: bins + 1, got: spectrum.len() });
        }
        if spectrum.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid("spectrum samples must be finite and nonnegative"));
        }
        Ok(PulseSpec { symbol_period, rolloff, oversampling, span, spectrum })
    }

    pub fn symbol_period(&self) -> f64 {
        self.symbol_period
    }

    pub fn rolloff(&self) -> f64 {
        self.rolloff
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Samples per second of shaped signals, `K/T`.
    pub fn sample_rate(&self) -> f64 {
        self.oversampling as f64 / self.symbol_period
    }

    pub fn freq_spacing(&self) -> f64 {
        1.0 / (self.span as f64 * self.symbol_period)
    }

    /// `(f_i, G_i)` for the one-sided grid.
    pub fn spectrum_samples(&self) -> Vec<(f64, f64)> {
        let df = self.freq_spacing();
        self.spectrum.iter().enumerate().map(|(i, &g)| (i as f64 * df, g)).collect()
    }

    /// `G_i / T`.
    pub(crate) fn normalized_spectrum(&self) -> Vec<f64> {
        self.spectrum.iter().map(|g| g / self.symbol_period).collect()
    }

    /// Pulse ACF at an arbitrary delay `tau` (seconds).
    pub fn acf_at(&self, tau: f64) -> f64 {
        let s = self.span as f64;
        let x = tau / self.symbol_period;
        let g = self.normalized_spectrum();
        let tail: f64 =
            g.iter().enumerate().skip(1).map(|(i, gi)| 2.0 * gi * (2.0 * PI * i as f64 * x / s).cos()).sum();
        (g[0] + tail) / s
    }

    /// Sample index range `-(S·K/2) ..= S·K/2`, one period of `g`.
    fn half_period_samples(&self) -> isize {
        (self.span * self.oversampling / 2) as isize
    }

    /// Sampled `g(τ)` at `τ_n = n·T/K` over one period.
    pub fn acf(&self) -> PulseAcf {
        let h = self.half_period_samples();
        let dt = self.symbol_period / self.oversampling as f64;
        let taus: Vec<f64> = (-h..=h).map(|n| n as f64 * dt).collect();
        let values = taus.iter().map(|&t| self.acf_at(t)).collect();
        PulseAcf { taus, values }
    }

    /// Zero-phase time pulse `p(t)` (units 1/√s) at `t = n·T/K` over one period.
    pub fn time_pulse(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.half_period_samples();
        let dt = self.symbol_period / self.oversampling as f64;
        let scale = 1.0 / self.symbol_period.sqrt();
        let taus: Vec<f64> = (-h..h).map(|n| n as f64 * dt).collect();
        let p = (-h..h).map(|n| self.normalized_tap(n) * scale).collect();
        (taus, p)
    }

    fn normalized_tap(&self, n: isize) -> f64 {
        let s = self.span as f64;
        let x = n as f64 / self.oversampling as f64;
        let g = self.normalized_spectrum();
        let tail: f64 =
            g.iter().enumerate().skip(1).map(|(i, gi)| 2.0 * gi.sqrt() * (2.0 * PI * i as f64 * x / s).cos()).sum();
        (g[0].sqrt() + tail) / s
    }

    /// Dimensionless taps `h[m] = √T · p(m·T/K)`, `m = -(S·K/2) .. S·K/2`.
    /// For a Nyquist pulse `Σ h² = K`, so shaped i.i.d. unit-power symbols
    /// have unit average sample power.
    pub fn taps(&self) -> Vec<f64> {
        let h = self.half_period_samples();
        (-h..h).map(|n| self.normalized_tap(n)).collect()
    }

    /// Upsamples `symbols` by `K` and circularly filters with the pulse,
    /// producing `N·K` samples at rate [`PulseSpec::sample_rate`].
    pub fn shape(&self, symbols: &[Complex64]) -> Result<Vec<Complex64>> {
        if symbols.is_empty() {
            return Err(Error::invalid("cannot shape an empty symbol block"));
        }
        let k = self.oversampling;
        let len = symbols.len() * k;
        let mut u = vec![Complex64::new(0.0, 0.0); len];
        for (i, s) in symbols.iter().enumerate() {
            u[i * k] = *s;
        }
        let mut h = vec![Complex64::new(0.0, 0.0); len];
        let half = self.half_period_samples();
        for (m, tap) in (-half..half).zip(self.taps()) {
            h[m.rem_euclid(len as isize) as usize] += tap;
        }
        fft_in_place(&mut u, false);
        fft_in_place(&mut h, false);
        u.iter_mut().zip(&h).for_each(|(a, b)| *a *= b);
        fft_in_place(&mut u, true);
        let scale = 1.0 / len as f64;
        u.iter_mut().for_each(|v| *v *= scale);
        Ok(u)
    }

    /// Weighted membership of each one-sided bin in the Nyquist residue
    /// classes `r = 0..=S/2`: entry `(r, i, w)` means `G_i` appears `w` times
    /// in the fold through class `r`.
    pub(crate) fn nyquist_classes(span: usize, bins: usize) -> Vec<Vec<(usize, f64)>> {
        // Classes r and S−r are mirror images of each other under G(−f) =
        // G(f), so only r ≤ S/2 is kept.
        let mut classes = vec![Vec::new(); span / 2 + 1];
        for i in -(bins as isize)..=bins as isize {
            let r = i.rem_euclid(span as isize) as usize;
            if r > span / 2 {
                continue;
            }
            let j = i.unsigned_abs();
            match classes[r].iter_mut().find(|(k, _)| *k == j) {
                Some((_, w)) => *w += 1.0,
                None => classes[r].push((j, 1.0)),
            }
        }
        classes
    }

    /// `max_r |Σ_m G(f_r − m/T) − T| / T` over the residue classes.
    pub fn folded_spectrum_defect(&self) -> f64 {
        let g = self.normalized_spectrum();
        Self::nyquist_classes(self.span, g.len() - 1)
            .iter()
            .map(|class| (class.iter().map(|&(i, w)| w * g[i]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_{1≤k≤min(8, S−1)} |g(kT)| / g(0)`.
    pub fn nyquist_defect(&self) -> f64 {
        let g0 = self.acf_at(0.0);
        (1..=8.min(self.span - 1)).map(|k| (self.acf_at(k as f64 * self.symbol_period) / g0).abs()).fold(0.0, f64::max)
    }

    fn region_samples(&self, region: &DelayRegion) -> Result<Vec<f64>> {
        let t = self.symbol_period;
        let half = self.span as f64 * t / 2.0;
        if region.end > half * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "region end {:.4e} s exceeds half the pulse period {:.4e} s",
                region.end, half
            )));
        }
        let dt = t / self.oversampling as f64;
        let lo = (region.start / dt - 1e-9).ceil().max(0.0) as usize;
        let hi = (region.end / dt + 1e-9).floor() as usize;
        if hi < lo {
            return Err(Error::invalid("delay region contains no grid samples"));
        }
        Ok((lo..=hi).map(|n| n as f64 * dt).collect())
    }

    /// `Σ_{τ_n ∈ region} g(τ_n)² / g(0)²` on the `T/K` grid.
    pub fn region_islr(&self, region: &DelayRegion) -> Result<f64> {
        let g0 = self.acf_at(0.0);
        if g0 <= 0.0 {
            return Err(Error::invalid("pulse has zero energy"));
        }
        let taus = self.region_samples(region)?;
        Ok(taus.iter().map(|&t| self.acf_at(t).powi(2)).sum::<f64>() / (g0 * g0))
    }

    pub fn region_islr_db(&self, region: &DelayRegion) -> Result<f64> {
        Ok(10.0 * self.region_islr(region)?.log10())
    }
}

/// Sampled pulse ACF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseAcf {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

/// Raised-cosine spectrum value `G(f)` (seconds) at `f` (Hz).
pub fn raised_cosine_spectrum(f: f64, symbol_period: f64, rolloff: f64) -> f64 {
    let t = symbol_period;
    let af = (f * t).abs();
    let lo = (1.0 - rolloff) / 2.0;
    let hi = (1.0 + rolloff) / 2.0;
    let eps = 1e-12;
    if rolloff == 0.0 {
        return if af < lo - eps {
            t
        } else if (af - lo).abs() <= eps {
            t / 2.0
        } else {
            0.0
        };
    }
    if af <= lo + eps {
        t
    } else if af > hi - eps {
        0.0
    } else {
        t / 2.0 * (1.0 + (PI / rolloff * (af - lo)).cos())
    }
}

/// Root-raised-cosine pulse: `G` is the raised-cosine spectrum, `P = √G`.
pub fn rrc_pulse(symbol_period: f64, rolloff: f64, oversampling: usize, span: usize) -> Result<PulseSpec> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::invalid(format!("roll-off must lie in [0, 1], got {rolloff}")));
    }
    if span < 8 || !span.is_multiple_of(2) {
        return Err(Error::invalid(format!("span must be an even number ≥ 8, got {span}")));
    }
    let df = 1.0 / (span as f64 * symbol_period);
    let spectrum = (0..=support_bins(span, rolloff))
        .map(|i| raised_cosine_spectrum(i as f64 * df, symbol_period, rolloff))
        .collect();
    PulseSpec::from_spectrum(symbol_period, rolloff, oversampling, span, spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const T: f64 = 25e-9;

    #[test]
    fn brick_wall_first_sidelobe() {
        let p = rrc_pulse(T, 0.0, 16, 64).unwrap();
        // The brick-wall ACF is sinc(τ/T); locate its first sidelobe finely.
        let peak = (1000..2000).map(|i| p.acf_at(i as f64 * 1e-3 * T).abs()).fold(0.0, f64::max);
        let db = 20.0 * peak.log10();
        assert!((db + 13.26).abs() < 0.05, "first sidelobe {db} dB");
        for x in [0.3, 0.7, 1.6, 2.5] {
            let sinc = (PI * x).sin() / (PI * x);
            assert!((p.acf_at(x * T) - sinc).abs() < 0.02);
        }
    }

    #[test]
    fn nyquist_zeros_for_any_rolloff() {
        for beta in [0.0, 0.1, 0.25, 0.35, 0.5, 0.8, 1.0] {
            let p = rrc_pulse(T, beta, 16, 16).unwrap();
            assert!(p.nyquist_defect() < 1e-12, "beta {beta}");
            assert!(p.folded_spectrum_defect() < 1e-12, "beta {beta}");
            assert_abs_diff_eq!(p.acf_at(0.0), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_rolloff_decays_faster() {
        let region = DelayRegion::in_symbols(1.5, 4.0, T).unwrap();
        let a = rrc_pulse(T, 1.0, 16, 16).unwrap().region_islr(&region).unwrap();
        let b = rrc_pulse(T, 0.0, 16, 16).unwrap().region_islr(&region).unwrap();
        assert!(a < b);
    }

    #[test]
    fn acf_is_even_and_integrates_to_dc() {
        let p = rrc_pulse(T, 0.35, 16, 16).unwrap();
        let acf = p.acf();
        let n = acf.values.len();
        for i in 0..n {
            assert_abs_diff_eq!(acf.values[i], acf.values[n - 1 - i], epsilon = 1e-12);
        }
        // One full period of samples, excluding the duplicated endpoint.
        let dt = T / 16.0;
        let integral: f64 = acf.values[..n - 1].iter().sum::<f64>() * dt;
        assert_abs_diff_eq!(integral / p.spectrum()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn taps_have_unit_sample_power() {
        for beta in [0.0, 0.35, 1.0] {
            let p = rrc_pulse(T, beta, 8, 16).unwrap();
            let e: f64 = p.taps().iter().map(|h| h * h).sum();
            assert_abs_diff_eq!(e, 8.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn shaping_an_impulse_reproduces_taps() {
        let p = rrc_pulse(T, 0.35, 4, 8).unwrap();
        let mut s = vec![Complex64::new(0.0, 0.0); 16];
        s[0] = Complex64::new(1.0, 0.0);
        let x = p.shape(&s).unwrap();
        let taps = p.taps();
        let half = taps.len() as isize / 2;
        for (m, tap) in (-half..half).zip(&taps) {
            let v = x[m.rem_euclid(x.len() as isize) as usize];
            assert_abs_diff_eq!(v.re, *tap, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shaped_samples_at_symbol_instants_after_matched_filter() {
        // Matched filtering a shaped block returns the symbols at t = kT
        // because g is Nyquist. A block of exactly one pulse period keeps the
        // circular correlation exact.
        let p = rrc_pulse(T, 0.35, 4, 8).unwrap();
        let s: Vec<Complex64> = (0..8).map(|i| Complex64::new((i % 3) as f64 - 1.0, (i % 2) as f64)).collect();
        let x = p.shape(&s).unwrap();
        let k = p.oversampling();
        let taps = p.taps();
        let half = taps.len() as isize / 2;
        for (i, si) in s.iter().enumerate() {
            let n = (i * k) as isize;
            let z: Complex64 = (-half..half)
                .zip(&taps)
                .map(|(m, h)| x[(n + m).rem_euclid(x.len() as isize) as usize] * *h)
                .sum::<Complex64>()
                / k as f64;
            assert!((z - si).norm() < 1e-9, "symbol {i}: {z} vs {si}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(rrc_pulse(T, 1.5, 16, 16).is_err());
        assert!(rrc_pulse(T, 0.3, 2, 16).is_err());
        assert!(rrc_pulse(T, 0.3, 16, 6).is_err());
        assert!(PulseSpec::from_spectrum(T, 0.35, 16, 16, vec![T; 3]).is_err());
        assert!(DelayRegion::new(2.0, 1.0).is_err());
        let p = rrc_pulse(T, 0.35, 16, 16).unwrap();
        assert!(p.region_islr(&DelayRegion::in_symbols(1.0, 9.0, T).unwrap()).is_err());
    }
}
