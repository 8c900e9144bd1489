//! Discrete complex constellations with point probabilities.
//!
//! A [`Constellation`] pairs a finite alphabet with a probability vector. The
//! standard PSK and square QAM alphabets are built by [`Constellation::standard`]
//! and are always power-normalized under their probability vector.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;
// Points closer than this are treated as the same point.
const DISTINCT_TOL: f64 = 1e-12;

/// Finite complex alphabet with a probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstellationRepr", into = "ConstellationRepr")]
pub struct Constellation {
    label: String,
    points: Vec<Complex64>,
    probs: Vec<f64>,
}

/// Moments of a constellation under its probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// E|x|^2
    pub power: f64,
    /// E|x|^4
    pub fourth_moment: f64,
    /// E|x|^4 / (E|x|^2)^2
    pub kurtosis: f64,
    pub entropy_bits: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstellationRepr {
    label: String,
    points: Vec<[f64; 2]>,
    probs: Vec<f64>,
}

impl TryFrom<ConstellationRepr> for Constellation {
    type Error = Error;

    fn try_from(r: ConstellationRepr) -> Result<Self> {
        let points = r.points.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        Constellation::new(r.label, points, r.probs)
    }
}

impl From<Constellation> for ConstellationRepr {
    fn from(c: Constellation) -> Self {
        ConstellationRepr { label: c.label, points: c.points.iter().map(|p| [p.re, p.im]).collect(), probs: c.probs }
    }
}

enum Family {
    Psk(usize),
    Qam(usize),
}

fn parse_label(label: &str) -> Option<Family> {
    let key: String = label.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).collect::<String>().to_ascii_uppercase();
    match key.as_str() {
        "BPSK" => return Some(Family::Psk(2)),
        "QPSK" => return Some(Family::Psk(4)),
        _ => {}
    }
    let order = |s: &str| s.parse::<usize>().ok();
    if let Some(m) = key.strip_suffix("PSK").or_else(|| key.strip_prefix("PSK")) {
        return order(m).filter(|&m| m >= 2).map(Family::Psk);
    }
    if let Some(m) = key.strip_suffix("QAM").or_else(|| key.strip_prefix("QAM")) {
        return order(m)
            .filter(|&m| {
                let side = (m as f64).sqrt().round() as usize;
                m >= 4 && side * side == m && side.is_multiple_of(2)
            })
            .map(Family::Qam);
    }
    None
}

fn check_probs(probs: &[f64], n: usize) -> Result<()> {
    if probs.len() != n {
        return Err(Error::invalid(format!(
            "probability vector has length {}, constellation has {n} points",
            probs.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::invalid(format!("invalid probability {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::invalid(format!("probabilities sum to {sum}, expected 1")));
    }
    Ok(())
}

impl Constellation {
    /// Builds a constellation after validating its invariants. Points are used
    /// as given (no power normalization).
    pub fn new(label: impl Into<String>, points: Vec<Complex64>, probs: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a constellation needs at least two points"));
        }
        check_probs(&probs, points.len())?;
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::invalid("constellation points must be finite"));
        }
        for (i, a) in points.iter().enumerate() {
            if points[i + 1..].iter().any(|b| (a - b).norm() <= DISTINCT_TOL) {
                return Err(Error::invalid(format!("duplicate constellation point {a}")));
            }
        }
        Ok(Constellation { label: label.into(), points, probs })
    }

    /// Standard alphabet by label: `BPSK`, `QPSK`, `<M>PSK`, `<M>QAM` (square
    /// QAM with even side). Probabilities default to uniform; the result is
    /// scaled to unit power under the chosen probabilities.
    ///
    /// QAM points are the odd-integer grid `{±1, ±3, ...}²` in row-major
    /// order (imaginary part outer, real part inner, both ascending).
    pub fn standard(label: &str, probs: Option<Vec<f64>>) -> Result<Self> {
        let family =
            parse_label(label).ok_or_else(|| Error::invalid(format!("unknown constellation label '{label}'")))?;
        let points: Vec<Complex64> = match family {
            Family::Psk(m) => {
                // QPSK sits on the diagonals so that it coincides with 4-QAM.
                let offset = if m == 4 { std::f64::consts::FRAC_PI_4 } else { 0.0 };
                (0..m)
                    .map(|k| Complex64::from_polar(1.0, offset + 2.0 * std::f64::consts::PI * k as f64 / m as f64))
                    .collect()
            }
            Family::Qam(m) => {
                let side = (m as f64).sqrt().round() as i64;
                let levels: Vec<f64> = (0..side).map(|k| (2 * k - (side - 1)) as f64).collect();
                levels.iter().flat_map(|&q| levels.iter().map(move |&i| Complex64::new(i, q))).collect()
            }
        };
        let n = points.len();
        let probs = probs.unwrap_or_else(|| vec![1.0 / n as f64; n]);
        let canonical = match family {
            Family::Psk(2) => "BPSK".to_string(),
            Family::Psk(4) => "QPSK".to_string(),
            Family::Psk(m) => format!("{m}PSK"),
            Family::Qam(m) => format!("{m}QAM"),
        };
        Constellation::new(canonical, points, probs)?.normalize_power()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points with a new probability vector (not renormalized in power).
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs, self.points.len())?;
        Ok(Constellation { label: self.label.clone(), points: self.points.clone(), probs })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Scales the points so that `Σ p|x|² = 1`.
    pub fn normalize_power(mut self) -> Result<Self> {
        let power = self.power();
        if !(power > 0.0) {
            return Err(Error::invalid("cannot normalize a zero-power constellation"));
        }
        let scale = power.sqrt().recip();
        self.points.iter_mut().for_each(|p| *p *= scale);
        Ok(self)
    }

    pub fn power(&self) -> f64 {
        self.weighted(|x| x.norm_sqr())
    }

    fn weighted(&self, f: impl Fn(&Complex64) -> f64) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| p * f(x)).sum()
    }

    pub fn moments(&self) -> MomentReport {
        let power = self.power();
        let fourth_moment = self.weighted(|x| x.norm_sqr() * x.norm_sqr());
        let entropy_bits = -self.probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>();
        MomentReport {
            power,
            fourth_moment,
            kurtosis: fourth_moment / (power * power),
            entropy_bits: entropy_bits.max(0.0),
        }
    }

    pub fn kurtosis(&self) -> f64 {
        self.moments().kurtosis
    }

    fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // The last non-zero entry absorbs rounding so every draw lands somewhere.
        if let Some(last) = self.probs.iter().rposition(|&p| p > 0.0) {
            cdf[last..].iter_mut().for_each(|c| *c = f64::INFINITY);
        }
        cdf
    }

    /// Draws `out.len()` i.i.d. symbols by inverse CDF.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64]) {
        let cdf = self.cdf();
        for o in out.iter_mut() {
            let u: f64 = rng.random();
            let idx = cdf.partition_point(|&c| c <= u);
            *o = self.points[idx];
        }
    }

    /// `n` i.i.d. symbols, reproducible for a fixed seed.
    pub fn sample_block(&self, n: usize, seed: u64) -> Result<Vec<Complex64>> {
        if n == 0 {
            return Err(Error::invalid("block length must be at least 1"));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        self.sample_into(&mut crate::seed::rng(seed), &mut out);
        Ok(out)
    }

    /// Distinct values of |x|² (ascending) and, for each point, the index of its
    /// modulus class. Moduli within `tol` are merged.
    pub fn modulus_classes(&self, tol: f64) -> (Vec<f64>, Vec<usize>) {
        let mut levels: Vec<f64> = Vec::new();
        for p in &self.points {
            let m = p.norm_sqr();
            if !levels.iter().any(|l| (l - m).abs() <= tol) {
                levels.push(m);
            }
        }
        levels.sort_by(|a, b| a.total_cmp(b));
        let class = self
            .points
            .iter()
            .map(|p| {
                let m = p.norm_sqr();
                levels.iter().position(|l| (l - m).abs() <= tol).unwrap_or(0)
            })
            .collect();
        (levels, class)
    }

    /// Orbits of the points under the symmetries of the alphabet generated by
    /// quarter-turn rotation and complex conjugation (only those symmetries
    /// that map the alphabet onto itself are used).
    pub fn symmetry_orbits(&self, tol: f64) -> Vec<usize> {
        let find = |z: Complex64| self.points.iter().position(|p| (p - z).norm() <= tol);
        let maps: [fn(Complex64) -> Complex64; 2] = [|z| z * Complex64::i(), |z| z.conj()];
        let usable: Vec<_> = maps.iter().filter(|f| self.points.iter().all(|&p| find(f(p)).is_some())).collect();
        let mut orbit = vec![usize::MAX; self.points.len()];
        let mut next = 0;
        for start in 0..self.points.len() {
            if orbit[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            orbit[start] = next;
            while let Some(i) = stack.pop() {
                for f in &usable {
                    if let Some(j) = find(f(self.points[i])) {
                        if orbit[j] == usize::MAX {
                            orbit[j] = next;
                            stack.push(j);
                        }
                    }
                }
            }
            next += 1;
        }
        orbit
    }
}
