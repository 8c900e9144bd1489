//! Probabilistic constellation shaping under a kurtosis cap.
//!
//! With point positions fixed and power pinned to one, the kurtosis is the
//! linear functional `Σ p_i |x_i|⁴`, so rate maximization becomes a
//! Blahut–Arimoto problem with two linear side constraints. Each iteration
//! computes the divergences `D_i` at the current law and sets
//!
//! ```text
//! p_i ← p_i · exp(D_i − λ₁|x_i|² − λ₂|x_i|⁴) / Z
//! ```
//!
//! with `λ₁` (any sign) chosen so that the power is exactly one and `λ₂ ≥ 0`
//! chosen so that the kurtosis cap holds, zero when the cap is slack. Once an
//! iterate is feasible this is the exact maximizer of the usual BA surrogate,
//! so the mutual information never decreases from there on.

mod mi;

pub use mi::{gauss_hermite, mutual_information, AwgnChannel, MiMethod, DEFAULT_QUADRATURE_ORDER};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use mi::{LikelihoodTable, NoiseRule};

#[derive(Debug, Clone, PartialEq)]
pub struct ShapingProblem {
    /// Point positions; must have unit power under uniform probabilities
    /// unless the caller has normalized them otherwise.
    pub base: Constellation,
    pub kurtosis_cap: f64,
    pub channel: AwgnChannel,
    /// Stop when one iteration gains less than this many bits.
    pub tol: f64,
    pub max_iters: usize,
    pub quadrature_order: usize,
}

impl ShapingProblem {
    pub fn new(base: Constellation, kurtosis_cap: f64, channel: AwgnChannel) -> Self {
        ShapingProblem {
            base,
            kurtosis_cap,
            channel,
            tol: 1e-9,
            max_iters: 3000,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapingResult {
    pub probs: Vec<f64>,
    pub mi_bits: f64,
    pub achieved_kurtosis: f64,
    pub achieved_power: f64,
    /// Cap actually enforced; differs from the request when it was raised to
    /// the smallest kurtosis the alphabet can reach.
    pub effective_cap: f64,
    pub cap_clamped: bool,
    pub lambda_power: f64,
    pub lambda_kurt: f64,
    pub iterations: usize,
    pub converged: bool,
    /// MI after each accepted iteration, starting at the first feasible law.
    pub mi_trace: Vec<f64>,
}

impl ShapingResult {
    /// The shaped distribution on the base points.
    pub fn constellation(&self, base: &Constellation) -> Result<Constellation> {
        Ok(base.with_probs(self.probs.clone())?.with_label(format!("{}-PCS", base.label())))
    }
}

/// Smallest kurtosis `Σ p|x|⁴` reachable with `Σ p|x|² = 1`. The optimum of
/// this two-constraint linear program sits on at most two modulus levels.
pub fn min_kurtosis(points: &[num_complex::Complex64]) -> Result<f64> {
    let a: Vec<f64> = points.iter().map(|x| x.norm_sqr()).collect();
    let mut best = f64::INFINITY;
    for &ai in &a {
        if (ai - 1.0).abs() < 1e-12 {
            best = best.min(ai * ai);
        }
        if ai >= 1.0 {
            continue;
        }
        for &aj in &a {
            if aj > 1.0 {
                let w = (aj - 1.0) / (aj - ai);
                best = best.min(w * ai * ai + (1.0 - w) * aj * aj);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Infeasible("no probability law on these points has unit power".into()))
    }
}

/// Margin added to the minimum reachable kurtosis when a cap is clamped, so
/// the feasible set keeps an interior.
pub const CLAMP_MARGIN: f64 = 1e-4;

struct Tilt<'a> {
    log_base: Vec<f64>,
    a: &'a [f64],
    b: &'a [f64],
}

impl Tilt<'_> {
    /// Tilted law for multipliers `(l1, l2)`.
    fn law(&self, l1: f64, l2: f64) -> Vec<f64> {
        let e: Vec<f64> = self
            .log_base
            .iter()
            .zip(self.a.iter().zip(self.b))
            .map(|(lp, (a, b))| if lp.is_finite() { lp - l1 * a - l2 * b } else { f64::NEG_INFINITY })
            .collect();
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = e.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    fn moment(p: &[f64], f: &[f64]) -> f64 {
        p.iter().zip(f).map(|(p, f)| p * f).sum()
    }

    /// `λ₁` giving unit power for fixed `λ₂`; power is decreasing in `λ₁`.
    fn power_multiplier(&self, l2: f64) -> Result<f64> {
        let power = |l1: f64| Self::moment(&self.law(l1, l2), self.a);
        let (mut lo, mut hi) = (-1e3, 1e3);
        while power(lo) < 1.0 {
            lo *= 2.0;
            if lo < -1e300 {
                return Err(Error::Infeasible("unit power is unreachable on the current support".into()));
            }
        }
        while power(hi) > 1.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Infeasible("unit power is unreachable on the current support".into()));
            }
        }
        while hi - lo > 1e-13 * lo.abs().max(hi.abs()).max(1.0) {
            let mid = 0.5 * (lo + hi);
            if power(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Multipliers meeting the power equality and the kurtosis cap.
    fn solve(&self, cap: f64) -> Result<(f64, f64, Vec<f64>)> {
        let kurt = |l2: f64| -> Result<(f64, f64, Vec<f64>)> {
            let l1 = self.power_multiplier(l2)?;
            let p = self.law(l1, l2);
            Ok((l1, Self::moment(&p, self.b), p))
        };
        let (l1, k0, p0) = kurt(0.0)?;
        if k0 <= cap {
            return Ok((l1, 0.0, p0));
        }
        let mut hi = 1.0;
        let mut best = kurt(hi)?;
        while best.1 > cap {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Infeasible(format!("kurtosis cap {cap} is unreachable from the current support")));
            }
            best = kurt(hi)?;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            let r = kurt(mid)?;
            if r.1 > cap {
                lo = mid;
            } else {
                hi = mid;
                best = r;
            }
        }
        Ok((best.0, hi, best.2))
    }
}

fn mi_nats(p: &[f64], d: &[f64]) -> f64 {
    p.iter().zip(d).map(|(p, d)| p * d).sum()
}

/// Rate-maximizing point probabilities under `Σp|x|² = 1`, `Σp|x|⁴ ≤ κ`.
pub fn shape(problem: &ShapingProblem) -> Result<ShapingResult> {
    let cap = problem.kurtosis_cap;
    if !cap.is_finite() || cap < 1.0 {
        return Err(Error::Infeasible(format!("kurtosis below 1 infeasible (requested {cap})")));
    }
    if problem.max_iters == 0 || !(problem.tol > 0.0) {
        return Err(Error::invalid("shaping needs max_iters ≥ 1 and tol > 0"));
    }
    let points = problem.base.points();
    let kmin = min_kurtosis(points)?;
    let (effective_cap, cap_clamped) =
        if cap < kmin + CLAMP_MARGIN { (kmin + CLAMP_MARGIN, true) } else { (cap, false) };
    let a: Vec<f64> = points.iter().map(|x| x.norm_sqr()).collect();
    let b: Vec<f64> = a.iter().map(|v| v * v).collect();
    let rule = NoiseRule::quadrature(&problem.channel, problem.quadrature_order)?;
    let table = LikelihoodTable::new(points, &problem.channel, &rule);
    let ln2 = std::f64::consts::LN_2;

    let n = points.len();
    let mut p = vec![1.0 / n as f64; n];
    let feasible = |p: &[f64]| (Tilt::moment(p, &a) - 1.0).abs() <= 1e-9 && Tilt::moment(p, &b) <= effective_cap + 1e-9;
    let mut d = table.divergences(&p);
    let mut mi = mi_nats(&p, &d);
    let mut trace = Vec::new();
    if feasible(&p) {
        trace.push(mi / ln2);
    }
    let (mut l1, mut l2) = (0.0, 0.0);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < problem.max_iters {
        iterations += 1;
        let tilt = Tilt {
            log_base: p.iter().zip(&d).map(|(p, d)| if *p > 0.0 { p.ln() + d } else { f64::NEG_INFINITY }).collect(),
            a: &a,
            b: &b,
        };
        let (nl1, nl2, cand) = tilt.solve(effective_cap)?;
        let cd = table.divergences(&cand);
        let cmi = mi_nats(&cand, &cd);
        if trace.is_empty() {
            // First feasible iterate.
            p = cand;
            d = cd;
            mi = cmi;
            l1 = nl1;
            l2 = nl2;
            trace.push(mi / ln2);
            continue;
        }
        let (np, nd, nmi) = if cmi >= mi {
            (cand, cd, cmi)
        } else {
            // Guard against rounding in the multiplier search: fall back to
            // the best point on the segment towards the candidate, which
            // stays feasible because both constraints are linear.
            let mut t = 0.5;
            let mut found = None;
            while t > 1e-6 {
                let mix: Vec<f64> = p.iter().zip(&cand).map(|(x, y)| (1.0 - t) * x + t * y).collect();
                let md = table.divergences(&mix);
                let mm = mi_nats(&mix, &md);
                if mm >= mi {
                    found = Some((mix, md, mm));
                    break;
                }
                t *= 0.5;
            }
            match found {
                Some(f) => f,
                None => {
                    converged = true;
                    break;
                }
            }
        };
        let gain = (nmi - mi) / ln2;
        p = np;
        d = nd;
        mi = nmi;
        l1 = nl1;
        l2 = nl2;
        trace.push(mi / ln2);
        if gain < problem.tol {
            converged = true;
            break;
        }
    }

    Ok(ShapingResult {
        achieved_kurtosis: Tilt::moment(&p, &b) / Tilt::moment(&p, &a).powi(2),
        achieved_power: Tilt::moment(&p, &a),
        probs: p,
        mi_bits: mi / ln2,
        effective_cap,
        cap_clamped,
        lambda_power: l1,
        lambda_kurt: l2,
        iterations,
        converged,
        mi_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub kappa_target: f64,
    pub kappa_effective: f64,
    pub kappa_achieved: f64,
    pub mi_bits: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cap_clamped: bool,
}

/// One shaped law per kurtosis cap; the sensing proxy of each point is its
/// achieved kurtosis.
pub fn tradeoff_frontier(
    base: &Constellation,
    channel: &AwgnChannel,
    kappas: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<(FrontierPoint, ShapingResult)>> {
    if kappas.is_empty() {
        return Err(Error::invalid("empty kurtosis list"));
    }
    if kappas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("kurtosis list must be sorted ascending"));
    }
    let results: Vec<Result<ShapingResult>> = kappas
        .par_iter()
        .map(|&k| {
            let mut pb = ShapingProblem::new(base.clone(), k, *channel);
            pb.tol = tol;
            pb.max_iters = max_iters;
            shape(&pb)
        })
        .collect();
    kappas
        .iter()
        .zip(results)
        .map(|(&k, r)| {
            let r = r?;
            Ok((
                FrontierPoint {
                    kappa_target: k,
                    kappa_effective: r.effective_cap,
                    kappa_achieved: r.achieved_kurtosis,
                    mi_bits: r.mi_bits,
                    iterations: r.iterations,
                    converged: r.converged,
                    cap_clamped: r.cap_clamped,
                },
                r,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qam64() -> Constellation {
        Constellation::standard("64QAM", None).unwrap()
    }

    #[test]
    fn qam64_minimum_kurtosis_uses_the_rings_around_unit_power() {
        // Closed form for levels 34/42 and 50/42 mixed to unit power.
        let (lo, hi) = (34.0 / 42.0, 50.0f64 / 42.0);
        let w = (hi - 1.0) / (hi - lo);
        let expect = w * lo * lo + (1.0 - w) * hi * hi;
        assert_abs_diff_eq!(min_kurtosis(qam64().points()).unwrap(), expect, epsilon = 1e-12);
        let psk = Constellation::standard("8PSK", None).unwrap();
        assert_abs_diff_eq!(min_kurtosis(psk.points()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn qpsk_is_a_fixed_point() {
        let q = Constellation::standard("QPSK", None).unwrap();
        let r = shape(&ShapingProblem::new(q, 1.0, AwgnChannel::from_snr_db(5.0).unwrap())).unwrap();
        for p in &r.probs {
            assert_abs_diff_eq!(*p, 0.25, epsilon = 1e-12);
        }
        assert!(r.converged);
    }

    #[test]
    fn constraints_hold_and_mi_is_monotone() {
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let mut pb = ShapingProblem::new(Constellation::standard("16QAM", None).unwrap(), 1.15, ch);
        pb.tol = 1e-10;
        let r = shape(&pb).unwrap();
        assert!(r.converged);
        assert!(r.achieved_kurtosis <= 1.15 + 1e-6);
        assert_abs_diff_eq!(r.achieved_power, 1.0, epsilon = 1e-6);
        assert!(r.lambda_kurt > 0.0);
        for w in r.mi_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn slack_cap_has_zero_kurtosis_multiplier() {
        let ch = AwgnChannel::from_snr_db(30.0).unwrap();
        let r = shape(&ShapingProblem::new(Constellation::standard("16QAM", None).unwrap(), 1.9, ch)).unwrap();
        assert_eq!(r.lambda_kurt, 0.0);
        assert!(!r.cap_clamped);
    }

    #[test]
    fn symmetric_start_keeps_orbit_symmetry() {
        let base = qam64();
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let mut pb = ShapingProblem::new(base.clone(), 1.2, ch);
        pb.max_iters = 60;
        let r = shape(&pb).unwrap();
        let orbits = base.symmetry_orbits(1e-9);
        for i in 0..base.len() {
            for j in 0..base.len() {
                if orbits[i] == orbits[j] {
                    assert!((r.probs[i] - r.probs[j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn caps_below_one_are_infeasible() {
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let e = shape(&ShapingProblem::new(qam64(), 0.5, ch)).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
        assert!(e.to_string().contains("kurtosis below 1 infeasible"));
    }

    #[test]
    fn frontier_is_monotone() {
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let f = tradeoff_frontier(&qam64(), &ch, &[1.0, 1.2, 1.38], 1e-7, 3000).unwrap();
        assert!(f[0].0.cap_clamped);
        for w in f.windows(2) {
            assert!(w[1].0.mi_bits >= w[0].0.mi_bits - 1e-6);
        }
        assert!(tradeoff_frontier(&qam64(), &ch, &[1.2, 1.0], 1e-7, 10).is_err());
    }
}
