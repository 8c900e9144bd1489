//! Data-independent precoding.
//!
//! The precoder is fixed before the data is drawn, so it minimizes the
//! ergodic error `E_S[f(W S)]` subject to `‖W‖_F² ≤ P`. The expectation is
//! replaced by an average over a frozen sample set (sample-average
//! approximation) and minimized by projected gradient descent with
//! backtracking. An optional communication-rate floor is handled with an
//! exterior quadratic penalty of increasing weight, followed by a final
//! repair step that mixes toward the capacity-achieving precoder until the
//! floor holds.
//!
//! The power constraint binds the precoder, so `tr(X Xᴴ) ≤ P·L` only holds
//! in expectation over the data.

use nalgebra::ComplexField;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{comm_rate, identity_precoder, link_capacity, sample_symbols, CMatrix, CommLink, ErrorMetric, TirModel};
use crate::error::{Error, Result};
use crate::metrics::SymbolSource;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipOptions {
    /// Size of the frozen sample set.
    pub saa_trials: usize,
    /// Gradient iterations per penalty round.
    pub max_iters: usize,
    /// Stop when an accepted step improves the objective by less than this
    /// relative amount.
    pub tol: f64,
    pub seed: u64,
    /// Starting point; defaults to the isotropic `√(P/n_tx)·I`.
    #[serde(skip)]
    pub init: Option<CMatrix>,
}

impl Default for DipOptions {
    fn default() -> Self {
        DipOptions { saa_trials: 200, max_iters: 500, tol: 1e-9, seed: 0, init: None }
    }
}

#[derive(Debug, Clone)]
pub struct DipResult {
    pub w: CMatrix,
    /// Sample-average error of `w` on the frozen set.
    pub saa_objective: f64,
    /// Link rate of `w`, when a link was given.
    pub rate: Option<f64>,
    /// Sample-average error after each accepted step. Non-increasing when no
    /// rate floor is active.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub penalty_rounds: usize,
    pub converged: bool,
}

struct Saa<'a> {
    grams: Vec<CMatrix>,
    model: &'a TirModel,
    metric: ErrorMetric,
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn inverse_pd(m: CMatrix) -> Option<CMatrix> {
    let inv = hermitize(m).cholesky()?.inverse();
    inv.iter().all(|z| z.is_finite()).then_some(inv)
}

impl Saa<'_> {
    /// Per-sample value and `∂f/∂W̄`; `None` where the block is singular.
    fn sample(&self, w: &CMatrix, a: &CMatrix, want_grad: bool) -> Option<(f64, Option<CMatrix>)> {
        let m = w * a * w.adjoint();
        let n_rx = self.model.n_rx as f64;
        let s2 = self.model.noise_var;
        let (inv, scale) = match self.metric {
            ErrorMetric::Lse => (inverse_pd(m)?, s2 * n_rx),
            ErrorMetric::Lmmse => {
                let g = self.model.prior_var?;
                let n = CMatrix::identity(m.nrows(), m.ncols()) * Complex64::new(1.0 / g, 0.0)
                    + m * Complex64::new(1.0 / s2, 0.0);
                (inverse_pd(n)?, n_rx)
            }
        };
        let value = scale * inv.trace().re;
        if !value.is_finite() {
            return None;
        }
        let grad = want_grad.then(|| {
            let gscale = match self.metric {
                ErrorMetric::Lse => -s2 * n_rx,
                ErrorMetric::Lmmse => -n_rx / s2,
            };
            (&inv * &inv) * w * a * Complex64::new(gscale, 0.0)
        });
        Some((value, grad))
    }

    fn value(&self, w: &CMatrix) -> f64 {
        let vals: Option<Vec<f64>> = self.grams.par_iter().map(|a| self.sample(w, a, false).map(|(v, _)| v)).collect();
        vals.map_or(f64::INFINITY, |v| v.iter().sum::<f64>() / v.len() as f64)
    }

    fn value_grad(&self, w: &CMatrix) -> Option<(f64, CMatrix)> {
        let n = self.grams.len() as f64;
        let parts: Option<Vec<(f64, CMatrix)>> = self
            .grams
            .par_iter()
            .map(|a| self.sample(w, a, true).map(|(v, g)| (v, g.expect("gradient requested"))))
            .collect();
        let parts = parts?;
        let mut grad = CMatrix::zeros(w.nrows(), w.ncols());
        let mut value = 0.0;
        for (v, g) in parts {
            value += v;
            grad += g;
        }
        Some((value / n, grad * Complex64::new(1.0 / n, 0.0)))
    }
}

struct Penalty<'a> {
    comm: &'a CommLink,
    rho: f64,
}

impl Penalty<'_> {
    fn shortfall(&self, w: &CMatrix) -> f64 {
        (self.comm.rate_floor - comm_rate(w, self.comm).unwrap_or(0.0)).max(0.0)
    }

    fn value(&self, w: &CMatrix) -> f64 {
        self.rho * self.shortfall(w).powi(2)
    }

    fn grad(&self, w: &CMatrix) -> CMatrix {
        let d = self.shortfall(w);
        if d == 0.0 {
            return CMatrix::zeros(w.nrows(), w.ncols());
        }
        let h = &self.comm.h;
        let hw = h * w;
        let b = CMatrix::identity(h.nrows(), h.nrows()) * Complex64::new(self.comm.noise_var, 0.0) + &hw * hw.adjoint();
        let Some(b_inv) = inverse_pd(b) else {
            return CMatrix::zeros(w.nrows(), w.ncols());
        };
        let rate_grad = h.adjoint() * b_inv * hw * Complex64::new(1.0 / std::f64::consts::LN_2, 0.0);
        rate_grad * Complex64::new(-2.0 * self.rho * d, 0.0)
    }
}

fn project(w: CMatrix, power: f64) -> CMatrix {
    let e = w.norm_squared();
    if e > power {
        w * Complex64::new((power / e).sqrt(), 0.0)
    } else {
        w
    }
}

fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum::<f64>() * 2.0
}

struct Descent {
    w: CMatrix,
    iterations: usize,
    converged: bool,
}

/// Projected gradient with backtracking on `f + penalty`; appends the
/// sample-average error after each accepted step to `trace`.
fn descend(
    saa: &Saa,
    penalty: Option<&Penalty>,
    mut w: CMatrix,
    power: f64,
    opts: &DipOptions,
    trace: &mut Vec<f64>,
) -> Result<Descent> {
    let total = |f: f64, w: &CMatrix| f + penalty.map_or(0.0, |p| p.value(w));
    let mut step: Option<f64> = None;
    for it in 0..opts.max_iters {
        let (f, mut g) =
            saa.value_grad(&w).ok_or_else(|| Error::Singular("precoded blocks became rank deficient".into()))?;
        if let Some(p) = penalty {
            g += p.grad(&w);
        }
        let current = total(f, &w);
        let gnorm = g.norm();
        if gnorm == 0.0 {
            return Ok(Descent { w, iterations: it, converged: true });
        }
        let mut t = step.unwrap_or(0.1 * w.norm().max(1e-12) / gnorm);
        let mut accepted = None;
        for _ in 0..60 {
            let cand = project(&w - &g * Complex64::new(t, 0.0), power);
            let decrease = inner(&g, &(&w - &cand));
            if decrease <= 0.0 {
                break;
            }
            let fc = saa.value(&cand);
            let vc = total(fc, &cand);
            if vc <= current - 1e-4 * decrease {
                accepted = Some((cand, fc, vc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, vc)) = accepted else {
            return Ok(Descent { w, iterations: it, converged: true });
        };
        w = cand;
        trace.push(fc);
        step = Some(t * 2.0);
        if current - vc <= opts.tol * current.abs() {
            return Ok(Descent { w, iterations: it + 1, converged: true });
        }
    }
    Ok(Descent { w, iterations: opts.max_iters, converged: false })
}

/// Minimizes the sample-average ergodic error over fixed precoders with
/// `‖W‖_F² ≤ P`, optionally keeping the link rate at or above
/// `comm.rate_floor`.
pub fn dip_precoder(
    model: &TirModel,
    source: &SymbolSource,
    power: f64,
    metric: ErrorMetric,
    comm: Option<&CommLink>,
    opts: &DipOptions,
) -> Result<DipResult> {
    model.validate()?;
    if !(power > 0.0) {
        return Err(Error::invalid(format!("power must be positive, got {power}")));
    }
    if !(model.noise_var > 0.0) {
        return Err(Error::invalid("precoder design needs a positive noise variance"));
    }
    if metric == ErrorMetric::Lmmse && model.prior_var.is_none() {
        return Err(Error::invalid("LMMSE needs a prior variance"));
    }
    if opts.saa_trials < 2 {
        return Err(Error::invalid("need at least two sample-average trials"));
    }
    let n = model.n_tx;
    let mut capacity = None;
    if let Some(c) = comm {
        c.validate(n)?;
        let (cap, w_cap) = link_capacity(c, power)?;
        if c.rate_floor > cap {
            return Err(Error::RateInfeasible { requested: c.rate_floor, max_rate: cap });
        }
        capacity = Some(w_cap);
    }
    let w0 = match &opts.init {
        Some(w) if w.nrows() != n || w.ncols() != n => {
            return Err(Error::DimensionMismatch { expected: n, got: w.nrows() })
        }
        Some(w) => project(w.clone(), power),
        None => identity_precoder(n, power),
    };

    let grams: Vec<CMatrix> = (0..opts.saa_trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_symbols(source, n, model.frame_len, seed::derive(opts.seed, "saa", t as u64));
            &s * s.adjoint()
        })
        .collect();
    let saa = Saa { grams, model, metric };
    let f0 = saa.value(&w0);
    if !f0.is_finite() {
        return Err(Error::Singular("starting precoder gives rank-deficient blocks".into()));
    }

    let mut trace = vec![f0];
    let mut iterations = 0;
    let mut rounds = 0;
    let mut d = descend(&saa, None, w0, power, opts, &mut trace)?;
    iterations += d.iterations;
    let mut converged = d.converged;

    if let (Some(c), Some(w_cap)) = (comm, capacity) {
        let mut rho = f0.abs().max(1e-12);
        while comm_rate(&d.w, c)? < c.rate_floor && rounds < 12 {
            let pen = Penalty { comm: c, rho };
            d = descend(&saa, Some(&pen), d.w, power, opts, &mut trace)?;
            iterations += d.iterations;
            converged = d.converged;
            rounds += 1;
            rho *= 10.0;
        }
        if comm_rate(&d.w, c)? < c.rate_floor {
            // Both endpoints lie in the power ball, so every mixture does too.
            let mix = |th: f64| &d.w * Complex64::new(1.0 - th, 0.0) + &w_cap * Complex64::new(th, 0.0);
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if comm_rate(&mix(mid), c)? >= c.rate_floor {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            d.w = mix(hi);
            trace.push(saa.value(&d.w));
        }
    }

    let saa_objective = saa.value(&d.w);
    Ok(DipResult {
        rate: comm.map(|c| comm_rate(&d.w, c)).transpose()?,
        w: d.w,
        saa_objective,
        objective_trace: trace,
        iterations,
        penalty_rounds: rounds,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoding::{ddp_precoder, ergodic_error, lse_error_of};

    fn model(n: usize, l: usize) -> TirModel {
        TirModel { n_tx: n, n_rx: 2, noise_var: 0.1, prior_var: Some(1.0), frame_len: l }
    }

    fn random_start(n: usize, power: f64, seed: u64) -> CMatrix {
        let w = sample_symbols(&SymbolSource::Gaussian, n, n, seed);
        let e = w.norm_squared();
        w * Complex64::new((power / e).sqrt(), 0.0)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(3, 6);
        for metric in [ErrorMetric::Lse, ErrorMetric::Lmmse] {
            let grams = (0..4)
                .map(|t| {
                    let s = sample_symbols(&SymbolSource::Gaussian, 3, 6, t);
                    &s * s.adjoint()
                })
                .collect();
            let saa = Saa { grams, model: &m, metric };
            let w = random_start(3, 2.0, 11);
            let (_, g) = saa.value_grad(&w).unwrap();
            let dir = sample_symbols(&SymbolSource::Gaussian, 3, 3, 12);
            let h = 1e-6;
            let plus = saa.value(&(&w + &dir * Complex64::new(h, 0.0)));
            let minus = saa.value(&(&w - &dir * Complex64::new(h, 0.0)));
            let fd = (plus - minus) / (2.0 * h);
            assert!((fd - inner(&g, &dir)).abs() < 1e-5 * fd.abs().max(1.0), "{metric:?}: {fd} vs {}", inner(&g, &dir));
        }
    }

    #[test]
    fn rate_gradient_matches_finite_differences() {
        let h = sample_symbols(&SymbolSource::Gaussian, 2, 3, 4);
        let c = CommLink { h, noise_var: 0.5, rate_floor: 50.0 };
        let pen = Penalty { comm: &c, rho: 1.0 };
        let w = random_start(3, 1.0, 5);
        let dir = sample_symbols(&SymbolSource::Gaussian, 3, 3, 6);
        let e = 1e-6;
        let fd = (pen.value(&(&w + &dir * Complex64::new(e, 0.0))) - pen.value(&(&w - &dir * Complex64::new(e, 0.0))))
            / (2.0 * e);
        let an = inner(&pen.grad(&w), &dir);
        assert!((fd - an).abs() < 1e-5 * fd.abs().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn isotropic_data_gives_scaled_identity_gram() {
        let (n, p) = (4, 2.0);
        let m = model(n, 16);
        let opts = DipOptions { saa_trials: 1000, init: Some(random_start(n, p, 3)), ..Default::default() };
        let r = dip_precoder(&m, &SymbolSource::Gaussian, p, ErrorMetric::Lse, None, &opts).unwrap();
        let target = CMatrix::identity(n, n) * Complex64::new(p / n as f64, 0.0);
        let rel = (&r.w * r.w.adjoint() - &target).norm() / target.norm();
        assert!(rel <= 0.05, "relative deviation {rel}");
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.w.norm_squared() - p).abs() < 1e-9);
    }

    #[test]
    fn ordering_against_baselines() {
        let (n, l, p) = (4, 8, 1.0);
        let m = model(n, l);
        let src = SymbolSource::from_label("QPSK").unwrap();
        let opts = DipOptions { saa_trials: 300, seed: 5, ..Default::default() };
        let r = dip_precoder(&m, &src, p, ErrorMetric::Lse, None, &opts).unwrap();
        // The default start is the isotropic baseline, so the first trace
        // entry is the baseline's sample-average error.
        assert!(r.saa_objective <= r.objective_trace[0]);
        let base = ergodic_error(&identity_precoder(n, p), &m, &src, ErrorMetric::Lse, 2000, 0.0, 77).unwrap();
        let ddp = m.noise_var * 2.0 * (n * n) as f64 / (p * l as f64);
        let s = sample_symbols(&src, n, l, 99);
        if let Ok(w) = ddp_precoder(&s, p, n) {
            assert!((lse_error_of(&(w * &s), &m).unwrap() - ddp).abs() < 1e-9);
        }
        let fresh = ergodic_error(&r.w, &m, &src, ErrorMetric::Lse, 2000, 0.0, 77).unwrap();
        assert!(ddp <= fresh.stats.mean);
        let gap = fresh.stats.mean - base.stats.mean;
        assert!(gap <= 3.0 * (fresh.stats.std_error() + base.stats.std_error()), "gap {gap}");
    }

    #[test]
    fn rate_floor_near_capacity_is_met_at_a_cost() {
        let (n, p) = (4, 2.0);
        let m = model(n, 12);
        let h = sample_symbols(&SymbolSource::Gaussian, 3, n, 21);
        let mut c = CommLink { h, noise_var: 0.2, rate_floor: 0.0 };
        let (cap, _) = link_capacity(&c, p).unwrap();
        let opts = DipOptions { saa_trials: 200, seed: 2, ..Default::default() };
        let free = dip_precoder(&m, &SymbolSource::Gaussian, p, ErrorMetric::Lse, Some(&c), &opts).unwrap();
        c.rate_floor = 0.97 * cap;
        assert!(free.rate.unwrap() < c.rate_floor);
        let tied = dip_precoder(&m, &SymbolSource::Gaussian, p, ErrorMetric::Lse, Some(&c), &opts).unwrap();
        assert!(tied.rate.unwrap() >= c.rate_floor - 1e-3);
        assert!(tied.saa_objective > free.saa_objective);
        assert!(tied.w.norm_squared() <= p + 1e-9);
    }

    #[test]
    fn unreachable_rate_is_reported() {
        let h = sample_symbols(&SymbolSource::Gaussian, 2, 2, 1);
        let c = CommLink { h, noise_var: 1.0, rate_floor: 100.0 };
        let err = dip_precoder(
            &model(2, 4),
            &SymbolSource::Gaussian,
            1.0,
            ErrorMetric::Lse,
            Some(&c),
            &DipOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::RateInfeasible { requested, max_rate } => {
                assert_eq!(requested, 100.0);
                assert!(max_rate < 100.0);
            }
            e => panic!("unexpected {e}"),
        }
    }
}
