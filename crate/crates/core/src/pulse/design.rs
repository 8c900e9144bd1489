//! Region-ISLR minimizing Nyquist pulse design.
//!
//! The design variable is the one-sided spectrum `G` (normalized by `T`).
//! The objective `J(G) = Σ_{τ_n ∈ region} g(τ_n)²` is a convex quadratic,
//! and the feasible set is the intersection of the Nyquist affine set with the
//! nonnegative orthant. Every feasible `G` has `g(0) = 1`, so `J` is also the
//! region ISLR. Projections onto the intersection use Dykstra's alternating
//! scheme; the outer loop is projected gradient with backtracking, which keeps
//! the objective sequence non-increasing.

use serde::Serialize;

use super::{rrc_pulse, support_bins, DelayRegion, PulseSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignOptions {
    pub max_iters: usize,
    /// Stop when a step lowers the objective by less than `tol` relative.
    pub tol: f64,
    /// Optional one-sided bandwidth cap in Hz, tighter than `(1+β)/(2T)`.
    pub bandwidth_cap: Option<f64>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { max_iters: 20_000, tol: 1e-10, bandwidth_cap: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub beta: f64,
    #[serde(rename = "T")]
    pub symbol_period: f64,
    #[serde(rename = "K")]
    pub oversampling: usize,
    pub span: usize,
    pub region: DelayRegion,
    pub islr_db_before: f64,
    pub islr_db_after: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PulseDesign {
    pub pulse: PulseSpec,
    pub report: DesignReport,
    /// Objective after each accepted iteration, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

/// Nyquist equality rows: `Σ_{(i,w) ∈ row} w·G_i = 1`.
type Rows = Vec<Vec<(usize, f64)>>;

fn nyquist_rows(span: usize, bins: usize, active: usize) -> Result<Rows> {
    let rows: Rows = PulseSpec::nyquist_classes(span, bins)
        .into_iter()
        .map(|row| row.into_iter().filter(|&(i, _)| i <= active).collect::<Vec<_>>())
        .collect();
    if let Some(r) = rows.iter().position(|row| row.is_empty()) {
        return Err(Error::Infeasible(format!(
            "no spectrum bins left in Nyquist class {r}; the bandwidth cap is below 1/(2T)"
        )));
    }
    Ok(rows)
}

fn project_affine(x: &mut [f64], rows: &Rows) {
    for row in rows {
        let dot: f64 = row.iter().map(|&(i, w)| w * x[i]).sum();
        let nrm: f64 = row.iter().map(|&(_, w)| w * w).sum();
        let c = (dot - 1.0) / nrm;
        for &(i, w) in row {
            x[i] -= c * w;
        }
    }
}

fn affine_residual(x: &[f64], rows: &Rows) -> f64 {
    rows.iter().map(|row| (row.iter().map(|&(i, w)| w * x[i]).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

/// Euclidean projection of `y` onto `{G : Nyquist rows hold, G ≥ 0}` by
/// Dykstra's algorithm. The result is exactly nonnegative; the equality
/// residual is driven below `1e-12`.
fn dykstra(y: &[f64], rows: &Rows, frozen: usize) -> Vec<f64> {
    let n = y.len();
    let mut x = y.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _ in 0..100_000 {
        for i in 0..n {
            z[i] = x[i] + p[i];
        }
        project_affine(&mut z, rows);
        for i in 0..n {
            p[i] = x[i] + p[i] - z[i];
        }
        let mut change = 0.0f64;
        for i in 0..n {
            let v = z[i] + q[i];
            let nx = if i >= frozen { 0.0 } else { v.max(0.0) };
            q[i] = v - nx;
            change = change.max((nx - x[i]).abs());
            x[i] = nx;
        }
        if change < 1e-15 && affine_residual(&x, rows) < 1e-12 {
            break;
        }
    }
    x
}

/// Closest nonnegative Nyquist spectrum (normalized by `T`) to `y`.
pub fn project_feasible(y: &[f64], span: usize) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    let bins = y.len() - 1;
    if bins < span / 2 || bins > span {
        return Err(Error::invalid(format!("spectrum length {} incompatible with span {span}", y.len())));
    }
    let rows = nyquist_rows(span, bins, bins)?;
    Ok(dykstra(y, &rows, y.len()))
}

/// Dense matrix of `g(τ_n)` coefficients: `g(τ_n) = Σ_i B[n][i] G_i`.
fn region_matrix(span: usize, oversampling: usize, bins: usize, region: &DelayRegion, t: f64) -> Vec<Vec<f64>> {
    let s = span as f64;
    let dt = 1.0 / oversampling as f64;
    let lo = (region.start / t / dt - 1e-9).ceil().max(0.0) as usize;
    let hi = (region.end / t / dt + 1e-9).floor() as usize;
    (lo..=hi)
        .map(|n| {
            let x = n as f64 * dt;
            (0..=bins)
                .map(|i| if i == 0 { 1.0 / s } else { 2.0 / s * (2.0 * std::f64::consts::PI * i as f64 * x / s).cos() })
                .collect()
        })
        .collect()
}

struct Quadratic {
    /// `Q = Bᵀ B`; `J(G) = Gᵀ Q G`.
    q: Vec<Vec<f64>>,
}

impl Quadratic {
    fn new(b: &[Vec<f64>], n: usize) -> Self {
        let mut q = vec![vec![0.0; n]; n];
        for row in b {
            for i in 0..n {
                for j in 0..n {
                    q[i][j] += row[i] * row[j];
                }
            }
        }
        Quadratic { q }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.q.iter().zip(x).map(|(row, xi)| xi * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).sum()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.q.iter().map(|row| 2.0 * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect()
    }

    /// Upper bound on the gradient's Lipschitz constant, `2‖Q‖_∞`.
    fn lipschitz(&self) -> f64 {
        2.0 * self.q.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Designs the Nyquist pulse minimizing the ACF energy inside `region`,
/// starting from the RRC pulse with the same roll-off.
pub fn design_pulse(
    symbol_period: f64,
    rolloff: f64,
    oversampling: usize,
    span: usize,
    region: DelayRegion,
    options: &DesignOptions,
) -> Result<PulseDesign> {
    let rrc = rrc_pulse(symbol_period, rolloff, oversampling, span)?;
    let t = symbol_period;
    if region.start < t * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "region must exclude the mainlobe [0, T): starts at {:.4} T",
            region.start / t
        )));
    }
    if options.max_iters == 0 || !(options.tol > 0.0) {
        return Err(Error::invalid("design needs max_iters ≥ 1 and tol > 0"));
    }
    let before = rrc.region_islr_db(&region)?;
    let bins = support_bins(span, rolloff);
    let active = match options.bandwidth_cap {
        Some(cap) if !(cap > 0.0) => return Err(Error::invalid(format!("bandwidth cap must be positive, got {cap}"))),
        Some(cap) => ((cap * span as f64 * t) + 1e-9).floor().min(bins as f64) as usize,
        None => bins,
    };
    let rows = nyquist_rows(span, bins, active)?;
    let n = bins + 1;
    let quad = Quadratic::new(&region_matrix(span, oversampling, bins, &region, t), n);

    let mut x = dykstra(&rrc.normalized_spectrum(), &rows, active + 1);
    let mut fx = quad.value(&x);
    let mut trace = vec![fx];
    let lip = quad.lipschitz().max(f64::MIN_POSITIVE);
    let mut step = 1.0 / lip;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        iterations += 1;
        let grad = quad.grad(&x);
        let mut accepted = None;
        let mut t_try = (step * 2.0).min(64.0 / lip);
        for _ in 0..60 {
            let y: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - t_try * g).collect();
            let xn = dykstra(&y, &rows, active + 1);
            let fxn = quad.value(&xn);
            let d: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let lin: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            let sq: f64 = d.iter().map(|v| v * v).sum();
            if fxn <= fx + lin + sq / (2.0 * t_try) + 1e-15 * fx.abs() && fxn <= fx {
                accepted = Some((xn, fxn, sq));
                break;
            }
            t_try *= 0.5;
        }
        let Some((xn, fxn, sq)) = accepted else {
            converged = true;
            break;
        };
        step = t_try;
        let rel = (fx - fxn) / fx.abs().max(f64::MIN_POSITIVE);
        x = xn;
        fx = fxn;
        trace.push(fx);
        if rel < options.tol || sq == 0.0 {
            converged = true;
            break;
        }
    }

    let spectrum = x.iter().map(|v| v * t).collect();
    let pulse = PulseSpec::from_spectrum(t, rolloff, oversampling, span, spectrum)?;
    let after = pulse.region_islr_db(&region)?;
    Ok(PulseDesign {
        report: DesignReport {
            beta: rolloff,
            symbol_period: t,
            oversampling,
            span,
            region,
            islr_db_before: before,
            islr_db_after: after,
            iterations,
            converged,
        },
        pulse,
        objective_trace: trace,
    })
}
