//! Parameter blocks and pipelines for each experiment.

use serde::{Deserialize, Serialize};

use super::output::{num, Artifact, CsvTable};
use super::Diagnostic;
use crate::error::Result;
use crate::metrics::{eisl, expected_acf_profile, AcfMode, SymbolSource, MIN_STATS_TRIALS};
use crate::pcs::{mutual_information, tradeoff_frontier, AwgnChannel, MiMethod, DEFAULT_QUADRATURE_ORDER};
use crate::precoding::{
    comm_rate, ddp_ergodic_error, ddp_precoder, dip_precoder, ergodic_error, identity_precoder, sample_symbols,
    CommLink, DipOptions, ErrorMetric, TirModel,
};
use crate::pulse::{design_pulse, rrc_pulse, weak_target_improvement, DelayRegion, DesignOptions, WeakTargetScene};
use crate::waveform::{BasisKind, BasisParams, ModulationBasis};
use crate::{seed, Constellation};

/// Files produced by a pipeline plus whether every iterative solver in it
/// converged.
pub struct PipelineOutput {
    pub artifacts: Vec<Artifact>,
    pub converged: bool,
}

fn diag(out: &mut Vec<Diagnostic>, path: &str, message: impl Into<String>) {
    let d = Diagnostic { path: path.into(), message: message.into() };
    if !out.contains(&d) {
        out.push(d);
    }
}

fn check_source(out: &mut Vec<Diagnostic>, path: &str, label: &str) {
    if let Err(e) = SymbolSource::from_label(label) {
        diag(out, path, e.to_string());
    }
}

fn check_bases(out: &mut Vec<Diagnostic>, bases: &[BasisKind], n: usize, params: &BasisParams) {
    if bases.is_empty() {
        diag(out, "params.bases", "at least one basis is required");
    }
    for &kind in bases {
        if let Err(e) = ModulationBasis::check(kind, n, params) {
            diag(out, "params.n", format!("{}: {e}", kind.name()));
        }
    }
}

fn check_pulse(out: &mut Vec<Diagnostic>, t: f64, rolloff: f64, oversampling: usize, span: usize) {
    if !(t.is_finite() && t > 0.0) {
        diag(out, "params.symbol_period", format!("must be positive, got {t}"));
    }
    if !(0.0..=1.0).contains(&rolloff) {
        diag(out, "params.rolloff", format!("must lie in [0, 1], got {rolloff}"));
    }
    if oversampling < 4 {
        diag(out, "params.oversampling", format!("must be at least 4, got {oversampling}"));
    }
    if span < 8 || !span.is_multiple_of(2) {
        diag(out, "params.span", format!("must be an even number ≥ 8, got {span}"));
    }
}

/// Region `[start, end]` in symbol periods must lie in `[1, span/2]`.
fn check_region(out: &mut Vec<Diagnostic>, path: &str, start: f64, end: f64, span: usize) {
    if !(start.is_finite() && end.is_finite() && start < end) {
        diag(out, path, format!("region [{start}, {end}] is empty"));
    } else if start < 1.0 - 1e-9 {
        diag(out, path, format!("region must start at or beyond one symbol period, starts at {start} T"));
    } else if end > span as f64 / 2.0 {
        diag(out, path, format!("region end {end} T exceeds half the pulse span ({} T)", span / 2));
    }
}

fn check_design_options(out: &mut Vec<Diagnostic>, path: &str, o: &DesignOptions) {
    if o.max_iters == 0 {
        diag(out, &format!("{path}.max_iters"), "must be at least 1");
    }
    if !(o.tol > 0.0) {
        diag(out, &format!("{path}.tol"), "must be positive");
    }
    if let Some(b) = o.bandwidth_cap {
        if !(b > 0.0) {
            diag(out, &format!("{path}.bandwidth_cap"), "must be positive");
        }
    }
}

fn min_trials(out: &mut Vec<Diagnostic>, trials: usize) {
    if trials < MIN_STATS_TRIALS {
        diag(out, "trials", format!("this experiment needs at least {MIN_STATS_TRIALS} trials, got {trials}"));
    }
}

// ---------------------------------------------------------------- acf-compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcfCompareParams {
    pub bases: Vec<BasisKind>,
    #[serde(alias = "N")]
    pub n: usize,
    pub constellation: String,
    pub mode: AcfMode,
    pub basis_params: BasisParams,
    /// Lags `1..=k` on each side of zero are left out of the ISL.
    pub exclude_mainlobe_lags: usize,
    /// Threshold for the ISL tail probability.
    pub tail_threshold: f64,
    /// Also write per-lag mean/variance profiles.
    pub profiles: bool,
}

impl Default for AcfCompareParams {
    fn default() -> Self {
        AcfCompareParams {
            bases: BasisKind::ALL.to_vec(),
            n: 64,
            constellation: "16QAM".into(),
            mode: AcfMode::Periodic,
            basis_params: BasisParams::default(),
            exclude_mainlobe_lags: 0,
            tail_threshold: 1.0,
            profiles: true,
        }
    }
}

impl AcfCompareParams {
    pub fn check(&self, trials: usize, out: &mut Vec<Diagnostic>) {
        min_trials(out, trials);
        check_source(out, "params.constellation", &self.constellation);
        check_bases(out, &self.bases, self.n, &self.basis_params);
        if self.exclude_mainlobe_lags >= self.n {
            diag(out, "params.exclude_mainlobe_lags", "must be smaller than the block length");
        }
    }

    pub fn run(&self, root: u64, trials: usize) -> Result<PipelineOutput> {
        let source = SymbolSource::from_label(&self.constellation)?;
        // Every basis sees the same symbol draws.
        let s = seed::derive(root, "acf-compare", 0);
        let mut table = CsvTable::new(&[
            "basis",
            "eisl_mean",
            "eisl_variance",
            "eisl_std_error",
            "eisl_ci_halfwidth",
            "tail_prob",
            "trials",
        ])?;
        let mut artifacts = Vec::new();
        for &kind in &self.bases {
            let basis = ModulationBasis::new(kind, self.n, self.basis_params)?;
            let st = eisl(&basis, &source, trials, self.mode, self.exclude_mainlobe_lags, self.tail_threshold, s)?;
            table.row([
                kind.name().to_string(),
                num(st.mean),
                num(st.variance),
                num(st.std_error()),
                num(st.ci_halfwidth),
                num(st.tail_prob),
                st.trials.to_string(),
            ])?;
            if self.profiles {
                let p = expected_acf_profile(&basis, &source, trials, self.mode, s)?;
                let mut t = CsvTable::new(&["lag", "mean", "variance"])?;
                for ((lag, m), v) in p.lags.iter().zip(&p.mean).zip(&p.variance) {
                    t.row([lag.to_string(), num(*m), num(*v)])?;
                }
                let stem = format!("acf_{}", kind.name().to_ascii_lowercase());
                artifacts.push(t.finish(format!("{stem}.csv"))?);
                artifacts.push(Artifact::json(
                    format!("{stem}.json"),
                    &serde_json::json!({
                        "trials": trials,
                        "seed": s,
                        "basis": basis.descriptor(),
                        "constellation": source.label(),
                        "mode": self.mode,
                    }),
                )?);
            }
        }
        artifacts.insert(0, table.finish("eisl.csv")?);
        Ok(PipelineOutput { artifacts, converged: true })
    }
}

// --------------------------------------------------------------- pulse-design

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseDesignParams {
    pub symbol_period: f64,
    pub rolloff: f64,
    pub oversampling: usize,
    pub span: usize,
    /// Design region in symbol periods.
    pub region: [f64; 2],
    pub options: DesignOptions,
}

impl Default for PulseDesignParams {
    fn default() -> Self {
        PulseDesignParams {
            symbol_period: 1.0,
            rolloff: 0.35,
            oversampling: crate::pulse::DEFAULT_OVERSAMPLING,
            span: crate::pulse::DEFAULT_SPAN,
            region: [1.5, 4.0],
            options: DesignOptions::default(),
        }
    }
}

impl PulseDesignParams {
    pub fn check(&self, _trials: usize, out: &mut Vec<Diagnostic>) {
        check_pulse(out, self.symbol_period, self.rolloff, self.oversampling, self.span);
        check_region(out, "params.region", self.region[0], self.region[1], self.span);
        check_design_options(out, "params.options", &self.options);
    }

    pub fn run(&self, _root: u64, _trials: usize) -> Result<PipelineOutput> {
        let t = self.symbol_period;
        let region = DelayRegion::in_symbols(self.region[0], self.region[1], t)?;
        let rrc = rrc_pulse(t, self.rolloff, self.oversampling, self.span)?;
        let design = design_pulse(t, self.rolloff, self.oversampling, self.span, region, &self.options)?;
        let p = &design.pulse;

        let mut time = CsvTable::new(&["tau", "designed", "rrc"])?;
        let ((taus, a), (_, b)) = (p.time_pulse(), rrc.time_pulse());
        for ((tau, x), y) in taus.iter().zip(&a).zip(&b) {
            time.row([num(*tau), num(*x), num(*y)])?;
        }
        let mut spec = CsvTable::new(&["f", "designed", "rrc"])?;
        for ((f, x), (_, y)) in p.spectrum_samples().iter().zip(rrc.spectrum_samples()) {
            spec.row([num(*f), num(*x), num(y)])?;
        }
        let mut acf = CsvTable::new(&["tau", "designed", "rrc"])?;
        let (ga, gb) = (p.acf(), rrc.acf());
        for ((tau, x), y) in ga.taus.iter().zip(&ga.values).zip(&gb.values) {
            acf.row([num(*tau), num(*x), num(*y)])?;
        }
        Ok(PipelineOutput {
            artifacts: vec![
                time.finish("pulse_time.csv")?,
                spec.finish("pulse_spectrum.csv")?,
                acf.finish("pulse_acf.csv")?,
                Artifact::json("design_report.json", &design.report)?,
            ],
            converged: design.report.converged,
        })
    }
}

// ---------------------------------------------------------------- range-scene

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeSceneParams {
    pub symbol_period: f64,
    pub rolloff: f64,
    pub oversampling: usize,
    pub span: usize,
    #[serde(alias = "N")]
    pub n: usize,
    pub constellation: String,
    pub bases: Vec<BasisKind>,
    pub basis_params: BasisParams,
    pub scene: WeakTargetScene,
    pub design: DesignOptions,
}

impl Default for RangeSceneParams {
    fn default() -> Self {
        RangeSceneParams {
            symbol_period: 12.5e-9,
            rolloff: 0.35,
            oversampling: crate::pulse::DEFAULT_OVERSAMPLING,
            span: crate::pulse::DEFAULT_SPAN,
            n: 128,
            constellation: "16QAM".into(),
            bases: vec![BasisKind::Sc, BasisKind::Ofdm],
            basis_params: BasisParams::default(),
            scene: WeakTargetScene::default(),
            design: DesignOptions::default(),
        }
    }
}

impl RangeSceneParams {
    pub fn check(&self, _trials: usize, out: &mut Vec<Diagnostic>) {
        check_pulse(out, self.symbol_period, self.rolloff, self.oversampling, self.span);
        check_source(out, "params.constellation", &self.constellation);
        check_bases(out, &self.bases, self.n, &self.basis_params);
        check_design_options(out, "params.design", &self.design);
        if let Err(e) = self.scene.validate() {
            diag(out, "params.scene", e.to_string());
        } else if self.symbol_period > 0.0 {
            match self.scene.relative_region() {
                Ok(r) => check_region(
                    out,
                    "params.scene.region_m",
                    r.start / self.symbol_period,
                    r.end / self.symbol_period,
                    self.span,
                ),
                Err(e) => diag(out, "params.scene.region_m", e.to_string()),
            }
        }
        if !(self.scene.noise_power >= 0.0) {
            diag(out, "params.scene.noise_power", "must be ≥ 0");
        }
    }

    pub fn run(&self, root: u64, trials: usize) -> Result<PipelineOutput> {
        let t = self.symbol_period;
        let source = SymbolSource::from_label(&self.constellation)?;
        let rrc = rrc_pulse(t, self.rolloff, self.oversampling, self.span)?;
        let design =
            design_pulse(t, self.rolloff, self.oversampling, self.span, self.scene.relative_region()?, &self.design)?;
        let s = seed::derive(root, "range-scene", 0);
        let mut det = CsvTable::new(&["basis", "pulse", "p_detect", "std_error", "hits", "trials"])?;
        let mut imp = CsvTable::new(&["basis", "relative_error_reduction", "paired_std_error"])?;
        for &kind in &self.bases {
            let basis = ModulationBasis::new(kind, self.n, self.basis_params)?;
            let r = weak_target_improvement(&self.scene, &rrc, &design.pulse, &basis, &source, trials, s)?;
            for (label, d) in [("RRC", r.baseline), ("designed", r.candidate)] {
                det.row([
                    kind.name().to_string(),
                    label.to_string(),
                    num(d.p_detect),
                    num(d.std_error),
                    d.hits.to_string(),
                    d.trials.to_string(),
                ])?;
            }
            imp.row([kind.name().to_string(), num(r.relative_error_reduction), num(r.paired_std_error)])?;
        }
        Ok(PipelineOutput {
            artifacts: vec![
                det.finish("detection.csv")?,
                imp.finish("improvement.csv")?,
                Artifact::json("design_report.json", &design.report)?,
            ],
            converged: design.report.converged,
        })
    }
}

// ------------------------------------------------------------------------ pcs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcsParams {
    pub base: String,
    /// Kurtosis caps, ascending.
    pub kappas: Vec<f64>,
    pub snr_db: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PcsParams {
    fn default() -> Self {
        PcsParams { base: "64QAM".into(), kappas: vec![1.0, 1.1, 1.2, 1.38], snr_db: 10.0, tol: 1e-9, max_iters: 3000 }
    }
}

impl PcsParams {
    pub fn check(&self, _trials: usize, out: &mut Vec<Diagnostic>) {
        if let Err(e) = Constellation::standard(&self.base, None) {
            diag(out, "params.base", e.to_string());
        }
        if self.kappas.is_empty() {
            diag(out, "params.kappas", "at least one kurtosis cap is required");
        }
        for (i, &k) in self.kappas.iter().enumerate() {
            if !k.is_finite() || k < 1.0 {
                diag(out, &format!("params.kappas[{i}]"), format!("kurtosis below 1 infeasible (got {k})"));
            }
        }
        if self.kappas.windows(2).any(|w| w[1] < w[0]) {
            diag(out, "params.kappas", "must be sorted ascending");
        }
        if !self.snr_db.is_finite() {
            diag(out, "params.snr_db", "must be finite");
        }
        if !(self.tol > 0.0) {
            diag(out, "params.tol", "must be positive");
        }
        if self.max_iters == 0 {
            diag(out, "params.max_iters", "must be at least 1");
        }
    }

    pub fn run(&self, _root: u64, _trials: usize) -> Result<PipelineOutput> {
        let base = Constellation::standard(&self.base, None)?;
        let ch = AwgnChannel::from_snr_db(self.snr_db)?;
        let frontier = tradeoff_frontier(&base, &ch, &self.kappas, self.tol, self.max_iters)?;
        let mut table = CsvTable::new(&[
            "kappa_target",
            "kappa_effective",
            "kappa_achieved",
            "mi_bits",
            "iterations",
            "converged",
            "cap_clamped",
        ])?;
        let mut artifacts = Vec::new();
        for (i, (pt, res)) in frontier.iter().enumerate() {
            table.row([
                num(pt.kappa_target),
                num(pt.kappa_effective),
                num(pt.kappa_achieved),
                num(pt.mi_bits),
                pt.iterations.to_string(),
                pt.converged.to_string(),
                pt.cap_clamped.to_string(),
            ])?;
            let shaped = res.constellation(&base)?.with_label(format!("{}-shaped-k{}", base.label(), pt.kappa_target));
            artifacts.push(Artifact::json(format!("shaped_{i}.json"), &shaped)?);
        }
        let uniform = mutual_information(&base, &ch, MiMethod::Quadrature { order: DEFAULT_QUADRATURE_ORDER })?;
        artifacts.insert(0, table.finish("frontier.csv")?);
        artifacts.push(Artifact::json(
            "pcs_summary.json",
            &serde_json::json!({
                "base": base.label(),
                "snr_db": self.snr_db,
                "uniform_mi_bits": uniform,
                "uniform_kurtosis": base.kurtosis(),
            }),
        )?);
        Ok(PipelineOutput { artifacts, converged: frontier.iter().all(|(p, _)| p.converged) })
    }
}

// ------------------------------------------------------------------ precoding

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommParams {
    /// Receive antennas at the communication user.
    #[serde(default = "default_n_cu")]
    pub n_cu: usize,
    #[serde(default = "one")]
    pub noise_var: f64,
    pub rate_floor: f64,
}

fn default_n_cu() -> usize {
    8
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecodingParams {
    pub n_tx: usize,
    pub n_rx: usize,
    pub frame_lens: Vec<usize>,
    pub power: f64,
    pub noise_var: f64,
    pub prior_var: Option<f64>,
    pub metric: ErrorMetric,
    pub symbols: String,
    pub dip: DipOptions,
    pub comm: Option<CommParams>,
}

impl Default for PrecodingParams {
    fn default() -> Self {
        PrecodingParams {
            n_tx: 16,
            n_rx: 16,
            frame_lens: vec![32, 48, 64, 128],
            power: 1.0,
            noise_var: 1.0,
            prior_var: None,
            metric: ErrorMetric::Lse,
            symbols: "GAUSSIAN".into(),
            dip: DipOptions::default(),
            comm: None,
        }
    }
}

impl PrecodingParams {
    pub fn check(&self, trials: usize, out: &mut Vec<Diagnostic>) {
        min_trials(out, trials);
        if self.n_tx == 0 {
            diag(out, "params.n_tx", "must be at least 1");
        }
        if self.n_rx == 0 {
            diag(out, "params.n_rx", "must be at least 1");
        }
        if self.frame_lens.is_empty() {
            diag(out, "params.frame_lens", "at least one frame length is required");
        }
        for (i, &l) in self.frame_lens.iter().enumerate() {
            if l < self.n_tx {
                diag(
                    out,
                    &format!("params.frame_lens[{i}]"),
                    format!("frame length {l} is below n_tx = {}", self.n_tx),
                );
            }
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            diag(out, "params.power", "must be positive");
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            diag(out, "params.noise_var", "must be positive");
        }
        match (self.metric, self.prior_var) {
            (ErrorMetric::Lmmse, None) => diag(out, "params.prior_var", "LMMSE needs a prior variance"),
            (_, Some(g)) if !(g > 0.0) => diag(out, "params.prior_var", "must be positive"),
            _ => {}
        }
        check_source(out, "params.symbols", &self.symbols);
        if self.dip.saa_trials < MIN_STATS_TRIALS {
            diag(out, "params.dip.saa_trials", format!("must be at least {MIN_STATS_TRIALS}"));
        }
        if self.dip.max_iters == 0 {
            diag(out, "params.dip.max_iters", "must be at least 1");
        }
        if !(self.dip.tol >= 0.0) {
            diag(out, "params.dip.tol", "must be ≥ 0");
        }
        if let Some(c) = &self.comm {
            if c.n_cu == 0 {
                diag(out, "params.comm.n_cu", "must be at least 1");
            }
            if !(c.noise_var > 0.0) {
                diag(out, "params.comm.noise_var", "must be positive");
            }
            if !(c.rate_floor >= 0.0 && c.rate_floor.is_finite()) {
                diag(out, "params.comm.rate_floor", "must be ≥ 0");
            }
        }
    }

    pub fn run(&self, root: u64, trials: usize) -> Result<PipelineOutput> {
        let source = SymbolSource::from_label(&self.symbols)?;
        let link = self.comm.as_ref().map(|c| CommLink {
            h: sample_symbols(&SymbolSource::Gaussian, c.n_cu, self.n_tx, seed::derive(root, "precoding-link", 0)),
            noise_var: c.noise_var,
            rate_floor: c.rate_floor,
        });
        let mut table = CsvTable::new(&["L", "n_tx", "scheme", "else_mean", "else_ci", "rate_bits"])?;
        let mut dip_log = Vec::new();
        let mut converged = true;
        for (i, &l) in self.frame_lens.iter().enumerate() {
            let model = TirModel {
                n_tx: self.n_tx,
                n_rx: self.n_rx,
                noise_var: self.noise_var,
                prior_var: self.prior_var,
                frame_len: l,
            };
            let eval_seed = seed::derive(root, "precoding-eval", i as u64);
            let rate = |w| link.as_ref().map(|c| comm_rate(w, c)).transpose();
            let fmt_rate = |r: Option<f64>| r.map(num).unwrap_or_default();

            let ddp = ddp_ergodic_error(&model, &source, self.power, self.metric, trials, 0.0, eval_seed)?;
            let ddp_rate = match &link {
                Some(c) => {
                    let mut acc = 0.0;
                    let mut count = 0usize;
                    for t in 0..trials {
                        let s = sample_symbols(&source, self.n_tx, l, seed::trial_seed(eval_seed, t));
                        if let Ok(w) = ddp_precoder(&s, self.power, self.n_tx) {
                            acc += comm_rate(&w, c)?;
                            count += 1;
                        }
                    }
                    Some(acc / count.max(1) as f64)
                }
                None => None,
            };
            table.row([
                l.to_string(),
                self.n_tx.to_string(),
                "DDP".into(),
                num(ddp.stats.mean),
                num(ddp.stats.ci_halfwidth),
                fmt_rate(ddp_rate),
            ])?;

            let opts =
                DipOptions { seed: seed::derive(root, "precoding-saa", i as u64), init: None, ..self.dip.clone() };
            let dip = dip_precoder(&model, &source, self.power, self.metric, link.as_ref(), &opts)?;
            converged &= dip.converged;
            let e = ergodic_error(&dip.w, &model, &source, self.metric, trials, 0.0, eval_seed)?;
            table.row([
                l.to_string(),
                self.n_tx.to_string(),
                "DIP".into(),
                num(e.stats.mean),
                num(e.stats.ci_halfwidth),
                fmt_rate(dip.rate),
            ])?;
            dip_log.push(serde_json::json!({
                "L": l,
                "saa_objective": dip.saa_objective,
                "iterations": dip.iterations,
                "penalty_rounds": dip.penalty_rounds,
                "converged": dip.converged,
                "singular_frames": e.singular_frames,
            }));

            let base_w = identity_precoder(self.n_tx, self.power);
            let b = ergodic_error(&base_w, &model, &source, self.metric, trials, 0.0, eval_seed)?;
            table.row([
                l.to_string(),
                self.n_tx.to_string(),
                "orthogonal-baseline".into(),
                num(b.stats.mean),
                num(b.stats.ci_halfwidth),
                fmt_rate(rate(&base_w)?),
            ])?;
        }
        Ok(PipelineOutput {
            artifacts: vec![table.finish("results.csv")?, Artifact::json("dip.json", &dip_log)?],
            converged,
        })
    }
}
