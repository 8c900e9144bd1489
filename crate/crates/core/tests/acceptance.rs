//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use isac::harness::{self, ExperimentConfig};
use isac::metrics::{acf, eisl, psd, AcfMode, SymbolSource};
use isac::pcs::{mutual_information, shape, AwgnChannel, MiMethod, ShapingProblem};
use isac::precoding::{
    ddp_ergodic_error, dip_precoder, ergodic_error, identity_precoder, link_capacity, sample_symbols, CommLink,
    DipOptions, ErrorMetric, TirModel,
};
use isac::pulse::{design_pulse, rrc_pulse, weak_target_improvement, DelayRegion, DesignOptions, WeakTargetScene};
use isac::{seed, BasisKind, BasisParams, Complex64, Constellation, Error, ModulationBasis};

struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }
}

type Criterion = fn(&mut Checks) -> isac::Result<()>;

fn main() {
    let criteria: [(&str, Duration, Criterion); 7] = [
        ("kurtosis values", Duration::from_secs(1), kurtosis_values),
        ("OFDM ranging optimality", Duration::from_secs(120), ofdm_optimality),
        ("Wiener-Khinchin identity", Duration::from_secs(10), wiener_khinchin),
        ("pulse shaping", Duration::from_secs(300), pulse_shaping),
        ("constellation shaping", Duration::from_secs(300), constellation_shaping),
        ("precoding oracles", Duration::from_secs(600), precoding_oracles),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut all = true;
    for (i, (name, budget, f)) in criteria.into_iter().enumerate() {
        let mut c = Checks::new();
        let start = Instant::now();
        let res = f(&mut c);
        let took = start.elapsed();
        if let Err(e) = &res {
            c.failures.push(format!("error: {e}"));
        }
        c.check(took <= budget, format!("runtime {:.2}s (budget {}s)", took.as_secs_f64(), budget.as_secs()));
        let pass = c.failures.is_empty();
        all &= pass;
        println!("criterion {} ({name}): {}", i + 1, if pass { "PASS" } else { "FAIL" });
        for f in &c.failures {
            println!("    failed: {f}");
        }
        for n in &c.notes {
            println!("    ok: {n}");
        }
    }
    if !all {
        std::process::exit(1);
    }
}

// 1 ------------------------------------------------------------------------

fn kurtosis_values(c: &mut Checks) -> isac::Result<()> {
    let k64 = Constellation::standard("64QAM", None)?.kurtosis();
    c.check((k64 - 1.38).abs() <= 0.01, format!("64QAM kurtosis {k64}"));
    for label in ["BPSK", "QPSK", "8PSK", "16PSK"] {
        let k = Constellation::standard(label, None)?.kurtosis();
        c.check((k - 1.0).abs() <= 1e-15, format!("{label} kurtosis {k}"));
    }
    // Enumeration over the integer grid {±1, ±3}², independent of the
    // library's point generation and normalization.
    let levels = [-3i64, -1, 1, 3];
    let (mut m2, mut m4) = (0i64, 0i64);
    for a in levels {
        for b in levels {
            let e = a * a + b * b;
            m2 += e;
            m4 += e * e;
        }
    }
    let oracle = (m4 as f64 / 16.0) / (m2 as f64 / 16.0).powi(2);
    let k16 = Constellation::standard("16QAM", None)?.kurtosis();
    c.check(
        (k16 - oracle).abs() <= 1e-6 && (oracle - 1.32).abs() < 1e-12,
        format!("16QAM kurtosis {k16}, enumeration {oracle}"),
    );
    Ok(())
}

// 2 ------------------------------------------------------------------------

fn ofdm_optimality(c: &mut Checks) -> isac::Result<()> {
    let (n, trials) = (64, 10_000);
    let run = |src: &SymbolSource, s: u64| -> isac::Result<Vec<(BasisKind, f64, f64)>> {
        BasisKind::ALL
            .iter()
            .map(|&k| {
                let b = ModulationBasis::new(k, n, BasisParams::default())?;
                let st = eisl(&b, src, trials, AcfMode::Periodic, 0, f64::INFINITY, s)?;
                Ok((k, st.mean, st.std_error()))
            })
            .collect()
    };
    let qam = run(&SymbolSource::from_label("16QAM")?, 11)?;
    let (_, ofdm, ofdm_se) = *qam.iter().find(|r| r.0 == BasisKind::Ofdm).expect("OFDM row");
    for &(k, m, se) in qam.iter().filter(|r| r.0 != BasisKind::Ofdm) {
        let margin = (m - ofdm) / (se * se + ofdm_se * ofdm_se).sqrt();
        c.check(margin > 3.0, format!("16QAM EISL {} {m:.4} vs OFDM {ofdm:.4}: margin {margin:.1} SE", k.name()));
    }
    let gauss = run(&SymbolSource::Gaussian, 12)?;
    let mut worst: f64 = 0.0;
    for (i, a) in gauss.iter().enumerate() {
        for b in &gauss[i + 1..] {
            worst = worst.max((a.1 - b.1).abs() / (a.2 * a.2 + b.2 * b.2).sqrt());
        }
    }
    let means: Vec<String> = gauss.iter().map(|r| format!("{} {:.4}", r.0.name(), r.1)).collect();
    c.check(worst <= 3.0, format!("Gaussian EISLs [{}] agree, worst pair {worst:.2} SE", means.join(", ")));
    Ok(())
}

// 3 ------------------------------------------------------------------------

fn wiener_khinchin(c: &mut Checks) -> isac::Result<()> {
    let src = SymbolSource::from_label("16QAM")?;
    for n in [64, 60] {
        for &k in &BasisKind::ALL {
            let b = ModulationBasis::new(k, n, BasisParams::default())?;
            let mut worst: f64 = 0.0;
            for t in 0..100 {
                let mut rng = seed::rng(seed::derive(3, "wk", t));
                let mut s = vec![Complex64::new(0.0, 0.0); n];
                src.sample_into(&mut rng, &mut s);
                let x = b.modulate(&s)?.time_samples;
                let r = acf(&x, AcfMode::Periodic)?;
                let p = psd(&x)?;
                // Plain O(N²) DFT of the ACF, independent of the FFT path.
                for (f, pf) in p.iter().enumerate() {
                    let d: Complex64 = r
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(m, v)| {
                            v * Complex64::from_polar(1.0, -std::f64::consts::TAU * ((f * m) % n) as f64 / n as f64)
                        })
                        .sum();
                    worst = worst.max((d - pf).norm());
                }
            }
            c.check(worst <= 1e-9, format!("{} N={n}: max |DFT(r) - PSD| = {worst:.2e}", k.name()));
        }
    }
    Ok(())
}

// 4 ------------------------------------------------------------------------

fn pulse_shaping(c: &mut Checks) -> isac::Result<()> {
    let (t, beta, k, span) = (1.0, 0.35, 16, 16);
    let region = DelayRegion::in_symbols(1.5, 4.0, t)?;
    let d = design_pulse(t, beta, k, span, region, &DesignOptions::default())?;
    let defect = d.pulse.nyquist_defect();
    c.check(defect <= 1e-6, format!("designed pulse Nyquist defect {defect:.1e}"));
    let gain = d.report.islr_db_before - d.report.islr_db_after;
    c.check(
        gain >= 3.0,
        format!("region ISLR {:.2} dB -> {:.2} dB, gain {gain:.2} dB", d.report.islr_db_before, d.report.islr_db_after),
    );

    let scene = WeakTargetScene::default();
    let ts = 12.5e-9;
    let rrc = rrc_pulse(ts, beta, k, span)?;
    let designed = design_pulse(ts, beta, k, span, scene.relative_region()?, &DesignOptions::default())?.pulse;
    let src = SymbolSource::from_label("16QAM")?;
    let trials = 2000;
    let mut rrc_p = Vec::new();
    for kind in [BasisKind::Sc, BasisKind::Ofdm] {
        let b = ModulationBasis::new(kind, 128, BasisParams::default())?;
        let r = weak_target_improvement(&scene, &rrc, &designed, &b, &src, trials, 2024)?;
        c.check(
            r.candidate.p_detect > r.baseline.p_detect,
            format!(
                "{}: P_detect RRC {:.3} -> designed {:.3} (paired SE {:.3}, miss reduction {:.0}%)",
                kind.name(),
                r.baseline.p_detect,
                r.candidate.p_detect,
                r.paired_std_error,
                100.0 * r.relative_error_reduction
            ),
        );
        rrc_p.push(r.baseline.p_detect);
    }
    c.check(rrc_p[1] > rrc_p[0], format!("under RRC, OFDM {:.3} > SC {:.3}", rrc_p[1], rrc_p[0]));
    Ok(())
}

// 5 ------------------------------------------------------------------------

fn constellation_shaping(c: &mut Checks) -> isac::Result<()> {
    let qam = Constellation::standard("64QAM", None)?;
    let quad = MiMethod::Quadrature { order: 16 };
    for (cap, snr) in [(1.38, 10.0), (1.38, 30.0), (1.2, 10.0), (1.0, 10.0)] {
        let ch = AwgnChannel::from_snr_db(snr)?;
        let r = shape(&ShapingProblem::new(qam.clone(), cap, ch))?;
        let monotone = r.mi_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        c.check(monotone, format!("κ={cap} @{snr} dB: MI trace non-decreasing over {} iterations", r.iterations));
        if cap == 1.38 {
            let uniform = mutual_information(&qam, &ch, quad)?;
            c.check(
                (r.mi_bits - uniform).abs() <= 0.05,
                format!("κ=1.38 @{snr} dB: MI {:.4} vs uniform {uniform:.4}", r.mi_bits),
            );
        }
        if cap == 1.0 {
            let (radii, class) = qam.modulus_classes(1e-9);
            let mut mass = vec![0.0; radii.len()];
            for (p, &cl) in r.probs.iter().zip(&class) {
                mass[cl] += p;
            }
            let mut order: Vec<usize> = (0..radii.len()).collect();
            order.sort_by(|&a, &b| (radii[a] - 1.0).abs().total_cmp(&(radii[b] - 1.0).abs()));
            let two = mass[order[0]] + mass[order[1]];
            c.check(
                two >= 0.9,
                format!(
                    "κ=1 @{snr} dB: {:.1}% of mass on rings {:.3} and {:.3}",
                    100.0 * two,
                    radii[order[0]],
                    radii[order[1]]
                ),
            );
        }
    }
    for snr in [0.0, 10.0, 20.0] {
        let ch = AwgnChannel::from_snr_db(snr)?;
        let q = mutual_information(&qam, &ch, quad)?;
        let m = mutual_information(&qam, &ch, MiMethod::MonteCarlo { trials: 1_000_000, seed: 5 })?;
        c.check((q - m).abs() <= 0.01, format!("64QAM @{snr} dB: quadrature {q:.5} vs Monte-Carlo {m:.5}"));
    }
    Ok(())
}

// 6 ------------------------------------------------------------------------

fn precoding_oracles(c: &mut Checks) -> isac::Result<()> {
    let gauss = SymbolSource::Gaussian;
    let (p, s2, n_rx) = (1.0, 1.0, 4);
    let model = |n_tx, l| TirModel { n_tx, n_rx, noise_var: s2, prior_var: None, frame_len: l };
    let wishart = |n_tx: usize, l: usize| s2 * n_rx as f64 * (n_tx as f64 / p) * n_tx as f64 / (l - n_tx) as f64;
    let deterministic = |n_tx: usize, l: usize| s2 * n_rx as f64 * (n_tx * n_tx) as f64 / (p * l as f64);

    for (n_tx, l) in [(4, 16), (8, 24), (16, 32)] {
        let e =
            ergodic_error(&identity_precoder(n_tx, p), &model(n_tx, l), &gauss, ErrorMetric::Lse, 100_000, 0.0, 31)?;
        let rel = e.stats.mean / wishart(n_tx, l) - 1.0;
        c.check(
            rel.abs() <= 0.02,
            format!("ELSE ({n_tx},{l}) {:.4} vs Wishart {:.4}: {:+.2}%", e.stats.mean, wishart(n_tx, l), 100.0 * rel),
        );
    }

    let mut ratios = Vec::new();
    for l in [32, 48, 64, 128, 256] {
        let e = ergodic_error(&identity_precoder(16, p), &model(16, l), &gauss, ErrorMetric::Lse, 10_000, 0.0, 32)?;
        ratios.push((l, e.stats.mean / deterministic(16, l)));
    }
    let r32 = ratios[0].1;
    c.check((r32 - 2.0).abs() <= 0.05, format!("ELSE/LSE at n_tx=16, L=32: {r32:.4}"));
    let decreasing = ratios.windows(2).all(|w| w[1].1 < w[0].1);
    let list: Vec<String> = ratios.iter().map(|(l, r)| format!("{l}:{r:.3}")).collect();
    c.check(
        decreasing && ratios.last().expect("ratios").1 < 1.1,
        format!("ELSE/LSE shrinks toward 1: {}", list.join(" ")),
    );

    let (n_tx, l) = (16, 32);
    let m = model(n_tx, l);
    let ddp = ddp_ergodic_error(&m, &gauss, p, ErrorMetric::Lse, 1000, 0.0, 33)?;
    let rel_var = ddp.stats.variance / ddp.stats.mean.powi(2);
    c.check(rel_var < 1e-12, format!("DDP instantaneous LSE variance {rel_var:.1e} relative"));
    c.check((ddp.stats.mean / deterministic(n_tx, l) - 1.0).abs() < 1e-9, "DDP attains the deterministic optimum");

    let opts = DipOptions { saa_trials: 200, seed: 34, ..Default::default() };
    let dip = dip_precoder(&m, &gauss, p, ErrorMetric::Lse, None, &opts)?;
    let base = identity_precoder(n_tx, p);
    let fresh_dip = ergodic_error(&dip.w, &m, &gauss, ErrorMetric::Lse, 20_000, 0.0, 35)?;
    let fresh_base = ergodic_error(&base, &m, &gauss, ErrorMetric::Lse, 20_000, 0.0, 35)?;
    c.check(
        ddp.stats.mean <= fresh_dip.stats.mean,
        format!("DDP {:.3} <= DIP {:.3}", ddp.stats.mean, fresh_dip.stats.mean),
    );
    // The default start is the isotropic baseline, so the first trace entry
    // is its sample-average error on the frozen set.
    c.check(
        dip.saa_objective <= dip.objective_trace[0],
        format!("DIP {:.3} <= baseline {:.3} on the sample-average set", dip.saa_objective, dip.objective_trace[0]),
    );
    let slack = 3.0 * fresh_base.stats.std_error();
    c.check(
        fresh_dip.stats.mean <= fresh_base.stats.mean + slack,
        format!(
            "fresh blocks: DIP {:.3} <= baseline {:.3} + 3 SE ({slack:.3})",
            fresh_dip.stats.mean, fresh_base.stats.mean
        ),
    );

    let h = sample_symbols(&gauss, 8, n_tx, seed::derive(36, "link", 0));
    let mut link = CommLink { h, noise_var: 1.0, rate_floor: 0.0 };
    let (cap, _) = link_capacity(&link, p)?;
    link.rate_floor = 0.95 * cap;
    let tied = dip_precoder(&m, &gauss, p, ErrorMetric::Lse, Some(&link), &opts)?;
    let rate = tied.rate.expect("rate");
    c.check(
        rate >= link.rate_floor - 1e-3,
        format!("rate-constrained DIP: rate {rate:.4} vs floor {:.4} (capacity {cap:.4})", link.rate_floor),
    );
    c.check(
        tied.saa_objective > dip.saa_objective,
        format!("rate floor costs sensing: {:.3} > {:.3}", tied.saa_objective, dip.saa_objective),
    );
    link.rate_floor = cap + 0.5;
    match dip_precoder(&m, &gauss, p, ErrorMetric::Lse, Some(&link), &opts) {
        Err(Error::RateInfeasible { max_rate, .. }) => {
            c.check((max_rate - cap).abs() < 1e-9, format!("R0 above capacity reported, max rate {max_rate:.4}"))
        }
        other => c.check(false, format!("R0 above capacity not reported: {:?}", other.map(|r| r.rate))),
    }
    Ok(())
}

// 7 ------------------------------------------------------------------------

fn determinism(c: &mut Checks) -> isac::Result<()> {
    let configs = [
        r#"{"experiment": "acf-compare", "seed": 1, "trials": 2000, "params": {"N": 32}}"#,
        r#"{"experiment": "pulse-design", "seed": 1, "trials": 1}"#,
        r#"{"experiment": "range-scene", "seed": 1, "trials": 200}"#,
        r#"{"experiment": "pcs", "seed": 1, "trials": 1, "params": {"base": "16QAM", "kappas": [1.0, 1.2, 1.32]}}"#,
        r#"{"experiment": "precoding", "seed": 1, "trials": 500,
            "params": {"n_tx": 4, "n_rx": 4, "frame_lens": [8, 16], "dip": {"saa_trials": 100},
                       "comm": {"n_cu": 2, "rate_floor": 1.0}}}"#,
    ];
    let root = tempfile::tempdir()?;
    for (i, text) in configs.iter().enumerate() {
        let mut cfg = ExperimentConfig::parse(text).map_err(|d| Error::Config(format!("{d:?}")))?;
        let mut csvs = Vec::new();
        for rep in 0..2 {
            cfg.output_dir = root.path().join(format!("{i}-{rep}"));
            let report = harness::run(&cfg)?;
            let bad = report.manifest.verify(&report.output_dir)?;
            c.check(bad.is_empty(), format!("{}: manifest checksums match (run {rep})", cfg.experiment.name()));
            let mut files: Vec<(String, Vec<u8>)> = Vec::new();
            for o in report.manifest.outputs.iter().filter(|o| o.path.ends_with(".csv")) {
                files.push((o.path.clone(), std::fs::read(report.output_dir.join(&o.path))?));
            }
            csvs.push(files);
        }
        let n = csvs[0].len();
        c.check(n > 0 && csvs[0] == csvs[1], format!("{}: {n} CSV files byte-identical", cfg.experiment.name()));
    }
    Ok(())
}
