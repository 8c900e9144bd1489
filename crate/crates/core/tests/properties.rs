//! Cross-module invariants checked on random inputs.

use isac::metrics::{acf, eisl, psd, AcfMode, SymbolSource};
use isac::pcs::{shape, AwgnChannel, ShapingProblem};
use isac::precoding::{ergodic_error, lmmse_error_of, lse_error_of, sample_symbols, CMatrix, ErrorMetric, TirModel};
use isac::pulse::{rrc_pulse, DelayRegion};
use isac::{BasisKind, BasisParams, Complex64, Constellation, ModulationBasis};
use proptest::prelude::*;

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kurtosis_is_at_least_one(probs in prop::collection::vec(0.0f64..1.0, 16)) {
        prop_assume!(probs.iter().sum::<f64>() > 1e-3);
        let total: f64 = probs.iter().sum();
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let c = Constellation::standard("16QAM", Some(probs)).unwrap();
        prop_assert!(c.kurtosis() >= 1.0 - 1e-12);
    }

    #[test]
    fn periodic_acf_transforms_to_psd(x in complex_vec(24)) {
        let r = acf(&x, AcfMode::Periodic).unwrap();
        let p = psd(&x).unwrap();
        let n = x.len();
        for (f, pf) in p.iter().enumerate() {
            let d: Complex64 = r.values().iter().enumerate()
                .map(|(m, v)| v * Complex64::from_polar(1.0, -std::f64::consts::TAU * ((f * m) % n) as f64 / n as f64))
                .sum();
            prop_assert!((d - pf).norm() < 1e-9 * (1.0 + pf.abs()));
        }
    }

    #[test]
    fn modulation_preserves_energy(x in complex_vec(16), k in 0usize..4) {
        let b = ModulationBasis::new(BasisKind::ALL[k], 16, BasisParams::default()).unwrap();
        let y = b.modulate(&x).unwrap().time_samples;
        let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((ex - ey).abs() < 1e-9 * (1.0 + ex));
    }

    #[test]
    fn lmmse_never_exceeds_lse(seed in 0u64..10_000, gamma in 0.01f64..100.0, s2 in 0.01f64..10.0) {
        let x = sample_symbols(&SymbolSource::Gaussian, 3, 5, seed);
        let m = TirModel { n_tx: 3, n_rx: 2, noise_var: s2, prior_var: Some(gamma), frame_len: 5 };
        let a = lmmse_error_of(&x, &m).unwrap();
        let b = lse_error_of(&x, &m).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12), "LMMSE {} > LSE {}", a, b);
    }

    #[test]
    fn rrc_region_islr_is_finite_and_negative(beta in 0.05f64..1.0) {
        let p = rrc_pulse(1.0, beta, 8, 16).unwrap();
        let v = p.region_islr_db(&DelayRegion::new(1.0, 6.0).unwrap()).unwrap();
        prop_assert!(v.is_finite() && v < 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ergodic_lse_exceeds_deterministic_bound(seed in 0u64..1000) {
        // By convexity of tr(·⁻¹), any fixed precoder under random data does
        // no better than an orthogonal block with the same total power.
        let (n, l) = (3, 12);
        let w: CMatrix = sample_symbols(&SymbolSource::Gaussian, n, n, seed);
        let p = w.norm_squared();
        let m = TirModel { n_tx: n, n_rx: 2, noise_var: 0.3, prior_var: None, frame_len: l };
        let e = ergodic_error(&w, &m, &SymbolSource::Gaussian, ErrorMetric::Lse, 400, 0.0, seed).unwrap();
        let bound = m.noise_var * 2.0 * (n * n) as f64 / (p * l as f64);
        prop_assert!(e.stats.mean >= bound, "ELSE {} < bound {}", e.stats.mean, bound);
    }
}

#[test]
fn shaped_low_kurtosis_lowers_ofdm_sidelobes() {
    let qam = Constellation::standard("64QAM", None).unwrap();
    let shaped = shape(&ShapingProblem::new(qam.clone(), 1.1, AwgnChannel::from_snr_db(10.0).unwrap())).unwrap();
    let shaped = shaped.constellation(&qam).unwrap();
    assert!(shaped.kurtosis() < qam.kurtosis() - 0.2);
    let b = ModulationBasis::new(BasisKind::Ofdm, 32, BasisParams::default()).unwrap();
    let run = |c: &Constellation| {
        eisl(&b, &SymbolSource::Constellation(c.clone()), 4000, AcfMode::Periodic, 0, f64::INFINITY, 8).unwrap()
    };
    let (u, s) = (run(&qam), run(&shaped));
    let se = (u.std_error().powi(2) + s.std_error().powi(2)).sqrt();
    assert!(u.mean - s.mean > 3.0 * se, "uniform {} shaped {}", u.mean, s.mean);
}

fn sample_kurtosis(kind: BasisKind, n: usize, blocks: usize) -> f64 {
    let b = ModulationBasis::new(kind, n, BasisParams::default()).unwrap();
    let src = SymbolSource::from_label("64QAM").unwrap();
    let mut rng = isac::seed::rng(isac::seed::derive(3, "clt", 0));
    let mut s = vec![Complex64::default(); n];
    let (mut m2, mut m4) = (0.0, 0.0);
    for _ in 0..blocks {
        src.sample_into(&mut rng, &mut s);
        for x in b.modulate(&s).unwrap().time_samples {
            let p = x.norm_sqr();
            m2 += p;
            m4 += p * p;
        }
    }
    let count = (n * blocks) as f64;
    (m4 / count) / (m2 / count).powi(2)
}

#[test]
fn ofdm_samples_approach_gaussian_kurtosis() {
    let ofdm = sample_kurtosis(BasisKind::Ofdm, 256, 10_000);
    let sc = sample_kurtosis(BasisKind::Sc, 256, 10_000);
    assert!(ofdm >= 1.9, "OFDM sample kurtosis {ofdm}");
    assert!((sc - 1.380952).abs() < 0.01, "SC sample kurtosis {sc}");
}

#[test]
fn sc_normalized_sidelobes_follow_one_minus_kurtosis_over_n() {
    // With a = |s|², the normalized SC ISL is 1 − Σa²/(Σa)² up to zero-mean
    // cross terms, so its mean is close to 1 − κ/N: higher kurtosis gives
    // slightly lower normalized sidelobes on SC.
    let n = 32;
    let b = ModulationBasis::new(BasisKind::Sc, n, BasisParams::default()).unwrap();
    for (label, seed) in [("QPSK", 5), ("64QAM", 6)] {
        let src = SymbolSource::from_label(label).unwrap();
        let s = eisl(&b, &src, 10_000, AcfMode::Periodic, 0, f64::INFINITY, seed).unwrap();
        let expected = 1.0 - src.kurtosis() / n as f64;
        assert!((s.mean - expected).abs() < 4.0 * s.std_error() + 2e-3, "{label}: {} vs {expected}", s.mean);
    }
}

#[test]
fn ofdm_sidelobes_grow_with_kurtosis() {
    let b = ModulationBasis::new(BasisKind::Ofdm, 32, BasisParams::default()).unwrap();
    let run = |label: &str| {
        eisl(&b, &SymbolSource::from_label(label).unwrap(), 4000, AcfMode::Periodic, 0, f64::INFINITY, 7).unwrap()
    };
    let (q, m) = (run("QPSK"), run("64QAM"));
    assert!(q.mean < 1e-20);
    assert!(m.mean > q.mean + 3.0 * m.std_error());
}
