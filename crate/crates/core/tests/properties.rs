use hopres::config::RunConfig;
use hopres::ensemble::{sample_coefficients, CoefficientLaw, RandomPotential};
use hopres::limits::{case_classifier, constant_l, sigma2_limit, vanishing_order_d, Case};
use hopres::profiles::Profile;
use hopres::resonances::{resonant_pair, ResonantPair};
use hopres::sobolev::{alpha_matrix, hnorm_spectral, quadratic_form};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use std::sync::OnceLock;

const WELL: &str = "box(-2, 1, 0.2)";

fn well_pairs() -> &'static [ResonantPair; 2] {
    static P: OnceLock<[ResonantPair; 2]> = OnceLock::new();
    P.get_or_init(|| {
        let q0 = Profile::parse(WELL).unwrap();
        [
            resonant_pair(&q0, Complex64::new(0.0, 1.0965003892)).unwrap(),
            resonant_pair(&q0, Complex64::new(0.0, -0.24716)).unwrap(),
        ]
    })
}

#[test]
fn well_pair_is_conjugate_symmetric_up_to_phase() {
    for p in well_pairs() {
        assert!(p.lambda0.re.abs() < 1e-10, "{}", p.lambda0);
        // Real q0 and imaginary λ0 make u₋ real, so f/conj(f) is one phase.
        let peak = p.f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let phase = p.f.iter().find(|z| z.norm() > 0.5 * peak).map(|z| z / z.conj()).unwrap();
        for z in p.f.iter().filter(|z| z.norm() > 1e-6 * peak) {
            assert!((z / z.conj() - phase).norm() < 1e-8, "{z}");
        }
    }
}

#[test]
fn well_residue_matches_pair() {
    for p in well_pairs() {
        let err = p.residue_check(&[0.3], &[-0.7]).unwrap();
        assert!(err < 1e-6, "λ0 = {}: {err:e}", p.lambda0);
    }
}

#[test]
fn case_three_limit_is_i_times_l_for_free_pair() {
    let pair = ResonantPair::free();
    for q in ["d1(psi)", "d2(psi)", "d1(affine(psi, 0, 0.5))"] {
        let q = Profile::parse(q).unwrap();
        let l = constant_l(&q, &pair, 1).unwrap();
        let s = sigma2_limit(Case::III, &q, &pair, 1).unwrap();
        // The limit of N²(λ_N − λ₀) carries the factor i in front of L.
        assert!(l.im.abs() < 1e-14 && l.re > 0.0);
        assert!((Complex64::i() * l - s).norm() <= 1e-10 * l.norm(), "{l} vs {s}");
    }
}

const PROFILES: [&str; 5] = ["psi", "d1(psi)", "d2(psi)", "affine(psi, 0.3, 0.5)", "lincomb(psi + 2*d1(psi))"];

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

    #[test]
    fn parseval_alpha_vs_spectral(k in 0usize..5, n in 1usize..=32, s in prop::sample::select(vec![1.0, 2.0]), seed in any::<u64>()) {
        let q = Profile::parse(PROFILES[k]).unwrap();
        let u = sample_coefficients(&CoefficientLaw::Rademacher, n, 1, seed).unwrap();
        let a = alpha_matrix(&q, n, 1, s).unwrap();
        let qf = quadratic_form(&a, &u).unwrap();
        let h = hnorm_spectral(&RandomPotential::new(Profile::zero(), q, u), s).unwrap();
        prop_assert!((h * h - qf).abs() <= 1e-6 * qf.abs(), "{} vs {}", h * h, qf);
    }

    #[test]
    fn classifier_is_total_on_free_pair(c in prop::collection::vec(-2.0f64..2.0, 3)) {
        prop_assume!(c.iter().any(|x| x.abs() > 1e-3));
        let atoms = ["psi", "d1(psi)", "d2(psi)"].map(|t| Profile::parse(t).unwrap());
        let terms: Vec<_> = c.iter().zip(atoms).map(|(&x, p)| (Complex64::new(x, 0.0), p)).collect();
        let q = Profile::lincomb(&terms).unwrap();
        let case = case_classifier(1, &q, &ResonantPair::free()).unwrap();
        let m = vanishing_order_d(&q, 1).unwrap();
        // The free pair has (fg)′ ≡ 0, so case II never occurs.
        prop_assert_eq!(case, if m == 0 { Case::I } else { Case::III });
    }

    #[test]
    fn config_round_trip(entries in prop::collection::btree_map("[a-z][a-z0-9_]{0,8}", "[A-Za-z0-9(),.*+ -]{0,20}", 0..8)) {
        let mut cfg = RunConfig::new("case-study");
        for (k, v) in &entries {
            if k != "subcommand" {
                cfg.set(k, v.trim());
            }
        }
        let back = RunConfig::parse_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.digest(), cfg.digest());
        prop_assert_eq!(back, cfg);
    }
}
