//! Consistency between independent parts of the library.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sptraj::continuous::{integrate_master, monte_carlo_average, StepOptions, Unraveling};
use sptraj::counting_stats::{exclusive_density, prob_m_counts, prob_no_counts, CountRecord, QuadratureOptions};
use sptraj::discrete::{closed_form_pair, closed_form_pair_general, counting_step, ConditionalPair, CountRecordDiscrete};
use sptraj::linalg::{self, cr, CMat};
use sptraj::model::{basis_vector, build_collision_exact, discretize_profile, InitialState, PhotonProfile, SystemModel};
use sptraj::oracles::{tla_apriori_state, tla_excitation_probability, tla_no_count_probability, TwoLevelAtomSpec};

/// Three-level ladder `|0⟩ ← |1⟩ ← |2⟩` with a weak drive, started in `|1⟩`
/// so that two counts are possible.
fn ladder() -> SystemModel {
    let mut l = CMat::zeros(3, 3);
    l[(0, 1)] = cr(1.0);
    l[(1, 2)] = cr(2f64.sqrt());
    let mut h = CMat::zeros(3, 3);
    h[(0, 0)] = cr(0.3);
    h[(2, 2)] = cr(-0.2);
    h[(0, 2)] = cr(0.1);
    h[(2, 0)] = cr(0.1);
    SystemModel::new(h, l, InitialState::Pure(basis_vector(3, 1))).unwrap()
}

#[test]
fn ladder_two_count_density_is_the_limit_of_the_collision_model() {
    let m = ladder();
    let p = PhotonProfile::gaussian(1.0, 0.5).unwrap();
    let (t1, t2, t) = (0.6, 1.2, 2.0);
    let record = CountRecord::new(vec![t1, t2], t).unwrap();
    let q = QuadratureOptions {
        intervals: 1024,
        intervals_2d: 64,
    };
    let continuum = exclusive_density(&m, &p, &record, &q).unwrap();
    assert!(continuum > 1e-3, "density {continuum} too small to compare");

    let psi = basis_vector(3, 1);
    let mut errors = Vec::new();
    for tau in [0.02, 0.01, 0.005, 0.0025] {
        let steps = |x: f64| (x / tau).round() as usize;
        let disc = discretize_profile(&p, tau, t).unwrap();
        let blocks = build_collision_exact(&m, tau).unwrap();
        let rec = CountRecordDiscrete::new(vec![steps(t1), steps(t2)], steps(t)).unwrap();
        let pair = closed_form_pair(&rec, &blocks, &disc, &psi).unwrap();
        errors.push((pair.trace() / (tau * tau) - continuum).abs());
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let n = errors.len() as f64;
    let xs: Vec<f64> = (0..errors.len()).map(|k| -(k as f64) * 2f64.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope >= 0.9, "errors {errors:?}, successive orders {orders:?}, fit {slope}");
}

#[test]
fn oracle_matches_counting_statistics() {
    let q = QuadratureOptions::default();
    for profile in [
        PhotonProfile::matched_exponential(1.0).unwrap(),
        PhotonProfile::gaussian(2.0, 0.8).unwrap(),
        PhotonProfile::constant_window(0.2, 2.2).unwrap(),
    ] {
        let spec = TwoLevelAtomSpec::new(1.0, profile.clone()).unwrap();
        let m = spec.model();
        for t in [0.5, 1.5, 3.0] {
            let p0 = prob_no_counts(&m, &profile, t, &q).unwrap();
            let p1 = prob_m_counts(&m, &profile, t, 1, &q).unwrap().value;
            let oracle = tla_no_count_probability(&spec, t).unwrap();
            assert!((p0 - oracle).abs() < 1e-5, "{} t={t}: {p0} vs {oracle}", profile.name());
            assert!((p1 - (1.0 - oracle)).abs() < 1e-5, "{} t={t}: {p1}", profile.name());
        }
    }
}

#[test]
fn oracle_matches_master_equation() {
    for (gamma, profile) in [
        (1.0, PhotonProfile::gaussian(3.0, 0.7).unwrap()),
        (0.6, PhotonProfile::matched_exponential(1.7).unwrap()),
    ] {
        let spec = TwoLevelAtomSpec::new(gamma, profile.clone()).unwrap();
        let path = integrate_master(&spec.model(), &profile, 8.0, 1e-3, 100).unwrap();
        for (t, h) in path.times.iter().zip(&path.states) {
            let want = tla_apriori_state(&spec, *t).unwrap();
            assert!((&h.rho - &want).norm() < 1e-6, "t = {t}");
            assert!(h.rho[(0, 1)].norm() < 1e-12);
        }
    }
}

#[test]
fn apriori_state_is_the_jump_average() {
    let spec = TwoLevelAtomSpec::new(1.0, PhotonProfile::gaussian(1.5, 0.6).unwrap()).unwrap();
    let opts = StepOptions::new(4.0, 1e-3).with_stride(500);
    let mc = monte_carlo_average(Unraveling::Jump, &spec.model(), spec.profile(), &opts, 4000, 17).unwrap();
    for (k, t) in mc.times.iter().enumerate() {
        let p = tla_excitation_probability(&spec, *t).unwrap();
        // ρ11 sits at flattened position 2·(1·2 + 1)
        let se = mc.stderr[k][6];
        assert!((mc.mean[k].rho[(1, 1)].re - p).abs() <= 3.0 * se + 1e-12, "t = {t}");
    }
}

#[test]
fn mixed_start_counting_statistics_average_the_ensemble() {
    let p = PhotonProfile::matched_exponential(1.0).unwrap();
    let base = SystemModel::two_level_atom(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = linalg::random_unit_vector(2, &mut rng);
    let b = linalg::random_unit_vector(2, &mut rng);
    let rho = linalg::outer(&a, &a) * cr(0.25) + linalg::outer(&b, &b) * cr(0.75);
    let mixed = base.with_initial(InitialState::Mixed(rho)).unwrap();
    let q = QuadratureOptions::default();
    let pure = |v| prob_no_counts(&base.with_pure_initial(v).unwrap(), &p, 1.2, &q).unwrap();
    let want = 0.25 * pure(a.clone()) + 0.75 * pure(b.clone());
    assert!((prob_no_counts(&mixed, &p, 1.2, &q).unwrap() - want).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn general_closed_form_matches_recurrence(seed in 0u64..1_000_000, d in 1usize..=3, bits in 0u32..512) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = SystemModel::random(d, 1.0, 1.0, &mut rng);
        let psi = m.initial().as_pure().unwrap().clone();
        let tau = 0.15;
        let disc = discretize_profile(&PhotonProfile::gaussian(0.5, 0.3).unwrap(), tau, 9.0 * tau).unwrap();
        let blocks = build_collision_exact(&m, tau).unwrap();
        let outcomes: Vec<u8> = (0..9).map(|k| ((bits >> k) & 1) as u8).collect();
        let mut pair = ConditionalPair::initial(&psi, disc.tail_weight(0));
        for (k, &o) in outcomes.iter().enumerate() {
            pair = counting_step(&pair, &blocks, disc.xi(k), o);
        }
        let rec = CountRecordDiscrete::from_outcomes(&outcomes).unwrap();
        for closed in [
            closed_form_pair(&rec, &blocks, &disc, &psi).unwrap(),
            closed_form_pair_general(&rec, &blocks, &disc, &psi).unwrap(),
        ] {
            prop_assert!((&closed.alpha - &pair.alpha).norm() < 1e-10);
            prop_assert!((&closed.beta - &pair.beta).norm() < 1e-10);
        }
    }

    #[test]
    fn no_count_probability_is_a_probability(seed in 0u64..1_000_000, d in 1usize..=3, t in 0.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = SystemModel::random(d, 1.0, 0.8, &mut rng);
        let q = QuadratureOptions { intervals: 128, intervals_2d: 16 };
        let p0 = prob_no_counts(&m, &PhotonProfile::gaussian(1.0, 0.5).unwrap(), t, &q).unwrap();
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&p0), "{p0}");
    }
}
