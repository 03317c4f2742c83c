use cpte_core::data::Arm;
use cpte_core::policy::Policy;
use cpte_core::stats::{mean, pearson, sigmoid};
use cpte_core::synthgen::{
    gen_hierarchical, generate, iman_conover, oracle_value, HierarchicalConfig, OracleDgp, SyntheticConfig,
};
use cpte_core::Matrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_x(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
    x.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    x.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    x
}

#[test]
fn homogeneous_win_rate_against_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let simple = Normal::new(0.3, 0.2).unwrap();
    let low = Normal::new(0.0, 0.2).unwrap();
    let high = Normal::new(3.0, 0.2).unwrap();
    let pairs = 2_000_000;
    let mut wins = 0usize;
    for _ in 0..pairs {
        let a = simple.sample(&mut rng);
        let b = if rng.random_bool(0.85) { low.sample(&mut rng) } else { high.sample(&mut rng) };
        wins += (a > b) as usize;
    }
    let mc = wins as f64 / pairs as f64;
    let o = SyntheticConfig::new(10, 0).oracle();
    let x = random_x(&mut rng);
    assert!((o.q_w(&x) - 0.7273).abs() < 5e-4);
    assert!((o.q_w(&x) - mc).abs() < 1e-3, "{} vs {mc}", o.q_w(&x));
}

#[test]
fn hierarchical_closed_form_against_monte_carlo() {
    let cfg = HierarchicalConfig::new(10, 0);
    let coef = cfg.coefficients();
    let o = cfg.oracle();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let x = random_x(&mut rng);
        let draw = |arm: usize, rng: &mut ChaCha8Rng| -> (f64, f64) {
            let p = sigmoid(
                coef.gamma0[arm] + coef.gamma[arm].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>(),
            );
            let m = coef.eta0[arm] + coef.eta[arm].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            let primary = if rng.random_bool(p) { 1.0 } else { 0.0 };
            (primary, Normal::new(m, coef.s).unwrap().sample(rng))
        };
        let pairs = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..pairs {
            let a = draw(1, &mut rng);
            let b = draw(0, &mut rng);
            acc += if a.0 != b.0 {
                (a.0 > b.0) as u8 as f64
            } else if a.1 != b.1 {
                (a.1 > b.1) as u8 as f64
            } else {
                0.5
            };
        }
        let mc = acc / pairs as f64;
        assert!((o.q_w(&x) - mc).abs() < 2e-3, "{} vs {mc}", o.q_w(&x));
    }
}

#[test]
fn preference_and_mean_disagree_everywhere_on_homogeneous() {
    let o = SyntheticConfig::new(10, 0).oracle();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x = random_x(&mut rng);
        assert!((o.q_w(&x) - 0.5).signum() != o.cate(&x).signum());
    }
}

#[test]
fn heterogeneous_optimal_value() {
    let cfg = SyntheticConfig {
        heterogeneous: true,
        ..SyntheticConfig::new(10_000, 4)
    };
    let g = generate(&cfg).unwrap();
    let o = cfg.oracle();
    let v = o.optimal_value(g.x());
    assert!((v - 0.727).abs() < 0.005, "{v}");
    assert!((v - 0.72).abs() < 0.01);
    let treat_all = Policy::Constant { treat: true };
    let all = oracle_value(&o, &treat_all, g.x());
    assert!(all < v - 0.1);
}

#[test]
fn constant_policy_value_is_win_rate_on_homogeneous() {
    let cfg = SyntheticConfig::new(500, 5);
    let g = generate(&cfg).unwrap();
    let o = cfg.oracle();
    let v = oracle_value(&o, &Policy::Constant { treat: true }, g.x());
    assert!((v - o.q_w(g.x().row(0))).abs() < 1e-12);
}

#[test]
fn heterogeneous_simple_arm_follows_modifier() {
    let cfg = SyntheticConfig {
        heterogeneous: true,
        ..SyntheticConfig::new(40_000, 6)
    };
    let g = generate(&cfg).unwrap();
    let OracleDgp::Mixture(m) = cfg.oracle() else { panic!() };
    let resid: Vec<f64> = (0..cfg.n)
        .filter(|&i| g.x().get(i, 8) == 1.0)
        .map(|i| g.y1.get(i, 0) - m.baseline(g.x().row(i)))
        .collect();
    let mu = mean(&resid);
    let sd = (resid.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / resid.len() as f64).sqrt();
    assert!((mu - 0.3).abs() < 0.01 && (sd - 0.2).abs() < 0.01, "{mu} {sd}");
    assert!(m.simple_on(g.x().row(0), Arm::Treated) == (g.x().get(0, 8) == 1.0));
}

fn pair_correlation(a: Vec<f64>, b: Vec<f64>, seed: u64) -> f64 {
    let n = a.len();
    let m = Matrix::from_vec(a.into_iter().zip(b).flat_map(|(u, v)| [u, v]).collect(), 2).unwrap();
    let out = iman_conover(&m, 0.5, seed).unwrap();
    assert_eq!(out.nrows(), n);
    pearson(&out.column(0), &out.column(1))
}

#[test]
fn rank_reordering_on_star_like_marginals() {
    // marginals taken from the hierarchical generator: binary primary, Gaussian secondary
    let g = gen_hierarchical(&HierarchicalConfig::new(4000, 7)).unwrap();
    let rb = pair_correlation(g.y0.column(0), g.y1.column(0), 8);
    let rc = pair_correlation(g.y0.column(1), g.y1.column(1), 9);
    assert!((rb - 0.28).abs() < 0.05, "binary {rb}");
    assert!((rc - 0.47).abs() < 0.05, "continuous {rc}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observed_outcome_is_the_assigned_potential_outcome(
        seed in 0u64..10_000,
        het in any::<bool>(),
        obs in any::<bool>(),
        rho in prop_oneof![Just(0.0), Just(0.5), Just(-0.5)],
        hier in any::<bool>(),
    ) {
        let g = if hier {
            let mut c = HierarchicalConfig::new(60, seed);
            c.observational = obs;
            gen_hierarchical(&c).unwrap()
        } else {
            let c = SyntheticConfig { heterogeneous: het, observational: obs, correlation_target: rho, ..SyntheticConfig::new(60, seed) };
            generate(&c).unwrap()
        };
        for i in 0..60 {
            let src = if g.data.t[i] { &g.y1 } else { &g.y0 };
            prop_assert_eq!(g.data.y.row(i), src.row(i));
            prop_assert!((0.05..=0.95).contains(&g.true_propensity[i]));
        }
        let (a, b) = g.data.arm_sizes();
        prop_assert!(a > 0 && b > 0);
    }

    #[test]
    fn oracle_probabilities_are_complementary(seed in 0u64..10_000, het in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_x(&mut rng);
        let mix = SyntheticConfig { heterogeneous: het, ..SyntheticConfig::new(10, seed) }.oracle();
        let hier = HierarchicalConfig::new(10, seed).oracle();
        for o in [mix, hier] {
            let (w, l) = (o.q_w(&x), o.q_l(&x));
            prop_assert!((w + l - 1.0).abs() < 1e-12);
            prop_assert_eq!(o.optimal_action(&x), w > l);
        }
    }
}
