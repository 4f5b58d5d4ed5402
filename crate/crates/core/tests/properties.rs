use maxent_core::bounds::entropy_gap_identity;
use maxent_core::channels::{apply, contraction_check, random_channel};
use maxent_core::io::{parse_state, ProblemFile, StateFile};
use maxent_core::linalg::{relative_entropy, trace_norm_distance, von_neumann_entropy};
use maxent_core::moments::{moment_map, support_function};
use maxent_core::{max_entropy, random, ConstraintSet, SolverOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn constraints(d: usize, k: usize, r: &mut ChaCha8Rng) -> ConstraintSet {
    ConstraintSet::new((0..k).map(|_| random::hermitian(d, r)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn entropy_between_zero_and_log_dim(seed: u64, d in 1usize..7, pure: bool) {
        let mut r = rng(seed);
        let rho = if pure { random::pure_state(d, &mut r) } else { random::state(d, &mut r) };
        let s = von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12);
        prop_assert!(s <= (d as f64).ln() + 1e-12);
        if pure {
            prop_assert!(s <= 1e-9);
        }
    }

    #[test]
    fn relative_entropy_dominates_pinsker(seed: u64, d in 1usize..7) {
        let mut r = rng(seed);
        let rho = random::state(d, &mut r);
        let sigma = random::state(d, &mut r);
        let dist = relative_entropy(&rho, &sigma).unwrap();
        let t = trace_norm_distance(&rho, &sigma).unwrap();
        prop_assert!(dist >= -1e-12);
        prop_assert!(dist + 1e-10 >= 0.5 * t * t);
        prop_assert!(relative_entropy(&rho, &rho).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn trace_distance_is_a_metric(seed: u64, d in 1usize..6) {
        let mut r = rng(seed);
        let a = random::state(d, &mut r);
        let b = random::state(d, &mut r);
        let c = random::pure_state(d, &mut r);
        let ab = trace_norm_distance(&a, &b).unwrap();
        prop_assert!((ab - trace_norm_distance(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(ab <= 2.0 + 1e-12);
        prop_assert!(trace_norm_distance(&a, &a).unwrap() <= 1e-12);
        let ac = trace_norm_distance(&a, &c).unwrap();
        let cb = trace_norm_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn moments_lie_under_support_function(seed: u64, d in 2usize..6, k in 1usize..4, scale in 0.1f64..10.0) {
        let mut r = rng(seed);
        let cs = constraints(d, k, &mut r);
        let lambda = random::real_unit_vector(k, &mut r);
        let h = support_function(&cs, &lambda).unwrap();
        let scaled: Vec<f64> = lambda.iter().map(|x| scale * x).collect();
        prop_assert!((support_function(&cs, &scaled).unwrap() - scale * h).abs() <= 1e-9 * (1.0 + scale * h.abs()));
        for _ in 0..4 {
            let m = moment_map(&random::pure_state(d, &mut r), &cs).unwrap();
            let inner: f64 = lambda.iter().zip(m.values()).map(|(l, v)| l * v).sum();
            prop_assert!(inner <= h + 1e-10);
        }
    }

    #[test]
    fn channels_preserve_trace_and_contract(seed: u64, din in 1usize..5, dout in 1usize..5, extra in 0usize..3) {
        let mut r = rng(seed);
        let env = din.div_ceil(dout) + extra;
        let channel = random_channel(din, dout, env, seed).unwrap();
        prop_assert!(channel.completeness_residual() <= 1e-10);
        let rho = random::state(din, &mut r);
        let sigma = random::state(din, &mut r);
        let out = apply(&channel, &rho).unwrap();
        prop_assert_eq!(out.dim(), dout);
        prop_assert!((out.matrix().trace().re - 1.0).abs() <= 1e-10);
        prop_assert!(out.eigenvalues().min() >= -1e-10);
        prop_assert!(contraction_check(&channel, &rho, &sigma).unwrap().holds(1e-10));
    }

    #[test]
    fn gibbs_state_maximizes_entropy(seed: u64, d in 2usize..5, k in 1usize..4) {
        let mut r = rng(seed);
        let cs = constraints(d, k, &mut r);
        let rho = random::state(d, &mut r);
        let m = moment_map(&rho, &cs).unwrap();
        let sol = max_entropy(&cs, &m, &SolverOptions::default()).unwrap();
        prop_assert!(sol.is_interior());
        prop_assert!(moment_map(&sol.sigma, &cs).unwrap().distance(&m) <= 1e-8);
        prop_assert!(sol.entropy + 1e-9 >= von_neumann_entropy(&rho));
        let check = entropy_gap_identity(&cs, &rho, &sol, &m).unwrap();
        prop_assert!(check.residual <= 1e-8);
    }

    #[test]
    fn state_files_round_trip_bitwise(seed: u64, d in 1usize..6) {
        let mut r = rng(seed);
        let rho = random::state(d, &mut r);
        let file = StateFile::from_state(&rho);
        let text = serde_json::to_string(&file).unwrap();
        let back: StateFile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &file);
        let parsed = parse_state(&text).unwrap();
        prop_assert!(trace_norm_distance(&parsed, &rho).unwrap() <= 1e-12);
    }

    #[test]
    fn problem_files_round_trip_bitwise(seed: u64, d in 1usize..5, k in 1usize..4) {
        let mut r = rng(seed);
        let cs = constraints(d, k, &mut r);
        let m = moment_map(&random::state(d, &mut r), &cs).unwrap();
        let file = ProblemFile::from_constraints(&cs, &m);
        let text = serde_json::to_string(&file).unwrap();
        let back = ProblemFile::parse(&text).unwrap();
        prop_assert_eq!(&back, &file);
        let problem = back.validate().unwrap();
        prop_assert_eq!(problem.target.values(), m.values());
    }

    #[test]
    fn parsers_reject_without_panicking(text in "\\PC{0,200}") {
        let _ = parse_state(&text);
        let _ = maxent_core::io::parse_problem(&text);
        let _ = maxent_core::io::parse_channel(&text);
        let _ = maxent_core::io::ResultFile::parse(&text);
    }
}
