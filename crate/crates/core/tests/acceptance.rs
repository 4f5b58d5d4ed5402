//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use maxent_core::bounds::{
    fannes_audenaert, observable_rate, pinsker_exact_rate, pinsker_mixed_rate, BOUND_SLACK,
};
use maxent_core::channels::{adjoint_apply, adjoint_norm_check, apply, contraction_check, random_channel};
use maxent_core::dual::{
    dual_gradient, dual_hessian, log_partition, max_entropy, solve_interior, SolutionKind, SolverOptions,
};
use maxent_core::harness::{adversarial_sequence, run_convergence, sequence_rows, SequenceKind, SequenceConfig};
use maxent_core::io::{CertificateSection, ResultFile, SolutionSection};
use maxent_core::linalg::{
    relative_entropy, trace_norm_distance, trace_of_product, von_neumann_entropy, DensityMatrix,
    HermitianOperator,
};
use maxent_core::moments::{check_feasibility, moment_map, ConstraintSet, FeasibilityStatus, MomentVector};
use maxent_core::random;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_constraints(rng: &mut ChaCha8Rng, dims: &[usize], ks: &[usize]) -> ConstraintSet {
    let d = dims[rng.random_range(0..dims.len())];
    let k = ks[rng.random_range(0..ks.len())];
    ConstraintSet::new((0..k).map(|_| random::hermitian(d, rng)).collect()).unwrap()
}

/// Constraints plus moments of a random full-rank state, which lie in the
/// interior of the moment body.
fn interior_instance(
    rng: &mut ChaCha8Rng,
    dims: &[usize],
    ks: &[usize],
) -> (ConstraintSet, MomentVector) {
    let cs = random_constraints(rng, dims, ks);
    let m = moment_map(&random::state(cs.dim(), rng), &cs).unwrap();
    (cs, m)
}

fn binary_entropy(p: f64) -> f64 {
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

fn c1_exact_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let opts = SolverOptions::default();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let (cs, m) = interior_instance(&mut rng, &[2, 3, 4, 8], &[1, 2, 3]);
        let sol = solve_interior(&cs, &m, &opts).map_err(|e| e.to_string())?;
        let rho = random::state(cs.dim(), &mut rng);
        let lhs = relative_entropy(&rho, &sol.sigma).unwrap();
        let dm = moment_map(&rho, &cs).unwrap().difference(&m);
        let rhs = von_neumann_entropy(&sol.sigma) - von_neumann_entropy(&rho)
            + sol.lambda.iter().zip(&dm).map(|(l, x)| l * x).sum::<f64>();
        worst = worst.max((lhs - rhs).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-8, || format!("max residual {worst:e} > 1e-8"))?;
    ensure(secs <= 30.0, || format!("took {secs:.1} s > 30 s"))?;
    Ok(format!("max residual {worst:.2e} over 500 instances in {secs:.2} s"))
}

fn c2_qubit_closed_form() -> Outcome {
    let cs = ConstraintSet::new(vec![HermitianOperator::pauli_z()]).unwrap();
    let sol = max_entropy(&cs, &vec![0.5].into(), &SolverOptions::default()).map_err(|e| e.to_string())?;
    let lambda_err = (sol.lambda[0] + 0.5f64.atanh()).abs();
    let dist = trace_norm_distance(&sol.sigma, &DensityMatrix::diagonal(&[0.75, 0.25]).unwrap()).unwrap();
    let s_err = (sol.entropy - binary_entropy(0.75)).abs();
    ensure(lambda_err <= 1e-8, || format!("lambda error {lambda_err:e}"))?;
    ensure(dist <= 1e-8, || format!("sigma distance {dist:e}"))?;
    ensure(s_err <= 1e-6 && (sol.entropy - 0.562335).abs() <= 1e-6, || {
        format!("entropy {} vs 0.562335", sol.entropy)
    })?;
    Ok(format!(
        "lambda {:.9} (err {lambda_err:.1e}), sigma err {dist:.1e}, S {:.6}",
        sol.lambda[0], sol.entropy
    ))
}

fn c3_dual_calculus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let h = 1e-5;
    let (mut g_worst, mut h_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let cs = random_constraints(&mut rng, &[2, 3, 4], &[1, 2, 3]);
        let k = cs.len();
        let lambda: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = dual_gradient(&cs, &lambda).unwrap();
        let hess = dual_hessian(&cs, &lambda).unwrap();
        for i in 0..k {
            let mut up = lambda.clone();
            let mut dn = lambda.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (log_partition(&cs, &up).unwrap() - log_partition(&cs, &dn).unwrap()) / (2.0 * h);
            g_worst = g_worst.max((fd - grad[i]).abs());
            let gu = dual_gradient(&cs, &up).unwrap();
            let gd = dual_gradient(&cs, &dn).unwrap();
            for j in 0..k {
                let fd = (gu[j] - gd[j]) / (2.0 * h);
                h_worst = h_worst.max((fd - hess[(j, i)]).abs());
            }
        }
    }
    ensure(g_worst <= 1e-6, || format!("gradient error {g_worst:e}"))?;
    ensure(h_worst <= 1e-4, || format!("Hessian error {h_worst:e}"))?;
    Ok(format!("gradient err {g_worst:.1e}, Hessian err {h_worst:.1e} over 100 draws"))
}

fn c4_maximality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let opts = SolverOptions::default();
    let mut worst = f64::NEG_INFINITY;
    let mut sampled = 0;
    for _ in 0..100 {
        let (cs, m) = interior_instance(&mut rng, &[2, 3, 4], &[1, 2, 3]);
        let sol = solve_interior(&cs, &m, &opts).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let strength = rng.random_range(0.01..1.0);
            let Some(rho) = cs.perturb_within(&sol.sigma, strength, &mut rng) else {
                break;
            };
            let drift = moment_map(&rho, &cs).unwrap().distance(&sol.achieved_moments);
            ensure(drift <= 1e-10, || format!("perturbation moved moments by {drift:e}"))?;
            worst = worst.max(von_neumann_entropy(&rho) - sol.entropy);
            sampled += 1;
        }
    }
    ensure(sampled >= 1000, || format!("only {sampled} states sampled"))?;
    ensure(worst <= 1e-7, || format!("sampled entropy exceeds S(sigma) by {worst:e}"))?;
    Ok(format!("{sampled} states in C(m), max S(rho) - S(sigma) = {worst:.2e}"))
}

fn c5_pinsker_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let opts = SolverOptions::default();
    let (mut evals, mut violations, mut feasible) = (0, 0, 0);
    while evals < 2000 {
        let (cs, m) = interior_instance(&mut rng, &[2, 3, 4], &[1, 2, 3]);
        let sol = solve_interior(&cs, &m, &opts).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let on_slice = rng.random_bool(0.5);
            let rho = if on_slice {
                match cs.perturb_within(&sol.sigma, rng.random_range(0.0..1.0), &mut rng) {
                    Some(r) => r,
                    None => continue,
                }
            } else if rng.random_bool(0.5) {
                random::state(cs.dim(), &mut rng)
            } else {
                let tau = random::state(cs.dim(), &mut rng);
                sol.sigma.mix(&tau, rng.random_range(0.0..0.2)).unwrap()
            };
            let dist = trace_norm_distance(&rho, &sol.sigma).unwrap();
            let mut bounds = vec![pinsker_mixed_rate(&cs, &rho, &sol, &m).unwrap()];
            if on_slice {
                bounds.push(pinsker_exact_rate(&cs, &rho, &sol).unwrap());
                feasible += 1;
            }
            for b in bounds {
                if !(dist <= b + BOUND_SLACK) {
                    violations += 1;
                }
            }
            // observable in span{I, X_i}, scaled to unit norm
            let coeffs: Vec<f64> = (0..cs.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = HermitianOperator::linear_combination(&coeffs, cs.observables(), cs.dim());
            let shifted = HermitianOperator::new(
                a.matrix() + HermitianOperator::identity(cs.dim()).matrix() * Complex64::new(rng.random_range(-1.0..1.0), 0.0),
            )
            .unwrap();
            let norm = shifted.operator_norm().unwrap();
            if norm > 0.0 {
                let check = observable_rate(&cs, &rho, &sol, &m, &shifted.scale(1.0 / norm)).unwrap();
                if !(check.lhs <= check.bound + BOUND_SLACK) {
                    violations += 1;
                }
            }
            evals += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations in {evals} evaluations"))?;
    Ok(format!("{evals} evaluations ({feasible} in C(m)), 0 violations"))
}

fn c6_fannes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..2000 {
        let d = 2 + i % 7;
        let a = random::state(d, &mut rng);
        let b = if rng.random_bool(0.3) {
            random::pure_state(d, &mut rng)
        } else {
            random::state(d, &mut rng)
        };
        let c = fannes_audenaert(&a, &b).unwrap();
        worst = worst.max(c.entropy_diff - c.bound);
    }
    ensure(worst <= BOUND_SLACK, || format!("violation by {worst:e}"))?;
    let eq = fannes_audenaert(&DensityMatrix::basis(2, 0), &DensityMatrix::maximally_mixed(2)).unwrap();
    let ln2 = 2f64.ln();
    ensure((eq.entropy_diff - ln2).abs() <= 1e-9 && (eq.bound - ln2).abs() <= 1e-9, || {
        format!("equality case gives {} vs {}", eq.entropy_diff, eq.bound)
    })?;
    Ok(format!("2000 pairs, max(diff - bound) = {worst:.2e}; equality case both sides ln 2"))
}

fn c7_bloch_grid() -> Outcome {
    let cs = ConstraintSet::new(vec![
        HermitianOperator::pauli_z(),
        HermitianOperator::pauli_x(),
        HermitianOperator::pauli_y(),
    ])
    .unwrap();
    let opts = SolverOptions::default();
    let axis: [f64; 10] = [-1.2, -1.0, -0.8, -0.6, -0.3, 0.0, 0.3, 0.6, 0.8, 1.0];
    let mut counts = [0usize; 3];
    let mut disagreements = Vec::new();
    for &x in &axis {
        for &y in &axis {
            for &z in &axis {
                let r = (x * x + y * y + z * z).sqrt();
                let expected = if (r - 1.0).abs() <= 1e-6 {
                    FeasibilityStatus::Boundary
                } else if r < 1.0 {
                    FeasibilityStatus::Interior
                } else {
                    FeasibilityStatus::Infeasible
                };
                let got = check_feasibility(&cs, &vec![x, y, z].into(), &opts)
                    .map(|v| v.status)
                    .map_err(|e| format!("({x}, {y}, {z}): {e}"))?;
                counts[expected as usize] += 1;
                if got != expected {
                    disagreements.push(format!("({x}, {y}, {z}) {} vs {}", got.as_str(), expected.as_str()));
                }
            }
        }
    }
    ensure(disagreements.is_empty(), || {
        format!("{} disagreements, e.g. {}", disagreements.len(), disagreements[0])
    })?;
    Ok(format!(
        "1000 points agree ({} interior, {} boundary, {} infeasible)",
        counts[0], counts[1], counts[2]
    ))
}

fn c8_boundary_limit() -> Outcome {
    let cs = ConstraintSet::new(vec![HermitianOperator::pauli_z()]).unwrap();
    let sol = max_entropy(&cs, &vec![1.0].into(), &SolverOptions::default()).map_err(|e| e.to_string())?;
    ensure(sol.classification == SolutionKind::BoundaryLimit, || {
        format!("classified {}", sol.classification.as_str())
    })?;
    let dist = trace_norm_distance(&sol.sigma, &DensityMatrix::basis(2, 0)).unwrap();
    ensure(dist <= 1e-5, || format!("distance to |0><0| {dist:e}"))?;
    ensure(sol.entropy <= 1e-5, || format!("entropy {:e}", sol.entropy))?;
    Ok(format!(
        "distance {dist:.1e}, entropy {:.1e}, {} path steps",
        sol.entropy,
        sol.path_trace.len()
    ))
}

fn c9_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let opts = SolverOptions::default();
    let (cs, m) = interior_instance(&mut rng, &[3], &[2]);
    let sol = solve_interior(&cs, &m, &opts).map_err(|e| e.to_string())?;
    let config = SequenceConfig::new(SequenceKind::MixToSigma, 1000, 1.0, 9);
    let rec = run_convergence(&sol, &cs, &m, &config, &opts).map_err(|e| e.to_string())?;
    let last = rec.final_row().unwrap().trace_distance;
    ensure(rec.rows.len() == 1000, || format!("{} rows", rec.rows.len()))?;
    ensure(last <= 2e-3, || format!("final distance {last:e}"))?;
    let bad = rec.domination_violations();
    ensure(bad.is_empty(), || format!("domination fails at rows {bad:?}"))?;

    let states = adversarial_sequence(&sol, &cs, 1000, 19)
        .map_err(|e| e.to_string())?
        .ok_or("no moment-preserving direction")?;
    let rows = sequence_rows(&sol, &cs, &m, &states).unwrap();
    let min_dist = rows.iter().map(|r| r.trace_distance).fold(f64::INFINITY, f64::min);
    let min_gap = rows.iter().map(|r| r.entropy_gap).fold(f64::INFINITY, f64::min);
    let max_moment = rows.iter().map(|r| r.moment_error).fold(0.0, f64::max);
    ensure(min_dist > 0.01, || format!("adversarial distance dropped to {min_dist:e}"))?;
    ensure(min_gap > 0.0, || format!("adversarial entropy gap {min_gap:e}"))?;
    ensure(max_moment <= 1e-8, || format!("adversarial moments off by {max_moment:e}"))?;
    Ok(format!(
        "mix final distance {last:.2e} <= 2e-3, domination holds; adversarial min distance {min_dist:.3}, min entropy gap {min_gap:.2e}"
    ))
}

fn c10_channels() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (mut violations, mut duality): (usize, f64) = (0, 0.0);
    for seed in 0..1000u64 {
        let d: usize = rng.random_range(1..=4);
        let r: usize = rng.random_range(1..=4);
        let e = d.div_ceil(r) + rng.random_range(0..=2);
        let ch = random_channel(d, r, e, seed).map_err(|e| e.to_string())?;
        let rho = random::state(d, &mut rng);
        let sigma = random::state(d, &mut rng);
        if !contraction_check(&ch, &rho, &sigma).unwrap().holds(BOUND_SLACK) {
            violations += 1;
        }
        let b = random::hermitian(r, &mut rng);
        if !adjoint_norm_check(&ch, &b).unwrap().holds(BOUND_SLACK) {
            violations += 1;
        }
        let left = trace_of_product(apply(&ch, &rho).unwrap().matrix(), b.matrix()).re;
        let right = trace_of_product(rho.matrix(), adjoint_apply(&ch, &b).unwrap().operator.matrix()).re;
        duality = duality.max((left - right).abs());
    }
    ensure(violations == 0, || format!("{violations} data-processing violations"))?;
    ensure(duality <= 1e-10, || format!("duality error {duality:e}"))?;
    Ok(format!("1000 channels, 0 violations, max duality error {duality:.1e}"))
}

fn run_cli(args: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_maxent"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

/// Random double with an arbitrary finite bit pattern.
fn any_finite(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = f64::from_bits(rng.random());
        if x.is_finite() {
            return x;
        }
    }
}

fn c11_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let problem = dir.path().join("problem.json");
    std::fs::write(
        &problem,
        r#"{"dim": 3,
            "observables": [
              {"name": "A", "re": [[1, 0.5, 0], [0.5, 0, 0], [0, 0, -1]], "im": [[0, 0.2, 0], [-0.2, 0, 0], [0, 0, 0]]},
              {"name": "B", "re": [[0, 0, 1], [0, 1, 0], [1, 0, 0]]}
            ],
            "target_moments": [0.1, 0.4]}"#,
    )
    .map_err(|e| e.to_string())?;
    let p = problem.to_str().unwrap();
    let runs: [&[&str]; 4] = [
        &["solve", p],
        &["feasibility", p],
        &["converge", p, "--n", "200", "--seed", "7"],
        &["channel-check", p, "--trials", "50", "--seed", "3"],
    ];
    let mut checked = 0;
    for args in runs {
        let mut quiet = args.to_vec();
        quiet.push("--quiet");
        let (c1, a) = run_cli(&quiet)?;
        let (c2, b) = run_cli(&quiet)?;
        ensure(c1 == 0 && c2 == 0, || format!("{args:?} exited {c1}/{c2}"))?;
        ensure(a == b && !a.is_empty(), || format!("{args:?} output differs between runs"))?;
        if args[0] != "converge" {
            let text = String::from_utf8(a).map_err(|e| e.to_string())?;
            let parsed = ResultFile::parse(&text).map_err(|e| e.to_string())?;
            ensure(parsed.to_json().unwrap() == text, || format!("{args:?} result does not round-trip"))?;
        }
        checked += 1;
    }

    // random numeric payloads through the result-file codec
    let mut rng = ChaCha8Rng::seed_from_u64(1011);
    for _ in 0..500 {
        let mut rf = ResultFile::new("solve");
        let v = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| any_finite(rng)).collect::<Vec<f64>>();
        let rows = |rng: &mut ChaCha8Rng| vec![v(rng, 2), v(rng, 2)];
        rf.solution = Some(SolutionSection {
            classification: "interior-converged".into(),
            lambda: v(&mut rng, 3),
            sigma: maxent_core::io::MatrixData { re: rows(&mut rng), im: Some(rows(&mut rng)) },
            log_partition: any_finite(&mut rng),
            entropy: any_finite(&mut rng),
            target_moments: v(&mut rng, 3),
            achieved_moments: v(&mut rng, 3),
            moment_residual: any_finite(&mut rng),
            iterations: rng.random_range(0..1000),
            lambda_diverging: rng.random_bool(0.5),
            path_trace: vec![],
        });
        let special = [f64::INFINITY, f64::NEG_INFINITY, -0.0, 0.0, f64::MIN_POSITIVE, 5e-324];
        rf.certificate = Some(CertificateSection {
            relative_entropy: special[rng.random_range(0..special.len())],
            entropy_gap: any_finite(&mut rng),
            moment_mismatch: v(&mut rng, 3),
            identity_residual: Some(any_finite(&mut rng)),
            pinsker_exact_bound: None,
            pinsker_mixed_bound: Some(special[rng.random_range(0..special.len())]),
            trace_distance: any_finite(&mut rng),
            entropy_difference: any_finite(&mut rng),
            fannes_bound: any_finite(&mut rng),
            observable_rate_bound: Some(any_finite(&mut rng)),
            interior: true,
            violations: vec![],
        });
        let text = rf.to_json().unwrap();
        let back = ResultFile::parse(&text).map_err(|e| e.to_string())?;
        let bits = |r: &ResultFile| -> Vec<u64> {
            let s = r.solution.as_ref().unwrap();
            let c = r.certificate.as_ref().unwrap();
            s.lambda
                .iter()
                .chain(s.sigma.re.iter().flatten())
                .chain(s.sigma.im.iter().flatten().flatten())
                .chain([&s.log_partition, &s.entropy, &s.moment_residual])
                .chain(&s.target_moments)
                .chain(&s.achieved_moments)
                .chain([&c.relative_entropy, &c.entropy_gap, &c.trace_distance, &c.entropy_difference, &c.fannes_bound])
                .chain(&c.moment_mismatch)
                .chain(c.identity_residual.iter())
                .chain(c.pinsker_mixed_bound.iter())
                .chain(c.observable_rate_bound.iter())
                .map(|x| x.to_bits())
                .collect()
        };
        ensure(bits(&back) == bits(&rf), || "numeric payload changed in round trip".into())?;
        ensure(back.to_json().unwrap() == text, || "re-serialization differs".into())?;
    }
    Ok(format!("{checked} commands byte-identical across runs; 500 random result files round-trip bitwise"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("exact entropy identity", c1_exact_identity),
        ("qubit closed form", c2_qubit_closed_form),
        ("dual gradient and Hessian", c3_dual_calculus),
        ("maximality on C(m)", c4_maximality),
        ("Pinsker-type bounds", c5_pinsker_suite),
        ("Fannes-Audenaert", c6_fannes),
        ("Bloch-ball feasibility grid", c7_bloch_grid),
        ("boundary limit", c8_boundary_limit),
        ("trace-norm convergence", c9_convergence),
        ("channel stability", c10_channels),
        ("CLI determinism and round-trip", c11_cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
