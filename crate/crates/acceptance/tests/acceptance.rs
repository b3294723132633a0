//! Acceptance criteria, one PASS/FAIL line each.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use agler_core::kernel::is_admissible;
use agler_core::linalg::{self, real, CMat, C64, ONE};
use agler_core::opmodel::{
    commutant_dimension, eval_colligation_at_tuple, eval_polynomial, gkvw_default, gkvw_vectors, kv_tuple,
    parrott_pair, parrott_rigidity, parrott_tuple, TestPolynomial,
};
use agler_core::pick::{pick_feasible, pick_solve, PickProblem};
use agler_core::realize::{
    agler_decompose, ample_membership, eval_transfer, lurking_isometry, schur_agler_norm, verify_certificate,
    verify_witness, AglerCertificate, DefectData, FunctionSample, SolverParams, Status, Witness,
};
use agler_core::sampling;
use agler_core::testfn::{extend_aux_finite, verify_identity5};
use agler_core::{HermitianKernel, MultiIndex, PointSample, Preordering};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Everything a suite returned, re-checked at the end.
#[derive(Default)]
struct Returned {
    certificates: Vec<(AglerCertificate, DefectData)>,
    witnesses: Vec<(Witness, DefectData, Preordering)>,
}

type Verdict = Result<String, String>;
type Suite<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn record(returned: &Mutex<Returned>, outcome: &agler_core::DecomposeOutcome, data: &DefectData, pre: &Preordering) {
    let mut r = returned.lock().unwrap();
    if let Some(cert) = outcome.certificate() {
        r.certificates.push((cert.clone(), data.clone()));
    }
    if let Some(w) = outcome.witness() {
        r.witnesses.push((w.clone(), data.clone(), pre.clone()));
    }
}

fn random_binary_below(rng: &mut ChaCha8Rng, d: usize) -> MultiIndex {
    loop {
        let bits: Vec<u32> = (0..d).map(|_| rng.random_range(0..=1)).collect();
        if bits.contains(&1) {
            return MultiIndex::new(bits).unwrap();
        }
    }
}

fn criterion_1(returned: &Mutex<Returned>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let params = SolverParams::default();
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for trial in 0..50 {
        let d = 1 + trial % 3;
        let n = rng.random_range(1..=6);
        let mults: Vec<usize> = (0..d).map(|_| rng.random_range(1..=n)).collect();
        let coll = sampling::random_colligation(&mut rng, sampling::classical_partition(&mults), 1).unwrap();
        let sample = Arc::new(sampling::random_sample(&mut rng, n, d, 0.95).unwrap());
        let phi = FunctionSample::from_fn(sample.clone(), |p| eval_transfer(&coll, p).unwrap()).unwrap();
        let pre = Preordering::classical(d);
        let out = agler_decompose(&phi, &pre, 1.0, &params).unwrap();
        record(returned, &out, &DefectData::from_function(&phi, 1.0).unwrap(), &pre);
        let Some(cert) = out.certificate() else {
            failures.push(format!("trial {trial}: {:?}", out.status()));
            continue;
        };
        let r = lurking_isometry(cert, &phi, params.feas_tol).unwrap();
        let err = sample
            .points()
            .iter()
            .zip(phi.values())
            .map(|(p, v)| linalg::max_abs(&(eval_transfer(&r.colligation, p).unwrap() - v)))
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if err >= 1e-7 {
            failures.push(format!("trial {trial}: round trip {err:.2e}"));
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && elapsed < Duration::from_secs(60),
        format!("50 round trips, worst error {worst:.2e}, {:.1}s {failures:?}", elapsed.as_secs_f64()),
    )
}

fn random_ample(rng: &mut ChaCha8Rng, d: usize) -> Preordering {
    let mut elements = vec![MultiIndex::ones(d)];
    for _ in 0..rng.random_range(0..3) {
        elements.push(random_binary_below(rng, d));
    }
    elements.sort();
    elements.dedup();
    Preordering::new(elements).unwrap()
}

fn criterion_2(returned: &Mutex<Returned>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let params = SolverParams::default();
    let mut disagreements = Vec::new();
    for trial in 0..50 {
        let d = 1 + trial % 3;
        let n = rng.random_range(2..=5);
        let sample = Arc::new(sampling::random_sample(&mut rng, n, d, 0.9).unwrap());
        let m = 1 + trial % 2;
        let phi = FunctionSample::new(sample, (0..n).map(|_| sampling::ginibre(&mut rng, m, m) * real(0.5)).collect())
            .unwrap();
        let pre = random_ample(&mut rng, d);
        let bracket = schur_agler_norm(&phi, &pre, 1e-6, &params).unwrap();
        for c in [bracket.lo - 1e-4, bracket.hi + 1e-4] {
            if c <= 0.0 {
                continue;
            }
            let member = ample_membership(&phi, &pre, c, params.feas_tol).unwrap().member;
            let out = agler_decompose(&phi, &pre, c, &params).unwrap();
            record(returned, &out, &DefectData::from_function(&phi, c).unwrap(), &pre);
            if member != (out.status() == Status::Feasible) || out.status() == Status::Unresolved {
                disagreements.push(format!("trial {trial} c={c:.6}: member {member}, {:?}", out.status()));
            }
        }
    }
    check(disagreements.is_empty(), format!("100 levels on 50 instances {disagreements:?}"))
}

fn criterion_3(returned: &Mutex<Returned>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let params = SolverParams::default();
    let ample = Preordering::standard_ample(3);
    let nearly: Vec<Preordering> =
        [(0, 1), (0, 2), (1, 2)].iter().map(|&(i, j)| Preordering::standard_nearly_ample(3, i, j).unwrap()).collect();
    let mut failures = Vec::new();
    let mut gaps = Vec::new();
    for trial in 0..10 {
        let n = rng.random_range(2..=4);
        let sample = Arc::new(sampling::random_sample(&mut rng, n, 3, 0.9).unwrap());
        let phi =
            FunctionSample::scalar(sample, (0..n).map(|_| sampling::disk_point(&mut rng, 1.0)).collect()).unwrap();
        let a = schur_agler_norm(&phi, &ample, 1e-4, &params).unwrap();
        for (k, na) in nearly.iter().enumerate() {
            let b = schur_agler_norm(&phi, na, 1e-4, &params).unwrap();
            let gap = (b.lo - a.hi).max(a.lo - b.hi);
            gaps.push(gap);
            if gap > 1e-3 || !b.unresolved.is_empty() {
                failures.push(format!("trial {trial} Λna{k}: [{:.4},{:.4}] vs [{:.4},{:.4}]", a.lo, a.hi, b.lo, b.hi));
            }
            let c = 0.5 * (a.hi + b.lo.max(a.hi));
            let fa = ample_membership(&phi, &ample, c, params.feas_tol).unwrap().member;
            let out = agler_decompose(&phi, na, c, &params).unwrap();
            record(returned, &out, &DefectData::from_function(&phi, c).unwrap(), na);
            if fa != (out.status() == Status::Feasible) {
                failures.push(format!("trial {trial} Λna{k} c={c:.4}: ample {fa}, nearly {:?}", out.status()));
            }
        }
    }
    let worst = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    check(
        failures.is_empty(),
        format!(
            "worst interval gap {worst:.4}, {} mismatches, first {:?}",
            failures.len(),
            &failures[..failures.len().min(4)]
        ),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=5);
        let sample = Arc::new(sampling::random_sample(&mut rng, n, d, 0.95).unwrap());
        let lambda = random_binary_below(&mut rng, d);
        let rank = rng.random_range(1..=n);
        let g = sampling::ginibre(&mut rng, n, rank);
        let k = HermitianKernel::scalar(sample.clone(), &g * g.adjoint()).unwrap();
        worst = worst.max(verify_identity5(&sample, &lambda, &k).unwrap());
    }
    check(worst < 1e-9, format!("100 instances, worst residual {worst:.2e}"))
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut g_norm, mut residual, mut least) = (0.0_f64, 0.0_f64, f64::INFINITY);
    let mut errors = Vec::new();
    for trial in 0..50 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=5);
        let sample = Arc::new(sampling::random_sample(&mut rng, n, d, 0.9).unwrap());
        let pre = random_ample(&mut rng, d);
        let lambda = random_binary_below(&mut rng, d);
        match extend_aux_finite(&sample, &lambda, &pre) {
            Ok(ext) => {
                g_norm = g_norm.max(ext.g_norm);
                residual = residual.max(ext.compressed_residual);
                least = least.min(ext.defect_min_eigenvalue);
            }
            Err(e) => errors.push(format!("trial {trial}: {e}")),
        }
    }
    check(
        errors.is_empty() && g_norm <= 1.0 + 1e-9 && residual < 1e-8 && least >= -1e-8,
        format!("max ‖G‖ {g_norm:.12}, residual {residual:.2e}, least eigenvalue {least:.2e} {errors:?}"),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let d = rng.random_range(1..=3);
        let q = rng.random_range(1..=6);
        let mults: Vec<usize> = (0..d).map(|_| rng.random_range(0..=3)).collect();
        let io = rng.random_range(1..=2);
        let coll = sampling::random_colligation(&mut rng, sampling::classical_partition(&mults), io).unwrap();
        let t = sampling::random_commuting_tuple(&mut rng, d, q).unwrap();
        worst = worst.max(eval_colligation_at_tuple(&coll, &t, false).unwrap().norm);
    }
    check(worst <= 1.0 + 1e-9, format!("500 pairs, max norm {worst:.15}"))
}

/// `p(T)` by explicit products, independent of the polynomial evaluator.
fn kv_polynomial_direct(t: &[CMat]) -> CMat {
    let (a, b, c) = (&t[0], &t[1], &t[2]);
    a * a + b * b + c * c - (a * b + b * c + c * a) * real(2.0)
}

fn criterion_7() -> Verdict {
    let r = 0.999;
    let scaled: Vec<CMat> = kv_tuple().matrices().iter().map(|m| m * real(r)).collect();
    let operator = linalg::spectral_norm(&kv_polynomial_direct(&scaled));
    let through_lib = linalg::spectral_norm(
        &eval_polynomial(&TestPolynomial::kaijser_varopoulos(), &kv_tuple().scaled(r).unwrap()).unwrap(),
    );
    let steps = 60;
    let angle = |k: usize| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / steps as f64);
    let mut grid = 0.0_f64;
    for i in 0..steps {
        for j in 0..steps {
            for k in 0..steps {
                let (z1, z2, z3) = (angle(i), angle(j), angle(k));
                let p = z1 * z1 + z2 * z2 + z3 * z3 - (z1 * z2 + z2 * z3 + z3 * z1) * 2.0;
                grid = grid.max(p.norm());
            }
        }
    }
    check(
        operator > 1.01 * grid && (operator - through_lib).abs() < 1e-12,
        format!("‖p(rT)‖ = {operator:.6}, torus grid max {grid:.6}, margin {:.2}%", 100.0 * (operator / grid - 1.0)),
    )
}

fn criterion_8() -> Verdict {
    let mut issues = Vec::new();
    let p = agler_core::opmodel::parrott_default();
    if p.max_commutator() != 0.0 {
        issues.push("parrott commutators".to_string());
    }
    let (u, v) = parrott_pair();
    let anti = linalg::max_abs(&(&u * &v + &v * &u));
    if anti >= 1e-12 {
        issues.push(format!("parrott anticommutation {anti:.2e}"));
    }
    if commutant_dimension(&p) != 1 {
        issues.push("parrott commutant".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut least = f64::INFINITY;
    for _ in 0..100 {
        let w = sampling::random_unitary(&mut rng, 2);
        let (uw, vw) = (&w * &u * w.adjoint(), &w * &v * w.adjoint());
        let outer = rng.random_range(1..=4);
        let sigma = parrott_rigidity(&uw, &vw, outer).unwrap();
        // A random candidate (a, b, c) has residual at least σ_min times its size; only zero solves the system.
        let a = sampling::ginibre(&mut rng, outer, 2);
        let b = sampling::ginibre(&mut rng, outer, 2);
        let c = sampling::ginibre(&mut rng, outer, 2);
        let res =
            ((&a * &uw - &b).norm_squared() + (&a * &vw - &c).norm_squared() + (&b * &vw - &c * &uw).norm_squared())
                .sqrt();
        let size = (a.norm_squared() + b.norm_squared() + c.norm_squared()).sqrt();
        if res < sigma * size * (1.0 - 1e-12) {
            issues.push("candidate below the rigidity bound".into());
        }
        let tuple = parrott_tuple(&uw, &vw).unwrap();
        if tuple.max_commutator() > 1e-12 {
            issues.push("conjugated parrott tuple fails to commute".into());
        }
        least = least.min(sigma);
    }
    if !(least > 1e-8) {
        issues.push(format!("forced-zero algebra not rigid: σ_min {least:.2e}"));
    }

    let g = gkvw_default();
    let vecs = gkvw_vectors();
    let unit = vecs.iter().all(|u| ((u[0] * u[0] + u[1] * u[1]) - 1.0).abs() < 1e-15);
    let sum = (0..2).all(|i| vecs.iter().map(|u| u[i]).sum::<f64>().abs() < 1e-15);
    if !(unit && sum) {
        issues.push("gkvw vector constraints".into());
    }
    if g.max_commutator() > 1e-15 || commutant_dimension(&g) != 1 {
        issues.push("gkvw commutation or commutant".into());
    }

    let kv = kv_tuple();
    if kv.max_commutator() > 1e-15 || kv.max_norm() > 1.0 + 1e-15 {
        issues.push(format!("kv commutator {:.2e}, norm {:.17}", kv.max_commutator(), kv.max_norm()));
    }
    check(issues.is_empty(), format!("parrott σ_min over 100 candidates {least:.3}, gkvw and kv verified {issues:?}"))
}

fn classical_pick_min_eig(z: &[C64], w: &[C64]) -> f64 {
    let n = z.len();
    let m = CMat::from_fn(n, n, |x, y| (ONE - w[x] * w[y].conj()) / (ONE - z[x] * z[y].conj()));
    m.symmetric_eigenvalues().min()
}

fn criterion_9(returned: &Mutex<Returned>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let params = SolverParams::default();
    let mut disagreements = 0;
    let mut counted = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=4);
        let z: Vec<C64> = (0..n).map(|_| sampling::disk_point(&mut rng, 0.95)).collect();
        let w: Vec<C64> = (0..n).map(|_| sampling::disk_point(&mut rng, 1.0)).collect();
        let margin = classical_pick_min_eig(&z, &w);
        let nodes = Arc::new(PointSample::new(z.iter().map(|&v| vec![v]).collect()).unwrap());
        let problem = PickProblem::scalar(nodes, &w, Preordering::classical(1)).unwrap();
        let out = pick_feasible(&problem, &params).unwrap();
        record(returned, &out, problem.data(), problem.preordering());
        if margin.abs() > 1e-8 {
            counted += 1;
            if (out.status() == Status::Feasible) != (margin > 0.0) {
                disagreements += 1;
            }
        }
    }
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for trial in 0..20 {
        let n = 3;
        let m = rng.random_range(1..=2);
        let coll = sampling::random_colligation(&mut rng, sampling::classical_partition(&[n * m, n * m]), m).unwrap();
        let nodes = Arc::new(sampling::random_sample(&mut rng, n, 2, 0.9).unwrap());
        let a: Vec<CMat> = (0..n).map(|_| sampling::ginibre(&mut rng, m, m)).collect();
        let b: Vec<CMat> = a.iter().zip(nodes.points()).map(|(ax, p)| ax * eval_transfer(&coll, p).unwrap()).collect();
        let problem = PickProblem::new(nodes, a, b, Preordering::classical(2)).unwrap();
        let out = pick_feasible(&problem, &params).unwrap();
        record(returned, &out, problem.data(), problem.preordering());
        match out.certificate() {
            Some(cert) => {
                let sol = pick_solve(&problem, cert, params.feas_tol).unwrap();
                worst = worst.max(sol.node_residual);
                if sol.node_residual >= 1e-7 {
                    failures.push(format!("trial {trial}: residual {:.2e}", sol.node_residual));
                }
            }
            None => failures.push(format!("trial {trial}: {:?}", out.status())),
        }
    }
    check(
        disagreements == 0 && failures.is_empty(),
        format!(
            "{disagreements} disagreements on {counted} decisive scalar instances; bidisk worst residual {worst:.2e} {failures:?}"
        ),
    )
}

fn criterion_10(returned: &Mutex<Returned>) -> Verdict {
    let r = returned.lock().unwrap();
    let feas_tol = SolverParams::default().feas_tol;
    let bad_certs =
        r.certificates.iter().filter(|(cert, data)| verify_certificate(cert, data, feas_tol).is_err()).count();
    let bad_witnesses = r
        .witnesses
        .iter()
        .filter(|(w, data, pre)| {
            let admissible = is_admissible(&w.kernel, pre, 0.0).map(|a| a.admissible).unwrap_or(false);
            !admissible || verify_witness(&w.kernel, data, pre, feas_tol).is_err()
        })
        .count();
    check(
        bad_certs == 0 && bad_witnesses == 0 && !r.certificates.is_empty() && !r.witnesses.is_empty(),
        format!(
            "{} certificates ({bad_certs} unsound), {} witnesses ({bad_witnesses} unsound)",
            r.certificates.len(),
            r.witnesses.len()
        ),
    )
}

fn main() {
    let returned = Mutex::new(Returned::default());
    let suites: Vec<Suite> = vec![
        ("1 round-trip realization", Box::new(|| criterion_1(&returned))),
        ("2 ample consistency", Box::new(|| criterion_2(&returned))),
        ("3 nearly-ample equivalence", Box::new(|| criterion_3(&returned))),
        ("4 defect identity", Box::new(criterion_4)),
        ("5 extended auxiliary function", Box::new(criterion_5)),
        ("6 von Neumann inequality", Box::new(criterion_6)),
        ("7 polynomial norm gap", Box::new(criterion_7)),
        ("8 boundary examples", Box::new(criterion_8)),
        ("9 interpolation cross-check", Box::new(|| criterion_9(&returned))),
        ("10 soundness gate", Box::new(|| criterion_10(&returned))),
    ];
    let mut failed = 0;
    for (name, run) in &suites {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", suites.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
