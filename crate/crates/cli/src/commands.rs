use std::sync::Arc;

use agler_core::kernel::{is_admissible, DEFAULT_TOL};
use agler_core::linalg::{self, CMat, ONE, ZERO};
use agler_core::opmodel::{
    commutant_dimension, dilation_check, eval_colligation_at_tuple, eval_polynomial, gkvw_default, gkvw_vectors,
    is_brehmer, kv_classical_tuple, kv_tuple, parrott_default, parrott_pair, parrott_rigidity, CommutingTuple,
    DilationReport, TestPolynomial,
};
use agler_core::pick::{pick_feasible, pick_solve};
use agler_core::realize::{agler_decompose, eval_transfer, lurking_isometry, schur_agler_norm};
use agler_core::testfn::{aux_function, extend_aux_finite, verify_identity5};
use agler_core::wire::{self, AuxDoc, ColligationDoc, KernelProblemDoc, Matrix, PickDoc, Point, ProblemDoc, TupleDoc};
use agler_core::{sampling, DefectData, MultiIndex, Preordering, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::report::{matrices, render, AdmissibilityDoc, CertificateDoc, DecisionDoc, LambdaMargin, WitnessDoc};
use crate::{Cli, CliError, Command, ExampleName, Outcome};

/// Sup norm allowed for the transfer function at a tuple before it counts as a violation.
const VN_TOL: f64 = 1e-9;

pub fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::CheckKernel => check_kernel(cli),
        Command::Aux => aux(cli),
        Command::Decompose => decompose(cli),
        Command::Realize => realize(cli),
        Command::Eval => eval(cli),
        Command::Norm { tol } => norm(cli, *tol),
        Command::Brehmer => brehmer(cli),
        Command::Vn { count } => vn(cli, *count),
        Command::Pick => pick(cli),
        Command::Example { name } => example(*name),
    }
}

fn outcome(document: String, code: u8, summary: String) -> Result<Outcome, CliError> {
    Ok(Outcome { document, code, summary })
}

fn require<T>(value: Option<T>, field: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("input is missing the `{field}` field")))
}

fn check_kernel(cli: &Cli) -> Result<Outcome, CliError> {
    let doc: KernelProblemDoc = cli.read_input()?;
    let pre = require(doc.preordering()?, "preordering")?;
    let kernel = require(doc.kernel.as_ref(), "kernel")?.to_kernel()?;
    let report = is_admissible(&kernel, &pre, doc.tol.unwrap_or(DEFAULT_TOL))?;
    let body = AdmissibilityDoc::from_report(&report);
    let summary = format!("admissible: {}", body.admissible);
    outcome(render("check-kernel", body)?, 0, summary)
}

#[derive(Serialize)]
struct AuxReport {
    aux: AuxDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    identity_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extension: Option<ExtensionReport>,
}

#[derive(Serialize)]
struct ExtensionReport {
    aux: AuxDoc,
    operator: Matrix,
    g_norm: f64,
    compressed_residual: f64,
    defect_min_eigenvalue: f64,
    near_unit_points: Vec<usize>,
}

fn aux(cli: &Cli) -> Result<Outcome, CliError> {
    let doc: KernelProblemDoc = cli.read_input()?;
    let sample = Arc::new(wire::points_from(require(doc.points.as_deref(), "points")?)?);
    let lambda = require(doc.lambda.clone(), "lambda")?;
    let aux = aux_function(&sample, &lambda)?;
    let identity_residual = match &doc.kernel {
        Some(k) => Some(verify_identity5(&sample, &lambda, &k.to_kernel_on(sample.clone())?)?),
        None => None,
    };
    let extension = match doc.preordering()? {
        Some(pre) => {
            let ext = extend_aux_finite(&sample, &lambda, &pre)?;
            Some(ExtensionReport {
                aux: AuxDoc::from_aux(&ext.aux),
                operator: wire::matrix_to(&ext.operator),
                g_norm: ext.g_norm,
                compressed_residual: ext.compressed_residual,
                defect_min_eigenvalue: ext.defect_min_eigenvalue,
                near_unit_points: ext.near_unit_points,
            })
        }
        None => None,
    };
    let summary = format!("auxiliary data for {lambda} on {} points", sample.len());
    let body = AuxReport { aux: AuxDoc::from_aux(&aux), identity_residual, extension };
    outcome(render("aux", body)?, 0, summary)
}

fn decide(cli: &Cli, doc: &ProblemDoc, level: f64) -> Result<(wire::Problem, DecisionDoc), CliError> {
    let problem = doc.build()?;
    let params = cli.solver(problem.solver.clone())?;
    let out = agler_decompose(&problem.phi, &problem.pre, level, &params)?;
    let data = DefectData::from_function(&problem.phi, level)?;
    let decision = DecisionDoc::checked(&out, level, &data, &problem.pre, params.feas_tol);
    Ok((problem, decision))
}

fn decompose(cli: &Cli) -> Result<Outcome, CliError> {
    let doc: ProblemDoc = cli.read_input()?;
    let level = doc.c.unwrap_or(1.0);
    let (_, decision) = decide(cli, &doc, level)?;
    let summary = format!("{:?} at level {level}", decision.status);
    let code = decision.exit_code();
    outcome(render("decompose", decision)?, code, summary)
}

#[derive(Serialize)]
struct RealizeReport {
    #[serde(flatten)]
    decision: DecisionDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    realization: Option<RealizationDoc>,
}

#[derive(Serialize)]
struct RealizationDoc {
    colligation: ColligationDoc,
    /// `max_x ‖c·W(x) − φ(x)‖`, evaluated from the emitted colligation.
    round_trip_residual: f64,
    node_residual: f64,
    gram_defect: f64,
    unitarity_defect: f64,
}

fn realize(cli: &Cli) -> Result<Outcome, CliError> {
    let doc: ProblemDoc = cli.read_input()?;
    let level = doc.c.unwrap_or(1.0);
    let problem = doc.build()?;
    let params = cli.solver(problem.solver.clone())?;
    let out = agler_decompose(&problem.phi, &problem.pre, level, &params)?;
    let data = DefectData::from_function(&problem.phi, level)?;
    let decision = DecisionDoc::checked(&out, level, &data, &problem.pre, params.feas_tol);
    let realization = match (decision.status, out.certificate()) {
        (Status::Feasible, Some(cert)) => {
            let r = lurking_isometry(cert, &problem.phi, params.feas_tol)?;
            let emitted = ColligationDoc::from_colligation(&r.colligation);
            let coll = emitted.to_colligation()?;
            let round_trip_residual = problem
                .phi
                .sample()
                .points()
                .iter()
                .zip(problem.phi.values())
                .map(|(p, v)| Ok(linalg::max_abs(&(eval_transfer(&coll, p)? * linalg::real(level) - v))))
                .collect::<agler_core::Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Some(RealizationDoc {
                colligation: emitted,
                round_trip_residual,
                node_residual: r.node_residual,
                gram_defect: r.gram_defect,
                unitarity_defect: coll.unitarity_defect(),
            })
        }
        _ => None,
    };
    let summary = match &realization {
        Some(r) => format!("realized with round-trip residual {:.3e}", r.round_trip_residual),
        None => format!("{:?} at level {level}", decision.status),
    };
    let code = decision.exit_code();
    outcome(render("realize", RealizeReport { decision, realization })?, code, summary)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalDoc {
    colligation: ColligationDoc,
    at: Vec<Point>,
}

#[derive(Serialize)]
struct EvalReport {
    values: Vec<Matrix>,
    norms: Vec<f64>,
}

fn eval(cli: &Cli) -> Result<Outcome, CliError> {
    let doc: EvalDoc = cli.read_input()?;
    let coll = doc.colligation.to_colligation()?;
    let values = doc.at.iter().map(|p| eval_transfer(&coll, &p.coords())).collect::<agler_core::Result<Vec<CMat>>>()?;
    let norms: Vec<f64> = values.iter().map(linalg::spectral_norm).collect();
    let summary = format!("evaluated at {} points", values.len());
    let body = EvalReport { values: matrices(&values), norms };
    outcome(render("eval", body)?, 0, summary)
}

#[derive(Serialize)]
struct NormReport {
    lo: f64,
    hi: f64,
    ample: bool,
    unresolved: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<CertificateDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<WitnessDoc>,
}

fn norm(cli: &Cli, tol: f64) -> Result<Outcome, CliError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    let doc: ProblemDoc = cli.read_input()?;
    if let Some(level) = doc.c {
        let (_, decision) = decide(cli, &doc, level)?;
        let summary = format!("{:?} at level {level}", decision.status);
        let code = decision.exit_code();
        return outcome(render("norm", decision)?, code, summary);
    }
    let problem = doc.build()?;
    let params = cli.solver(problem.solver.clone())?;
    let bracket = schur_agler_norm(&problem.phi, &problem.pre, tol, &params)?;
    let code = if bracket.width() > tol { 3 } else { 0 };
    let summary = format!("norm in [{:.12}, {:.12}]", bracket.lo, bracket.hi);
    let body = NormReport {
        lo: bracket.lo,
        hi: bracket.hi,
        ample: bracket.ample,
        unresolved: bracket.unresolved.clone(),
        certificate: bracket.certificate.as_ref().map(CertificateDoc::from_certificate),
        witness: bracket.witness.as_ref().map(WitnessDoc::from_witness),
    };
    outcome(render("norm", body)?, code, summary)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BrehmerDoc {
    tuple: TupleDoc,
    preordering: Preordering,
    #[serde(default)]
    tol: Option<f64>,
}

#[derive(Serialize)]
struct BrehmerOut {
    brehmer: bool,
    margins: Vec<LambdaMargin>,
}

fn brehmer_report(t: &CommutingTuple, pre: &Preordering, tol: f64) -> agler_core::Result<BrehmerOut> {
    let r = is_brehmer(t, pre, tol)?;
    Ok(BrehmerOut {
        brehmer: r.brehmer,
        margins: r
            .margins
            .into_iter()
            .map(|(lambda, min_eigenvalue)| LambdaMargin { lambda, min_eigenvalue })
            .collect(),
    })
}

fn brehmer(cli: &Cli) -> Result<Outcome, CliError> {
    let doc: BrehmerDoc = cli.read_input()?;
    let t = doc.tuple.to_tuple()?;
    let body = brehmer_report(&t, &doc.preordering, doc.tol.unwrap_or(DEFAULT_TOL))?;
    let summary = format!("brehmer: {}", body.brehmer);
    outcome(render("brehmer", body)?, 0, summary)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VnDoc {
    colligation: ColligationDoc,
    tuple: TupleDoc,
    #[serde(default)]
    rescale: bool,
}

#[derive(Serialize)]
struct VnReport {
    value: Matrix,
    norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rescaled: Option<f64>,
    holds: bool,
}

#[derive(Serialize)]
struct VnSuite {
    seed: u64,
    pairs: usize,
    max_norm: f64,
    violations: usize,
    holds: bool,
}

fn vn(cli: &Cli, count: usize) -> Result<Outcome, CliError> {
    if cli.input.is_some() {
        let doc: VnDoc = cli.read_input()?;
        let coll = doc.colligation.to_colligation()?;
        let t = doc.tuple.to_tuple()?;
        let e = eval_colligation_at_tuple(&coll, &t, doc.rescale)?;
        let holds = e.norm <= 1.0 + VN_TOL;
        let summary = format!("‖Φ(T)‖ = {:.15}", e.norm);
        let body = VnReport { value: wire::matrix_to(&e.value), norm: e.norm, rescaled: e.rescaled, holds };
        return outcome(render("vn", body)?, 0, summary);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut max_norm = 0.0_f64;
    let mut violations = 0;
    for _ in 0..count {
        let d = rng.random_range(1..=3);
        let q = rng.random_range(1..=6);
        let mults: Vec<usize> = (0..d).map(|_| rng.random_range(0..=3)).collect();
        let io = rng.random_range(1..=2);
        let coll = sampling::random_colligation(&mut rng, sampling::classical_partition(&mults), io)?;
        let t = sampling::random_commuting_tuple(&mut rng, d, q)?;
        let norm = eval_colligation_at_tuple(&coll, &t, false)?.norm;
        max_norm = max_norm.max(norm);
        if norm > 1.0 + VN_TOL {
            violations += 1;
        }
    }
    let summary = format!("{count} random pairs, max norm {max_norm:.15}");
    let body = VnSuite { seed: cli.seed, pairs: count, max_norm, violations, holds: violations == 0 };
    outcome(render("vn", body)?, 0, summary)
}

#[derive(Serialize)]
struct PickReport {
    #[serde(flatten)]
    decision: DecisionDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    interpolant: Option<InterpolantDoc>,
}

#[derive(Serialize)]
struct InterpolantDoc {
    colligation: ColligationDoc,
    node_residual: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    values: Vec<Matrix>,
}

fn pick(cli: &Cli) -> Result<Outcome, CliError> {
    let doc: PickDoc = cli.read_input()?;
    let problem = doc.build()?;
    let params = cli.solver(doc.solver.clone())?;
    let out = pick_feasible(&problem, &params)?;
    let decision = DecisionDoc::checked(&out, 1.0, problem.data(), problem.preordering(), params.feas_tol);
    let interpolant = match (decision.status, out.certificate()) {
        (Status::Feasible, Some(cert)) => {
            let sol = pick_solve(&problem, cert, params.feas_tol)?;
            let values = doc
                .at
                .iter()
                .flatten()
                .map(|p| sol.evaluate(&p.coords()))
                .collect::<agler_core::Result<Vec<CMat>>>()?;
            Some(InterpolantDoc {
                colligation: ColligationDoc::from_colligation(&sol.colligation),
                node_residual: sol.node_residual,
                values: matrices(&values),
            })
        }
        _ => None,
    };
    let summary = match &interpolant {
        Some(i) => format!("interpolant found, node residual {:.3e}", i.node_residual),
        None => format!("{:?}", decision.status),
    };
    let code = decision.exit_code();
    outcome(render("pick", PickReport { decision, interpolant })?, code, summary)
}

#[derive(Serialize)]
struct ExampleReport {
    name: &'static str,
    tuple: TupleDoc,
    max_commutator: f64,
    max_norm: f64,
    commutant_dimension: usize,
    brehmer_classical: BrehmerOut,
    brehmer_full: BrehmerOut,
    #[serde(flatten)]
    extra: ExampleExtra,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ExampleExtra {
    Parrott {
        anticommutator: f64,
        rigidity: f64,
    },
    Gkvw {
        vectors: [[f64; 2]; 3],
    },
    Kv {
        polynomial_norm: f64,
        polynomial_norm_at_0_999: f64,
        /// Maximum of `|p|` over a 60³ grid on the torus.
        torus_grid_max: f64,
        dilation: DilationReport,
    },
}

fn torus_grid_max(p: &TestPolynomial, steps: usize) -> agler_core::Result<f64> {
    let angle = |k: usize| agler_core::C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / steps as f64);
    let mut best = 0.0_f64;
    for i in 0..steps {
        for j in 0..steps {
            for k in 0..steps {
                let point = [angle(i), angle(j), angle(k)];
                best = best.max(linalg::spectral_norm(&p.eval_point(&point)?));
            }
        }
    }
    Ok(best)
}

fn example(name: ExampleName) -> Result<Outcome, CliError> {
    let (label, t, extra) = match name {
        ExampleName::Parrott => {
            let (u, v) = parrott_pair();
            let extra = ExampleExtra::Parrott {
                anticommutator: linalg::max_abs(&(&u * &v + &v * &u)),
                rigidity: parrott_rigidity(&u, &v, 2)?,
            };
            ("parrott", parrott_default(), extra)
        }
        ExampleName::Gkvw => ("gkvw", gkvw_default(), ExampleExtra::Gkvw { vectors: gkvw_vectors() }),
        ExampleName::Kv => {
            let t = kv_tuple();
            let p = TestPolynomial::kaijser_varopoulos();
            let basis = CMat::from_fn(6, 5, |r, c| if r == c { ONE } else { ZERO });
            let extra = ExampleExtra::Kv {
                polynomial_norm: linalg::spectral_norm(&eval_polynomial(&p, &t)?),
                polynomial_norm_at_0_999: linalg::spectral_norm(&eval_polynomial(&p, &t.scaled(0.999)?)?),
                torus_grid_max: torus_grid_max(&p, 60)?,
                dilation: dilation_check(&t, &kv_classical_tuple(), &basis, 4)?,
            };
            ("kv", t, extra)
        }
    };
    let d = t.dim();
    let full = Preordering::new(vec![MultiIndex::ones(d)])?;
    let body = ExampleReport {
        name: label,
        tuple: TupleDoc::from_tuple(&t),
        max_commutator: t.max_commutator(),
        max_norm: t.max_norm(),
        commutant_dimension: commutant_dimension(&t),
        brehmer_classical: brehmer_report(&t, &Preordering::classical(d), DEFAULT_TOL)?,
        brehmer_full: brehmer_report(&t, &full, DEFAULT_TOL)?,
        extra,
    };
    let summary = format!("{label}: {}×{} tuple in {d} variables", t.size(), t.size());
    outcome(render("example", body)?, 0, summary)
}
