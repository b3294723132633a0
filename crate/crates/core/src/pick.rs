//! Tangential interpolation `b(x) = a(x) W(x)` by Schur–Agler class functions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{psd_check_matrix, szego_kernel, PointSample};
use crate::linalg::{self, CMat, CVec, C64, ONE};
use crate::preorder::{MultiIndex, Preordering};
use crate::realize::{
    decompose_defect, eval_transfer, lurking_isometry_data, AglerCertificate, Colligation, DecomposeOutcome,
    DefectData, SolverParams,
};
use crate::testfn::row_pair;

/// Slack allowed on `‖W(x)‖ ≤ 1` at evaluation points.
pub const EVAL_NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PickProblem {
    data: DefectData,
    pre: Preordering,
}

impl PickProblem {
    pub fn new(nodes: Arc<PointSample>, a: Vec<CMat>, b: Vec<CMat>, pre: Preordering) -> Result<Self> {
        if pre.dim() != nodes.dim() {
            return Err(Error::DimensionMismatch(format!(
                "preordering in {} variables against {}-variable nodes",
                pre.dim(),
                nodes.dim()
            )));
        }
        Ok(PickProblem { data: DefectData::new(nodes, a, b)?, pre })
    }

    /// Scalar data `a ≡ 1`, `b = targets`.
    pub fn scalar(nodes: Arc<PointSample>, targets: &[C64], pre: Preordering) -> Result<Self> {
        let a = vec![CMat::from_element(1, 1, ONE); targets.len()];
        let b = targets.iter().map(|&t| CMat::from_element(1, 1, t)).collect();
        Self::new(nodes, a, b, pre)
    }

    pub fn nodes(&self) -> &Arc<PointSample> {
        self.data.sample()
    }

    pub fn data(&self) -> &DefectData {
        &self.data
    }

    pub fn preordering(&self) -> &Preordering {
        &self.pre
    }

    /// Keeps only the listed nodes.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let nodes = Arc::new(self.nodes().subset(keep)?);
        let pick = |v: &[CMat]| keep.iter().map(|&k| v[k].clone()).collect();
        Self::new(nodes, pick(self.data.left()), pick(self.data.right()), self.pre.clone())
    }

    /// `min eig ((a a^* - b b^*) * k_s)` for ample `Λ`.
    pub fn szego_margin(&self, tol: f64) -> Result<Option<(bool, f64)>> {
        let class = self.pre.classify();
        let top = match class.top() {
            Some(t) if class.is_ample() => t.clone(),
            _ => return Ok(None),
        };
        let ks = szego_kernel(self.nodes(), &top, 1)?;
        let m = self.data.out_dim();
        let mut matrix = self.data.target();
        let size = matrix.nrows();
        for c in 0..size {
            for r in 0..size {
                matrix[(r, c)] *= ks.matrix()[(r / m, c / m)];
            }
        }
        let report = psd_check_matrix(&matrix, tol);
        Ok(Some((report.is_psd, report.min_eigenvalue)))
    }
}

/// Decides solvability; for ample `Λ` the solve is the exact Szegő division.
pub fn pick_feasible(problem: &PickProblem, params: &SolverParams) -> Result<DecomposeOutcome> {
    decompose_defect(&problem.data, &problem.pre, params)
}

#[derive(Clone, Debug)]
pub struct PickSolution {
    pub colligation: Colligation,
    /// `max_x ‖a(x) W(x) - b(x)‖` over the nodes.
    pub node_residual: f64,
}

impl PickSolution {
    /// `W(x)` at any point of the domain, checked to be contractive.
    pub fn evaluate(&self, point: &[C64]) -> Result<CMat> {
        let w = eval_transfer(&self.colligation, point)?;
        let norm = linalg::spectral_norm(&w);
        if norm > 1.0 + EVAL_NORM_TOL {
            return Err(Error::Numerical(format!("interpolant has norm {norm:.15} at an evaluation point")));
        }
        Ok(w)
    }
}

pub fn pick_solve(problem: &PickProblem, cert: &AglerCertificate, feas_tol: f64) -> Result<PickSolution> {
    let realization = lurking_isometry_data(cert, &problem.data, feas_tol)?;
    Ok(PickSolution { colligation: realization.colligation, node_residual: realization.node_residual })
}

#[derive(Clone, Debug)]
pub struct RightInverse {
    /// `ω(x)` with `ψ^+(x) ω(x) = 1`, one column per point.
    pub omega: Vec<CVec>,
    pub residual: f64,
    /// Supremum of `‖ω(x)‖` over the points.
    pub max_norm: f64,
}

/// `ψ^+(x)^* / |ψ^+(x)|²`.
pub fn pointwise_right_inverse(point: &[C64], lambda: &MultiIndex) -> Result<CVec> {
    let (plus, _) = row_pair(point, lambda)?;
    let norm_sqr: f64 = plus.iter().map(|z| z.norm_sqr()).sum();
    Ok(plus.adjoint().column(0) / C64::new(norm_sqr, 0.0))
}

/// Bounded right inverse of `ψ^+_λ` synthesized through the interpolation problem `ψ^+ W = e_1`.
pub fn corona_right_inverse(
    sample: &Arc<PointSample>,
    lambda: &MultiIndex,
    pre: &Preordering,
    params: &SolverParams,
) -> Result<RightInverse> {
    if !pre.classify().is_ample() {
        return Err(Error::Unsupported(format!("{pre} is not ample")));
    }
    if !pre.maximal_closure().contains(lambda) {
        return Err(Error::Domain(format!("{lambda} is not in the preordering")));
    }
    let a = sample.points().iter().map(|p| Ok(row_pair(p, lambda)?.0)).collect::<Result<Vec<_>>>()?;
    let width = a[0].ncols();
    let mut e1 = CMat::zeros(1, width);
    e1[(0, 0)] = ONE;
    let b = vec![e1; sample.len()];
    let problem = PickProblem::new(sample.clone(), a.clone(), b, pre.clone())?;
    let outcome = pick_feasible(&problem, params)?;
    let Some(cert) = outcome.certificate() else {
        return Err(Error::CertificateRejected(format!("corona problem for {lambda} returned {:?}", outcome.status())));
    };
    let solution = pick_solve(&problem, cert, params.feas_tol)?;
    let mut omega = Vec::with_capacity(sample.len());
    let mut residual = 0.0_f64;
    let mut max_norm = 0.0_f64;
    for (x, row) in a.iter().enumerate() {
        let w = solution.evaluate(sample.point(x))?;
        let col: CVec = w.column(0).into_owned();
        residual = residual.max(((row * &col)[(0, 0)] - ONE).norm());
        max_norm = max_norm.max(col.norm());
        omega.push(col);
    }
    Ok(RightInverse { omega, residual, max_norm })
}
