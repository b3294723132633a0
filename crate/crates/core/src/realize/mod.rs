//! Agler decompositions on finite samples, separating witnesses, realizations and norms.

pub mod colligation;
mod lurking;
pub mod norm;
mod solver;
mod witness;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{defect_entry, psd_check_matrix, szego_kernel, HermitianKernel, PointSample};
use crate::linalg::{self, CMat, C64};
use crate::preorder::{MultiIndex, Preordering};

pub use colligation::{eval_transfer, transfer_compose, Colligation, Compose, PartitionBlock};
pub use lurking::{lurking_isometry, lurking_isometry_data, Realization};
pub use norm::{schur_agler_norm, NormBracket};
pub use solver::SolverParams;
pub use witness::{verify_witness, Witness};

/// A matrix-valued function sampled on a point set.
#[derive(Clone, Debug)]
pub struct FunctionSample {
    sample: Arc<PointSample>,
    values: Vec<CMat>,
}

impl FunctionSample {
    pub fn new(sample: Arc<PointSample>, values: Vec<CMat>) -> Result<Self> {
        if values.len() != sample.len() {
            return Err(Error::DimensionMismatch(format!("{} values for {} points", values.len(), sample.len())));
        }
        let (r, c) = values[0].shape();
        if r == 0 || c == 0 || values.iter().any(|v| v.shape() != (r, c)) {
            return Err(Error::DimensionMismatch("function values must share one nonempty shape".into()));
        }
        if values.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Malformed("non-finite function value".into()));
        }
        Ok(FunctionSample { sample, values })
    }

    /// Scalar function from one value per point.
    pub fn scalar(sample: Arc<PointSample>, values: Vec<C64>) -> Result<Self> {
        Self::new(sample, values.into_iter().map(|v| CMat::from_element(1, 1, v)).collect())
    }

    pub fn from_fn(sample: Arc<PointSample>, f: impl Fn(&[C64]) -> CMat) -> Result<Self> {
        let values = sample.points().iter().map(|p| f(p)).collect();
        Self::new(sample, values)
    }

    pub fn sample(&self) -> &Arc<PointSample> {
        &self.sample
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    /// `max_x ‖φ(x)‖₂`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    fn require_square(&self) -> Result<usize> {
        let (r, c) = self.shape();
        if r != c {
            return Err(Error::Unsupported(format!("{r}x{c} function values; square values are required")));
        }
        Ok(r)
    }
}

/// Data `a, b` of the identity `Σ_λ D_λ * Γ_λ = a(x)a(y)^* - b(x)b(y)^*`.
#[derive(Clone, Debug)]
pub struct DefectData {
    sample: Arc<PointSample>,
    left: Vec<CMat>,
    right: Vec<CMat>,
}

impl DefectData {
    pub fn new(sample: Arc<PointSample>, left: Vec<CMat>, right: Vec<CMat>) -> Result<Self> {
        if left.len() != sample.len() || right.len() != sample.len() {
            return Err(Error::DimensionMismatch("one left and one right value per point".into()));
        }
        let shape = left[0].shape();
        if shape.0 == 0 || shape.1 == 0 || left.iter().chain(&right).any(|v| v.shape() != shape) {
            return Err(Error::DimensionMismatch("left and right values must share one nonempty shape".into()));
        }
        if left.iter().chain(&right).flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Malformed("non-finite value".into()));
        }
        Ok(DefectData { sample, left, right })
    }

    /// `a ≡ c·1`, `b = φ`.
    pub fn from_function(phi: &FunctionSample, level: f64) -> Result<Self> {
        let m = phi.require_square()?;
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::Malformed(format!("level {level} must be positive")));
        }
        let left = vec![linalg::identity(m) * C64::new(level, 0.0); phi.sample.len()];
        Self::new(phi.sample.clone(), left, phi.values.clone())
    }

    pub fn sample(&self) -> &Arc<PointSample> {
        &self.sample
    }

    pub fn left(&self) -> &[CMat] {
        &self.left
    }

    pub fn right(&self) -> &[CMat] {
        &self.right
    }

    /// Row count `m` of each value.
    pub fn out_dim(&self) -> usize {
        self.left[0].nrows()
    }

    /// Column count `p` of each value.
    pub fn in_dim(&self) -> usize {
        self.left[0].ncols()
    }

    pub fn target_block(&self, x: usize, y: usize) -> CMat {
        &self.left[x] * self.left[y].adjoint() - &self.right[x] * self.right[y].adjoint()
    }

    /// The assembled `Nm × Nm` right-hand side.
    pub fn target(&self) -> CMat {
        let (n, m) = (self.sample.len(), self.out_dim());
        let mut out = CMat::zeros(n * m, n * m);
        for x in 0..n {
            for y in 0..n {
                out.view_mut((x * m, y * m), (m, m)).copy_from(&self.target_block(x, y));
            }
        }
        out
    }
}

/// Positive kernels solving the defect identity.
#[derive(Clone, Debug)]
pub struct AglerCertificate {
    pub gammas: Vec<(MultiIndex, HermitianKernel)>,
    pub residual: f64,
    pub min_eigenvalue: f64,
    /// The level `c` for function problems, `1` for interpolation data.
    pub level: f64,
}

impl AglerCertificate {
    pub fn lambdas(&self) -> impl Iterator<Item = &MultiIndex> {
        self.gammas.iter().map(|(l, _)| l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Feasible,
    Infeasible,
    Unresolved,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Feasible => 0,
            Status::Infeasible => 2,
            Status::Unresolved => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Decomposition {
    Feasible(AglerCertificate),
    Infeasible(Witness),
    Unresolved,
}

#[derive(Clone, Debug)]
pub struct DecomposeOutcome {
    pub decomposition: Decomposition,
    pub iterations: usize,
    /// Decomposition residual of the last iterate.
    pub residual: f64,
}

impl DecomposeOutcome {
    pub fn status(&self) -> Status {
        match self.decomposition {
            Decomposition::Feasible(_) => Status::Feasible,
            Decomposition::Infeasible(_) => Status::Infeasible,
            Decomposition::Unresolved => Status::Unresolved,
        }
    }

    pub fn certificate(&self) -> Option<&AglerCertificate> {
        match &self.decomposition {
            Decomposition::Feasible(c) => Some(c),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.decomposition {
            Decomposition::Infeasible(w) => Some(w),
            _ => None,
        }
    }
}

/// Maximal elements of `Λ`, checked to be usable as defect indices.
pub(crate) fn decomposition_indices(pre: &Preordering, sample: &PointSample) -> Result<Vec<MultiIndex>> {
    if pre.dim() != sample.dim() {
        return Err(Error::DimensionMismatch(format!(
            "preordering in {} variables against {}-variable sample",
            pre.dim(),
            sample.dim()
        )));
    }
    let maxima = pre.minimal_reduction().elements().to_vec();
    if let Some(bad) = maxima.iter().find(|l| !l.is_binary()) {
        return Err(Error::Unsupported(format!("maximal element {bad} has entries above 1")));
    }
    Ok(maxima)
}

/// Solves `Σ_λ D_λ * Γ_λ = a a^* - b b^*` over the maximal elements of `Λ`.
pub fn decompose_defect(data: &DefectData, pre: &Preordering, params: &SolverParams) -> Result<DecomposeOutcome> {
    params.validate()?;
    let lambdas = decomposition_indices(pre, data.sample())?;
    solver::solve(data, pre, &lambdas, params, 1.0)
}

/// Decomposition of `c² 1 - φ(x)φ(y)^*`.
pub fn agler_decompose(
    phi: &FunctionSample,
    pre: &Preordering,
    level: f64,
    params: &SolverParams,
) -> Result<DecomposeOutcome> {
    params.validate()?;
    let data = DefectData::from_function(phi, level)?;
    let lambdas = decomposition_indices(pre, data.sample())?;
    solver::solve(&data, pre, &lambdas, params, level)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmpleMembership {
    pub member: bool,
    pub min_eigenvalue: f64,
}

/// Single-kernel test `(c²[1] - φφ^*) * k_s ⪰ 0` for ample `Λ`.
pub fn ample_membership(phi: &FunctionSample, pre: &Preordering, level: f64, tol: f64) -> Result<AmpleMembership> {
    let class = pre.classify();
    let top = match class.top() {
        Some(top) if class.is_ample() => top.clone(),
        _ => return Err(Error::Unsupported(format!("{pre} is not ample"))),
    };
    if pre.dim() != phi.sample.dim() {
        return Err(Error::DimensionMismatch("preordering and sample dimensions differ".into()));
    }
    let data = DefectData::from_function(phi, level)?;
    let ks = szego_kernel(phi.sample(), &top, 1)?;
    let m = data.out_dim();
    let n = phi.sample.len();
    let mut matrix = data.target();
    for r in 0..n * m {
        for c in 0..n * m {
            matrix[(r, c)] *= ks.matrix()[(r / m, c / m)];
        }
    }
    let min_eigenvalue = psd_check_matrix(&matrix, tol).min_eigenvalue;
    Ok(AmpleMembership { member: min_eigenvalue >= -tol, min_eigenvalue })
}

/// Re-checks a certificate blockwise against the data, independently of the solver's bookkeeping.
pub fn verify_certificate(cert: &AglerCertificate, data: &DefectData, feas_tol: f64) -> Result<(f64, f64)> {
    let sample = data.sample();
    let n = sample.len();
    let m = data.out_dim();
    let mut residual = 0.0_f64;
    for x in 0..n {
        for y in 0..n {
            let mut acc = data.target_block(x, y);
            for (lambda, gamma) in &cert.gammas {
                if gamma.block_dim() != m || gamma.sample().len() != n {
                    return Err(Error::CertificateRejected(format!("kernel for {lambda} has the wrong shape")));
                }
                let weight = defect_entry(sample.point(x), sample.point(y), lambda);
                acc -= gamma.block(x, y) * weight;
            }
            residual = residual.max(linalg::max_abs(&acc));
        }
    }
    let min_eigenvalue =
        cert.gammas.iter().map(|(_, g)| linalg::min_eigenvalue(g.matrix())).fold(f64::INFINITY, f64::min);
    if !(residual <= feas_tol) {
        return Err(Error::CertificateRejected(format!("residual {residual:.3e} above {feas_tol:.1e}")));
    }
    if !(min_eigenvalue >= -feas_tol) {
        return Err(Error::CertificateRejected(format!(
            "kernel eigenvalue {min_eigenvalue:.3e} below -{feas_tol:.1e}"
        )));
    }
    Ok((residual, min_eigenvalue))
}
