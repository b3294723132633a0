//! Point samples and block Hermitian kernels over them.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE};
use crate::preorder::{MultiIndex, Preordering};

/// Points closer than this in every coordinate are treated as the same point.
const DUPLICATE_TOL: f64 = 1e-12;

/// Finitely many points of the open polydisk, given by their test-function values.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSample {
    points: Vec<Vec<C64>>,
}

impl PointSample {
    pub fn new(points: Vec<Vec<C64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidSample("no points".into()));
        };
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidSample("points need at least one coordinate".into()));
        }
        for (k, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::InvalidSample(format!("point {k} has {} coordinates, expected {d}", p.len())));
            }
            if let Some(z) = p.iter().find(|z| !(z.norm() < 1.0)) {
                return Err(Error::Domain(format!("point {k} has coordinate {z} with |z| >= 1")));
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                let gap = points[i].iter().zip(&points[j]).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()));
                if gap <= DUPLICATE_TOL {
                    return Err(Error::InvalidSample(format!("points {j} and {i} coincide")));
                }
            }
        }
        Ok(PointSample { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<C64>] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[C64] {
        &self.points[k]
    }

    /// `1 - max |z_i|` over the whole sample.
    pub fn margin(&self) -> f64 {
        1.0 - self.points.iter().flatten().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    /// The sample restricted to the given point indices, in that order.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        PointSample::new(keep.iter().map(|&k| self.points[k].clone()).collect())
    }
}

/// `Π_i (1 - z_i conj(w_i))^{λ_i}` evaluated on every pair of sample points.
pub fn defect_matrix(sample: &PointSample, lambda: &MultiIndex) -> Result<CMat> {
    if lambda.dim() != sample.dim() {
        return Err(Error::DimensionMismatch(format!("multi-index {lambda} against {}-variable sample", sample.dim())));
    }
    let n = sample.len();
    Ok(CMat::from_fn(n, n, |x, y| defect_entry(sample.point(x), sample.point(y), lambda)))
}

pub fn defect_entry(x: &[C64], y: &[C64], lambda: &MultiIndex) -> C64 {
    let mut acc = ONE;
    for (i, &power) in lambda.entries().iter().enumerate() {
        let base = ONE - x[i] * y[i].conj();
        for _ in 0..power {
            acc *= base;
        }
    }
    acc
}

/// A Hermitian kernel on a sample with `block_dim × block_dim` blocks, stored assembled.
#[derive(Clone, Debug)]
pub struct HermitianKernel {
    sample: Arc<PointSample>,
    block_dim: usize,
    matrix: CMat,
}

/// Relative Hermitian defect accepted at construction before symmetrizing.
const HERMITIAN_TOL: f64 = 1e-9;

impl HermitianKernel {
    pub fn from_matrix(sample: Arc<PointSample>, block_dim: usize, matrix: CMat) -> Result<Self> {
        let size = sample.len() * block_dim;
        if block_dim == 0 || matrix.nrows() != size || matrix.ncols() != size {
            return Err(Error::DimensionMismatch(format!(
                "kernel matrix is {}x{}, expected {size}x{size}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = linalg::hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL * linalg::max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(HermitianKernel { sample, block_dim, matrix: linalg::hermitian_part(&matrix) })
    }

    pub fn from_blocks(
        sample: Arc<PointSample>,
        block_dim: usize,
        block: impl Fn(usize, usize) -> CMat,
    ) -> Result<Self> {
        let n = sample.len();
        let mut matrix = CMat::zeros(n * block_dim, n * block_dim);
        for x in 0..n {
            for y in 0..n {
                let b = block(x, y);
                if b.nrows() != block_dim || b.ncols() != block_dim {
                    return Err(Error::DimensionMismatch(format!(
                        "block ({x},{y}) is {}x{}, expected {block_dim}x{block_dim}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                matrix.view_mut((x * block_dim, y * block_dim), (block_dim, block_dim)).copy_from(&b);
            }
        }
        Self::from_matrix(sample, block_dim, matrix)
    }

    /// Scalar kernel from an `N × N` matrix.
    pub fn scalar(sample: Arc<PointSample>, matrix: CMat) -> Result<Self> {
        Self::from_matrix(sample, 1, matrix)
    }

    /// `[1_m]`: every block the identity.
    pub fn ones(sample: Arc<PointSample>, block_dim: usize) -> Self {
        let n = sample.len();
        let matrix = linalg::kron(&CMat::from_element(n, n, ONE), &linalg::identity(block_dim));
        HermitianKernel { sample, block_dim, matrix }
    }

    /// Identity blocks on the diagonal, zero elsewhere.
    pub fn diagonal(sample: Arc<PointSample>, block_dim: usize) -> Self {
        let size = sample.len() * block_dim;
        HermitianKernel { sample, block_dim, matrix: linalg::identity(size) }
    }

    pub fn sample(&self) -> &Arc<PointSample> {
        &self.sample
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn block(&self, x: usize, y: usize) -> CMat {
        let m = self.block_dim;
        self.matrix.view((x * m, y * m), (m, m)).into_owned()
    }

    /// Multiplies block `(x, y)` by `weights[(x, y)]`.
    pub fn weighted(&self, weights: &CMat) -> Result<Self> {
        let n = self.sample.len();
        if weights.nrows() != n || weights.ncols() != n {
            return Err(Error::DimensionMismatch("weight matrix size".into()));
        }
        let m = self.block_dim;
        let matrix = CMat::from_fn(n * m, n * m, |r, c| self.matrix[(r, c)] * weights[(r / m, c / m)]);
        Self::from_matrix(self.sample.clone(), m, matrix)
    }

    pub fn spectral_norm(&self) -> f64 {
        linalg::spectral_norm(&self.matrix)
    }

    fn same_sample(&self, other: &HermitianKernel) -> Result<()> {
        if Arc::ptr_eq(&self.sample, &other.sample) || self.sample == other.sample {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("kernels live on different samples".into()))
        }
    }
}

/// Blockwise Kronecker product `K1(x,y) ⊗ K2(x,y)`; plain multiplication when `K1` is scalar.
pub fn schur_product(k1: &HermitianKernel, k2: &HermitianKernel) -> Result<HermitianKernel> {
    k1.same_sample(k2)?;
    let (m1, m2) = (k1.block_dim, k2.block_dim);
    HermitianKernel::from_blocks(k1.sample.clone(), m1 * m2, |x, y| linalg::kron(&k1.block(x, y), &k2.block(x, y)))
}

/// `1_m · Π_{λ_i = 1} (1 - z_i conj(w_i))^{-1}`.
pub fn szego_kernel(sample: &Arc<PointSample>, lambda: &MultiIndex, block_dim: usize) -> Result<HermitianKernel> {
    if !lambda.is_binary() {
        return Err(Error::Unsupported(format!("Szegő kernel needs 0/1 entries, got {lambda}")));
    }
    let defect = defect_matrix(sample, lambda)?;
    let n = sample.len();
    let scalar = CMat::from_fn(n, n, |x, y| ONE / defect[(x, y)]);
    let matrix = linalg::kron(&scalar, &linalg::identity(block_dim));
    HermitianKernel::from_matrix(sample.clone(), block_dim, matrix)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

/// Minimum eigenvalue test against `-tol · ‖K‖₂`.
pub fn psd_check(k: &HermitianKernel, tol: f64) -> PsdReport {
    psd_check_matrix(k.matrix(), tol)
}

pub(crate) fn psd_check_matrix(m: &CMat, tol: f64) -> PsdReport {
    let e = linalg::eigh(m);
    let min_eigenvalue = e.values.first().copied().unwrap_or(0.0);
    let scale = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    PsdReport { is_psd: min_eigenvalue >= -tol * scale, min_eigenvalue }
}

#[derive(Clone, Debug)]
pub struct LambdaCheck {
    pub lambda: MultiIndex,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// Least eigenvalue of the kernel itself.
    pub kernel_min_eigenvalue: f64,
    pub checks: Vec<LambdaCheck>,
    /// First failing multi-index with an eigenvector of its negative eigenvalue.
    pub violation: Option<(MultiIndex, CVec)>,
}

pub const DEFAULT_TOL: f64 = 1e-10;

/// Tests `Π_i (1 - ψ_i ψ_i^*)^{λ_i} * K ⪰ 0` for each maximal element of `Λ`.
pub fn is_admissible(k: &HermitianKernel, pre: &Preordering, tol: f64) -> Result<AdmissibilityReport> {
    let sample = k.sample();
    if pre.dim() != sample.dim() {
        return Err(Error::DimensionMismatch(format!(
            "preordering in {} variables against {}-variable sample",
            pre.dim(),
            sample.dim()
        )));
    }
    let scale = k.spectral_norm();
    let threshold = -tol * scale;
    let base = psd_check(k, tol);
    let maxima = pre.minimal_reduction();
    let per_lambda: Vec<(LambdaCheck, Option<CVec>)> = maxima
        .elements()
        .par_iter()
        .map(|lambda| {
            let weighted = k.weighted(&defect_matrix(sample, lambda)?)?;
            let e = linalg::eigh(weighted.matrix());
            let min_eigenvalue = e.values.first().copied().unwrap_or(0.0);
            let vector = (min_eigenvalue < threshold).then(|| e.vectors.column(0).into_owned());
            Ok((LambdaCheck { lambda: lambda.clone(), min_eigenvalue }, vector))
        })
        .collect::<Result<_>>()?;
    let violation = per_lambda.iter().find_map(|(c, v)| v.as_ref().map(|v| (c.lambda.clone(), v.clone())));
    let admissible = base.min_eigenvalue >= threshold && violation.is_none();
    Ok(AdmissibilityReport {
        admissible,
        kernel_min_eigenvalue: base.min_eigenvalue,
        checks: per_lambda.into_iter().map(|(c, _)| c).collect(),
        violation,
    })
}

/// The kernel `F` with `K = Kref * F`, by entrywise division.
pub fn subordination_factor(k: &HermitianKernel, reference: &HermitianKernel) -> Result<HermitianKernel> {
    k.same_sample(reference)?;
    let m = k.block_dim;
    let size = k.matrix.nrows();
    let divisor = |r: usize, c: usize| -> C64 {
        if reference.block_dim == 1 {
            reference.matrix[(r / m, c / m)]
        } else {
            reference.matrix[(r, c)]
        }
    };
    if reference.block_dim != 1 && reference.block_dim != m {
        return Err(Error::DimensionMismatch(format!(
            "reference block size {} against kernel block size {m}",
            reference.block_dim
        )));
    }
    let mut out = CMat::zeros(size, size);
    for r in 0..size {
        for c in 0..size {
            let d = divisor(r, c);
            if d == C64::new(0.0, 0.0) {
                return Err(Error::ZeroEntry(r, c));
            }
            out[(r, c)] = k.matrix[(r, c)] / d;
        }
    }
    HermitianKernel::from_matrix(k.sample.clone(), m, out)
}

pub fn is_subordinate(k: &HermitianKernel, reference: &HermitianKernel, tol: f64) -> Result<bool> {
    Ok(psd_check(&subordination_factor(k, reference)?, tol).is_psd)
}

/// `K(x, y) = γ(x) γ(y)^*` with `γ(x)` of size `block_dim × rank`.
#[derive(Clone, Debug)]
pub struct KolmogorovFactor {
    pub rank: usize,
    pub maps: Vec<CMat>,
}

impl KolmogorovFactor {
    pub fn reassemble(&self) -> CMat {
        let stacked = self.stacked();
        &stacked * stacked.adjoint()
    }

    /// All `γ(x)` stacked vertically.
    pub fn stacked(&self) -> CMat {
        let rows: usize = self.maps.iter().map(|g| g.nrows()).sum();
        let mut out = CMat::zeros(rows, self.rank);
        let mut r = 0;
        for g in &self.maps {
            out.view_mut((r, 0), (g.nrows(), self.rank)).copy_from(g);
            r += g.nrows();
        }
        out
    }
}

/// Factorization keeping eigenvalues above `tol · ‖K‖₂`; fails below `-tol · ‖K‖₂`.
pub fn kolmogorov(k: &HermitianKernel, tol: f64) -> Result<KolmogorovFactor> {
    kolmogorov_with(k, tol, tol)
}

pub(crate) fn kolmogorov_with(k: &HermitianKernel, rank_tol: f64, neg_tol: f64) -> Result<KolmogorovFactor> {
    let e = linalg::eigh(k.matrix());
    let scale = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = e.values.first().copied().unwrap_or(0.0);
    if min < -neg_tol * scale.max(1.0) {
        return Err(Error::Indefinite(min));
    }
    let keep: Vec<usize> =
        (0..e.values.len()).filter(|&i| e.values[i] > rank_tol * scale && e.values[i] > 0.0).collect();
    let m = k.block_dim;
    let n = k.sample.len();
    let rank = keep.len();
    let maps = (0..n)
        .map(|x| {
            CMat::from_fn(m, rank, |r, j| {
                let i = keep[j];
                e.vectors[(x * m + r, i)] * e.values[i].sqrt()
            })
        })
        .collect();
    Ok(KolmogorovFactor { rank, maps })
}
