//! Commuting matrix tuples: hereditary defects, functional calculus and the boundary examples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, C64, ONE, ZERO};
use crate::preorder::{parity_split, MultiIndex, Preordering};
use crate::realize::colligation::{transfer_formula, Colligation};

const COMMUTE_TOL: f64 = 1e-12;
const CONTRACTION_TOL: f64 = 1e-12;
/// Rescaling applied to norm-one tuples when a strict evaluation is requested.
pub const STRICT_RESCALE: f64 = 1.0 - 1e-6;
/// Singular values below this fraction of the largest count as zero.
pub const NULLSPACE_TOL: f64 = 1e-10;

/// Pairwise commuting contractions of a common size.
#[derive(Clone, Debug)]
pub struct CommutingTuple {
    mats: Vec<CMat>,
}

impl CommutingTuple {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(Error::InvalidTuple("empty tuple".into()));
        };
        let q = first.nrows();
        if q == 0 || mats.iter().any(|t| t.nrows() != q || t.ncols() != q) {
            return Err(Error::InvalidTuple("matrices must be square of one common size".into()));
        }
        let norms: Vec<f64> = mats.iter().map(linalg::spectral_norm).collect();
        if let Some((j, n)) = norms.iter().enumerate().find(|(_, &n)| n > 1.0 + CONTRACTION_TOL) {
            return Err(Error::InvalidTuple(format!("T{} has norm {n:.15} > 1", j + 1)));
        }
        for j in 0..mats.len() {
            for k in 0..j {
                let comm = linalg::max_abs(&(&mats[j] * &mats[k] - &mats[k] * &mats[j]));
                if comm > COMMUTE_TOL {
                    return Err(Error::InvalidTuple(format!(
                        "T{} and T{} fail to commute (defect {comm:.3e})",
                        k + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(CommutingTuple { mats })
    }

    pub fn dim(&self) -> usize {
        self.mats.len()
    }

    pub fn size(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.mats
    }

    pub fn max_norm(&self) -> f64 {
        self.mats.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    pub fn is_strict(&self) -> bool {
        self.max_norm() < 1.0
    }

    pub fn max_commutator(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.mats.len() {
            for k in 0..j {
                worst = worst.max(linalg::max_abs(&(&self.mats[j] * &self.mats[k] - &self.mats[k] * &self.mats[j])));
            }
        }
        worst
    }

    pub fn scaled(&self, r: f64) -> Result<Self> {
        Self::new(self.mats.iter().map(|t| t * real(r)).collect())
    }

    /// `T^μ = T_1^{μ_1} ⋯ T_d^{μ_d}`.
    pub fn monomial(&self, mu: &MultiIndex) -> Result<CMat> {
        if mu.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!("multi-index {mu} against a {}-tuple", self.dim())));
        }
        let mut out = linalg::identity(self.size());
        for (t, &k) in self.mats.iter().zip(mu.entries()) {
            for _ in 0..k {
                out = &out * t;
            }
        }
        Ok(out)
    }

    /// Compression `V^* T_j V` to the range of an isometry `V`.
    pub fn compress(&self, basis: &CMat) -> Result<Self> {
        if basis.nrows() != self.size() {
            return Err(Error::DimensionMismatch("basis rows must match the tuple size".into()));
        }
        Self::new(self.mats.iter().map(|t| basis.adjoint() * t * basis).collect())
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `Σ_{μ ≤ λ} (-1)^{|μ|} Π_j C(λ_j, μ_j) T^μ (T^μ)^*`.
pub fn hereditary_defect(t: &CommutingTuple, lambda: &MultiIndex) -> Result<CMat> {
    let mut out = CMat::zeros(t.size(), t.size());
    for mu in lambda.predecessors() {
        let weight: f64 = lambda.entries().iter().zip(mu.entries()).map(|(&l, &m)| binomial(l, m)).product();
        let sign = if mu.degree() % 2 == 0 { 1.0 } else { -1.0 };
        let tm = t.monomial(&mu)?;
        out += &tm * tm.adjoint() * real(sign * weight);
    }
    Ok(out)
}

/// `ψ^+(T)ψ^+(T)^* - ψ^-(T)ψ^-(T)^*` with the even/odd monomial rows.
pub fn hereditary_defect_rows(t: &CommutingTuple, lambda: &MultiIndex) -> Result<CMat> {
    let (even, odd) = parity_split(lambda)?;
    let row = |list: &[MultiIndex]| -> Result<CMat> {
        let q = t.size();
        let mut out = CMat::zeros(q, q * list.len());
        for (k, mu) in list.iter().enumerate() {
            out.view_mut((0, k * q), (q, q)).copy_from(&t.monomial(mu)?);
        }
        Ok(out)
    };
    let plus = row(&even)?;
    let minus = row(&odd)?;
    Ok(&plus * plus.adjoint() - &minus * minus.adjoint())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrehmerReport {
    pub brehmer: bool,
    /// Least eigenvalue of the hereditary defect for each maximal element.
    pub margins: Vec<(MultiIndex, f64)>,
}

pub fn is_brehmer(t: &CommutingTuple, pre: &Preordering, tol: f64) -> Result<BrehmerReport> {
    let margins = pre
        .minimal_reduction()
        .elements()
        .iter()
        .map(|l| Ok((l.clone(), linalg::min_eigenvalue(&hereditary_defect(t, l)?))))
        .collect::<Result<Vec<_>>>()?;
    let brehmer = margins.iter().all(|(_, m)| *m >= -tol);
    Ok(BrehmerReport { brehmer, margins })
}

/// Polynomial in the test functions with square matrix coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct TestPolynomial {
    dim: usize,
    block: usize,
    terms: BTreeMap<MultiIndex, CMat>,
}

impl TestPolynomial {
    pub fn new(dim: usize, terms: Vec<(MultiIndex, CMat)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::Malformed("polynomial without terms".into()));
        };
        let block = first.nrows();
        let mut map = BTreeMap::new();
        for (mu, coeff) in terms {
            if mu.dim() != dim {
                return Err(Error::DimensionMismatch(format!("monomial {mu} in {dim} variables")));
            }
            if coeff.nrows() != block || coeff.ncols() != block {
                return Err(Error::DimensionMismatch("coefficients must share one square shape".into()));
            }
            *map.entry(mu).or_insert_with(|| CMat::zeros(block, block)) += coeff;
        }
        Ok(TestPolynomial { dim, block, terms: map })
    }

    pub fn scalar(dim: usize, terms: &[(&[u32], C64)]) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|(e, c)| Ok((MultiIndex::new(e.to_vec())?, CMat::from_element(1, 1, *c))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, terms)
    }

    /// `z₁² + z₂² + z₃² - 2(z₁z₂ + z₂z₃ + z₃z₁)`.
    pub fn kaijser_varopoulos() -> Self {
        Self::scalar(
            3,
            &[
                (&[2, 0, 0], ONE),
                (&[0, 2, 0], ONE),
                (&[0, 0, 2], ONE),
                (&[1, 1, 0], real(-2.0)),
                (&[0, 1, 1], real(-2.0)),
                (&[1, 0, 1], real(-2.0)),
            ],
        )
        .expect("well-formed terms")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CMat)> {
        self.terms.iter()
    }

    pub fn eval_point(&self, point: &[C64]) -> Result<CMat> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch("point dimension".into()));
        }
        let mut out = CMat::zeros(self.block, self.block);
        for (mu, c) in &self.terms {
            out += c * crate::testfn::monomial(point, mu);
        }
        Ok(out)
    }
}

/// `Σ_μ coeff_μ ⊗ T^μ`.
pub fn eval_polynomial(p: &TestPolynomial, t: &CommutingTuple) -> Result<CMat> {
    if p.dim != t.dim() {
        return Err(Error::DimensionMismatch(format!("polynomial in {} variables at a {}-tuple", p.dim, t.dim())));
    }
    let size = p.block * t.size();
    let mut out = CMat::zeros(size, size);
    for (mu, c) in &p.terms {
        out += linalg::kron(c, &t.monomial(mu)?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TupleEvaluation {
    pub value: CMat,
    pub norm: f64,
    /// Factor applied to a non-strict tuple before evaluating.
    pub rescaled: Option<f64>,
}

/// Transfer function of a classical colligation with `T_j` substituted for `z_j`.
pub fn eval_colligation_at_tuple(coll: &Colligation, t: &CommutingTuple, rescale: bool) -> Result<TupleEvaluation> {
    let d = t.dim();
    for block in coll.partition() {
        let classical = block.lambda.dim() == d && block.lambda.degree() == 1;
        if !classical {
            return Err(Error::Unsupported(format!(
                "tuple evaluation needs unit multi-indices in {d} variables, found {}",
                block.lambda
            )));
        }
    }
    let (tuple, rescaled) = if t.is_strict() {
        (t.clone(), None)
    } else if rescale {
        (t.scaled(STRICT_RESCALE)?, Some(STRICT_RESCALE))
    } else {
        return Err(Error::InvalidTuple(format!("tuple norm {:.15} is not below one", t.max_norm())));
    };
    let q = tuple.size();
    let eye_q = linalg::identity(q);
    let blocks: Vec<CMat> = coll
        .partition()
        .iter()
        .map(|b| {
            let j = b.lambda.support()[0];
            linalg::kron(&linalg::identity(b.mult), &tuple.matrices()[j])
        })
        .collect();
    let s = linalg::block_diag(&blocks);
    let lift = |m: &CMat| linalg::kron(m, &eye_q);
    let value = transfer_formula(&lift(coll.a()), &lift(coll.b()), &lift(coll.c()), &lift(coll.d()), &s)?;
    let norm = linalg::spectral_norm(&value);
    Ok(TupleEvaluation { value, norm, rescaled })
}

/// `T₁ = [[0, 1], [0, 0]]`, `T₂ = [[0, U], [0, 0]]`, `T₃ = [[0, V], [0, 0]]` for anticommuting unitaries.
pub fn parrott_tuple(u: &CMat, v: &CMat) -> Result<CommutingTuple> {
    let k = u.nrows();
    if u.ncols() != k || v.shape() != (k, k) || k == 0 {
        return Err(Error::InvalidTuple("U and V must be square of one size".into()));
    }
    for (name, w) in [("U", u), ("V", v)] {
        let defect = linalg::unitarity_defect(w);
        if defect > COMMUTE_TOL {
            return Err(Error::InvalidTuple(format!("{name} is not unitary (defect {defect:.3e})")));
        }
    }
    let anti = linalg::max_abs(&(u * v + v * u));
    if anti > COMMUTE_TOL {
        return Err(Error::InvalidTuple(format!("UV + VU = {anti:.3e}, not zero")));
    }
    let corner = |m: &CMat| {
        let mut t = CMat::zeros(2 * k, 2 * k);
        t.view_mut((0, k), (k, k)).copy_from(m);
        t
    };
    CommutingTuple::new(vec![corner(&linalg::identity(k)), corner(u), corner(v)])
}

pub fn parrott_pair() -> (CMat, CMat) {
    let u = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    let v = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    (u, v)
}

pub fn parrott_default() -> CommutingTuple {
    let (u, v) = parrott_pair();
    parrott_tuple(&u, &v).expect("diag(1,-1) and the flip anticommute")
}

/// Three nilpotent 4×4 contractions from unit vectors of `ℝ²` summing to zero.
pub fn gkvw_tuple(vectors: [[f64; 2]; 3]) -> Result<CommutingTuple> {
    for (j, u) in vectors.iter().enumerate() {
        let norm = (u[0] * u[0] + u[1] * u[1]).sqrt();
        if (norm - 1.0).abs() > COMMUTE_TOL {
            return Err(Error::InvalidTuple(format!("u{} has length {norm}", j + 1)));
        }
    }
    let sum = [0, 1].map(|i| vectors.iter().map(|u| u[i]).sum::<f64>());
    if sum.iter().any(|s| s.abs() > COMMUTE_TOL) {
        return Err(Error::InvalidTuple(format!("u1 + u2 + u3 = {sum:?}, not zero")));
    }
    let mats = vectors
        .iter()
        .map(|u| {
            let mut t = CMat::zeros(4, 4);
            t[(0, 1)] = real(u[0]);
            t[(0, 2)] = real(u[1]);
            t[(1, 3)] = real(u[0]);
            t[(2, 3)] = real(u[1]);
            t
        })
        .collect();
    CommutingTuple::new(mats)
}

pub fn gkvw_vectors() -> [[f64; 2]; 3] {
    let h = 3f64.sqrt() / 2.0;
    [[0.0, 1.0], [h, -0.5], [-h, -0.5]]
}

pub fn gkvw_default() -> CommutingTuple {
    gkvw_tuple(gkvw_vectors()).expect("the three vectors sum to zero")
}

/// The coupling matrix `(1/√3)(2·I - J)` shared by both Kaijser–Varopoulos tuples.
fn kv_coupling() -> [[f64; 3]; 3] {
    let s = 1.0 / 3f64.sqrt();
    [[s, -s, -s], [-s, s, -s], [-s, -s, s]]
}

/// The 6×6 boundary tuple.
pub fn kv_tuple() -> CommutingTuple {
    let a = kv_coupling();
    let r6 = 1.0 / 6f64.sqrt();
    let mats = (0..3)
        .map(|j| {
            let mut t = CMat::zeros(6, 6);
            t[(j + 1, 0)] = ONE;
            for k in 0..3 {
                t[(4, k + 1)] = real(a[j][k]);
                t[(5, k + 1)] = real(if j == k { 2.0 * r6 } else { r6 });
            }
            t
        })
        .collect();
    CommutingTuple::new(mats).expect("the printed matrices commute")
}

/// The classical 5×5 tuple: `T_j e₀ = e_j`, `T_j e_k = a_{jk} e₄`.
pub fn kv_classical_tuple() -> CommutingTuple {
    let a = kv_coupling();
    let mats = (0..3)
        .map(|j| {
            let mut t = CMat::zeros(5, 5);
            t[(j + 1, 0)] = ONE;
            for k in 0..3 {
                t[(4, k + 1)] = real(a[j][k]);
            }
            t
        })
        .collect();
    CommutingTuple::new(mats).expect("the classical matrices commute")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    pub max_defect: f64,
    pub monomials_checked: usize,
}

/// Compares `V^* p(big) V` with `p(small)` over all monomials of degree at most `degree`.
pub fn dilation_check(
    big: &CommutingTuple,
    small: &CommutingTuple,
    basis: &CMat,
    degree: u32,
) -> Result<DilationReport> {
    if big.dim() != small.dim() || basis.nrows() != big.size() || basis.ncols() != small.size() {
        return Err(Error::DimensionMismatch("tuples and basis are incompatible".into()));
    }
    let d = big.dim();
    let mut monomials = vec![MultiIndex::zeros(d)];
    let mut frontier = monomials.clone();
    for _ in 0..degree {
        let mut next = Vec::new();
        for mu in &frontier {
            for j in 0..d {
                let mut e = mu.entries().to_vec();
                e[j] += 1;
                let m = MultiIndex::new(e)?;
                if !next.contains(&m) {
                    next.push(m);
                }
            }
        }
        monomials.extend(next.iter().cloned());
        frontier = next;
    }
    let mut max_defect = 0.0_f64;
    for mu in &monomials {
        let compressed = basis.adjoint() * big.monomial(mu)? * basis;
        max_defect = max_defect.max(linalg::max_abs(&(compressed - small.monomial(mu)?)));
    }
    Ok(DilationReport { max_defect, monomials_checked: monomials.len() })
}

/// Dimension of `{X : X T_j = T_j X, X T_j^* = T_j^* X}`.
pub fn commutant_dimension(t: &CommutingTuple) -> usize {
    let q = t.size();
    let eye = linalg::identity(q);
    let mut rows = Vec::new();
    for m in t.matrices() {
        for op in [m.clone(), m.adjoint()] {
            // vec(XT - TX) = (Tᵀ ⊗ 1 - 1 ⊗ T) vec(X) for column-major vec.
            rows.push(linalg::kron(&op.transpose(), &eye) - linalg::kron(&eye, &op));
        }
    }
    let mut stacked = CMat::zeros(rows.len() * q * q, q * q);
    for (k, r) in rows.iter().enumerate() {
        stacked.view_mut((k * q * q, 0), (q * q, q * q)).copy_from(r);
    }
    linalg::nullity(&stacked, NULLSPACE_TOL)
}

/// Least singular value of `(a, b, c) ↦ (aU - b, aV - c, bV - cU)` on `outer × k` blocks.
///
/// A positive value means the only solution is `a = b = c = 0`.
pub fn parrott_rigidity(u: &CMat, v: &CMat, outer: usize) -> Result<f64> {
    let k = u.nrows();
    if u.shape() != (k, k) || v.shape() != (k, k) || outer == 0 {
        return Err(Error::DimensionMismatch("U, V square of one size and outer > 0".into()));
    }
    let block = outer * k;
    let eye_o = linalg::identity(outer);
    // Right multiplication by M acts on column-major vec(a) as Mᵀ ⊗ 1.
    let right = |m: &CMat| linalg::kron(&m.transpose(), &eye_o);
    let id = linalg::identity(block);
    let mut op = CMat::zeros(3 * block, 3 * block);
    op.view_mut((0, 0), (block, block)).copy_from(&right(u));
    op.view_mut((0, block), (block, block)).copy_from(&(-&id));
    op.view_mut((block, 0), (block, block)).copy_from(&right(v));
    op.view_mut((block, 2 * block), (block, block)).copy_from(&(-&id));
    op.view_mut((2 * block, block), (block, block)).copy_from(&right(v));
    op.view_mut((2 * block, 2 * block), (block, block)).copy_from(&(-right(u)));
    Ok(linalg::singular_values(&op).last().copied().unwrap_or(0.0))
}
