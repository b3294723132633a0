use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::preorder::MultiIndex;
use crate::testfn::{row_len, sigma_at};

pub const UNITARY_TOL: f64 = 1e-10;

/// `mult` copies of the auxiliary function of `lambda` in the state space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionBlock {
    pub lambda: MultiIndex,
    pub mult: usize,
}

impl PartitionBlock {
    pub fn new(lambda: MultiIndex, mult: usize) -> Self {
        PartitionBlock { lambda, mult }
    }

    pub fn width(&self) -> usize {
        self.mult * row_len(&self.lambda)
    }
}

/// Block operator `[[A, B], [C, D]]` on state ⊕ coefficient space.
#[derive(Clone, Debug)]
pub struct Colligation {
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
    partition: Vec<PartitionBlock>,
    contractive: bool,
}

impl Colligation {
    /// Checked constructor; the assembled operator must be unitary.
    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat, partition: Vec<PartitionBlock>) -> Result<Self> {
        let coll = Self::assemble(a, b, c, d, partition, false)?;
        let defect = coll.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::Numerical(format!("colligation is not unitary (defect {defect:.3e})")));
        }
        Ok(coll)
    }

    /// Accepts any contraction.
    pub fn new_contractive(a: CMat, b: CMat, c: CMat, d: CMat, partition: Vec<PartitionBlock>) -> Result<Self> {
        let coll = Self::assemble(a, b, c, d, partition, true)?;
        let norm = linalg::spectral_norm(&coll.unitary());
        if norm > 1.0 + UNITARY_TOL {
            return Err(Error::Numerical(format!("colligation has norm {norm:.12} > 1")));
        }
        Ok(coll)
    }

    /// Splits a square operator on `state ⊕ io` into its four blocks.
    pub fn from_operator(u: &CMat, partition: Vec<PartitionBlock>, contractive: bool) -> Result<Self> {
        let e: usize = partition.iter().map(PartitionBlock::width).sum();
        if u.nrows() != u.ncols() || u.nrows() < e {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator cannot hold a {e}-dimensional state space",
                u.nrows(),
                u.ncols()
            )));
        }
        let h = u.nrows() - e;
        let a = u.view((0, 0), (e, e)).into_owned();
        let b = u.view((0, e), (e, h)).into_owned();
        let c = u.view((e, 0), (h, e)).into_owned();
        let d = u.view((e, e), (h, h)).into_owned();
        if contractive {
            Self::new_contractive(a, b, c, d, partition)
        } else {
            Self::new(a, b, c, d, partition)
        }
    }

    fn assemble(a: CMat, b: CMat, c: CMat, d: CMat, partition: Vec<PartitionBlock>, contractive: bool) -> Result<Self> {
        let e = a.nrows();
        let h = d.nrows();
        let shapes_ok = a.ncols() == e
            && b.nrows() == e
            && b.ncols() == h
            && c.nrows() == h
            && c.ncols() == e
            && d.ncols() == h
            && h > 0;
        if !shapes_ok {
            return Err(Error::DimensionMismatch("colligation block shapes".into()));
        }
        if let Some(bad) = partition.iter().find(|p| !p.lambda.is_binary() || p.lambda.is_zero()) {
            return Err(Error::Unsupported(format!("partition entry {}", bad.lambda)));
        }
        if let Some(first) = partition.first() {
            if partition.iter().any(|p| p.lambda.dim() != first.lambda.dim()) {
                return Err(Error::DimensionMismatch("partition multi-indices differ in length".into()));
            }
        }
        let width: usize = partition.iter().map(PartitionBlock::width).sum();
        if width != e {
            return Err(Error::DimensionMismatch(format!("partition spans {width} state dimensions, A is {e}x{e}")));
        }
        Ok(Colligation { a, b, c, d, partition, contractive })
    }

    /// No state; `W ≡ 1`.
    pub fn identity(io_dim: usize) -> Result<Self> {
        Self::new(
            CMat::zeros(0, 0),
            CMat::zeros(0, io_dim),
            CMat::zeros(io_dim, 0),
            linalg::identity(io_dim),
            Vec::new(),
        )
    }

    /// `W = ψ_i ⊗ 1`, with `i` zero-based among `dim` test functions.
    pub fn test_function(dim: usize, i: usize, io_dim: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::DimensionMismatch(format!("test function {i} of {dim}")));
        }
        Self::new(
            CMat::zeros(io_dim, io_dim),
            linalg::identity(io_dim),
            linalg::identity(io_dim),
            CMat::zeros(io_dim, io_dim),
            vec![PartitionBlock::new(MultiIndex::unit(dim, i), io_dim)],
        )
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn d(&self) -> &CMat {
        &self.d
    }

    pub fn partition(&self) -> &[PartitionBlock] {
        &self.partition
    }

    pub fn is_contractive_only(&self) -> bool {
        self.contractive
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn io_dim(&self) -> usize {
        self.d.nrows()
    }

    /// Number of test functions, if the partition is nonempty.
    pub fn point_dim(&self) -> Option<usize> {
        self.partition.first().map(|p| p.lambda.dim())
    }

    pub fn unitary(&self) -> CMat {
        let (e, h) = (self.state_dim(), self.io_dim());
        let mut u = CMat::zeros(e + h, e + h);
        u.view_mut((0, 0), (e, e)).copy_from(&self.a);
        u.view_mut((0, e), (e, h)).copy_from(&self.b);
        u.view_mut((e, 0), (h, e)).copy_from(&self.c);
        u.view_mut((e, e), (h, h)).copy_from(&self.d);
        u
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.unitary())
    }

    /// `S(x) = ⊕_λ 1_{r_λ} ⊗ σ_λ(x)`.
    pub fn state_operator(&self, point: &[C64]) -> Result<CMat> {
        let blocks = self
            .partition
            .iter()
            .map(|p| Ok(linalg::kron(&linalg::identity(p.mult), &sigma_at(point, &p.lambda)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(linalg::block_diag(&blocks))
    }

    /// `D + C S (1 - A S)^{-1} B` for a given state operator `S`.
    pub fn transfer_with(&self, s: &CMat) -> Result<CMat> {
        transfer_formula(&self.a, &self.b, &self.c, &self.d, s)
    }
}

pub(crate) fn transfer_formula(a: &CMat, b: &CMat, c: &CMat, d: &CMat, s: &CMat) -> Result<CMat> {
    let e = a.nrows();
    if e == 0 {
        return Ok(d.clone());
    }
    let system = linalg::identity(e) - a * s;
    let solved = linalg::solve(&system, b)
        .ok_or_else(|| Error::Numerical("resolvent of the state operator is singular".into()))?;
    Ok(d + c * s * solved)
}

/// `W_Σ(x)` at a point of the open polydisk.
pub fn eval_transfer(coll: &Colligation, point: &[C64]) -> Result<CMat> {
    if let Some(d) = coll.point_dim() {
        if d != point.len() {
            return Err(Error::DimensionMismatch(format!(
                "colligation over {d} test functions evaluated at a {}-coordinate point",
                point.len()
            )));
        }
    }
    if let Some(z) = point.iter().find(|z| !(z.norm() < 1.0)) {
        return Err(Error::Domain(format!("coordinate {z} is not in the open disk")));
    }
    coll.transfer_with(&coll.state_operator(point)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Compose {
    /// `W = W₁ W₂`.
    Product,
    /// `W = t W₁ + (1 - t) W₂`.
    Convex(f64),
}

pub fn transfer_compose(s1: &Colligation, s2: &Colligation, mode: Compose) -> Result<Colligation> {
    if s1.io_dim() != s2.io_dim() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient spaces of size {} and {}",
            s1.io_dim(),
            s2.io_dim()
        )));
    }
    if let (Some(d1), Some(d2)) = (s1.point_dim(), s2.point_dim()) {
        if d1 != d2 {
            return Err(Error::DimensionMismatch(format!("{d1} and {d2} test functions")));
        }
    }
    let (e1, e2) = (s1.state_dim(), s2.state_dim());
    let e = e1 + e2;
    let mut partition = s1.partition.clone();
    partition.extend(s2.partition.iter().cloned());
    let mut a = CMat::zeros(e, e);
    let mut b = CMat::zeros(e, s1.io_dim());
    let mut c = CMat::zeros(s1.io_dim(), e);
    match mode {
        Compose::Product => {
            a.view_mut((0, 0), (e1, e1)).copy_from(&s1.a);
            a.view_mut((0, e1), (e1, e2)).copy_from(&(&s1.b * &s2.c));
            a.view_mut((e1, e1), (e2, e2)).copy_from(&s2.a);
            b.view_mut((0, 0), (e1, s1.io_dim())).copy_from(&(&s1.b * &s2.d));
            b.view_mut((e1, 0), (e2, s1.io_dim())).copy_from(&s2.b);
            c.view_mut((0, 0), (s1.io_dim(), e1)).copy_from(&s1.c);
            c.view_mut((0, e1), (s1.io_dim(), e2)).copy_from(&(&s1.d * &s2.c));
            let d = &s1.d * &s2.d;
            if s1.contractive || s2.contractive {
                Colligation::new_contractive(a, b, c, d, partition)
            } else {
                Colligation::new(a, b, c, d, partition)
            }
        }
        Compose::Convex(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Malformed(format!("convex weight {t} outside [0, 1]")));
            }
            let (st, su) = (C64::new(t.sqrt(), 0.0), C64::new((1.0 - t).sqrt(), 0.0));
            a.view_mut((0, 0), (e1, e1)).copy_from(&s1.a);
            a.view_mut((e1, e1), (e2, e2)).copy_from(&s2.a);
            b.view_mut((0, 0), (e1, s1.io_dim())).copy_from(&(&s1.b * st));
            b.view_mut((e1, 0), (e2, s1.io_dim())).copy_from(&(&s2.b * su));
            c.view_mut((0, 0), (s1.io_dim(), e1)).copy_from(&(&s1.c * st));
            c.view_mut((0, e1), (s1.io_dim(), e2)).copy_from(&(&s2.c * su));
            let d = &s1.d * C64::new(t, 0.0) + &s2.d * C64::new(1.0 - t, 0.0);
            Colligation::new_contractive(a, b, c, d, partition)
        }
    }
}
