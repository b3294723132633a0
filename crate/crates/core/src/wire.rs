//! JSON documents: complex numbers as `[re, im]`, matrices as arrays of rows.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{HermitianKernel, PointSample};
use crate::linalg::{CMat, C64};
use crate::opmodel::CommutingTuple;
use crate::pick::PickProblem;
use crate::preorder::{MultiIndex, Preordering};
use crate::realize::{Colligation, FunctionSample, PartitionBlock, SolverParams};
use crate::testfn::{AuxFunctionSample, AuxMode};

pub const SCHEMA: &str = "agler-lab/1";

pub type Complex = [f64; 2];
pub type Matrix = Vec<Vec<Complex>>;

pub fn complex_to(z: C64) -> Complex {
    [z.re, z.im]
}

pub fn complex_from(z: Complex) -> C64 {
    C64::new(z[0], z[1])
}

pub fn matrix_to(m: &CMat) -> Matrix {
    m.row_iter().map(|row| row.iter().map(|&z| complex_to(z)).collect()).collect()
}

pub fn matrix_from(rows: &Matrix) -> Result<CMat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Malformed("ragged matrix rows".into()));
    }
    if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Malformed("non-finite matrix entry".into()));
    }
    Ok(CMat::from_fn(r, c, |i, j| complex_from(rows[i][j])))
}

fn matrices_from(list: &[Matrix]) -> Result<Vec<CMat>> {
    list.iter().map(matrix_from).collect()
}

/// A point: one `[re, im]` pair per coordinate, or a bare pair in one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Many(Vec<Complex>),
    One(Complex),
}

impl Point {
    pub fn coords(&self) -> Vec<C64> {
        match self {
            Point::Many(v) => v.iter().map(|&z| complex_from(z)).collect(),
            Point::One(z) => vec![complex_from(*z)],
        }
    }
}

pub fn points_to(sample: &PointSample) -> Vec<Point> {
    sample.points().iter().map(|p| Point::Many(p.iter().map(|&z| complex_to(z)).collect())).collect()
}

pub fn points_from(points: &[Point]) -> Result<PointSample> {
    PointSample::new(points.iter().map(Point::coords).collect())
}

fn preordering_from(entries: &[Vec<u32>]) -> Result<Preordering> {
    Preordering::new(entries.iter().cloned().map(MultiIndex::new).collect::<Result<Vec<_>>>()?)
}

fn preordering_to(pre: &Preordering) -> Vec<Vec<u32>> {
    pre.elements().iter().map(|m| m.entries().to_vec()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDoc {
    pub points: Vec<Point>,
    pub block_dim: usize,
    /// `blocks[x][y]` is the `block_dim × block_dim` value `K(x, y)`.
    pub blocks: Vec<Vec<Matrix>>,
}

impl KernelDoc {
    pub fn from_kernel(k: &HermitianKernel) -> Self {
        let n = k.sample().len();
        KernelDoc {
            points: points_to(k.sample()),
            block_dim: k.block_dim(),
            blocks: (0..n).map(|x| (0..n).map(|y| matrix_to(&k.block(x, y))).collect()).collect(),
        }
    }

    pub fn to_kernel(&self) -> Result<HermitianKernel> {
        let sample = Arc::new(points_from(&self.points)?);
        self.to_kernel_on(sample)
    }

    pub fn to_kernel_on(&self, sample: Arc<PointSample>) -> Result<HermitianKernel> {
        let n = sample.len();
        let m = self.block_dim;
        if self.blocks.len() != n || self.blocks.iter().any(|row| row.len() != n) {
            return Err(Error::Malformed(format!("kernel needs {n}×{n} blocks")));
        }
        let mut matrix = CMat::zeros(n * m, n * m);
        for (x, row) in self.blocks.iter().enumerate() {
            for (y, block) in row.iter().enumerate() {
                let b = matrix_from(block)?;
                if b.shape() != (m, m) {
                    return Err(Error::Malformed(format!("block ({x}, {y}) is not {m}×{m}")));
                }
                matrix.view_mut((x * m, y * m), (m, m)).copy_from(&b);
            }
        }
        HermitianKernel::from_matrix(sample, m, matrix)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxDoc {
    pub lambda: MultiIndex,
    pub n: usize,
    pub sigma: BTreeMap<String, Matrix>,
    pub mode: AuxMode,
}

impl AuxDoc {
    pub fn from_aux(aux: &AuxFunctionSample) -> Self {
        AuxDoc {
            lambda: aux.lambda.clone(),
            n: aux.n,
            sigma: aux.sigma.iter().enumerate().map(|(x, s)| (x.to_string(), matrix_to(s))).collect(),
            mode: aux.mode,
        }
    }
}

/// Decomposition, realization and norm problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub points: Vec<Point>,
    pub phi: Vec<Matrix>,
    pub preordering: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverParams>,
    /// Evaluation points for `eval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<Point>>,
}

pub struct Problem {
    pub phi: FunctionSample,
    pub pre: Preordering,
    pub level: Option<f64>,
    pub solver: Option<SolverParams>,
}

impl ProblemDoc {
    pub fn build(&self) -> Result<Problem> {
        let sample = Arc::new(points_from(&self.points)?);
        let phi = FunctionSample::new(sample, matrices_from(&self.phi)?)?;
        Ok(Problem { phi, pre: preordering_from(&self.preordering)?, level: self.c, solver: self.solver.clone() })
    }

    pub fn from_parts(phi: &FunctionSample, pre: &Preordering, level: Option<f64>) -> Self {
        ProblemDoc {
            points: points_to(phi.sample()),
            phi: phi.values().iter().map(matrix_to).collect(),
            preordering: preordering_to(pre),
            c: level,
            solver: None,
            at: None,
        }
    }
}

/// Inputs for `check-kernel`, `aux` and friends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelProblemDoc {
    pub kernel: Option<KernelDoc>,
    #[serde(default)]
    pub points: Option<Vec<Point>>,
    pub preordering: Option<Vec<Vec<u32>>>,
    pub lambda: Option<MultiIndex>,
    #[serde(default)]
    pub tol: Option<f64>,
}

impl KernelProblemDoc {
    pub fn preordering(&self) -> Result<Option<Preordering>> {
        self.preordering.as_deref().map(preordering_from).transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDoc {
    pub lambda: MultiIndex,
    pub mult: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ColligationDoc {
    pub A: Matrix,
    pub B: Matrix,
    pub C: Matrix,
    pub D: Matrix,
    pub partition: Vec<PartitionDoc>,
    #[serde(default)]
    pub contractive: bool,
}

impl ColligationDoc {
    pub fn from_colligation(c: &Colligation) -> Self {
        ColligationDoc {
            A: matrix_to(c.a()),
            B: matrix_to(c.b()),
            C: matrix_to(c.c()),
            D: matrix_to(c.d()),
            partition: c.partition().iter().map(|b| PartitionDoc { lambda: b.lambda.clone(), mult: b.mult }).collect(),
            contractive: c.is_contractive_only(),
        }
    }

    pub fn to_colligation(&self) -> Result<Colligation> {
        let e: usize = self.partition.iter().map(|b| b.mult * crate::testfn::row_len(&b.lambda)).sum();
        let d = matrix_from(&self.D)?;
        let io = d.nrows();
        // Empty state blocks may be written as `[]`; restore their shapes.
        let sized = |m: &Matrix, r: usize, c: usize| -> Result<CMat> {
            if m.is_empty() && (r == 0 || c == 0) {
                return Ok(CMat::zeros(r, c));
            }
            matrix_from(m)
        };
        let a = sized(&self.A, e, e)?;
        let b = sized(&self.B, e, io)?;
        let c = sized(&self.C, io, e)?;
        let partition = self.partition.iter().map(|p| PartitionBlock::new(p.lambda.clone(), p.mult)).collect();
        if self.contractive {
            Colligation::new_contractive(a, b, c, d, partition)
        } else {
            Colligation::new(a, b, c, d, partition)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleDoc {
    pub d: usize,
    pub q: usize,
    pub matrices: Vec<Matrix>,
}

impl TupleDoc {
    pub fn from_tuple(t: &CommutingTuple) -> Self {
        TupleDoc { d: t.dim(), q: t.size(), matrices: t.matrices().iter().map(matrix_to).collect() }
    }

    pub fn to_tuple(&self) -> Result<CommutingTuple> {
        let mats = matrices_from(&self.matrices)?;
        if mats.len() != self.d || mats.iter().any(|m| m.shape() != (self.q, self.q)) {
            return Err(Error::Malformed(format!("expected {} matrices of size {}×{}", self.d, self.q, self.q)));
        }
        CommutingTuple::new(mats)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickDoc {
    pub points: Vec<Point>,
    pub a: Vec<Matrix>,
    pub b: Vec<Matrix>,
    pub preordering: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverParams>,
    /// Extra points at which to evaluate the interpolant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<Point>>,
}

impl PickDoc {
    pub fn build(&self) -> Result<PickProblem> {
        let nodes = Arc::new(points_from(&self.points)?);
        PickProblem::new(nodes, matrices_from(&self.a)?, matrices_from(&self.b)?, preordering_from(&self.preordering)?)
    }
}

/// Writes floats with 17 significant digits so that every value round-trips exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Pretty-printing variant of [`ExactFloats`].
pub struct PrettyExact<'a> {
    pretty: serde_json::ser::PrettyFormatter<'a>,
}

impl Default for PrettyExact<'_> {
    fn default() -> Self {
        PrettyExact { pretty: serde_json::ser::PrettyFormatter::with_indent(b"  ") }
    }
}

macro_rules! delegate {
    ($($name:ident $(, $arg:ident: $ty:ty)*;)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.pretty.$name(writer $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for PrettyExact<'_> {
    delegate! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        end_object_key;
        begin_object_value;
        end_object_value;
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        ExactFloats.write_f64(writer, value)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        ExactFloats.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PrettyExact::default());
    value.serialize(&mut ser).map_err(|e| Error::Malformed(e.to_string()))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
}
