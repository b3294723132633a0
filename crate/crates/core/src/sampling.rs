//! Seeded random instances for property suites and benchmarks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::kernel::PointSample;
use crate::linalg::{self, CMat, C64};
use crate::opmodel::CommutingTuple;
use crate::preorder::MultiIndex;
use crate::realize::colligation::{Colligation, PartitionBlock};

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) / std::f64::consts::SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary via QR with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let qr = ginibre(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for row in 0..n {
            q[(row, k)] *= phase;
        }
    }
    q
}

/// Uniform point in the disk of the given radius.
pub fn disk_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> C64 {
    C64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU)
}

pub fn random_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, radius: f64) -> Result<PointSample> {
    let pts = (0..n).map(|_| (0..d).map(|_| disk_point(rng, radius)).collect()).collect();
    PointSample::new(pts)
}

pub fn random_colligation<R: Rng + ?Sized>(
    rng: &mut R,
    partition: Vec<PartitionBlock>,
    io_dim: usize,
) -> Result<Colligation> {
    let e: usize = partition.iter().map(PartitionBlock::width).sum();
    let u = random_unitary(rng, e + io_dim);
    Colligation::from_operator(&u, partition, false)
}

/// Classical partition `{e_j}` with the given multiplicities.
pub fn classical_partition(mults: &[usize]) -> Vec<PartitionBlock> {
    let d = mults.len();
    mults
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(j, &m)| PartitionBlock::new(MultiIndex::unit(d, j), m))
        .collect()
}

/// Commuting strict contractions built as polynomials in one random matrix,
/// or as simultaneously diagonal unitary-conjugated scalars.
pub fn random_commuting_tuple<R: Rng + ?Sized>(rng: &mut R, d: usize, q: usize) -> Result<CommutingTuple> {
    let mats: Vec<CMat> = if rng.random::<bool>() {
        let base = ginibre(rng, q, q);
        let base = &base / C64::new(linalg::spectral_norm(&base).max(1e-12), 0.0);
        let square = &base * &base;
        (0..d)
            .map(|_| {
                let coeffs = [gaussian(rng), gaussian(rng), gaussian(rng)];
                let t = linalg::identity(q) * coeffs[0] + &base * coeffs[1] + &square * coeffs[2];
                let target = 0.999 * rng.random::<f64>().powf(0.25);
                let norm = linalg::spectral_norm(&t).max(1e-12);
                t * C64::new(target / norm, 0.0)
            })
            .collect()
    } else {
        let u = random_unitary(rng, q);
        (0..d)
            .map(|_| {
                let diag = CMat::from_fn(q, q, |r, c| if r == c { disk_point(rng, 0.999) } else { C64::new(0.0, 0.0) });
                &u * diag * u.adjoint()
            })
            .collect()
    };
    CommutingTuple::new(mats)
}
