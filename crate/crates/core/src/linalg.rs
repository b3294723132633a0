//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Largest entry modulus, zero for empty matrices.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending order.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(m: &CMat) -> Eigh {
    let n = m.nrows();
    if n == 0 {
        return Eigh { values: Vec::new(), vectors: CMat::zeros(0, 0) };
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Eigh { values, vectors }
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigh(m).values[0]
}

/// Rebuilds `V f(Λ) V*` from an eigen-decomposition.
pub fn spectral_map(e: &Eigh, f: impl Fn(f64) -> f64) -> CMat {
    let n = e.values.len();
    let mut scaled = e.vectors.clone();
    for (k, &lam) in e.values.iter().enumerate() {
        let s = f(lam);
        for r in 0..n {
            scaled[(r, k)] *= s;
        }
    }
    &scaled * e.vectors.adjoint()
}

/// Nearest matrix with all eigenvalues at least `floor`.
pub fn project_psd(m: &CMat, floor: f64) -> CMat {
    let e = eigh(m);
    if e.values.first().is_none_or(|&v| v >= floor) {
        return hermitian_part(m);
    }
    spectral_map(&e, |v| v.max(floor))
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Hermitian square root of a PSD matrix; negative round-off is clipped.
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    spectral_map(&eigh(m), |v| v.max(0.0).sqrt())
}

/// Orthonormal basis for the column space, dropping singular values below `rel_tol * s_max`.
pub fn column_space(m: &CMat, rel_tol: f64) -> CMat {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return CMat::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return CMat::zeros(rows, 0);
    }
    let keep: Vec<usize> = (0..s.len()).filter(|&k| s[k] > rel_tol * smax).collect();
    CMat::from_fn(rows, keep.len(), |r, k| u[(r, keep[k])])
}

/// Orthonormal basis of the orthogonal complement of the span of orthonormal columns `q`.
pub fn complement_basis(q: &CMat) -> CMat {
    let n = q.nrows();
    let want = n.saturating_sub(q.ncols());
    if want == 0 {
        return CMat::zeros(n, 0);
    }
    let proj = identity(n) - q * q.adjoint();
    let e = eigh(&proj);
    CMat::from_fn(n, want, |r, k| e.vectors[(r, n - want + k)])
}

/// Dimension of the nullspace, with singular values below `rel_tol * s_max` treated as zero.
pub fn nullity(m: &CMat, rel_tol: f64) -> usize {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return cols;
    }
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&v| v > rel_tol * smax && v > 0.0).count();
    cols - rank
}

/// Unitary (or isometric) factor of the polar decomposition.
pub fn polar_factor(m: &CMat) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    u * v_t
}

/// Solves `a x = b` by LU, rejecting numerically singular systems.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    if a.nrows() == 0 {
        return Some(CMat::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.ncols())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat {
        CMat::from_row_slice(
            3,
            3,
            &[
                real(2.0),
                c64(0.5, 0.5),
                c64(0.0, -1.0),
                c64(0.5, -0.5),
                real(1.0),
                real(0.25),
                c64(0.0, 1.0),
                real(0.25),
                real(-1.0),
            ],
        )
    }

    #[test]
    fn eigh_reconstructs() {
        let m = sample();
        let e = eigh(&m);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = spectral_map(&e, |v| v);
        assert!(max_abs(&(back - m)) < 1e-12);
    }

    #[test]
    fn psd_projection_clips() {
        let p = project_psd(&sample(), 0.0);
        assert!(min_eigenvalue(&p) > -1e-12);
        let q = project_psd(&p, 0.0);
        assert!(max_abs(&(q - &p)) < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = sample();
        let psd = &m * m.adjoint();
        let r = hermitian_sqrt(&psd);
        assert!(max_abs(&(&r * &r - psd)) < 1e-10);
    }

    #[test]
    fn complement_is_orthogonal() {
        let q = column_space(&CMat::from_fn(4, 2, |r, c| c64((r + c) as f64, r as f64 - 1.0)), 1e-12);
        let perp = complement_basis(&q);
        assert_eq!(perp.ncols(), 2);
        assert!(max_abs(&(q.adjoint() * &perp)) < 1e-12);
        assert!(unitarity_defect(&perp) < 1e-12);
    }

    #[test]
    fn nullity_of_rank_one() {
        let v = CMat::from_fn(3, 1, |r, _| real(r as f64 + 1.0));
        assert_eq!(nullity(&(&v * v.adjoint()), 1e-10), 2);
    }

    #[test]
    fn polar_is_unitary() {
        assert!(unitarity_defect(&polar_factor(&sample())) < 1e-12);
    }
}
