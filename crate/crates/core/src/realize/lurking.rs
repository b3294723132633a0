use super::colligation::{eval_transfer, Colligation, PartitionBlock};
use super::{AglerCertificate, DefectData, FunctionSample};
use crate::error::{Error, Result};
use crate::kernel::kolmogorov_with;
use crate::linalg::{self, CMat};
use crate::testfn::psi_rows;

/// Rank cut for Kolmogorov factors and Gram matrices, relative to their norms.
const RANK_TOL: f64 = 1e-12;
/// Gram mismatch allowed, in units of the certificate tolerance.
const GRAM_FACTOR: f64 = 100.0;

#[derive(Clone, Debug)]
pub struct Realization {
    /// Realizes `W` with `b(x) = a(x) W(x)`; for function data `W = φ / c`.
    pub colligation: Colligation,
    /// `max_x ‖a(x) W(x) - b(x)‖`.
    pub node_residual: f64,
    pub gram_defect: f64,
}

/// Colligation with `c · W_Σ = φ` on the sample, `c` being the certificate level.
pub fn lurking_isometry(cert: &AglerCertificate, phi: &FunctionSample, feas_tol: f64) -> Result<Realization> {
    let data = DefectData::from_function(phi, cert.level)?;
    lurking_isometry_data(cert, &data, feas_tol)
}

/// Colligation with `b(x) = a(x) W_Σ(x)` at every node.
pub fn lurking_isometry_data(cert: &AglerCertificate, data: &DefectData, feas_tol: f64) -> Result<Realization> {
    let sample = data.sample();
    let n = sample.len();
    let m = data.out_dim();
    let p = data.in_dim();

    let mut plus_parts: Vec<CMat> = Vec::new();
    let mut minus_parts: Vec<CMat> = Vec::new();
    let mut partition = Vec::new();
    for (lambda, gamma) in &cert.gammas {
        if gamma.block_dim() != m || gamma.sample().len() != n {
            return Err(Error::CertificateRejected(format!("kernel for {lambda} has the wrong shape")));
        }
        let factor = kolmogorov_with(gamma, RANK_TOL, feas_tol.max(1e-12))?;
        if factor.rank == 0 {
            continue;
        }
        let rows = psi_rows(sample, lambda)?;
        let width = factor.rank * rows.plus.ncols();
        let mut plus = CMat::zeros(n * m, width);
        let mut minus = CMat::zeros(n * m, width);
        for x in 0..n {
            let g = &factor.maps[x];
            plus.view_mut((x * m, 0), (m, width)).copy_from(&linalg::kron(g, &rows.plus.rows(x, 1).into_owned()));
            minus.view_mut((x * m, 0), (m, width)).copy_from(&linalg::kron(g, &rows.minus.rows(x, 1).into_owned()));
        }
        plus_parts.push(plus);
        minus_parts.push(minus);
        partition.push(PartitionBlock::new(lambda.clone(), factor.rank));
    }
    let e: usize = plus_parts.iter().map(|b| b.ncols()).sum();

    // Columns x·m + j hold v⁻ = [g⁻(x)^*; a(x)^*] e_j and v⁺ = [g⁺(x)^*; b(x)^*] e_j.
    let mut v_minus = CMat::zeros(e + p, n * m);
    let mut v_plus = CMat::zeros(e + p, n * m);
    let mut offset = 0;
    for (plus, minus) in plus_parts.iter().zip(&minus_parts) {
        let w = plus.ncols();
        v_plus.view_mut((offset, 0), (w, n * m)).copy_from(&plus.adjoint());
        v_minus.view_mut((offset, 0), (w, n * m)).copy_from(&minus.adjoint());
        offset += w;
    }
    for x in 0..n {
        v_minus.view_mut((e, x * m), (p, m)).copy_from(&data.left()[x].adjoint());
        v_plus.view_mut((e, x * m), (p, m)).copy_from(&data.right()[x].adjoint());
    }

    let gram_minus = v_minus.adjoint() * &v_minus;
    let gram_plus = v_plus.adjoint() * &v_plus;
    let gram_defect = linalg::max_abs(&(&gram_minus - &gram_plus));
    let gram_scale = linalg::max_abs(&gram_minus).max(1.0);
    if gram_defect > GRAM_FACTOR * feas_tol * gram_scale {
        return Err(Error::CertificateRejected(format!("Gram matrices differ by {gram_defect:.3e}")));
    }

    let v = isometric_completion(&v_minus, &v_plus, &((gram_minus + gram_plus) * linalg::real(0.5)));
    let u = linalg::polar_factor(&v.adjoint());
    let colligation = Colligation::from_operator(&u, partition, false)?;

    let mut node_residual = 0.0_f64;
    for x in 0..n {
        let w = eval_transfer(&colligation, sample.point(x))?;
        node_residual = node_residual.max(linalg::max_abs(&(&data.left()[x] * w - &data.right()[x])));
    }
    Ok(Realization { colligation, node_residual, gram_defect })
}

/// A unitary mapping each column of `from` to the matching column of `to`, given equal Gram matrices.
fn isometric_completion(from: &CMat, to: &CMat, gram: &CMat) -> CMat {
    let dim = from.nrows();
    let e = linalg::eigh(gram);
    let top = e.values.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > RANK_TOL * top && e.values[i] > 0.0).collect();
    let whiten = CMat::from_fn(gram.nrows(), keep.len(), |r, k| e.vectors[(r, keep[k])] / e.values[keep[k]].sqrt());
    let q_from = linalg::polar_factor(&(from * &whiten));
    let q_to = linalg::polar_factor(&(to * &whiten));
    let c_from = linalg::complement_basis(&q_from);
    let c_to = linalg::complement_basis(&q_to);
    debug_assert_eq!(q_from.ncols() + c_from.ncols(), dim);
    &q_to * q_from.adjoint() + c_to * c_from.adjoint()
}
