use super::DefectData;
use crate::error::{Error, Result};
use crate::kernel::{defect_matrix, is_admissible, AdmissibilityReport, HermitianKernel};
use crate::linalg::{self, CMat, CVec, ONE};
use crate::preorder::Preordering;

/// Margin added to the repaired dual, relative to its spectral norm.
const REPAIR_MARGIN: f64 = 1e-9;

/// An admissible kernel on which the target pairs negatively.
#[derive(Clone, Debug)]
pub struct Witness {
    /// Blocks of size `m·p`, unit spectral norm.
    pub kernel: HermitianKernel,
    /// `⟨Q 1, 1⟩` with `Q(x,y) = Ã(x) K(x,y) Ã(y)^* - B̃(x) K(x,y) B̃(y)^*`.
    pub pairing: f64,
    pub admissibility: AdmissibilityReport,
}

/// Lifts a dual matrix `Y` to a witness kernel after shifting it into the dual cone.
pub(crate) fn witness_from_dual(data: &DefectData, pre: &Preordering, dual: &CMat, feas_tol: f64) -> Option<Witness> {
    let sample = data.sample();
    let n = sample.len();
    let m = data.out_dim();
    let p = data.in_dim();
    let scale = linalg::spectral_norm(dual);
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let mut shift = 0.0_f64;
    for lambda in pre.minimal_reduction().elements() {
        let w = defect_matrix(sample, lambda).ok()?;
        let weighted = CMat::from_fn(n * m, n * m, |r, c| dual[(r, c)] * w[(r / m, c / m)].conj());
        let least = linalg::min_eigenvalue(&weighted);
        let diag = (0..n).map(|x| w[(x, x)].re).fold(f64::INFINITY, f64::min);
        shift = shift.max(-least / diag);
    }
    let repaired = dual + linalg::identity(n * m) * linalg::real(shift + REPAIR_MARGIN * scale);
    let eye_p = linalg::identity(p);
    let kernel = HermitianKernel::from_blocks(sample.clone(), m * p, |x, y| {
        let block = repaired.view((x * m, y * m), (m, m)).map(|z| z.conj());
        linalg::kron(&block, &eye_p)
    })
    .ok()?;
    let norm = kernel.spectral_norm();
    let kernel = HermitianKernel::from_matrix(sample.clone(), m * p, kernel.into_matrix() / linalg::real(norm)).ok()?;
    verify_witness(&kernel, data, pre, feas_tol).ok()
}

/// Independent a-posteriori check: exact admissibility and strictly negative pairing.
pub fn verify_witness(
    kernel: &HermitianKernel,
    data: &DefectData,
    pre: &Preordering,
    feas_tol: f64,
) -> Result<Witness> {
    let m = data.out_dim();
    let p = data.in_dim();
    if kernel.block_dim() != m * p || kernel.sample().as_ref() != data.sample().as_ref() {
        return Err(Error::CertificateRejected("witness kernel has the wrong shape".into()));
    }
    let admissibility = is_admissible(kernel, pre, 0.0)?;
    if !admissibility.admissible {
        return Err(Error::CertificateRejected("witness kernel is not admissible".into()));
    }
    let n = data.sample().len();
    let mut diag = CVec::zeros(m * m);
    for i in 0..m {
        diag[i * m + i] = ONE;
    }
    let eye_m = linalg::identity(m);
    let stack = |values: &[CMat]| {
        let mut out = CVec::zeros(n * m * p);
        for (x, v) in values.iter().enumerate() {
            let lifted = linalg::kron(&eye_m, v).adjoint() * &diag;
            out.rows_mut(x * m * p, m * p).copy_from(&lifted);
        }
        out
    };
    let u = stack(data.left());
    let w = stack(data.right());
    let k = kernel.matrix();
    let pairing = (u.adjoint() * k * &u - w.adjoint() * k * &w)[(0, 0)].re;
    let norm = kernel.spectral_norm();
    if !(pairing < -feas_tol * norm) {
        return Err(Error::CertificateRejected(format!("witness pairing {pairing:.3e} is not negative enough")));
    }
    Ok(Witness { kernel: kernel.clone(), pairing, admissibility })
}
