use super::{
    agler_decompose, ample_membership, AglerCertificate, Decomposition, FunctionSample, SolverParams, Status, Witness,
};
use crate::error::Result;
use crate::preorder::Preordering;

/// Bracket `[lo, hi]` around the sampled Schur–Agler norm.
#[derive(Clone, Debug)]
pub struct NormBracket {
    pub lo: f64,
    pub hi: f64,
    /// Decomposition at `hi`.
    pub certificate: Option<AglerCertificate>,
    /// Separating kernel at `lo`.
    pub witness: Option<Witness>,
    /// Levels at which the solver could not decide; the bracket stops shrinking at the first one.
    pub unresolved: Vec<f64>,
    /// Whether the single-kernel ample test drove the bisection.
    pub ample: bool,
}

impl NormBracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, c: f64) -> bool {
        self.lo <= c && c <= self.hi
    }
}

const MAX_DOUBLINGS: usize = 60;

/// Bisection on the level `c` until the bracket is narrower than `tol`.
pub fn schur_agler_norm(
    phi: &FunctionSample,
    pre: &Preordering,
    tol: f64,
    params: &SolverParams,
) -> Result<NormBracket> {
    params.validate()?;
    let ample = pre.classify().is_ample();
    let mut certificate: Option<AglerCertificate> = None;
    let mut witness: Option<Witness> = None;
    let mut decide = |c: f64| -> Result<Status> {
        if ample {
            let member = ample_membership(phi, pre, c, params.feas_tol)?.member;
            return Ok(if member { Status::Feasible } else { Status::Infeasible });
        }
        let outcome = agler_decompose(phi, pre, c, params)?;
        let status = outcome.status();
        match outcome.decomposition {
            Decomposition::Feasible(cert) => certificate = Some(cert),
            Decomposition::Infeasible(w) => witness = Some(w),
            Decomposition::Unresolved => {}
        }
        Ok(status)
    };

    let sup = phi.sup_norm();
    let mut lo = sup;
    let mut unresolved = Vec::new();
    let floor_level = sup.max(f64::MIN_POSITIVE);
    let mut hi = floor_level;
    let mut found = decide(floor_level)? == Status::Feasible;

    let mut step = 1.0_f64.max(sup);
    for _ in 0..MAX_DOUBLINGS {
        if found {
            break;
        }
        hi = lo + step;
        match decide(hi)? {
            Status::Feasible => found = true,
            Status::Infeasible => lo = hi,
            Status::Unresolved => unresolved.push(hi),
        }
        step *= 2.0;
    }
    if !found {
        hi = f64::INFINITY;
    }

    while found && hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match decide(mid)? {
            Status::Feasible => hi = mid,
            Status::Infeasible => lo = mid,
            Status::Unresolved => {
                unresolved.push(mid);
                break;
            }
        }
    }

    if ample {
        if found {
            certificate = agler_decompose(phi, pre, hi, params)?.certificate().cloned();
        }
        witness = agler_decompose(phi, pre, lo.max(f64::MIN_POSITIVE), params)?.witness().cloned();
    }
    let certificate = certificate.filter(|c| c.level == hi);
    Ok(NormBracket { lo, hi, certificate, witness, unresolved, ample })
}
