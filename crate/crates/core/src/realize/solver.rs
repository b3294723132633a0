use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::witness::{witness_from_dual, Witness};
use super::{verify_certificate, AglerCertificate, DecomposeOutcome, Decomposition, DefectData};
use crate::error::{Error, Result};
use crate::kernel::{defect_matrix, HermitianKernel};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::preorder::{MultiIndex, Preordering};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Accepted max-entry residual of the decomposition identity.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Iterations over which progress is measured for stall detection.
    pub stall_window: usize,
    /// Relative progress below which the solver counts as stalled.
    pub stall_progress: f64,
    /// Eigenvalue floor of the first phase, relative to the largest target entry.
    pub interior_shift: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            feas_tol: 1e-8,
            max_iter: 200_000,
            stall_window: 500,
            stall_progress: 1e-12,
            interior_shift: 1e-6,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.feas_tol.is_finite()) {
            return Err(Error::Malformed(format!("feas_tol {} must be positive", self.feas_tol)));
        }
        if self.max_iter == 0 || self.stall_window == 0 {
            return Err(Error::Malformed("max_iter and stall_window must be positive".into()));
        }
        if !(self.stall_progress >= 0.0 && self.interior_shift >= 0.0) {
            return Err(Error::Malformed("stall_progress and interior_shift must be non-negative".into()));
        }
        Ok(())
    }
}

const CHECK_EVERY: usize = 10;
const WITNESS_EVERY: usize = 100;
const POLISH_EVERY: usize = 2_000;
const POLISH_STEPS: usize = 60;
/// Stall threshold of the shifted phase, which only has to hand over to the exact phase.
const SHIFTED_STALL_PROGRESS: f64 = 1e-4;
/// Matrices at least this large are projected in parallel.
const PARALLEL_SIZE: usize = 48;

struct Problem<'a> {
    data: &'a DefectData,
    lambdas: &'a [MultiIndex],
    weights: Vec<CMat>,
    inv_norm: DMatrix<f64>,
    target: CMat,
    block: usize,
}

impl<'a> Problem<'a> {
    fn new(data: &'a DefectData, lambdas: &'a [MultiIndex]) -> Result<Self> {
        let weights = lambdas.iter().map(|l| defect_matrix(data.sample(), l)).collect::<Result<Vec<_>>>()?;
        let n = data.sample().len();
        let inv_norm = DMatrix::from_fn(n, n, |x, y| 1.0 / weights.iter().map(|w| w[(x, y)].norm_sqr()).sum::<f64>());
        Ok(Problem { data, lambdas, weights, inv_norm, target: data.target(), block: data.out_dim() })
    }

    fn size(&self) -> usize {
        self.target.nrows()
    }

    fn apply(&self, gammas: &[CMat]) -> CMat {
        let m = self.block;
        let mut out = CMat::zeros(self.size(), self.size());
        for (w, g) in self.weights.iter().zip(gammas) {
            for c in 0..self.size() {
                for r in 0..self.size() {
                    out[(r, c)] += w[(r / m, c / m)] * g[(r, c)];
                }
            }
        }
        out
    }

    fn residual(&self, gammas: &[CMat]) -> f64 {
        linalg::max_abs(&(self.apply(gammas) - &self.target))
    }

    /// Orthogonal projection onto the affine solution set; decouples per entry.
    fn project_affine(&self, gammas: &mut [CMat]) {
        let m = self.block;
        for c in 0..self.size() {
            for r in 0..self.size() {
                let (x, y) = (r / m, c / m);
                let mut s = -self.target[(r, c)];
                for (w, g) in self.weights.iter().zip(gammas.iter()) {
                    s += w[(x, y)] * g[(r, c)];
                }
                let s = s * self.inv_norm[(x, y)];
                for (w, g) in self.weights.iter().zip(gammas.iter_mut()) {
                    g[(r, c)] -= w[(x, y)].conj() * s;
                }
            }
        }
    }

    /// Dual estimate from a cone point: the residual rescaled entrywise.
    fn dual_from(&self, gammas: &[CMat]) -> CMat {
        let m = self.block;
        let mut dual = self.apply(gammas) - &self.target;
        for c in 0..self.size() {
            for r in 0..self.size() {
                dual[(r, c)] *= self.inv_norm[(r / m, c / m)];
            }
        }
        linalg::hermitian_part(&dual)
    }

    fn certificate(&self, gammas: Vec<CMat>, level: f64) -> Result<AglerCertificate> {
        let sample = self.data.sample();
        let kernels = self
            .lambdas
            .iter()
            .cloned()
            .zip(gammas)
            .map(|(l, g)| Ok((l, HermitianKernel::from_matrix(sample.clone(), self.block, g)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(AglerCertificate { gammas: kernels, residual: f64::NAN, min_eigenvalue: f64::NAN, level })
    }
}

fn project_cone(mats: &[CMat], floor: f64) -> Vec<CMat> {
    if mats.first().is_some_and(|m| m.nrows() >= PARALLEL_SIZE) {
        mats.par_iter().map(|m| linalg::project_psd(m, floor)).collect()
    } else {
        mats.iter().map(|m| linalg::project_psd(m, floor)).collect()
    }
}

fn min_eigenvalues(mats: &[CMat]) -> f64 {
    let mins: Vec<f64> = if mats.first().is_some_and(|m| m.nrows() >= PARALLEL_SIZE) {
        mats.par_iter().map(linalg::min_eigenvalue).collect()
    } else {
        mats.iter().map(linalg::min_eigenvalue).collect()
    };
    mins.into_iter().fold(f64::INFINITY, f64::min)
}

fn accept(problem: &Problem, gammas: Vec<CMat>, level: f64, feas_tol: f64) -> Option<AglerCertificate> {
    let mut cert = problem.certificate(gammas, level).ok()?;
    let (residual, min_eigenvalue) = verify_certificate(&cert, problem.data, feas_tol).ok()?;
    cert.residual = residual;
    cert.min_eigenvalue = min_eigenvalue;
    Some(cert)
}

fn try_witness(problem: &Problem, pre: &Preordering, affine: &[CMat], feas_tol: f64) -> Option<Witness> {
    let cone = project_cone(affine, 0.0);
    let dual = problem.dual_from(&cone);
    witness_from_dual(problem.data, pre, &dual, feas_tol)
}

/// Levenberg–Marquardt on factors `Γ_λ = G_λ G_λ^*`, started from the cone projection of `start`.
///
/// Drives the identity residual down on faces where the projections crawl; the result is PSD by construction.
fn polish(problem: &Problem, start: &[CMat], feas_tol: f64) -> Option<Vec<CMat>> {
    let n = problem.size();
    let m = problem.block;
    let count = start.len();
    let mut factors: Vec<CMat> = project_cone(start, 0.0).iter().map(linalg::hermitian_sqrt).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|c| (0..=c).map(move |r| (r, c))).collect();
    let rows = n * n;
    let cols = 2 * count * n * n;
    let unknown = |lam: usize, i: usize, k: usize| 2 * ((lam * n + i) * n + k);

    let residual_vec = |factors: &[CMat]| -> DVector<f64> {
        let gammas: Vec<CMat> = factors.iter().map(|g| g * g.adjoint()).collect();
        let diff = problem.apply(&gammas) - &problem.target;
        let mut out = DVector::zeros(rows);
        let mut k = 0;
        for &(r, c) in &pairs {
            out[k] = diff[(r, c)].re;
            k += 1;
            if r != c {
                out[k] = diff[(r, c)].im;
                k += 1;
            }
        }
        out
    };
    let max_entry = |f: &DVector<f64>| f.iter().fold(0.0_f64, |a, v| a.max(v.abs()));

    let mut f = residual_vec(&factors);
    let mut mu = 1e-3 * f.norm_squared().sqrt().max(1e-12);
    for _ in 0..POLISH_STEPS {
        if max_entry(&f) <= 0.1 * feas_tol {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(rows, cols);
        let mut k = 0;
        for &(r, c) in &pairs {
            for (lam, g) in factors.iter().enumerate() {
                let d = problem.weights[lam][(r / m, c / m)];
                for q in 0..n {
                    // ∂F_rc / ∂G[r,q] and ∂F_rc / ∂G[c,q] for real and imaginary parts of the entry.
                    let dr_re = d * g[(c, q)].conj();
                    let dc_re = d * g[(r, q)];
                    let dr_im = dr_re * C64::new(0.0, 1.0);
                    let dc_im = -dc_re * C64::new(0.0, 1.0);
                    let ur = unknown(lam, r, q);
                    let uc = unknown(lam, c, q);
                    jac[(k, ur)] += dr_re.re;
                    jac[(k, ur + 1)] += dr_im.re;
                    jac[(k, uc)] += dc_re.re;
                    jac[(k, uc + 1)] += dc_im.re;
                    if r != c {
                        jac[(k + 1, ur)] += dr_re.im;
                        jac[(k + 1, ur + 1)] += dr_im.im;
                        jac[(k + 1, uc)] += dc_re.im;
                        jac[(k + 1, uc + 1)] += dc_im.im;
                    }
                }
            }
            k += if r == c { 1 } else { 2 };
        }
        let normal = &jac * jac.transpose();
        let current = f.norm_squared();
        let mut improved = false;
        for _ in 0..12 {
            let shifted = &normal + DMatrix::<f64>::identity(rows, rows) * mu;
            let Some(chol) = shifted.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = jac.transpose() * chol.solve(&f);
            let trial: Vec<CMat> = factors
                .iter()
                .enumerate()
                .map(|(lam, g)| {
                    CMat::from_fn(n, n, |i, q| {
                        let u = unknown(lam, i, q);
                        g[(i, q)] - C64::new(step[u], step[u + 1])
                    })
                })
                .collect();
            let f_trial = residual_vec(&trial);
            if f_trial.norm_squared() < current {
                factors = trial;
                f = f_trial;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if max_entry(&f) > feas_tol {
        return None;
    }
    Some(factors.iter().map(|g| g * g.adjoint()).collect())
}

fn try_polish(problem: &Problem, start: &[CMat], level: f64, feas_tol: f64) -> Option<AglerCertificate> {
    let gammas = polish(problem, start, feas_tol)?;
    accept(problem, gammas, level, feas_tol)
}

pub(crate) fn solve(
    data: &DefectData,
    pre: &Preordering,
    lambdas: &[MultiIndex],
    params: &SolverParams,
    level: f64,
) -> Result<DecomposeOutcome> {
    let problem = Problem::new(data, lambdas)?;
    let mut outcome = if lambdas.len() == 1 {
        solve_single(&problem, pre, params, level)
    } else {
        solve_projections(&problem, pre, params, level)
    };
    if let Decomposition::Feasible(cert) = &outcome.decomposition {
        outcome.residual = cert.residual;
    }
    Ok(outcome)
}

/// One defect index: the identity has the unique solution `Γ = R / D`.
fn solve_single(problem: &Problem, pre: &Preordering, params: &SolverParams, level: f64) -> DecomposeOutcome {
    let mut gammas = vec![CMat::zeros(problem.size(), problem.size())];
    problem.project_affine(&mut gammas);
    let residual = problem.residual(&gammas);
    let e = linalg::eigh(&gammas[0]);
    let min = e.values.first().copied().unwrap_or(0.0);
    let decomposition = if min >= -params.feas_tol {
        match accept(problem, gammas, level, params.feas_tol) {
            Some(cert) => Decomposition::Feasible(cert),
            None => Decomposition::Unresolved,
        }
    } else {
        let v = e.vectors.column(0).into_owned();
        let m = problem.block;
        let w = &problem.weights[0];
        let dual = CMat::from_fn(problem.size(), problem.size(), |r, c| v[r] * v[c].conj() / w[(r / m, c / m)].conj());
        match witness_from_dual(problem.data, pre, &linalg::hermitian_part(&dual), params.feas_tol) {
            Some(wit) => Decomposition::Infeasible(wit),
            None => Decomposition::Unresolved,
        }
    };
    DecomposeOutcome { decomposition, iterations: 0, residual }
}

/// Dykstra alternating projections between the affine solution set and the PSD cones.
fn solve_projections(problem: &Problem, pre: &Preordering, params: &SolverParams, level: f64) -> DecomposeOutcome {
    let size = problem.size();
    let count = problem.lambdas.len();
    let feas_tol = params.feas_tol;
    let mut floor = params.interior_shift * linalg::max_abs(&problem.target);
    let mut x = vec![CMat::zeros(size, size); count];
    problem.project_affine(&mut x);
    let mut q = vec![CMat::from_element(size, size, ZERO); count];
    let mut history: VecDeque<(usize, f64)> = VecDeque::new();
    let mut last_residual = problem.residual(&x);

    for iter in 1..=params.max_iter {
        let shifted: Vec<CMat> = x.iter().zip(&q).map(|(a, b)| a + b).collect();
        let y = project_cone(&shifted, floor);
        for ((qk, s), yk) in q.iter_mut().zip(&shifted).zip(&y) {
            *qk = s - yk;
        }
        x.clone_from(&y);
        problem.project_affine(&mut x);

        if iter % CHECK_EVERY != 0 {
            continue;
        }
        if min_eigenvalues(&x) >= -1e-2 * feas_tol {
            if let Some(cert) = accept(problem, x.clone(), level, feas_tol) {
                return DecomposeOutcome {
                    decomposition: Decomposition::Feasible(cert),
                    iterations: iter,
                    residual: problem.residual(&x),
                };
            }
        }
        let residual = problem.residual(&y);
        last_residual = residual;
        if residual <= feas_tol {
            if let Some(cert) = accept(problem, y.clone(), level, feas_tol) {
                return DecomposeOutcome { decomposition: Decomposition::Feasible(cert), iterations: iter, residual };
            }
        }
        if iter % POLISH_EVERY == 0 {
            if let Some(cert) = try_polish(problem, &x, level, feas_tol) {
                return DecomposeOutcome { decomposition: Decomposition::Feasible(cert), iterations: iter, residual };
            }
        }
        if iter % WITNESS_EVERY == 0 {
            if let Some(w) = try_witness(problem, pre, &x, feas_tol) {
                return DecomposeOutcome { decomposition: Decomposition::Infeasible(w), iterations: iter, residual };
            }
        }

        history.push_back((iter, residual));
        while history.front().is_some_and(|&(i, _)| i + params.stall_window < iter) {
            history.pop_front();
        }
        let &(start, old) = history.front().expect("just pushed");
        let threshold = if floor > 0.0 { SHIFTED_STALL_PROGRESS } else { params.stall_progress };
        let stalled = iter - start >= params.stall_window && (old - residual) <= threshold * old;
        if stalled {
            if let Some(w) = try_witness(problem, pre, &x, feas_tol) {
                return DecomposeOutcome { decomposition: Decomposition::Infeasible(w), iterations: iter, residual };
            }
            if let Some(cert) = try_polish(problem, &x, level, feas_tol) {
                return DecomposeOutcome { decomposition: Decomposition::Feasible(cert), iterations: iter, residual };
            }
            if floor > 0.0 {
                floor = 0.0;
                q.iter_mut().for_each(|m| m.fill(ZERO));
                history.clear();
                continue;
            }
            return DecomposeOutcome { decomposition: Decomposition::Unresolved, iterations: iter, residual };
        }
    }
    let decomposition = if let Some(w) = try_witness(problem, pre, &x, feas_tol) {
        Decomposition::Infeasible(w)
    } else if let Some(cert) = try_polish(problem, &x, level, feas_tol) {
        Decomposition::Feasible(cert)
    } else {
        Decomposition::Unresolved
    };
    DecomposeOutcome { decomposition, iterations: params.max_iter, residual: last_residual }
}
