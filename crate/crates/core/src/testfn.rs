//! Even/odd monomial rows, auxiliary matrix functions and the sample domains.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{defect_matrix, szego_kernel, HermitianKernel, PointSample};
use crate::linalg::{self, CMat, C64, ONE};
use crate::preorder::{parity_split, MultiIndex, Preordering};

/// `Π_i z_i^{μ_i}`.
pub fn monomial(point: &[C64], mu: &MultiIndex) -> C64 {
    mu.entries().iter().zip(point).fold(ONE, |acc, (&k, z)| acc * z.powu(k))
}

/// Even and odd monomial rows of a 0/1 tuple at one point.
pub fn row_pair(point: &[C64], lambda: &MultiIndex) -> Result<(CMat, CMat)> {
    if lambda.dim() != point.len() {
        return Err(Error::DimensionMismatch(format!("multi-index {lambda} at a {}-coordinate point", point.len())));
    }
    let (even, odd) = parity_split(lambda)?;
    let row = |list: &[MultiIndex]| CMat::from_fn(1, list.len(), |_, k| monomial(point, &list[k]));
    Ok((row(&even), row(&odd)))
}

/// `ψ^+(x)^* ψ^-(x) / |ψ^+(x)|²` at one point.
pub fn sigma_at(point: &[C64], lambda: &MultiIndex) -> Result<CMat> {
    let (plus, minus) = row_pair(point, lambda)?;
    let weight = plus.norm_squared();
    Ok(plus.adjoint() * minus / C64::new(weight, 0.0))
}

/// Row size `2^{|λ|-1}` for a nonzero 0/1 tuple.
pub fn row_len(lambda: &MultiIndex) -> usize {
    1usize << (lambda.degree().max(1) - 1)
}

#[derive(Clone, Debug)]
pub struct PsiRows {
    pub lambda: MultiIndex,
    /// Row `x` holds `ψ^+(x)`.
    pub plus: CMat,
    /// Row `x` holds `ψ^-(x)`.
    pub minus: CMat,
}

pub fn psi_rows(sample: &PointSample, lambda: &MultiIndex) -> Result<PsiRows> {
    let n = row_len(lambda);
    let mut plus = CMat::zeros(sample.len(), n);
    let mut minus = CMat::zeros(sample.len(), n);
    for (x, p) in sample.points().iter().enumerate() {
        let (rp, rm) = row_pair(p, lambda)?;
        plus.row_mut(x).copy_from(&rp);
        minus.row_mut(x).copy_from(&rm);
    }
    Ok(PsiRows { lambda: lambda.clone(), plus, minus })
}

impl PsiRows {
    /// Largest deviation of `ψ^+ψ^{+*} - ψ^-ψ^{-*}` from the defect kernel.
    pub fn defect_residual(&self, sample: &PointSample) -> Result<f64> {
        let gram = &self.plus * self.plus.adjoint() - &self.minus * self.minus.adjoint();
        Ok(linalg::max_abs(&(gram - defect_matrix(sample, &self.lambda)?)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxMode {
    Raw,
    Extended,
}

#[derive(Clone, Debug)]
pub struct AuxFunctionSample {
    pub lambda: MultiIndex,
    pub n: usize,
    pub sigma: Vec<CMat>,
    pub mode: AuxMode,
}

pub fn aux_function(sample: &PointSample, lambda: &MultiIndex) -> Result<AuxFunctionSample> {
    let sigma = sample.points().iter().map(|p| sigma_at(p, lambda)).collect::<Result<Vec<_>>>()?;
    Ok(AuxFunctionSample { lambda: lambda.clone(), n: row_len(lambda), sigma, mode: AuxMode::Raw })
}

/// Residual of the expansion of `ψ^+ψ^{+*} * (1 - σσ^*) * K` against the defect times `K`.
pub fn verify_identity5(sample: &PointSample, lambda: &MultiIndex, k: &HermitianKernel) -> Result<f64> {
    if k.block_dim() != 1 {
        return Err(Error::Unsupported("identity check needs a scalar kernel".into()));
    }
    if k.sample().as_ref() != sample {
        return Err(Error::DimensionMismatch("kernel lives on another sample".into()));
    }
    let rows = psi_rows(sample, lambda)?;
    let aux = aux_function(sample, lambda)?;
    let defect = defect_matrix(sample, lambda)?;
    let n = aux.n;
    let eye = linalg::identity(n);
    let mut worst = 0.0_f64;
    for x in 0..sample.len() {
        let px = rows.plus.row(x).into_owned();
        for y in 0..sample.len() {
            let kxy = k.matrix()[(x, y)];
            let py = rows.plus.row(y).into_owned();
            let middle = (&eye - &aux.sigma[x] * aux.sigma[y].adjoint()) * kxy;
            let lhs = (&px * middle * py.adjoint())[(0, 0)];
            worst = worst.max((lhs - defect[(x, y)] * kxy).norm());
        }
    }
    Ok(worst)
}

/// Output of the finite-set improvement of the auxiliary function.
#[derive(Clone, Debug)]
pub struct ExtendedAux {
    /// Diagonal blocks `S_F(x, x)` in `sigma`, mode `Extended`.
    pub aux: AuxFunctionSample,
    /// The full operator `S_F` on `ℂ^n ⊗ ℂ^N`, blocks indexed by point pairs.
    pub operator: CMat,
    pub g_norm: f64,
    /// Largest mismatch between the compressed defect forms built from `S_F` and from `σ`.
    pub compressed_residual: f64,
    /// Least eigenvalue of `k_F - S_F k_F S_F^*`.
    pub defect_min_eigenvalue: f64,
    /// Points whose diagonal block has norm within `1e-9` of one.
    pub near_unit_points: Vec<usize>,
}

pub const EXTENDED_NORM_TOL: f64 = 1e-9;

/// Builds `S_F = κ G κ^{-1}` with `κ² = k_s ⊗ 1_n` and `G` the compression of `κ^{-1} σ_F κ`.
pub fn extend_aux_finite(sample: &Arc<PointSample>, lambda: &MultiIndex, pre: &Preordering) -> Result<ExtendedAux> {
    let class = pre.classify();
    let top = match class.top() {
        Some(top) if class.is_ample() => top.clone(),
        _ => return Err(Error::Unsupported(format!("{pre} is not ample"))),
    };
    if !lambda.is_below(&top) {
        return Err(Error::Unsupported(format!("{lambda} is not below {top}")));
    }
    let big_n = sample.len();
    let n = row_len(lambda);
    let size = big_n * n;

    let ks = szego_kernel(sample, &top, 1)?;
    let k_f = linalg::kron(ks.matrix(), &linalg::identity(n));
    let eig = linalg::eigh(&k_f);
    let floor = eig.values[0];
    if !(floor > 1e-13 * eig.values[size - 1]) {
        return Err(Error::Numerical(format!("Szegő kernel on the sample is singular (least eigenvalue {floor:.3e})")));
    }
    let kappa = linalg::spectral_map(&eig, f64::sqrt);
    let kappa_inv = linalg::spectral_map(&eig, |v| 1.0 / v.sqrt());

    let rows = psi_rows(sample, lambda)?;
    let aux = aux_function(sample, lambda)?;
    let mut psi_plus = CMat::zeros(big_n, size);
    for x in 0..big_n {
        psi_plus.view_mut((x, x * n), (1, n)).copy_from(&rows.plus.row(x));
    }
    let sigma_f = linalg::block_diag(&aux.sigma);

    let range = linalg::column_space(&(&kappa * psi_plus.adjoint()), 1e-13);
    let proj = &range * range.adjoint();
    let g = &proj * &kappa_inv * &sigma_f * &kappa;
    let g_norm = linalg::spectral_norm(&g);
    if g_norm > 1.0 + EXTENDED_NORM_TOL {
        return Err(Error::Numerical(format!("compressed auxiliary operator has norm {g_norm:.12}")));
    }
    let s_f = &kappa * &g * &kappa_inv;

    let via_s = &psi_plus * (&k_f - &s_f * &k_f * s_f.adjoint()) * psi_plus.adjoint();
    let via_sigma = &psi_plus * (&k_f - &sigma_f * &k_f * sigma_f.adjoint()) * psi_plus.adjoint();
    let direct = ks.weighted(&defect_matrix(sample, lambda)?)?.into_matrix();
    let compressed_residual = linalg::max_abs(&(&via_s - &via_sigma)).max(linalg::max_abs(&(&via_sigma - direct)));

    let defect_min_eigenvalue = linalg::min_eigenvalue(&(&k_f - &s_f * &k_f * s_f.adjoint()));

    let diag: Vec<CMat> = (0..big_n).map(|x| s_f.view((x * n, x * n), (n, n)).into_owned()).collect();
    let near_unit_points = diag
        .iter()
        .enumerate()
        .filter(|(_, b)| linalg::spectral_norm(b) >= 1.0 - EXTENDED_NORM_TOL)
        .map(|(x, _)| x)
        .collect();
    Ok(ExtendedAux {
        aux: AuxFunctionSample { lambda: lambda.clone(), n, sigma: diag, mode: AuxMode::Extended },
        operator: s_f,
        g_norm,
        compressed_residual,
        defect_min_eigenvalue,
        near_unit_points,
    })
}

/// The built-in families of test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Domain {
    /// Coordinates themselves on the `d`-disk.
    Polydisk { d: usize },
    /// `(z, r/z)` on `r < |z| < 1`.
    Annulus { r: f64 },
    /// `(z², z³)` on the disk.
    ConstrainedDisk,
}

impl Domain {
    pub fn base_dim(&self) -> usize {
        match self {
            Domain::Polydisk { d } => *d,
            Domain::Annulus { .. } | Domain::ConstrainedDisk => 1,
        }
    }

    pub fn map_point(&self, base: &[C64]) -> Result<Vec<C64>> {
        if base.len() != self.base_dim() {
            return Err(Error::DimensionMismatch(format!(
                "base point has {} coordinates, domain expects {}",
                base.len(),
                self.base_dim()
            )));
        }
        let out = match self {
            Domain::Polydisk { .. } => {
                if let Some(z) = base.iter().find(|z| !(z.norm() < 1.0)) {
                    return Err(Error::Domain(format!("{z} is not in the open disk")));
                }
                base.to_vec()
            }
            Domain::Annulus { r } => {
                let z = base[0];
                if !(*r > 0.0 && *r < 1.0) {
                    return Err(Error::Domain(format!("annulus radius {r} outside (0, 1)")));
                }
                if !(z.norm() > *r && z.norm() < 1.0) {
                    return Err(Error::Domain(format!("{z} is not in the annulus {r} < |z| < 1")));
                }
                vec![z, C64::new(*r, 0.0) / z]
            }
            Domain::ConstrainedDisk => {
                let z = base[0];
                if !(z.norm() < 1.0) {
                    return Err(Error::Domain(format!("{z} is not in the open disk")));
                }
                vec![z * z, z * z * z]
            }
        };
        Ok(out)
    }

    pub fn sample(&self, bases: &[Vec<C64>]) -> Result<PointSample> {
        let pts = bases.iter().map(|b| self.map_point(b)).collect::<Result<Vec<_>>>()?;
        PointSample::new(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{psd_check, schur_product};
    use crate::linalg::{c64, real};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec()).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Arc<PointSample> {
        let pts = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        C64::from_polar(0.9 * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU)
                    })
                    .collect()
            })
            .collect();
        Arc::new(PointSample::new(pts).unwrap())
    }

    fn random_binary(rng: &mut ChaCha8Rng, d: usize) -> MultiIndex {
        loop {
            let e: Vec<u32> = (0..d).map(|_| rng.random_range(0..=1)).collect();
            if e.contains(&1) {
                return MultiIndex::new(e).unwrap();
            }
        }
    }

    /// Expands `Π_{i ∈ supp λ} (1 - x_i conj(y_i))` directly.
    fn defect_oracle(x: &[C64], y: &[C64], lambda: &MultiIndex) -> C64 {
        lambda.support().iter().fold(ONE, |acc, &i| acc * (ONE - x[i] * y[i].conj()))
    }

    #[test]
    fn rows_for_pairs() {
        let (a, b) = (c64(0.3, 0.1), c64(-0.2, 0.5));
        let (plus, minus) = row_pair(&[a, b], &mi(&[1, 1])).unwrap();
        assert_eq!(plus.as_slice(), &[ONE, a * b]);
        assert_eq!(minus.as_slice(), &[a, b]);

        let (plus, minus) = row_pair(&[a, b], &mi(&[1, 0])).unwrap();
        assert_eq!(plus.as_slice(), &[ONE]);
        assert_eq!(minus.as_slice(), &[a]);
        assert!(row_pair(&[a, b], &mi(&[2, 0])).is_err());
    }

    #[test]
    fn triple_defect_identity() {
        let x = vec![real(0.3), c64(0.0, 0.4), real(-0.2)];
        let s = PointSample::new(vec![x.clone()]).unwrap();
        let lambda = mi(&[1, 1, 1]);
        let rows = psi_rows(&s, &lambda).unwrap();
        let gram =
            (rows.plus.row(0) * rows.plus.row(0).adjoint() - rows.minus.row(0) * rows.minus.row(0).adjoint())[(0, 0)];
        assert!((gram - defect_oracle(&x, &x, &lambda)).norm() < 1e-14);
    }

    #[test]
    fn sigma_examples() {
        let s = PointSample::new(vec![vec![c64(0.4, -0.3), real(0.2)]]).unwrap();
        let aux = aux_function(&s, &mi(&[1, 0])).unwrap();
        assert!((aux.sigma[0][(0, 0)] - c64(0.4, -0.3)).norm() < 1e-15);

        let s = PointSample::new(vec![vec![real(0.0), real(0.0)]]).unwrap();
        let aux = aux_function(&s, &mi(&[1, 1])).unwrap();
        assert_eq!(linalg::max_abs(&aux.sigma[0]), 0.0);

        let s = PointSample::new(vec![vec![real(0.5), real(0.5)]]).unwrap();
        let sigma = &aux_function(&s, &mi(&[1, 1])).unwrap().sigma[0];
        let plus = CMat::from_row_slice(1, 2, &[ONE, real(0.25)]);
        let minus = CMat::from_row_slice(1, 2, &[real(0.5), real(0.5)]);
        let oracle = plus.adjoint() * &minus * real(1.0 / (1.0 + 1.0 / 16.0));
        assert!(linalg::max_abs(&(sigma - &oracle)) < 1e-15);
        let norm = minus.norm() / plus.norm();
        assert!((linalg::spectral_norm(sigma) - norm).abs() < 1e-14);
        assert!(norm < 1.0);
        assert!(linalg::max_abs(&(&plus * sigma - &minus)) < 1e-15);
    }

    #[test]
    fn identity5_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_points(&mut rng, 4, 2);
        let r = verify_identity5(&s, &mi(&[1, 0]), &HermitianKernel::ones(s.clone(), 1)).unwrap();
        assert!(r < 1e-15);

        let k = szego_kernel(&s, &mi(&[1, 1]), 1).unwrap();
        assert!(verify_identity5(&s, &mi(&[1, 1]), &k).unwrap() < 1e-10);

        let s = random_points(&mut rng, 3, 3);
        let ones = HermitianKernel::ones(s.clone(), 1);
        assert!(verify_identity5(&s, &mi(&[1, 1, 1]), &ones).unwrap() < 1e-10);
    }

    #[test]
    fn extended_single_point_is_raw() {
        let s = Arc::new(PointSample::new(vec![vec![c64(0.3, 0.2), c64(-0.5, 0.1)]]).unwrap());
        let lambda = mi(&[1, 1]);
        let ext = extend_aux_finite(&s, &lambda, &Preordering::standard_ample(2)).unwrap();
        let raw = aux_function(&s, &lambda).unwrap();
        assert!(linalg::max_abs(&(&ext.aux.sigma[0] - &raw.sigma[0])) < 1e-12);
    }

    #[test]
    fn extended_three_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_points(&mut rng, 3, 2);
        let ext = extend_aux_finite(&s, &mi(&[1, 1]), &Preordering::standard_ample(2)).unwrap();
        assert!(ext.g_norm <= 1.0 + 1e-9);
        assert!(ext.compressed_residual < 1e-8);
        assert!(ext.defect_min_eigenvalue >= -1e-8);
        assert!(ext.near_unit_points.is_empty());
    }

    #[test]
    fn extended_rejects_non_ample() {
        let s = random_points(&mut ChaCha8Rng::seed_from_u64(1), 2, 2);
        assert!(extend_aux_finite(&s, &mi(&[1, 1]), &Preordering::classical(2)).is_err());
    }

    #[test]
    fn domain_examples() {
        let a = Domain::Annulus { r: 0.5 }.map_point(&[real(0.7)]).unwrap();
        assert!((a[1].re - 0.5 / 0.7).abs() < 1e-15);
        assert!(Domain::Annulus { r: 0.5 }.map_point(&[real(0.4)]).is_err());
        let c = Domain::ConstrainedDisk.map_point(&[real(0.5)]).unwrap();
        assert_eq!(c, vec![real(0.25), real(0.125)]);
        let p = vec![real(0.1), real(0.2), real(0.3)];
        assert_eq!(Domain::Polydisk { d: 3 }.map_point(&p).unwrap(), p);
        assert!(Domain::Polydisk { d: 1 }.map_point(&[real(1.0)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rows_reproduce_defect(seed in any::<u64>(), n in 1usize..=5, d in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_points(&mut rng, n, d);
            let lambda = random_binary(&mut rng, d);
            let rows = psi_rows(&s, &lambda).unwrap();
            prop_assert!(rows.defect_residual(&s).unwrap() < 1e-12);
            for x in 0..n {
                prop_assert_eq!(rows.plus[(x, 0)], ONE);
                let y = s.point(x);
                prop_assert!((defect_oracle(y, y, &lambda).re - defect_matrix(&s, &lambda).unwrap()[(x, x)].re).abs() < 1e-14);
            }
        }

        #[test]
        fn sigma_is_strict_and_intertwines(seed in any::<u64>(), n in 1usize..=5, d in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_points(&mut rng, n, d);
            let lambda = random_binary(&mut rng, d);
            let rows = psi_rows(&s, &lambda).unwrap();
            let aux = aux_function(&s, &lambda).unwrap();
            for x in 0..n {
                prop_assert!(linalg::spectral_norm(&aux.sigma[x]) < 1.0);
                let back = rows.plus.row(x) * &aux.sigma[x] - rows.minus.row(x);
                prop_assert!(back.iter().all(|z| z.norm() < 1e-14));
            }
        }

        #[test]
        fn identity5_on_random_psd(seed in any::<u64>(), n in 1usize..=5, d in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_points(&mut rng, n, d);
            let lambda = random_binary(&mut rng, d);
            let g = CMat::from_fn(n, n, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let k = HermitianKernel::scalar(s.clone(), &g * g.adjoint()).unwrap();
            prop_assert!(psd_check(&k, 1e-12).is_psd);
            prop_assert!(verify_identity5(&s, &lambda, &k).unwrap() < 1e-9);
        }

        #[test]
        fn extended_finite_stage(seed in any::<u64>(), n in 1usize..=4, d in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_points(&mut rng, n, d);
            let lambda = random_binary(&mut rng, d);
            let ext = extend_aux_finite(&s, &lambda, &Preordering::standard_ample(d)).unwrap();
            prop_assert!(ext.g_norm <= 1.0 + 1e-9);
            prop_assert!(ext.compressed_residual < 1e-8);
            prop_assert!(ext.defect_min_eigenvalue >= -1e-8);
        }

        #[test]
        fn constrained_disk_relation(re in -0.7f64..0.7, im in -0.7f64..0.7) {
            let p = Domain::ConstrainedDisk.map_point(&[c64(re, im)]).unwrap();
            prop_assert!((p[0].powu(3) - p[1].powu(2)).norm() < 1e-15);
        }
    }

    #[test]
    fn schur_with_szego_keeps_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_points(&mut rng, 3, 2);
        let k = schur_product(&szego_kernel(&s, &mi(&[1, 1]), 1).unwrap(), &HermitianKernel::diagonal(s.clone(), 1))
            .unwrap();
        assert!(verify_identity5(&s, &mi(&[0, 1]), &k).unwrap() < 1e-12);
    }
}
