//! State comparison and signal metrics.
//!
//! Deviation matrices are traceless and normalized so the thermal deviation of
//! a homonuclear register is `sum_k sigma_z_k / 2`; its peak element is `Q/2`
//! and a single thermal line has unit intensity.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

const PSD_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    UnitTrace,
    Deviation,
}

/// Validated density or deviation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMat,
    normalization: Normalization,
}

impl DensityMatrix {
    pub fn unit_trace(matrix: CMat) -> Result<Self> {
        check_hermitian(&matrix)?;
        let tr = linalg::trace(&matrix);
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-12 * matrix.nrows() as f64 {
            return Err(Error::invalid(format!("trace {tr} is not 1")));
        }
        let min = linalg::min_eigenvalue(&matrix);
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { matrix, normalization: Normalization::UnitTrace })
    }

    pub fn deviation(matrix: CMat) -> Result<Self> {
        check_hermitian(&matrix)?;
        let tr = linalg::trace(&matrix);
        if tr.norm() > 1e-12 * matrix.nrows() as f64 * linalg::max_abs(&matrix).max(1.0) {
            return Err(Error::invalid(format!("deviation trace {tr} is not 0")));
        }
        Ok(Self { matrix, normalization: Normalization::Deviation })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

fn check_hermitian(m: &CMat) -> Result<()> {
    if !m.is_square() || !m.nrows().is_power_of_two() {
        return Err(Error::invalid(format!("{}x{} is not a register operator", m.nrows(), m.ncols())));
    }
    let dev = linalg::hermitian_deviation(m);
    if dev > linalg::HERMITIAN_TOL * linalg::max_abs(m).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

fn check_state(m: &CMat) -> Result<()> {
    let dev = linalg::hermitian_deviation(m);
    if dev > PSD_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let tr = linalg::trace(m);
    if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::invalid(format!("trace {tr} is not 1")));
    }
    Ok(())
}

/// Uhlmann fidelity `[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2`, evaluated as the
/// squared nuclear norm of `sqrt(rho) sqrt(sigma)`.
pub fn state_fidelity(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::Dimension { expected: rho.nrows(), got: sigma.nrows() });
    }
    check_state(rho)?;
    check_state(sigma)?;
    let a = linalg::sqrtm_psd(rho, PSD_TOL)?;
    let b = linalg::sqrtm_psd(sigma, PSD_TOL)?;
    let nuclear: f64 = (a * b).singular_values().iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// `<psi|rho|psi>`, the Uhlmann fidelity against a pure state.
pub fn pure_state_fidelity(rho: &CMat, psi: &crate::linalg::CVec) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re.clamp(0.0, 1.0)
}

/// `Tr(rho sigma) / sqrt(Tr rho^2 Tr sigma^2)`.
pub fn overlap_fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let num = linalg::trace(&(rho * sigma)).re;
    let den = (linalg::trace(&(rho * rho)).re * linalg::trace(&(sigma * sigma)).re).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Reduced state on the spins in `keep` (0-based, any order; the result
/// orders kept spins ascending).
pub fn partial_trace(rho: &CMat, keep: &[usize], qubits: usize) -> Result<CMat> {
    if keep.is_empty() {
        return Err(Error::invalid("partial trace needs at least one kept spin"));
    }
    if rho.nrows() != linalg::dim_of(qubits) {
        return Err(Error::Dimension { expected: linalg::dim_of(qubits), got: rho.nrows() });
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&k) = kept.iter().find(|&&k| k >= qubits) {
        return Err(Error::invalid(format!("spin {} is outside a {qubits}-spin register", k + 1)));
    }
    let traced: Vec<usize> = (0..qubits).filter(|k| !kept.contains(k)).collect();
    let kd = 1usize << kept.len();
    let td = 1usize << traced.len();
    let index = |ki: usize, ti: usize| -> usize {
        let mut i = 0usize;
        for (pos, &k) in kept.iter().enumerate() {
            let b = (ki >> (kept.len() - 1 - pos)) & 1;
            i |= b << (qubits - 1 - k);
        }
        for (pos, &k) in traced.iter().enumerate() {
            let b = (ti >> (traced.len() - 1 - pos)) & 1;
            i |= b << (qubits - 1 - k);
        }
        i
    };
    Ok(CMat::from_fn(kd, kd, |a, b| (0..td).map(|t| rho[(index(a, t), index(b, t))]).sum()))
}

/// Largest entry modulus.
pub fn peak_element(m: &CMat) -> f64 {
    linalg::max_abs(m)
}

fn ground_projector(qubits: usize) -> CMat {
    let d = linalg::dim_of(qubits);
    let mut p = CMat::zeros(d, d);
    p[(0, 0)] = C64::new(1.0, 0.0);
    p
}

/// `(1 - alpha) I / 2^Q + alpha |0..0><0..0|`.
pub fn pps_target(qubits: usize, alpha: f64) -> CMat {
    let d = linalg::dim_of(qubits);
    CMat::identity(d, d).scale((1.0 - alpha) / d as f64) + ground_projector(qubits).scale(alpha)
}

/// Deviation form `alpha (|0..0><0..0| - I / 2^Q)`.
pub fn pps_deviation(qubits: usize, alpha: f64) -> CMat {
    let d = linalg::dim_of(qubits);
    (ground_projector(qubits) - CMat::identity(d, d).scale(1.0 / d as f64)).scale(alpha)
}

/// `sum_k sigma_z_k / 2`.
pub fn thermal_deviation(qubits: usize) -> CMat {
    let d = linalg::dim_of(qubits);
    let diag = crate::linalg::CVec::from_fn(d, |i, _| {
        C64::new((0..qubits).map(|k| linalg::z_sign(i, k, qubits)).sum::<f64>() / 2.0, 0.0)
    });
    CMat::from_diagonal(&diag)
}

/// Unit-trace state obtained from a deviation by the smallest identity shift
/// that makes it positive: `(D - lambda_min I) / Tr(D - lambda_min I)`.
/// A pseudo-pure deviation maps to its pure state; a multiple of the identity
/// maps to the maximally mixed state.
pub fn companion(deviation: &CMat) -> CMat {
    let d = deviation.nrows();
    let h = linalg::hermitian_part(deviation);
    let lmin = linalg::min_eigenvalue(&h);
    let shifted = h - CMat::identity(d, d).scale(lmin);
    let tr = linalg::trace(&shifted).re;
    if tr <= 1e-14 * d as f64 {
        CMat::identity(d, d).scale(1.0 / d as f64)
    } else {
        shifted.scale(1.0 / tr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{haar_density, haar_unitary, rng};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn fidelity_basics() {
        let mut r = rng(5, 0);
        let rho = haar_density(4, &mut r);
        assert!((state_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-8);
        let zero = pps_target(1, 1.0);
        let one = CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![c(0.0), c(1.0)]));
        assert!(state_fidelity(&zero, &one).unwrap() < 1e-14);
        let mixed = CMat::identity(2, 2).scale(0.5);
        assert!((state_fidelity(&zero, &mixed).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_negative() {
        let bad = CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(matches!(state_fidelity(&bad, &bad), Err(Error::NotPositive(_))));
    }

    #[test]
    fn bell_reduces_to_mixed() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = crate::linalg::CVec::from_vec(vec![c(r), c(0.0), c(0.0), c(r)]);
        let rho = &psi * psi.adjoint();
        for k in 0..2 {
            let red = partial_trace(&rho, &[k], 2).unwrap();
            assert!(linalg::max_abs(&(red - CMat::identity(2, 2).scale(0.5))) < 1e-15);
        }
        assert!(partial_trace(&rho, &[], 2).is_err());
    }

    #[test]
    fn product_state_reduces_to_factor() {
        let mut r = rng(2, 0);
        let a = haar_density(2, &mut r);
        let b = haar_density(4, &mut r);
        let ab = linalg::kron(&a, &b);
        assert!(linalg::max_abs(&(partial_trace(&ab, &[0], 3).unwrap() - &a)) < 1e-14);
        assert!(linalg::max_abs(&(partial_trace(&ab, &[1, 2], 3).unwrap() - &b)) < 1e-14);
    }

    #[test]
    fn thermal_peak_is_half_q() {
        assert_eq!(peak_element(&thermal_deviation(4)), 2.0);
        assert_eq!(peak_element(&CMat::zeros(4, 4)), 0.0);
    }

    #[test]
    fn companion_of_pps_is_pure() {
        let p = companion(&pps_deviation(3, 0.7));
        assert!(linalg::max_abs(&(p - pps_target(3, 1.0))) < 1e-14);
        let m = companion(&CMat::zeros(4, 4));
        assert!(linalg::max_abs(&(m - CMat::identity(4, 4).scale(0.25))) < 1e-15);
    }

    #[test]
    fn fidelity_unitary_invariance() {
        let mut r = rng(9, 1);
        let a = haar_density(8, &mut r);
        let b = (haar_density(8, &mut r) + CMat::identity(8, 8).scale(0.125)).scale(0.5);
        let u = haar_unitary(8, &mut r);
        let f0 = state_fidelity(&a, &b).unwrap();
        let f1 = state_fidelity(&linalg::conjugate(&u, &a), &linalg::conjugate(&u, &b)).unwrap();
        assert!((f0 - f1).abs() < 1e-10);
    }
}
