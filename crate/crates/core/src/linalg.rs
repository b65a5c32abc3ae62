//! Dense complex linear algebra shared by the simulator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;

pub fn dim_of(qubits: usize) -> usize {
    1usize << qubits
}

/// Value (0 or 1) of spin `k` in basis index `index`; spin 0 is the most
/// significant bit, so `b_1 = 00, b_2 = 01, b_3 = 10, ...`.
#[inline]
pub fn bit(index: usize, k: usize, qubits: usize) -> usize {
    (index >> (qubits - 1 - k)) & 1
}

/// Eigenvalue of `sigma_z` on spin `k` for basis state `index`.
#[inline]
pub fn z_sign(index: usize, k: usize, qubits: usize) -> f64 {
    if bit(index, k, qubits) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max elementwise |H - H†|.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Max elementwise |U†U - I|.
pub fn unitarity_deviation(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMat::identity(n, n)))
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && hermitian_deviation(m) <= tol
}

/// Copy of `m` with its anti-Hermitian part removed.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().sum()
}

/// Hermitian eigendecomposition: returns eigenvalues and the unitary whose
/// columns are the eigenvectors.
pub fn eigh(m: &CMat) -> (DVector<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    (eig.eigenvalues, eig.eigenvectors)
}

/// `V diag(f(λ)) V†`.
pub fn apply_spectral<F: Fn(f64) -> C64>(values: &DVector<f64>, vectors: &CMat, f: F) -> CMat {
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let fj = f(lambda);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= fj;
        }
    }
    scaled * vectors.adjoint()
}

/// `exp(-i H t)` for Hermitian `H` via eigendecomposition.
pub fn expm_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let dev = hermitian_deviation(h);
    let scale = max_abs(h).max(1.0);
    if !h.is_square() || dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    let (values, vectors) = eigh(h);
    Ok(apply_spectral(&values, &vectors, |l| C64::from_polar(1.0, -l * t)))
}

/// Principal square root of a PSD matrix; eigenvalues below zero (beyond
/// `-tol`) are rejected. Eigenvalues within roundoff of zero are dropped so
/// that rank-deficient inputs do not pick up `sqrt(eps)` noise.
pub fn sqrtm_psd(m: &CMat, tol: f64) -> Result<CMat> {
    let (values, vectors) = eigh(m);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPositive(min));
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    let floor = 4.0 * f64::EPSILON * m.nrows() as f64 * max;
    Ok(apply_spectral(&values, &vectors, |l| C64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0)))
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigh(m).0.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `U ρ U†` for a dense `U`.
pub fn conjugate(u: &CMat, rho: &CMat) -> CMat {
    u * rho * u.adjoint()
}

/// `D ρ D†` for a diagonal `D` stored as a vector.
pub fn conjugate_diag(d: &CVec, rho: &CMat) -> CMat {
    let n = rho.nrows();
    CMat::from_fn(n, n, |i, j| d[i] * rho[(i, j)] * d[j].conj())
}

/// Left-multiply by `diag(d)` in place (scales rows).
pub fn scale_rows(m: &mut CMat, d: &CVec) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= d[i];
        }
    }
}

/// Left-multiply by the tensor product of Hadamards acting on the spins set in
/// `mask` (bit `k` = spin `k`). Runs as an in-place butterfly on each column.
pub fn hadamard_rows(m: &mut CMat, mask: u64, qubits: usize) {
    let n = m.nrows();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..qubits {
        if mask >> k & 1 == 0 {
            continue;
        }
        let stride = 1usize << (qubits - 1 - k);
        for j in 0..m.ncols() {
            for i in 0..n {
                if i & stride == 0 {
                    let a = m[(i, j)];
                    let b = m[(i | stride, j)];
                    m[(i, j)] = (a + b) * r;
                    m[(i | stride, j)] = (a - b) * r;
                }
            }
        }
    }
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}
