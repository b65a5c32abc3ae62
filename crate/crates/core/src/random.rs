//! Seeded random states and unitaries.
//!
//! Every randomized study derives one ChaCha stream per trial from
//! `(seed, stream)`, so results do not depend on scheduling order.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, CVec, C64};

pub type StudyRng = ChaCha20Rng;

pub fn rng(seed: u64, stream: u64) -> StudyRng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im)
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let z = CMat::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random pure state vector.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// `|psi><psi|` for a Haar-random `psi`.
pub fn haar_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let v = haar_state(dim, rng);
    &v * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_deviation;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = rng(7, 0);
        for d in [2, 4, 16, 32] {
            assert!(unitarity_deviation(&haar_unitary(d, &mut r)) < 1e-12);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = haar_state(8, &mut rng(1, 3));
        let b = haar_state(8, &mut rng(1, 3));
        let c = haar_state(8, &mut rng(1, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_first_moment_is_flat() {
        // E|U_00|^2 = 1/d for Haar unitaries.
        let mut r = rng(11, 0);
        let n = 4000;
        let mean: f64 = (0..n).map(|_| haar_unitary(4, &mut r)[(0, 0)].norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() < 0.02, "{mean}");
    }
}
