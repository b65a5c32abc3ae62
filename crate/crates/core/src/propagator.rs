//! Propagators for sampled schedules at a single sample position `z`.
//!
//! Four strategies share one contract, `U = U_m ⋯ U_2 U_1`:
//!
//! * [`PropagationStrategy::Exact`]: dense exponential of every sample.
//! * [`PropagationStrategy::Diagonal`]: pulse-free schedules, phases only.
//! * [`PropagationStrategy::Static`]: one time-independent pulse-free sample.
//! * [`PropagationStrategy::BholeJones`]: per sample
//!   `W+ H e^{-i Ω ς δt} H W-` with `W± = e^{-i(H0 + Hg) δt/2} e^{∓ i φ ς}`,
//!   where `ς` is the total `sigma_z / 2` of the addressed spins and `H` the
//!   Hadamard transform on those spins. Only diagonal exponentials are formed.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::sequence::Schedule;
use crate::spinsys::{build_h0, build_hc, build_hg, Operator, SpinMask, SpinSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropagationStrategy {
    Exact,
    Diagonal,
    Static,
    BholeJones,
}

impl PropagationStrategy {
    pub fn name(self) -> &'static str {
        match self {
            PropagationStrategy::Exact => "exact",
            PropagationStrategy::Diagonal => "diagonal",
            PropagationStrategy::Static => "static",
            PropagationStrategy::BholeJones => "bhole-jones",
        }
    }

    /// Cheapest valid strategy: Static, then Diagonal, then Bhole–Jones when
    /// `prefer_bj`, otherwise Exact.
    pub fn auto(schedule: &Schedule, prefer_bj: bool) -> Self {
        if schedule.is_static() {
            PropagationStrategy::Static
        } else if schedule.is_pulse_free() {
            PropagationStrategy::Diagonal
        } else if prefer_bj {
            PropagationStrategy::BholeJones
        } else {
            PropagationStrategy::Exact
        }
    }
}

/// `exp(-i H t)`; diagonal input stays diagonal.
pub fn matrix_exp_hermitian(h: &Operator, t: f64) -> Result<Operator> {
    match h {
        Operator::Diagonal(d) => {
            let dev = d.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            if dev > linalg::HERMITIAN_TOL {
                return Err(Error::NotHermitian(dev));
            }
            Ok(Operator::Diagonal(d.map(|z| C64::from_polar(1.0, -z.re * t))))
        }
        Operator::Dense(m) => Ok(Operator::Dense(linalg::expm_hermitian(m, t)?)),
    }
}

/// Real diagonal of `H0 + Hg(g, z)`.
fn drift_diagonal(h0: &[f64], sys: &SpinSystem, g: f64, z: f64) -> Vec<f64> {
    if g == 0.0 || z == 0.0 {
        return h0.to_vec();
    }
    match build_hg(sys, g, z) {
        Operator::Diagonal(d) => h0.iter().zip(d.iter()).map(|(a, b)| a + b.re).collect(),
        Operator::Dense(_) => unreachable!("gradient Hamiltonian is diagonal"),
    }
}

fn h0_values(sys: &SpinSystem) -> Vec<f64> {
    match build_h0(sys) {
        Operator::Diagonal(d) => d.iter().map(|z| z.re).collect(),
        Operator::Dense(_) => unreachable!("H0 is diagonal"),
    }
}

fn phases(values: &[f64], t: f64) -> CVec {
    CVec::from_iterator(values.len(), values.iter().map(|&e| C64::from_polar(1.0, -e * t)))
}

/// Ordered product of dense per-sample exponentials.
pub fn propagate_exact(sys: &SpinSystem, schedule: &Schedule, z: f64) -> Result<Operator> {
    let n = sys.dim();
    let h0 = h0_values(sys);
    let mut u = CMat::identity(n, n);
    for s in &schedule.samples {
        let drift = drift_diagonal(&h0, sys, s.g, z);
        if s.is_pulse_free() {
            linalg::scale_rows(&mut u, &phases(&drift, s.dt));
            continue;
        }
        let mut h = match build_hc(sys, s.omega, s.phi, s.mask) {
            Operator::Dense(m) => m,
            Operator::Diagonal(_) => unreachable!(),
        };
        for (i, e) in drift.iter().enumerate() {
            h[(i, i)] += C64::new(*e, 0.0);
        }
        u = linalg::expm_hermitian(&h, s.dt)? * u;
    }
    Ok(Operator::Dense(u))
}

/// Elementwise product of per-sample phases; rejects pulses.
pub fn propagate_diagonal(sys: &SpinSystem, schedule: &Schedule, z: f64) -> Result<Operator> {
    if !schedule.is_pulse_free() {
        return Err(Error::Strategy { strategy: "diagonal", reason: "schedule contains a pulse".into() });
    }
    let h0 = h0_values(sys);
    let mut d = CVec::from_element(sys.dim(), C64::new(1.0, 0.0));
    for s in &schedule.samples {
        let drift = drift_diagonal(&h0, sys, s.g, z);
        d.component_mul_assign(&phases(&drift, s.dt));
    }
    Ok(Operator::Diagonal(d))
}

/// `exp(-i (H0 + Hg(g, z)) tau)` as phases.
pub fn propagate_static(sys: &SpinSystem, tau: f64, g: f64, z: f64) -> Result<Operator> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("negative duration {tau}")));
    }
    let drift = drift_diagonal(&h0_values(sys), sys, g, z);
    Ok(Operator::Diagonal(phases(&drift, tau)))
}

/// `sum_{k in mask} sigma_z_k / 2` diagonal.
fn varsigma(mask: SpinMask, qubits: usize) -> Vec<f64> {
    (0..linalg::dim_of(qubits))
        .map(|i| mask.spins(qubits).map(|k| linalg::z_sign(i, k, qubits) / 2.0).sum())
        .collect()
}

/// Bhole–Jones splitting; pulses address `mask` with one shared `(Ω, φ)`.
pub fn propagate_bj(sys: &SpinSystem, schedule: &Schedule, z: f64) -> Result<Operator> {
    let q = sys.qubits();
    let n = sys.dim();
    let h0 = h0_values(sys);
    let mut u = CMat::identity(n, n);
    let mut cached: Option<(SpinMask, Vec<f64>)> = None;
    for s in &schedule.samples {
        if !(s.dt > 0.0) {
            return Err(Error::invalid("zero-length sample"));
        }
        let drift = drift_diagonal(&h0, sys, s.g, z);
        if s.is_pulse_free() {
            linalg::scale_rows(&mut u, &phases(&drift, s.dt));
            continue;
        }
        if cached.as_ref().map(|c| c.0) != Some(s.mask) {
            cached = Some((s.mask, varsigma(s.mask, q)));
        }
        let sig = &cached.as_ref().unwrap().1;
        let half = phases(&drift, s.dt / 2.0);
        let w_minus = CVec::from_iterator(n, (0..n).map(|i| half[i] * C64::from_polar(1.0, s.phi * sig[i])));
        let w_plus = CVec::from_iterator(n, (0..n).map(|i| half[i] * C64::from_polar(1.0, -s.phi * sig[i])));
        let core = CVec::from_iterator(n, sig.iter().map(|&v| C64::from_polar(1.0, -s.omega * v * s.dt)));
        linalg::scale_rows(&mut u, &w_minus);
        linalg::hadamard_rows(&mut u, s.mask.0, q);
        linalg::scale_rows(&mut u, &core);
        linalg::hadamard_rows(&mut u, s.mask.0, q);
        linalg::scale_rows(&mut u, &w_plus);
    }
    Ok(Operator::Dense(u))
}

/// Run `strategy` after checking its preconditions.
pub fn propagate(sys: &SpinSystem, schedule: &Schedule, z: f64, strategy: PropagationStrategy) -> Result<Operator> {
    match strategy {
        PropagationStrategy::Exact => propagate_exact(sys, schedule, z),
        PropagationStrategy::Diagonal => propagate_diagonal(sys, schedule, z),
        PropagationStrategy::Static => {
            if !schedule.is_static() {
                return Err(Error::Strategy {
                    strategy: "static",
                    reason: "needs a single time-independent pulse-free sample".into(),
                });
            }
            let s = schedule.samples[0];
            propagate_static(sys, s.dt, s.g, z)
        }
        PropagationStrategy::BholeJones => propagate_bj(sys, schedule, z),
    }
}

/// Ideal rotation `exp(-i angle sum_{k in mask} (cos phi sx_k + sin phi sy_k) / 2)`.
pub fn rotation_unitary(angle: f64, phase: f64, mask: SpinMask, qubits: usize) -> CMat {
    let c = C64::new((angle / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(angle / 2.0).sin());
    // [[c, -i s e^{-i phi}], [-i s e^{+i phi}, c]]
    let single = CMat::from_row_slice(2, 2, &[c, s * C64::from_polar(1.0, -phase), s * C64::from_polar(1.0, phase), c]);
    let id = CMat::identity(2, 2);
    let mut u = CMat::identity(1, 1);
    for k in 0..qubits {
        u = linalg::kron(&u, if mask.contains(k) { &single } else { &id });
    }
    u
}
