//! Space discretization of the sample and closed-form gradient dephasing.
//!
//! The sample of length `L` is cut into `N` equal slices; slice `m` is
//! represented by its centre `z_m = (m - 1/2) L / N`. A gradient of area
//! `∫ g dt` multiplies the dyad `|v><w|` at height `z` by
//! `exp(+i kappa c_vw z / L)` with `kappa = gamma L ∫ g dt` and `c_vw` the
//! coherence order, so ensemble averages reduce to averages of phasors:
//!
//! * continuous: `(1/L) ∫ exp(-i theta z / L) dz = sinc(theta) - i sinc(theta/2) sin(theta/2)`
//! * discrete: `(1/N) sum_m exp(-i theta (m - 1/2) / N)`
//!
//! evaluated here as `coeff(-kappa c_vw)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, CMat, C64};
use crate::propagator::{self, PropagationStrategy};
use crate::sequence::{sample_element, GradientShape, SequenceElement, Sequence};
use crate::spinsys::{build_h0, Operator, SpinSystem};

const SINGULAR_TOL: f64 = 1e-9;

/// `c_vw = (1/2) sum_k [(-1)^{b_w^k} - (-1)^{b_v^k}]` for 0-based basis indices.
pub fn coherence_order(v: usize, w: usize, qubits: usize) -> i32 {
    // sum_k (-1)^{b^k} = Q - 2 popcount
    let ones = |i: usize| (i & (linalg::dim_of(qubits) - 1)).count_ones() as i32;
    ones(v) - ones(w)
}

/// Dyad expansion `rho = sum a_vw |v><w|` with orders and optional
/// free-evolution phases.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceDecomposition {
    qubits: usize,
    coefficients: CMat,
    phases: Option<CMat>,
}

impl CoherenceDecomposition {
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn coefficient(&self, v: usize, w: usize) -> C64 {
        self.coefficients[(v, w)]
    }

    pub fn order(&self, v: usize, w: usize) -> i32 {
        coherence_order(v, w, self.qubits)
    }

    /// `A_vw`, if free-evolution phases were attached.
    pub fn phase(&self, v: usize, w: usize) -> Option<C64> {
        self.phases.as_ref().map(|p| p[(v, w)])
    }

    /// Attach `A_vw = exp(-i (E_v - E_w) t)` from `H0`.
    pub fn with_free_evolution(mut self, sys: &SpinSystem, t: f64) -> Self {
        self.phases = Some(free_phases(sys, t));
        self
    }

    /// Dyads holding coherence order `c`.
    pub fn dyads_of_order(&self, c: i32) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.coefficients.nrows();
        (0..d).flat_map(move |v| (0..d).map(move |w| (v, w))).filter(move |&(v, w)| self.order(v, w) == c)
    }

    /// `sum a_vw A_vw |v><w|` (phases taken as 1 when absent).
    pub fn recompose(&self) -> CMat {
        match &self.phases {
            Some(p) => self.coefficients.component_mul(p),
            None => self.coefficients.clone(),
        }
    }
}

pub fn decompose(rho: &CMat, qubits: usize) -> Result<CoherenceDecomposition> {
    if rho.nrows() != linalg::dim_of(qubits) || !rho.is_square() {
        return Err(Error::Dimension { expected: linalg::dim_of(qubits), got: rho.nrows() });
    }
    Ok(CoherenceDecomposition { qubits, coefficients: rho.clone(), phases: None })
}

fn h0_energies(sys: &SpinSystem) -> Vec<f64> {
    match build_h0(sys) {
        Operator::Diagonal(d) => d.iter().map(|z| z.re).collect(),
        Operator::Dense(_) => unreachable!("H0 is diagonal"),
    }
}

fn free_phases(sys: &SpinSystem, t: f64) -> CMat {
    let e = h0_energies(sys);
    let d = e.len();
    CMat::from_fn(d, d, |v, w| C64::from_polar(1.0, -(e[v] - e[w]) * t))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Average of `exp(-i theta u)` over `u` uniform in `[0, 1]`.
pub fn continuous_coeff(theta: f64) -> C64 {
    C64::new(sinc(theta), -sinc(theta / 2.0) * (theta / 2.0).sin())
}

/// `sum_{m=1}^{M} exp(i p_m x)` with `p_m = p0 + (m - 1) d`.
///
/// Closed form of the geometric series,
/// `i [e^{i(p0 - d/2)x} - e^{i(Md + p0 - d/2)x}] / (2 sin(dx/2))`,
/// rewritten as `e^{i(p0 + (M-1)d/2)x} sin(M y) / sin(y)` with `y = dx/2`
/// reduced modulo `pi` so the ratio stays accurate near its removable
/// singularities. Falls back to the direct sum when `|sin(y)| < 1e-9`.
pub fn phase_sum(p0: f64, d: f64, x: f64, m: usize) -> C64 {
    assert!(m >= 1, "phase_sum needs at least one term");
    let y = d * x / 2.0;
    if y.sin().abs() < SINGULAR_TOL {
        return phase_sum_direct(p0, d, x, m);
    }
    let k = (y / std::f64::consts::PI).round();
    let delta = y - k * std::f64::consts::PI;
    // sin(M(k pi + delta)) / sin(k pi + delta) = (-1)^{k(M-1)} sin(M delta) / sin(delta)
    let sign = if (k as i64).rem_euclid(2) == 1 && m % 2 == 0 { -1.0 } else { 1.0 };
    let ratio = sign * (m as f64 * delta).sin() / delta.sin();
    C64::from_polar(ratio, (p0 + (m as f64 - 1.0) * d / 2.0) * x)
}

/// Term-by-term evaluation of [`phase_sum`].
pub fn phase_sum_direct(p0: f64, d: f64, x: f64, m: usize) -> C64 {
    (0..m).map(|j| C64::from_polar(1.0, (p0 + j as f64 * d) * x)).sum()
}

/// Average of `exp(-i theta u_m)` over the `N` slice centres `u_m = (m - 1/2)/N`.
pub fn discrete_coeff(theta: f64, n: usize) -> C64 {
    assert!(n >= 1, "at least one division");
    phase_sum(0.5, 1.0, -theta / n as f64, n) / n as f64
}

/// Smallest `N` that suppresses every nonzero coherence of a `Q`-spin
/// register after one gradient of area `2 pi`.
pub fn min_divisions(qubits: usize) -> usize {
    qubits + 2
}

/// `ceil(a Gamma^b - Q)`, never below [`min_divisions`].
pub fn predict_divisions(gamma: f64, qubits: usize, a: f64, b: f64) -> usize {
    let raw = (a * gamma.powf(b) - qubits as f64).ceil();
    let floor = min_divisions(qubits);
    if raw.is_finite() && raw > floor as f64 {
        raw as usize
    } else {
        floor
    }
}

/// `N` slices of a sample of length `L` (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    n: usize,
    length: f64,
}

impl EnsembleConfig {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("ensemble needs at least one division"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("sample length must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    /// Divisions over the system's sample length.
    pub fn for_system(sys: &SpinSystem, n: usize) -> Result<Self> {
        Self::new(n, sys.sample_length())
    }

    pub fn divisions(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn position(&self, m: usize) -> f64 {
        (m as f64 + 0.5) * self.length / self.n as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.position(m)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ensemble {
    Discrete(EnsembleConfig),
    Continuous,
}

impl Ensemble {
    /// Ensemble average of `exp(-i theta z / L)`.
    pub fn coeff(&self, theta: f64) -> C64 {
        match self {
            Ensemble::Discrete(c) => discrete_coeff(theta, c.n),
            Ensemble::Continuous => continuous_coeff(theta),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Ensemble::Discrete(c) => c.n.to_string(),
            Ensemble::Continuous => "inf".into(),
        }
    }
}

fn require_homonuclear(sys: &SpinSystem) -> Result<()> {
    if sys.is_homonuclear() {
        Ok(())
    } else {
        Err(Error::InvalidSystem("closed-form dephasing needs a homonuclear system; use ensemble_evolve".into()))
    }
}

/// Ensemble-averaged effect of a pulse-free gradient of dephasing `kappa`
/// during `free_time` of `H0` evolution.
pub fn apply_gradient_closed(rho: &CMat, sys: &SpinSystem, kappa: f64, free_time: f64, ensemble: &Ensemble) -> Result<CMat> {
    require_homonuclear(sys)?;
    let q = sys.qubits();
    let dec = decompose(rho, q)?.with_free_evolution(sys, free_time);
    let mut out = dec.recompose();
    let factors: Vec<C64> = (-(q as i32)..=q as i32).map(|c| ensemble.coeff(-kappa * c as f64)).collect();
    let d = out.nrows();
    for v in 0..d {
        for w in 0..d {
            let c = coherence_order(v, w, q);
            if c != 0 {
                out[(v, w)] *= factors[(c + q as i32) as usize];
            }
        }
    }
    Ok(out)
}

/// [`apply_gradient_closed`] for a gradient element, guards included.
pub fn apply_gradient_shape(rho: &CMat, sys: &SpinSystem, shape: &GradientShape, ensemble: &Ensemble) -> Result<CMat> {
    apply_gradient_closed(rho, sys, shape.kappa(sys), shape.duration(), ensemble)
}

/// How [`ensemble_evolve`] picks a propagator for each sampled element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyChoice {
    /// Static, then Diagonal, then Exact.
    Auto,
    /// Static, then Diagonal, then Bhole–Jones.
    PreferBholeJones,
    /// Use this strategy for every sampled element.
    Force(PropagationStrategy),
}

impl StrategyChoice {
    fn resolve(self, schedule: &crate::sequence::Schedule) -> PropagationStrategy {
        match self {
            StrategyChoice::Auto => PropagationStrategy::auto(schedule, false),
            StrategyChoice::PreferBholeJones => PropagationStrategy::auto(schedule, true),
            StrategyChoice::Force(s) => s,
        }
    }
}

/// Simulation settings for direct ensemble evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Sampling step, s.
    pub dt: f64,
    pub strategy: StrategyChoice,
    pub execution: Execution,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { dt: 1e-6, strategy: StrategyChoice::Auto, execution: Execution::default() }
    }
}

/// One step of an ensemble evolution: a sequence element, or an arbitrary
/// position-independent unitary.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Element(SequenceElement),
    Unitary(CMat),
}

impl From<SequenceElement> for Stage {
    fn from(e: SequenceElement) -> Self {
        Stage::Element(e)
    }
}

fn as_stages(elements: &[SequenceElement]) -> Vec<Stage> {
    elements.iter().cloned().map(Stage::Element).collect()
}

enum Piece {
    Fixed(Operator),
    Sampled(crate::sequence::Schedule, PropagationStrategy),
}

fn build_pieces(sys: &SpinSystem, stages: &[Stage], opts: &EvolveOptions) -> Result<Vec<Piece>> {
    let q = sys.qubits();
    let mut pieces: Vec<Piece> = Vec::new();
    let push_fixed = |pieces: &mut Vec<Piece>, op: Operator| match pieces.last_mut() {
        Some(Piece::Fixed(prev)) => *prev = op.compose(prev),
        _ => pieces.push(Piece::Fixed(op)),
    };
    for stage in stages {
        let e = match stage {
            Stage::Unitary(u) => {
                if u.nrows() != sys.dim() || !u.is_square() {
                    return Err(Error::Dimension { expected: sys.dim(), got: u.nrows() });
                }
                push_fixed(&mut pieces, Operator::Dense(u.clone()));
                continue;
            }
            Stage::Element(e) => e,
        };
        if let SequenceElement::Rotation(r) = e {
            if r.is_ideal() {
                push_fixed(&mut pieces, Operator::Dense(propagator::rotation_unitary(r.angle, r.phase, r.targets.mask(q), q)));
                continue;
            }
        }
        let sch = sample_element(e, opts.dt, sys.gradient_max(), q)?;
        if sch.is_empty() {
            continue;
        }
        let strategy = opts.strategy.resolve(&sch);
        if sch.samples.iter().all(|s| s.g == 0.0) {
            push_fixed(&mut pieces, propagator::propagate(sys, &sch, 0.0, strategy)?);
        } else {
            pieces.push(Piece::Sampled(sch, strategy));
        }
    }
    Ok(pieces)
}

fn unitary_at(sys: &SpinSystem, pieces: &[Piece], z: f64) -> Result<Operator> {
    let mut u = Operator::identity(sys.dim());
    for p in pieces {
        let step = match p {
            Piece::Fixed(op) => op.clone(),
            Piece::Sampled(sch, strategy) => propagator::propagate(sys, sch, z, *strategy)?,
        };
        u = step.compose(&u);
    }
    Ok(u)
}

/// Propagator of one scan at every slice centre.
pub fn ensemble_unitaries(
    sys: &SpinSystem,
    elements: &[SequenceElement],
    cfg: &EnsembleConfig,
    opts: &EvolveOptions,
) -> Result<Vec<Operator>> {
    ensemble_unitaries_stages(sys, &as_stages(elements), cfg, opts)
}

/// [`ensemble_unitaries`] over general stages.
pub fn ensemble_unitaries_stages(sys: &SpinSystem, stages: &[Stage], cfg: &EnsembleConfig, opts: &EvolveOptions) -> Result<Vec<Operator>> {
    let pieces = build_pieces(sys, stages, opts)?;
    opts.execution.try_map(cfg.n, |m| unitary_at(sys, &pieces, cfg.position(m)))
}

/// `(1/N) sum_m U_m rho U_m^dag` with a fixed reduction tree.
pub fn ensemble_average(unitaries: &[Operator], rho: &CMat, execution: Execution) -> CMat {
    let n = unitaries.len();
    execution.tree_sum(n, &|m| unitaries[m].conjugate(rho)).scale(1.0 / n as f64)
}

fn check_state_dim(rho: &CMat, sys: &SpinSystem) -> Result<()> {
    if rho.nrows() != sys.dim() || !rho.is_square() {
        return Err(Error::Dimension { expected: sys.dim(), got: rho.nrows() });
    }
    Ok(())
}

/// Slice-averaged final state of one scan.
pub fn ensemble_evolve_elements(
    rho0: &CMat,
    sys: &SpinSystem,
    elements: &[SequenceElement],
    cfg: &EnsembleConfig,
    opts: &EvolveOptions,
) -> Result<CMat> {
    ensemble_evolve_stages(rho0, sys, &as_stages(elements), cfg, opts)
}

/// Slice-averaged final state after general stages.
pub fn ensemble_evolve_stages(rho0: &CMat, sys: &SpinSystem, stages: &[Stage], cfg: &EnsembleConfig, opts: &EvolveOptions) -> Result<CMat> {
    check_state_dim(rho0, sys)?;
    let us = ensemble_unitaries_stages(sys, stages, cfg, opts)?;
    Ok(ensemble_average(&us, rho0, opts.execution))
}

/// Slice-averaged final state, averaged over scans.
pub fn ensemble_evolve(rho0: &CMat, sys: &SpinSystem, seq: &Sequence, cfg: &EnsembleConfig, opts: &EvolveOptions) -> Result<CMat> {
    let mut acc = CMat::zeros(sys.dim(), sys.dim());
    for scan in seq.scans() {
        acc += ensemble_evolve_elements(rho0, sys, scan, cfg, opts)?;
    }
    Ok(acc.scale(1.0 / seq.scan_count() as f64))
}

/// Exact evolution by coherence-pathway bookkeeping.
///
/// The state is kept as a Fourier series in `u = z / L` whose harmonics are
/// integer multiples of the first gradient's `kappa`; every later gradient
/// must have an area that is an integer multiple of the first. Only the
/// final average depends on the ensemble, so `Continuous` is exact.
/// Supports ideal rotations, pulse-free elements and pulse-free gradients
/// of any shape on homonuclear systems.
pub fn pathway_evolve(rho0: &CMat, sys: &SpinSystem, elements: &[SequenceElement], ensemble: &Ensemble) -> Result<CMat> {
    pathway_evolve_stages(rho0, sys, &as_stages(elements), ensemble)
}

/// [`pathway_evolve`] over general stages.
pub fn pathway_evolve_stages(rho0: &CMat, sys: &SpinSystem, stages: &[Stage], ensemble: &Ensemble) -> Result<CMat> {
    require_homonuclear(sys)?;
    check_state_dim(rho0, sys)?;
    let q = sys.qubits();
    let d = sys.dim();
    let mut comps: BTreeMap<i64, CMat> = BTreeMap::new();
    comps.insert(0, rho0.clone());
    let mut base: Option<f64> = None;
    let opts = EvolveOptions { dt: 1e-6, strategy: StrategyChoice::Auto, execution: Execution::Sequential };

    let conj_all = |comps: &mut BTreeMap<i64, CMat>, op: &Operator| {
        for c in comps.values_mut() {
            *c = op.conjugate(c);
        }
    };

    for stage in stages {
        let shape = match stage {
            Stage::Element(SequenceElement::Gradient(s)) if s.amp > 0.0 => s,
            Stage::Element(SequenceElement::PulseWithGradient { shape, .. }) if shape.amp > 0.0 => {
                return Err(Error::invalid("pathway evolution cannot overlap pulses with gradients"));
            }
            other => {
                for p in build_pieces(sys, std::slice::from_ref(other), &opts)? {
                    match p {
                        Piece::Fixed(op) => conj_all(&mut comps, &op),
                        Piece::Sampled(..) => unreachable!("gradient-free elements are z-independent"),
                    }
                }
                continue;
            }
        };
        let kappa = shape.kappa(sys);
        let k0 = *base.get_or_insert(kappa);
        let ratio = kappa / k0;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(Error::invalid(format!("gradient area ratio {ratio} is not an integer")));
        }
        let n = n as i64;
        let free = Operator::Diagonal(linalg::CVec::from_iterator(
            d,
            h0_energies(sys).iter().map(|e| C64::from_polar(1.0, -e * shape.duration())),
        ));
        conj_all(&mut comps, &free);
        let mut next: BTreeMap<i64, CMat> = BTreeMap::new();
        for (h, c) in &comps {
            for v in 0..d {
                for w in 0..d {
                    let x = c[(v, w)];
                    if x == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let target = h + n * coherence_order(v, w, q) as i64;
                    next.entry(target).or_insert_with(|| CMat::zeros(d, d))[(v, w)] += x;
                }
            }
        }
        comps = next;
    }

    let k0 = base.unwrap_or(0.0);
    let mut out = CMat::zeros(d, d);
    for (h, c) in &comps {
        if *h == 0 {
            out += c;
        } else {
            out += c.map(|x| x * ensemble.coeff(-(*h as f64) * k0));
        }
    }
    Ok(out)
}
