//! Multi-scan pseudo-pure-state sequence optimization.
//!
//! Each scan applies `[R(theta, phi) on all spins -> delay dt] x eta` to the
//! thermal deviation, with one constant gradient inserted before a chosen
//! block. The averaged deviation is scored by
//! `(1 - F)(1 - eps) + eps |Q/2 - M|` where `F` is the fidelity of its
//! unit-trace companion with the target and `M` its peak element.

use std::f64::consts::TAU;

use rand::Rng;

use crate::analysis::{self, companion, peak_element, thermal_deviation};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gradient::{self, coherence_order, Ensemble, EnsembleConfig};
use crate::linalg::{self, CMat, CVec, C64};
use crate::propagator::rotation_unitary;
use crate::random;
use crate::sequence::{GradientShape, Rotation, Sequence, SequenceElement, ShapeKind, Targets, DEFAULT_GUARD};
use crate::spinsys::{build_h0, Operator, SpinMask, SpinSystem};

/// Parameters per block: angle, phase, delay.
pub const BLOCK_PARAMS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PpsAnsatz {
    qubits: usize,
    scans: usize,
    blocks: usize,
    dt_max: f64,
    gradient: GradientShape,
    gradient_before: usize,
}

impl PpsAnsatz {
    /// Gradient of area `2 pi`, `tau = 1 ms`, default guards, placed before
    /// the last block; delays bounded by half the slowest coupling period.
    pub fn new(sys: &SpinSystem, scans: usize, blocks: usize) -> Result<Self> {
        if scans == 0 || blocks == 0 {
            return Err(Error::invalid("ansatz needs at least one scan and one block"));
        }
        let dt_max = match sys.min_coupling() {
            Some(j) => 1.0 / (2.0 * j),
            None => return Err(Error::InvalidSystem("delay bound needs at least one nonzero coupling".into())),
        };
        let tau = 1e-3;
        let amp = GradientShape::amp_for_kappa(sys, &ShapeKind::Const, tau, TAU);
        let gradient = GradientShape::with_guard(ShapeKind::Const, amp, tau, DEFAULT_GUARD)?;
        Ok(Self { qubits: sys.qubits(), scans, blocks, dt_max, gradient, gradient_before: blocks - 1 })
    }

    pub fn with_dt_max(mut self, dt_max: f64) -> Result<Self> {
        if !(dt_max > 0.0) {
            return Err(Error::invalid("delay bound must be positive"));
        }
        self.dt_max = dt_max;
        Ok(self)
    }

    /// Insert the gradient before block `index` (`index == blocks` puts it last).
    pub fn with_gradient_before(mut self, index: usize) -> Result<Self> {
        if index > self.blocks {
            return Err(Error::invalid(format!("gradient position {index} exceeds {} blocks", self.blocks)));
        }
        self.gradient_before = index;
        Ok(self)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn scans(&self) -> usize {
        self.scans
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    pub fn gradient(&self) -> &GradientShape {
        &self.gradient
    }

    pub fn param_count(&self) -> usize {
        self.scans * self.blocks * BLOCK_PARAMS
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension { expected: self.param_count(), got: params.len() });
        }
        Ok(())
    }

    /// `(theta, phi, dt)` of block `b` in scan `s`.
    pub fn block(&self, params: &[f64], s: usize, b: usize) -> (f64, f64, f64) {
        let i = (s * self.blocks + b) * BLOCK_PARAMS;
        (params[i], params[i + 1], params[i + 2])
    }

    /// Wrap angles into `[0, 2 pi)` and clip delays into `[0, dt_max]`.
    pub fn project(&self, params: &mut [f64]) {
        for chunk in params.chunks_mut(BLOCK_PARAMS) {
            chunk[0] = chunk[0].rem_euclid(TAU);
            chunk[1] = chunk[1].rem_euclid(TAU);
            chunk[2] = chunk[2].clamp(0.0, self.dt_max);
        }
    }

    fn clip_times(&self, params: &mut [f64]) {
        for chunk in params.chunks_mut(BLOCK_PARAMS) {
            chunk[2] = chunk[2].clamp(0.0, self.dt_max);
        }
    }

    /// Uniform draw inside the parameter box.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.param_count())
            .map(|i| if i % BLOCK_PARAMS == 2 { rng.random::<f64>() * self.dt_max } else { rng.random::<f64>() * TAU })
            .collect()
    }

    /// Initial simplex step per coordinate.
    fn steps(&self) -> Vec<f64> {
        (0..self.param_count()).map(|i| if i % BLOCK_PARAMS == 2 { 0.1 * self.dt_max } else { 0.3 }).collect()
    }

    /// The sequence text equivalent of `params`, one scan set per scan.
    pub fn to_sequence(&self, params: &[f64]) -> Result<Sequence> {
        self.check(params)?;
        let mut scans = Vec::with_capacity(self.scans);
        for s in 0..self.scans {
            let mut els = Vec::new();
            for b in 0..=self.blocks {
                if b == self.gradient_before {
                    els.push(SequenceElement::Gradient(self.gradient.clone()));
                }
                if b == self.blocks {
                    break;
                }
                let (theta, phi, dt) = self.block(params, s, b);
                els.push(SequenceElement::Rotation(Rotation::ideal(theta.rem_euclid(TAU), phi.rem_euclid(TAU), Targets::All)));
                els.push(SequenceElement::Delay(dt.clamp(0.0, self.dt_max)));
            }
            scans.push(els);
        }
        Sequence::multi(scans)
    }
}

/// Precomputed evaluator for one system and ansatz.
struct Evaluator<'a> {
    ansatz: &'a PpsAnsatz,
    energies: Vec<f64>,
    gradient_factor: CMat,
    thermal: CMat,
}

impl<'a> Evaluator<'a> {
    fn new(sys: &SpinSystem, ansatz: &'a PpsAnsatz, ensemble: &Ensemble) -> Result<Self> {
        if sys.qubits() != ansatz.qubits {
            return Err(Error::Dimension { expected: ansatz.qubits, got: sys.qubits() });
        }
        if !sys.is_homonuclear() {
            return Err(Error::InvalidSystem("the PPS ansatz uses closed-form dephasing; the system must be homonuclear".into()));
        }
        let q = sys.qubits();
        let energies: Vec<f64> = match build_h0(sys) {
            Operator::Diagonal(d) => d.iter().map(|z| z.re).collect(),
            Operator::Dense(_) => unreachable!(),
        };
        let kappa = ansatz.gradient.kappa(sys);
        let t = ansatz.gradient.duration();
        let d = sys.dim();
        let gradient_factor = CMat::from_fn(d, d, |v, w| {
            let c = coherence_order(v, w, q);
            let a = C64::from_polar(1.0, -(energies[v] - energies[w]) * t);
            if c == 0 {
                a
            } else {
                a * ensemble.coeff(-kappa * c as f64)
            }
        });
        Ok(Self { ansatz, energies, gradient_factor, thermal: thermal_deviation(q) })
    }

    fn delay(&self, rho: &CMat, dt: f64) -> CMat {
        let ph = CVec::from_iterator(self.energies.len(), self.energies.iter().map(|e| C64::from_polar(1.0, -e * dt)));
        linalg::conjugate_diag(&ph, rho)
    }

    fn state(&self, params: &[f64]) -> CMat {
        let a = self.ansatz;
        let q = a.qubits;
        let mask = SpinMask::all(q);
        let mut acc = CMat::zeros(self.thermal.nrows(), self.thermal.ncols());
        for s in 0..a.scans {
            let mut rho = self.thermal.clone();
            for b in 0..=a.blocks {
                if b == a.gradient_before {
                    rho.component_mul_assign(&self.gradient_factor);
                }
                if b == a.blocks {
                    break;
                }
                let (theta, phi, dt) = a.block(params, s, b);
                rho = linalg::conjugate(&rotation_unitary(theta, phi, mask, q), &rho);
                rho = self.delay(&rho, dt.clamp(0.0, a.dt_max));
            }
            acc += rho;
        }
        acc.scale(1.0 / a.scans as f64)
    }
}

/// Scan-averaged final deviation for `params`, each scan starting from the
/// thermal deviation and dephased by the closed form over `ensemble`.
pub fn multiscan_state(ansatz: &PpsAnsatz, params: &[f64], sys: &SpinSystem, ensemble: &Ensemble) -> Result<CMat> {
    ansatz.check(params)?;
    Ok(Evaluator::new(sys, ansatz, ensemble)?.state(params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    epsilon: f64,
    target: CMat,
    target_vector: Option<CVec>,
    qubits: usize,
    /// Ensemble divisions used by the gradient.
    pub divisions: usize,
    /// Total objective evaluations across all restarts.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl ObjectiveConfig {
    /// Target `|0..0>`, `N = min_divisions(Q)`, 8 restarts.
    pub fn new(qubits: usize, epsilon: f64, budget: usize, seed: u64) -> Result<Self> {
        Self::with_target(analysis::pps_target(qubits, 1.0), epsilon, budget, seed)
    }

    pub fn with_target(target: CMat, epsilon: f64, budget: usize, seed: u64) -> Result<Self> {
        if !(0.0..=0.5).contains(&epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 0.5], got {epsilon}")));
        }
        if budget == 0 {
            return Err(Error::invalid("evaluation budget must be at least 1"));
        }
        let target = analysis::DensityMatrix::unit_trace(target)?.into_matrix();
        let qubits = target.nrows().trailing_zeros() as usize;
        let (values, vectors) = linalg::eigh(&target);
        let top = values.imax();
        let target_vector = ((values[top] - 1.0).abs() < 1e-12).then(|| vectors.column(top).into_owned());
        Ok(Self {
            epsilon,
            target,
            target_vector,
            qubits,
            divisions: gradient::min_divisions(qubits),
            budget,
            restarts: 8,
            seed,
        })
    }

    pub fn with_restarts(mut self, restarts: usize) -> Result<Self> {
        if restarts == 0 {
            return Err(Error::invalid("at least one restart"));
        }
        self.restarts = restarts;
        Ok(self)
    }

    pub fn with_divisions(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("at least one division"));
        }
        self.divisions = n;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn target(&self) -> &CMat {
        &self.target
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }
}

/// Fidelity of the deviation's companion with the target.
pub fn pps_fidelity(state: &CMat, config: &ObjectiveConfig) -> Result<f64> {
    let c = companion(state);
    match &config.target_vector {
        Some(v) => Ok(analysis::pure_state_fidelity(&c, v)),
        None => analysis::state_fidelity(&c, &config.target),
    }
}

/// `(1 - F)(1 - eps) + eps |Q/2 - M|`.
pub fn pps_objective(state: &CMat, config: &ObjectiveConfig) -> Result<f64> {
    if state.nrows() != config.target.nrows() {
        return Err(Error::Dimension { expected: config.target.nrows(), got: state.nrows() });
    }
    let f = pps_fidelity(state, config)?;
    let m = peak_element(state);
    let half_q = config.qubits as f64 / 2.0;
    Ok((1.0 - f) * (1.0 - config.epsilon) + config.epsilon * (half_q - m).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Angles wrapped into `[0, 2 pi)`, delays within bounds.
    pub best_params: Vec<f64>,
    pub best_objective: f64,
    /// Best objective so far after each evaluation, restarts concatenated
    /// in seed order.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    /// Candidates whose objective was NaN.
    pub rejected: usize,
}

struct Search<'a, F: Fn(&[f64]) -> f64> {
    f: &'a F,
    budget: usize,
    trace: Vec<f64>,
    best: f64,
    best_x: Vec<f64>,
    rejected: usize,
}

impl<F: Fn(&[f64]) -> f64> Search<'_, F> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let mut v = (self.f)(x);
        if v.is_nan() {
            log::warn!("objective returned NaN; candidate rejected");
            self.rejected += 1;
            v = f64::INFINITY;
        }
        if v < self.best || self.best_x.is_empty() {
            self.best = self.best.min(v);
            self.best_x = x.to_vec();
        }
        self.trace.push(self.best);
        v
    }
}

/// Adaptive Nelder–Mead from `x0` until `budget` evaluations are spent; the
/// simplex is rebuilt around the best vertex whenever it collapses.
fn nelder_mead<'a, F, P>(f: &'a F, project: P, x0: Vec<f64>, steps: &[f64], budget: usize) -> Search<'a, F>
where
    F: Fn(&[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let mut s = Search { f, budget, trace: Vec::with_capacity(budget), best: f64::INFINITY, best_x: Vec::new(), rejected: 0 };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let build = |s: &mut Search<'_, F>, centre: &[f64], fc: Option<f64>, simplex: &mut Vec<(Vec<f64>, f64)>| {
        simplex.clear();
        let f0 = match fc {
            Some(v) => v,
            None => s.eval(centre),
        };
        simplex.push((centre.to_vec(), f0));
        for i in 0..n {
            if s.exhausted() {
                return;
            }
            let mut x = centre.to_vec();
            x[i] += steps[i];
            project(&mut x);
            if x[i] == centre[i] {
                x[i] -= steps[i];
                project(&mut x);
            }
            let v = s.eval(&x);
            simplex.push((x, v));
        }
    };

    if budget == 0 {
        return s;
    }
    let mut start = x0;
    project(&mut start);
    build(&mut s, &start, None, &mut simplex);

    while !s.exhausted() {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).zip(steps).map(|((a, b), h)| ((a - b) / h).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-9 || (spread.is_finite() && spread <= 1e-14 * simplex[0].1.abs().max(1e-300)) {
            let (c, fc) = simplex[0].clone();
            build(&mut s, &c, Some(fc), &mut simplex);
            continue;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
            project(&mut x);
            x
        };

        let xr = along(alpha);
        let fr = s.eval(&xr);
        if fr < simplex[0].1 {
            if s.exhausted() {
                break;
            }
            let xe = along(alpha * beta);
            let fe = s.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if s.exhausted() {
            break;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(alpha * gamma);
            let v = s.eval(&x);
            (x, v)
        } else {
            let x = along(-gamma);
            let v = s.eval(&x);
            (x, v)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if s.exhausted() {
                break;
            }
            let mut x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + delta * (v - b)).collect();
            project(&mut x);
            let v = s.eval(&x);
            *vertex = (x, v);
        }
    }
    s
}

/// Restarted Nelder–Mead over the ansatz box. Restart `r` starts from a
/// uniform draw of stream `r` of `config.seed` and receives an equal share
/// of the budget; restarts run in parallel but are merged in order, so the
/// result is identical for any thread count.
pub fn optimize_pps(sys: &SpinSystem, ansatz: &PpsAnsatz, config: &ObjectiveConfig, execution: Execution) -> Result<OptimizationResult> {
    if config.qubits != ansatz.qubits {
        return Err(Error::Dimension { expected: ansatz.qubits, got: config.qubits });
    }
    let cfg = EnsembleConfig::for_system(sys, config.divisions)?;
    let evaluator = Evaluator::new(sys, ansatz, &Ensemble::Discrete(cfg))?;
    let objective = |x: &[f64]| -> f64 {
        let state = evaluator.state(x);
        pps_objective(&state, config).unwrap_or(f64::NAN)
    };
    let steps = ansatz.steps();
    let r = config.restarts;
    let share = |i: usize| config.budget / r + usize::from(i < config.budget % r);

    let runs = execution.map(r, |i| {
        let budget = share(i);
        let mut rng = random::rng(config.seed, i as u64);
        let x0 = ansatz.random_point(&mut rng);
        let s = nelder_mead(&objective, |x: &mut [f64]| ansatz.clip_times(x), x0, &steps, budget);
        (s.trace, s.best, s.best_x, s.rejected)
    });

    let mut trace = Vec::with_capacity(config.budget);
    let mut best = f64::INFINITY;
    let mut best_params: Vec<f64> = Vec::new();
    let mut rejected = 0;
    for (t, run_best, x, rej) in runs {
        rejected += rej;
        trace.extend(t.into_iter().map(|v| best.min(v)));
        if !x.is_empty() && (best_params.is_empty() || run_best < best) {
            best = run_best;
            best_params = x;
        }
    }
    if rejected > 0 {
        log::info!("{rejected} candidate points rejected");
    }
    ansatz.project(&mut best_params);
    Ok(OptimizationResult { evaluations: trace.len(), best_params, best_objective: best, trace, rejected })
}
