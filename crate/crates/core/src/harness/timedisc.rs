//! Time-discretization error of the Bhole–Jones splitting.
//!
//! For every step `dt`, gradient shape and rotation, a rotation is spread
//! over a gradient window and the slice-averaged final states of the
//! Bhole–Jones and exact propagators are compared on Haar-random pure
//! initial states. The worst fidelity per cell is reported.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::Instant;

use crate::analysis::state_fidelity;
use crate::error::Result;
use crate::exec::Execution;
use crate::gradient::{ensemble_average, ensemble_unitaries, EnsembleConfig, EvolveOptions, StrategyChoice};
use crate::propagator::PropagationStrategy;
use crate::random::{haar_density, rng};
use crate::sequence::{GradientShape, Rotation, SequenceElement, ShapeKind, Targets};
use crate::spinsys::SpinSystem;

use super::csv_string;

#[derive(Debug, Clone, PartialEq)]
pub struct RotationSpec {
    pub label: String,
    pub angle: f64,
    pub targets: Targets,
}

impl RotationSpec {
    pub fn new(label: impl Into<String>, angle: f64, targets: Targets) -> Self {
        Self { label: label.into(), angle, targets }
    }

    /// `R_x^all(pi/2)`, `R_x^odd(pi/2)` and `R_x^odd(pi)`.
    pub fn defaults() -> Vec<Self> {
        vec![
            Self::new("x_all_90", FRAC_PI_2, Targets::All),
            Self::new("x_odd_90", FRAC_PI_2, Targets::Odd),
            Self::new("x_odd_180", PI, Targets::Odd),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimediscConfig {
    /// Sampling steps, s.
    pub dts: Vec<f64>,
    pub shapes: Vec<ShapeKind>,
    pub rotations: Vec<RotationSpec>,
    pub states: usize,
    pub divisions: usize,
    /// Pulse and gradient window, s.
    pub tau: f64,
    /// Gradient dephasing `gamma L ∫ g dt`.
    pub kappa: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl TimediscConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            dts: vec![0.5e-6, 1e-6, 2e-6, 5e-6],
            shapes: vec![ShapeKind::Const, ShapeKind::HalfSine],
            rotations: RotationSpec::defaults(),
            states: 32,
            divisions: 64,
            tau: 500e-6,
            kappa: TAU,
            seed,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimediscCell {
    pub dt: f64,
    pub shape: String,
    pub rotation: String,
    pub worst_fidelity: f64,
    /// Wall-clock seconds for the exact and Bhole–Jones propagators; not
    /// part of the CSV.
    pub exact_seconds: f64,
    pub bj_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimediscReport {
    pub columns: Vec<String>,
    pub cells: Vec<TimediscCell>,
}

impl TimediscReport {
    pub fn cell(&self, dt: f64, column: &str) -> Option<&TimediscCell> {
        self.cells.iter().find(|c| c.dt == dt && format!("{}:{}", c.shape, c.rotation) == column)
    }

    pub fn worst_at(&self, dt: f64) -> f64 {
        self.cells.iter().filter(|c| c.dt == dt).map(|c| c.worst_fidelity).fold(1.0, f64::min)
    }

    /// Wide table: one row per `dt`, one column per shape and rotation.
    pub fn to_csv(&self) -> Result<String> {
        let mut header = vec!["dt_us".to_string()];
        header.extend(self.columns.iter().cloned());
        let mut dts: Vec<f64> = self.cells.iter().map(|c| c.dt).collect();
        dts.dedup();
        let rows = dts.iter().map(|&dt| {
            let mut r = vec![format!("{}", dt * 1e6)];
            for col in &self.columns {
                r.push(self.cell(dt, col).map(|c| format!("{}", c.worst_fidelity)).unwrap_or_default());
            }
            r
        });
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        csv_string(&header, rows)
    }
}

fn shape_label(kind: &ShapeKind) -> &'static str {
    match kind {
        ShapeKind::Const => "const",
        ShapeKind::HalfSine => "halfsine",
        ShapeKind::Sampled(_) => "sampled",
    }
}

pub fn run_timedisc_study(sys: &SpinSystem, cfg: &TimediscConfig) -> Result<TimediscReport> {
    let d = sys.dim();
    let ens = EnsembleConfig::for_system(sys, cfg.divisions)?;
    let states: Vec<_> = (0..cfg.states).map(|i| haar_density(d, &mut rng(cfg.seed, i as u64))).collect();
    let mut columns = Vec::new();
    let mut cells = Vec::new();
    for kind in &cfg.shapes {
        for rot in &cfg.rotations {
            columns.push(format!("{}:{}", shape_label(kind), rot.label));
        }
    }
    for &dt in &cfg.dts {
        for kind in &cfg.shapes {
            let amp = GradientShape::amp_for_kappa(sys, kind, cfg.tau, cfg.kappa);
            let shape = GradientShape::with_guard(kind.clone(), amp, cfg.tau, 0.0)?;
            for rot in &cfg.rotations {
                let rotation = Rotation { angle: rot.angle, phase: 0.0, targets: rot.targets.clone(), duration: cfg.tau };
                let element = [SequenceElement::PulseWithGradient { rotation, shape: shape.clone() }];
                let opts = |s| EvolveOptions { dt, strategy: StrategyChoice::Force(s), execution: cfg.execution };

                let t0 = Instant::now();
                let exact = ensemble_unitaries(sys, &element, &ens, &opts(PropagationStrategy::Exact))?;
                let exact_seconds = t0.elapsed().as_secs_f64();
                let t1 = Instant::now();
                let bj = ensemble_unitaries(sys, &element, &ens, &opts(PropagationStrategy::BholeJones))?;
                let bj_seconds = t1.elapsed().as_secs_f64();

                let fids = cfg.execution.try_map(states.len(), |i| {
                    let a = ensemble_average(&exact, &states[i], Execution::Sequential);
                    let b = ensemble_average(&bj, &states[i], Execution::Sequential);
                    state_fidelity(&a, &b)
                })?;
                let worst = fids.into_iter().fold(1.0, f64::min);
                log::info!("dt={dt:e} {} {}: worst {worst} (exact {exact_seconds:.3}s, bj {bj_seconds:.3}s)", shape_label(kind), rot.label);
                cells.push(TimediscCell {
                    dt,
                    shape: shape_label(kind).into(),
                    rotation: rot.label.clone(),
                    worst_fidelity: worst,
                    exact_seconds,
                    bj_seconds,
                });
            }
        }
    }
    Ok(TimediscReport { columns, cells })
}
