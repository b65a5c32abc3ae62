//! Dephasing coefficients of each coherence order during a constant gradient.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::gradient::{min_divisions, Ensemble, EnsembleConfig};
use crate::spinsys::SpinSystem;

use super::csv_string;

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceConfig {
    /// Gradient duration, s.
    pub tau: f64,
    /// Dephasing reached at `tau`.
    pub kappa: f64,
    /// Finite ensembles to trace; the continuous limit is always included.
    pub divisions: Vec<usize>,
    pub points: usize,
}

impl CoherenceConfig {
    pub fn new(qubits: usize) -> Self {
        Self { tau: 1e-3, kappa: TAU, divisions: vec![min_divisions(qubits), 14], points: 101 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub order: i32,
    pub ensemble: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub rows: Vec<TraceRow>,
}

impl CoherenceReport {
    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &["time_s", "order", "divisions", "re", "im"],
            self.rows.iter().map(|r| vec![format!("{}", r.time), r.order.to_string(), r.ensemble.clone(), format!("{}", r.re), format!("{}", r.im)]),
        )
    }

    pub fn series(&self, ensemble: &str, order: i32) -> Vec<&TraceRow> {
        self.rows.iter().filter(|r| r.ensemble == ensemble && r.order == order).collect()
    }
}

/// Factor multiplying a dyad of order `c` after time `t` of a constant
/// gradient, for `c = 1..Q`.
pub fn run_coherence_trace(sys: &SpinSystem, cfg: &CoherenceConfig) -> Result<CoherenceReport> {
    if !sys.is_homonuclear() {
        return Err(Error::InvalidSystem("coherence traces need a homonuclear system".into()));
    }
    if cfg.points < 2 {
        return Err(Error::invalid("at least two time points"));
    }
    let mut ensembles = Vec::new();
    for &n in &cfg.divisions {
        ensembles.push(Ensemble::Discrete(EnsembleConfig::for_system(sys, n)?));
    }
    ensembles.push(Ensemble::Continuous);
    let q = sys.qubits() as i32;
    let mut rows = Vec::new();
    for ens in &ensembles {
        for order in 1..=q {
            for i in 0..cfg.points {
                let frac = i as f64 / (cfg.points - 1) as f64;
                let c = ens.coeff(-cfg.kappa * frac * order as f64);
                rows.push(TraceRow { time: cfg.tau * frac, order, ensemble: ens.label(), re: c.re, im: c.im });
            }
        }
    }
    Ok(CoherenceReport { rows })
}
