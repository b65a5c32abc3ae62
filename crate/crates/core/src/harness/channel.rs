//! Small versus large ensemble for a gradient-containing sequence.

use crate::analysis::{companion, partial_trace, state_fidelity, thermal_deviation};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gradient::{ensemble_evolve, min_divisions, EnsembleConfig, EvolveOptions};
use crate::linalg::CMat;
use crate::sequence::Sequence;
use crate::spinsys::SpinSystem;

use super::csv_string;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub small: usize,
    pub large: usize,
    /// 0-based spins of the reduced pair.
    pub pair: [usize; 2],
    /// Initial deviation; thermal when absent.
    pub initial: Option<CMat>,
    pub dt: f64,
    pub execution: Execution,
}

impl ChannelConfig {
    pub fn new(qubits: usize) -> Self {
        Self { small: min_divisions(qubits), large: 10_000, pair: [0, 1], initial: None, dt: 1e-6, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub small: usize,
    pub large: usize,
    pub pair: [usize; 2],
    /// Fidelity of the unit-trace companions of the two final deviations.
    pub fidelity: f64,
    pub pair_fidelity: f64,
    pub small_pair: CMat,
    pub large_pair: CMat,
    pub small_state: CMat,
    pub large_state: CMat,
}

impl ChannelReport {
    /// Reduced pair states, one matrix entry per row.
    pub fn to_csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for (n, m) in [(self.small, &self.small_pair), (self.large, &self.large_pair)] {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    rows.push(vec![n.to_string(), r.to_string(), c.to_string(), format!("{}", m[(r, c)].re), format!("{}", m[(r, c)].im)]);
                }
            }
        }
        csv_string(&["divisions", "row", "col", "re", "im"], rows)
    }

    pub fn summary_json_fields(&self) -> [(&'static str, f64); 2] {
        [("fidelity", self.fidelity), ("pair_fidelity", self.pair_fidelity)]
    }
}

pub fn run_channel(sys: &SpinSystem, seq: &Sequence, cfg: &ChannelConfig) -> Result<ChannelReport> {
    let q = sys.qubits();
    if cfg.pair[0] == cfg.pair[1] || cfg.pair.iter().any(|&k| k >= q) {
        return Err(Error::invalid(format!("pair must name two distinct spins of {q}")));
    }
    let rho0 = cfg.initial.clone().unwrap_or_else(|| thermal_deviation(q));
    let opts = EvolveOptions { dt: cfg.dt, execution: cfg.execution, ..EvolveOptions::default() };
    let run = |n: usize| -> Result<CMat> { ensemble_evolve(&rho0, sys, seq, &EnsembleConfig::for_system(sys, n)?, &opts) };
    let small_state = run(cfg.small)?;
    let large_state = run(cfg.large)?;
    let cs = companion(&small_state);
    let cl = companion(&large_state);
    let small_pair = partial_trace(&cs, &cfg.pair, q)?;
    let large_pair = partial_trace(&cl, &cfg.pair, q)?;
    Ok(ChannelReport {
        small: cfg.small,
        large: cfg.large,
        pair: cfg.pair,
        fidelity: state_fidelity(&cs, &cl)?,
        pair_fidelity: state_fidelity(&small_pair, &large_pair)?,
        small_pair,
        large_pair,
        small_state,
        large_state,
    })
}
