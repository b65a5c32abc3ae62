//! Pseudo-pure-state optimization run and its result artifact.
//!
//! The artifact is a `key = value` file followed by a `[sequence]` section
//! holding the best sequence in the sequence text format. The objective
//! trace is stored as its improvement points `evaluation:value`, from which
//! the per-evaluation best-so-far sequence is rebuilt.

use std::fmt::Write as _;

use crate::analysis::peak_element;
use crate::error::{Error, ParseError, Result};
use crate::exec::Execution;
use crate::gradient::{Ensemble, EnsembleConfig};
use crate::optimizer::{multiscan_state, optimize_pps, pps_fidelity, ObjectiveConfig, OptimizationResult, PpsAnsatz};
use crate::sequence::{parse_sequence, serialize_sequence, Sequence};
use crate::spinsys::SpinSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct PpsConfig {
    pub scans: usize,
    pub blocks: usize,
    pub epsilon: f64,
    pub budget: usize,
    pub restarts: usize,
    pub divisions: Option<usize>,
    pub seed: u64,
    pub execution: Execution,
}

impl PpsConfig {
    pub fn new(seed: u64) -> Self {
        Self { scans: 2, blocks: 5, epsilon: 0.3, budget: 200_000, restarts: 8, divisions: None, seed, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpsArtifact {
    pub seed: u64,
    pub qubits: usize,
    pub scans: usize,
    pub blocks: usize,
    pub epsilon: f64,
    pub divisions: usize,
    pub budget: usize,
    pub restarts: usize,
    pub evaluations: usize,
    pub rejected: usize,
    pub best_objective: f64,
    pub fidelity: f64,
    /// Peak deviation element in thermal-line units.
    pub improvement: f64,
    /// One scan, s.
    pub duration: f64,
    pub best_params: Vec<f64>,
    pub trace: Vec<f64>,
    pub sequence: Sequence,
}

impl PpsArtifact {
    /// CSV summary line with header.
    pub fn summary_csv(&self) -> String {
        format!("fidelity,improvement_thermal_lines,duration_s,objective\n{},{},{},{}\n", self.fidelity, self.improvement, self.duration, self.best_objective)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "# pseudo-pure-state optimization result");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "qubits = {}", self.qubits);
        let _ = writeln!(s, "scans = {}", self.scans);
        let _ = writeln!(s, "blocks = {}", self.blocks);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "divisions = {}", self.divisions);
        let _ = writeln!(s, "budget = {}", self.budget);
        let _ = writeln!(s, "restarts = {}", self.restarts);
        let _ = writeln!(s, "evaluations = {}", self.evaluations);
        let _ = writeln!(s, "rejected = {}", self.rejected);
        let _ = writeln!(s, "best_objective = {}", self.best_objective);
        let _ = writeln!(s, "fidelity = {}", self.fidelity);
        let _ = writeln!(s, "improvement = {}", self.improvement);
        let _ = writeln!(s, "duration_s = {}", self.duration);
        let _ = writeln!(s, "best_params = {}", join(&self.best_params));
        let mut steps = Vec::new();
        let mut last = f64::NAN;
        for (i, &v) in self.trace.iter().enumerate() {
            if v != last {
                steps.push(format!("{}:{}", i + 1, v));
                last = v;
            }
        }
        let _ = writeln!(s, "trace = {}", steps.join(" "));
        let _ = writeln!(s, "[sequence]");
        s.push_str(&serialize_sequence(&self.sequence));
        s
    }

    pub fn parse(text: &str) -> std::result::Result<Self, ParseError> {
        let (head, seq_text) = match text.split_once("[sequence]\n") {
            Some(p) => p,
            None => return Err(ParseError::new(1, 1, "missing `[sequence]` section")),
        };
        let offset = head.lines().count() + 1;
        let mut kv = std::collections::BTreeMap::new();
        for (i, line) in head.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| ParseError::new(i + 1, 1, format!("expected `key = value`, got `{body}`")))?;
            kv.insert(k.trim().to_string(), (v.trim().to_string(), i + 1));
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| ParseError::new(offset, 1, format!("missing field `{k}`")));
        fn num<T: std::str::FromStr>(v: &(String, usize), k: &str) -> std::result::Result<T, ParseError> {
            v.0.parse().map_err(|_| ParseError::new(v.1, 1, format!("malformed `{k}`")))
        }
        let params = {
            let v = get("best_params")?;
            if v.0.is_empty() {
                Vec::new()
            } else {
                v.0.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| ParseError::new(v.1, 1, "malformed `best_params`"))).collect::<std::result::Result<Vec<_>, _>>()?
            }
        };
        let evaluations: usize = num(get("evaluations")?, "evaluations")?;
        let trace = {
            let v = get("trace")?;
            let mut out: Vec<f64> = Vec::with_capacity(evaluations);
            for tok in v.0.split_whitespace() {
                let (i, x) = tok.split_once(':').ok_or_else(|| ParseError::new(v.1, 1, format!("malformed trace step `{tok}`")))?;
                let i: usize = i.parse().map_err(|_| ParseError::new(v.1, 1, format!("malformed trace step `{tok}`")))?;
                let x: f64 = x.parse().map_err(|_| ParseError::new(v.1, 1, format!("malformed trace step `{tok}`")))?;
                if i == 0 || i <= out.len() || i > evaluations {
                    return Err(ParseError::new(v.1, 1, format!("trace step `{tok}` out of order")));
                }
                let fill = out.last().copied().unwrap_or(x);
                out.resize(i - 1, fill);
                out.push(x);
            }
            let fill = out.last().copied().unwrap_or(f64::INFINITY);
            out.resize(evaluations, fill);
            out
        };
        let sequence = parse_sequence(seq_text).map_err(|e| ParseError::new(e.line + offset, e.column, e.message))?;
        Ok(Self {
            seed: num(get("seed")?, "seed")?,
            qubits: num(get("qubits")?, "qubits")?,
            scans: num(get("scans")?, "scans")?,
            blocks: num(get("blocks")?, "blocks")?,
            epsilon: num(get("epsilon")?, "epsilon")?,
            divisions: num(get("divisions")?, "divisions")?,
            budget: num(get("budget")?, "budget")?,
            restarts: num(get("restarts")?, "restarts")?,
            evaluations,
            rejected: num(get("rejected")?, "rejected")?,
            best_objective: num(get("best_objective")?, "best_objective")?,
            fidelity: num(get("fidelity")?, "fidelity")?,
            improvement: num(get("improvement")?, "improvement")?,
            duration: num(get("duration_s")?, "duration_s")?,
            best_params: params,
            trace,
            sequence,
        })
    }
}

pub fn run_pps(sys: &SpinSystem, cfg: &PpsConfig) -> Result<(PpsArtifact, OptimizationResult)> {
    let ansatz = PpsAnsatz::new(sys, cfg.scans, cfg.blocks)?;
    let mut obj = ObjectiveConfig::new(sys.qubits(), cfg.epsilon, cfg.budget, cfg.seed)?.with_restarts(cfg.restarts)?;
    if let Some(n) = cfg.divisions {
        obj = obj.with_divisions(n)?;
    }
    let result = optimize_pps(sys, &ansatz, &obj, cfg.execution)?;
    if result.best_params.is_empty() {
        return Err(Error::invalid("optimizer returned no point"));
    }
    let ens = Ensemble::Discrete(EnsembleConfig::for_system(sys, obj.divisions)?);
    let state = multiscan_state(&ansatz, &result.best_params, sys, &ens)?;
    let sequence = ansatz.to_sequence(&result.best_params)?;
    let artifact = PpsArtifact {
        seed: cfg.seed,
        qubits: sys.qubits(),
        scans: cfg.scans,
        blocks: cfg.blocks,
        epsilon: cfg.epsilon,
        divisions: obj.divisions,
        budget: cfg.budget,
        restarts: cfg.restarts,
        evaluations: result.evaluations,
        rejected: result.rejected,
        best_objective: result.best_objective,
        fidelity: pps_fidelity(&state, &obj)?,
        improvement: peak_element(&state),
        duration: sequence.max_scan_duration(),
        best_params: result.best_params.clone(),
        trace: result.trace.clone(),
        sequence,
    };
    Ok((artifact, result))
}
