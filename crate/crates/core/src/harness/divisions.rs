//! Divisions needed for a target fidelity after repeated unitary + gradient
//! blocks, and the fit `N(Gamma) = a Gamma^b - Q` of the per-`Gamma` maxima.

use std::f64::consts::TAU;

use crate::analysis::state_fidelity;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gradient::{ensemble_evolve_stages, pathway_evolve_stages, Ensemble, EnsembleConfig, EvolveOptions, Stage};
use crate::linalg::{CMat, C64};
use crate::random::{haar_unitary, rng};
use crate::sequence::{GradientShape, SequenceElement, ShapeKind, DEFAULT_GUARD};
use crate::spinsys::SpinSystem;

use super::csv_string;

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionsConfig {
    pub gammas: Vec<usize>,
    pub trials: usize,
    pub threshold: f64,
    pub cap: usize,
    pub kappa: f64,
    pub tau: f64,
    pub guard: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl DivisionsConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            gammas: vec![1, 2, 4, 8, 16],
            trials: 8,
            threshold: 0.99999,
            cap: 512,
            kappa: TAU,
            tau: 1e-3,
            guard: DEFAULT_GUARD,
            seed,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionsRow {
    pub gamma: usize,
    /// Smallest passing `N` per trial; `None` when the cap was not enough.
    pub trials: Vec<Option<usize>>,
}

impl DivisionsRow {
    pub fn max_divisions(&self) -> Option<usize> {
        self.trials.iter().copied().collect::<Option<Vec<_>>>().and_then(|v| v.into_iter().max())
    }

    pub fn flagged(&self) -> bool {
        self.trials.iter().any(Option::is_none)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub a: f64,
    pub b: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionsReport {
    pub qubits: usize,
    pub rows: Vec<DivisionsRow>,
    pub fit: Option<PowerFit>,
}

impl DivisionsReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = csv_string(
            &["gamma", "max_divisions", "flagged", "trial_divisions"],
            self.rows.iter().map(|r| {
                let trials: Vec<String> = r.trials.iter().map(|t| t.map(|n| n.to_string()).unwrap_or_else(|| "none".into())).collect();
                vec![
                    r.gamma.to_string(),
                    r.max_divisions().map(|n| n.to_string()).unwrap_or_else(|| "none".into()),
                    r.flagged().to_string(),
                    trials.join(" "),
                ]
            }),
        )?;
        if let Some(f) = &self.fit {
            out.push_str(&format!("# fit N = a Gamma^b - {}: a = {}, b = {}, rms = {}\n", self.qubits, f.a, f.b, f.rms));
        }
        Ok(out)
    }
}

fn trial_stages(sys: &SpinSystem, shape: &GradientShape, gamma: usize, seed: u64, stream: u64) -> Vec<Stage> {
    let mut r = rng(seed, stream);
    let mut stages = Vec::with_capacity(2 * gamma);
    for _ in 0..gamma {
        stages.push(Stage::Unitary(haar_unitary(sys.dim(), &mut r)));
        stages.push(Stage::Element(SequenceElement::Gradient(shape.clone())));
    }
    stages
}

fn ground_state(dim: usize) -> CMat {
    let mut rho = CMat::zeros(dim, dim);
    rho[(0, 0)] = C64::new(1.0, 0.0);
    rho
}

/// Smallest `N <= cap` whose state reaches `threshold` against `reference`,
/// searching by doubling from 2 and then bisecting.
fn min_passing(sys: &SpinSystem, stages: &[Stage], reference: &CMat, cfg: &DivisionsConfig) -> Result<Option<usize>> {
    let rho0 = ground_state(sys.dim());
    let opts = EvolveOptions { execution: Execution::Sequential, ..EvolveOptions::default() };
    let passes = |n: usize| -> Result<bool> {
        let ens = EnsembleConfig::for_system(sys, n)?;
        let st = ensemble_evolve_stages(&rho0, sys, stages, &ens, &opts)?;
        Ok(state_fidelity(&st, reference)? >= cfg.threshold)
    };
    let mut lo = 1;
    let mut hi = 2;
    loop {
        if hi > cfg.cap {
            if lo < cfg.cap && passes(cfg.cap)? {
                hi = cfg.cap;
                break;
            }
            return Ok(None);
        }
        if passes(hi)? {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

pub fn run_divisions_sweep(sys: &SpinSystem, cfg: &DivisionsConfig) -> Result<DivisionsReport> {
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::invalid("threshold must lie in (0, 1)"));
    }
    if cfg.gammas.is_empty() || cfg.trials == 0 || cfg.gammas.contains(&0) {
        return Err(Error::invalid("need at least one Gamma >= 1 and one trial"));
    }
    let amp = GradientShape::amp_for_kappa(sys, &ShapeKind::Const, cfg.tau, cfg.kappa);
    let shape = GradientShape::with_guard(ShapeKind::Const, amp, cfg.tau, cfg.guard)?;
    let jobs: Vec<(usize, usize)> = cfg.gammas.iter().enumerate().flat_map(|(g, _)| (0..cfg.trials).map(move |t| (g, t))).collect();
    let results = cfg.execution.try_map(jobs.len(), |j| {
        let (g, t) = jobs[j];
        let gamma = cfg.gammas[g];
        let stages = trial_stages(sys, &shape, gamma, cfg.seed, ((g as u64) << 32) | t as u64);
        let reference = pathway_evolve_stages(&ground_state(sys.dim()), sys, &stages, &Ensemble::Continuous)?;
        min_passing(sys, &stages, &reference, cfg)
    })?;
    let rows: Vec<DivisionsRow> = cfg
        .gammas
        .iter()
        .enumerate()
        .map(|(g, &gamma)| DivisionsRow { gamma, trials: results[g * cfg.trials..(g + 1) * cfg.trials].to_vec() })
        .collect();
    let points: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.max_divisions().map(|n| (r.gamma as f64, n as f64))).collect();
    let fit = fit_power_law(&points, sys.qubits() as f64);
    Ok(DivisionsReport { qubits: sys.qubits(), rows, fit })
}

/// Least-squares fit of `y = a x^b - q`: log-linear start, then Gauss–Newton
/// with step halving.
pub fn fit_power_law(points: &[(f64, f64)], q: f64) -> Option<PowerFit> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), (y + q).max(1e-12).ln())).collect();
    let n = logs.len() as f64;
    let (sx, sy) = logs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let mut b = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let mut a = (my - b * mx).exp();
    let sse = |a: f64, b: f64| points.iter().map(|&(x, y)| (a * x.powf(b) - q - y).powi(2)).sum::<f64>();
    let mut cur = sse(a, b);
    for _ in 0..200 {
        // normal equations of the 2-parameter Jacobian
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in points {
            let p = x.powf(b);
            let r = a * p - q - y;
            let da = p;
            let db = a * p * x.ln();
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let det = jaa * jbb - jab * jab;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (jbb * ga - jab * gb) / det;
        let step_b = (jaa * gb - jab * ga) / det;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let (na, nb) = (a - t * step_a, b - t * step_b);
            let s = sse(na, nb);
            if s < cur {
                a = na;
                b = nb;
                improved = (cur - s) > 1e-15 * cur.max(1e-300);
                cur = s;
                break;
            }
            t /= 2.0;
        }
        if !improved {
            break;
        }
    }
    Some(PowerFit { a, b, rms: (cur / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|&g: &f64| (g, 8.5 * g.powf(0.464) - 4.0)).collect();
        let f = fit_power_law(&pts, 4.0).unwrap();
        assert!((f.a - 8.5).abs() < 1e-8 && (f.b - 0.464).abs() < 1e-9, "{f:?}");
    }
}
