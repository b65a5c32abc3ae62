#![allow(dead_code)]

pub mod props;

use std::f64::consts::PI;
use std::path::PathBuf;

use pfg_core::linalg::{bit, dim_of};
use pfg_core::spinsys::{SpinSystem, GAMMA_13C};
use pfg_core::{CMat, C64};

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

pub fn shipped_system() -> SpinSystem {
    SpinSystem::from_config_file(data_path("systems/transcrotonic.spin")).expect("shipped config parses")
}

/// Homonuclear system from offsets in Hz and the upper triangle of J in Hz.
pub fn system(offsets_hz: &[f64], j_upper: &[f64]) -> SpinSystem {
    let q = offsets_hz.len();
    let mut j = vec![vec![0.0; q]; q];
    let mut it = j_upper.iter();
    for k in 0..q {
        for n in k + 1..q {
            let v = *it.next().unwrap_or(&0.0);
            j[k][n] = v;
            j[n][k] = v;
        }
    }
    SpinSystem::new("test", offsets_hz.iter().map(|f| 2.0 * PI * f).collect(), j, vec![GAMMA_13C; q]).unwrap()
}

/// `exp(-i H t)` by Taylor series with scaling and squaring.
pub fn expm_taylor(h: &CMat, t: f64) -> CMat {
    let a = h.map(|x| x * C64::new(0.0, -t));
    let norm = (0..a.ncols()).map(|c| a.column(c).iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = a.map(|x| x / 2f64.powi(squarings as i32));
    let n = a.nrows();
    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=30 {
        term = &term * &a / C64::from(k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Partial trace by explicit index loops over every basis pair.
pub fn partial_trace_loops(rho: &CMat, keep: &[usize], q: usize) -> CMat {
    let dk = 1 << keep.len();
    let mut out = CMat::zeros(dk, dk);
    let traced: Vec<usize> = (0..q).filter(|k| !keep.contains(k)).collect();
    let reduced = |i: usize| keep.iter().fold(0, |acc, &k| (acc << 1) | bit(i, k, q));
    let env = |i: usize| traced.iter().fold(0, |acc, &k| (acc << 1) | bit(i, k, q));
    for i in 0..dim_of(q) {
        for j in 0..dim_of(q) {
            if env(i) == env(j) {
                out[(reduced(i), reduced(j))] += rho[(i, j)];
            }
        }
    }
    out
}

/// Mean of `exp(-i theta z / L)` over the `n` cell midpoints of `[0, L]`.
pub fn midpoint_average(theta: f64, n: usize) -> C64 {
    (0..n).map(|m| C64::from_polar(1.0, -theta * (m as f64 + 0.5) / n as f64)).sum::<C64>() / n as f64
}

pub fn brute_phase_sum(p0: f64, d: f64, x: f64, m: usize) -> C64 {
    (0..m).map(|k| C64::from_polar(1.0, (p0 + k as f64 * d) * x)).sum()
}

/// Fidelity of two pure states.
pub fn pure_overlap(a: &pfg_core::CVec, b: &pfg_core::CVec) -> f64 {
    a.dotc(b).norm_sqr()
}
