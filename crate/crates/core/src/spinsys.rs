//! Spin-system description and Hamiltonian builders.
//!
//! Conventions: ħ = 1 and every Hamiltonian is in rad/s. Basis index `i`
//! encodes the spins as a binary number with spin 0 in the most significant
//! bit, and `|0>` is the `+1` eigenstate of `sigma_z`.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, ParseError, Result};
use crate::linalg::{self, CMat, CVec, C64};

/// Gyromagnetic ratio of 13C in rad s⁻¹ T⁻¹; `gamma_rel` values are relative to it.
pub const GAMMA_13C: f64 = 6.728284e7;

const DEFAULT_SAMPLE_LENGTH: f64 = 0.05;
const DEFAULT_GRADIENT_MAX_KHZ: f64 = 48.6;

/// Set of spins addressed by a pulse; bit `k` is spin `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinMask(pub u64);

impl SpinMask {
    pub fn all(qubits: usize) -> Self {
        SpinMask(if qubits >= 64 { u64::MAX } else { (1u64 << qubits) - 1 })
    }

    pub fn from_spins(spins: &[usize]) -> Self {
        SpinMask(spins.iter().fold(0, |m, &k| m | 1 << k))
    }

    pub fn contains(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn spins(self, qubits: usize) -> impl Iterator<Item = usize> {
        (0..qubits).filter(move |&k| self.contains(k))
    }
}

/// A Hermitian or unitary operator on the register, tagged when diagonal so
/// callers can take the fast path without inspecting entries.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Dense(CMat),
    Diagonal(CVec),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Diagonal(d) => d.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Operator::Diagonal(_))
    }

    pub fn identity(dim: usize) -> Self {
        Operator::Diagonal(CVec::from_element(dim, C64::new(1.0, 0.0)))
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Diagonal(d) => CMat::from_diagonal(d),
        }
    }

    pub fn add(&self, other: &Operator) -> Operator {
        match (self, other) {
            (Operator::Diagonal(a), Operator::Diagonal(b)) => Operator::Diagonal(a + b),
            _ => Operator::Dense(self.to_dense() + other.to_dense()),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Operator) -> Operator {
        match (self, other) {
            (Operator::Diagonal(a), Operator::Diagonal(b)) => Operator::Diagonal(a.component_mul(b)),
            (Operator::Diagonal(a), Operator::Dense(m)) => {
                let mut out = m.clone();
                linalg::scale_rows(&mut out, a);
                Operator::Dense(out)
            }
            (Operator::Dense(m), Operator::Diagonal(b)) => {
                let mut out = m.clone();
                for j in 0..out.ncols() {
                    for i in 0..out.nrows() {
                        out[(i, j)] *= b[j];
                    }
                }
                Operator::Dense(out)
            }
            (Operator::Dense(a), Operator::Dense(b)) => Operator::Dense(a * b),
        }
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, rho: &CMat) -> CMat {
        match self {
            Operator::Dense(u) => linalg::conjugate(u, rho),
            Operator::Diagonal(d) => linalg::conjugate_diag(d, rho),
        }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        match self {
            Operator::Dense(m) => linalg::hermitian_deviation(m),
            Operator::Diagonal(d) => d.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
        }
    }

    pub fn unitarity_deviation(&self) -> f64 {
        match self {
            Operator::Dense(m) => linalg::unitarity_deviation(m),
            Operator::Diagonal(d) => d.iter().map(|z| (z.norm_sqr() - 1.0).abs()).fold(0.0, f64::max),
        }
    }
}

/// Register of coupled spin-1/2 nuclei in the rotating frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    label: String,
    /// `omega_k - omega_R`, rad/s.
    offsets: Vec<f64>,
    /// Symmetric, zero diagonal, Hz.
    couplings: Vec<Vec<f64>>,
    /// rad s⁻¹ T⁻¹.
    gammas: Vec<f64>,
    /// m.
    sample_length: f64,
    /// Hardware maximum gradient amplitude G, T/m.
    gradient_max: f64,
}

impl SpinSystem {
    pub fn new(
        label: impl Into<String>,
        offsets: Vec<f64>,
        couplings: Vec<Vec<f64>>,
        gammas: Vec<f64>,
    ) -> Result<Self> {
        let q = offsets.len();
        if q == 0 {
            return Err(Error::InvalidSystem("at least one spin is required".into()));
        }
        if q > 12 {
            return Err(Error::InvalidSystem(format!("{q} spins exceeds the supported maximum of 12")));
        }
        if gammas.len() != q {
            return Err(Error::InvalidSystem(format!("{} gyromagnetic ratios for {q} spins", gammas.len())));
        }
        if couplings.len() != q || couplings.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidSystem(format!("coupling table must be {q}x{q}")));
        }
        for k in 0..q {
            if couplings[k][k] != 0.0 {
                return Err(Error::InvalidSystem(format!("coupling table diagonal entry {k} is nonzero")));
            }
            for n in 0..k {
                if couplings[k][n] != couplings[n][k] {
                    return Err(Error::InvalidSystem(format!(
                        "coupling table is not symmetric at ({n},{k}): {} vs {}",
                        couplings[n][k], couplings[k][n]
                    )));
                }
            }
        }
        if offsets.iter().chain(gammas.iter()).chain(couplings.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSystem("non-finite parameter".into()));
        }
        let sample_length = DEFAULT_SAMPLE_LENGTH;
        Ok(Self {
            label: label.into(),
            offsets,
            couplings,
            gammas,
            sample_length,
            gradient_max: gradient_max_from_khz(DEFAULT_GRADIENT_MAX_KHZ, sample_length),
        })
    }

    /// Homonuclear 13C register with no offsets or couplings.
    pub fn bare(qubits: usize) -> Self {
        Self::new("bare", vec![0.0; qubits], vec![vec![0.0; qubits]; qubits], vec![GAMMA_13C; qubits])
            .expect("bare system is valid")
    }

    /// Override the sample length (m) and the gradient calibration
    /// `gamma_13C * L * G / 2pi` in kHz.
    pub fn with_gradient_calibration(mut self, sample_length: f64, gradient_max_khz: f64) -> Result<Self> {
        if !(sample_length > 0.0) || !(gradient_max_khz > 0.0) {
            return Err(Error::InvalidSystem("sample length and gradient calibration must be positive".into()));
        }
        self.sample_length = sample_length;
        self.gradient_max = gradient_max_from_khz(gradient_max_khz, sample_length);
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn qubits(&self) -> usize {
        self.offsets.len()
    }

    pub fn dim(&self) -> usize {
        linalg::dim_of(self.qubits())
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn coupling(&self, k: usize, n: usize) -> f64 {
        self.couplings[k][n]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn sample_length(&self) -> f64 {
        self.sample_length
    }

    pub fn gradient_max(&self) -> f64 {
        self.gradient_max
    }

    pub fn is_homonuclear(&self) -> bool {
        self.gammas.iter().all(|&g| g == self.gammas[0])
    }

    /// Smallest nonzero |J|, Hz.
    pub fn min_coupling(&self) -> Option<f64> {
        self.couplings
            .iter()
            .flatten()
            .map(|j| j.abs())
            .filter(|&j| j > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Dephasing angle `gamma_k * L * g_total` (rad) picked up across the whole
    /// sample by spin `k` for a gradient of area `area` (T·s/m).
    pub fn kappa_for_area(&self, k: usize, area: f64) -> f64 {
        self.gammas[k] * self.sample_length * area
    }

    /// Parse the key/value spin-system format (see `docs/formats.md`).
    pub fn parse_config(text: &str) -> std::result::Result<Self, ParseError> {
        parse_config(text)
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Ok(parse_config(&text)?)
    }
}

fn gradient_max_from_khz(khz: f64, length: f64) -> f64 {
    2.0 * PI * khz * 1e3 / (GAMMA_13C * length)
}

fn parse_config(text: &str) -> std::result::Result<SpinSystem, ParseError> {
    let mut label = String::new();
    let mut qubits: Option<usize> = None;
    let mut offsets_hz: Option<Vec<f64>> = None;
    let mut gamma_rel: Option<Vec<f64>> = None;
    let mut length = DEFAULT_SAMPLE_LENGTH;
    let mut gmax_khz = DEFAULT_GRADIENT_MAX_KHZ;
    let mut j_rows: Option<Vec<Vec<f64>>> = None;
    let mut in_table = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = line.len() - line.trim_start().len() + 1;

        if trimmed.ends_with(':') {
            let key = trimmed.trim_end_matches(':').trim();
            if key != "J_hz" {
                return Err(ParseError::new(line_no, col, format!("unknown table `{key}`")));
            }
            in_table = true;
            j_rows = Some(Vec::new());
            continue;
        }
        if let Some((key, value)) = trimmed.split_once('=') {
            in_table = false;
            let key = key.trim();
            let value = value.trim();
            let vcol = col + trimmed.find('=').unwrap() + 1;
            match key {
                "label" => label = value.to_string(),
                "qubits" | "Q" => {
                    let q = value
                        .parse::<usize>()
                        .map_err(|_| ParseError::new(line_no, vcol, format!("malformed qubit count `{value}`")))?;
                    qubits = Some(q);
                }
                "offsets_hz" => offsets_hz = Some(parse_numbers(value, line_no, vcol)?),
                "gamma_rel" => gamma_rel = Some(parse_numbers(value, line_no, vcol)?),
                "sample_length_m" => length = parse_one(value, line_no, vcol)?,
                "gradient_max_khz" => gmax_khz = parse_one(value, line_no, vcol)?,
                other => return Err(ParseError::new(line_no, col, format!("unknown key `{other}`"))),
            }
            continue;
        }
        if in_table {
            let row = parse_numbers(trimmed, line_no, col)?;
            j_rows.as_mut().unwrap().push(row);
            continue;
        }
        return Err(ParseError::new(line_no, col, format!("expected `key = value`, got `{trimmed}`")));
    }

    let end = last_line + 1;
    let q = qubits.ok_or_else(|| ParseError::new(end, 1, "missing field `qubits`"))?;
    let offsets_hz = offsets_hz.ok_or_else(|| ParseError::new(end, 1, "missing field `offsets_hz`"))?;
    if offsets_hz.len() != q {
        return Err(ParseError::new(end, 1, format!("offsets_hz has {} entries for {q} qubits", offsets_hz.len())));
    }
    let gamma_rel = gamma_rel.unwrap_or_else(|| vec![1.0; q]);
    if gamma_rel.len() != q {
        return Err(ParseError::new(end, 1, format!("gamma_rel has {} entries for {q} qubits", gamma_rel.len())));
    }
    let rows = j_rows.unwrap_or_default();
    let mut couplings = vec![vec![0.0; q]; q];
    let expected_rows = q.saturating_sub(1);
    if rows.len() != expected_rows {
        return Err(ParseError::new(end, 1, format!("J_hz table needs {expected_rows} rows, found {}", rows.len())));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != q - 1 - k {
            return Err(ParseError::new(
                end,
                1,
                format!("J_hz row {} needs {} entries, found {}", k + 1, q - 1 - k, row.len()),
            ));
        }
        for (off, &j) in row.iter().enumerate() {
            let n = k + 1 + off;
            couplings[k][n] = j;
            couplings[n][k] = j;
        }
    }
    let offsets = offsets_hz.iter().map(|f| 2.0 * PI * f).collect();
    let gammas = gamma_rel.iter().map(|r| r * GAMMA_13C).collect();
    let sys = SpinSystem::new(label, offsets, couplings, gammas)
        .and_then(|s| s.with_gradient_calibration(length, gmax_khz))
        .map_err(|e| ParseError::new(end, 1, e.to_string()))?;
    Ok(sys)
}

fn parse_one(value: &str, line: usize, col: usize) -> std::result::Result<f64, ParseError> {
    value
        .parse::<f64>()
        .map_err(|_| ParseError::new(line, col, format!("malformed number `{value}`")))
}

fn parse_numbers(value: &str, line: usize, col: usize) -> std::result::Result<Vec<f64>, ParseError> {
    value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_one(t, line, col))
        .collect()
}

/// Diagonal of the drift Hamiltonian
/// `sum_k off_k sz_k/2 + sum_{k != n} pi J_kn sz_k sz_n / 4`.
fn h0_diagonal(sys: &SpinSystem) -> Vec<f64> {
    let q = sys.qubits();
    (0..sys.dim())
        .map(|i| {
            let mut e = 0.0;
            for k in 0..q {
                let zk = linalg::z_sign(i, k, q);
                e += sys.offsets[k] * zk / 2.0;
                for n in (k + 1)..q {
                    // ordered pairs (k,n) and (n,k) each carry pi J / 4
                    e += PI * sys.couplings[k][n] * zk * linalg::z_sign(i, n, q) / 2.0;
                }
            }
            e
        })
        .collect()
}

fn real_diag(values: impl IntoIterator<Item = f64>) -> Operator {
    let v: Vec<C64> = values.into_iter().map(|x| C64::new(x, 0.0)).collect();
    Operator::Diagonal(CVec::from_vec(v))
}

pub fn build_h0(sys: &SpinSystem) -> Operator {
    real_diag(h0_diagonal(sys))
}

/// Gradient Hamiltonian `sum_k gamma_k g z sz_k / 2` for amplitude `g` (T/m)
/// at position `z` (m).
pub fn build_hg(sys: &SpinSystem, g: f64, z: f64) -> Operator {
    let q = sys.qubits();
    real_diag((0..sys.dim()).map(|i| {
        (0..q).map(|k| sys.gammas[k] * g * z * linalg::z_sign(i, k, q) / 2.0).sum::<f64>()
    }))
}

/// Control Hamiltonian `omega sum_{k in mask} (cos(phi) sx_k + sin(phi) sy_k) / 2`.
pub fn build_hc(sys: &SpinSystem, omega: f64, phi: f64, mask: SpinMask) -> Operator {
    let q = sys.qubits();
    let n = sys.dim();
    let mut h = CMat::zeros(n, n);
    if omega != 0.0 {
        let up = C64::from_polar(omega / 2.0, phi);
        for i in 0..n {
            for k in mask.spins(q) {
                let flip = 1usize << (q - 1 - k);
                let j = i ^ flip;
                // <j|(cos sx + sin sy)|i> is e^{+i phi} when spin k goes 0 -> 1
                h[(j, i)] += if i & flip == 0 { up } else { up.conj() };
            }
        }
    }
    Operator::Dense(h)
}

/// `H0 + Hg(g, z) + Hc(omega, phi)`; diagonal when `omega == 0`.
pub fn build_ht(sys: &SpinSystem, omega: f64, phi: f64, mask: SpinMask, g: f64, z: f64) -> Operator {
    let drift = build_h0(sys).add(&build_hg(sys, g, z));
    if omega == 0.0 || mask.is_empty() {
        drift
    } else {
        drift.add(&build_hc(sys, omega, phi, mask))
    }
}

impl std::fmt::Display for SpinSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} spins)", self.label, self.qubits())
    }
}
