//! Pulse-sequence data model, line-based text format and schedule sampler.
//!
//! The grammar is documented in `docs/formats.md`. One element per line:
//!
//! ```text
//! # comment
//! scanset s=1
//! rot theta=90deg phi=0 targets=odd
//! delay 3.459ms
//! grad shape=halfsine amp=0.5 tau=1ms guard=200us
//! pulsegrad theta=90deg phi=0 targets=all shape=const amp=0.02 tau=500us guard=0
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, ParseError, Result};
use crate::spinsys::{SpinMask, SpinSystem};

/// Default hardware guard delay before and after each gradient, s.
pub const DEFAULT_GUARD: f64 = 200e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Const,
    /// `sin(pi t'/tau)` over the active window.
    HalfSine,
    /// Piecewise-constant envelope over equal slots of the active window.
    Sampled(Vec<f64>),
}

impl ShapeKind {
    fn name(&self) -> &'static str {
        match self {
            ShapeKind::Const => "const",
            ShapeKind::HalfSine => "halfsine",
            ShapeKind::Sampled(_) => "sampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientShape {
    pub kind: ShapeKind,
    /// Peak amplitude as a fraction of the hardware maximum G.
    pub amp: f64,
    /// Active duration, s.
    pub tau: f64,
    /// Delay before and after the active window, s.
    pub guard: f64,
}

impl GradientShape {
    pub fn new(kind: ShapeKind, amp: f64, tau: f64) -> Result<Self> {
        Self::with_guard(kind, amp, tau, DEFAULT_GUARD)
    }

    pub fn with_guard(kind: ShapeKind, amp: f64, tau: f64, guard: f64) -> Result<Self> {
        let shape = Self { kind, amp, tau, guard };
        shape.validate().map_err(Error::InvalidInput)?;
        Ok(shape)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(format!("gradient duration must be positive, got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.amp) {
            return Err(format!("gradient amplitude must lie in [0, 1], got {}", self.amp));
        }
        if !(self.guard >= 0.0) || !self.guard.is_finite() {
            return Err(format!("guard delay must be non-negative, got {}", self.guard));
        }
        if let ShapeKind::Sampled(v) = &self.kind {
            if v.is_empty() {
                return Err("sampled gradient needs at least one sample".into());
            }
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err("sampled gradient values must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    /// Normalized envelope at time `t` into the active window.
    pub fn envelope(&self, t: f64) -> f64 {
        match &self.kind {
            ShapeKind::Const => 1.0,
            ShapeKind::HalfSine => (PI * t / self.tau).sin(),
            ShapeKind::Sampled(v) => {
                let slot = ((t / self.tau) * v.len() as f64).floor() as isize;
                v[slot.clamp(0, v.len() as isize - 1) as usize]
            }
        }
    }

    /// `∫ envelope dt` over the active window, s.
    pub fn envelope_integral(&self) -> f64 {
        match &self.kind {
            ShapeKind::Const => self.tau,
            ShapeKind::HalfSine => 2.0 * self.tau / PI,
            ShapeKind::Sampled(v) => self.tau * v.iter().sum::<f64>() / v.len() as f64,
        }
    }

    /// Gradient area `∫ g dt` in T·s/m.
    pub fn area(&self, sys: &SpinSystem) -> f64 {
        self.amp * sys.gradient_max() * self.envelope_integral()
    }

    /// Dimensionless dephasing `gamma L ∫ g dt` for spin 0.
    pub fn kappa(&self, sys: &SpinSystem) -> f64 {
        sys.kappa_for_area(0, self.area(sys))
    }

    /// Amplitude fraction that gives dephasing `kappa` on spin 0.
    pub fn amp_for_kappa(sys: &SpinSystem, kind: &ShapeKind, tau: f64, kappa: f64) -> f64 {
        let probe = GradientShape { kind: kind.clone(), amp: 1.0, tau, guard: 0.0 };
        kappa / probe.kappa(sys)
    }

    pub fn duration(&self) -> f64 {
        self.tau + 2.0 * self.guard
    }

    pub fn is_const(&self) -> bool {
        matches!(self.kind, ShapeKind::Const)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Targets {
    All,
    Odd,
    Even,
    /// 1-based spin numbers.
    Spins(Vec<usize>),
}

impl Targets {
    pub fn mask(&self, qubits: usize) -> SpinMask {
        match self {
            Targets::All => SpinMask::all(qubits),
            // spins 1, 3, ... in 1-based numbering
            Targets::Odd => SpinMask::from_spins(&(0..qubits).step_by(2).collect::<Vec<_>>()),
            Targets::Even => SpinMask::from_spins(&(1..qubits).step_by(2).collect::<Vec<_>>()),
            Targets::Spins(s) => SpinMask::from_spins(
                &s.iter().filter(|&&k| k >= 1 && k <= qubits).map(|k| k - 1).collect::<Vec<_>>(),
            ),
        }
    }
}

/// Rotation by `angle` about `cos(phase) x + sin(phase) y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub angle: f64,
    pub phase: f64,
    pub targets: Targets,
    /// Zero for an ideal (instantaneous) rotation; otherwise a square pulse
    /// of amplitude `angle / duration`.
    pub duration: f64,
}

impl Rotation {
    pub fn ideal(angle: f64, phase: f64, targets: Targets) -> Self {
        Self { angle, phase, targets, duration: 0.0 }
    }

    pub fn is_ideal(&self) -> bool {
        self.duration == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceElement {
    Rotation(Rotation),
    Delay(f64),
    Gradient(GradientShape),
    /// Rotation spread over the gradient's active window (`duration` is
    /// ignored and taken from `shape.tau`).
    PulseWithGradient { rotation: Rotation, shape: GradientShape },
}

impl SequenceElement {
    pub fn duration(&self) -> f64 {
        match self {
            SequenceElement::Rotation(r) => r.duration,
            SequenceElement::Delay(t) => *t,
            SequenceElement::Gradient(s) => s.duration(),
            SequenceElement::PulseWithGradient { shape, .. } => shape.duration(),
        }
    }

    fn kind_tag(&self) -> u8 {
        match self {
            SequenceElement::Rotation(_) => 0,
            SequenceElement::Delay(_) => 1,
            SequenceElement::Gradient(_) => 2,
            SequenceElement::PulseWithGradient { .. } => 3,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match self {
            SequenceElement::Rotation(r) => validate_rotation(r),
            SequenceElement::Delay(t) => {
                if !(*t >= 0.0) || !t.is_finite() {
                    Err(format!("negative or non-finite delay {t}"))
                } else {
                    Ok(())
                }
            }
            SequenceElement::Gradient(s) => s.validate(),
            SequenceElement::PulseWithGradient { rotation, shape } => {
                validate_rotation(rotation)?;
                shape.validate()
            }
        }
    }
}

fn validate_rotation(r: &Rotation) -> std::result::Result<(), String> {
    if !r.angle.is_finite() || !r.phase.is_finite() {
        return Err("rotation angle and phase must be finite".into());
    }
    if !(r.duration >= 0.0) || !r.duration.is_finite() {
        return Err(format!("negative rotation duration {}", r.duration));
    }
    Ok(())
}

/// One or more scans; every scan has the same element layout and differs
/// only in parameters. Multi-scan results are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    scans: Vec<Vec<SequenceElement>>,
}

impl Sequence {
    pub fn single(elements: Vec<SequenceElement>) -> Result<Self> {
        Self::multi(vec![elements])
    }

    pub fn multi(scans: Vec<Vec<SequenceElement>>) -> Result<Self> {
        if scans.is_empty() || scans[0].is_empty() {
            return Err(Error::invalid("sequence must contain at least one element"));
        }
        let layout: Vec<u8> = scans[0].iter().map(SequenceElement::kind_tag).collect();
        for (s, scan) in scans.iter().enumerate() {
            let other: Vec<u8> = scan.iter().map(SequenceElement::kind_tag).collect();
            if other != layout {
                return Err(Error::invalid(format!("scan {} layout differs from scan 1", s + 1)));
            }
            for e in scan {
                e.validate().map_err(Error::InvalidInput)?;
            }
        }
        Ok(Self { scans })
    }

    pub fn scan_count(&self) -> usize {
        self.scans.len()
    }

    pub fn scans(&self) -> &[Vec<SequenceElement>] {
        &self.scans
    }

    /// Elements of the first scan.
    pub fn elements(&self) -> &[SequenceElement] {
        &self.scans[0]
    }

    /// Duration of one scan, s.
    pub fn duration(&self) -> f64 {
        self.scans[0].iter().map(SequenceElement::duration).sum()
    }

    /// Longest scan duration, s.
    pub fn max_scan_duration(&self) -> f64 {
        self.scans
            .iter()
            .map(|s| s.iter().map(SequenceElement::duration).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Text format

struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], col: line[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], col: line[..s].chars().count() + 1 });
    }
    out
}

fn split_number(text: &str) -> (&str, &str) {
    let mut end = 0;
    let bytes = text.as_bytes();
    while end < bytes.len() {
        let c = bytes[end] as char;
        let exp_sign = (c == '+' || c == '-') && end > 0 && matches!(bytes[end - 1] as char, 'e' | 'E');
        let exp = (c == 'e' || c == 'E') && end > 0 && bytes.get(end + 1).is_some_and(|&b| {
            (b as char).is_ascii_digit() || b == b'-' || b == b'+'
        });
        if c.is_ascii_digit() || c == '.' || exp || exp_sign || (end == 0 && (c == '-' || c == '+')) {
            end += 1;
        } else {
            break;
        }
    }
    (&text[..end], &text[end..])
}

fn parse_number(text: &str, line: usize, col: usize) -> std::result::Result<f64, ParseError> {
    text.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseError::new(line, col, format!("malformed number `{text}`")))
}

fn parse_angle(text: &str, line: usize, col: usize) -> std::result::Result<f64, ParseError> {
    let (num, unit) = split_number(text);
    let x = parse_number(num, line, col)?;
    match unit {
        "" | "rad" => Ok(x),
        "deg" | "°" => Ok(x.to_radians()),
        other => Err(ParseError::new(line, col, format!("unknown angle unit `{other}`"))),
    }
}

fn parse_duration(text: &str, line: usize, col: usize) -> std::result::Result<f64, ParseError> {
    let (num, unit) = split_number(text);
    let shift: i32 = match unit {
        "" | "s" => 0,
        "ms" => -3,
        "us" | "µs" | "μs" => -6,
        "ns" => -9,
        other => return Err(ParseError::new(line, col, format!("unknown time unit `{other}`"))),
    };
    // shift the decimal exponent textually so `3.459ms` parses to the same
    // double as `3.459e-3`
    let (mantissa, exp) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().ok()),
        None => (num, Some(0)),
    };
    let exp = exp.ok_or_else(|| ParseError::new(line, col, format!("malformed number `{num}`")))?;
    parse_number(mantissa, line, col)?;
    let t = parse_number(&format!("{mantissa}e{}", exp + shift), line, col)?;
    if t < 0.0 || mantissa.starts_with('-') {
        return Err(ParseError::new(line, col, format!("negative duration `{text}`")));
    }
    Ok(t)
}

fn parse_targets(text: &str, line: usize, col: usize) -> std::result::Result<Targets, ParseError> {
    match text {
        "all" => Ok(Targets::All),
        "odd" => Ok(Targets::Odd),
        "even" => Ok(Targets::Even),
        list => {
            let spins = list
                .split(',')
                .map(|s| {
                    s.parse::<usize>()
                        .ok()
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| ParseError::new(line, col, format!("bad spin number `{s}` in targets")))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(Targets::Spins(spins))
        }
    }
}

/// `key=value` fields of one element line.
struct Fields<'a> {
    line: usize,
    keyword_col: usize,
    keyword: &'a str,
    items: Vec<(&'a str, &'a str, usize)>,
}

impl<'a> Fields<'a> {
    fn new(line: usize, keyword: &Token<'a>, rest: &[Token<'a>]) -> std::result::Result<Self, ParseError> {
        let mut items = Vec::new();
        for t in rest {
            let (k, v) = t
                .text
                .split_once('=')
                .ok_or_else(|| ParseError::new(line, t.col, format!("expected `key=value`, got `{}`", t.text)))?;
            let k = match k {
                "θ" => "theta",
                "φ" => "phi",
                other => other,
            };
            if items.iter().any(|(key, _, _)| *key == k) {
                return Err(ParseError::new(line, t.col, format!("duplicate field `{k}`")));
            }
            let vcol = t.col + k.chars().count() + 1;
            items.push((k, v, vcol));
        }
        Ok(Self { line, keyword_col: keyword.col, keyword: keyword.text, items })
    }

    fn take(&mut self, key: &str) -> Option<(&'a str, usize)> {
        let pos = self.items.iter().position(|(k, _, _)| *k == key)?;
        let (_, v, c) = self.items.remove(pos);
        Some((v, c))
    }

    fn require(&mut self, key: &str) -> std::result::Result<(&'a str, usize), ParseError> {
        self.take(key).ok_or_else(|| {
            ParseError::new(self.line, self.keyword_col, format!("`{}` is missing field `{key}`", self.keyword))
        })
    }

    fn finish(self) -> std::result::Result<(), ParseError> {
        match self.items.first() {
            Some((k, _, c)) => {
                Err(ParseError::new(self.line, c - k.chars().count() - 1, format!("unknown field `{k}` for `{}`", self.keyword)))
            }
            None => Ok(()),
        }
    }
}

fn parse_rotation_fields(f: &mut Fields<'_>) -> std::result::Result<Rotation, ParseError> {
    let line = f.line;
    let (theta, c) = f.require("theta")?;
    let angle = parse_angle(theta, line, c)?;
    let (phi, c) = f.require("phi")?;
    let phase = parse_angle(phi, line, c)?;
    let targets = match f.take("targets") {
        Some((t, c)) => parse_targets(t, line, c)?,
        None => Targets::All,
    };
    Ok(Rotation { angle, phase, targets, duration: 0.0 })
}

fn parse_shape_fields(f: &mut Fields<'_>) -> std::result::Result<GradientShape, ParseError> {
    let line = f.line;
    let (shape, shape_col) = f.require("shape")?;
    let kind = match shape {
        "const" => ShapeKind::Const,
        "halfsine" => ShapeKind::HalfSine,
        "sampled" => {
            let (list, c) = f.require("samples")?;
            let v = list
                .split(',')
                .map(|s| parse_number(s, line, c))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            ShapeKind::Sampled(v)
        }
        other => return Err(ParseError::new(line, shape_col, format!("unknown gradient shape `{other}`"))),
    };
    let (amp, amp_col) = f.require("amp")?;
    let amp = parse_number(amp, line, amp_col)?;
    let (tau, tau_col) = f.require("tau")?;
    let tau = parse_duration(tau, line, tau_col)?;
    let guard = match f.take("guard") {
        Some((g, c)) => parse_duration(g, line, c)?,
        None => DEFAULT_GUARD,
    };
    let s = GradientShape { kind, amp, tau, guard };
    s.validate().map_err(|m| ParseError::new(line, shape_col, m))?;
    Ok(s)
}

pub fn read_sequence(path: impl AsRef<std::path::Path>) -> Result<Sequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(parse_sequence(&text)?)
}

/// Parse the text format into a [`Sequence`].
pub fn parse_sequence(text: &str) -> std::result::Result<Sequence, ParseError> {
    let mut scans: Vec<Vec<SequenceElement>> = Vec::new();
    let mut current: Vec<SequenceElement> = Vec::new();
    let mut in_scanset = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let body = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(body);
        let Some((head, rest)) = tokens.split_first() else { continue };

        let element = match head.text {
            "scanset" => {
                let mut f = Fields::new(line, head, rest)?;
                let (s, c) = f.require("s")?;
                let s: usize = s.parse().map_err(|_| ParseError::new(line, c, format!("malformed scan index `{s}`")))?;
                f.finish()?;
                if in_scanset {
                    scans.push(std::mem::take(&mut current));
                } else if !current.is_empty() {
                    return Err(ParseError::new(line, head.col, "elements before the first `scanset`"));
                }
                if s != scans.len() + 1 {
                    return Err(ParseError::new(line, c, format!("expected scan index {}, got {s}", scans.len() + 1)));
                }
                in_scanset = true;
                continue;
            }
            "rot" => {
                let mut f = Fields::new(line, head, rest)?;
                let mut r = parse_rotation_fields(&mut f)?;
                if let Some((d, c)) = f.take("dur") {
                    r.duration = parse_duration(d, line, c)?;
                }
                f.finish()?;
                SequenceElement::Rotation(r)
            }
            "delay" => {
                if rest.len() != 1 {
                    return Err(ParseError::new(line, head.col, "`delay` takes exactly one duration"));
                }
                SequenceElement::Delay(parse_duration(rest[0].text, line, rest[0].col)?)
            }
            "grad" => {
                let mut f = Fields::new(line, head, rest)?;
                let s = parse_shape_fields(&mut f)?;
                f.finish()?;
                SequenceElement::Gradient(s)
            }
            "pulsegrad" => {
                let mut f = Fields::new(line, head, rest)?;
                let mut rotation = parse_rotation_fields(&mut f)?;
                let shape = parse_shape_fields(&mut f)?;
                f.finish()?;
                rotation.duration = shape.tau;
                SequenceElement::PulseWithGradient { rotation, shape }
            }
            other => return Err(ParseError::new(line, head.col, format!("unknown keyword `{other}`"))),
        };
        current.push(element);
    }
    scans.push(current);
    if scans.iter().any(|s| s.is_empty()) {
        return Err(ParseError::new(last_line.max(1), 1, "sequence (or one of its scans) is empty"));
    }
    Sequence::multi(scans).map_err(|e| ParseError::new(last_line.max(1), 1, e.to_string()))
}

fn write_rotation_fields(out: &mut String, r: &Rotation) {
    let _ = write!(out, " theta={}rad phi={}rad targets=", r.angle, r.phase);
    match &r.targets {
        Targets::All => out.push_str("all"),
        Targets::Odd => out.push_str("odd"),
        Targets::Even => out.push_str("even"),
        Targets::Spins(s) => {
            let list: Vec<String> = s.iter().map(|k| k.to_string()).collect();
            out.push_str(&list.join(","));
        }
    }
}

fn write_shape_fields(out: &mut String, s: &GradientShape) {
    let _ = write!(out, " shape={}", s.kind.name());
    if let ShapeKind::Sampled(v) = &s.kind {
        let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = write!(out, " samples={}", list.join(","));
    }
    let _ = write!(out, " amp={} tau={}s guard={}s", s.amp, s.tau, s.guard);
}

fn write_element(out: &mut String, e: &SequenceElement) {
    match e {
        SequenceElement::Rotation(r) => {
            out.push_str("rot");
            write_rotation_fields(out, r);
            if r.duration > 0.0 {
                let _ = write!(out, " dur={}s", r.duration);
            }
        }
        SequenceElement::Delay(t) => {
            let _ = write!(out, "delay {t}s");
        }
        SequenceElement::Gradient(s) => {
            out.push_str("grad");
            write_shape_fields(out, s);
        }
        SequenceElement::PulseWithGradient { rotation, shape } => {
            out.push_str("pulsegrad");
            write_rotation_fields(out, rotation);
            write_shape_fields(out, shape);
        }
    }
    out.push('\n');
}

/// Render a sequence in the text format; `parse_sequence` inverts it exactly.
pub fn serialize_sequence(seq: &Sequence) -> String {
    let mut out = String::new();
    let multi = seq.scan_count() > 1;
    for (s, scan) in seq.scans().iter().enumerate() {
        if multi {
            let _ = writeln!(out, "scanset s={}", s + 1);
        }
        for e in scan {
            write_element(&mut out, e);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Schedules

/// One piecewise-constant interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// s, > 0.
    pub dt: f64,
    /// Pulse amplitude, rad/s.
    pub omega: f64,
    /// Pulse phase, rad.
    pub phi: f64,
    /// Gradient amplitude, T/m.
    pub g: f64,
    pub mask: SpinMask,
    /// Time-independent, pulse-free interval covering a whole constant gradient.
    pub is_static: bool,
}

impl Sample {
    pub fn is_pulse_free(&self) -> bool {
        self.omega == 0.0 || self.mask.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    pub samples: Vec<Sample>,
}

impl Schedule {
    pub fn duration(&self) -> f64 {
        self.samples.iter().map(|s| s.dt).sum()
    }

    pub fn is_pulse_free(&self) -> bool {
        self.samples.iter().all(Sample::is_pulse_free)
    }

    pub fn is_static(&self) -> bool {
        self.samples.len() == 1 && self.samples[0].is_static
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn extend(&mut self, other: Schedule) {
        self.samples.extend(other.samples);
    }
}

/// Split `[0, total)` into steps of `dt`, shortening the last one.
/// Yields `(length, midpoint)`.
fn slices(total: f64, dt: f64) -> Vec<(f64, f64)> {
    if total <= 0.0 {
        return Vec::new();
    }
    let n = ((total / dt) - 1e-9).ceil().max(1.0) as usize;
    (0..n)
        .map(|k| {
            let start = k as f64 * dt;
            let len = if k + 1 == n { total - start } else { dt };
            (len, start + len / 2.0)
        })
        .collect()
}

fn free_samples(total: f64, dt: f64) -> impl Iterator<Item = Sample> {
    slices(total, dt).into_iter().map(|(len, _)| Sample {
        dt: len,
        omega: 0.0,
        phi: 0.0,
        g: 0.0,
        mask: SpinMask(0),
        is_static: false,
    })
}

/// Sample one element with step `dt`. `gradient_max` converts amplitude
/// fractions to T/m. Ideal rotations have no schedule and are rejected.
pub fn sample_element(element: &SequenceElement, dt: f64, gradient_max: f64, qubits: usize) -> Result<Schedule> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let mut samples = Vec::new();
    match element {
        SequenceElement::Delay(t) => samples.extend(free_samples(*t, dt)),
        SequenceElement::Rotation(r) => {
            if r.is_ideal() {
                return Err(Error::invalid("ideal rotations have no time schedule"));
            }
            let omega = r.angle / r.duration;
            let mask = r.targets.mask(qubits);
            for (len, _) in slices(r.duration, dt) {
                samples.push(Sample { dt: len, omega, phi: r.phase, g: 0.0, mask, is_static: false });
            }
        }
        SequenceElement::Gradient(s) => {
            samples.extend(free_samples(s.guard, dt));
            let g = s.amp * gradient_max;
            if s.is_const() {
                samples.push(Sample { dt: s.tau, omega: 0.0, phi: 0.0, g, mask: SpinMask(0), is_static: true });
            } else {
                for (len, mid) in slices(s.tau, dt) {
                    samples.push(Sample {
                        dt: len,
                        omega: 0.0,
                        phi: 0.0,
                        g: g * s.envelope(mid),
                        mask: SpinMask(0),
                        is_static: false,
                    });
                }
            }
            samples.extend(free_samples(s.guard, dt));
        }
        SequenceElement::PulseWithGradient { rotation, shape } => {
            samples.extend(free_samples(shape.guard, dt));
            let omega = rotation.angle / shape.tau;
            let mask = rotation.targets.mask(qubits);
            let g = shape.amp * gradient_max;
            for (len, mid) in slices(shape.tau, dt) {
                samples.push(Sample { dt: len, omega, phi: rotation.phase, g: g * shape.envelope(mid), mask, is_static: false });
            }
            samples.extend(free_samples(shape.guard, dt));
        }
    }
    Ok(Schedule { samples })
}

/// Sample a whole list of elements (one scan).
pub fn sample_schedule(elements: &[SequenceElement], dt: f64, gradient_max: f64, qubits: usize) -> Result<Schedule> {
    let mut out = Schedule::default();
    for e in elements {
        out.extend(sample_element(e, dt, gradient_max, qubits)?);
    }
    Ok(out)
}
