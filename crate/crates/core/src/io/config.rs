//! Experiment configuration files.
//!
//! The format is TOML with a fixed schema:
//!
//! ```toml
//! [device]
//! resonance = "4.2 GHz"      # ω₀/2π
//! linewidth = "112 MHz"      # γ/2π
//!
//! [grid]
//! center = "4.2 GHz"         # Ω₀/4π
//! spacing = "0.1 MHz"        # Δ/2π
//! half_span = 47
//!
//! [[tone]]
//! offset = -4                # Ω = 2·center + offset·Δ
//! coupling_ratio = 0.077     # ω₀|g|/γ; or `amplitude = A`
//! phase_deg = 0.0            # or `phase_rad`
//! label = -1                 # optional, defaults to offset / gcd(offsets)
//!
//! [run]
//! threshold_db = -20.0
//! signal_index = 28
//! sweep_tone = 1             # tone label
//! steps = 72
//! seed = 1
//! samples = 100000
//!
//! [run.fit]
//! g_min = 1.0e-3
//! g_max = 3.0e-3
//! gamma_min = "90 MHz"
//! gamma_max = "140 MHz"
//! grid_points = 40
//!
//! [run.search]
//! points = 8
//! tones = [1]                # tone labels
//! ```
//!
//! Frequencies are strings with a mandatory `Hz`, `kHz`, `MHz` or `GHz`
//! tag. Unknown keys are errors. Validation reports every problem found,
//! each with its line number.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::ops::Range;

use sha2::{Digest, Sha256};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::error::{ConfigErrors, ConfigIssue};
use crate::model::{DeviceParams, ModeGrid, PumpScheme, PumpTone};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    fn scale(self) -> f64 {
        match self {
            FrequencyUnit::Hz => 1.0,
            FrequencyUnit::KHz => 1e3,
            FrequencyUnit::MHz => 1e6,
            FrequencyUnit::GHz => 1e9,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            FrequencyUnit::Hz => "Hz",
            FrequencyUnit::KHz => "kHz",
            FrequencyUnit::MHz => "MHz",
            FrequencyUnit::GHz => "GHz",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "Hz" => Some(FrequencyUnit::Hz),
            "kHz" => Some(FrequencyUnit::KHz),
            "MHz" => Some(FrequencyUnit::MHz),
            "GHz" => Some(FrequencyUnit::GHz),
            _ => None,
        }
    }
}

/// Cyclic frequency exactly as written, e.g. `0.1 MHz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub value: f64,
    pub unit: FrequencyUnit,
}

impl Frequency {
    pub fn new(value: f64, unit: FrequencyUnit) -> Self {
        Self { value, unit }
    }

    /// Parse `"<number> <unit>"`; the space is optional.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let split = text
            .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
            .or_else(|| {
                // a number ending in e/E is not valid anyway; look for the unit suffix
                ["GHz", "MHz", "kHz", "Hz"]
                    .iter()
                    .find_map(|u| text.strip_suffix(u).map(|rest| rest.len()))
            });
        let Some(split) = split else {
            return Err("missing unit tag (Hz, kHz, MHz or GHz)".into());
        };
        let (number, unit) = text.split_at(split);
        let unit = FrequencyUnit::from_tag(unit.trim())
            .ok_or_else(|| format!("unknown unit '{}'", unit.trim()))?;
        let value: f64 = number
            .trim()
            .parse()
            .map_err(|_| format!("'{}' is not a number", number.trim()))?;
        if !value.is_finite() {
            return Err("frequency must be finite".into());
        }
        Ok(Self { value, unit })
    }

    pub fn hertz(&self) -> f64 {
        self.value * self.unit.scale()
    }

    /// Angular frequency in rad/s.
    pub fn angular(&self) -> f64 {
        TAU * self.hertz()
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} {}", self.value, self.unit.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Degrees(f64),
    Radians(f64),
}

impl Angle {
    pub fn radians(&self) -> f64 {
        match *self {
            Angle::Degrees(d) => d * PI / 180.0,
            Angle::Radians(r) => r,
        }
    }

    /// Parse a CLI angle such as `180deg`, `-90deg`, `3.14rad` or `1.5`
    /// (bare numbers are radians).
    pub fn parse_suffixed(text: &str) -> std::result::Result<Self, String> {
        let t = text.trim();
        let (number, make): (&str, fn(f64) -> Angle) = if let Some(n) = t.strip_suffix("deg") {
            (n, Angle::Degrees)
        } else if let Some(n) = t.strip_suffix("rad") {
            (n, Angle::Radians)
        } else {
            (t, Angle::Radians)
        };
        let v: f64 = number
            .trim()
            .parse()
            .map_err(|_| format!("'{text}' is not an angle (use e.g. 180deg or 3.14rad)"))?;
        if !v.is_finite() {
            return Err("angle must be finite".into());
        }
        Ok(make(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    /// Dimensionless `A_k`.
    Amplitude(f64),
    /// `ω₀|g_k|/γ`.
    CouplingRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSpec {
    pub resonance: Frequency,
    pub linewidth: Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub center: Frequency,
    pub spacing: Frequency,
    pub half_span: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec {
    pub offset: i64,
    pub strength: Strength,
    pub phase: Angle,
    pub label: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSpec {
    pub g_min: f64,
    pub g_max: f64,
    pub gamma_min: Frequency,
    pub gamma_max: Frequency,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    pub points: usize,
    pub tones: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSpec {
    pub threshold_db: Option<f64>,
    pub signal_index: Option<i64>,
    pub sweep_tone: Option<i64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub fit: Option<FitSpec>,
    pub search: Option<SearchSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub device: DeviceSpec,
    pub grid: GridSpec,
    pub tones: Vec<ToneSpec>,
    pub run: RunSpec,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl ExperimentConfig {
    pub fn device_params(&self) -> Result<DeviceParams> {
        DeviceParams::new(self.device.resonance.angular(), self.device.linewidth.angular())
    }

    pub fn mode_grid(&self) -> Result<ModeGrid> {
        ModeGrid::new(
            self.grid.center.angular(),
            self.grid.spacing.angular(),
            self.grid.half_span,
        )
    }

    pub fn scheme(&self) -> Result<PumpScheme> {
        let params = self.device_params()?;
        let tones = self
            .tones
            .iter()
            .map(|t| {
                let amplitude = match t.strength {
                    Strength::Amplitude(a) => a,
                    Strength::CouplingRatio(r) => 2.0 * params.strength_for_ratio(r),
                };
                PumpTone::new(t.offset, amplitude, t.phase.radians())
            })
            .collect::<Result<Vec<_>>>()?;
        PumpScheme::new(tones)
    }

    /// Tone labels: explicit ones, otherwise `offset / gcd` of all offsets.
    pub fn tone_labels(&self) -> Vec<i64> {
        let g = self
            .tones
            .iter()
            .map(|t| t.offset)
            .fold(0, gcd);
        self.tones
            .iter()
            .map(|t| t.label.unwrap_or(if g == 0 { 0 } else { t.offset / g }))
            .collect()
    }

    /// Position of the tone with the given label.
    pub fn tone_index(&self, label: i64) -> Result<usize> {
        self.tone_labels()
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no tone labeled {label}; labels are {:?}",
                    self.tone_labels()
                ))
            })
    }

    /// Canonical TOML text. Parsing it yields an equal configuration.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[device]");
        let _ = writeln!(s, "resonance = \"{}\"", self.device.resonance);
        let _ = writeln!(s, "linewidth = \"{}\"", self.device.linewidth);
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "center = \"{}\"", self.grid.center);
        let _ = writeln!(s, "spacing = \"{}\"", self.grid.spacing);
        let _ = writeln!(s, "half_span = {}", self.grid.half_span);
        for t in &self.tones {
            let _ = writeln!(s, "\n[[tone]]");
            let _ = writeln!(s, "offset = {}", t.offset);
            match t.strength {
                Strength::Amplitude(a) => {
                    let _ = writeln!(s, "amplitude = {a:?}");
                }
                Strength::CouplingRatio(r) => {
                    let _ = writeln!(s, "coupling_ratio = {r:?}");
                }
            }
            match t.phase {
                Angle::Degrees(d) => {
                    let _ = writeln!(s, "phase_deg = {d:?}");
                }
                Angle::Radians(r) => {
                    let _ = writeln!(s, "phase_rad = {r:?}");
                }
            }
            if let Some(l) = t.label {
                let _ = writeln!(s, "label = {l}");
            }
        }
        let r = &self.run;
        let _ = writeln!(s, "\n[run]");
        if let Some(v) = r.threshold_db {
            let _ = writeln!(s, "threshold_db = {v:?}");
        }
        if let Some(v) = r.signal_index {
            let _ = writeln!(s, "signal_index = {v}");
        }
        if let Some(v) = r.sweep_tone {
            let _ = writeln!(s, "sweep_tone = {v}");
        }
        if let Some(v) = r.steps {
            let _ = writeln!(s, "steps = {v}");
        }
        if let Some(v) = r.seed {
            let _ = writeln!(s, "seed = {v}");
        }
        if let Some(v) = r.samples {
            let _ = writeln!(s, "samples = {v}");
        }
        if let Some(f) = &r.fit {
            let _ = writeln!(s, "\n[run.fit]");
            let _ = writeln!(s, "g_min = {:?}", f.g_min);
            let _ = writeln!(s, "g_max = {:?}", f.g_max);
            let _ = writeln!(s, "gamma_min = \"{}\"", f.gamma_min);
            let _ = writeln!(s, "gamma_max = \"{}\"", f.gamma_max);
            let _ = writeln!(s, "grid_points = {}", f.grid_points);
        }
        if let Some(q) = &r.search {
            let _ = writeln!(s, "\n[run.search]");
            let _ = writeln!(s, "points = {}", q.points);
            let tones: Vec<String> = q.tones.iter().map(i64::to_string).collect();
            let _ = writeln!(s, "tones = [{}]", tones.join(", "));
        }
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_string().as_bytes()))
    }
}

struct Validator<'a> {
    text: &'a str,
    issues: Vec<ConfigIssue>,
}

type Table<'i> = DeTable<'i>;
type Value<'i> = Spanned<DeValue<'i>>;

impl<'a> Validator<'a> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn push(&mut self, span: Range<usize>, field: &str, message: impl Into<String>) {
        let line = self.line(span);
        self.issues.push(ConfigIssue {
            line,
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn check_keys(&mut self, table: &Table<'_>, allowed: &[&str], prefix: &str) {
        for (k, _) in table.iter() {
            if !allowed.contains(&k.get_ref().as_ref()) {
                let field = join(prefix, k.get_ref());
                self.push(k.span(), &field, "unknown key");
            }
        }
    }

    fn number(&mut self, v: &Value<'_>, field: &str) -> Option<f64> {
        let parsed = match v.get_ref() {
            DeValue::Integer(i) => parse_integer(i.as_str(), i.radix()).map(|x| x as f64),
            DeValue::Float(f) => f.as_str().replace('_', "").parse::<f64>().ok(),
            DeValue::String(_) => {
                self.push(v.span(), field, "expected a number, found a string");
                return None;
            }
            other => {
                self.push(v.span(), field, format!("expected a number, found {}", other.type_str()));
                return None;
            }
        };
        match parsed {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.push(v.span(), field, "number must be finite");
                None
            }
        }
    }

    fn integer(&mut self, v: &Value<'_>, field: &str, what: &str) -> Option<i64> {
        match v.get_ref() {
            DeValue::Integer(i) => match parse_integer(i.as_str(), i.radix()) {
                Some(x) => Some(x),
                None => {
                    self.push(v.span(), field, "integer out of range");
                    None
                }
            },
            _ => {
                self.push(v.span(), field, format!("{what} must be integer"));
                None
            }
        }
    }

    fn count(&mut self, v: &Value<'_>, field: &str) -> Option<u64> {
        let x = self.integer(v, field, field.rsplit('.').next().unwrap_or(field))?;
        if x < 0 {
            self.push(v.span(), field, "must be non-negative");
            return None;
        }
        Some(x as u64)
    }

    fn frequency(&mut self, v: &Value<'_>, field: &str, positive: bool) -> Option<Frequency> {
        match v.get_ref() {
            DeValue::String(s) => match Frequency::parse(s) {
                Ok(f) => {
                    if positive && f.value <= 0.0 {
                        self.push(v.span(), field, "must be positive");
                        None
                    } else {
                        Some(f)
                    }
                }
                Err(m) => {
                    self.push(v.span(), field, m);
                    None
                }
            },
            DeValue::Integer(_) | DeValue::Float(_) => {
                self.push(
                    v.span(),
                    field,
                    "missing unit tag; write e.g. \"4.2 GHz\"",
                );
                None
            }
            other => {
                self.push(v.span(), field, format!("expected a frequency string, found {}", other.type_str()));
                None
            }
        }
    }

    fn table<'t, 'i>(&mut self, v: &'t Value<'i>, field: &str) -> Option<&'t Table<'i>> {
        match v.get_ref() {
            DeValue::Table(t) => Some(t),
            other => {
                self.push(v.span(), field, format!("expected a table, found {}", other.type_str()));
                None
            }
        }
    }

    fn missing(&mut self, span: Range<usize>, field: &str) {
        self.push(span, field, "missing required key");
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn parse_integer(text: &str, radix: u32) -> Option<i64> {
    let clean = text.replace('_', "");
    let (neg, body) = match clean.strip_prefix('-') {
        Some(b) => (true, b.to_string()),
        None => (false, clean.trim_start_matches('+').to_string()),
    };
    let digits = if radix == 10 {
        body.as_str()
    } else {
        body.get(2..).unwrap_or("")
    };
    let v = i64::from_str_radix(digits, radix).ok()?;
    Some(if neg { -v } else { v })
}

fn get<'t, 'i>(table: &'t Table<'i>, key: &str) -> Option<&'t Value<'i>> {
    table.iter().find(|(k, _)| k.get_ref() == key).map(|(_, v)| v)
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let doc = match DeTable::parse(text) {
        Ok(d) => d,
        Err(e) => {
            let span = e.span().unwrap_or(0..0);
            let mut v = Validator {
                text,
                issues: Vec::new(),
            };
            v.push(span, "document", e.message().to_string());
            return Err(Error::Config(ConfigErrors(v.issues)));
        }
    };
    let mut v = Validator {
        text,
        issues: Vec::new(),
    };
    let root = doc.get_ref();
    let whole = doc.span();
    v.check_keys(root, &["device", "grid", "tone", "run"], "");

    let device = match get(root, "device").and_then(|d| v.table(d, "device")) {
        Some(t) => {
            v.check_keys(t, &["resonance", "linewidth"], "device");
            let r = match get(t, "resonance") {
                Some(x) => v.frequency(x, "device.resonance", true),
                None => {
                    v.missing(whole.clone(), "device.resonance");
                    None
                }
            };
            let l = match get(t, "linewidth") {
                Some(x) => v.frequency(x, "device.linewidth", true),
                None => {
                    v.missing(whole.clone(), "device.linewidth");
                    None
                }
            };
            r.zip(l).map(|(resonance, linewidth)| DeviceSpec {
                resonance,
                linewidth,
            })
        }
        None => {
            if get(root, "device").is_none() {
                v.missing(whole.clone(), "device");
            }
            None
        }
    };

    let grid = match get(root, "grid").and_then(|d| v.table(d, "grid")) {
        Some(t) => {
            v.check_keys(t, &["center", "spacing", "half_span"], "grid");
            let c = match get(t, "center") {
                Some(x) => v.frequency(x, "grid.center", false),
                None => {
                    v.missing(whole.clone(), "grid.center");
                    None
                }
            };
            let s = match get(t, "spacing") {
                Some(x) => v.frequency(x, "grid.spacing", true),
                None => {
                    v.missing(whole.clone(), "grid.spacing");
                    None
                }
            };
            let h = match get(t, "half_span") {
                Some(x) => v.count(x, "grid.half_span").and_then(|h| {
                    if h > u64::from(u32::MAX / 4) {
                        v.push(x.span(), "grid.half_span", "too large");
                        None
                    } else {
                        Some(h as u32)
                    }
                }),
                None => {
                    v.missing(whole.clone(), "grid.half_span");
                    None
                }
            };
            match (c, s, h) {
                (Some(center), Some(spacing), Some(half_span)) => Some(GridSpec {
                    center,
                    spacing,
                    half_span,
                }),
                _ => None,
            }
        }
        None => {
            if get(root, "grid").is_none() {
                v.missing(whole.clone(), "grid");
            }
            None
        }
    };

    let mut tones = Vec::new();
    let mut tones_ok = true;
    match get(root, "tone") {
        None => {
            v.push(whole.clone(), "tone", "at least one [[tone]] is required");
            tones_ok = false;
        }
        Some(val) => match val.get_ref() {
            DeValue::Array(items) => {
                let mut offsets = BTreeSet::new();
                let mut labels = BTreeSet::new();
                for (k, item) in items.iter().enumerate() {
                    let prefix = format!("tone[{k}]");
                    let Some(t) = v.table(item, &prefix) else {
                        tones_ok = false;
                        continue;
                    };
                    match parse_tone(&mut v, t, item.span(), &prefix) {
                        Some(spec) => {
                            if !offsets.insert(spec.offset) {
                                v.push(
                                    item.span(),
                                    &format!("{prefix}.offset"),
                                    format!("duplicate offset {}; merge the tones", spec.offset),
                                );
                                tones_ok = false;
                            }
                            if let Some(l) = spec.label {
                                if !labels.insert(l) {
                                    v.push(item.span(), &format!("{prefix}.label"), "duplicate label");
                                    tones_ok = false;
                                }
                            }
                            tones.push(spec);
                        }
                        None => tones_ok = false,
                    }
                }
                if items.is_empty() {
                    v.push(val.span(), "tone", "at least one [[tone]] is required");
                    tones_ok = false;
                }
            }
            other => {
                v.push(val.span(), "tone", format!("expected [[tone]] tables, found {}", other.type_str()));
                tones_ok = false;
            }
        },
    }

    let run = match get(root, "run").and_then(|r| v.table(r, "run")) {
        Some(t) => parse_run(&mut v, t),
        None => RunSpec::default(),
    };

    if v.issues.is_empty() && tones_ok {
        if let (Some(device), Some(grid)) = (device, grid) {
            let config = ExperimentConfig {
                device,
                grid,
                tones,
                run,
            };
            let labels = config.tone_labels();
            let unique: BTreeSet<i64> = labels.iter().copied().collect();
            if unique.len() != labels.len() {
                v.push(whole, "tone.label", "tone labels are not unique");
            } else {
                return Ok(config);
            }
        }
    }
    v.issues.sort_by_key(|i| i.line);
    Err(Error::Config(ConfigErrors(v.issues)))
}

fn parse_tone(
    v: &mut Validator<'_>,
    t: &Table<'_>,
    span: Range<usize>,
    prefix: &str,
) -> Option<ToneSpec> {
    v.check_keys(
        t,
        &["offset", "amplitude", "coupling_ratio", "phase_deg", "phase_rad", "label"],
        prefix,
    );
    let offset = match get(t, "offset") {
        Some(x) => v.integer(x, &join(prefix, "offset"), "offset"),
        None => {
            v.missing(span.clone(), &join(prefix, "offset"));
            None
        }
    };
    let strength = match (get(t, "amplitude"), get(t, "coupling_ratio")) {
        (Some(_), Some(b)) => {
            v.push(b.span(), &join(prefix, "coupling_ratio"), "give either amplitude or coupling_ratio, not both");
            None
        }
        (Some(a), None) => {
            let f = join(prefix, "amplitude");
            v.number(a, &f).and_then(|x| {
                if x < 0.0 {
                    v.push(a.span(), &f, "amplitude must be non-negative");
                    None
                } else {
                    Some(Strength::Amplitude(x))
                }
            })
        }
        (None, Some(r)) => {
            let f = join(prefix, "coupling_ratio");
            v.number(r, &f).and_then(|x| {
                if x < 0.0 {
                    v.push(r.span(), &f, "coupling_ratio must be non-negative");
                    None
                } else {
                    Some(Strength::CouplingRatio(x))
                }
            })
        }
        (None, None) => {
            v.push(span.clone(), &join(prefix, "amplitude"), "missing amplitude or coupling_ratio");
            None
        }
    };
    let phase = match (get(t, "phase_deg"), get(t, "phase_rad")) {
        (Some(_), Some(b)) => {
            v.push(b.span(), &join(prefix, "phase_rad"), "give either phase_deg or phase_rad, not both");
            None
        }
        (Some(d), None) => v.number(d, &join(prefix, "phase_deg")).map(Angle::Degrees),
        (None, Some(r)) => v.number(r, &join(prefix, "phase_rad")).map(Angle::Radians),
        (None, None) => Some(Angle::Degrees(0.0)),
    };
    let label = match get(t, "label") {
        Some(x) => match v.integer(x, &join(prefix, "label"), "label") {
            Some(l) => Some(Some(l)),
            None => None,
        },
        None => Some(None),
    };
    Some(ToneSpec {
        offset: offset?,
        strength: strength?,
        phase: phase?,
        label: label?,
    })
}

fn parse_run(v: &mut Validator<'_>, t: &Table<'_>) -> RunSpec {
    v.check_keys(
        t,
        &["threshold_db", "signal_index", "sweep_tone", "steps", "seed", "samples", "fit", "search"],
        "run",
    );
    let mut run = RunSpec::default();
    if let Some(x) = get(t, "threshold_db") {
        run.threshold_db = v.number(x, "run.threshold_db");
    }
    if let Some(x) = get(t, "signal_index") {
        run.signal_index = v.integer(x, "run.signal_index", "signal_index");
    }
    if let Some(x) = get(t, "sweep_tone") {
        run.sweep_tone = v.integer(x, "run.sweep_tone", "sweep_tone");
    }
    if let Some(x) = get(t, "steps") {
        run.steps = v.count(x, "run.steps").map(|s| s as usize);
    }
    if let Some(x) = get(t, "seed") {
        run.seed = v.count(x, "run.seed");
    }
    if let Some(x) = get(t, "samples") {
        run.samples = v.count(x, "run.samples").map(|s| s as usize);
    }
    if let Some(x) = get(t, "fit") {
        if let Some(f) = v.table(x, "run.fit") {
            run.fit = parse_fit(v, f, x.span());
        }
    }
    if let Some(x) = get(t, "search") {
        if let Some(s) = v.table(x, "run.search") {
            run.search = parse_search(v, s, x.span());
        }
    }
    run
}

fn parse_fit(v: &mut Validator<'_>, t: &Table<'_>, span: Range<usize>) -> Option<FitSpec> {
    v.check_keys(t, &["g_min", "g_max", "gamma_min", "gamma_max", "grid_points"], "run.fit");
    let mut req = |key: &str| {
        let found = get(t, key);
        if found.is_none() {
            v.missing(span.clone(), &format!("run.fit.{key}"));
        }
        found
    };
    let (a, b, c, d, e) = (req("g_min"), req("g_max"), req("gamma_min"), req("gamma_max"), req("grid_points"));
    let g_min = a.and_then(|x| v.number(x, "run.fit.g_min"));
    let g_max = b.and_then(|x| v.number(x, "run.fit.g_max"));
    let gamma_min = c.and_then(|x| v.frequency(x, "run.fit.gamma_min", true));
    let gamma_max = d.and_then(|x| v.frequency(x, "run.fit.gamma_max", true));
    let grid_points = e.and_then(|x| v.count(x, "run.fit.grid_points")).map(|p| p as usize);
    let spec = FitSpec {
        g_min: g_min?,
        g_max: g_max?,
        gamma_min: gamma_min?,
        gamma_max: gamma_max?,
        grid_points: grid_points?,
    };
    if !(spec.g_min > 0.0 && spec.g_max > spec.g_min) {
        v.push(span.clone(), "run.fit.g_max", "need 0 < g_min < g_max");
        return None;
    }
    if spec.gamma_max.hertz() <= spec.gamma_min.hertz() {
        v.push(span.clone(), "run.fit.gamma_max", "need gamma_min < gamma_max");
        return None;
    }
    if spec.grid_points < 4 {
        v.push(span, "run.fit.grid_points", "need at least 4 points");
        return None;
    }
    Some(spec)
}

fn parse_search(v: &mut Validator<'_>, t: &Table<'_>, span: Range<usize>) -> Option<SearchSpec> {
    v.check_keys(t, &["points", "tones"], "run.search");
    let points = match get(t, "points") {
        Some(x) => v.count(x, "run.search.points").map(|p| p as usize),
        None => {
            v.missing(span.clone(), "run.search.points");
            None
        }
    };
    let tones = match get(t, "tones") {
        Some(x) => match x.get_ref() {
            DeValue::Array(items) => {
                let mut out = Vec::new();
                let mut ok = true;
                for item in items.iter() {
                    match v.integer(item, "run.search.tones", "tone label") {
                        Some(l) => out.push(l),
                        None => ok = false,
                    }
                }
                ok.then_some(out)
            }
            other => {
                v.push(x.span(), "run.search.tones", format!("expected an array, found {}", other.type_str()));
                None
            }
        },
        None => {
            v.missing(span, "run.search.tones");
            None
        }
    };
    Some(SearchSpec {
        points: points?,
        tones: tones?,
    })
}
