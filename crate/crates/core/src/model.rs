//! Mode basis, device parameters and pump schemes.
//!
//! Frequencies are angular (rad/s) everywhere in the library. A pump tone sits
//! on the comb by construction: its frequency is `2·center + offset·spacing`,
//! so a tone with offset `m` mixes mode `i` into the conjugate of mode `m - i`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::ops::RangeInclusive;

use crate::{Complex, Error, Result};

/// Oscillator resonance and port coupling, both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    resonance_frequency: f64,
    port_coupling: f64,
}

impl DeviceParams {
    pub fn new(resonance_frequency: f64, port_coupling: f64) -> Result<Self> {
        if !(resonance_frequency.is_finite() && resonance_frequency > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "resonance frequency must be positive, got {resonance_frequency}"
            )));
        }
        if !(port_coupling.is_finite() && port_coupling > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "port coupling must be positive, got {port_coupling}"
            )));
        }
        Ok(Self {
            resonance_frequency,
            port_coupling,
        })
    }

    /// ω₀ in rad/s.
    pub fn resonance_frequency(&self) -> f64 {
        self.resonance_frequency
    }

    /// γ in rad/s. Also the loaded linewidth of the single over-coupled port.
    pub fn port_coupling(&self) -> f64 {
        self.port_coupling
    }

    pub fn with_port_coupling(&self, port_coupling: f64) -> Result<Self> {
        Self::new(self.resonance_frequency, port_coupling)
    }

    /// Dimensionless ratio ω₀·g/γ for a pump strength `g = |g_k|`.
    pub fn coupling_ratio(&self, strength: f64) -> f64 {
        self.resonance_frequency * strength / self.port_coupling
    }

    /// Pump strength `|g_k|` that realizes a given ω₀·g/γ.
    pub fn strength_for_ratio(&self, ratio: f64) -> f64 {
        ratio * self.port_coupling / self.resonance_frequency
    }

    /// Largest |ω₀ − ω_j| over the grid, in units of γ.
    ///
    /// The linear single-port model assumes this stays within a few
    /// linewidths; callers decide whether to warn.
    pub fn max_detuning_linewidths(&self, grid: &ModeGrid) -> f64 {
        let lo = (grid.mode_frequency(-grid.half_span_i64()) - self.resonance_frequency).abs();
        let hi = (grid.mode_frequency(grid.half_span_i64()) - self.resonance_frequency).abs();
        lo.max(hi) / self.port_coupling
    }
}

/// Orthogonal comb of `2J + 1` modes centered on half the reference pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGrid {
    center_frequency: f64,
    spacing: f64,
    half_span: u32,
}

impl ModeGrid {
    pub fn new(center_frequency: f64, spacing: f64, half_span: u32) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mode spacing must be positive, got {spacing}"
            )));
        }
        if !center_frequency.is_finite() {
            return Err(Error::InvalidArgument(
                "center frequency must be finite".into(),
            ));
        }
        Ok(Self {
            center_frequency,
            spacing,
            half_span,
        })
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn half_span(&self) -> u32 {
        self.half_span
    }

    pub(crate) fn half_span_i64(&self) -> i64 {
        i64::from(self.half_span)
    }

    /// Number of modes, always odd.
    pub fn mode_count(&self) -> usize {
        2 * self.half_span as usize + 1
    }

    /// Mode indices in ascending order.
    pub fn indices(&self) -> RangeInclusive<i64> {
        -self.half_span_i64()..=self.half_span_i64()
    }

    pub fn contains(&self, index: i64) -> bool {
        index.abs() <= self.half_span_i64()
    }

    /// Zero-based position of a mode index within the grid.
    pub fn position(&self, index: i64) -> Option<usize> {
        self.contains(index)
            .then(|| (index + self.half_span_i64()) as usize)
    }

    /// Mode index at a zero-based position.
    pub fn index_at(&self, position: usize) -> i64 {
        position as i64 - self.half_span_i64()
    }

    /// ω_j = center + j·Δ, computed from the index every time.
    pub fn mode_frequency(&self, index: i64) -> f64 {
        self.center_frequency + index as f64 * self.spacing
    }

    /// Same grid with every frequency multiplied by `factor`. Used for
    /// dimensionless rescaling checks.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.center_frequency * factor, self.spacing * factor, self.half_span)
    }
}

pub fn build_mode_grid(center_frequency: f64, spacing: f64, half_span: u32) -> Result<ModeGrid> {
    ModeGrid::new(center_frequency, spacing, half_span)
}

/// Wrap an angle into [0, 2π).
pub fn wrap_phase(phase: f64) -> f64 {
    let wrapped = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// One pump tone at `Ω = 2·center + offset·Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpTone {
    offset: i64,
    amplitude: f64,
    phase: f64,
}

impl PumpTone {
    pub fn new(offset: i64, amplitude: f64, phase: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pump amplitude must be non-negative, got {amplitude}"
            )));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidArgument("pump phase must be finite".into()));
        }
        Ok(Self {
            offset,
            amplitude,
            phase: wrap_phase(phase),
        })
    }

    /// Tone with complex strength `g`, i.e. amplitude `2|g|` and phase `arg g`.
    pub fn from_strength(offset: i64, strength: Complex) -> Result<Self> {
        Self::new(offset, 2.0 * strength.norm(), strength.arg())
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Phase in [0, 2π).
    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// g_k = (A_k / 2)·e^{iφ_k}.
    pub fn strength(&self) -> Complex {
        Complex::from_polar(self.amplitude / 2.0, self.phase)
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        Self {
            phase: wrap_phase(phase),
            ..*self
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        Self::new(self.offset, amplitude, self.phase)
    }
}

/// Ordered set of pump tones with distinct offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpScheme {
    tones: Vec<PumpTone>,
}

impl PumpScheme {
    pub fn new(tones: Vec<PumpTone>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (k, tone) in tones.iter().enumerate() {
            if let Some(first) = seen.insert(tone.offset, k) {
                return Err(Error::InvalidArgument(format!(
                    "tones {first} and {k} share offset {}; merge them first",
                    tone.offset
                )));
            }
        }
        Ok(Self { tones })
    }

    /// Build a scheme, merging tones that share an offset by adding their
    /// complex strengths. Order follows first appearance.
    pub fn merged(tones: &[PumpTone]) -> Self {
        let mut order: Vec<i64> = Vec::new();
        let mut sums: BTreeMap<i64, Complex> = BTreeMap::new();
        for tone in tones {
            let entry = sums.entry(tone.offset).or_insert_with(|| {
                order.push(tone.offset);
                Complex::new(0.0, 0.0)
            });
            *entry += tone.strength();
        }
        let tones = order
            .into_iter()
            .map(|m| {
                PumpTone::from_strength(m, sums[&m]).expect("sum of valid strengths is finite")
            })
            .collect();
        Self { tones }
    }

    pub fn tones(&self) -> &[PumpTone] {
        &self.tones
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn offsets(&self) -> Vec<i64> {
        self.tones.iter().map(|t| t.offset).collect()
    }

    pub fn tone_for_offset(&self, offset: i64) -> Option<usize> {
        self.tones.iter().position(|t| t.offset == offset)
    }

    /// Same scheme with one tone's phase replaced.
    pub fn with_phase(&self, tone: usize, phase: f64) -> Result<Self> {
        let mut tones = self.tones.clone();
        let slot = tones.get_mut(tone).ok_or_else(|| {
            Error::InvalidArgument(format!("tone {tone} out of range ({} tones)", self.len()))
        })?;
        *slot = slot.with_phase(phase);
        Ok(Self { tones })
    }

    /// Same scheme with every tone's phase shifted by `delta`.
    pub fn with_global_phase_shift(&self, delta: f64) -> Self {
        let tones = self
            .tones
            .iter()
            .map(|t| t.with_phase(t.phase + delta))
            .collect();
        Self { tones }
    }

    /// Balanced scheme: every tone keeps its offset and phase, with `|g_k| = strength`.
    pub fn with_balanced_strength(&self, strength: f64) -> Result<Self> {
        let tones = self
            .tones
            .iter()
            .map(|t| t.with_amplitude(2.0 * strength))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tones })
    }

    /// Same offsets and phases with zero amplitude.
    pub fn pump_off(&self) -> Self {
        let tones = self
            .tones
            .iter()
            .map(|t| PumpTone { amplitude: 0.0, ..*t })
            .collect();
        Self { tones }
    }

    /// Scheme built from offsets and phases at a common strength `|g_k|`.
    pub fn balanced(offsets: &[i64], phases: &[f64], strength: f64) -> Result<Self> {
        if offsets.len() != phases.len() {
            return Err(Error::InvalidArgument(
                "offsets and phases differ in length".into(),
            ));
        }
        let tones = offsets
            .iter()
            .zip(phases)
            .map(|(&m, &phi)| PumpTone::new(m, 2.0 * strength, phi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tones)
    }
}

/// One frequency-matched process `a_low ↔ a*_high` with `low + high = m_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub low: i64,
    pub high: i64,
    /// Index of the tone in the scheme.
    pub tone: usize,
    /// ω₀·g_k in rad/s.
    pub strength: Complex,
}

impl Coupling {
    /// Single-mode squeezing process (`2ω_i = Ω_k`).
    pub fn is_degenerate(&self) -> bool {
        self.low == self.high
    }

    /// The mode paired with `index` by this process, if `index` takes part.
    pub fn partner(&self, index: i64) -> Option<i64> {
        if index == self.low {
            Some(self.high)
        } else if index == self.high {
            Some(self.low)
        } else {
            None
        }
    }
}

/// Every in-band coupling of a scheme on a grid, each unordered pair once.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    entries: Vec<Coupling>,
}

impl CouplingSet {
    /// Wrap hand-built entries. Grid membership is checked at assembly.
    pub fn new(entries: Vec<Coupling>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[Coupling] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Partners of a mode in ascending order (a degenerate entry yields the mode itself).
    pub fn partners_of(&self, index: i64) -> Vec<i64> {
        let mut out: Vec<i64> = self.entries.iter().filter_map(|c| c.partner(index)).collect();
        out.sort_unstable();
        out
    }
}

/// Enumerate the in-band couplings of every tone.
///
/// A tone at offset `m` couples `a_i` to `a*_j` whenever `i + j = m` with
/// both indices on the grid. Couplings that land near 3ω₀ fall outside the
/// grid and are never generated.
pub fn resolve_couplings(grid: &ModeGrid, scheme: &PumpScheme, params: &DeviceParams) -> CouplingSet {
    let half = grid.half_span_i64();
    let mut entries = Vec::new();
    for (k, tone) in scheme.tones().iter().enumerate() {
        let strength = tone.strength() * params.resonance_frequency();
        let m = tone.offset();
        // i ≤ m - i and both within [-J, J]
        let lo = (-half).max(m - half);
        let hi = half.min(m.div_euclid(2));
        for low in lo..=hi {
            entries.push(Coupling {
                low,
                high: m - low,
                tone: k,
                strength,
            });
        }
    }
    CouplingSet { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SecondOrderProduct {
    pub tone: usize,
    pub index: i64,
}

/// A third-order index with every ordered tone pair `(k, l)`, `k ≠ l`, that reaches it.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ThirdOrderProduct {
    pub index: i64,
    pub paths: Vec<(usize, usize)>,
}

impl ThirdOrderProduct {
    pub fn path_count(&self) -> usize {
        self.paths.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct IntermodPrediction {
    pub signal: i64,
    /// Idlers at `m_k − s`, one per tone, tone order.
    pub second_order: Vec<SecondOrderProduct>,
    /// Products at `m_k − m_l + s`, ascending index.
    pub third_order: Vec<ThirdOrderProduct>,
    /// Predicted indices that fall off the grid, ascending, deduplicated.
    pub dropped: Vec<i64>,
}

impl IntermodPrediction {
    pub fn any_dropped(&self) -> bool {
        !self.dropped.is_empty()
    }
}

/// Second- and third-order intermodulation products of a signal mode.
pub fn predicted_intermod_indices(
    grid: &ModeGrid,
    signal: i64,
    scheme: &PumpScheme,
) -> Result<IntermodPrediction> {
    if !grid.contains(signal) {
        return Err(Error::InvalidArgument(format!(
            "signal index {signal} outside grid ±{}",
            grid.half_span()
        )));
    }
    let mut dropped = Vec::new();
    let mut second_order = Vec::new();
    for (k, tone) in scheme.tones().iter().enumerate() {
        let index = tone.offset() - signal;
        if grid.contains(index) {
            second_order.push(SecondOrderProduct { tone: k, index });
        } else {
            dropped.push(index);
        }
    }
    let mut third: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, tk) in scheme.tones().iter().enumerate() {
        for (l, tl) in scheme.tones().iter().enumerate() {
            if k == l {
                continue;
            }
            let index = tk.offset() - tl.offset() + signal;
            if grid.contains(index) {
                third.entry(index).or_default().push((k, l));
            } else {
                dropped.push(index);
            }
        }
    }
    dropped.sort_unstable();
    dropped.dedup();
    let third_order = third
        .into_iter()
        .map(|(index, paths)| ThirdOrderProduct { index, paths })
        .collect();
    Ok(IntermodPrediction {
        signal,
        second_order,
        third_order,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(j: u32) -> ModeGrid {
        ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, j).unwrap()
    }

    fn params() -> DeviceParams {
        DeviceParams::new(TAU * 4.2e9, TAU * 112e6).unwrap()
    }

    fn scheme(offsets: &[i64]) -> PumpScheme {
        PumpScheme::balanced(offsets, &vec![0.0; offsets.len()], 1e-3).unwrap()
    }

    #[test]
    fn reference_grid_has_95_modes() {
        let g = build_mode_grid(TAU * 4.2e9, TAU * 0.1e6, 47).unwrap();
        assert_eq!(g.mode_count(), 95);
        assert_eq!(g.mode_frequency(-47), g.center_frequency() - 47.0 * g.spacing());
        assert_eq!(g.mode_frequency(0), g.center_frequency());
    }

    #[test]
    fn degenerate_grid_is_single_mode() {
        let g = ModeGrid::new(5.0, 1.0, 0).unwrap();
        assert_eq!(g.mode_count(), 1);
        assert_eq!(g.indices().collect::<Vec<_>>(), vec![0]);
        assert_eq!(g.mode_frequency(0), 5.0);
    }

    #[test]
    fn non_positive_spacing_rejected() {
        assert!(matches!(ModeGrid::new(1.0, 0.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(ModeGrid::new(1.0, -2.0, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn device_params_validated() {
        assert!(DeviceParams::new(0.0, 1.0).is_err());
        assert!(DeviceParams::new(1.0, -1.0).is_err());
        let p = params();
        let g = p.strength_for_ratio(0.14);
        assert!((p.coupling_ratio(g) - 0.14).abs() < 1e-15);
    }

    #[test]
    fn pump_tone_strength_and_phase_wrapping() {
        let t = PumpTone::new(4, 0.2, -PI / 2.0).unwrap();
        assert!((t.phase() - 1.5 * PI).abs() < 1e-15);
        let g = t.strength();
        assert!((g.norm() - 0.1).abs() < 1e-15);
        assert!(PumpTone::new(0, -0.1, 0.0).is_err());
    }

    #[test]
    fn duplicate_offsets_rejected_or_merged() {
        let a = PumpTone::new(2, 0.2, 0.0).unwrap();
        let b = PumpTone::new(2, 0.2, PI).unwrap();
        assert!(PumpScheme::new(vec![a, b]).is_err());
        let merged = PumpScheme::merged(&[a, b, PumpTone::new(-2, 0.1, 0.0).unwrap()]);
        assert_eq!(merged.offsets(), vec![2, -2]);
        assert!(merged.tones()[0].amplitude() < 1e-15);
    }

    #[test]
    fn three_pump_mode_28_partners() {
        let c = resolve_couplings(&grid(47), &scheme(&[-4, 0, 4]), &params());
        assert_eq!(c.partners_of(28), vec![-32, -28, -24]);
    }

    #[test]
    fn single_pump_is_anti_diagonal() {
        let g = grid(47);
        let c = resolve_couplings(&g, &scheme(&[0]), &params());
        for i in g.indices() {
            assert_eq!(c.partners_of(i), vec![-i]);
        }
        assert_eq!(c.len(), 48);
    }

    #[test]
    fn two_pump_matches_brute_force_enumeration() {
        let g = grid(47);
        let offsets = [-2, 2];
        let c = resolve_couplings(&g, &scheme(&offsets), &params());
        for i in g.indices() {
            let mut expected: Vec<i64> = g
                .indices()
                .filter(|&j| offsets.contains(&(i + j)))
                .collect();
            expected.sort_unstable();
            assert_eq!(c.partners_of(i), expected, "mode {i}");
        }
        assert_eq!(c.partners_of(1), vec![-3, 1]);
    }

    #[test]
    fn coupling_strength_is_resonance_times_pump_strength() {
        let p = params();
        let s = PumpScheme::new(vec![PumpTone::new(0, 0.01, 0.3).unwrap()]).unwrap();
        let c = resolve_couplings(&grid(3), &s, &p);
        let expected = s.tones()[0].strength() * p.resonance_frequency();
        assert!(c.entries().iter().all(|e| e.strength == expected));
    }

    #[test]
    fn out_of_band_offset_gives_no_couplings() {
        let c = resolve_couplings(&grid(2), &scheme(&[5]), &params());
        assert!(c.is_empty());
        let c = resolve_couplings(&grid(2), &scheme(&[4]), &params());
        assert_eq!(c.entries().len(), 1);
        assert!(c.entries()[0].is_degenerate());
    }

    #[test]
    fn intermod_products_for_signal_28() {
        let p = predicted_intermod_indices(&grid(47), 28, &scheme(&[-4, 0, 4])).unwrap();
        let second: Vec<i64> = p.second_order.iter().map(|s| s.index).collect();
        assert_eq!(second, vec![-32, -28, -24]);
        let third: Vec<(i64, usize)> = p
            .third_order
            .iter()
            .map(|t| (t.index, t.path_count()))
            .collect();
        assert_eq!(third, vec![(20, 1), (24, 2), (32, 2), (36, 1)]);
        assert!(!p.any_dropped());
    }

    #[test]
    fn intermod_single_pump_and_center_signal() {
        let g = grid(47);
        let p = predicted_intermod_indices(&g, 5, &scheme(&[0])).unwrap();
        assert!(p.third_order.is_empty());
        let p = predicted_intermod_indices(&g, 0, &scheme(&[-4, 0, 4])).unwrap();
        let second: Vec<i64> = p.second_order.iter().map(|s| s.index).collect();
        assert_eq!(second, vec![-4, 0, 4]);
    }

    #[test]
    fn intermod_drops_off_grid_products() {
        let p = predicted_intermod_indices(&grid(47), 45, &scheme(&[-4, 0, 4])).unwrap();
        assert_eq!(p.dropped, vec![-49, 49, 53]);
        assert!(predicted_intermod_indices(&grid(47), 48, &scheme(&[0])).is_err());
    }
}
