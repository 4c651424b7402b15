//! ITU-style frequency grid, channel/wavelength conversions, and the domain
//! types describing classical channels, the quantum channel, and fiber links.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// C-band boundaries used for wavelength validation.
pub const C_BAND_MIN_NM: f64 = 1530.0;
pub const C_BAND_MAX_NM: f64 = 1565.0;

/// Tolerance on the stored vs recomputed total power, in dB.
pub const TOTAL_POWER_TOLERANCE_DB: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("frequency must be positive, got {0} THz")]
    NonPositiveFrequency(f64),
    #[error("wavelength must be positive, got {0} nm")]
    NonPositiveWavelength(f64),
    #[error("channel set has {frequencies} frequencies but {powers} powers")]
    LengthMismatch { frequencies: usize, powers: usize },
}

/// Fixed-spacing DWDM grid: channel `i` sits at `anchor + i * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub anchor_frequency_thz: f64,
    pub channel_spacing_ghz: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            anchor_frequency_thz: 190.0,
            channel_spacing_ghz: 50.0,
        }
    }
}

impl GridSpec {
    pub fn channel_to_frequency(&self, index: u32) -> f64 {
        self.anchor_frequency_thz + f64::from(index) * self.channel_spacing_ghz * 1e-3
    }
}

/// λ[nm] = c / f[THz], with c in m/s.
pub fn frequency_to_wavelength(f_thz: f64) -> Result<f64, GridError> {
    if !(f_thz > 0.0) {
        return Err(GridError::NonPositiveFrequency(f_thz));
    }
    Ok(SPEED_OF_LIGHT_M_PER_S * 1e-3 / f_thz)
}

pub fn wavelength_to_frequency(lambda_nm: f64) -> Result<f64, GridError> {
    if !(lambda_nm > 0.0) {
        return Err(GridError::NonPositiveWavelength(lambda_nm));
    }
    Ok(SPEED_OF_LIGHT_M_PER_S * 1e-3 / lambda_nm)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Returns `-inf` for zero power.
pub fn mw_to_dbm(mw: f64) -> f64 {
    if mw <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * mw.log10()
    }
}

/// Single-photon detector parameters at the quantum receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub detection_efficiency: f64,
    /// Probability per gate of a count with no light at all.
    pub intrinsic_dark_count_probability: f64,
    pub gate_rate_hz: f64,
    pub detector_error_rate: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            detection_efficiency: 0.1,
            intrinsic_dark_count_probability: 1e-5,
            gate_rate_hz: 5.0e6,
            detector_error_rate: 0.01,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (name, p) in [
            ("detection_efficiency", self.detection_efficiency),
            (
                "intrinsic_dark_count_probability",
                self.intrinsic_dark_count_probability,
            ),
            ("detector_error_rate", self.detector_error_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(Violation::ProbabilityOutOfRange {
                    field: name,
                    value: p,
                });
            }
        }
        if !(self.gate_rate_hz > 0.0) {
            v.push(Violation::NonPositiveField {
                field: "gate_rate_hz",
                value: self.gate_rate_hz,
            });
        }
        v
    }
}

/// The quantum channel is pinned by wavelength, not grid index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumChannelSpec {
    pub center_wavelength_nm: f64,
    pub filter_bandwidth_ghz: f64,
    pub detector: DetectorModel,
}

impl Default for QuantumChannelSpec {
    fn default() -> Self {
        Self {
            center_wavelength_nm: 1551.90,
            filter_bandwidth_ghz: 38.0,
            detector: DetectorModel::default(),
        }
    }
}

impl QuantumChannelSpec {
    pub fn center_frequency_thz(&self) -> f64 {
        // center_wavelength is validated positive before use
        wavelength_to_frequency(self.center_wavelength_nm).unwrap_or(f64::NAN)
    }

    /// Receive-filter passband as (low, high) in THz.
    pub fn filter_band_thz(&self) -> (f64, f64) {
        let f = self.center_frequency_thz();
        let half = self.filter_bandwidth_ghz * 1e-3 / 2.0;
        (f - half, f + half)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.filter_bandwidth_ghz > 0.0) {
            v.push(Violation::NonPositiveField {
                field: "filter_bandwidth_ghz",
                value: self.filter_bandwidth_ghz,
            });
        }
        if !(C_BAND_MIN_NM..=C_BAND_MAX_NM).contains(&self.center_wavelength_nm) {
            v.push(Violation::WavelengthOutsideCBand {
                value: self.center_wavelength_nm,
            });
        }
        v.extend(self.detector.validate());
        v
    }
}

/// One fiber link with its lumped loss and nonlinearity coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberProfile {
    pub name: String,
    pub length_km: f64,
    pub end_to_end_loss_db: f64,
    /// Raman power-transfer efficiency per km per GHz of receive bandwidth.
    pub raman_coefficient: f64,
    /// Mixing-product conversion efficiency per mW^2.
    pub fwm_efficiency: f64,
}

impl FiberProfile {
    /// 1 km laboratory SSMF spool.
    pub fn lab() -> Self {
        Self {
            name: "lab".into(),
            length_km: 1.0,
            end_to_end_loss_db: 9.5,
            raman_coefficient: 3.0e-13,
            fwm_efficiency: 2.0e-7,
        }
    }

    /// 1 km campus-network span.
    pub fn campus() -> Self {
        Self {
            name: "campus".into(),
            length_km: 1.0,
            end_to_end_loss_db: 10.2,
            raman_coefficient: 4.0e-13,
            fwm_efficiency: 2.4e-7,
        }
    }

    /// 8.6 km metro span.
    pub fn city() -> Self {
        Self {
            name: "city".into(),
            length_km: 8.6,
            end_to_end_loss_db: 9.0,
            raman_coefficient: 8.0e-14,
            fwm_efficiency: 1.6e-7,
        }
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::lab(), Self::campus(), Self::city()]
    }

    pub fn linear_transmittance(&self) -> f64 {
        10f64.powf(-self.end_to_end_loss_db / 10.0)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.length_km > 0.0) {
            v.push(Violation::NonPositiveField {
                field: "length_km",
                value: self.length_km,
            });
        }
        if !(self.end_to_end_loss_db >= 0.0) {
            v.push(Violation::NegativeField {
                field: "end_to_end_loss_db",
                value: self.end_to_end_loss_db,
            });
        }
        if !(self.raman_coefficient >= 0.0) {
            v.push(Violation::NegativeField {
                field: "raman_coefficient",
                value: self.raman_coefficient,
            });
        }
        if !(self.fwm_efficiency >= 0.0) {
            v.push(Violation::NegativeField {
                field: "fwm_efficiency",
                value: self.fwm_efficiency,
            });
        }
        v
    }
}

/// The classical co-propagating channels: center frequencies and launch powers.
///
/// `total_power_dbm` is fixed at construction; `validate_channel_set` checks it
/// against the dB-domain sum of the per-channel powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalChannelSet {
    pub center_frequencies_thz: Vec<f64>,
    pub powers_dbm: Vec<f64>,
    pub total_power_dbm: f64,
}

impl ClassicalChannelSet {
    pub fn new(
        center_frequencies_thz: Vec<f64>,
        powers_dbm: Vec<f64>,
    ) -> Result<Self, GridError> {
        if center_frequencies_thz.len() != powers_dbm.len() {
            return Err(GridError::LengthMismatch {
                frequencies: center_frequencies_thz.len(),
                powers: powers_dbm.len(),
            });
        }
        let total = total_power_dbm(&powers_dbm);
        Ok(Self {
            center_frequencies_thz,
            powers_dbm,
            total_power_dbm: total,
        })
    }

    /// Builds a set from unsorted (frequency, power) pairs.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self, GridError> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (freqs, powers) = pairs.into_iter().unzip();
        Self::new(freqs, powers)
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new()).expect("empty set is well formed")
    }

    pub fn n(&self) -> usize {
        self.center_frequencies_thz.len()
    }

    /// Gaps between adjacent channels, in GHz. Empty for fewer than 2 channels.
    pub fn spacings_ghz(&self) -> Vec<f64> {
        self.center_frequencies_thz
            .windows(2)
            .map(|w| (w[1] - w[0]) * 1e3)
            .collect()
    }

    pub fn total_power_mw(&self) -> f64 {
        self.powers_dbm.iter().map(|&p| dbm_to_mw(p)).sum()
    }
}

/// dB-domain sum of per-channel launch powers; `-inf` for no channels.
pub fn total_power_dbm(powers_dbm: &[f64]) -> f64 {
    mw_to_dbm(powers_dbm.iter().map(|&p| dbm_to_mw(p)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    FrequenciesNotSorted {
        position: usize,
    },
    PowerLengthMismatch {
        frequencies: usize,
        powers: usize,
    },
    TotalPowerMismatch {
        stored_dbm: f64,
        recomputed_dbm: f64,
    },
    /// A classical carrier sits inside the quantum receive-filter band.
    QuantumBandOverlap {
        channel: usize,
        frequency_thz: f64,
    },
    NonFiniteValue {
        field: &'static str,
        position: usize,
    },
    ProbabilityOutOfRange {
        field: &'static str,
        value: f64,
    },
    NonPositiveField {
        field: &'static str,
        value: f64,
    },
    NegativeField {
        field: &'static str,
        value: f64,
    },
    WavelengthOutsideCBand {
        value: f64,
    },
}

/// Checks the channel-set invariants plus quantum-band clearance.
/// Returns all violations found; an empty list means the set is usable.
pub fn validate_channel_set(
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
) -> Vec<Violation> {
    let mut v = Vec::new();
    if set.center_frequencies_thz.len() != set.powers_dbm.len() {
        v.push(Violation::PowerLengthMismatch {
            frequencies: set.center_frequencies_thz.len(),
            powers: set.powers_dbm.len(),
        });
    }
    for (i, f) in set.center_frequencies_thz.iter().enumerate() {
        if !f.is_finite() {
            v.push(Violation::NonFiniteValue {
                field: "center_frequencies_thz",
                position: i,
            });
        }
    }
    for (i, p) in set.powers_dbm.iter().enumerate() {
        if !p.is_finite() {
            v.push(Violation::NonFiniteValue {
                field: "powers_dbm",
                position: i,
            });
        }
    }
    for (i, w) in set.center_frequencies_thz.windows(2).enumerate() {
        if !(w[0] < w[1]) {
            v.push(Violation::FrequenciesNotSorted { position: i + 1 });
        }
    }
    if set.n() > 0 {
        let recomputed = total_power_dbm(&set.powers_dbm);
        if (recomputed - set.total_power_dbm).abs() > TOTAL_POWER_TOLERANCE_DB {
            v.push(Violation::TotalPowerMismatch {
                stored_dbm: set.total_power_dbm,
                recomputed_dbm: recomputed,
            });
        }
    }
    let (lo, hi) = quantum.filter_band_thz();
    for (i, &f) in set.center_frequencies_thz.iter().enumerate() {
        if f >= lo && f <= hi {
            v.push(Violation::QuantumBandOverlap {
                channel: i,
                frequency_thz: f,
            });
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_to_frequency_matches_formula() {
        let grid = GridSpec::default();
        assert_eq!(grid.channel_to_frequency(0), 190.0);
        assert!((grid.channel_to_frequency(62) - 193.1).abs() < 1e-12);
        assert!((grid.channel_to_frequency(35) - 191.75).abs() < 1e-12);
    }

    #[test]
    fn channel_to_frequency_is_monotone() {
        let grid = GridSpec::default();
        for i in 0..100 {
            assert!(grid.channel_to_frequency(i + 1) > grid.channel_to_frequency(i));
        }
    }

    #[test]
    fn frequency_wavelength_conversions() {
        let nm = frequency_to_wavelength(193.1).unwrap();
        assert!((nm - 1552.524).abs() < 1e-3, "got {nm}");
        let nm = frequency_to_wavelength(192.902).unwrap();
        assert!((nm - 1554.118).abs() < 1e-3, "got {nm}");
        // round trip at the quantum wavelength
        let f = wavelength_to_frequency(1551.90).unwrap();
        let back = frequency_to_wavelength(f).unwrap();
        assert!((back - 1551.90).abs() / 1551.90 < 1e-9);
        assert!(frequency_to_wavelength(0.0).is_err());
        assert!(wavelength_to_frequency(-1.0).is_err());
    }

    #[test]
    fn empty_set_has_no_violations() {
        let set = ClassicalChannelSet::empty();
        assert!(validate_channel_set(&set, &QuantumChannelSpec::default()).is_empty());
        assert_eq!(set.total_power_dbm, f64::NEG_INFINITY);
    }

    #[test]
    fn channel_on_quantum_wavelength_is_flagged() {
        let q = QuantumChannelSpec::default();
        let f = wavelength_to_frequency(1551.90).unwrap();
        let set = ClassicalChannelSet::new(vec![f], vec![-20.0]).unwrap();
        let violations = validate_channel_set(&set, &q);
        assert!(matches!(
            violations.as_slice(),
            [Violation::QuantumBandOverlap { channel: 0, .. }]
        ));
    }

    #[test]
    fn unsorted_frequencies_are_flagged() {
        let q = QuantumChannelSpec::default();
        let set = ClassicalChannelSet::new(vec![193.4, 193.0], vec![-20.0, -20.0]).unwrap();
        let violations = validate_channel_set(&set, &q);
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::FrequenciesNotSorted { position: 1 })));
    }

    #[test]
    fn stored_total_power_mismatch_is_flagged() {
        let q = QuantumChannelSpec::default();
        let mut set = ClassicalChannelSet::new(vec![193.0], vec![-20.0]).unwrap();
        set.total_power_dbm += 0.5;
        assert!(validate_channel_set(&set, &q)
            .iter()
            .any(|v| matches!(v, Violation::TotalPowerMismatch { .. })));
    }

    #[test]
    fn total_power_is_db_domain_sum() {
        // two equal channels add 3.0103 dB
        let tp = total_power_dbm(&[-20.0, -20.0]);
        assert!((tp - (-20.0 + 10.0 * 2f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn from_pairs_sorts_by_frequency() {
        let set =
            ClassicalChannelSet::from_pairs(vec![(193.4, -21.0), (193.0, -20.0)]).unwrap();
        assert_eq!(set.center_frequencies_thz, vec![193.0, 193.4]);
        assert_eq!(set.powers_dbm, vec![-20.0, -21.0]);
    }
}
