//! Synthetic link oracle: four-wave mixing products, Raman/ASE/leakage noise
//! falling in the quantum channel, and the resulting dark-count probability,
//! QBER and secret key rate. Stands in for a physical testbed as the source
//! of ground-truth labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ClassicalChannelSet, FiberProfile, QuantumChannelSpec};

pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("duplicate input frequency {frequency} THz at positions {first} and {second}")]
    DuplicateFrequency {
        frequency: f64,
        first: usize,
        second: usize,
    },
    #[error("f_min {f_min} THz exceeds f_max {f_max} THz")]
    InvertedRange { f_min: f64, f_max: f64 },
}

/// One mixing product f_i + f_j - f_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwmProduct {
    pub frequency_thz: f64,
    pub parent_indices: (usize, usize, usize),
    /// 1 for degenerate (i = j) products, 2 otherwise.
    pub degeneracy: u8,
}

/// All mixing products over the input frequencies: unordered pump pairs
/// (i, j) including i = j, with k distinct from both. The count is always
/// (N^3 - N^2) / 2.
pub fn enumerate_fwm_products(frequencies: &[f64]) -> Result<Vec<FwmProduct>, PhysicsError> {
    for i in 0..frequencies.len() {
        for j in (i + 1)..frequencies.len() {
            if frequencies[i] == frequencies[j] {
                return Err(PhysicsError::DuplicateFrequency {
                    frequency: frequencies[i],
                    first: i,
                    second: j,
                });
            }
        }
    }
    let n = frequencies.len();
    let mut out = Vec::with_capacity(n * n * n / 2);
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                out.push(FwmProduct {
                    frequency_thz: frequencies[i] + frequencies[j] - frequencies[k],
                    parent_indices: (i, j, k),
                    degeneracy: if i == j { 1 } else { 2 },
                });
            }
        }
    }
    Ok(out)
}

/// Outermost frequencies any mixing product can reach:
/// (2 f_min - f_max, 2 f_max - f_min).
pub fn fwm_guard_frequencies(f_min: f64, f_max: f64) -> Result<(f64, f64), PhysicsError> {
    if f_min > f_max {
        return Err(PhysicsError::InvertedRange { f_min, f_max });
    }
    Ok((2.0 * f_min - f_max, 2.0 * f_max - f_min))
}

/// Tunable constants of the noise and detection model. All are configurable
/// through the config file; defaults are documented in the shipped config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    /// Mean photon number per signal pulse at the transmitter.
    pub mean_photon_number: f64,
    /// Fraction of raw detections surviving basis sifting.
    pub sift_factor: f64,
    /// Broadband amplifier-noise floor per active classical channel, photons/s.
    pub ase_floor_rate_per_channel: f64,
    /// Scale of imperfect-filter leakage, photons/s per mW of channel power.
    pub leakage_rate_per_mw: f64,
    /// e-folding spectral distance of the leakage term, GHz.
    pub leakage_decay_ghz: f64,
    /// Optional relative Gaussian jitter applied to generated labels.
    pub label_jitter_sigma: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            mean_photon_number: 0.1,
            sift_factor: 0.5,
            ase_floor_rate_per_channel: 20.0,
            leakage_rate_per_mw: 1.0e4,
            leakage_decay_ghz: 50.0,
            label_jitter_sigma: 0.0,
        }
    }
}

/// Per-source in-band noise photon rates and the per-gate count probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBreakdown {
    pub raman_rate: f64,
    pub fwm_rate: f64,
    pub ase_rate: f64,
    pub leakage_rate: f64,
    pub total_rate: f64,
    pub dark_count_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QkdPerformance {
    pub noise: NoiseBreakdown,
    pub qber: f64,
    pub skr: f64,
}

fn photon_energy_j(quantum: &QuantumChannelSpec) -> f64 {
    PLANCK_J_S * quantum.center_frequency_thz() * 1e12
}

fn power_mw_to_photon_rate(power_mw: f64, quantum: &QuantumChannelSpec) -> f64 {
    power_mw * 1e-3 / photon_energy_j(quantum)
}

/// In-band mixing noise: sums, over products landing inside the quantum
/// filter, a power term fwm_efficiency * degeneracy^2 * P_i P_j P_k (mW
/// domain), attenuated by the end-to-end loss.
pub fn fwm_inband_rate(
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
) -> f64 {
    let products = match enumerate_fwm_products(&set.center_frequencies_thz) {
        Ok(p) => p,
        Err(_) => return 0.0,
    };
    let (lo, hi) = quantum.filter_band_thz();
    let powers_mw: Vec<f64> = set
        .powers_dbm
        .iter()
        .map(|&p| crate::grid::dbm_to_mw(p))
        .collect();
    let mut power_mw = 0.0;
    for p in products {
        if p.frequency_thz < lo || p.frequency_thz > hi {
            continue;
        }
        let (i, j, k) = p.parent_indices;
        let deg = f64::from(p.degeneracy);
        power_mw += fiber.fwm_efficiency * deg * deg * powers_mw[i] * powers_mw[j] * powers_mw[k];
    }
    power_mw_to_photon_rate(power_mw * fiber.linear_transmittance(), quantum)
}

/// Spontaneous-Raman in-band noise, linear in each channel's launch power.
pub fn raman_inband_rate(
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
) -> f64 {
    let scattered_mw: f64 = set.total_power_mw()
        * fiber.raman_coefficient
        * fiber.length_km
        * quantum.filter_bandwidth_ghz
        * fiber.linear_transmittance();
    power_mw_to_photon_rate(scattered_mw, quantum)
}

fn ase_rate(set: &ClassicalChannelSet, consts: &PhysicsConstants) -> f64 {
    set.n() as f64 * consts.ase_floor_rate_per_channel
}

fn leakage_rate(
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
    consts: &PhysicsConstants,
) -> f64 {
    let f_q = quantum.center_frequency_thz();
    set.center_frequencies_thz
        .iter()
        .zip(&set.powers_dbm)
        .map(|(&f, &p)| {
            let distance_ghz = (f - f_q).abs() * 1e3;
            consts.leakage_rate_per_mw
                * crate::grid::dbm_to_mw(p)
                * (-distance_ghz / consts.leakage_decay_ghz).exp()
        })
        .sum::<f64>()
        * fiber.linear_transmittance()
}

/// ASE floor plus imperfect-filter leakage, photons/s.
pub fn ase_and_leakage_rate(
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
    consts: &PhysicsConstants,
) -> f64 {
    ase_rate(set, consts) + leakage_rate(set, quantum, fiber, consts)
}

/// Shannon binary entropy, in bits.
pub fn binary_entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        return 0.0;
    }
    -e * e.log2() - (1.0 - e) * (1.0 - e).log2()
}

/// Detection and key-rate model applied to already-computed noise rates.
/// Separated from `evaluate_link` so noise can be swept directly.
pub fn performance_from_rates(
    raman_rate: f64,
    fwm_rate: f64,
    ase_rate: f64,
    leakage_rate: f64,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
    consts: &PhysicsConstants,
) -> QkdPerformance {
    let det = &quantum.detector;
    let total_rate = raman_rate + fwm_rate + ase_rate + leakage_rate;
    let noise_per_gate = 1.0 - (-(total_rate / det.gate_rate_hz)).exp();
    let dark = (noise_per_gate + det.intrinsic_dark_count_probability).clamp(0.0, 1.0);
    let p_signal =
        consts.mean_photon_number * fiber.linear_transmittance() * det.detection_efficiency;
    let p_total = dark + p_signal;
    let qber = if p_total > 0.0 {
        ((0.5 * dark + det.detector_error_rate * p_signal) / p_total).clamp(0.0, 0.5)
    } else {
        0.0
    };
    let sift_rate = det.gate_rate_hz * p_total * consts.sift_factor;
    let skr = sift_rate * (1.0 - 2.0 * binary_entropy(qber)).max(0.0);
    QkdPerformance {
        noise: NoiseBreakdown {
            raman_rate,
            fwm_rate,
            ase_rate,
            leakage_rate,
            total_rate,
            dark_count_probability: dark,
        },
        qber,
        skr,
    }
}

/// Ground-truth evaluation of one link state.
pub fn evaluate_link(
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
    consts: &PhysicsConstants,
) -> QkdPerformance {
    performance_from_rates(
        raman_inband_rate(set, quantum, fiber),
        fwm_inband_rate(set, quantum, fiber),
        ase_rate(set, consts),
        leakage_rate(set, quantum, fiber, consts),
        quantum,
        fiber,
        consts,
    )
}
