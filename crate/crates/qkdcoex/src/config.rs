//! Plain-text configuration: grid spec, quantum channel, detector, physics
//! constants, fiber profiles and the data-collection campaign, in one
//! `[section]` / `key = value` file. Unknown sections and keys are rejected.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::grid::{DetectorModel, FiberProfile, GridSpec, QuantumChannelSpec};
use crate::physics::PhysicsConstants;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: unterminated section header `{text}`")]
    BadSectionHeader { line: usize, text: String },
    #[error("line {line}: key `{key}` outside any section")]
    KeyOutsideSection { line: usize, key: String },
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("section `{section}`: unknown key `{key}`")]
    UnknownKey { section: String, key: String },
    #[error("section `{section}`: duplicate key `{key}`")]
    DuplicateKey { section: String, key: String },
    #[error("section `{section}`, key `{key}`: invalid number `{value}`")]
    InvalidNumber {
        section: String,
        key: String,
        value: String,
    },
    #[error("section `{section}`, key `{key}`: {message}")]
    InvalidValue {
        section: String,
        key: String,
        message: String,
    },
    #[error("missing required section `{0}`")]
    MissingSection(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

/// Low-level parse into sections, preserving order. Comments start with `#`.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::BadSectionHeader {
                    line: line_no,
                    text: line.to_string(),
                })?
                .trim();
            sections.push(Section {
                name: name.to_string(),
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::MalformedLine {
            line: line_no,
            text: line.to_string(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        match sections.last_mut() {
            Some(s) => {
                if s.entries.iter().any(|(k, _)| *k == key) {
                    return Err(ConfigError::DuplicateKey {
                        section: s.name.clone(),
                        key,
                    });
                }
                s.entries.push((key, value));
            }
            None => return Err(ConfigError::KeyOutsideSection { line: line_no, key }),
        }
    }
    Ok(sections)
}

pub(crate) fn parse_f64(section: &str, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidNumber {
        section: section.to_string(),
        key: key.to_string(),
        value: value.to_string(),
    })
}

pub(crate) fn parse_f64_list(
    section: &str,
    key: &str,
    value: &str,
) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| parse_f64(section, key, v.trim()))
        .collect()
}

pub(crate) fn parse_usize_list(
    section: &str,
    key: &str,
    value: &str,
) -> Result<Vec<usize>, ConfigError> {
    value
        .split(',')
        .map(|v| {
            v.trim().parse().map_err(|_| ConfigError::InvalidNumber {
                section: section.to_string(),
                key: key.to_string(),
                value: v.trim().to_string(),
            })
        })
        .collect()
}

/// Sweep definition for the synthetic data-collection campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub channel_counts: Vec<usize>,
    pub straddle_spacings_ghz: Vec<f64>,
    pub block_offsets_ghz: Vec<f64>,
    pub block_spacings_ghz: Vec<f64>,
    /// Total-power sweep: validation draws TP values absent from training.
    pub tp_train_dbm: Vec<f64>,
    pub tp_validation_dbm: Vec<f64>,
    pub set_count: usize,
    pub train_per_set: usize,
    pub validation_per_set: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        // TP sweep over [-26, -15] dBm in 0.5 dB steps; every fourth value
        // is held out for validation.
        let all_tp: Vec<f64> = (0..=22).map(|i| -26.0 + 0.5 * i as f64).collect();
        let validation: Vec<f64> = all_tp.iter().copied().skip(2).step_by(4).collect();
        let train: Vec<f64> = all_tp
            .iter()
            .copied()
            .filter(|tp| !validation.contains(tp))
            .collect();
        Self {
            channel_counts: vec![1, 4, 8],
            straddle_spacings_ghz: vec![100.0, 150.0, 200.0],
            block_offsets_ghz: vec![100.0, 200.0, 300.0, 400.0],
            block_spacings_ghz: vec![50.0, 100.0],
            tp_train_dbm: train,
            tp_validation_dbm: validation,
            set_count: 5,
            train_per_set: 164,
            validation_per_set: 43,
        }
    }
}

/// Everything the pipeline needs from one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub grid: GridSpec,
    pub quantum: QuantumChannelSpec,
    pub physics: PhysicsConstants,
    pub fibers: Vec<FiberProfile>,
    pub campaign: CampaignConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            quantum: QuantumChannelSpec::default(),
            physics: PhysicsConstants::default(),
            fibers: FiberProfile::defaults(),
            campaign: CampaignConfig::default(),
        }
    }
}

impl AppConfig {
    /// Parses a config file. Sections are optional and override the defaults,
    /// except `[fiber.<name>]` sections which, when present, replace the
    /// default profile list entirely.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = AppConfig::default();
        let sections = parse_sections(text)?;
        let mut fibers: Vec<FiberProfile> = Vec::new();
        let mut seen = BTreeSet::new();
        for section in &sections {
            if !section.name.starts_with("fiber.") && !seen.insert(section.name.clone()) {
                return Err(ConfigError::Invalid(format!(
                    "section `{}` appears twice",
                    section.name
                )));
            }
            match section.name.as_str() {
                "grid" => apply_grid(&mut cfg.grid, section)?,
                "quantum" => apply_quantum(&mut cfg.quantum, section)?,
                "detector" => apply_detector(&mut cfg.quantum.detector, section)?,
                "physics" => apply_physics(&mut cfg.physics, section)?,
                "campaign" => apply_campaign(&mut cfg.campaign, section)?,
                name => {
                    if let Some(fiber_name) = name.strip_prefix("fiber.") {
                        fibers.push(parse_fiber(fiber_name, section)?);
                    } else {
                        return Err(ConfigError::UnknownSection(name.to_string()));
                    }
                }
            }
        }
        if !fibers.is_empty() {
            let mut names = BTreeSet::new();
            for f in &fibers {
                if !names.insert(f.name.clone()) {
                    return Err(ConfigError::Invalid(format!(
                        "fiber profile `{}` defined twice",
                        f.name
                    )));
                }
            }
            cfg.fibers = fibers;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.grid.channel_spacing_ghz > 0.0) || !(self.grid.anchor_frequency_thz > 0.0) {
            return Err(ConfigError::Invalid(
                "grid anchor and spacing must be positive".into(),
            ));
        }
        let violations = self.quantum.validate();
        if !violations.is_empty() {
            return Err(ConfigError::Invalid(format!(
                "quantum channel spec: {violations:?}"
            )));
        }
        for f in &self.fibers {
            let violations = f.validate();
            if !violations.is_empty() {
                return Err(ConfigError::Invalid(format!(
                    "fiber profile `{}`: {violations:?}",
                    f.name
                )));
            }
        }
        if self.fibers.is_empty() {
            return Err(ConfigError::Invalid("no fiber profiles defined".into()));
        }
        let c = &self.campaign;
        if c.channel_counts.is_empty()
            || c.tp_train_dbm.is_empty()
            || c.tp_validation_dbm.is_empty()
        {
            return Err(ConfigError::Invalid(
                "campaign sweep lists must be non-empty".into(),
            ));
        }
        if c.tp_train_dbm
            .iter()
            .any(|tp| c.tp_validation_dbm.contains(tp))
        {
            return Err(ConfigError::Invalid(
                "training and validation TP values must be disjoint".into(),
            ));
        }
        Ok(())
    }

    /// Renders the effective configuration back out, for run reproducibility.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str("[grid]\n");
        out.push_str(&format!(
            "anchor_frequency_thz = {:?}\nchannel_spacing_ghz = {:?}\n\n",
            self.grid.anchor_frequency_thz, self.grid.channel_spacing_ghz
        ));
        out.push_str("[quantum]\n");
        out.push_str(&format!(
            "center_wavelength_nm = {:?}\nfilter_bandwidth_ghz = {:?}\n\n",
            self.quantum.center_wavelength_nm, self.quantum.filter_bandwidth_ghz
        ));
        let d = &self.quantum.detector;
        out.push_str("[detector]\n");
        out.push_str(&format!(
            "detection_efficiency = {:?}\nintrinsic_dark_count_probability = {:?}\ngate_rate_hz = {:?}\ndetector_error_rate = {:?}\n\n",
            d.detection_efficiency,
            d.intrinsic_dark_count_probability,
            d.gate_rate_hz,
            d.detector_error_rate
        ));
        let p = &self.physics;
        out.push_str("[physics]\n");
        out.push_str(&format!(
            "mean_photon_number = {:?}\nsift_factor = {:?}\nase_floor_rate_per_channel = {:?}\nleakage_rate_per_mw = {:?}\nleakage_decay_ghz = {:?}\nlabel_jitter_sigma = {:?}\n\n",
            p.mean_photon_number,
            p.sift_factor,
            p.ase_floor_rate_per_channel,
            p.leakage_rate_per_mw,
            p.leakage_decay_ghz,
            p.label_jitter_sigma
        ));
        for f in &self.fibers {
            out.push_str(&format!("[fiber.{}]\n", f.name));
            out.push_str(&format!(
                "length_km = {:?}\nend_to_end_loss_db = {:?}\nraman_coefficient = {:?}\nfwm_efficiency = {:?}\n\n",
                f.length_km, f.end_to_end_loss_db, f.raman_coefficient, f.fwm_efficiency
            ));
        }
        let c = &self.campaign;
        out.push_str("[campaign]\n");
        out.push_str(&format!(
            "channel_counts = {}\n",
            join_usize(&c.channel_counts)
        ));
        out.push_str(&format!(
            "straddle_spacings_ghz = {}\n",
            join_f64(&c.straddle_spacings_ghz)
        ));
        out.push_str(&format!(
            "block_offsets_ghz = {}\n",
            join_f64(&c.block_offsets_ghz)
        ));
        out.push_str(&format!(
            "block_spacings_ghz = {}\n",
            join_f64(&c.block_spacings_ghz)
        ));
        out.push_str(&format!("tp_train_dbm = {}\n", join_f64(&c.tp_train_dbm)));
        out.push_str(&format!(
            "tp_validation_dbm = {}\n",
            join_f64(&c.tp_validation_dbm)
        ));
        out.push_str(&format!("set_count = {}\n", c.set_count));
        out.push_str(&format!("train_per_set = {}\n", c.train_per_set));
        out.push_str(&format!("validation_per_set = {}\n", c.validation_per_set));
        out
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn apply_grid(grid: &mut GridSpec, section: &Section) -> Result<(), ConfigError> {
    for (key, value) in &section.entries {
        match key.as_str() {
            "anchor_frequency_thz" => grid.anchor_frequency_thz = parse_f64("grid", key, value)?,
            "channel_spacing_ghz" => grid.channel_spacing_ghz = parse_f64("grid", key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: "grid".into(),
                    key: key.clone(),
                })
            }
        }
    }
    Ok(())
}

fn apply_quantum(q: &mut QuantumChannelSpec, section: &Section) -> Result<(), ConfigError> {
    for (key, value) in &section.entries {
        match key.as_str() {
            "center_wavelength_nm" => q.center_wavelength_nm = parse_f64("quantum", key, value)?,
            "filter_bandwidth_ghz" => q.filter_bandwidth_ghz = parse_f64("quantum", key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: "quantum".into(),
                    key: key.clone(),
                })
            }
        }
    }
    Ok(())
}

fn apply_detector(d: &mut DetectorModel, section: &Section) -> Result<(), ConfigError> {
    for (key, value) in &section.entries {
        let v = parse_f64("detector", key, value)?;
        match key.as_str() {
            "detection_efficiency" => d.detection_efficiency = v,
            "intrinsic_dark_count_probability" => d.intrinsic_dark_count_probability = v,
            "gate_rate_hz" => d.gate_rate_hz = v,
            "detector_error_rate" => d.detector_error_rate = v,
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: "detector".into(),
                    key: key.clone(),
                })
            }
        }
    }
    Ok(())
}

fn apply_physics(p: &mut PhysicsConstants, section: &Section) -> Result<(), ConfigError> {
    for (key, value) in &section.entries {
        let v = parse_f64("physics", key, value)?;
        match key.as_str() {
            "mean_photon_number" => p.mean_photon_number = v,
            "sift_factor" => p.sift_factor = v,
            "ase_floor_rate_per_channel" => p.ase_floor_rate_per_channel = v,
            "leakage_rate_per_mw" => p.leakage_rate_per_mw = v,
            "leakage_decay_ghz" => p.leakage_decay_ghz = v,
            "label_jitter_sigma" => p.label_jitter_sigma = v,
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: "physics".into(),
                    key: key.clone(),
                })
            }
        }
    }
    Ok(())
}

fn apply_campaign(c: &mut CampaignConfig, section: &Section) -> Result<(), ConfigError> {
    for (key, value) in &section.entries {
        match key.as_str() {
            "channel_counts" => c.channel_counts = parse_usize_list("campaign", key, value)?,
            "straddle_spacings_ghz" => {
                c.straddle_spacings_ghz = parse_f64_list("campaign", key, value)?
            }
            "block_offsets_ghz" => c.block_offsets_ghz = parse_f64_list("campaign", key, value)?,
            "block_spacings_ghz" => c.block_spacings_ghz = parse_f64_list("campaign", key, value)?,
            "tp_train_dbm" => c.tp_train_dbm = parse_f64_list("campaign", key, value)?,
            "tp_validation_dbm" => c.tp_validation_dbm = parse_f64_list("campaign", key, value)?,
            "set_count" | "train_per_set" | "validation_per_set" => {
                let v: usize = value.parse().map_err(|_| ConfigError::InvalidNumber {
                    section: "campaign".into(),
                    key: key.clone(),
                    value: value.clone(),
                })?;
                match key.as_str() {
                    "set_count" => c.set_count = v,
                    "train_per_set" => c.train_per_set = v,
                    _ => c.validation_per_set = v,
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: "campaign".into(),
                    key: key.clone(),
                })
            }
        }
    }
    Ok(())
}

fn parse_fiber(name: &str, section: &Section) -> Result<FiberProfile, ConfigError> {
    if name.is_empty() {
        return Err(ConfigError::Invalid("fiber profile with empty name".into()));
    }
    let sec = format!("fiber.{name}");
    let mut fiber = FiberProfile {
        name: name.to_string(),
        length_km: f64::NAN,
        end_to_end_loss_db: f64::NAN,
        raman_coefficient: f64::NAN,
        fwm_efficiency: f64::NAN,
    };
    for (key, value) in &section.entries {
        let v = parse_f64(&sec, key, value)?;
        match key.as_str() {
            "length_km" => fiber.length_km = v,
            "end_to_end_loss_db" => fiber.end_to_end_loss_db = v,
            "raman_coefficient" => fiber.raman_coefficient = v,
            "fwm_efficiency" => fiber.fwm_efficiency = v,
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: sec,
                    key: key.clone(),
                })
            }
        }
    }
    for (field, v) in [
        ("length_km", fiber.length_km),
        ("end_to_end_loss_db", fiber.end_to_end_loss_db),
        ("raman_coefficient", fiber.raman_coefficient),
        ("fwm_efficiency", fiber.fwm_efficiency),
    ] {
        if v.is_nan() {
            return Err(ConfigError::InvalidValue {
                section: sec.clone(),
                key: field.to_string(),
                message: "missing".into(),
            });
        }
    }
    Ok(fiber)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_echo_round_trips() {
        let cfg = AppConfig::default();
        cfg.validate().unwrap();
        let parsed = AppConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn default_fibers_match_link_profiles() {
        let cfg = AppConfig::default();
        assert_eq!(cfg.fibers.len(), 3);
        assert_eq!(cfg.fibers[0].end_to_end_loss_db, 9.5);
        assert_eq!(cfg.fibers[1].end_to_end_loss_db, 10.2);
        assert_eq!(cfg.fibers[2].length_km, 8.6);
    }

    #[test]
    fn fiber_sections_replace_defaults() {
        let text = "[fiber.test]\nlength_km = 2.0\nend_to_end_loss_db = 5.0\nraman_coefficient = 1e-13\nfwm_efficiency = 1e-7\n";
        let cfg = AppConfig::parse(text).unwrap();
        assert_eq!(cfg.fibers.len(), 1);
        assert_eq!(cfg.fibers[0].name, "test");
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        assert!(matches!(
            AppConfig::parse("[grid]\nbogus = 1\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            AppConfig::parse("[nope]\n"),
            Err(ConfigError::UnknownSection(_))
        ));
        assert!(matches!(
            AppConfig::parse("key = 1\n"),
            Err(ConfigError::KeyOutsideSection { .. })
        ));
        assert!(matches!(
            AppConfig::parse("[grid]\nanchor_frequency_thz = x\n"),
            Err(ConfigError::InvalidNumber { .. })
        ));
    }

    #[test]
    fn overlapping_tp_pools_rejected() {
        let text = "[campaign]\ntp_train_dbm = -20,-19\ntp_validation_dbm = -19\n";
        assert!(matches!(
            AppConfig::parse(text),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn incomplete_fiber_rejected() {
        let text = "[fiber.x]\nlength_km = 1.0\n";
        assert!(matches!(
            AppConfig::parse(text),
            Err(ConfigError::InvalidValue { .. })
        ));
    }
}
