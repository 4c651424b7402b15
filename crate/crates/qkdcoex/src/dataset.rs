//! Synthetic data-collection campaign: builds training/validation instances
//! over the configured fiber profiles, channel counts and power sweep, with
//! labels produced by the physics oracle.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::AppConfig;
use crate::grid::{
    validate_channel_set, ClassicalChannelSet, FiberProfile, QuantumChannelSpec,
};
use crate::physics::{enumerate_fwm_products, evaluate_link};

pub const FEATURE_COUNT: usize = 7;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "n",
    "mean_power_dbm",
    "total_power_dbm",
    "min_spacing_ghz",
    "min_quantum_distance_ghz",
    "fwm_inband_count",
    "fiber_loss_db",
];
pub const TARGET_NAMES: [&str; 3] = ["noise_rate", "skr", "qber"];

/// Stand-in for `-inf` powers when no channel is active.
pub const POWER_FLOOR_DBM: f64 = -60.0;
/// Sentinel for spacing/distance features when undefined (wider than C-band).
pub const SENTINEL_GHZ: f64 = 4000.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("campaign config provides only {available} distinct {pool} combinations, need {needed}")]
    InsufficientCombinations {
        pool: &'static str,
        available: usize,
        needed: usize,
    },
    #[error("generated channel set failed validation: {0:?}")]
    InvalidChannelSet(Vec<crate::grid::Violation>),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: missing column `{column}` in header")]
    MissingColumn { column: String, path: String },
    #[error("{path}: unexpected column `{column}` in header")]
    UnexpectedColumn { column: String, path: String },
    #[error("{path}, row {row}: {message}")]
    MalformedRow {
        path: String,
        row: usize,
        message: String,
    },
    #[error("channel companion file: {0}")]
    BadCompanion(String),
    #[error("instance table has {rows} rows but companion stores {channels} channel sets")]
    RowChannelMismatch { rows: usize, channels: usize },
}

/// One labelled observation: feature vector, oracle targets, provenance and
/// the full channel set the features were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: [f64; FEATURE_COUNT],
    pub noise_rate: f64,
    pub skr: f64,
    pub qber: f64,
    pub fiber: String,
    pub seed: u64,
    pub channels: ClassicalChannelSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub training: Vec<Vec<Instance>>,
    pub validation: Vec<Vec<Instance>>,
}

impl DatasetBundle {
    pub fn set_count(&self) -> usize {
        self.training.len()
    }
}

/// Order-invariant 7-feature encoding of one link state.
pub fn featurize(
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
) -> [f64; FEATURE_COUNT] {
    let n = set.n();
    let mean_power = if n == 0 {
        POWER_FLOOR_DBM
    } else {
        set.powers_dbm.iter().sum::<f64>() / n as f64
    };
    let total_power = if n == 0 {
        POWER_FLOOR_DBM
    } else {
        set.total_power_dbm
    };
    let min_spacing = set
        .spacings_ghz()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .min(SENTINEL_GHZ);
    let f_q = quantum.center_frequency_thz();
    let min_distance = set
        .center_frequencies_thz
        .iter()
        .map(|&f| (f - f_q).abs() * 1e3)
        .fold(f64::INFINITY, f64::min)
        .min(SENTINEL_GHZ);
    let (lo, hi) = quantum.filter_band_thz();
    let inband_count = enumerate_fwm_products(&set.center_frequencies_thz)
        .map(|products| {
            products
                .iter()
                .filter(|p| p.frequency_thz >= lo && p.frequency_thz <= hi)
                .count()
        })
        .unwrap_or(0);
    [
        n as f64,
        mean_power,
        total_power,
        min_spacing,
        min_distance,
        inband_count as f64,
        fiber.end_to_end_loss_db,
    ]
}

/// How the classical carriers are laid out relative to the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Placement {
    /// Symmetric straddle at +/- k*spacing, k = 1..n/2. Even n only.
    /// Mixing products of a symmetric straddle land on the quantum channel.
    Straddle { spacing_ghz: f64 },
    /// One-sided comb starting `offset` away from the quantum channel.
    Block {
        offset_ghz: f64,
        spacing_ghz: f64,
        above: bool,
    },
}

#[derive(Debug, Clone, Copy)]
struct Combo {
    fiber_idx: usize,
    n: usize,
    placement: Placement,
    tp_dbm: f64,
}

fn placements_for(n: usize, cfg: &AppConfig) -> Vec<Placement> {
    let c = &cfg.campaign;
    let mut out = Vec::new();
    if n > 1 && n % 2 == 0 {
        for &s in &c.straddle_spacings_ghz {
            out.push(Placement::Straddle { spacing_ghz: s });
        }
    }
    // a single channel has no intra-block spacing; avoid duplicate layouts
    let spacings: &[f64] = if n == 1 {
        &c.block_spacings_ghz[..1]
    } else {
        &c.block_spacings_ghz
    };
    for &offset in &c.block_offsets_ghz {
        for &spacing in spacings {
            for above in [false, true] {
                out.push(Placement::Block {
                    offset_ghz: offset,
                    spacing_ghz: spacing,
                    above,
                });
            }
        }
    }
    out
}

fn build_channels(
    combo: &Combo,
    quantum: &QuantumChannelSpec,
) -> Result<ClassicalChannelSet, DatasetError> {
    let f_q = quantum.center_frequency_thz();
    let per_channel_dbm = combo.tp_dbm - 10.0 * (combo.n as f64).log10();
    let mut freqs: Vec<f64> = match combo.placement {
        Placement::Straddle { spacing_ghz } => (1..=combo.n / 2)
            .flat_map(|k| {
                let d = k as f64 * spacing_ghz * 1e-3;
                [f_q - d, f_q + d]
            })
            .collect(),
        Placement::Block {
            offset_ghz,
            spacing_ghz,
            above,
        } => (0..combo.n)
            .map(|i| {
                let d = (offset_ghz + i as f64 * spacing_ghz) * 1e-3;
                if above {
                    f_q + d
                } else {
                    f_q - d
                }
            })
            .collect(),
    };
    freqs.sort_by(f64::total_cmp);
    let set = ClassicalChannelSet::new(freqs, vec![per_channel_dbm; combo.n])
        .expect("lengths match by construction");
    let violations = validate_channel_set(&set, quantum);
    if !violations.is_empty() {
        return Err(DatasetError::InvalidChannelSet(violations));
    }
    Ok(set)
}

fn label_instance(
    combo: &Combo,
    cfg: &AppConfig,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, DatasetError> {
    let fiber = &cfg.fibers[combo.fiber_idx];
    let channels = build_channels(combo, &cfg.quantum)?;
    let perf = evaluate_link(&channels, &cfg.quantum, fiber, &cfg.physics);
    let mut noise_rate = perf.noise.total_rate;
    let mut skr = perf.skr;
    let mut qber = perf.qber;
    let sigma = cfg.physics.label_jitter_sigma;
    if sigma > 0.0 {
        let jitter = |v: f64, rng: &mut ChaCha8Rng| v * (1.0 + sigma * gaussian(rng));
        noise_rate = jitter(noise_rate, rng).max(0.0);
        skr = jitter(skr, rng).max(0.0);
        qber = jitter(qber, rng).clamp(0.0, 0.5);
    }
    Ok(Instance {
        features: featurize(&channels, &cfg.quantum, fiber),
        noise_rate,
        skr,
        qber,
        fiber: fiber.name.clone(),
        seed,
        channels,
    })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Deterministic (per seed) campaign over the configured sweep. Training and
/// validation pools differ in total launch power, so the two are disjoint.
pub fn generate_campaign(cfg: &AppConfig, seed: u64) -> Result<DatasetBundle, DatasetError> {
    let c = &cfg.campaign;
    let mut train_pool = Vec::new();
    let mut val_pool = Vec::new();
    for fiber_idx in 0..cfg.fibers.len() {
        for &n in &c.channel_counts {
            for placement in placements_for(n, cfg) {
                for &tp in &c.tp_train_dbm {
                    train_pool.push(Combo {
                        fiber_idx,
                        n,
                        placement,
                        tp_dbm: tp,
                    });
                }
                for &tp in &c.tp_validation_dbm {
                    val_pool.push(Combo {
                        fiber_idx,
                        n,
                        placement,
                        tp_dbm: tp,
                    });
                }
            }
        }
    }
    let per_set = c.train_per_set + c.validation_per_set;
    if train_pool.len() + val_pool.len() < per_set {
        return Err(DatasetError::InsufficientCombinations {
            pool: "total",
            available: train_pool.len() + val_pool.len(),
            needed: per_set,
        });
    }
    if train_pool.len() < c.train_per_set {
        return Err(DatasetError::InsufficientCombinations {
            pool: "training",
            available: train_pool.len(),
            needed: c.train_per_set,
        });
    }
    if val_pool.len() < c.validation_per_set {
        return Err(DatasetError::InsufficientCombinations {
            pool: "validation",
            available: val_pool.len(),
            needed: c.validation_per_set,
        });
    }

    let mut training = Vec::with_capacity(c.set_count);
    let mut validation = Vec::with_capacity(c.set_count);
    for set_idx in 0..c.set_count {
        let mut rng =
            ChaCha8Rng::seed_from_u64(
                seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(set_idx as u64)),
            );
        let mut train_combos = train_pool.clone();
        train_combos.shuffle(&mut rng);
        train_combos.truncate(c.train_per_set);
        let mut val_combos = val_pool.clone();
        val_combos.shuffle(&mut rng);
        val_combos.truncate(c.validation_per_set);

        let mut train_set = Vec::with_capacity(c.train_per_set);
        for combo in &train_combos {
            train_set.push(label_instance(combo, cfg, seed, &mut rng)?);
        }
        let mut val_set = Vec::with_capacity(c.validation_per_set);
        for combo in &val_combos {
            val_set.push(label_instance(combo, cfg, seed, &mut rng)?);
        }
        training.push(train_set);
        validation.push(val_set);
    }
    Ok(DatasetBundle {
        training,
        validation,
    })
}

const CSV_HEADER: [&str; 14] = [
    "set",
    "set_index",
    "n",
    "mean_power_dbm",
    "total_power_dbm",
    "min_spacing_ghz",
    "min_quantum_distance_ghz",
    "fwm_inband_count",
    "fiber_loss_db",
    "noise_rate",
    "skr",
    "qber",
    "fiber",
    "seed",
];

pub const INSTANCES_FILE: &str = "instances.csv";
pub const CHANNELS_FILE: &str = "channels.json";

#[derive(Debug, Serialize, Deserialize)]
struct ChannelCompanion {
    format_version: u32,
    channels: Vec<ClassicalChannelSet>,
}

/// Writes the feature/target table plus the companion channel-set file.
pub fn save(bundle: &DatasetBundle, dir: &Path) -> Result<(), DatasetError> {
    let mut csv = String::new();
    csv.push_str(&CSV_HEADER.join(","));
    csv.push('\n');
    let mut channels = Vec::new();
    let write_row = |kind: &str, set_idx: usize, inst: &Instance, csv: &mut String| {
        let f = &inst.features;
        csv.push_str(&format!(
            "{kind},{set_idx},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{}\n",
            f[0],
            f[1],
            f[2],
            f[3],
            f[4],
            f[5],
            f[6],
            inst.noise_rate,
            inst.skr,
            inst.qber,
            inst.fiber,
            inst.seed
        ));
    };
    for (set_idx, set) in bundle.training.iter().enumerate() {
        for inst in set {
            write_row("train", set_idx, inst, &mut csv);
            channels.push(inst.channels.clone());
        }
    }
    for (set_idx, set) in bundle.validation.iter().enumerate() {
        for inst in set {
            write_row("validation", set_idx, inst, &mut csv);
            channels.push(inst.channels.clone());
        }
    }
    let csv_path = dir.join(INSTANCES_FILE);
    fs::write(&csv_path, csv).map_err(|source| DatasetError::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    let companion = ChannelCompanion {
        format_version: 1,
        channels,
    };
    let json_path = dir.join(CHANNELS_FILE);
    let json = serde_json::to_string(&companion)
        .map_err(|e| DatasetError::BadCompanion(e.to_string()))?;
    fs::write(&json_path, json).map_err(|source| DatasetError::Io {
        path: json_path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub kind: String,
    pub set_index: usize,
    pub features: [f64; FEATURE_COUNT],
    pub noise_rate: f64,
    pub skr: f64,
    pub qber: f64,
    pub fiber: String,
    pub seed: u64,
}

/// Parses the instance table. Exposed separately so untrusted input can be
/// checked without touching the filesystem.
pub fn parse_instances_csv(text: &str, path: &str) -> Result<Vec<CsvRow>, DatasetError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let columns: Vec<&str> = header.split(',').collect();
    for expected in CSV_HEADER {
        if !columns.contains(&expected) {
            return Err(DatasetError::MissingColumn {
                column: expected.to_string(),
                path: path.to_string(),
            });
        }
    }
    for present in &columns {
        if !CSV_HEADER.contains(present) {
            return Err(DatasetError::UnexpectedColumn {
                column: present.to_string(),
                path: path.to_string(),
            });
        }
    }
    if columns != CSV_HEADER {
        return Err(DatasetError::MalformedRow {
            path: path.to_string(),
            row: 1,
            message: "header columns out of order".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_HEADER.len() {
            return Err(DatasetError::MalformedRow {
                path: path.to_string(),
                row: row_no,
                message: format!("expected {} fields, got {}", CSV_HEADER.len(), fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64, DatasetError> {
            fields[i].parse().map_err(|_| DatasetError::MalformedRow {
                path: path.to_string(),
                row: row_no,
                message: format!("invalid number `{}` in column `{}`", fields[i], CSV_HEADER[i]),
            })
        };
        let kind = fields[0].to_string();
        if kind != "train" && kind != "validation" {
            return Err(DatasetError::MalformedRow {
                path: path.to_string(),
                row: row_no,
                message: format!("unknown set kind `{kind}`"),
            });
        }
        let set_index: usize = fields[1].parse().map_err(|_| DatasetError::MalformedRow {
            path: path.to_string(),
            row: row_no,
            message: format!("invalid set index `{}`", fields[1]),
        })?;
        let mut features = [0.0; FEATURE_COUNT];
        for (i, f) in features.iter_mut().enumerate() {
            *f = num(2 + i)?;
        }
        rows.push(CsvRow {
            kind,
            set_index,
            features,
            noise_rate: num(9)?,
            skr: num(10)?,
            qber: num(11)?,
            fiber: fields[12].to_string(),
            seed: fields[13].parse().map_err(|_| DatasetError::MalformedRow {
                path: path.to_string(),
                row: row_no,
                message: format!("invalid seed `{}`", fields[13]),
            })?,
        });
    }
    Ok(rows)
}

pub fn parse_channels_json(text: &str) -> Result<Vec<ClassicalChannelSet>, DatasetError> {
    let companion: ChannelCompanion =
        serde_json::from_str(text).map_err(|e| DatasetError::BadCompanion(e.to_string()))?;
    if companion.format_version != 1 {
        return Err(DatasetError::BadCompanion(format!(
            "unsupported format version {}",
            companion.format_version
        )));
    }
    Ok(companion.channels)
}

pub fn load(dir: &Path) -> Result<DatasetBundle, DatasetError> {
    let csv_path = dir.join(INSTANCES_FILE);
    let csv_text = fs::read_to_string(&csv_path).map_err(|source| DatasetError::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    let rows = parse_instances_csv(&csv_text, &csv_path.display().to_string())?;
    let json_path = dir.join(CHANNELS_FILE);
    let json_text = fs::read_to_string(&json_path).map_err(|source| DatasetError::Io {
        path: json_path.display().to_string(),
        source,
    })?;
    let channels = parse_channels_json(&json_text)?;
    if channels.len() != rows.len() {
        return Err(DatasetError::RowChannelMismatch {
            rows: rows.len(),
            channels: channels.len(),
        });
    }
    let set_count = rows.iter().map(|r| r.set_index + 1).max().unwrap_or(0);
    let mut training = vec![Vec::new(); set_count];
    let mut validation = vec![Vec::new(); set_count];
    for (row, chans) in rows.into_iter().zip(channels) {
        let inst = Instance {
            features: row.features,
            noise_rate: row.noise_rate,
            skr: row.skr,
            qber: row.qber,
            fiber: row.fiber,
            seed: row.seed,
            channels: chans,
        };
        if row.kind == "train" {
            training[row.set_index].push(inst);
        } else {
            validation[row.set_index].push(inst);
        }
    }
    Ok(DatasetBundle {
        training,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::wavelength_to_frequency;

    fn small_config() -> AppConfig {
        let mut cfg = AppConfig::default();
        cfg.campaign.set_count = 2;
        cfg.campaign.train_per_set = 20;
        cfg.campaign.validation_per_set = 8;
        cfg
    }

    #[test]
    fn featurize_empty_set_uses_sentinels() {
        let cfg = AppConfig::default();
        let f = featurize(
            &ClassicalChannelSet::empty(),
            &cfg.quantum,
            &cfg.fibers[0],
        );
        assert_eq!(
            f,
            [
                0.0,
                POWER_FLOOR_DBM,
                POWER_FLOOR_DBM,
                SENTINEL_GHZ,
                SENTINEL_GHZ,
                0.0,
                9.5
            ]
        );
    }

    #[test]
    fn featurize_inband_count_matches_brute_force() {
        let cfg = AppConfig::default();
        let f_q = wavelength_to_frequency(1551.90).unwrap();
        let freqs: Vec<f64> = (1..=4)
            .flat_map(|k| [f_q - 0.1 * k as f64, f_q + 0.1 * k as f64])
            .collect();
        let set = ClassicalChannelSet::from_pairs(
            freqs.iter().map(|&f| (f, -25.0)).collect(),
        )
        .unwrap();
        let f = featurize(&set, &cfg.quantum, &cfg.fibers[0]);
        // independent count over all product frequencies
        let (lo, hi) = cfg.quantum.filter_band_thz();
        let mut count = 0usize;
        let n = set.center_frequencies_thz.len();
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let fr = set.center_frequencies_thz[i] + set.center_frequencies_thz[j]
                        - set.center_frequencies_thz[k];
                    if fr >= lo && fr <= hi {
                        count += 1;
                    }
                }
            }
        }
        assert!(count > 0);
        assert_eq!(f[5], count as f64);
    }

    #[test]
    fn featurize_is_order_invariant() {
        let cfg = AppConfig::default();
        let sorted = ClassicalChannelSet::new(vec![193.0, 193.4], vec![-20.0, -22.0]).unwrap();
        let reordered =
            ClassicalChannelSet::from_pairs(vec![(193.4, -22.0), (193.0, -20.0)]).unwrap();
        assert_eq!(
            featurize(&sorted, &cfg.quantum, &cfg.fibers[0]),
            featurize(&reordered, &cfg.quantum, &cfg.fibers[0])
        );
    }

    #[test]
    fn campaign_is_deterministic_and_sized() {
        let cfg = small_config();
        let a = generate_campaign(&cfg, 7).unwrap();
        let b = generate_campaign(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.training.len(), 2);
        assert!(a.training.iter().all(|s| s.len() == 20));
        assert!(a.validation.iter().all(|s| s.len() == 8));
        let c = generate_campaign(&cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_channel_instances_have_no_fwm_feature() {
        let bundle = generate_campaign(&small_config(), 3).unwrap();
        for inst in bundle.training.iter().flatten() {
            if inst.features[0] == 1.0 {
                assert_eq!(inst.features[5], 0.0);
            }
        }
    }

    #[test]
    fn undersized_combination_space_rejected() {
        let mut cfg = AppConfig::default();
        cfg.campaign.tp_train_dbm = vec![-20.0];
        cfg.campaign.tp_validation_dbm = vec![-19.0];
        cfg.campaign.channel_counts = vec![1];
        cfg.campaign.block_offsets_ghz = vec![100.0];
        let err = generate_campaign(&cfg, 1).unwrap_err();
        assert!(matches!(
            err,
            DatasetError::InsufficientCombinations { .. }
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = generate_campaign(&small_config(), 11).unwrap();
        save(&bundle, dir.path()).unwrap();
        let loaded = load(dir.path()).unwrap();
        assert_eq!(loaded, bundle);
    }

    #[test]
    fn labels_match_oracle_after_reload() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let bundle = generate_campaign(&cfg, 5).unwrap();
        save(&bundle, dir.path()).unwrap();
        let loaded = load(dir.path()).unwrap();
        for inst in loaded.training.iter().flatten() {
            let fiber = cfg.fibers.iter().find(|f| f.name == inst.fiber).unwrap();
            let perf = evaluate_link(&inst.channels, &cfg.quantum, fiber, &cfg.physics);
            assert_eq!(inst.noise_rate, perf.noise.total_rate);
            assert_eq!(inst.skr, perf.skr);
            assert_eq!(inst.qber, perf.qber);
        }
    }

    #[test]
    fn missing_column_is_named() {
        let text = "set,set_index,n,mean_power_dbm,total_power_dbm,min_spacing_ghz,min_quantum_distance_ghz,fwm_inband_count,noise_rate,skr,qber,fiber,seed\n";
        let err = parse_instances_csv(text, "test.csv").unwrap_err();
        match err {
            DatasetError::MissingColumn { column, .. } => {
                assert_eq!(column, "fiber_loss_db")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_row_number() {
        let mut text = CSV_HEADER.join(",");
        text.push_str("\ntrain,0,1,-20,-20,100,100,0,9.5,1,1,bogus,lab,7\n");
        let err = parse_instances_csv(&text, "test.csv").unwrap_err();
        match err {
            DatasetError::MalformedRow { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
