//! End-to-end acceptance suite. Each criterion prints exactly one
//! `ACCEPTANCE n <name>: pass|FAIL` line; a FAIL also fails the test.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qkdcoex::config::AppConfig;
use qkdcoex::controller::{
    replayed_actions, run_scenario, ActionKind, ScenarioScript, DEFAULT_SCENARIO,
};
use qkdcoex::dataset::{generate_campaign, DatasetBundle, FEATURE_COUNT};
use qkdcoex::ml::{
    compare_models, fit_xy, ModelParams, ModelSpec, PredictorSet, Target,
};
use qkdcoex::physics::{
    enumerate_fwm_products, fwm_guard_frequencies, performance_from_rates,
};
use qkdcoex::wire::{replay, RecordKind, RecordLog, SssConfigMessage};

const CAMPAIGN_SEED: u64 = 7;

fn campaign() -> &'static DatasetBundle {
    static BUNDLE: OnceLock<DatasetBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        generate_campaign(&AppConfig::default(), CAMPAIGN_SEED)
            .expect("default campaign generates")
    })
}

fn criterion(number: u8, name: &str, body: impl FnOnce()) {
    let outcome = catch_unwind(AssertUnwindSafe(body));
    match outcome {
        Ok(()) => println!("ACCEPTANCE {number} {name}: pass"),
        Err(panic) => {
            println!("ACCEPTANCE {number} {name}: FAIL");
            resume_unwind(panic);
        }
    }
}

fn random_frequencies(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // distinct frequencies on a fine grid so products are well separated
    let mut freqs = std::collections::BTreeSet::new();
    while freqs.len() < n {
        freqs.insert(rng.gen_range(0..40_000i64));
    }
    freqs.iter().map(|&f| 191.0 + f as f64 * 1e-4).collect()
}

#[test]
fn acceptance_1_fwm_count_law() {
    criterion(1, "fwm-count-law", || {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for n in 1..=10usize {
            let freqs = random_frequencies(&mut rng, n);
            let products = enumerate_fwm_products(&freqs).unwrap();
            let expected = (n * n * n - n * n) / 2;
            assert_eq!(products.len(), expected, "n = {n}");
        }
        let freqs = random_frequencies(&mut rng, 8);
        assert_eq!(enumerate_fwm_products(&freqs).unwrap().len(), 224);
    });
}

#[test]
fn acceptance_2_guard_band_law() {
    criterion(2, "guard-band-law", || {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=8usize);
            let freqs = random_frequencies(&mut rng, n);
            let f_min = freqs.first().copied().unwrap();
            let f_max = freqs.last().copied().unwrap();
            let (lo, hi) = fwm_guard_frequencies(f_min, f_max).unwrap();
            for p in enumerate_fwm_products(&freqs).unwrap() {
                assert!(
                    p.frequency_thz >= lo - 1e-9 && p.frequency_thz <= hi + 1e-9,
                    "product {} outside [{lo}, {hi}]",
                    p.frequency_thz
                );
            }
        }
    });
}

#[test]
fn acceptance_3_dataset_fidelity() {
    criterion(3, "dataset-fidelity", || {
        let bundle = campaign();
        assert_eq!(bundle.training.len(), 5);
        assert_eq!(bundle.validation.len(), 5);
        for set in &bundle.training {
            assert_eq!(set.len(), 164);
        }
        for set in &bundle.validation {
            assert_eq!(set.len(), 43);
        }
        for inst in bundle.training.iter().chain(&bundle.validation).flatten() {
            assert_eq!(inst.features.len(), FEATURE_COUNT);
        }
        // disjoint by construction: training and validation draw from
        // disjoint total-launch-power pools
        let powers = |sets: &[Vec<qkdcoex::dataset::Instance>]| -> std::collections::BTreeSet<i64> {
            sets.iter()
                .flatten()
                .map(|i| (i.features[2] * 1000.0).round() as i64)
                .collect()
        };
        let train_powers = powers(&bundle.training);
        let val_powers = powers(&bundle.validation);
        assert!(train_powers.is_disjoint(&val_powers));
        // deterministic under the seed
        let again = generate_campaign(&AppConfig::default(), CAMPAIGN_SEED).unwrap();
        assert_eq!(&again, bundle);
    });
}

#[test]
fn acceptance_4_regressor_oracles() {
    criterion(4, "regressor-oracles", || {
        // planted linear relation with a nuisance feature
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.25, ((i * 3) % 7) as f64])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 4.0 * r[0] - 2.5).collect();

        let ls = fit_xy(&ModelSpec::least_squares(), &x, &y).unwrap();
        match &ls.params {
            ModelParams::Linear {
                intercept,
                coefficients,
            } => {
                assert!((intercept + 2.5).abs() < 1e-6);
                assert!((coefficients[0] - 4.0).abs() < 1e-6);
                assert!(coefficients[1].abs() < 1e-6);
            }
            _ => unreachable!(),
        }

        let ridge = fit_xy(&ModelSpec::ridge(0.0), &x, &y).unwrap();
        for probe in &x {
            let a = ls.predict(probe).unwrap();
            let b = ridge.predict(probe).unwrap();
            assert!((a - b).abs() < 1e-6, "ridge(0) {b} vs LS {a}");
        }

        let lasso = fit_xy(&ModelSpec::lasso(1e9), &x, &y).unwrap();
        match &lasso.params {
            ModelParams::Linear { coefficients, .. } => {
                assert!(coefficients.iter().all(|c| *c == 0.0));
            }
            _ => unreachable!(),
        }

        let knn = fit_xy(&ModelSpec::k_neighbors(1), &x, &y).unwrap();
        for (probe, target) in x.iter().zip(&y) {
            assert_eq!(knn.predict(probe).unwrap(), *target);
        }

        let forest = fit_xy(&ModelSpec::random_forest(9), &x, &y).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for probe in [[-5.0, 0.0], [2.0, 3.0], [50.0, 6.0]] {
            let p = forest.predict(&probe).unwrap();
            assert!(p >= lo && p <= hi, "forest {p} outside [{lo}, {hi}]");
        }
    });
}

#[test]
fn acceptance_5_model_comparison() {
    criterion(5, "model-comparison", || {
        let table = compare_models(campaign(), &ModelSpec::suite(CAMPAIGN_SEED)).unwrap();
        assert_eq!(table.model_rows().len(), 5);
        let kinds: Vec<&str> = table.model_rows().iter().map(|r| r.model.as_str()).collect();
        assert_eq!(kinds, ["RF", "LS", "KN", "Lasso", "Ridge"]);
        let baseline = table.baseline().clone();
        for row in table.model_rows() {
            for target in Target::ALL {
                assert!(
                    row.for_target(target) < baseline.for_target(target),
                    "{} does not beat baseline on {}",
                    row.model,
                    target.label()
                );
            }
        }
        print!("{}", table.render_text());
    });
}

fn trained_predictors() -> PredictorSet {
    let training: Vec<_> = campaign().training.iter().flatten().cloned().collect();
    PredictorSet::fit(&ModelSpec::random_forest(CAMPAIGN_SEED), &training)
        .expect("forest fits the campaign")
}

#[test]
fn acceptance_6_scenario_reproduction() {
    criterion(6, "scenario-reproduction", || {
        let cfg = AppConfig::default();
        let models = trained_predictors();
        let script = ScenarioScript::parse(DEFAULT_SCENARIO).unwrap();
        let report = run_scenario(&script, &models, &cfg, None).unwrap();
        assert_eq!(report.stages.len(), 4);
        assert!(report.stages.iter().all(|s| !s.expect_mismatch));
        assert!(matches!(report.stages[0].action.kind, ActionKind::Keep));
        match &report.stages[1].action.kind {
            ActionKind::Reallocate { plan } => {
                assert_eq!(plan, &script.plans[0].channel_indices)
            }
            other => panic!("stage1 action {other:?}"),
        }
        match &report.stages[2].action.kind {
            ActionKind::Reallocate { plan } => {
                assert_eq!(plan, &script.plans[1].channel_indices)
            }
            other => panic!("stage2 action {other:?}"),
        }
        assert!(matches!(report.stages[3].action.kind, ActionKind::Keep));
        // the reallocation pays off in oracle-measured in-band noise
        assert!(
            report.stages[2].monitored.noise.total_rate
                < report.stages[1].monitored.noise.total_rate
        );
    });
}

#[test]
fn acceptance_7_wire_round_trip() {
    criterion(7, "wire-round-trip", || {
        let canonical =
            b"SSS1 id=9 ts=1700000000000 in=A out=4 lambda=1554.134 width=38.0";
        let message = SssConfigMessage::decode(canonical).unwrap();
        assert_eq!(message.in_port, "A");
        assert_eq!(message.out_port, "4");
        assert_eq!(message.center_wavelength_nm, 1554.134);
        assert_eq!(message.filter_width_ghz, 38.0);
        assert_eq!(message.encode(), canonical);

        let mut rng = ChaCha8Rng::seed_from_u64(707);
        for _ in 0..1000 {
            let original = SssConfigMessage::new(
                rng.gen(),
                rng.gen(),
                &format!("in{}", rng.gen_range(0..32u32)),
                &format!("out{}", rng.gen_range(0..32u32)),
                rng.gen_range(1530.0..1565.0),
                rng.gen_range(0.1..200.0),
            )
            .unwrap();
            let bytes = original.encode();
            let decoded = SssConfigMessage::decode(&bytes).unwrap();
            assert_eq!(decoded, original);
            assert_eq!(decoded.encode(), bytes);
        }

        // replaying the scenario log reproduces the action sequence
        let cfg = AppConfig::default();
        let models = trained_predictors();
        let script = ScenarioScript::parse(DEFAULT_SCENARIO).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("records.log");
        let mut log = RecordLog::open(&log_path).unwrap();
        let report = run_scenario(&script, &models, &cfg, Some(&mut log)).unwrap();
        drop(log);
        let replayed = replay(&log_path).unwrap();
        assert!(replayed.truncated_tail.is_none());
        let actions = replayed_actions(&replayed.records).unwrap();
        let live: Vec<_> = report.stages.iter().map(|s| s.action.clone()).collect();
        assert_eq!(actions, live);
        // every recorded switch message decodes
        for record in &replayed.records {
            if record.kind == RecordKind::Message {
                SssConfigMessage::decode(record.payload.as_bytes()).unwrap();
            }
        }
    });
}

#[test]
fn acceptance_8_physics_sanity() {
    criterion(8, "physics-sanity", || {
        let cfg = AppConfig::default();
        let fiber = &cfg.fibers[0];
        let mut previous_skr = f64::INFINITY;
        for step in 0..50 {
            let injected = step as f64 * 120.0;
            let perf =
                performance_from_rates(injected, 0.0, 0.0, 0.0, &cfg.quantum, fiber, &cfg.physics);
            assert!(
                perf.skr <= previous_skr + 1e-9,
                "SKR rose from {previous_skr} to {} at {injected}/s",
                perf.skr
            );
            previous_skr = perf.skr;
            // zero-rate threshold: 1 - 2 H2(e*) = 0 at e* ~ 0.1100
            if perf.qber >= 0.1101 {
                assert_eq!(perf.skr, 0.0, "SKR > 0 at QBER {}", perf.qber);
            }
        }
    });
}
