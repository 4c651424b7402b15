//! Frozen oracle outputs for reference link states. These pin the noise and
//! key-rate model: any change to the physics constants or formulas shows up
//! as a diff against the fixture, which must then be regenerated on purpose.

use qkdcoex::config::AppConfig;
use qkdcoex::grid::ClassicalChannelSet;
use qkdcoex::physics::evaluate_link;

const FIXTURE: &str = include_str!("fixtures/physics_golden_v1.txt");

/// Straddling allocation at +-offsets (GHz) around the quantum carrier.
fn straddle(cfg: &AppConfig, offsets_ghz: &[f64], power_dbm: f64) -> ClassicalChannelSet {
    let f_q = cfg.quantum.center_frequency_thz();
    let mut freqs: Vec<f64> = offsets_ghz
        .iter()
        .flat_map(|o| [f_q - o * 1e-3, f_q + o * 1e-3])
        .collect();
    freqs.sort_by(f64::total_cmp);
    let n = freqs.len();
    ClassicalChannelSet::new(freqs, vec![power_dbm; n]).unwrap()
}

fn render_golden() -> String {
    let cfg = AppConfig::default();
    let fiber = |name: &str| cfg.fibers.iter().find(|f| f.name == name).unwrap();
    let mut out = String::from("# case total_rate skr qber\n");
    let mut case = |name: &str, set: &ClassicalChannelSet, fiber_name: &str| {
        let perf = evaluate_link(set, &cfg.quantum, fiber(fiber_name), &cfg.physics);
        out.push_str(&format!(
            "{name} {:?} {:?} {:?}\n",
            perf.noise.total_rate, perf.skr, perf.qber
        ));
    };

    // dense 8-channel straddle: FWM products land inside the quantum filter
    let dense = straddle(&cfg, &[100.0, 200.0, 300.0, 400.0], -24.0);
    case("dense-straddle-lab", &dense, "lab");
    case("dense-straddle-city", &dense, "city");

    // sparse 4-channel straddle: the benign initial allocation
    let sparse = straddle(&cfg, &[200.0, 400.0], -24.0);
    case("sparse-straddle-lab", &sparse, "lab");

    // single strong channel: Raman- and leakage-dominated
    let f_q = cfg.quantum.center_frequency_thz();
    let single = ClassicalChannelSet::new(vec![f_q + 0.2], vec![-15.0]).unwrap();
    case("single-channel-campus", &single, "campus");

    // quiet link: detector floor only
    case("no-classical-lab", &ClassicalChannelSet::empty(), "lab");

    out
}

#[test]
fn oracle_matches_frozen_fixture() {
    let computed = render_golden();
    assert_eq!(
        computed, FIXTURE,
        "oracle output diverged from fixture; computed:\n{computed}"
    );
}
