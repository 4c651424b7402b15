//! SDN-application logic: ingest monitoring snapshots, consult the fitted
//! predictor, compare against thresholds, choose keep / reallocate / switch
//! path, and drive the staged reallocation scenario.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_f64, parse_sections, AppConfig, ConfigError};
use crate::dataset::featurize;
use crate::grid::{
    frequency_to_wavelength, validate_channel_set, ClassicalChannelSet, FiberProfile, GridSpec,
    QuantumChannelSpec, Violation,
};
use crate::ml::{MlError, PredictorSet};
use crate::physics::{evaluate_link, QkdPerformance};
use crate::wire::{LogError, Record, RecordKind, RecordLog, SssConfigMessage, WireError};

pub const DEFAULT_MONITOR_TOLERANCE_DB: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("no candidate paths supplied")]
    EmptyPaths,
    #[error("no reallocation plans supplied")]
    EmptyPlans,
    #[error("snapshot failed validation: {0}")]
    InvalidSnapshot(String),
    #[error("plan `{name}` has {plan_len} channels but the link carries {current}")]
    PlanLengthMismatch {
        name: String,
        plan_len: usize,
        current: usize,
    },
    #[error("plan `{name}` fails channel validation: {violations:?}")]
    InvalidPlan {
        name: String,
        violations: Vec<Violation>,
    },
    #[error("scenario references unknown plan `{0}`")]
    UnknownPlan(String),
    #[error("scenario stages out of order: `{found}` after `{previous}`")]
    StageOrdering { previous: String, found: String },
    #[error("scenario script: {0}")]
    Script(#[from] ConfigError),
    #[error("scenario script: {0}")]
    InvalidScript(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("record payload is not a valid action: {0}")]
    BadActionPayload(String),
}

/// Quality floor the controller defends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub min_skr: f64,
    pub max_qber: f64,
    pub max_noise_rate: f64,
}

impl Threshold {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.min_skr < 0.0 || !(self.max_qber > 0.0 && self.max_qber <= 0.5) {
            return Err(ControllerError::InvalidScript(format!(
                "threshold out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Observed link state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringSnapshot {
    pub timestamp_ms: u64,
    pub link_id: String,
    pub channels: ClassicalChannelSet,
    pub measured_powers_dbm: Vec<f64>,
}

impl MonitoringSnapshot {
    /// Checks the measured powers against nominal within the monitor
    /// tolerance, plus the channel-set invariants.
    pub fn validate(
        &self,
        quantum: &QuantumChannelSpec,
        tolerance_db: f64,
    ) -> Result<(), ControllerError> {
        let violations = validate_channel_set(&self.channels, quantum);
        if !violations.is_empty() {
            return Err(ControllerError::InvalidSnapshot(format!("{violations:?}")));
        }
        if self.measured_powers_dbm.len() != self.channels.n() {
            return Err(ControllerError::InvalidSnapshot(format!(
                "{} measured powers for {} channels",
                self.measured_powers_dbm.len(),
                self.channels.n()
            )));
        }
        for (i, (m, nom)) in self
            .measured_powers_dbm
            .iter()
            .zip(&self.channels.powers_dbm)
            .enumerate()
        {
            if (m - nom).abs() > tolerance_db {
                return Err(ControllerError::InvalidSnapshot(format!(
                    "channel {i}: measured {m} dBm vs nominal {nom} dBm exceeds {tolerance_db} dB"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedMetrics {
    pub noise_rate: f64,
    pub skr: f64,
    pub qber: f64,
}

impl PredictedMetrics {
    pub fn satisfies(&self, t: &Threshold) -> bool {
        self.skr >= t.min_skr && self.qber <= t.max_qber && self.noise_rate <= t.max_noise_rate
    }
}

/// Runs the three per-target models on the featurized link state.
pub fn predict_metrics(
    models: &PredictorSet,
    set: &ClassicalChannelSet,
    quantum: &QuantumChannelSpec,
    fiber: &FiberProfile,
) -> Result<PredictedMetrics, MlError> {
    let features = featurize(set, quantum, fiber);
    Ok(PredictedMetrics {
        noise_rate: models.noise.predict(&features)?,
        skr: models.skr.predict(&features)?,
        qber: models.qber.predict(&features)?,
    })
}

/// Named reallocation plan as grid channel indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReallocationPlan {
    pub name: String,
    pub channel_indices: Vec<u32>,
}

impl ReallocationPlan {
    /// Primary 8-channel reallocation target (ascending odd channels).
    pub fn plan_a() -> Self {
        Self {
            name: "a".into(),
            channel_indices: vec![75, 77, 79, 81, 83, 85, 87, 89],
        }
    }

    /// The same plan as published, with the out-of-pattern `70` kept as-is.
    pub fn plan_a_literal() -> Self {
        Self {
            name: "a-literal".into(),
            channel_indices: vec![75, 77, 70, 81, 83, 85, 87, 89],
        }
    }

    /// Backup plan for a more spectrum-fragmented path.
    pub fn plan_b() -> Self {
        Self {
            name: "b".into(),
            channel_indices: vec![33, 37, 41, 45, 49, 55, 59, 61],
        }
    }

    /// Materializes the plan on the grid, carrying over the given per-channel
    /// powers (sorted by frequency).
    pub fn to_channel_set(
        &self,
        grid: &GridSpec,
        powers_dbm: &[f64],
    ) -> Result<ClassicalChannelSet, ControllerError> {
        if powers_dbm.len() != self.channel_indices.len() {
            return Err(ControllerError::PlanLengthMismatch {
                name: self.name.clone(),
                plan_len: self.channel_indices.len(),
                current: powers_dbm.len(),
            });
        }
        let mut freqs: Vec<f64> = self
            .channel_indices
            .iter()
            .map(|&i| grid.channel_to_frequency(i))
            .collect();
        freqs.sort_by(f64::total_cmp);
        Ok(ClassicalChannelSet::new(freqs, powers_dbm.to_vec())
            .expect("lengths checked above"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionKind {
    Keep,
    Reallocate { plan: Vec<u32> },
    SwitchPath { path_id: String },
}

impl ActionKind {
    pub fn label(&self) -> String {
        match self {
            ActionKind::Keep => "keep".into(),
            ActionKind::Reallocate { plan } => format!(
                "reallocate[{}]",
                plan.iter()
                    .map(|c| format!("Ch{c}"))
                    .collect::<Vec<_>>()
                    .join("-")
            ),
            ActionKind::SwitchPath { path_id } => format!("switch-path[{path_id}]"),
        }
    }
}

/// Controller decision with the prediction that motivated it. `degraded`
/// marks a best-effort fallback that does not meet the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub predicted: PredictedMetrics,
    pub degraded: bool,
}

/// One candidate route: fiber profile plus its classical allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub id: String,
    pub fiber: FiberProfile,
    pub channels: ClassicalChannelSet,
}

/// Picks the path with the highest predicted SKR; ties break by lower
/// predicted noise, then lexicographically lower path id.
pub fn select_initial_path(
    paths: &[CandidatePath],
    models: &PredictorSet,
    quantum: &QuantumChannelSpec,
) -> Result<usize, ControllerError> {
    if paths.is_empty() {
        return Err(ControllerError::EmptyPaths);
    }
    let mut best: Option<(usize, PredictedMetrics)> = None;
    for (idx, path) in paths.iter().enumerate() {
        let m = predict_metrics(models, &path.channels, quantum, &path.fiber)?;
        let better = match &best {
            None => true,
            Some((best_idx, b)) => {
                m.skr > b.skr
                    || (m.skr == b.skr
                        && (m.noise_rate < b.noise_rate
                            || (m.noise_rate == b.noise_rate && paths[idx].id < paths[*best_idx].id)))
            }
        };
        if better {
            best = Some((idx, m));
        }
    }
    Ok(best.expect("non-empty path list").0)
}

/// Threshold check on the current allocation, then exhaustive evaluation of
/// the provided plans, then the alternate paths, then best-effort fallback.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_and_decide(
    snapshot: &MonitoringSnapshot,
    models: &PredictorSet,
    threshold: &Threshold,
    plans: &[ReallocationPlan],
    alternate_paths: &[CandidatePath],
    quantum: &QuantumChannelSpec,
    grid: &GridSpec,
    fiber: &FiberProfile,
) -> Result<Action, ControllerError> {
    snapshot.validate(quantum, DEFAULT_MONITOR_TOLERANCE_DB)?;
    if plans.is_empty() {
        return Err(ControllerError::EmptyPlans);
    }
    threshold.validate()?;
    let current = predict_metrics(models, &snapshot.channels, quantum, fiber)?;
    if current.satisfies(threshold) {
        return Ok(Action {
            kind: ActionKind::Keep,
            predicted: current,
            degraded: false,
        });
    }

    let mut evaluated: Vec<(&ReallocationPlan, PredictedMetrics)> = Vec::new();
    for plan in plans {
        let set = plan.to_channel_set(grid, &snapshot.channels.powers_dbm)?;
        let violations = validate_channel_set(&set, quantum);
        if !violations.is_empty() {
            return Err(ControllerError::InvalidPlan {
                name: plan.name.clone(),
                violations,
            });
        }
        evaluated.push((plan, predict_metrics(models, &set, quantum, fiber)?));
    }
    let pick_best = |candidates: &[(&ReallocationPlan, PredictedMetrics)]| {
        candidates
            .iter()
            .enumerate()
            .max_by(|(ia, (_, a)), (ib, (_, b))| {
                a.skr.total_cmp(&b.skr).then(ib.cmp(ia))
            })
            .map(|(_, (plan, m))| ((*plan).clone(), *m))
    };
    let satisfying: Vec<_> = evaluated
        .iter()
        .filter(|(_, m)| m.satisfies(threshold))
        .cloned()
        .collect();
    if let Some((plan, metrics)) = pick_best(&satisfying) {
        return Ok(Action {
            kind: ActionKind::Reallocate {
                plan: plan.channel_indices,
            },
            predicted: metrics,
            degraded: false,
        });
    }

    let mut best_path: Option<(usize, PredictedMetrics)> = None;
    for (idx, path) in alternate_paths.iter().enumerate() {
        let m = predict_metrics(models, &path.channels, quantum, &path.fiber)?;
        if !m.satisfies(threshold) {
            continue;
        }
        if best_path.as_ref().is_none_or(|(_, b)| m.skr > b.skr) {
            best_path = Some((idx, m));
        }
    }
    if let Some((idx, metrics)) = best_path {
        return Ok(Action {
            kind: ActionKind::SwitchPath {
                path_id: alternate_paths[idx].id.clone(),
            },
            predicted: metrics,
            degraded: false,
        });
    }

    // nothing satisfies: best-effort reallocation, flagged
    let (plan, metrics) = pick_best(&evaluated).expect("plans are non-empty");
    Ok(Action {
        kind: ActionKind::Reallocate {
            plan: plan.channel_indices,
        },
        predicted: metrics,
        degraded: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageName {
    Initial,
    Stage1,
    Stage2,
    Stage3,
}

impl StageName {
    pub fn label(&self) -> &'static str {
        match self {
            StageName::Initial => "initial",
            StageName::Stage1 => "stage1",
            StageName::Stage2 => "stage2",
            StageName::Stage3 => "stage3",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "initial" => StageName::Initial,
            "stage1" => StageName::Stage1,
            "stage2" => StageName::Stage2,
            "stage3" => StageName::Stage3,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageAllocation {
    /// Channel offsets from the quantum carrier, GHz.
    OffsetsGhz(Vec<f64>),
    /// A named plan from the script's plan list.
    Plan(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    /// Threshold-driven decision.
    Decide,
    /// Scripted reallocation to a named plan (network event beyond the
    /// controller's control, e.g. the path becoming spectrum-fragmented).
    Reallocate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedAction {
    Keep,
    Reallocate,
    SwitchPath,
}

impl ExpectedAction {
    fn matches(&self, kind: &ActionKind) -> bool {
        matches!(
            (self, kind),
            (ExpectedAction::Keep, ActionKind::Keep)
                | (ExpectedAction::Reallocate, ActionKind::Reallocate { .. })
                | (ExpectedAction::SwitchPath, ActionKind::SwitchPath { .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStage {
    pub name: StageName,
    pub allocation: StageAllocation,
    pub directive: Directive,
    pub expect: Option<ExpectedAction>,
}

/// Threshold settings as scripted: the SKR floor is a fraction of the
/// initial stage's predicted SKR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptThreshold {
    pub min_skr_fraction: f64,
    pub max_qber: f64,
    pub max_noise_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub link_id: String,
    pub power_per_channel_dbm: f64,
    pub filter_width_ghz: f64,
    pub sss_in_port: String,
    pub sss_out_port: String,
    pub threshold: ScriptThreshold,
    pub plans: Vec<ReallocationPlan>,
    pub stages: Vec<ScenarioStage>,
}

/// Default staged use case: 4 channels, then 8 tightly straddling the
/// quantum carrier, then the two reallocation plans in turn.
pub const DEFAULT_SCENARIO: &str = "\
[scenario]
link_id = field-trial
power_per_channel_dbm = -24.0
filter_width_ghz = 38.0
sss_in_port = A
sss_out_port = 4

[threshold]
min_skr_fraction = 0.5
max_qber = 0.06
max_noise_rate = 1000.0

[plan.a]
channels = 75,77,79,81,83,85,87,89

[plan.b]
channels = 33,37,41,45,49,55,59,61

[stage.initial]
offsets_ghz = -400,-200,200,400
directive = decide
expect = keep

[stage.stage1]
offsets_ghz = -400,-300,-200,-100,100,200,300,400
directive = decide
expect = reallocate

[stage.stage2]
plan = a
directive = reallocate:b
expect = reallocate

[stage.stage3]
plan = b
directive = decide
expect = keep
";

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self, ControllerError> {
        let sections = parse_sections(text)?;
        let mut script = ScenarioScript {
            link_id: "link".into(),
            power_per_channel_dbm: -24.0,
            filter_width_ghz: 38.0,
            sss_in_port: "A".into(),
            sss_out_port: "4".into(),
            threshold: ScriptThreshold {
                min_skr_fraction: 0.5,
                max_qber: 0.06,
                max_noise_rate: f64::INFINITY,
            },
            plans: Vec::new(),
            stages: Vec::new(),
        };
        for section in &sections {
            match section.name.as_str() {
                "scenario" => {
                    for (key, value) in &section.entries {
                        match key.as_str() {
                            "link_id" => script.link_id = value.clone(),
                            "power_per_channel_dbm" => {
                                script.power_per_channel_dbm =
                                    parse_f64("scenario", key, value)?
                            }
                            "filter_width_ghz" => {
                                script.filter_width_ghz = parse_f64("scenario", key, value)?
                            }
                            "sss_in_port" => script.sss_in_port = value.clone(),
                            "sss_out_port" => script.sss_out_port = value.clone(),
                            _ => {
                                return Err(ConfigError::UnknownKey {
                                    section: "scenario".into(),
                                    key: key.clone(),
                                }
                                .into())
                            }
                        }
                    }
                }
                "threshold" => {
                    for (key, value) in &section.entries {
                        let v = parse_f64("threshold", key, value)?;
                        match key.as_str() {
                            "min_skr_fraction" => script.threshold.min_skr_fraction = v,
                            "max_qber" => script.threshold.max_qber = v,
                            "max_noise_rate" => script.threshold.max_noise_rate = v,
                            _ => {
                                return Err(ConfigError::UnknownKey {
                                    section: "threshold".into(),
                                    key: key.clone(),
                                }
                                .into())
                            }
                        }
                    }
                }
                name if name.starts_with("plan.") => {
                    let plan_name = name.trim_start_matches("plan.").to_string();
                    if plan_name.is_empty() {
                        return Err(ControllerError::InvalidScript(
                            "plan with empty name".into(),
                        ));
                    }
                    let mut indices = None;
                    for (key, value) in &section.entries {
                        if key == "channels" {
                            let parsed: Result<Vec<u32>, _> = value
                                .split(',')
                                .map(|v| v.trim().parse::<u32>())
                                .collect();
                            indices = Some(parsed.map_err(|_| {
                                ControllerError::InvalidScript(format!(
                                    "plan `{plan_name}`: bad channel list `{value}`"
                                ))
                            })?);
                        } else {
                            return Err(ConfigError::UnknownKey {
                                section: name.to_string(),
                                key: key.clone(),
                            }
                            .into());
                        }
                    }
                    script.plans.push(ReallocationPlan {
                        name: plan_name.clone(),
                        channel_indices: indices.ok_or_else(|| {
                            ControllerError::InvalidScript(format!(
                                "plan `{plan_name}` missing `channels`"
                            ))
                        })?,
                    });
                }
                name if name.starts_with("stage.") => {
                    let stage_label = name.trim_start_matches("stage.");
                    let stage_name = StageName::parse(stage_label).ok_or_else(|| {
                        ControllerError::InvalidScript(format!("unknown stage `{stage_label}`"))
                    })?;
                    let mut allocation = None;
                    let mut directive = Directive::Decide;
                    let mut expect = None;
                    for (key, value) in &section.entries {
                        match key.as_str() {
                            "offsets_ghz" => {
                                let offsets: Result<Vec<f64>, _> =
                                    value.split(',').map(|v| v.trim().parse()).collect();
                                allocation =
                                    Some(StageAllocation::OffsetsGhz(offsets.map_err(|_| {
                                        ControllerError::InvalidScript(format!(
                                            "stage `{stage_label}`: bad offsets `{value}`"
                                        ))
                                    })?));
                            }
                            "plan" => allocation = Some(StageAllocation::Plan(value.clone())),
                            "directive" => {
                                directive = if value == "decide" {
                                    Directive::Decide
                                } else if let Some(plan) = value.strip_prefix("reallocate:") {
                                    Directive::Reallocate(plan.to_string())
                                } else {
                                    return Err(ControllerError::InvalidScript(format!(
                                        "stage `{stage_label}`: unknown directive `{value}`"
                                    )));
                                };
                            }
                            "expect" => {
                                expect = Some(match value.as_str() {
                                    "keep" => ExpectedAction::Keep,
                                    "reallocate" => ExpectedAction::Reallocate,
                                    "switch" => ExpectedAction::SwitchPath,
                                    other => {
                                        return Err(ControllerError::InvalidScript(format!(
                                            "stage `{stage_label}`: unknown expectation `{other}`"
                                        )))
                                    }
                                });
                            }
                            _ => {
                                return Err(ConfigError::UnknownKey {
                                    section: name.to_string(),
                                    key: key.clone(),
                                }
                                .into())
                            }
                        }
                    }
                    script.stages.push(ScenarioStage {
                        name: stage_name,
                        allocation: allocation.ok_or_else(|| {
                            ControllerError::InvalidScript(format!(
                                "stage `{stage_label}` has no allocation"
                            ))
                        })?,
                        directive,
                        expect,
                    });
                }
                other => return Err(ConfigError::UnknownSection(other.to_string()).into()),
            }
        }
        script.validate()?;
        Ok(script)
    }

    fn validate(&self) -> Result<(), ControllerError> {
        if self.stages.is_empty() {
            return Err(ControllerError::InvalidScript("no stages defined".into()));
        }
        if self.stages[0].name != StageName::Initial {
            return Err(ControllerError::StageOrdering {
                previous: "<start>".into(),
                found: self.stages[0].name.label().into(),
            });
        }
        for w in self.stages.windows(2) {
            if w[1].name <= w[0].name {
                return Err(ControllerError::StageOrdering {
                    previous: w[0].name.label().into(),
                    found: w[1].name.label().into(),
                });
            }
        }
        let t = &self.threshold;
        if !(t.min_skr_fraction >= 0.0 && t.min_skr_fraction <= 1.0)
            || !(t.max_qber > 0.0 && t.max_qber <= 0.5)
        {
            return Err(ControllerError::InvalidScript(format!(
                "threshold out of range: {t:?}"
            )));
        }
        for stage in &self.stages {
            let referenced = match (&stage.allocation, &stage.directive) {
                (StageAllocation::Plan(p), Directive::Reallocate(q)) => vec![p, q],
                (StageAllocation::Plan(p), _) => vec![p],
                (_, Directive::Reallocate(q)) => vec![q],
                _ => vec![],
            };
            for name in referenced {
                if !self.plans.iter().any(|p| &p.name == name) {
                    return Err(ControllerError::UnknownPlan(name.clone()));
                }
            }
        }
        Ok(())
    }

    fn plan(&self, name: &str) -> Result<&ReallocationPlan, ControllerError> {
        self.plans
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ControllerError::UnknownPlan(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    /// Oracle-measured ground truth for the stage's allocation.
    pub monitored: QkdPerformance,
    pub predicted: PredictedMetrics,
    pub action: Action,
    pub messages: Vec<String>,
    pub expect_mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub selected_path: String,
    pub threshold: Threshold,
    pub stages: Vec<StageReport>,
}

impl ScenarioReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("selected path: {}\n", self.selected_path));
        out.push_str(&format!(
            "threshold: min SKR {:.1} bit/s, max QBER {:.4}, max noise {:.1} /s\n\n",
            self.threshold.min_skr, self.threshold.max_qber, self.threshold.max_noise_rate
        ));
        out.push_str(&format!(
            "{:<8} {:>14} {:>14} {:>10} {:>10} {:>9} {:>9}  {}\n",
            "stage",
            "noise(mon)",
            "noise(pred)",
            "SKR(mon)",
            "SKR(pred)",
            "QBER(mon)",
            "QBER(pred)",
            "action"
        ));
        for s in &self.stages {
            out.push_str(&format!(
                "{:<8} {:>14.1} {:>14.1} {:>10.1} {:>10.1} {:>9.4} {:>9.4}  {}{}\n",
                s.stage,
                s.monitored.noise.total_rate,
                s.predicted.noise_rate,
                s.monitored.skr,
                s.predicted.skr,
                s.monitored.qber,
                s.predicted.qber,
                s.action.kind.label(),
                if s.action.degraded { " (degraded)" } else { "" },
            ));
            for m in &s.messages {
                out.push_str(&format!("         -> {m}\n"));
            }
        }
        out
    }

    /// Machine-readable per-stage rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "stage,monitored_noise,predicted_noise,monitored_skr,predicted_skr,monitored_qber,predicted_qber,action,degraded,messages\n",
        );
        for s in &self.stages {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{}\n",
                s.stage,
                s.monitored.noise.total_rate,
                s.predicted.noise_rate,
                s.monitored.skr,
                s.predicted.skr,
                s.monitored.qber,
                s.predicted.qber,
                s.action.kind.label(),
                s.action.degraded,
                s.messages.len()
            ));
        }
        out
    }
}

fn stage_channels(
    script: &ScenarioScript,
    stage: &ScenarioStage,
    cfg: &AppConfig,
) -> Result<ClassicalChannelSet, ControllerError> {
    let powers = |n: usize| vec![script.power_per_channel_dbm; n];
    match &stage.allocation {
        StageAllocation::OffsetsGhz(offsets) => {
            let f_q = cfg.quantum.center_frequency_thz();
            let mut freqs: Vec<f64> = offsets.iter().map(|o| f_q + o * 1e-3).collect();
            freqs.sort_by(f64::total_cmp);
            Ok(ClassicalChannelSet::new(freqs.clone(), powers(freqs.len()))
                .expect("lengths match"))
        }
        StageAllocation::Plan(name) => {
            let plan = script.plan(name)?;
            plan.to_channel_set(&cfg.grid, &powers(plan.channel_indices.len()))
        }
    }
}

/// Emits one switch-configuration message per channel that moved, i.e. per
/// frequency present in the new allocation but not the old one.
fn reallocation_messages(
    script: &ScenarioScript,
    old: &ClassicalChannelSet,
    new: &ClassicalChannelSet,
    timestamp_ms: u64,
    next_id: &mut u64,
) -> Result<Vec<SssConfigMessage>, ControllerError> {
    let mut messages = Vec::new();
    for &f in &new.center_frequencies_thz {
        let moved = !old
            .center_frequencies_thz
            .iter()
            .any(|&g| (g - f).abs() < 1e-9);
        if !moved {
            continue;
        }
        let lambda = frequency_to_wavelength(f)
            .map_err(|e| ControllerError::InvalidScript(e.to_string()))?;
        messages.push(SssConfigMessage::new(
            *next_id,
            timestamp_ms,
            &script.sss_in_port,
            &script.sss_out_port,
            lambda,
            script.filter_width_ghz,
        )?);
        *next_id += 1;
    }
    Ok(messages)
}

/// Drives the staged use case: selects the initial path, then walks the
/// stages, recording snapshot / prediction / action / messages for each.
pub fn run_scenario(
    script: &ScenarioScript,
    models: &PredictorSet,
    cfg: &AppConfig,
    mut log: Option<&mut RecordLog>,
) -> Result<ScenarioReport, ControllerError> {
    let initial_stage = &script.stages[0];
    let initial_channels = stage_channels(script, initial_stage, cfg)?;
    let paths: Vec<CandidatePath> = cfg
        .fibers
        .iter()
        .map(|f| CandidatePath {
            id: f.name.clone(),
            fiber: f.clone(),
            channels: initial_channels.clone(),
        })
        .collect();
    let selected = select_initial_path(&paths, models, &cfg.quantum)?;
    let fiber = paths[selected].fiber.clone();

    // SKR floor anchored to the initial stage's prediction
    let initial_predicted =
        predict_metrics(models, &initial_channels, &cfg.quantum, &fiber)?;
    let threshold = Threshold {
        min_skr: script.threshold.min_skr_fraction * initial_predicted.skr,
        max_qber: script.threshold.max_qber,
        max_noise_rate: script.threshold.max_noise_rate,
    };

    let mut stages = Vec::with_capacity(script.stages.len());
    let mut message_id = 1u64;
    for (stage_idx, stage) in script.stages.iter().enumerate() {
        let channels = stage_channels(script, stage, cfg)?;
        let timestamp_ms = stage_idx as u64 * 1000;
        let snapshot = MonitoringSnapshot {
            timestamp_ms,
            link_id: script.link_id.clone(),
            channels: channels.clone(),
            measured_powers_dbm: channels.powers_dbm.clone(),
        };
        let monitored = evaluate_link(&channels, &cfg.quantum, &fiber, &cfg.physics);
        let predicted = predict_metrics(models, &channels, &cfg.quantum, &fiber)?;

        let action = match &stage.directive {
            Directive::Decide => {
                let alternates: Vec<CandidatePath> = paths
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != selected)
                    .map(|(_, p)| CandidatePath {
                        channels: channels.clone(),
                        ..p.clone()
                    })
                    .collect();
                evaluate_and_decide(
                    &snapshot,
                    models,
                    &threshold,
                    &script.plans,
                    &alternates,
                    &cfg.quantum,
                    &cfg.grid,
                    &fiber,
                )?
            }
            Directive::Reallocate(plan_name) => {
                let plan = script.plan(plan_name)?;
                let target = plan.to_channel_set(&cfg.grid, &channels.powers_dbm)?;
                let violations = validate_channel_set(&target, &cfg.quantum);
                if !violations.is_empty() {
                    return Err(ControllerError::InvalidPlan {
                        name: plan.name.clone(),
                        violations,
                    });
                }
                Action {
                    kind: ActionKind::Reallocate {
                        plan: plan.channel_indices.clone(),
                    },
                    predicted: predict_metrics(models, &target, &cfg.quantum, &fiber)?,
                    degraded: false,
                }
            }
        };

        let messages = match &action.kind {
            ActionKind::Reallocate { plan } => {
                let plan = ReallocationPlan {
                    name: "chosen".into(),
                    channel_indices: plan.clone(),
                };
                let target = plan.to_channel_set(&cfg.grid, &channels.powers_dbm)?;
                reallocation_messages(script, &channels, &target, timestamp_ms, &mut message_id)?
            }
            _ => Vec::new(),
        };

        if let Some(log) = log.as_deref_mut() {
            let encode = |v: &str| v.to_string();
            log.append(
                RecordKind::Snapshot,
                &encode(&serde_json::to_string(&snapshot).expect("snapshot serializes")),
            )?;
            log.append(
                RecordKind::Prediction,
                &encode(&serde_json::to_string(&predicted).expect("metrics serialize")),
            )?;
            log.append(
                RecordKind::Action,
                &encode(&serde_json::to_string(&action).expect("action serializes")),
            )?;
            for m in &messages {
                log.append(RecordKind::Message, &m.to_string())?;
            }
        }

        let expect_mismatch = stage
            .expect
            .map(|e| !e.matches(&action.kind))
            .unwrap_or(false);
        stages.push(StageReport {
            stage: stage.name.label().to_string(),
            monitored,
            predicted,
            action,
            messages: messages.iter().map(|m| m.to_string()).collect(),
            expect_mismatch,
        });
    }

    Ok(ScenarioReport {
        selected_path: paths[selected].id.clone(),
        threshold,
        stages,
    })
}

/// Reconstructs the controller's action sequence from a persisted log.
pub fn replayed_actions(records: &[Record]) -> Result<Vec<Action>, ControllerError> {
    records
        .iter()
        .filter(|r| r.kind == RecordKind::Action)
        .map(|r| {
            serde_json::from_str(&r.payload)
                .map_err(|e| ControllerError::BadActionPayload(e.to_string()))
        })
        .collect()
}
