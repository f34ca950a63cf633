//! Run and sweep drivers behind the command-line tool, and the artifact
//! files they write: per-run CSVs plus a JSON summary, and one CSV per sweep.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{evaluate_scheme, SchemeId};
use crate::beamforming::{BeamformingPlan, SlotBeams};
use crate::bcd::SolutionPlan;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::metrics::{evaluate, sensed_targets, sensing_tol, MetricsReport, SlotLabel};
use crate::scenario::ScenarioConfig;
use crate::scs::threshold_ceiling;
use crate::solver::SolverStats;
use crate::trajectory::Trajectory;
use crate::{par, Uav};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    TaskDuration,
    /// Residual jamming and sensing interference at Bob, moved together.
    ResidualBob,
    BeampatternThreshold,
    PMaxAlice,
    PMaxJack,
    NAntennas,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::TaskDuration,
        SweepParam::ResidualBob,
        SweepParam::BeampatternThreshold,
        SweepParam::PMaxAlice,
        SweepParam::PMaxJack,
        SweepParam::NAntennas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::TaskDuration => "task_duration",
            SweepParam::ResidualBob => "residual_bob",
            SweepParam::BeampatternThreshold => "beampattern_threshold",
            SweepParam::PMaxAlice => "p_max_alice",
            SweepParam::PMaxJack => "p_max_jack",
            SweepParam::NAntennas => "n_antennas",
        }
    }

    /// `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        match self {
            SweepParam::TaskDuration => c.set_task_duration(value),
            SweepParam::ResidualBob => {
                c.residual_jam_bob = value;
                c.residual_sense_bob = value;
            }
            SweepParam::BeampatternThreshold => c.beampattern_threshold = value,
            SweepParam::PMaxAlice => c.p_max_alice = value,
            SweepParam::PMaxJack => c.p_max_jack = value,
            SweepParam::NAntennas => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidScenario(format!("n_antennas must be a positive integer, got {value}")));
                }
                c.n_antennas = value as usize;
            }
        }
        c.validate_structure().into_result()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeId>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Infeasible,
    Error,
}

impl RunStatus {
    fn of(e: &Error) -> RunStatus {
        if e.is_infeasible() {
            RunStatus::Infeasible
        } else {
            RunStatus::Error
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Error => 1,
            RunStatus::Infeasible => 2,
        }
    }
}

/// One sweep CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: String,
    pub parameter: String,
    pub value: f64,
    pub asr: Option<f64>,
    pub sum_secrecy: Option<f64>,
    pub min_beampattern_gain: Option<f64>,
    pub outer_iters: Option<usize>,
    pub wall_seconds: f64,
    pub status: String,
}

pub const SWEEP_HEADER: [&str; 9] = [
    "scheme",
    "parameter",
    "value",
    "asr",
    "sum_secrecy",
    "min_beampattern_gain",
    "outer_iters",
    "wall_seconds",
    "status",
];

fn sweep_point(base: &ScenarioConfig, param: SweepParam, value: f64, scheme: SchemeId) -> SweepRow {
    let start = Instant::now();
    let result = param.apply(base, value).and_then(|c| evaluate_scheme(scheme, &c));
    let wall_seconds = start.elapsed().as_secs_f64();
    let mut row = SweepRow {
        scheme: scheme.name().into(),
        parameter: param.name().into(),
        value,
        asr: None,
        sum_secrecy: None,
        min_beampattern_gain: None,
        outer_iters: None,
        wall_seconds,
        status: String::new(),
    };
    match result {
        Ok(sol) => {
            row.asr = Some(sol.report.asr);
            row.sum_secrecy = Some(sol.report.sum_secrecy);
            row.min_beampattern_gain = sol.report.min_beampattern_gain;
            row.outer_iters = Some(sol.outer_iters());
            row.status = if sol.report.feasible() { "ok" } else { "infeasible" }.into();
        }
        Err(e) => {
            log::warn!("{scheme} at {param}={value}: {e}");
            row.status = match RunStatus::of(&e) {
                RunStatus::Infeasible => "infeasible".into(),
                _ => format!("error: {e}"),
            };
        }
    }
    row
}

/// Sweeps every (scheme, value) pair, scheme-major, with at most `jobs`
/// points in flight. Failed points keep their row with a status message.
pub fn run_sweep(base: &ScenarioConfig, spec: &SweepSpec, jobs: Option<usize>) -> Vec<SweepRow> {
    let points: Vec<(SchemeId, f64)> = spec
        .schemes
        .iter()
        .flat_map(|&s| spec.values.iter().map(move |&v| (s, v)))
        .collect();
    par::with_jobs(jobs, || {
        par::map_indexed(points.len(), |i| sweep_point(base, spec.param, points[i].1, points[i].0))
    })
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.parameter.clone(),
            r.value.to_string(),
            opt(r.asr),
            opt(r.sum_secrecy),
            opt(r.min_beampattern_gain),
            opt(r.outer_iters),
            format!("{:.6}", r.wall_seconds),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Covariances as `[re, im]` pairs in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistedMatrix {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl PersistedMatrix {
    fn from_mat(m: &CMat) -> PersistedMatrix {
        let dim = m.nrows();
        let entries = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| [m[(r, c)].re, m[(r, c)].im]))
            .collect();
        PersistedMatrix { dim, entries }
    }

    fn to_mat(&self) -> Result<CMat> {
        if self.entries.len() != self.dim * self.dim {
            return Err(Error::Dimension(format!(
                "{} entries for a {d}x{d} matrix",
                self.entries.len(),
                d = self.dim
            )));
        }
        Ok(CMat::from_row_iterator(
            self.dim,
            self.dim,
            self.entries.iter().map(|[re, im]| C64::new(*re, *im)),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistedSlot {
    pub w_a: PersistedMatrix,
    pub w_j: PersistedMatrix,
    pub r_r: PersistedMatrix,
}

/// Everything needed to re-evaluate a run: trajectories, labels, covariances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistedPlan {
    pub traj_alice: Trajectory,
    pub traj_jack: Trajectory,
    pub slot_labels: Vec<SlotLabel>,
    pub slots: Vec<PersistedSlot>,
}

impl PersistedPlan {
    pub fn from_solution(sol: &SolutionPlan) -> PersistedPlan {
        PersistedPlan {
            traj_alice: sol.traj_alice.clone(),
            traj_jack: sol.traj_jack.clone(),
            slot_labels: sol.slot_labels.clone(),
            slots: sol
                .plan
                .slots
                .iter()
                .map(|s| PersistedSlot {
                    w_a: PersistedMatrix::from_mat(&s.w_a),
                    w_j: PersistedMatrix::from_mat(&s.w_j),
                    r_r: PersistedMatrix::from_mat(&s.r_r),
                })
                .collect(),
        }
    }

    pub fn beams(&self) -> Result<BeamformingPlan> {
        let slots = self
            .slots
            .iter()
            .map(|s| Ok(SlotBeams::new(s.w_a.to_mat()?, s.w_j.to_mat()?, s.r_r.to_mat()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(BeamformingPlan { slots })
    }

    pub fn evaluate(&self, config: &ScenarioConfig) -> Result<MetricsReport> {
        evaluate(config, &self.traj_alice, &self.traj_jack, &self.beams()?, &self.slot_labels)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SchemeSummary {
    pub scheme: SchemeId,
    pub status: RunStatus,
    pub asr: Option<f64>,
    pub asr_sc: Option<f64>,
    pub asr_scs: Option<f64>,
    pub sum_secrecy: Option<f64>,
    pub min_beampattern_gain: Option<f64>,
    pub initial_asr: Option<f64>,
    pub bcd_history: Vec<f64>,
    pub outer_iters: usize,
    pub solver_stats: Option<SolverStats>,
    pub trajectory_newton_iterations: usize,
    pub feasible: Option<bool>,
    pub sensing_slots: Option<Vec<Vec<usize>>>,
    pub max_attainable_gain: Option<f64>,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub parallel: bool,
    pub status: RunStatus,
    /// ASR by scheme name, for the schemes that finished.
    pub asr: std::collections::BTreeMap<String, f64>,
    pub schemes: Vec<SchemeSummary>,
}

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const RATES_CSV: &str = "rates.csv";
pub const SENSING_CSV: &str = "sensing.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLAN_JSON: &str = "plan.json";

fn write_trajectory_csv(path: &Path, sol: &SolutionPlan) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["slot", "uav", "x_m", "y_m"])?;
    for (uav, t) in [(Uav::Alice, &sol.traj_alice), (Uav::Jack, &sol.traj_jack)] {
        for (n, p) in t.waypoints.iter().enumerate() {
            w.write_record([n.to_string(), uav.name().into(), p.x.to_string(), p.y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_rates_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["slot", "phase", "sinr_bob", "sinr_eve", "secrecy_rate"])?;
    for s in &report.slots {
        w.write_record([
            s.slot.to_string(),
            s.label.phase().into(),
            s.sinr_bob.to_string(),
            s.sinr_eve.to_string(),
            s.secrecy_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_sensing_csv(path: &Path, config: &ScenarioConfig, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["slot", "target", "beampattern_gain", "threshold", "feasible"])?;
    let gamma = config.beampattern_threshold;
    let tol = sensing_tol(config);
    for s in report.slots.iter().filter(|s| s.label.is_scs()) {
        for k in sensed_targets(config, s.label) {
            let g = s.beampattern_gains[k];
            w.write_record([
                s.slot.to_string(),
                (k + 1).to_string(),
                g.to_string(),
                gamma.to_string(),
                (g >= gamma - tol).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the three CSVs and the persisted plan for one finished scheme.
pub fn write_run_artifacts(dir: &Path, config: &ScenarioConfig, sol: &SolutionPlan) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory_csv(&dir.join(TRAJECTORY_CSV), sol)?;
    write_rates_csv(&dir.join(RATES_CSV), &sol.report)?;
    write_sensing_csv(&dir.join(SENSING_CSV), config, &sol.report)?;
    let plan = PersistedPlan::from_solution(sol);
    fs::write(dir.join(PLAN_JSON), serde_json::to_string(&plan)?)?;
    Ok(())
}

fn summarize(config: &ScenarioConfig, scheme: SchemeId, result: &Result<SolutionPlan>, wall_seconds: f64) -> SchemeSummary {
    match result {
        Ok(sol) => SchemeSummary {
            scheme,
            // Fixed-beam baselines can miss a floor without failing.
            status: if sol.report.feasible() {
                RunStatus::Ok
            } else {
                RunStatus::Infeasible
            },
            asr: Some(sol.report.asr),
            asr_sc: Some(sol.report.asr_sc),
            asr_scs: Some(sol.report.asr_scs),
            sum_secrecy: Some(sol.report.sum_secrecy),
            min_beampattern_gain: sol.report.min_beampattern_gain,
            initial_asr: Some(sol.initial_asr),
            bcd_history: sol.asr_history.clone(),
            outer_iters: sol.outer_iters(),
            solver_stats: Some(sol.beamforming_stats.clone()),
            trajectory_newton_iterations: sol.trajectory_newton_iterations,
            feasible: Some(sol.report.feasible()),
            sensing_slots: sol.assignment.as_ref().map(|a| a.per_target.clone()),
            max_attainable_gain: if sol.report.sensing_feasible {
                None
            } else {
                threshold_ceiling(config, sol).ok().flatten()
            },
            error: None,
            wall_seconds,
        },
        Err(e) => SchemeSummary {
            scheme,
            status: RunStatus::of(e),
            asr: None,
            asr_sc: None,
            asr_scs: None,
            sum_secrecy: None,
            min_beampattern_gain: None,
            initial_asr: None,
            bcd_history: vec![],
            outer_iters: 0,
            solver_stats: None,
            trajectory_newton_iterations: 0,
            feasible: None,
            sensing_slots: None,
            max_attainable_gain: e.max_attainable_gain(),
            error: Some(e.to_string()),
            wall_seconds,
        },
    }
}

/// Runs `schemes` on `config` and writes their artifacts under `out`. A
/// single scheme writes straight into `out`; several get one subdirectory
/// each. `summary.json` always lands in `out`. Returns the worst status.
pub fn run_schemes(config: &ScenarioConfig, schemes: &[SchemeId], out: &Path, seed: u64) -> Result<RunSummary> {
    fs::create_dir_all(out)?;
    let mut summaries = Vec::new();
    let mut asr = std::collections::BTreeMap::new();
    for &scheme in schemes {
        let start = Instant::now();
        let result = evaluate_scheme(scheme, config);
        let wall = start.elapsed().as_secs_f64();
        let dir: PathBuf = if schemes.len() == 1 {
            out.to_path_buf()
        } else {
            out.join(scheme.name())
        };
        match &result {
            Ok(sol) => {
                write_run_artifacts(&dir, config, sol)?;
                asr.insert(scheme.name().to_string(), sol.report.asr);
            }
            Err(e) => log::error!("{scheme}: {e}"),
        }
        summaries.push(summarize(config, scheme, &result, wall));
    }
    let status = summaries
        .iter()
        .map(|s| s.status)
        .max_by_key(|s| match s {
            RunStatus::Ok => 0,
            RunStatus::Infeasible => 1,
            RunStatus::Error => 2,
        })
        .unwrap_or(RunStatus::Ok);
    let summary = RunSummary {
        config: config.clone(),
        seed,
        parallel: par::is_parallel(),
        status,
        asr,
        schemes: summaries,
    };
    fs::write(out.join(SUMMARY_JSON), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
