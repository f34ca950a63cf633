//! Comparison schemes: fly-hover-fly paths with MRT or optimized beams, and
//! a single-UAV setup without the jammer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bcd::{run_bcd, InitStrategy, SolutionPlan};
use crate::beamforming::{beamforming_block, mrt_covariance, BeamformingPlan, SlotBeams};
use crate::error::{Error, Result};
use crate::geometry::{build_channel_set, check_trajectory};
use crate::linalg::{identity, zeros, CVec};
use crate::metrics::{evaluate, SlotLabel};
use crate::scenario::ScenarioConfig;
use crate::scs::{greedy_select, plan_scs, select_slots, weighted_distances};
use crate::solver::SolverStats;
use crate::trajectory::Trajectory;
use crate::{Point2, Uav};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    ScsProposed,
    Fhf,
    FhfBeamforming,
    SingleUav,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::ScsProposed,
        SchemeId::Fhf,
        SchemeId::FhfBeamforming,
        SchemeId::SingleUav,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ScsProposed => "scs_proposed",
            SchemeId::Fhf => "fhf",
            SchemeId::FhfBeamforming => "fhf_beamforming",
            SchemeId::SingleUav => "single_uav",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown scheme `{s}`")))
    }
}

/// Full-speed leg to the point above `hover_over`, hover for every spare
/// slot, full-speed leg to the final location arriving exactly at slot N.
pub fn fhf_trajectory(config: &ScenarioConfig, uav: Uav, hover_over: Point2) -> Result<Trajectory> {
    let n = config.n_slots;
    let v = config.max_displacement();
    let start = config.uav_initial.get(uav);
    let end = config.uav_final.get(uav);
    let l1 = (hover_over - start).norm();
    let l2 = (end - hover_over).norm();
    let total = l1 + l2;
    let budget = n as f64 * v;
    if total > budget * (1.0 + 1e-12) {
        return Err(Error::InvalidScenario(format!(
            "{} hover visit needs {total:.3} m of travel but only {budget:.3} m is available",
            uav.name()
        )));
    }
    let along = |s: f64| -> Point2 {
        if s <= l1 {
            if l1 == 0.0 {
                start
            } else {
                start + (hover_over - start) * (s / l1)
            }
        } else if l2 == 0.0 {
            end
        } else {
            hover_over + (end - hover_over) * ((s - l1) / l2).min(1.0)
        }
    };
    let mut waypoints: Vec<Point2> = (0..=n)
        .map(|k| {
            let s = (k as f64 * v).min(l1).max(total - (n - k) as f64 * v);
            along(s.clamp(0.0, total))
        })
        .collect();
    waypoints[0] = start;
    waypoints[n] = end;
    Ok(Trajectory {
        waypoints,
        altitude: config.height(uav),
    })
}

/// √P · h/‖h‖.
pub fn mrt_beamformer(h: &CVec, power: f64) -> Result<CVec> {
    let norm = h.norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("MRT toward a zero channel".into()));
    }
    Ok(h.scale(power.max(0.0).sqrt() / norm))
}

fn fhf_pair(config: &ScenarioConfig) -> Result<(Trajectory, Trajectory)> {
    Ok((
        fhf_trajectory(config, Uav::Alice, config.bob_pos)?,
        fhf_trajectory(config, Uav::Jack, config.eve_pos)?,
    ))
}

fn fixed_solution(
    config: &ScenarioConfig,
    ta: Trajectory,
    tj: Trajectory,
    plan: BeamformingPlan,
    labels: Vec<SlotLabel>,
    assignment: Option<crate::scs::SensingAssignment>,
    stats: SolverStats,
) -> Result<SolutionPlan> {
    let report = evaluate(config, &ta, &tj, &plan, &labels)?;
    Ok(SolutionPlan {
        traj_alice: ta,
        traj_jack: tj,
        plan,
        slot_labels: labels,
        asr_history: vec![],
        initial_asr: report.asr,
        blocks: vec![],
        beamforming_stats: stats,
        trajectory_newton_iterations: 0,
        assignment,
        report,
    })
}

pub fn evaluate_scheme(scheme: SchemeId, config: &ScenarioConfig) -> Result<SolutionPlan> {
    config.validate_structure().into_result()?;
    let m = config.n_antennas;
    let sensing = config.n_sensing_slots > 0 && !config.targets.is_empty();
    match scheme {
        SchemeId::ScsProposed => {
            let sol = run_bcd(config, InitStrategy::StraightLine)?;
            plan_scs(config, &sol)
        }
        SchemeId::Fhf => {
            let (ta, tj) = fhf_pair(config)?;
            let channels = build_channel_set(config, &ta, &tj)?;
            let mut plan = BeamformingPlan::mrt(config, &channels, 1.0);
            let pre = fixed_solution(config, ta, tj, plan.clone(), vec![SlotLabel::Sc; config.n_slots], None, SolverStats::default())?;
            if !sensing {
                return Ok(pre);
            }
            let assignment = select_slots(config, &pre, true)?;
            let labels = assignment.labels(config.n_slots);
            let comm = config.fhf_comm_fraction;
            for (n, label) in labels.iter().enumerate() {
                if label.is_scs() {
                    let ch = &channels.slots[n];
                    plan.slots[n] = SlotBeams::new(
                        mrt_covariance(&ch.alice.bob, comm * config.p_max_alice),
                        mrt_covariance(&ch.jack.eve, config.p_max_jack),
                        identity(m).scale((1.0 - comm) * config.p_max_alice / m as f64),
                    );
                }
            }
            fixed_solution(config, pre.traj_alice, pre.traj_jack, plan, labels, Some(assignment), SolverStats::default())
        }
        SchemeId::FhfBeamforming => {
            let (ta, tj) = fhf_pair(config)?;
            let channels = build_channel_set(config, &ta, &tj)?;
            let init = BeamformingPlan::mrt(config, &channels, 0.5);
            let (plan, stats, _) = beamforming_block(config, &channels, &init)?;
            let sol = fixed_solution(config, ta, tj, plan, vec![SlotLabel::Sc; config.n_slots], None, stats)?;
            plan_scs(config, &sol)
        }
        SchemeId::SingleUav => {
            let ta = fhf_trajectory(config, Uav::Alice, config.bob_pos)?;
            // The jammer is absent; its path only fills the data layout.
            let tj = Trajectory::straight_line(config, Uav::Jack);
            check_trajectory(config, Uav::Jack, &tj)?;
            let channels = build_channel_set(config, &ta, &tj)?;
            let plan = BeamformingPlan {
                slots: channels
                    .slots
                    .iter()
                    .map(|ch| SlotBeams::sc(mrt_covariance(&ch.alice.bob, config.p_max_alice), zeros(m)))
                    .collect(),
            };
            let (labels, assignment) = if sensing {
                let d = weighted_distances(config, &ta, None);
                let a = greedy_select(&d, config.slots_per_target)?;
                (a.labels(config.n_slots), Some(a))
            } else {
                (vec![SlotLabel::Sc; config.n_slots], None)
            };
            fixed_solution(config, ta, tj, plan, labels, assignment, SolverStats::default())
        }
    }
}
