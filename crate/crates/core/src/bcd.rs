//! Block coordinate descent over (beamformers, Alice's path, Jack's path)
//! for the communication-only problem on all slots.

use serde::{Deserialize, Serialize};

use crate::baselines::fhf_trajectory;
use crate::beamforming::{beamforming_block, BeamformingPlan};
use crate::error::{Error, Result};
use crate::geometry::build_channel_set;
use crate::metrics::{evaluate, MetricsReport, SlotLabel};
use crate::scenario::ScenarioConfig;
use crate::scs::SensingAssignment;
use crate::solver::SolverStats;
use crate::trajectory::{optimize_trajectory, Trajectory, TrajectoryContext};
use crate::Uav;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    #[default]
    StraightLine,
    Fhf,
}

/// ASR right after one block of one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockRecord {
    pub iteration: usize,
    pub block: &'static str,
    pub asr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionPlan {
    pub traj_alice: Trajectory,
    pub traj_jack: Trajectory,
    pub plan: BeamformingPlan,
    pub slot_labels: Vec<SlotLabel>,
    /// ASR after each outer iteration.
    pub asr_history: Vec<f64>,
    /// ASR of the initialization.
    pub initial_asr: f64,
    pub blocks: Vec<BlockRecord>,
    pub beamforming_stats: SolverStats,
    pub trajectory_newton_iterations: usize,
    pub assignment: Option<SensingAssignment>,
    pub report: MetricsReport,
}

impl SolutionPlan {
    pub fn outer_iters(&self) -> usize {
        self.asr_history.len()
    }

    /// Recomputes the report from the stored trajectories and covariances.
    pub fn reevaluate(&self, config: &ScenarioConfig) -> Result<MetricsReport> {
        evaluate(
            config,
            &self.traj_alice,
            &self.traj_jack,
            &self.plan,
            &self.slot_labels,
        )
    }
}

pub fn init_trajectory(
    config: &ScenarioConfig,
    strategy: InitStrategy,
) -> Result<(Trajectory, Trajectory)> {
    let pair = match strategy {
        InitStrategy::StraightLine => (
            Trajectory::straight_line(config, Uav::Alice),
            Trajectory::straight_line(config, Uav::Jack),
        ),
        InitStrategy::Fhf => (
            fhf_trajectory(config, Uav::Alice, config.bob_pos)?,
            fhf_trajectory(config, Uav::Jack, config.eve_pos)?,
        ),
    };
    crate::geometry::check_trajectory(config, Uav::Alice, &pair.0)?;
    crate::geometry::check_trajectory(config, Uav::Jack, &pair.1)?;
    Ok(pair)
}

fn block_err(iteration: usize, block: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Block {
        iteration,
        block,
        source: Box::new(e),
    }
}

pub fn run_bcd(config: &ScenarioConfig, strategy: InitStrategy) -> Result<SolutionPlan> {
    config.validate_structure().into_result()?;
    let algo = &config.algo;
    let labels = vec![SlotLabel::Sc; config.n_slots];
    let (mut ta, mut tj) = init_trajectory(config, strategy)?;
    let channels = build_channel_set(config, &ta, &tj)?;
    let mut plan = BeamformingPlan::mrt(config, &channels, 0.5);
    let initial_asr = evaluate(config, &ta, &tj, &plan, &labels)?.asr;

    let mut history = Vec::new();
    let mut blocks = Vec::new();
    let mut stats = SolverStats::default();
    let mut newton = 0;
    let mut prev = initial_asr;
    let mut report;
    let mut iteration = 0;

    loop {
        iteration += 1;
        let asr_of = |ta: &Trajectory, tj: &Trajectory, plan: &BeamformingPlan| -> Result<MetricsReport> {
            let r = evaluate(config, ta, tj, plan, &labels)?;
            if !r.feasible() {
                return Err(Error::SolverInfeasible("block output violates a constraint".into()));
            }
            Ok(r)
        };

        let channels = build_channel_set(config, &ta, &tj).map_err(block_err(iteration, "beamforming"))?;
        let (new_plan, block_stats, _) =
            beamforming_block(config, &channels, &plan).map_err(block_err(iteration, "beamforming"))?;
        stats.merge(&block_stats);
        plan = new_plan;
        let r = asr_of(&ta, &tj, &plan).map_err(block_err(iteration, "beamforming"))?;
        blocks.push(BlockRecord {
            iteration,
            block: "beamforming",
            asr: r.asr,
        });

        for (uav, block) in [(Uav::Alice, "trajectory_alice"), (Uav::Jack, "trajectory_jack")] {
            let (moving, other) = match uav {
                Uav::Alice => (&ta, &tj),
                Uav::Jack => (&tj, &ta),
            };
            let ctx = TrajectoryContext {
                config,
                moving: uav,
                other,
                beams: &plan.slots,
            };
            let (updated, log) = optimize_trajectory(&ctx, moving).map_err(block_err(iteration, block))?;
            newton += log.newton_iterations;
            match uav {
                Uav::Alice => ta = updated,
                Uav::Jack => tj = updated,
            }
            crate::geometry::check_trajectory(config, uav, match uav {
                Uav::Alice => &ta,
                Uav::Jack => &tj,
            })
            .map_err(block_err(iteration, block))?;
            let r = asr_of(&ta, &tj, &plan).map_err(block_err(iteration, block))?;
            blocks.push(BlockRecord {
                iteration,
                block,
                asr: r.asr,
            });
        }

        report = evaluate(config, &ta, &tj, &plan, &labels)?;
        let asr = report.asr;
        if asr < prev - algo.solver_tol {
            return Err(Error::NonMonotone {
                iteration,
                before: prev,
                after: asr,
            });
        }
        history.push(asr);
        let gain = asr - prev;
        prev = asr;
        if gain <= algo.bcd_tol || iteration >= algo.max_outer_iters {
            break;
        }
    }

    Ok(SolutionPlan {
        traj_alice: ta,
        traj_jack: tj,
        plan,
        slot_labels: labels,
        asr_history: history,
        initial_asr,
        blocks,
        beamforming_stats: stats,
        trajectory_newton_iterations: newton,
        assignment: None,
        report,
    })
}
