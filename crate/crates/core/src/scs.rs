//! Sensing-slot selection on a fixed trajectory pair and the re-solve of the
//! selected slots with a beampattern floor and a dedicated sensing
//! covariance R_r.

use serde::Serialize;

use crate::bcd::SolutionPlan;
use crate::beamforming::{gain_coeffs, max_attainable_gain, solve_slot, SensingSpec, SlotBeams, SlotLog};
use crate::error::{Error, Result};
use crate::geometry::{build_channel_set, distance, SlotChannels};
use crate::linalg::{outer, principal, trace_product, zeros, CMat};
use crate::metrics::{evaluate, sensed_targets, SlotLabel};
use crate::scenario::ScenarioConfig;
use crate::solver::SolverStats;
use crate::trajectory::Trajectory;
use crate::{par, Uav};

pub use crate::beamforming::surrogate_coeffs as surrogate_coeffs_scs;

/// τ(d_ak + d_jk) + (1−τ)·d_ab.
pub fn weighted_distance(tau: f64, d_ak: f64, d_jk: f64, d_ab: f64) -> f64 {
    tau * (d_ak + d_jk) + (1.0 - tau) * d_ab
}

/// `D[k][n - 1]` for target k and slot n. With `traj_jack = None` the jammer
/// term is dropped (single-UAV operation).
pub fn weighted_distances(
    config: &ScenarioConfig,
    traj_alice: &Trajectory,
    traj_jack: Option<&Trajectory>,
) -> Vec<Vec<f64>> {
    let tau = config.distance_weight;
    config
        .targets
        .iter()
        .map(|g| {
            (1..=config.n_slots)
                .map(|n| {
                    let ua = traj_alice.slot(n);
                    let d_ak = distance(&ua, config.height(Uav::Alice), g);
                    let d_ab = distance(&ua, config.height(Uav::Alice), &config.bob_pos);
                    let d_jk = traj_jack
                        .map(|t| distance(&t.slot(n), config.height(Uav::Jack), g))
                        .unwrap_or(0.0);
                    weighted_distance(tau, d_ak, d_jk, d_ab)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensingAssignment {
    /// 1-based slot indices per target, ascending.
    pub per_target: Vec<Vec<usize>>,
    pub weighted_distance: Vec<Vec<f64>>,
}

impl SensingAssignment {
    pub fn labels(&self, n_slots: usize) -> Vec<SlotLabel> {
        let mut labels = vec![SlotLabel::Sc; n_slots];
        for (k, slots) in self.per_target.iter().enumerate() {
            for &n in slots {
                labels[n - 1] = SlotLabel::Scs { target: k };
            }
        }
        labels
    }

    pub fn total_distance(&self) -> f64 {
        self.per_target
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.iter().map(move |&n| self.weighted_distance[k][n - 1]))
            .sum()
    }
}

/// Targets in index order each take their `slots_per_target` cheapest
/// remaining slots (lowest index on ties); taken slots leave the pool.
pub fn greedy_select(d: &[Vec<f64>], slots_per_target: usize) -> Result<SensingAssignment> {
    let n = d.first().map_or(0, |row| row.len());
    if d.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("ragged weighted-distance matrix".into()));
    }
    let mut taken = vec![false; n];
    let mut per_target = Vec::with_capacity(d.len());
    for (k, row) in d.iter().enumerate() {
        let mut free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
        if free.len() < slots_per_target {
            return Err(Error::InsufficientSlots {
                target: k + 1,
                needed: slots_per_target,
                available: free.len(),
            });
        }
        free.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let mut pick: Vec<usize> = free[..slots_per_target].to_vec();
        pick.sort_unstable();
        for &i in &pick {
            taken[i] = true;
        }
        per_target.push(pick.into_iter().map(|i| i + 1).collect());
    }
    Ok(SensingAssignment {
        per_target,
        weighted_distance: d.to_vec(),
    })
}

/// Exhaustive minimum total weighted distance over disjoint assignments.
/// Exponential; meant for checking the greedy on small instances.
pub fn brute_force_min(d: &[Vec<f64>], slots_per_target: usize) -> Option<f64> {
    #[allow(clippy::too_many_arguments)]
    fn rec(d: &[Vec<f64>], k: usize, spt: usize, taken: &mut Vec<bool>, start: usize, left: usize, acc: f64, best: &mut Option<f64>) {
        if k == d.len() {
            *best = Some(best.map_or(acc, |b| b.min(acc)));
            return;
        }
        if left == 0 {
            rec(d, k + 1, spt, taken, 0, spt, acc, best);
            return;
        }
        for i in start..taken.len() {
            if !taken[i] {
                taken[i] = true;
                rec(d, k, spt, taken, i + 1, left - 1, acc + d[k][i], best);
                taken[i] = false;
            }
        }
    }
    let n = d.first().map_or(0, |r| r.len());
    let mut best = None;
    rec(d, 0, slots_per_target, &mut vec![false; n], 0, slots_per_target, 0.0, &mut best);
    best
}

fn scaled_gain(ga: &CMat, gj: &CMat, x: &SlotBeams) -> f64 {
    trace_product(ga, &x.w_a) + trace_product(ga, &x.r_r) + trace_product(gj, &x.w_j)
}

/// Feasible start for a sensing slot from its communication-only beams:
/// R_r starts at zero and, where a floor is missed, the point is pulled
/// toward the gain-maximizing beam (Alice's share first, then both UAVs).
pub fn scs_init(config: &ScenarioConfig, ch: &SlotChannels, sc: &SlotBeams, spec: &SensingSpec) -> SlotBeams {
    let m = config.n_antennas;
    let mut x = SlotBeams::new(sc.w_a.clone(), sc.w_j.clone(), zeros(m));
    let margin = 1.0 + 1e-9;
    for &k in &spec.targets {
        let (ga, gj) = gain_coeffs(config, ch, k);
        let g = scaled_gain(&ga, &gj, &x);
        if g >= spec.threshold {
            continue;
        }
        let (la, va) = principal(&ga);
        let (lj, vj) = principal(&gj);
        let alice_part = trace_product(&ga, &x.w_a) + trace_product(&ga, &x.r_r);
        let jack_part = trace_product(&gj, &x.w_j);
        let alice_best = config.p_max_alice * la;
        let anchor_rr = outer(&va).scale(config.p_max_alice);
        if alice_best + jack_part >= spec.threshold && alice_best > alice_part {
            let theta = ((spec.threshold - g) / (alice_best - alice_part) * margin).min(1.0);
            x = SlotBeams::new(
                x.w_a.scale(1.0 - theta),
                x.w_j.clone(),
                x.r_r.scale(1.0 - theta) + anchor_rr.scale(theta),
            );
        } else {
            let best = alice_best + config.p_max_jack * lj;
            if best <= g {
                continue;
            }
            let theta = ((spec.threshold - g) / (best - g) * margin).min(1.0);
            x = SlotBeams::new(
                x.w_a.scale(1.0 - theta),
                x.w_j.scale(1.0 - theta) + outer(&vj).scale(config.p_max_jack * theta),
                x.r_r.scale(1.0 - theta) + anchor_rr.scale(theta),
            );
        }
    }
    x
}

/// Sensing-slot solve for `slot` started from its communication-only beams.
pub fn solve_scs_beamforming(
    config: &ScenarioConfig,
    ch: &SlotChannels,
    slot: usize,
    label: SlotLabel,
    sc_beams: &SlotBeams,
) -> Result<(SlotBeams, SlotLog)> {
    let spec = SensingSpec {
        targets: sensed_targets(config, label),
        threshold: config.beampattern_threshold,
    };
    crate::beamforming::check_sensing(config, ch, slot, &spec)?;
    let init = scs_init(config, ch, sc_beams, &spec);
    solve_slot(config, ch, slot, Some(&spec), &init)
}

/// Largest beampattern floor every sensing slot of `sol` can meet: the
/// minimum over sensing slots and sensed targets of the attainable gain.
pub fn threshold_ceiling(config: &ScenarioConfig, sol: &SolutionPlan) -> Result<Option<f64>> {
    let channels = build_channel_set(config, &sol.traj_alice, &sol.traj_jack)?;
    let mut ceiling: Option<f64> = None;
    for (n, label) in sol.slot_labels.iter().enumerate() {
        if !label.is_scs() {
            continue;
        }
        for k in sensed_targets(config, *label) {
            let g = max_attainable_gain(config, &channels.slots[n], k);
            ceiling = Some(ceiling.map_or(g, |c| c.min(g)));
        }
    }
    Ok(ceiling)
}

/// Greedy slot selection on the solution's trajectories.
pub fn select_slots(config: &ScenarioConfig, sol: &SolutionPlan, with_jack: bool) -> Result<SensingAssignment> {
    let d = weighted_distances(config, &sol.traj_alice, with_jack.then_some(&sol.traj_jack));
    greedy_select(&d, config.slots_per_target)
}

/// Labels the greedily chosen slots as sensing slots and re-solves their
/// covariances; trajectories stay fixed.
pub fn plan_scs(config: &ScenarioConfig, sol: &SolutionPlan) -> Result<SolutionPlan> {
    if config.n_sensing_slots == 0 || config.targets.is_empty() {
        return Ok(sol.clone());
    }
    let assignment = select_slots(config, sol, true)?;
    let labels = assignment.labels(config.n_slots);
    let channels = build_channel_set(config, &sol.traj_alice, &sol.traj_jack)?;
    let sensing: Vec<usize> = (1..=config.n_slots).filter(|&n| labels[n - 1].is_scs()).collect();
    let solved = par::try_map_indexed(sensing.len(), |i| {
        let n = sensing[i];
        solve_scs_beamforming(config, &channels.slots[n - 1], n, labels[n - 1], &sol.plan.slots[n - 1])
    })?;

    let mut plan = sol.plan.clone();
    let mut stats = SolverStats::default();
    for (&n, (beams, log)) in sensing.iter().zip(solved) {
        stats.merge(&log.stats);
        plan.slots[n - 1] = beams;
    }
    let report = evaluate(config, &sol.traj_alice, &sol.traj_jack, &plan, &labels)?;
    let mut beamforming_stats = sol.beamforming_stats.clone();
    beamforming_stats.merge(&stats);
    Ok(SolutionPlan {
        plan,
        slot_labels: labels,
        assignment: Some(assignment),
        beamforming_stats,
        report,
        ..sol.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_distance_examples() {
        assert_eq!(weighted_distance(0.5, 100.0, 120.0, 130.0), 175.0);
        assert_eq!(weighted_distance(1.0, 100.0, 120.0, 130.0), 220.0);
        assert_eq!(weighted_distance(0.0, 100.0, 120.0, 130.0), 130.0);
    }

    #[test]
    fn greedy_examples() {
        let d = vec![vec![10.0, 20.0, 30.0, 40.0], vec![12.0, 11.0, 50.0, 60.0]];
        let a = greedy_select(&d, 1).unwrap();
        assert_eq!(a.per_target, vec![vec![1], vec![2]]);
        assert_eq!(a.total_distance(), 21.0);
        assert_eq!(brute_force_min(&d, 1), Some(21.0));

        let a = greedy_select(&[vec![5.0, 5.0, 9.0, 9.0]], 2).unwrap();
        assert_eq!(a.per_target, vec![vec![1, 2]]);

        let a = greedy_select(&[vec![3.0, 1.0, 2.0, 0.5, 7.0]], 3).unwrap();
        assert_eq!(a.per_target, vec![vec![2, 3, 4]]);
    }

    #[test]
    fn insufficient_slots_names_target() {
        let d = vec![vec![1.0, 2.0, 3.0]; 2];
        match greedy_select(&d, 2) {
            Err(Error::InsufficientSlots { target, needed, available }) => {
                assert_eq!((target, needed, available), (2, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn hover_slot(gamma: f64) -> (ScenarioConfig, SlotChannels, SlotBeams) {
        let mut c = crate::scenario::default_scenario();
        c.beampattern_threshold = gamma;
        let ch = SlotChannels::new(&c, &c.bob_pos, &c.eve_pos);
        let init = crate::beamforming::mrt_slot(&c, &ch, 0.5);
        let (sc, _) = crate::beamforming::solve_sc_beamforming(&c, &ch, 1, &init).unwrap();
        (c, ch, sc)
    }

    #[test]
    fn free_floor_never_loses_to_sc_beams() {
        use crate::metrics::rate_difference_sc;
        let (c, ch, sc) = hover_slot(0.0);
        let (x, _) = solve_scs_beamforming(&c, &ch, 1, SlotLabel::Scs { target: 1 }, &sc).unwrap();
        assert!(rate_difference_sc(&c, &ch, &x) >= rate_difference_sc(&c, &ch, &sc) - 1e-9);
    }

    #[test]
    fn floor_holds_after_solve() {
        let (c, ch, sc) = hover_slot(1e-4);
        let label = SlotLabel::Scs { target: 3 };
        let (x, _) = solve_scs_beamforming(&c, &ch, 1, label, &sc).unwrap();
        let (ga, gj) = gain_coeffs(&c, &ch, 3);
        assert!(scaled_gain(&ga, &gj, &x) >= 1e-4 - 1e-11);
        let too_high = max_attainable_gain(&c, &ch, 3) * 1.01;
        let (c2, _, _) = hover_slot(too_high);
        let err = solve_scs_beamforming(&c2, &ch, 1, label, &sc).unwrap_err();
        assert!(err.max_attainable_gain().is_some());
    }

    #[test]
    fn labels_from_assignment() {
        let a = greedy_select(&[vec![3.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]], 1).unwrap();
        let l = a.labels(3);
        assert_eq!(l, vec![SlotLabel::Scs { target: 1 }, SlotLabel::Scs { target: 0 }, SlotLabel::Sc]);
    }
}
