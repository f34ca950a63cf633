//! SINRs, secrecy rates, beampattern gains and the aggregate report. Every
//! optimizer's claims are checked against [`evaluate`].

use serde::{Deserialize, Serialize};

use crate::beamforming::{BeamformingPlan, SlotBeams};
use crate::error::{Error, Result};
use crate::geometry::{SlotChannels, DISPLACEMENT_TOL};
use crate::linalg::{ensure_hermitian, trace, trace_product, CMat};
use crate::scenario::ScenarioConfig;
use crate::trajectory::Trajectory;
use crate::Uav;

/// Phase of a slot: secure communication only, or communication plus
/// sensing of one target (0-based index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotLabel {
    Sc,
    Scs { target: usize },
}

impl SlotLabel {
    pub fn is_scs(self) -> bool {
        matches!(self, SlotLabel::Scs { .. })
    }

    pub fn phase(self) -> &'static str {
        match self {
            SlotLabel::Sc => "sc",
            SlotLabel::Scs { .. } => "scs",
        }
    }
}

pub fn sinr_sc(
    w_a: &CMat,
    w_j: &CMat,
    h_aq: &CMat,
    h_jq: &CMat,
    residual_jam: f64,
    noise: f64,
) -> Result<f64> {
    let (w_a, w_j) = (ensure_hermitian(w_a)?, ensure_hermitian(w_j)?);
    let (h_aq, h_jq) = (ensure_hermitian(h_aq)?, ensure_hermitian(h_jq)?);
    Ok(trace_product(&h_aq, &w_a) / (residual_jam * trace_product(&h_jq, &w_j) + noise))
}

#[allow(clippy::too_many_arguments)]
pub fn sinr_scs(
    w_a: &CMat,
    r_r: &CMat,
    w_j: &CMat,
    h_aq: &CMat,
    h_jq: &CMat,
    residual_sense: f64,
    residual_jam: f64,
    noise: f64,
) -> Result<f64> {
    let (w_a, r_r, w_j) = (
        ensure_hermitian(w_a)?,
        ensure_hermitian(r_r)?,
        ensure_hermitian(w_j)?,
    );
    let (h_aq, h_jq) = (ensure_hermitian(h_aq)?, ensure_hermitian(h_jq)?);
    let denom = residual_sense * trace_product(&h_aq, &r_r)
        + residual_jam * trace_product(&h_jq, &w_j)
        + noise;
    Ok(trace_product(&h_aq, &w_a) / denom)
}

/// log₂(1+γ_b) − log₂(1+γ_e), not clamped.
pub fn rate_difference(sinr_bob: f64, sinr_eve: f64) -> f64 {
    sinr_bob.ln_1p() / std::f64::consts::LN_2 - sinr_eve.ln_1p() / std::f64::consts::LN_2
}

pub fn secrecy_rate(sinr_bob: f64, sinr_eve: f64) -> f64 {
    rate_difference(sinr_bob, sinr_eve).max(0.0)
}

/// tr(A_ak(W_a+R_r))/d_ak² + tr(A_jk W_j)/d_jk².
pub fn beampattern_gain(
    w_a: &CMat,
    r_r: &CMat,
    w_j: &CMat,
    a_ak: &CMat,
    a_jk: &CMat,
    d_ak: f64,
    d_jk: f64,
) -> f64 {
    (trace_product(a_ak, w_a) + trace_product(a_ak, r_r)) / (d_ak * d_ak)
        + trace_product(a_jk, w_j) / (d_jk * d_jk)
}

/// (γ_b, γ_e) for one slot; R_r is zero outside sensing slots.
pub fn slot_sinrs(config: &ScenarioConfig, ch: &SlotChannels, beams: &SlotBeams) -> (f64, f64) {
    let rx = [
        (
            &ch.alice.bob.channel_outer,
            &ch.jack.bob.channel_outer,
            config.residual_sense_bob,
            config.residual_jam_bob,
            config.noise_power_bob,
        ),
        (
            &ch.alice.eve.channel_outer,
            &ch.jack.eve.channel_outer,
            config.residual_sense_eve,
            config.residual_jam_eve,
            config.noise_power_eve,
        ),
    ];
    let sinr = |(ha, hj, phi_r, phi_j, noise): (&CMat, &CMat, f64, f64, f64)| {
        let denom = phi_r * trace_product(ha, &beams.r_r) + phi_j * trace_product(hj, &beams.w_j) + noise;
        trace_product(ha, &beams.w_a) / denom
    };
    (sinr(rx[0]), sinr(rx[1]))
}

/// Unclamped rate difference of one slot.
pub fn rate_difference_sc(config: &ScenarioConfig, ch: &SlotChannels, beams: &SlotBeams) -> f64 {
    let (b, e) = slot_sinrs(config, ch, beams);
    rate_difference(b, e)
}

/// Raw beampattern gain at every target for one slot.
pub fn slot_gains(ch: &SlotChannels, beams: &SlotBeams) -> Vec<f64> {
    ch.alice
        .targets
        .iter()
        .zip(&ch.jack.targets)
        .map(|(la, lj)| {
            beampattern_gain(
                &beams.w_a,
                &beams.r_r,
                &beams.w_j,
                &la.steering_outer,
                &lj.steering_outer,
                la.distance,
                lj.distance,
            )
        })
        .collect()
}

/// Targets whose floor binds in a slot with this label.
pub fn sensed_targets(config: &ScenarioConfig, label: SlotLabel) -> Vec<usize> {
    match label {
        SlotLabel::Sc => vec![],
        SlotLabel::Scs { .. } if config.sense_all_targets => (0..config.n_targets()).collect(),
        SlotLabel::Scs { target } => vec![target],
    }
}

/// Slack on gain comparisons, relative to the threshold.
pub fn sensing_tol(config: &ScenarioConfig) -> f64 {
    config.algo.solver_tol * config.beampattern_threshold
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotMetrics {
    /// 1-based slot index.
    pub slot: usize,
    pub label: SlotLabel,
    pub sinr_bob: f64,
    pub sinr_eve: f64,
    pub secrecy_rate: f64,
    /// Gain at every target (threshold scale applied); empty in SC slots.
    pub beampattern_gains: Vec<f64>,
    pub power_alice: f64,
    pub power_jack: f64,
    pub power_feasible: bool,
    pub displacement_feasible: bool,
    pub sensing_feasible: bool,
    /// Largest shortfall of a sensed target's gain below the threshold.
    pub sensing_shortfall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub slots: Vec<SlotMetrics>,
    /// Mean secrecy rate over all slots.
    pub asr: f64,
    pub asr_sc: f64,
    pub asr_scs: f64,
    pub sum_secrecy: f64,
    /// Smallest sensed-target gain over sensing slots, if any.
    pub min_beampattern_gain: Option<f64>,
    pub power_feasible: bool,
    pub displacement_feasible: bool,
    pub sensing_feasible: bool,
}

impl MetricsReport {
    pub fn feasible(&self) -> bool {
        self.power_feasible && self.displacement_feasible && self.sensing_feasible
    }

    pub fn secrecy_rates(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.secrecy_rate).collect()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn check_dims(config: &ScenarioConfig, beams: &SlotBeams, slot: usize) -> Result<()> {
    let m = config.n_antennas;
    for (name, x) in [("w_a", &beams.w_a), ("w_j", &beams.w_j), ("r_r", &beams.r_r)] {
        if x.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "slot {slot}: {name} is {}x{}, expected {m}x{m}",
                x.nrows(),
                x.ncols()
            )));
        }
        ensure_hermitian(x)?;
    }
    Ok(())
}

/// Full evaluation of trajectories plus beams. Constraint violations are
/// reported through the flags; only malformed input is an error.
pub fn evaluate(
    config: &ScenarioConfig,
    traj_alice: &Trajectory,
    traj_jack: &Trajectory,
    plan: &BeamformingPlan,
    labels: &[SlotLabel],
) -> Result<MetricsReport> {
    let n = config.n_slots;
    for (uav, t) in [(Uav::Alice, traj_alice), (Uav::Jack, traj_jack)] {
        if t.waypoints.len() != n + 1 {
            return Err(Error::Dimension(format!(
                "{} trajectory has {} waypoints, expected {}",
                uav.name(),
                t.waypoints.len(),
                n + 1
            )));
        }
    }
    if plan.slots.len() != n || labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} slot beams and {} labels for {n} slots",
            plan.slots.len(),
            labels.len()
        )));
    }

    let vmax = config.max_displacement();
    let step_tol = DISPLACEMENT_TOL.max(vmax * 1e-9);
    let power_tol = |p: f64| p * 1e-9 + 1e-12;
    let scale = config.beampattern_scale();
    let gamma = config.beampattern_threshold;
    let gain_tol = sensing_tol(config);

    let mut slots = Vec::with_capacity(n);
    for slot in 1..=n {
        let beams = &plan.slots[slot - 1];
        check_dims(config, beams, slot)?;
        let label = labels[slot - 1];
        let ch = SlotChannels::new(config, &traj_alice.slot(slot), &traj_jack.slot(slot));
        let (sinr_bob, sinr_eve) = slot_sinrs(config, &ch, beams);
        let power_alice = trace(&beams.w_a) + trace(&beams.r_r);
        let power_jack = trace(&beams.w_j);
        let power_feasible = power_alice <= config.p_max_alice + power_tol(config.p_max_alice)
            && power_jack <= config.p_max_jack + power_tol(config.p_max_jack);
        let displacement_feasible = [traj_alice, traj_jack].iter().all(|t| {
            (t.waypoints[slot] - t.waypoints[slot - 1]).norm() <= vmax + step_tol
        });
        let (beampattern_gains, shortfall) = if label.is_scs() {
            let gains: Vec<f64> = slot_gains(&ch, beams).iter().map(|g| g * scale).collect();
            let short = sensed_targets(config, label)
                .iter()
                .map(|&k| gamma - gains[k])
                .fold(0.0_f64, f64::max);
            (gains, short)
        } else {
            (vec![], 0.0)
        };
        slots.push(SlotMetrics {
            slot,
            label,
            sinr_bob,
            sinr_eve,
            secrecy_rate: secrecy_rate(sinr_bob, sinr_eve),
            beampattern_gains,
            power_alice,
            power_jack,
            power_feasible,
            displacement_feasible,
            sensing_feasible: shortfall <= gain_tol,
            sensing_shortfall: shortfall,
        });
    }
    let endpoints_ok = [(Uav::Alice, traj_alice), (Uav::Jack, traj_jack)]
        .iter()
        .all(|(u, t)| {
            (t.waypoints[0] - config.uav_initial.get(*u)).norm() <= step_tol
                && (t.waypoints[n] - config.uav_final.get(*u)).norm() <= step_tol
        });

    let min_gain = slots
        .iter()
        .flat_map(|s| {
            sensed_targets(config, s.label)
                .into_iter()
                .map(move |k| s.beampattern_gains[k])
        })
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));

    Ok(MetricsReport {
        asr: mean(slots.iter().map(|s| s.secrecy_rate)),
        asr_sc: mean(slots.iter().filter(|s| !s.label.is_scs()).map(|s| s.secrecy_rate)),
        asr_scs: mean(slots.iter().filter(|s| s.label.is_scs()).map(|s| s.secrecy_rate)),
        sum_secrecy: slots.iter().map(|s| s.secrecy_rate).sum(),
        min_beampattern_gain: min_gain,
        power_feasible: slots.iter().all(|s| s.power_feasible),
        displacement_feasible: endpoints_ok && slots.iter().all(|s| s.displacement_feasible),
        sensing_feasible: slots.iter().all(|s| s.sensing_feasible),
        slots,
    })
}
