//! Line-of-sight geometry: distances, departure angles, ULA steering
//! vectors and channel vectors for every UAV/ground pair, per slot.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{outer, CMat, CVec, C64};
use crate::scenario::ScenarioConfig;
use crate::trajectory::Trajectory;
use crate::{par, Point2, Uav};

/// Slack on the per-slot displacement check (meters).
pub const DISPLACEMENT_TOL: f64 = 1e-6;

/// √(‖u − v‖² + H²).
pub fn distance(uav_xy: &Point2, height: f64, ground_xy: &Point2) -> f64 {
    ((uav_xy - ground_xy).norm_squared() + height * height).sqrt()
}

/// Entry k (0-based) is exp(j·2π·spacing·k·cos_aod).
pub fn steering_vector(m: usize, spacing_over_wavelength: f64, cos_aod: f64) -> CVec {
    let step = 2.0 * PI * spacing_over_wavelength * cos_aod;
    CVec::from_iterator(m, (0..m).map(|k| C64::from_polar(1.0, step * k as f64)))
}

/// steering · √(β / d²).
pub fn channel_vector(steering: &CVec, pathloss_ref: f64, d: f64) -> Result<CVec> {
    if !(d > 0.0) {
        return Err(Error::Degenerate(format!("distance {d} must be positive")));
    }
    Ok(steering.scale((pathloss_ref / (d * d)).sqrt()))
}

/// Everything one transmitter→receiver pair contributes in one slot.
#[derive(Clone, Debug)]
pub struct Link {
    pub distance: f64,
    pub cos_aod: f64,
    pub steering: CVec,
    pub channel: CVec,
    /// a aᴴ
    pub steering_outer: CMat,
    /// h hᴴ
    pub channel_outer: CMat,
}

impl Link {
    pub fn new(config: &ScenarioConfig, uav_xy: &Point2, height: f64, ground: &Point2) -> Link {
        let d = distance(uav_xy, height, ground);
        let cos_aod = height / d;
        let steering = steering_vector(
            config.n_antennas,
            config.antenna_spacing_over_wavelength,
            cos_aod,
        );
        let gain = config.pathloss_ref / (d * d);
        let channel = steering.scale(gain.sqrt());
        let steering_outer = outer(&steering);
        let channel_outer = steering_outer.scale(gain);
        Link {
            distance: d,
            cos_aod,
            steering,
            channel,
            steering_outer,
            channel_outer,
        }
    }
}

#[derive(Clone, Debug)]
pub struct UavLinks {
    pub bob: Link,
    pub eve: Link,
    pub targets: Vec<Link>,
}

impl UavLinks {
    pub fn new(config: &ScenarioConfig, uav: Uav, pos: &Point2) -> UavLinks {
        let h = config.height(uav);
        UavLinks {
            bob: Link::new(config, pos, h, &config.bob_pos),
            eve: Link::new(config, pos, h, &config.eve_pos),
            targets: config
                .targets
                .iter()
                .map(|g| Link::new(config, pos, h, g))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SlotChannels {
    pub alice: UavLinks,
    pub jack: UavLinks,
}

impl SlotChannels {
    pub fn new(config: &ScenarioConfig, alice_xy: &Point2, jack_xy: &Point2) -> SlotChannels {
        SlotChannels {
            alice: UavLinks::new(config, Uav::Alice, alice_xy),
            jack: UavLinks::new(config, Uav::Jack, jack_xy),
        }
    }

    pub fn links(&self, uav: Uav) -> &UavLinks {
        match uav {
            Uav::Alice => &self.alice,
            Uav::Jack => &self.jack,
        }
    }
}

/// Channels for slots 1..=N; `slots[n - 1]` belongs to waypoint n.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub slots: Vec<SlotChannels>,
}

impl ChannelSet {
    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }
}

/// Checks waypoint count, endpoints and per-slot displacement.
pub fn check_trajectory(config: &ScenarioConfig, uav: Uav, traj: &Trajectory) -> Result<()> {
    let n = config.n_slots;
    if traj.waypoints.len() != n + 1 {
        return Err(Error::Dimension(format!(
            "{} trajectory has {} waypoints, expected {}",
            uav.name(),
            traj.waypoints.len(),
            n + 1
        )));
    }
    let vmax = config.max_displacement();
    let tol = DISPLACEMENT_TOL.max(vmax * 1e-9);
    for (label, idx, want) in [
        ("initial", 0, config.uav_initial.get(uav)),
        ("final", n, config.uav_final.get(uav)),
    ] {
        let off = (traj.waypoints[idx] - want).norm();
        if off > tol {
            return Err(Error::Trajectory {
                slot: idx,
                reason: format!("{} {} waypoint off by {off:.3e} m", uav.name(), label),
            });
        }
    }
    for slot in 1..=n {
        let step = (traj.waypoints[slot] - traj.waypoints[slot - 1]).norm();
        if step > vmax + tol {
            return Err(Error::Trajectory {
                slot,
                reason: format!("{} moves {step:.6} m > limit {vmax:.6} m", uav.name()),
            });
        }
    }
    Ok(())
}

pub fn build_channel_set(
    config: &ScenarioConfig,
    traj_alice: &Trajectory,
    traj_jack: &Trajectory,
) -> Result<ChannelSet> {
    check_trajectory(config, Uav::Alice, traj_alice)?;
    check_trajectory(config, Uav::Jack, traj_jack)?;
    let slots = par::map_indexed(config.n_slots, |i| {
        SlotChannels::new(config, &traj_alice.waypoints[i + 1], &traj_jack.waypoints[i + 1])
    });
    Ok(ChannelSet { slots })
}
