//! Experiment configuration: geometry, budgets, residual-interference
//! levels and algorithm knobs. All quantities are stored in linear units;
//! the dB/dBm figures of the reference setup are converted once, here.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point2, Uav};

/// A value held separately for each UAV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerUav<T> {
    pub alice: T,
    pub jack: T,
}

impl<T: Copy> PerUav<T> {
    pub fn get(&self, uav: Uav) -> T {
        match uav {
            Uav::Alice => self.alice,
            Uav::Jack => self.jack,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmParams {
    /// Outer ASR gain below which block coordinate descent stops (bits/s/Hz).
    pub bcd_tol: f64,
    /// Surrogate gain below which a beamforming SCA loop stops.
    pub bf_tol: f64,
    pub traj_tol_alice: f64,
    pub traj_tol_jack: f64,
    /// Initial rank penalty control factor, relative to the larger power budget.
    pub penalty_init: f64,
    pub penalty_shrink: f64,
    /// Initial trust radius as a fraction of the per-slot displacement limit.
    pub trust_radius_init: f64,
    pub trust_shrink_alice: f64,
    pub trust_shrink_jack: f64,
    /// Trust-region loops stop once the radius drops below this (meters).
    pub trust_radius_min: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub max_sca_rounds: usize,
    pub max_penalty_rounds: usize,
    pub solver_tol: f64,
    pub rank_one_ratio_min: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            bcd_tol: 1e-3,
            bf_tol: 1e-4,
            traj_tol_alice: 1e-4,
            traj_tol_jack: 1e-4,
            penalty_init: 1e-2,
            penalty_shrink: 0.5,
            trust_radius_init: 1.0,
            trust_shrink_alice: 0.8,
            trust_shrink_jack: 0.8,
            trust_radius_min: 1e-3,
            max_outer_iters: 30,
            max_inner_iters: 50_000,
            max_sca_rounds: 30,
            max_penalty_rounds: 10,
            solver_tol: 1e-7,
            rank_one_ratio_min: 0.999,
        }
    }
}

impl AlgorithmParams {
    pub fn traj_tol(&self, uav: Uav) -> f64 {
        match uav {
            Uav::Alice => self.traj_tol_alice,
            Uav::Jack => self.traj_tol_jack,
        }
    }

    pub fn trust_shrink(&self, uav: Uav) -> f64 {
        match uav {
            Uav::Alice => self.trust_shrink_alice,
            Uav::Jack => self.trust_shrink_jack,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub uav_initial: PerUav<Point2>,
    pub uav_final: PerUav<Point2>,
    pub height_alice: f64,
    pub height_jack: f64,
    pub bob_pos: Point2,
    pub eve_pos: Point2,
    pub targets: Vec<Point2>,
    /// m/s
    pub max_speed: f64,
    /// s
    pub slot_duration: f64,
    /// s
    pub task_duration: f64,
    pub n_slots: usize,
    pub n_sensing_slots: usize,
    pub slots_per_target: usize,
    pub n_antennas: usize,
    pub antenna_spacing_over_wavelength: f64,
    pub pathloss_ref: f64,
    /// W
    pub noise_power_bob: f64,
    /// W
    pub noise_power_eve: f64,
    /// W
    pub p_max_alice: f64,
    /// W
    pub p_max_jack: f64,
    pub residual_jam_bob: f64,
    pub residual_jam_eve: f64,
    pub residual_sense_bob: f64,
    pub residual_sense_eve: f64,
    /// Floor on the distance-normalized sum-beampattern gain.
    pub beampattern_threshold: f64,
    /// Weight on UAV-target distances in slot selection, in [0, 1].
    pub distance_weight: f64,
    /// Enforce the beampattern floor for every target in every sensing slot
    /// instead of only the slot's assigned target.
    #[serde(default)]
    pub sense_all_targets: bool,
    /// Multiply the beampattern gain by the reference path loss before
    /// comparing it against the threshold.
    #[serde(default)]
    pub beampattern_includes_pathloss: bool,
    /// Share of Alice's power kept on the information beam by the
    /// fly-hover-fly baseline in sensing slots; the rest is spread isotropically.
    #[serde(default = "default_fhf_comm_fraction")]
    pub fhf_comm_fraction: f64,
    pub algo: AlgorithmParams,
}

fn default_fhf_comm_fraction() -> f64 {
    0.9
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    db_to_linear(x_dbm) * 1e-3
}

/// The reference simulation setup.
pub fn default_scenario() -> ScenarioConfig {
    let max_speed = 20.0;
    let slot_duration = 0.5;
    let task_duration = 10.0;
    ScenarioConfig {
        uav_initial: PerUav {
            alice: Point2::new(0.0, 0.0),
            jack: Point2::new(0.0, 0.0),
        },
        uav_final: PerUav {
            alice: Point2::new(100.0, 0.0),
            jack: Point2::new(100.0, 0.0),
        },
        height_alice: 120.0,
        height_jack: 100.0,
        bob_pos: Point2::new(40.0, 60.0),
        eve_pos: Point2::new(60.0, 60.0),
        targets: vec![
            Point2::new(20.0, 30.0),
            Point2::new(50.0, 10.0),
            Point2::new(80.0, 30.0),
            Point2::new(50.0, 85.0),
        ],
        max_speed,
        slot_duration,
        task_duration,
        n_slots: (task_duration / slot_duration).round() as usize,
        n_sensing_slots: 8,
        slots_per_target: 2,
        n_antennas: 4,
        antenna_spacing_over_wavelength: 0.5,
        pathloss_ref: db_to_linear(-30.0),
        noise_power_bob: dbm_to_watts(-80.0),
        noise_power_eve: dbm_to_watts(-80.0),
        p_max_alice: dbm_to_watts(30.0),
        p_max_jack: dbm_to_watts(25.0),
        residual_jam_bob: db_to_linear(-20.0),
        residual_jam_eve: db_to_linear(0.0),
        residual_sense_bob: db_to_linear(-20.0),
        residual_sense_eve: db_to_linear(0.0),
        beampattern_threshold: dbm_to_watts(-20.0),
        distance_weight: 0.5,
        sense_all_targets: false,
        beampattern_includes_pathloss: false,
        fhf_comm_fraction: default_fhf_comm_fraction(),
        algo: AlgorithmParams::default(),
    }
}

/// One violated invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Finding {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.findings.push(Finding {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.push(field, message);
        }
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msgs: Vec<String> = self
            .findings
            .iter()
            .map(|f| format!("{}: {}", f.field, f.message))
            .collect();
        Err(Error::InvalidScenario(msgs.join("; ")))
    }
}

impl ScenarioConfig {
    /// Per-slot displacement limit V_max = max_speed · slot_duration (meters).
    pub fn max_displacement(&self) -> f64 {
        self.max_speed * self.slot_duration
    }

    pub fn height(&self, uav: Uav) -> f64 {
        match uav {
            Uav::Alice => self.height_alice,
            Uav::Jack => self.height_jack,
        }
    }

    pub fn p_max(&self, uav: Uav) -> f64 {
        match uav {
            Uav::Alice => self.p_max_alice,
            Uav::Jack => self.p_max_jack,
        }
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    /// Sets the task duration and the matching slot count.
    pub fn set_task_duration(&mut self, seconds: f64) {
        self.task_duration = seconds;
        self.n_slots = (seconds / self.slot_duration).round() as usize;
    }

    /// Effective threshold scale applied to the raw gain before comparison.
    pub fn beampattern_scale(&self) -> f64 {
        if self.beampattern_includes_pathloss {
            self.pathloss_ref
        } else {
            1.0
        }
    }

    /// Scans every invariant and reports all violations.
    pub fn validate(&self) -> ValidationReport {
        self.scan(true)
    }

    /// Like [`validate`](Self::validate) but lets power budgets and the
    /// beampattern threshold be zero, for degenerate-case runs.
    pub fn validate_structure(&self) -> ValidationReport {
        self.scan(false)
    }

    fn scan(&self, strict: bool) -> ValidationReport {
        let mut r = ValidationReport::default();
        let finite = |x: f64| x.is_finite();

        let expected_slots = if self.slot_duration > 0.0 {
            (self.task_duration / self.slot_duration).round()
        } else {
            f64::NAN
        };
        r.check(
            expected_slots == self.n_slots as f64,
            "n_slots",
            format!(
                "n_slots = {} but round(task_duration / slot_duration) = {}",
                self.n_slots, expected_slots
            ),
        );
        r.check(self.n_slots >= 1, "n_slots", "need at least one slot");
        r.check(
            self.n_sensing_slots <= self.n_slots,
            "n_sensing_slots",
            format!("{} sensing slots exceed {} slots", self.n_sensing_slots, self.n_slots),
        );
        r.check(
            self.slots_per_target * self.targets.len() == self.n_sensing_slots,
            "slots_per_target",
            format!(
                "slots_per_target ({}) x targets ({}) != n_sensing_slots ({})",
                self.slots_per_target,
                self.targets.len(),
                self.n_sensing_slots
            ),
        );

        for (name, v) in [
            ("pathloss_ref", self.pathloss_ref),
            ("noise_power_bob", self.noise_power_bob),
            ("noise_power_eve", self.noise_power_eve),
            ("height_alice", self.height_alice),
            ("height_jack", self.height_jack),
            ("max_speed", self.max_speed),
            ("slot_duration", self.slot_duration),
            ("task_duration", self.task_duration),
            ("antenna_spacing_over_wavelength", self.antenna_spacing_over_wavelength),
        ] {
            r.check(finite(v) && v > 0.0, name, format!("must be finite and > 0, got {v}"));
        }
        for (name, v) in [
            ("p_max_alice", self.p_max_alice),
            ("p_max_jack", self.p_max_jack),
            ("beampattern_threshold", self.beampattern_threshold),
        ] {
            let ok = finite(v) && if strict { v > 0.0 } else { v >= 0.0 };
            let bound = if strict { "> 0" } else { ">= 0" };
            r.check(ok, name, format!("must be finite and {bound}, got {v}"));
        }
        for (name, v) in [
            ("residual_jam_bob", self.residual_jam_bob),
            ("residual_jam_eve", self.residual_jam_eve),
            ("residual_sense_bob", self.residual_sense_bob),
            ("residual_sense_eve", self.residual_sense_eve),
            ("distance_weight", self.distance_weight),
            ("fhf_comm_fraction", self.fhf_comm_fraction),
        ] {
            r.check((0.0..=1.0).contains(&v), name, format!("must lie in [0, 1], got {v}"));
        }
        r.check(self.n_antennas >= 1, "n_antennas", "need at least one antenna");

        let points = [
            ("uav_initial.alice", self.uav_initial.alice),
            ("uav_initial.jack", self.uav_initial.jack),
            ("uav_final.alice", self.uav_final.alice),
            ("uav_final.jack", self.uav_final.jack),
            ("bob_pos", self.bob_pos),
            ("eve_pos", self.eve_pos),
        ];
        for (name, p) in points {
            r.check(p.iter().all(|c| c.is_finite()), name, "non-finite coordinate");
        }
        for (k, t) in self.targets.iter().enumerate() {
            r.check(
                t.iter().all(|c| c.is_finite()),
                &format!("targets[{k}]"),
                "non-finite coordinate",
            );
        }

        let budget = self.n_slots as f64 * self.max_displacement();
        for uav in [Uav::Alice, Uav::Jack] {
            let gap = (self.uav_final.get(uav) - self.uav_initial.get(uav)).norm();
            r.check(
                gap <= budget,
                &format!("uav_final.{}", uav.name()),
                format!("endpoint {gap:.3} m away but only {budget:.3} m reachable"),
            );
        }

        let a = &self.algo;
        for (name, v) in [
            ("algo.bcd_tol", a.bcd_tol),
            ("algo.bf_tol", a.bf_tol),
            ("algo.traj_tol_alice", a.traj_tol_alice),
            ("algo.traj_tol_jack", a.traj_tol_jack),
            ("algo.solver_tol", a.solver_tol),
            ("algo.penalty_init", a.penalty_init),
            ("algo.trust_radius_min", a.trust_radius_min),
        ] {
            r.check(finite(v) && v > 0.0, name, format!("must be > 0, got {v}"));
        }
        for (name, v) in [
            ("algo.penalty_shrink", a.penalty_shrink),
            ("algo.trust_shrink_alice", a.trust_shrink_alice),
            ("algo.trust_shrink_jack", a.trust_shrink_jack),
        ] {
            r.check(v > 0.0 && v < 1.0, name, format!("must lie in (0, 1), got {v}"));
        }
        r.check(
            a.trust_radius_init > 0.0 && a.trust_radius_init <= 1.0,
            "algo.trust_radius_init",
            format!("must lie in (0, 1], got {}", a.trust_radius_init),
        );
        r.check(
            a.rank_one_ratio_min > 0.9 && a.rank_one_ratio_min < 1.0,
            "algo.rank_one_ratio_min",
            format!("must lie in (0.9, 1), got {}", a.rank_one_ratio_min),
        );
        for (name, v) in [
            ("algo.max_outer_iters", a.max_outer_iters),
            ("algo.max_inner_iters", a.max_inner_iters),
            ("algo.max_sca_rounds", a.max_sca_rounds),
            ("algo.max_penalty_rounds", a.max_penalty_rounds),
        ] {
            r.check(v >= 1, name, "must be at least 1");
        }
        r
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((db_to_linear(-20.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn defaults_use_linear_units() {
        let c = default_scenario();
        assert!((c.p_max_alice - 1.0).abs() < 1e-12);
        assert!((c.p_max_jack - 0.31623).abs() < 1e-5);
        assert!((c.noise_power_bob - 1e-11).abs() < 1e-24);
        assert!((c.pathloss_ref - 1e-3).abs() < 1e-15);
        assert!((c.residual_jam_bob - 0.01).abs() < 1e-15);
        assert_eq!(c.residual_jam_eve, 1.0);
        assert!((c.beampattern_threshold - 1e-5).abs() < 1e-18);
        assert_eq!(c.n_slots, 20);
        assert!((c.max_displacement() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn defaults_validate_clean() {
        let report = default_scenario().validate();
        assert!(report.is_ok(), "{:?}", report.findings);
    }

    #[test]
    fn divisibility_violation_found() {
        let mut c = default_scenario();
        c.n_sensing_slots = 9;
        let r = c.validate();
        assert!(r.findings.iter().any(|f| f.field == "slots_per_target"));
    }

    #[test]
    fn unreachable_endpoint_found() {
        let mut c = default_scenario();
        c.uav_final.alice = Point2::new(10_000.0, 0.0);
        let r = c.validate();
        assert!(r.findings.iter().any(|f| f.field == "uav_final.alice"));
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = default_scenario();
        c.noise_power_bob = -1.0;
        c.residual_jam_eve = 2.0;
        c.n_antennas = 0;
        let r = c.validate();
        let fields: Vec<_> = r.findings.iter().map(|f| f.field.as_str()).collect();
        assert!(fields.contains(&"noise_power_bob"));
        assert!(fields.contains(&"residual_jam_eve"));
        assert!(fields.contains(&"n_antennas"));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let c = default_scenario();
        let text = c.to_json().unwrap();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(c, back);

        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["noise_power_bbo"] = serde_json::json!(1.0);
        assert!(ScenarioConfig::from_json(&value.to_string()).is_err());
    }
}
