//! Per-UAV trajectory optimization with the other UAV and all beamformers
//! held fixed.
//!
//! The per-slot secrecy rate is rewritten as a difference of logarithms of
//! distance-scaled terms whose dependence on the moving UAV's position is
//! explicit. With ηₘq(u) = a_mq(u)ᴴ W a_mq(u) (a trigonometric sum over the
//! off-diagonal entries of W):
//!
//! * Alice moving: ζ₁q = η_aq + ζ₂q, ζ₂q = J_q·d_aq², with
//!   J_q = φ_jq·tr(W_j A_jq)/d_jq² + σ_q²/β, and
//!   R = log₂ζ₁b − log₂ζ₂b − log₂ζ₁e + log₂ζ₂e.
//! * Jack moving: ζ₄q = φ_jq·η_jq + (σ_q²/β)·d_jq²,
//!   ζ₃q = ζ₄q + (tr(W_a A_aq)/d_aq²)·d_jq², and
//!   R = log₂ζ₃b − log₂ζ₄b − log₂ζ₃e + log₂ζ₄e.
//!
//! Each outer step linearizes every slot's rate at the current waypoints,
//! checks the closed-form gradient against central differences, and solves
//! the resulting chain problem inside a shrinking trust region.

use std::f64::consts::{LOG2_E, PI};

use serde::{Deserialize, Serialize};

use crate::beamforming::SlotBeams;
use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::linalg::{quadratic_form, CMat};
use crate::scenario::ScenarioConfig;
use crate::solver::chain::TrustRegion;
use crate::solver::{solve_chain_socp, ChainSocpProblem, SolverStatus};
use crate::{par, Point2, Uav};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Waypoints 0..=N; index 0 is the initial location and N the final one.
    pub waypoints: Vec<Point2>,
    pub altitude: f64,
}

impl Trajectory {
    /// Constant-velocity interpolation between the configured endpoints.
    pub fn straight_line(config: &ScenarioConfig, uav: Uav) -> Trajectory {
        let n = config.n_slots;
        let a = config.uav_initial.get(uav);
        let b = config.uav_final.get(uav);
        Trajectory {
            waypoints: (0..=n)
                .map(|k| a + (b - a) * (k as f64 / n.max(1) as f64))
                .collect(),
            altitude: config.height(uav),
        }
    }

    pub fn n_slots(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    /// Position used in slot n (1-based).
    pub fn slot(&self, n: usize) -> Point2 {
        self.waypoints[n]
    }
}

/// ψ after `times` geometric shrinks by `r`.
pub fn shrink_radius(psi: f64, r: f64, times: usize) -> f64 {
    (0..times).fold(psi, |p, _| p * r)
}

/// η(u) = aᴴ W a for a transmitter at horizontal position u, kept in the
/// cosine form so its position gradient is closed-form.
struct Phased {
    ground: Point2,
    height: f64,
    diag: f64,
    /// (|W_xy|, arg W_xy, y − x) for x < y.
    pairs: Vec<(f64, f64, f64)>,
    phase_step: f64,
}

impl Phased {
    fn new(w: &CMat, ground: Point2, height: f64, spacing: f64) -> Phased {
        let m = w.nrows();
        let mut pairs = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
        for x in 0..m {
            for y in (x + 1)..m {
                let z = w[(x, y)];
                pairs.push((z.norm(), z.arg(), (y - x) as f64));
            }
        }
        Phased {
            ground,
            height,
            diag: (0..m).map(|k| w[(k, k)].re).sum(),
            pairs,
            phase_step: 2.0 * PI * spacing,
        }
    }

    /// (η, ∇η, d²)
    fn eval(&self, u: &Point2) -> (f64, Point2, f64) {
        let diff = u - self.ground;
        let d2 = diff.norm_squared() + self.height * self.height;
        let d = d2.sqrt();
        let c = self.height / d;
        let mut eta = self.diag;
        let mut slope = 0.0;
        for &(mag, theta, k) in &self.pairs {
            let arg = theta + self.phase_step * k * c;
            eta += 2.0 * mag * arg.cos();
            slope += mag * k * arg.sin();
        }
        // dc/du = −H (u − v)/d³
        let grad = diff * (2.0 * self.phase_step * self.height * slope / (d2 * d));
        (eta, grad, d2)
    }
}

/// Everything in one slot that does not depend on the moving UAV.
enum SlotModel {
    Alice {
        /// Per receiver (Bob, Eve): η_aq model and J_q.
        terms: [(Phased, f64); 2],
    },
    Jack {
        /// Per receiver: η_jq model, φ_jq, σ_q²/β and tr(W_a A_aq)/d_aq².
        terms: [(Phased, f64, f64, f64); 2],
    },
}

const SIGNS: [f64; 2] = [1.0, -1.0];

impl SlotModel {
    fn new(
        config: &ScenarioConfig,
        moving: Uav,
        other_pos: &Point2,
        beams: &SlotBeams,
    ) -> SlotModel {
        let beta = config.pathloss_ref;
        let spacing = config.antenna_spacing_over_wavelength;
        let receivers = [
            (config.bob_pos, config.residual_jam_bob, config.noise_power_bob),
            (config.eve_pos, config.residual_jam_eve, config.noise_power_eve),
        ];
        let steer = |uav: Uav, pos: &Point2, ground: &Point2| {
            let d = distance(pos, config.height(uav), ground);
            let a = crate::geometry::steering_vector(
                config.n_antennas,
                spacing,
                config.height(uav) / d,
            );
            (a, d)
        };
        match moving {
            Uav::Alice => {
                let mk = |(g, phi, noise): (Point2, f64, f64)| {
                    let (a, d) = steer(Uav::Jack, other_pos, &g);
                    let j = phi * quadratic_form(&beams.w_j, &a) / (d * d) + noise / beta;
                    (Phased::new(&beams.w_a, g, config.height_alice, spacing), j)
                };
                SlotModel::Alice {
                    terms: [mk(receivers[0]), mk(receivers[1])],
                }
            }
            Uav::Jack => {
                let mk = |(g, phi, noise): (Point2, f64, f64)| {
                    let (a, d) = steer(Uav::Alice, other_pos, &g);
                    let s = quadratic_form(&beams.w_a, &a) / (d * d);
                    (
                        Phased::new(&beams.w_j, g, config.height_jack, spacing),
                        phi,
                        noise / beta,
                        s,
                    )
                };
                SlotModel::Jack {
                    terms: [mk(receivers[0]), mk(receivers[1])],
                }
            }
        }
    }

    /// Unclamped rate and its closed-form gradient.
    fn eval(&self, u: &Point2) -> (f64, Point2) {
        let mut rate = 0.0;
        let mut grad = Point2::zeros();
        match self {
            SlotModel::Alice { terms } => {
                for ((model, j), s) in terms.iter().zip(SIGNS) {
                    let (eta, deta, d2) = model.eval(u);
                    let z2 = j * d2;
                    let z1 = eta + z2;
                    let dz2 = (u - model.ground) * (2.0 * j);
                    rate += s * (z1.log2() - z2.log2());
                    grad += (deta / z1 + dz2 * (1.0 / z1 - 1.0 / z2)) * (s * LOG2_E);
                }
            }
            SlotModel::Jack { terms } => {
                for ((model, phi, noise, sig), s) in terms.iter().zip(SIGNS) {
                    let (eta, deta, d2) = model.eval(u);
                    let z4 = phi * eta + noise * d2;
                    let z3 = z4 + sig * d2;
                    let r = (u - model.ground) * 2.0;
                    let dz4 = deta * *phi + r * *noise;
                    let dz3 = dz4 + r * *sig;
                    rate += s * (z3.log2() - z4.log2());
                    grad += (dz3 / z3 - dz4 / z4) * (s * LOG2_E);
                }
            }
        }
        (rate, grad)
    }
}

/// Fixed inputs of one trajectory block.
#[derive(Clone, Copy)]
pub struct TrajectoryContext<'a> {
    pub config: &'a ScenarioConfig,
    pub moving: Uav,
    /// The other UAV's trajectory.
    pub other: &'a Trajectory,
    /// Beams for slots 1..=N, `beams[n - 1]` for slot n.
    pub beams: &'a [SlotBeams],
}

impl TrajectoryContext<'_> {
    fn model(&self, slot: usize) -> SlotModel {
        SlotModel::new(
            self.config,
            self.moving,
            &self.other.slot(slot),
            &self.beams[slot - 1],
        )
    }
}

/// Unclamped secrecy-rate difference in `slot` with the moving UAV at `u`.
pub fn rewritten_rate(ctx: &TrajectoryContext, slot: usize, u: &Point2) -> f64 {
    ctx.model(slot).eval(u).0
}

/// Rewritten rate and its analytic gradient in `slot` at `u`.
pub fn rate_gradient(ctx: &TrajectoryContext, slot: usize, u: &Point2) -> (f64, Point2) {
    ctx.model(slot).eval(u)
}

/// Linearization of every slot's rate at an expansion trajectory.
#[derive(Clone, Debug)]
pub struct TrajectorySurrogate {
    /// Rate at the expansion point, per slot 1..=N.
    pub alpha: Vec<f64>,
    /// Rate gradient at the expansion point, per slot 1..=N.
    pub rho: Vec<Point2>,
    /// Waypoints 0..=N the surrogate is built around.
    pub expansion: Vec<Point2>,
    pub radius: f64,
}

impl TrajectorySurrogate {
    pub fn value(&self, slot: usize, u: &Point2) -> f64 {
        self.alpha[slot - 1] + self.rho[slot - 1].dot(&(u - self.expansion[slot]))
    }
}

/// Step for the central-difference gradient check (meters).
pub const FD_STEP: f64 = 1e-3;

pub fn finite_difference(ctx: &TrajectoryContext, slot: usize, u: &Point2) -> Point2 {
    let model = ctx.model(slot);
    let f = |p: Point2| model.eval(&p).0;
    let ex = Point2::new(FD_STEP, 0.0);
    let ey = Point2::new(0.0, FD_STEP);
    Point2::new(
        (f(u + ex) - f(u - ex)) / (2.0 * FD_STEP),
        (f(u + ey) - f(u - ey)) / (2.0 * FD_STEP),
    )
}

/// Whether an analytic gradient agrees with the numeric one.
pub fn gradient_agrees(analytic: &Point2, numeric: &Point2) -> bool {
    (analytic - numeric).norm() <= 1e-4 * numeric.norm() + 1e-8
}

/// Builds the per-slot surrogate and verifies each gradient numerically.
pub fn fot_gradient(
    ctx: &TrajectoryContext,
    expansion: &[Point2],
    radius: f64,
) -> Result<TrajectorySurrogate> {
    let n = ctx.config.n_slots;
    let per_slot = par::try_map_indexed(n, |i| {
        let slot = i + 1;
        let u = expansion[slot];
        let (alpha, rho) = ctx.model(slot).eval(&u);
        let fd = finite_difference(ctx, slot, &u);
        if !gradient_agrees(&rho, &fd) {
            return Err(Error::GradientMismatch {
                slot,
                analytic: [rho.x, rho.y],
                numeric: [fd.x, fd.y],
            });
        }
        Ok((alpha, rho))
    })?;
    let (alpha, rho) = per_slot.into_iter().unzip();
    Ok(TrajectorySurrogate {
        alpha,
        rho,
        expansion: expansion.to_vec(),
        radius,
    })
}

/// Mean unclamped and mean clamped rate over all slots.
pub fn phase_rates(ctx: &TrajectoryContext, waypoints: &[Point2]) -> (f64, f64) {
    let n = ctx.config.n_slots;
    let rates = par::map_indexed(n, |i| rewritten_rate(ctx, i + 1, &waypoints[i + 1]));
    let raw = rates.iter().sum::<f64>() / n as f64;
    let clamped = rates.iter().map(|r| r.max(0.0)).sum::<f64>() / n as f64;
    (raw, clamped)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrustStep {
    pub radius: f64,
    pub candidate_rate: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrajectoryLog {
    pub steps: Vec<TrustStep>,
    pub newton_iterations: usize,
    pub initial_rate: f64,
    pub final_rate: f64,
}

/// Trust-region loop for one UAV. A step is kept only if it raises the mean
/// rate without lowering the clamped mean, so the reported secrecy never
/// regresses; the radius shrinks geometrically after every trial.
pub fn optimize_trajectory(
    ctx: &TrajectoryContext,
    init: &Trajectory,
) -> Result<(Trajectory, TrajectoryLog)> {
    let config = ctx.config;
    let algo = &config.algo;
    let n = config.n_slots;
    let mut current = init.clone();
    let (mut raw, mut clamped) = phase_rates(ctx, &current.waypoints);
    let mut log = TrajectoryLog {
        initial_rate: clamped,
        ..Default::default()
    };
    let shrink = algo.trust_shrink(ctx.moving);
    let mut psi = algo.trust_radius_init * config.max_displacement();

    while psi >= algo.trust_radius_min && n >= 2 {
        let sur = fot_gradient(ctx, &current.waypoints, psi)?;
        let gradients: Vec<Point2> = sur.rho[..n - 1].to_vec();
        if gradients.iter().all(|g| g.norm() == 0.0) {
            break;
        }
        let problem = ChainSocpProblem {
            start: current.waypoints[0],
            end: current.waypoints[n],
            gradients,
            max_step: config.max_displacement(),
            trust: Some(TrustRegion {
                centers: current.waypoints[1..n].to_vec(),
                radius: psi,
            }),
        };
        let (cand, report) = solve_chain_socp(&problem, algo);
        log.newton_iterations += report.iterations;
        if report.status == SolverStatus::Infeasible {
            return Err(Error::SolverInfeasible(format!(
                "{} trajectory chain with trust radius {psi:.3e} m",
                ctx.moving.name()
            )));
        }
        let (cand_raw, cand_clamped) = phase_rates(ctx, &cand);
        let accepted = cand_raw > raw && cand_clamped >= clamped;
        log.steps.push(TrustStep {
            radius: psi,
            candidate_rate: cand_clamped,
            accepted,
        });
        psi *= shrink;
        if accepted {
            let gain = cand_raw - raw;
            current.waypoints = cand;
            raw = cand_raw;
            clamped = cand_clamped;
            if gain <= algo.traj_tol(ctx.moving) {
                break;
            }
        }
    }
    log.final_rate = clamped;
    Ok((current, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SlotChannels;
    use crate::linalg::outer;
    use crate::metrics::rate_difference_sc;
    use crate::scenario::default_scenario;

    fn mrt_beams(config: &ScenarioConfig, a: &Point2, j: &Point2) -> SlotBeams {
        let ch = SlotChannels::new(config, a, j);
        let wa = outer(&ch.alice.bob.steering).scale(config.p_max_alice / config.n_antennas as f64);
        let wj = outer(&ch.jack.eve.steering).scale(config.p_max_jack / config.n_antennas as f64);
        SlotBeams::sc(wa, wj)
    }

    #[test]
    fn straight_line_waypoints() {
        let c = default_scenario();
        let t = Trajectory::straight_line(&c, Uav::Alice);
        assert_eq!(t.waypoints.len(), 21);
        assert!((t.waypoints[3] - Point2::new(15.0, 0.0)).norm() < 1e-12);
        assert_eq!(t.altitude, 120.0);
    }

    #[test]
    fn radius_recursion() {
        assert!((shrink_radius(10.0, 0.5, 3) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn rewrite_matches_trace_form() {
        let c = default_scenario();
        let other = Trajectory::straight_line(&c, Uav::Jack);
        let beams: Vec<SlotBeams> = (1..=c.n_slots)
            .map(|n| mrt_beams(&c, &Point2::new(40.0, 50.0), &other.slot(n)))
            .collect();
        for moving in [Uav::Alice, Uav::Jack] {
            let ctx = TrajectoryContext {
                config: &c,
                moving,
                other: &other,
                beams: &beams,
            };
            for (k, u) in [Point2::new(10.0, 20.0), Point2::new(70.0, 55.0)].iter().enumerate() {
                let slot = 3 + 5 * k;
                let (ap, jp) = match moving {
                    Uav::Alice => (*u, other.slot(slot)),
                    Uav::Jack => (other.slot(slot), *u),
                };
                let ch = SlotChannels::new(&c, &ap, &jp);
                let want = rate_difference_sc(&c, &ch, &beams[slot - 1]);
                let got = rewritten_rate(&ctx, slot, u);
                assert!((want - got).abs() < 1e-9, "{moving:?}: {want} vs {got}");
            }
        }
    }
}
