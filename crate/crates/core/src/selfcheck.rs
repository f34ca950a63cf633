//! Randomized invariant checks run by `secure-isac validate`. Each probe
//! returns the worst measured deviation so callers can apply their own
//! tolerance; [`run_suite`] applies the default ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::mrt_beamformer;
use crate::beamforming::{extract_rank_one, extraction_error, surrogate_coeffs, surrogate_rate, SlotBeams};
use crate::geometry::{Link, SlotChannels};
use crate::linalg::{outer, trace, CMat, CVec, C64};
use crate::metrics::{rate_difference, rate_difference_sc, secrecy_rate, slot_gains, slot_sinrs};
use crate::scenario::{default_scenario, ScenarioConfig};
use crate::scs::{brute_force_min, greedy_select};
use crate::trajectory::{finite_difference, rate_gradient, rewritten_rate, Trajectory, TrajectoryContext};
use crate::{Point2, Uav};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Worst value of a probe over its samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub samples: usize,
    pub worst: f64,
}

impl Probe {
    fn over(samples: usize, values: impl Iterator<Item = f64>) -> Probe {
        Probe {
            samples,
            worst: values.fold(0.0, f64::max),
        }
    }
}

/// A point in the box spanned by the scenario's nodes, padded by 20 m.
pub fn random_position(rng: &mut impl Rng, config: &ScenarioConfig) -> Point2 {
    let pts = [
        config.uav_initial.alice,
        config.uav_initial.jack,
        config.uav_final.alice,
        config.uav_final.jack,
        config.bob_pos,
        config.eve_pos,
    ];
    let lo = pts.iter().chain(&config.targets).fold(Point2::repeat(f64::INFINITY), |a, p| a.inf(p));
    let hi = pts.iter().chain(&config.targets).fold(Point2::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
    let pad = 20.0;
    Point2::new(rng.gen_range(lo.x - pad..hi.x + pad), rng.gen_range(lo.y - pad..hi.y + pad))
}

/// Random PSD matrix of random rank with trace exactly `power`.
pub fn random_psd(rng: &mut impl Rng, m: usize, power: f64) -> CMat {
    let rank = rng.gen_range(1..=m);
    let g = CMat::from_fn(m, rank, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let x = &g * g.adjoint();
    let tr = trace(&x);
    let x = if tr > 0.0 { x.scale(power / tr) } else { x };
    crate::linalg::hermitian_part(&x)
}

/// Random covariances within the budgets; `sensing` also draws R_r out of
/// Alice's budget.
pub fn random_beams(rng: &mut impl Rng, config: &ScenarioConfig, sensing: bool) -> SlotBeams {
    let m = config.n_antennas;
    let pa = config.p_max_alice * rng.gen_range(0.05..1.0);
    let pj = config.p_max_jack * rng.gen_range(0.05..1.0);
    let share = if sensing { rng.gen_range(0.1..0.9) } else { 1.0 };
    SlotBeams::new(
        random_psd(rng, m, pa * share),
        random_psd(rng, m, pj),
        if sensing {
            random_psd(rng, m, pa * (1.0 - share))
        } else {
            CMat::zeros(m, m)
        },
    )
}

fn constant_trajectory(config: &ScenarioConfig, uav: Uav, p: Point2) -> Trajectory {
    Trajectory {
        waypoints: vec![p; config.n_slots + 1],
        altitude: config.height(uav),
    }
}

/// Gradient samples: analytic vs central-difference gradient of the
/// rewritten rate. Returns the worst of |ρ − fd| / (1e-4·|fd| + 1e-8).
pub fn probe_gradient(config: &ScenarioConfig, samples: usize, seed: u64) -> Probe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratios: Vec<f64> = (0..samples)
        .map(|i| {
            let moving = if i % 2 == 0 { Uav::Alice } else { Uav::Jack };
            let other = constant_trajectory(config, moving.other(), random_position(&mut rng, config));
            let beams = vec![random_beams(&mut rng, config, false); config.n_slots];
            let ctx = TrajectoryContext {
                config,
                moving,
                other: &other,
                beams: &beams,
            };
            let u = random_position(&mut rng, config);
            let (_, rho) = rate_gradient(&ctx, 1, &u);
            let fd = finite_difference(&ctx, 1, &u);
            (rho - fd).norm() / (1e-4 * fd.norm() + 1e-8)
        })
        .collect();
    Probe::over(samples, ratios.into_iter())
}

/// Surrogate probes: for each expansion, the largest violation of
/// R̄ ≤ R over `per_expansion` random points, and the tangency gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurrogateProbe {
    pub bound: Probe,
    pub tangency: Probe,
}

pub fn probe_surrogate(
    config: &ScenarioConfig,
    sensing: bool,
    expansions: usize,
    per_expansion: usize,
    seed: u64,
) -> SurrogateProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut excess = Vec::new();
    let mut gaps = Vec::new();
    for _ in 0..expansions {
        let ch = SlotChannels::new(config, &random_position(&mut rng, config), &random_position(&mut rng, config));
        let x0 = random_beams(&mut rng, config, sensing);
        let coeffs = surrogate_coeffs(config, &ch, &x0);
        gaps.push((surrogate_rate(config, &ch, &coeffs, &x0) - rate_difference_sc(config, &ch, &x0)).abs());
        for _ in 0..per_expansion {
            let x = random_beams(&mut rng, config, sensing);
            excess.push(surrogate_rate(config, &ch, &coeffs, &x) - rate_difference_sc(config, &ch, &x));
        }
    }
    SurrogateProbe {
        bound: Probe::over(excess.len(), excess.iter().map(|e| e.max(0.0))),
        tangency: Probe::over(gaps.len(), gaps.into_iter()),
    }
}

/// Rewritten rate against the channel-based metrics on a `side`×`side`
/// grid of positions for each UAV. Returns the worst absolute difference.
pub fn probe_rate_equivalence(config: &ScenarioConfig, side: usize, seed: u64) -> Probe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beams = vec![random_beams(&mut rng, config, false); config.n_slots];
    let fixed = random_position(&mut rng, config);
    let (lo, hi) = (-20.0, 120.0);
    let step = (hi - lo) / (side.max(2) - 1) as f64;
    let mut diffs = Vec::new();
    for moving in [Uav::Alice, Uav::Jack] {
        let other = constant_trajectory(config, moving.other(), fixed);
        let ctx = TrajectoryContext {
            config,
            moving,
            other: &other,
            beams: &beams,
        };
        for i in 0..side {
            for j in 0..side {
                let u = Point2::new(lo + i as f64 * step, lo + j as f64 * step);
                let ch = match moving {
                    Uav::Alice => SlotChannels::new(config, &u, &fixed),
                    Uav::Jack => SlotChannels::new(config, &fixed, &u),
                };
                diffs.push((rewritten_rate(&ctx, 1, &u) - rate_difference_sc(config, &ch, &beams[0])).abs());
            }
        }
    }
    Probe::over(diffs.len(), diffs.into_iter())
}

/// Closed-form values for Alice at 120 m directly above a node with full
/// power MRT and no interference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpotValues {
    pub sinr: f64,
    pub rate: f64,
    pub beampattern: f64,
}

pub fn spot_values() -> SpotValues {
    let mut c = default_scenario();
    c.targets = vec![c.bob_pos];
    let ch = SlotChannels::new(&c, &c.bob_pos, &c.eve_pos);
    let w = outer(&mrt_beamformer(&ch.alice.bob.channel, c.p_max_alice).expect("nonzero channel"));
    let m = c.n_antennas;
    let beams = SlotBeams::new(w.clone(), CMat::zeros(m, m), CMat::zeros(m, m));
    let (sinr, _) = slot_sinrs(&c, &ch, &beams);
    // Beampattern of the same beam steered at a target right below Alice.
    let a = &ch.alice.targets[0];
    let g = slot_gains(&ch, &SlotBeams::new(outer(&mrt_beamformer(&a.steering, c.p_max_alice).expect("nonzero")), CMat::zeros(m, m), CMat::zeros(m, m)));
    SpotValues {
        sinr,
        rate: secrecy_rate(sinr, 0.0),
        beampattern: g[0],
    }
}

/// Greedy slot selection checked on random instances. Counts instances
/// that are infeasible, not step-optimal, below the exhaustive optimum, or
/// (when no two targets compete for a slot) above it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GreedyProbe {
    pub instances: usize,
    pub infeasible: usize,
    pub not_step_optimal: usize,
    pub below_optimum: usize,
    pub uncontested: usize,
    pub uncontested_suboptimal: usize,
}

impl GreedyProbe {
    pub fn passed(&self) -> bool {
        self.infeasible + self.not_step_optimal + self.below_optimum + self.uncontested_suboptimal == 0
    }
}

pub fn probe_greedy(instances: usize, seed: u64) -> GreedyProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = GreedyProbe {
        instances,
        ..GreedyProbe::default()
    };
    for _ in 0..instances {
        let k = rng.gen_range(1..=2);
        let spt = rng.gen_range(1..=3);
        let n = rng.gen_range(k * spt..=8usize.max(k * spt));
        let d: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(50.0..200.0)).collect()).collect();
        let a = match greedy_select(&d, spt) {
            Ok(a) => a,
            Err(_) => {
                p.infeasible += 1;
                continue;
            }
        };
        let mut used = vec![false; n];
        let mut ok = true;
        for (row, picks) in d.iter().zip(&a.per_target) {
            ok &= picks.len() == spt && picks.iter().all(|&s| (1..=n).contains(&s) && !used[s - 1]);
            if !ok {
                break;
            }
            // Step optimality: no unused slot beats the worst pick.
            let worst = picks.iter().map(|&s| row[s - 1]).fold(f64::NEG_INFINITY, f64::max);
            let step_ok = (0..n).all(|i| used[i] || picks.contains(&(i + 1)) || row[i] >= worst);
            if !step_ok {
                p.not_step_optimal += 1;
            }
            for &s in picks {
                used[s - 1] = true;
            }
        }
        if !ok {
            p.infeasible += 1;
            continue;
        }
        let best = brute_force_min(&d, spt).expect("instance has a feasible assignment");
        let total = a.total_distance();
        if total < best - 1e-9 {
            p.below_optimum += 1;
        }
        // Each target's unconstrained favorites, compared across targets.
        let favorites: Vec<Vec<usize>> = d
            .iter()
            .map(|row| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&x, &y| row[x].total_cmp(&row[y]).then(x.cmp(&y)));
                idx.truncate(spt);
                idx
            })
            .collect();
        let contested = favorites.iter().enumerate().any(|(i, f)| favorites[i + 1..].iter().any(|g| f.iter().any(|s| g.contains(s))));
        if !contested {
            p.uncontested += 1;
            if (total - best).abs() > 1e-9 {
                p.uncontested_suboptimal += 1;
            }
        }
    }
    p
}

/// MRT against random unit beams; returns how many beat MRT.
pub fn probe_mrt(config: &ScenarioConfig, trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = config.n_antennas;
    let link = Link::new(config, &random_position(&mut rng, config), config.height_alice, &config.bob_pos);
    let best = match mrt_beamformer(&link.channel, 1.0) {
        Ok(w) => link.channel.dotc(&w).norm_sqr(),
        Err(_) => return trials,
    };
    (0..trials)
        .filter(|_| {
            let v = CVec::from_fn(m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let v = v.unscale(v.norm());
            link.channel.dotc(&v).norm_sqr() > best * (1.0 + 1e-12)
        })
        .count()
}

/// Worst rank-one extraction error over random rank-one covariances.
pub fn probe_rank_one(config: &ScenarioConfig, samples: usize, seed: u64) -> Probe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = config.n_antennas;
    let errs: Vec<f64> = (0..samples)
        .map(|_| {
            let v = CVec::from_fn(m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let w = outer(&v);
            let r = extract_rank_one(&w, config.algo.rank_one_ratio_min);
            if r.low_rank_warning {
                f64::INFINITY
            } else {
                extraction_error(&w, &r.beam)
            }
        })
        .collect();
    Probe::over(samples, errs.into_iter())
}

/// Runs every probe on `config` with the default tolerances. An invalid
/// configuration yields its validation findings and nothing else.
pub fn run_suite(config: &ScenarioConfig, seed: u64) -> Vec<Check> {
    let report = config.validate();
    if !report.is_ok() {
        return report
            .findings
            .iter()
            .map(|f| Check::new(&format!("config.{}", f.field), false, &f.message))
            .collect();
    }
    let mut out = vec![Check::new("config.valid", true, "all fields within range")];

    let g = probe_gradient(config, 50, seed);
    out.push(Check::new(
        "trajectory.gradient_matches_finite_difference",
        g.worst <= 1.0,
        format!("{} samples, worst error/tolerance {:.3e}", g.samples, g.worst),
    ));
    for (sensing, name) in [(false, "beamforming.surrogate_sc"), (true, "beamforming.surrogate_scs")] {
        let s = probe_surrogate(config, sensing, 10, 100, seed + 1);
        out.push(Check::new(
            &format!("{name}.lower_bound"),
            s.bound.worst <= 1e-9,
            format!("{} samples, worst excess {:.3e}", s.bound.samples, s.bound.worst),
        ));
        out.push(Check::new(
            &format!("{name}.tangent"),
            s.tangency.worst <= 1e-9,
            format!("{} expansions, worst gap {:.3e}", s.tangency.samples, s.tangency.worst),
        ));
    }
    let r = probe_rate_equivalence(config, 10, seed + 2);
    out.push(Check::new(
        "trajectory.rewritten_rate_matches_metrics",
        r.worst <= 1e-9,
        format!("{} grid points, worst difference {:.3e}", r.samples, r.worst),
    ));
    let spot = spot_values();
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    let spot_ok = rel(spot.sinr, 2.7778e4) <= 1e-3 && rel(spot.rate, 14.762) <= 1e-3 && rel(spot.beampattern, 2.7778e-4) <= 1e-3;
    out.push(Check::new(
        "metrics.overhead_spot_values",
        spot_ok,
        format!("sinr {:.5e}, rate {:.4}, beampattern {:.5e}", spot.sinr, spot.rate, spot.beampattern),
    ));
    let rd = rate_difference(10.0, 10.0).abs() + secrecy_rate(1.0, 3.0);
    out.push(Check::new("metrics.secrecy_rate_clamps_at_zero", rd == 0.0, format!("residual {rd:e}")));
    let gr = probe_greedy(200, seed + 3);
    out.push(Check::new(
        "scs.greedy_against_exhaustive",
        gr.passed(),
        format!(
            "{} instances: {} infeasible, {} not step-optimal, {} below optimum, {}/{} uncontested off optimum",
            gr.instances, gr.infeasible, gr.not_step_optimal, gr.below_optimum, gr.uncontested_suboptimal, gr.uncontested
        ),
    ));
    let beaten = probe_mrt(config, 1000, seed + 4);
    out.push(Check::new("baselines.mrt_maximizes_gain", beaten == 0, format!("{beaten} of 1000 random beams beat MRT")));
    let ro = probe_rank_one(config, 100, seed + 5);
    out.push(Check::new(
        "beamforming.rank_one_extraction",
        ro.worst <= 1e-9,
        format!("{} samples, worst error {:.3e}", ro.samples, ro.worst),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_defaults() {
        let checks = run_suite(&default_scenario(), 7);
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn single_antenna_suite_passes() {
        let mut c = default_scenario();
        c.n_antennas = 1;
        for check in run_suite(&c, 11) {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }

    #[test]
    fn bad_noise_is_reported() {
        let mut c = default_scenario();
        c.noise_power_bob = -1.0;
        let checks = run_suite(&c, 0);
        assert!(checks.iter().any(|k| !k.passed && k.name.contains("noise_power_bob")));
    }
}
