//! Per-slot transmit covariance design by semidefinite relaxation,
//! successive convex approximation and a rank-one penalty.
//!
//! With E = tr(H_ae W_a) + φ_je tr(H_je W_j) + φ_re tr(H_ae R_r) + σ_e² and
//! B = φ_jb tr(H_jb W_j) + φ_rb tr(H_ab R_r) + σ_b², the slot rate is
//!
//! ```text
//! R = log₂(tr(H_ab W_a) + B) + log₂(E − tr(H_ae W_a)) − log₂E − log₂B
//! ```
//!
//! The last two terms are concave-negative; replacing them by their tangent
//! at the current point gives the global lower bound
//! `R̄ = log₂(…) + log₂(…) − a − b(E − E⁰) − c(B − B⁰)` with
//! a = log₂E⁰ + log₂B⁰, b = log₂e/E⁰, c = log₂e/B⁰. Rank one is encouraged by
//! subtracting (1/ι)·tr((I − p pᴴ)W), the linearization of ‖W‖_* − ‖W‖₂ at
//! the principal eigenvector p of the current iterate.

use std::f64::consts::LOG2_E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ChannelSet, Link, SlotChannels};
use crate::linalg::{eigh, frobenius, identity, outer, principal, rank_ratio, trace, trace_product, zeros, CMat, CVec};
use crate::metrics::rate_difference_sc;
use crate::scenario::ScenarioConfig;
use crate::solver::{
    solve_log_affine_sdp, BudgetGroup, LinearConstraint, LogAffineSdpProblem, LogTerm,
    SolverStats, SolverStatus,
};
use crate::{par, Uav};

/// Leading-eigenvector extraction of a PSD covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne {
    /// √λ_max · v_max
    pub beam: CVec,
    /// λ_max / tr
    pub ratio: f64,
    /// Set when the ratio is below the configured minimum.
    pub low_rank_warning: bool,
}

pub fn extract_rank_one(w: &CMat, ratio_min: f64) -> RankOne {
    let (lam, v) = principal(w);
    let ratio = rank_ratio(w);
    RankOne {
        beam: v.scale(lam.max(0.0).sqrt()),
        ratio,
        low_rank_warning: ratio < ratio_min,
    }
}

/// ‖w wᴴ − W‖_F / tr W (0 for the zero matrix).
pub fn extraction_error(w: &CMat, beam: &CVec) -> f64 {
    let tr = trace(w);
    if tr <= 0.0 {
        return 0.0;
    }
    frobenius(&(outer(beam) - w)) / tr
}

/// Covariances for one slot. `r_r` is zero outside sensing slots.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotBeams {
    #[serde(skip)]
    pub w_a: CMat,
    #[serde(skip)]
    pub w_j: CMat,
    #[serde(skip)]
    pub r_r: CMat,
    #[serde(skip)]
    pub beam_a: CVec,
    #[serde(skip)]
    pub beam_j: CVec,
    pub rank_ratio_a: f64,
    pub rank_ratio_j: f64,
}

impl SlotBeams {
    pub fn new(w_a: CMat, w_j: CMat, r_r: CMat) -> SlotBeams {
        let ea = extract_rank_one(&w_a, 0.0);
        let ej = extract_rank_one(&w_j, 0.0);
        SlotBeams {
            w_a,
            w_j,
            r_r,
            beam_a: ea.beam,
            beam_j: ej.beam,
            rank_ratio_a: ea.ratio,
            rank_ratio_j: ej.ratio,
        }
    }

    pub fn sc(w_a: CMat, w_j: CMat) -> SlotBeams {
        let m = w_a.nrows();
        SlotBeams::new(w_a, w_j, zeros(m))
    }

    pub fn zeros(m: usize) -> SlotBeams {
        SlotBeams::sc(zeros(m), zeros(m))
    }

    pub fn is_rank_one(&self, ratio_min: f64) -> bool {
        self.rank_ratio_a >= ratio_min && self.rank_ratio_j >= ratio_min
    }

    fn vars(&self, with_rr: bool) -> Vec<CMat> {
        let mut v = vec![self.w_a.clone(), self.w_j.clone()];
        if with_rr {
            v.push(self.r_r.clone());
        }
        v
    }

    fn from_vars(mut v: Vec<CMat>) -> SlotBeams {
        let m = v[0].nrows();
        let r_r = if v.len() > 2 { v.pop().unwrap() } else { zeros(m) };
        let w_j = v.pop().unwrap();
        let w_a = v.pop().unwrap();
        SlotBeams::new(w_a, w_j, r_r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeamformingPlan {
    /// `slots[n - 1]` holds slot n.
    pub slots: Vec<SlotBeams>,
}

impl BeamformingPlan {
    pub fn zeros(config: &ScenarioConfig) -> BeamformingPlan {
        BeamformingPlan {
            slots: vec![SlotBeams::zeros(config.n_antennas); config.n_slots],
        }
    }

    /// Alice toward Bob and Jack toward Eve, each at `fraction` of its budget.
    pub fn mrt(config: &ScenarioConfig, channels: &ChannelSet, fraction: f64) -> BeamformingPlan {
        BeamformingPlan {
            slots: channels
                .slots
                .iter()
                .map(|ch| mrt_slot(config, ch, fraction))
                .collect(),
        }
    }
}

/// P · h hᴴ / ‖h‖², or zero for a vanishing channel.
pub fn mrt_covariance(link: &Link, power: f64) -> CMat {
    let norm = link.channel.norm_squared();
    if norm == 0.0 || power == 0.0 {
        return zeros(link.channel.len());
    }
    link.channel_outer.scale(power / norm)
}

pub fn mrt_slot(config: &ScenarioConfig, ch: &SlotChannels, fraction: f64) -> SlotBeams {
    SlotBeams::sc(
        mrt_covariance(&ch.alice.bob, fraction * config.p_max_alice),
        mrt_covariance(&ch.jack.eve, fraction * config.p_max_jack),
    )
}

/// Tangent-plane constants of the two concave-negative log terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurrogateCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SurrogateCoeffs {
    /// From the two expansion denominators (watts).
    pub fn from_denominators(e_den: f64, b_den: f64) -> SurrogateCoeffs {
        SurrogateCoeffs {
            a: e_den.log2() + b_den.log2(),
            b: LOG2_E / e_den,
            c: LOG2_E / b_den,
        }
    }

    fn e_den(&self) -> f64 {
        LOG2_E / self.b
    }

    fn b_den(&self) -> f64 {
        LOG2_E / self.c
    }
}

struct Denominators {
    /// tr(H_ab W_a) + B
    bob_total: f64,
    /// E − tr(H_ae W_a)
    eve_interf: f64,
    e: f64,
    b: f64,
}

fn denominators(config: &ScenarioConfig, ch: &SlotChannels, x: &SlotBeams) -> Denominators {
    let hab = &ch.alice.bob.channel_outer;
    let hae = &ch.alice.eve.channel_outer;
    let b = config.residual_jam_bob * trace_product(&ch.jack.bob.channel_outer, &x.w_j)
        + config.residual_sense_bob * trace_product(hab, &x.r_r)
        + config.noise_power_bob;
    let eve_interf = config.residual_jam_eve * trace_product(&ch.jack.eve.channel_outer, &x.w_j)
        + config.residual_sense_eve * trace_product(hae, &x.r_r)
        + config.noise_power_eve;
    Denominators {
        bob_total: trace_product(hab, &x.w_a) + b,
        eve_interf,
        e: trace_product(hae, &x.w_a) + eve_interf,
        b,
    }
}

/// Coefficients at an expansion point; `R_r` terms vanish when it is zero.
pub fn surrogate_coeffs(config: &ScenarioConfig, ch: &SlotChannels, at: &SlotBeams) -> SurrogateCoeffs {
    let d = denominators(config, ch, at);
    SurrogateCoeffs::from_denominators(d.e, d.b)
}

/// The lower bound R̄ evaluated at `x`.
pub fn surrogate_rate(
    config: &ScenarioConfig,
    ch: &SlotChannels,
    coeffs: &SurrogateCoeffs,
    x: &SlotBeams,
) -> f64 {
    let d = denominators(config, ch, x);
    d.bob_total.log2() + d.eve_interf.log2()
        - coeffs.a
        - coeffs.b * (d.e - coeffs.e_den())
        - coeffs.c * (d.b - coeffs.b_den())
}

/// Beampattern floors active in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingSpec {
    pub targets: Vec<usize>,
    /// Floor on the scaled gain.
    pub threshold: f64,
}

/// Coefficients (on W_a/R_r, on W_j) of the scaled gain at target k.
pub fn gain_coeffs(config: &ScenarioConfig, ch: &SlotChannels, k: usize) -> (CMat, CMat) {
    let s = config.beampattern_scale();
    let la = &ch.alice.targets[k];
    let lj = &ch.jack.targets[k];
    (
        la.steering_outer.scale(s / (la.distance * la.distance)),
        lj.steering_outer.scale(s / (lj.distance * lj.distance)),
    )
}

/// Highest scaled gain at target k within the power budgets.
pub fn max_attainable_gain(config: &ScenarioConfig, ch: &SlotChannels, k: usize) -> f64 {
    let (ga, gj) = gain_coeffs(config, ch, k);
    config.p_max_alice * principal(&ga).0 + config.p_max_jack * principal(&gj).0
}

/// Unit vector for the rank penalty: the principal direction of `w`, or the
/// steering direction toward the intended node when `w` is (nearly) zero.
fn penalty_direction(w: &CMat, fallback: &CVec, budget: f64) -> CVec {
    if trace(w) > 1e-12 * budget.max(1e-300) {
        principal(w).1
    } else {
        fallback.unscale(fallback.norm().max(1e-300))
    }
}

fn build_problem(
    config: &ScenarioConfig,
    ch: &SlotChannels,
    sensing: Option<&SensingSpec>,
    coeffs: &SurrogateCoeffs,
    at: &SlotBeams,
    inv_iota: f64,
) -> LogAffineSdpProblem {
    let m = config.n_antennas;
    let with_rr = sensing.is_some();
    let hab = &ch.alice.bob.channel_outer;
    let hae = &ch.alice.eve.channel_outer;
    let hjb = &ch.jack.bob.channel_outer;
    let hje = &ch.jack.eve.channel_outer;
    let (pjb, pje) = (config.residual_jam_bob, config.residual_jam_eve);
    let (prb, pre) = (config.residual_sense_bob, config.residual_sense_eve);
    let SurrogateCoeffs { a, b, c } = *coeffs;

    let mut t_bob = vec![(0, hab.clone()), (1, hjb.scale(pjb))];
    let mut t_eve = vec![(1, hje.scale(pje))];
    let pa = penalty_direction(&at.w_a, &ch.alice.bob.steering, config.p_max_alice);
    let pj = penalty_direction(&at.w_j, &ch.jack.eve.steering, config.p_max_jack);
    let pen = |p: &CVec| (identity(m) - outer(p)).scale(-inv_iota);
    let mut linear = vec![
        (0, hae.scale(-b) + pen(&pa)),
        (1, hje.scale(-b * pje) - hjb.scale(c * pjb) + pen(&pj)),
    ];
    if with_rr {
        t_bob.push((2, hab.scale(prb)));
        t_eve.push((2, hae.scale(pre)));
        linear.push((2, hae.scale(-b * pre) - hab.scale(c * prb)));
    }
    let constant = -a + b * (coeffs.e_den() - config.noise_power_eve)
        + c * (coeffs.b_den() - config.noise_power_bob);

    let (groups, constraints) = match sensing {
        None => (
            vec![
                BudgetGroup {
                    vars: vec![0],
                    budget: config.p_max_alice,
                },
                BudgetGroup {
                    vars: vec![1],
                    budget: config.p_max_jack,
                },
            ],
            vec![],
        ),
        Some(spec) => (
            vec![
                BudgetGroup {
                    vars: vec![0, 2],
                    budget: config.p_max_alice,
                },
                BudgetGroup {
                    vars: vec![1],
                    budget: config.p_max_jack,
                },
            ],
            spec.targets
                .iter()
                .map(|&k| {
                    let (ga, gj) = gain_coeffs(config, ch, k);
                    LinearConstraint {
                        coeffs: vec![(0, ga.clone()), (2, ga), (1, gj)],
                        lower: spec.threshold,
                    }
                })
                .collect(),
        ),
    };

    LogAffineSdpProblem {
        dim: m,
        n_vars: if with_rr { 3 } else { 2 },
        groups,
        log_terms: vec![
            LogTerm {
                weight: LOG2_E,
                offset: config.noise_power_bob,
                coeffs: t_bob,
            },
            LogTerm {
                weight: LOG2_E,
                offset: config.noise_power_eve,
                coeffs: t_eve,
            },
        ],
        linear,
        constant,
        constraints,
    }
}

/// Iterate log of one slot's solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SlotLog {
    /// Penalized surrogate value after each SCA round.
    pub surrogate: Vec<f64>,
    /// True (unclamped) rate after each SCA round.
    pub true_rate: Vec<f64>,
    pub penalty_rounds: usize,
    pub stats: SolverStats,
    /// Final covariances failed the rank-one ratio.
    pub low_rank_warning: bool,
    /// Output worse than the start; the start was returned instead.
    pub reverted: bool,
}

/// Sensing feasibility precheck; returns the smallest attainable-gain target
/// when some floor cannot be met.
pub fn check_sensing(
    config: &ScenarioConfig,
    ch: &SlotChannels,
    slot: usize,
    spec: &SensingSpec,
) -> Result<()> {
    for &k in &spec.targets {
        let best = max_attainable_gain(config, ch, k);
        if best < spec.threshold * (1.0 - config.algo.solver_tol) {
            return Err(Error::SensingInfeasible {
                slot,
                max_gain: best,
                threshold: spec.threshold,
            });
        }
    }
    Ok(())
}

/// Whether every floor in `spec` holds at `x`.
pub fn meets_floor(config: &ScenarioConfig, ch: &SlotChannels, spec: &SensingSpec, x: &SlotBeams) -> bool {
    spec.targets.iter().all(|&k| {
        let (ga, gj) = gain_coeffs(config, ch, k);
        let g = trace_product(&ga, &x.w_a) + trace_product(&ga, &x.r_r) + trace_product(&gj, &x.w_j);
        g >= spec.threshold - crate::metrics::sensing_tol(config)
    })
}

/// The SCA/penalty loop for one slot, started from a feasible `init`.
pub fn solve_slot(
    config: &ScenarioConfig,
    ch: &SlotChannels,
    slot: usize,
    sensing: Option<&SensingSpec>,
    init: &SlotBeams,
) -> Result<(SlotBeams, SlotLog)> {
    let algo = &config.algo;
    if let Some(spec) = sensing {
        check_sensing(config, ch, slot, spec)?;
    }
    let with_rr = sensing.is_some();
    let mut log = SlotLog::default();
    let start_rate = rate_difference_sc(config, ch, init);
    let mut x = init.clone();
    let budget = config.p_max_alice.max(config.p_max_jack);
    if budget <= 0.0 {
        return Ok((x, log));
    }
    let mut inv_iota = 1.0 / (algo.penalty_init * budget);

    for _ in 0..algo.max_penalty_rounds.max(1) {
        log.penalty_rounds += 1;
        for _ in 0..algo.max_sca_rounds {
            let coeffs = surrogate_coeffs(config, ch, &x);
            let problem = build_problem(config, ch, sensing, &coeffs, &x, inv_iota);
            let start = x.vars(with_rr);
            let here = problem.objective(&start);
            let (sol, report) = solve_log_affine_sdp(&problem, Some(&start), algo);
            log.stats.record(&report);
            if report.status == SolverStatus::Infeasible {
                if let Some(best) = report.max_attainable {
                    return Err(Error::SensingInfeasible {
                        slot,
                        max_gain: best,
                        threshold: sensing.map_or(0.0, |s| s.threshold),
                    });
                }
                break;
            }
            let gain = report.objective - here;
            let start_ok = sensing.is_none_or(|spec| meets_floor(config, ch, spec, &x));
            if gain > 0.0 || !start_ok {
                x = SlotBeams::from_vars(sol);
            }
            log.surrogate.push(report.objective.max(here));
            log.true_rate.push(rate_difference_sc(config, ch, &x));
            if gain <= algo.bf_tol {
                break;
            }
        }
        if x.is_rank_one(algo.rank_one_ratio_min) {
            break;
        }
        inv_iota /= algo.penalty_shrink;
    }

    if rate_difference_sc(config, ch, &x) < start_rate - 1e-9 {
        log.reverted = true;
        x = init.clone();
    }
    log.low_rank_warning = !x.is_rank_one(algo.rank_one_ratio_min);
    Ok((x, log))
}

/// Communication-only slot solve.
pub fn solve_sc_beamforming(
    config: &ScenarioConfig,
    ch: &SlotChannels,
    slot: usize,
    init: &SlotBeams,
) -> Result<(SlotBeams, SlotLog)> {
    solve_slot(config, ch, slot, None, init)
}

/// One beamforming block over all slots as communication-only slots. A slot
/// keeps its previous covariances unless the new ones raise its rate.
pub fn beamforming_block(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    previous: &BeamformingPlan,
) -> Result<(BeamformingPlan, SolverStats, usize)> {
    let results = par::try_map_indexed(channels.n_slots(), |i| {
        let ch = &channels.slots[i];
        let prev = &previous.slots[i];
        let (cand, log) = solve_sc_beamforming(config, ch, i + 1, prev)?;
        let improved = rate_difference_sc(config, ch, &cand) > rate_difference_sc(config, ch, prev);
        Ok::<_, Error>((if improved { cand } else { prev.clone() }, log))
    })?;
    let mut stats = SolverStats::default();
    let mut warnings = 0;
    let mut slots = Vec::with_capacity(results.len());
    for (beams, log) in results {
        stats.merge(&log.stats);
        warnings += usize::from(!beams.is_rank_one(config.algo.rank_one_ratio_min));
        slots.push(beams);
    }
    Ok((BeamformingPlan { slots }, stats, warnings))
}

/// Eigenvalues of `w` below this fraction of its trace count as zero.
pub fn effective_rank(w: &CMat) -> usize {
    let tr = trace(w);
    if tr <= 0.0 {
        return 0;
    }
    eigh(w).0.iter().filter(|l| **l > 1e-6 * tr).count()
}

/// Steering direction a UAV uses by default in MRT.
pub fn intended_link(ch: &SlotChannels, uav: Uav) -> &Link {
    match uav {
        Uav::Alice => &ch.alice.bob,
        Uav::Jack => &ch.jack.eve,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{nuclear_norm, spectral_norm, C64};
    use crate::scenario::default_scenario;
    use crate::Point2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slot_channels(c: &ScenarioConfig) -> SlotChannels {
        SlotChannels::new(c, &Point2::new(40.0, 60.0), &Point2::new(60.0, 60.0))
    }

    #[test]
    fn coefficient_examples() {
        let k = SurrogateCoeffs::from_denominators(1e-7 + 1e-7 + 1e-11, 0.01 * 1e-7 + 1e-11);
        assert!((k.b / 7.2130e6 - 1.0).abs() < 1e-4);
        assert!((k.c / 1.42841e9 - 1.0).abs() < 1e-5);
        let c = default_scenario();
        let ch = slot_channels(&c);
        let k0 = surrogate_coeffs(&c, &ch, &SlotBeams::zeros(4));
        assert!((k0.a - (1e-11f64.log2() * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn surrogate_tangent_and_below() {
        let c = default_scenario();
        let ch = slot_channels(&c);
        let at = mrt_slot(&c, &ch, 0.5);
        let k = surrogate_coeffs(&c, &ch, &at);
        let tangent = surrogate_rate(&c, &ch, &k, &at);
        assert!((tangent - rate_difference_sc(&c, &ch, &at)).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rnd = |p: f64, rng: &mut ChaCha8Rng| {
                let v = CVec::from_iterator(4, (0..4).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                outer(&v).scale(p * rng.gen::<f64>() / v.norm_squared())
            };
            let x = SlotBeams::sc(rnd(1.0, &mut rng), rnd(0.316, &mut rng));
            assert!(surrogate_rate(&c, &ch, &k, &x) <= rate_difference_sc(&c, &ch, &x) + 1e-9);
        }
    }

    #[test]
    fn extraction_examples() {
        let v = CVec::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let w = outer(&v).scale(2.0);
        let r = extract_rank_one(&w, 0.999);
        assert!(!r.low_rank_warning);
        assert!(extraction_error(&w, &r.beam) < 1e-12);
        let eye = identity(4);
        let r = extract_rank_one(&eye, 0.999);
        assert!(r.low_rank_warning);
        assert!((r.beam.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_identities() {
        let v = CVec::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.5)]);
        let w = outer(&v) + identity(2).scale(0.1);
        assert!((nuclear_norm(&w) - trace(&w)).abs() < 1e-12);
        let p = principal(&outer(&CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.5, 0.5)]))).1;
        assert!(spectral_norm(&w) >= trace_product(&outer(&p), &w) - 1e-12);
    }

    #[test]
    fn no_eavesdropper_means_full_mrt_and_silent_jammer() {
        let c = default_scenario();
        let mut ch = slot_channels(&c);
        ch.alice.eve.channel_outer = zeros(4);
        ch.jack.eve.channel_outer = zeros(4);
        let init = mrt_slot(&c, &ch, 0.5);
        let (x, log) = solve_sc_beamforming(&c, &ch, 1, &init).unwrap();
        assert!(!log.low_rank_warning);
        assert!((trace(&x.w_a) - c.p_max_alice).abs() < 1e-5, "{}", trace(&x.w_a));
        assert!(trace(&x.w_j) < 1e-6, "{}", trace(&x.w_j));
        let h = &ch.alice.bob.channel;
        let want = (1.0 + c.p_max_alice * h.norm_squared() / c.noise_power_bob).log2();
        assert!((rate_difference_sc(&c, &ch, &x) - want).abs() < 1e-4);
    }

    #[test]
    fn zero_power() {
        let mut c = default_scenario();
        c.p_max_alice = 0.0;
        let ch = slot_channels(&c);
        let init = mrt_slot(&c, &ch, 0.5);
        let (x, _) = solve_sc_beamforming(&c, &ch, 1, &init).unwrap();
        assert_eq!(trace(&x.w_a), 0.0);
        assert!(rate_difference_sc(&c, &ch, &x) <= 0.0);
    }

    #[test]
    fn beats_mrt_at_hover_geometry() {
        let c = default_scenario();
        let ch = slot_channels(&c);
        let init = mrt_slot(&c, &ch, 0.5);
        let (x, log) = solve_sc_beamforming(&c, &ch, 1, &init).unwrap();
        let mrt = mrt_slot(&c, &ch, 1.0);
        assert!(rate_difference_sc(&c, &ch, &x) >= rate_difference_sc(&c, &ch, &mrt) - 1e-9);
        assert!(x.is_rank_one(0.999), "{} {}", x.rank_ratio_a, x.rank_ratio_j);
        assert!(log.surrogate.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}
