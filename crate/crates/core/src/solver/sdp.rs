//! Concave maximization over trace-budgeted PSD matrices:
//!
//! ```text
//! max  Σ_l w_l · ln(offset_l + Σ_i tr(C_li X_i)) + Σ_i tr(L_i X_i) + const
//! s.t. X_i ⪰ 0,  Σ_{i∈group} tr X_i ≤ budget_group,
//!      Σ_i tr(G_ki X_i) ≥ γ_k
//! ```
//!
//! Projected gradient ascent with Armijo backtracking handles the budget
//! sets exactly (eigenvalue projection); the linear inequalities go through
//! an augmented-Lagrangian outer loop and a final convex-combination repair
//! toward the constraint-maximizing point.

use crate::linalg::{inner, principal, trace_product, CMat};

use super::projection::project_psd_group;
use super::{SolveOptions, SolverReport, SolverStatus};

#[derive(Clone, Debug)]
pub struct LogTerm {
    pub weight: f64,
    /// Strictly positive constant inside the logarithm.
    pub offset: f64,
    pub coeffs: Vec<(usize, CMat)>,
}

#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, CMat)>,
    pub lower: f64,
}

/// Variables sharing one trace budget.
#[derive(Clone, Debug)]
pub struct BudgetGroup {
    pub vars: Vec<usize>,
    pub budget: f64,
}

#[derive(Clone, Debug)]
pub struct LogAffineSdpProblem {
    pub dim: usize,
    pub n_vars: usize,
    /// Every variable belongs to exactly one group.
    pub groups: Vec<BudgetGroup>,
    pub log_terms: Vec<LogTerm>,
    pub linear: Vec<(usize, CMat)>,
    pub constant: f64,
    pub constraints: Vec<LinearConstraint>,
}

fn affine(coeffs: &[(usize, CMat)], xs: &[CMat]) -> f64 {
    coeffs.iter().map(|(i, c)| trace_product(c, &xs[*i])).sum()
}

impl LogAffineSdpProblem {
    pub fn zero_point(&self) -> Vec<CMat> {
        vec![CMat::zeros(self.dim, self.dim); self.n_vars]
    }

    /// Objective without constraint terms; −∞ outside the log domain.
    pub fn objective(&self, xs: &[CMat]) -> f64 {
        let mut total = self.constant + affine(&self.linear, xs);
        for term in &self.log_terms {
            let arg = term.offset + affine(&term.coeffs, xs);
            if !(arg > 0.0) {
                return f64::NEG_INFINITY;
            }
            total += term.weight * arg.ln();
        }
        total
    }

    pub fn gradient(&self, xs: &[CMat]) -> Vec<CMat> {
        let mut g = self.zero_point();
        for (i, c) in &self.linear {
            g[*i] += c;
        }
        for term in &self.log_terms {
            let arg = term.offset + affine(&term.coeffs, xs);
            let scale = term.weight / arg;
            for (i, c) in &term.coeffs {
                g[*i] += c.scale(scale);
            }
        }
        g
    }

    pub fn constraint_value(&self, k: usize, xs: &[CMat]) -> f64 {
        affine(&self.constraints[k].coeffs, xs)
    }

    pub fn project(&self, xs: &[CMat]) -> Vec<CMat> {
        let mut out = self.zero_point();
        for group in &self.groups {
            let members: Vec<CMat> = group.vars.iter().map(|&i| xs[i].clone()).collect();
            for (&i, p) in group.vars.iter().zip(project_psd_group(&members, group.budget)) {
                out[i] = p;
            }
        }
        out
    }

    /// The feasible point maximizing constraint `k` alone, with its value.
    /// Each group spends its whole budget on the principal direction of its
    /// best coefficient; ties go to the last variable listed in the group.
    pub fn constraint_anchor(&self, k: usize) -> (f64, Vec<CMat>) {
        let mut point = self.zero_point();
        let mut value = 0.0;
        let coeffs = &self.constraints[k].coeffs;
        for group in &self.groups {
            let mut best: Option<(f64, usize, CMat)> = None;
            for &i in &group.vars {
                let mut c = CMat::zeros(self.dim, self.dim);
                for (j, cj) in coeffs {
                    if *j == i {
                        c += cj;
                    }
                }
                let (lam, v) = principal(&c);
                let better = match &best {
                    None => true,
                    Some((b, _, _)) => lam >= *b - 1e-12 * b.abs(),
                };
                if better {
                    best = Some((lam, i, &v * v.adjoint()));
                }
            }
            if let Some((lam, i, dir)) = best {
                if lam > 0.0 && group.budget > 0.0 {
                    point[i] = dir.scale(group.budget);
                    value += lam * group.budget;
                }
            }
        }
        (value, point)
    }
}

fn dot(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| inner(x, y)).sum()
}

fn norm(a: &[CMat]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[CMat], s: f64, d: &[CMat]) -> Vec<CMat> {
    x.iter().zip(d).map(|(a, b)| a + b.scale(s)).collect()
}

fn sub(a: &[CMat], b: &[CMat]) -> Vec<CMat> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Augmented-Lagrangian state for the inequality constraints.
struct Multipliers {
    lambda: Vec<f64>,
    rho: f64,
    scale: Vec<f64>,
}

impl Multipliers {
    fn normalized(&self, p: &LogAffineSdpProblem, k: usize, xs: &[CMat]) -> f64 {
        (p.constraint_value(k, xs) - p.constraints[k].lower) / self.scale[k]
    }

    fn value(&self, p: &LogAffineSdpProblem, xs: &[CMat]) -> f64 {
        let mut total = p.objective(xs);
        for k in 0..p.constraints.len() {
            let c = self.normalized(p, k, xs);
            let shifted = (self.lambda[k] / self.rho - c).max(0.0);
            total += -0.5 * self.rho * shifted * shifted
                + self.lambda[k] * self.lambda[k] / (2.0 * self.rho);
        }
        total
    }

    fn gradient(&self, p: &LogAffineSdpProblem, xs: &[CMat]) -> Vec<CMat> {
        let mut g = p.gradient(xs);
        for k in 0..p.constraints.len() {
            let c = self.normalized(p, k, xs);
            let shifted = (self.lambda[k] / self.rho - c).max(0.0);
            if shifted > 0.0 {
                let w = self.rho * shifted / self.scale[k];
                for (i, coef) in &p.constraints[k].coeffs {
                    g[*i] += coef.scale(w);
                }
            }
        }
        g
    }
}

struct Ascent {
    x: Vec<CMat>,
    iterations: usize,
    stationarity: f64,
    converged: bool,
}

/// Monotone projected gradient ascent on the multiplier-augmented objective.
fn ascend(
    p: &LogAffineSdpProblem,
    mult: &Multipliers,
    start: Vec<CMat>,
    opts: &SolveOptions,
) -> Ascent {
    let mut x = p.project(&start);
    let mut fx = mult.value(p, &x);
    let mut g = mult.gradient(p, &x);
    let budget_scale = p
        .groups
        .iter()
        .map(|grp| grp.budget)
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let gnorm = norm(&g);
    if gnorm == 0.0 || budget_scale <= 1e-300 {
        return Ascent {
            x,
            iterations: 0,
            stationarity: 0.0,
            converged: true,
        };
    }
    let s_ref = budget_scale / gnorm;
    let mut step = s_ref;
    let mut stationarity = f64::INFINITY;
    let mut still = 0;

    for it in 0..opts.max_iters {
        let mut accepted = None;
        for _ in 0..80 {
            let y = p.project(&axpy(&x, step, &g));
            let d = sub(&y, &x);
            let fy = mult.value(p, &y);
            let model = fx + dot(&g, &d) - dot(&d, &d) / (2.0 * step);
            if fy.is_finite() && fy >= model - 1e-15 * fx.abs().max(1.0) {
                accepted = Some((y, d, fy));
                break;
            }
            step *= 0.5;
        }
        let Some((y, d, fy)) = accepted else {
            return Ascent {
                x,
                iterations: it,
                stationarity,
                converged: false,
            };
        };
        let dnorm = norm(&d);
        stationarity = dnorm / step;
        let gy = mult.gradient(p, &y);
        let gscale = norm(&gy).max(1.0);

        let tiny_move = dnorm <= 1e-15 * norm(&y).max(budget_scale);
        let tiny_gain = (fy - fx).abs() <= 1e-15 * fx.abs().max(1.0);
        still = if tiny_move && tiny_gain { still + 1 } else { 0 };

        // Barzilai-Borwein step for the next trial.
        let dg = sub(&gy, &g);
        let curv = -dot(&d, &dg);
        step = if curv > 0.0 {
            (dot(&d, &d) / curv).clamp(1e-10 * s_ref, 1e10 * s_ref)
        } else {
            (step * 4.0).min(1e10 * s_ref)
        };

        x = y;
        fx = fy;
        g = gy;
        if stationarity <= opts.tol * gscale {
            return Ascent {
                x,
                iterations: it + 1,
                stationarity,
                converged: true,
            };
        }
        if still >= 3 {
            return Ascent {
                x,
                iterations: it + 1,
                stationarity,
                converged: false,
            };
        }
    }
    Ascent {
        x,
        iterations: opts.max_iters,
        stationarity,
        converged: false,
    }
}

/// Solves the problem, optionally warm-started. Returned matrices always lie
/// in the budget sets; the report says whether the inequalities were met.
pub fn solve(
    p: &LogAffineSdpProblem,
    start: Option<&[CMat]>,
    opts: &SolveOptions,
) -> (Vec<CMat>, SolverReport) {
    let start = start.map(|s| s.to_vec()).unwrap_or_else(|| p.zero_point());
    let n_con = p.constraints.len();

    let mut anchors = Vec::with_capacity(n_con);
    let mut scale = Vec::with_capacity(n_con);
    for k in 0..n_con {
        let (best, anchor) = p.constraint_anchor(k);
        let lower = p.constraints[k].lower;
        let s = lower.abs().max(best.abs() * 1e-6).max(1e-300);
        if best < lower - opts.tol * s {
            let x = p.project(&start);
            let report = SolverReport {
                status: SolverStatus::Infeasible,
                objective: p.objective(&x),
                iterations: 0,
                max_violation: lower - best,
                stationarity: f64::NAN,
                violated_constraint: Some(k),
                max_attainable: Some(best),
            };
            return (x, report);
        }
        anchors.push((best, anchor));
        scale.push(s);
    }

    let mut mult = Multipliers {
        lambda: vec![0.0; n_con],
        rho: 10.0,
        scale,
    };
    let mut x = start;
    let mut iterations = 0;
    let mut stationarity;
    let mut converged;
    let mut prev_violation = f64::INFINITY;
    let max_rounds = if n_con == 0 { 1 } else { 40 };
    let mut round = 0;
    loop {
        let res = ascend(p, &mult, x, opts);
        x = res.x;
        iterations += res.iterations;
        stationarity = res.stationarity;
        converged = res.converged;
        round += 1;
        if n_con == 0 {
            break;
        }
        let cs: Vec<f64> = (0..n_con).map(|k| mult.normalized(p, k, &x)).collect();
        let violation = cs.iter().fold(0.0_f64, |m, c| m.max(-c));
        let slack_ok = cs
            .iter()
            .zip(&mult.lambda)
            .all(|(c, l)| *l == 0.0 || c.abs() <= opts.tol.sqrt());
        if violation <= opts.tol && converged && slack_ok {
            break;
        }
        if round >= max_rounds {
            break;
        }
        let rho = mult.rho;
        for (l, c) in mult.lambda.iter_mut().zip(&cs) {
            *l = (*l - rho * c).max(0.0);
        }
        if violation > 0.25 * prev_violation {
            mult.rho = (mult.rho * 10.0).min(1e12);
        }
        prev_violation = violation;
    }

    // Pull a slightly infeasible single-constraint iterate onto the constraint
    // along the segment toward the anchor, which stays inside the budget sets.
    if n_con == 1 {
        let g = p.constraint_value(0, &x);
        let (best, anchor) = &anchors[0];
        let lower = p.constraints[0].lower;
        if g < lower && *best > g {
            let theta = ((lower - g) / (best - g) * (1.0 + 1e-9)).min(1.0);
            x = x
                .iter()
                .zip(anchor)
                .map(|(a, b)| a.scale(1.0 - theta) + b.scale(theta))
                .collect();
        }
    }

    let mut max_violation: f64 = 0.0;
    let mut violated = None;
    for k in 0..n_con {
        let v = p.constraints[k].lower - p.constraint_value(k, &x);
        if v > max_violation {
            max_violation = v;
            violated = Some(k);
        }
    }
    let feasible = (0..n_con).all(|k| {
        let v = p.constraints[k].lower - p.constraint_value(k, &x);
        v <= opts.tol * mult.scale[k]
    });
    let status = if !feasible {
        SolverStatus::Infeasible
    } else if converged {
        SolverStatus::Optimal
    } else {
        SolverStatus::MaxIters
    };
    let report = SolverReport {
        status,
        objective: p.objective(&x),
        iterations,
        max_violation,
        stationarity,
        violated_constraint: if feasible { None } else { violated },
        max_attainable: None,
    };
    (x, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, outer, trace, CVec, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolveOptions {
        SolveOptions {
            tol: 1e-7,
            max_iters: 50_000,
        }
    }

    fn vec2(a: C64, b: C64) -> CVec {
        CVec::from_vec(vec![a, b])
    }

    fn single(h: &CMat, budget: f64, noise: f64) -> LogAffineSdpProblem {
        LogAffineSdpProblem {
            dim: h.nrows(),
            n_vars: 1,
            groups: vec![BudgetGroup {
                vars: vec![0],
                budget,
            }],
            log_terms: vec![LogTerm {
                weight: 1.0,
                offset: noise,
                coeffs: vec![(0, h.clone())],
            }],
            linear: vec![],
            constant: 0.0,
            constraints: vec![],
        }
    }

    #[test]
    fn single_log_term_is_mrt() {
        let h = vec2(C64::new(0.6, 0.1), C64::new(-0.2, 0.5));
        let hh = outer(&h);
        let p = single(&hh, 2.0, 0.1);
        let (x, report) = solve(&p, None, &opts());
        assert_eq!(report.status, SolverStatus::Optimal);
        let hn = h.norm_squared();
        let want = outer(&h).scale(2.0 / hn);
        assert!(frobenius(&(&x[0] - &want)) < 1e-5, "{}", x[0]);
        assert!((report.objective - (0.1 + 2.0 * hn).ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_gives_zero() {
        let h = outer(&vec2(C64::new(1.0, 0.0), C64::new(0.0, 1.0)));
        let (x, _) = solve(&single(&h, 0.0, 1.0), None, &opts());
        assert_eq!(frobenius(&x[0]), 0.0);
    }

    #[test]
    fn contradictory_constraint_is_infeasible() {
        let h = outer(&vec2(C64::new(1.0, 0.0), C64::new(0.0, 1.0)));
        let mut p = single(&h, 1.0, 1.0);
        p.constraints.push(LinearConstraint {
            coeffs: vec![(0, CMat::identity(2, 2))],
            lower: 2.0,
        });
        let (_, report) = solve(&p, None, &opts());
        assert_eq!(report.status, SolverStatus::Infeasible);
        assert_eq!(report.violated_constraint, Some(0));
    }

    #[test]
    fn active_constraint_is_met() {
        // Maximize along e1 but require weight on e2.
        let e1 = outer(&vec2(C64::new(1.0, 0.0), C64::new(0.0, 0.0)));
        let e2 = outer(&vec2(C64::new(0.0, 0.0), C64::new(1.0, 0.0)));
        let mut p = single(&e1, 1.0, 0.5);
        p.constraints.push(LinearConstraint {
            coeffs: vec![(0, e2.clone())],
            lower: 0.3,
        });
        let (x, report) = solve(&p, None, &opts());
        assert_ne!(report.status, SolverStatus::Infeasible);
        let g = trace_product(&e2, &x[0]);
        assert!(g >= 0.3 - 1e-12, "{g}");
        assert!((trace(&x[0]) - 1.0).abs() < 1e-6);
        assert!((g - 0.3).abs() < 1e-5);
    }

    #[test]
    fn linear_objective_picks_principal_direction() {
        let v = vec2(C64::new(0.8, 0.0), C64::new(0.0, 0.6));
        let l = outer(&v).scale(3.0) + CMat::identity(2, 2).scale(0.5);
        let p = LogAffineSdpProblem {
            dim: 2,
            n_vars: 1,
            groups: vec![BudgetGroup {
                vars: vec![0],
                budget: 1.5,
            }],
            log_terms: vec![],
            linear: vec![(0, l.clone())],
            constant: 0.0,
            constraints: vec![],
        };
        let (x, _) = solve(&p, None, &opts());
        let (_, pv) = principal(&l);
        let want = outer(&pv).scale(1.5);
        assert!(frobenius(&(&x[0] - &want)) / 1.5 < 1e-6);
    }

    #[test]
    fn beats_random_feasible_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h1 = outer(&vec2(C64::new(1.0, 0.2), C64::new(0.1, -0.4)));
        let h2 = outer(&vec2(C64::new(0.3, 0.0), C64::new(0.9, 0.1)));
        let p = LogAffineSdpProblem {
            dim: 2,
            n_vars: 2,
            groups: vec![
                BudgetGroup {
                    vars: vec![0],
                    budget: 1.0,
                },
                BudgetGroup {
                    vars: vec![1],
                    budget: 0.5,
                },
            ],
            log_terms: vec![
                LogTerm {
                    weight: 1.0,
                    offset: 0.1,
                    coeffs: vec![(0, h1.clone()), (1, h2.scale(0.1))],
                },
                LogTerm {
                    weight: 1.0,
                    offset: 0.2,
                    coeffs: vec![(1, h1.clone())],
                },
            ],
            linear: vec![(0, h2.scale(-0.8)), (1, h2.scale(-0.3))],
            constant: 0.0,
            constraints: vec![],
        };
        let (x, report) = solve(&p, None, &opts());
        for _ in 0..100 {
            let sample: Vec<CMat> = [1.0, 0.5]
                .iter()
                .map(|b| {
                    let v = vec2(
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    );
                    outer(&v).scale(b * rng.gen_range(0.0..1.0) / v.norm_squared())
                })
                .collect();
            assert!(report.objective >= p.objective(&sample) - 1e-12);
        }
        assert!(x.iter().all(|m| trace(m) >= -1e-12));
    }
}
