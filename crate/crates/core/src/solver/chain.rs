//! Linear objective over a waypoint chain:
//!
//! ```text
//! max  Σ_n ρ_nᵀ u_n          (n = 1..N−1, u_0 and u_N fixed)
//! s.t. ‖u_n − u_{n−1}‖ ≤ V   (n = 1..N)
//!      ‖u_n − c_n‖ ≤ ψ       (optional trust region)
//! ```
//!
//! Solved with a log-barrier path-following Newton method on
//! −ln(r² − ‖z‖²) barriers, which keeps every iterate strictly feasible.

use nalgebra::{DMatrix, DVector};

use crate::Point2;

use super::{SolveOptions, SolverReport, SolverStatus};

#[derive(Clone, Debug)]
pub struct TrustRegion {
    /// One center per free waypoint.
    pub centers: Vec<Point2>,
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct ChainSocpProblem {
    pub start: Point2,
    pub end: Point2,
    /// Objective vectors for the free waypoints 1..N−1.
    pub gradients: Vec<Point2>,
    pub max_step: f64,
    pub trust: Option<TrustRegion>,
}

impl ChainSocpProblem {
    pub fn n_edges(&self) -> usize {
        self.gradients.len() + 1
    }

    pub fn straight_line(&self) -> Vec<Point2> {
        let n = self.n_edges();
        (0..=n)
            .map(|k| self.start + (self.end - self.start) * (k as f64 / n as f64))
            .collect()
    }

    pub fn objective(&self, waypoints: &[Point2]) -> f64 {
        self.gradients
            .iter()
            .zip(&waypoints[1..])
            .map(|(g, u)| g.dot(u))
            .sum()
    }

    /// Largest amount by which any edge or trust ball is exceeded.
    pub fn max_violation(&self, waypoints: &[Point2]) -> f64 {
        let mut worst: f64 = 0.0;
        for w in waypoints.windows(2) {
            worst = worst.max((w[1] - w[0]).norm() - self.max_step);
        }
        if let Some(tr) = &self.trust {
            for (c, u) in tr.centers.iter().zip(&waypoints[1..]) {
                worst = worst.max((u - c).norm() - tr.radius);
            }
        }
        worst.max(0.0)
    }
}

/// ‖z‖ ≤ r with z = u_plus − u_minus + offset over free-waypoint indices.
struct Ball {
    plus: Option<usize>,
    minus: Option<usize>,
    offset: Point2,
    r2: f64,
}

impl Ball {
    fn z(&self, x: &DVector<f64>) -> Point2 {
        let mut z = self.offset;
        if let Some(i) = self.plus {
            z += Point2::new(x[2 * i], x[2 * i + 1]);
        }
        if let Some(i) = self.minus {
            z -= Point2::new(x[2 * i], x[2 * i + 1]);
        }
        z
    }

    fn terms(&self) -> impl Iterator<Item = (usize, f64)> {
        self.plus
            .map(|i| (i, 1.0))
            .into_iter()
            .chain(self.minus.map(|i| (i, -1.0)))
    }
}

fn balls(p: &ChainSocpProblem) -> Vec<Ball> {
    let n = p.n_edges();
    let mut out = Vec::with_capacity(2 * n);
    for k in 1..=n {
        let mut offset = Point2::zeros();
        let plus = if k < n {
            Some(k - 1)
        } else {
            offset += p.end;
            None
        };
        let minus = if k > 1 {
            Some(k - 2)
        } else {
            offset -= p.start;
            None
        };
        out.push(Ball {
            plus,
            minus,
            offset,
            r2: p.max_step * p.max_step,
        });
    }
    if let Some(tr) = &p.trust {
        for (i, c) in tr.centers.iter().enumerate() {
            out.push(Ball {
                plus: Some(i),
                minus: None,
                offset: -c,
                r2: tr.radius * tr.radius,
            });
        }
    }
    out
}

fn to_vec(waypoints: &[Point2]) -> DVector<f64> {
    let free = &waypoints[1..waypoints.len() - 1];
    DVector::from_iterator(free.len() * 2, free.iter().flat_map(|u| [u.x, u.y]))
}

fn to_points(p: &ChainSocpProblem, x: &DVector<f64>) -> Vec<Point2> {
    let mut out = vec![p.start];
    out.extend((0..x.len() / 2).map(|i| Point2::new(x[2 * i], x[2 * i + 1])));
    out.push(p.end);
    out
}

/// Barrier value, or None outside the open feasible set.
fn barrier(bs: &[Ball], x: &DVector<f64>) -> Option<f64> {
    let mut total = 0.0;
    for b in bs {
        let f = b.r2 - b.z(x).norm_squared();
        if !(f > 0.0) {
            return None;
        }
        total -= f.ln();
    }
    Some(total)
}

fn report(
    p: &ChainSocpProblem,
    waypoints: &[Point2],
    status: SolverStatus,
    iterations: usize,
    stationarity: f64,
) -> SolverReport {
    SolverReport {
        status,
        objective: p.objective(waypoints),
        iterations,
        max_violation: p.max_violation(waypoints),
        stationarity,
        violated_constraint: None,
        max_attainable: None,
    }
}

pub fn solve(p: &ChainSocpProblem, opts: &SolveOptions) -> (Vec<Point2>, SolverReport) {
    let n = p.n_edges();
    let line = p.straight_line();
    let span = (p.end - p.start).norm();
    let reach = n as f64 * p.max_step;
    let geo_tol = opts.tol * p.max_step.max(1.0);

    if span > reach + geo_tol || !(p.max_step > 0.0) {
        let mut r = report(p, &line, SolverStatus::Infeasible, 0, f64::NAN);
        r.max_violation = span - reach;
        return (line, r);
    }
    // Endpoints exactly N·V apart: the straight line is the only chain.
    if p.gradients.is_empty() || span >= reach * (1.0 - 1e-12) {
        let r = report(p, &line, SolverStatus::Optimal, 0, 0.0);
        return (line, r);
    }

    let incumbent: Option<Vec<Point2>> = p.trust.as_ref().map(|tr| {
        let mut w = vec![p.start];
        w.extend(tr.centers.iter().copied());
        w.push(p.end);
        w
    });

    let scale = p.gradients.iter().fold(0.0_f64, |m, g| m.max(g.norm()));
    if scale == 0.0 {
        let w = match incumbent {
            Some(w) if p.max_violation(&w) <= geo_tol => w,
            _ => line,
        };
        let r = report(p, &w, SolverStatus::Optimal, 0, 0.0);
        return (w, r);
    }
    let rho = DVector::from_iterator(
        2 * p.gradients.len(),
        p.gradients.iter().flat_map(|g| [g.x / scale, g.y / scale]),
    );

    // Strictly feasible start: pull the incumbent part way toward the line.
    let mut x = match (&incumbent, &p.trust) {
        (Some(inc), Some(tr)) => {
            let far = inc
                .iter()
                .zip(&line)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()));
            let theta = if far > 0.0 {
                (0.5 * tr.radius / far).min(0.5)
            } else {
                0.0
            };
            let mixed: Vec<Point2> = inc
                .iter()
                .zip(&line)
                .map(|(a, b)| a * (1.0 - theta) + b * theta)
                .collect();
            to_vec(&mixed)
        }
        _ => to_vec(&line),
    };

    let bs = balls(p);
    if barrier(&bs, &x).is_none() {
        // Incumbent was not feasible to begin with.
        let w = to_points(p, &x);
        let mut r = report(p, &w, SolverStatus::Infeasible, 0, f64::NAN);
        r.violated_constraint = bs
            .iter()
            .position(|b| b.r2 - b.z(&x).norm_squared() <= 0.0);
        return (w, r);
    }

    let dim = x.len();
    let m = bs.len() as f64;
    let mut t = 1.0;
    let mut iterations = 0;
    let mut status = SolverStatus::Optimal;
    loop {
        // Centering: minimize −t ρᵀx + barrier(x).
        for _ in 0..200 {
            if iterations >= opts.max_iters {
                status = SolverStatus::MaxIters;
                break;
            }
            iterations += 1;
            let mut g = -&rho * t;
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            for b in &bs {
                let z = b.z(&x);
                let f = b.r2 - z.norm_squared();
                for (i, si) in b.terms() {
                    g[2 * i] += si * 2.0 * z.x / f;
                    g[2 * i + 1] += si * 2.0 * z.y / f;
                    for (j, sj) in b.terms() {
                        let s = si * sj;
                        let zz = [z.x, z.y];
                        for a in 0..2 {
                            for c in 0..2 {
                                let eye = if a == c { 2.0 / f } else { 0.0 };
                                h[(2 * i + a, 2 * j + c)] += s * (eye + 4.0 * zz[a] * zz[c] / (f * f));
                            }
                        }
                    }
                }
            }
            let Some(chol) = h.clone().cholesky() else {
                break;
            };
            let dx = -chol.solve(&g);
            let decrement = -g.dot(&dx);
            if decrement / 2.0 <= 1e-10 {
                break;
            }
            let phi0 = -t * rho.dot(&x) + barrier(&bs, &x).unwrap_or(f64::INFINITY);
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-14 {
                let y = &x + &dx * step;
                if let Some(bv) = barrier(&bs, &y) {
                    let phi = -t * rho.dot(&y) + bv;
                    if phi <= phi0 - 0.25 * step * decrement {
                        x = y;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if status == SolverStatus::MaxIters || m / t <= opts.tol {
            break;
        }
        t *= 10.0;
    }

    let w = to_points(p, &x);
    let r = report(p, &w, status, iterations, m / t);
    (w, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SolveOptions {
        SolveOptions {
            tol: 1e-7,
            max_iters: 50_000,
        }
    }

    #[test]
    fn lens_apex() {
        let p = ChainSocpProblem {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(10.0, 0.0),
            gradients: vec![Point2::new(0.0, 1.0)],
            max_step: 10.0,
            trust: None,
        };
        let (w, r) = solve(&p, &opts());
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((w[1] - Point2::new(5.0, 75f64.sqrt())).norm() < 1e-5, "{:?}", w[1]);
        assert!(r.max_violation <= 1e-7);
    }

    #[test]
    fn zero_objective_keeps_feasible_chain() {
        let mut p = ChainSocpProblem {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(30.0, 0.0),
            gradients: vec![Point2::zeros(); 4],
            max_step: 10.0,
            trust: None,
        };
        let (w, r) = solve(&p, &opts());
        assert_eq!(r.max_violation, 0.0);
        assert_eq!(w.len(), 6);
        let inc: Vec<Point2> = (1..5).map(|k| Point2::new(6.0 * k as f64, 3.0)).collect();
        p.trust = Some(TrustRegion {
            centers: inc.clone(),
            radius: 1.0,
        });
        let (w, _) = solve(&p, &opts());
        assert_eq!(&w[1..5], &inc[..]);
    }

    #[test]
    fn vanishing_trust_radius_returns_incumbent() {
        let inc: Vec<Point2> = (1..5).map(|k| Point2::new(6.0 * k as f64, 3.0)).collect();
        let p = ChainSocpProblem {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(30.0, 0.0),
            gradients: vec![Point2::new(1.0, -2.0); 4],
            max_step: 10.0,
            trust: Some(TrustRegion {
                centers: inc.clone(),
                radius: 1e-9,
            }),
        };
        let (w, r) = solve(&p, &opts());
        assert!(r.max_violation <= 1e-12);
        for (a, b) in w[1..5].iter().zip(&inc) {
            assert!((a - b).norm() <= 1e-9);
        }
    }

    #[test]
    fn unreachable_and_tight_endpoints() {
        let mut p = ChainSocpProblem {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(100.0, 0.0),
            gradients: vec![Point2::new(0.0, 1.0); 3],
            max_step: 10.0,
            trust: None,
        };
        let (_, r) = solve(&p, &opts());
        assert_eq!(r.status, SolverStatus::Infeasible);
        p.end = Point2::new(40.0, 0.0);
        let (w, r) = solve(&p, &opts());
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((w[2] - Point2::new(20.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn respects_trust_region() {
        let inc: Vec<Point2> = (1..10).map(|k| Point2::new(10.0 * k as f64, 0.0)).collect();
        let p = ChainSocpProblem {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(100.0, 0.0),
            gradients: (0..9).map(|k| Point2::new(0.3, (k as f64 - 4.0) * 0.1)).collect(),
            max_step: 12.0,
            trust: Some(TrustRegion {
                centers: inc,
                radius: 2.0,
            }),
        };
        let (w, r) = solve(&p, &opts());
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!(r.max_violation <= 1e-9);
        assert!(p.objective(&w) > p.objective(&p.straight_line()));
    }
}
