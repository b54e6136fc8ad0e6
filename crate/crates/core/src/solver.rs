//! Dual maximization, certification and the sweep over `mu`.
//!
//! For a fixed `mu` the dual is a concave function of two variables on the
//! open set `S_mu⁺` intersected with the box `varsigma >= -lambda,
//! sigma >= 0`. It is maximized by a projected Newton ascent whose line
//! search backtracks until the trial point is inside `S_mu⁺` and the Armijo
//! condition holds. A maximizer is turned into a primal candidate and
//! certified by checking the zero-gap and complementarity conditions.
//!
//! The outer loop evaluates a uniform `mu` grid, refines around the best grid
//! point by golden-section search and finally iterates `mu <- 1/h(x)`,
//! which never increases the original objective.

use std::cmp::Ordering;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::{evaluate, DualEvaluation, DualPoint};
use crate::problem::{feasibility_slack, FractionalProgram, PrimalPoint, ProblemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no point of S_mu+ found along the start scan at mu = {mu:e}")]
    NoStartingPoint { mu: f64 },
    #[error("no starting point at any mu of the grid")]
    AllSubproblemsFailed,
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Tuning knobs of [`solve`] and [`maximize_dual`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Uniform `mu` grid size.
    pub grid_points: usize,
    /// Newton iterations per subproblem.
    pub max_iter: usize,
    /// Relative projected-gradient tolerance, scaled by `1 + |value|`.
    pub tol_grad: f64,
    /// Relative duality-gap tolerance, scaled by `1 + |primal|`.
    pub tol_gap: f64,
    /// Tolerance on `|xi - varsigma|` (scaled by `1 + |varsigma|`) and on
    /// `|h(x) - 1/mu|`.
    pub tol_stationarity: f64,
    /// Golden-section rounds around the best grid point.
    pub refine_rounds: usize,
    /// Maximum number of `mu <- 1/h(x)` updates after refinement.
    pub polish_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid_points: 64,
            max_iter: 500,
            tol_grad: 1e-8,
            tol_gap: 1e-6,
            tol_stationarity: 1e-6,
            refine_rounds: 3,
            polish_steps: 8,
        }
    }
}

impl SolverOptions {
    fn check(&self) -> Result<(), SolveError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.grid_points == 0 {
            return Err(SolveError::InvalidOptions(
                "grid_points must be >= 1".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(SolveError::InvalidOptions("max_iter must be >= 1".into()));
        }
        if !(positive(self.tol_grad) && positive(self.tol_gap) && positive(self.tol_stationarity)) {
            return Err(SolveError::InvalidOptions(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How a dual maximization ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualStatus {
    /// Stationary point strictly inside the box.
    InteriorCritical,
    /// Stationary on the face `sigma = 0`.
    BoundarySigmaZero,
    /// Stationary on the face `varsigma = -lambda`.
    BoxBoundaryVarsigma,
    /// The ascent ran into the singular surface of `S_mu⁺`.
    NearPdBoundary,
    MaxIterations,
    /// `mu = mu0`: the feasible set is `{H⁻¹b}` and the dual supremum is
    /// only approached as `sigma -> inf`; the subproblem is solved by direct
    /// evaluation.
    SingletonFeasibleSet,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub d_star: DualPoint,
    pub value: f64,
    pub grad_norm: f64,
    pub status: DualStatus,
    pub iterations: usize,
    pub min_pivot: f64,
    /// Dual value after every accepted step, starting at the initial point.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CertificateKind {
    Perfect,
    WeakOnly,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub primal_value: f64,
    pub dual_value: f64,
    /// `P_mu(x_mu) - P^d_mu`.
    pub gap: f64,
    /// `|xi(x_mu) - varsigma|`.
    pub stationarity_xi: f64,
    /// `h(x_mu) - 1/mu`.
    pub feasibility_residual: f64,
    pub kind: CertificateKind,
}

/// Outcome of one subproblem of the sweep.
#[derive(Debug, Clone)]
pub struct MuSample {
    pub mu: f64,
    pub solution: Option<DualSolution>,
    pub certificate: Option<Certificate>,
    pub x: Option<PrimalPoint>,
    /// `P0(x_mu)` when `x_mu` lies in the feasible set.
    pub p0: Option<f64>,
}

impl MuSample {
    pub fn kind(&self) -> CertificateKind {
        self.certificate
            .as_ref()
            .map_or(CertificateKind::None, |c| c.kind)
    }

    pub fn dual_value(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.value)
    }

    /// Lexicographic ranking: certificate kind, then `P0`, then `mu`.
    fn rank(&self) -> (CertificateKind, f64, f64) {
        (self.kind(), self.p0.unwrap_or(f64::INFINITY), self.mu)
    }

    fn better_than(&self, other: &MuSample, tol: f64) -> bool {
        let (ka, pa, ma) = self.rank();
        let (kb, pb, mb) = other.rank();
        match ka.cmp(&kb) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                if (pa - pb).abs() <= tol * (1.0 + pa.abs().min(pb.abs())) || pa == pb {
                    ma < mb
                } else {
                    pa < pb
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_star: PrimalPoint,
    pub mu_star: f64,
    pub d_star: DualPoint,
    pub p0_value: f64,
    /// Dual optimum of the subproblem at `mu_star`.
    pub best_dual_value: f64,
    /// Certificate of the subproblem at `mu_star`. Its kind is downgraded
    /// from `Perfect` to `WeakOnly` unless every grid subproblem certified.
    pub certificate: Certificate,
    pub status: DualStatus,
    /// Every evaluated subproblem, sorted by `mu`.
    pub mu_profile: Vec<MuSample>,
    /// Fraction of grid points whose subproblem earned a perfect certificate.
    pub grid_perfect_fraction: f64,
}

const ARMIJO: f64 = 1e-4;
/// Relative `P0` difference under which two samples count as tied.
const TIE_TOL: f64 = 1e-12;
const MAX_BACKTRACKS: usize = 60;
const ROUNDOFF_SLACK: f64 = 1e-12;

fn projected_gradient(e: &DualEvaluation, lambda: f64) -> [f64; 2] {
    let d = e.point;
    let gs = if d.varsigma <= -lambda && e.grad_varsigma < 0.0 {
        0.0
    } else {
        e.grad_varsigma
    };
    let gt = if d.sigma <= 0.0 && e.grad_sigma < 0.0 {
        0.0
    } else {
        e.grad_sigma
    };
    [gs, gt]
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Ascent direction from the Hessian restricted to the free coordinates,
/// with Levenberg damping when it is not safely negative definite.
fn newton_direction(hess: &Matrix2<f64>, pg: [f64; 2], free: [bool; 2]) -> [f64; 2] {
    let scale = 1.0 + hess.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let floor = 1e-12 * scale;
    match free {
        [true, true] => {
            // Solve (-H + tau I) d = g.
            let (a, b, c) = (-hess[(0, 0)], -hess[(0, 1)], -hess[(1, 1)]);
            let (lo, _) = crate::linalg::sym2_eigenvalues(a, b, c);
            let tau = if lo <= floor {
                floor - lo + 1e-8 * scale
            } else {
                0.0
            };
            let (a, c) = (a + tau, c + tau);
            let det = a * c - b * b;
            [(c * pg[0] - b * pg[1]) / det, (a * pg[1] - b * pg[0]) / det]
        }
        [true, false] => [pg[0] / (-hess[(0, 0)]).max(floor), 0.0],
        [false, true] => [0.0, pg[1] / (-hess[(1, 1)]).max(floor)],
        [false, false] => [0.0, 0.0],
    }
}

/// Picks the first point of `S_mu⁺` along a fixed scan of the box, preferring
/// well-conditioned points.
pub fn find_start(p: &FractionalProgram, mu: f64) -> Option<DualEvaluation> {
    let btb_max = crate::linalg::max_abs(p.btb());
    let scale = 1.0 + crate::linalg::max_abs(p.q()) + mu * btb_max;
    let mut sigmas: Vec<f64> = vec![0.0, 1.0, 10.0, 100.0];
    sigmas.extend((3..=12).map(|k| 10f64.powi(k)));
    let varsigmas = [0.0, 1.0, 10.0];

    let mut fallback = None;
    for &s in &sigmas {
        for &v in &varsigmas {
            let d = DualPoint::new(mu, v * scale, s * scale);
            if let Ok(e) = evaluate(p, &d) {
                if !e.ill_conditioned() {
                    return Some(e);
                }
                fallback.get_or_insert(e);
            }
        }
        if fallback.is_some() {
            break;
        }
    }
    fallback
}

/// Maximizes the dual over `S_mu⁺` by projected Newton ascent.
pub fn maximize_dual(
    p: &FractionalProgram,
    mu: f64,
    opts: &SolverOptions,
) -> Result<DualSolution, SolveError> {
    p.check_mu(mu)?;
    let start = find_start(p, mu).ok_or(SolveError::NoStartingPoint { mu })?;
    Ok(ascend(p, start, opts))
}

/// Runs the ascent from a given evaluated point of `S_mu⁺`.
pub fn ascend(p: &FractionalProgram, start: DualEvaluation, opts: &SolverOptions) -> DualSolution {
    let lambda = p.lambda();
    let mut cur = start;
    let mut trace = vec![cur.value];
    let mut iterations = 0;

    let finish =
        |e: &DualEvaluation, trace: Vec<f64>, iterations: usize, status: DualStatus| DualSolution {
            d_star: e.point,
            value: e.value,
            grad_norm: norm2(projected_gradient(e, lambda)),
            status,
            iterations,
            min_pivot: e.min_pivot(),
            trace,
        };

    loop {
        let pg = projected_gradient(&cur, lambda);
        let tol = opts.tol_grad * (1.0 + cur.value.abs());
        if norm2(pg) <= tol {
            let d = cur.point;
            let status = if cur.ill_conditioned() {
                DualStatus::NearPdBoundary
            } else if d.sigma <= 0.0 {
                DualStatus::BoundarySigmaZero
            } else if d.varsigma <= -lambda {
                DualStatus::BoxBoundaryVarsigma
            } else {
                DualStatus::InteriorCritical
            };
            return finish(&cur, trace, iterations, status);
        }
        if iterations >= opts.max_iter {
            let status = if cur.ill_conditioned() {
                DualStatus::NearPdBoundary
            } else {
                DualStatus::MaxIterations
            };
            return finish(&cur, trace, iterations, status);
        }
        iterations += 1;

        let d = cur.point;
        let free = [
            !(d.varsigma <= -lambda && cur.grad_varsigma <= 0.0),
            !(d.sigma <= 0.0 && cur.grad_sigma <= 0.0),
        ];
        let hess = cur.hessian(p);
        let newton = newton_direction(&hess, pg, free);
        let next = line_search(p, &cur, newton, 1.0).or_else(|| {
            let curvature = hess.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
            line_search(p, &cur, pg, 1.0 / curvature)
        });
        match next {
            Some(e) => {
                trace.push(e.value);
                cur = e;
            }
            None => {
                let status = if cur.ill_conditioned() {
                    DualStatus::NearPdBoundary
                } else {
                    DualStatus::MaxIterations
                };
                return finish(&cur, trace, iterations, status);
            }
        }
    }
}

/// Backtracking along `dir` from `cur`, projecting onto the box and
/// rejecting trial points outside `S_mu⁺`.
fn line_search(
    p: &FractionalProgram,
    cur: &DualEvaluation,
    dir: [f64; 2],
    first_step: f64,
) -> Option<DualEvaluation> {
    let lambda = p.lambda();
    let d = cur.point;
    let size = 1.0 + d.varsigma.abs() + d.sigma.abs();
    let slack = ROUNDOFF_SLACK * (1.0 + cur.value.abs());
    let mut t = first_step;
    for _ in 0..MAX_BACKTRACKS {
        let trial =
            DualPoint::new(d.mu, d.varsigma + t * dir[0], d.sigma + t * dir[1]).project(lambda);
        let step = [trial.varsigma - d.varsigma, trial.sigma - d.sigma];
        if norm2(step) <= 1e-16 * size {
            return None;
        }
        let predicted = cur.grad_varsigma * step[0] + cur.grad_sigma * step[1];
        if predicted <= 0.0 {
            return None;
        }
        if let Ok(e) = evaluate(p, &trial) {
            if e.value >= cur.value + ARMIJO * predicted {
                return Some(e);
            }
            // Near the optimum the predicted gain drops below the resolution
            // of the dual value; accept a non-decreasing step there.
            if predicted <= slack && e.value >= cur.value - slack {
                let better_grad =
                    norm2(projected_gradient(&e, lambda)) < norm2(projected_gradient(cur, lambda));
                if better_grad {
                    return Some(e);
                }
            }
        }
        t *= 0.5;
    }
    None
}

/// Recovers `x_mu` from a dual solution and checks the zero-gap conditions.
pub fn certify(
    p: &FractionalProgram,
    mu: f64,
    sol: &DualSolution,
    opts: &SolverOptions,
) -> Certificate {
    let none = |primal_value: f64| Certificate {
        primal_value,
        dual_value: sol.value,
        gap: f64::NAN,
        stationarity_xi: f64::NAN,
        feasibility_residual: f64::NAN,
        kind: CertificateKind::None,
    };
    let Ok(e) = evaluate(p, &sol.d_star) else {
        return none(f64::NAN);
    };
    let x = &e.x_candidate;
    let Ok(primal_value) = p.eval_p_mu(mu, x) else {
        return none(f64::NAN);
    };
    let level = 1.0 / mu;
    let gap = primal_value - sol.value;
    let stationarity_xi = (e.xi - sol.d_star.varsigma).abs();
    let feasibility_residual = e.h_at_x - level;

    let tol_h = opts.tol_stationarity;
    let zero_gap = gap.abs() <= opts.tol_gap * (1.0 + primal_value.abs());
    let stationary = stationarity_xi <= opts.tol_stationarity * (1.0 + sol.d_star.varsigma.abs());
    let complementary = if sol.d_star.sigma > 0.0 {
        feasibility_residual.abs() <= tol_h
    } else {
        feasibility_residual >= -tol_h
    };
    let trusted = !matches!(sol.status, DualStatus::NearPdBoundary);
    let feasible = feasibility_residual >= -feasibility_slack(level);

    let kind = if !trusted {
        CertificateKind::None
    } else if zero_gap && stationary && complementary {
        CertificateKind::Perfect
    } else if feasible {
        CertificateKind::WeakOnly
    } else {
        CertificateKind::None
    };
    Certificate {
        primal_value,
        dual_value: sol.value,
        gap,
        stationarity_xi,
        feasibility_residual,
        kind,
    }
}

/// The subproblem at `mu0`: `X_mu0 = {H⁻¹b}`.
fn singleton_sample(p: &FractionalProgram) -> MuSample {
    let mu = p.mu0();
    let x = PrimalPoint::new(p.center().clone());
    let xi = p.canonical_measure(x.as_vector());
    let value = p.eval_p_mu(mu, &x).expect("mu0 is in range");
    let h = p.h_value(&x).expect("dimension matches");
    let d_star = DualPoint::new(mu, xi.max(-p.lambda()), 0.0);
    let certificate = Certificate {
        primal_value: value,
        dual_value: value,
        gap: 0.0,
        stationarity_xi: (xi - d_star.varsigma).abs(),
        feasibility_residual: h - 1.0 / mu,
        kind: CertificateKind::Perfect,
    };
    let solution = DualSolution {
        d_star,
        value,
        grad_norm: 0.0,
        status: DualStatus::SingletonFeasibleSet,
        iterations: 0,
        min_pivot: f64::NAN,
        trace: vec![value],
    };
    let p0 = p.eval_p0(&x).ok();
    MuSample {
        mu,
        solution: Some(solution),
        certificate: Some(certificate),
        x: Some(x),
        p0,
    }
}

/// Maximizes and certifies the subproblem at one `mu`.
pub fn solve_at(p: &FractionalProgram, mu: f64, opts: &SolverOptions) -> MuSample {
    if mu <= p.mu0() {
        return singleton_sample(p);
    }
    let Ok(solution) = maximize_dual(p, mu, opts) else {
        return MuSample {
            mu,
            solution: None,
            certificate: None,
            x: None,
            p0: None,
        };
    };
    let certificate = certify(p, mu, &solution, opts);
    let x = evaluate(p, &solution.d_star).ok().map(|e| e.x_candidate);
    // A certified x_mu may sit just outside {h >= delta} by the certificate
    // tolerance; pull it onto the boundary so P0 is evaluated at a feasible
    // point.
    let (x, p0) = match (x, certificate.kind) {
        (Some(x), CertificateKind::Perfect | CertificateKind::WeakOnly) => {
            let x = p.retract(&x, p.delta()).unwrap_or(x);
            let p0 = p.eval_p0(&x).ok();
            (Some(x), p0)
        }
        (x, _) => (x, None),
    };
    MuSample {
        mu,
        solution: Some(solution),
        certificate: Some(certificate),
        x,
        p0,
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search on `[lo, hi]` under the sample ranking; returns all
/// samples it evaluated.
fn golden_section(
    p: &FractionalProgram,
    mut lo: f64,
    mut hi: f64,
    width: f64,
    opts: &SolverOptions,
) -> Vec<MuSample> {
    let mut out = Vec::new();
    let tol = TIE_TOL;
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let mut sa = solve_at(p, a, opts);
    let mut sb = solve_at(p, b, opts);
    while hi - lo > width {
        if sa.better_than(&sb, tol) {
            hi = b;
            b = a;
            out.push(std::mem::replace(&mut sb, sa.clone()));
            a = hi - GOLDEN * (hi - lo);
            sa = solve_at(p, a, opts);
        } else {
            lo = a;
            a = b;
            out.push(std::mem::replace(&mut sa, sb.clone()));
            b = lo + GOLDEN * (hi - lo);
            sb = solve_at(p, b, opts);
        }
    }
    out.push(sa);
    out.push(sb);
    out
}

fn pick_best(samples: &[MuSample], tol: f64) -> Option<&MuSample> {
    samples
        .iter()
        .filter(|s| s.x.is_some() && s.p0.is_some())
        .fold(None, |best: Option<&MuSample>, s| match best {
            Some(b) if !s.better_than(b, tol) => Some(b),
            _ => Some(s),
        })
}

/// Sweeps `mu` over `[mu0, 1/delta]` and returns the best certified point.
pub fn solve(p: &FractionalProgram, opts: &SolverOptions) -> Result<SolveResult, SolveError> {
    opts.check()?;
    let iv = p.mu_interval();
    let grid = iv.grid(opts.grid_points);
    let grid_samples: Vec<MuSample> = grid.par_iter().map(|&mu| solve_at(p, mu, opts)).collect();
    if grid_samples.iter().all(|s| s.solution.is_none()) {
        return Err(SolveError::AllSubproblemsFailed);
    }
    let grid_perfect_fraction = grid_samples
        .iter()
        .filter(|s| s.kind() == CertificateKind::Perfect)
        .count() as f64
        / grid_samples.len() as f64;

    let mut samples = grid_samples;
    if !iv.is_degenerate() {
        refine(p, &grid, &mut samples, opts);
    }

    samples.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let best = pick_best(&samples, TIE_TOL)
        .ok_or(SolveError::AllSubproblemsFailed)?
        .clone();
    let solution = best.solution.expect("ranked samples carry a solution");
    let mut certificate = best
        .certificate
        .expect("ranked samples carry a certificate");
    // The sweep only certifies a global minimizer when every grid
    // subproblem has a dual maximizer inside S_mu+.
    if certificate.kind == CertificateKind::Perfect && grid_perfect_fraction < 1.0 {
        certificate.kind = CertificateKind::WeakOnly;
    }
    Ok(SolveResult {
        x_star: best.x.expect("ranked samples carry x"),
        mu_star: best.mu,
        d_star: solution.d_star,
        p0_value: best.p0.expect("ranked samples carry P0"),
        best_dual_value: solution.value,
        certificate,
        status: solution.status,
        mu_profile: samples,
        grid_perfect_fraction,
    })
}

fn refine(p: &FractionalProgram, grid: &[f64], samples: &mut Vec<MuSample>, opts: &SolverOptions) {
    let iv = p.mu_interval();
    let tol = TIE_TOL;
    let Some(best) = pick_best(samples, tol) else {
        return;
    };
    let final_width = (1e-4 * iv.width()).max(1e-8);
    let spacing = if grid.len() > 1 {
        iv.width() / (grid.len() - 1) as f64
    } else {
        iv.width()
    };
    let mut center = best.mu;
    let mut half = spacing;

    let rounds = opts.refine_rounds;
    for round in 0..rounds {
        let lo = iv.clamp(center - half);
        let hi = iv.clamp(center + half);
        if hi - lo <= final_width {
            break;
        }
        let frac = (round + 1) as f64 / rounds as f64;
        let width = (hi - lo) * (final_width / (hi - lo)).powf(frac);
        let found = golden_section(p, lo, hi, width.max(final_width), opts);
        samples.extend(found);
        center = pick_best(samples, tol).map_or(center, |s| s.mu);
        half = width;
    }

    // mu <- 1/h(x): P0(x_{mu'}) <= P_{mu'}(x_{mu'}) <= P_{mu'}(x) = P0(x).
    for _ in 0..opts.polish_steps {
        let Some(best) = pick_best(samples, tol) else {
            return;
        };
        let Some(x) = best.x.as_ref() else { return };
        let Ok(h) = p.h_value(x) else { return };
        let next = iv.clamp(1.0 / h);
        if (next - best.mu).abs() <= 1e-14 * best.mu {
            return;
        }
        let before = best.rank();
        let s = solve_at(p, next, opts);
        let improved = s.better_than(best, tol) || s.rank().1 < before.1;
        samples.push(s);
        if !improved {
            return;
        }
    }
}

/// Trend of the dual value along one ray.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayTrend {
    /// `(parameter, dual value)` pairs; non-PD points are skipped.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of value against the ray's regressor.
    pub slope: f64,
    /// Slope predicted by the leading term, when known.
    pub expected_slope: Option<f64>,
    pub divergent: bool,
}

/// Ray from an interior point into the singular surface of `S_mu⁺`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryRay {
    pub direction: [f64; 2],
    /// `(varsigma, sigma)` where the ray meets the singular surface.
    pub hit: Option<[f64; 2]>,
    /// Trend of the value against `log10` of the distance to `hit`.
    pub trend: Option<RayTrend>,
}

/// Empirical coercivity diagnostics for one subproblem; advisory only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExistenceProbe {
    pub mu: f64,
    pub origin: [f64; 2],
    /// `varsigma -> inf` at fixed `sigma`; regressor `varsigma²`.
    pub varsigma_ray: RayTrend,
    /// `sigma -> inf` at fixed `varsigma`; regressor `sigma`.
    pub sigma_ray: RayTrend,
    pub boundary_rays: Vec<BoundaryRay>,
    /// All rays that reach the singular surface or infinity diverge to `-inf`.
    pub coercive: bool,
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn strictly_decreasing(values: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.collect();
    v.len() >= 2 && v.windows(2).all(|w| w[1] < w[0])
}

/// Samples rays towards infinity and towards the singular surface of
/// `S_mu⁺` and reports whether the dual value trends to `-inf`.
pub fn existence_probe(p: &FractionalProgram, mu: f64) -> Result<ExistenceProbe, SolveError> {
    p.check_mu(mu)?;
    let start = find_start(p, mu).ok_or(SolveError::NoStartingPoint { mu })?;
    let o = start.point;
    let scale = 1.0 + o.varsigma.abs() + o.sigma.abs();

    let value_at = |v: f64, s: f64| evaluate(p, &DualPoint::new(mu, v, s)).ok().map(|e| e.value);

    // The leading term along varsigma is -mu/2 varsigma².
    let varsigma_samples: Vec<(f64, f64)> = (3..=7)
        .filter_map(|k| {
            let v = o.varsigma + scale * 10f64.powi(k);
            value_at(v, o.sigma).map(|val| (v * v, val))
        })
        .collect();
    let slope = least_squares_slope(&varsigma_samples);
    let varsigma_ray = RayTrend {
        divergent: slope < 0.0 && strictly_decreasing(varsigma_samples.iter().map(|s| s.1)),
        slope,
        expected_slope: Some(-0.5 * mu),
        samples: varsigma_samples,
    };

    // Along sigma the value grows like sigma (1/mu - 1/mu0).
    let sigma_samples: Vec<(f64, f64)> = (3..=7)
        .filter_map(|k| {
            let s = o.sigma + scale * 10f64.powi(k);
            value_at(o.varsigma, s).map(|val| (s, val))
        })
        .collect();
    let slope = least_squares_slope(&sigma_samples);
    let sigma_ray = RayTrend {
        divergent: slope < 0.0 && strictly_decreasing(sigma_samples.iter().map(|s| s.1)),
        slope,
        expected_slope: Some(1.0 / mu - 1.0 / p.mu0()),
        samples: sigma_samples,
    };

    let boundary_rays: Vec<BoundaryRay> = [[-1.0, 0.0], [0.0, -1.0], [-1.0, -1.0]]
        .into_iter()
        .map(|dir| boundary_ray(p, mu, o, dir))
        .collect();

    let coercive = varsigma_ray.divergent
        && (sigma_ray.divergent || sigma_ray.samples.is_empty())
        && boundary_rays
            .iter()
            .all(|r| r.trend.as_ref().is_none_or(|t| t.divergent));
    Ok(ExistenceProbe {
        mu,
        origin: [o.varsigma, o.sigma],
        varsigma_ray,
        sigma_ray,
        boundary_rays,
        coercive,
    })
}

fn boundary_ray(p: &FractionalProgram, mu: f64, o: DualPoint, dir: [f64; 2]) -> BoundaryRay {
    let lambda = p.lambda();
    let at = |t: f64| DualPoint::new(mu, o.varsigma + t * dir[0], o.sigma + t * dir[1]);
    // Largest step that stays in the box.
    let mut t_box = f64::INFINITY;
    if dir[0] < 0.0 {
        t_box = t_box.min((o.varsigma + lambda) / -dir[0]);
    }
    if dir[1] < 0.0 {
        t_box = t_box.min(o.sigma / -dir[1]);
    }
    let miss = BoundaryRay {
        direction: dir,
        hit: None,
        trend: None,
    };
    if !t_box.is_finite() || t_box <= 0.0 || crate::dual::is_in_s_plus(p, &at(t_box)) {
        return miss;
    }
    let (mut inside, mut outside) = (0.0, t_box);
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if crate::dual::is_in_s_plus(p, &at(mid)) {
            inside = mid;
        } else {
            outside = mid;
        }
        if outside - inside <= 1e-15 * outside {
            break;
        }
    }
    let t_hit = outside;
    let samples: Vec<(f64, f64)> = (1..=8)
        .filter_map(|k| {
            let dist = t_hit * 10f64.powi(-k);
            evaluate(p, &at(t_hit - dist))
                .ok()
                .map(|e| (dist.log10(), e.value))
        })
        .collect();
    let slope = least_squares_slope(&samples);
    let hit = at(t_hit);
    BoundaryRay {
        direction: dir,
        hit: Some([hit.varsigma, hit.sigma]),
        trend: Some(RayTrend {
            divergent: slope > 0.0 && strictly_decreasing(samples.iter().map(|s| s.1)),
            slope,
            expected_slope: None,
            samples,
        }),
    }
}
