//! Brute-force ground truth for instances with `n <= 3`.
//!
//! A dense grid over a box enclosing the feasible ellipsoid is scanned, and
//! the best cells seed a derivative-free coordinate descent. Objective
//! evaluation uses its own flat-array code so that nothing is shared with the
//! dual solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{feasibility_slack, FractionalProgram, PrimalPoint, ProblemError};

pub const MAX_ORACLE_DIM: usize = 3;
/// Grid points beyond which a scan is refused.
pub const MAX_GRID_POINTS: u64 = 2_000_000_000;

const MULTISTARTS: usize = 20;
const SHRINKS: usize = 40;
const SHRINK_FACTOR: f64 = 0.5;
const BOX_INFLATION: f64 = 1.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle supports n <= {MAX_ORACLE_DIM}, got n = {0}")]
    DimensionTooLarge(usize),
    #[error("grid of {0} points exceeds the oracle budget")]
    GridTooLarge(u64),
    #[error("resolution must be positive and finite")]
    BadResolution,
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub min_value: f64,
    pub argmin: Vec<f64>,
    pub resolution: f64,
    /// `[lower, upper]` per coordinate.
    pub bounds: Vec<[f64; 2]>,
    pub n_evals: u64,
}

impl OracleReport {
    pub fn argmin_point(&self) -> PrimalPoint {
        PrimalPoint::from_slice(&self.argmin)
    }
}

/// Axis-aligned box around `{h(x) >= level}`, inflated by 1%.
///
/// With `c = H⁻¹b`, `h(x) = h(c) - 1/2 (x - c)ᵀ(-H)(x - c)`, so the set is the
/// ellipsoid `(x - c)ᵀ(-H)(x - c) <= 2 (h(c) - level)` whose extent along
/// axis `i` is `sqrt(2 (h(c) - level) [(-H)⁻¹]_ii)`.
pub fn bounding_box_at_level(p: &FractionalProgram, level: f64) -> Vec<[f64; 2]> {
    let radius_sq = (2.0 * (p.h_max() - level)).max(0.0);
    let inv = (-p.h()).try_inverse().expect("validated H is invertible");
    p.center()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let half = (radius_sq * inv[(i, i)]).sqrt() * BOX_INFLATION;
            [c - half, c + half]
        })
        .collect()
}

/// Box enclosing the feasible set `{h(x) >= delta}`.
pub fn bounding_box(p: &FractionalProgram) -> Vec<[f64; 2]> {
    bounding_box_at_level(p, p.delta())
}

/// Flat copy of the instance for allocation-free evaluation.
struct FlatProgram {
    n: usize,
    m: usize,
    q: Vec<f64>,
    f: Vec<f64>,
    b_op: Vec<f64>,
    lambda: f64,
    h: Vec<f64>,
    b: Vec<f64>,
}

impl FlatProgram {
    fn new(p: &FractionalProgram) -> Self {
        let n = p.dim();
        let m = p.rows();
        let row_major = |mat: &nalgebra::DMatrix<f64>| {
            let (r, c) = mat.shape();
            (0..r)
                .flat_map(|i| (0..c).map(move |j| (i, j)))
                .map(|(i, j)| mat[(i, j)])
                .collect()
        };
        Self {
            n,
            m,
            q: row_major(p.q()),
            f: p.f().iter().copied().collect(),
            b_op: row_major(p.b_op()),
            lambda: p.lambda(),
            h: row_major(p.h()),
            b: p.b().iter().copied().collect(),
        }
    }

    fn quad(&self, mat: &[f64], x: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += mat[i * n + j] * x[j];
            }
            s += x[i] * row;
        }
        s
    }

    /// `(f, g, h)` at `x`.
    fn parts(&self, x: &[f64]) -> (f64, f64, f64) {
        let n = self.n;
        let dot = |a: &[f64]| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
        let f = 0.5 * self.quad(&self.q, x) - dot(&self.f);
        let h = 0.5 * self.quad(&self.h, x) - dot(&self.b);
        let mut bx_sq = 0.0;
        for r in 0..self.m {
            let v: f64 = (0..n).map(|j| self.b_op[r * n + j] * x[j]).sum();
            bx_sq += v * v;
        }
        let xi = 0.5 * bx_sq - self.lambda;
        (f, 0.5 * xi * xi, h)
    }
}

/// Which objective and which feasibility level the oracle minimizes.
#[derive(Debug, Clone, Copy)]
enum Target {
    P0 { delta: f64 },
    PMu { mu: f64 },
}

impl Target {
    fn level(&self) -> f64 {
        match *self {
            Target::P0 { delta } => delta,
            Target::PMu { mu } => 1.0 / mu,
        }
    }

    /// Objective value, or `None` outside the feasible set.
    fn eval(&self, fp: &FlatProgram, x: &[f64]) -> Option<f64> {
        let (f, g, h) = fp.parts(x);
        let level = self.level();
        if h.is_nan() || h < level - feasibility_slack(level) {
            return None;
        }
        Some(match *self {
            Target::P0 { .. } => f + g / h,
            Target::PMu { mu } => f + mu * g,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    value: f64,
    x: [f64; MAX_ORACLE_DIM],
}

impl Candidate {
    /// Value first, then the lexicographically smaller point.
    fn precedes(&self, other: &Candidate) -> bool {
        match self.value.total_cmp(&other.value) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self
                .x
                .iter()
                .zip(&other.x)
                .find(|(a, b)| a != b)
                .is_some_and(|(a, b)| a < b),
        }
    }
}

/// Keeps the `cap` best candidates, best first.
#[derive(Debug, Clone, Default)]
struct TopK {
    cap: usize,
    items: Vec<Candidate>,
}

impl TopK {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            items: Vec::with_capacity(cap + 1),
        }
    }

    fn push(&mut self, c: Candidate) {
        if self.items.len() == self.cap && !c.precedes(self.items.last().expect("cap > 0")) {
            return;
        }
        let pos = self
            .items
            .iter()
            .position(|it| c.precedes(it))
            .unwrap_or(self.items.len());
        self.items.insert(pos, c);
        self.items.truncate(self.cap);
    }

    fn merge(mut self, other: TopK) -> TopK {
        for c in other.items {
            self.push(c);
        }
        self
    }
}

/// Minimizes `P0` over the feasible set.
pub fn grid_minimize_p0(
    p: &FractionalProgram,
    resolution: f64,
    seed: u64,
) -> Result<OracleReport, OracleError> {
    minimize(p, Target::P0 { delta: p.delta() }, resolution, seed)
}

/// Minimizes `P_mu` over `{h(x) >= 1/mu}`.
pub fn grid_minimize_p_mu(
    p: &FractionalProgram,
    mu: f64,
    resolution: f64,
    seed: u64,
) -> Result<OracleReport, OracleError> {
    p.check_mu(mu)?;
    minimize(p, Target::PMu { mu }, resolution, seed)
}

fn minimize(
    p: &FractionalProgram,
    target: Target,
    resolution: f64,
    seed: u64,
) -> Result<OracleReport, OracleError> {
    let n = p.dim();
    if n > MAX_ORACLE_DIM {
        return Err(OracleError::DimensionTooLarge(n));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(OracleError::BadResolution);
    }
    let fp = FlatProgram::new(p);
    let bounds = bounding_box_at_level(p, target.level());
    let counts: Vec<u64> = bounds
        .iter()
        .map(|[lo, hi]| ((hi - lo) / resolution).ceil() as u64 + 1)
        .collect();
    let total = counts
        .iter()
        .try_fold(1u64, |acc, &c| acc.checked_mul(c))
        .unwrap_or(u64::MAX);
    if total > MAX_GRID_POINTS {
        return Err(OracleError::GridTooLarge(total));
    }
    let steps: Vec<f64> = bounds
        .iter()
        .zip(&counts)
        .map(|([lo, hi], &c)| {
            if c > 1 {
                (hi - lo) / (c - 1) as f64
            } else {
                0.0
            }
        })
        .collect();

    let point_at = |mut idx: u64| {
        let mut x = [0.0; MAX_ORACLE_DIM];
        for i in (0..n).rev() {
            let k = idx % counts[i];
            idx /= counts[i];
            x[i] = bounds[i][0] + steps[i] * k as f64;
        }
        x
    };

    let mut best = (0..total)
        .into_par_iter()
        .fold(
            || TopK::new(MULTISTARTS),
            |mut top, idx| {
                let x = point_at(idx);
                if let Some(value) = target.eval(&fp, &x[..n]) {
                    top.push(Candidate { value, x });
                }
                top
            },
        )
        .reduce(|| TopK::new(MULTISTARTS), TopK::merge);

    // The center maximizes h and is feasible at every admissible level.
    let mut center = [0.0; MAX_ORACLE_DIM];
    center[..n].copy_from_slice(p.center().as_slice());
    let mut n_evals = total + 1;
    if let Some(value) = target.eval(&fp, &center[..n]) {
        best.push(Candidate { value, x: center });
    }
    let incumbent = best
        .items
        .first()
        .cloned()
        .expect("center is always feasible");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitters: Vec<[f64; MAX_ORACLE_DIM]> = best
        .items
        .iter()
        .map(|_| {
            let mut j = [0.0; MAX_ORACLE_DIM];
            for (i, ji) in j.iter_mut().enumerate().take(n) {
                *ji = rng.gen_range(-0.5..=0.5) * steps[i];
            }
            j
        })
        .collect();

    let refined: Vec<(Candidate, u64)> = best
        .items
        .par_iter()
        .zip(jitters.par_iter())
        .map(|(start, jitter)| {
            let mut x0 = start.x;
            for i in 0..n {
                x0[i] += jitter[i];
            }
            let from = match target.eval(&fp, &x0[..n]) {
                Some(value) if value < start.value => Candidate { value, x: x0 },
                _ => start.clone(),
            };
            let step0 = steps.iter().take(n).fold(resolution, |a, &s| a.max(s));
            coordinate_descent(&fp, target, n, from, step0)
        })
        .collect();

    let mut winner = incumbent;
    for (c, evals) in refined {
        n_evals += evals;
        if c.precedes(&winner) {
            winner = c;
        }
    }
    Ok(OracleReport {
        min_value: winner.value,
        argmin: winner.x[..n].to_vec(),
        resolution,
        bounds,
        n_evals,
    })
}

/// Compass search: try `±step` along each axis, halve the step when no move
/// helps. Only feasible, strictly better points are accepted.
fn coordinate_descent(
    fp: &FlatProgram,
    target: Target,
    n: usize,
    start: Candidate,
    step0: f64,
) -> (Candidate, u64) {
    let mut cur = start;
    let mut step = step0;
    let mut evals = 0;
    for _ in 0..SHRINKS {
        let mut moved = true;
        let mut sweeps = 0;
        while moved && sweeps < 1000 {
            moved = false;
            sweeps += 1;
            for i in 0..n {
                for sign in [-1.0, 1.0] {
                    let mut x = cur.x;
                    x[i] += sign * step;
                    evals += 1;
                    if let Some(value) = target.eval(fp, &x[..n]) {
                        if value < cur.value {
                            cur = Candidate { value, x };
                            moved = true;
                        }
                    }
                }
            }
        }
        step *= SHRINK_FACTOR;
    }
    (cur, evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::tests::instance_a;
    use crate::problem::ProgramData;
    use nalgebra::{DMatrix, DVector};

    const INSTANCE_A_MIN: f64 = 0.754_144_250_073_180_2;
    const INSTANCE_A_ARGMIN: f64 = 0.548_993_421_230_817_8;

    #[test]
    fn box_instance_a() {
        let p = instance_a(0.5);
        let b = bounding_box(&p);
        let half = std::f64::consts::FRAC_1_SQRT_2 * 1.01;
        assert!((b[0][0] - (1.0 - half)).abs() < 1e-14);
        assert!((b[0][1] - (1.0 + half)).abs() < 1e-14);

        let p = instance_a(1.0);
        assert_eq!(bounding_box(&p), vec![[1.0, 1.0]]);
    }

    #[test]
    fn box_diagonal_h_is_per_axis() {
        let d = ProgramData {
            q: DMatrix::identity(2, 2),
            f: DVector::zeros(2),
            b_op: DMatrix::zeros(0, 2),
            lambda: 0.5,
            h: DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -4.0])),
            b: DVector::from_vec(vec![-1.0, -4.0]),
            delta: 1.0,
        };
        let p = FractionalProgram::validate(d).unwrap();
        // center (1, 1), h_max = 2.5; radius² = 3.
        let b = bounding_box(&p);
        let r0 = 3.0_f64.sqrt() * 1.01;
        let r1 = (3.0_f64 / 4.0).sqrt() * 1.01;
        assert!((b[0][0] - (1.0 - r0)).abs() < 1e-12 && (b[0][1] - (1.0 + r0)).abs() < 1e-12);
        assert!((b[1][0] - (1.0 - r1)).abs() < 1e-12 && (b[1][1] - (1.0 + r1)).abs() < 1e-12);
    }

    #[test]
    fn oracle_instance_a() {
        let p = instance_a(0.5);
        let r = grid_minimize_p0(&p, 1e-5, 7).unwrap();
        // Root of dP0/dx found with 30-digit arithmetic; the boundary point
        // 1 - 1/sqrt(2) only gives P0 = 1.00184.
        assert!((r.min_value - INSTANCE_A_MIN).abs() < 1e-9, "{r:?}");
        assert!((r.argmin[0] - INSTANCE_A_ARGMIN).abs() < 1e-5);
        let direct = p.eval_p0(&r.argmin_point()).unwrap();
        assert!((direct - r.min_value).abs() <= 1e-14 * r.min_value.abs());
    }

    #[test]
    fn oracle_singleton() {
        let p = instance_a(1.0);
        let r = grid_minimize_p0(&p, 1e-5, 0).unwrap();
        // The feasibility slack of 2e-9 on h = 1 - (x - 1)² admits
        // |x - 1| <= 4.5e-5, which the descent is free to use.
        assert!((r.argmin[0] - 1.0).abs() <= 4.5e-5, "{r:?}");
        assert!((r.min_value - 1.125).abs() <= 1e-4);
        let p = instance_a(0.5);
        let r = grid_minimize_p_mu(&p, 1.0, 1e-5, 0).unwrap();
        assert!((r.min_value - 1.125).abs() <= 1e-4);
    }

    #[test]
    fn oracle_p_mu() {
        let p = instance_a(0.5);
        let r = grid_minimize_p_mu(&p, 2.0, 1e-5, 0).unwrap();
        // dP_2/dx = x³ > 0 on X_2, so the minimum is the left end 1 - 1/sqrt(2).
        let left = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        assert!(
            (r.min_value - 1.001_839_828_220_178_7).abs() < 1e-9,
            "{r:?}"
        );
        assert!((r.argmin[0] - left).abs() < 1e-8);
    }

    #[test]
    fn oracle_is_deterministic() {
        let p = instance_a(0.5);
        let a = grid_minimize_p0(&p, 1e-3, 11).unwrap();
        let b = grid_minimize_p0(&p, 1e-3, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_rejects_large_dimension() {
        let n = 4;
        let d = ProgramData {
            q: DMatrix::identity(n, n),
            f: DVector::zeros(n),
            b_op: DMatrix::zeros(0, n),
            lambda: 1.0,
            h: -DMatrix::identity(n, n),
            b: DVector::from_element(n, 1.0),
            delta: 0.5,
        };
        let p = FractionalProgram::validate(d).unwrap();
        assert_eq!(
            grid_minimize_p0(&p, 0.1, 0),
            Err(OracleError::DimensionTooLarge(4))
        );
    }

    #[test]
    fn top_k_keeps_best() {
        let mut t = TopK::new(3);
        for v in [5.0, 1.0, 4.0, 2.0, 3.0] {
            t.push(Candidate {
                value: v,
                x: [v, 0.0, 0.0],
            });
        }
        let vals: Vec<f64> = t.items.iter().map(|c| c.value).collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }
}
