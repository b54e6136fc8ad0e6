//! The two-dimensional canonical dual of a subproblem `P_mu`.
//!
//! For a dual pair `(varsigma, sigma)` with `varsigma >= -lambda` and
//! `sigma >= 0` the dual Hessian operator is
//!
//! ```text
//! G_mu(varsigma, sigma) = Q + mu varsigma BᵀB - sigma H
//! ```
//!
//! and, wherever `G_mu` is positive definite, the dual function is
//!
//! ```text
//! P^d_mu = -1/2 cᵀ G_mu⁻¹ c - mu lambda varsigma - mu/2 varsigma² + sigma/mu,
//! c      = f - sigma b.
//! ```
//!
//! Everything at one dual point is derived from a single Cholesky
//! factorization of `G_mu`.

use nalgebra::{DMatrix, DVector, Matrix2};
use thiserror::Error;

use crate::linalg::{pivot_scale, sym2_eigenvalues, PivotedCholesky};
use crate::problem::{FractionalProgram, PrimalPoint, ProblemError};

/// Pivots at or below `WELL_CONDITIONED_PIVOT · scale` mark a point as
/// ill-conditioned; convergence is never declared there.
pub const WELL_CONDITIONED_PIVOT: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("G_mu is not positive definite at {point:?} (min pivot {min_pivot:e})")]
    NotPd { point: DualPoint, min_pivot: f64 },
    #[error("dual point {point:?} violates varsigma >= -lambda or sigma >= 0")]
    OutOfBox { point: DualPoint },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Coordinates `(mu, varsigma, sigma)` of the parameterized dual space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub mu: f64,
    pub varsigma: f64,
    pub sigma: f64,
}

impl DualPoint {
    pub fn new(mu: f64, varsigma: f64, sigma: f64) -> Self {
        Self {
            mu,
            varsigma,
            sigma,
        }
    }

    pub fn in_box(&self, lambda: f64) -> bool {
        self.varsigma >= -lambda && self.sigma >= 0.0
    }

    /// Moves the pair onto the box `varsigma >= -lambda, sigma >= 0`.
    pub fn project(&self, lambda: f64) -> Self {
        Self {
            mu: self.mu,
            varsigma: self.varsigma.max(-lambda),
            sigma: self.sigma.max(0.0),
        }
    }
}

/// Value of `G_mu` at a dual point and its factorization status.
#[derive(Debug, Clone)]
pub struct GFactorization {
    pub g: DMatrix<f64>,
    chol: PivotedCholesky,
    pub pd: bool,
    pub min_pivot: f64,
    pub scale: f64,
}

impl GFactorization {
    /// Positive definite but with a pivot too small to trust convergence.
    pub fn ill_conditioned(&self) -> bool {
        self.pd && self.min_pivot <= WELL_CONDITIONED_PIVOT * self.scale
    }

    pub fn lower_factor(&self) -> Option<DMatrix<f64>> {
        self.chol.factor.as_ref().map(|c| c.l())
    }

    /// Solves `G y = rhs` with one step of iterative refinement.
    pub fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let mut y = self.chol.solve(rhs)?;
        let r = rhs - &self.g * &y;
        if let Some(dy) = self.chol.solve(&r) {
            y += dy;
        }
        Some(y)
    }
}

/// `G_mu(varsigma, sigma) = Q + mu varsigma BᵀB - sigma H`, factorized.
pub fn assemble_g(p: &FractionalProgram, d: &DualPoint) -> GFactorization {
    let g = p.q() + p.btb() * (d.mu * d.varsigma) - p.h() * d.sigma;
    let chol = PivotedCholesky::new(&g);
    let scale = pivot_scale(&g);
    GFactorization {
        pd: chol.is_pd(),
        min_pivot: chol.min_pivot,
        chol,
        g,
        scale,
    }
}

/// Membership in `S_mu⁺`: box bounds hold and `G_mu` is positive definite.
pub fn is_in_s_plus(p: &FractionalProgram, d: &DualPoint) -> bool {
    d.in_box(p.lambda()) && assemble_g(p, d).pd
}

/// Everything the solver needs at one dual point.
#[derive(Debug, Clone)]
pub struct DualEvaluation {
    pub point: DualPoint,
    pub value: f64,
    pub grad_varsigma: f64,
    pub grad_sigma: f64,
    /// `x(varsigma, sigma) = G_mu⁻¹ (f - sigma b)`.
    pub x_candidate: PrimalPoint,
    /// Canonical measure `1/2 |B x|² - lambda` at the candidate.
    pub xi: f64,
    pub h_at_x: f64,
    /// `|G x - c|`.
    pub residual: f64,
    pub rhs_norm: f64,
    pub factorization: GFactorization,
}

impl DualEvaluation {
    pub fn min_pivot(&self) -> f64 {
        self.factorization.min_pivot
    }

    pub fn ill_conditioned(&self) -> bool {
        self.factorization.ill_conditioned()
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.grad_varsigma, self.grad_sigma]
    }

    /// Analytic 2×2 Hessian in `(varsigma, sigma)` order, reusing the
    /// factorization. With `u = BᵀBx` and `v = Hx - b`:
    ///
    /// ```text
    /// d²/dvarsigma²        = -mu² uᵀG⁻¹u - mu
    /// d²/dsigma²           = -vᵀG⁻¹v
    /// d²/dvarsigma dsigma  =  mu uᵀG⁻¹v
    /// ```
    pub fn hessian(&self, p: &FractionalProgram) -> Matrix2<f64> {
        let mu = self.point.mu;
        let x = self.x_candidate.as_vector();
        let u = p.btb() * x;
        let v = p.h() * x - p.b();
        let gu = self
            .factorization
            .solve(&u)
            .expect("evaluation holds a PD factor");
        let gv = self
            .factorization
            .solve(&v)
            .expect("evaluation holds a PD factor");
        let ss = -mu * mu * u.dot(&gu) - mu;
        let vv = -v.dot(&gv);
        let sv = 0.5 * mu * (u.dot(&gv) + v.dot(&gu));
        Matrix2::new(ss, sv, sv, vv)
    }
}

/// Evaluates value, gradient and primal candidate from one factorization.
pub fn evaluate(p: &FractionalProgram, d: &DualPoint) -> Result<DualEvaluation, DualError> {
    p.check_mu(d.mu)?;
    if !d.in_box(p.lambda()) {
        return Err(DualError::OutOfBox { point: *d });
    }
    let fac = assemble_g(p, d);
    if !fac.pd {
        return Err(DualError::NotPd {
            point: *d,
            min_pivot: fac.min_pivot,
        });
    }
    let c = p.f() - p.b() * d.sigma;
    let x = fac.solve(&c).expect("checked PD above");
    let residual = (&fac.g * &x - &c).norm();

    let DualPoint {
        mu,
        varsigma,
        sigma,
    } = *d;
    let lambda = p.lambda();
    let value =
        -0.5 * c.dot(&x) - mu * lambda * varsigma - 0.5 * mu * varsigma * varsigma + sigma / mu;
    let xi = p.canonical_measure(&x);
    let h_at_x = p.h_unchecked(&x);
    Ok(DualEvaluation {
        point: *d,
        value,
        grad_varsigma: mu * (xi - varsigma),
        grad_sigma: 1.0 / mu - h_at_x,
        x_candidate: PrimalPoint::new(x),
        xi,
        h_at_x,
        residual,
        rhs_norm: c.norm(),
        factorization: fac,
    })
}

/// Primal candidate `x = G_mu⁻¹ (f - sigma b)`, the unique minimizer of the
/// total complementary function in `x`.
pub fn recover_x(p: &FractionalProgram, d: &DualPoint) -> Result<PrimalPoint, DualError> {
    evaluate(p, d).map(|e| e.x_candidate)
}

pub fn dual_value(p: &FractionalProgram, d: &DualPoint) -> Result<f64, DualError> {
    evaluate(p, d).map(|e| e.value)
}

/// `(mu (xi - varsigma), 1/mu - h(x))` at the primal candidate.
pub fn dual_gradient(p: &FractionalProgram, d: &DualPoint) -> Result<(f64, f64), DualError> {
    evaluate(p, d).map(|e| (e.grad_varsigma, e.grad_sigma))
}

pub fn dual_hessian(p: &FractionalProgram, d: &DualPoint) -> Result<Matrix2<f64>, DualError> {
    evaluate(p, d).map(|e| e.hessian(p))
}

/// Eigenvalues of the dual Hessian, ascending.
pub fn hessian_eigenvalues(h: &Matrix2<f64>) -> (f64, f64) {
    sym2_eigenvalues(h[(0, 0)], h[(0, 1)], h[(1, 1)])
}

/// Total complementary function
/// `1/2 xᵀG_mu x - (f - sigma b)ᵀx - mu lambda varsigma - mu/2 varsigma² + sigma/mu`.
pub fn total_complementary(
    p: &FractionalProgram,
    x: &PrimalPoint,
    d: &DualPoint,
) -> Result<f64, DualError> {
    let x = x.as_vector();
    p.check_dim(x)?;
    let DualPoint {
        mu,
        varsigma,
        sigma,
    } = *d;
    let g = p.q() + p.btb() * (mu * varsigma) - p.h() * sigma;
    let c = p.f() - p.b() * sigma;
    Ok(0.5 * x.dot(&(&g * x))
        - c.dot(x)
        - mu * p.lambda() * varsigma
        - 0.5 * mu * varsigma * varsigma
        + sigma / mu)
}

/// Quadratic energy `U(xi) = 1/2 xi²` of the canonical measure.
pub fn quadratic_energy(xi: f64) -> f64 {
    0.5 * xi * xi
}

/// Legendre conjugate `U♯(varsigma) = 1/2 varsigma²` on `varsigma >= -lambda`.
pub fn legendre_conjugate(varsigma: f64) -> f64 {
    0.5 * varsigma * varsigma
}
