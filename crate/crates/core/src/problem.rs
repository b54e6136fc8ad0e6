//! Problem instances: data, validation and primal evaluation.
//!
//! An instance minimizes
//!
//! ```text
//! P0(x) = f(x) + g(x) / h(x)    subject to  h(x) >= delta
//! f(x)  = 1/2 xᵀQx - fᵀx
//! g(x)  = 1/2 (1/2 |Bx|² - lambda)²
//! h(x)  = 1/2 xᵀHx - bᵀx          (H negative definite)
//! ```
//!
//! The ratio is handled through the parameterized family
//! `P_mu(x) = f(x) + mu g(x)` over `X_mu = { h(x) >= 1/mu }` for
//! `mu in [mu0, 1/delta]`, where `1/mu0 = h(H⁻¹b)` is the largest value `h`
//! attains.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{is_symmetric, PivotedCholesky};

/// Relative slack used by all feasibility comparisons against a level `t`:
/// `1e-9 · (1 + |t|)`.
pub fn feasibility_slack(level: f64) -> f64 {
    1e-9 * (1.0 + level.abs())
}

const MU_RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("shape mismatch in `{field}`: expected {expected}, found {found}")]
    ShapeMismatch {
        field: &'static str,
        expected: String,
        found: String,
    },
    #[error("non-finite entry in `{field}`")]
    NonFinite { field: &'static str },
    #[error("matrix `{matrix}` is not symmetric")]
    NotSymmetric { matrix: &'static str },
    #[error("H is not negative definite (smallest pivot of -H is {min_pivot:e})")]
    HNotNegativeDefinite { min_pivot: f64 },
    #[error("h(H^-1 b) = {value:e} must be positive")]
    Mu0NotPositive { value: f64 },
    #[error("delta = {delta:e} must lie in (0, {h_max:e}]")]
    DeltaOutOfRange { delta: f64, h_max: f64 },
    #[error("lambda = {lambda:e} must be nonnegative")]
    NegativeLambda { lambda: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("point has dimension {found}, program has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point is infeasible: h(x) = {h:e} < delta = {delta:e}")]
    Infeasible { h: f64, delta: f64 },
    #[error("mu = {mu:e} outside [{lo:e}, {hi:e}]")]
    MuOutOfRange { mu: f64, lo: f64, hi: f64 },
}

/// Unvalidated instance data as it comes from a file or generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramData {
    pub q: DMatrix<f64>,
    pub f: DVector<f64>,
    /// `m × n` operator inside the quartic term.
    pub b_op: DMatrix<f64>,
    pub lambda: f64,
    pub h: DMatrix<f64>,
    pub b: DVector<f64>,
    pub delta: f64,
}

/// Decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint(pub DVector<f64>);

impl PrimalPoint {
    pub fn new(x: DVector<f64>) -> Self {
        Self(x)
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self(DVector::from_column_slice(x))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

impl From<DVector<f64>> for PrimalPoint {
    fn from(x: DVector<f64>) -> Self {
        Self(x)
    }
}

/// The admissible parameter range `[mu0, 1/delta]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuInterval {
    pub mu0: f64,
    pub mu_max: f64,
}

impl MuInterval {
    pub fn width(&self) -> f64 {
        self.mu_max - self.mu0
    }

    /// True when the range collapses to `{mu0}`, i.e. `delta = 1/mu0`.
    pub fn is_degenerate(&self) -> bool {
        self.width() <= MU_RANGE_SLACK * self.mu0
    }

    pub fn contains(&self, mu: f64) -> bool {
        mu.is_finite()
            && mu >= self.mu0 * (1.0 - MU_RANGE_SLACK)
            && mu <= self.mu_max * (1.0 + MU_RANGE_SLACK)
    }

    pub fn clamp(&self, mu: f64) -> f64 {
        mu.clamp(self.mu0, self.mu_max)
    }

    /// `points` uniformly spaced values including both endpoints.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![self.mu0],
            _ if self.is_degenerate() => vec![self.mu0],
            _ => {
                let step = self.width() / (points - 1) as f64;
                (0..points)
                    .map(|i| {
                        if i + 1 == points {
                            self.mu_max
                        } else {
                            self.mu0 + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Values of the three building blocks at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

/// A validated, immutable instance.
#[derive(Debug, Clone)]
pub struct FractionalProgram {
    data: ProgramData,
    btb: DMatrix<f64>,
    center: DVector<f64>,
    h_max: f64,
    interval: MuInterval,
}

impl FractionalProgram {
    /// Checks shapes, symmetry, definiteness and the standing assumptions,
    /// and precomputes `H⁻¹b` and `mu0`.
    pub fn validate(data: ProgramData) -> Result<Self, ValidationError> {
        let n = data.q.nrows();
        check_shape("Q", (n, n), data.q.shape())?;
        check_shape("f", (n, 1), data.f.shape())?;
        check_shape("B", (data.b_op.nrows(), n), data.b_op.shape())?;
        check_shape("H", (n, n), data.h.shape())?;
        check_shape("b", (n, 1), data.b.shape())?;
        if n == 0 {
            return Err(ValidationError::ShapeMismatch {
                field: "n",
                expected: "n >= 1".into(),
                found: "0".into(),
            });
        }

        check_finite("Q", data.q.iter())?;
        check_finite("f", data.f.iter())?;
        check_finite("B", data.b_op.iter())?;
        check_finite("H", data.h.iter())?;
        check_finite("b", data.b.iter())?;
        check_finite("lambda", std::iter::once(&data.lambda))?;
        check_finite("delta", std::iter::once(&data.delta))?;

        if !is_symmetric(&data.q) {
            return Err(ValidationError::NotSymmetric { matrix: "Q" });
        }
        if !is_symmetric(&data.h) {
            return Err(ValidationError::NotSymmetric { matrix: "H" });
        }
        if data.lambda < 0.0 {
            return Err(ValidationError::NegativeLambda {
                lambda: data.lambda,
            });
        }

        let neg_h = -&data.h;
        let chol = PivotedCholesky::new(&neg_h);
        // H c = b  <=>  (-H) c = -b
        let rhs = -&data.b;
        let mut center = chol
            .solve(&rhs)
            .ok_or(ValidationError::HNotNegativeDefinite {
                min_pivot: chol.min_pivot,
            })?;
        // One step of iterative refinement.
        if let Some(dc) = chol.solve(&(&rhs - &neg_h * &center)) {
            center += dc;
        }

        let h_max = 0.5 * center.dot(&(&data.h * &center)) - data.b.dot(&center);
        if h_max.is_nan() || h_max <= 0.0 {
            return Err(ValidationError::Mu0NotPositive { value: h_max });
        }
        // A delta a few ulps above h_max is the degenerate case written
        // through a round trip, not an error.
        if data.delta.is_nan() || data.delta <= 0.0 || data.delta > h_max * (1.0 + MU_RANGE_SLACK) {
            return Err(ValidationError::DeltaOutOfRange {
                delta: data.delta,
                h_max,
            });
        }

        let mu0 = 1.0 / h_max;
        let interval = MuInterval {
            mu0,
            mu_max: (1.0 / data.delta).max(mu0),
        };
        let btb = data.b_op.transpose() * &data.b_op;
        Ok(Self {
            data,
            btb,
            center,
            h_max,
            interval,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.q.nrows()
    }

    pub fn rows(&self) -> usize {
        self.data.b_op.nrows()
    }

    pub fn data(&self) -> &ProgramData {
        &self.data
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.data.q
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.data.f
    }

    pub fn b_op(&self) -> &DMatrix<f64> {
        &self.data.b_op
    }

    /// `BᵀB`, precomputed.
    pub fn btb(&self) -> &DMatrix<f64> {
        &self.btb
    }

    pub fn lambda(&self) -> f64 {
        self.data.lambda
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.data.h
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.data.b
    }

    pub fn delta(&self) -> f64 {
        self.data.delta
    }

    /// `H⁻¹b`, the unique maximizer of `h`.
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// `h(H⁻¹b) = 1/mu0`.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn mu0(&self) -> f64 {
        self.interval.mu0
    }

    pub fn mu_interval(&self) -> MuInterval {
        self.interval
    }

    pub fn check_dim(&self, x: &DVector<f64>) -> Result<(), ProblemError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            })
        }
    }

    pub fn check_mu(&self, mu: f64) -> Result<(), ProblemError> {
        if self.interval.contains(mu) {
            Ok(())
        } else {
            Err(ProblemError::MuOutOfRange {
                mu,
                lo: self.interval.mu0,
                hi: self.interval.mu_max,
            })
        }
    }

    /// `1/2 |Bx|² - lambda`.
    pub fn canonical_measure(&self, x: &DVector<f64>) -> f64 {
        let bx = &self.data.b_op * x;
        0.5 * bx.norm_squared() - self.data.lambda
    }

    pub(crate) fn f_unchecked(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.data.q * x)) - self.data.f.dot(x)
    }

    pub(crate) fn g_unchecked(&self, x: &DVector<f64>) -> f64 {
        let xi = self.canonical_measure(x);
        0.5 * xi * xi
    }

    pub(crate) fn h_unchecked(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.data.h * x)) - self.data.b.dot(x)
    }

    pub fn components(&self, x: &PrimalPoint) -> Result<Components, ProblemError> {
        let x = x.as_vector();
        self.check_dim(x)?;
        Ok(Components {
            f: self.f_unchecked(x),
            g: self.g_unchecked(x),
            h: self.h_unchecked(x),
        })
    }

    pub fn h_value(&self, x: &PrimalPoint) -> Result<f64, ProblemError> {
        self.check_dim(x.as_vector())?;
        Ok(self.h_unchecked(x.as_vector()))
    }

    /// `h(x) >= delta`, up to [`feasibility_slack`].
    pub fn is_feasible(&self, x: &PrimalPoint) -> Result<bool, ProblemError> {
        let h = self.h_value(x)?;
        Ok(h >= self.data.delta - feasibility_slack(self.data.delta))
    }

    /// `h(x) >= 1/mu`, up to [`feasibility_slack`].
    pub fn is_feasible_mu(&self, mu: f64, x: &PrimalPoint) -> Result<bool, ProblemError> {
        self.check_mu(mu)?;
        let level = 1.0 / mu;
        Ok(self.h_value(x)? >= level - feasibility_slack(level))
    }

    /// Moves `x` along the ray from the center until `h(x) >= level`; points
    /// already inside are returned unchanged.
    pub fn retract(&self, x: &PrimalPoint, level: f64) -> Result<PrimalPoint, ProblemError> {
        let h = self.h_value(x)?;
        if h >= level {
            return Ok(x.clone());
        }
        if level > self.h_max {
            return Err(ProblemError::Infeasible {
                h: self.h_max,
                delta: level,
            });
        }
        // h(c + t d) = h_max - t² (h_max - h(c + d))
        let t = ((self.h_max - level) / (self.h_max - h)).sqrt();
        Ok(PrimalPoint::new(
            &self.center + (x.as_vector() - &self.center) * t,
        ))
    }

    /// The original objective `f + g/h`; rejects points outside the
    /// feasible set.
    pub fn eval_p0(&self, x: &PrimalPoint) -> Result<f64, ProblemError> {
        let c = self.components(x)?;
        if c.h < self.data.delta - feasibility_slack(self.data.delta) {
            return Err(ProblemError::Infeasible {
                h: c.h,
                delta: self.data.delta,
            });
        }
        Ok(c.f + c.g / c.h)
    }

    /// `f + mu g`; feasibility is not checked.
    pub fn eval_p_mu(&self, mu: f64, x: &PrimalPoint) -> Result<f64, ProblemError> {
        self.check_mu(mu)?;
        let c = self.components(x)?;
        Ok(c.f + mu * c.g)
    }
}

fn check_shape(
    field: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<(), ValidationError> {
    if expected == found {
        Ok(())
    } else {
        Err(ValidationError::ShapeMismatch {
            field,
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        })
    }
}

fn check_finite<'a>(
    field: &'static str,
    mut values: impl Iterator<Item = &'a f64>,
) -> Result<(), ValidationError> {
    if values.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ValidationError::NonFinite { field })
    }
}
