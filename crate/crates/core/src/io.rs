//! Instance and result files, the random instance generator and the
//! tabular sweep dumps.
//!
//! Files are JSON with sorted keys and every float written with 17
//! significant digits, so that parsing and re-serializing canonical text is
//! the identity.

use std::io;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::dual::{evaluate, DualPoint};
use crate::problem::{FractionalProgram, ProgramData, ValidationError};
use crate::solver::{solve_at, CertificateKind, DualStatus, MuSample, SolveResult, SolverOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error{}: {message}", field.as_ref().map(|f| format!(" in `{f}`")).unwrap_or_default())]
    Parse {
        field: Option<String>,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("cannot serialize non-finite value in `{0}`")]
    NonFinite(String),
    #[error("generator gave up after {0} attempts to draw b")]
    GeneratorExhausted(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IoError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        IoError::Parse {
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

/// On-disk form of an instance. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    #[serde(rename = "B")]
    pub b_op: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    pub b: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl InstanceFile {
    pub fn from_data(d: &ProgramData) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: d.q.nrows(),
            m: d.b_op.nrows(),
            q: row_major(&d.q),
            f: d.f.as_slice().to_vec(),
            b_op: row_major(&d.b_op),
            lambda: d.lambda,
            delta: d.delta,
            h: row_major(&d.h),
            b: d.b.as_slice().to_vec(),
        }
    }

    /// Checks declared dimensions against array lengths.
    pub fn to_data(&self) -> Result<ProgramData, IoError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(IoError::field(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        let (n, m) = (self.n, self.m);
        let expect = |field: &str, len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(IoError::field(
                    field,
                    format!("expected {want} entries, found {len}"),
                ))
            }
        };
        expect("Q", self.q.len(), n * n)?;
        expect("f", self.f.len(), n)?;
        expect("B", self.b_op.len(), m * n)?;
        expect("H", self.h.len(), n * n)?;
        expect("b", self.b.len(), n)?;
        Ok(ProgramData {
            q: DMatrix::from_row_slice(n, n, &self.q),
            f: DVector::from_column_slice(&self.f),
            b_op: DMatrix::from_row_slice(m, n, &self.b_op),
            lambda: self.lambda,
            h: DMatrix::from_row_slice(n, n, &self.h),
            b: DVector::from_column_slice(&self.b),
            delta: self.delta,
        })
    }
}

/// Pretty JSON whose floats always carry 17 significant digits.
struct CanonicalFormatter(PrettyFormatter<'static>);

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with sorted keys and fixed float format. Any `null` in the
/// output is reported as a non-finite number, so optional fields must be
/// skipped when absent.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    // Going through Value sorts object keys.
    let tree = serde_json::to_value(value).map_err(|e| IoError::Parse {
        field: None,
        message: e.to_string(),
    })?;
    if let Some(path) = first_null(&tree, String::new()) {
        return Err(IoError::NonFinite(path));
    }
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        CanonicalFormatter(PrettyFormatter::new()),
    );
    tree.serialize(&mut ser).map_err(|e| IoError::Parse {
        field: None,
        message: e.to_string(),
    })?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// serde_json turns NaN and infinities into `null`; report where.
fn first_null(v: &serde_json::Value, path: String) -> Option<String> {
    match v {
        serde_json::Value::Null => Some(path),
        serde_json::Value::Array(items) => items
            .iter()
            .enumerate()
            .find_map(|(i, it)| first_null(it, format!("{path}[{i}]"))),
        serde_json::Value::Object(map) => map.iter().find_map(|(k, it)| {
            let p = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            first_null(it, p)
        }),
        _ => None,
    }
}

pub fn serialize_instance(d: &ProgramData) -> Result<String, IoError> {
    to_canonical_json(&InstanceFile::from_data(d))
}

/// Parses instance text without validating the mathematics.
pub fn parse_instance_file(text: &str) -> Result<InstanceFile, IoError> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let field = [
            "Q",
            "B",
            "H",
            "f",
            "b",
            "lambda",
            "delta",
            "n",
            "m",
            "schema_version",
        ]
        .into_iter()
        .find(|k| msg.contains(&format!("`{k}`")))
        .map(str::to_string);
        IoError::Parse {
            field,
            message: msg,
        }
    })
}

/// Parses and validates an instance.
pub fn parse_instance(text: &str) -> Result<FractionalProgram, IoError> {
    let data = parse_instance_file(text)?.to_data()?;
    Ok(FractionalProgram::validate(data)?)
}

/// One entry of the `mu` profile in a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_value: Option<f64>,
    pub certificate_kind: CertificateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<DualStatus>,
}

impl From<&MuSample> for ProfileEntry {
    fn from(s: &MuSample) -> Self {
        Self {
            mu: s.mu,
            dual_value: s.dual_value().filter(|v| v.is_finite()),
            p0_value: s.p0.filter(|v| v.is_finite()),
            certificate_kind: s.kind(),
            status: s.solution.as_ref().map(|sol| sol.status),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_seconds: f64,
}

/// On-disk form of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u32,
    pub x_star: Vec<f64>,
    pub mu_star: f64,
    pub varsigma: f64,
    pub sigma: f64,
    /// `P0(x_star)`.
    pub p0_value: f64,
    /// `P_mu(x_star)` at `mu_star`.
    pub primal_value: f64,
    pub dual_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub certificate_kind: CertificateKind,
    pub status: DualStatus,
    pub grid_perfect_fraction: f64,
    pub mu_profile: Vec<ProfileEntry>,
    pub solver_options: SolverOptions,
    pub timings: Timings,
}

impl ResultFile {
    pub fn from_solve(r: &SolveResult, opts: &SolverOptions, solve_seconds: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            x_star: r.x_star.as_slice().to_vec(),
            mu_star: r.mu_star,
            varsigma: r.d_star.varsigma,
            sigma: r.d_star.sigma,
            p0_value: r.p0_value,
            primal_value: r.certificate.primal_value,
            dual_value: r.best_dual_value,
            gap: Some(r.certificate.gap).filter(|g| g.is_finite()),
            certificate_kind: r.certificate.kind,
            status: r.status,
            grid_perfect_fraction: r.grid_perfect_fraction,
            mu_profile: r.mu_profile.iter().map(ProfileEntry::from).collect(),
            solver_options: opts.clone(),
            timings: Timings { solve_seconds },
        }
    }

    pub fn to_text(&self) -> Result<String, IoError> {
        to_canonical_json(self)
    }
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Scale of the factor `A` in `H = -(c² AᵀA + I)`; larger values give a
    /// worse conditioned `H`.
    pub conditioning: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            n: 2,
            m: 2,
            seed: 0,
            conditioning: 1.0,
        }
    }
}

const GEN_MAX_TRIES: usize = 1000;
const GEN_MIN_H_MAX: f64 = 0.1;

/// Draws a random valid instance, deterministically from the seed.
pub fn generate(opts: &GenOptions) -> Result<ProgramData, IoError> {
    let GenOptions {
        n,
        m,
        seed,
        conditioning,
    } = *opts;
    if n == 0 {
        return Err(IoError::field("n", "generator needs n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform =
        |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0));
    let raw_q = uniform(n, n);
    let q = DMatrix::from_fn(n, n, |i, j| 0.5 * (raw_q[(i, j)] + raw_q[(j, i)]));
    let f = DVector::from_column_slice(uniform(n, 1).as_slice());
    let b_op = uniform(m, n);
    let a = uniform(n, n) * conditioning;
    let h = -(a.transpose() * &a + DMatrix::identity(n, n));

    let neg_h = -&h;
    let chol = neg_h
        .clone()
        .cholesky()
        .expect("-H = AᵀA + I is positive definite");
    let mut b = None;
    for _ in 0..GEN_MAX_TRIES {
        let cand = DVector::from_column_slice(uniform(n, 1).as_slice()) * 2.0;
        // h(H⁻¹b) = 1/2 bᵀ(-H)⁻¹b
        let h_max = 0.5 * cand.dot(&chol.solve(&cand));
        if h_max > GEN_MIN_H_MAX {
            b = Some((cand, h_max));
            break;
        }
    }
    let (b, h_max) = b.ok_or(IoError::GeneratorExhausted(GEN_MAX_TRIES))?;
    let lambda = rng.gen_range(0.0..=2.0);
    let rho = rng.gen_range(0.2..=0.9);
    Ok(ProgramData {
        q,
        f,
        b_op,
        lambda,
        h,
        b,
        delta: rho * h_max,
    })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV of `(mu, dual optimum, certificate kind)` on a uniform grid.
pub fn sweep_csv(p: &FractionalProgram, grid_points: usize, opts: &SolverOptions) -> String {
    use rayon::prelude::*;
    let grid = p.mu_interval().grid(grid_points);
    let samples: Vec<MuSample> = grid.par_iter().map(|&mu| solve_at(p, mu, opts)).collect();
    let mut out = String::from("mu,dual_value,p0_value,certificate_kind,status\n");
    for s in &samples {
        let dual = s.dual_value().map(fmt17).unwrap_or_default();
        let p0 = s.p0.map(fmt17).unwrap_or_default();
        let status = s
            .solution
            .as_ref()
            .map(|sol| format!("{:?}", sol.status))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{dual},{p0},{:?},{status}\n",
            fmt17(s.mu),
            s.kind()
        ));
    }
    out
}

/// Box of `(varsigma, sigma)` values sampled by [`landscape_csv`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeSpec {
    pub mu: f64,
    pub varsigma_steps: usize,
    pub sigma_steps: usize,
    /// Upper end of the `varsigma` axis; the lower end is `-lambda`.
    pub varsigma_max: f64,
    /// Upper end of the `sigma` axis; the lower end is `0`.
    pub sigma_max: f64,
}

impl LandscapeSpec {
    /// A box reaching twice as far as the dual maximizer at `mu`, or a unit
    /// box when the maximization fails.
    pub fn around_optimum(p: &FractionalProgram, mu: f64, steps: (usize, usize)) -> Self {
        let sol = crate::solver::maximize_dual(p, mu, &SolverOptions::default()).ok();
        let (v, s) = sol.map_or((1.0, 1.0), |s| (s.d_star.varsigma, s.d_star.sigma));
        let lambda = p.lambda();
        Self {
            mu,
            varsigma_steps: steps.0,
            sigma_steps: steps.1,
            varsigma_max: -lambda + 2.0 * (v + lambda).abs().max(1.0),
            sigma_max: 2.0 * s.abs().max(1.0),
        }
    }
}

fn axis(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

/// CSV of dual values on a `(varsigma, sigma)` grid at fixed `mu`; points
/// outside `S_mu⁺` are marked `nonPD`.
pub fn landscape_csv(p: &FractionalProgram, spec: &LandscapeSpec) -> String {
    let mut out = String::from("varsigma,sigma,dual_value\n");
    for &v in &axis(-p.lambda(), spec.varsigma_max, spec.varsigma_steps) {
        for &s in &axis(0.0, spec.sigma_max, spec.sigma_steps) {
            let cell = match evaluate(p, &DualPoint::new(spec.mu, v, s)) {
                Ok(e) => fmt17(e.value),
                Err(_) => "nonPD".to_string(),
            };
            out.push_str(&format!("{},{},{cell}\n", fmt17(v), fmt17(s)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::tests::instance_a_data;

    #[test]
    fn instance_a_round_trip() {
        let text = serialize_instance(&instance_a_data(0.5)).unwrap();
        let p = parse_instance(&text).unwrap();
        assert_eq!(p.mu0(), 1.0);
        assert_eq!(serialize_instance(p.data()).unwrap(), text);
        assert!(
            text.contains("\"Q\": [\n    2.0000000000000000e0\n  ]"),
            "{text}"
        );
    }

    #[test]
    fn keys_are_sorted() {
        let text = serialize_instance(&instance_a_data(0.5)).unwrap();
        let keys: Vec<&str> = text
            .lines()
            .filter_map(|l| l.trim_start().strip_prefix('"'))
            .filter_map(|l| l.split('"').next())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn wrong_q_length_names_q() {
        let mut file = InstanceFile::from_data(&instance_a_data(0.5));
        file.q.push(1.0);
        let text = to_canonical_json(&file).unwrap();
        match parse_instance(&text) {
            Err(IoError::Parse { field: Some(f), .. }) => assert_eq!(f, "Q"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_delta_is_validation_error() {
        let text = serialize_instance(&instance_a_data(0.0)).unwrap();
        assert!(matches!(
            parse_instance(&text),
            Err(IoError::Validation(ValidationError::DeltaOutOfRange { .. }))
        ));
    }

    #[test]
    fn malformed_text() {
        assert!(matches!(
            parse_instance("{ not json"),
            Err(IoError::Parse { .. })
        ));
        assert!(matches!(parse_instance("{}"), Err(IoError::Parse { .. })));
        let text = serialize_instance(&instance_a_data(0.5))
            .unwrap()
            .replace("\"Q\"", "\"Z\"");
        assert!(matches!(parse_instance(&text), Err(IoError::Parse { .. })));
    }

    #[test]
    fn non_finite_values_are_refused() {
        let mut d = instance_a_data(0.5);
        d.lambda = f64::NAN;
        assert!(matches!(serialize_instance(&d), Err(IoError::NonFinite(f)) if f == "lambda"));
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let opts = GenOptions {
            n: 2,
            m: 2,
            seed: 42,
            conditioning: 1.0,
        };
        let a = generate(&opts).unwrap();
        let b = generate(&opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serialize_instance(&a).unwrap(),
            serialize_instance(&b).unwrap()
        );
        FractionalProgram::validate(a).unwrap();
    }

    #[test]
    fn generator_without_quartic_rows() {
        let d = generate(&GenOptions {
            n: 1,
            m: 0,
            seed: 3,
            conditioning: 1.0,
        })
        .unwrap();
        let p = FractionalProgram::validate(d).unwrap();
        assert_eq!(p.rows(), 0);
        let x = crate::problem::PrimalPoint::from_slice(&[0.37]);
        let g = p.components(&x).unwrap().g;
        assert_eq!(g, 0.5 * p.lambda() * p.lambda());
    }

    #[test]
    fn landscape_marks_non_pd() {
        let mut d = instance_a_data(0.5);
        d.q[(0, 0)] = -2.0;
        let p = FractionalProgram::validate(d).unwrap();
        let spec = LandscapeSpec {
            mu: 1.0,
            varsigma_steps: 3,
            sigma_steps: 3,
            varsigma_max: 1.0,
            sigma_max: 2.0,
        };
        let csv = landscape_csv(&p, &spec);
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.contains("nonPD"));
    }
}
