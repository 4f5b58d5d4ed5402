//! JSON problem, state, channel and result files.
//!
//! Matrices are written as separate real and imaginary row-major arrays.
//! Doubles are printed as the shortest decimal that parses back to the same
//! bits; non-finite scalars use the string tokens `"inf"`, `"-inf"` and
//! `"nan"`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::CertificateReport;
use crate::dual::{GibbsSolution, PathStep, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DensityMatrix, HermitianOperator, MAX_ENTRY};
use crate::moments::{ConstraintSet, FeasibilityVerdict, MomentVector, Witness};

pub const SCHEMA_VERSION: &str = "1";
/// Hermiticity tolerance for matrices read from files.
pub const FILE_HERMITIAN_TOL: f64 = 1e-8;
/// Admissible trace error of a state read from a file before renormalization.
pub const FILE_TRACE_TOL: f64 = 1e-8;
pub const MAX_DIM: usize = 512;

/// Serde adapters writing non-finite doubles as string tokens.
pub mod token {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_str("nan")
        } else if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }

    struct TokenVisitor;

    impl Visitor<'_> for TokenVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(TokenVisitor)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrap(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            x.map(Wrap).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// A complex matrix as row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixData {
    pub re: Vec<Vec<f64>>,
    /// All zeros when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: Some(rows(|z| z.im)),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let nrows = self.re.len();
        let ncols = self.re.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(Error::InvalidInput("matrix must be nonempty".into()));
        }
        if nrows > MAX_DIM || ncols > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "matrix shape {nrows}x{ncols} exceeds the limit {MAX_DIM}"
            )));
        }
        let check = |part: &[Vec<f64>], name: &str| -> Result<()> {
            if part.len() != nrows || part.iter().any(|r| r.len() != ncols) {
                return Err(Error::InvalidInput(format!(
                    "{name} part is not a {nrows}x{ncols} array"
                )));
            }
            if part.iter().flatten().any(|v| !v.is_finite() || v.abs() > MAX_ENTRY) {
                return Err(Error::NonFinite);
            }
            Ok(())
        };
        check(&self.re, "real")?;
        if let Some(im) = &self.im {
            check(im, "imaginary")?;
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |p| p[i][j]);
            Complex64::new(self.re[i][j], im)
        }))
    }

    fn to_square(&self, dim: usize) -> Result<CMatrix> {
        let m = self.to_matrix()?;
        if m.shape() != (dim, dim) {
            return Err(Error::InvalidInput(format!(
                "expected a {dim}x{dim} matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableData {
    pub name: String,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl ObservableData {
    fn matrix(&self) -> MatrixData {
        MatrixData {
            re: self.re.clone(),
            im: self.im.clone(),
        }
    }
}

/// Solver overrides; anything absent keeps its default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_norm_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feas_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feas_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_anchor: Option<Vec<f64>>,
}

impl ProblemOptions {
    pub fn apply(&self, opts: &mut SolverOptions) {
        if let Some(v) = self.grad_tol {
            opts.grad_tol = v;
        }
        if let Some(v) = self.max_newton_iters {
            opts.max_newton_iters = v;
        }
        if let Some(v) = self.lambda_norm_cap {
            opts.lambda_norm_cap = v;
        }
        if let Some(v) = self.path_steps {
            opts.path_steps = v;
        }
        if let Some(v) = self.path_tol {
            opts.path_tol = v;
        }
        if let Some(v) = self.feas_tol {
            opts.feasibility.feas_tol = v;
        }
        if let Some(v) = self.feas_max_iter {
            opts.feasibility.max_iter = v;
        }
        if let Some(v) = self.witness_tol {
            opts.feasibility.witness_tol = v;
        }
        if let Some(v) = &self.interior_anchor {
            opts.interior_anchor = Some(MomentVector::new(v.clone()));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    pub observables: Vec<ObservableData>,
    pub target_moments: Vec<f64>,
    #[serde(default)]
    pub options: ProblemOptions,
}

/// A validated problem ready for the solver.
#[derive(Debug, Clone)]
pub struct Problem {
    pub constraints: ConstraintSet,
    pub target: MomentVector,
    pub options: SolverOptions,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<Problem> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..={MAX_DIM}, got {}",
                self.dim
            )));
        }
        if self.observables.is_empty() {
            return Err(Error::InvalidInput("at least one observable is required".into()));
        }
        if self.target_moments.len() != self.observables.len() {
            return Err(Error::InvalidInput(format!(
                "{} target moments for {} observables",
                self.target_moments.len(),
                self.observables.len()
            )));
        }
        if self.target_moments.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut ops = Vec::with_capacity(self.observables.len());
        let mut names = Vec::with_capacity(self.observables.len());
        for obs in &self.observables {
            let m = obs.matrix().to_square(self.dim)?;
            let op = HermitianOperator::with_tolerance(m, FILE_HERMITIAN_TOL).map_err(|e| {
                Error::InvalidInput(format!("observable {:?}: {e}", obs.name))
            })?;
            ops.push(op);
            names.push(obs.name.clone());
        }
        let mut options = SolverOptions::default();
        self.options.apply(&mut options);
        options.validate()?;
        let constraints = ConstraintSet::with_names(ops, names)?;
        if let Some(anchor) = &options.interior_anchor {
            if anchor.len() != constraints.len() || anchor.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("interior anchor has the wrong shape".into()));
            }
        }
        Ok(Problem {
            constraints,
            target: MomentVector::new(self.target_moments.clone()),
            options,
        })
    }

    pub fn from_constraints(constraints: &ConstraintSet, target: &MomentVector) -> Self {
        Self {
            dim: constraints.dim(),
            observables: constraints
                .observables()
                .iter()
                .zip(constraints.names())
                .map(|(x, name)| {
                    let MatrixData { re, im } = MatrixData::from_matrix(x.matrix());
                    ObservableData {
                        name: name.clone(),
                        re,
                        im,
                    }
                })
                .collect(),
            target_moments: target.values().to_vec(),
            options: ProblemOptions::default(),
        }
    }
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    ProblemFile::parse(text)?.validate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let MatrixData { re, im } = MatrixData::from_matrix(rho.matrix());
        Self {
            dim: rho.dim(),
            re,
            im,
        }
    }

    /// Checks hermiticity and trace at file tolerances, then renormalizes.
    pub fn to_state(&self) -> Result<DensityMatrix> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..={MAX_DIM}, got {}",
                self.dim
            )));
        }
        let data = MatrixData {
            re: self.re.clone(),
            im: self.im.clone(),
        };
        let m = data.to_square(self.dim)?;
        let op = HermitianOperator::with_tolerance(m, FILE_HERMITIAN_TOL)?;
        let trace = op.trace();
        if !((trace - 1.0).abs() <= FILE_TRACE_TOL) {
            return Err(Error::InvalidTrace(trace));
        }
        DensityMatrix::from_positive(op.matrix().clone())
    }
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    serde_json::from_str::<StateFile>(text)?.to_state()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub kraus: Vec<MatrixData>,
}

impl ChannelFile {
    pub fn from_channel(channel: &crate::channels::KrausChannel) -> Self {
        Self {
            kraus: channel.kraus_ops().iter().map(MatrixData::from_matrix).collect(),
        }
    }

    pub fn to_channel(&self) -> Result<crate::channels::KrausChannel> {
        if self.kraus.len() > MAX_DIM * MAX_DIM {
            return Err(Error::InvalidInput("too many Kraus operators".into()));
        }
        let ops = self
            .kraus
            .iter()
            .map(MatrixData::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        crate::channels::KrausChannel::new(ops)
    }
}

pub fn parse_channel(text: &str) -> Result<crate::channels::KrausChannel> {
    serde_json::from_str::<ChannelFile>(text)?.to_channel()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilitySection {
    pub status: String,
    pub margin: f64,
    pub direction: Vec<f64>,
    /// Separating direction when infeasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_direction: Option<Vec<f64>>,
    /// State reproducing the moments when feasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_state: Option<MatrixData>,
    pub linearly_dependent: bool,
    pub iterations: usize,
}

impl From<&FeasibilityVerdict> for FeasibilitySection {
    fn from(v: &FeasibilityVerdict) -> Self {
        let (witness_direction, witness_state) = match &v.witness {
            Witness::Direction(d) => (Some(d.clone()), None),
            Witness::State(s) => (None, Some(MatrixData::from_matrix(s.matrix()))),
        };
        Self {
            status: v.status.as_str().into(),
            margin: v.margin,
            direction: v.direction.clone(),
            witness_direction,
            witness_state,
            linearly_dependent: v.linearly_dependent,
            iterations: v.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathStepData {
    pub epsilon: f64,
    pub moments: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_distance: Option<f64>,
    pub entropy: f64,
}

impl From<&PathStep> for PathStepData {
    fn from(s: &PathStep) -> Self {
        Self {
            epsilon: s.epsilon,
            moments: s.moments.values().to_vec(),
            lambda: s.lambda.clone(),
            lambda_norm: s.lambda_norm,
            step_distance: s.step_distance,
            entropy: s.entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSection {
    pub classification: String,
    pub lambda: Vec<f64>,
    pub sigma: MatrixData,
    pub log_partition: f64,
    pub entropy: f64,
    pub target_moments: Vec<f64>,
    pub achieved_moments: Vec<f64>,
    pub moment_residual: f64,
    pub iterations: usize,
    pub lambda_diverging: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path_trace: Vec<PathStepData>,
}

impl From<&GibbsSolution> for SolutionSection {
    fn from(s: &GibbsSolution) -> Self {
        Self {
            classification: s.classification.as_str().into(),
            lambda: s.lambda.clone(),
            sigma: MatrixData::from_matrix(s.sigma.matrix()),
            log_partition: s.log_partition,
            entropy: s.entropy,
            target_moments: s.target.values().to_vec(),
            achieved_moments: s.achieved_moments.values().to_vec(),
            moment_residual: s.moment_residual,
            iterations: s.iterations,
            lambda_diverging: s.lambda_diverging,
            path_trace: s.path_trace.iter().map(PathStepData::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    #[serde(with = "token")]
    pub relative_entropy: f64,
    #[serde(with = "token")]
    pub entropy_gap: f64,
    pub moment_mismatch: Vec<f64>,
    #[serde(with = "token::option", default, skip_serializing_if = "Option::is_none")]
    pub identity_residual: Option<f64>,
    #[serde(with = "token::option", default, skip_serializing_if = "Option::is_none")]
    pub pinsker_exact_bound: Option<f64>,
    #[serde(with = "token::option", default, skip_serializing_if = "Option::is_none")]
    pub pinsker_mixed_bound: Option<f64>,
    #[serde(with = "token")]
    pub trace_distance: f64,
    #[serde(with = "token")]
    pub entropy_difference: f64,
    #[serde(with = "token")]
    pub fannes_bound: f64,
    #[serde(with = "token::option", default, skip_serializing_if = "Option::is_none")]
    pub observable_rate_bound: Option<f64>,
    pub interior: bool,
    pub violations: Vec<String>,
}

impl From<&CertificateReport> for CertificateSection {
    fn from(r: &CertificateReport) -> Self {
        Self {
            relative_entropy: r.relative_entropy,
            entropy_gap: r.entropy_gap,
            moment_mismatch: r.moment_mismatch.clone(),
            identity_residual: r.identity_residual,
            pinsker_exact_bound: r.pinsker_exact_bound,
            pinsker_mixed_bound: r.pinsker_mixed_bound,
            trace_distance: r.trace_distance,
            entropy_difference: r.entropy_difference,
            fannes_bound: r.fannes_bound,
            observable_rate_bound: r.observable_rate_bound,
            interior: r.interior,
            violations: r.violations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelCheckSection {
    /// `"file"` for a supplied channel, `"random"` for Stinespring draws.
    pub source: String,
    pub trials: usize,
    pub seed: u64,
    pub contraction_violations: usize,
    pub adjoint_violations: usize,
    pub duality_violations: usize,
    /// Largest `lhs − rhs` seen in either norm check.
    pub worst_slack: f64,
    pub max_duality_error: f64,
    /// Transfer checks along a mix-to-sigma sequence of the problem.
    pub sequence_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub kind: String,
    pub length: usize,
    pub noise_scale: f64,
    pub seed: u64,
    #[serde(with = "token::option", default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(with = "token")]
    pub final_trace_distance: f64,
    pub domination_violations: Vec<usize>,
    pub equivalence_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub schema_version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_check: Option<ChannelCheckSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
}

impl ResultFile {
    pub fn new(command: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            feasibility: None,
            solution: None,
            certificate: None,
            channel_check: None,
            convergence: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const QUBIT_Z: &str = r#"{
        "dim": 2,
        "observables": [{"name": "Z", "re": [[1, 0], [0, -1]]}],
        "target_moments": [0.5]
    }"#;

    #[test]
    fn parses_minimal_problem() {
        let p = parse_problem(QUBIT_Z).unwrap();
        assert_eq!(p.constraints.len(), 1);
        assert_eq!(p.constraints.names(), ["Z"]);
        assert_eq!(p.target.values(), [0.5]);
        assert_eq!(p.options, SolverOptions::default());
    }

    #[test]
    fn options_override_defaults() {
        let text = r#"{"dim": 2, "observables": [{"name": "Z", "re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]}],
            "target_moments": [0.5], "options": {"grad_tol": 1e-11, "path_steps": 12, "feas_max_iter": 100}}"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(p.options.grad_tol, 1e-11);
        assert_eq!(p.options.path_steps, 12);
        assert_eq!(p.options.feasibility.max_iter, 100);
    }

    #[test]
    fn rejects_bad_problems() {
        let cases = [
            // not Hermitian
            r#"{"dim": 2, "observables": [{"name": "A", "re": [[0, 1], [0, 0]]}], "target_moments": [0]}"#,
            // shape
            r#"{"dim": 2, "observables": [{"name": "A", "re": [[1, 0, 0], [0, 1, 0]]}], "target_moments": [0]}"#,
            r#"{"dim": 3, "observables": [{"name": "A", "re": [[1, 0], [0, 1]]}], "target_moments": [0]}"#,
            // moment count
            r#"{"dim": 2, "observables": [{"name": "Z", "re": [[1, 0], [0, -1]]}], "target_moments": [0, 1]}"#,
            // unknown field
            r#"{"dim": 2, "observables": [{"name": "Z", "re": [[1, 0], [0, -1]]}], "target_moments": [0], "extra": 1}"#,
            r#"{"dim": 2, "observables": [{"name": "Z", "re": [[1, 0], [0, -1]], "scale": 2}], "target_moments": [0]}"#,
            // empty
            r#"{"dim": 2, "observables": [], "target_moments": []}"#,
            r#"{"dim": 0, "observables": [{"name": "Z", "re": [[1]]}], "target_moments": [0]}"#,
            // imaginary part breaks hermiticity
            r#"{"dim": 2, "observables": [{"name": "A", "re": [[0, 0], [0, 0]], "im": [[0, 1], [1, 0]]}], "target_moments": [0]}"#,
            r#"{"dim": 2, "observables": [{"name": "Z", "re": [[1e200, 0], [0, -1]]}], "target_moments": [0]}"#,
            r#"{"dim": 2, "observables": [{"name": "Z", "re": [[1, 0], [0, -1]]}], "target_moments": [0], "options": {"grad_tol": -1}}"#,
            "not json",
        ];
        for text in cases {
            assert!(parse_problem(text).is_err(), "{text}");
        }
        // within the file tolerance
        let ok = r#"{"dim": 2, "observables": [{"name": "A", "re": [[0, 1], [1.000000001, 0]]}], "target_moments": [0]}"#;
        assert!(parse_problem(ok).is_ok());
    }

    #[test]
    fn state_and_channel_files_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let rho = random::state(3, &mut rng);
        let text = serde_json::to_string(&StateFile::from_state(&rho)).unwrap();
        let back = parse_state(&text).unwrap();
        assert!((back.matrix() - rho.matrix()).norm() < 1e-15);
        assert!(parse_state(r#"{"dim": 2, "re": [[0.6, 0], [0, 0.6]]}"#).is_err());
        assert!(parse_state(r#"{"dim": 2, "re": [[1.5, 0], [0, -0.5]]}"#).is_err());

        let ch = crate::channels::random_channel(2, 3, 2, 4).unwrap();
        let text = serde_json::to_string(&ChannelFile::from_channel(&ch)).unwrap();
        let back = parse_channel(&text).unwrap();
        assert_eq!(back.kraus_ops(), ch.kraus_ops());
        assert!(parse_channel(r#"{"kraus": [{"re": [[1, 0], [0, 1.01]]}]}"#).is_err());
        assert!(parse_channel(r#"{"kraus": []}"#).is_err());
    }

    #[test]
    fn infinity_uses_tokens() {
        let report = CertificateSection {
            relative_entropy: f64::INFINITY,
            entropy_gap: -0.0,
            moment_mismatch: vec![1e-300, -2.5],
            identity_residual: None,
            pinsker_exact_bound: Some(f64::INFINITY),
            pinsker_mixed_bound: None,
            trace_distance: 0.1 + 0.2,
            entropy_difference: 0.0,
            fannes_bound: 5e-324,
            observable_rate_bound: None,
            interior: false,
            violations: vec![],
        };
        let mut rf = ResultFile::new("certify");
        rf.certificate = Some(report);
        let text = rf.to_json().unwrap();
        assert!(text.contains(r#""relative_entropy": "inf""#));
        let back = ResultFile::parse(&text).unwrap();
        let c = back.certificate.as_ref().unwrap();
        assert_eq!(c.relative_entropy, f64::INFINITY);
        assert_eq!(c.entropy_gap.to_bits(), (-0.0f64).to_bits());
        assert_eq!(c.trace_distance.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(c.fannes_bound.to_bits(), 5e-324f64.to_bits());
        assert_eq!(back.to_json().unwrap(), text);
        assert!(ResultFile::parse(r#"{"schema_version": "1", "command": "x", "bogus": 1}"#).is_err());
    }
}
