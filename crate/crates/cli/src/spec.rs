//! Run-spec loading, validation, and conversion into library types.
//!
//! A run-spec is a single JSON object.  Two fields form the envelope:
//! `schema` (optional, must be `1` when present) and `command` (required,
//! must match the command-line command).  Everything else is the
//! command-specific payload, deserialized strictly — unknown fields are
//! rejected so a typo cannot silently fall back to a default.
//!
//! Exact quantities (rational coefficients, evaluation points, weight
//! parameters) travel as strings in the `p/q` form accepted by the library
//! parser; floats are reserved for regions, thresholds, and tolerances.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use curvlab::integrate::{EstimateOpts, Method, Region};
use curvlab::poly::{parse_rat, MultiPoly, Rat};
use curvlab::weights::{ConeMap, PhaseSystem, WeightFunctional};

/// Seed used when neither the spec nor the command line provides one; equal
/// to the library default so plain library runs and CLI runs agree.
pub const DEFAULT_SEED: u64 = curvlab::integrate::DEFAULT_SEED;

/// Everything that can go wrong between the command line and a finished
/// report, tagged with the process exit code it maps to.
#[derive(Debug)]
pub enum Fail {
    /// Library error; keeps its input/hypothesis distinction.
    Core(curvlab::Error),
    /// Malformed run-spec or command-line usage.
    Spec(String),
    /// Filesystem trouble reading the spec or writing artifacts.
    Io(std::io::Error),
}

impl Fail {
    pub fn exit_code(&self) -> u8 {
        match self {
            Fail::Core(curvlab::Error::Hypothesis(_)) => 3,
            Fail::Core(_) | Fail::Spec(_) | Fail::Io(_) => 2,
        }
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fail::Core(e) => write!(f, "{e}"),
            Fail::Spec(msg) => write!(f, "run-spec: {msg}"),
            Fail::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl From<curvlab::Error> for Fail {
    fn from(e: curvlab::Error) -> Self {
        Fail::Core(e)
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Io(e)
    }
}

pub type CliResult<T> = Result<T, Fail>;

/// Reads and parses the spec file into a JSON value.
pub fn load(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Fail::Spec(format!("{} is not valid JSON: {e}", path.display())))
}

/// Checks the envelope: object shape, schema version, command agreement.
pub fn validate_envelope(value: &Value, expected_command: &str) -> CliResult<()> {
    let obj = value
        .as_object()
        .ok_or_else(|| Fail::Spec("a run-spec must be a JSON object".into()))?;
    if let Some(schema) = obj.get("schema") {
        if schema.as_u64() != Some(1) {
            return Err(Fail::Spec(format!(
                "unsupported schema version {schema}; this build reads schema 1"
            )));
        }
    }
    match obj.get("command").and_then(Value::as_str) {
        None => Err(Fail::Spec("missing required string field `command`".into())),
        Some(cmd) if cmd != expected_command => Err(Fail::Spec(format!(
            "spec is for command {cmd:?} but {expected_command:?} was requested"
        ))),
        Some(_) => Ok(()),
    }
}

/// The spec-level seed, read before typed parsing so the command line can
/// override it uniformly.
pub fn spec_seed(value: &Value) -> Option<u64> {
    value.get("seed").and_then(Value::as_u64)
}

/// Strict deserialization of the payload, with the envelope fields removed.
pub fn payload<T: DeserializeOwned>(value: &Value) -> CliResult<T> {
    let mut own = value.clone();
    let obj = own
        .as_object_mut()
        .ok_or_else(|| Fail::Spec("a run-spec must be a JSON object".into()))?;
    obj.remove("schema");
    obj.remove("command");
    obj.remove("seed");
    serde_json::from_value(own).map_err(|e| Fail::Spec(e.to_string()))
}

// ---------------------------------------------------------------------------
// Shared payload pieces
// ---------------------------------------------------------------------------

/// A phase system: block dimensions, defining polynomial, cutoffs, all
/// polynomials in `d_l + d_r` variables (`x1..x{d_l}` left, the rest right).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDto {
    pub d_l: usize,
    pub d_r: usize,
    pub rho: String,
    #[serde(default)]
    pub cutoffs: Vec<String>,
}

impl PhaseDto {
    pub fn build(&self) -> CliResult<PhaseSystem> {
        let nvars = self.d_l + self.d_r;
        let rho = MultiPoly::parse(&self.rho, nvars)?;
        let cutoffs = self
            .cutoffs
            .iter()
            .map(|c| MultiPoly::parse(c, nvars))
            .collect::<curvlab::Result<Vec<_>>>()?;
        Ok(PhaseSystem::new(self.d_l, self.d_r, rho, cutoffs)?)
    }
}

/// A polynomial map with cutoffs, everything in `d` variables.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDto {
    pub d: usize,
    pub components: Vec<String>,
    #[serde(default)]
    pub cutoffs: Vec<String>,
}

impl MapDto {
    pub fn build(&self) -> CliResult<ConeMap> {
        let components = self
            .components
            .iter()
            .map(|c| MultiPoly::parse(c, self.d))
            .collect::<curvlab::Result<Vec<_>>>()?;
        let cutoffs = self
            .cutoffs
            .iter()
            .map(|c| MultiPoly::parse(c, self.d))
            .collect::<curvlab::Result<Vec<_>>>()?;
        Ok(ConeMap::new(self.d, components, cutoffs)?)
    }
}

/// A union of axis-aligned boxes; each box lists one `[lo, hi]` pair per
/// coordinate.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDto {
    pub dim: usize,
    pub boxes: Vec<Vec<[f64; 2]>>,
}

impl RegionDto {
    pub fn build(&self) -> CliResult<Region> {
        let boxes = self
            .boxes
            .iter()
            .map(|b| b.iter().map(|&[lo, hi]| (lo, hi)).collect())
            .collect();
        Ok(Region::new(self.dim, boxes)?)
    }
}

/// A weight functional.  Rational parameters are exact strings.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightDto {
    Rotcurv1,
    Rotcurv2,
    W1,
    W1Partial { directions: Vec<Vec<String>> },
    W2,
    W2k { border: usize },
    W2jk { directions: Vec<Vec<String>>, border: usize },
    W3 { ell: Vec<String> },
    Induced { base: Box<WeightDto>, alpha: String, beta: String, base_target: usize },
}

impl WeightDto {
    pub fn build(&self) -> CliResult<WeightFunctional> {
        Ok(match self {
            WeightDto::Rotcurv1 => WeightFunctional::RotCurv1,
            WeightDto::Rotcurv2 => WeightFunctional::RotCurv2,
            WeightDto::W1 => WeightFunctional::W1,
            WeightDto::W1Partial { directions } => {
                WeightFunctional::W1Partial { directions: rat_rows(directions)? }
            }
            WeightDto::W2 => WeightFunctional::W2,
            WeightDto::W2k { border } => WeightFunctional::W2K { border: *border },
            WeightDto::W2jk { directions, border } => WeightFunctional::W2JK {
                directions: rat_rows(directions)?,
                border: *border,
            },
            WeightDto::W3 { ell } => WeightFunctional::W3 { ell: rat_row(ell)? },
            WeightDto::Induced { base, alpha, beta, base_target } => WeightFunctional::Induced {
                base: Box::new(base.build()?),
                alpha: parse_rat(alpha)?,
                beta: parse_rat(beta)?,
                base_target: *base_target,
            },
        })
    }

    /// True for the two functionals that attach to a phase system rather
    /// than a polynomial map.
    pub fn needs_phase(&self) -> bool {
        matches!(self, WeightDto::Rotcurv1 | WeightDto::Rotcurv2)
    }
}

pub fn rat_row(row: &[String]) -> CliResult<Vec<Rat>> {
    Ok(row.iter().map(|s| parse_rat(s)).collect::<curvlab::Result<Vec<_>>>()?)
}

fn rat_rows(rows: &[Vec<String>]) -> CliResult<Vec<Vec<Rat>>> {
    rows.iter().map(|r| rat_row(r)).collect()
}

/// Builds integration options from the shared optional knobs.
pub fn build_opts(
    seed: u64,
    n_samples: Option<u64>,
    method: Option<&str>,
    clip_ceiling: Option<f64>,
) -> CliResult<EstimateOpts> {
    let mut opts = EstimateOpts { seed, ..EstimateOpts::default() };
    if let Some(n) = n_samples {
        opts.n_samples = n;
    }
    if let Some(name) = method {
        opts.method = Some(parse_method(name)?);
    }
    if let Some(c) = clip_ceiling {
        opts.clip_ceiling = c;
    }
    Ok(opts)
}

fn parse_method(name: &str) -> CliResult<Method> {
    match name {
        "monte-carlo" => Ok(Method::MonteCarlo),
        "tensor-quadrature" => Ok(Method::TensorQuadrature),
        other => Err(Fail::Spec(format!(
            "unknown method {other:?}; use \"monte-carlo\" or \"tensor-quadrature\""
        ))),
    }
}

/// Parses an optional density polynomial over `nvars` block variables; the
/// runner evaluates its absolute value, and a missing polynomial means the
/// constant density 1.
pub fn density(text: Option<&str>, nvars: usize) -> CliResult<Option<MultiPoly>> {
    match text {
        None => Ok(None),
        Some(t) => Ok(Some(MultiPoly::parse(t, nvars)?)),
    }
}
