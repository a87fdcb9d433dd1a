//! JSON shift-spec files.
//!
//! ```json
//! {"version": 1, "name": "golden", "coeffs": [1, 1], "degree": 40}
//! {"version": 1, "name": "geo", "generator": {"kind": "constant", "params": [1]}, "degree": 60}
//! {"version": 1, "name": "m", "generator": {"kind": "matrix-first-return"},
//!  "matrix": [[1, 1], [1, 0]], "vertex": 0, "degree": 12}
//! ```
//!
//! Generators, for `n = 1..=degree`:
//!
//! | kind | params | `f_n` |
//! |---|---|---|
//! | `constant` | `[c]` | `c` |
//! | `geometric` | `[c, r]` | `c·r^{n−1}` |
//! | `floor-power-over-cube` | `[base, scale]` (default `[2, 8]`) | `⌊baseⁿ / (scale·n³)⌋` |
//! | `matrix-first-return` | none | first returns to `vertex` in `matrix` |
//!
//! A `stride` `p` places the generated coefficient `a_m` at `n = pm` and
//! zeros elsewhere. Coefficients may be JSON numbers or decimal strings.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loopgraph::{first_return_series, LoopGraphError};
use crate::series::Series;

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported spec version {0}")]
    Version(u32),
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    LoopGraph(#[from] LoopGraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeff {
    Num(u64),
    Str(String),
}

impl Coeff {
    pub fn value(&self) -> Result<BigUint, SpecError> {
        match self {
            Coeff::Num(n) => Ok(BigUint::from(*n)),
            Coeff::Str(s) => s
                .trim()
                .parse::<BigUint>()
                .map_err(|_| SpecError::Invalid(format!("coefficient {s:?} is not a nonnegative integer"))),
        }
    }

    pub fn from_big(c: &BigUint) -> Coeff {
        match c.to_u64() {
            Some(v) => Coeff::Num(v),
            None => Coeff::Str(c.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Constant,
    Geometric,
    FloorPowerOverCube,
    MatrixFirstReturn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub kind: GeneratorKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<Coeff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<Coeff>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
}

impl ShiftSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let spec: ShiftSpec = serde_json::from_str(text).map_err(|e| SpecError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if spec.version != SPEC_VERSION {
            return Err(SpecError::Version(spec.version));
        }
        match (&spec.coeffs, &spec.generator) {
            (Some(_), Some(_)) => return Err(SpecError::Invalid("both coeffs and generator given".into())),
            (None, None) => return Err(SpecError::Invalid("one of coeffs or generator is required".into())),
            _ => {}
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Explicit spec with the given coefficients.
    pub fn explicit(name: &str, f: &Series) -> Self {
        ShiftSpec {
            version: SPEC_VERSION,
            name: name.to_string(),
            coeffs: Some(f.coeffs().iter().map(Coeff::from_big).collect()),
            generator: None,
            degree: Some(f.degree()),
            matrix: None,
            vertex: None,
        }
    }

    /// Expands to a series of degree `degree` (or the override).
    pub fn expand(&self, degree_override: Option<usize>) -> Result<Series, SpecError> {
        let degree = degree_override.or(self.degree);
        if let Some(coeffs) = &self.coeffs {
            let d = degree.unwrap_or(coeffs.len());
            if d == 0 {
                return Err(SpecError::Invalid("degree must be positive".into()));
            }
            let vals = coeffs.iter().map(Coeff::value).collect::<Result<Vec<_>, _>>()?;
            if degree_override.is_none() && vals.len() > d {
                return Err(SpecError::Invalid(format!("{} coefficients exceed degree {d}", vals.len())));
            }
            return Ok(Series::from_fn(d, |n| vals.get(n - 1).cloned().unwrap_or_default()));
        }
        let gen = self.generator.as_ref().expect("validated");
        let d = degree.ok_or_else(|| SpecError::Invalid("generators need a degree".into()))?;
        if d == 0 {
            return Err(SpecError::Invalid("degree must be positive".into()));
        }
        let stride = gen.stride.unwrap_or(1);
        if stride == 0 {
            return Err(SpecError::Invalid("stride must be positive".into()));
        }
        let inner = d / stride;
        if inner == 0 {
            return Err(SpecError::Invalid("degree below stride".into()));
        }
        let params = gen.params.iter().map(Coeff::value).collect::<Result<Vec<_>, _>>()?;
        let param = |i: usize, default: u64| params.get(i).cloned().unwrap_or_else(|| BigUint::from(default));
        let a = match gen.kind {
            GeneratorKind::Constant => {
                let c = param(0, 1);
                Series::from_fn(inner, |_| c.clone())
            }
            GeneratorKind::Geometric => {
                let (c, r) = (param(0, 1), param(1, 2));
                let mut cur = c;
                Series::from_fn(inner, |_| {
                    let out = cur.clone();
                    cur = &cur * &r;
                    out
                })
            }
            GeneratorKind::FloorPowerOverCube => {
                let (base, scale) = (param(0, 2), param(1, 8));
                if scale.is_zero() {
                    return Err(SpecError::Invalid("scale must be positive".into()));
                }
                let mut pow = BigUint::one();
                Series::from_fn(inner, |n| {
                    pow = &pow * &base;
                    let n3 = BigUint::from(n as u64).pow(3);
                    &pow / (&scale * n3)
                })
            }
            GeneratorKind::MatrixFirstReturn => {
                let m = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| SpecError::Invalid("matrix-first-return needs a matrix".into()))?;
                first_return_series(m, self.vertex.unwrap_or(0), inner)?
            }
        };
        Ok(a.inflate(stride).truncate(d).pad(d))
    }
}

trait Pad {
    fn pad(self, d: usize) -> Series;
}

impl Pad for Series {
    /// Extends with zeros up to degree `d`.
    fn pad(self, d: usize) -> Series {
        if self.degree() >= d {
            return self;
        }
        Series::from_fn(d, |n| if n <= self.degree() { self.coeff(n) } else { BigUint::zero() })
    }
}
