//! Schemas and parsing shared by the `gcnnvc` binary and its tests.
//!
//! Everything the binary emits deserializes back through the types here, so
//! a written report is always a readable input: shatter reports feed the
//! replay path, and every other report round-trips through [`Envelope`].

use serde::{Deserialize, Serialize};

use gcnn_vc::construct::ShatterInstance;
use gcnn_vc::group::GroupDescriptor;
use gcnn_vc::network::{random_dnn_params, random_gcnn_params};
use gcnn_vc::rng::stream;
use gcnn_vc::verify::ShatterReport;
use gcnn_vc::{DnnParams, DnnSpec, GcnnParams, GcnnSpec, Result};

/// Wrapper around every JSON report: names the tool and the generator, echoes
/// the seed, and carries the submission time unless suppressed.
///
/// Field order is the serialization order; the payload comes last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub rng: String,
    pub seed: u64,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_unix_seconds: Option<u64>,
    pub report: T,
}

/// `shatter` payload: the instance that was verified next to its report, so
/// the emitted artifact is replayable as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterPayload {
    pub instance: ShatterInstance,
    pub verification: ShatterReport,
}

/// `lift-check` / `invariance` payload: worst normalized residual over the
/// requested trials against a fixed tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPayload {
    pub trials: u64,
    pub tolerance: f64,
    pub max_residual: f64,
    pub passed: bool,
}

// ------------------------------------------------------------- input files

/// GCNN architecture file: `{"gcnn": {...}, "params"?: ..., "basis"?: ...}`.
/// Unknown fields are rejected so typos fail loudly.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcnnFile {
    pub gcnn: GcnnArch,
    #[serde(default)]
    pub params: Option<GcnnParamsSpec>,
    /// k rows of diff_count kernel values; identity-indicator by default
    #[serde(default)]
    pub basis: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcnnArch {
    pub k: usize,
    pub widths: Vec<usize>,
    pub group: GroupField,
}

/// Dense architecture file for `lift-check`:
/// `{"dnn": {"widths": [...]}, "group": ..., "params": ...}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnFile {
    pub dnn: DnnArch,
    pub group: GroupField,
    #[serde(default)]
    pub params: Option<DnnParamsSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnArch {
    pub widths: Vec<usize>,
}

/// A group in an architecture file: either the canonical descriptor object
/// (`{"kind": "cyclic", "n": 8}`) or the flag-style string (`"cyclic:8"`).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GroupField {
    Descriptor(GroupDescriptor),
    Text(String),
}

impl GroupField {
    pub fn descriptor(&self) -> std::result::Result<GroupDescriptor, String> {
        match self {
            GroupField::Descriptor(d) => Ok(d.clone()),
            GroupField::Text(s) => parse_group(s),
        }
    }
}

/// Network parameters: explicit values, or a reproducible random draw.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GcnnParamsSpec {
    /// `{"seed": N, "scale"?: S}`: uniform from [-S, S), drawn in the
    /// documented layer/weight/bias order (scale defaults to 1)
    Random {
        seed: u64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// explicit `{"layers": [...]}`
    Explicit(GcnnParams),
}

impl GcnnParamsSpec {
    pub fn materialize(&self, spec: &GcnnSpec) -> Result<GcnnParams> {
        match self {
            GcnnParamsSpec::Random { seed, scale } => {
                random_gcnn_params(spec, &mut stream(*seed, 0), *scale)
            }
            GcnnParamsSpec::Explicit(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DnnParamsSpec {
    Random {
        seed: u64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Explicit(DnnParams),
}

impl DnnParamsSpec {
    pub fn materialize(&self, spec: &DnnSpec) -> Result<DnnParams> {
        match self {
            DnnParamsSpec::Random { seed, scale } => {
                random_dnn_params(spec, &mut stream(*seed, 0), *scale)
            }
            DnnParamsSpec::Explicit(p) => Ok(p.clone()),
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

// ------------------------------------------------------------------ replay

#[derive(Deserialize)]
struct ReplayEnvelope {
    report: ReplayReport,
}

#[derive(Deserialize)]
struct ReplayReport {
    instance: ShatterInstance,
}

/// Reads a replay input: a full emitted shatter report or a bare instance.
pub fn extract_instance(text: &str) -> std::result::Result<ShatterInstance, serde_json::Error> {
    match serde_json::from_str::<ReplayEnvelope>(text) {
        Ok(env) => Ok(env.report.instance),
        Err(_) => serde_json::from_str::<ShatterInstance>(text),
    }
}

// ----------------------------------------------------------------- parsing

/// Parses the flag-style descriptors `cyclic:N`, `dihedral:N`, `grid:HxW`,
/// and `product:(desc,desc)` (factors may nest).
pub fn parse_group(s: &str) -> std::result::Result<GroupDescriptor, String> {
    let s = s.trim();
    if let Some(n) = s.strip_prefix("cyclic:") {
        let n = n.parse().map_err(|_| format!("bad cyclic order in {s:?}"))?;
        return Ok(GroupDescriptor::Cyclic { n });
    }
    if let Some(n) = s.strip_prefix("dihedral:") {
        let n = n.parse().map_err(|_| format!("bad dihedral order in {s:?}"))?;
        return Ok(GroupDescriptor::Dihedral { n });
    }
    if let Some(dims) = s.strip_prefix("grid:") {
        let (h, w) = dims.split_once('x').ok_or_else(|| format!("grid needs HxW, got {s:?}"))?;
        let height = h.parse().map_err(|_| format!("bad grid height in {s:?}"))?;
        let width = w.parse().map_err(|_| format!("bad grid width in {s:?}"))?;
        return Ok(GroupDescriptor::Grid { height, width });
    }
    if let Some(inner) = s.strip_prefix("product:(").and_then(|rest| rest.strip_suffix(')')) {
        // split at the top-level comma only: factors may be products
        let mut depth = 0usize;
        for (i, c) in inner.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' if depth == 0 => {
                    let a = parse_group(&inner[..i])?;
                    let b = parse_group(&inner[i + 1..])?;
                    return Ok(GroupDescriptor::Product { a: Box::new(a), b: Box::new(b) });
                }
                _ => {}
            }
        }
        return Err(format!("product needs two factors, got {s:?}"));
    }
    Err(format!(
        "unknown group descriptor {s:?}; expected cyclic:N, dihedral:N, grid:HxW, or product:(a,b)"
    ))
}

/// Parses `"A,B"` pairs for `--interval` and `--constants`.
pub fn parse_pair(s: &str, what: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("{what} needs two comma-separated numbers, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("bad number in {what}: {s:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad number in {what}: {s:?}"))?;
    Ok((a, b))
}

/// Default window interval for a group of order `r`: `[0, 2(d+2)]` with
/// `d = 2^⌊log₂ r⌋`, which makes the window spacing exactly 1.0 so margins
/// and isolation zeros are exact in floating point.
pub fn default_interval(r: usize) -> (f64, f64) {
    let d = (1usize << r.max(1).ilog2()) as f64;
    (0.0, 2.0 * (d + 2.0))
}
