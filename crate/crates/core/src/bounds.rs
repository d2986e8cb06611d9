//! Closed-form VC-dimension upper bounds for GCNN and dense relu classes,
//! plus a growth-function bound and a search-based cross-check.
//!
//! Everything is computed in log₂ space; the quantities bounded (numbers of
//! sign patterns) are astronomically large long before the formulas
//! themselves overflow.
//!
//! Notation used throughout: `W_ℓ` is the *cumulative* parameter count of
//! the first `ℓ` layers from [`count_gcnn_weights`], `W̃ = Σ_ℓ W_ℓ`,
//! `L` the depth, `r` the resolution, `m` a sample size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{count_dnn_weights, count_gcnn_weights, DnnSpec, GcnnSpec};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

fn log2(x: f64) -> f64 {
    x.log2()
}

/// The two closed-form variants of the GCNN VC upper bound. They differ in
/// one factor inside the logarithm (`Σ m_ℓ` against `Σ ℓ·m_ℓ`), so the
/// `theorem_variant` never exceeds the `proof_variant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcnnUpperBound {
    pub theorem_variant: f64,
    pub proof_variant: f64,
}

fn check_r(spec: &GcnnSpec) -> Result<()> {
    spec.check()?;
    if spec.r <= 1 {
        return Err(Error::invalid("VC upper bounds require resolution r > 1"));
    }
    Ok(())
}

/// VC upper bound for the GCNN class `H(k, m_0..m_L, r)`:
///
/// ```text
/// L + 1 + 4·W̃·log₂(8·e·r·Σ_ℓ m_ℓ)        (theorem variant)
/// L + 1 + 4·W̃·log₂(8·e·r·Σ_ℓ ℓ·m_ℓ)      (proof variant)
/// ```
pub fn ub_gcnn(spec: &GcnnSpec) -> Result<GcnnUpperBound> {
    check_r(spec)?;
    let depth = spec.depth();
    let weights = count_gcnn_weights(spec)?;
    let w_tilde: f64 = weights.iter().map(|&w| w as f64).sum();
    let sum_m: f64 = spec.widths[1..].iter().map(|&m| m as f64).sum();
    let sum_lm: f64 = spec.widths[1..]
        .iter()
        .enumerate()
        .map(|(i, &m)| (i + 1) as f64 * m as f64)
        .sum();
    let base = depth as f64 + 1.0;
    let bound = GcnnUpperBound {
        theorem_variant: base + 4.0 * w_tilde * log2(8.0 * std::f64::consts::E * spec.r as f64 * sum_m),
        proof_variant: base + 4.0 * w_tilde * log2(8.0 * std::f64::consts::E * spec.r as f64 * sum_lm),
    };
    debug_assert!(bound.theorem_variant <= bound.proof_variant + 1e-9 * bound.proof_variant.abs());
    Ok(bound)
}

/// VC upper bound for the dense relu class `F(m_0..m_L)`:
/// `L + 2·(Σ_ℓ W_ℓ(F))·log₂(4·e·Σ_ℓ ℓ·m_ℓ)`.
pub fn ub_dnn(spec: &DnnSpec) -> Result<f64> {
    let depth = spec.depth();
    let weights = count_dnn_weights(spec)?;
    let w_tilde: f64 = weights.iter().map(|&w| w as f64).sum();
    let sum_lm: f64 = spec.widths[1..]
        .iter()
        .enumerate()
        .map(|(i, &m)| (i + 1) as f64 * m as f64)
        .sum();
    Ok(depth as f64 + 2.0 * w_tilde * log2(4.0 * std::f64::consts::E * sum_lm))
}

/// Right-hand side of the structural comparison between the GCNN bound and
/// the width-matched dense bound:
/// `2k·ub_dnn(F) + 4·(Σ_ℓ W_ℓ(H))·log₂(2r)`.
///
/// The GCNN theorem-variant bound never exceeds this; see
/// [`dense_comparison_holds`].
pub fn comparison_rhs(spec: &GcnnSpec) -> Result<f64> {
    check_r(spec)?;
    let dense = DnnSpec::new(spec.widths.clone())?;
    let weights = count_gcnn_weights(spec)?;
    let w_tilde: f64 = weights.iter().map(|&w| w as f64).sum();
    Ok(2.0 * spec.k as f64 * ub_dnn(&dense)? + 4.0 * w_tilde * log2(2.0 * spec.r as f64))
}

/// Checks `ub_gcnn(spec).theorem_variant <= comparison_rhs(spec)` at 1e-9
/// relative slack.
pub fn dense_comparison_holds(spec: &GcnnSpec) -> Result<bool> {
    let lhs = ub_gcnn(spec)?.theorem_variant;
    let rhs = comparison_rhs(spec)?;
    Ok(lhs <= rhs + 1e-9 * rhs.abs())
}

/// Log₂ of the layerwise sign-pattern region counts on `m` input signals:
/// entry `ℓ-1` accumulates
///
/// ```text
/// log₂ S(ℓ) <= log₂ S(ℓ-1) + max(0, 1 + W_ℓ·log₂(2e·m_ℓ·m·r·ℓ / W_ℓ))
/// ```
///
/// with `S(0) = 1`. Each step counts the parameter-space regions added by
/// one layer; a step can only add regions, so its contribution is clamped
/// at zero. The clamp is inactive everywhere the recursion's own
/// precondition `m >= W_ℓ` holds, in particular on the whole search domain
/// of [`vc_upper_by_search`].
pub fn log2_region_counts(spec: &GcnnSpec, m: u64) -> Result<Vec<f64>> {
    spec.check()?;
    if m == 0 {
        return Err(Error::invalid("sample size m must be positive"));
    }
    let weights = count_gcnn_weights(spec)?;
    let mut out = Vec::with_capacity(spec.depth());
    let mut acc = 0.0;
    for (idx, &w_l) in weights.iter().enumerate() {
        let ell = (idx + 1) as f64;
        let m_l = spec.widths[idx + 1] as f64;
        let arg = 2.0 * std::f64::consts::E * m_l * m as f64 * spec.r as f64 * ell / w_l as f64;
        acc += (1.0 + w_l as f64 * log2(arg)).max(0.0);
        out.push(acc);
    }
    Ok(out)
}

/// Log₂ of the growth-function bound at sample size `m`:
/// the last region count plus the output-layer term
/// `1 + (W_L + 1)·log₂(2·e·m·L / (W_L + 1))`.
pub fn log2_growth_bound(spec: &GcnnSpec, m: u64) -> Result<f64> {
    let counts = log2_region_counts(spec, m)?;
    let weights = count_gcnn_weights(spec)?;
    let w_last = (*weights.last().unwrap() + 1) as f64;
    let depth = spec.depth() as f64;
    Ok(counts.last().unwrap() + 1.0 + w_last * log2(2.0 * std::f64::consts::E * m as f64 * depth / w_last))
}

/// Smallest certifiable sample size `m` with `log2_growth_bound(spec, m) < m`,
/// a valid VC upper bound.
///
/// The predicate alone is not monotone in `m`: the deficit
/// `log2_growth_bound(m) - m` is concave with its peak at
/// `K / ln 2` where `K = W̃ + W_L + 1`, so a small `m` left of the peak can
/// satisfy the inequality without certifying anything. The search therefore
/// starts at `ceil(K / ln 2)`, where the deficit is strictly decreasing, and
/// finds the first sign change by doubling then bisection. The result never
/// exceeds `ceil(proof_variant) + 1` of [`ub_gcnn`].
pub fn vc_upper_by_search(spec: &GcnnSpec) -> Result<u64> {
    check_r(spec)?;
    let weights = count_gcnn_weights(spec)?;
    let w_tilde: u64 = weights.iter().sum();
    let k_total = (w_tilde + weights.last().unwrap() + 1) as f64;
    let start = (k_total * LOG2_E).ceil() as u64;

    let certified = |m: u64| -> Result<bool> { Ok(log2_growth_bound(spec, m)? < m as f64) };

    if certified(start)? {
        return Ok(start);
    }
    let mut lo = start; // predicate false here
    let mut hi = start.checked_mul(2).ok_or_else(|| Error::limit("search range overflow"))?;
    while !certified(hi)? {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::limit("search range overflow"))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if certified(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    debug_assert!(hi as f64 <= ub_gcnn(spec)?.proof_variant.ceil() + 1.0);
    Ok(hi)
}

/// Numeric validator for the packing lemma of Bartlett, Harvey, Liaw and
/// Mehrabian ("Nearly-tight VC-dimension bounds for piecewise linear neural
/// networks", Lemma 16): in the domain `r̃ >= 16`, `m̃ >= w̃ >= κ >= 0`,
///
/// ```text
/// 2^m̃ <= 2^κ · (m̃·r̃ / w̃)^w̃   implies   m̃ <= κ + w̃·log₂(2·r̃·log₂ r̃).
/// ```
///
/// Returns `None` when the domain constraints or the hypothesis fail (the
/// lemma is not applicable), otherwise whether the conclusion holds.
pub fn bartlett_lemma16_check(m_tilde: f64, kappa: f64, w_tilde: f64, r_tilde: f64) -> Option<bool> {
    if !(r_tilde >= 16.0 && m_tilde >= w_tilde && w_tilde >= kappa && kappa >= 0.0) {
        return None;
    }
    let hypothesis = if w_tilde == 0.0 {
        m_tilde <= kappa
    } else {
        m_tilde <= kappa + w_tilde * log2(m_tilde * r_tilde / w_tilde)
    };
    if !hypothesis {
        return None;
    }
    Some(m_tilde <= kappa + w_tilde * log2(2.0 * r_tilde * log2(r_tilde)))
}

/// Optional user-supplied constants for displaying the two-sided structural
/// relation between the GCNN VC dimension and the dense one. The dense
/// *upper bound* stands in for the dense VC dimension; the numbers are
/// report-only and never asserted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub c_lower: f64,
    pub c_upper: f64,
    /// `c_lower · (ub_dnn + W_L·log₂ r)`
    pub lower: f64,
    /// `c_upper · (ub_dnn + L·W_L·log₂ r)`
    pub upper: f64,
}

/// Every bound this crate computes for one architecture, in one artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: usize,
    pub widths: Vec<usize>,
    pub r: usize,
    pub depth: usize,
    pub ub_gcnn_theorem: f64,
    pub ub_gcnn_proof_variant: f64,
    pub ub_dnn: f64,
    pub comparison_rhs: f64,
    pub comparison_holds: bool,
    pub vc_upper_by_search: u64,
    /// Sample size at which the growth bound below is evaluated; equals
    /// `vc_upper_by_search`, so the report exhibits the certificate
    /// `log2_growth_at_m < m`.
    pub growth_eval_m: u64,
    pub log2_growth_at_m: f64,
    pub log2_region_counts: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sandwich: Option<SandwichReport>,
}

/// Computes the full [`BoundReport`] for one architecture. `constants`
/// supplies the `(c, C)` pair of the optional sandwich display.
pub fn build_bound_report(spec: &GcnnSpec, constants: Option<(f64, f64)>) -> Result<BoundReport> {
    let bound = ub_gcnn(spec)?;
    let dense = DnnSpec::new(spec.widths.clone())?;
    let dense_bound = ub_dnn(&dense)?;
    let rhs = comparison_rhs(spec)?;
    let search = vc_upper_by_search(spec)?;
    let weights = count_gcnn_weights(spec)?;
    let w_last = *weights.last().unwrap() as f64;
    let sandwich = constants.map(|(c, big_c)| SandwichReport {
        c_lower: c,
        c_upper: big_c,
        lower: c * (dense_bound + w_last * log2(spec.r as f64)),
        upper: big_c * (dense_bound + spec.depth() as f64 * w_last * log2(spec.r as f64)),
    });
    let report = BoundReport {
        k: spec.k,
        widths: spec.widths.clone(),
        r: spec.r,
        depth: spec.depth(),
        ub_gcnn_theorem: bound.theorem_variant,
        ub_gcnn_proof_variant: bound.proof_variant,
        ub_dnn: dense_bound,
        comparison_rhs: rhs,
        comparison_holds: bound.theorem_variant <= rhs + 1e-9 * rhs.abs(),
        vc_upper_by_search: search,
        growth_eval_m: search,
        log2_growth_at_m: log2_growth_bound(spec, search)?,
        log2_region_counts: log2_region_counts(spec, search)?,
        sandwich,
    };
    debug_assert!(report.ub_gcnn_theorem >= report.depth as f64 + 1.0);
    debug_assert!(report.vc_upper_by_search as f64 <= report.ub_gcnn_proof_variant + 1.0);
    Ok(report)
}

impl BoundReport {
    /// Column order of the one-row CSV projection. Vector-valued fields are
    /// joined with `;`, the sandwich block is empty unless requested.
    pub fn csv_header() -> &'static str {
        "k,depth,widths,r,ub_gcnn_theorem,ub_gcnn_proof_variant,ub_dnn,comparison_rhs,\
         comparison_holds,vc_upper_by_search,growth_eval_m,log2_growth_at_m,log2_region_counts,\
         sandwich_c,sandwich_C,sandwich_lower,sandwich_upper"
    }

    pub fn csv_row(&self) -> String {
        let widths = self.widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";");
        let counts = self
            .log2_region_counts
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let sandwich = match &self.sandwich {
            Some(s) => format!("{},{},{},{}", s.c_lower, s.c_upper, s.lower, s.upper),
            None => ",,,".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            self.depth,
            widths,
            self.r,
            self.ub_gcnn_theorem,
            self.ub_gcnn_proof_variant,
            self.ub_dnn,
            self.comparison_rhs,
            self.comparison_holds,
            self.vc_upper_by_search,
            self.growth_eval_m,
            self.log2_growth_at_m,
            counts,
            sandwich
        )
    }
}
