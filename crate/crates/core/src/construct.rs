//! Constructive shattering machinery: indicator bump networks, the
//! dense-to-group lift, and builders for three families of certified
//! shattering instances.
//!
//! Each builder returns a [`ShatterInstance`]: `m` input signals together
//! with a map from every one of the `2^m` labelings to a concrete GCNN that
//! realizes it. The map is indexed by the labeling's bit pattern (bit `j`
//! set means function `j` is labeled `+1`), in integer order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::DiscretizedGroup;
use crate::interval::{dnn_output_range, Interval};
use crate::network::{
    count_dnn_weights, dnn_forward, DenseLayer, DnnParams, DnnSpec, GcnnLayer, GcnnParams, GcnnSpec,
};
use crate::signal::{identity_indicator_basis, KernelBasis, Signal};

/// Enumeration budget: instances beyond `2^20` labelings are not
/// materialized, and the verifier refuses to certify them exhaustively.
pub const MAX_ENUM_M: usize = 20;

fn floor_log2(r: usize) -> usize {
    (usize::BITS - 1 - r.leading_zeros()) as usize
}

/// Four-neuron relu bump
///
/// ```text
/// 1_(a,b,eps)(x) = (1/eps)·[ (x-(a-eps))+ - (x-a)+ - (x-b)+ + (x-(b+eps))+ ]
/// ```
///
/// equal to 1 on `[a, b]`, 0 outside `(a-eps, b+eps)`, linear in between.
/// Returned as a dense `(1, 4, 1)` network whose output unit's relu is
/// inactive (the bump is nonnegative).
pub fn indicator_net(a: f64, b: f64, eps: f64) -> Result<(DnnSpec, DnnParams)> {
    if !(a < b) {
        return Err(Error::invalid(format!("indicator interval requires a < b, got [{a}, {b}]")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("indicator ramp width must be positive, got {eps}")));
    }
    let spec = DnnSpec::new(vec![1, 4, 1])?;
    let c = 1.0 / eps;
    let params = DnnParams {
        layers: vec![
            DenseLayer {
                weight: vec![vec![1.0]; 4],
                bias: vec![a - eps, a, b, b + eps],
            },
            DenseLayer { weight: vec![vec![c, -c, -c, c]], bias: vec![0.0] },
        ],
    };
    Ok((spec, params))
}

/// Re-expresses a dense relu network as a GCNN with `k = 1`, the
/// identity-indicator basis, identical widths, and weight-for-weight copied
/// parameters. Each GCNN unit then computes exactly the dense unit applied
/// elementwise over the group, so the pooled output equals the double sum
/// `Σ_i Σ_j dnn(f(g_j))_i`, summand for summand.
pub fn lift_dnn_to_gcnn(
    dspec: &DnnSpec,
    dparams: &DnnParams,
    g: &DiscretizedGroup,
) -> Result<(GcnnSpec, GcnnParams, KernelBasis)> {
    dspec.check()?;
    dparams.check_shape(dspec)?;
    let spec = GcnnSpec::new(1, dspec.widths.clone(), g.r)?;
    let layers = dparams
        .layers
        .iter()
        .map(|dl| GcnnLayer {
            weight: dl.weight.iter().map(|row| row.iter().map(|&w| vec![w]).collect()).collect(),
            bias: dl.bias.clone(),
        })
        .collect();
    Ok((spec, GcnnParams { layers }, identity_indicator_basis(g)))
}

/// The subset of `{1, .., m}` with index `i ∈ [1, 2^m]` under the canonical
/// binary encoding: bit `t` of `i-1` set means `t+1` is a member.
pub fn subset_index(i: usize, m: usize) -> Result<Vec<usize>> {
    if m >= usize::BITS as usize {
        return Err(Error::limit(format!("subset universe 2^{m} is not addressable")));
    }
    if i == 0 || i > (1usize << m) {
        return Err(Error::invalid(format!("subset index {i} outside [1, 2^{m}]")));
    }
    let bits = i - 1;
    Ok((0..m).filter(|t| (bits >> t) & 1 == 1).map(|t| t + 1).collect())
}

/// How an instance was built; carried in reports for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum Provenance {
    /// Window classifiers on one value interval.
    IntervalWindows { interval: [f64; 2] },
    /// Juxtaposed window classifiers on disjoint value intervals.
    BlockWindows { blocks: usize, intervals: Vec<[f64; 2]> },
    /// A dense shattering family lifted through a hypercube gate.
    HypercubeLift { box_interval: [f64; 2] },
}

/// `m` signals plus one classifier network per labeling, with the shared
/// architecture, basis and decision threshold. Everything needed to replay
/// the shattering certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterInstance {
    pub group: DiscretizedGroup,
    /// Number of functions to shatter.
    pub m: usize,
    pub functions: Vec<Signal>,
    /// Architecture shared by every classifier in the map.
    pub network_spec: GcnnSpec,
    pub basis: KernelBasis,
    /// `classifiers[mask]` realizes the labeling whose bit `j` gives the
    /// sign of function `j` (set = +1), masks in integer order.
    pub classifiers: Vec<GcnnParams>,
    /// Decision threshold: predicted sign is `+1` iff `output > threshold`.
    pub threshold: f64,
    /// Margin the construction guarantees on every decision; 0 when only
    /// strict sign separation is promised.
    pub expected_margin: f64,
    /// Declared budget of adjustable parameters for the instance's class.
    pub budget_weights: u64,
    /// Declared network depth of the class.
    pub budget_depth: usize,
    pub provenance: Provenance,
}

impl ShatterInstance {
    pub fn labelings_total(&self) -> u64 {
        1u64 << self.m
    }

    /// Structural validity: complete classifier map, consistent shapes.
    pub fn check(&self) -> Result<()> {
        if self.m > 63 {
            return Err(Error::limit(format!("{} functions cannot be enumerated", self.m)));
        }
        if self.functions.len() != self.m {
            return Err(Error::invalid(format!(
                "instance declares m = {} but carries {} functions",
                self.m,
                self.functions.len()
            )));
        }
        if self.classifiers.len() as u64 != self.labelings_total() {
            return Err(Error::invalid(format!(
                "classifier map has {} entries, needs one per labeling = {}",
                self.classifiers.len(),
                self.labelings_total()
            )));
        }
        self.network_spec.check()?;
        if self.network_spec.r != self.group.r {
            return Err(Error::invalid("instance network resolution differs from its group"));
        }
        if self.basis.k() != self.network_spec.k {
            return Err(Error::invalid("basis dimension differs from the network spec"));
        }
        self.basis.check_shape(&self.group)?;
        for params in &self.classifiers {
            params.check_shape(&self.network_spec)?;
        }
        for f in &self.functions {
            f.check_shape(self.network_spec.widths[0], self.group.r)?;
        }
        Ok(())
    }
}

/// Number of parameter coordinates that differ across a classifier family;
/// the rest is shared plumbing, so this is the family's adjustable-weight
/// count, compared against the declared class budget.
pub fn count_varying_parameters(classifiers: &[GcnnParams]) -> u64 {
    let Some((first, rest)) = classifiers.split_first() else {
        return 0;
    };
    let mut varying = 0u64;
    for (li, layer) in first.layers.iter().enumerate() {
        for (j, row) in layer.weight.iter().enumerate() {
            for (i, ws) in row.iter().enumerate() {
                for (s, w) in ws.iter().enumerate() {
                    if rest.iter().any(|c| c.layers[li].weight[j][i][s].to_bits() != w.to_bits()) {
                        varying += 1;
                    }
                }
            }
        }
        for (j, b) in layer.bias.iter().enumerate() {
            if rest.iter().any(|c| c.layers[li].bias[j].to_bits() != b.to_bits()) {
                varying += 1;
            }
        }
    }
    varying
}

struct WindowBlock {
    delta: f64,
    /// `points[i-1] = A + i·delta` for `i = 1..=d`.
    points: Vec<f64>,
    filler: f64,
}

fn window_block(r: usize, a: f64, b: f64) -> Result<WindowBlock> {
    if r < 2 {
        return Err(Error::invalid("shattering windows need resolution r >= 2"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("value interval requires finite A < B, got [{a}, {b}]")));
    }
    let d = 1usize << floor_log2(r);
    let delta = (b - a) / (2.0 * (d as f64 + 2.0));
    let points = (1..=d).map(|i| a + i as f64 * delta).collect();
    Ok(WindowBlock { delta, points, filler: b - delta })
}

fn build_window_instance(
    g: &DiscretizedGroup,
    intervals: &[(f64, f64)],
    provenance: Provenance,
) -> Result<ShatterInstance> {
    if !g.closed {
        return Err(Error::unsupported("window instances require a closed group"));
    }
    let blocks = intervals
        .iter()
        .map(|&(a, b)| window_block(g.r, a, b))
        .collect::<Result<Vec<_>>>()?;
    let m_per = floor_log2(g.r);
    let d = 1usize << m_per;
    let w = blocks.len();
    let m_total = w * m_per;
    if m_total > MAX_ENUM_M {
        return Err(Error::limit(format!(
            "instance would need 2^{m_total} classifiers, budget is 2^{MAX_ENUM_M}"
        )));
    }

    // Function (block bi, slot j) takes, at element index s < d, the block's
    // point value y_{s+1} when bit j of s is set (the subset S_{s+1}
    // contains j+1), and the filler B - δ everywhere else.
    let mut functions = Vec::with_capacity(m_total);
    for block in &blocks {
        for j in 0..m_per {
            let values: Vec<f64> = (0..g.r)
                .map(|s| if s < d && (s >> j) & 1 == 1 { block.points[s] } else { block.filler })
                .collect();
            functions.push(Signal::new(vec![values]));
        }
    }

    // One classifier per labeling: per block, the window indicator centered
    // on the point whose subset equals the block's positive set, all blocks
    // juxtaposed as hidden channels of a single (1, 4w, 1) network.
    let hidden = 4 * w;
    let network_spec = GcnnSpec::new(1, vec![1, hidden, 1], g.r)?;
    let basis = identity_indicator_basis(g);
    let total = 1usize << m_total;
    let mut classifiers = Vec::with_capacity(total);
    for mask in 0..total {
        let mut bias1 = Vec::with_capacity(hidden);
        let mut out_w = Vec::with_capacity(hidden);
        for (bi, block) in blocks.iter().enumerate() {
            let sub = (mask >> (bi * m_per)) & (d - 1);
            let y = block.points[sub];
            let eps = block.delta / 2.0;
            bias1.extend_from_slice(&[y - block.delta, y - eps, y + eps, y + block.delta]);
            let c = 1.0 / eps;
            out_w.extend_from_slice(&[c, -c, -c, c]);
        }
        classifiers.push(GcnnParams {
            layers: vec![
                GcnnLayer { weight: vec![vec![vec![1.0]]; hidden], bias: bias1 },
                GcnnLayer {
                    weight: vec![out_w.into_iter().map(|c| vec![c]).collect()],
                    bias: vec![0.0],
                },
            ],
        });
    }

    let budget_weights = 4 * w as u64;
    let varying = count_varying_parameters(&classifiers);
    assert!(
        varying <= budget_weights,
        "classifier family varies in {varying} parameters, budget is {budget_weights}"
    );

    let inst = ShatterInstance {
        group: g.clone(),
        m: m_total,
        functions,
        network_spec,
        basis,
        classifiers,
        threshold: 0.5,
        expected_margin: 0.5,
        budget_weights,
        budget_depth: 2,
        provenance,
    };
    inst.check()?;
    Ok(inst)
}

/// Shattering instance for `m = ⌊log₂ r⌋` functions valued in `[A, B]`:
/// `d = 2^m` evenly spaced points `y_i = A + i·δ` with `δ = (B-A)/(2(d+2))`,
/// one function per subset slot, and one lifted window indicator
/// `1_(y-δ/2, y+δ/2, δ/2)` per labeling, thresholded at `0.5`. Every
/// decision has margin `0.5`: values are exactly `1` or `0` in real
/// arithmetic, since all other points and the filler `B-δ` sit at distance
/// at least `δ` from the window center where the bump vanishes.
pub fn build_shatter_instance(g: &DiscretizedGroup, a: f64, b: f64) -> Result<ShatterInstance> {
    build_window_instance(g, &[(a, b)], Provenance::IntervalWindows { interval: [a, b] })
}

/// Juxtaposes `w` disjoint-interval copies of [`build_shatter_instance`]
/// into one instance shattering `w·⌊log₂ r⌋` functions with `(1, 4w, 1)`
/// networks. Block `i` lives on `[A_i, B_i] = [(2m+5)i, (2m+5)i + m+2]`;
/// the gaps exceed every window's reach, so block `i` classifiers vanish on
/// block `j ≠ i` functions and the per-block certificates sum cleanly.
pub fn build_composite_instance(g: &DiscretizedGroup, w: usize) -> Result<ShatterInstance> {
    if w == 0 {
        return Err(Error::invalid("composite instance needs at least one block"));
    }
    if g.r < 2 {
        return Err(Error::invalid("shattering windows need resolution r >= 2"));
    }
    let m = floor_log2(g.r);
    let spacing = (2 * m + 5) as f64;
    let len = (m + 2) as f64;
    let intervals: Vec<(f64, f64)> = (1..=w)
        .map(|i| {
            let a = spacing * i as f64;
            (a, a + len)
        })
        .collect();
    let recorded = intervals.iter().map(|&(a, b)| [a, b]).collect();
    build_window_instance(g, &intervals, Provenance::BlockWindows { blocks: w, intervals: recorded })
}

/// A dense network together with its decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedDnn {
    pub spec: DnnSpec,
    pub params: DnnParams,
    pub threshold: f64,
}

/// Lifts a dense shattering family to signals on a group.
///
/// The base family shatters `base_points ⊂ ℝ^{m₀}`. Function `f_i` places
/// base point `y_i` at the identity element and the center of the box
/// `Π = [A, B]^{m₀}` everywhere else. Each combined classifier runs the
/// matching base net `h` alongside a box gate
/// `I(y) = (1/m₀)·Σ_c 1_(A,B,0.5)(y_c)` and outputs
/// `relu(h - (T̂ - b)·I - b)` where `b` is the base threshold and `T̂` a
/// certified upper bound on `h` over `Π` from interval propagation
/// (inflated by a relative `1e-9` so rounding in `I` cannot surface).
/// On the identity the gate is exactly `0` and the base decision passes
/// through; on box-valued inputs the output is exactly `0`. The two stacks
/// are padded to a common depth with identity relu units, which preserves
/// their nonnegative values.
pub fn build_hypercube_lift(
    base_points: &[Vec<f64>],
    base_nets: &[ThresholdedDnn],
    g: &DiscretizedGroup,
    a: f64,
    b: f64,
) -> Result<ShatterInstance> {
    let m = base_points.len();
    if m == 0 {
        return Err(Error::invalid("at least one base point is required"));
    }
    if m > MAX_ENUM_M {
        return Err(Error::limit(format!("2^{m} labelings exceed the enumeration budget")));
    }
    let m0 = base_points[0].len();
    if m0 == 0 || base_points.iter().any(|y| y.len() != m0) {
        return Err(Error::invalid("base points must share one positive dimension"));
    }
    let Some(first_net) = base_nets.first() else {
        return Err(Error::invalid("base family is empty"));
    };
    let base_spec = &first_net.spec;
    base_spec.check()?;
    if base_spec.widths[0] != m0 {
        return Err(Error::invalid("base networks must consume the base point dimension"));
    }
    if *base_spec.widths.last().unwrap() != 1 {
        return Err(Error::invalid("base networks must have a single output unit"));
    }
    for net in base_nets {
        if net.spec != *base_spec {
            return Err(Error::invalid("base networks must share one architecture"));
        }
        net.params.check_shape(&net.spec)?;
    }
    let max_norm = base_points
        .iter()
        .flat_map(|y| y.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if !(a > max_norm + 1.0) {
        return Err(Error::invalid(format!(
            "box start A = {a} must exceed max point norm + 1 = {}",
            max_norm + 1.0
        )));
    }
    if !(b > a) {
        return Err(Error::invalid(format!("box requires B > A, got [{a}, {b}]")));
    }

    // Which base net realizes which labeling on the base points.
    let total = 1usize << m;
    let mut pattern_to_net = vec![usize::MAX; total];
    for (ni, net) in base_nets.iter().enumerate() {
        let mut mask = 0usize;
        for (t, y) in base_points.iter().enumerate() {
            let v = dnn_forward(&net.spec, &net.params, y)?[0];
            if v - net.threshold > 0.0 {
                mask |= 1 << t;
            }
        }
        if pattern_to_net[mask] == usize::MAX {
            pattern_to_net[mask] = ni;
        }
    }
    if let Some(missing) = pattern_to_net.iter().position(|&v| v == usize::MAX) {
        return Err(Error::invalid(format!(
            "base family does not shatter the base points: labeling {missing:0width$b} unrealized",
            width = m
        )));
    }

    // Certified bound on each base net over the box, inflated so that the
    // clamp relu(h - (T̂-b)·I - b) stays at exactly 0 under rounding in I.
    let box_input = vec![Interval::new(a, b)?; m0];
    let mut t_hat = Vec::with_capacity(base_nets.len());
    for net in base_nets {
        let range = dnn_output_range(&net.spec, &net.params, &box_input)?[0];
        t_hat.push(range.abs_max() * (1.0 + 1e-9) + 1e-9);
    }

    // Combined architecture: base stack and gate stack side by side, padded
    // to a common depth, then one output unit.
    let lb = base_spec.depth();
    let dpad = lb.max(2);
    let mut widths = Vec::with_capacity(dpad + 2);
    widths.push(m0);
    for l in 1..=dpad {
        let base_w = if l <= lb { base_spec.widths[l] } else { 1 };
        let gate_w = if l == 1 { 4 * m0 } else { 1 };
        widths.push(base_w + gate_w);
    }
    widths.push(1);
    let combined_spec = DnnSpec::new(widths)?;

    let combined_params = |net: &ThresholdedDnn, t_bound: f64| -> DnnParams {
        let mut layers = Vec::with_capacity(dpad + 1);
        for l in 1..=dpad {
            let in_base = if l == 1 { m0 } else if l - 1 <= lb { base_spec.widths[l - 1] } else { 1 };
            let in_total = combined_spec.widths[l - 1];
            let mut weight: Vec<Vec<f64>> = Vec::new();
            let mut bias: Vec<f64> = Vec::new();
            if l <= lb {
                for (row, &bb) in net.params.layers[l - 1].weight.iter().zip(&net.params.layers[l - 1].bias) {
                    let mut full = vec![0.0; in_total];
                    full[..row.len()].copy_from_slice(row);
                    weight.push(full);
                    bias.push(bb);
                }
            } else {
                // identity padding of the (scalar) base stack
                let mut full = vec![0.0; in_total];
                full[0] = 1.0;
                weight.push(full);
                bias.push(0.0);
            }
            if l == 1 {
                // gate hiddens: 4 bump units per input coordinate
                for c in 0..m0 {
                    for offset in [a - 0.5, a, b, b + 0.5] {
                        let mut full = vec![0.0; in_total];
                        full[c] = 1.0;
                        weight.push(full);
                        bias.push(offset);
                    }
                }
            } else if l == 2 {
                // gate combine: I = (1/m0)·Σ_c 2·(h1 - h2 - h3 + h4)
                let mut full = vec![0.0; in_total];
                let coef = 2.0 / m0 as f64;
                for c in 0..m0 {
                    let base_off = in_base + 4 * c;
                    full[base_off] = coef;
                    full[base_off + 1] = -coef;
                    full[base_off + 2] = -coef;
                    full[base_off + 3] = coef;
                }
                weight.push(full);
                bias.push(0.0);
            } else {
                // identity padding of the (scalar) gate stack
                let mut full = vec![0.0; in_total];
                full[in_base] = 1.0;
                weight.push(full);
                bias.push(0.0);
            }
            layers.push(DenseLayer { weight, bias });
        }
        // output: relu(base - (T̂ - b)·gate - b)
        layers.push(DenseLayer {
            weight: vec![vec![1.0, -(t_bound - net.threshold)]],
            bias: vec![net.threshold],
        });
        DnnParams { layers }
    };

    let center = 0.5 * (a + b);
    let functions = base_points
        .iter()
        .map(|y| {
            let values = (0..m0)
                .map(|c| (0..g.r).map(|s| if s == g.identity { y[c] } else { center }).collect())
                .collect();
            Signal::new(values)
        })
        .collect();

    let mut classifiers = Vec::with_capacity(total);
    let mut network_spec = None;
    let mut basis = None;
    for mask in 0..total {
        let ni = pattern_to_net[mask];
        let dense = combined_params(&base_nets[ni], t_hat[ni]);
        dense.check_shape(&combined_spec)?;
        let (gspec, gparams, gbasis) = lift_dnn_to_gcnn(&combined_spec, &dense, g)?;
        network_spec.get_or_insert(gspec);
        basis.get_or_insert(gbasis);
        classifiers.push(gparams);
    }

    let base_weights = *count_dnn_weights(base_spec)?.last().unwrap();
    let budget_weights = 6 * base_weights;
    let varying = count_varying_parameters(&classifiers);
    assert!(
        varying <= budget_weights,
        "classifier family varies in {varying} parameters, budget is {budget_weights}"
    );

    let inst = ShatterInstance {
        group: g.clone(),
        m,
        functions,
        network_spec: network_spec.unwrap(),
        basis: basis.unwrap(),
        classifiers,
        threshold: 0.0,
        expected_margin: 0.0,
        budget_weights,
        budget_depth: dpad + 1,
        provenance: Provenance::HypercubeLift { box_interval: [a, b] },
    };
    inst.check()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_cyclic, build_dihedral, build_grid_translation};
    use crate::network::gcnn_forward;
    use rand::Rng;

    fn indicator_value(a: f64, b: f64, eps: f64, x: f64) -> f64 {
        let (spec, params) = indicator_net(a, b, eps).unwrap();
        dnn_forward(&spec, &params, &[x]).unwrap()[0]
    }

    #[test]
    fn indicator_piecewise_values() {
        assert_eq!(indicator_value(0.0, 1.0, 0.5, 0.5), 1.0);
        assert_eq!(indicator_value(0.0, 1.0, 0.5, -1.0), 0.0);
        assert_eq!(indicator_value(0.0, 1.0, 0.5, -0.25), 0.5);
        // beyond the upper ramp the four terms cancel
        assert_eq!(indicator_value(0.0, 1.0, 0.5, 1.5), 0.0);
        assert_eq!(indicator_value(0.0, 1.0, 0.5, 7.0), 0.0);
        // descending ramp midpoint
        assert_eq!(indicator_value(0.0, 1.0, 0.5, 1.25), 0.5);
        // endpoints of the plateau
        assert_eq!(indicator_value(0.0, 1.0, 0.5, 0.0), 1.0);
        assert_eq!(indicator_value(0.0, 1.0, 0.5, 1.0), 1.0);
    }

    #[test]
    fn indicator_rejects_bad_intervals() {
        assert!(indicator_net(1.0, 0.0, 0.5).is_err());
        assert!(indicator_net(0.0, 0.0, 0.5).is_err());
        assert!(indicator_net(0.0, 1.0, 0.0).is_err());
        assert!(indicator_net(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn lift_of_zero_network_is_zero() {
        let g = build_dihedral(3).unwrap();
        let dspec = DnnSpec::new(vec![2, 3, 1]).unwrap();
        let dparams = DnnParams::zeros(&dspec);
        let (spec, params, basis) = lift_dnn_to_gcnn(&dspec, &dparams, &g).unwrap();
        let f = Signal::new(vec![vec![1.0; 6], vec![-2.0; 6]]);
        assert_eq!(gcnn_forward(&spec, &params, &basis, &g, &f).unwrap(), 0.0);
    }

    #[test]
    fn lifted_indicator_counts_elements_in_window() {
        let g = build_cyclic(4).unwrap();
        let (dspec, dparams) = indicator_net(0.0, 1.0, 0.5).unwrap();
        let (spec, params, basis) = lift_dnn_to_gcnn(&dspec, &dparams, &g).unwrap();
        let f = Signal::new(vec![vec![0.5; 4]]);
        assert_eq!(gcnn_forward(&spec, &params, &basis, &g, &f).unwrap(), 4.0);
    }

    #[test]
    fn lift_equality_against_double_loop() {
        let g = build_dihedral(3).unwrap();
        let dspec = DnnSpec::new(vec![1, 3, 2]).unwrap();
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..25 {
            let mut dparams = DnnParams::zeros(&dspec);
            for layer in dparams.layers.iter_mut() {
                for row in layer.weight.iter_mut() {
                    for w in row.iter_mut() {
                        *w = rng.gen_range(-1.0..1.0);
                    }
                }
                for b in layer.bias.iter_mut() {
                    *b = rng.gen_range(-1.0..1.0);
                }
            }
            let f = Signal::new(vec![(0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()]);
            let (spec, params, basis) = lift_dnn_to_gcnn(&dspec, &dparams, &g).unwrap();
            let lifted = gcnn_forward(&spec, &params, &basis, &g, &f).unwrap();
            // literal double sum, dense code path only
            let mut oracle = 0.0;
            let outputs: Vec<Vec<f64>> = (0..g.r)
                .map(|j| dnn_forward(&dspec, &dparams, &[f.values[0][j]]).unwrap())
                .collect();
            for i in 0..2 {
                for j in 0..g.r {
                    oracle += outputs[j][i];
                }
            }
            let scale = 1.0 + lifted.abs().max(oracle.abs());
            assert!((lifted - oracle).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn subset_index_examples() {
        assert_eq!(subset_index(1, 3).unwrap(), Vec::<usize>::new());
        assert_eq!(subset_index(4, 3).unwrap(), vec![1, 2]);
        assert!(subset_index(0, 3).is_err());
        assert!(subset_index(9, 3).is_err());
    }

    #[test]
    fn subset_index_is_bijective() {
        for m in 1..=10usize {
            let mut seen = std::collections::HashSet::new();
            for i in 1..=(1usize << m) {
                let s = subset_index(i, m).unwrap();
                assert!(s.iter().all(|&e| e >= 1 && e <= m));
                assert!(seen.insert(s), "duplicate subset at i = {i}");
            }
            assert_eq!(seen.len(), 1 << m);
        }
    }

    #[test]
    fn window_instance_r4_unit_interval() {
        let g = build_cyclic(4).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 1.0).unwrap();
        assert_eq!(inst.m, 2);
        assert_eq!(inst.classifiers.len(), 4);
        assert_eq!(inst.threshold, 0.5);
        let delta = 1.0 / 12.0;
        // f_1 = (filler, y_2, filler, y_4), f_2 = (filler, filler, y_3, y_4)
        let f1 = &inst.functions[0].values[0];
        let filler = 1.0 - delta;
        assert!((f1[0] - filler).abs() < 1e-15);
        assert!((f1[1] - 2.0 * delta).abs() < 1e-15);
        assert!((f1[2] - filler).abs() < 1e-15);
        assert!((f1[3] - 4.0 * delta).abs() < 1e-15);
        let f2 = &inst.functions[1].values[0];
        assert!((f2[2] - 3.0 * delta).abs() < 1e-15);
        assert!((f2[0] - filler).abs() < 1e-15);

        // h_2 (positive set {1}, mask 0b01) fires on f_1, h_1 (empty set,
        // mask 0) does not.
        let h2 = gcnn_forward(&inst.network_spec, &inst.classifiers[0b01], &inst.basis, &g, &inst.functions[0]).unwrap();
        assert!((h2 - 1.0).abs() < 1e-12);
        let h1 = gcnn_forward(&inst.network_spec, &inst.classifiers[0b00], &inst.basis, &g, &inst.functions[0]).unwrap();
        assert!(h1.abs() < 1e-12);
    }

    #[test]
    fn window_vanishes_at_neighbor_points() {
        // Dyadic spacing: with B - A = 2(d+2) the step is exactly 1 and the
        // bump evaluates to exactly 0 at the neighboring points.
        let g = build_cyclic(8).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 20.0).unwrap();
        let block = window_block(8, 0.0, 20.0).unwrap();
        assert_eq!(block.delta, 1.0);
        for (i, &y) in block.points.iter().enumerate() {
            let v_lo = indicator_value(y - 0.5, y + 0.5, 0.5, y - 1.0);
            let v_hi = indicator_value(y - 0.5, y + 0.5, 0.5, y + 1.0);
            assert_eq!(v_lo, 0.0, "window {i} lower neighbor");
            assert_eq!(v_hi, 0.0, "window {i} upper neighbor");
        }
        drop(inst);
        // Non-dyadic spacing stays within brute-force tolerance.
        let block = window_block(4, 0.0, 1.0).unwrap();
        for &y in &block.points {
            let eps = block.delta / 2.0;
            let v = indicator_value(y - eps, y + eps, eps, y + block.delta);
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn window_instance_rejections() {
        let g1 = build_cyclic(1).unwrap();
        assert!(matches!(build_shatter_instance(&g1, 0.0, 1.0), Err(Error::InvalidArgument(_))));
        let g = build_cyclic(4).unwrap();
        assert!(build_shatter_instance(&g, 1.0, 0.0).is_err());
        assert!(build_shatter_instance(&g, 0.0, 0.0).is_err());
        let grid = build_grid_translation(2, 2).unwrap();
        assert!(matches!(
            build_shatter_instance(&grid, 0.0, 1.0),
            Err(Error::UnsupportedOperation(_))
        ));
    }

    #[test]
    fn window_family_varies_in_four_biases() {
        let g = build_cyclic(8).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 1.0).unwrap();
        assert_eq!(count_varying_parameters(&inst.classifiers), 4);
        assert_eq!(inst.budget_weights, 4);
        assert_eq!(inst.network_spec.widths, vec![1, 4, 1]);
    }

    #[test]
    fn composite_single_block_matches_plain_instance() {
        let g = build_cyclic(8).unwrap();
        let composite = build_composite_instance(&g, 1).unwrap();
        let m = 3.0;
        let plain = build_shatter_instance(&g, 2.0 * m + 5.0, 3.0 * m + 7.0).unwrap();
        assert_eq!(composite.functions, plain.functions);
        assert_eq!(composite.classifiers, plain.classifiers);
        assert_eq!(composite.threshold, plain.threshold);
        assert_eq!(composite.network_spec, plain.network_spec);
    }

    #[test]
    fn composite_shapes() {
        let g = build_cyclic(4).unwrap();
        let inst = build_composite_instance(&g, 2).unwrap();
        assert_eq!(inst.m, 4);
        assert_eq!(inst.classifiers.len(), 16);
        assert_eq!(inst.network_spec.widths, vec![1, 8, 1]);
        assert_eq!(inst.budget_weights, 8);
        assert_eq!(count_varying_parameters(&inst.classifiers), 8);
        assert!(build_composite_instance(&g, 0).is_err());
    }

    #[test]
    fn composite_blocks_are_isolated_exactly() {
        // r = 8 gives dyadic window spacing, so the cancellation of the four
        // ramps on foreign blocks is exact in floating point.
        let g = build_cyclic(8).unwrap();
        let composite = build_composite_instance(&g, 2).unwrap();
        let Provenance::BlockWindows { intervals, .. } = &composite.provenance else {
            panic!("composite provenance expected");
        };
        for (bi, iv) in intervals.iter().enumerate() {
            let single = build_shatter_instance(&g, iv[0], iv[1]).unwrap();
            for (bj, funcs) in composite.functions.chunks(3).enumerate() {
                if bi == bj {
                    continue;
                }
                for f in funcs {
                    for params in &single.classifiers {
                        let v = gcnn_forward(&single.network_spec, params, &single.basis, &g, f).unwrap();
                        assert_eq!(v, 0.0, "block {bi} classifier leaked onto block {bj}");
                    }
                }
            }
        }
    }

    fn scalar_net(w: &[f64], c: f64) -> ThresholdedDnn {
        let m0 = w.len();
        let spec = DnnSpec::new(vec![m0, 1]).unwrap();
        let params = DnnParams {
            layers: vec![DenseLayer { weight: vec![w.to_vec()], bias: vec![c] }],
        };
        ThresholdedDnn { spec, params, threshold: 0.5 }
    }

    /// Four threshold nets realizing the four labelings of {-0.5, 0.5}.
    fn line_family() -> (Vec<Vec<f64>>, Vec<ThresholdedDnn>) {
        let points = vec![vec![-0.5], vec![0.5]];
        let nets = vec![
            scalar_net(&[0.0], 0.0),  // relu(0) = 0: both negative
            scalar_net(&[0.0], -1.0), // relu(1) = 1: both positive
            scalar_net(&[-1.0], -0.25), // fires on -0.5 only
            scalar_net(&[1.0], -0.25),  // fires on +0.5 only
        ];
        (points, nets)
    }

    #[test]
    fn hypercube_lift_basics() {
        let g = build_cyclic(4).unwrap();
        let (points, nets) = line_family();
        let inst = build_hypercube_lift(&points, &nets, &g, 2.0, 4.0).unwrap();
        assert_eq!(inst.m, 2);
        assert_eq!(inst.classifiers.len(), 4);
        assert_eq!(inst.threshold, 0.0);
        assert_eq!(inst.budget_depth, 3);
        // base nets have 2 parameters, so the class budget is 12
        assert_eq!(inst.budget_weights, 12);
        // functions: base point at the identity, box center elsewhere
        assert_eq!(inst.functions[0].values[0][g.identity], -0.5);
        assert_eq!(inst.functions[0].values[0][1], 3.0);

        // every labeling realized with the right signs
        for mask in 0..4usize {
            for (t, f) in inst.functions.iter().enumerate() {
                let v = gcnn_forward(&inst.network_spec, &inst.classifiers[mask], &inst.basis, &g, f).unwrap();
                let positive = (mask >> t) & 1 == 1;
                assert_eq!(v > inst.threshold, positive, "mask {mask} function {t}");
            }
        }
    }

    #[test]
    fn hypercube_lift_zero_on_box_valued_signals() {
        let g = build_dihedral(3).unwrap();
        let (points, nets) = line_family();
        let inst = build_hypercube_lift(&points, &nets, &g, 2.0, 4.0).unwrap();
        let mut rng = crate::rng::stream(5, 1);
        for _ in 0..50 {
            let f = Signal::new(vec![(0..g.r).map(|_| rng.gen_range(2.0..4.0)).collect()]);
            for params in &inst.classifiers {
                let v = gcnn_forward(&inst.network_spec, params, &inst.basis, &g, &f).unwrap();
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn hypercube_lift_preconditions() {
        let g = build_cyclic(4).unwrap();
        let (points, nets) = line_family();
        // A too small: must exceed max norm + 1 = 1.5
        assert!(build_hypercube_lift(&points, &nets, &g, 1.2, 4.0).is_err());
        // B <= A
        assert!(build_hypercube_lift(&points, &nets, &g, 2.0, 2.0).is_err());
        // family that cannot realize all labelings
        let partial = vec![scalar_net(&[0.0], 0.0), scalar_net(&[0.0], -1.0)];
        let err = build_hypercube_lift(&points, &partial, &g, 2.0, 4.0);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        // empty inputs
        assert!(build_hypercube_lift(&[], &nets, &g, 2.0, 4.0).is_err());
        assert!(build_hypercube_lift(&points, &[], &g, 2.0, 4.0).is_err());
    }

    #[test]
    fn hypercube_lift_pads_deep_bases() {
        // depth-3 base stack forces identity padding of the gate stack
        let g = build_cyclic(4).unwrap();
        let spec = DnnSpec::new(vec![1, 2, 2, 1]).unwrap();
        let mk = |w: f64, b_hidden: f64, b_out: f64| {
            let params = DnnParams {
                layers: vec![
                    DenseLayer { weight: vec![vec![w], vec![0.0]], bias: vec![b_hidden, 0.0] },
                    DenseLayer { weight: vec![vec![1.0, 0.0], vec![0.0, 1.0]], bias: vec![0.0, 0.0] },
                    DenseLayer { weight: vec![vec![1.0, 0.0]], bias: vec![b_out] },
                ],
            };
            ThresholdedDnn { spec: spec.clone(), params, threshold: 0.5 }
        };
        let points = vec![vec![-0.5], vec![0.5]];
        let nets = vec![
            mk(0.0, 0.0, 0.0),     // constant 0: both negative
            mk(0.0, 0.0, -1.0),    // constant 1: both positive
            mk(-1.0, -0.25, 0.0),  // relu(-x + 0.25): 0.75 at -0.5, 0 at +0.5
            mk(1.0, -0.25, 0.0),   // relu(x + 0.25): 0 at -0.5, 0.75 at +0.5
        ];
        let inst = build_hypercube_lift(&points, &nets, &g, 2.0, 4.0).unwrap();
        assert_eq!(inst.budget_depth, 4);
        assert_eq!(inst.network_spec.widths, vec![1, 6, 3, 2, 1]);
        for mask in 0..4usize {
            for (t, f) in inst.functions.iter().enumerate() {
                let v = gcnn_forward(&inst.network_spec, &inst.classifiers[mask], &inst.basis, &g, f).unwrap();
                assert_eq!(v > inst.threshold, (mask >> t) & 1 == 1, "mask {mask} fn {t}");
            }
        }
    }

    #[test]
    fn instance_serialization_round_trip() {
        let g = build_cyclic(4).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 1.0).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        let back: ShatterInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(inst, back);
    }
}
