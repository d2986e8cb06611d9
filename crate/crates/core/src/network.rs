//! Forward passes and parameter counts for group-convolutional networks and
//! their dense counterparts.
//!
//! A GCNN layer maps an `m_ℓ`-channel signal to an `m_{ℓ+1}`-channel signal:
//!
//! ```text
//! h_{ℓ+1, j} = relu( Σ_i K_{w_ij} * h_{ℓ, i}  -  b_j )
//! ```
//!
//! where every kernel is a `k`-weight combination of a shared basis. The
//! network output pools the last layer with a plain double sum
//! `Σ_i Σ_g h_{L,i}(g)`, no averaging.
//!
//! Dense networks use the same conventions (bias subtracted, relu applied at
//! every layer including the last) so that a dense network lifted to a GCNN
//! evaluates identically, summand for summand.
//!
//! Accumulation orders are fixed: input channels ascending inside a unit,
//! channels-then-elements in the pooling sum. Reports built on these passes
//! are byte-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::DiscretizedGroup;
use crate::signal::{combine_kernel, correlate_combined, KernelBasis, Signal};

/// Architecture of a GCNN class: kernel dimension `k`, channel widths
/// `m_0, .., m_L`, and the resolution `r` of the group it runs on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcnnSpec {
    pub k: usize,
    pub widths: Vec<usize>,
    pub r: usize,
}

impl GcnnSpec {
    pub fn new(k: usize, widths: Vec<usize>, r: usize) -> Result<Self> {
        let spec = GcnnSpec { k, widths, r };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("kernel dimension k must be at least 1"));
        }
        if self.widths.len() < 2 {
            return Err(Error::invalid("a network needs at least one layer (two width entries)"));
        }
        if self.widths.iter().any(|&m| m == 0) {
            return Err(Error::invalid("channel widths must be positive"));
        }
        if self.r == 0 {
            return Err(Error::invalid("resolution r must be positive"));
        }
        Ok(())
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }
}

/// Architecture of a dense relu network: widths `m_0, .., m_L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnnSpec {
    pub widths: Vec<usize>,
}

impl DnnSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        let spec = DnnSpec { widths };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::invalid("a network needs at least one layer (two width entries)"));
        }
        if self.widths.iter().any(|&m| m == 0) {
            return Err(Error::invalid("widths must be positive"));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }
}

/// One GCNN layer: `weight[j][i]` is the `k`-vector of kernel weights from
/// input channel `i` to output channel `j`, `bias[j]` is subtracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnnLayer {
    pub weight: Vec<Vec<Vec<f64>>>,
    pub bias: Vec<f64>,
}

/// All layer parameters of a GCNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnnParams {
    pub layers: Vec<GcnnLayer>,
}

impl GcnnParams {
    /// All-zero parameters for the given architecture.
    pub fn zeros(spec: &GcnnSpec) -> Self {
        let layers = (1..spec.widths.len())
            .map(|l| GcnnLayer {
                weight: vec![vec![vec![0.0; spec.k]; spec.widths[l - 1]]; spec.widths[l]],
                bias: vec![0.0; spec.widths[l]],
            })
            .collect();
        GcnnParams { layers }
    }

    pub fn check_shape(&self, spec: &GcnnSpec) -> Result<()> {
        if self.layers.len() != spec.depth() {
            return Err(Error::invalid(format!(
                "params have {} layers, spec has {}",
                self.layers.len(),
                spec.depth()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (m_in, m_out) = (spec.widths[l], spec.widths[l + 1]);
            if layer.weight.len() != m_out || layer.bias.len() != m_out {
                return Err(Error::invalid(format!("layer {} has wrong output width", l + 1)));
            }
            for row in &layer.weight {
                if row.len() != m_in || row.iter().any(|w| w.len() != spec.k) {
                    return Err(Error::invalid(format!("layer {} has wrong weight shape", l + 1)));
                }
            }
        }
        Ok(())
    }
}

/// One dense layer: `weight[j][i]` from input `i` to unit `j`, bias
/// subtracted before the relu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// All layer parameters of a dense relu network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnParams {
    pub layers: Vec<DenseLayer>,
}

impl DnnParams {
    pub fn zeros(spec: &DnnSpec) -> Self {
        let layers = (1..spec.widths.len())
            .map(|l| DenseLayer {
                weight: vec![vec![0.0; spec.widths[l - 1]]; spec.widths[l]],
                bias: vec![0.0; spec.widths[l]],
            })
            .collect();
        DnnParams { layers }
    }

    pub fn check_shape(&self, spec: &DnnSpec) -> Result<()> {
        if self.layers.len() != spec.depth() {
            return Err(Error::invalid(format!(
                "params have {} layers, spec has {}",
                self.layers.len(),
                spec.depth()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (m_in, m_out) = (spec.widths[l], spec.widths[l + 1]);
            if layer.weight.len() != m_out
                || layer.bias.len() != m_out
                || layer.weight.iter().any(|row| row.len() != m_in)
            {
                return Err(Error::invalid(format!("dense layer {} has wrong shape", l + 1)));
            }
        }
        Ok(())
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn check_gcnn_inputs(
    spec: &GcnnSpec,
    params: &GcnnParams,
    basis: &KernelBasis,
    g: &DiscretizedGroup,
    f: &Signal,
) -> Result<()> {
    spec.check()?;
    params.check_shape(spec)?;
    basis.check_shape(g)?;
    if basis.k() != spec.k {
        return Err(Error::invalid(format!("basis has k = {}, spec has k = {}", basis.k(), spec.k)));
    }
    if g.r != spec.r {
        return Err(Error::invalid(format!("group has r = {}, spec has r = {}", g.r, spec.r)));
    }
    f.check_shape(spec.widths[0], g.r)
}

/// Runs every layer and returns the post-relu feature maps, one
/// `m_ℓ × r` table per layer `ℓ = 1, .., L`.
pub fn gcnn_feature_maps(
    spec: &GcnnSpec,
    params: &GcnnParams,
    basis: &KernelBasis,
    g: &DiscretizedGroup,
    f: &Signal,
) -> Result<Vec<Vec<Vec<f64>>>> {
    check_gcnn_inputs(spec, params, basis, g, f)?;
    let mut maps = Vec::with_capacity(spec.depth());
    let mut current: Vec<Vec<f64>> = f.values.clone();
    for layer in &params.layers {
        let m_out = layer.bias.len();
        let mut next = Vec::with_capacity(m_out);
        for j in 0..m_out {
            let mut acc = vec![0.0; g.r];
            for (i, h_i) in current.iter().enumerate() {
                let kw = combine_kernel(basis, &layer.weight[j][i])?;
                let corr = correlate_combined(g, &kw, h_i);
                for (a, c) in acc.iter_mut().zip(&corr) {
                    *a += c;
                }
            }
            let b = layer.bias[j];
            for a in acc.iter_mut() {
                *a = relu(*a - b);
            }
            next.push(acc);
        }
        maps.push(next.clone());
        current = next;
    }
    Ok(maps)
}

/// Full forward pass: all layers, then the invariant pooling sum
/// `Σ_channels Σ_elements` over the last feature map.
pub fn gcnn_forward(
    spec: &GcnnSpec,
    params: &GcnnParams,
    basis: &KernelBasis,
    g: &DiscretizedGroup,
    f: &Signal,
) -> Result<f64> {
    let maps = gcnn_feature_maps(spec, params, basis, g, f)?;
    let last = maps.last().expect("at least one layer");
    let mut acc = 0.0;
    for channel in last {
        for &v in channel {
            acc += v;
        }
    }
    Ok(acc)
}

/// Dense forward pass: `z_ℓ = relu(W_ℓ z_{ℓ-1} - b_ℓ)` for every layer,
/// returning the final `m_L`-vector (relu applied there too).
pub fn dnn_forward(spec: &DnnSpec, params: &DnnParams, x: &[f64]) -> Result<Vec<f64>> {
    spec.check()?;
    params.check_shape(spec)?;
    if x.len() != spec.widths[0] {
        return Err(Error::invalid(format!(
            "input has {} entries, expected {}",
            x.len(),
            spec.widths[0]
        )));
    }
    let mut z = x.to_vec();
    for layer in &params.layers {
        let mut next = Vec::with_capacity(layer.bias.len());
        for (row, &b) in layer.weight.iter().zip(&layer.bias) {
            let mut acc = 0.0;
            for (w, zi) in row.iter().zip(&z) {
                acc += w * zi;
            }
            next.push(relu(acc - b));
        }
        z = next;
    }
    Ok(z)
}

/// Cumulative GCNN parameter counts: entry `ℓ-1` is
/// `W_ℓ = Σ_{j<=ℓ} m_j (k m_{j-1} + 1)`, kernel weights plus biases of the
/// first `ℓ` layers.
pub fn count_gcnn_weights(spec: &GcnnSpec) -> Result<Vec<u64>> {
    spec.check()?;
    let mut out = Vec::with_capacity(spec.depth());
    let mut acc = 0u64;
    for l in 1..spec.widths.len() {
        let (m_prev, m) = (spec.widths[l - 1] as u64, spec.widths[l] as u64);
        acc += m * (spec.k as u64 * m_prev + 1);
        out.push(acc);
    }
    Ok(out)
}

/// Cumulative dense parameter counts: entry `ℓ-1` is
/// `Σ_{j<=ℓ} m_j (m_{j-1} + 1)`.
pub fn count_dnn_weights(spec: &DnnSpec) -> Result<Vec<u64>> {
    spec.check()?;
    let mut out = Vec::with_capacity(spec.depth());
    let mut acc = 0u64;
    for l in 1..spec.widths.len() {
        let (m_prev, m) = (spec.widths[l - 1] as u64, spec.widths[l] as u64);
        acc += m * (m_prev + 1);
        out.push(acc);
    }
    Ok(out)
}

/// Seeded GCNN parameters drawn uniformly from `[-scale, scale)`.
///
/// Draw order is part of the stable report contract: layers in depth order;
/// within a layer all kernel weights in `[j][i][s]` lexicographic order,
/// then the biases in `j` order.
pub fn random_gcnn_params<R: rand::Rng>(spec: &GcnnSpec, rng: &mut R, scale: f64) -> Result<GcnnParams> {
    spec.check()?;
    if !(scale > 0.0) {
        return Err(Error::invalid(format!("init scale must be positive, got {scale}")));
    }
    let mut params = GcnnParams::zeros(spec);
    for layer in params.layers.iter_mut() {
        for row in layer.weight.iter_mut() {
            for ws in row.iter_mut() {
                for w in ws.iter_mut() {
                    *w = rng.gen_range(-scale..scale);
                }
            }
        }
        for b in layer.bias.iter_mut() {
            *b = rng.gen_range(-scale..scale);
        }
    }
    Ok(params)
}

/// Seeded dense parameters; same contract as [`random_gcnn_params`] with
/// `[j][i]` weight order.
pub fn random_dnn_params<R: rand::Rng>(spec: &DnnSpec, rng: &mut R, scale: f64) -> Result<DnnParams> {
    spec.check()?;
    if !(scale > 0.0) {
        return Err(Error::invalid(format!("init scale must be positive, got {scale}")));
    }
    let mut params = DnnParams::zeros(spec);
    for layer in params.layers.iter_mut() {
        for row in layer.weight.iter_mut() {
            for w in row.iter_mut() {
                *w = rng.gen_range(-scale..scale);
            }
        }
        for b in layer.bias.iter_mut() {
            *b = rng.gen_range(-scale..scale);
        }
    }
    Ok(params)
}
