//! Signals on a discretized group, kernel bases on its difference domain,
//! and the exact correlation between them.
//!
//! A signal is a channel-major table of values on the element index set.
//! A kernel basis is a set of `k` functions on the difference domain `D`;
//! a concrete kernel is the linear combination `K_w = Σ_s w_s K_s`. The
//! correlation is the plain discrete sum
//!
//! ```text
//! (K_w * f)(g_i) = Σ_j K_w(g_i^{-1} ∘ g_j) · f(g_j)
//! ```
//!
//! with no `1/|G|` normalization; it equals `r` times the group-averaged
//! convolution, which changes none of the sign patterns downstream.
//!
//! Summation order matters for reproducibility. For closed groups the inner
//! sum runs in *difference order*: `j` is recovered as `compose(i, d)` for
//! `d = 0, 1, ..`. Acting on the signal by a group element then permutes the
//! summands of the output at `π(i)` into exactly the same positions, so
//! equivariance holds bitwise, not just approximately.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{left_action_permutation, DiscretizedGroup};

/// Channel-major value table: `values[c][j]` is channel `c` at element `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub values: Vec<Vec<f64>>,
}

impl Signal {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        Signal { values }
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }

    /// Checks the table is rectangular with `channels` rows of length `r`.
    pub fn check_shape(&self, channels: usize, r: usize) -> Result<()> {
        if self.values.len() != channels {
            return Err(Error::invalid(format!(
                "signal has {} channels, expected {channels}",
                self.values.len()
            )));
        }
        for (c, row) in self.values.iter().enumerate() {
            if row.len() != r {
                return Err(Error::invalid(format!(
                    "signal channel {c} has {} entries, expected r = {r}",
                    row.len()
                )));
            }
        }
        Ok(())
    }
}

/// `k` basis kernels tabulated on the difference domain:
/// `values[s][d]` is the s-th basis function at difference `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBasis {
    pub values: Vec<Vec<f64>>,
}

impl KernelBasis {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        KernelBasis { values }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn check_shape(&self, g: &DiscretizedGroup) -> Result<()> {
        for (s, row) in self.values.iter().enumerate() {
            if row.len() != g.diff_count {
                return Err(Error::invalid(format!(
                    "basis kernel {s} has {} entries, expected diff_count = {}",
                    row.len(),
                    g.diff_count
                )));
            }
        }
        Ok(())
    }
}

/// The one-dimensional basis whose single kernel is the indicator of the
/// identity difference; correlating with weight 1 reproduces the signal.
pub fn identity_indicator_basis(g: &DiscretizedGroup) -> KernelBasis {
    let mut row = vec![0.0; g.diff_count];
    row[g.identity_diff] = 1.0;
    KernelBasis { values: vec![row] }
}

/// Basis of `s × s` one-hot window kernels on a translation grid, indexed
/// row-major over offsets `(dy, dx) ∈ [-(s-1)/2, (s-1)/2]^2`. Correlating
/// with weights `w` reproduces the usual zero-padded cross-correlation
/// stencil `out(p) = Σ_{dy,dx} w[dy][dx] · f(p + (dy,dx))`.
pub fn cnn_window_basis(g: &DiscretizedGroup, s: usize) -> Result<KernelBasis> {
    let (height, width) = match g.descriptor {
        crate::group::GroupDescriptor::Grid { height, width } => (height, width),
        _ => return Err(Error::invalid("window bases are defined on translation grids")),
    };
    if s % 2 == 0 || s == 0 {
        return Err(Error::invalid(format!("window size must be odd, got {s}")));
    }
    let h = s / 2;
    if s > 2 * height.min(width) - 1 {
        return Err(Error::invalid(format!(
            "window size {s} exceeds the offset extent of a {height}x{width} grid"
        )));
    }
    let offset_index =
        |dy: isize, dx: isize| ((dy + height as isize - 1) as usize) * (2 * width - 1) + (dx + width as isize - 1) as usize;
    let mut values = Vec::with_capacity(s * s);
    for dy in -(h as isize)..=h as isize {
        for dx in -(h as isize)..=h as isize {
            let mut row = vec![0.0; g.diff_count];
            row[offset_index(dy, dx)] = 1.0;
            values.push(row);
        }
    }
    Ok(KernelBasis { values })
}

/// Materializes `K_w(d) = Σ_s w_s · K_s(d)` on the difference domain.
pub(crate) fn combine_kernel(basis: &KernelBasis, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != basis.k() {
        return Err(Error::invalid(format!(
            "kernel has {} weights, basis has k = {}",
            w.len(),
            basis.k()
        )));
    }
    let diff_count = basis.values.first().map_or(0, |r| r.len());
    let mut kw = vec![0.0; diff_count];
    for (ws, row) in w.iter().zip(&basis.values) {
        for (acc, v) in kw.iter_mut().zip(row) {
            *acc += ws * v;
        }
    }
    Ok(kw)
}

pub(crate) fn correlate_combined(g: &DiscretizedGroup, kw: &[f64], f: &[f64]) -> Vec<f64> {
    let r = g.r;
    let mut out = vec![0.0; r];
    if let Some(compose) = g.compose_table.as_ref() {
        // Closed: for fixed i, d ↦ j = g_i ∘ d is a bijection, so summing in
        // difference order visits each term once and keeps the order stable
        // under relabeling by a left action.
        for i in 0..r {
            let row = &compose[i];
            let mut acc = 0.0;
            for (d, &kwd) in kw.iter().enumerate() {
                acc += kwd * f[row[d]];
            }
            out[i] = acc;
        }
    } else {
        for i in 0..r {
            let diffs = &g.diff_table[i];
            let mut acc = 0.0;
            for (j, &fj) in f.iter().enumerate() {
                acc += kw[diffs[j]] * fj;
            }
            out[i] = acc;
        }
    }
    out
}

/// Correlation of a single-channel signal with the kernel `K_w`:
/// `out[i] = Σ_j K_w(diff(i, j)) · f[j]`, an exact discrete sum.
pub fn g_correlate(g: &DiscretizedGroup, basis: &KernelBasis, w: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    basis.check_shape(g)?;
    if f.len() != g.r {
        return Err(Error::invalid(format!("signal has {} entries, expected r = {}", f.len(), g.r)));
    }
    let kw = combine_kernel(basis, w)?;
    Ok(correlate_combined(g, &kw, f))
}

/// Acts on a signal by a group element: `(g_elem ∘ f)[c][j] = f[c][π(j)]`
/// with `π` from [`left_action_permutation`]. Closed groups only.
pub fn apply_left_action(g: &DiscretizedGroup, elem: usize, f: &Signal) -> Result<Signal> {
    let pi = left_action_permutation(g, elem)?;
    f.check_shape(f.channels(), g.r)?;
    let values = f
        .values
        .iter()
        .map(|row| pi.iter().map(|&p| row[p]).collect())
        .collect();
    Ok(Signal { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_cyclic, build_dihedral, build_grid_translation};

    #[test]
    fn identity_kernel_reproduces_signal() {
        let g = build_cyclic(6).unwrap();
        let basis = identity_indicator_basis(&g);
        let f: Vec<f64> = vec![3.0, -1.0, 4.0, -1.0, 5.0, -9.0];
        let out = g_correlate(&g, &basis, &[1.0], &f).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let g = build_dihedral(3).unwrap();
        let basis = identity_indicator_basis(&g);
        let f = vec![1.0; 6];
        let out = g_correlate(&g, &basis, &[0.0], &f).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shift_kernel_on_cyclic_three() {
        // Indicator of element 1 correlated with (1, 2, 3): out(i) = f(i+1).
        let g = build_cyclic(3).unwrap();
        let mut row = vec![0.0; 3];
        row[1] = 1.0;
        let basis = KernelBasis::new(vec![row]);
        let out = g_correlate(&g, &basis, &[1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn correlation_is_linear_in_weights() {
        let g = build_cyclic(5).unwrap();
        let basis = KernelBasis::new(vec![
            vec![0.5, -1.0, 2.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0, -2.0, 0.25],
        ]);
        let f = vec![1.0, -2.0, 0.5, 4.0, -1.25];
        let a = g_correlate(&g, &basis, &[2.0, 0.0], &f).unwrap();
        let b = g_correlate(&g, &basis, &[0.0, -3.0], &f).unwrap();
        let both = g_correlate(&g, &basis, &[2.0, -3.0], &f).unwrap();
        for i in 0..5 {
            assert!((both[i] - (a[i] + b[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_basis_row_layout() {
        let g = build_cyclic(4).unwrap();
        let basis = identity_indicator_basis(&g);
        assert_eq!(basis.values, vec![vec![1.0, 0.0, 0.0, 0.0]]);
        let f = vec![0.5, 1.5, -2.5, 3.5];
        assert_eq!(g_correlate(&g, &basis, &[2.0], &f).unwrap(), vec![1.0, 3.0, -5.0, 7.0]);
    }

    #[test]
    fn left_action_examples() {
        let g = build_cyclic(4).unwrap();
        let f = Signal::new(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let id = apply_left_action(&g, 0, &f).unwrap();
        assert_eq!(id, f);
        let acted = apply_left_action(&g, 1, &f).unwrap();
        assert_eq!(acted.values[0], vec![4.0, 1.0, 2.0, 3.0]);
        // acting by the inverse undoes the action
        let back = apply_left_action(&g, g.inverse(1).unwrap(), &acted).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn left_action_rejects_grid() {
        let g = build_grid_translation(2, 2).unwrap();
        let f = Signal::new(vec![vec![0.0; 4]]);
        assert!(apply_left_action(&g, 0, &f).is_err());
    }

    #[test]
    fn window_basis_shapes() {
        let g = build_grid_translation(28, 28).unwrap();
        assert_eq!(cnn_window_basis(&g, 3).unwrap().k(), 9);
        assert!(cnn_window_basis(&g, 2).is_err());
        let tiny = build_grid_translation(2, 2).unwrap();
        assert!(cnn_window_basis(&tiny, 5).is_err());
    }

    #[test]
    fn window_basis_size_one_is_identity() {
        let g = build_grid_translation(3, 3).unwrap();
        let w1 = cnn_window_basis(&g, 1).unwrap();
        assert_eq!(w1, identity_indicator_basis(&g));
    }

    #[test]
    fn window_correlation_matches_2d_stencil() {
        // 5x5 one-hot image, 3x3 window with weights 1..9: compare against a
        // direct two-dimensional zero-padded cross-correlation.
        let (h, w) = (5usize, 5usize);
        let g = build_grid_translation(h, w).unwrap();
        let basis = cnn_window_basis(&g, 3).unwrap();
        let weights: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let mut f = vec![0.0; h * w];
        f[2 * w + 1] = 1.0; // hot pixel at (2, 1)
        let out = g_correlate(&g, &basis, &weights, &f).unwrap();

        let mut oracle = vec![0.0; h * w];
        for row in 0..h as isize {
            for col in 0..w as isize {
                let mut acc = 0.0;
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (rr, cc) = (row + dy, col + dx);
                        if rr >= 0 && rr < h as isize && cc >= 0 && cc < w as isize {
                            let wgt = weights[((dy + 1) * 3 + dx + 1) as usize];
                            acc += wgt * f[rr as usize * w + cc as usize];
                        }
                    }
                }
                oracle[row as usize * w + col as usize] = acc;
            }
        }
        assert_eq!(out, oracle);
    }

    #[test]
    fn correlation_shape_errors() {
        let g = build_cyclic(3).unwrap();
        let basis = identity_indicator_basis(&g);
        assert!(g_correlate(&g, &basis, &[1.0, 2.0], &[0.0; 3]).is_err());
        assert!(g_correlate(&g, &basis, &[1.0], &[0.0; 4]).is_err());
        let bad = KernelBasis::new(vec![vec![1.0, 0.0]]);
        assert!(g_correlate(&g, &bad, &[1.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn equivariance_is_exact_on_closed_groups() {
        // correlate(a ∘ f) = a ∘ correlate(f), bitwise, thanks to the
        // difference-ordered inner sum.
        let g = build_dihedral(4).unwrap();
        let basis = KernelBasis::new(vec![
            (0..8).map(|d| (d as f64) * 1.7 - 3.2).collect(),
            (0..8).map(|d| ((d * d) % 5) as f64 - 2.0).collect(),
        ]);
        let w = [0.37, -1.41];
        let f = Signal::new(vec![(0..8).map(|j| (j as f64) * 0.9 - 2.3).collect()]);
        for a in 0..g.r {
            let acted = apply_left_action(&g, a, &f).unwrap();
            let lhs = g_correlate(&g, &basis, &w, &acted.values[0]).unwrap();
            let rhs_sig = Signal::new(vec![g_correlate(&g, &basis, &w, &f.values[0]).unwrap()]);
            let rhs = apply_left_action(&g, a, &rhs_sig).unwrap();
            assert_eq!(lhs, rhs.values[0]);
        }
    }
}
