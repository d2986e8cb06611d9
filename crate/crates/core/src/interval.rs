//! Interval propagation through dense relu networks.
//!
//! Used to certify an upper bound on `|h(y)|` over a box of inputs. The
//! propagation mirrors the exact computation order of
//! [`dnn_forward`](crate::network::dnn_forward): because rounding to nearest
//! is monotone, evaluating the same expression tree on any point of the box
//! in `f64` can never exceed the `f64`-evaluated endpoint bounds.

use crate::error::{Error, Result};
use crate::network::{DnnParams, DnnSpec};

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::invalid(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    fn scale(self, w: f64) -> Interval {
        if w >= 0.0 {
            Interval { lo: w * self.lo, hi: w * self.hi }
        } else {
            Interval { lo: w * self.hi, hi: w * self.lo }
        }
    }

    fn add(self, other: Interval) -> Interval {
        Interval { lo: self.lo + other.lo, hi: self.hi + other.hi }
    }

    fn sub_scalar(self, b: f64) -> Interval {
        Interval { lo: self.lo - b, hi: self.hi - b }
    }

    fn relu(self) -> Interval {
        Interval { lo: self.lo.max(0.0), hi: self.hi.max(0.0) }
    }

    /// Largest magnitude the interval contains.
    pub fn abs_max(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Propagates an input box through the network layer by layer, returning an
/// enclosure of each output unit.
pub fn dnn_output_range(spec: &DnnSpec, params: &DnnParams, input: &[Interval]) -> Result<Vec<Interval>> {
    spec.check()?;
    params.check_shape(spec)?;
    if input.len() != spec.widths[0] {
        return Err(Error::invalid(format!(
            "input box has {} entries, expected {}",
            input.len(),
            spec.widths[0]
        )));
    }
    let mut z: Vec<Interval> = input.to_vec();
    for layer in &params.layers {
        let mut next = Vec::with_capacity(layer.bias.len());
        for (row, &b) in layer.weight.iter().zip(&layer.bias) {
            let mut acc = Interval::point(0.0);
            for (&w, zi) in row.iter().zip(&z) {
                acc = acc.add(zi.scale(w));
            }
            next.push(acc.sub_scalar(b).relu());
        }
        z = next;
    }
    Ok(z)
}
