//! Finite discretized groups and grid translation sets.
//!
//! A *discretized group* is a finite index set `{0, .., r-1}` naming the
//! elements `g_0, .., g_{r-1}` of either
//!
//! * a genuine finite group (cyclic `Z_n`, dihedral `D_n`, direct products),
//!   where every difference `g_i^{-1} ∘ g_j` is again an element, or
//! * a translation grid (an `h × w` image lattice), which is *not* closed:
//!   the difference of two positions is an offset vector, of which there are
//!   `(2h-1)(2w-1)` rather than `h·w`.
//!
//! Both cases expose the same interface for correlation: a difference table
//! `diff_table[i][j]` giving the index of `g_i^{-1} ∘ g_j` inside a common
//! difference domain `D`. For closed groups `D` is the group itself; for
//! grids `D` is the set of coordinate offsets. Kernels live on `D`, signals
//! live on the element index set, and everything downstream (correlation,
//! network layers, lifts) is written against this table alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recipe for building a [`DiscretizedGroup`]; this is what serializes, the
/// tables themselves are reconstructed on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupDescriptor {
    Cyclic { n: usize },
    Dihedral { n: usize },
    Grid { height: usize, width: usize },
    Product { a: Box<GroupDescriptor>, b: Box<GroupDescriptor> },
}

impl GroupDescriptor {
    /// Builds the group this descriptor names.
    pub fn build(&self) -> Result<DiscretizedGroup> {
        match self {
            GroupDescriptor::Cyclic { n } => build_cyclic(*n),
            GroupDescriptor::Dihedral { n } => build_dihedral(*n),
            GroupDescriptor::Grid { height, width } => build_grid_translation(*height, *width),
            GroupDescriptor::Product { a, b } => build_product(&a.build()?, &b.build()?),
        }
    }
}

impl std::fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupDescriptor::Cyclic { n } => write!(f, "cyclic:{n}"),
            GroupDescriptor::Dihedral { n } => write!(f, "dihedral:{n}"),
            GroupDescriptor::Grid { height, width } => write!(f, "grid:{height}x{width}"),
            GroupDescriptor::Product { a, b } => write!(f, "product:({a},{b})"),
        }
    }
}

/// A finite group or grid translation set in fully tabulated form.
///
/// Element order is fixed by the builder and is part of the contract:
/// signals are vectors indexed by it, and serialized artifacts rely on it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedGroup {
    /// Number of elements (grid: number of positions).
    pub r: usize,
    /// Index of the identity element. For grids this is position `(0, 0)`;
    /// it is the anchor of the lift construction, not a group identity.
    pub identity: usize,
    /// Size of the difference domain `D`. Equals `r` when closed.
    pub diff_count: usize,
    /// `diff_table[i][j]` = index in `D` of `g_i^{-1} ∘ g_j`
    /// (grid: of the coordinate offset from position `i` to position `j`).
    pub diff_table: Vec<Vec<usize>>,
    /// Index in `D` of the identity difference, i.e. `diff_table[i][i]`.
    pub identity_diff: usize,
    /// Whether differences stay inside the element set.
    pub closed: bool,
    /// `compose_table[i][j]` = index of `g_i ∘ g_j`; closed groups only.
    pub compose_table: Option<Vec<Vec<usize>>>,
    /// `inverse_table[i]` = index of `g_i^{-1}`; closed groups only.
    pub inverse_table: Option<Vec<usize>>,
    /// The recipe that built this group.
    pub descriptor: GroupDescriptor,
}

impl Serialize for DiscretizedGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.descriptor.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscretizedGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let desc = GroupDescriptor::deserialize(d)?;
        desc.build().map_err(serde::de::Error::custom)
    }
}

impl DiscretizedGroup {
    /// `g_i ∘ g_j` for closed groups.
    pub fn compose(&self, i: usize, j: usize) -> Result<usize> {
        let table = self
            .compose_table
            .as_ref()
            .ok_or_else(|| Error::unsupported(format!("{} is not closed under composition", self.descriptor)))?;
        if i >= self.r || j >= self.r {
            return Err(Error::invalid(format!(
                "element index out of range: compose({i}, {j}) with r = {}",
                self.r
            )));
        }
        Ok(table[i][j])
    }

    /// `g_i^{-1}` for closed groups.
    pub fn inverse(&self, i: usize) -> Result<usize> {
        let table = self
            .inverse_table
            .as_ref()
            .ok_or_else(|| Error::unsupported(format!("{} has no inverses", self.descriptor)))?;
        if i >= self.r {
            return Err(Error::invalid(format!("element index {i} out of range, r = {}", self.r)));
        }
        Ok(table[i])
    }
}

fn closed_group(
    r: usize,
    identity: usize,
    compose: Vec<Vec<usize>>,
    descriptor: GroupDescriptor,
) -> DiscretizedGroup {
    let inverse: Vec<usize> = (0..r)
        .map(|i| {
            (0..r)
                .find(|&j| compose[i][j] == identity)
                .expect("every element of a finite group has an inverse")
        })
        .collect();
    let diff_table: Vec<Vec<usize>> = (0..r)
        .map(|i| (0..r).map(|j| compose[inverse[i]][j]).collect())
        .collect();
    DiscretizedGroup {
        r,
        identity,
        diff_count: r,
        diff_table,
        identity_diff: identity,
        closed: true,
        compose_table: Some(compose),
        inverse_table: Some(inverse),
        descriptor,
    }
}

/// Cyclic group Z_n: element `i` is rotation by `i`, composition is addition
/// mod `n`, identity is `0`.
pub fn build_cyclic(n: usize) -> Result<DiscretizedGroup> {
    if n == 0 {
        return Err(Error::invalid("cyclic group order must be at least 1"));
    }
    let compose = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
    Ok(closed_group(n, 0, compose, GroupDescriptor::Cyclic { n }))
}

/// Dihedral group D_n of order `2n`, `n >= 3`.
///
/// Element `t·n + i` with `t ∈ {0,1}`, `i ∈ Z_n` stands for `ρ^i s^t` where
/// `ρ` is the rotation by `2π/n` and `s` a fixed reflection. The relation
/// `s ρ = ρ^{-1} s` gives
/// `(ρ^i s^t)(ρ^j s^u) = ρ^{i + (-1)^t j} s^{t⊕u}`.
pub fn build_dihedral(n: usize) -> Result<DiscretizedGroup> {
    if n < 3 {
        return Err(Error::invalid("dihedral group requires n >= 3"));
    }
    let r = 2 * n;
    let encode = |i: usize, t: usize| t * n + i;
    let mut compose = vec![vec![0usize; r]; r];
    for t in 0..2 {
        for i in 0..n {
            for u in 0..2 {
                for j in 0..n {
                    let rot = if t == 0 { (i + j) % n } else { (i + n - j) % n };
                    compose[encode(i, t)][encode(j, u)] = encode(rot, (t + u) % 2);
                }
            }
        }
    }
    Ok(closed_group(r, 0, compose, GroupDescriptor::Dihedral { n }))
}

/// The `h × w` translation grid. Position `(row, col)` has index
/// `row·w + col`; not closed, so only the difference structure exists.
///
/// Offsets `(dy, dx)` with `dy ∈ [-(h-1), h-1]`, `dx ∈ [-(w-1), w-1]` are
/// indexed row-major as `(dy + h - 1)·(2w - 1) + (dx + w - 1)`, giving
/// `diff_count = (2h-1)(2w-1)`.
pub fn build_grid_translation(height: usize, width: usize) -> Result<DiscretizedGroup> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("grid dimensions must be at least 1x1"));
    }
    let r = height * width;
    let diff_count = (2 * height - 1) * (2 * width - 1);
    let offset_index = |dy: isize, dx: isize| -> usize {
        ((dy + height as isize - 1) as usize) * (2 * width - 1) + (dx + width as isize - 1) as usize
    };
    let pos = |i: usize| ((i / width) as isize, (i % width) as isize);
    let diff_table: Vec<Vec<usize>> = (0..r)
        .map(|i| {
            let (ri, ci) = pos(i);
            (0..r)
                .map(|j| {
                    let (rj, cj) = pos(j);
                    offset_index(rj - ri, cj - ci)
                })
                .collect()
        })
        .collect();
    Ok(DiscretizedGroup {
        r,
        identity: 0,
        diff_count,
        diff_table,
        identity_diff: offset_index(0, 0),
        closed: false,
        compose_table: None,
        inverse_table: None,
        descriptor: GroupDescriptor::Grid { height, width },
    })
}

/// Direct product of two closed groups; element `(x, y)` has index
/// `x·b.r + y` and composition acts componentwise.
pub fn build_product(a: &DiscretizedGroup, b: &DiscretizedGroup) -> Result<DiscretizedGroup> {
    if !a.closed || !b.closed {
        return Err(Error::unsupported("direct products are defined for closed groups only"));
    }
    let (ca, cb) = (a.compose_table.as_ref().unwrap(), b.compose_table.as_ref().unwrap());
    let r = a.r * b.r;
    let encode = |x: usize, y: usize| x * b.r + y;
    let mut compose = vec![vec![0usize; r]; r];
    for xa in 0..a.r {
        for ya in 0..b.r {
            for xb in 0..a.r {
                for yb in 0..b.r {
                    compose[encode(xa, ya)][encode(xb, yb)] = encode(ca[xa][xb], cb[ya][yb]);
                }
            }
        }
    }
    let identity = encode(a.identity, b.identity);
    let descriptor = GroupDescriptor::Product {
        a: Box::new(a.descriptor.clone()),
        b: Box::new(b.descriptor.clone()),
    };
    Ok(closed_group(r, identity, compose, descriptor))
}

/// Outcome of a full axiom scan; `violations` empty means the tables form a
/// genuine group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub violations: Vec<String>,
    /// Whether associativity was scanned over all `r^3` triples. Beyond
    /// `r = 256` a fixed pseudorandom sample of triples is used instead.
    pub associativity_exhaustive: bool,
}

impl AxiomReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans the composition tables of a closed group for axiom violations:
/// identity behavior, two-sided inverses, closure of every table entry,
/// associativity, and consistency of `diff_table` with
/// `compose(inverse(i), j)`.
pub fn validate_group_axioms(g: &DiscretizedGroup) -> Result<AxiomReport> {
    if !g.closed {
        return Err(Error::unsupported("axiom validation requires a closed group"));
    }
    let compose = g.compose_table.as_ref().unwrap();
    let inverse = g.inverse_table.as_ref().unwrap();
    let r = g.r;
    let mut violations = Vec::new();

    if compose.len() != r || compose.iter().any(|row| row.len() != r) {
        violations.push(format!("compose table is not {r}x{r}"));
        return Ok(AxiomReport { violations, associativity_exhaustive: false });
    }
    for i in 0..r {
        for j in 0..r {
            if compose[i][j] >= r {
                violations.push(format!("closure: compose({i}, {j}) = {} out of range", compose[i][j]));
            }
        }
    }
    if !violations.is_empty() {
        return Ok(AxiomReport { violations, associativity_exhaustive: false });
    }

    let e = g.identity;
    for i in 0..r {
        if compose[e][i] != i {
            violations.push(format!("identity: compose(e, {i}) = {} != {i}", compose[e][i]));
        }
        if compose[i][e] != i {
            violations.push(format!("identity: compose({i}, e) = {} != {i}", compose[i][e]));
        }
        let inv = inverse[i];
        if inv >= r {
            violations.push(format!("inverse: inverse({i}) = {inv} out of range"));
            continue;
        }
        if compose[inv][i] != e {
            violations.push(format!("inverse: compose(inv({i}), {i}) = {} != identity", compose[inv][i]));
        }
        if compose[i][inv] != e {
            violations.push(format!("inverse: compose({i}, inv({i})) = {} != identity", compose[i][inv]));
        }
    }

    // (i ∘ j) ∘ k = i ∘ (j ∘ k); exhaustive up to r = 256 (2^24 triples),
    // a fixed-stride sample of the triple space beyond that.
    let exhaustive = r <= 256;
    let check_triple = |i: usize, j: usize, k: usize, violations: &mut Vec<String>| {
        if compose[compose[i][j]][k] != compose[i][compose[j][k]] {
            violations.push(format!("associativity fails at ({i}, {j}, {k})"));
        }
    };
    if exhaustive {
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    check_triple(i, j, k, &mut violations);
                }
            }
        }
    } else {
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..2_000_000u64 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let i = (state >> 40) as usize % r;
            let j = (state >> 20) as usize % r;
            let k = state as usize % r;
            check_triple(i, j, k, &mut violations);
        }
    }

    if g.diff_count != r {
        violations.push(format!("diff_count = {} != r = {r} for a closed group", g.diff_count));
    }
    for i in 0..r {
        for j in 0..r {
            let expect = compose[inverse[i]][j];
            if g.diff_table[i][j] != expect {
                violations.push(format!(
                    "difference: diff_table({i}, {j}) = {} != compose(inv({i}), {j}) = {expect}",
                    g.diff_table[i][j]
                ));
            }
        }
    }

    violations.truncate(64);
    Ok(AxiomReport { violations, associativity_exhaustive: exhaustive })
}

/// Permutation of element indices induced by acting with `elem` on signals:
/// `(g ∘ f)(g_j) = f(g^{-1} ∘ g_j)`, so `π(j)` is the index of
/// `g_elem^{-1} ∘ g_j` and the acted signal reads `f[π(j)]` at slot `j`.
///
/// Composition covariance: `π_{a∘b}(j) = π_b(π_a(j))`.
pub fn left_action_permutation(g: &DiscretizedGroup, elem: usize) -> Result<Vec<usize>> {
    if !g.closed {
        return Err(Error::unsupported("left action requires a closed group"));
    }
    if elem >= g.r {
        return Err(Error::invalid(format!("element index {elem} out of range, r = {}", g.r)));
    }
    // g_elem^{-1} ∘ g_j is exactly the difference table row of elem.
    Ok(g.diff_table[elem].clone())
}
