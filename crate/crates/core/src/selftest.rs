//! The full acceptance corpus as a single seeded run: group axioms, exact
//! kernel identities, equivariance/invariance, lift equality, three
//! shattering families, bound-chain orderings, a counting-lemma sweep, and
//! byte-level determinism. Every criterion reports pass/fail plus a
//! deterministic detail string, so two runs with one seed serialize to
//! identical bytes.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bartlett_lemma16_check, build_bound_report, dense_comparison_holds, ub_gcnn,
    vc_upper_by_search,
};
use crate::construct::{
    build_composite_instance, build_hypercube_lift, build_shatter_instance, lift_dnn_to_gcnn,
    Provenance, ShatterInstance, ThresholdedDnn,
};
use crate::error::Result;
use crate::group::{
    build_cyclic, build_dihedral, build_grid_translation, build_product, validate_group_axioms,
    DiscretizedGroup,
};
use crate::network::{
    gcnn_forward, random_dnn_params, random_gcnn_params, DenseLayer, DnnParams, DnnSpec, GcnnSpec,
};
use crate::rng::{algorithm_id, stream};
use crate::signal::{apply_left_action, g_correlate, identity_indicator_basis, KernelBasis, Signal};
use crate::verify::{
    verify_bound_consistency, verify_invariance, verify_lift_equality, verify_shattering,
};

/// One acceptance criterion's outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of the whole corpus. Contains no wall-clock data: serialization
/// is byte-identical across runs with the same seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub rng: String,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub all_passed: bool,
}

/// Runs all twelve criteria. Internal errors fail the criterion they occur
/// in rather than aborting the run.
pub fn run_all(seed: u64) -> SelftestReport {
    type Criterion = (u32, &'static str, fn(u64) -> Result<(bool, String)>);
    let table: &[Criterion] = &[
        (1, "group-axioms", criterion_group_axioms),
        (2, "identity-kernel", criterion_identity_kernel),
        (3, "equivariance", criterion_equivariance),
        (4, "invariance", criterion_invariance),
        (5, "lift-equality", criterion_lift_equality),
        (6, "window-shattering", criterion_window_shattering),
        (7, "composite-shattering", criterion_composite_shattering),
        (8, "hypercube-lift", criterion_hypercube_lift),
        (9, "bound-chain", criterion_bound_chain),
        (10, "bound-consistency", criterion_bound_consistency),
        (11, "counting-lemma-sweep", criterion_counting_lemma_sweep),
        (12, "determinism", criterion_determinism),
    ];
    let criteria: Vec<CriterionResult> = table
        .iter()
        .map(|&(id, name, f)| match f(seed) {
            Ok((passed, detail)) => CriterionResult { id, name: name.to_string(), passed, detail },
            Err(e) => CriterionResult {
                id,
                name: name.to_string(),
                passed: false,
                detail: format!("errored: {e}"),
            },
        })
        .collect();
    let all_passed = criteria.iter().all(|c| c.passed);
    SelftestReport { rng: algorithm_id().to_string(), seed, criteria, all_passed }
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report serialization cannot fail")
}

/// Z_n up to 64, D_n up to 16, and a handful of products: zero axiom
/// violations, associativity checked exhaustively throughout.
fn criterion_group_axioms(_seed: u64) -> Result<(bool, String)> {
    let mut groups: Vec<DiscretizedGroup> = Vec::new();
    for n in 1..=64 {
        groups.push(build_cyclic(n)?);
    }
    for n in 3..=16 {
        groups.push(build_dihedral(n)?);
    }
    groups.push(build_product(&build_cyclic(2)?, &build_cyclic(3)?)?);
    groups.push(build_product(&build_cyclic(4)?, &build_dihedral(3)?)?);
    groups.push(build_product(&build_dihedral(4)?, &build_dihedral(3)?)?);
    groups.push(build_product(&build_cyclic(8)?, &build_cyclic(8)?)?);

    let mut violations = 0usize;
    let mut exhaustive = 0usize;
    for g in &groups {
        let report = validate_group_axioms(g)?;
        violations += report.violations.len();
        if report.associativity_exhaustive {
            exhaustive += 1;
        }
    }
    let passed = violations == 0 && exhaustive == groups.len();
    Ok((passed, format!("{} groups, {} violations, all exhaustive", groups.len(), violations)))
}

fn random_closed_group<R: Rng>(rng: &mut R) -> Result<DiscretizedGroup> {
    match rng.gen_range(0..3) {
        0 => build_cyclic(rng.gen_range(1..=12)),
        1 => build_dihedral(rng.gen_range(3..=6)),
        _ => build_product(&build_cyclic(rng.gen_range(1..=3))?, &build_cyclic(rng.gen_range(1..=3))?),
    }
}

/// The identity-indicator kernel reproduces integer-valued signals bitwise
/// on every group family, 100 random cases each.
fn criterion_identity_kernel(seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 0x102);
    type Family = (&'static str, fn(&mut rand_chacha::ChaCha8Rng) -> Result<DiscretizedGroup>);
    let families: &[Family] = &[
        ("cyclic", |r| build_cyclic(r.gen_range(1..=16))),
        ("dihedral", |r| build_dihedral(r.gen_range(3..=8))),
        ("grid", |r| build_grid_translation(r.gen_range(1..=4), r.gen_range(1..=4))),
        ("product", |r| {
            build_product(&build_cyclic(r.gen_range(1..=4))?, &build_dihedral(r.gen_range(3..=4))?)
        }),
    ];
    let mut cases = 0usize;
    for (_, family) in families {
        for _ in 0..100 {
            let g = family(&mut rng)?;
            let f: Vec<f64> = (0..g.r).map(|_| rng.gen_range(-8..=8) as f64).collect();
            let basis = identity_indicator_basis(&g);
            let out = g_correlate(&g, &basis, &[1.0], &f)?;
            let exact = out.len() == f.len()
                && out.iter().zip(&f).all(|(a, b)| a.to_bits() == b.to_bits());
            if !exact {
                return Ok((false, format!("identity kernel altered a signal on {}", g.descriptor)));
            }
            cases += 1;
        }
    }
    Ok((true, format!("{cases} cases bitwise exact")))
}

/// Correlating an acted signal equals acting on the correlation, entry by
/// entry to 1e-12, over random kernels on Z_r and D_n with r <= 16.
fn criterion_equivariance(seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 0x103);
    let mut draws = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..120 {
        let g = if rng.gen_bool(0.5) {
            build_cyclic(rng.gen_range(2..=16))?
        } else {
            build_dihedral(rng.gen_range(3..=8))?
        };
        let k = rng.gen_range(1..=3);
        let basis = KernelBasis::new(
            (0..k).map(|_| (0..g.r).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect(),
        );
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let f: Vec<f64> = (0..g.r).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let a = rng.gen_range(0..g.r);

        let acted_f = apply_left_action(&g, a, &Signal::new(vec![f.clone()]))?;
        let lhs = g_correlate(&g, &basis, &w, &acted_f.values[0])?;
        let corr = g_correlate(&g, &basis, &w, &f)?;
        let rhs = apply_left_action(&g, a, &Signal::new(vec![corr]))?;
        for (x, y) in lhs.iter().zip(&rhs.values[0]) {
            worst = worst.max((x - y).abs());
        }
        draws += 1;
    }
    Ok((worst <= 1e-12, format!("{draws} draws, max entry deviation {worst:e}")))
}

/// Pooled GCNN output is invariant under the left action, 100 random
/// (network, signal, element) triples on closed groups, 1e-9 relative.
fn criterion_invariance(seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 0x104);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let g = random_closed_group(&mut rng)?;
        let k = rng.gen_range(1..=2);
        let depth = rng.gen_range(1..=2);
        let mut widths = vec![rng.gen_range(1..=2)];
        for _ in 0..depth {
            widths.push(rng.gen_range(1..=3));
        }
        let spec = GcnnSpec::new(k, widths, g.r)?;
        let params = random_gcnn_params(&spec, &mut rng, 1.0)?;
        let basis = KernelBasis::new(
            (0..k).map(|_| (0..g.r).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
        );
        let f = Signal::new(
            (0..spec.widths[0])
                .map(|_| (0..g.r).map(|_| rng.gen_range(-5.0..5.0)).collect())
                .collect(),
        );
        let a = rng.gen_range(0..g.r);
        let h = gcnn_forward(&spec, &params, &basis, &g, &f)?;
        let h_acted = gcnn_forward(&spec, &params, &basis, &g, &apply_left_action(&g, a, &f)?)?;
        worst = worst.max((h_acted - h).abs() / (1.0 + h.abs()));
    }
    Ok((worst <= 1e-9, format!("100 triples, max relative deviation {worst:e}")))
}

/// Lifted dense networks pool to the double sum computed by the dense code
/// path, 100 (network, signal) pairs per group family, 1e-9 relative.
fn criterion_lift_equality(seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 0x105);
    let groups = [
        build_cyclic(6)?,
        build_dihedral(4)?,
        build_grid_translation(2, 3)?,
        build_product(&build_cyclic(2)?, &build_cyclic(2)?)?,
    ];
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for g in &groups {
        for _ in 0..25 {
            let depth = rng.gen_range(1..=3);
            let mut widths = vec![rng.gen_range(1..=2)];
            for _ in 0..depth {
                widths.push(rng.gen_range(1..=4));
            }
            let dspec = DnnSpec::new(widths)?;
            let dparams = random_dnn_params(&dspec, &mut rng, 1.5)?;
            let (spec, params, basis) = lift_dnn_to_gcnn(&dspec, &dparams, g)?;
            let res =
                verify_lift_equality(&dspec, &dparams, &spec, &params, &basis, g, 4, rng.gen())?;
            worst = worst.max(res);
            pairs += 4;
        }
    }
    Ok((worst <= 1e-9, format!("{pairs} pairs over 4 families, max residual {worst:e}")))
}

/// Dyadic window interval for resolution `r`: step exactly 1.0.
fn dyadic_interval(r: usize) -> (f64, f64) {
    let m = (usize::BITS - 1 - r.leading_zeros()) as usize;
    let d = 1usize << m;
    (0.0, 2.0 * (d as f64 + 2.0))
}

/// Window instances shatter exactly ⌊log₂ r⌋ functions for
/// r ∈ {2,...,64} with zero margin violations; the 64-labeling case stays
/// under a second.
fn criterion_window_shattering(_seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    for r in [2usize, 4, 8, 16, 32, 64] {
        let g = build_cyclic(r)?;
        let (a, b) = dyadic_interval(r);
        let inst = build_shatter_instance(&g, a, b)?;
        let started = Instant::now();
        let report = verify_shattering(&inst)?;
        let elapsed = started.elapsed();
        let m = inst.m as u32;
        ok &= report.success
            && report.certified
            && report.labelings_realized == 1u64 << m
            && report.max_margin_violation == 0.0;
        if r == 64 {
            ok &= inst.m == 6;
            // timing asserted but kept out of the detail string so reports
            // stay byte-reproducible
            ok &= elapsed < Duration::from_secs(1);
        }
    }
    Ok((ok, "r in {2,4,8,16,32,64}: all labelings, margins exact, m=6 under 1 s".to_string()))
}

/// The 3-block composite on Z₈ shatters 9 functions (512 labelings) with
/// exact margins, and block classifiers vanish identically on foreign
/// blocks.
fn criterion_composite_shattering(_seed: u64) -> Result<(bool, String)> {
    let g = build_cyclic(8)?;
    let inst = build_composite_instance(&g, 3)?;
    let report = verify_shattering(&inst)?;
    let mut ok = inst.m == 9
        && report.success
        && report.certified
        && report.labelings_realized == 512
        && report.max_margin_violation == 0.0;

    let Provenance::BlockWindows { intervals, .. } = &inst.provenance else {
        return Ok((false, "composite instance lost its block provenance".to_string()));
    };
    let mut cross_checked = 0usize;
    for (bi, iv) in intervals.iter().enumerate() {
        let single = build_shatter_instance(&g, iv[0], iv[1])?;
        for (bj, funcs) in inst.functions.chunks(3).enumerate() {
            if bi == bj {
                continue;
            }
            for f in funcs {
                for params in &single.classifiers {
                    let v = gcnn_forward(&single.network_spec, params, &single.basis, &g, f)?;
                    ok &= v == 0.0;
                    cross_checked += 1;
                }
            }
        }
    }
    Ok((ok, format!("512/512 labelings, {cross_checked} cross-block values exactly 0")))
}

fn scalar_net(w: &[f64], c: f64, threshold: f64) -> Result<ThresholdedDnn> {
    let spec = DnnSpec::new(vec![w.len(), 1])?;
    let params = DnnParams { layers: vec![DenseLayer { weight: vec![w.to_vec()], bias: vec![c] }] };
    Ok(ThresholdedDnn { spec, params, threshold })
}

fn hypercube_case_line() -> Result<(Vec<Vec<f64>>, Vec<ThresholdedDnn>, DiscretizedGroup, f64, f64)> {
    let points = vec![vec![-0.5], vec![0.5]];
    let nets = vec![
        scalar_net(&[0.0], 0.0, 0.5)?,
        scalar_net(&[0.0], -1.0, 0.5)?,
        scalar_net(&[-1.0], 0.0, 0.25)?,
        scalar_net(&[1.0], 0.0, 0.25)?,
    ];
    Ok((points, nets, build_cyclic(4)?, 2.0, 4.0))
}

fn hypercube_case_plane() -> Result<(Vec<Vec<f64>>, Vec<ThresholdedDnn>, DiscretizedGroup, f64, f64)> {
    let points = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    // one halfspace per subset of the three points, thresholded at 0.5
    let nets = vec![
        scalar_net(&[0.0, 0.0], 0.0, 0.5)?,   // {}
        scalar_net(&[-1.0, -1.0], -1.0, 0.5)?, // {p1}
        scalar_net(&[1.0, -1.0], 0.0, 0.5)?,  // {p2}
        scalar_net(&[0.0, -1.0], -1.0, 0.5)?, // {p1,p2}
        scalar_net(&[-1.0, 1.0], 0.0, 0.5)?,  // {p3}
        scalar_net(&[-1.0, 0.0], -1.0, 0.5)?, // {p1,p3}
        scalar_net(&[1.0, 1.0], 0.0, 0.5)?,   // {p2,p3}
        scalar_net(&[0.0, 0.0], -1.0, 0.5)?,  // {p1,p2,p3}
    ];
    Ok((points, nets, build_dihedral(3)?, 3.0, 5.0))
}

/// Hypercube lifts of two desk-scale dense families realize all labelings
/// and output 0 (within 1e-12, exactly 0 in practice) on 50 random
/// box-valued signals per case.
fn criterion_hypercube_lift(seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 0x108);
    let mut ok = true;
    let mut box_checked = 0usize;
    for case in [hypercube_case_line()?, hypercube_case_plane()?] {
        let (points, nets, g, a, b) = case;
        let inst = build_hypercube_lift(&points, &nets, &g, a, b)?;
        let report = verify_shattering(&inst)?;
        ok &= report.success && report.certified;
        let m0 = points[0].len();
        for _ in 0..50 {
            let f = Signal::new(
                (0..m0).map(|_| (0..g.r).map(|_| rng.gen_range(a..b)).collect()).collect(),
            );
            for params in &inst.classifiers {
                let v = gcnn_forward(&inst.network_spec, params, &inst.basis, &g, &f)?;
                ok &= v.abs() <= 1e-12;
                box_checked += 1;
            }
        }
    }
    Ok((ok, format!("2 cases certified, {box_checked} box-valued outputs at 0")))
}

/// Ordering of the bound chain on 1000 random architectures: theorem
/// variant <= proof variant, GCNN bound <= dense comparison, search result
/// within one of the closed form.
fn criterion_bound_chain(seed: u64) -> Result<(bool, String)> {
    let mut rng = stream(seed, 0x109);
    let mut ok = true;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=5);
        let depth = rng.gen_range(1..=4);
        let widths: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=6)).collect();
        let r = rng.gen_range(2..=64);
        let spec = GcnnSpec::new(k, widths, r)?;
        let ub = ub_gcnn(&spec)?;
        ok &= ub.theorem_variant <= ub.proof_variant;
        ok &= dense_comparison_holds(&spec)?;
        let search = vc_upper_by_search(&spec)?;
        ok &= (search as f64) <= ub.proof_variant.ceil() + 1.0;
    }
    Ok((ok, "1000 random specs: orderings hold".to_string()))
}

/// Every constructed instance stays below the upper bound of its containing
/// class: the lower-bound machinery never crosses the upper-bound machinery.
fn criterion_bound_consistency(_seed: u64) -> Result<(bool, String)> {
    let mut instances: Vec<ShatterInstance> = Vec::new();
    for r in [2usize, 4, 8, 16, 32, 64] {
        let g = build_cyclic(r)?;
        let (a, b) = dyadic_interval(r);
        instances.push(build_shatter_instance(&g, a, b)?);
    }
    instances.push(build_composite_instance(&build_cyclic(8)?, 3)?);
    for case in [hypercube_case_line()?, hypercube_case_plane()?] {
        let (points, nets, g, a, b) = case;
        instances.push(build_hypercube_lift(&points, &nets, &g, a, b)?);
    }
    let mut ok = true;
    for inst in &instances {
        ok &= verify_bound_consistency(inst, &inst.network_spec)?;
    }
    Ok((ok, format!("{} instances below their class bounds", instances.len())))
}

/// Counting-lemma sweep: no counterexample over κ <= w̃ <= 16,
/// r̃ ∈ {16,32,64}, w̃ <= m̃ <= 10⁴.
fn criterion_counting_lemma_sweep(_seed: u64) -> Result<(bool, String)> {
    let mut counterexamples = 0u64;
    let mut conclusive = 0u64;
    for r_tilde in [16.0f64, 32.0, 64.0] {
        for w_tilde in 0..=16u32 {
            for kappa in 0..=w_tilde {
                for m_tilde in w_tilde.max(1)..=10_000 {
                    match bartlett_lemma16_check(
                        m_tilde as f64,
                        kappa as f64,
                        w_tilde as f64,
                        r_tilde,
                    ) {
                        Some(true) => conclusive += 1,
                        Some(false) => counterexamples += 1,
                        None => {}
                    }
                }
            }
        }
    }
    let passed = counterexamples == 0 && conclusive > 0;
    Ok((passed, format!("{conclusive} conclusive points, {counterexamples} counterexamples")))
}

fn representative_bytes(seed: u64) -> Result<String> {
    let mut out = String::new();

    let g = build_cyclic(8)?;
    let inst = build_shatter_instance(&g, 0.0, 20.0)?;
    out.push_str(&json(&inst));
    let mut report = verify_shattering(&inst)?;
    report.wall_time_seconds = None;
    out.push_str(&json(&report));

    let composite = build_composite_instance(&build_cyclic(4)?, 2)?;
    let mut report = verify_shattering(&composite)?;
    report.wall_time_seconds = None;
    out.push_str(&json(&report));

    let (points, nets, hg, a, b) = hypercube_case_line()?;
    let lift = build_hypercube_lift(&points, &nets, &hg, a, b)?;
    let mut report = verify_shattering(&lift)?;
    report.wall_time_seconds = None;
    out.push_str(&json(&report));

    let spec = GcnnSpec::new(2, vec![3, 4, 5], 12)?;
    out.push_str(&json(&build_bound_report(&spec, Some((0.01, 100.0)))?));

    let mut rng = stream(seed, 0x10c);
    let basis = identity_indicator_basis(&g);
    let net_spec = GcnnSpec::new(1, vec![1, 3, 1], 8)?;
    let params = random_gcnn_params(&net_spec, &mut rng, 1.0)?;
    let dev = verify_invariance(&net_spec, &params, &basis, &g, 20, seed)?;
    out.push_str(&format!("{:016x}", dev.to_bits()));

    let dspec = DnnSpec::new(vec![1, 3, 1])?;
    let dparams = random_dnn_params(&dspec, &mut rng, 1.0)?;
    let (lspec, lparams, lbasis) = lift_dnn_to_gcnn(&dspec, &dparams, &g)?;
    let res = verify_lift_equality(&dspec, &dparams, &lspec, &lparams, &lbasis, &g, 20, seed)?;
    out.push_str(&format!("{:016x}", res.to_bits()));

    Ok(out)
}

/// Two passes over a representative sub-corpus with one seed serialize to
/// identical bytes (wall-clock fields suppressed).
fn criterion_determinism(seed: u64) -> Result<(bool, String)> {
    let first = representative_bytes(seed)?;
    let second = representative_bytes(seed)?;
    let passed = first == second;
    Ok((passed, format!("{} report bytes identical across reruns", first.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_passes_and_is_deterministic() {
        let report = run_all(7);
        for c in &report.criteria {
            assert!(c.passed, "criterion {} ({}) failed: {}", c.id, c.name, c.detail);
        }
        assert!(report.all_passed);
        assert_eq!(report.criteria.len(), 12);
        // stable across reruns with the same seed, different for another
        let again = run_all(7);
        assert_eq!(json(&report), json(&again));
    }

    #[test]
    fn failures_are_reported_not_panicked() {
        // criterion functions surface internal errors as failed criteria;
        // exercise the wrapper shape on a healthy run
        let report = run_all(3);
        assert_eq!(report.rng, "chacha8");
        assert_eq!(report.seed, 3);
        let ids: Vec<u32> = report.criteria.iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=12).collect::<Vec<u32>>());
    }
}
