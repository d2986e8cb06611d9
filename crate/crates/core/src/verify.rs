//! Brute-force certification: shattering claims (every labeling realized by
//! its mapped classifier), pooling invariance, lift equality against an
//! independent double-loop oracle, and lower-vs-upper bound consistency.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::vc_upper_by_search;
use crate::construct::{Provenance, ShatterInstance, MAX_ENUM_M};
use crate::error::{Error, Result};
use crate::group::DiscretizedGroup;
use crate::network::{dnn_forward, gcnn_forward, DnnParams, DnnSpec, GcnnParams, GcnnSpec};
use crate::par::{indexed_map, Parallelism};
use crate::rng::stream;
use crate::signal::{apply_left_action, KernelBasis, Signal};

/// How the labeling space was covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverageMode {
    /// All `2^m` labelings evaluated; the result is a certificate.
    Exhaustive,
    /// Random subset of labelings; statistical evidence only.
    Sampled { samples: u64 },
}

/// One mapped classifier putting a function on the wrong side of the
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignFailure {
    pub labeling_mask: u64,
    pub function_index: usize,
    pub value: f64,
}

/// Outcome of a shattering check.
///
/// `success` means every one of the `2^m` sign patterns was realized —
/// counted over distinct patterns, independent of how the classifier map is
/// indexed. `failures` lists classifiers that miss their own labeling
/// (capped at [`MAX_REPORTED_FAILURES`]). `max_margin_violation` is the
/// worst shortfall `max(0, expected_margin - signed_margin)` across all
/// decisions; exactly `0` for the window constructions on dyadic grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterReport {
    pub m: usize,
    pub labelings_total: u64,
    pub labelings_realized: u64,
    pub success: bool,
    pub max_margin_violation: f64,
    pub mode: CoverageMode,
    /// True only for an exhaustive run that succeeded.
    pub certified: bool,
    pub failures: Vec<SignFailure>,
    /// Suppress (set to `None`) for byte-identical reruns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    pub provenance: Provenance,
}

/// Cap on the failure list length so reports stay bounded.
pub const MAX_REPORTED_FAILURES: usize = 32;

impl ShatterReport {
    pub fn csv_header() -> String {
        [
            "m",
            "labelings_total",
            "labelings_realized",
            "success",
            "max_margin_violation",
            "mode",
            "certified",
            "failures",
            "wall_time_seconds",
        ]
        .join(",")
    }

    pub fn csv_row(&self) -> String {
        let mode = match self.mode {
            CoverageMode::Exhaustive => "exhaustive".to_string(),
            CoverageMode::Sampled { samples } => format!("sampled:{samples}"),
        };
        let wall = self.wall_time_seconds.map(|t| t.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.m,
            self.labelings_total,
            self.labelings_realized,
            self.success,
            self.max_margin_violation,
            mode,
            self.certified,
            self.failures.len(),
            wall
        )
    }
}

struct MaskOutcome {
    pattern: u64,
    violation: f64,
    failures: Vec<SignFailure>,
}

fn evaluate_mask(inst: &ShatterInstance, mask: u64) -> Result<MaskOutcome> {
    let params = &inst.classifiers[mask as usize];
    let mut pattern = 0u64;
    let mut violation = 0.0f64;
    let mut failures = Vec::new();
    for (j, f) in inst.functions.iter().enumerate() {
        let v = gcnn_forward(&inst.network_spec, params, &inst.basis, &inst.group, f)?;
        let positive = v > inst.threshold;
        if positive {
            pattern |= 1 << j;
        }
        let want_positive = (mask >> j) & 1 == 1;
        let signed_margin = if want_positive { v - inst.threshold } else { inst.threshold - v };
        violation = violation.max(inst.expected_margin - signed_margin);
        if positive != want_positive {
            failures.push(SignFailure { labeling_mask: mask, function_index: j, value: v });
        }
    }
    Ok(MaskOutcome { pattern, violation: violation.max(0.0), failures })
}

fn reduce_outcomes(
    inst: &ShatterInstance,
    outcomes: Vec<MaskOutcome>,
    mode: CoverageMode,
    started: Instant,
) -> ShatterReport {
    let mut patterns = BTreeSet::new();
    let mut violation = 0.0f64;
    let mut failures = Vec::new();
    for out in outcomes {
        patterns.insert(out.pattern);
        violation = violation.max(out.violation);
        for f in out.failures {
            if failures.len() < MAX_REPORTED_FAILURES {
                failures.push(f);
            }
        }
    }
    let labelings_total = inst.labelings_total();
    let labelings_realized = patterns.len() as u64;
    let success = match mode {
        CoverageMode::Exhaustive => labelings_realized == labelings_total,
        // a sample cannot see all patterns; success here only means no
        // sampled classifier missed its own labeling
        CoverageMode::Sampled { .. } => failures.is_empty(),
    };
    ShatterReport {
        m: inst.m,
        labelings_total,
        labelings_realized,
        success,
        max_margin_violation: violation,
        mode,
        certified: matches!(mode, CoverageMode::Exhaustive) && success,
        failures,
        wall_time_seconds: Some(started.elapsed().as_secs_f64()),
        provenance: inst.provenance.clone(),
    }
}

/// Exhaustive shattering check with the default execution mode.
pub fn verify_shattering(inst: &ShatterInstance) -> Result<ShatterReport> {
    verify_shattering_with(inst, Parallelism::default())
}

/// Exhaustive shattering check: evaluates every labeling's mapped network on
/// every function. Labelings are independent, so they may run in parallel;
/// the reduction (distinct patterns, maxima, first failures in mask order)
/// does not depend on evaluation order.
pub fn verify_shattering_with(inst: &ShatterInstance, mode: Parallelism) -> Result<ShatterReport> {
    inst.check()?;
    if inst.m > MAX_ENUM_M {
        return Err(Error::limit(format!(
            "2^{} labelings exceed the exhaustive budget 2^{MAX_ENUM_M}; \
             use the sampled verifier for statistical evidence",
            inst.m
        )));
    }
    let started = Instant::now();
    let total = inst.labelings_total();
    let outcomes = indexed_map(mode, total as usize, |mask| evaluate_mask(inst, mask as u64))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce_outcomes(inst, outcomes, CoverageMode::Exhaustive, started))
}

/// Statistical fallback for instances beyond the exhaustive budget: checks
/// `samples` uniformly drawn labelings against their mapped classifiers.
/// Never certifies.
pub fn verify_shattering_sampled(
    inst: &ShatterInstance,
    samples: u64,
    seed: u64,
) -> Result<ShatterReport> {
    inst.check()?;
    if samples == 0 {
        return Err(Error::invalid("sampled verification needs at least one sample"));
    }
    let started = Instant::now();
    let mut rng = stream(seed, 0x5a);
    let total = inst.labelings_total();
    let mut outcomes = Vec::with_capacity(samples as usize);
    for _ in 0..samples {
        let mask = rand::Rng::gen_range(&mut rng, 0..total);
        outcomes.push(evaluate_mask(inst, mask)?);
    }
    Ok(reduce_outcomes(inst, outcomes, CoverageMode::Sampled { samples }, started))
}

/// Max deviation of the pooled output under the group acting on the input,
/// over `trials` random (signal, element) pairs, normalized by
/// `1 + |h(f)|`. Exact invariance passes at `<= 1e-9`.
pub fn verify_invariance(
    spec: &GcnnSpec,
    params: &GcnnParams,
    basis: &KernelBasis,
    g: &DiscretizedGroup,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if !g.closed {
        return Err(Error::unsupported(
            "invariance is defined over a closed group action; grids are not closed",
        ));
    }
    spec.check()?;
    if spec.r != g.r {
        return Err(Error::invalid("spec resolution differs from the group"));
    }
    let mut rng = stream(seed, 0x11);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = random_signal(&mut rng, spec.widths[0], g.r, 10.0);
        let a = rand::Rng::gen_range(&mut rng, 0..g.r);
        let h = gcnn_forward(spec, params, basis, g, &f)?;
        let acted = apply_left_action(g, a, &f)?;
        let h_acted = gcnn_forward(spec, params, basis, g, &acted)?;
        worst = worst.max((h_acted - h).abs() / (1.0 + h.abs()));
    }
    Ok(worst)
}

/// Max residual between the lifted network's pooled output and the literal
/// double sum `Σ_i Σ_j dnn(f(g_j))_i` computed with the dense code path
/// only, over `trials` random signals; normalized by `1 + max(|lhs|, |rhs|)`.
/// The residual is reported, not judged: a caller probing a non-identity
/// basis will simply see a large value.
pub fn verify_lift_equality(
    dspec: &DnnSpec,
    dparams: &DnnParams,
    spec: &GcnnSpec,
    params: &GcnnParams,
    basis: &KernelBasis,
    g: &DiscretizedGroup,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    dspec.check()?;
    dparams.check_shape(dspec)?;
    spec.check()?;
    if spec.widths.first() != dspec.widths.first() {
        return Err(Error::invalid("dense and lifted networks must share the input width"));
    }
    let m0 = dspec.widths[0];
    let m_out = *dspec.widths.last().unwrap();
    let mut rng = stream(seed, 0x22);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = random_signal(&mut rng, m0, g.r, 5.0);
        let lifted = gcnn_forward(spec, params, basis, g, &f)?;
        // oracle: per-element dense outputs, then the double loop in the
        // pooling order (channels outer, elements inner)
        let mut per_element = Vec::with_capacity(g.r);
        for j in 0..g.r {
            let x: Vec<f64> = (0..m0).map(|c| f.values[c][j]).collect();
            per_element.push(dnn_forward(dspec, dparams, &x)?);
        }
        let mut oracle = 0.0;
        for i in 0..m_out {
            for out in per_element.iter() {
                oracle += out[i];
            }
        }
        let scale = 1.0 + lifted.abs().max(oracle.abs());
        worst = worst.max((lifted - oracle).abs() / scale);
    }
    Ok(worst)
}

/// Sanity condition between the machinery's two halves: the instance's
/// shattered count must not exceed the upper bound of any class containing
/// its networks. `spec_of_class` must actually contain them — at least as
/// many kernel weights, identical depth, input width and resolution, and
/// at-least-as-wide layers (narrower networks embed by zero padding) —
/// otherwise the check is refused rather than answered.
pub fn verify_bound_consistency(inst: &ShatterInstance, spec_of_class: &GcnnSpec) -> Result<bool> {
    inst.check()?;
    spec_of_class.check()?;
    let net = &inst.network_spec;
    let contained = spec_of_class.k >= net.k
        && spec_of_class.r == net.r
        && spec_of_class.depth() == net.depth()
        && spec_of_class.widths[0] == net.widths[0]
        && spec_of_class.widths.iter().skip(1).zip(net.widths.iter().skip(1)).all(|(c, n)| c >= n);
    if !contained {
        return Err(Error::invalid(format!(
            "class {:?} does not contain the instance networks {:?}",
            spec_of_class.widths, net.widths
        )));
    }
    let upper = vc_upper_by_search(spec_of_class)?;
    Ok((inst.m as u64) <= upper)
}

fn random_signal<R: rand::Rng>(rng: &mut R, channels: usize, r: usize, scale: f64) -> Signal {
    let values = (0..channels)
        .map(|_| (0..r).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();
    Signal::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{
        build_composite_instance, build_hypercube_lift, build_shatter_instance, indicator_net,
        lift_dnn_to_gcnn, ThresholdedDnn,
    };
    use crate::group::{build_cyclic, build_dihedral, build_grid_translation};
    use crate::network::{random_dnn_params, random_gcnn_params, DenseLayer};
    use crate::signal::identity_indicator_basis;

    #[test]
    fn window_instance_r8_certifies() {
        let g = build_cyclic(8).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 20.0).unwrap();
        let report = verify_shattering(&inst).unwrap();
        assert_eq!(report.m, 3);
        assert_eq!(report.labelings_total, 8);
        assert_eq!(report.labelings_realized, 8);
        assert!(report.success);
        assert!(report.certified);
        assert!(report.failures.is_empty());
        // dyadic spacing: margins are exact
        assert_eq!(report.max_margin_violation, 0.0);
    }

    #[test]
    fn sequential_and_default_modes_agree() {
        let g = build_cyclic(8).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 20.0).unwrap();
        let mut a = verify_shattering_with(&inst, Parallelism::Sequential).unwrap();
        let mut b = verify_shattering(&inst).unwrap();
        a.wall_time_seconds = None;
        b.wall_time_seconds = None;
        assert_eq!(a, b);
    }

    #[test]
    fn perturbed_classifier_is_reported() {
        let g = build_cyclic(8).unwrap();
        let mut inst = build_shatter_instance(&g, 0.0, 20.0).unwrap();
        // shift classifier 5's window off its point, past the 0.5 margin
        for b in inst.classifiers[5].layers[0].bias.iter_mut() {
            *b += 10.0;
        }
        let report = verify_shattering(&inst).unwrap();
        assert!(!report.success);
        assert!(!report.certified);
        assert!(report.labelings_realized < report.labelings_total);
        assert!(report.failures.iter().any(|f| f.labeling_mask == 5));
        assert!(report.max_margin_violation >= 0.5);
    }

    #[test]
    fn zero_function_instance_succeeds_vacuously() {
        let g = build_cyclic(2).unwrap();
        let spec = GcnnSpec::new(1, vec![1, 1], 2).unwrap();
        let inst = ShatterInstance {
            group: g.clone(),
            m: 0,
            functions: vec![],
            network_spec: spec.clone(),
            basis: identity_indicator_basis(&g),
            classifiers: vec![GcnnParams::zeros(&spec)],
            threshold: 0.5,
            expected_margin: 0.5,
            budget_weights: 4,
            budget_depth: 1,
            provenance: Provenance::IntervalWindows { interval: [0.0, 1.0] },
        };
        let report = verify_shattering(&inst).unwrap();
        assert!(report.success);
        assert_eq!(report.labelings_total, 1);
        assert_eq!(report.labelings_realized, 1);
        assert_eq!(report.max_margin_violation, 0.0);
    }

    #[test]
    fn composite_and_hypercube_instances_certify() {
        let g = build_cyclic(4).unwrap();
        let inst = build_composite_instance(&g, 2).unwrap();
        let report = verify_shattering(&inst).unwrap();
        assert!(report.success, "composite: {:?}", report.failures);
        assert_eq!(report.labelings_realized, 16);

        let points = vec![vec![-0.5], vec![0.5]];
        let mk = |w: f64, c: f64, thr: f64| ThresholdedDnn {
            spec: DnnSpec::new(vec![1, 1]).unwrap(),
            params: DnnParams { layers: vec![DenseLayer { weight: vec![vec![w]], bias: vec![c] }] },
            threshold: thr,
        };
        let nets = vec![
            mk(0.0, 0.0, 0.5),
            mk(0.0, -1.0, 0.5),
            mk(-1.0, 0.0, 0.25),
            mk(1.0, 0.0, 0.25),
        ];
        let inst = build_hypercube_lift(&points, &nets, &g, 2.0, 4.0).unwrap();
        let report = verify_shattering(&inst).unwrap();
        assert!(report.success, "hypercube: {:?}", report.failures);
        assert!(report.certified);
    }

    #[test]
    fn sampled_mode_flags_itself() {
        let g = build_cyclic(8).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 20.0).unwrap();
        let report = verify_shattering_sampled(&inst, 16, 7).unwrap();
        assert!(matches!(report.mode, CoverageMode::Sampled { samples: 16 }));
        assert!(!report.certified);
        assert!(report.success);
        assert!(verify_shattering_sampled(&inst, 0, 7).is_err());
    }

    #[test]
    fn invariance_trivial_group_is_exact() {
        // only the identity element exists, so the action is a no-op
        let g = build_cyclic(1).unwrap();
        let spec = GcnnSpec::new(1, vec![1, 3, 1], 1).unwrap();
        let mut rng = stream(3, 0);
        let params = random_gcnn_params(&spec, &mut rng, 1.0).unwrap();
        let basis = identity_indicator_basis(&g);
        let dev = verify_invariance(&spec, &params, &basis, &g, 50, 3).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn invariance_on_random_nets() {
        let g = build_cyclic(8).unwrap();
        let spec = GcnnSpec::new(2, vec![2, 3, 1], 8).unwrap();
        let mut rng = stream(4, 0);
        let params = random_gcnn_params(&spec, &mut rng, 1.0).unwrap();
        let basis = KernelBasis::new(
            (0..2).map(|s| (0..8).map(|d| if d == s { 1.0 } else { 0.0 }).collect()).collect(),
        );
        let dev = verify_invariance(&spec, &params, &basis, &g, 100, 4).unwrap();
        assert!(dev <= 1e-9, "deviation {dev}");
    }

    #[test]
    fn invariance_rejects_grids() {
        let g = build_grid_translation(3, 3).unwrap();
        let spec = GcnnSpec::new(1, vec![1, 1], g.r).unwrap();
        let params = GcnnParams::zeros(&spec);
        let basis = identity_indicator_basis(&g);
        assert!(matches!(
            verify_invariance(&spec, &params, &basis, &g, 10, 0),
            Err(Error::UnsupportedOperation(_))
        ));
    }

    #[test]
    fn lift_equality_zero_and_random() {
        let g = build_dihedral(3).unwrap();
        let dspec = DnnSpec::new(vec![2, 4, 3, 1]).unwrap();
        let zero = DnnParams::zeros(&dspec);
        let (spec, params, basis) = lift_dnn_to_gcnn(&dspec, &zero, &g).unwrap();
        let res = verify_lift_equality(&dspec, &zero, &spec, &params, &basis, &g, 20, 9).unwrap();
        assert_eq!(res, 0.0);

        let mut rng = stream(9, 1);
        for _ in 0..10 {
            let dparams = random_dnn_params(&dspec, &mut rng, 1.5).unwrap();
            let (spec, params, basis) = lift_dnn_to_gcnn(&dspec, &dparams, &g).unwrap();
            let res =
                verify_lift_equality(&dspec, &dparams, &spec, &params, &basis, &g, 100, 9).unwrap();
            assert!(res <= 1e-9, "residual {res}");
        }
    }

    #[test]
    fn lift_equality_negative_control() {
        // shifted basis: the lift no longer matches; the verifier reports
        // the residual instead of erroring
        let g = build_cyclic(4).unwrap();
        let (dspec, dparams) = indicator_net(0.0, 1.0, 0.5).unwrap();
        let (spec, params, _) = lift_dnn_to_gcnn(&dspec, &dparams, &g).unwrap();
        let shifted = KernelBasis::new(vec![vec![0.0, 1.0, 0.0, 0.0]]);
        let res =
            verify_lift_equality(&dspec, &dparams, &spec, &params, &shifted, &g, 50, 2).unwrap();
        assert!(res.is_finite());
    }

    #[test]
    fn bound_consistency_examples() {
        let g = build_cyclic(16).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 1.0).unwrap();
        assert_eq!(inst.m, 4);
        assert!(verify_bound_consistency(&inst, &inst.network_spec).unwrap());

        let g = build_cyclic(8).unwrap();
        let inst = build_composite_instance(&g, 3).unwrap();
        assert_eq!(inst.m, 9);
        let class = GcnnSpec::new(1, vec![1, 12, 1], 8).unwrap();
        assert!(verify_bound_consistency(&inst, &class).unwrap());

        // class too narrow to contain the 12-channel instance networks
        let undersized = GcnnSpec::new(1, vec![1, 4, 1], 8).unwrap();
        assert!(matches!(
            verify_bound_consistency(&inst, &undersized),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn report_serialization_round_trip() {
        let g = build_cyclic(4).unwrap();
        let inst = build_shatter_instance(&g, 0.0, 1.0).unwrap();
        let mut report = verify_shattering(&inst).unwrap();
        report.wall_time_seconds = None;
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("wall_time_seconds"));
        let back: ShatterReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
        assert_eq!(
            ShatterReport::csv_header().split(',').count(),
            report.csv_row().split(',').count()
        );
    }
}
