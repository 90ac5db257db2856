//! The delta gate on pure states, the bipartition minimum (GMC), delta-gated
//! genuine measures, and the gated split sums over cuts.
//!
//! Everything here takes pure inputs; mixed states go through the
//! decomposition search in the roof module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::EntropyParams;
use crate::measure::{self, Family, MeasureSpec, Variant};
use crate::partition::{all_bipartitions, all_partitions, Partition};
use crate::state::{PureState, State};

/// A bipartition whose one-sided marginal purity reaches 1 − tol counts as a
/// product cut; this separates genuine from product-within-noise at double
/// precision.
pub const DELTA_TOL: f64 = 1e-8;

/// Result of the pure-state biseparability scan behind the delta gate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaVerdict {
    /// 1 for genuinely entangled, 0 for biseparable.
    pub value: u8,
    /// First bipartition (in enumeration order) with product structure.
    pub witness: Option<Partition>,
    /// min over bipartitions of (1 − marginal purity): distance from the
    /// nearest product cut.
    pub max_offproduct: f64,
}

impl DeltaVerdict {
    pub fn gate(&self) -> f64 {
        f64::from(self.value)
    }
}

/// Scans every bipartition of a pure state for product structure.
pub fn delta_pure(psi: &PureState, tol: f64) -> Result<DeltaVerdict> {
    let m = psi.shape().subsystem_count();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "the delta gate needs at least two subsystems".into(),
        ));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta tolerance must be positive, got {tol}"
        )));
    }
    let mut max_offproduct = f64::INFINITY;
    let mut witness = None;
    for cut in all_bipartitions(m)? {
        let purity = psi.partial_trace(&cut.blocks()[0])?.purity();
        let off = (1.0 - purity).max(0.0);
        if off < max_offproduct {
            max_offproduct = off;
        }
        if witness.is_none() && purity >= 1.0 - tol {
            witness = Some(cut);
        }
    }
    Ok(DeltaVerdict {
        value: u8::from(witness.is_none()),
        witness,
        max_offproduct,
    })
}

/// Minimum bipartite concurrence over all bipartitions, with the cut that
/// attains it (ties: first in enumeration order).
pub fn gmc_pure_detailed(psi: &PureState) -> Result<(f64, Partition)> {
    let m = psi.shape().subsystem_count();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "the bipartition minimum needs at least two subsystems".into(),
        ));
    }
    let spec = MeasureSpec::new(Family::Gmc);
    let mut best: Option<(f64, Partition)> = None;
    for cut in all_bipartitions(m)? {
        let value = measure::bipartite_value(&spec, psi, &cut)?;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, cut));
        }
    }
    Ok(best.expect("at least one bipartition"))
}

/// Minimum bipartite concurrence over all bipartitions.
pub fn gmc_pure(psi: &PureState) -> Result<f64> {
    gmc_pure_detailed(psi).map(|(v, _)| v)
}

/// Delta-gated value of a partition-functional family: delta of the regrouped
/// view times the plain value. The partition must keep every subsystem.
pub fn evaluate_genuine_pure(
    spec: &MeasureSpec,
    psi: &PureState,
    partition: &Partition,
) -> Result<f64> {
    spec.validate()?;
    let view = pure_view(psi, partition)?;
    if view.shape().subsystem_count() < 2 {
        // A lone block holds no multipartite entanglement.
        return Ok(0.0);
    }
    match spec.family {
        Family::Gmc => gmc_pure(&view),
        Family::SumBipartitions => sum_over_bipartitions(spec.inner_family(), &spec.params, &view),
        Family::SumTripartitions => {
            let inner = spec.inner.ok_or_else(|| {
                Error::InvalidArgument("sum1234_3 needs an inner tripartite family".into())
            })?;
            sum_over_tripartitions(inner, &spec.params, &view)
        }
        _ => {
            let gate = delta_pure(&view, DELTA_TOL)?;
            if gate.value == 0 {
                return Ok(0.0);
            }
            let k = view.shape().subsystem_count();
            measure::partition_value(spec.family, &spec.params, &view, &Partition::finest(k))
        }
    }
}

/// Evaluates any family, plain or genuine, on a pure state over a full-cover
/// partition. The single entry point used by the command line.
pub fn evaluate_any_pure(
    spec: &MeasureSpec,
    psi: &PureState,
    partition: &Partition,
) -> Result<f64> {
    spec.validate()?;
    match (spec.family.is_partition_functional(), spec.variant) {
        (true, Variant::Plain) => measure::evaluate_pure(spec, psi, partition),
        _ => evaluate_genuine_pure(spec, psi, partition),
    }
}

/// Per-cut inner values over all bipartitions of a pure state. Seven cuts on
/// the native four-party system; regrouped views bring their own count.
pub fn bipartition_split_values(
    inner: Family,
    params: &EntropyParams,
    psi: &PureState,
) -> Result<Vec<(Partition, f64)>> {
    let spec = MeasureSpec::new(inner).with_params(*params);
    all_bipartitions(psi.shape().subsystem_count())?
        .into_iter()
        .map(|cut| {
            let v = measure::bipartite_value(&spec, psi, &cut)?;
            Ok((cut, v))
        })
        .collect()
}

/// Per-split inner values over the three-block partitions of a pure state:
/// six on the native four-party system.
pub fn tripartition_split_values(
    inner: Family,
    params: &EntropyParams,
    psi: &PureState,
) -> Result<Vec<(Partition, f64)>> {
    let m = psi.shape().subsystem_count();
    if m < 3 {
        return Err(Error::InvalidArgument(format!(
            "three-block splits need at least 3 subsystems, got {m}"
        )));
    }
    let parties: Vec<usize> = (0..m).collect();
    all_partitions(&parties)?
        .into_iter()
        .filter(|p| p.block_count() == 3)
        .map(|split| {
            let v = measure::partition_value(inner, params, psi, &split)?;
            Ok((split, v))
        })
        .collect()
}

/// delta times the sum of inner bipartite values over all cuts.
pub fn sum_over_bipartitions(
    inner: Family,
    params: &EntropyParams,
    psi: &PureState,
) -> Result<f64> {
    let splits = bipartition_split_values(inner, params, psi)?;
    gate_times_sum(psi, splits.iter().map(|(_, v)| v).sum())
}

/// delta times the sum of inner tripartite values over all three-block splits.
pub fn sum_over_tripartitions(
    inner: Family,
    params: &EntropyParams,
    psi: &PureState,
) -> Result<f64> {
    if !inner.is_partition_functional() {
        return Err(Error::InvalidArgument(format!(
            "inner family must be a partition functional, got {}",
            inner.token()
        )));
    }
    let splits = tripartition_split_values(inner, params, psi)?;
    gate_times_sum(psi, splits.iter().map(|(_, v)| v).sum())
}

fn gate_times_sum(psi: &PureState, total: f64) -> Result<f64> {
    let gate = delta_pure(psi, DELTA_TOL)?;
    Ok(gate.gate() * total)
}

/// Regroups and insists the result stays pure (no discarded subsystems).
fn pure_view(psi: &PureState, partition: &Partition) -> Result<PureState> {
    match psi.regroup(partition)? {
        State::Pure(p) => Ok(p),
        State::Mixed(_) => Err(Error::InvalidArgument(
            "partition discards subsystems, leaving a mixed marginal; \
             use the decomposition-search evaluators"
                .into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::partition::{coarser_partitions, CoarsenMode};
    use crate::state::{random_pure_with, SystemShape};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn delta_fixed_points() {
        let ghz = fixtures::ghz(3);
        let v = delta_pure(&ghz, DELTA_TOL).unwrap();
        assert_eq!(v.value, 1);
        assert!(v.witness.is_none());
        assert_relative_eq!(v.max_offproduct, 0.5, epsilon = 1e-12);

        let bp = fixtures::bell_product();
        let v = delta_pure(&bp, DELTA_TOL).unwrap();
        assert_eq!(v.value, 0);
        assert_eq!(
            v.witness,
            Some(Partition::new(vec![vec![0, 1], vec![2]]).unwrap())
        );

        let bench = fixtures::four_qubit_benchmark();
        let v = delta_pure(&bench, DELTA_TOL).unwrap();
        assert_eq!(v.value, 1);
        assert!(v.max_offproduct > 1e-3);

        let one = SystemShape::qubits(1).unwrap();
        let psi = crate::state::random_pure(&one, 5).unwrap();
        assert!(delta_pure(&psi, DELTA_TOL).is_err());
        assert!(delta_pure(&ghz, 0.0).is_err());
    }

    #[test]
    fn gmc_fixed_points() {
        let (v, cut) = gmc_pure_detailed(&fixtures::four_qubit_benchmark()).unwrap();
        assert_relative_eq!(v, 15f64.sqrt() / 8.0, epsilon = 1e-12);
        assert_eq!(cut, Partition::new(vec![vec![0, 1, 2], vec![3]]).unwrap());

        assert_relative_eq!(gmc_pure(&fixtures::ghz(3)).unwrap(), 1.0, epsilon = 1e-12);
        assert!(gmc_pure(&fixtures::bell_product()).unwrap() < 1e-7);
    }

    #[test]
    fn gmc_is_the_minimum_over_cuts() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let spec = MeasureSpec::new(Family::Gmc);
        for m in [3usize, 4] {
            let shape = SystemShape::qubits(m).unwrap();
            let cuts = all_bipartitions(m).unwrap();
            for _ in 0..10 {
                let psi = random_pure_with(&shape, &mut rng).unwrap();
                let g = gmc_pure(&psi).unwrap();
                for cut in &cuts {
                    let v = measure::bipartite_value(&spec, &psi, cut).unwrap();
                    assert!(g <= v + 1e-12);
                }
            }
        }
    }

    #[test]
    fn delta_and_gmc_vanish_together() {
        // Faithfulness at the pure level, with the tolerance coupling
        // gmc ≤ √(2 tol) when a cut's purity reaches 1 − tol.
        let bound = (2.0 * DELTA_TOL).sqrt() * 1.01;
        let mut rng = ChaCha12Rng::seed_from_u64(47);
        let shape = SystemShape::qubits(3).unwrap();
        for i in 0..20 {
            let psi = if i % 4 == 0 {
                // Product of a random pair state with |0⟩.
                let pair_shape =
                    SystemShape::new(vec!["A".into(), "B".into()], vec![2, 2]).unwrap();
                let pair = random_pure_with(&pair_shape, &mut rng).unwrap();
                let zero = crate::state::PureState::from_terms(
                    SystemShape::new(vec!["C".into()], vec![2]).unwrap(),
                    &[(0, num_complex::Complex64::new(1.0, 0.0))],
                )
                .unwrap();
                pair.tensor(&zero).unwrap()
            } else {
                random_pure_with(&shape, &mut rng).unwrap()
            };
            let d = delta_pure(&psi, DELTA_TOL).unwrap();
            let g = gmc_pure(&psi).unwrap();
            if d.value == 0 {
                assert!(g <= bound, "biseparable but gmc = {g}");
            } else {
                assert!(g > bound, "genuine but gmc = {g}");
            }
        }
    }

    #[test]
    fn genuine_values_on_fixtures() {
        let ghz = fixtures::ghz(3);
        let p3 = Partition::finest(3);
        let ef_g = MeasureSpec::new(Family::Ef).genuine();
        assert_relative_eq!(
            evaluate_genuine_pure(&ef_g, &ghz, &p3).unwrap(),
            1.5,
            epsilon = 1e-12
        );

        let tau_g = MeasureSpec::new(Family::Tau).genuine();
        assert_eq!(
            evaluate_genuine_pure(&tau_g, &fixtures::bell_product(), &p3).unwrap(),
            0.0
        );

        let c_g = MeasureSpec::new(Family::Concurrence).genuine();
        assert_relative_eq!(
            evaluate_genuine_pure(&c_g, &fixtures::w3(), &p3).unwrap(),
            (4.0f64 / 3.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bipartition_splits_match_enumerated_cuts() {
        // The seven cuts of four parties, as enumerated in the reference
        // derivation: AB|CD, A|BCD, AC|BD, ABC|D, AD|BC, B|ACD, C|ABD.
        let expected: Vec<Partition> = [
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![0], vec![1, 2, 3]],
            vec![vec![0, 2], vec![1, 3]],
            vec![vec![0, 1, 2], vec![3]],
            vec![vec![0, 3], vec![1, 2]],
            vec![vec![1], vec![0, 2, 3]],
            vec![vec![2], vec![0, 1, 3]],
        ]
        .into_iter()
        .map(|b| Partition::new(b).unwrap())
        .collect();
        let mut expected_sorted = expected.clone();
        expected_sorted.sort();
        let mut actual = all_bipartitions(4).unwrap();
        actual.sort();
        assert_eq!(actual, expected_sorted);

        // The six three-block splits: A|B|CD, A|BC|D, AC|B|D, AB|C|D,
        // AD|B|C, A|BD|C.
        let expected3: Vec<Partition> = [
            vec![vec![0], vec![1], vec![2, 3]],
            vec![vec![0], vec![1, 2], vec![3]],
            vec![vec![0, 2], vec![1], vec![3]],
            vec![vec![0, 1], vec![2], vec![3]],
            vec![vec![0, 3], vec![1], vec![2]],
            vec![vec![0], vec![1, 3], vec![2]],
        ]
        .into_iter()
        .map(|b| Partition::new(b).unwrap())
        .collect();
        let mut expected3_sorted = expected3;
        expected3_sorted.sort();
        let mut actual3: Vec<Partition> = all_partitions(&[0, 1, 2, 3])
            .unwrap()
            .into_iter()
            .filter(|p| p.block_count() == 3)
            .collect();
        actual3.sort();
        assert_eq!(actual3, expected3_sorted);
    }

    #[test]
    fn split_sums_on_ghz4() {
        // Every GHZ₄ one-side marginal is diag(½, ½) (cut 1|3) or
        // ½(|00⟩⟨00| + |11⟩⟨11|) (cut 2|2); both have purity ½, so each of
        // the seven cut concurrences is √(2·½) = 1 and the gated sum is 7.
        let ghz4 = fixtures::ghz(4);
        for cut in all_bipartitions(4).unwrap() {
            let p = ghz4.partial_trace(&cut.blocks()[0]).unwrap().purity();
            assert_relative_eq!(p, 0.5, epsilon = 1e-12);
        }
        let params = EntropyParams::default();
        let total = sum_over_bipartitions(Family::Concurrence, &params, &ghz4).unwrap();
        assert_relative_eq!(total, 7.0, epsilon = 1e-9);

        // Each three-block split sees purities (½, ½, ½): tau = 3 − 3/2 per
        // split, six splits, total 9.
        let total3 = sum_over_tripartitions(Family::Tau, &params, &ghz4).unwrap();
        assert_relative_eq!(total3, 9.0, epsilon = 1e-9);
    }

    #[test]
    fn split_sum_terms_dominate_the_minimum_cut() {
        let bench = fixtures::four_qubit_benchmark();
        let params = EntropyParams::default();
        let gmc = gmc_pure(&bench).unwrap();
        for (cut, v) in
            bipartition_split_values(Family::Concurrence, &params, &bench).unwrap()
        {
            assert!(v >= gmc - 1e-12, "cut {cut:?} below the minimum");
        }
    }

    #[test]
    fn split_sums_vanish_on_biseparable_input() {
        let pair_ab = fixtures::bell_pair();
        let shape_cd = SystemShape::new(vec!["C".into(), "D".into()], vec![2, 2]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        let pair_cd = random_pure_with(&shape_cd, &mut rng).unwrap();
        let psi = pair_ab.tensor(&pair_cd).unwrap();
        let params = EntropyParams::default();
        assert_eq!(
            sum_over_bipartitions(Family::Concurrence, &params, &psi).unwrap(),
            0.0
        );
        assert_eq!(
            sum_over_tripartitions(Family::Tau, &params, &psi).unwrap(),
            0.0
        );
    }

    #[test]
    fn split_sums_are_permutation_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(59);
        let shape = SystemShape::qubits(4).unwrap();
        let perm = Partition::new(vec![vec![3], vec![1], vec![0], vec![2]]).unwrap();
        let params = EntropyParams::default();
        for _ in 0..5 {
            let psi = random_pure_with(&shape, &mut rng).unwrap();
            let permuted = match psi.regroup(&perm).unwrap() {
                State::Pure(p) => p,
                State::Mixed(_) => unreachable!(),
            };
            let a = sum_over_bipartitions(Family::Concurrence, &params, &psi).unwrap();
            let b = sum_over_bipartitions(Family::Concurrence, &params, &permuted).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-9);
            let a3 = sum_over_tripartitions(Family::Tau, &params, &psi).unwrap();
            let b3 = sum_over_tripartitions(Family::Tau, &params, &permuted).unwrap();
            assert_relative_eq!(a3, b3, epsilon = 1e-9);
        }
    }

    #[test]
    fn combine_hierarchy_for_gated_families() {
        // Merging blocks never increases the gated value on genuinely
        // entangled samples.
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let families = [
            Family::Ef,
            Family::Tau,
            Family::Concurrence,
            Family::TsallisT,
        ];
        for m in [3usize, 4] {
            let shape = SystemShape::qubits(m).unwrap();
            let finest = Partition::finest(m);
            let coarser = coarser_partitions(&finest, CoarsenMode::combine()).unwrap();
            for _ in 0..8 {
                let psi = random_pure_with(&shape, &mut rng).unwrap();
                assert_eq!(delta_pure(&psi, DELTA_TOL).unwrap().value, 1);
                for fam in families {
                    let spec = MeasureSpec::new(fam).genuine();
                    let parent = evaluate_genuine_pure(&spec, &psi, &finest).unwrap();
                    for y in &coarser {
                        let child = evaluate_genuine_pure(&spec, &psi, y).unwrap();
                        assert!(
                            parent >= child - 1e-9,
                            "{fam:?} {m} parties: {parent} < {child} at {y:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_local_filter_preserves_the_minimum() {
        // A projective filter whose complementary outcome has zero weight
        // acts isometrically, so the minimum cut concurrence cannot grow.
        let mut rng = ChaCha12Rng::seed_from_u64(67);
        let pair_shape = SystemShape::new(vec!["B".into(), "C".into()], vec![2, 2]).unwrap();
        for _ in 0..5 {
            let chi = random_pure_with(&pair_shape, &mut rng).unwrap();
            let zero = crate::state::PureState::from_terms(
                SystemShape::new(vec!["A".into()], vec![2]).unwrap(),
                &[(0, num_complex::Complex64::new(1.0, 0.0))],
            )
            .unwrap();
            let psi = zero.tensor(&chi).unwrap();
            let before = gmc_pure(&psi).unwrap();
            // Filter P = |0⟩⟨0| on A succeeds with probability one and acts
            // as the identity on the support.
            let mut filtered = psi.amplitudes().clone();
            let half = filtered.len() / 2;
            for i in half..filtered.len() {
                filtered[i] = num_complex::Complex64::ZERO;
            }
            let norm = filtered.norm();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
            let post = crate::state::PureState::new(
                psi.shape().clone(),
                filtered / num_complex::Complex64::from(norm),
            )
            .unwrap();
            let after = gmc_pure(&post).unwrap();
            assert!(after <= before + 1e-9);
        }
    }

    #[test]
    fn view_must_stay_pure_and_sums_scale_with_the_view() {
        let ghz = fixtures::ghz(3);
        let spec = MeasureSpec::new(Family::Tau).genuine();
        let partial = Partition::new(vec![vec![0], vec![1]]).unwrap();
        assert!(evaluate_genuine_pure(&spec, &ghz, &partial).is_err());

        // Three parties: three cuts, each with marginal purity 1/2, so the
        // concurrence sum is 3; the lone three-block split gives tau 3/2.
        let params = EntropyParams::default();
        let two = sum_over_bipartitions(Family::Concurrence, &params, &ghz).unwrap();
        assert_relative_eq!(two, 3.0, epsilon = 1e-12);
        let three = sum_over_tripartitions(Family::Tau, &params, &ghz).unwrap();
        assert_relative_eq!(three, 1.5, epsilon = 1e-12);

        let bell = fixtures::bell_pair();
        assert!(sum_over_tripartitions(Family::Tau, &params, &bell).is_err());
    }

    #[test]
    fn five_party_state_grouped_to_four_supports_the_sums() {
        // A five-party state viewed through a four-block partition feeds the
        // split sums via evaluate_any_pure.
        let mut rng = ChaCha12Rng::seed_from_u64(71);
        let shape = SystemShape::qubits(5).unwrap();
        let psi = random_pure_with(&shape, &mut rng).unwrap();
        let grouping = Partition::new(vec![vec![0, 1], vec![2], vec![3], vec![4]]).unwrap();
        let spec = MeasureSpec::new(Family::SumBipartitions);
        let v = evaluate_any_pure(&spec, &psi, &grouping).unwrap();
        assert!(v > 0.0);
    }
}
