//! Measure families evaluated over partitions of a pure state.
//!
//! Each partition-functional family reduces to per-block marginals (entropy
//! sums, purity deficits, trace-root sums) or to a fidelity gap against the
//! tensor product of the block marginals. Partitions may mention only a subset
//! of the parties; unmentioned parties are simply not part of the view.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    self, fidelity_affinity, fidelity_uhlmann, matrix_sqrt, trace_norm, trace_sqrt, EntropyParams,
};
use crate::partition::Partition;
use crate::state::{DensityOperator, PureState, State};

/// The measure families. `SumBipartitions`/`SumTripartitions` are the
/// four-party split sums (tokens `sum1234_2` and `sum1234_3`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ef,
    Tau,
    Concurrence,
    #[serde(rename = "negativity")]
    NegativityN,
    #[serde(rename = "tsallis")]
    TsallisT,
    #[serde(rename = "renyi")]
    RenyiR,
    FidF,
    FidSqrtF,
    #[serde(rename = "fid_af")]
    FidAF,
    Gmc,
    #[serde(rename = "sum1234_2")]
    SumBipartitions,
    #[serde(rename = "sum1234_3")]
    SumTripartitions,
}

impl Family {
    /// Families defined as a functional of one partition (everything except
    /// the bipartition minimum and the split sums).
    pub fn is_partition_functional(self) -> bool {
        !matches!(
            self,
            Family::Gmc | Family::SumBipartitions | Family::SumTripartitions
        )
    }

    /// Families whose value is a sum/deficit over block marginals alone.
    pub fn is_marginal_sum(self) -> bool {
        matches!(
            self,
            Family::Ef
                | Family::Tau
                | Family::Concurrence
                | Family::NegativityN
                | Family::TsallisT
                | Family::RenyiR
        )
    }

    /// Families that satisfy the block-combining hierarchy, hence admit the
    /// tight monogamy audit.
    pub fn is_complete(self) -> bool {
        matches!(
            self,
            Family::Ef
                | Family::Tau
                | Family::Concurrence
                | Family::TsallisT
                | Family::SumBipartitions
        )
    }

    /// Command-line/JSON token.
    pub fn token(self) -> &'static str {
        match self {
            Family::Ef => "ef",
            Family::Tau => "tau",
            Family::Concurrence => "concurrence",
            Family::NegativityN => "negativity",
            Family::TsallisT => "tsallis",
            Family::RenyiR => "renyi",
            Family::FidF => "fid_f",
            Family::FidSqrtF => "fid_sqrt_f",
            Family::FidAF => "fid_af",
            Family::Gmc => "gmc",
            Family::SumBipartitions => "sum1234_2",
            Family::SumTripartitions => "sum1234_3",
        }
    }
}

/// Parses a family token, accepting a trailing `_g` as the genuine marker
/// (so `c_g` is the genuine concurrence). Returns (family, genuine).
pub fn parse_family_token(token: &str) -> Result<(Family, bool)> {
    let t = token.trim().to_ascii_lowercase().replace('-', "_");
    if let Some(f) = base_family(&t) {
        return Ok((f, false));
    }
    if let Some(stripped) = t.strip_suffix("_g") {
        if let Some(f) = base_family(stripped) {
            return Ok((f, true));
        }
    }
    Err(Error::InvalidArgument(format!(
        "unknown measure family '{token}'"
    )))
}

fn base_family(t: &str) -> Option<Family> {
    Some(match t {
        "ef" | "e_f" => Family::Ef,
        "tau" => Family::Tau,
        "concurrence" | "c" => Family::Concurrence,
        "negativity" | "n" => Family::NegativityN,
        "tsallis" | "t" => Family::TsallisT,
        "renyi" | "r" => Family::RenyiR,
        "fid_f" | "f" => Family::FidF,
        "fid_sqrt_f" | "sqrt_f" => Family::FidSqrtF,
        "fid_af" | "af" => Family::FidAF,
        "gmc" => Family::Gmc,
        "sum1234_2" | "sum2" => Family::SumBipartitions,
        "sum1234_3" | "sum3" => Family::SumTripartitions,
        _ => return None,
    })
}

/// Plain value or the delta-gated genuine version.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Plain,
    Genuine,
}

/// How mixed inputs are handled: decomposition search, or the closed
/// partial-transpose form (negativity only).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedStrategy {
    #[default]
    ConvexRoof,
    Direct,
}

/// A fully specified measure: family, entropy orders, plain/genuine, mixed
/// handling, and the inner family for the split sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub family: Family,
    #[serde(default)]
    pub params: EntropyParams,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub mixed_strategy: MixedStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Family>,
}

impl MeasureSpec {
    pub fn new(family: Family) -> Self {
        MeasureSpec {
            family,
            params: EntropyParams::default(),
            variant: Variant::Plain,
            mixed_strategy: MixedStrategy::ConvexRoof,
            inner: None,
        }
    }

    pub fn genuine(mut self) -> Self {
        self.variant = Variant::Genuine;
        self
    }

    pub fn with_params(mut self, params: EntropyParams) -> Self {
        self.params = params;
        self
    }

    pub fn direct(mut self) -> Self {
        self.mixed_strategy = MixedStrategy::Direct;
        self
    }

    pub fn with_inner(mut self, inner: Family) -> Self {
        self.inner = Some(inner);
        self
    }

    /// Inner family for the split sums; bipartite splits default to the
    /// concurrence.
    pub fn inner_family(&self) -> Family {
        self.inner.unwrap_or(Family::Concurrence)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.mixed_strategy == MixedStrategy::Direct && self.family != Family::NegativityN {
            return Err(Error::InvalidArgument(format!(
                "direct mixed evaluation only exists for the negativity family, not {}",
                self.family.token()
            )));
        }
        match self.family {
            Family::SumTripartitions => {
                let inner = self.inner.ok_or_else(|| {
                    Error::InvalidArgument(
                        "sum1234_3 needs an inner tripartite family (--inner)".into(),
                    )
                })?;
                check_inner(inner)?;
            }
            Family::SumBipartitions => {
                if let Some(inner) = self.inner {
                    check_inner(inner)?;
                }
            }
            _ => {
                if self.inner.is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "inner family only applies to the split sums, not {}",
                        self.family.token()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_inner(inner: Family) -> Result<()> {
    if inner.is_partition_functional() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "inner family must itself be a partition functional, got {}",
            inner.token()
        )))
    }
}

/// Evaluates a plain partition-functional family on a pure state.
///
/// Zero within 1e−9 exactly when the state is fully product across the
/// partition's blocks.
pub fn evaluate_pure(spec: &MeasureSpec, psi: &PureState, partition: &Partition) -> Result<f64> {
    spec.validate()?;
    if spec.variant == Variant::Genuine {
        return Err(Error::InvalidArgument(
            "genuine variants are evaluated through the delta-gated entry points".into(),
        ));
    }
    partition_value(spec.family, &spec.params, psi, partition)
}

/// Family dispatch shared by the plain and delta-gated paths.
pub(crate) fn partition_value(
    family: Family,
    params: &EntropyParams,
    psi: &PureState,
    partition: &Partition,
) -> Result<f64> {
    if !family.is_partition_functional() {
        return Err(Error::InvalidArgument(format!(
            "family {} is not a partition functional; use its dedicated entry point",
            family.token()
        )));
    }
    if family.is_marginal_sum() {
        // Complementary blocks of a fully covered pure state share a
        // spectrum, so one Schmidt decomposition stands in for both
        // marginals and sidesteps the cancellation that forming a
        // near-pure reduced state costs the sqrt-type families.
        if partition.block_count() == 2
            && partition.party_count() == psi.shape().subsystem_count()
        {
            let dims = psi.shape().dims();
            let blocks = partition.blocks();
            let weight = |b: &[usize]| b.iter().map(|&i| dims[i]).product::<usize>();
            let small = if weight(&blocks[0]) <= weight(&blocks[1]) {
                &blocks[0]
            } else {
                &blocks[1]
            };
            let mu = psi.schmidt_squares(small)?;
            return two_block_spectrum_value(family, params, &mu);
        }
        let marginals = block_marginals(psi, partition)?;
        marginal_sum_value(family, params, &marginals)
    } else {
        fidelity_gap(family, psi, partition)
    }
}

/// Marginal-sum value of a full-cover bipartition, from the spectrum the two
/// blocks share. Quadratic families use Σμ = 1 to trade 1 − Σμ² for the
/// cancellation-free 2 Σ_{i<j} μ_i μ_j.
fn two_block_spectrum_value(family: Family, params: &EntropyParams, mu: &[f64]) -> Result<f64> {
    match family {
        Family::Ef => Ok(functionals::von_neumann_spectrum(mu, params.log_base)),
        Family::Tau => {
            let mut cross = 0.0;
            for i in 0..mu.len() {
                for j in i + 1..mu.len() {
                    cross += mu[i] * mu[j];
                }
            }
            Ok(4.0 * cross)
        }
        Family::Concurrence => Ok(two_block_spectrum_value(Family::Tau, params, mu)?.sqrt()),
        Family::NegativityN => {
            let root_sum: f64 = mu.iter().map(|&l| l.max(0.0).sqrt()).sum();
            Ok((2.0 * (root_sum * root_sum - 1.0)).max(0.0))
        }
        Family::TsallisT => functionals::tsallis_spectrum(mu, params.q),
        Family::RenyiR => functionals::renyi_spectrum(mu, params.alpha),
        _ => Err(Error::InvalidArgument(format!(
            "{} is not a marginal-sum family",
            family.token()
        ))),
    }
}

/// One reduced state per block, in block order.
pub fn block_marginals(psi: &PureState, partition: &Partition) -> Result<Vec<DensityOperator>> {
    partition
        .blocks()
        .iter()
        .map(|b| psi.partial_trace(b))
        .collect()
}

fn marginal_sum_value(
    family: Family,
    params: &EntropyParams,
    marginals: &[DensityOperator],
) -> Result<f64> {
    let k = marginals.len() as f64;
    match family {
        Family::Ef => Ok(0.5
            * marginals
                .iter()
                .map(|m| functionals::von_neumann(m, params.log_base))
                .sum::<f64>()),
        Family::Tau => {
            let purity_sum: f64 = marginals.iter().map(DensityOperator::purity).sum();
            Ok((k - purity_sum).max(0.0))
        }
        Family::Concurrence => Ok(marginal_sum_value(Family::Tau, params, marginals)?.sqrt()),
        Family::NegativityN => {
            let root_sum: f64 = marginals
                .iter()
                .map(|m| {
                    let t = trace_sqrt(m);
                    t * t
                })
                .sum();
            Ok((root_sum - k).max(0.0))
        }
        Family::TsallisT => {
            let mut total = 0.0;
            for m in marginals {
                total += functionals::tsallis(m, params.q)?;
            }
            Ok(0.5 * total)
        }
        Family::RenyiR => {
            let mut total = 0.0;
            for m in marginals {
                total += functionals::renyi(m, params.alpha)?;
            }
            Ok(0.5 * total)
        }
        _ => unreachable!("marginal-sum dispatch"),
    }
}

/// 1 − fidelity(state over the partition's parties, ⊗ block marginals), with
/// the fidelity flavor chosen by the family.
fn fidelity_gap(family: Family, psi: &PureState, partition: &Partition) -> Result<f64> {
    let view = psi.regroup(partition)?;
    let k = partition.block_count();
    let marginals: Vec<DensityOperator> = (0..k)
        .map(|i| view.partial_trace(&[i]))
        .collect::<Result<_>>()?;

    let f = match &view {
        State::Pure(p) => match family {
            // Rank-1 reduction: F(|ψ⟩⟨ψ|, σ) = ⟨ψ|σ|ψ⟩.
            Family::FidF | Family::FidSqrtF => overlap(p, &kron_matrices(&marginals, |m| {
                Ok(m.matrix().clone())
            })?),
            Family::FidAF => {
                let root = kron_matrices(&marginals, |m| matrix_sqrt(m.matrix()))?;
                let a = overlap(p, &root);
                a * a
            }
            _ => unreachable!("fidelity dispatch"),
        },
        State::Mixed(r) => {
            let prod = kron_matrices(&marginals, |m| Ok(m.matrix().clone()))?;
            let sigma = DensityOperator::new(view.shape().clone(), prod)?;
            match family {
                Family::FidF | Family::FidSqrtF => fidelity_uhlmann(r, &sigma)?,
                Family::FidAF => fidelity_affinity(r, &sigma)?,
                _ => unreachable!("fidelity dispatch"),
            }
        }
    };
    let gap = match family {
        Family::FidF | Family::FidAF => 1.0 - f,
        Family::FidSqrtF => 1.0 - f.sqrt(),
        _ => unreachable!("fidelity dispatch"),
    };
    Ok(gap.max(0.0))
}

fn kron_matrices(
    marginals: &[DensityOperator],
    map: impl Fn(&DensityOperator) -> Result<DMatrix<Complex64>>,
) -> Result<DMatrix<Complex64>> {
    let mut out = map(&marginals[0])?;
    for m in &marginals[1..] {
        out = out.kronecker(&map(m)?);
    }
    Ok(out)
}

fn overlap(p: &PureState, op: &DMatrix<Complex64>) -> f64 {
    let w = op * p.amplitudes();
    p.amplitudes().dotc(&w).re.clamp(0.0, 1.0)
}

/// Two-block evaluation. The concurrence (and the bipartition minimum built on
/// it) uses √(2(1−purity)) of one side; every other family is the k = 2 case.
pub fn bipartite_value(spec: &MeasureSpec, psi: &PureState, cut: &Partition) -> Result<f64> {
    spec.validate()?;
    if cut.block_count() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected a bipartition, got {} block(s)",
            cut.block_count()
        )));
    }
    match spec.family {
        // Same √(2(1 − purity)) form for both families.
        Family::Concurrence | Family::Gmc => {
            if cut.party_count() == psi.shape().subsystem_count() {
                let mu = psi.schmidt_squares(&cut.blocks()[0])?;
                let tau = two_block_spectrum_value(Family::Tau, &spec.params, &mu)?;
                return Ok(tau.sqrt());
            }
            let rho = psi.partial_trace(&cut.blocks()[0])?;
            Ok((2.0 * (1.0 - rho.purity())).max(0.0).sqrt())
        }
        _ => partition_value(spec.family, &spec.params, psi, cut),
    }
}

/// Negativity of a (possibly mixed) state: Σ_i ‖ρ^{T_i}‖_tr − m over the
/// single-party partial transposes.
pub fn negativity_mixed(rho: &DensityOperator) -> Result<f64> {
    let m = rho.shape().subsystem_count();
    let mut total = 0.0;
    for i in 0..m {
        total += trace_norm(&rho.partial_transpose(&[i])?)?;
    }
    Ok((total - m as f64).max(0.0))
}

/// Additivity residual |E(left ⊗ right) − E(left) − E(right)|, everything
/// across finest partitions.
pub fn unification_check(spec: &MeasureSpec, left: &PureState, right: &PureState) -> Result<f64> {
    let joint = left.tensor(right)?;
    let whole = evaluate_pure(
        spec,
        &joint,
        &Partition::finest(joint.shape().subsystem_count()),
    )?;
    let lv = evaluate_pure(
        spec,
        left,
        &Partition::finest(left.shape().subsystem_count()),
    )?;
    let rv = evaluate_pure(
        spec,
        right,
        &Partition::finest(right.shape().subsystem_count()),
    )?;
    Ok((whole - lv - rv).abs())
}
