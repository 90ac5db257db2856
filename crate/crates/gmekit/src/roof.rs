//! Decomposition-search extension of pure-state measures to mixed states,
//! the biseparability certificate built on it, and the one evaluation entry
//! point that routes pure and mixed inputs to the right machinery.
//!
//! The search space is the set of pure-state decompositions of a density
//! operator, parameterized by isometries applied to the eigen-ensemble.
//! Local descent runs coordinate sweeps of two-member rotations; values are
//! upper bounds on the true minimum, never certified optima.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::functionals::spectral_cutoff;
use crate::genuine::{self, delta_pure, DELTA_TOL};
use crate::measure::{self, Family, MeasureSpec, MixedStrategy, Variant};
use crate::partition::Partition;
use crate::state::{
    DensityOperator, Ensemble, PureState, State, SystemShape, ENSEMBLE_RECON_TOL,
};

/// Decomposition objective at or below this counts as biseparable-found.
pub const CERTIFICATE_TOL: f64 = 1e-6;

/// Members lighter than this carry no objective weight during descent.
const WEIGHT_FLOOR: f64 = 1e-15;
/// Members lighter than this are dropped from the reported ensemble.
const MEMBER_KEEP: f64 = 1e-12;
/// An objective this close to zero cannot be improved; stop searching.
const ZERO_STOP: f64 = 1e-15;
/// Coarse scan points per rotation angle search (period pi, none at zero).
const COARSE_POINTS: usize = 6;
/// Angle resolution while scouting.
const THETA_TOL_COARSE: f64 = 2e-4;
/// Angle resolution while polishing the leading candidates.
const THETA_TOL_FINE: f64 = 1e-7;
/// Evaluation cap per line minimization.
const LINE_EVAL_CAP: usize = 40;
/// Sweep budget of the scouting pass each restart gets before triage.
const SCOUT_SWEEPS: usize = 30;
/// Scouting pass stops once a sweep improves less than this.
const SCOUT_STOP: f64 = 1e-8;
/// Restarts within this of the best scouted value are polished fully.
const POLISH_MARGIN: f64 = 5e-3;
/// At most this many candidates get the polishing pass.
const POLISH_MAX: usize = 4;

/// Search-budget knobs for the decomposition optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoofConfig {
    /// Independent descent runs; the first is the bare eigen-ensemble.
    pub restarts: usize,
    /// Sweep cap per restart.
    pub max_iters: usize,
    /// A full sweep improving less than this ends the restart.
    pub step_tol: f64,
    /// Decomposition size n, clamped to [rank, rank²]; None picks a default.
    pub ensemble_size: Option<usize>,
    pub seed: u64,
}

impl Default for RoofConfig {
    fn default() -> Self {
        RoofConfig {
            restarts: 32,
            max_iters: 500,
            step_tol: 1e-10,
            ensemble_size: None,
            seed: 0,
        }
    }
}

impl RoofConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.step_tol.is_finite() && self.step_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step tolerance must be positive, got {}",
                self.step_tol
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// Best decomposition found for one roof instance.
#[derive(Clone, Debug)]
pub struct RoofResult {
    /// Upper bound on the true roof value.
    pub value: f64,
    pub ensemble: Ensemble,
    /// Objective of each ensemble member, aligned with `ensemble.members()`.
    pub member_values: Vec<f64>,
    /// Whether the winning restart stopped on tolerance rather than the cap.
    pub converged: bool,
    pub restarts_used: usize,
}

/// Minimizes the ensemble average of an arbitrary pure-state objective over
/// decompositions of `rho`. Deterministic for a given config.
pub fn roof_minimize_fn<F>(objective: F, rho: &DensityOperator, cfg: &RoofConfig) -> Result<RoofResult>
where
    F: Fn(&PureState) -> Result<f64>,
{
    cfg.validate()?;
    let shape = rho.shape().clone();
    let (vals, vecs) = rho.eigensystem();
    let cutoff = spectral_cutoff(&vals);
    let rank = vals.iter().filter(|&&l| l > cutoff).count().max(1);
    let n = match cfg.ensemble_size {
        Some(n) => {
            if n < rank || n > rank * rank {
                return Err(Error::InvalidArgument(format!(
                    "ensemble size {n} outside [rank, rank²] = [{rank}, {}]",
                    rank * rank
                )));
            }
            n
        }
        None => (rank + 2).clamp(rank, (rank * rank).max(rank)),
    };
    let d = shape.total_dim();
    // Column j holds √λ_j |e_j⟩; any n×rank isometry V turns these into a
    // decomposition with members Σ_j V_ij √λ_j |e_j⟩.
    let scaled = DMatrix::from_fn(d, rank, |i, j| vecs[(i, j)] * Complex64::from(vals[j].sqrt()));

    // Scout every restart on a small budget, then polish only the leaders.
    let scout_cap = cfg.max_iters.min(SCOUT_SWEEPS);
    let scout_stop = SCOUT_STOP.max(cfg.step_tol);
    let mut runs: Vec<Decomp> = Vec::with_capacity(cfg.restarts);
    for idx in 0..cfg.restarts {
        let mut d = Decomp::start(&objective, &shape, &scaled, n, cfg, idx)?;
        descend(&mut d, &objective, &shape, THETA_TOL_COARSE, scout_stop, scout_cap)?;
        let stop = d.total <= ZERO_STOP;
        runs.push(d);
        if stop {
            // The objective is nonnegative; nothing can beat this.
            break;
        }
    }
    let restarts_used = runs.len();
    if !runs.iter().any(|d| d.total <= ZERO_STOP) {
        let best_scout = runs.iter().map(|d| d.total).fold(f64::INFINITY, f64::min);
        let mut candidates: Vec<usize> = (0..runs.len())
            .filter(|&i| runs[i].total <= best_scout + POLISH_MARGIN)
            .collect();
        candidates.sort_by(|&i, &j| runs[i].total.total_cmp(&runs[j].total).then(i.cmp(&j)));
        candidates.truncate(POLISH_MAX);
        for &i in &candidates {
            let d = &mut runs[i];
            let budget = cfg.max_iters.saturating_sub(d.sweeps_done).max(1);
            d.reset_tried();
            descend(d, &objective, &shape, THETA_TOL_COARSE, scout_stop, budget)?;
            let budget = cfg.max_iters.saturating_sub(d.sweeps_done).max(1);
            d.reset_tried();
            descend(d, &objective, &shape, THETA_TOL_FINE, cfg.step_tol, budget)?;
        }
    }
    let winner = runs
        .iter()
        .position(|d| d.total <= ZERO_STOP)
        .unwrap_or_else(|| {
            let mut best = 0;
            for (i, d) in runs.iter().enumerate().skip(1) {
                if d.total < runs[best].total {
                    best = i;
                }
            }
            best
        });
    finalize(&objective, rho, runs.swap_remove(winner), restarts_used)
}

/// Roof of a plain measure family. Gate-carrying families (the bipartition
/// minimum and the split sums) keep their built-in gate.
pub fn roof_minimize(spec: &MeasureSpec, rho: &DensityOperator, cfg: &RoofConfig) -> Result<RoofResult> {
    spec.validate()?;
    let spec = spec.clone();
    roof_minimize_fn(move |psi| plain_member_value(&spec, psi), rho, cfg)
}

///// Roof of the delta-gated member objective: each member contributes its
/// measure only when genuinely entangled, with the gate evaluated exactly.
pub fn roof_minimize_genuine(
    spec: &MeasureSpec,
    rho: &DensityOperator,
    cfg: &RoofConfig,
) -> Result<RoofResult> {
    spec.validate()?;
    if rho.shape().subsystem_count() < 2 {
        return Err(Error::InvalidArgument(
            "genuine roofs need at least two subsystems".into(),
        ));
    }
    let spec = spec.clone();
    roof_minimize_fn(move |psi| genuine_member_value(&spec, psi), rho, cfg)
}

/// Outcome of the decomposition-search biseparability test. Finding an
/// ensemble is constructive; not finding one proves nothing.
#[derive(Clone, Debug)]
pub enum Certificate {
    BiseparableFound { ensemble: Ensemble, objective: f64 },
    Undetected { residual: f64 },
}

/// Searches for a decomposition whose members are all product across some
/// cut, by driving the bipartition-minimum objective toward zero.
pub fn biseparability_certificate(rho: &DensityOperator, cfg: &RoofConfig) -> Result<Certificate> {
    if rho.shape().subsystem_count() < 2 {
        return Err(Error::InvalidArgument(
            "biseparability needs at least two subsystems".into(),
        ));
    }
    let res = roof_minimize_fn(genuine::gmc_pure, rho, cfg)?;
    if res.value <= CERTIFICATE_TOL {
        Ok(Certificate::BiseparableFound {
            ensemble: res.ensemble,
            objective: res.value,
        })
    } else {
        Ok(Certificate::Undetected { residual: res.value })
    }
}

/// Delta gate for either kind of state. Pure inputs are scanned exactly;
/// mixed inputs get the numerical certificate, flagged as such.
#[derive(Clone, Debug)]
pub struct StateDelta {
    /// 1 genuinely entangled, 0 biseparable.
    pub value: u8,
    /// True when the verdict is decisive at working tolerance: a pure-state
    /// scan, or an explicit biseparable ensemble. A mixed state with no
    /// ensemble found stays uncertified.
    pub certified: bool,
    /// Distance witness: off-product margin for pure inputs, best search
    /// objective for mixed ones.
    pub residual: f64,
    pub witness_cut: Option<Partition>,
    pub witness_ensemble: Option<Ensemble>,
}

pub fn delta_state(state: &State, cfg: &RoofConfig) -> Result<StateDelta> {
    match state {
        State::Pure(psi) => {
            let v = delta_pure(psi, DELTA_TOL)?;
            Ok(StateDelta {
                value: v.value,
                certified: true,
                residual: v.max_offproduct,
                witness_cut: v.witness,
                witness_ensemble: None,
            })
        }
        State::Mixed(rho) => match biseparability_certificate(rho, cfg)? {
            Certificate::BiseparableFound { ensemble, objective } => Ok(StateDelta {
                value: 0,
                certified: true,
                residual: objective,
                witness_cut: None,
                witness_ensemble: Some(ensemble),
            }),
            Certificate::Undetected { residual } => Ok(StateDelta {
                value: 1,
                certified: false,
                residual,
                witness_cut: None,
                witness_ensemble: None,
            }),
        },
    }
}

/// A measure evaluation with its provenance: direct formula or an
/// upper-bound decomposition search.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    /// True when the value came from a decomposition search (upper bound).
    pub roofed: bool,
    pub roof: Option<RoofResult>,
}

impl Evaluation {
    fn direct(value: f64) -> Self {
        Evaluation {
            value,
            roofed: false,
            roof: None,
        }
    }
}

/// Evaluates any measure spec on any state over a full or partial partition.
/// Pure routes are exact; discarded subsystems or mixed inputs go through
/// the decomposition search.
pub fn evaluate(
    spec: &MeasureSpec,
    state: &State,
    partition: &Partition,
    cfg: &RoofConfig,
) -> Result<Evaluation> {
    spec.validate()?;
    if let State::Pure(psi) = state {
        if spec.variant == Variant::Plain && spec.family.is_partition_functional() {
            return Ok(Evaluation::direct(measure::evaluate_pure(spec, psi, partition)?));
        }
        return match psi.regroup(partition)? {
            State::Pure(_) => Ok(Evaluation::direct(genuine::evaluate_genuine_pure(
                spec, psi, partition,
            )?)),
            State::Mixed(view) => evaluate_mixed_view(spec, &view, cfg),
        };
    }
    let view = state.regroup(partition)?.to_density();
    if spec.variant == Variant::Plain
        && spec.family == Family::NegativityN
        && spec.mixed_strategy == MixedStrategy::Direct
    {
        return Ok(Evaluation::direct(measure::negativity_mixed(&view)?));
    }
    evaluate_mixed_view(spec, &view, cfg)
}

fn evaluate_mixed_view(spec: &MeasureSpec, view: &DensityOperator, cfg: &RoofConfig) -> Result<Evaluation> {
    if view.shape().subsystem_count() < 2 {
        // A lone block holds no entanglement of any kind.
        return Ok(Evaluation::direct(0.0));
    }
    let res = match spec.variant {
        Variant::Plain => roof_minimize(spec, view, cfg)?,
        Variant::Genuine => roof_minimize_genuine(spec, view, cfg)?,
    };
    Ok(Evaluation {
        value: res.value,
        roofed: true,
        roof: Some(res),
    })
}

/// Plain member objective: the family value at the member's finest split.
fn plain_member_value(spec: &MeasureSpec, psi: &PureState) -> Result<f64> {
    match spec.family {
        Family::Gmc | Family::SumBipartitions | Family::SumTripartitions => {
            genuine_member_value(spec, psi)
        }
        _ => {
            let k = psi.shape().subsystem_count();
            measure::partition_value(spec.family, &spec.params, psi, &Partition::finest(k))
        }
    }
}

/// Gated member objective with the exact 0/1 gate.
fn genuine_member_value(spec: &MeasureSpec, psi: &PureState) -> Result<f64> {
    match spec.family {
        Family::Gmc => genuine::gmc_pure(psi),
        Family::SumBipartitions => {
            genuine::sum_over_bipartitions(spec.inner_family(), &spec.params, psi)
        }
        Family::SumTripartitions => {
            let inner = spec.inner.ok_or_else(|| {
                Error::InvalidArgument("sum1234_3 needs an inner tripartite family".into())
            })?;
            genuine::sum_over_tripartitions(inner, &spec.params, psi)
        }
        _ => {
            if delta_pure(psi, DELTA_TOL)?.value == 0 {
                return Ok(0.0);
            }
            let k = psi.shape().subsystem_count();
            measure::partition_value(spec.family, &spec.params, psi, &Partition::finest(k))
        }
    }
}

/// Working decomposition: unnormalized members plus bookkeeping that lets
/// sweeps skip pairs already searched at their current contents.
struct Decomp {
    members: Vec<DVector<Complex64>>,
    weights: Vec<f64>,
    terms: Vec<f64>,
    total: f64,
    version: Vec<u32>,
    tried: Vec<(u32, u32)>,
    sweeps_done: usize,
    converged: bool,
}

const UNTRIED: (u32, u32) = (u32::MAX, u32::MAX);

impl Decomp {
    fn start<F>(
        objective: &F,
        shape: &SystemShape,
        scaled: &DMatrix<Complex64>,
        n: usize,
        cfg: &RoofConfig,
        restart_idx: usize,
    ) -> Result<Self>
    where
        F: Fn(&PureState) -> Result<f64>,
    {
        let d = scaled.nrows();
        let rank = scaled.ncols();
        let members: Vec<DVector<Complex64>> = if restart_idx == 0 {
            // Bare eigen-ensemble, padded with empty slots sweeps can fill.
            (0..n)
                .map(|i| {
                    if i < rank {
                        DVector::from(scaled.column(i).clone_owned())
                    } else {
                        DVector::from_element(d, Complex64::ZERO)
                    }
                })
                .collect()
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(restart_idx as u64);
            let gauss = DMatrix::from_fn(n, rank, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let q = gauss.qr().q();
            let stacked = scaled * q.transpose();
            (0..n)
                .map(|i| DVector::from(stacked.column(i).clone_owned()))
                .collect()
        };
        let mut weights = vec![0.0; n];
        let mut terms = vec![0.0; n];
        let mut total = 0.0;
        for i in 0..n {
            let (w, t) = member_term(objective, shape, &members[i])?;
            weights[i] = w;
            terms[i] = t;
            total += t;
        }
        Ok(Decomp {
            members,
            weights,
            terms,
            total,
            version: vec![0; n],
            tried: vec![UNTRIED; n * n],
            sweeps_done: 0,
            converged: false,
        })
    }

    fn reset_tried(&mut self) {
        self.tried.fill(UNTRIED);
    }
}

/// Weight and weighted objective of one unnormalized member.
fn member_term<F>(objective: &F, shape: &SystemShape, tilde: &DVector<Complex64>) -> Result<(f64, f64)>
where
    F: Fn(&PureState) -> Result<f64>,
{
    let p = tilde.norm_squared();
    if p < WEIGHT_FLOOR {
        return Ok((p, 0.0));
    }
    let psi = PureState::new(shape.clone(), tilde / Complex64::from(p.sqrt()))?;
    Ok((p, p * objective(&psi)?))
}

/// Coordinate sweeps of two-member rotations until a sweep improves the
/// objective by less than `stop_tol` or the budget runs out.
fn descend<F>(
    d: &mut Decomp,
    objective: &F,
    shape: &SystemShape,
    theta_tol: f64,
    stop_tol: f64,
    sweep_budget: usize,
) -> Result<()>
where
    F: Fn(&PureState) -> Result<f64>,
{
    let n = d.members.len();
    for _ in 0..sweep_budget {
        if d.total <= ZERO_STOP {
            d.converged = true;
            return Ok(());
        }
        d.sweeps_done += 1;
        let mut improved = 0.0;
        for a in 0..n.saturating_sub(1) {
            for b in a + 1..n {
                if d.weights[a] + d.weights[b] < WEIGHT_FLOOR {
                    continue;
                }
                let key = a * n + b;
                if d.tried[key] == (d.version[a], d.version[b]) {
                    continue;
                }
                let current = d.terms[a] + d.terms[b];
                match pair_search(objective, shape, &d.members[a], &d.members[b], current, theta_tol)? {
                    Some((theta, phase, _)) => {
                        let (s, c) = theta.sin_cos();
                        let na = &d.members[a] * Complex64::from(c) + &d.members[b] * (phase * s);
                        let nb = &d.members[a] * (-phase.conj() * s)
                            + &d.members[b] * Complex64::from(c);
                        let (wa, ta) = member_term(objective, shape, &na)?;
                        let (wb, tb) = member_term(objective, shape, &nb)?;
                        d.members[a] = na;
                        d.members[b] = nb;
                        d.weights[a] = wa;
                        d.weights[b] = wb;
                        improved += current - (ta + tb);
                        d.total += ta + tb - current;
                        d.terms[a] = ta;
                        d.terms[b] = tb;
                        d.version[a] = d.version[a].wrapping_add(1);
                        d.version[b] = d.version[b].wrapping_add(1);
                    }
                    None => {
                        d.tried[key] = (d.version[a], d.version[b]);
                    }
                }
            }
        }
        if improved < stop_tol {
            d.converged = true;
            return Ok(());
        }
    }
    d.converged = d.total <= ZERO_STOP;
    Ok(())
}

/// Best two-member rotation for one pair, over the full (theta, phase)
/// move space. Returns None when nothing beats the current terms.
fn pair_search<F>(
    objective: &F,
    shape: &SystemShape,
    col_a: &DVector<Complex64>,
    col_b: &DVector<Complex64>,
    current: f64,
    theta_tol: f64,
) -> Result<Option<(f64, Complex64, f64)>>
where
    F: Fn(&PureState) -> Result<f64>,
{
    let eval = |theta: f64, phi: f64| -> Result<f64> {
        let (s, c) = theta.sin_cos();
        let phase = Complex64::new(phi.cos(), phi.sin());
        let na = col_a * Complex64::from(c) + col_b * (phase * s);
        let nb = col_a * (-phase.conj() * s) + col_b * Complex64::from(c);
        Ok(member_term(objective, shape, &na)?.1 + member_term(objective, shape, &nb)?.1)
    };
    let floor = f64::EPSILON * current.abs().max(1e-3);
    let step = PI / COARSE_POINTS as f64;
    let mut best = (0.0_f64, 0.0_f64, current);
    for phi in [0.0, FRAC_PI_2] {
        let mut seed = (0.0, current);
        for k in 0..COARSE_POINTS {
            let theta = -FRAC_PI_2 + (k as f64 + 0.5) * step;
            let v = eval(theta, phi)?;
            if v < seed.1 {
                seed = (theta, v);
            }
        }
        let (theta, v) = brent(
            |t| eval(t, phi),
            seed.0 - step,
            seed.0 + step,
            seed.0,
            seed.1,
            theta_tol,
        )?;
        if v < best.2 {
            best = (theta, phi, v);
        }
    }
    if best.2 >= current - floor {
        // Probe mixed phases; axis-aligned stalls can hide these moves.
        for (theta, phi) in [
            (FRAC_PI_2 * 0.25, FRAC_PI_2 * 0.5),
            (-FRAC_PI_2 * 0.25, FRAC_PI_2 * 0.5),
            (FRAC_PI_2 * 0.75, FRAC_PI_2 * 0.5),
            (-FRAC_PI_2 * 0.75, FRAC_PI_2 * 0.5),
            (FRAC_PI_2 * 0.25, FRAC_PI_2 * 1.5),
            (-FRAC_PI_2 * 0.25, FRAC_PI_2 * 1.5),
            (FRAC_PI_2 * 0.75, FRAC_PI_2 * 1.5),
            (-FRAC_PI_2 * 0.75, FRAC_PI_2 * 1.5),
        ] {
            let v = eval(theta, phi)?;
            if v < best.2 {
                best = (theta, phi, v);
            }
        }
        if best.2 >= current - floor {
            return Ok(None);
        }
    }
    // Alternate one phase refinement and one angle refinement.
    let (theta1, phi1, v1) = best;
    let (phi2, v2) = brent(
        |p| eval(theta1, p),
        phi1 - FRAC_PI_2,
        phi1 + FRAC_PI_2,
        phi1,
        v1,
        theta_tol,
    )?;
    let (theta3, v3) = brent(
        |t| eval(t, phi2),
        theta1 - step,
        theta1 + step,
        theta1,
        v2,
        theta_tol,
    )?;
    let (theta, phi, value) = if v3 <= v1 { (theta3, phi2, v3) } else { (theta1, phi1, v1) };
    if value >= current - floor {
        return Ok(None);
    }
    Ok(Some((theta, Complex64::new(phi.cos(), phi.sin()), value)))
}

/// Bounded scalar minimization: parabolic interpolation with golden-section
/// fallback. Returns the best point seen.
fn brent<H>(mut h: H, mut a: f64, mut b: f64, x0: f64, f0: f64, tol: f64) -> Result<(f64, f64)>
where
    H: FnMut(f64) -> Result<f64>,
{
    const CGOLD: f64 = 0.381_966_011_250_105;
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (f0, f0, f0);
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;
    for _ in 0..LINE_EVAL_CAP {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + tol * 0.1;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut take_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let q2 = (x - v) * (fx - fw);
            let mut p = (x - v) * q2 - (x - w) * r;
            let mut q = 2.0 * (q2 - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(m - x);
                }
                take_golden = false;
            }
        }
        if take_golden {
            e = if x < m { b - x } else { a - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = h(u)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// Drops negligible members, renormalizes, re-evaluates every kept member,
/// and checks the reconstruction invariant.
fn finalize<F>(
    objective: &F,
    rho: &DensityOperator,
    run: Decomp,
    restarts_used: usize,
) -> Result<RoofResult>
where
    F: Fn(&PureState) -> Result<f64>,
{
    let shape = rho.shape();
    let mut kept: Vec<(f64, PureState)> = Vec::new();
    for (tilde, w) in run.members.iter().zip(&run.weights) {
        if *w < MEMBER_KEEP {
            continue;
        }
        let psi = PureState::new(shape.clone(), tilde / Complex64::from(w.sqrt()))?;
        kept.push((*w, psi));
    }
    if kept.is_empty() {
        return Err(Error::InvalidState(
            "decomposition search lost all ensemble weight".into(),
        ));
    }
    let mass: f64 = kept.iter().map(|(w, _)| w).sum();
    for (w, _) in &mut kept {
        *w /= mass;
    }
    let mut member_values = Vec::with_capacity(kept.len());
    let mut value = 0.0;
    for (w, psi) in &kept {
        let v = objective(psi)?;
        member_values.push(v);
        value += w * v;
    }
    let ensemble = Ensemble::new(kept)?;
    let recon = ensemble.reconstruction_error(rho);
    if recon > ENSEMBLE_RECON_TOL {
        return Err(Error::InvalidState(format!(
            "decomposition drifted from its target: reconstruction error {recon:.3e}"
        )));
    }
    Ok(RoofResult {
        value,
        ensemble,
        member_values,
        converged: run.converged,
        restarts_used,
    })
}
