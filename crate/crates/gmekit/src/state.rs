//! Dense pure states and density operators over labeled qudit systems, with the
//! tensor primitives (partial trace, partial transpose, regrouping, sampling)
//! the measures are built on.
//!
//! Index convention: subsystem 0 is the slowest-varying tensor index, so the
//! computational basis enumerates like an odometer with subsystem m-1 ticking
//! fastest.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::partition::{default_labels, Partition};

/// Total-dimension guard; everything here is dense.
pub const MAX_TOTAL_DIM: usize = 4096;

/// Normalization, hermiticity, and trace tolerance for state invariants.
pub const STATE_TOL: f64 = 1e-10;

/// Eigenvalues in [-EIG_CLAMP, 0) are clamped to 0; anything lower is rejected.
pub const EIG_CLAMP: f64 = 1e-10;

/// Max-entry tolerance for ensemble reconstruction of its target state.
pub const ENSEMBLE_RECON_TOL: f64 = 1e-8;

/// Labeled qudit system: distinct subsystem names with local dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemShape {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SystemShape {
    pub fn new(labels: Vec<String>, dims: Vec<usize>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::InvalidShape(format!(
                "{} labels for {} dimensions",
                labels.len(),
                dims.len()
            )));
        }
        if dims.is_empty() {
            return Err(Error::InvalidShape("no subsystems".into()));
        }
        for (label, &d) in labels.iter().zip(&dims) {
            if label.is_empty() {
                return Err(Error::InvalidShape("empty subsystem label".into()));
            }
            if d < 2 {
                return Err(Error::InvalidShape(format!(
                    "subsystem {label:?} has dimension {d}, need at least 2"
                )));
            }
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[i + 1..].contains(a) {
                return Err(Error::InvalidShape(format!("duplicate label {a:?}")));
            }
        }
        let mut total: usize = 1;
        for &d in &dims {
            total = total.checked_mul(d).unwrap_or(usize::MAX);
            if total > MAX_TOTAL_DIM {
                return Err(Error::SizeLimit(format!(
                    "total dimension exceeds {MAX_TOTAL_DIM}"
                )));
            }
        }
        Ok(SystemShape { labels, dims })
    }

    /// Shape with default labels A, B, C, ...
    pub fn with_default_labels(dims: Vec<usize>) -> Result<Self> {
        let labels = default_labels(dims.len())?;
        SystemShape::new(labels, dims)
    }

    /// m qubits labeled A, B, C, ...
    pub fn qubits(m: usize) -> Result<Self> {
        SystemShape::with_default_labels(vec![2; m])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn subsystem_count(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Digits of a basis index, subsystem 0 first (slowest).
    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for (slot, &d) in digits.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        digits
    }

    pub fn ravel(&self, digits: &[usize]) -> usize {
        let mut index = 0;
        for (&g, &d) in digits.iter().zip(&self.dims) {
            debug_assert!(g < d);
            index = index * d + g;
        }
        index
    }

    pub fn parse_partition(&self, s: &str) -> Result<Partition> {
        Partition::parse(s, &self.labels)
    }

    pub fn format_partition(&self, p: &Partition) -> Result<String> {
        p.format(&self.labels)
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::InvalidArgument("empty subsystem subset".into()));
        }
        for &i in subset {
            if i >= self.dims.len() {
                return Err(Error::InvalidArgument(format!(
                    "subsystem index {i} out of range for {} subsystems",
                    self.dims.len()
                )));
            }
        }
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != subset.len() {
            return Err(Error::InvalidArgument("duplicate subsystem index".into()));
        }
        Ok(())
    }
}

/// Normalized state vector over a shape.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    shape: SystemShape,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    pub fn new(shape: SystemShape, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != shape.total_dim() {
            return Err(Error::InvalidState(format!(
                "amplitude vector has length {}, shape needs {}",
                amplitudes.len(),
                shape.total_dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "state vector norm is {norm:.12}, expected 1"
            )));
        }
        Ok(PureState { shape, amplitudes })
    }

    /// Builds from (index, amplitude) pairs and normalizes.
    pub fn from_terms(shape: SystemShape, terms: &[(usize, Complex64)]) -> Result<Self> {
        let d = shape.total_dim();
        let mut v = DVector::from_element(d, Complex64::ZERO);
        for &(idx, amp) in terms {
            if idx >= d {
                return Err(Error::InvalidArgument(format!(
                    "basis index {idx} out of range for dimension {d}"
                )));
            }
            v[idx] += amp;
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        PureState::new(shape, v / Complex64::from(norm))
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityOperator {
        let mat = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator {
            shape: self.shape.clone(),
            matrix: mat,
        }
    }

    /// Reduced state on `keep` (sorted ascending in the output shape).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        self.shape.check_subset(keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let m = self.shape.subsystem_count();
        if keep.len() == m {
            return Ok(self.density());
        }
        let env: Vec<usize> = (0..m).filter(|i| !keep.contains(i)).collect();
        let keep_dims: Vec<usize> = keep.iter().map(|&i| self.shape.dims[i]).collect();
        let env_dims: Vec<usize> = env.iter().map(|&i| self.shape.dims[i]).collect();
        let kd: usize = keep_dims.iter().product();
        let ed: usize = env_dims.iter().product();

        // Global index for (keep digits, env digits).
        let glue = |kdig: &[usize], edig: &[usize]| -> usize {
            let mut digits = vec![0usize; m];
            for (slot, &d) in keep.iter().zip(kdig) {
                digits[*slot] = d;
            }
            for (slot, &d) in env.iter().zip(edig) {
                digits[*slot] = d;
            }
            self.shape.ravel(&digits)
        };
        let unravel_in = |mut x: usize, dims: &[usize]| -> Vec<usize> {
            let mut digits = vec![0; dims.len()];
            for (slot, &d) in digits.iter_mut().zip(dims).rev() {
                *slot = x % d;
                x /= d;
            }
            digits
        };

        let mut out = DMatrix::from_element(kd, kd, Complex64::ZERO);
        for e in 0..ed {
            let edig = unravel_in(e, &env_dims);
            // Column of amplitudes sharing this environment configuration.
            let col: Vec<Complex64> = (0..kd)
                .map(|k| self.amplitudes[glue(&unravel_in(k, &keep_dims), &edig)])
                .collect();
            for (i, &a) in col.iter().enumerate() {
                for (j, &b) in col.iter().enumerate() {
                    out[(i, j)] += a * b.conj();
                }
            }
        }

        let labels = keep.iter().map(|&i| self.shape.labels[i].clone()).collect();
        DensityOperator::new(SystemShape::new(labels, keep_dims)?, out)
    }

    /// Squared Schmidt coefficients across `keep` versus the rest. Matches
    /// the reduced-state spectrum, but keeps relative accuracy near product
    /// states where forming the marginal first loses half the digits.
    pub fn schmidt_squares(&self, keep: &[usize]) -> Result<Vec<f64>> {
        self.shape.check_subset(keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let m = self.shape.subsystem_count();
        let env: Vec<usize> = (0..m).filter(|i| !keep.contains(i)).collect();
        if env.is_empty() {
            return Ok(vec![1.0]);
        }
        let dims = &self.shape.dims;
        let mut strides = vec![1usize; m];
        for i in (0..m - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        // Mixed-radix strides within the keep and env index groups.
        let group_strides = |group: &[usize]| -> Vec<usize> {
            let mut g = vec![1usize; group.len()];
            for i in (0..group.len().saturating_sub(1)).rev() {
                g[i] = g[i + 1] * dims[group[i + 1]];
            }
            g
        };
        let kstrides = group_strides(&keep);
        let estrides = group_strides(&env);
        let kd: usize = keep.iter().map(|&i| dims[i]).product();
        let ed: usize = env.iter().map(|&i| dims[i]).product();
        let split = |i: usize| -> (usize, usize) {
            let mut r = 0;
            for (slot, gs) in keep.iter().zip(&kstrides) {
                r += (i / strides[*slot]) % dims[*slot] * gs;
            }
            let mut c = 0;
            for (slot, gs) in env.iter().zip(&estrides) {
                c += (i / strides[*slot]) % dims[*slot] * gs;
            }
            (r, c)
        };

        if kd == 2 && ed <= 64 {
            // Two-row closed form. The small eigenvalue comes from det(Gram)
            // as a sum of squared 2x2 minors, which cancels nothing, so it
            // stays relatively accurate down to the underflow floor.
            let mut rows = vec![Complex64::ZERO; 2 * ed];
            for (i, &a) in self.amplitudes.iter().enumerate() {
                let (r, c) = split(i);
                rows[r * ed + c] = a;
            }
            let (top, bottom) = rows.split_at(ed);
            let trace: f64 =
                top.iter().chain(bottom).map(|a| a.norm_sqr()).sum();
            let mut det = 0.0;
            for c in 0..ed {
                for cc in c + 1..ed {
                    det += (top[c] * bottom[cc] - top[cc] * bottom[c]).norm_sqr();
                }
            }
            let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
            let hi = 0.5 * (trace + disc);
            let lo = if hi > 0.0 { det / hi } else { 0.0 };
            return Ok(vec![hi, lo]);
        }

        let mut mat = DMatrix::from_element(kd, ed, Complex64::ZERO);
        for (i, &a) in self.amplitudes.iter().enumerate() {
            let (r, c) = split(i);
            mat[(r, c)] = a;
        }
        Ok(mat.singular_values().iter().map(|s| s * s).collect())
    }

    /// Applies a unitary to one subsystem.
    pub fn apply_local_unitary(&self, subsystem: usize, u: &DMatrix<Complex64>) -> Result<PureState> {
        let m = self.shape.subsystem_count();
        if subsystem >= m {
            return Err(Error::InvalidArgument(format!(
                "subsystem index {subsystem} out of range"
            )));
        }
        let d = self.shape.dims[subsystem];
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::InvalidArgument(format!(
                "unitary is {}x{}, subsystem has dimension {d}",
                u.nrows(),
                u.ncols()
            )));
        }
        let uerr = (u.adjoint() * u - DMatrix::identity(d, d)).camax();
        if uerr > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (deviation {uerr:.3e})"
            )));
        }
        let total = self.shape.total_dim();
        let mut out = DVector::from_element(total, Complex64::ZERO);
        for g in 0..total {
            let digits = self.shape.unravel(g);
            let row = digits[subsystem];
            for col in 0..d {
                let mut src = digits.clone();
                src[subsystem] = col;
                out[g] += u[(row, col)] * self.amplitudes[self.shape.ravel(&src)];
            }
        }
        PureState::new(self.shape.clone(), out)
    }

    /// Coarse view of the state: blocks become subsystems. Parties outside the
    /// partition are traced out first, so the result may be mixed.
    pub fn regroup(&self, partition: &Partition) -> Result<State> {
        regroup_impl(&State::Pure(self.clone()), partition)
    }

    /// Tensor product; self takes the slower indices. Labels must stay distinct.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let labels: Vec<String> = self
            .shape
            .labels
            .iter()
            .chain(other.shape.labels.iter())
            .cloned()
            .collect();
        let dims: Vec<usize> = self
            .shape
            .dims
            .iter()
            .chain(other.shape.dims.iter())
            .copied()
            .collect();
        let shape = SystemShape::new(labels, dims)?;
        PureState::new(shape, self.amplitudes.kronecker(&other.amplitudes))
    }
}

/// Hermitian, unit-trace, positive-semidefinite operator over a shape.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    shape: SystemShape,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(shape: SystemShape, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = shape.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidState(format!(
                "matrix is {}x{}, shape needs {d}x{d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm_err = (&matrix - matrix.adjoint()).camax();
        if herm_err > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "matrix is not Hermitian (deviation {herm_err:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {:.12}+{:.3e}i, expected 1",
                trace.re, trace.im
            )));
        }
        let herm = (&matrix + matrix.adjoint()) * Complex64::from(0.5);
        let min_eig = herm
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -EIG_CLAMP {
            return Err(Error::InvalidState(format!(
                "matrix has eigenvalue {min_eig:.3e} below -{EIG_CLAMP:.0e}"
            )));
        }
        Ok(DensityOperator {
            shape,
            matrix: herm,
        })
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn purity(&self) -> f64 {
        self.matrix
            .iter()
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// Eigenvalues (descending, clamped to be nonnegative) and matching
    /// eigenvector columns.
    pub fn eigensystem(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap()
        });
        let values: Vec<f64> = order
            .iter()
            .map(|&i| eig.eigenvalues[i].max(0.0))
            .collect();
        let vectors = DMatrix::from_fn(self.matrix.nrows(), order.len(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        self.shape.check_subset(keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let m = self.shape.subsystem_count();
        if keep.len() == m {
            return Ok(self.clone());
        }
        let env: Vec<usize> = (0..m).filter(|i| !keep.contains(i)).collect();
        let keep_dims: Vec<usize> = keep.iter().map(|&i| self.shape.dims[i]).collect();
        let env_dims: Vec<usize> = env.iter().map(|&i| self.shape.dims[i]).collect();
        let kd: usize = keep_dims.iter().product();
        let ed: usize = env_dims.iter().product();
        let unravel_in = |mut x: usize, dims: &[usize]| -> Vec<usize> {
            let mut digits = vec![0; dims.len()];
            for (slot, &d) in digits.iter_mut().zip(dims).rev() {
                *slot = x % d;
                x /= d;
            }
            digits
        };
        let glue = |kdig: &[usize], edig: &[usize]| -> usize {
            let mut digits = vec![0usize; m];
            for (slot, &d) in keep.iter().zip(kdig) {
                digits[*slot] = d;
            }
            for (slot, &d) in env.iter().zip(edig) {
                digits[*slot] = d;
            }
            self.shape.ravel(&digits)
        };
        let mut out = DMatrix::from_element(kd, kd, Complex64::ZERO);
        for e in 0..ed {
            let edig = unravel_in(e, &env_dims);
            let rows: Vec<usize> = (0..kd)
                .map(|k| glue(&unravel_in(k, &keep_dims), &edig))
                .collect();
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in rows.iter().enumerate() {
                    out[(i, j)] += self.matrix[(r, c)];
                }
            }
        }
        let labels = keep.iter().map(|&i| self.shape.labels[i].clone()).collect();
        DensityOperator::new(SystemShape::new(labels, keep_dims)?, out)
    }

    /// Transpose of the chosen tensor factors. Hermitian and unit trace, but
    /// generally not positive, so a raw matrix comes back.
    pub fn partial_transpose(&self, subset: &[usize]) -> Result<DMatrix<Complex64>> {
        self.shape.check_subset(subset)?;
        let d = self.shape.total_dim();
        let mut out = DMatrix::from_element(d, d, Complex64::ZERO);
        for r in 0..d {
            let rdig = self.shape.unravel(r);
            for c in 0..d {
                let cdig = self.shape.unravel(c);
                let mut nr = rdig.clone();
                let mut nc = cdig.clone();
                for &s in subset {
                    nr[s] = cdig[s];
                    nc[s] = rdig[s];
                }
                out[(self.shape.ravel(&nr), self.shape.ravel(&nc))] = self.matrix[(r, c)];
            }
        }
        Ok(out)
    }

    pub fn regroup(&self, partition: &Partition) -> Result<State> {
        regroup_impl(&State::Mixed(self.clone()), partition)
    }
}

/// Pure or mixed state; most call sites accept either.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(PureState),
    Mixed(DensityOperator),
}

impl State {
    pub fn shape(&self) -> &SystemShape {
        match self {
            State::Pure(p) => p.shape(),
            State::Mixed(r) => r.shape(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, State::Pure(_))
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            State::Pure(p) => p.density(),
            State::Mixed(r) => r.clone(),
        }
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        match self {
            State::Pure(p) => p.partial_trace(keep),
            State::Mixed(r) => r.partial_trace(keep),
        }
    }

    pub fn regroup(&self, partition: &Partition) -> Result<State> {
        regroup_impl(self, partition)
    }
}

fn regroup_impl(state: &State, partition: &Partition) -> Result<State> {
    let shape = state.shape();
    let m = shape.subsystem_count();
    let parties = partition.parties();
    if let Some(&max) = parties.last() {
        if max >= m {
            return Err(Error::InvalidArgument(format!(
                "partition names subsystem {max}, state has {m}"
            )));
        }
    }

    // Trace out anything the partition does not mention.
    let reduced: State = if parties.len() == m {
        state.clone()
    } else {
        State::Mixed(state.partial_trace(&parties)?)
    };
    // Partition indices refer to the original labeling; map into the reduced one.
    let reindex: Vec<Vec<usize>> = partition
        .blocks()
        .iter()
        .map(|b| {
            b.iter()
                .map(|p| parties.iter().position(|q| q == p).unwrap())
                .collect()
        })
        .collect();

    let rshape = reduced.shape().clone();
    // Permutation: position t of the regrouped digit string reads reduced
    // subsystem perm[t].
    let perm: Vec<usize> = reindex.iter().flatten().copied().collect();
    let new_dims: Vec<usize> = reindex
        .iter()
        .map(|b| b.iter().map(|&i| rshape.dims()[i]).product())
        .collect();
    let new_labels: Vec<String> = reindex
        .iter()
        .map(|b| b.iter().map(|&i| rshape.labels()[i].clone()).collect())
        .collect();
    let new_shape = SystemShape::new(new_labels, new_dims)?;

    let perm_dims: Vec<usize> = perm.iter().map(|&i| rshape.dims()[i]).collect();
    let total = rshape.total_dim();
    // Destination index for each source basis index.
    let mut dest = vec![0usize; total];
    for (g, slot) in dest.iter_mut().enumerate() {
        let digits = rshape.unravel(g);
        let mut idx = 0;
        for (pos, &src) in perm.iter().enumerate() {
            idx = idx * perm_dims[pos] + digits[src];
        }
        *slot = idx;
    }

    match reduced {
        State::Pure(p) => {
            let mut out = DVector::from_element(total, Complex64::ZERO);
            for g in 0..total {
                out[dest[g]] = p.amplitudes()[g];
            }
            Ok(State::Pure(PureState::new(new_shape, out)?))
        }
        State::Mixed(r) => {
            let mut out = DMatrix::from_element(total, total, Complex64::ZERO);
            for gr in 0..total {
                for gc in 0..total {
                    out[(dest[gr], dest[gc])] = r.matrix()[(gr, gc)];
                }
            }
            Ok(State::Mixed(DensityOperator::new(new_shape, out)?))
        }
    }
}

/// Normalized pure-state mixture; the working currency of convex roofs.
#[derive(Clone, Debug)]
pub struct Ensemble {
    members: Vec<(f64, PureState)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, PureState)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let shape = members[0].1.shape().clone();
        let mut total = 0.0;
        for (p, psi) in &members {
            if *p <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "ensemble probability {p} is not positive"
                )));
            }
            if psi.shape() != &shape {
                return Err(Error::InvalidArgument(
                    "ensemble members have differing shapes".into(),
                ));
            }
            total += p;
        }
        if (total - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "ensemble probabilities sum to {total:.12}, expected 1"
            )));
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[(f64, PureState)] {
        &self.members
    }

    pub fn average_density(&self) -> DMatrix<Complex64> {
        let d = self.members[0].1.shape().total_dim();
        let mut acc = DMatrix::from_element(d, d, Complex64::ZERO);
        for (p, psi) in &self.members {
            acc += psi.density().matrix() * Complex64::from(*p);
        }
        acc
    }

    /// Max-entry deviation between the ensemble average and `rho`.
    pub fn reconstruction_error(&self, rho: &DensityOperator) -> f64 {
        (self.average_density() - rho.matrix()).camax()
    }
}

/// Haar-random pure state: normalized vector of iid complex Gaussians.
pub fn random_pure(shape: &SystemShape, seed: u64) -> Result<PureState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pure_with(shape, &mut rng)
}

pub fn random_pure_with(shape: &SystemShape, rng: &mut impl Rng) -> Result<PureState> {
    let d = shape.total_dim();
    let v = DVector::from_fn(d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = v.norm();
    PureState::new(shape.clone(), v / Complex64::from(norm))
}

/// Rank-limited random density operator: Haar pure state on shape ⊗ ancilla of
/// dimension `rank`, ancilla traced out.
pub fn random_density(shape: &SystemShape, rank: usize, seed: u64) -> Result<DensityOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_density_with(shape, rank, &mut rng)
}

pub fn random_density_with(
    shape: &SystemShape,
    rank: usize,
    rng: &mut impl Rng,
) -> Result<DensityOperator> {
    let d = shape.total_dim();
    if rank < 1 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    if rank > d {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} exceeds total dimension {d}"
        )));
    }
    let mut v: Vec<Complex64> = (0..d * rank)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    // Ancilla is the fastest index.
    let mut out = DMatrix::from_element(d, d, Complex64::ZERO);
    for i in 0..d {
        for j in 0..d {
            let mut acc = Complex64::ZERO;
            for k in 0..rank {
                acc += v[i * rank + k] * v[j * rank + k].conj();
            }
            out[(i, j)] = acc;
        }
    }
    DensityOperator::new(shape.clone(), out)
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the R diagonal's
/// phases folded into Q.
pub fn random_unitary(dim: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary_with(dim, &mut rng)
}

pub fn random_unitary_with(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let phases = DVector::from_fn(dim, |i, _| {
        let z = r[(i, i)];
        if z.norm() == 0.0 {
            Complex64::ONE
        } else {
            z / Complex64::from(z.norm())
        }
    });
    let mut out = q;
    for j in 0..dim {
        for i in 0..dim {
            out[(i, j)] *= phases[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    use crate::fixtures::{bell_pair as bell_phi_plus, four_qubit_benchmark as four_qubit_example};

    #[test]
    fn shape_guards() {
        assert!(SystemShape::new(vec!["A".into()], vec![2, 2]).is_err());
        assert!(SystemShape::new(vec!["A".into(), "A".into()], vec![2, 2]).is_err());
        assert!(SystemShape::new(vec!["A".into(), "B".into()], vec![2, 1]).is_err());
        assert!(SystemShape::with_default_labels(vec![2; 13]).is_err());
        assert!(SystemShape::with_default_labels(vec![4; 6]).is_ok());
    }

    #[test]
    fn ravel_unravel_round_trip() {
        let shape = SystemShape::with_default_labels(vec![2, 3, 2]).unwrap();
        for g in 0..shape.total_dim() {
            assert_eq!(shape.ravel(&shape.unravel(g)), g);
        }
        // Subsystem 0 is slowest: index 6 = |1,0,0> for dims (2,3,2).
        assert_eq!(shape.unravel(6), vec![1, 0, 0]);
    }

    #[test]
    fn pure_state_norm_enforced() {
        let shape = SystemShape::qubits(1).unwrap();
        let v = DVector::from_vec(vec![c(0.6, 0.0), c(0.7, 0.0)]);
        assert!(matches!(
            PureState::new(shape, v),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn density_validation() {
        let shape = SystemShape::qubits(1).unwrap();
        let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.3, 0.0), c(0.5, 0.0)]);
        assert!(DensityOperator::new(shape.clone(), not_herm).is_err());
        let bad_trace = DMatrix::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)]);
        assert!(DensityOperator::new(shape.clone(), bad_trace).is_err());
        let not_psd = DMatrix::from_row_slice(2, 2, &[c(1.1, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0)]);
        assert!(DensityOperator::new(shape, not_psd).is_err());
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let rho = bell_phi_plus().partial_trace(&[1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert_relative_eq!(rho.matrix()[(i, j)].re, expect, epsilon = 1e-12);
                assert_relative_eq!(rho.matrix()[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn four_qubit_example_last_marginal() {
        // Independent direct-summation oracle for Tr_ABC.
        let psi = four_qubit_example();
        let amps = psi.amplitudes();
        let mut oracle = [[Complex64::ZERO; 2]; 2];
        for a in 0..2usize {
            for b in 0..2usize {
                for x in 0..8usize {
                    oracle[a][b] += amps[x * 2 + a] * amps[x * 2 + b].conj();
                }
            }
        }
        let rho = psi.partial_trace(&[3]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert_relative_eq!(rho.matrix()[(a, b)].re, oracle[a][b].re, epsilon = 1e-12);
                assert_relative_eq!(rho.matrix()[(a, b)].im, oracle[a][b].im, epsilon = 1e-12);
            }
        }
        assert_relative_eq!(rho.matrix()[(0, 0)].re, 15.0 / 16.0, epsilon = 1e-12);
        assert_relative_eq!(rho.matrix()[(1, 1)].re, 1.0 / 16.0, epsilon = 1e-12);
        assert_relative_eq!(rho.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_factorizes_products() {
        let a = random_density(&SystemShape::qubits(1).unwrap(), 2, 11).unwrap();
        let b = random_density(&SystemShape::qubits(1).unwrap(), 2, 12).unwrap();
        let s = random_density(&SystemShape::qubits(1).unwrap(), 2, 13).unwrap();
        let product = a.matrix().kronecker(b.matrix()).kronecker(s.matrix());
        let rho = DensityOperator::new(SystemShape::qubits(3).unwrap(), product).unwrap();
        let reduced = rho.partial_trace(&[0, 1]).unwrap();
        let expect = a.matrix().kronecker(b.matrix());
        assert!((reduced.matrix() - expect).camax() < 1e-12);
    }

    #[test]
    fn schmidt_squares_match_marginal_spectra() {
        // Exercises both the two-row closed form and the general SVD path.
        let shapes = [vec![2, 2], vec![2, 2, 2], vec![3, 2, 2], vec![2, 3, 4]];
        let blocks: [&[usize]; 4] = [&[0], &[1], &[0, 2], &[1]];
        for (shape_dims, block) in shapes.iter().zip(blocks) {
            let shape = SystemShape::with_default_labels(shape_dims.clone()).unwrap();
            for seed in 0..4 {
                let psi = random_pure(&shape, 900 + seed).unwrap();
                let mut mu = psi.schmidt_squares(block).unwrap();
                mu.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let (mut eigs, _) = psi.partial_trace(block).unwrap().eigensystem();
                eigs.truncate(mu.len());
                for (got, want) in mu.iter().zip(&eigs) {
                    assert_relative_eq!(got, want, epsilon = 1e-9);
                }
                assert_relative_eq!(mu.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn schmidt_squares_resolve_tiny_weights() {
        // Nearly product: the marginal spectrum is {1 - eps^2, eps^2} and the
        // small weight must come back relatively accurate, far below the
        // precision a formed marginal could support.
        let shape = SystemShape::qubits(2).unwrap();
        for exp in [-6, -8, -10] {
            let eps = 10f64.powi(exp);
            let big = (1.0 - eps * eps).sqrt();
            let psi = PureState::from_terms(
                shape.clone(),
                &[(0b00, c(big, 0.0)), (0b11, c(eps, 0.0))],
            )
            .unwrap();
            let mu = psi.schmidt_squares(&[0]).unwrap();
            let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_relative_eq!(lo, eps * eps, max_relative = 1e-10);
        }
    }

    #[test]
    fn partial_transpose_bell_and_involution() {
        let rho = bell_phi_plus().density();
        let pt = rho.partial_transpose(&[1]).unwrap();
        let min_eig = DensityOperator {
            shape: rho.shape().clone(),
            matrix: pt.clone(),
        };
        let eigs = min_eig.matrix.clone().symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(min, -0.5, epsilon = 1e-12);
        // Involution, exactly.
        let back = DensityOperator {
            shape: rho.shape().clone(),
            matrix: pt,
        }
        .partial_transpose(&[1])
        .unwrap();
        assert_eq!(&back, rho.matrix());
    }

    #[test]
    fn partial_transpose_of_product_is_psd() {
        let a = random_density(&SystemShape::qubits(1).unwrap(), 2, 21).unwrap();
        let b = random_density(&SystemShape::qubits(1).unwrap(), 2, 22).unwrap();
        let rho = DensityOperator::new(
            SystemShape::qubits(2).unwrap(),
            a.matrix().kronecker(b.matrix()),
        )
        .unwrap();
        let pt = rho.partial_transpose(&[0]).unwrap();
        let min = pt
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min > -1e-12);
    }

    #[test]
    fn regroup_identity_is_identity() {
        let psi = four_qubit_example();
        let regrouped = psi.regroup(&Partition::finest(4)).unwrap();
        match regrouped {
            State::Pure(p) => assert_eq!(p.amplitudes(), psi.amplitudes()),
            State::Mixed(_) => panic!("full-cover regroup of a pure state must stay pure"),
        }
    }

    #[test]
    fn regroup_merges_blocks_and_permutes() {
        let psi = four_qubit_example();
        let part = psi.shape().parse_partition("AB|CD").unwrap();
        let State::Pure(p) = psi.regroup(&part).unwrap() else {
            panic!("expected pure");
        };
        assert_eq!(p.shape().labels(), &["AB".to_string(), "CD".to_string()]);
        assert_eq!(p.shape().dims(), &[4, 4]);
        // Blocks keep original index order here, so amplitudes are unchanged.
        assert_eq!(p.amplitudes(), psi.amplitudes());

        // A reordering block structure really permutes.
        let part = psi.shape().parse_partition("AC|BD").unwrap();
        let State::Pure(p) = psi.regroup(&part).unwrap() else {
            panic!("expected pure");
        };
        let g = psi.shape().ravel(&[0, 1, 0, 1]); // |0101> -> digits (A,C,B,D) = (0,0,1,1)
        let permuted = p.amplitudes()[0b0011];
        assert_eq!(permuted, psi.amplitudes()[g]);
        // Bijection: amplitude multisets agree.
        let mut src: Vec<(f64, f64)> = psi.amplitudes().iter().map(|z| (z.re, z.im)).collect();
        let mut dst: Vec<(f64, f64)> = p.amplitudes().iter().map(|z| (z.re, z.im)).collect();
        src.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dst.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(src, dst);
    }

    #[test]
    fn regroup_partial_cover_traces_out() {
        let shape = SystemShape::qubits(3).unwrap();
        let psi = random_pure(&shape, 5).unwrap();
        let part = shape.parse_partition("A|B").unwrap();
        let State::Mixed(rho) = psi.regroup(&part).unwrap() else {
            panic!("partial cover must yield a mixed state");
        };
        let direct = psi.partial_trace(&[0, 1]).unwrap();
        assert!((rho.matrix() - direct.matrix()).camax() < 1e-12);
    }

    #[test]
    fn random_states_deterministic_and_valid() {
        let shape = SystemShape::qubits(2).unwrap();
        let a = random_pure(&shape, 42).unwrap();
        let b = random_pure(&shape, 42).unwrap();
        assert_eq!(a.amplitudes(), b.amplitudes());
        let r1 = random_density(&shape, 4, 7).unwrap();
        let r2 = random_density(&shape, 4, 7).unwrap();
        assert_eq!(r1.matrix(), r2.matrix());
        assert_relative_eq!(r1.matrix().trace().re, 1.0, epsilon = 1e-10);
        assert!(random_density(&shape, 0, 1).is_err());
        assert!(random_density(&shape, 5, 1).is_err());
    }

    #[test]
    fn mean_marginal_purity_matches_hilbert_schmidt_average() {
        // Lubkin: E[tr rho_A^2] = (dA + dB) / (dA dB + 1) = 4/5 for two qubits.
        let shape = SystemShape::qubits(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let psi = random_pure_with(&shape, &mut rng).unwrap();
            acc += psi.partial_trace(&[0]).unwrap().purity();
        }
        assert_relative_eq!(acc / n as f64, 0.8, epsilon = 0.01);
    }

    #[test]
    fn schmidt_symmetry() {
        let shape = SystemShape::with_default_labels(vec![2, 3, 2]).unwrap();
        for seed in 0..20 {
            let psi = random_pure(&shape, seed).unwrap();
            let left = psi.partial_trace(&[0]).unwrap();
            let right = psi.partial_trace(&[1, 2]).unwrap();
            let (mut a, _) = left.eigensystem();
            let (mut b, _) = right.eigensystem();
            // Pad the smaller spectrum with zeros.
            while a.len() < b.len() {
                a.push(0.0);
            }
            while b.len() < a.len() {
                b.push(0.0);
            }
            for (x, y) in a.iter().zip(&b) {
                assert_relative_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn local_unitary_preserves_complementary_spectra() {
        let shape = SystemShape::qubits(3).unwrap();
        for seed in 0..10 {
            let psi = random_pure(&shape, 100 + seed).unwrap();
            let u = random_unitary(2, 200 + seed);
            let rotated = psi.apply_local_unitary(2, &u).unwrap();
            let (a, _) = psi.partial_trace(&[0, 1]).unwrap().eigensystem();
            let (b, _) = rotated.partial_trace(&[0, 1]).unwrap().eigensystem();
            for (x, y) in a.iter().zip(&b) {
                assert_relative_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let u = random_unitary(4, 9);
        let err = (u.adjoint() * &u - DMatrix::identity(4, 4)).camax();
        assert!(err < 1e-12);
    }

    #[test]
    fn ensemble_validation_and_reconstruction() {
        let shape = SystemShape::qubits(1).unwrap();
        let zero = PureState::from_terms(shape.clone(), &[(0, c(1.0, 0.0))]).unwrap();
        let one = PureState::from_terms(shape.clone(), &[(1, c(1.0, 0.0))]).unwrap();
        assert!(Ensemble::new(vec![(0.5, zero.clone()), (0.4, one.clone())]).is_err());
        let ens = Ensemble::new(vec![(0.5, zero), (0.5, one)]).unwrap();
        let img = DensityOperator::new(
            shape,
            DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]),
        )
        .unwrap();
        assert!(ens.reconstruction_error(&img) < 1e-15);
    }
}
