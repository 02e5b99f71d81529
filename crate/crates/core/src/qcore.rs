//! Dense complex linear algebra for finite-dimensional states: density
//! matrices, observables, Kronecker products, partial traces, entropy and
//! the trace norm.
//!
//! Joint indices follow `k = i * d2 + j` for local indices `(i, j)`
//! everywhere in the crate; [`tensor`] and [`restrict`] agree on it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Dense complex matrix used as the carrier for every operator.
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Hermiticity tolerance (entrywise).
pub const TAU_HERM: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const TAU_PSD: f64 = 1e-9;
/// Trace / normalization tolerance.
pub const TAU_TRACE: f64 = 1e-10;
/// Eigenvalues at or below this count as numerically zero when determining rank.
pub const EPS_RANK: f64 = 1e-10;
/// Largest joint Hilbert-space dimension accepted by constructors and products.
pub const MAX_JOINT_DIM: usize = 1024;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITERS: usize = 10_000;

/// Logarithm base for entropies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Bits => x.log2(),
            LogBase::Nats => x.ln(),
        }
    }
}

/// Which side of a bipartite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    One,
    Two,
}

/// Factor dimensions of `H1 ⊗ H2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BipartiteLayout {
    d1: usize,
    d2: usize,
}

impl BipartiteLayout {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::Layout(format!("factor dimensions must be positive, got {d1}x{d2}")));
        }
        match d1.checked_mul(d2) {
            Some(n) if n <= MAX_JOINT_DIM => Ok(Self { d1, d2 }),
            _ => Err(Error::TooLarge { dim: d1.saturating_mul(d2), max: MAX_JOINT_DIM }),
        }
    }

    /// Two qubits.
    pub fn qubits() -> Self {
        Self { d1: 2, d2: 2 }
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn joint(&self) -> usize {
        self.d1 * self.d2
    }

    pub fn dim_of(&self, factor: Factor) -> usize {
        match factor {
            Factor::One => self.d1,
            Factor::Two => self.d2,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.d2 + j
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        if dim != self.joint() {
            return Err(Error::Layout(format!(
                "state dimension {dim} does not match layout {}x{}",
                self.d1, self.d2
            )));
        }
        Ok(())
    }
}

fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("matrix is not square: {}x{}", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if m.nrows() > MAX_JOINT_DIM {
        return Err(Error::TooLarge { dim: m.nrows(), max: MAX_JOINT_DIM });
    }
    Ok(m.nrows())
}

/// Largest entrywise deviation `max |M - M†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Averages `M` with its adjoint.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a hermitian matrix, eigenvalues in decreasing order.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(hermitian_part(m), EIGEN_EPS, EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues of a hermitian matrix in decreasing order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    // Closed form for 2x2 keeps the optimizer's inner loops cheap.
    if m.nrows() == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
        let (l0, l1) = eig2(a, d, b.norm_sqr());
        return Ok(vec![l0, l1]);
    }
    hermitian_eigen(m).map(|(v, _)| v)
}

/// Eigenvalues of `[[a, b], [b*, d]]` given `|b|^2`, larger first.
#[inline]
pub(crate) fn eig2(a: f64, d: f64, b_norm_sqr: f64) -> (f64, f64) {
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = (half_diff * half_diff + b_norm_sqr).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates all density-matrix invariants.
    pub fn new(data: CMatrix) -> Result<Self> {
        check_square(&data)?;
        check_finite(&data)?;
        let defect = hermiticity_defect(&data);
        if defect > TAU_HERM {
            return Err(Error::NotHermitian(defect));
        }
        let tr = data.trace();
        if (tr.re - 1.0).abs() > TAU_TRACE || tr.im.abs() > TAU_TRACE {
            return Err(Error::BadTrace(tr.re));
        }
        let min = *hermitian_eigenvalues(&data)?.last().expect("nonempty");
        if min < -TAU_PSD {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { data })
    }

    /// Symmetrizes and normalizes a matrix already known to be PSD up to rounding.
    pub(crate) fn from_raw(data: CMatrix) -> Self {
        let mut data = hermitian_part(&data);
        let tr = data.trace().re;
        if tr > 0.0 {
            data.unscale_mut(tr);
        }
        Self { data }
    }

    /// `I_d / d`.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_JOINT_DIM {
            return Err(Error::Dimension(format!("invalid dimension {dim}")));
        }
        Ok(Self { data: CMatrix::identity(dim, dim).unscale(dim as f64) })
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            probs.len(),
            probs.iter().map(|&p| C64::new(p, 0.0)),
        ));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    /// Eigenvalues (decreasing) and eigenvectors as columns.
    pub fn eigen(&self) -> Result<(Vec<f64>, CMatrix)> {
        hermitian_eigen(&self.data)
    }

    /// Number of eigenvalues above [`EPS_RANK`].
    pub fn rank(&self) -> Result<usize> {
        Ok(hermitian_eigenvalues(&self.data)?.iter().filter(|&&l| l > EPS_RANK).count())
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `λ a + (1 - λ) b`.
    pub fn mix(a: &Self, b: &Self, lambda: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!("cannot mix dimensions {} and {}", a.dim(), b.dim())));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Usage(format!("mixing weight {lambda} outside [0, 1]")));
        }
        Ok(Self { data: a.data.scale(lambda) + b.data.scale(1.0 - lambda) })
    }

    /// Convex combination `Σ w_i ρ_i`; weights must be a probability vector.
    pub fn convex(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Usage("empty mixture".into()))?;
        let dim = first.1.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::Dimension("mixture components differ in dimension".into()));
            }
            acc += rho.data.scale(*w);
        }
        Self::new(acc)
    }

    /// `U ρ U†`; `u` must be unitary.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::Dimension("unitary does not match state dimension".into()));
        }
        Ok(Self::from_raw(u * &self.data * u.adjoint()))
    }
}

/// Unit vector in a finite-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: CVector,
}

impl PureState {
    /// Requires unit norm within [`TAU_TRACE`].
    pub fn new(amps: CVector) -> Result<Self> {
        if amps.is_empty() || amps.len() > MAX_JOINT_DIM {
            return Err(Error::Dimension(format!("invalid pure-state dimension {}", amps.len())));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > TAU_TRACE {
            return Err(Error::BadTrace(norm * norm));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn normalized(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if !norm.is_finite() || norm <= f64::EPSILON {
            return Err(Error::Numerical("cannot normalize a zero vector".into()));
        }
        Self::new(amps.unscale(norm))
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::normalized(CVector::from_iterator(amps.len(), amps.iter().map(|&a| C64::new(a, 0.0))))
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { data: &self.amps * self.amps.adjoint() }
    }

    /// `|ψ⟩ ⊗ |φ⟩` under the global index convention.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let dim = self.dim() * other.dim();
        if dim > MAX_JOINT_DIM {
            return Err(Error::TooLarge { dim, max: MAX_JOINT_DIM });
        }
        let d2 = other.dim();
        Ok(PureState { amps: CVector::from_fn(dim, |k, _| self.amps[k / d2] * other.amps[k % d2]) })
    }
}

/// Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    data: CMatrix,
}

impl Observable {
    pub fn new(data: CMatrix) -> Result<Self> {
        check_square(&data)?;
        check_finite(&data)?;
        let defect = hermiticity_defect(&data);
        if defect > TAU_HERM {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { data })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim))
    }

    /// Real diagonal observable.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&CVector::from_iterator(
            values.len(),
            values.iter().map(|&v| C64::new(v, 0.0)),
        )))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    /// Largest and smallest eigenvalue.
    pub fn spectral_range(&self) -> Result<(f64, f64)> {
        let ev = hermitian_eigenvalues(&self.data)?;
        Ok((ev[0], *ev.last().expect("nonempty")))
    }
}

/// Kronecker product of two operators of the same kind.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

/// Entrywise Kronecker product `x ⊗ y` with joint index `i * dim(y) + j`.
pub fn kron(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    let rows = x.nrows().checked_mul(y.nrows());
    let cols = x.ncols().checked_mul(y.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r <= MAX_JOINT_DIM && c <= MAX_JOINT_DIM => Ok(x.kronecker(y)),
        _ => Err(Error::TooLarge { dim: x.nrows().saturating_mul(y.nrows()), max: MAX_JOINT_DIM }),
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(DensityMatrix { data: kron(&self.data, &other.data)? })
    }
}

impl Tensor for Observable {
    fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Observable { data: kron(&self.data, &other.data)? })
    }
}

/// `x ⊗ y`.
pub fn tensor<T: Tensor>(x: &T, y: &T) -> Result<T> {
    x.tensor(y)
}

/// Reduced density matrix on `factor` (partial trace over the other factor).
pub fn restrict(w: &DensityMatrix, layout: BipartiteLayout, factor: Factor) -> Result<DensityMatrix> {
    layout.check(w.dim())?;
    Ok(DensityMatrix { data: partial_trace(w.matrix(), layout, factor) })
}

pub(crate) fn partial_trace(m: &CMatrix, layout: BipartiteLayout, keep: Factor) -> CMatrix {
    let (d1, d2) = (layout.d1, layout.d2);
    match keep {
        Factor::One => CMatrix::from_fn(d1, d1, |i, k| {
            (0..d2).map(|j| m[(i * d2 + j, k * d2 + j)]).sum()
        }),
        Factor::Two => CMatrix::from_fn(d2, d2, |j, l| {
            (0..d1).map(|i| m[(i * d2 + j, i * d2 + l)]).sum()
        }),
    }
}

/// Von Neumann entropy in bits.
pub fn entropy(r: &DensityMatrix) -> Result<f64> {
    entropy_with(r, LogBase::Bits)
}

pub fn entropy_with(r: &DensityMatrix, base: LogBase) -> Result<f64> {
    let ev = hermitian_eigenvalues(r.matrix())?;
    spectrum_entropy(&ev, base)
}

/// `-Σ λ log λ` over a spectrum; values in `[-TAU_PSD, 0)` are clamped to zero.
pub fn spectrum_entropy(eigenvalues: &[f64], base: LogBase) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigenvalues {
        if l < -TAU_PSD {
            return Err(Error::NotPsd(l));
        }
        if l > 0.0 {
            s -= l * base.log(l);
        }
    }
    Ok(s.max(0.0))
}

/// Trace norm `‖a - b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("trace distance between dimensions {} and {}", a.dim(), b.dim())));
    }
    trace_norm_hermitian(&(a.matrix() - b.matrix()))
}

/// `Σ |λ_i|` for a hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> Result<f64> {
    Ok(hermitian_eigenvalues(m)?.iter().map(|l| l.abs()).sum())
}

/// `Tr(w A)`.
pub fn expect(w: &DensityMatrix, a: &Observable) -> Result<f64> {
    if w.dim() != a.dim() {
        return Err(Error::Dimension(format!(
            "observable dimension {} does not match state dimension {}",
            a.dim(),
            w.dim()
        )));
    }
    let z = trace_of_product(w.matrix(), a.matrix());
    if z.im.abs() > TAU_HERM * w.dim() as f64 {
        return Err(Error::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
