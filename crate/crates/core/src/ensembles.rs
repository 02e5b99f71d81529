//! Finite convex decompositions of a state and their parametrization by
//! isometries.
//!
//! Every pure-state ensemble `{(λ_i, ψ_i)}` with at most `K` members and
//! barycenter `w = Σ_j s_j |e_j⟩⟨e_j|` is of the form
//! `√λ_i ψ_i = Σ_j conj(V_ij) √s_j e_j` for some `K × r` matrix `V` with
//! orthonormal columns. [`IsometryParams`] holds an unconstrained complex
//! `K × r` matrix that is orthonormalized column by column to produce `V`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qcore::{hermitian_eigen, CMatrix, CVector, DensityMatrix, Tensor, C64, EPS_RANK, TAU_TRACE};

/// Entrywise tolerance for `Σ λ_i ρ_i = barycenter`.
pub const TAU_BARY: f64 = 1e-9;
/// Items with weight below this are dropped.
pub const W_MIN: f64 = 1e-12;
/// Relative column norm below which orthogonalization reports a rank collapse.
const COLLAPSE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleItem {
    pub weight: f64,
    pub state: DensityMatrix,
}

/// Finitely supported probability measure on states with a declared barycenter.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    barycenter: DensityMatrix,
    items: Vec<EnsembleItem>,
}

impl Ensemble {
    /// Prunes items below [`W_MIN`] and checks normalization and the barycenter.
    pub fn new(barycenter: DensityMatrix, items: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        let dim = barycenter.dim();
        let mut kept = Vec::with_capacity(items.len());
        for (weight, state) in items {
            if !weight.is_finite() || weight < 0.0 || weight > 1.0 + TAU_TRACE {
                return Err(Error::Usage(format!("ensemble weight {weight} is not a probability")));
            }
            if state.dim() != dim {
                return Err(Error::Dimension(format!(
                    "ensemble item of dimension {} for barycenter of dimension {dim}",
                    state.dim()
                )));
            }
            if weight >= W_MIN {
                kept.push(EnsembleItem { weight, state });
            }
        }
        if kept.is_empty() {
            return Err(Error::Usage("ensemble has no items of positive weight".into()));
        }
        let total: f64 = kept.iter().map(|it| it.weight).sum();
        if (total - 1.0).abs() > TAU_TRACE.max(kept.len() as f64 * 1e-14) {
            return Err(Error::Usage(format!("ensemble weights sum to {total}, not 1")));
        }
        let ens = Self { barycenter, items: kept };
        let residue = ens.barycenter_residue();
        if residue > TAU_BARY {
            return Err(Error::Consistency(format!("barycenter residue {residue:e} exceeds {TAU_BARY:e}")));
        }
        Ok(ens)
    }

    pub fn barycenter(&self) -> &DensityMatrix {
        &self.barycenter
    }

    pub fn items(&self) -> &[EnsembleItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.items.iter().map(|it| it.weight).collect()
    }

    /// `max |Σ λ_i ρ_i - barycenter|` entrywise.
    pub fn barycenter_residue(&self) -> f64 {
        let dim = self.barycenter.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for it in &self.items {
            acc += it.state.matrix().scale(it.weight);
        }
        (acc - self.barycenter.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// True when every item has largest eigenvalue at least `1 - tol`.
    pub fn is_pure(&self, tol: f64) -> Result<bool> {
        for it in &self.items {
            let (ev, _) = it.state.eigen()?;
            if ev[0] < 1.0 - tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Concatenation with outer weights `λ` and `1 - λ`: an ensemble of `λ ω₁ + (1 - λ) ω₂`.
    pub fn mix(first: &Ensemble, second: &Ensemble, lambda: f64) -> Result<Ensemble> {
        let barycenter = DensityMatrix::mix(&first.barycenter, &second.barycenter, lambda)?;
        let items = first
            .items
            .iter()
            .map(|it| (lambda * it.weight, it.state.clone()))
            .chain(second.items.iter().map(|it| ((1.0 - lambda) * it.weight, it.state.clone())))
            .collect();
        Ensemble::new(barycenter, items)
    }

    /// Itemwise tensor product: an ensemble of `ω₁ ⊗ ω₂`.
    pub fn tensor(&self, other: &Ensemble) -> Result<Ensemble> {
        let barycenter = self.barycenter.tensor(&other.barycenter)?;
        let mut items = Vec::with_capacity(self.len() * other.len());
        for a in &self.items {
            for b in &other.items {
                items.push((a.weight * b.weight, a.state.tensor(&b.state)?));
            }
        }
        Ensemble::new(barycenter, items)
    }

    /// Applies `f` to the barycenter and every item state (e.g. a basis permutation).
    pub fn map_states<F>(&self, mut f: F) -> Result<Ensemble>
    where
        F: FnMut(&DensityMatrix) -> Result<DensityMatrix>,
    {
        let barycenter = f(&self.barycenter)?;
        let items = self
            .items
            .iter()
            .map(|it| Ok((it.weight, f(&it.state)?)))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(barycenter, items)
    }
}

/// Eigen-decomposition ensemble: eigenvalues above [`EPS_RANK`] with their eigenprojectors.
pub fn spectral_ensemble(w: &DensityMatrix) -> Result<Ensemble> {
    let (values, vectors) = w.eigen()?;
    let items = values
        .iter()
        .enumerate()
        .take_while(|(_, &l)| l > EPS_RANK)
        .map(|(k, &l)| {
            let v = vectors.column(k).into_owned();
            (l, DensityMatrix::from_raw(&v * v.adjoint()))
        })
        .collect();
    Ensemble::new(w.clone(), items)
}

/// `Σ λ_i f(ρ_i)`.
pub fn ensemble_objective<F>(e: &Ensemble, mut f: F) -> Result<f64>
where
    F: FnMut(&DensityMatrix) -> Result<f64>,
{
    let mut acc = 0.0;
    for it in &e.items {
        acc += it.weight * f(&it.state)?;
    }
    Ok(acc)
}

/// Coordinates of a `K × r` isometry: an unconstrained complex matrix stored
/// column-major as interleaved `(re, im)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct IsometryParams {
    source_rank: usize,
    ensemble_size: usize,
    params: Vec<f64>,
}

impl IsometryParams {
    pub fn param_len(ensemble_size: usize, source_rank: usize) -> usize {
        2 * ensemble_size * source_rank
    }

    pub fn new(source_rank: usize, ensemble_size: usize, params: Vec<f64>) -> Result<Self> {
        if source_rank == 0 || ensemble_size < source_rank {
            return Err(Error::Usage(format!(
                "isometry shape {ensemble_size}x{source_rank} needs K >= r >= 1"
            )));
        }
        let want = Self::param_len(ensemble_size, source_rank);
        if params.len() != want {
            return Err(Error::Usage(format!("expected {want} isometry parameters, got {}", params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { source_rank, ensemble_size, params })
    }

    /// Parameters whose realization is `[I_r; 0]`.
    pub fn identity(ensemble_size: usize, source_rank: usize) -> Result<Self> {
        let mut params = vec![0.0; Self::param_len(ensemble_size, source_rank)];
        for j in 0..source_rank.min(ensemble_size) {
            params[2 * (j * ensemble_size + j)] = 1.0;
        }
        Self::new(source_rank, ensemble_size, params)
    }

    /// Standard complex Gaussian entries; the realized isometry is Haar distributed.
    pub fn random<R: Rng + ?Sized>(ensemble_size: usize, source_rank: usize, rng: &mut R) -> Result<Self> {
        let params = (0..Self::param_len(ensemble_size, source_rank))
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(source_rank, ensemble_size, params)
    }

    /// Coordinates of a given `K × r` matrix.
    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        let (k, r) = (m.nrows(), m.ncols());
        let mut params = Vec::with_capacity(2 * k * r);
        for z in m.iter() {
            params.push(z.re);
            params.push(z.im);
        }
        Self::new(r, k, params)
    }

    pub fn source_rank(&self) -> usize {
        self.source_rank
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.params
    }
}

/// Orthonormalizes the columns of a column-major `k × r` complex matrix in
/// place by modified Gram-Schmidt with `passes` projection sweeps. Returns
/// `false` on rank collapse.
pub(crate) fn orthonormalize_columns(a: &mut [C64], k: usize, r: usize, passes: usize) -> bool {
    for j in 0..r {
        let (done, rest) = a.split_at_mut(j * k);
        let col = &mut rest[..k];
        let original = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(original.is_finite() && original > 0.0) {
            return false;
        }
        for _ in 0..passes {
            for q in done.chunks_exact(k) {
                let dot: C64 = q.iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum();
                for (c, x) in col.iter_mut().zip(q) {
                    *c -= dot * x;
                }
            }
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= COLLAPSE_TOL * original {
            return false;
        }
        let inv = 1.0 / norm;
        for c in col.iter_mut() {
            *c *= inv;
        }
    }
    true
}

pub(crate) fn params_to_buffer(params: &[f64], out: &mut Vec<C64>) {
    out.clear();
    out.extend(params.chunks_exact(2).map(|p| C64::new(p[0], p[1])));
}

/// The `K × r` matrix with orthonormal columns encoded by `p`.
pub fn realize_isometry(p: &IsometryParams) -> Result<CMatrix> {
    let (k, r) = (p.ensemble_size, p.source_rank);
    let mut buf = Vec::with_capacity(k * r);
    params_to_buffer(&p.params, &mut buf);
    if !orthonormalize_columns(&mut buf, k, r, 2) {
        return Err(Error::DegenerateParameters(format!(
            "columns of the {k}x{r} parameter matrix are linearly dependent"
        )));
    }
    Ok(CMatrix::from_column_slice(k, r, &buf))
}

/// Square roots of the nonzero spectrum of a state, ready to be mixed by an isometry.
#[derive(Clone, Debug)]
pub struct Purification {
    dim: usize,
    rank: usize,
    /// Row `j` holds `√s_j e_j`.
    scaled: Vec<C64>,
}

impl Purification {
    pub fn new(w: &DensityMatrix) -> Result<Self> {
        let (values, vectors) = w.eigen()?;
        let dim = w.dim();
        let rank = values.iter().filter(|&&l| l > EPS_RANK).count();
        let mut scaled = Vec::with_capacity(rank * dim);
        for (j, &s) in values.iter().take(rank).enumerate() {
            let root = s.sqrt();
            scaled.extend(vectors.column(j).iter().map(|z| z * root));
        }
        Ok(Self { dim, rank, scaled })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Writes `ψ̃_i = Σ_j conj(V_ij) √s_j e_j` for each of the `k` rows of the
    /// column-major `v` into `out`.
    pub(crate) fn mix_into(&self, v: &[C64], k: usize, out: &mut Vec<C64>) {
        let (r, dim) = (self.rank, self.dim);
        out.clear();
        out.resize(k * dim, C64::new(0.0, 0.0));
        for i in 0..k {
            let row = &mut out[i * dim..(i + 1) * dim];
            for j in 0..r {
                let c = v[j * k + i].conj();
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let e = &self.scaled[j * dim..(j + 1) * dim];
                for (o, x) in row.iter_mut().zip(e) {
                    *o += c * x;
                }
            }
        }
    }

    /// Unnormalized item vectors for raw isometry coordinates; `None` on rank collapse.
    pub(crate) fn item_vectors(
        &self,
        params: &[f64],
        k: usize,
        scratch: &mut Vec<C64>,
        out: &mut Vec<C64>,
    ) -> bool {
        params_to_buffer(params, scratch);
        if !orthonormalize_columns(scratch, k, self.rank, 1) {
            return false;
        }
        self.mix_into(scratch, k, out);
        true
    }

    /// Evaluates an objective on the decomposition encoded by raw coordinates.
    /// Degenerate coordinates evaluate to `+∞`.
    pub(crate) fn evaluate<O: DecompositionObjective + ?Sized>(
        &self,
        params: &[f64],
        k: usize,
        objective: &O,
        scratch: &mut EvalScratch,
    ) -> f64 {
        if !self.item_vectors(params, k, &mut scratch.isometry, &mut scratch.vectors) {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for psi in scratch.vectors.chunks_exact(self.dim) {
            let weight: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            if weight >= W_MIN {
                acc += objective.item(psi, weight);
            }
        }
        objective.finish(acc)
    }
}

/// Reusable buffers for [`Purification::evaluate`].
#[derive(Default, Debug)]
pub(crate) struct EvalScratch {
    isometry: Vec<C64>,
    vectors: Vec<C64>,
}

/// Additive objective over the items of a pure-state decomposition,
/// evaluated on unnormalized vectors `ψ̃` with weight `⟨ψ̃|ψ̃⟩`.
pub trait DecompositionObjective: Sync {
    fn item(&self, unnormalized: &[C64], weight: f64) -> f64;

    /// Post-processing of the accumulated sum.
    fn finish(&self, accumulated: f64) -> f64 {
        accumulated
    }
}

fn pure_ensemble_from_vectors(w: &DensityMatrix, vectors: &[C64], dim: usize) -> Result<Ensemble> {
    let items = vectors
        .chunks_exact(dim)
        .filter_map(|psi| {
            let weight: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            (weight >= W_MIN).then(|| {
                let v = CVector::from_column_slice(psi).unscale(weight.sqrt());
                (weight, DensityMatrix::from_raw(&v * v.adjoint()))
            })
        })
        .collect();
    Ensemble::new(w.clone(), items)
}

/// Pure-state decomposition of `w` selected by the isometry `p`.
pub fn decompose(w: &DensityMatrix, p: &IsometryParams) -> Result<Ensemble> {
    let pur = Purification::new(w)?;
    decompose_with(&pur, w, p)
}

pub(crate) fn decompose_with(pur: &Purification, w: &DensityMatrix, p: &IsometryParams) -> Result<Ensemble> {
    if p.source_rank != pur.rank {
        return Err(Error::Usage(format!(
            "isometry source rank {} does not match state rank {}",
            p.source_rank, pur.rank
        )));
    }
    let v = realize_isometry(p)?;
    let mut vectors = Vec::new();
    pur.mix_into(v.as_slice(), p.ensemble_size, &mut vectors);
    pure_ensemble_from_vectors(w, &vectors, pur.dim)
}

/// Isometry coordinates reproducing a pure-state ensemble of `w`.
pub fn isometry_for_ensemble(w: &DensityMatrix, e: &Ensemble) -> Result<IsometryParams> {
    let (values, vectors) = w.eigen()?;
    let r = values.iter().filter(|&&l| l > EPS_RANK).count();
    let k = e.len();
    if k < r {
        return Err(Error::Usage(format!("ensemble of {k} items cannot represent a rank-{r} state")));
    }
    let mut v = CMatrix::zeros(k, r);
    for (i, it) in e.items().iter().enumerate() {
        let (ev, evec) = hermitian_eigen(it.state.matrix())?;
        if ev[0] < 1.0 - 1e-8 {
            return Err(Error::Usage("isometry coordinates exist only for pure-state ensembles".into()));
        }
        let psi = evec.column(0).scale(it.weight.sqrt());
        for j in 0..r {
            let overlap = vectors.column(j).dotc(&psi);
            v[(i, j)] = (overlap / values[j].sqrt()).conj();
        }
    }
    let gram = v.adjoint() * &v;
    let defect = (gram - CMatrix::identity(r, r)).norm();
    if defect > 1e-6 {
        return Err(Error::Consistency(format!(
            "ensemble does not decompose the given state (isometry defect {defect:e})"
        )));
    }
    IsometryParams::from_matrix(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{trace_distance, PureState};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, rank: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(dim, rank, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        DensityMatrix::from_raw(&g * g.adjoint())
    }

    #[test]
    fn spectral_ensemble_of_maximally_mixed_qubit() {
        let w = DensityMatrix::maximally_mixed(2).unwrap();
        let e = spectral_ensemble(&w).unwrap();
        assert_eq!(e.len(), 2);
        for it in e.items() {
            assert_abs_diff_eq!(it.weight, 0.5, epsilon = 1e-14);
        }
        assert!(e.barycenter_residue() <= TAU_BARY);
        assert!(e.is_pure(1e-8).unwrap());
    }

    #[test]
    fn spectral_ensemble_of_pure_and_rank_two() {
        let p = PureState::from_real(&[1.0, 2.0, 0.0]).unwrap().projector();
        let e = spectral_ensemble(&p).unwrap();
        assert_eq!(e.len(), 1);
        assert_abs_diff_eq!(e.items()[0].weight, 1.0, epsilon = 1e-12);
        assert!(trace_distance(&e.items()[0].state, &p).unwrap() < 1e-12);

        let w = DensityMatrix::diagonal(&[0.75, 0.25, 0.0, 0.0]).unwrap();
        let oracle_rank = [0.75, 0.25, 0.0, 0.0].iter().filter(|&&l| l > EPS_RANK).count();
        let e = spectral_ensemble(&w).unwrap();
        assert_eq!(e.len(), oracle_rank);
        assert_abs_diff_eq!(e.items()[0].weight, 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(e.items()[1].weight, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn identity_parameters_realize_identity() {
        let p = IsometryParams::identity(3, 3).unwrap();
        let v = realize_isometry(&p).unwrap();
        assert_eq!(v, CMatrix::identity(3, 3));
    }

    #[test]
    fn realize_isometry_normalizes_real_column() {
        let p = IsometryParams::new(1, 2, vec![3.0, 0.0, 4.0, 0.0]).unwrap();
        let v = realize_isometry(&p).unwrap();
        assert_abs_diff_eq!(v[(0, 0)].re, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v[(1, 0)].re, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn realize_isometry_reports_rank_collapse() {
        // Two identical columns.
        let p = IsometryParams::new(2, 2, vec![1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 0.0]).unwrap();
        assert!(matches!(realize_isometry(&p), Err(Error::DegenerateParameters(_))));
    }

    #[test]
    fn params_length_is_checked() {
        assert!(IsometryParams::new(2, 3, vec![0.0; 5]).is_err());
        assert!(IsometryParams::new(3, 2, vec![0.0; 12]).is_err());
    }

    #[test]
    fn identity_isometry_reproduces_spectral_ensemble() {
        let w = random_state(4, 3, 11);
        let e = decompose(&w, &IsometryParams::identity(3, 3).unwrap()).unwrap();
        let s = spectral_ensemble(&w).unwrap();
        assert_eq!(e.len(), s.len());
        for (a, b) in e.items().iter().zip(s.items()) {
            assert_abs_diff_eq!(a.weight, b.weight, epsilon = 1e-12);
            assert!(trace_distance(&a.state, &b.state).unwrap() < 1e-10);
        }
    }

    #[test]
    fn hadamard_isometry_on_maximally_mixed_qubit() {
        let w = DensityMatrix::maximally_mixed(2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let p = IsometryParams::new(2, 2, vec![h, 0.0, h, 0.0, h, 0.0, -h, 0.0]).unwrap();
        let e = decompose(&w, &p).unwrap();
        // Hand computation: the eigenbasis of I/2 is arbitrary, so the items are an
        // orthogonal pair of pure states with weights 1/2 each.
        assert_eq!(e.len(), 2);
        for it in e.items() {
            assert_abs_diff_eq!(it.weight, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(it.state.purity(), 1.0, epsilon = 1e-12);
        }
        let overlap = crate::qcore::trace_of_product(e.items()[0].state.matrix(), e.items()[1].state.matrix());
        assert_abs_diff_eq!(overlap.re, 0.0, epsilon = 1e-12);
        // With a computational eigenbasis the items are exactly |+⟩ and |−⟩.
        let plus = PureState::from_real(&[1.0, 1.0]).unwrap().projector();
        let minus = PureState::from_real(&[1.0, -1.0]).unwrap().projector();
        let (_, basis) = w.eigen().unwrap();
        if (basis[(0, 0)].norm() - 1.0).abs() < 1e-12 || (basis[(1, 0)].norm() - 1.0).abs() < 1e-12 {
            let a = &e.items()[0].state;
            let hit = trace_distance(a, &plus).unwrap().min(trace_distance(a, &minus).unwrap());
            assert!(hit < 1e-12);
        }
    }

    #[test]
    fn random_isometry_barycenter() {
        let w = random_state(4, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = IsometryParams::random(6, 3, &mut rng).unwrap();
        let e = decompose(&w, &p).unwrap();
        assert!(e.barycenter_residue() <= 1e-9);
        assert!(e.is_pure(1e-8).unwrap());
    }

    #[test]
    fn decompose_checks_rank() {
        let w = random_state(4, 3, 5);
        assert!(matches!(decompose(&w, &IsometryParams::identity(4, 4).unwrap()), Err(Error::Usage(_))));
    }

    #[test]
    fn ensemble_objective_examples() {
        let p = PureState::from_real(&[1.0, 0.0]).unwrap().projector();
        let single = Ensemble::new(p.clone(), vec![(1.0, p.clone())]).unwrap();
        assert_eq!(ensemble_objective(&single, |s| Ok(s.matrix()[(0, 0)].re)).unwrap(), 1.0);

        let w = random_state(3, 3, 1);
        let s = spectral_ensemble(&w).unwrap();
        assert_abs_diff_eq!(ensemble_objective(&s, |_| Ok(1.0)).unwrap(), 1.0, epsilon = 1e-12);

        // Spectral ensemble of I/2 embedded as I/2 ⊗ |0⟩⟨0|: each item is a product,
        // so the marginal entropy of every item is 0 and the weighted sum is 0.5·0 + 0.5·0.
        let zero = PureState::basis(2, 0).unwrap().projector();
        let half = DensityMatrix::maximally_mixed(2).unwrap();
        let embedded = spectral_ensemble(&half)
            .unwrap()
            .map_states(|st| st.tensor(&zero))
            .unwrap();
        let layout = crate::qcore::BipartiteLayout::qubits();
        let value = ensemble_objective(&embedded, |st| {
            crate::qcore::entropy(&crate::qcore::restrict(st, layout, crate::qcore::Factor::One)?)
        })
        .unwrap();
        assert_abs_diff_eq!(value, 0.5 * 0.0 + 0.5 * 0.0, epsilon = 1e-12);
        // And with f = ⟨0|ρ_1|0⟩ the hand sum is 0.5·p0 + 0.5·(1 - p0) = 0.5.
        let value = ensemble_objective(&embedded, |st| {
            Ok(crate::qcore::restrict(st, layout, crate::qcore::Factor::One)?.matrix()[(0, 0)].re)
        })
        .unwrap();
        assert_abs_diff_eq!(value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mixing_and_tensoring_ensembles() {
        let a = random_state(2, 2, 3);
        let b = random_state(2, 1, 4);
        let ea = spectral_ensemble(&a).unwrap();
        let eb = spectral_ensemble(&b).unwrap();
        let mixed = Ensemble::mix(&ea, &eb, 0.3).unwrap();
        assert!(mixed.barycenter_residue() <= TAU_BARY);
        let doubled = ea.tensor(&ea).unwrap();
        assert_eq!(doubled.len(), ea.len() * ea.len());
        assert!(doubled.barycenter_residue() <= TAU_BARY);
    }

    #[test]
    fn ensemble_rejects_wrong_barycenter() {
        let zero = PureState::basis(2, 0).unwrap().projector();
        let half = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(Ensemble::new(half, vec![(1.0, zero)]), Err(Error::Consistency(_))));
    }

    #[test]
    fn zero_weight_items_are_pruned() {
        let zero = PureState::basis(2, 0).unwrap().projector();
        let one = PureState::basis(2, 1).unwrap().projector();
        let e = Ensemble::new(zero.clone(), vec![(1.0, zero), (0.0, one)]).unwrap();
        assert_eq!(e.len(), 1);
    }

    #[test]
    fn isometry_for_ensemble_round_trips() {
        let w = random_state(4, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = IsometryParams::random(5, 3, &mut rng).unwrap();
        let e = decompose(&w, &p).unwrap();
        let q = isometry_for_ensemble(&w, &e).unwrap();
        let e2 = decompose(&w, &q).unwrap();
        assert_eq!(e.len(), e2.len());
        for (a, b) in e.items().iter().zip(e2.items()) {
            assert_abs_diff_eq!(a.weight, b.weight, epsilon = 1e-10);
            assert!(trace_distance(&a.state, &b.state).unwrap() < 1e-8);
        }
    }
}
