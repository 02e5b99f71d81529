//! Coefficients of quantum correlations.
//!
//! A decomposition `ω = Σ λ_i ϱ_i` induces the classical model
//! `Σ λ_i (r₁ϱ_i)(a) (r₂ϱ_i)(b)` of the correlation `ω(a ⊗ b)`. The degree of
//! quantum correlations ([`cqc_degree`]) is the smallest deviation between
//! the two over decompositions of `ω`. [`wdqc`] and [`udqc`] measure the
//! same gap against c-dependent states: mixtures of products of local states
//! supported inside the ranges of `ω`'s marginals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::ensembles::{DecompositionObjective, Ensemble};
use crate::eof::search_decompositions;
use crate::error::{Error, Result};
use crate::optimize::{multi_start, OptimizerConfig};
use crate::qcore::{
    expect, hermitian_eigen, kron, restrict, trace_distance, BipartiteLayout, CMatrix, DensityMatrix, Factor,
    Observable, PureState, C64, EPS_RANK, MAX_JOINT_DIM, TAU_TRACE,
};

/// Default number of items of a c-dependent ensemble.
pub const K_CC: usize = 16;
/// Largest allowed `‖(1 - P) σ (1 - P)‖` for a local state `σ` and support projector `P`.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Slack of the enforced ordering `lower_bound ≤ upper_bound`.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductItem {
    pub weight: f64,
    pub left: DensityMatrix,
    pub right: DensityMatrix,
}

/// Weighted pairs of marginals, one pair per item of a decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductEnsemble {
    layout: BipartiteLayout,
    items: Vec<ProductItem>,
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    let mut any = false;
    for w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::Usage(format!("invalid weight {w}")));
        }
        total += w;
        any = true;
    }
    if !any {
        return Err(Error::Usage("ensemble has no items".into()));
    }
    if (total - 1.0).abs() > TAU_TRACE {
        return Err(Error::BadTrace(total));
    }
    Ok(())
}

impl ProductEnsemble {
    pub fn new(layout: BipartiteLayout, items: Vec<ProductItem>) -> Result<Self> {
        check_weights(items.iter().map(|it| it.weight))?;
        for it in &items {
            if it.left.dim() != layout.d1() || it.right.dim() != layout.d2() {
                return Err(Error::Layout(format!(
                    "item of dimensions {}x{} in a {}x{} layout",
                    it.left.dim(),
                    it.right.dim(),
                    layout.d1(),
                    layout.d2()
                )));
            }
        }
        Ok(Self { layout, items })
    }

    pub fn layout(&self) -> BipartiteLayout {
        self.layout
    }

    pub fn items(&self) -> &[ProductItem] {
        &self.items
    }

    /// `(Σ λ_i left_i, Σ λ_i right_i)`.
    pub fn marginals(&self) -> (DensityMatrix, DensityMatrix) {
        let left = self.items.iter().map(|it| it.left.matrix() * C64::from(it.weight)).sum();
        let right = self.items.iter().map(|it| it.right.matrix() * C64::from(it.weight)).sum();
        (DensityMatrix::from_raw(left), DensityMatrix::from_raw(right))
    }

    /// `Σ λ_i left_i ⊗ right_i`.
    pub fn barycenter(&self) -> Result<DensityMatrix> {
        let n = self.layout.joint();
        let mut acc = CMatrix::zeros(n, n);
        for it in &self.items {
            acc += kron(it.left.matrix(), it.right.matrix())? * C64::from(it.weight);
        }
        Ok(DensityMatrix::from_raw(acc))
    }

    pub fn to_c_dependent(&self, support_projectors: Vec<CMatrix>) -> Result<CDependentEnsemble> {
        let items = self
            .items
            .iter()
            .map(|it| CDependentItem { weight: it.weight, locals: vec![it.left.clone(), it.right.clone()] })
            .collect();
        CDependentEnsemble::new(vec![self.layout.d1(), self.layout.d2()], items, support_projectors)
    }
}

/// Pairs each item of `e` with its two marginals, keeping the weights.
pub fn boxtimes(e: &Ensemble, layout: BipartiteLayout) -> Result<ProductEnsemble> {
    layout.check(e.barycenter().dim())?;
    let items = e
        .items()
        .iter()
        .map(|it| {
            Ok(ProductItem {
                weight: it.weight,
                left: restrict(&it.state, layout, Factor::One)?,
                right: restrict(&it.state, layout, Factor::Two)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ProductEnsemble::new(layout, items)
}

/// `Σ λ_i ⟨a⟩_{left_i} ⟨b⟩_{right_i}`.
pub fn classical_value(pe: &ProductEnsemble, a: &Observable, b: &Observable) -> Result<f64> {
    let mut acc = 0.0;
    for it in &pe.items {
        acc += it.weight * expect(&it.left, a)? * expect(&it.right, b)?;
    }
    Ok(acc)
}

/// `a ⊗ b` as an observable.
pub fn pair_observable(a: &Observable, b: &Observable) -> Result<Observable> {
    Observable::new(kron(a.matrix(), b.matrix())?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CqcPath {
    /// Closed form for pure states, decomposition search otherwise.
    #[default]
    Auto,
    /// Always run the decomposition search.
    Optimize,
}

#[derive(Clone, Debug)]
pub struct CqcResult {
    /// Upper bound on the degree of quantum correlations (exact for pure states).
    pub value: f64,
    pub witness_ensemble: Ensemble,
    pub converged: bool,
    pub pure_branch: bool,
}

fn quadratic_form(m: &CMatrix, psi: &[C64]) -> f64 {
    let n = psi.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..n {
            row += m[(i, j)] * psi[j];
        }
        acc += (psi[i].conj() * row).re;
    }
    acc
}

struct CorrelationGap {
    target: f64,
    a_full: CMatrix,
    b_full: CMatrix,
}

impl DecompositionObjective for CorrelationGap {
    fn item(&self, psi: &[C64], weight: f64) -> f64 {
        quadratic_form(&self.a_full, psi) * quadratic_form(&self.b_full, psi) / weight
    }

    fn finish(&self, accumulated: f64) -> f64 {
        (self.target - accumulated).abs()
    }
}

fn check_pair(w: &DensityMatrix, a: &Observable, b: &Observable, layout: BipartiteLayout) -> Result<()> {
    layout.check(w.dim())?;
    if a.dim() != layout.d1() || b.dim() != layout.d2() {
        return Err(Error::Dimension(format!(
            "observables of dimensions {} and {} on a {}x{} layout",
            a.dim(),
            b.dim(),
            layout.d1(),
            layout.d2()
        )));
    }
    Ok(())
}

/// Degree of quantum correlations of `w` on `a ⊗ b`.
pub fn cqc_degree(
    w: &DensityMatrix,
    a: &Observable,
    b: &Observable,
    layout: BipartiteLayout,
    cfg: &OptimizerConfig,
) -> Result<CqcResult> {
    cqc_degree_with(w, a, b, layout, cfg, CqcPath::Auto)
}

pub fn cqc_degree_with(
    w: &DensityMatrix,
    a: &Observable,
    b: &Observable,
    layout: BipartiteLayout,
    cfg: &OptimizerConfig,
    path: CqcPath,
) -> Result<CqcResult> {
    check_pair(w, a, b, layout)?;
    cfg.validate()?;
    let target = expect(w, &pair_observable(a, b)?)?;
    if path == CqcPath::Auto && w.rank()? == 1 {
        let (_, vectors) = w.eigen()?;
        let psi = PureState::normalized(vectors.column(0).into_owned())?;
        let r1 = restrict(w, layout, Factor::One)?;
        let r2 = restrict(w, layout, Factor::Two)?;
        let value = (target - expect(&r1, a)? * expect(&r2, b)?).abs();
        let witness_ensemble = Ensemble::new(w.clone(), vec![(1.0, psi.projector())])?;
        return Ok(CqcResult { value, witness_ensemble, converged: true, pure_branch: true });
    }
    let objective = CorrelationGap {
        target,
        a_full: kron(a.matrix(), &CMatrix::identity(layout.d2(), layout.d2()))?,
        b_full: kron(&CMatrix::identity(layout.d1(), layout.d1()), b.matrix())?,
    };
    let found = search_decompositions(w, cfg, &objective, &[])?;
    let value = (target - classical_value(&boxtimes(&found.ensemble, layout)?, a, b)?).abs();
    Ok(CqcResult { value, witness_ensemble: found.ensemble, converged: found.converged, pure_branch: false })
}

/// Marginal of factor `k` (0-based) of a state on factors of dimensions `dims`.
pub fn restrict_multi(w: &DensityMatrix, dims: &[usize], k: usize) -> Result<DensityMatrix> {
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    if dims.is_empty() || dims.contains(&0) || total != Some(w.dim()) {
        return Err(Error::Dimension(format!("factors {dims:?} do not multiply to {}", w.dim())));
    }
    if k >= dims.len() {
        return Err(Error::Usage(format!("factor {k} out of range for {} factors", dims.len())));
    }
    let left: usize = dims[..k].iter().product();
    let mid = dims[k];
    let right: usize = dims[k + 1..].iter().product();
    let m = w.matrix();
    let reduced = CMatrix::from_fn(mid, mid, |a, b| {
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..left {
            for r in 0..right {
                acc += m[((l * mid + a) * right + r, (l * mid + b) * right + r)];
            }
        }
        acc
    });
    Ok(DensityMatrix::from_raw(reduced))
}

/// Orthonormal basis of the range of `rho` (columns), eigenvalues above `EPS_RANK`.
pub fn range_basis(rho: &DensityMatrix) -> Result<CMatrix> {
    let (values, vectors) = rho.eigen()?;
    let s = values.iter().filter(|&&l| l > EPS_RANK).count().max(1);
    Ok(vectors.columns(0, s).into_owned())
}

/// Projector onto the range of `rho`.
pub fn support_projector(rho: &DensityMatrix) -> Result<CMatrix> {
    let u = range_basis(rho)?;
    Ok(&u * u.adjoint())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CDependentItem {
    pub weight: f64,
    /// One local state per factor.
    pub locals: Vec<DensityMatrix>,
}

/// Mixture of product states whose local states live inside given supports.
#[derive(Clone, Debug, PartialEq)]
pub struct CDependentEnsemble {
    dims: Vec<usize>,
    items: Vec<CDependentItem>,
    support_projectors: Vec<CMatrix>,
}

impl CDependentEnsemble {
    pub fn new(dims: Vec<usize>, items: Vec<CDependentItem>, support_projectors: Vec<CMatrix>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Usage("a c-dependent ensemble needs at least two factors".into()));
        }
        if support_projectors.len() != dims.len() {
            return Err(Error::Usage(format!("{} support projectors for {} factors", support_projectors.len(), dims.len())));
        }
        check_weights(items.iter().map(|it| it.weight))?;
        for (k, (p, &d)) in support_projectors.iter().zip(&dims).enumerate() {
            if p.nrows() != d || p.ncols() != d {
                return Err(Error::Dimension(format!("support projector {k} is not {d}x{d}")));
            }
        }
        for it in &items {
            if it.locals.len() != dims.len() {
                return Err(Error::Usage(format!("item with {} locals for {} factors", it.locals.len(), dims.len())));
            }
            for (k, (sigma, p)) in it.locals.iter().zip(&support_projectors).enumerate() {
                if sigma.dim() != dims[k] {
                    return Err(Error::Dimension(format!("local {k} has dimension {}, expected {}", sigma.dim(), dims[k])));
                }
                let q = CMatrix::identity(dims[k], dims[k]) - p;
                let leak = hermitian_eigen(&(&q * sigma.matrix() * &q))?.0[0];
                if leak > SUPPORT_TOL {
                    return Err(Error::Consistency(format!("local state {k} leaks {leak:e} outside its support")));
                }
            }
        }
        Ok(Self { dims, items, support_projectors })
    }

    /// Uses the ranges of `w`'s marginals as supports.
    pub fn for_state(w: &DensityMatrix, dims: Vec<usize>, items: Vec<CDependentItem>) -> Result<Self> {
        let projectors = marginal_supports(w, &dims)?;
        Self::new(dims, items, projectors)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn items(&self) -> &[CDependentItem] {
        &self.items
    }

    pub fn support_projectors(&self) -> &[CMatrix] {
        &self.support_projectors
    }

    /// `Σ λ_i ⊗_k σ_ik`.
    pub fn barycenter(&self) -> Result<DensityMatrix> {
        let n: usize = self.dims.iter().product();
        if n > MAX_JOINT_DIM {
            return Err(Error::TooLarge { dim: n, max: MAX_JOINT_DIM });
        }
        let mut acc = CMatrix::zeros(n, n);
        for it in &self.items {
            let mut prod = CMatrix::identity(1, 1);
            for sigma in &it.locals {
                prod = kron(&prod, sigma.matrix())?;
            }
            acc += prod * C64::from(it.weight);
        }
        Ok(DensityMatrix::from_raw(acc))
    }

    /// `Σ λ_i Π_k ⟨a_k⟩_{σ_ik}` over the listed `(factor, observable)` pairs.
    pub fn classical_value(&self, observables: &[(usize, Observable)]) -> Result<f64> {
        let mut acc = 0.0;
        for it in &self.items {
            let mut prod = it.weight;
            for (k, a) in observables {
                let sigma = it.locals.get(*k).ok_or_else(|| Error::Usage(format!("no factor {k}")))?;
                prod *= expect(sigma, a)?;
            }
            acc += prod;
        }
        Ok(acc)
    }
}

fn marginal_supports(w: &DensityMatrix, dims: &[usize]) -> Result<Vec<CMatrix>> {
    (0..dims.len()).map(|k| support_projector(&restrict_multi(w, dims, k)?)).collect()
}

/// Coordinates of c-dependent ensembles with `items` items.
///
/// Item `i` is stored as `[x_i, G_i1, G_i2, ...]`: weight `x_i² / Σ x_j²` and one
/// complex `s_k × s_k` block (column-major, interleaved) per parametrized factor,
/// giving the local state `U_k G G† U_k† / Tr(G G†)` with `U_k` the range basis.
struct HullChart {
    ranges: Vec<CMatrix>,
    /// Row-major copies of `ranges`.
    flat_ranges: Vec<Vec<C64>>,
    /// Offset of each factor block inside an item.
    offsets: Vec<usize>,
    item_len: usize,
    items: usize,
}

impl HullChart {
    fn new(ranges: Vec<CMatrix>, items: usize) -> Self {
        let mut offsets = Vec::with_capacity(ranges.len());
        let mut item_len = 1;
        for u in &ranges {
            offsets.push(item_len);
            item_len += 2 * u.ncols() * u.ncols();
        }
        let flat_ranges = ranges
            .iter()
            .map(|u| (0..u.nrows()).flat_map(|i| (0..u.ncols()).map(move |j| u[(i, j)])).collect())
            .collect();
        Self { ranges, flat_ranges, offsets, item_len, items }
    }

    fn param_len(&self) -> usize {
        self.items * self.item_len
    }

    /// `Σ x_i²`, or `None` when every weight vanishes.
    fn weight_total(&self, x: &[f64]) -> Option<f64> {
        let total: f64 = (0..self.items).map(|i| x[i * self.item_len].powi(2)).sum();
        (total > 1e-300 && total.is_finite()).then_some(total)
    }

    fn weights(&self, x: &[f64]) -> Option<Vec<f64>> {
        let total = self.weight_total(x)?;
        Some((0..self.items).map(|i| x[i * self.item_len].powi(2) / total).collect())
    }

    fn block<'a>(&self, x: &'a [f64], item: usize, f: usize) -> &'a [f64] {
        let s = self.ranges[f].ncols();
        let start = item * self.item_len + self.offsets[f];
        &x[start..start + 2 * s * s]
    }

    /// Writes the normalized local state, row-major, into `out`; `m` is scratch.
    /// Returns `false` when the block is zero.
    fn local_into(&self, x: &[f64], item: usize, f: usize, m: &mut Vec<C64>, out: &mut [C64]) -> bool {
        let (d, s) = (self.ranges[f].nrows(), self.ranges[f].ncols());
        let u = &self.flat_ranges[f];
        let g = self.block(x, item, f);
        m.clear();
        m.resize(d * s, C64::new(0.0, 0.0));
        for a in 0..d {
            for c in 0..s {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..s {
                    acc += u[a * s + b] * C64::new(g[2 * (c * s + b)], g[2 * (c * s + b) + 1]);
                }
                m[a * s + c] = acc;
            }
        }
        let tr: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        if !(tr > 1e-300 && tr.is_finite()) {
            return false;
        }
        for a in 0..d {
            for a2 in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..s {
                    acc += m[a * s + c] * m[a2 * s + c].conj();
                }
                out[a * d + a2] = acc / tr;
            }
        }
        true
    }

    /// Normalized local state; `None` when the block is zero.
    fn local(&self, x: &[f64], item: usize, f: usize) -> Option<CMatrix> {
        let d = self.ranges[f].nrows();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        self.local_into(x, item, f, &mut Vec::new(), &mut out)
            .then(|| CMatrix::from_row_slice(d, d, &out))
    }

    /// `⟨a⟩` of the local state with `a` already compressed to `U† a U`.
    fn local_expectation(&self, x: &[f64], item: usize, f: usize, compressed: &CMatrix) -> Option<f64> {
        let s = self.ranges[f].ncols();
        let g = self.block(x, item, f);
        let entry = |c: usize, i: usize| C64::new(g[2 * (c * s + i)], g[2 * (c * s + i) + 1]);
        let (mut num, mut den) = (0.0, 0.0);
        for c in 0..s {
            for i in 0..s {
                let gi = entry(c, i);
                den += gi.norm_sqr();
                let mut row = C64::new(0.0, 0.0);
                for j in 0..s {
                    row += compressed[(i, j)] * entry(c, j);
                }
                num += (gi.conj() * row).re;
            }
        }
        (den > 1e-300 && den.is_finite()).then(|| num / den)
    }

    /// Every item equal to the product of the marginals `rho_k`, equal weights.
    fn marginal_start(&self, marginals: &[DensityMatrix]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.param_len());
        for _ in 0..self.items {
            x.push(1.0);
            for (f, rho) in marginals.iter().enumerate() {
                let u = &self.ranges[f];
                let s = u.ncols();
                // `U† ρ U` is diagonal in the eigenbasis, so `G = diag(√λ)`.
                let inner = u.adjoint() * rho.matrix() * u;
                for j in 0..s {
                    for i in 0..s {
                        let v = if i == j { inner[(i, i)].re.max(0.0).sqrt() } else { 0.0 };
                        x.push(v);
                        x.push(0.0);
                    }
                }
            }
        }
        x
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.param_len()).map(|_| StandardNormal.sample(rng)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct WdqcResult {
    /// Upper bound on the weak degree of quantum correlation.
    pub value: f64,
    /// `ω(⊗ a_k)`.
    pub quantum_value: f64,
    pub witness: CDependentEnsemble,
    pub converged: bool,
}

/// Full operator `⊗ a_k` with identities on factors that are not listed.
pub fn embed_observables(dims: &[usize], observables: &[(usize, Observable)]) -> Result<Observable> {
    let mut m = CMatrix::identity(1, 1);
    for (k, &d) in dims.iter().enumerate() {
        let local = match observables.iter().find(|(f, _)| *f == k) {
            Some((_, a)) => a.matrix().clone(),
            None => CMatrix::identity(d, d),
        };
        m = kron(&m, &local)?;
    }
    Observable::new(m)
}

fn check_assignment(w: &DensityMatrix, dims: &[usize], observables: &[(usize, Observable)]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Usage("need at least two factors".into()));
    }
    if dims.iter().product::<usize>() != w.dim() {
        return Err(Error::Dimension(format!("factors {dims:?} do not multiply to {}", w.dim())));
    }
    if observables.is_empty() {
        return Err(Error::Usage("no observables given".into()));
    }
    for (i, (k, a)) in observables.iter().enumerate() {
        if *k >= dims.len() {
            return Err(Error::Usage(format!("factor {k} out of range for {} factors", dims.len())));
        }
        if observables[..i].iter().any(|(j, _)| j == k) {
            return Err(Error::Usage(format!("factor {k} is assigned more than one observable")));
        }
        if a.dim() != dims[*k] {
            return Err(Error::Dimension(format!("observable of dimension {} on factor {k} of dimension {}", a.dim(), dims[*k])));
        }
    }
    Ok(())
}

/// Weak degree of quantum correlation of `w` on the listed `(factor, observable)` pairs.
pub fn wdqc(w: &DensityMatrix, dims: &[usize], observables: &[(usize, Observable)], cfg: &OptimizerConfig) -> Result<WdqcResult> {
    check_assignment(w, dims, observables)?;
    cfg.validate()?;
    let quantum_value = expect(w, &embed_observables(dims, observables)?)?;
    let marginals: Vec<DensityMatrix> = (0..dims.len()).map(|k| restrict_multi(w, dims, k)).collect::<Result<_>>()?;
    // Only factors carrying an observable need coordinates.
    let listed: Vec<usize> = observables.iter().map(|(k, _)| *k).collect();
    let ranges: Vec<CMatrix> = listed.iter().map(|&k| range_basis(&marginals[k])).collect::<Result<_>>()?;
    let compressed: Vec<CMatrix> =
        observables.iter().zip(&ranges).map(|((_, a), u)| u.adjoint() * a.matrix() * u).collect();
    let chart = HullChart::new(ranges, cfg.ensemble_size.unwrap_or(K_CC));
    let listed_marginals: Vec<DensityMatrix> = listed.iter().map(|&k| marginals[k].clone()).collect();

    let start = |index: usize, rng: &mut ChaCha8Rng| {
        if index == 0 {
            chart.marginal_start(&listed_marginals)
        } else {
            chart.random_start(rng)
        }
    };
    let make = || {
        let chart = &chart;
        let compressed = &compressed;
        move |x: &[f64]| {
            let Some(total) = chart.weight_total(x) else { return f64::INFINITY };
            let mut acc = 0.0;
            for i in 0..chart.items {
                let mut prod = x[i * chart.item_len].powi(2) / total;
                for (f, a) in compressed.iter().enumerate() {
                    match chart.local_expectation(x, i, f, a) {
                        Some(e) => prod *= e,
                        None => return f64::INFINITY,
                    }
                }
                acc += prod;
            }
            (quantum_value - acc).abs()
        }
    };
    let outcome = multi_start(cfg.restarts, cfg.seed, &cfg.search_options(), start, make);
    let x = &outcome.best.params;
    let weights = chart.weights(x).ok_or_else(|| Error::Numerical("optimum has zero total weight".into()))?;
    let mut items = Vec::new();
    for (i, &weight) in weights.iter().enumerate() {
        let mut locals = marginals.clone();
        for (f, &k) in listed.iter().enumerate() {
            let sigma = chart.local(x, i, f).ok_or_else(|| Error::Numerical("optimum has a zero local block".into()))?;
            locals[k] = DensityMatrix::from_raw(sigma);
        }
        items.push(CDependentItem { weight, locals });
    }
    let witness = CDependentEnsemble::for_state(w, dims.to_vec(), items)?;
    let value = (quantum_value - witness.classical_value(observables)?).abs();
    Ok(WdqcResult { value, quantum_value, witness, converged: outcome.best.converged })
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessBound {
    pub label: String,
    /// `⟨W⟩_ω`.
    pub expectation: f64,
    /// Largest `⟨W⟩` over pure product states.
    pub max_sep: f64,
    /// Half the spectral spread of `W`, `(λ_max - λ_min) / 2`.
    pub scale: f64,
    /// `(⟨W⟩_ω - max_sep) / scale`, a lower bound on the trace-norm distance to separable states.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct UdqcResult {
    pub upper_bound: f64,
    pub lower_bound: f64,
    /// The c-dependent state achieving `upper_bound`.
    pub nearest: CDependentEnsemble,
    pub witnesses: Vec<WitnessBound>,
    pub converged: bool,
}

const WITNESS_RANDOM: usize = 8;
const SEP_STARTS: usize = 8;
const SEP_SWEEPS: usize = 500;
/// Stream offset separating witness draws from optimizer restarts.
const WITNESS_STREAM: u64 = 1 << 32;

/// Top eigenpair of a hermitian matrix.
fn top_eigen(m: &CMatrix) -> Result<(f64, Vec<C64>)> {
    let (values, vectors) = hermitian_eigen(m)?;
    Ok((values[0], vectors.column(0).iter().copied().collect()))
}

/// `⟨a b| W |a b⟩` maximized by alternating between the two sides.
fn alternate_from(w: &CMatrix, layout: BipartiteLayout, mut a: Vec<C64>) -> Result<f64> {
    let (d1, d2) = (layout.d1(), layout.d2());
    let mut best = f64::NEG_INFINITY;
    for _ in 0..SEP_SWEEPS {
        // Effective operator on side two for fixed `a`, then on side one for fixed `b`.
        let mb = CMatrix::from_fn(d2, d2, |j, l| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d1 {
                for k in 0..d1 {
                    acc += a[i].conj() * w[(i * d2 + j, k * d2 + l)] * a[k];
                }
            }
            acc
        });
        let (_, b) = top_eigen(&crate::qcore::hermitian_part(&mb))?;
        let ma = CMatrix::from_fn(d1, d1, |i, k| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..d2 {
                for l in 0..d2 {
                    acc += b[j].conj() * w[(i * d2 + j, k * d2 + l)] * b[l];
                }
            }
            acc
        });
        let (value, next) = top_eigen(&crate::qcore::hermitian_part(&ma))?;
        a = next;
        if value <= best + 1e-15 {
            best = best.max(value);
            break;
        }
        best = value;
    }
    Ok(best)
}

/// Largest expectation of `witness` over pure product states, by seeded
/// alternating maximization from basis and random starts.
pub fn max_sep(witness: &Observable, layout: BipartiteLayout, seed: u64) -> Result<f64> {
    layout.check(witness.dim())?;
    let d1 = layout.d1();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WITNESS_STREAM + 1);
    let mut best = f64::NEG_INFINITY;
    let mut starts: Vec<Vec<C64>> = (0..d1)
        .map(|i| (0..d1).map(|k| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    for _ in 0..SEP_STARTS {
        starts.push((0..d1).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect());
    }
    for a in starts {
        let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let a = a.into_iter().map(|z| z / norm).collect();
        best = best.max(alternate_from(witness.matrix(), layout, a)?);
    }
    Ok(best)
}

/// Grid oracle for [`max_sep`] on two qubits: Bloch angles on an
/// `steps × 2·steps` grid per qubit.
pub fn max_sep_grid(witness: &Observable, steps: usize) -> Result<f64> {
    if witness.dim() != 4 || steps == 0 {
        return Err(Error::Scope("grid oracle is defined for two-qubit witnesses".into()));
    }
    let pi = std::f64::consts::PI;
    let mut points = Vec::new();
    for t in 0..=steps {
        for p in 0..2 * steps {
            let (th, ph) = (pi * t as f64 / steps as f64, pi * p as f64 / steps as f64);
            points.push([C64::new((th / 2.0).cos(), 0.0), C64::from_polar((th / 2.0).sin(), ph)]);
        }
    }
    let mut best = f64::NEG_INFINITY;
    for a in &points {
        for b in &points {
            let v = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
            best = best.max(quadratic_form(witness.matrix(), &v));
        }
    }
    Ok(best)
}

/// Maximally entangled projectors plus seeded random entangled pure-state projectors.
pub fn witness_family(layout: BipartiteLayout, seed: u64) -> Result<Vec<(String, Observable)>> {
    let (d1, d2) = (layout.d1(), layout.d2());
    let mut family = Vec::new();
    if layout == BipartiteLayout::qubits() {
        for (i, name) in ["phi+", "phi-", "psi+", "psi-"].iter().enumerate() {
            family.push((name.to_string(), crate::states::bell(i as u8)?.projector()));
        }
    } else {
        let m = d1.min(d2);
        let mut amps = vec![0.0; d1 * d2];
        for i in 0..m {
            amps[i * d2 + i] = 1.0;
        }
        family.push(("max-entangled".to_string(), PureState::from_real(&amps)?.projector()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WITNESS_STREAM);
    for i in 0..WITNESS_RANDOM {
        let psi = crate::states::random_pure(d1 * d2, &mut rng)?;
        family.push((format!("random-{i}"), psi.projector()));
    }
    family.into_iter().map(|(label, p)| Ok((label, Observable::new(p.into_matrix())?))).collect()
}

pub fn witness_bound(w: &DensityMatrix, label: &str, witness: &Observable, layout: BipartiteLayout, seed: u64) -> Result<WitnessBound> {
    let expectation = expect(w, witness)?;
    let max_sep = max_sep(witness, layout, seed)?;
    let (hi, lo) = witness.spectral_range()?;
    let scale = 0.5 * (hi - lo);
    let gap = if scale > 0.0 { (expectation - max_sep) / scale } else { 0.0 };
    Ok(WitnessBound { label: label.to_string(), expectation, max_sep, scale, gap })
}

/// Uniform degree of quantum correlation: trace-norm distance from `w` to
/// c-dependent states, bracketed from above by a search and from below by witnesses.
pub fn udqc(w: &DensityMatrix, layout: BipartiteLayout, cfg: &OptimizerConfig) -> Result<UdqcResult> {
    layout.check(w.dim())?;
    cfg.validate()?;
    let dims = vec![layout.d1(), layout.d2()];
    let marginals = vec![restrict(w, layout, Factor::One)?, restrict(w, layout, Factor::Two)?];
    let ranges: Vec<CMatrix> = marginals.iter().map(range_basis).collect::<Result<_>>()?;
    let chart = HullChart::new(ranges, cfg.ensemble_size.unwrap_or(K_CC));

    // Hilbert-Schmidt distance as the search surrogate; the reported bound is the
    // exact trace-norm distance of the state it finds.
    let start = |index: usize, rng: &mut ChaCha8Rng| {
        if index == 0 {
            chart.marginal_start(&marginals)
        } else {
            chart.random_start(rng)
        }
    };
    let (d1, d2) = (layout.d1(), layout.d2());
    let n = d1 * d2;
    let target: Vec<C64> = (0..n).flat_map(|i| (0..n).map(move |j| w.matrix()[(i, j)])).collect();
    let make = || {
        let chart = &chart;
        let target = &target;
        let (mut m, mut left, mut right) = (Vec::new(), vec![C64::new(0.0, 0.0); d1 * d1], vec![C64::new(0.0, 0.0); d2 * d2]);
        let mut diff = vec![C64::new(0.0, 0.0); n * n];
        move |x: &[f64]| {
            let Some(total) = chart.weight_total(x) else { return f64::INFINITY };
            diff.copy_from_slice(target);
            for i in 0..chart.items {
                let lambda = x[i * chart.item_len].powi(2) / total;
                if !chart.local_into(x, i, 0, &mut m, &mut left) || !chart.local_into(x, i, 1, &mut m, &mut right) {
                    return f64::INFINITY;
                }
                for i1 in 0..d1 {
                    for k1 in 0..d1 {
                        let c = left[i1 * d1 + k1] * lambda;
                        for j in 0..d2 {
                            let row = (i1 * d2 + j) * n + k1 * d2;
                            for l in 0..d2 {
                                diff[row + l] -= c * right[j * d2 + l];
                            }
                        }
                    }
                }
            }
            diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        }
    };
    let outcome = multi_start(cfg.restarts, cfg.seed, &cfg.search_options(), start, make);
    let x = &outcome.best.params;
    let weights = chart.weights(x).ok_or_else(|| Error::Numerical("optimum has zero total weight".into()))?;
    let mut items = Vec::new();
    for (i, &weight) in weights.iter().enumerate() {
        let locals = (0..2)
            .map(|f| chart.local(x, i, f).map(DensityMatrix::from_raw))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Numerical("optimum has a zero local block".into()))?;
        items.push(CDependentItem { weight, locals });
    }
    let nearest = CDependentEnsemble::for_state(w, dims, items)?;
    let upper_bound = trace_distance(w, &nearest.barycenter()?)?;

    let witnesses = witness_family(layout, cfg.seed)?
        .iter()
        .map(|(label, wit)| witness_bound(w, label, wit, layout, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let lower_bound = witnesses.iter().map(|b| b.gap).fold(0.0, f64::max);
    if lower_bound > upper_bound + BOUND_SLACK {
        return Err(Error::Consistency(format!(
            "witness lower bound {lower_bound} exceeds the upper bound {upper_bound}"
        )));
    }
    Ok(UdqcResult { upper_bound, lower_bound, nearest, witnesses, converged: outcome.best.converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::spectral_ensemble;
    use crate::qcore::tensor;
    use crate::states::{bell, classical_mixture, ghz, random_mixed, random_product, singlet, Pauli};

    fn z() -> Observable {
        Pauli::Z.observable()
    }

    fn quick() -> OptimizerConfig {
        OptimizerConfig { restarts: 4, ..OptimizerConfig::with_seed(3) }
    }

    #[test]
    fn boxtimes_examples() {
        let layout = BipartiteLayout::qubits();
        let r1 = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let r2 = PureState::from_real(&[1.0, 1.0]).unwrap().projector();
        let prod = tensor(&r1, &r2).unwrap();
        let pe = boxtimes(&Ensemble::new(prod.clone(), vec![(1.0, prod)]).unwrap(), layout).unwrap();
        assert!((pe.items()[0].left.matrix() - r1.matrix()).norm() < 1e-14);
        assert!((pe.items()[0].right.matrix() - r2.matrix()).norm() < 1e-14);

        let phi = bell(0).unwrap().projector();
        let pe = boxtimes(&Ensemble::new(phi.clone(), vec![(1.0, phi)]).unwrap(), layout).unwrap();
        let half = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((pe.items()[0].left.matrix() - half.matrix()).norm() < 1e-14);

        let cm = classical_mixture(&[0.5, 0.5]).unwrap();
        let pe = boxtimes(&spectral_ensemble(&cm).unwrap(), layout).unwrap();
        assert_eq!(pe.items().len(), 2);
        for it in pe.items() {
            assert!((it.weight - 0.5).abs() < 1e-12);
            assert!((it.left.matrix() - it.right.matrix()).norm() < 1e-12);
            assert!(it.left.purity() > 1.0 - 1e-12);
        }
        assert!((classical_value(&pe, &z(), &z()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cqc_pure_and_classical_examples() {
        let layout = BipartiteLayout::qubits();
        let s = singlet().projector();
        let r = cqc_degree(&s, &z(), &z(), layout, &quick()).unwrap();
        assert!(r.pure_branch);
        assert!((r.value - 1.0).abs() < 1e-12);
        let forced = cqc_degree_with(&s, &z(), &z(), layout, &quick(), CqcPath::Optimize).unwrap();
        assert!(!forced.pure_branch);
        assert!((forced.value - 1.0).abs() < 1e-6);

        let cm = classical_mixture(&[0.5, 0.5]).unwrap();
        assert!((expect(&cm, &pair_observable(&z(), &z()).unwrap()).unwrap() - 1.0).abs() < 1e-12);
        let r = cqc_degree(&cm, &z(), &z(), layout, &quick()).unwrap();
        assert!(r.value <= 1e-6, "{}", r.value);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_product(2, 2, &mut rng).unwrap().projector();
        let x = Pauli::X.observable();
        assert!(cqc_degree(&p, &x, &z(), layout, &quick()).unwrap().value < 1e-12);
    }

    #[test]
    fn restrict_multi_examples() {
        let a = DensityMatrix::diagonal(&[0.9, 0.1]).unwrap();
        let b = random_mixed(3, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = DensityMatrix::maximally_mixed(2).unwrap();
        let abc = tensor(&tensor(&a, &b).unwrap(), &c).unwrap();
        let got = restrict_multi(&abc, &[2, 3, 2], 1).unwrap();
        assert!((got.matrix() - b.matrix()).norm() < 1e-12);

        let g = ghz(3).unwrap().projector();
        for k in 0..3 {
            let m = restrict_multi(&g, &[2, 2, 2], k).unwrap();
            assert!((m.matrix() - DensityMatrix::maximally_mixed(2).unwrap().matrix()).norm() < 1e-12);
        }

        // W state: index-summation oracle for the first qubit.
        let wst = PureState::from_real(&[0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap().projector();
        let m = restrict_multi(&wst, &[2, 2, 2], 0).unwrap();
        let mut oracle = [[0.0; 2]; 2];
        for (i, row) in oracle.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                for rest in 0..4 {
                    *cell += wst.matrix()[(i * 4 + rest, k * 4 + rest)].re;
                }
            }
        }
        assert!((oracle[0][0] - 2.0 / 3.0).abs() < 1e-12);
        for i in 0..2 {
            for k in 0..2 {
                assert!((m.matrix()[(i, k)].re - oracle[i][k]).abs() < 1e-12);
            }
        }
        assert!(restrict_multi(&wst, &[2, 3], 0).is_err());
    }

    #[test]
    fn c_dependent_support_is_enforced() {
        let w = tensor(&PureState::basis(2, 0).unwrap().projector(), &DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        let good = CDependentItem {
            weight: 1.0,
            locals: vec![PureState::basis(2, 0).unwrap().projector(), PureState::basis(2, 1).unwrap().projector()],
        };
        assert!(CDependentEnsemble::for_state(&w, vec![2, 2], vec![good]).is_ok());
        let bad = CDependentItem {
            weight: 1.0,
            locals: vec![PureState::basis(2, 1).unwrap().projector(), DensityMatrix::maximally_mixed(2).unwrap()],
        };
        assert!(matches!(CDependentEnsemble::for_state(&w, vec![2, 2], vec![bad]), Err(Error::Consistency(_))));
    }

    #[test]
    fn wdqc_examples() {
        let cfg = quick();
        let x = Pauli::X.observable();
        // Grid oracle: products of local x expectations in [-1, 1] reach the singlet's -1.
        let s = singlet().projector();
        let r = wdqc(&s, &[2, 2], &[(0, x.clone()), (1, x.clone())], &cfg).unwrap();
        assert!((r.quantum_value + 1.0).abs() < 1e-12);
        let grid_best = (0..=20)
            .flat_map(|i| (0..=20).map(move |j| (i as f64 / 10.0 - 1.0, j as f64 / 10.0 - 1.0)))
            .map(|(u, v)| (r.quantum_value - u * v).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(grid_best < 1e-12);
        assert!(r.value < 1e-6, "{}", r.value);

        // GHZ: brute force over deterministic local assignments.
        let g = ghz(3).unwrap().projector();
        let zs: Vec<(usize, Observable)> = (0..3).map(|k| (k, z())).collect();
        let r = wdqc(&g, &[2, 2, 2], &zs, &cfg).unwrap();
        let brute = (0..8)
            .map(|m: i32| (0..3).map(|b| if m >> b & 1 == 1 { -1.0 } else { 1.0 }).product::<f64>())
            .map(|v: f64| (r.quantum_value - v).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(r.value <= brute + 1e-6, "{} vs {brute}", r.value);

        assert!(matches!(wdqc(&s, &[2, 2], &[(0, z()), (0, x)], &cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn max_sep_of_bell_projector_matches_grid() {
        let layout = BipartiteLayout::qubits();
        let wit = Observable::new(bell(0).unwrap().projector().into_matrix()).unwrap();
        let alt = max_sep(&wit, layout, 1).unwrap();
        let grid = max_sep_grid(&wit, 24).unwrap();
        assert!((grid - 0.5).abs() < 1e-3);
        assert!((alt - 0.5).abs() < 1e-3);
        assert!(alt >= grid - 1e-9);
    }

    #[test]
    fn udqc_examples() {
        let layout = BipartiteLayout::qubits();
        let cfg = quick();
        let phi = bell(0).unwrap().projector();
        let r = udqc(&phi, layout, &cfg).unwrap();
        assert!(r.lower_bound >= 1.0 - 1e-6, "{}", r.lower_bound);
        assert!(r.lower_bound <= r.upper_bound + BOUND_SLACK);

        let mixed = DensityMatrix::maximally_mixed(4).unwrap();
        assert!(udqc(&mixed, layout, &cfg).unwrap().upper_bound <= 1e-6);
    }
}
