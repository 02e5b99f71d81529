//! Entanglement of formation.
//!
//! `E(ω)` is the smallest average marginal entropy over pure-state
//! decompositions of `ω`. For pure states it is the marginal entropy itself;
//! for mixed states [`eof_minimize`] searches decompositions with a seeded
//! multi-start pattern search and reports the best value found, which is an
//! upper bound on `E(ω)`. The two-qubit closed form ([`wootters_eof`]) and the
//! partial-transpose test ([`ppt_check`]) are independent of that search and
//! serve as oracles for it.

use serde::{Deserialize, Serialize};

use crate::ensembles::{
    decompose_with, ensemble_objective, isometry_for_ensemble, DecompositionObjective, Ensemble, EvalScratch,
    IsometryParams, Purification,
};
use crate::error::{Error, Result};
use crate::optimize::{multi_start, OptimizerConfig};
use crate::qcore::{
    eig2, entropy, hermitian_eigenvalues, restrict, tensor, trace_distance, BipartiteLayout,
    CMatrix, DensityMatrix, Factor, PureState, C64, EPS_RANK, TAU_PSD,
};

#[derive(Clone, Debug)]
pub struct EofResult {
    /// Upper bound on the entanglement of formation, in bits.
    pub value: f64,
    pub optimal_ensemble: Ensemble,
    pub restarts_used: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Binary entropy in bits.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(x) + term(1.0 - x)
}

/// Entropy of the first marginal of the pure state `ψ̃ / √weight`.
pub(crate) struct MarginalEntropy {
    layout: BipartiteLayout,
}

impl MarginalEntropy {
    pub(crate) fn new(layout: BipartiteLayout) -> Self {
        Self { layout }
    }

    /// `-Σ μ log μ + λ log λ` over eigenvalues `μ` of the unnormalized marginal.
    fn unnormalized_marginal_entropy(&self, psi: &[C64], weight: f64) -> f64 {
        let (d1, d2) = (self.layout.d1(), self.layout.d2());
        let plogp = |m: f64| if m > 0.0 { m * m.log2() } else { 0.0 };
        if d1 == 2 {
            let (top, bottom) = psi.split_at(d2);
            let a: f64 = top.iter().map(|z| z.norm_sqr()).sum();
            let d: f64 = bottom.iter().map(|z| z.norm_sqr()).sum();
            let b: C64 = top.iter().zip(bottom).map(|(x, y)| x * y.conj()).sum();
            let (_, l1) = eig2(a, d, b.norm_sqr());
            let x = (l1 / weight).clamp(0.0, 0.5);
            return weight * binary_entropy(x);
        }
        // Both marginals of a pure state share their spectrum; use the smaller one.
        let reduced = if d1 <= d2 {
            CMatrix::from_fn(d1, d1, |i, k| (0..d2).map(|j| psi[i * d2 + j] * psi[k * d2 + j].conj()).sum())
        } else {
            CMatrix::from_fn(d2, d2, |j, l| (0..d1).map(|i| psi[i * d2 + j] * psi[i * d2 + l].conj()).sum())
        };
        let spectrum_term: f64 = if reduced.nrows() == 2 {
            let (a, b) = eig2(reduced[(0, 0)].re, reduced[(1, 1)].re, reduced[(0, 1)].norm_sqr());
            plogp(a) + plogp(b)
        } else if reduced.nrows() == 1 {
            plogp(reduced[(0, 0)].re)
        } else {
            match hermitian_eigenvalues(&reduced) {
                Ok(ev) => ev.into_iter().map(plogp).sum(),
                Err(_) => return f64::INFINITY,
            }
        };
        (plogp(weight) - spectrum_term).max(0.0)
    }
}

impl DecompositionObjective for MarginalEntropy {
    fn item(&self, unnormalized: &[C64], weight: f64) -> f64 {
        self.unnormalized_marginal_entropy(unnormalized, weight)
    }
}

/// Exact entanglement of formation of a pure state.
pub fn eof_pure(psi: &PureState, layout: BipartiteLayout) -> Result<f64> {
    layout.check(psi.dim())?;
    entropy(&restrict(&psi.projector(), layout, Factor::One)?)
}

/// `S(r₁ ρ)` for a state that is pure up to rounding.
fn marginal_entropy(state: &DensityMatrix, layout: BipartiteLayout) -> Result<f64> {
    entropy(&restrict(state, layout, Factor::One)?)
}

pub(crate) struct DecompositionSearch {
    pub ensemble: Ensemble,
    pub restarts_used: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Minimizes an objective over pure-state decompositions of `w` with at most
/// `K` items. Leading restarts start from `seeds`; without seeds restart 0
/// starts from the spectral decomposition and the rest from Haar-random isometries.
pub(crate) fn search_decompositions<O: DecompositionObjective>(
    w: &DensityMatrix,
    cfg: &OptimizerConfig,
    objective: &O,
    seeds: &[IsometryParams],
) -> Result<DecompositionSearch> {
    cfg.validate()?;
    let pur = Purification::new(w)?;
    let r = pur.rank();
    let k = cfg.ensemble_size.unwrap_or(r * r);
    if k < r {
        return Err(Error::Usage(format!("ensemble size {k} is below the state rank {r}")));
    }
    for s in seeds {
        if s.source_rank() != r || s.ensemble_size() != k {
            return Err(Error::Usage(format!(
                "seed isometry {}x{} does not match search shape {k}x{r}",
                s.ensemble_size(),
                s.source_rank()
            )));
        }
    }
    let identity = IsometryParams::identity(k, r)?;
    let start = |index: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        if let Some(seed) = seeds.get(index) {
            seed.as_slice().to_vec()
        } else if seeds.is_empty() && index == 0 {
            identity.as_slice().to_vec()
        } else {
            IsometryParams::random(k, r, rng).expect("shape checked").as_slice().to_vec()
        }
    };
    let make = || {
        let mut scratch = EvalScratch::default();
        let pur = &pur;
        move |x: &[f64]| pur.evaluate(x, k, objective, &mut scratch)
    };
    let outcome = multi_start(cfg.restarts, cfg.seed, &cfg.search_options(), start, make);
    let params = IsometryParams::new(r, k, outcome.best.params)?;
    let ensemble = decompose_with(&pur, w, &params)?;
    Ok(DecompositionSearch {
        ensemble,
        restarts_used: outcome.restarts_used,
        converged: outcome.best.converged,
        residual: outcome.best.residual.max(0.0),
    })
}

fn pure_result(w: &DensityMatrix, layout: BipartiteLayout) -> Result<EofResult> {
    let (_, vectors) = w.eigen()?;
    let psi = PureState::normalized(vectors.column(0).into_owned())?;
    let value = eof_pure(&psi, layout)?;
    let ensemble = Ensemble::new(w.clone(), vec![(1.0, psi.projector())])?;
    Ok(EofResult { value, optimal_ensemble: ensemble, restarts_used: 0, converged: true, residual: 0.0 })
}

/// Variational upper bound on the entanglement of formation of `w`.
pub fn eof_minimize(w: &DensityMatrix, layout: BipartiteLayout, cfg: &OptimizerConfig) -> Result<EofResult> {
    eof_minimize_seeded(w, layout, cfg, &[])
}

/// [`eof_minimize`] with the leading restarts started from given pure-state ensembles of `w`.
pub fn eof_minimize_seeded(
    w: &DensityMatrix,
    layout: BipartiteLayout,
    cfg: &OptimizerConfig,
    seeds: &[Ensemble],
) -> Result<EofResult> {
    layout.check(w.dim())?;
    cfg.validate()?;
    if w.rank()? == 1 {
        return pure_result(w, layout);
    }
    let seeds = seeds.iter().map(|e| isometry_for_ensemble(w, e)).collect::<Result<Vec<_>>>()?;
    let objective = MarginalEntropy::new(layout);
    let found = search_decompositions(w, cfg, &objective, &seeds)?;
    let value = ensemble_objective(&found.ensemble, |s| marginal_entropy(s, layout))?.max(0.0);
    Ok(EofResult {
        value,
        optimal_ensemble: found.ensemble,
        restarts_used: found.restarts_used,
        converged: found.converged,
        residual: found.residual,
    })
}

fn sigma_y_pair() -> CMatrix {
    // σ_y ⊗ σ_y is real: anti-diagonal (-1, 1, 1, -1).
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 3)] = C64::new(-1.0, 0.0);
    m[(1, 2)] = C64::new(1.0, 0.0);
    m[(2, 1)] = C64::new(1.0, 0.0);
    m[(3, 0)] = C64::new(-1.0, 0.0);
    m
}

/// Two-qubit concurrence.
///
/// Uses the subnormalized eigenvectors `x_i = √λ_i v_i` of the support: the
/// singular values of `τ_ij = x_iᵀ (σ_y ⊗ σ_y) x_j` are the square roots of the
/// eigenvalues of `ρ ρ̃`, without square roots of rounding noise.
pub fn concurrence(w: &DensityMatrix) -> Result<f64> {
    if w.dim() != 4 {
        return Err(Error::Scope(format!("concurrence needs a two-qubit state, got dimension {}", w.dim())));
    }
    let (values, vectors) = w.eigen()?;
    let r = values.iter().filter(|&&l| l > EPS_RANK).count();
    let x = CMatrix::from_fn(4, r, |i, j| vectors[(i, j)] * values[j].sqrt());
    let tau = x.transpose() * sigma_y_pair() * &x;
    let mut mu: Vec<f64> = tau
        .try_svd(false, false, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?
        .singular_values
        .iter()
        .copied()
        .collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    mu.resize(4, 0.0);
    Ok((mu[0] - mu[1] - mu[2] - mu[3]).max(0.0))
}

/// Closed-form two-qubit entanglement of formation in bits.
pub fn wootters_eof(w: &DensityMatrix) -> Result<f64> {
    let c = concurrence(w)?.min(1.0);
    Ok(binary_entropy(0.5 * (1.0 + (1.0 - c * c).sqrt())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PptVerdict {
    Ppt,
    Npt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PptReport {
    pub verdict: PptVerdict,
    pub min_eigenvalue: f64,
}

/// Transposes factor 2: `(i j, k l) → (i l, k j)`.
pub fn partial_transpose(w: &DensityMatrix, layout: BipartiteLayout) -> Result<CMatrix> {
    layout.check(w.dim())?;
    let (d1, d2) = (layout.d1(), layout.d2());
    let m = w.matrix();
    Ok(CMatrix::from_fn(d1 * d2, d1 * d2, |row, col| {
        let (i, j) = (row / d2, row % d2);
        let (k, l) = (col / d2, col % d2);
        m[(i * d2 + l, k * d2 + j)]
    }))
}

/// Peres-Horodecki test on factor 2.
pub fn ppt_check(w: &DensityMatrix, layout: BipartiteLayout) -> Result<PptReport> {
    let pt = partial_transpose(w, layout)?;
    let min = *hermitian_eigenvalues(&pt)?.last().expect("nonempty");
    let verdict = if min >= -TAU_PSD { PptVerdict::Ppt } else { PptVerdict::Npt };
    Ok(PptReport { verdict, min_eigenvalue: min })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityCheck {
    pub lambda: f64,
    /// `E(λ w1 + (1 - λ) w2)`.
    pub mixture: f64,
    /// `λ E(w1) + (1 - λ) E(w2)`.
    pub chord: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub checks: Vec<ConvexityCheck>,
    pub violations: Vec<f64>,
}

pub const CONVEXITY_SLACK: f64 = 1e-9;

/// Checks `E(λ w1 + (1-λ) w2) ≤ λ E(w1) + (1-λ) E(w2)` with the closed form on both sides.
pub fn verify_convexity(w1: &DensityMatrix, w2: &DensityMatrix, lambdas: &[f64]) -> Result<ConvexityReport> {
    let (e1, e2) = (wootters_eof(w1)?, wootters_eof(w2)?);
    let mut checks = Vec::with_capacity(lambdas.len());
    let mut violations = Vec::new();
    for &lambda in lambdas {
        let mixed = DensityMatrix::mix(w1, w2, lambda)?;
        let mixture = wootters_eof(&mixed)?;
        let chord = lambda * e1 + (1.0 - lambda) * e2;
        if mixture > chord + CONVEXITY_SLACK {
            violations.push(lambda);
        }
        checks.push(ConvexityCheck { lambda, mixture, chord });
    }
    Ok(ConvexityReport { checks, violations })
}

/// Reorders the tensor factors of `state` on subsystems of dimensions `dims`
/// so that new factor `n` is old factor `order[n]`.
pub fn permute_subsystems(state: &CMatrix, dims: &[usize], order: &[usize]) -> Result<CMatrix> {
    let n: usize = dims.iter().product();
    if state.nrows() != n || state.ncols() != n {
        return Err(Error::Dimension(format!("operator dimension {} does not match factors {dims:?}", state.nrows())));
    }
    let mut seen = vec![false; dims.len()];
    if order.len() != dims.len() || order.iter().any(|&o| o >= dims.len() || std::mem::replace(&mut seen[o], true)) {
        return Err(Error::Usage(format!("{order:?} is not a permutation of {} factors", dims.len())));
    }
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    // Old joint index of each new joint index.
    let map: Vec<usize> = (0..n)
        .map(|new| {
            let mut digits = vec![0; dims.len()];
            let mut rem = new;
            for pos in (0..dims.len()).rev() {
                digits[order[pos]] = rem % new_dims[pos];
                rem /= new_dims[pos];
            }
            digits.iter().zip(dims).fold(0, |acc, (d, dim)| acc * dim + d)
        })
        .collect();
    Ok(CMatrix::from_fn(n, n, |r, c| state[(map[r], map[c])]))
}

/// `ω ⊗ ω` on `(A1 B1)(A2 B2)` regrouped as `(A1 A2)(B1 B2)`.
pub fn doubled_state(w: &DensityMatrix, layout: BipartiteLayout) -> Result<DensityMatrix> {
    let ww = tensor(w, w)?;
    regroup_doubled(&ww, layout)
}

fn regroup_doubled(state: &DensityMatrix, layout: BipartiteLayout) -> Result<DensityMatrix> {
    let dims = [layout.d1(), layout.d2(), layout.d1(), layout.d2()];
    Ok(DensityMatrix::from_raw(permute_subsystems(state.matrix(), &dims, &[0, 2, 1, 3])?))
}

#[derive(Clone, Debug, Serialize)]
pub struct SubadditivityReport {
    /// `E(ω)` from the closed form.
    pub oracle: f64,
    /// Variational value for `ω`.
    pub single: f64,
    /// Objective of the product of the single-copy ensemble with itself.
    pub product_objective: f64,
    /// Variational value for `ω ⊗ ω`, started from the product ensemble.
    pub doubled: f64,
    /// `2 E(ω)`.
    pub bound: f64,
    pub holds: bool,
}

/// Slack allowed on `E(ω ⊗ ω) ≤ 2 E(ω)`.
pub const SUBADDITIVITY_SLACK: f64 = 1e-6;
/// Ensemble size of the single-copy search: four items suffice for any two-qubit state.
const SINGLE_COPY_ITEMS: usize = 4;
/// Sweep budget for the doubled search, which starts at the product ensemble.
const DOUBLED_MAX_ITERS: usize = 12;

/// Checks `E(ω ⊗ ω) ≤ 2 E(ω)` for a two-qubit `ω`.
pub fn verify_subadditivity(w: &DensityMatrix, layout: BipartiteLayout, cfg: &OptimizerConfig) -> Result<SubadditivityReport> {
    if layout != BipartiteLayout::qubits() || w.dim() != 4 {
        return Err(Error::Scope("subadditivity check is implemented for two-qubit states".into()));
    }
    let oracle = wootters_eof(w)?;
    let single_cfg = OptimizerConfig { ensemble_size: Some(SINGLE_COPY_ITEMS.max(w.rank()?)), ..cfg.clone() };
    let single = eof_minimize(w, layout, &single_cfg)?;
    let doubled_layout = BipartiteLayout::new(layout.d1() * layout.d1(), layout.d2() * layout.d2())?;
    let product = single
        .optimal_ensemble
        .tensor(&single.optimal_ensemble)?
        .map_states(|s| regroup_doubled(s, layout))?;
    let product_objective = ensemble_objective(&product, |s| marginal_entropy(s, doubled_layout))?;
    let ww = product.barycenter().clone();
    let doubled_cfg = OptimizerConfig {
        restarts: 1,
        max_iters: cfg.max_iters.min(DOUBLED_MAX_ITERS),
        ensemble_size: Some(product.len()),
        ..cfg.clone()
    };
    let doubled = eof_minimize_seeded(&ww, doubled_layout, &doubled_cfg, std::slice::from_ref(&product))?;
    let bound = 2.0 * oracle;
    Ok(SubadditivityReport {
        oracle,
        single: single.value,
        product_objective,
        doubled: doubled.value,
        bound,
        holds: doubled.value <= bound + SUBADDITIVITY_SLACK,
    })
}

/// Checks that a pure state with a pure marginal is a product of its marginals.
/// Vacuously true when the marginal is mixed.
pub fn verify_pure_marginal_product(psi: &PureState, layout: BipartiteLayout) -> Result<bool> {
    let rho = psi.projector();
    let r1 = restrict(&rho, layout, Factor::One)?;
    if entropy(&r1)? > 1e-8 {
        return Ok(true);
    }
    let r2 = restrict(&rho, layout, Factor::Two)?;
    Ok(trace_distance(&rho, &tensor(&r1, &r2)?)? <= 1e-6)
}
