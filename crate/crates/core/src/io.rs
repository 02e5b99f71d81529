//! JSON documents for states and ensembles.
//!
//! A matrix document is `{"dims": [d1, d2], "matrix": [[[re, im], ...], ...]}`;
//! `dims` lists the tensor factor dimensions (two for bipartite states, more
//! for multipartite ones, one for local states). Ensembles wrap matrix
//! documents:
//!
//! ```json
//! {"barycenter": {..}, "items": [{"weight": 0.5, "state": {..}}, ...]}
//! ```
//!
//! Product and c-dependent ensembles replace `state` with `locals`, one matrix
//! document per factor.

use serde::{Deserialize, Serialize};

use crate::ensembles::Ensemble;
use crate::error::{Error, Result};
use crate::qcore::{CMatrix, DensityMatrix, C64};
use crate::qcorr::{CDependentEnsemble, CDependentItem, ProductEnsemble};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub dims: Vec<usize>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &CMatrix, dims: &[usize]) -> Self {
        let matrix = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
        Self { dims: dims.to_vec(), matrix }
    }

    /// Checks the shape against `dims` and returns the matrix.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.matrix.len();
        if n == 0 {
            return Err(Error::Format("empty matrix".into()));
        }
        if let Some((i, row)) = self.matrix.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Format(format!("row {i} has {} entries, expected {n}", row.len())));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::Format(format!("invalid dims {:?}", self.dims)));
        }
        if self.dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)) != Some(n) {
            return Err(Error::Format(format!("dims {:?} do not multiply to the matrix size {n}", self.dims)));
        }
        Ok(CMatrix::from_fn(n, n, |i, j| C64::new(self.matrix[i][j][0], self.matrix[i][j][1])))
    }

    /// Validated density matrix.
    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.to_matrix()?)
    }
}

pub fn state_to_json(w: &DensityMatrix, dims: &[usize]) -> Result<String> {
    to_json(&MatrixDoc::from_matrix(w.matrix(), dims))
}

/// Parses and validates a state document; returns the state and its factor dimensions.
pub fn state_from_json(text: &str) -> Result<(DensityMatrix, Vec<usize>)> {
    let doc: MatrixDoc = from_json(text)?;
    Ok((doc.to_state()?, doc.dims))
}

fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    serde_json::to_string_pretty(doc).map_err(|e| Error::Format(e.to_string()))
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleItemDoc {
    pub weight: f64,
    pub state: MatrixDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleDoc {
    pub barycenter: MatrixDoc,
    pub items: Vec<EnsembleItemDoc>,
}

impl EnsembleDoc {
    pub fn from_ensemble(e: &Ensemble, dims: &[usize]) -> Self {
        Self {
            barycenter: MatrixDoc::from_matrix(e.barycenter().matrix(), dims),
            items: e
                .items()
                .iter()
                .map(|it| EnsembleItemDoc { weight: it.weight, state: MatrixDoc::from_matrix(it.state.matrix(), dims) })
                .collect(),
        }
    }

    pub fn to_ensemble(&self) -> Result<Ensemble> {
        let items = self.items.iter().map(|it| Ok((it.weight, it.state.to_state()?))).collect::<Result<Vec<_>>>()?;
        Ensemble::new(self.barycenter.to_state()?, items)
    }
}

pub fn ensemble_to_json(e: &Ensemble, dims: &[usize]) -> Result<String> {
    to_json(&EnsembleDoc::from_ensemble(e, dims))
}

pub fn ensemble_from_json(text: &str) -> Result<Ensemble> {
    from_json::<EnsembleDoc>(text)?.to_ensemble()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalsItemDoc {
    pub weight: f64,
    pub locals: Vec<MatrixDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalsEnsembleDoc {
    pub barycenter: MatrixDoc,
    pub items: Vec<LocalsItemDoc>,
    /// Per-factor support projectors (c-dependent ensembles only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_projectors: Option<Vec<MatrixDoc>>,
}

fn locals_items(items: impl Iterator<Item = (f64, Vec<DensityMatrix>)>) -> Vec<LocalsItemDoc> {
    items
        .map(|(weight, locals)| LocalsItemDoc {
            weight,
            locals: locals.iter().map(|s| MatrixDoc::from_matrix(s.matrix(), &[s.dim()])).collect(),
        })
        .collect()
}

pub fn product_ensemble_to_json(pe: &ProductEnsemble) -> Result<String> {
    let l = pe.layout();
    let doc = LocalsEnsembleDoc {
        barycenter: MatrixDoc::from_matrix(pe.barycenter()?.matrix(), &[l.d1(), l.d2()]),
        items: locals_items(pe.items().iter().map(|it| (it.weight, vec![it.left.clone(), it.right.clone()]))),
        support_projectors: None,
    };
    to_json(&doc)
}

pub fn c_dependent_to_json(e: &CDependentEnsemble) -> Result<String> {
    let doc = LocalsEnsembleDoc {
        barycenter: MatrixDoc::from_matrix(e.barycenter()?.matrix(), e.dims()),
        items: locals_items(e.items().iter().map(|it| (it.weight, it.locals.clone()))),
        support_projectors: Some(e.support_projectors().iter().map(|p| MatrixDoc::from_matrix(p, &[p.nrows()])).collect()),
    };
    to_json(&doc)
}

/// Loads a c-dependent ensemble; without stored projectors the supports are
/// the ranges of the barycenter's marginals.
pub fn c_dependent_from_json(text: &str) -> Result<CDependentEnsemble> {
    let doc: LocalsEnsembleDoc = from_json(text)?;
    let barycenter = doc.barycenter.to_state()?;
    let items = doc
        .items
        .iter()
        .map(|it| {
            let locals = it.locals.iter().map(MatrixDoc::to_state).collect::<Result<Vec<_>>>()?;
            Ok(CDependentItem { weight: it.weight, locals })
        })
        .collect::<Result<Vec<_>>>()?;
    let e = match &doc.support_projectors {
        Some(ps) => {
            let ps = ps.iter().map(MatrixDoc::to_matrix).collect::<Result<Vec<_>>>()?;
            CDependentEnsemble::new(doc.barycenter.dims.clone(), items, ps)?
        }
        None => CDependentEnsemble::for_state(&barycenter, doc.barycenter.dims.clone(), items)?,
    };
    let residual = (e.barycenter()?.matrix() - barycenter.matrix()).map(|z| z.norm()).max();
    if residual > crate::ensembles::TAU_BARY {
        return Err(Error::Consistency(format!("items do not average to the barycenter (residual {residual:e})")));
    }
    Ok(e)
}
