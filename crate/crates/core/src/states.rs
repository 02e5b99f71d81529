//! Named state families, seeded random states and Pauli observables.
//!
//! Families have a compact textual form, `name:key=value,...`:
//!
//! | text | state |
//! |------|-------|
//! | `bell:0` .. `bell:3` | `Φ⁺, Φ⁻, Ψ⁺, Ψ⁻` |
//! | `werner:p=0.5` | `p·Ψ⁻ + (1-p)·I/4` |
//! | `isotropic:f=0.5` | `f·Φ⁺ + (1-f)·I/4` |
//! | `ghz:n=3` | `(|0…0⟩ + |1…1⟩)/√2` on `n` qubits |
//! | `classical_mixture:weights=0.5/0.5` | `Σ w_i |ii⟩⟨ii|` on `d×d`, `d` = number of weights |
//! | `random_mixed:dim=4,rank=3,seed=7` | `G G† / Tr(G G†)`, `G` complex Gaussian `dim × rank` |
//! | `random_pure:dim=4,seed=1` | normalized complex Gaussian vector |
//! | `random_product:d1=2,d2=2,seed=3` | product of two random pure states |
//!
//! `random_mixed` and `random_pure` also accept `d1=..,d2=..` in place of
//! `dim`; a bare `dim=n` means factors `2 × n/2` for even `n`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qcore::{kron, BipartiteLayout, CMatrix, CVector, DensityMatrix, Observable, PureState, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum FamilySpec {
    Bell(u8),
    Werner(f64),
    Isotropic(f64),
    Ghz(usize),
    ClassicalMixture(Vec<f64>),
    RandomMixed { d1: usize, d2: usize, rank: usize, seed: u64 },
    RandomPure { d1: usize, d2: usize, seed: u64 },
    RandomProduct { d1: usize, d2: usize, seed: u64 },
}

/// Output of [`make`].
#[derive(Clone, Debug, PartialEq)]
pub enum StateValue {
    Mixed(DensityMatrix),
    Pure(PureState),
}

impl StateValue {
    pub fn density(&self) -> DensityMatrix {
        match self {
            StateValue::Mixed(rho) => rho.clone(),
            StateValue::Pure(psi) => psi.projector(),
        }
    }

    pub fn pure(&self) -> Option<&PureState> {
        match self {
            StateValue::Pure(psi) => Some(psi),
            StateValue::Mixed(_) => None,
        }
    }
}

impl FamilySpec {
    /// Tensor factor dimensions of the generated state.
    pub fn factor_dims(&self) -> Vec<usize> {
        match self {
            FamilySpec::Bell(_) | FamilySpec::Werner(_) | FamilySpec::Isotropic(_) => vec![2, 2],
            FamilySpec::Ghz(n) => vec![2; *n],
            FamilySpec::ClassicalMixture(w) => vec![w.len(), w.len()],
            FamilySpec::RandomMixed { d1, d2, .. }
            | FamilySpec::RandomPure { d1, d2, .. }
            | FamilySpec::RandomProduct { d1, d2, .. } => vec![*d1, *d2],
        }
    }

    /// Bipartite layout, when the family has exactly two factors.
    pub fn layout(&self) -> Result<BipartiteLayout> {
        match self.factor_dims().as_slice() {
            [d1, d2] => BipartiteLayout::new(*d1, *d2),
            dims => Err(Error::Usage(format!("state has {} factors, not 2", dims.len()))),
        }
    }

    /// Same family with its scalar parameter replaced (for parameter sweeps).
    pub fn with_parameter(&self, value: f64) -> Result<FamilySpec> {
        let spec = match self {
            FamilySpec::Werner(_) => FamilySpec::Werner(value),
            FamilySpec::Isotropic(_) => FamilySpec::Isotropic(value),
            other => return Err(Error::Usage(format!("family `{other}` has no continuous parameter"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Spec(format!("{name} = {v} outside [0, 1]")))
            }
        };
        let dims_ok = |d1: usize, d2: usize| BipartiteLayout::new(d1, d2).map(|_| ()).map_err(|e| Error::Spec(e.to_string()));
        match self {
            FamilySpec::Bell(i) if *i > 3 => Err(Error::Spec(format!("bell index {i} outside 0..=3"))),
            FamilySpec::Bell(_) => Ok(()),
            FamilySpec::Werner(p) => unit("p", *p),
            FamilySpec::Isotropic(f) => unit("f", *f),
            FamilySpec::Ghz(n) if *n < 2 || *n > 10 => Err(Error::Spec(format!("ghz needs 2..=10 qubits, got {n}"))),
            FamilySpec::Ghz(_) => Ok(()),
            FamilySpec::ClassicalMixture(w) => {
                if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::Spec("classical mixture weights must be nonnegative".into()));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Spec(format!("classical mixture weights sum to {total}")));
                }
                dims_ok(w.len(), w.len())
            }
            FamilySpec::RandomMixed { d1, d2, rank, .. } => {
                dims_ok(*d1, *d2)?;
                if *rank == 0 || *rank > d1 * d2 {
                    return Err(Error::Spec(format!("rank {rank} outside 1..={}", d1 * d2)));
                }
                Ok(())
            }
            FamilySpec::RandomPure { d1, d2, .. } | FamilySpec::RandomProduct { d1, d2, .. } => dims_ok(*d1, *d2),
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilySpec::Bell(i) => write!(f, "bell:{i}"),
            FamilySpec::Werner(p) => write!(f, "werner:p={p}"),
            FamilySpec::Isotropic(x) => write!(f, "isotropic:f={x}"),
            FamilySpec::Ghz(n) => write!(f, "ghz:n={n}"),
            FamilySpec::ClassicalMixture(w) => {
                let parts: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                write!(f, "classical_mixture:weights={}", parts.join("/"))
            }
            FamilySpec::RandomMixed { d1, d2, rank, seed } => {
                write!(f, "random_mixed:d1={d1},d2={d2},rank={rank},seed={seed}")
            }
            FamilySpec::RandomPure { d1, d2, seed } => write!(f, "random_pure:d1={d1},d2={d2},seed={seed}"),
            FamilySpec::RandomProduct { d1, d2, seed } => write!(f, "random_product:d1={d1},d2={d2},seed={seed}"),
        }
    }
}

struct Args<'a> {
    family: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Args<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Spec(format!("{}: cannot parse {key}={v}", self.family)))
            })
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?.ok_or_else(|| Error::Spec(format!("{} needs `{key}=`", self.family)))
    }

    fn dims(&self) -> Result<(usize, usize)> {
        match (self.parse::<usize>("d1")?, self.parse::<usize>("d2")?, self.parse::<usize>("dim")?) {
            (Some(d1), Some(d2), None) => Ok((d1, d2)),
            (None, None, Some(dim)) if dim >= 2 && dim % 2 == 0 => Ok((2, dim / 2)),
            (None, None, Some(dim)) => Err(Error::Spec(format!("{}: dim={dim} has no 2 x n split; give d1 and d2", self.family))),
            _ => Err(Error::Spec(format!("{} needs either dim= or d1= and d2=", self.family))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.pairs {
            if !allowed.contains(k) {
                return Err(Error::Spec(format!("{}: unknown key `{k}`", self.family)));
            }
        }
        Ok(())
    }
}

impl FromStr for FamilySpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (family, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut pairs = Vec::new();
        let mut positional = None;
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((k, v)) => pairs.push((k.trim(), v.trim())),
                None if positional.is_none() => positional = Some(part),
                None => return Err(Error::Spec(format!("unexpected token `{part}` in `{text}`"))),
            }
        }
        let args = Args { family, pairs };
        // A single bare value is the family's main parameter, e.g. `bell:0`.
        let main = |key: &str| -> Result<Option<&str>> {
            match (positional, args.get(key)) {
                (Some(_), Some(_)) => Err(Error::Spec(format!("{family}: `{key}` given twice"))),
                (p, k) => Ok(p.or(k)),
            }
        };
        let number = |key: &str, default: Option<f64>| -> Result<f64> {
            match main(key)? {
                Some(v) => v.parse().map_err(|_| Error::Spec(format!("{family}: cannot parse {key}={v}"))),
                None => default.ok_or_else(|| Error::Spec(format!("{family} needs `{key}=`"))),
            }
        };
        let spec = match family {
            "bell" => {
                args.check_keys(&["index"])?;
                let i = number("index", None)?;
                if i.fract() != 0.0 || !(0.0..=3.0).contains(&i) {
                    return Err(Error::Spec(format!("bell index {i} outside 0..=3")));
                }
                FamilySpec::Bell(i as u8)
            }
            // Parameterless forms stand for the whole family in sweeps.
            "werner" => {
                args.check_keys(&["p"])?;
                FamilySpec::Werner(number("p", Some(0.0))?)
            }
            "isotropic" => {
                args.check_keys(&["f"])?;
                FamilySpec::Isotropic(number("f", Some(0.0))?)
            }
            "ghz" => {
                args.check_keys(&["n"])?;
                let n = number("n", Some(3.0))?;
                if n.fract() != 0.0 || n < 0.0 {
                    return Err(Error::Spec(format!("ghz: n={n} is not a count")));
                }
                FamilySpec::Ghz(n as usize)
            }
            "classical_mixture" => {
                args.check_keys(&["weights"])?;
                let raw = main("weights")?.unwrap_or("0.5/0.5");
                let w = raw
                    .split('/')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Spec(format!("bad weight `{x}`"))))
                    .collect::<Result<Vec<_>>>()?;
                FamilySpec::ClassicalMixture(w)
            }
            "random_mixed" => {
                args.check_keys(&["dim", "d1", "d2", "rank", "seed"])?;
                let (d1, d2) = args.dims()?;
                let rank = args.parse("rank")?.unwrap_or(d1 * d2);
                FamilySpec::RandomMixed { d1, d2, rank, seed: args.require("seed")? }
            }
            "random_pure" => {
                args.check_keys(&["dim", "d1", "d2", "seed"])?;
                let (d1, d2) = args.dims()?;
                FamilySpec::RandomPure { d1, d2, seed: args.require("seed")? }
            }
            "random_product" => {
                args.check_keys(&["d1", "d2", "seed"])?;
                FamilySpec::RandomProduct {
                    d1: args.parse("d1")?.unwrap_or(2),
                    d2: args.parse("d2")?.unwrap_or(2),
                    seed: args.require("seed")?,
                }
            }
            other => return Err(Error::Spec(format!("unknown state family `{other}`"))),
        };
        if positional.is_some() && !matches!(family, "bell" | "werner" | "isotropic" | "ghz" | "classical_mixture") {
            return Err(Error::Spec(format!("{family} takes only key=value arguments")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Complex Gaussian `dim × rank` matrix `G`, returned as `G G† / Tr(G G†)`.
pub fn random_mixed(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::Spec(format!("rank {rank} outside 1..={dim}")));
    }
    let g = CMatrix::from_fn(dim, rank, |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(crate::qcore::hermitian_part(&m.unscale(tr)))
}

pub fn random_pure(dim: usize, rng: &mut ChaCha8Rng) -> Result<PureState> {
    PureState::normalized(CVector::from_fn(dim, |_, _| gaussian(rng)))
}

pub fn random_product(d1: usize, d2: usize, rng: &mut ChaCha8Rng) -> Result<PureState> {
    let a = random_pure(d1, rng)?;
    let b = random_pure(d2, rng)?;
    a.tensor(&b)
}

/// `Φ⁺, Φ⁻, Ψ⁺, Ψ⁻` for `index` 0..=3.
pub fn bell(index: u8) -> Result<PureState> {
    let amps = match index {
        0 => [1.0, 0.0, 0.0, 1.0],
        1 => [1.0, 0.0, 0.0, -1.0],
        2 => [0.0, 1.0, 1.0, 0.0],
        3 => [0.0, 1.0, -1.0, 0.0],
        _ => return Err(Error::Spec(format!("bell index {index} outside 0..=3"))),
    };
    PureState::from_real(&amps)
}

pub fn singlet() -> PureState {
    bell(3).expect("valid index")
}

pub fn werner(p: f64) -> Result<DensityMatrix> {
    FamilySpec::Werner(p).validate()?;
    DensityMatrix::mix(&singlet().projector(), &DensityMatrix::maximally_mixed(4)?, p)
}

pub fn isotropic(f: f64) -> Result<DensityMatrix> {
    FamilySpec::Isotropic(f).validate()?;
    DensityMatrix::mix(&bell(0)?.projector(), &DensityMatrix::maximally_mixed(4)?, f)
}

pub fn ghz(n: usize) -> Result<PureState> {
    FamilySpec::Ghz(n).validate()?;
    let dim = 1usize << n;
    let mut amps = vec![0.0; dim];
    amps[0] = 1.0;
    amps[dim - 1] = 1.0;
    PureState::from_real(&amps)
}

/// `Σ w_i |ii⟩⟨ii|`.
pub fn classical_mixture(weights: &[f64]) -> Result<DensityMatrix> {
    FamilySpec::ClassicalMixture(weights.to_vec()).validate()?;
    let d = weights.len();
    let mut diag = vec![0.0; d * d];
    for (i, w) in weights.iter().enumerate() {
        diag[i * d + i] = *w;
    }
    DensityMatrix::diagonal(&diag)
}

/// Generates the state described by `spec`.
pub fn make(spec: &FamilySpec) -> Result<StateValue> {
    spec.validate()?;
    Ok(match spec {
        FamilySpec::Bell(i) => StateValue::Pure(bell(*i)?),
        FamilySpec::Werner(p) => StateValue::Mixed(werner(*p)?),
        FamilySpec::Isotropic(f) => StateValue::Mixed(isotropic(*f)?),
        FamilySpec::Ghz(n) => StateValue::Pure(ghz(*n)?),
        FamilySpec::ClassicalMixture(w) => StateValue::Mixed(classical_mixture(w)?),
        FamilySpec::RandomMixed { d1, d2, rank, seed } => {
            StateValue::Mixed(random_mixed(d1 * d2, *rank, &mut ChaCha8Rng::seed_from_u64(*seed))?)
        }
        FamilySpec::RandomPure { d1, d2, seed } => {
            StateValue::Pure(random_pure(d1 * d2, &mut ChaCha8Rng::seed_from_u64(*seed))?)
        }
        FamilySpec::RandomProduct { d1, d2, seed } => {
            StateValue::Pure(random_product(*d1, *d2, &mut ChaCha8Rng::seed_from_u64(*seed))?)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        let entries = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }

    pub fn observable(self) -> Observable {
        Observable::new(self.matrix()).expect("pauli matrices are hermitian")
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pauli::I => "i",
            Pauli::X => "x",
            Pauli::Y => "y",
            Pauli::Z => "z",
        })
    }
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "id" => Ok(Pauli::I),
            "x" => Ok(Pauli::X),
            "y" => Ok(Pauli::Y),
            "z" => Ok(Pauli::Z),
            other => Err(Error::Spec(format!("unknown pauli `{other}`"))),
        }
    }
}

/// `which` on factor `factor` (0-based) of a system with factor dimensions
/// `dims`, identities elsewhere.
pub fn pauli(which: Pauli, factor: usize, dims: &[usize]) -> Result<Observable> {
    if factor >= dims.len() {
        return Err(Error::Usage(format!("factor {factor} out of range for {} factors", dims.len())));
    }
    if dims[factor] != 2 {
        return Err(Error::Scope(format!("pauli on a factor of dimension {}", dims[factor])));
    }
    let mut m = CMatrix::identity(1, 1);
    for (k, &d) in dims.iter().enumerate() {
        let local = if k == factor { which.matrix() } else { CMatrix::identity(d, d) };
        m = kron(&m, &local)?;
    }
    Observable::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eof::ppt_check;
    use crate::eof::PptVerdict;

    #[test]
    fn werner_endpoints() {
        assert_eq!(werner(0.0).unwrap(), DensityMatrix::maximally_mixed(4).unwrap());
        assert_eq!(werner(1.0).unwrap(), singlet().projector());
        assert!(werner(1.5).is_err());
    }

    #[test]
    fn random_mixed_has_requested_rank() {
        let spec: FamilySpec = "random_mixed:dim=4,rank=2,seed=9".parse().unwrap();
        let rho = make(&spec).unwrap().density();
        let (ev, _) = rho.eigen().unwrap();
        let oracle_rank = ev.iter().filter(|&&l| l > 1e-10).count();
        assert_eq!(oracle_rank, 2);
        assert_eq!(rho.rank().unwrap(), 2);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_states_are_bitwise_reproducible() {
        let spec: FamilySpec = "random_mixed:dim=4,rank=3,seed=7".parse().unwrap();
        assert_eq!(make(&spec).unwrap(), make(&spec).unwrap());
        let other: FamilySpec = "random_mixed:dim=4,rank=3,seed=8".parse().unwrap();
        assert_ne!(make(&spec).unwrap(), make(&other).unwrap());
    }

    #[test]
    fn family_text_round_trips() {
        for text in [
            "bell:2",
            "werner:p=0.5",
            "isotropic:f=0.25",
            "ghz:n=3",
            "classical_mixture:weights=0.25/0.75",
            "random_mixed:d1=2,d2=3,rank=4,seed=1",
            "random_pure:d1=2,d2=2,seed=5",
            "random_product:d1=2,d2=3,seed=5",
        ] {
            let spec: FamilySpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
            assert_eq!(spec.to_string().parse::<FamilySpec>().unwrap(), spec);
        }
        assert_eq!("bell:index=1".parse::<FamilySpec>().unwrap(), FamilySpec::Bell(1));
        assert_eq!("werner".parse::<FamilySpec>().unwrap(), FamilySpec::Werner(0.0));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for text in ["bell:4", "werner:p=2", "random_mixed:dim=4,rank=5,seed=1", "nope:1", "werner:q=0.1", "random_pure:dim=3,seed=1"] {
            assert!(matches!(text.parse::<FamilySpec>(), Err(Error::Spec(_))), "{text}");
        }
    }

    #[test]
    fn every_family_produces_valid_states() {
        for text in ["bell:0", "bell:3", "werner:p=0.3", "isotropic:f=0.9", "ghz:n=3", "classical_mixture:weights=0.5/0.5", "random_mixed:dim=6,rank=6,seed=2", "random_pure:dim=4,seed=3", "random_product:d1=3,d2=2,seed=4"] {
            let spec: FamilySpec = text.parse().unwrap();
            let rho = make(&spec).unwrap().density();
            assert!(DensityMatrix::new(rho.matrix().clone()).is_ok(), "{text}");
            assert_eq!(rho.dim(), spec.factor_dims().iter().product::<usize>());
        }
    }

    #[test]
    fn werner_ppt_boundary_by_bisection() {
        let layout = BipartiteLayout::qubits();
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if ppt_check(&werner(mid).unwrap(), layout).unwrap().verdict == PptVerdict::Ppt {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn pauli_embedding() {
        let z1 = pauli(Pauli::Z, 0, &[2, 2]).unwrap();
        let oracle = kron(&Pauli::Z.matrix(), &CMatrix::identity(2, 2)).unwrap();
        assert_eq!(z1.matrix(), &oracle);
        let diag: Vec<f64> = (0..4).map(|k| z1.matrix()[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);

        let x = pauli(Pauli::X, 0, &[2]).unwrap();
        assert_eq!(x.matrix(), &Pauli::X.matrix());
        let y = Pauli::Y.matrix();
        assert_eq!(&y * &y, CMatrix::identity(2, 2));
        assert!(matches!(pauli(Pauli::X, 1, &[2, 3]), Err(Error::Scope(_))));
    }
}
