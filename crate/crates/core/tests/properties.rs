use eofkit::ensembles::{decompose, IsometryParams};
use eofkit::eof::{eof_pure, wootters_eof};
use eofkit::qcore::{
    entropy, expect, hermitian_eigen, kron, restrict, tensor, trace_distance, BipartiteLayout, CMatrix, DensityMatrix,
    Factor, Observable, C64,
};
use eofkit::qcorr::{boxtimes, classical_value, restrict_multi};
use eofkit::states::{random_mixed, random_product, random_pure, Pauli};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn state(dim: usize, rank: usize, seed: u64) -> DensityMatrix {
    random_mixed(dim, rank.min(dim), &mut rng(seed)).unwrap()
}

/// Haar-ish unitary from the QR of a Gaussian matrix.
fn unitary(dim: usize, seed: u64) -> CMatrix {
    let p = IsometryParams::random(dim, dim, &mut rng(seed)).unwrap();
    eofkit::ensembles::realize_isometry(&p).unwrap()
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restriction_is_affine(seed in any::<u64>(), lambda in 0.0f64..=1.0, d1 in 1usize..4, d2 in 1usize..4) {
        let layout = BipartiteLayout::new(d1, d2).unwrap();
        let a = state(d1 * d2, d1 * d2, seed);
        let b = state(d1 * d2, 1, seed ^ 1);
        let mixed = DensityMatrix::mix(&a, &b, lambda).unwrap();
        for factor in [Factor::One, Factor::Two] {
            let lhs = restrict(&mixed, layout, factor).unwrap();
            let ra = restrict(&a, layout, factor).unwrap();
            let rb = restrict(&b, layout, factor).unwrap();
            let rhs = DensityMatrix::mix(&ra, &rb, lambda).unwrap();
            prop_assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-12);
        }
    }

    #[test]
    fn restriction_is_dual_to_embedding(seed in any::<u64>(), which in 0usize..3) {
        let layout = BipartiteLayout::qubits();
        let w = state(4, 4, seed);
        let a = Pauli::XYZ[which].observable();
        let embedded = Observable::new(kron(a.matrix(), &CMatrix::identity(2, 2)).unwrap()).unwrap();
        let lhs = expect(&restrict(&w, layout, Factor::One).unwrap(), &a).unwrap();
        prop_assert!((lhs - expect(&w, &embedded).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_unitarily_invariant(seed in any::<u64>(), rank in 1usize..5) {
        let w = state(4, rank, seed);
        let rotated = w.conjugate(&unitary(4, seed ^ 7)).unwrap();
        prop_assert!((entropy(&w).unwrap() - entropy(&rotated).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn entropy_is_concave(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let a = state(3, 2, seed);
        let b = state(3, 3, seed ^ 3);
        let m = DensityMatrix::mix(&a, &b, lambda).unwrap();
        let chord = lambda * entropy(&a).unwrap() + (1.0 - lambda) * entropy(&b).unwrap();
        prop_assert!(entropy(&m).unwrap() >= chord - 1e-9);
    }

    #[test]
    fn trace_distance_is_a_metric(seed in any::<u64>()) {
        let (a, b, c) = (state(4, 4, seed), state(4, 2, seed ^ 5), state(4, 1, seed ^ 9));
        let ab = trace_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0 && ab <= 2.0 + 1e-12);
        prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= trace_distance(&a, &c).unwrap() + trace_distance(&c, &b).unwrap() + 1e-12);
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn decompositions_reproduce_the_barycenter(seed in any::<u64>(), rank in 1usize..5, extra in 0usize..6) {
        let w = state(4, rank, seed);
        let r = w.rank().unwrap();
        let p = IsometryParams::random(r + extra, r, &mut rng(seed ^ 11)).unwrap();
        let e = decompose(&w, &p).unwrap();
        prop_assert!(e.barycenter_residue() < 1e-9);
        prop_assert!(e.is_pure(1e-9).unwrap());
        let total: f64 = e.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn boxtimes_preserves_marginals(seed in any::<u64>(), rank in 1usize..5) {
        let layout = BipartiteLayout::qubits();
        let w = state(4, rank, seed);
        let r = w.rank().unwrap();
        let p = IsometryParams::random(r * r, r, &mut rng(seed ^ 13)).unwrap();
        let pe = boxtimes(&decompose(&w, &p).unwrap(), layout).unwrap();
        let (left, right) = pe.marginals();
        prop_assert!(max_abs(&(left.matrix() - restrict(&w, layout, Factor::One).unwrap().matrix())) < 1e-9);
        prop_assert!(max_abs(&(right.matrix() - restrict(&w, layout, Factor::Two).unwrap().matrix())) < 1e-9);
    }

    #[test]
    fn product_states_have_no_entanglement_or_correlation_gap(seed in any::<u64>(), a in 0usize..3, b in 0usize..3) {
        let layout = BipartiteLayout::qubits();
        let psi = random_product(2, 2, &mut rng(seed)).unwrap();
        prop_assert!(eof_pure(&psi, layout).unwrap() < 1e-9);
        let w = psi.projector();
        let e = eofkit::ensembles::spectral_ensemble(&w).unwrap();
        let (oa, ob) = (Pauli::XYZ[a].observable(), Pauli::XYZ[b].observable());
        let joint = Observable::new(kron(oa.matrix(), ob.matrix()).unwrap()).unwrap();
        let classical = classical_value(&boxtimes(&e, layout).unwrap(), &oa, &ob).unwrap();
        prop_assert!((classical - expect(&w, &joint).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_marginal_entropy_on_pure_states(seed in any::<u64>()) {
        let psi = random_pure(4, &mut rng(seed)).unwrap();
        let exact = eof_pure(&psi, BipartiteLayout::qubits()).unwrap();
        prop_assert!((wootters_eof(&psi.projector()).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn multipartite_marginals_match_bipartite_restriction(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let w = state(d1 * d2, d1 * d2, seed);
        let layout = BipartiteLayout::new(d1, d2).unwrap();
        let a = restrict_multi(&w, &[d1, d2], 0).unwrap();
        let b = restrict_multi(&w, &[d1, d2], 1).unwrap();
        prop_assert!(max_abs(&(a.matrix() - restrict(&w, layout, Factor::One).unwrap().matrix())) < 1e-12);
        prop_assert!(max_abs(&(b.matrix() - restrict(&w, layout, Factor::Two).unwrap().matrix())) < 1e-12);
    }

    #[test]
    fn tensor_then_restrict_recovers_factors(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (state(2, 2, s1), state(3, 2, s2));
        let joint = tensor(&a, &b).unwrap();
        let layout = BipartiteLayout::new(2, 3).unwrap();
        prop_assert!(max_abs(&(restrict(&joint, layout, Factor::One).unwrap().matrix() - a.matrix())) < 1e-12);
        prop_assert!(max_abs(&(restrict(&joint, layout, Factor::Two).unwrap().matrix() - b.matrix())) < 1e-12);
        let (values, _) = hermitian_eigen(joint.matrix()).unwrap();
        prop_assert!(values.iter().all(|&l| l > -1e-12));
        prop_assert!((joint.matrix().trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
