//! Randomized and exhaustive checks of structural invariants across modules.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use reslab_core::gaussian::{Grid, PartitionedFunction};
use reslab_core::lp::{game_value, GameMatrix};
use reslab_core::moments::{
    min_eigenvalue, moments_of, noise_shift, noise_unshift, pairwise_independent_point, restrict_permute_sign,
    CubeDistribution, MomentMatrix,
};
use reslab_core::predicate::{sign, Predicate};
use reslab_core::rational::{q, qi};
use reslab_core::relax::{
    constraint_subsets, correct_local_distributions, estimate_sat, sa_objective, verify_consistency, Constraint,
    CspInstance, LocalDistributionFamily,
};
use reslab_core::rounding::OddBiasMap;
use reslab_core::vanishing::{
    charlp_general_search, charlp_symmetric_check, charlp_symmetric_support, is_vanishing, vanishing_feasible,
    FiniteMeasure,
};
use reslab_core::Q;

fn predicate(k: usize, bits: u64) -> Predicate {
    Predicate::new(k, (0..1usize << k).map(|x| bits >> (x % 64) & 1 == 1).collect()).unwrap()
}

fn distribution(k: usize, weights: &[u8]) -> CubeDistribution {
    let total: i64 = weights.iter().take(1 << k).map(|&w| w as i64).sum::<i64>().max(1);
    let mut probs = BTreeMap::new();
    for (x, &w) in weights.iter().take(1 << k).enumerate() {
        if w > 0 {
            probs.insert(x, q(w as i64, total));
        }
    }
    if probs.is_empty() {
        probs.insert(0, Q::one());
    }
    CubeDistribution::new(k, probs).unwrap()
}

fn permutation(k: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..k).collect();
    let mut s = seed;
    for i in (1..k).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        p.swap(i, (s >> 33) as usize % (i + 1));
    }
    p
}

fn instance(f: &Predicate, n: usize, raw: &[(usize, u8)]) -> CspInstance {
    let k = f.k();
    let cons = raw
        .iter()
        .map(|&(start, signs)| Constraint {
            vars: (0..k).map(|j| (start + j) % n).collect(),
            signs: (0..k).map(|j| if signs >> j & 1 == 1 { -1 } else { 1 }).collect(),
        })
        .collect();
    CspInstance::new(f.clone(), n, cons).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fourier_expansion_reconstructs_the_table(k in 1usize..=6, bits in any::<u64>()) {
        let f = predicate(k, bits);
        let spec = f.fourier();
        for x in 0..1usize << k {
            let want = if f.eval(x) { Q::one() } else { Q::zero() };
            prop_assert_eq!(spec.eval(x), want);
        }
        prop_assert_eq!(spec.get(0), &f.density());
        prop_assert_eq!(spec.parseval_sum(), f.density());
    }

    #[test]
    fn moment_matrices_are_psd(k in 1usize..=4, w in prop::collection::vec(0u8..5, 16)) {
        let z = moments_of(&distribution(k, &w));
        prop_assert!(z.is_psd_exact());
        prop_assert!(min_eigenvalue(&z.to_f64()) > -1e-9);
        for i in 0..=k {
            prop_assert!(z.get(i, i).is_one());
        }
    }

    #[test]
    fn noise_shift_is_exactly_invertible(k in 1usize..=4, w in prop::collection::vec(0u8..5, 16), d in 1i64..10) {
        let z = moments_of(&distribution(k, &w));
        let delta = q(d, 10);
        let shifted = noise_shift(&z, &delta).unwrap();
        prop_assert!(shifted.is_psd_exact());
        prop_assert_eq!(noise_unshift(&shifted, &delta).unwrap(), z);
    }

    #[test]
    fn sign_and_permutation_act_like_the_distribution(
        k in 1usize..=4,
        w in prop::collection::vec(0u8..5, 16),
        b in 0usize..16,
        seed in any::<u64>(),
    ) {
        let nu = distribution(k, &w);
        let z = moments_of(&nu);
        let b = b & ((1 << k) - 1);
        let id: Vec<usize> = (0..k).collect();
        let plus = vec![1i8; k];
        let signs: Vec<i8> = (0..k).map(|i| sign(b, i)).collect();
        prop_assert_eq!(restrict_permute_sign(&z, &id, &id, &plus).unwrap(), z.clone());
        let flipped = restrict_permute_sign(&z, &id, &id, &signs).unwrap();
        prop_assert_eq!(&flipped, &moments_of(&nu.twisted(b)));
        prop_assert_eq!(restrict_permute_sign(&flipped, &id, &id, &signs).unwrap(), z.clone());
        let pi = permutation(k, seed);
        prop_assert_eq!(restrict_permute_sign(&z, &id, &pi, &plus).unwrap(), moments_of(&nu.permuted(&pi)));
    }

    #[test]
    fn pairwise_point_has_identity_moments_and_vanishes(k in 2usize..=4, bits in any::<u64>()) {
        let f = predicate(k, bits);
        prop_assume!(f.count() > 0);
        if let Some(nu) = pairwise_independent_point(&f).unwrap() {
            prop_assert!(nu.unsupported_point(&f).is_none());
            prop_assert_eq!(moments_of(&nu), MomentMatrix::identity(k));
            let m = FiniteMeasure::point(nu);
            prop_assert!(is_vanishing(&m, &f.fourier()).unwrap());
        }
    }

    #[test]
    fn vanishing_search_is_certified_either_way(k in 2usize..=3, bits in any::<u64>()) {
        let f = predicate(k, bits);
        prop_assume!(f.count() > 0);
        let mut support: Vec<CubeDistribution> =
            f.satisfying().into_iter().map(|x| CubeDistribution::point_mass(k, x)).collect();
        support.extend(pairwise_independent_point(&f).unwrap());
        let out = vanishing_feasible(&f, &support).unwrap();
        match &out.measure {
            Some(m) => prop_assert!(is_vanishing(m, &f.fourier()).unwrap()),
            None => prop_assert_eq!(out.certificate_verified(), Some(true)),
        }
    }

    #[test]
    fn dominated_strategies_do_not_change_the_value(
        rows in 1usize..4,
        cols in 1usize..4,
        a in prop::collection::vec(-5i64..=5, 9),
        bump in prop::collection::vec(0i64..=3, 3),
        which in 0usize..3,
    ) {
        let entries: Vec<Vec<Q>> = (0..rows).map(|i| (0..cols).map(|j| qi(a[i * 3 + j])).collect()).collect();
        let base = game_value(&GameMatrix::new(entries.clone()).unwrap()).unwrap().value;
        // The row player minimizes: a row no smaller anywhere is never needed.
        let mut more_rows = entries.clone();
        let r = which % rows;
        more_rows.push((0..cols).map(|j| &entries[r][j] + qi(bump[j])).collect());
        prop_assert_eq!(game_value(&GameMatrix::new(more_rows).unwrap()).unwrap().value, base.clone());
        let mut more_cols = entries.clone();
        let c = which % cols;
        for (i, row) in more_cols.iter_mut().enumerate() {
            let v = &entries[i][c] - qi(bump[i]);
            row.push(v);
        }
        prop_assert_eq!(game_value(&GameMatrix::new(more_cols).unwrap()).unwrap().value, base);
    }

    #[test]
    fn refinement_nests_cells_and_mirrors_points(
        qq in 0u32..5,
        y in prop::collection::vec(-1.0f64..=1.0, 1..4),
    ) {
        prop_assume!(y.iter().all(|v| *v != 0.0));
        let coarse = Grid::new(qq, y.len()).unwrap();
        let fine = Grid::new(qq + 1, y.len()).unwrap();
        let c = coarse.cell_index(&y).unwrap();
        prop_assert_eq!(fine.parent(fine.cell_index(&y).unwrap()).unwrap(), c);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert_eq!(coarse.cell_index(&neg).unwrap(), coarse.mirror(c));
        let out: Vec<f64> = y.iter().map(|v| v * 1.5 + v.signum()).collect();
        prop_assert!(coarse.cell_index(&out).is_none());
    }

    #[test]
    fn partitioned_functions_are_odd_and_survive_refinement(
        qq in 0u32..3,
        d in 1usize..3,
        code in any::<u64>(),
        y in prop::collection::vec(-1.0f64..=1.0, 2),
    ) {
        let grid = Grid::new(qq, d).unwrap();
        let cells = grid.canonical_cells();
        prop_assume!(cells.len() <= 40);
        let psi = PartitionedFunction::from_code(grid, &cells, code as u128);
        let y = &y[..d];
        prop_assume!(y.iter().all(|v| *v != 0.0));
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert_eq!(psi.eval(&neg), -psi.eval(y));
        prop_assert_eq!(psi.refine().unwrap().eval(y), psi.eval(y));
        prop_assert_eq!(PartitionedFunction::parse(&psi.to_json()).unwrap(), psi);
    }

    #[test]
    fn integral_families_recover_the_assignment_value(
        which in 0usize..3,
        raw in prop::collection::vec((0usize..6, 0u8..8), 1..8),
        x in prop::collection::vec(prop::bool::ANY, 6),
    ) {
        let f = [Predicate::parity(3), Predicate::majority(3), Predicate::or(3)][which].clone();
        let phi = instance(&f, 6, &raw);
        let x: Vec<i8> = x.into_iter().map(|b| if b { -1 } else { 1 }).collect();
        let subs: Vec<Vec<usize>> = constraint_subsets(&phi).into_iter().collect();
        let fam = LocalDistributionFamily::integral(&x, &subs, 3).unwrap();
        prop_assert!(verify_consistency(&fam).exact);
        prop_assert_eq!(sa_objective(&phi, &fam).unwrap(), estimate_sat(&phi, &x).unwrap());
        prop_assert_eq!(LocalDistributionFamily::parse(&fam.to_json()).unwrap(), fam);
        prop_assert_eq!(CspInstance::parse(&phi.to_json()).unwrap(), phi);
    }

    #[test]
    fn correction_always_returns_a_consistent_family(
        raw in prop::collection::vec((0usize..5, 0u8..8), 1..5),
        w in prop::collection::vec(1u8..6, 64),
    ) {
        let phi = instance(&Predicate::parity(3), 5, &raw);
        let mut fam = LocalDistributionFamily::new(3);
        for (i, s) in constraint_subsets(&phi).into_iter().enumerate() {
            let n = 1usize << s.len();
            let cut: Vec<u8> = w.iter().cycle().skip(i * 3).take(n).copied().collect();
            let total: i64 = cut.iter().map(|&v| v as i64).sum();
            fam.insert(s, cut.iter().map(|&v| q(v as i64, total)).collect()).unwrap();
        }
        let (fixed, rep) = correct_local_distributions(&fam).unwrap();
        prop_assert!(verify_consistency(&fixed).exact);
        prop_assert_eq!(fixed.dists.keys().collect::<Vec<_>>(), fam.dists.keys().collect::<Vec<_>>());
        prop_assert_eq!(rep.already_consistent, verify_consistency(&fam).exact);
    }

    #[test]
    fn bias_maps_are_odd_and_bounded(c in -20i64..=20, p in -100i64..=100) {
        let p = q(p, 100);
        let maps = [
            OddBiasMap::Linear(q(c, 4)),
            OddBiasMap::Piecewise(vec![(q(1, 3), q(c.clamp(-8, 8), 8)), (Q::one(), Q::one())]),
        ];
        for m in maps {
            let v = m.apply(&p);
            prop_assert_eq!(m.apply(&-p.clone()), -v.clone());
            prop_assert!(v.abs() <= Q::one());
        }
    }

    #[test]
    fn predicate_and_moment_files_round_trip(k in 1usize..=5, bits in any::<u64>(), w in prop::collection::vec(0u8..5, 16)) {
        let f = predicate(k, bits);
        prop_assert_eq!(Predicate::parse(&f.to_json()).unwrap(), f);
        let z = moments_of(&distribution(k.min(4), &w));
        prop_assert_eq!(MomentMatrix::parse(&z.to_json()).unwrap(), z);
    }
}

/// Every nonempty symmetric predicate of arity at most 4, checked against the
/// general bias-measure LP.
#[test]
fn symmetric_shortcut_agrees_with_general_search() {
    for k in 1..=4usize {
        for weights in 1u32..1 << (k + 1) {
            let f = Predicate::from_fn(k, |x| weights >> x.count_ones() & 1 == 1).unwrap();
            let quick = charlp_symmetric_check(&f).unwrap();
            let full = charlp_general_search(&f, &charlp_symmetric_support(&f)).unwrap();
            assert_eq!(quick.member, full.measure.is_some(), "k={k} weights={weights:b}");
            if let Some(m) = &full.measure {
                assert!(m.is_vanishing(&f.fourier()));
            } else {
                assert_eq!(full.certificate_verified(), Some(true), "k={k} weights={weights:b}");
            }
        }
    }
}
