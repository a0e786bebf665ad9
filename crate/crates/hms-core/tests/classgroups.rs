//! Class groups from reduced forms against the analytic class number formula and genus theory.

mod common;

use hms_core::arith::{is_squarefree, kronecker};
use hms_core::classgroups::{imaginary_class_number, prime_discriminants, ClassGroupData};
use hms_core::field::{Elem, RealQuadraticField};
use hms_core::ideals::{ideals_of_norm, Ideal};
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn fields_up_to(max_disc: i64) -> Vec<RealQuadraticField> {
    let mut out: Vec<RealQuadraticField> = (2..=max_disc)
        .filter(|&d| is_squarefree(d))
        .map(|d| RealQuadraticField::new(d).unwrap())
        .filter(|f| f.disc <= max_disc)
        .collect();
    out.sort_by_key(|f| f.disc);
    out
}

#[test]
fn class_numbers_match_analytic_formula() {
    for f in fields_up_to(500) {
        let cg = ClassGroupData::new(&f).unwrap();
        let h = common::analytic_class_number(&f).expect("analytic class number is integral");
        assert_eq!(cg.h, h, "d_F = {}", f.disc);
        let h_plus = if f.unit_norm == -1 { h } else { 2 * h };
        assert_eq!(cg.h_plus, h_plus, "d_F = {}", f.disc);
        assert_eq!(cg.structure.iter().product::<u64>().max(1), cg.h);
        assert_eq!(cg.plus_structure.iter().product::<u64>().max(1), cg.h_plus);
        // genus theory: the 2-rank of Cl⁺ is t − 1
        let t = prime_discriminants(f.disc).len();
        let two_rank = cg.plus_structure.iter().filter(|&&n| n % 2 == 0).count();
        assert_eq!(two_rank, t - 1, "d_F = {}", f.disc);
    }
}

/// h(D) = (w / 2|D|) Σ_{0<a<|D|} −χ(a) a for D < 0.
#[test]
fn imaginary_class_numbers_match_dirichlet() {
    for disc in (3..2000i64).map(|n| -n) {
        let r = if disc % 4 == 0 { disc / 4 } else { disc };
        let fundamental = (disc % 4 == 1 || disc % 4 == -3) && is_squarefree(-disc)
            || disc % 4 == 0 && (r % 4 == -1 || r % 4 == -2 || r % 4 == 2 || r % 4 == 3) && is_squarefree(-r);
        if !fundamental {
            continue;
        }
        let w: i64 = match disc {
            -3 => 6,
            -4 => 4,
            _ => 2,
        };
        let s: i64 = (1..-disc).map(|a| -(kronecker(disc, a) as i64) * a).sum();
        assert_eq!((w * s) % (2 * -disc), 0);
        let h = (w * s / (2 * -disc)) as u64;
        assert_eq!(imaginary_class_number(disc), h, "D = {}", disc);
    }
}

#[test]
fn principal_ideals_are_trivial() {
    for f in fields_up_to(200) {
        let cg = ClassGroupData::new(&f).unwrap();
        let d = f.d;
        for (x, y) in [(1, 1), (3, 1), (2, 5), (7, -3), (11, 2)] {
            let g = Elem::from_ints(d, x, y);
            let i = Ideal::principal(&g).unwrap();
            assert_eq!(cg.wide_class(&i), 0, "d_F = {}", f.disc);
            let tp = if g.is_totally_positive() {
                Some(g.clone())
            } else if (-&g).is_totally_positive() {
                Some(-&g)
            } else {
                None
            };
            if tp.is_some() || f.unit_norm == -1 {
                assert_eq!(cg.narrow_class(&i), 0, "d_F = {}", f.disc);
            } else {
                assert_eq!(cg.narrow_class(&i), cg.sqrt_d_class, "d_F = {}", f.disc);
            }
        }
    }
}

proptest! {
    #[test]
    fn class_map_is_a_homomorphism(k in 0usize..6, n1 in 1u64..80, n2 in 1u64..80, i1 in 0usize..4, i2 in 0usize..4) {
        let d = [3i64, 10, 15, 34, 79, 82][k];
        let f = RealQuadraticField::new(d).unwrap();
        let cg = ClassGroupData::new(&f).unwrap();
        let a = ideals_of_norm(d, n1);
        let b = ideals_of_norm(d, n2);
        prop_assume!(!a.is_empty() && !b.is_empty());
        let (a, b) = (&a[i1 % a.len()], &b[i2 % b.len()]);
        let prod = a.mul(b);
        prop_assert_eq!(cg.narrow_class(&prod), cg.mul_classes(cg.narrow_class(a), cg.narrow_class(b)));
        prop_assert_eq!(cg.wide_class(&prod), cg.wide_of_narrow(cg.narrow_class(&prod)));
        // 𝔞 · conj(𝔞) = (Nm 𝔞) is narrowly trivial
        prop_assert_eq!(cg.narrow_class(&a.mul(&a.conj())), 0);
    }
}

#[test]
fn component_representatives_cover_narrow_classes() {
    for f in fields_up_to(300) {
        let cg = ClassGroupData::new(&f).unwrap();
        let reps = cg.narrow_reps(6);
        assert_eq!(reps.len() as u64, cg.h_plus);
        for (k, r) in reps.iter().enumerate() {
            assert_eq!(cg.narrow_class(r), k);
            let n = r.norm_int().to_u64().unwrap();
            assert!(n % 2 != 0 && n % 3 != 0 && n % 5 != 0);
        }
    }
}
