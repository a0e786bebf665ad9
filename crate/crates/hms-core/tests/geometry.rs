//! Volumes, Chern numbers, Kodaira candidates and the rationality criterion.

use hms_core::classgroups::{FieldData, GroupVariant};
use hms_core::cusps::GroupSpec;
use hms_core::geometry::{
    classify_kodaira, consistency_check, covolume, gamma0_index, hodge_betti, projective_line_size, rationality_criterion, surface_invariants,
    CurveConfig,
};
use hms_core::field::rat;
use hms_core::ideals::{ideals_of_norm, Ideal};
use proptest::prelude::*;

fn level_one(fd: &FieldData, component: usize, variant: GroupVariant) -> GroupSpec {
    let d = fd.field.d;
    GroupSpec { variant, level: Ideal::unit(d), component: fd.classes.narrow_reps(1)[component].clone() }
}

fn chi_k2(disc: i64, component: usize, variant: GroupVariant) -> (i64, i64) {
    let fd = FieldData::from_field(hms_core::field::RealQuadraticField::from_disc(disc).unwrap()).unwrap();
    let inv = surface_invariants(&fd, &level_one(&fd, component, variant), 0).unwrap();
    (inv.chi, inv.c1_sq)
}

#[test]
fn worked_examples() {
    assert_eq!(chi_k2(85, 0, GroupVariant::Gamma0), (4, -8));
    assert_eq!(chi_k2(85, 1, GroupVariant::Gamma0), (4, 0));
    assert_eq!(chi_k2(165, 0, GroupVariant::Gamma0One), (4, -20));
    assert_eq!(chi_k2(165, 0, GroupVariant::Gamma0), (3, -10));
    assert_eq!(chi_k2(44, 0, GroupVariant::Gamma0One), (2, -8));
    assert_eq!(chi_k2(44, 1, GroupVariant::Gamma0One), (3, -2));
    // Q(√3) at level one fixes the volume normalization for Nm ε = +1
    assert_eq!(chi_k2(12, 0, GroupVariant::Gamma0One), (1, -4));
}

#[test]
fn index_matches_projective_line() {
    for d in [2i64, 3, 5, 13, 17] {
        for nm in 1..=40u64 {
            for n in ideals_of_norm(d, nm) {
                let idx = gamma0_index(&n);
                assert_eq!(idx, rat(projective_line_size(&n).unwrap() as i64), "D = {}, level {}", d, n.level_label());
            }
        }
    }
}

#[test]
fn index_is_multiplicative() {
    let d = 5;
    let ideals: Vec<Ideal> = (1..=30u64).flat_map(|n| ideals_of_norm(d, n)).collect();
    for a in &ideals {
        for b in &ideals {
            if a.is_coprime_to(b) {
                assert_eq!(gamma0_index(&a.mul(b)), gamma0_index(a) * gamma0_index(b));
            }
        }
    }
}

#[test]
fn volume_ratio_between_variants() {
    for d in [2i64, 3, 5, 6, 7, 13, 15, 21, 85] {
        let fd = FieldData::new(d).unwrap();
        for nm in 1..=12u64 {
            for n in ideals_of_norm(d, nm) {
                let b = fd.classes.narrow_reps(nm)[0].clone();
                let g0 = GroupSpec { variant: GroupVariant::Gamma0, level: n.clone(), component: b.clone() };
                let g01 = GroupSpec { variant: GroupVariant::Gamma0One, level: n, component: b };
                let ratio = covolume(&fd, &g01).unwrap() / covolume(&fd, &g0).unwrap();
                let expected = if fd.field.unit_norm == 1 { 2 } else { 1 };
                assert_eq!(ratio, rat(expected), "D = {}", d);
                assert_eq!(expected, fd.field.totally_positive_mod_squares() as i64);
            }
        }
    }
}

#[test]
fn consistency_on_small_fields() {
    for d in [2i64, 3, 5, 13, 21] {
        let fd = FieldData::new(d).unwrap();
        for nm in 1..=10u64 {
            for n in ideals_of_norm(d, nm) {
                let r = consistency_check(&fd, &n).unwrap();
                assert!(r.holds, "D = {}, level {}: {:?}", d, n.level_label(), r);
            }
        }
    }
}

proptest! {
    #[test]
    fn kodaira_candidates_shrink_with_blowdowns(chi in 1i64..12, k2 in -40i64..20, b in 0i64..30) {
        let now = classify_kodaira(chi, k2, b).unwrap();
        let later = classify_kodaira(chi, k2, b + 1).unwrap();
        prop_assert!(later.len() <= now.len(), "{:?} -> {:?}", now, later);
        prop_assert!(!now.is_empty());
        prop_assert!(now.iter().all(|k| (-1..=2).contains(k)));
    }

    #[test]
    fn hodge_numbers_follow_noether(chi in 1i64..50, c2 in -20i64..400) {
        let c1 = 12 * chi - c2;
        let (x, h, betti) = hodge_betti(c1, c2).unwrap();
        prop_assert_eq!(x, chi);
        prop_assert_eq!(h.h02 + 1, chi);
        prop_assert_eq!(betti[2], 2 * h.h02 + h.h11);
        let euler = betti[0] - betti[1] + betti[2] - betti[3] + betti[4];
        prop_assert_eq!(euler, c2);
        prop_assert!(hodge_betti(c1 + 1, c2).is_err());
    }

    #[test]
    fn disjoint_negative_curves_are_not_rational(selfints in proptest::collection::vec(-6i64..-1, 1..6)) {
        let n = selfints.len();
        let m: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if i == j { selfints[i] } else { 0 }).collect()).collect();
        let config = CurveConfig { intersections: m, canonical_degrees: None };
        prop_assert!(!rationality_criterion(&config).unwrap());
    }
}

#[test]
fn kodaira_examples() {
    let set = |c, k, b| classify_kodaira(c, k, b).unwrap().into_iter().collect::<Vec<_>>();
    assert_eq!(set(4, -8, 8), vec![1]);
    assert_eq!(set(4, 0, 2), vec![2]);
    assert_eq!(set(2, 0, 0), vec![0, 1]);
    assert_eq!(set(1, 8, 0), vec![-1, 2]);
    assert_eq!(set(1, 10, 0), vec![2]);
    assert!(classify_kodaira(0, 0, 0).is_err());
    assert!(classify_kodaira(1, 0, -1).is_err());
}

#[test]
fn rationality_examples() {
    let cfg = |m: Vec<Vec<i64>>| CurveConfig { intersections: m, canonical_degrees: None };
    assert!(rationality_criterion(&cfg(vec![vec![-1, 1], vec![1, -1]])).unwrap());
    assert!(rationality_criterion(&cfg(vec![vec![-1, 1, 1], vec![1, -2, 0], vec![1, 0, -2]])).unwrap());
    assert!(!rationality_criterion(&cfg(vec![vec![-3]])).unwrap());
    assert!(rationality_criterion(&cfg(vec![vec![0]])).unwrap());
    assert!(rationality_criterion(&cfg(vec![vec![-1, 2], vec![1, -1]])).is_err());
    // two disjoint (−1)-curves stay disjoint
    assert!(!rationality_criterion(&cfg(vec![vec![-1, 0], vec![0, -1]])).unwrap());
}
