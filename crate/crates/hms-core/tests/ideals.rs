//! Ideal arithmetic against counting and multiplicativity oracles.

use hms_core::arith::{divisors_u64, kronecker};
use hms_core::field::{rat, Elem, RealQuadraticField};
use hms_core::ideals::{ideals_of_norm, parse_level, Ideal, ResidueRing};
use proptest::prelude::*;

const DS: [i64; 6] = [2, 3, 5, 13, 85, 165];

/// Number of integral ideals of norm n: Σ_{m | n} χ_F(m).
fn dedekind_coefficient(disc: i64, n: u64) -> i64 {
    divisors_u64(n).into_iter().map(|m| kronecker(disc, m as i64) as i64).sum()
}

#[test]
fn ideal_counts_match_dedekind_zeta() {
    for &d in &DS {
        let f = RealQuadraticField::new(d).unwrap();
        for n in 1..=200u64 {
            let ideals = ideals_of_norm(d, n);
            assert_eq!(ideals.len() as i64, dedekind_coefficient(f.disc, n), "D = {}, n = {}", d, n);
            for i in &ideals {
                assert_eq!(i.norm_u64(), n);
                assert!(i.is_integral());
            }
        }
    }
}

fn ideal_strategy() -> impl Strategy<Value = (i64, Ideal, Ideal)> {
    (0..DS.len(), 1u64..60, 1u64..60, 0usize..4, 0usize..4).prop_filter_map("norm has ideals", |(k, n1, n2, i1, i2)| {
        let d = DS[k];
        let a = ideals_of_norm(d, n1);
        let b = ideals_of_norm(d, n2);
        if a.is_empty() || b.is_empty() {
            return None;
        }
        Some((d, a[i1 % a.len()].clone(), b[i2 % b.len()].clone()))
    })
}

proptest! {
    #[test]
    fn multiplicative_structure((d, a, b) in ideal_strategy()) {
        let ab = a.mul(&b);
        prop_assert_eq!(ab.norm(), a.norm() * b.norm());
        prop_assert_eq!(&ab, &b.mul(&a));
        prop_assert!(a.divides(&ab) && b.divides(&ab));
        prop_assert_eq!(ab.div(&b), a.clone());
        prop_assert_eq!(a.mul(&a.inv()), Ideal::unit(d));
        let n = a.norm_int().to_string().parse::<i64>().unwrap();
        prop_assert_eq!(a.mul(&a.conj()), Ideal::from_int(d, n).unwrap());
        // gcd and lcm
        let g = a.add(&b);
        let l = a.intersect(&b);
        prop_assert!(g.divides(&a) && g.divides(&b));
        prop_assert_eq!(g.mul(&l), ab.clone());
    }

    #[test]
    fn factorization_reconstructs((d, a, b) in ideal_strategy()) {
        let ab = a.mul(&b);
        let prod = ab.factor().into_iter().fold(Ideal::unit(d), |acc, (p, e)| acc.mul(&p.ideal.pow(e)));
        prop_assert_eq!(prod, ab.clone());
        for (p, e) in ab.factor() {
            prop_assert_eq!(e, a.valuation(&p) + b.valuation(&p));
        }
    }

    #[test]
    fn labels_roundtrip((d, a, _b) in ideal_strategy()) {
        prop_assert_eq!(parse_level(d, &a.level_label()).unwrap(), a.clone());
    }

    #[test]
    fn principal_ideal_norms(k in 0..DS.len(), x in -40i64..40, y in -40i64..40) {
        prop_assume!(x != 0 || y != 0);
        let d = DS[k];
        let g = Elem::from_ints(d, x, y);
        let i = Ideal::principal(&g).unwrap();
        let nm = g.norm();
        prop_assert_eq!(i.norm(), if nm < rat(0) { -nm } else { nm });
        prop_assert!(i.contains(&g));
        prop_assert!(i.contains(&(&g * &Elem::omega(d))));
    }

    #[test]
    fn residue_ring_sizes((_d, a, _b) in ideal_strategy()) {
        let ring = ResidueRing::new(&a).unwrap();
        prop_assert_eq!(ring.size(), a.norm_u64());
        // φ(𝔞) = Nm 𝔞 ∏ (1 − Nm 𝔭⁻¹)
        let mut phi = rat(a.norm_u64() as i64);
        for (p, _) in a.factor() {
            let np = rat(p.norm() as i64);
            phi = phi * (&np - rat(1)) / np;
        }
        prop_assert_eq!(rat(ring.unit_count() as i64), phi);
    }
}

#[test]
fn level_label_parsing() {
    let two = Ideal::from_int(5, 2).unwrap();
    assert_eq!(two.level_label(), "4.2.0");
    assert_eq!(parse_level(5, "4.2.0").unwrap(), two);
    assert_eq!(parse_level(5, "4").unwrap(), two);
    assert_eq!(parse_level(5, "4.0").unwrap(), two);
    assert!(parse_level(5, "2").is_err());
    assert!(parse_level(5, "11").is_err(), "two ideals of norm 11 need an index");
    assert!(parse_level(5, "0.1.0").is_err());
    assert!(parse_level(5, "x").is_err());
}
