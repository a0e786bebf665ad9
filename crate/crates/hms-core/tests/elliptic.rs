use hms_core::classgroups::{kronecker_k, pair_conductor, FieldData, GroupVariant};
use hms_core::cusps::GroupSpec;
use hms_core::elliptic::{
    brute_force_embedding_number, elliptic_counts, local_embedding_number, resolve_elliptic, rotation_distribution,
    torsion_orders, RotationType,
};
use hms_core::field::Elem;
use hms_core::ideals::{ideals_of_norm, primes_up_to_norm, Ideal};

#[test]
fn local_numbers_match_brute_force() {
    let mut checked = 0;
    let mut seen = std::collections::HashSet::new();
    for d in [2i64, 3, 5, 6, 7, 10, 13, 15, 17, 21] {
        let fd = FieldData::new(d).unwrap();
        let f = &fd.field;
        for (pi, pair) in fd.cm.pairs.iter().enumerate() {
            let (_, locals) = pair_conductor(f, pair).unwrap();
            for pr in primes_up_to_norm(d, 27) {
                let k = locals.iter().find(|l| l.prime == pr).map(|l| l.k).unwrap_or(0);
                let chi = kronecker_k(f, pair, &pr).unwrap();
                for e in 0..=4u32 {
                    if pr.norm().pow(e) > 27 {
                        break;
                    }
                    for fl in 0..=k.min(1) {
                        if !seen.insert((d, pr.label(), e, fl, fd.cm.field_of[pi])) {
                            continue;
                        }
                        let closed = local_embedding_number(pr.norm(), chi, e, fl).unwrap();
                        let m = e + fl + 1;
                        let bf = brute_force_embedding_number(f, pair, &pr, e, fl, m, 4_000_000).unwrap();
                        if let Some(bf) = bf {
                            assert_eq!(closed, bf, "D={} {} e={} f={}", d, pr.label(), e, fl);
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 100, "only {} cases checked", checked);
}

#[test]
fn torsion_order_lists() {
    let has = |d: i64, q: u32| torsion_orders(&FieldData::new(d).unwrap()).iter().any(|t| t.q == q && !t.twisted);
    for d in [2, 3, 5, 7, 13] {
        let fd = FieldData::new(d).unwrap();
        let ts = torsion_orders(&fd);
        assert!(ts.iter().any(|t| t.q == 2 && t.u == fd.field.one() && t.t == fd.field.zero()));
        assert!(ts.iter().any(|t| t.q == 3 && t.u == fd.field.one() && t.t == fd.field.one()));
        for t in &ts {
            let disc = &(&t.t * &t.t) - &t.u.scale(&hms_core::field::rat(4));
            assert!(disc.is_totally_negative());
        }
    }
    let fd2 = FieldData::new(2).unwrap();
    assert!(torsion_orders(&fd2).iter().any(|t| t.q == 4 && t.t == Elem::sqrt_d(2)));
    assert!(!has(7, 5));
    assert!(has(5, 5));
    assert!(has(3, 6));
    assert!(!has(7, 4));
}

fn spec(variant: GroupVariant, level: &Ideal, b: &Ideal) -> GroupSpec {
    GroupSpec { variant, level: level.clone(), component: b.clone() }
}

#[test]
fn counts_independent_of_component_and_conserved() {
    for d in [2i64, 3, 5, 6, 7, 10, 15, 21, 30, 34] {
        let fd = FieldData::new(d).unwrap();
        for nn in 1..=12u64 {
            for level in ideals_of_norm(d, nn) {
                let reps = fd.classes.narrow_reps(nn);
                for variant in [GroupVariant::Gamma0, GroupVariant::Gamma0One] {
                    let base = elliptic_counts(&fd, &spec(variant, &level, &reps[0])).unwrap();
                    for b in &reps {
                        let s = spec(variant, &level, b);
                        assert_eq!(elliptic_counts(&fd, &s).unwrap(), base);
                        let types = rotation_distribution(&fd, &s).unwrap();
                        for &(q, m) in &base {
                            let tot: u64 = types.iter().filter(|(t, _)| t.q == q).map(|(_, k)| k).sum();
                            assert_eq!(tot, m);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn no_quintic_points_without_sqrt5() {
    let fd = FieldData::new(7).unwrap();
    let s = spec(GroupVariant::Gamma0, &Ideal::unit(7), &Ideal::unit(7));
    assert!(elliptic_counts(&fd, &s).unwrap().iter().all(|&(q, _)| q != 5));
}

#[test]
fn conjugate_types_resolve_consistently() {
    for q in 2..=12u32 {
        for b in 1..q {
            if num_integer::Integer::gcd(&b, &q) != 1 {
                continue;
            }
            let t = RotationType::new(q, 1, b as i64).unwrap();
            let r = resolve_elliptic(t).unwrap();
            assert!(r.selfints.iter().all(|&x| x <= -2));
            // the same type presented as (q; b, 1) swapped back through λ = b⁻¹
            let u = RotationType::new(q, b as i64, 1).unwrap();
            let binv = u.b;
            let r2 = resolve_elliptic(u).unwrap();
            assert_eq!(RotationType::new(q, 1, binv as i64).unwrap(), u);
            // the two places swapped give the reversed chain and the same local Chern number
            let mut rev = r2.selfints.clone();
            rev.reverse();
            assert_eq!(rev, r.selfints);
            assert_eq!(r2.chern, r.chern);
        }
    }
}
