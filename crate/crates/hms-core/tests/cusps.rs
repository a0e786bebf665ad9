use hms_core::classgroups::{ClassGroupData, GroupVariant};
use hms_core::cusps::*;
use hms_core::field::RealQuadraticField;
use hms_core::ideals::{ideals_of_norm, Ideal};

const VARIANTS: [GroupVariant; 4] = [GroupVariant::Gamma0, GroupVariant::Gamma0One, GroupVariant::Gamma1, GroupVariant::Gamma1One];

fn levels(d: i64, max_norm: u64) -> Vec<Ideal> {
    (1..=max_norm).flat_map(|n| ideals_of_norm(d, n)).collect()
}

fn squarefree(n: &Ideal) -> bool {
    n.factor().iter().all(|(_, e)| *e == 1)
}

#[test]
fn count_matches_enumeration_and_types_verify() {
    for d in [2i64, 3, 5, 6, 10, 15, 21] {
        let f = RealQuadraticField::new(d).unwrap();
        let cg = ClassGroupData::new(&f).unwrap();
        for n in levels(d, 12) {
            let reps = cg.narrow_reps(n.norm_u64());
            for v in VARIANTS {
                let mut total = 0u64;
                for b in &reps {
                    let spec = GroupSpec { variant: v, level: n.clone(), component: b.clone() };
                    let cusps = enumerate_cusps(&f, &cg, &spec).unwrap();
                    total += cusps.len() as u64;
                    if v == GroupVariant::Gamma1 && !squarefree(&n) {
                        continue;
                    }
                    for c in &cusps {
                        let t = cusp_type(&f, c, &spec).unwrap();
                        verify_cusp_type(&f, &spec, c, &t, 7, 10)
                            .unwrap_or_else(|e| panic!("D={} N={:?} {:?} b={:?} cusp ({}:{}): {}", d, n, v, b, c.a, c.c, e));
                        let cyc = resolve_cusp(&f, &t).unwrap();
                        assert!(cyc.special || cyc.selfints.iter().all(|&x| x <= -2));
                    }
                }
                let closed = cusp_count(&f, &cg, &n, v).unwrap();
                assert_eq!(closed, total, "D={} N={:?} {:?}", d, n, v);
            }
        }
    }
}
