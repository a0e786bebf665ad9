use hms_core::arith::is_squarefree;
use hms_core::classgroups::FieldData;
use hms_core::dimensions::{box_trace_pairs, dim_cusp_forms, direct_coefficients, enumerate_trace_pairs, hilbert_series, taylor};
use hms_core::field::Place;
use hms_core::field::{rat, Rat};
use hms_core::ideals::ideals_of_norm;
use num_traits::{Signed, Zero};

fn small_fields(max_disc: i64) -> Vec<FieldData> {
    (2..=max_disc)
        .filter(|&d| is_squarefree(d) && (if d % 4 == 1 { d } else { 4 * d }) <= max_disc)
        .map(|d| FieldData::new(d).unwrap())
        .collect()
}

#[test]
fn series_integral_and_matches_direct_sum() {
    let mut checked = 0;
    for fd in small_fields(60) {
        for nm in 1..=12u64 {
            for n in ideals_of_norm(fd.field.d, nm) {
                let s = hilbert_series(&fd, &n).unwrap_or_else(|e| panic!("D={} N={:?}: {}", fd.field.d, n, e));
                let num: Vec<Rat> = s.num.iter().map(|&c| rat(c)).collect();
                let den: Vec<Rat> = s.den.iter().map(|&c| rat(c)).collect();
                assert_eq!(s.den[0], 1);
                let coeffs = taylor(&num, &den, 41);
                let direct = direct_coefficients(&fd, &n, 21).unwrap();
                assert_eq!(&coeffs[..21], &direct[..], "D={} N={:?}", fd.field.d, n);
                for (k, c) in coeffs.iter().enumerate() {
                    assert!(c.is_integer() && !c.is_negative(), "D={} N={:?} k={} c={}", fd.field.d, n, k, c);
                    if k % 2 == 1 || k == 0 {
                        assert!(c.is_zero());
                    }
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn weight_must_be_even() {
    let fd = FieldData::new(5).unwrap();
    let one = hms_core::ideals::Ideal::unit(5);
    assert!(dim_cusp_forms(&fd, &one, 3).is_err());
    assert!(dim_cusp_forms(&fd, &one, 0).is_err());
    assert_eq!(dim_cusp_forms(&fd, &one, 2).unwrap(), 0);
}

/// The algebraic torsion list agrees with a lattice-point scan wherever the scan is affordable.
#[test]
fn trace_pairs_match_box_scan() {
    let mut checked = 0;
    for fd in small_fields(1000) {
        if fd.field.eps_plus.approx_at(Place::V) > 1e5 {
            continue;
        }
        let mut algebraic: Vec<String> = enumerate_trace_pairs(&fd).unwrap().iter().map(|p| format!("{} {}", p.u, p.t)).collect();
        let mut scanned: Vec<String> = box_trace_pairs(&fd).iter().map(|(u, t)| format!("{} {}", u, t)).collect();
        algebraic.sort();
        scanned.sort();
        assert_eq!(algebraic, scanned, "d_F = {}", fd.field.disc);
        checked += 1;
    }
    assert!(checked > 100);
}
