//! Hilbert series of cusp forms for Γ₀(𝔑) from the trace formula, as an exact rational function in T.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::classgroups::{divisors_of_ideal, FieldData};
use crate::elliptic::adelic_embedding_number;
use crate::error::{HmsError, Result};
use crate::field::{rat, zeta_minus_one, Elem, Place, Rat};
use crate::ideals::Ideal;

/// A pair (u, t) with u ∈ R×₊/R×² and t² − 4u totally negative.
#[derive(Clone, Debug)]
pub struct TracePair {
    pub u: Elem,
    pub t: Elem,
    pub conductor: Ideal,
    /// Index into the torsion pair list of the field.
    pub pair_index: usize,
}

/// Trace pairs from the algebraic torsion list of the field.
pub fn enumerate_trace_pairs(fd: &FieldData) -> Result<Vec<TracePair>> {
    let f = &fd.field;
    let mut out = Vec::with_capacity(fd.cm.pairs.len());
    for (pair_index, p) in fd.cm.pairs.iter().enumerate() {
        if !(&(&p.t * &p.t) - &p.u.scale(&rat(4))).is_totally_negative() {
            return Err(HmsError::Integrity(format!("torsion pair ({}, {}) is not elliptic in {}", p.u, p.t, f.disc)));
        }
        out.push(TracePair { u: p.u.clone(), t: p.t.clone(), conductor: fd.cm.conductors[pair_index].clone(), pair_index });
    }
    Ok(out)
}

/// Lattice points t of R in the box |t_v| < 2√u_v with t² − 4u totally negative, for u = 1 and,
/// when it is not a square, u = ε⁺. The box has about ε⁺/√d_F points, so this is only practical
/// for fields with a small unit.
pub fn box_trace_pairs(fd: &FieldData) -> Vec<(Elem, Elem)> {
    let f = &fd.field;
    let mut us = vec![f.one()];
    if !f.eps_plus.is_square() {
        us.push(f.eps_plus.clone());
    }
    let omega = f.omega();
    let (w_v, w_w) = (omega.approx_at(Place::V), omega.approx_at(Place::W));
    let mut out = Vec::new();
    for u in &us {
        let four_u = u.scale(&rat(4));
        let (bv, bw) = (2.0 * u.approx_at(Place::V).sqrt(), 2.0 * u.approx_at(Place::W).sqrt());
        let ymax = ((bv + bw) / (w_v - w_w).abs()).ceil() as i64 + 1;
        for y in -ymax..=ymax {
            let lo = (-bv - y as f64 * w_v).floor() as i64 - 1;
            let hi = (bv - y as f64 * w_v).ceil() as i64 + 1;
            for x in lo..=hi {
                let t = f.elem(x, y);
                if (&(&t * &t) - &four_u).is_totally_negative() {
                    out.push((u.clone(), t));
                }
            }
        }
    }
    out
}

/// A = −h⁺(R) and B = ½ |ζ_F(−1)| h(R) Nm(𝔑) ∏_{𝔭|𝔑} (1 + Nm(𝔭)⁻¹).
pub fn term_ab(fd: &FieldData, n: &Ideal) -> (Rat, Rat) {
    let a = -rat(fd.classes.h_plus as i64);
    let z = zeta_minus_one(fd.field.disc);
    let z = if z.is_negative() { -z } else { z };
    let mut b = z * rat(fd.classes.h as i64) * n.norm() / rat(2);
    for (pr, _) in n.factor() {
        let np = rat(pr.norm() as i64);
        b = b * (&np + rat(1)) / np;
    }
    (a, b)
}

/// C(u,t) = ½ Σ_{𝔤 | 𝔣(u,t)} h(S_𝔤)/[S_𝔤× : R×] · m(Ŝ_𝔤, 𝒪̂; 𝒪̂×).
pub fn term_c(fd: &FieldData, pair: &TracePair, n: &Ideal) -> Result<Rat> {
    let ki = fd.cm.field_of[pair.pair_index];
    let mut c = rat(0);
    for g in divisors_of_ideal(&pair.conductor) {
        let od = fd
            .cm
            .order_data(pair.pair_index, &g)
            .ok_or_else(|| HmsError::Integrity("order of a conductor divisor missing".into()))?;
        let m = adelic_embedding_number(&fd.field, &fd.cm, ki, &g, n)?;
        c += Rat::new(BigInt::from(od.h_s * m), BigInt::from(od.w_s));
    }
    Ok(c / rat(2))
}

// Polynomials over Q, lowest degree first

pub type Poly = Vec<Rat>;

fn trim(mut p: Poly) -> Poly {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn poly_add(a: &[Rat], b: &[Rat]) -> Poly {
    let mut out = vec![rat(0); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
    }
    trim(out)
}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![rat(0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn poly_scale(a: &[Rat], s: &Rat) -> Poly {
    trim(a.iter().map(|c| c * s).collect())
}

fn poly_divrem(a: &[Rat], b: &[Rat]) -> (Poly, Poly) {
    let b = trim(b.to_vec());
    let mut r = trim(a.to_vec());
    if r.len() < b.len() {
        return (vec![], r);
    }
    let lead = b.last().expect("nonzero divisor").clone();
    let mut q = vec![rat(0); r.len() - b.len() + 1];
    while r.len() >= b.len() && !r.is_empty() {
        let shift = r.len() - b.len();
        let coef = r.last().unwrap() / &lead;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= &coef * c;
        }
        q[shift] = coef;
        r = trim(r);
    }
    (trim(q), r)
}

fn poly_gcd(a: &[Rat], b: &[Rat]) -> Poly {
    let (mut x, mut y) = (trim(a.to_vec()), trim(b.to_vec()));
    while !y.is_empty() {
        let (_, r) = poly_divrem(&x, &y);
        x = y;
        y = r;
    }
    x
}

/// Polynomial in T² from one in x, x ↦ T².
fn even_embed(p: &[Rat]) -> Poly {
    let mut out = vec![rat(0); 2 * p.len().max(1) - 1];
    for (i, c) in p.iter().enumerate() {
        out[2 * i] = c.clone();
    }
    trim(out)
}

/// Power series coefficients of num/den up to T^{len−1}; den(0) must be nonzero.
pub fn taylor(num: &[Rat], den: &[Rat], len: usize) -> Vec<Rat> {
    let d0 = den[0].clone();
    let mut out: Vec<Rat> = Vec::with_capacity(len);
    for k in 0..len {
        let mut s = num.get(k).cloned().unwrap_or_else(|| rat(0));
        for j in 1..den.len().min(k + 1) {
            s -= &den[j] * &out[k - j];
        }
        out.push(s / &d0);
    }
    out
}

/// Power sums s_k = α^k + β^k in F for the roots of x² − t x + u.
fn power_sums(t: &Elem, u: &Elem, len: usize) -> Vec<Elem> {
    let mut s = vec![Elem::from_ints(t.d(), 2, 0), t.clone()];
    while s.len() < len {
        let k = s.len();
        s.push(&(t * &s[k - 1]) - &(u * &s[k - 2]));
    }
    s.truncate(len);
    s
}

/// ∏_θ (1 − θ x) from the power sums p_k = Σ θ^k, k = 1..4, by Newton's identities.
fn reciprocal_char_poly(p: &[Rat]) -> Poly {
    let mut e = vec![rat(1)];
    for k in 1..=4usize {
        let mut s = rat(0);
        for i in 1..=k {
            let term = &e[k - i] * &p[i];
            if i % 2 == 1 {
                s += term;
            } else {
                s -= term;
            }
        }
        e.push(s / rat(k as i64));
    }
    trim((0..=4).map(|k| if k % 2 == 0 { e[k].clone() } else { -e[k].clone() }).collect())
}

/// Σ_{m≥1} Nm(D_{2m−2}) T^{2m} as num/den over Q.
pub fn norm_series(t: &Elem, u: &Elem) -> (Poly, Poly) {
    let s = power_sums(t, u, 9);
    // θ² runs over products of squared roots: power sums Nm(s_{2k})
    let p2: Vec<Rat> = (0..=4).map(|k| s[2 * k].norm()).collect();
    let q2 = reciprocal_char_poly(&p2);
    let ds = direct_norms(t, u, 8);
    let evens: Vec<Rat> = (0..4).map(|j| ds[2 * j].clone()).collect();
    let mut num = poly_mul(&evens, &q2);
    num.truncate(4);
    let num = trim(num);
    // shift by T²
    let mut num_t = vec![rat(0), rat(0)];
    num_t.extend(even_embed(&num));
    (trim(num_t), even_embed(&q2))
}

/// Nm(D_k) for k < len with Σ D_k T^k = 1/(1 − tT + uT²).
pub fn direct_norms(t: &Elem, u: &Elem, len: usize) -> Vec<Rat> {
    let mut d = vec![Elem::one(t.d()), t.clone()];
    while d.len() < len {
        let k = d.len();
        d.push(&(t * &d[k - 1]) - &(u * &d[k - 2]));
    }
    d.truncate(len);
    d.iter().map(|x| x.norm()).collect()
}

/// Hilbert series as a normalized rational function with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalSeries {
    pub num: Vec<i64>,
    pub den: Vec<i64>,
}

impl RationalSeries {
    pub fn coefficients(&self, len: usize) -> Vec<Rat> {
        let num: Poly = self.num.iter().map(|&c| rat(c)).collect();
        let den: Poly = self.den.iter().map(|&c| rat(c)).collect();
        taylor(&num, &den, len)
    }
}

/// Serialized form {num, den, dims}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub num: Vec<i64>,
    pub den: Vec<i64>,
    pub dims: BTreeMap<u32, i64>,
}

/// Sum of fractions with a shared denominator built from distinct factors.
struct FractionSum {
    factors: Vec<Poly>,
    terms: Vec<(Poly, usize)>,
}

impl FractionSum {
    fn add(&mut self, num: Poly, den: Poly) {
        let idx = match self.factors.iter().position(|f| *f == den) {
            Some(i) => i,
            None => {
                self.factors.push(den);
                self.factors.len() - 1
            }
        };
        self.terms.push((num, idx));
    }

    fn total(&self) -> (Poly, Poly) {
        let den = self.factors.iter().fold(vec![rat(1)], |acc, f| poly_mul(&acc, f));
        let mut num: Poly = vec![];
        for (p, idx) in &self.terms {
            let others = self
                .factors
                .iter()
                .enumerate()
                .filter(|(j, _)| j != idx)
                .fold(vec![rat(1)], |acc, (_, f)| poly_mul(&acc, f));
            num = poly_add(&num, &poly_mul(p, &others));
        }
        (num, den)
    }
}

fn to_integer_poly(p: &[Rat]) -> Result<Vec<i64>> {
    p.iter()
        .map(|c| {
            if !c.is_integer() {
                return Err(HmsError::Integrity(format!("non-integral coefficient {}", c)));
            }
            c.to_integer().to_i64().ok_or_else(|| HmsError::Arithmetic("coefficient overflow".into()))
        })
        .collect()
}

/// Exact rational function A T² + B T (T d/dT)² (T/(1 − T²)) + Σ_{(u,t)} C(u,t) Σ_m Nm(D_{2m−2}) T^{2m}.
pub fn hilbert_series(fd: &FieldData, n: &Ideal) -> Result<RationalSeries> {
    let (a, b) = term_ab(fd, n);
    let mut sum = FractionSum { factors: vec![], terms: vec![] };
    sum.add(vec![rat(0), rat(0), a], vec![rat(1)]);
    // T²(1 + 6T² + T⁴)/(1 − T²)³
    let bnum = vec![rat(0), rat(0), rat(1), rat(0), rat(6), rat(0), rat(1)];
    let bden = vec![rat(1), rat(0), rat(-3), rat(0), rat(3), rat(0), rat(-1)];
    sum.add(poly_scale(&bnum, &b), bden);
    for pair in enumerate_trace_pairs(fd)? {
        let c = term_c(fd, &pair, n)?;
        if c.is_zero() {
            continue;
        }
        let (num, den) = norm_series(&pair.t, &pair.u);
        sum.add(poly_scale(&num, &c), den);
    }
    let (num, den) = sum.total();
    let g = poly_gcd(&num, &den);
    let (mut num, _) = poly_divrem(&num, &g);
    let (mut den, _) = poly_divrem(&den, &g);
    if num.is_empty() {
        return Ok(RationalSeries { num: vec![], den: vec![1] });
    }
    let c0 = den[0].clone();
    num = poly_scale(&num, &c0.recip());
    den = poly_scale(&den, &c0.recip());
    // clear denominators of the denominator polynomial
    let l = den.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    if !l.is_one() {
        return Err(HmsError::Integrity("denominator polynomial is not integral".into()));
    }
    Ok(RationalSeries { num: to_integer_poly(&num)?, den: to_integer_poly(&den)? })
}

/// Coefficients of the trace formula evaluated term by term, through T^{len−1}.
pub fn direct_coefficients(fd: &FieldData, n: &Ideal, len: usize) -> Result<Vec<Rat>> {
    let (a, b) = term_ab(fd, n);
    let mut out = vec![rat(0); len];
    if len > 2 {
        out[2] += a;
    }
    for (k, slot) in out.iter_mut().enumerate().skip(2).step_by(2) {
        *slot += &b * rat(((k - 1) * (k - 1)) as i64);
    }
    for pair in enumerate_trace_pairs(fd)? {
        let c = term_c(fd, &pair, n)?;
        if c.is_zero() {
            continue;
        }
        let ds = direct_norms(&pair.t, &pair.u, len);
        for (k, slot) in out.iter_mut().enumerate().skip(2).step_by(2) {
            *slot += &c * &ds[k - 2];
        }
    }
    Ok(out)
}

/// dim S_k(Γ₀(𝔑)) summed over components, for even k ≥ 2.
pub fn dim_cusp_forms(fd: &FieldData, n: &Ideal, k: u32) -> Result<u64> {
    if k < 2 || k % 2 == 1 {
        return Err(HmsError::InvalidInput(format!("weight {} must be even and at least 2", k)));
    }
    let s = hilbert_series(fd, n)?;
    let c = s.coefficients(k as usize + 1).pop().unwrap();
    if !c.is_integer() || c.is_negative() {
        return Err(HmsError::Integrity(format!("dim S_{} = {} is not a nonnegative integer", k, c)));
    }
    c.to_integer().to_u64().ok_or_else(|| HmsError::Arithmetic("dimension overflow".into()))
}

/// Series record with dimensions for even k ≤ 20.
pub fn series_record(fd: &FieldData, n: &Ideal) -> Result<SeriesRecord> {
    let s = hilbert_series(fd, n)?;
    let coeffs = s.coefficients(21);
    let mut dims = BTreeMap::new();
    for k in (2..=20).step_by(2) {
        let c = &coeffs[k];
        if !c.is_integer() {
            return Err(HmsError::Integrity(format!("dim S_{} = {} is not an integer", k, c)));
        }
        dims.insert(k as u32, c.to_integer().to_i64().unwrap());
    }
    Ok(SeriesRecord { num: s.num, den: s.den, dims })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ab_examples() {
        let fd = FieldData::new(5).unwrap();
        let (a, b) = term_ab(&fd, &Ideal::unit(5));
        assert_eq!(a, rat(-1));
        assert_eq!(b, Rat::new(BigInt::from(1), BigInt::from(60)));
        let (_, b2) = term_ab(&fd, &Ideal::from_int(5, 2).unwrap());
        assert_eq!(b2, Rat::new(BigInt::from(1), BigInt::from(12)));
    }

    #[test]
    fn norm_series_matches_recurrence() {
        let fd = FieldData::new(5).unwrap();
        for p in &fd.cm.pairs {
            let (num, den) = norm_series(&p.t, &p.u);
            let tay = taylor(&num, &den, 30);
            let ds = direct_norms(&p.t, &p.u, 30);
            for k in (2..30).step_by(2) {
                assert_eq!(tay[k], ds[k - 2]);
                assert!(tay[k - 1].is_zero());
            }
        }
    }

    #[test]
    fn q_sqrt5_level_one() {
        let fd = FieldData::new(5).unwrap();
        assert_eq!(dim_cusp_forms(&fd, &Ideal::unit(5), 2).unwrap(), 0);
    }
}
