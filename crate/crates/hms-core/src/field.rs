//! Exact arithmetic in a real quadratic field Q(√D).
//!
//! Elements are stored in the integral basis (1, ω) with rational coordinates.
//! The place `V` sends √D to the positive root and `W` to the negative one.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_squarefree, isqrt_big, sigma1};
use crate::error::{invalid, HmsError, Result};

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Place {
    V,
    W,
}

impl Place {
    pub fn other(self) -> Place {
        match self {
            Place::V => Place::W,
            Place::W => Place::V,
        }
    }
}

/// x + y·ω with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Elem {
    pub x: Rat,
    pub y: Rat,
    d: i64,
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = if self.d % 4 == 1 { "w" } else { "sqrt" };
        if self.y.is_zero() {
            write!(f, "{}", self.x)
        } else if w == "w" {
            write!(f, "{} + {}*w", self.x, self.y)
        } else {
            write!(f, "{} + {}*sqrt({})", self.x, self.y, self.d)
        }
    }
}

impl Elem {
    pub fn new(d: i64, x: Rat, y: Rat) -> Elem {
        Elem { x, y, d }
    }

    pub fn from_ints(d: i64, x: i64, y: i64) -> Elem {
        Elem::new(d, rat(x), rat(y))
    }

    pub fn from_big(d: i64, x: BigInt, y: BigInt) -> Elem {
        Elem::new(d, Rat::from_integer(x), Rat::from_integer(y))
    }

    pub fn from_rat(d: i64, x: Rat) -> Elem {
        Elem::new(d, x, Rat::zero())
    }

    pub fn zero(d: i64) -> Elem {
        Elem::from_ints(d, 0, 0)
    }

    pub fn one(d: i64) -> Elem {
        Elem::from_ints(d, 1, 0)
    }

    pub fn omega(d: i64) -> Elem {
        Elem::from_ints(d, 0, 1)
    }

    /// √D expressed in the basis (1, ω).
    pub fn sqrt_d(d: i64) -> Elem {
        if d % 4 == 1 {
            Elem::from_ints(d, -1, 2)
        } else {
            Elem::from_ints(d, 0, 1)
        }
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    fn tr_w(&self) -> i64 {
        if self.d % 4 == 1 {
            1
        } else {
            0
        }
    }

    fn nm_w(&self) -> i64 {
        if self.d % 4 == 1 {
            (1 - self.d) / 4
        } else {
            -self.d
        }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.y.is_zero()
    }

    pub fn is_integral(&self) -> bool {
        self.x.is_integer() && self.y.is_integer()
    }

    /// Integer coordinates when the element lies in R.
    pub fn int_coords(&self) -> Option<(BigInt, BigInt)> {
        if self.is_integral() {
            Some((self.x.to_integer(), self.y.to_integer()))
        } else {
            None
        }
    }

    pub fn conj(&self) -> Elem {
        Elem::new(
            self.d,
            &self.x + &self.y * rat(self.tr_w()),
            -self.y.clone(),
        )
    }

    pub fn norm(&self) -> Rat {
        &self.x * &self.x + &self.x * &self.y * rat(self.tr_w()) + &self.y * &self.y * rat(self.nm_w())
    }

    pub fn trace(&self) -> Rat {
        &self.x * rat(2) + &self.y * rat(self.tr_w())
    }

    pub fn inv(&self) -> Result<Elem> {
        let n = self.norm();
        if n.is_zero() {
            return Err(HmsError::Arithmetic("inverse of zero".into()));
        }
        let c = self.conj();
        Ok(Elem::new(self.d, c.x / &n, c.y / &n))
    }

    pub fn div(&self, other: &Elem) -> Result<Elem> {
        Ok(self * &other.inv()?)
    }

    pub fn scale(&self, r: &Rat) -> Elem {
        Elem::new(self.d, &self.x * r, &self.y * r)
    }

    pub fn pow(&self, mut e: u64) -> Elem {
        let mut base = self.clone();
        let mut acc = Elem::one(self.d);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn powi(&self, e: i64) -> Result<Elem> {
        if e >= 0 {
            Ok(self.pow(e as u64))
        } else {
            Ok(self.inv()?.pow(e.unsigned_abs()))
        }
    }

    /// Writes the element as p + q·√D.
    pub fn pq(&self) -> (Rat, Rat) {
        if self.d % 4 == 1 {
            (&self.x + &self.y / rat(2), &self.y / rat(2))
        } else {
            (self.x.clone(), self.y.clone())
        }
    }

    pub fn from_pq(d: i64, p: Rat, q: Rat) -> Elem {
        if d % 4 == 1 {
            Elem::new(d, p - &q, q * rat(2))
        } else {
            Elem::new(d, p, q)
        }
    }

    /// Exact sign of the element at a place.
    pub fn sign_at(&self, place: Place) -> Ordering {
        let (p, mut q) = self.pq();
        if place == Place::W {
            q = -q;
        }
        sign_p_plus_q_sqrt(&p, &q, self.d)
    }

    /// Sign of a_v − m, decided by comparing (m − p)² with q²D.
    pub fn compare_with_integer_at(&self, m: &BigInt, place: Place) -> Ordering {
        let (p, mut q) = self.pq();
        if place == Place::W {
            q = -q;
        }
        sign_p_plus_q_sqrt(&(p - Rat::from_integer(m.clone())), &q, self.d)
    }

    pub fn cmp_at(&self, other: &Elem, place: Place) -> Ordering {
        (self - other).sign_at(place)
    }

    pub fn is_totally_positive(&self) -> bool {
        self.sign_at(Place::V) == Ordering::Greater && self.sign_at(Place::W) == Ordering::Greater
    }

    pub fn is_totally_negative(&self) -> bool {
        self.sign_at(Place::V) == Ordering::Less && self.sign_at(Place::W) == Ordering::Less
    }

    /// Floor of the value at a place; the float is only a starting guess.
    pub fn floor_at(&self, place: Place) -> BigInt {
        let guess = self.approx_at(place).floor();
        let mut n = if guess.is_finite() {
            BigInt::from(guess as i128)
        } else {
            BigInt::zero()
        };
        while self.compare_with_integer_at(&n, place) == Ordering::Less {
            n -= 1;
        }
        while self.compare_with_integer_at(&(&n + 1), place) != Ordering::Less {
            n += 1;
        }
        n
    }

    /// Floating approximation for display and guesses only.
    pub fn approx_at(&self, place: Place) -> f64 {
        let (p, q) = self.pq();
        let s = (self.d as f64).sqrt();
        let qf = q.to_f64().unwrap_or(0.0);
        let pf = p.to_f64().unwrap_or(0.0);
        let (v, w) = (pf + qf * s, pf - qf * s);
        // the conjugate of smaller size is recovered from the exact norm to avoid cancellation
        let nm = self.norm().to_f64().unwrap_or(0.0);
        match place {
            Place::V if v.abs() < w.abs() && w != 0.0 => nm / w,
            Place::V => v,
            Place::W if w.abs() < v.abs() && v != 0.0 => nm / v,
            Place::W => w,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.is_integral() && self.norm().abs().is_one()
    }

    /// Exact square root inside F, if it exists.
    pub fn sqrt(&self) -> Option<Elem> {
        if self.is_zero() {
            return Some(self.clone());
        }
        let (p, q) = self.pq();
        if q.is_zero() {
            if let Some(r) = rat_sqrt(&p) {
                return Some(Elem::from_rat(self.d, r));
            }
            // p = D·s² gives √p = s√D
            let s2 = &p / rat(self.d);
            return rat_sqrt(&s2).map(|s| Elem::from_pq(self.d, Rat::zero(), s));
        }
        // (a + b√D)² = a² + Db² + 2ab√D
        let nm = &p * &p - &q * &q * rat(self.d);
        let n = rat_sqrt(&nm)?;
        for s in [&n, &(-n.clone())] {
            let a2 = (&p + s) / rat(2);
            if let Some(a) = rat_sqrt(&a2) {
                if a.is_zero() {
                    continue;
                }
                let b = &q / (&a * rat(2));
                let cand = Elem::from_pq(self.d, a, b);
                if &(&cand * &cand) == self {
                    return Some(cand);
                }
            }
        }
        None
    }

    pub fn is_square(&self) -> bool {
        self.sqrt().is_some()
    }
}

pub fn rat_sqrt(r: &Rat) -> Option<Rat> {
    if r.is_negative() {
        return None;
    }
    let n = crate::arith::is_square_big(r.numer())?;
    let d = crate::arith::is_square_big(r.denom())?;
    Some(Rat::new(n, d))
}

fn sign_p_plus_q_sqrt(p: &Rat, q: &Rat, d: i64) -> Ordering {
    let sp = p.cmp(&Rat::zero());
    let sq = q.cmp(&Rat::zero());
    if sq == Ordering::Equal {
        return sp;
    }
    if sp == Ordering::Equal || sp == sq {
        return sq;
    }
    // opposite signs: compare p² with q²D
    let lhs = p * p;
    let rhs = q * q * rat(d);
    match lhs.cmp(&rhs) {
        Ordering::Greater => sp,
        Ordering::Less => sq,
        Ordering::Equal => Ordering::Equal,
    }
}

impl<'a> Add<&'a Elem> for &'a Elem {
    type Output = Elem;
    fn add(self, o: &Elem) -> Elem {
        debug_assert_eq!(self.d, o.d);
        Elem::new(self.d, &self.x + &o.x, &self.y + &o.y)
    }
}

impl<'a> Sub<&'a Elem> for &'a Elem {
    type Output = Elem;
    fn sub(self, o: &Elem) -> Elem {
        debug_assert_eq!(self.d, o.d);
        Elem::new(self.d, &self.x - &o.x, &self.y - &o.y)
    }
}

impl<'a> Mul<&'a Elem> for &'a Elem {
    type Output = Elem;
    fn mul(self, o: &Elem) -> Elem {
        debug_assert_eq!(self.d, o.d);
        let yy = &self.y * &o.y;
        Elem::new(
            self.d,
            &self.x * &o.x - &yy * rat(self.nm_w()),
            &self.x * &o.y + &o.x * &self.y + yy * rat(self.tr_w()),
        )
    }
}

impl Neg for &Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        Elem::new(self.d, -self.x.clone(), -self.y.clone())
    }
}

impl Add for Elem {
    type Output = Elem;
    fn add(self, o: Elem) -> Elem {
        &self + &o
    }
}

impl Sub for Elem {
    type Output = Elem;
    fn sub(self, o: Elem) -> Elem {
        &self - &o
    }
}

impl Mul for Elem {
    type Output = Elem;
    fn mul(self, o: Elem) -> Elem {
        &self * &o
    }
}

impl Neg for Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        -&self
    }
}

/// Q(√D) with its unit data.
#[derive(Clone, Debug)]
pub struct RealQuadraticField {
    pub d: i64,
    pub disc: i64,
    pub eps: Elem,
    pub unit_norm: i32,
    pub eps_plus: Elem,
}

impl RealQuadraticField {
    pub fn new(d: i64) -> Result<RealQuadraticField> {
        if d <= 1 || !is_squarefree(d) {
            return invalid(format!("D = {} is not a squarefree integer > 1", d));
        }
        let disc = if d % 4 == 1 { d } else { 4 * d };
        let eps = fundamental_unit(d);
        let unit_norm = if eps.norm().is_one() { 1 } else { -1 };
        let eps_plus = if unit_norm == -1 {
            &eps * &eps
        } else if eps.is_totally_positive() {
            eps.clone()
        } else {
            -&eps
        };
        Ok(RealQuadraticField {
            d,
            disc,
            eps,
            unit_norm,
            eps_plus,
        })
    }

    /// Accepts a field discriminant, or a squarefree D ≡ 2, 3 (mod 4).
    pub fn from_disc(n: i64) -> Result<RealQuadraticField> {
        if n <= 1 {
            return invalid(format!("{} is not a real quadratic discriminant", n));
        }
        if n % 4 == 1 && is_squarefree(n) {
            return RealQuadraticField::new(n);
        }
        if n % 4 == 0 {
            let d = n / 4;
            if (d % 4 == 2 || d % 4 == 3) && is_squarefree(d) {
                return RealQuadraticField::new(d);
            }
        }
        if (n % 4 == 2 || n % 4 == 3) && is_squarefree(n) {
            return RealQuadraticField::new(n);
        }
        invalid(format!("{} is not a fundamental discriminant", n))
    }

    pub fn elem(&self, x: i64, y: i64) -> Elem {
        Elem::from_ints(self.d, x, y)
    }

    pub fn one(&self) -> Elem {
        Elem::one(self.d)
    }

    pub fn zero(&self) -> Elem {
        Elem::zero(self.d)
    }

    pub fn omega(&self) -> Elem {
        Elem::omega(self.d)
    }

    pub fn tr_omega(&self) -> i64 {
        if self.d % 4 == 1 {
            1
        } else {
            0
        }
    }

    pub fn nm_omega(&self) -> i64 {
        if self.d % 4 == 1 {
            (1 - self.d) / 4
        } else {
            -self.d
        }
    }

    /// Order of R×₊₀ / R×², which is 1 or 2.
    pub fn totally_positive_mod_squares(&self) -> u32 {
        if self.unit_norm == -1 {
            1
        } else {
            2
        }
    }

    pub fn zeta_minus_one(&self) -> Rat {
        zeta_minus_one(self.disc)
    }
}

/// Fundamental unit > 1 from the continued fraction of ω.
fn fundamental_unit(d: i64) -> Elem {
    // ω = (P + √N)/Q in reduced-state form
    let n = BigInt::from(d);
    let (mut p, mut q) = if d % 4 == 1 {
        (BigInt::one(), BigInt::from(2))
    } else {
        (BigInt::zero(), BigInt::one())
    };
    let s = isqrt_big(&n);
    let mut seen: HashMap<(BigInt, BigInt), usize> = HashMap::new();
    let mut states: Vec<(BigInt, BigInt)> = Vec::new();
    loop {
        if let Some(&i) = seen.get(&(p.clone(), q.clone())) {
            let mut prod = Elem::one(d);
            for (pp, qq) in &states[i..] {
                let xi = Elem::from_pq(d, Rat::new(pp.clone(), qq.clone()), Rat::new(BigInt::one(), qq.clone()));
                prod = &prod * &xi;
            }
            return prod;
        }
        seen.insert((p.clone(), q.clone()), states.len());
        states.push((p.clone(), q.clone()));
        let a = (&p + &s).div_floor(&q);
        p = &a * &q - &p;
        q = (&n - &p * &p) / &q;
    }
}

/// Siegel's finite sum for ζ_F(−1).
pub fn zeta_minus_one(disc: i64) -> Rat {
    let mut total: u64 = 0;
    let mut b = -(crate::arith::isqrt_u128(disc as u128) as i64);
    while b * b < disc {
        if (b - disc).rem_euclid(2) == 0 && b * b < disc {
            total += sigma1(((disc - b * b) / 4) as u64);
        }
        b += 1;
    }
    Rat::new(BigInt::from(total), BigInt::from(60))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HjFlavor {
    Finite,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HJExpansion {
    pub preperiod: Vec<i64>,
    pub period: Vec<i64>,
    pub flavor: HjFlavor,
}

/// Periodic expansion together with the complete quotients w_j of the period.
#[derive(Clone, Debug)]
pub struct PeriodicHJ {
    pub expansion: HJExpansion,
    pub quotients: Vec<Elem>,
}

/// HJ expansion of a rational > 1.
pub fn hj_expand_rational(x: &Rat, max_steps: usize) -> Result<HJExpansion> {
    if *x <= rat(1) {
        return invalid(format!("HJ expansion needs a value > 1, got {}", x));
    }
    let mut out = Vec::new();
    let mut cur = x.clone();
    for _ in 0..max_steps {
        if cur.is_integer() {
            out.push(cur.to_integer().to_i64().expect("partial quotient overflow"));
            return Ok(HJExpansion {
                preperiod: out,
                period: vec![],
                flavor: HjFlavor::Finite,
            });
        }
        let b = cur.ceil();
        out.push(b.to_integer().to_i64().expect("partial quotient overflow"));
        cur = (b - cur).recip();
    }
    Err(HmsError::Budget(format!("HJ expansion of {} exceeded {} steps", x, max_steps)))
}

/// HJ expansion of an element at place V; rational elements give finite expansions.
pub fn hj_expand(x: &Elem, max_steps: usize) -> Result<HJExpansion> {
    if x.is_rational() {
        hj_expand_rational(&x.x, max_steps)
    } else {
        Ok(hj_expand_periodic(x, max_steps)?.expansion)
    }
}

/// Periodic HJ expansion with exact state (P + √N)/Q, Q | N − P².
pub fn hj_expand_periodic(x: &Elem, max_steps: usize) -> Result<PeriodicHJ> {
    let d = x.d();
    if x.is_rational() {
        return invalid("periodic HJ expansion needs an irrational element");
    }
    if x.compare_with_integer_at(&BigInt::one(), Place::V) != Ordering::Greater {
        return invalid(format!("HJ expansion needs a value > 1 at v, got {}", x));
    }
    let (p0, q0) = x.pq();
    // x = (a + b√D)/c with integers
    let c = p0.denom().lcm(q0.denom());
    let mut a = (&p0 * Rat::from_integer(c.clone())).to_integer();
    let mut b = (&q0 * Rat::from_integer(c.clone())).to_integer();
    let mut c = c;
    if b.is_negative() {
        a = -a;
        b = -b;
        c = -c;
    }
    let n0 = &b * &b * BigInt::from(d);
    let (mut p, n, mut q) = if (&n0 - &a * &a).is_multiple_of(&c) {
        (a, n0, c)
    } else {
        let ac = c.abs();
        (&a * &ac, &n0 * &c * &c, &c * &ac)
    };
    let s = isqrt_big(&n);
    let to_elem = |p: &BigInt, q: &BigInt| -> Elem {
        // √N = m√D with m² D = N
        let m = isqrt_big(&(&n / BigInt::from(d)));
        Elem::from_pq(d, Rat::new(p.clone(), q.clone()), Rat::new(m, q.clone()))
    };
    let mut seen: HashMap<(BigInt, BigInt), usize> = HashMap::new();
    let mut bs: Vec<i64> = Vec::new();
    let mut states: Vec<(BigInt, BigInt)> = Vec::new();
    for _ in 0..max_steps {
        if let Some(&i) = seen.get(&(p.clone(), q.clone())) {
            let quotients = states[i..].iter().map(|(pp, qq)| to_elem(pp, qq)).collect();
            return Ok(PeriodicHJ {
                expansion: HJExpansion {
                    preperiod: bs[..i].to_vec(),
                    period: bs[i..].to_vec(),
                    flavor: HjFlavor::Periodic,
                },
                quotients,
            });
        }
        seen.insert((p.clone(), q.clone()), states.len());
        states.push((p.clone(), q.clone()));
        let fl: BigInt = if q.is_positive() {
            (&p + &s).div_floor(&q)
        } else {
            (-(&p + &s) - BigInt::one()).div_floor(&(-q.clone()))
        };
        let bb: BigInt = fl + BigInt::one();
        bs.push(bb.to_i64().expect("partial quotient overflow"));
        let p2 = &bb * &q - &p;
        q = (&p2 * &p2 - &n) / &q;
        p = p2;
    }
    Err(HmsError::Budget(format!("no period found for {} within {} steps", x, max_steps)))
}

/// Evaluates a finite HJ expansion b₀ − 1/(b₁ − 1/(…)).
pub fn hj_eval(bs: &[i64]) -> Rat {
    let mut acc: Option<Rat> = None;
    for &b in bs.iter().rev() {
        acc = Some(match acc {
            None => rat(b),
            Some(v) => rat(b) - v.recip(),
        });
    }
    acc.unwrap_or_else(Rat::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fields_units() {
        let f5 = RealQuadraticField::new(5).unwrap();
        assert_eq!(f5.disc, 5);
        assert_eq!(f5.eps, f5.omega());
        assert_eq!(f5.unit_norm, -1);
        assert_eq!(f5.eps_plus, &f5.eps * &f5.eps);
        let f3 = RealQuadraticField::new(3).unwrap();
        assert_eq!(f3.disc, 12);
        assert_eq!(f3.eps, f3.elem(2, 1));
        assert_eq!(f3.eps_plus, f3.eps);
        let f2 = RealQuadraticField::new(2).unwrap();
        assert_eq!(f2.eps, f2.elem(1, 1));
        assert_eq!(f2.unit_norm, -1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RealQuadraticField::new(4).is_err());
        assert!(RealQuadraticField::new(1).is_err());
        assert!(RealQuadraticField::new(-3).is_err());
    }

    #[test]
    fn from_disc_reads_both_conventions() {
        assert_eq!(RealQuadraticField::from_disc(12).unwrap().d, 3);
        assert_eq!(RealQuadraticField::from_disc(11).unwrap().disc, 44);
        assert_eq!(RealQuadraticField::from_disc(85).unwrap().d, 85);
        assert!(RealQuadraticField::from_disc(16).is_err());
    }

    #[test]
    fn element_basics() {
        let f5 = RealQuadraticField::new(5).unwrap();
        assert!(!f5.omega().is_totally_positive());
        let f3 = RealQuadraticField::new(3).unwrap();
        assert_eq!(f3.elem(2, 1).norm(), rat(1));
        let f2 = RealQuadraticField::new(2).unwrap();
        assert_eq!(f2.omega().trace(), rat(0));
        let a = f5.elem(3, -7);
        assert_eq!(a.conj().conj(), a);
        assert_eq!(&a * &a.inv().unwrap(), f5.one());
    }

    #[test]
    fn hj_examples() {
        let e = hj_expand_rational(&ratio(7, 3), 100).unwrap();
        assert_eq!(e.preperiod, vec![3, 2, 2]);
        assert_eq!(hj_expand_rational(&ratio(3, 2), 100).unwrap().preperiod, vec![2, 2]);
        let x = Elem::from_pq(5, ratio(3, 2), ratio(1, 2));
        let p = hj_expand(&x, 100).unwrap();
        assert_eq!(p.preperiod, Vec::<i64>::new());
        assert_eq!(p.period, vec![3]);
    }

    #[test]
    fn zeta_values() {
        assert_eq!(zeta_minus_one(5), ratio(1, 30));
        assert_eq!(zeta_minus_one(8), ratio(1, 12));
        assert_eq!(zeta_minus_one(12), ratio(1, 6));
    }

    #[test]
    fn sqrt_in_field() {
        let f3 = RealQuadraticField::new(3).unwrap();
        let t = f3.elem(1, 1);
        assert_eq!((&t * &t).sqrt().map(|s| &s * &s), Some(&t * &t));
        assert!(f3.elem(3, 0).is_square());
        assert!(!f3.elem(2, 0).is_square());
        assert!(!f3.eps.is_square());
    }
}
