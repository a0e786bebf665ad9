//! Fractional ideals of R as Hermite-form lattices, prime ideals, residue rings
//! and the unit groups (R/𝔐)×.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factor_big, factor_u64, kronecker, sqrt_mod_p};
use crate::error::{invalid, HmsError, Result};
use crate::field::{Elem, Rat};

/// (1/den)·(aZ + (b + cω)Z) with a, c > 0, c | a, c | b, 0 ≤ b < a.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ideal {
    d: i64,
    pub den: BigInt,
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
}

impl fmt::Debug for Ideal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "<{}, {} + {}w>", self.a, self.b, self.c)
        } else {
            write!(f, "<{}, {} + {}w>/{}", self.a, self.b, self.c, self.den)
        }
    }
}

/// Serialized two-element form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdealLabel {
    pub den: String,
    pub n: String,
    pub gen: [String; 2],
    pub norm: String,
}

fn omega_data(d: i64) -> (BigInt, BigInt) {
    if d % 4 == 1 {
        (BigInt::one(), BigInt::from((1 - d) / 4))
    } else {
        (BigInt::zero(), BigInt::from(-d))
    }
}

/// ω·(x + yω) in coordinates.
fn mul_omega(d: i64, x: &BigInt, y: &BigInt) -> (BigInt, BigInt) {
    let (t, n) = omega_data(d);
    // ω(x + yω) = xω + y(tω − n)
    (-(y * &n), x + y * &t)
}

fn mul_coords(d: i64, x1: &BigInt, y1: &BigInt, x2: &BigInt, y2: &BigInt) -> (BigInt, BigInt) {
    let (t, n) = omega_data(d);
    let yy = y1 * y2;
    (x1 * x2 - &yy * &n, x1 * y2 + x2 * y1 + yy * t)
}

/// Hermite form (a, b, c) of the Z-lattice spanned by integer vectors.
pub(crate) fn hnf(vecs: &[(BigInt, BigInt)]) -> Option<(BigInt, BigInt, BigInt)> {
    let mut vs: Vec<(BigInt, BigInt)> = vecs.iter().filter(|v| !(v.0.is_zero() && v.1.is_zero())).cloned().collect();
    // Euclid on the ω-coordinates
    let mut pivot: Option<(BigInt, BigInt)> = None;
    let mut rest: Vec<(BigInt, BigInt)> = Vec::new();
    for v in vs.drain(..) {
        if v.1.is_zero() {
            rest.push(v);
            continue;
        }
        match pivot.take() {
            None => pivot = Some(v),
            Some(p) => {
                let (mut u, mut w) = (p, v);
                while !w.1.is_zero() {
                    let q = u.1.div_floor(&w.1);
                    let r = (&u.0 - &q * &w.0, &u.1 - &q * &w.1);
                    u = w;
                    w = r;
                }
                rest.push(w);
                pivot = Some(u);
            }
        }
    }
    let mut p = pivot?;
    if p.1.is_negative() {
        p = (-p.0, -p.1);
    }
    let mut a = BigInt::zero();
    for r in &rest {
        a = a.gcd(&r.0);
    }
    if a.is_zero() {
        return None;
    }
    let b = p.0.mod_floor(&a);
    Some((a, b, p.1))
}

impl Ideal {
    fn normalize(d: i64, den: BigInt, a: BigInt, b: BigInt, c: BigInt) -> Ideal {
        let g = den.gcd(&a).gcd(&b).gcd(&c);
        let (den, a, b, c) = if g.is_one() { (den, a, b, c) } else { (den / &g, a / &g, b / &g, c / &g) };
        Ideal { d, den, a, b, c }
    }

    /// Ideal spanned over Z by integer vectors divided by `den`; the span must be an R-module.
    fn from_z_gens(d: i64, den: BigInt, vecs: &[(BigInt, BigInt)]) -> Option<Ideal> {
        let (a, b, c) = hnf(vecs)?;
        Some(Ideal::normalize(d, den, a, b, c))
    }

    /// R-ideal generated by elements; None if all are zero.
    pub fn generated_by(d: i64, gens: &[Elem]) -> Option<Ideal> {
        let mut den = BigInt::one();
        for g in gens {
            den = den.lcm(g.x.denom()).lcm(g.y.denom());
        }
        let dr = Rat::from_integer(den.clone());
        let mut vecs = Vec::new();
        for g in gens {
            let x = (&g.x * &dr).to_integer();
            let y = (&g.y * &dr).to_integer();
            let w = mul_omega(d, &x, &y);
            vecs.push((x, y));
            vecs.push(w);
        }
        Ideal::from_z_gens(d, den, &vecs)
    }

    pub fn principal(g: &Elem) -> Result<Ideal> {
        Ideal::generated_by(g.d(), std::slice::from_ref(g)).ok_or_else(|| HmsError::Arithmetic("zero ideal".into()))
    }

    pub fn unit(d: i64) -> Ideal {
        Ideal { d, den: BigInt::one(), a: BigInt::one(), b: BigInt::zero(), c: BigInt::one() }
    }

    pub fn from_int(d: i64, n: i64) -> Result<Ideal> {
        Ideal::principal(&Elem::from_ints(d, n, 0))
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn is_integral(&self) -> bool {
        self.den.is_one()
    }

    pub fn is_unit(&self) -> bool {
        self.den.is_one() && self.a.is_one()
    }

    /// Z-basis as field elements.
    pub fn basis(&self) -> [Elem; 2] {
        let dr = Rat::from_integer(self.den.clone());
        [
            Elem::new(self.d, Rat::from_integer(self.a.clone()) / &dr, Rat::zero()),
            Elem::new(self.d, Rat::from_integer(self.b.clone()) / &dr, Rat::from_integer(self.c.clone()) / &dr),
        ]
    }

    pub fn norm(&self) -> Rat {
        Rat::new(&self.a * &self.c, &self.den * &self.den)
    }

    /// Norm of an integral ideal as an integer.
    pub fn norm_int(&self) -> BigInt {
        assert!(self.is_integral(), "norm_int of fractional ideal");
        &self.a * &self.c
    }

    pub fn norm_u64(&self) -> u64 {
        self.norm_int().to_u64().expect("norm overflow")
    }

    /// Smallest positive integer in an integral ideal.
    pub fn min_int(&self) -> BigInt {
        self.a.clone()
    }

    fn vecs(&self) -> [(BigInt, BigInt); 2] {
        [(self.a.clone(), BigInt::zero()), (self.b.clone(), self.c.clone())]
    }

    pub fn mul(&self, o: &Ideal) -> Ideal {
        assert_eq!(self.d, o.d);
        let mut vecs = Vec::with_capacity(4);
        for (x1, y1) in self.vecs().iter() {
            for (x2, y2) in o.vecs().iter() {
                vecs.push(mul_coords(self.d, x1, y1, x2, y2));
            }
        }
        Ideal::from_z_gens(self.d, &self.den * &o.den, &vecs).expect("product of nonzero ideals")
    }

    pub fn mul_elem(&self, g: &Elem) -> Result<Ideal> {
        Ok(self.mul(&Ideal::principal(g)?))
    }

    pub fn pow(&self, e: i64) -> Ideal {
        let base = if e < 0 { self.inv() } else { self.clone() };
        let mut acc = Ideal::unit(self.d);
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc
    }

    pub fn conj(&self) -> Ideal {
        let (t, _) = omega_data(self.d);
        let vecs = [(self.a.clone(), BigInt::zero()), (&self.b + &self.c * &t, -self.c.clone())];
        Ideal::from_z_gens(self.d, self.den.clone(), &vecs).expect("conjugate")
    }

    pub fn inv(&self) -> Ideal {
        let n = self.norm();
        let c = self.conj();
        // Ī / Nm(I)
        let num = n.numer().clone();
        let den = n.denom().clone();
        let vecs: Vec<(BigInt, BigInt)> = c.vecs().iter().map(|(x, y)| (x * &den, y * &den)).collect();
        Ideal::from_z_gens(self.d, &c.den * num, &vecs).expect("inverse")
    }

    pub fn div(&self, o: &Ideal) -> Ideal {
        self.mul(&o.inv())
    }

    pub fn add(&self, o: &Ideal) -> Ideal {
        let den = self.den.lcm(&o.den);
        let s1 = &den / &self.den;
        let s2 = &den / &o.den;
        let mut vecs = Vec::new();
        for (x, y) in self.vecs() {
            vecs.push((x * &s1, y * &s1));
        }
        for (x, y) in o.vecs() {
            vecs.push((x * &s2, y * &s2));
        }
        Ideal::from_z_gens(self.d, den, &vecs).expect("sum")
    }

    pub fn intersect(&self, o: &Ideal) -> Ideal {
        self.inv().add(&o.inv()).inv()
    }

    pub fn contains(&self, g: &Elem) -> bool {
        let x = &g.x * Rat::from_integer(self.den.clone());
        let y = &g.y * Rat::from_integer(self.den.clone());
        if !x.is_integer() || !y.is_integer() {
            return false;
        }
        let (x, y) = (x.to_integer(), y.to_integer());
        if !y.is_multiple_of(&self.c) {
            return false;
        }
        let q = &y / &self.c;
        (x - q * &self.b).is_multiple_of(&self.a)
    }

    /// self ⊆ o
    pub fn is_subset_of(&self, o: &Ideal) -> bool {
        self.basis().iter().all(|g| o.contains(g))
    }

    /// self | o, i.e. o ⊆ self.
    pub fn divides(&self, o: &Ideal) -> bool {
        o.is_subset_of(self)
    }

    pub fn is_coprime_to(&self, o: &Ideal) -> bool {
        self.add(o).is_unit()
    }

    /// 𝔭-adic valuation, possibly negative.
    pub fn valuation(&self, p: &PrimeIdeal) -> i64 {
        let mut v: i64 = 0;
        let mut den = self.den.clone();
        let pb = BigInt::from(p.p);
        while den.is_multiple_of(&pb) {
            den /= &pb;
            v -= p.e as i64;
        }
        let mut cur = Ideal { d: self.d, den: BigInt::one(), a: self.a.clone(), b: self.b.clone(), c: self.c.clone() };
        let pinv = p.ideal.inv();
        while p.ideal.divides(&cur) {
            cur = cur.mul(&pinv);
            v += 1;
        }
        v
    }

    /// Prime factorization; exponents are nonzero.
    pub fn factor(&self) -> Vec<(PrimeIdeal, i64)> {
        let mut ps: Vec<BigInt> = factor_big(&(&self.a * &self.c)).into_iter().map(|(p, _)| p).collect();
        ps.extend(factor_big(&self.den).into_iter().map(|(p, _)| p));
        ps.sort();
        ps.dedup();
        let mut out = Vec::new();
        for p in ps {
            for pr in primes_above(self.d, p.to_u64().expect("prime overflow")) {
                let v = self.valuation(&pr);
                if v != 0 {
                    out.push((pr, v));
                }
            }
        }
        out
    }

    pub fn label(&self) -> IdealLabel {
        IdealLabel {
            den: self.den.to_string(),
            n: self.a.to_string(),
            gen: [self.b.to_string(), self.c.to_string()],
            norm: self.norm().to_string(),
        }
    }

    /// Total order used for deterministic sorting.
    pub fn sort_key(&self) -> (Rat, BigInt, BigInt, BigInt, BigInt) {
        (self.norm(), self.den.clone(), self.a.clone(), self.b.clone(), self.c.clone())
    }

    /// Reduces an element of the lattice modulo this integral ideal to small coordinates.
    pub fn reduce_coords(&self, x: &BigInt, y: &BigInt) -> (BigInt, BigInt) {
        assert!(self.is_integral());
        let q = y.div_floor(&self.c);
        let y2 = y - &q * &self.c;
        let x2 = (x - &q * &self.b).mod_floor(&self.a);
        (x2, y2)
    }

    pub fn reduce_elem(&self, g: &Elem) -> Option<Elem> {
        let (x, y) = g.int_coords()?;
        let (x, y) = self.reduce_coords(&x, &y);
        Some(Elem::from_big(self.d, x, y))
    }

    /// An element of the ideal that is not in the ideal times `p`.
    pub fn element_not_in(&self, other: &Ideal) -> Option<Elem> {
        let [u, v] = self.basis();
        [u.clone(), v.clone(), &u + &v].into_iter().find(|g| !other.contains(g))
    }
}

/// Integral ideal from "N.a.b" (Z-basis a, b + (N/a)ω), "N.i" (i-th ideal of norm N, counting from 0)
/// or "N" when a single ideal has norm N.
pub fn parse_level(d: i64, s: &str) -> Result<Ideal> {
    let parts: Vec<u64> = s
        .split('.')
        .map(|p| p.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| HmsError::InvalidInput(format!("level '{}' is not of the form N.a.b or N.i", s)))?;
    let cands = match parts.first() {
        Some(&n) if n > 0 => ideals_of_norm(d, n),
        _ => return invalid(format!("level '{}' has no positive norm", s)),
    };
    let found = match parts[..] {
        [_, a, b] => cands.into_iter().find(|i| i.a == BigInt::from(a) && i.b == BigInt::from(b)),
        [_, i] => cands.into_iter().nth(i as usize),
        [_] if cands.len() == 1 => cands.into_iter().next(),
        _ => None,
    };
    found.ok_or_else(|| HmsError::InvalidInput(format!("no ideal matches level '{}' in Q(sqrt({}))", s, d)))
}

impl Ideal {
    /// "N.a.b" label of an integral ideal.
    pub fn level_label(&self) -> String {
        format!("{}.{}.{}", self.norm_int(), self.a, self.b)
    }
}

/// All integral ideals of norm exactly n.
pub fn ideals_of_norm(d: i64, n: u64) -> Vec<Ideal> {
    let mut out = Vec::new();
    for c in 1..=n {
        if n % c != 0 {
            continue;
        }
        let a = n / c;
        if a % c != 0 {
            continue;
        }
        let mut b = 0;
        while b < a {
            let (bb, cb, ab) = (BigInt::from(b), BigInt::from(c), BigInt::from(a));
            let cand = Ideal { d, den: BigInt::one(), a: ab.clone(), b: bb.clone(), c: cb.clone() };
            let w1 = mul_omega(d, &ab, &BigInt::zero());
            let w2 = mul_omega(d, &bb, &cb);
            let ok = [w1, w2].iter().all(|(x, y)| cand.contains(&Elem::from_big(d, x.clone(), y.clone())));
            if ok {
                out.push(cand);
            }
            b += c;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrimeIdeal {
    pub p: u64,
    pub kind: Splitting,
    pub e: u32,
    pub f: u32,
    /// Root r of the minimal polynomial of ω with 𝔭 = (p, ω − r); None when inert.
    pub root: Option<u64>,
    pub ideal: Ideal,
}

impl PrimeIdeal {
    pub fn norm(&self) -> u64 {
        self.p.pow(self.f)
    }

    pub fn label(&self) -> String {
        match (self.kind, self.root) {
            (Splitting::Split, Some(r)) => format!("p{}_{}", self.p, r),
            _ => format!("p{}", self.p),
        }
    }
}

/// Primes above p, ordered by root.
pub fn primes_above(d: i64, p: u64) -> Vec<PrimeIdeal> {
    let disc = if d % 4 == 1 { d } else { 4 * d };
    let (t, n) = omega_data(d);
    let t = t.to_i64().unwrap();
    let n = n.to_i64().unwrap();
    let pi = p as i64;
    let roots: Vec<u64> = if p < 50 {
        (0..p)
            .filter(|&r| {
                let r = r as i64;
                (r * r - t * r + n).rem_euclid(pi) == 0
            })
            .collect()
    } else {
        // x = (t ± √(t² − 4n))/2 mod p
        let dd = (t * t - 4 * n).rem_euclid(pi) as u64;
        match sqrt_mod_p(dd, p) {
            None => vec![],
            Some(s) => {
                let inv2 = (p + 1) / 2;
                let mut rs: Vec<u64> = [s, (p - s) % p]
                    .iter()
                    .map(|&sv| ((t.rem_euclid(pi) as u64 + sv) % p) * inv2 % p)
                    .collect();
                rs.sort_unstable();
                rs.dedup();
                rs
            }
        }
    };
    let pb = BigInt::from(p);
    let make = |r: u64| -> Ideal {
        let rb = BigInt::from(r);
        let gens = [Elem::from_big(d, pb.clone(), BigInt::zero()), Elem::from_big(d, -rb, BigInt::one())];
        Ideal::generated_by(d, &gens).unwrap()
    };
    let k = kronecker(disc, pi);
    match k {
        0 => vec![PrimeIdeal { p, kind: Splitting::Ramified, e: 2, f: 1, root: Some(roots[0]), ideal: make(roots[0]) }],
        1 => roots
            .iter()
            .map(|&r| PrimeIdeal { p, kind: Splitting::Split, e: 1, f: 1, root: Some(r), ideal: make(r) })
            .collect(),
        _ => vec![PrimeIdeal {
            p,
            kind: Splitting::Inert,
            e: 1,
            f: 2,
            root: None,
            ideal: Ideal::from_int(d, pi).unwrap(),
        }],
    }
}

/// Prime ideals of norm ≤ bound, sorted by norm then label.
pub fn primes_up_to_norm(d: i64, bound: u64) -> Vec<PrimeIdeal> {
    let mut out = Vec::new();
    for p in 2..=bound {
        if !crate::arith::is_prime_u64(p) {
            continue;
        }
        for pr in primes_above(d, p) {
            if pr.norm() <= bound {
                out.push(pr);
            }
        }
    }
    out.sort_by(|x, y| (x.norm(), x.root).cmp(&(y.norm(), y.root)));
    out
}

/// Decomposes z ∈ A + B as p + q with p ∈ A, q ∈ B.
pub fn split_sum(z: &Elem, a: &Ideal, b: &Ideal) -> Result<(Elem, Elem)> {
    let d = z.d();
    let den = a.den.lcm(&b.den).lcm(z.x.denom()).lcm(z.y.denom());
    let sa = &den / &a.den;
    let sb = &den / &b.den;
    let cols: Vec<(BigInt, BigInt)> = a
        .vecs()
        .iter()
        .map(|(x, y)| (x * &sa, y * &sa))
        .chain(b.vecs().iter().map(|(x, y)| (x * &sb, y * &sb)))
        .collect();
    let dr = Rat::from_integer(den.clone());
    let zx = (&z.x * &dr).to_integer();
    let zy = (&z.y * &dr).to_integer();
    // column operations on the 2×4 matrix, tracking the 4×4 transform
    let mut m: Vec<[BigInt; 2]> = cols.iter().map(|(x, y)| [x.clone(), y.clone()]).collect();
    let mut u: Vec<Vec<BigInt>> = (0..4).map(|i| (0..4).map(|j| BigInt::from((i == j) as i64)).collect()).collect();
    let col_op = |m: &mut Vec<[BigInt; 2]>, u: &mut Vec<Vec<BigInt>>, dst: usize, src: usize, q: &BigInt| {
        // col[dst] -= q·col[src]
        for r in 0..2 {
            let v = &m[src][r] * q;
            m[dst][r] -= v;
        }
        for row in u.iter_mut() {
            let v = &row[src] * q;
            row[dst] -= v;
        }
    };
    let swap = |m: &mut Vec<[BigInt; 2]>, u: &mut Vec<Vec<BigInt>>, i: usize, j: usize| {
        m.swap(i, j);
        for row in u.iter_mut() {
            row.swap(i, j);
        }
    };
    let mut first = 0;
    for r in 0..2 {
        loop {
            let nz: Vec<usize> = (first..4).filter(|&j| !m[j][r].is_zero()).collect();
            if nz.len() <= 1 {
                if let Some(&j) = nz.first() {
                    swap(&mut m, &mut u, first, j);
                }
                break;
            }
            let piv = *nz.iter().min_by_key(|&&j| m[j][r].abs()).unwrap();
            for &j in &nz {
                if j != piv {
                    let q = m[j][r].div_floor(&m[piv][r]);
                    col_op(&mut m, &mut u, j, piv, &q);
                }
            }
        }
        if !m[first][r].is_zero() {
            first += 1;
        }
    }
    // m[0] = (g0, h), m[1] = (0, g1)
    let mut w = [BigInt::zero(), BigInt::zero()];
    let rem_x = zx.clone();
    if m[0][0].is_zero() || !rem_x.is_multiple_of(&m[0][0]) {
        return invalid("split_sum: element not in A + B");
    }
    w[0] = &rem_x / &m[0][0];
    let rem_y = &zy - &w[0] * &m[0][1];
    if m[1][1].is_zero() || !rem_y.is_multiple_of(&m[1][1]) {
        return invalid("split_sum: element not in A + B");
    }
    w[1] = &rem_y / &m[1][1];
    let k: Vec<BigInt> = (0..4).map(|i| &u[i][0] * &w[0] + &u[i][1] * &w[1]).collect();
    let (mut px, mut py) = (BigInt::zero(), BigInt::zero());
    for i in 0..2 {
        px += &k[i] * &cols[i].0;
        py += &k[i] * &cols[i].1;
    }
    let p = Elem::new(d, Rat::new(px, den.clone()), Rat::new(py, den));
    let q = z - &p;
    debug_assert!(a.contains(&p) && b.contains(&q));
    Ok((p, q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValConstraint {
    Exact(u32),
    AtLeast(u32),
}

/// Chinese remainder: x ≡ targets[i] mod moduli[i] for pairwise coprime integral moduli.
pub fn crt(targets: &[Elem], moduli: &[Ideal], d: i64) -> Result<Elem> {
    if moduli.is_empty() {
        return Ok(Elem::zero(d));
    }
    let total = moduli.iter().fold(Ideal::unit(d), |acc, m| acc.mul(m));
    let mut x = Elem::zero(d);
    for (i, (t, m)) in targets.iter().zip(moduli).enumerate() {
        let others = moduli.iter().enumerate().filter(|(j, _)| *j != i).fold(Ideal::unit(d), |acc, (_, m)| acc.mul(m));
        let (_, e) = split_sum(&Elem::one(d), m, &others)?;
        x = &x + &(t * &e);
    }
    Ok(total.reduce_elem(&x).unwrap_or(x))
}

/// Element of R meeting the valuation constraints and an optional congruence.
pub fn approximate(d: i64, constraints: &[(PrimeIdeal, ValConstraint)], congruence: Option<(&Elem, &Ideal)>) -> Result<Elem> {
    if constraints.is_empty() && congruence.is_none() {
        return Ok(Elem::one(d));
    }
    // per prime: (modulus exponent, target)
    let mut parts: BTreeMap<(u64, Option<u64>), (PrimeIdeal, u32, Elem)> = BTreeMap::new();
    let mut extra_primes: Vec<(PrimeIdeal, i64)> = Vec::new();
    if let Some((_, m)) = congruence {
        extra_primes = m.factor();
    }
    for (pr, c) in constraints {
        let key = (pr.p, pr.root);
        let (exp, tgt) = match *c {
            ValConstraint::AtLeast(k) => (k, Elem::zero(d)),
            ValConstraint::Exact(k) => {
                let pk = pr.ideal.pow(k as i64);
                let pk1 = pk.mul(&pr.ideal);
                let pi = pk.element_not_in(&pk1).expect("uniformizer power");
                (k + 1, pi)
            }
        };
        if let Some((target, _)) = congruence {
            if let Some((_, m)) = extra_primes.iter().find(|(q, _)| q == pr) {
                let m = *m as u32;
                let pm = pr.ideal.pow(m as i64);
                let tv = if target.is_zero() { u32::MAX } else { Ideal::principal(target)?.valuation(pr).max(0) as u32 };
                let ok = match *c {
                    ValConstraint::AtLeast(k) => (k <= m && tv >= k) || (k > m && pm.contains(target)),
                    ValConstraint::Exact(k) => (k < m && tv == k) || (k >= m && pm.contains(target)),
                };
                if !ok {
                    return invalid(format!("approximate: congruence incompatible at {}", pr.label()));
                }
                let (exp, tgt) = match *c {
                    ValConstraint::AtLeast(k) if k <= m => (m, target.clone()),
                    ValConstraint::Exact(k) if k < m => (m, target.clone()),
                    _ => (exp, tgt),
                };
                parts.insert(key, (pr.clone(), exp, tgt));
                continue;
            }
        }
        if exp > 0 {
            parts.insert(key, (pr.clone(), exp, tgt));
        }
    }
    if let Some((target, _)) = congruence {
        for (pr, m) in &extra_primes {
            let key = (pr.p, pr.root);
            if !parts.contains_key(&key) && !constraints.iter().any(|(q, _)| q == pr) {
                parts.insert(key, (pr.clone(), *m as u32, target.clone()));
            }
        }
    }
    let mut targets = Vec::new();
    let mut moduli = Vec::new();
    for (_, (pr, e, t)) in parts {
        targets.push(t);
        moduli.push(pr.ideal.pow(e as i64));
    }
    let x = crt(&targets, &moduli, d)?;
    // the zero element only arises if every part is zero; shift by the modulus
    let x = if x.is_zero() {
        let total = moduli.iter().fold(Ideal::unit(d), |acc, m| acc.mul(m));
        Elem::from_big(d, total.min_int(), BigInt::zero())
    } else {
        x
    };
    for (pr, c) in constraints {
        let v = Ideal::principal(&x)?.valuation(pr);
        let ok = match *c {
            ValConstraint::Exact(k) => v == k as i64,
            ValConstraint::AtLeast(k) => v >= k as i64,
        };
        if !ok {
            return Err(HmsError::Integrity(format!("approximate failed at {}", pr.label())));
        }
    }
    if let Some((t, m)) = congruence {
        if !m.contains(&(&x - t)) {
            return Err(HmsError::Integrity("approximate: congruence not met".into()));
        }
    }
    Ok(x)
}

/// R/𝔐 with representatives x + yω, 0 ≤ x < a, 0 ≤ y < c.
#[derive(Clone, Debug)]
pub struct ResidueRing {
    pub modulus: Ideal,
    d: i64,
    a: i64,
    b: i64,
    c: i64,
    tw: i64,
    nw: i64,
    primes: Vec<PrimeIdeal>,
}

pub type Res = (i64, i64);

impl ResidueRing {
    pub fn new(m: &Ideal) -> Result<ResidueRing> {
        if !m.is_integral() {
            return invalid("residue ring of a fractional ideal");
        }
        let to = |x: &BigInt| x.to_i64().ok_or_else(|| HmsError::Budget("modulus too large".into()));
        let (t, n) = omega_data(m.d);
        Ok(ResidueRing {
            modulus: m.clone(),
            d: m.d,
            a: to(&m.a)?,
            b: to(&m.b)?,
            c: to(&m.c)?,
            tw: t.to_i64().unwrap(),
            nw: n.to_i64().unwrap(),
            primes: m.factor().into_iter().map(|(p, _)| p).collect(),
        })
    }

    pub fn size(&self) -> u64 {
        (self.a * self.c) as u64
    }

    pub fn primes(&self) -> &[PrimeIdeal] {
        &self.primes
    }

    pub fn reduce(&self, x: i128, y: i128) -> Res {
        let c = self.c as i128;
        let q = y.div_euclid(c);
        let y2 = y - q * c;
        let x2 = (x - q * self.b as i128).rem_euclid(self.a as i128);
        (x2 as i64, y2 as i64)
    }

    pub fn mul(&self, u: Res, v: Res) -> Res {
        let (x1, y1, x2, y2) = (u.0 as i128, u.1 as i128, v.0 as i128, v.1 as i128);
        let yy = y1 * y2;
        let x = x1 * x2 - yy * self.nw as i128;
        let y = x1 * y2 + x2 * y1 + yy * self.tw as i128;
        self.reduce(x, y)
    }

    pub fn add(&self, u: Res, v: Res) -> Res {
        self.reduce(u.0 as i128 + v.0 as i128, u.1 as i128 + v.1 as i128)
    }

    pub fn neg(&self, u: Res) -> Res {
        self.reduce(-(u.0 as i128), -(u.1 as i128))
    }

    pub fn sub(&self, u: Res, v: Res) -> Res {
        self.add(u, self.neg(v))
    }

    pub fn one(&self) -> Res {
        self.reduce(1, 0)
    }

    pub fn zero(&self) -> Res {
        (0, 0)
    }

    pub fn pow(&self, u: Res, mut e: u64) -> Res {
        let mut base = u;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Image of an element whose denominator is prime to the modulus.
    pub fn from_elem(&self, g: &Elem) -> Result<Res> {
        let den = g.x.denom().lcm(g.y.denom());
        let dr = Rat::from_integer(den.clone());
        let x = (&g.x * &dr).to_integer();
        let y = (&g.y * &dr).to_integer();
        let a = BigInt::from(self.a);
        let (x, y) = (x.mod_floor(&(&a * BigInt::from(self.c))), y.mod_floor(&(&a * BigInt::from(self.c))));
        let base = self.reduce(x.to_i128().unwrap(), y.to_i128().unwrap());
        if den.is_one() {
            return Ok(base);
        }
        let inv = crate::arith::inv_mod_big(&den, &a)
            .ok_or_else(|| HmsError::Arithmetic(format!("denominator {} not prime to modulus", den)))?;
        Ok(self.mul(base, self.reduce(inv.to_i128().unwrap(), 0)))
    }

    pub fn to_elem(&self, u: Res) -> Elem {
        Elem::from_ints(self.d, u.0, u.1)
    }

    pub fn in_prime(&self, u: Res, p: &PrimeIdeal) -> bool {
        p.ideal.contains(&self.to_elem(u))
    }

    pub fn is_unit(&self, u: Res) -> bool {
        if self.a == 1 {
            return true;
        }
        !self.primes.iter().any(|p| self.in_prime(u, p))
    }

    pub fn elements(&self) -> impl Iterator<Item = Res> + '_ {
        (0..self.c).flat_map(move |y| (0..self.a).map(move |x| (x, y)))
    }

    pub fn units(&self) -> Vec<Res> {
        self.elements().filter(|&u| self.is_unit(u)).collect()
    }

    pub fn unit_count(&self) -> u64 {
        let mut n = Rat::from_integer(BigInt::from(self.size()));
        for p in &self.primes {
            let q = BigInt::from(p.norm());
            n = n * Rat::new(&q - 1, q);
        }
        n.to_integer().to_u64().unwrap()
    }

    pub fn inv(&self, u: Res) -> Option<Res> {
        if !self.is_unit(u) {
            return None;
        }
        let n = self.unit_count();
        Some(self.pow(u, n - 1))
    }

    /// Multiplicative order of a unit.
    pub fn order(&self, u: Res) -> u64 {
        let n = self.unit_count();
        let mut ord = n;
        for (p, _) in factor_u64(n) {
            while ord % p == 0 && self.pow(u, ord / p) == self.one() {
                ord /= p;
            }
        }
        ord
    }
}

/// (R/𝔐)× as a product of cyclic groups of prime-power order.
#[derive(Clone, Debug)]
pub struct ResidueUnitGroup {
    pub ring: ResidueRing,
    pub gens: Vec<Res>,
    pub orders: Vec<u64>,
    dlog: HashMap<Res, Vec<u64>>,
}

impl ResidueUnitGroup {
    pub fn new(m: &Ideal, cap: u64) -> Result<ResidueUnitGroup> {
        let ring = ResidueRing::new(m)?;
        if ring.size() > cap {
            return Err(HmsError::Budget(format!("residue ring of size {} exceeds cap {}", ring.size(), cap)));
        }
        let units = ring.units();
        let n = units.len() as u64;
        let mut gens = Vec::new();
        let mut orders = Vec::new();
        for (l, a) in factor_u64(n) {
            let la = l.pow(a);
            let cof = n / la;
            let sylow: Vec<Res> = {
                let mut s: Vec<Res> = units.iter().map(|&u| ring.pow(u, cof)).collect();
                s.sort_unstable();
                s.dedup();
                s
            };
            let (g, o) = decompose_p_group(&ring, &sylow, l);
            gens.extend(g);
            orders.extend(o);
        }
        let mut grp = ResidueUnitGroup { ring, gens, orders, dlog: HashMap::new() };
        grp.build_table();
        if grp.dlog.len() as u64 != n {
            return Err(HmsError::Integrity("residue unit group decomposition".into()));
        }
        Ok(grp)
    }

    fn build_table(&mut self) {
        let mut table: HashMap<Res, Vec<u64>> = HashMap::new();
        table.insert(self.ring.one(), vec![0; self.gens.len()]);
        for (i, (&g, &o)) in self.gens.iter().zip(&self.orders).enumerate() {
            let cur: Vec<(Res, Vec<u64>)> = table.iter().map(|(k, v)| (*k, v.clone())).collect();
            let mut p = self.ring.one();
            for k in 1..o {
                p = self.ring.mul(p, g);
                for (e, v) in &cur {
                    let mut v2 = v.clone();
                    v2[i] = k;
                    table.insert(self.ring.mul(*e, p), v2);
                }
            }
        }
        self.dlog = table;
    }

    pub fn order(&self) -> u64 {
        self.orders.iter().product()
    }

    pub fn log(&self, u: Res) -> Option<&Vec<u64>> {
        self.dlog.get(&u)
    }

    pub fn exp(&self, v: &[u64]) -> Res {
        let mut acc = self.ring.one();
        for ((&g, &o), &e) in self.gens.iter().zip(&self.orders).zip(v) {
            acc = self.ring.mul(acc, self.ring.pow(g, e % o));
        }
        acc
    }

    pub fn elements(&self) -> Vec<Res> {
        let mut v: Vec<Res> = self.dlog.keys().copied().collect();
        v.sort_unstable();
        v
    }
}

/// Basis of a finite abelian l-group, chosen by maximal quotient order and adjusted to split.
fn decompose_p_group(ring: &ResidueRing, elems: &[Res], l: u64) -> (Vec<Res>, Vec<u64>) {
    let mut basis: Vec<Res> = Vec::new();
    let mut orders: Vec<u64> = Vec::new();
    let mut h: HashMap<Res, Vec<u64>> = HashMap::new();
    h.insert(ring.one(), vec![]);
    while h.len() < elems.len() {
        // element of largest order in the quotient by the current span
        let mut best: Option<(u64, Res, Res)> = None;
        for &x in elems {
            if h.contains_key(&x) {
                continue;
            }
            let mut k = 1u64;
            let mut y = ring.pow(x, l);
            while !h.contains_key(&y) {
                y = ring.pow(y, l);
                k *= l;
            }
            let qo = k * l;
            if best.map_or(true, |(b, _, _)| qo > b) {
                best = Some((qo, x, y));
            }
        }
        let (m, x, y) = best.unwrap();
        let ev = h[&y].clone();
        let mut adj = x;
        for (i, e) in ev.iter().enumerate() {
            debug_assert_eq!(e % m, 0);
            let s = e / m;
            if s > 0 {
                let inv = ring.pow(basis[i], orders[i] - (s % orders[i]));
                adj = ring.mul(adj, inv);
            }
        }
        basis.push(adj);
        orders.push(m);
        let cur: Vec<(Res, Vec<u64>)> = h.iter().map(|(k, v)| (*k, v.clone())).collect();
        let mut nh: HashMap<Res, Vec<u64>> = HashMap::with_capacity(cur.len() * m as usize);
        let mut p = ring.one();
        for k in 0..m {
            for (e, v) in &cur {
                let mut v2 = v.clone();
                v2.push(k);
                nh.insert(ring.mul(*e, p), v2);
            }
            p = ring.mul(p, adj);
        }
        h = nh;
    }
    (basis, orders)
}

/// Subgroup generated by a set of units, as a set of residues.
pub fn subgroup_closure<T, F>(one: T, gens: &[T], mul: F) -> HashSet<T>
where
    T: Copy + Eq + std::hash::Hash,
    F: Fn(T, T) -> T,
{
    let mut seen: HashSet<T> = HashSet::new();
    seen.insert(one);
    let mut frontier = vec![one];
    while let Some(x) = frontier.pop() {
        for &g in gens {
            let y = mul(x, g);
            if seen.insert(y) {
                frontier.push(y);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_gcd() {
        let two = Ideal::from_int(5, 2).unwrap();
        assert!(two.mul(&two.inv()).is_unit());
        let s5 = Ideal::principal(&Elem::sqrt_d(5)).unwrap();
        assert!(two.add(&s5).is_unit());
    }

    #[test]
    fn factor_examples() {
        let f = Ideal::from_int(5, 2).unwrap().factor();
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].0.kind, f[0].0.norm(), f[0].1), (Splitting::Inert, 4, 1));
        let f = Ideal::from_int(5, 11).unwrap().factor();
        assert_eq!(f.len(), 2);
        assert!(f.iter().all(|(p, e)| p.kind == Splitting::Split && *e == 1));
        let f = Ideal::from_int(5, 5).unwrap().factor();
        assert_eq!((f[0].0.kind, f[0].1), (Splitting::Ramified, 2));
    }

    #[test]
    fn valuation_ramified_two() {
        let p2 = primes_above(2, 2).remove(0);
        assert_eq!(p2.ideal, Ideal::principal(&Elem::sqrt_d(2)).unwrap());
        assert_eq!(p2.ideal.pow(2).valuation(&p2), 2);
        assert_eq!(p2.ideal.inv().valuation(&p2), -1);
    }

    #[test]
    fn residue_groups() {
        let g = ResidueUnitGroup::new(&Ideal::from_int(5, 2).unwrap(), 1 << 20).unwrap();
        assert_eq!(g.orders, vec![3]);
        let g = ResidueUnitGroup::new(&Ideal::unit(5), 1 << 20).unwrap();
        assert_eq!(g.order(), 1);
        let p11 = primes_above(5, 11).remove(0);
        let g = ResidueUnitGroup::new(&p11.ideal, 1 << 20).unwrap();
        assert_eq!(g.order(), 10);
        let mut o = g.orders.clone();
        o.sort();
        assert_eq!(o, vec![2, 5]);
    }

    #[test]
    fn approximate_examples() {
        let p11 = primes_above(5, 11).remove(0);
        let x = approximate(5, &[(p11.clone(), ValConstraint::Exact(1))], None).unwrap();
        assert_eq!(Ideal::principal(&x).unwrap().valuation(&p11), 1);
        let two = Ideal::from_int(5, 2).unwrap();
        let one = Elem::one(5);
        let y = approximate(5, &[(p11.clone(), ValConstraint::AtLeast(1))], Some((&one, &two))).unwrap();
        assert!(p11.ideal.contains(&y));
        assert!(two.contains(&(&y - &one)));
        assert_eq!(approximate(5, &[], None).unwrap(), one);
    }

    #[test]
    fn split_sum_works() {
        let a = Ideal::from_int(5, 2).unwrap();
        let b = Ideal::from_int(5, 3).unwrap();
        let (p, q) = split_sum(&Elem::one(5), &a, &b).unwrap();
        assert!(a.contains(&p) && b.contains(&q));
        assert_eq!(&p + &q, Elem::one(5));
    }

    #[test]
    fn ideals_of_norm_count() {
        // Q(√5): 4 = (2) only; 11 has two ideals; 5 has one
        assert_eq!(ideals_of_norm(5, 4).len(), 1);
        assert_eq!(ideals_of_norm(5, 11).len(), 2);
        assert_eq!(ideals_of_norm(5, 5).len(), 1);
        assert_eq!(ideals_of_norm(5, 2).len(), 0);
    }
}
