//! Elliptic points of Γ₀(𝔑)_𝔟 and Γ₀¹(𝔑)_𝔟: counts by order from optimal embeddings of CM orders,
//! rotation types, and resolution of the quotient singularities.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::classgroups::{kronecker_k, pair_conductor, CMData, FieldData, GroupVariant, TorsionPair};
use crate::cusps::GroupSpec;
use crate::error::{HmsError, Result};
use crate::field::{hj_expand_rational, rat, Elem, Place, Rat, RealQuadraticField};
use crate::ideals::{approximate, Ideal, PrimeIdeal, ResidueRing, ResidueUnitGroup, Res, ValConstraint};

/// A torsion class γ in PGL₂⁺(F) with x² − t x + u its characteristic polynomial.
#[derive(Clone, Debug)]
pub struct TorsionOrderSpec {
    pub q: u32,
    pub u: Elem,
    pub t: Elem,
    pub twisted: bool,
    /// Index of K = F(γ) in the CM field list.
    pub field_index: usize,
}

/// All torsion classes up to sign and conjugation.
pub fn torsion_orders(fd: &FieldData) -> Vec<TorsionOrderSpec> {
    let cm = &fd.cm;
    cm.pairs
        .iter()
        .enumerate()
        .map(|(i, p)| TorsionOrderSpec { q: p.q, u: p.u.clone(), t: p.t.clone(), twisted: p.twisted, field_index: cm.field_of[i] })
        .collect()
}

/// Rotation type (q; 1, b) of an elliptic fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RotationType {
    pub q: u32,
    pub b: u32,
}

impl RotationType {
    /// Normalizes (q; a, b) with gcd(a, q) = gcd(b, q) = 1.
    pub fn new(q: u32, a: i64, b: i64) -> Result<RotationType> {
        let qi = q as i64;
        if q < 2 || a.gcd(&qi) != 1 || b.gcd(&qi) != 1 {
            return Err(HmsError::InvalidInput(format!("({}; {}, {}) is not a rotation type", q, a, b)));
        }
        let ainv = inv_mod(a.rem_euclid(qi), qi);
        Ok(RotationType { q, b: (b.rem_euclid(qi) * ainv).rem_euclid(qi) as u32 })
    }

    /// The type with one rotation inverted.
    pub fn conjugate(self) -> RotationType {
        RotationType { q: self.q, b: (self.q - self.b) % self.q }
    }

    pub fn triple(self) -> [u32; 3] {
        [self.q, 1, self.b]
    }
}

fn inv_mod(a: i64, m: i64) -> i64 {
    if m == 1 {
        return 0;
    }
    (1..m).find(|x| (a * x).rem_euclid(m) == 1).expect("unit mod m")
}

/// Minimal resolution of a cyclic quotient singularity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EllipticResolution {
    pub selfints: Vec<i64>,
    pub length: usize,
    pub chern: Rat,
}

/// Chain from the HJ expansion of q/b and the local Chern number from P₀ = (1,0), P₁ = (b/q, 1/q).
pub fn resolve_elliptic(rt: RotationType) -> Result<EllipticResolution> {
    let q = rt.q as i64;
    let b = rt.b as i64;
    let bs: Vec<i64> = if b == 0 {
        return Err(HmsError::InvalidInput("rotation b must be prime to q".into()));
    } else if b == 1 && q == 1 {
        vec![]
    } else {
        let x = Rat::new(BigInt::from(q), BigInt::from(b));
        if x == rat(1) {
            vec![]
        } else {
            let e = hj_expand_rational(&x, 1000)?;
            e.preperiod
        }
    };
    let mut p_prev = (rat(1), rat(0));
    let mut p_cur = (Rat::new(BigInt::from(b), BigInt::from(q)), Rat::new(BigInt::from(1), BigInt::from(q)));
    let mut coeffs = Vec::with_capacity(bs.len());
    for &bi in &bs {
        coeffs.push(&p_cur.0 + &p_cur.1 - rat(1));
        let next = (&p_cur.0 * rat(bi) - &p_prev.0, &p_cur.1 * rat(bi) - &p_prev.1);
        p_prev = std::mem::replace(&mut p_cur, next);
    }
    if p_cur != (rat(0), rat(1)) {
        return Err(HmsError::Integrity(format!("recurrence for ({}; 1, {}) does not close", q, b)));
    }
    let mut c = rat(0);
    for (i, k) in coeffs.iter().enumerate() {
        c += k * k * rat(-bs[i]);
        if i + 1 < coeffs.len() {
            c += k * &coeffs[i + 1] * rat(2);
        }
    }
    Ok(EllipticResolution { selfints: bs.iter().map(|x| -x).collect(), length: bs.len(), chern: c })
}

// Local embedding numbers

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
enum Step {
    Start,
    Out,
    In,
    OnFromOut,
    Along,
}

/// Distribution of the distance to the K-fixed set over the sphere of radius e around a vertex at distance j.
fn sphere_profile(n: u128, deg_c: u128, j: u32, e: u32) -> BTreeMap<u32, u128> {
    let mut cur: BTreeMap<(u32, Step), u128> = BTreeMap::new();
    cur.insert((j, Step::Start), 1);
    for _ in 0..e {
        let mut next: BTreeMap<(u32, Step), u128> = BTreeMap::new();
        let mut add = |k: (u32, Step), v: u128| {
            if v > 0 {
                *next.entry(k).or_insert(0) += v;
            }
        };
        for (&(d, st), &cnt) in &cur {
            let toward = |add: &mut dyn FnMut((u32, Step), u128), m: u128| {
                if d == 1 {
                    add((0, Step::OnFromOut), m);
                } else {
                    add((d - 1, Step::In), m);
                }
            };
            match (st, d) {
                (Step::Start, 0) => {
                    add((0, Step::Along), cnt * deg_c);
                    add((1, Step::Out), cnt * (n + 1 - deg_c));
                }
                (Step::Start, _) => {
                    toward(&mut add, cnt);
                    add((d + 1, Step::Out), cnt * n);
                }
                (Step::Out, _) => add((d + 1, Step::Out), cnt * n),
                (Step::In, _) => {
                    toward(&mut add, cnt);
                    add((d + 1, Step::Out), cnt * (n - 1));
                }
                (Step::OnFromOut, _) => {
                    add((0, Step::Along), cnt * deg_c);
                    add((1, Step::Out), cnt * (n - deg_c));
                }
                (Step::Along, _) => {
                    add((0, Step::Along), cnt * (deg_c - 1));
                    add((1, Step::Out), cnt * (n + 1 - deg_c));
                }
            }
        }
        cur = next;
    }
    let mut out = BTreeMap::new();
    for ((d, _), c) in cur {
        *out.entry(d).or_insert(0) += c;
    }
    out
}

/// Number of optimal embeddings of the order of conductor 𝔭^f into an Eichler order of level 𝔭^e,
/// up to conjugation by its units, for a prime of norm `n` with Artin symbol `chi` in K.
pub fn local_embedding_number(n: u64, chi: i32, e: u32, f: u32) -> Result<u64> {
    if e == 0 {
        return Ok(1);
    }
    let n = n as u128;
    let deg_c: u128 = match chi {
        1 => 2,
        -1 => 0,
        _ => 1,
    };
    let mut total: u128 = 0;
    for j in 0..=f {
        let prof = sphere_profile(n, deg_c, j, e);
        let a: u128 = prof.iter().filter(|(&d, _)| if j == f { d <= f } else { d == f }).map(|(_, &c)| c).sum();
        let idx: u128 = if j == f {
            1
        } else if j >= 1 {
            n.pow(f - j)
        } else {
            n.pow(f - 1) * (n as i128 - chi as i128) as u128
        };
        if a % idx != 0 {
            return Err(HmsError::Integrity(format!("orbit count {} not divisible by {}", a, idx)));
        }
        total += a / idx;
    }
    u64::try_from(total).map_err(|_| HmsError::Budget("local embedding number overflow".into()))
}

/// Local trace and norm of a generator of R_𝔭 + 𝔭^{f} Z_K at 𝔭, built from a torsion pair.
fn local_generator(f: &RealQuadraticField, pair: &TorsionPair, pr: &PrimeIdeal, f_loc: u32) -> Result<(Elem, Elem)> {
    let (_, locals) = pair_conductor(f, pair)?;
    let (k, a) = match locals.iter().find(|l| l.prime == *pr) {
        Some(l) => (l.k, l.a.clone()),
        None => (0, f.zero()),
    };
    if f_loc > k {
        return Err(HmsError::InvalidInput("order conductor exceeds that of the pair".into()));
    }
    let shift = k - f_loc;
    let mut cons = vec![(pr.clone(), ValConstraint::Exact(1))];
    for other in crate::ideals::primes_above(f.d, pr.p) {
        if other != *pr {
            cons.push((other, ValConstraint::Exact(0)));
        }
    }
    let pi = approximate(f.d, &cons, None)?;
    let pis = pi.pow(shift as u64);
    let tr = (&pair.t - &a.scale(&rat(2))).div(&pis)?;
    let nm = (&(&(&a * &a) - &(&pair.t * &a)) + &pair.u).div(&(&pis * &pis))?;
    Ok((tr, nm))
}

/// Direct count of optimal embeddings into the Eichler order of level 𝔭^e modulo 𝔭^m,
/// up to conjugation by its unit group. Returns None when the search table would exceed `cap` entries.
pub fn brute_force_embedding_number(
    f: &RealQuadraticField,
    pair: &TorsionPair,
    pr: &PrimeIdeal,
    e: u32,
    f_loc: u32,
    m: u32,
    cap: u64,
) -> Result<Option<u64>> {
    let (tr, nm) = local_generator(f, pair, pr, f_loc)?;
    let modulus = pr.ideal.pow(m as i64);
    let ring = ResidueRing::new(&modulus)?;
    let size = ring.size();
    let pe = pr.ideal.pow(e as i64);
    let pe1 = pr.ideal.pow(e as i64 + 1);
    let elems: Vec<Res> = ring.elements().collect();
    let lower: Vec<Res> = elems.iter().copied().filter(|&x| pe.contains(&ring.to_elem(x))).collect();
    if size.saturating_mul(lower.len() as u64) > cap {
        return Ok(None);
    }
    let in_pe1 = |x: Res| pe1.contains(&ring.to_elem(x));
    let t = ring.from_elem(&tr)?;
    let n = ring.from_elem(&nm)?;
    // (x11, x12, x21) with x22 = t − x11
    let mut index: HashMap<(Res, Res, Res), usize> = HashMap::new();
    let mut mats: Vec<(Res, Res, Res)> = Vec::new();
    let mut by_product: HashMap<(Res, Res), Vec<Res>> = HashMap::new();
    for &c in &lower {
        for &b in &elems {
            by_product.entry((c, ring.mul(b, c))).or_default().push(b);
        }
    }
    let lower_in_pe1: HashMap<Res, bool> = lower.iter().map(|&c| (c, in_pe1(c))).collect();
    // X ≡ x mod 𝔭^i lifts to an exact solution iff bc ≡ ad − N mod 𝔭^{m+i}
    let pows: Vec<Ideal> = (0..=m + f_loc).map(|k| pr.ideal.pow(k as i64)).collect();
    let val: HashMap<Res, u32> = elems
        .iter()
        .map(|&x| {
            let g = ring.to_elem(x);
            (x, (1..=m).take_while(|&k| pows[k as usize].contains(&g)).count() as u32)
        })
        .collect();
    let big = ResidueRing::new(&pows[(m + f_loc) as usize])?;
    let lift = |x: Res| big.from_elem(&ring.to_elem(x));
    let (tb, nb) = (big.from_elem(&tr)?, big.from_elem(&nm)?);
    for &a in &elems {
        let d = ring.sub(t, a);
        let g = ring.sub(ring.mul(a, d), n);
        let va = val[&ring.sub(a, d)];
        let scalar_mod_p = va >= 1;
        for &c in &lower {
            if let Some(bs) = by_product.get(&(c, g)) {
                for &b in bs {
                    if scalar_mod_p && lower_in_pe1[&c] && val[&b] >= 1 {
                        continue;
                    }
                    let i = va.min(val[&b]).min(val[&c]);
                    if i > f_loc {
                        continue;
                    }
                    if i > 0 {
                        let (ab, bb, cb) = (lift(a)?, lift(b)?, lift(c)?);
                        let db = big.sub(tb, ab);
                        let r = big.sub(big.mul(bb, cb), big.sub(big.mul(ab, db), nb));
                        if !pows[(m + i) as usize].contains(&big.to_elem(r)) {
                            continue;
                        }
                    }
                    index.insert((a, b, c), mats.len());
                    mats.push((a, b, c));
                }
            }
        }
    }
    let mut parent: Vec<usize> = (0..mats.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let units = ResidueUnitGroup::new(&modulus, cap)?;
    let omega = ring.from_elem(&f.omega())?;
    let pb = pe.basis();
    let lgens = [ring.from_elem(&pb[0])?, ring.from_elem(&pb[1])?];
    let conj = |x: (Res, Res, Res), g: usize| -> (Res, Res, Res) {
        let (a, b, c) = x;
        let d = ring.sub(t, a);
        let ng = units.gens.len();
        if g < ng {
            let l = units.gens[g];
            let li = ring.inv(l).expect("unit");
            (a, ring.mul(l, b), ring.mul(li, c))
        } else if g < ng + 2 {
            let s = if g == ng { ring.one() } else { omega };
            let a2 = ring.add(a, ring.mul(s, c));
            let b2 = ring.sub(ring.add(b, ring.mul(s, ring.sub(d, a))), ring.mul(ring.mul(s, s), c));
            (a2, b2, c)
        } else {
            let s = lgens[g - ng - 2];
            let a2 = ring.sub(a, ring.mul(s, b));
            let c2 = ring.sub(ring.add(c, ring.mul(s, ring.sub(a, d))), ring.mul(ring.mul(s, s), b));
            (a2, b, c2)
        }
    };
    let ngens = units.gens.len() + 4;
    for i in 0..mats.len() {
        for g in 0..ngens {
            let y = conj(mats[i], g);
            let j = *index.get(&y).ok_or_else(|| HmsError::Integrity("conjugate left the embedding set".into()))?;
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
            }
        }
    }
    let mut roots = 0u64;
    for i in 0..mats.len() {
        if find(&mut parent, i) == i {
            roots += 1;
        }
    }
    Ok(Some(roots))
}

// Counts and rotation types

/// Contribution of one CM order to one component.
#[derive(Clone, Debug)]
struct OrderContribution {
    w: u32,
    q_s: u32,
    count: u64,
    types: Vec<(RotationType, u64)>,
}

fn check_gamma0_spec(spec: &GroupSpec) -> Result<()> {
    if !matches!(spec.variant, GroupVariant::Gamma0 | GroupVariant::Gamma0One) {
        return Err(HmsError::InvalidInput(format!("elliptic points are computed for Γ₀ and Γ₀¹ only, not {}", spec.variant.name())));
    }
    if !spec.level.is_integral() || spec.level.norm().is_zero() {
        return Err(HmsError::InvalidInput("level must be a nonzero integral ideal".into()));
    }
    Ok(())
}

/// Adelic embedding number ∏_{𝔭 | 𝔑} m_𝔭 of the order with conductor 𝔤 in the field of `cm.fields[ki]`.
pub fn adelic_embedding_number(f: &RealQuadraticField, cm: &CMData, ki: usize, g: &Ideal, n: &Ideal) -> Result<u64> {
    let pair = &cm.pairs[cm.fields[ki].pairs[0]];
    let mut m = 1u64;
    for (pr, e) in n.factor() {
        let chi = kronecker_k(f, pair, &pr)?;
        let fl = g.valuation(&pr).max(0) as u32;
        m *= local_embedding_number(pr.norm(), chi, e as u32, fl)?;
        if m == 0 {
            break;
        }
    }
    Ok(m)
}

/// Reference rotation type of a torsion pair from the rational canonical embedding.
pub fn reference_type(pair: &TorsionPair) -> Result<RotationType> {
    let q = pair.q;
    // ζ + ζ⁻¹ = t²/u − 2 has small conjugates even when u is a large unit
    let c = &(&pair.t * &pair.t).div(&pair.u)? - &Elem::from_ints(pair.u.d(), 2, 0);
    let mut ks = [0i64; 2];
    for (i, pl) in [Place::V, Place::W].into_iter().enumerate() {
        let cos = (c.approx_at(pl) / 2.0).clamp(-1.0, 1.0);
        let sgn = match pair.t.sign_at(pl) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => 0.0,
        };
        let sin = sgn * (1.0 - cos * cos).max(0.0).sqrt();
        let ang = sin.atan2(cos);
        let k = (ang * q as f64 / (2.0 * PI)).round() as i64;
        ks[i] = k.rem_euclid(q as i64);
    }
    RotationType::new(q, ks[0], ks[1])
}

/// Whether K/F is unramified at every finite prime and every 𝔭 ∥ 𝔑 to an odd power splits in K.
fn oos_holds(f: &RealQuadraticField, cm: &CMData, ki: usize, n: &Ideal) -> Result<bool> {
    let pi = cm.fields[ki].pairs[0];
    let pair = &cm.pairs[pi];
    let disc = Ideal::principal(&pair.delta())?;
    let c = &cm.conductors[pi];
    if disc != c.mul(c) {
        return Ok(false);
    }
    for (pr, e) in n.factor() {
        if e % 2 == 1 && kronecker_k(f, pair, &pr)? != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Artin symbol of an ideal coprime to the relative discriminant, as ±1.
fn artin_symbol(f: &RealQuadraticField, pair: &TorsionPair, a: &Ideal) -> Result<i32> {
    let mut s = 1;
    for (pr, e) in a.factor() {
        let chi = kronecker_k(f, pair, &pr)?;
        if chi == 0 {
            return Err(HmsError::Integrity("Artin symbol at a ramified prime".into()));
        }
        if e % 2 == 1 {
            s *= chi;
        }
    }
    Ok(s)
}

fn gamma0_contributions(fd: &FieldData, n: &Ideal, b: &Ideal) -> Result<Vec<OrderContribution>> {
    let f = &fd.field;
    let cm = &fd.cm;
    let h_plus = fd.classes.h_plus;
    let mut out = Vec::new();
    for (g, od) in &cm.orders {
        if od.w_s < 2 {
            continue;
        }
        let m = adelic_embedding_number(f, cm, od.field_index, g, n)?;
        let num = 2 * od.h_s * m;
        if num % h_plus != 0 {
            return Err(HmsError::Integrity(format!("elliptic count 2·{}·{}/{} is not integral", od.h_s, m, h_plus)));
        }
        let count = num / h_plus;
        let gen = od
            .pairs
            .iter()
            .copied()
            .find(|&i| cm.pairs[i].q == od.w_s)
            .ok_or_else(|| HmsError::Integrity("no generator of the unit group of the order".into()))?;
        let tau = reference_type(&cm.pairs[gen])?;
        let tau_bar = tau.conjugate();
        let mut types: Vec<(RotationType, u64)> = Vec::new();
        if count > 0 {
            if tau == tau_bar {
                types.push((tau, count));
            } else if oos_holds(f, cm, od.field_index, n)? {
                let rel = cm.conductors[gen].div(g);
                let sign = artin_symbol(f, &cm.pairs[gen], &rel.mul(b))?;
                types.push((if sign == 1 { tau } else { tau_bar }, count));
            } else {
                if count % 2 != 0 {
                    return Err(HmsError::Integrity("odd elliptic count with two rotation types".into()));
                }
                types.push((tau, count / 2));
                types.push((tau_bar, count / 2));
            }
        }
        out.push(OrderContribution { w: od.w_s, q_s: od.q_s, count, types });
    }
    Ok(out)
}

fn contributions(fd: &FieldData, spec: &GroupSpec) -> Result<Vec<OrderContribution>> {
    check_gamma0_spec(spec)?;
    let base = gamma0_contributions(fd, &spec.level, &spec.component)?;
    if spec.variant == GroupVariant::Gamma0 || fd.field.unit_norm == -1 {
        return Ok(base);
    }
    // Γ₀¹ has index 2 in Γ₀ modulo scalars; lift through the double cover
    let mut out = Vec::new();
    for c in base {
        if c.q_s == 1 {
            let types = c.types.iter().map(|&(t, k)| (t, 2 * k)).collect();
            out.push(OrderContribution { count: 2 * c.count, types, ..c });
        } else {
            let w = c.w / 2;
            if w < 2 {
                continue;
            }
            let mut merged: BTreeMap<RotationType, u64> = BTreeMap::new();
            for &(t, k) in &c.types {
                *merged.entry(RotationType::new(w, 1, t.b as i64)?).or_insert(0) += k;
            }
            out.push(OrderContribution { w, count: c.count, types: merged.into_iter().collect(), ..c });
        }
    }
    Ok(out)
}

/// Number of elliptic points of each order q ≥ 2 on one component.
pub fn elliptic_counts(fd: &FieldData, spec: &GroupSpec) -> Result<Vec<(u32, u64)>> {
    let mut by_q: BTreeMap<u32, u64> = BTreeMap::new();
    for c in contributions(fd, spec)? {
        *by_q.entry(c.w).or_insert(0) += c.count;
    }
    Ok(by_q.into_iter().filter(|&(_, k)| k > 0).collect())
}

/// Elliptic points of one component grouped by rotation type.
pub fn rotation_distribution(fd: &FieldData, spec: &GroupSpec) -> Result<Vec<(RotationType, u64)>> {
    let contribs = contributions(fd, spec)?;
    let mut by_type: BTreeMap<RotationType, u64> = BTreeMap::new();
    let mut by_q: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for c in &contribs {
        by_q.entry(c.w).or_insert((0, 0)).0 += c.count;
        for &(t, k) in &c.types {
            *by_type.entry(t).or_insert(0) += k;
            by_q.entry(t.q).or_insert((0, 0)).1 += k;
        }
    }
    if by_q.values().any(|(a, b)| a != b) {
        return Err(HmsError::Integrity("rotation types do not account for all elliptic points".into()));
    }
    Ok(by_type.into_iter().filter(|&(_, k)| k > 0).collect())
}

/// Serialized elliptic record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EllipticRecord {
    pub q: u32,
    #[serde(rename = "type")]
    pub rtype: [u32; 3],
    pub count: u64,
    pub chain: Vec<i64>,
    pub chern: String,
}

pub fn elliptic_records(fd: &FieldData, spec: &GroupSpec) -> Result<Vec<EllipticRecord>> {
    let mut out = Vec::new();
    for (t, k) in rotation_distribution(fd, spec)? {
        let r = resolve_elliptic(t)?;
        out.push(EllipticRecord { q: t.q, rtype: t.triple(), count: k, chain: r.selfints, chern: r.chern.to_string() });
    }
    Ok(out)
}
