//! Narrow and wide class groups via cycles of reduced indefinite forms, unit quotients
//! (R/𝔐)×/R×₊₀, and class data of the CM extensions K/F generated by torsion units.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factor_u64, isqrt_u128, squarefree_part};
use crate::error::{HmsError, Result};
use crate::field::{rat, Elem, Rat, RealQuadraticField};
use crate::ideals::{primes_above, Ideal, PrimeIdeal, Res, ResidueRing, ResidueUnitGroup, Splitting};

pub type Form = (i64, i64, i64);

/// Size cap for explicit residue-ring enumeration.
pub const RESIDUE_CAP: u64 = 1 << 22;

struct FormCtx {
    d: i64,
    s: i64,
}

impl FormCtx {
    fn new(d: i64) -> FormCtx {
        FormCtx { d, s: isqrt_u128(d as u128) as i64 }
    }

    fn is_reduced(&self, f: Form) -> bool {
        let (a, b, _) = f;
        b >= 1 && b <= self.s && 2 * a.abs() >= self.s - b + 1 && 2 * a.abs() <= self.s + b
    }

    /// b' ≡ −b (mod 2|c|) in the normalizing window.
    fn rho(&self, f: Form) -> Form {
        let (_, b, c) = f;
        let m = 2 * c.abs();
        let lo = if (c as i128) * (c as i128) > self.d as i128 { -c.abs() + 1 } else { self.s - m + 1 };
        let b2 = lo + (-b - lo).rem_euclid(m);
        let c2 = (b2 * b2 - self.d) / (4 * c);
        (c, b2, c2)
    }

    fn reduce(&self, mut f: Form) -> Form {
        let mut steps = 0;
        while !self.is_reduced(f) {
            f = self.rho(f);
            steps += 1;
            assert!(steps < 10_000, "form reduction did not terminate");
        }
        f
    }

    fn reduced_forms(&self) -> Vec<Form> {
        let mut out = Vec::new();
        for b in 1..=self.s {
            if (b - self.d).rem_euclid(2) != 0 {
                continue;
            }
            let m = (self.d - b * b) / 4;
            for g in crate::arith::divisors_u64(m as u64) {
                let g = g as i64;
                for a in [g, -g] {
                    let f = (a, b, -m / a);
                    if self.is_reduced(f) {
                        out.push(f);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Form attached to a nonzero ideal: Nm(a x − β y)/a for the primitive part a Z + βZ.
pub fn ideal_to_form(i: &Ideal) -> Form {
    let d = i.d();
    let c = &i.c;
    let a = (&i.a / c).to_i64().expect("form overflow");
    let b0 = (&i.b / c).to_i64().expect("form overflow");
    let beta = Elem::from_ints(d, b0, 1);
    let tr = beta.trace().to_integer().to_i64().unwrap();
    let nm = beta.norm().to_integer().to_i64().unwrap();
    (a, -tr, nm / a)
}

#[derive(Clone, Debug)]
pub struct ClassGroupData {
    pub disc: i64,
    pub h: u64,
    pub h_plus: u64,
    pub plus_structure: Vec<u64>,
    pub structure: Vec<u64>,
    forms: Vec<Form>,
    form_class: HashMap<Form, usize>,
    table: Vec<Vec<usize>>,
    /// Narrow class of (√D), generating the kernel of Cl⁺ → Cl.
    pub sqrt_d_class: usize,
    /// Wide class index of each narrow class.
    wide_of: Vec<usize>,
    d: i64,
}

impl ClassGroupData {
    pub fn new(f: &RealQuadraticField) -> Result<ClassGroupData> {
        let ctx = FormCtx::new(f.disc);
        let reduced = ctx.reduced_forms();
        let mut form_class: HashMap<Form, usize> = HashMap::new();
        let mut cycles: Vec<Vec<Form>> = Vec::new();
        for &g in &reduced {
            if form_class.contains_key(&g) {
                continue;
            }
            let mut cyc = vec![g];
            let mut x = ctx.rho(g);
            while x != g {
                cyc.push(x);
                x = ctx.rho(x);
            }
            cycles.push(cyc);
            let k = cycles.len() - 1;
            for y in &cycles[k] {
                form_class.insert(*y, k);
            }
        }
        // the principal class first, the rest by canonical form
        let principal = ctx.reduce((1, f.disc % 2, (f.disc % 2 - f.disc) / 4));
        let pidx = form_class[&principal];
        let mut order: Vec<usize> = (0..cycles.len()).collect();
        order.sort_by_key(|&k| (k != pidx, *cycles[k].iter().min().unwrap()));
        let mut remap = vec![0; cycles.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        for v in form_class.values_mut() {
            *v = remap[*v];
        }
        let forms: Vec<Form> = order.iter().map(|&k| *cycles[k].iter().min().unwrap()).collect();
        let hp = forms.len();
        let mut data = ClassGroupData {
            disc: f.disc,
            h: 0,
            h_plus: hp as u64,
            plus_structure: vec![],
            structure: vec![],
            forms,
            form_class,
            table: vec![],
            sqrt_d_class: 0,
            wide_of: vec![],
            d: f.d,
        };
        // ideal representatives from small primes
        let mut reps: Vec<Option<Ideal>> = vec![None; hp];
        reps[0] = Some(Ideal::unit(f.d));
        let mut p = 2u64;
        while reps.iter().any(|r| r.is_none()) {
            if crate::arith::is_prime_u64(p) {
                for pr in primes_above(f.d, p) {
                    if pr.f == 1 {
                        let k = data.narrow_class(&pr.ideal);
                        if reps[k].is_none() {
                            reps[k] = Some(pr.ideal.clone());
                        }
                    }
                }
            }
            p += 1;
            if p > 1_000_000 {
                return Err(HmsError::Integrity("class representatives not found".into()));
            }
        }
        let reps: Vec<Ideal> = reps.into_iter().map(|r| r.unwrap()).collect();
        data.table = (0..hp).map(|i| (0..hp).map(|j| data.narrow_class(&reps[i].mul(&reps[j]))).collect()).collect();
        data.sqrt_d_class = data.narrow_class(&Ideal::principal(&Elem::sqrt_d(f.d))?);
        if (f.unit_norm == -1) != (data.sqrt_d_class == 0) {
            return Err(HmsError::Integrity("narrow class of (√D) inconsistent with unit norm".into()));
        }
        let mut wide_of = vec![usize::MAX; hp];
        let mut nw = 0;
        for k in 0..hp {
            if wide_of[k] == usize::MAX {
                wide_of[k] = nw;
                wide_of[data.table[k][data.sqrt_d_class]] = nw;
                nw += 1;
            }
        }
        data.wide_of = wide_of;
        data.h = nw as u64;
        data.plus_structure = abelian_invariants(&data.table);
        let wide_table: Vec<Vec<usize>> = {
            let mut t = vec![vec![0; nw]; nw];
            for i in 0..hp {
                for j in 0..hp {
                    t[data.wide_of[i]][data.wide_of[j]] = data.wide_of[data.table[i][j]];
                }
            }
            t
        };
        data.structure = abelian_invariants(&wide_table);
        Ok(data)
    }

    pub fn narrow_class(&self, i: &Ideal) -> usize {
        let ctx = FormCtx::new(self.disc);
        let f = ctx.reduce(ideal_to_form(i));
        self.form_class[&f]
    }

    pub fn wide_class(&self, i: &Ideal) -> usize {
        self.wide_of[self.narrow_class(i)]
    }

    pub fn wide_of_narrow(&self, k: usize) -> usize {
        self.wide_of[k]
    }

    pub fn mul_classes(&self, i: usize, j: usize) -> usize {
        self.table[i][j]
    }

    pub fn canonical_forms(&self) -> &[Form] {
        &self.forms
    }

    fn reps_coprime(&self, modulus: u64, wide: bool) -> Vec<Ideal> {
        let n = if wide { self.h as usize } else { self.h_plus as usize };
        let mut reps: Vec<Option<Ideal>> = vec![None; n];
        reps[0] = Some(Ideal::unit(self.d));
        let mut p = 2u64;
        while reps.iter().any(|r| r.is_none()) {
            if crate::arith::is_prime_u64(p) && modulus % p != 0 {
                for pr in primes_above(self.d, p) {
                    if pr.f == 1 {
                        let k = if wide { self.wide_class(&pr.ideal) } else { self.narrow_class(&pr.ideal) };
                        if reps[k].is_none() {
                            reps[k] = Some(pr.ideal.clone());
                        }
                    }
                }
            }
            p += 1;
        }
        reps.into_iter().map(|r| r.unwrap()).collect()
    }

    /// Integral narrow class representatives coprime to 30·n, indexed by narrow class.
    pub fn narrow_reps(&self, n: u64) -> Vec<Ideal> {
        self.reps_coprime(30 * n.max(1), false)
    }

    /// Integral wide class representatives coprime to 30·n, indexed by wide class.
    pub fn wide_reps(&self, n: u64) -> Vec<Ideal> {
        self.reps_coprime(30 * n.max(1), true)
    }
}

/// Invariant factors of a finite abelian group given by its multiplication table.
fn abelian_invariants(table: &[Vec<usize>]) -> Vec<u64> {
    let n = table.len() as u64;
    let pow = |x: usize, e: u64| -> usize {
        let mut acc = 0usize;
        for _ in 0..e {
            acc = table[acc][x];
        }
        acc
    };
    let mut factors: Vec<u64> = Vec::new();
    for (p, a) in factor_u64(n) {
        // ranks of kernels of x ↦ x^{p^j}
        let mut kernel_sizes = vec![1u64];
        let mut pj = 1u64;
        for _ in 0..a {
            pj *= p;
            kernel_sizes.push((0..table.len()).filter(|&x| pow(x, pj) == 0).count() as u64);
        }
        let mut ranks: Vec<u32> = Vec::new();
        for j in 1..kernel_sizes.len() {
            let ratio = kernel_sizes[j] / kernel_sizes[j - 1];
            let mut r = 0;
            let mut t = 1;
            while t < ratio {
                t *= p;
                r += 1;
            }
            ranks.push(r);
        }
        // number of cyclic factors of order ≥ p^j is ranks[j-1]
        let mut p_factors: Vec<u64> = Vec::new();
        for j in 0..ranks.len() {
            let here = ranks[j] - ranks.get(j + 1).copied().unwrap_or(0);
            for _ in 0..here {
                p_factors.push(p.pow(j as u32 + 1));
            }
        }
        p_factors.sort_unstable_by(|x, y| y.cmp(x));
        for (i, q) in p_factors.into_iter().enumerate() {
            if i < factors.len() {
                factors[i] *= q;
            } else {
                factors.push(q);
            }
        }
    }
    factors.sort_unstable();
    factors
}

/// Class number of the imaginary quadratic field of discriminant `disc` < 0.
pub fn imaginary_class_number(disc: i64) -> u64 {
    assert!(disc < 0);
    let n = -disc;
    let mut h = 0;
    let mut a = 1i64;
    while 3 * a * a <= n {
        for b in -a + 1..=a {
            if (b * b + n) % (4 * a) != 0 {
                continue;
            }
            let c = (b * b + n) / (4 * a);
            if c < a {
                continue;
            }
            if c == a && b < 0 {
                continue;
            }
            if b.gcd(&a).gcd(&c) != 1 {
                continue;
            }
            h += 1;
        }
        a += 1;
    }
    h
}

/// Discriminant of Q(√r) for squarefree r.
pub fn quad_disc(r: i64) -> i64 {
    if r.rem_euclid(4) == 1 {
        r
    } else {
        4 * r
    }
}

/// Prime discriminants whose product is d.
pub fn prime_discriminants(disc: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut rest = disc;
    for (p, _) in factor_u64(disc.unsigned_abs()) {
        if p == 2 {
            continue;
        }
        let ps = if p % 4 == 1 { p as i64 } else { -(p as i64) };
        out.push(ps);
        rest /= ps;
    }
    if rest != 1 {
        out.insert(0, rest);
    }
    out
}

/// Order of the image of a global unit in (R/𝔐)×.
pub fn unit_order_mod(ring: &ResidueRing, u: &Elem) -> Result<u64> {
    if ring.size() == 1 {
        return Ok(1);
    }
    Ok(ring.order(ring.from_elem(u)?))
}

/// φ_{>0}(𝔐) = #((R/𝔐)×/R×₊₀).
pub fn phi_gt0(f: &RealQuadraticField, m: &Ideal) -> Result<u64> {
    let ring = ResidueRing::new(m)?;
    Ok(ring.unit_count() / unit_order_mod(&ring, &f.eps_plus)?)
}

/// φ¹(𝔐) = #((R/𝔐)×/R×²).
pub fn phi_sq(f: &RealQuadraticField, m: &Ideal) -> Result<u64> {
    let ring = ResidueRing::new(m)?;
    Ok(ring.unit_count() / unit_order_mod(&ring, &(&f.eps * &f.eps))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupVariant {
    #[serde(rename = "Gamma0")]
    Gamma0,
    #[serde(rename = "Gamma1")]
    Gamma1,
    #[serde(rename = "Gamma0^1")]
    Gamma0One,
    #[serde(rename = "Gamma1^1")]
    Gamma1One,
}

impl GroupVariant {
    pub fn is_one(self) -> bool {
        matches!(self, GroupVariant::Gamma0One | GroupVariant::Gamma1One)
    }

    pub fn is_gamma1(self) -> bool {
        matches!(self, GroupVariant::Gamma1 | GroupVariant::Gamma1One)
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupVariant::Gamma0 => "Gamma0",
            GroupVariant::Gamma1 => "Gamma1",
            GroupVariant::Gamma0One => "Gamma0^1",
            GroupVariant::Gamma1One => "Gamma1^1",
        }
    }

    pub fn parse(s: &str) -> Option<GroupVariant> {
        match s {
            "Gamma0" | "G0" | "gamma0" => Some(GroupVariant::Gamma0),
            "Gamma1" | "G1" | "gamma1" => Some(GroupVariant::Gamma1),
            "Gamma0^1" | "Gamma01" | "G01" | "gamma0^1" => Some(GroupVariant::Gamma0One),
            "Gamma1^1" | "Gamma11" | "G11" | "gamma1^1" => Some(GroupVariant::Gamma1One),
            _ => None,
        }
    }
}

/// D = (R/𝔐)× × (R/(𝔑/𝔐))× modulo the unit subgroup H of the variant, with a transversal.
pub struct UnitQuotient {
    pub g1: ResidueUnitGroup,
    pub g2: ResidueUnitGroup,
    pub transversal: Vec<(Res, Res)>,
    pub h_size: usize,
}

pub fn unit_quotient(f: &RealQuadraticField, m: &Ideal, n: &Ideal, variant: GroupVariant) -> Result<UnitQuotient> {
    let nm = n.div(m);
    let g1 = ResidueUnitGroup::new(m, RESIDUE_CAP)?;
    let g2 = ResidueUnitGroup::new(&nm, RESIDUE_CAP)?;
    let r1 = &g1.ring;
    let r2 = &g2.ring;
    let img = |e: &Elem| -> Result<(Res, Res)> { Ok((r1.from_elem(e)?, r2.from_elem(e)?)) };
    let one = (r1.one(), r2.one());
    let tp = if variant.is_one() { &f.eps * &f.eps } else { f.eps_plus.clone() };
    let mut gens: Vec<(Res, Res)> = vec![img(&f.eps)?, img(&-f.one())?];
    gens.push((r1.from_elem(&tp)?, r2.one()));
    gens.push((r1.one(), r2.from_elem(&tp)?));
    if !variant.is_gamma1() {
        let gn = ResidueUnitGroup::new(n, RESIDUE_CAP)?;
        for &g in &gn.gens {
            let e = gn.ring.to_elem(g);
            let inv = gn.ring.to_elem(gn.ring.inv(g).expect("generator is a unit"));
            gens.push((r1.from_elem(&e)?, r2.from_elem(&inv)?));
        }
    }
    let mul = |x: (Res, Res), y: (Res, Res)| (r1.mul(x.0, y.0), r2.mul(x.1, y.1));
    let h = crate::ideals::subgroup_closure(one, &gens, mul);
    // lexicographic order on exponent vectors
    let mut elems: Vec<(Vec<u64>, (Res, Res))> = Vec::new();
    for a in g1.elements() {
        for b in g2.elements() {
            let mut key = g1.log(a).unwrap().clone();
            key.extend(g2.log(b).unwrap().iter().copied());
            elems.push((key, (a, b)));
        }
    }
    elems.sort();
    let mut covered: HashSet<(Res, Res)> = HashSet::new();
    let mut transversal = Vec::new();
    for (_, x) in elems {
        if covered.contains(&x) {
            continue;
        }
        transversal.push(x);
        for &y in &h {
            covered.insert(mul(x, y));
        }
    }
    Ok(UnitQuotient { h_size: h.len(), g1, g2, transversal })
}

/// #Q_i(𝔐, 𝔑) over all components and cusp classes: h⁺·h·#(D/H).
pub fn q_group_size(f: &RealQuadraticField, cg: &ClassGroupData, m: &Ideal, n: &Ideal, variant: GroupVariant) -> Result<u64> {
    let uq = unit_quotient(f, m, n, variant)?;
    Ok(cg.h_plus * cg.h * uq.transversal.len() as u64)
}

// ---------------------------------------------------------------------------
// CM extensions generated by torsion units

/// (u, t) with x² − t x + u the characteristic polynomial of a torsion class in PGL.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorsionPair {
    pub u: Elem,
    pub t: Elem,
    /// Order of ζ = γ²/u, equal to the order of the class of γ in PGL₂.
    pub q: u32,
    pub twisted: bool,
}

impl TorsionPair {
    pub fn delta(&self) -> Elem {
        &(&self.t * &self.t) - &self.u.scale(&rat(4))
    }
}

/// c = ζ + ζ⁻¹ for the orders q whose c lies in F.
fn cyclotomic_values(f: &RealQuadraticField) -> Vec<(u32, Elem)> {
    let d = f.d;
    let mut out = vec![
        (2, f.elem(-2, 0)),
        (3, f.elem(-1, 0)),
        (4, f.elem(0, 0)),
        (6, f.elem(1, 0)),
    ];
    let s = Elem::sqrt_d(d);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    match d {
        2 => {
            out.push((8, s.clone()));
            out.push((8, -&s));
        }
        3 => {
            out.push((12, s.clone()));
            out.push((12, -&s));
        }
        5 => {
            for sg in [1, -1] {
                let ss = s.scale(&rat(sg));
                out.push((5, (&ss - &f.one()).scale(&half)));
                out.push((10, (&ss + &f.one()).scale(&half)));
            }
        }
        _ => {}
    }
    out
}

/// All torsion pairs with u ∈ {1, ε⁺ (when ε⁺ is not a square)}.
pub fn torsion_pairs(f: &RealQuadraticField) -> Vec<TorsionPair> {
    let mut us = vec![(f.one(), false)];
    if !f.eps_plus.is_square() {
        us.push((f.eps_plus.clone(), true));
    }
    let mut out = Vec::new();
    for (u, twisted) in &us {
        for (q, c) in cyclotomic_values(f) {
            let t2 = u * &(&f.elem(2, 0) + &c);
            if let Some(t) = t2.sqrt() {
                if t.is_zero() {
                    out.push(TorsionPair { u: u.clone(), t, q, twisted: *twisted });
                } else {
                    let tp = if t.sign_at(crate::field::Place::V).is_gt() { t } else { -&t };
                    out.push(TorsionPair { u: u.clone(), t: tp.clone(), q, twisted: *twisted });
                    out.push(TorsionPair { u: u.clone(), t: -&tp, q, twisted: *twisted });
                }
            }
        }
    }
    out
}

/// Local conductor data of R[γ] at one prime: exponent k and a witness a.
#[derive(Clone, Debug)]
pub struct LocalConductor {
    pub prime: PrimeIdeal,
    pub k: u32,
    pub a: Elem,
}

fn val_in(ring_pows: &[Ideal], x: &Elem) -> u32 {
    let mut v = 0;
    for p in ring_pows.iter().skip(1) {
        if p.contains(x) {
            v += 1;
        } else {
            break;
        }
    }
    v
}

/// Conductor 𝔣(u,t) of R[x]/(x² − t x + u) inside its maximal order.
pub fn pair_conductor(f: &RealQuadraticField, pair: &TorsionPair) -> Result<(Ideal, Vec<LocalConductor>)> {
    let delta = pair.delta();
    let di = Ideal::principal(&delta)?;
    let mut cond = Ideal::unit(f.d);
    let mut locals = Vec::new();
    for (pr, v) in di.factor() {
        if v < 2 {
            continue;
        }
        let kmax = (v / 2) as u32;
        let pows: Vec<Ideal> = (0..=2 * kmax + 1).map(|j| pr.ideal.pow(j as i64)).collect();
        let mut best = (0u32, f.zero());
        for k in (1..=kmax).rev() {
            let ring = ResidueRing::new(&pows[2 * k as usize])?;
            let found = ring.elements().map(|r| ring.to_elem(r)).find(|a| {
                let lin = &pair.t - &a.scale(&rat(2));
                let quad = &(&(a * a) - &(&pair.t * a)) + &pair.u;
                val_in(&pows, &lin) >= k && val_in(&pows, &quad) >= 2 * k
            });
            if let Some(a) = found {
                best = (k, a);
                break;
            }
        }
        if best.0 > 0 {
            cond = cond.mul(&pows[best.0 as usize]);
            locals.push(LocalConductor { prime: pr, k: best.0, a: best.1 });
        }
    }
    Ok((cond, locals))
}

/// Artin symbol (K/𝔭) ∈ {1, −1, 0} of K = F[x]/(x² − t x + u).
pub fn kronecker_k(f: &RealQuadraticField, pair: &TorsionPair, pr: &PrimeIdeal) -> Result<i32> {
    let (_, locals) = pair_conductor(f, pair)?;
    let (k, a) = match locals.iter().find(|l| l.prime == *pr) {
        Some(l) => (l.k, l.a.clone()),
        None => (0, f.zero()),
    };
    let res_field = ResidueRing::new(&pr.ideal)?;
    let (tbar, nbar) = if k == 0 {
        (res_field.from_elem(&pair.t)?, res_field.from_elem(&pair.u)?)
    } else {
        let pows: Vec<Ideal> = (0..=2 * k + 1).map(|j| pr.ideal.pow(j as i64)).collect();
        let pi = pr.ideal.element_not_in(&pows[2]).expect("uniformizer");
        let lin = &pair.t - &a.scale(&rat(2));
        let quad = &(&(&a * &a) - &(&pair.t * &a)) + &pair.u;
        let pik = pi.pow(k as u64);
        let pi2k = pi.pow(2 * k as u64);
        let find = |target: &Elem, scale: &Elem, modulus: &Ideal| -> Option<Res> {
            res_field.elements().find(|&r| modulus.contains(&(target - &(&res_field.to_elem(r) * scale))))
        };
        let tb = find(&lin, &pik, &pows[k as usize + 1]).ok_or_else(|| HmsError::Integrity("local trace".into()))?;
        let nb = find(&quad, &pi2k, &pows[2 * k as usize + 1]).ok_or_else(|| HmsError::Integrity("local norm".into()))?;
        (tb, nb)
    };
    let disc = res_field.sub(res_field.mul(tbar, tbar), res_field.mul(res_field.reduce(4, 0), nbar));
    if pr.p == 2 {
        if tbar == res_field.zero() {
            return Ok(0);
        }
        let has_root = res_field.elements().any(|x| {
            let v = res_field.add(res_field.sub(res_field.mul(x, x), res_field.mul(tbar, x)), nbar);
            v == res_field.zero()
        });
        return Ok(if has_root { 1 } else { -1 });
    }
    if disc == res_field.zero() {
        return Ok(0);
    }
    let e = (pr.norm() - 1) / 2;
    Ok(if res_field.pow(disc, e) == res_field.one() { 1 } else { -1 })
}

/// Data of one CM field K = F(√δ) containing torsion pairs.
#[derive(Clone, Debug)]
pub struct CMField {
    pub delta: Elem,
    /// Indices into the torsion pair list.
    pub pairs: Vec<usize>,
    /// #μ_K.
    pub mu: u32,
    /// #(Z_K×/R×) = 1 + number of pairs in K.
    pub units_mod_r: u32,
    pub hasse_q: u32,
    pub h_zk: u64,
    /// Discriminants of the two imaginary quadratic subfields (empty for cyclic K).
    pub imag_subfields: Vec<i64>,
}

fn same_field(d1: &Elem, d2: &Elem) -> bool {
    (d1 * d2).is_square()
}

fn roots_of_unity_count(disc: i64) -> u32 {
    match disc {
        -4 => 4,
        -3 => 6,
        _ => 2,
    }
}

/// A generator of K = F(√δ) modulo F×² with small coordinates.
///
/// For a twisted pair δ = ε⁺(c − 2) with c = ζ + ζ⁻¹, and (1 + ε⁺)² = ε⁺(2 + Tr ε⁺) shows ε⁺ ≡ 2 + Tr ε⁺
/// modulo squares. The ideal (1 + ε⁺) is stable under conjugation, so 2 + Tr ε⁺ = m k² with m composed
/// of primes dividing d_F.
fn small_delta(f: &RealQuadraticField, p: &TorsionPair) -> Result<Elem> {
    let dl = p.delta();
    if !p.twisted {
        return Ok(dl);
    }
    let c_minus_2 = &(&p.t * &p.t).div(&p.u)? - &f.elem(4, 0);
    let n = (&f.elem(1, 0) + &p.u).norm();
    if !n.is_integer() || !n.is_positive() {
        return Err(HmsError::Integrity("Nm(1 + ε⁺) is not a positive integer".into()));
    }
    let mut rest = n.to_integer();
    let mut m = BigInt::one();
    for (q, _) in factor_u64(f.disc as u64) {
        let q = BigInt::from(q);
        let mut e = 0;
        while (&rest % &q).is_zero() {
            rest /= &q;
            e += 1;
        }
        if e % 2 == 1 {
            m *= &q;
        }
    }
    let r = rest.sqrt();
    if &r * &r != rest {
        return Err(HmsError::Integrity("Nm(1 + ε⁺) is not m·k² with m | d_F".into()));
    }
    let small = c_minus_2.scale(&Rat::from_integer(m));
    if !(&small * &dl).is_square() {
        return Err(HmsError::Integrity("reduced CM generator differs from δ modulo squares".into()));
    }
    Ok(small)
}

/// Groups torsion pairs by CM field and computes h(Z_K) with the biquadratic class number formula.
pub fn cm_fields(f: &RealQuadraticField, pairs: &[TorsionPair], h_f: u64) -> Result<Vec<CMField>> {
    let mut fields: Vec<CMField> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let dl = small_delta(f, p)?;
        match fields.iter_mut().find(|k| same_field(&k.delta, &dl)) {
            Some(k) => k.pairs.push(i),
            None => fields.push(CMField {
                delta: dl,
                pairs: vec![i],
                mu: 0,
                units_mod_r: 0,
                hasse_q: 0,
                h_zk: 0,
                imag_subfields: vec![],
            }),
        }
    }
    for k in fields.iter_mut() {
        let n_one = k.pairs.iter().filter(|&&i| !pairs[i].twisted).count() as u32;
        k.mu = 2 * (1 + n_one);
        k.units_mod_r = 1 + k.pairs.len() as u32;
        if k.units_mod_r % (1 + n_one) != 0 {
            return Err(HmsError::Integrity("torsion units do not form a group".into()));
        }
        k.hasse_q = k.units_mod_r / (1 + n_one);
        let nm = k.delta.norm();
        match crate::field::rat_sqrt(&nm) {
            None => {
                // K/Q cyclic: only Q(ζ₅) arises from torsion
                if f.d != 5 || k.mu != 10 {
                    return Err(HmsError::Integrity(format!("non-Galois CM field for D = {}", f.d)));
                }
                k.h_zk = 1;
            }
            Some(s) => {
                let tr = k.delta.trace();
                let mut subs: Vec<i64> = Vec::new();
                if k.delta.is_rational() {
                    let r = squarefree_part(rat_to_i64(&(&k.delta.x * rat(k.delta.x.denom().to_i64().unwrap().pow(2))))?);
                    subs.push(quad_disc(r));
                    subs.push(quad_disc(squarefree_part(r * f.d)));
                } else {
                    for sg in [1, -1] {
                        let v = &tr + &(&s * rat(2 * sg));
                        let r = squarefree_part(rat_to_i64(&(&v * rat(v.denom().to_i64().unwrap().pow(2))))?);
                        subs.push(quad_disc(r));
                    }
                }
                for &dk in &subs {
                    let r = disc_to_r(dk);
                    if r >= 0 {
                        return Err(HmsError::Integrity("imaginary subfield expected".into()));
                    }
                    // √(δ·r) ∈ F certifies Q(√r) ⊂ K
                    let test = k.delta.scale(&rat(r));
                    if !test.is_square() {
                        return Err(HmsError::Integrity("imaginary subfield check failed".into()));
                    }
                }
                let (w1, w2) = (roots_of_unity_count(subs[0]), roots_of_unity_count(subs[1]));
                let l = w1.lcm(&w2);
                let idx = k.mu / l;
                let h1 = imaginary_class_number(subs[0]);
                let h2 = imaginary_class_number(subs[1]);
                let num = k.hasse_q as u64 * idx as u64 * h_f * h1 * h2;
                if num % 2 != 0 {
                    return Err(HmsError::Integrity("odd biquadratic class number numerator".into()));
                }
                k.h_zk = num / 2;
                k.imag_subfields = subs;
            }
        }
    }
    Ok(fields)
}

fn disc_to_r(dk: i64) -> i64 {
    if dk % 4 == 0 {
        dk / 4
    } else {
        dk
    }
}

fn rat_to_i64(r: &Rat) -> Result<i64> {
    if !r.is_integer() {
        return Err(HmsError::Arithmetic(format!("{} is not an integer", r)));
    }
    r.to_integer().to_i64().ok_or_else(|| HmsError::Arithmetic("overflow".into()))
}

/// One order S_𝔤 = R + 𝔤 Z_K containing torsion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CMOrderData {
    pub field_index: usize,
    pub conductor: String,
    pub conductor_norm: u64,
    /// Class number h(S).
    pub h_s: u64,
    /// Hasse unit index Q(S) ∈ {1, 2}.
    pub q_s: u32,
    /// #(S×/R×).
    pub w_s: u32,
    /// #μ_S / 2.
    pub mu_half: u32,
    /// Pair indices whose unit lies in S.
    pub pairs: Vec<usize>,
}

/// Everything about torsion in PGL₂⁺(F) up to conjugacy by orders.
#[derive(Clone, Debug)]
pub struct CMData {
    pub pairs: Vec<TorsionPair>,
    pub conductors: Vec<Ideal>,
    pub fields: Vec<CMField>,
    /// Field index of each pair.
    pub field_of: Vec<usize>,
    pub orders: Vec<(Ideal, CMOrderData)>,
}

pub fn divisors_of_ideal(i: &Ideal) -> Vec<Ideal> {
    let mut out = vec![Ideal::unit(i.d())];
    for (pr, e) in i.factor() {
        let cur = out.clone();
        let mut pk = Ideal::unit(i.d());
        for _ in 0..e {
            pk = pk.mul(&pr.ideal);
            out.extend(cur.iter().map(|x| x.mul(&pk)));
        }
    }
    out.sort_by_key(|x| x.sort_key());
    out
}

impl CMData {
    pub fn new(f: &RealQuadraticField, h_f: u64) -> Result<CMData> {
        let pairs = torsion_pairs(f);
        let mut conductors = Vec::new();
        for p in &pairs {
            conductors.push(pair_conductor(f, p)?.0);
        }
        let fields = cm_fields(f, &pairs, h_f)?;
        let mut field_of = vec![0; pairs.len()];
        for (ki, k) in fields.iter().enumerate() {
            for &i in &k.pairs {
                field_of[i] = ki;
            }
        }
        let mut orders = Vec::new();
        for (ki, k) in fields.iter().enumerate() {
            let mut gs: Vec<Ideal> = Vec::new();
            for &i in &k.pairs {
                for g in divisors_of_ideal(&conductors[i]) {
                    if !gs.contains(&g) {
                        gs.push(g);
                    }
                }
            }
            gs.sort_by_key(|x| x.sort_key());
            for g in gs {
                let inside: Vec<usize> = k.pairs.iter().copied().filter(|&i| g.divides(&conductors[i])).collect();
                let w_s = 1 + inside.len() as u32;
                let mu_half = 1 + inside.iter().filter(|&&i| !pairs[i].twisted).count() as u32;
                let q_s = w_s / mu_half;
                // h(S) = h(Z_K) Nm𝔤 ∏(1 − (K/𝔭)/Nm𝔭) / [Z_K× : S×]
                let mut hs = Rat::from_integer(BigInt::from(k.h_zk)) * g.norm();
                for (pr, _) in g.factor() {
                    let chi = kronecker_k(f, &pairs[k.pairs[0]], &pr)?;
                    let np = BigInt::from(pr.norm());
                    hs = hs * Rat::new(&np - BigInt::from(chi), np);
                }
                hs = hs * Rat::new(BigInt::from(w_s), BigInt::from(k.units_mod_r));
                if !hs.is_integer() || hs.is_negative() {
                    return Err(HmsError::Integrity(format!("non-integral order class number {}", hs)));
                }
                let data = CMOrderData {
                    field_index: ki,
                    conductor: format!("{:?}", g),
                    conductor_norm: g.norm().to_integer().to_u64().unwrap(),
                    h_s: hs.to_integer().to_u64().unwrap(),
                    q_s,
                    w_s,
                    mu_half,
                    pairs: inside,
                };
                orders.push((g, data));
            }
        }
        Ok(CMData { pairs, conductors, fields, field_of, orders })
    }

    /// Order data for a pair and a divisor 𝔡 of its conductor.
    pub fn order_data(&self, pair_index: usize, g: &Ideal) -> Option<&CMOrderData> {
        let ki = self.field_of[pair_index];
        self.orders.iter().find(|(gg, o)| o.field_index == ki && gg == g).map(|(_, o)| o)
    }
}

/// cm_order_data(F, u, t, 𝔡) for a pair given by value.
pub fn cm_order_data(f: &RealQuadraticField, h_f: u64, u: &Elem, t: &Elem, g: &Ideal) -> Result<CMOrderData> {
    let cm = CMData::new(f, h_f)?;
    let idx = cm
        .pairs
        .iter()
        .position(|p| &p.u == u && &p.t == t)
        .ok_or_else(|| HmsError::InvalidInput("(u, t) is not a torsion pair".into()))?;
    if !g.divides(&cm.conductors[idx]) {
        return Err(HmsError::InvalidInput("divisor does not divide the conductor".into()));
    }
    cm.order_data(idx, g).cloned().ok_or_else(|| HmsError::Integrity("order not found".into()))
}

/// Splitting type of 𝔭 in K, from the Artin symbol.
pub fn splitting_in_k(chi: i32) -> Splitting {
    match chi {
        1 => Splitting::Split,
        -1 => Splitting::Inert,
        _ => Splitting::Ramified,
    }
}

/// Divisors of the conductor pattern set, used in tests.
pub fn conductor_norms(cm: &CMData) -> BTreeSet<u64> {
    cm.conductors.iter().map(|c| c.norm().to_integer().to_u64().unwrap()).collect()
}

/// A field with its class groups and torsion data, computed once and shared by all levels.
#[derive(Clone, Debug)]
pub struct FieldData {
    pub field: RealQuadraticField,
    pub classes: ClassGroupData,
    pub cm: CMData,
}

impl FieldData {
    pub fn new(d: i64) -> Result<FieldData> {
        Self::from_field(RealQuadraticField::new(d)?)
    }

    pub fn from_field(field: RealQuadraticField) -> Result<FieldData> {
        let classes = ClassGroupData::new(&field)?;
        let cm = CMData::new(&field, classes.h)?;
        Ok(FieldData { field, classes, cm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cg(d: i64) -> ClassGroupData {
        ClassGroupData::new(&RealQuadraticField::new(d).unwrap()).unwrap()
    }

    #[test]
    fn paper_class_groups() {
        let c85 = cg(85);
        assert_eq!((c85.h, c85.h_plus), (2, 2));
        let c165 = cg(165);
        assert_eq!(c165.structure, vec![2]);
        assert_eq!(c165.plus_structure, vec![2, 2]);
        let c5 = cg(5);
        assert_eq!((c5.h, c5.h_plus), (1, 1));
        let c11 = cg(11);
        assert_eq!((c11.h, c11.h_plus), (1, 2));
    }

    #[test]
    fn phi_examples() {
        let f = RealQuadraticField::new(5).unwrap();
        assert_eq!(phi_gt0(&f, &Ideal::unit(5)).unwrap(), 1);
        let two = Ideal::from_int(5, 2).unwrap();
        assert_eq!(phi_gt0(&f, &two).unwrap(), 1);
        assert_eq!(phi_sq(&f, &two).unwrap(), 1);
    }

    #[test]
    fn imaginary_class_numbers() {
        assert_eq!(imaginary_class_number(-4), 1);
        assert_eq!(imaginary_class_number(-20), 2);
        assert_eq!(imaginary_class_number(-23), 3);
        assert_eq!(imaginary_class_number(-56), 4);
    }

    #[test]
    fn cm_examples() {
        let f = RealQuadraticField::new(5).unwrap();
        let cm = CMData::new(&f, 1).unwrap();
        for k in &cm.fields {
            assert_eq!(k.h_zk, 1);
        }
        let d = cm_order_data(&f, 1, &f.one(), &f.zero(), &Ideal::unit(5)).unwrap();
        assert_eq!(d.h_s, 1);
    }

    #[test]
    fn prime_discs() {
        assert_eq!(prime_discriminants(12), vec![-4, -3]);
        assert_eq!(prime_discriminants(165), vec![-3, 5, -11]);
        assert_eq!(prime_discriminants(8), vec![8]);
    }
}
