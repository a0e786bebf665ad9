//! Cusps of Γ₀, Γ₁, Γ₀¹, Γ₁¹ levels: enumeration through unit quotients, stabilizer types G(M, V),
//! and resolution cycles from periodic HJ expansions.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::classgroups::{divisors_of_ideal, phi_gt0, phi_sq, unit_quotient, ClassGroupData, GroupVariant};
use crate::error::{HmsError, Result};
use crate::field::{hj_expand_periodic, rat, Elem, Place, RealQuadraticField};
use crate::ideals::{approximate, split_sum, Ideal, ResidueRing, ValConstraint};

const HJ_STEPS: usize = 100_000;

/// A congruence subgroup Γ(𝔑)_𝔟 of one of the four standard shapes.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    pub variant: GroupVariant,
    pub level: Ideal,
    pub component: Ideal,
}

/// 2×2 matrix over F.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat2(pub [[Elem; 2]; 2]);

impl Mat2 {
    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        let e = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
        Mat2([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    pub fn det(&self) -> Elem {
        let a = &self.0;
        &(&a[0][0] * &a[1][1]) - &(&a[0][1] * &a[1][0])
    }

    pub fn inv(&self) -> Result<Mat2> {
        let di = self.det().inv()?;
        let a = &self.0;
        Ok(Mat2([[&a[1][1] * &di, -&(&a[0][1] * &di)], [-&(&a[1][0] * &di), &a[0][0] * &di]]))
    }

    pub fn scale(&self, s: &Elem) -> Mat2 {
        let a = &self.0;
        Mat2([[&a[0][0] * s, &a[0][1] * s], [&a[1][0] * s, &a[1][1] * s]])
    }

    /// Action on a projective point (x : y).
    pub fn act(&self, p: &(Elem, Elem)) -> (Elem, Elem) {
        let a = &self.0;
        (&(&a[0][0] * &p.0) + &(&a[0][1] * &p.1), &(&a[1][0] * &p.0) + &(&a[1][1] * &p.1))
    }
}

/// Rank-2 Z-lattice (1/den)·(aZ + (b + cω)Z) in F, not necessarily an R-module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    d: i64,
    den: BigInt,
    a: BigInt,
    b: BigInt,
    c: BigInt,
}

impl Lattice {
    pub fn from_gens(d: i64, gens: &[Elem]) -> Result<Lattice> {
        let mut den = BigInt::one();
        for g in gens {
            den = num_integer::Integer::lcm(&den, g.x.denom());
            den = num_integer::Integer::lcm(&den, g.y.denom());
        }
        let dr = crate::field::Rat::from_integer(den.clone());
        let vecs: Vec<(BigInt, BigInt)> = gens.iter().map(|g| ((&g.x * &dr).to_integer(), (&g.y * &dr).to_integer())).collect();
        let (a, b, c) = crate::ideals::hnf(&vecs).ok_or_else(|| HmsError::InvalidInput("degenerate lattice".into()))?;
        Ok(Lattice { d, den, a, b, c })
    }

    pub fn from_ideal(i: &Ideal) -> Lattice {
        let [x, y] = i.basis();
        Lattice::from_gens(i.d(), &[x, y]).expect("ideal lattice")
    }

    pub fn basis(&self) -> [Elem; 2] {
        let dr = crate::field::Rat::from_integer(self.den.clone());
        let r = |n: &BigInt| crate::field::Rat::from_integer(n.clone()) / &dr;
        [Elem::new(self.d, r(&self.a), rat(0)), Elem::new(self.d, r(&self.b), r(&self.c))]
    }

    /// Covolume relative to Z + Zω.
    pub fn covolume(&self) -> crate::field::Rat {
        crate::field::Rat::new(&self.a * &self.c, &self.den * &self.den)
    }

    pub fn contains(&self, g: &Elem) -> bool {
        let dr = crate::field::Rat::from_integer(self.den.clone());
        let (x, y) = (&g.x * &dr, &g.y * &dr);
        if !x.is_integer() || !y.is_integer() {
            return false;
        }
        let (x, y) = (x.to_integer(), y.to_integer());
        if !(&y % &self.c).is_zero() {
            return false;
        }
        let q = &y / &self.c;
        ((x - q * &self.b) % &self.a).is_zero()
    }

    /// Coordinates of g modulo 1 in the lattice basis, a canonical key for g + M.
    fn coset_key(&self, g: &Elem) -> (crate::field::Rat, crate::field::Rat) {
        let dr = crate::field::Rat::from_integer(self.den.clone());
        let beta = &g.y * &dr / crate::field::Rat::from_integer(self.c.clone());
        let alpha = (&g.x * &dr - &beta * crate::field::Rat::from_integer(self.b.clone())) / crate::field::Rat::from_integer(self.a.clone());
        (&alpha - alpha.floor(), &beta - beta.floor())
    }

    pub fn is_subset_of(&self, o: &Lattice) -> bool {
        self.basis().iter().all(|g| o.contains(g))
    }

    pub fn scale(&self, u: &Elem) -> Result<Lattice> {
        let [x, y] = self.basis();
        Lattice::from_gens(self.d, &[&x * u, &y * u])
    }
}

#[derive(Clone, Debug)]
pub struct CuspRecord {
    pub a: Elem,
    pub c: Elem,
    /// 𝔰 = aR + c𝔟⁻¹.
    pub s: Ideal,
    /// 𝔐 = 𝔑 + c(𝔟𝔰)⁻¹.
    pub m: Ideal,
    /// γ = [[λ, μ], [−c, a]] with det 1 and γ(a : c) = ∞.
    pub gamma: Mat2,
}

#[derive(Clone, Debug)]
pub struct CuspType {
    /// Translation module M.
    pub module: Lattice,
    /// Totally positive unit generating V.
    pub v_gen: Elem,
    /// Index of V in R×₊₀ (Γ₀, Γ₁) or in R×² (Γ₀¹, Γ₁¹).
    pub v_index: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionCycle {
    pub selfints: Vec<i64>,
    pub period: usize,
    pub repetition: usize,
    pub special: bool,
}

impl ResolutionCycle {
    pub fn len(&self) -> usize {
        self.selfints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selfints.is_empty()
    }
}

/// Serialized cusp record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuspSummary {
    pub a: String,
    pub c: String,
    pub s_label: String,
    #[serde(rename = "M_label")]
    pub m_label: String,
    pub cycle: Vec<i64>,
    pub special: bool,
}

fn check_spec(spec: &GroupSpec) -> Result<()> {
    if !spec.level.is_integral() || spec.level.norm_int().is_zero() {
        return Err(HmsError::InvalidInput("level must be a nonzero integral ideal".into()));
    }
    let d = spec.level.d();
    let bad = spec.level.mul(&Ideal::from_int(d, 30)?);
    let b = &spec.component;
    let den = Ideal::principal(&Elem::from_big(d, b.den.clone(), BigInt::zero()))?;
    let num = b.mul(&den);
    if !num.is_coprime_to(&bad) || !den.is_coprime_to(&bad) {
        return Err(HmsError::InvalidInput("component must be coprime to 30·𝔑".into()));
    }
    Ok(())
}

/// Generator of 𝔞/𝔞𝔐 as an R/𝔐-module: an element of 𝔞 ∩ R with exact valuation at each 𝔭 | 𝔐.
fn module_generator(a: &Ideal, m: &Ideal) -> Result<Elem> {
    let d = a.d();
    let mut cons = Vec::new();
    for (pr, e) in a.factor() {
        if m.valuation(&pr) == 0 {
            cons.push((pr, ValConstraint::AtLeast(e.max(0) as u32)));
        }
    }
    for (pr, _) in m.factor() {
        let v = a.valuation(&pr).max(0) as u32;
        cons.push((pr, ValConstraint::Exact(v)));
    }
    approximate(d, &cons, None)
}

/// Solves λa + μc = 1 with λ ∈ 𝔰⁻¹, μ ∈ 𝔰⁻¹𝔟⁻¹.
fn transition(a: &Elem, c: &Elem, s: &Ideal, b: &Ideal) -> Result<Mat2> {
    let d = s.d();
    let one = Elem::one(d);
    let (lambda, mu) = if a.is_zero() {
        (Elem::zero(d), c.inv()?)
    } else if c.is_zero() {
        (a.inv()?, Elem::zero(d))
    } else {
        let si = s.inv();
        let ia = Ideal::principal(a)?.mul(&si);
        let ic = Ideal::principal(c)?.mul(&si).mul(&b.inv());
        let (p, q) = split_sum(&one, &ia, &ic)?;
        (p.div(a)?, q.div(c)?)
    };
    let g = Mat2([[lambda, mu], [-c, a.clone()]]);
    if g.det() != one {
        return Err(HmsError::Integrity("transition matrix determinant".into()));
    }
    Ok(g)
}

/// Lifts residues (a₀, c₀) to a cusp (a : c) with 𝔰(a, c) = 𝔰 and 𝔐(a, c) = 𝔐.
fn lift_cusp(spec: &GroupSpec, s: &Ideal, m: &Ideal, a0: Elem, c0: Elem) -> Result<CuspRecord> {
    let d = s.d();
    let b = &spec.component;
    let n = &spec.level;
    let sm = s.mul(m);
    let sbn = s.mul(b).mul(n);
    let a0 = if a0.is_zero() { Elem::from_big(d, sm.min_int(), BigInt::zero()) } else { a0 };
    let c = if c0.is_zero() {
        let x = sbn.basis()[0].clone();
        if x.is_integral() {
            x
        } else {
            return Err(HmsError::Integrity("non-integral lift".into()));
        }
    } else {
        c0
    };
    let cb = Ideal::principal(&c)?.mul(&b.inv());
    let mut cons: Vec<(crate::ideals::PrimeIdeal, ValConstraint)> = Vec::new();
    let mut handled = Vec::new();
    for (pr, _) in cb.factor() {
        if m.valuation(&pr) > 0 {
            continue;
        }
        let vs = s.valuation(&pr).max(0) as u32;
        let va = if a0.is_zero() { i64::MAX } else { Ideal::principal(&a0)?.valuation(&pr) };
        if va > vs as i64 {
            cons.push((pr.clone(), ValConstraint::Exact(vs)));
        } else {
            cons.push((pr.clone(), ValConstraint::AtLeast(vs + 1)));
        }
        handled.push(pr);
    }
    for (pr, e) in sm.factor() {
        if !handled.contains(&pr) {
            cons.push((pr, ValConstraint::AtLeast(e as u32)));
        }
    }
    let x = approximate(d, &cons, None)?;
    let a = &a0 + &x;
    let s_check = Ideal::generated_by(d, &[a.clone()]).map(|ia| ia.add(&cb)).ok_or_else(|| HmsError::Integrity("zero cusp".into()))?;
    if s_check != *s {
        return Err(HmsError::Integrity(format!("cusp lift: 𝔰 mismatch {:?} vs {:?}", s_check, s)));
    }
    let m_check = n.add(&Ideal::principal(&c)?.mul(&b.mul(s).inv()));
    if m_check != *m {
        return Err(HmsError::Integrity("cusp lift: 𝔐 mismatch".into()));
    }
    let gamma = transition(&a, &c, s, b)?;
    Ok(CuspRecord { a, c, s: s.clone(), m: m.clone(), gamma })
}

/// One record per cusp of X(spec) on the component 𝔟.
pub fn enumerate_cusps(f: &RealQuadraticField, cg: &ClassGroupData, spec: &GroupSpec) -> Result<Vec<CuspRecord>> {
    check_spec(spec)?;
    let n = &spec.level;
    let b = &spec.component;
    let nn = n.norm_u64();
    let mut out = Vec::new();
    for s in cg.wide_reps(nn) {
        for m in divisors_of_ideal(n) {
            let uq = unit_quotient(f, &m, n, spec.variant)?;
            let g1 = module_generator(&s, &m)?;
            let g2 = module_generator(&s.mul(b).mul(&m), &n.div(&m))?;
            for (t1, t2) in &uq.transversal {
                let sm = s.mul(&m);
                let a0 = sm.reduce_elem(&(&g1 * &uq.g1.ring.to_elem(*t1))).unwrap_or_else(|| f.zero());
                let c0 = &g2 * &uq.g2.ring.to_elem(*t2);
                let sbn = s.mul(b).mul(n);
                let c0 = if sbn.contains(&c0) { f.zero() } else { c0 };
                out.push(lift_cusp(spec, &s, &m, a0, c0)?);
            }
        }
    }
    Ok(out)
}

/// Closed-form cusp count over all components: h⁺h Σ_{𝔐|𝔑} φ(𝔐 + 𝔑/𝔐) for Γ₀ and Γ₀¹;
/// for Γ₁ and Γ₁¹ the sizes #Q(𝔐, 𝔑) from narrow ray class group orders.
pub fn cusp_count(f: &RealQuadraticField, cg: &ClassGroupData, n: &Ideal, variant: GroupVariant) -> Result<u64> {
    let mut total = 0u64;
    for m in divisors_of_ideal(n) {
        let g = m.add(&n.div(&m));
        total += match variant {
            GroupVariant::Gamma0 => phi_gt0(f, &g)?,
            GroupVariant::Gamma0One => phi_sq(f, &g)?,
            GroupVariant::Gamma1 | GroupVariant::Gamma1One => q1_size(f, cg, &m, &n.div(&m), variant.is_one())?,
        };
    }
    Ok(cg.h_plus * cg.h * total)
}

/// #Q₁(𝔐, 𝔑)/(h⁺h) from narrow ray class group orders
/// #Cl⁺(𝔪) = 4h·φ(𝔪)/[R× : R×_{𝔪,1}], where R×_{𝔪,1} are the totally positive units ≡ 1 mod 𝔪.
/// For Γ₁¹ the quotient additionally identifies R×₊₀/R×² in each factor.
fn q1_size(f: &RealQuadraticField, cg: &ClassGroupData, m1: &Ideal, m2: &Ideal, squares: bool) -> Result<u64> {
    if squares {
        let n = m1.mul(m2);
        let uq = unit_quotient(f, m1, &n, GroupVariant::Gamma1One)?;
        let total = uq.g1.order() * uq.g2.order();
        return Ok(total / uq.h_size as u64);
    }
    let ray = |m: &Ideal| -> Result<(u64, Vec<(i8, i8)>)> {
        let ring = ResidueRing::new(m)?;
        let phi = ring.unit_count();
        let (k, signs) = units_congruent_one(f, &ring)?;
        Ok((cg.h * 4 * phi / k, signs))
    };
    let (c1, s1) = ray(m1)?;
    let (c2, s2) = ray(m2)?;
    // the subgroup {([x], [x⁻¹]) : x ≡ 1 mod 𝔑} is the image of the sign group
    let common = s1.iter().filter(|s| s2.contains(s)).count() as u64;
    let sub = 4 / common;
    Ok(c1 * c2 / sub / (cg.h_plus * cg.h))
}

/// [R× : R×_{𝔪,1}] and the sign patterns of units ≡ 1 mod 𝔪.
fn units_congruent_one(f: &RealQuadraticField, ring: &ResidueRing) -> Result<(u64, Vec<(i8, i8)>)> {
    let ord = min_power_one(ring, &f.eps)?;
    let mut signs: Vec<(i8, i8)> = Vec::new();
    let mut count_tp_one = 0u64;
    let sgn = |e: &Elem| -> (i8, i8) {
        let s1 = if e.sign_at(Place::V).is_gt() { 1 } else { -1 };
        let s2 = if e.sign_at(Place::W).is_gt() { 1 } else { -1 };
        (s1, s2)
    };
    // ±ε^j with j mod 2·ord represent R× modulo ⟨ε^{2 ord}⟩ ⊂ R×_{𝔪,1}
    let mut e = f.one();
    for _ in 0..2 * ord {
        for u in [e.clone(), -&e] {
            if congruent_one(ring, &u)? {
                let sg = sgn(&u);
                if !signs.contains(&sg) {
                    signs.push(sg);
                }
                if sg == (1, 1) {
                    count_tp_one += 1;
                }
            }
        }
        e = &e * &f.eps;
    }
    Ok((4 * ord / count_tp_one, signs))
}

fn congruent_one(ring: &ResidueRing, e: &Elem) -> Result<bool> {
    Ok(ring.size() == 1 || ring.from_elem(e)? == ring.one())
}

/// Smallest k ≥ 1 with base^k ≡ 1 mod the ring's modulus.
fn min_power_one(ring: &ResidueRing, base: &Elem) -> Result<u64> {
    if ring.size() == 1 {
        return Ok(1);
    }
    Ok(ring.order(ring.from_elem(base)?))
}

/// Stabilizer type G(M, V) of a cusp.
pub fn cusp_type(f: &RealQuadraticField, cusp: &CuspRecord, spec: &GroupSpec) -> Result<CuspType> {
    let n = &spec.level;
    let b = &spec.component;
    let m = &cusp.m;
    let s = &cusp.s;
    let base = s.pow(-2).mul(&b.inv());
    let nm = n.div(m);
    let eps2 = &f.eps * &f.eps;
    match spec.variant {
        GroupVariant::Gamma0 | GroupVariant::Gamma0One => {
            let module = Lattice::from_ideal(&base.mul(n).mul(&n.add(&m.mul(m)).inv()));
            let ring = ResidueRing::new(&m.add(&nm))?;
            if spec.variant == GroupVariant::Gamma0 {
                let k = min_power_one(&ring, &f.eps_plus)?;
                Ok(CuspType { module, v_gen: f.eps_plus.pow(k), v_index: k })
            } else {
                let k = min_power_one(&ring, &eps2)?;
                Ok(CuspType { module, v_gen: eps2.pow(k), v_index: k })
            }
        }
        GroupVariant::Gamma1One => {
            // translations realized only after scaling by −1 enlarge the printed module
            let printed = Lattice::from_ideal(&base.mul(&nm));
            let mut gens = printed.basis().to_vec();
            let one = f.one();
            for r in coset_reps(&Lattice::from_ideal(&base), &printed)? {
                let g = cusp.gamma.inv()?.mul(&translation(&one, &r)).mul(&cusp.gamma);
                if !printed.contains(&r) && in_group_up_to_scalars(f, spec, &g)? {
                    gens.push(r);
                }
            }
            let module = Lattice::from_gens(f.d, &gens)?;
            let modulus = n.mul(m).mul(&n.add(&m.mul(m)).inv());
            let ring = ResidueRing::new(&modulus)?;
            let mut j = 1u64;
            let mut e = f.eps.clone();
            loop {
                if congruent_one(&ring, &e)? || congruent_one(&ring, &-&e)? {
                    break;
                }
                e = &e * &f.eps;
                j += 1;
            }
            Ok(CuspType { module, v_gen: eps2.pow(j), v_index: j })
        }
        GroupVariant::Gamma1 => {
            if n.factor().iter().any(|(_, e)| *e > 1) {
                return Err(HmsError::InvalidInput("Γ₁ cusp types need a squarefree level".into()));
            }
            let module = Lattice::from_ideal(&base.mul(&nm));
            let ring_nm = ResidueRing::new(&nm)?;
            let ring_m = ResidueRing::new(m)?;
            let ord = min_power_one(&ring_nm, &f.eps)?;
            // images in (R/𝔐)× of units ≡ 1 mod 𝔑/𝔐
            let mut gens = Vec::new();
            let mut e = f.one();
            for _ in 0..2 * ord {
                for u in [e.clone(), -&e] {
                    if congruent_one(&ring_nm, &u)? {
                        gens.push(ring_m.from_elem(&u)?);
                    }
                }
                e = &e * &f.eps;
            }
            let img = crate::ideals::subgroup_closure(ring_m.one(), &gens, |x, y| ring_m.mul(x, y));
            let mut k = 1u64;
            let mut v = f.eps_plus.clone();
            while !img.contains(&ring_m.from_elem(&v)?) {
                v = &v * &f.eps_plus;
                k += 1;
            }
            Ok(CuspType { module, v_gen: v, v_index: k })
        }
    }
}

/// Cyclic resolution of a cusp of type G(M, V).
pub fn resolve_cusp(f: &RealQuadraticField, t: &CuspType) -> Result<ResolutionCycle> {
    let [mut x, mut y] = t.module.basis();
    let orient = |x: &Elem, y: &Elem| -> bool {
        // v(x)v′(y) − v′(x)v(y) = −√D-coefficient sign of x·ȳ − x̄·y
        let z = &(x * &y.conj()) - &(&x.conj() * y);
        z.sign_at(Place::V).is_gt()
    };
    if !orient(&x, &y) {
        std::mem::swap(&mut x, &mut y);
    }
    let mut z = x.div(&y)?;
    let fl = z.floor_at(Place::V);
    if fl < BigInt::one() {
        z = &z + &Elem::from_big(f.d, BigInt::one() - fl, BigInt::zero());
    }
    let hj = hj_expand_periodic(&z, HJ_STEPS)?;
    let period = hj.expansion.period.clone();
    let w = hj.quotients.iter().fold(f.one(), |acc, q| &acc * q);
    if !w.is_unit() || !w.is_totally_positive() {
        return Err(HmsError::Integrity("cusp period product is not a totally positive unit".into()));
    }
    // k minimal with W^k ∈ V = ⟨v_gen⟩; both are powers of ε⁺
    let wlog = unit_log(f, &w)?;
    let vlog = unit_log(f, &t.v_gen)?;
    if wlog == 0 || vlog == 0 {
        return Err(HmsError::Integrity("trivial unit in cusp resolution".into()));
    }
    let (wl, vl) = (wlog.unsigned_abs(), vlog.unsigned_abs());
    let k = (vl / num_integer::gcd(wl, vl)) as usize;
    let dd = period.len();
    if dd * k == 1 {
        return Ok(ResolutionCycle { selfints: vec![-period[0] + 2], period: 1, repetition: 1, special: true });
    }
    let mut selfints = Vec::with_capacity(dd * k);
    for _ in 0..k {
        selfints.extend(period.iter().map(|b| -b));
    }
    Ok(ResolutionCycle { selfints, period: dd, repetition: k, special: false })
}

/// Exponent j with u = (ε⁺)^j for a totally positive unit u.
pub fn unit_log(f: &RealQuadraticField, u: &Elem) -> Result<i64> {
    let mut j = 0i64;
    let mut cur = u.clone();
    let one = f.one();
    let inv = f.eps_plus.inv()?;
    let gt1 = |e: &Elem| e.cmp_at(&one, Place::V).is_gt();
    while cur != one {
        if gt1(&cur) {
            cur = &cur * &inv;
            j += 1;
        } else {
            cur = &cur * &f.eps_plus;
            j -= 1;
        }
        if j.abs() > 100_000 {
            return Err(HmsError::Integrity("element is not a power of the totally positive unit".into()));
        }
    }
    Ok(j)
}

/// Membership of a matrix in the congruence subgroup, up to scalar multiples.
pub fn in_group_up_to_scalars(f: &RealQuadraticField, spec: &GroupSpec, g: &Mat2) -> Result<bool> {
    let det = g.det();
    if !det.is_unit() || !det.is_totally_positive() {
        return Ok(false);
    }
    let b = &spec.component;
    let n = &spec.level;
    let shape = |m: &Mat2| -> bool {
        let r = Ideal::unit(f.d);
        r.contains(&m.0[0][0]) && r.contains(&m.0[1][1]) && b.inv().contains(&m.0[0][1]) && n.mul(b).contains(&m.0[1][0])
    };
    if !shape(g) {
        return Ok(false);
    }
    match spec.variant {
        GroupVariant::Gamma0 => Ok(true),
        GroupVariant::Gamma0One => Ok(det.is_square()),
        GroupVariant::Gamma1 | GroupVariant::Gamma1One => {
            let scalars: Vec<Elem> = if spec.variant == GroupVariant::Gamma1One {
                match det.sqrt() {
                    None => return Ok(false),
                    Some(w) => {
                        let wi = w.inv()?;
                        vec![wi.clone(), -&wi]
                    }
                }
            } else {
                let ring = ResidueRing::new(n)?;
                let ord = min_power_one(&ring, &f.eps)?;
                let mut v = Vec::new();
                let mut e = f.one();
                for _ in 0..ord {
                    v.push(e.clone());
                    v.push(-&e);
                    e = &e * &f.eps;
                }
                v
            };
            let ring = ResidueRing::new(n)?;
            for s in scalars {
                if congruent_one(&ring, &(&g.0[0][0] * &s))? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

fn translation(v: &Elem, m: &Elem) -> Mat2 {
    let d = v.d();
    Mat2([[v.clone(), m.clone()], [Elem::zero(d), Elem::one(d)]])
}

/// Coset representatives of L/M for lattices M ⊆ L.
fn coset_reps(l: &Lattice, m: &Lattice) -> Result<Vec<Elem>> {
    let idx = (m.covolume() / l.covolume()).to_integer().to_u64().ok_or_else(|| HmsError::Budget("index overflow".into()))?;
    if idx > 100_000 {
        return Err(HmsError::Budget("lattice index too large for the oracle".into()));
    }
    let [l1, l2] = l.basis();
    let mut reps: Vec<Elem> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for i in 0..idx as i64 {
        for j in 0..idx as i64 {
            let x = &l1.scale(&rat(i)) + &l2.scale(&rat(j));
            if seen.insert(m.coset_key(&x)) {
                reps.push(x);
            }
            if reps.len() as u64 == idx {
                return Ok(reps);
            }
        }
    }
    Err(HmsError::Integrity("coset enumeration incomplete".into()))
}

/// Verifies G(M, V) against the group: every (v, m) ∈ V × M conjugates into the group, and
/// every conjugated (v′, m′) with v′ a unit power and m′ ∈ 𝔰⁻²𝔟⁻¹ that lies in the group is in V × M.
pub fn verify_cusp_type(f: &RealQuadraticField, spec: &GroupSpec, cusp: &CuspRecord, t: &CuspType, seed: u64, samples: usize) -> Result<()> {
    let gamma = &cusp.gamma;
    let gi = gamma.inv()?;
    let conj = |v: &Elem, m: &Elem| gi.mul(&translation(v, m)).mul(gamma);
    let ambient = Lattice::from_ideal(&cusp.s.pow(-2).mul(&spec.component.inv()));
    if !t.module.is_subset_of(&ambient) {
        return Err(HmsError::Integrity("translation module not inside 𝔰⁻²𝔟⁻¹".into()));
    }
    let reps = coset_reps(&ambient, &t.module)?;
    // translations
    for r in &reps {
        let inside = t.module.contains(r);
        if in_group_up_to_scalars(f, spec, &conj(&f.one(), r))? != inside {
            return Err(HmsError::Integrity(format!("translation {} misclassified", r)));
        }
    }
    // shift making (v_gen, 0) a stabilizer element
    let mut shift = None;
    for r in &reps {
        if in_group_up_to_scalars(f, spec, &conj(&t.v_gen, r))? {
            shift = Some(r.clone());
            break;
        }
    }
    let m0 = shift.ok_or_else(|| HmsError::Integrity("no stabilizer element with the V generator".into()))?;
    let x = m0.div(&(&t.v_gen - &f.one()))?;
    let tm = translation(&f.one(), &x);
    let gamma2 = tm.mul(gamma);
    let g2i = gamma2.inv()?;
    let conj2 = |v: &Elem, m: &Elem| g2i.mul(&translation(v, m)).mul(&gamma2);
    let [b1, b2] = t.module.basis();
    let mut rng = StdRng::seed_from_u64(seed);
    let vinv = t.v_gen.inv()?;
    for _ in 0..samples {
        let e: i64 = rng.gen_range(-2..=2);
        let v = if e >= 0 { t.v_gen.pow(e as u64) } else { vinv.pow((-e) as u64) };
        let m = &b1.scale(&rat(rng.gen_range(-5..=5))) + &b2.scale(&rat(rng.gen_range(-5..=5)));
        if !in_group_up_to_scalars(f, spec, &conj2(&v, &m))? {
            return Err(HmsError::Integrity("element of G(M, V) does not conjugate into the group".into()));
        }
    }
    // converse: candidates with v a power of the base unit
    let base = if spec.variant.is_one() { &f.eps * &f.eps } else { f.eps_plus.clone() };
    let [a1, a2] = ambient.basis();
    for _ in 0..samples {
        let j = rng.gen_range(0..=(2 * t.v_index) as u64);
        let v = base.pow(j);
        let m = &a1.scale(&rat(rng.gen_range(-5..=5))) + &a2.scale(&rat(rng.gen_range(-5..=5)));
        let inside = in_group_up_to_scalars(f, spec, &conj2(&v, &m))?;
        let expected = j % t.v_index == 0 && t.module.contains(&m);
        if inside != expected {
            return Err(HmsError::Integrity(format!("stabilizer mismatch at v = base^{}", j)));
        }
    }
    for j in 1..t.v_index {
        let v = base.pow(j);
        for r in &reps {
            if in_group_up_to_scalars(f, spec, &conj(&v, r))? {
                return Err(HmsError::Integrity("stabilizer contains a unit outside V".into()));
            }
        }
    }
    Ok(())
}

pub fn summarize(c: &CuspRecord, cycle: &ResolutionCycle) -> CuspSummary {
    CuspSummary {
        a: c.a.to_string(),
        c: c.c.to_string(),
        s_label: format!("{:?}", c.s),
        m_label: format!("{:?}", c.m),
        cycle: cycle.selfints.clone(),
        special: cycle.special,
    }
}
