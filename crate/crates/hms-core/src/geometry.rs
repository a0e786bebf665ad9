//! Volume, Chern numbers, Hodge and Betti numbers, and Kodaira candidates of the resolved surfaces.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::classgroups::{FieldData, GroupVariant};
use crate::cusps::{cusp_type, enumerate_cusps, resolve_cusp, GroupSpec, ResolutionCycle};
use crate::dimensions::dim_cusp_forms;
use crate::elliptic::{resolve_elliptic, rotation_distribution, RotationType};
use crate::error::{integrity, invalid, HmsError, Result};
use crate::field::{rat, Rat};
use crate::ideals::Ideal;

/// [PGL₂⁺(R) : PΓ₀(𝔑)] = Nm(𝔑) ∏_{𝔭|𝔑} (1 + Nm(𝔭)⁻¹).
pub fn gamma0_index(n: &Ideal) -> Rat {
    let mut idx = n.norm();
    for (pr, _) in n.factor() {
        let np = rat(pr.norm() as i64);
        idx = idx * (&np + rat(1)) / np;
    }
    idx
}

/// vol(Γ\H) = 2 [PSL₂(R) : Γ] ζ_F(−1), so that PΓ₀(𝔑) has half the volume of PΓ₀¹(𝔑) when R×₊₀ ≠ R×².
pub fn covolume(fd: &FieldData, spec: &GroupSpec) -> Result<Rat> {
    let idx = gamma0_index(&spec.level);
    let vol = rat(2) * idx * fd.field.zeta_minus_one();
    match spec.variant {
        GroupVariant::Gamma0 => Ok(vol / rat(fd.field.totally_positive_mod_squares() as i64)),
        GroupVariant::Gamma0One => Ok(vol),
        v => invalid(format!("volume is implemented for Gamma0 and Gamma0^1, not {}", v.name())),
    }
}

/// Number of cosets of Γ₀(𝔑) in SL₂(R), counted as #P¹(R/𝔑) by enumeration.
pub fn projective_line_size(n: &Ideal) -> Result<u64> {
    use crate::ideals::ResidueRing;
    let ring = ResidueRing::new(n)?;
    let elems: Vec<_> = ring.elements().collect();
    let units = ring.units();
    // pairs (x, y) generating the unit ideal, modulo units
    let mut count = 0u64;
    for &x in &elems {
        for &y in &elems {
            let gens_unit = ring.primes().iter().all(|p| !(ring.in_prime(x, p) && ring.in_prime(y, p)));
            if gens_unit {
                count += 1;
            }
        }
    }
    Ok(count / units.len() as u64)
}

/// Cusp resolution cycles of one component.
pub fn cusp_cycles(fd: &FieldData, spec: &GroupSpec) -> Result<Vec<ResolutionCycle>> {
    let cusps = enumerate_cusps(&fd.field, &fd.classes, spec)?;
    cusps
        .iter()
        .map(|c| {
            let t = cusp_type(&fd.field, c, spec)?;
            resolve_cusp(&fd.field, &t)
        })
        .collect()
}

/// (c₁², c₂) of the minimal resolution from the volume, the cusp cycles and the quotient singularities.
pub fn chern_numbers(vol: &Rat, cycles: &[ResolutionCycle], elliptic: &[(RotationType, u64)]) -> Result<(i64, i64)> {
    let mut c1 = rat(2) * vol;
    let mut c2 = vol.clone();
    for cyc in cycles {
        for &s in &cyc.selfints {
            // b = −s on an ordinary cycle and b = 2 − s on a single nodal curve
            let b = if cyc.special { 2 - s } else { -s };
            c1 += rat(2 - b);
        }
        c2 += rat(cyc.len() as i64);
    }
    for &(t, k) in elliptic {
        let r = resolve_elliptic(t)?;
        let kk = rat(k as i64);
        c1 += &kk * &r.chern;
        c2 += &kk * (rat(r.length as i64) + Rat::new(BigInt::from(t.q - 1), BigInt::from(t.q)));
    }
    let to_int = |x: &Rat, name: &str| -> Result<i64> {
        if !x.is_integer() {
            return integrity(format!("{} = {} is not an integer", name, x));
        }
        x.to_integer().to_i64().ok_or_else(|| HmsError::Arithmetic(format!("{} overflow", name)))
    };
    Ok((to_int(&c1, "c1^2")?, to_int(&c2, "c2")?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hodge {
    pub h00: i64,
    pub h01: i64,
    pub h02: i64,
    pub h11: i64,
}

/// Numerical invariants of one surface.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceInvariants {
    pub vol: String,
    pub c1_sq: i64,
    pub c2: i64,
    pub chi: i64,
    pub hodge: Hodge,
    pub betti: [i64; 5],
    #[serde(rename = "K2_min_lower_bound")]
    pub k2_min_lower_bound: i64,
    pub kodaira_set: BTreeSet<i32>,
    pub blowdowns_applied: i64,
}

/// χ, Hodge and Betti numbers from Noether's formula with q = 0.
pub fn hodge_betti(c1_sq: i64, c2: i64) -> Result<(i64, Hodge, [i64; 5])> {
    if (c1_sq + c2).rem_euclid(12) != 0 {
        return integrity(format!("c1^2 + c2 = {} is not divisible by 12", c1_sq + c2));
    }
    let chi = (c1_sq + c2) / 12;
    if chi < 1 {
        return integrity(format!("holomorphic Euler characteristic {} < 1", chi));
    }
    let hodge = Hodge { h00: 1, h01: 0, h02: chi - 1, h11: c2 - 2 * chi };
    Ok((chi, hodge, [1, 0, c2 - 2, 0, 1]))
}

/// Kodaira dimensions compatible with χ and K² = K²_current + blowdowns, with K² = 0 read as minimal.
pub fn classify_kodaira(chi: i64, k2_current: i64, blowdowns: i64) -> Result<BTreeSet<i32>> {
    if chi < 1 {
        return invalid(format!("χ = {} must be at least 1", chi));
    }
    if blowdowns < 0 {
        return invalid("blow-down count must be nonnegative");
    }
    let k2 = k2_current + blowdowns;
    let set: &[i32] = match (chi, k2) {
        (1, k) if k < 0 => &[-1, 0, 1, 2],
        (2, k) if k < 0 => &[0, 1, 2],
        (_, k) if k < 0 => &[1, 2],
        (1 | 2, 0) => &[0, 1],
        (_, 0) => &[1],
        (1, k) if k <= 9 => &[-1, 2],
        _ => &[2],
    };
    Ok(set.iter().copied().collect())
}

pub fn surface_invariants(fd: &FieldData, spec: &GroupSpec, blowdowns: i64) -> Result<SurfaceInvariants> {
    let vol = covolume(fd, spec)?;
    let cycles = cusp_cycles(fd, spec)?;
    let ell = rotation_distribution(fd, spec)?;
    let (c1_sq, c2) = chern_numbers(&vol, &cycles, &ell)?;
    let (chi, hodge, betti) = hodge_betti(c1_sq, c2)?;
    Ok(SurfaceInvariants {
        vol: vol.to_string(),
        c1_sq,
        c2,
        chi,
        hodge,
        betti,
        k2_min_lower_bound: c1_sq + blowdowns,
        kodaira_set: classify_kodaira(chi, c1_sq, blowdowns)?,
        blowdowns_applied: blowdowns,
    })
}

/// A configuration of curves on a smooth surface.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveConfig {
    /// Intersection matrix; diagonal entries are self-intersections.
    pub intersections: Vec<Vec<i64>>,
    /// K·C per curve; smooth rational curves (K·C = −2 − C²) when absent.
    #[serde(default)]
    pub canonical_degrees: Option<Vec<i64>>,
}

impl CurveConfig {
    fn validate(&self) -> Result<()> {
        let n = self.intersections.len();
        for (i, row) in self.intersections.iter().enumerate() {
            if row.len() != n {
                return invalid("intersection matrix is not square");
            }
            for (j, &x) in row.iter().enumerate() {
                if x != self.intersections[j][i] {
                    return invalid("intersection matrix is not symmetric");
                }
                if i != j && x < 0 {
                    return invalid("distinct curves have negative intersection");
                }
            }
        }
        if self.canonical_degrees.as_ref().is_some_and(|k| k.len() != n) {
            return invalid("canonical degree list has the wrong length");
        }
        Ok(())
    }

    fn canonical(&self) -> Vec<i64> {
        self.canonical_degrees
            .clone()
            .unwrap_or_else(|| (0..self.intersections.len()).map(|i| -2 - self.intersections[i][i]).collect())
    }
}

fn satisfies_criterion(m: &[Vec<i64>], k: &[i64], alive: &[bool]) -> bool {
    let idx: Vec<usize> = (0..m.len()).filter(|&i| alive[i]).collect();
    for (a, &i) in idx.iter().enumerate() {
        if m[i][i] >= 0 && k[i] < 0 {
            return true;
        }
        for &j in &idx[a + 1..] {
            if m[i][i] == -1 && m[j][j] == -1 && m[i][j] > 0 {
                return true;
            }
        }
    }
    false
}

/// Whether some set of disjoint exceptional curves can be blown down so that two (−1)-curves meet,
/// or a curve with C² ≥ 0 and K·C < 0 appears.
pub fn rationality_criterion(config: &CurveConfig) -> Result<bool> {
    config.validate()?;
    let m = &config.intersections;
    let k = config.canonical();
    let n = m.len();
    let exceptional: Vec<usize> = (0..n).filter(|&i| m[i][i] == -1 && k[i] == -1).collect();
    if exceptional.len() > 16 {
        return Err(HmsError::Budget("too many exceptional curves for subset search".into()));
    }
    for mask in 0u32..(1 << exceptional.len()) {
        let chosen: Vec<usize> = exceptional.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i).collect();
        if chosen.iter().enumerate().any(|(a, &i)| chosen[a + 1..].iter().any(|&j| m[i][j] != 0)) {
            continue;
        }
        let mut mm = m.clone();
        let mut kk = k.clone();
        let mut alive = vec![true; n];
        for &e in &chosen {
            alive[e] = false;
            for i in 0..n {
                kk[i] -= m[i][e];
                for j in 0..n {
                    mm[i][j] += m[i][e] * m[j][e];
                }
            }
        }
        if satisfies_criterion(&mm, &kk, &alive) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Both sides of Σ_𝔟 χ(X₀(𝔑)_𝔟) = dim S₂(Γ₀(𝔑)) + h⁺(R).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub chis: Vec<i64>,
    pub dim_s2: u64,
    pub h_plus: u64,
    pub holds: bool,
}

pub fn consistency_check(fd: &FieldData, n: &Ideal) -> Result<ConsistencyReport> {
    let mut chis = Vec::new();
    for b in fd.classes.narrow_reps(n.norm_u64()) {
        let spec = GroupSpec { variant: GroupVariant::Gamma0, level: n.clone(), component: b };
        chis.push(surface_invariants(fd, &spec, 0)?.chi);
    }
    let dim_s2 = dim_cusp_forms(fd, n, 2)?;
    let h_plus = fd.classes.h_plus;
    let holds = chis.iter().sum::<i64>() == dim_s2 as i64 + h_plus as i64;
    Ok(ConsistencyReport { chis, dim_s2, h_plus, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt5_level_one() {
        let fd = FieldData::new(5).unwrap();
        let spec = GroupSpec { variant: GroupVariant::Gamma0, level: Ideal::unit(5), component: Ideal::unit(5) };
        assert_eq!(covolume(&fd, &spec).unwrap(), Rat::new(BigInt::from(1), BigInt::from(15)));
        let inv = surface_invariants(&fd, &spec, 0).unwrap();
        assert_eq!((inv.c1_sq, inv.c2, inv.chi), (-2, 14, 1));
        assert!(consistency_check(&fd, &Ideal::unit(5)).unwrap().holds);
    }

    #[test]
    fn hodge_examples() {
        let (chi, h, b) = hodge_betti(-8, 56).unwrap();
        assert_eq!((chi, h.h02, h.h11, b[2]), (4, 3, 48, 54));
        let (chi, h, _) = hodge_betti(0, 48).unwrap();
        assert_eq!((chi, h.h11), (4, 40));
        assert!(hodge_betti(1, 12).is_err());
    }

    #[test]
    fn kodaira_examples() {
        let set = |v: &[i32]| v.iter().copied().collect::<BTreeSet<i32>>();
        assert_eq!(classify_kodaira(4, -8, 8).unwrap(), set(&[1]));
        assert_eq!(classify_kodaira(4, 0, 2).unwrap(), set(&[2]));
        assert_eq!(classify_kodaira(2, 0, 0).unwrap(), set(&[0, 1]));
        assert!(classify_kodaira(0, 0, 0).is_err());
    }

    #[test]
    fn rationality_examples() {
        let two = CurveConfig { intersections: vec![vec![-1, 1], vec![1, -1]], canonical_degrees: None };
        assert!(rationality_criterion(&two).unwrap());
        let single = CurveConfig { intersections: vec![vec![-3]], canonical_degrees: None };
        assert!(!rationality_criterion(&single).unwrap());
        // an exceptional curve crossing two disjoint (−2)-curves
        let f3 = CurveConfig { intersections: vec![vec![-1, 1, 1], vec![1, -2, 0], vec![1, 0, -2]], canonical_degrees: None };
        assert!(rationality_criterion(&f3).unwrap());
        let asym = CurveConfig { intersections: vec![vec![-1, 1], vec![0, -1]], canonical_degrees: None };
        assert!(rationality_criterion(&asym).is_err());
    }
}
