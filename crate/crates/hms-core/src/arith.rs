//! Small integer helpers: factorization, Kronecker symbols, square roots mod p.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn isqrt_big(n: &BigInt) -> BigInt {
    assert!(!n.is_negative(), "isqrt of negative");
    n.sqrt()
}

pub fn is_square_big(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    if &r * &r == *n {
        Some(r)
    } else {
        None
    }
}

pub fn is_squarefree(n: i64) -> bool {
    if n == 0 {
        return false;
    }
    factor_u64(n.unsigned_abs()).iter().all(|&(_, e)| e == 1)
}

pub fn factor_u64(n: u64) -> Vec<(u64, u32)> {
    if n <= 1 {
        return vec![];
    }
    num_prime::nt_funcs::factorize64(n).into_iter().map(|(p, e)| (p, e as u32)).collect()
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

pub fn is_prime_u64(n: u64) -> bool {
    num_prime::nt_funcs::is_prime64(n)
}

/// Factorization of a nonzero big integer; panics if a cofactor exceeds u64 range
/// after trial division by small primes.
pub fn factor_big(n: &BigInt) -> Vec<(BigInt, u32)> {
    let mut m = n.abs();
    let mut out = Vec::new();
    if m.is_zero() {
        return out;
    }
    if let Some(v) = m.to_u64() {
        return factor_u64(v)
            .into_iter()
            .map(|(p, e)| (BigInt::from(p), e))
            .collect();
    }
    let mut p = 2u64;
    while m.to_u64().is_none() {
        let bp = BigInt::from(p);
        if (&m % &bp).is_zero() {
            let mut e = 0;
            while (&m % &bp).is_zero() {
                m /= &bp;
                e += 1;
            }
            out.push((bp, e));
        }
        p += 1;
        assert!(p < 10_000_000, "factor_big: cofactor too large");
    }
    for (q, e) in factor_u64(m.to_u64().unwrap()) {
        let bq = BigInt::from(q);
        match out.iter_mut().find(|(r, _)| *r == bq) {
            Some((_, f)) => *f += e,
            None => out.push((bq, e)),
        }
    }
    out.sort();
    out
}

pub fn sigma1(n: u64) -> u64 {
    factor_u64(n)
        .iter()
        .map(|&(p, e)| (p.pow(e + 1) - 1) / (p - 1))
        .product()
}

/// Kronecker symbol (a | n) for arbitrary integers.
pub fn kronecker(a: i64, n: i64) -> i32 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    num_modular::ModularSymbols::kronecker(&a, &n) as i32
}

/// A square root of `a` modulo the odd prime `p` (Tonelli-Shanks), if one exists.
pub fn sqrt_mod_p(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if p == 2 {
        return Some(a);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    let (mut q, mut s) = (p - 1, 0u32);
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = mul_mod(tt, tt, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

/// Modular inverse of `a` mod `m` (m > 0), if gcd(a, m) = 1.
pub fn inv_mod_big(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// Squarefree part with sign, e.g. -12 -> -3.
pub fn squarefree_part(n: i64) -> i64 {
    assert!(n != 0);
    let mut r: i64 = if n < 0 { -1 } else { 1 };
    for (p, e) in factor_u64(n.unsigned_abs()) {
        if e % 2 == 1 {
            r *= p as i64;
        }
    }
    r
}

pub fn divisors_u64(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factor_u64(n) {
        let cur = ds.clone();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            ds.extend(cur.iter().map(|d| d * pk));
        }
    }
    ds.sort_unstable();
    ds
}

pub fn big(n: i64) -> BigInt {
    BigInt::from(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_small_and_large() {
        assert_eq!(factor_u64(360), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(factor_u64(1_000_000_007 * 998_244_353), vec![(998_244_353, 1), (1_000_000_007, 1)]);
        assert_eq!(factor_u64(1), vec![]);
    }

    #[test]
    fn kronecker_matches_known_values() {
        assert_eq!(kronecker(5, 2), -1);
        assert_eq!(kronecker(5, 11), 1);
        assert_eq!(kronecker(-4, 3), -1);
        assert_eq!(kronecker(8, 7), 1);
        assert_eq!(kronecker(12, 5), -1);
        assert_eq!(kronecker(-3, 2), -1);
    }

    #[test]
    fn sqrt_mod_roundtrip() {
        for p in [3u64, 5, 7, 13, 17, 97, 1009] {
            for a in 0..p {
                if let Some(r) = sqrt_mod_p(a, p) {
                    assert_eq!(r * r % p, a);
                }
            }
        }
    }

    #[test]
    fn sigma_and_divisors() {
        assert_eq!(sigma1(12), 28);
        assert_eq!(divisors_u64(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(squarefree_part(-12), -3);
    }
}
