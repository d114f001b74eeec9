//! Primality and group-order helpers used to validate DHKE parameters.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

const WITNESSES: [u32; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// Miller-Rabin with the first thirteen prime bases.
///
/// Deterministic below 3.3e24; a strong probable-prime test above that.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &p in &WITNESSES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let n_minus_one = n - 1u32;
    let mut d = n_minus_one.clone();
    let mut s = 0u32;
    while (&d & BigUint::one()).is_zero() {
        d >>= 1;
        s += 1;
    }

    'witness: for &a in &WITNESSES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
            if x.is_one() {
                return false;
            }
        }
        return false;
    }
    true
}

/// Distinct prime factors of `n` by trial division. Only sensible for small `n`.
pub fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut f = 2u64;
    while f.saturating_mul(f) <= n {
        if n.is_multiple_of(f) {
            out.push(f);
            while n.is_multiple_of(f) {
                n /= f;
            }
        }
        f += if f == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Returns true when `alpha` generates the full multiplicative group of GF(q).
///
/// Requires `q - 1` to fit in the trial-division budget.
pub fn is_primitive_root_small(alpha: &BigUint, q: u64) -> bool {
    let Some(a) = alpha.to_u64() else {
        return false;
    };
    let qb = BigUint::from(q);
    let a = BigUint::from(a);
    distinct_prime_factors(q - 1)
        .into_iter()
        .all(|f| !a.modpow(&BigUint::from((q - 1) / f), &qb).is_one())
}
