//! Diffie-Hellman key agreement over GF(q).
//!
//! Both peers hold `(q, alpha)`. Peer i draws `x_i`, publishes
//! `y_i = alpha^x_i mod q`, and computes `k = y_j^x_i mod q`, which equals
//! `alpha^(x_i * x_j) mod q` from either side. Public keys are relayed by the
//! base station, never exchanged device to device.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::primes::{is_primitive_root_small, is_probable_prime};
use super::CryptoError;

/// Moduli below this bound have `q - 1` factored by trial division so that
/// `alpha` can be checked as a full primitive root.
const TRIAL_FACTOR_LIMIT: u64 = 1 << 40;

/// 64-bit safe prime `q = 2p + 1` with primitive root 2.
pub const DESK64_Q_HEX: &str = "fffffffffffffa43";
pub const DESK64_ALPHA: u32 = 2;

/// 2048-bit MODP group (RFC 3526, group 14). Generator 2 spans the
/// prime-order subgroup of size `(q - 1) / 2`.
pub const MODP2048_Q_HEX: &str = concat!(
    "ffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74",
    "020bbea63b139b22514a08798e3404ddef9519b3cd3a431b302b0a6df25f1437",
    "4fe1356d6d51c245e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7ed",
    "ee386bfb5a899fa5ae9f24117c4b1fe649286651ece45b3dc2007cb8a163bf05",
    "98da48361c55d39a69163fa8fd24cf5f83655d23dca3ad961c62f356208552bb",
    "9ed529077096966d670c354e4abc9804f1746c08ca18217c32905e462e36ce3b",
    "e39e772c180e86039b2783a2ec07a28fb5c55df06f4c52c9de2bcbf695581718",
    "3995497cea956ae515d2261898fa051015728e5a8aacaa68ffffffffffffffff",
);

#[derive(Clone, PartialEq, Eq)]
pub struct DhkeParams {
    q: BigUint,
    alpha: BigUint,
}

impl DhkeParams {
    /// Validates `q` and `alpha`.
    ///
    /// `alpha` must generate GF(q)* when `q - 1` is cheap to factor. For
    /// larger moduli `q` must be a safe prime and `alpha` must have order at
    /// least `(q - 1) / 2`.
    pub fn new(q: BigUint, alpha: BigUint) -> Result<Self, CryptoError> {
        if !is_probable_prime(&q) {
            return Err(CryptoError::InvalidParams("q is not prime".into()));
        }
        if alpha <= BigUint::one() || alpha >= q {
            return Err(CryptoError::InvalidParams("alpha must lie in (1, q)".into()));
        }
        let q_minus_one = &q - 1u32;
        match q.to_u64() {
            Some(small) if small < TRIAL_FACTOR_LIMIT => {
                if !is_primitive_root_small(&alpha, small) {
                    return Err(CryptoError::InvalidParams(format!(
                        "alpha = {alpha} is not a primitive element of GF({small})"
                    )));
                }
            }
            _ => {
                let p = &q_minus_one >> 1;
                if !is_probable_prime(&p) {
                    return Err(CryptoError::InvalidParams(
                        "large q must be a safe prime so the generator can be checked".into(),
                    ));
                }
                if alpha.modpow(&BigUint::from(2u32), &q).is_one() {
                    return Err(CryptoError::InvalidParams(
                        "alpha lies in the order-2 subgroup".into(),
                    ));
                }
            }
        }
        Ok(Self { q, alpha })
    }

    pub fn from_hex(q_hex: &str, alpha_hex: &str) -> Result<Self, CryptoError> {
        let q = parse_hex(q_hex)?;
        let alpha = parse_hex(alpha_hex)?;
        Self::new(q, alpha)
    }

    pub fn desk64() -> Self {
        Self::new(parse_hex(DESK64_Q_HEX).unwrap(), BigUint::from(DESK64_ALPHA))
            .expect("built-in 64-bit group is valid")
    }

    pub fn modp2048() -> Self {
        Self {
            q: parse_hex(MODP2048_Q_HEX).unwrap(),
            alpha: BigUint::from(2u32),
        }
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn alpha(&self) -> &BigUint {
        &self.alpha
    }

    pub fn modulus_bits(&self) -> u64 {
        self.q.bits()
    }
}

impl fmt::Debug for DhkeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DhkeParams {{ q: {} bits, alpha: {} }}", self.q.bits(), self.alpha)
    }
}

#[derive(Serialize, Deserialize)]
struct DhkeParamsRepr {
    q: String,
    alpha: String,
}

impl Serialize for DhkeParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DhkeParamsRepr {
            q: format!("{:x}", self.q),
            alpha: format!("{:x}", self.alpha),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DhkeParams {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = DhkeParamsRepr::deserialize(deserializer)?;
        DhkeParams::from_hex(&repr.q, &repr.alpha).map_err(serde::de::Error::custom)
    }
}

pub fn parse_hex(s: &str) -> Result<BigUint, CryptoError> {
    let digits: String = s
        .trim()
        .trim_start_matches("0x")
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .collect();
    BigUint::parse_bytes(digits.as_bytes(), 16)
        .ok_or_else(|| CryptoError::InvalidParams(format!("not a hex integer: {s:?}")))
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    x_secret: BigUint,
    y_public: BigUint,
}

impl KeyPair {
    /// Builds a key pair from a chosen secret in `[1, q - 2]`.
    pub fn from_secret(params: &DhkeParams, x_secret: BigUint) -> Result<Self, CryptoError> {
        check_secret(params, &x_secret)?;
        let y_public = params.alpha.modpow(&x_secret, &params.q);
        Ok(Self { x_secret, y_public })
    }

    pub fn secret(&self) -> &BigUint {
        &self.x_secret
    }

    pub fn public(&self) -> &BigUint {
        &self.y_public
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("y_public", &self.y_public)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SharedSecret {
    k: BigUint,
}

impl SharedSecret {
    pub fn value(&self) -> &BigUint {
        &self.k
    }

    /// Canonical big-endian encoding, no leading zero bytes.
    pub fn to_be_bytes(&self) -> Vec<u8> {
        self.k.to_bytes_be()
    }
}

fn check_secret(params: &DhkeParams, x: &BigUint) -> Result<(), CryptoError> {
    let upper = &params.q - 2u32;
    if x.is_zero() || *x > upper {
        return Err(CryptoError::SecretOutOfRange);
    }
    Ok(())
}

/// Uniform integer in `[0, bound)` by rejection sampling on masked bytes.
pub(crate) fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero());
    let bits = bound.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let excess = (nbytes as u64 * 8 - bits) as u32;
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if candidate < *bound {
            return candidate;
        }
    }
}

/// Draws `x` uniformly from `[1, q - 2]` and computes `y = alpha^x mod q`,
/// redrawing the one `x` that maps to `q - 1`.
pub fn dhke_keypair<R: RngCore + ?Sized>(params: &DhkeParams, rng: &mut R) -> KeyPair {
    let span = &params.q - 2u32;
    let minus_one = &params.q - 1u32;
    loop {
        let x = uniform_below(rng, &span) + 1u32;
        let y_public = params.alpha.modpow(&x, &params.q);
        // The peer would refuse q - 1 as a public key.
        if y_public != minus_one {
            return KeyPair {
                x_secret: x,
                y_public,
            };
        }
    }
}

/// `k = peer_public^own_secret mod q`.
///
/// Rejects peer keys in `{0, 1, q - 1}` or outside the field so a peer
/// cannot force the secret into a trivial subgroup.
pub fn dhke_shared(
    peer_public: &BigUint,
    own_secret: &BigUint,
    params: &DhkeParams,
) -> Result<SharedSecret, CryptoError> {
    let q_minus_one = &params.q - 1u32;
    if peer_public.is_zero() || peer_public.is_one() || *peer_public >= q_minus_one {
        return Err(CryptoError::PublicKeyOutOfRange);
    }
    check_secret(params, own_secret)?;
    Ok(SharedSecret {
        k: peer_public.modpow(own_secret, &params.q),
    })
}

/// `alpha^secret mod q`, used by the base station to check a revealed secret.
pub fn public_from_secret(params: &DhkeParams, secret: &BigUint) -> Result<BigUint, CryptoError> {
    check_secret(params, secret)?;
    Ok(params.alpha.modpow(secret, &params.q))
}
