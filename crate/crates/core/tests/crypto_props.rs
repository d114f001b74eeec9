mod common;

use mtms_core::crypto::{
    auth_tag, derive_key, dhke_keypair, dhke_shared, verify_tag, CipherKind, CryptoError,
    DhkeParams, KeyPair, KeyRegistry, SignerId, SymmetricKey,
};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Square-and-multiply in u128, separate from the bignum path.
fn powmod(mut b: u128, mut e: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

fn small_group() -> impl Strategy<Value = (u64, u64)> {
    let primes: Vec<u64> = common::primes_below(2000).into_iter().filter(|&p| p >= 11).collect();
    proptest::sample::select(primes).prop_map(|q| (q, common::smallest_generator(q)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn small_groups_agree_with_brute_force((q, alpha) in small_group(), a in any::<u64>(), b in any::<u64>()) {
        let params = DhkeParams::new(q.into(), alpha.into()).unwrap();
        let xi = a % (q - 2) + 1;
        let xj = b % (q - 2) + 1;
        let yi = common::brute_pow(alpha, xi, q);
        let yj = common::brute_pow(alpha, xj, q);
        prop_assume!(yi != q - 1 && yj != q - 1);
        let pi = KeyPair::from_secret(&params, xi.into()).unwrap();
        let pj = KeyPair::from_secret(&params, xj.into()).unwrap();
        prop_assert_eq!(pi.public().to_u64(), Some(yi));
        let k1 = dhke_shared(pj.public(), pi.secret(), &params).unwrap();
        let k2 = dhke_shared(pi.public(), pj.secret(), &params).unwrap();
        prop_assert_eq!(k1.value().to_u64(), Some(common::brute_pow(yj, xi, q)));
        prop_assert_eq!(*derive_key(&k1).as_bytes(), *derive_key(&k2).as_bytes());
    }

    #[test]
    fn default_group_symmetric(seed in any::<u64>()) {
        let params = DhkeParams::desk64();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = dhke_keypair(&params, &mut rng);
        let b = dhke_keypair(&params, &mut rng);
        let q = params.q().to_u128().unwrap();
        let alpha = params.alpha().to_u128().unwrap();
        let xa = a.secret().to_u128().unwrap();
        prop_assert_eq!(a.public().to_u128().unwrap(), powmod(alpha, xa, q));
        let k = dhke_shared(b.public(), a.secret(), &params).unwrap();
        prop_assert_eq!(k.value().to_u128().unwrap(), powmod(b.public().to_u128().unwrap(), xa, q));
        prop_assert_eq!(k, dhke_shared(a.public(), b.secret(), &params).unwrap());
        prop_assert!(xa >= 1 && xa <= q - 2);
    }

    #[test]
    fn roundtrip_any_payload(data in proptest::collection::vec(any::<u8>(), 0..4096), key in any::<[u8; 32]>()) {
        let key = SymmetricKey::from_bytes(key);
        for cipher in [CipherKind::ChaCha20Poly1305, CipherKind::Aes256Gcm] {
            let ct = cipher.encrypt(&data, &key);
            prop_assert_eq!(cipher.decrypt(&ct, &key).unwrap(), data.clone());
        }
    }

    #[test]
    fn single_bit_flips_rejected(data in proptest::collection::vec(any::<u8>(), 1..512), bit in any::<usize>()) {
        let key = SymmetricKey::from_bytes([9; 32]);
        let flip = |bytes: &[u8]| {
            let mut v = bytes.to_vec();
            let i = bit % (v.len() * 8);
            v[i / 8] ^= 1 << (i % 8);
            v
        };
        let ct = CipherKind::Aes256Gcm.encrypt(&data, &key);
        prop_assert!(CipherKind::Aes256Gcm.decrypt(&flip(&ct), &key).is_err());
        let tag = auth_tag(&data, &key);
        prop_assert!(!verify_tag(&flip(&data), &key, &tag));
        let mut reg = KeyRegistry::default();
        reg.register(SignerId::Gateway, [3; 32]);
        let sig = reg.sign(&data, SignerId::Gateway).unwrap();
        prop_assert!(reg.verify_sig(&data, &sig, SignerId::Gateway));
        prop_assert!(!reg.verify_sig(&flip(&data), &sig, SignerId::Gateway));
    }
}

#[test]
fn one_megabyte_roundtrip() {
    let data: Vec<u8> = (0..1_000_000u32).map(|i| (i * 31 % 251) as u8).collect();
    let key = SymmetricKey::from_bytes([1; 32]);
    for cipher in [CipherKind::ChaCha20Poly1305, CipherKind::Aes256Gcm] {
        assert_eq!(cipher.decrypt(&cipher.encrypt(&data, &key), &key).unwrap(), data);
    }
}

#[test]
fn wrong_key_and_short_ciphertext() {
    let k1 = SymmetricKey::from_bytes([1; 32]);
    let k2 = SymmetricKey::from_bytes([2; 32]);
    let ct = CipherKind::ChaCha20Poly1305.encrypt(b"payload", &k1);
    assert_eq!(CipherKind::ChaCha20Poly1305.decrypt(&ct, &k2), Err(CryptoError::DecryptionFailed));
    assert!(matches!(
        CipherKind::ChaCha20Poly1305.decrypt(&ct[..4], &k1),
        Err(CryptoError::MalformedCiphertext(4))
    ));
}

#[test]
fn trivial_public_keys_refused() {
    let params = DhkeParams::new(23u32.into(), 5u32.into()).unwrap();
    let own = KeyPair::from_secret(&params, BigUint::from(6u32)).unwrap();
    for bad in [0u32, 1, 22, 23, 99] {
        assert_eq!(
            dhke_shared(&BigUint::from(bad), own.secret(), &params),
            Err(CryptoError::PublicKeyOutOfRange)
        );
    }
    assert!(KeyPair::from_secret(&params, BigUint::from(0u32)).is_err());
    assert!(KeyPair::from_secret(&params, BigUint::from(22u32)).is_err());
}

#[test]
fn non_generator_rejected() {
    // 4 is a square mod 23, so it generates only half the group.
    assert!(DhkeParams::new(23u32.into(), 4u32.into()).is_err());
    assert!(DhkeParams::new(21u32.into(), 2u32.into()).is_err());
}
