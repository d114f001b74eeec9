//! Key agreement, symmetric encryption, message authentication and
//! signatures.
//!
//! Every function here is pure given its inputs and an explicit random
//! source, so it can be called from any thread.

mod cipher;
mod dhke;
mod mac;
pub mod primes;
mod signature;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cipher::{
    decrypt, derive_key, encrypt, CipherKind, SymmetricKey, AEAD_TAG_LEN, CIPHERTEXT_OVERHEAD,
    KEY_LEN, NONCE_LEN,
};
pub use dhke::{
    dhke_keypair, dhke_shared, parse_hex, public_from_secret, DhkeParams, KeyPair, SharedSecret,
    DESK64_ALPHA, DESK64_Q_HEX, MODP2048_Q_HEX,
};
pub use mac::{auth_tag, verify_tag, AuthTag, MacKind, TAG_LEN};
pub use signature::{
    digest, KeyRegistry, MessageDigest, Signature, SignatureKind, Signer, SignerId,
    VerifierDirectory, SIGNATURE_LEN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("invalid DHKE parameters: {0}")]
    InvalidParams(String),
    #[error("peer public key outside [2, q-2]")]
    PublicKeyOutOfRange,
    #[error("secret exponent outside [1, q-2]")]
    SecretOutOfRange,
    #[error("ciphertext of {0} bytes is shorter than nonce plus tag")]
    MalformedCiphertext(usize),
    #[error("ciphertext failed authentication")]
    DecryptionFailed,
    #[error("no signing key registered for {0}")]
    UnknownSigner(SignerId),
}

/// Names of the primitives in use; echoed into every run's config.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryptoSuite {
    pub cipher: CipherKind,
    pub mac: MacKind,
    pub signature: SignatureKind,
}
