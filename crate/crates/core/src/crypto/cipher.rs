use aes_gcm::Aes256Gcm;
use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::ChaCha20Poly1305;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dhke::SharedSecret;
use super::CryptoError;

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const AEAD_TAG_LEN: usize = 16;
/// Bytes a ciphertext carries beyond its plaintext.
pub const CIPHERTEXT_OVERHEAD: usize = NONCE_LEN + AEAD_TAG_LEN;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymmetricKey([u8; KEY_LEN]);

impl SymmetricKey {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    /// Short public fingerprint, safe to log.
    pub fn fingerprint(&self) -> String {
        hex::encode(&Sha256::digest(self.0)[..8])
    }
}

impl std::fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymmetricKey({})", self.fingerprint())
    }
}

/// SHA-256 over the canonical big-endian encoding of `k`.
pub fn derive_key(shared: &SharedSecret) -> SymmetricKey {
    let digest = Sha256::digest(shared.to_be_bytes());
    SymmetricKey(digest.into())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CipherKind {
    #[default]
    #[serde(rename = "chacha20-poly1305")]
    ChaCha20Poly1305,
    #[serde(rename = "aes-256-gcm")]
    Aes256Gcm,
}

impl CipherKind {
    pub fn name(self) -> &'static str {
        match self {
            CipherKind::ChaCha20Poly1305 => "chacha20-poly1305",
            CipherKind::Aes256Gcm => "aes-256-gcm",
        }
    }

    /// Deterministic AEAD encryption. The nonce is synthesized from the key
    /// and plaintext and prepended, so equal inputs give equal outputs and
    /// distinct plaintexts never share a nonce under one key.
    pub fn encrypt(self, plaintext: &[u8], key: &SymmetricKey) -> Vec<u8> {
        let nonce = synthetic_nonce(plaintext, key);
        let body = match self {
            CipherKind::ChaCha20Poly1305 => ChaCha20Poly1305::new(key.as_bytes().into())
                .encrypt(nonce.as_slice().into(), plaintext),
            CipherKind::Aes256Gcm => {
                Aes256Gcm::new(key.as_bytes().into()).encrypt(nonce.as_slice().into(), plaintext)
            }
        }
        .expect("in-memory AEAD encryption does not fail");
        let mut out = Vec::with_capacity(NONCE_LEN + body.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&body);
        out
    }

    pub fn decrypt(self, ciphertext: &[u8], key: &SymmetricKey) -> Result<Vec<u8>, CryptoError> {
        if ciphertext.len() < CIPHERTEXT_OVERHEAD {
            return Err(CryptoError::MalformedCiphertext(ciphertext.len()));
        }
        let (nonce, body) = ciphertext.split_at(NONCE_LEN);
        match self {
            CipherKind::ChaCha20Poly1305 => {
                ChaCha20Poly1305::new(key.as_bytes().into()).decrypt(nonce.into(), body)
            }
            CipherKind::Aes256Gcm => {
                Aes256Gcm::new(key.as_bytes().into()).decrypt(nonce.into(), body)
            }
        }
        .map_err(|_| CryptoError::DecryptionFailed)
    }
}

fn synthetic_nonce(plaintext: &[u8], key: &SymmetricKey) -> [u8; NONCE_LEN] {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key.as_bytes()).expect("any key length");
    mac.update(b"mtms-siv-nonce");
    mac.update(plaintext);
    let full = mac.finalize().into_bytes();
    let mut nonce = [0u8; NONCE_LEN];
    nonce.copy_from_slice(&full[..NONCE_LEN]);
    nonce
}

/// Encrypts with the default cipher.
pub fn encrypt(plaintext: &[u8], key: &SymmetricKey) -> Vec<u8> {
    CipherKind::default().encrypt(plaintext, key)
}

pub fn decrypt(ciphertext: &[u8], key: &SymmetricKey) -> Result<Vec<u8>, CryptoError> {
    CipherKind::default().decrypt(ciphertext, key)
}
