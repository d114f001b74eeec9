//! Ed25519 signatures over SHA-256 message digests.
//!
//! Signing a digest lets large payloads be hashed once and the digest reused
//! by every verifier that holds the same buffer.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CryptoError;
use crate::ids::DeviceId;

pub const SIGNATURE_LEN: usize = 64;
pub type MessageDigest = [u8; 32];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignatureKind {
    #[default]
    #[serde(rename = "ed25519")]
    Ed25519,
}

impl SignatureKind {
    pub fn name(self) -> &'static str {
        "ed25519"
    }
}

/// Who produced a signature: the multicast gateway or a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignerId {
    Gateway,
    Device(DeviceId),
}

impl fmt::Display for SignerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignerId::Gateway => f.write_str("mtms-gw"),
            SignerId::Device(d) => d.fmt(f),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub signer: SignerId,
    pub bytes: [u8; SIGNATURE_LEN],
}

impl Signature {
    /// A syntactically well-formed signature that verifies against nothing.
    pub fn stripped(signer: SignerId) -> Self {
        Self {
            signer,
            bytes: [0u8; SIGNATURE_LEN],
        }
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}, {})", self.signer, hex::encode(&self.bytes[..6]))
    }
}

pub fn digest(message: &[u8]) -> MessageDigest {
    Sha256::digest(message).into()
}

/// Private signing capability of one identity.
#[derive(Clone)]
pub struct Signer {
    id: SignerId,
    key: SigningKey,
}

impl Signer {
    pub fn from_seed(id: SignerId, seed: [u8; 32]) -> Self {
        Self {
            id,
            key: SigningKey::from_bytes(&seed),
        }
    }

    pub fn id(&self) -> SignerId {
        self.id
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        self.sign_digest(&digest(message))
    }

    pub fn sign_digest(&self, digest: &MessageDigest) -> Signature {
        Signature {
            signer: self.id,
            bytes: self.key.sign(digest).to_bytes(),
        }
    }
}

impl fmt::Debug for Signer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signer({})", self.id)
    }
}

/// Public verification keys of every registered identity.
#[derive(Debug, Clone, Default)]
pub struct VerifierDirectory {
    keys: BTreeMap<SignerId, VerifyingKey>,
}

impl VerifierDirectory {
    pub fn insert(&mut self, id: SignerId, key: VerifyingKey) {
        self.keys.insert(id, key);
    }

    pub fn contains(&self, id: SignerId) -> bool {
        self.keys.contains_key(&id)
    }

    /// True only if `signature` was made by `signer` over exactly `message`.
    pub fn verify(&self, message: &[u8], signature: &Signature, signer: SignerId) -> bool {
        self.verify_digest(&digest(message), signature, signer)
    }

    pub fn verify_digest(
        &self,
        digest: &MessageDigest,
        signature: &Signature,
        signer: SignerId,
    ) -> bool {
        if signature.signer != signer {
            return false;
        }
        let Some(key) = self.keys.get(&signer) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&signature.bytes);
        key.verify(digest, &sig).is_ok()
    }
}

/// Holds signing keys of every identity in a scenario; the provisioning
/// authority hands each entity its own [`Signer`].
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    signers: BTreeMap<SignerId, Signer>,
    directory: VerifierDirectory,
}

impl KeyRegistry {
    pub fn register(&mut self, id: SignerId, seed: [u8; 32]) -> Signer {
        let signer = Signer::from_seed(id, seed);
        self.directory.insert(id, signer.verifying_key());
        self.signers.insert(id, signer.clone());
        signer
    }

    pub fn signer(&self, id: SignerId) -> Result<&Signer, CryptoError> {
        self.signers.get(&id).ok_or(CryptoError::UnknownSigner(id))
    }

    pub fn sign(&self, message: &[u8], signer: SignerId) -> Result<Signature, CryptoError> {
        Ok(self.signer(signer)?.sign(message))
    }

    pub fn verify_sig(&self, message: &[u8], signature: &Signature, signer: SignerId) -> bool {
        self.directory.verify(message, signature, signer)
    }

    pub fn directory(&self) -> Arc<VerifierDirectory> {
        Arc::new(self.directory.clone())
    }
}
