use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::cipher::SymmetricKey;

pub const TAG_LEN: usize = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MacKind {
    #[default]
    #[serde(rename = "hmac-sha256")]
    HmacSha256,
}

impl MacKind {
    pub fn name(self) -> &'static str {
        "hmac-sha256"
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AuthTag([u8; TAG_LEN]);

impl AuthTag {
    pub fn from_bytes(bytes: [u8; TAG_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; TAG_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for AuthTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AuthTag({})", hex::encode(&self.0[..6]))
    }
}

fn hmac(key: &SymmetricKey) -> Hmac<Sha256> {
    <Hmac<Sha256> as Mac>::new_from_slice(key.as_bytes()).expect("any key length")
}

pub fn auth_tag(message: &[u8], key: &SymmetricKey) -> AuthTag {
    let mut mac = hmac(key);
    mac.update(message);
    AuthTag(mac.finalize().into_bytes().into())
}

/// Constant-time tag check.
pub fn verify_tag(message: &[u8], key: &SymmetricKey, tag: &AuthTag) -> bool {
    let mut mac = hmac(key);
    mac.update(message);
    mac.verify_slice(tag.as_bytes()).is_ok()
}
