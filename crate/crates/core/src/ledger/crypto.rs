//! Simulation-grade integrity primitives: SHA-256 digests and HMAC-SHA256 tags
//! keyed per base station. Keys are derived from a seed; there is no PKI.

use hmac::{Hmac, KeyInit, Mac};
use sha2::{Digest as _, Sha256};

use crate::model::BsId;

pub type Digest = [u8; 32];
pub type Tag = [u8; 32];

type HmacSha256 = Hmac<Sha256>;

pub fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

pub fn hex(d: &[u8]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// One symmetric key per base station.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRing {
    keys: Vec<[u8; 32]>,
}

impl KeyRing {
    pub fn derive(seed: u64, num_bs: usize) -> Self {
        let keys = (0..num_bs as u64)
            .map(|i| sha256(&[b"dtwn-key", &seed.to_le_bytes(), &i.to_le_bytes()]))
            .collect();
        Self { keys }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn mac(&self, bs: BsId) -> Option<HmacSha256> {
        let key = self.keys.get(bs)?;
        Some(HmacSha256::new_from_slice(key).expect("HMAC accepts any key length"))
    }

    pub fn tag(&self, bs: BsId, message: &[u8]) -> Option<Tag> {
        let mut mac = self.mac(bs)?;
        mac.update(message);
        Some(mac.finalize().into_bytes().into())
    }

    /// Constant-time tag check; unknown signers never verify.
    pub fn verify(&self, bs: BsId, message: &[u8], tag: &Tag) -> bool {
        match self.mac(bs) {
            Some(mut mac) => {
                mac.update(message);
                mac.verify_slice(tag).is_ok()
            }
            None => false,
        }
    }
}
