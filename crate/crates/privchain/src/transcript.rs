//! Fiat–Shamir transcript: a label plus an ordered list of tagged items.
//!
//! The challenge is SHA-512 over
//! `len(label) || label || (len(tag) || tag || len(item) || item)*`
//! with `u32` big-endian lengths, reduced modulo the group order.

use sha2::{Digest, Sha512};

use crate::group::Scalar;

#[derive(Clone, Debug)]
pub struct Transcript {
    label: Vec<u8>,
    absorbed: Vec<(Vec<u8>, Vec<u8>)>,
}

impl Transcript {
    pub fn new(label: &[u8]) -> Self {
        Transcript {
            label: label.to_vec(),
            absorbed: Vec::new(),
        }
    }

    pub fn absorb(&mut self, tag: &[u8], bytes: &[u8]) -> &mut Self {
        self.absorbed.push((tag.to_vec(), bytes.to_vec()));
        self
    }

    pub fn len(&self) -> usize {
        self.absorbed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorbed.is_empty()
    }

    pub fn challenge(&self) -> Scalar {
        challenge(self)
    }
}

fn put(h: &mut Sha512, bytes: &[u8]) {
    h.update((bytes.len() as u32).to_be_bytes());
    h.update(bytes);
}

/// Deterministic challenge scalar for the absorbed sequence.
pub fn challenge(transcript: &Transcript) -> Scalar {
    debug_assert!(!transcript.is_empty(), "challenge over empty transcript");
    let mut h = Sha512::new();
    put(&mut h, &transcript.label);
    for (tag, item) in &transcript.absorbed {
        put(&mut h, tag);
        put(&mut h, item);
    }
    Scalar::from_be_bytes_mod_order(&h.finalize())
}
