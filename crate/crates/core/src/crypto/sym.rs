use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Key};

use super::CryptoError;

/// Authentication tag overhead of every ciphertext.
pub const SYM_TAG_LEN: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymKey(pub [u8; 32]);

impl std::fmt::Debug for SymKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymKey(..)")
    }
}

impl SymKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

/// 96-bit GCM nonce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Nonce(pub [u8; 12]);

impl Nonce {
    /// Big-endian counter nonce.
    pub fn from_index(i: u64) -> Self {
        let mut n = [0u8; 12];
        n[4..].copy_from_slice(&i.to_be_bytes());
        Nonce(n)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        <[u8; 12]>::try_from(bytes).ok().map(Nonce)
    }

    pub fn as_bytes(&self) -> &[u8; 12] {
        &self.0
    }
}

pub fn sym_encrypt(key: &SymKey, nonce: &Nonce, m: &[u8]) -> Vec<u8> {
    let cipher = Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(&key.0));
    cipher
        .encrypt(aes_gcm::Nonce::from_slice(&nonce.0), m)
        .expect("AES-GCM encryption cannot fail for in-memory buffers")
}

pub fn sym_decrypt(key: &SymKey, nonce: &Nonce, c: &[u8]) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(&key.0));
    cipher.decrypt(aes_gcm::Nonce::from_slice(&nonce.0), c).map_err(|_| CryptoError::Integrity)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY: SymKey = SymKey([7u8; 32]);

    #[test]
    fn empty_round_trip() {
        let n = Nonce::from_index(0);
        let c = sym_encrypt(&KEY, &n, b"");
        assert_eq!(c.len(), SYM_TAG_LEN);
        assert_eq!(sym_decrypt(&KEY, &n, &c).unwrap(), b"");
    }

    #[test]
    fn overhead_is_tag() {
        for len in [1usize, 15, 16, 1000] {
            let m = vec![0xabu8; len];
            assert_eq!(sym_encrypt(&KEY, &Nonce::from_index(1), &m).len(), len + 16);
        }
    }

    #[test]
    fn every_bit_flip_is_detected() {
        let n = Nonce::from_index(3);
        let c = sym_encrypt(&KEY, &n, b"furnace reading");
        for bit in 0..c.len() * 8 {
            let mut t = c.clone();
            t[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(sym_decrypt(&KEY, &n, &t), Err(CryptoError::Integrity));
        }
    }

    #[test]
    fn wrong_nonce_or_key() {
        let c = sym_encrypt(&KEY, &Nonce::from_index(1), b"m");
        assert!(sym_decrypt(&KEY, &Nonce::from_index(2), &c).is_err());
        assert!(sym_decrypt(&SymKey([8u8; 32]), &Nonce::from_index(1), &c).is_err());
    }
}
