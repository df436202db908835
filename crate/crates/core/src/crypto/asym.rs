//! Key encapsulation over X25519 with a fixed-size padded ciphertext.
//!
//! Layout: `epk (32) || AEAD(len:u16 || m || zero padding)`, total length fixed.

use rand::{CryptoRng, RngCore};
use x25519_dalek::{PublicKey, StaticSecret};

use super::hash::hash_parts;
use super::sym::{sym_decrypt, sym_encrypt, Nonce, SymKey, SYM_TAG_LEN};
use super::CryptoError;

/// Default ciphertext length.
pub const ASYM_CIPHERTEXT_LEN: usize = 256;

const EPK_LEN: usize = 32;
const LEN_PREFIX: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AsymPublicKey(pub [u8; 32]);

#[derive(Clone)]
pub struct AsymKeyPair {
    secret: StaticSecret,
    public: AsymPublicKey,
}

impl std::fmt::Debug for AsymKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AsymKeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl AsymKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = StaticSecret::random_from_rng(rng);
        let public = AsymPublicKey(PublicKey::from(&secret).to_bytes());
        AsymKeyPair { secret, public }
    }

    pub fn public(&self) -> &AsymPublicKey {
        &self.public
    }
}

fn wrap_key(shared: &[u8; 32], epk: &[u8; 32], pk: &[u8; 32]) -> SymKey {
    SymKey(hash_parts(&[b"fairshare/kem", shared, epk, pk]).0)
}

/// Largest message that fits a ciphertext of `total_len` bytes.
pub fn asym_capacity(total_len: usize) -> usize {
    total_len.saturating_sub(EPK_LEN + SYM_TAG_LEN + LEN_PREFIX)
}

pub fn asym_encrypt<R: RngCore + CryptoRng>(pk: &AsymPublicKey, m: &[u8], rng: &mut R) -> Result<Vec<u8>, CryptoError> {
    asym_encrypt_sized(pk, m, ASYM_CIPHERTEXT_LEN, rng)
}

pub fn asym_encrypt_sized<R: RngCore + CryptoRng>(
    pk: &AsymPublicKey,
    m: &[u8],
    total_len: usize,
    rng: &mut R,
) -> Result<Vec<u8>, CryptoError> {
    let max = asym_capacity(total_len);
    if m.len() > max || m.len() > u16::MAX as usize {
        return Err(CryptoError::MessageTooLong { len: m.len(), max });
    }
    let esk = StaticSecret::random_from_rng(rng);
    let epk = PublicKey::from(&esk).to_bytes();
    let shared = esk.diffie_hellman(&PublicKey::from(pk.0));
    let key = wrap_key(shared.as_bytes(), &epk, &pk.0);

    let mut body = Vec::with_capacity(LEN_PREFIX + max);
    body.extend_from_slice(&(m.len() as u16).to_be_bytes());
    body.extend_from_slice(m);
    body.resize(LEN_PREFIX + max, 0);

    let mut out = Vec::with_capacity(total_len);
    out.extend_from_slice(&epk);
    out.extend(sym_encrypt(&key, &Nonce::default(), &body));
    debug_assert_eq!(out.len(), total_len);
    Ok(out)
}

pub fn asym_decrypt(kp: &AsymKeyPair, c: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if c.len() < EPK_LEN + SYM_TAG_LEN + LEN_PREFIX {
        return Err(CryptoError::Decode("ciphertext too short".into()));
    }
    let mut epk = [0u8; 32];
    epk.copy_from_slice(&c[..EPK_LEN]);
    let shared = kp.secret.diffie_hellman(&PublicKey::from(epk));
    let key = wrap_key(shared.as_bytes(), &epk, &kp.public.0);
    let body = sym_decrypt(&key, &Nonce::default(), &c[EPK_LEN..])?;
    let len = u16::from_be_bytes([body[0], body[1]]) as usize;
    if LEN_PREFIX + len > body.len() {
        return Err(CryptoError::Decode("length prefix out of range".into()));
    }
    Ok(body[LEN_PREFIX..LEN_PREFIX + len].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trip_fixed_size() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let kp = AsymKeyPair::generate(&mut rng);
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        let c = asym_encrypt(kp.public(), &k, &mut rng).unwrap();
        assert_eq!(c.len(), 256);
        assert_eq!(asym_decrypt(&kp, &c).unwrap(), k);
    }

    #[test]
    fn size_is_configurable() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let kp = AsymKeyPair::generate(&mut rng);
        let c = asym_encrypt_sized(kp.public(), b"key", 512, &mut rng).unwrap();
        assert_eq!(c.len(), 512);
        assert_eq!(asym_decrypt(&kp, &c).unwrap(), b"key");
        assert!(asym_encrypt_sized(kp.public(), &[0; 40], 80, &mut rng).is_err());
        assert!(asym_encrypt_sized(kp.public(), &[0; 30], 80, &mut rng).is_ok());
    }

    #[test]
    fn unrelated_key_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let kp = AsymKeyPair::generate(&mut rng);
        let other = AsymKeyPair::generate(&mut rng);
        let c = asym_encrypt(kp.public(), &[1; 32], &mut rng).unwrap();
        assert_eq!(asym_decrypt(&other, &c), Err(CryptoError::Integrity));
    }

    #[test]
    fn truncated_ciphertext() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let kp = AsymKeyPair::generate(&mut rng);
        assert!(matches!(asym_decrypt(&kp, &[0; 10]), Err(CryptoError::Decode(_))));
    }
}
