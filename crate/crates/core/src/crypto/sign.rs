use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};

use super::hash::Digest;

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone)]
pub struct SigningPair {
    sk: SigningKey,
}

impl SigningPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        SigningPair { sk: SigningKey::generate(rng) }
    }

    pub fn public(&self) -> [u8; 32] {
        self.sk.verifying_key().to_bytes()
    }
}

pub fn sign(key: &SigningPair, digest: &Digest) -> Signature {
    Signature(key.sk.sign(digest.as_bytes()).to_bytes())
}

/// Malformed keys or signatures yield `false`.
pub fn verify(pk: &[u8; 32], digest: &Digest, sig: &[u8]) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(pk) else {
        return false;
    };
    let Ok(sig) = ed25519_dalek::Signature::from_slice(sig) else {
        return false;
    };
    vk.verify(digest.as_bytes(), &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash::hash;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sign_verify() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = SigningPair::generate(&mut rng);
        let d = hash(b"reading");
        let s = sign(&kp, &d);
        assert!(verify(&kp.public(), &d, &s.0));
        assert!(!verify(&kp.public(), &hash(b"other"), &s.0));
    }

    #[test]
    fn other_keys_reject() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let kp = SigningPair::generate(&mut rng);
        let d = hash(b"fixed");
        for _ in 0..100 {
            let other = SigningPair::generate(&mut rng);
            assert!(!verify(&kp.public(), &d, &sign(&other, &d).0));
        }
    }

    #[test]
    fn malformed_is_false() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = SigningPair::generate(&mut rng);
        let d = hash(b"x");
        assert!(!verify(&kp.public(), &d, &[0u8; 10]));
        assert!(!verify(&kp.public(), &d, &[0xffu8; 64]));
    }
}
