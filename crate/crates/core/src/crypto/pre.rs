//! Unidirectional single-hop proxy re-encryption.
//!
//! `pk = g^sk`, `rk(A->B) = pk_B^(1/sk_A)`. A first-level ciphertext is
//! `(pk^r, e(g,g)^r * K)`; the proxy blinds it with a fresh `t` into
//! `(rk^(1/t), c1^t, c2)` and the delegatee recovers
//! `K = c2 / e(c1', c1'')^(1/sk_B)`.

use rand::{CryptoRng, RngCore};

use super::hash::hash_parts;
use super::pairing::{Gt, Scalar, G1};
use super::params::PublicParams;
use super::sym::SymKey;
use super::CryptoError;
use crate::ids::PartyId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreKeyPair {
    sk: Scalar,
    pk: G1,
}

impl PreKeyPair {
    pub fn from_secret(params: &PublicParams, sk: Scalar) -> Result<Self, CryptoError> {
        let sk = params.group().reduce(sk.as_biguint());
        if sk.is_zero() {
            return Err(CryptoError::InvalidKey);
        }
        let pk = params.group().mul(params.generator(), &sk);
        Ok(PreKeyPair { sk, pk })
    }

    pub fn sk(&self) -> &Scalar {
        &self.sk
    }

    pub fn pk(&self) -> &G1 {
        &self.pk
    }
}

/// Re-encryption key from one party to another.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReEncKey {
    pub rk: G1,
    pub from_id: PartyId,
    pub to_id: PartyId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreCiphertext {
    pub c1: G1,
    pub c2: Gt,
}

/// Re-encrypted ciphertext. There is no re-encryption operation on this type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReCiphertext {
    pub c1p: G1,
    pub c1pp: G1,
    pub c2: Gt,
}

impl PreCiphertext {
    pub fn to_bytes(&self, params: &PublicParams) -> Vec<u8> {
        let mut out = params.encode_g1(&self.c1);
        out.extend(params.encode_gt(&self.c2));
        debug_assert_eq!(out.len(), 2 * params.element_size());
        out
    }

    pub fn from_bytes(params: &PublicParams, bytes: &[u8]) -> Result<Self, CryptoError> {
        let n = params.element_size();
        if bytes.len() != 2 * n {
            return Err(CryptoError::Decode(format!("expected {} bytes, got {}", 2 * n, bytes.len())));
        }
        Ok(PreCiphertext { c1: params.decode_g1(&bytes[..n])?, c2: params.decode_gt(&bytes[n..])? })
    }
}

impl ReCiphertext {
    pub fn to_bytes(&self, params: &PublicParams) -> Vec<u8> {
        let mut out = params.encode_g1(&self.c1p);
        out.extend(params.encode_g1(&self.c1pp));
        out.extend(params.encode_gt(&self.c2));
        debug_assert_eq!(out.len(), 3 * params.element_size());
        out
    }

    pub fn from_bytes(params: &PublicParams, bytes: &[u8]) -> Result<Self, CryptoError> {
        let n = params.element_size();
        if bytes.len() != 3 * n {
            return Err(CryptoError::Decode(format!("expected {} bytes, got {}", 3 * n, bytes.len())));
        }
        Ok(ReCiphertext {
            c1p: params.decode_g1(&bytes[..n])?,
            c1pp: params.decode_g1(&bytes[n..2 * n])?,
            c2: params.decode_gt(&bytes[2 * n..])?,
        })
    }
}

/// A `GT` element together with the AEAD key derived from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedKey {
    pub gt_element: Gt,
    pub sym_key: SymKey,
}

impl SharedKey {
    pub fn from_gt(params: &PublicParams, gt_element: Gt) -> Self {
        let sym_key = kdf_symmetric_key(params, &gt_element);
        SharedKey { gt_element, sym_key }
    }

    pub fn random<R: RngCore + CryptoRng>(params: &PublicParams, rng: &mut R) -> Self {
        Self::from_gt(params, params.random_gt(rng))
    }
}

pub fn kdf_symmetric_key(params: &PublicParams, k: &Gt) -> SymKey {
    SymKey(hash_parts(&[b"fairshare/kdf/v1", &params.encode_gt(k)]).0)
}

pub fn pre_keygen<R: RngCore + CryptoRng>(params: &PublicParams, rng: &mut R) -> PreKeyPair {
    let sk = params.group().random_nonzero_scalar(rng);
    PreKeyPair::from_secret(params, sk).expect("sampled scalar is non-zero")
}

pub fn pre_rekeygen(
    params: &PublicParams,
    sk_from: &Scalar,
    pk_to: &G1,
    from_id: PartyId,
    to_id: PartyId,
) -> Result<ReEncKey, CryptoError> {
    let inv = params.group().scalar_inv(sk_from).ok_or(CryptoError::InvalidKey)?;
    Ok(ReEncKey { rk: params.group().mul(pk_to, &inv), from_id, to_id })
}

pub fn pre_encrypt<R: RngCore + CryptoRng>(params: &PublicParams, pk: &G1, k: &Gt, rng: &mut R) -> PreCiphertext {
    let r = params.group().random_nonzero_scalar(rng);
    pre_encrypt_with(params, pk, k, &r)
}

/// Encryption with a caller-chosen exponent `r`.
pub fn pre_encrypt_with(params: &PublicParams, pk: &G1, k: &Gt, r: &Scalar) -> PreCiphertext {
    let group = params.group();
    let c1 = group.mul(pk, r);
    let c2 = group.gt_mul(&group.gt_pow(params.gt_generator(), r), k);
    PreCiphertext { c1, c2 }
}

pub fn pre_reencrypt<R: RngCore + CryptoRng>(
    params: &PublicParams,
    rk: &ReEncKey,
    c: &PreCiphertext,
    rng: &mut R,
) -> ReCiphertext {
    let t = params.group().random_nonzero_scalar(rng);
    pre_reencrypt_with(params, rk, c, &t).expect("sampled blinding factor is invertible")
}

/// Re-encryption with a caller-chosen blinding factor `t`.
pub fn pre_reencrypt_with(
    params: &PublicParams,
    rk: &ReEncKey,
    c: &PreCiphertext,
    t: &Scalar,
) -> Result<ReCiphertext, CryptoError> {
    let group = params.group();
    let t_inv = group.scalar_inv(t).ok_or(CryptoError::InvalidKey)?;
    Ok(ReCiphertext { c1p: group.mul(&rk.rk, &t_inv), c1pp: group.mul(&c.c1, t), c2: c.c2.clone() })
}

pub fn pre_decrypt(params: &PublicParams, sk_to: &Scalar, c: &ReCiphertext) -> Result<Gt, CryptoError> {
    let group = params.group();
    let inv = group.scalar_inv(sk_to).ok_or(CryptoError::InvalidKey)?;
    if !group.g1_is_member(&c.c1p) || !group.g1_is_member(&c.c1pp) || !group.gt_is_member(&c.c2) {
        return Err(CryptoError::Decode("ciphertext component outside its group".into()));
    }
    let blind = group.gt_pow(&group.pairing(&c.c1p, &c.c1pp), &inv);
    Ok(group.gt_mul(&c.c2, &group.gt_inv(&blind)))
}

/// Decrypts serialized `c''`; any malformed component is reported, never a wrong key.
pub fn pre_decrypt_bytes(params: &PublicParams, sk_to: &Scalar, bytes: &[u8]) -> Result<Gt, CryptoError> {
    let c = ReCiphertext::from_bytes(params, bytes)?;
    pre_decrypt(params, sk_to, &c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;

    fn params() -> &'static PublicParams {
        static P: OnceLock<PublicParams> = OnceLock::new();
        P.get_or_init(|| PublicParams::setup(128, 7).unwrap())
    }

    #[test]
    fn sk_one_gives_generator() {
        let p = params();
        let kp = PreKeyPair::from_secret(p, Scalar::from_u64(1)).unwrap();
        assert_eq!(kp.pk(), p.generator());
        assert_eq!(PreKeyPair::from_secret(p, Scalar::from_u64(0)), Err(CryptoError::InvalidKey));
    }

    #[test]
    fn rekey_with_unit_secret_is_target_pk() {
        let p = params();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let c = pre_keygen(p, &mut rng);
        let rk = pre_rekeygen(p, &Scalar::from_u64(1), c.pk(), PartyId(1), PartyId(2)).unwrap();
        assert_eq!(&rk.rk, c.pk());
        assert_eq!(pre_rekeygen(p, &Scalar::from_u64(0), c.pk(), PartyId(1), PartyId(2)), Err(CryptoError::InvalidKey));
    }

    #[test]
    fn identity_message_and_forced_r() {
        let p = params();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let f = pre_keygen(p, &mut rng);
        let r = Scalar::from_u64(12345);
        let c = pre_encrypt_with(p, f.pk(), &Gt::one(), &r);
        assert_eq!(c.c2, p.group().gt_pow(p.gt_generator(), &r));
    }

    #[test]
    fn unit_blinding() {
        let p = params();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let f = pre_keygen(p, &mut rng);
        let c = pre_keygen(p, &mut rng);
        let rk = pre_rekeygen(p, f.sk(), c.pk(), PartyId(1), PartyId(2)).unwrap();
        let ct = pre_encrypt(p, f.pk(), &p.random_gt(&mut rng), &mut rng);
        let re = pre_reencrypt_with(p, &rk, &ct, &Scalar::from_u64(1)).unwrap();
        assert_eq!(re.c1p, rk.rk);
        assert_eq!(re.c1pp, ct.c1);
        assert!(pre_reencrypt_with(p, &rk, &ct, &Scalar::from_u64(0)).is_err());
    }

    #[test]
    fn round_trip_and_sizes() {
        let p = params();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let f = pre_keygen(p, &mut rng);
        let c = pre_keygen(p, &mut rng);
        let rk = pre_rekeygen(p, f.sk(), c.pk(), PartyId(1), PartyId(2)).unwrap();
        let k = SharedKey::random(p, &mut rng);
        let ct = pre_encrypt(p, f.pk(), &k.gt_element, &mut rng);
        let ct_bytes = ct.to_bytes(p);
        assert_eq!(ct_bytes.len(), 256);
        assert_eq!(PreCiphertext::from_bytes(p, &ct_bytes).unwrap(), ct);
        let re = pre_reencrypt(p, &rk, &ct, &mut rng);
        let re_bytes = re.to_bytes(p);
        assert_eq!(re_bytes.len(), 384);
        let out = pre_decrypt_bytes(p, c.sk(), &re_bytes).unwrap();
        assert_eq!(out, k.gt_element);
        assert_eq!(kdf_symmetric_key(p, &out), k.sym_key);
        let wrong = pre_decrypt(p, f.sk(), &re).unwrap();
        assert_ne!(wrong, k.gt_element);
    }

    #[test]
    fn malformed_recipher_is_error() {
        let p = params();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let c = pre_keygen(p, &mut rng);
        assert!(matches!(pre_decrypt_bytes(p, c.sk(), &[1u8; 384]), Err(CryptoError::Decode(_))));
        assert!(matches!(pre_decrypt_bytes(p, c.sk(), &[0u8; 100]), Err(CryptoError::Decode(_))));
    }

    #[test]
    fn kdf_is_deterministic() {
        let p = params();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let a = p.random_gt(&mut rng);
        let b = p.random_gt(&mut rng);
        assert_eq!(kdf_symmetric_key(p, &a), kdf_symmetric_key(p, &a));
        assert_ne!(kdf_symmetric_key(p, &a), kdf_symmetric_key(p, &b));
        assert_eq!(kdf_symmetric_key(p, &a).as_bytes().len(), 32);
    }
}
