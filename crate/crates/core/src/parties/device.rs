//! Sensor devices, their envelopes and the fog-side ingest check.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{
    asym_decrypt, asym_encrypt, hash, hash_parts, sign, sym_decrypt, sym_encrypt, verify, AsymKeyPair, AsymPublicKey,
    Digest, Nonce, Signature, SigningPair, SymKey, ASYM_CIPHERTEXT_LEN, SYM_TAG_LEN,
};
use crate::DId;

/// Per-envelope bytes beyond the `m || h || sigma || DId` fields.
pub const ENVELOPE_OVERHEAD: usize = SYM_TAG_LEN + ASYM_CIPHERTEXT_LEN;
const FIELDS_LEN: usize = Digest::LEN + 64 + DId::LEN;

pub struct DeviceIdentity {
    pub did: DId,
    k_d: SymKey,
    signer: SigningPair,
}

impl DeviceIdentity {
    pub fn generate<R: RngCore + CryptoRng>(device_id: &[u8], rng: &mut R) -> Self {
        let mut mac = [0u8; 6];
        rng.fill_bytes(&mut mac);
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        DeviceIdentity { did: DId::derive(device_id, &mac), k_d: SymKey(k), signer: SigningPair::generate(rng) }
    }

    pub fn verifying_key(&self) -> [u8; 32] {
        self.signer.public()
    }
}

/// `<c_m, c_k>` as sent from a device to its fog node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub c_m: Vec<u8>,
    pub c_k: Vec<u8>,
}

impl Envelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.c_m[..], &self.c_k[..]].concat()
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let split = bytes.len().checked_sub(ASYM_CIPHERTEXT_LEN)?;
        Some(Envelope { c_m: bytes[..split].to_vec(), c_k: bytes[split..].to_vec() })
    }

    /// Length of the `m || h || sigma || DId` fields carried in `c_m`.
    pub fn payload_len(&self) -> usize {
        self.c_m.len().saturating_sub(SYM_TAG_LEN)
    }
}

/// The AES nonce is bound to `c_k` rather than transmitted.
fn envelope_nonce(c_k: &[u8]) -> Nonce {
    let d = hash_parts(&[b"fairshare/envelope", c_k]);
    Nonce::from_slice(&d.0[..12]).expect("12-byte slice")
}

pub fn device_emit<R: RngCore + CryptoRng>(
    dev: &DeviceIdentity,
    fog_pk: &AsymPublicKey,
    m: &[u8],
    rng: &mut R,
) -> Envelope {
    let h = hash(m);
    let sigma = sign(&dev.signer, &h);
    let c_k = asym_encrypt(fog_pk, &dev.k_d.0, rng).expect("32-byte key fits the KEM");
    let packet = [m, h.as_bytes(), &sigma.0, &dev.did.0].concat();
    let c_m = sym_encrypt(&dev.k_d, &envelope_nonce(&c_k), &packet);
    Envelope { c_m, c_k }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("device key could not be unwrapped")]
    Key,
    #[error("packet failed authenticated decryption")]
    Integrity,
    #[error("packet too short")]
    Malformed,
    #[error("packet names unknown device {0}")]
    UnknownDevice(DId),
    #[error("digest does not match the reading")]
    DigestMismatch,
    #[error("signature rejected")]
    BadSignature,
}

/// A verified reading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ingested {
    pub did: DId,
    pub m: Vec<u8>,
    pub h: Digest,
}

/// Unwraps, decrypts and checks digest and signature; `device_key` maps a
/// device id to its verifying key.
pub fn fog_ingest(
    fog: &AsymKeyPair,
    device_key: impl Fn(&DId) -> Option<[u8; 32]>,
    env: &Envelope,
) -> Result<Ingested, IngestError> {
    let k = asym_decrypt(fog, &env.c_k).map_err(|_| IngestError::Key)?;
    let k = SymKey(k.try_into().map_err(|_| IngestError::Key)?);
    let packet = sym_decrypt(&k, &envelope_nonce(&env.c_k), &env.c_m).map_err(|_| IngestError::Integrity)?;
    let m_len = packet.len().checked_sub(FIELDS_LEN).ok_or(IngestError::Malformed)?;
    let (m, rest) = packet.split_at(m_len);
    let h = Digest::from_slice(&rest[..32]).expect("32 bytes");
    let sigma = &rest[32..96];
    let did = DId::from_slice(&rest[96..]).expect("4 bytes");
    let pk = device_key(&did).ok_or(IngestError::UnknownDevice(did))?;
    if hash(m) != h {
        return Err(IngestError::DigestMismatch);
    }
    if !verify(&pk, &h, sigma) {
        return Err(IngestError::BadSignature);
    }
    Ok(Ingested { did, m: m.to_vec(), h })
}

/// Signed acknowledgement returned to the device for each accepted reading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Feedback {
    pub digest: Digest,
    pub sig: Signature,
}

impl Feedback {
    pub const LEN: usize = Digest::LEN + 64;

    pub fn digest_for(h: &Digest) -> Digest {
        hash_parts(&[b"fairshare/ack", h.as_bytes()])
    }

    pub fn issue(fog: &SigningPair, h: &Digest) -> Self {
        let digest = Self::digest_for(h);
        Feedback { digest, sig: sign(fog, &digest) }
    }

    pub fn check(&self, fog_pk: &[u8; 32], h: &Digest) -> bool {
        self.digest == Self::digest_for(h) && verify(fog_pk, &self.digest, &self.sig.0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.digest.0[..], &self.sig.0[..]].concat()
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        if b.len() != Self::LEN {
            return None;
        }
        Some(Feedback { digest: Digest::from_slice(&b[..32])?, sig: Signature(b[32..].try_into().ok()?) })
    }
}

/// A reading as carried in `m_i`: sequence number and value.
pub fn encode_reading(seq: u32, value: f64) -> Vec<u8> {
    [&seq.to_be_bytes()[..], &value.to_bits().to_be_bytes()[..]].concat()
}

pub fn decode_reading(m: &[u8]) -> Option<(u32, f64)> {
    if m.len() != 12 {
        return None;
    }
    let seq = u32::from_be_bytes(m[..4].try_into().ok()?);
    Some((seq, f64::from_bits(u64::from_be_bytes(m[4..].try_into().ok()?))))
}
