//! Cryptographic primitives: pairing group, proxy re-encryption, AEAD,
//! key encapsulation, signatures and hashing.

pub mod asym;
pub mod hash;
pub mod pairing;
pub mod params;
pub mod pre;
pub mod sign;
pub mod sym;

pub use asym::{asym_decrypt, asym_encrypt, AsymKeyPair, AsymPublicKey, ASYM_CIPHERTEXT_LEN};
pub use hash::{hash, hash_parts, Digest};
pub use pairing::{Gt, PairingGroup, Scalar, G1};
pub use params::{PublicParams, DEFAULT_ELEMENT_SIZE};
pub use pre::{
    kdf_symmetric_key, pre_decrypt, pre_decrypt_bytes, pre_encrypt, pre_encrypt_with, pre_keygen, pre_reencrypt,
    pre_reencrypt_with, pre_rekeygen, PreCiphertext, PreKeyPair, ReCiphertext, ReEncKey, SharedKey,
};
pub use sign::{sign, verify, Signature, SigningPair};
pub use sym::{sym_decrypt, sym_encrypt, Nonce, SymKey, SYM_TAG_LEN};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid key")]
    InvalidKey,
    #[error("invalid encoding: {0}")]
    Decode(String),
    #[error("integrity check failed")]
    Integrity,
    #[error("message of {len} bytes exceeds capacity {max}")]
    MessageTooLong { len: usize, max: usize },
}
