//! Commit-reveal file exchange with Merkle proofs of misbehavior.
//!
//! The seller encrypts each chunk of `f'` under a session key `k` and commits
//! to two roots: one over the encrypted chunks `z_i`, one over the plaintext
//! chunk digests `phi_i`. After `k` is revealed the buyer either accepts the
//! file or points at one chunk whose decryption does not hash to its `phi_i`.

pub mod merkle;

use thiserror::Error;

use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{hash, hash_parts, sym_decrypt, sym_encrypt, Digest, Nonce, SymKey};
use merkle::{leaf_hash, MerklePath};

pub const DEFAULT_CHUNK_SIZE: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExchangeError {
    #[error("chunk size must be positive")]
    ZeroChunkSize,
    #[error("malformed proof: {0}")]
    MalformedProof(#[from] CodecError),
}

/// Digest of a chunk that fails authenticated decryption.
pub fn decrypt_failure_digest() -> Digest {
    hash(b"fairshare/exchange/decrypt-failure")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkedFile {
    pub chunks: Vec<Vec<u8>>,
    pub chunk_size: usize,
    /// Length of the unpadded input.
    pub len: u64,
}

impl ChunkedFile {
    pub fn split(data: &[u8], chunk_size: usize) -> Result<Self, ExchangeError> {
        if chunk_size == 0 {
            return Err(ExchangeError::ZeroChunkSize);
        }
        let mut chunks: Vec<Vec<u8>> = data.chunks(chunk_size).map(|c| c.to_vec()).collect();
        if chunks.is_empty() {
            chunks.push(Vec::new());
        }
        if let Some(last) = chunks.last_mut() {
            last.resize(chunk_size, 0);
        }
        Ok(ChunkedFile { chunks, chunk_size, len: data.len() as u64 })
    }

    pub fn count(&self) -> usize {
        self.chunks.len()
    }

    pub fn assemble(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.chunks.concat();
        out.truncate(self.len as usize);
        out
    }

    pub fn digests(&self) -> Vec<Digest> {
        self.chunks.iter().map(|c| hash(c)).collect()
    }
}

/// Number of chunks a file of `len` bytes splits into.
pub fn chunk_count(len: u64, chunk_size: usize) -> u64 {
    len.div_ceil(chunk_size as u64).max(1)
}

/// Digest of a file through its chunk digests.
///
/// This is the file hash stored on chain, so a buyer can check the promised
/// `phi` list against it before any key is revealed.
pub fn file_digest_from_phi(chunk_size: usize, len: u64, phi: &[Digest]) -> Digest {
    let mut parts: Vec<&[u8]> = Vec::with_capacity(phi.len() + 3);
    let cs = (chunk_size as u32).to_be_bytes();
    let ln = len.to_be_bytes();
    parts.push(&[0x02]);
    parts.push(&cs);
    parts.push(&ln);
    for d in phi {
        parts.push(d.as_bytes());
    }
    hash_parts(&parts)
}

pub fn file_digest(data: &[u8], chunk_size: usize) -> Result<Digest, ExchangeError> {
    let f = ChunkedFile::split(data, chunk_size)?;
    Ok(file_digest_from_phi(chunk_size, f.len, &f.digests()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExchangeCommitment {
    pub c: Digest,
    pub r_z: Digest,
    pub r_phi: Digest,
    pub count: u64,
    pub chunk_size: u32,
}

impl ExchangeCommitment {
    pub fn from_roots(r_z: Digest, r_phi: Digest, count: u64, chunk_size: u32) -> Self {
        let c = commitment_digest(&r_z, &r_phi, count, chunk_size);
        ExchangeCommitment { c, r_z, r_phi, count, chunk_size }
    }

    /// `c || r_z || r_phi` as posted on chain.
    pub fn onchain_bytes(&self) -> Vec<u8> {
        Writer::new().digest(&self.c).digest(&self.r_z).digest(&self.r_phi).finish()
    }

    pub fn is_consistent(&self) -> bool {
        self.c == commitment_digest(&self.r_z, &self.r_phi, self.count, self.chunk_size)
    }
}

pub fn commitment_digest(r_z: &Digest, r_phi: &Digest, count: u64, chunk_size: u32) -> Digest {
    hash_parts(&[r_z.as_bytes(), r_phi.as_bytes(), &count.to_be_bytes(), &chunk_size.to_be_bytes()])
}

pub fn z_root(z: &[Vec<u8>]) -> Digest {
    let leaves: Vec<Digest> = z.iter().enumerate().map(|(i, c)| leaf_hash(i as u64, c)).collect();
    merkle::root(&leaves)
}

pub fn phi_root(phi: &[Digest]) -> Digest {
    let leaves: Vec<Digest> = phi.iter().enumerate().map(|(i, d)| leaf_hash(i as u64, d.as_bytes())).collect();
    merkle::root(&leaves)
}

/// Encrypted chunks and promised digests sent by the seller.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SellerOutput {
    pub commitment: ExchangeCommitment,
    pub z: Vec<Vec<u8>>,
    pub phi: Vec<Digest>,
    pub len: u64,
}

pub fn seller_commit(data: &[u8], k: &SymKey, chunk_size: usize) -> Result<SellerOutput, ExchangeError> {
    let file = ChunkedFile::split(data, chunk_size)?;
    let z: Vec<Vec<u8>> =
        file.chunks.iter().enumerate().map(|(i, c)| sym_encrypt(k, &Nonce::from_index(i as u64), c)).collect();
    let phi = file.digests();
    let commitment = ExchangeCommitment::from_roots(z_root(&z), phi_root(&phi), z.len() as u64, chunk_size as u32);
    Ok(SellerOutput { commitment, z, phi, len: file.len })
}

/// Recomputes both roots and checks `phi` against the on-chain file digest.
pub fn buyer_verify_commitment(
    z: &[Vec<u8>],
    phi: &[Digest],
    len: u64,
    commitment: &ExchangeCommitment,
    h1: &Digest,
) -> bool {
    let chunk_size = commitment.chunk_size as usize;
    if chunk_size == 0
        || z.is_empty()
        || z.len() != phi.len()
        || z.len() as u64 != commitment.count
        || chunk_count(len, chunk_size) != commitment.count
    {
        return false;
    }
    commitment.is_consistent()
        && z_root(z) == commitment.r_z
        && phi_root(phi) == commitment.r_phi
        && file_digest_from_phi(chunk_size, len, phi) == *h1
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MisbehaviorProof {
    pub index: u64,
    pub z_i: Vec<u8>,
    pub path_z: MerklePath,
    pub expected_digest: Digest,
    pub path_phi: MerklePath,
}

impl MisbehaviorProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let w = Writer::new().u64(self.index).bytes(&self.z_i);
        let w = self.path_z.encode(w).digest(&self.expected_digest);
        self.path_phi.encode(w).finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ExchangeError> {
        let mut r = Reader::new(bytes);
        let index = r.u64()?;
        let z_i = r.bytes()?.to_vec();
        let path_z = MerklePath::decode(&mut r)?;
        let expected_digest = r.digest()?;
        let path_phi = MerklePath::decode(&mut r)?;
        r.finish()?;
        Ok(MisbehaviorProof { index, z_i, path_z, expected_digest, path_phi })
    }
}

fn chunk_digest_under(k: &SymKey, index: u64, z_i: &[u8]) -> Digest {
    match sym_decrypt(k, &Nonce::from_index(index), z_i) {
        Ok(plain) => hash(&plain),
        Err(_) => decrypt_failure_digest(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Opened {
    File(Vec<u8>),
    Misbehavior(MisbehaviorProof),
    /// Every chunk matched `phi` but the file does not hash to `h1`.
    Inconsistent,
}

/// Decrypts every chunk; returns the file or a proof for the first bad chunk.
pub fn buyer_open(z: &[Vec<u8>], phi: &[Digest], len: u64, chunk_size: usize, k: &SymKey, h1: &Digest) -> Opened {
    let z_leaves: Vec<Digest> = z.iter().enumerate().map(|(i, c)| leaf_hash(i as u64, c)).collect();
    let phi_leaves: Vec<Digest> = phi.iter().enumerate().map(|(i, d)| leaf_hash(i as u64, d.as_bytes())).collect();
    let mut out = Vec::with_capacity(z.len() * z.first().map_or(0, |c| c.len()));
    for (i, (z_i, phi_i)) in z.iter().zip(phi).enumerate() {
        let plain = sym_decrypt(k, &Nonce::from_index(i as u64), z_i).ok();
        let got = plain.as_deref().map_or_else(decrypt_failure_digest, hash);
        if got != *phi_i {
            return Opened::Misbehavior(MisbehaviorProof {
                index: i as u64,
                z_i: z_i.clone(),
                path_z: merkle::path(&z_leaves, i),
                expected_digest: *phi_i,
                path_phi: merkle::path(&phi_leaves, i),
            });
        }
        out.extend(plain.expect("digest matched a real plaintext"));
    }
    out.truncate(len as usize);
    match file_digest(&out, chunk_size) {
        Ok(d) if d == *h1 => Opened::File(out),
        _ => Opened::Inconsistent,
    }
}

/// True iff the proof shows a committed chunk decrypting to something other than promised.
pub fn judge_verify_proof(commitment: &ExchangeCommitment, k: &SymKey, proof: &MisbehaviorProof) -> bool {
    if proof.index >= commitment.count {
        return false;
    }
    let z_ok = merkle::verify(
        &commitment.r_z,
        proof.index,
        commitment.count,
        &leaf_hash(proof.index, &proof.z_i),
        &proof.path_z,
    );
    let phi_ok = merkle::verify(
        &commitment.r_phi,
        proof.index,
        commitment.count,
        &leaf_hash(proof.index, proof.expected_digest.as_bytes()),
        &proof.path_phi,
    );
    z_ok && phi_ok && chunk_digest_under(k, proof.index, &proof.z_i) != proof.expected_digest
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: SymKey = SymKey([3u8; 32]);

    fn sample(len: usize) -> Vec<u8> {
        (0..len).map(|i| (i * 31 % 251) as u8).collect()
    }

    #[test]
    fn chunk_counts() {
        assert_eq!(ChunkedFile::split(&sample(100 * 1024), 4096).unwrap().count(), 25);
        assert_eq!(ChunkedFile::split(&sample(4097), 4096).unwrap().count(), 2);
        let empty = ChunkedFile::split(&[], 4096).unwrap();
        assert_eq!(empty.count(), 1);
        assert_eq!(empty.chunks[0], vec![0u8; 4096]);
        assert!(ChunkedFile::split(&[1], 0).is_err());
    }

    #[test]
    fn split_assemble_round_trip() {
        for len in [0usize, 1, 63, 64, 65, 1000] {
            let f = ChunkedFile::split(&sample(len), 64).unwrap();
            assert_eq!(f.assemble(), sample(len));
            assert_eq!(f.count() as u64, chunk_count(len as u64, 64));
        }
    }

    #[test]
    fn single_chunk_root_is_leaf() {
        let out = seller_commit(b"tiny", &K, 64).unwrap();
        assert_eq!(out.commitment.r_z, leaf_hash(0, &out.z[0]));
        assert_eq!(out.z[0].len(), 64 + 16);
    }

    #[test]
    fn honest_flow_opens() {
        let f = sample(1000);
        let h1 = file_digest(&f, 64).unwrap();
        let out = seller_commit(&f, &K, 64).unwrap();
        assert!(buyer_verify_commitment(&out.z, &out.phi, out.len, &out.commitment, &h1));
        assert_eq!(buyer_open(&out.z, &out.phi, out.len, 64, &K, &h1), Opened::File(f));
        assert_eq!(out.commitment.onchain_bytes().len(), 96);
    }

    #[test]
    fn verify_rejects_mutations() {
        let f = sample(1000);
        let h1 = file_digest(&f, 64).unwrap();
        let out = seller_commit(&f, &K, 64).unwrap();
        let mut z = out.z.clone();
        z[3][0] ^= 1;
        assert!(!buyer_verify_commitment(&z, &out.phi, out.len, &out.commitment, &h1));
        let mut z = out.z.clone();
        z.swap(1, 2);
        assert!(!buyer_verify_commitment(&z, &out.phi, out.len, &out.commitment, &h1));
        assert!(!buyer_verify_commitment(&out.z, &out.phi, out.len + 1, &out.commitment, &h1));
        assert!(!buyer_verify_commitment(&out.z, &out.phi, out.len, &out.commitment, &hash(b"other")));
    }

    #[test]
    fn corrupted_chunk_yields_verifying_proof() {
        let f = sample(25 * 64);
        let h1 = file_digest(&f, 64).unwrap();
        let wrong = {
            let mut g = f.clone();
            g[3 * 64 + 5] ^= 0x40;
            g
        };
        // seller commits to the wrong file but promises the honest digests
        let mut out = seller_commit(&wrong, &K, 64).unwrap();
        out.phi = ChunkedFile::split(&f, 64).unwrap().digests();
        out.commitment = ExchangeCommitment::from_roots(z_root(&out.z), phi_root(&out.phi), 25, 64);
        assert!(buyer_verify_commitment(&out.z, &out.phi, out.len, &out.commitment, &h1));
        let Opened::Misbehavior(proof) = buyer_open(&out.z, &out.phi, out.len, 64, &K, &h1) else {
            panic!("expected a proof");
        };
        assert_eq!(proof.index, 3);
        assert!(judge_verify_proof(&out.commitment, &K, &proof));
        let back = MisbehaviorProof::from_bytes(&proof.to_bytes()).unwrap();
        assert_eq!(back, proof);
    }

    #[test]
    fn honest_commitment_has_no_accepting_proof() {
        let f = sample(10 * 64);
        let out = seller_commit(&f, &K, 64).unwrap();
        let zl: Vec<Digest> = out.z.iter().enumerate().map(|(i, c)| leaf_hash(i as u64, c)).collect();
        let pl: Vec<Digest> = out.phi.iter().enumerate().map(|(i, d)| leaf_hash(i as u64, d.as_bytes())).collect();
        for i in 0..out.z.len() {
            let proof = MisbehaviorProof {
                index: i as u64,
                z_i: out.z[i].clone(),
                path_z: merkle::path(&zl, i),
                expected_digest: out.phi[i],
                path_phi: merkle::path(&pl, i),
            };
            assert!(!judge_verify_proof(&out.commitment, &K, &proof));
            let mut fake = proof.clone();
            fake.expected_digest = hash(b"made up");
            assert!(!judge_verify_proof(&out.commitment, &K, &fake));
        }
    }

    #[test]
    fn undecryptable_chunk_uses_sentinel() {
        let f = sample(128);
        let out = seller_commit(&f, &K, 64).unwrap();
        let other = SymKey([4u8; 32]);
        let h1 = file_digest(&f, 64).unwrap();
        let Opened::Misbehavior(p) = buyer_open(&out.z, &out.phi, out.len, 64, &other, &h1) else {
            panic!("wrong key must fail");
        };
        assert_eq!(p.index, 0);
        assert!(judge_verify_proof(&out.commitment, &other, &p));
    }

    #[test]
    fn malformed_proof_bytes() {
        assert!(MisbehaviorProof::from_bytes(&[1, 2, 3]).is_err());
    }
}
