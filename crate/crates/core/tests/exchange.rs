use fairshare_core::crypto::{Digest, SymKey};
use fairshare_core::exchange::{
    buyer_open, buyer_verify_commitment, file_digest, judge_verify_proof, merkle, phi_root, seller_commit, z_root,
    ChunkedFile, ExchangeCommitment, MisbehaviorProof, Opened,
};
use proptest::prelude::*;

const CS: usize = 32;

fn leaves(items: &[&[u8]]) -> Vec<Digest> {
    items.iter().enumerate().map(|(i, d)| merkle::leaf_hash(i as u64, d)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn honest_exchange_opens(data in proptest::collection::vec(any::<u8>(), 1..600), key: [u8; 32]) {
        let k = SymKey(key);
        let out = seller_commit(&data, &k, CS).unwrap();
        let h1 = file_digest(&data, CS).unwrap();
        prop_assert!(buyer_verify_commitment(&out.z, &out.phi, out.len, &out.commitment, &h1));
        prop_assert_eq!(buyer_open(&out.z, &out.phi, out.len, CS, &k, &h1), Opened::File(data));
    }

    #[test]
    fn corrupted_chunk_yields_accepted_proof(
        data in proptest::collection::vec(any::<u8>(), 1..600),
        key: [u8; 32],
        pick: usize,
        bit in 0u8..8,
    ) {
        let k = SymKey(key);
        let at = pick % data.len();
        let mut bad = data.clone();
        bad[at] ^= 1 << bit;
        let mut out = seller_commit(&bad, &k, CS).unwrap();
        out.phi = ChunkedFile::split(&data, CS).unwrap().digests();
        let commitment =
            ExchangeCommitment::from_roots(z_root(&out.z), phi_root(&out.phi), out.z.len() as u64, CS as u32);
        let h1 = file_digest(&data, CS).unwrap();
        prop_assert!(buyer_verify_commitment(&out.z, &out.phi, out.len, &commitment, &h1));
        let Opened::Misbehavior(proof) = buyer_open(&out.z, &out.phi, out.len, CS, &k, &h1) else {
            return Err(TestCaseError::fail("corruption went unnoticed"));
        };
        prop_assert_eq!(proof.index, (at / CS) as u64);
        prop_assert!(judge_verify_proof(&commitment, &k, &proof));
        // the same proof does not hold against the honest commitment
        let honest = seller_commit(&data, &k, CS).unwrap();
        prop_assert!(!judge_verify_proof(&honest.commitment, &k, &proof));
    }

    #[test]
    fn merkle_paths_verify(n in 1usize..40, idx: usize) {
        let items: Vec<Vec<u8>> = (0..n).map(|i| vec![i as u8; 3]).collect();
        let refs: Vec<&[u8]> = items.iter().map(|v| v.as_slice()).collect();
        let l = leaves(&refs);
        let root = merkle::root(&l);
        let i = idx % n;
        let path = merkle::path(&l, i);
        prop_assert!(merkle::verify(&root, i as u64, n as u64, &l[i], &path));
        prop_assert!(!merkle::verify(&root, ((i + 1) % n) as u64, n as u64, &l[i], &path) || n == 1);
    }
}

#[test]
fn honest_commitment_refuses_every_proof() {
    for n in 1..=64usize {
        let data: Vec<u8> = (0..n * CS - 5).map(|i| (i * 31 % 251) as u8).collect();
        let k = SymKey([7; 32]);
        let out = seller_commit(&data, &k, CS).unwrap();
        let zl = leaves(&out.z.iter().map(|v| v.as_slice()).collect::<Vec<_>>());
        let pl: Vec<Digest> =
            out.phi.iter().enumerate().map(|(i, d)| merkle::leaf_hash(i as u64, d.as_bytes())).collect();
        for i in 0..n {
            let proof = MisbehaviorProof {
                index: i as u64,
                z_i: out.z[i].clone(),
                path_z: merkle::path(&zl, i),
                expected_digest: out.phi[i],
                path_phi: merkle::path(&pl, i),
            };
            assert!(!judge_verify_proof(&out.commitment, &k, &proof), "n={n} i={i}");
        }
    }
}

#[test]
fn proof_round_trips_and_rejects_garbage() {
    let k = SymKey([1; 32]);
    let mut out = seller_commit(&[5u8; 100], &k, CS).unwrap();
    out.z[1][0] ^= 1;
    let proof = match buyer_open(&out.z, &out.phi, out.len, CS, &k, &file_digest(&[5u8; 100], CS).unwrap()) {
        Opened::Misbehavior(p) => p,
        other => panic!("expected a proof, got {other:?}"),
    };
    assert_eq!(MisbehaviorProof::from_bytes(&proof.to_bytes()).unwrap(), proof);
    assert!(MisbehaviorProof::from_bytes(&proof.to_bytes()[..10]).is_err());
}

#[test]
fn commitment_with_wrong_count_is_refused() {
    let k = SymKey([2; 32]);
    let data = vec![9u8; 70];
    let out = seller_commit(&data, &k, CS).unwrap();
    let h1 = file_digest(&data, CS).unwrap();
    let lying =
        ExchangeCommitment::from_roots(out.commitment.r_z, out.commitment.r_phi, out.commitment.count + 1, CS as u32);
    assert!(!buyer_verify_commitment(&out.z, &out.phi, out.len, &lying, &h1));
    assert!(!buyer_verify_commitment(&out.z, &out.phi, out.len, &out.commitment, &Digest([0; 32])));
}
