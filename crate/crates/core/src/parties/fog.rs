//! Device actors and the fog node.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

use super::device::{decode_reading, device_emit, encode_reading, fog_ingest, DeviceIdentity, Feedback, IngestError};
use super::message::{decode_forward, decode_store_ack, MsgKind, Wire};
use super::summary::{summarize, SummaryFile};
use super::{Behavior, Collusion, SimError, World};
use crate::codec::Writer;
use crate::contracts::{controller, tags, EscrowStatus, RequestId};
use crate::crypto::{
    hash, pre_encrypt, pre_reencrypt, pre_rekeygen, sym_encrypt, AsymKeyPair, AsymPublicKey, Digest, Nonce,
    PreCiphertext, PreKeyPair, SharedKey, SigningPair, SYM_TAG_LEN,
};
use crate::exchange::{file_digest, ChunkedFile};
use crate::ledger::{Coins, Time, TxRequest};
use crate::{DId, PartyId};

pub struct DeviceActor {
    pub id: PartyId,
    pub identity: DeviceIdentity,
    fog: PartyId,
    fog_pk: AsymPublicKey,
    fog_vk: [u8; 32],
    readings: Vec<f64>,
    next: usize,
    sent: BTreeMap<Digest, u32>,
    pub acked: usize,
    rng: ChaCha20Rng,
}

impl DeviceActor {
    pub fn new(id: PartyId, identity: DeviceIdentity, fog: &Fog, readings: Vec<f64>, rng: ChaCha20Rng) -> Self {
        DeviceActor {
            id,
            identity,
            fog: fog.id,
            fog_pk: *fog.asym.public(),
            fog_vk: fog.signer.public(),
            readings,
            next: 0,
            sent: BTreeMap::new(),
            acked: 0,
            rng,
        }
    }

    pub(super) fn step(&mut self, w: &mut World, inbox: Vec<Wire>) -> Result<(), SimError> {
        for msg in inbox {
            let ok = Feedback::from_bytes(&msg.bytes).is_some_and(|fb| {
                let hit = self.sent.iter().find(|(h, _)| fb.check(&self.fog_vk, h)).map(|(h, _)| *h);
                hit.map(|h| self.sent.remove(&h)).is_some()
            });
            if ok {
                self.acked += 1;
            } else {
                w.note(self.id, "discarded feedback that matches no reading");
            }
        }
        if let Some(v) = self.readings.get(self.next) {
            let m = encode_reading(self.next as u32, *v);
            let env = device_emit(&self.identity, &self.fog_pk, &m, &mut self.rng);
            self.sent.insert(hash(&m), self.next as u32);
            let payload = env.payload_len();
            w.send(self.id, self.fog, MsgKind::Envelope, env.to_bytes(), payload);
            self.next += 1;
        }
        Ok(())
    }

    pub(super) fn done(&self) -> bool {
        self.next == self.readings.len()
    }
}

#[derive(Clone, Debug)]
pub struct FogConfig {
    pub cloud: PartyId,
    pub chunk_size: usize,
    /// Target `|f'|`.
    pub file_len: usize,
    pub window: usize,
    pub expected_readings: usize,
    pub policy: BTreeSet<PartyId>,
    pub p4: Coins,
    pub ts: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StorageState {
    Collecting,
    Sent,
    Stored,
    Aborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyState {
    AwaitP3 { since: Time },
    Sent,
    Settled,
    Seized,
    Abandoned,
}

struct KeySession {
    client: PartyId,
    wire: Vec<u8>,
    state: KeyState,
}

pub struct StoredFile {
    pub f: Vec<u8>,
    pub f_prime: Vec<u8>,
    pub nonce: Nonce,
    pub c_prime: PreCiphertext,
    pub h1: Digest,
    pub h2: Digest,
}

pub struct Fog {
    pub id: PartyId,
    pub behavior: Behavior,
    pub collusion: Option<Collusion>,
    pub did: DId,
    device_vk: [u8; 32],
    pub(super) asym: AsymKeyPair,
    pub(super) signer: SigningPair,
    pre: PreKeyPair,
    k_f: SharedKey,
    cfg: FogConfig,
    rng: ChaCha20Rng,
    pub readings: Vec<(u32, f64)>,
    pub rejected: Vec<IngestError>,
    processed: usize,
    pub storage: StorageState,
    pub stored: Option<StoredFile>,
    sessions: BTreeMap<RequestId, KeySession>,
}

impl Fog {
    pub fn new(
        id: PartyId,
        behavior: Behavior,
        collusion: Option<Collusion>,
        device: &DeviceIdentity,
        cfg: FogConfig,
        w: &World,
        mut rng: ChaCha20Rng,
    ) -> Self {
        let asym = AsymKeyPair::generate(&mut rng);
        let signer = SigningPair::generate(&mut rng);
        let pre = crate::crypto::pre_keygen(&w.params, &mut rng);
        let k_f = SharedKey::random(&w.params, &mut rng);
        Fog {
            id,
            behavior,
            collusion,
            did: device.did,
            device_vk: device.verifying_key(),
            asym,
            signer,
            pre,
            k_f,
            cfg,
            rng,
            readings: Vec::new(),
            rejected: Vec::new(),
            processed: 0,
            storage: StorageState::Collecting,
            stored: None,
            sessions: BTreeMap::new(),
        }
    }

    /// Registration payload: PRE public key followed by the KEM public key.
    pub fn registration_key(&self, w: &World) -> Vec<u8> {
        [w.params.encode_g1(self.pre.pk()), self.asym.public().0.to_vec()].concat()
    }

    pub fn key_states(&self) -> impl Iterator<Item = (&RequestId, PartyId, KeyState)> {
        self.sessions.iter().map(|(id, s)| (id, s.client, s.state))
    }

    fn ingest(&mut self, w: &mut World, msg: &Wire) {
        self.processed += 1;
        let env = super::device::Envelope::from_bytes(&msg.bytes);
        let vk = self.device_vk;
        let did = self.did;
        let res =
            env.ok_or(IngestError::Malformed).and_then(|e| fog_ingest(&self.asym, |d| (*d == did).then_some(vk), &e));
        match res.and_then(|ing| decode_reading(&ing.m).map(|r| (r, ing.h)).ok_or(IngestError::Malformed)) {
            Ok(((seq, v), h)) => {
                self.readings.push((seq, v));
                let fb = Feedback::issue(&self.signer, &h);
                w.send(self.id, msg.from, MsgKind::Feedback, fb.to_bytes(), Feedback::LEN);
            }
            Err(e) => {
                w.note(self.id, format!("envelope aborted: {e}"));
                self.rejected.push(e);
            }
        }
    }

    fn store(&mut self, w: &mut World) -> Result<(), SimError> {
        if self.readings.is_empty() {
            w.note(self.id, "no accepted readings; nothing to store");
            self.storage = StorageState::Aborted;
            return Ok(());
        }
        self.readings.sort_by_key(|r| r.0);
        let values: Vec<f64> = self.readings.iter().map(|r| r.1).collect();
        let file = SummaryFile { did: self.did, records: summarize(&values, self.cfg.window) };
        let f = file
            .encode(self.cfg.file_len.saturating_sub(SYM_TAG_LEN))
            .ok_or_else(|| SimError::Protocol(format!("{} summaries do not fit the file size", file.records.len())))?;
        let mut nb = [0u8; 12];
        self.rng.fill_bytes(&mut nb);
        let nonce = Nonce(nb);
        let f_prime = sym_encrypt(&self.k_f.sym_key, &nonce, &f);
        let c_prime = pre_encrypt(&w.params, self.pre.pk(), &self.k_f.gt_element, &mut self.rng);
        let h1 = file_digest(&f_prime, self.cfg.chunk_size).map_err(|e| SimError::Protocol(e.to_string()))?;
        let h2 = hash(&c_prime.to_bytes(&w.params));

        let s = w.controller_addr()?;
        let did_arg = Writer::new().did(&self.did).finish();
        for tx in [
            TxRequest::call(self.id, s, "store_meta1").data(controller::encode_meta1(&self.did, &h1, &h2)),
            TxRequest::call(self.id, s, "store_nonce").args(did_arg.clone()).data(nonce.0.to_vec()),
            TxRequest::call(self.id, s, "store_access_policy")
                .args(did_arg)
                .data(controller::encode_policy(&self.cfg.policy)),
        ] {
            let r = w.submit(tx)?;
            if let Some(e) = r.error {
                return Err(SimError::Protocol(format!("storing metadata failed: {e}")));
            }
        }

        let mut sent = f_prime.clone();
        if self.collusion == Some(Collusion::FogCloud) {
            // the cloud gets an altered file and the digests it needs to pass it off
            let phi = ChunkedFile::split(&f_prime, self.cfg.chunk_size).expect("positive chunk size").digests();
            let leak = phi.iter().fold(Writer::new(), |w, d| w.digest(d)).finish();
            let n = leak.len();
            w.send(self.id, self.cfg.cloud, MsgKind::Leak, leak, n);
            let at = self.rng.gen_range(0..sent.len());
            sent[at] ^= 0x01;
        }
        let n = sent.len();
        w.send(self.id, self.cfg.cloud, MsgKind::StoreFile, sent, n);
        self.stored = Some(StoredFile { f, f_prime, nonce, c_prime, h1, h2 });
        self.storage = StorageState::Sent;
        Ok(())
    }

    fn serve_key(&mut self, w: &mut World, id: RequestId, client: PartyId) -> Result<(), SimError> {
        let s = w.controller_addr()?;
        let pk_bytes = w
            .ledger
            .read(&s, &controller::key("pk", &client.to_bytes()))
            .map_err(|_| SimError::Protocol(format!("{client} has no registered key")))?;
        let pk_c = w.params.decode_g1(&pk_bytes)?;
        let stored = self.stored.as_ref().ok_or_else(|| SimError::Protocol("key request before storage".into()))?;
        let rk = pre_rekeygen(&w.params, self.pre.sk(), &pk_c, self.id, client)?;
        let c2 = pre_reencrypt(&w.params, &rk, &stored.c_prime, &mut self.rng);
        let true_bytes = c2.to_bytes(&w.params);
        let h3 = hash(&true_bytes);
        let r = w.submit(
            TxRequest::call(self.id, s, "store_meta2")
                .args(Writer::new().digest(&id.0).finish())
                .data(controller::encode_meta2(&self.did, &h3)),
        )?;
        if let Some(e) = r.error {
            w.note(self.id, format!("meta2 rejected: {e}"));
            self.sessions.insert(id, KeySession { client, wire: vec![], state: KeyState::Abandoned });
            return Ok(());
        }
        let wire = if self.behavior == Behavior::TamperReenc {
            let mut forged = c2.clone();
            let noise = w.params.random_gt(&mut self.rng);
            forged.c2 = w.params.group().gt_mul(&forged.c2, &noise);
            forged.to_bytes(&w.params)
        } else {
            true_bytes.clone()
        };
        if self.collusion == Some(Collusion::FogClient) {
            let n = true_bytes.len();
            w.send(self.id, client, MsgKind::Leak, true_bytes, n);
        }
        let since = w.now();
        self.sessions.insert(id, KeySession { client, wire, state: KeyState::AwaitP3 { since } });
        Ok(())
    }

    pub(super) fn step(&mut self, w: &mut World, inbox: Vec<Wire>) -> Result<(), SimError> {
        for msg in inbox {
            match msg.kind {
                MsgKind::Envelope => self.ingest(w, &msg),
                MsgKind::StoreAck => match decode_store_ack(&msg.bytes) {
                    Ok((did, ok)) if did == self.did && self.storage == StorageState::Sent => {
                        self.storage = if ok { StorageState::Stored } else { StorageState::Aborted };
                        if !ok {
                            w.note(self.id, "cloud rejected the stored file; storage aborted");
                        }
                    }
                    _ => w.note(self.id, "ignored stray store acknowledgement"),
                },
                MsgKind::Forward => match decode_forward(&msg.bytes) {
                    Ok((id, req)) if req.did == self.did && !self.sessions.contains_key(&id) => {
                        self.serve_key(w, id, req.client)?;
                    }
                    _ => w.note(self.id, "ignored malformed or repeated forward"),
                },
                other => w.note(self.id, format!("ignored unexpected {other:?}")),
            }
        }
        if self.storage == StorageState::Collecting && self.processed >= self.cfg.expected_readings {
            self.store(w)?;
        }

        let s = w.controller_addr()?;
        let ids: Vec<RequestId> = self.sessions.keys().copied().collect();
        for id in ids {
            let esc = w.controller()?.escrow(&id).cloned();
            let sess = self.sessions.get_mut(&id).expect("listed");
            match sess.state {
                KeyState::AwaitP3 { since } => match esc {
                    Some(e) if e.status == EscrowStatus::Open && e.fog_lock == 0 => {
                        let r = w.submit(
                            TxRequest::call(self.id, s, "lock_p4")
                                .args(Writer::new().digest(&id.0).finish())
                                .data(vec![tags::LOCK_P4])
                                .value(self.cfg.p4),
                        )?;
                        if let Some(e) = r.error {
                            w.note(self.id, format!("lock_p4 failed: {e}"));
                            sess.state = KeyState::Abandoned;
                        } else {
                            let n = sess.wire.len();
                            w.send(self.id, sess.client, MsgKind::ReKey, sess.wire.clone(), n);
                            sess.state = KeyState::Sent;
                        }
                    }
                    Some(_) => sess.state = KeyState::Abandoned,
                    None if w.now() > since + self.cfg.ts => {
                        w.note(self.id, "client never locked P3; key session dropped");
                        sess.state = KeyState::Abandoned;
                    }
                    None => {}
                },
                KeyState::Sent => match esc.map(|e| e.status) {
                    Some(EscrowStatus::Settled) => sess.state = KeyState::Settled,
                    Some(EscrowStatus::Seized) => sess.state = KeyState::Seized,
                    Some(EscrowStatus::Reclaimed) => sess.state = KeyState::Abandoned,
                    _ => {}
                },
                _ => {}
            }
        }
        Ok(())
    }

    pub(super) fn done(&self, _w: &World) -> bool {
        let storage_done = matches!(self.storage, StorageState::Stored | StorageState::Aborted);
        storage_done
            && self
                .sessions
                .values()
                .all(|s| matches!(s.state, KeyState::Settled | KeyState::Seized | KeyState::Abandoned))
    }

    pub fn outcomes(&self) -> Vec<super::Outcome> {
        use super::Outcome;
        if self.storage == StorageState::Aborted {
            return vec![Outcome::StorageAborted];
        }
        if self.sessions.is_empty() {
            return vec![Outcome::Stored];
        }
        self.sessions
            .values()
            .map(|s| match s.state {
                KeyState::Settled => Outcome::Paid,
                KeyState::Seized => Outcome::Penalized,
                _ => Outcome::Aborted,
            })
            .collect()
    }
}
