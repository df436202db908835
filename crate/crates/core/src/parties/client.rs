//! Data consumer: requests access, buys the file through the judge and the key
//! through the controller, then decrypts.

use std::collections::BTreeMap;

use rand_chacha::ChaCha20Rng;

use super::message::{decode_denied, AccessRequest, DenyReason, MsgKind, Offer, Wire};
use super::summary::SummaryFile;
use super::{Behavior, Collusion, Outcome, SimError, World};
use crate::codec::Writer;
use crate::contracts::{controller, tags, EscrowStatus, Judge, Phase, RequestId};
use crate::crypto::{hash, kdf_symmetric_key, pre_decrypt_bytes, sym_decrypt, Digest, PreKeyPair, SymKey};
use crate::exchange::{buyer_open, buyer_verify_commitment, merkle, MisbehaviorProof, Opened};
use crate::ledger::{Coins, Time, TxRequest};
use crate::{ContractAddr, DId, PartyId};

#[derive(Clone, Debug)]
pub struct ClientConfig {
    pub cloud: PartyId,
    pub eps1: Coins,
    pub ts: Time,
    pub token: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileLeg {
    Requested,
    /// Nothing usable came back within `ts`.
    Unanswered,
    Denied(DenyReason),
    /// The offer did not match the on-chain file digest.
    Rejected,
    Accepted,
    Decided,
    Complained,
    Silent,
    Closed(Phase),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyLeg {
    Idle,
    Locked { at: Time },
    Funded { seen_at: Time },
    Verified,
    Seized,
    Reclaimed,
}

#[derive(Clone, Debug)]
pub struct Purchase {
    pub did: DId,
    pub fog: PartyId,
    h1: Digest,
    pub request: Option<RequestId>,
    pub judge: Option<ContractAddr>,
    requested_at: Time,
    offer: Option<Offer>,
    pub file_leg: FileLeg,
    pub key_leg: KeyLeg,
    f_prime: Option<Vec<u8>>,
    k_f: Option<SymKey>,
    leaked: Option<Vec<u8>>,
    pub file: Option<SummaryFile>,
}

impl Purchase {
    fn done(&self) -> bool {
        let file_done =
            matches!(self.file_leg, FileLeg::Denied(_) | FileLeg::Unanswered | FileLeg::Rejected | FileLeg::Closed(_));
        let key_done = matches!(self.key_leg, KeyLeg::Idle | KeyLeg::Verified | KeyLeg::Seized | KeyLeg::Reclaimed);
        file_done && key_done
    }

    pub fn outcome(&self) -> Outcome {
        if let FileLeg::Denied(r) = self.file_leg {
            return match r {
                DenyReason::NotAuthorized => Outcome::AbortedUnauthorized,
                DenyReason::Unavailable => Outcome::Aborted,
            };
        }
        if self.file.is_some() {
            Outcome::FileObtained
        } else if self.file_leg == FileLeg::Closed(Phase::SettledBuyer) || self.key_leg == KeyLeg::Seized {
            Outcome::Compensated
        } else {
            Outcome::Aborted
        }
    }
}

pub struct Client {
    pub id: PartyId,
    pub behavior: Behavior,
    pub collusion: Option<Collusion>,
    pre: PreKeyPair,
    cfg: ClientConfig,
    targets: Vec<DId>,
    started: bool,
    pub purchases: BTreeMap<DId, Purchase>,
}

impl Client {
    pub fn new(
        id: PartyId,
        behavior: Behavior,
        collusion: Option<Collusion>,
        cfg: ClientConfig,
        w: &World,
        mut rng: ChaCha20Rng,
    ) -> Self {
        let pre = crate::crypto::pre_keygen(&w.params, &mut rng);
        Client { id, behavior, collusion, pre, cfg, targets: Vec::new(), started: false, purchases: BTreeMap::new() }
    }

    pub fn registration_key(&self, w: &World) -> Vec<u8> {
        w.params.encode_g1(self.pre.pk())
    }

    /// Files to request once the retrieval phase opens.
    pub fn request(&mut self, dids: impl IntoIterator<Item = DId>) {
        self.targets.extend(dids);
    }

    fn start(&mut self, w: &mut World) -> Result<(), SimError> {
        self.started = true;
        for did in std::mem::take(&mut self.targets) {
            let Some(rec) = w.controller()?.file(&did).cloned() else {
                w.note(self.id, format!("no meta1 for {did}; request skipped"));
                continue;
            };
            if self.cfg.eps1 > 0 {
                w.submit(TxRequest::transfer(self.id, self.cfg.cloud, self.cfg.eps1))?;
            }
            let req = AccessRequest { did, client: self.id, token: self.cfg.token.clone() };
            let bytes = req.to_bytes();
            let n = bytes.len();
            w.send(self.id, self.cfg.cloud, MsgKind::Request, bytes, n);
            self.purchases.insert(
                did,
                Purchase {
                    did,
                    fog: rec.owner,
                    h1: rec.h1,
                    request: None,
                    judge: None,
                    requested_at: w.now(),
                    offer: None,
                    file_leg: FileLeg::Requested,
                    key_leg: KeyLeg::Idle,
                    f_prime: None,
                    k_f: None,
                    leaked: None,
                    file: None,
                },
            );
        }
        Ok(())
    }

    fn on_offer(&mut self, w: &mut World, from: PartyId, offer: Offer) -> Result<(), SimError> {
        let Some(p) = self.purchases.get_mut(&offer.did).filter(|p| p.file_leg == FileLeg::Requested) else {
            w.note(self.id, "ignored unsolicited offer");
            return Ok(());
        };
        let Some(j) = w.ledger.contract::<Judge>(&offer.judge).cloned() else {
            w.note(self.id, "offer names no judge");
            p.file_leg = FileLeg::Rejected;
            return Ok(());
        };
        let fits = j.buyer == self.id
            && j.seller == from
            && j.request == offer.request
            && j.phase == Phase::Created
            && buyer_verify_commitment(&offer.z, &offer.phi, offer.len, &j.commitment, &p.h1);
        p.request = Some(offer.request);
        p.judge = Some(offer.judge);
        if !fits {
            w.note(self.id, "offer does not match the on-chain file digest; not accepting");
            p.file_leg = FileLeg::Rejected;
            return Ok(());
        }
        let s = w.controller_addr()?;
        let p3 = w.controller()?.terms().map_or(0, |t| t.p3);
        let id_arg = Writer::new().digest(&offer.request.0).finish();
        let r = w.submit(TxRequest::call(self.id, s, "lock_p3").args(id_arg).data(vec![tags::LOCK_P3]).value(p3))?;
        if r.succeeded() {
            p.key_leg = KeyLeg::Locked { at: w.now() };
        }
        let r = w.submit(TxRequest::call(self.id, offer.judge, "judge_accept").data(vec![tags::ACCEPT]).value(j.p1))?;
        p.file_leg = if r.succeeded() { FileLeg::Accepted } else { FileLeg::Rejected };
        p.offer = Some(offer);
        Ok(())
    }

    fn on_rekey(&mut self, w: &mut World, from: PartyId, bytes: &[u8]) -> Result<(), SimError> {
        let Some(p) = self
            .purchases
            .values_mut()
            .find(|p| p.fog == from && matches!(p.key_leg, KeyLeg::Locked { .. } | KeyLeg::Funded { .. }))
        else {
            w.note(self.id, "ignored unsolicited re-encrypted key");
            return Ok(());
        };
        let id = p.request.expect("locked purchases carry a request id");
        let s = w.controller_addr()?;
        let r = w.submit(
            TxRequest::call(self.id, s, "verify_key_hash")
                .args(Writer::new().digest(&id.0).digest(&hash(bytes)).finish()),
        )?;
        if r.output == [1] {
            p.key_leg = KeyLeg::Verified;
            match pre_decrypt_bytes(&w.params, self.pre.sk(), bytes) {
                Ok(gt) => p.k_f = Some(kdf_symmetric_key(&w.params, &gt)),
                Err(e) => w.note(self.id, format!("verified key does not decrypt: {e}")),
            }
        } else if r.succeeded() {
            w.note(self.id, "re-encrypted key does not match meta2; fog deposit seized");
            p.key_leg = KeyLeg::Seized;
        }
        if p.k_f.is_none() && self.collusion == Some(Collusion::FogClient) {
            if let Some(Ok(gt)) = p.leaked.as_deref().map(|b| pre_decrypt_bytes(&w.params, self.pre.sk(), b)) {
                p.k_f = Some(kdf_symmetric_key(&w.params, &gt));
            }
        }
        Ok(())
    }

    fn forged_complaint(offer: &Offer) -> MisbehaviorProof {
        let z_leaves: Vec<Digest> = offer.z.iter().enumerate().map(|(i, c)| merkle::leaf_hash(i as u64, c)).collect();
        let phi_leaves: Vec<Digest> =
            offer.phi.iter().enumerate().map(|(i, d)| merkle::leaf_hash(i as u64, d.as_bytes())).collect();
        MisbehaviorProof {
            index: 0,
            z_i: offer.z[0].clone(),
            path_z: merkle::path(&z_leaves, 0),
            expected_digest: offer.phi[0],
            path_phi: merkle::path(&phi_leaves, 0),
        }
    }

    fn advance(&mut self, w: &mut World, did: DId) -> Result<(), SimError> {
        let now = w.now();
        let s = w.controller_addr()?;
        let p = self.purchases.get_mut(&did).expect("known purchase");
        if p.file_leg == FileLeg::Requested && now > p.requested_at + self.cfg.ts {
            w.note(self.id, format!("no answer for {did}; giving up"));
            p.file_leg = FileLeg::Unanswered;
        }

        if let Some(addr) = p.judge.filter(|_| !matches!(p.file_leg, FileLeg::Rejected | FileLeg::Closed(_))) {
            let j = w
                .ledger
                .contract::<Judge>(&addr)
                .cloned()
                .ok_or_else(|| SimError::Protocol("judge vanished".into()))?;
            if j.phase.is_terminal() {
                p.file_leg = FileLeg::Closed(j.phase);
            } else if p.file_leg == FileLeg::Accepted {
                match j.phase {
                    Phase::KeyRevealed => {
                        let offer = p.offer.as_ref().expect("accepted offers are kept");
                        let k = j.revealed_key().expect("revealed");
                        let cs = j.commitment.chunk_size as usize;
                        match buyer_open(&offer.z, &offer.phi, offer.len, cs, &k, &p.h1) {
                            Opened::File(f_prime) => {
                                p.f_prime = Some(f_prime);
                                match self.behavior {
                                    Behavior::SilentAfterKey => p.file_leg = FileLeg::Silent,
                                    Behavior::FalseComplaint => {
                                        let proof = Self::forged_complaint(offer);
                                        let r = w.submit(
                                            TxRequest::call(self.id, addr, "judge_complain").data(proof.to_bytes()),
                                        )?;
                                        w.note(self.id, format!("false complaint: {:?}", r.error));
                                        p.file_leg = FileLeg::Silent;
                                    }
                                    _ => {
                                        w.submit(
                                            TxRequest::call(self.id, addr, "judge_decide").data(vec![tags::VALID]),
                                        )?;
                                        p.file_leg = FileLeg::Decided;
                                    }
                                }
                            }
                            Opened::Misbehavior(proof) => {
                                let r =
                                    w.submit(TxRequest::call(self.id, addr, "judge_complain").data(proof.to_bytes()))?;
                                w.note(
                                    self.id,
                                    format!(
                                        "complaint on chunk {}: {}",
                                        proof.index,
                                        if r.succeeded() { "upheld" } else { "rejected" }
                                    ),
                                );
                                p.file_leg = FileLeg::Complained;
                            }
                            Opened::Inconsistent => {
                                w.note(self.id, "file matches no promise yet fails h1; no provable fault");
                                p.file_leg = FileLeg::Silent;
                            }
                        }
                    }
                    Phase::Accepted if j.accepted_at.is_some_and(|t| now > t + j.ts) => {
                        w.submit(TxRequest::call(self.id, addr, "judge_refund"))?;
                    }
                    _ => {}
                }
            }
        }

        if let Some(id) = p.request {
            let id_arg = Writer::new().digest(&id.0).finish();
            let esc = w.controller()?.escrow(&id).cloned();
            match (p.key_leg, esc) {
                (KeyLeg::Locked { at }, Some(e)) if e.status == EscrowStatus::Open => {
                    if e.fog_lock > 0 {
                        p.key_leg = KeyLeg::Funded { seen_at: now };
                    } else if now > at + self.cfg.ts {
                        let r = w.submit(TxRequest::call(self.id, s, "reclaim_p3").args(id_arg))?;
                        if r.succeeded() {
                            p.key_leg = KeyLeg::Reclaimed;
                        }
                    }
                }
                (KeyLeg::Funded { seen_at }, Some(e))
                    if e.status == EscrowStatus::Open && now > seen_at + self.cfg.ts =>
                {
                    // no key arrived: settle against an impossible digest
                    let args = Writer::new().digest(&id.0).digest(&Digest::default()).finish();
                    let r = w.submit(TxRequest::call(self.id, s, "verify_key_hash").args(args))?;
                    if r.succeeded() {
                        p.key_leg = KeyLeg::Seized;
                    }
                }
                _ => {}
            }
        }

        if p.file.is_none() {
            if let (Some(fp), Some(k)) = (&p.f_prime, &p.k_f) {
                let nonce = w
                    .ledger
                    .read(&s, &controller::key("nonce", &did.0))
                    .ok()
                    .and_then(|b| crate::crypto::Nonce::from_slice(&b));
                let plain = nonce.and_then(|n| sym_decrypt(k, &n, fp).ok());
                match plain.map(|f| SummaryFile::decode(&f)) {
                    Some(Ok(file)) => p.file = Some(file),
                    _ => {
                        w.note(self.id, format!("could not decrypt {did}"));
                        p.f_prime = None;
                    }
                }
            }
        }
        Ok(())
    }

    pub(super) fn step(&mut self, w: &mut World, inbox: Vec<Wire>) -> Result<(), SimError> {
        if !self.started {
            if self.targets.is_empty() {
                return Ok(());
            }
            self.start(w)?;
        }
        for msg in inbox {
            match msg.kind {
                MsgKind::Denied => match decode_denied(&msg.bytes) {
                    Ok((did, reason)) => {
                        if let Some(p) = self.purchases.get_mut(&did).filter(|p| p.file_leg == FileLeg::Requested) {
                            p.file_leg = FileLeg::Denied(reason);
                        }
                    }
                    Err(_) => w.note(self.id, "ignored malformed denial"),
                },
                MsgKind::Offer => match Offer::from_bytes(&msg.bytes) {
                    Ok(o) => self.on_offer(w, msg.from, o)?,
                    Err(e) => w.note(self.id, format!("undecodable offer: {e}")),
                },
                MsgKind::ReKey => self.on_rekey(w, msg.from, &msg.bytes)?,
                MsgKind::Leak => {
                    if let Some(p) = self.purchases.values_mut().find(|p| p.fog == msg.from && p.leaked.is_none()) {
                        p.leaked = Some(msg.bytes);
                    }
                }
                other => w.note(self.id, format!("ignored unexpected {other:?}")),
            }
        }
        let dids: Vec<DId> = self.purchases.keys().copied().collect();
        for did in dids {
            self.advance(w, did)?;
        }
        Ok(())
    }

    pub(super) fn done(&self) -> bool {
        self.targets.is_empty() && self.purchases.values().all(Purchase::done)
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.purchases.values().map(Purchase::outcome).collect()
    }
}
