//! The cloud store: verifies uploads, checks access and sells files through the judge.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

use super::message::{
    encode_denied, encode_forward, encode_store_ack, AccessRequest, DenyReason, MsgKind, Offer, Wire,
};
use super::{Behavior, Collusion, Outcome, SimError, World};
use crate::codec::{Reader, Writer};
use crate::contracts::{Judge, JudgeCreate, Phase, RequestId};
use crate::crypto::{Digest, SymKey};
use crate::exchange::{file_digest, phi_root, seller_commit, z_root, ChunkedFile, ExchangeCommitment, SellerOutput};
use crate::ledger::{Coins, Time, TxRequest};
use crate::{ContractAddr, DId, PartyId};

#[derive(Clone, Debug)]
pub struct CloudConfig {
    pub chunk_size: usize,
    pub p1: Coins,
    pub p2: Coins,
    pub ts: Time,
    pub eps1: Coins,
    pub eps2: Coins,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaleState {
    Denied,
    Failed,
    Offered { since: Time },
    Revealed,
    Withholding,
    Closed(Phase),
}

#[derive(Clone, Debug)]
pub struct Sale {
    pub client: PartyId,
    pub did: DId,
    pub request: Option<RequestId>,
    pub judge: Option<ContractAddr>,
    key: SymKey,
    pub state: SaleState,
}

pub struct Cloud {
    pub id: PartyId,
    pub behavior: Behavior,
    pub collusion: Option<Collusion>,
    cfg: CloudConfig,
    rng: ChaCha20Rng,
    pub files: BTreeMap<DId, Vec<u8>>,
    pub rejected: BTreeSet<DId>,
    leaked_phi: BTreeMap<PartyId, Vec<Digest>>,
    pub sales: Vec<Sale>,
}

impl Cloud {
    pub fn new(
        id: PartyId,
        behavior: Behavior,
        collusion: Option<Collusion>,
        cfg: CloudConfig,
        rng: ChaCha20Rng,
    ) -> Self {
        Cloud {
            id,
            behavior,
            collusion,
            cfg,
            rng,
            files: BTreeMap::new(),
            rejected: BTreeSet::new(),
            leaked_phi: BTreeMap::new(),
            sales: Vec::new(),
        }
    }

    fn receive_file(&mut self, w: &mut World, msg: Wire) -> Result<(), SimError> {
        let owned: Vec<DId> = w.controller()?.files().filter(|(_, f)| f.owner == msg.from).map(|(d, _)| *d).collect();
        let [did] = owned[..] else {
            w.note(self.id, format!("file from {} matches no single meta1 record", msg.from));
            return Ok(());
        };
        let mut claimed = msg.bytes;
        if self.behavior == Behavior::TamperFileClaim && !claimed.is_empty() {
            let at = self.rng.gen_range(0..claimed.len());
            claimed[at] ^= 0x80;
        }
        let ok = if self.collusion == Some(Collusion::FogCloud) {
            true
        } else {
            let h = file_digest(&claimed, self.cfg.chunk_size).map_err(|e| SimError::Protocol(e.to_string()))?;
            let s = w.controller_addr()?;
            w.ledger.view(&s, "verify_file_hash", &Writer::new().did(&did).digest(&h).finish())? == [1]
        };
        if ok {
            self.files.insert(did, claimed);
        } else {
            w.note(self.id, format!("file for {did} failed verification; storage aborted"));
            self.rejected.insert(did);
        }
        w.send(self.id, msg.from, MsgKind::StoreAck, encode_store_ack(&did, ok), 1);
        Ok(())
    }

    fn deny(
        &mut self,
        w: &mut World,
        req: &AccessRequest,
        reason: DenyReason,
        request: Option<RequestId>,
    ) -> Result<(), SimError> {
        if self.cfg.eps1 > 0 {
            w.submit(TxRequest::transfer(self.id, req.client, self.cfg.eps1))?;
        }
        w.send(self.id, req.client, MsgKind::Denied, encode_denied(&req.did, reason), 1);
        let mut k = [0u8; 32];
        self.rng.fill_bytes(&mut k);
        self.sales.push(Sale {
            client: req.client,
            did: req.did,
            request,
            judge: None,
            key: SymKey(k),
            state: SaleState::Denied,
        });
        Ok(())
    }

    /// Chunks and commitment for one sale, altered according to strategy.
    fn prepare(&mut self, did: &DId, fog: PartyId, key: &SymKey) -> Result<SellerOutput, SimError> {
        let file = &self.files[did];
        let cs = self.cfg.chunk_size;
        let err = |e: crate::exchange::ExchangeError| SimError::Protocol(e.to_string());
        let phi = match (self.collusion, self.behavior) {
            (Some(Collusion::FogCloud), _) => self.leaked_phi.get(&fog).cloned(),
            (_, Behavior::ForwardForgedFile) => Some(ChunkedFile::split(file, cs).map_err(err)?.digests()),
            _ => None,
        };
        let Some(phi) = phi else {
            return seller_commit(file, key, cs).map_err(err);
        };
        let mut served = file.clone();
        if self.collusion != Some(Collusion::FogCloud) {
            let at = self.rng.gen_range(0..served.len());
            served[at] ^= 0x01;
        }
        let mut out = seller_commit(&served, key, cs).map_err(err)?;
        if phi.len() != out.phi.len() {
            return Err(SimError::Protocol("leaked digests do not match the file".into()));
        }
        out.phi = phi;
        out.commitment =
            ExchangeCommitment::from_roots(z_root(&out.z), phi_root(&out.phi), out.z.len() as u64, cs as u32);
        Ok(out)
    }

    fn handle_request(&mut self, w: &mut World, req: AccessRequest) -> Result<(), SimError> {
        let Some(fog) = w.controller()?.file(&req.did).map(|f| f.owner) else {
            return self.deny(w, &req, DenyReason::Unavailable, None);
        };
        if !self.files.contains_key(&req.did) {
            return self.deny(w, &req, DenyReason::Unavailable, None);
        }
        let s = w.controller_addr()?;
        let r = w.submit(
            TxRequest::call(self.id, s, "compare_access_policy")
                .args(Writer::new().party(req.client).did(&req.did).finish()),
        )?;
        let granted = r.output == [1];
        let request = RequestId::derive(&req.did, req.client, r.seq);
        if !granted && self.collusion != Some(Collusion::CloudClient) {
            w.note(self.id, format!("access denied for {}", req.client));
            return self.deny(w, &req, DenyReason::NotAuthorized, None);
        }
        if granted {
            if self.cfg.eps2 > 0 {
                w.submit(TxRequest::transfer(self.id, fog, self.cfg.eps2))?;
            }
            let fwd = encode_forward(&request, &req);
            let n = fwd.len();
            w.send(self.id, fog, MsgKind::Forward, fwd, n);
        }

        let mut k = [0u8; 32];
        self.rng.fill_bytes(&mut k);
        let key = SymKey(k);
        let out = self.prepare(&req.did, fog, &key)?;
        let jc = JudgeCreate {
            request,
            did: req.did,
            buyer: req.client,
            p1: self.cfg.p1,
            ts: self.cfg.ts,
            commitment: out.commitment,
        };
        let r = w.submit(
            TxRequest::deploy(self.id, Box::new(Judge::blank()), "judge_create")
                .args(jc.args())
                .data(jc.data())
                .value(self.cfg.p2),
        )?;
        let Some(judge) = r.created.filter(|_| r.succeeded()) else {
            let why = r.error.map(|e| e.to_string()).unwrap_or_default();
            w.note(self.id, format!("judge creation failed: {why}"));
            if granted {
                self.sales.push(Sale {
                    client: req.client,
                    did: req.did,
                    request: Some(request),
                    judge: None,
                    key,
                    state: SaleState::Failed,
                });
                return Ok(());
            }
            return self.deny(w, &req, DenyReason::NotAuthorized, None);
        };
        let offer = Offer { judge, request, did: req.did, len: out.len, z: out.z, phi: out.phi };
        let bytes = offer.to_bytes();
        w.send(self.id, req.client, MsgKind::Offer, bytes, out.len as usize);
        let since = w.now();
        self.sales.push(Sale {
            client: req.client,
            did: req.did,
            request: Some(request),
            judge: Some(judge),
            key,
            state: SaleState::Offered { since },
        });
        Ok(())
    }

    pub(super) fn step(&mut self, w: &mut World, inbox: Vec<Wire>) -> Result<(), SimError> {
        for msg in inbox {
            match msg.kind {
                MsgKind::StoreFile => self.receive_file(w, msg)?,
                MsgKind::Leak => {
                    let mut r = Reader::new(&msg.bytes);
                    let mut phi = Vec::with_capacity(msg.bytes.len() / 32);
                    while r.remaining() >= 32 {
                        phi.push(r.digest().map_err(|e| SimError::Protocol(e.to_string()))?);
                    }
                    self.leaked_phi.insert(msg.from, phi);
                }
                MsgKind::Request => match AccessRequest::from_bytes(&msg.bytes) {
                    Ok(req) if req.client == msg.from => self.handle_request(w, req)?,
                    _ => w.note(self.id, "ignored malformed request"),
                },
                other => w.note(self.id, format!("ignored unexpected {other:?}")),
            }
        }
        for i in 0..self.sales.len() {
            self.advance_sale(w, i)?;
        }
        Ok(())
    }

    fn advance_sale(&mut self, w: &mut World, i: usize) -> Result<(), SimError> {
        let Some(addr) = self.sales[i].judge else {
            return Ok(());
        };
        let j = w.ledger.contract::<Judge>(&addr).ok_or_else(|| SimError::Protocol("judge vanished".into()))?.clone();
        let now = w.now();
        let sale = &mut self.sales[i];
        if j.phase.is_terminal() {
            sale.state = SaleState::Closed(j.phase);
            return Ok(());
        }
        match sale.state {
            SaleState::Offered { since } => match j.phase {
                Phase::Accepted if self.behavior == Behavior::WithholdKey => {
                    w.note(self.id, "withholding the exchange key");
                    sale.state = SaleState::Withholding;
                }
                Phase::Accepted => {
                    let r = w.submit(TxRequest::call(self.id, addr, "judge_reveal_key").data(sale.key.0.to_vec()))?;
                    if r.succeeded() {
                        sale.state = SaleState::Revealed;
                    }
                }
                Phase::Created if now > since + self.cfg.ts => {
                    w.submit(TxRequest::call(self.id, addr, "judge_abort"))?;
                }
                _ => {}
            },
            SaleState::Revealed if j.deadline.is_some_and(|d| now > d) => {
                w.submit(TxRequest::call(self.id, addr, "judge_timeout_claim"))?;
            }
            _ => {}
        }
        Ok(())
    }

    pub(super) fn done(&self) -> bool {
        self.sales.iter().all(|s| matches!(s.state, SaleState::Denied | SaleState::Failed | SaleState::Closed(_)))
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        if self.sales.is_empty() {
            return vec![if self.rejected.is_empty() { Outcome::Stored } else { Outcome::StorageAborted }];
        }
        self.sales
            .iter()
            .map(|s| match s.state {
                _ if self.rejected.contains(&s.did) => Outcome::StorageAborted,
                SaleState::Closed(Phase::SettledSeller) => Outcome::Paid,
                SaleState::Closed(Phase::SettledBuyer) => Outcome::Penalized,
                _ => Outcome::Aborted,
            })
            .collect()
    }
}
