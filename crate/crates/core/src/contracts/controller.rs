//! Controller contract: registry, file metadata, access policies and the
//! key-exchange escrow.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{tags, RequestId};
use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{Digest, Nonce};
use crate::ledger::{Call, CallContext, Coins, Contract, ContractError, Time};
use crate::{DId, PartyId};

pub const NAME: &str = "controller";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Fog,
    Cloud,
    Client,
}

impl Role {
    fn code(self) -> u8 {
        match self {
            Role::Fog => 0,
            Role::Cloud => 1,
            Role::Client => 2,
        }
    }
}

/// Contract terms fixed at deployment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerTerms {
    pub p3: Coins,
    pub p4: Coins,
    pub ts: Time,
    pub min_deposit_fog: Coins,
    pub min_deposit_cloud: Coins,
    pub min_deposit_client: Coins,
}

impl Default for ControllerTerms {
    fn default() -> Self {
        ControllerTerms { p3: 300, p4: 400, ts: 100, min_deposit_fog: 0, min_deposit_cloud: 0, min_deposit_client: 0 }
    }
}

impl ControllerTerms {
    fn min_for(&self, role: Role) -> Coins {
        match role {
            Role::Fog => self.min_deposit_fog,
            Role::Cloud => self.min_deposit_cloud,
            Role::Client => self.min_deposit_client,
        }
    }

    fn encode(&self, w: Writer) -> Writer {
        w.u64(self.p3)
            .u64(self.p4)
            .u64(self.ts)
            .u64(self.min_deposit_fog)
            .u64(self.min_deposit_cloud)
            .u64(self.min_deposit_client)
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(ControllerTerms {
            p3: r.u64()?,
            p4: r.u64()?,
            ts: r.u64()?,
            min_deposit_fog: r.u64()?,
            min_deposit_cloud: r.u64()?,
            min_deposit_client: r.u64()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registration {
    pub role: Role,
    pub pk: Option<Vec<u8>>,
    pub deposit: Coins,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileRecord {
    pub owner: PartyId,
    pub h1: Digest,
    pub h2: Digest,
    pub nonce: Option<Nonce>,
    pub policy: Option<BTreeSet<PartyId>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessGrant {
    pub did: DId,
    pub client: PartyId,
    pub cloud: PartyId,
    pub fog: PartyId,
    pub granted_at: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscrowStatus {
    Open,
    Settled,
    Seized,
    Reclaimed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyEscrow {
    pub client_lock: Coins,
    pub fog_lock: Coins,
    pub p3_locked_at: Time,
    pub h3: Option<Digest>,
    pub status: EscrowStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Controller {
    params_ref: Digest,
    terms: Option<ControllerTerms>,
    registry: BTreeMap<PartyId, Registration>,
    files: BTreeMap<DId, FileRecord>,
    grants: BTreeMap<RequestId, AccessGrant>,
    escrows: BTreeMap<RequestId, KeyEscrow>,
    meta2: BTreeMap<RequestId, Digest>,
}

/// Deployment arguments: parameter digest and terms.
pub fn deploy_args(params_ref: &Digest, terms: &ControllerTerms) -> Vec<u8> {
    terms.encode(Writer::new().digest(params_ref)).finish()
}

/// Access policy encoding: `u16` count followed by 4-byte client ids.
pub fn encode_policy(clients: &BTreeSet<PartyId>) -> Vec<u8> {
    let mut w = Writer::new().u16(clients.len() as u16);
    for c in clients {
        w = w.party(*c);
    }
    w.finish()
}

pub fn decode_policy(bytes: &[u8]) -> Result<BTreeSet<PartyId>, CodecError> {
    let mut r = Reader::new(bytes);
    let n = r.u16()?;
    let mut out = BTreeSet::new();
    for _ in 0..n {
        out.insert(r.party()?);
    }
    r.finish()?;
    Ok(out)
}

/// `DId || h1 || h2`.
pub fn encode_meta1(did: &DId, h1: &Digest, h2: &Digest) -> Vec<u8> {
    Writer::new().did(did).digest(h1).digest(h2).finish()
}

/// `DId || h3`.
pub fn encode_meta2(did: &DId, h3: &Digest) -> Vec<u8> {
    Writer::new().did(did).digest(h3).finish()
}

fn flag(b: bool) -> Vec<u8> {
    vec![b as u8]
}

impl Controller {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> Option<&ControllerTerms> {
        self.terms.as_ref()
    }

    pub fn params_ref(&self) -> &Digest {
        &self.params_ref
    }

    pub fn registration(&self, p: PartyId) -> Option<&Registration> {
        self.registry.get(&p)
    }

    pub fn file(&self, did: &DId) -> Option<&FileRecord> {
        self.files.get(did)
    }

    pub fn files(&self) -> impl Iterator<Item = (&DId, &FileRecord)> {
        self.files.iter()
    }

    pub fn grant(&self, id: &RequestId) -> Option<&AccessGrant> {
        self.grants.get(id)
    }

    pub fn escrow(&self, id: &RequestId) -> Option<&KeyEscrow> {
        self.escrows.get(id)
    }

    pub fn meta2(&self, id: &RequestId) -> Option<&Digest> {
        self.meta2.get(id)
    }

    pub fn is_role(&self, p: PartyId, role: Role) -> bool {
        self.registry.get(&p).is_some_and(|r| r.role == role)
    }

    pub fn verify_file_hash(&self, did: &DId, h: &Digest) -> Result<bool, ContractError> {
        let f = self.files.get(did).ok_or_else(|| ContractError::NotFound(format!("file {did}")))?;
        Ok(f.h1 == *h)
    }

    fn require_terms(&self) -> Result<ControllerTerms, ContractError> {
        self.terms.ok_or_else(|| ContractError::NotFound("controller terms".into()))
    }

    fn owned_file(&mut self, did: &DId, caller: PartyId) -> Result<&mut FileRecord, ContractError> {
        let f = self.files.get_mut(did).ok_or_else(|| ContractError::NotFound(format!("file {did}")))?;
        if f.owner != caller {
            return Err(ContractError::Unauthorized(caller));
        }
        Ok(f)
    }

    fn register(&mut self, ctx: &CallContext<'_>, role: Role, data: &[u8]) -> Result<Vec<u8>, ContractError> {
        let terms = self.require_terms()?;
        let who = ctx.sender();
        if self.registry.contains_key(&who) {
            return Err(ContractError::AlreadyStored(format!("registration of {who}")));
        }
        let min = terms.min_for(role);
        if ctx.value() < min {
            return Err(ContractError::UnderDeposit { got: ctx.value(), min });
        }
        let pk = match role {
            Role::Cloud => None,
            _ => {
                if data.is_empty() {
                    return Err(CodecError::Invalid("public key required".into()).into());
                }
                Some(data.to_vec())
            }
        };
        self.registry.insert(who, Registration { role, pk, deposit: ctx.value() });
        Ok(vec![])
    }

    fn lock_p3(&mut self, ctx: &CallContext<'_>, id: RequestId) -> Result<(), ContractError> {
        let terms = self.require_terms()?;
        let grant = self.grants.get(&id).ok_or(ContractError::NotGranted)?;
        if grant.client != ctx.sender() {
            return Err(ContractError::Unauthorized(ctx.sender()));
        }
        if self.escrows.contains_key(&id) {
            return Err(ContractError::AlreadyStored("client lock".into()));
        }
        if ctx.value() != terms.p3 {
            return Err(ContractError::WrongValue { got: ctx.value(), expected: terms.p3 });
        }
        self.escrows.insert(
            id,
            KeyEscrow {
                client_lock: terms.p3,
                fog_lock: 0,
                p3_locked_at: ctx.now(),
                h3: None,
                status: EscrowStatus::Open,
            },
        );
        Ok(())
    }

    fn store_meta2(&mut self, ctx: &CallContext<'_>, id: RequestId, data: &[u8]) -> Result<(), ContractError> {
        let grant = self.grants.get(&id).ok_or(ContractError::NotGranted)?;
        if grant.fog != ctx.sender() {
            return Err(ContractError::Unauthorized(ctx.sender()));
        }
        let mut r = Reader::new(data);
        let did = r.did()?;
        let h3 = r.digest()?;
        r.finish()?;
        if did != grant.did {
            return Err(CodecError::Invalid("meta2 names a different file".into()).into());
        }
        if self.meta2.contains_key(&id) {
            return Err(ContractError::AlreadyStored("meta2".into()));
        }
        self.meta2.insert(id, h3);
        Ok(())
    }

    fn lock_p4(&mut self, ctx: &CallContext<'_>, id: RequestId) -> Result<(), ContractError> {
        let terms = self.require_terms()?;
        let grant = self.grants.get(&id).ok_or(ContractError::NotGranted)?;
        if grant.fog != ctx.sender() {
            return Err(ContractError::Unauthorized(ctx.sender()));
        }
        let h3 = *self.meta2.get(&id).ok_or_else(|| ContractError::NotFound("meta2".into()))?;
        let esc = self.escrows.get_mut(&id).ok_or_else(|| ContractError::NotFound("client lock".into()))?;
        if esc.status != EscrowStatus::Open || esc.fog_lock != 0 {
            return Err(ContractError::WrongPhase(format!("{:?}", esc.status)));
        }
        if ctx.value() != terms.p4 {
            return Err(ContractError::WrongValue { got: ctx.value(), expected: terms.p4 });
        }
        esc.fog_lock = terms.p4;
        esc.h3 = Some(h3);
        Ok(())
    }

    fn verify_key_hash(&mut self, ctx: &mut CallContext<'_>, id: RequestId, h: Digest) -> Result<bool, ContractError> {
        let grant = self.grants.get(&id).ok_or(ContractError::NotGranted)?.clone();
        if grant.client != ctx.sender() {
            return Err(ContractError::Unauthorized(ctx.sender()));
        }
        let esc = self.escrows.get_mut(&id).ok_or_else(|| ContractError::NotFound("key escrow".into()))?;
        if esc.status != EscrowStatus::Open {
            return Err(ContractError::WrongPhase(format!("{:?}", esc.status)));
        }
        let Some(h3) = esc.h3 else {
            return Err(ContractError::WrongPhase("fog deposit not locked".into()));
        };
        let pot = esc.client_lock + esc.fog_lock;
        let matched = h3 == h;
        if matched {
            ctx.pay(grant.fog, pot)?;
            esc.status = EscrowStatus::Settled;
        } else {
            ctx.pay(grant.client, pot)?;
            esc.status = EscrowStatus::Seized;
        }
        Ok(matched)
    }

    fn reclaim_p3(&mut self, ctx: &mut CallContext<'_>, id: RequestId) -> Result<(), ContractError> {
        let terms = self.require_terms()?;
        let grant = self.grants.get(&id).ok_or(ContractError::NotGranted)?.clone();
        if grant.client != ctx.sender() {
            return Err(ContractError::Unauthorized(ctx.sender()));
        }
        let esc = self.escrows.get_mut(&id).ok_or_else(|| ContractError::NotFound("key escrow".into()))?;
        if esc.status != EscrowStatus::Open || esc.fog_lock != 0 {
            return Err(ContractError::WrongPhase(format!("{:?}", esc.status)));
        }
        if ctx.now() <= esc.p3_locked_at + terms.ts {
            return Err(ContractError::DeadlineNotReached);
        }
        ctx.pay(grant.client, esc.client_lock)?;
        esc.status = EscrowStatus::Reclaimed;
        Ok(())
    }
}

impl Contract for Controller {
    fn kind(&self) -> &'static str {
        NAME
    }

    fn singleton(&self) -> Option<&'static str> {
        Some(NAME)
    }

    fn execute(&mut self, ctx: &mut CallContext<'_>, call: Call<'_>) -> Result<Vec<u8>, ContractError> {
        let mut args = Reader::new(call.args);
        let sender = ctx.sender();
        let out = match call.function {
            "register_params" => {
                if self.terms.is_some() {
                    return Err(ContractError::AlreadyInitialized);
                }
                self.params_ref = args.digest()?;
                self.terms = Some(ControllerTerms::decode(&mut args)?);
                vec![]
            }
            "register_fog" => self.register(ctx, Role::Fog, call.data)?,
            "register_cloud" => self.register(ctx, Role::Cloud, call.data)?,
            "register_client" => self.register(ctx, Role::Client, call.data)?,
            "store_meta1" => {
                if !self.is_role(sender, Role::Fog) {
                    return Err(ContractError::Unauthorized(sender));
                }
                let mut r = Reader::new(call.data);
                let did = r.did()?;
                let h1 = r.digest()?;
                let h2 = r.digest()?;
                r.finish()?;
                if self.files.contains_key(&did) {
                    return Err(ContractError::AlreadyStored(format!("meta1 for {did}")));
                }
                self.files.insert(did, FileRecord { owner: sender, h1, h2, nonce: None, policy: None });
                vec![]
            }
            "store_nonce" => {
                let did = args.did()?;
                let nonce =
                    Nonce::from_slice(call.data).ok_or_else(|| CodecError::Invalid("nonce must be 12 bytes".into()))?;
                let f = self.owned_file(&did, sender)?;
                if f.nonce.is_some() {
                    return Err(ContractError::AlreadyStored(format!("nonce for {did}")));
                }
                f.nonce = Some(nonce);
                vec![]
            }
            "store_access_policy" | "update_access_policy" => {
                let did = args.did()?;
                let policy = decode_policy(call.data)?;
                let f = self.owned_file(&did, sender)?;
                if call.function == "store_access_policy" && f.policy.is_some() {
                    return Err(ContractError::AlreadyStored(format!("policy for {did}")));
                }
                if call.function == "update_access_policy" && f.policy.is_none() {
                    return Err(ContractError::NotFound(format!("policy for {did}")));
                }
                f.policy = Some(policy);
                vec![]
            }
            "compare_access_policy" => {
                if !self.is_role(sender, Role::Cloud) {
                    return Err(ContractError::Unauthorized(sender));
                }
                let client = args.party()?;
                let did = args.did()?;
                let f = self.files.get(&did).ok_or_else(|| ContractError::NotFound(format!("file {did}")))?;
                let policy = f.policy.as_ref().ok_or_else(|| ContractError::NotFound(format!("policy for {did}")))?;
                let allowed = policy.contains(&client) && self.is_role(client, Role::Client);
                if allowed {
                    let id = RequestId::derive(&did, client, ctx.seq());
                    let fog = f.owner;
                    self.grants.insert(id, AccessGrant { did, client, cloud: sender, fog, granted_at: ctx.now() });
                }
                flag(allowed)
            }
            "lock_p3" => {
                self.lock_p3(ctx, RequestId(args.digest()?))?;
                vec![]
            }
            "store_meta2" => {
                self.store_meta2(ctx, RequestId(args.digest()?), call.data)?;
                vec![]
            }
            "lock_p4" => {
                self.lock_p4(ctx, RequestId(args.digest()?))?;
                vec![]
            }
            "verify_key_hash" => {
                let id = RequestId(args.digest()?);
                let h = args.digest()?;
                flag(self.verify_key_hash(ctx, id, h)?)
            }
            "reclaim_p3" => {
                self.reclaim_p3(ctx, RequestId(args.digest()?))?;
                vec![]
            }
            other => return Err(ContractError::UnknownFunction(other.into())),
        };
        if matches!(call.function, "lock_p3" | "lock_p4") {
            let want = if call.function == "lock_p3" { tags::LOCK_P3 } else { tags::LOCK_P4 };
            if call.data != [want] {
                return Err(CodecError::Invalid("lock tag".into()).into());
            }
        }
        args.finish()?;
        Ok(out)
    }

    fn view(&self, function: &str, args: &[u8]) -> Result<Vec<u8>, ContractError> {
        let mut r = Reader::new(args);
        match function {
            "verify_file_hash" => {
                let did = r.did()?;
                let h = r.digest()?;
                r.finish()?;
                Ok(flag(self.verify_file_hash(&did, &h)?))
            }
            other => Err(ContractError::UnknownFunction(other.into())),
        }
    }

    fn read(&self, key: &[u8]) -> Option<Vec<u8>> {
        let (tag, rest) = key.split_at(key.iter().position(|b| *b == b'/')?);
        let rest = &rest[1..];
        match tag {
            b"meta1" => {
                let did = DId::from_slice(rest)?;
                self.files.get(&did).map(|f| encode_meta1(&did, &f.h1, &f.h2))
            }
            b"nonce" => self.files.get(&DId::from_slice(rest)?)?.nonce.map(|n| n.0.to_vec()),
            b"policy" => self.files.get(&DId::from_slice(rest)?)?.policy.as_ref().map(encode_policy),
            b"pk" => {
                let p = PartyId(u32::from_be_bytes(rest.try_into().ok()?));
                self.registry.get(&p)?.pk.clone()
            }
            b"meta2" => {
                let id = RequestId(Digest::from_slice(rest)?);
                let g = self.grants.get(&id)?;
                self.meta2.get(&id).map(|h| encode_meta2(&g.did, h))
            }
            _ => None,
        }
    }

    fn encode_state(&self) -> Vec<u8> {
        let mut w = Writer::new().digest(&self.params_ref);
        w = match &self.terms {
            Some(t) => t.encode(w.u8(1)),
            None => w.u8(0),
        };
        w = w.u32(self.registry.len() as u32);
        for (p, r) in &self.registry {
            w = w.party(*p).u8(r.role.code()).bytes(r.pk.as_deref().unwrap_or(&[])).u64(r.deposit);
        }
        w = w.u32(self.files.len() as u32);
        for (d, f) in &self.files {
            w = w.did(d).party(f.owner).digest(&f.h1).digest(&f.h2);
            w = w.bytes(f.nonce.as_ref().map_or(&[][..], |n| &n.0[..]));
            w = w.bytes(&f.policy.as_ref().map(encode_policy).unwrap_or_default());
        }
        w = w.u32(self.grants.len() as u32);
        for (id, g) in &self.grants {
            w = w.digest(&id.0).did(&g.did).party(g.client).party(g.cloud).party(g.fog).u64(g.granted_at);
        }
        w = w.u32(self.escrows.len() as u32);
        for (id, e) in &self.escrows {
            w = w.digest(&id.0).u64(e.client_lock).u64(e.fog_lock).u64(e.p3_locked_at);
            w = w.digest(&e.h3.unwrap_or_default()).u8(e.status as u8);
        }
        w = w.u32(self.meta2.len() as u32);
        for (id, h) in &self.meta2 {
            w = w.digest(&id.0).digest(h);
        }
        w.finish()
    }

    fn boxed_clone(&self) -> Box<dyn Contract> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Read key for a file field, e.g. `key("meta1", &did.0)`.
pub fn key(tag: &str, id: &[u8]) -> Vec<u8> {
    [tag.as_bytes(), b"/", id].concat()
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::*;
    use crate::crypto::hash;
    use crate::ledger::{LedgerError, TxRequest};

    fn id_arg(id: &RequestId) -> Vec<u8> {
        Writer::new().digest(&id.0).finish()
    }

    #[test]
    fn deploy_once() {
        let (mut l, _) = deployed(ControllerTerms::default());
        assert_eq!(l.log()[0].gas_used, 47002);
        let r = l
            .submit(
                TxRequest::deploy(FOG, Box::new(Controller::new()), "register_params")
                    .args(deploy_args(&hash(b"p"), &ControllerTerms::default())),
            )
            .unwrap();
        assert_eq!(r.error, Some(ContractError::AlreadyInitialized));
    }

    #[test]
    fn registration() {
        let (l, s) = with_file();
        let gas: u64 = l.log()[1..4].iter().map(|r| r.gas_used).sum();
        assert_eq!(gas, 15323);
        assert_eq!(l.read(&s, &key("pk", &CLIENT.to_bytes())).unwrap(), vec![2u8; 128]);
        assert_eq!(controller(&l).registration(CLOUD).unwrap().pk, None);
        assert!(matches!(l.read(&s, &key("pk", &CLOUD.to_bytes())), Err(LedgerError::NotFound(_))));
    }

    #[test]
    fn under_deposit_rejected() {
        let terms = ControllerTerms { min_deposit_client: 10, ..Default::default() };
        let (mut l, s) = deployed(terms);
        let r = l.submit(TxRequest::call(CLIENT, s, "register_client").data(vec![1; 128]).value(9)).unwrap();
        assert_eq!(r.error, Some(ContractError::UnderDeposit { got: 9, min: 10 }));
        let r = l.submit(TxRequest::call(CLIENT, s, "register_client").data(vec![1; 128]).value(10)).unwrap();
        assert!(r.succeeded());
        assert_eq!(l.escrow_of(&s), 10);
    }

    #[test]
    fn metadata_gas_and_bytes() {
        let (l, _) = with_file();
        let rows: Vec<_> = l.log()[4..7].iter().map(|r| (r.function.as_str(), r.gas_used, r.onchain_bytes())).collect();
        assert_eq!(rows, [("store_meta1", 1725, 68), ("store_nonce", 1078, 12), ("store_access_policy", 956, 6)]);
    }

    #[test]
    fn metadata_is_write_once_and_owned() {
        let (mut l, s) = with_file();
        let again = l.submit(TxRequest::call(FOG, s, "store_meta1").data(encode_meta1(&DID, &h1(), &h1()))).unwrap();
        assert!(matches!(again.error, Some(ContractError::AlreadyStored(_))));
        let stranger =
            l.submit(TxRequest::call(OTHER, s, "store_meta1").data(encode_meta1(&DId([1; 4]), &h1(), &h1()))).unwrap();
        assert_eq!(stranger.error, Some(ContractError::Unauthorized(OTHER)));
        let nonce = l
            .submit(TxRequest::call(FOG, s, "store_nonce").args(Writer::new().did(&DID).finish()).data(vec![0; 12]))
            .unwrap();
        assert!(matches!(nonce.error, Some(ContractError::AlreadyStored(_))));
    }

    #[test]
    fn file_hash_view() {
        let (l, s) = with_file();
        let n = l.log().len();
        let q = |h: &Digest| l.view(&s, "verify_file_hash", &Writer::new().did(&DID).digest(h).finish()).unwrap();
        assert_eq!(q(&h1()), [1]);
        assert_eq!(q(&hash(b"h1 ")), [0]);
        assert_eq!(l.log().len(), n);
        let unknown = l.view(&s, "verify_file_hash", &Writer::new().did(&DId([0; 4])).digest(&h1()).finish());
        assert!(matches!(unknown, Err(LedgerError::View(ContractError::NotFound(_)))));
    }

    #[test]
    fn access_policy_and_revocation() {
        let (mut l, s) = with_file();
        let (ok, id) = request_access(&mut l, s, CLIENT);
        assert!(ok);
        assert!(controller(&l).grant(&id).is_some());
        assert_eq!(l.log().last().unwrap().onchain_bytes(), 1);
        let (ok, id) = request_access(&mut l, s, OTHER);
        assert!(!ok);
        assert!(controller(&l).grant(&id).is_none());
        let r = l
            .submit(
                TxRequest::call(FOG, s, "update_access_policy")
                    .args(Writer::new().did(&DID).finish())
                    .data(encode_policy(&BTreeSet::new())),
            )
            .unwrap();
        assert!(r.succeeded());
        assert!(!request_access(&mut l, s, CLIENT).0);
    }

    fn open_escrow(l: &mut crate::ledger::Ledger, s: crate::ContractAddr, h3: Digest) -> RequestId {
        let (_, id) = request_access(l, s, CLIENT);
        let steps = [
            TxRequest::call(CLIENT, s, "lock_p3").args(id_arg(&id)).data(vec![tags::LOCK_P3]).value(300),
            TxRequest::call(FOG, s, "store_meta2").args(id_arg(&id)).data(encode_meta2(&DID, &h3)),
            TxRequest::call(FOG, s, "lock_p4").args(id_arg(&id)).data(vec![tags::LOCK_P4]).value(400),
        ];
        for tx in steps {
            let r = l.submit(tx).unwrap();
            assert!(r.succeeded(), "{:?}", r.error);
        }
        id
    }

    fn verify(
        l: &mut crate::ledger::Ledger,
        s: crate::ContractAddr,
        id: &RequestId,
        h: &Digest,
    ) -> crate::ledger::Receipt {
        l.submit(TxRequest::call(CLIENT, s, "verify_key_hash").args(Writer::new().digest(&id.0).digest(h).finish()))
            .unwrap()
    }

    #[test]
    fn honest_key_hash_pays_fog() {
        let (mut l, s) = with_file();
        let h3 = hash(b"c''");
        let id = open_escrow(&mut l, s, h3);
        let fog_before = l.balance(FOG).unwrap();
        let r = verify(&mut l, s, &id, &h3);
        assert_eq!(r.output, [1]);
        assert_eq!(l.balance(FOG).unwrap(), fog_before + 700);
        assert_eq!(controller(&l).escrow(&id).unwrap().status, EscrowStatus::Settled);
        let again = verify(&mut l, s, &id, &h3);
        assert!(matches!(again.error, Some(ContractError::WrongPhase(_))));
        assert_eq!(l.escrow_of(&s), 0);
    }

    #[test]
    fn tampered_key_hash_pays_client() {
        let (mut l, s) = with_file();
        let id = open_escrow(&mut l, s, hash(b"c''"));
        let before = l.balance(CLIENT).unwrap();
        let r = verify(&mut l, s, &id, &hash(b"forged"));
        assert_eq!(r.output, [0]);
        assert_eq!(l.balance(CLIENT).unwrap(), before + 700);
        assert_eq!(controller(&l).escrow(&id).unwrap().status, EscrowStatus::Seized);
    }

    #[test]
    fn fog_lock_requires_client_lock_and_meta2() {
        let (mut l, s) = with_file();
        let (_, id) = request_access(&mut l, s, CLIENT);
        let early = l
            .submit(TxRequest::call(FOG, s, "lock_p4").args(id_arg(&id)).data(vec![tags::LOCK_P4]).value(400))
            .unwrap();
        assert!(early.error.is_some());
        let wrong = l
            .submit(TxRequest::call(CLIENT, s, "lock_p3").args(id_arg(&id)).data(vec![tags::LOCK_P3]).value(299))
            .unwrap();
        assert_eq!(wrong.error, Some(ContractError::WrongValue { got: 299, expected: 300 }));
        let meta2_by_other = l
            .submit(TxRequest::call(CLIENT, s, "store_meta2").args(id_arg(&id)).data(encode_meta2(&DID, &h1())))
            .unwrap();
        assert_eq!(meta2_by_other.error, Some(ContractError::Unauthorized(CLIENT)));
        assert!(l.is_conserved());
    }

    #[test]
    fn client_reclaims_when_fog_never_locks() {
        let (mut l, s) = with_file();
        let (_, id) = request_access(&mut l, s, CLIENT);
        l.submit(TxRequest::call(CLIENT, s, "lock_p3").args(id_arg(&id)).data(vec![tags::LOCK_P3]).value(300)).unwrap();
        let early = l.submit(TxRequest::call(CLIENT, s, "reclaim_p3").args(id_arg(&id))).unwrap();
        assert_eq!(early.error, Some(ContractError::DeadlineNotReached));
        l.advance_time(100).unwrap();
        let before = l.balance(CLIENT).unwrap();
        let r = l.submit(TxRequest::call(CLIENT, s, "reclaim_p3").args(id_arg(&id))).unwrap();
        assert!(r.succeeded());
        assert_eq!(l.balance(CLIENT).unwrap(), before - 812 + 300);
        assert_eq!(controller(&l).escrow(&id).unwrap().status, EscrowStatus::Reclaimed);
    }

    #[test]
    fn meta2_layout() {
        assert_eq!(encode_meta2(&DID, &h1()).len(), 36);
        assert_eq!(encode_meta1(&DID, &h1(), &h1()).len(), 68);
        let set = BTreeSet::from([PartyId(1), PartyId(2)]);
        assert_eq!(decode_policy(&encode_policy(&set)).unwrap(), set);
    }
}
