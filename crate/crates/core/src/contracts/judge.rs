//! Judge contract: one instance per file-exchange session.
//!
//! ```text
//! created --accept--> accepted --reveal--> key-revealed --decide/complain--> settled-*
//!    \--abort--> aborted   \--refund (after ts)--> settled-buyer   \--timeout (after ts)--> settled-seller
//! ```

use std::any::Any;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::controller::{Controller, Role, NAME as CONTROLLER};
use super::{tags, RequestId, SessionId};
use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{Digest, SymKey};
use crate::exchange::{judge_verify_proof, ExchangeCommitment, MisbehaviorProof};
use crate::ledger::{Call, CallContext, Coins, Contract, ContractError, Time};
use crate::{DId, PartyId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Created,
    Accepted,
    KeyRevealed,
    SettledSeller,
    SettledBuyer,
    Aborted,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::SettledSeller | Phase::SettledBuyer | Phase::Aborted)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Created => "created",
            Phase::Accepted => "accepted",
            Phase::KeyRevealed => "key-revealed",
            Phase::SettledSeller => "settled-seller",
            Phase::SettledBuyer => "settled-buyer",
            Phase::Aborted => "aborted",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Valid,
    ValidComplain,
}

/// Arguments of `judge_create`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JudgeCreate {
    pub request: RequestId,
    pub did: DId,
    pub buyer: PartyId,
    pub p1: Coins,
    pub ts: Time,
    pub commitment: ExchangeCommitment,
}

impl JudgeCreate {
    pub fn args(&self) -> Vec<u8> {
        Writer::new()
            .digest(&self.request.0)
            .did(&self.did)
            .party(self.buyer)
            .u64(self.p1)
            .u64(self.ts)
            .u64(self.commitment.count)
            .u32(self.commitment.chunk_size)
            .finish()
    }

    /// `c || r_z || r_phi`.
    pub fn data(&self) -> Vec<u8> {
        self.commitment.onchain_bytes()
    }

    fn decode(args: &[u8], data: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(args);
        let request = RequestId(r.digest()?);
        let did = r.did()?;
        let buyer = r.party()?;
        let p1 = r.u64()?;
        let ts = r.u64()?;
        let count = r.u64()?;
        let chunk_size = r.u32()?;
        r.finish()?;
        let mut d = Reader::new(data);
        let c = d.digest()?;
        let r_z = d.digest()?;
        let r_phi = d.digest()?;
        d.finish()?;
        Ok(JudgeCreate {
            request,
            did,
            buyer,
            p1,
            ts,
            commitment: ExchangeCommitment { c, r_z, r_phi, count, chunk_size },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judge {
    pub session: SessionId,
    pub request: RequestId,
    pub did: DId,
    pub seller: PartyId,
    pub buyer: PartyId,
    pub commitment: ExchangeCommitment,
    pub p1: Coins,
    pub p2: Coins,
    pub ts: Time,
    pub key: Option<[u8; 32]>,
    pub decision: Option<Decision>,
    pub phase: Phase,
    pub accepted_at: Option<Time>,
    pub deadline: Option<Time>,
}

impl Judge {
    /// Undeployed instance; all fields are set by `judge_create`.
    pub fn blank() -> Self {
        Judge {
            session: SessionId(Digest::default()),
            request: RequestId(Digest::default()),
            did: DId([0; 4]),
            seller: PartyId(0),
            buyer: PartyId(0),
            commitment: ExchangeCommitment::from_roots(Digest::default(), Digest::default(), 0, 0),
            p1: 0,
            p2: 0,
            ts: 0,
            key: None,
            decision: None,
            phase: Phase::Created,
            accepted_at: None,
            deadline: None,
        }
    }

    pub fn revealed_key(&self) -> Option<SymKey> {
        self.key.map(SymKey)
    }

    fn expect_phase(&self, want: Phase) -> Result<(), ContractError> {
        if self.phase != want {
            return Err(ContractError::WrongPhase(self.phase.to_string()));
        }
        Ok(())
    }

    fn expect_caller(ctx: &CallContext<'_>, who: PartyId) -> Result<(), ContractError> {
        if ctx.sender() != who {
            return Err(ContractError::Unauthorized(ctx.sender()));
        }
        Ok(())
    }

    fn expect_tag(data: &[u8], tag: u8) -> Result<(), ContractError> {
        if data != [tag] {
            return Err(CodecError::Invalid("unexpected call payload".into()).into());
        }
        Ok(())
    }

    fn create(&mut self, ctx: &CallContext<'_>, call: Call<'_>) -> Result<(), ContractError> {
        let req = JudgeCreate::decode(call.args, call.data)?;
        let seller = ctx.sender();
        let (_, controller) =
            ctx.lookup::<Controller>(CONTROLLER).ok_or_else(|| ContractError::NotFound("controller".into()))?;
        if !controller.is_role(seller, Role::Cloud) {
            return Err(ContractError::Unauthorized(seller));
        }
        let grant = controller.grant(&req.request).ok_or(ContractError::NotGranted)?;
        if grant.cloud != seller || grant.client != req.buyer || grant.did != req.did {
            return Err(ContractError::NotGranted);
        }
        if req.commitment.count == 0 || req.commitment.chunk_size == 0 || !req.commitment.is_consistent() {
            return Err(ContractError::CommitmentMismatch);
        }
        *self = Judge {
            session: SessionId::derive(&req.did, req.buyer, ctx.seq()),
            request: req.request,
            did: req.did,
            seller,
            buyer: req.buyer,
            commitment: req.commitment,
            p1: req.p1,
            p2: ctx.value(),
            ts: req.ts,
            ..Judge::blank()
        };
        Ok(())
    }
}

impl Contract for Judge {
    fn kind(&self) -> &'static str {
        "judge"
    }

    fn execute(&mut self, ctx: &mut CallContext<'_>, call: Call<'_>) -> Result<Vec<u8>, ContractError> {
        if call.function == "judge_create" {
            if self.session.0 != Digest::default() {
                return Err(ContractError::AlreadyInitialized);
            }
            self.create(ctx, call)?;
            return Ok(vec![]);
        }
        if !call.args.is_empty() {
            return Err(CodecError::Trailing(call.args.len()).into());
        }
        let pot = self.p1 + self.p2;
        match call.function {
            "judge_accept" => {
                self.expect_phase(Phase::Created)?;
                Self::expect_caller(ctx, self.buyer)?;
                Self::expect_tag(call.data, tags::ACCEPT)?;
                if ctx.value() != self.p1 {
                    return Err(ContractError::WrongValue { got: ctx.value(), expected: self.p1 });
                }
                self.phase = Phase::Accepted;
                self.accepted_at = Some(ctx.now());
            }
            "judge_abort" => {
                self.expect_phase(Phase::Created)?;
                Self::expect_caller(ctx, self.seller)?;
                ctx.pay(self.seller, self.p2)?;
                self.phase = Phase::Aborted;
            }
            "judge_reveal_key" => {
                self.expect_phase(Phase::Accepted)?;
                Self::expect_caller(ctx, self.seller)?;
                let k: [u8; 32] =
                    call.data.try_into().map_err(|_| CodecError::Invalid("key must be 32 bytes".into()))?;
                self.key = Some(k);
                self.deadline = Some(ctx.now() + self.ts);
                self.phase = Phase::KeyRevealed;
            }
            "judge_refund" => {
                self.expect_phase(Phase::Accepted)?;
                Self::expect_caller(ctx, self.buyer)?;
                let accepted_at = self.accepted_at.expect("set on accept");
                if ctx.now() <= accepted_at + self.ts {
                    return Err(ContractError::DeadlineNotReached);
                }
                ctx.pay(self.buyer, pot)?;
                self.phase = Phase::SettledBuyer;
            }
            "judge_decide" => {
                self.expect_phase(Phase::KeyRevealed)?;
                Self::expect_caller(ctx, self.buyer)?;
                Self::expect_tag(call.data, tags::VALID)?;
                if ctx.now() > self.deadline.expect("set on reveal") {
                    return Err(ContractError::DeadlinePassed);
                }
                ctx.pay(self.seller, pot)?;
                self.decision = Some(Decision::Valid);
                self.phase = Phase::SettledSeller;
            }
            "judge_complain" => {
                self.expect_phase(Phase::KeyRevealed)?;
                Self::expect_caller(ctx, self.buyer)?;
                if ctx.now() > self.deadline.expect("set on reveal") {
                    return Err(ContractError::DeadlinePassed);
                }
                let proof = MisbehaviorProof::from_bytes(call.data)
                    .map_err(|e| ContractError::ComplaintInvalid(e.to_string()))?;
                if proof.index >= self.commitment.count {
                    return Err(ContractError::ComplaintInvalid(format!(
                        "chunk {} of {}",
                        proof.index, self.commitment.count
                    )));
                }
                let k = SymKey(self.key.expect("set on reveal"));
                if !judge_verify_proof(&self.commitment, &k, &proof) {
                    return Err(ContractError::ComplaintRejected);
                }
                ctx.pay(self.buyer, pot)?;
                self.decision = Some(Decision::ValidComplain);
                self.phase = Phase::SettledBuyer;
            }
            "judge_timeout_claim" => {
                self.expect_phase(Phase::KeyRevealed)?;
                Self::expect_caller(ctx, self.seller)?;
                if ctx.now() <= self.deadline.expect("set on reveal") {
                    return Err(ContractError::DeadlineNotReached);
                }
                ctx.pay(self.seller, pot)?;
                self.phase = Phase::SettledSeller;
            }
            other => return Err(ContractError::UnknownFunction(other.into())),
        }
        Ok(vec![])
    }

    fn view(&self, function: &str, _args: &[u8]) -> Result<Vec<u8>, ContractError> {
        match function {
            "phase" => Ok(self.phase.to_string().into_bytes()),
            other => Err(ContractError::UnknownFunction(other.into())),
        }
    }

    fn read(&self, key: &[u8]) -> Option<Vec<u8>> {
        match key {
            b"key" => self.key.map(|k| k.to_vec()),
            b"commitment" => Some(self.commitment.onchain_bytes()),
            b"phase" => Some(self.phase.to_string().into_bytes()),
            _ => None,
        }
    }

    fn encode_state(&self) -> Vec<u8> {
        Writer::new()
            .digest(&self.session.0)
            .digest(&self.request.0)
            .did(&self.did)
            .party(self.seller)
            .party(self.buyer)
            .raw(&self.commitment.onchain_bytes())
            .u64(self.commitment.count)
            .u32(self.commitment.chunk_size)
            .u64(self.p1)
            .u64(self.p2)
            .u64(self.ts)
            .bytes(self.key.as_ref().map_or(&[][..], |k| &k[..]))
            .u8(match self.decision {
                None => 0,
                Some(Decision::Valid) => 1,
                Some(Decision::ValidComplain) => 2,
            })
            .bytes(self.phase.to_string().as_bytes())
            .u64(self.accepted_at.map_or(u64::MAX, |t| t))
            .u64(self.deadline.map_or(u64::MAX, |t| t))
            .finish()
    }

    fn boxed_clone(&self) -> Box<dyn Contract> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
