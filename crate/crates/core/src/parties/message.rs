//! Off-ledger messages. Everything travels as bytes so byte counts and
//! transport faults act on the real encoding.

use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Reader, Writer};
use crate::contracts::RequestId;
use crate::crypto::Digest;
use crate::{ContractAddr, DId, PartyId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgKind {
    Envelope,
    Feedback,
    StoreFile,
    StoreAck,
    Request,
    Denied,
    Forward,
    Offer,
    ReKey,
    /// Private values shared between colluding parties.
    Leak,
}

/// Reporting bucket for a message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgPhase {
    DataGeneration,
    DataStorage,
    DataRequest,
    DataRetrieval,
    Control,
    Collusion,
}

impl std::fmt::Display for MsgKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

impl MsgKind {
    pub fn phase(self) -> MsgPhase {
        match self {
            MsgKind::Envelope => MsgPhase::DataGeneration,
            MsgKind::StoreFile => MsgPhase::DataStorage,
            MsgKind::Request => MsgPhase::DataRequest,
            MsgKind::Offer | MsgKind::ReKey => MsgPhase::DataRetrieval,
            MsgKind::Leak => MsgPhase::Collusion,
            MsgKind::Feedback | MsgKind::StoreAck | MsgKind::Denied | MsgKind::Forward => MsgPhase::Control,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wire {
    pub from: PartyId,
    pub to: PartyId,
    pub kind: MsgKind,
    pub bytes: Vec<u8>,
}

/// `Req`: 10-byte header followed by an opaque token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessRequest {
    pub did: DId,
    pub client: PartyId,
    pub token: Vec<u8>,
}

impl AccessRequest {
    pub const HEADER_LEN: usize = DId::LEN + 4 + 2;

    pub fn encode(&self, w: Writer) -> Writer {
        w.did(&self.did).party(self.client).u16(self.token.len() as u16).raw(&self.token)
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let did = r.did()?;
        let client = r.party()?;
        let n = r.u16()? as usize;
        Ok(AccessRequest { did, client, token: r.take(n)?.to_vec() })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.encode(Writer::new()).finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(b);
        let req = Self::decode(&mut r)?;
        r.finish()?;
        Ok(req)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenyReason {
    NotAuthorized,
    Unavailable,
}

pub fn encode_denied(did: &DId, reason: DenyReason) -> Vec<u8> {
    Writer::new().did(did).u8(reason as u8).finish()
}

pub fn decode_denied(b: &[u8]) -> Result<(DId, DenyReason), CodecError> {
    let mut r = Reader::new(b);
    let did = r.did()?;
    let reason = match r.u8()? {
        0 => DenyReason::NotAuthorized,
        1 => DenyReason::Unavailable,
        t => return Err(CodecError::Invalid(format!("deny reason {t}"))),
    };
    r.finish()?;
    Ok((did, reason))
}

pub fn encode_store_ack(did: &DId, ok: bool) -> Vec<u8> {
    Writer::new().did(did).u8(ok as u8).finish()
}

pub fn decode_store_ack(b: &[u8]) -> Result<(DId, bool), CodecError> {
    let mut r = Reader::new(b);
    let did = r.did()?;
    let ok = r.u8()? == 1;
    r.finish()?;
    Ok((did, ok))
}

pub fn encode_forward(request: &RequestId, req: &AccessRequest) -> Vec<u8> {
    req.encode(Writer::new().digest(&request.0)).finish()
}

pub fn decode_forward(b: &[u8]) -> Result<(RequestId, AccessRequest), CodecError> {
    let mut r = Reader::new(b);
    let id = RequestId(r.digest()?);
    let req = AccessRequest::decode(&mut r)?;
    r.finish()?;
    Ok((id, req))
}

/// The seller's side of the file exchange: encrypted chunks and their promised digests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offer {
    pub judge: ContractAddr,
    pub request: RequestId,
    pub did: DId,
    pub len: u64,
    pub z: Vec<Vec<u8>>,
    pub phi: Vec<Digest>,
}

impl Offer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let chunk_len = self.z.first().map_or(0, |c| c.len());
        let mut w = Writer::new()
            .digest(&self.judge.0)
            .digest(&self.request.0)
            .did(&self.did)
            .u64(self.len)
            .u32(self.z.len() as u32)
            .u32(chunk_len as u32);
        for c in &self.z {
            w = w.raw(c);
        }
        for d in &self.phi {
            w = w.digest(d);
        }
        w.finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(b);
        let judge = ContractAddr(r.digest()?);
        let request = RequestId(r.digest()?);
        let did = r.did()?;
        let len = r.u64()?;
        let n = r.u32()? as usize;
        let chunk_len = r.u32()? as usize;
        if n.saturating_mul(chunk_len + Digest::LEN) > r.remaining() {
            return Err(CodecError::Truncated { wanted: n * (chunk_len + Digest::LEN), left: r.remaining() });
        }
        let z = (0..n).map(|_| r.take(chunk_len).map(|c| c.to_vec())).collect::<Result<Vec<_>, _>>()?;
        let phi = (0..n).map(|_| r.digest()).collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        Ok(Offer { judge, request, did, len, z, phi })
    }
}
