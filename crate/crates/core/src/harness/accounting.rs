//! Byte and gas accounting over a finished trace.

use std::collections::BTreeMap;

use serde::Serialize;

use super::HarnessError;
use crate::ledger::{Gas, GasSchedule, TxRecord};
use crate::parties::{MsgKind, TraceEntry};

/// Every function the protocol flow may call.
pub const FLOW_FUNCTIONS: [&str; 23] = [
    "register_params",
    "judge_create",
    "register_fog",
    "register_cloud",
    "register_client",
    "store_meta1",
    "store_nonce",
    "store_access_policy",
    "update_access_policy",
    "store_meta2",
    "compare_access_policy",
    "verify_key_hash",
    "lock_p3",
    "lock_p4",
    "reclaim_p3",
    "judge_accept",
    "judge_reveal_key",
    "judge_decide",
    "judge_complain",
    "judge_timeout_claim",
    "judge_abort",
    "judge_refund",
    "transfer",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GasPhase {
    Initialization,
    JudgeDeployment,
    Registration,
    DataStorage,
    DataRetrieval,
}

impl GasPhase {
    pub fn of(function: &str) -> GasPhase {
        match function {
            "register_params" => GasPhase::Initialization,
            "judge_create" => GasPhase::JudgeDeployment,
            "register_fog" | "register_cloud" | "register_client" => GasPhase::Registration,
            "store_meta1" | "store_nonce" | "store_access_policy" | "update_access_policy" => GasPhase::DataStorage,
            _ => GasPhase::DataRetrieval,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainPhase {
    Setup,
    Storage,
    Retrieval,
}

impl ChainPhase {
    pub fn of(function: &str) -> ChainPhase {
        match GasPhase::of(function) {
            GasPhase::Initialization | GasPhase::Registration => ChainPhase::Setup,
            GasPhase::DataStorage => ChainPhase::Storage,
            GasPhase::JudgeDeployment | GasPhase::DataRetrieval => ChainPhase::Retrieval,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CallGas {
    pub calls: u64,
    pub failed: u64,
    pub gas_per_call: Gas,
    pub gas: Gas,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GasReport {
    pub per_call: BTreeMap<String, CallGas>,
    pub per_phase: BTreeMap<GasPhase, Gas>,
    pub total: Gas,
    pub fees: u64,
    pub usd_per_phase: Option<BTreeMap<GasPhase, f64>>,
}

/// Recomputes gas from the schedule and checks it against what the ledger charged.
pub fn gas_accounting(
    log: &[TxRecord],
    schedule: &GasSchedule,
    usd_per_gas: Option<f64>,
) -> Result<GasReport, HarnessError> {
    let mut rep = GasReport::default();
    for p in [
        GasPhase::Initialization,
        GasPhase::JudgeDeployment,
        GasPhase::Registration,
        GasPhase::DataStorage,
        GasPhase::DataRetrieval,
    ] {
        rep.per_phase.insert(p, 0);
    }
    for tx in log {
        let g = schedule
            .gas(&tx.function)
            .ok_or_else(|| HarnessError::Accounting(format!("{} is missing from the gas schedule", tx.function)))?;
        if g != tx.gas_used {
            return Err(HarnessError::Accounting(format!(
                "tx {} charged {} gas for {}, schedule says {g}",
                tx.seq, tx.gas_used, tx.function
            )));
        }
        let e = rep.per_call.entry(tx.function.clone()).or_default();
        e.calls += 1;
        e.failed += u64::from(!tx.succeeded());
        e.gas_per_call = g;
        e.gas += g;
        *rep.per_phase.get_mut(&GasPhase::of(&tx.function)).expect("all phases present") += g;
        rep.total += g;
        rep.fees += tx.fee;
    }
    rep.usd_per_phase = usd_per_gas
        .map(|u| rep.per_phase.iter().map(|(p, g)| (*p, *g as f64 * schedule.gas_price as f64 * u)).collect());
    Ok(rep)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct KindBytes {
    pub messages: u64,
    pub bytes: u64,
    pub payload: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Generation {
    pub bytes: u64,
    pub payload: u64,
    pub overhead: u64,
    pub envelopes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Retrieval {
    pub bytes: u64,
    /// Encrypted file bytes delivered through offers.
    pub file: u64,
    /// Re-encrypted key bytes.
    pub key: u64,
    pub sessions: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PhaseBytes {
    pub data_generation: Generation,
    pub data_storage: u64,
    pub data_request: u64,
    pub data_retrieval: Retrieval,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OnChainBytes {
    pub per_phase: BTreeMap<ChainPhase, u64>,
    pub per_call: BTreeMap<String, u64>,
    /// Storage plus retrieval bytes.
    pub overhead: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ByteReport {
    pub phases: PhaseBytes,
    pub on_chain: OnChainBytes,
    /// Off-chain bytes outside the four phase counts.
    pub extras: BTreeMap<String, u64>,
    pub per_kind: BTreeMap<MsgKind, KindBytes>,
    pub total_off_chain: u64,
}

pub fn byte_accounting(trace: &[TraceEntry]) -> ByteReport {
    let mut rep = ByteReport::default();
    for p in [ChainPhase::Setup, ChainPhase::Storage, ChainPhase::Retrieval] {
        rep.on_chain.per_phase.insert(p, 0);
    }
    for e in trace {
        match e {
            TraceEntry::OnChain(tx) => {
                let b = tx.onchain_bytes() as u64;
                *rep.on_chain.per_phase.get_mut(&ChainPhase::of(&tx.function)).expect("all phases present") += b;
                *rep.on_chain.per_call.entry(tx.function.clone()).or_default() += b;
            }
            TraceEntry::OffChain { msg, bytes, payload, .. } => {
                let k = rep.per_kind.entry(*msg).or_default();
                k.messages += 1;
                k.bytes += *bytes as u64;
                k.payload += *payload as u64;
                rep.total_off_chain += *bytes as u64;
            }
            TraceEntry::Tick { .. } => {}
        }
    }
    rep.on_chain.overhead =
        rep.on_chain.per_phase[&ChainPhase::Storage] + rep.on_chain.per_phase[&ChainPhase::Retrieval];

    let get = |k: MsgKind| rep.per_kind.get(&k).cloned().unwrap_or_default();
    let env = get(MsgKind::Envelope);
    let offer = get(MsgKind::Offer);
    let rekey = get(MsgKind::ReKey);
    rep.phases = PhaseBytes {
        data_generation: Generation {
            bytes: env.bytes,
            payload: env.payload,
            overhead: env.bytes - env.payload,
            envelopes: env.messages,
        },
        data_storage: get(MsgKind::StoreFile).bytes,
        data_request: get(MsgKind::Request).bytes,
        data_retrieval: Retrieval {
            bytes: offer.payload + rekey.bytes,
            file: offer.payload,
            key: rekey.bytes,
            sessions: offer.messages,
        },
    };
    let mut extras = BTreeMap::new();
    extras.insert("offer-framing".to_string(), offer.bytes - offer.payload);
    for k in [MsgKind::Feedback, MsgKind::StoreAck, MsgKind::Denied, MsgKind::Forward, MsgKind::Leak] {
        extras.insert(k.to_string(), get(k).bytes);
    }
    rep.extras = extras;
    rep
}
