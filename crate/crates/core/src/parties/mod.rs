//! Devices, fog nodes, the cloud and clients as deterministic actors over a
//! shared ledger and an off-ledger message queue.

pub mod client;
pub mod cloud;
pub mod device;
pub mod fog;
pub mod message;
pub mod summary;

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::contracts::Role;
use crate::contracts::{controller, Controller};
use crate::crypto::{hash_parts, CryptoError, PublicParams};
use crate::ledger::{Ledger, LedgerError, Receipt, Time, TxRecord, TxRequest};
use crate::{ContractAddr, PartyId};

pub use client::Client;
pub use cloud::Cloud;
pub use device::{device_emit, fog_ingest, DeviceIdentity, Envelope, Feedback, IngestError, ENVELOPE_OVERHEAD};
pub use fog::Fog;
pub use message::{AccessRequest, DenyReason, MsgKind, MsgPhase, Offer, Wire};
pub use summary::{summarize, Summary, SummaryFile};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    #[default]
    Honest,
    /// Fog: stores the true `h3` but sends a different re-encrypted key.
    TamperReenc,
    /// Cloud: claims the stored file arrived altered.
    TamperFileClaim,
    /// Cloud: serves altered chunks under the true chunk digests.
    ForwardForgedFile,
    /// Cloud: never reveals the exchange key.
    WithholdKey,
    /// Client: requests a file outside its access policy.
    UnauthorizedRequest,
    /// Client: files a fabricated complaint against a correct file.
    FalseComplaint,
    /// Client: never decides after the key is revealed.
    SilentAfterKey,
}

impl Behavior {
    pub fn allowed_for(self, role: Role) -> bool {
        use Behavior::*;
        match self {
            Honest => true,
            TamperReenc => role == Role::Fog,
            TamperFileClaim | ForwardForgedFile | WithholdKey => role == Role::Cloud,
            UnauthorizedRequest | FalseComplaint | SilentAfterKey => role == Role::Client,
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// Pair of parties sharing private state off the ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Collusion {
    /// Fog hands the cloud an altered file plus the true chunk digests; the
    /// cloud skips its integrity check and serves it.
    FogCloud,
    /// Fog leaks the true re-encrypted key to the client.
    FogClient,
    /// Cloud pursues an exchange even when the access check fails.
    CloudClient,
}

impl Collusion {
    pub fn involves(self, role: Role) -> bool {
        match self {
            Collusion::FogCloud => role != Role::Client,
            Collusion::FogClient => role != Role::Cloud,
            Collusion::CloudClient => role != Role::Fog,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Profile {
    pub fog: Behavior,
    pub cloud: Behavior,
    pub client: Behavior,
    pub collusion: Option<Collusion>,
}

impl Profile {
    pub fn validate(&self) -> Result<(), String> {
        for (role, b) in [(Role::Fog, self.fog), (Role::Cloud, self.cloud), (Role::Client, self.client)] {
            if !b.allowed_for(role) {
                return Err(format!("behavior {b} is not available to the {role:?} role"));
            }
        }
        Ok(())
    }

    pub fn colludes(&self, role: Role) -> Option<Collusion> {
        self.collusion.filter(|c| c.involves(role))
    }
}

/// Terminal state of one party in one session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    FileObtained,
    Compensated,
    AbortedUnauthorized,
    Aborted,
    Paid,
    Penalized,
    Stored,
    StorageAborted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("ledger rejected a transaction: {0}")]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("no terminal state after {0} rounds")]
    Livelock(u64),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Bit flip applied to the `nth` message of one kind while in transit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub kind: MsgKind,
    #[serde(default)]
    pub nth: usize,
    pub bit: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceEntry {
    OnChain(TxRecord),
    OffChain {
        time: Time,
        from: PartyId,
        to: PartyId,
        msg: MsgKind,
        phase: MsgPhase,
        bytes: usize,
        /// Bytes of application payload; the rest is framing.
        payload: usize,
        tampered: bool,
    },
    Tick {
        time: Time,
    },
}

/// Ledger, message queue and trace shared by all actors.
pub struct World {
    pub params: Arc<PublicParams>,
    pub ledger: Ledger,
    queue: VecDeque<Wire>,
    trace: Vec<TraceEntry>,
    fault: Option<Fault>,
    fault_seen: usize,
    progress: bool,
    conservation_failures: Vec<u64>,
    events: Vec<String>,
}

impl World {
    pub fn new(params: Arc<PublicParams>, ledger: Ledger, fault: Option<Fault>) -> Self {
        World {
            params,
            ledger,
            queue: VecDeque::new(),
            trace: Vec::new(),
            fault,
            fault_seen: 0,
            progress: false,
            conservation_failures: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn now(&self) -> Time {
        self.ledger.now()
    }

    /// Submits and records the transaction; coin conservation is checked after each one.
    pub fn submit(&mut self, tx: TxRequest) -> Result<Receipt, SimError> {
        let r = self.ledger.submit(tx)?;
        self.progress = true;
        let rec = self.ledger.log().last().expect("accepted transaction is logged").clone();
        if !self.ledger.is_conserved() {
            self.conservation_failures.push(rec.seq);
        }
        self.trace.push(TraceEntry::OnChain(rec));
        Ok(r)
    }

    pub fn send(&mut self, from: PartyId, to: PartyId, kind: MsgKind, mut bytes: Vec<u8>, payload: usize) {
        let mut tampered = false;
        if let Some(f) = self.fault.filter(|f| f.kind == kind) {
            if self.fault_seen == f.nth && !bytes.is_empty() {
                // envelope faults land in c_m; c_k is the fixed-size tail
                let span = match kind {
                    MsgKind::Envelope => bytes.len().saturating_sub(crate::crypto::ASYM_CIPHERTEXT_LEN).max(1),
                    _ => bytes.len(),
                };
                let bit = (f.bit % (span as u64 * 8)) as usize;
                bytes[bit / 8] ^= 1 << (bit % 8);
                tampered = true;
            }
            self.fault_seen += 1;
        }
        self.trace.push(TraceEntry::OffChain {
            time: self.now(),
            from,
            to,
            msg: kind,
            phase: kind.phase(),
            bytes: bytes.len(),
            payload,
            tampered,
        });
        self.queue.push_back(Wire { from, to, kind, bytes });
        self.progress = true;
    }

    fn take_inbox(&mut self, who: PartyId) -> Vec<Wire> {
        let (mine, rest): (VecDeque<Wire>, VecDeque<Wire>) = self.queue.drain(..).partition(|w| w.to == who);
        self.queue = rest;
        if !mine.is_empty() {
            self.progress = true;
        }
        mine.into()
    }

    pub fn controller_addr(&self) -> Result<ContractAddr, SimError> {
        self.ledger.named(controller::NAME).ok_or_else(|| SimError::Protocol("controller not deployed".into()))
    }

    pub fn controller(&self) -> Result<&Controller, SimError> {
        let addr = self.controller_addr()?;
        self.ledger.contract::<Controller>(&addr).ok_or_else(|| SimError::Protocol("controller missing".into()))
    }

    /// Free-form protocol event recorded for the report.
    pub fn note(&mut self, who: PartyId, what: impl Into<String>) {
        self.events.push(format!("t={} {who}: {}", self.now(), what.into()));
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn conservation_failures(&self) -> &[u64] {
        &self.conservation_failures
    }

    pub fn export_trace(&self) -> String {
        self.trace.iter().map(|e| serde_json::to_string(e).expect("trace entries serialize") + "\n").collect()
    }
}

/// Deterministic per-actor RNG.
pub fn actor_rng(seed: u64, label: &str, index: u32) -> ChaCha20Rng {
    let d = hash_parts(&[b"fairshare/rng", &seed.to_be_bytes(), label.as_bytes(), &index.to_be_bytes()]);
    ChaCha20Rng::from_seed(d.0)
}

pub enum Actor {
    Device(Box<fog::DeviceActor>),
    Fog(Box<Fog>),
    Cloud(Box<Cloud>),
    Client(Box<Client>),
}

impl Actor {
    pub fn id(&self) -> PartyId {
        match self {
            Actor::Device(d) => d.id,
            Actor::Fog(f) => f.id,
            Actor::Cloud(c) => c.id,
            Actor::Client(c) => c.id,
        }
    }

    fn step(&mut self, w: &mut World, inbox: Vec<Wire>) -> Result<(), SimError> {
        match self {
            Actor::Device(d) => d.step(w, inbox),
            Actor::Fog(f) => f.step(w, inbox),
            Actor::Cloud(c) => c.step(w, inbox),
            Actor::Client(c) => c.step(w, inbox),
        }
    }

    fn done(&self, w: &World) -> bool {
        match self {
            Actor::Device(d) => d.done(),
            Actor::Fog(f) => f.done(w),
            Actor::Cloud(c) => c.done(),
            Actor::Client(c) => c.done(),
        }
    }
}

/// Round-robin scheduler. A round in which nobody acts advances the clock by one tick.
pub struct Simulation {
    pub world: World,
    pub actors: Vec<Actor>,
    pub rounds: u64,
    pub idle_ticks: u64,
}

impl Simulation {
    pub fn new(world: World, actors: Vec<Actor>) -> Self {
        Simulation { world, actors, rounds: 0, idle_ticks: 0 }
    }

    pub fn run_until_quiet(&mut self, max_rounds: u64) -> Result<(), SimError> {
        for _ in 0..max_rounds {
            self.rounds += 1;
            self.world.progress = false;
            for a in self.actors.iter_mut() {
                let inbox = self.world.take_inbox(a.id());
                a.step(&mut self.world, inbox)?;
            }
            if self.world.queue.is_empty() && self.actors.iter().all(|a| a.done(&self.world)) {
                return Ok(());
            }
            if !self.world.progress {
                self.world.ledger.advance_time(1)?;
                self.idle_ticks += 1;
                let time = self.world.now();
                self.world.trace.push(TraceEntry::Tick { time });
            }
        }
        Err(SimError::Livelock(max_rounds))
    }

    pub fn fogs(&self) -> impl Iterator<Item = &Fog> {
        self.actors.iter().filter_map(|a| match a {
            Actor::Fog(f) => Some(f.as_ref()),
            _ => None,
        })
    }

    pub fn clouds(&self) -> impl Iterator<Item = &Cloud> {
        self.actors.iter().filter_map(|a| match a {
            Actor::Cloud(c) => Some(c.as_ref()),
            _ => None,
        })
    }

    pub fn clients(&self) -> impl Iterator<Item = &Client> {
        self.actors.iter().filter_map(|a| match a {
            Actor::Client(c) => Some(c.as_ref()),
            _ => None,
        })
    }

    pub fn clients_mut(&mut self) -> impl Iterator<Item = &mut Client> {
        self.actors.iter_mut().filter_map(|a| match a {
            Actor::Client(c) => Some(c.as_mut()),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_validation() {
        assert!(Profile::default().validate().is_ok());
        let bad = Profile { fog: Behavior::WithholdKey, ..Profile::default() };
        assert!(bad.validate().unwrap_err().contains("withhold-key"));
        let p = Profile { collusion: Some(Collusion::FogClient), ..Profile::default() };
        assert_eq!(p.colludes(Role::Fog), Some(Collusion::FogClient));
        assert_eq!(p.colludes(Role::Cloud), None);
    }

    #[test]
    fn behavior_names_are_kebab_case() {
        assert_eq!(Behavior::TamperReenc.to_string(), "tamper-reenc");
        assert_eq!(Outcome::AbortedUnauthorized.to_string(), "aborted-unauthorized");
        let p: Profile = toml::from_str("client = \"false-complaint\"\ncollusion = \"cloud-client\"").unwrap();
        assert_eq!(p.client, Behavior::FalseComplaint);
        assert_eq!(p.collusion, Some(Collusion::CloudClient));
    }
}
