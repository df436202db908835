//! Deterministic single-writer ledger hosting contract state machines.
//!
//! Every accepted transaction occupies one logical tick. Gas is charged up
//! front from the schedule, burned, and kept even when the call fails; a failed
//! call leaves balances and contract state exactly as before.

use std::any::Any;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecError;
use crate::crypto::{hash_parts, Digest};
use crate::{ContractAddr, PartyId};

pub type Coins = u64;
pub type Gas = u64;
pub type Time = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("contract already initialized")]
    AlreadyInitialized,
    #[error("caller {0} is not authorized")]
    Unauthorized(PartyId),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("value already stored: {0}")]
    AlreadyStored(String),
    #[error("deposit {got} below minimum {min}")]
    UnderDeposit { got: Coins, min: Coins },
    #[error("attached value {got}, expected {expected}")]
    WrongValue { got: Coins, expected: Coins },
    #[error("operation not allowed in phase {0}")]
    WrongPhase(String),
    #[error("deadline not reached")]
    DeadlineNotReached,
    #[error("deadline passed")]
    DeadlinePassed,
    #[error("no access grant for this request")]
    NotGranted,
    #[error("commitment does not match roots")]
    CommitmentMismatch,
    #[error("malformed complaint: {0}")]
    ComplaintInvalid(String),
    #[error("complaint does not prove misbehavior")]
    ComplaintRejected,
    #[error("escrow holds {have}, cannot pay {want}")]
    InsufficientEscrow { have: Coins, want: Coins },
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("bad arguments: {0}")]
    BadArgs(#[from] CodecError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("unknown sender {0}")]
    UnknownSender(PartyId),
    #[error("unknown target {0}")]
    UnknownTarget(String),
    #[error("function {0} has no gas schedule entry")]
    UnscheduledFunction(String),
    #[error("balance {have} does not cover {need}")]
    InsufficientBalance { need: Coins, have: Coins },
    #[error("time must advance by a positive amount")]
    ZeroTimeAdvance,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("view failed: {0}")]
    View(ContractError),
}

/// Gas units per function plus the coin price of one unit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub gas_price: Coins,
    pub calls: BTreeMap<String, Gas>,
}

impl Default for GasSchedule {
    fn default() -> Self {
        let entries: [(&str, Gas); 23] = [
            ("register_params", 47002),
            ("judge_create", 54132),
            ("register_fog", 5407),
            ("register_cloud", 4509),
            ("register_client", 5407),
            ("store_meta1", 1725),
            ("store_nonce", 1078),
            ("store_access_policy", 956),
            ("update_access_policy", 956),
            ("store_meta2", 1698),
            ("compare_access_policy", 0),
            ("verify_key_hash", 0),
            ("lock_p3", 937),
            ("lock_p4", 937),
            ("reclaim_p3", 812),
            ("judge_accept", 1043),
            ("judge_reveal_key", 1102),
            ("judge_decide", 684),
            ("judge_complain", 2310),
            ("judge_timeout_claim", 812),
            ("judge_abort", 640),
            ("judge_refund", 812),
            ("transfer", 0),
        ];
        GasSchedule { gas_price: 1, calls: entries.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }
}

impl GasSchedule {
    /// Same functions, all costs zero.
    pub fn zeroed() -> Self {
        let mut s = Self::default();
        s.calls.values_mut().for_each(|v| *v = 0);
        s
    }

    pub fn gas(&self, function: &str) -> Option<Gas> {
        self.calls.get(function).copied()
    }
}

/// Borrowed view of a call handed to a contract.
#[derive(Debug, Clone, Copy)]
pub struct Call<'a> {
    pub function: &'a str,
    pub args: &'a [u8],
    pub data: &'a [u8],
}

/// Execution environment for one contract call.
///
/// Payouts are staged and only applied if the call succeeds. Other contracts
/// are visible read-only.
pub struct CallContext<'a> {
    sender: PartyId,
    this: ContractAddr,
    value: Coins,
    now: Time,
    seq: u64,
    escrow: Coins,
    payouts: Vec<(PartyId, Coins)>,
    others: &'a BTreeMap<ContractAddr, Box<dyn Contract>>,
    names: &'a BTreeMap<String, ContractAddr>,
}

impl<'a> CallContext<'a> {
    pub fn sender(&self) -> PartyId {
        self.sender
    }

    pub fn this(&self) -> ContractAddr {
        self.this
    }

    /// Coins attached to this call.
    pub fn value(&self) -> Coins {
        self.value
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Coins currently held by this contract, attached value included.
    pub fn escrow(&self) -> Coins {
        self.escrow
    }

    pub fn pay(&mut self, to: PartyId, amount: Coins) -> Result<(), ContractError> {
        if amount > self.escrow {
            return Err(ContractError::InsufficientEscrow { have: self.escrow, want: amount });
        }
        self.escrow -= amount;
        if amount > 0 {
            self.payouts.push((to, amount));
        }
        Ok(())
    }

    pub fn contract<T: 'static>(&self, addr: &ContractAddr) -> Option<&T> {
        self.others.get(addr).and_then(|c| c.as_any().downcast_ref::<T>())
    }

    /// Singleton contract registered under `name`.
    pub fn lookup<T: 'static>(&self, name: &str) -> Option<(ContractAddr, &T)> {
        let addr = *self.names.get(name)?;
        self.contract::<T>(&addr).map(|c| (addr, c))
    }
}

pub trait Contract: Any + Send + Sync {
    fn kind(&self) -> &'static str;

    /// Name under which at most one instance may exist.
    fn singleton(&self) -> Option<&'static str> {
        None
    }

    fn execute(&mut self, ctx: &mut CallContext<'_>, call: Call<'_>) -> Result<Vec<u8>, ContractError>;

    /// Gas-free query.
    fn view(&self, function: &str, args: &[u8]) -> Result<Vec<u8>, ContractError>;

    /// Raw storage lookup.
    fn read(&self, key: &[u8]) -> Option<Vec<u8>>;

    fn encode_state(&self) -> Vec<u8>;

    fn boxed_clone(&self) -> Box<dyn Contract>;

    fn as_any(&self) -> &dyn Any;
}

impl Clone for Box<dyn Contract> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

impl std::fmt::Debug for dyn Contract {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Contract({})", self.kind())
    }
}

#[derive(Clone, Debug)]
pub enum Target {
    Contract(ContractAddr),
    Party(PartyId),
    Deploy(Box<dyn Contract>),
}

#[derive(Clone, Debug)]
pub struct TxRequest {
    pub sender: PartyId,
    pub target: Target,
    pub function: String,
    pub args: Vec<u8>,
    /// Protocol message carried on chain; counted in byte accounting.
    pub data: Vec<u8>,
    pub value: Coins,
}

impl TxRequest {
    pub fn call(sender: PartyId, addr: ContractAddr, function: &str) -> Self {
        Self::new(sender, Target::Contract(addr), function)
    }

    pub fn deploy(sender: PartyId, code: Box<dyn Contract>, function: &str) -> Self {
        Self::new(sender, Target::Deploy(code), function)
    }

    pub fn transfer(sender: PartyId, to: PartyId, value: Coins) -> Self {
        Self::new(sender, Target::Party(to), "transfer").value(value)
    }

    fn new(sender: PartyId, target: Target, function: &str) -> Self {
        TxRequest { sender, target, function: function.into(), args: vec![], data: vec![], value: 0 }
    }

    pub fn args(mut self, args: Vec<u8>) -> Self {
        self.args = args;
        self
    }

    pub fn data(mut self, data: Vec<u8>) -> Self {
        self.data = data;
        self
    }

    pub fn value(mut self, value: Coins) -> Self {
        self.value = value;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Receipt {
    pub seq: u64,
    pub time: Time,
    pub gas_used: Gas,
    pub fee: Coins,
    pub output: Vec<u8>,
    pub error: Option<ContractError>,
    pub created: Option<ContractAddr>,
}

impl Receipt {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Exported form of one executed transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub seq: u64,
    pub time: Time,
    pub sender: PartyId,
    pub target: String,
    pub function: String,
    pub gas_used: Gas,
    pub fee: Coins,
    pub value: Coins,
    pub data_len: usize,
    pub output_len: usize,
    pub status: String,
    /// Net coin movement per account, gas included.
    pub deltas: BTreeMap<String, i64>,
}

impl TxRecord {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }

    /// Bytes this transaction put on chain.
    pub fn onchain_bytes(&self) -> usize {
        if self.succeeded() {
            self.data_len + self.output_len
        } else {
            0
        }
    }
}

#[derive(Clone, Debug)]
enum Event {
    Tx(TxRequest),
    Advance(Time),
}

#[derive(Clone, Debug)]
pub struct Ledger {
    schedule: GasSchedule,
    genesis: Vec<(PartyId, Coins)>,
    genesis_total: u128,
    accounts: BTreeMap<PartyId, Coins>,
    contracts: BTreeMap<ContractAddr, Box<dyn Contract>>,
    escrow: BTreeMap<ContractAddr, Coins>,
    names: BTreeMap<String, ContractAddr>,
    burned: Coins,
    now: Time,
    next_seq: u64,
    log: Vec<TxRecord>,
    events: Vec<Event>,
}

impl Ledger {
    pub fn new(schedule: GasSchedule, genesis: impl IntoIterator<Item = (PartyId, Coins)>) -> Self {
        let genesis: Vec<_> = genesis.into_iter().collect();
        let accounts: BTreeMap<_, _> = genesis.iter().copied().collect();
        let genesis_total = accounts.values().map(|v| *v as u128).sum();
        Ledger {
            schedule,
            genesis,
            genesis_total,
            accounts,
            contracts: BTreeMap::new(),
            escrow: BTreeMap::new(),
            names: BTreeMap::new(),
            burned: 0,
            now: 0,
            next_seq: 0,
            log: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn balance(&self, p: PartyId) -> Option<Coins> {
        self.accounts.get(&p).copied()
    }

    pub fn escrow_of(&self, addr: &ContractAddr) -> Coins {
        self.escrow.get(addr).copied().unwrap_or(0)
    }

    pub fn total_escrow(&self) -> Coins {
        self.escrow.values().sum()
    }

    pub fn burned(&self) -> Coins {
        self.burned
    }

    pub fn genesis_total(&self) -> u128 {
        self.genesis_total
    }

    /// Balances, escrows and burned gas against the genesis supply.
    pub fn is_conserved(&self) -> bool {
        let live: u128 = self.accounts.values().map(|v| *v as u128).sum::<u128>()
            + self.escrow.values().map(|v| *v as u128).sum::<u128>()
            + self.burned as u128;
        live == self.genesis_total
    }

    pub fn log(&self) -> &[TxRecord] {
        &self.log
    }

    pub fn export_jsonl(&self) -> String {
        self.log.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect()
    }

    pub fn named(&self, name: &str) -> Option<ContractAddr> {
        self.names.get(name).copied()
    }

    pub fn contract<T: 'static>(&self, addr: &ContractAddr) -> Option<&T> {
        self.contracts.get(addr).and_then(|c| c.as_any().downcast_ref::<T>())
    }

    pub fn contracts(&self) -> impl Iterator<Item = (&ContractAddr, &dyn Contract)> {
        self.contracts.iter().map(|(a, c)| (a, c.as_ref()))
    }

    pub fn read(&self, addr: &ContractAddr, key: &[u8]) -> Result<Vec<u8>, LedgerError> {
        let c = self.contracts.get(addr).ok_or_else(|| LedgerError::UnknownTarget(addr.to_string()))?;
        c.read(key).ok_or_else(|| LedgerError::NotFound(hex::encode(key)))
    }

    pub fn view(&self, addr: &ContractAddr, function: &str, args: &[u8]) -> Result<Vec<u8>, LedgerError> {
        let c = self.contracts.get(addr).ok_or_else(|| LedgerError::UnknownTarget(addr.to_string()))?;
        c.view(function, args).map_err(LedgerError::View)
    }

    pub fn advance_time(&mut self, dt: Time) -> Result<Time, LedgerError> {
        if dt == 0 {
            return Err(LedgerError::ZeroTimeAdvance);
        }
        self.now += dt;
        self.events.push(Event::Advance(dt));
        Ok(self.now)
    }

    pub fn submit(&mut self, tx: TxRequest) -> Result<Receipt, LedgerError> {
        let have = self.balance(tx.sender).ok_or(LedgerError::UnknownSender(tx.sender))?;
        let gas =
            self.schedule.gas(&tx.function).ok_or_else(|| LedgerError::UnscheduledFunction(tx.function.clone()))?;
        let fee = gas * self.schedule.gas_price;
        let need = fee + tx.value;
        if have < need {
            return Err(LedgerError::InsufficientBalance { need, have });
        }
        match &tx.target {
            Target::Contract(a) if !self.contracts.contains_key(a) => {
                return Err(LedgerError::UnknownTarget(a.to_string()));
            }
            Target::Party(p) if !self.accounts.contains_key(p) => {
                return Err(LedgerError::UnknownTarget(p.to_string()));
            }
            Target::Party(_) if tx.function != "transfer" => {
                return Err(LedgerError::UnknownTarget(format!("{} on a party", tx.function)));
            }
            _ => {}
        }

        let seq = self.next_seq;
        let time = self.now;
        self.events.push(Event::Tx(tx.clone()));
        let before = self.snapshot_balances();

        *self.accounts.get_mut(&tx.sender).expect("checked") -= fee;
        self.burned += fee;

        let (target_name, result) = match tx.target {
            Target::Party(to) => {
                *self.accounts.get_mut(&tx.sender).expect("checked") -= tx.value;
                *self.accounts.get_mut(&to).expect("checked") += tx.value;
                (to.to_string(), Ok((Vec::new(), None)))
            }
            Target::Contract(addr) => {
                let r = self.run(addr, None, tx.sender, &tx.function, &tx.args, &tx.data, tx.value, seq);
                (addr.to_string(), r.map(|o| (o, None)))
            }
            Target::Deploy(code) => {
                let addr = ContractAddr::derive(tx.sender, seq);
                let name = format!("deploy:{}@{}", code.kind(), addr);
                let r = match code.singleton() {
                    Some(n) if self.names.contains_key(n) => Err(ContractError::AlreadyInitialized),
                    _ => self
                        .run(addr, Some(code), tx.sender, &tx.function, &tx.args, &tx.data, tx.value, seq)
                        .map(|o| (o, Some(addr))),
                };
                (name, r)
            }
        };

        let (output, error, created) = match result {
            Ok((o, c)) => (o, None, c),
            Err(e) => (Vec::new(), Some(e), None),
        };
        let deltas = self.diff_balances(&before);
        self.log.push(TxRecord {
            seq,
            time,
            sender: tx.sender,
            target: target_name,
            function: tx.function.clone(),
            gas_used: gas,
            fee,
            value: tx.value,
            data_len: tx.data.len(),
            output_len: output.len(),
            status: error.as_ref().map_or_else(|| "ok".to_string(), |e| e.to_string()),
            deltas,
        });
        self.next_seq += 1;
        self.now += 1;
        debug_assert!(self.is_conserved());
        Ok(Receipt { seq, time, gas_used: gas, fee, output, error, created })
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        addr: ContractAddr,
        fresh: Option<Box<dyn Contract>>,
        sender: PartyId,
        function: &str,
        args: &[u8],
        data: &[u8],
        value: Coins,
        seq: u64,
    ) -> Result<Vec<u8>, ContractError> {
        let existing = fresh.is_none();
        let original = match fresh {
            Some(c) => c,
            None => self.contracts.remove(&addr).expect("target existence checked"),
        };
        let mut working = original.boxed_clone();
        let held = self.escrow_of(&addr);
        let mut ctx = CallContext {
            sender,
            this: addr,
            value,
            now: self.now,
            seq,
            escrow: held + value,
            payouts: Vec::new(),
            others: &self.contracts,
            names: &self.names,
        };
        let result = working.execute(&mut ctx, Call { function, args, data });
        let escrow_after = ctx.escrow;
        let payouts = std::mem::take(&mut ctx.payouts);
        match result {
            Ok(out) => {
                *self.accounts.get_mut(&sender).expect("sender exists") -= value;
                for (to, amount) in payouts {
                    *self.accounts.entry(to).or_insert(0) += amount;
                }
                self.escrow.insert(addr, escrow_after);
                if let Some(n) = working.singleton() {
                    self.names.entry(n.to_string()).or_insert(addr);
                }
                self.contracts.insert(addr, working);
                Ok(out)
            }
            Err(e) => {
                if existing {
                    self.contracts.insert(addr, original);
                }
                Err(e)
            }
        }
    }

    fn snapshot_balances(&self) -> BTreeMap<String, Coins> {
        let mut m: BTreeMap<String, Coins> = self.accounts.iter().map(|(p, v)| (p.to_string(), *v)).collect();
        for (a, v) in &self.escrow {
            m.insert(format!("contract:{a}"), *v);
        }
        m.insert("burned".into(), self.burned);
        m
    }

    fn diff_balances(&self, before: &BTreeMap<String, Coins>) -> BTreeMap<String, i64> {
        let after = self.snapshot_balances();
        after
            .iter()
            .filter_map(|(k, v)| {
                let b = before.get(k).copied().unwrap_or(0);
                (b != *v).then(|| (k.clone(), *v as i64 - b as i64))
            })
            .collect()
    }

    /// Digest of balances, contract states, escrows, burned gas and clock.
    pub fn state_hash(&self) -> Digest {
        let mut parts: Vec<Vec<u8>> = vec![b"fairshare/state".to_vec()];
        for (p, v) in &self.accounts {
            parts.push([p.to_bytes().as_slice(), &v.to_be_bytes()].concat());
        }
        for (a, c) in &self.contracts {
            parts.push(a.0.as_bytes().to_vec());
            parts.push(c.kind().as_bytes().to_vec());
            parts.push(self.escrow_of(a).to_be_bytes().to_vec());
            let st = c.encode_state();
            parts.push((st.len() as u64).to_be_bytes().to_vec());
            parts.push(st);
        }
        parts.push(self.burned.to_be_bytes().to_vec());
        parts.push(self.now.to_be_bytes().to_vec());
        parts.push(self.next_seq.to_be_bytes().to_vec());
        let refs: Vec<&[u8]> = parts.iter().map(|p| p.as_slice()).collect();
        hash_parts(&refs)
    }

    /// Re-executes every accepted event on a fresh ledger built from the same genesis.
    pub fn replay(&self) -> Ledger {
        let mut fresh = Ledger::new(self.schedule.clone(), self.genesis.iter().copied());
        for ev in &self.events {
            match ev {
                Event::Tx(tx) => {
                    fresh.submit(tx.clone()).expect("replayed transaction was accepted live");
                }
                Event::Advance(dt) => {
                    fresh.advance_time(*dt).expect("replayed advance was positive");
                }
            }
        }
        fresh
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{Reader, Writer};

    /// Counter that escrows attached coins and pays them out on request.
    #[derive(Clone, Default)]
    struct Vault {
        count: u64,
    }

    impl Contract for Vault {
        fn kind(&self) -> &'static str {
            "vault"
        }

        fn execute(&mut self, ctx: &mut CallContext<'_>, call: Call<'_>) -> Result<Vec<u8>, ContractError> {
            match call.function {
                "store_nonce" | "register_params" => {
                    self.count += 1;
                    Ok(vec![])
                }
                "judge_refund" => {
                    let mut r = Reader::new(call.args);
                    let amount = r.u64()?;
                    self.count += 1;
                    ctx.pay(ctx.sender(), amount)?;
                    Ok(vec![1])
                }
                other => Err(ContractError::UnknownFunction(other.into())),
            }
        }

        fn view(&self, _f: &str, _a: &[u8]) -> Result<Vec<u8>, ContractError> {
            Ok(self.count.to_be_bytes().to_vec())
        }

        fn read(&self, key: &[u8]) -> Option<Vec<u8>> {
            (key == b"count").then(|| self.count.to_be_bytes().to_vec())
        }

        fn encode_state(&self) -> Vec<u8> {
            self.count.to_be_bytes().to_vec()
        }

        fn boxed_clone(&self) -> Box<dyn Contract> {
            Box::new(self.clone())
        }

        fn as_any(&self) -> &dyn Any {
            self
        }
    }

    const A: PartyId = PartyId(1);
    const B: PartyId = PartyId(2);

    fn setup() -> (Ledger, ContractAddr) {
        let mut l = Ledger::new(GasSchedule::default(), [(A, 100_000), (B, 0)]);
        let r = l.submit(TxRequest::deploy(A, Box::new(Vault::default()), "register_params")).unwrap();
        (l, r.created.unwrap())
    }

    #[test]
    fn store_nonce_costs_1078() {
        let (mut l, v) = setup();
        let r = l.submit(TxRequest::call(A, v, "store_nonce")).unwrap();
        assert_eq!(r.gas_used, 1078);
        assert_eq!(l.balance(A), Some(100_000 - 47002 - 1078));
    }

    #[test]
    fn broke_sender_rejected_without_log() {
        let (mut l, v) = setup();
        let n = l.log().len();
        let e = l.submit(TxRequest::call(B, v, "store_nonce")).unwrap_err();
        assert!(matches!(e, LedgerError::InsufficientBalance { .. }));
        assert_eq!(l.log().len(), n);
        assert!(matches!(l.submit(TxRequest::call(PartyId(9), v, "store_nonce")), Err(LedgerError::UnknownSender(_))));
        assert!(matches!(l.submit(TxRequest::call(A, v, "no_such_fn")), Err(LedgerError::UnscheduledFunction(_))));
    }

    #[test]
    fn sequence_is_monotone() {
        let (mut l, v) = setup();
        let a = l.submit(TxRequest::call(A, v, "store_nonce")).unwrap();
        let b = l.submit(TxRequest::call(A, v, "store_nonce")).unwrap();
        assert_eq!(b.seq, a.seq + 1);
        assert_eq!(b.time, a.time + 1);
    }

    #[test]
    fn failed_call_keeps_gas_and_nothing_else() {
        let (mut l, v) = setup();
        let before_state = l.contract::<Vault>(&v).unwrap().count;
        let bal = l.balance(A).unwrap();
        let r = l.submit(TxRequest::call(A, v, "judge_refund").args(Writer::new().u64(5).finish()).value(3)).unwrap();
        assert!(matches!(r.error, Some(ContractError::InsufficientEscrow { .. })));
        assert_eq!(l.balance(A).unwrap(), bal - 812);
        assert_eq!(l.contract::<Vault>(&v).unwrap().count, before_state);
        assert_eq!(l.escrow_of(&v), 0);
        assert!(l.is_conserved());
    }

    #[test]
    fn escrow_round_trip() {
        let (mut l, v) = setup();
        l.submit(TxRequest::call(A, v, "judge_refund").args(Writer::new().u64(0).finish()).value(40)).unwrap();
        assert_eq!(l.escrow_of(&v), 40);
        l.submit(TxRequest::call(A, v, "judge_refund").args(Writer::new().u64(25).finish())).unwrap();
        assert_eq!(l.escrow_of(&v), 15);
        assert!(l.is_conserved());
    }

    #[test]
    fn reads_and_views_are_free() {
        let (mut l, v) = setup();
        l.submit(TxRequest::call(A, v, "store_nonce")).unwrap();
        let n = l.log().len();
        assert_eq!(l.read(&v, b"count").unwrap(), 2u64.to_be_bytes());
        assert_eq!(l.read(&v, b"count").unwrap(), 2u64.to_be_bytes());
        assert!(matches!(l.read(&v, b"nope"), Err(LedgerError::NotFound(_))));
        assert_eq!(l.view(&v, "any", &[]).unwrap(), 2u64.to_be_bytes());
        assert_eq!(l.log().len(), n);
    }

    #[test]
    fn time_advances() {
        let (mut l, _) = setup();
        assert_eq!(l.advance_time(0), Err(LedgerError::ZeroTimeAdvance));
        let mut last = l.now();
        for dt in 1..10 {
            let t = l.advance_time(dt).unwrap();
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn transfers_and_replay() {
        let (mut l, v) = setup();
        l.submit(TxRequest::transfer(A, B, 50)).unwrap();
        l.advance_time(3).unwrap();
        l.submit(TxRequest::call(A, v, "judge_refund").args(Writer::new().u64(0).finish()).value(7)).unwrap();
        assert_eq!(l.balance(B), Some(50));
        let r = l.replay();
        assert_eq!(r.state_hash(), l.state_hash());
        assert_eq!(r.export_jsonl(), l.export_jsonl());
    }

    #[test]
    fn failed_deploy_leaves_nothing() {
        let mut l = Ledger::new(GasSchedule::default(), [(A, 100_000)]);
        let r = l.submit(TxRequest::deploy(A, Box::new(Vault::default()), "store_meta1")).unwrap();
        assert!(r.error.is_some());
        assert_eq!(l.contracts().count(), 0);
        assert!(l.is_conserved());
    }
}
