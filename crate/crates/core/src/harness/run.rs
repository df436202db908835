use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;

use super::accounting::{byte_accounting, gas_accounting, ByteReport, GasReport};
use super::cases::CaseId;
use super::config::ScenarioConfig;
use super::{params_for, HarnessError};
use crate::contracts::{controller, Controller, ControllerTerms, Phase};
use crate::crypto::hash;
use crate::ledger::{Coins, Ledger, TxRequest};
use crate::parties::client::{ClientConfig, FileLeg, KeyLeg};
use crate::parties::cloud::CloudConfig;
use crate::parties::fog::{DeviceActor, FogConfig};
use crate::parties::{
    actor_rng, Actor, Behavior, Client, Cloud, Collusion, DeviceIdentity, Fog, MsgKind, Outcome, Profile, Role,
    Simulation, SummaryFile, TraceEntry, World, ENVELOPE_OVERHEAD,
};
use crate::PartyId;

pub const CLOUD_ID: PartyId = PartyId(1);

pub fn fog_id(i: usize) -> PartyId {
    PartyId(10 + i as u32)
}

pub fn client_id(i: usize) -> PartyId {
    PartyId(100 + i as u32)
}

pub fn device_id(i: usize) -> PartyId {
    PartyId(1000 + i as u32)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartyReport {
    pub id: PartyId,
    pub role: Role,
    pub behavior: Behavior,
    pub collusion: Option<Collusion>,
    pub outcomes: Vec<Outcome>,
    pub initial_balance: Coins,
    pub final_balance: Coins,
    pub delta: i64,
    pub gas_fees: Coins,
    pub delta_excl_gas: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, holds: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), holds, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expectation {
    pub party: PartyId,
    pub role: Role,
    pub expected_outcome: Outcome,
    pub outcomes: Vec<Outcome>,
    pub expected_delta: i64,
    pub delta_excl_gas: i64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub case: Option<CaseId>,
    pub profile: Profile,
    pub lambda: u32,
    pub element_size: usize,
    pub file_size: usize,
    pub chunk_size: usize,
    pub fogs: usize,
    pub clients: usize,
    pub parties: Vec<PartyReport>,
    pub bytes: ByteReport,
    pub gas: GasReport,
    pub tx_count: u64,
    pub failed_txs: u64,
    pub rounds: u64,
    pub idle_ticks: u64,
    pub final_time: u64,
    pub events: Vec<String>,
    pub notes: Vec<String>,
    pub invariants: Vec<Check>,
    pub expectations: Vec<Expectation>,
    pub trace_digest: String,
    pub state_hash: String,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn party(&self, id: PartyId) -> Option<&PartyReport> {
        self.parties.iter().find(|p| p.id == id)
    }

    pub fn failures(&self) -> Vec<String> {
        let inv = self.invariants.iter().filter(|c| !c.holds).map(|c| format!("{}: {}", c.name, c.detail));
        let exp = self.expectations.iter().filter(|e| !e.holds).map(|e| {
            format!(
                "{} {:?}: expected {} / {:+}, got {:?} / {:+}",
                e.party, e.role, e.expected_outcome, e.expected_delta, e.outcomes, e.delta_excl_gas
            )
        });
        inv.chain(exp).collect()
    }
}

/// Finished scenario with the simulation kept for inspection.
pub struct Execution {
    pub report: ScenarioReport,
    pub sim: Simulation,
}

impl Execution {
    pub fn trace_jsonl(&self) -> String {
        self.sim.world.export_trace()
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioReport, HarnessError> {
    execute(cfg).map(|e| e.report)
}

pub fn execute(cfg: &ScenarioConfig) -> Result<Execution, HarnessError> {
    cfg.validate()?;
    let profile = cfg.profile();
    let params = params_for(cfg.lambda, cfg.params_seed.unwrap_or(cfg.seed))?;
    let fogs: Vec<PartyId> = (0..cfg.fogs).map(fog_id).collect();
    let clients: Vec<PartyId> = (0..cfg.clients).map(client_id).collect();
    let genesis = std::iter::once(CLOUD_ID).chain(fogs.iter().copied()).chain(clients.iter().copied());
    let ledger = Ledger::new(cfg.schedule(), genesis.map(|p| (p, cfg.initial_balance)));
    let mut world = World::new(params, ledger, cfg.fault);

    let terms = ControllerTerms {
        p3: cfg.fees.p3,
        p4: cfg.fees.p4,
        ts: cfg.ts,
        min_deposit_fog: cfg.deposits.fog,
        min_deposit_cloud: cfg.deposits.cloud,
        min_deposit_client: cfg.deposits.client,
    };
    let r = world.submit(
        TxRequest::deploy(fogs[0], Box::new(Controller::new()), "register_params")
            .args(controller::deploy_args(&world.params.digest(), &terms)),
    )?;
    let s = r.created.filter(|_| r.succeeded()).ok_or_else(|| setup_failed("controller deployment", &r.error))?;

    let policy: BTreeSet<PartyId> = if profile.client == Behavior::UnauthorizedRequest {
        BTreeSet::new()
    } else {
        clients.iter().copied().collect()
    };
    let mut actors = Vec::new();
    let mut fog_actors = Vec::new();
    for (i, &id) in fogs.iter().enumerate() {
        let mut rng = actor_rng(cfg.seed, "device", i as u32);
        let identity = DeviceIdentity::generate(format!("device-{i}").as_bytes(), &mut rng);
        let fcfg = FogConfig {
            cloud: CLOUD_ID,
            chunk_size: cfg.chunk_size,
            file_len: cfg.file_size,
            window: cfg.window,
            expected_readings: cfg.readings,
            policy: policy.clone(),
            p4: cfg.fees.p4,
            ts: cfg.ts,
        };
        let collusion = profile.colludes(Role::Fog);
        let fog = Fog::new(id, profile.fog, collusion, &identity, fcfg, &world, actor_rng(cfg.seed, "fog", i as u32));
        let mut rrng = actor_rng(cfg.seed, "readings", i as u32);
        let readings = (0..cfg.readings).map(|_| rrng.gen_range(15_000..=95_000) as f64 / 1000.0).collect();
        actors.push(Actor::Device(Box::new(DeviceActor::new(device_id(i), identity, &fog, readings, rng))));
        fog_actors.push(fog);
    }
    let cloud = Cloud::new(
        CLOUD_ID,
        profile.cloud,
        profile.colludes(Role::Cloud),
        CloudConfig {
            chunk_size: cfg.chunk_size,
            p1: cfg.fees.p1,
            p2: cfg.fees.p2,
            ts: cfg.ts,
            eps1: cfg.fees.eps1,
            eps2: cfg.fees.eps2,
        },
        actor_rng(cfg.seed, "cloud", 0),
    );
    let client_actors: Vec<Client> = clients
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let ccfg = ClientConfig {
                cloud: CLOUD_ID,
                eps1: cfg.fees.eps1,
                ts: cfg.ts,
                token: cfg.request_token.as_bytes().to_vec(),
            };
            Client::new(
                id,
                profile.client,
                profile.colludes(Role::Client),
                ccfg,
                &world,
                actor_rng(cfg.seed, "client", i as u32),
            )
        })
        .collect();

    for f in &fog_actors {
        let key = f.registration_key(&world);
        register(&mut world, f.id, s, "register_fog", key, cfg.deposits.fog)?;
    }
    register(&mut world, CLOUD_ID, s, "register_cloud", vec![], cfg.deposits.cloud)?;
    for c in &client_actors {
        let key = c.registration_key(&world);
        register(&mut world, c.id, s, "register_client", key, cfg.deposits.client)?;
    }

    let dids: Vec<_> = fog_actors.iter().map(|f| f.did).collect();
    actors.extend(fog_actors.into_iter().map(|f| Actor::Fog(Box::new(f))));
    actors.push(Actor::Cloud(Box::new(cloud)));
    let mut sim = Simulation::new(world, actors);
    sim.run_until_quiet(cfg.max_rounds)?;

    for mut c in client_actors {
        c.request(dids.iter().copied());
        sim.actors.push(Actor::Client(Box::new(c)));
    }
    sim.run_until_quiet(cfg.max_rounds.saturating_sub(sim.rounds).max(1))?;

    let report = build_report(cfg, &profile, &sim)?;
    Ok(Execution { report, sim })
}

fn setup_failed(what: &str, err: &Option<crate::ledger::ContractError>) -> HarnessError {
    let why = err.as_ref().map(|e| e.to_string()).unwrap_or_default();
    HarnessError::Setup(format!("{what} failed: {why}"))
}

fn register(
    w: &mut World,
    who: PartyId,
    s: crate::ContractAddr,
    function: &str,
    key: Vec<u8>,
    deposit: Coins,
) -> Result<(), HarnessError> {
    let r = w.submit(TxRequest::call(who, s, function).data(key).value(deposit))?;
    if r.succeeded() {
        Ok(())
    } else {
        Err(setup_failed(function, &r.error))
    }
}

fn build_report(cfg: &ScenarioConfig, profile: &Profile, sim: &Simulation) -> Result<ScenarioReport, HarnessError> {
    let w = &sim.world;
    let ledger = &w.ledger;
    let log = ledger.log();
    let bytes = byte_accounting(w.trace());
    let gas = gas_accounting(log, ledger.schedule(), cfg.usd_per_gas)?;

    let party = |id: PartyId, role: Role, behavior: Behavior, outcomes: Vec<Outcome>| {
        let final_balance = ledger.balance(id).unwrap_or(0);
        let gas_fees: Coins = log.iter().filter(|t| t.sender == id).map(|t| t.fee).sum();
        let delta = final_balance as i64 - cfg.initial_balance as i64;
        PartyReport {
            id,
            role,
            behavior,
            collusion: profile.colludes(role),
            outcomes,
            initial_balance: cfg.initial_balance,
            final_balance,
            delta,
            gas_fees,
            delta_excl_gas: delta + gas_fees as i64,
        }
    };
    let mut parties = Vec::new();
    for c in sim.clouds() {
        parties.push(party(c.id, Role::Cloud, c.behavior, c.outcomes()));
    }
    for f in sim.fogs() {
        parties.push(party(f.id, Role::Fog, f.behavior, f.outcomes()));
    }
    for c in sim.clients() {
        parties.push(party(c.id, Role::Client, c.behavior, c.outcomes()));
    }

    let invariants = invariants(cfg, sim, &bytes, &parties);
    let expectations = expectations(cfg, &parties);
    let passed = invariants.iter().all(|c| c.holds) && expectations.iter().all(|e| e.holds);

    let mut notes = Vec::new();
    if log.iter().any(|t| t.function == "transfer" && t.sender == CLOUD_ID && t.value == cfg.fees.eps1)
        && w.trace().iter().any(|e| matches!(e, TraceEntry::OffChain { msg: MsgKind::Denied, .. }))
    {
        notes.push("service fee eps1 refunded to the client after a denied request".into());
    }
    if log.iter().any(|t| t.function == "judge_timeout_claim" && t.succeeded()) {
        notes.push("buyer stayed silent after the key reveal; the timeout paid the seller".into());
    }

    Ok(ScenarioReport {
        seed: cfg.seed,
        case: cfg.case,
        profile: *profile,
        lambda: cfg.lambda,
        element_size: w.params.element_size(),
        file_size: cfg.file_size,
        chunk_size: cfg.chunk_size,
        fogs: cfg.fogs,
        clients: cfg.clients,
        parties,
        bytes,
        gas,
        tx_count: log.len() as u64,
        failed_txs: log.iter().filter(|t| !t.succeeded()).count() as u64,
        rounds: sim.rounds,
        idle_ticks: sim.idle_ticks,
        final_time: ledger.now(),
        events: w.events().to_vec(),
        notes,
        invariants,
        expectations,
        trace_digest: hash(w.export_trace().as_bytes()).to_hex(),
        state_hash: ledger.state_hash().to_hex(),
        passed,
    })
}

fn invariants(cfg: &ScenarioConfig, sim: &Simulation, bytes: &ByteReport, parties: &[PartyReport]) -> Vec<Check> {
    let w = &sim.world;
    let ledger = &w.ledger;
    let mut out = Vec::new();

    let failures = w.conservation_failures();
    out.push(Check::new(
        "coin-conservation",
        failures.is_empty() && ledger.is_conserved(),
        format!("{} transactions checked, violations at {failures:?}", ledger.log().len()),
    ));

    let replayed = ledger.replay().state_hash();
    out.push(Check::new(
        "replay-state-hash",
        replayed == ledger.state_hash(),
        format!("replayed {}", replayed.to_hex()),
    ));

    out.push(Check::new("escrow-drained", ledger.total_escrow() == 0, format!("{} coins held", ledger.total_escrow())));

    let g = &bytes.phases.data_generation;
    out.push(Check::new(
        "envelope-overhead",
        g.overhead == ENVELOPE_OVERHEAD as u64 * g.envelopes,
        format!("{} bytes over {} envelopes", g.overhead, g.envelopes),
    ));

    let rekey_len = 3 * w.params.element_size();
    let mut rekey_sizes = BTreeSet::new();
    let mut locks: BTreeMap<PartyId, usize> = BTreeMap::new();
    let mut sent: BTreeMap<PartyId, usize> = BTreeMap::new();
    let mut ordered = true;
    for e in w.trace() {
        match e {
            TraceEntry::OnChain(tx) if tx.function == "lock_p4" && tx.succeeded() => {
                *locks.entry(tx.sender).or_default() += 1;
            }
            TraceEntry::OffChain { msg: MsgKind::ReKey, from, bytes, .. } => {
                rekey_sizes.insert(*bytes);
                let n = sent.entry(*from).or_default();
                *n += 1;
                ordered &= *n <= locks.get(from).copied().unwrap_or(0);
            }
            _ => {}
        }
    }
    out.push(Check::new(
        "rekey-size",
        rekey_sizes.iter().all(|b| *b == rekey_len),
        format!("sizes {rekey_sizes:?}, expected {rekey_len}"),
    ));
    out.push(Check::new(
        "p4-locked-before-rekey",
        ordered,
        format!("{} re-encrypted keys sent", sent.values().sum::<usize>()),
    ));

    let judges_closed = ledger
        .contracts()
        .filter_map(|(_, c)| c.as_any().downcast_ref::<crate::contracts::Judge>())
        .all(|j| j.phase.is_terminal());
    let key_legs_closed = w
        .controller()
        .map(|c| {
            sim.fogs()
                .flat_map(|f| f.key_states().map(|(id, _, _)| *id).collect::<Vec<_>>())
                .all(|id| c.escrow(&id).is_none_or(|e| e.status != crate::contracts::EscrowStatus::Open))
        })
        .unwrap_or(false);
    out.push(Check::new(
        "legs-settled",
        judges_closed && key_legs_closed,
        format!("judges closed: {judges_closed}, key escrows closed: {key_legs_closed}"),
    ));

    let storage_ok = sim.fogs().all(|f| {
        f.stored.as_ref().is_none_or(|s| {
            crate::exchange::file_digest(&s.f_prime, cfg.chunk_size).is_ok_and(|h| h == s.h1)
                && s.f_prime.len() == cfg.file_size
        })
    });
    out.push(Check::new("stored-file-digest", storage_ok, format!("|f'| = {}", cfg.file_size)));

    let mut delivered = true;
    for c in sim.clients() {
        for p in c.purchases.values() {
            if let Some(file) = &p.file {
                let fog = sim.fogs().find(|f| f.id == p.fog);
                let original = fog.and_then(|f| f.stored.as_ref()).and_then(|s| SummaryFile::decode(&s.f).ok());
                delivered &= original.as_ref() == Some(file);
            }
        }
    }
    out.push(Check::new("delivered-file-matches", delivered, "client plaintext equals the fog's summary file"));

    // a sender whose message was corrupted in transit looks like a cheater to everyone else
    let tampered: BTreeSet<PartyId> = w
        .trace()
        .iter()
        .filter_map(|e| match e {
            TraceEntry::OffChain { from, tampered: true, .. } => Some(*from),
            _ => None,
        })
        .collect();
    let mut no_loss = Vec::new();
    for p in parties {
        let honest = p.behavior == Behavior::Honest && p.collusion.is_none() && !tampered.contains(&p.id);
        if !honest {
            continue;
        }
        let floor = match p.role {
            Role::Fog | Role::Cloud => 0,
            Role::Client => {
                let c = sim.clients().find(|c| c.id == p.id).expect("listed client");
                -c.purchases
                    .values()
                    .map(|pu| {
                        let file = if pu.file_leg == FileLeg::Closed(Phase::SettledSeller) { cfg.fees.p1 } else { 0 };
                        let key = if pu.key_leg == KeyLeg::Verified { cfg.fees.p3 } else { 0 };
                        (cfg.fees.eps1 + file + key) as i64
                    })
                    .sum::<i64>()
            }
        };
        if p.delta_excl_gas < floor {
            no_loss.push(format!("{} {:+} < {floor}", p.id, p.delta_excl_gas));
        }
    }
    out.push(Check::new("honest-no-loss", no_loss.is_empty(), no_loss.join("; ")));
    out
}

fn expectations(cfg: &ScenarioConfig, parties: &[PartyReport]) -> Vec<Expectation> {
    if cfg.fault.is_some() {
        return Vec::new();
    }
    let profile = cfg.profile();
    let Some(case) = cfg.case.or_else(|| CaseId::ALL.into_iter().find(|c| c.profile() == profile)) else {
        return Vec::new();
    };
    let (nf, nc) = (cfg.fogs as i64, cfg.clients as i64);
    parties
        .iter()
        .map(|p| {
            let sessions = match p.role {
                Role::Fog => nc,
                Role::Cloud => nf * nc,
                Role::Client => nf,
            };
            let expected_outcome = case.expected_outcome(p.role);
            let expected_delta = sessions * case.session_delta(p.role, &cfg.fees);
            let holds = !p.outcomes.is_empty()
                && p.outcomes.iter().all(|o| *o == expected_outcome)
                && p.delta_excl_gas == expected_delta;
            Expectation {
                party: p.id,
                role: p.role,
                expected_outcome,
                outcomes: p.outcomes.clone(),
                expected_delta,
                delta_excl_gas: p.delta_excl_gas,
                holds,
            }
        })
        .collect()
}
