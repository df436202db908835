use fairshare_core::harness::run::{client_id, fog_id, CLOUD_ID};
use fairshare_core::harness::{
    case_table, execute, run, run_cases, CaseId, GasPhase, HarnessError, ScenarioConfig, ScenarioReport,
};
use fairshare_core::ledger::GasSchedule;
use fairshare_core::parties::fog::StorageState;
use fairshare_core::parties::{Actor, Fault, MsgKind, Outcome, TraceEntry};
use proptest::prelude::*;

fn deltas(r: &ScenarioReport) -> [i64; 3] {
    [fog_id(0), CLOUD_ID, client_id(0)].map(|id| r.party(id).unwrap().delta_excl_gas)
}

#[test]
fn honest_run_end_to_end() {
    let ex = execute(&ScenarioConfig::default()).unwrap();
    let r = &ex.report;
    assert!(r.passed, "{:?}", r.failures());
    assert_eq!(r.tx_count, 18);
    assert_eq!(r.failed_txs, 0);
    assert_eq!(deltas(r), [320, 1030, -1350]);
    let g = &r.bytes.phases.data_generation;
    assert_eq!((g.envelopes, g.bytes, g.payload, g.overhead), (24, 9216, 2688, 6528));
    assert_eq!(r.bytes.phases.data_storage, 1024);
    assert_eq!(r.bytes.phases.data_request, 10);
    assert_eq!(r.bytes.phases.data_retrieval.bytes, 1408);
    assert_eq!(r.gas.total, 47002 + 54132 + 15323 + 3759 + 6401);
    let client = ex.sim.clients().next().unwrap();
    assert!(client.purchases.values().all(|p| p.file.is_some()));
}

#[test]
fn delivered_summary_matches_integer_oracle() {
    let ex = execute(&ScenarioConfig::default()).unwrap();
    let fog = ex.sim.fogs().next().unwrap();
    let mut readings = fog.readings.clone();
    readings.sort_by_key(|(i, _)| *i);
    // devices emit whole millidegrees, so the sums are exact in integers
    let milli: Vec<i64> = readings.iter().map(|(_, v)| (v * 1000.0).round() as i64).collect();
    assert_eq!(milli.len(), 24);
    assert!(milli.iter().all(|m| (15000..=95000).contains(m)));
    let client = ex.sim.clients().next().unwrap();
    let file = client.purchases.values().next().unwrap().file.as_ref().unwrap();
    assert_eq!(file.records.len(), 4);
    for (w, rec) in milli.chunks(6).zip(&file.records) {
        assert_eq!(rec.count, 6);
        let expected = w.iter().sum::<i64>() as f64 / 6000.0;
        assert!((rec.mean - expected).abs() < 1e-9, "{} vs {expected}", rec.mean);
    }
}

#[test]
fn case_table_is_frozen() {
    let reports = run_cases(&ScenarioConfig::default()).unwrap();
    let got: Vec<(String, [i64; 3])> = reports.iter().map(|r| (r.case.unwrap().to_string(), deltas(r))).collect();
    let want: Vec<(&str, [i64; 3])> = vec![
        ("honest", [320, 1030, -1350]),
        ("I", [-380, 1030, -650]),
        ("II", [320, -470, 150]),
        ("III", [0, 0, 0]),
        ("IV", [320, -470, 150]),
        ("V", [-380, 1030, -650]),
        ("VI", [0, 0, 0]),
        ("withhold-key", [320, -470, 150]),
        ("false-complaint", [320, 1030, -1350]),
        ("silent-after-key", [320, 1030, -1350]),
        ("tamper-file-claim", [0, 0, 0]),
    ];
    assert_eq!(got.len(), want.len());
    for ((gc, gd), (wc, wd)) in got.iter().zip(&want) {
        assert_eq!((gc.as_str(), gd), (*wc, wd));
    }
    assert!(reports.iter().all(|r| r.passed));
    let table = case_table(&reports);
    assert_eq!(table.lines().count(), 12);
    assert!(table.lines().skip(1).all(|l| l.ends_with("PASS")));
}

#[test]
fn same_seed_same_everything() {
    let cfg = ScenarioConfig { clients: 2, fogs: 2, ..ScenarioConfig::for_case(CaseId::II) };
    let a = execute(&cfg).unwrap();
    let b = execute(&cfg).unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.trace_jsonl(), b.trace_jsonl());
}

#[test]
fn zero_gas_schedule_costs_nothing() {
    let mut gas = GasSchedule::default();
    gas.calls.values_mut().for_each(|g| *g = 0);
    let r = run(&ScenarioConfig { gas: Some(gas), ..Default::default() }).unwrap();
    assert!(r.passed, "{:?}", r.failures());
    assert_eq!(r.gas.total, 0);
    assert_eq!(r.gas.fees, 0);
    assert!(r.parties.iter().all(|p| p.gas_fees == 0 && p.delta == p.delta_excl_gas));
}

#[test]
fn gas_fees_are_charged_to_senders() {
    let r = run(&ScenarioConfig::default()).unwrap();
    let spent: u64 = r.parties.iter().map(|p| p.gas_fees).sum();
    assert_eq!(spent, r.gas.fees);
    for p in &r.parties {
        assert_eq!(p.delta, p.delta_excl_gas - p.gas_fees as i64);
    }
}

#[test]
fn per_call_gas() {
    let r = run(&ScenarioConfig::default()).unwrap();
    let call = |f: &str| r.gas.per_call.get(f).map(|c| (c.calls, c.gas_per_call));
    assert_eq!(call("register_params"), Some((1, 47002)));
    assert_eq!(call("judge_create"), Some((1, 54132)));
    assert_eq!(call("register_fog"), Some((1, 5407)));
    assert_eq!(call("register_cloud"), Some((1, 4509)));
    assert_eq!(call("register_client"), Some((1, 5407)));
    assert_eq!(call("store_nonce"), Some((1, 1078)));
    assert_eq!(call("store_meta1"), Some((1, 1725)));
    assert_eq!(call("store_access_policy"), Some((1, 956)));
    assert_eq!(call("store_meta2"), Some((1, 1698)));
    assert_eq!(r.gas.per_phase[&GasPhase::DataStorage], 1078 + 1725 + 956);
}

#[test]
fn request_size_follows_token() {
    let plain = run(&ScenarioConfig::default()).unwrap();
    assert_eq!(plain.bytes.phases.data_request, 10);
    let token = run(&ScenarioConfig { request_token: "abc".into(), ..Default::default() }).unwrap();
    assert_eq!(token.bytes.phases.data_request, 13);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        ScenarioConfig { file_size: 0, ..Default::default() },
        ScenarioConfig { file_size: 20, ..Default::default() },
        ScenarioConfig { clients: 0, ..Default::default() },
        ScenarioConfig { lambda: 100, ..Default::default() },
        ScenarioConfig { ts: 0, ..Default::default() },
        ScenarioConfig { window: 0, ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(run(&cfg), Err(HarnessError::Config(_))), "{cfg:?}");
    }
    assert!(matches!(ScenarioConfig::from_toml("no_such_field = 1"), Err(HarnessError::Config(_))));
    let cfg = ScenarioConfig::from_toml("seed = 9\ncase = \"II\"\n[fees]\np1 = 2000").unwrap();
    assert_eq!((cfg.seed, cfg.case, cfg.fees.p1, cfg.fees.p2), (9, Some(CaseId::II), 2000, 500));
}

fn with_fault(kind: MsgKind, nth: usize) -> fairshare_core::harness::Execution {
    execute(&ScenarioConfig { fault: Some(Fault { kind, nth, bit: 77 }), ..Default::default() }).unwrap()
}

#[test]
fn corrupted_envelope_is_dropped() {
    let ex = with_fault(MsgKind::Envelope, 3);
    let fog = ex.sim.fogs().next().unwrap();
    assert_eq!(fog.rejected.len(), 1);
    assert_eq!(fog.readings.len(), 23);
    let device = ex.sim.actors.iter().find_map(|a| if let Actor::Device(d) = a { Some(d) } else { None }).unwrap();
    assert_eq!(device.acked, 23);
    assert!(ex.report.invariants.iter().all(|c| c.holds));
}

#[test]
fn corrupted_store_file_aborts_storage() {
    let ex = with_fault(MsgKind::StoreFile, 0);
    assert_eq!(ex.sim.fogs().next().unwrap().storage, StorageState::Aborted);
    assert_eq!(ex.report.party(CLOUD_ID).unwrap().outcomes, vec![Outcome::StorageAborted]);
    assert_eq!(deltas(&ex.report), [0, 0, 0]);
}

#[test]
fn corrupted_rekey_penalizes_the_fog() {
    let ex = with_fault(MsgKind::ReKey, 0);
    assert_eq!(deltas(&ex.report), [-380, 1030, -650]);
    assert_eq!(ex.report.party(fog_id(0)).unwrap().outcomes, vec![Outcome::Penalized]);
    assert!(ex.report.invariants.iter().all(|c| c.holds), "{:?}", ex.report.failures());
}

#[test]
fn corrupted_offer_aborts_before_payment() {
    let ex = with_fault(MsgKind::Offer, 0);
    assert_eq!(deltas(&ex.report), [20, 30, -50]);
    assert!(ex.report.parties.iter().all(|p| p.outcomes == vec![Outcome::Aborted]));
    assert_eq!(ex.report.gas.per_call.get("lock_p4").map(|c| c.calls), None);
}

#[test]
fn multi_party_honest_run() {
    let r = run(&ScenarioConfig { clients: 2, fogs: 2, ..Default::default() }).unwrap();
    assert!(r.passed, "{:?}", r.failures());
    assert_eq!(r.tx_count, 56);
    assert_eq!(r.bytes.phases.data_retrieval.sessions, 4);
    assert_eq!(r.bytes.phases.data_retrieval.bytes, 4 * 1408);
    for i in 0..2 {
        assert_eq!(r.party(fog_id(i)).unwrap().delta_excl_gas, 2 * 320);
        assert_eq!(r.party(client_id(i)).unwrap().delta_excl_gas, -2 * 1350);
    }
    assert_eq!(r.party(CLOUD_ID).unwrap().delta_excl_gas, 4 * 1030);
}

#[test]
fn trace_is_valid_jsonl() {
    let ex = execute(&ScenarioConfig::default()).unwrap();
    let entries: Vec<TraceEntry> = ex.trace_jsonl().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let on_chain = entries.iter().filter(|e| matches!(e, TraceEntry::OnChain(_))).count();
    assert_eq!(on_chain as u64, ex.report.tx_count);
    let report: serde_json::Value = serde_json::from_str(&ex.report.to_json()).unwrap();
    assert_eq!(report["tx_count"], 18);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn any_seed_any_case_conserves_and_matches(seed in 0u64..1_000_000, case in 0usize..CaseId::ALL.len()) {
        let r = run(&ScenarioConfig { seed, ..ScenarioConfig::for_case(CaseId::ALL[case]) }).unwrap();
        prop_assert!(r.passed, "{:?}", r.failures());
        prop_assert_eq!(r.parties.iter().map(|p| p.delta).sum::<i64>() + r.gas.fees as i64, 0);
    }
}
