//! Scenario runner: builds a population of parties from a configuration, runs
//! the protocol to quiescence and reports bytes, gas, payouts and invariants.

pub mod accounting;
pub mod cases;
pub mod config;
pub mod run;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::{pre_decrypt, pre_encrypt, pre_keygen, pre_reencrypt, pre_rekeygen, CryptoError, PublicParams};
use crate::parties::SimError;
use crate::PartyId;

pub use accounting::{byte_accounting, gas_accounting, ByteReport, ChainPhase, GasPhase, GasReport};
pub use cases::CaseId;
pub use config::{Deposits, Fees, ScenarioConfig};
pub use run::{execute, run, Check, Execution, Expectation, PartyReport, ScenarioReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("accounting error: {0}")]
    Accounting(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Public parameters, generated once per `(lambda, seed)` and shared.
pub fn params_for(lambda: u32, seed: u64) -> Result<Arc<PublicParams>, HarnessError> {
    type Cache = Mutex<BTreeMap<(u32, u64), Arc<PublicParams>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    if let Some(p) = cache.get(&(lambda, seed)) {
        return Ok(p.clone());
    }
    let p = Arc::new(PublicParams::setup(lambda, seed)?);
    cache.insert((lambda, seed), p.clone());
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub file_size: usize,
    pub clients: usize,
    pub fogs: usize,
    pub tx_count: u64,
    pub sessions: u64,
    pub retrieval_bytes: u64,
    pub retrieval_per_session: u64,
    pub total_bytes: u64,
    pub onchain_overhead: u64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn is_affine(xs: &[(usize, u64)]) -> bool {
    xs.windows(3).all(|w| {
        let (dx1, dy1) = (w[1].0 as i128 - w[0].0 as i128, w[1].1 as i128 - w[0].1 as i128);
        let (dx2, dy2) = (w[2].0 as i128 - w[1].0 as i128, w[2].1 as i128 - w[1].1 as i128);
        dy1 * dx2 == dy2 * dx1
    })
}

/// Runs every `(size, clients, fogs)` combination and checks the structural trends.
pub fn sweep(
    template: &ScenarioConfig,
    sizes: &[usize],
    clients: &[usize],
    fogs: &[usize],
) -> Result<SweepReport, HarnessError> {
    if sizes.is_empty() || clients.is_empty() || fogs.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one size, client count and fog count".into()));
    }
    let mut sizes = sizes.to_vec();
    let mut clients = clients.to_vec();
    let mut fogs = fogs.to_vec();
    for v in [&mut sizes, &mut clients, &mut fogs] {
        v.sort_unstable();
        v.dedup();
    }
    let mut points = Vec::new();
    let mut key_len = 0;
    for &file_size in &sizes {
        for &c in &clients {
            for &f in &fogs {
                let cfg = ScenarioConfig { file_size, clients: c, fogs: f, ..template.clone() };
                let r = run(&cfg)?;
                key_len = 3 * r.element_size as u64;
                let ret = &r.bytes.phases.data_retrieval;
                let on_chain: u64 = r.bytes.on_chain.per_phase.values().sum();
                points.push(SweepPoint {
                    file_size,
                    clients: c,
                    fogs: f,
                    tx_count: r.tx_count,
                    sessions: ret.sessions,
                    retrieval_bytes: ret.bytes,
                    retrieval_per_session: ret.bytes.checked_div(ret.sessions).unwrap_or(0),
                    total_bytes: r.bytes.total_off_chain + on_chain,
                    onchain_overhead: r.bytes.on_chain.overhead,
                    passed: r.passed,
                });
            }
        }
    }

    let find = |s: usize, c: usize, f: usize| {
        points.iter().find(|p| p.file_size == s && p.clients == c && p.fogs == f).expect("point exists")
    };
    let mut checks = Vec::new();
    let bad: Vec<String> = points
        .iter()
        .filter(|p| {
            p.sessions > 0
                && (p.retrieval_bytes != p.sessions * (p.file_size as u64 + key_len)
                    || p.retrieval_per_session != p.file_size as u64 + key_len)
        })
        .map(|p| format!("{} bytes for size {}", p.retrieval_per_session, p.file_size))
        .collect();
    checks.push(Check {
        name: "retrieval-equals-file-plus-key".into(),
        holds: bad.is_empty() && points.iter().any(|p| p.sessions > 0),
        detail: if bad.is_empty() { format!("|f'| + {key_len} per session") } else { bad.join("; ") },
    });

    let mut flat = true;
    let mut monotonic = true;
    let mut affine_c = true;
    let mut affine_f = true;
    for &c in &clients {
        for &f in &fogs {
            let line: Vec<&SweepPoint> = sizes.iter().map(|&s| find(s, c, f)).collect();
            flat &= line.windows(2).all(|w| w[0].onchain_overhead == w[1].onchain_overhead);
            monotonic &= line.windows(2).all(|w| w[0].total_bytes < w[1].total_bytes);
        }
    }
    for &s in &sizes {
        for &f in &fogs {
            let xs: Vec<(usize, u64)> = clients.iter().map(|&c| (c, find(s, c, f).tx_count)).collect();
            affine_c &= is_affine(&xs);
        }
        for &c in &clients {
            let xs: Vec<(usize, u64)> = fogs.iter().map(|&f| (f, find(s, c, f).tx_count)).collect();
            affine_f &= is_affine(&xs);
        }
    }
    let row = |name: &str, holds: bool, detail: &str| Check { name: name.into(), holds, detail: detail.into() };
    checks.push(row("onchain-overhead-flat", flat, "on-chain storage and retrieval bytes independent of file size"));
    checks.push(row("total-bytes-increase", monotonic, "total bytes strictly increase with file size"));
    checks.push(row("tx-count-affine-in-clients", affine_c, "transaction count affine in client count"));
    checks.push(row("tx-count-affine-in-fogs", affine_f, "transaction count affine in fog count"));
    checks.push(row("runs-passed", points.iter().all(|p| p.passed), "every run passed its own checks"));
    let passed = checks.iter().all(|c| c.holds);
    Ok(SweepReport { points, checks, passed })
}

/// Runs every named case on top of `template`.
pub fn run_cases(template: &ScenarioConfig) -> Result<Vec<ScenarioReport>, HarnessError> {
    CaseId::ALL.iter().map(|c| run(&ScenarioConfig { case: Some(*c), ..template.clone() })).collect()
}

/// One line per case: outcomes and gas-excluded deltas of the cloud, first fog and first client.
pub fn case_table(reports: &[ScenarioReport]) -> String {
    let mut out = format!(
        "{:<18} {:<16} {:<16} {:<22} {:>7} {:>7} {:>7}  {}\n",
        "case", "fog", "cloud", "client", "d_fog", "d_cloud", "d_client", "verdict"
    );
    for r in reports {
        let get = |id: PartyId| r.party(id);
        let (fog, cloud, client) = (get(run::fog_id(0)), get(run::CLOUD_ID), get(run::client_id(0)));
        let outcome = |p: Option<&PartyReport>| {
            p.map(|p| p.outcomes.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(",")).unwrap_or_default()
        };
        let delta = |p: Option<&PartyReport>| p.map_or(0, |p| p.delta_excl_gas);
        out += &format!(
            "{:<18} {:<16} {:<16} {:<22} {:>+7} {:>+7} {:>+7}  {}\n",
            r.case.map(|c| c.to_string()).unwrap_or_else(|| "custom".into()),
            outcome(fog),
            outcome(cloud),
            outcome(client),
            delta(fog),
            delta(cloud),
            delta(client),
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    out
}

/// Quick invariant suites over the cryptography, every case, determinism and scaling.
pub fn selftest(template: &ScenarioConfig) -> Result<Vec<Check>, HarnessError> {
    let params = params_for(template.lambda, template.params_seed.unwrap_or(template.seed))?;
    let mut rng = ChaCha20Rng::seed_from_u64(template.seed);
    let (mut ok, mut wrong_rejected) = (0, 0);
    let trials = 25;
    for _ in 0..trials {
        let a = pre_keygen(&params, &mut rng);
        let b = pre_keygen(&params, &mut rng);
        let e = pre_keygen(&params, &mut rng);
        let k = params.random_gt(&mut rng);
        let c = pre_encrypt(&params, a.pk(), &k, &mut rng);
        let rk = pre_rekeygen(&params, a.sk(), b.pk(), PartyId(1), PartyId(2))?;
        let cc = pre_reencrypt(&params, &rk, &c, &mut rng);
        ok += usize::from(pre_decrypt(&params, b.sk(), &cc)? == k);
        wrong_rejected += usize::from(pre_decrypt(&params, e.sk(), &cc).map_or(true, |x| x != k));
    }
    let mut checks = vec![
        Check { name: "pre-round-trip".into(), holds: ok == trials, detail: format!("{ok}/{trials}") },
        Check {
            name: "pre-wrong-key".into(),
            holds: wrong_rejected == trials,
            detail: format!("{wrong_rejected}/{trials}"),
        },
    ];
    for r in run_cases(template)? {
        let case = r.case.map(|c| c.to_string()).unwrap_or_default();
        checks.push(Check { name: format!("case-{case}"), holds: r.passed, detail: r.failures().join("; ") });
    }
    let a = run(template)?.to_json();
    let b = run(template)?.to_json();
    checks.push(Check { name: "deterministic-report".into(), holds: a == b, detail: format!("{} bytes", a.len()) });
    let s = sweep(template, &[template.file_size, template.file_size * 4], &[1, 2, 3], &[1, 2])?;
    for c in s.checks {
        checks.push(Check { name: format!("sweep-{}", c.name), ..c });
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_detection() {
        assert!(is_affine(&[(1, 10), (2, 17), (3, 24)]));
        assert!(is_affine(&[(1, 10), (3, 24)]));
        assert!(is_affine(&[(1, 10), (2, 17), (4, 31)]));
        assert!(!is_affine(&[(1, 10), (2, 17), (3, 25)]));
    }

    #[test]
    fn sweep_rejects_empty_axes() {
        assert!(matches!(sweep(&ScenarioConfig::default(), &[], &[1], &[1]), Err(HarnessError::Config(_))));
    }
}
