use serde::{Deserialize, Serialize};

use super::cases::CaseId;
use super::HarnessError;
use crate::crypto::SYM_TAG_LEN;
use crate::exchange::DEFAULT_CHUNK_SIZE;
use crate::ledger::{Coins, GasSchedule, Time};
use crate::parties::summary::{HEADER_LEN, RECORD_LEN};
use crate::parties::{Fault, Profile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fees {
    pub p1: Coins,
    pub p2: Coins,
    pub p3: Coins,
    pub p4: Coins,
    pub eps1: Coins,
    pub eps2: Coins,
}

impl Default for Fees {
    fn default() -> Self {
        Fees { p1: 1000, p2: 500, p3: 300, p4: 400, eps1: 50, eps2: 20 }
    }
}

/// Minimum registration deposits written into the controller terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Deposits {
    pub fog: Coins,
    pub cloud: Coins,
    pub client: Coins,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Seed for public parameter generation; defaults to `seed`.
    pub params_seed: Option<u64>,
    pub lambda: u32,
    /// Size of the encrypted file `f'` in bytes.
    pub file_size: usize,
    pub chunk_size: usize,
    pub readings: usize,
    pub window: usize,
    pub clients: usize,
    pub fogs: usize,
    pub case: Option<CaseId>,
    pub strategies: Profile,
    pub fees: Fees,
    pub deposits: Deposits,
    pub ts: Time,
    pub initial_balance: Coins,
    pub request_token: String,
    pub gas: Option<GasSchedule>,
    /// Price multiplier for reporting gas in a fiat unit; off by default.
    pub usd_per_gas: Option<f64>,
    pub fault: Option<Fault>,
    pub max_rounds: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            params_seed: None,
            lambda: 128,
            file_size: 1024,
            chunk_size: DEFAULT_CHUNK_SIZE,
            readings: 24,
            window: 6,
            clients: 1,
            fogs: 1,
            case: None,
            strategies: Profile::default(),
            fees: Fees::default(),
            deposits: Deposits::default(),
            ts: 100,
            initial_balance: 1_000_000,
            request_token: String::new(),
            gas: None,
            usd_per_gas: None,
            fault: None,
            max_rounds: 100_000,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn for_case(case: CaseId) -> Self {
        ScenarioConfig { case: Some(case), ..Self::default() }
    }

    /// Strategies in force: the named case wins over the explicit table.
    pub fn profile(&self) -> Profile {
        self.case.map_or(self.strategies, |c| c.profile())
    }

    pub fn schedule(&self) -> GasSchedule {
        self.gas.clone().unwrap_or_default()
    }

    /// Smallest `file_size` that holds the summaries of this configuration.
    pub fn min_file_size(&self) -> usize {
        let windows = self.readings.div_ceil(self.window.max(1));
        HEADER_LEN + RECORD_LEN * windows + SYM_TAG_LEN
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.file_size < 1 {
            return bad("file_size must be at least 1".into());
        }
        if self.chunk_size == 0 || self.chunk_size > u32::MAX as usize {
            return bad("chunk_size must be in 1..=u32::MAX".into());
        }
        if self.readings == 0 || self.window == 0 {
            return bad("readings and window must be positive".into());
        }
        if self.clients == 0 || self.fogs == 0 {
            return bad("at least one client and one fog are required".into());
        }
        if self.clients > 1000 || self.fogs > 1000 {
            return bad("at most 1000 clients and 1000 fogs".into());
        }
        if !matches!(self.lambda, 128 | 256) {
            return bad(format!("unsupported lambda {}", self.lambda));
        }
        if self.ts == 0 {
            return bad("ts must be positive".into());
        }
        if self.request_token.len() > u16::MAX as usize {
            return bad("request token longer than 65535 bytes".into());
        }
        if self.file_size < self.min_file_size() {
            return bad(format!(
                "file_size {} cannot hold {} readings in windows of {} (need {})",
                self.file_size,
                self.readings,
                self.window,
                self.min_file_size()
            ));
        }
        if let Some(g) = &self.gas {
            if let Some(f) = super::accounting::FLOW_FUNCTIONS.iter().find(|f| g.gas(f).is_none()) {
                return bad(format!("gas schedule has no entry for {f}"));
            }
        }
        if self.usd_per_gas.is_some_and(|u| !(u.is_finite() && u >= 0.0)) {
            return bad("usd_per_gas must be a non-negative number".into());
        }
        self.profile().validate().map_err(HarnessError::Config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parties::Behavior;

    #[test]
    fn toml_overrides_and_defaults() {
        let c = ScenarioConfig::from_toml(
            "seed = 9\nfile_size = 2048\n[fees]\np1 = 7\n[strategies]\ncloud = \"withhold-key\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.fees.p1, 7);
        assert_eq!(c.fees.p2, 500);
        assert_eq!(c.profile().cloud, Behavior::WithholdKey);
        c.validate().unwrap();
    }

    #[test]
    fn case_overrides_strategies() {
        let c = ScenarioConfig::from_toml("case = \"I\"\n[strategies]\ncloud = \"withhold-key\"\n").unwrap();
        assert_eq!(c.profile().fog, Behavior::TamperReenc);
        assert_eq!(c.profile().cloud, Behavior::Honest);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ScenarioConfig::from_toml("bogus = 1").is_err());
        assert!(ScenarioConfig::from_toml("seed = -1").is_err());
        for c in [
            ScenarioConfig { file_size: 0, ..Default::default() },
            ScenarioConfig { file_size: 50, ..Default::default() },
            ScenarioConfig { chunk_size: 0, ..Default::default() },
            ScenarioConfig { clients: 0, ..Default::default() },
            ScenarioConfig { lambda: 80, ..Default::default() },
            ScenarioConfig {
                strategies: Profile { fog: Behavior::FalseComplaint, ..Default::default() },
                ..Default::default()
            },
            ScenarioConfig {
                gas: Some({
                    let mut g = GasSchedule::default();
                    g.calls.remove("store_nonce");
                    g
                }),
                ..Default::default()
            },
        ] {
            assert!(matches!(c.validate(), Err(HarnessError::Config(_))), "{c:?}");
        }
        assert_eq!(ScenarioConfig::default().min_file_size(), 8 + 4 * 16 + 16);
        assert!(ScenarioConfig { gas: Some(GasSchedule::zeroed()), ..Default::default() }.validate().is_ok());
    }
}
