use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fairshare_core::harness::{self, CaseId, HarnessError, ScenarioConfig};
use fairshare_core::ledger::GasSchedule;

#[derive(Parser)]
#[command(name = "fairshare", version, about = "Run FairShare protocol scenarios on the ledger simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write the JSONL transaction and message trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a grid of file sizes, client counts and fog counts.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1024,10240,102400")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        clients: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        fogs: Vec<usize>,
    },
    /// Run every adversarial case and print the outcome table.
    Cases {
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in invariant suites.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario configuration in TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the encrypted file in bytes.
    #[arg(long)]
    file_size: Option<usize>,
    /// honest, I..VI, withhold-key, false-complaint, silent-after-key or tamper-file-claim.
    #[arg(long)]
    case: Option<CaseId>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Gas schedule override in TOML.
    #[arg(long)]
    gas_schedule: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::from_toml(&read(p)?)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.file_size {
            cfg.file_size = n;
        }
        if let Some(c) = self.case {
            cfg.case = Some(c);
        }
        if let Some(p) = &self.gas_schedule {
            let g: GasSchedule = toml::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
            cfg.gas = Some(g);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, json: &str) -> Result<()> {
        match &self.report {
            Some(p) => fs::write(p, json).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{json}");
                Ok(())
            }
        }
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { common, trace } => {
            let cfg = common.config()?;
            let ex = harness::execute(&cfg)?;
            if let Some(p) = trace {
                fs::write(&p, ex.trace_jsonl()).with_context(|| format!("writing {}", p.display()))?;
            }
            common.emit(&ex.report.to_json())?;
            for f in ex.report.failures() {
                eprintln!("FAIL {f}");
            }
            Ok(ex.report.passed)
        }
        Command::Sweep { common, sizes, clients, fogs } => {
            let cfg = common.config()?;
            let rep = harness::sweep(&cfg, &sizes, &clients, &fogs)?;
            common.emit(&rep.to_json())?;
            for c in rep.checks.iter().filter(|c| !c.holds) {
                eprintln!("FAIL {}: {}", c.name, c.detail);
            }
            Ok(rep.passed)
        }
        Command::Cases { common } => {
            let cfg = common.config()?;
            let reports = harness::run_cases(&cfg)?;
            if common.report.is_some() {
                let all = serde_json::to_string_pretty(&reports)? + "\n";
                common.emit(&all)?;
            }
            print!("{}", harness::case_table(&reports));
            for r in &reports {
                for f in r.failures() {
                    eprintln!("FAIL {}: {f}", r.case.map(|c| c.to_string()).unwrap_or_default());
                }
            }
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::Selftest { common } => {
            let cfg = common.config()?;
            let checks = harness::selftest(&cfg)?;
            for c in &checks {
                println!("{} {:<40} {}", if c.holds { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if common.report.is_some() {
                common.emit(&(serde_json::to_string_pretty(&checks)? + "\n"))?;
            }
            Ok(checks.iter().all(|c| c.holds))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<HarnessError>(), Some(HarnessError::Config(_)));
            ExitCode::from(if usage { 2 } else { 3 })
        }
    }
}
