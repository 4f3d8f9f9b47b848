//! `privchain`: drive the simulator one protocol action at a time, run
//! whole scenario scripts, or benchmark the protocol phases.
//!
//! Exit codes: 0 success, 2 protocol rejection, 3 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use privchain::bench::bench;
use privchain::identity::Role;
use privchain::ledger::{verify_chain_file, ReqPay};
use privchain::scenario::{roster_for, run_scenario, ActionError, Exit, HomeLayout, ScenarioConfig, Simulator};

#[derive(Parser)]
#[command(
    name = "privchain",
    version,
    about = "Privacy-preserving supply-chain provenance simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a state directory from a scenario config: keys, ledger, bank.
    Setup {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        home: PathBuf,
    },
    /// Print a roster with keys derived from the seed; members are `role:name`.
    RegisterRoster {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        members: Vec<String>,
    },
    /// Register a commodity with a device-signed location proof.
    Create {
        #[arg(long)]
        home: PathBuf,
        commodity: String,
        seller: String,
        device: String,
        #[arg(allow_negative_numbers = true)]
        lat: f64,
        #[arg(allow_negative_numbers = true)]
        lon: f64,
        /// Region to claim; defaults to the region containing the farm.
        #[arg(long)]
        region: Option<String>,
    },
    /// Trade a commodity from its owner to a buyer.
    Trade {
        #[arg(long)]
        home: PathBuf,
        commodity: String,
        buyer: String,
        /// Incentive amount the seller commits to.
        #[arg(long)]
        incentive: Option<u64>,
        /// Amount the buyer encrypts for the bank (defaults to --incentive).
        #[arg(long, requires = "incentive")]
        buyer_incentive: Option<u64>,
        /// Submit without the location proof.
        #[arg(long)]
        no_proof: bool,
    },
    /// Register a final product made of traded commodities.
    Produce {
        #[arg(long)]
        home: PathBuf,
        product: String,
        buyer: String,
        #[arg(required = true)]
        commodities: Vec<String>,
    },
    /// Print a product's region names, one per line.
    Query {
        #[arg(long)]
        home: PathBuf,
        product: String,
    },
    /// Settle every payment request in the event log.
    BankRun {
        #[arg(long)]
        home: PathBuf,
    },
    /// Re-submit a corrected payment request for a disputed trade.
    Repay {
        #[arg(long)]
        home: PathBuf,
        commodity: String,
        amount: u64,
    },
    /// Mark a product as sold.
    Sell {
        #[arg(long)]
        home: PathBuf,
        product: String,
        holder: String,
    },
    /// Decrypt a product's constituents and trace them on the ledger.
    Audit {
        #[arg(long)]
        home: PathBuf,
        product: String,
    },
    /// Check block hashes and links of the ledger file.
    VerifyLedger {
        #[arg(long)]
        home: PathBuf,
    },
    /// Time every protocol phase.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Directory for temporary ledger files.
        #[arg(long)]
        scratch: Option<PathBuf>,
    },
    /// Run a scenario script against a fresh in-memory ledger.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Also write the transcript to this file.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn with_home<T>(home: &Path, f: impl FnOnce(&mut Simulator) -> Result<T, ActionError>) -> Result<T, ActionError> {
    let mut sim = Simulator::open_home(home)?;
    let out = f(&mut sim);
    sim.seal()?;
    sim.persist()?;
    out
}

fn print_lines(lines: &[String]) {
    for l in lines {
        println!("{l}");
    }
}

fn parse_member(s: &str) -> Result<(Role, &str), ActionError> {
    let (role, name) = s
        .split_once(':')
        .ok_or_else(|| ActionError::Config(format!("member `{s}` is not `role:name`")))?;
    let role = role.parse::<Role>().map_err(|e| ActionError::Config(e.to_string()))?;
    Ok((role, name))
}

fn run(cmd: Command) -> Result<Exit, ActionError> {
    match cmd {
        Command::Setup { config, home } => {
            Simulator::setup_home(&config, &home)?;
            println!("setup complete: {}", home.display());
        }
        Command::RegisterRoster { seed, out, members } => {
            let members = members.iter().map(|m| parse_member(m)).collect::<Result<Vec<_>, _>>()?;
            let text = roster_for(seed, &members)?;
            match out {
                Some(p) => fs::write(&p, text).map_err(|e| ActionError::Config(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
        }
        Command::Create {
            home,
            commodity,
            seller,
            device,
            lat,
            lon,
            region,
        } => {
            let line = with_home(&home, |s| {
                s.create(&commodity, &seller, &device, lat, lon, region.as_deref())
            })?;
            println!("{line}");
        }
        Command::Trade {
            home,
            commodity,
            buyer,
            incentive,
            buyer_incentive,
            no_proof,
        } => {
            let line = with_home(&home, |s| {
                s.trade(&commodity, &buyer, incentive, buyer_incentive, !no_proof)
            })?;
            println!("{line}");
        }
        Command::Produce {
            home,
            product,
            buyer,
            commodities,
        } => {
            let line = with_home(&home, |s| s.produce(&product, &buyer, &commodities))?;
            println!("{line}");
        }
        Command::Query { home, product } => {
            let regions = with_home(&home, |s| s.query(&product))?;
            print_lines(&regions);
        }
        Command::BankRun { home } => {
            let path = HomeLayout::new(&home).events();
            let text = fs::read_to_string(&path).unwrap_or_default();
            let mut reqs = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                reqs.push(
                    ReqPay::from_line(line)
                        .map_err(|e| ActionError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?,
                );
            }
            let lines = with_home(&home, |s| s.settle_requests(&reqs))?;
            print_lines(&lines);
        }
        Command::Repay {
            home,
            commodity,
            amount,
        } => {
            let line = with_home(&home, |s| s.repay(&commodity, amount))?;
            println!("{line}");
        }
        Command::Sell { home, product, holder } => {
            let line = with_home(&home, |s| s.sell(&product, &holder))?;
            println!("{line}");
        }
        Command::Audit { home, product } => {
            let lines = with_home(&home, |s| s.audit(&product))?;
            print_lines(&lines);
        }
        Command::VerifyLedger { home } => {
            let path = HomeLayout::new(&home).ledger();
            let n = verify_chain_file(&path).map_err(|e| ActionError::Rejected(e.to_string()))?;
            // Full replay as well, which re-applies every transaction.
            Simulator::open_home(&home)?;
            println!("ledger ok: {n} blocks");
        }
        Command::Bench {
            config,
            trials,
            scratch,
        } => {
            let config = ScenarioConfig::load(&config)?;
            let scratch = scratch.unwrap_or_else(std::env::temp_dir);
            let report = bench(&config, trials, &scratch)?;
            print!("{}", report.to_text());
        }
        Command::Run {
            config,
            script,
            transcript,
        } => {
            let config = ScenarioConfig::load(&config)?;
            let text =
                fs::read_to_string(&script).map_err(|e| ActionError::Config(format!("{}: {e}", script.display())))?;
            let outcome = run_scenario(&config, &script, &text);
            print!("{}", outcome.text());
            if let Some(p) = transcript {
                fs::write(&p, outcome.text()).map_err(|e| ActionError::Config(format!("{}: {e}", p.display())))?;
            }
            return Ok(outcome.exit);
        }
    }
    Ok(Exit::Success)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Config as u8 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit() as u8)
        }
    }
}
