//! Command-line front end. Precedence, lowest first: built-in defaults,
//! the config file (`--config` or `LTDPS_CONFIG`), `--set key=value`,
//! then subcommand flags.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::Config;
use crate::eval::{accuracy_percent, history_for, path_accuracy, run_many, ExperimentReport};
use crate::grid::{ApId, RegionId};
use crate::miner::{predict_next_ap, PatternDatabase};
use crate::mobility::{read_history, write_history};
use crate::mpps::{Directive, DirectiveKind, RssiReport, TrafficClass};
use crate::security::{
    run_handshake, BlockCipher, Channel, CleanChannel, FlipBit, MobileEndpoint, ReplayStep, ServerEndpoint, SharedKey,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ltdps", version, about = "Mobility prediction by location tracking and path mining")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, env = "LTDPS_CONFIG")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded path history, one path per line.
    Generate(GenerateArgs),
    /// Predict the next AP from a history file.
    Predict(PredictArgs),
    /// Run the accuracy experiment and write CSV reports.
    Eval(EvalArgs),
    /// Run the secure report exchange over an in-memory channel.
    SecureDemo(SecureDemoArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of paths [config: history_size].
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    history: PathBuf,
    /// Current AP id.
    #[arg(long)]
    from: u16,
    /// Region being entered, as `15` or `R15`.
    #[arg(long = "to-region", value_parser = parse_region)]
    to_region: RegionId,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Independent runs with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Comma-separated subset of LTDPS,TM,IP.
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long = "history-size")]
    history_size: Option<usize>,
    #[arg(long = "test-paths")]
    test_paths: Option<usize>,
    #[arg(long = "out-dir", default_value = "ltdps-report")]
    out_dir: PathBuf,
    /// Worker threads for multiple runs; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SecureDemoArgs {
    /// Shared key as hex.
    #[arg(long, default_value = "4b5f53412d6b6579")]
    key: String,
    /// Flip one bit of a packet, `bit=N` counted MSB-first.
    #[arg(long, value_parser = parse_tamper)]
    tamper: Option<usize>,
    /// Packet the tamper flag applies to.
    #[arg(long = "tamper-step", default_value_t = 1)]
    tamper_step: usize,
    /// Re-send a packet after the exchange.
    #[arg(long)]
    replay: bool,
    /// Packet the replay flag captures.
    #[arg(long = "replay-step", default_value_t = 3)]
    replay_step: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_region(s: &str) -> Result<RegionId, String> {
    let digits = s.strip_prefix(['R', 'r']).unwrap_or(s);
    digits.parse().map(RegionId).map_err(|_| format!("`{s}` is not a region id"))
}

fn parse_tamper(s: &str) -> Result<usize, String> {
    let bit = s.strip_prefix("bit=").ok_or_else(|| format!("expected `bit=N`, got `{s}`"))?;
    bit.parse().map_err(|_| format!("`{bit}` is not a bit index"))
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = Cli::command().after_help(Config::help_text());
    let matches = match command.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path).map_err(usage)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o).map_err(usage)?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Generate(a) => {
            if let Some(n) = a.count {
                cfg.history_size = n;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cmd_generate(&cfg, a.out.as_deref())
        }
        Command::Predict(a) => {
            cfg.validate().map_err(usage)?;
            cmd_predict(&cfg, &a.history, ApId(a.from), a.to_region)
        }
        Command::Eval(a) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(list) = &a.schemes {
                cfg.set("schemes", list).map_err(usage)?;
            }
            if let Some(n) = a.history_size {
                cfg.history_size = n;
            }
            if let Some(n) = a.test_paths {
                cfg.test_paths = n;
            }
            if a.runs == 0 {
                return Err(usage("--runs must be at least 1"));
            }
            let threads = a.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            cmd_eval(&cfg, a.runs, threads, &a.out_dir)
        }
        Command::SecureDemo(a) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cmd_secure_demo(&cfg, &a)
        }
    }
}

fn cmd_generate(cfg: &Config, out: Option<&Path>) -> Result<(), Failure> {
    let exp = cfg.experiment().map_err(usage)?;
    let paths = history_for(&exp).map_err(runtime)?;
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let n = write_history(&mut w, &paths).map_err(runtime)?;
            w.flush().map_err(runtime)?;
            println!("wrote {n} paths to {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let n = write_history(&mut w, &paths).map_err(runtime)?;
            w.flush().map_err(runtime)?;
            eprintln!("wrote {n} paths");
        }
    }
    Ok(())
}

fn cmd_predict(cfg: &Config, history: &Path, from: ApId, to_region: RegionId) -> Result<(), Failure> {
    let grid = cfg.grid().map_err(usage)?;
    let scoring = cfg.scoring().map_err(usage)?;
    let file = File::open(history).map_err(|e| runtime(format!("{}: {e}", history.display())))?;
    let paths = read_history(BufReader::new(file), &grid).map_err(runtime)?;
    let db = PatternDatabase::from_paths(&paths, &grid).map_err(runtime)?;
    let candidates = grid.candidate_next_aps(from, to_region).map_err(usage)?;
    let list: Vec<String> = candidates.iter().map(ApId::to_string).collect();
    println!("history: {} paths", db.path_count());
    println!("S = {{{}}}", list.join(", "));
    let prediction = predict_next_ap(&db, from, &candidates, &scoring).map_err(runtime)?;
    println!("{:>4}  {:>4}  {:>10}", "rank", "AP", "score");
    for c in &prediction.ranking {
        println!("{:>4}  {:>4}  {:>10}", c.rank, c.ap, c.score);
    }
    println!("predicted next AP: {}", prediction.ap);
    Ok(())
}

fn write_reports(report: &ExperimentReport, dir: &Path, suffix: &str) -> Result<(), Failure> {
    let open = |name: String| {
        let path = dir.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| runtime(format!("{}: {e}", path.display())))
    };
    report.write_report_csv(open(format!("report{suffix}.csv"))?).map_err(runtime)?;
    report.write_summary_csv(open(format!("summary{suffix}.csv"))?).map_err(runtime)?;
    Ok(())
}

fn cmd_eval(cfg: &Config, runs: u64, threads: usize, out_dir: &Path) -> Result<(), Failure> {
    let exp = cfg.experiment().map_err(usage)?;
    std::fs::create_dir_all(out_dir).map_err(|e| runtime(format!("{}: {e}", out_dir.display())))?;
    let seeds: Vec<u64> = (0..runs).map(|i| exp.seed.wrapping_add(i)).collect();
    let reports: Vec<ExperimentReport> =
        run_many(&exp, &seeds, threads).into_iter().collect::<Result<_, _>>().map_err(runtime)?;

    if let [report] = reports.as_slice() {
        write_reports(report, out_dir, "")?;
        println!("{:<6} {:>8}  per-path accuracy (%)", "scheme", "mean");
        for s in &report.schemes {
            let per_path: Vec<String> = s
                .results
                .iter()
                .map(|r| path_accuracy(r).map_or("-".into(), |a| accuracy_percent(a).to_string()))
                .collect();
            println!("{:<6} {:>7.1}%  {}", s.scheme.to_string(), 100.0 * s.mean_accuracy(), per_path.join(" "));
        }
    } else {
        let header: Vec<String> = exp.schemes.iter().map(|s| format!("{:>7}", s.to_string())).collect();
        println!("{:<6} {}", "seed", header.join(" "));
        let mut totals = vec![0.0; exp.schemes.len()];
        for report in &reports {
            write_reports(report, out_dir, &format!("-seed{}", report.seed))?;
            let cells: Vec<String> = report
                .schemes
                .iter()
                .zip(totals.iter_mut())
                .map(|(s, t)| {
                    *t += s.mean_accuracy();
                    format!("{:>6.1}%", 100.0 * s.mean_accuracy())
                })
                .collect();
            println!("{:<6} {}", report.seed, cells.join(" "));
        }
        let means: Vec<String> = totals.iter().map(|t| format!("{:>6.1}%", 100.0 * t / reports.len() as f64)).collect();
        println!("{:<6} {}", "mean", means.join(" "));
    }
    println!("reports written to {}", out_dir.display());
    Ok(())
}

fn demo_messages() -> (Vec<Vec<u8>>, Vec<u8>) {
    let first = RssiReport::new(1, (1, 38), &[(6, 25), (5, 15), (0, 5)], 0).expect("valid report");
    let second = RssiReport::new(1, (1, 5), &[(7, 35), (6, 20), (2, 10)], 1).expect("valid report");
    let handoff = Directive {
        mn_id: 1,
        tick: 1,
        kind: DirectiveKind::Handoff,
        target_ap: ApId(7),
        traffic_class: TrafficClass::Data,
        buffer_units: 1,
    };
    (vec![first.encode_payload(), second.encode_payload()], handoff.encode().to_vec())
}

fn cmd_secure_demo(cfg: &Config, a: &SecureDemoArgs) -> Result<(), Failure> {
    use rand::SeedableRng;

    let cipher = cfg.cipher;
    let key = SharedKey::from_hex(&a.key, &cipher).map_err(usage)?;
    let mut server = ServerEndpoint::new(cipher, rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed));
    server.register(1, key.clone());
    let mut mn = MobileEndpoint::new(1, key, cipher);
    let (messages, server_message) = demo_messages();

    let mut channel: Box<dyn Channel> = match (a.tamper, a.replay) {
        (Some(_), true) => return Err(usage("--tamper and --replay are exclusive")),
        (Some(bit), false) => Box::new(FlipBit { step: a.tamper_step, bit }),
        (None, true) => Box::new(ReplayStep::new(a.replay_step)),
        (None, false) => Box::new(CleanChannel),
    };
    let transcript =
        run_handshake(&mut mn, &mut server, &messages, &[server_message], channel.as_mut()).map_err(runtime)?;
    println!("cipher: {} ({}-byte blocks)", cipher.name(), cipher.block_size());
    print!("{transcript}");
    let verdicts: Vec<String> = transcript.entries.iter().map(|e| e.verdict.to_string()).collect();
    println!("verdicts: {}", verdicts.join(", "));
    Ok(())
}
