//! `ringvote`: run an election over a local simulated ledger.

mod error;
mod keys;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use ringvote::board::{self, PayloadMode, Phase, PhaseDeadlines};
use ringvote::escrow::{self, EscrowStatus};
use ringvote::group::{self, GroupPoint, KeyPair};
use ringvote::ring::Ring;
use ringvote::stealth;
use ringvote::tally::{self, TallyOptions, TallyReport};
use ringvote::{bench, BulletinBoard, ElectionConfig, PayloadStore};

use error::{CliError, Exit, EXIT_CODES};

#[derive(Parser)]
#[command(
    name = "ringvote",
    version,
    about = "Ring-signature voting over a simulated bulletin board"
)]
#[command(after_help = EXIT_CODES)]
struct Cli {
    /// Election directory holding ledger.jsonl, store/, keys/ and report.json.
    #[arg(long, global = true, default_value = "election")]
    dir: PathBuf,
    /// Derive all randomness from this seed so runs are byte-reproducible.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the ledger: config, roster and (unless deferred) manager escrow.
    #[command(after_help = EXIT_CODES)]
    Setup(SetupArgs),
    /// Generate a key manager's secret share file.
    #[command(after_help = EXIT_CODES)]
    RegisterManager {
        #[arg(long)]
        id: String,
    },
    /// Post a manager's commitment and running product.
    #[command(after_help = EXIT_CODES)]
    Commit {
        #[arg(long)]
        id: String,
        /// Defaults to keys/manager-<id>.key.
        #[arg(long)]
        key: Option<PathBuf>,
    },
    /// Cast a ballot.
    #[command(after_help = EXIT_CODES)]
    Vote(VoteArgs),
    /// Move the election to its next phase.
    #[command(after_help = EXIT_CODES)]
    AdvancePhase,
    /// Publish a manager's secret share.
    #[command(after_help = EXIT_CODES)]
    Reveal {
        #[arg(long)]
        id: String,
        #[arg(long)]
        key: Option<PathBuf>,
    },
    /// Count the ballots and write the report.
    #[command(after_help = EXIT_CODES)]
    Tally {
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Defaults to <dir>/report.json.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Recompute the tally and compare with a report file.
    #[command(after_help = EXIT_CODES)]
    VerifyReport {
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time ballot signing and verification per ring size.
    #[command(after_help = EXIT_CODES)]
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        /// Also write the table to this file.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Storage bytes per ballot for each payload mode and ring size.
    #[command(after_help = EXIT_CODES)]
    Cost {
        #[arg(long, value_delimiter = ',', default_value = "2,8,32")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "inline,tx-pointer,cas-pointer")]
        modes: Vec<PayloadMode>,
        /// Price of a side-table byte relative to a ledger byte.
        #[arg(long, default_value_t = board::DEFAULT_TX_BYTE_FACTOR)]
        tx_factor: f64,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SetupArgs {
    #[arg(long, default_value = "election")]
    election_id: String,
    /// Comma-separated candidate names.
    #[arg(long, value_delimiter = ',', required = true, num_args = 0..)]
    candidates: Vec<String>,
    /// Generate this many voter keys into keys/.
    #[arg(long, conflicts_with = "roster")]
    voters: Option<usize>,
    /// File of voter public keys, one hex point per line.
    #[arg(long)]
    roster: Option<PathBuf>,
    /// Comma-separated manager ids.
    #[arg(long, value_delimiter = ',', default_value = "manager-1")]
    managers: Vec<String>,
    #[arg(long, default_value_t = board::DEFAULT_MIN_RING_SIZE)]
    min_ring_size: usize,
    #[arg(long, default_value = "cas-pointer")]
    mode: PayloadMode,
    #[arg(long, default_value_t = board::DEFAULT_DEPOSIT)]
    deposit: u64,
    /// Last entry index admitted in Setup.
    #[arg(long)]
    setup_end: Option<u64>,
    #[arg(long)]
    voting_end: Option<u64>,
    #[arg(long)]
    reveal_end: Option<u64>,
    /// Leave commitments to `register-manager` and `commit`.
    #[arg(long)]
    defer_escrow: bool,
}

#[derive(Args)]
struct VoteArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    candidate: String,
    /// Defaults to the election's minimum ring size.
    #[arg(long)]
    ring_size: Option<usize>,
    /// Account to submit from. A fresh random one is used if omitted.
    #[arg(long)]
    submitter: Option<String>,
}

struct Workspace {
    dir: PathBuf,
    seed: Option<u64>,
}

impl Workspace {
    fn ledger(&self) -> PathBuf {
        self.dir.join("ledger.jsonl")
    }

    fn store(&self) -> PathBuf {
        self.dir.join("store")
    }

    fn keys(&self) -> PathBuf {
        self.dir.join("keys")
    }

    fn manager_key(&self, id: &str) -> PathBuf {
        self.keys().join(format!("manager-{id}.key"))
    }

    fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }

    /// Independent stream per (label, context); seeded runs replay exactly.
    fn rng(&self, label: &str, context: &[u8]) -> ChaCha20Rng {
        match self.seed {
            Some(seed) => {
                let mut material = seed.to_le_bytes().to_vec();
                material.extend_from_slice(&(label.len() as u32).to_le_bytes());
                material.extend_from_slice(label.as_bytes());
                material.extend_from_slice(context);
                ChaCha20Rng::from_seed(board::sha256(&material))
            }
            None => ChaCha20Rng::from_entropy(),
        }
    }

    fn load(&self) -> Result<(BulletinBoard, PayloadStore), CliError> {
        let path = self.ledger();
        if !path.exists() {
            return Err(CliError::new(
                Exit::Io,
                format!("no ledger at {}; run `ringvote setup` first", path.display()),
            ));
        }
        let board = BulletinBoard::load(&path)?;
        let store = if self.store().exists() {
            PayloadStore::load(&self.store())?
        } else {
            PayloadStore::new()
        };
        Ok((board, store))
    }

    fn persist(&self, board: &BulletinBoard, store: &PayloadStore) -> Result<(), CliError> {
        store.save(&self.store())?;
        board.save(&self.ledger())?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ws = Workspace {
        dir: cli.dir,
        seed: cli.seed,
    };
    let result = match cli.command {
        Command::Setup(args) => cmd_setup(&ws, args),
        Command::RegisterManager { id } => cmd_register_manager(&ws, &id),
        Command::Commit { id, key } => cmd_commit(&ws, &id, key),
        Command::Vote(args) => cmd_vote(&ws, args),
        Command::AdvancePhase => cmd_advance(&ws),
        Command::Reveal { id, key } => cmd_reveal(&ws, &id, key),
        Command::Tally { workers, report } => cmd_tally(&ws, workers, report),
        Command::VerifyReport { report } => cmd_verify_report(&ws, report),
        Command::Bench {
            sizes,
            repetitions,
            warmup,
            data,
        } => cmd_bench(&ws, &sizes, repetitions, warmup, data),
        Command::Cost {
            sizes,
            modes,
            tx_factor,
            data,
        } => cmd_cost(&ws, &sizes, &modes, tx_factor, data),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}

fn read_roster_file(path: &Path) -> Result<Vec<GroupPoint>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(Exit::Io, format!("reading roster {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            group::point_from_hex(l).map_err(|e| CliError::new(Exit::InvalidArgument, format!("roster key {i}: {e}")))
        })
        .collect()
}

fn cmd_setup(ws: &Workspace, args: SetupArgs) -> Result<(), CliError> {
    if ws.ledger().exists() {
        return Err(CliError::new(
            Exit::LedgerExists,
            format!("ledger {} already exists", ws.ledger().display()),
        ));
    }
    let mut voter_keys = Vec::new();
    let roster = match (&args.roster, args.voters) {
        (Some(path), _) => read_roster_file(path)?,
        (None, Some(n)) => {
            let mut rng = ws.rng("voter-keys", args.election_id.as_bytes());
            voter_keys = (0..n).map(|_| KeyPair::generate(&mut rng)).collect();
            voter_keys.iter().map(|k| *k.public()).collect()
        }
        (None, None) => {
            return Err(CliError::new(Exit::InvalidArgument, "pass --voters or --roster"));
        }
    };
    let mut config = ElectionConfig::new(
        args.election_id.clone(),
        args.candidates.into_iter().filter(|c| !c.is_empty()).collect(),
        roster,
        args.managers,
    );
    config.min_ring_size = args.min_ring_size;
    config.payload_mode = args.mode;
    config.deposit_amount = args.deposit;
    config.deadlines = PhaseDeadlines {
        setup_end: args.setup_end,
        voting_end: args.voting_end,
        reveal_end: args.reveal_end,
    };
    config
        .validate()
        .map_err(|e| CliError::new(Exit::Config, format!("invalid config: {e}")))?;

    let mut board = BulletinBoard::open(&config, "admin")?;
    let store = PayloadStore::new();
    fs::create_dir_all(&ws.dir)?;

    let width = voter_keys.len().saturating_sub(1).to_string().len().max(3);
    for (i, key) in voter_keys.iter().enumerate() {
        let path = ws.keys().join(format!("voter-{i:0width$}.key"));
        keys::write_key_file(&path, &format!("ringvote voter key {i:0width$}"), key)?;
    }
    if !args.defer_escrow {
        for id in &config.managers {
            let path = ws.manager_key(id);
            let key = if path.exists() {
                keys::read_key_file(&path)?
            } else {
                let key = KeyPair::generate(&mut ws.rng("manager-key", id.as_bytes()));
                keys::write_key_file(&path, &format!("ringvote manager key {id}"), &key)?;
                key
            };
            post_commitment(&mut board, &config.election_id, id, &key)?;
        }
    }
    ws.persist(&board, &store)?;

    println!(
        "election {:?}: {} entries, phase {:?}",
        config.election_id,
        board.len(),
        board.phase()
    );
    println!("roster:");
    for (i, p) in config.roster.iter().enumerate() {
        println!("  {i:>4}  {}", keys::fingerprint(p));
    }
    if args.defer_escrow {
        println!("escrow deferred: each manager runs `register-manager` then `commit`");
    }
    Ok(())
}

fn post_commitment(board: &mut BulletinBoard, election_id: &str, id: &str, key: &KeyPair) -> Result<(), CliError> {
    let commitment = escrow::commit_share(election_id, id, key.secret())
        .map_err(|e| CliError::new(Exit::InvalidArgument, e.to_string()))?;
    let previous = board
        .escrow()
        .and_then(|e| e.running_products().last().copied())
        .unwrap_or_else(group::basepoint);
    board.commit_manager(&commitment, id)?;
    board.publish_product(id, &escrow::extend_product(&previous, key.secret()), id)?;
    Ok(())
}

fn cmd_register_manager(ws: &Workspace, id: &str) -> Result<(), CliError> {
    if id.is_empty() {
        return Err(CliError::new(Exit::InvalidArgument, "manager id must be nonempty"));
    }
    if ws.ledger().exists() {
        let (board, _) = ws.load()?;
        let listed = board.config().is_some_and(|c| c.managers.iter().any(|m| m == id));
        if !listed {
            return Err(CliError::new(
                Exit::InvalidArgument,
                format!("manager {id:?} is not listed in the election config"),
            ));
        }
    }
    let key = KeyPair::generate(&mut ws.rng("manager-key", id.as_bytes()));
    let path = ws.manager_key(id);
    keys::write_key_file(&path, &format!("ringvote manager key {id}"), &key)?;
    println!("manager {id}: key written to {}", path.display());
    println!("share point {}", group::point_to_hex(key.public()));
    Ok(())
}

fn cmd_commit(ws: &Workspace, id: &str, key: Option<PathBuf>) -> Result<(), CliError> {
    let (mut board, store) = ws.load()?;
    let key = keys::read_key_file(&key.unwrap_or_else(|| ws.manager_key(id)))?;
    let election_id = board
        .config()
        .ok_or_else(|| CliError::from(board::BoardError::NoConfig))?
        .election_id
        .clone();
    post_commitment(&mut board, &election_id, id, &key)?;
    ws.persist(&board, &store)?;
    println!(
        "manager {id}: commitment and running product posted ({} entries)",
        board.len()
    );
    Ok(())
}

/// A submitter id must not reveal which roster key is voting.
fn lint_submitter(submitter: &str, roster: &[GroupPoint]) -> Result<(), CliError> {
    let lower = submitter.to_ascii_lowercase();
    for p in roster {
        let fp = keys::fingerprint(p);
        if lower.contains(&fp) || lower.contains(&group::point_to_hex(p)) {
            return Err(CliError::new(
                Exit::SubmitterLint,
                format!("submitter id {submitter:?} contains roster key {fp}; it would link the ballot to the voter"),
            ));
        }
    }
    Ok(())
}

fn cmd_vote(ws: &Workspace, args: VoteArgs) -> Result<(), CliError> {
    let (mut board, mut store) = ws.load()?;
    if board.phase() != Phase::Voting {
        return Err(CliError::new(
            Exit::Phase,
            format!("voting is closed: ledger is in the {:?} phase", board.phase()),
        ));
    }
    let config = board
        .config()
        .cloned()
        .ok_or_else(|| CliError::from(board::BoardError::NoConfig))?;
    let key = keys::read_key_file(&args.key)?;
    let roster = board.roster().to_vec();
    let me = roster
        .iter()
        .position(|p| p == key.public())
        .ok_or_else(|| CliError::new(Exit::NotInRoster, "voter key is not in the roster"))?;
    let candidate = config
        .candidates
        .iter()
        .position(|c| *c == args.candidate)
        .ok_or_else(|| {
            CliError::new(
                Exit::InvalidArgument,
                format!(
                    "unknown candidate {:?}; choose from {:?}",
                    args.candidate, config.candidates
                ),
            )
        })?;
    let size = args.ring_size.unwrap_or(config.min_ring_size);
    if size == 0 {
        return Err(CliError::new(Exit::InvalidArgument, "ring size must be at least 1"));
    }
    if size > roster.len() {
        return Err(CliError::new(
            Exit::RingTooLarge,
            format!("ring size {size} exceeds the roster of {}", roster.len()),
        ));
    }
    if size < config.min_ring_size {
        eprintln!(
            "warning: ring size {size} is below the election minimum {}; the tally will reject this ballot",
            config.min_ring_size
        );
    }

    let mut context = group::encode_point(key.public()).to_vec();
    context.extend_from_slice(&(board.len() as u64).to_le_bytes());
    let mut rng = ws.rng("vote", &context);

    let submitter = match args.submitter {
        Some(s) => s,
        None => format!("acct-{}", hex::encode(rng.gen::<[u8; 8]>())),
    };
    lint_submitter(&submitter, &roster)?;

    let mut others: Vec<usize> = (0..roster.len()).filter(|&i| i != me).collect();
    others.shuffle(&mut rng);
    let mut members: Vec<usize> = others.into_iter().take(size - 1).collect();
    members.push(me);
    members.sort_unstable();
    let signer = members.iter().position(|&i| i == me).expect("voter included");
    let ring = Ring::new(members.iter().map(|&i| roster[i]).collect())
        .map_err(|e| CliError::new(Exit::Internal, e.to_string()))?;

    let pubkey = board
        .election_pubkey()
        .ok_or_else(|| CliError::new(Exit::Phase, "election key not yet established"))?;
    let ballot = stealth::make_ballot(&pubkey, &config.candidate_points()[candidate], &mut rng);
    let signed = stealth::cast(ballot, &ring, signer, &key, &mut rng)
        .map_err(|e| CliError::new(Exit::Internal, e.to_string()))?
        .into_roster_subset(&roster)
        .map_err(|e| CliError::new(Exit::Internal, e.to_string()))?;
    let index = board.submit_ballot(&mut store, &signed, &submitter)?.index;
    ws.persist(&board, &store)?;
    println!("ballot appended as entry {index} (ring size {size}, submitter {submitter})");
    Ok(())
}

fn cmd_advance(ws: &Workspace) -> Result<(), CliError> {
    let (mut board, store) = ws.load()?;
    board.advance_phase("admin")?;
    ws.persist(&board, &store)?;
    println!("phase {:?}", board.phase());
    Ok(())
}

fn cmd_reveal(ws: &Workspace, id: &str, key: Option<PathBuf>) -> Result<(), CliError> {
    let (mut board, store) = ws.load()?;
    let key = keys::read_key_file(&key.unwrap_or_else(|| ws.manager_key(id)))?;
    board.reveal(id, key.secret(), id)?;
    ws.persist(&board, &store)?;
    let missing = board.escrow().map(|e| e.missing_reveals()).unwrap_or_default();
    if missing.is_empty() {
        println!("manager {id}: share revealed; all shares are in");
    } else {
        println!("manager {id}: share revealed; still waiting on {}", missing.join(", "));
    }
    Ok(())
}

/// Reports managers that have not revealed, with their deposits.
fn missing_reveals_error(board: &BulletinBoard) -> Option<CliError> {
    let escrow = board.escrow()?;
    let missing = escrow.missing_reveals();
    if missing.is_empty() {
        return None;
    }
    let defaulted = matches!(board.escrow_status(), Some(EscrowStatus::Defaulted { .. }));
    for id in &missing {
        let deposit = escrow.deposits().get(id).copied().unwrap_or(0);
        if defaulted {
            eprintln!("manager {id} defaulted: deposit {deposit} forfeited");
        } else {
            eprintln!("manager {id} has not revealed: deposit {deposit} at stake");
        }
    }
    Some(CliError::new(
        Exit::MissingReveals,
        format!("cannot tally: missing reveals from {}", missing.join(", ")),
    ))
}

fn cmd_tally(ws: &Workspace, workers: usize, report_path: Option<PathBuf>) -> Result<(), CliError> {
    let (board, store) = ws.load()?;
    if board.phase() != Phase::Tally {
        return Err(CliError::new(
            Exit::Phase,
            format!("tally requires the Tally phase; ledger is in {:?}", board.phase()),
        ));
    }
    if let Some(e) = missing_reveals_error(&board) {
        return Err(e);
    }
    let report = tally::tally_from_reveals(
        &board,
        &store,
        TallyOptions {
            workers: workers.max(1),
        },
    )?;
    let path = report_path.unwrap_or_else(|| ws.report());
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, report.to_text())?;
    fs::rename(&tmp, &path)?;

    for c in &report.counts {
        println!("{}\t{}", c.candidate, c.votes);
    }
    println!(
        "accepted {}, rejected {}; report written to {}",
        report.accepted.len(),
        report.rejected.len(),
        path.display()
    );
    for r in &report.rejected {
        println!("  entry {} rejected: {}", r.entry_index, r.reason.as_str());
    }
    Ok(())
}

fn cmd_verify_report(ws: &Workspace, report_path: Option<PathBuf>) -> Result<(), CliError> {
    let (board, store) = ws.load()?;
    let path = report_path.unwrap_or_else(|| ws.report());
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::new(Exit::Io, format!("reading report {}: {e}", path.display())))?;
    let report = TallyReport::from_text(&text).map_err(|e| {
        CliError::new(
            Exit::ReportMismatch,
            format!("report {} is unreadable: {e}", path.display()),
        )
    })?;
    if let Some(e) = missing_reveals_error(&board) {
        return Err(e);
    }
    let secret = board
        .escrow()
        .ok_or_else(|| CliError::from(board::BoardError::NoConfig))?
        .combine_secret()
        .map_err(|e| CliError::from(tally::TallyError::from(e)))?;
    if !tally::verify_report(&board, &store, &secret, &report) || text != report.to_text() {
        return Err(CliError::new(Exit::ReportMismatch, "report does not match the ledger"));
    }
    println!("report matches the ledger ({} votes)", report.total_votes());
    Ok(())
}

fn emit(table: &str, data: Option<PathBuf>) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(table.as_bytes())?;
    out.flush()?;
    if let Some(path) = data {
        fs::write(&path, table)?;
    }
    Ok(())
}

fn cmd_bench(
    ws: &Workspace,
    sizes: &[usize],
    repetitions: usize,
    warmup: usize,
    data: Option<PathBuf>,
) -> Result<(), CliError> {
    if sizes.is_empty() || sizes.contains(&0) || repetitions == 0 {
        return Err(CliError::new(
            Exit::InvalidArgument,
            "ring sizes and repetitions must be at least 1",
        ));
    }
    let rows = bench::time_ballots(sizes, repetitions, warmup, &mut ws.rng("bench", &[]));
    let mut table = String::from("ring_size\tsign_ms\tverify_ms\tverify_over_sign\n");
    for r in &rows {
        table.push_str(&format!(
            "{}\t{:.4}\t{:.4}\t{:.3}\n",
            r.ring_size,
            r.sign_secs * 1e3,
            r.verify_secs * 1e3,
            r.verify_secs / r.sign_secs
        ));
    }
    emit(&table, data)?;
    if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.ring_size as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.sign_secs * 1e3).collect();
        let fit = bench::linear_fit(&xs, &ys);
        eprintln!(
            "sign time fit: {:.4} ms per member + {:.4} ms, r^2 {:.4}",
            fit.slope, fit.intercept, fit.r_squared
        );
    }
    Ok(())
}

fn cmd_cost(
    ws: &Workspace,
    sizes: &[usize],
    modes: &[PayloadMode],
    tx_factor: f64,
    data: Option<PathBuf>,
) -> Result<(), CliError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(CliError::new(Exit::InvalidArgument, "ring sizes must be at least 1"));
    }
    if !(tx_factor >= 0.0 && tx_factor.is_finite()) {
        return Err(CliError::new(
            Exit::InvalidArgument,
            "tx factor must be a nonnegative number",
        ));
    }
    let roster = sizes.iter().copied().max().unwrap_or(1);
    let rows = bench::storage_costs(sizes, modes, roster, &mut ws.rng("cost", &[]));
    let mut table = String::from("mode\tring_size\ton_ledger_bytes\ttx_table_bytes\tcas_bytes\tweighted_cost\n");
    for r in &rows {
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.1}\n",
            r.mode,
            r.ring_size,
            r.on_ledger_bytes,
            r.tx_table_bytes,
            r.cas_bytes,
            r.weighted_cost(tx_factor)
        ));
    }
    emit(&table, data)
}
