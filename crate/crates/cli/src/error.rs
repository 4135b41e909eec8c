use std::fmt;

use ringvote::board::{BoardError, StoreError};
use ringvote::escrow::EscrowError;
use ringvote::tally::TallyError;

/// Process exit statuses. Keep `EXIT_CODES` in sync.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Internal = 1,
    Config = 3,
    LedgerExists = 4,
    Io = 5,
    CorruptLedger = 6,
    Phase = 7,
    NotInRoster = 8,
    RingTooLarge = 9,
    MissingReveals = 10,
    EscrowMismatch = 11,
    ReportMismatch = 12,
    SubmitterLint = 13,
    InvalidArgument = 14,
}

pub const EXIT_CODES: &str = "\
Exit status:
   0  success
   1  internal error
   2  usage error
   3  invalid election config
   4  ledger or key file already exists
   5  i/o error or missing ledger
   6  ledger or payload store failed integrity checks
   7  operation not allowed in the current phase
   8  voter key is not in the roster
   9  requested ring size exceeds the roster
  10  escrow reveals missing
  11  escrow secret does not match its commitment
  12  tally report does not match the ledger
  13  submitter id would identify the voter
  14  invalid argument or key file";

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self {
            exit,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn escrow_exit(e: &EscrowError) -> Exit {
    match e {
        EscrowError::RevealMismatch(_) | EscrowError::ChainMismatch(_) | EscrowError::InvalidProof(_) => {
            Exit::EscrowMismatch
        }
        EscrowError::MissingReveal(_) => Exit::MissingReveals,
        EscrowError::UnknownManager(_) | EscrowError::ZeroSecret | EscrowError::IdentityShare(_) => {
            Exit::InvalidArgument
        }
        _ => Exit::Phase,
    }
}

impl From<BoardError> for CliError {
    fn from(e: BoardError) -> Self {
        let exit = match &e {
            BoardError::WrongPhase { .. }
            | BoardError::DeadlinePassed(_)
            | BoardError::AlreadyFinal
            | BoardError::BadTransition { .. } => Exit::Phase,
            BoardError::Config(_)
            | BoardError::ConfigPlacement
            | BoardError::NoConfig
            | BoardError::RosterFull(_)
            | BoardError::RosterIncomplete { .. }
            | BoardError::DuplicateRosterKey => Exit::Config,
            BoardError::Escrow(inner) => escrow_exit(inner),
            BoardError::Chain(_) | BoardError::BadGenesis | BoardError::Parse { .. } | BoardError::Replay { .. } => {
                Exit::CorruptLedger
            }
            BoardError::Io(_) => Exit::Io,
            BoardError::Malformed { .. } | BoardError::EmptySubmitter => Exit::InvalidArgument,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        let exit = match e {
            StoreError::Io(_) => Exit::Io,
            _ => Exit::CorruptLedger,
        };
        CliError::new(exit, format!("payload store: {e}"))
    }
}

impl From<TallyError> for CliError {
    fn from(e: TallyError) -> Self {
        let exit = match &e {
            TallyError::WrongPhase(_) => Exit::Phase,
            TallyError::NoConfig => Exit::Config,
            TallyError::RevealsIncomplete(_) => Exit::MissingReveals,
            TallyError::SecretMismatch => Exit::EscrowMismatch,
            TallyError::Escrow(inner) => escrow_exit(inner),
            TallyError::Pool(_) => Exit::Internal,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(Exit::Io, e.to_string())
    }
}
