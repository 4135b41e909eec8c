use std::fs;
use std::io::Write;
use std::path::Path;

use ringvote::board::sha256;
use ringvote::group::{self, GroupPoint, KeyPair};

use crate::error::{CliError, Exit};

/// Writes `# <header>` followed by the secret scalar in hex. Refuses to
/// overwrite an existing file.
pub fn write_key_file(path: &Path, header: &str, key: &KeyPair) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => CliError::new(
                Exit::LedgerExists,
                format!("key file {} already exists", path.display()),
            ),
            _ => CliError::from(e),
        })?;
    writeln!(file, "# {header}")?;
    writeln!(file, "{}", group::scalar_to_hex(key.secret()))?;
    Ok(())
}

pub fn read_key_file(path: &Path) -> Result<KeyPair, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(Exit::Io, format!("reading key file {}: {e}", path.display())))?;
    let bad = |why: String| CliError::new(Exit::InvalidArgument, format!("key file {}: {why}", path.display()));
    let mut body = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let line = body.next().ok_or_else(|| bad("no key material".into()))?;
    if body.next().is_some() {
        return Err(bad("expected a single hex line".into()));
    }
    let secret = group::scalar_from_hex(line).map_err(|e| bad(e.to_string()))?;
    KeyPair::from_secret(secret).map_err(|e| bad(e.to_string()))
}

/// Short public identifier of a roster key.
pub fn fingerprint(point: &GroupPoint) -> String {
    hex::encode(&sha256(&group::encode_point(point))[..8])
}
