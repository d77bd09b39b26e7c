use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ActorCritic, NetConfig};
use super::AgentError;

const MAGIC: &[u8; 8] = b"LOBMMCKP";
const VERSION: u32 = 1;

/// Network parameters with a free-form config echo.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: ActorCritic,
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    net: NetConfig,
    meta: serde_json::Value,
}

/// Layout: magic, u32 version, u64 header length, JSON header, u64 parameter
/// count, parameters as little-endian f64.
pub fn write_checkpoint<W: Write>(ck: &Checkpoint, mut w: W) -> Result<(), AgentError> {
    let header = serde_json::to_vec(&Header {
        net: *ck.net.config(),
        meta: ck.meta.clone(),
    })
    .map_err(|e| AgentError::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    let params = ck.net.params();
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, AgentError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AgentError::Checkpoint("not a checkpoint file".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(AgentError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let mut header = vec![0u8; u64::from_le_bytes(b8) as usize];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        params.push(f64::from_le_bytes(b8));
    }
    let net = ActorCritic::from_params(header.net, params)?;
    Ok(Checkpoint { net, meta: header.meta })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<(), AgentError> {
    write_checkpoint(ck, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, AgentError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
