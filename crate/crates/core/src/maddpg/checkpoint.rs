//! Versioned binary snapshot of every agent's networks.
//!
//! Layout: magic `DTWNCKP\0`, version, 32-byte config digest, agent count,
//! then per agent the actor, critic, target actor and target critic, each as
//! layer sizes followed by parameters (f64 little-endian).

use super::train::Maddpg;
use crate::error::{Error, Result};
use crate::ledger::codec::{Reader, Writer};
use crate::ledger::crypto::Digest;
use crate::nn::DenseNet;

pub const MAGIC: &[u8; 8] = b"DTWNCKP\0";
pub const VERSION: u32 = 1;

fn write_net(w: &mut Writer, net: &DenseNet) {
    w.u32(net.sizes().len() as u32);
    for &n in net.sizes() {
        w.u64(n as u64);
    }
    for p in net.params() {
        w.raw(&p.to_le_bytes());
    }
}

fn read_net(r: &mut Reader<'_>, into: &mut DenseNet) -> Result<()> {
    let corrupt = |e: crate::ledger::LedgerError| Error::Checkpoint(e.to_string());
    let layers = r.u32().map_err(corrupt)? as usize;
    let sizes = (0..layers).map(|_| r.u64().map(|v| v as usize)).collect::<std::result::Result<Vec<_>, _>>().map_err(corrupt)?;
    if sizes != into.sizes() {
        return Err(Error::Checkpoint(format!("network shape {sizes:?} does not match {:?}", into.sizes())));
    }
    let bytes = r.take(into.num_params() * 8).map_err(corrupt)?;
    let params: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    into.set_params(&params)
}

pub fn encode(m: &Maddpg, config_digest: &Digest) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(MAGIC).u32(VERSION).raw(config_digest).u32(m.agents.len() as u32);
    for a in &m.agents {
        for net in [&a.actor, &a.critic, &a.target_actor, &a.target_critic] {
            write_net(&mut w, net);
        }
    }
    w.finish()
}

/// Reads the config digest without decoding the tensors.
pub fn peek_digest(bytes: &[u8]) -> Result<Digest> {
    let mut r = Reader::new(bytes);
    let corrupt = |e: crate::ledger::LedgerError| Error::Checkpoint(e.to_string());
    if r.take(8).map_err(corrupt)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let v = r.u32().map_err(corrupt)?;
    if v != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {v}")));
    }
    r.digest().map_err(corrupt)
}

/// Loads tensors into `m`, which must have the same shape. A mismatching
/// `expected_digest` is rejected.
pub fn decode_into(bytes: &[u8], m: &mut Maddpg, expected_digest: Option<&Digest>) -> Result<Digest> {
    let digest = peek_digest(bytes)?;
    if let Some(e) = expected_digest {
        if e != &digest {
            return Err(Error::Checkpoint("config digest differs from the checkpoint".into()));
        }
    }
    let mut r = Reader::new(&bytes[8 + 4 + 32..]);
    let n = r.u32().map_err(|e| Error::Checkpoint(e.to_string()))? as usize;
    if n != m.agents.len() {
        return Err(Error::Checkpoint(format!("checkpoint has {n} agents, expected {}", m.agents.len())));
    }
    for a in &mut m.agents {
        read_net(&mut r, &mut a.actor)?;
        read_net(&mut r, &mut a.critic)?;
        read_net(&mut r, &mut a.target_actor)?;
        read_net(&mut r, &mut a.target_critic)?;
    }
    if !r.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(digest)
}
