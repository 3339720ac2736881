//! Blocks and their canonical encoding.

use super::codec::{Reader, Writer};
use super::crypto::{sha256, Digest, KeyRing, Tag};
use super::tx::TransactionRecord;
use super::LedgerError;
use crate::model::BsId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub slot: u64,
    pub producer: BsId,
    pub prev_hash: Digest,
    /// Running digest over the transaction digests in order.
    pub tx_root: Digest,
    /// `S_B`: header bits plus the payload bits of every transaction.
    pub bits: u64,
    pub header_bits: u64,
    pub txs: Vec<TransactionRecord>,
    pub producer_tag: Tag,
}

pub fn tx_root(txs: &[TransactionRecord]) -> Digest {
    let digests: Vec<Digest> = txs.iter().map(TransactionRecord::digest).collect();
    let parts: Vec<&[u8]> = std::iter::once(b"dtwn-txs".as_slice())
        .chain(digests.iter().map(|d| d.as_slice()))
        .collect();
    sha256(&parts)
}

pub fn block_bits(header_bits: u64, txs: &[TransactionRecord]) -> u64 {
    header_bits + txs.iter().map(|t| t.payload_bits).sum::<u64>()
}

impl Block {
    /// Assembles a block and signs its header with the producer's key.
    pub fn seal(
        height: u64,
        slot: u64,
        producer: BsId,
        prev_hash: Digest,
        header_bits: u64,
        txs: Vec<TransactionRecord>,
        keys: &KeyRing,
    ) -> Result<Self, LedgerError> {
        let mut b = Block {
            height,
            slot,
            producer,
            prev_hash,
            tx_root: tx_root(&txs),
            bits: block_bits(header_bits, &txs),
            header_bits,
            txs,
            producer_tag: [0; 32],
        };
        b.producer_tag = keys.tag(producer, &b.digest()).ok_or(LedgerError::UnknownBs(producer))?;
        Ok(b)
    }

    /// Recomputes the root, size and producer tag after the transaction list changed.
    pub fn reseal(&mut self, keys: &KeyRing) -> Result<(), LedgerError> {
        *self = Block::seal(
            self.height,
            self.slot,
            self.producer,
            self.prev_hash,
            self.header_bits,
            std::mem::take(&mut self.txs),
            keys,
        )?;
        Ok(())
    }

    fn header(&self) -> Writer {
        let mut w = Writer::new();
        w.raw(b"dtwn-block")
            .u64(self.height)
            .u64(self.slot)
            .u64(self.producer as u64)
            .raw(&self.prev_hash)
            .raw(&self.tx_root)
            .u64(self.bits)
            .u64(self.header_bits)
            .u64(self.txs.len() as u64);
        w
    }

    /// Header digest; covers the transactions through `tx_root`.
    pub fn digest(&self) -> Digest {
        sha256(&[self.header().as_slice()])
    }

    /// Root and size agree with the transaction list and the producer tag verifies.
    pub fn check_structure(&self, keys: &KeyRing) -> Result<(), LedgerError> {
        if self.tx_root != tx_root(&self.txs) {
            return Err(LedgerError::InvalidBlock(format!("block {} transaction root mismatch", self.height)));
        }
        if self.bits != block_bits(self.header_bits, &self.txs) {
            return Err(LedgerError::InvalidBlock(format!("block {} size mismatch", self.height)));
        }
        if !keys.verify(self.producer, &self.digest(), &self.producer_tag) {
            return Err(LedgerError::InvalidBlock(format!("block {} producer tag invalid", self.height)));
        }
        Ok(())
    }

    pub fn encode(&self, w: &mut Writer) {
        w.u64(self.height)
            .u64(self.slot)
            .u64(self.producer as u64)
            .raw(&self.prev_hash)
            .raw(&self.tx_root)
            .u64(self.bits)
            .u64(self.header_bits)
            .raw(&self.producer_tag)
            .u64(self.txs.len() as u64);
        for tx in &self.txs {
            tx.encode(w);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, LedgerError> {
        let height = r.u64()?;
        let slot = r.u64()?;
        let producer = r.u64()? as BsId;
        let prev_hash = r.digest()?;
        let tx_root = r.digest()?;
        let bits = r.u64()?;
        let header_bits = r.u64()?;
        let producer_tag = r.digest()?;
        let n = r.u64()?;
        let txs = (0..n).map(|_| TransactionRecord::decode(r)).collect::<Result<_, _>>()?;
        Ok(Block { height, slot, producer, prev_hash, tx_root, bits, header_bits, txs, producer_tag })
    }
}
