//! Ledger transaction records.

use super::codec::{Reader, Writer};
use super::crypto::{sha256, Digest, KeyRing, Tag};
use super::LedgerError;
use crate::model::BsId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TxKind {
    /// Behavior model of a digital twin.
    TwinModel,
    /// Digest of twin data or state.
    TwinData,
    /// Locally aggregated model of a BS.
    TrainingModel,
}

impl TxKind {
    pub fn code(self) -> u8 {
        match self {
            TxKind::TwinModel => 0,
            TxKind::TwinData => 1,
            TxKind::TrainingModel => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self, LedgerError> {
        match c {
            0 => Ok(TxKind::TwinModel),
            1 => Ok(TxKind::TwinData),
            2 => Ok(TxKind::TrainingModel),
            _ => Err(LedgerError::Corrupt(format!("unknown transaction kind {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TxKind::TwinModel => "twin-model",
            TxKind::TwinData => "twin-data",
            TxKind::TrainingModel => "training-model",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRecord {
    pub kind: TxKind,
    pub author: BsId,
    pub payload: Vec<u8>,
    /// Size charged to the block, which may be a nominal model size.
    pub payload_bits: u64,
    /// Simulated time in nanoseconds.
    pub timestamp: u64,
    pub signature: Tag,
}

impl TransactionRecord {
    /// Builds and signs a record with the author's key.
    pub fn signed(
        kind: TxKind,
        author: BsId,
        payload: Vec<u8>,
        payload_bits: u64,
        timestamp: u64,
        keys: &KeyRing,
    ) -> Result<Self, LedgerError> {
        if payload_bits == 0 {
            return Err(LedgerError::EmptyPayload);
        }
        let mut tx = Self { kind, author, payload, payload_bits, timestamp, signature: [0; 32] };
        tx.signature = keys.tag(author, &tx.digest()).ok_or(LedgerError::UnknownBs(author))?;
        Ok(tx)
    }

    fn body(&self) -> Writer {
        let mut w = Writer::new();
        w.u8(self.kind.code())
            .u64(self.author as u64)
            .bytes(&self.payload)
            .u64(self.payload_bits)
            .u64(self.timestamp);
        w
    }

    /// Digest of every field except the signature.
    pub fn digest(&self) -> Digest {
        sha256(&[self.body().as_slice()])
    }

    pub fn verify_signature(&self, keys: &KeyRing) -> bool {
        self.payload_bits > 0 && keys.verify(self.author, &self.digest(), &self.signature)
    }

    pub fn encode(&self, w: &mut Writer) {
        w.raw(self.body().as_slice()).raw(&self.signature);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, LedgerError> {
        let kind = TxKind::from_code(r.u8()?)?;
        let author = r.u64()? as BsId;
        let payload = r.bytes()?.to_vec();
        let payload_bits = r.u64()?;
        let timestamp = r.u64()?;
        let signature = r.digest()?;
        Ok(Self { kind, author, payload, payload_bits, timestamp, signature })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flipped_payload_bit_breaks_signature() {
        let keys = KeyRing::derive(3, 2);
        let tx = TransactionRecord::signed(TxKind::TrainingModel, 1, vec![1, 2, 3], 24, 5, &keys).unwrap();
        assert!(tx.verify_signature(&keys));
        let mut bad = tx.clone();
        bad.payload[0] ^= 1;
        assert!(!bad.verify_signature(&keys));
        let mut forged = tx.clone();
        forged.author = 0;
        assert!(!forged.verify_signature(&keys));
    }

    #[test]
    fn codec_round_trip() {
        let keys = KeyRing::derive(3, 2);
        let tx = TransactionRecord::signed(TxKind::TwinData, 0, vec![9; 40], 256, 77, &keys).unwrap();
        let mut w = Writer::new();
        tx.encode(&mut w);
        let bytes = w.finish();
        let mut r = Reader::new(&bytes);
        assert_eq!(TransactionRecord::decode(&mut r).unwrap(), tx);
        assert!(r.is_empty());
    }

    #[test]
    fn zero_bits_rejected() {
        let keys = KeyRing::derive(3, 2);
        assert!(matches!(
            TransactionRecord::signed(TxKind::TwinModel, 0, vec![], 0, 0, &keys),
            Err(LedgerError::EmptyPayload)
        ));
        assert!(matches!(
            TransactionRecord::signed(TxKind::TwinModel, 5, vec![1], 8, 0, &keys),
            Err(LedgerError::UnknownBs(5))
        ));
    }
}
