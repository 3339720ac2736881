//! Permissioned delegated-proof-of-stake ledger among the base stations.

pub mod block;
pub mod chain;
pub(crate) mod codec;
pub mod crypto;
pub mod stake;
pub mod tx;
pub mod verify;

pub use block::Block;
pub use chain::{CommittedBlock, Genesis, Ledger, LedgerConfig, Mempool, TxVerdict, Validation, ValidationContext};
pub use crypto::{Digest, KeyRing};
pub use stake::{elect_producers, initial_stakes, self_vote_ballots, Ballot, StakeTable};
pub use tx::{TransactionRecord, TxKind};
pub use verify::{block_interval_policy, verify_local_model, VerificationContext};

use thiserror::Error;

use crate::model::BsId;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("transaction signature does not verify")]
    BadSignature,

    #[error("transaction {0} already submitted")]
    DuplicateTransaction(String),

    #[error("transaction payload must be non-empty")]
    EmptyPayload,

    #[error("unknown base station {0}")]
    UnknownBs(BsId),

    #[error("invalid coin amount {0}")]
    InvalidAmount(f64),

    #[error("total hosted data is zero; stakes are undefined")]
    ZeroTotalData,

    #[error("ballot of BS {voter} spends {spent} of {stake} micro-coins")]
    OverspentBallot { voter: BsId, spent: u64, stake: u64 },

    #[error("cannot elect {requested} producers among {available} base stations")]
    ProducerCount { requested: usize, available: usize },

    #[error("BS {actual} produced out of turn; slot belongs to BS {expected}")]
    OutOfTurn { expected: BsId, actual: BsId },

    #[error("block {height} does not link to the chain tip")]
    BrokenLink { height: u64 },

    #[error("expected block height {expected}, got {actual}")]
    BadHeight { expected: u64, actual: u64 },

    #[error("invalid block: {0}")]
    InvalidBlock(String),

    #[error("invalid block interval: {0}")]
    InvalidInterval(String),

    #[error("corrupt chain log: {0}")]
    Corrupt(String),
}
