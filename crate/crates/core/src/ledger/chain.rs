//! The permissioned chain: mempool, round-robin production, validation with
//! per-transaction verdicts, rewards, replay and export.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::block::Block;
use super::codec::{Reader, Writer};
use super::crypto::{hex, sha256, Digest, KeyRing};
use super::stake::{coins_to_units, elect_producers, initial_stakes, self_vote_ballots, Ballot, StakeTable};
use super::tx::{TransactionRecord, TxKind};
use super::verify::{verify_local_model, VerificationContext};
use super::LedgerError;
use crate::error::Result;
use crate::fl::ModelParams;
use crate::model::{Association, BsId};

const LOG_MAGIC: &[u8; 8] = b"DTWNLOG1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerConfig {
    /// Initial coin pool `S_ini`.
    pub s_ini: f64,
    pub reward_coins: f64,
    pub num_producers: usize,
    pub header_bits: u64,
    pub verification_threshold: f64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self { s_ini: 100.0, reward_coins: 1.0, num_producers: 3, header_bits: 1000, verification_threshold: 1.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxVerdict {
    Valid,
    BadSignature,
    /// A training model whose holdout loss exceeded the threshold.
    FailedVerification,
    /// A payload that does not decode to a finite model of the right size.
    Malformed,
}

impl TxVerdict {
    fn code(self) -> u8 {
        match self {
            TxVerdict::Valid => 0,
            TxVerdict::BadSignature => 1,
            TxVerdict::FailedVerification => 2,
            TxVerdict::Malformed => 3,
        }
    }

    fn from_code(c: u8) -> std::result::Result<Self, LedgerError> {
        Ok(match c {
            0 => TxVerdict::Valid,
            1 => TxVerdict::BadSignature,
            2 => TxVerdict::FailedVerification,
            3 => TxVerdict::Malformed,
            _ => return Err(LedgerError::Corrupt(format!("unknown verdict {c}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TxVerdict::Valid => "valid",
            TxVerdict::BadSignature => "bad-signature",
            TxVerdict::FailedVerification => "failed-verification",
            TxVerdict::Malformed => "malformed",
        }
    }
}

/// Inputs the validators need beyond the chain itself.
#[derive(Debug, Clone, Default)]
pub struct ValidationContext<'a> {
    pub model: Option<VerificationContext<'a>>,
    /// Validators that vote to reject regardless of content.
    pub faulty: &'a [BsId],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub accepted: bool,
    pub votes_for: usize,
    pub votes_against: usize,
    pub verdicts: Vec<TxVerdict>,
    /// Micro-coins credited to each BS if the block is committed.
    pub rewards: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommittedBlock {
    pub block: Block,
    pub verdicts: Vec<TxVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Genesis {
    pub key_seed: u64,
    pub stakes: StakeTable,
    pub producers: Vec<BsId>,
}

impl Genesis {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.key_seed).u64(self.stakes.initial_pool_units()).u64(self.stakes.num_bs() as u64);
        for &u in self.stakes.all_units() {
            w.u64(u);
        }
        w.u64(self.producers.len() as u64);
        for &p in &self.producers {
            w.u64(p as u64);
        }
    }

    fn decode(r: &mut Reader<'_>) -> std::result::Result<Self, LedgerError> {
        let key_seed = r.u64()?;
        let pool = r.u64()?;
        let m = r.u64()?;
        let units = (0..m).map(|_| r.u64()).collect::<std::result::Result<_, _>>()?;
        let np = r.u64()?;
        let producers = (0..np).map(|_| r.u64().map(|p| p as BsId)).collect::<std::result::Result<_, _>>()?;
        Ok(Self { key_seed, stakes: StakeTable::from_units(units, pool), producers })
    }

    pub fn digest(&self) -> Digest {
        let mut w = Writer::new();
        w.raw(b"dtwn-genesis");
        self.encode(&mut w);
        sha256(&[w.as_slice()])
    }
}

/// Pending transactions, deduplicated by digest over the ledger's lifetime.
#[derive(Debug, Clone, Default)]
pub struct Mempool {
    pending: Vec<TransactionRecord>,
    seen: HashSet<Digest>,
}

impl Mempool {
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn pending(&self) -> &[TransactionRecord] {
        &self.pending
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    cfg: LedgerConfig,
    keys: KeyRing,
    genesis: Genesis,
    stakes: StakeTable,
    blocks: Vec<CommittedBlock>,
    mempool: Mempool,
    slot: u64,
}

impl Ledger {
    /// Genesis from the association: data-proportional stakes, then an
    /// election with the given ballots (self-votes when `None`).
    pub fn genesis(cfg: LedgerConfig, assoc: &Association, ballots: Option<&[Ballot]>, key_seed: u64) -> Result<Self> {
        let stakes = initial_stakes(assoc, cfg.s_ini)?;
        let producers = match ballots {
            Some(b) => elect_producers(&stakes, b, cfg.num_producers)?,
            None => elect_producers(&stakes, &self_vote_ballots(&stakes), cfg.num_producers)?,
        };
        coins_to_units(cfg.reward_coins)?;
        let keys = KeyRing::derive(key_seed, assoc.num_bs());
        let genesis = Genesis { key_seed, stakes: stakes.clone(), producers };
        Ok(Self { cfg, keys, genesis, stakes, blocks: Vec::new(), mempool: Mempool::default(), slot: 0 })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.cfg
    }

    pub fn keys(&self) -> &KeyRing {
        &self.keys
    }

    pub fn genesis_record(&self) -> &Genesis {
        &self.genesis
    }

    pub fn stakes(&self) -> &StakeTable {
        &self.stakes
    }

    pub fn producers(&self) -> &[BsId] {
        &self.genesis.producers
    }

    pub fn blocks(&self) -> &[CommittedBlock] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn head_digest(&self) -> Digest {
        self.blocks.last().map_or_else(|| self.genesis.digest(), |c| c.block.digest())
    }

    pub fn scheduled_producer(&self) -> BsId {
        let p = &self.genesis.producers;
        p[(self.slot % p.len() as u64) as usize]
    }

    pub fn sign(&self, kind: TxKind, author: BsId, payload: Vec<u8>, payload_bits: u64, timestamp: u64) -> Result<TransactionRecord> {
        Ok(TransactionRecord::signed(kind, author, payload, payload_bits, timestamp, &self.keys)?)
    }

    /// Queues a signed transaction once.
    pub fn submit(&mut self, tx: TransactionRecord) -> Result<Digest> {
        if !tx.verify_signature(&self.keys) {
            return Err(LedgerError::BadSignature.into());
        }
        let d = tx.digest();
        if !self.mempool.seen.insert(d) {
            return Err(LedgerError::DuplicateTransaction(hex(&d)).into());
        }
        self.mempool.pending.push(tx);
        Ok(d)
    }

    /// Packs every pending transaction stamped at or before `cutoff`, ordered by
    /// timestamp then digest. Consumes the current slot.
    pub fn produce_block(&mut self, producer: BsId, cutoff: u64) -> Result<Block> {
        let expected = self.scheduled_producer();
        if producer != expected {
            return Err(LedgerError::OutOfTurn { expected, actual: producer }.into());
        }
        let (mut txs, rest): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.mempool.pending).into_iter().partition(|t| t.timestamp <= cutoff);
        self.mempool.pending = rest;
        txs.sort_by_cached_key(|t| (t.timestamp, t.digest()));
        let block = Block::seal(
            self.height() + 1,
            self.slot,
            producer,
            self.head_digest(),
            self.cfg.header_bits,
            txs,
            &self.keys,
        )?;
        self.slot += 1;
        Ok(block)
    }

    /// Runs every producer's checks on `block`. Linking and structural
    /// failures reject the block outright.
    pub fn validate_block(&self, block: &Block, ctx: &ValidationContext<'_>) -> Result<Validation> {
        if block.prev_hash != self.head_digest() {
            return Err(LedgerError::BrokenLink { height: block.height }.into());
        }
        if block.height != self.height() + 1 {
            return Err(LedgerError::BadHeight { expected: self.height() + 1, actual: block.height }.into());
        }
        if !self.genesis.producers.contains(&block.producer) {
            return Err(LedgerError::InvalidBlock(format!("BS {} is not a producer", block.producer)).into());
        }
        block.check_structure(&self.keys)?;

        let verdicts = block
            .txs
            .iter()
            .map(|tx| self.judge(tx, ctx))
            .collect::<Result<Vec<_>>>()?;
        let validators = &self.genesis.producers;
        let votes_against = validators.iter().filter(|v| ctx.faulty.contains(v)).count();
        let votes_for = validators.len() - votes_against;
        let accepted = 2 * votes_for > validators.len();

        let mut rewards = vec![0u64; self.stakes.num_bs()];
        if accepted {
            let reward = coins_to_units(self.cfg.reward_coins)?;
            for (tx, v) in block.txs.iter().zip(&verdicts) {
                if tx.kind == TxKind::TrainingModel && *v == TxVerdict::Valid {
                    rewards[tx.author] += reward;
                }
            }
        }
        Ok(Validation { accepted, votes_for, votes_against, verdicts, rewards })
    }

    fn judge(&self, tx: &TransactionRecord, ctx: &ValidationContext<'_>) -> Result<TxVerdict> {
        if tx.author >= self.stakes.num_bs() || !tx.verify_signature(&self.keys) {
            return Ok(TxVerdict::BadSignature);
        }
        if tx.kind != TxKind::TrainingModel {
            return Ok(TxVerdict::Valid);
        }
        let model = ctx.model.as_ref().ok_or_else(|| {
            LedgerError::InvalidBlock("training-model transactions need a verification context".into())
        })?;
        Ok(match verify_local_model(tx, model) {
            Ok(true) => TxVerdict::Valid,
            Ok(false) => TxVerdict::FailedVerification,
            Err(_) => TxVerdict::Malformed,
        })
    }

    /// Appends an accepted block and credits its rewards. Rejected blocks are
    /// dropped; their transactions are not re-queued.
    pub fn commit(&mut self, block: Block, validation: &Validation) -> Result<bool> {
        if !validation.accepted {
            return Ok(false);
        }
        if block.prev_hash != self.head_digest() {
            return Err(LedgerError::BrokenLink { height: block.height }.into());
        }
        for (bs, &units) in validation.rewards.iter().enumerate() {
            self.stakes.award(bs, units)?;
        }
        self.blocks.push(CommittedBlock { block, verdicts: validation.verdicts.clone() });
        Ok(true)
    }

    /// Produce with the scheduled producer, validate and commit.
    pub fn run_slot(&mut self, cutoff: u64, ctx: &ValidationContext<'_>) -> Result<(Block, Validation)> {
        let block = self.produce_block(self.scheduled_producer(), cutoff)?;
        let validation = self.validate_block(&block, ctx)?;
        self.commit(block.clone(), &validation)?;
        Ok((block, validation))
    }

    /// Training models from an accepted block that passed verification.
    pub fn verified_models(block: &Block, validation: &Validation) -> Result<Vec<(BsId, ModelParams)>> {
        if !validation.accepted {
            return Ok(Vec::new());
        }
        block
            .txs
            .iter()
            .zip(&validation.verdicts)
            .filter(|(tx, v)| tx.kind == TxKind::TrainingModel && **v == TxVerdict::Valid)
            .map(|(tx, _)| Ok((tx.author, ModelParams::from_bytes(&tx.payload)?)))
            .collect()
    }

    /// Rebuilds the ledger from genesis and a committed log, checking every
    /// link, structure and recorded signature verdict.
    pub fn replay(cfg: LedgerConfig, genesis: Genesis, blocks: Vec<CommittedBlock>) -> Result<Self> {
        let keys = KeyRing::derive(genesis.key_seed, genesis.stakes.num_bs());
        let reward = coins_to_units(cfg.reward_coins)?;
        let mut ledger = Self {
            cfg,
            keys,
            stakes: genesis.stakes.clone(),
            genesis,
            blocks: Vec::new(),
            mempool: Mempool::default(),
            slot: 0,
        };
        for c in blocks {
            let b = &c.block;
            if b.prev_hash != ledger.head_digest() {
                return Err(LedgerError::BrokenLink { height: b.height }.into());
            }
            if b.height != ledger.height() + 1 || c.verdicts.len() != b.txs.len() {
                return Err(LedgerError::Corrupt(format!("block {} out of sequence", b.height)).into());
            }
            if b.slot < ledger.slot || ledger.genesis.producers[(b.slot % ledger.genesis.producers.len() as u64) as usize] != b.producer {
                return Err(LedgerError::Corrupt(format!("block {} produced out of turn", b.height)).into());
            }
            b.check_structure(&ledger.keys)?;
            for (tx, v) in b.txs.iter().zip(&c.verdicts) {
                let sig_ok = tx.author < ledger.stakes.num_bs() && tx.verify_signature(&ledger.keys);
                if sig_ok == (*v == TxVerdict::BadSignature) {
                    return Err(LedgerError::Corrupt(format!("block {} verdict contradicts signature", b.height)).into());
                }
                if tx.kind == TxKind::TrainingModel && *v == TxVerdict::Valid {
                    ledger.stakes.award(tx.author, reward)?;
                }
                ledger.mempool.seen.insert(tx.digest());
            }
            ledger.slot = b.slot + 1;
            ledger.blocks.push(c);
        }
        Ok(ledger)
    }

    pub fn export(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(LOG_MAGIC)
            .u64(coins_to_units(self.cfg.s_ini).unwrap_or(0))
            .u64(coins_to_units(self.cfg.reward_coins).unwrap_or(0))
            .u64(self.cfg.num_producers as u64)
            .u64(self.cfg.header_bits)
            .u64(self.cfg.verification_threshold.to_bits());
        self.genesis.encode(&mut w);
        w.u64(self.blocks.len() as u64);
        for c in &self.blocks {
            let mut entry = Writer::new();
            c.block.encode(&mut entry);
            entry.u64(c.verdicts.len() as u64);
            for v in &c.verdicts {
                entry.u8(v.code());
            }
            w.bytes(entry.as_slice());
        }
        w.finish()
    }

    pub fn import(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != LOG_MAGIC {
            return Err(LedgerError::Corrupt("not a chain log".into()).into());
        }
        let cfg = LedgerConfig {
            s_ini: r.u64()? as f64 / super::stake::UNITS_PER_COIN as f64,
            reward_coins: r.u64()? as f64 / super::stake::UNITS_PER_COIN as f64,
            num_producers: r.u64()? as usize,
            header_bits: r.u64()?,
            verification_threshold: f64::from_bits(r.u64()?),
        };
        let genesis = Genesis::decode(&mut r)?;
        let n = r.u64()?;
        let mut blocks = Vec::new();
        for _ in 0..n {
            let mut er = Reader::new(r.bytes()?);
            let block = Block::decode(&mut er)?;
            let nv = er.u64()?;
            let verdicts = (0..nv).map(|_| er.u8().and_then(TxVerdict::from_code)).collect::<std::result::Result<_, _>>()?;
            if !er.is_empty() {
                return Err(LedgerError::Corrupt("trailing bytes in block entry".into()).into());
            }
            blocks.push(CommittedBlock { block, verdicts });
        }
        if !r.is_empty() {
            return Err(LedgerError::Corrupt("trailing bytes after log".into()).into());
        }
        Self::replay(cfg, genesis, blocks)
    }

    /// One line per block: height, slot, producer, size and transaction verdicts.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "genesis producers={:?} head={}", self.genesis.producers, hex(&self.head_digest()));
        for c in &self.blocks {
            let b = &c.block;
            let txs: Vec<String> = b
                .txs
                .iter()
                .zip(&c.verdicts)
                .map(|(t, v)| format!("{}@{}:{}", t.kind.name(), t.author, v.name()))
                .collect();
            let _ = writeln!(
                s,
                "height={} slot={} producer={} S_B={} txs=[{}]",
                b.height,
                b.slot,
                b.producer,
                b.bits,
                txs.join(", ")
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::fl::{ClusterSource, Dataset, ModelKind, ModelSpec, SyntheticTask};
    use crate::rng::stream_rng;

    fn setup(m: usize, np: usize) -> Ledger {
        let assoc = Association::round_robin(vec![10; m], m);
        Ledger::genesis(LedgerConfig { num_producers: np, ..Default::default() }, &assoc, None, 42).unwrap()
    }

    fn holdout() -> (ModelSpec, Dataset) {
        let task = SyntheticTask { input_dim: 3, num_classes: 2, separation: 2.0, noise_std: 1.0 };
        let src = ClusterSource::new(&task, &mut stream_rng(1, 1)).unwrap();
        (ModelSpec::new(ModelKind::LogisticRegression, 3, 2), src.sample(60, &mut stream_rng(1, 2)))
    }

    fn err_kind(e: Error) -> LedgerError {
        match e {
            Error::Ledger(l) => l,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn submit_dedups_and_checks_signatures() {
        let mut l = setup(3, 3);
        let tx = l.sign(TxKind::TwinData, 1, vec![1; 32], 256, 0).unwrap();
        l.submit(tx.clone()).unwrap();
        assert_eq!(l.mempool().len(), 1);
        assert!(matches!(err_kind(l.submit(tx.clone()).unwrap_err()), LedgerError::DuplicateTransaction(_)));
        let mut bad = tx;
        bad.payload[0] ^= 1;
        assert!(matches!(err_kind(l.submit(bad).unwrap_err()), LedgerError::BadSignature));
    }

    #[test]
    fn round_robin_schedule_and_out_of_turn() {
        let mut l = setup(5, 3);
        assert_eq!(l.producers(), &[0, 1, 2]);
        assert!(matches!(err_kind(l.produce_block(1, 0).unwrap_err()), LedgerError::OutOfTurn { expected: 0, actual: 1 }));
        let ctx = ValidationContext::default();
        let mut seen = Vec::new();
        for _ in 0..6 {
            let (b, v) = l.run_slot(0, &ctx).unwrap();
            assert!(v.accepted);
            seen.push(b.producer);
        }
        assert_eq!(seen, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn blocks_take_txs_in_time_order_up_to_cutoff() {
        let mut l = setup(3, 1);
        for (ts, author) in [(30u64, 0usize), (10, 1), (20, 2), (50, 0)] {
            let tx = l.sign(TxKind::TwinModel, author, vec![ts as u8], 8, ts).unwrap();
            l.submit(tx).unwrap();
        }
        let b = l.produce_block(0, 40).unwrap();
        assert_eq!(b.txs.iter().map(|t| t.timestamp).collect::<Vec<_>>(), vec![10, 20, 30]);
        assert_eq!(l.mempool().len(), 1);
    }

    #[test]
    fn tampered_training_tx_earns_nothing_and_is_excluded() {
        let (spec, hold) = holdout();
        let global = ModelParams::zeros(spec.num_params());
        let model = VerificationContext::new(&spec, &hold, &global, 1.05).unwrap();
        let ctx = ValidationContext { model: Some(model), faulty: &[] };
        let mut l = setup(3, 3);
        for author in 0..3 {
            let tx = l.sign(TxKind::TrainingModel, author, global.to_bytes(), 1_000_000, author as u64).unwrap();
            l.submit(tx).unwrap();
        }
        let before = l.stakes().clone();
        let mut block = l.produce_block(0, u64::MAX).unwrap();
        block.txs[1].payload[3] ^= 0x10;
        block.reseal(l.keys()).unwrap();
        let v = l.validate_block(&block, &ctx).unwrap();
        assert!(v.accepted);
        assert_eq!(v.verdicts, vec![TxVerdict::Valid, TxVerdict::BadSignature, TxVerdict::Valid]);
        let models = Ledger::verified_models(&block, &v).unwrap();
        assert_eq!(models.iter().map(|(a, _)| *a).collect::<Vec<_>>(), vec![0, 2]);
        l.commit(block, &v).unwrap();
        let reward = coins_to_units(1.0).unwrap();
        assert_eq!(l.stakes().units(0) - before.units(0), reward);
        assert_eq!(l.stakes().units(1), before.units(1));
        assert_eq!(l.stakes().units(2) - before.units(2), reward);
    }

    #[test]
    fn failing_model_is_flagged() {
        let (spec, hold) = holdout();
        let global = ModelParams::zeros(spec.num_params());
        let ctx = ValidationContext { model: Some(VerificationContext::new(&spec, &hold, &global, 1.05).unwrap()), faulty: &[] };
        let mut l = setup(2, 1);
        let bad = ModelParams::new(vec![40.0, -40.0, 40.0, -40.0, 40.0, -40.0, 5.0, -5.0]);
        l.submit(l.sign(TxKind::TrainingModel, 1, bad.to_bytes(), 64, 0).unwrap()).unwrap();
        l.submit(l.sign(TxKind::TrainingModel, 0, vec![1, 2, 3], 64, 0).unwrap()).unwrap();
        let (b, v) = l.run_slot(0, &ctx).unwrap();
        let by_author: Vec<_> = b.txs.iter().map(|t| t.author).zip(v.verdicts.iter().copied()).collect();
        assert!(by_author.contains(&(1, TxVerdict::FailedVerification)));
        assert!(by_author.contains(&(0, TxVerdict::Malformed)));
        assert_eq!(v.rewards, vec![0, 0]);
    }

    #[test]
    fn broken_link_is_rejected_outright() {
        let mut l = setup(3, 3);
        let mut b = l.produce_block(0, 0).unwrap();
        b.prev_hash[0] ^= 1;
        b.reseal(l.keys()).unwrap();
        assert!(matches!(
            err_kind(l.validate_block(&b, &ValidationContext::default()).unwrap_err()),
            LedgerError::BrokenLink { height: 1 }
        ));
    }

    #[test]
    fn quorum_needs_a_majority() {
        let mut l = setup(3, 3);
        let b = l.produce_block(0, 0).unwrap();
        let one = ValidationContext { model: None, faulty: &[2] };
        assert!(l.validate_block(&b, &one).unwrap().accepted);
        let two = ValidationContext { model: None, faulty: &[1, 2] };
        let v = l.validate_block(&b, &two).unwrap();
        assert!(!v.accepted);
        assert!(!l.commit(b, &v).unwrap());
        assert_eq!(l.height(), 0);
        assert_eq!(l.scheduled_producer(), 1);
    }

    #[test]
    fn export_import_replays_to_same_head() {
        let (spec, hold) = holdout();
        let global = ModelParams::zeros(spec.num_params());
        let ctx = ValidationContext { model: Some(VerificationContext::new(&spec, &hold, &global, 1.05).unwrap()), faulty: &[] };
        let mut l = setup(4, 2);
        for round in 0..4u64 {
            for author in 0..4 {
                let tx = l.sign(TxKind::TrainingModel, author, global.to_bytes(), 500, round * 10 + author as u64).unwrap();
                l.submit(tx).unwrap();
            }
            l.submit(l.sign(TxKind::TwinData, 0, vec![round as u8; 32], 256, round * 10).unwrap()).unwrap();
            l.run_slot(u64::MAX, &ctx).unwrap();
        }
        let bytes = l.export();
        let r = Ledger::import(&bytes).unwrap();
        assert_eq!(r.head_digest(), l.head_digest());
        assert_eq!(r.stakes(), l.stakes());
        assert_eq!(r.summary(), l.summary());
        assert_eq!(r.stakes().total_units(), coins_to_units(100.0 + 16.0).unwrap());

        let mut corrupt = bytes.clone();
        let last = corrupt.len() - 40;
        corrupt[last] ^= 1;
        assert!(Ledger::import(&corrupt).is_err());
        assert!(Ledger::import(&bytes[..bytes.len() - 1]).is_err());
    }
}
