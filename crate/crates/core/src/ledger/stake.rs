//! Training-coin accounting and delegated-stake producer election.
//!
//! Coins are held as integer micro-coins so that the genesis allocation sums
//! to the initial pool exactly.

use super::LedgerError;
use crate::model::{Association, BsId};

pub const UNITS_PER_COIN: u64 = 1_000_000;

pub fn coins_to_units(coins: f64) -> Result<u64, LedgerError> {
    if !(coins.is_finite() && coins >= 0.0) {
        return Err(LedgerError::InvalidAmount(coins));
    }
    let units = (coins * UNITS_PER_COIN as f64).round();
    if units > u64::MAX as f64 {
        return Err(LedgerError::InvalidAmount(coins));
    }
    Ok(units as u64)
}

pub fn units_to_coins(units: u64) -> f64 {
    units as f64 / UNITS_PER_COIN as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StakeTable {
    units: Vec<u64>,
    initial_pool: u64,
}

impl StakeTable {
    pub fn from_units(units: Vec<u64>, initial_pool: u64) -> Self {
        Self { units, initial_pool }
    }

    pub fn num_bs(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self, bs: BsId) -> u64 {
        self.units.get(bs).copied().unwrap_or(0)
    }

    pub fn coins(&self, bs: BsId) -> f64 {
        units_to_coins(self.units(bs))
    }

    pub fn all_units(&self) -> &[u64] {
        &self.units
    }

    pub fn total_units(&self) -> u64 {
        self.units.iter().sum()
    }

    pub fn initial_pool_units(&self) -> u64 {
        self.initial_pool
    }

    pub fn award(&mut self, bs: BsId, units: u64) -> Result<(), LedgerError> {
        let s = self.units.get_mut(bs).ok_or(LedgerError::UnknownBs(bs))?;
        *s = s.checked_add(units).ok_or(LedgerError::InvalidAmount(units_to_coins(units)))?;
        Ok(())
    }
}

/// Splits `s_ini` coins across BSs in proportion to the data they host.
///
/// Each BS receives the floor of its exact share; leftover micro-coins go to
/// the largest fractional remainders (lower id first on ties).
pub fn initial_stakes(assoc: &Association, s_ini: f64) -> Result<StakeTable, LedgerError> {
    let pool = coins_to_units(s_ini)?;
    let data = assoc.bs_data();
    let total: u128 = data.iter().map(|&d| d as u128).sum();
    if total == 0 {
        return Err(LedgerError::ZeroTotalData);
    }
    let mut units = Vec::with_capacity(data.len());
    let mut remainders = Vec::with_capacity(data.len());
    for (bs, &d) in data.iter().enumerate() {
        let exact = pool as u128 * d as u128;
        units.push((exact / total) as u64);
        remainders.push((exact % total, bs));
    }
    let leftover = pool - units.iter().sum::<u64>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, bs) in remainders.iter().take(leftover as usize) {
        units[bs] += 1;
    }
    Ok(StakeTable { units, initial_pool: pool })
}

/// Coins a voter spends on each candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ballot {
    pub voter: BsId,
    pub votes: Vec<(BsId, u64)>,
}

/// Every BS spends its full stake on itself.
pub fn self_vote_ballots(stakes: &StakeTable) -> Vec<Ballot> {
    (0..stakes.num_bs())
        .map(|bs| Ballot { voter: bs, votes: vec![(bs, stakes.units(bs))] })
        .collect()
}

/// Every BS spends its full stake on `candidate`.
pub fn unanimous_ballots(stakes: &StakeTable, candidate: BsId) -> Vec<Ballot> {
    (0..stakes.num_bs())
        .map(|bs| Ballot { voter: bs, votes: vec![(candidate, stakes.units(bs))] })
        .collect()
}

/// Vote totals received by each BS.
pub fn tally(stakes: &StakeTable, ballots: &[Ballot]) -> Result<Vec<u64>, LedgerError> {
    let m = stakes.num_bs();
    let mut totals = vec![0u64; m];
    let mut spent = vec![0u64; m];
    for b in ballots {
        if b.voter >= m {
            return Err(LedgerError::UnknownBs(b.voter));
        }
        for &(candidate, amount) in &b.votes {
            if candidate >= m {
                return Err(LedgerError::UnknownBs(candidate));
            }
            spent[b.voter] = spent[b.voter].saturating_add(amount);
            totals[candidate] = totals[candidate].saturating_add(amount);
        }
        if spent[b.voter] > stakes.units(b.voter) {
            return Err(LedgerError::OverspentBallot {
                voter: b.voter,
                spent: spent[b.voter],
                stake: stakes.units(b.voter),
            });
        }
    }
    Ok(totals)
}

/// The `num_producers` BSs with the most votes, ties to the lower id. The
/// returned order is the round-robin production schedule.
pub fn elect_producers(stakes: &StakeTable, ballots: &[Ballot], num_producers: usize) -> Result<Vec<BsId>, LedgerError> {
    let m = stakes.num_bs();
    if num_producers == 0 || num_producers > m {
        return Err(LedgerError::ProducerCount { requested: num_producers, available: m });
    }
    let totals = tally(stakes, ballots)?;
    let mut order: Vec<BsId> = (0..m).collect();
    order.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then(a.cmp(&b)));
    order.truncate(num_producers);
    Ok(order)
}
