//! Offline randomness pools.
//!
//! Protocols split into an offline stage that produces correlated randomness
//! (Beaver triples, RTG tuples, exponent pairs) and an online stage that
//! consumes it. A [`Pool`] holds pre-generated material; composite protocols
//! draw from it and, unless the pool is strict, generate what is missing on
//! the fly.

use crate::bitops::{gen_bit_triples, gen_zero_xor, rtg, BitTriple, RtgTuple, ZeroXorVec};
use crate::intops::{gen_arith_triples, gen_sep_pairs, ArithTriple, SepPair};
use crate::runtime::{Cluster, UserId};
use crate::{Error, Result};
use std::collections::{HashMap, VecDeque};

#[derive(Default)]
pub struct Pool {
    pub(crate) bit_triples: VecDeque<BitTriple>,
    pub(crate) arith_triples: VecDeque<ArithTriple>,
    pub(crate) sep_pairs: HashMap<u64, VecDeque<SepPair>>,
    pub(crate) rtg_tuples: HashMap<usize, VecDeque<RtgTuple>>,
    pub(crate) zero_xor: HashMap<usize, VecDeque<ZeroXorVec>>,
    strict: bool,
}

impl Pool {
    /// A pool that refills itself by running the offline stages on demand.
    pub fn new() -> Self {
        Pool::default()
    }

    /// A pool that never generates: drawing beyond its contents is an error.
    /// Used when the randomness budget was sized ahead of time.
    pub fn strict() -> Self {
        Pool {
            strict: true,
            ..Pool::default()
        }
    }

    pub fn bit_triples_available(&self) -> usize {
        self.bit_triples.len()
    }

    pub fn arith_triples_available(&self) -> usize {
        self.arith_triples.len()
    }

    pub fn fill_bit_triples(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        count: usize,
    ) -> Result<()> {
        let fresh = gen_bit_triples(cluster, user, count)?;
        self.bit_triples.extend(fresh);
        Ok(())
    }

    pub fn fill_arith_triples(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        count: usize,
    ) -> Result<()> {
        let fresh = gen_arith_triples(cluster, user, count)?;
        self.arith_triples.extend(fresh);
        Ok(())
    }

    pub fn fill_rtg(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        bit_len: usize,
        count: usize,
    ) -> Result<()> {
        let slot = self.rtg_tuples.entry(bit_len).or_default();
        for _ in 0..count {
            slot.push_back(rtg(cluster, user, bit_len)?);
        }
        Ok(())
    }

    pub fn fill_zero_xor(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        bit_len: usize,
        count: usize,
    ) -> Result<()> {
        let slot = self.zero_xor.entry(bit_len).or_default();
        for _ in 0..count {
            slot.push_back(gen_zero_xor(cluster, user, bit_len)?);
        }
        Ok(())
    }

    pub fn fill_sep_pairs(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        base: u64,
        count: usize,
    ) -> Result<()> {
        let fresh = gen_sep_pairs(cluster, user, base, count)?;
        self.sep_pairs.entry(base).or_default().extend(fresh);
        Ok(())
    }

    pub(crate) fn take_bit_triples(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        count: usize,
    ) -> Result<Vec<BitTriple>> {
        if self.bit_triples.len() < count {
            if self.strict {
                return Err(Error::ConsumedRandomness);
            }
            let missing = count - self.bit_triples.len();
            self.fill_bit_triples(cluster, user, missing)?;
        }
        Ok(self.bit_triples.drain(..count).collect())
    }

    pub(crate) fn take_arith_triples(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        count: usize,
    ) -> Result<Vec<ArithTriple>> {
        if self.arith_triples.len() < count {
            if self.strict {
                return Err(Error::PoolExhausted);
            }
            let missing = count - self.arith_triples.len();
            self.fill_arith_triples(cluster, user, missing)?;
        }
        Ok(self.arith_triples.drain(..count).collect())
    }

    pub(crate) fn take_rtg(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        bit_len: usize,
    ) -> Result<RtgTuple> {
        let slot = self.rtg_tuples.entry(bit_len).or_default();
        if let Some(tuple) = slot.pop_front() {
            return Ok(tuple);
        }
        if self.strict {
            return Err(Error::PoolExhausted);
        }
        rtg(cluster, user, bit_len)
    }

    pub(crate) fn take_zero_xor(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        bit_len: usize,
    ) -> Result<ZeroXorVec> {
        let slot = self.zero_xor.entry(bit_len).or_default();
        if let Some(vector) = slot.pop_front() {
            return Ok(vector);
        }
        if self.strict {
            return Err(Error::PoolExhausted);
        }
        gen_zero_xor(cluster, user, bit_len)
    }

    pub(crate) fn take_sep_pair(
        &mut self,
        cluster: &mut Cluster,
        user: UserId,
        base: u64,
    ) -> Result<SepPair> {
        let slot = self.sep_pairs.entry(base).or_default();
        if let Some(pair) = slot.pop_front() {
            return Ok(pair);
        }
        if self.strict {
            return Err(Error::PoolExhausted);
        }
        Ok(gen_sep_pairs(cluster, user, base, 1)?.remove(0))
    }
}
