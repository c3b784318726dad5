//! Integer-share protocols: Beaver multiplication, monic monomials,
//! exponentials with a public base, comparison, equality, minimum selection,
//! access-pattern hiding and private information retrieval.
//!
//! All values are additive shares in Z_N interpreted through the centered
//! domain D_N. Range preconditions (`|x·y| < N/2`, `|u-v| < 2^(ℓ-2)`, ...)
//! cannot be checked on shares; they are enforced where plaintexts exist,
//! at upload and test-input time.

use crate::arith::mod_floor;
use crate::bitops::{
    self, bext, check_bit_shares, check_int_shares, to_int_shares, xor_mask, BitVecShare,
};
use crate::pcdd::{enc, hom_add, hom_neg, hom_scale, hom_scale_signed, Ciphertext, PrivateKey};
use crate::pool::Pool;
use crate::runtime::{Cluster, Msg, PartyCtx, TxId, UserId, ValueKind};
use crate::shares::{center, zero_sum_row, BitShare, DeltaGroup, IntShare};
use crate::{Error, Result};
use rand::RngCore;
use rug::Integer;
use std::sync::atomic::{AtomicBool, Ordering};

/// One party's slice of a multiplication triple over Z_N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArithTripleShare {
    pub a: Integer,
    pub b: Integer,
    pub c: Integer,
}

/// A Beaver triple over Z_N: `(Σa_i)(Σb_i) ≡ Σc_i (mod N)`. Single use.
#[derive(Debug)]
pub struct ArithTriple {
    shares: Vec<ArithTripleShare>,
    used: AtomicBool,
}

impl ArithTriple {
    pub fn shares(&self) -> &[ArithTripleShare] {
        &self.shares
    }

    pub(crate) fn consume(&self) -> Result<()> {
        if self.used.swap(true, Ordering::SeqCst) {
            return Err(Error::ConsumedRandomness);
        }
        Ok(())
    }
}

/// One party's slice of an exponent pair for a fixed public base β:
/// a bit share of 𝔞 plus additive shares of `β^𝔞` and `β^(1-𝔞)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SepPairShare {
    pub a: bool,
    pub b: Integer,
    pub b_star: Integer,
}

/// A full exponent pair. Single use.
#[derive(Debug)]
pub struct SepPair {
    pub base: u64,
    shares: Vec<SepPairShare>,
    used: AtomicBool,
}

impl SepPair {
    pub fn shares(&self) -> &[SepPairShare] {
        &self.shares
    }

    pub(crate) fn consume(&self) -> Result<()> {
        if self.used.swap(true, Ordering::SeqCst) {
            return Err(Error::ConsumedRandomness);
        }
        Ok(())
    }
}

/// Encrypted unit vector built by the request user: exactly one slot
/// encrypts 1, the rest encrypt 0. The parties cannot verify this; the user
/// is trusted for their own query.
#[derive(Debug, Clone)]
pub struct SelectionVector {
    pub cts: Vec<Ciphertext>,
}

impl SelectionVector {
    /// Build a selection vector for 1-based position `gamma` out of `h`.
    pub fn build<R: RngCore>(
        pk: &crate::pcdd::PublicKey,
        h: usize,
        gamma: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if gamma == 0 || gamma > h {
            return Err(Error::InvalidArgument(
                "selection index out of range".into(),
            ));
        }
        let cts = (1..=h)
            .map(|j| enc(pk, &Integer::from((j == gamma) as u8), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(SelectionVector { cts })
    }

    /// `H` length-prefixed ciphertexts.
    pub fn to_bytes(&self, pk: &crate::pcdd::PublicKey) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.cts.len() as u32).to_be_bytes());
        for ct in &self.cts {
            crate::pcdd::write_ciphertext(&mut out, ct, pk);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = || Error::Parse("truncated selection vector".into());
        let count =
            u32::from_be_bytes(bytes.get(..4).ok_or_else(err)?.try_into().unwrap()) as usize;
        let mut pos = 4;
        let cts = (0..count)
            .map(|_| crate::pcdd::read_ciphertext(bytes, &mut pos))
            .collect::<Result<Vec<_>>>()?;
        Ok(SelectionVector { cts })
    }
}

// --- offline generators ---------------------------------------------------

fn arith_triple_step(ctx: &mut PartyCtx) -> Result<ArithTripleShare> {
    let me = ctx.index;
    let parties = ctx.parties;
    let n = ctx.pk.modulus().clone();
    if me == 1 {
        let a = ctx.random_dn();
        let b = ctx.random_dn();
        let z = Integer::from(&a * &b);
        let cts = vec![
            ctx.enc_signed(&a)?,
            ctx.enc_signed(&b)?,
            ctx.enc_signed(&z)?,
        ];
        ctx.send(2, Msg::Cts(cts))?;
        let masked = ctx.recv_ct(2)?;
        let c = ctx.sdd_owner(&masked)?;
        Ok(ArithTripleShare {
            a: mod_floor(&a, &n),
            b: mod_floor(&b, &n),
            c,
        })
    } else {
        let received = ctx.recv_cts(me - 1)?;
        let [ea, eb, ec]: [Ciphertext; 3] = received
            .try_into()
            .map_err(|_| Error::ProtocolAbort("triple chain expects 3 ciphertexts".into()))?;
        let a = ctx.random_dn();
        let b = ctx.random_dn();
        // [[c]] <- [[c]] · [[a_i·b_i]] · [[a]]^{b_i} · [[b]]^{a_i}
        let cross = ctx.enc_signed(&Integer::from(&a * &b))?;
        let ec = hom_add(&ctx.pk, &ec, &cross)?;
        let ec = hom_add(&ctx.pk, &ec, &hom_scale_signed(&ctx.pk, &ea, &b)?)?;
        let ec = hom_add(&ctx.pk, &ec, &hom_scale_signed(&ctx.pk, &eb, &a)?)?;
        let enc_a = ctx.enc_signed(&a)?;
        let enc_b = ctx.enc_signed(&b)?;
        let ea = hom_add(&ctx.pk, &ea, &enc_a)?;
        let eb = hom_add(&ctx.pk, &eb, &enc_b)?;
        if me < parties {
            ctx.send(me + 1, Msg::Cts(vec![ea, eb, ec.clone()]))?;
        }
        let incoming = if me == parties {
            ec
        } else {
            ctx.recv_ct(me + 1)?
        };
        let c = ctx.random_dn();
        let mask = ctx.enc_signed(&-c.clone())?;
        let masked = hom_add(&ctx.pk, &incoming, &mask)?;
        ctx.send(me - 1, Msg::Ct(masked))?;
        ctx.sdd_helper(1)?;
        Ok(ArithTripleShare {
            a: mod_floor(&a, &n),
            b: mod_floor(&b, &n),
            c: mod_floor(&c, &n),
        })
    }
}

/// Generate `count` arithmetic triples in one protocol run.
pub fn gen_arith_triples(
    cluster: &mut Cluster,
    user: UserId,
    count: usize,
) -> Result<Vec<ArithTriple>> {
    let programs = (1..=cluster.parties())
        .map(|_| {
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Vec<ArithTripleShare>> + Send> =
                Box::new(move |ctx| (0..count).map(|_| arith_triple_step(ctx)).collect());
            b
        })
        .collect();
    let per_party = cluster.run_protocol(user, programs)?;
    let count = per_party.first().map(|v| v.len()).unwrap_or(0);
    Ok((0..count)
        .map(|k| ArithTriple {
            shares: per_party.iter().map(|v| v[k].clone()).collect(),
            used: AtomicBool::new(false),
        })
        .collect())
}

/// One arithmetic triple.
pub fn gen_arith_triple(cluster: &mut Cluster, user: UserId) -> Result<ArithTriple> {
    Ok(gen_arith_triples(cluster, user, 1)?.remove(0))
}

fn sep_pair_step(ctx: &mut PartyCtx, base: u64) -> Result<SepPairShare> {
    let me = ctx.index;
    let parties = ctx.parties;
    let n = ctx.pk.modulus().clone();
    let beta = Integer::from(base);
    if me == 1 {
        let a = ctx.random_bit();
        let ct = ctx.enc_bit(a)?;
        ctx.send(2, Msg::Ct(ct))?;
        let masked = ctx.recv_cts(2)?;
        let values = ctx.sdd_owner_batch(&masked)?;
        let [b, b_star]: [Integer; 2] = values
            .try_into()
            .map_err(|_| Error::ProtocolAbort("sep pair expects 2 values".into()))?;
        Ok(SepPairShare { a, b, b_star })
    } else {
        let ea = ctx.recv_ct(me - 1)?;
        let a = ctx.random_bit();
        let ea = xor_mask(ctx, &ea, a)?;
        if me < parties {
            ctx.send(me + 1, Msg::Ct(ea.clone()))?;
        }
        // Party P turns [[𝔞]] into [[β^𝔞]] and [[β^(1-𝔞)]]:
        // β·𝔞 + (1-𝔞) and 𝔞 + β·(1-𝔞).
        let (incoming_b, incoming_bstar) = if me == parties {
            let one = ctx.enc(&Integer::from(1))?;
            let not_a = hom_add(&ctx.pk, &one, &hom_neg(&ctx.pk, &ea)?)?;
            let eb = hom_add(&ctx.pk, &hom_scale_signed(&ctx.pk, &ea, &beta)?, &not_a)?;
            let eb_star = hom_add(&ctx.pk, &ea, &hom_scale_signed(&ctx.pk, &not_a, &beta)?)?;
            (eb, eb_star)
        } else {
            let cts = ctx.recv_cts(me + 1)?;
            let [eb, eb_star]: [Ciphertext; 2] = cts
                .try_into()
                .map_err(|_| Error::ProtocolAbort("sep pair expects 2 ciphertexts".into()))?;
            (eb, eb_star)
        };
        let b = ctx.random_dn();
        let b_star = ctx.random_dn();
        let mask_b = ctx.enc_signed(&-b.clone())?;
        let mask_bstar = ctx.enc_signed(&-b_star.clone())?;
        let masked_b = hom_add(&ctx.pk, &incoming_b, &mask_b)?;
        let masked_bstar = hom_add(&ctx.pk, &incoming_bstar, &mask_bstar)?;
        ctx.send(me - 1, Msg::Cts(vec![masked_b, masked_bstar]))?;
        ctx.sdd_helper_batch(1)?;
        Ok(SepPairShare {
            a,
            b: mod_floor(&b, &n),
            b_star: mod_floor(&b_star, &n),
        })
    }
}

/// Generate exponent pairs for public base β (β coprime to N).
pub fn gen_sep_pairs(
    cluster: &mut Cluster,
    user: UserId,
    base: u64,
    count: usize,
) -> Result<Vec<SepPair>> {
    if Integer::from(base).gcd(cluster.pk(user)?.modulus()) != 1 {
        return Err(Error::InvalidArgument("base not coprime to N".into()));
    }
    let programs = (1..=cluster.parties())
        .map(|_| {
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Vec<SepPairShare>> + Send> =
                Box::new(move |ctx| (0..count).map(|_| sep_pair_step(ctx, base)).collect());
            b
        })
        .collect();
    let per_party = cluster.run_protocol(user, programs)?;
    let count = per_party.first().map(|v| v.len()).unwrap_or(0);
    Ok((0..count)
        .map(|k| SepPair {
            base,
            shares: per_party.iter().map(|v| v[k].clone()).collect(),
            used: AtomicBool::new(false),
        })
        .collect())
}

// --- online stages --------------------------------------------------------

/// Beaver multiplication online stage for one party.
pub(crate) fn sm_online(
    ctx: &mut PartyCtx,
    x: &Integer,
    y: &Integer,
    triple: &ArithTripleShare,
) -> Result<Integer> {
    let n = ctx.pk.modulus().clone();
    let mask_x = mod_floor(&Integer::from(x - &triple.a), &n);
    let mask_y = mod_floor(&Integer::from(y - &triple.b), &n);
    for j in 1..=ctx.parties {
        if j != ctx.index {
            ctx.send(j, Msg::NumPair(mask_x.clone(), mask_y.clone()))?;
        }
    }
    let mut open_x = mask_x;
    let mut open_y = mask_y;
    for j in 1..=ctx.parties {
        if j != ctx.index {
            let (xj, yj) = ctx.recv_numpair(j)?;
            open_x += xj;
            open_y += yj;
        }
    }
    open_x = mod_floor(&open_x, &n);
    open_y = mod_floor(&open_y, &n);
    let mut f = triple.c.clone() + Integer::from(&triple.b * &open_x) + Integer::from(&triple.a * &open_y);
    if ctx.index == ctx.parties {
        f += Integer::from(&open_x * &open_y);
    }
    Ok(mod_floor(&f, &n))
}

/// Secure multiplication: recombines to `x·y` (mod N, centered). Consumes
/// the triple.
pub fn sm(
    cluster: &mut Cluster,
    user: UserId,
    x: &[IntShare],
    y: &[IntShare],
    triple: &ArithTriple,
) -> Result<Vec<IntShare>> {
    check_int_shares(cluster, user, x)?;
    check_int_shares(cluster, user, y)?;
    triple.consume()?;
    let programs = (1..=cluster.parties())
        .map(|i| {
            let xi = x[i - 1].value.clone();
            let yi = y[i - 1].value.clone();
            let ti = triple.shares[i - 1].clone();
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Integer> + Send> =
                Box::new(move |ctx| sm_online(ctx, &xi, &yi, &ti));
            b
        })
        .collect();
    let values = cluster.run_protocol(user, programs)?;
    to_int_shares(cluster, user, values)
}

pub(crate) fn sm_pool(
    cluster: &mut Cluster,
    user: UserId,
    x: &[IntShare],
    y: &[IntShare],
    pool: &mut Pool,
) -> Result<Vec<IntShare>> {
    let triple = pool.take_arith_triples(cluster, user, 1)?.remove(0);
    sm(cluster, user, x, y, &triple)
}

/// Monic monomial `x^k` by square-and-multiply over the bits of `k`.
pub fn smm(
    cluster: &mut Cluster,
    user: UserId,
    x: &[IntShare],
    k: u64,
    pool: &mut Pool,
) -> Result<Vec<IntShare>> {
    if k == 0 {
        return Err(Error::InvalidArgument("exponent must be positive".into()));
    }
    check_int_shares(cluster, user, x)?;
    let mut f = x.to_vec();
    let bits = 64 - k.leading_zeros();
    for j in (0..bits - 1).rev() {
        f = sm_pool(cluster, user, &f.clone(), &f, pool)?;
        if (k >> j) & 1 == 1 {
            f = sm_pool(cluster, user, &f, x, pool)?;
        }
    }
    Ok(f)
}

/// SEP₂ online: each party opens `X_i = 𝔵_i ⊕ 𝔞_i` and selects `b*` or `b`.
fn sep2_online(ctx: &mut PartyCtx, x: bool, pair: &SepPairShare) -> Result<Integer> {
    let mask = x ^ pair.a;
    for j in 1..=ctx.parties {
        if j != ctx.index {
            ctx.send(j, Msg::Bit(mask))?;
        }
    }
    let mut open = mask;
    for j in 1..=ctx.parties {
        if j != ctx.index {
            open ^= ctx.recv_bit(j)?;
        }
    }
    Ok(if open {
        pair.b_star.clone()
    } else {
        pair.b.clone()
    })
}

/// Exponential over a bit share with public base: recombines to `β^𝔵`.
pub fn sep2(
    cluster: &mut Cluster,
    user: UserId,
    x: &[BitShare],
    base: u64,
    pair: &SepPair,
) -> Result<Vec<IntShare>> {
    check_bit_shares(cluster, x)?;
    if pair.base != base {
        return Err(Error::InvalidArgument(
            "pair was built for another base".into(),
        ));
    }
    pair.consume()?;
    let programs = (1..=cluster.parties())
        .map(|i| {
            let xi = x[i - 1].value;
            let pi = pair.shares[i - 1].clone();
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Integer> + Send> =
                Box::new(move |ctx| sep2_online(ctx, xi, &pi));
            b
        })
        .collect();
    let values = cluster.run_protocol(user, programs)?;
    to_int_shares(cluster, user, values)
}

/// Pull one bit position out of per-party bit-vector shares.
pub(crate) fn bit_at(vecs: &[BitVecShare], j: usize) -> Vec<BitShare> {
    vecs.iter()
        .map(|v| BitShare {
            index: v.index,
            value: v.bits[j],
        })
        .collect()
}

/// Exponential over an integer share with public base: `β^x` for a small
/// nonnegative `x` of at most `bit_len` bits (`β^x` must stay below N/2).
pub fn sep(
    cluster: &mut Cluster,
    user: UserId,
    x: &[IntShare],
    base: u64,
    bit_len: usize,
    pool: &mut Pool,
) -> Result<Vec<IntShare>> {
    if Integer::from(base).gcd(cluster.pk(user)?.modulus()) != 1 {
        return Err(Error::InvalidArgument("base not coprime to N".into()));
    }
    let bits = bext(cluster, user, x, bit_len, pool)?;
    let pair = pool.take_sep_pair(cluster, user, base)?;
    let mut f = sep2(cluster, user, &bit_at(&bits, 0), base, &pair)?;
    for j in 1..bit_len {
        let pair = pool.take_sep_pair(cluster, user, base)?;
        let fj = sep2(cluster, user, &bit_at(&bits, j), base, &pair)?;
        let weighted = smm(cluster, user, &fj, 1u64 << j, pool)?;
        f = sm_pool(cluster, user, &f, &weighted, pool)?;
    }
    Ok(f)
}

/// Secure comparison: output bit is 0 when `u ≥ v`, 1 when `u < v`
/// (the sign of `u - v`, assuming `|u - v| < 2^(bit_len-2)`).
pub fn sc(
    cluster: &mut Cluster,
    user: UserId,
    u: &[IntShare],
    v: &[IntShare],
    bit_len: usize,
    pool: &mut Pool,
) -> Result<Vec<BitShare>> {
    check_int_shares(cluster, user, u)?;
    check_int_shares(cluster, user, v)?;
    let n = cluster.pk(user)?.modulus().clone();
    let key_id = cluster.pk(user)?.key_id();
    let w: Vec<IntShare> = u
        .iter()
        .zip(v)
        .map(|(ui, vi)| IntShare {
            index: ui.index,
            value: mod_floor(&Integer::from(&ui.value - &vi.value), &n),
            key_id,
        })
        .collect();
    let bits = bext(cluster, user, &w, bit_len, pool)?;
    Ok(bit_at(&bits, bit_len - 1))
}

/// Secure equality test: output bit is 1 iff `u = v`, computed as
/// `1 ⊕ SC(u,v) ⊕ SC(v,u)` with the constant folded into party P's share.
pub fn seq(
    cluster: &mut Cluster,
    user: UserId,
    u: &[IntShare],
    v: &[IntShare],
    bit_len: usize,
    pool: &mut Pool,
) -> Result<Vec<BitShare>> {
    let t1 = sc(cluster, user, u, v, bit_len, pool)?;
    let t2 = sc(cluster, user, v, u, bit_len, pool)?;
    let parties = cluster.parties();
    Ok(t1
        .iter()
        .zip(&t2)
        .map(|(x, y)| BitShare {
            index: x.index,
            value: x.value ^ y.value ^ (x.index as usize == parties),
        })
        .collect())
}

/// Minimum of two shared values: `B_i = y_i - Y_i + X_i` with
/// `u = SC(x,y)`, `X = SM(x, B2I(u))`, `Y = SM(y, B2I(u))`.
pub fn min2(
    cluster: &mut Cluster,
    user: UserId,
    x: &[IntShare],
    y: &[IntShare],
    bit_len: usize,
    pool: &mut Pool,
) -> Result<Vec<IntShare>> {
    let u = sc(cluster, user, x, y, bit_len, pool)?;
    let u_int = bitops::b2i(cluster, user, &u)?;
    let big_x = sm_pool(cluster, user, x, &u_int, pool)?;
    let big_y = sm_pool(cluster, user, y, &u_int, pool)?;
    let n = cluster.pk(user)?.modulus().clone();
    Ok(y.iter()
        .zip(&big_y)
        .zip(&big_x)
        .map(|((yi, gy), gx)| IntShare {
            index: yi.index,
            value: mod_floor(&(Integer::from(&yi.value) - &gy.value + &gx.value), &n),
            key_id: yi.key_id,
        })
        .collect())
}

/// Minimum of H shared values by pairwise tournament. Odd rounds hold the
/// last element out and reinsert it for the next round.
pub fn min_h(
    cluster: &mut Cluster,
    user: UserId,
    inputs: &[Vec<IntShare>],
    bit_len: usize,
    pool: &mut Pool,
) -> Result<Vec<IntShare>> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("minimum of zero values".into()));
    }
    let mut working: Vec<Vec<IntShare>> = inputs.to_vec();
    while working.len() > 1 {
        let held_out = if working.len() % 2 != 0 {
            working.pop()
        } else {
            None
        };
        let mut next = Vec::with_capacity(working.len() / 2 + 1);
        for pair in working.chunks(2) {
            next.push(min2(cluster, user, &pair[0], &pair[1], bit_len, pool)?);
        }
        if let Some(extra) = held_out {
            next.push(extra);
        }
        working = next;
    }
    Ok(working.pop().unwrap())
}

// --- access-pattern hiding and private retrieval --------------------------

fn selection_fold(
    ctx: &mut PartyCtx,
    sel: &[Ciphertext],
    shares: &[Integer],
) -> Result<Ciphertext> {
    let mut acc: Option<Ciphertext> = None;
    for (ct, share) in sel.iter().zip(shares) {
        let term = hom_scale(&ctx.pk, ct, share)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => hom_add(&ctx.pk, &prev, &term)?,
        });
    }
    acc.ok_or_else(|| Error::ProtocolAbort("empty selection".into()))
}

/// Obliviously select the γ-th of H stored values and re-share it under a
/// new id. No party's transcript depends on γ beyond ciphertext contents.
pub fn aph_select(
    cluster: &mut Cluster,
    user: UserId,
    sel: &SelectionVector,
    ids: &[TxId],
    out: TxId,
) -> Result<TxId> {
    if sel.cts.len() != ids.len() || ids.is_empty() {
        return Err(Error::InvalidArgument(
            "selection width must match the stored batch".into(),
        ));
    }
    if cluster.with_uns(|u| u.contains(user, out)) {
        return Err(Error::Conflict(format!("{:02x?}", out.0)));
    }
    let parties = cluster.parties();
    let n = cluster.pk(user)?.modulus().clone();
    let ids_owned = ids.to_vec();
    let programs = (1..=parties)
        .map(|index| {
            let sel = sel.cts.clone();
            let ids = ids_owned.clone();
            let n = n.clone();
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<()> + Send> = Box::new(move |ctx| {
                let mut shares = Vec::with_capacity(ids.len());
                for id in &ids {
                    shares.push(ctx.load_share(*id)?);
                }
                let folded = selection_fold(ctx, &sel, &shares)?;
                // Zero-sum refresh before any decryption.
                let row = zero_sum_row(ctx.parties, &DeltaGroup::ModN(n), ctx.rng());
                for j in 1..=ctx.parties {
                    if j != index {
                        let ct = ctx.enc(&row[j - 1])?;
                        ctx.send(j, Msg::Ct(ct))?;
                    }
                }
                let own_delta = ctx.enc(&row[index - 1])?;
                let mut updated = hom_add(&ctx.pk, &folded, &own_delta)?;
                for j in 1..=ctx.parties {
                    if j != index {
                        let delta = ctx.recv_ct(j)?;
                        updated = hom_add(&ctx.pk, &updated, &delta)?;
                    }
                }
                // Each party decrypts its own refreshed selection share.
                let mut mine = None;
                for owner in 1..=ctx.parties {
                    if owner == ctx.index {
                        mine = Some(ctx.sdd_owner(&updated)?);
                    } else {
                        ctx.sdd_helper(owner)?;
                    }
                }
                let value =
                    mine.ok_or_else(|| Error::ProtocolAbort("aph produced no share".into()))?;
                ctx.seal(out, &value)?;
                Ok(())
            });
            b
        })
        .collect();
    cluster.run_protocol(user, programs)?;
    cluster.set_value_kind(user, out, ValueKind::Int);
    Ok(out)
}

/// Private information retrieval: the user learns the γ-th stored value,
/// the parties learn neither γ nor the value.
pub fn pir_retrieve(
    cluster: &mut Cluster,
    user: UserId,
    sk: &PrivateKey,
    sel: &SelectionVector,
    ids: &[TxId],
) -> Result<Integer> {
    if sel.cts.len() != ids.len() || ids.is_empty() {
        return Err(Error::InvalidArgument(
            "selection width must match the stored batch".into(),
        ));
    }
    let parties = cluster.parties();
    let ids_owned = ids.to_vec();
    let programs = (1..=parties)
        .map(|index| {
            let sel = sel.cts.clone();
            let ids = ids_owned.clone();
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<()> + Send> = Box::new(move |ctx| {
                let mut shares = Vec::with_capacity(ids.len());
                for id in &ids {
                    shares.push(ctx.load_share(*id)?);
                }
                let folded = selection_fold(ctx, &sel, &shares)?;
                // Chain-fold [[b*]] towards party P, then hand to the user.
                let acc = if index == 1 {
                    folded
                } else {
                    let prev = ctx.recv_ct(index - 1)?;
                    hom_add(&ctx.pk, &prev, &folded)?
                };
                if index < ctx.parties {
                    ctx.send(index + 1, Msg::Ct(acc))?;
                } else {
                    ctx.send_user(Msg::Ct(acc))?;
                }
                Ok(())
            });
            b
        })
        .collect();
    cluster.run_protocol(user, programs)?;
    let pk = cluster.pk(user)?.clone();
    let drained = cluster.net_drain_to_user();
    let ct = drained
        .into_iter()
        .find_map(|(_, msg)| match msg {
            Msg::Ct(ct) => Some(ct),
            _ => None,
        })
        .ok_or_else(|| Error::ProtocolAbort("no ciphertext reached the user".into()))?;
    let value = crate::pcdd::dec(sk, &pk, &ct)?;
    Ok(center(&value, pk.modulus()))
}
