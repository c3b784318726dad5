//! Protocols over XOR shares: random tuple generation, Beaver-style bit
//! multiplication, ripple-carry addition, bit extraction, and the transforms
//! between bit shares and integer shares.
//!
//! Bit positions are 1-based in the protocol descriptions: bit 1 is the LSB
//! and bit ℓ carries the negative weight `-2^(ℓ-1)` of the two's complement
//! interpretation. In code, `bits[0]` is the LSB and `bits[len-1]` the sign.

use crate::arith::mod_floor;
use crate::pcdd::{hom_add, hom_neg, Ciphertext};
use crate::pool::Pool;
use crate::runtime::{Cluster, Msg, PartyCtx, UserId};
use crate::shares::{center, BitShare, IntShare};
use crate::{Error, Result};
use rug::Integer;
use std::sync::atomic::{AtomicBool, Ordering};

/// Per-party slice of a shared random tuple: ℓ bit shares plus one integer
/// share, bound by the two's complement identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtgShare {
    pub bits: Vec<bool>,
    /// Additive share of the tuple value, in Z_N.
    pub value: Integer,
}

/// A full RTG tuple (one [`RtgShare`] per party).
#[derive(Debug, Clone)]
pub struct RtgTuple {
    pub bit_len: usize,
    shares: Vec<RtgShare>,
}

impl RtgTuple {
    pub fn shares(&self) -> &[RtgShare] {
        &self.shares
    }
}

/// XOR sharing of the all-zero bit vector, used to mask opened values.
#[derive(Debug, Clone)]
pub struct ZeroXorVec {
    pub bit_len: usize,
    shares: Vec<Vec<bool>>,
}

impl ZeroXorVec {
    pub fn shares(&self) -> &[Vec<bool>] {
        &self.shares
    }
}

/// One party's slice of a multiplication triple over Z_2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitTripleShare {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

/// A Beaver triple over Z_2: `(⊕a_i) ∧ (⊕b_i) = ⊕c_i`. Single use.
#[derive(Debug)]
pub struct BitTriple {
    shares: Vec<BitTripleShare>,
    used: AtomicBool,
}

impl BitTriple {
    pub fn shares(&self) -> &[BitTripleShare] {
        &self.shares
    }

    pub(crate) fn consume(&self) -> Result<()> {
        if self.used.swap(true, Ordering::SeqCst) {
            return Err(Error::ConsumedRandomness);
        }
        Ok(())
    }
}

/// One party's XOR shares of an ℓ-bit two's complement vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVecShare {
    pub index: u8,
    pub bits: Vec<bool>,
}

/// Recombine a vector of per-party bit-vector shares into plaintext bits.
pub fn rec_bitvec(shares: &[BitVecShare]) -> Result<Vec<bool>> {
    let len = shares.first().ok_or(Error::IncompleteShares)?.bits.len();
    let mut bits = vec![false; len];
    for share in shares {
        if share.bits.len() != len {
            return Err(Error::IncompleteShares);
        }
        for (acc, b) in bits.iter_mut().zip(&share.bits) {
            *acc ^= *b;
        }
    }
    Ok(bits)
}

/// Two's complement value of plaintext bits (`bits[0]` = LSB).
pub fn bits_to_int(bits: &[bool]) -> Integer {
    let mut value = Integer::new();
    for (j, bit) in bits.iter().enumerate() {
        if *bit {
            if j + 1 == bits.len() {
                value -= Integer::from(1) << (j as u32);
            } else {
                value += Integer::from(1) << (j as u32);
            }
        }
    }
    value
}

/// Low `len` bits of `x` in two's complement.
pub fn int_to_bits(x: &Integer, len: usize) -> Vec<bool> {
    let modulus = Integer::from(1) << (len as u32);
    let low = mod_floor(x, &modulus);
    (0..len).map(|j| low.get_bit(j as u32)).collect()
}

// --- ciphertext helpers used by the chains -------------------------------

/// `[[x ⊕ b]]` from `[[x]]` and a plaintext bit `b`, for plaintext `x ∈ {0,1}`:
/// identity when `b = 0`, `[[1]]·[[x]]^(N-1)` when `b = 1`.
pub(crate) fn xor_mask(ctx: &mut PartyCtx, ct: &Ciphertext, bit: bool) -> Result<Ciphertext> {
    if !bit {
        return Ok(ct.clone());
    }
    let one = ctx.enc(&Integer::from(1))?;
    let negated = hom_neg(&ctx.pk, ct)?;
    hom_add(&ctx.pk, &one, &negated)
}

// --- offline generators ---------------------------------------------------

fn bit_triple_step(ctx: &mut PartyCtx) -> Result<BitTripleShare> {
    let me = ctx.index;
    let parties = ctx.parties;
    if me == 1 {
        let a = ctx.random_bit();
        let b = ctx.random_bit();
        let c0 = a && b;
        let cts = vec![ctx.enc_bit(a)?, ctx.enc_bit(b)?, ctx.enc_bit(c0)?];
        ctx.send(2, Msg::Cts(cts))?;
        let masked = ctx.recv_ct(2)?;
        let c = ctx.sdd_owner(&masked)? == 1;
        Ok(BitTripleShare { a, b, c })
    } else {
        let received = ctx.recv_cts(me - 1)?;
        let [ea, eb, ec]: [Ciphertext; 3] = received
            .try_into()
            .map_err(|_| Error::ProtocolAbort("triple chain expects 3 ciphertexts".into()))?;
        let a = ctx.random_bit();
        let b = ctx.random_bit();
        // A = [[a(1-b)]], B = [[b(1-a)]], C = [[(1-a)(1-b)]].
        let inv_c = hom_neg(&ctx.pk, &ec)?;
        let big_a = hom_add(&ctx.pk, &ea, &inv_c)?;
        let big_b = hom_add(&ctx.pk, &eb, &inv_c)?;
        let one = ctx.enc(&Integer::from(1))?;
        let inv_a = hom_neg(&ctx.pk, &ea)?;
        let inv_b = hom_neg(&ctx.pk, &eb)?;
        // 1 - a - b + c = (1-a)(1-b) since c = a·b.
        let big_c = hom_add(
            &ctx.pk,
            &hom_add(&ctx.pk, &hom_add(&ctx.pk, &one, &inv_a)?, &inv_b)?,
            &ec,
        )?;
        // [[ (a_old ⊕ a) ∧ (b_old ⊕ b) ]] by truth-table selection.
        let new_c = match (a, b) {
            (false, false) => ec,
            (true, true) => big_c,
            (false, true) => big_a,
            (true, false) => big_b,
        };
        let new_a = xor_mask(ctx, &ea, a)?;
        let new_b = xor_mask(ctx, &eb, b)?;
        if me < parties {
            ctx.send(me + 1, Msg::Cts(vec![new_a, new_b, new_c.clone()]))?;
        }
        // Re-share the product back along the chain P → 1.
        let incoming = if me == parties {
            new_c
        } else {
            ctx.recv_ct(me + 1)?
        };
        let c = ctx.random_bit();
        let masked = xor_mask(ctx, &incoming, c)?;
        ctx.send(me - 1, Msg::Ct(masked))?;
        ctx.sdd_helper(1)?;
        Ok(BitTripleShare { a, b, c })
    }
}

/// Generate `count` bit triples in one protocol run.
pub fn gen_bit_triples(
    cluster: &mut Cluster,
    user: UserId,
    count: usize,
) -> Result<Vec<BitTriple>> {
    let programs = (1..=cluster.parties())
        .map(|_| {
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Vec<BitTripleShare>> + Send> =
                Box::new(move |ctx| (0..count).map(|_| bit_triple_step(ctx)).collect());
            b
        })
        .collect();
    let per_party = cluster.run_protocol(user, programs)?;
    Ok(transpose_triples(per_party))
}

fn transpose_triples(per_party: Vec<Vec<BitTripleShare>>) -> Vec<BitTriple> {
    let count = per_party.first().map(|v| v.len()).unwrap_or(0);
    (0..count)
        .map(|k| BitTriple {
            shares: per_party.iter().map(|v| v[k]).collect(),
            used: AtomicBool::new(false),
        })
        .collect()
}

/// One bit triple.
pub fn gen_bit_triple(cluster: &mut Cluster, user: UserId) -> Result<BitTriple> {
    Ok(gen_bit_triples(cluster, user, 1)?.remove(0))
}

fn rtg_step(ctx: &mut PartyCtx, bit_len: usize) -> Result<RtgShare> {
    let me = ctx.index;
    let parties = ctx.parties;
    if bit_len + 2 > ctx.pk.modulus_bits() as usize {
        return Err(Error::RangeGuard(format!(
            "bit length {bit_len} too large for the modulus"
        )));
    }
    if me == 1 {
        let bits: Vec<bool> = (0..bit_len).map(|_| ctx.random_bit()).collect();
        let cts = bits
            .iter()
            .map(|b| ctx.enc_bit(*b))
            .collect::<Result<Vec<_>>>()?;
        ctx.send(2, Msg::Cts(cts))?;
        let masked = ctx.recv_ct(2)?;
        let value = ctx.sdd_owner(&masked)?;
        Ok(RtgShare { bits, value })
    } else {
        let mut cts = ctx.recv_cts(me - 1)?;
        if cts.len() != bit_len {
            return Err(Error::ProtocolAbort("rtg chain arity mismatch".into()));
        }
        let bits: Vec<bool> = (0..bit_len).map(|_| ctx.random_bit()).collect();
        for (ct, bit) in cts.iter_mut().zip(&bits) {
            *ct = xor_mask(ctx, ct, *bit)?;
        }
        // Party P folds the weighted sum [[r]]; the chain P → 2 then masks
        // it with fresh additive shares on the way back to party 1.
        let incoming = if me == parties {
            let sign_weight = -(Integer::from(1) << (bit_len as u32 - 1));
            let mut fold =
                crate::pcdd::hom_scale_signed(&ctx.pk, &cts[bit_len - 1], &sign_weight)?;
            for (j, ct) in cts.iter().enumerate().take(bit_len - 1) {
                let weight = Integer::from(1) << (j as u32);
                let term = crate::pcdd::hom_scale_signed(&ctx.pk, ct, &weight)?;
                fold = hom_add(&ctx.pk, &fold, &term)?;
            }
            fold
        } else {
            ctx.send(me + 1, Msg::Cts(cts))?;
            ctx.recv_ct(me + 1)?
        };
        let value = ctx.random_dn();
        let neg = ctx.enc_signed(&-value.clone())?;
        let masked = hom_add(&ctx.pk, &incoming, &neg)?;
        ctx.send(me - 1, Msg::Ct(masked))?;
        ctx.sdd_helper(1)?;
        Ok(RtgShare {
            bits,
            value: mod_floor(&value, ctx.pk.modulus()),
        })
    }
}

/// Random tuple generation: per-party bit shares `𝔯^(1..ℓ)` and integer
/// shares of `r = -𝔯^(ℓ)·2^(ℓ-1) + Σ_{j<ℓ} 𝔯^(j)·2^(j-1)`.
pub fn rtg(cluster: &mut Cluster, user: UserId, bit_len: usize) -> Result<RtgTuple> {
    let programs = (1..=cluster.parties())
        .map(|_| {
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<RtgShare> + Send> =
                Box::new(move |ctx| rtg_step(ctx, bit_len));
            b
        })
        .collect();
    let shares = cluster.run_protocol(user, programs)?;
    Ok(RtgTuple { bit_len, shares })
}

fn zero_xor_step(ctx: &mut PartyCtx, bit_len: usize) -> Result<Vec<bool>> {
    let me = ctx.index;
    let parties = ctx.parties;
    if me == 1 {
        let bits: Vec<bool> = (0..bit_len).map(|_| ctx.random_bit()).collect();
        let cts = bits
            .iter()
            .map(|b| ctx.enc_bit(*b))
            .collect::<Result<Vec<_>>>()?;
        ctx.send(2, Msg::Cts(cts))?;
        ctx.sdd_helper_batch(parties)?;
        Ok(bits)
    } else if me < parties {
        let mut cts = ctx.recv_cts(me - 1)?;
        let bits: Vec<bool> = (0..bit_len).map(|_| ctx.random_bit()).collect();
        for (ct, bit) in cts.iter_mut().zip(&bits) {
            *ct = xor_mask(ctx, ct, *bit)?;
        }
        ctx.send(me + 1, Msg::Cts(cts))?;
        ctx.sdd_helper_batch(parties)?;
        Ok(bits)
    } else {
        let cts = ctx.recv_cts(me - 1)?;
        let values = ctx.sdd_owner_batch(&cts)?;
        Ok(values.iter().map(|v| *v == 1).collect())
    }
}

/// XOR shares of the zero vector: `⊕_i a_i^(j) = 0` for every position.
pub fn gen_zero_xor(cluster: &mut Cluster, user: UserId, bit_len: usize) -> Result<ZeroXorVec> {
    let programs = (1..=cluster.parties())
        .map(|_| {
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Vec<bool>> + Send> =
                Box::new(move |ctx| zero_xor_step(ctx, bit_len));
            b
        })
        .collect();
    let shares = cluster.run_protocol(user, programs)?;
    Ok(ZeroXorVec { bit_len, shares })
}

// --- online stages --------------------------------------------------------

/// Online stage of SBM from one party's perspective.
pub(crate) fn sbm_online(
    ctx: &mut PartyCtx,
    x: bool,
    y: bool,
    triple: &BitTripleShare,
) -> Result<bool> {
    let mask_x = x ^ triple.a;
    let mask_y = y ^ triple.b;
    for j in 1..=ctx.parties {
        if j != ctx.index {
            ctx.send(j, Msg::BitPair(mask_x, mask_y))?;
        }
    }
    let mut open_x = mask_x;
    let mut open_y = mask_y;
    for j in 1..=ctx.parties {
        if j != ctx.index {
            let (xj, yj) = ctx.recv_bitpair(j)?;
            open_x ^= xj;
            open_y ^= yj;
        }
    }
    let mut f = triple.c ^ (triple.b & open_x) ^ (triple.a & open_y);
    if ctx.index == ctx.parties {
        f ^= open_x & open_y;
    }
    Ok(f)
}

/// Secure bit multiplication: `⊕f_i = (⊕x_i) ∧ (⊕y_i)`. Consumes the triple.
pub fn sbm(
    cluster: &mut Cluster,
    user: UserId,
    x: &[BitShare],
    y: &[BitShare],
    triple: &BitTriple,
) -> Result<Vec<BitShare>> {
    check_bit_shares(cluster, x)?;
    check_bit_shares(cluster, y)?;
    triple.consume()?;
    let programs = (1..=cluster.parties())
        .map(|i| {
            let xi = x[i - 1].value;
            let yi = y[i - 1].value;
            let ti = triple.shares[i - 1];
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<bool> + Send> =
                Box::new(move |ctx| sbm_online(ctx, xi, yi, &ti));
            b
        })
        .collect();
    let bits = cluster.run_protocol(user, programs)?;
    Ok(to_bit_shares(bits))
}

/// Ripple-carry addition over bit-vector shares, one party's view.
/// Consumes `2(len-1)` triples from the iterator.
pub(crate) fn badd_online(
    ctx: &mut PartyCtx,
    a: &[bool],
    r: &[bool],
    triples: &mut impl Iterator<Item = BitTripleShare>,
) -> Result<Vec<bool>> {
    let len = a.len();
    if r.len() != len || len == 0 {
        return Err(Error::ProtocolAbort("badd expects equal bit lengths".into()));
    }
    let mut next_triple = || triples.next().ok_or(Error::ConsumedRandomness);
    let d: Vec<bool> = a.iter().zip(r).map(|(x, y)| x ^ y).collect();
    let mut e = Vec::with_capacity(len.saturating_sub(1));
    for j in 0..len - 1 {
        let t = next_triple()?;
        e.push(sbm_online(ctx, a[j], r[j], &t)?);
    }
    let mut carry = false;
    let mut out = Vec::with_capacity(len);
    out.push(d[0]);
    for j in 1..len {
        let t = next_triple()?;
        let product = sbm_online(ctx, d[j - 1], carry, &t)?;
        carry = product ^ e[j - 1];
        out.push(d[j] ^ carry);
    }
    Ok(out)
}

/// Secure bit-wise addition `y ≡ a + r (mod 2^ℓ)` in two's complement.
pub fn badd(
    cluster: &mut Cluster,
    user: UserId,
    a: &[BitVecShare],
    r: &[BitVecShare],
    pool: &mut Pool,
) -> Result<Vec<BitVecShare>> {
    let parties = cluster.parties();
    if a.len() != parties || r.len() != parties {
        return Err(Error::IncompleteShares);
    }
    let len = a[0].bits.len();
    if len == 0 {
        return Err(Error::InvalidArgument("empty bit vectors".into()));
    }
    let triples = pool.take_bit_triples(cluster, user, 2 * (len - 1))?;
    let per_party = split_triples(&triples, parties)?;
    let programs = a
        .iter()
        .zip(r)
        .zip(per_party)
        .map(|((ai, ri), ts)| {
            let a_bits = ai.bits.clone();
            let r_bits = ri.bits.clone();
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Vec<bool>> + Send> =
                Box::new(move |ctx| badd_online(ctx, &a_bits, &r_bits, &mut ts.into_iter()));
            b
        })
        .collect();
    let outputs = cluster.run_protocol(user, programs)?;
    Ok(to_bitvec_shares(outputs))
}

/// The per-party offline material bit extraction needs.
pub(crate) struct BextShare {
    pub rtg: RtgShare,
    pub zero: Vec<bool>,
    pub triples: Vec<BitTripleShare>,
}

/// Collect per-party BExt material from the pool.
pub(crate) fn bext_material(
    cluster: &mut Cluster,
    user: UserId,
    bit_len: usize,
    pool: &mut Pool,
) -> Result<Vec<BextShare>> {
    let rtg_tuple = pool.take_rtg(cluster, user, bit_len)?;
    let zero_vec = pool.take_zero_xor(cluster, user, bit_len)?;
    let triples = pool.take_bit_triples(cluster, user, 2 * (bit_len - 1))?;
    let per_party = split_triples(&triples, cluster.parties())?;
    Ok(rtg_tuple
        .shares
        .iter()
        .zip(zero_vec.shares)
        .zip(per_party)
        .map(|((rtg, zero), triples)| BextShare {
            rtg: rtg.clone(),
            zero,
            triples,
        })
        .collect())
}

/// Online stage of bit extraction for one party.
pub(crate) fn bext_online(
    ctx: &mut PartyCtx,
    share_value: &Integer,
    bit_len: usize,
    material: BextShare,
) -> Result<Vec<bool>> {
    let parties = ctx.parties;
    let me = ctx.index;
    let masked = mod_floor(
        &(Integer::from(share_value) - &material.rtg.value),
        ctx.pk.modulus(),
    );
    let v_bits = if me == parties {
        let mut fold = ctx.enc(&masked)?;
        for j in 1..parties {
            let ct = ctx.recv_ct(j)?;
            fold = hom_add(&ctx.pk, &fold, &ct)?;
        }
        let opened = ctx.sdd_owner(&fold)?;
        let centered = center(&opened, ctx.pk.modulus());
        let bits = int_to_bits(&centered, bit_len);
        bits.iter()
            .zip(&material.zero)
            .map(|(v, a)| v ^ a)
            .collect()
    } else {
        let ct = ctx.enc(&masked)?;
        ctx.send(parties, Msg::Ct(ct))?;
        ctx.sdd_helper(parties)?;
        material.zero.clone()
    };
    badd_online(
        ctx,
        &v_bits,
        &material.rtg.bits,
        &mut material.triples.into_iter(),
    )
}

/// Secure bit extraction: from integer shares of `u` (|u| < 2^(ℓ-2)) to XOR
/// shares of its ℓ-bit two's complement.
pub fn bext(
    cluster: &mut Cluster,
    user: UserId,
    u: &[IntShare],
    bit_len: usize,
    pool: &mut Pool,
) -> Result<Vec<BitVecShare>> {
    check_int_shares(cluster, user, u)?;
    if bit_len < 2 || bit_len + 2 > cluster.pk(user)?.modulus_bits() as usize {
        return Err(Error::RangeGuard("bit length out of range".into()));
    }
    let material = bext_material(cluster, user, bit_len, pool)?;
    let programs = u
        .iter()
        .zip(material)
        .map(|(share, m)| {
            let value = share.value.clone();
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Vec<bool>> + Send> =
                Box::new(move |ctx| bext_online(ctx, &value, bit_len, m));
            b
        })
        .collect();
    let outputs = cluster.run_protocol(user, programs)?;
    Ok(to_bitvec_shares(outputs))
}

/// Binary-to-integer share transformation, one party's view.
pub(crate) fn b2i_step(ctx: &mut PartyCtx, bit: bool) -> Result<Integer> {
    let me = ctx.index;
    let parties = ctx.parties;
    if me == 1 {
        let value = ctx.random_zn();
        let ex = ctx.enc(&value)?;
        let es = ctx.enc_bit(bit)?;
        ctx.send(2, Msg::Cts(vec![ex, es]))?;
        ctx.sdd_helper(parties)?;
        Ok(value)
    } else {
        let received = ctx.recv_cts(me - 1)?;
        let [ex, es]: [Ciphertext; 2] = received
            .try_into()
            .map_err(|_| Error::ProtocolAbort("b2i chain expects 2 ciphertexts".into()))?;
        let es = xor_mask(ctx, &es, bit)?;
        if me < parties {
            let value = ctx.random_zn();
            let fresh = ctx.enc(&value)?;
            let ex = hom_add(&ctx.pk, &ex, &fresh)?;
            ctx.send(me + 1, Msg::Cts(vec![ex, es]))?;
            ctx.sdd_helper(parties)?;
            Ok(value)
        } else {
            let eb = hom_add(&ctx.pk, &es, &hom_neg(&ctx.pk, &ex)?)?;
            ctx.sdd_owner(&eb)
        }
    }
}

/// Transform XOR bit shares into additive integer shares of the same bit.
pub fn b2i(cluster: &mut Cluster, user: UserId, a: &[BitShare]) -> Result<Vec<IntShare>> {
    check_bit_shares(cluster, a)?;
    let programs = a
        .iter()
        .map(|share| {
            let bit = share.value;
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<Integer> + Send> =
                Box::new(move |ctx| b2i_step(ctx, bit));
            b
        })
        .collect();
    let values = cluster.run_protocol(user, programs)?;
    to_int_shares(cluster, user, values)
}

/// Integer-to-binary share transformation, one party's view. The recombined
/// integer must be 0 or 1.
pub(crate) fn i2b_step(ctx: &mut PartyCtx, value: &Integer) -> Result<bool> {
    let me = ctx.index;
    let parties = ctx.parties;
    if me == 1 {
        let ey = ctx.enc(&mod_floor(value, ctx.pk.modulus()))?;
        ctx.send(2, Msg::Ct(ey))?;
        let es = ctx.recv_ct(2)?;
        Ok(ctx.sdd_owner(&es)? == 1)
    } else {
        let ey = ctx.recv_ct(me - 1)?;
        let mine = ctx.enc(&mod_floor(value, ctx.pk.modulus()))?;
        let ey = hom_add(&ctx.pk, &ey, &mine)?;
        let es = if me < parties {
            ctx.send(me + 1, Msg::Ct(ey))?;
            ctx.recv_ct(me + 1)?
        } else {
            ey
        };
        let bit = ctx.random_bit();
        let masked = xor_mask(ctx, &es, bit)?;
        ctx.send(me - 1, Msg::Ct(masked))?;
        ctx.sdd_helper(1)?;
        Ok(bit)
    }
}

/// Transform additive integer shares of a bit into XOR shares.
pub fn i2b(cluster: &mut Cluster, user: UserId, a: &[IntShare]) -> Result<Vec<BitShare>> {
    check_int_shares(cluster, user, a)?;
    let programs = a
        .iter()
        .map(|share| {
            let value = share.value.clone();
            let b: Box<dyn FnOnce(&mut PartyCtx) -> Result<bool> + Send> =
                Box::new(move |ctx| i2b_step(ctx, &value));
            b
        })
        .collect();
    let bits = cluster.run_protocol(user, programs)?;
    Ok(to_bit_shares(bits))
}

// --- share plumbing -------------------------------------------------------

pub(crate) fn to_bit_shares(bits: Vec<bool>) -> Vec<BitShare> {
    bits.into_iter()
        .enumerate()
        .map(|(i, value)| BitShare {
            index: i as u8 + 1,
            value,
        })
        .collect()
}

pub(crate) fn to_bitvec_shares(outputs: Vec<Vec<bool>>) -> Vec<BitVecShare> {
    outputs
        .into_iter()
        .enumerate()
        .map(|(i, bits)| BitVecShare {
            index: i as u8 + 1,
            bits,
        })
        .collect()
}

pub(crate) fn to_int_shares(
    cluster: &Cluster,
    user: UserId,
    values: Vec<Integer>,
) -> Result<Vec<IntShare>> {
    let key_id = cluster.pk(user)?.key_id();
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, value)| IntShare {
            index: i as u8 + 1,
            value,
            key_id,
        })
        .collect())
}

pub(crate) fn check_bit_shares(cluster: &Cluster, shares: &[BitShare]) -> Result<()> {
    if shares.len() != cluster.parties()
        || shares
            .iter()
            .enumerate()
            .any(|(i, s)| s.index as usize != i + 1)
    {
        return Err(Error::IncompleteShares);
    }
    Ok(())
}

pub(crate) fn check_int_shares(
    cluster: &Cluster,
    user: UserId,
    shares: &[IntShare],
) -> Result<()> {
    let key_id = cluster.pk(user)?.key_id();
    if shares.len() != cluster.parties()
        || shares
            .iter()
            .enumerate()
            .any(|(i, s)| s.index as usize != i + 1 || s.key_id != key_id)
    {
        return Err(Error::IncompleteShares);
    }
    Ok(())
}

pub(crate) fn split_triples(
    triples: &[BitTriple],
    parties: usize,
) -> Result<Vec<Vec<BitTripleShare>>> {
    let mut per_party = vec![Vec::with_capacity(triples.len()); parties];
    for triple in triples {
        triple.consume()?;
        for (i, share) in triple.shares.iter().enumerate() {
            per_party[i].push(*share);
        }
    }
    Ok(per_party)
}
