//! The simulated cloud: `P` enclave parties with private state, pairwise
//! FIFO channels, an untrusted store, seal/unseal, distributed decryption,
//! proactive refresh, and pipeline orchestration.
//!
//! Parties run as real threads per protocol invocation; under the
//! round-robin scheduler they cooperate on a baton so runs are deterministic,
//! under the threads scheduler they free-run. Either way a party only ever
//! touches its own state and whatever arrives on its channels.

pub mod pipeline;
pub mod sim;
pub mod uns;

pub use pipeline::{Pipeline, PipelineStep};
pub use sim::{Entry, Msg, SchedulerMode, SimNet};
pub use uns::{SealedRecord, TxId, UnsStore, UserId};

use crate::arith::{mod_floor, random_below, write_signed};
use crate::pcdd::{
    self, enc, keygen, keygen_insecure_toy, pdec, split_key, tdec, write_ciphertext, Ciphertext,
    KeyMaterial, KeyShare, PartialDecryption, PublicKey,
};
use crate::shares::{center, share_int, zero_sum_row, DeltaGroup};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rug::Integer;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

/// Cluster construction parameters.
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub parties: usize,
    pub modulus_bits: u32,
    pub seed: u64,
    pub scheduler: SchedulerMode,
    /// Use the fixed p=5, q=7 toy key instead of generating one.
    pub insecure_toy_keys: bool,
    /// Back the untrusted store with this file.
    pub uns_path: Option<PathBuf>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            parties: 3,
            modulus_bits: 512,
            seed: 0,
            scheduler: SchedulerMode::RoundRobin,
            insecure_toy_keys: false,
            uns_path: None,
        }
    }
}

/// What kind of share a stored transaction holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// Additive share in Z_N, recombined with centering.
    Int,
    /// XOR share stored as 0/1.
    Bit,
}

/// One event in a compromised party's logged view.
#[derive(Debug, Clone)]
pub enum ViewEvent {
    Sent { to: u8, msg: Msg },
    Received { from: u8, msg: Msg },
    KeyShareSnapshot { epoch: u32, value: Integer },
    DataSnapshot { id: TxId, epoch: u32, value: Integer },
}

pub(crate) struct PartyState {
    pub index: u8,
    pub rng: ChaCha20Rng,
    /// Exactly one key share per user context.
    pub key_shares: HashMap<UserId, KeyShare>,
    pub compromised: Option<UserId>,
    pub view: Vec<ViewEvent>,
    pub unreachable: bool,
}

struct UserInfo {
    pk: PublicKey,
    epoch: u32,
}

/// The simulated cloud system.
pub struct Cluster {
    config: ClusterConfig,
    users: HashMap<UserId, UserInfo>,
    parties: Vec<PartyState>,
    net: SimNet,
    uns: Mutex<UnsStore>,
    user_rng: ChaCha20Rng,
    catalog: HashMap<(UserId, TxId), ValueKind>,
    rng_nonce: u64,
}

fn derive_rng(seed: u64, nonce: u64, actor: u8) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(nonce.to_le_bytes());
    hasher.update([actor]);
    let digest = hasher.finalize();
    let mut material = [0u8; 32];
    material.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(material)
}

/// Integrity tag: `H(ct_bytes || sk_i^(t) || id || t)` with SHA-256.
fn seal_tag(pk: &PublicKey, ct: &Ciphertext, share: &KeyShare, id: TxId) -> [u8; 32] {
    let mut ct_bytes = Vec::new();
    write_ciphertext(&mut ct_bytes, ct, pk);
    let mut share_bytes = Vec::new();
    write_signed(&mut share_bytes, &share.value);
    let mut hasher = Sha256::new();
    hasher.update(&ct_bytes);
    hasher.update(&share_bytes);
    hasher.update(id.0);
    hasher.update(share.epoch.to_be_bytes());
    hasher.finalize().into()
}

/// Per-party execution context handed to protocol programs.
pub(crate) struct PartyCtx<'a> {
    pub index: usize,
    pub parties: usize,
    pub user: UserId,
    pub pk: PublicKey,
    net: &'a SimNet,
    uns: &'a Mutex<UnsStore>,
    state: &'a mut PartyState,
}

impl<'a> PartyCtx<'a> {
    pub fn n(&self) -> &Integer {
        self.pk.modulus()
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.state.rng
    }

    pub fn key_share(&self) -> Result<&KeyShare> {
        self.state
            .key_shares
            .get(&self.user)
            .ok_or(Error::UnknownUser)
    }

    pub fn send(&mut self, to: usize, msg: Msg) -> Result<()> {
        if self.state.compromised == Some(self.user) {
            self.state.view.push(ViewEvent::Sent {
                to: to as u8,
                msg: msg.clone(),
            });
        }
        self.net.send(self.index, to, msg)
    }

    pub fn recv(&mut self, from: usize) -> Result<Msg> {
        let msg = self.net.recv(self.index, from)?;
        if self.state.compromised == Some(self.user) {
            self.state.view.push(ViewEvent::Received {
                from: from as u8,
                msg: msg.clone(),
            });
        }
        Ok(msg)
    }

    pub fn send_user(&mut self, msg: Msg) -> Result<()> {
        self.send(0, msg)
    }

    fn unexpected() -> Error {
        Error::ProtocolAbort("unexpected message type".into())
    }

    pub fn recv_ct(&mut self, from: usize) -> Result<Ciphertext> {
        match self.recv(from)? {
            Msg::Ct(ct) => Ok(ct),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_cts(&mut self, from: usize) -> Result<Vec<Ciphertext>> {
        match self.recv(from)? {
            Msg::Cts(cts) => Ok(cts),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_pd(&mut self, from: usize) -> Result<PartialDecryption> {
        match self.recv(from)? {
            Msg::Pd(pd) => Ok(pd),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_pds(&mut self, from: usize) -> Result<Vec<PartialDecryption>> {
        match self.recv(from)? {
            Msg::Pds(pds) => Ok(pds),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_num(&mut self, from: usize) -> Result<Integer> {
        match self.recv(from)? {
            Msg::Num(x) => Ok(x),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_nums(&mut self, from: usize) -> Result<Vec<Integer>> {
        match self.recv(from)? {
            Msg::Nums(xs) => Ok(xs),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_numpair(&mut self, from: usize) -> Result<(Integer, Integer)> {
        match self.recv(from)? {
            Msg::NumPair(x, y) => Ok((x, y)),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_bit(&mut self, from: usize) -> Result<bool> {
        match self.recv(from)? {
            Msg::Bit(b) => Ok(b),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_bitpair(&mut self, from: usize) -> Result<(bool, bool)> {
        match self.recv(from)? {
            Msg::BitPair(x, y) => Ok((x, y)),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn recv_bits(&mut self, from: usize) -> Result<Vec<bool>> {
        match self.recv(from)? {
            Msg::Bits(bs) => Ok(bs),
            _ => Err(Self::unexpected()),
        }
    }

    pub fn random_zn(&mut self) -> Integer {
        let n = self.pk.modulus().clone();
        random_below(&mut self.state.rng, &n)
    }

    /// Uniform element of D_N (centered).
    pub fn random_dn(&mut self) -> Integer {
        let x = self.random_zn();
        center(&x, self.pk.modulus())
    }

    pub fn random_bit(&mut self) -> bool {
        self.state.rng.gen()
    }

    pub fn enc(&mut self, m: &Integer) -> Result<Ciphertext> {
        enc(&self.pk, m, &mut self.state.rng)
    }

    /// Encrypt a centered value by lifting it into Z_N first.
    pub fn enc_signed(&mut self, m: &Integer) -> Result<Ciphertext> {
        let lifted = mod_floor(m, self.pk.modulus());
        self.enc(&lifted)
    }

    pub fn enc_bit(&mut self, b: bool) -> Result<Ciphertext> {
        self.enc(&Integer::from(b as u8))
    }

    /// Owner side of SDD: broadcast the ciphertext, gather partial
    /// decryptions, combine. Exactly `2(P-1)` messages.
    pub fn sdd_owner(&mut self, ct: &Ciphertext) -> Result<Integer> {
        for j in 1..=self.parties {
            if j != self.index {
                self.send(j, Msg::Ct(ct.clone()))?;
            }
        }
        let mut parts = Vec::with_capacity(self.parties);
        parts.push(pdec(self.key_share()?, &self.pk, ct)?);
        for j in 1..=self.parties {
            if j != self.index {
                parts.push(self.recv_pd(j)?);
            }
        }
        tdec(&parts, &self.pk, self.parties)
    }

    /// Helper side of SDD for the given owner.
    pub fn sdd_helper(&mut self, owner: usize) -> Result<()> {
        let ct = self.recv_ct(owner)?;
        let part = pdec(self.key_share()?, &self.pk, &ct)?;
        self.send(owner, Msg::Pd(part))
    }

    /// Batched SDD owner side: one broadcast carrying all ciphertexts, one
    /// reply per helper carrying all partial decryptions.
    pub fn sdd_owner_batch(&mut self, cts: &[Ciphertext]) -> Result<Vec<Integer>> {
        for j in 1..=self.parties {
            if j != self.index {
                self.send(j, Msg::Cts(cts.to_vec()))?;
            }
        }
        let mut parts: Vec<Vec<PartialDecryption>> = Vec::with_capacity(cts.len());
        for ct in cts {
            parts.push(vec![pdec(self.key_share()?, &self.pk, ct)?]);
        }
        for j in 1..=self.parties {
            if j != self.index {
                let batch = self.recv_pds(j)?;
                if batch.len() != cts.len() {
                    return Err(Error::ProtocolAbort("sdd batch arity mismatch".into()));
                }
                for (slot, pd) in parts.iter_mut().zip(batch) {
                    slot.push(pd);
                }
            }
        }
        parts
            .into_iter()
            .map(|slot| tdec(&slot, &self.pk, self.parties))
            .collect()
    }

    /// Batched SDD helper side.
    pub fn sdd_helper_batch(&mut self, owner: usize) -> Result<()> {
        let cts = self.recv_cts(owner)?;
        let mut batch = Vec::with_capacity(cts.len());
        for ct in &cts {
            batch.push(pdec(self.key_share()?, &self.pk, ct)?);
        }
        self.send(owner, Msg::Pds(batch))
    }

    /// Run one SDD with the given owner; returns the plaintext on the owner.
    pub fn sdd(&mut self, owner: usize, ct: Option<&Ciphertext>) -> Result<Option<Integer>> {
        if self.index == owner {
            let ct = ct.ok_or_else(|| {
                Error::ProtocolAbort("sdd owner needs a ciphertext".into())
            })?;
            Ok(Some(self.sdd_owner(ct)?))
        } else {
            self.sdd_helper(owner)?;
            Ok(None)
        }
    }

    /// Seal a Z_N share under the current-epoch key share and store it.
    pub fn seal(&mut self, id: TxId, value: &Integer) -> Result<SealedRecord> {
        let ct = self.enc(value)?;
        let share = self.key_share()?;
        let record = SealedRecord {
            user: self.user,
            id,
            party: self.index as u8,
            epoch: share.epoch,
            tag: seal_tag(&self.pk, &ct, share, id),
            ct,
        };
        self.uns
            .lock()
            .unwrap()
            .put(self.index as u8, record.clone())?;
        Ok(record)
    }

    /// Local integrity verification of a sealed record against the party's
    /// current-epoch key share. Returns ⊥ (`Error::Integrity`) on mismatch.
    pub fn verify_record(&self, record: &SealedRecord) -> Result<()> {
        if record.party != self.index as u8 || record.user != self.user {
            return Err(Error::AccessDenied);
        }
        let share = self.key_share()?;
        let expected = seal_tag(&self.pk, &record.ct, share, record.id);
        if expected != record.tag || record.epoch != share.epoch {
            return Err(Error::Integrity);
        }
        Ok(())
    }

    /// All parties call this together: each unseals its own record for `id`
    /// through one SDD per owner, in index order.
    pub fn load_share(&mut self, id: TxId) -> Result<Integer> {
        let mut mine = None;
        for owner in 1..=self.parties {
            if owner == self.index {
                let record = self.uns.lock().unwrap().get(self.index as u8, self.user, id)?;
                self.verify_record(&record)?;
                let value = self.sdd_owner(&record.ct)?;
                if self.state.compromised == Some(self.user) {
                    self.state.view.push(ViewEvent::DataSnapshot {
                        id,
                        epoch: record.epoch,
                        value: value.clone(),
                    });
                }
                mine = Some(value);
            } else {
                self.sdd_helper(owner)?;
            }
        }
        mine.ok_or_else(|| Error::ProtocolAbort("missing own share".into()))
    }

    /// Pairwise handshake with every other party, recorded in the transcript.
    pub fn handshake_all(&mut self) -> Result<()> {
        for j in 1..=self.parties {
            if j != self.index {
                self.send(j, Msg::Hello)?;
            }
        }
        for j in 1..=self.parties {
            if j != self.index {
                match self.recv(j)? {
                    Msg::Hello => {}
                    _ => return Err(Self::unexpected()),
                }
            }
        }
        Ok(())
    }
}

type Program<'env, T> = Box<dyn FnOnce(&mut PartyCtx) -> Result<T> + Send + 'env>;

struct FinishGuard<'a> {
    net: &'a SimNet,
    index: usize,
    armed: bool,
}

impl Drop for FinishGuard<'_> {
    fn drop(&mut self) {
        if self.armed {
            self.net.finish(self.index, Some("party panicked".into()));
        }
    }
}

pub(crate) fn default_user() -> UserId {
    UserId::from_name("primary")
}

impl Cluster {
    /// Initialize the system: generate keys, split the private key, deliver
    /// share `i` to party `i` over its channel, and return the cluster plus
    /// the request user's key material.
    pub fn init_system(config: ClusterConfig) -> Result<(Cluster, KeyMaterial)> {
        if config.parties < 3 {
            return Err(Error::InvalidArgument(
                "the runtime requires at least 3 parties".into(),
            ));
        }
        if config.parties > 32 {
            return Err(Error::InvalidArgument("too many parties".into()));
        }
        let uns = match &config.uns_path {
            Some(path) => UnsStore::open(path.clone())?,
            None => UnsStore::in_memory(),
        };
        let parties = (1..=config.parties as u8)
            .map(|index| PartyState {
                index,
                rng: derive_rng(config.seed, 0, index),
                key_shares: HashMap::new(),
                compromised: None,
                view: Vec::new(),
                unreachable: false,
            })
            .collect();
        let mut cluster = Cluster {
            net: SimNet::new(config.parties, config.scheduler),
            users: HashMap::new(),
            parties,
            uns: Mutex::new(uns),
            user_rng: derive_rng(config.seed, 0, 0),
            catalog: HashMap::new(),
            rng_nonce: 0,
            config,
        };
        let km = cluster.register_user_internal(
            default_user(),
            cluster.config.modulus_bits,
            cluster.config.seed,
        )?;
        Ok((cluster, km))
    }

    /// The built-in user context created by [`Cluster::init_system`].
    pub fn primary_user() -> UserId {
        default_user()
    }

    pub fn parties(&self) -> usize {
        self.config.parties
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn pk(&self, user: UserId) -> Result<&PublicKey> {
        Ok(&self.users.get(&user).ok_or(Error::UnknownUser)?.pk)
    }

    pub fn epoch(&self, user: UserId) -> Result<u32> {
        Ok(self.users.get(&user).ok_or(Error::UnknownUser)?.epoch)
    }

    pub fn enable_transcript(&self, on: bool) {
        self.net.set_transcript(on);
    }

    pub fn take_transcript(&self) -> Vec<Entry> {
        self.net.take_transcript()
    }

    pub fn mark_phase(&self, step: u32, phase: u8) {
        self.net.mark_phase(step, phase);
    }

    /// Register an additional user context with an independent key pair.
    pub fn register_user(&mut self, user: UserId, bits: u32, seed: u64) -> Result<KeyMaterial> {
        if self.users.contains_key(&user) {
            return Err(Error::DuplicateUser);
        }
        self.register_user_internal(user, bits, seed)
    }

    fn register_user_internal(
        &mut self,
        user: UserId,
        bits: u32,
        seed: u64,
    ) -> Result<KeyMaterial> {
        let (pk, sk) = if self.config.insecure_toy_keys {
            keygen_insecure_toy()
        } else {
            keygen(bits, seed)?
        };
        let shares = split_key(&sk, &pk, self.config.parties, &mut self.user_rng)?;
        self.uns.lock().unwrap().register_key(pk.clone());
        // Channel establishment plus key-share delivery, one share per party.
        for share in &shares {
            self.net.seed_from_user(share.index as usize, Msg::Hello);
            self.net
                .seed_from_user(share.index as usize, Msg::Num(share.value.clone()));
        }
        self.users.insert(
            user,
            UserInfo {
                pk: pk.clone(),
                epoch: 0,
            },
        );
        let programs: Vec<Program<()>> = (1..=self.config.parties)
            .map(|index| {
                let b: Program<()> = Box::new(move |ctx| {
                    match ctx.recv(0)? {
                        Msg::Hello => {}
                        _ => return Err(Error::ProtocolAbort("expected handshake".into())),
                    }
                    let value = ctx.recv_num(0)?;
                    let share = KeyShare {
                        index: index as u8,
                        value,
                        epoch: 0,
                    };
                    ctx.state.key_shares.insert(ctx.user, share);
                    Ok(())
                });
                b
            })
            .collect();
        self.run_protocol(user, programs)?;
        Ok(KeyMaterial {
            pk,
            sk: Some(sk),
            shares: Vec::new(),
        })
    }

    /// Execute one program per party under the configured scheduler.
    pub(crate) fn run_protocol<T: Send>(
        &mut self,
        user: UserId,
        programs: Vec<Program<T>>,
    ) -> Result<Vec<T>> {
        let pk = self.users.get(&user).ok_or(Error::UnknownUser)?.pk.clone();
        assert_eq!(programs.len(), self.config.parties, "one program per party");
        self.net.begin_run();
        let net = &self.net;
        let uns = &self.uns;
        let parties = self.config.parties;
        let results: Vec<crate::Result<T>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (state, program) in self.parties.iter_mut().zip(programs) {
                let pk = pk.clone();
                handles.push(scope.spawn(move || {
                    let index = state.index as usize;
                    if state.unreachable {
                        net.finish(index, Some(format!("party {index} unreachable")));
                        return Err(Error::ProtocolAbort(format!(
                            "party {index} unreachable"
                        )));
                    }
                    let mut guard = FinishGuard {
                        net,
                        index,
                        armed: true,
                    };
                    let mut ctx = PartyCtx {
                        index,
                        parties,
                        user,
                        pk,
                        net,
                        uns,
                        state,
                    };
                    let result = program(&mut ctx);
                    guard.armed = false;
                    net.finish(index, result.as_ref().err().map(|e| e.to_string()));
                    result
                }));
            }
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::ProtocolAbort("party panicked".into())))
                })
                .collect()
        });
        let mut out = Vec::with_capacity(results.len());
        let mut abort: Option<Error> = None;
        let mut primary: Option<Error> = None;
        for result in results {
            match result {
                Ok(v) => out.push(v),
                Err(e @ Error::ProtocolAbort(_)) => {
                    if abort.is_none() {
                        abort = Some(e);
                    }
                }
                Err(e) => {
                    if primary.is_none() {
                        primary = Some(e);
                    }
                }
            }
        }
        if let Some(e) = primary.or(abort) {
            return Err(e);
        }
        Ok(out)
    }

    /// Secure distributed decryption with the given owner party.
    pub fn sdd(&mut self, user: UserId, owner: usize, ct: &Ciphertext) -> Result<Integer> {
        if owner == 0 || owner > self.config.parties {
            return Err(Error::InvalidArgument("no such party".into()));
        }
        let programs: Vec<Program<Option<Integer>>> = (1..=self.config.parties)
            .map(|index| {
                let ct = ct.clone();
                let b: Program<Option<Integer>> = Box::new(move |ctx| {
                    if index == owner {
                        ctx.sdd(owner, Some(&ct))
                    } else {
                        ctx.sdd(owner, None)
                    }
                });
                b
            })
            .collect();
        let mut results = self.run_protocol(user, programs)?;
        results
            .swap_remove(owner - 1)
            .ok_or_else(|| Error::ProtocolAbort("owner produced no value".into()))
    }

    /// Seal a single share value held by `party` under the given id.
    pub fn seal(
        &mut self,
        party: usize,
        user: UserId,
        id: TxId,
        value: &Integer,
    ) -> Result<SealedRecord> {
        let programs: Vec<Program<Option<SealedRecord>>> = (1..=self.config.parties)
            .map(|index| {
                let value = value.clone();
                let b: Program<Option<SealedRecord>> = Box::new(move |ctx| {
                    if index == party {
                        Ok(Some(ctx.seal(id, &value)?))
                    } else {
                        Ok(None)
                    }
                });
                b
            })
            .collect();
        let mut results = self.run_protocol(user, programs)?;
        results
            .swap_remove(party - 1)
            .ok_or_else(|| Error::ProtocolAbort("seal produced no record".into()))
    }

    /// Unseal a record held by `party`: verify its tag, then recover the
    /// share through SDD. Returns ⊥ on any integrity mismatch.
    pub fn unseal(
        &mut self,
        party: usize,
        user: UserId,
        record: &SealedRecord,
    ) -> Result<Integer> {
        let programs: Vec<Program<Option<Integer>>> = (1..=self.config.parties)
            .map(|index| {
                let record = record.clone();
                let b: Program<Option<Integer>> = Box::new(move |ctx| {
                    if index == party {
                        ctx.verify_record(&record)?;
                        Ok(Some(ctx.sdd_owner(&record.ct)?))
                    } else {
                        ctx.sdd_helper(party)?;
                        Ok(None)
                    }
                });
                b
            })
            .collect();
        let mut results = self.run_protocol(user, programs)?;
        results
            .swap_remove(party - 1)
            .ok_or_else(|| Error::ProtocolAbort("unseal produced no value".into()))
    }

    /// Upload: split each value into P shares, deliver share i to party i,
    /// and have each party seal it under the given id.
    pub fn upload(&mut self, user: UserId, values: &[Integer], ids: &[TxId]) -> Result<()> {
        self.upload_kind(user, values, ids, ValueKind::Int)
    }

    pub(crate) fn upload_kind(
        &mut self,
        user: UserId,
        values: &[Integer],
        ids: &[TxId],
        kind: ValueKind,
    ) -> Result<()> {
        if values.len() != ids.len() {
            return Err(Error::InvalidArgument("one id per value".into()));
        }
        let pk = self.pk(user)?.clone();
        {
            let uns = self.uns.lock().unwrap();
            for id in ids {
                if uns.contains(user, *id) || self.catalog.contains_key(&(user, *id)) {
                    return Err(Error::Conflict(hex_id(id)));
                }
            }
        }
        let mut per_party: Vec<Vec<Integer>> = vec![Vec::new(); self.config.parties];
        for value in values {
            match kind {
                ValueKind::Int => {
                    let shares = share_int(&pk, value, self.config.parties, &mut self.user_rng)?;
                    for share in shares {
                        per_party[share.index as usize - 1].push(share.value);
                    }
                }
                ValueKind::Bit => {
                    let bit = value.to_u8().map(|b| b == 1).ok_or_else(|| {
                        Error::InvalidArgument("bit uploads must be 0 or 1".into())
                    })?;
                    let shares =
                        crate::shares::share_bit(bit, self.config.parties, &mut self.user_rng)?;
                    for share in shares {
                        per_party[share.index as usize - 1]
                            .push(Integer::from(share.value as u8));
                    }
                }
            }
        }
        for (i, values) in per_party.iter().enumerate() {
            self.net.seed_from_user(i + 1, Msg::Nums(values.clone()));
        }
        let ids_owned: Vec<TxId> = ids.to_vec();
        let programs: Vec<Program<()>> = (1..=self.config.parties)
            .map(|_| {
                let ids = ids_owned.clone();
                let b: Program<()> = Box::new(move |ctx| {
                    let values = ctx.recv_nums(0)?;
                    if values.len() != ids.len() {
                        return Err(Error::ProtocolAbort("upload arity mismatch".into()));
                    }
                    for (id, value) in ids.iter().zip(values) {
                        ctx.seal(*id, &value)?;
                    }
                    Ok(())
                });
                b
            })
            .collect();
        self.run_protocol(user, programs)?;
        for id in ids {
            self.catalog.insert((user, *id), kind);
        }
        Ok(())
    }

    /// Retrieve: each party unseals its shares and sends them to the user,
    /// who recombines (centered sums for integers, XOR for bits).
    pub fn retrieve(&mut self, user: UserId, ids: &[TxId]) -> Result<Vec<Integer>> {
        let pk = self.pk(user)?.clone();
        let ids_owned: Vec<TxId> = ids.to_vec();
        let programs: Vec<Program<()>> = (1..=self.config.parties)
            .map(|_| {
                let ids = ids_owned.clone();
                let b: Program<()> = Box::new(move |ctx| {
                    let mut values = Vec::with_capacity(ids.len());
                    for id in &ids {
                        values.push(ctx.load_share(*id)?);
                    }
                    ctx.send_user(Msg::Nums(values))
                });
                b
            })
            .collect();
        self.run_protocol(user, programs)?;
        let mut per_party: HashMap<usize, Vec<Integer>> = HashMap::new();
        for (from, msg) in self.net.drain_to_user() {
            if let Msg::Nums(values) = msg {
                per_party.insert(from, values);
            }
        }
        if per_party.len() != self.config.parties {
            return Err(Error::IncompleteShares);
        }
        let mut out = Vec::with_capacity(ids.len());
        for (pos, id) in ids.iter().enumerate() {
            let kind = self
                .catalog
                .get(&(user, *id))
                .copied()
                .unwrap_or(ValueKind::Int);
            match kind {
                ValueKind::Int => {
                    let mut sum = Integer::new();
                    for party in 1..=self.config.parties {
                        sum += &per_party[&party][pos];
                    }
                    out.push(center(&sum, pk.modulus()));
                }
                ValueKind::Bit => {
                    let mut acc = 0u8;
                    for party in 1..=self.config.parties {
                        acc ^= per_party[&party][pos].to_u8().unwrap_or(0) & 1;
                    }
                    out.push(Integer::from(acc));
                }
            }
        }
        Ok(out)
    }

    /// Proactive key-share refresh: pairwise signed zero-sum deltas, epoch
    /// t → t+1, with every live sealed record of the user migrated to the
    /// new epoch (unsealed at t, re-sealed at t+1). Old shares are erased.
    pub fn refresh_key_shares(&mut self, user: UserId) -> Result<()> {
        let pk = self.pk(user)?.clone();
        // Every live record must be re-sealed under the new epoch; records
        // are per (id, party), and an id need not be held by all parties.
        let slots: Vec<(TxId, u8)> = self.with_uns(|u| {
            u.records()
                .filter(|r| r.user == user)
                .map(|r| (r.id, r.party))
                .collect()
        });
        let bound = Integer::from(pk.modulus() * pk.modulus());
        let parties = self.config.parties;
        let programs: Vec<Program<()>> = (1..=parties)
            .map(|index| {
                let slots = slots.clone();
                let bound = bound.clone();
                let b: Program<()> = Box::new(move |ctx| {
                    let mut held = Vec::new();
                    for (id, owner) in &slots {
                        let owner = *owner as usize;
                        if owner == index {
                            let record =
                                ctx.uns.lock().unwrap().get(index as u8, ctx.user, *id)?;
                            ctx.verify_record(&record)?;
                            held.push((*id, ctx.sdd_owner(&record.ct)?));
                        } else {
                            ctx.sdd_helper(owner)?;
                        }
                    }
                    let row = zero_sum_row(
                        ctx.parties,
                        &DeltaGroup::Signed(bound),
                        ctx.rng(),
                    );
                    for j in 1..=ctx.parties {
                        if j != index {
                            ctx.send(j, Msg::Num(row[j - 1].clone()))?;
                        }
                    }
                    let mut adjust = row[index - 1].clone();
                    for j in 1..=ctx.parties {
                        if j != index {
                            adjust += ctx.recv_num(j)?;
                        }
                    }
                    let old = ctx.key_share()?.clone();
                    let fresh = KeyShare {
                        index: old.index,
                        value: old.value + adjust,
                        epoch: old.epoch + 1,
                    };
                    // The insert drops the previous-epoch share.
                    ctx.state.key_shares.insert(ctx.user, fresh);
                    for (id, value) in held {
                        ctx.seal(id, &value)?;
                    }
                    Ok(())
                });
                b
            })
            .collect();
        self.run_protocol(user, programs)?;
        self.users.get_mut(&user).unwrap().epoch += 1;
        Ok(())
    }

    /// Update the stored data shares of the given ids with zero-sum deltas
    /// and re-seal them. The recombined values are unchanged.
    pub fn refresh_data_shares(&mut self, user: UserId, ids: &[TxId]) -> Result<()> {
        let pk = self.pk(user)?.clone();
        let parties = self.config.parties;
        let kinds: Vec<ValueKind> = ids
            .iter()
            .map(|id| {
                self.catalog
                    .get(&(user, *id))
                    .copied()
                    .unwrap_or(ValueKind::Int)
            })
            .collect();
        let ids_owned: Vec<TxId> = ids.to_vec();
        let n = pk.modulus().clone();
        let programs: Vec<Program<()>> = (1..=parties)
            .map(|index| {
                let ids = ids_owned.clone();
                let kinds = kinds.clone();
                let n = n.clone();
                let b: Program<()> = Box::new(move |ctx| {
                    let mut held = Vec::with_capacity(ids.len());
                    for id in &ids {
                        held.push(ctx.load_share(*id)?);
                    }
                    // One zero-sum row per id, batched per peer.
                    let mut rows = Vec::with_capacity(ids.len());
                    for kind in &kinds {
                        let group = match kind {
                            ValueKind::Int => DeltaGroup::ModN(n.clone()),
                            ValueKind::Bit => DeltaGroup::Xor,
                        };
                        rows.push(zero_sum_row(ctx.parties, &group, ctx.rng()));
                    }
                    for j in 1..=ctx.parties {
                        if j != index {
                            let batch: Vec<Integer> =
                                rows.iter().map(|row| row[j - 1].clone()).collect();
                            ctx.send(j, Msg::Nums(batch))?;
                        }
                    }
                    let mut adjust: Vec<Integer> =
                        rows.iter().map(|row| row[index - 1].clone()).collect();
                    for j in 1..=ctx.parties {
                        if j != index {
                            let batch = ctx.recv_nums(j)?;
                            if batch.len() != ids.len() {
                                return Err(Error::ProtocolAbort(
                                    "delta batch arity mismatch".into(),
                                ));
                            }
                            for (acc, d) in adjust.iter_mut().zip(batch) {
                                *acc += d;
                            }
                        }
                    }
                    for ((id, old), (kind, delta)) in ids
                        .iter()
                        .zip(held)
                        .zip(kinds.iter().zip(adjust))
                    {
                        let fresh = match kind {
                            ValueKind::Int => mod_floor(&(old + delta), &n),
                            ValueKind::Bit => {
                                let b = (old.to_u8().unwrap_or(0) ^ delta.to_u8().unwrap_or(0)) & 1;
                                Integer::from(b)
                            }
                        };
                        ctx.seal(*id, &fresh)?;
                    }
                    Ok(())
                });
                b
            })
            .collect();
        self.run_protocol(user, programs)?;
        Ok(())
    }

    /// Mark a party compromised for the given user: its key share and all
    /// subsequent channel traffic and unsealed data enter its logged view.
    pub fn compromise(&mut self, party: usize, user: UserId) -> Result<()> {
        let state = self
            .parties
            .get_mut(party - 1)
            .ok_or_else(|| Error::InvalidArgument("no such party".into()))?;
        state.compromised = Some(user);
        if let Some(share) = state.key_shares.get(&user) {
            state.view.push(ViewEvent::KeyShareSnapshot {
                epoch: share.epoch,
                value: share.value.clone(),
            });
        }
        Ok(())
    }

    pub fn clear_compromise(&mut self, party: usize) {
        if let Some(state) = self.parties.get_mut(party - 1) {
            state.compromised = None;
        }
    }

    pub fn view(&self, party: usize) -> &[ViewEvent] {
        &self.parties[party - 1].view
    }

    pub fn set_unreachable(&mut self, party: usize, unreachable: bool) {
        self.parties[party - 1].unreachable = unreachable;
    }

    /// What each party would see inside its enclave for the given ids:
    /// `result[party-1][i]` is the party's current share of `ids[i]`.
    pub fn enclave_shares(&mut self, user: UserId, ids: &[TxId]) -> Result<Vec<Vec<Integer>>> {
        let ids_owned: Vec<TxId> = ids.to_vec();
        let programs: Vec<Program<Vec<Integer>>> = (1..=self.config.parties)
            .map(|_| {
                let ids = ids_owned.clone();
                let b: Program<Vec<Integer>> = Box::new(move |ctx| {
                    let mut values = Vec::with_capacity(ids.len());
                    for id in &ids {
                        values.push(ctx.load_share(*id)?);
                    }
                    Ok(values)
                });
                b
            })
            .collect();
        self.run_protocol(user, programs)
    }

    /// Test/inspection hook: current key-share values of every party.
    pub fn inspect_key_shares(&self, user: UserId) -> Vec<KeyShare> {
        self.parties
            .iter()
            .filter_map(|p| p.key_shares.get(&user).cloned())
            .collect()
    }

    /// Inspection hook over the untrusted store.
    pub fn with_uns<R>(&self, f: impl FnOnce(&UnsStore) -> R) -> R {
        f(&self.uns.lock().unwrap())
    }

    /// Raw bytes of the untrusted store in its on-disk format.
    pub fn uns_bytes(&self) -> Vec<u8> {
        self.uns.lock().unwrap().to_bytes()
    }

    pub fn value_kind(&self, user: UserId, id: TxId) -> Option<ValueKind> {
        self.catalog.get(&(user, id)).copied()
    }

    /// Drain everything the parties sent to the user since the last drain.
    pub(crate) fn net_drain_to_user(&self) -> Vec<(usize, Msg)> {
        self.net.drain_to_user()
    }

    pub(crate) fn set_value_kind(&mut self, user: UserId, id: TxId, kind: ValueKind) {
        self.catalog.insert((user, id), kind);
    }

    pub(crate) fn user_rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.user_rng
    }

    // --- state persistence for the CLI ----------------------------------

    /// Serialize keys, party key shares, epochs and the id catalog so a new
    /// process can resume operating on the same untrusted store.
    pub fn export_state(&self) -> Vec<u8> {
        let mut out = vec![1u8];
        out.push(self.config.parties as u8);
        out.extend_from_slice(&self.config.modulus_bits.to_be_bytes());
        out.extend_from_slice(&self.config.seed.to_be_bytes());
        out.push(match self.config.scheduler {
            SchedulerMode::RoundRobin => 0,
            SchedulerMode::Threads => 1,
        });
        out.push(self.config.insecure_toy_keys as u8);
        out.extend_from_slice(&(self.rng_nonce + 1).to_be_bytes());
        out.push(self.users.len() as u8);
        let mut users: Vec<_> = self.users.iter().collect();
        users.sort_by_key(|(id, _)| **id);
        for (user_id, info) in users {
            out.extend_from_slice(&user_id.0);
            out.extend_from_slice(&info.epoch.to_be_bytes());
            let shares: Vec<KeyShare> = self
                .parties
                .iter()
                .filter_map(|p| p.key_shares.get(user_id).cloned())
                .collect();
            let km = KeyMaterial {
                pk: info.pk.clone(),
                sk: None,
                shares,
            };
            let km_bytes = km.to_bytes();
            out.extend_from_slice(&(km_bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&km_bytes);
        }
        let mut entries: Vec<_> = self.catalog.iter().collect();
        entries.sort_by_key(|((user, id), _)| (*user, *id));
        out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
        for ((user, id), kind) in entries {
            out.extend_from_slice(&user.0);
            out.extend_from_slice(&id.0);
            out.push(match kind {
                ValueKind::Int => 0,
                ValueKind::Bit => 1,
            });
        }
        out
    }

    /// Rebuild a cluster from [`Cluster::export_state`] output.
    pub fn import_state(bytes: &[u8], uns_path: Option<PathBuf>) -> Result<Cluster> {
        let err = |what: &str| Error::Parse(format!("cluster state: {what}"));
        if bytes.first() != Some(&1u8) {
            return Err(err("unsupported version"));
        }
        let parties_count = *bytes.get(1).ok_or_else(|| err("truncated"))? as usize;
        let modulus_bits =
            u32::from_be_bytes(bytes.get(2..6).ok_or_else(|| err("truncated"))?.try_into().unwrap());
        let seed =
            u64::from_be_bytes(bytes.get(6..14).ok_or_else(|| err("truncated"))?.try_into().unwrap());
        let scheduler = match bytes.get(14) {
            Some(0) => SchedulerMode::RoundRobin,
            Some(1) => SchedulerMode::Threads,
            _ => return Err(err("bad scheduler")),
        };
        let toy = bytes.get(15) == Some(&1u8);
        let rng_nonce =
            u64::from_be_bytes(bytes.get(16..24).ok_or_else(|| err("truncated"))?.try_into().unwrap());
        let user_count = *bytes.get(24).ok_or_else(|| err("truncated"))? as usize;
        let mut pos = 25usize;

        let config = ClusterConfig {
            parties: parties_count,
            modulus_bits,
            seed,
            scheduler,
            insecure_toy_keys: toy,
            uns_path: uns_path.clone(),
        };
        let uns = match &config.uns_path {
            Some(path) => UnsStore::open(path.clone())?,
            None => UnsStore::in_memory(),
        };
        let mut parties: Vec<PartyState> = (1..=parties_count as u8)
            .map(|index| PartyState {
                index,
                rng: derive_rng(seed, rng_nonce, index),
                key_shares: HashMap::new(),
                compromised: None,
                view: Vec::new(),
                unreachable: false,
            })
            .collect();
        let mut users = HashMap::new();
        let mut cluster_uns = uns;
        for _ in 0..user_count {
            let user_bytes: [u8; 16] = bytes
                .get(pos..pos + 16)
                .ok_or_else(|| err("truncated user"))?
                .try_into()
                .unwrap();
            let epoch = u32::from_be_bytes(
                bytes
                    .get(pos + 16..pos + 20)
                    .ok_or_else(|| err("truncated epoch"))?
                    .try_into()
                    .unwrap(),
            );
            let km_len = u32::from_be_bytes(
                bytes
                    .get(pos + 20..pos + 24)
                    .ok_or_else(|| err("truncated key length"))?
                    .try_into()
                    .unwrap(),
            ) as usize;
            let km_bytes = bytes
                .get(pos + 24..pos + 24 + km_len)
                .ok_or_else(|| err("truncated key material"))?;
            pos += 24 + km_len;
            let km = KeyMaterial::from_bytes(km_bytes)?;
            let user = UserId(user_bytes);
            if km.shares.len() != parties_count {
                return Err(err("share count mismatch"));
            }
            for share in &km.shares {
                parties[share.index as usize - 1]
                    .key_shares
                    .insert(user, share.clone());
            }
            cluster_uns.register_key(km.pk.clone());
            users.insert(user, UserInfo { pk: km.pk, epoch });
        }
        let catalog_len = u32::from_be_bytes(
            bytes
                .get(pos..pos + 4)
                .ok_or_else(|| err("truncated catalog"))?
                .try_into()
                .unwrap(),
        ) as usize;
        pos += 4;
        let mut catalog = HashMap::new();
        for _ in 0..catalog_len {
            let user_bytes: [u8; 16] = bytes
                .get(pos..pos + 16)
                .ok_or_else(|| err("truncated catalog user"))?
                .try_into()
                .unwrap();
            let id_bytes: [u8; 16] = bytes
                .get(pos + 16..pos + 32)
                .ok_or_else(|| err("truncated catalog id"))?
                .try_into()
                .unwrap();
            let kind = match bytes.get(pos + 32) {
                Some(0) => ValueKind::Int,
                Some(1) => ValueKind::Bit,
                _ => return Err(err("bad value kind")),
            };
            pos += 33;
            catalog.insert((UserId(user_bytes), TxId(id_bytes)), kind);
        }
        Ok(Cluster {
            net: SimNet::new(parties_count, scheduler),
            users,
            parties,
            uns: Mutex::new(cluster_uns),
            user_rng: derive_rng(seed, rng_nonce, 0),
            catalog,
            rng_nonce,
            config,
        })
    }
}

fn hex_id(id: &TxId) -> String {
    id.0.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_cluster(parties: usize) -> (Cluster, KeyMaterial) {
        Cluster::init_system(ClusterConfig {
            parties,
            insecure_toy_keys: true,
            ..Default::default()
        })
        .unwrap()
    }

    fn small_cluster(seed: u64) -> (Cluster, KeyMaterial) {
        Cluster::init_system(ClusterConfig {
            modulus_bits: 128,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn init_rejects_fewer_than_three_parties() {
        let result = Cluster::init_system(ClusterConfig {
            parties: 2,
            insecure_toy_keys: true,
            ..Default::default()
        });
        assert!(result.is_err());
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let (c1, km1) = small_cluster(42);
        let (c2, km2) = small_cluster(42);
        let (_, km3) = small_cluster(43);
        assert_eq!(km1.pk, km2.pk);
        assert_ne!(km1.pk, km3.pk);
        let user = Cluster::primary_user();
        let s1 = c1.inspect_key_shares(user);
        let s2 = c2.inspect_key_shares(user);
        assert_eq!(s1, s2);
    }

    #[test]
    fn sdd_equals_direct_decryption() {
        let (mut cluster, km) = small_cluster(1);
        let user = Cluster::primary_user();
        let sk = km.sk.as_ref().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for owner in 1..=3usize {
            let m = random_below(&mut rng, km.pk.modulus());
            let ct = enc(&km.pk, &m, &mut rng).unwrap();
            let got = cluster.sdd(user, owner, &ct).unwrap();
            assert_eq!(got, pcdd::dec(sk, &km.pk, &ct).unwrap());
            assert_eq!(got, m);
        }
    }

    #[test]
    fn sdd_transcript_has_two_p_minus_one_messages() {
        let (mut cluster, km) = toy_cluster(4);
        let user = Cluster::primary_user();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let ct = enc(&km.pk, &Integer::from(6), &mut rng).unwrap();
        cluster.enable_transcript(true);
        cluster.sdd(user, 2, &ct).unwrap();
        let transcript = cluster.take_transcript();
        let messages = transcript
            .iter()
            .filter(|e| matches!(e, Entry::Message { .. }))
            .count();
        assert_eq!(messages, 2 * (4 - 1));
        assert!(transcript.iter().all(|e| match e {
            Entry::Message { msg, .. } => msg.is_ciphertext_only(),
            _ => true,
        }));
    }

    #[test]
    fn sdd_aborts_when_a_party_is_unreachable() {
        let (mut cluster, km) = toy_cluster(3);
        let user = Cluster::primary_user();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let ct = enc(&km.pk, &Integer::from(1), &mut rng).unwrap();
        cluster.set_unreachable(3, true);
        assert!(matches!(
            cluster.sdd(user, 1, &ct),
            Err(Error::ProtocolAbort(_))
        ));
        cluster.set_unreachable(3, false);
        assert_eq!(cluster.sdd(user, 1, &ct).unwrap(), 1);
    }

    #[test]
    fn upload_then_retrieve_is_identity() {
        let (mut cluster, _) = small_cluster(2);
        let user = Cluster::primary_user();
        let values = [Integer::from(12345), Integer::from(-999), Integer::new()];
        let ids = [
            TxId::from_name("a"),
            TxId::from_name("b"),
            TxId::from_name("c"),
        ];
        cluster.upload(user, &values, &ids).unwrap();
        assert_eq!(cluster.retrieve(user, &ids).unwrap(), values);
        // Order preserving over a permuted batch.
        let permuted = [ids[2], ids[0], ids[1]];
        let got = cluster.retrieve(user, &permuted).unwrap();
        assert_eq!(got, vec![values[2].clone(), values[0].clone(), values[1].clone()]);
    }

    #[test]
    fn upload_conflict_is_rejected_and_counts_records() {
        let (mut cluster, _) = toy_cluster(3);
        let user = Cluster::primary_user();
        let ids = [TxId::from_name("x"), TxId::from_name("y")];
        cluster
            .upload(user, &[Integer::from(1), Integer::from(2)], &ids)
            .unwrap();
        assert_eq!(cluster.with_uns(|u| u.len()), 2 * 3);
        assert!(matches!(
            cluster.upload(user, &[Integer::from(3)], &[ids[0]]),
            Err(Error::Conflict(_))
        ));
    }

    #[test]
    fn no_plaintext_bytes_at_rest() {
        let (mut cluster, _) = small_cluster(3);
        let user = Cluster::primary_user();
        // Secrets at least 8 bytes long.
        let secrets = [
            Integer::from(0x1122334455667788u64),
            Integer::from(0x0102030405060708u64),
        ];
        let ids = [TxId::from_name("s1"), TxId::from_name("s2")];
        cluster.upload(user, &secrets, &ids).unwrap();
        let blob = cluster.uns_bytes();
        for secret in &secrets {
            let needle = crate::arith::to_be_bytes_padded(secret, 8);
            let found = blob.windows(needle.len()).any(|w| w == needle);
            assert!(!found, "plaintext bytes visible in the store");
        }
    }

    #[test]
    fn seal_unseal_roundtrip_and_tamper_rejection() {
        let (mut cluster, _) = small_cluster(4);
        let user = Cluster::primary_user();
        let id = TxId::from_name("share");
        let value = Integer::from(7777);
        let record = cluster.seal(2, user, id, &value).unwrap();
        assert_eq!(cluster.unseal(2, user, &record).unwrap(), value);

        // Single-bit flip in the ciphertext -> ⊥.
        let mut tampered = record.clone();
        tampered.ct = {
            let mut bytes = Vec::new();
            write_ciphertext(&mut bytes, &record.ct, cluster.pk(user).unwrap());
            let last = bytes.len() - 1;
            bytes[last] ^= 1;
            let mut pos = 0;
            pcdd::read_ciphertext(&bytes, &mut pos).unwrap()
        };
        assert!(matches!(
            cluster.unseal(2, user, &tampered),
            Err(Error::Integrity)
        ));

        // Foreign party -> access denied.
        assert!(matches!(
            cluster.unseal(3, user, &record),
            Err(Error::AccessDenied)
        ));
    }

    #[test]
    fn stale_epoch_record_is_rejected_after_key_refresh() {
        let (mut cluster, _) = small_cluster(5);
        let user = Cluster::primary_user();
        let id = TxId::from_name("old");
        let snapshot = cluster.seal(1, user, id, &Integer::from(5)).unwrap();
        cluster.refresh_key_shares(user).unwrap();
        // The migrated copy in the store unseals fine...
        let migrated = cluster.with_uns(|u| u.get(1, user, id)).unwrap();
        assert_eq!(cluster.unseal(1, user, &migrated).unwrap(), 5);
        assert_eq!(migrated.epoch, 1);
        // ...but the stale pre-refresh record is ⊥.
        assert!(matches!(
            cluster.unseal(1, user, &snapshot),
            Err(Error::Integrity)
        ));
    }

    #[test]
    fn key_refresh_preserves_sdd_and_changes_shares() {
        let (mut cluster, km) = small_cluster(6);
        let user = Cluster::primary_user();
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let before = cluster.inspect_key_shares(user);
        for round in 0..5 {
            cluster.refresh_key_shares(user).unwrap();
            let m = random_below(&mut rng, km.pk.modulus());
            let ct = enc(&km.pk, &m, &mut rng).unwrap();
            assert_eq!(cluster.sdd(user, 1, &ct).unwrap(), m, "round {round}");
        }
        let after = cluster.inspect_key_shares(user);
        assert_eq!(cluster.epoch(user).unwrap(), 5);
        assert!(before
            .iter()
            .zip(&after)
            .all(|(b, a)| b.value != a.value && a.epoch == 5));
        // Mixed-epoch share sets break the dual congruence.
        let lambda = {
            let sk = km.sk.as_ref().unwrap();
            sk.lambda().clone()
        };
        let mixed_sum: Integer =
            before[0].value.clone() + after[1].value.clone() + after[2].value.clone();
        let consistent = Integer::from(&mixed_sum % &lambda) == 0
            && mod_floor(&mixed_sum, km.pk.modulus()) == 1;
        assert!(!consistent, "mixed epochs must not satisfy the congruences");
    }

    #[test]
    fn data_refresh_preserves_values_and_changes_shares() {
        let (mut cluster, _) = small_cluster(7);
        let user = Cluster::primary_user();
        let values = [Integer::from(1000), Integer::from(-4)];
        let ids = [TxId::from_name("d1"), TxId::from_name("d2")];
        cluster.upload(user, &values, &ids).unwrap();
        let before = cluster.enclave_shares(user, &ids).unwrap();
        for _ in 0..5 {
            cluster.refresh_data_shares(user, &ids).unwrap();
        }
        let after = cluster.enclave_shares(user, &ids).unwrap();
        assert_ne!(before, after);
        assert_eq!(cluster.retrieve(user, &ids).unwrap(), values);
        // Mixing shares across data epochs misses the secret.
        let n = cluster.pk(user).unwrap().modulus().clone();
        let mixed = before[0][0].clone() + after[1][0].clone() + after[2][0].clone();
        assert_ne!(center(&mixed, &n), values[0]);
    }

    #[test]
    fn retrieve_survives_interleaved_refreshes() {
        let (mut cluster, _) = small_cluster(8);
        let user = Cluster::primary_user();
        let ids = [TxId::from_name("v")];
        cluster.upload(user, &[Integer::from(31415)], &ids).unwrap();
        for _ in 0..3 {
            cluster.refresh_key_shares(user).unwrap();
            cluster.refresh_data_shares(user, &ids).unwrap();
        }
        assert_eq!(
            cluster.retrieve(user, &ids).unwrap(),
            vec![Integer::from(31415)]
        );
    }

    #[test]
    fn second_user_is_isolated() {
        let (mut cluster, km1) = small_cluster(9);
        let user1 = Cluster::primary_user();
        let user2 = UserId::from_name("bob");
        let km2 = cluster.register_user(user2, 128, 99).unwrap();
        assert_ne!(km1.pk, km2.pk);
        assert!(matches!(
            cluster.register_user(user2, 128, 100),
            Err(Error::DuplicateUser)
        ));

        let id = TxId::from_name("shared-name");
        cluster.upload(user1, &[Integer::from(111)], &[id]).unwrap();
        cluster.upload(user2, &[Integer::from(222)], &[id]).unwrap();
        assert_eq!(cluster.retrieve(user1, &[id]).unwrap(), vec![111]);
        assert_eq!(cluster.retrieve(user2, &[id]).unwrap(), vec![222]);

        // Cross-user unseal is denied: the record belongs to user2's context.
        let record = cluster.with_uns(|u| u.get(1, user2, id)).unwrap();
        let got = cluster.unseal(1, user1, &record);
        assert!(matches!(got, Err(Error::AccessDenied)));

        // Per-user SDD stays correct after a refresh of one user only.
        cluster.refresh_key_shares(user2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let m = Integer::from(77);
        let ct = enc(&km1.pk, &m, &mut rng).unwrap();
        assert_eq!(cluster.sdd(user1, 1, &ct).unwrap(), m);
    }

    #[test]
    fn compromised_view_is_insufficient_to_recombine() {
        let (mut cluster, _) = small_cluster(10);
        let user = Cluster::primary_user();
        let secret = Integer::from(0x00DEADBEEFCAFEu64);
        let ids = [TxId::from_name("victim")];
        cluster.upload(user, &[secret.clone()], &ids).unwrap();
        cluster.compromise(2, user).unwrap();
        let _ = cluster.retrieve(user, &ids).unwrap();
        let view = cluster.view(2);
        assert!(!view.is_empty());
        // Collect every numeric value in the logged view and try all
        // recombinations of up to P values.
        let n = cluster.pk(user).unwrap().modulus().clone();
        let mut numbers = Vec::new();
        for event in view {
            match event {
                ViewEvent::Sent { msg, .. } | ViewEvent::Received { msg, .. } => match msg {
                    Msg::Num(x) => numbers.push(x.clone()),
                    Msg::Nums(xs) => numbers.extend(xs.iter().cloned()),
                    _ => {}
                },
                ViewEvent::DataSnapshot { value, .. } => numbers.push(value.clone()),
                ViewEvent::KeyShareSnapshot { value, .. } => numbers.push(value.clone()),
            }
        }
        let mut reachable = std::collections::HashSet::new();
        reachable.insert(Integer::new());
        for number in &numbers {
            let mut next = reachable.clone();
            for sum in &reachable {
                next.insert(mod_floor(&Integer::from(sum + number), &n));
            }
            reachable = next;
            if reachable.len() > 1 << 14 {
                break;
            }
        }
        let target = mod_floor(&secret, &n);
        assert!(
            !reachable.contains(&target),
            "compromised view recombines the secret"
        );
    }

    #[test]
    fn state_export_import_roundtrip() {
        let (mut cluster, _) = small_cluster(11);
        let user = Cluster::primary_user();
        let ids = [TxId::from_name("persisted")];
        cluster.upload(user, &[Integer::from(-31337)], &ids).unwrap();
        cluster.refresh_key_shares(user).unwrap();
        let state = cluster.export_state();

        // Move the sealed records over by bytes, as the CLI does via a file.
        let uns_blob = cluster.uns_bytes();
        let dir = std::env::temp_dir().join(format!("lightcom-state-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let uns_path = dir.join("uns.bin");
        std::fs::write(&uns_path, &uns_blob).unwrap();

        let mut restored = Cluster::import_state(&state, Some(uns_path.clone())).unwrap();
        assert_eq!(restored.epoch(user).unwrap(), 1);
        assert_eq!(
            restored.retrieve(user, &ids).unwrap(),
            vec![Integer::from(-31337)]
        );
        std::fs::remove_file(&uns_path).unwrap();
    }
}
