//! The untrusted store: sealed ciphertexts indexed by (user, transaction id,
//! party), optionally persisted to a single file of length-prefixed records.
//!
//! The store never sees plaintext. Access control models the enclave rule
//! that one party cannot load another party's sealed data.

use crate::pcdd::{read_ciphertext, write_ciphertext, Ciphertext, KeyId, PublicKey};
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

/// 16-byte opaque user identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub [u8; 16]);

/// 16-byte opaque transaction identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 16]);

fn name_digest(name: &str) -> [u8; 16] {
    let digest = Sha256::digest(name.as_bytes());
    let mut id = [0u8; 16];
    id.copy_from_slice(&digest[..16]);
    id
}

impl UserId {
    pub fn from_name(name: &str) -> Self {
        UserId(name_digest(name))
    }
}

impl TxId {
    pub fn from_name(name: &str) -> Self {
        TxId(name_digest(name))
    }

    /// Derive a related id, e.g. the mantissa/exponent halves of a stored
    /// floating-point number.
    pub fn suffixed(&self, suffix: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.0);
        hasher.update(suffix.as_bytes());
        let digest = hasher.finalize();
        let mut id = [0u8; 16];
        id.copy_from_slice(&digest[..16]);
        TxId(id)
    }
}

/// A sealed share: ciphertext plus an epoch-bound integrity tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedRecord {
    pub user: UserId,
    pub id: TxId,
    pub party: u8,
    pub epoch: u32,
    pub tag: [u8; 32],
    pub ct: Ciphertext,
}

impl SealedRecord {
    pub fn to_bytes(&self, pk: &PublicKey) -> Vec<u8> {
        let mut body = Vec::new();
        body.extend_from_slice(&self.user.0);
        body.extend_from_slice(&self.id.0);
        body.push(self.party);
        body.extend_from_slice(&self.epoch.to_be_bytes());
        body.extend_from_slice(&self.tag);
        write_ciphertext(&mut body, &self.ct, pk);
        let mut out = Vec::with_capacity(body.len() + 4);
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8], pos: &mut usize) -> Result<Self> {
        let err = || Error::Parse("truncated sealed record".into());
        let len_bytes: [u8; 4] = bytes
            .get(*pos..*pos + 4)
            .ok_or_else(err)?
            .try_into()
            .unwrap();
        let body_len = u32::from_be_bytes(len_bytes) as usize;
        let body = bytes.get(*pos + 4..*pos + 4 + body_len).ok_or_else(err)?;
        *pos += 4 + body_len;
        if body.len() < 16 + 16 + 1 + 4 + 32 {
            return Err(err());
        }
        let user = UserId(body[0..16].try_into().unwrap());
        let id = TxId(body[16..32].try_into().unwrap());
        let party = body[32];
        let epoch = u32::from_be_bytes(body[33..37].try_into().unwrap());
        let mut tag = [0u8; 32];
        tag.copy_from_slice(&body[37..69]);
        let mut cursor = 69usize;
        let ct = read_ciphertext(body, &mut cursor)?;
        if cursor != body.len() {
            return Err(err());
        }
        Ok(SealedRecord {
            user,
            id,
            party,
            epoch,
            tag,
            ct,
        })
    }
}

/// In-memory record map with optional file persistence.
pub struct UnsStore {
    records: BTreeMap<(UserId, TxId, u8), SealedRecord>,
    keys: HashMap<KeyId, PublicKey>,
    path: Option<PathBuf>,
}

impl UnsStore {
    pub fn in_memory() -> Self {
        UnsStore {
            records: BTreeMap::new(),
            keys: HashMap::new(),
            path: None,
        }
    }

    /// Open (or create) a file-backed store.
    pub fn open(path: PathBuf) -> Result<Self> {
        let mut store = UnsStore {
            records: BTreeMap::new(),
            keys: HashMap::new(),
            path: Some(path.clone()),
        };
        if path.exists() {
            let bytes = std::fs::read(&path)?;
            let mut pos = 0;
            while pos < bytes.len() {
                let record = SealedRecord::from_bytes(&bytes, &mut pos)?;
                store
                    .records
                    .insert((record.user, record.id, record.party), record);
            }
        }
        Ok(store)
    }

    /// Make a public key known to the store so its records serialize at the
    /// key's fixed ciphertext width.
    pub fn register_key(&mut self, pk: PublicKey) {
        self.keys.insert(pk.key_id(), pk);
    }

    fn key_for(&self, id: KeyId) -> Result<&PublicKey> {
        self.keys
            .get(&id)
            .ok_or_else(|| Error::InvalidArgument("unregistered key".into()))
    }

    /// Store a record. Only the owning party may write its slot.
    pub fn put(&mut self, as_party: u8, record: SealedRecord) -> Result<()> {
        if record.party != as_party {
            return Err(Error::AccessDenied);
        }
        self.key_for(record.ct.key_id())?;
        self.records
            .insert((record.user, record.id, record.party), record);
        self.persist()
    }

    /// Fetch a record. Only the owning party may read its slot.
    pub fn get(&self, as_party: u8, user: UserId, id: TxId) -> Result<SealedRecord> {
        let record = self
            .records
            .get(&(user, id, as_party))
            .ok_or(Error::NotFound)?;
        Ok(record.clone())
    }

    pub fn contains(&self, user: UserId, id: TxId) -> bool {
        self.records
            .range((user, id, 0)..=(user, id, u8::MAX))
            .next()
            .is_some()
    }

    /// Transaction ids stored for a user, deduplicated, in sorted order.
    pub fn ids_for_user(&self, user: UserId) -> Vec<TxId> {
        let mut ids: Vec<TxId> = self
            .records
            .keys()
            .filter(|(u, _, _)| *u == user)
            .map(|(_, id, _)| *id)
            .collect();
        ids.dedup();
        ids
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Inspection hook for tests and the CLI; not part of the party API.
    pub fn records(&self) -> impl Iterator<Item = &SealedRecord> {
        self.records.values()
    }

    /// Serialize the full store in its on-disk format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for record in self.records.values() {
            if let Ok(pk) = self.key_for(record.ct.key_id()) {
                out.extend_from_slice(&record.to_bytes(pk));
            }
        }
        out
    }

    fn persist(&self) -> Result<()> {
        if let Some(path) = &self.path {
            std::fs::write(path, self.to_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcdd::{enc, keygen_insecure_toy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rug::Integer;

    fn record(pk: &PublicKey, party: u8, value: u32) -> SealedRecord {
        let mut rng = ChaCha20Rng::seed_from_u64(value as u64);
        SealedRecord {
            user: UserId::from_name("alice"),
            id: TxId::from_name("x"),
            party,
            epoch: 3,
            tag: [7u8; 32],
            ct: enc(pk, &Integer::from(value), &mut rng).unwrap(),
        }
    }

    #[test]
    fn record_roundtrip() {
        let (pk, _) = keygen_insecure_toy();
        let rec = record(&pk, 2, 9);
        let bytes = rec.to_bytes(&pk);
        let mut pos = 0;
        assert_eq!(SealedRecord::from_bytes(&bytes, &mut pos).unwrap(), rec);
        assert_eq!(pos, bytes.len());
    }

    #[test]
    fn foreign_party_access_is_denied() {
        let (pk, _) = keygen_insecure_toy();
        let mut store = UnsStore::in_memory();
        store.register_key(pk.clone());
        let rec = record(&pk, 2, 5);
        assert!(matches!(
            store.put(1, rec.clone()),
            Err(Error::AccessDenied)
        ));
        store.put(2, rec.clone()).unwrap();
        assert!(store.get(1, rec.user, rec.id).is_err());
        assert_eq!(store.get(2, rec.user, rec.id).unwrap(), rec);
    }

    #[test]
    fn file_persistence_roundtrips() {
        let (pk, _) = keygen_insecure_toy();
        let dir = std::env::temp_dir().join(format!("lightcom-uns-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("store.bin");
        let _ = std::fs::remove_file(&path);
        {
            let mut store = UnsStore::open(path.clone()).unwrap();
            store.register_key(pk.clone());
            store.put(1, record(&pk, 1, 11)).unwrap();
            store.put(2, record(&pk, 2, 12)).unwrap();
        }
        let store = UnsStore::open(path.clone()).unwrap();
        assert_eq!(store.len(), 2);
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn suffixed_ids_are_distinct_and_stable() {
        let id = TxId::from_name("measurement");
        assert_eq!(id.suffixed("m"), id.suffixed("m"));
        assert_ne!(id.suffixed("m"), id.suffixed("e"));
        assert_ne!(id.suffixed("m"), id);
    }
}
