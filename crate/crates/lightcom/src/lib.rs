//! LightCom: secure outsourced computation among simulated enclave parties.
//!
//! The crate implements a threshold Paillier cryptosystem with distributed
//! decryption (PCDD), additive and XOR secret sharing with proactive refresh,
//! and a suite of multi-party protocols for integer and floating-point
//! computation. `P` logical parties hold additive shares of user data, talk
//! over in-memory FIFO channels, and persist only sealed ciphertexts to an
//! untrusted store.
//!
//! The layering is strict: [`pcdd`] and [`shares`] are pure cryptography,
//! [`runtime`] simulates the parties, channels and storage, and
//! [`bitops`] / [`intops`] / [`fpops`] build the protocol toolkit on top.
//!
//! A quick tour lives in the `book/` directory of the repository; its code
//! snippets are compiled as doc-tests through the [`guide`] module.

pub mod arith;
pub mod bitops;
pub mod fpops;
pub mod guide;
pub mod intops;
pub mod pcdd;
pub mod pool;
pub mod runtime;
pub mod shares;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("plaintext out of range")]
    PlaintextRange,
    #[error("malformed ciphertext")]
    MalformedCiphertext,
    #[error("ciphertexts belong to different keys")]
    KeyMismatch,
    #[error("prime search exhausted its retry budget")]
    PrimeSearchExhausted,
    #[error("incomplete share set")]
    IncompleteShares,
    #[error("share group mismatch")]
    GroupMismatch,
    #[error("transaction id already in use: {0}")]
    Conflict(String),
    #[error("duplicate user")]
    DuplicateUser,
    #[error("unknown user")]
    UnknownUser,
    #[error("sealed record integrity check failed")]
    Integrity,
    #[error("access denied: record belongs to another party or user")]
    AccessDenied,
    #[error("protocol aborted: {0}")]
    ProtocolAbort(String),
    #[error("randomness object already consumed")]
    ConsumedRandomness,
    #[error("randomness pool exhausted")]
    PoolExhausted,
    #[error("unknown protocol: {0}")]
    UnknownProtocol(String),
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error("range guard violated: {0}")]
    RangeGuard(String),
    #[error("record not found")]
    NotFound,
    #[error("text decoding failed: {0} is not a Unicode scalar value")]
    DecodeText(u64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use pcdd::{Ciphertext, KeyShare, PrivateKey, PublicKey};
pub use runtime::{Cluster, ClusterConfig, SchedulerMode};
pub use shares::{BitShare, IntShare};
