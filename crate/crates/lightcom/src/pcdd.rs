//! Paillier cryptosystem with distributed decryption (PCDD).
//!
//! The private key `λ = lcm(p-1, q-1)` can be split additively into `P`
//! shares satisfying `Σ λ*_i ≡ 0 (mod λ)` and `Σ λ*_i ≡ 1 (mod N)`, so that
//! the product of all partial decryptions `c^{λ*_i}` recovers the plaintext
//! without reassembling λ anywhere.
//!
//! The encryption base is fixed to `g = N + 1`, which makes `g^m mod N²`
//! a single multiplication (`1 + mN`) and keeps the share-recombination
//! identity `c^σ ≡ 1 + mN (mod N²)` exact.

use crate::arith::{
    from_be_bytes, mod_floor, pow_mod_signed, random_below, read_signed, to_be_bytes_padded,
    write_signed,
};
use crate::{Error, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rug::Integer;
use sha2::{Digest, Sha256};

/// Opaque identifier of a public key (16 bytes of the key hash).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyId(pub [u8; 16]);

impl KeyId {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

/// PCDD public key `(N, g)` with `g = N + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: Integer,
    g: Integer,
    n_squared: Integer,
    key_id: KeyId,
}

/// PCDD private key: `λ = lcm(p-1, q-1)` and the precomputed `μ = λ⁻¹ mod N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    lambda: Integer,
    mu: Integer,
}

/// One party's additive share of the split private key.
///
/// Values are signed: proactive refresh adds exact integer zero-sum deltas,
/// chosen by parties that do not know λ and therefore have no modulus to
/// reduce by. Exponentiation with a negative share inverts the base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyShare {
    pub index: u8,
    pub value: Integer,
    pub epoch: u32,
}

/// A PCDD ciphertext: an element of `Z_{N²}` tagged with its key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub(crate) c: Integer,
    pub(crate) key_id: KeyId,
}

/// One party's contribution `c^{λ*_i} mod N²` to a threshold decryption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialDecryption {
    pub index: u8,
    pub ct: Integer,
}

/// Key material as held by the request user: the public key, optionally the
/// private key, and optionally the key shares produced by [`split_key`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub pk: PublicKey,
    pub sk: Option<PrivateKey>,
    pub shares: Vec<KeyShare>,
}

impl PublicKey {
    pub fn modulus(&self) -> &Integer {
        &self.n
    }

    pub fn generator(&self) -> &Integer {
        &self.g
    }

    pub fn modulus_squared(&self) -> &Integer {
        &self.n_squared
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn modulus_bits(&self) -> u32 {
        self.n.significant_bits()
    }

    /// Fixed wire width of a ciphertext residue under this key, in bytes.
    pub fn ciphertext_width(&self) -> usize {
        (self.n_squared.significant_bits() as usize + 7) / 8
    }

    fn from_modulus(n: Integer) -> Self {
        let g = Integer::from(&n + 1u8);
        let n_squared = Integer::from(&n * &n);
        let mut hasher = Sha256::new();
        hasher.update(n.to_string_radix(16).as_bytes());
        hasher.update(g.to_string_radix(16).as_bytes());
        let digest = hasher.finalize();
        let mut id = [0u8; 16];
        id.copy_from_slice(&digest[..16]);
        PublicKey {
            n,
            g,
            n_squared,
            key_id: KeyId(id),
        }
    }
}

impl Ciphertext {
    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn residue(&self) -> &Integer {
        &self.c
    }
}

const MR_ROUNDS: u32 = 64;
const SIEVE_PRIMES: usize = 2048;

fn small_primes() -> Vec<u32> {
    let mut primes = Vec::with_capacity(SIEVE_PRIMES);
    let mut candidate = 3u32;
    while primes.len() < SIEVE_PRIMES {
        if primes.iter().take_while(|p| *p * *p <= candidate).all(|p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 2;
    }
    primes
}

/// Incremental safe-prime search: returns `p = 2q + 1` with both `p` and `q`
/// prime and `p` exactly `bits` long.
fn safe_prime<R: RngCore>(rng: &mut R, bits: u32, primes: &[u32]) -> Result<Integer> {
    assert!(bits >= 4);
    for _ in 0..64 {
        // q gets bits-1 bits with the top two set so p = 2q+1 has full width.
        let mut q = random_below(rng, &(Integer::from(1) << (bits - 1)));
        q |= Integer::from(3) << (bits - 3);
        q |= 1u8;
        // Search window before resampling; wide enough that a hit is near certain.
        for _ in 0..(4096 * bits as usize) {
            let mut divisible = false;
            for &sp in primes {
                let r = q.mod_u(sp);
                // r == 0 kills q; 2r+1 == sp kills p.
                if r == 0 || 2 * r + 1 == sp {
                    divisible = true;
                    break;
                }
            }
            if !divisible && q.is_probably_prime(MR_ROUNDS) != rug::integer::IsPrime::No {
                let p = Integer::from(&q * 2u8) + 1u8;
                if p.is_probably_prime(MR_ROUNDS) != rug::integer::IsPrime::No {
                    return Ok(p);
                }
            }
            q += 2u8;
        }
    }
    Err(Error::PrimeSearchExhausted)
}

/// Generate a PCDD key pair with an `bits`-long modulus built from two safe
/// primes. Deterministic for a fixed seed.
pub fn keygen(bits: u32, seed: u64) -> Result<(PublicKey, PrivateKey)> {
    if bits < 64 || bits % 2 != 0 {
        return Err(Error::InvalidArgument(
            "modulus size must be even and at least 64 bits".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let primes = small_primes();
    let p = safe_prime(&mut rng, bits / 2, &primes)?;
    let q = loop {
        let q = safe_prime(&mut rng, bits / 2, &primes)?;
        if q != p {
            break q;
        }
    };
    Ok(keypair_from_primes(p, q))
}

/// Fixed tiny key (p = 5, q = 7, N = 35) for tests and demos. The name says
/// it all: this provides no security whatsoever.
pub fn keygen_insecure_toy() -> (PublicKey, PrivateKey) {
    keypair_from_primes(Integer::from(5), Integer::from(7))
}

fn keypair_from_primes(p: Integer, q: Integer) -> (PublicKey, PrivateKey) {
    let n = Integer::from(&p * &q);
    let p1 = Integer::from(&p - 1u8);
    let q1 = Integer::from(&q - 1u8);
    let lambda = p1.lcm(&q1);
    let mu = Integer::from(lambda.invert_ref(&n).expect("gcd(lambda, N) = 1"));
    (PublicKey::from_modulus(n), PrivateKey { lambda, mu })
}

/// Split the private key into `parties` additive shares over `[0, λN)` whose
/// sum is `σ = λ·(λ⁻¹ mod N)`, satisfying both `σ ≡ 0 (mod λ)` and
/// `σ ≡ 1 (mod N)`.
pub fn split_key<R: RngCore>(
    sk: &PrivateKey,
    pk: &PublicKey,
    parties: usize,
    rng: &mut R,
) -> Result<Vec<KeyShare>> {
    if parties < 2 {
        return Err(Error::InvalidArgument(
            "key splitting needs at least two parties".into(),
        ));
    }
    let sigma = Integer::from(&sk.lambda * &sk.mu);
    let modulus = Integer::from(&sk.lambda * pk.modulus());
    let mut shares = Vec::with_capacity(parties);
    let mut sum = Integer::new();
    for index in 1..parties {
        let value = random_below(rng, &modulus);
        sum += &value;
        shares.push(KeyShare {
            index: index as u8,
            value,
            epoch: 0,
        });
    }
    let last = mod_floor(&Integer::from(&sigma - &sum), &modulus);
    shares.push(KeyShare {
        index: parties as u8,
        value: last,
        epoch: 0,
    });
    Ok(shares)
}

/// Encrypt `m ∈ Z_N` with fresh randomness.
pub fn enc<R: RngCore>(pk: &PublicKey, m: &Integer, rng: &mut R) -> Result<Ciphertext> {
    let r = loop {
        let r = random_below(rng, pk.modulus_squared());
        if r != 0 && Integer::from(r.gcd_ref(pk.modulus())) == 1 {
            break r;
        }
    };
    enc_with_randomness(pk, m, &r)
}

/// Encrypt with caller-chosen randomness `r ∈ Z*_{N²}`.
pub fn enc_with_randomness(pk: &PublicKey, m: &Integer, r: &Integer) -> Result<Ciphertext> {
    if *m < 0 || m >= pk.modulus() {
        return Err(Error::PlaintextRange);
    }
    // g = N+1, so g^m = 1 + mN (mod N²).
    let g_m = (Integer::from(m * pk.modulus()) + 1u8) % pk.modulus_squared();
    let r_n = Integer::from(r)
        .pow_mod(pk.modulus(), pk.modulus_squared())
        .expect("positive exponent");
    let c = g_m * r_n % pk.modulus_squared();
    Ok(Ciphertext {
        c,
        key_id: pk.key_id(),
    })
}

/// `L(x) = (x - 1)/N`, defined only when the division is exact.
fn l_function(x: &Integer, n: &Integer) -> Result<Integer> {
    let num = Integer::from(x - 1u8);
    let (quot, rem) = num.div_rem(n.clone());
    if rem != 0 {
        return Err(Error::MalformedCiphertext);
    }
    Ok(quot)
}

/// Direct decryption: `m = L(c^λ mod N²)·μ mod N`.
pub fn dec(sk: &PrivateKey, pk: &PublicKey, ct: &Ciphertext) -> Result<Integer> {
    if ct.key_id != pk.key_id() {
        return Err(Error::KeyMismatch);
    }
    let x = Integer::from(&ct.c)
        .pow_mod(&sk.lambda, pk.modulus_squared())
        .expect("positive exponent");
    let l = l_function(&x, pk.modulus())?;
    Ok(l * &sk.mu % pk.modulus())
}

/// Partial decryption `c^{λ*_i} mod N²` under one key share.
pub fn pdec(ks: &KeyShare, pk: &PublicKey, ct: &Ciphertext) -> Result<PartialDecryption> {
    if ct.key_id != pk.key_id() {
        return Err(Error::KeyMismatch);
    }
    let part = pow_mod_signed(&ct.c, &ks.value, pk.modulus_squared());
    Ok(PartialDecryption {
        index: ks.index,
        ct: part,
    })
}

/// Combine partial decryptions from all `parties` parties:
/// `m = L(Π ct_i mod N²)`.
pub fn tdec(parts: &[PartialDecryption], pk: &PublicKey, parties: usize) -> Result<Integer> {
    if parts.len() != parties {
        return Err(Error::IncompleteShares);
    }
    let mut seen = vec![false; parties];
    let mut product = Integer::from(1);
    for part in parts {
        let idx = part.index as usize;
        if idx == 0 || idx > parties || seen[idx - 1] {
            return Err(Error::IncompleteShares);
        }
        seen[idx - 1] = true;
        product = product * &part.ct % pk.modulus_squared();
    }
    l_function(&product, pk.modulus())
}

/// Homomorphic addition: multiply ciphertexts.
pub fn hom_add(pk: &PublicKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    if a.key_id != b.key_id || a.key_id != pk.key_id() {
        return Err(Error::KeyMismatch);
    }
    Ok(Ciphertext {
        c: Integer::from(&a.c * &b.c) % pk.modulus_squared(),
        key_id: a.key_id,
    })
}

/// Scalar homomorphism: `hom_scale(c, k)` decrypts to `k·m mod N`.
pub fn hom_scale(pk: &PublicKey, ct: &Ciphertext, k: &Integer) -> Result<Ciphertext> {
    if ct.key_id != pk.key_id() {
        return Err(Error::KeyMismatch);
    }
    if *k < 0 || k >= pk.modulus() {
        return Err(Error::InvalidArgument("scalar out of Z_N".into()));
    }
    Ok(Ciphertext {
        c: Integer::from(&ct.c)
            .pow_mod(k, pk.modulus_squared())
            .expect("positive exponent"),
        key_id: ct.key_id,
    })
}

/// Negation of the plaintext via the group inverse of the ciphertext.
/// Decrypts identically to `hom_scale(c, N-1)` at a fraction of the cost.
pub fn hom_neg(pk: &PublicKey, ct: &Ciphertext) -> Result<Ciphertext> {
    if ct.key_id != pk.key_id() {
        return Err(Error::KeyMismatch);
    }
    let inv = Integer::from(
        ct.c.invert_ref(pk.modulus_squared())
            .ok_or(Error::MalformedCiphertext)?,
    );
    Ok(Ciphertext {
        c: inv,
        key_id: ct.key_id,
    })
}

/// `hom_add(a, hom_neg(b))`.
pub fn hom_sub(pk: &PublicKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    let neg = hom_neg(pk, b)?;
    hom_add(pk, a, &neg)
}

/// Scale by a signed constant, using a short exponent plus inversion when
/// `|k|` is small. Plaintext result equals `hom_scale(c, k mod N)`.
pub(crate) fn hom_scale_signed(pk: &PublicKey, ct: &Ciphertext, k: &Integer) -> Result<Ciphertext> {
    if *k >= 0 && k < pk.modulus() {
        if k.significant_bits() < pk.modulus_bits() / 2 {
            return Ok(Ciphertext {
                c: Integer::from(&ct.c)
                    .pow_mod(k, pk.modulus_squared())
                    .expect("positive exponent"),
                key_id: ct.key_id,
            });
        }
        return hom_scale(pk, ct, k);
    }
    if *k < 0 {
        let neg = hom_neg(pk, ct)?;
        let mag = Integer::from(k.abs_ref());
        return hom_scale_signed(pk, &neg, &mag);
    }
    hom_scale(pk, ct, &mod_floor(k, pk.modulus()))
}

/// Re-randomize a ciphertext by multiplying in a fresh encryption of zero.
pub fn rerandomize<R: RngCore>(pk: &PublicKey, ct: &Ciphertext, rng: &mut R) -> Result<Ciphertext> {
    let zero = enc(pk, &Integer::new(), rng)?;
    hom_add(pk, ct, &zero)
}

/// Encryption of zero with fresh randomness (`[[0]]`), handy in protocols.
pub fn enc_zero<R: RngCore>(pk: &PublicKey, rng: &mut R) -> Result<Ciphertext> {
    enc(pk, &Integer::new(), rng)
}

/// Encryption of one with fresh randomness (`[[1]]`).
pub fn enc_one<R: RngCore>(pk: &PublicKey, rng: &mut R) -> Result<Ciphertext> {
    enc(pk, &Integer::from(1), rng)
}

// --- serialization ------------------------------------------------------

/// `key_id (16B) || 4-byte BE byte count || big-endian residue`, residue
/// padded to the key's fixed ciphertext width.
pub fn write_ciphertext(out: &mut Vec<u8>, ct: &Ciphertext, pk: &PublicKey) {
    out.extend_from_slice(ct.key_id.as_bytes());
    let width = pk.ciphertext_width();
    out.extend_from_slice(&(width as u32).to_be_bytes());
    out.extend_from_slice(&to_be_bytes_padded(&ct.c, width));
}

pub fn read_ciphertext(bytes: &[u8], pos: &mut usize) -> Result<Ciphertext> {
    let err = || Error::Parse("truncated ciphertext".into());
    let id: [u8; 16] = bytes
        .get(*pos..*pos + 16)
        .ok_or_else(err)?
        .try_into()
        .unwrap();
    let len_bytes: [u8; 4] = bytes
        .get(*pos + 16..*pos + 20)
        .ok_or_else(err)?
        .try_into()
        .unwrap();
    let len = u32::from_be_bytes(len_bytes) as usize;
    let mag = bytes.get(*pos + 20..*pos + 20 + len).ok_or_else(err)?;
    *pos += 20 + len;
    Ok(Ciphertext {
        c: from_be_bytes(mag),
        key_id: KeyId(id),
    })
}

const KEY_FORMAT_VERSION: u8 = 1;

impl KeyMaterial {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![KEY_FORMAT_VERSION];
        let mut flags = 0u8;
        if self.sk.is_some() {
            flags |= 1;
        }
        if !self.shares.is_empty() {
            flags |= 2;
        }
        out.push(flags);
        write_signed(&mut out, self.pk.modulus());
        write_signed(&mut out, self.pk.generator());
        if let Some(sk) = &self.sk {
            write_signed(&mut out, &sk.lambda);
            write_signed(&mut out, &sk.mu);
        }
        if !self.shares.is_empty() {
            out.push(self.shares.len() as u8);
            for share in &self.shares {
                out.push(share.index);
                out.extend_from_slice(&share.epoch.to_be_bytes());
                write_signed(&mut out, &share.value);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |what: &str| Error::Parse(format!("key material: {what}"));
        if bytes.first() != Some(&KEY_FORMAT_VERSION) {
            return Err(err("unsupported version"));
        }
        let flags = *bytes.get(1).ok_or_else(|| err("missing flags"))?;
        let mut pos = 2;
        let n = read_signed(bytes, &mut pos).ok_or_else(|| err("bad modulus"))?;
        let g = read_signed(bytes, &mut pos).ok_or_else(|| err("bad generator"))?;
        let pk = PublicKey::from_modulus(n);
        if g != *pk.generator() {
            return Err(err("generator is not N+1"));
        }
        let sk = if flags & 1 != 0 {
            let lambda = read_signed(bytes, &mut pos).ok_or_else(|| err("bad lambda"))?;
            let mu = read_signed(bytes, &mut pos).ok_or_else(|| err("bad mu"))?;
            Some(PrivateKey { lambda, mu })
        } else {
            None
        };
        let mut shares = Vec::new();
        if flags & 2 != 0 {
            let count = *bytes.get(pos).ok_or_else(|| err("missing share count"))? as usize;
            pos += 1;
            for _ in 0..count {
                let index = *bytes.get(pos).ok_or_else(|| err("missing share index"))?;
                let epoch_bytes: [u8; 4] = bytes
                    .get(pos + 1..pos + 5)
                    .ok_or_else(|| err("missing epoch"))?
                    .try_into()
                    .unwrap();
                pos += 5;
                let value = read_signed(bytes, &mut pos).ok_or_else(|| err("bad share"))?;
                shares.push(KeyShare {
                    index,
                    value,
                    epoch: u32::from_be_bytes(epoch_bytes),
                });
            }
        }
        Ok(KeyMaterial { pk, sk, shares })
    }
}

impl PrivateKey {
    pub fn lambda(&self) -> &Integer {
        &self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> (PublicKey, PrivateKey) {
        keygen_insecure_toy()
    }

    #[test]
    fn toy_key_parameters() {
        // Hand-checked: N = 35, lambda = lcm(4, 6) = 12, 12·3 = 36 ≡ 1 (mod 35).
        let (pk, sk) = toy();
        assert_eq!(*pk.modulus(), 35);
        assert_eq!(*pk.generator(), 36);
        assert_eq!(sk.lambda, 12);
        assert_eq!(sk.mu, 3);
    }

    #[test]
    fn enc_with_forced_randomness_matches_modular_oracle() {
        // 36^2 · 2^35 mod 1225 = 53, decrypts back to 2.
        let (pk, sk) = toy();
        let ct = enc_with_randomness(&pk, &Integer::from(2), &Integer::from(2)).unwrap();
        assert_eq!(*ct.residue(), 53);
        assert_eq!(dec(&sk, &pk, &ct).unwrap(), 2);
    }

    #[test]
    fn roundtrip_all_toy_plaintexts() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for m in 0..35u32 {
            let ct = enc(&pk, &Integer::from(m), &mut rng).unwrap();
            assert_eq!(dec(&sk, &pk, &ct).unwrap(), m);
        }
    }

    #[test]
    fn zero_roundtrips() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let ct = enc(&pk, &Integer::new(), &mut rng).unwrap();
        assert_eq!(dec(&sk, &pk, &ct).unwrap(), 0);
    }

    #[test]
    fn plaintext_range_is_enforced() {
        let (pk, _) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        assert!(matches!(
            enc(&pk, &Integer::from(35), &mut rng),
            Err(Error::PlaintextRange)
        ));
        assert!(matches!(
            enc(&pk, &Integer::from(-1), &mut rng),
            Err(Error::PlaintextRange)
        ));
    }

    #[test]
    fn keygen_is_deterministic_and_seed_sensitive() {
        let (pk1, sk1) = keygen(512, 1).unwrap();
        let (pk2, sk2) = keygen(512, 1).unwrap();
        let (pk3, _) = keygen(512, 2).unwrap();
        assert_eq!(pk1, pk2);
        assert_eq!(sk1, sk2);
        assert_ne!(pk1.modulus(), pk3.modulus());
        assert_eq!(pk1.modulus_bits(), 512);
    }

    #[test]
    fn keygen_rejects_bad_sizes() {
        assert!(keygen(62, 1).is_err());
        assert!(keygen(129, 1).is_err());
    }

    #[test]
    fn split_key_congruences_hold() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for parties in [2usize, 3, 5] {
            let shares = split_key(&sk, &pk, parties, &mut rng).unwrap();
            let sum: Integer = shares.iter().map(|s| s.value.clone()).sum();
            assert_eq!(Integer::from(&sum % &sk.lambda), 0, "P = {parties}");
            assert_eq!(Integer::from(&sum % pk.modulus()), 1, "P = {parties}");
        }
        assert!(split_key(&sk, &pk, 1, &mut rng).is_err());
    }

    #[test]
    fn threshold_decryption_equals_direct() {
        let (pk, sk) = keygen(128, 7).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let shares = split_key(&sk, &pk, 3, &mut rng).unwrap();
        for _ in 0..100 {
            let m = random_below(&mut rng, pk.modulus());
            let ct = enc(&pk, &m, &mut rng).unwrap();
            let parts: Vec<_> = shares.iter().map(|s| pdec(s, &pk, &ct).unwrap()).collect();
            assert_eq!(tdec(&parts, &pk, 3).unwrap(), dec(&sk, &pk, &ct).unwrap());
            assert_eq!(tdec(&parts, &pk, 3).unwrap(), m);
        }
    }

    #[test]
    fn boundary_plaintext_decrypts() {
        let (pk, sk) = keygen(128, 9).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let shares = split_key(&sk, &pk, 4, &mut rng).unwrap();
        let m = Integer::from(pk.modulus() - 1u8);
        let ct = enc(&pk, &m, &mut rng).unwrap();
        let parts: Vec<_> = shares.iter().map(|s| pdec(s, &pk, &ct).unwrap()).collect();
        assert_eq!(tdec(&parts, &pk, 4).unwrap(), m);
    }

    #[test]
    fn tdec_rejects_incomplete_or_duplicated_parts() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let shares = split_key(&sk, &pk, 3, &mut rng).unwrap();
        let ct = enc(&pk, &Integer::from(4), &mut rng).unwrap();
        let parts: Vec<_> = shares.iter().map(|s| pdec(s, &pk, &ct).unwrap()).collect();
        assert!(matches!(
            tdec(&parts[..2], &pk, 3),
            Err(Error::IncompleteShares)
        ));
        let dup = vec![parts[0].clone(), parts[0].clone(), parts[2].clone()];
        assert!(matches!(tdec(&dup, &pk, 3), Err(Error::IncompleteShares)));
    }

    #[test]
    fn pdec_partial_products_recombine() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let shares = split_key(&sk, &pk, 3, &mut rng).unwrap();
        let ct = enc(&pk, &Integer::from(9), &mut rng).unwrap();
        let sigma: Integer = shares.iter().map(|s| s.value.clone()).sum();
        let product = shares
            .iter()
            .map(|s| pdec(s, &pk, &ct).unwrap().ct)
            .fold(Integer::from(1), |acc, x| acc * x % pk.modulus_squared());
        let direct = pow_mod_signed(ct.residue(), &sigma, pk.modulus_squared());
        assert_eq!(product, direct);
        // c^sigma ≡ 1 (mod N) for honest ciphertexts.
        assert_eq!(Integer::from(&product % pk.modulus()), 1);
    }

    #[test]
    fn pdec_with_zero_share_is_identity_element() {
        let (pk, _) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let ct = enc(&pk, &Integer::from(3), &mut rng).unwrap();
        let ks = KeyShare {
            index: 1,
            value: Integer::new(),
            epoch: 0,
        };
        assert_eq!(pdec(&ks, &pk, &ct).unwrap().ct, 1);
    }

    #[test]
    fn pdec_handles_negative_share_values() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let mut shares = split_key(&sk, &pk, 3, &mut rng).unwrap();
        // Shift share 1 by -500 and share 2 by +500: sum unchanged.
        shares[0].value -= 500;
        shares[1].value += 500;
        let ct = enc(&pk, &Integer::from(21), &mut rng).unwrap();
        let parts: Vec<_> = shares.iter().map(|s| pdec(s, &pk, &ct).unwrap()).collect();
        assert_eq!(tdec(&parts, &pk, 3).unwrap(), 21);
    }

    #[test]
    fn hom_add_oracle_and_wraparound() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let enc_of = |m: u32, rng: &mut ChaCha20Rng| enc(&pk, &Integer::from(m), rng).unwrap();

        let id = hom_add(&pk, &enc_of(5, &mut rng), &enc_of(0, &mut rng)).unwrap();
        assert_eq!(dec(&sk, &pk, &id).unwrap(), 5);

        let sum = hom_add(&pk, &enc_of(3, &mut rng), &enc_of(4, &mut rng)).unwrap();
        assert_eq!(dec(&sk, &pk, &sum).unwrap(), 7);

        let wrap = hom_add(&pk, &enc_of(34, &mut rng), &enc_of(2, &mut rng)).unwrap();
        assert_eq!(dec(&sk, &pk, &wrap).unwrap(), 1);
    }

    #[test]
    fn hom_add_rejects_key_mismatch() {
        let (pk1, _) = toy();
        let (pk2, _) = keygen(128, 16).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let a = enc(&pk1, &Integer::from(1), &mut rng).unwrap();
        let b = enc(&pk2, &Integer::from(1), &mut rng).unwrap();
        assert!(matches!(hom_add(&pk1, &a, &b), Err(Error::KeyMismatch)));
    }

    #[test]
    fn hom_scale_identity_negation_and_polynomial() {
        let (pk, sk) = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(18);
        let ct5 = enc(&pk, &Integer::from(5), &mut rng).unwrap();

        let same = hom_scale(&pk, &ct5, &Integer::from(1)).unwrap();
        assert_eq!(dec(&sk, &pk, &same).unwrap(), 5);

        let negated = hom_scale(&pk, &ct5, &Integer::from(34)).unwrap();
        assert_eq!(dec(&sk, &pk, &negated).unwrap(), 30); // N - 5
        assert_eq!(
            dec(&sk, &pk, &hom_neg(&pk, &ct5).unwrap()).unwrap(),
            30
        );

        // Polynomial form: 2·3 + 4·6 + 1·30 = 60 ≡ 25 (mod 35).
        let xs = [3u32, 6, 30];
        let coeffs = [2u32, 4, 1];
        let mut acc: Option<Ciphertext> = None;
        for (x, a) in xs.iter().zip(coeffs.iter()) {
            let term = hom_scale(
                &pk,
                &enc(&pk, &Integer::from(*x), &mut rng).unwrap(),
                &Integer::from(*a),
            )
            .unwrap();
            acc = Some(match acc {
                None => term,
                Some(prev) => hom_add(&pk, &prev, &term).unwrap(),
            });
        }
        assert_eq!(dec(&sk, &pk, &acc.unwrap()).unwrap(), 25);
    }

    #[test]
    fn rerandomize_preserves_plaintext_and_changes_bytes() {
        let (pk, sk) = keygen(128, 19).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(20);
        let ct = enc(&pk, &Integer::from(42), &mut rng).unwrap();
        for _ in 0..100 {
            let fresh = rerandomize(&pk, &ct, &mut rng).unwrap();
            assert_ne!(fresh.residue(), ct.residue());
            assert_eq!(dec(&sk, &pk, &fresh).unwrap(), 42);
        }
        let twice = rerandomize(&pk, &rerandomize(&pk, &ct, &mut rng).unwrap(), &mut rng).unwrap();
        assert_eq!(dec(&sk, &pk, &twice).unwrap(), 42);
    }

    #[test]
    fn tampered_ciphertext_is_rejected_or_decrypts_wrong() {
        let (pk, sk) = keygen(128, 21).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        for m in [0u32, 1, 77, 1000] {
            let mut ct = enc(&pk, &Integer::from(m), &mut rng).unwrap();
            ct.c += 1u8;
            match dec(&sk, &pk, &ct) {
                Err(Error::MalformedCiphertext) => {}
                Ok(got) => assert_ne!(got, m, "tamper must not be silent"),
                Err(other) => panic!("unexpected error: {other}"),
            }
        }
    }

    #[test]
    fn ciphertext_serialization_roundtrips_at_fixed_width() {
        let (pk, _) = keygen(128, 23).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let mut lens = std::collections::HashSet::new();
        for m in [0u32, 1, 500_000] {
            let ct = enc(&pk, &Integer::from(m), &mut rng).unwrap();
            let mut buf = Vec::new();
            write_ciphertext(&mut buf, &ct, &pk);
            lens.insert(buf.len());
            let mut pos = 0;
            let back = read_ciphertext(&buf, &mut pos).unwrap();
            assert_eq!(back, ct);
            assert_eq!(pos, buf.len());
        }
        assert_eq!(lens.len(), 1, "wire width must not depend on the residue");
    }

    #[test]
    fn key_material_roundtrips() {
        let (pk, sk) = keygen(128, 25).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(26);
        let shares = split_key(&sk, &pk, 3, &mut rng).unwrap();
        for material in [
            KeyMaterial {
                pk: pk.clone(),
                sk: Some(sk.clone()),
                shares: shares.clone(),
            },
            KeyMaterial {
                pk: pk.clone(),
                sk: None,
                shares: Vec::new(),
            },
        ] {
            let bytes = material.to_bytes();
            assert_eq!(KeyMaterial::from_bytes(&bytes).unwrap(), material);
        }
    }
}
