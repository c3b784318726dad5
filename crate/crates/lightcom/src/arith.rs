//! Multi-precision helpers shared by the cryptosystem and the protocols.

use rand::RngCore;
use rug::integer::Order;
use rug::Integer;

/// Uniform integer in `[0, bound)`. `bound` must be positive.
pub fn random_below<R: RngCore + ?Sized>(rng: &mut R, bound: &Integer) -> Integer {
    assert!(*bound > 0, "random_below needs a positive bound");
    let bits = bound.significant_bits() as usize;
    let bytes = (bits + 7) / 8;
    let mask_bits = bytes * 8 - bits;
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> mask_bits;
        let candidate = Integer::from_digits(&buf, Order::MsfBe);
        if candidate < *bound {
            return candidate;
        }
    }
}

/// Uniform integer in `[lo, hi]` (inclusive).
pub fn random_range<R: RngCore + ?Sized>(rng: &mut R, lo: &Integer, hi: &Integer) -> Integer {
    let span = Integer::from(hi - lo) + 1u8;
    random_below(rng, &span) + lo
}

/// `base^exp mod modulus` where `exp` may be negative; a negative exponent
/// uses the modular inverse of the base.
pub fn pow_mod_signed(base: &Integer, exp: &Integer, modulus: &Integer) -> Integer {
    if *exp < 0 {
        let inv = Integer::from(base.invert_ref(modulus).expect("base not invertible"));
        let e = Integer::from(-exp);
        inv.pow_mod(&e, modulus).expect("nonnegative exponent")
    } else {
        Integer::from(base).pow_mod(exp, modulus).expect("nonnegative exponent")
    }
}

/// Nonnegative residue of `x` modulo `m`.
pub fn mod_floor(x: &Integer, m: &Integer) -> Integer {
    let mut r = Integer::from(x % m);
    if r < 0 {
        r += m;
    }
    r
}

/// Big-endian minimal encoding of a nonnegative integer, with `width` bytes.
/// Values shorter than `width` are left-padded with zeros.
pub fn to_be_bytes_padded(x: &Integer, width: usize) -> Vec<u8> {
    assert!(*x >= 0);
    let digits = x.to_digits::<u8>(Order::MsfBe);
    assert!(digits.len() <= width, "integer wider than target width");
    let mut out = vec![0u8; width - digits.len()];
    out.extend_from_slice(&digits);
    out
}

/// Inverse of [`to_be_bytes_padded`].
pub fn from_be_bytes(bytes: &[u8]) -> Integer {
    Integer::from_digits(bytes, Order::MsfBe)
}

/// Serialize a signed integer as `sign byte || 4-byte BE length || magnitude`.
pub fn write_signed(out: &mut Vec<u8>, x: &Integer) {
    out.push(if *x < 0 { 1 } else { 0 });
    let mag = Integer::from(x.abs_ref());
    let digits = mag.to_digits::<u8>(Order::MsfBe);
    out.extend_from_slice(&(digits.len() as u32).to_be_bytes());
    out.extend_from_slice(&digits);
}

/// Inverse of [`write_signed`]; advances `pos`.
pub fn read_signed(bytes: &[u8], pos: &mut usize) -> Option<Integer> {
    let sign = *bytes.get(*pos)?;
    let len_bytes: [u8; 4] = bytes.get(*pos + 1..*pos + 5)?.try_into().ok()?;
    let len = u32::from_be_bytes(len_bytes) as usize;
    let mag = bytes.get(*pos + 5..*pos + 5 + len)?;
    *pos += 5 + len;
    let value = from_be_bytes(mag);
    Some(if sign == 1 { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn random_below_stays_in_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let bound = Integer::from(1000);
        for _ in 0..2000 {
            let x = random_below(&mut rng, &bound);
            assert!(x >= 0 && x < bound);
        }
    }

    #[test]
    fn pow_mod_signed_negative_exponent() {
        let m = Integer::from(35 * 35);
        let base = Integer::from(2);
        let pos = pow_mod_signed(&base, &Integer::from(5), &m);
        let neg = pow_mod_signed(&base, &Integer::from(-5), &m);
        assert_eq!(Integer::from(&pos * &neg) % &m, 1);
    }

    #[test]
    fn signed_roundtrip() {
        for v in [0i64, 1, -1, 255, -256, 123_456_789, -987_654_321] {
            let mut buf = Vec::new();
            write_signed(&mut buf, &Integer::from(v));
            let mut pos = 0;
            assert_eq!(read_signed(&buf, &mut pos), Some(Integer::from(v)));
            assert_eq!(pos, buf.len());
        }
    }
}
