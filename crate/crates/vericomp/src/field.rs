//! Arithmetic in the prime field GF(2^61 - 1).
//!
//! The modulus is a Mersenne prime, so reduction is a shift, an add and a
//! bitwise AND. Elements are kept in canonical form `[0, q)` after every
//! operation, which makes equality and serialization trivial. All operations
//! are pure functions on a `Copy` type and safe to use from any thread.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;

/// q = 2^61 - 1.
pub const MODULUS: u64 = (1u64 << 61) - 1;

const MERSENNE_EXP: u32 = 61;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("no inverse of zero")]
    ZeroInverse,
    #[error("magnitude {0} is not below the modulus")]
    MagnitudeTooLarge(i128),
    #[error("value {0} is not a canonical field element")]
    NotCanonical(u64),
}

/// An element of GF(2^61 - 1), always stored as its canonical representative.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    /// Reduces an arbitrary u64 into the field.
    #[inline]
    pub fn new(v: u64) -> Self {
        let r = (v & MODULUS) + (v >> MERSENNE_EXP);
        FieldElement(if r >= MODULUS { r - MODULUS } else { r })
    }

    /// Wraps a value that is already canonical; errors otherwise.
    pub fn from_canonical(v: u64) -> Result<Self, FieldError> {
        if v < MODULUS {
            Ok(FieldElement(v))
        } else {
            Err(FieldError::NotCanonical(v))
        }
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Maps a signed integer with |d| < q into the field; negative values
    /// land on q - |d|.
    pub fn from_signed(d: i64) -> Result<Self, FieldError> {
        let mag = d.unsigned_abs();
        if mag >= MODULUS {
            return Err(FieldError::MagnitudeTooLarge(d as i128));
        }
        Ok(if d < 0 {
            FieldElement(MODULUS - mag)
        } else {
            FieldElement(mag)
        })
    }

    /// a^e by square-and-multiply.
    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = FieldElement::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat: a^(q-2). Errors on zero.
    pub fn inverse(self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(MODULUS - 2))
    }

    /// Uniform element of [0, q) by rejection sampling on 61-bit draws.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v = rng.next_u64() & MODULUS;
            if v < MODULUS {
                return FieldElement(v);
            }
        }
    }

    /// Uniform element of [1, q), i.e. a draw from the multiplicative group.
    pub fn random_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v = Self::random(rng);
            if !v.is_zero() {
                return v;
            }
        }
    }

    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; 8]) -> Result<Self, FieldError> {
        Self::from_canonical(u64::from_le_bytes(bytes))
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        FieldElement::new(v)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    #[inline]
    fn add(self, rhs: FieldElement) -> FieldElement {
        let r = self.0 + rhs.0; // both < 2^61, no u64 overflow
        FieldElement(if r >= MODULUS { r - MODULUS } else { r })
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    #[inline]
    fn sub(self, rhs: FieldElement) -> FieldElement {
        FieldElement(if self.0 >= rhs.0 {
            self.0 - rhs.0
        } else {
            self.0 + MODULUS - rhs.0
        })
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    #[inline]
    fn neg(self) -> FieldElement {
        FieldElement(if self.0 == 0 { 0 } else { MODULUS - self.0 })
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    #[inline]
    fn mul(self, rhs: FieldElement) -> FieldElement {
        // 128-bit product, then fold the high bits twice.
        let wide = (self.0 as u128) * (rhs.0 as u128);
        let lo = (wide as u64) & MODULUS;
        let hi = (wide >> 61) as u64;
        let r = lo + (hi & MODULUS) + (hi >> MERSENNE_EXP);
        let r = (r & MODULUS) + (r >> MERSENNE_EXP);
        FieldElement(if r >= MODULUS { r - MODULUS } else { r })
    }
}

impl AddAssign for FieldElement {
    #[inline]
    fn add_assign(&mut self, rhs: FieldElement) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    #[inline]
    fn sub_assign(&mut self, rhs: FieldElement) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    #[inline]
    fn mul_assign(&mut self, rhs: FieldElement) {
        *self = *self * rhs;
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
