//! Simulated variable-precision floating-point arithmetic.
//!
//! Values are `(-1)^neg * mag * 2^exp` with an exact big-integer magnitude and an
//! unbounded exponent; every operation rounds its exact result to the context's
//! significand width with round-to-nearest, ties to even. There is no overflow,
//! underflow, or subnormal behaviour to simulate, which matches the arithmetic
//! model the solver's error analysis assumes. A 53-bit context reproduces native
//! double arithmetic bit-for-bit away from the double's exponent limits.

mod kernels;
mod qr;

pub use kernels::{
    radd, rdiv, rdot, rmatmul, rmul, rnorm2, round_scalar, rsqrt, rsub, rsum, sf_dot,
    sf_norm2, sf_sum, SfMat,
};
pub use qr::{golub_lls, LlsError, LlsSolution};

use num_bigint::BigUint;
use thiserror::Error;

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrecisionError {
    #[error("significand width {0} outside supported range {MIN_BITS}..={MAX_BITS}")]
    BitsOutOfRange(u32),
}

/// Significand width for a simulated-precision region. Cheap to copy; passed by
/// reference only for uniformity with the heavier kernel arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundingContext {
    bits: u32,
}

impl RoundingContext {
    pub fn with_bits(bits: u32) -> Result<Self, PrecisionError> {
        if !(MIN_BITS..=MAX_BITS).contains(&bits) {
            return Err(PrecisionError::BitsOutOfRange(bits));
        }
        Ok(Self { bits })
    }

    /// Width matching native f64 significands.
    pub fn native() -> Self {
        Self { bits: 53 }
    }

    /// Smallest width whose unit roundoff `2^-p` does not exceed `u`, clamped to
    /// the supported range.
    pub fn from_unit_roundoff(u: f64) -> Self {
        assert!(u > 0.0 && u.is_finite());
        let p = (-u.log2()).ceil() as i64;
        let p = p.clamp(MIN_BITS as i64, MAX_BITS as i64);
        Self { bits: p as u32 }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `u = 2^-p`.
    pub fn unit_roundoff(&self) -> f64 {
        (0.5f64).powi(self.bits as i32)
    }

    /// The same context with `extra` more significand bits (used by the step
    /// retry policy), saturating at the supported maximum.
    pub fn refined(&self, extra: u32) -> Self {
        Self { bits: (self.bits + extra).min(MAX_BITS) }
    }
}

/// One simulated floating-point value. The magnitude of a nonzero value produced
/// by an operation under context `p` is normalized to exactly `p` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimFloat {
    neg: bool,
    mag: BigUint,
    exp: i64, // exponent of the least significant magnitude bit
}

impl SimFloat {
    pub fn zero() -> Self {
        Self { neg: false, mag: BigUint::default(), exp: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.mag.bits() == 0
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    /// Injects a native double, rounding it to the context width.
    pub fn from_f64(x: f64, ctx: &RoundingContext) -> Self {
        assert!(x.is_finite(), "simulated arithmetic is defined on finite values");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let neg = (bits >> 63) == 1;
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mag, exp) = if raw_exp == 0 {
            (frac, -1074) // subnormal
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        round_raw(neg, BigUint::from(mag), exp, ctx.bits)
    }

    /// Nearest native double (ties to even). Values beyond the double range only
    /// arise from inputs far outside this crate's problem scale; they saturate.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let r = round_raw(self.neg, self.mag.clone(), self.exp, 53);
        let m = biguint_to_u64(&r.mag); // exactly 53 bits
        let e = r.exp; // value = m * 2^e with 2^52 <= m < 2^53
        let sign = if self.neg { -1.0 } else { 1.0 };
        sign * ldexp53(m as f64, e)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self { neg: !self.neg, mag: self.mag.clone(), exp: self.exp }
    }

    pub fn abs(&self) -> Self {
        Self { neg: false, mag: self.mag.clone(), exp: self.exp }
    }

    pub fn add(&self, other: &Self, ctx: &RoundingContext) -> Self {
        let p = ctx.bits;
        if self.is_zero() {
            return round_raw(other.neg, other.mag.clone(), other.exp, p);
        }
        if other.is_zero() {
            return round_raw(self.neg, self.mag.clone(), self.exp, p);
        }
        let ea = self.exp + self.mag.bits() as i64 - 1;
        let eb = other.exp + other.mag.bits() as i64 - 1;
        let (hi, lo) = if ea > eb || (ea == eb && mag_ge(self, other)) {
            (self, other)
        } else {
            (other, self)
        };
        let gap = (hi.exp + hi.mag.bits() as i64 - 1) - (lo.exp + lo.mag.bits() as i64 - 1);
        if gap > p as i64 + 3 {
            // The small operand only influences the round/sticky decision.
            let shift = p as u64 + 4;
            let raw = &hi.mag << shift;
            let raw = if hi.neg == lo.neg { raw + 1u32 } else { raw - 1u32 };
            return round_raw(hi.neg, raw, hi.exp - shift as i64, p);
        }
        let e0 = hi.exp.min(lo.exp);
        let ma = &hi.mag << (hi.exp - e0) as u64;
        let mb = &lo.mag << (lo.exp - e0) as u64;
        if hi.neg == lo.neg {
            round_raw(hi.neg, ma + mb, e0, p)
        } else {
            // |hi| >= |lo| by the ordering above.
            round_raw(hi.neg, ma - mb, e0, p)
        }
    }

    pub fn sub(&self, other: &Self, ctx: &RoundingContext) -> Self {
        self.add(&other.neg(), ctx)
    }

    pub fn mul(&self, other: &Self, ctx: &RoundingContext) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        round_raw(
            self.neg != other.neg,
            &self.mag * &other.mag,
            self.exp + other.exp,
            ctx.bits,
        )
    }

    pub fn div(&self, other: &Self, ctx: &RoundingContext) -> Self {
        assert!(!other.is_zero(), "division by zero in simulated arithmetic");
        if self.is_zero() {
            return Self::zero();
        }
        let p = ctx.bits as u64;
        let la = self.mag.bits();
        let lb = other.mag.bits();
        let k = (lb + p + 3).saturating_sub(la);
        let num = &self.mag << k;
        let q = &num / &other.mag;
        let rem = num - &q * &other.mag;
        let sticky = if rem.bits() == 0 { 0u32 } else { 1u32 };
        let raw = (q << 1u8) + sticky;
        round_raw(
            self.neg != other.neg,
            raw,
            self.exp - k as i64 - other.exp - 1,
            ctx.bits,
        )
    }

    pub fn sqrt(&self, ctx: &RoundingContext) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        assert!(!self.neg, "square root of a negative value in simulated arithmetic");
        let p = ctx.bits as u64;
        let l = self.mag.bits();
        let k0 = (2 * p + 2).saturating_sub(l);
        // Make the residual exponent even so the root's scale is a power of two.
        let k = k0 + (self.exp - k0 as i64).rem_euclid(2) as u64;
        let num = &self.mag << k;
        let s = num.sqrt();
        let rem = num - &s * &s;
        let sticky = if rem.bits() == 0 { 0u32 } else { 1u32 };
        let raw = (s << 1u8) + sticky;
        round_raw(false, raw, (self.exp - k as i64) / 2 - 1, ctx.bits)
    }

    /// Exact value comparison (independent of any context).
    pub fn cmp_value(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return if other.neg { Ordering::Greater } else { Ordering::Less },
            (false, true) => return if self.neg { Ordering::Less } else { Ordering::Greater },
            _ => {}
        }
        if self.neg != other.neg {
            return if self.neg { Ordering::Less } else { Ordering::Greater };
        }
        let mag_ord = {
            let ea = self.exp + self.mag.bits() as i64;
            let eb = other.exp + other.mag.bits() as i64;
            if ea != eb {
                ea.cmp(&eb)
            } else {
                let e0 = self.exp.min(other.exp);
                let ma = &self.mag << (self.exp - e0) as u64;
                let mb = &other.mag << (other.exp - e0) as u64;
                ma.cmp(&mb)
            }
        };
        if self.neg {
            mag_ord.reverse()
        } else {
            mag_ord
        }
    }
}

fn mag_ge(a: &SimFloat, b: &SimFloat) -> bool {
    let e0 = a.exp.min(b.exp);
    let ma = &a.mag << (a.exp - e0) as u64;
    let mb = &b.mag << (b.exp - e0) as u64;
    ma >= mb
}

/// Round the exact value `(-1)^neg * mag * 2^exp` to `p` significand bits,
/// round-to-nearest ties-to-even. The input magnitude must be exact, except that
/// its lowest bit may be a sticky marker standing for "something nonzero below".
fn round_raw(neg: bool, mag: BigUint, exp: i64, p: u32) -> SimFloat {
    let l = mag.bits();
    if l == 0 {
        return SimFloat::zero();
    }
    let p = p as u64;
    if l <= p {
        let shift = p - l;
        return SimFloat { neg, mag: mag << shift, exp: exp - shift as i64 };
    }
    let sh = l - p;
    let mut keep: BigUint = &mag >> sh;
    let round_bit = mag.bit(sh - 1);
    let sticky = match mag.trailing_zeros() {
        Some(t) => t < sh - 1,
        None => false,
    };
    if round_bit && (sticky || keep.bit(0)) {
        keep += 1u32;
    }
    let mut exp = exp + sh as i64;
    if keep.bits() == p + 1 {
        keep >>= 1;
        exp += 1;
    }
    SimFloat { neg, mag: keep, exp }
}

fn biguint_to_u64(m: &BigUint) -> u64 {
    let digits = m.to_u64_digits();
    match digits.len() {
        0 => 0,
        1 => digits[0],
        _ => panic!("magnitude exceeds 64 bits"),
    }
}

// Exact power of two for exponents in the normal double range.
fn pow2n(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

// v * 2^e with the scale applied in normal-range steps, so only the final
// multiply can round (and only into the subnormal or overflow regimes).
fn ldexp53(mut v: f64, mut e: i64) -> f64 {
    while e > 1023 {
        v *= pow2n(1023);
        e -= 1023;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1022 {
        v *= pow2n(-1022);
        e += 1022;
        if v == 0.0 {
            return v;
        }
    }
    v * pow2n(e)
}
