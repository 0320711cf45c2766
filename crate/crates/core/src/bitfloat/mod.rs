//! Bit-level binary32 codec and the fixed-point update pipeline that the
//! weight-update net reproduces transition by transition.
//!
//! Magnitudes are aligned onto a fixed grid whose position 0 carries the
//! value 1 (the implicit leading one of an exponent-127 number) and whose
//! position `n` carries `2^-n`, for `n` up to [`GRID_FRAC`]. One guard
//! position above catches additions that reach 2.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANT_BITS: u32 = 23;
pub const BIAS: u32 = 127;
/// Sticky positions kept below the mantissa on the weight path.
pub const W_STICKY: u32 = 24;
/// Sticky positions kept below the mantissa on the update-value path.
pub const J_STICKY: u32 = 4;
/// Fraction positions of the aligned grid (23 mantissa + 24 sticky).
pub const GRID_FRAC: u32 = MANT_BITS + W_STICKY;
/// Largest exponent decrement the weight path can need.
pub const MAX_W_SHIFT: u32 = BIAS - 1;

const MANT_MASK: u32 = (1 << MANT_BITS) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitfloatError {
    #[error("magnitude of {0} is not below 2")]
    Range(String),
    #[error("bit pattern {0:#010x} has bit 30 set (magnitude >= 2, NaN or infinity)")]
    Invalid(u32),
    #[error("update value {0} is not a multiple of 0.1 in [-0.9, 0.9]")]
    UpdateValue(i32),
}

/// A binary32 pattern with magnitude below 2 (bit 30 clear).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Fp32Bits(u32);

impl Fp32Bits {
    pub const ZERO: Fp32Bits = Fp32Bits(0);
    /// Largest representable magnitude, `2 - 2^-23`.
    pub const MAX: Fp32Bits = Fp32Bits((BIAS << MANT_BITS) | MANT_MASK);

    pub fn new(raw: u32) -> Result<Self, BitfloatError> {
        if raw & (1 << 30) != 0 {
            return Err(BitfloatError::Invalid(raw));
        }
        Ok(Fp32Bits(raw))
    }

    pub fn from_parts(negative: bool, exponent: u32, mantissa: u32) -> Result<Self, BitfloatError> {
        Self::new(((negative as u32) << 31) | ((exponent & 0xff) << MANT_BITS) | (mantissa & MANT_MASK))
    }

    pub fn from_f32(v: f32) -> Result<Self, BitfloatError> {
        Self::new(v.to_bits())
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }

    pub fn negative(self) -> bool {
        self.0 >> 31 == 1
    }

    pub fn exponent(self) -> u32 {
        (self.0 >> MANT_BITS) & 0xff
    }

    pub fn mantissa(self) -> u32 {
        self.0 & MANT_MASK
    }

    pub fn bit(self, k: u32) -> bool {
        (self.0 >> k) & 1 == 1
    }

    /// Bits 30..0, the magnitude part.
    pub fn magnitude_bits(self) -> u32 {
        self.0 & 0x7fff_ffff
    }

    /// True for exponent field 0 with a nonzero mantissa.
    pub fn is_subnormal(self) -> bool {
        self.exponent() == 0 && self.mantissa() != 0
    }

    /// Binarized value: +1 for sign bit 0 or any zero, -1 otherwise.
    pub fn binarize(self) -> i8 {
        if !self.negative() || self.magnitude_bits() == 0 {
            1
        } else {
            -1
        }
    }
}

impl TryFrom<u32> for Fp32Bits {
    type Error = BitfloatError;
    fn try_from(raw: u32) -> Result<Self, Self::Error> {
        Fp32Bits::new(raw)
    }
}

impl From<Fp32Bits> for u32 {
    fn from(b: Fp32Bits) -> u32 {
        b.0
    }
}

impl std::fmt::Debug for Fp32Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fp32Bits({:#010x} = {})", self.0, self.to_f32())
    }
}

impl std::fmt::Display for Fp32Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

fn pow2(k: i64) -> BigRational {
    let one = BigInt::one();
    if k >= 0 {
        BigRational::from_integer(one << k as usize)
    } else {
        BigRational::new(one.clone(), one << (-k) as usize)
    }
}

/// Exact value of a pattern, subnormals included.
pub fn decode(b: Fp32Bits) -> BigRational {
    let e = b.exponent() as i64;
    let m = b.mantissa() as i64;
    let mag = if e == 0 {
        BigRational::from_integer(BigInt::from(m)) * pow2(-149)
    } else {
        BigRational::from_integer(BigInt::from((1i64 << MANT_BITS) | m)) * pow2(e - 150)
    };
    if b.negative() {
        -mag
    } else {
        mag
    }
}

/// `floor(log2(x))` for positive rational `x`.
fn floor_log2(x: &BigRational) -> i64 {
    let n = x.numer().magnitude();
    let d = x.denom().magnitude();
    let mut k = n.bits() as i64 - d.bits() as i64;
    // 2^k <= x < 2^(k+1), adjusting the estimate by at most one.
    if *x < pow2(k) {
        k -= 1;
    }
    k
}

/// Truncate toward zero onto the nearest binary32 pattern.
pub fn encode(v: &BigRational) -> Result<Fp32Bits, BitfloatError> {
    let two = BigRational::from_integer(BigInt::from(2));
    if v.abs() >= two {
        return Err(BitfloatError::Range(v.to_string()));
    }
    if v.is_zero() {
        return Ok(Fp32Bits::ZERO);
    }
    let negative = v.is_negative();
    let a = v.abs();
    let k = floor_log2(&a);
    let (exponent, mantissa) = if k >= -126 {
        let scaled = (&a * pow2(MANT_BITS as i64 - k)).floor().to_integer();
        (
            (k + BIAS as i64) as u32,
            bigint_to_u32(&scaled) & MANT_MASK,
        )
    } else {
        let scaled = (&a * pow2(149)).floor().to_integer();
        (0, bigint_to_u32(&scaled))
    };
    Fp32Bits::from_parts(negative, exponent, mantissa)
}

fn bigint_to_u32(x: &BigInt) -> u32 {
    let (sign, digits) = x.to_u32_digits();
    debug_assert!(sign != Sign::Minus);
    digits.first().copied().unwrap_or(0)
}

/// One of the 19 update values `tenths / 10` with `tenths` in -9..=9.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UpdateValue(i8);

impl UpdateValue {
    pub const ZERO: UpdateValue = UpdateValue(0);

    pub fn from_tenths(t: i32) -> Result<Self, BitfloatError> {
        if !(-9..=9).contains(&t) {
            return Err(BitfloatError::UpdateValue(t));
        }
        Ok(UpdateValue(t as i8))
    }

    pub fn all() -> impl Iterator<Item = UpdateValue> {
        (-9..=9).map(UpdateValue)
    }

    pub fn tenths(self) -> i32 {
        self.0 as i32
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.0), BigInt::from(10))
    }

    /// Truncated binary32 pattern of the value.
    pub fn bits(self) -> Fp32Bits {
        encode(&self.to_rational()).expect("|tenths/10| < 2")
    }
}

/// Aligned magnitude on the exponent-0 grid, sign kept separately.
///
/// `mag` holds `value * 2^GRID_FRAC`; bit `GRID_FRAC` is the integer
/// position and bit `GRID_FRAC + 1` the guard.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct FixedPoint {
    pub negative: bool,
    pub mag: u64,
}

impl FixedPoint {
    pub fn guard(&self) -> bool {
        self.mag >> (GRID_FRAC + 1) & 1 == 1
    }

    pub fn integer(&self) -> bool {
        self.mag >> GRID_FRAC & 1 == 1
    }

    /// Bit at grid position `n` (0 = integer, `n` = weight `2^-n`).
    pub fn position(&self, n: u32) -> bool {
        debug_assert!(n <= GRID_FRAC);
        self.mag >> (GRID_FRAC - n) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.mag == 0
    }

    pub fn value(&self) -> BigRational {
        let v = BigRational::from_integer(BigInt::from(self.mag)) * pow2(-(GRID_FRAC as i64));
        if self.negative {
            -v
        } else {
            v
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparison {
    WGreater,
    WLess,
    Same,
}

impl Comparison {
    pub fn label(self) -> &'static str {
        match self {
            Comparison::WGreater => "W_G",
            Comparison::WLess => "W_L",
            Comparison::Same => "Same",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operation {
    Add,
    /// Larger magnitude minus smaller; `w_minus_j` tells which is which.
    Sub { w_minus_j: bool },
    ZeroBypass,
}

/// Lexicographic comparison of bits 30..0.
pub fn compare_magnitude(w: Fp32Bits, j: Fp32Bits) -> Comparison {
    for k in (0..31).rev() {
        match (w.bit(k), j.bit(k)) {
            (true, false) => return Comparison::WGreater,
            (false, true) => return Comparison::WLess,
            _ => {}
        }
    }
    Comparison::Same
}

/// New sign (true = negative) and operation for `W - J`.
pub fn resolve_sign_op(cmp: Comparison, w_neg: bool, j_neg: bool) -> (bool, Operation) {
    if w_neg != j_neg {
        return (w_neg, Operation::Add);
    }
    match cmp {
        Comparison::WGreater => (w_neg, Operation::Sub { w_minus_j: true }),
        Comparison::WLess => (!w_neg, Operation::Sub { w_minus_j: false }),
        Comparison::Same => (false, Operation::Sub { w_minus_j: true }),
    }
}

/// Align onto the grid keeping `sticky` positions below the mantissa.
///
/// Returns the aligned value and the number of single-position shifts:
/// `127 - exponent` for normal numbers, 126 for subnormals (which carry no
/// implicit one), 0 for zero.
pub fn align(b: Fp32Bits, sticky: u32) -> (FixedPoint, u32) {
    assert!(sticky <= W_STICKY);
    let negative = b.negative();
    if b.magnitude_bits() == 0 {
        return (FixedPoint { negative, mag: 0 }, 0);
    }
    let e = b.exponent();
    let (sig, shifts) = if e == 0 {
        (b.mantissa() as u64, MAX_W_SHIFT)
    } else {
        ((1u64 << MANT_BITS) | b.mantissa() as u64, BIAS - e)
    };
    let width = MANT_BITS + sticky;
    let local = (sig << sticky).checked_shr(shifts).unwrap_or(0);
    let mag = local << (GRID_FRAC - width);
    (FixedPoint { negative, mag }, shifts)
}

pub fn add_magnitudes(a: FixedPoint, b: FixedPoint) -> FixedPoint {
    FixedPoint {
        negative: false,
        mag: a.mag + b.mag,
    }
}

pub fn sub_magnitudes(larger: FixedPoint, smaller: FixedPoint) -> FixedPoint {
    assert!(larger.mag >= smaller.mag, "subtrahend larger than minuend");
    FixedPoint {
        negative: false,
        mag: larger.mag - smaller.mag,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub mantissa: u32,
    pub shifts: u32,
    pub zero: bool,
}

/// Shift left until the integer position holds 1, then truncate to the
/// 23 mantissa positions.
pub fn normalize(f: FixedPoint) -> Normalized {
    assert!(!f.guard(), "guard must be resolved before normalization");
    if f.is_zero() {
        return Normalized {
            mantissa: 0,
            shifts: 0,
            zero: true,
        };
    }
    let shifts = f.mag.leading_zeros() - (63 - GRID_FRAC);
    let m = f.mag << shifts;
    Normalized {
        mantissa: ((m >> W_STICKY) as u32) & MANT_MASK,
        shifts,
        zero: false,
    }
}

pub fn new_exponent(shifts: u32) -> u32 {
    BIAS - shifts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub result: Fp32Bits,
    /// `None` when the update value is zero and the pipeline is bypassed.
    pub cmp: Option<Comparison>,
    pub op: Operation,
    pub align_shifts_w: u32,
    pub align_shifts_j: u32,
    pub norm_shifts: u32,
    pub saturated: bool,
}

/// `W - J` through the full pipeline.
pub fn update_weight(w: Fp32Bits, j: UpdateValue) -> UpdateOutcome {
    if j.is_zero() {
        return UpdateOutcome {
            result: w,
            cmp: None,
            op: Operation::ZeroBypass,
            align_shifts_w: 0,
            align_shifts_j: 0,
            norm_shifts: 0,
            saturated: false,
        };
    }
    update_with_bits(w, j.bits())
}

/// Pipeline for an arbitrary nonzero `J` pattern. `J` is aligned with the
/// short sticky budget, so patterns needing more than four shifts lose bits.
pub fn update_with_bits(w: Fp32Bits, jb: Fp32Bits) -> UpdateOutcome {
    let cmp = compare_magnitude(w, jb);
    let (neg, op) = resolve_sign_op(cmp, w.negative(), jb.negative());
    let (aw, sw) = align(w, W_STICKY);
    let (aj, sj) = align(jb, J_STICKY);
    let sum = match op {
        Operation::Add => add_magnitudes(aw, aj),
        Operation::Sub { w_minus_j: true } => sub_magnitudes(aw, aj),
        Operation::Sub { w_minus_j: false } => sub_magnitudes(aj, aw),
        Operation::ZeroBypass => unreachable!(),
    };
    let (result, norm_shifts, saturated) = if sum.guard() {
        (
            Fp32Bits::from_parts(neg, BIAS, MANT_MASK).expect("exponent 127"),
            0,
            true,
        )
    } else {
        let n = normalize(sum);
        if n.zero {
            (Fp32Bits::ZERO, 0, false)
        } else {
            (
                Fp32Bits::from_parts(neg, new_exponent(n.shifts), n.mantissa).expect("exponent <= 127"),
                n.shifts,
                false,
            )
        }
    };
    UpdateOutcome {
        result,
        cmp: Some(cmp),
        op,
        align_shifts_w: sw,
        align_shifts_j: sj,
        norm_shifts,
        saturated,
    }
}

/// Native binary32 `W - J` with round-to-nearest, clamped to the
/// representable range.
pub fn native_update(w: Fp32Bits, j: UpdateValue) -> Fp32Bits {
    let jf = j.tenths() as f32 / 10.0;
    let r = w.to_f32() - jf;
    let max = Fp32Bits::MAX.to_f32();
    let r = r.clamp(-max, max);
    let r = if r == 0.0 { 0.0 } else { r };
    Fp32Bits::from_f32(r).expect("clamped below 2")
}

#[cfg(test)]
mod tests;
