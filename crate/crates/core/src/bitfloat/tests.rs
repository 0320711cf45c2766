use super::*;
use proptest::prelude::*;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact_f32(v: f32) -> BigRational {
    BigRational::from_float(v).unwrap()
}

fn bits(v: f32) -> Fp32Bits {
    Fp32Bits::from_f32(v).unwrap()
}

fn tol() -> BigRational {
    rat(1, 1 << 22)
}

#[test]
fn decode_examples() {
    assert_eq!(decode(Fp32Bits::from_parts(false, 126, 0).unwrap()), rat(1, 2));
    assert_eq!(decode(Fp32Bits::new(0x3DCC_CCCD).unwrap()), rat(13_421_773, 134_217_728));
    assert_eq!(encode(&BigRational::zero()).unwrap(), Fp32Bits::ZERO);
}

#[test]
fn encode_truncates_toward_zero() {
    assert_eq!(encode(&rat(1, 10)).unwrap().raw(), 0x3DCC_CCCC);
    assert_eq!(encode(&rat(-1, 10)).unwrap().raw(), 0xBDCC_CCCC);
    assert_eq!(encode(&rat(3, 4)).unwrap(), bits(0.75));
    assert!(matches!(encode(&rat(2, 1)), Err(BitfloatError::Range(_))));
    assert!(matches!(encode(&rat(-5, 2)), Err(BitfloatError::Range(_))));
}

#[test]
fn invalid_patterns_rejected() {
    assert!(Fp32Bits::new(0x4000_0000).is_err());
    assert!(Fp32Bits::from_f32(f32::NAN).is_err());
    assert!(Fp32Bits::from_f32(2.0).is_err());
    assert!(Fp32Bits::from_f32(1.999).is_ok());
}

#[test]
fn compare_examples() {
    let w = bits(0.75);
    assert_eq!(compare_magnitude(w, w), Comparison::Same);
    assert_eq!(compare_magnitude(w, UpdateValue::from_tenths(1).unwrap().bits()), Comparison::WGreater);
    assert_eq!(compare_magnitude(bits(0.05), UpdateValue::from_tenths(1).unwrap().bits()), Comparison::WLess);
    assert_eq!(bits(0.75).exponent(), 126);
    assert_eq!(bits(0.05).exponent(), 122);
    assert_eq!(UpdateValue::from_tenths(1).unwrap().bits().exponent(), 123);
}

#[test]
fn resolve_examples() {
    use Comparison::*;
    let sub_wj = Operation::Sub { w_minus_j: true };
    let sub_jw = Operation::Sub { w_minus_j: false };
    assert_eq!(resolve_sign_op(WGreater, false, false), (false, sub_wj));
    assert_eq!(resolve_sign_op(WLess, false, false), (true, sub_jw));
    for cmp in [WGreater, WLess, Same] {
        assert_eq!(resolve_sign_op(cmp, true, false), (true, Operation::Add));
        assert_eq!(resolve_sign_op(cmp, false, true), (false, Operation::Add));
    }
    assert!(!resolve_sign_op(Same, true, true).0);
}

#[test]
fn align_examples() {
    let (_, s) = align(UpdateValue::from_tenths(1).unwrap().bits(), J_STICKY);
    assert_eq!(s, 4);
    let (_, s) = align(bits(0.9), W_STICKY);
    assert_eq!(s, 1);
    let (f, s) = align(bits(1.5), W_STICKY);
    assert_eq!(s, 0);
    assert!(f.integer());
    assert!(f.position(1));
    assert!(!f.position(2));
    let (f, s) = align(Fp32Bits::ZERO, W_STICKY);
    assert_eq!((f.mag, s), (0, 0));
}

#[test]
fn every_update_value_needs_at_most_four_shifts() {
    for j in UpdateValue::all().filter(|j| !j.is_zero()) {
        let (f, s) = align(j.bits(), J_STICKY);
        assert!(s <= 4, "{j:?}");
        // No mass lost: the short sticky budget covers every update value.
        assert_eq!(f.value().abs(), decode(j.bits()).abs());
    }
}

#[test]
fn arithmetic_examples() {
    let half = align(bits(0.5), W_STICKY).0;
    let one = add_magnitudes(half, half);
    assert!(one.integer() && !one.guard());
    assert_eq!(one.value(), rat(1, 1));
    let a = align(bits(1.0), W_STICKY).0;
    assert!(sub_magnitudes(a, a).is_zero());
    let s = add_magnitudes(align(bits(1.5), W_STICKY).0, align(bits(0.9), W_STICKY).0);
    assert!(s.guard());
}

#[test]
fn normalize_examples() {
    let n = normalize(align(bits(1.25), W_STICKY).0);
    assert_eq!((n.shifts, new_exponent(n.shifts)), (0, 127));
    let n = normalize(align(bits(0.125), W_STICKY).0);
    assert_eq!((n.shifts, new_exponent(n.shifts), n.mantissa), (3, 124, 0));
    let n = normalize(FixedPoint::default());
    assert!(n.zero);
}

#[test]
fn update_examples() {
    let w = bits(0.5);
    let o = update_weight(w, UpdateValue::ZERO);
    assert_eq!((o.result, o.op), (w, Operation::ZeroBypass));

    let j = UpdateValue::from_tenths(6).unwrap();
    let o = update_weight(w, j);
    assert_eq!(o.cmp, Some(Comparison::WLess));
    assert!(o.result.negative());
    let exact = decode(w) - decode(j.bits());
    assert!((decode(o.result) - &exact).abs() <= tol());
    assert_eq!(o.result.exponent(), 123, "magnitude near 0.1");

    let j = UpdateValue::from_tenths(1).unwrap();
    let o = update_weight(j.bits(), j);
    assert_eq!(o.result, Fp32Bits::ZERO);
    assert_eq!(o.cmp, Some(Comparison::Same));

    // 0.75 - 0.1: the grid difference is exact, so the result is that
    // difference truncated onto binary32.
    let o = update_weight(bits(0.75), j);
    let exact = rat(3, 4) - decode(j.bits());
    assert_eq!(o.result, encode(&exact).unwrap());
    assert_eq!(o.op, Operation::Sub { w_minus_j: true });
}

#[test]
fn saturation_flags_overflow() {
    let o = update_weight(bits(-1.5), UpdateValue::from_tenths(9).unwrap());
    assert!(o.saturated);
    assert_eq!(o.result.raw(), 0x80000000 | Fp32Bits::MAX.raw());
    let o = update_weight(bits(1.0), UpdateValue::from_tenths(-9).unwrap());
    assert!(!o.saturated);
}

#[test]
fn normalization_can_exceed_mantissa_width_on_cancellation() {
    // W just above J by one low mantissa step: the difference is 2^-27.
    let j = UpdateValue::from_tenths(1).unwrap();
    let w = Fp32Bits::new(j.bits().raw() + 1).unwrap();
    let o = update_weight(w, j);
    assert_eq!(decode(o.result), decode(w) - decode(j.bits()));
    assert!(o.norm_shifts > 24);
}

#[test]
fn native_and_exact_agree_within_two_ulps() {
    for raw in [0x3f00_0000u32, 0x3e4c_cccd, 0xbf40_0000, 0x3f7f_ffff] {
        let w = Fp32Bits::new(raw).unwrap();
        for j in UpdateValue::all() {
            let a = decode(update_weight(w, j).result);
            let b = decode(native_update(w, j));
            assert!((a - b).abs() <= tol(), "{w:?} {j:?}");
        }
    }
}

fn arb_weight() -> impl Strategy<Value = Fp32Bits> {
    prop_oneof![
        (any::<u32>()).prop_map(|r| Fp32Bits::new(r & !(1 << 30)).unwrap()),
        (-1.999f32..1.999).prop_map(|v| Fp32Bits::from_f32(v).unwrap()),
    ]
}

proptest! {
    #[test]
    fn decode_matches_hardware_value(w in arb_weight()) {
        prop_assert_eq!(decode(w), exact_f32(w.to_f32()));
    }

    #[test]
    fn encode_is_floor_of_magnitude(n in -1_999_999i64..1_999_999, d in 1i64..1_000_000) {
        let v = rat(n, d);
        prop_assume!(v.abs() < rat(2, 1));
        let b = encode(&v).unwrap();
        let got = decode(b).abs();
        prop_assert!(got <= v.abs());
        let next = Fp32Bits::new(b.magnitude_bits() + 1);
        if let Ok(next) = next {
            prop_assert!(decode(next) > v.abs());
        }
        prop_assert_eq!(decode(encode(&decode(b)).unwrap()), decode(b));
    }

    #[test]
    fn compare_agrees_with_rationals(w in arb_weight(), j in arb_weight()) {
        let expect = match decode(w).abs().cmp(&decode(j).abs()) {
            std::cmp::Ordering::Greater => Comparison::WGreater,
            std::cmp::Ordering::Less => Comparison::WLess,
            std::cmp::Ordering::Equal => Comparison::Same,
        };
        prop_assert_eq!(compare_magnitude(w, j), expect);
    }

    #[test]
    fn align_loses_less_than_sticky_resolution(w in arb_weight()) {
        for sticky in [J_STICKY, W_STICKY] {
            let (f, _) = align(w, sticky);
            let lost = decode(w).abs() - f.value().abs();
            prop_assert!(lost >= BigRational::zero());
            prop_assert!(lost < rat(1, 1i64 << (MANT_BITS + sticky)));
        }
    }

    #[test]
    fn grid_arithmetic_is_exact(a in 0u64..(1 << 48), b in 0u64..(1 << 48)) {
        let fa = FixedPoint { negative: false, mag: a };
        let fb = FixedPoint { negative: false, mag: b };
        prop_assert_eq!(add_magnitudes(fa, fb).value(), fa.value() + fb.value());
        let (hi, lo) = if a >= b { (fa, fb) } else { (fb, fa) };
        prop_assert_eq!(sub_magnitudes(hi, lo).value(), hi.value() - lo.value());
    }

    #[test]
    fn normalize_yields_representable_form(m in 0u64..(1 << 48)) {
        let n = normalize(FixedPoint { negative: false, mag: m });
        if m == 0 {
            prop_assert!(n.zero);
        } else {
            prop_assert!(!n.zero);
            prop_assert_eq!((m << n.shifts) >> GRID_FRAC, 1);
        }
    }

    #[test]
    fn update_within_tolerance(w in arb_weight(), t in -9i32..=9) {
        let j = UpdateValue::from_tenths(t).unwrap();
        let o = update_weight(w, j);
        let exact = decode(w) - decode(j.bits());
        if !o.saturated {
            prop_assert!((decode(o.result) - &exact).abs() <= tol());
        } else {
            prop_assert!(exact.abs() >= rat(2, 1) - rat(1, 1 << 23));
        }
        // Without alignment loss the result is the truncated exact difference.
        if !o.saturated && (w.exponent() >= BIAS - W_STICKY) {
            prop_assert_eq!(o.result, encode(&exact).unwrap());
        }
    }
}
