use bnnpn::bitfloat::{update_weight, Fp32Bits, UpdateValue};
use bnnpn::blueprints::{bit_place, gen_weight_update, int, tenths, value_place, Segment, UpdatePorts, ValueDomain};
use bnnpn::engine::{SchedulePolicy, Simulator};
use bnnpn::petri::Net;
use proptest::prelude::*;

fn j_domain() -> ValueDomain {
    ValueDomain::new((-9..=9).map(tenths)).unwrap()
}

fn segment() -> Segment {
    gen_weight_update(0, &UpdatePorts::for_weight(0, j_domain())).unwrap()
}

/// Run the segment on register `w` and input `j` until quiescence; returns
/// the register afterwards.
fn apply(net: &Net, w: Fp32Bits, j: i32, policy: SchedulePolicy) -> Fp32Bits {
    let mut m = net.initial_marking().clone();
    for n in 0..32 {
        m.set(net.place_id(&bit_place(0, n, w.bit(n))).unwrap(), true);
    }
    m.set(net.place_id(&value_place("J0", &tenths(j as i64))).unwrap(), true);
    let mut sim = Simulator::with_marking(net, m, policy);
    while let Some(r) = sim.step() {
        r.unwrap();
    }
    let out = sim.marking();
    assert!(out.is_marked(net.place_id("done0").unwrap()), "no done for {w:?} - {j}");
    let mut raw = 0;
    for n in 0..32 {
        let one = out.is_marked(net.place_id(&bit_place(0, n, true)).unwrap());
        let zero = out.is_marked(net.place_id(&bit_place(0, n, false)).unwrap());
        assert!(one ^ zero, "bit {n} not one-hot");
        raw |= (one as u32) << n;
    }
    // Every scratch place is back where it started.
    let mut scratch = out.clone();
    let mut init = net.initial_marking().clone();
    for n in 0..32 {
        for v in [false, true] {
            let p = net.place_id(&bit_place(0, n, v)).unwrap();
            scratch.set(p, false);
            init.set(p, false);
        }
    }
    scratch.set(net.place_id("done0").unwrap(), false);
    assert_eq!(scratch, init, "scratch state leaked for {w:?} - {j}");
    Fp32Bits::new(raw).unwrap()
}

fn oracle(w: Fp32Bits, j: i32) -> Fp32Bits {
    update_weight(w, UpdateValue::from_tenths(j).unwrap()).result
}

fn any_weight() -> impl Strategy<Value = Fp32Bits> {
    prop_oneof![
        any::<u32>().prop_map(|r| Fp32Bits::new(r & !(1 << 30)).unwrap()),
        (-2.0f32..2.0).prop_map(|v| Fp32Bits::from_f32(v).unwrap()),
    ]
}

#[test]
fn zero_update_bypasses() {
    let net = segment().net;
    for w in [0.5f32, -1.75, 0.0] {
        let w = Fp32Bits::from_f32(w).unwrap();
        assert_eq!(apply(&net, w, 0, SchedulePolicy::PriorityOrder), w);
    }
}

#[test]
fn worked_examples() {
    let net = segment().net;
    let f = |v: f32| Fp32Bits::from_f32(v).unwrap();
    for (w, j) in [(0.5f32, 6), (0.5, -6), (0.1, 1), (-0.3, 9), (1.5, -9), (0.0, 3), (-1.9, 9), (1.9, -9)] {
        let got = apply(&net, f(w), j, SchedulePolicy::PriorityOrder);
        assert_eq!(got, oracle(f(w), j), "w={w} j={j}");
    }
    // Saturation clamps to the largest magnitude.
    assert_eq!(apply(&net, f(1.9), -9, SchedulePolicy::PriorityOrder), Fp32Bits::MAX);
}

#[test]
fn subnormal_and_tiny_weights() {
    let net = segment().net;
    for raw in [1u32, 0x007f_ffff, 0x8000_0001, 0x0080_0000, 0x3380_0000] {
        let w = Fp32Bits::new(raw).unwrap();
        for j in [-9, -1, 1, 9] {
            assert_eq!(apply(&net, w, j, SchedulePolicy::PriorityOrder), oracle(w, j), "raw={raw:#x} j={j}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn segment_matches_oracle_bit_for_bit(w in any_weight(), j in -9i32..=9) {
        let net = segment().net;
        prop_assert_eq!(apply(&net, w, j, SchedulePolicy::PriorityOrder), oracle(w, j));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn result_is_independent_of_schedule(w in any_weight(), j in -9i32..=9, seed in any::<u64>()) {
        let net = segment().net;
        prop_assert_eq!(apply(&net, w, j, SchedulePolicy::UniformRandom { seed }), oracle(w, j));
    }
}

#[test]
fn j_domain_has_nineteen_values() {
    assert_eq!(j_domain().len(), 19);
    assert!(j_domain().contains(&int(0)));
}
