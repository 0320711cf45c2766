use std::collections::BTreeSet;

use super::*;
use crate::blueprints::{
    fuse_segments, gen_ack, gen_function_mapper, gen_weight_register, int, table_hinge, table_sign, value_place,
    RegisterOutputs, ValueDomain, WeightInit,
};
use crate::bitfloat::Fp32Bits;
use crate::petri::NetBuilder;

fn replay(net: &Net, m0: &Marking, w: &Trace) -> Result<Marking, crate::petri::FireError> {
    let mut m = m0.clone();
    for t in w.transitions() {
        m = net.fire(&m, t)?;
    }
    Ok(m)
}

#[test]
fn self_loop_has_one_state() {
    let mut b = NetBuilder::new();
    let p = b.place("p");
    b.mark(p);
    let t = b.transition("t", "t");
    b.consume(p, t);
    b.produce(t, p);
    let net = b.build().unwrap();
    let g = explore(&net, 100);
    assert_eq!(g.len(), 1);
    assert!(g.exhausted);
    assert!(check_deadlock_free(&net, &g, None).holds());
    assert!(check_reversibility(&net, &g).holds());
}

#[test]
fn two_producers_violate_safety_with_replayable_witness() {
    let mut b = NetBuilder::new();
    let (a, c, q) = (b.place("a"), b.place("c"), b.place("q"));
    b.mark(a);
    b.mark(c);
    for (n, src) in [("t1", a), ("t2", c)] {
        let t = b.transition(n, n);
        b.consume(src, t);
        b.produce(t, q);
    }
    let net = b.build().unwrap();
    let g = explore(&net, 100);
    let r = check_1safe(&net, &g);
    assert_eq!(r.verdict, Verdict::Violated);
    let w = r.witness.unwrap();
    assert!(matches!(
        replay(&net, net.initial_marking(), &w),
        Err(crate::petri::FireError::Unsafe(_))
    ));
}

#[test]
fn closed_sign_segment_is_small_safe_and_live() {
    let seg = gen_function_mapper("sign", &table_sign(&ValueDomain::ternary())).unwrap();
    let e = close(&seg.net, &seg.ports, &EnvOptions::default()).unwrap();
    let g = e.explore(1000);
    assert!(g.exhausted);
    assert!(g.len() <= 12, "{} states", g.len());
    assert!(check_1safe(&e.net, &g).holds());
    assert!(check_deadlock_free(&e.net, &g, None).holds());
    assert!(check_reversibility(&e.net, &g).holds());
}

#[test]
fn sink_chain_deadlocks() {
    let mut b = NetBuilder::new();
    let (p, q) = (b.place("p"), b.place("q"));
    b.mark(p);
    let t = b.transition("t", "t");
    b.consume(p, t);
    b.produce(t, q);
    let net = b.build().unwrap();
    let g = explore(&net, 10);
    let r = check_deadlock_free(&net, &g, None);
    assert_eq!(r.verdict, Verdict::Violated);
    let end = replay(&net, net.initial_marking(), r.witness.as_ref().unwrap()).unwrap();
    assert!(net.enabled_transitions(&end).is_empty());
    let declared = |m: &Marking| m.is_marked(q);
    assert!(check_deadlock_free(&net, &g, Some(&declared)).holds());
}

#[test]
fn dead_single_place_is_vacuously_reversible() {
    let mut b = NetBuilder::new();
    b.place("p");
    let net = b.build().unwrap();
    let g = explore(&net, 10);
    assert!(check_reversibility(&net, &g).holds());
}

#[test]
fn budget_stops_exploration() {
    let mut b = NetBuilder::new();
    let ps: Vec<_> = (0..12).map(|i| b.place(format!("p{i}"))).collect();
    for (i, &p) in ps.iter().enumerate() {
        let t = b.transition(format!("t{i}"), "t");
        b.produce(t, p);
        let _ = t;
    }
    let net = b.build().unwrap();
    let g = explore(&net, 50);
    assert!(!g.exhausted);
    assert_eq!(g.len(), 50);
    assert_eq!(check_deadlock_free(&net, &g, None).verdict, Verdict::Inconclusive);
}

fn brute_force(net: &Net, m: &Marking, seen: &mut BTreeSet<Marking>) {
    if !seen.insert(m.clone()) {
        return;
    }
    for t in net.enabled_transitions(m) {
        if let Ok(next) = net.fire(m, t) {
            brute_force(net, &next, seen);
        }
    }
}

#[test]
fn exploration_equals_recursive_closure() {
    let z = ValueDomain::ints([-2, 0, 2]);
    let (mul, sub, clip) = table_hinge(&z);
    let segs = [
        gen_function_mapper("hm", &mul.wired(&["y", "z"], &["yz", "dLdz"])).unwrap(),
        gen_function_mapper("hs", &sub.wired(&["yz"], &["margin"])).unwrap(),
        gen_function_mapper("hc", &clip.wired(&["margin"], &["L"])).unwrap(),
    ];
    let net = fuse_segments(&segs).unwrap();
    let e = close(&net, &component_ports(&segs), &EnvOptions::default()).unwrap();
    let g = e.explore(1 << 20);
    let mut seen = BTreeSet::new();
    brute_force(&e.net, &e.initial, &mut seen);
    let ours: BTreeSet<Marking> = g.states.iter().cloned().collect();
    assert_eq!(ours, seen);
    assert!(check_1safe(&e.net, &g).holds());
    assert!(check_deadlock_free(&e.net, &g, None).holds());
    let r = check_reachable(&e.net, &g, &[("L=3", 1)], ReachMode::Coverable).unwrap();
    assert!(r.holds());
    let r = check_reachable(&e.net, &g, &[], ReachMode::Exact).unwrap();
    assert!(r.holds());
    assert!(check_reachable(&e.net, &g, &[("nope", 1)], ReachMode::Exact).is_err());
}

fn register_env(guarded: bool) -> (Environment, Vec<PlaceId>) {
    let out = RegisterOutputs {
        copies: vec!["wb".into()],
        instrument: false,
    };
    let seg = gen_weight_register(0, Fp32Bits::ZERO, WeightInit::Preset, &out).unwrap();
    let net = if guarded {
        seg.net.clone()
    } else {
        // Same transitions without the arb place.
        let mut b = NetBuilder::new();
        let arb = seg.net.place_id("w0.arb").unwrap();
        for p in seg.net.place_ids() {
            let id = b.place(seg.net.place(p).name.clone());
            if seg.net.initial_marking().is_marked(p) && p != arb {
                b.mark(id);
            }
        }
        b.place("w0.arb.unused");
        for t in seg.net.transition_ids() {
            let tr = b.transition(seg.net.transition(t).name.clone(), seg.net.transition(t).label.clone());
            for a in seg.net.arcs() {
                use crate::petri::{ArcKind, Node};
                let name = |p: PlaceId| b_name(&seg.net, p);
                match (a.source, a.target, a.kind) {
                    (Node::Place(p), Node::Transition(u), ArcKind::Normal) if u == t && p != arb => {
                        b.consume(b.place_id(&name(p)).unwrap(), tr)
                    }
                    (Node::Place(p), Node::Transition(u), ArcKind::Read) if u == t && p != arb => {
                        b.read(b.place_id(&name(p)).unwrap(), tr)
                    }
                    (Node::Transition(u), Node::Place(p), _) if u == t => b.produce(tr, b.place_id(&name(p)).unwrap()),
                    _ => {}
                }
            }
        }
        b.build().unwrap()
    };
    let env = close(
        &net,
        &seg.ports.iter().filter(|p| p.name != "w0.arb").cloned().collect::<Vec<_>>(),
        &EnvOptions {
            one_shot: true,
            weights: vec![(0, Fp32Bits::from_f32(-0.5).unwrap())],
            ..Default::default()
        },
    )
    .unwrap();
    let pair = [-1, 1]
        .iter()
        .map(|&v| env.net.place_id(&value_place("wb", &int(v))).unwrap())
        .collect();
    (env, pair)
}

fn b_name(net: &Net, p: PlaceId) -> String {
    net.place(p).name.clone()
}

#[test]
fn arb_guards_binarization() {
    let (e, pair) = register_env(true);
    let g = e.explore(10_000);
    assert!(check_mutex(&e.net, &g, &pair).holds());
    let r = check_reachable(&e.net, &g, &[("wb=1", 1), ("wb=-1", 1)], ReachMode::Coverable).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);

    // Without arb every witness fires and both results collide.
    let (e, _) = register_env(false);
    let g = e.explore(10_000);
    assert_eq!(check_1safe(&e.net, &g).verdict, Verdict::Violated);
}

#[test]
fn mutex_singleton_holds() {
    let seg = gen_ack("ack", "v", &ValueDomain::sign(), "done").unwrap();
    let e = close(&seg.net, &seg.ports, &EnvOptions::default()).unwrap();
    let g = e.explore(100);
    let p = e.net.place_id("done").unwrap();
    assert!(check_mutex(&e.net, &g, &[p]).holds());
    assert!(check_bounded(&e.net, &g, p, 1).holds());
}

#[test]
fn precedence_detects_reordering() {
    let t = |i| TransitionId(i);
    let trace = |ids: &[u32]| {
        let mut tr = Trace::default();
        for &i in ids {
            tr.push(t(i), 0);
        }
        tr
    };
    // 0 = before, 1 = after, 9 = reset.
    assert!(check_precedence(&trace(&[0, 1, 9, 0, 1, 9]), &[t(0)], &[t(1)], t(9)).holds());
    let r = check_precedence(&trace(&[0, 1, 9, 1, 0, 9]), &[t(0)], &[t(1)], t(9));
    assert_eq!(r.verdict, Verdict::Violated);
    assert_eq!(r.witness.unwrap().len(), 4);
}

#[test]
fn loader_reversible_and_budgeted_loader_not() {
    let spec = crate::blueprints::NetworkSpec::xor();
    let r = verify_tier(
        &spec,
        Tier::Component,
        &TierOptions {
            budget: 1_000_000,
            ..Default::default()
        },
    )
    .unwrap();
    for e in r.entries.iter().filter(|e| e.subject.starts_with("inputs")) {
        assert!(e.passed(), "{} {}: {:?}", e.subject, e.report.property, e.report.verdict);
    }
}
