use super::*;
use proptest::prelude::*;

fn chain() -> Net {
    let mut b = NetBuilder::new();
    let p1 = b.place("p1");
    let p2 = b.place("p2");
    let t = b.transition("t", "t");
    b.consume(p1, t);
    b.produce(t, p2);
    b.mark(p1);
    b.build().unwrap()
}

fn with_read() -> Net {
    let mut b = NetBuilder::new();
    let r = b.place("r");
    let p1 = b.place("p1");
    let p2 = b.place("p2");
    let t = b.transition("t", "t");
    b.read(r, t);
    b.consume(p1, t);
    b.produce(t, p2);
    b.build().unwrap()
}

#[test]
fn empty_marking_enables_nothing() {
    let net = chain();
    let t = net.lookup_transition("t").unwrap();
    assert!(!net.enabled(&Marking::empty(2), t).unwrap());
}

#[test]
fn read_arc_enabling_matches_rule_on_all_markings() {
    // Enumerate the 4 markings over {r, p1}; only r ∧ p1 enables t.
    let net = with_read();
    let t = net.lookup_transition("t").unwrap();
    let r = net.lookup_place("r").unwrap();
    let p1 = net.lookup_place("p1").unwrap();
    for bits in 0..4u8 {
        let mut m = Marking::empty(3);
        m.set(r, bits & 1 != 0);
        m.set(p1, bits & 2 != 0);
        assert_eq!(net.enabled(&m, t).unwrap(), bits == 3, "marking {bits:02b}");
    }
}

#[test]
fn token_moves_along_chain() {
    let net = chain();
    let m = net.fire_named(net.initial_marking(), "t").unwrap();
    assert!(m.is_marked(net.lookup_place("p2").unwrap()));
    assert!(!m.is_marked(net.lookup_place("p1").unwrap()));
}

#[test]
fn read_place_retained_after_firing() {
    let net = with_read();
    let mut m = Marking::empty(3);
    m.set(net.lookup_place("r").unwrap(), true);
    m.set(net.lookup_place("p1").unwrap(), true);
    let m2 = net.fire_named(&m, "t").unwrap();
    let marked: Vec<_> = m2.marked_places().map(|p| net.place(p).name.clone()).collect();
    assert_eq!(marked, vec!["r", "p2"]);
}

#[test]
fn producing_into_marked_place_is_a_safety_violation() {
    let mut b = NetBuilder::new();
    let p = b.place("p");
    let t = b.transition("t", "t");
    b.produce(t, p);
    b.mark(p);
    let net = b.build().unwrap();
    match net.fire_named(net.initial_marking(), "t") {
        Err(FireError::Unsafe(v)) => assert_eq!(v.place_name, "p"),
        other => panic!("expected safety violation, got {other:?}"),
    }
}

#[test]
fn firing_disabled_transition_is_a_contract_error() {
    let net = chain();
    let m = Marking::empty(2);
    assert!(matches!(net.fire_named(&m, "t"), Err(FireError::Disabled(_))));
    assert!(matches!(
        net.fire_named(&m, "nope"),
        Err(FireError::Lookup(NetError::UnknownTransition(_)))
    ));
}

#[test]
fn counter_place_respects_bound() {
    let mut b = NetBuilder::new();
    let c = b.counter("c", 2);
    let t = b.transition("t", "t");
    b.produce(t, c);
    let net = b.build().unwrap();
    let m1 = net.fire_named(net.initial_marking(), "t").unwrap();
    let m2 = net.fire_named(&m1, "t").unwrap();
    assert_eq!(m2.count(c), 2);
    assert!(matches!(net.fire_named(&m2, "t"), Err(FireError::Unsafe(_))));
}

#[test]
fn incidence_examples() {
    let net = chain();
    let c = net.incidence();
    let t = net.lookup_transition("t").unwrap();
    assert_eq!(c.get(net.lookup_place("p1").unwrap(), t), -1);
    assert_eq!(c.get(net.lookup_place("p2").unwrap(), t), 1);

    let mut b = NetBuilder::new();
    let p = b.place("p");
    let t = b.transition("t", "t");
    b.consume(p, t);
    b.produce(t, p);
    let net = b.build().unwrap();
    assert_eq!(net.incidence().get(p, t), 0);

    let mut b = NetBuilder::new();
    let p = b.place("p");
    let t = b.transition("t", "t");
    b.read(p, t);
    b.mark(p);
    let net = b.build().unwrap();
    assert_eq!(net.incidence().column(t).count(), 0);
    assert_eq!(net.fire(net.initial_marking(), t).unwrap(), *net.initial_marking());
}

#[test]
fn preset_postset_and_readset() {
    let net = with_read();
    let t = net.lookup_transition("t").unwrap();
    let r = net.lookup_place("r").unwrap();
    let p1 = net.lookup_place("p1").unwrap();
    assert_eq!(net.preset(Node::Transition(t)).unwrap(), vec![Node::Place(p1)]);
    assert_eq!(net.readset(t).unwrap(), vec![r]);
    assert!(net.preset(Node::Place(r)).unwrap().is_empty());
    assert!(net.postset(Node::Place(r)).unwrap().is_empty());
    assert!(net.preset(Node::Place(PlaceId(99))).is_err());
}

#[test]
fn builder_rejects_malformed_nets() {
    let mut b = NetBuilder::new();
    let p = b.place("p");
    let q = b.place("q");
    b.arc(Node::Place(p), Node::Place(q), ArcKind::Normal);
    assert_eq!(b.build().unwrap_err(), NetError::NotBipartite);

    let mut b = NetBuilder::new();
    b.place("x");
    b.place("x");
    assert_eq!(b.build().unwrap_err(), NetError::DuplicateName("x".into()));

    let mut b = NetBuilder::new();
    let p = b.place("p");
    let t = b.transition("t", "t");
    b.arc(Node::Transition(t), Node::Place(p), ArcKind::Read);
    assert_eq!(b.build().unwrap_err(), NetError::ReadArcDirection);
}

fn seg(prefix: &str, port_in: &str, port_out: &str) -> Net {
    let mut b = NetBuilder::new();
    let i = b.place(port_in);
    let o = b.place(port_out);
    let t = b.transition(format!("{prefix}t"), "t");
    b.consume(i, t);
    b.produce(t, o);
    b.build().unwrap()
}

#[test]
fn merge_counts() {
    let a = seg("a.", "a.in", "a.out");
    let b = seg("b.", "b.in", "b.out");
    let m = merge(&a, &b, &BTreeMap::new()).unwrap();
    assert_eq!(m.num_places(), 4);
    let fuse = BTreeMap::from([("b.in".to_string(), "a.out".to_string())]);
    let m = merge(&a, &b, &fuse).unwrap();
    assert_eq!(m.num_places(), 3);
    assert_eq!(m.num_transitions(), 2);
    assert_eq!(m.num_arcs(), 4);
}

#[test]
fn merge_rejects_double_marking_and_kind_mismatch() {
    let mut a = NetBuilder::new();
    let p = a.place("p");
    a.mark(p);
    let a = a.build().unwrap();
    let mut b = NetBuilder::new();
    let q = b.place("q");
    b.mark(q);
    let b = b.build().unwrap();
    let fuse = BTreeMap::from([("q".to_string(), "p".to_string())]);
    assert!(matches!(merge(&a, &b, &fuse), Err(NetError::DoubleMarkedFusion(..))));

    let mut c = NetBuilder::new();
    c.counter("q", 3);
    let c = c.build().unwrap();
    assert!(matches!(merge(&a, &c, &fuse), Err(NetError::KindMismatch(..))));
}

#[test]
fn merge_is_associative_for_disjoint_fuse_maps() {
    let a = seg("a.", "x0", "x1");
    let b = seg("b.", "x1", "x2");
    let c = seg("c.", "x2", "x3");
    let ab = merge(&a, &b, &fuse_by_name(&a, &b)).unwrap();
    let left = merge(&ab, &c, &fuse_by_name(&ab, &c)).unwrap();
    let bc = merge(&b, &c, &fuse_by_name(&b, &c)).unwrap();
    let right = merge(&a, &bc, &fuse_by_name(&a, &bc)).unwrap();
    let names = |n: &Net| {
        let mut p: Vec<_> = n.places().iter().map(|p| p.name.clone()).collect();
        let mut t: Vec<_> = n.transitions().iter().map(|t| t.name.clone()).collect();
        let mut arcs: Vec<_> = n
            .arcs()
            .iter()
            .map(|a| {
                let nm = |x: Node| match x {
                    Node::Place(p) => n.place(p).name.clone(),
                    Node::Transition(t) => n.transition(t).name.clone(),
                };
                (nm(a.source), nm(a.target))
            })
            .collect();
        p.sort();
        t.sort();
        arcs.sort();
        (p, t, arcs)
    };
    assert_eq!(names(&left), names(&right));
}

/// Random nets: each transition gets disjoint random consume/produce/read sets.
fn arb_net() -> impl Strategy<Value = (Net, Marking)> {
    (2usize..8, 1usize..6).prop_flat_map(|(np, nt)| {
        (
            proptest::collection::vec(proptest::collection::vec(0u8..4, np), nt),
            proptest::collection::vec(any::<bool>(), np),
        )
            .prop_map(move |(roles, marks)| {
                let mut b = NetBuilder::new();
                let ps: Vec<_> = (0..np).map(|i| b.place(format!("p{i}"))).collect();
                for (ti, row) in roles.iter().enumerate() {
                    let t = b.transition(format!("t{ti}"), "t");
                    for (pi, r) in row.iter().enumerate() {
                        match r {
                            1 => b.consume(ps[pi], t),
                            2 => b.produce(t, ps[pi]),
                            3 => b.read(ps[pi], t),
                            _ => {}
                        }
                    }
                }
                let net = b.build().unwrap();
                let mut m = Marking::empty(np);
                for (i, on) in marks.iter().enumerate() {
                    m.set(ps[i], *on);
                }
                (net, m)
            })
    })
}

proptest! {
    #[test]
    fn firing_applies_incidence_column((net, m) in arb_net()) {
        let c = net.incidence();
        for t in net.transition_ids() {
            if !net.enabled(&m, t).unwrap() {
                continue;
            }
            if let Ok(m2) = net.fire(&m, t) {
                for p in net.place_ids() {
                    let delta = m2.is_marked(p) as i32 - m.is_marked(p) as i32;
                    prop_assert_eq!(delta, c.get(p, t));
                }
                // Reverse delta reconstructs the original marking.
                let mut back = m2.clone();
                for (p, v) in c.column(t) {
                    back.set(p, (m2.is_marked(p) as i32 - v) == 1);
                }
                prop_assert_eq!(back, m.clone());
            } else {
                // Unsafe: some produced place was marked and not consumed.
                prop_assert!(net.produced(t).iter().any(|&p| m.is_marked(p) && !net.consumed(t).contains(&p)));
            }
        }
    }
}
