use super::*;
use crate::bitfloat::Fp32Bits;
use crate::engine::{run, SchedulePolicy, Simulator, StopCondition, Terminal};
use crate::petri::Marking;

/// Mark `places` on top of the initial marking and fire to quiescence.
fn settle(net: &Net, places: &[String]) -> Marking {
    let mut m = net.initial_marking().clone();
    for p in places {
        let id = net.place_id(p).unwrap_or_else(|| panic!("no place {p}"));
        assert!(!m.is_marked(id), "{p} already marked");
        m.set(id, true);
    }
    let mut sim = Simulator::with_marking(net, m, SchedulePolicy::PriorityOrder);
    while let Some(r) = sim.step() {
        r.unwrap();
    }
    sim.marking().clone()
}

fn marked_names(net: &Net, m: &Marking) -> Vec<String> {
    let mut v: Vec<String> = m.marked_places().map(|p| net.place(p).name.clone()).collect();
    v.sort();
    v
}

fn size(s: &Segment) -> (usize, usize, usize) {
    (s.owned_places(), s.net.num_transitions(), s.net.num_arcs())
}

#[test]
fn sign_and_tanh_segment_sizes() {
    let sign = gen_function_mapper("sign", &table_sign(&ValueDomain::ternary())).unwrap();
    assert_eq!(size(&sign), (2, 3, 6));
    let tanh = gen_function_mapper("tanh", &table_hardtanh(&ValueDomain::range(-2, 2))).unwrap();
    assert_eq!(size(&tanh), (3, 5, 10));
}

#[test]
fn learning_rate_segment_size() {
    let all: Vec<u8> = (1..=9).collect();
    let lr = gen_learning_rate(&all, false).unwrap();
    assert_eq!((lr.owned_places(), lr.net.num_transitions()), (10, 9));
    let one = gen_learning_rate(&[6], false).unwrap();
    assert_eq!(one.net.num_transitions(), 1);
}

fn check_mapper_exhaustive(name: &str, table: &FunctionTable) {
    let seg = gen_function_mapper(name, table).unwrap();
    for (combo, out) in &table.rows {
        let inputs: Vec<String> = table
            .inputs
            .iter()
            .zip(combo)
            .map(|(i, v)| value_place(&i.wire, v))
            .collect();
        let m = settle(&seg.net, &inputs);
        let mut expect: Vec<String> = table
            .inputs
            .iter()
            .zip(combo)
            .filter(|(i, _)| i.read_only)
            .map(|(i, v)| value_place(&i.wire, v))
            .collect();
        expect.extend(table.outputs.iter().zip(out).map(|((w, _), v)| value_place(w, v)));
        expect.sort();
        assert_eq!(marked_names(&seg.net, &m), expect, "{name} on {combo:?}");
    }
}

#[test]
fn every_mapper_is_exhaustively_correct() {
    let z = ValueDomain::ints([-2, 0, 2]);
    let (mul, sub, clip) = table_hinge(&z);
    let rates = ValueDomain::new((1..=9).map(tenths)).unwrap();
    let tables = [
        ("sign", table_sign(&ValueDomain::ternary())),
        ("tanh", table_hardtanh(&ValueDomain::range(-3, 3))),
        ("mul", table_product(&ValueDomain::bit(), &ValueDomain::sign())),
        ("sum", table_sum(&[ValueDomain::sign(), ValueDomain::sign(), ValueDomain::ternary()])),
        ("hinge.mul", mul),
        ("hinge.sub", sub),
        ("hinge.clip", clip),
        ("dloss", table_dloss(&z)),
        ("grad.ih", table_grad(GradKind::InputHidden)),
        ("grad.ho", table_grad(GradKind::HiddenOutput)),
        ("grad.real", table_grad(GradKind::Real)),
        ("lrg", table_lr_product(&rates)),
    ];
    for (name, t) in &tables {
        check_mapper_exhaustive(name, t);
    }
}

#[test]
fn partial_table_is_rejected() {
    let mut t = table_sign(&ValueDomain::ternary());
    t.rows.remove(&vec![int(0)]);
    assert!(matches!(
        gen_function_mapper("sign", &t),
        Err(BlueprintError::NotTotal(_, row)) if row == "0"
    ));
}

#[test]
fn hinge_and_derivative_examples() {
    let z = ValueDomain::ints([-2, 0, 2]);
    let (mul, sub, clip) = table_hinge(&z);
    let segs = [
        gen_function_mapper("hm", &mul.wired(&["y", "z"], &["yz", "dLdz"])).unwrap(),
        gen_function_mapper("hs", &sub.wired(&["yz"], &["margin"])).unwrap(),
        gen_function_mapper("hc", &clip.wired(&["margin"], &["L"])).unwrap(),
    ];
    let net = fuse_segments(&segs).unwrap();
    for (y, zv, l, d) in [(-1, 2, 3, 1), (1, 2, 0, 0), (1, 0, 1, -1), (-1, -2, 0, 0), (1, -2, 3, -1), (-1, 0, 1, 1)] {
        let m = settle(&net, &[value_place("y", &int(y)), value_place("z", &int(zv))]);
        assert_eq!(
            marked_names(&net, &m),
            vec![value_place("L", &int(l)), value_place("dLdz", &int(d))],
            "y={y} z={zv}"
        );
    }
}

#[test]
fn composition_is_function_composition() {
    let sdom = ValueDomain::range(-2, 2);
    let tanh = gen_function_mapper("tanh", &table_hardtanh(&sdom).wired(&["s"], &["t"])).unwrap();
    let sign = gen_function_mapper("sign", &table_sign(&ValueDomain::ternary()).wired(&["t"], &["x"])).unwrap();
    let net = fuse_segments(&[tanh.clone(), sign.clone()]).unwrap();
    for s in sdom.values() {
        let mid = settle(&tanh.net, &[value_place("s", s)]);
        let mid = marked_names(&tanh.net, &mid);
        let end = settle(&sign.net, &mid);
        let m = settle(&net, &[value_place("s", s)]);
        assert_eq!(marked_names(&net, &m), marked_names(&sign.net, &end));
    }
}

fn weights() -> Vec<Fp32Bits> {
    [0.5f32, -0.5, 0.0, -0.0, 1.0, -1.0, 1.5, -1.9, 1e-3, -1e-3, 0.99999994, 1.0000001]
        .iter()
        .map(|&v| Fp32Bits::from_f32(v).unwrap())
        .chain([Fp32Bits::new(1).unwrap(), Fp32Bits::new(0x8000_0001).unwrap()])
        .collect()
}

fn register(w: Fp32Bits) -> Segment {
    let out = RegisterOutputs {
        copies: vec!["wb".into()],
        instrument: false,
    };
    gen_weight_register(0, w, WeightInit::Preset, &out).unwrap()
}

#[test]
fn register_size_and_binarization() {
    assert_eq!(register(Fp32Bits::ZERO).net.num_transitions(), 95);
    for w in weights() {
        let seg = register(w);
        let m = seg.net.initial_marking();
        let mut groups: Vec<String> = seg
            .net
            .enabled_transitions(m)
            .into_iter()
            .map(|t| seg.net.transition(t).label.clone())
            .collect();
        groups.dedup();
        assert_eq!(groups.len(), 1, "binarization groups are mutually exclusive for {w:?}");
        let out = settle(&seg.net, &[]);
        let v = int(w.binarize() as i64);
        assert!(out.is_marked(seg.net.place_id(&value_place("wb", &v)).unwrap()), "{w:?}");
        assert!(out.is_marked(seg.net.place_id("w0.ste_go").unwrap()));
    }
}

#[test]
fn free_choice_register_never_sets_bit_30() {
    let out = RegisterOutputs {
        copies: vec!["wb".into()],
        instrument: false,
    };
    let seg = gen_weight_register(0, Fp32Bits::ZERO, WeightInit::FreeChoice, &out).unwrap();
    let one30 = seg.net.place_id(&bit_place(0, 30, true)).unwrap();
    assert!(seg.net.producers(one30).is_empty());
    for seed in 0..5 {
        let r = run(&seg.net, SchedulePolicy::UniformRandom { seed }, StopCondition::quiescence()).unwrap();
        assert_eq!(r.terminal, Terminal::Quiescent);
        assert!(!r.final_marking.is_marked(one30));
    }
}

#[test]
fn ste_matches_magnitude_test() {
    for w in weights() {
        let reg = register(w);
        let ste = gen_ste(0, false).unwrap();
        let net = fuse_segments(&[reg, ste]).unwrap();
        let m = settle(&net, &[]);
        let v = int(crate::refbnn::ste(w) as i64);
        assert!(m.is_marked(net.place_id(&value_place("ste0", &v)).unwrap()), "{w:?}");
    }
    assert_eq!(gen_ste(0, false).unwrap().net.num_transitions(), 31);
}

#[test]
fn fork_copies_the_derivative() {
    let outs: Vec<String> = (0..3).map(|k| format!("dL@{k}")).collect();
    let seg = gen_loss_fork(&outs, false).unwrap();
    for v in [-1, 0, 1] {
        let m = settle(&seg.net, &[value_place("dLdz", &int(v)), "loss_done".into()]);
        let mut expect: Vec<String> = outs.iter().map(|o| value_place(o, &int(v))).collect();
        expect.sort();
        assert_eq!(marked_names(&seg.net, &m), expect);
    }
}

#[test]
fn loader_is_cyclic() {
    let spec = NetworkSpec::xor();
    let wires: Vec<Vec<String>> = (0..2).map(|j| vec![format!("a{j}")]).collect();
    let seg = gen_input_loader(&spec.dataset, &wires, &LoaderOptions::default()).unwrap();
    let net = &seg.net;
    let mut m = net.initial_marking().clone();
    let mut order = Vec::new();
    for _ in 0..8 {
        let en = net.enabled_transitions(&m);
        assert_eq!(en.len(), 1);
        order.push(net.transition(en[0]).label.clone());
        m = net.fire(&m, en[0]).unwrap();
        // Drain the outputs the way the rest of the model would.
        for p in net.place_ids() {
            let name = &net.place(p).name;
            if name.starts_with('a') || name.starts_with("y=") {
                m.set(p, false);
            }
        }
        m.set(net.place_id(DATA_VEC).unwrap(), true);
    }
    assert_eq!(order, ["00", "01", "10", "11", "00", "01", "10", "11"]);
}

#[test]
fn budget_stops_the_loader() {
    let spec = NetworkSpec::xor();
    let wires: Vec<Vec<String>> = (0..2).map(|j| vec![format!("a{j}")]).collect();
    let opts = LoaderOptions {
        budget: Some(1),
        ..Default::default()
    };
    let seg = gen_input_loader(&spec.dataset, &wires, &opts).unwrap();
    let net = &seg.net;
    let budget = net.place_id(BUDGET).unwrap();
    let first = net.transition_id("load[00]").unwrap();
    assert!(!net.enabled(net.initial_marking(), first).unwrap());
    let mut m = net.initial_marking().clone();
    m.set_count(budget, 1);
    let m = net.fire(&m, first).unwrap();
    assert_eq!(m.count(budget), 0);
}

#[test]
fn smallest_model_composes_and_trains() {
    let spec = NetworkSpec {
        features: 1,
        hidden: 1,
        dataset: vec![DataRow::new(&[0], -1), DataRow::new(&[1], 1)],
        ..NetworkSpec::xor()
    };
    let net = compose_bnn(&spec, &BuildOptions::default()).unwrap();
    assert!(net.num_places() > 0);
    let out = crate::engine::lockstep_seed(&spec, 3, 5, &Default::default()).unwrap();
    assert_eq!(out.cycles, 6);
    assert!(out.passed(), "{:?}", out.mismatches.first());
}

#[test]
fn learning_rate_stays_selected() {
    let spec = NetworkSpec {
        learning_rates: (1..=9).collect(),
        ..NetworkSpec::xor()
    };
    let net = compose_bnn(&spec, &BuildOptions::default()).unwrap();
    let rates: Vec<_> = (1..=9).map(|t| net.place_id(&value_place("lr", &tenths(t))).unwrap()).collect();
    for seed in 0..3 {
        let r = run(&net, SchedulePolicy::UniformRandom { seed }, StopCondition::cycles(12)).unwrap();
        assert_eq!(r.cycles, 12);
        assert_eq!(rates.iter().filter(|&&p| r.final_marking.is_marked(p)).count(), 1);
    }
}

#[test]
fn spec_validation() {
    let mut s = NetworkSpec::xor();
    s.learning_rates = vec![10];
    assert_eq!(s.validate(), Err(SpecError::Rates));
    let mut s = NetworkSpec::xor();
    s.dataset[1].label = 0;
    assert_eq!(s.validate(), Err(SpecError::Label(1, 0)));
    let mut s = NetworkSpec::xor();
    s.epoch_budget = Some(0);
    assert_eq!(s.validate(), Err(SpecError::Budget));
}
