use super::*;
use crate::blueprints::{compose_bnn, BuildOptions, NetworkSpec, WeightInit};
use crate::blueprints::NEXT_VECTOR;
use crate::petri::{Marking, NetBuilder};

fn xor_net(budget: Option<u32>, instrument: bool) -> Net {
    let spec = NetworkSpec {
        epoch_budget: budget,
        ..NetworkSpec::xor()
    };
    compose_bnn(
        &spec,
        &BuildOptions {
            instrument,
            weight_init: WeightInit::Preset,
        },
    )
    .unwrap()
}

#[test]
fn empty_net_is_quiescent() {
    let net = NetBuilder::new().build().unwrap();
    let r = run(&net, SchedulePolicy::PriorityOrder, StopCondition::quiescence()).unwrap();
    assert_eq!(r.terminal, Terminal::Quiescent);
    assert_eq!(r.firings, 0);
}

#[test]
fn safety_violation_halts_with_witness() {
    let mut b = NetBuilder::new();
    let p = b.place("p");
    let q = b.place("q");
    b.mark(p);
    b.mark(q);
    let t = b.transition("t", "t");
    b.consume(p, t);
    b.produce(t, q);
    let net = b.build().unwrap();
    let r = run(&net, SchedulePolicy::PriorityOrder, StopCondition::quiescence()).unwrap();
    match r.terminal {
        Terminal::SafetyViolation(v) => assert_eq!(v.place_name, "q"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn incremental_digest_matches_full_digest() {
    let net = xor_net(Some(1), true);
    let mut sim = Simulator::new(&net, SchedulePolicy::UniformRandom { seed: 3 });
    for _ in 0..3000 {
        if sim.step().is_none() {
            break;
        }
        assert_eq!(sim.digest(), sim.marking().digest());
    }
    let mut enabled = sim.enabled().to_vec();
    enabled.sort();
    assert_eq!(enabled, net.enabled_transitions(sim.marking()));
}

#[test]
fn equal_seeds_give_identical_reports() {
    let net = xor_net(Some(1), false);
    let a = run(&net, SchedulePolicy::UniformRandom { seed: 9 }, StopCondition::quiescence()).unwrap();
    let b = run(&net, SchedulePolicy::UniformRandom { seed: 9 }, StopCondition::quiescence()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_epoch_budget_stops_after_four_cycles() {
    let net = xor_net(Some(1), true);
    for seed in 0..3 {
        let r = run(&net, SchedulePolicy::UniformRandom { seed }, StopCondition::quiescence()).unwrap();
        assert_eq!(r.terminal, Terminal::Quiescent);
        assert_eq!(r.cycles, 4);
        assert_eq!(r.metrics.len(), 4);
        let idx: Vec<_> = r.metrics.iter().map(|m| m.vector_index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert_eq!(r.metrics[1].y_true, 1);
        assert!(r.metrics.iter().all(|m| m.epoch == 1));
    }
}

#[test]
fn step_and_cycle_limits() {
    let net = xor_net(None, false);
    let r = run(&net, SchedulePolicy::PriorityOrder, StopCondition::steps(10)).unwrap();
    assert_eq!((r.terminal, r.firings), (Terminal::StepLimit, 10));
    let r = run(&net, SchedulePolicy::PriorityOrder, StopCondition::cycles(2)).unwrap();
    assert_eq!((r.terminal, r.cycles), (Terminal::CycleLimit, 2));
}

/// Marking right after the first `next_vector` firing.
fn boundary_marking(net: &Net) -> Marking {
    let nv = net.transition_id(NEXT_VECTOR).unwrap();
    let mut sim = Simulator::new(net, SchedulePolicy::PriorityOrder);
    while sim.step().unwrap().unwrap() != nv {}
    sim.marking().clone()
}

#[test]
fn decode_rejects_double_marked_recorder() {
    let net = xor_net(Some(1), true);
    let mut m = boundary_marking(&net);
    let s = decode_instrument(&net, &m).unwrap();
    assert_eq!((s.vector_index, s.y_true), (0, -1));
    m.set(net.place_id("rec.y=1").unwrap(), true);
    assert_eq!(
        decode_instrument(&net, &m),
        Err(InstrumentError::OneHot {
            wire: "rec.y".into(),
            marked: 2
        })
    );
}

#[test]
fn decode_needs_an_instrument() {
    let net = xor_net(None, false);
    assert!(matches!(
        decode_instrument(&net, net.initial_marking()),
        Err(InstrumentError::Missing(_))
    ));
}

#[test]
fn decode_reads_the_epoch_counter() {
    let net = xor_net(Some(9), true);
    let mut m = boundary_marking(&net);
    assert_eq!(decode_instrument(&net, &m).unwrap().epoch, 1);
    m.set_count(net.place_id(crate::blueprints::EPOCH).unwrap(), 7);
    assert_eq!(decode_instrument(&net, &m).unwrap().epoch, 7);
}

#[test]
fn lockstep_one_epoch_is_exact() {
    let report = lockstep(&NetworkSpec::xor(), 1, &[1, 2]).unwrap();
    for run in &report.runs {
        assert_eq!(run.cycles, 4);
        assert!(run.passed(), "{:?}", run.mismatches.first());
    }
}

#[test]
fn lockstep_localizes_a_corrupted_field() {
    let out = lockstep_seed(&NetworkSpec::xor(), 1, 4, &LockstepOptions::default()).unwrap();
    let mut bad = out.metrics[0].clone();
    bad.weights[2].binary_grad += 5;
    let (field, _, _) = first_mismatch(&bad, &out.metrics[0]).unwrap();
    assert_eq!(field, "weights[2].binary_grad");
}
