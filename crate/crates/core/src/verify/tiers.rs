//! Segment, component and system verification suites.

use serde::{Deserialize, Serialize};

use super::{
    check_1safe, check_1safe_run, check_bounded, check_bounded_trace, check_deadlock_free, check_mutex,
    check_precedence, check_reversibility, check_reversibility_trace, close, component_ports, EnvOptions,
    PropertyReport, Verdict, VerifyError,
};
use crate::bitfloat::Fp32Bits;
use crate::blueprints::{
    bnn_segments, compose_bnn, fuse_segments, gen_metric_instrument, hidden_neuron, int, value_place, BuildOptions,
    DataRow, InstrumentPlan, Layout, NetworkSpec, PortRole, Segment, WeightInit, BUDGET, EPOCH, NEXT_VECTOR,
};
use crate::engine::{run_with, RunOptions, SchedulePolicy, StopCondition, Terminal};
use crate::petri::{Marking, Net, TransitionId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Segment,
    Component,
    System,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierOptions {
    /// State budget per exploration.
    pub budget: usize,
    /// Seeds of the system-tier runs.
    pub seeds: Vec<u64>,
    /// Cycles per system-tier run.
    pub cycles: u64,
    /// Register contents for segments reading weight bits.
    pub weights: Vec<Fp32Bits>,
}

impl Default for TierOptions {
    fn default() -> Self {
        TierOptions {
            budget: 10_000_000,
            seeds: (0..10).collect(),
            cycles: 40,
            weights: weight_samples(),
        }
    }
}

/// Register contents covering sign, zero, subnormals, the STE boundary and
/// saturation.
pub fn weight_samples() -> Vec<Fp32Bits> {
    let mut v: Vec<Fp32Bits> = [0.5f32, -0.5, 0.0, -0.0, 1.0, -1.0, 1.5, -1.9, 0.099_999_99, 1.0000001]
        .iter()
        .map(|&x| Fp32Bits::from_f32(x).expect("sample below 2"))
        .collect();
    v.push(Fp32Bits::new(1).expect("subnormal"));
    v.push(Fp32Bits::new(0x8000_0001).expect("subnormal"));
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub subject: String,
    pub expected: Verdict,
    pub report: PropertyReport,
}

impl CheckEntry {
    pub fn passed(&self) -> bool {
        self.report.verdict == self.expected
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierReport {
    pub tier: Tier,
    pub entries: Vec<CheckEntry>,
}

impl TierReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(CheckEntry::passed)
    }
}

struct Suite {
    entries: Vec<CheckEntry>,
}

impl Suite {
    fn push(&mut self, subject: &str, expected: Verdict, report: PropertyReport) {
        self.entries.push(CheckEntry {
            subject: subject.to_string(),
            expected,
            report,
        });
    }

    /// Close `net` over `ports`, explore, and record 1-safety,
    /// deadlock-freedom and binarization mutexes.
    fn closed(
        &mut self,
        subject: &str,
        net: &Net,
        ports: &[crate::blueprints::Port],
        env: &EnvOptions,
        budget: usize,
    ) -> Result<(), VerifyError> {
        let e = close(net, ports, env)?;
        let g = e.explore(budget);
        self.push(subject, Verdict::Holds, check_1safe(&e.net, &g));
        let term = |m: &Marking| e.is_terminal(m);
        self.push(subject, Verdict::Holds, check_deadlock_free(&e.net, &g, Some(&term)));
        for p in ports.iter().filter(|p| p.role == PortRole::ValueOut && p.name.starts_with("wb")) {
            let pair: Vec<_> = [-1, 1]
                .iter()
                .filter_map(|&v| e.net.place_id(&value_place(&p.name, &int(v))))
                .collect();
            self.push(&format!("{subject} {}", p.name), Verdict::Holds, check_mutex(&e.net, &g, &pair));
        }
        if subject == "load" {
            self.push(subject, Verdict::Holds, check_reversibility(&e.net, &g));
        }
        Ok(())
    }
}

fn reads_bits(seg: &Segment) -> Option<usize> {
    seg.ports
        .iter()
        .find(|p| matches!(p.role, PortRole::StateShared | PortRole::StateOwned))
        .and_then(|p| p.name.strip_prefix('w')?.strip_suffix(".bits")?.parse().ok())
}

fn sample_name(w: Fp32Bits) -> String {
    format!("{:#010x}", w.raw())
}

/// Smallest spec with the shape of the instrument: one feature, one hidden
/// neuron.
fn tiny_spec(spec: &NetworkSpec) -> NetworkSpec {
    NetworkSpec {
        features: 1,
        hidden: 1,
        dataset: vec![DataRow::new(&[0], -1), DataRow::new(&[1], 1)],
        initial_weights: None,
        ..spec.clone()
    }
}

fn segment_tier(spec: &NetworkSpec, opts: &TierOptions, suite: &mut Suite) -> Result<(), VerifyError> {
    let build = BuildOptions {
        instrument: false,
        weight_init: WeightInit::Preset,
    };
    for seg in bnn_segments(spec, &build)? {
        if seg.net.num_transitions() == 0 {
            continue;
        }
        let update = seg.name.starts_with('u') && seg.name[1..].parse::<usize>().is_ok();
        match reads_bits(&seg) {
            Some(k) => {
                for &w in &opts.weights {
                    let env = EnvOptions {
                        one_shot: update,
                        weights: vec![(k, w)],
                        ..Default::default()
                    };
                    let subject = format!("{} @ {}", seg.name, sample_name(w));
                    suite.closed(&subject, &seg.net, &seg.ports, &env, opts.budget)?;
                }
            }
            None => suite.closed(&seg.name, &seg.net, &seg.ports, &EnvOptions::default(), opts.budget)?,
        }
    }

    // The instrument's snapshot chains interleave per weight, so it is
    // checked on the smallest model with fixed recorder contents.
    let tiny = tiny_spec(spec);
    let seg = gen_metric_instrument(&tiny)?;
    let plan = InstrumentPlan::new(&tiny);
    let mut env = EnvOptions {
        one_shot: true,
        weights: (0..plan.num_weights).map(|k| (k, opts.weights[0])).collect(),
        ..Default::default()
    };
    for g in &plan.groups {
        env.undriven.push(g.wire.clone());
        if g.flushed && !(g.wire.starts_with("rec.w") && g.wire.contains(".b")) {
            env.preset.push(value_place(&g.wire, &g.domain.values()[0]));
        }
    }
    suite.closed("instrument", &seg.net, &seg.ports, &env, opts.budget)
}

fn component_tier(spec: &NetworkSpec, opts: &TierOptions, suite: &mut Suite) -> Result<(), VerifyError> {
    let build = BuildOptions {
        instrument: false,
        weight_init: WeightInit::Preset,
    };
    let layout = Layout::new(spec);
    let segs = bnn_segments(spec, &build)?;
    let pick = |pred: &dyn Fn(&str) -> bool| -> Vec<Segment> { segs.iter().filter(|s| pred(&s.name)).cloned().collect() };

    let mut groups: Vec<(String, Vec<Segment>)> = vec![("inputs".into(), pick(&|n| n == "load"))];
    for i in 0..layout.hidden {
        groups.push((format!("hidden{i}"), hidden_neuron(spec, i, &build)?));
    }
    groups.push(("output".into(), pick(&|n| n.starts_with("zsum") || n.starts_with("pred"))));
    groups.push(("loss".into(), pick(&|n| n.starts_with("hinge") || n == "loss_ack" || n == "fork")));
    for k in 0..layout.num_weights() {
        let names = [format!("grad{k}"), format!("real{k}"), format!("lrg{k}"), "lr".to_string()];
        groups.push((format!("gradient{k}"), pick(&|n| names.iter().any(|m| m == n))));
    }
    for (name, group) in &groups {
        let net = fuse_segments(group)?;
        let ports = component_ports(group);
        suite.closed(name, &net, &ports, &EnvOptions::default(), opts.budget)?;
    }

    // The loader with a three-epoch budget ends by design once the budget
    // is spent, and cannot return to its initial marking.
    let budgeted = NetworkSpec {
        epoch_budget: Some(3),
        ..spec.clone()
    };
    let group: Vec<Segment> = bnn_segments(&budgeted, &build)?
        .into_iter()
        .filter(|s| s.name == "load" || s.name == "budget")
        .collect();
    let net = fuse_segments(&group)?;
    let ports = component_ports(&group);
    let e = close(&net, &ports, &EnvOptions::default())?;
    let g = e.explore(opts.budget);
    let budget = e.net.lookup_place(BUDGET)?;
    let subject = "inputs+budget";
    suite.push(subject, Verdict::Holds, check_1safe(&e.net, &g));
    let spent = |m: &Marking| m.count(budget) == 0;
    suite.push(subject, Verdict::Holds, check_deadlock_free(&e.net, &g, Some(&spent)));
    suite.push(subject, Verdict::Holds, check_bounded(&e.net, &g, budget, 3));
    suite.push(subject, Verdict::Violated, check_reversibility(&e.net, &g));
    Ok(())
}

fn named(net: &Net, pred: impl Fn(&str) -> bool) -> Vec<TransitionId> {
    net.transition_ids().filter(|&t| pred(&net.transition(t).name)).collect()
}

fn system_tier(spec: &NetworkSpec, opts: &TierOptions, suite: &mut Suite) -> Result<(), VerifyError> {
    let net = compose_bnn(
        spec,
        &BuildOptions {
            instrument: true,
            weight_init: WeightInit::FreeChoice,
        },
    )?;
    let layout = Layout::new(spec);
    let reset = net.lookup_transition(NEXT_VECTOR)?;
    let sum = named(&net, |n| n.starts_with("zsum["));
    let pred = named(&net, |n| n.starts_with("pred["));
    let loss = named(&net, |n| n.starts_with("hinge.clip["));
    let mut chain: Vec<(String, Vec<TransitionId>, Vec<TransitionId>)> = vec![
        ("output-sum < prediction".into(), sum, pred.clone()),
        ("prediction < loss".into(), pred, loss.clone()),
    ];
    for k in 0..layout.num_weights() {
        let grad = named(&net, |n| n.starts_with(&format!("grad{k}[")));
        let done = named(&net, |n| n == format!("u{k}.done") || n == format!("u{k}.bypass"));
        chain.push((format!("loss < gradient{k}"), loss.clone(), grad.clone()));
        chain.push((format!("gradient{k} < update{k} done"), grad, done.clone()));
        chain.push((format!("update{k} done < next_vector"), done, vec![reset]));
    }
    let epoch = net.place_id(EPOCH);
    for &seed in &opts.seeds {
        let r = run_with(
            &net,
            SchedulePolicy::UniformRandom { seed },
            StopCondition::cycles(opts.cycles),
            RunOptions {
                record_trace: true,
                decode: true,
            },
        )?;
        let subject = format!("system seed {seed}");
        suite.push(&subject, Verdict::Holds, check_1safe_run(&r));
        let progressed = r.terminal == Terminal::CycleLimit
            || (r.terminal == Terminal::Quiescent && spec.epoch_budget.is_some());
        let mut progress = PropertyReport {
            property: "progress".into(),
            verdict: if progressed { Verdict::Holds } else { Verdict::Violated },
            witness: None,
            states_explored: r.firings as usize,
            detail: Some(format!("{} cycles, terminal {:?}", r.cycles, r.terminal)),
        };
        if !progressed {
            progress.witness = Some(r.trace.clone());
        }
        suite.push(&subject, Verdict::Holds, progress);
        for (name, before, after) in &chain {
            let mut rep = check_precedence(&r.trace, before, after, reset);
            rep.property = format!("precedence {name}");
            suite.push(&subject, Verdict::Holds, rep);
        }
        if let Some(p) = epoch {
            let bound = spec.epoch_budget.unwrap_or((opts.cycles as usize).div_ceil(spec.dataset.len()) as u32);
            suite.push(&subject, Verdict::Holds, check_bounded_trace(&net, &r.trace, p, bound));
        }
        suite.push(&subject, Verdict::Violated, check_reversibility_trace(&net, &r.trace));
    }
    Ok(())
}

/// Run the property suite of `tier` for `spec`.
pub fn verify_tier(spec: &NetworkSpec, tier: Tier, opts: &TierOptions) -> Result<TierReport, VerifyError> {
    spec.validate().map_err(crate::blueprints::BlueprintError::from)?;
    let mut suite = Suite { entries: Vec::new() };
    // The budget counter is checked on its own in the component tier.
    let unbudgeted = NetworkSpec {
        epoch_budget: None,
        ..spec.clone()
    };
    match tier {
        Tier::Segment => segment_tier(&unbudgeted, opts, &mut suite)?,
        Tier::Component => component_tier(&unbudgeted, opts, &mut suite)?,
        Tier::System => system_tier(spec, opts, &mut suite)?,
    }
    Ok(TierReport {
        tier,
        entries: suite.entries,
    })
}
