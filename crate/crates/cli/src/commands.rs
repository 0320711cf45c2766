use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use bnnpn::analyze::{
    billions, estimate, model_sizes, published_full_model, table1_report, table3_presets, unit_sizes, ArchitectureSpec,
    SizeRow,
};
use bnnpn::blueprints::{bnn_segments, fuse_segments, BuildOptions, NetworkSpec, Port};
use bnnpn::engine::{lockstep_seed, run_with, RunOptions, StopCondition, Terminal};
use bnnpn::io::{read_native, write_csv, write_dot, write_json, write_native, write_pnml, Config, IoError};
use bnnpn::petri::Net;
use bnnpn::refbnn::Mode;
use bnnpn::verify::{
    check_1safe, check_deadlock_free, close, verify_tier, CheckEntry, EnvOptions, Tier, TierOptions, Verdict,
};

use crate::{exit, Command, Common, Format, TierArg};

/// Marks errors caused by the user's input files or arguments.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(String);

fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

pub fn error_code(e: &anyhow::Error) -> u8 {
    let input = e.chain().any(|c| {
        c.is::<InputError>() || c.is::<IoError>() || c.is::<std::io::Error>() || c.is::<bnnpn::blueprints::SpecError>()
    });
    if input {
        exit::INPUT
    } else {
        exit::FAILED
    }
}

pub fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Generate(c) => generate(&c),
        Command::Simulate(c) => simulate(&c),
        Command::Verify { common, tier } => verify(&common, tier),
        Command::Compare(c) => compare(&c),
        Command::Analyze { common, archs } => analyze(&common, &archs),
        Command::Export { net, format, out } => export(&net, format, out.as_deref()),
    }
}

enum Input {
    Config(Box<Config>),
    Net(Box<Net>, Vec<Port>),
}

fn read_input(path: Option<&Path>) -> Result<Input> {
    let Some(path) = path else {
        return Ok(Input::Config(Box::default()));
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with("bnnpn-net") {
        let (net, ports) = read_native(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(Input::Net(Box::new(net), ports));
    }
    let cfg = Config::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Input::Config(Box::new(cfg)))
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match read_input(c.config.as_deref())? {
        Input::Config(cfg) => *cfg,
        Input::Net(..) => return Err(input("expected a configuration file, found a net file")),
    };
    if let Some(s) = c.seed {
        cfg.run.seeds = vec![s];
    }
    if let Some(e) = c.epochs {
        cfg.run.epochs = e;
    }
    Ok(cfg)
}

fn spec_of(cfg: &Config) -> Result<NetworkSpec> {
    Ok(cfg.spec()?)
}

/// Write to `out`, or print when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render_net(net: &Net, ports: &[Port], format: Format) -> Result<String> {
    Ok(match format {
        Format::Native => write_native(net, ports)?,
        Format::Pnml => write_pnml(net, "bnn"),
        Format::Dot => write_dot(net, "bnn"),
        Format::Csv | Format::Json => return Err(input("nets are written as native, pnml or dot")),
    })
}

fn generate(c: &Common) -> Result<u8> {
    let cfg = load_config(c)?;
    let spec = spec_of(&cfg)?;
    let segs = bnn_segments(&spec, &cfg.build_options())?;
    let net = fuse_segments(&segs)?;
    let ports = bnnpn::verify::component_ports(&segs);
    let text = render_net(&net, &ports, c.format.unwrap_or(Format::Native))?;
    emit(c.out.as_deref(), &text)?;
    if c.out.is_some() {
        eprintln!("{net}");
    }
    Ok(exit::OK)
}

fn out_dir(c: &Common, cfg: &Config) -> PathBuf {
    c.out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn simulate(c: &Common) -> Result<u8> {
    let cfg = load_config(c)?;
    let spec = spec_of(&cfg)?;
    let seed = *cfg.run.seeds.first().ok_or_else(|| input("run.seeds is empty"))?;
    let opts = BuildOptions {
        instrument: true,
        ..cfg.build_options()
    };
    let net = fuse_segments(&bnn_segments(&spec, &opts)?)?;
    let stop = match spec.epoch_budget {
        Some(_) => StopCondition::quiescence(),
        None => StopCondition::cycles(cfg.run.epochs as u64 * spec.dataset.len() as u64),
    };
    let report = run_with(&net, cfg.policy(seed), stop, RunOptions::default())?;
    let dir = out_dir(c, &cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    if let Terminal::SafetyViolation(v) = &report.terminal {
        let names: Vec<&str> = report
            .trace
            .transitions()
            .map(|t| net.transition(t).name.as_str())
            .collect();
        let path = dir.join("witness.txt");
        fs::write(&path, names.join("\n") + "\n")?;
        eprintln!("safety violation: {v:?}; witness in {}", path.display());
        return Ok(exit::FAILED);
    }
    let (f, h) = (spec.features, spec.hidden);
    if c.format != Some(Format::Json) {
        fs::write(dir.join("metrics.csv"), write_csv(&report.metrics, f, h)?)?;
    }
    if c.format != Some(Format::Csv) {
        fs::write(dir.join("metrics.json"), write_json(&report.metrics))?;
    }
    let max_loss = (1 + h) as f64;
    let mean = report.metrics.iter().map(|m| m.loss as f64 / max_loss).sum::<f64>() / report.metrics.len().max(1) as f64;
    println!(
        "seed {seed}: {} cycles, {} firings, {:?}, running loss {mean:.6}",
        report.cycles, report.firings, report.terminal
    );
    Ok(exit::OK)
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn verdict_code(entries: &[CheckEntry]) -> u8 {
    let failed: Vec<&CheckEntry> = entries.iter().filter(|e| !e.passed()).collect();
    if failed.is_empty() {
        exit::OK
    } else if failed.iter().all(|e| e.report.verdict == Verdict::Inconclusive) {
        exit::INCONCLUSIVE
    } else {
        exit::FAILED
    }
}

fn print_entries(entries: &[CheckEntry]) {
    let w = entries.iter().map(|e| e.subject.len()).max().unwrap_or(0);
    let pw = entries.iter().map(|e| e.report.property.len()).max().unwrap_or(0);
    for e in entries {
        println!(
            "{:4} {:w$}  {:pw$}  expected {:12} got {:12} states {}",
            if e.passed() { "ok" } else { "FAIL" },
            e.subject,
            e.report.property,
            verdict(e.expected),
            verdict(e.report.verdict),
            e.report.states_explored,
        );
    }
}

fn verify(c: &Common, tier: TierArg) -> Result<u8> {
    let entries = match read_input(c.config.as_deref())? {
        Input::Net(net, ports) => verify_net(&net, &ports)?,
        Input::Config(cfg) => {
            let mut cfg = *cfg;
            if let Some(e) = c.epochs {
                cfg.run.epochs = e;
            }
            let spec = spec_of(&cfg)?;
            let mut opts = TierOptions {
                budget: cfg.run.state_budget,
                cycles: cfg.run.system_cycles,
                ..TierOptions::default()
            };
            if let Some(s) = c.seed {
                opts.seeds = vec![s];
            }
            let tier = match tier {
                TierArg::Segment => Tier::Segment,
                TierArg::Component => Tier::Component,
                TierArg::System => Tier::System,
            };
            verify_tier(&spec, tier, &opts)?.entries
        }
    };
    print_entries(&entries);
    let passed = entries.iter().filter(|e| e.passed()).count();
    println!("{passed}/{} checks met their expected verdict", entries.len());
    if let Some(out) = &c.out {
        emit(Some(out), &serde_json::to_string_pretty(&entries)?)?;
    }
    Ok(verdict_code(&entries))
}

/// A net file is closed over its ports and explored exhaustively.
fn verify_net(net: &Net, ports: &[Port]) -> Result<Vec<CheckEntry>> {
    let env = close(net, ports, &EnvOptions::default())?;
    let g = env.explore(TierOptions::default().budget);
    let term = |m: &bnnpn::petri::Marking| env.is_terminal(m);
    Ok(vec![
        CheckEntry {
            subject: "net".into(),
            expected: Verdict::Holds,
            report: check_1safe(&env.net, &g),
        },
        CheckEntry {
            subject: "net".into(),
            expected: Verdict::Holds,
            report: check_deadlock_free(&env.net, &g, Some(&term)),
        },
    ])
}

fn compare(c: &Common) -> Result<u8> {
    let cfg = load_config(c)?;
    let spec = spec_of(&cfg)?;
    let opts = cfg.lockstep_options();
    let mut outcomes = Vec::new();
    for &seed in &cfg.run.seeds {
        let o = lockstep_seed(&spec, cfg.run.epochs, seed, &opts)?;
        println!(
            "seed {seed}: {} cycles, lr 0.{}, {} mismatches{}",
            o.cycles,
            o.lr,
            o.mismatches.len(),
            if o.passed() { "" } else { " FAIL" }
        );
        for m in o.mismatches.iter().take(20) {
            println!("  cycle {:5}  {:32}  pn {:>12}  ref {:>12}", m.cycle, m.field, m.pn, m.reference);
        }
        outcomes.push(o);
    }
    if let Some(out) = &c.out {
        let summary: Vec<_> = outcomes
            .iter()
            .map(|o| {
                json!({
                    "seed": o.seed,
                    "cycles": o.cycles,
                    "firings": o.firings,
                    "lr_tenths": o.lr,
                    "initial_weights": o.initial_weights.iter().map(|w| format!("0x{w}")).collect::<Vec<_>>(),
                    "mismatches": o.mismatches,
                })
            })
            .collect();
        emit(Some(out), &serde_json::to_string_pretty(&summary)?)?;
    }
    let all_ok = outcomes.iter().all(|o| o.passed());
    Ok(match (opts.mode, all_ok) {
        (_, true) | (Mode::NativeFloat, false) => exit::OK,
        (Mode::PnExact, false) => exit::FAILED,
    })
}

fn parse_arch(s: &str) -> Result<ArchitectureSpec> {
    let bad = || input(format!("architecture `{s}` is not NAME:INPUTS:L1,L2,..."));
    let mut it = s.splitn(3, ':');
    let (Some(name), Some(inputs), Some(layers)) = (it.next(), it.next(), it.next()) else {
        return Err(bad());
    };
    let inputs = inputs.parse().map_err(|_| bad())?;
    let layers = layers
        .split(',')
        .map(|l| l.trim().parse().map_err(|_| bad()))
        .collect::<Result<Vec<u64>>>()?;
    let a = ArchitectureSpec::new(name, inputs, &layers);
    a.validate().map_err(|e| input(e.to_string()))?;
    Ok(a)
}

fn text_table(rows: &[SizeRow]) -> String {
    let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(7);
    let mut s = format!("{:w$}  {:>8}  {:>11}  {:>8}  {:>8}\n", "Segment", "Places", "Transitions", "Arcs", "Total");
    for r in rows {
        s += &format!(
            "{:w$}  {:>8}  {:>11}  {:>8}  {:>8}\n",
            r.name, r.places, r.transitions, r.arcs, r.total
        );
    }
    s
}

fn analyze(c: &Common, archs: &[String]) -> Result<u8> {
    let cfg = load_config(c)?;
    let spec = spec_of(&cfg)?;
    let rows = table1_report(&spec)?;
    let (core, inst) = model_sizes(&spec)?;
    let published = published_full_model();
    let dev = core.deviation(&published);
    let units = unit_sizes(&published, 2, 2)?;
    let mut list = table3_presets();
    for a in archs {
        list.push(parse_arch(a)?);
    }
    let est = list.iter().map(|a| estimate(a, &units)).collect::<Result<Vec<_>, _>>()?;

    let text = match c.format {
        None => {
            let mut s = text_table(&rows);
            s += &format!("{:26}  {:>8}  {:>11}  {:>8}  {:>8}\n", inst.name, inst.places, inst.transitions, inst.arcs, inst.total);
            s += &format!(
                "\ndeviation of the full model from {}/{}/{}/{}: places {:+.1}%, transitions {:+.1}%, arcs {:+.1}%, total {:+.1}%\n\n",
                published.places, published.transitions, published.arcs, published.total, dev[0], dev[1], dev[2], dev[3]
            );
            s += &format!("{:24}  {:>8}  {:>11}  {:>8}  {:>8}   (x10^9)\n", "Architecture", "Places", "Transitions", "Arcs", "Total");
            for r in &est {
                s += &format!(
                    "{:24}  {:>8}  {:>11}  {:>8}  {:>8}\n",
                    r.name,
                    billions(r.places),
                    billions(r.transitions),
                    billions(r.arcs),
                    billions(r.total)
                );
            }
            s
        }
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["table", "name", "places", "transitions", "arcs", "total"])?;
            for (table, r) in rows.iter().map(|r| ("size", r)).chain([("size", &inst)]) {
                w.write_record([table, &r.name, &r.places.to_string(), &r.transitions.to_string(), &r.arcs.to_string(), &r.total.to_string()])?;
            }
            for r in &est {
                w.write_record(["estimate_1e9", &r.name, &billions(r.places), &billions(r.transitions), &billions(r.arcs), &billions(r.total)])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?
        }
        Some(Format::Json) => serde_json::to_string_pretty(&json!({
            "sizes": rows,
            "instrumented": inst,
            "deviation_percent": { "places": dev[0], "transitions": dev[1], "arcs": dev[2], "total": dev[3] },
            "estimates": est,
        }))? + "\n",
        Some(f) => bail!(InputError(format!("analyze writes text, csv or json, not {f:?}"))),
    };
    emit(c.out.as_deref(), &text)?;
    Ok(exit::OK)
}

fn export(path: &Path, format: Format, out: Option<&Path>) -> Result<u8> {
    let (net, ports) = match read_input(Some(path))? {
        Input::Net(net, ports) => (net, ports),
        Input::Config(_) => return Err(input(format!("{} is not a native net file", path.display()))),
    };
    emit(out, &render_net(&net, &ports, format)?)?;
    Ok(exit::OK)
}
