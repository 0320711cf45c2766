//! Line-oriented net format.
//!
//! ```text
//! bnnpn-net 1
//! PLACES
//! <name> std|counter:<bound> <label as JSON string>
//! TRANSITIONS
//! <name> <label as JSON string>
//! ARCS
//! in <place> <transition>
//! out <transition> <place>
//! read <place> <transition>
//! MARKING
//! <place> <tokens>
//! PORTS
//! <name> <role> <domain values joined by ',' or -> <place>...
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Arcs keep their
//! order, so a round trip reproduces the net exactly.

use std::fmt::Write as _;

use super::IoError;
use crate::blueprints::{fmt_value, parse_value, Port, PortRole, ValueDomain};
use crate::petri::{ArcKind, Net, NetBuilder, Node, PlaceKind, PlaceRecord};

const MAGIC: &str = "bnnpn-net 1";

pub fn role_name(r: PortRole) -> &'static str {
    match r {
        PortRole::ValueIn => "value-in",
        PortRole::ValueOut => "value-out",
        PortRole::ControlIn => "control-in",
        PortRole::ControlOut => "control-out",
        PortRole::StateOwned => "state-owned",
        PortRole::StateShared => "state-shared",
    }
}

fn parse_role(s: &str) -> Option<PortRole> {
    Some(match s {
        "value-in" => PortRole::ValueIn,
        "value-out" => PortRole::ValueOut,
        "control-in" => PortRole::ControlIn,
        "control-out" => PortRole::ControlOut,
        "state-owned" => PortRole::StateOwned,
        "state-shared" => PortRole::StateShared,
        _ => return None,
    })
}

fn check_name(name: &str) -> Result<&str, IoError> {
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(IoError::Name(name.to_string()));
    }
    Ok(name)
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

pub fn write_native(net: &Net, ports: &[Port]) -> Result<String, IoError> {
    let mut out = String::new();
    let o = &mut out;
    let _ = writeln!(o, "{MAGIC}\nPLACES");
    for p in net.places() {
        let kind = match p.kind {
            PlaceKind::Standard => "std".to_string(),
            PlaceKind::Counter { bound } => format!("counter:{bound}"),
        };
        let _ = writeln!(o, "{} {kind} {}", check_name(&p.name)?, json_str(&p.label));
    }
    let _ = writeln!(o, "TRANSITIONS");
    for t in net.transitions() {
        let _ = writeln!(o, "{} {}", check_name(&t.name)?, json_str(&t.label));
    }
    let _ = writeln!(o, "ARCS");
    for a in net.arcs() {
        let pn = |p: crate::petri::PlaceId| &net.place(p).name;
        let tn = |t: crate::petri::TransitionId| &net.transition(t).name;
        let _ = match (a.source, a.target, a.kind) {
            (Node::Place(p), Node::Transition(t), ArcKind::Normal) => writeln!(o, "in {} {}", pn(p), tn(t)),
            (Node::Place(p), Node::Transition(t), ArcKind::Read) => writeln!(o, "read {} {}", pn(p), tn(t)),
            (Node::Transition(t), Node::Place(p), _) => writeln!(o, "out {} {}", tn(t), pn(p)),
            _ => unreachable!("nets are bipartite"),
        };
    }
    let _ = writeln!(o, "MARKING");
    for p in net.place_ids() {
        let n = net.initial_marking().tokens(net, p);
        if n > 0 {
            let _ = writeln!(o, "{} {n}", net.place(p).name);
        }
    }
    let _ = writeln!(o, "PORTS");
    for port in ports {
        let domain = match &port.domain {
            Some(d) => d.values().iter().map(fmt_value).collect::<Vec<_>>().join(","),
            None => "-".to_string(),
        };
        let _ = write!(o, "{} {} {domain}", check_name(&port.name)?, role_name(port.role));
        for p in &port.places {
            let _ = write!(o, " {p}");
        }
        let _ = writeln!(o);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    Places,
    Transitions,
    Arcs,
    Marking,
    Ports,
}

pub fn read_native(text: &str) -> Result<(Net, Vec<Port>), IoError> {
    let mut b = NetBuilder::new();
    let mut ports = Vec::new();
    let mut section = Section::Header;
    let mut seen_magic = false;
    let mut counters = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let n = i + 1;
        let err = |msg: &str| IoError::Syntax {
            line: n,
            msg: msg.to_string(),
        };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_magic {
            if line != MAGIC {
                return Err(err("expected `bnnpn-net 1` header"));
            }
            seen_magic = true;
            continue;
        }
        let next = match line {
            "PLACES" => Some(Section::Places),
            "TRANSITIONS" => Some(Section::Transitions),
            "ARCS" => Some(Section::Arcs),
            "MARKING" => Some(Section::Marking),
            "PORTS" => Some(Section::Ports),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
        match section {
            Section::Header => return Err(err("content before a section")),
            Section::Places => {
                let (kind, label) = rest.split_once(' ').ok_or_else(|| err("place needs kind and label"))?;
                let label: String = serde_json::from_str(label).map_err(|_| err("bad label"))?;
                let kind = match kind {
                    "std" => PlaceKind::Standard,
                    k => PlaceKind::Counter {
                        bound: k
                            .strip_prefix("counter:")
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err("bad place kind"))?,
                    },
                };
                if kind != PlaceKind::Standard {
                    counters.insert(head.to_string());
                }
                b.add_place(PlaceRecord {
                    name: head.to_string(),
                    label,
                    kind,
                });
            }
            Section::Transitions => {
                let label: String = serde_json::from_str(rest).map_err(|_| err("bad label"))?;
                b.transition(head, label);
            }
            Section::Arcs => {
                let (x, y) = rest.split_once(' ').ok_or_else(|| err("arc needs two ends"))?;
                let place = |s: &str| b.place_id(s).ok_or_else(|| err(&format!("unknown place `{s}`")));
                let trans = |s: &str| b.transition_id(s).ok_or_else(|| err(&format!("unknown transition `{s}`")));
                match head {
                    "in" => {
                        let (p, t) = (place(x)?, trans(y)?);
                        b.consume(p, t)
                    }
                    "read" => {
                        let (p, t) = (place(x)?, trans(y)?);
                        b.read(p, t)
                    }
                    "out" => {
                        let (t, p) = (trans(x)?, place(y)?);
                        b.produce(t, p)
                    }
                    _ => return Err(err("arc kind must be in, out or read")),
                }
            }
            Section::Marking => {
                let p = b.place_id(head).ok_or_else(|| err(&format!("unknown place `{head}`")))?;
                let k: u32 = rest.parse().map_err(|_| err("bad token count"))?;
                if counters.contains(head) {
                    b.set_count(p, k);
                } else if k == 1 {
                    b.mark(p);
                } else {
                    return Err(err("a standard place holds at most one token"));
                }
            }
            Section::Ports => {
                let mut it = rest.split_whitespace();
                let role = it.next().and_then(parse_role).ok_or_else(|| err("bad port role"))?;
                let domain = match it.next().ok_or_else(|| err("port needs a domain"))? {
                    "-" => None,
                    d => {
                        let vals = d
                            .split(',')
                            .map(|v| parse_value(v).ok_or_else(|| err(&format!("bad value `{v}`"))))
                            .collect::<Result<Vec<_>, _>>()?;
                        Some(ValueDomain::new(vals).map_err(|_| err("empty domain"))?)
                    }
                };
                ports.push(Port {
                    name: head.to_string(),
                    role,
                    places: it.map(str::to_string).collect(),
                    domain,
                });
            }
        }
    }
    if !seen_magic {
        return Err(IoError::Syntax {
            line: 0,
            msg: "empty input".into(),
        });
    }
    let net = b.build()?;
    for port in &ports {
        for p in &port.places {
            net.lookup_place(p)?;
        }
    }
    Ok((net, ports))
}
