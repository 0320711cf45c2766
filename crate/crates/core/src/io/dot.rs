//! Graphviz output: places as circles, transitions as boxes, read arcs
//! dashed without arrowheads.

use std::fmt::Write as _;

use crate::petri::{ArcKind, Net, Node};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn write_dot(net: &Net, name: &str) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "digraph {} {{", quote(name));
    let _ = writeln!(o, "  rankdir=LR;");
    for p in net.place_ids() {
        let rec = net.place(p);
        let n = net.initial_marking().tokens(net, p);
        let label = if n > 0 { format!("{}\\n{n}", rec.name) } else { rec.name.clone() };
        let fill = if n > 0 { ", style=filled, fillcolor=gray80" } else { "" };
        let _ = writeln!(o, "  p{} [shape=circle, label={}{fill}];", p.0, quote(&label));
    }
    for t in net.transition_ids() {
        let _ = writeln!(o, "  t{} [shape=box, label={}];", t.0, quote(&net.transition(t).name));
    }
    let id = |n: Node| match n {
        Node::Place(p) => format!("p{}", p.0),
        Node::Transition(t) => format!("t{}", t.0),
    };
    for a in net.arcs() {
        let style = match a.kind {
            ArcKind::Normal => "",
            ArcKind::Read => " [style=dashed, arrowhead=none]",
        };
        let _ = writeln!(o, "  {} -> {}{style};", id(a.source), id(a.target));
    }
    let _ = writeln!(o, "}}");
    o
}
