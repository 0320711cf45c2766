//! PNML (PT-net grammar) export and import.
//!
//! PT nets have no read arcs, so each read arc is written as a
//! consume/produce pair tagged with a `toolspecific` `<read/>` element.
//! Import turns tagged pairs back into read arcs; untagged pairs stay
//! self-loops. Labels and counter bounds travel in `toolspecific` too.

use std::collections::HashMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;

use super::IoError;
use crate::petri::{ArcKind, Net, NetBuilder, Node, PlaceKind, PlaceRecord};

pub const TOOL: &str = "bnnpn";
pub const PNML_NS: &str = "http://www.pnml.org/version-2009/grammar/pnml";
pub const PTNET_TYPE: &str = "http://www.pnml.org/version-2009/grammar/ptnet";

fn tool_open() -> String {
    format!("<toolspecific tool=\"{TOOL}\" version=\"1\">")
}

pub fn write_pnml(net: &Net, id: &str) -> String {
    let mut o = String::new();
    let ts = tool_open();
    let _ = writeln!(o, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(o, "<pnml xmlns=\"{PNML_NS}\">");
    let _ = writeln!(o, "  <net id=\"{}\" type=\"{PTNET_TYPE}\">", escape(id));
    let _ = writeln!(o, "    <page id=\"page0\">");
    for (i, p) in net.places().iter().enumerate() {
        let _ = writeln!(o, "      <place id=\"p{i}\">");
        let _ = writeln!(o, "        <name><text>{}</text></name>", escape(&p.name));
        let n = net.initial_marking().tokens(net, crate::petri::PlaceId(i as u32));
        if n > 0 {
            let _ = writeln!(o, "        <initialMarking><text>{n}</text></initialMarking>");
        }
        let _ = write!(o, "        {ts}<label>{}</label>", escape(&p.label));
        if let PlaceKind::Counter { bound } = p.kind {
            let _ = write!(o, "<counter bound=\"{bound}\"/>");
        }
        let _ = writeln!(o, "</toolspecific>");
        let _ = writeln!(o, "      </place>");
    }
    for (i, t) in net.transitions().iter().enumerate() {
        let _ = writeln!(o, "      <transition id=\"t{i}\">");
        let _ = writeln!(o, "        <name><text>{}</text></name>", escape(&t.name));
        let _ = writeln!(o, "        {ts}<label>{}</label></toolspecific>", escape(&t.label));
        let _ = writeln!(o, "      </transition>");
    }
    let id_of = |n: Node| match n {
        Node::Place(p) => format!("p{}", p.0),
        Node::Transition(t) => format!("t{}", t.0),
    };
    for (i, a) in net.arcs().iter().enumerate() {
        let (s, t) = (id_of(a.source), id_of(a.target));
        match a.kind {
            ArcKind::Normal => {
                let _ = writeln!(o, "      <arc id=\"a{i}\" source=\"{s}\" target=\"{t}\"/>");
            }
            ArcKind::Read => {
                for (suffix, from, to) in [("in", &s, &t), ("out", &t, &s)] {
                    let _ = writeln!(
                        o,
                        "      <arc id=\"a{i}.{suffix}\" source=\"{from}\" target=\"{to}\">{ts}<read/></toolspecific></arc>"
                    );
                }
            }
        }
    }
    let _ = writeln!(o, "    </page>");
    let _ = writeln!(o, "  </net>");
    let _ = writeln!(o, "</pnml>");
    o
}

/// Minimal element tree.
#[derive(Debug, Default)]
pub(crate) struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
}

impl Element {
    pub fn attr(&self, k: &str) -> Option<&str> {
        self.attrs.iter().find(|(a, _)| a == k).map(|(_, v)| v.as_str())
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    fn descendants<'a>(&'a self, name: &'a str, out: &mut Vec<&'a Element>) {
        for c in &self.children {
            if c.name == name {
                out.push(c);
            }
            c.descendants(name, out);
        }
    }

    /// Text of `<name><text>..</text></name>`-style nesting.
    fn text_of(&self, name: &str) -> Option<&str> {
        self.child(name)?.child("text").map(|t| t.text.trim())
    }

    fn tool(&self) -> Option<&Element> {
        self.children
            .iter()
            .find(|c| c.name == "toolspecific" && c.attr("tool") == Some(TOOL))
    }
}

fn xml_err(e: impl std::fmt::Display) -> IoError {
    IoError::Xml(e.to_string())
}

fn local(name: &[u8]) -> String {
    let s = String::from_utf8_lossy(name);
    s.rsplit(':').next().unwrap_or_default().to_string()
}

pub(crate) fn parse_tree(text: &str) -> Result<Element, IoError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut stack = vec![Element::default()];
    let open = |e: &quick_xml::events::BytesStart| -> Result<Element, IoError> {
        let mut el = Element {
            name: local(e.name().as_ref()),
            ..Element::default()
        };
        for a in e.attributes() {
            let a = a.map_err(xml_err)?;
            el.attrs
                .push((local(a.key.as_ref()), a.unescape_value().map_err(xml_err)?.into_owned()));
        }
        Ok(el)
    };
    loop {
        match reader.read_event().map_err(xml_err)? {
            Event::Start(e) => stack.push(open(&e)?),
            Event::Empty(e) => {
                let el = open(&e)?;
                stack.last_mut().expect("root").children.push(el);
            }
            Event::End(_) => {
                let el = stack.pop().expect("balanced");
                stack
                    .last_mut()
                    .ok_or_else(|| IoError::Xml("unbalanced end tag".into()))?
                    .children
                    .push(el);
            }
            Event::Text(t) => {
                let s = t.unescape().map_err(xml_err)?;
                stack.last_mut().expect("root").text.push_str(&s);
            }
            Event::CData(t) => {
                stack
                    .last_mut()
                    .expect("root")
                    .text
                    .push_str(&String::from_utf8_lossy(&t));
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if stack.len() != 1 {
        return Err(IoError::Xml("unexpected end of document".into()));
    }
    Ok(stack.pop().expect("root"))
}

/// Import the first net of a PNML document.
pub fn read_pnml(text: &str) -> Result<Net, IoError> {
    let root = parse_tree(text)?;
    let pnml = root.child("pnml").ok_or_else(|| IoError::Xml("missing <pnml> root".into()))?;
    let net_el = pnml.child("net").ok_or_else(|| IoError::Xml("missing <net>".into()))?;
    let mut els = Vec::new();
    net_el.descendants("place", &mut els);
    let places = els;
    let mut transitions = Vec::new();
    net_el.descendants("transition", &mut transitions);
    let mut arcs = Vec::new();
    net_el.descendants("arc", &mut arcs);

    let mut b = NetBuilder::new();
    let mut ids: HashMap<String, Node> = HashMap::new();
    let id_of = |e: &Element| {
        e.attr("id")
            .map(str::to_string)
            .ok_or_else(|| IoError::Xml(format!("<{}> without id", e.name)))
    };
    for p in &places {
        let id = id_of(p)?;
        let name = p.text_of("name").unwrap_or(&id).to_string();
        let tool = p.tool();
        let label = tool
            .and_then(|t| t.child("label"))
            .map(|l| l.text.clone())
            .unwrap_or_else(|| name.clone());
        let bound = tool.and_then(|t| t.child("counter")).map(|c| {
            c.attr("bound")
                .and_then(|b| b.parse::<u32>().ok())
                .ok_or_else(|| IoError::Xml(format!("bad counter bound on {id}")))
        });
        let kind = match bound {
            Some(b) => PlaceKind::Counter { bound: b? },
            None => PlaceKind::Standard,
        };
        let tokens: u32 = match p.text_of("initialMarking") {
            Some(s) => s.parse().map_err(|_| IoError::Xml(format!("bad marking on {id}")))?,
            None => 0,
        };
        let pid = b.add_place(PlaceRecord { name, label, kind });
        match (kind, tokens) {
            (_, 0) => {}
            (PlaceKind::Standard, 1) => b.mark(pid),
            (PlaceKind::Standard, n) => return Err(IoError::Xml(format!("place {id} holds {n} tokens"))),
            (PlaceKind::Counter { .. }, n) => b.set_count(pid, n),
        }
        ids.insert(id, Node::Place(pid));
    }
    for t in &transitions {
        let id = id_of(t)?;
        let name = t.text_of("name").unwrap_or(&id).to_string();
        let label = t
            .tool()
            .and_then(|x| x.child("label"))
            .map(|l| l.text.clone())
            .unwrap_or_else(|| name.clone());
        let tid = b.transition(name, label);
        ids.insert(id, Node::Transition(tid));
    }
    for a in &arcs {
        let end = |k: &str| -> Result<Node, IoError> {
            let v = a
                .attr(k)
                .ok_or_else(|| IoError::Xml(format!("arc without {k}")))?;
            ids.get(v)
                .copied()
                .ok_or_else(|| IoError::Xml(format!("arc {k} `{v}` is not a node")))
        };
        let (s, t) = (end("source")?, end("target")?);
        if let Some(w) = a.text_of("inscription") {
            if w != "1" {
                return Err(IoError::Xml(format!("arc weight {w} is not supported")));
            }
        }
        let read = a.tool().is_some_and(|x| x.child("read").is_some());
        match (read, s, t) {
            (true, Node::Place(_), Node::Transition(_)) => b.arc(s, t, ArcKind::Read),
            // Second half of a lowered read arc.
            (true, Node::Transition(_), Node::Place(_)) => {}
            _ => b.arc(s, t, ArcKind::Normal),
        }
    }
    Ok(b.build()?)
}
