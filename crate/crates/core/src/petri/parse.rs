use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use super::{Arc, PetriNet, Transition};
use crate::error::{Error, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetFormat {
    Pnml,
    JsonNet,
}

impl NetFormat {
    /// Guesses the format from a file extension (`.pnml`/`.xml` or `.json`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pnml" | "xml" => Some(NetFormat::Pnml),
            "json" => Some(NetFormat::JsonNet),
            _ => None,
        }
    }
}

pub fn parse_net(source: &[u8], format: NetFormat) -> Result<PetriNet> {
    let text = std::str::from_utf8(source).map_err(|e| Error::MalformedNet {
        location: Location(format!("byte {}", e.valid_up_to())),
        message: "document is not valid UTF-8".into(),
    })?;
    match format {
        NetFormat::Pnml => parse_pnml(text),
        NetFormat::JsonNet => parse_json(text),
    }
}

pub fn read_net(path: impl AsRef<Path>) -> Result<PetriNet> {
    let path = path.as_ref();
    let format = NetFormat::from_path(path).ok_or_else(|| {
        Error::InvalidNet(format!("cannot infer net format of {}", path.display()))
    })?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_net(&bytes, format)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonArc {
    Weighted(String, String, u32),
    Plain(String, String),
}

#[derive(Deserialize)]
struct JsonTransition {
    id: String,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonNet {
    places: Vec<String>,
    transitions: Vec<JsonTransition>,
    arcs: Vec<JsonArc>,
    #[serde(default)]
    initial: Option<BTreeMap<String, u32>>,
    #[serde(default, rename = "final")]
    finals: Option<Vec<BTreeMap<String, u32>>>,
}

fn parse_json(text: &str) -> Result<PetriNet> {
    let doc: JsonNet = serde_json::from_str(text).map_err(|e| Error::MalformedNet {
        location: Location::line_col(e.line(), e.column()),
        message: e.to_string(),
    })?;

    let nodes: HashSet<&str> = doc
        .places
        .iter()
        .map(String::as_str)
        .chain(doc.transitions.iter().map(|t| t.id.as_str()))
        .collect();
    let mut arcs = Vec::with_capacity(doc.arcs.len());
    for (i, a) in doc.arcs.into_iter().enumerate() {
        let (src, dst, w) = match a {
            JsonArc::Weighted(s, d, w) => (s, d, w),
            JsonArc::Plain(s, d) => (s, d, 1),
        };
        for end in [&src, &dst] {
            if !nodes.contains(end.as_str()) {
                return Err(Error::DanglingArc {
                    location: Location(format!("/arcs/{i}")),
                    endpoint: end.clone(),
                });
            }
        }
        arcs.push(Arc::new(src, dst, w));
    }
    let initial = doc
        .initial
        .ok_or_else(|| Error::MissingInitialMarkingAt(Location("/initial".into())))?;
    let transitions = doc
        .transitions
        .into_iter()
        .map(|t| Transition {
            id: t.id,
            label: t.label.filter(|l| !l.is_empty()),
        })
        .collect();
    PetriNet::new(doc.places, transitions, arcs, &initial, doc.finals)
}

fn pnml_location(doc: &roxmltree::Document, node: roxmltree::Node) -> Location {
    let pos = doc.text_pos_at(node.range().start);
    Location::line_col(pos.row as usize, pos.col as usize)
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().name() == name)
}

/// Text of `<name><text>…</text></name>`-style wrappers.
fn wrapped_text<'a>(node: roxmltree::Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name)
        .and_then(|n| child(n, "text"))
        .and_then(|t| t.text())
        .map(str::trim)
}

fn parse_count(doc: &roxmltree::Document, node: roxmltree::Node, text: &str) -> Result<u32> {
    text.trim().parse::<u32>().map_err(|_| Error::MalformedNet {
        location: pnml_location(doc, node),
        message: format!("expected a non-negative token count, found {text:?}"),
    })
}

fn is_invisible(node: roxmltree::Node) -> bool {
    node.children()
        .filter(|c| c.is_element() && c.tag_name().name() == "toolspecific")
        .any(|ts| {
            ts.attribute("activity") == Some("$invisible$")
                || child(ts, "invisible")
                    .and_then(|n| n.text())
                    .is_some_and(|t| t.trim().eq_ignore_ascii_case("true"))
        })
}

fn parse_pnml(text: &str) -> Result<PetriNet> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        Error::MalformedNet {
            location: Location::line_col(pos.row as usize, pos.col as usize),
            message: e.to_string(),
        }
    })?;
    let net = doc
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "net")
        .ok_or_else(|| Error::MalformedNet {
            location: Location::line_col(1, 1),
            message: "no <net> element".into(),
        })?;

    let mut places = Vec::new();
    let mut transitions = Vec::new();
    let mut arc_nodes = Vec::new();
    let mut initial = BTreeMap::new();
    let mut finals: Option<Vec<BTreeMap<String, u32>>> = None;

    for node in net.descendants().filter(|n| n.is_element()) {
        let id = || {
            node.attribute("id")
                .map(str::to_string)
                .ok_or_else(|| Error::MalformedNet {
                    location: pnml_location(&doc, node),
                    message: format!("<{}> without id", node.tag_name().name()),
                })
        };
        match node.tag_name().name() {
            "place" if node.attribute("idref").is_none() => {
                let id = id()?;
                if let Some(t) = wrapped_text(node, "initialMarking") {
                    let n = parse_count(&doc, node, t)?;
                    if n > 0 {
                        initial.insert(id.clone(), n);
                    }
                }
                places.push(id);
            }
            "transition" => {
                let id = id()?;
                let label = wrapped_text(node, "name")
                    .filter(|l| !l.is_empty())
                    .map(str::to_string);
                let label = if is_invisible(node) { None } else { label };
                transitions.push(Transition { id, label });
            }
            "arc" => arc_nodes.push(node),
            "finalmarkings" => {
                let mut markings = Vec::new();
                for m in node
                    .children()
                    .filter(|c| c.is_element() && c.tag_name().name() == "marking")
                {
                    let mut marking = BTreeMap::new();
                    for p in m
                        .children()
                        .filter(|c| c.is_element() && c.tag_name().name() == "place")
                    {
                        let idref = p.attribute("idref").ok_or_else(|| Error::MalformedNet {
                            location: pnml_location(&doc, p),
                            message: "final marking place without idref".into(),
                        })?;
                        let n = match child(p, "text").and_then(|t| t.text()) {
                            Some(t) => parse_count(&doc, p, t)?,
                            None => 1,
                        };
                        if n > 0 {
                            marking.insert(idref.to_string(), n);
                        }
                    }
                    markings.push(marking);
                }
                if !markings.is_empty() {
                    finals = Some(markings);
                }
            }
            _ => {}
        }
    }

    let nodes: HashSet<&str> = places
        .iter()
        .map(String::as_str)
        .chain(transitions.iter().map(|t: &Transition| t.id.as_str()))
        .collect();
    let mut arcs = Vec::with_capacity(arc_nodes.len());
    for node in arc_nodes {
        let location = pnml_location(&doc, node);
        let (Some(src), Some(dst)) = (node.attribute("source"), node.attribute("target")) else {
            return Err(Error::MalformedNet {
                location,
                message: "arc without source or target".into(),
            });
        };
        for end in [src, dst] {
            if !nodes.contains(end) {
                return Err(Error::DanglingArc {
                    location: location.clone(),
                    endpoint: end.to_string(),
                });
            }
        }
        let weight = match wrapped_text(node, "inscription") {
            Some(t) => parse_count(&doc, node, t)?,
            None => 1,
        };
        arcs.push(Arc::new(src, dst, weight));
    }
    if initial.is_empty() {
        return Err(Error::MissingInitialMarkingAt(pnml_location(&doc, net)));
    }
    PetriNet::new(places, transitions, arcs, &initial, finals)
}
