//! Bounded labeled Petri nets and their variant language.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod parse;
mod playout;

pub use parse::{parse_net, read_net, NetFormat};
pub use playout::{enumerate_variants, Completion, PlayoutConfig, SystemVariantSet};

pub type TransitionIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    /// `None` marks a silent transition.
    pub label: Option<String>,
}

impl Transition {
    pub fn visible(id: impl Into<String>, label: impl Into<String>) -> Self {
        Transition {
            id: id.into(),
            label: Some(label.into()),
        }
    }

    pub fn silent(id: impl Into<String>) -> Self {
        Transition {
            id: id.into(),
            label: None,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub source: String,
    pub target: String,
    pub weight: u32,
}

impl Arc {
    pub fn new(source: impl Into<String>, target: impl Into<String>, weight: u32) -> Self {
        Arc {
            source: source.into(),
            target: target.into(),
            weight,
        }
    }
}

/// Token counts indexed by place position in the owning net.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(Vec<u32>);

impl Marking {
    pub fn empty(places: usize) -> Self {
        Marking(vec![0; places])
    }

    pub fn tokens(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, place: usize) -> u32 {
        self.0[place]
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }
}

impl fmt::Debug for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A place/transition net with labeled transitions.
///
/// Places and transitions share one identifier namespace. Arcs always
/// connect a place with a transition and every transition has at least one
/// input place.
#[derive(Debug, Clone)]
pub struct PetriNet {
    places: Vec<String>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
    initial: Marking,
    finals: Option<Vec<Marking>>,
    place_index: HashMap<String, usize>,
    transition_index: HashMap<String, usize>,
    pre: Vec<Vec<(usize, u32)>>,
    post: Vec<Vec<(usize, u32)>>,
}

impl PetriNet {
    /// Builds and validates a net. `finals = None` means completion is
    /// detected by dead markings.
    pub fn new(
        places: Vec<String>,
        transitions: Vec<Transition>,
        arcs: Vec<Arc>,
        initial: &BTreeMap<String, u32>,
        finals: Option<Vec<BTreeMap<String, u32>>>,
    ) -> Result<Self> {
        let mut place_index = HashMap::new();
        for (i, p) in places.iter().enumerate() {
            if place_index.insert(p.clone(), i).is_some() {
                return Err(Error::InvalidNet(format!("duplicate place id `{p}`")));
            }
        }
        let mut transition_index = HashMap::new();
        for (i, t) in transitions.iter().enumerate() {
            if place_index.contains_key(&t.id) || transition_index.insert(t.id.clone(), i).is_some()
            {
                return Err(Error::InvalidNet(format!("duplicate node id `{}`", t.id)));
            }
            if t.label.as_deref() == Some("") {
                return Err(Error::InvalidNet(format!(
                    "transition `{}` has an empty label; use null for silent transitions",
                    t.id
                )));
            }
        }

        let mut pre = vec![Vec::new(); transitions.len()];
        let mut post = vec![Vec::new(); transitions.len()];
        for a in &arcs {
            if a.weight == 0 {
                return Err(Error::InvalidNet(format!(
                    "arc {} -> {} has zero multiplicity",
                    a.source, a.target
                )));
            }
            match (
                place_index.get(&a.source),
                transition_index.get(&a.source),
                place_index.get(&a.target),
                transition_index.get(&a.target),
            ) {
                (Some(&p), None, None, Some(&t)) => add_weight(&mut pre[t], p, a.weight),
                (None, Some(&t), Some(&p), None) => add_weight(&mut post[t], p, a.weight),
                (None, None, _, _) => {
                    return Err(Error::InvalidNet(format!(
                        "dangling arc: unknown node `{}`",
                        a.source
                    )))
                }
                (_, _, None, None) => {
                    return Err(Error::InvalidNet(format!(
                        "dangling arc: unknown node `{}`",
                        a.target
                    )))
                }
                _ => {
                    return Err(Error::InvalidNet(format!(
                        "arc {} -> {} does not connect a place with a transition",
                        a.source, a.target
                    )))
                }
            }
        }
        for (t, inputs) in pre.iter().enumerate() {
            if inputs.is_empty() {
                return Err(Error::InvalidNet(format!(
                    "transition `{}` has no input place",
                    transitions[t].id
                )));
            }
        }

        let to_marking = |m: &BTreeMap<String, u32>| -> Result<Marking> {
            let mut tokens = vec![0; places.len()];
            for (p, &n) in m {
                let &i = place_index.get(p).ok_or_else(|| {
                    Error::InvalidNet(format!("marking references unknown place `{p}`"))
                })?;
                tokens[i] = n;
            }
            Ok(Marking(tokens))
        };
        let initial = to_marking(initial)?;
        if initial.is_empty() {
            return Err(Error::MissingInitialMarking);
        }
        let finals = match finals {
            None => None,
            Some(fs) if fs.is_empty() => {
                return Err(Error::InvalidNet(
                    "final marking set must not be empty".into(),
                ))
            }
            Some(fs) => Some(fs.iter().map(to_marking).collect::<Result<Vec<_>>>()?),
        };

        Ok(PetriNet {
            places,
            transitions,
            arcs,
            initial,
            finals,
            place_index,
            transition_index,
            pre,
            post,
        })
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn final_markings(&self) -> Option<&[Marking]> {
        self.finals.as_deref()
    }

    pub fn place(&self, id: &str) -> Option<usize> {
        self.place_index.get(id).copied()
    }

    pub fn transition(&self, id: &str) -> Option<TransitionIdx> {
        self.transition_index.get(id).copied()
    }

    /// Distinct labels of visible transitions.
    pub fn visible_labels(&self) -> std::collections::BTreeSet<String> {
        self.transitions
            .iter()
            .filter_map(|t| t.label.clone())
            .collect()
    }

    /// Builds a marking from place names; unknown places are an error.
    pub fn marking<'a>(&self, tokens: impl IntoIterator<Item = (&'a str, u32)>) -> Result<Marking> {
        let mut m = Marking::empty(self.places.len());
        for (p, n) in tokens {
            let i = self
                .place(p)
                .ok_or_else(|| Error::InvalidNet(format!("unknown place `{p}`")))?;
            m.0[i] = n;
        }
        Ok(m)
    }

    pub fn is_enabled(&self, m: &Marking, t: TransitionIdx) -> bool {
        self.pre[t].iter().all(|&(p, w)| m.0[p] >= w)
    }

    /// Transitions enabled in `m`, in declaration order.
    pub fn enabled(&self, m: &Marking) -> Vec<TransitionIdx> {
        (0..self.transitions.len())
            .filter(|&t| self.is_enabled(m, t))
            .collect()
    }

    pub fn fire(&self, m: &Marking, t: TransitionIdx) -> Result<Marking> {
        if t >= self.transitions.len() {
            return Err(Error::InvalidNet(format!("no transition with index {t}")));
        }
        if !self.is_enabled(m, t) {
            return Err(Error::NotEnabled(self.transitions[t].id.clone()));
        }
        Ok(self.fire_unchecked(m, t))
    }

    pub(crate) fn fire_unchecked(&self, m: &Marking, t: TransitionIdx) -> Marking {
        let mut next = m.clone();
        for &(p, w) in &self.pre[t] {
            next.0[p] -= w;
        }
        for &(p, w) in &self.post[t] {
            next.0[p] += w;
        }
        next
    }

    pub fn is_dead(&self, m: &Marking) -> bool {
        !(0..self.transitions.len()).any(|t| self.is_enabled(m, t))
    }
}

fn add_weight(arcs: &mut Vec<(usize, u32)>, place: usize, weight: u32) {
    match arcs.iter_mut().find(|(p, _)| *p == place) {
        Some((_, w)) => *w += weight,
        None => arcs.push((place, weight)),
    }
}
