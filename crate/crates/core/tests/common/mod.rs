//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use vf_core::petri::{Arc, Completion, Marking, Transition};
use vf_core::{enumerate_variants, PetriNet, PlayoutConfig};

const ORACLE_STATE_LIMIT: usize = 10_000;

struct Graph {
    edges: Vec<Vec<(Option<String>, usize)>>,
    complete: Vec<bool>,
}

fn reachability_graph(net: &PetriNet, completion: Completion) -> Graph {
    let use_finals = match completion {
        Completion::Auto => net.final_markings().is_some(),
        Completion::FinalMarkings => true,
        Completion::DeadMarkings => false,
    };
    let mut index: HashMap<Marking, usize> = HashMap::new();
    let mut states = vec![net.initial_marking().clone()];
    index.insert(states[0].clone(), 0);
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0]);
    while let Some(s) = queue.pop_front() {
        let mut out = Vec::new();
        for t in net.enabled(&states[s]) {
            let next = net.fire(&states[s], t).unwrap();
            let id = *index.entry(next.clone()).or_insert_with(|| {
                states.push(next);
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            out.push((net.transitions()[t].label.clone(), id));
        }
        edges.push(out);
        assert!(
            states.len() <= ORACLE_STATE_LIMIT,
            "oracle reachability graph too large"
        );
    }
    let complete = states
        .iter()
        .map(|m| {
            if use_finals {
                net.final_markings().unwrap().contains(m)
            } else {
                net.is_dead(m)
            }
        })
        .collect();
    Graph { edges, complete }
}

fn silent_closure(g: &Graph, from: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = from.clone();
    let mut stack: Vec<usize> = from.iter().copied().collect();
    while let Some(s) = stack.pop() {
        for (label, t) in &g.edges[s] {
            if label.is_none() && out.insert(*t) {
                stack.push(*t);
            }
        }
    }
    out
}

/// Every visible word of length `1..=max_len` whose state set after the word
/// contains a completed marking.
pub fn oracle_language(
    net: &PetriNet,
    completion: Completion,
    max_len: usize,
) -> BTreeSet<Vec<String>> {
    let g = reachability_graph(net, completion);
    let mut words = BTreeSet::new();
    let mut frontier = vec![(
        Vec::<String>::new(),
        silent_closure(&g, &BTreeSet::from([0])),
    )];
    for _ in 0..max_len {
        let mut next_frontier = Vec::new();
        for (word, set) in &frontier {
            let mut by_label: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
            for &s in set {
                for (label, t) in &g.edges[s] {
                    if let Some(l) = label {
                        by_label.entry(l).or_default().insert(*t);
                    }
                }
            }
            for (label, targets) in by_label {
                let closed = silent_closure(&g, &targets);
                let mut w = word.clone();
                w.push(label.to_string());
                if closed.iter().any(|&s| g.complete[s]) {
                    words.insert(w.clone());
                }
                next_frontier.push((w, closed));
            }
        }
        frontier = next_frontier;
    }
    assert!(
        frontier.is_empty(),
        "oracle language exceeds the length bound"
    );
    words
}

pub fn playout_words(net: &PetriNet, completion: Completion) -> BTreeSet<Vec<String>> {
    let cfg = PlayoutConfig {
        completion,
        ..PlayoutConfig::default()
    };
    enumerate_variants(net, &cfg)
        .unwrap()
        .variants
        .iter()
        .map(|v| v.events().to_vec())
        .collect()
}

/// Playout and oracle languages of a net, in that order.
pub fn both_languages(
    net: &PetriNet,
    completion: Completion,
) -> (BTreeSet<Vec<String>>, BTreeSet<Vec<String>>) {
    (
        playout_words(net, completion),
        oracle_language(net, completion, 20),
    )
}

pub fn marking(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
    pairs.iter().map(|(p, n)| (p.to_string(), *n)).collect()
}

pub struct Builder {
    places: BTreeSet<String>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
}

impl Builder {
    pub fn new() -> Self {
        Builder {
            places: BTreeSet::new(),
            transitions: Vec::new(),
            arcs: Vec::new(),
        }
    }

    /// Adds a transition moving tokens from `pre` to `post`.
    pub fn t(mut self, label: Option<&str>, pre: &[&str], post: &[&str]) -> Self {
        let id = format!("t{}", self.transitions.len());
        self.transitions.push(match label {
            Some(l) => Transition::visible(&id, l),
            None => Transition::silent(&id),
        });
        for p in pre {
            self.places.insert(p.to_string());
            self.arcs.push(Arc::new(*p, &id, 1));
        }
        for p in post {
            self.places.insert(p.to_string());
            self.arcs.push(Arc::new(&id, *p, 1));
        }
        self
    }

    pub fn weighted(mut self, label: &str, pre: (&str, u32), post: (&str, u32)) -> Self {
        let id = format!("t{}", self.transitions.len());
        self.transitions.push(Transition::visible(&id, label));
        self.places.insert(pre.0.to_string());
        self.places.insert(post.0.to_string());
        self.arcs.push(Arc::new(pre.0, &id, pre.1));
        self.arcs.push(Arc::new(&id, post.0, post.1));
        self
    }

    pub fn build(self, initial: &[(&str, u32)], finals: Option<&[(&str, u32)]>) -> PetriNet {
        PetriNet::new(
            self.places.into_iter().collect(),
            self.transitions,
            self.arcs,
            &marking(initial),
            finals.map(|f| vec![marking(f)]),
        )
        .unwrap()
    }
}

pub fn parallel_split_join() -> PetriNet {
    Builder::new()
        .t(None, &["i"], &["p1", "p2"])
        .t(Some("a"), &["p1"], &["q1"])
        .t(Some("b"), &["p2"], &["q2"])
        .t(None, &["q1", "q2"], &["o"])
        .build(&[("i", 1)], Some(&[("o", 1)]))
}

pub fn choice_with_silent_skip() -> PetriNet {
    Builder::new()
        .t(Some("a"), &["i"], &["p"])
        .t(Some("b"), &["p"], &["q"])
        .t(None, &["p"], &["q"])
        .t(Some("c"), &["q"], &["o"])
        .t(Some("d"), &["q"], &["o"])
        .build(&[("i", 1)], Some(&[("o", 1)]))
}

pub fn silent_cycle() -> PetriNet {
    Builder::new()
        .t(Some("a"), &["i"], &["p"])
        .t(None, &["p"], &["q"])
        .t(None, &["q"], &["p"])
        .t(Some("b"), &["q"], &["o"])
        .t(Some("c"), &["p"], &["o"])
        .build(&[("i", 1)], Some(&[("o", 1)]))
}

pub fn three_way_concurrency() -> PetriNet {
    Builder::new()
        .t(None, &["i"], &["p1", "p2", "p3"])
        .t(Some("a"), &["p1"], &["q1"])
        .t(Some("b"), &["p2"], &["q2"])
        .t(Some("x"), &["p3"], &["q3"])
        .t(Some("y"), &["p3"], &["q3"])
        .t(Some("z"), &["q1", "q2", "q3"], &["o"])
        .build(&[("i", 1)], Some(&[("o", 1)]))
}

pub fn dead_end_choice() -> PetriNet {
    Builder::new()
        .t(Some("a"), &["i"], &["p"])
        .t(Some("b"), &["p"], &["q"])
        .t(Some("c"), &["p"], &["r"])
        .t(Some("d"), &["q"], &["s"])
        .build(&[("i", 1)], None)
}

pub fn final_marking_filter() -> PetriNet {
    Builder::new()
        .t(Some("a"), &["i"], &["p"])
        .t(Some("b"), &["p"], &["o"])
        .t(Some("c"), &["p"], &["dead"])
        .build(&[("i", 1)], Some(&[("o", 1)]))
}

pub fn weighted_arcs() -> PetriNet {
    Builder::new()
        .weighted("a", ("i", 1), ("p", 2))
        .t(Some("b"), &["p"], &["q"])
        .weighted("c", ("q", 2), ("o", 1))
        .t(Some("d"), &["p"], &["o2"])
        .build(&[("i", 1)], None)
}

/// `stages` sequential binary choices: `2^stages` variants of equal length.
pub fn binary_stages(stages: usize) -> PetriNet {
    let mut b = Builder::new();
    for i in 0..stages {
        let (from, to) = (format!("s{i}"), format!("s{}", i + 1));
        b = b.t(Some(&format!("x{i}")), &[&from], &[&to]).t(
            Some(&format!("y{i}")),
            &[&from],
            &[&to],
        );
    }
    let last = format!("s{stages}");
    b.build(&[("s0", 1)], Some(&[(last.as_str(), 1)]))
}

/// Toy nets with their completion mode and expected language size.
pub fn toy_nets() -> Vec<(&'static str, PetriNet, Completion, Option<usize>)> {
    vec![
        (
            "parallel split/join",
            parallel_split_join(),
            Completion::Auto,
            Some(2),
        ),
        (
            "choice with silent skip",
            choice_with_silent_skip(),
            Completion::Auto,
            Some(4),
        ),
        ("silent cycle", silent_cycle(), Completion::Auto, Some(2)),
        (
            "three-way concurrency",
            three_way_concurrency(),
            Completion::Auto,
            Some(12),
        ),
        (
            "dead-end choice",
            dead_end_choice(),
            Completion::DeadMarkings,
            Some(2),
        ),
        (
            "final-marking filter",
            final_marking_filter(),
            Completion::FinalMarkings,
            Some(1),
        ),
        (
            "final-marking filter, dead",
            final_marking_filter(),
            Completion::DeadMarkings,
            Some(2),
        ),
        (
            "weighted arcs",
            weighted_arcs(),
            Completion::DeadMarkings,
            None,
        ),
        (
            "five binary stages",
            binary_stages(5),
            Completion::Auto,
            Some(32),
        ),
    ]
}
