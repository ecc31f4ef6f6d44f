use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Marking, PetriNet};
use crate::error::{Error, Result};
use crate::variant::{UniqueVariantLog, Variant};

/// Which markings count as completed executions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completion {
    /// Declared final markings if the net has any, dead markings otherwise.
    #[default]
    Auto,
    FinalMarkings,
    DeadMarkings,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayoutConfig {
    pub max_variant_length: usize,
    pub max_states: usize,
    /// Longest run of consecutive silent firings before giving up.
    pub max_silent_chain: usize,
    pub completion: Completion,
}

impl Default for PlayoutConfig {
    fn default() -> Self {
        PlayoutConfig {
            max_variant_length: 64,
            max_states: 10_000_000,
            max_silent_chain: 50,
            completion: Completion::Auto,
        }
    }
}

/// The complete variant language of a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemVariantSet {
    pub variants: UniqueVariantLog,
    pub alphabet: BTreeSet<String>,
}

impl SystemVariantSet {
    /// Wraps a variant set read from disk; the alphabet is the set of events
    /// that occur in it.
    pub fn from_variants(variants: UniqueVariantLog) -> Self {
        let alphabet = variants.alphabet();
        SystemVariantSet { variants, alphabet }
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }
}

/// Prefix trie over interned labels; node 0 is the empty prefix.
struct PrefixTrie {
    parent: Vec<(u32, u32)>,
    depth: Vec<u32>,
    children: HashMap<(u32, u32), u32>,
}

impl PrefixTrie {
    fn new() -> Self {
        PrefixTrie {
            parent: vec![(0, u32::MAX)],
            depth: vec![0],
            children: HashMap::new(),
        }
    }

    fn child(&mut self, node: u32, label: u32) -> u32 {
        if let Some(&c) = self.children.get(&(node, label)) {
            return c;
        }
        let id = self.parent.len() as u32;
        self.parent.push((node, label));
        self.depth.push(self.depth[node as usize] + 1);
        self.children.insert((node, label), id);
        id
    }

    fn labels(&self, mut node: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.depth[node as usize] as usize);
        while node != 0 {
            let (p, l) = self.parent[node as usize];
            out.push(l);
            node = p;
        }
        out.reverse();
        out
    }
}

/// Enumerates every visible-label sequence of a firing sequence from the
/// initial marking to a completed marking.
///
/// The search is depth-first over `(marking, emitted prefix)` pairs. A pair
/// is expanded at most once: two paths reaching the same marking with the
/// same prefix have the same continuations, which also prunes silent cycles.
/// Markings alone are never cached since equal markings under different
/// prefixes yield different variants.
pub fn enumerate_variants(net: &PetriNet, cfg: &PlayoutConfig) -> Result<SystemVariantSet> {
    if cfg.max_variant_length == 0 || cfg.max_states == 0 {
        return Err(Error::InvalidNet("playout caps must be at least 1".into()));
    }
    let use_finals = match cfg.completion {
        Completion::Auto => net.final_markings().is_some(),
        Completion::FinalMarkings => {
            if net.final_markings().is_none() {
                return Err(Error::InvalidNet("net declares no final markings".into()));
            }
            true
        }
        Completion::DeadMarkings => false,
    };
    let finals: HashSet<&Marking> = if use_finals {
        net.final_markings().unwrap_or_default().iter().collect()
    } else {
        HashSet::new()
    };

    let mut interned: HashMap<&str, u32> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    let label_ids: Vec<Option<u32>> = net
        .transitions()
        .iter()
        .map(|t| {
            t.label.as_deref().map(|l| {
                *interned.entry(l).or_insert_with(|| {
                    names.push(l);
                    names.len() as u32 - 1
                })
            })
        })
        .collect();

    let mut trie = PrefixTrie::new();
    let mut seen: HashSet<(Marking, u32)> = HashSet::new();
    let mut accepted: HashSet<u32> = HashSet::new();
    // (marking, prefix node, consecutive silent firings)
    let mut stack: Vec<(Marking, u32, usize)> = vec![(net.initial_marking().clone(), 0, 0)];
    seen.insert((net.initial_marking().clone(), 0));

    while let Some((marking, prefix, silent_run)) = stack.pop() {
        let enabled = net.enabled(&marking);
        let complete = if use_finals {
            finals.contains(&marking)
        } else {
            enabled.is_empty()
        };
        if complete {
            if prefix == 0 {
                log::warn!("playout: empty firing sequence reaches completion; ignored");
            } else {
                accepted.insert(prefix);
            }
        }
        // Reverse so that the first enabled transition is explored first.
        for &t in enabled.iter().rev() {
            let next = net.fire_unchecked(&marking, t);
            let (next_prefix, next_run) = match label_ids[t] {
                Some(label) => {
                    if trie.depth[prefix as usize] as usize >= cfg.max_variant_length {
                        return Err(Error::CapExceeded {
                            which: "max_variant_length",
                            limit: cfg.max_variant_length,
                        });
                    }
                    (trie.child(prefix, label), 0)
                }
                None => {
                    if silent_run + 1 > cfg.max_silent_chain {
                        return Err(Error::CapExceeded {
                            which: "max_silent_chain",
                            limit: cfg.max_silent_chain,
                        });
                    }
                    (prefix, silent_run + 1)
                }
            };
            let key = (next, next_prefix);
            if seen.contains(&key) {
                continue;
            }
            if seen.len() >= cfg.max_states {
                return Err(Error::CapExceeded {
                    which: "max_states",
                    limit: cfg.max_states,
                });
            }
            seen.insert(key.clone());
            stack.push((key.0, key.1, next_run));
        }
    }

    let variants: UniqueVariantLog = accepted
        .into_iter()
        .map(|node| {
            let events = trie
                .labels(node)
                .into_iter()
                .map(|l| names[l as usize].to_string());
            Variant::new(events).expect("trie labels are valid visible labels")
        })
        .collect();
    Ok(SystemVariantSet {
        variants,
        alphabet: net.visible_labels(),
    })
}
