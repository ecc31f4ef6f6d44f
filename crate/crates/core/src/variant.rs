//! Variants, unique variant logs and their token encoding.
//!
//! A [`Variant`] is a non-empty sequence of event labels. A
//! [`UniqueVariantLog`] is a set of variants kept in canonical
//! (lexicographic) order; it houses observed logs, held-out sets and the
//! deduplicated sample sets produced by the generators.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token id reserved for padding after the end of a variant.
pub const PAD: u32 = 0;
/// Token id marking the end of a variant.
pub const EOS: u32 = 1;
/// First id handed out to real event labels.
pub const FIRST_EVENT_ID: u32 = 2;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Variant {
    events: Vec<String>,
}

impl Variant {
    pub fn new<I, S>(events: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let events: Vec<String> = events.into_iter().map(Into::into).collect();
        if events.is_empty() {
            return Err(Error::InvalidVariant(
                "variant must contain at least one event".into(),
            ));
        }
        for e in &events {
            if e.is_empty() || e.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVariant(format!("invalid event label {e:?}")));
            }
        }
        Ok(Variant { events })
    }

    /// Parses a whitespace-free, single-space separated line, e.g. `"a b c"`.
    pub fn parse(line: &str) -> Result<Self> {
        if line.is_empty() {
            return Err(Error::InvalidVariant("empty line".into()));
        }
        Variant::new(line.split(' '))
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// Always false; variants hold at least one event.
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

impl TryFrom<Vec<String>> for Variant {
    type Error = Error;

    fn try_from(events: Vec<String>) -> Result<Self> {
        Variant::new(events)
    }
}

impl From<Variant> for Vec<String> {
    fn from(v: Variant) -> Self {
        v.events
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.events.join(" "))
    }
}

impl fmt::Debug for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.events.join(","))
    }
}

/// Convenience constructor for tests and examples: `variant!["a", "b"]`.
#[macro_export]
macro_rules! variant {
    ($($e:expr),+ $(,)?) => {
        $crate::variant::Variant::new([$($e),+]).expect("valid variant literal")
    };
}

/// Set of distinct variants in canonical order.
#[derive(Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniqueVariantLog {
    variants: BTreeSet<Variant>,
}

impl fmt::Debug for UniqueVariantLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.variants.iter()).finish()
    }
}

impl UniqueVariantLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the variant was already present.
    pub fn insert(&mut self, v: Variant) -> bool {
        self.variants.insert(v)
    }

    pub fn remove(&mut self, v: &Variant) -> bool {
        self.variants.remove(v)
    }

    pub fn contains(&self, v: &Variant) -> bool {
        self.variants.contains(v)
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variant> + '_ {
        self.variants.iter()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.variants
            .iter()
            .flat_map(|v| v.events().iter().cloned())
            .collect()
    }

    /// Longest variant length, `None` for the empty log.
    pub fn max_len(&self) -> Option<usize> {
        self.variants.iter().map(Variant::len).max()
    }

    pub fn mean_len(&self) -> Option<f64> {
        if self.variants.is_empty() {
            return None;
        }
        let total: usize = self.variants.iter().map(Variant::len).sum();
        Some(total as f64 / self.variants.len() as f64)
    }

    pub fn stats(&self) -> Result<VariantStats> {
        variant_stats(self)
    }

    pub fn is_subset(&self, other: &UniqueVariantLog) -> bool {
        self.variants.is_subset(&other.variants)
    }

    pub fn union(&self, other: &UniqueVariantLog) -> UniqueVariantLog {
        self.variants.union(&other.variants).cloned().collect()
    }

    pub fn intersection(&self, other: &UniqueVariantLog) -> UniqueVariantLog {
        self.variants
            .intersection(&other.variants)
            .cloned()
            .collect()
    }

    pub fn difference(&self, other: &UniqueVariantLog) -> UniqueVariantLog {
        self.variants.difference(&other.variants).cloned().collect()
    }

    /// Serialises to the canonical variant-file text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.variants {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

impl FromIterator<Variant> for UniqueVariantLog {
    fn from_iter<T: IntoIterator<Item = Variant>>(iter: T) -> Self {
        UniqueVariantLog {
            variants: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a UniqueVariantLog {
    type Item = &'a Variant;
    type IntoIter = std::collections::btree_set::Iter<'a, Variant>;

    fn into_iter(self) -> Self::IntoIter {
        self.variants.iter()
    }
}

impl IntoIterator for UniqueVariantLog {
    type Item = Variant;
    type IntoIter = std::collections::btree_set::IntoIter<Variant>;

    fn into_iter(self) -> Self::IntoIter {
        self.variants.into_iter()
    }
}

/// Cardinalities of `xs ∩ ys`, `xs ∖ ys` and `ys ∖ xs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetCounts {
    pub both: usize,
    pub only_left: usize,
    pub only_right: usize,
}

pub fn set_ops(xs: &UniqueVariantLog, ys: &UniqueVariantLog) -> SetCounts {
    let both = xs.variants.intersection(&ys.variants).count();
    SetCounts {
        both,
        only_left: xs.len() - both,
        only_right: ys.len() - both,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub count: usize,
    pub alphabet_size: usize,
    pub max_len: usize,
    pub mean_len: f64,
}

pub fn variant_stats(vs: &UniqueVariantLog) -> Result<VariantStats> {
    if vs.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(VariantStats {
        count: vs.len(),
        alphabet_size: vs.alphabet().len(),
        max_len: vs.max_len().unwrap_or(0),
        mean_len: vs.mean_len().unwrap_or(0.0),
    })
}

/// Why a token sequence did not decode to a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rejection {
    Empty,
    PadBeforeEos,
    NoEos,
    UnknownId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Variant(Variant),
    Rejected(Rejection),
}

impl Decoded {
    pub fn variant(&self) -> Option<&Variant> {
        match self {
            Decoded::Variant(v) => Some(v),
            Decoded::Rejected(_) => None,
        }
    }

    pub fn into_variant(self) -> Option<Variant> {
        match self {
            Decoded::Variant(v) => Some(v),
            Decoded::Rejected(_) => None,
        }
    }
}

/// Bijection between event labels and token ids, plus the fixed sequence
/// width used by the generators.
///
/// Ids `0` and `1` are [`PAD`] and [`EOS`]; labels are numbered from `2` in
/// lexicographic order. Encoded sequences have width `max_len + 1` so a
/// full-length variant still carries its EOS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CodecRepr", into = "CodecRepr")]
pub struct TokenCodec {
    labels: Vec<String>,
    max_len: usize,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct CodecRepr {
    labels: Vec<String>,
    max_len: usize,
}

impl TryFrom<CodecRepr> for TokenCodec {
    type Error = Error;

    fn try_from(r: CodecRepr) -> Result<Self> {
        let n = r.labels.len();
        let codec = TokenCodec::new(r.labels, r.max_len)?;
        if codec.labels.len() != n {
            return Err(Error::InvalidVariant(
                "codec labels must be distinct".into(),
            ));
        }
        Ok(codec)
    }
}

impl From<TokenCodec> for CodecRepr {
    fn from(c: TokenCodec) -> Self {
        CodecRepr {
            labels: c.labels,
            max_len: c.max_len,
        }
    }
}

impl TokenCodec {
    pub fn new<I, S>(alphabet: I, max_len: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if max_len == 0 {
            return Err(Error::InvalidVariant(
                "codec max_len must be at least 1".into(),
            ));
        }
        let labels: BTreeSet<String> = alphabet.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptySet);
        }
        let labels: Vec<String> = labels.into_iter().collect();
        let mut codec = TokenCodec {
            labels,
            max_len,
            index: HashMap::new(),
        };
        codec.rebuild_index();
        Ok(codec)
    }

    /// Codec over the log's alphabet with width `μ(log)`.
    pub fn from_log(log: &UniqueVariantLog) -> Result<Self> {
        let max_len = log.max_len().ok_or(Error::EmptySet)?;
        TokenCodec::new(log.alphabet(), max_len)
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32 + FIRST_EVENT_ID))
            .collect();
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Encoded sequence width (`max_len + 1`).
    pub fn width(&self) -> usize {
        self.max_len + 1
    }

    /// Number of distinct token ids including PAD and EOS.
    pub fn vocab_size(&self) -> usize {
        self.labels.len() + FIRST_EVENT_ID as usize
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        id.checked_sub(FIRST_EVENT_ID)
            .and_then(|i| self.labels.get(i as usize))
            .map(String::as_str)
    }

    pub fn encode(&self, v: &Variant) -> Result<Vec<u32>> {
        if v.len() > self.max_len {
            return Err(Error::OverLength {
                len: v.len(),
                max: self.max_len,
            });
        }
        let mut out = Vec::with_capacity(self.width());
        for e in v.events() {
            out.push(self.id(e).ok_or_else(|| Error::UnknownLabel(e.clone()))?);
        }
        out.push(EOS);
        out.resize(self.width(), PAD);
        Ok(out)
    }

    /// Decodes up to the first EOS. Malformed sequences are rejected, not errors.
    pub fn decode(&self, tokens: &[u32]) -> Decoded {
        let mut events = Vec::new();
        for &t in tokens {
            match t {
                EOS => {
                    if events.is_empty() {
                        return Decoded::Rejected(Rejection::Empty);
                    }
                    return Decoded::Variant(Variant { events });
                }
                PAD => return Decoded::Rejected(Rejection::PadBeforeEos),
                id => match self.label(id) {
                    Some(l) => events.push(l.to_string()),
                    None => return Decoded::Rejected(Rejection::UnknownId),
                },
            }
        }
        Decoded::Rejected(Rejection::NoEos)
    }
}

/// Reads a variant file. Comment lines starting with `#` are skipped and
/// duplicate lines collapse with a warning.
pub fn read_variants(path: impl AsRef<Path>) -> Result<UniqueVariantLog> {
    Ok(read_variant_frequencies(path)?.into_keys().collect())
}

/// Reads a variant file together with its `# freq=<n>` annotations.
///
/// An annotation applies to the next variant line; variants without one
/// count once per occurrence.
pub fn read_variant_frequencies(path: impl AsRef<Path>) -> Result<BTreeMap<Variant, u64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_variant_text(&text, path)
}

pub(crate) fn parse_variant_text(text: &str, path: &Path) -> Result<BTreeMap<Variant, u64>> {
    let mut out = BTreeMap::new();
    let mut pending_freq: Option<u64> = None;
    let lines: Vec<&str> = text.split('\n').collect();
    let last_content = lines
        .iter()
        .rposition(|l| !l.trim_end_matches('\r').is_empty());
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = i + 1;
        if line.is_empty() {
            if last_content.is_some_and(|last| i < last) {
                return Err(Error::MalformedVariantFile {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: "empty line".into(),
                });
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("freq=") {
                let n = n
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| Error::MalformedVariantFile {
                        path: path.to_path_buf(),
                        line: lineno,
                        message: format!("bad frequency annotation {n:?}"),
                    })?;
                pending_freq = Some(n);
            }
            continue;
        }
        let v = Variant::parse(line).map_err(|e| Error::MalformedVariantFile {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        let n = pending_freq.take().unwrap_or(1);
        match out.get_mut(&v) {
            Some(count) => {
                log::warn!("{}:{}: duplicate variant `{}`", path.display(), lineno, v);
                *count += n;
            }
            None => {
                out.insert(v, n);
            }
        }
    }
    Ok(out)
}

/// Writes the log in canonical order, one variant per line.
pub fn write_variants(path: impl AsRef<Path>, log: &UniqueVariantLog) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, log.to_text()).map_err(|e| Error::io(path, e))
}

/// Writes variants in canonical order, each preceded by a `# freq=<n>` line.
pub fn write_variant_frequencies(
    path: impl AsRef<Path>,
    freq: &BTreeMap<Variant, u64>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (v, n) in freq {
        writeln!(out, "# freq={n}")
            .and_then(|_| writeln!(out, "{v}"))
            .map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
