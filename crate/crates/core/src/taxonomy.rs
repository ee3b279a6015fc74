//! Priority-ordered keyword classification of merge surfaces.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::format;
use crate::trainer::MergeTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Backtracking,
    Hedging,
    Verification,
    ProblemRef,
    StrategyShift,
    Sequencing,
    Computation,
    Counterargument,
    Reasoning,
}

impl Category {
    /// In priority order.
    pub const ALL: [Category; 9] = [
        Category::Backtracking,
        Category::Hedging,
        Category::Verification,
        Category::ProblemRef,
        Category::StrategyShift,
        Category::Sequencing,
        Category::Computation,
        Category::Counterargument,
        Category::Reasoning,
    ];

    pub fn priority(self) -> u8 {
        self.index() as u8 + 1
    }

    /// Zero-based position in [`Category::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_priority(p: u8) -> Option<Self> {
        Self::ALL.get((p as usize).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Backtracking => "Backtracking",
            Category::Hedging => "Hedging",
            Category::Verification => "Verification",
            Category::ProblemRef => "ProblemRef",
            Category::StrategyShift => "StrategyShift",
            Category::Sequencing => "Sequencing",
            Category::Computation => "Computation",
            Category::Counterargument => "Counterargument",
            Category::Reasoning => "Reasoning",
        }
    }

    /// Scaffold categories; excludes Reasoning and Computation.
    pub fn is_signpost(self) -> bool {
        !matches!(self, Category::Reasoning | Category::Computation)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const BACKTRACK_CONTAINS: &[&str] = &["hold on", "but actually", "but wait"];
const VERIFY_CONTAINS: &[&str] = &["check", "matches", "which is what"];
const VERIFY_EXACT: &[&str] = &["correct", "yes", "right", "good", "impossible"];
const PROBLEM_CONTAINS: &[&str] = &["problem", "it says"];
const STRATEGY_STARTS: &[&str] = &["Let's", "Let me", "So let", "But let", "Now, let"];
const SEQUENCE_STARTS: &[&str] = &["First", "Similarly", "Given that", "Now, the"];
const COUNTER_STARTS: &[&str] = &["But ", ", but"];
const REASONING_CONNECTIVES: &[&str] = &[
    ", so", ", and", ", which", ", then", ", thus", ", hence", ", because", ", since", ", therefore",
];

fn starts_with_any<'a>(s: &str, prefixes: &[&'a str]) -> Option<&'a str> {
    let s = s.trim_start_matches(' ');
    prefixes.iter().copied().find(|p| s.starts_with(p))
}

fn contains_any<'a>(lower: &str, needles: &[&'a str]) -> Option<&'a str> {
    needles.iter().copied().find(|n| lower.contains(n))
}

fn computation_atom(s: &str) -> bool {
    let rest = s
        .strip_prefix(", ")
        .or_else(|| s.strip_prefix(' '))
        .unwrap_or(s);
    let mut chars = rest.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => c.is_ascii_digit() || (c.is_alphabetic() && c != 'a' && c != 'I'),
        _ => false,
    }
}

/// First rule in priority order matched by `surface`, with a description of the rule.
pub fn classify(surface: &str) -> Option<(Category, String)> {
    let lower = surface.to_lowercase();

    if let Some(p) = starts_with_any(surface, &["Wait"]) {
        return Some((Category::Backtracking, format!("starts with {p:?}")));
    }
    if let Some(n) = contains_any(&lower, BACKTRACK_CONTAINS) {
        return Some((Category::Backtracking, format!("contains {n:?}")));
    }
    if lower.contains("maybe") {
        return Some((Category::Hedging, "contains \"maybe\"".into()));
    }
    if let Some(n) = contains_any(&lower, VERIFY_CONTAINS) {
        return Some((Category::Verification, format!("contains {n:?}")));
    }
    let bare = lower
        .trim_start_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .trim_end();
    if let Some(w) = VERIFY_EXACT.iter().find(|w| **w == bare) {
        return Some((Category::Verification, format!("is {w:?}")));
    }
    if let Some(n) = contains_any(&lower, PROBLEM_CONTAINS) {
        return Some((Category::ProblemRef, format!("contains {n:?}")));
    }
    if let Some(p) = starts_with_any(surface, STRATEGY_STARTS) {
        return Some((Category::StrategyShift, format!("starts with {p:?}")));
    }
    if let Some(p) = starts_with_any(surface, SEQUENCE_STARTS) {
        return Some((Category::Sequencing, format!("starts with {p:?}")));
    }
    if computation_atom(surface) {
        return Some((Category::Computation, "single digit or variable letter".into()));
    }
    if let Some(p) = starts_with_any(surface, COUNTER_STARTS) {
        return Some((Category::Counterargument, format!("starts with {p:?}")));
    }
    if let Some(p) = REASONING_CONNECTIVES.iter().find(|p| surface.starts_with(**p)) {
        return Some((Category::Reasoning, format!("connective {p:?}")));
    }
    if starts_with_any(surface, &["Therefore"]).is_some() {
        return Some((Category::Reasoning, "starts with \"Therefore\"".into()));
    }
    if lower.contains("i think") {
        return Some((Category::Reasoning, "contains \"I think\"".into()));
    }
    if surface
        .strip_prefix(", ")
        .and_then(|r| r.chars().next())
        .is_some_and(char::is_alphanumeric)
    {
        return Some((Category::Reasoning, "comma-led clause".into()));
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub category: Category,
    pub rule: String,
}

/// Category per supertoken id. Base ids never appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub base_vocab_size: u32,
    #[serde(with = "id_keys")]
    pub assignments: BTreeMap<TokenId, Assignment>,
    pub unclassified: Vec<TokenId>,
}

impl CategoryMap {
    pub fn len(&self) -> usize {
        self.assignments.len() + self.unclassified.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: TokenId) -> Option<Category> {
        self.assignments.get(&id).map(|a| a.category)
    }

    /// `Ok(None)` for base tokens and unclassified supertokens.
    pub fn lookup(&self, id: TokenId) -> Result<Option<Category>> {
        if id < self.base_vocab_size {
            return Ok(None);
        }
        match self.assignments.get(&id) {
            Some(a) => Ok(Some(a.category)),
            None if self.unclassified.contains(&id) => Ok(None),
            None => Err(Error::UnmappedSupertoken(id)),
        }
    }

    /// Merge count per category, every category present.
    pub fn counts(&self) -> BTreeMap<Category, usize> {
        let mut out: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        for a in self.assignments.values() {
            *out.entry(a.category).or_default() += 1;
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        format::write_versioned(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        format::read_versioned(path)
    }
}

/// Token ids as JSON object keys. Versioned documents are flattened, and
/// flattened maps only round-trip string keys.
mod id_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Assignment;
    use crate::corpus::TokenId;

    pub fn serialize<S: Serializer>(m: &BTreeMap<TokenId, Assignment>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(m.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<TokenId, Assignment>, D::Error> {
        BTreeMap::<String, Assignment>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse::<TokenId>().map(|id| (id, v)).map_err(D::Error::custom))
            .collect()
    }
}

pub fn classify_table(table: &MergeTable) -> CategoryMap {
    let mut assignments = BTreeMap::new();
    let mut unclassified = Vec::new();
    for m in &table.merges {
        match classify(&m.surface) {
            Some((category, rule)) => {
                assignments.insert(m.new_id, Assignment { category, rule });
            }
            None => unclassified.push(m.new_id),
        }
    }
    CategoryMap {
        base_vocab_size: table.base_vocab_size,
        assignments,
        unclassified,
    }
}
