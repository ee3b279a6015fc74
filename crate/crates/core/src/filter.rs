//! Structural eligibility filter for merge candidates.
//!
//! A candidate is judged on its full flattened surface, context-free. Any
//! surface holding two consecutive digits is rejected by every rule.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FilterKind {
    CapitalizedPhraseInitial,
    PunctuationNewline,
    CommaLed,
    SingleDigit,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [
        FilterKind::CapitalizedPhraseInitial,
        FilterKind::PunctuationNewline,
        FilterKind::CommaLed,
        FilterKind::SingleDigit,
    ];

    pub fn description(self) -> &'static str {
        match self {
            FilterKind::CapitalizedPhraseInitial => "first non-space character is an uppercase letter",
            FilterKind::PunctuationNewline => "punctuation run followed by one or more newlines",
            FilterKind::CommaLed => "comma followed by space-prefixed words",
            FilterKind::SingleDigit => "a single space followed by a single digit",
        }
    }

    pub fn rule(self) -> FilterRule {
        FilterRule {
            kind: self,
            description: self.description().to_owned(),
        }
    }

    fn matches(self, surface: &str) -> bool {
        match self {
            FilterKind::CapitalizedPhraseInitial => capitalized_phrase_initial(surface),
            FilterKind::PunctuationNewline => punctuation_newline(surface),
            FilterKind::CommaLed => comma_led(surface),
            FilterKind::SingleDigit => single_digit(surface),
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRule {
    pub kind: FilterKind,
    pub description: String,
}

/// Enabled rule kinds. An empty set is the disabled filter: every surface passes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub enabled: BTreeSet<FilterKind>,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::all()
    }
}

impl RuleSet {
    pub fn all() -> Self {
        Self {
            enabled: FilterKind::ALL.into_iter().collect(),
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: BTreeSet::new(),
        }
    }

    pub fn is_disabled(&self) -> bool {
        self.enabled.is_empty()
    }

    pub fn rules(&self) -> Vec<FilterRule> {
        self.enabled.iter().map(|k| k.rule()).collect()
    }
}

/// Filter configuration file body: `{"enabled": [...]}`.
pub type FilterConfig = RuleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Eligibility {
    pub eligible: bool,
    /// First enabled rule that matched, if any.
    pub matched: Option<FilterKind>,
}

pub fn is_eligible(surface: &str, rules: &RuleSet) -> Eligibility {
    if rules.is_disabled() {
        return Eligibility {
            eligible: true,
            matched: None,
        };
    }
    if has_multi_digit_run(surface) {
        return Eligibility {
            eligible: false,
            matched: None,
        };
    }
    let matched = rules.enabled.iter().copied().find(|k| k.matches(surface));
    Eligibility {
        eligible: matched.is_some(),
        matched,
    }
}

pub fn has_multi_digit_run(s: &str) -> bool {
    let b = s.as_bytes();
    b.windows(2).any(|w| w[0].is_ascii_digit() && w[1].is_ascii_digit())
}

const PHRASE_PUNCT: [char; 6] = ['.', ',', ':', ';', '?', '!'];

fn capitalized_phrase_initial(s: &str) -> bool {
    s.trim_start_matches(' ')
        .chars()
        .next()
        .is_some_and(char::is_uppercase)
}

fn punctuation_newline(s: &str) -> bool {
    let rest = s.trim_start_matches(PHRASE_PUNCT);
    if rest.len() == s.len() {
        return false;
    }
    let after_nl = rest.trim_start_matches('\n');
    if after_nl.len() == rest.len() {
        return false;
    }
    // only indentation may trail the newlines
    after_nl.chars().all(|c| c == ' ' || c == '\t')
}

fn comma_led(s: &str) -> bool {
    let Some(rest) = s.strip_prefix(',') else {
        return false;
    };
    if rest.is_empty() {
        return false;
    }
    // one or more " word" groups, words being non-whitespace runs
    let mut words = 0;
    let mut chars = rest.chars().peekable();
    while let Some(c) = chars.next() {
        if c != ' ' {
            return false;
        }
        let mut len = 0;
        while let Some(&n) = chars.peek() {
            if n.is_whitespace() {
                break;
            }
            chars.next();
            len += 1;
        }
        if len == 0 {
            return false;
        }
        words += 1;
    }
    words > 0
}

fn single_digit(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 2 && b[0] == b' ' && b[1].is_ascii_digit()
}
