#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supertoken::Trace;

/// Splits text into base pieces: `'s`, optional-space + letter run,
/// optional-space + single digit, newline runs, and single other characters.
pub fn pretokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = i;
        if chars[i] == '\'' && chars.get(i + 1) == Some(&'s') {
            i += 2;
        } else if chars[i] == '\n' {
            while i < chars.len() && chars[i] == '\n' {
                i += 1;
            }
        } else {
            if chars[i] == ' ' && chars.get(i + 1).is_some_and(|c| !c.is_whitespace()) {
                i += 1;
            }
            if chars[i].is_alphabetic() {
                while i < chars.len() && chars[i].is_alphabetic() {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        out.push(chars[start..i].iter().collect());
    }
    out
}

pub fn trace(id: &str, text: &str) -> Trace {
    Trace::from_pieces(id, &pretokenize(text))
}

const FRAGMENTS: &[&str] = &[
    "Let's check the sum.\n",
    "Let's assume x is the answer.\n",
    "Wait, let's check this again.\n",
    "So the value of the sum is 7.\n",
    "But maybe the problem says n is even.\n",
    "First, we compute the area of the triangle.\n",
    "Is it possible that x is the answer?\n",
    "This implies the result, so the answer is 4.\n",
    "Hmm, but the problem states that k is in the set.\n",
    "Similarly, the other case is the same.\n",
    "Let me reconsider the case in the table.\n",
    "Now, the total is 3.\n",
    "Therefore, the answer is 5.\n",
    "Wait, hold on, that is wrong.\n",
    "Let's verify: 2 + 3 = 5, which is what we need.\n",
];

const LOW_ENTROPY: &[&str] = &["'s", " check", ",", ".", "\n", " the", " is"];

/// Deterministic toy corpus with entropies and correctness labels.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.gen_range(6..14);
            let text: String = (0..k).map(|_| *FRAGMENTS.choose(&mut rng).unwrap()).collect();
            let t = trace(&format!("toy-{i:03}"), &text);
            let h: Vec<f64> = t
                .token_texts()
                .map(|p| {
                    let base: f64 = rng.gen_range(0.0..4.0);
                    if LOW_ENTROPY.contains(&p) {
                        base * 0.1
                    } else {
                        base
                    }
                })
                .collect();
            let correct = rng.gen_bool(0.6);
            t.with_entropy(h).with_correct(correct)
        })
        .collect()
}

pub fn write_jsonl(path: &std::path::Path, traces: &[Trace]) {
    supertoken::write_corpus(path, traces).unwrap();
}
