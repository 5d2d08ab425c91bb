//! Fixed word vocabulary and whitespace tokenizer for the caption
//! templates. Unknown words map to a reserved token.

use std::collections::HashMap;

pub const UNK_ID: usize = 0;
pub const CLS_ID: usize = 1;

/// Every word the caption templates can emit, plus the two specials.
/// Distances are quantized to half meters so the numeric strings form a
/// small closed set.
pub fn vocabulary() -> Vec<&'static str> {
    let mut v = vec!["<unk>", "<cls>"];
    v.extend_from_slice(&[
        // scene and layout
        "scene", "a", "an", "narrow", "hallway", "corridor", "with", "blind", "corner", "ahead",
        "open", "room", "wide", "meters", "about", "in",
        // people and groups
        "there", "are", "people", "person", "nearby", "nearest", "near", "standing", "moving", "groups", "group",
        "of", "and", "is", "no", "view",
        // counts
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
        // bearings and motion
        "left", "right", "behind", "approaching", "leaving", "crossing", "very", "close",
        "by", "few", "away", "far", "lies", "one",
        // goal
        "the", "goal",
        // actions
        "action", "robot", "should", "proceed", "straight", "at", "normal", "pace", "keep", "to",
        "side", "while", "passing", "veer", "around", "obstruction", "slow", "down", "stop",
        "yield", "until", "way", "clear", "stay", "socially", "compliant",
    ]);
    // Quantized half-meter distances 0.5 .. 8 plus integers to 16.
    const DISTS: [&str; 32] = [
        "0.5", "1", "1.5", "2", "2.5", "3", "3.5", "4", "4.5", "5", "5.5", "6", "6.5", "7", "7.5",
        "8", "8.5", "9", "9.5", "10", "10.5", "11", "11.5", "12", "12.5", "13", "13.5", "14",
        "14.5", "15", "15.5", "16",
    ];
    v.extend_from_slice(&DISTS);
    v
}

/// Lowercasing whitespace tokenizer over the fixed vocabulary.
/// Punctuation at word edges is stripped; bare punctuation is dropped.
pub struct Tokenizer {
    map: HashMap<&'static str, usize>,
    words: Vec<&'static str>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Tokenizer {
    pub fn new() -> Self {
        let words = vocabulary();
        let map = words.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        Self { map, words }
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn word(&self, id: usize) -> &'static str {
        self.words[id]
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        text.split_whitespace()
            .filter_map(|raw| {
                let w = raw
                    .trim_matches(|c: char| c.is_ascii_punctuation() && c != '.')
                    .trim_end_matches('.')
                    .trim_start_matches('.');
                if w.is_empty() {
                    return None;
                }
                let lower = w.to_ascii_lowercase();
                Some(*self.map.get(lower.as_str()).unwrap_or(&UNK_ID))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_known_words() {
        let t = Tokenizer::new();
        let ids = t.tokenize("Keep to the RIGHT.");
        assert_eq!(ids.len(), 4);
        assert!(!ids.contains(&UNK_ID));
        assert_eq!(t.word(ids[0]), "keep");
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let t = Tokenizer::new();
        let ids = t.tokenize("quantum flux ahead");
        assert_eq!(ids[0], UNK_ID);
        assert_eq!(ids[1], UNK_ID);
        assert_ne!(ids[2], UNK_ID);
    }

    #[test]
    fn decimal_distances_survive_punctuation_stripping() {
        let t = Tokenizer::new();
        let ids = t.tokenize("about 3.5 meters.");
        assert!(!ids.contains(&UNK_ID));
        assert_eq!(t.word(ids[1]), "3.5");
    }

    #[test]
    fn vocab_has_no_duplicates() {
        let v = vocabulary();
        let mut seen = std::collections::HashSet::new();
        for w in &v {
            assert!(seen.insert(w), "duplicate vocab word {w}");
        }
    }
}
