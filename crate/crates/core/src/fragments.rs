//! Rule-based sentence splitting into fact fragments.
//!
//! A sentence boundary is a run of `.`, `!` or `?` (optionally followed by
//! closing quotes or brackets), then whitespace, then an uppercase letter or a
//! digit. A period that closes a known abbreviation is never a boundary.

use serde::{Deserialize, Serialize};

/// Where a fragment came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragmentSource {
    Response,
    Retrieved,
}

/// A discrete sentence-level claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactFragment {
    pub fragment_id: usize,
    pub text: String,
    pub source: FragmentSource,
}

/// Compared case-insensitively against the word ending at a period.
const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "al.", "fig.", "figs.", "eq.", "eqs.", "ref.", "refs.", "vs.", "cf.",
    "approx.", "dr.", "prof.", "mr.", "mrs.", "ms.", "st.", "ca.", "sec.", "tab.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}'];

/// Splits `text` into sentence fragments tagged as response fragments.
pub fn split_fragments(text: &str) -> Vec<FactFragment> {
    split_fragments_from(text, FragmentSource::Response)
}

pub fn split_fragments_from(text: &str, source: FragmentSource) -> Vec<FactFragment> {
    split_sentences(text)
        .into_iter()
        .enumerate()
        .map(|(fragment_id, s)| FactFragment {
            fragment_id,
            text: s.to_string(),
            source,
        })
        .collect()
}

/// Trimmed, non-empty sentence slices of `text`, in order.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let run_start = i;
        let mut j = i;
        while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
            j += 1;
        }
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let end_byte = chars.get(j).map_or(text.len(), |&(b, _)| b);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j
            && k < chars.len()
            && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit())
            && !(j - run_start == 1
                && chars[run_start].1 == '.'
                && ends_with_abbreviation(&text[start..end_byte]));
        if boundary {
            push_trimmed(&mut out, &text[start..end_byte]);
            start = end_byte;
            i = k;
        } else {
            i = j.max(i + 1);
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, span: &'a str) {
    let trimmed = span.trim();
    if !trimmed.is_empty() {
        out.push(trimmed);
    }
}

fn ends_with_abbreviation(span: &str) -> bool {
    let span = span.trim_end_matches(CLOSERS);
    let Some(word) = span.split_whitespace().last() else {
        return false;
    };
    let word = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(text: &str) -> Vec<String> {
        split_fragments(text).into_iter().map(|f| f.text).collect()
    }

    #[test]
    fn two_plain_sentences() {
        assert_eq!(
            texts("TiO2 is stable. It melts at 2116 K."),
            ["TiO2 is stable.", "It melts at 2116 K."]
        );
    }

    #[test]
    fn empty_text_yields_nothing() {
        assert!(split_fragments("").is_empty());
        assert!(split_fragments("   \n\t").is_empty());
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(
            texts("The alloy (e.g. FeCrNi) resists corrosion. It is ductile."),
            ["The alloy (e.g. FeCrNi) resists corrosion.", "It is ductile."]
        );
        assert_eq!(
            texts("As shown by Smith et al. The result holds. See Fig. 3 for details."),
            ["As shown by Smith et al. The result holds.", "See Fig. 3 for details."]
        );
    }

    #[test]
    fn lowercase_continuation_and_decimals_do_not_split() {
        assert_eq!(texts("The gap is 3.2 eV. and more"), ["The gap is 3.2 eV. and more"]);
        assert_eq!(texts("Values near 0.5 dominate."), ["Values near 0.5 dominate."]);
    }

    #[test]
    fn digit_start_and_other_terminators() {
        assert_eq!(
            texts("Is it stable? 42 samples say yes! Really."),
            ["Is it stable?", "42 samples say yes!", "Really."]
        );
        assert_eq!(texts("Wait... Then it broke."), ["Wait...", "Then it broke."]);
        assert_eq!(
            texts("He said \"it works.\" Then left."),
            ["He said \"it works.\"", "Then left."]
        );
    }

    #[test]
    fn ids_are_contiguous() {
        let frags = split_fragments("A one. B two. C three.");
        let ids: Vec<_> = frags.iter().map(|f| f.fragment_id).collect();
        assert_eq!(ids, [0, 1, 2]);
        assert!(frags.iter().all(|f| f.source == FragmentSource::Response));
    }

    proptest! {
        #[test]
        fn fragments_never_empty_and_reconstruct(text in "[A-Za-z0-9 .!?,()\n]{0,80}") {
            let frags = split_sentences(&text);
            prop_assert!(frags.iter().all(|f| !f.trim().is_empty()));
            let joined = frags.join(" ");
            let a: Vec<&str> = joined.split_whitespace().collect();
            let b: Vec<&str> = text.split_whitespace().collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn concatenation_is_monotone(a in "[A-Za-z0-9 .!?]{0,40}", b in "[A-Za-z0-9 .!?]{0,40}") {
            let joined = format!("{a}. {b}");
            let n = split_sentences(&joined).len();
            prop_assert!(n >= split_sentences(&a).len());
            prop_assert!(n >= split_sentences(&b).len());
        }
    }
}
