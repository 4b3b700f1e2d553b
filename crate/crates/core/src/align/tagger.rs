use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::AlignError;

/// Coarse universal part-of-speech classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Conj,
    Num,
    Prt,
    Punct,
    X,
}

impl std::str::FromStr for PosTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_uppercase()))
            .map_err(|_| format!("unknown tag `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuffixRule {
    pub suffix: String,
    pub tag: PosTag,
}

const DEFAULT_LEXICON: &str = include_str!("../../resources/lexicon.tsv");

/// Checked in order; the first suffix that leaves a stem of at least
/// three letters wins.
const DEFAULT_SUFFIXES: &[(&str, PosTag)] = &[
    ("ing", PosTag::Verb),
    ("ed", PosTag::Verb),
    ("ize", PosTag::Verb),
    ("ise", PosTag::Verb),
    ("ify", PosTag::Verb),
    ("ate", PosTag::Verb),
    ("ly", PosTag::Adv),
    ("ward", PosTag::Adv),
    ("ous", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("less", PosTag::Adj),
    ("ish", PosTag::Adj),
    ("ical", PosTag::Adj),
    ("al", PosTag::Adj),
    ("ic", PosTag::Adj),
    ("est", PosTag::Adj),
    ("tion", PosTag::Noun),
    ("sion", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("ity", PosTag::Noun),
    ("ship", PosTag::Noun),
    ("ance", PosTag::Noun),
    ("ence", PosTag::Noun),
    ("ism", PosTag::Noun),
    ("ist", PosTag::Noun),
    ("er", PosTag::Noun),
    ("or", PosTag::Noun),
];

const MIN_STEM: usize = 3;

/// Lexicon lookup, then numeric and suffix rules, then NOUN.
#[derive(Clone, Debug)]
pub struct Tagger {
    lexicon: HashMap<String, PosTag>,
    suffix_rules: Vec<SuffixRule>,
}

impl Default for Tagger {
    fn default() -> Self {
        let suffix_rules = DEFAULT_SUFFIXES
            .iter()
            .map(|(s, t)| SuffixRule {
                suffix: s.to_string(),
                tag: *t,
            })
            .collect();
        Self::from_lexicon(DEFAULT_LEXICON, suffix_rules).expect("bundled lexicon parses")
    }
}

impl Tagger {
    /// Parses a `word<TAB>tag` lexicon; `#` starts a comment line.
    pub fn from_lexicon(text: &str, suffix_rules: Vec<SuffixRule>) -> Result<Self, AlignError> {
        let mut lexicon = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| AlignError::Lexicon(format!("line {}: missing tab", i + 1)))?;
            let tag = tag
                .parse()
                .map_err(|e| AlignError::Lexicon(format!("line {}: {e}", i + 1)))?;
            lexicon.entry(word.to_lowercase()).or_insert(tag);
        }
        Ok(Self {
            lexicon,
            suffix_rules,
        })
    }

    pub fn suffix_rules(&self) -> &[SuffixRule] {
        &self.suffix_rules
    }

    pub fn tag_token(&self, token: &str) -> PosTag {
        let core = token.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'');
        let core = core.trim_matches('\'');
        if core.is_empty() {
            return PosTag::Punct;
        }
        if core
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, ',' | '.' | '%'))
        {
            return PosTag::Num;
        }
        let lower = core.to_lowercase();
        if let Some(&t) = self.lexicon.get(&lower) {
            return t;
        }
        // possessives and other clitics: tag the host word
        if let Some((host, _)) = lower.split_once('\'') {
            if let Some(&t) = self.lexicon.get(host) {
                return t;
            }
        }
        if !lower.chars().any(char::is_alphabetic) {
            return PosTag::X;
        }
        let n = lower.chars().count();
        self.suffix_rules
            .iter()
            .find(|r| lower.ends_with(&r.suffix) && n >= r.suffix.chars().count() + MIN_STEM)
            .map_or(PosTag::Noun, |r| r.tag)
    }

    pub fn tag<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<PosTag> {
        tokens.iter().map(|t| self.tag_token(t.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_class_digits_and_suffixes() {
        let t = Tagger::default();
        assert_eq!(t.tag(&["the"]), vec![PosTag::Det]);
        assert_eq!(t.tag(&["running"]), vec![PosTag::Verb]);
        assert_eq!(t.tag(&["42"]), vec![PosTag::Num]);
        assert_eq!(t.tag(&["--"]), vec![PosTag::Punct]);
        assert_eq!(t.tag(&["enemies."]), vec![PosTag::Noun]);
    }

    #[test]
    fn fifty_word_list() {
        let t = Tagger::default();
        let table = [
            ("the", PosTag::Det),
            ("a", PosTag::Det),
            ("this", PosTag::Det),
            ("running", PosTag::Verb),
            ("walked", PosTag::Verb),
            ("organize", PosTag::Verb),
            ("simplify", PosTag::Verb),
            ("is", PosTag::Verb),
            ("was", PosTag::Verb),
            ("don't", PosTag::Verb),
            ("quickly", PosTag::Adv),
            ("very", PosTag::Adv),
            ("never", PosTag::Adv),
            ("famous", PosTag::Adj),
            ("helpful", PosTag::Adj),
            ("readable", PosTag::Adj),
            ("creative", PosTag::Adj),
            ("careless", PosTag::Adj),
            ("musical", PosTag::Adj),
            ("good", PosTag::Adj),
            ("nation", PosTag::Noun),
            ("movement", PosTag::Noun),
            ("kindness", PosTag::Noun),
            ("city", PosTag::Noun),
            ("teacher", PosTag::Noun),
            ("enemy", PosTag::Noun),
            ("art", PosTag::Noun),
            ("point", PosTag::Noun),
            ("tact", PosTag::Noun),
            ("idea", PosTag::Noun),
            ("she", PosTag::Pron),
            ("them", PosTag::Pron),
            ("our", PosTag::Pron),
            ("of", PosTag::Adp),
            ("without", PosTag::Adp),
            ("into", PosTag::Adp),
            ("and", PosTag::Conj),
            ("because", PosTag::Conj),
            ("but", PosTag::Conj),
            ("not", PosTag::Prt),
            ("three", PosTag::Num),
            ("1,000", PosTag::Num),
            ("2019", PosTag::Num),
            ("50%", PosTag::Num),
            ("!", PosTag::Punct),
            ("Making", PosTag::Verb),
            ("art.", PosTag::Noun),
            ("It's", PosTag::Verb),
            ("speaker's", PosTag::Noun),
            ("ring", PosTag::Noun),
        ];
        assert_eq!(table.len(), 50);
        for (w, tag) in table {
            assert_eq!(t.tag_token(w), tag, "{w}");
        }
    }

    #[test]
    fn custom_lexicon() {
        let t = Tagger::from_lexicon("# comment\nfoo\tADV\n", vec![]).unwrap();
        assert_eq!(t.tag_token("Foo"), PosTag::Adv);
        assert_eq!(t.tag_token("walking"), PosTag::Noun);
        assert!(Tagger::from_lexicon("foo ADV", vec![]).is_err());
        assert!(Tagger::from_lexicon("foo\tBOGUS", vec![]).is_err());
    }
}
