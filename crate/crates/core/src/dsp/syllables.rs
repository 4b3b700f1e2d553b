use serde::{Deserialize, Serialize};

/// Result of the vowel-group syllable heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyllableCount {
    pub count: u32,
    /// Set when the token had no letters and the count defaulted to 1.
    pub fallback: bool,
}

fn is_vowel(letters: &[char], i: usize) -> bool {
    match letters[i] {
        'a' | 'e' | 'i' | 'o' | 'u' => true,
        'y' => i > 0,
        _ => false,
    }
}

/// Counts vowel groups (`y` counts unless word-initial), drops one for a
/// silent final `e`, never returns less than 1.
///
/// A final `e` is treated as silent when it follows a consonant, except in a
/// consonant + `le` ending ("table").
pub fn count_syllables(word: &str) -> SyllableCount {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return SyllableCount {
            count: 1,
            fallback: true,
        };
    }
    let mut groups = 0u32;
    let mut in_group = false;
    for i in 0..letters.len() {
        let v = is_vowel(&letters, i);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    let silent_e = n >= 2
        && letters[n - 1] == 'e'
        && !is_vowel(&letters, n - 2)
        && !(n >= 3 && letters[n - 2] == 'l' && !is_vowel(&letters, n - 3));
    if silent_e && groups > 1 {
        groups -= 1;
    }
    SyllableCount {
        count: groups.max(1),
        fallback: false,
    }
}
