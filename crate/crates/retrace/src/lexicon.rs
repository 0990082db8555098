//! Word list used by the word-sorting task generator.

use std::sync::OnceLock;

static WORDS: OnceLock<Vec<&'static str>> = OnceLock::new();

/// All lexicon words: lowercase ASCII, 3..=10 letters, sorted, deduplicated.
pub fn words() -> &'static [&'static str] {
    WORDS
        .get_or_init(|| {
            let mut v: Vec<&'static str> = include_str!("../assets/lexicon.txt")
                .lines()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .as_slice()
}

/// 1-based alphabet index of a lowercase ASCII letter: a=1 .. z=26.
pub fn alphabet_index(c: char) -> Option<u32> {
    c.is_ascii_lowercase().then(|| c as u32 - 'a' as u32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_is_well_formed() {
        let ws = words();
        assert!(ws.len() >= 2000, "lexicon too small: {}", ws.len());
        for w in ws {
            assert!(
                w.len() >= 3 && w.len() <= 10,
                "bad length: {w:?}"
            );
            assert!(w.chars().all(|c| c.is_ascii_lowercase()), "bad chars: {w:?}");
        }
        let mut sorted = ws.to_vec();
        sorted.sort_unstable();
        assert_eq!(ws, sorted.as_slice());
    }

    #[test]
    fn alphabet_indices() {
        assert_eq!(alphabet_index('a'), Some(1));
        assert_eq!(alphabet_index('s'), Some(19));
        assert_eq!(alphabet_index('z'), Some(26));
        assert_eq!(alphabet_index('A'), None);
        assert_eq!(alphabet_index('-'), None);
    }
}
