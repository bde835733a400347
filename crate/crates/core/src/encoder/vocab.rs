use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const UNK: &str = "<unk>";

/// Word list with an unknown-word row at index 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Keeps words seen at least `min_count` times, most frequent first
    /// with ties broken alphabetically.
    pub fn build<I, S>(words: I, min_count: usize) -> Vocab
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for w in words {
            *counts.entry(w.as_ref().to_lowercase()).or_default() += 1;
        }
        counts.remove(UNK);
        let mut kept: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Vocab::from_words(kept.into_iter().map(|(w, _)| w))
    }

    fn from_words(words: impl IntoIterator<Item = String>) -> Vocab {
        let mut all = vec![UNK.to_string()];
        for w in words {
            if w != UNK && !all.contains(&w) {
                all.push(w);
            }
        }
        let index = all.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words: all, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row of `word`, case-folded; unknown words map to row 0.
    pub fn id(&self, word: &str) -> usize {
        self.index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))
            .copied()
            .unwrap_or(0)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl Serialize for Vocab {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.words.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocab {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let words = Vec::<String>::deserialize(d)?;
        if words.first().map(String::as_str) != Some(UNK) {
            return Err(serde::de::Error::custom("vocabulary must start with <unk>"));
        }
        let v = Vocab::from_words(words.into_iter().skip(1));
        Ok(v)
    }
}
