use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Character-level tokenizer over a fixed alphabet.
///
/// Ids are dense: 0..3 are the specials (PAD, BOS, EOS — the EOS id doubles
/// as the document separator), followed by one id per alphabet character in
/// order. `encode` then `decode` is the identity on any string over the
/// alphabet; special ids decode to nothing since they carry no character.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "TokenizerSpec", into = "TokenizerSpec")]
pub struct Tokenizer {
    alphabet: Vec<char>,
    lookup: HashMap<char, u32>,
}

/// Serialized form: just the alphabet, in order.
#[derive(Serialize, Deserialize)]
struct TokenizerSpec {
    alphabet: String,
}

impl TryFrom<TokenizerSpec> for Tokenizer {
    type Error = Error;
    fn try_from(spec: TokenizerSpec) -> Result<Self> {
        Tokenizer::new(&spec.alphabet)
    }
}

impl From<Tokenizer> for TokenizerSpec {
    fn from(t: Tokenizer) -> Self {
        TokenizerSpec {
            alphabet: t.alphabet.iter().collect(),
        }
    }
}

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
const N_SPECIALS: u32 = 3;

impl Tokenizer {
    pub fn new(alphabet: &str) -> Result<Self> {
        let chars: Vec<char> = alphabet.chars().collect();
        let mut lookup = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if lookup.insert(c, N_SPECIALS + i as u32).is_some() {
                return Err(Error::Config(format!(
                    "tokenizer alphabet repeats character {c:?}"
                )));
            }
        }
        Ok(Self {
            alphabet: chars,
            lookup,
        })
    }

    /// Newline plus the 95 printable ASCII characters; vocab size 99 with
    /// the three specials.
    pub fn default_charset() -> Self {
        let mut alphabet = String::from("\n");
        alphabet.extend((0x20u8..=0x7e).map(char::from));
        Self::new(&alphabet).expect("default charset is duplicate-free")
    }

    pub fn vocab_size(&self) -> usize {
        N_SPECIALS as usize + self.alphabet.len()
    }

    pub fn pad_id(&self) -> u32 {
        PAD
    }

    pub fn bos_id(&self) -> u32 {
        BOS
    }

    /// Document separator.
    pub fn eos_id(&self) -> u32 {
        EOS
    }

    pub fn encode(&self, s: &str) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(s.len());
        for (offset, ch) in s.char_indices() {
            match self.lookup.get(&ch) {
                Some(&id) => out.push(id),
                None => return Err(Error::OutOfAlphabet { ch, offset }),
            }
        }
        Ok(out)
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::with_capacity(ids.len());
        for &id in ids {
            if id as usize >= self.vocab_size() {
                return Err(Error::OutOfVocab {
                    id,
                    vocab: self.vocab_size(),
                });
            }
            if id >= N_SPECIALS {
                out.push(self.alphabet[(id - N_SPECIALS) as usize]);
            }
        }
        Ok(out)
    }

    pub fn contains(&self, ch: char) -> bool {
        self.lookup.contains_key(&ch)
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::default_charset()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_charset_has_vocab_99() {
        let t = Tokenizer::default_charset();
        assert_eq!(t.vocab_size(), 99);
    }

    #[test]
    fn empty_round_trip() {
        let t = Tokenizer::default_charset();
        assert_eq!(t.encode("").unwrap(), Vec::<u32>::new());
        assert_eq!(t.decode(&[]).unwrap(), "");
    }

    #[test]
    fn encode_length_equals_char_count() {
        let t = Tokenizer::default_charset();
        let s = "Sender: alice.hart@coastmail.com\n";
        assert_eq!(t.encode(s).unwrap().len(), s.chars().count());
    }

    #[test]
    fn out_of_alphabet_reports_char_and_offset() {
        let t = Tokenizer::default_charset();
        let err = t.encode("ab\u{e9}cd").unwrap_err();
        match err {
            Error::OutOfAlphabet { ch, offset } => {
                assert_eq!(ch, '\u{e9}');
                assert_eq!(offset, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn decode_rejects_out_of_vocab() {
        let t = Tokenizer::default_charset();
        assert!(t.decode(&[999]).is_err());
    }

    #[test]
    fn specials_decode_to_nothing() {
        let t = Tokenizer::default_charset();
        assert_eq!(t.decode(&[PAD, BOS, EOS]).unwrap(), "");
    }
}
