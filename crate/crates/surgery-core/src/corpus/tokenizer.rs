//! Byte-level tokenizer: one token per UTF-8 byte, BOS prepended and EOS
//! appended. Exactly invertible on the text body, no training required.

use crate::error::{Error, Result};
use crate::model::{BOS, EOS, PAD};

pub fn tokenize(text: &str) -> Vec<u32> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len() + 2);
    out.push(BOS);
    out.extend(bytes.iter().map(|&b| b as u32));
    out.push(EOS);
    out
}

/// Reassembles the text body, skipping BOS/EOS/PAD markers.
pub fn detokenize(tokens: &[u32]) -> Result<String> {
    let mut bytes = Vec::with_capacity(tokens.len());
    for &t in tokens {
        match t {
            0..=255 => bytes.push(t as u8),
            BOS | EOS | PAD => {}
            _ => {
                return Err(Error::Vocab {
                    id: t,
                    vocab_size: PAD as usize + 1,
                })
            }
        }
    }
    String::from_utf8(bytes).map_err(|e| Error::Contract(format!("invalid UTF-8: {e}")))
}

/// Token count of a rendered text, including BOS and EOS.
pub fn token_len(text: &str) -> usize {
    text.len() + 2
}
