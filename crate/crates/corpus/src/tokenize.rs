//! Greedy longest-match-first wordpiece tokenization.

use crate::document::Token;
use crate::vocab::{Vocab, CONTINUATION, UNK};

/// Pre-tokens longer than this go straight to `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

pub fn is_punctuation(c: char) -> bool {
    !c.is_whitespace() && !c.is_alphanumeric()
}

/// Splits on whitespace and punctuation, then decomposes each piece against
/// `vocab`. Offsets are in characters.
pub fn wordpiece_tokenize(text: &str, vocab: &Vocab) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        if !is_punctuation(chars[start]) {
            while i < chars.len() && !chars[i].is_whitespace() && !is_punctuation(chars[i]) {
                i += 1;
            }
        }
        split_word(&chars[start..i], start, vocab, &mut out);
    }
    out
}

fn split_word(word: &[char], offset: usize, vocab: &Vocab, out: &mut Vec<Token>) {
    let unk = |out: &mut Vec<Token>| {
        out.push(Token {
            surface: UNK.to_string(),
            start: offset,
            end: offset + word.len(),
            id: vocab.unk_id(),
        })
    };
    if word.len() > MAX_WORD_CHARS {
        unk(out);
        return;
    }
    let mark = out.len();
    let mut start = 0;
    let mut piece = String::new();
    while start < word.len() {
        let mut found = None;
        let mut end = word.len();
        while end > start {
            piece.clear();
            if start > 0 {
                piece.push_str(CONTINUATION);
            }
            piece.extend(&word[start..end]);
            if let Some(id) = vocab.id(&piece) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        let Some(id) = found else {
            out.truncate(mark);
            unk(out);
            return;
        };
        out.push(Token {
            surface: piece.clone(),
            start: offset + start,
            end: offset + end,
            id,
        });
        start = end;
    }
}
