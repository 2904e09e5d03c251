//! Token-level views of a document: BIO labels, entity token ranges and
//! sentence boundaries.

use crate::document::{Document, EntitySpan, Token};
use crate::error::{CorpusError, Result};
use crate::schema::Label;
use crate::tokenize::wordpiece_tokenize;
use crate::vocab::Vocab;

/// Token range `[first, last+1)` overlapped by each entity.
pub fn entity_token_spans(tokens: &[Token], entities: &[EntitySpan]) -> Vec<Option<(usize, usize)>> {
    entities
        .iter()
        .map(|e| {
            let first = tokens.partition_point(|t| t.end <= e.start);
            let mut last = first;
            while last < tokens.len() && tokens[last].start < e.end {
                last += 1;
            }
            (last > first).then_some((first, last))
        })
        .collect()
}

/// Per-token BIO label ids. A token shared by two entities is an error.
pub fn align_bio(tokens: &[Token], entities: &[EntitySpan]) -> Result<Vec<u8>> {
    let mut labels = vec![Label::O.id(); tokens.len()];
    let mut owner: Vec<Option<usize>> = vec![None; tokens.len()];
    for (k, span) in entity_token_spans(tokens, entities).into_iter().enumerate() {
        let Some((first, last)) = span else { continue };
        let etype = entities[k].etype;
        for i in first..last {
            if let Some(prev) = owner[i] {
                return Err(CorpusError::Overlap {
                    token: i,
                    start: tokens[i].start,
                    end: tokens[i].end,
                    first: describe(&entities[prev]),
                    second: describe(&entities[k]),
                });
            }
            owner[i] = Some(k);
            labels[i] = if i == first { Label::B(etype) } else { Label::I(etype) }.id();
        }
    }
    Ok(labels)
}

fn describe(e: &EntitySpan) -> String {
    format!("{} {} {}..{}", e.id, e.etype, e.start, e.end)
}

/// Token indices that begin a sentence. A sentence ends after a token whose
/// text ends in `.`, `!` or `?`, or that is followed by a line break.
pub fn split_sentences(text: &str, tokens: &[Token]) -> Vec<usize> {
    let mut starts = vec![0];
    if tokens.is_empty() {
        return starts;
    }
    let chars: Vec<char> = text.chars().collect();
    for i in 0..tokens.len() - 1 {
        let terminal = matches!(chars[tokens[i].end - 1], '.' | '!' | '?');
        let newline = chars[tokens[i].end..tokens[i + 1].start].contains(&'\n');
        if terminal || newline {
            starts.push(i + 1);
        }
    }
    starts
}

impl Document {
    /// Tokenizes the text and derives labels, entity ranges and sentences.
    pub fn prepare(&mut self, vocab: &Vocab) -> Result<()> {
        self.tokens = wordpiece_tokenize(&self.text, vocab);
        self.bio_labels = align_bio(&self.tokens, &self.entities)?;
        self.entity_tokens = entity_token_spans(&self.tokens, &self.entities);
        self.sentence_starts = split_sentences(&self.text, &self.tokens);
        Ok(())
    }
}
