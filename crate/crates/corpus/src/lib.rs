//! Clinical corpora for joint entity and relation extraction: BRAT I/O,
//! wordpiece tokenization, BIO alignment, sentence splitting and a seeded
//! synthetic generator.

mod align;
mod brat;
mod document;
mod error;
mod schema;
mod stats;
mod synth;
mod tokenize;
mod vocab;

pub use align::{align_bio, entity_token_spans, split_sentences};
pub use brat::{
    list_documents, load_corpus, parse_brat, read_document, to_ann, write_annotations,
    write_document,
};
pub use document::{Document, EntitySpan, Relation, Token};
pub use error::{CorpusError, Result};
pub use schema::{EntityType, Label, RelationType, NUM_LABELS};
pub use stats::{corpus_stats, CorpusStats, LengthStats};
pub use synth::{synth_corpus, SynthConfig, SynthCorpus, MAX_LENGTH, MIN_LENGTH};
pub use tokenize::{is_punctuation, wordpiece_tokenize, MAX_WORD_CHARS};
pub use vocab::{Vocab, CONTINUATION, UNK};
