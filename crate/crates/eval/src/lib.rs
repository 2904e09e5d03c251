//! Lenient micro-averaged scoring for entities and end-to-end relations.

pub mod bins;
pub mod error;
pub mod matching;
pub mod report;

pub use bins::{fd_length_bins, quantile, LengthBins};
pub use error::{EvalError, Result};
pub use matching::{
    align_entities, align_relations, match_entities, match_relation_refs, match_relations, relations_match,
    sentence_distance, spans_match, MatchCounts, MatchMode, RelationRef, Scores,
};
pub use report::{build_report, EvalReport, LengthRow};
