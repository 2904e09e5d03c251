use crate::schema::{EntityType, RelationType};

/// A wordpiece token. Offsets are character positions in the document text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub id: String,
    pub etype: EntityType,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl EntitySpan {
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

/// Attribute → drug link. `arg1` and `arg2` index into the owning
/// document's entity list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub id: String,
    pub rtype: RelationType,
    pub arg1: usize,
    pub arg2: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub sentence_starts: Vec<usize>,
    pub entities: Vec<EntitySpan>,
    pub relations: Vec<Relation>,
    pub bio_labels: Vec<u8>,
    /// Token range `[first, last+1)` of each entity, `None` if it covers no token.
    pub entity_tokens: Vec<Option<(usize, usize)>>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_ids(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.id as usize).collect()
    }

    pub fn relation_args(&self, r: &Relation) -> (&EntitySpan, &EntitySpan) {
        (&self.entities[r.arg1], &self.entities[r.arg2])
    }

    /// Sentence index of the token at `token`.
    pub fn sentence_of_token(&self, token: usize) -> usize {
        self.sentence_starts
            .partition_point(|&s| s <= token)
            .saturating_sub(1)
    }

    /// Sentence index containing character offset `offset`.
    pub fn sentence_of_char(&self, offset: usize) -> usize {
        self.sentence_starts
            .partition_point(|&s| self.tokens.get(s).map_or(false, |t| t.start <= offset))
            .saturating_sub(1)
    }

    /// Sentence index of an entity, taken from its first character.
    pub fn sentence_of_entity(&self, entity: usize) -> usize {
        self.sentence_of_char(self.entities[entity].start)
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Byte offset of every character boundary, including the end.
pub(crate) fn char_boundaries(text: &str) -> Vec<usize> {
    let mut b: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
    b.push(text.len());
    b
}
