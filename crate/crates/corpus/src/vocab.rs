use std::collections::HashMap;
use std::path::Path;

use crate::error::{CorpusError, Result};

pub const UNK: &str = "[UNK]";
pub const CONTINUATION: &str = "##";

/// Token inventory; ids are line numbers of the vocab file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    unk: u32,
}

impl Vocab {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(CorpusError::Vocab(format!("line {}: invalid token {t:?}", i + 1)));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(CorpusError::Vocab(format!("line {}: duplicate token {t:?}", i + 1)));
            }
        }
        let unk = *ids
            .get(UNK)
            .ok_or_else(|| CorpusError::Vocab(format!("missing {UNK}")))?;
        Ok(Self { tokens, ids, unk })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.lines())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| CorpusError::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
