//! Corpus statistics: entity and relation counts and document lengths.

use std::fmt::Write as _;

use crate::document::Document;
use crate::error::{CorpusError, Result};
use crate::schema::{EntityType, RelationType};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub entities: Vec<(EntityType, usize)>,
    pub relations: Vec<(RelationType, usize)>,
    pub lengths: LengthStats,
}

impl CorpusStats {
    pub fn entity_count(&self, t: EntityType) -> usize {
        self.entities[t.index()].1
    }

    pub fn relation_count(&self, t: RelationType) -> usize {
        self.relations[t.index()].1
    }

    /// Plain-text tables: counts by type, then token-length summary.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>10}", "Entity", "Count");
        for (t, n) in &self.entities {
            let _ = writeln!(s, "{:<16}{:>10}", t.name(), n);
        }
        let total: usize = self.entities.iter().map(|e| e.1).sum();
        let _ = writeln!(s, "{:<16}{:>10}", "Total", total);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<16}{:>10}", "Relation", "Count");
        for (t, n) in &self.relations {
            let _ = writeln!(s, "{:<16}{:>10}", t.name(), n);
        }
        let total: usize = self.relations.iter().map(|e| e.1).sum();
        let _ = writeln!(s, "{:<16}{:>10}", "Total", total);
        let _ = writeln!(s);
        let l = &self.lengths;
        let _ = writeln!(
            s,
            "{:<10}{:>10}{:>10}{:>10}{:>10}",
            "Docs", "Mean", "Std", "Min", "Max"
        );
        let _ = writeln!(
            s,
            "{:<10}{:>10.2}{:>10.2}{:>10}{:>10}",
            l.count, l.mean, l.std, l.min, l.max
        );
        s
    }
}

/// Counts over tokenized documents.
pub fn corpus_stats(docs: &[Document]) -> Result<CorpusStats> {
    if docs.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut entities: Vec<(EntityType, usize)> = EntityType::ALL.iter().map(|&t| (t, 0)).collect();
    let mut relations: Vec<(RelationType, usize)> =
        RelationType::ALL.iter().map(|&t| (t, 0)).collect();
    for d in docs {
        for e in &d.entities {
            entities[e.etype.index()].1 += 1;
        }
        for r in &d.relations {
            relations[r.rtype.index()].1 += 1;
        }
    }
    let lens: Vec<usize> = docs.iter().map(Document::len).collect();
    let n = lens.len() as f64;
    let mean = lens.iter().sum::<usize>() as f64 / n;
    let var = lens.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(CorpusStats {
        entities,
        relations,
        lengths: LengthStats {
            count: lens.len(),
            mean,
            std: var.sqrt(),
            min: *lens.iter().min().expect("non-empty"),
            max: *lens.iter().max().expect("non-empty"),
        },
    })
}
