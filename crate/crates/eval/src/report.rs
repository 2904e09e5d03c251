//! Corpus-level report: entity and end-to-end scores, overall and by type,
//! document length and sentence distance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use jnrf_corpus::{Document, EntityType, RelationType};

use crate::bins::{fd_length_bins, LengthBins};
use crate::error::{EvalError, Result};
use crate::matching::{match_entities, match_relation_refs, sentence_distance, MatchCounts, MatchMode, RelationRef};

#[derive(Debug, Clone, PartialEq)]
pub struct LengthRow {
    pub lo: usize,
    pub hi: usize,
    pub docs: usize,
    pub counts: MatchCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ner: MatchCounts,
    pub ner_by_type: Vec<(EntityType, MatchCounts)>,
    pub e2e: MatchCounts,
    pub e2e_by_type: Vec<(RelationType, MatchCounts)>,
    /// End-to-end counts per non-empty length bin.
    pub by_length: Vec<LengthRow>,
    pub length_bin_width: usize,
    /// End-to-end counts keyed by signed sentence distance.
    pub by_distance: BTreeMap<i64, MatchCounts>,
}

fn refs(doc: &Document) -> Vec<RelationRef<'_>> {
    doc.relations.iter().map(|r| RelationRef::resolve(doc, r)).collect()
}

/// Pairs predictions with gold by document id.
fn pair_up<'a>(pred: &'a [Document], gold: &'a [Document]) -> Result<Vec<(&'a Document, &'a Document)>> {
    let by_id: BTreeMap<&str, &Document> = pred.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|d| d.doc_id.as_str()).collect();
    let missing: Vec<String> = gold
        .iter()
        .filter(|g| !by_id.contains_key(g.doc_id.as_str()))
        .map(|g| g.doc_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingDocuments(missing));
    }
    let unknown: Vec<String> = pred
        .iter()
        .filter(|p| !gold_ids.contains(p.doc_id.as_str()))
        .map(|p| p.doc_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownDocuments(unknown));
    }
    Ok(gold.iter().map(|g| (by_id[g.doc_id.as_str()], g)).collect())
}

pub fn build_report(pred: &[Document], gold: &[Document], mode: MatchMode) -> Result<EvalReport> {
    let pairs = pair_up(pred, gold)?;
    let lengths: Vec<usize> = gold.iter().map(Document::len).collect();
    let bins = fd_length_bins(&lengths).unwrap_or(LengthBins {
        width: lengths.iter().copied().max().unwrap_or(1).max(1),
    });

    let mut ner_by_type: Vec<(EntityType, MatchCounts)> = EntityType::ALL.iter().map(|&t| (t, MatchCounts::default())).collect();
    let mut e2e_by_type: Vec<(RelationType, MatchCounts)> = RelationType::ALL.iter().map(|&t| (t, MatchCounts::default())).collect();
    let mut by_bin: BTreeMap<usize, (usize, MatchCounts)> = BTreeMap::new();
    let mut by_distance: BTreeMap<i64, MatchCounts> = BTreeMap::new();

    for (p, g) in pairs {
        for (t, c) in &mut ner_by_type {
            let pe: Vec<_> = p.entities.iter().filter(|e| e.etype == *t).cloned().collect();
            let ge: Vec<_> = g.entities.iter().filter(|e| e.etype == *t).cloned().collect();
            *c += match_entities(&pe, &ge, mode);
        }
        let (pr, gr) = (refs(p), refs(g));
        let mut doc_e2e = MatchCounts::default();
        for (t, c) in &mut e2e_by_type {
            let ps: Vec<_> = pr.iter().filter(|r| r.relation.rtype == *t).copied().collect();
            let gs: Vec<_> = gr.iter().filter(|r| r.relation.rtype == *t).copied().collect();
            let m = match_relation_refs(&ps, &gs, mode);
            *c += m;
            doc_e2e += m;
        }
        let slot = by_bin.entry(bins.bin_of(g.len())).or_default();
        slot.0 += 1;
        slot.1 += doc_e2e;

        let p_dist: Vec<i64> = pr.iter().map(|r| sentence_distance(r.relation, p)).collect();
        let g_dist: Vec<i64> = gr.iter().map(|r| sentence_distance(r.relation, g)).collect();
        let keys: BTreeSet<i64> = p_dist.iter().chain(&g_dist).copied().collect();
        for k in keys {
            let ps: Vec<_> = pr.iter().zip(&p_dist).filter(|(_, &d)| d == k).map(|(r, _)| *r).collect();
            let gs: Vec<_> = gr.iter().zip(&g_dist).filter(|(_, &d)| d == k).map(|(r, _)| *r).collect();
            *by_distance.entry(k).or_default() += match_relation_refs(&ps, &gs, mode);
        }
    }

    let sum = |it: &mut dyn Iterator<Item = MatchCounts>| {
        let mut total = MatchCounts::default();
        for c in it {
            total += c;
        }
        total
    };
    Ok(EvalReport {
        ner: sum(&mut ner_by_type.iter().map(|x| x.1)),
        e2e: sum(&mut e2e_by_type.iter().map(|x| x.1)),
        ner_by_type,
        e2e_by_type,
        by_length: by_bin
            .into_iter()
            .map(|(b, (docs, counts))| {
                let (lo, hi) = bins.range(b);
                LengthRow { lo, hi, docs, counts }
            })
            .collect(),
        length_bin_width: bins.width,
        by_distance,
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl EvalReport {
    /// `(section, key, counts)` rows in report order.
    pub fn rows(&self) -> Vec<(&'static str, String, MatchCounts)> {
        let mut rows = vec![("ner", "overall".to_string(), self.ner)];
        rows.extend(self.ner_by_type.iter().map(|(t, c)| ("ner", t.to_string(), *c)));
        rows.push(("e2e", "overall".to_string(), self.e2e));
        rows.extend(self.e2e_by_type.iter().map(|(t, c)| ("e2e", t.to_string(), *c)));
        rows.extend(self.by_length.iter().map(|r| ("length", format!("[{}, {}]", r.lo, r.hi), r.counts)));
        rows.extend(self.by_distance.iter().map(|(d, c)| ("distance", d.to_string(), *c)));
        rows
    }

    /// `section<TAB>key<TAB>P<TAB>R<TAB>F1`, percentages with two decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("section\tkey\tP\tR\tF1\n");
        for (section, key, c) in self.rows() {
            writeln!(out, "{section}\t{key}\t{}\t{}\t{}", pct(c.precision()), pct(c.recall()), pct(c.f1())).unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let table = |out: &mut String, title: &str, head: &str, rows: Vec<(String, String, MatchCounts)>| {
            writeln!(out, "{title}").unwrap();
            writeln!(out, "{head:<20} {:>8} {:>8} {:>8} {:>8} {:>8}", "count", "gold", "P", "R", "F1").unwrap();
            for (key, count, c) in rows {
                writeln!(
                    out,
                    "{key:<20} {count:>8} {:>8} {:>8} {:>8} {:>8}",
                    c.gold(),
                    pct(c.precision()),
                    pct(c.recall()),
                    pct(c.f1())
                )
                .unwrap();
            }
            writeln!(out).unwrap();
        };
        let typed = |overall: MatchCounts, by: Vec<(String, MatchCounts)>| {
            let mut rows: Vec<_> = by.into_iter().map(|(k, c)| (k, c.predicted().to_string(), c)).collect();
            rows.push(("overall".into(), overall.predicted().to_string(), overall));
            rows
        };
        table(
            &mut out,
            "Entities",
            "type",
            typed(self.ner, self.ner_by_type.iter().map(|(t, c)| (t.to_string(), *c)).collect()),
        );
        table(
            &mut out,
            "End-to-end relations",
            "type",
            typed(self.e2e, self.e2e_by_type.iter().map(|(t, c)| (t.to_string(), *c)).collect()),
        );
        table(
            &mut out,
            &format!("By document length (bin width {})", self.length_bin_width),
            "tokens",
            self.by_length
                .iter()
                .map(|r| (format!("[{}, {}]", r.lo, r.hi), r.docs.to_string(), r.counts))
                .collect(),
        );
        table(
            &mut out,
            "By sentence distance",
            "distance",
            self.by_distance
                .iter()
                .map(|(d, c)| (d.to_string(), c.predicted().to_string(), *c))
                .collect(),
        );
        out
    }
}
