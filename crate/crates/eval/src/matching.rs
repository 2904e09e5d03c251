//! Greedy one-to-one matching of predicted against gold entities and relations.

use std::ops::AddAssign;

use jnrf_corpus::{Document, EntitySpan, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Precision, recall and F1 as fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn scores(&self) -> Scores {
        Scores {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }

    /// Gold items counted.
    pub fn gold(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn predicted(&self) -> usize {
        self.tp + self.fp
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Same type and at least one shared character.
    #[default]
    Lenient,
    /// Same type and identical offsets.
    Strict,
}

pub fn spans_match(pred: &EntitySpan, gold: &EntitySpan, mode: MatchMode) -> bool {
    pred.etype == gold.etype
        && match mode {
            MatchMode::Lenient => pred.overlaps(gold.start, gold.end),
            MatchMode::Strict => pred.start == gold.start && pred.end == gold.end,
        }
}

/// For each prediction (in input order) the gold index it was paired with.
/// Predictions are visited in document order; each takes the first unmatched
/// gold item that `accepts` it.
fn greedy<P>(preds: &[P], n_gold: usize, order: impl Fn(&P) -> (usize, usize), accepts: impl Fn(&P, usize) -> bool) -> Vec<Option<usize>> {
    let mut visit: Vec<usize> = (0..preds.len()).collect();
    visit.sort_by_key(|&i| (order(&preds[i]), i));
    let mut taken = vec![false; n_gold];
    let mut out = vec![None; preds.len()];
    for i in visit {
        if let Some(g) = (0..n_gold).find(|&g| !taken[g] && accepts(&preds[i], g)) {
            taken[g] = true;
            out[i] = Some(g);
        }
    }
    out
}

fn counts(pairs: &[Option<usize>], n_gold: usize) -> MatchCounts {
    let tp = pairs.iter().flatten().count();
    MatchCounts {
        tp,
        fp: pairs.len() - tp,
        fn_: n_gold - tp,
    }
}

/// Entity pairing: `out[i]` is the gold entity matched by prediction `i`.
pub fn align_entities(pred: &[EntitySpan], gold: &[EntitySpan], mode: MatchMode) -> Vec<Option<usize>> {
    let mut gold_order: Vec<usize> = (0..gold.len()).collect();
    gold_order.sort_by_key(|&g| (gold[g].start, gold[g].end, g));
    let pairs = greedy(pred, gold.len(), |p| (p.start, p.end), |p, g| spans_match(p, &gold[gold_order[g]], mode));
    pairs.into_iter().map(|g| g.map(|g| gold_order[g])).collect()
}

pub fn match_entities(pred: &[EntitySpan], gold: &[EntitySpan], mode: MatchMode) -> MatchCounts {
    counts(&align_entities(pred, gold, mode), gold.len())
}

/// A relation with its argument spans resolved.
#[derive(Debug, Clone, Copy)]
pub struct RelationRef<'a> {
    pub relation: &'a Relation,
    pub attr: &'a EntitySpan,
    pub drug: &'a EntitySpan,
}

impl<'a> RelationRef<'a> {
    pub fn resolve(doc: &'a Document, relation: &'a Relation) -> Self {
        Self {
            relation,
            attr: &doc.entities[relation.arg1],
            drug: &doc.entities[relation.arg2],
        }
    }
}

pub fn relations_match(pred: &RelationRef, gold: &RelationRef, mode: MatchMode) -> bool {
    pred.relation.rtype == gold.relation.rtype
        && spans_match(pred.attr, gold.attr, mode)
        && spans_match(pred.drug, gold.drug, mode)
}

fn relation_order(r: &RelationRef) -> (usize, usize) {
    (r.attr.start, r.drug.start)
}

pub fn align_relations(pred: &[RelationRef], gold: &[RelationRef], mode: MatchMode) -> Vec<Option<usize>> {
    let mut gold_order: Vec<usize> = (0..gold.len()).collect();
    gold_order.sort_by_key(|&g| (relation_order(&gold[g]), g));
    let pairs = greedy(pred, gold.len(), relation_order, |p, g| relations_match(p, &gold[gold_order[g]], mode));
    pairs.into_iter().map(|g| g.map(|g| gold_order[g])).collect()
}

pub fn match_relation_refs(pred: &[RelationRef], gold: &[RelationRef], mode: MatchMode) -> MatchCounts {
    counts(&align_relations(pred, gold, mode), gold.len())
}

/// End-to-end relation counts for one document pair.
pub fn match_relations(pred: &Document, gold: &Document, mode: MatchMode) -> MatchCounts {
    let p: Vec<RelationRef> = pred.relations.iter().map(|r| RelationRef::resolve(pred, r)).collect();
    let g: Vec<RelationRef> = gold.relations.iter().map(|r| RelationRef::resolve(gold, r)).collect();
    match_relation_refs(&p, &g, mode)
}

/// `sIdx(drug) − sIdx(attribute)`: negative when the drug comes first.
pub fn sentence_distance(relation: &Relation, doc: &Document) -> i64 {
    doc.sentence_of_entity(relation.arg2) as i64 - doc.sentence_of_entity(relation.arg1) as i64
}
