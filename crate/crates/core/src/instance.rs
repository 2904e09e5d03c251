//! Training instances: a whole document or one sentence of it, reduced to
//! token ids, BIO ids and token-level gold spans and relations.

use jnrf_corpus::{Document, RelationType};

use crate::heads::{partition_spans, RelationTargets, SpanRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoldRelation {
    /// Index into `Instance::spans` of the attribute.
    pub attr: usize,
    /// Index into `Instance::spans` of the drug.
    pub drug: usize,
    pub rtype: RelationType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub ids: Vec<usize>,
    pub labels: Vec<u8>,
    /// Gold spans sorted by start token.
    pub spans: Vec<SpanRef>,
    pub relations: Vec<GoldRelation>,
}

impl Instance {
    pub fn from_document(doc: &Document) -> Self {
        Self::from_range(doc, 0, doc.len())
    }

    /// Tokens `[start, end)` with the entities and relations wholly inside,
    /// positions rebased to zero.
    pub fn from_range(doc: &Document, start: usize, end: usize) -> Self {
        let mut order: Vec<(SpanRef, usize)> = doc
            .entity_tokens
            .iter()
            .enumerate()
            .filter_map(|(e, span)| {
                let (s, t) = (*span)?;
                (s >= start && t <= end).then(|| {
                    (
                        SpanRef {
                            start: s - start,
                            end: t - start,
                            etype: doc.entities[e].etype,
                        },
                        e,
                    )
                })
            })
            .collect();
        order.sort();
        let mut local = vec![None; doc.entities.len()];
        for (i, &(_, e)) in order.iter().enumerate() {
            local[e] = Some(i);
        }
        let relations = doc
            .relations
            .iter()
            .filter_map(|r| {
                Some(GoldRelation {
                    attr: local[r.arg1]?,
                    drug: local[r.arg2]?,
                    rtype: r.rtype,
                })
            })
            .collect();
        Self {
            ids: doc.tokens[start..end].iter().map(|t| t.id as usize).collect(),
            labels: doc.bio_labels[start..end].to_vec(),
            spans: order.into_iter().map(|(s, _)| s).collect(),
            relations,
        }
    }

    /// One instance per sentence.
    pub fn sentences(doc: &Document) -> Vec<Self> {
        let mut bounds = doc.sentence_starts.clone();
        bounds.push(doc.len());
        bounds
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| Self::from_range(doc, w[0], w[1]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Targets over the gold spans' own H/L partition.
    pub fn targets(&self) -> RelationTargets {
        let (h, l) = partition_spans(&self.spans);
        let mut pos_h = vec![usize::MAX; self.spans.len()];
        let mut pos_l = vec![usize::MAX; self.spans.len()];
        for (i, &s) in h.iter().enumerate() {
            pos_h[s] = i;
        }
        for (i, &s) in l.iter().enumerate() {
            pos_l[s] = i;
        }
        let mut t = RelationTargets::new(h.len(), l.len());
        for r in &self.relations {
            t.set(pos_h[r.drug], pos_l[r.attr], r.rtype.index());
        }
        t
    }

    /// Targets over arbitrary (e.g. predicted) spans: a relation is kept when
    /// both its gold spans appear in `spans` with identical range and type.
    pub fn targets_for(&self, spans: &[SpanRef]) -> RelationTargets {
        let (h, l) = partition_spans(spans);
        let find = |idx: &[usize], gold: SpanRef| idx.iter().position(|&i| spans[i] == gold);
        let mut t = RelationTargets::new(h.len(), l.len());
        for r in &self.relations {
            if let (Some(hi), Some(pi)) = (find(&h, self.spans[r.drug]), find(&l, self.spans[r.attr])) {
                t.set(hi, pi, r.rtype.index());
            }
        }
        t
    }
}
