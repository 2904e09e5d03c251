//! The full joint model: input MLP, shared language model, entity head,
//! relation encoder, selective pooling and relation heads.

use jnrf_corpus::{Document, EntitySpan, Relation};
use jnrf_tensor::{Scalar, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::embedding::EmbeddingTable;
use crate::error::{CoreError, Result};
use crate::heads::{
    argmax_rows, decode_bio, distance_matrix, joint_loss, ner_head, ner_loss, predict_relations,
    re_loss, relation_scores, selective_pool, RelationHeads, SpanRef,
};
use crate::instance::Instance;
use crate::layers::{Linear, Mlp};
use crate::mixers::SharedLm;
use crate::params::{accumulate_grads, ParamStore};
use jnrf_corpus::NUM_LABELS;

/// Which spans feed the relation heads during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolSource {
    #[default]
    Gold,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub input: Linear,
    pub lm: SharedLm,
    pub ner: Mlp,
    pub re: Mlp,
    pub relation: RelationHeads,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jnrf<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub table: EmbeddingTable<T>,
    layout: Layout,
}

#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub e2: Var,
    pub logits: Var,
    pub e3: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub ner: Var,
    pub re: Option<Var>,
    pub total: Var,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValues {
    pub ner: f64,
    pub re: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<u8>,
    pub spans: Vec<SpanRef>,
    /// `(attribute span, drug span, type)` as indices into `spans`.
    pub relations: Vec<(usize, usize, jnrf_corpus::RelationType)>,
}

impl<T: Scalar> Jnrf<T> {
    pub fn new(config: ModelConfig, table: EmbeddingTable<T>) -> Result<Self> {
        config.validate()?;
        if table.vocab_size() != config.vocab_size || table.dim() != config.embed_dim {
            return Err(CoreError::Config(format!(
                "embedding table is {}x{}, config expects {}x{}",
                table.vocab_size(),
                table.dim(),
                config.vocab_size,
                config.embed_dim
            )));
        }
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let d = config.hidden;
        let layout = Layout {
            input: Linear::new(&mut params, &mut rng, "input", config.embed_dim, d, true),
            lm: SharedLm::new(&mut params, &mut rng, d, &config.mixer, config.lm_window),
            ner: Mlp::new(&mut params, &mut rng, "ner", d, config.head_hidden, NUM_LABELS),
            re: Mlp::new(&mut params, &mut rng, "re", d, config.head_hidden, d),
            relation: RelationHeads::new(&mut params, &mut rng, d, config.qk_layers),
        };
        Ok(Self {
            config,
            params,
            table,
            layout,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Slot of the distance coefficients.
    pub fn alpha_slot(&self) -> usize {
        self.layout.relation.alpha
    }

    /// Records the parameters on `tape`; a frozen α is recorded as a constant.
    pub fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        let alpha = self.alpha_slot();
        self.params
            .values()
            .iter()
            .enumerate()
            .map(|(slot, v)| {
                if slot == alpha && self.config.freeze_alpha {
                    tape.constant(v.clone())
                } else {
                    tape.param(v.clone())
                }
            })
            .collect()
    }

    /// Embedding through the entity logits and the relation encoding.
    pub fn encode(&self, tape: &mut Tape<T>, vars: &[Var], ids: &[usize]) -> Result<Encoded> {
        let e = tape.constant(self.table.embed(ids)?);
        let e1 = self.layout.input.forward(tape, vars, e)?;
        let e1 = tape.gelu(e1);
        let e2 = self.layout.lm.forward(tape, vars, e1)?;
        let logits = ner_head(tape, vars, &self.layout.ner, e2)?;
        let e3 = self.layout.re.forward(tape, vars, e2)?;
        Ok(Encoded { e2, logits, e3 })
    }

    /// Relation scores over `spans`; empty when either side is empty.
    pub fn score_spans(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        e3: Var,
        spans: &[SpanRef],
    ) -> Result<(crate::heads::Pooled, Vec<Var>)> {
        let pooled = selective_pool(tape, e3, spans, self.config.pooling)?;
        let psi = match (pooled.q, pooled.k) {
            (Some(q), Some(k)) => {
                let dist = distance_matrix(&pooled.pos_h, &pooled.pos_l);
                relation_scores(tape, vars, &self.layout.relation, q, k, &dist)?
            }
            _ => Vec::new(),
        };
        Ok((pooled, psi))
    }

    pub fn forward_loss(&self, tape: &mut Tape<T>, vars: &[Var], inst: &Instance, source: PoolSource) -> Result<LossVars> {
        let enc = self.encode(tape, vars, &inst.ids)?;
        let ner = ner_loss(tape, enc.logits, &inst.labels)?;
        let (spans, targets) = match source {
            PoolSource::Gold => (inst.spans.clone(), inst.targets()),
            PoolSource::Predicted => {
                let spans = decode_bio(&argmax_rows(tape.value(enc.logits)));
                let targets = inst.targets_for(&spans);
                (spans, targets)
            }
        };
        let (_, psi) = self.score_spans(tape, vars, enc.e3, &spans)?;
        let re = if psi.is_empty() {
            None
        } else {
            re_loss(tape, &psi, &targets)?
        };
        let total = joint_loss(tape, ner, re)?;
        Ok(LossVars { ner, re, total })
    }

    /// Loss values and per-parameter gradients for one instance.
    pub fn loss_and_grads(&self, inst: &Instance, source: PoolSource) -> Result<(LossValues, Vec<Tensor<T>>)> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let l = self.forward_loss(&mut tape, &vars, inst, source)?;
        tape.backward(l.total)?;
        let mut grads = self.params.zeros_like();
        accumulate_grads(&tape, &vars, &mut grads)?;
        let value = |v: Var| tape.value(v).data()[0].as_f64();
        Ok((
            LossValues {
                ner: value(l.ner),
                re: l.re.map_or(0.0, value),
                total: value(l.total),
            },
            grads,
        ))
    }

    pub fn loss(&self, inst: &Instance, source: PoolSource) -> Result<LossValues> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let l = self.forward_loss(&mut tape, &vars, inst, source)?;
        let value = |v: Var| tape.value(v).data()[0].as_f64();
        Ok(LossValues {
            ner: value(l.ner),
            re: l.re.map_or(0.0, value),
            total: value(l.total),
        })
    }

    /// Decoded entities and one relation per predicted attribute.
    pub fn predict(&self, ids: &[usize]) -> Result<Prediction> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let enc = self.encode(&mut tape, &vars, ids)?;
        let labels = argmax_rows(tape.value(enc.logits));
        let spans = decode_bio(&labels);
        let (pooled, psi) = self.score_spans(&mut tape, &vars, enc.e3, &spans)?;
        let psi: Vec<Tensor<T>> = psi.iter().map(|&p| tape.value(p).clone()).collect();
        let key_types: Vec<_> = pooled.l.iter().map(|&i| spans[i].etype).collect();
        let relations = predict_relations(&psi, &key_types)
            .into_iter()
            .map(|(h, p, r)| (pooled.l[p], pooled.h[h], r))
            .collect();
        Ok(Prediction {
            labels,
            spans,
            relations,
        })
    }

    /// A copy of `doc` whose entities and relations are the model's output.
    pub fn predict_document(&self, doc: &Document) -> Result<Document> {
        let p = self.predict(&doc.token_ids())?;
        let chars: Vec<(usize, char)> = doc.text.char_indices().collect();
        let byte = |c: usize| chars.get(c).map_or(doc.text.len(), |x| x.0);
        let entities: Vec<EntitySpan> = p
            .spans
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let start = doc.tokens[s.start].start;
                let end = doc.tokens[s.end - 1].end;
                EntitySpan {
                    id: format!("T{}", i + 1),
                    etype: s.etype,
                    start,
                    end,
                    surface: doc.text[byte(start)..byte(end)].to_string(),
                }
            })
            .collect();
        let relations = p
            .relations
            .iter()
            .enumerate()
            .map(|(k, &(a, d, rtype))| Relation {
                id: format!("R{}", k + 1),
                rtype,
                arg1: a,
                arg2: d,
            })
            .collect();
        let mut out = Document {
            doc_id: doc.doc_id.clone(),
            text: doc.text.clone(),
            tokens: doc.tokens.clone(),
            sentence_starts: doc.sentence_starts.clone(),
            entities,
            relations,
            ..Document::default()
        };
        out.entity_tokens = p.spans.iter().map(|s| Some((s.start, s.end))).collect();
        out.bio_labels = p.labels;
        Ok(out)
    }
}
