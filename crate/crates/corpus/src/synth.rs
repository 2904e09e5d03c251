//! Seeded synthetic discharge-summary-like corpora in BRAT form.
//!
//! Every document is built from medication blocks (a drug sentence plus
//! attribute sentences at a sampled signed sentence distance) separated by
//! filler sentences. Condition words and numbers are shared between several
//! entity types and plain text, so their type is only recoverable from the
//! neighbouring cue words.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brat::write_document;
use crate::document::{Document, EntitySpan, Relation};
use crate::error::{CorpusError, Result};
use crate::schema::EntityType;
use crate::tokenize::wordpiece_tokenize;
use crate::vocab::{Vocab, UNK};

pub const MIN_LENGTH: usize = 16;
pub const MAX_LENGTH: usize = 32768;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_docs: usize,
    /// Inclusive document length range in tokens.
    pub length_range: (usize, usize),
    /// Target fraction of tokens inside entities.
    pub entity_density: f64,
    /// Weights over signed sentence distance `sIdx(drug) − sIdx(attribute)`.
    pub relation_profile: Vec<(i32, f64)>,
    pub doc_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_docs: 8,
            length_range: (200, 2000),
            entity_density: 0.15,
            relation_profile: vec![(0, 0.85), (-1, 0.10), (1, 0.05)],
            doc_prefix: "doc".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub vocab: Vocab,
    pub documents: Vec<Document>,
}

impl SynthCorpus {
    /// Writes every document pair plus `vocab.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        for doc in &self.documents {
            write_document(dir, doc)?;
        }
        self.vocab.save(dir.join("vocab.txt"))
    }
}

const PUNCT: &[&str] = &[".", ",", ":", "/", "(", ")", "-"];

const DRUG_HEADS: &[&str] = &[
    "lisino", "metopro", "atorva", "amlodi", "furose", "warfa", "predni", "gabape",
    "levoth", "omepra", "sertra", "tramad", "oxyco", "cefazo", "vancomy", "heparo",
];
const DRUG_TAILS: &[&str] = &["pril", "lol", "statin", "pine", "mide", "rin", "sone", "ntin", "zole", "cin"];

const UNITS: &[&str] = &["mg", "mcg", "g", "units", "meq", "ml"];
const FORMS: &[&str] = &[
    "tablet", "tablets", "capsule", "capsules", "patch", "inhaler", "cream", "solution",
    "suspension", "injection",
];
const DOSE_NOUNS: &[&str] = &["puffs", "sprays", "doses"];
const ROUTES: &[&[&str]] = &[
    &["po"], &["iv"], &["im"], &["sc"], &["topical"], &["oral"], &["inhaled"], &["pr"],
    &["sl"], &["by", "mouth"], &["per", "tube"],
];
const FREQS: &[&[&str]] = &[
    &["daily"], &["bid"], &["tid"], &["qid"], &["qhs"], &["prn"], &["weekly"],
    &["twice", "daily"], &["three", "times", "daily"], &["once", "a", "day"],
    &["as", "needed"], &["every", "morning"], &["at", "bedtime"],
];
const DURATION_UNITS: &[&str] = &["days", "weeks", "months"];
const MISC: &[&str] = &["x", "every", "hours"];
const NUMBERS: &[&str] = &[
    "1", "2", "3", "4", "5", "6", "7", "8", "10", "12", "14", "20", "25", "30", "40", "50",
    "60", "75", "80", "100", "120", "125", "200", "250", "325", "500", "650", "1000",
];
const CONDITIONS: &[&[&str]] = &[
    &["hypertension"], &["pain"], &["nausea"], &["vomiting"], &["rash"], &["infection"],
    &["fever"], &["anxiety"], &["insomnia"], &["diarrhea"], &["constipation"], &["headache"],
    &["edema"], &["cough"], &["dizziness"], &["hypotension"], &["bradycardia"],
    &["hyperkalemia"], &["bleeding"], &["pruritus"], &["seizures"], &["agitation"],
    &["pneumonia"], &["cellulitis"], &["chest", "pain"], &["urinary", "retention"],
    &["acute", "kidney", "injury"],
];
const REASON_CUES: &[&[&str]] = &[
    &["for"], &["to", "treat"], &["for", "treatment", "of"], &["for", "management", "of"],
];
const ADE_CUES: &[&[&str]] = &[
    &["complicated", "by"], &["which", "caused"], &["resulting", "in"],
    &["with", "subsequent"],
];
const ADE_SENTENCE_CUES: &[&[&str]] = &[
    &["patient", "developed"], &["course", "complicated", "by"], &["she", "developed"],
    &["he", "developed"], &["this", "caused"],
];
const DRUG_VERBS: &[&[&str]] = &[
    &["started"], &["continue"], &["take"], &["given"], &["discharged", "on"], &["resumed"],
    &["increased"], &["patient", "was", "placed", "on"], &["home", "medications", "include"],
];
const DRUG_AFTER_VERBS: &[&[&str]] = &[
    &["was", "held"], &["was", "discontinued"], &["was", "stopped"], &["was", "started"],
    &["was", "changed"],
];
const ATTR_LEADS: &[&[&str]] = &[
    &["the", "dose", "was"], &["instructed", "to", "take"], &["this", "was", "given"],
    &["plan", ":"], &["regimen", ":"], &["dosing"],
];
const O_CONDITION_CUES: &[&[&str]] = &[
    &["denies"], &["no"], &["history", "of"], &["family", "history", "of"], &["without"],
];
const FILLER: &[&str] = &[
    "the", "patient", "was", "admitted", "with", "and", "in", "on", "at", "is", "a", "to",
    "of", "stable", "noted", "exam", "unremarkable", "labs", "were", "within", "normal",
    "limits", "seen", "by", "team", "service", "floor", "overnight", "vital", "signs",
    "remained", "afebrile", "tolerating", "diet", "ambulating", "independently", "follow",
    "up", "clinic", "primary", "care", "physician", "discussed", "plan", "family", "daughter",
    "son", "wife", "husband", "home", "services", "physical", "therapy", "evaluation",
    "imaging", "showed", "mild", "changes", "consistent", "chronic", "ct", "scan", "chest",
    "abdomen", "pelvis", "ekg", "sinus", "rhythm", "echo", "ejection", "fraction",
    "preserved", "transferred", "icu", "extubated", "monitored", "telemetry", "events",
    "course", "hospital", "presented", "emergency", "department", "complaining", "weakness",
    "fatigue", "shortness", "breath", "improved", "significantly", "over", "next", "several",
    "cultures", "negative", "blood", "urine", "workup", "consult", "cardiology", "renal",
    "function", "baseline", "creatinine", "repeat", "prior", "discharge", "condition", "good",
    "mental", "status", "alert", "oriented", "ago", "age", "year", "old", "bp", "hr",
    "weight", "kg", "score", "she", "he", "reports",
];

#[derive(Debug, Clone)]
struct Word {
    text: &'static str,
    owned: Option<String>,
    entity: Option<usize>,
    glue: bool,
}

impl Word {
    fn text(&self) -> &str {
        self.owned.as_deref().unwrap_or(self.text)
    }
}

#[derive(Debug, Clone)]
struct PendingEntity {
    etype: EntityType,
    drug: Option<usize>,
}

struct Lexicon {
    vocab: Vocab,
    token_counts: HashMap<String, usize>,
}

impl Lexicon {
    fn build() -> Result<Self> {
        let mut tokens: Vec<String> = vec![UNK.to_string()];
        let mut push = |t: &str| {
            if !tokens.iter().any(|x| x == t) {
                tokens.push(t.to_string());
            }
        };
        for p in PUNCT {
            push(p);
        }
        for list in [UNITS, FORMS, DOSE_NOUNS, DURATION_UNITS, MISC, NUMBERS, FILLER] {
            for w in list {
                push(w);
            }
        }
        for list in [
            ROUTES, FREQS, CONDITIONS, REASON_CUES, ADE_CUES, ADE_SENTENCE_CUES, DRUG_VERBS,
            DRUG_AFTER_VERBS, ATTR_LEADS, O_CONDITION_CUES,
        ] {
            for phrase in list {
                for w in *phrase {
                    push(w);
                }
            }
        }
        for h in DRUG_HEADS {
            push(h);
        }
        for t in DRUG_TAILS {
            push(&format!("##{t}"));
        }
        let vocab = Vocab::new(tokens)?;
        let mut token_counts = HashMap::new();
        for t in vocab.tokens() {
            if !t.starts_with("##") && t != UNK {
                token_counts.insert(t.clone(), 1);
            }
        }
        for h in DRUG_HEADS {
            for t in DRUG_TAILS {
                let name = format!("{h}{t}");
                let toks = wordpiece_tokenize(&name, &vocab);
                if toks.len() != 2 || toks.iter().any(|t| t.id == vocab.unk_id()) {
                    return Err(CorpusError::Synth(format!("drug name {name} does not split cleanly")));
                }
                token_counts.insert(name, 2);
            }
        }
        Ok(Self { vocab, token_counts })
    }

    fn count(&self, w: &Word) -> usize {
        self.token_counts[w.text()]
    }
}

struct Builder {
    rng: ChaCha8Rng,
    profile: Vec<(i32, f64)>,
    entities: Vec<PendingEntity>,
}

type Sentence = Vec<Word>;

fn plain(text: &'static str) -> Word {
    Word {
        text,
        owned: None,
        entity: None,
        glue: PUNCT.contains(&text) && text != "(",
    }
}

impl Builder {
    fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        *items.choose(&mut self.rng).expect("non-empty list")
    }

    fn new_entity(&mut self, etype: EntityType, drug: Option<usize>) -> usize {
        self.entities.push(PendingEntity { etype, drug });
        self.entities.len() - 1
    }

    fn push_plain(s: &mut Sentence, words: &[&'static str]) {
        s.extend(words.iter().map(|w| plain(w)));
    }

    fn push_entity(s: &mut Sentence, words: &[&'static str], entity: usize) {
        s.extend(words.iter().map(|w| Word {
            entity: Some(entity),
            ..plain(w)
        }));
    }

    fn drug_name(&mut self, entity: usize) -> Word {
        let name = format!("{}{}", self.pick(DRUG_HEADS), self.pick(DRUG_TAILS));
        Word {
            text: "",
            owned: Some(name),
            entity: Some(entity),
            glue: false,
        }
    }

    fn sample_distance(&mut self) -> i32 {
        let total: f64 = self.profile.iter().map(|p| p.1).sum();
        let mut u = self.rng.random::<f64>() * total;
        for &(d, w) in &self.profile {
            if u < w {
                return d;
            }
            u -= w;
        }
        self.profile.last().map_or(0, |p| p.0)
    }

    /// Renders one attribute phrase (cue words included) into `s`.
    fn attribute(&mut self, s: &mut Sentence, etype: EntityType, drug: usize, with_form: bool) {
        let e = self.new_entity(etype, Some(drug));
        match etype {
            EntityType::Strength => {
                let n = self.pick(NUMBERS);
                let u = self.pick(UNITS);
                Self::push_entity(s, &[n, u], e);
            }
            EntityType::Dosage => {
                let n = self.pick(NUMBERS);
                Self::push_entity(s, &[n], e);
                if !with_form {
                    let noun = self.pick(DOSE_NOUNS);
                    Self::push_plain(s, &[noun]);
                }
            }
            EntityType::Form => {
                let f = self.pick(FORMS);
                Self::push_entity(s, &[f], e);
            }
            EntityType::Route => {
                let r = self.pick(ROUTES);
                Self::push_entity(s, r, e);
            }
            EntityType::Frequency => {
                if self.rng.random_bool(0.2) {
                    let n = self.pick(NUMBERS);
                    Self::push_entity(s, &["every", n, "hours"], e);
                } else {
                    let f = self.pick(FREQS);
                    Self::push_entity(s, f, e);
                }
            }
            EntityType::Duration => {
                let cue = if self.rng.random_bool(0.7) { "for" } else { "x" };
                Self::push_plain(s, &[cue]);
                let n = self.pick(NUMBERS);
                let u = self.pick(DURATION_UNITS);
                Self::push_entity(s, &[n, u], e);
            }
            EntityType::Reason => {
                let cue = self.pick(REASON_CUES);
                Self::push_plain(s, cue);
                let c = self.pick(CONDITIONS);
                Self::push_entity(s, c, e);
            }
            EntityType::Ade => {
                let cue = self.pick(ADE_CUES);
                Self::push_plain(s, cue);
                let c = self.pick(CONDITIONS);
                Self::push_entity(s, c, e);
            }
            EntityType::Drug => unreachable!("drugs are not attributes"),
        }
    }

    /// Attributes of one sentence in canonical order.
    fn attribute_run(&mut self, s: &mut Sentence, attrs: &[EntityType], drug: usize) {
        let has_form = attrs.contains(&EntityType::Form);
        for &t in attrs {
            if t == EntityType::Ade && s.len() > 2 {
                s.push(plain(","));
            }
            self.attribute(s, t, drug, has_form);
        }
    }

    fn attribute_sentence(&mut self, attrs: &[EntityType], drug: usize) -> Sentence {
        let mut s = Vec::new();
        if attrs == [EntityType::Ade] {
            let cue = self.pick(ADE_SENTENCE_CUES);
            Self::push_plain(&mut s, cue);
            let e = self.new_entity(EntityType::Ade, Some(drug));
            let c = self.pick(CONDITIONS);
            Self::push_entity(&mut s, c, e);
        } else {
            let lead = self.pick(ATTR_LEADS);
            Self::push_plain(&mut s, lead);
            self.attribute_run(&mut s, attrs, drug);
        }
        s.push(plain("."));
        s
    }

    fn medication_block(&mut self) -> Vec<Sentence> {
        const INCLUDE: [(EntityType, f64); 8] = [
            (EntityType::Strength, 0.7),
            (EntityType::Dosage, 0.35),
            (EntityType::Form, 0.4),
            (EntityType::Route, 0.5),
            (EntityType::Frequency, 0.6),
            (EntityType::Duration, 0.25),
            (EntityType::Reason, 0.35),
            (EntityType::Ade, 0.15),
        ];
        let mut by_offset: Vec<(i32, Vec<EntityType>)> = Vec::new();
        for (t, p) in INCLUDE {
            if self.rng.random_bool(p) {
                let offset = -self.sample_distance();
                match by_offset.iter_mut().find(|(o, _)| *o == offset) {
                    Some((_, v)) => v.push(t),
                    None => by_offset.push((offset, vec![t])),
                }
            }
        }
        if by_offset.is_empty() {
            by_offset.push((0, vec![EntityType::Strength]));
        }
        let drug = self.new_entity(EntityType::Drug, None);
        let lo = by_offset.iter().map(|b| b.0).min().unwrap_or(0).min(0);
        let hi = by_offset.iter().map(|b| b.0).max().unwrap_or(0).max(0);
        let mut sentences = Vec::new();
        for offset in lo..=hi {
            let attrs = by_offset
                .iter()
                .find(|b| b.0 == offset)
                .map(|b| b.1.clone())
                .unwrap_or_default();
            if offset == 0 {
                sentences.push(self.drug_sentence(drug, &attrs, lo < 0));
            } else if attrs.is_empty() {
                let len = self.rng.random_range(4..=10);
                sentences.push(self.filler_sentence(len));
            } else {
                sentences.push(self.attribute_sentence(&attrs, drug));
            }
        }
        sentences
    }

    fn drug_sentence(&mut self, drug: usize, attrs: &[EntityType], after_mention: bool) -> Sentence {
        let mut s = Vec::new();
        let name = self.drug_name(drug);
        if after_mention && attrs.is_empty() {
            s.push(name);
            let v = self.pick(DRUG_AFTER_VERBS);
            Self::push_plain(&mut s, v);
        } else {
            let v = self.pick(DRUG_VERBS);
            Self::push_plain(&mut s, v);
            s.push(name);
            self.attribute_run(&mut s, attrs, drug);
        }
        s.push(plain("."));
        s
    }

    fn filler_sentence(&mut self, len: usize) -> Sentence {
        let mut s: Sentence = Vec::with_capacity(len + 1);
        let body = len.saturating_sub(1).max(1);
        while s.len() < body {
            let room = body - s.len();
            let roll = self.rng.random::<f64>();
            if room >= 4 && roll < 0.15 {
                let cue = self.pick(O_CONDITION_CUES);
                let c = self.pick(CONDITIONS);
                if cue.len() + c.len() <= room {
                    Self::push_plain(&mut s, cue);
                    Self::push_plain(&mut s, c);
                    continue;
                }
            }
            if room >= 4 && (0.15..0.3).contains(&roll) {
                let n = self.pick(NUMBERS);
                match self.rng.random_range(0..4) {
                    0 => Self::push_plain(&mut s, &["age", n]),
                    1 => {
                        let m = self.pick(NUMBERS);
                        Self::push_plain(&mut s, &["bp", n, "/", m]);
                    }
                    2 => {
                        let u = self.pick(DURATION_UNITS);
                        Self::push_plain(&mut s, &[n, u, "ago"]);
                    }
                    _ => Self::push_plain(&mut s, &["hr", n]),
                }
                continue;
            }
            let w = self.pick(FILLER);
            s.push(plain(w));
        }
        if len >= 2 {
            s.push(plain("."));
        }
        s
    }
}

fn sentence_tokens(lex: &Lexicon, s: &Sentence) -> usize {
    s.iter().map(|w| lex.count(w)).sum()
}

fn validate(config: &SynthConfig) -> Result<()> {
    let (lo, hi) = config.length_range;
    if lo < MIN_LENGTH || hi > MAX_LENGTH || lo > hi {
        return Err(CorpusError::Synth(format!(
            "length range {lo}..={hi} must lie within {MIN_LENGTH}..={MAX_LENGTH}"
        )));
    }
    if !(0.0..1.0).contains(&config.entity_density) {
        return Err(CorpusError::Synth(format!(
            "entity density {} must be in [0, 1)",
            config.entity_density
        )));
    }
    if config.relation_profile.is_empty()
        || config.relation_profile.iter().any(|p| !(p.1 >= 0.0) || p.0.abs() > 8)
        || config.relation_profile.iter().map(|p| p.1).sum::<f64>() <= 0.0
    {
        return Err(CorpusError::Synth(
            "relation profile needs non-negative weights over distances within ±8".into(),
        ));
    }
    Ok(())
}

/// Generates `n_docs` documents; the result is a pure function of `config`.
pub fn synth_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    validate(config)?;
    let lex = Lexicon::build()?;
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        profile: config.relation_profile.clone(),
        entities: Vec::new(),
    };
    let ceiling = density_ceiling(&mut b, &lex);
    if config.entity_density > ceiling {
        return Err(CorpusError::Synth(format!(
            "entity density {} exceeds the attainable {ceiling:.3}",
            config.entity_density
        )));
    }
    let mut documents = Vec::with_capacity(config.n_docs);
    for i in 0..config.n_docs {
        let target = b.rng.random_range(config.length_range.0..=config.length_range.1);
        b.entities.clear();
        let mut sentences: Vec<Sentence> = Vec::new();
        let (mut used, mut entity_tokens) = (0usize, 0usize);
        loop {
            let remaining = target - used;
            if remaining == 0 {
                break;
            }
            let want_block = (entity_tokens as f64) <= config.entity_density * used as f64;
            let mark = b.entities.len();
            let unit: Vec<Sentence> = if want_block && config.entity_density > 0.0 {
                let mut unit = b.medication_block();
                if used > 0 {
                    let len = b.rng.random_range(4..=8);
                    unit.insert(0, b.filler_sentence(len));
                }
                unit
            } else {
                let len = b.rng.random_range(5..=14);
                vec![b.filler_sentence(len)]
            };
            let n: usize = unit.iter().map(|s| sentence_tokens(&lex, s)).sum();
            if n <= remaining {
                entity_tokens += unit
                    .iter()
                    .flatten()
                    .filter(|w| w.entity.is_some())
                    .map(|w| lex.count(w))
                    .sum::<usize>();
                used += n;
                sentences.extend(unit);
            } else {
                b.entities.truncate(mark);
                sentences.push(b.filler_sentence(remaining));
                used += remaining;
            }
        }
        let doc_id = format!("{}{:04}", config.doc_prefix, i);
        let mut doc = render(&mut b, doc_id, &sentences);
        doc.prepare(&lex.vocab)?;
        debug_assert_eq!(doc.tokens.len(), target);
        documents.push(doc);
    }
    Ok(SynthCorpus {
        vocab: lex.vocab.clone(),
        documents,
    })
}

/// Entity-token fraction of back-to-back medication blocks with the shortest
/// separators. Uses a cloned generator so the main stream is untouched.
fn density_ceiling(b: &mut Builder, lex: &Lexicon) -> f64 {
    let mut probe = Builder {
        rng: b.rng.clone(),
        profile: b.profile.clone(),
        entities: Vec::new(),
    };
    let (mut inside, mut total) = (0usize, 0usize);
    for _ in 0..256 {
        let block = probe.medication_block();
        inside += block
            .iter()
            .flatten()
            .filter(|w| w.entity.is_some())
            .map(|w| lex.count(w))
            .sum::<usize>();
        total += block.iter().map(|s| sentence_tokens(lex, s)).sum::<usize>() + 4;
    }
    inside as f64 / total as f64
}

fn render(b: &mut Builder, doc_id: String, sentences: &[Sentence]) -> Document {
    let mut text = String::new();
    let mut chars = 0usize;
    let mut spans: Vec<Option<(usize, usize)>> = vec![None; b.entities.len()];
    for (k, s) in sentences.iter().enumerate() {
        if k > 0 {
            let sep = match b.rng.random_range(0..20) {
                0 => "\n\n",
                1..=5 => "\n",
                _ => " ",
            };
            text.push_str(sep);
            chars += sep.len();
        }
        for (j, w) in s.iter().enumerate() {
            if j > 0 && !w.glue && !matches!(s[j - 1].text(), "(" | "/") {
                text.push(' ');
                chars += 1;
            }
            let start = chars;
            text.push_str(w.text());
            chars += w.text().chars().count();
            if let Some(e) = w.entity {
                let span = spans[e].get_or_insert((start, chars));
                span.1 = chars;
            }
        }
    }
    let mut order: Vec<usize> = (0..b.entities.len()).filter(|&e| spans[e].is_some()).collect();
    order.sort_by_key(|&e| spans[e].map(|s| s.0));
    let mut new_index = vec![usize::MAX; b.entities.len()];
    let mut entities = Vec::with_capacity(order.len());
    for (k, &e) in order.iter().enumerate() {
        new_index[e] = k;
        let (start, end) = spans[e].expect("rendered entity");
        entities.push(EntitySpan {
            id: format!("T{}", k + 1),
            etype: b.entities[e].etype,
            start,
            end,
            surface: text[start..end].to_string(),
        });
    }
    let mut relations = Vec::new();
    for &e in &order {
        if let Some(drug) = b.entities[e].drug {
            let rtype = b.entities[e].etype.relation().expect("attribute type");
            relations.push(Relation {
                id: format!("R{}", relations.len() + 1),
                rtype,
                arg1: new_index[e],
                arg2: new_index[drug],
            });
        }
    }
    Document {
        doc_id,
        text,
        entities,
        relations,
        ..Document::default()
    }
}
