//! BRAT standoff reading and writing (T and R lines only).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::document::{char_boundaries, Document, EntitySpan, Relation};
use crate::error::{CorpusError, Result};
use crate::schema::{EntityType, RelationType};
use crate::vocab::Vocab;

/// Parses one `.txt`/`.ann` pair. Tokens and labels are left empty; see
/// [`Document::prepare`].
pub fn parse_brat(doc_id: &str, txt: &str, ann: &str) -> Result<Document> {
    let bounds = char_boundaries(txt);
    let n_chars = bounds.len() - 1;
    let mut entities = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut pending = Vec::new();

    for (i, raw) in ann.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        match raw.as_bytes()[0] {
            b'T' => {
                let (id, e) = parse_entity(raw, line, txt, &bounds, n_chars)?;
                if by_id.insert(id.clone(), entities.len()).is_some() {
                    return Err(CorpusError::parse(line, format!("duplicate id {id}")));
                }
                entities.push(e);
            }
            b'R' => pending.push((line, raw)),
            b'#' | b'A' | b'M' | b'E' | b'N' | b'*' => {}
            _ => return Err(CorpusError::parse(line, format!("unrecognized line {raw:?}"))),
        }
    }

    let mut relations = Vec::with_capacity(pending.len());
    let mut rel_ids = HashMap::new();
    for (line, raw) in pending {
        let r = parse_relation(raw, line, &by_id, &entities)?;
        if rel_ids.insert(r.id.clone(), ()).is_some() {
            return Err(CorpusError::parse(line, format!("duplicate id {}", r.id)));
        }
        relations.push(r);
    }

    Ok(Document {
        doc_id: doc_id.to_string(),
        text: txt.to_string(),
        entities,
        relations,
        ..Document::default()
    })
}

fn parse_entity(
    raw: &str,
    line: usize,
    txt: &str,
    bounds: &[usize],
    n_chars: usize,
) -> Result<(String, EntitySpan)> {
    let mut fields = raw.splitn(3, '\t');
    let id = fields.next().unwrap_or_default();
    let body = fields
        .next()
        .ok_or_else(|| CorpusError::parse(line, "entity line needs a tab-separated type and offsets"))?;
    let (etype, offsets) = body
        .split_once(' ')
        .ok_or_else(|| CorpusError::parse(line, "entity line has no offsets"))?;
    let etype: EntityType = etype.parse().map_err(|e: String| CorpusError::parse(line, e))?;
    let mut start = usize::MAX;
    let mut end = 0;
    for frag in offsets.split(';') {
        let mut it = frag.split_whitespace();
        let (Some(s), Some(e), None) = (it.next(), it.next(), it.next()) else {
            return Err(CorpusError::parse(line, format!("bad offsets {frag:?}")));
        };
        let s: usize = s
            .parse()
            .map_err(|_| CorpusError::parse(line, format!("bad offset {s:?}")))?;
        let e: usize = e
            .parse()
            .map_err(|_| CorpusError::parse(line, format!("bad offset {e:?}")))?;
        if s >= e || e > n_chars {
            return Err(CorpusError::parse(
                line,
                format!("span {s}..{e} outside text of {n_chars} characters"),
            ));
        }
        start = start.min(s);
        end = end.max(e);
    }
    let span = EntitySpan {
        id: id.to_string(),
        etype,
        start,
        end,
        surface: txt[bounds[start]..bounds[end]].to_string(),
    };
    Ok((id.to_string(), span))
}

fn parse_relation(
    raw: &str,
    line: usize,
    by_id: &HashMap<String, usize>,
    entities: &[EntitySpan],
) -> Result<Relation> {
    let (id, body) = raw
        .split_once('\t')
        .ok_or_else(|| CorpusError::parse(line, "relation line needs a tab after the id"))?;
    let mut parts = body.split_whitespace();
    let (Some(rtype), Some(a1), Some(a2), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(CorpusError::parse(line, "relation line must be `<Type> Arg1:<T> Arg2:<T>`"));
    };
    let rtype: RelationType = rtype.parse().map_err(|e: String| CorpusError::parse(line, e))?;
    let arg = |field: &str, name: &str| -> Result<usize> {
        let target = field
            .strip_prefix(name)
            .and_then(|f| f.strip_prefix(':'))
            .ok_or_else(|| CorpusError::parse(line, format!("expected {name}:<id>, got {field:?}")))?;
        by_id
            .get(target)
            .copied()
            .ok_or_else(|| CorpusError::parse(line, format!("dangling reference {target}")))
    };
    let arg1 = arg(a1, "Arg1")?;
    let arg2 = arg(a2, "Arg2")?;
    if arg1 == arg2 {
        return Err(CorpusError::parse(line, "relation links an entity to itself"));
    }
    if entities[arg1].etype != rtype.attribute() || !entities[arg2].etype.is_drug() {
        return Err(CorpusError::parse(
            line,
            format!(
                "{rtype} cannot link {} to {}",
                entities[arg1].etype, entities[arg2].etype
            ),
        ));
    }
    Ok(Relation {
        id: id.to_string(),
        rtype,
        arg1,
        arg2,
    })
}

/// Serializes entities and relations as BRAT standoff. Entities without an
/// id are numbered `T1, T2, …` by position.
pub fn to_ann(doc: &Document) -> String {
    let ids: Vec<String> = doc
        .entities
        .iter()
        .enumerate()
        .map(|(i, e)| if e.id.is_empty() { format!("T{}", i + 1) } else { e.id.clone() })
        .collect();
    let mut out = String::new();
    for (e, id) in doc.entities.iter().zip(&ids) {
        let surface: String = e
            .surface
            .chars()
            .map(|c| if c == '\n' || c == '\t' || c == '\r' { ' ' } else { c })
            .collect();
        let _ = writeln!(out, "{id}\t{} {} {}\t{surface}", e.etype, e.start, e.end);
    }
    for (k, r) in doc.relations.iter().enumerate() {
        let id = if r.id.is_empty() { format!("R{}", k + 1) } else { r.id.clone() };
        let _ = writeln!(out, "{id}\t{} Arg1:{} Arg2:{}", r.rtype, ids[r.arg1], ids[r.arg2]);
    }
    out
}

/// Sorted document ids of every `.txt` file in `dir` with a matching `.ann`.
pub fn list_documents(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CorpusError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "txt") && path.with_extension("ann").is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn read_document(dir: &Path, doc_id: &str) -> Result<Document> {
    let txt_path = dir.join(format!("{doc_id}.txt"));
    let ann_path = dir.join(format!("{doc_id}.ann"));
    let txt = std::fs::read_to_string(&txt_path).map_err(|e| CorpusError::io(&txt_path, e))?;
    let ann = std::fs::read_to_string(&ann_path).map_err(|e| CorpusError::io(&ann_path, e))?;
    parse_brat(doc_id, &txt, &ann).map_err(|e| in_file(ann_path, e))
}

/// Reads, tokenizes and labels every document in `dir`.
pub fn load_corpus(dir: &Path, vocab: &Vocab) -> Result<Vec<Document>> {
    let ids = list_documents(dir)?;
    let mut docs = Vec::with_capacity(ids.len());
    for id in ids {
        let mut doc = read_document(dir, &id)?;
        doc.prepare(vocab)
            .map_err(|e| in_file(dir.join(format!("{id}.ann")), e))?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Writes `<doc_id>.txt` and `<doc_id>.ann` into `dir`.
pub fn write_document(dir: &Path, doc: &Document) -> Result<()> {
    write_file(&dir.join(format!("{}.txt", doc.doc_id)), &doc.text)?;
    write_file(&dir.join(format!("{}.ann", doc.doc_id)), &to_ann(doc))
}

/// Writes only the `.ann` file.
pub fn write_annotations(dir: &Path, doc: &Document) -> Result<()> {
    write_file(&dir.join(format!("{}.ann", doc.doc_id)), &to_ann(doc))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CorpusError::io(path, e))
}

fn in_file(path: PathBuf, source: CorpusError) -> CorpusError {
    CorpusError::InFile {
        path,
        source: Box::new(source),
    }
}
