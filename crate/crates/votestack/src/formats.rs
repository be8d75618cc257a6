//! Readers and writers for the on-disk formats: datasets (TSV, JSONL),
//! word2vec text embeddings, dictionary and lexicon files, and prediction
//! TSVs (the same schema serves external members and our own output).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use votestack_core::corpus::{build_dataset, RawRecord};
use votestack_core::models::{ExternalPredictions, ExternalRow, Prediction};
use votestack_core::textprep::Lexicon;
use votestack_core::{
    EmbeddingTable, LabelSpace, LabeledExample, NormalizationDictionary, TrainedClassifier,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Tsv,
    Jsonl,
}

impl DatasetFormat {
    /// `.jsonl` / `.json` map to JSONL, everything else to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => DatasetFormat::Jsonl,
            _ => DatasetFormat::Tsv,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::format(path, None, format!("not valid UTF-8: {e}")))
}

/// Lines with their 1-based numbers and any trailing `\r` removed.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

fn skippable(line: &str) -> bool {
    line.trim().is_empty() || line.starts_with('#')
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    label: String,
}

/// Ids follow file order; labels are indexed in order of first appearance.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
) -> Result<(Vec<LabeledExample>, LabelSpace)> {
    let text = read_text(path)?;
    let mut records = Vec::new();
    match format {
        DatasetFormat::Tsv => {
            let mut lines = numbered_lines(&text);
            match lines.next() {
                Some((_, header)) if header.split('\t').map(str::trim).eq(["text", "label"]) => {}
                Some((n, other)) => {
                    return Err(Error::format(
                        path,
                        Some(n),
                        format!("expected header `text<TAB>label`, found `{other}`"),
                    ))
                }
                None => return Err(Error::format(path, None, "dataset is empty")),
            }
            for (n, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 2 {
                    return Err(Error::format(
                        path,
                        Some(n),
                        format!("expected 2 tab-separated fields, found {}", fields.len()),
                    ));
                }
                records.push(RawRecord {
                    line: n,
                    text: fields[0].to_string(),
                    label: fields[1].to_string(),
                });
            }
        }
        DatasetFormat::Jsonl => {
            for (n, line) in numbered_lines(&text) {
                if line.trim().is_empty() {
                    continue;
                }
                let r: JsonRecord =
                    serde_json::from_str(line).map_err(|e| Error::format(path, Some(n), e))?;
                records.push(RawRecord {
                    line: n,
                    text: r.text,
                    label: r.label,
                });
            }
        }
    }
    build_dataset(records).map_err(|e| {
        let line = match &e {
            votestack_core::corpus::CorpusError::EmptyText { line, .. }
            | votestack_core::corpus::CorpusError::EmptyLabel { line, .. } => Some(*line),
            _ => None,
        };
        Error::format(path, line, e)
    })
}

pub fn write_dataset_tsv(
    path: &Path,
    examples: &[LabeledExample],
    space: &LabelSpace,
) -> Result<()> {
    let mut out = String::from("text\tlabel\n");
    for e in examples {
        let _ = writeln!(
            out,
            "{}\t{}",
            e.text,
            space.name(e.label).unwrap_or_default()
        );
    }
    write_file(path, out.as_bytes())
}

/// word2vec / fastText text format: a `<count> <dim>` header, then one
/// `<token> <v1> ... <v_dim>` line per word. At most `count` rows are read.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = read_text(path)?;
    let mut lines = numbered_lines(&text);
    let (count, dim) = match lines.next() {
        Some((n, header)) => {
            let parts: Vec<&str> = header.split_whitespace().collect();
            match parts.as_slice() {
                [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
                    (Ok(c), Ok(d)) => (c, d),
                    _ => {
                        return Err(Error::format(
                            path,
                            Some(n),
                            format!("malformed header `{header}`"),
                        ))
                    }
                },
                _ => {
                    return Err(Error::format(
                        path,
                        Some(n),
                        format!("malformed header `{header}`"),
                    ))
                }
            }
        }
        None => return Err(Error::format(path, None, "missing `<count> <dim>` header")),
    };
    if dim == 0 {
        return Err(Error::format(
            path,
            Some(1),
            "embedding dimension must be positive",
        ));
    }
    let mut rows = Vec::with_capacity(count);
    for (n, line) in lines {
        if rows.len() == count {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default().to_string();
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(Error::format(
                path,
                Some(n),
                format!("`{token}` has {} values, expected {dim}", values.len()),
            ));
        }
        let mut vector = Vec::with_capacity(dim);
        for v in values {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => vector.push(x),
                _ => {
                    return Err(Error::format(
                        path,
                        Some(n),
                        format!("`{token}`: bad value `{v}`"),
                    ))
                }
            }
        }
        rows.push((token, vector));
    }
    EmbeddingTable::from_rows(dim, rows).map_err(|e| Error::format(path, None, e))
}

pub fn write_embeddings(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.1.len());
    let mut out = format!("{} {dim}\n", rows.len());
    for (token, v) in rows {
        out.push_str(token);
        for x in v {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// `variant<TAB>canonical` per line; blank and `#` lines are ignored.
pub fn load_dictionary(path: &Path) -> Result<NormalizationDictionary> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    for (n, line) in numbered_lines(&text) {
        if skippable(line) {
            continue;
        }
        match line.split_once('\t') {
            Some((k, v)) if !v.contains('\t') => {
                pairs.push((k.trim().to_string(), v.trim().to_string()))
            }
            _ => {
                return Err(Error::format(
                    path,
                    Some(n),
                    "expected `variant<TAB>canonical`",
                ))
            }
        }
    }
    NormalizationDictionary::from_pairs(pairs).map_err(|e| Error::format(path, None, e))
}

/// One compound word per line, syllables separated by spaces.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = read_text(path)?;
    Ok(Lexicon::new(
        numbered_lines(&text)
            .map(|(_, l)| l)
            .filter(|l| !skippable(l)),
    ))
}

/// Rows of a predictions TSV plus the config hash from its `# config` line,
/// if present.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionsFile {
    pub config_hash: Option<String>,
    pub rows: Vec<ExternalRow>,
}

/// `id<TAB>label[<TAB>p_1 ... p_k]`. Probabilities may be tab- or
/// space-separated. `#` lines, blank lines and an `id<TAB>label` header are
/// skipped.
pub fn read_predictions(path: &Path) -> Result<PredictionsFile> {
    let text = read_text(path)?;
    let mut config_hash = None;
    let mut rows = Vec::new();
    for (n, line) in numbered_lines(&text) {
        if let Some(rest) = line.strip_prefix("# config ") {
            config_hash = Some(rest.trim().to_string());
            continue;
        }
        if skippable(line) || line.starts_with("id\tlabel") {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default().trim();
        let id: usize = id
            .parse()
            .map_err(|_| Error::format(path, Some(n), format!("bad id `{id}`")))?;
        let label = match fields.next() {
            Some(l) if !l.trim().is_empty() => l.trim().to_string(),
            _ => return Err(Error::format(path, Some(n), "missing label")),
        };
        let probabilities = match fields.next() {
            Some(rest) if !rest.trim().is_empty() => {
                let mut p = Vec::new();
                for v in rest.split_whitespace() {
                    p.push(v.parse::<f64>().map_err(|_| {
                        Error::format(path, Some(n), format!("bad probability `{v}`"))
                    })?);
                }
                Some(p)
            }
            _ => None,
        };
        rows.push(ExternalRow {
            line: n,
            id,
            label,
            probabilities,
        });
    }
    Ok(PredictionsFile { config_hash, rows })
}

/// External member answering by id lookup; the file must cover
/// `expected_ids` exactly.
pub fn load_external_predictions(
    path: &Path,
    space: &LabelSpace,
    expected_ids: &[usize],
) -> Result<TrainedClassifier> {
    let file = read_predictions(path)?;
    let preds = ExternalPredictions::from_rows(file.rows, space, expected_ids)
        .map_err(|e| Error::format(path, None, e))?;
    Ok(TrainedClassifier::external(preds, space.clone()))
}

pub fn render_predictions(
    config_hash: &str,
    ids: &[usize],
    predictions: &[Prediction],
    space: &LabelSpace,
) -> String {
    let mut out = format!("# config {config_hash}\n");
    for (id, p) in ids.iter().zip(predictions) {
        let _ = write!(out, "{id}\t{}", space.name(p.label).unwrap_or_default());
        for v in &p.probabilities {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
