//! Text format for sparse binary datasets.
//!
//! ```text
//! # comment
//! @dim 10
//! @samples 3
//! @index-base 1
//! @feature 4 android.permission.SEND_SMS
//! 0 2 7 8
//! 1 4 9
//! 0
//! ```
//!
//! Directives come first. `@dim` and `@samples` are required; `@index-base`
//! (0 or 1, default 0) sets the numbering of record and `@feature` indices;
//! `@feature` lines name individual features. Each record is a label (0
//! benign, 1 malware) followed by the strictly increasing indices of the set
//! features. Blank lines and `#` comments are ignored anywhere. Files
//! starting with the gzip magic bytes are decompressed transparently.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::feature_space::{Label, LabeledDataset, SparseBinaryVector};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseDatasetFile {
    pub dataset: LabeledDataset,
    /// Names keyed by 0-based feature index.
    pub feature_names: BTreeMap<u32, String>,
    /// Write and read indices 1-based.
    pub one_based: bool,
}

impl SparseDatasetFile {
    pub fn new(dataset: LabeledDataset) -> Self {
        Self {
            dataset,
            feature_names: BTreeMap::new(),
            one_based: false,
        }
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        parse_file(reader)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        parse_file(text.as_bytes())
    }

    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let off = self.one_based as u32;
        let mut out = format!("@dim {}\n@samples {}\n", d.dim(), d.len());
        if self.one_based {
            out.push_str("@index-base 1\n");
        }
        for (j, name) in &self.feature_names {
            out.push_str(&format!("@feature {} {}\n", j + off, name));
        }
        for (s, l) in d.iter() {
            out.push_str(&l.to_string());
            for &j in s.indices() {
                out.push(' ');
                out.push_str(&(j + off).to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

fn parse_file(reader: impl BufRead) -> Result<SparseDatasetFile> {
    let mut dim: Option<usize> = None;
    let mut declared: Option<usize> = None;
    let mut one_based = false;
    let mut names = BTreeMap::new();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut last_line = 0;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }

        if let Some(directive) = body.strip_prefix('@') {
            if !samples.is_empty() {
                return Err(Error::parse(lineno, "directive after the first record"));
            }
            let (key, rest) = directive.split_once(char::is_whitespace).unwrap_or((directive, ""));
            let rest = rest.trim();
            match key {
                "dim" => dim = Some(parse_num(rest, lineno, "dimension")?),
                "samples" => declared = Some(parse_num(rest, lineno, "sample count")?),
                "index-base" => {
                    one_based = match rest {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(Error::parse(lineno, format!("index base must be 0 or 1, got `{other}`")))
                        }
                    }
                }
                "feature" => {
                    let (idx, name) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| Error::parse(lineno, "@feature needs an index and a name"))?;
                    let j = to_zero_based(parse_num(idx, lineno, "feature index")?, one_based, dim, lineno)?;
                    names.insert(j, name.trim().to_string());
                }
                other => return Err(Error::parse(lineno, format!("unknown directive `@{other}`"))),
            }
            continue;
        }

        let dim = dim.ok_or_else(|| Error::parse(lineno, "record before @dim"))?;
        let mut toks = body.split_whitespace();
        let label_tok = toks.next().expect("non-empty line has a token");
        let label = match label_tok {
            "0" => Label::Benign,
            "1" => Label::Malware,
            other => return Err(Error::parse(lineno, format!("label must be 0 or 1, got `{other}`"))),
        };
        let mut idx = Vec::new();
        for tok in toks {
            let j = to_zero_based(parse_num(tok, lineno, "feature index")?, one_based, Some(dim), lineno)?;
            if let Some(&prev) = idx.last() {
                if j <= prev {
                    let msg = if j == prev { "duplicate index" } else { "indices must be strictly increasing" };
                    return Err(Error::parse(lineno, format!("{msg} at `{tok}`")));
                }
            }
            idx.push(j);
        }
        samples.push(SparseBinaryVector::new(idx, dim).map_err(|e| Error::parse(lineno, e.to_string()))?);
        labels.push(label);
    }

    let dim = dim.ok_or_else(|| Error::parse(last_line, "missing @dim"))?;
    let declared = declared.ok_or_else(|| Error::parse(last_line, "missing @samples"))?;
    if declared != samples.len() {
        return Err(Error::parse(
            last_line,
            format!("@samples declares {declared} records, found {}", samples.len()),
        ));
    }
    if samples.is_empty() {
        return Err(Error::parse(last_line, "dataset has no samples"));
    }
    if let Some((&j, _)) = names.iter().next_back() {
        if j as usize >= dim {
            return Err(Error::parse(last_line, format!("@feature index {j} outside dimension {dim}")));
        }
    }
    Ok(SparseDatasetFile {
        dataset: LabeledDataset::new(samples, labels, dim)?,
        feature_names: names,
        one_based,
    })
}

fn to_zero_based(raw: u64, one_based: bool, dim: Option<usize>, line: usize) -> Result<u32> {
    let j = if one_based {
        raw.checked_sub(1)
            .ok_or_else(|| Error::parse(line, "index 0 in a 1-based file"))?
    } else {
        raw
    };
    if let Some(dim) = dim {
        if j as usize >= dim {
            return Err(Error::parse(line, format!("index {raw} out of range for dimension {dim}")));
        }
    }
    u32::try_from(j).map_err(|_| Error::parse(line, format!("index {raw} too large")))
}

/// Parses a dataset, returning only the labeled samples.
pub fn parse_sparse_dataset(reader: impl BufRead) -> Result<LabeledDataset> {
    Ok(parse_file(reader)?.dataset)
}

/// Opens a dataset file, gunzipping when it starts with the gzip magic.
pub fn read_dataset_file(path: &Path) -> Result<SparseDatasetFile> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut text = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut text)?;
        parse_file(BufReader::new(text.as_slice()))
    } else {
        parse_file(BufReader::new(raw.as_slice()))
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
