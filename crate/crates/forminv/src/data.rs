//! Evaluation data model: paraphrase families, response records, the indexed
//! response matrix, and dataset manifests.
//!
//! The record file format is newline-delimited JSON, one record per line,
//! with keys `model`, `theorem_id`, `item_id`, `family`, `ground_truth`,
//! `answer` (nullable) and optional `source`. Families are named by their
//! canonical short names (`syntactic`, `quantifier`, `passive`, `notation`,
//! `connective`, `order`, `unpack`, `equiv`) or by code (`F1`..`F8`);
//! the reserved value `canonical` marks the original statement of a class.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Certifiability tier of a paraphrase family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    /// Formally certifiable (named proof rule).
    T1,
    /// Conditional on type context.
    T2,
    /// Heuristic natural language, human-verified.
    T3,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tier::T1 => write!(f, "T1"),
            Tier::T2 => write!(f, "T2"),
            Tier::T3 => write!(f, "T3"),
        }
    }
}

/// The eight paraphrase transformation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::F1,
        Family::F2,
        Family::F3,
        Family::F4,
        Family::F5,
        Family::F6,
        Family::F7,
        Family::F8,
    ];

    /// Code string, `F1`..`F8`.
    pub fn code(self) -> &'static str {
        match self {
            Family::F1 => "F1",
            Family::F2 => "F2",
            Family::F3 => "F3",
            Family::F4 => "F4",
            Family::F5 => "F5",
            Family::F6 => "F6",
            Family::F7 => "F7",
            Family::F8 => "F8",
        }
    }

    /// Canonical short name.
    pub fn name(self) -> &'static str {
        match self {
            Family::F1 => "syntactic",
            Family::F2 => "quantifier",
            Family::F3 => "passive",
            Family::F4 => "notation",
            Family::F5 => "connective",
            Family::F6 => "order",
            Family::F7 => "unpack",
            Family::F8 => "equiv",
        }
    }

    /// Certifiability tier: {F4, F6, F7, F8} are T1, {F1, F2, F3} are T2, F5 is T3.
    pub fn tier(self) -> Tier {
        match self {
            Family::F4 | Family::F6 | Family::F7 | Family::F8 => Tier::T1,
            Family::F1 | Family::F2 | Family::F3 => Tier::T2,
            Family::F5 => Tier::T3,
        }
    }

    /// Descriptive category used in family-level report tables.
    pub fn category(self) -> &'static str {
        match self {
            Family::F1 | Family::F2 | Family::F3 => "Surface",
            Family::F4 | Family::F5 | Family::F6 => "Semantic",
            Family::F7 | Family::F8 => "Definitional",
        }
    }

    /// Case-insensitive lookup by canonical name or code.
    pub fn from_name(s: &str) -> Option<Family> {
        let lower = s.trim().to_ascii_lowercase();
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == lower || f.code().to_ascii_lowercase() == lower)
    }

    pub fn valid_names() -> String {
        let names: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
        format!("{}, canonical", names.join(", "))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl TryFrom<String> for Family {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        Family::from_name(&s).ok_or_else(|| format!("unknown family {s:?}"))
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.name().to_string()
    }
}

/// Which item of an equivalence class a record refers to: the canonical
/// statement or a paraphrase of a particular family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ItemFamily {
    Canonical,
    Paraphrase(Family),
}

impl ItemFamily {
    pub fn is_canonical(self) -> bool {
        matches!(self, ItemFamily::Canonical)
    }

    pub fn family(self) -> Option<Family> {
        match self {
            ItemFamily::Canonical => None,
            ItemFamily::Paraphrase(f) => Some(f),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ItemFamily::Canonical => "canonical",
            ItemFamily::Paraphrase(f) => f.name(),
        }
    }

    pub fn parse(s: &str) -> Option<ItemFamily> {
        if s.trim().eq_ignore_ascii_case("canonical") {
            Some(ItemFamily::Canonical)
        } else {
            Family::from_name(s).map(ItemFamily::Paraphrase)
        }
    }
}

impl fmt::Display for ItemFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl TryFrom<String> for ItemFamily {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        ItemFamily::parse(&s).ok_or_else(|| format!("unknown family {s:?}"))
    }
}

impl From<ItemFamily> for String {
    fn from(f: ItemFamily) -> String {
        f.label().to_string()
    }
}

/// One model verdict on one item. `answer: None` records a missing verdict
/// (timeout or unparseable output); it is never treated as incorrect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub model: String,
    pub theorem_id: String,
    pub item_id: String,
    pub family: ItemFamily,
    pub ground_truth: bool,
    pub answer: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl ResponseRecord {
    /// Present and matching the ground truth.
    pub fn is_correct(&self) -> bool {
        self.answer == Some(self.ground_truth)
    }

    /// Present and contradicting the ground truth.
    pub fn is_incorrect(&self) -> bool {
        matches!(self.answer, Some(a) if a != self.ground_truth)
    }
}

/// An item of the evaluation universe: one (theorem, family-or-canonical) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub theorem_id: String,
    pub family: ItemFamily,
}

/// Indexed, immutable collection of response records. Index lists preserve
/// first-appearance order; consumers that need canonical output order sort
/// explicitly.
#[derive(Debug, Clone, Default)]
pub struct ResponseMatrix {
    records: Vec<ResponseRecord>,
    models: Vec<String>,
    theorems: Vec<String>,
    families: Vec<Family>,
    items: Vec<Item>,
    // (model index, item index) -> record index
    cell_index: BTreeMap<(usize, usize), usize>,
    // (model index, theorem index, family) -> record index
    mtf_index: BTreeMap<(usize, usize, ItemFamily), usize>,
    model_index: BTreeMap<String, usize>,
    theorem_index: BTreeMap<String, usize>,
    item_index: BTreeMap<String, usize>,
    // source line per record, for ingestion error messages
    source_lines: Vec<usize>,
}

impl Serialize for ResponseMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.records.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ResponseMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<ResponseRecord>::deserialize(d)?;
        ResponseMatrix::from_records(records, None).map_err(serde::de::Error::custom)
    }
}

impl ResponseMatrix {
    /// Build a matrix from records, validating uniqueness and item-cell
    /// consistency. Line numbers (1-based, parallel to `records`) are used
    /// in error messages; pass `None` when records do not come from a file.
    pub fn from_records(
        records: Vec<ResponseRecord>,
        lines: Option<&[usize]>,
    ) -> Result<ResponseMatrix> {
        let mut m = ResponseMatrix::default();
        for (i, rec) in records.into_iter().enumerate() {
            let line = lines.map(|l| l[i]).unwrap_or(i + 1);
            m.push(rec, line)?;
        }
        Ok(m)
    }

    fn push(&mut self, rec: ResponseRecord, line: usize) -> Result<()> {
        let model_ix = match self.model_index.get(&rec.model) {
            Some(&ix) => ix,
            None => {
                self.model_index
                    .insert(rec.model.clone(), self.models.len());
                self.models.push(rec.model.clone());
                self.models.len() - 1
            }
        };
        let theorem_ix = match self.theorem_index.get(&rec.theorem_id) {
            Some(&ix) => ix,
            None => {
                self.theorem_index
                    .insert(rec.theorem_id.clone(), self.theorems.len());
                self.theorems.push(rec.theorem_id.clone());
                self.theorems.len() - 1
            }
        };
        if let ItemFamily::Paraphrase(f) = rec.family {
            if !self.families.contains(&f) {
                self.families.push(f);
            }
        }

        if let Some(&prev) = self.mtf_index.get(&(model_ix, theorem_ix, rec.family)) {
            return Err(Error::DuplicateRecord {
                model: rec.model,
                theorem: rec.theorem_id,
                family: rec.family.label().to_string(),
                first_line: self.source_lines[prev],
                second_line: line,
            });
        }

        let item_ix = match self.item_index.get(&rec.item_id) {
            Some(&ix) => {
                let item = &self.items[ix];
                if item.theorem_id != rec.theorem_id || item.family != rec.family {
                    let first = self
                        .records
                        .iter()
                        .position(|r| r.item_id == rec.item_id)
                        .unwrap_or(0);
                    return Err(Error::InconsistentItem {
                        item_id: rec.item_id.clone(),
                        first_theorem: item.theorem_id.clone(),
                        first_family: item.family.label().to_string(),
                        first_line: self.source_lines.get(first).copied().unwrap_or(0),
                        second_theorem: rec.theorem_id.clone(),
                        second_family: rec.family.label().to_string(),
                        second_line: line,
                    });
                }
                ix
            }
            None => {
                self.item_index
                    .insert(rec.item_id.clone(), self.items.len());
                self.items.push(Item {
                    item_id: rec.item_id.clone(),
                    theorem_id: rec.theorem_id.clone(),
                    family: rec.family,
                });
                self.items.len() - 1
            }
        };

        let rec_ix = self.records.len();
        self.mtf_index
            .insert((model_ix, theorem_ix, rec.family), rec_ix);
        self.cell_index.insert((model_ix, item_ix), rec_ix);
        self.records.push(rec);
        self.source_lines.push(line);
        Ok(())
    }

    pub fn records(&self) -> &[ResponseRecord] {
        &self.records
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn theorems(&self) -> &[String] {
        &self.theorems
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_model(&self, model: &str) -> bool {
        self.model_index.contains_key(model)
    }

    /// The record of `model` on `item_id`, if one exists.
    pub fn record_for(&self, model: &str, item_id: &str) -> Option<&ResponseRecord> {
        let m = *self.model_index.get(model)?;
        let i = *self.item_index.get(item_id)?;
        self.cell_index.get(&(m, i)).map(|&r| &self.records[r])
    }

    /// All records of one model, in record order.
    pub fn model_records<'a>(&'a self, model: &'a str) -> impl Iterator<Item = &'a ResponseRecord> {
        self.records.iter().filter(move |r| r.model == model)
    }

    /// Items belonging to one theorem, in item order.
    pub fn theorem_items<'a>(&'a self, theorem_id: &'a str) -> impl Iterator<Item = &'a Item> {
        self.items
            .iter()
            .filter(move |it| it.theorem_id == theorem_id)
    }

    /// Fraction of the item universe on which `model` has a present answer.
    pub fn coverage(&self, model: &str) -> Result<f64> {
        let m = *self
            .model_index
            .get(model)
            .ok_or_else(|| Error::UnknownModel(model.to_string()))?;
        if self.items.is_empty() {
            return Ok(0.0);
        }
        let present = (0..self.items.len())
            .filter(|&i| {
                self.cell_index
                    .get(&(m, i))
                    .map(|&r| self.records[r].answer.is_some())
                    .unwrap_or(false)
            })
            .count();
        Ok(present as f64 / self.items.len() as f64)
    }

    /// A copy of this matrix with the given item ids removed from the
    /// universe. Index lists are rebuilt in first-appearance order of the
    /// surviving records.
    pub fn without_items(
        &self,
        remove: &std::collections::BTreeSet<String>,
    ) -> Result<ResponseMatrix> {
        let kept: Vec<ResponseRecord> = self
            .records
            .iter()
            .filter(|r| !remove.contains(&r.item_id))
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        ResponseMatrix::from_records(kept, None)
    }

    /// Serialize back to the record file format, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })
    }
}

/// Intermediate wire form of one record line; valid JSON with a raw family
/// string so family errors can name the offending line.
#[derive(Deserialize)]
struct RecordLine {
    model: String,
    theorem_id: String,
    item_id: String,
    family: String,
    ground_truth: bool,
    answer: Option<bool>,
    #[serde(default)]
    source: Option<String>,
}

/// Parse a newline-delimited record file into a validated matrix.
pub fn parse_records(path: &Path) -> Result<ResponseMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_records_reader(BufReader::new(file))
}

/// Parse records from any reader (used by tests and the cache layer).
pub fn parse_records_reader<R: BufRead>(reader: R) -> Result<ResponseMatrix> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (ix, line) in reader.lines().enumerate() {
        let lineno = ix + 1;
        let line = line.map_err(|e| Error::Io {
            path: format!("<line {lineno}>"),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordLine = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        let family = ItemFamily::parse(&raw.family).ok_or_else(|| Error::UnknownFamily {
            line: lineno,
            name: raw.family.clone(),
            valid: Family::valid_names(),
        })?;
        records.push(ResponseRecord {
            model: raw.model,
            theorem_id: raw.theorem_id,
            item_id: raw.item_id,
            family,
            ground_truth: raw.ground_truth,
            answer: raw.answer,
            source: raw.source,
        });
        lines.push(lineno);
    }
    ResponseMatrix::from_records(records, Some(&lines))
}

/// Dataset manifest: digest and counts of a canonical serialized file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub item_count: u64,
    pub theorem_count: u64,
    pub sha256: String,
}

impl DatasetManifest {
    pub fn from_path(path: &Path) -> Result<DatasetManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
            line: 1,
            reason: format!("manifest: {e}"),
        })
    }
}

/// Outcome of verifying a file against its manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ManifestCheck {
    Ok,
    DigestMismatch { expected: String, actual: String },
    CountMismatch { expected: u64, actual: u64 },
}

impl ManifestCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, ManifestCheck::Ok)
    }
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Verify a record file against a manifest: byte digest must match and the
/// non-blank line count must equal `item_count`.
pub fn verify_manifest(manifest: &DatasetManifest, path: &Path) -> Result<ManifestCheck> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let actual = sha256_hex(&bytes);
    if !actual.eq_ignore_ascii_case(&manifest.sha256) {
        return Ok(ManifestCheck::DigestMismatch {
            expected: manifest.sha256.clone(),
            actual,
        });
    }
    let count = bytes
        .split(|&b| b == b'\n')
        .filter(|l| !l.iter().all(|b| b.is_ascii_whitespace()))
        .count() as u64;
    if count != manifest.item_count {
        return Ok(ManifestCheck::CountMismatch {
            expected: manifest.item_count,
            actual: count,
        });
    }
    Ok(ManifestCheck::Ok)
}
