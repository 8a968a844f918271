//! On-disk formats: interactions, predictions, semantic-ID maps, label files,
//! evaluation-user lists, index caches and reports.
//!
//! All files are UTF-8 and tab separated, one record per line. Blank lines
//! are skipped; `#` starts a comment line.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::attribution::{CategoryRecord, SecondSymmetryKind};
use crate::domain::{Dataset, IdDict, Instance};
use crate::error::{Error, Result};
use crate::metrics::PredictionList;
use crate::report::{Cell, Report};
use crate::token_lens::SemanticIdMap;
use crate::transition_index::TransitionIndex;

pub const INTERACTIONS_HEADER: &str = "user_id\titems";
pub const PREDICTIONS_HEADER: &str = "user_id\tpredictions";
pub const SID_HEADER: &str = "item_id\ttokens";
pub const LABELS_HEADER: &str = "user\ttarget\tmemorization\tsubstitutability\tsymmetry\ttransitivity\tsecond_symmetry\tsecond_symmetry_kind\tuncategorized";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })
}

/// Data lines as `(1-based line number, text)`, skipping blanks, comments
/// and an optional leading header.
fn data_lines<R: BufRead>(reader: R, header: &str) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if out.is_empty() && line == header {
            continue;
        }
        out.push((i + 1, line.to_owned()));
    }
    Ok(out)
}

fn split_two<'a>(line: &'a str, src: &str, no: usize) -> Result<(&'a str, &'a str)> {
    let mut parts = line.split('\t');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) if !a.is_empty() => Ok((a, b)),
        _ => Err(Error::parse(src, no, "expected two tab-separated fields")),
    }
}

/// Iterative k-core: drop items with fewer than `k` interactions and users
/// with fewer than `k` remaining interactions until nothing changes. `k <= 1`
/// is a no-op.
pub fn kcore_filter(mut rows: Vec<(String, Vec<String>)>, k: usize) -> Vec<(String, Vec<String>)> {
    if k <= 1 {
        return rows;
    }
    loop {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for (_, items) in &rows {
            for it in items {
                *freq.entry(it.as_str()).or_default() += 1;
            }
        }
        let rare: HashSet<String> = freq
            .into_iter()
            .filter(|&(_, c)| c < k)
            .map(|(i, _)| i.to_owned())
            .collect();
        let before = rows.len();
        for (_, items) in &mut rows {
            items.retain(|it| !rare.contains(it));
        }
        rows.retain(|(_, items)| items.len() >= k);
        if rare.is_empty() && rows.len() == before {
            return rows;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub avg_len: f64,
}

impl DatasetStats {
    pub fn of(ds: &Dataset) -> Self {
        let interactions = ds.num_interactions();
        let users = ds.sequences.len();
        Self {
            users,
            items: ds.num_items(),
            interactions,
            avg_len: if users == 0 { 0.0 } else { interactions as f64 / users as f64 },
        }
    }

    pub fn to_report(&self) -> Report {
        let mut r = Report::new("dataset", ["users", "items", "interactions", "avg_len"]);
        r.push(vec![
            Cell::int(self.users),
            Cell::int(self.items),
            Cell::int(self.interactions),
            Cell::Real(self.avg_len),
        ]);
        r
    }
}

pub fn parse_interactions<R: BufRead>(reader: R, src: &str, kcore: Option<usize>) -> Result<Dataset> {
    let lines = data_lines(reader, INTERACTIONS_HEADER)?;
    if lines.is_empty() {
        return Err(Error::Empty("interactions file"));
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(lines.len());
    for (no, line) in lines {
        let (user, items) = split_two(&line, src, no)?;
        if !seen.insert(user.to_owned()) {
            return Err(Error::parse(src, no, format!("duplicate user {user:?}")));
        }
        let items: Vec<String> = items.split(',').map(str::to_owned).collect();
        if items.iter().any(String::is_empty) {
            return Err(Error::parse(src, no, "empty item ID"));
        }
        rows.push((user.to_owned(), items));
    }
    let rows = kcore_filter(rows, kcore.unwrap_or(0));
    if rows.is_empty() {
        return Err(Error::NoSequences);
    }
    Dataset::from_raw(rows)
}

pub fn read_interactions(path: &Path, kcore: Option<usize>) -> Result<Dataset> {
    parse_interactions(BufReader::new(open(path)?), &path.display().to_string(), kcore)
}

pub fn format_interactions(ds: &Dataset) -> String {
    let mut out = String::from(INTERACTIONS_HEADER);
    out.push('\n');
    for (user, items) in ds.to_raw() {
        out.push_str(&user);
        out.push('\t');
        out.push_str(&items.join(","));
        out.push('\n');
    }
    out
}

pub fn write_interactions(ds: &Dataset, path: &Path) -> Result<()> {
    write_file(path, format_interactions(ds).as_bytes())
}

/// Parses `user TAB item:score,...`. Users must exist in `users`; unseen
/// items are added to `items`. Lines keep file order.
pub fn parse_predictions<R: BufRead>(
    reader: R,
    src: &str,
    users: &IdDict,
    items: &mut IdDict,
    expect_probability: bool,
) -> Result<Vec<PredictionList>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (no, line) in data_lines(reader, PREDICTIONS_HEADER)? {
        let (user, body) = split_two(&line, src, no)?;
        let uid = users
            .get(user)
            .ok_or_else(|| Error::parse(src, no, format!("unknown user {user:?}")))?;
        if !seen.insert(uid) {
            return Err(Error::parse(src, no, format!("duplicate user {user:?}")));
        }
        let mut ranked = Vec::new();
        for entry in body.split(',').filter(|e| !e.is_empty()) {
            let (item, score) = entry
                .rsplit_once(':')
                .ok_or_else(|| Error::parse(src, no, format!("expected item:score, got {entry:?}")))?;
            let score = f64::from_str(score)
                .map_err(|_| Error::parse(src, no, format!("bad score {score:?}")))?;
            if item.is_empty() {
                return Err(Error::parse(src, no, "empty item ID"));
            }
            ranked.push((items.intern(item), score));
        }
        let list = PredictionList::new(uid, ranked, expect_probability).map_err(|e| match e {
            Error::Validation(m) => Error::parse(src, no, m),
            other => other,
        })?;
        out.push(list);
    }
    Ok(out)
}

pub fn read_predictions(
    path: &Path,
    users: &IdDict,
    items: &mut IdDict,
    expect_probability: bool,
) -> Result<Vec<PredictionList>> {
    let src = path.display().to_string();
    parse_predictions(BufReader::new(open(path)?), &src, users, items, expect_probability)
}

pub fn format_predictions(lists: &[PredictionList], users: &IdDict, items: &IdDict) -> String {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for l in lists {
        out.push_str(users.name(l.user()).unwrap_or_default());
        out.push('\t');
        let body: Vec<String> = l
            .ranked()
            .iter()
            .map(|&(i, s)| format!("{}:{s}", items.name(i).unwrap_or_default()))
            .collect();
        out.push_str(&body.join(","));
        out.push('\n');
    }
    out
}

pub fn write_predictions(lists: &[PredictionList], users: &IdDict, items: &IdDict, path: &Path) -> Result<()> {
    write_file(path, format_predictions(lists, users, items).as_bytes())
}

/// Orders prediction lists to match `users`; each user needs exactly one
/// list. Lists for other users are dropped.
pub fn align_predictions(lists: Vec<PredictionList>, users: &[u32], names: &IdDict) -> Result<Vec<PredictionList>> {
    let mut by_user: HashMap<u32, PredictionList> = lists.into_iter().map(|l| (l.user(), l)).collect();
    users
        .iter()
        .map(|u| {
            by_user.remove(u).ok_or_else(|| {
                Error::Validation(format!("no predictions for user {:?}", names.name(*u).unwrap_or_default()))
            })
        })
        .collect()
}

/// `item TAB tok,tok,...` rows keyed by raw item ID.
pub fn parse_sid_rows<R: BufRead>(reader: R, src: &str) -> Result<(usize, HashMap<String, Vec<u32>>)> {
    let mut rows = HashMap::new();
    let mut len = None;
    for (no, line) in data_lines(reader, SID_HEADER)? {
        let (item, body) = split_two(&line, src, no)?;
        let toks = body
            .split(',')
            .map(|t| u32::from_str(t).map_err(|_| Error::parse(src, no, format!("bad token {t:?}"))))
            .collect::<Result<Vec<u32>>>()?;
        match len {
            None => len = Some(toks.len()),
            Some(l) if l != toks.len() => {
                return Err(Error::parse(src, no, format!("{} tokens, expected {l}", toks.len())))
            }
            _ => {}
        }
        if rows.insert(item.to_owned(), toks).is_some() {
            return Err(Error::parse(src, no, format!("duplicate item {item:?}")));
        }
    }
    let len = len.ok_or(Error::Empty("semantic ID file"))?;
    Ok((len, rows))
}

/// Reads a semantic-ID map aligned with `items`. Rows for items outside the
/// dictionary are ignored.
pub fn read_sid_map(path: &Path, items: &IdDict) -> Result<SemanticIdMap> {
    let (len, rows) = parse_sid_rows(BufReader::new(open(path)?), &path.display().to_string())?;
    SemanticIdMap::from_named(len, items, &rows)
}

pub fn format_sid_map(map: &SemanticIdMap, items: &IdDict) -> String {
    let mut out = String::from(SID_HEADER);
    out.push('\n');
    for (i, name) in items.names().iter().enumerate() {
        let toks: Vec<String> = map
            .tokens(i as u32)
            .expect("map covers the dictionary")
            .iter()
            .map(u32::to_string)
            .collect();
        out.push_str(name);
        out.push('\t');
        out.push_str(&toks.join(","));
        out.push('\n');
    }
    out
}

pub fn write_sid_map(map: &SemanticIdMap, items: &IdDict, path: &Path) -> Result<()> {
    write_file(path, format_sid_map(map, items).as_bytes())
}

/// A label-file row with raw IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub user: String,
    pub target: String,
    pub record: CategoryRecord,
}

fn hop_field(h: Option<usize>) -> String {
    h.map_or_else(|| "-".to_owned(), |h| h.to_string())
}

pub fn format_labels(rows: &[LabelRow]) -> String {
    let mut out = String::from(LABELS_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.record;
        let fields = [
            row.user.clone(),
            row.target.clone(),
            (r.memorization as u8).to_string(),
            hop_field(r.substitutability_hop),
            hop_field(r.symmetry_hop),
            hop_field(r.transitivity_hop),
            hop_field(r.second_symmetry_hop),
            r.second_symmetry_kind.map_or("-", SecondSymmetryKind::as_str).to_owned(),
            (r.uncategorized as u8).to_string(),
        ];
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

pub fn label_rows(records: &[CategoryRecord], instances: &[Instance], users: &IdDict, items: &IdDict) -> Vec<LabelRow> {
    records
        .iter()
        .zip(instances)
        .map(|(r, inst)| LabelRow {
            user: users.name(inst.user).unwrap_or_default().to_owned(),
            target: items.name(inst.target).unwrap_or_default().to_owned(),
            record: r.clone(),
        })
        .collect()
}

pub fn write_labels(rows: &[LabelRow], path: &Path) -> Result<()> {
    write_file(path, format_labels(rows).as_bytes())
}

pub fn parse_labels<R: BufRead>(reader: R, src: &str) -> Result<Vec<LabelRow>> {
    let mut lines = data_lines(reader, "")?.into_iter();
    match lines.next() {
        Some((_, h)) if h == LABELS_HEADER => {}
        Some((no, _)) => return Err(Error::parse(src, no, "missing label header")),
        None => return Err(Error::Empty("label file")),
    }
    let flag = |s: &str, no: usize| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::parse(src, no, format!("bad flag {s:?}"))),
    };
    let hop = |s: &str, no: usize| -> Result<Option<usize>> {
        if s == "-" {
            return Ok(None);
        }
        match usize::from_str(s) {
            Ok(h) if h >= 1 => Ok(Some(h)),
            _ => Err(Error::parse(src, no, format!("bad hop {s:?}"))),
        }
    };
    let mut out = Vec::new();
    for (no, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(Error::parse(src, no, format!("expected 9 fields, got {}", f.len())));
        }
        let kind = match f[7] {
            "-" => None,
            k => Some(SecondSymmetryKind::from_str(k).map_err(|e| Error::parse(src, no, e.to_string()))?),
        };
        let record = CategoryRecord {
            memorization: flag(f[2], no)?,
            substitutability_hop: hop(f[3], no)?,
            symmetry_hop: hop(f[4], no)?,
            transitivity_hop: hop(f[5], no)?,
            second_symmetry_hop: hop(f[6], no)?,
            second_symmetry_kind: kind,
            uncategorized: flag(f[8], no)?,
        };
        if record.second_symmetry_hop.is_some() != kind.is_some() {
            return Err(Error::parse(src, no, "second-order symmetry hop and kind disagree"));
        }
        out.push(LabelRow {
            user: f[0].to_owned(),
            target: f[1].to_owned(),
            record,
        });
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    parse_labels(BufReader::new(open(path)?), &path.display().to_string())
}

/// One user ID per line. Names not in `users` (for example dropped by
/// k-core) are ignored.
pub fn read_eval_users(path: &Path, users: &IdDict) -> Result<HashSet<u32>> {
    let lines = data_lines(BufReader::new(open(path)?), "user_id")?;
    Ok(lines.iter().filter_map(|(_, l)| users.get(l.trim())).collect())
}

pub fn write_eval_users(names: &[String], path: &Path) -> Result<()> {
    let mut out = String::from("user_id\n");
    for n in names {
        out.push_str(n);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn save_index(index: &TransitionIndex, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    index.write_to(&mut w)?;
    w.flush().map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })
}

pub fn load_index(path: &Path) -> Result<TransitionIndex> {
    TransitionIndex::read_from(BufReader::new(open(path)?))
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Tsv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => report.to_json(),
    }
}

pub fn write_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    write_file(path, render_report(report, format).as_bytes())
}
