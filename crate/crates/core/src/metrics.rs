//! Ranking metrics, category breakdowns and quantile-binned reports.

use crate::attribution::CategoryRecord;
use crate::error::{Error, Result};
use crate::report::{Cell, Report};

/// One model's ranked candidates for one user.
///
/// Scores are non-increasing; equal scores are ordered by ascending item
/// index so ranks are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionList {
    user: u32,
    ranked: Vec<(u32, f64)>,
    is_probability: bool,
}

impl PredictionList {
    pub fn new(user: u32, ranked: Vec<(u32, f64)>, is_probability: bool) -> Result<Self> {
        if let Some(&(item, _)) = ranked.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite score for item {item}")));
        }
        if let Some(w) = ranked.windows(2).find(|w| w[1].1 > w[0].1) {
            return Err(Error::Validation(format!(
                "non-monotone scores: {} follows {}",
                w[1].1, w[0].1
            )));
        }
        let mut seen: Vec<u32> = ranked.iter().map(|&(i, _)| i).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate item {}", w[0])));
        }
        if is_probability {
            if ranked.iter().any(|&(_, s)| !(0.0..=1.0).contains(&s)) {
                return Err(Error::Validation("probability score outside [0, 1]".into()));
            }
            let total: f64 = ranked.iter().map(|&(_, s)| s).sum();
            if total > 1.0 + 1e-6 {
                return Err(Error::Validation(format!(
                    "not a sub-distribution: scores sum to {total}"
                )));
            }
        }
        Ok(Self::from_sorted(user, ranked, is_probability))
    }

    /// Skips validation; `ranked` must already be non-increasing.
    pub(crate) fn from_sorted(user: u32, mut ranked: Vec<(u32, f64)>, is_probability: bool) -> Self {
        // stable for distinct scores, so this only reorders ties
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self {
            user,
            ranked,
            is_probability,
        }
    }

    /// Keeps the caller's order, which must be non-increasing in score.
    pub(crate) fn from_ordered(user: u32, ranked: Vec<(u32, f64)>, is_probability: bool) -> Self {
        debug_assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        Self {
            user,
            ranked,
            is_probability,
        }
    }

    pub fn user(&self) -> u32 {
        self.user
    }

    pub fn ranked(&self) -> &[(u32, f64)] {
        &self.ranked
    }

    pub fn items(&self) -> impl Iterator<Item = u32> + '_ {
        self.ranked.iter().map(|&(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        self.is_probability
    }

    /// 1-based rank of `item`.
    pub fn rank_of(&self, item: u32) -> Option<usize> {
        self.ranked.iter().position(|&(i, _)| i == item).map(|p| p + 1)
    }
}

/// Single-target NDCG: `1 / log2(rank + 1)` when the target is in the top
/// `k`, else 0.
pub fn ndcg_at_k(pred: &PredictionList, target: u32, k: usize) -> f64 {
    match pred.rank_of(target) {
        Some(r) if r <= k => 1.0 / ((r + 1) as f64).log2(),
        _ => 0.0,
    }
}

pub fn recall_at_k(pred: &PredictionList, target: u32, k: usize) -> f64 {
    match pred.rank_of(target) {
        Some(r) if r <= k => 1.0,
        _ => 0.0,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// A named model's predictions, aligned with the instance order.
#[derive(Debug, Clone, Copy)]
pub struct ModelPredictions<'a> {
    pub name: &'a str,
    pub lists: &'a [PredictionList],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    All,
    Memorization,
    Generalization,
    Substitutability,
    Symmetry,
    Transitivity,
    SecondSymmetry,
    Uncategorized,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::All => "all",
            CellKind::Memorization => "memorization",
            CellKind::Generalization => "generalization",
            CellKind::Substitutability => "substitutability",
            CellKind::Symmetry => "symmetry",
            CellKind::Transitivity => "transitivity",
            CellKind::SecondSymmetry => "second_symmetry",
            CellKind::Uncategorized => "uncategorized",
        }
    }

    fn member(self, r: &CategoryRecord, hop: Option<usize>) -> bool {
        match self {
            CellKind::All => true,
            CellKind::Memorization => r.memorization,
            CellKind::Generalization => !r.memorization && r.is_generalization(),
            CellKind::Substitutability => r.substitutability_hop == hop,
            CellKind::Symmetry => r.symmetry_hop == hop,
            CellKind::Transitivity => r.transitivity_hop == hop,
            CellKind::SecondSymmetry => r.second_symmetry_hop == hop,
            CellKind::Uncategorized => r.uncategorized,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownCell {
    pub kind: CellKind,
    pub hop: Option<usize>,
    pub count: usize,
    pub ratio: Option<f64>,
    /// Per model, `None` for an empty cell.
    pub ndcg: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownReport {
    pub k: usize,
    pub models: Vec<String>,
    pub cells: Vec<BreakdownCell>,
}

/// Per-category mean metrics in the usual column order: all, memorization,
/// generalization (any), each generalization type by hop, uncategorized.
/// An instance lands in every generalization cell it is labelled with.
pub fn breakdown(
    records: &[CategoryRecord],
    models: &[ModelPredictions<'_>],
    targets: &[u32],
    k: usize,
    max_hop: usize,
) -> Result<BreakdownReport> {
    if records.len() != targets.len() {
        return Err(Error::Misaligned {
            what: "records vs targets",
            left: records.len(),
            right: targets.len(),
        });
    }
    for m in models {
        if m.lists.len() != targets.len() {
            return Err(Error::Misaligned {
                what: "predictions vs targets",
                left: m.lists.len(),
                right: targets.len(),
            });
        }
    }
    let ndcgs: Vec<Vec<f64>> = models
        .iter()
        .map(|m| m.lists.iter().zip(targets).map(|(p, &t)| ndcg_at_k(p, t, k)).collect())
        .collect();
    let recalls: Vec<Vec<f64>> = models
        .iter()
        .map(|m| m.lists.iter().zip(targets).map(|(p, &t)| recall_at_k(p, t, k)).collect())
        .collect();

    let mut layout = vec![
        (CellKind::All, None),
        (CellKind::Memorization, None),
        (CellKind::Generalization, None),
    ];
    layout.extend((2..=max_hop).map(|h| (CellKind::Substitutability, Some(h))));
    for kind in [CellKind::Symmetry, CellKind::Transitivity, CellKind::SecondSymmetry] {
        layout.extend((1..=max_hop).map(|h| (kind, Some(h))));
    }
    layout.push((CellKind::Uncategorized, None));

    let total = records.len();
    let cells = layout
        .into_iter()
        .map(|(kind, hop)| {
            let members: Vec<usize> = (0..total).filter(|&i| kind.member(&records[i], hop)).collect();
            BreakdownCell {
                kind,
                hop,
                count: members.len(),
                ratio: (total > 0).then(|| 100.0 * members.len() as f64 / total as f64),
                ndcg: ndcgs.iter().map(|v| mean(members.iter().map(|&i| v[i]))).collect(),
                recall: recalls.iter().map(|v| mean(members.iter().map(|&i| v[i]))).collect(),
            }
        })
        .collect();
    Ok(BreakdownReport {
        k,
        models: models.iter().map(|m| m.name.to_owned()).collect(),
        cells,
    })
}

impl BreakdownReport {
    pub fn cell(&self, kind: CellKind, hop: Option<usize>) -> Option<&BreakdownCell> {
        self.cells.iter().find(|c| c.kind == kind && c.hop == hop)
    }

    pub fn to_report(&self) -> Report {
        let mut cols = vec!["category".to_owned(), "hop".into(), "count".into(), "ratio".into()];
        for m in &self.models {
            cols.push(format!("{m} N@{}", self.k));
            cols.push(format!("{m} R@{}", self.k));
        }
        let mut r = Report::new("breakdown", cols);
        for c in &self.cells {
            let mut row = vec![
                Cell::text(c.kind.as_str()),
                c.hop.map_or(Cell::Missing, Cell::int),
                Cell::int(c.count),
                Cell::ratio(c.ratio),
            ];
            for (n, rc) in c.ndcg.iter().zip(&c.recall) {
                row.push(Cell::metric(*n));
                row.push(Cell::metric(*rc));
            }
            r.push(row);
        }
        r
    }
}

/// Quantile bin edges and each value's bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    /// `bins + 1` non-decreasing edges; bin `b` covers `(edges[b], edges[b+1]]`,
    /// with bin 0 also holding the minimum.
    pub edges: Vec<f64>,
    pub assignment: Vec<usize>,
}

impl Bins {
    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_bins()];
        for &b in &self.assignment {
            c[b] += 1;
        }
        c
    }
}

/// Bins values at the `i / bins` empirical quantiles. Edge `i` is the
/// `ceil(i * n / bins)`-th smallest value, and a value goes to the lowest bin
/// whose upper edge is not below it, so ties always land in the lower bin.
pub fn quantile_bins(values: &[f64], bins: usize) -> Result<Bins> {
    if values.is_empty() {
        return Err(Error::Empty("quantile_bins values"));
    }
    if bins < 1 {
        return Err(Error::Config("bin count must be >= 1".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Validation("NaN in binning keys".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges = Vec::with_capacity(bins + 1);
    edges.push(sorted[0]);
    for i in 1..=bins {
        let rank = (i * n).div_ceil(bins);
        edges.push(sorted[rank - 1]);
    }
    let uppers = &edges[1..];
    let assignment = values.iter().map(|&v| uppers.partition_point(|&e| e < v)).collect();
    Ok(Bins { edges, assignment })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinRow {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mem_ratio: Option<f64>,
    pub means: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedReport {
    pub key_name: String,
    pub models: Vec<String>,
    pub has_mem: bool,
    pub rows: Vec<BinRow>,
}

/// Per-quantile-bin counts, optional memorization share and per-model mean
/// metric for a 1-D key.
pub fn binned_report(
    key_name: &str,
    keys: &[f64],
    metrics: &[(String, Vec<f64>)],
    mem: Option<&[bool]>,
    bins: usize,
) -> Result<BinnedReport> {
    for (_, v) in metrics {
        if v.len() != keys.len() {
            return Err(Error::Misaligned {
                what: "metric rows vs keys",
                left: v.len(),
                right: keys.len(),
            });
        }
    }
    if let Some(m) = mem {
        if m.len() != keys.len() {
            return Err(Error::Misaligned {
                what: "memorization flags vs keys",
                left: m.len(),
                right: keys.len(),
            });
        }
    }
    let b = quantile_bins(keys, bins)?;
    let rows = (0..bins)
        .map(|bin| {
            let members: Vec<usize> = (0..keys.len()).filter(|&i| b.assignment[i] == bin).collect();
            BinRow {
                bin,
                lo: b.edges[bin],
                hi: b.edges[bin + 1],
                count: members.len(),
                mem_ratio: mem.and_then(|m| {
                    mean(members.iter().map(|&i| if m[i] { 100.0 } else { 0.0 }))
                }),
                means: metrics.iter().map(|(_, v)| mean(members.iter().map(|&i| v[i]))).collect(),
            }
        })
        .collect();
    Ok(BinnedReport {
        key_name: key_name.to_owned(),
        models: metrics.iter().map(|(n, _)| n.clone()).collect(),
        has_mem: mem.is_some(),
        rows,
    })
}

impl BinnedReport {
    pub fn to_report(&self, metric_label: &str) -> Report {
        let mut cols = vec![
            "bin".to_owned(),
            format!("{} lo", self.key_name),
            format!("{} hi", self.key_name),
            "count".into(),
        ];
        if self.has_mem {
            cols.push("mem ratio".into());
        }
        cols.extend(self.models.iter().map(|m| format!("{m} {metric_label}")));
        let mut r = Report::new(format!("bins_{}", self.key_name), cols);
        for row in &self.rows {
            let mut cells = vec![
                Cell::int(row.bin),
                Cell::Real(row.lo),
                Cell::Real(row.hi),
                Cell::int(row.count),
            ];
            if self.has_mem {
                cells.push(Cell::ratio(row.mem_ratio));
            }
            cells.extend(row.means.iter().map(|&m| Cell::metric(m)));
            r.push(cells);
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub x_bin: usize,
    pub y_bin: usize,
    pub count: usize,
    /// Mean of `a - b` over the cell.
    pub mean_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub x_name: String,
    pub y_name: String,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub cells: Vec<GridCell>,
}

/// 2-D quantile grid of the mean metric difference `a - b`; each axis is
/// binned independently.
pub fn grid_report(
    (x_name, x): (&str, &[f64]),
    (y_name, y): (&str, &[f64]),
    a: &[f64],
    b: &[f64],
    bins: usize,
) -> Result<GridReport> {
    for (what, len) in [("y keys vs x keys", y.len()), ("model A vs keys", a.len()), ("model B vs keys", b.len())] {
        if len != x.len() {
            return Err(Error::Misaligned {
                what,
                left: len,
                right: x.len(),
            });
        }
    }
    let bx = quantile_bins(x, bins)?;
    let by = quantile_bins(y, bins)?;
    let mut cells = Vec::with_capacity(bins * bins);
    for xb in 0..bins {
        for yb in 0..bins {
            let members: Vec<usize> = (0..x.len())
                .filter(|&i| bx.assignment[i] == xb && by.assignment[i] == yb)
                .collect();
            cells.push(GridCell {
                x_bin: xb,
                y_bin: yb,
                count: members.len(),
                mean_delta: mean(members.iter().map(|&i| a[i] - b[i])),
            });
        }
    }
    Ok(GridReport {
        x_name: x_name.to_owned(),
        y_name: y_name.to_owned(),
        x_edges: bx.edges,
        y_edges: by.edges,
        cells,
    })
}

impl GridReport {
    pub fn to_report(&self, delta_label: &str) -> Report {
        let cols = [
            format!("{} bin", self.x_name),
            format!("{} lo", self.x_name),
            format!("{} hi", self.x_name),
            format!("{} bin", self.y_name),
            format!("{} lo", self.y_name),
            format!("{} hi", self.y_name),
            "count".into(),
            delta_label.to_owned(),
        ];
        let mut r = Report::new(format!("grid_{}_{}", self.x_name, self.y_name), cols);
        for c in &self.cells {
            r.push(vec![
                Cell::int(c.x_bin),
                Cell::Real(self.x_edges[c.x_bin]),
                Cell::Real(self.x_edges[c.x_bin + 1]),
                Cell::int(c.y_bin),
                Cell::Real(self.y_edges[c.y_bin]),
                Cell::Real(self.y_edges[c.y_bin + 1]),
                Cell::int(c.count),
                Cell::metric(c.mean_delta),
            ]);
        }
        r
    }
}
