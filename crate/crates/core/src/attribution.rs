//! Memorization / generalization labels for test instances.
//!
//! An instance is memorization-related when its final adjacent transition
//! `[i_{t-1} -> i_t]` occurs in training. Otherwise four generalization
//! checks run independently, each reporting the smallest history hop at
//! which it fires:
//!
//! * substitutability: an earlier history item `i_{t-k}` (k >= 2) precedes
//!   the target somewhere inside a single training sequence;
//! * symmetry: the reverse transition `[i_t -> i_{t-k}]` was observed;
//! * transitivity: a bridge `x` with `[i_{t-k} -> x]` and `[x -> i_t]`;
//! * second-order symmetry: a shared cause, shared effect or reverse path
//!   through some `x`.
//!
//! Bridge items never coincide with either endpoint. Instances with no label
//! at all are uncategorized.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::intset::first_common_where;
use crate::par;
use crate::report::{Cell, Report};
use crate::transition_index::TransitionIndex;

/// How training-side patterns for symmetry, transitivity and second-order
/// symmetry are matched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Adjacent pairs inside a training sequence.
    #[default]
    Adjacent,
    /// Any ordered co-occurrence inside a training sequence.
    AnyGap,
}

impl MatchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::Adjacent => "adjacent",
            MatchMode::AnyGap => "any_gap",
        }
    }
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(MatchMode::Adjacent),
            "any_gap" | "any-gap" => Ok(MatchMode::AnyGap),
            other => Err(Error::Config(format!("unknown match mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub max_hop: usize,
    pub train_match_mode: MatchMode,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            max_hop: 4,
            train_match_mode: MatchMode::Adjacent,
        }
    }
}

impl AttributionConfig {
    pub fn with_max_hop(max_hop: usize) -> Self {
        Self {
            max_hop,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_hop < 1 {
            return Err(Error::Config("max_hop must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondSymmetryKind {
    CommonCause,
    CommonEffect,
    ReversePath,
}

impl SecondSymmetryKind {
    pub const ALL: [SecondSymmetryKind; 3] = [
        SecondSymmetryKind::CommonCause,
        SecondSymmetryKind::CommonEffect,
        SecondSymmetryKind::ReversePath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SecondSymmetryKind::CommonCause => "common_cause",
            SecondSymmetryKind::CommonEffect => "common_effect",
            SecondSymmetryKind::ReversePath => "reverse_path",
        }
    }
}

impl std::str::FromStr for SecondSymmetryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown second-order symmetry kind {s:?}")))
    }
}

/// Attribution of one instance. Hops are history-side positional gaps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub memorization: bool,
    pub substitutability_hop: Option<usize>,
    pub symmetry_hop: Option<usize>,
    pub transitivity_hop: Option<usize>,
    pub second_symmetry_hop: Option<usize>,
    pub second_symmetry_kind: Option<SecondSymmetryKind>,
    pub uncategorized: bool,
}

impl CategoryRecord {
    pub fn memorized() -> Self {
        Self {
            memorization: true,
            ..Self::default()
        }
    }

    pub fn uncategorized() -> Self {
        Self {
            uncategorized: true,
            ..Self::default()
        }
    }

    pub fn is_generalization(&self) -> bool {
        self.substitutability_hop.is_some()
            || self.symmetry_hop.is_some()
            || self.transitivity_hop.is_some()
            || self.second_symmetry_hop.is_some()
    }

    /// Checks the record's structural invariants against `max_hop`.
    pub fn validate(&self, max_hop: usize) -> Result<()> {
        let gen = self.is_generalization();
        let fail = |m: &str| Err(Error::Validation(m.to_owned()));
        if self.memorization && (gen || self.uncategorized) {
            return fail("memorization record carries other labels");
        }
        if self.uncategorized != (!self.memorization && !gen) {
            return fail("uncategorized flag inconsistent with labels");
        }
        if self.second_symmetry_hop.is_some() != self.second_symmetry_kind.is_some() {
            return fail("second-order symmetry hop and kind must come together");
        }
        if self.substitutability_hop.is_some_and(|h| h < 2) {
            return fail("substitutability hop below 2");
        }
        let hops = [
            self.substitutability_hop,
            self.symmetry_hop,
            self.transitivity_hop,
            self.second_symmetry_hop,
        ];
        if hops.iter().flatten().any(|&h| h < 1 || h > max_hop) {
            return fail("hop outside 1..=max_hop");
        }
        Ok(())
    }
}

/// Training-side relation used by the pattern checks.
#[derive(Clone, Copy)]
struct Relation<'a> {
    index: &'a TransitionIndex,
    mode: MatchMode,
}

impl<'a> Relation<'a> {
    fn observed(&self, a: u32, b: u32) -> bool {
        match self.mode {
            MatchMode::Adjacent => self.index.contains_adjacent(a, b),
            MatchMode::AnyGap => self.index.contains_any_gap(a, b),
        }
    }

    fn succ(&self, x: u32) -> &'a [u32] {
        match self.mode {
            MatchMode::Adjacent => self.index.adjacent_successors(x),
            MatchMode::AnyGap => self.index.any_gap_successors(x),
        }
    }

    fn pred(&self, x: u32) -> &'a [u32] {
        match self.mode {
            MatchMode::Adjacent => self.index.adjacent_predecessors(x),
            MatchMode::AnyGap => self.index.any_gap_predecessors(x),
        }
    }

    /// Smallest `x` outside `{a, b}` in both sets.
    fn bridge(&self, left: &[u32], right: &[u32], a: u32, b: u32) -> Option<u32> {
        first_common_where(left, right, |x| x != a && x != b)
    }
}

fn hops(inst: &Instance, from: usize, max_hop: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
    (from..=max_hop.min(inst.history.len())).map(move |k| (k, inst.history[inst.history.len() - k]))
}

pub fn check_memorization(index: &TransitionIndex, inst: &Instance) -> bool {
    !inst.history.is_empty() && index.contains_adjacent(inst.last(), inst.target)
}

/// Smallest `k` in `2..=max_hop` with `i_{t-k}` ordered before the target in
/// one training sequence. `None` for memorization-related instances.
pub fn check_substitutability(index: &TransitionIndex, inst: &Instance, max_hop: usize) -> Option<usize> {
    if check_memorization(index, inst) {
        return None;
    }
    hops(inst, 2, max_hop)
        .find(|&(_, a)| index.contains_any_gap(a, inst.target))
        .map(|(k, _)| k)
}

pub fn check_symmetry(index: &TransitionIndex, inst: &Instance, cfg: &AttributionConfig) -> Option<usize> {
    if check_memorization(index, inst) {
        return None;
    }
    let rel = Relation {
        index,
        mode: cfg.train_match_mode,
    };
    hops(inst, 1, cfg.max_hop)
        .find(|&(_, a)| rel.observed(inst.target, a))
        .map(|(k, _)| k)
}

/// Returns the minimal hop and the smallest bridging item.
pub fn check_transitivity(
    index: &TransitionIndex,
    inst: &Instance,
    cfg: &AttributionConfig,
) -> Option<(usize, u32)> {
    if check_memorization(index, inst) {
        return None;
    }
    let rel = Relation {
        index,
        mode: cfg.train_match_mode,
    };
    let t = inst.target;
    hops(inst, 1, cfg.max_hop)
        .find_map(|(k, a)| rel.bridge(rel.succ(a), rel.pred(t), a, t).map(|x| (k, x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecondSymmetryMatch {
    pub hop: usize,
    pub kind: SecondSymmetryKind,
    pub witness: u32,
}

/// Minimal hop at which any second-order symmetry subtype holds. At that hop
/// the kind is chosen by precedence: common cause, common effect, reverse path.
pub fn check_second_symmetry(
    index: &TransitionIndex,
    inst: &Instance,
    cfg: &AttributionConfig,
) -> Option<SecondSymmetryMatch> {
    if check_memorization(index, inst) {
        return None;
    }
    let rel = Relation {
        index,
        mode: cfg.train_match_mode,
    };
    let t = inst.target;
    hops(inst, 1, cfg.max_hop).find_map(|(hop, a)| {
        SecondSymmetryKind::ALL.into_iter().find_map(|kind| {
            let (left, right) = match kind {
                SecondSymmetryKind::CommonCause => (rel.pred(a), rel.pred(t)),
                SecondSymmetryKind::CommonEffect => (rel.succ(a), rel.succ(t)),
                SecondSymmetryKind::ReversePath => (rel.succ(t), rel.pred(a)),
            };
            rel.bridge(left, right, a, t)
                .map(|witness| SecondSymmetryMatch { hop, kind, witness })
        })
    })
}

pub fn attribute(index: &TransitionIndex, inst: &Instance, cfg: &AttributionConfig) -> CategoryRecord {
    if inst.history.is_empty() {
        return CategoryRecord::uncategorized();
    }
    if check_memorization(index, inst) {
        return CategoryRecord::memorized();
    }
    let second = check_second_symmetry(index, inst, cfg);
    let mut rec = CategoryRecord {
        memorization: false,
        substitutability_hop: check_substitutability(index, inst, cfg.max_hop),
        symmetry_hop: check_symmetry(index, inst, cfg),
        transitivity_hop: check_transitivity(index, inst, cfg).map(|(k, _)| k),
        second_symmetry_hop: second.map(|m| m.hop),
        second_symmetry_kind: second.map(|m| m.kind),
        uncategorized: false,
    };
    rec.uncategorized = !rec.is_generalization();
    rec
}

/// Per-instance records plus the ratio table.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub records: Vec<CategoryRecord>,
    pub summary: RatioSummary,
}

pub fn attribute_all(index: &TransitionIndex, instances: &[Instance], cfg: &AttributionConfig) -> Result<Attribution> {
    cfg.validate()?;
    let records = par::map(instances, |inst| attribute(index, inst, cfg));
    let summary = RatioSummary::from_records(&records, cfg.max_hop);
    Ok(Attribution { records, summary })
}

/// Single-threaded [`attribute_all`], independent of the `parallel` feature.
pub fn attribute_all_sequential(
    index: &TransitionIndex,
    instances: &[Instance],
    cfg: &AttributionConfig,
) -> Result<Attribution> {
    cfg.validate()?;
    let records = par::map_sequential(instances, |inst| attribute(index, inst, cfg));
    let summary = RatioSummary::from_records(&records, cfg.max_hop);
    Ok(Attribution { records, summary })
}

/// Counts behind the ratio rows: the three-way partition plus per-type,
/// per-hop tallies (an instance may appear under several types).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioSummary {
    pub max_hop: usize,
    pub total: usize,
    pub memorization: usize,
    pub generalization: usize,
    pub uncategorized: usize,
    /// Index `h - 1` holds the count at hop `h`.
    pub substitutability: Vec<usize>,
    pub symmetry: Vec<usize>,
    pub transitivity: Vec<usize>,
    pub second_symmetry: Vec<usize>,
}

impl RatioSummary {
    pub fn from_records(records: &[CategoryRecord], max_hop: usize) -> Self {
        let mut s = RatioSummary {
            max_hop,
            total: records.len(),
            memorization: 0,
            generalization: 0,
            uncategorized: 0,
            substitutability: vec![0; max_hop],
            symmetry: vec![0; max_hop],
            transitivity: vec![0; max_hop],
            second_symmetry: vec![0; max_hop],
        };
        let bump = |v: &mut Vec<usize>, hop: Option<usize>| {
            if let Some(h) = hop.filter(|&h| h >= 1) {
                if h > v.len() {
                    v.resize(h, 0);
                }
                v[h - 1] += 1;
            }
        };
        for r in records {
            if r.memorization {
                s.memorization += 1;
            } else if r.is_generalization() {
                s.generalization += 1;
            } else {
                s.uncategorized += 1;
            }
            bump(&mut s.substitutability, r.substitutability_hop);
            bump(&mut s.symmetry, r.symmetry_hop);
            bump(&mut s.transitivity, r.transitivity_hop);
            bump(&mut s.second_symmetry, r.second_symmetry_hop);
        }
        s
    }

    /// Percentage of all instances; `None` when there are no instances.
    pub fn percent(&self, count: usize) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * count as f64 / self.total as f64)
    }

    /// Memorization / generalization / uncategorized shares in hundredths of
    /// a percent, rounded by largest remainder so they add up to exactly
    /// 10000. `None` for an empty summary.
    pub fn partition_hundredths(&self) -> Option<[u64; 3]> {
        if self.total == 0 {
            return None;
        }
        let total = self.total as u64;
        let counts = [self.memorization, self.generalization, self.uncategorized].map(|c| c as u64 * 10_000);
        let mut floors = counts.map(|c| c / total);
        let rems = counts.map(|c| c % total);
        let deficit = 10_000 - floors.iter().sum::<u64>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
        for &i in order.iter().take(deficit as usize) {
            floors[i] += 1;
        }
        Some(floors)
    }

    /// Partition rows (shares summing to exactly 100.00) followed by one row
    /// per generalization type and hop.
    pub fn to_report(&self) -> Report {
        let mut r = Report::new("ratio", ["category", "hop", "count", "ratio"]);
        let parts = self.partition_hundredths();
        for (i, (name, count)) in [
            ("memorization", self.memorization),
            ("generalization", self.generalization),
            ("uncategorized", self.uncategorized),
        ]
        .into_iter()
        .enumerate()
        {
            r.push(vec![
                Cell::text(name),
                Cell::Missing,
                Cell::int(count),
                Cell::ratio(parts.map(|p| p[i] as f64 / 100.0)),
            ]);
        }
        for (name, per_hop) in [
            ("substitutability", &self.substitutability),
            ("symmetry", &self.symmetry),
            ("transitivity", &self.transitivity),
            ("second_symmetry", &self.second_symmetry),
        ] {
            for (h, &count) in per_hop.iter().enumerate() {
                r.push(vec![
                    Cell::text(name),
                    Cell::int(h + 1),
                    Cell::int(count),
                    Cell::ratio(self.percent(count)),
                ]);
            }
        }
        r
    }
}

/// Re-runs each labelled check with `max_hop` lowered to just below the
/// reported hop and confirms nothing fires there.
pub fn hops_are_minimal(index: &TransitionIndex, inst: &Instance, rec: &CategoryRecord, cfg: &AttributionConfig) -> bool {
    let below = |k: usize| AttributionConfig {
        max_hop: k - 1,
        ..*cfg
    };
    let ok_sub = rec
        .substitutability_hop
        .is_none_or(|k| check_substitutability(index, inst, k - 1).is_none());
    let ok_sym = rec
        .symmetry_hop
        .is_none_or(|k| check_symmetry(index, inst, &below(k)).is_none());
    let ok_tra = rec
        .transitivity_hop
        .is_none_or(|k| check_transitivity(index, inst, &below(k)).is_none());
    let ok_sec = rec
        .second_symmetry_hop
        .is_none_or(|k| check_second_symmetry(index, inst, &below(k)).is_none());
    ok_sub && ok_sym && ok_tra && ok_sec
}

/// Direct scan over the training sequences that applies each definition
/// literally, with no index. Cost is `O(|items| * |train| * len^2)` per
/// instance; meant as a test oracle on small corpora.
pub fn attribute_bruteforce(train: &Dataset, inst: &Instance, cfg: &AttributionConfig) -> CategoryRecord {
    let scan = Scan {
        train,
        mode: cfg.train_match_mode,
    };
    let n = inst.history.len();
    if n == 0 {
        return CategoryRecord::uncategorized();
    }
    let t = inst.target;
    if scan.adjacent(inst.history[n - 1], t) {
        return CategoryRecord::memorized();
    }
    let top = cfg.max_hop.min(n);
    let anchor = |k: usize| inst.history[n - k];
    let items = 0..train.items.len() as u32;
    let exists_x = |a: u32, f: &dyn Fn(u32) -> bool| items.clone().find(|&x| x != a && x != t && f(x));

    let mut rec = CategoryRecord {
        substitutability_hop: (2..=top).find(|&k| scan.ordered(anchor(k), t)),
        symmetry_hop: (1..=top).find(|&k| scan.observed(t, anchor(k))),
        transitivity_hop: (1..=top).find(|&k| {
            let a = anchor(k);
            exists_x(a, &|x| scan.observed(a, x) && scan.observed(x, t)).is_some()
        }),
        ..CategoryRecord::default()
    };
    for k in 1..=top {
        let a = anchor(k);
        let kind = if exists_x(a, &|x| scan.observed(x, a) && scan.observed(x, t)).is_some() {
            Some(SecondSymmetryKind::CommonCause)
        } else if exists_x(a, &|x| scan.observed(a, x) && scan.observed(t, x)).is_some() {
            Some(SecondSymmetryKind::CommonEffect)
        } else if exists_x(a, &|x| scan.observed(t, x) && scan.observed(x, a)).is_some() {
            Some(SecondSymmetryKind::ReversePath)
        } else {
            None
        };
        if kind.is_some() {
            rec.second_symmetry_hop = Some(k);
            rec.second_symmetry_kind = kind;
            break;
        }
    }
    rec.uncategorized = !rec.is_generalization();
    rec
}

struct Scan<'a> {
    train: &'a Dataset,
    mode: MatchMode,
}

impl Scan<'_> {
    fn adjacent(&self, a: u32, b: u32) -> bool {
        self.train
            .sequences
            .iter()
            .any(|s| s.items.windows(2).any(|w| w[0] == a && w[1] == b))
    }

    fn ordered(&self, a: u32, b: u32) -> bool {
        self.train.sequences.iter().any(|s| {
            s.items
                .iter()
                .position(|&x| x == a)
                .is_some_and(|p| s.items[p + 1..].contains(&b))
        })
    }

    fn observed(&self, a: u32, b: u32) -> bool {
        match self.mode {
            MatchMode::Adjacent => self.adjacent(a, b),
            MatchMode::AnyGap => self.ordered(a, b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Dataset;
    use crate::transition_index::build_index;

    /// Training rows plus extra items that never occur in training.
    struct Fixture {
        train: Dataset,
        index: TransitionIndex,
    }

    impl Fixture {
        fn new(rows: &[&[&str]], unseen: &[&str]) -> Self {
            let mut train =
                Dataset::from_raw(rows.iter().enumerate().map(|(u, r)| (format!("u{u}"), r.to_vec()))).unwrap();
            for name in unseen {
                train.items.intern(name);
            }
            let index = build_index(&train, 4).unwrap();
            Self { train, index }
        }

        fn inst(&self, hist: &[&str], target: &str) -> Instance {
            let id = |s: &str| self.train.items.get(s).unwrap_or_else(|| panic!("unknown item {s}"));
            Instance {
                user: 0,
                history: hist.iter().map(|s| id(s)).collect(),
                target: id(target),
            }
        }

        fn id(&self, s: &str) -> u32 {
            self.train.items.get(s).unwrap()
        }

        /// Indexed and brute-force attribution, asserted equal.
        fn both(&self, inst: &Instance) -> CategoryRecord {
            let cfg = AttributionConfig::default();
            let fast = attribute(&self.index, inst, &cfg);
            assert_eq!(fast, attribute_bruteforce(&self.train, inst, &cfg));
            fast
        }
    }

    fn main_fixture() -> Fixture {
        Fixture::new(&[&["A", "B", "C", "D"], &["E", "C"], &["B", "E"]], &["X"])
    }

    #[test]
    fn memorization_examples() {
        let f = main_fixture();
        assert!(check_memorization(&f.index, &f.inst(&["X", "A", "B"], "C")));
        assert!(!check_memorization(&f.index, &f.inst(&["A", "B"], "D")));
        let empty = Fixture::new(&[], &["A", "B"]);
        assert!(!check_memorization(&empty.index, &empty.inst(&["A"], "B")));
        assert_eq!(empty.both(&empty.inst(&["A"], "B")), CategoryRecord::uncategorized());
    }

    #[test]
    fn substitutability_examples() {
        let f = Fixture::new(&[&["A", "B", "C", "D"]], &["Z"]);
        assert_eq!(check_substitutability(&f.index, &f.inst(&["A", "B", "Z"], "D"), 4), Some(2));
        // [C -> D] is adjacent in training, so the guard applies
        assert_eq!(check_substitutability(&f.index, &f.inst(&["B", "C"], "D"), 4), None);
        assert!(f.both(&f.inst(&["B", "C"], "D")).memorization);

        let f = Fixture::new(&[&["A", "B"]], &["Z"]);
        assert_eq!(check_substitutability(&f.index, &f.inst(&["B", "Z"], "A"), 4), None);
    }

    #[test]
    fn symmetry_examples() {
        let f = main_fixture();
        assert_eq!(check_symmetry(&f.index, &f.inst(&["D", "C"], "B"), &Default::default()), Some(1));

        let f = Fixture::new(&[&["A", "B"]], &["Z"]);
        assert_eq!(check_symmetry(&f.index, &f.inst(&["A"], "B"), &Default::default()), None);
        assert!(f.both(&f.inst(&["A"], "B")).memorization);
        assert_eq!(check_symmetry(&f.index, &f.inst(&["Z", "B"], "A"), &Default::default()), Some(1));
    }

    #[test]
    fn transitivity_examples() {
        let f = main_fixture();
        let cfg = AttributionConfig::default();
        assert_eq!(check_transitivity(&f.index, &f.inst(&["A", "B"], "D"), &cfg), Some((1, f.id("C"))));

        let f = Fixture::new(&[&["A", "B"], &["C", "D"]], &[]);
        assert_eq!(check_transitivity(&f.index, &f.inst(&["A"], "D"), &cfg), None);

        let f = Fixture::new(&[&["A", "B", "C", "D"]], &["Z"]);
        assert_eq!(check_transitivity(&f.index, &f.inst(&["A", "B", "Z"], "D"), &cfg), Some((2, f.id("C"))));
    }

    #[test]
    fn second_symmetry_examples() {
        let cfg = AttributionConfig::default();
        let f = Fixture::new(&[&["A", "B"], &["A", "C"]], &[]);
        let m = check_second_symmetry(&f.index, &f.inst(&["B"], "C"), &cfg).unwrap();
        assert_eq!((m.hop, m.kind, m.witness), (1, SecondSymmetryKind::CommonCause, f.id("A")));

        let f = Fixture::new(&[&["B", "X"], &["C", "X"]], &[]);
        let m = check_second_symmetry(&f.index, &f.inst(&["B"], "C"), &cfg).unwrap();
        assert_eq!((m.hop, m.kind, m.witness), (1, SecondSymmetryKind::CommonEffect, f.id("X")));

        let f = Fixture::new(&[&["C", "X"], &["X", "B"]], &[]);
        let m = check_second_symmetry(&f.index, &f.inst(&["B"], "C"), &cfg).unwrap();
        assert_eq!((m.hop, m.kind, m.witness), (1, SecondSymmetryKind::ReversePath, f.id("X")));
    }

    #[test]
    fn kind_precedence_at_minimal_hop() {
        // both a common cause (P) and a common effect (Q) exist at hop 1
        let f = Fixture::new(&[&["P", "B"], &["P", "C"], &["B", "Q"], &["C", "Q"]], &[]);
        let m = check_second_symmetry(&f.index, &f.inst(&["B"], "C"), &Default::default()).unwrap();
        assert_eq!(m.kind, SecondSymmetryKind::CommonCause);
        f.both(&f.inst(&["B"], "C"));
    }

    #[test]
    fn attribute_examples() {
        let f = main_fixture();
        let rec = f.both(&f.inst(&["A", "B"], "D"));
        assert_eq!(rec.transitivity_hop, Some(1));
        assert!(!rec.uncategorized && !rec.memorization);

        let f = Fixture::new(&[&["A", "B", "C", "D"]], &["Z", "Y", "W"]);
        let rec = f.both(&f.inst(&["W", "Z"], "Y"));
        assert_eq!(rec, CategoryRecord::uncategorized());

        let rec = f.both(&f.inst(&["A", "B", "Z"], "D"));
        assert_eq!(
            rec,
            CategoryRecord {
                substitutability_hop: Some(2),
                transitivity_hop: Some(2),
                ..CategoryRecord::default()
            }
        );
    }

    #[test]
    fn bridges_exclude_endpoints() {
        // [B -> B] and [B -> C] would make B its own bridge from B to C
        let f = Fixture::new(&[&["B", "B", "C"]], &["Z"]);
        let inst = f.inst(&["B", "Z"], "C");
        assert_eq!(check_transitivity(&f.index, &inst, &AttributionConfig::default()), None);
        assert_eq!(
            f.both(&inst),
            CategoryRecord {
                substitutability_hop: Some(2),
                ..Default::default()
            }
        );
    }

    #[test]
    fn any_gap_mode_widens_matches() {
        let f = Fixture::new(&[&["A", "M", "B"]], &[]);
        let inst = f.inst(&["B"], "A");
        let adj = AttributionConfig::default();
        let any = AttributionConfig {
            train_match_mode: MatchMode::AnyGap,
            ..adj
        };
        assert_eq!(check_symmetry(&f.index, &inst, &adj), None);
        assert_eq!(check_symmetry(&f.index, &inst, &any), Some(1));
        assert_eq!(attribute(&f.index, &inst, &any), attribute_bruteforce(&f.train, &inst, &any));
    }

    #[test]
    fn short_history_truncates_hop_range() {
        let f = Fixture::new(&[&["A", "B", "C", "D"]], &[]);
        let cfg = AttributionConfig::default();
        assert_eq!(check_substitutability(&f.index, &f.inst(&["A"], "D"), 4), None);
        assert_eq!(check_symmetry(&f.index, &f.inst(&["A"], "D"), &cfg), None);
    }

    #[test]
    fn summary_partition_and_hops() {
        let recs = vec![
            CategoryRecord::memorized(),
            CategoryRecord {
                symmetry_hop: Some(1),
                transitivity_hop: Some(2),
                ..Default::default()
            },
            CategoryRecord::uncategorized(),
        ];
        let s = RatioSummary::from_records(&recs, 4);
        assert_eq!((s.memorization, s.generalization, s.uncategorized), (1, 1, 1));
        assert_eq!(s.symmetry, vec![1, 0, 0, 0]);
        assert_eq!(s.transitivity, vec![0, 1, 0, 0]);
        assert_eq!(s.partition_hundredths(), Some([3334, 3333, 3333]));
        assert!(RatioSummary::from_records(&[], 4).partition_hundredths().is_none());
        assert!(RatioSummary::from_records(&[], 4).percent(0).is_none());
    }

    #[test]
    fn planted_ratio_thirty_fifty_twenty() {
        let mut recs = vec![CategoryRecord::memorized(); 3];
        recs.extend(vec![
            CategoryRecord {
                symmetry_hop: Some(2),
                ..Default::default()
            };
            5
        ]);
        recs.extend(vec![CategoryRecord::uncategorized(); 2]);
        let s = RatioSummary::from_records(&recs, 4);
        assert_eq!(s.partition_hundredths(), Some([3000, 5000, 2000]));
    }

    #[test]
    fn record_validation() {
        assert!(CategoryRecord::memorized().validate(4).is_ok());
        let bad = CategoryRecord {
            memorization: true,
            symmetry_hop: Some(1),
            ..Default::default()
        };
        assert!(bad.validate(4).is_err());
        let bad = CategoryRecord {
            substitutability_hop: Some(1),
            ..Default::default()
        };
        assert!(bad.validate(4).is_err());
        let bad = CategoryRecord {
            symmetry_hop: Some(5),
            ..Default::default()
        };
        assert!(bad.validate(4).is_err());
    }
}
