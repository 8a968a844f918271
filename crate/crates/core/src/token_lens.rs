//! Semantic-ID prefix statistics.
//!
//! Every item maps to `L` tokens (coarse to fine, last token an identifier
//! that makes the full sequence unique). Two items share an `n`-prefix when
//! their first `n` tokens agree. An instance is prefix-memorizable at length
//! `n` and hop `k` when some training pair at exact gap `k` has the same
//! `n`-prefixes as `(i_{t-k}, i_t)`. Only the two endpoints are matched.

use std::collections::HashMap;

use crate::attribution::CategoryRecord;
use crate::domain::{Dataset, IdDict, Instance};
use crate::error::{Error, Result};
use crate::par;
use crate::report::{Cell, Report};
use crate::transition_index::TransitionIndex;

/// Item index to fixed-length token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticIdMap {
    len: usize,
    codebook_sizes: Vec<u32>,
    /// `len` tokens per item, item-major.
    tokens: Vec<u32>,
}

impl SemanticIdMap {
    /// `rows[i]` holds item `i`'s tokens. Codebook sizes default to one past
    /// the largest token seen at each level.
    pub fn new(len: usize, rows: &[Vec<u32>], codebook_sizes: Option<Vec<u32>>) -> Result<Self> {
        if len == 0 {
            return Err(Error::Config("semantic ID length must be >= 1".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != len) {
            return Err(Error::Validation(format!(
                "item {i} has {} tokens, expected {len}",
                r.len()
            )));
        }
        let sizes = match codebook_sizes {
            Some(s) if s.len() != len => {
                return Err(Error::Config(format!("{} codebook sizes for length {len}", s.len())))
            }
            Some(s) => s,
            None => (0..len)
                .map(|l| rows.iter().map(|r| r[l] + 1).max().unwrap_or(0))
                .collect(),
        };
        for (i, r) in rows.iter().enumerate() {
            if let Some(l) = (0..len).find(|&l| r[l] >= sizes[l]) {
                return Err(Error::Validation(format!(
                    "item {i}: token {} at level {l} exceeds codebook size {}",
                    r[l], sizes[l]
                )));
            }
        }
        let mut seen: HashMap<&[u32], usize> = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if let Some(j) = seen.insert(r.as_slice(), i) {
                return Err(Error::Validation(format!(
                    "items {j} and {i} share the semantic ID {r:?}"
                )));
            }
        }
        Ok(Self {
            len,
            codebook_sizes: sizes,
            tokens: rows.iter().flatten().copied().collect(),
        })
    }

    /// Builds the map in `items` order from raw-ID keyed rows; every item in
    /// the dictionary must be present.
    pub fn from_named(len: usize, items: &IdDict, rows: &HashMap<String, Vec<u32>>) -> Result<Self> {
        let missing: Vec<String> = items
            .names()
            .iter()
            .filter(|n| !rows.contains_key(n.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::UntokenizedItem(missing));
        }
        let ordered: Vec<Vec<u32>> = items.names().iter().map(|n| rows[n.as_str()].clone()).collect();
        Self::new(len, &ordered, None)
    }

    /// Tokens per item, `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_items(&self) -> usize {
        self.tokens.len() / self.len
    }

    pub fn codebook_sizes(&self) -> &[u32] {
        &self.codebook_sizes
    }

    pub fn tokens(&self, item: u32) -> Result<&[u32]> {
        let i = item as usize;
        if i >= self.num_items() {
            return Err(Error::UntokenizedItem(vec![item.to_string()]));
        }
        Ok(&self.tokens[i * self.len..(i + 1) * self.len])
    }

    /// First `n` tokens of `item`; `n = 0` gives the empty prefix.
    pub fn prefix(&self, item: u32, n: usize) -> Result<&[u32]> {
        if n > self.len {
            return Err(Error::Config(format!("prefix length {n} exceeds {}", self.len)));
        }
        Ok(&self.tokens(item)?[..n])
    }
}

/// Ratio with an explicit "undefined" state for a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    /// 0 when undefined.
    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    pub fn is_defined(&self) -> bool {
        self.denominator > 0
    }
}

#[inline]
fn pack(a: u32, b: u32) -> u64 {
    ((a as u64) << 32) | b as u64
}

#[derive(Debug, Clone, Default)]
struct PrefixTable {
    counts: HashMap<u64, u32>,
    out_total: HashMap<u32, u64>,
}

/// Prefix-pair occurrence counts for every prefix length `1..=max_n` and
/// exact gap `1..=max_hop`.
#[derive(Debug, Clone)]
pub struct PrefixTransitionIndex {
    max_n: usize,
    max_hop: usize,
    /// `[n - 1][item]` dense ID of the item's `n`-prefix.
    prefix_ids: Vec<Vec<u32>>,
    /// `[n - 1][prefix id]` ID of the `(n - 1)`-prefix it extends (0 for n = 1).
    parents: Vec<Vec<u32>>,
    /// `[n - 1][hop - 1]`.
    tables: Vec<Vec<PrefixTable>>,
}

pub fn build_prefix_index(
    train: &Dataset,
    map: &SemanticIdMap,
    max_n: usize,
    max_hop: usize,
) -> Result<PrefixTransitionIndex> {
    if max_n < 1 || max_n > map.len() {
        return Err(Error::Config(format!("max_n must be in 1..={}", map.len())));
    }
    if max_hop < 1 {
        return Err(Error::Config("max_hop must be >= 1".into()));
    }
    let mut offenders: Vec<u32> = train
        .sequences
        .iter()
        .flat_map(|s| s.items.iter().copied())
        .filter(|&i| i as usize >= map.num_items())
        .collect();
    if !offenders.is_empty() {
        offenders.sort_unstable();
        offenders.dedup();
        return Err(Error::UntokenizedItem(
            offenders
                .iter()
                .map(|&i| train.items.name(i).map_or_else(|| i.to_string(), str::to_owned))
                .collect(),
        ));
    }

    let mut prefix_ids = Vec::with_capacity(max_n);
    let mut parents = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let mut dict: HashMap<&[u32], u32> = HashMap::new();
        let mut parent = Vec::new();
        let ids: Vec<u32> = (0..map.num_items() as u32)
            .map(|item| {
                let p = map.prefix(item, n).expect("item within map");
                let next = dict.len() as u32;
                *dict.entry(p).or_insert_with(|| {
                    parent.push(if n == 1 { 0 } else { prefix_ids_last(&prefix_ids, item) });
                    next
                })
            })
            .collect();
        prefix_ids.push(ids);
        parents.push(parent);
    }

    let combos: Vec<(usize, usize)> = (1..=max_n).flat_map(|n| (1..=max_hop).map(move |h| (n, h))).collect();
    let built = par::map(&combos, |&(n, h)| {
        let ids = &prefix_ids[n - 1];
        let mut t = PrefixTable::default();
        for s in &train.sequences {
            for w in s.items.windows(h + 1) {
                let (a, b) = (ids[w[0] as usize], ids[w[h] as usize]);
                *t.counts.entry(pack(a, b)).or_default() += 1;
                *t.out_total.entry(a).or_default() += 1;
            }
        }
        t
    });
    let mut tables: Vec<Vec<PrefixTable>> = vec![Vec::with_capacity(max_hop); max_n];
    for ((n, _), t) in combos.into_iter().zip(built) {
        tables[n - 1].push(t);
    }
    Ok(PrefixTransitionIndex {
        max_n,
        max_hop,
        prefix_ids,
        parents,
        tables,
    })
}

fn prefix_ids_last(prefix_ids: &[Vec<u32>], item: u32) -> u32 {
    prefix_ids.last().map_or(0, |ids| ids[item as usize])
}

impl PrefixTransitionIndex {
    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn max_hop(&self) -> usize {
        self.max_hop
    }

    pub fn prefix_id(&self, n: usize, item: u32) -> Option<u32> {
        self.prefix_ids.get(n.checked_sub(1)?)?.get(item as usize).copied()
    }

    pub fn num_prefixes(&self, n: usize) -> usize {
        self.parents.get(n.wrapping_sub(1)).map_or(0, Vec::len)
    }

    /// The `(n - 1)`-prefix ID that prefix `id` at length `n` extends.
    pub fn parent(&self, n: usize, id: u32) -> Option<u32> {
        self.parents.get(n.checked_sub(1)?)?.get(id as usize).copied()
    }

    fn table(&self, n: usize, hop: usize) -> Option<&PrefixTable> {
        self.tables.get(n.checked_sub(1)?)?.get(hop.checked_sub(1)?)
    }

    /// Occurrences of prefix pair `(a, b)` (prefix IDs) at exact gap `hop`.
    pub fn count_ids(&self, n: usize, hop: usize, a: u32, b: u32) -> u64 {
        self.table(n, hop)
            .and_then(|t| t.counts.get(&pack(a, b)))
            .map_or(0, |&c| c as u64)
    }

    /// `C(pref_n(a) -> pref_n(b))` at gap `hop`, by item.
    pub fn count(&self, n: usize, hop: usize, a: u32, b: u32) -> u64 {
        match (self.prefix_id(n, a), self.prefix_id(n, b)) {
            (Some(pa), Some(pb)) => self.count_ids(n, hop, pa, pb),
            _ => 0,
        }
    }

    pub fn out_total_ids(&self, n: usize, hop: usize, a: u32) -> u64 {
        self.table(n, hop)
            .and_then(|t| t.out_total.get(&a))
            .copied()
            .unwrap_or(0)
    }

    /// `(a, b, count)` over observed prefix pairs at `(n, hop)`.
    pub fn pairs(&self, n: usize, hop: usize) -> Vec<(u32, u32, u64)> {
        let mut v: Vec<(u32, u32, u64)> = self
            .table(n, hop)
            .map(|t| {
                t.counts
                    .iter()
                    .map(|(&k, &c)| ((k >> 32) as u32, k as u32, c as u64))
                    .collect()
            })
            .unwrap_or_default();
        v.sort_unstable();
        v
    }

    /// Smallest hop `k <= min(max_hop, |history|)` at which the instance's
    /// `(i_{t-k}, i_t)` prefixes were observed at gap `k`.
    pub fn prefix_memorizable(&self, inst: &Instance, n: usize, max_hop: usize) -> Option<usize> {
        if n < 1 || n > self.max_n {
            return None;
        }
        let top = max_hop.min(self.max_hop).min(inst.history.len());
        (1..=top).find(|&k| self.count(n, k, inst.anchor(k).expect("k within history"), inst.target) >= 1)
    }

    /// Largest `n` with prefix memorization at some hop, 0 if none.
    pub fn max_memorizable_n(&self, inst: &Instance, max_hop: usize) -> usize {
        (1..=self.max_n)
            .rev()
            .find(|&n| self.prefix_memorizable(inst, n, max_hop).is_some())
            .unwrap_or(0)
    }

    /// `C_n(u, i_t)`: prefix-pair counts summed over hops `1..=max_hop`.
    pub fn support(&self, inst: &Instance, n: usize, max_hop: usize) -> u64 {
        let top = max_hop.min(self.max_hop).min(inst.history.len());
        (1..=top)
            .map(|k| self.count(n, k, inst.anchor(k).expect("k within history"), inst.target))
            .sum()
    }

    /// Prefix transition probability at hop 1.
    pub fn psi(&self, inst: &Instance, n: usize) -> Ratio {
        let (Some(a), Some(b)) = (self.prefix_id(n, inst.last()), self.prefix_id(n, inst.target)) else {
            return Ratio {
                numerator: 0,
                denominator: 0,
            };
        };
        Ratio {
            numerator: self.count_ids(n, 1, a, b),
            denominator: self.out_total_ids(n, 1, a),
        }
    }
}

/// Item transition probability `C(i_{t-1} -> i_t) / C(i_{t-1} -> .)` at hop 1.
pub fn phi(index: &TransitionIndex, inst: &Instance) -> Ratio {
    let a = inst.last();
    Ratio {
        numerator: index.count(1, a, inst.target).unwrap_or(0) as u64,
        denominator: index.out_total(1, a).unwrap_or(0),
    }
}

/// Exact item pair observed at gap `k` for some `k <= max_hop`.
pub fn item_pair_observed(index: &TransitionIndex, inst: &Instance, max_hop: usize) -> bool {
    let top = max_hop.min(index.max_hop()).min(inst.history.len());
    (1..=top).any(|k| index.count(k, inst.anchor(k).expect("k within history"), inst.target).unwrap_or(0) >= 1)
}

/// Exclusive max-n buckets: `counts[n]` instances whose largest memorizable
/// prefix length is exactly `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketTable {
    pub max_n: usize,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl BucketTable {
    pub fn percent(&self, n: usize) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.counts[n] as f64 / self.total as f64)
    }

    pub fn to_report(&self) -> Report {
        let mut cols: Vec<String> = (0..=self.max_n).rev().map(|n| format!("n={n}")).collect();
        cols.insert(0, "instances".into());
        let mut r = Report::new("token_memorization", cols);
        let mut row = vec![Cell::int(self.total)];
        row.extend((0..=self.max_n).rev().map(|n| Cell::ratio(self.percent(n))));
        r.push(row);
        r
    }
}

/// Largest memorizable prefix length for each instance.
pub fn max_n_per_instance(pidx: &PrefixTransitionIndex, instances: &[Instance], max_hop: usize) -> Vec<usize> {
    par::map(instances, |inst| pidx.max_memorizable_n(inst, max_hop))
}

pub fn bucket_table(max_ns: &[usize], max_n: usize) -> BucketTable {
    let mut counts = vec![0; max_n + 1];
    for &n in max_ns {
        counts[n] += 1;
    }
    BucketTable {
        max_n,
        counts,
        total: max_ns.len(),
    }
}

/// Share of each item-level category that admits prefix memorization at
/// length `>= n`, for `n` in `1..=max_n`.
pub fn reduction_report(records: &[CategoryRecord], max_ns: &[usize], max_n: usize) -> Result<Report> {
    if records.len() != max_ns.len() {
        return Err(Error::Misaligned {
            what: "records vs prefix lengths",
            left: records.len(),
            right: max_ns.len(),
        });
    }
    type Member = fn(&CategoryRecord) -> bool;
    let groups: [(&str, Member); 6] = [
        ("memorization", |r| r.memorization),
        ("substitutability", |r| r.substitutability_hop.is_some()),
        ("symmetry", |r| r.symmetry_hop.is_some()),
        ("transitivity", |r| r.transitivity_hop.is_some()),
        ("second_symmetry", |r| r.second_symmetry_hop.is_some()),
        ("uncategorized", |r| r.uncategorized),
    ];
    let mut cols = vec!["category".to_owned(), "count".into()];
    cols.extend((1..=max_n).map(|n| format!(">=n{n}")));
    let mut report = Report::new("token_reduction", cols);
    for (name, member) in groups {
        let idx: Vec<usize> = (0..records.len()).filter(|&i| member(&records[i])).collect();
        let mut row = vec![Cell::text(name), Cell::int(idx.len())];
        for n in 1..=max_n {
            let hit = idx.iter().filter(|&&i| max_ns[i] >= n).count();
            row.push(Cell::ratio((!idx.is_empty()).then(|| 100.0 * hit as f64 / idx.len() as f64)));
        }
        report.push(row);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTokenStats {
    pub max_n: usize,
    /// `supports[n - 1]` is `C_n(u, i_t)`.
    pub supports: Vec<u64>,
    pub phi: Ratio,
    /// `psi[n - 1]`.
    pub psi: Vec<Ratio>,
}

pub fn instance_stats(
    index: &TransitionIndex,
    pidx: &PrefixTransitionIndex,
    instances: &[Instance],
    max_hop: usize,
) -> Vec<InstanceTokenStats> {
    par::map(instances, |inst| InstanceTokenStats {
        max_n: pidx.max_memorizable_n(inst, max_hop),
        supports: (1..=pidx.max_n()).map(|n| pidx.support(inst, n, max_hop)).collect(),
        phi: phi(index, inst),
        psi: (1..=pidx.max_n()).map(|n| pidx.psi(inst, n)).collect(),
    })
}

/// One row per instance: user, target, max n, `C_n` per n, phi, psi per n.
/// Undefined ratios render as 0 with a `defined` flag of 0.
pub fn instance_stats_report(
    stats: &[InstanceTokenStats],
    instances: &[Instance],
    users: &IdDict,
    items: &IdDict,
    max_n: usize,
) -> Report {
    let mut cols = vec!["user".to_owned(), "target".into(), "max_n".into()];
    cols.extend((1..=max_n).map(|n| format!("C_{n}")));
    cols.extend(["phi".into(), "phi_defined".into()]);
    for n in 1..=max_n {
        cols.push(format!("psi_{n}"));
        cols.push(format!("psi_{n}_defined"));
    }
    let mut r = Report::new("token_instances", cols);
    for (s, inst) in stats.iter().zip(instances) {
        let mut row = vec![
            Cell::text(users.name(inst.user).unwrap_or_default()),
            Cell::text(items.name(inst.target).unwrap_or_default()),
            Cell::int(s.max_n),
        ];
        row.extend(s.supports.iter().map(|&c| Cell::int(c)));
        row.push(Cell::Real(s.phi.value()));
        row.push(Cell::int(s.phi.is_defined() as u8));
        for p in &s.psi {
            row.push(Cell::Real(p.value()));
            row.push(Cell::int(p.is_defined() as u8));
        }
        r.push(row);
    }
    r
}
