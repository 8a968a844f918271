//! Per-hop item transition statistics over training sequences.
//!
//! For every exact gap `h` in `1..=max_hop` the index stores successor and
//! predecessor sets plus occurrence counts, and independently of `max_hop`
//! it stores the "any gap" relation: `b` is an any-gap successor of `a` when
//! some training sequence contains `a` strictly before `b`.

use std::io::{Read, Write};

use crate::domain::{Dataset, TransitionQuery};
use crate::error::{Error, Result};
use crate::intset::SetTable;
use crate::par;

pub const MAGIC: &[u8; 5] = b"TLIDX";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
struct HopTable {
    succ: SetTable,
    /// Occurrence count for each entry of `succ.values()`.
    counts: Vec<u32>,
    pred: SetTable,
    out_total: Vec<u64>,
}

impl HopTable {
    /// `triples` sorted by (source, dest), unique.
    fn from_triples(num_items: usize, triples: &[(u32, u32, u32)]) -> Self {
        let succ = SetTable::from_sorted_pairs(num_items, triples.iter().map(|&(s, d, _)| (s, d)));
        let counts = triples.iter().map(|&(_, _, c)| c).collect();
        let mut out_total = vec![0u64; num_items];
        for &(s, _, c) in triples {
            out_total[s as usize] += c as u64;
        }
        let pred = succ.transpose(num_items);
        Self {
            succ,
            counts,
            pred,
            out_total,
        }
    }

    fn count(&self, source: u32, dest: u32) -> u32 {
        let row = self.succ.row(source);
        match row.binary_search(&dest) {
            Ok(pos) => self.counts[self.succ.row_start(source) + pos],
            Err(_) => 0,
        }
    }

    fn triples(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.succ
            .iter()
            .zip(&self.counts)
            .map(|((s, d), &c)| (s, d, c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionIndex {
    num_items: usize,
    max_hop: usize,
    hops: Vec<HopTable>,
    any_succ: SetTable,
    any_pred: SetTable,
}

#[inline]
fn pack(a: u32, b: u32) -> u64 {
    ((a as u64) << 32) | b as u64
}

#[inline]
fn unpack(k: u64) -> (u32, u32) {
    ((k >> 32) as u32, k as u32)
}

/// Run-length encodes sorted keys into `(source, dest, count)`.
fn count_runs(keys: &[u64]) -> Vec<(u32, u32, u32)> {
    let mut out: Vec<(u32, u32, u32)> = Vec::new();
    let mut iter = keys.iter().copied().peekable();
    while let Some(k) = iter.next() {
        let mut c = 1u32;
        while iter.peek() == Some(&k) {
            iter.next();
            c += 1;
        }
        let (s, d) = unpack(k);
        out.push((s, d, c));
    }
    out
}

/// Builds the index over `train`'s sequences for gaps `1..=max_hop`.
pub fn build_index(train: &Dataset, max_hop: usize) -> Result<TransitionIndex> {
    if max_hop < 1 {
        return Err(Error::Config("max_hop must be >= 1".into()));
    }
    let num_items = train.items.len();
    let seqs = &train.sequences;
    let mut hops = Vec::with_capacity(max_hop);
    for h in 1..=max_hop {
        let mut keys = par::flat_map(seqs, |s, out: &mut Vec<u64>| {
            out.extend(s.items.windows(h + 1).map(|w| pack(w[0], w[h])));
        });
        par::sort_unstable(&mut keys);
        hops.push(HopTable::from_triples(num_items, &count_runs(&keys)));
    }

    let mut keys = par::flat_map(seqs, |s, out: &mut Vec<u64>| {
        let items = &s.items;
        let start = out.len();
        for (p, &a) in items.iter().enumerate() {
            out.extend(items[p + 1..].iter().map(|&b| pack(a, b)));
        }
        // local dedup keeps long repetitive sequences from exploding
        out[start..].sort_unstable();
        let mut w = start;
        for r in start..out.len() {
            if r == start || out[r] != out[w - 1] {
                out[w] = out[r];
                w += 1;
            }
        }
        out.truncate(w);
    });
    par::sort_unstable(&mut keys);
    keys.dedup();
    let any_succ = SetTable::from_sorted_pairs(num_items, keys.iter().map(|&k| unpack(k)));
    let any_pred = any_succ.transpose(num_items);

    Ok(TransitionIndex {
        num_items,
        max_hop,
        hops,
        any_succ,
        any_pred,
    })
}

impl TransitionIndex {
    pub fn max_hop(&self) -> usize {
        self.max_hop
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    fn hop_table(&self, hop: usize) -> Result<&HopTable> {
        if hop == 0 || hop > self.max_hop {
            return Err(Error::HopOutOfRange {
                hop,
                max_hop: self.max_hop,
            });
        }
        Ok(&self.hops[hop - 1])
    }

    fn hop1(&self) -> &HopTable {
        &self.hops[0]
    }

    /// Whether the exact-gap transition has been observed at least once.
    pub fn contains(&self, q: TransitionQuery) -> Result<bool> {
        Ok(self.hop_table(q.hop)?.count(q.source, q.dest) >= 1)
    }

    /// Adjacent-pair membership; the hop-1 table always exists.
    pub fn contains_adjacent(&self, source: u32, dest: u32) -> bool {
        self.hop1().count(source, dest) >= 1
    }

    pub(crate) fn adjacent_successors(&self, item: u32) -> &[u32] {
        self.hop1().succ.row(item)
    }

    pub(crate) fn adjacent_predecessors(&self, item: u32) -> &[u32] {
        self.hop1().pred.row(item)
    }

    /// Whether some training sequence has `source` strictly before `dest`.
    pub fn contains_any_gap(&self, source: u32, dest: u32) -> bool {
        self.any_succ.contains(source, dest)
    }

    pub fn count(&self, hop: usize, source: u32, dest: u32) -> Result<u32> {
        Ok(self.hop_table(hop)?.count(source, dest))
    }

    /// Total outgoing occurrences of `source` at gap `hop`.
    pub fn out_total(&self, hop: usize, source: u32) -> Result<u64> {
        Ok(self
            .hop_table(hop)?
            .out_total
            .get(source as usize)
            .copied()
            .unwrap_or(0))
    }

    pub fn successors(&self, hop: usize, item: u32) -> Result<&[u32]> {
        Ok(self.hop_table(hop)?.succ.row(item))
    }

    pub fn predecessors(&self, hop: usize, item: u32) -> Result<&[u32]> {
        Ok(self.hop_table(hop)?.pred.row(item))
    }

    pub fn any_gap_successors(&self, item: u32) -> &[u32] {
        self.any_succ.row(item)
    }

    pub fn any_gap_predecessors(&self, item: u32) -> &[u32] {
        self.any_pred.row(item)
    }

    /// `(source, dest, count)` for every observed pair at `hop`, sorted.
    pub fn pairs(&self, hop: usize) -> Result<Vec<(u32, u32, u32)>> {
        Ok(self.hop_table(hop)?.triples().collect())
    }

    /// Pairs reconstructed from the predecessor side, sorted by (source, dest).
    pub fn pairs_from_predecessors(&self, hop: usize) -> Result<Vec<(u32, u32)>> {
        let t = self.hop_table(hop)?;
        let mut v: Vec<(u32, u32)> = t.pred.iter().map(|(d, s)| (s, d)).collect();
        v.sort_unstable();
        Ok(v)
    }

    /// Writes the versioned binary cache format: magic, version byte, then
    /// little-endian `u32` fields.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[FORMAT_VERSION])?;
        let put = |x: u32, w: &mut W| w.write_all(&x.to_le_bytes());
        put(to_u32(self.num_items)?, &mut w)?;
        put(to_u32(self.max_hop)?, &mut w)?;
        for t in &self.hops {
            put(to_u32(t.counts.len())?, &mut w)?;
            for (s, d, c) in t.triples() {
                put(s, &mut w)?;
                put(d, &mut w)?;
                put(c, &mut w)?;
            }
        }
        put(to_u32(self.any_succ.values().len())?, &mut w)?;
        for (s, d) in self.any_succ.iter() {
            put(s, &mut w)?;
            put(d, &mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)
            .map_err(|_| Error::IndexFormat("truncated header".into()))?;
        if &magic[..5] != MAGIC {
            return Err(Error::IndexFormat("bad magic bytes".into()));
        }
        if magic[5] != FORMAT_VERSION {
            return Err(Error::IndexFormat(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                magic[5]
            )));
        }
        let mut get = || -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|_| Error::IndexFormat("truncated body".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let num_items = get()? as usize;
        let max_hop = get()? as usize;
        if max_hop == 0 {
            return Err(Error::IndexFormat("max_hop is 0".into()));
        }
        let check = |s: u32, d: u32| -> Result<()> {
            if s as usize >= num_items || d as usize >= num_items {
                return Err(Error::IndexFormat(format!("item {s}->{d} out of range")));
            }
            Ok(())
        };
        let mut hops = Vec::with_capacity(max_hop);
        for _ in 0..max_hop {
            let n = get()? as usize;
            let mut triples = Vec::with_capacity(n);
            for _ in 0..n {
                let (s, d, c) = (get()?, get()?, get()?);
                check(s, d)?;
                triples.push((s, d, c));
            }
            if !triples.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)) {
                return Err(Error::IndexFormat("pairs not sorted".into()));
            }
            hops.push(HopTable::from_triples(num_items, &triples));
        }
        let n = get()? as usize;
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            let (s, d) = (get()?, get()?);
            check(s, d)?;
            pairs.push((s, d));
        }
        if !pairs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::IndexFormat("any-gap pairs not sorted".into()));
        }
        let any_succ = SetTable::from_sorted_pairs(num_items, pairs);
        let any_pred = any_succ.transpose(num_items);
        Ok(Self {
            num_items,
            max_hop,
            hops,
            any_succ,
            any_pred,
        })
    }
}

fn to_u32(x: usize) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::IndexFormat(format!("{x} does not fit in u32")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ds(rows: &[&[&str]]) -> Dataset {
        Dataset::from_raw(rows.iter().enumerate().map(|(u, r)| (format!("u{u}"), r.to_vec()))).unwrap()
    }

    fn named_pairs(d: &Dataset, idx: &TransitionIndex, hop: usize) -> Vec<(String, String, u32)> {
        idx.pairs(hop)
            .unwrap()
            .into_iter()
            .map(|(s, t, c)| {
                (
                    d.items.name(s).unwrap().to_owned(),
                    d.items.name(t).unwrap().to_owned(),
                    c,
                )
            })
            .collect()
    }

    fn q(d: &Dataset, s: &str, t: &str, hop: usize) -> TransitionQuery {
        TransitionQuery {
            source: d.items.get(s).unwrap(),
            dest: d.items.get(t).unwrap(),
            hop,
        }
    }

    #[test]
    fn exact_gap_counts() {
        let d = ds(&[&["A", "B", "C"]]);
        let idx = build_index(&d, 2).unwrap();
        let s = |a: &str, b: &str, c| (a.to_owned(), b.to_owned(), c);
        assert_eq!(named_pairs(&d, &idx, 1), vec![s("A", "B", 1), s("B", "C", 1)]);
        assert_eq!(named_pairs(&d, &idx, 2), vec![s("A", "C", 1)]);
    }

    #[test]
    fn self_transitions_are_counted() {
        let d = ds(&[&["A", "A", "A"]]);
        let idx = build_index(&d, 1).unwrap();
        assert_eq!(named_pairs(&d, &idx, 1), vec![("A".into(), "A".into(), 2)]);
    }

    #[test]
    fn counts_accumulate_across_users() {
        let d = ds(&[&["A", "B"], &["A", "B"]]);
        let idx = build_index(&d, 1).unwrap();
        assert_eq!(named_pairs(&d, &idx, 1), vec![("A".into(), "B".into(), 2)]);
        assert_eq!(idx.out_total(1, d.items.get("A").unwrap()).unwrap(), 2);
    }

    #[test]
    fn zero_max_hop_rejected() {
        assert!(matches!(build_index(&ds(&[&["A"]]), 0), Err(Error::Config(_))));
    }

    #[test]
    fn membership_is_directional_and_gap_exact() {
        let d = ds(&[&["A", "B", "C"]]);
        let idx = build_index(&d, 2).unwrap();
        assert!(idx.contains(q(&d, "A", "B", 1)).unwrap());
        assert!(!idx.contains(q(&d, "B", "A", 1)).unwrap());
        assert!(idx.contains(q(&d, "A", "C", 2)).unwrap());
        assert!(!idx.contains(q(&d, "A", "C", 1)).unwrap());
        assert!(matches!(
            idx.contains(q(&d, "A", "C", 3)),
            Err(Error::HopOutOfRange { hop: 3, max_hop: 2 })
        ));
    }

    #[test]
    fn any_gap_membership() {
        let d = ds(&[&["A", "B", "C", "D"]]);
        let idx = build_index(&d, 1).unwrap();
        let id = |s| d.items.get(s).unwrap();
        assert!(idx.contains_any_gap(id("A"), id("D")));
        assert!(!idx.contains_any_gap(id("D"), id("A")));

        let d = ds(&[&["A", "B"], &["B", "C"]]);
        let idx = build_index(&d, 1).unwrap();
        let id = |s| d.items.get(s).unwrap();
        assert!(!idx.contains_any_gap(id("A"), id("C")));
    }

    #[test]
    fn items_outside_training_have_empty_rows() {
        let mut d = ds(&[&["A", "B"]]);
        let z = d.items.intern("Z");
        let idx = build_index(&d, 2).unwrap();
        assert!(idx.successors(1, z).unwrap().is_empty());
        assert!(idx.any_gap_predecessors(z).is_empty());
        assert!(!idx.contains_any_gap(z, 0));
        assert_eq!(idx.out_total(2, 10_000).unwrap(), 0);
    }

    #[test]
    fn loader_rejects_other_versions_and_garbage() {
        let idx = build_index(&ds(&[&["A", "B", "C"]]), 2).unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"TLIDX");
        assert_eq!(buf[5], FORMAT_VERSION);
        let mut bumped = buf.clone();
        bumped[5] = FORMAT_VERSION + 1;
        assert!(matches!(TransitionIndex::read_from(&bumped[..]), Err(Error::IndexFormat(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(TransitionIndex::read_from(&bad[..]).is_err());
        assert!(TransitionIndex::read_from(&buf[..buf.len() - 2]).is_err());
    }

    fn corpus() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..12, 1..10), 1..15)
    }

    fn dataset_of(rows: &[Vec<u8>]) -> Dataset {
        Dataset::from_raw(
            rows.iter()
                .enumerate()
                .map(|(u, r)| (format!("u{u}"), r.iter().map(|i| format!("i{i}")).collect::<Vec<_>>())),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn succ_and_pred_agree(rows in corpus(), hop in 1usize..4) {
            let d = dataset_of(&rows);
            let idx = build_index(&d, hop).unwrap();
            let from_succ: Vec<(u32, u32)> = idx.pairs(hop).unwrap().into_iter().map(|(s, t, _)| (s, t)).collect();
            prop_assert_eq!(from_succ, idx.pairs_from_predecessors(hop).unwrap());
        }

        #[test]
        fn counts_match_enumeration(rows in corpus(), max_hop in 1usize..5) {
            let d = dataset_of(&rows);
            let idx = build_index(&d, max_hop).unwrap();
            for h in 1..=max_hop {
                let mut expected: BTreeMap<(u32, u32), u32> = BTreeMap::new();
                for s in &d.sequences {
                    for p in 0..s.items.len() {
                        if p + h < s.items.len() {
                            *expected.entry((s.items[p], s.items[p + h])).or_default() += 1;
                        }
                    }
                }
                let got: BTreeMap<(u32, u32), u32> =
                    idx.pairs(h).unwrap().into_iter().map(|(s, t, c)| ((s, t), c)).collect();
                // conservation: total = sum over sequences of max(0, len - h)
                let total: u64 = got.values().map(|&c| c as u64).sum();
                let by_len: u64 = d.sequences.iter().map(|s| s.items.len().saturating_sub(h) as u64).sum();
                prop_assert_eq!(total, by_len);
                prop_assert_eq!(&got, &expected);
                for item in 0..d.num_items() as u32 {
                    let out: u64 = got.iter().filter(|((s, _), _)| *s == item).map(|(_, &c)| c as u64).sum();
                    prop_assert_eq!(idx.out_total(h, item).unwrap(), out);
                    // any-gap covers every exact-gap successor
                    for &t in idx.successors(h, item).unwrap() {
                        prop_assert!(idx.contains_any_gap(item, t));
                    }
                }
            }
        }

        #[test]
        fn serialization_round_trip(rows in corpus(), max_hop in 1usize..4) {
            let d = dataset_of(&rows);
            let idx = build_index(&d, max_hop).unwrap();
            let mut buf = Vec::new();
            idx.write_to(&mut buf).unwrap();
            let back = TransitionIndex::read_from(&buf[..]).unwrap();
            prop_assert_eq!(&back, &idx);
        }
    }
}
