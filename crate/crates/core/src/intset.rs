//! Sorted `u32` sets packed into a single CSR table, with galloping
//! intersection.
//!
//! Each row is a strictly increasing slice of item indices. Rows live
//! back-to-back in one `values` buffer addressed by `offsets`, so a table of
//! a million small sets costs two allocations.

/// Rows of strictly increasing `u32` values in compressed sparse row layout.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SetTable {
    offsets: Vec<usize>,
    values: Vec<u32>,
}

impl SetTable {
    /// Builds a table with `rows` rows from `(row, value)` pairs that are
    /// sorted by row then value and free of duplicates.
    pub fn from_sorted_pairs(rows: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut offsets = vec![0usize; rows + 1];
        let mut values = Vec::new();
        let mut current = 0usize;
        for (row, value) in pairs {
            let row = row as usize;
            debug_assert!(row >= current, "pairs must be sorted by row");
            while current < row {
                current += 1;
                offsets[current] = values.len();
            }
            values.push(value);
        }
        while current < rows {
            current += 1;
            offsets[current] = values.len();
        }
        Self { offsets, values }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    /// Position of `row`'s first value in [`SetTable::values`].
    pub fn row_start(&self, row: u32) -> usize {
        self.offsets.get(row as usize).copied().unwrap_or(self.values.len())
    }

    /// The set stored at `row`; empty for rows beyond the table.
    pub fn row(&self, row: u32) -> &[u32] {
        let r = row as usize;
        if r + 1 >= self.offsets.len() {
            return &[];
        }
        &self.values[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn contains(&self, row: u32, value: u32) -> bool {
        self.row(row).binary_search(&value).is_ok()
    }

    /// Iterates `(row, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.rows() as u32).flat_map(move |r| self.row(r).iter().map(move |&v| (r, v)))
    }

    /// Transposed table: `value -> rows containing it`.
    pub fn transpose(&self, rows: usize) -> Self {
        let mut pairs: Vec<(u32, u32)> = self.iter().map(|(r, v)| (v, r)).collect();
        pairs.sort_unstable();
        Self::from_sorted_pairs(rows, pairs)
    }
}

/// First index `i >= from` with `set[i] >= target`, found by doubling the
/// step and then bisecting the last bracket.
fn gallop(set: &[u32], from: usize, target: u32) -> usize {
    if from >= set.len() || set[from] >= target {
        return from;
    }
    let mut lo = from;
    let mut step = 1;
    let mut hi = from + step;
    while hi < set.len() && set[hi] < target {
        lo = hi;
        step <<= 1;
        hi = from + step;
    }
    let hi = hi.min(set.len());
    // set[lo] < target and (hi == len or set[hi] >= target)
    lo + 1 + set[lo + 1..hi].partition_point(|&x| x < target)
}

/// Smallest element common to both sorted sets and accepted by `keep`.
///
/// Walks the shorter set in order and gallops through the longer one, so the
/// cost is `O(short * log(long / short))`.
pub fn first_common_where(a: &[u32], b: &[u32], mut keep: impl FnMut(u32) -> bool) -> Option<u32> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut pos = 0;
    for &x in short {
        pos = gallop(long, pos, x);
        if pos == long.len() {
            return None;
        }
        if long[pos] == x && keep(x) {
            return Some(x);
        }
    }
    None
}

/// Smallest common element of two sorted sets, if any.
pub fn intersect_nonempty(a: &[u32], b: &[u32]) -> Option<u32> {
    first_common_where(a, b, |_| true)
}

/// Full intersection of two sorted sets.
pub fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = Vec::new();
    let mut pos = 0;
    for &x in short {
        pos = gallop(long, pos, x);
        if pos == long.len() {
            break;
        }
        if long[pos] == x {
            out.push(x);
        }
    }
    out
}
