//! Seeded synthetic corpora with planted category structure.
//!
//! Every planted test instance gets its own fresh items, so patterns cannot
//! interact. A planted user's sequence is `[F?, A, G_{k-1}, .., G_1, Q]`
//! with `A` at hop `k` from the target `Q`; `F` pads hop-1 plants to the
//! three items a leave-last-out split needs. Pattern sequences that create
//! the planted relation belong to training-only users:
//!
//! | plant | training sequences |
//! |---|---|
//! | memorization | `[A, Q]` |
//! | substitutability@k | `[A, M1, M2, Q]` |
//! | symmetry@k | `[Q, A]` |
//! | transitivity@k | `[A, X]`, `[X, Q]` |
//! | common cause | `[X, A]`, `[X, Q]` |
//! | common effect | `[A, X]`, `[Q, X]` |
//! | reverse path | `[Q, X]`, `[X, A]` |
//! | uncategorized | none |
//!
//! Symmetry is limited to hops 1 and 2: from hop 3 on, the user's own
//! training prefix `A -> G_{k-1}` combined with `Q -> A` is a reverse path at
//! hop `k - 1`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{attribute, attribute_bruteforce, AttributionConfig, CategoryRecord, SecondSymmetryKind};
use crate::domain::{make_instances, Dataset, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::io;
use crate::token_lens::{build_prefix_index, SemanticIdMap};
use crate::transition_index::build_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantCategory {
    Memorization,
    Substitutability,
    Symmetry,
    Transitivity,
    SecondSymmetry,
    Uncategorized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plant {
    pub category: PlantCategory,
    /// Required for generalization categories; ignored otherwise.
    #[serde(default)]
    pub hop: Option<usize>,
    #[serde(default)]
    pub kind: Option<SecondSymmetryKind>,
    pub count: usize,
}

/// Instances whose largest memorizable prefix length is exactly `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixPlant {
    pub n: usize,
    pub count: usize,
}

/// Training-only background users drawn from their own item range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillerSpec {
    pub users: usize,
    pub items: usize,
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_min_len() -> usize {
    3
}

fn default_max_len() -> usize {
    12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidSpec {
    /// Tokens per item, the last one an identifier.
    pub len: usize,
    /// Codebook size per level.
    pub codebook: u32,
}

fn default_max_hop() -> usize {
    AttributionConfig::default().max_hop
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_hop")]
    pub max_hop: usize,
    /// Upper bound on distinct items; generation fails if the plants and
    /// filler need more.
    #[serde(default)]
    pub item_pool: Option<usize>,
    #[serde(default, rename = "plant")]
    pub plants: Vec<Plant>,
    #[serde(default, rename = "prefix_plant")]
    pub prefix_plants: Vec<PrefixPlant>,
    #[serde(default)]
    pub filler: Option<FillerSpec>,
    #[serde(default)]
    pub sid: Option<SidSpec>,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            max_hop: default_max_hop(),
            item_pool: None,
            plants: Vec::new(),
            prefix_plants: Vec::new(),
            filler: None,
            sid: None,
        }
    }
}

impl PlantSpec {
    pub fn plant(mut self, category: PlantCategory, hop: Option<usize>, kind: Option<SecondSymmetryKind>, count: usize) -> Self {
        self.plants.push(Plant {
            category,
            hop,
            kind,
            count,
        });
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_hop < 1 {
            return Err(Error::Config("max_hop must be >= 1".into()));
        }
        for p in &self.plants {
            let hop = p.hop.unwrap_or(1);
            let need_hop = |lo: usize, hi: usize| -> Result<()> {
                let h = p.hop.ok_or_else(|| Error::Config(format!("{:?} plant needs a hop", p.category)))?;
                if h < lo || h > hi {
                    return Err(Error::Infeasible(format!(
                        "{:?} cannot be planted at hop {h} (allowed {lo}..={hi})",
                        p.category
                    )));
                }
                Ok(())
            };
            match p.category {
                PlantCategory::Memorization | PlantCategory::Uncategorized => {
                    if hop != 1 {
                        return Err(Error::Infeasible(format!("{:?} has no hop other than 1", p.category)));
                    }
                }
                PlantCategory::Substitutability => need_hop(2, self.max_hop)?,
                PlantCategory::Symmetry => need_hop(1, self.max_hop.min(2))?,
                PlantCategory::Transitivity => need_hop(1, self.max_hop)?,
                PlantCategory::SecondSymmetry => {
                    need_hop(1, self.max_hop)?;
                    if p.kind.is_none() {
                        return Err(Error::Config("second_symmetry plant needs a kind".into()));
                    }
                }
            }
        }
        if !self.prefix_plants.is_empty() {
            let sid = self
                .sid
                .ok_or_else(|| Error::Config("prefix plants need a [sid] section".into()))?;
            if let Some(p) = self.prefix_plants.iter().find(|p| p.n < 1 || p.n >= sid.len) {
                return Err(Error::Infeasible(format!(
                    "prefix plant n = {} must be in 1..{}",
                    p.n, sid.len
                )));
            }
        }
        if let Some(s) = self.sid {
            if s.len < 1 || s.codebook < 2 {
                return Err(Error::Config("sid needs len >= 1 and codebook >= 2".into()));
            }
        }
        if let Some(f) = &self.filler {
            if f.min_len < 1 || f.min_len > f.max_len || (f.users > 0 && f.items == 0) {
                return Err(Error::Config("filler needs 1 <= min_len <= max_len and items > 0".into()));
            }
        }
        Ok(())
    }
}

/// Generated corpus. `dataset` holds full sequences; `split` is its
/// leave-last-out split over `eval_users`.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dataset: Dataset,
    pub eval_users: HashSet<u32>,
    pub split: Split,
    /// Aligned with `split.test`.
    pub expected: Vec<CategoryRecord>,
    /// Aligned with `split.test`; set for prefix plants.
    pub expected_max_n: Vec<Option<usize>>,
    pub sid_map: Option<SemanticIdMap>,
}

impl SynthCorpus {
    /// Writes `interactions.tsv`, `eval_users.tsv`, `expected_labels.tsv` and,
    /// with a SID map, `sid.tsv`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.to_owned(),
            source,
        })?;
        io::write_interactions(&self.dataset, &dir.join("interactions.tsv"))?;
        let mut users: Vec<u32> = self.eval_users.iter().copied().collect();
        users.sort_unstable();
        let names: Vec<String> = users
            .iter()
            .map(|&u| self.dataset.users.name(u).unwrap_or_default().to_owned())
            .collect();
        io::write_eval_users(&names, &dir.join("eval_users.tsv"))?;
        let rows = io::label_rows(&self.expected, &self.split.test, &self.dataset.users, &self.dataset.items);
        io::write_labels(&rows, &dir.join("expected_labels.tsv"))?;
        if let Some(map) = &self.sid_map {
            io::write_sid_map(map, &self.dataset.items, &dir.join("sid.tsv"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Pattern,
    Test(usize),
    Filler,
}

struct PrefixRoles {
    n: usize,
    a: u32,
    c: u32,
    q: u32,
    d: u32,
    f: u32,
}

struct Unit {
    patterns: Vec<Vec<u32>>,
    test: Vec<u32>,
    expected: CategoryRecord,
    prefix: Option<PrefixRoles>,
}

struct Alloc(u32);

impl Alloc {
    fn fresh(&mut self) -> u32 {
        self.0 += 1;
        self.0 - 1
    }
}

fn test_sequence(alloc: &mut Alloc, a: u32, q: u32, hop: usize) -> Vec<u32> {
    let mut s = Vec::with_capacity(hop + 2);
    if hop == 1 {
        s.push(alloc.fresh());
    }
    s.push(a);
    for _ in 1..hop {
        s.push(alloc.fresh());
    }
    s.push(q);
    s
}

fn plant_unit(alloc: &mut Alloc, p: &Plant) -> Unit {
    let hop = p.hop.unwrap_or(1);
    let (a, q) = (alloc.fresh(), alloc.fresh());
    let mut rec = CategoryRecord::default();
    let patterns = match p.category {
        PlantCategory::Memorization => {
            rec = CategoryRecord::memorized();
            vec![vec![a, q]]
        }
        PlantCategory::Uncategorized => {
            rec = CategoryRecord::uncategorized();
            vec![]
        }
        PlantCategory::Substitutability => {
            rec.substitutability_hop = Some(hop);
            let (m1, m2) = (alloc.fresh(), alloc.fresh());
            vec![vec![a, m1, m2, q]]
        }
        PlantCategory::Symmetry => {
            rec.symmetry_hop = Some(hop);
            vec![vec![q, a]]
        }
        PlantCategory::Transitivity => {
            rec.transitivity_hop = Some(hop);
            let x = alloc.fresh();
            vec![vec![a, x], vec![x, q]]
        }
        PlantCategory::SecondSymmetry => {
            let kind = p.kind.expect("validated");
            rec.second_symmetry_hop = Some(hop);
            rec.second_symmetry_kind = Some(kind);
            let x = alloc.fresh();
            match kind {
                SecondSymmetryKind::CommonCause => vec![vec![x, a], vec![x, q]],
                SecondSymmetryKind::CommonEffect => vec![vec![a, x], vec![q, x]],
                SecondSymmetryKind::ReversePath => vec![vec![q, x], vec![x, a]],
            }
        }
    };
    Unit {
        patterns,
        test: test_sequence(alloc, a, q, hop),
        expected: rec,
        prefix: None,
    }
}

fn prefix_unit(alloc: &mut Alloc, n: usize) -> Unit {
    let (f, a, q, c, d) = (alloc.fresh(), alloc.fresh(), alloc.fresh(), alloc.fresh(), alloc.fresh());
    Unit {
        patterns: vec![vec![c, d]],
        test: vec![f, a, q],
        expected: CategoryRecord::uncategorized(),
        prefix: Some(PrefixRoles { n, a, c, q, d, f }),
    }
}

/// Random semantic IDs for `pinned.len()` items. `pinned[i]` fixes the first
/// token of item `i`; free first tokens are drawn from `first_lo..codebook`.
/// The last level is an identifier assigned within each shared
/// `(L - 1)`-prefix group, which makes the map injective.
fn assign_sids(
    rng: &mut ChaCha8Rng,
    pinned: &[Option<u32>],
    first_lo: u32,
    spec: SidSpec,
) -> Result<Vec<Vec<u32>>> {
    let (len, v) = (spec.len, spec.codebook);
    if first_lo >= v && pinned.iter().any(Option::is_none) {
        return Err(Error::Infeasible(format!(
            "codebook {v} leaves no free first-level tokens ({first_lo} reserved)"
        )));
    }
    let mut rows: Vec<Vec<u32>> = pinned
        .iter()
        .map(|&pin| {
            let mut r = vec![0; len];
            if len > 1 {
                r[0] = pin.unwrap_or_else(|| rng.gen_range(first_lo..v));
                for t in r.iter_mut().take(len - 1).skip(1) {
                    *t = rng.gen_range(0..v);
                }
            }
            r
        })
        .collect();
    set_identifiers(&mut rows, v)?;
    Ok(rows)
}

fn set_identifiers(rows: &mut [Vec<u32>], v: u32) -> Result<()> {
    let mut next: HashMap<Vec<u32>, u32> = HashMap::new();
    for r in rows.iter_mut() {
        let len = r.len();
        let slot = next.entry(r[..len - 1].to_vec()).or_insert(0);
        if *slot >= v {
            return Err(Error::Infeasible(format!(
                "more than {v} items share a semantic-ID prefix; enlarge the codebook"
            )));
        }
        r[len - 1] = *slot;
        *slot += 1;
    }
    Ok(())
}

/// An injective random SID map over `num_items` items.
pub fn random_sid_map(num_items: usize, spec: SidSpec, seed: u64) -> Result<SemanticIdMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = assign_sids(&mut rng, &vec![None; num_items], 0, spec)?;
    SemanticIdMap::new(spec.len, &rows, Some(vec![spec.codebook; spec.len]))
}

fn item_name(i: u32) -> String {
    format!("i{i:06}")
}

pub fn generate(spec: &PlantSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut alloc = Alloc(0);
    let mut units = Vec::new();
    for p in &spec.plants {
        for _ in 0..p.count {
            units.push(plant_unit(&mut alloc, p));
        }
    }
    for p in &spec.prefix_plants {
        for _ in 0..p.count {
            units.push(prefix_unit(&mut alloc, p.n));
        }
    }
    if units.is_empty() {
        return Err(Error::Config("plant spec has no instances".into()));
    }

    let mut rows: Vec<(Role, Vec<u32>)> = Vec::new();
    for (i, u) in units.iter().enumerate() {
        rows.extend(u.patterns.iter().map(|p| (Role::Pattern, p.clone())));
        rows.push((Role::Test(i), u.test.clone()));
    }
    if let Some(f) = spec.filler.as_ref().filter(|f| f.users > 0) {
        let base = alloc.0;
        alloc.0 += f.items as u32;
        for _ in 0..f.users {
            let len = rng.gen_range(f.min_len..=f.max_len);
            let seq = (0..len).map(|_| base + rng.gen_range(0..f.items as u32)).collect();
            rows.push((Role::Filler, seq));
        }
    }
    if let Some(pool) = spec.item_pool {
        if alloc.0 as usize > pool {
            return Err(Error::Infeasible(format!(
                "plants and filler need {} items but the pool holds {pool}",
                alloc.0
            )));
        }
    }
    rows.shuffle(&mut rng);

    let width = rows.len().to_string().len().max(5);
    let raw: Vec<(String, Vec<String>)> = rows
        .iter()
        .enumerate()
        .map(|(u, (_, seq))| (format!("u{u:0width$}"), seq.iter().map(|&i| item_name(i)).collect()))
        .collect();
    let dataset = Dataset::from_raw(raw)?;
    let id = |alloc_id: u32| dataset.items.get(&item_name(alloc_id)).expect("every item occurs");

    let mut unit_of_user: HashMap<u32, usize> = HashMap::new();
    for (u, (role, _)) in rows.iter().enumerate() {
        if let Role::Test(i) = role {
            unit_of_user.insert(u as u32, *i);
        }
    }
    let eval_users: HashSet<u32> = unit_of_user.keys().copied().collect();
    let split = make_instances(
        &dataset,
        &SplitSpec {
            eval_users: Some(eval_users.clone()),
        },
    )?;
    let expected: Vec<CategoryRecord> = split
        .test
        .iter()
        .map(|inst| units[unit_of_user[&inst.user]].expected.clone())
        .collect();
    let expected_max_n: Vec<Option<usize>> = split
        .test
        .iter()
        .map(|inst| units[unit_of_user[&inst.user]].prefix.as_ref().map(|p| p.n))
        .collect();

    let sid_map = match spec.sid {
        None => None,
        Some(sid) => Some(plant_sids(&mut rng, &units, &dataset, sid, &id)?),
    };

    let corpus = SynthCorpus {
        dataset,
        eval_users,
        split,
        expected,
        expected_max_n,
        sid_map,
    };
    verify(&corpus, &units, &unit_of_user, spec.max_hop)?;
    Ok(corpus)
}

fn plant_sids(
    rng: &mut ChaCha8Rng,
    units: &[Unit],
    dataset: &Dataset,
    sid: SidSpec,
    id: &dyn Fn(u32) -> u32,
) -> Result<SemanticIdMap> {
    let prefixed: Vec<&PrefixRoles> = units.iter().filter_map(|u| u.prefix.as_ref()).collect();
    let reserved = 3 * prefixed.len() as u32;
    let mut pinned = vec![None; dataset.num_items()];
    for (j, p) in prefixed.iter().enumerate() {
        let base = 3 * j as u32;
        for (item, tok) in [(p.a, base), (p.c, base), (p.q, base + 1), (p.d, base + 1), (p.f, base + 2)] {
            pinned[id(item) as usize] = Some(tok);
        }
    }
    if reserved > sid.codebook {
        return Err(Error::Infeasible(format!(
            "{} prefix plants need {reserved} first-level tokens, codebook has {}",
            prefixed.len(),
            sid.codebook
        )));
    }
    let mut rows = assign_sids(rng, &pinned, reserved, sid)?;
    let len = sid.len;
    for p in prefixed {
        for (src, dst) in [(p.a, p.c), (p.q, p.d)] {
            let (s, d) = (id(src) as usize, id(dst) as usize);
            let head = rows[s][..p.n].to_vec();
            rows[d][..p.n].copy_from_slice(&head);
            // the identifier level separates them when n = L - 1
            if p.n < len - 1 {
                while rows[d][p.n] == rows[s][p.n] {
                    rows[d][p.n] = rng.gen_range(0..sid.codebook);
                }
            }
        }
    }
    set_identifiers(&mut rows, sid.codebook)?;
    SemanticIdMap::new(len, &rows, Some(vec![sid.codebook; len]))
}

/// Fast attribution on the whole training set plus a brute-force check of
/// each unit against its own sequences. Items are disjoint across units and
/// filler, so the per-unit scan sees every sequence that could matter.
fn verify(corpus: &SynthCorpus, units: &[Unit], unit_of_user: &HashMap<u32, usize>, max_hop: usize) -> Result<()> {
    let cfg = AttributionConfig::with_max_hop(max_hop);
    let index = build_index(&corpus.split.train, max_hop)?;
    for (inst, want) in corpus.split.test.iter().zip(&corpus.expected) {
        let got = attribute(&index, inst, &cfg);
        if &got != want {
            return Err(Error::Infeasible(format!(
                "planted label not recovered for user {}: expected {want:?}, got {got:?}",
                inst.user
            )));
        }
        let u = &units[unit_of_user[&inst.user]];
        let mut local: Vec<Vec<String>> = u
            .patterns
            .iter()
            .map(|p| p.iter().map(|&i| item_name(i)).collect())
            .collect();
        let n = u.test.len();
        local.push(u.test[..n - 2].iter().map(|&i| item_name(i)).collect());
        let mut small = Dataset::from_raw(local.into_iter().enumerate().map(|(j, s)| (j.to_string(), s)))?;
        let mut lid = |i: u32| small.items.intern(&item_name(i));
        let history: Vec<u32> = u.test[..n - 1].iter().map(|&i| lid(i)).collect();
        let target = lid(u.test[n - 1]);
        let local_inst = crate::domain::Instance {
            user: 0,
            history,
            target,
        };
        let brute = attribute_bruteforce(&small, &local_inst, &cfg);
        if &brute != want {
            return Err(Error::Infeasible(format!(
                "brute-force check disagrees for user {}: expected {want:?}, got {brute:?}",
                inst.user
            )));
        }
    }
    if let Some(map) = &corpus.sid_map {
        let pidx = build_prefix_index(&corpus.split.train, map, map.len(), max_hop)?;
        for (inst, want) in corpus.split.test.iter().zip(&corpus.expected_max_n) {
            if let Some(n) = *want {
                let got = pidx.max_memorizable_n(inst, max_hop);
                if got != n {
                    return Err(Error::Infeasible(format!(
                        "prefix plant for user {} reaches n = {got}, expected {n}",
                        inst.user
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Unplanted random corpus for property tests and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomCorpusSpec {
    pub seed: u64,
    pub users: usize,
    pub items: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Zipf-like popularity exponent; 0 is uniform.
    pub skew: f64,
}

pub fn random_corpus(spec: &RandomCorpusSpec) -> Result<Dataset> {
    if spec.users == 0 || spec.items == 0 || spec.min_len < 1 || spec.min_len > spec.max_len {
        return Err(Error::Config("random corpus needs users, items and 1 <= min_len <= max_len".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights: Vec<f64> = (0..spec.items).map(|r| ((r + 1) as f64).powf(-spec.skew)).collect();
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;
    let rows: Vec<(String, Vec<String>)> = (0..spec.users)
        .map(|u| {
            let len = rng.gen_range(spec.min_len..=spec.max_len);
            let seq = (0..len).map(|_| item_name(pick.sample(&mut rng) as u32)).collect();
            (format!("u{u:06}"), seq)
        })
        .collect();
    Dataset::from_raw(rows)
}
