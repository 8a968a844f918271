//! Core data model: ID dictionaries, user sequences and evaluation instances.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Bidirectional map between raw string IDs and dense indices.
///
/// Indices are assigned in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdDict {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdDict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `name`, registering it if unseen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub user: u32,
    /// Chronological item indices; never empty.
    pub items: Vec<u32>,
}

/// A collection of user sequences sharing item and user dictionaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub sequences: Vec<Sequence>,
    pub items: IdDict,
    pub users: IdDict,
}

impl Dataset {
    /// Builds a dataset from raw `(user, items)` rows, assigning dense IDs in
    /// first-appearance order. Empty rows are rejected.
    pub fn from_raw<U, I, S>(rows: impl IntoIterator<Item = (U, I)>) -> Result<Self>
    where
        U: AsRef<str>,
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut ds = Dataset::default();
        for (user, items) in rows {
            let user = ds.users.intern(user.as_ref());
            let items: Vec<u32> = items
                .into_iter()
                .map(|it| ds.items.intern(it.as_ref()))
                .collect();
            if items.is_empty() {
                return Err(Error::Validation(format!(
                    "user {} has an empty sequence",
                    ds.users.name(user).unwrap_or_default()
                )));
            }
            ds.sequences.push(Sequence { user, items });
        }
        Ok(ds)
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn num_interactions(&self) -> usize {
        self.sequences.iter().map(|s| s.items.len()).sum()
    }

    /// Raw rows, the inverse of [`Dataset::from_raw`].
    pub fn to_raw(&self) -> Vec<(String, Vec<String>)> {
        self.sequences
            .iter()
            .map(|s| {
                (
                    self.users.name(s.user).unwrap_or_default().to_owned(),
                    s.items
                        .iter()
                        .map(|&i| self.items.name(i).unwrap_or_default().to_owned())
                        .collect(),
                )
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.items.len() as u32;
        for s in &self.sequences {
            if s.items.is_empty() {
                return Err(Error::Validation(format!("user {} has an empty sequence", s.user)));
            }
            if let Some(bad) = s.items.iter().find(|&&i| i >= n) {
                return Err(Error::Validation(format!(
                    "item index {bad} outside dictionary of {n} items"
                )));
            }
        }
        Ok(())
    }
}

/// A next-item prediction task: `history` is the model input, `target` the
/// held-out item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    pub user: u32,
    pub history: Vec<u32>,
    pub target: u32,
}

impl Instance {
    /// Item at `hops` positions before the target, i.e. `i_{t-hops}`.
    pub fn anchor(&self, hops: usize) -> Option<u32> {
        let len = self.history.len();
        (hops >= 1 && hops <= len).then(|| self.history[len - hops])
    }

    pub fn last(&self) -> u32 {
        *self.history.last().expect("instance history is never empty")
    }
}

/// A directed item pair at an exact positional gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionQuery {
    pub source: u32,
    pub dest: u32,
    pub hop: usize,
}

/// Which users are held out for validation/test.
#[derive(Debug, Clone, Default)]
pub struct SplitSpec {
    /// When set, only these users are split; everyone else is pure training.
    pub eval_users: Option<HashSet<u32>>,
}

impl SplitSpec {
    pub fn leave_last_out() -> Self {
        Self::default()
    }

    fn is_eval(&self, user: u32) -> bool {
        self.eval_users.as_ref().is_none_or(|set| set.contains(&user))
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    /// Training sequences; shares dictionaries with the source dataset, so
    /// items seen only as held-out targets keep their indices.
    pub train: Dataset,
    pub validation: Vec<Instance>,
    pub test: Vec<Instance>,
}

/// Leave-last-out split: the last item of each eligible sequence is the test
/// target, the second-to-last the validation target, and the remainder is
/// training data. Sequences shorter than three items go to training whole.
pub fn make_instances(dataset: &Dataset, split: &SplitSpec) -> Result<Split> {
    if dataset.sequences.is_empty() {
        return Err(Error::NoSequences);
    }
    let mut train = Vec::with_capacity(dataset.sequences.len());
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for seq in &dataset.sequences {
        let n = seq.items.len();
        if n < 3 || !split.is_eval(seq.user) {
            train.push(seq.clone());
            continue;
        }
        train.push(Sequence {
            user: seq.user,
            items: seq.items[..n - 2].to_vec(),
        });
        validation.push(Instance {
            user: seq.user,
            history: seq.items[..n - 2].to_vec(),
            target: seq.items[n - 2],
        });
        test.push(Instance {
            user: seq.user,
            history: seq.items[..n - 1].to_vec(),
            target: seq.items[n - 1],
        });
    }
    Ok(Split {
        train: Dataset {
            sequences: train,
            items: dataset.items.clone(),
            users: dataset.users.clone(),
        },
        validation,
        test,
    })
}
