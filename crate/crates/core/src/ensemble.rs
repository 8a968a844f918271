//! Two-model score fusion weighted by the ID model's top-1 probability.
//!
//! `alpha` is always the weight on the generative (GR) model; the ID model
//! gets `1 - alpha`. In fixed mode `alpha_static` is the ID-model weight, so
//! `alpha = 1 - alpha_static`.

use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use crate::attribution::CategoryRecord;
use crate::error::{Error, Result};
use crate::metrics::{binned_report, ndcg_at_k, recall_at_k, BinnedReport, PredictionList};
use crate::par;
use crate::report::{Cell, Report};

/// Rank offset for reciprocal-rank normalization.
pub const RRF_OFFSET: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Minmax,
    RankReciprocal,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Minmax => "minmax",
            Normalization::RankReciprocal => "rank_reciprocal",
        }
    }

    /// Normalized scores in list order.
    pub fn apply(self, ranked: &[(u32, f64)]) -> Vec<(u32, f64)> {
        match self {
            Normalization::Minmax => {
                let (lo, hi) = ranked
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, s)| (lo.min(s), hi.max(s)));
                let span = hi - lo;
                ranked
                    .iter()
                    .map(|&(i, s)| (i, if span > 0.0 { (s - lo) / span } else { 1.0 }))
                    .collect()
            }
            Normalization::RankReciprocal => ranked
                .iter()
                .enumerate()
                .map(|(r, &(i, _))| (i, 1.0 / (RRF_OFFSET + (r + 1) as f64)))
                .collect(),
        }
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Normalization::Minmax),
            "rank_reciprocal" | "rrf" => Ok(Normalization::RankReciprocal),
            _ => Err(Error::Config(format!("unknown normalization {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    #[default]
    Adaptive,
    Fixed,
}

impl EnsembleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleMode::Adaptive => "adaptive",
            EnsembleMode::Fixed => "fixed",
        }
    }
}

impl FromStr for EnsembleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(EnsembleMode::Adaptive),
            "fixed" => Ok(EnsembleMode::Fixed),
            _ => Err(Error::Config(format!("unknown ensemble mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub q: f64,
    pub tau: f64,
    pub alpha_static: f64,
    pub mode: EnsembleMode,
    pub normalization: Normalization,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            q: 5.0,
            tau: 0.2,
            alpha_static: 0.5,
            mode: EnsembleMode::Adaptive,
            normalization: Normalization::Minmax,
        }
    }
}

impl EnsembleConfig {
    pub fn adaptive(q: f64, tau: f64) -> Self {
        Self {
            q,
            tau,
            mode: EnsembleMode::Adaptive,
            ..Self::default()
        }
    }

    pub fn fixed(alpha_static: f64) -> Self {
        Self {
            alpha_static,
            mode: EnsembleMode::Fixed,
            ..Self::default()
        }
    }

    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalization = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(Error::Config(format!("q must be finite and >= 0, got {}", self.q)));
        }
        if !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.alpha_static) {
            return Err(Error::Config(format!(
                "alpha_static must be in [0, 1], got {}",
                self.alpha_static
            )));
        }
        Ok(())
    }

    /// Short human label, e.g. `adaptive(q=5,tau=0.2)`.
    pub fn label(&self) -> String {
        match self.mode {
            EnsembleMode::Adaptive => format!("adaptive(q={},tau={})", self.q, self.tau),
            EnsembleMode::Fixed => format!("fixed(alpha_static={})", self.alpha_static),
        }
    }
}

/// Top-1 probability of the ID model.
pub fn msp(pred_id: &PredictionList) -> Result<f64> {
    if !pred_id.is_probability() {
        return Err(Error::NotProbability);
    }
    pred_id
        .ranked()
        .first()
        .map(|&(_, s)| s)
        .ok_or(Error::Empty("ID prediction list"))
}

/// `sigmoid(-q (s_conf - tau))`.
pub fn alpha_weight(s_conf: f64, q: f64, tau: f64) -> f64 {
    1.0 / (1.0 + (q * (s_conf - tau)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub fused: PredictionList,
    /// GR-model weight.
    pub alpha: f64,
    /// Absent when the ID scores are not probabilities (fixed mode only).
    pub s_conf: Option<f64>,
    pub union_size: usize,
}

/// Weighted sum over the union of two normalized lists; a missing item scores
/// 0 for that model. Equal fused scores rank by the weight of the lists the
/// item appears in, then by item index, so at alpha 1 (or 0) an item absent
/// from the dominant list never overtakes one it contains.
fn combine(user: u32, id: &[(u32, f64)], gr: &[(u32, f64)], alpha: f64) -> PredictionList {
    let mut all: Vec<(u32, f64, f64)> = Vec::with_capacity(id.len() + gr.len());
    all.extend(id.iter().map(|&(i, s)| (i, (1.0 - alpha) * s, 1.0 - alpha)));
    all.extend(gr.iter().map(|&(i, s)| (i, alpha * s, alpha)));
    all.sort_unstable_by_key(|&(i, _, _)| i);
    let mut merged: Vec<(u32, f64, f64)> = Vec::with_capacity(all.len());
    for (i, s, w) in all {
        match merged.last_mut() {
            Some(last) if last.0 == i => {
                last.1 += s;
                last.2 += w;
            }
            _ => merged.push((i, s, w)),
        }
    }
    merged.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
    let ranked = merged.into_iter().map(|(i, s, _)| (i, s)).collect();
    PredictionList::from_ordered(user, ranked, false)
}

fn resolve_alpha(pred_id: &PredictionList, cfg: &EnsembleConfig) -> Result<(f64, Option<f64>)> {
    match cfg.mode {
        EnsembleMode::Adaptive => {
            let s = msp(pred_id)?;
            Ok((alpha_weight(s, cfg.q, cfg.tau), Some(s)))
        }
        EnsembleMode::Fixed => Ok((1.0 - cfg.alpha_static, msp(pred_id).ok())),
    }
}

pub fn fuse(pred_id: &PredictionList, pred_gr: &PredictionList, cfg: &EnsembleConfig) -> Result<FusionResult> {
    cfg.validate()?;
    if pred_id.user() != pred_gr.user() {
        return Err(Error::UserMismatch(pred_id.user(), pred_gr.user()));
    }
    if pred_id.is_empty() || pred_gr.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    let (alpha, s_conf) = resolve_alpha(pred_id, cfg)?;
    Ok(fuse_with_alpha(pred_id, pred_gr, alpha, cfg.normalization, s_conf))
}

/// Fusion at an explicit GR weight.
pub fn fuse_with_alpha(
    pred_id: &PredictionList,
    pred_gr: &PredictionList,
    alpha: f64,
    normalization: Normalization,
    s_conf: Option<f64>,
) -> FusionResult {
    let fused = combine(
        pred_id.user(),
        &normalization.apply(pred_id.ranked()),
        &normalization.apply(pred_gr.ranked()),
        alpha,
    );
    FusionResult {
        union_size: fused.len(),
        fused,
        alpha,
        s_conf,
    }
}

fn check_aligned(targets: &[u32], id: &[PredictionList], gr: &[PredictionList]) -> Result<()> {
    if id.len() != targets.len() {
        return Err(Error::Misaligned {
            what: "ID predictions vs instances",
            left: id.len(),
            right: targets.len(),
        });
    }
    if gr.len() != targets.len() {
        return Err(Error::Misaligned {
            what: "GR predictions vs instances",
            left: gr.len(),
            right: targets.len(),
        });
    }
    Ok(())
}

/// Fuses every aligned pair of lists.
pub fn fuse_all(id: &[PredictionList], gr: &[PredictionList], cfg: &EnsembleConfig) -> Result<Vec<FusionResult>> {
    if id.len() != gr.len() {
        return Err(Error::Misaligned {
            what: "ID vs GR predictions",
            left: id.len(),
            right: gr.len(),
        });
    }
    let pairs: Vec<(&PredictionList, &PredictionList)> = id.iter().zip(gr).collect();
    par::map(&pairs, |(a, b)| fuse(a, b, cfg)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub q: Vec<f64>,
    pub tau: Vec<f64>,
    pub alpha_static: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            q: vec![1.0, 5.0, 9.0, 13.0],
            tau: (0..=5).map(|i| i as f64 / 10.0).collect(),
            alpha_static: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

impl Grids {
    /// Sorted, deduplicated copy; the tie-break relies on ascending order.
    fn canonical(&self) -> Self {
        let norm = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        Self {
            q: norm(&self.q),
            tau: norm(&self.tau),
            alpha_static: norm(&self.alpha_static),
        }
    }

    pub fn adaptive_configs(&self, normalization: Normalization) -> Vec<EnsembleConfig> {
        let g = self.canonical();
        g.q.iter()
            .flat_map(|&q| g.tau.iter().map(move |&t| EnsembleConfig::adaptive(q, t)))
            .map(|c| c.with_normalization(normalization))
            .collect()
    }

    pub fn fixed_configs(&self, normalization: Normalization) -> Vec<EnsembleConfig> {
        self.canonical()
            .alpha_static
            .iter()
            .map(|&a| EnsembleConfig::fixed(a).with_normalization(normalization))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub config: EnsembleConfig,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub k: usize,
    pub adaptive: Vec<GridPoint>,
    pub fixed: Vec<GridPoint>,
    pub best_adaptive: GridPoint,
    pub best_fixed: GridPoint,
}

impl TuneResult {
    /// The full grid plus both winners.
    pub fn to_json(&self) -> String {
        let point = |p: &GridPoint| {
            json!({
                "mode": p.config.mode.as_str(),
                "normalization": p.config.normalization.as_str(),
                "q": p.config.q,
                "tau": p.config.tau,
                "alpha_static": p.config.alpha_static,
                "ndcg": p.ndcg,
            })
        };
        let doc = json!({
            "metric": format!("NDCG@{}", self.k),
            "best_adaptive": point(&self.best_adaptive),
            "best_fixed": point(&self.best_fixed),
            "adaptive": self.adaptive.iter().map(point).collect::<Vec<_>>(),
            "fixed": self.fixed.iter().map(point).collect::<Vec<_>>(),
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("JSON value serializes");
        s.push('\n');
        s
    }

    pub fn evaluated(&self) -> (usize, usize) {
        (self.adaptive.len(), self.fixed.len())
    }
}

/// Lists normalized once so each config only re-weights.
struct Prepared {
    user: u32,
    target: u32,
    id: Vec<(u32, f64)>,
    gr: Vec<(u32, f64)>,
    s_conf: Option<f64>,
}

fn mean_ndcg(prep: &[Prepared], cfg: &EnsembleConfig, k: usize) -> Result<f64> {
    let mut sum = 0.0;
    for p in prep {
        let alpha = match cfg.mode {
            EnsembleMode::Adaptive => alpha_weight(p.s_conf.ok_or(Error::NotProbability)?, cfg.q, cfg.tau),
            EnsembleMode::Fixed => 1.0 - cfg.alpha_static,
        };
        sum += ndcg_at_k(&combine(p.user, &p.id, &p.gr, alpha), p.target, k);
    }
    Ok(sum / prep.len() as f64)
}

/// First strictly-better point in grid order wins.
fn argmax(points: &[GridPoint]) -> GridPoint {
    let mut best = points[0].clone();
    for p in &points[1..] {
        if p.ndcg > best.ndcg {
            best = p.clone();
        }
    }
    best
}

/// Exhaustive validation search maximizing NDCG@`k`. Ties go to smaller `q`,
/// then smaller `tau`; among fixed configs to smaller `alpha_static`.
pub fn tune(
    targets: &[u32],
    id: &[PredictionList],
    gr: &[PredictionList],
    grids: &Grids,
    normalization: Normalization,
    k: usize,
) -> Result<TuneResult> {
    if targets.is_empty() {
        return Err(Error::Empty("validation instances"));
    }
    check_aligned(targets, id, gr)?;
    let adaptive_cfgs = grids.adaptive_configs(normalization);
    let fixed_cfgs = grids.fixed_configs(normalization);
    if adaptive_cfgs.is_empty() || fixed_cfgs.is_empty() {
        return Err(Error::Config("empty tuning grid".into()));
    }
    for c in adaptive_cfgs.iter().chain(&fixed_cfgs) {
        c.validate()?;
    }
    let mut prep = Vec::with_capacity(targets.len());
    for ((&target, a), b) in targets.iter().zip(id).zip(gr) {
        if a.user() != b.user() {
            return Err(Error::UserMismatch(a.user(), b.user()));
        }
        prep.push(Prepared {
            user: a.user(),
            target,
            id: normalization.apply(a.ranked()),
            gr: normalization.apply(b.ranked()),
            s_conf: msp(a).ok(),
        });
    }

    let eval = |cfgs: &[EnsembleConfig]| -> Result<Vec<GridPoint>> {
        par::map(cfgs, |c| mean_ndcg(&prep, c, k).map(|ndcg| GridPoint { config: *c, ndcg }))
            .into_iter()
            .collect()
    };
    let adaptive = eval(&adaptive_cfgs)?;
    let fixed = eval(&fixed_cfgs)?;
    Ok(TuneResult {
        k,
        best_adaptive: argmax(&adaptive),
        best_fixed: argmax(&fixed),
        adaptive,
        fixed,
    })
}

/// Per-MSP-bin memorization share and NDCG@`k` of both models.
pub fn indicator_report(
    targets: &[u32],
    id: &[PredictionList],
    gr: &[PredictionList],
    names: (&str, &str),
    records: &[CategoryRecord],
    bins: usize,
    k: usize,
) -> Result<BinnedReport> {
    check_aligned(targets, id, gr)?;
    if records.len() != targets.len() {
        return Err(Error::Misaligned {
            what: "records vs instances",
            left: records.len(),
            right: targets.len(),
        });
    }
    let keys = id.iter().map(msp).collect::<Result<Vec<f64>>>()?;
    let ndcg = |lists: &[PredictionList]| -> Vec<f64> {
        lists.iter().zip(targets).map(|(l, &t)| ndcg_at_k(l, t, k)).collect()
    };
    let mem: Vec<bool> = records.iter().map(|r| r.memorization).collect();
    binned_report(
        "msp",
        &keys,
        &[(names.0.to_owned(), ndcg(id)), (names.1.to_owned(), ndcg(gr))],
        Some(&mem),
        bins,
    )
}

/// Base models and ensembles side by side: NDCG@k, Recall@k, mean fusion
/// weight and mean candidate-union size.
pub fn comparison_report(
    targets: &[u32],
    id: &[PredictionList],
    gr: &[PredictionList],
    names: (&str, &str),
    ensembles: &[(&str, EnsembleConfig)],
    k: usize,
) -> Result<Report> {
    check_aligned(targets, id, gr)?;
    if targets.is_empty() {
        return Err(Error::Empty("test instances"));
    }
    let n = targets.len() as f64;
    let score = |lists: &[&PredictionList]| -> (f64, f64) {
        lists.iter().zip(targets).fold((0.0, 0.0), |(a, b), (l, &t)| {
            (a + ndcg_at_k(l, t, k) / n, b + recall_at_k(l, t, k) / n)
        })
    };
    let mut r = Report::new(
        "ensemble_comparison",
        [
            "model".to_owned(),
            "config".into(),
            format!("N@{k}"),
            format!("R@{k}"),
            "mean alpha".into(),
            "mean union".into(),
        ],
    );
    for (name, lists) in [(names.0, id), (names.1, gr)] {
        let (nd, rc) = score(&lists.iter().collect::<Vec<_>>());
        r.push(vec![
            Cell::text(name),
            Cell::Missing,
            Cell::Metric(nd),
            Cell::Metric(rc),
            Cell::Missing,
            Cell::Missing,
        ]);
    }
    for (name, cfg) in ensembles {
        let fused = fuse_all(id, gr, cfg)?;
        let (nd, rc) = score(&fused.iter().map(|f| &f.fused).collect::<Vec<_>>());
        let alpha = fused.iter().map(|f| f.alpha).sum::<f64>() / n;
        let union = fused.iter().map(|f| f.union_size as f64).sum::<f64>() / n;
        r.push(vec![
            Cell::text(*name),
            Cell::text(cfg.label()),
            Cell::Metric(nd),
            Cell::Metric(rc),
            Cell::Real(alpha),
            Cell::Real(union),
        ]);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(user: u32, scores: &[(u32, f64)], prob: bool) -> PredictionList {
        PredictionList::new(user, scores.to_vec(), prob).unwrap()
    }

    #[test]
    fn msp_examples() {
        assert_eq!(msp(&list(0, &[(1, 0.5), (2, 0.3), (3, 0.2)], true)).unwrap(), 0.5);
        assert_eq!(msp(&list(0, &[(1, 1.0)], true)).unwrap(), 1.0);
        assert_eq!(msp(&list(0, &[(1, 0.9), (2, 0.05)], true)).unwrap(), 0.9);
        let err = msp(&list(0, &[(1, 3.0)], false)).unwrap_err();
        assert_eq!(err.to_string(), "MSP requires probability scores");
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_weight(0.3, 7.0, 0.3), 0.5);
        assert_eq!(alpha_weight(0.9, 0.0, 0.1), 0.5);
        let a = alpha_weight(0.4, 5.0, 0.2);
        assert!((a - 1.0 / (1.0 + 1f64.exp())).abs() < 1e-15);
        assert!((a - 0.26894).abs() < 1e-5);
        assert!(alpha_weight(0.1, 5.0, 0.2) > alpha_weight(0.2, 5.0, 0.2));
    }

    #[test]
    fn reductions() {
        let id = list(0, &[(1, 0.5), (2, 0.3), (3, 0.2)], true);
        let gr = list(0, &[(3, -0.1), (4, -0.5), (1, -2.0)], false);
        let on = |r: &FusionResult, l: &PredictionList| -> Vec<u32> {
            let keep: Vec<u32> = l.items().collect();
            r.fused.items().filter(|i| keep.contains(i)).collect()
        };
        for norm in [Normalization::Minmax, Normalization::RankReciprocal] {
            let r = fuse_with_alpha(&id, &gr, 1.0, norm, None);
            assert_eq!(on(&r, &gr), vec![3, 4, 1]);
            let r = fuse_with_alpha(&id, &gr, 0.0, norm, None);
            assert_eq!(on(&r, &id), vec![1, 2, 3]);
            let r = fuse(&id, &gr, &EnsembleConfig::fixed(1.0).with_normalization(norm)).unwrap();
            assert_eq!(r.alpha, 0.0);
            assert_eq!(on(&r, &id), vec![1, 2, 3]);
            let r = fuse(&id, &gr, &EnsembleConfig::fixed(0.0).with_normalization(norm)).unwrap();
            assert_eq!(on(&r, &gr), vec![3, 4, 1]);
        }
    }

    #[test]
    fn disjoint_lists_interleave() {
        // minmax: id 1 -> 1, 2 -> .5, 3 -> 0 ; gr 4 -> 1, 5 -> .25, 6 -> 0
        let id = list(0, &[(1, 0.5), (2, 0.3), (3, 0.1)], true);
        let gr = list(0, &[(4, 9.0), (5, 6.0), (6, 5.0)], false);
        let r = fuse_with_alpha(&id, &gr, 0.5, Normalization::Minmax, None);
        assert_eq!(r.union_size, 6);
        let expected = [(1, 0.5), (4, 0.5), (2, 0.25), (5, 0.125), (3, 0.0), (6, 0.0)];
        for (&(i, s), (j, e)) in r.fused.ranked().iter().zip(expected) {
            assert_eq!(i, j);
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_uses_msp() {
        let id = list(0, &[(1, 0.4), (2, 0.3)], true);
        let gr = list(0, &[(2, 1.0), (1, 0.5)], false);
        let r = fuse(&id, &gr, &EnsembleConfig::adaptive(5.0, 0.2)).unwrap();
        assert_eq!(r.s_conf, Some(0.4));
        assert!((r.alpha - 0.26894).abs() < 1e-5);
        // ID weight dominates: item 1 gets .73, item 2 gets .27
        assert_eq!(r.fused.items().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn fuse_errors() {
        let a = list(0, &[(1, 0.4)], true);
        let b = list(1, &[(1, 0.4)], false);
        assert!(matches!(fuse(&a, &b, &EnsembleConfig::default()), Err(Error::UserMismatch(0, 1))));
        let nonprob = list(0, &[(1, 2.0)], false);
        assert!(matches!(
            fuse(&nonprob, &a, &EnsembleConfig::default()),
            Err(Error::NotProbability)
        ));
        assert!(fuse(&nonprob, &a, &EnsembleConfig::fixed(0.3)).is_ok());
        assert!(EnsembleConfig::fixed(1.5).validate().is_err());
    }

    #[test]
    fn affine_and_monotone_invariance() {
        let id = list(0, &[(1, 0.5), (2, 0.3), (3, 0.2)], true);
        let gr = list(0, &[(3, 4.0), (5, 2.0), (1, 1.0)], false);
        let gr_affine = list(0, &[(3, 4.0 * 3.0 + 7.0), (5, 2.0 * 3.0 + 7.0), (1, 3.0 + 7.0)], false);
        let gr_mono = list(0, &[(3, 4f64.exp()), (5, 2f64.exp()), (1, 1f64.exp())], false);
        let cfg = EnsembleConfig::fixed(0.4);
        let base = fuse(&id, &gr, &cfg).unwrap().fused;
        let items = |l: &PredictionList| l.items().collect::<Vec<_>>();
        assert_eq!(items(&base), items(&fuse(&id, &gr_affine, &cfg).unwrap().fused));
        let rrf = cfg.with_normalization(Normalization::RankReciprocal);
        assert_eq!(
            fuse(&id, &gr, &rrf).unwrap().fused,
            fuse(&id, &gr_mono, &rrf).unwrap().fused
        );
    }

    #[test]
    fn default_grid_sizes() {
        let g = Grids::default();
        assert_eq!(g.adaptive_configs(Normalization::Minmax).len(), 24);
        assert_eq!(g.fixed_configs(Normalization::Minmax).len(), 11);
        assert_eq!(g.tau[3], 0.3);
    }

    #[test]
    fn identical_models_tie_to_first() {
        let id: Vec<PredictionList> = (0..4).map(|u| list(u, &[(1, 0.6), (2, 0.3)], true)).collect();
        let targets = [1, 2, 1, 2];
        let t = tune(&targets, &id, &id, &Grids::default(), Normalization::Minmax, 10).unwrap();
        assert_eq!(t.evaluated(), (24, 11));
        assert_eq!((t.best_adaptive.config.q, t.best_adaptive.config.tau), (1.0, 0.0));
        assert_eq!(t.best_fixed.config.alpha_static, 0.0);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["adaptive"].as_array().unwrap().len(), 24);
    }

    #[test]
    fn tune_prefers_gr_corner() {
        // GR always ranks the target first, ID always second
        let mut id = Vec::new();
        let mut gr = Vec::new();
        for u in 0..5 {
            id.push(list(u, &[(10, 0.3), (11, 0.2)], true));
            gr.push(list(u, &[(11, 0.9), (10, 0.1)], false));
        }
        let targets = vec![11; 5];
        let t = tune(&targets, &id, &gr, &Grids::default(), Normalization::Minmax, 10).unwrap();
        // fixed: every alpha_static < 1/2 wins, the smallest is reported
        assert_eq!(t.best_fixed.config.alpha_static, 0.0);
        assert_eq!(t.best_fixed.ndcg, 1.0);
        // adaptive: GR wins once tau > msp = 0.3; at tau = 0.3 alpha is 1/2
        // and the tie goes to the smaller item
        let b = t.best_adaptive.config;
        assert_eq!(t.best_adaptive.ndcg, 1.0);
        assert_eq!((b.q, b.tau), (1.0, 0.4));
        assert!(alpha_weight(0.3, b.q, b.tau) > 0.5);
        assert!(tune(&[], &[], &[], &Grids::default(), Normalization::Minmax, 10).is_err());
    }

    #[test]
    fn single_bin_matches_global_mean() {
        let id: Vec<PredictionList> = (0..3).map(|u| list(u, &[(1, 0.6), (2, 0.3)], true)).collect();
        let targets = [1, 2, 3];
        let recs = vec![CategoryRecord::memorized(), CategoryRecord::uncategorized(), CategoryRecord::uncategorized()];
        let b = indicator_report(&targets, &id, &id, ("id", "gr"), &recs, 1, 10).unwrap();
        let global = (1.0 + 1.0 / 3f64.log2()) / 3.0;
        assert_eq!(b.rows.len(), 1);
        assert!((b.rows[0].means[0].unwrap() - global).abs() < 1e-12);
        assert_eq!(b.rows[0].means[0], b.rows[0].means[1]);
    }
}
