use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use translens_core::attribution::{attribute_all, MatchMode, RatioSummary};
use translens_core::ensemble::{
    comparison_report, fuse_all, indicator_report, tune, EnsembleConfig, EnsembleMode, Grids, Normalization,
};
use translens_core::io::{self, DatasetStats, ReportFormat};
use translens_core::metrics::{binned_report, breakdown, grid_report, ndcg_at_k, ModelPredictions, PredictionList};
use translens_core::par;
use translens_core::report::{Cell, Provenance, Report};
use translens_core::synthgen::{generate, PlantSpec};
use translens_core::token_lens::{self, bucket_table, build_prefix_index, instance_stats, reduction_report};
use translens_core::{
    build_index, make_instances, AttributionConfig, CategoryRecord, Dataset, Error, IdDict, Instance, Result,
    Split, SplitSpec, TransitionIndex,
};

use crate::config::{FileConfig, DEFAULT_BINS, DEFAULT_K, DEFAULT_KCORE};
use crate::{
    AttrArgs, AttributeArgs, BinKey, BinsArgs, Cli, Command, EnsembleCommand, EnsembleRunArgs, EnsembleTuneArgs,
    EvaluateArgs, FusionArgs, IndexArgs, IngestArgs, InstanceFilter, OutArgs, SplitPart, SynthArgs, TokenmemArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads).unwrap_or(0);
    let mut ctx = Ctx {
        file,
        prov: Provenance::new(),
    };
    if let Some(p) = &cli.config {
        ctx.input(p)?;
    }
    let command = cli.command;
    if threads > 0 {
        par::with_threads(threads, move || dispatch(&mut ctx, command))
    } else {
        dispatch(&mut ctx, command)
    }
}

fn dispatch(ctx: &mut Ctx, command: Command) -> Result<()> {
    match command {
        Command::Index(a) => index(ctx, a),
        Command::Attribute(a) => attribute(ctx, a),
        Command::Tokenmem(a) => tokenmem(ctx, a),
        Command::Evaluate(a) => evaluate(ctx, a),
        Command::Bins(a) => bins(ctx, a),
        Command::Ensemble(EnsembleCommand::Run(a)) => ensemble_run(ctx, a),
        Command::Ensemble(EnsembleCommand::Tune(a)) => ensemble_tune(ctx, a),
        Command::Synth(a) => synth(ctx, a),
    }
}

/// Resolved settings plus the provenance block every report carries.
struct Ctx {
    file: FileConfig,
    prov: Provenance,
}

impl Ctx {
    fn input(&mut self, path: &Path) -> Result<()> {
        let hash = io::file_sha256(path)?;
        self.prov.inputs.push((path.display().to_string(), hash));
        Ok(())
    }

    fn set(&mut self, key: &str, value: impl Display) {
        self.prov.config.insert(key.to_owned(), value.to_string());
    }

    fn pick<T: Display + Copy>(&mut self, key: &str, flag: Option<T>, file: Option<T>, default: T) -> T {
        let v = flag.or(file).unwrap_or(default);
        self.set(key, v);
        v
    }

    fn attribution(&mut self, a: &AttrArgs) -> Result<AttributionConfig> {
        let max_hop = self.pick("max_hop", a.max_hop, self.file.max_hop, AttributionConfig::default().max_hop);
        let mode = match a.match_mode.clone().or_else(|| self.file.train_match_mode.clone()) {
            Some(s) => MatchMode::from_str(&s)?,
            None => MatchMode::default(),
        };
        self.set("train_match_mode", mode.as_str());
        let cfg = AttributionConfig {
            max_hop,
            train_match_mode: mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn k(&mut self, flag: Option<usize>) -> Result<usize> {
        let k = self.pick("k", flag, self.file.k, DEFAULT_K);
        if k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(k)
    }

    fn bins(&mut self, flag: Option<usize>) -> usize {
        self.pick("bins", flag, self.file.bins, DEFAULT_BINS)
    }

    fn normalization(&mut self, flag: Option<&String>) -> Result<Normalization> {
        let n = match flag.cloned().or_else(|| self.file.normalization.clone()) {
            Some(s) => Normalization::from_str(&s)?,
            None => Normalization::default(),
        };
        self.set("normalization", n.as_str());
        Ok(n)
    }

    fn fusion(&mut self, f: &FusionArgs) -> Result<EnsembleConfig> {
        let d = EnsembleConfig::default();
        let mode = match f.mode.clone().or_else(|| self.file.mode.clone()) {
            Some(s) => EnsembleMode::from_str(&s)?,
            None => d.mode,
        };
        self.set("mode", mode.as_str());
        let cfg = EnsembleConfig {
            q: self.pick("q", f.q, self.file.q, d.q),
            tau: self.pick("tau", f.tau, self.file.tau, d.tau),
            alpha_static: self.pick("alpha_static", f.alpha_static, self.file.alpha_static, d.alpha_static),
            mode,
            normalization: self.normalization(f.normalization.as_ref())?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn load_split(&mut self, ingest: &IngestArgs) -> Result<(Dataset, Split)> {
        self.input(&ingest.interactions)?;
        let kcore = self.pick("kcore", ingest.kcore, self.file.kcore, DEFAULT_KCORE);
        let ds = io::read_interactions(&ingest.interactions, Some(kcore))?;
        let spec = match &ingest.eval_users {
            Some(p) => {
                self.input(p)?;
                SplitSpec {
                    eval_users: Some(io::read_eval_users(p, &ds.users)?),
                }
            }
            None => SplitSpec::leave_last_out(),
        };
        let split = make_instances(&ds, &spec)?;
        Ok((ds, split))
    }

    fn format(&self, out: &OutArgs) -> Result<ReportFormat> {
        match out.format.as_ref().or(self.file.format.as_ref()) {
            Some(s) => ReportFormat::from_str(s),
            None => Ok(ReportFormat::Tsv),
        }
    }

    fn finish(&self, report: Report) -> Report {
        report.with_provenance(Some(self.prov.clone()))
    }

    fn emit(&self, report: Report, out: &OutArgs) -> Result<()> {
        let format = self.format(out)?;
        let report = self.finish(report);
        match &out.out {
            Some(p) => io::write_report(&report, p, format),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(io::render_report(&report, format).as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}

fn part(split: &Split, which: SplitPart) -> &[Instance] {
    match which {
        SplitPart::Test => &split.test,
        SplitPart::Validation => &split.validation,
    }
}

fn part_name(which: SplitPart) -> &'static str {
    match which {
        SplitPart::Test => "test",
        SplitPart::Validation => "validation",
    }
}

fn index(ctx: &mut Ctx, a: IndexArgs) -> Result<()> {
    let (ds, split) = ctx.load_split(&a.ingest)?;
    let cfg = ctx.attribution(&a.attr)?;
    let idx = build_index(&split.train, cfg.max_hop)?;
    io::save_index(&idx, &a.index)?;
    ctx.emit(DatasetStats::of(&ds).to_report(), &a.out)
}

fn load_or_build_index(ctx: &mut Ctx, path: Option<&PathBuf>, split: &Split, max_hop: usize) -> Result<TransitionIndex> {
    match path {
        Some(p) if p.exists() => {
            ctx.input(p)?;
            let idx = io::load_index(p)?;
            if idx.num_items() != split.train.num_items() {
                return Err(Error::IndexFormat(format!(
                    "{}: cached index covers {} items, corpus has {}",
                    p.display(),
                    idx.num_items(),
                    split.train.num_items()
                )));
            }
            Ok(idx)
        }
        Some(p) => {
            let idx = build_index(&split.train, max_hop)?;
            io::save_index(&idx, p)?;
            Ok(idx)
        }
        None => build_index(&split.train, max_hop),
    }
}

fn attribute(ctx: &mut Ctx, a: AttributeArgs) -> Result<()> {
    let (ds, split) = ctx.load_split(&a.ingest)?;
    let cfg = ctx.attribution(&a.attr)?;
    ctx.set("split", part_name(a.split));
    let idx = load_or_build_index(ctx, a.index.as_ref(), &split, cfg.max_hop)?;
    let instances = part(&split, a.split);
    let result = attribute_all(&idx, instances, &cfg)?;
    if let Some(p) = &a.labels {
        io::write_labels(&io::label_rows(&result.records, instances, &ds.users, &ds.items), p)?;
    }
    ctx.emit(result.summary.to_report(), &a.out)
}

fn tokenmem(ctx: &mut Ctx, a: TokenmemArgs) -> Result<()> {
    let (ds, split) = ctx.load_split(&a.ingest)?;
    let cfg = ctx.attribution(&a.attr)?;
    ctx.input(&a.sid)?;
    let map = io::read_sid_map(&a.sid, &ds.items)?;
    let max_n = ctx.pick("max_n", a.max_n, ctx.file.max_n, map.len());
    if max_n < 1 || max_n > map.len() {
        return Err(Error::Config(format!("max_n must be in 1..={}", map.len())));
    }
    let pidx = build_prefix_index(&split.train, &map, max_n, cfg.max_hop)?;
    let idx = build_index(&split.train, cfg.max_hop)?;
    let records = attribute_all(&idx, &split.test, &cfg)?.records;
    let stats = instance_stats(&idx, &pidx, &split.test, cfg.max_hop);
    let max_ns: Vec<usize> = stats.iter().map(|s| s.max_n).collect();
    let buckets = bucket_table(&max_ns, max_n).to_report();
    match &a.out_dir {
        None => ctx.emit(buckets, &a.out),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| Error::File {
                path: dir.clone(),
                source,
            })?;
            let format = ctx.format(&a.out)?;
            let ext = match format {
                ReportFormat::Tsv => "tsv",
                ReportFormat::Json => "json",
            };
            let reports = [
                buckets,
                reduction_report(&records, &max_ns, max_n)?,
                token_lens::instance_stats_report(&stats, &split.test, &ds.users, &ds.items, max_n),
            ];
            for r in reports {
                let path = dir.join(format!("{}.{ext}", r.name));
                io::write_report(&ctx.finish(r), &path, format)?;
            }
            Ok(())
        }
    }
}

fn parse_pred_arg(s: &str) -> Result<(String, PathBuf)> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(Error::Config(format!("--pred expects NAME=PATH, got {s:?}"))),
    }
}

/// Reads each `NAME=PATH` and aligns its lists with `users`.
fn load_models(
    ctx: &mut Ctx,
    specs: &[String],
    users: &[u32],
    user_names: &IdDict,
    items: &mut IdDict,
    probability: impl Fn(usize) -> bool,
) -> Result<Vec<(String, Vec<PredictionList>)>> {
    let mut out = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let (name, path) = parse_pred_arg(s)?;
        ctx.input(&path)?;
        let lists = io::read_predictions(&path, user_names, items, probability(i))?;
        out.push((name, io::align_predictions(lists, users, user_names)?));
    }
    Ok(out)
}

fn evaluate(ctx: &mut Ctx, a: EvaluateArgs) -> Result<()> {
    ctx.input(&a.labels)?;
    let rows = io::read_labels(&a.labels)?;
    let mut users = IdDict::new();
    let mut items = IdDict::new();
    let mut targets = Vec::with_capacity(rows.len());
    let mut records = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if users.intern(&r.user) as usize != i {
            return Err(Error::Validation(format!("label file repeats user {:?}", r.user)));
        }
        targets.push(items.intern(&r.target));
        records.push(r.record.clone());
    }
    let k = ctx.k(a.k)?;
    let labelled_hop = records.iter().map(max_label_hop).max().unwrap_or(0);
    let max_hop = ctx
        .pick("max_hop", a.max_hop, ctx.file.max_hop, AttributionConfig::default().max_hop)
        .max(labelled_hop);
    let user_ids: Vec<u32> = (0..rows.len() as u32).collect();
    let models = load_models(ctx, &a.preds, &user_ids, &users, &mut items, |_| false)?;
    let views: Vec<ModelPredictions<'_>> = models
        .iter()
        .map(|(name, lists)| ModelPredictions { name, lists })
        .collect();
    let report = breakdown(&records, &views, &targets, k, max_hop)?.to_report();
    ctx.emit(report, &a.out)
}

fn max_label_hop(r: &CategoryRecord) -> usize {
    [r.substitutability_hop, r.symmetry_hop, r.transitivity_hop, r.second_symmetry_hop]
        .into_iter()
        .flatten()
        .max()
        .unwrap_or(0)
}

/// Labels for `instances`, from a file when given (matched by user).
fn records_for(
    ctx: &mut Ctx,
    labels: Option<&PathBuf>,
    ds: &Dataset,
    split: &Split,
    cfg: &AttributionConfig,
) -> Result<Vec<CategoryRecord>> {
    let Some(p) = labels else {
        let idx = build_index(&split.train, cfg.max_hop)?;
        return Ok(attribute_all(&idx, &split.test, cfg)?.records);
    };
    ctx.input(p)?;
    let rows = io::read_labels(p)?;
    let by_user: std::collections::HashMap<&str, &CategoryRecord> =
        rows.iter().map(|r| (r.user.as_str(), &r.record)).collect();
    split
        .test
        .iter()
        .map(|inst| {
            let name = ds.users.name(inst.user).unwrap_or_default();
            by_user
                .get(name)
                .map(|r| (*r).clone())
                .ok_or_else(|| Error::Validation(format!("no label for user {name:?}")))
        })
        .collect()
}

fn bins(ctx: &mut Ctx, a: BinsArgs) -> Result<()> {
    let (ds, split) = ctx.load_split(&a.ingest)?;
    let cfg = ctx.attribution(&a.attr)?;
    let k = ctx.k(a.k)?;
    let bins = ctx.bins(a.bins);
    let all_records = records_for(ctx, a.labels.as_ref(), &ds, &split, &cfg)?;
    let keep = |r: &CategoryRecord| match a.only {
        InstanceFilter::All => true,
        InstanceFilter::Memorization => r.memorization,
        InstanceFilter::Generalization => r.is_generalization(),
        InstanceFilter::Uncategorized => r.uncategorized,
    };
    let only = format!("{:?}", a.only).to_lowercase();
    ctx.set("only", &only);
    let (test, records): (Vec<Instance>, Vec<CategoryRecord>) = split
        .test
        .iter()
        .zip(all_records)
        .filter(|(_, r)| keep(r))
        .map(|(i, r)| (i.clone(), r))
        .unzip();
    if test.is_empty() {
        return Err(Error::Empty("instances after --only filter"));
    }
    let users: Vec<u32> = test.iter().map(|i| i.user).collect();
    let targets: Vec<u32> = test.iter().map(|i| i.target).collect();
    let mut items = ds.items.clone();
    let key = a.key;
    let models = load_models(ctx, &a.preds, &users, &ds.users, &mut items, |i| key == BinKey::Msp && i == 0)?;
    let ndcg: Vec<(String, Vec<f64>)> = models
        .iter()
        .map(|(name, lists)| {
            let v = lists.iter().zip(&targets).map(|(l, &t)| ndcg_at_k(l, t, k)).collect();
            (name.clone(), v)
        })
        .collect();
    let label = format!("N@{k}");
    let two = || -> Result<()> {
        if models.len() != 2 {
            return Err(Error::Config(format!("--key {key:?} needs exactly two --pred models")));
        }
        Ok(())
    };
    let report = match key {
        BinKey::Support | BinKey::PhiPsi => {
            let sid = a
                .sid
                .as_ref()
                .ok_or_else(|| Error::Config("--sid is required for support and phi-psi".into()))?;
            ctx.input(sid)?;
            let map = io::read_sid_map(sid, &ds.items)?;
            let n = a.n;
            ctx.set("n", n);
            if n < 1 || n > map.len() {
                return Err(Error::Config(format!("--n must be in 1..={}", map.len())));
            }
            let pidx = build_prefix_index(&split.train, &map, n, cfg.max_hop)?;
            if key == BinKey::Support {
                let keys: Vec<f64> = test.iter().map(|i| pidx.support(i, n, cfg.max_hop) as f64).collect();
                let mem: Vec<bool> = records.iter().map(|r| r.memorization).collect();
                binned_report("support", &keys, &ndcg, Some(&mem), bins)?.to_report(&label)
            } else {
                two()?;
                let idx = build_index(&split.train, 1)?;
                let phi: Vec<f64> = test.iter().map(|i| token_lens::phi(&idx, i).value()).collect();
                let psi: Vec<f64> = test.iter().map(|i| pidx.psi(i, n).value()).collect();
                let delta = format!("delta {label} ({}-{})", ndcg[0].0, ndcg[1].0);
                grid_report(("phi", &phi), ("psi", &psi), &ndcg[0].1, &ndcg[1].1, bins)?.to_report(&delta)
            }
        }
        BinKey::Msp => {
            two()?;
            indicator_report(
                &targets,
                &models[0].1,
                &models[1].1,
                (&models[0].0, &models[1].0),
                &records,
                bins,
                k,
            )?
            .to_report(&label)
        }
    };
    ctx.emit(report, &a.out)
}

fn ensemble_run(ctx: &mut Ctx, a: EnsembleRunArgs) -> Result<()> {
    let (ds, split) = ctx.load_split(&a.ingest)?;
    let cfg = ctx.fusion(&a.fusion)?;
    let k = ctx.k(a.k)?;
    ctx.set("split", part_name(a.split));
    let instances = part(&split, a.split);
    let users: Vec<u32> = instances.iter().map(|i| i.user).collect();
    let targets: Vec<u32> = instances.iter().map(|i| i.target).collect();
    let mut items = ds.items.clone();
    let adaptive = cfg.mode == EnsembleMode::Adaptive;
    ctx.input(&a.id_pred)?;
    ctx.input(&a.gr_pred)?;
    let id = io::align_predictions(io::read_predictions(&a.id_pred, &ds.users, &mut items, adaptive)?, &users, &ds.users)?;
    let gr = io::align_predictions(io::read_predictions(&a.gr_pred, &ds.users, &mut items, false)?, &users, &ds.users)?;
    let fused = fuse_all(&id, &gr, &cfg)?;
    let lists: Vec<PredictionList> = fused.into_iter().map(|f| f.fused).collect();
    io::write_predictions(&lists, &ds.users, &items, &a.fused)?;
    let name = if adaptive { "Adaptive" } else { "Fixed-weight" };
    let report = comparison_report(&targets, &id, &gr, (&a.names.id_name, &a.names.gr_name), &[(name, cfg)], k)?;
    ctx.emit(report, &a.out)
}

fn ensemble_tune(ctx: &mut Ctx, a: EnsembleTuneArgs) -> Result<()> {
    let (ds, split) = ctx.load_split(&a.ingest)?;
    let norm = ctx.normalization(a.normalization.as_ref())?;
    let k = ctx.k(a.k)?;
    let d = Grids::default();
    let grids = Grids {
        q: a.q_grid.clone().unwrap_or(d.q),
        tau: a.tau_grid.clone().unwrap_or(d.tau),
        alpha_static: a.alpha_grid.clone().unwrap_or(d.alpha_static),
    };
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    ctx.set("q_grid", join(&grids.q));
    ctx.set("tau_grid", join(&grids.tau));
    ctx.set("alpha_grid", join(&grids.alpha_static));

    let mut items = ds.items.clone();
    let mut load = |ctx: &mut Ctx, path: &Path, prob: bool, inst: &[Instance]| -> Result<Vec<PredictionList>> {
        ctx.input(path)?;
        let users: Vec<u32> = inst.iter().map(|i| i.user).collect();
        io::align_predictions(io::read_predictions(path, &ds.users, &mut items, prob)?, &users, &ds.users)
    };
    let val_id = load(ctx, &a.val_id_pred, true, &split.validation)?;
    let val_gr = load(ctx, &a.val_gr_pred, false, &split.validation)?;
    let val_targets: Vec<u32> = split.validation.iter().map(|i| i.target).collect();
    let t = tune(&val_targets, &val_id, &val_gr, &grids, norm, k)?;
    let (na, nf) = t.evaluated();
    eprintln!("evaluated {na} adaptive and {nf} fixed configurations");
    if let Some(p) = &a.grid_out {
        std::fs::write(p, t.to_json()).map_err(|source| Error::File {
            path: p.clone(),
            source,
        })?;
    }
    let (best_f, best_a) = (t.best_fixed.config, t.best_adaptive.config);
    let report = match (&a.test_id_pred, &a.test_gr_pred) {
        (Some(ti), Some(tg)) => {
            let test_id = load(ctx, ti, true, &split.test)?;
            let test_gr = load(ctx, tg, false, &split.test)?;
            let targets: Vec<u32> = split.test.iter().map(|i| i.target).collect();
            comparison_report(
                &targets,
                &test_id,
                &test_gr,
                (&a.names.id_name, &a.names.gr_name),
                &[("Fixed-weight", best_f), ("Adaptive", best_a)],
                k,
            )?
        }
        _ => {
            let mut r = Report::new(
                "ensemble_tune",
                [
                    "mode".to_owned(),
                    "q".into(),
                    "tau".into(),
                    "alpha_static".into(),
                    format!("val N@{k}"),
                    "configs".into(),
                ],
            );
            for (p, n) in [(&t.best_adaptive, na), (&t.best_fixed, nf)] {
                let adaptive = p.config.mode == EnsembleMode::Adaptive;
                r.push(vec![
                    Cell::text(p.config.mode.as_str()),
                    if adaptive { Cell::Real(p.config.q) } else { Cell::Missing },
                    if adaptive { Cell::Real(p.config.tau) } else { Cell::Missing },
                    if adaptive { Cell::Missing } else { Cell::Real(p.config.alpha_static) },
                    Cell::Metric(p.ndcg),
                    Cell::int(n),
                ]);
            }
            r
        }
    };
    ctx.emit(report, &a.out)
}

fn synth(ctx: &mut Ctx, a: SynthArgs) -> Result<()> {
    ctx.input(&a.spec)?;
    let text = std::fs::read_to_string(&a.spec).map_err(|source| Error::File {
        path: a.spec.clone(),
        source,
    })?;
    let mut spec: PlantSpec =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.spec.display())))?;
    if let Some(seed) = a.seed.or(ctx.file.seed) {
        spec.seed = seed;
    }
    ctx.set("seed", spec.seed);
    let corpus = generate(&spec)?;
    corpus.write_to_dir(&a.out_dir)?;
    let summary = RatioSummary::from_records(&corpus.expected, spec.max_hop);
    ctx.emit(summary.to_report(), &a.out)
}
