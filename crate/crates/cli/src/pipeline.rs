use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use proofgrade::corpus::{filter_nonempty, load_corpus, split_dataset, write_corpus, CorpusError, DEFAULT_FRACTIONS};
use proofgrade::embeddings::EmbeddingCache;
use proofgrade::evalharness::{
    evaluate_problem, format_summary, size_sweep, write_metrics_csv, write_sweep_csv, SweepConfig,
};
use proofgrade::feedback::score_percent;
use proofgrade::grader::{self, embed_records, grade_proof, train_problem_grader, SelectionSplit};
use proofgrade::synthetic::{synthetic_corpus, SyntheticSpec};
use proofgrade::{DatasetSplit, Embedder, ProofRecord, SplitPart};
use serde::Serialize;

use crate::config::{Config, ConfigError};
use crate::manifest::RunManifest;

fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

/// Builds the embedder for `provider_id`, warm from its on-disk cache.
pub fn open_embedder(cfg: &Config, provider_id: &str) -> anyhow::Result<Embedder> {
    let pc = cfg.provider(provider_id)?;
    let cache = EmbeddingCache::new();
    let path = cfg.cache_path(provider_id);
    if path.exists() {
        let n = cache
            .import(&path)
            .with_context(|| format!("cannot load cache {}", path.display()))?;
        tracing::debug!(entries = n, path = %path.display(), "cache loaded");
    }
    Ok(Embedder::new(pc.build()?, cache.into()))
}

pub fn save_cache(cfg: &Config, embedder: &Embedder) -> anyhow::Result<PathBuf> {
    let path = cfg.cache_path(embedder.provider_id());
    create_parent(&path)?;
    embedder.cache().export(&path, embedder.provider_id())?;
    Ok(path)
}

pub fn load_records(corpus: &Path, manifest: &mut RunManifest) -> anyhow::Result<Vec<ProofRecord>> {
    let records = load_corpus(corpus).with_context(|| format!("cannot load corpus {}", corpus.display()))?;
    manifest.input(corpus)?;
    let n = records.len();
    let kept = filter_nonempty(records);
    if kept.len() < n {
        tracing::info!(dropped = n - kept.len(), "skipped empty proofs");
    }
    Ok(kept)
}

fn of_problem(records: &[ProofRecord], problem_id: &str) -> anyhow::Result<Vec<ProofRecord>> {
    let out: Vec<ProofRecord> = records.iter().filter(|r| r.problem_id == problem_id).cloned().collect();
    if out.is_empty() {
        return Err(anyhow::Error::new(CorpusError::EmptySplit).context(format!("no proofs for problem {problem_id}")));
    }
    Ok(out)
}

/// The stored split when one exists, else a fresh one from `split_seed`.
fn problem_split(
    cfg: &Config,
    records: &[ProofRecord],
    problem_id: &str,
    split_seed: u64,
    manifest: &mut RunManifest,
) -> anyhow::Result<DatasetSplit> {
    let path = cfg.split_path(problem_id);
    if path.exists() {
        manifest.input(&path)?;
        return Ok(DatasetSplit::load(&path)?);
    }
    Ok(split_dataset(records, split_seed, DEFAULT_FRACTIONS)?)
}

pub fn ingest(cfg: &Config, corpus: &Path, seed: u64) -> anyhow::Result<()> {
    let mut m = RunManifest::new("ingest", cfg);
    m.seed = Some(seed);
    m.step("load");
    let records = load_records(corpus, &mut m)?;
    let mut by_problem: BTreeMap<&str, Vec<ProofRecord>> = BTreeMap::new();
    for r in &records {
        by_problem.entry(&r.problem_id).or_default().push(r.clone());
    }
    m.step("split");
    std::fs::create_dir_all(&cfg.paths.splits)?;
    for (pid, rs) in &by_problem {
        let split = split_dataset(rs, seed, DEFAULT_FRACTIONS)?;
        let path = cfg.split_path(pid);
        std::fs::write(&path, serde_json::to_string_pretty(&split)? + "\n")?;
        println!(
            "{pid}: {} proofs -> train {}, test {}, validation {}",
            rs.len(),
            split.train_ids.len(),
            split.test_ids.len(),
            split.validation_ids.len()
        );
        m.output(&path);
    }
    m.finish(None)?;
    Ok(())
}

pub struct EmbedArgs<'a> {
    pub provider: &'a str,
    pub corpus: Option<&'a Path>,
    pub import: Option<&'a Path>,
    pub export: Option<&'a Path>,
}

pub fn embed(cfg: &Config, args: EmbedArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::new("embed", cfg);
    let e = open_embedder(cfg, args.provider)?;
    if let Some(path) = args.import {
        m.step("import");
        m.input(path)?;
        let n = e
            .cache()
            .import(path)
            .with_context(|| format!("cannot import {}", path.display()))?;
        println!("imported {n} vectors from {}", path.display());
    }
    // With --import the corpus is only embedded when asked for explicitly.
    let corpus = match (args.corpus, args.import) {
        (Some(c), _) => Some(c.to_path_buf()),
        (None, None) => Some(cfg.paths.corpus.clone()),
        (None, Some(_)) => None,
    };
    if let Some(corpus) = corpus {
        m.step("embed");
        let records = load_records(&corpus, &mut m)?;
        let texts: Vec<&str> = records.iter().map(|r| r.body_markdown.as_str()).collect();
        let before = e.cache().len(e.provider_id());
        e.embed_batch(&texts)?;
        println!(
            "{} proofs embedded with {} ({} new, {} provider calls)",
            texts.len(),
            e.provider_id(),
            e.cache().len(e.provider_id()) - before,
            e.provider_calls()
        );
    }
    m.step("save");
    m.output(&save_cache(cfg, &e)?);
    if let Some(path) = args.export {
        create_parent(path)?;
        let n = e.cache().export(path, e.provider_id())?;
        println!("exported {n} vectors to {}", path.display());
        m.output(path);
    }
    m.finish(Some(args.provider))?;
    Ok(())
}

pub struct TrainArgs<'a> {
    pub problem: &'a str,
    pub provider: &'a str,
    pub corpus: &'a Path,
    pub split_seed: u64,
    pub model: Option<&'a Path>,
}

pub fn train(cfg: &Config, args: TrainArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::new("train", cfg);
    m.seed = Some(cfg.training.seed);
    m.step("load");
    let e = open_embedder(cfg, args.provider)?;
    let all = load_records(args.corpus, &mut m)?;
    let records = of_problem(&all, args.problem)?;
    let split = problem_split(cfg, &records, args.problem, args.split_seed, &mut m)?;
    let selection_part = match cfg.training.selection_split {
        SelectionSplit::Validation => SplitPart::Validation,
        SelectionSplit::Test => SplitPart::Test,
    };

    m.step("embed");
    let train_set = embed_records(&split.select(&records, SplitPart::Train), &e)?;
    let select_set = embed_records(&split.select(&records, selection_part), &e)?;
    save_cache(cfg, &e)?;

    m.step("train");
    let (g, report) = train_problem_grader(args.problem, e.provider_id(), &train_set, &select_set, &cfg.training)?;

    m.step("save");
    let path = args
        .model
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.model_path(args.problem));
    create_parent(&path)?;
    grader::save(&g, &path)?;
    let report_path = path.with_extension("selection.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    m.output(&path);
    m.output(&report_path);
    for r in &report.rubrics {
        let acc = r
            .candidates
            .iter()
            .find(|(e, _)| *e == r.selected_epochs)
            .map_or(f64::NAN, |c| c.1);
        println!(
            "{} {}: {} epochs, {} accuracy {acc:.4}",
            args.problem,
            r.rubric_id,
            r.selected_epochs,
            match cfg.training.selection_split {
                SelectionSplit::Validation => "validation",
                SelectionSplit::Test => "test",
            }
        );
    }
    println!("wrote {}", path.display());
    m.finish(Some(args.problem))?;
    Ok(())
}

pub struct EvalArgs<'a> {
    pub problems: &'a [String],
    pub model: Option<&'a Path>,
    pub corpus: &'a Path,
    pub split_seed: u64,
    pub provider: Option<&'a str>,
}

pub fn eval(cfg: &Config, args: EvalArgs) -> anyhow::Result<()> {
    if args.model.is_some() && args.problems.len() != 1 {
        return Err(ConfigError("--model needs exactly one --problem".into()).into());
    }
    let mut m = RunManifest::new("eval", cfg);
    let all = load_records(args.corpus, &mut m)?;
    let mut reports = Vec::new();
    let mut embedders: BTreeMap<String, Embedder> = BTreeMap::new();
    for pid in args.problems {
        m.step("load");
        let path = args.model.map(Path::to_path_buf).unwrap_or_else(|| cfg.model_path(pid));
        let g = grader::load(&path).with_context(|| format!("cannot load model {}", path.display()))?;
        m.input(&path)?;
        if g.problem_id() != pid {
            bail!(ConfigError(format!(
                "{} holds a model for {}, not {pid}",
                path.display(),
                g.problem_id()
            )));
        }
        if let Some(p) = args.provider.filter(|p| *p != g.provider_id()) {
            bail!(ConfigError(format!(
                "{} was trained with provider {}, not {p}",
                path.display(),
                g.provider_id()
            )));
        }
        let records = of_problem(&all, pid)?;
        let split = problem_split(cfg, &records, pid, args.split_seed, &mut m)?;
        m.step("embed");
        if !embedders.contains_key(g.provider_id()) {
            embedders.insert(g.provider_id().to_string(), open_embedder(cfg, g.provider_id())?);
        }
        let e = &embedders[g.provider_id()];
        let test = embed_records(&split.select(&records, SplitPart::Test), e)?;
        m.step("evaluate");
        reports.push(evaluate_problem(&g, &test)?);
    }
    for e in embedders.values() {
        save_cache(cfg, e)?;
    }
    std::fs::create_dir_all(&cfg.paths.out)?;
    let label = args.problems.join("_");
    let csv_path = cfg.paths.out.join(format!("metrics_{label}.csv"));
    write_metrics_csv(BufWriter::new(File::create(&csv_path)?), &reports)?;
    m.output(&csv_path);
    print!("{}", format_summary(&reports));
    println!("wrote {}", csv_path.display());
    m.finish(Some(&label))?;
    Ok(())
}

pub struct SweepArgs<'a> {
    pub problem: &'a str,
    pub provider: &'a str,
    pub corpus: &'a Path,
    pub sweep: SweepConfig,
}

pub fn sweep(cfg: &Config, args: SweepArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::new("sweep", cfg);
    m.seed = Some(args.sweep.seed);
    m.step("load");
    let e = open_embedder(cfg, args.provider)?;
    let all = load_records(args.corpus, &mut m)?;
    let records = of_problem(&all, args.problem)?;
    m.step("embed");
    let refs: Vec<&ProofRecord> = records.iter().collect();
    let data = embed_records(&refs, &e)?;
    save_cache(cfg, &e)?;
    m.step("sweep");
    let points = size_sweep(args.problem, e.provider_id(), &data, &cfg.training, &args.sweep)?;
    std::fs::create_dir_all(&cfg.paths.out)?;
    let label = format!("{}_{}", args.problem, args.provider);
    let path = cfg.paths.out.join(format!("sweep_{label}.csv"));
    write_sweep_csv(BufWriter::new(File::create(&path)?), &points)?;
    m.output(&path);
    for p in &points {
        println!(
            "{} n={:<5} mean accuracy {:.4}",
            p.problem_id, p.train_size, p.mean_accuracy
        );
    }
    println!("wrote {}", path.display());
    m.finish(Some(&label))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct GradeReport {
    pub problem_id: String,
    pub provider_id: String,
    pub rubric: proofgrade::RubricVector,
    pub score_percent: f64,
    pub empty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

pub fn grade(cfg: &Config, model: &Path, input: &Path, provider: Option<&str>) -> anyhow::Result<()> {
    let g = grader::load(model).with_context(|| format!("cannot load model {}", model.display()))?;
    let body = std::fs::read_to_string(input).with_context(|| format!("cannot read {}", input.display()))?;
    let provider = provider.unwrap_or(g.provider_id());
    let e = open_embedder(cfg, provider)?;
    let outcome = grade_proof(&g, &body, &e)?;
    let report = GradeReport {
        problem_id: g.problem_id().to_string(),
        provider_id: e.provider_id().to_string(),
        rubric: outcome.rubric,
        score_percent: score_percent(&outcome.rubric),
        empty: outcome.empty,
        note: outcome
            .empty
            .then_some("empty submission: every rubric point marked incorrect"),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub struct SynthArgs<'a> {
    pub problems: &'a [String],
    pub n: usize,
    pub dim: usize,
    pub provider_seed: u64,
    pub seed: u64,
    pub output: &'a Path,
}

pub fn synth(cfg: &Config, args: SynthArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::new("synth", cfg);
    m.seed = Some(args.seed);
    let mut records = Vec::new();
    for (i, pid) in args.problems.iter().enumerate() {
        let spec = SyntheticSpec::new(pid, args.n, args.dim, args.provider_seed, args.seed + i as u64);
        records.extend(synthetic_corpus(&spec));
    }
    create_parent(args.output)?;
    write_corpus(args.output, &records)?;
    m.output(args.output);
    println!("wrote {} synthetic proofs to {}", records.len(), args.output.display());
    m.finish(None)?;
    Ok(())
}
