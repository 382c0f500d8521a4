use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use proofgrade::attemptlog::read_log;
use proofgrade::studystats::{
    attitude_table, best_score_table, initial_best, perception_table, reliability_table, score_gain_regression,
    screen_effort, validate_attempts, write_attitude_csv, write_best_score_csv, write_perception_csv,
    write_posthoc_csv, write_regression_csv, write_reliability_csv, TTestKind,
};
use proofgrade::studystats::{read_survey, DEFAULT_REVERSE_CODED};

use crate::config::Config;
use crate::manifest::RunManifest;

pub struct StatsArgs<'a> {
    pub log: &'a Path,
    pub roster: Option<&'a Path>,
    pub survey: Option<&'a Path>,
    pub min_chars: usize,
    pub t_test: TTestKind,
}

fn read_roster(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read roster {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn writer(dir: &Path, name: &str, m: &mut RunManifest) -> anyhow::Result<(BufWriter<File>, PathBuf)> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    m.output(&path);
    Ok((BufWriter::new(f), path))
}

pub fn stats(cfg: &Config, args: StatsArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::new("stats", cfg);
    let out = cfg.paths.out.join("stats");
    std::fs::create_dir_all(&out)?;

    m.step("screen");
    let attempts = read_log(args.log)?;
    m.input(args.log)?;
    validate_attempts(&attempts)?;
    let roster = match args.roster {
        Some(p) => {
            m.input(p)?;
            read_roster(p)?
        }
        None => Vec::new(),
    };
    let effort = screen_effort(&roster, &attempts, args.min_chars);
    let included: BTreeSet<&str> = effort.included.iter().map(String::as_str).collect();
    let kept: Vec<_> = attempts
        .into_iter()
        .filter(|a| included.contains(a.student_id.as_str()))
        .collect();
    let (w, _) = writer(&out, "effort.json", &mut m)?;
    serde_json::to_writer_pretty(w, &effort)?;
    println!(
        "{} students included, {} excluded for no real attempt",
        effort.included.len(),
        effort.excluded.len()
    );

    m.step("scores");
    let ib = initial_best(&kept);
    let table = best_score_table(&ib)?;
    write_best_score_csv(writer(&out, "best_scores.csv", &mut m)?.0, &table)?;
    write_posthoc_csv(writer(&out, "posthoc.csv", &mut m)?.0, &table)?;
    for row in &table {
        let k = &row.kruskal;
        println!("{}: Kruskal-Wallis H = {:.3}, p = {:.4}", row.problem_id, k.h, k.p);
    }
    let fit = score_gain_regression(&ib)?;
    write_regression_csv(writer(&out, "score_gain_regression.csv", &mut m)?.0, &fit)?;
    for c in fit.coefficients.iter().filter(|c| c.name.starts_with("beta")) {
        println!("{} = {:.3} (p = {:.4})", c.name, c.value, c.p);
    }

    if let Some(path) = args.survey {
        m.step("survey");
        m.input(path)?;
        let f = File::open(path).with_context(|| format!("cannot read survey {}", path.display()))?;
        let responses: Vec<_> = read_survey(f)?
            .into_iter()
            .filter(|r| included.contains(r.student_id.as_str()))
            .collect();
        let perception = perception_table(&responses, &DEFAULT_REVERSE_CODED, args.t_test)?;
        write_perception_csv(writer(&out, "perception.csv", &mut m)?.0, &perception)?;
        let attitudes = attitude_table(&responses, &DEFAULT_REVERSE_CODED)?;
        write_attitude_csv(writer(&out, "attitudes.csv", &mut m)?.0, &attitudes)?;
        let reliability = reliability_table(&responses, &DEFAULT_REVERSE_CODED);
        write_reliability_csv(writer(&out, "reliability.csv", &mut m)?.0, &reliability)?;
    }
    println!("wrote tables to {}", out.display());
    m.finish(None)?;
    Ok(())
}
