//! Rank tests, t-tests and one-way ANOVA.

use serde::{Deserialize, Serialize};

use super::dist::{chi2_sf, f_sf, normal_two_sided, t_two_sided};
use super::StatsError;

/// Average ranks (1-based) with ties sharing the mean rank, plus the tie
/// correction sum `Σ(t³ − t)`.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
    pub df: usize,
    /// Every observation was identical, so H is undefined; reported as
    /// `H = 0, p = 1`.
    pub degenerate: bool,
}

pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<KruskalWallis, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::Degenerate(
            "Kruskal-Wallis needs at least two groups".into(),
        ));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(StatsError::Degenerate(
            "every Kruskal-Wallis group needs a value".into(),
        ));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    if pooled.len() < 3 {
        return Err(StatsError::Degenerate(
            "Kruskal-Wallis needs at least three values".into(),
        ));
    }
    let df = groups.len() - 1;
    let (ranks, ties) = average_ranks(&pooled);
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis {
            h: 0.0,
            p: 1.0,
            df,
            degenerate: true,
        });
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    Ok(KruskalWallis {
        h,
        p: chi2_sf(h, df as f64),
        df,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p from the tie-corrected normal approximation.
    pub p: f64,
}

pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Degenerate(
            "Mann-Whitney needs two non-empty samples".into(),
        ));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = average_ranks(&pooled);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        normal_two_sided((u - mean) / var.sqrt())
    };
    Ok(MannWhitney { u, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: String,
    pub b: String,
    pub u: f64,
    pub p: f64,
    /// `min(1, p · comparisons)`.
    pub p_adjusted: f64,
}

/// Mann-Whitney U on every pair of groups with Bonferroni adjustment.
pub fn posthoc_mann_whitney(groups: &[(&str, &[f64])]) -> Result<Vec<PairwiseComparison>, StatsError> {
    let m = groups.len() * groups.len().saturating_sub(1) / 2;
    let mut out = Vec::with_capacity(m);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let r = mann_whitney(groups[i].1, groups[j].1)?;
            out.push(PairwiseComparison {
                a: groups[i].0.to_string(),
                b: groups[j].0.to_string(),
                u: r.u,
                p: r.p,
                p_adjusted: (r.p * m as f64).min(1.0),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t-test.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::Degenerate(
            "Welch's t-test needs two values per sample".into(),
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(TTest {
                t: 0.0,
                df: (a.len() + b.len() - 2) as f64,
                p: 1.0,
            });
        }
        return Err(StatsError::Degenerate("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(TTest {
        t,
        df,
        p: t_two_sided(t, df),
    })
}

/// Paired t-test on matched observations.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Degenerate(format!(
            "{} vs {} paired values",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(StatsError::Degenerate("a paired t-test needs two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, v) = mean_var(&d);
    let df = (d.len() - 1) as f64;
    if v == 0.0 {
        if m == 0.0 {
            return Ok(TTest { t: 0.0, df, p: 1.0 });
        }
        return Err(StatsError::Degenerate("paired differences are constant".into()));
    }
    let t = m / (v / d.len() as f64).sqrt();
    Ok(TTest {
        t,
        df,
        p: t_two_sided(t, df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

pub fn anova_oneway(groups: &[&[f64]]) -> Result<Anova, StatsError> {
    if groups.len() < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(StatsError::Degenerate(
            "ANOVA needs two groups of at least two values".into(),
        ));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(StatsError::Degenerate("no within-group variance".into()));
    }
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    Ok(Anova {
        f,
        df_between,
        df_within,
        p: f_sf(f, df_between as f64, df_within as f64),
    })
}
