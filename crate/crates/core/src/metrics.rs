//! Goal-prediction metrics and corpus analyses.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use thiserror::Error;

use crate::geo::{haversine_distance, GeoPoint};
use crate::taskio::Example;

/// Half the Earth's circumference; the error charged for unparseable output.
pub const MAX_ERR_M: f64 = 20_037_508.0;
pub const AUC_FORMULA: &str = "mean(ln(1+d)/ln(1+20037508))";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{} gold examples have no prediction: {}", .0.len(), preview(.0))]
    MissingPrediction(Vec<String>),
    #[error("more than one prediction for {0}")]
    DuplicatePrediction(String),
    #[error("nothing to score")]
    Empty,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("feature {0:?} needs at least two groups of at least two values")]
    DegenerateGroups(String),
}

fn preview(ids: &[String]) -> String {
    let head: Vec<&str> = ids.iter().take(10).map(String::as_str).collect();
    let more = if ids.len() > 10 { ", ..." } else { "" };
    format!("{}{more}", head.join(", "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub acc_100m: f64,
    pub acc_250m: f64,
    pub mean_err: f64,
    pub median_err: f64,
    pub max_err: f64,
    pub auc_err: f64,
    pub parse_failures: usize,
    pub auc_formula: String,
}

/// Per-example error in meters, in gold order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleError {
    pub id: String,
    pub error_m: f64,
    pub parsed: bool,
}

pub fn accuracy_at(errors: &[f64], threshold_m: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors.iter().filter(|&&e| e <= threshold_m).count() as f64 / errors.len() as f64
}

/// Mean of `ln(1 + d) / ln(1 + MAX_ERR_M)`, errors clamped to `[0, MAX_ERR_M]`.
pub fn auc_error(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let denom = MAX_ERR_M.ln_1p();
    errors.iter().map(|e| e.clamp(0.0, MAX_ERR_M).ln_1p() / denom).sum::<f64>() / errors.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn report_from_errors(errors: &[f64], parse_failures: usize) -> Result<EvalReport, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(EvalReport {
        n: errors.len(),
        acc_100m: accuracy_at(errors, 100.0),
        acc_250m: accuracy_at(errors, 250.0),
        mean_err: errors.iter().sum::<f64>() / errors.len() as f64,
        median_err: median(errors),
        max_err: errors.iter().copied().fold(0.0, f64::max),
        auc_err: auc_error(errors),
        parse_failures,
        auc_formula: AUC_FORMULA.into(),
    })
}

/// Scores predictions against gold goals. A `None` point is a prediction
/// that could not be parsed and is charged [`MAX_ERR_M`]. Predictions for
/// ids outside `golds` are ignored.
pub fn score(
    preds: &[(String, Option<GeoPoint>)],
    golds: &[Example],
) -> Result<(EvalReport, Vec<ExampleError>), MetricsError> {
    let mut by_id: HashMap<&str, Option<GeoPoint>> = HashMap::with_capacity(preds.len());
    for (id, p) in preds {
        if by_id.insert(id.as_str(), *p).is_some() {
            return Err(MetricsError::DuplicatePrediction(id.clone()));
        }
    }
    let missing: Vec<String> = golds
        .iter()
        .filter(|g| !by_id.contains_key(g.id.as_str()))
        .map(|g| g.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingPrediction(missing));
    }
    let gold_ids: HashSet<&str> = golds.iter().map(|g| g.id.as_str()).collect();
    let extra = by_id.keys().filter(|id| !gold_ids.contains(*id)).count();
    if extra > 0 {
        log::warn!("ignoring {extra} predictions without a gold example");
    }
    let rows: Vec<ExampleError> = golds
        .iter()
        .map(|g| match by_id[g.id.as_str()] {
            Some(p) => ExampleError {
                id: g.id.clone(),
                error_m: haversine_distance(p, g.goal),
                parsed: true,
            },
            None => ExampleError {
                id: g.id.clone(),
                error_m: MAX_ERR_M,
                parsed: false,
            },
        })
        .collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error_m).collect();
    let failures = rows.iter().filter(|r| !r.parsed).count();
    Ok((report_from_errors(&errors, failures)?, rows))
}

impl EvalReport {
    pub const HEADER: [&'static str; 7] = ["system", "100m acc", "250m acc", "mean", "median", "max", "AUC"];

    fn cells(&self, name: &str) -> [String; 7] {
        [
            name.to_string(),
            format!("{:.2}", self.acc_100m * 100.0),
            format!("{:.2}", self.acc_250m * 100.0),
            format!("{:.0}", self.mean_err),
            format!("{:.0}", self.median_err),
            format!("{:.0}", self.max_err),
            format!("{:.2}", self.auc_err),
        ]
    }
}

/// Aligned plain-text table, one row per named report. Accuracies in percent,
/// distances in meters.
pub fn text_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut cells: Vec<[String; 7]> = vec![EvalReport::HEADER.map(String::from)];
    cells.extend(rows.iter().map(|(name, r)| r.cells(name)));
    let widths: Vec<usize> = (0..7).map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * 6));
            out.push('\n');
        }
    }
    out
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text_table(&[("", self)]))
    }
}

pub fn write_errors_csv<W: Write>(rows: &[ExampleError], mut w: W) -> std::io::Result<()> {
    writeln!(w, "id,error_m,parsed")?;
    for r in rows {
        let id = if r.id.contains([',', '"', '\n']) {
            format!("\"{}\"", r.id.replace('"', "\"\""))
        } else {
            r.id.clone()
        };
        writeln!(w, "{id},{:.3},{}", r.error_m, r.parsed)?;
    }
    Ok(())
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OovReport {
    pub vocab_reference: usize,
    pub vocab_target: usize,
    pub oov_types: usize,
    /// Share of the target vocabulary missing from the reference.
    pub oov_fraction: f64,
    /// Out-of-vocabulary tokens by occurrence count in the target corpus.
    pub top: Vec<(String, usize)>,
}

/// Vocabulary of `target` not seen in `reference`.
pub fn oov_analysis<A, B>(reference: &[A], target: &[B], top_n: usize) -> Result<OovReport, MetricsError>
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    let ref_vocab: HashSet<String> = reference.iter().flat_map(|t| tokenize(t.as_ref())).collect();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in target {
        for tok in tokenize(t.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    if ref_vocab.is_empty() || counts.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut oov: Vec<(String, usize)> = counts
        .iter()
        .filter(|(t, _)| !ref_vocab.contains(*t))
        .map(|(t, c)| (t.clone(), *c))
        .collect();
    oov.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let oov_types = oov.len();
    oov.truncate(top_n);
    Ok(OovReport {
        vocab_reference: ref_vocab.len(),
        vocab_target: counts.len(),
        oov_types,
        oov_fraction: oov_types as f64 / counts.len() as f64,
        top: oov,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub feature: String,
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub p_fdr: f64,
}

/// One-way ANOVA F statistic and p-value for a set of groups.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Option<(f64, usize, usize, f64)> {
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    if k < 2 || groups.iter().any(|g| g.len() < 2) {
        return None;
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let (d1, d2) = (k - 1, n - k);
    // sums of squares this small are rounding noise
    let scale = groups.iter().flatten().map(|x| x * x).sum::<f64>().max(1.0);
    let tiny = 1e-12 * scale;
    let (f, p) = if ssb <= tiny {
        (0.0, 1.0)
    } else if ssw <= tiny {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ssb / d1 as f64) / (ssw / d2 as f64);
        let dist = FisherSnedecor::new(d1 as f64, d2 as f64).expect("positive degrees of freedom");
        (f, dist.sf(f))
    };
    Some((f, d1, d2, p))
}

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

/// ANOVA per feature across labeled groups, with FDR-adjusted p-values.
pub fn anova_fdr(features: &BTreeMap<String, BTreeMap<String, Vec<f64>>>) -> Result<Vec<AnovaRow>, MetricsError> {
    let mut rows = Vec::with_capacity(features.len());
    for (name, groups) in features {
        let groups: Vec<Vec<f64>> = groups.values().cloned().collect();
        let (f, d1, d2, p) = one_way_anova(&groups).ok_or_else(|| MetricsError::DegenerateGroups(name.clone()))?;
        rows.push(AnovaRow {
            feature: name.clone(),
            f,
            df_between: d1,
            df_within: d2,
            p,
            p_fdr: 0.0,
        });
    }
    let adjusted = benjamini_hochberg(&rows.iter().map(|r| r.p).collect::<Vec<_>>());
    for (r, a) in rows.iter_mut().zip(adjusted) {
        r.p_fdr = a;
    }
    Ok(rows)
}
