use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rating::{map_to_qualitative, qualitative_to_numeric, Criterion, QualitativeRating, Thresholds};
use super::score::TaskScore;
use super::EvalError;
use crate::pipeline::Strategy;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const CLARITY_DEFINITION: &str = "structural clarity = fraction of plan steps matching `step N: action(args)`; \
0 when no plan was produced";

pub const CONSTRAINT_DEFINITION: &str = "constraint violations = ConstraintViolation + TypeError + \
PreconditionFailure reports per task under continue-and-skip validation";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValues<T> {
    pub constraint_violations: T,
    pub implicit_assumptions: T,
    pub structural_clarity: T,
}

impl<T: Copy> CriterionValues<T> {
    pub fn get(&self, c: Criterion) -> T {
        match c {
            Criterion::ConstraintViolations => self.constraint_violations,
            Criterion::ImplicitAssumptions => self.implicit_assumptions,
            Criterion::StructuralClarity => self.structural_clarity,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Criterion) -> T) -> Self {
        CriterionValues {
            constraint_violations: f(Criterion::ConstraintViolations),
            implicit_assumptions: f(Criterion::ImplicitAssumptions),
            structural_clarity: f(Criterion::StructuralClarity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub name: String,
    pub n_tasks: usize,
    pub means: CriterionValues<f64>,
    pub ratings: CriterionValues<QualitativeRating>,
    pub numeric: CriterionValues<u8>,
    pub goal_success_rate: f64,
    pub modeling_ok_rate: f64,
}

impl StrategySummary {
    pub fn from_means(strategy: Strategy, n_tasks: usize, means: CriterionValues<f64>, t: &Thresholds) -> Self {
        let ratings = CriterionValues::from_fn(|c| map_to_qualitative(c, means.get(c), t));
        StrategySummary {
            strategy,
            name: strategy.display_name().to_string(),
            n_tasks,
            means,
            ratings,
            numeric: CriterionValues::from_fn(|c| qualitative_to_numeric(ratings.get(c))),
            goal_success_rate: 0.0,
            modeling_ok_rate: 0.0,
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-strategy means and ratings, in report order. Every strategy must
/// cover the same set of tasks.
pub fn aggregate(scores: &[TaskScore], t: &Thresholds) -> Result<Vec<StrategySummary>, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by: BTreeMap<Strategy, Vec<&TaskScore>> = BTreeMap::new();
    for s in scores {
        by.entry(s.strategy).or_default().push(s);
    }
    let task_sets: Vec<(Strategy, BTreeSet<&str>)> =
        by.iter().map(|(k, v)| (*k, v.iter().map(|s| s.task_id.as_str()).collect())).collect();
    for (k, v) in &by {
        if v.len() != task_sets.iter().find(|(s, _)| s == k).expect("present").1.len() {
            return Err(EvalError::MismatchedTasks(format!("{k} scores a task more than once")));
        }
    }
    if let Some((first, set)) = task_sets.first() {
        for (other, other_set) in &task_sets[1..] {
            if other_set != set {
                let diff: Vec<&str> = set.symmetric_difference(other_set).copied().collect();
                return Err(EvalError::MismatchedTasks(format!("{first} vs {other}: {}", diff.join(", "))));
            }
        }
    }

    Ok(Strategy::ALL
        .iter()
        .filter_map(|st| by.get(st).map(|v| (*st, v)))
        .map(|(st, v)| {
            let means = CriterionValues {
                constraint_violations: mean(v.iter().map(|s| s.rule_breaks() as f64)),
                implicit_assumptions: mean(v.iter().map(|s| s.implicit_assumptions as f64)),
                structural_clarity: mean(v.iter().map(|s| s.clarity)),
            };
            let mut summary = StrategySummary::from_means(st, v.len(), means, t);
            summary.goal_success_rate = mean(v.iter().map(|s| s.goal_success as u8 as f64));
            summary.modeling_ok_rate = mean(v.iter().map(|s| s.modeling_ok as u8 as f64));
            summary
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Definitions {
    pub constraint_violations: String,
    pub structural_clarity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub generated_from: Vec<String>,
    pub tasks: Vec<TaskScore>,
    pub summaries: Vec<StrategySummary>,
    pub thresholds: Thresholds,
    pub definitions: Definitions,
}

/// Aligned text table with one row per strategy.
pub fn render_table(summaries: &[StrategySummary]) -> String {
    let header: Vec<String> = std::iter::once("Reasoning Strategy".to_string())
        .chain(Criterion::ALL.iter().map(|c| c.title().to_string()))
        .collect();
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            std::iter::once(s.name.clone())
                .chain(Criterion::ALL.iter().map(|&c| s.ratings.get(c).label().to_string()))
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("{}\n", padded.join(" | ").trim_end())
    };
    let mut out = line(&header);
    out.push_str(&format!("{}\n", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-")));
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

pub fn render_plot_csv(summaries: &[StrategySummary]) -> String {
    let mut out = String::from("strategy,criterion,numeric_level\n");
    for s in summaries {
        for c in Criterion::ALL {
            out.push_str(&format!("{},{},{}\n", s.name, c.key(), s.numeric.get(c)));
        }
    }
    out
}

fn sorted_scores(scores: &[TaskScore]) -> Vec<TaskScore> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| (a.strategy, &a.task_id).cmp(&(b.strategy, &b.task_id)));
    v
}

pub fn build_report(
    summaries: &[StrategySummary],
    scores: &[TaskScore],
    thresholds: &Thresholds,
    generated_from: &[String],
) -> Report {
    let mut digests = generated_from.to_vec();
    digests.sort();
    Report {
        schema_version: REPORT_SCHEMA_VERSION,
        generated_from: digests,
        tasks: sorted_scores(scores),
        summaries: summaries.to_vec(),
        thresholds: *thresholds,
        definitions: Definitions {
            constraint_violations: CONSTRAINT_DEFINITION.into(),
            structural_clarity: CLARITY_DEFINITION.into(),
        },
    }
}

/// Writes `report.json`, `table.txt` and `plot.csv` into `dest`.
pub fn emit_report(
    summaries: &[StrategySummary],
    scores: &[TaskScore],
    thresholds: &Thresholds,
    generated_from: &[String],
    dest: &Path,
) -> Result<(), EvalError> {
    fs::create_dir_all(dest).map_err(|e| EvalError::io(dest, e))?;
    let report = build_report(summaries, scores, thresholds, generated_from);
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    for (name, body) in
        [("report.json", json), ("table.txt", render_table(summaries)), ("plot.csv", render_plot_csv(summaries))]
    {
        let path = dest.join(name);
        fs::write(&path, body).map_err(|e| EvalError::io(&path, e))?;
    }
    Ok(())
}
