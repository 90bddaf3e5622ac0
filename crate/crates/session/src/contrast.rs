//! Planned contrasts over the cohort table, read from a JSON file.
//!
//! ```json
//! {"alpha": 0.05,
//!  "contrasts": [
//!    {"name": "hr", "column": "hr_bpm_norm", "a": "DSG", "b": "DSGR", "tail": "greater"},
//!    {"name": "hr-by-neuroticism", "column": "hr_bpm_norm", "a": "DSG", "b": "DSGR",
//!     "test": "mixed_anova", "group_by": "neuroticism"}]}
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};
use slowbeat_analysis::instruments::median_split;
use slowbeat_analysis::stats::{
    bonferroni, mixed_anova_2x2, paired_t, shapiro_wilk, wilcoxon_signed_rank, Alternative, TestResult,
};

use crate::config::Condition;
use crate::error::{Error, Result};
use crate::table::CohortTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Paired t when the differences pass Shapiro-Wilk, Wilcoxon otherwise.
    #[default]
    Auto,
    PairedT,
    Wilcoxon,
    /// Condition × median-split group; reports the interaction.
    MixedAnova,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub name: String,
    pub column: String,
    pub a: Condition,
    pub b: Condition,
    #[serde(default)]
    pub test: TestKind,
    #[serde(default = "two_sided")]
    pub tail: Alternative,
    /// Column whose participant median splits the groups of a mixed ANOVA.
    #[serde(default)]
    pub group_by: Option<String>,
    /// Bonferroni family; contrasts without one form their own family.
    #[serde(default)]
    pub family: Option<String>,
}

fn two_sided() -> Alternative {
    Alternative::TwoSided
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub contrasts: Vec<Contrast>,
}

impl ContrastSpec {
    pub fn from_json(text: &str) -> Result<ContrastSpec> {
        let s: ContrastSpec = serde_json::from_str(text)?;
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            return Err(Error::Contrast(format!("alpha {}", s.alpha)));
        }
        for c in &s.contrasts {
            if c.a == c.b {
                return Err(Error::Contrast(format!("{}: compares {} with itself", c.name, c.a)));
            }
            if (c.test == TestKind::MixedAnova) != c.group_by.is_some() {
                return Err(Error::Contrast(format!("{}: group_by goes with mixed_anova only", c.name)));
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    pub name: String,
    pub column: String,
    pub a: Condition,
    pub b: Condition,
    /// The test that actually ran.
    pub test: TestKind,
    pub result: TestResult,
    pub p_adjusted: f64,
    pub normality_p: Option<f64>,
}

pub const RESULT_COLUMNS: [&str; 15] = [
    "name",
    "column",
    "a",
    "b",
    "test",
    "n",
    "excluded",
    "statistic",
    "df1",
    "df2",
    "p",
    "p_adjusted",
    "effect_kind",
    "effect",
    "normality_p",
];

/// Runs one paired contrast given the samples; `a` is the first sample,
/// so `Greater` asks whether `a` tends to exceed `b`.
pub fn paired_contrast(
    test: TestKind,
    a: &[f64],
    b: &[f64],
    tail: Alternative,
    alpha: f64,
) -> Result<(TestKind, TestResult, Option<f64>)> {
    match test {
        TestKind::PairedT => Ok((test, paired_t(a, b, tail)?, None)),
        TestKind::Wilcoxon => Ok((test, wilcoxon_signed_rank(a, b, tail)?, None)),
        TestKind::Auto => {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let np = shapiro_wilk(&d)?.p;
            let chosen = if np < alpha { TestKind::Wilcoxon } else { TestKind::PairedT };
            let (_, r, _) = paired_contrast(chosen, a, b, tail, alpha)?;
            Ok((chosen, r, Some(np)))
        }
        TestKind::MixedAnova => Err(Error::Contrast("a mixed ANOVA needs a grouping column".into())),
    }
}

fn run_one(table: &CohortTable, c: &Contrast, alpha: f64) -> Result<(TestKind, TestResult, Option<f64>)> {
    let (ids, a, b) = table.paired(&c.column, c.a, c.b)?;
    let Some(g) = &c.group_by else {
        return paired_contrast(c.test, &a, &b, c.tail, alpha);
    };
    // participant-level grouping value, from any analyzed row
    let k = table.column(g)?;
    let mut scored = Vec::new();
    for &p in &ids {
        let v = table.rows.iter().filter(|r| r.participant == p).find_map(|r| r.values[k]);
        if let Some(v) = v {
            scored.push((p, v));
        }
    }
    let split = median_split(&scored)?;
    let pick = |group: &[u32]| -> Vec<[f64; 2]> {
        ids.iter().enumerate().filter(|(_, p)| group.contains(p)).map(|(i, _)| [a[i], b[i]]).collect()
    };
    let an = mixed_anova_2x2(&pick(&split.low), &pick(&split.high))?;
    Ok((TestKind::MixedAnova, an.interaction, None))
}

/// Runs every contrast and Bonferroni-adjusts within each family.
pub fn run_contrasts(table: &CohortTable, spec: &ContrastSpec) -> Result<Vec<ContrastResult>> {
    let mut out = Vec::with_capacity(spec.contrasts.len());
    for c in &spec.contrasts {
        let (test, result, normality_p) =
            run_one(table, c, spec.alpha).map_err(|e| Error::Contrast(format!("{}: {e}", c.name)))?;
        out.push(ContrastResult {
            name: c.name.clone(),
            column: c.column.clone(),
            a: c.a,
            b: c.b,
            test,
            result,
            p_adjusted: result.p,
            normality_p,
        });
    }
    let mut families: Vec<&str> = spec.contrasts.iter().filter_map(|c| c.family.as_deref()).collect();
    families.sort_unstable();
    families.dedup();
    for f in families {
        let idx: Vec<usize> = (0..out.len()).filter(|&i| spec.contrasts[i].family.as_deref() == Some(f)).collect();
        let adj = bonferroni(&idx.iter().map(|&i| out[i].result.p).collect::<Vec<_>>());
        for (&i, p) in idx.iter().zip(adj) {
            out[i].p_adjusted = p;
        }
    }
    Ok(out)
}

/// Empty for absent or undefined values (a t test has no second df).
fn opt(v: Option<f64>) -> String {
    v.filter(|x| !x.is_nan()).map(|x| x.to_string()).unwrap_or_default()
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

pub fn write_results_csv<W: Write>(results: &[ContrastResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    out.write_record(RESULT_COLUMNS).map_err(io)?;
    for r in results {
        let t = &r.result;
        out.write_record([
            r.name.clone(),
            r.column.clone(),
            r.a.label().to_string(),
            r.b.label().to_string(),
            enum_name(&r.test),
            t.n.to_string(),
            t.excluded.to_string(),
            t.statistic.to_string(),
            opt(t.df.map(|d| d.0)),
            opt(t.df.map(|d| d.1)),
            t.p.to_string(),
            r.p_adjusted.to_string(),
            t.effect.map(|e| enum_name(&e.kind)).unwrap_or_default(),
            opt(t.effect.map(|e| e.value)),
            opt(r.normality_p),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}
