//! Confusion counts, sensitivity/specificity and multi-run summary tables.
//!
//! The positive class is *forged*: a true positive is a spliced block that
//! was flagged as forged.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::boostsel::FeatureCount;
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::Tool;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn forged(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn authentic(&self) -> usize {
        self.tn + self.fp
    }
}

pub fn confusion(verdicts: &[Label], labels: &[Label]) -> Result<ConfusionCounts> {
    if verdicts.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} verdicts for {} labels",
            verdicts.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&v, &l) in verdicts.iter().zip(labels) {
        match (l, v) {
            (Label::Forged, Label::Forged) => c.tp += 1,
            (Label::Forged, Label::Authentic) => c.fn_ += 1,
            (Label::Authentic, Label::Authentic) => c.tn += 1,
            (Label::Authentic, Label::Forged) => c.fp += 1,
        }
    }
    Ok(c)
}

/// TP / (TP + FN).
pub fn sensitivity(c: &ConfusionCounts) -> Result<f64> {
    match c.forged() {
        0 => Err(Error::UndefinedRate("sensitivity")),
        n => Ok(c.tp as f64 / n as f64),
    }
}

/// TN / (TN + FP).
pub fn specificity(c: &ConfusionCounts) -> Result<f64> {
    match c.authentic() {
        0 => Err(Error::UndefinedRate("specificity")),
        n => Ok(c.tn as f64 / n as f64),
    }
}

/// One column of the summary tables: a single tool or the fused output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Column {
    Tool(Tool),
    Fused,
}

impl Column {
    pub const ALL: [Column; 4] = [
        Column::Tool(Tool::Wavelet),
        Column::Tool(Tool::GlcmEdge),
        Column::Tool(Tool::RunLength),
        Column::Fused,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Column::Tool(t) => t.column(),
            Column::Fused => "NFIS",
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.header())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub counts: ConfusionCounts,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl Rates {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self> {
        Ok(Rates {
            counts,
            sensitivity: sensitivity(&counts)?,
            specificity: specificity(&counts)?,
        })
    }
}

/// Results of one (run, k) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub run_index: usize,
    pub k: FeatureCount,
    pub columns: BTreeMap<Column, Rates>,
}

impl RunReport {
    pub fn rates(&self, column: Column) -> Option<&Rates> {
        self.columns.get(&column)
    }

    /// `column,tp,fp,tn,fn,sensitivity,specificity` lines.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# run={} k={}\ncolumn,tp,fp,tn,fn,sensitivity,specificity\n",
            self.run_index, self.k
        );
        for (col, r) in &self.columns {
            let c = r.counts;
            s.push_str(&format!(
                "{col},{},{},{},{},{},{}\n",
                c.tp, c.fp, c.tn, c.fn_, r.sensitivity, r.specificity
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let perr = |m: String| Error::parse("run report", m);
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| perr("empty report".into()))?;
        let mut run_index = None;
        let mut k = None;
        for field in head.trim_start_matches('#').split_whitespace() {
            if let Some(v) = field.strip_prefix("run=") {
                run_index = v.parse().ok();
            } else if let Some(v) = field.strip_prefix("k=") {
                k = v.parse().ok();
            }
        }
        let (run_index, k) = run_index.zip(k).ok_or_else(|| perr(format!("bad header `{head}`")))?;
        lines.next();
        let mut columns = BTreeMap::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(perr(format!("expected 7 fields in `{line}`")));
            }
            let column = Column::ALL
                .into_iter()
                .find(|c| c.header() == f[0])
                .ok_or_else(|| perr(format!("unknown column `{}`", f[0])))?;
            let n = |s: &str| s.parse::<usize>().map_err(|e| perr(e.to_string()));
            let counts = ConfusionCounts {
                tp: n(f[1])?,
                fp: n(f[2])?,
                tn: n(f[3])?,
                fn_: n(f[4])?,
            };
            columns.insert(column, Rates::from_counts(counts)?);
        }
        Ok(RunReport { run_index, k, columns })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Aggregation {
    #[default]
    Best,
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Best => "best",
            Aggregation::Mean => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "best" => Ok(Aggregation::Best),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::parse("aggregation", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Sensitivity,
    Specificity,
}

impl Metric {
    pub fn file_name(self) -> &'static str {
        match self {
            Metric::Sensitivity => "sensitivity.csv",
            Metric::Specificity => "specificity.csv",
        }
    }

    fn pick(self, r: &Rates) -> f64 {
        match self {
            Metric::Sensitivity => r.sensitivity,
            Metric::Specificity => r.specificity,
        }
    }
}

/// Rows are feature counts, columns are the three tools and the fused output.
/// Missing cells are `None` and print as `NA`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryTable {
    pub metric: Metric,
    pub rows: Vec<FeatureCount>,
    pub cells: Vec<[Option<f64>; 4]>,
}

impl SummaryTable {
    pub fn get(&self, k: FeatureCount, column: Column) -> Option<f64> {
        let r = self.rows.iter().position(|&x| x == k)?;
        let c = Column::ALL.iter().position(|&x| x == column)?;
        self.cells[r][c]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k");
        for c in Column::ALL {
            s.push(',');
            s.push_str(c.header());
        }
        s.push('\n');
        for (k, row) in self.rows.iter().zip(&self.cells) {
            s.push_str(&k.to_string());
            for cell in row {
                match cell {
                    Some(v) => s.push_str(&format!(",{v:.4}")),
                    None => s.push_str(",NA"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Collapses the per-run reports into one table per metric. `rows` fixes the
/// row order; cells with no report in any run stay empty.
pub fn aggregate_runs(reports: &[RunReport], rows: &[FeatureCount], metric: Metric, mode: Aggregation) -> SummaryTable {
    let cells = rows
        .iter()
        .map(|&k| {
            let mut row = [None; 4];
            for (slot, column) in row.iter_mut().zip(Column::ALL) {
                let values: Vec<f64> = reports
                    .iter()
                    .filter(|r| r.k == k)
                    .filter_map(|r| r.rates(column))
                    .map(|r| metric.pick(r))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                *slot = Some(match mode {
                    Aggregation::Best => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
                });
            }
            row
        })
        .collect();
    SummaryTable {
        metric,
        rows: rows.to_vec(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Authentic as A, Forged as F};

    fn counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    #[test]
    fn table_cells_from_counts() {
        let s = sensitivity(&counts(71, 0, 0, 11)).unwrap();
        assert!((s - 0.8659).abs() < 5e-5);
        let p = specificity(&counts(0, 13, 137, 0)).unwrap();
        assert!((p - 0.9133).abs() < 5e-5);
    }

    #[test]
    fn rate_edges() {
        assert_eq!(sensitivity(&counts(0, 0, 0, 4)).unwrap(), 0.0);
        assert_eq!(sensitivity(&counts(4, 0, 0, 0)).unwrap(), 1.0);
        assert_eq!(specificity(&counts(0, 3, 0, 0)).unwrap(), 0.0);
        assert_eq!(specificity(&counts(0, 0, 3, 0)).unwrap(), 1.0);
        assert!(matches!(sensitivity(&counts(0, 1, 1, 0)), Err(Error::UndefinedRate(_))));
        assert!(matches!(specificity(&counts(1, 0, 0, 1)), Err(Error::UndefinedRate(_))));
    }

    #[test]
    fn confusion_basics() {
        let all_f = vec![F; 5];
        assert_eq!(confusion(&all_f, &all_f).unwrap(), counts(5, 0, 0, 0));
        let labels = [F, A, A, F];
        let flipped: Vec<Label> = labels.iter().map(|&l| if l == F { A } else { F }).collect();
        let c = confusion(&flipped, &labels).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion(&[F], &[F, A]).is_err());
    }

    fn report(run: usize, k: FeatureCount, sens: f64) -> RunReport {
        let tp = (sens * 100.0).round() as usize;
        let rates = Rates::from_counts(counts(tp, 1, 9, 100 - tp)).unwrap();
        RunReport {
            run_index: run,
            k,
            columns: Column::ALL.into_iter().map(|c| (c, rates)).collect(),
        }
    }

    #[test]
    fn aggregation_modes() {
        let k = FeatureCount::Top(30);
        let reps = [report(0, k, 0.8), report(1, k, 0.86)];
        let best = aggregate_runs(&reps, &[k], Metric::Sensitivity, Aggregation::Best);
        assert_eq!(best.get(k, Column::Fused), Some(0.86));
        let reps = [report(0, k, 0.8), report(1, k, 0.9)];
        let mean = aggregate_runs(&reps, &[k], Metric::Sensitivity, Aggregation::Mean);
        assert!((mean.get(k, Column::Fused).unwrap() - 0.85).abs() < 1e-12);
        let one = [report(0, k, 0.8)];
        assert_eq!(
            aggregate_runs(&one, &[k], Metric::Specificity, Aggregation::Best),
            aggregate_runs(&one, &[k], Metric::Specificity, Aggregation::Mean)
        );
    }

    #[test]
    fn missing_cells_print_na() {
        let rows = [FeatureCount::Top(30), FeatureCount::All];
        let t = aggregate_runs(&[], &rows, Metric::Sensitivity, Aggregation::Best);
        assert_eq!(
            t.to_csv(),
            "k,DWT,EdgeGLCM,RunLength,NFIS\n30,NA,NA,NA,NA\nAll,NA,NA,NA,NA\n"
        );
    }

    #[test]
    fn report_round_trip() {
        let r = report(3, FeatureCount::All, 0.75);
        assert_eq!(RunReport::from_csv(&r.to_csv()).unwrap(), r);
    }
}
