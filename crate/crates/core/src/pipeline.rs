//! Experiment harness: feature extraction, per-(run, k) training, table
//! evaluation and single-block prediction.
//!
//! Output layout under the output directory:
//!
//! ```text
//! features/{wavelet,glcm_edge,run_length}.csv
//! features/load_report.txt
//! bundles/run<r>_k<k>/...        one directory per (run, k) cell
//! sensitivity.csv, specificity.csv, cells.csv
//! ```

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::anfis::{init_fis, train_hybrid, verdict_for, AnfisModel, ConsequentKind, HybridOptions};
use crate::boostsel::{select_features, FeatureCount, SelectionResult};
use crate::calibrate::{fit_sigmoid, SigmoidCalibrator};
use crate::dataset::{
    derive_seed, load_corpus, make_splits_with_fraction, read_block_pixels, ImageBlock, Label, SampleKey, SplitPlan,
    DEFAULT_TRAIN_FRACTION,
};
use crate::error::{Error, Result};
use crate::eval::{aggregate_runs, confusion, Aggregation, Column, Metric, Rates, RunReport};
use crate::features::{pixel_features, tool_features, FeatureTable, Tool};
use crate::matrix::Matrix;
use crate::svm::{grid_search, train_svm, GridSearchReport, KernelParams, SolverOptions, SvmModel};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_OUT_DIR: &str = "splicefuse-out";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub seed: u64,
    pub runs: usize,
    pub train_fraction: f64,
    pub feature_counts: Vec<FeatureCount>,
    /// Exponents of two for C.
    pub svm_c_log2: Vec<i32>,
    /// Exponents of two for gamma.
    pub svm_gamma_log2: Vec<i32>,
    pub cv_folds: usize,
    pub anfis_radius: f64,
    pub anfis_epochs: usize,
    pub anfis_learning_rate: f64,
    pub anfis_consequent: ConsequentKind,
    pub threshold: f64,
    pub aggregation: Aggregation,
    /// 0 means one worker per core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: PathBuf::from("data"),
            seed: DEFAULT_SEED,
            runs: DEFAULT_RUNS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            feature_counts: vec![
                FeatureCount::Top(30),
                FeatureCount::Top(50),
                FeatureCount::Top(75),
                FeatureCount::Top(100),
                FeatureCount::All,
            ],
            svm_c_log2: (-5..=15).step_by(2).collect(),
            svm_gamma_log2: (-15..=3).step_by(2).collect(),
            cv_folds: DEFAULT_FOLDS,
            anfis_radius: crate::anfis::DEFAULT_RADIUS,
            anfis_epochs: crate::anfis::DEFAULT_EPOCHS,
            anfis_learning_rate: crate::anfis::DEFAULT_LEARNING_RATE,
            anfis_consequent: ConsequentKind::Linear,
            threshold: crate::anfis::DEFAULT_THRESHOLD,
            aggregation: Aggregation::Best,
            workers: 0,
        }
    }
}

fn join<D: fmt::Display>(items: &[D]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// `a:b:s` (inclusive range with step) or a comma list.
fn parse_exponents(v: &str) -> std::result::Result<Vec<i32>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let n = |s: &str| s.parse::<i32>().map_err(|e| format!("`{s}`: {e}"));
        let (a, b, s) = (n(parts[0])?, n(parts[1])?, n(parts[2])?);
        if s <= 0 {
            return Err("range step must be positive".into());
        }
        return Ok((a..=b).step_by(s as usize).collect());
    }
    v.split(',')
        .map(|s| s.trim().parse::<i32>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0, 1)", self.threshold));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if self.feature_counts.is_empty() || self.feature_counts.contains(&FeatureCount::Top(0)) {
            return bad("feature_counts must be non-empty and every count >= 1".into());
        }
        if self.svm_c_log2.is_empty() || self.svm_gamma_log2.is_empty() {
            return bad("SVM grids must be non-empty".into());
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be >= 2".into());
        }
        if !(self.anfis_radius > 0.0 && self.anfis_learning_rate > 0.0) {
            return bad("anfis_radius and anfis_learning_rate must be positive".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "dataset = {}\nseed = {}\nruns = {}\ntrain_fraction = {}\nfeature_counts = {}\n\
             svm_c_log2 = {}\nsvm_gamma_log2 = {}\ncv_folds = {}\nanfis_radius = {}\n\
             anfis_epochs = {}\nanfis_learning_rate = {}\nanfis_consequent = {}\nthreshold = {}\n\
             aggregation = {}\nworkers = {}\n",
            self.dataset.display(),
            self.seed,
            self.runs,
            self.train_fraction,
            join(&self.feature_counts),
            join(&self.svm_c_log2),
            join(&self.svm_gamma_log2),
            self.cv_folds,
            self.anfis_radius,
            self.anfis_epochs,
            self.anfis_learning_rate,
            self.anfis_consequent,
            self.threshold,
            self.aggregation,
            self.workers,
        )
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let ctx = format!("config line {}", n + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&ctx, format!("expected key = value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let perr = |m: String| Error::parse(&ctx, format!("{key}: {m}"));
            fn num<V: std::str::FromStr>(v: &str) -> std::result::Result<V, String>
            where
                V::Err: fmt::Display,
            {
                v.parse::<V>().map_err(|e| format!("`{v}`: {e}"))
            }
            match key {
                "dataset" => c.dataset = PathBuf::from(value),
                "seed" => c.seed = num(value).map_err(perr)?,
                "runs" => c.runs = num(value).map_err(perr)?,
                "train_fraction" => c.train_fraction = num(value).map_err(perr)?,
                "feature_counts" => {
                    c.feature_counts = value
                        .split(',')
                        .map(|v| v.trim().parse::<FeatureCount>())
                        .collect::<Result<_>>()?
                }
                "svm_c_log2" => c.svm_c_log2 = parse_exponents(value).map_err(perr)?,
                "svm_gamma_log2" => c.svm_gamma_log2 = parse_exponents(value).map_err(perr)?,
                "cv_folds" => c.cv_folds = num(value).map_err(perr)?,
                "anfis_radius" => c.anfis_radius = num(value).map_err(perr)?,
                "anfis_epochs" => c.anfis_epochs = num(value).map_err(perr)?,
                "anfis_learning_rate" => c.anfis_learning_rate = num(value).map_err(perr)?,
                "anfis_consequent" => c.anfis_consequent = value.parse()?,
                "threshold" => c.threshold = num(value).map_err(perr)?,
                "aggregation" => c.aggregation = value.parse()?,
                "workers" => c.workers = num(value).map_err(perr)?,
                other => return Err(Error::parse(&ctx, format!("unknown key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn c_grid(&self) -> Vec<f64> {
        self.svm_c_log2.iter().map(|&e| 2f64.powi(e)).collect()
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        self.svm_gamma_log2.iter().map(|&e| 2f64.powi(e)).collect()
    }
}

/// Paths inside an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn feature_csv(&self, tool: Tool) -> PathBuf {
        self.features_dir().join(format!("{}.csv", tool.file_stem()))
    }

    pub fn load_report(&self) -> PathBuf {
        self.features_dir().join("load_report.txt")
    }

    pub fn bundles_dir(&self) -> PathBuf {
        self.root.join("bundles")
    }

    pub fn bundle_dir(&self, run_index: usize, k: FeatureCount) -> PathBuf {
        self.bundles_dir().join(format!("run{run_index}_k{k}"))
    }

    pub fn table(&self, metric: Metric) -> PathBuf {
        self.root.join(metric.file_name())
    }

    pub fn cells(&self) -> PathBuf {
        self.root.join("cells.csv")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Runs `f` on a pool of `workers` threads (0 = one per core).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractSummary {
    pub blocks: usize,
    pub rejected: usize,
}

/// Loads the corpus and writes one feature CSV per tool plus the load report.
pub fn cmd_extract(config: &PipelineConfig, layout: &Layout) -> Result<ExtractSummary> {
    let corpus = load_corpus(&config.dataset)?;
    create_dir(&layout.features_dir())?;
    write_file(&layout.load_report(), &corpus.report.to_lines())?;
    let rows: Vec<[Vec<f64>; 3]> = with_workers(config.workers, || {
        corpus
            .blocks
            .par_iter()
            .map(|b| Tool::ALL.map(|t| tool_features::<f64>(t, b).values))
            .collect()
    })?;
    for (i, tool) in Tool::ALL.into_iter().enumerate() {
        let values = rows.iter().flat_map(|r| r[i].iter().copied()).collect();
        let table = FeatureTable {
            tool,
            keys: corpus
                .blocks
                .iter()
                .map(|b: &ImageBlock| SampleKey {
                    id: crate::dataset::Sample::id(b).to_string(),
                    label: crate::dataset::Sample::label(b),
                })
                .collect(),
            values: Matrix::from_vec(rows.len(), tool.arity(), values)?,
        };
        let path = layout.feature_csv(tool);
        let file = fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        table
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(ExtractSummary {
        blocks: corpus.blocks.len(),
        rejected: corpus.report.rejected.len(),
    })
}

/// The three per-tool tables, checked to describe the same blocks.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    pub tables: Vec<FeatureTable<f64>>,
    index: HashMap<String, usize>,
}

impl FeatureSet {
    pub fn new(tables: Vec<FeatureTable<f64>>) -> Result<Self> {
        let keys = &tables[0].keys;
        if tables.iter().any(|t| &t.keys != keys) {
            return Err(Error::Shape("feature tables list different blocks".into()));
        }
        let index = keys.iter().enumerate().map(|(i, k)| (k.id.clone(), i)).collect();
        Ok(FeatureSet { tables, index })
    }

    pub fn load(layout: &Layout) -> Result<Self> {
        let tables = Tool::ALL
            .into_iter()
            .map(|tool| {
                let path = layout.feature_csv(tool);
                let file = fs::File::open(&path)
                    .map_err(|e| Error::io(format!("{} (run `extract` first)", path.display()), e))?;
                FeatureTable::read_csv(tool, BufReader::new(file))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tables)
    }

    pub fn keys(&self) -> &[SampleKey] {
        &self.tables[0].keys
    }

    pub fn rows_of(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("block `{id}` has no feature row")))
            })
            .collect()
    }

    pub fn table(&self, tool: Tool) -> &FeatureTable<f64> {
        &self.tables[Tool::ALL.iter().position(|&t| t == tool).unwrap_or(0)]
    }
}

/// Everything one tool contributes to a bundle.
#[derive(Clone, Debug)]
pub struct ToolStage {
    pub tool: Tool,
    pub selection: SelectionResult<f64>,
    pub svm: SvmModel<f64>,
    pub calibrator: SigmoidCalibrator<f64>,
    /// Present only for freshly trained bundles.
    pub grid: Option<GridSearchReport<f64>>,
}

impl ToolStage {
    pub fn decision_value(&self, raw: &[f64]) -> Result<f64> {
        let picked: Vec<f64> = self
            .selection
            .indices
            .iter()
            .map(|&j| {
                raw.get(j)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("feature index {j} out of range")))
            })
            .collect::<Result<_>>()?;
        self.svm.decision_value(&picked)
    }
}

/// Per-block output of a bundle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub decision: [f64; 3],
    pub probability: [f64; 3],
    pub fused: f64,
    pub verdict: Label,
}

impl Scores {
    /// Per-tool verdict from the sign of the SVM decision value.
    pub fn tool_verdict(&self, i: usize) -> Label {
        if self.decision[i] > 0.0 {
            Label::Authentic
        } else {
            Label::Forged
        }
    }
}

/// Trained artifacts of one (run, k) cell.
#[derive(Clone, Debug)]
pub struct ExperimentBundle {
    pub run_index: usize,
    pub k: FeatureCount,
    pub seed: u64,
    pub threshold: f64,
    pub stages: Vec<ToolStage>,
    pub anfis: AnfisModel<f64>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl ExperimentBundle {
    /// Scores one block from its three raw descriptors, in [`Tool::ALL`] order.
    pub fn score(&self, raw: [&[f64]; 3]) -> Result<Scores> {
        let mut decision = [0.0; 3];
        let mut probability = [0.0; 3];
        for (i, stage) in self.stages.iter().enumerate() {
            decision[i] = stage.decision_value(raw[i])?;
            probability[i] = stage.calibrator.probability(decision[i]);
        }
        let fused = self.anfis.eval(&probability)?;
        Ok(Scores {
            decision,
            probability,
            fused,
            verdict: verdict_for(fused, self.threshold),
        })
    }

    pub fn score_rows(&self, features: &FeatureSet, rows: &[usize]) -> Result<Vec<Scores>> {
        rows.iter()
            .map(|&r| {
                let raw = Tool::ALL.map(|t| features.table(t).values.row(r));
                self.score(raw)
            })
            .collect()
    }

    /// Scores the bundle's own test split.
    pub fn evaluate(&self, features: &FeatureSet) -> Result<RunReport> {
        let rows = features.rows_of(&self.test_ids)?;
        let labels: Vec<Label> = rows.iter().map(|&r| features.keys()[r].label).collect();
        let scores = self.score_rows(features, &rows)?;
        let mut columns = std::collections::BTreeMap::new();
        for (i, tool) in Tool::ALL.into_iter().enumerate() {
            let verdicts: Vec<Label> = scores.iter().map(|s| s.tool_verdict(i)).collect();
            columns.insert(Column::Tool(tool), Rates::from_counts(confusion(&verdicts, &labels)?)?);
        }
        let fused: Vec<Label> = scores.iter().map(|s| s.verdict).collect();
        columns.insert(Column::Fused, Rates::from_counts(confusion(&fused, &labels)?)?);
        Ok(RunReport {
            run_index: self.run_index,
            k: self.k,
            columns,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_file(
            &dir.join("bundle.txt"),
            &format!(
                "BUNDLE v1 run={} k={} seed={} threshold={}\n",
                self.run_index, self.k, self.seed, self.threshold
            ),
        )?;
        let mut selection = String::new();
        let mut calibrators = String::new();
        for s in &self.stages {
            selection.push_str(&s.selection.to_line(s.tool));
            selection.push('\n');
            calibrators.push_str(&s.calibrator.to_line(s.tool));
            calibrators.push('\n');
            let stem = s.tool.file_stem();
            write_file(&dir.join(format!("svm_{stem}.txt")), &s.svm.to_text())?;
            if let Some(grid) = &s.grid {
                write_file(&dir.join(format!("grid_{stem}.csv")), &grid.to_csv())?;
            }
            if !s.selection.rounds.is_empty() {
                write_file(&dir.join(format!("rounds_{stem}.csv")), &s.selection.rounds_csv())?;
            }
        }
        write_file(&dir.join("selection.txt"), &selection)?;
        write_file(&dir.join("calibrators.txt"), &calibrators)?;
        write_file(&dir.join("anfis.txt"), &self.anfis.to_text())?;
        if !self.anfis.log.rmse.is_empty() {
            let mut log = String::from("epoch,rmse\n");
            for (e, r) in self.anfis.log.rmse.iter().enumerate() {
                log.push_str(&format!("{},{r}\n", e + 1));
            }
            for w in &self.anfis.log.warnings {
                log.push_str(&format!("# {w}\n"));
            }
            write_file(&dir.join("anfis_training.csv"), &log)?;
        }
        let mut split = String::new();
        for id in &self.train_ids {
            split.push_str(&format!("train {id}\n"));
        }
        for id in &self.test_ids {
            split.push_str(&format!("test {id}\n"));
        }
        write_file(&dir.join("split.txt"), &split)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header = read_file(&dir.join("bundle.txt"))?;
        let perr = |m: String| Error::parse(format!("bundle {}", dir.display()), m);
        let field = |key: &str| {
            header
                .split_whitespace()
                .find_map(|f| f.strip_prefix(key))
                .ok_or_else(|| perr(format!("missing {key}")))
        };
        if !header.starts_with("BUNDLE v1") {
            return Err(perr("missing `BUNDLE v1` header".into()));
        }
        let run_index = field("run=")?.parse().map_err(|e| perr(format!("run: {e}")))?;
        let k: FeatureCount = field("k=")?.parse()?;
        let seed = field("seed=")?.parse().map_err(|e| perr(format!("seed: {e}")))?;
        let threshold = field("threshold=")?
            .parse()
            .map_err(|e| perr(format!("threshold: {e}")))?;

        let mut selections = HashMap::new();
        for line in read_file(&dir.join("selection.txt"))?.lines().filter(|l| !l.is_empty()) {
            let (tool, sel) = SelectionResult::from_line(line)?;
            selections.insert(tool, sel);
        }
        let mut calibrators = HashMap::new();
        for line in read_file(&dir.join("calibrators.txt"))?
            .lines()
            .filter(|l| !l.is_empty())
        {
            let (tool, cal) = SigmoidCalibrator::from_line(line)?;
            calibrators.insert(tool, cal);
        }
        let stages = Tool::ALL
            .into_iter()
            .map(|tool| {
                let svm = SvmModel::from_text(&read_file(&dir.join(format!("svm_{}.txt", tool.file_stem())))?)?;
                Ok(ToolStage {
                    tool,
                    selection: selections
                        .remove(&tool)
                        .ok_or_else(|| perr(format!("no selection for {}", tool.tag())))?,
                    svm,
                    calibrator: calibrators
                        .remove(&tool)
                        .ok_or_else(|| perr(format!("no calibrator for {}", tool.tag())))?,
                    grid: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let anfis = AnfisModel::from_text(&read_file(&dir.join("anfis.txt"))?)?;
        let mut train_ids = Vec::new();
        let mut test_ids = Vec::new();
        for line in read_file(&dir.join("split.txt"))?.lines() {
            match line.split_once(' ') {
                Some(("train", id)) => train_ids.push(id.to_string()),
                Some(("test", id)) => test_ids.push(id.to_string()),
                _ if line.is_empty() => {}
                _ => return Err(perr(format!("bad split line `{line}`"))),
            }
        }
        Ok(ExperimentBundle {
            run_index,
            k,
            seed,
            threshold,
            stages,
            anfis,
            train_ids,
            test_ids,
        })
    }
}

/// Trains every stage of one (run, k) cell in memory.
pub fn train_cell(
    config: &PipelineConfig,
    features: &FeatureSet,
    plan: &SplitPlan,
    k: FeatureCount,
) -> Result<ExperimentBundle> {
    let rows = features.rows_of(&plan.train_ids)?;
    let labels: Vec<Label> = rows.iter().map(|&r| features.keys()[r].label).collect();
    let options = SolverOptions::default();
    let (c_grid, gamma_grid) = (config.c_grid(), config.gamma_grid());
    let mut stages = Vec::with_capacity(3);
    let mut probabilities = Matrix::filled(rows.len(), 3, 0.0);
    for (i, tool) in Tool::ALL.into_iter().enumerate() {
        let x = features.table(tool).values.select_rows(&rows);
        let selection = select_features(&x, &labels, k)?;
        let xs = x.select_columns(&selection.indices);
        let grid = grid_search(
            &xs,
            &labels,
            &c_grid,
            &gamma_grid,
            config.cv_folds,
            derive_seed(plan.seed, i + 1, 0),
            options,
        )?;
        let chosen = grid.chosen();
        if let Some(why) = &chosen.failure {
            return Err(Error::DegenerateTraining(format!(
                "{}: every grid cell failed ({why})",
                tool.tag()
            )));
        }
        let svm = train_svm(&xs, &labels, KernelParams::new(chosen.c, chosen.gamma)?, options)?;
        let values = xs
            .iter_rows()
            .map(|row| svm.decision_value(row))
            .collect::<Result<Vec<f64>>>()?;
        let calibrator = fit_sigmoid(&values, &labels)?.calibrator;
        for (r, &f) in values.iter().enumerate() {
            probabilities[(r, i)] = calibrator.probability(f);
        }
        stages.push(ToolStage {
            tool,
            selection,
            svm,
            calibrator,
            grid: Some(grid),
        });
    }
    let targets: Vec<f64> = labels.iter().map(|l| l.as_u8() as f64).collect();
    let initial = init_fis(&probabilities, &targets, config.anfis_radius, config.anfis_consequent)?;
    let anfis = train_hybrid(
        &initial,
        &probabilities,
        &targets,
        HybridOptions {
            epochs: config.anfis_epochs,
            learning_rate: config.anfis_learning_rate,
        },
    )?;
    Ok(ExperimentBundle {
        run_index: plan.run_index,
        k,
        seed: plan.seed,
        threshold: config.threshold,
        stages,
        anfis,
        train_ids: plan.train_ids.clone(),
        test_ids: plan.test_ids.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcome {
    pub run_index: usize,
    pub k: FeatureCount,
    /// `Err` holds the failure message written to the cell's marker file.
    pub result: std::result::Result<RunReport, String>,
}

/// Trains and persists every (run, k) cell. A failing cell leaves only a
/// `FAILED` file with the error and does not affect the others.
pub fn cmd_train(config: &PipelineConfig, layout: &Layout) -> Result<Vec<CellOutcome>> {
    config.validate()?;
    let features = FeatureSet::load(layout)?;
    let plans = make_splits_with_fraction(features.keys(), config.seed, config.runs, config.train_fraction)?;
    train_plans(config, &features, &plans, layout)
}

/// Trains every `plans` x `feature_counts` cell into its bundle directory.
pub fn train_plans(
    config: &PipelineConfig,
    features: &FeatureSet,
    plans: &[SplitPlan],
    layout: &Layout,
) -> Result<Vec<CellOutcome>> {
    create_dir(&layout.bundles_dir())?;
    let cells: Vec<(&SplitPlan, FeatureCount)> = plans
        .iter()
        .flat_map(|p| config.feature_counts.iter().map(move |&k| (p, k)))
        .collect();
    with_workers(config.workers, || {
        cells
            .par_iter()
            .map(|&(plan, k)| {
                let dir = layout.bundle_dir(plan.run_index, k);
                let result = run_cell(config, features, plan, k, &dir).map_err(|e| {
                    let msg = e.to_string();
                    let _ = fs::remove_dir_all(&dir);
                    let _ = create_dir(&dir).and_then(|_| write_file(&dir.join(FAILED_MARKER), &format!("{msg}\n")));
                    msg
                });
                CellOutcome {
                    run_index: plan.run_index,
                    k,
                    result,
                }
            })
            .collect()
    })
}

fn run_cell(
    config: &PipelineConfig,
    features: &FeatureSet,
    plan: &SplitPlan,
    k: FeatureCount,
    dir: &Path,
) -> Result<RunReport> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let bundle = train_cell(config, features, plan, k)?;
    let report = bundle.evaluate(features)?;
    bundle.save(dir)?;
    write_file(&dir.join("report.csv"), &report.to_csv())?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationSummary {
    pub reports: Vec<RunReport>,
    /// `(run, k, reason)` for every cell emitted as NA.
    pub missing: Vec<(usize, FeatureCount, String)>,
}

/// Rescores every bundle on its test split and writes the two summary
/// tables plus a per-cell listing.
pub fn cmd_evaluate(config: &PipelineConfig, layout: &Layout) -> Result<EvaluationSummary> {
    config.validate()?;
    let features = FeatureSet::load(layout)?;
    let cells: Vec<(usize, FeatureCount)> = (1..=config.runs)
        .flat_map(|r| config.feature_counts.iter().map(move |&k| (r, k)))
        .collect();
    let outcomes: Vec<std::result::Result<RunReport, String>> = with_workers(config.workers, || {
        cells
            .par_iter()
            .map(|&(r, k)| {
                let dir = layout.bundle_dir(r, k);
                let failed = dir.join(FAILED_MARKER);
                if failed.exists() {
                    return Err(format!(
                        "training failed: {}",
                        read_file(&failed).unwrap_or_default().trim()
                    ));
                }
                if !dir.join("bundle.txt").exists() {
                    return Err("no bundle".into());
                }
                ExperimentBundle::load(&dir)
                    .and_then(|b| b.evaluate(&features))
                    .map_err(|e| e.to_string())
            })
            .collect()
    })?;
    let mut summary = EvaluationSummary {
        reports: Vec::new(),
        missing: Vec::new(),
    };
    let mut listing = String::from("run,k,column,tp,fp,tn,fn,sensitivity,specificity\n");
    for (&(r, k), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(report) => {
                for (col, rates) in &report.columns {
                    let c = rates.counts;
                    listing.push_str(&format!(
                        "{r},{k},{col},{},{},{},{},{:.6},{:.6}\n",
                        c.tp, c.fp, c.tn, c.fn_, rates.sensitivity, rates.specificity
                    ));
                }
                summary.reports.push(report);
            }
            Err(why) => {
                listing.push_str(&format!("{r},{k},NA,,,,,,\n"));
                summary.missing.push((r, k, why));
            }
        }
    }
    create_dir(&layout.root)?;
    for metric in [Metric::Sensitivity, Metric::Specificity] {
        let table = aggregate_runs(&summary.reports, &config.feature_counts, metric, config.aggregation);
        write_file(&layout.table(metric), &table.to_csv())?;
    }
    write_file(&layout.cells(), &listing)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Scores,
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tool) in Tool::ALL.into_iter().enumerate() {
            writeln!(
                f,
                "{} decision={} probability={}",
                tool.tag(),
                self.scores.decision[i],
                self.scores.probability[i]
            )?;
        }
        writeln!(f, "fused={}", self.scores.fused)?;
        write!(f, "verdict={}", self.scores.verdict)
    }
}

/// Scores a single 128×128 grayscale image with a saved bundle.
pub fn cmd_predict(bundle_dir: &Path, image: &Path) -> Result<Prediction> {
    let bundle = ExperimentBundle::load(bundle_dir)?;
    let pixels = read_block_pixels(image).map_err(|message| Error::Image {
        path: image.to_path_buf(),
        message,
    })?;
    let raw = Tool::ALL
        .into_iter()
        .map(|t| pixel_features::<f64>(t, &pixels))
        .collect::<Result<Vec<_>>>()?;
    let scores = bundle.score([&raw[0], &raw[1], &raw[2]])?;
    Ok(Prediction { scores })
}

/// Exit status of `predict`: 0 authentic, 2 forged.
pub fn verdict_exit_code(label: Label) -> i32 {
    match label {
        Label::Authentic => 0,
        Label::Forged => 2,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} {}", self.name, self.detail)
    }
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail: detail.into(),
    }
}

/// Small configuration for the synthetic self-test and smoke tests.
pub fn quick_config(dataset: PathBuf, seed: u64) -> PipelineConfig {
    PipelineConfig {
        dataset,
        seed,
        runs: 2,
        feature_counts: vec![FeatureCount::Top(5), FeatureCount::All],
        svm_c_log2: vec![-1, 3, 7],
        svm_gamma_log2: vec![-5, -3, -1],
        cv_folds: 3,
        anfis_epochs: 5,
        ..PipelineConfig::default()
    }
}

/// Quick numeric checks plus a full extract/train/evaluate pass over a
/// small synthetic corpus written under `dir`.
pub fn selftest(dir: &Path, seed: u64, workers: usize) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    checks.push(check(
        "threshold",
        verdict_for(0.5, 0.5) == Label::Forged && verdict_for(0.5 + 1e-12, 0.5) == Label::Authentic,
        "0.5 -> forged, 0.5+1e-12 -> authentic",
    ));
    let p = SigmoidCalibrator::new(-2.0f64, 0.0).probability(1.0);
    checks.push(check(
        "sigmoid",
        (p - 0.8808).abs() < 1e-4,
        format!("p(A=-2,B=0,f=1)={p:.6}"),
    ));
    let sens = crate::eval::sensitivity(&crate::eval::ConfusionCounts {
        tp: 71,
        fn_: 11,
        ..Default::default()
    })?;
    checks.push(check(
        "sensitivity",
        (sens - 0.8659).abs() < 5e-5,
        format!("71/82={sens:.4}"),
    ));

    let corpus = dir.join("corpus");
    if corpus.exists() {
        fs::remove_dir_all(&corpus).map_err(|e| Error::io(corpus.display().to_string(), e))?;
    }
    crate::synth::write_synthetic_corpus(&corpus, 20, 20, seed)?;
    let config = PipelineConfig {
        workers,
        ..quick_config(corpus, seed)
    };
    let layout = Layout::new(dir.join("run"));
    let extracted = cmd_extract(&config, &layout)?;
    checks.push(check(
        "extract",
        extracted.blocks == 40 && extracted.rejected == 0,
        format!("{} blocks", extracted.blocks),
    ));
    let trained = cmd_train(&config, &layout)?;
    let ok = trained.iter().filter(|c| c.result.is_ok()).count();
    checks.push(check(
        "train",
        ok == trained.len(),
        format!("{ok}/{} cells trained", trained.len()),
    ));
    let summary = cmd_evaluate(&config, &layout)?;
    let in_range = summary.reports.iter().all(|r| {
        r.columns
            .values()
            .all(|x| (0.0..=1.0).contains(&x.sensitivity) && (0.0..=1.0).contains(&x.specificity))
    });
    checks.push(check(
        "evaluate",
        in_range && summary.missing.is_empty(),
        format!("{} reports, {} missing", summary.reports.len(), summary.missing.len()),
    ));
    Ok(checks)
}
