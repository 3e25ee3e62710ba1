//! The subcommands. Every command writes its result files plus a
//! `manifest.json` with timings and file hashes into the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use mlkit::benchmark::{benchmark, BmrFilter};
use mlkit::featsel::{list_filters, select_features};
use mlkit::inspection::{
    calibration_data, functional_anova_data, learning_curve_data, partial_dependence_data, thresh_vs_perf_resample, Breaks,
    PdFun, PdOptions,
};
use mlkit::learner::list_learners;
use mlkit::measures::{get_default_measure, list_measures};
use mlkit::stats::{critical_differences, friedman_posthoc_nemenyi, friedman_test, mean_ranks, rank_table, CdTest};
use mlkit::table::{Cell, Table};
use mlkit::tune::tune_params;
use mlkit::{resample, train, Ctx, Learner, Level, Measure, ParamSet, Property, ResampleOptions, Task, TaskKind};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{BreaksSpec, ExperimentConfig, FunSpec, InspectSpec, ResamplingSpec};
use crate::{setup, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Resample,
    Tune,
    Benchmark,
    Featsel,
    Inspect(InspectKind),
}

impl Command {
    fn name(self) -> String {
        match self {
            Command::Resample => "resample".into(),
            Command::Tune => "tune".into(),
            Command::Benchmark => "benchmark".into(),
            Command::Featsel => "featsel".into(),
            Command::Inspect(k) => format!("inspect {}", k.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InspectKind {
    Threshperf,
    Calibration,
    Learningcurve,
    Pdp,
    Fanova,
}

impl InspectKind {
    fn name(self) -> &'static str {
        match self {
            InspectKind::Threshperf => "threshperf",
            InspectKind::Calibration => "calibration",
            InspectKind::Learningcurve => "learningcurve",
            InspectKind::Pdp => "pdp",
            InspectKind::Fanova => "fanova",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListKind {
    Learners,
    Measures,
    Filters,
}

/// Command-line overrides of the config's execution settings.
#[derive(Clone, Debug, Default)]
pub struct RunSettings {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub level: Option<Level>,
}

/// Result files of one run, hashed as they are written.
struct Output {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        self.text(name, &(serde_json::to_string_pretty(v).expect("json value") + "\n"))
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        self.text(name, &t.to_csv()?)
    }

    /// Picks up files written by library code so the manifest covers them.
    fn register_tree(&mut self, sub: &str) -> Result<(), CliError> {
        let mut stack = vec![self.dir.join(sub)];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).map_err(|e| io_err(&d, e))? {
                let p = entry.map_err(|e| io_err(&d, e))?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let bytes = std::fs::read(&p).map_err(|e| io_err(&p, e))?;
                    let rel = p.strip_prefix(&self.dir).expect("inside output dir").to_string_lossy().replace('\\', "/");
                    self.files.insert(rel, sha256_hex(&bytes));
                }
            }
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Output { path: path.display().to_string(), source }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn aggr_json(aggr: &IndexMap<String, f64>) -> Value {
    Value::Object(aggr.iter().map(|(k, v)| (k.clone(), num(*v))).collect())
}

/// Everything a command needs, built from the config.
struct Setup {
    tasks: Vec<Task>,
    learners: Vec<Learner>,
    measures: Vec<Measure>,
    ctx: Ctx,
}

impl Setup {
    fn learner_index(&self, id: Option<&str>, path: &str) -> Result<usize, CliError> {
        match id {
            None => Ok(0),
            Some(id) => self
                .learners
                .iter()
                .position(|l| l.id() == id)
                .ok_or_else(|| CliError::config(path, format!("no learner with id '{id}'"))),
        }
    }

    fn measures_or(&self, ids: &[String], path: &str) -> Result<Vec<Measure>, CliError> {
        if ids.is_empty() {
            Ok(self.measures.clone())
        } else {
            setup::measures(ids, path)
        }
    }
}

/// Runs `cmd` and returns the names of the written files (manifest excluded).
pub fn run(
    cmd: Command,
    cfg: &ExperimentConfig,
    base: &Path,
    out_dir: &Path,
    settings: &RunSettings,
) -> Result<Vec<String>, CliError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let seed = settings.seed.unwrap_or(cfg.seed);
    let workers = settings.workers.unwrap_or(cfg.workers);
    let level = settings.level.unwrap_or(cfg.level);
    let ctx = Ctx::new(seed).with_parallel(workers, level)?;
    let s = Setup {
        tasks: setup::tasks(cfg, base)?,
        learners: setup::learners(cfg)?,
        measures: setup::measures(&cfg.measures, "measures")?,
        ctx,
    };
    let resampling = setup::resample_desc(&cfg.resampling, "resampling")?;
    let mut out = Output::new(out_dir)?;
    log::info!("running {} with seed {seed} on {workers} worker(s) at level {level}", cmd.name());
    match cmd {
        Command::Resample => cmd_resample(&s, &resampling, &mut out)?,
        Command::Tune => cmd_tune(&s, cfg, &resampling, &mut out)?,
        Command::Featsel => cmd_featsel(&s, cfg, &resampling, &mut out)?,
        Command::Benchmark => cmd_benchmark(&s, cfg, &resampling, &mut out)?,
        Command::Inspect(kind) => cmd_inspect(&s, kind, cfg.inspect.clone().unwrap_or_default(), &resampling, &mut out)?,
    }
    let files: Vec<String> = out.files.keys().cloned().collect();
    let manifest = json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "workers": workers,
        "level": level.name(),
        "started_unix": started,
        "runtime_secs": clock.elapsed().as_secs_f64(),
        "files": out.files,
    });
    let path = out.dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("json") + "\n").map_err(|e| io_err(&path, e))?;
    Ok(files)
}

fn cmd_resample(s: &Setup, desc: &mlkit::ResampleDesc, out: &mut Output) -> Result<(), CliError> {
    let opts = ResampleOptions::new().measures(s.measures.clone());
    let rr = resample(&s.learners[0], &s.tasks[0], desc.clone(), &opts, &s.ctx)?;
    log::info!("{}", mlkit::resample::format_aggr(&rr.aggr));
    out.json("aggr.json", &aggr_json(&rr.aggr))?;
    out.text("perf.csv", &rr.perf_csv())?;
    if let Some(p) = &rr.pred {
        out.text("pred.csv", &p.to_csv())?;
    }
    out.json("resample.json", &rr.to_json())
}

fn inner_desc(spec: Option<&ResamplingSpec>, outer: &mlkit::ResampleDesc, path: &str) -> Result<mlkit::ResampleDesc, CliError> {
    match spec {
        Some(r) => setup::resample_desc(r, path),
        None => Ok(outer.clone()),
    }
}

fn cmd_tune(s: &Setup, cfg: &ExperimentConfig, desc: &mlkit::ResampleDesc, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.tuning.as_ref().ok_or_else(|| CliError::config("tuning", "the tune command needs a tuning block"))?;
    let l = &s.learners[s.learner_index(spec.learner.as_deref(), "tuning.learner")?];
    let ps = ParamSet::new(spec.params.clone()).map_err(|e| CliError::config("tuning.params", e.to_string()))?;
    let desc = inner_desc(spec.resampling.as_ref(), desc, "tuning.resampling")?;
    let ms = s.measures_or(&spec.measures, "tuning.measures")?;
    let res = tune_params(l, &s.tasks[0], desc, &ps, &spec.control, &ms, &s.ctx)?;
    out.json("aggr.json", &aggr_json(&res.y))?;
    out.table("optpath.csv", &res.opt_path.to_table(false))?;
    out.json("tune_result.json", &res.to_json())
}

fn cmd_featsel(s: &Setup, cfg: &ExperimentConfig, desc: &mlkit::ResampleDesc, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.featsel.clone().unwrap_or_else(|| crate::config::FeatSelSpec {
        learner: None,
        control: Default::default(),
        resampling: None,
        measures: Vec::new(),
    });
    let l = &s.learners[s.learner_index(spec.learner.as_deref(), "featsel.learner")?];
    let desc = inner_desc(spec.resampling.as_ref(), desc, "featsel.resampling")?;
    let ms = s.measures_or(&spec.measures, "featsel.measures")?;
    let res = select_features(l, &s.tasks[0], desc, &spec.control, &ms, &s.ctx)?;
    out.json("aggr.json", &aggr_json(&res.y))?;
    out.table("optpath.csv", &res.opt_path.to_table(false))?;
    out.json("featsel.json", &res.to_json())?;
    out.text("featsel_report.txt", &(mlkit::featsel::analyze_featsel_result(&res) + "\n"))
}

fn select<'a, T>(items: &'a [T], ids: &[String], id_of: impl Fn(&T) -> &str, path: &str) -> Result<Vec<&'a T>, CliError> {
    if ids.is_empty() {
        return Ok(items.iter().collect());
    }
    ids.iter()
        .enumerate()
        .map(|(i, id)| {
            items
                .iter()
                .find(|x| id_of(x) == id)
                .ok_or_else(|| CliError::config(&format!("{path}[{i}]"), format!("unknown id '{id}'")))
        })
        .collect()
}

fn cmd_benchmark(s: &Setup, cfg: &ExperimentConfig, desc: &mlkit::ResampleDesc, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.benchmark.clone().unwrap_or_default();
    let learners: Vec<Learner> = select(&s.learners, &spec.learners, |l| l.id(), "benchmark.learners")?.into_iter().cloned().collect();
    let tasks: Vec<Task> = select(&s.tasks, &spec.tasks, |t| t.id(), "benchmark.tasks")?.into_iter().cloned().collect();
    let opts = ResampleOptions::new().measures(s.measures.clone());
    let bmr = benchmark(&learners, &tasks, desc.clone(), &opts, &s.ctx)?;
    let all = BmrFilter::all();

    let mut aggr = serde_json::Map::new();
    for (t, row) in &bmr.results {
        let cells = row.iter().map(|(l, r)| (l.clone(), aggr_json(&r.aggr))).collect();
        aggr.insert(t.clone(), Value::Object(cells));
    }
    out.json("aggr.json", &Value::Object(aggr))?;
    out.table("perf.csv", &bmr.performances(&all))?;
    out.table("aggr.csv", &bmr.aggr_performances(&all))?;
    let mut cells = Vec::new();
    for (t, row) in &bmr.results {
        for (l, r) in row {
            if let Some(p) = &r.pred {
                cells.push((t.as_str(), l.as_str(), p.to_csv()));
            }
        }
    }
    out.text("pred.csv", &stack_csv(&cells)?)?;
    bmr.save(&out.dir)?;
    out.register_tree("pred")?;
    let bmr_json = std::fs::read(out.dir.join("bmr.json")).map_err(|e| io_err(&out.dir, e))?;
    out.files.insert("bmr.json".into(), sha256_hex(&bmr_json));

    if bmr.learner_ids.len() >= 2 && bmr.task_ids.len() >= 2 {
        let m = bmr.perf_matrix(None)?;
        out.table("ranks.csv", &rank_table(&m))?;
        let fr = friedman_test(&m)?;
        let nem = friedman_posthoc_nemenyi(&m)?;
        let cd = critical_differences(&m, &CdTest::Nemenyi, spec.alpha)
            .map_err(|e| CliError::config("benchmark.alpha", e.to_string()))?;
        let stats = json!({
            "measure": m.measure,
            "learners": m.learners,
            "mean_ranks": mean_ranks(&m).into_iter().map(num).collect::<Vec<_>>(),
            "friedman": {"statistic": num(fr.statistic), "df": fr.df, "p_value": num(fr.p_value)},
            "nemenyi_p": nem.iter().map(|r| r.iter().map(|v| num(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "alpha": spec.alpha,
            "cd": num(cd.cd),
            "q": num(cd.q),
            "significant": cd.significant.iter().map(|&(a, b)| [&m.learners[a], &m.learners[b]]).collect::<Vec<_>>(),
        });
        out.json("friedman.json", &stats)?;
    }
    Ok(())
}

/// Stacks per-cell prediction CSVs under a union header with task and
/// learner columns in front; cells lacking a column get NA.
fn stack_csv(cells: &[(&str, &str, String)]) -> Result<String, CliError> {
    let mut header: Vec<String> = Vec::new();
    let mut parsed = Vec::new();
    for (t, l, text) in cells {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let h: Vec<String> = rdr.headers().map_err(mlkit::Error::from)?.iter().map(str::to_string).collect();
        for c in &h {
            if !header.contains(c) {
                header.push(c.clone());
            }
        }
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(mlkit::Error::from)?;
        parsed.push((*t, *l, h, rows));
    }
    let mut table = Table::new(["task.id", "learner.id"].into_iter().map(String::from).chain(header.iter().cloned()));
    for (t, l, h, rows) in parsed {
        for r in rows {
            let mut row = vec![Cell::from(t), Cell::from(l)];
            row.extend(header.iter().map(|c| match h.iter().position(|x| x == c) {
                Some(j) if r[j] != "NA" => Cell::Str(r[j].clone()),
                _ => Cell::Missing,
            }));
            table.push(row);
        }
    }
    Ok(table.to_csv()?)
}

fn pd_options(spec: &InspectSpec) -> PdOptions {
    PdOptions {
        interaction: spec.interaction,
        gridsize: spec.gridsize.unwrap_or(10),
        fun: match spec.fun {
            FunSpec::Mean => PdFun::Mean,
            FunSpec::Variance => PdFun::Variance,
            FunSpec::Quantiles(lo, hi) => PdFun::Quantiles(lo, hi),
        },
        individual: spec.individual,
        center: spec.center.clone(),
        derivative: spec.derivative,
        ..PdOptions::default()
    }
}

fn breaks(spec: &InspectSpec) -> Result<Option<Breaks>, CliError> {
    Ok(match &spec.breaks {
        None => None,
        Some(BreaksSpec::Count(n)) => Some(Breaks::Equal(*n)),
        Some(BreaksSpec::Cuts(c)) => Some(Breaks::Cuts(c.clone())),
        Some(BreaksSpec::Rule(r)) if r == "sturges" => Some(Breaks::Sturges),
        Some(BreaksSpec::Rule(r)) => return Err(CliError::config("inspect.breaks", format!("unknown binning rule '{r}'"))),
    })
}

fn cmd_inspect(s: &Setup, kind: InspectKind, spec: InspectSpec, desc: &mlkit::ResampleDesc, out: &mut Output) -> Result<(), CliError> {
    let task = &s.tasks[0];
    let mut ms = s.measures_or(&spec.measures, "inspect.measures")?;
    if ms.is_empty() {
        ms.push(get_default_measure(task));
    }
    match kind {
        InspectKind::Threshperf => {
            let opts = ResampleOptions::new().measures(ms.clone());
            let rr = resample(&s.learners[0], task, desc.clone(), &opts, &s.ctx)?;
            let t = thresh_vs_perf_resample(&rr, &ms, spec.gridsize.unwrap_or(101), spec.aggregate)?;
            out.table("threshperf.csv", &t)
        }
        InspectKind::Calibration => {
            let inst = mlkit::resample::Resampling::from(desc.clone()).instantiate(task, &s.ctx.child("instance", 0))?;
            let opts = ResampleOptions::new().measures(ms);
            let mut preds = Vec::new();
            for (i, l) in s.learners.iter().enumerate() {
                let rr = resample(l, task, inst.clone(), &opts, &s.ctx.child("learner", i as u64))?;
                let p = rr.pred.ok_or_else(|| mlkit::Error::InvalidArgument("resampling kept no predictions".into()))?;
                preds.push((l.id().to_string(), p));
            }
            let named: Vec<(&str, &mlkit::Prediction)> = preds.iter().map(|(n, p)| (n.as_str(), p)).collect();
            let cal = calibration_data(&named, breaks(&spec)?, spec.groups)?;
            out.table("calibration.csv", &cal.proportions)?;
            out.table("calibration_rag.csv", &cal.rag)
        }
        InspectKind::Learningcurve => {
            let t = learning_curve_data(&s.learners, task, &spec.percs, &ms, desc.clone(), &s.ctx)?;
            out.table("learningcurve.csv", &t)
        }
        InspectKind::Pdp | InspectKind::Fanova => {
            let model = train(&s.learners[0], task, None, None, &s.ctx.child("train", 0))?;
            let feats: Vec<String> = if spec.features.is_empty() { model.features().to_vec() } else { spec.features.clone() };
            let opts = pd_options(&spec);
            if kind == InspectKind::Pdp {
                let t = partial_dependence_data(&model, task.data(), &feats, &opts, &s.ctx)?;
                out.table("pdp.csv", &t)
            } else {
                let depth = spec.depth.min(feats.len());
                let t = functional_anova_data(&model, task.data(), &feats, depth, &opts, &s.ctx)?;
                out.table("fanova.csv", &t)
            }
        }
    }
}

/// Registry listing as CSV.
pub fn list(what: ListKind, kind: Option<TaskKind>, properties: &[String]) -> Result<String, CliError> {
    let mut t;
    match what {
        ListKind::Learners => {
            let props = properties
                .iter()
                .map(|p| p.parse::<Property>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::config("properties", e.to_string()))?;
            t = Table::new(["class", "type", "properties", "package"]);
            for l in list_learners(kind, &props, None) {
                let ps: Vec<&str> = l.properties.iter().map(Property::as_str).collect();
                t.push(vec![Cell::from(l.class_name), Cell::from(l.kind.as_str()), Cell::from(ps.join(",")), Cell::from(l.package)]);
            }
        }
        ListKind::Measures => {
            let props: Vec<&str> = properties.iter().map(String::as_str).collect();
            t = Table::new(["id", "name", "minimize", "best", "worst", "aggr", "properties"]);
            for m in list_measures(kind, None, &props) {
                let ps: Vec<&str> = m.properties.iter().map(String::as_str).collect();
                t.push(vec![
                    Cell::from(m.id.as_str()),
                    Cell::from(m.name.as_str()),
                    Cell::Bool(m.minimize),
                    Cell::Num(m.best),
                    Cell::Num(m.worst),
                    Cell::from(m.aggr.id.as_str()),
                    Cell::from(ps.join(",")),
                ]);
            }
        }
        ListKind::Filters => {
            t = Table::new(["name", "tasks", "features", "desc"]);
            for f in list_filters(kind) {
                let tk: Vec<&str> = f.task_kinds.iter().map(|k| k.as_str()).collect();
                let fk: Vec<String> = f.feature_kinds.iter().map(|k| k.to_string()).collect();
                t.push(vec![Cell::from(f.name), Cell::from(tk.join(",")), Cell::from(fk.join(",")), Cell::from(f.desc)]);
            }
        }
    }
    Ok(t.to_csv()?)
}
