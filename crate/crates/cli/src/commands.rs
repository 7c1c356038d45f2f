use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use log::info;
use reweigh_core::data::{
    load_dataset, read_prepared, split_file, write_prepared, DataSource, IngestConfig, LoadedSplits, Role,
    SplitSpec, METADATA_FILE,
};
use reweigh_core::diag::{StudyContext, StudyReport};
use reweigh_core::io::write_atomic;
use reweigh_core::lp::{budgeted_spec, relaxed_spec, LpBranch};
use reweigh_core::pipeline::{grid_search, run, Grid, GridOptions, GridSearchResult, PipelineResult, ReweighConfig};
use reweigh_core::synth::{self, SynthConfig};
use serde::Serialize;

use crate::manifest::RunRecorder;
use crate::{CommonArgs, DiagStudy, GridArgs, PrepareArgs, ReweighArgs, SynthArgs};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 70;

pub fn report_error(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

/// Prints the error as one JSON line and returns the exit code.
pub fn fail(e: &anyhow::Error) -> u8 {
    // Some errors already print their source; skip causes that repeat.
    let mut message = String::new();
    for cause in e.chain().map(|c| c.to_string()) {
        if !message.contains(&cause) {
            if !message.is_empty() {
                message.push_str(": ");
            }
            message.push_str(&cause);
        }
    }
    let message = message.replace('\n', " ");
    let (kind, code) = match e.chain().find_map(|c| c.downcast_ref::<reweigh_core::Error>()) {
        Some(core) if core.is_user_error() => (core.kind(), EXIT_USAGE),
        Some(core) => (core.kind(), EXIT_INTERNAL),
        None if e.chain().any(|c| c.is::<std::io::Error>()) => ("io", EXIT_USAGE),
        None => ("usage", EXIT_USAGE),
    };
    report_error(kind, &message);
    code
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    write_atomic(path, text.as_bytes())?;
    info!("wrote {}", path.display());
    Ok(path.to_path_buf())
}

pub fn prepare(args: PrepareArgs) -> Result<()> {
    let mut rec = RunRecorder::start("prepare");
    let mut config = match &args.config {
        Some(path) => {
            rec.config_path(path);
            rec.input(path);
            Some(IngestConfig::from_json_file(path)?)
        }
        None => None,
    };
    let (source, mut cfg) = match (&args.dataset, &args.csv) {
        (Some(id), _) => {
            let cfg = config.take().unwrap_or_else(|| id.config());
            let source = DataSource::Preset {
                id: *id,
                dir: args.raw_dir.clone(),
            };
            rec.input(args.raw_dir.join(id.main_file()));
            (source, cfg)
        }
        (None, Some(csv)) => {
            let cfg = config.take().ok_or_else(|| anyhow!("--csv needs --config"))?;
            rec.input(csv);
            (DataSource::File(csv.clone()), cfg)
        }
        (None, None) => return Err(anyhow!("either --dataset or --csv is required")),
    };
    cfg.seed = args.seed;
    if let SplitSpec::Predefined { test_file, .. } = &cfg.split {
        let base = match &source {
            DataSource::Preset { dir, .. } => dir.clone(),
            DataSource::File(p) => p.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        rec.input(base.join(test_file));
    }
    let splits = load_dataset(&source, Some(&cfg))?;
    rec.outputs(write_prepared(&args.out, &splits)?);
    let m = &splits.metadata;
    println!(
        "prepared {}: train {} / val {} / test {}, {} features",
        m.dataset, m.sizes.train, m.sizes.val, m.sizes.test, m.n_features
    );
    rec.finish(&args.out, &serde_json::to_value(&cfg)?, args.seed)?;
    Ok(())
}

fn load_prepared(common: &CommonArgs, rec: &mut RunRecorder) -> Result<(LoadedSplits, f64)> {
    let dir = &common.dataset_dir;
    let splits = read_prepared(dir).with_context(|| format!("reading prepared dataset {}", dir.display()))?;
    for role in [Role::Train, Role::Val, Role::Test] {
        rec.input(dir.join(split_file(role)));
    }
    rec.input(dir.join(METADATA_FILE));
    let l2 = common
        .l2
        .or(splits.metadata.suggested_l2)
        .ok_or_else(|| anyhow!("--l2 is required: the dataset metadata suggests no value"))?;
    Ok((splits, l2))
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    config: &'a ReweighConfig,
    already_fair: bool,
    verdict: &'a str,
    lp_branch: Option<LpBranch>,
    val_fair_surrogate: f64,
    lp_objective: Option<f64>,
    lp_residuals: Option<&'a [f64]>,
    sum_w: f64,
    validation: Pair<'a>,
    test: Pair<'a>,
}

#[derive(Serialize)]
struct Pair<'a> {
    base: &'a reweigh_core::eval::MetricReport,
    reweighed: &'a reweigh_core::eval::MetricReport,
}

fn verdict(r: &PipelineResult) -> &'static str {
    if r.already_fair {
        "already fair"
    } else {
        r.region.as_str()
    }
}

/// Weights, both models, metrics and influence scores of one run.
fn write_run(out: &Path, r: &PipelineResult, dump_lp: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut weights = String::from("index,w,effective_weight\n");
    for (i, w) in r.w_star.iter().enumerate() {
        weights.push_str(&format!("{i},{w},{}\n", 1.0 - w));
    }
    written.push(write_text(&out.join("weights.csv"), &weights)?);
    written.push(write_json(&out.join("base_model.json"), &r.base_model)?);
    written.push(write_json(&out.join("reweighed_model.json"), &r.reweighed_model)?);
    let metrics = MetricsFile {
        config: &r.config,
        already_fair: r.already_fair,
        verdict: verdict(r),
        lp_branch: r.lp_branch,
        val_fair_surrogate: r.val_fair_surrogate,
        lp_objective: r.lp.as_ref().and_then(|l| l.objective_value),
        lp_residuals: r.lp.as_ref().map(|l| l.residuals.as_slice()),
        sum_w: r.w_star.iter().sum(),
        validation: Pair {
            base: &r.base_val_metrics,
            reweighed: &r.reweighed_val_metrics,
        },
        test: Pair {
            base: &r.base_metrics,
            reweighed: &r.reweighed_metrics,
        },
    };
    written.push(write_json(&out.join("metrics.json"), &metrics)?);
    if let Some(table) = &r.influence {
        let (csv, header) = (out.join("influence.csv"), out.join("influence.json"));
        table.write(&csv, &header)?;
        written.extend([csv, header]);
        if dump_lp {
            let spec = match r.lp_branch {
                Some(LpBranch::Budgeted) => budgeted_spec(table, r.config.alpha)?,
                _ => relaxed_spec(table, r.config.beta, r.config.gamma)?,
            };
            written.push(write_text(&out.join("program.lp"), &spec.to_lp_format())?);
        }
    }
    Ok(written)
}

fn print_verdict(r: &PipelineResult) {
    let n = r.config.notion;
    let fmt = |g: Option<f64>| g.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "test accuracy {:.4} -> {:.4}, {n} gap {} -> {}",
        r.base_metrics.accuracy,
        r.reweighed_metrics.accuracy,
        fmt(r.base_metrics.gap(n)),
        fmt(r.reweighed_metrics.gap(n)),
    );
    println!("verdict: {}", verdict(r));
}

pub fn reweigh(args: ReweighArgs) -> Result<()> {
    let mut rec = RunRecorder::start("reweigh");
    let (splits, l2) = load_prepared(&args.common, &mut rec)?;
    let cfg = ReweighConfig {
        notion: args.common.notion,
        beta: args.beta,
        gamma: args.gamma,
        alpha: args.alpha,
        l2_total: l2,
        seed: args.common.seed,
    };
    let result = run(&splits.train, &splits.val, &splits.test, &cfg)?;
    rec.outputs(write_run(&args.common.out, &result, args.dump_lp)?);
    print_verdict(&result);
    rec.finish(&args.common.out, &serde_json::to_value(&cfg)?, cfg.seed)?;
    Ok(())
}

fn grid_csv(res: &GridSearchResult) -> String {
    let mut out = String::from("beta,gamma,alpha,lp_branch,sum_w,val_accuracy,val_gap,improvement,feasible\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in &res.evaluations {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            e.beta,
            e.gamma,
            e.alpha,
            e.lp_branch.map_or("", LpBranch::as_str),
            e.sum_w,
            e.val_accuracy,
            opt(e.val_gap),
            opt(e.improvement),
            e.feasible
        ));
    }
    out
}

pub fn grid(args: GridArgs) -> Result<()> {
    let mut rec = RunRecorder::start("grid");
    let (splits, l2) = load_prepared(&args.common, &mut rec)?;
    let grid = match &args.grid {
        Some(path) => {
            rec.config_path(path);
            rec.input(path);
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<Grid>(&text).with_context(|| format!("parsing grid {}", path.display()))?
        }
        None => Grid::full(),
    };
    let opts = GridOptions {
        tol_acc: args.tol_acc,
        seed: args.common.seed,
    };
    let res = grid_search(&splits.train, &splits.val, args.common.notion, l2, &grid, &opts)?;
    let out = &args.common.out;
    rec.output(write_json(&out.join("grid.json"), &res)?);
    rec.output(write_text(&out.join("grid.csv"), &grid_csv(&res))?);
    let s = &res.selected;
    println!(
        "selected beta={} gamma={} alpha={}{}",
        s.beta,
        s.gamma,
        s.alpha,
        if res.fallback { " (fallback: no candidate kept validation accuracy)" } else { "" }
    );
    let result = run(&splits.train, &splits.val, &splits.test, s)?;
    rec.outputs(write_run(out, &result, args.dump_lp)?);
    print_verdict(&result);
    let config = serde_json::json!({ "grid": grid, "tol_acc": args.tol_acc, "selected": s, "fallback": res.fallback });
    rec.finish(out, &config, args.common.seed)?;
    Ok(())
}

pub fn diag(study: DiagStudy) -> Result<()> {
    let (name, common) = match &study {
        DiagStudy::Loo { common, .. } => ("loo", common),
        DiagStudy::Group { common, .. } => ("group", common),
        DiagStudy::Epsilon { common, .. } => ("epsilon", common),
        DiagStudy::Flip { common, .. } => ("flip", common),
    };
    let mut rec = RunRecorder::start(&format!("diag-{name}"));
    let (splits, l2) = load_prepared(common, &mut rec)?;
    let ctx = StudyContext::new(&splits.train, &splits.val, common.notion, l2)?;
    let seed = common.seed;
    let (report, params): (StudyReport, serde_json::Value) = match &study {
        DiagStudy::Loo { n, .. } => (ctx.loo(*n, seed)?, serde_json::json!({ "n": n })),
        DiagStudy::Group { size, groups, .. } => (
            ctx.group(*size, *groups, seed)?,
            serde_json::json!({ "size": size, "groups": groups }),
        ),
        DiagStudy::Epsilon { n, epsilons, .. } => (
            ctx.epsilon(*n, epsilons, seed)?,
            serde_json::json!({ "n": n, "epsilons": epsilons }),
        ),
        DiagStudy::Flip { n, .. } => (ctx.flip(*n, seed)?, serde_json::json!({ "n": n })),
    };
    rec.output(write_text(&common.out.join(format!("{name}.csv")), &report.to_csv())?);
    rec.output(write_json(&common.out.join(format!("{name}_summary.json")), &report.summary)?);
    let rho = |v: Option<f64>| v.map_or("n/a".to_string(), |r| format!("{r:.4}"));
    let s = &report.summary;
    println!(
        "{name}: {} records, {} failed retrains, pearson util {} fair {}",
        report.records.len(),
        s.failed,
        rho(s.util.pearson),
        rho(s.fair.pearson)
    );
    let config = serde_json::json!({ "study": name, "notion": common.notion, "l2": l2, "params": params });
    rec.finish(&common.out, &config, seed)?;
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut rec = RunRecorder::start("synth");
    let cfg = SynthConfig {
        n_train: args.n_train,
        n_val: args.n_val,
        n_test: args.n_test,
        n_features: args.n_features,
        label_bias: args.label_bias,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let splits = synth::prepared(&cfg)?;
    rec.outputs(write_prepared(&args.out, &splits)?);
    println!(
        "synthetic: train {} / val {} / test {}, {} features",
        splits.train.len(),
        splits.val.len(),
        splits.test.len(),
        splits.metadata.n_features
    );
    rec.finish(&args.out, &serde_json::to_value(&cfg)?, cfg.seed)?;
    Ok(())
}
