use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use monosindex::asymptotics::{asymptotic_cov_ese, asymptotic_cov_linear, asymptotic_cov_sse, LinearVariant};
use monosindex::estimators::{warm_start_pipeline, PipelineConfig};
use monosindex::kernel::BandwidthRule;
use monosindex::search::SearchOptions;
use monosindex::sim::{run_replications, summarize, ReplicationTable, SimConfig, SimulationSummary};
use monosindex::{EstimateResult, EstimatorKind, LinkFit, ModelSpec};
use serde_json::{json, Map, Value};

use crate::data::read_dataset;
use crate::error::CliError;
use crate::format::{g12, json_num, json_vec};
use crate::{Model, OutputFormat, Tuning};

fn pipeline_config(
    estimators: BTreeSet<EstimatorKind>,
    tuning: &Tuning,
    d: usize,
    seed: u64,
) -> Result<PipelineConfig, CliError> {
    if !(tuning.mu > 0.0 && tuning.mu.is_finite()) {
        return Err(CliError::Usage(format!("--mu must be positive, got {}", tuning.mu)));
    }
    let bandwidth = BandwidthRule::new(tuning.bw_const)
        .map_err(|_| CliError::Usage(format!("--bw-const must be positive, got {}", tuning.bw_const)))?;
    if tuning.starts == 0 {
        return Err(CliError::Usage("--starts must be at least 1".into()));
    }
    if tuning.max_evals < d + 1 {
        return Err(CliError::Usage(format!("--max-evals must be at least {}", d + 1)));
    }
    Ok(PipelineConfig {
        estimators,
        n_starts: tuning.starts,
        seed,
        mu: tuning.mu,
        bandwidth,
        search: SearchOptions { max_evals: tuning.max_evals, ..Default::default() },
    })
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn csv_finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 output")
}

fn write_row<I, S>(w: &mut csv::Writer<Vec<u8>>, row: I)
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).expect("in-memory writer");
}

fn indexed(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |j| format!("{prefix}_{j}"))
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// `(kind, size, intercept, slope)` of a link fit.
fn link_parts(link: &LinkFit) -> (&'static str, Option<usize>, Option<f64>, Option<f64>) {
    match link {
        LinkFit::Step(s) => ("step", Some(s.jump_count()), None, None),
        LinkFit::Spline(s) => ("spline", Some(s.knots().len()), None, None),
        LinkFit::Linear { intercept, slope } => ("linear", None, Some(*intercept), Some(*slope)),
        LinkFit::None => ("none", None, None, None),
    }
}

fn fit_report(r: &EstimateResult, format: OutputFormat) -> String {
    let (kind, size, intercept, slope) = link_parts(&r.link);
    match format {
        OutputFormat::Json => {
            let opt = |x: Option<f64>| x.map_or(Value::Null, json_num);
            to_json_text(&json!({
                "estimator": r.estimator.name(),
                "alpha_hat": json_vec(&r.alpha_hat),
                "criterion": json_num(r.criterion),
                "evals": r.evals,
                "converged": r.converged,
                "link": {
                    "kind": kind,
                    "size": size,
                    "intercept": opt(intercept),
                    "slope": opt(slope),
                    "summary": r.link.summary(),
                },
            }))
        }
        OutputFormat::Csv => {
            let d = r.alpha_hat.len();
            let mut w = csv_writer();
            let header = std::iter::once("estimator".to_string()).chain(indexed("alpha", d)).chain(
                ["criterion", "evals", "converged", "link", "link_size", "intercept", "slope"].map(String::from),
            );
            write_row(&mut w, header);
            let opt = |x: Option<f64>| x.map_or(String::new(), g12);
            let row =
                std::iter::once(r.estimator.name().to_string()).chain(r.alpha_hat.iter().map(|a| g12(*a))).chain([
                    g12(r.criterion),
                    r.evals.to_string(),
                    r.converged.to_string(),
                    kind.to_string(),
                    size.map_or(String::new(), |s| s.to_string()),
                    opt(intercept),
                    opt(slope),
                ]);
            write_row(&mut w, row);
            csv_finish(w)
        }
    }
}

pub fn fit(
    data: &Path,
    estimator: EstimatorKind,
    tuning: &Tuning,
    seed: u64,
    format: OutputFormat,
) -> Result<String, CliError> {
    let sample = read_dataset(data)?;
    let config = pipeline_config([estimator].into(), tuning, sample.d(), seed)?;
    let mut out = warm_start_pipeline(&sample, &config);
    let result = out.remove(&estimator).expect("requested estimator present").map_err(CliError::numerical)?;
    Ok(fit_report(&result, format))
}

pub struct SimulateArgs {
    pub model: Model,
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub estimators: Vec<EstimatorKind>,
    pub tuning: Tuning,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

fn model_spec(model: Model, d: usize) -> Result<ModelSpec, CliError> {
    match model {
        Model::CubicNormal => ModelSpec::cubic_normal(d).map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn model_name(model: Model) -> &'static str {
    match model {
        Model::CubicNormal => "cubic-normal",
    }
}

fn replications_csv(table: &ReplicationTable) -> String {
    let d = table.d;
    let mut w = csv_writer();
    let header = ["rep", "estimator"]
        .map(String::from)
        .into_iter()
        .chain(indexed("alpha", d))
        .chain(["criterion", "evals", "status", "message"].map(String::from));
    write_row(&mut w, header);
    for r in &table.records {
        let mut row = vec![r.rep.to_string(), r.estimator.name().to_string()];
        match &r.outcome {
            Ok(e) => {
                row.extend(e.alpha_hat.iter().map(|a| g12(*a)));
                row.extend([g12(e.criterion), e.evals.to_string(), "ok".into(), String::new()]);
            }
            Err(msg) => {
                row.extend(std::iter::repeat_n(String::new(), d + 2));
                row.extend(["failed".to_string(), msg.clone()]);
            }
        }
        write_row(&mut w, row);
    }
    csv_finish(w)
}

fn scaled_errors_csv(summary: &SimulationSummary) -> String {
    let mut w = csv_writer();
    write_row(&mut w, ["estimator", "rep", "scaled_error"]);
    for (kind, e) in &summary.estimators {
        for (rep, x) in e.success_reps.iter().zip(&e.scaled_errors) {
            write_row(&mut w, [kind.name().to_string(), rep.to_string(), g12(*x)]);
        }
    }
    csv_finish(w)
}

const BOX_FIELDS: [&str; 7] = ["min", "q1", "median", "q3", "max", "whisker_low", "whisker_high"];

fn summary_csv(summary: &SimulationSummary) -> String {
    let d = summary.d;
    let mut w = csv_writer();
    let cov_names = (0..d).flat_map(|i| (i..d).map(move |j| format!("ncov_{}_{}", i + 1, j + 1)));
    let header = ["estimator", "successes", "failures"]
        .map(String::from)
        .into_iter()
        .chain(indexed("mean", d))
        .chain(cov_names)
        .chain(BOX_FIELDS.map(|f| format!("scaled_error_{f}")))
        .chain(std::iter::once("scaled_error_outliers".to_string()));
    write_row(&mut w, header);
    for (kind, e) in &summary.estimators {
        let b = &e.boxplot;
        let row = [kind.name().to_string(), e.successes.to_string(), e.failures.to_string()]
            .into_iter()
            .chain(e.means.iter().map(|m| g12(*m)))
            .chain((0..d).flat_map(|i| (i..d).map(move |j| g12(e.scaled_cov[i][j]))))
            .chain([b.min, b.q1, b.median, b.q3, b.max, b.whisker_low, b.whisker_high].map(g12))
            .chain(std::iter::once(b.outliers.len().to_string()));
        write_row(&mut w, row);
    }
    csv_finish(w)
}

fn summary_json(args: &SimulateArgs, alpha0: &[f64], summary: &SimulationSummary) -> String {
    let mut per = Map::new();
    for (kind, e) in &summary.estimators {
        let b = &e.boxplot;
        let mut boxplot = Map::new();
        for (name, v) in BOX_FIELDS.iter().zip([b.min, b.q1, b.median, b.q3, b.max, b.whisker_low, b.whisker_high]) {
            boxplot.insert(name.to_string(), json_num(v));
        }
        boxplot.insert("outliers".into(), json_vec(&b.outliers));
        per.insert(
            kind.name().to_string(),
            json!({
                "successes": e.successes,
                "failures": e.failures,
                "means": json_vec(&e.means),
                "scaled_cov": Value::Array(e.scaled_cov.iter().map(|r| json_vec(r)).collect()),
                "scaled_error_boxplot": boxplot,
            }),
        );
    }
    to_json_text(&json!({
        "model": model_name(args.model),
        "n": args.n,
        "d": args.d,
        "reps": args.reps,
        "seed": args.seed,
        "alpha0": json_vec(alpha0),
        "config": {
            "mu": json_num(args.tuning.mu),
            "bw_const": json_num(args.tuning.bw_const),
            "starts": args.tuning.starts,
            "max_evals": args.tuning.max_evals,
        },
        "estimators": per,
    }))
}

fn summary_text(summary: &SimulationSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>5} {:>6}  {:<44} {:>14} {:>14}",
        "estim", "ok", "failed", "mean", "n*cov_11", "median_err"
    );
    for (kind, e) in &summary.estimators {
        let means: Vec<String> = e.means.iter().map(|m| format!("{m:.6}")).collect();
        let _ = writeln!(
            s,
            "{:<8} {:>5} {:>6}  {:<44} {:>14.6} {:>14.6}",
            kind.name(),
            e.successes,
            e.failures,
            means.join(" "),
            e.scaled_cov[0][0],
            e.boxplot.median
        );
    }
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&format!("cannot write {}", path.display()), e))
}

pub fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let spec = model_spec(args.model, args.d)?;
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    if args.n < args.d + 1 {
        return Err(CliError::Usage(format!("--n must be at least d + 1 = {}", args.d + 1)));
    }
    if args.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let estimators: BTreeSet<EstimatorKind> = args.estimators.iter().copied().collect();
    if estimators.is_empty() {
        return Err(CliError::Usage("--estimators is empty".into()));
    }
    let pipeline = pipeline_config(estimators, &args.tuning, args.d, args.seed)?;
    let config =
        SimConfig { spec: spec.clone(), n: args.n, reps: args.reps, seed: args.seed, pipeline, workers: args.workers };
    let table = run_replications(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!("{} replications in {:.1} s", args.reps, table.wall_time.as_secs_f64());

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(&format!("cannot create {}", dir.display()), e))?;
        write_file(dir, "replications.csv", &replications_csv(&table))?;
    }
    let summary = summarize(&table, spec.alpha0(), args.n).map_err(CliError::numerical)?;
    if let Some(dir) = &args.out {
        write_file(dir, "scaled_errors.csv", &scaled_errors_csv(&summary))?;
        write_file(dir, "summary.csv", &summary_csv(&summary))?;
        write_file(dir, "summary.json", &summary_json(args, spec.alpha0(), &summary))?;
    }
    Ok(summary_text(&summary))
}

pub fn asymptotics(
    model: Model,
    d: usize,
    estimator: EstimatorKind,
    variant: LinearVariant,
    mc: usize,
    seed: u64,
    format: OutputFormat,
) -> Result<String, CliError> {
    let spec = model_spec(model, d)?;
    if mc < 2 {
        return Err(CliError::Usage("--mc must be at least 2".into()));
    }
    let (cov, c, variant_name) = match estimator {
        EstimatorKind::Sse => (asymptotic_cov_sse(&spec, mc, seed).map_err(CliError::numerical)?, None, None),
        EstimatorKind::Ese | EstimatorKind::Plse => {
            (asymptotic_cov_ese(&spec, mc, seed).map_err(CliError::numerical)?, None, None)
        }
        EstimatorKind::Linear => {
            let l = asymptotic_cov_linear(&spec, mc, seed, variant).map_err(CliError::numerical)?;
            let name = match variant {
                LinearVariant::PaperFormula => "paper_formula",
                LinearVariant::Sandwich => "sandwich",
            };
            (l.cov, Some(l.c), Some(name))
        }
        EstimatorKind::Lse | EstimatorKind::Mre => {
            return Err(CliError::Usage(format!(
                "no limiting covariance is available for {}; choose sse, ese, plse or linear",
                estimator.name()
            )))
        }
    };
    let rows = cov.to_rows();
    Ok(match format {
        OutputFormat::Json => to_json_text(&json!({
            "model": model_name(model),
            "estimator": estimator.name(),
            "variant": variant_name,
            "mc": mc,
            "seed": seed,
            "cov": Value::Array(rows.iter().map(|r| json_vec(r)).collect()),
            "c": c.map_or(Value::Null, json_num),
        })),
        OutputFormat::Csv => {
            let mut w = csv_writer();
            write_row(&mut w, ["quantity", "i", "j", "value"]);
            for (i, r) in rows.iter().enumerate() {
                for (j, v) in r.iter().enumerate() {
                    write_row(&mut w, ["cov".to_string(), (i + 1).to_string(), (j + 1).to_string(), g12(*v)]);
                }
            }
            if let Some(c) = c {
                write_row(&mut w, ["c".to_string(), String::new(), String::new(), g12(c)]);
            }
            csv_finish(w)
        }
    })
}
