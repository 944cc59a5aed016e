//! Command-line interface. Each subcommand reads files written by the
//! previous stage and writes its own outputs into `--out`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::covariance::{sample_cov, theoretical_penalties, to_correlation, Axis};
use crate::data::{
    load_metadata, load_tensor, load_wide_tensor, residualize, save_tensor, Attribute, DataError, ReplicateTensor,
    ResidualTensor, TensorSchema, WordFilter, WordMetadata,
};
use crate::glasso::{glasso, kkt_certificate, GlassoError, SolverConfig, ZERO_TOL};
use crate::graphs::{
    cluster_cut_weights, edge_fraction_by_group, graph_from_matrix, graph_from_precision, graph_metrics,
    graph_set_ops, grouping_from_metadata, mean_abs_pearson_by_group, supernode_graph, top_k_edges, GraphError,
    Grouping, LabeledGraph,
};
use crate::matrix::{MatrixError, SymMatrix};
use crate::nodewise::{mb_edges, nodewise, threshold_precision, EdgeRule, NodewiseError};
use crate::simulate::{make_factor_labeled, sample_matrix_normal, FactorKind, FactorSpec, MeanOptions, SimulateError};
use crate::format::fmt_f64;

#[derive(Debug, Parser)]
#[command(name = "pitchgraph", version, about = "Sparse word and time graphs from replicated pitch contours")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a matrix-normal replicate tensor with known factors.
    Simulate(SimulateArgs),
    /// Subtract per-speaker trial means.
    Residualize(ResidualizeArgs),
    /// Word or time Gram and correlation matrices.
    Cov(CovArgs),
    /// Sparse precision estimates, graphs and edge lists.
    Estimate(EstimateArgs),
    /// Tables computed on estimated graphs.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory, created if missing.
    #[arg(long, env = "PITCHGRAPH_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Tensor CSV (`speaker,word,trial,time,value`).
    #[arg(long)]
    pub input: PathBuf,
    /// Read the wide layout `speaker,word,trial,t1,...,tN` instead.
    #[arg(long)]
    pub wide: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 93)]
    pub words: usize,
    #[arg(long, default_value_t = 19)]
    pub times: usize,
    #[arg(long, default_value_t = 20)]
    pub speakers: usize,
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    /// Word factor: identity, ar1:RHO, banded:BW:DECAY,
    /// banded-precision:BW:DECAY or block:S1,S2,...:CORR.
    #[arg(long, default_value = "banded:1:0.5")]
    pub word_factor: FactorKind,
    /// Time factor, same forms as --word-factor.
    #[arg(long, default_value = "ar1:0.5")]
    pub time_factor: FactorKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Constant added to every value.
    #[arg(long, default_value_t = 0.0)]
    pub baseline: f64,
    /// Standard deviation of per-speaker constant offsets.
    #[arg(long, default_value_t = 0.0)]
    pub speaker_offset_sd: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ResidualizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Word metadata CSV.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Keep words with an attribute value, e.g. `vowel_length=long`.
    #[arg(long, requires = "metadata")]
    pub filter: Option<WordFilter>,
}

#[derive(Debug, Args)]
pub struct CovArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = AxisArg::Word)]
    pub axis: AxisArg,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Word,
    Time,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Word => Axis::Word,
            AxisArg::Time => Axis::Time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Glasso,
    Nodewise,
    Both,
}

/// An explicit penalty or `theory`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Theory,
    Value(f64),
}

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "theory" {
            return Ok(LambdaArg::Theory);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaArg::Value(v)),
            _ => Err(format!("expected a nonnegative number or `theory`, got `{s}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = AxisArg::Word)]
    pub axis: AxisArg,
    /// Penalty, or `theory` for the sample-size formula.
    #[arg(long, default_value = "theory")]
    pub lambda: LambdaArg,
    /// Effective number of independent time points.
    #[arg(long)]
    pub n_eff_t: Option<usize>,
    /// Drop edges with |θ_ij| below this value.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Threshold for the nodewise graph; defaults to --threshold.
    #[arg(long)]
    pub nodewise_threshold: Option<f64>,
    /// Keep only the K strongest edges instead of thresholding.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Glasso)]
    pub method: Method,
    /// Penalize the diagonal of the precision matrix as well.
    #[arg(long)]
    pub penalize_diagonal: bool,
    /// Glasso convergence tolerance on the mean absolute change of W.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_sweeps: usize,
    /// Attribute used to cluster vertices in DOT output (word axis).
    #[arg(long, requires = "metadata")]
    pub group_by: Option<Attribute>,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Analysis {
    Fractions,
    PearsonMeans,
    Cut,
    Supernode,
    Metrics,
    Setops,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Graph JSON written by `estimate`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Second graph JSON, for `setops`.
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// Matrix (CSV or JSON) for `metrics`.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Grouping attribute for fractions, pearson-means, cut and supernode.
    #[arg(long)]
    pub attribute: Option<Attribute>,
    /// CSV `label,cluster` used by `cut` instead of --attribute.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Analyses to run.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub analysis: Vec<Analysis>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<GlassoError> for CliError {
    fn from(e: GlassoError) -> Self {
        match e {
            GlassoError::NotPositiveDefinite | GlassoError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            GlassoError::Matrix(m) => m.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<NodewiseError> for CliError {
    fn from(e: NodewiseError) -> Self {
        match e {
            NodewiseError::SingularResidual { .. } | NodewiseError::NoConvergence { .. } => {
                CliError::Numerical(e.to_string())
            }
            NodewiseError::Matrix(m) => m.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Residualize(a) => cmd_residualize(&a),
        Command::Cov(a) => cmd_cov(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Analyze(a) => cmd_analyze(&a),
    }
}

fn out_dir(out: &OutArg) -> Result<&Path> {
    std::fs::create_dir_all(&out.out)?;
    Ok(&out.out)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json_value(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_matrix(dir: &Path, stem: &str, m: &SymMatrix) -> Result<()> {
    m.write_csv(create(dir, &format!("{stem}.csv"))?)?;
    m.write_json(create(dir, &format!("{stem}.json"))?)?;
    Ok(())
}

fn write_graph(dir: &Path, stem: &str, g: &LabeledGraph) -> Result<()> {
    g.write_edge_csv(create(dir, &format!("edges_{stem}.csv"))?)?;
    g.write_json(dir.join(format!("graph_{stem}.json")))?;
    std::fs::write(dir.join(format!("graph_{stem}.dot")), g.to_dot(stem))?;
    Ok(())
}

fn load_input(input: &InputArgs) -> Result<ReplicateTensor> {
    Ok(if input.wide {
        load_wide_tensor(&input.input)?
    } else {
        load_tensor(&input.input, &TensorSchema::default())?
    })
}

fn support_pairs(m: &SymMatrix) -> Result<Vec<[String; 2]>> {
    let inv = m
        .entries()
        .clone()
        .cholesky()
        .ok_or_else(|| CliError::Numerical("factor is not positive definite".into()))?
        .inverse();
    let labels = m.labels();
    Ok((0..m.dim())
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .filter(|&(i, j)| inv[(i, j)].abs() >= ZERO_TOL)
        .map(|(i, j)| [labels[i].clone(), labels[j].clone()])
        .collect())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let dir = out_dir(&a.out)?;
    let words: Vec<String> = (1..=a.words).map(|i| format!("w{i}")).collect();
    let times: Vec<String> = (1..=a.times).map(|i| format!("t{i}")).collect();
    let b = make_factor_labeled(&FactorSpec::new(a.word_factor.clone(), a.words), words)?;
    let time = make_factor_labeled(&FactorSpec::new(a.time_factor.clone(), a.times), times)?;
    let mean = MeanOptions {
        baseline: a.baseline,
        speaker_offset_sd: a.speaker_offset_sd,
    };
    let x = sample_matrix_normal(&time, &b, a.speakers, a.trials, a.seed, mean)?;
    save_tensor(&x, dir.join("tensor.csv"))?;
    let truth = json!({
        "seed": a.seed,
        "A": time.to_json(),
        "B": b.to_json(),
        "supports": {
            "A": support_pairs(&time)?,
            "B": support_pairs(&b)?,
        },
    });
    write_json_value(dir, "truth.json", &truth)?;
    Ok(())
}

pub fn cmd_residualize(a: &ResidualizeArgs) -> Result<()> {
    let dir = out_dir(&a.out)?;
    let x = load_input(&a.input)?;
    save_tensor(residualize(&x).tensor(), dir.join("residuals.csv"))?;
    Ok(())
}

/// Residualized input restricted to the selected words. Returns the
/// metadata too, with warnings for metadata rows absent from the tensor.
fn prepare(input: &InputArgs, select: &SelectArgs) -> Result<(ResidualTensor, Option<WordMetadata>, Vec<String>)> {
    let resid = residualize(load_input(input)?);
    let mut warnings = Vec::new();
    let Some(path) = &select.metadata else {
        return Ok((resid, None, warnings));
    };
    let meta = load_metadata(path)?;
    let unused = meta.check_coverage(resid.word_ids())?;
    if !unused.is_empty() {
        warnings.push(format!("metadata words not in tensor: {}", unused.join(", ")));
    }
    let resid = match &select.filter {
        Some(f) => resid.subset_words(&meta, f)?,
        None => resid,
    };
    Ok((resid, Some(meta), warnings))
}

pub fn cmd_cov(a: &CovArgs) -> Result<()> {
    let dir = out_dir(&a.out)?;
    let (resid, _, _) = prepare(&a.input, &a.select)?;
    let axis = Axis::from(a.axis);
    let gram = sample_cov(&resid, axis)?;
    write_matrix(dir, &format!("gram_{axis}"), &gram)?;
    write_matrix(dir, &format!("corr_{axis}"), &to_correlation(&gram)?)?;
    Ok(())
}

fn extract(theta: &SymMatrix, gamma: &SymMatrix, tau: f64, top_k: Option<usize>, warnings: &mut Vec<String>) -> Result<LabeledGraph> {
    Ok(match top_k {
        Some(k) => {
            let top = top_k_edges(theta, Some(gamma), k)?;
            if top.not_enough_edges {
                warnings.push(format!("only {} nonzero edges available for top-{k}", top.graph.n_edges()));
            }
            top.graph
        }
        None => graph_from_precision(theta, gamma, tau)?,
    })
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    if !(a.threshold >= 0.0) || a.nodewise_threshold.is_some_and(|t| !(t >= 0.0)) {
        return Err(CliError::Validation("thresholds must be nonnegative".into()));
    }
    let dir = out_dir(&a.out)?;
    let (resid, meta, mut warnings) = prepare(&a.input, &a.select)?;
    let shape = resid.shape();
    let axis = Axis::from(a.axis);

    let penalties = theoretical_penalties(
        shape.n_words,
        shape.n_speakers,
        shape.n_trials,
        a.n_eff_t.unwrap_or(shape.n_times),
    )?;
    let (lambda, source) = match (a.lambda, axis) {
        (LambdaArg::Value(v), _) => (v, "explicit"),
        (LambdaArg::Theory, Axis::Word) => (penalties.lambda_a, "theory"),
        (LambdaArg::Theory, Axis::Time) => match a.n_eff_t {
            Some(_) => (penalties.lambda_b, "theory"),
            None => {
                return Err(CliError::Validation(
                    "--lambda theory on the time axis requires --n-eff-t".into(),
                ))
            }
        },
    };

    let gram = sample_cov(&resid, axis)?;
    let gamma = to_correlation(&gram)?;
    write_matrix(dir, "gram", &gram)?;
    write_matrix(dir, "gamma", &gamma)?;

    let grouping: Option<Grouping> = match (a.group_by, &meta, axis) {
        (Some(attr), Some(m), Axis::Word) => Some(grouping_from_metadata(gamma.labels(), m, attr)?),
        (Some(_), _, Axis::Time) => {
            warnings.push("--group-by applies to the word axis only".into());
            None
        }
        _ => None,
    };
    let finish = |g: LabeledGraph| -> Result<LabeledGraph> {
        Ok(match &grouping {
            Some(gr) => g.with_groups(gr)?,
            None => g,
        })
    };

    let cfg = SolverConfig {
        tol: a.tol,
        max_sweeps: a.max_sweeps,
        penalize_diagonal: a.penalize_diagonal,
        ..SolverConfig::default()
    };
    let mut report = json!({
        "axis": axis,
        "design": {
            "n_speakers": shape.n_speakers,
            "n_words": shape.n_words,
            "n_trials": shape.n_trials,
            "n_times": shape.n_times,
        },
        "dim": gamma.dim(),
        "lambda": lambda,
        "lambda_source": source,
        "penalties": {
            "lambda_a": penalties.lambda_a,
            "lambda_b": a.n_eff_t.map(|_| penalties.lambda_b),
            "n_eff_t": a.n_eff_t,
            "reference_lambda_a": penalties.reference_lambda_a(),
        },
        "threshold": a.threshold,
        "top_k": a.top_k,
    });

    let mut graphs = Vec::new();
    if matches!(a.method, Method::Glasso | Method::Both) {
        let est = glasso(&gamma, lambda, &cfg)?;
        if !est.converged {
            warnings.push(format!(
                "glasso did not converge in {} sweeps (last change {:e})",
                est.iterations, est.last_change
            ));
        }
        let g = finish(extract(&est.theta, &gamma, a.threshold, a.top_k, &mut warnings)?)?;
        write_matrix(dir, "theta_glasso", &est.theta)?;
        write_matrix(dir, "sigma_glasso", &est.sigma)?;
        write_graph(dir, "glasso", &g)?;
        let mut r = serde_json::to_value(est.report())?;
        r["kkt_certificate"] = json!(kkt_certificate(&gamma, &est)?);
        r["nonzero_edges"] = json!(est.edge_count());
        r["edges"] = json!(g.n_edges());
        report["glasso"] = r;
        graphs.push(g);
    }
    if matches!(a.method, Method::Nodewise | Method::Both) {
        let tau = a.nodewise_threshold.unwrap_or(a.threshold);
        let mut fit = nodewise(&gamma, lambda, &cfg)?;
        fit.threshold = tau;
        if !fit.unconverged.is_empty() {
            warnings.push(format!("nodewise lasso did not converge for: {}", fit.unconverged.join(", ")));
        }
        let g = finish(extract(&fit.theta, &gamma, tau, a.top_k, &mut warnings)?)?;
        write_matrix(dir, "theta_nodewise", &fit.theta)?;
        write_matrix(dir, "theta_nodewise_thresholded", &threshold_precision(&fit.theta, tau)?)?;
        write_graph(dir, "nodewise", &g)?;
        let mut r = serde_json::to_value(fit.report())?;
        r["mb_or_edges"] = json!(mb_edges(&fit, EdgeRule::Or).len());
        r["mb_and_edges"] = json!(mb_edges(&fit, EdgeRule::And).len());
        r["edges"] = json!(g.n_edges());
        report["nodewise"] = r;
        graphs.push(g);
    }
    if let [g1, g2] = graphs.as_slice() {
        let ops = graph_set_ops(g1, g2)?;
        ops.intersection.write_edge_csv(create(dir, "edges_intersection.csv")?)?;
        ops.only_first.write_edge_csv(create(dir, "edges_glasso_only.csv")?)?;
        ops.only_second.write_edge_csv(create(dir, "edges_nodewise_only.csv")?)?;
        report["comparison"] = json!({
            "intersection": ops.intersection.n_edges(),
            "glasso_only": ops.only_first.n_edges(),
            "nodewise_only": ops.only_second.n_edges(),
        });
    }
    report["warnings"] = json!(warnings);
    write_json_value(dir, "report.json", &report)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn read_partition(path: &Path) -> Result<Grouping> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Grouping::new();
    for rec in rdr.records() {
        let rec = rec?;
        match (rec.get(0), rec.get(1)) {
            (Some(label), Some(cluster)) => {
                out.insert(label.trim().to_string(), cluster.trim().to_string());
            }
            _ => return Err(CliError::Validation(format!("{}: expected `label,cluster` rows", path.display()))),
        }
    }
    Ok(out)
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let dir = out_dir(&a.out)?;
    let need = |p: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
        p.clone()
            .ok_or_else(|| CliError::Validation(format!("this analysis requires --{what}")))
    };
    let graph = a.graph.as_ref().map(LabeledGraph::read_json).transpose()?;
    let meta = a.metadata.as_ref().map(load_metadata).transpose()?;
    let grouping = |g: &LabeledGraph| -> Result<Grouping> {
        let (Some(m), Some(attr)) = (&meta, a.attribute) else {
            return Err(CliError::Validation("this analysis requires --metadata and --attribute".into()));
        };
        Ok(grouping_from_metadata(g.vertices(), m, attr)?)
    };
    let graph_or_err = || graph.as_ref().ok_or_else(|| CliError::Validation("this analysis requires --graph".into()));

    for analysis in &a.analysis {
        match analysis {
            Analysis::Fractions => {
                let g = graph_or_err()?;
                let t = edge_fraction_by_group(g, &grouping(g)?)?;
                t.write_csv(create(dir, "fractions.csv")?, |c| c.fraction().map(fmt_f64))?;
            }
            Analysis::PearsonMeans => {
                let g = graph_or_err()?;
                let t = mean_abs_pearson_by_group(g, &grouping(g)?)?;
                t.write_csv(create(dir, "pearson_means.csv")?, |v| Some(fmt_f64(*v)))?;
            }
            Analysis::Cut => {
                let g = graph_or_err()?;
                let partition = match &a.partition {
                    Some(p) => read_partition(p)?,
                    None => grouping(g)?,
                };
                let cut = cluster_cut_weights(g, &partition)?;
                let mut w = csv::Writer::from_writer(create(dir, "cut.csv")?);
                w.write_record(["within", "between"])?;
                w.write_record([fmt_f64(cut.within), fmt_f64(cut.between)])?;
                w.flush()?;
            }
            Analysis::Supernode => {
                let g = graph_or_err()?;
                let s = supernode_graph(g, &grouping(g)?)?;
                write_graph(dir, "supernode", &s)?;
            }
            Analysis::Metrics => {
                let m = SymMatrix::load(need(&a.matrix, "matrix")?)?;
                let g = match &graph {
                    Some(g) => g.clone(),
                    None => graph_from_matrix(&m, 0.0)?,
                };
                let metrics = graph_metrics(&m, &g)?;
                let mut w = csv::Writer::from_writer(create(dir, "metrics.csv")?);
                w.write_record(["avg_degree", "n_edges", "trace_over_frobenius", "spectral_norm"])?;
                w.write_record([
                    fmt_f64(metrics.avg_degree),
                    metrics.n_edges.to_string(),
                    fmt_f64(metrics.trace_over_frobenius),
                    fmt_f64(metrics.spectral_norm),
                ])?;
                w.flush()?;
            }
            Analysis::Setops => {
                let g1 = graph_or_err()?;
                let g2 = LabeledGraph::read_json(need(&a.other, "other")?)?;
                let ops = graph_set_ops(g1, &g2)?;
                ops.intersection.write_edge_csv(create(dir, "setops_intersection.csv")?)?;
                ops.only_first.write_edge_csv(create(dir, "setops_only_first.csv")?)?;
                ops.only_second.write_edge_csv(create(dir, "setops_only_second.csv")?)?;
            }
        }
    }
    Ok(())
}
