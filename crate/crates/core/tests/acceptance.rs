//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use pitchgraph::covariance::{theoretical_penalties, to_correlation, word_sample_cov};
use pitchgraph::data::residualize;
use pitchgraph::glasso::{glasso, kkt_certificate, SolverConfig};
use pitchgraph::graphs::{
    cluster_cut_weights, edge_fraction_by_group, graph_from_precision, graph_metrics, graph_set_ops,
    mean_abs_pearson_by_group, supernode_graph, top_k_edges, Edge, Grouping, LabeledGraph,
};
use pitchgraph::matrix::{MatrixKind, SymMatrix};
use pitchgraph::nodewise::{lasso_node, mb_edges, nodewise, EdgeRule};
use pitchgraph::simulate::{
    make_factor_labeled, oracle_glasso, random_correlation, sample_matrix_normal, FactorKind, FactorSpec, MeanOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_pitchgraph");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn penalty_formula() -> Outcome {
    let p = theoretical_penalties(93, 20, 4, 19).unwrap();
    // sqrt(ln 93 / 7440) to 40 digits: 0.02468238971378104846782676924894388264386
    let formatted = format!("{:.15e}", p.lambda_a);
    let digits_ok = formatted == "2.468238971378105e-2";

    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let est = dir.path().join("est");
    let run = |args: &[&str]| Command::new(BIN).args(args).output().unwrap();
    let s = run(&[
        "simulate",
        "--words",
        "93",
        "--times",
        "19",
        "--speakers",
        "20",
        "--trials",
        "4",
        "--word-factor",
        "identity",
        "--time-factor",
        "identity",
        "--out",
        sim.to_str().unwrap(),
    ]);
    let e = run(&[
        "estimate",
        "--input",
        sim.join("tensor.csv").to_str().unwrap(),
        "--axis",
        "word",
        "--lambda",
        "theory",
        "--out",
        est.to_str().unwrap(),
    ]);
    let report: serde_json::Value = if s.status.success() && e.status.success() {
        serde_json::from_str(&std::fs::read_to_string(est.join("report.json")).unwrap()).unwrap()
    } else {
        serde_json::Value::Null
    };
    let cli_lambda = report["penalties"]["lambda_a"].as_f64();
    let cli_reference = report["penalties"]["reference_lambda_a"].as_f64();
    let cli_ok = cli_lambda == Some(p.lambda_a) && report["lambda"].as_f64() == Some(p.lambda_a) && cli_reference == Some(0.03);
    outcome(
        digits_ok && cli_ok,
        format!("lambda_a = {formatted}, report lambda_a = {cli_lambda:?}, reference = {cli_reference:?}"),
    )
}

fn glasso_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for k in 0..50 {
        let dim = 3 + k % 18;
        let g = random_correlation(dim, &mut rng);
        let est = glasso(&g, 0.0, &SolverConfig::default()).unwrap();
        let inv = g.entries().clone().try_inverse().unwrap();
        worst = worst.max(max_abs(&(est.theta.entries() - &inv)) / max_abs(&inv));
    }
    outcome(worst <= 1e-7, format!("max relative error {worst:.3e} over 50 matrices (bound 1e-7)"))
}

fn glasso_kkt() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    let mut all_converged = true;
    for k in 0..100 {
        let lambda = [0.05, 0.1, 0.3, 0.5][k % 4];
        let dim = 3 + (k / 4) % 18;
        let g = random_correlation(dim, &mut rng);
        let est = glasso(&g, lambda, &cfg).unwrap();
        all_converged &= est.converged;
        worst = worst.max(kkt_certificate(&g, &est).unwrap());
    }
    let kkt_ok = all_converged && worst <= 10.0 * cfg.tol;

    let mut sparse_dev = 0.0_f64;
    let mut diag_pen_dev = 0.0_f64;
    for _ in 0..20 {
        let dim = rng.random_range(3..=12);
        let g = random_correlation(dim, &mut rng);
        let lambda = g.max_abs_off_diagonal() + rng.random_range(0.0..0.2);
        let target = DMatrix::identity(dim, dim) / (1.0 + lambda);
        let est = glasso(&g, lambda, &cfg).unwrap();
        sparse_dev = sparse_dev.max(max_abs(&(est.theta.entries() - &target)));
        let pen = SolverConfig {
            penalize_diagonal: true,
            ..cfg
        };
        let est = glasso(&g, lambda, &pen).unwrap();
        diag_pen_dev = diag_pen_dev.max(max_abs(&(est.theta.entries() - &target)));
    }
    let sparse_ok = sparse_dev <= 1e-9;
    outcome(
        kkt_ok && sparse_ok,
        format!(
            "max KKT {worst:.3e} (bound {:.0e}), converged {all_converged}; full-sparsity max|Θ − I/(1+λ)| = {sparse_dev:.3e} \
             (bound 1e-9; with a penalized diagonal {diag_pen_dev:.3e})",
            10.0 * cfg.tol
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    for k in 0..100 {
        let lambda = [0.0, 0.05, 0.2, 1.0][k % 4];
        let g = random_correlation(3, &mut rng);
        let o = oracle_glasso(&g, lambda).unwrap();
        let e = glasso(&g, lambda, &SolverConfig::default()).unwrap();
        worst = worst.max(max_abs(&(o.entries() - e.theta.entries())));
    }
    outcome(worst <= 1e-6, format!("max difference {worst:.3e} over 100 instances (bound 1e-6)"))
}

fn nodewise_refit() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inv_err = 0.0_f64;
    for k in 0..18 {
        let g = random_correlation(3 + k, &mut rng);
        let fit = nodewise(&g, 0.0, &cfg).unwrap();
        let inv = g.entries().clone().try_inverse().unwrap();
        inv_err = inv_err.max(max_abs(&(fit.theta.entries() - inv)));
    }
    let mut kkt = 0.0_f64;
    for lambda in [0.0, 0.05, 0.1, 0.3] {
        for dim in [3, 8, 20] {
            let g = random_correlation(dim, &mut rng);
            for i in 0..dim {
                kkt = kkt.max(lasso_node(&g, i, lambda, &cfg).unwrap().kkt_residual);
            }
        }
    }
    outcome(
        inv_err <= 1e-8 && kkt <= 10.0 * cfg.inner_tol,
        format!(
            "max |Θ − Γ⁻¹| = {inv_err:.3e} (bound 1e-8); max node KKT {kkt:.3e} (bound {:.0e})",
            10.0 * cfg.inner_tol
        ),
    )
}

fn f1(est: &BTreeSet<(usize, usize)>, truth: &BTreeSet<(usize, usize)>) -> f64 {
    let tp = est.intersection(truth).count() as f64;
    2.0 * tp / (est.len() + truth.len()) as f64
}

fn recovery() -> Outcome {
    let (n_w, n_t, n_s, n_r, seed) = (93, 19, 20, 4, 1);
    let b = make_factor_labeled(
        &FactorSpec::new(
            FactorKind::Banded {
                bandwidth: 1,
                decay: 0.5,
            },
            n_w,
        ),
        labels("w", n_w),
    )
    .unwrap();
    let a = make_factor_labeled(&FactorSpec::new(FactorKind::Ar1 { rho: 0.5 }, n_t), labels("t", n_t)).unwrap();
    let inv = b.entries().clone().try_inverse().unwrap();
    let pairs = || (0..n_w).flat_map(|j| (0..j).map(move |i| (i, j)));
    let truth: BTreeSet<_> = pairs().filter(|&(i, j)| inv[(i, j)].abs() >= 1e-10).collect();

    let x = sample_matrix_normal(&a, &b, n_s, n_r, seed, MeanOptions::default()).unwrap();
    let gamma = to_correlation(&word_sample_cov(&residualize(&x)).unwrap()).unwrap();
    let lambda = theoretical_penalties(n_w, n_s, n_r, n_t).unwrap().lambda_a;
    let est = glasso(&gamma, lambda, &SolverConfig::default()).unwrap();
    let g_edges: BTreeSet<_> = pairs().filter(|&(i, j)| est.theta.get(i, j).abs() >= 1e-10).collect();
    let fit = nodewise(&gamma, lambda, &SolverConfig::default()).unwrap();
    let n_edges = mb_edges(&fit, EdgeRule::Or);
    let (fg, fnw) = (f1(&g_edges, &truth), f1(&n_edges, &truth));
    outcome(
        fg >= 0.8 && (fg - fnw).abs() <= 0.1,
        format!(
            "banded(1, 0.5) word factor, ar1(0.5) time factor, seed {seed}, λ = {lambda:.6}: glasso F1 {fg:.3} \
             ({} edges vs {} true; bound 0.8), nodewise F1 {fnw:.3} (|Δ| bound 0.1)",
            g_edges.len(),
            truth.len()
        ),
    )
}

fn residualization() -> Outcome {
    let spec = |k, d, p: &str| make_factor_labeled(&FactorSpec::new(k, d), labels(p, d)).unwrap();
    let a = spec(FactorKind::Ar1 { rho: 0.3 }, 6, "t");
    let b = spec(FactorKind::Identity, 5, "w");
    let mean = MeanOptions {
        baseline: 120.0,
        speaker_offset_sd: 15.0,
    };
    let x = sample_matrix_normal(&a, &b, 4, 3, 7, mean).unwrap();
    let r = residualize(&x);
    let sh = r.shape();
    let mut worst = 0.0_f64;
    for s in 0..sh.n_speakers {
        for w in 0..sh.n_words {
            for t in 0..sh.n_times {
                let sum: f64 = (0..sh.n_trials).map(|k| r.tensor().get(s, w, k, t)).sum();
                let scale: f64 = (0..sh.n_trials).map(|k| x.get(s, w, k, t).abs()).sum();
                worst = worst.max(sum.abs() / scale);
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tensor.csv");
    pitchgraph::data::save_tensor(&x, &input).unwrap();
    let run = |inp: &std::path::Path, out: &str| {
        Command::new(BIN)
            .args(["residualize", "--input", inp.to_str().unwrap(), "--out"])
            .arg(dir.path().join(out))
            .status()
            .unwrap()
            .success()
    };
    let ok_runs = run(&input, "r1") && run(&dir.path().join("r1/residuals.csv"), "r2");
    let identical = ok_runs
        && std::fs::read(dir.path().join("r1/residuals.csv")).unwrap()
            == std::fs::read(dir.path().join("r2/residuals.csv")).unwrap();
    outcome(
        worst <= 1e-9 && identical,
        format!("max relative trial sum {worst:.3e} (bound 1e-9); CLI re-residualization byte-identical: {identical}"),
    )
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> LabeledGraph {
    let mut g = LabeledGraph::new(labels("v", n)).unwrap();
    for j in 0..n {
        for i in 0..j {
            if rng.random_bool(p) {
                let mut w = 0.0;
                while w == 0.0 {
                    w = rng.random_range(-128i32..=128) as f64 / 64.0;
                }
                let edge = Edge {
                    weight: w,
                    pearson: Some(rng.random_range(-1.0..1.0)),
                };
                g.add_edge(i, j, edge).unwrap();
            }
        }
    }
    g
}

fn random_grouping(rng: &mut ChaCha8Rng, g: &LabeledGraph) -> Grouping {
    let k = rng.random_range(1..=4);
    g.vertices()
        .iter()
        .map(|v| (v.clone(), format!("g{}", rng.random_range(0..k))))
        .collect()
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn analytics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let mut mean_err = 0.0_f64;
    for trial in 0..50 {
        let n = rng.random_range(2..=12);
        let g = random_graph(&mut rng, n, 0.45);
        let grouping = random_grouping(&mut rng, &g);
        let grp: Vec<&str> = g.vertices().iter().map(|v| grouping[v].as_str()).collect();

        // Exhaustive pass over all vertex pairs.
        let mut edges: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut possible: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut pearson: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
        let (mut within, mut between) = (0.0, 0.0);
        for j in 0..n {
            for i in 0..j {
                let key = unordered(grp[i], grp[j]);
                *possible.entry(key.clone()).or_default() += 1;
                if let Some(e) = g.edge(i, j) {
                    *edges.entry(key.clone()).or_default() += 1;
                    let c = pearson.entry(key.clone()).or_insert((0.0, 0));
                    c.0 += e.pearson.unwrap().abs();
                    c.1 += 1;
                    if grp[i] == grp[j] {
                        within += e.weight.abs();
                    } else {
                        between += e.weight.abs();
                    }
                }
            }
        }

        let fractions = edge_fraction_by_group(&g, &grouping).unwrap();
        for ((a, b), cell) in fractions.cells() {
            let key = (a.to_string(), b.to_string());
            let expect = (edges.get(&key).copied().unwrap_or(0), possible.get(&key).copied().unwrap_or(0));
            if (cell.edges, cell.possible) != expect {
                failures.push(format!("graph {trial}: fraction cell {a}/{b}"));
            }
        }
        let values: BTreeSet<&str> = grp.iter().copied().collect();
        if fractions.cells().count() != values.len() * (values.len() + 1) / 2 {
            failures.push(format!("graph {trial}: fraction cell count"));
        }

        let means = mean_abs_pearson_by_group(&g, &grouping).unwrap();
        if means.cells().count() != pearson.len() {
            failures.push(format!("graph {trial}: pearson cell count"));
        }
        for (key, (sum, count)) in &pearson {
            match means.get(&key.0, &key.1) {
                Some(v) => mean_err = mean_err.max((v - sum / *count as f64).abs()),
                None => failures.push(format!("graph {trial}: missing pearson cell")),
            }
        }

        let cut = cluster_cut_weights(&g, &grouping).unwrap();
        let total: f64 = g.edges().map(|(_, e)| e.weight.abs()).sum();
        if cut.within != within || cut.between != between || cut.within + cut.between != total {
            failures.push(format!("graph {trial}: cut weights"));
        }

        let s = supernode_graph(&g, &grouping).unwrap();
        let expect: BTreeMap<(String, String), f64> = edges
            .iter()
            .filter(|((a, b), _)| a != b)
            .map(|(k, &c)| (k.clone(), c as f64))
            .collect();
        let got: BTreeMap<(String, String), f64> = s
            .edges()
            .map(|((i, j), e)| (unordered(&s.vertices()[i], &s.vertices()[j]), e.weight))
            .collect();
        if got != expect || s.vertices().iter().map(String::as_str).collect::<BTreeSet<_>>() != values {
            failures.push(format!("graph {trial}: supernode graph"));
        }
    }
    let pass = failures.is_empty() && mean_err <= 1e-12;
    outcome(
        pass,
        format!(
            "50 graphs; mismatches: {}; max mean |pearson| error {mean_err:.3e} (bound 1e-12)",
            if failures.is_empty() { "none".to_string() } else { failures.join("; ") }
        ),
    )
}

fn set_ops_and_top_k() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut identity_ok = true;
    for _ in 0..50 {
        let n = rng.random_range(2..=15);
        let (g1, g2) = (random_graph(&mut rng, n, 0.4), random_graph(&mut rng, n, 0.4));
        let ops = graph_set_ops(&g1, &g2).unwrap();
        identity_ok &= ops.intersection.n_edges() + ops.only_first.n_edges() == g1.n_edges();
        identity_ok &= ops.intersection.n_edges() + ops.only_second.n_edges() == g2.n_edges();
    }

    let n = 93;
    let mut theta = DMatrix::identity(n, n) * 4.0;
    for _ in 0..300 {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j {
            let w = rng.random_range(-0.5..0.5);
            theta[(i, j)] = w;
            theta[(j, i)] = w;
        }
    }
    let theta = SymMatrix::new(labels("w", n), MatrixKind::Precision, theta).unwrap();
    let gamma = SymMatrix::identity(labels("w", n), MatrixKind::Correlation).unwrap();
    let available = graph_from_precision(&theta, &gamma, 0.0).unwrap().n_edges();
    let top = top_k_edges(&theta, Some(&gamma), 70).unwrap();
    let kept_min = top.graph.edges().map(|(_, e)| e.weight.abs()).fold(f64::INFINITY, f64::min);
    let dropped_max = (0..n)
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .filter(|&(i, j)| !top.graph.has_edge(i, j))
        .map(|(i, j)| theta.get(i, j).abs())
        .fold(0.0, f64::max);
    let top_ok = available >= 70 && top.graph.n_edges() == 70 && !top.not_enough_edges && kept_min >= dropped_max;
    outcome(
        identity_ok && top_ok,
        format!(
            "set identity on 50 pairs: {identity_ok}; top-70 of {available} nonzeros kept {} edges",
            top.graph.n_edges()
        ),
    )
}

fn metrics_identity() -> Outcome {
    let id = SymMatrix::identity(labels("t", 19), MatrixKind::Correlation).unwrap();
    let g = LabeledGraph::new(labels("t", 19)).unwrap();
    let m = graph_metrics(&id, &g).unwrap();
    outcome(
        m.trace_over_frobenius == 19f64.sqrt() && m.spectral_norm == 1.0 && m.avg_degree == 0.0,
        format!(
            "tr/‖·‖_F = {:.17} (√19 = {:.17}), ‖·‖₂ = {}, avg degree {}",
            m.trace_over_frobenius,
            19f64.sqrt(),
            m.spectral_norm,
            m.avg_degree
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("penalty formula", penalty_formula),
        ("glasso λ=0 inverse", glasso_inverse),
        ("glasso KKT and full sparsity", glasso_kkt),
        ("glasso vs brute-force oracle", oracle_equivalence),
        ("nodewise refit and node KKT", nodewise_refit),
        ("synthetic support recovery", recovery),
        ("residualization invariants", residualization),
        ("graph analytics oracles", analytics_oracles),
        ("set operations and top-k", set_ops_and_top_k),
        ("metrics on the identity", metrics_identity),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:>2}. {name} ({:.2}s): {}",
            k + 1,
            start.elapsed().as_secs_f64(),
            out.detail
        );
        failed += usize::from(!out.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
