use std::collections::BTreeMap;

use nalgebra::DMatrix;
use pitchgraph::glasso::{glasso, glasso_path, objective, path_monotonicity_violations, SolverConfig};
use pitchgraph::graphs::{
    cluster_cut_weights, edge_fraction_by_group, graph_from_precision, mean_abs_pearson_by_group, Grouping,
};
use pitchgraph::matrix::SymMatrix;
use pitchgraph::nodewise::{mb_edges, nodewise, EdgeRule};
use pitchgraph::simulate::{make_factor, random_correlation, sample_matrix_normal, FactorKind, FactorSpec, MeanOptions};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corr(seed: u64, dim: usize) -> SymMatrix {
    random_correlation(dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn perm(seed: u64, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    p
}

fn grouping(g: &SymMatrix, seed: u64) -> Grouping {
    let names = ["a", "b", "c"];
    g.labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), names[(i + seed as usize) % 3].to_string()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converged_estimates_are_valid(seed in any::<u64>(), dim in 2usize..9, lambda in 0.0f64..0.6) {
        let g = corr(seed, dim);
        let cfg = SolverConfig::default();
        let est = glasso(&g, lambda, &cfg).unwrap();
        prop_assert!(est.converged);
        let t = est.theta.entries();
        prop_assert!((t - t.transpose()).amax() <= 1e-10);
        prop_assert!(est.theta.min_eigenvalue() > 0.0);
        prop_assert!(est.kkt_residual <= 10.0 * cfg.tol, "kkt {}", est.kkt_residual);
    }

    #[test]
    fn objective_never_increases(seed in any::<u64>(), dim in 2usize..9, lambda in 0.01f64..0.5) {
        let est = glasso(&corr(seed, dim), lambda, &SolverConfig::default()).unwrap();
        for w in est.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn glasso_is_permutation_equivariant(seed in any::<u64>(), dim in 2usize..9, lambda in 0.0f64..0.5) {
        let g = corr(seed, dim);
        let p = perm(seed, dim);
        let cfg = SolverConfig { tol: 1e-10, ..SolverConfig::default() };
        let a = glasso(&g, lambda, &cfg).unwrap().theta.permuted(&p).unwrap();
        let b = glasso(&g.permuted(&p).unwrap(), lambda, &cfg).unwrap().theta;
        prop_assert_eq!(a.labels(), b.labels());
        prop_assert!((a.entries() - b.entries()).amax() <= 1e-8);
    }

    #[test]
    fn nodewise_or_contains_and(seed in any::<u64>(), dim in 2usize..9, lambda in 0.0f64..0.5) {
        let fit = nodewise(&corr(seed, dim), lambda, &SolverConfig::default()).unwrap();
        let or = mb_edges(&fit, EdgeRule::Or);
        let and = mb_edges(&fit, EdgeRule::And);
        prop_assert!(and.is_subset(&or));
    }

    #[test]
    fn analytics_are_consistent(seed in any::<u64>(), dim in 3usize..10, lambda in 0.0f64..0.3) {
        let g = corr(seed, dim);
        let est = glasso(&g, lambda, &SolverConfig::default()).unwrap();
        let graph = graph_from_precision(&est.theta, &g, 0.0).unwrap();
        prop_assert_eq!(graph.n_edges(), est.edge_count());

        let groups = grouping(&g, seed);
        let cut = cluster_cut_weights(&graph, &groups).unwrap();
        let total: f64 = graph.edges().map(|(_, e)| e.weight.abs()).sum();
        prop_assert!((cut.within + cut.between - total).abs() <= 1e-12 * total.max(1.0));

        let fr = edge_fraction_by_group(&graph, &groups).unwrap();
        for f in fr.cells().filter_map(|(_, c)| c.fraction()) {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        let means = mean_abs_pearson_by_group(&graph, &groups).unwrap();
        for (_, m) in means.cells() {
            prop_assert!((0.0..=1.0).contains(m));
        }

        let p = perm(seed, dim);
        let pg = graph_from_precision(&est.theta.permuted(&p).unwrap(), &g.permuted(&p).unwrap(), 0.0).unwrap();
        prop_assert_eq!(pg.edge_labels(), graph.edge_labels());
        let pcut = cluster_cut_weights(&pg, &groups).unwrap();
        prop_assert!((pcut.within - cut.within).abs() <= 1e-12 * total.max(1.0));
        prop_assert!((pcut.between - cut.between).abs() <= 1e-12 * total.max(1.0));
        let pfr = edge_fraction_by_group(&pg, &groups).unwrap();
        let cells = |t: &pitchgraph::graphs::PairTable<pitchgraph::graphs::FractionCell>| {
            t.cells().map(|((a, b), c)| ((a.to_string(), b.to_string()), (c.edges, c.possible))).collect::<BTreeMap<_, _>>()
        };
        prop_assert_eq!(cells(&pfr), cells(&fr));
    }
}

#[test]
fn objective_trace_matches_final_objective() {
    let g = corr(3, 7);
    let est = glasso(&g, 0.1, &SolverConfig::default()).unwrap();
    let last = *est.objective_trace.last().unwrap();
    let direct = objective(g.entries(), est.theta.entries(), 0.1, false);
    assert!((last - est.objective).abs() <= 1e-9 * direct.abs().max(1.0));
    assert!((direct - est.objective).abs() <= 1e-9 * direct.abs().max(1.0));
}

#[test]
fn extreme_penalties() {
    let g = corr(9, 6);
    let dense = glasso(&g, 0.0, &SolverConfig::default()).unwrap();
    assert_eq!(dense.edge_count(), 15);
    let lmax = g.max_abs_off_diagonal();
    let sparse = glasso(&g, lmax, &SolverConfig::default()).unwrap();
    assert_eq!(sparse.edge_count(), 0);
    let fit = nodewise(&g, lmax + 1e-9, &SolverConfig::default()).unwrap();
    assert!(mb_edges(&fit, EdgeRule::Or).is_empty());
    let fit = nodewise(&g, 0.0, &SolverConfig::default()).unwrap();
    assert_eq!(mb_edges(&fit, EdgeRule::And).len(), 15);
}

#[test]
fn path_matches_cold_starts() {
    let g = corr(21, 8);
    let cfg = SolverConfig { tol: 1e-10, ..SolverConfig::default() };
    let lambdas = [0.4, 0.3, 0.2];
    let path = glasso_path(&g, &lambdas, &cfg).unwrap();
    for (est, &l) in path.iter().zip(&lambdas) {
        let cold = glasso(&g, l, &cfg).unwrap();
        assert!((est.theta.entries() - cold.theta.entries()).amax() <= 1e-6);
    }
    let single = glasso_path(&g, &[0.25], &cfg).unwrap();
    let cold = glasso(&g, 0.25, &cfg).unwrap();
    assert_eq!(single[0].theta.entries(), cold.theta.entries());
    for (hi, lo) in path_monotonicity_violations(&path) {
        eprintln!("edge count grew from λ={hi} to λ={lo}");
    }
}

#[test]
fn sampler_matches_kronecker_covariance() {
    let a = make_factor(&FactorSpec::new(FactorKind::Ar1 { rho: 0.7 }, 4)).unwrap();
    let b = make_factor(&FactorSpec::new(
        FactorKind::Block { sizes: vec![2, 2], within_corr: 0.6 },
        4,
    ))
    .unwrap();
    let n = 50_000;
    let x = sample_matrix_normal(&a, &b, 1, n, 2024, MeanOptions::default()).unwrap();
    let (nw, nt) = (4, 4);
    let p = nw * nt;
    let mut sum = DMatrix::<f64>::zeros(p, p);
    let mut sq = DMatrix::<f64>::zeros(p, p);
    let mut v = vec![0.0; p];
    for r in 0..n {
        for t in 0..nt {
            for w in 0..nw {
                v[t * nw + w] = x.get(0, w, r, t);
            }
        }
        for i in 0..p {
            for j in 0..p {
                let prod = v[i] * v[j];
                sum[(i, j)] += prod;
                sq[(i, j)] += prod * prod;
            }
        }
    }
    let kron = a.entries().kronecker(b.entries());
    let nf = n as f64;
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let mean = sum[(i, j)] / nf;
            let var = (sq[(i, j)] / nf - mean * mean) * nf / (nf - 1.0);
            let se = (var / nf).sqrt();
            worst = worst.max((mean - kron[(i, j)]).abs() / se);
        }
    }
    assert!(worst <= 3.0, "largest deviation {worst:.2} standard errors");
}
