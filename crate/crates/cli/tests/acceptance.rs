//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use zsl_core::experiment::{
    evaluate_conse, evaluate_gcn, evaluate_mlp, fixture_hidden, EvalTask, GraphVariant, CONSE_T, CONSE_TEMPERATURE,
    FIXTURE_MLP_HIDDEN,
};
use zsl_core::gcn::{backward, forward, init_model, GcnModel};
use zsl_core::kgraph::{extract_bfs_subgraph, make_random_graph, normalize_adjacency, Edge, KnowledgeGraph};
use zsl_core::linalg::{row_l2_normalize, DenseMatrix};
use zsl_core::synth::{generate_world, WorldConfig};
use zsl_core::train::{masked_mse_loss, SeenMask, TrainConfig};
use zsl_core::zeroshot::{cosine_scores, evaluate_topk, rank_candidates, Setting};

/// Values of the default fixture with training seed 0, recorded on the first verified run.
const PINNED_GCN_HIT1: f64 = 100.0;
const PINNED_GCN_HIT5: f64 = 100.0;
const PINNED_CONSE_HIT1: f64 = 27.407;
const PINNED_MLP_HIT5: f64 = 71.111;
const PIN_TOLERANCE: f64 = 1.0;
const SEEDS: [u64; 3] = [0, 1, 2];
const MARGIN: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| {
            // Box-Muller
            let u: f64 = r.random_range(f64::EPSILON..1.0);
            let v: f64 = r.random();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

/// Random simple graph; every unordered pair appears at most once, in random orientation.
fn random_graph(r: &mut ChaCha8Rng, n: usize, density: f64, seed_prob: f64) -> KnowledgeGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random_bool(density) {
                let (a, b) = if r.random_bool(0.5) { (u, v) } else { (v, u) };
                edges.push(Edge {
                    u: a,
                    v: b,
                    confidence: 1.0,
                });
            }
        }
    }
    let mut flags: Vec<bool> = (0..n).map(|_| r.random_bool(seed_prob)).collect();
    if !flags.iter().any(|&f| f) {
        flags[r.random_range(0..n)] = true;
    }
    KnowledgeGraph::new(names(n), flags, edges).unwrap()
}

fn pct(x: f64) -> f64 {
    100.0 * x
}

fn criterion_1() -> Outcome {
    let dims = [16, 32, 32, 16, 16, 8, 12];
    let n = 10;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..30u64 {
        let mut r = rng(1000 + seed);
        let graph = make_random_graph(n, 15, seed).unwrap();
        let adj = normalize_adjacency(&graph);
        let model = init_model(&dims, 0.2, true, seed).unwrap();
        let x = gaussian(&mut r, n, dims[0]);
        let target = row_l2_normalize(&gaussian(&mut r, n, dims[6]));
        let mask = SeenMask::new((0..n).map(|i| i % 3 != 0).collect()).unwrap();
        let loss_of = |m: &GcnModel| masked_mse_loss(&forward(m, &adj, &x).unwrap().0, &target, &mask).unwrap();
        let (pred, cache) = forward(&model, &adj, &x).unwrap();
        let (_, upstream) = masked_mse_loss(&pred, &target, &mask).unwrap();
        let grads = backward(&model, &adj, &cache, &upstream).unwrap();
        for (l, g) in grads.iter().enumerate() {
            for idx in 0..g.data().len() {
                let bump = |delta: f64| {
                    let mut w = model.weights().to_vec();
                    w[l].data_mut()[idx] += delta;
                    loss_of(&GcnModel::from_weights(w, 0.2, true).unwrap()).0
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = g.data()[idx];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 30 seeds (limit 1e-4)"))
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r.random_range(1..=50);
        let density = r.random_range(0.0..0.5);
        let g = random_graph(&mut r, n, density, 0.5);
        let mut a = vec![vec![0.0; n]; n];
        for e in g.edges() {
            a[e.u][e.v] = 1.0;
            a[e.v][e.u] = 1.0;
        }
        (0..n).for_each(|i| a[i][i] = 1.0);
        let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
        let got = normalize_adjacency(&g).matrix().to_dense();
        for i in 0..n {
            for j in 0..n {
                let want = a[i][j] / deg[i].sqrt() / deg[j].sqrt();
                worst = worst.max((got.get(i, j) - want).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max entry error {worst:.1e} over 200 graphs (limit 1e-12)"))
}

/// Edges and nodes on some seed-to-seed walk of at most `max_hops` edges, by enumerating walks.
fn walk_oracle(g: &KnowledgeGraph, max_hops: usize) -> (BTreeSet<usize>, BTreeSet<(usize, usize)>) {
    let adj = g.neighbors();
    let seeds = g.seeds();
    let mut nodes: BTreeSet<usize> = seeds.iter().copied().collect();
    let mut edges = BTreeSet::new();
    fn walk(
        adj: &[Vec<usize>],
        flags: &[bool],
        path: &mut Vec<usize>,
        max_hops: usize,
        nodes: &mut BTreeSet<usize>,
        edges: &mut BTreeSet<(usize, usize)>,
    ) {
        let last = *path.last().unwrap();
        if path.len() > 1 && flags[last] {
            for w in path.windows(2) {
                edges.insert((w[0].min(w[1]), w[0].max(w[1])));
                nodes.insert(w[0]);
                nodes.insert(w[1]);
            }
        }
        if path.len() > max_hops {
            return;
        }
        for &next in &adj[last] {
            path.push(next);
            walk(adj, flags, path, max_hops, nodes, edges);
            path.pop();
        }
    }
    for &s in &seeds {
        walk(&adj, g.seed_flags(), &mut vec![s], max_hops, &mut nodes, &mut edges);
    }
    (nodes, edges)
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = r.random_range(1..=8);
        let density = r.random_range(0.1..0.7);
        let g = random_graph(&mut r, n, density, 0.3);
        let hops = r.random_range(1..=4);
        let sub = extract_bfs_subgraph(&g, hops).unwrap();
        let (want_nodes, want_edges) = walk_oracle(&g, hops);
        let got_nodes: BTreeSet<usize> = sub.id_map.iter().copied().collect();
        let got_edges: BTreeSet<(usize, usize)> = sub
            .graph
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = (sub.id_map[e.u], sub.id_map[e.v]);
                (a.min(b), a.max(b))
            })
            .collect();
        let names_ok = sub
            .id_map
            .iter()
            .enumerate()
            .all(|(new, &old)| sub.graph.node_names()[new] == g.node_names()[old]);
        if got_nodes != want_nodes || got_edges != want_edges || !names_ok {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 500 graphs disagree with walk enumeration"))
}

fn sort_oracle(scores: &DenseMatrix, labels: &[usize], ks: &[usize], candidates: &[usize]) -> Vec<f64> {
    let mut counts = vec![0usize; ks.len()];
    for (i, &label) in labels.iter().enumerate() {
        let mut order: Vec<(f64, usize)> = candidates.iter().map(|&c| (scores.get(i, c), c)).collect();
        order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let rank = order.iter().position(|&(_, c)| c == label).unwrap();
        for (count, &k) in counts.iter_mut().zip(ks) {
            if rank < k {
                *count += 1;
            }
        }
    }
    counts.iter().map(|&c| c as f64 / labels.len() as f64).collect()
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let ks = [1, 2, 3, 5, 10, 20, 30];
    let mut mismatches = 0;
    for case in 0..1000 {
        let images = r.random_range(1..=20);
        let classes = r.random_range(2..=30);
        // few distinct values so ties are common
        let levels = r.random_range(2..=6) as f64;
        let data = (0..images * classes).map(|_| (r.random_range(0.0..levels)).floor()).collect();
        let scores = DenseMatrix::from_vec(images, classes, data).unwrap();
        let mut ids: Vec<usize> = (0..classes).collect();
        ids.shuffle(&mut r);
        let unseen: Vec<usize> = ids[..r.random_range(1..=classes)].to_vec();
        let labels: Vec<usize> = (0..images).map(|_| unseen[r.random_range(0..unseen.len())]).collect();
        let (setting, cands) = if case % 2 == 0 {
            (Setting::UnseenOnly, unseen.clone())
        } else {
            (Setting::Generalized, (0..classes).collect())
        };
        let report = evaluate_topk(&scores, &labels, &ks, &cands, setting).unwrap();
        if report.hits != sort_oracle(&scores, &labels, &ks, &cands) || report.num_candidates != cands.len() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 1000 score matrices disagree with the sort oracle"))
}

fn fixture() -> EvalTask {
    EvalTask::from(&generate_world(&WorldConfig::default()).unwrap())
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..TrainConfig::default()
    }
}

/// Mean GCN hit@k (percent) over `SEEDS`; graph randomness follows the training seed.
fn mean_gcn_hit(task: &EvalTask, layers: usize, k: usize, variant: impl Fn(u64) -> GraphVariant) -> (f64, Duration) {
    let hidden = fixture_hidden(layers).unwrap();
    let mut sum = 0.0;
    let mut slowest = Duration::ZERO;
    for &seed in &SEEDS {
        let t = Instant::now();
        let (_, report) = evaluate_gcn(task, variant(seed), &hidden, &cfg(seed), &[k]).unwrap();
        slowest = slowest.max(t.elapsed());
        sum += pct(report.hits[0]);
    }
    (sum / SEEDS.len() as f64, slowest)
}

fn criterion_5(task: &EvalTask) -> Outcome {
    let ks = [1, 5];
    let t = Instant::now();
    let (_, gcn) = evaluate_gcn(task, GraphVariant::Original, &fixture_hidden(6).unwrap(), &cfg(0), &ks).unwrap();
    let gcn_time = t.elapsed();
    let conse = evaluate_conse(task, CONSE_T, CONSE_TEMPERATURE, Setting::UnseenOnly, &ks).unwrap();
    let t = Instant::now();
    let mlp = evaluate_mlp(task, &FIXTURE_MLP_HIDDEN, &cfg(0), &ks).unwrap();
    let mlp_time = t.elapsed();
    let (g1, g5) = (pct(gcn.hits[0]), pct(gcn.hits[1]));
    let c1 = pct(conse.hits[0]);
    let m5 = pct(mlp.hits[1]);
    let chance2 = pct(2.0 * task.chance_at_1());
    let ordered = g1 > c1 && c1 > chance2 && g5 > m5;
    let pinned = [(g1, PINNED_GCN_HIT1), (g5, PINNED_GCN_HIT5), (c1, PINNED_CONSE_HIT1), (m5, PINNED_MLP_HIT5)]
        .iter()
        .all(|(got, want)| (got - want).abs() <= PIN_TOLERANCE);
    let fast = gcn_time.max(mlp_time) < Duration::from_secs(120);
    outcome(
        ordered && pinned && fast,
        format!(
            "GCN hit@1 {g1:.1} > ConSE hit@1 {c1:.1} > 2x chance {chance2:.1}; GCN hit@5 {g5:.1} > MLP hit@5 {m5:.1}; \
             pinned {}; slowest run {:.1}s",
            if pinned { "ok" } else { "MISMATCH" },
            gcn_time.max(mlp_time).as_secs_f64()
        ),
    )
}

fn criterion_6(task: &EvalTask) -> Outcome {
    let drop = |fraction: f64| {
        mean_gcn_hit(task, 6, 5, move |seed| {
            if fraction == 0.0 {
                GraphVariant::Original
            } else {
                GraphVariant::DropEdges { fraction, seed }
            }
        })
        .0
    };
    let (h0, h10, h50) = (drop(0.0), drop(0.1), drop(0.5));
    outcome(
        h10 >= h0 - 5.0 && h50 <= h0 - 10.0,
        format!("hit@5 at 0% {h0:.1}, 10% {h10:.1} (>= {:.1}), 50% {h50:.1} (<= {:.1})", h0 - 5.0, h0 - 10.0),
    )
}

fn criterion_7(task: &EvalTask) -> Outcome {
    let limit = pct(2.0 * task.chance_at_1());
    let (star, _) = mean_gcn_hit(task, 6, 1, |_| GraphVariant::Star);
    let (random, _) = mean_gcn_hit(task, 6, 1, |seed| GraphVariant::Random { seed });
    outcome(
        star <= limit && random <= limit,
        format!("hit@1 star {star:.1}, random {random:.1} (limit 2x chance = {limit:.1})"),
    )
}

fn compare(deeper: f64, shallower: f64) -> Option<&'static str> {
    if deeper >= shallower + MARGIN {
        Some("ordered")
    } else if (deeper - shallower).abs() < MARGIN {
        Some("tie")
    } else {
        None
    }
}

fn criterion_8(task: &EvalTask) -> Outcome {
    let h = |layers| mean_gcn_hit(task, layers, 5, |_| GraphVariant::Original).0;
    let (h6, h4, h2) = (h(6), h(4), h(2));
    let (a, b) = (compare(h6, h4), compare(h4, h2));
    outcome(
        a.is_some() && b.is_some(),
        format!(
            "hit@5 6-layer {h6:.1}, 4-layer {h4:.1}, 2-layer {h2:.1}; 6 vs 4: {}, 4 vs 2: {}",
            a.unwrap_or("REVERSED"),
            b.unwrap_or("REVERSED")
        ),
    )
}

fn zsl(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_zsl"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn read_outputs(dir: &Path) -> (BTreeMap<String, Vec<u8>>, Value) {
    let manifest: Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["outputs"]
        .as_object()
        .unwrap()
        .keys()
        .map(|k| (k.clone(), fs::read(dir.join(k)).unwrap()))
        .collect();
    (files, manifest)
}

/// Runs every command twice into separate directories and compares bytes and manifest hashes.
fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let p = |s: &str| root.join(s).display().to_string();
    if !zsl(&["synth", "--classes", "24", "--images-per-class", "4", "--out-dir", &p("task")]) {
        return outcome(false, "synth failed".into());
    }
    let task = |f: &str| root.join("task").join(f).display().to_string();
    let base = [
        "--graph-dir".to_string(),
        p("task"),
        "--embeddings".into(),
        task("embeddings.txt"),
        "--seen-list".into(),
        task("seen.txt"),
    ];
    let with = |extra: &[&str]| -> Vec<String> { base.iter().cloned().chain(extra.iter().map(|s| s.to_string())).collect() };
    let gt = task("gt_classifiers.zslm");
    let features = task("features.zslm");
    let ckpt = root.join("train_a/checkpoints/final").display().to_string();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("synth", vec!["synth".into(), "--classes".into(), "24".into(), "--images-per-class".into(), "4".into()]),
        (
            "extract-subgraph",
            vec!["extract-subgraph".into(), "--nodes".into(), task("nodes.tsv"), "--edges".into(), task("edges.tsv"), "--max-hops".into(), "2".into()],
        ),
        (
            "train",
            [vec!["train".to_string()], with(&["--gt-classifiers", &gt, "--dims", "16,8", "--epochs", "60"])].concat(),
        ),
        ("eval", [vec!["eval".to_string()], with(&["--checkpoint", &ckpt, "--features", &features, "--setting", "generalized", "--gt-classifiers", &gt])].concat()),
        ("conse", [vec!["conse".to_string()], with(&["--features", &features, "--gt-classifiers", &gt, "--top-t", "5"])].concat()),
        (
            "ablate",
            [
                vec!["ablate".to_string(), "drop-edges".into()],
                with(&["--gt-classifiers", &gt, "--features", &features, "--fractions", "0,0.3", "--seeds", "0,1", "--epochs", "20", "--width-divisor", "64"]),
            ]
            .concat(),
        ),
        ("analyze-distances", [vec!["analyze-distances".to_string()], with(&["--checkpoint", &ckpt, "--gt-classifiers", &gt])].concat()),
    ];
    let mut failures = Vec::new();
    for (name, args) in &runs {
        let mut results = Vec::new();
        for copy in ["a", "b"] {
            let out = root.join(format!("{name}_{copy}"));
            let mut full: Vec<String> = args.clone();
            full.push("--out-dir".into());
            full.push(out.display().to_string());
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            if !zsl(&refs) {
                failures.push(format!("{name} exited non-zero"));
                break;
            }
            results.push(read_outputs(&out));
        }
        if let [(files_a, man_a), (files_b, man_b)] = results.as_slice() {
            if files_a != files_b || man_a["outputs"] != man_b["outputs"] || man_a["inputs"] != man_b["inputs"] {
                failures.push(format!("{name} not reproducible"));
            }
            if files_a.is_empty() {
                failures.push(format!("{name} wrote no outputs"));
            }
        }
    }
    let count = runs.len();
    if failures.is_empty() {
        outcome(true, format!("{count} commands reproduce byte-identical outputs and manifest hashes"))
    } else {
        outcome(false, failures.join("; "))
    }
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let mut mismatches = 0;
    for _ in 0..100 {
        let images = r.random_range(1..=10);
        let classes = r.random_range(2..=30);
        let dim = r.random_range(2..=16);
        let combined = gaussian(&mut r, images, dim);
        let cands = gaussian(&mut r, classes, dim);
        let s = 10f64.powf(r.random_range(-3.0..3.0));
        let base = cosine_scores(&combined, &cands).unwrap();
        let scaled = cosine_scores(&combined.scale(s), &cands).unwrap();
        let all: Vec<usize> = (0..classes).collect();
        for i in 0..images {
            if rank_candidates(base.row(i), &all) != rank_candidates(scaled.row(i), &all) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{mismatches} rankings changed under positive rescaling (100 cases)"))
}

fn main() {
    let task = fixture();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, u64, Check)> = vec![
        ("gradient check", 30, Box::new(criterion_1)),
        ("normalization oracle", 10, Box::new(criterion_2)),
        ("BFS subgraph oracle", 60, Box::new(criterion_3)),
        ("top-k oracle", 10, Box::new(criterion_4)),
        ("zero-shot ordering", 6 * 60, Box::new(|| criterion_5(&task))),
        ("edge-drop trend", 10 * 60, Box::new(|| criterion_6(&task))),
        ("trivial graphs", 5 * 60, Box::new(|| criterion_7(&task))),
        ("depth ordering", 10 * 60, Box::new(|| criterion_8(&task))),
        ("determinism", 60, Box::new(criterion_9)),
        ("ConSE scale invariance", 5, Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs < *limit as f64;
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {} [{secs:.1}s, limit {limit}s{}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            if in_time { "" } else { ", TOO SLOW" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
