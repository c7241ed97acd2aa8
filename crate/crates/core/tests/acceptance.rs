//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs with `cargo test -p gpm-core --test acceptance`.

use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use gpm_core::algorithms::oracle::{oracle_components, oracle_pagerank, oracle_pagerank_fixpoint, oracle_triangles};
use gpm_core::algorithms::{
    checksum_f64, checksum_labels, clustering_approx, clustering_exact, community_detection_lp, connected_components,
    pagerank, ApproxTarget, PageRankParams,
};
use gpm_core::graph::{dorogovtsev_mendes, erdos_renyi, load_edge_list, partition_hash, path, star};
use gpm_core::{Algorithm, CheckpointPolicy, Engine, Graph, PartitionAssignment, RunOptions};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workers(g: &Graph, k: usize) -> PartitionAssignment {
    partition_hash(g, k, 17).expect("k >= 1")
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn bundled_graphs() -> Vec<(String, Graph)> {
    let mut out = Vec::new();
    let mut paths: Vec<_> = std::fs::read_dir(data_dir())
        .expect("data directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "el"))
        .collect();
    paths.sort();
    for p in paths {
        let g = load_edge_list(BufReader::new(File::open(&p).expect("readable")), false).expect("parses");
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), g));
    }
    out
}

fn c1_cc_oracle() -> Outcome {
    let t = Instant::now();
    let mut graphs: Vec<Graph> = (0..100u64)
        .map(|seed| {
            let n = 20 + (seed as usize * 37) % 181;
            let p = if seed % 2 == 0 { 0.01 } else { 0.05 };
            erdos_renyi(n, p, false, seed)
        })
        .collect();
    graphs.push(dorogovtsev_mendes(1000, 1).map_err(|e| e.to_string())?);
    let mut runs = 0;
    for (i, g) in graphs.iter().enumerate() {
        let truth = oracle_components(g).map_err(|e| e.to_string())?;
        for k in [1, 2, 4, 8] {
            let p = workers(g, k);
            for engine in Engine::ALL {
                let (labels, _) =
                    connected_components(g, engine, &p, &RunOptions::seeded(i as u64)).map_err(|e| e.to_string())?;
                ensure(labels == truth, || format!("graph {i}, {engine}, {k} workers disagrees with union-find"))?;
                runs += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("{runs} runs over 101 graphs in {:.1}s", elapsed.as_secs_f64()))
}

fn c2_pagerank_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_final: f64 = 0.0;
    for seed in 0..50u64 {
        let n = 5 + (seed as usize * 13) % 96;
        let g = erdos_renyi(n, 0.08, true, 1000 + seed);
        let oracle = oracle_pagerank(&g, 0.15, 30).map_err(|e| e.to_string())?;
        let fixpoint = oracle_pagerank_fixpoint(&g, 0.15).map_err(|e| e.to_string())?;
        for k in [1, 4] {
            let p = workers(&g, k);
            for &engine in Algorithm::PageRank.engines() {
                if engine != Engine::GasAsync {
                    let r = pagerank(&g, engine, &p, &PageRankParams::fixed(30), &RunOptions::default())
                        .map_err(|e| e.to_string())?;
                    let d = r.scores.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    worst = worst.max(d);
                    ensure(d <= 1e-10, || format!("graph {seed}, {engine}, {k} workers: off by {d:e}"))?;
                }
                let eps = 1e-8;
                let r = pagerank(&g, engine, &p, &PageRankParams::tolerance(eps), &RunOptions::seeded(seed))
                    .map_err(|e| e.to_string())?;
                ensure(r.converged && r.final_max_delta <= eps, || {
                    format!("graph {seed}, {engine}: final delta {:e}", r.final_max_delta)
                })?;
                worst_final = worst_final.max(r.final_max_delta);
                if engine == Engine::GasAsync {
                    let d = r.scores.iter().zip(&fixpoint).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    ensure(d <= 2.0 * eps, || format!("graph {seed}, async: {d:e} from the fixpoint"))?;
                }
            }
        }
    }
    Ok(format!("fixed-mode max error {worst:.1e}, largest final delta {worst_final:.1e}"))
}

fn c3_clustering_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let n = 5 + (seed as usize * 17) % 96;
        let g = erdos_renyi(n, 0.05 + 0.15 * (seed % 4) as f64, false, 2000 + seed);
        let truth = oracle_triangles(&g).map_err(|e| e.to_string())?;
        let eligible: Vec<f64> = g.vertices().filter_map(|v| truth.local(&g, v)).collect();
        let mean = if eligible.is_empty() { 0.0 } else { eligible.iter().sum::<f64>() / eligible.len() as f64 };
        let p = workers(&g, 3);
        for &engine in Algorithm::ClusteringExact.engines() {
            let (r, _) = clustering_exact(&g, engine, &p, &RunOptions::default()).map_err(|e| e.to_string())?;
            let d = (r.average_local - mean).abs().max((r.global - truth.global()).abs());
            worst = worst.max(d);
            ensure(d <= 1e-12, || format!("graph {seed}, {engine}: off by {d:e}"))?;
        }
    }
    for &engine in Algorithm::ClusteringExact.engines() {
        let k3 = gpm_core::graph::complete(3);
        let (r, _) = clustering_exact(&k3, engine, &workers(&k3, 2), &RunOptions::default()).map_err(|e| e.to_string())?;
        ensure(r.average_local == 1.0 && r.global == 1.0, || format!("{engine}: K3 gave {r:?}"))?;
        let k14 = star(4, false);
        let (r, _) = clustering_exact(&k14, engine, &workers(&k14, 2), &RunOptions::default()).map_err(|e| e.to_string())?;
        ensure(r.average_local == 0.0 && r.global == 0.0, || format!("{engine}: K1,4 gave {r:?}"))?;
    }
    Ok(format!("max error {worst:.1e} over 50 graphs; K3 and K1,4 exact"))
}

fn c4_sampling_bound() -> Outcome {
    let t = Instant::now();
    let g = dorogovtsev_mendes(2000, 4).map_err(|e| e.to_string())?;
    let (exact, _) = clustering_exact(&g, Engine::Pregel, &workers(&g, 4), &RunOptions::default()).map_err(|e| e.to_string())?;
    let p = workers(&g, 4);
    let mut report = Vec::new();
    for &engine in Algorithm::ClusteringApprox.engines() {
        for (target, truth) in [(ApproxTarget::AverageLocal, exact.average_local), (ApproxTarget::Global, exact.global)] {
            let mut within = 0;
            let mut worst: f64 = 0.0;
            for seed in 0..20 {
                let (a, _) = clustering_approx(&g, engine, &p, target, 100_000, &RunOptions::seeded(seed))
                    .map_err(|e| e.to_string())?;
                let d = (a.estimate - truth).abs();
                worst = worst.max(d);
                if d <= 0.02 {
                    within += 1;
                }
            }
            ensure(within >= 19, || format!("{engine} {target:?}: only {within}/20 within 0.02"))?;
            report.push(format!("{engine} {target:?} {within}/20 (worst {worst:.4})"));
        }
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {:.1}s", report.join(", "), elapsed.as_secs_f64()))
}

fn c5_async_updates() -> Outcome {
    let mut graphs = bundled_graphs();
    graphs.push(("dm-5000".into(), dorogovtsev_mendes(5000, 5).map_err(|e| e.to_string())?));
    let mut ratio = f64::NAN;
    for (name, g) in &graphs {
        let p = workers(g, 4);
        let (_, sync) = connected_components(g, Engine::GasSync, &p, &RunOptions::default()).map_err(|e| e.to_string())?;
        let (_, asyn) = connected_components(g, Engine::GasAsync, &p, &RunOptions::default()).map_err(|e| e.to_string())?;
        ensure(asyn.vertex_updates <= sync.vertex_updates, || {
            format!("{name}: async {} > sync {}", asyn.vertex_updates, sync.vertex_updates)
        })?;
        if name == "dm-5000" {
            ratio = asyn.vertex_updates as f64 / sync.vertex_updates as f64;
        }
    }
    ensure(ratio <= 0.9, || format!("dm-5000 async/sync update ratio {ratio:.3}"))?;
    Ok(format!("{} graphs, dm-5000 async/sync update ratio {ratio:.3}", graphs.len()))
}

fn c6_oscillation() -> Outcome {
    let g = Graph::from_edges(2, false, &[(0, 1)]);
    let p = workers(&g, 2);
    let opts = RunOptions::default();
    let sync = community_detection_lp(&g, Engine::Pregel, &p, 20, &opts).map_err(|e| e.to_string())?;
    ensure(!sync.converged && sync.oscillating, || format!("pregel LP: {sync:?}"))?;
    ensure(sync.labels == vec![1, 0] || sync.labels == vec![0, 1], || format!("labels {:?}", sync.labels))?;
    // period 2: one round more or less swaps the labels
    let odd = community_detection_lp(&g, Engine::Pregel, &p, 21, &opts).map_err(|e| e.to_string())?;
    ensure(odd.labels == vec![sync.labels[1], sync.labels[0]], || format!("no swing: {:?}", odd.labels))?;
    let asyn = community_detection_lp(&g, Engine::GasAsync, &p, 20, &opts).map_err(|e| e.to_string())?;
    ensure(asyn.converged && asyn.labels[0] == asyn.labels[1], || format!("async LP: {asyn:?}"))?;
    Ok(format!("sync labels swing {:?} <-> {:?}; async settles on {}", sync.labels, odd.labels, asyn.labels[0]))
}

fn c7_graph_centric() -> Outcome {
    let g = path(64);
    let p = PartitionAssignment::from_owners(4, (0..64).map(|v| v / 16).collect()).map_err(|e| e.to_string())?;
    let (gc_labels, gc) = connected_components(&g, Engine::GraphCentric, &p, &RunOptions::default()).map_err(|e| e.to_string())?;
    let (pr_labels, pr) = connected_components(&g, Engine::Pregel, &p, &RunOptions::default()).map_err(|e| e.to_string())?;
    ensure(gc_labels == vec![0; 64] && pr_labels == gc_labels, || "wrong labels".into())?;
    ensure(gc.supersteps <= 5, || format!("graph-centric took {} supersteps", gc.supersteps))?;
    ensure(pr.supersteps >= 32, || format!("pregel took only {} supersteps", pr.supersteps))?;
    ensure(gc.messages_delivered < pr.messages_delivered, || {
        format!("delivered {} vs {}", gc.messages_delivered, pr.messages_delivered)
    })?;
    Ok(format!(
        "graph-centric {} supersteps / {} messages, pregel {} / {}",
        gc.supersteps, gc.messages_delivered, pr.supersteps, pr.messages_delivered
    ))
}

fn c8_combiner() -> Outcome {
    let g = star(100, false);
    let p = workers(&g, 4);
    let with = pagerank(&g, Engine::Pregel, &p, &PageRankParams::default(), &RunOptions::default()).map_err(|e| e.to_string())?;
    let params = PageRankParams {
        combiner: false,
        ..Default::default()
    };
    let without = pagerank(&g, Engine::Pregel, &p, &params, &RunOptions::default()).map_err(|e| e.to_string())?;
    let (a, b) = (with.metrics.messages_remote, without.metrics.messages_remote);
    ensure(a < b, || format!("remote messages {a} with combiner, {b} without"))?;
    let same_bits = with.scores.iter().zip(&without.scores).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure(same_bits, || "scores differ".into())?;
    Ok(format!("remote messages {a} with combiner vs {b} without; scores bit-identical"))
}

fn c9_fault_tolerance() -> Outcome {
    let g = dorogovtsev_mendes(400, 9).map_err(|e| e.to_string())?;
    // long diameter so the kill lands mid-run
    let g = {
        let n = g.num_vertices();
        let mut edges: Vec<_> = g.edges().collect();
        edges.extend((n..n + 30).map(|v| (v - 1, v)));
        Graph::from_edges(n + 30, false, &edges)
    };
    let p = workers(&g, 4);
    let (clean, m0) = connected_components(&g, Engine::Pregel, &p, &RunOptions::default()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = RunOptions {
        checkpoint: Some(CheckpointPolicy::new(dir.path(), 2)),
        kill_at_superstep: Some(5),
        ..Default::default()
    };
    let (recovered, m1) = connected_components(&g, Engine::Pregel, &p, &opts).map_err(|e| e.to_string())?;
    ensure(m0.supersteps > 5, || format!("run too short: {} supersteps", m0.supersteps))?;
    ensure(m1.recoveries == 1, || format!("{} recoveries", m1.recoveries))?;
    ensure(recovered == clean, || "labels differ after recovery".into())?;
    Ok(format!("killed at superstep 5 of {}, recovered from checkpoint, labels identical", m0.supersteps))
}

fn checksum_of(g: &Graph, algorithm: Algorithm, engine: Engine, p: &PartitionAssignment, seed: u64) -> Result<(u64, String), String> {
    let opts = RunOptions::seeded(seed);
    let e = |e: gpm_core::Error| e.to_string();
    let (sum, mut metrics) = match algorithm {
        Algorithm::Cc => {
            let (l, m) = connected_components(g, engine, p, &opts).map_err(e)?;
            (checksum_labels(&l), m)
        }
        Algorithm::Community => {
            let r = community_detection_lp(g, engine, p, 50, &opts).map_err(e)?;
            (checksum_labels(&r.labels), r.metrics)
        }
        Algorithm::PageRank => {
            let params = if engine == Engine::GasAsync {
                PageRankParams::tolerance(1e-8)
            } else {
                PageRankParams::default()
            };
            let r = pagerank(g, engine, p, &params, &opts).map_err(e)?;
            (checksum_f64(&r.scores), r.metrics)
        }
        Algorithm::ClusteringExact => {
            let (r, m) = clustering_exact(g, engine, p, &opts).map_err(e)?;
            let local: Vec<f64> = r.local.iter().map(|x| x.unwrap_or(-1.0)).collect();
            (checksum_f64(&local), m)
        }
        Algorithm::ClusteringApprox => {
            let (r, m) = clustering_approx(g, engine, p, ApproxTarget::AverageLocal, 5000, &opts).map_err(e)?;
            (r.hits, m)
        }
    };
    metrics.wall_time = Duration::ZERO;
    Ok((sum, serde_json::to_string(&metrics).map_err(|e| e.to_string())?))
}

fn c10_determinism() -> Outcome {
    let undirected = dorogovtsev_mendes(300, 10).map_err(|e| e.to_string())?;
    let directed = erdos_renyi(150, 0.03, true, 10);
    let mut pairs = 0;
    for algorithm in Algorithm::ALL {
        let g = if algorithm.directed_input() { &directed } else { &undirected };
        for &engine in algorithm.engines() {
            let mut first: Option<u64> = None;
            for k in [1, 2, 4, 8] {
                let p = workers(g, k);
                let a = checksum_of(g, algorithm, engine, &p, 3)?;
                let b = checksum_of(g, algorithm, engine, &p, 3)?;
                ensure(a == b, || format!("{algorithm}/{engine}/{k}: repeated runs differ"))?;
                match first {
                    None => first = Some(a.0),
                    Some(c) => ensure(c == a.0, || format!("{algorithm}/{engine}: {k} workers changes the result"))?,
                }
            }
            pairs += 1;
        }
    }
    Ok(format!("{pairs} algorithm/engine pairs stable over workers 1,2,4,8 and repeated runs"))
}

fn c11_pact_parallelism() -> Outcome {
    let g = dorogovtsev_mendes(500, 11).map_err(|e| e.to_string())?;
    let d = erdos_renyi(200, 0.03, true, 11);
    let (a, _) = connected_components(&g, Engine::Pact, &workers(&g, 1), &RunOptions::default()).map_err(|e| e.to_string())?;
    let (b, _) = connected_components(&g, Engine::Pact, &workers(&g, 8), &RunOptions::default()).map_err(|e| e.to_string())?;
    ensure(a == b, || "cc outputs differ".into())?;
    for params in [PageRankParams::default(), PageRankParams::tolerance(1e-9)] {
        let x = pagerank(&d, Engine::Pact, &workers(&d, 1), &params, &RunOptions::default()).map_err(|e| e.to_string())?;
        let y = pagerank(&d, Engine::Pact, &workers(&d, 8), &params, &RunOptions::default()).map_err(|e| e.to_string())?;
        let same = x.scores.iter().zip(&y.scores).all(|(p, q)| p.to_bits() == q.to_bits());
        ensure(same && x.iterations == y.iterations, || format!("pagerank outputs differ under {:?}", params.mode))?;
    }
    Ok("cc and pagerank dataflows identical at parallelism 1 and 8".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("cc oracle equivalence", c1_cc_oracle),
        ("pagerank oracle equivalence", c2_pagerank_oracle),
        ("clustering oracle equivalence", c3_clustering_oracle),
        ("sampling approximation bound", c4_sampling_bound),
        ("async gas update savings", c5_async_updates),
        ("synchronous label oscillation", c6_oscillation),
        ("graph-centric supersteps and messages", c7_graph_centric),
        ("combiner traffic reduction", c8_combiner),
        ("checkpoint recovery", c9_fault_tolerance),
        ("determinism and worker invariance", c10_determinism),
        ("pact parallelism invariance", c11_pact_parallelism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
