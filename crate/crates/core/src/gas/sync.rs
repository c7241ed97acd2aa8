use std::time::Instant;

use super::{
    count_message, fold_opt, incident, CacheSlot, GasOutput, GasProgram, Nbr, ScatterCtx,
    ScatterOut, SIGNAL_BYTES,
};
use crate::cluster::{ExecMode, RunMetrics, WireSize};
use crate::error::{Error, Result};
use crate::graph::{Graph, PartitionAssignment, VertexId};

#[derive(Debug, Clone)]
pub struct SyncOptions {
    pub delta_caching: bool,
    pub max_iterations: u64,
    pub mode: ExecMode,
    /// Vertices active in the first iteration; all when `None`.
    pub initial: Option<Vec<VertexId>>,
    /// Re-gathers on every cached apply and records the discrepancy.
    pub audit_cache: bool,
}

impl Default for SyncOptions {
    fn default() -> Self {
        SyncOptions {
            delta_caching: false,
            max_iterations: 10_000,
            mode: ExecMode::Sequential,
            initial: None,
            audit_cache: false,
        }
    }
}

struct Gathered<G> {
    vertex: VertexId,
    acc: Option<G>,
    discrepancy: f64,
}

pub fn run_gas_sync<P: GasProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    options: &SyncOptions,
) -> Result<GasOutput<P::State>> {
    assignment.check_graph(graph)?;
    let started = Instant::now();
    let n = graph.num_vertices();
    let caching = options.delta_caching && program.delta_correct();
    let mut states: Vec<P::State> = graph.vertices().map(|v| program.init(v, graph)).collect();
    let mut edge_data: Vec<P::EdgeData> = vec![P::EdgeData::default(); graph.num_edge_slots()];
    let mut cache: Vec<CacheSlot<P::Gather>> = vec![CacheSlot::default(); if caching { n } else { 0 }];
    let mut active = vec![false; n];
    match &options.initial {
        None => active.fill(true),
        Some(list) => {
            for &v in list {
                if v >= n {
                    return Err(Error::argument(format!("initial vertex {v} is not in the graph")));
                }
                active[v] = true;
            }
        }
    }

    let blocks = assignment.blocks();
    let mut metrics = RunMetrics::default();
    let mut max_discrepancy = 0.0f64;
    let mut iteration = 0u64;
    loop {
        let lists: Vec<Vec<VertexId>> = blocks
            .iter()
            .map(|b| b.iter().copied().filter(|&v| active[v]).collect())
            .collect();
        let count: usize = lists.iter().map(Vec::len).sum();
        if count == 0 {
            break;
        }
        if iteration >= options.max_iterations {
            metrics.step_limit_reached = true;
            break;
        }
        metrics.active_vertices_per_superstep.push(count as u64);

        // gather
        let states_ref = &states;
        let edges_ref = &edge_data;
        let cache_ref = &cache;
        let gathered = options.mode.map(lists, |list| {
            let mut m = RunMetrics::default();
            let out: Vec<Gathered<P::Gather>> = list
                .into_iter()
                .map(|v| {
                    let fresh = |m: &mut RunMetrics| {
                        let mut acc = None;
                        for (u, e) in incident(graph, v, program.gather_dir()) {
                            let nbr = Nbr {
                                id: u,
                                state: &states_ref[u],
                                edge: e,
                                data: &edges_ref[e],
                            };
                            let g = program.gather(graph, v, &states_ref[v], nbr);
                            count_message(m, assignment, u, v, g.wire_size());
                            acc = fold_opt(acc, Some(g), |a, b| program.gather_sum(a, b));
                        }
                        acc
                    };
                    if caching && cache_ref[v].valid {
                        let slot = &cache_ref[v];
                        let acc = fold_opt(slot.value.clone(), slot.pending.clone(), |a, b| {
                            program.gather_sum(a, b)
                        });
                        let mut discrepancy = 0.0;
                        if options.audit_cache {
                            let mut scratch = RunMetrics::default();
                            let check = fresh(&mut scratch);
                            discrepancy = match (&acc, &check) {
                                (Some(a), Some(b)) => program.gather_distance(a, b),
                                (None, None) => 0.0,
                                _ => f64::INFINITY,
                            };
                        }
                        Gathered {
                            vertex: v,
                            acc,
                            discrepancy,
                        }
                    } else {
                        Gathered {
                            vertex: v,
                            acc: fresh(&mut m),
                            discrepancy: 0.0,
                        }
                    }
                })
                .collect();
            (out, m)
        });

        let mut apply_lists = Vec::with_capacity(gathered.len());
        for (list, m) in gathered {
            metrics.absorb(&m);
            let mut items = Vec::with_capacity(list.len());
            for g in list {
                max_discrepancy = max_discrepancy.max(g.discrepancy);
                if caching {
                    cache[g.vertex] = CacheSlot {
                        valid: true,
                        value: g.acc.clone(),
                        pending: None,
                    };
                }
                items.push((g.vertex, g.acc));
            }
            apply_lists.push(items);
        }

        // apply
        let states_ref = &states;
        let applied = options.mode.map(apply_lists, |items| {
            items
                .into_iter()
                .map(|(v, acc)| {
                    let mut s = states_ref[v].clone();
                    let scratch = program.apply(graph, v, &mut s, acc);
                    let changed = s != states_ref[v];
                    (v, s, scratch, changed)
                })
                .collect::<Vec<_>>()
        });
        let mut scatter_lists = Vec::with_capacity(applied.len());
        for list in applied {
            let mut items = Vec::with_capacity(list.len());
            for (v, s, scratch, changed) in list {
                metrics.compute_calls += 1;
                if changed {
                    metrics.vertex_updates += 1;
                    states[v] = s;
                }
                items.push((v, scratch));
            }
            scatter_lists.push(items);
        }

        // scatter
        let states_ref = &states;
        let edges_ref = &edge_data;
        let scattered = options.mode.map(scatter_lists, |items| {
            let mut out = ScatterOut::default();
            let mut origins = Vec::new();
            for (v, scratch) in items {
                let before = (out.signals.len(), out.deltas.len());
                for (u, e) in incident(graph, v, program.scatter_dir()) {
                    let nbr = Nbr {
                        id: u,
                        state: &states_ref[u],
                        edge: e,
                        data: &edges_ref[e],
                    };
                    let mut ctx = ScatterCtx { edge: e, out: &mut out };
                    program.scatter(graph, v, &states_ref[v], &scratch, nbr, &mut ctx);
                }
                origins.push((v, before, (out.signals.len(), out.deltas.len())));
            }
            (out, origins)
        });

        active.fill(false);
        for (out, origins) in scattered {
            for (v, (s0, d0), (s1, d1)) in origins {
                for (seq, &t) in out.signals[s0..s1].iter().enumerate() {
                    check_target(t, v, seq, assignment)?;
                    count_message(&mut metrics, assignment, v, t, SIGNAL_BYTES);
                }
                for (seq, (t, d)) in out.deltas[d0..d1].iter().enumerate() {
                    check_target(*t, v, seq, assignment)?;
                    if caching {
                        count_message(&mut metrics, assignment, v, *t, d.wire_size());
                    }
                }
            }
            for t in out.signals {
                active[t] = true;
            }
            if caching {
                for (t, d) in out.deltas {
                    let slot = &mut cache[t];
                    slot.pending = fold_opt(slot.pending.take(), Some(d), |a, b| program.gather_sum(a, b));
                }
            }
            for (e, data) in out.edge_writes {
                edge_data[e] = data;
            }
        }
        iteration += 1;
        metrics.supersteps += 1;
    }
    metrics.wall_time = started.elapsed();
    Ok(GasOutput {
        states,
        metrics,
        max_cache_discrepancy: max_discrepancy,
        schedule: Vec::new(),
    })
}

pub(crate) fn check_target(
    target: VertexId,
    from: VertexId,
    seq: usize,
    assignment: &PartitionAssignment,
) -> Result<()> {
    if target >= assignment.num_vertices() {
        return Err(Error::Routing {
            dst: target,
            src_worker: assignment.owner(from),
            seq: seq as u64,
            num_vertices: assignment.num_vertices(),
        });
    }
    Ok(())
}
