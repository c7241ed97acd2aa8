use super::*;
use crate::cluster::ExecMode;
use crate::error::Error;
use crate::graph::{erdos_renyi, partition_hash, path, star};

/// Min-label components, signalling neighbors on change.
struct Cc;

impl GasProgram for Cc {
    type State = usize;
    type Gather = usize;
    type EdgeData = ();
    type Scratch = bool;

    fn init(&self, v: VertexId, _: &Graph) -> usize {
        v
    }
    fn gather_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn scatter_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn gather(&self, _: &Graph, _: VertexId, _: &usize, nbr: Nbr<'_, usize, ()>) -> usize {
        *nbr.state
    }
    fn gather_sum(&self, a: usize, b: usize) -> usize {
        a.min(b)
    }
    fn apply(&self, _: &Graph, _: VertexId, state: &mut usize, acc: Option<usize>) -> bool {
        match acc {
            Some(m) if m < *state => {
                *state = m;
                true
            }
            _ => false,
        }
    }
    fn scatter(
        &self,
        _: &Graph,
        _: VertexId,
        _: &usize,
        changed: &bool,
        nbr: Nbr<'_, usize, ()>,
        ctx: &mut ScatterCtx<'_, usize, ()>,
    ) {
        if *changed {
            ctx.signal(nbr.id);
        }
    }
}

struct MsgCc;

impl MessageProgram for MsgCc {
    type State = usize;
    type Message = usize;
    type Scratch = bool;

    fn init(&self, v: VertexId, _: &Graph) -> usize {
        v
    }
    fn combine(&self, a: usize, b: usize) -> usize {
        a.min(b)
    }
    fn apply(&self, _: &Graph, _: VertexId, state: &mut usize, msg: Option<usize>, first: bool) -> bool {
        match msg {
            Some(m) if m < *state => {
                *state = m;
                true
            }
            _ => first,
        }
    }
    fn scatter(&self, graph: &Graph, v: VertexId, state: &usize, changed: &bool, ctx: &mut MessageCtx<'_, usize>) {
        if *changed {
            for &u in graph.neighbors(v) {
                ctx.send(u, *state);
            }
        }
    }
}

fn union_find(g: &Graph) -> Vec<usize> {
    let mut parent: Vec<usize> = g.vertices().collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for (u, v) in g.edges() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        parent[a.max(b)] = a.min(b);
    }
    (0..g.num_vertices()).map(|v| find(&mut parent, v)).collect()
}

#[test]
fn sync_cc_on_an_edge() {
    let g = path(2);
    let out = run_gas_sync(&g, &PartitionAssignment::single(2), &Cc, &SyncOptions::default()).unwrap();
    assert_eq!(out.states, vec![0, 0]);
    // vertex 1 changes and signals 0; 0 then finds nothing new
    assert_eq!(out.metrics.vertex_updates, 1);
    assert_eq!(out.metrics.supersteps, 2);
}

#[test]
fn fixpoint_program_stops_after_one_iteration() {
    let g = path(5);
    let opts = SyncOptions {
        initial: Some(vec![0]),
        ..Default::default()
    };
    let out = run_gas_sync(&g, &PartitionAssignment::single(5), &Cc, &opts).unwrap();
    assert_eq!(out.metrics.supersteps, 1);
    assert_eq!(out.metrics.vertex_updates, 0);
}

#[test]
fn sync_is_worker_and_mode_invariant() {
    for seed in 0..10 {
        let g = erdos_renyi(80, 0.03, false, seed);
        let truth = union_find(&g);
        for k in [1, 2, 4, 8] {
            let p = partition_hash(&g, k, seed).unwrap();
            for mode in [ExecMode::Sequential, ExecMode::Parallel] {
                let opts = SyncOptions { mode, ..Default::default() };
                let out = run_gas_sync(&g, &p, &Cc, &opts).unwrap();
                assert_eq!(out.states, truth);
            }
        }
    }
}

#[test]
fn async_path_in_reverse_order() {
    let g = path(4);
    let opts = AsyncOptions {
        order: QueueOrder::Explicit(vec![3, 2, 1, 0]),
        ..Default::default()
    };
    let out = run_gas_async(&g, &PartitionAssignment::single(4), &Cc, &opts).unwrap();
    assert_eq!(out.states, vec![0; 4]);
    assert!(out.metrics.vertex_updates <= 8, "{}", out.metrics.vertex_updates);
}

#[test]
fn async_isolated_vertex_runs_once() {
    let g = Graph::from_edges(1, false, &[]);
    let out = run_gas_async(&g, &PartitionAssignment::single(1), &Cc, &AsyncOptions::default()).unwrap();
    assert_eq!(out.metrics.compute_calls, 1);
    assert_eq!(out.states, vec![0]);
}

#[test]
fn async_is_deterministic_and_bounded() {
    let g = erdos_renyi(150, 0.02, false, 3);
    let p = PartitionAssignment::single(150);
    let a = run_gas_async(&g, &p, &Cc, &AsyncOptions::seeded(9)).unwrap();
    let b = run_gas_async(&g, &p, &Cc, &AsyncOptions::seeded(9)).unwrap();
    assert_eq!(a.states, union_find(&g));
    assert_eq!(a.metrics.vertex_updates, b.metrics.vertex_updates);
    assert_eq!(a.metrics.compute_calls, b.metrics.compute_calls);

    let limited = AsyncOptions {
        max_updates: 10,
        ..AsyncOptions::seeded(9)
    };
    let out = run_gas_async(&g, &p, &Cc, &limited).unwrap();
    assert!(out.metrics.step_limit_reached);
    assert_eq!(out.metrics.compute_calls, 10);
}

#[test]
fn parallel_async_replays_serially() {
    let g = erdos_renyi(300, 0.02, false, 4);
    let p = partition_hash(&g, 4, 0).unwrap();
    let opts = AsyncOptions {
        mode: ExecMode::Parallel,
        threads: 4,
        record_schedule: true,
        ..AsyncOptions::seeded(1)
    };
    let out = run_gas_async(&g, &p, &Cc, &opts).unwrap();
    assert_eq!(out.states, union_find(&g));
    assert_eq!(out.schedule.len() as u64, out.metrics.compute_calls);
    let replay = replay_schedule(&g, &p, &Cc, &opts, &out.schedule).unwrap();
    assert_eq!(replay.states, out.states);
}

#[test]
fn signal_to_missing_vertex_is_routing_error() {
    struct Bad;
    impl GasProgram for Bad {
        type State = ();
        type Gather = u64;
        type EdgeData = ();
        type Scratch = ();
        fn init(&self, _: VertexId, _: &Graph) {}
        fn gather_dir(&self) -> EdgeDir {
            EdgeDir::None
        }
        fn scatter_dir(&self) -> EdgeDir {
            EdgeDir::All
        }
        fn gather(&self, _: &Graph, _: VertexId, _: &(), _: Nbr<'_, (), ()>) -> u64 {
            0
        }
        fn gather_sum(&self, a: u64, b: u64) -> u64 {
            a + b
        }
        fn apply(&self, _: &Graph, _: VertexId, _: &mut (), _: Option<u64>) {}
        fn scatter(&self, _: &Graph, _: VertexId, _: &(), _: &(), _: Nbr<'_, (), ()>, ctx: &mut ScatterCtx<'_, u64, ()>) {
            ctx.signal(42);
        }
    }
    let g = path(3);
    let p = PartitionAssignment::single(3);
    assert!(matches!(
        run_gas_sync(&g, &p, &Bad, &SyncOptions::default()),
        Err(Error::Routing { dst: 42, .. })
    ));
    assert!(matches!(
        run_gas_async(&g, &p, &Bad, &AsyncOptions::default()),
        Err(Error::Routing { dst: 42, .. })
    ));
}

#[test]
fn message_api_matches_gather_cc() {
    for seed in 0..50 {
        let g = erdos_renyi(60, 0.04, false, 100 + seed);
        let p = partition_hash(&g, 3, seed).unwrap();
        let gathered = run_gas_sync(&g, &p, &Cc, &SyncOptions::default()).unwrap().states;
        for engine in [MessageEngine::Sync, MessageEngine::Async] {
            let opts = MessageOptions { engine, ..Default::default() };
            let out = run_gas_message(&g, &p, &MsgCc, &opts).unwrap();
            assert_eq!(out.states, gathered);
        }
    }
}

#[test]
fn message_api_combines_at_the_hub() {
    let g = star(5, false);
    let out = run_gas_message(&g, &PartitionAssignment::single(6), &MsgCc, &MessageOptions::default()).unwrap();
    assert_eq!(out.states, vec![0; 6]);
    // round 0: 5 leaf sends fold into 1 hub delivery, plus 5 hub-to-leaf;
    // round 1: the relabeled leaves send 5 more, again 1 delivery
    assert_eq!(out.metrics.messages_sent, 15);
    assert_eq!(out.metrics.messages_delivered, 7);
    assert_eq!(out.metrics.supersteps, 3);
}
