use serde::{Deserialize, Serialize};

use super::{ExactSum, RunMetrics};
use crate::error::{Error, Result};
use crate::graph::{PartitionAssignment, VertexId};

/// Declared serialized size of a message payload, used for traffic
/// accounting.
pub trait WireSize {
    fn wire_size(&self) -> usize;
}

macro_rules! fixed_wire_size {
    ($($t:ty),*) => {
        $(impl WireSize for $t {
            fn wire_size(&self) -> usize {
                std::mem::size_of::<$t>()
            }
        })*
    };
}

fixed_wire_size!(u8, u32, u64, usize, i32, i64, f64, bool, ExactSum);

impl<T: WireSize> WireSize for Vec<T> {
    fn wire_size(&self) -> usize {
        8 + self.iter().map(WireSize::wire_size).sum::<usize>()
    }
}

impl<T: WireSize> WireSize for Option<T> {
    fn wire_size(&self) -> usize {
        1 + self.as_ref().map_or(0, WireSize::wire_size)
    }
}

impl<A: WireSize, B: WireSize> WireSize for (A, B) {
    fn wire_size(&self) -> usize {
        self.0.wire_size() + self.1.wire_size()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEnvelope<M> {
    pub dst: VertexId,
    pub payload: M,
    pub src_worker: usize,
    pub seq: u64,
}

/// Reduces two messages for the same receiver into one. Implementations
/// must be associative and commutative.
pub trait Combiner<M>: Send + Sync {
    fn combine(&self, a: M, b: M) -> M;
}

impl<M, F> Combiner<M> for F
where
    F: Fn(M, M) -> M + Send + Sync,
{
    fn combine(&self, a: M, b: M) -> M {
        self(a, b)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SumCombiner;

impl<M: std::ops::Add<Output = M>> Combiner<M> for SumCombiner {
    fn combine(&self, a: M, b: M) -> M {
        a + b
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MinCombiner;

impl<M: Ord> Combiner<M> for MinCombiner {
    fn combine(&self, a: M, b: M) -> M {
        a.min(b)
    }
}

/// Worker-private staging area for one superstep's outgoing messages.
#[derive(Debug)]
pub struct Outbox<M> {
    worker: usize,
    next_seq: u64,
    envelopes: Vec<MessageEnvelope<M>>,
}

impl<M> Outbox<M> {
    pub fn new(worker: usize) -> Self {
        Outbox {
            worker,
            next_seq: 0,
            envelopes: Vec::new(),
        }
    }

    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn send(&mut self, dst: VertexId, payload: M) {
        self.envelopes.push(MessageEnvelope {
            dst,
            payload,
            src_worker: self.worker,
            seq: self.next_seq,
        });
        self.next_seq += 1;
    }

    pub fn len(&self) -> usize {
        self.envelopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelopes.is_empty()
    }

    pub fn envelopes(&self) -> &[MessageEnvelope<M>] {
        &self.envelopes
    }

    pub fn into_envelopes(self) -> Vec<MessageEnvelope<M>> {
        self.envelopes
    }
}

/// Routes one superstep's messages at the barrier.
///
/// Returns one inbox per vertex. Without a combiner every message arrives
/// individually, ordered by `(src_worker, seq)`. With a combiner each
/// worker first collapses its messages per destination; the receiver then
/// folds the per-worker results into a single message.
pub fn exchange<M: WireSize>(
    outboxes: Vec<Outbox<M>>,
    combiner: Option<&dyn Combiner<M>>,
    assignment: &PartitionAssignment,
    metrics: &mut RunMetrics,
) -> Result<Vec<Vec<M>>> {
    let n = assignment.num_vertices();
    for outbox in &outboxes {
        if let Some(bad) = outbox.envelopes.iter().find(|e| e.dst >= n) {
            return Err(Error::Routing {
                dst: bad.dst,
                src_worker: bad.src_worker,
                seq: bad.seq,
                num_vertices: n,
            });
        }
    }

    let mut sorted = outboxes;
    sorted.sort_by_key(|o| o.worker);
    let mut inboxes: Vec<Vec<M>> = std::iter::repeat_with(Vec::new).take(n).collect();

    match combiner {
        None => {
            for outbox in sorted {
                let worker = outbox.worker;
                for env in outbox.envelopes {
                    metrics.messages_sent += 1;
                    let local = assignment.owner(env.dst) == worker;
                    metrics.record_delivery(local, env.payload.wire_size());
                    inboxes[env.dst].push(env.payload);
                }
            }
        }
        Some(combiner) => {
            for outbox in sorted {
                let worker = outbox.worker;
                metrics.messages_sent += outbox.envelopes.len() as u64;
                let mut envs = outbox.envelopes;
                // stable: seq order survives within each destination
                envs.sort_by_key(|e| e.dst);
                let mut iter = envs.into_iter().peekable();
                while let Some(first) = iter.next() {
                    let dst = first.dst;
                    let mut acc = first.payload;
                    while let Some(next) = iter.next_if(|e| e.dst == dst) {
                        acc = combiner.combine(acc, next.payload);
                    }
                    let local = assignment.owner(dst) == worker;
                    metrics.record_delivery(local, acc.wire_size());
                    let inbox = &mut inboxes[dst];
                    match inbox.pop() {
                        None => inbox.push(acc),
                        Some(prev) => inbox.push(combiner.combine(prev, acc)),
                    }
                }
            }
        }
    }
    Ok(inboxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_messages() {
        let p = PartitionAssignment::single(4);
        let mut m = RunMetrics::default();
        let inboxes = exchange::<u64>(vec![Outbox::new(0)], None, &p, &mut m).unwrap();
        assert!(inboxes.iter().all(Vec::is_empty));
        assert_eq!(m, RunMetrics::default());
    }

    #[test]
    fn sum_combiner_collapses_to_one_message() {
        let p = PartitionAssignment::single(8);
        let mut out = Outbox::new(0);
        for x in [0.5, 0.25, 0.25] {
            out.send(7, ExactSum::from_f64(x));
        }
        let mut m = RunMetrics::default();
        let inboxes = exchange(vec![out], Some(&SumCombiner), &p, &mut m).unwrap();
        assert_eq!(inboxes[7].len(), 1);
        assert_eq!(inboxes[7][0].to_f64(), 1.0);
        assert_eq!((m.messages_sent, m.messages_delivered), (3, 1));
    }

    #[test]
    fn star_remote_traffic_with_and_without_combiner() {
        // hub 0 on worker B = 1, leaves 1..=10 on worker A = 0
        let mut owners = vec![0; 11];
        owners[0] = 1;
        let p = PartitionAssignment::from_owners(2, owners).unwrap();
        let make = || {
            let mut out = Outbox::new(0);
            for _ in 1..=10 {
                out.send(0, 1u64);
            }
            vec![out, Outbox::new(1)]
        };
        let mut plain = RunMetrics::default();
        let inbox = exchange(make(), None, &p, &mut plain).unwrap();
        assert_eq!(plain.messages_remote, 10);
        assert_eq!(inbox[0].len(), 10);

        let mut combined = RunMetrics::default();
        let inbox = exchange(make(), Some(&SumCombiner), &p, &mut combined).unwrap();
        assert_eq!(combined.messages_remote, 1);
        assert_eq!(inbox[0], vec![10]);
        assert_eq!(combined.messages_sent, 10);
    }

    #[test]
    fn delivery_order_is_by_worker_then_seq() {
        let p = PartitionAssignment::from_owners(3, vec![0, 1, 2]).unwrap();
        let mut w2 = Outbox::new(2);
        w2.send(0, 20u64);
        w2.send(0, 21);
        let mut w0 = Outbox::new(0);
        w0.send(0, 1u64);
        let mut w1 = Outbox::new(1);
        w1.send(0, 10u64);
        w1.send(0, 11);
        let mut m = RunMetrics::default();
        let inbox = exchange(vec![w2, w0, w1], None, &p, &mut m).unwrap();
        assert_eq!(inbox[0], vec![1, 10, 11, 20, 21]);
        assert_eq!((m.messages_local, m.messages_remote), (1, 4));
    }

    #[test]
    fn unknown_destination_is_a_routing_error() {
        let p = PartitionAssignment::single(3);
        let mut out = Outbox::new(0);
        out.send(1, 0u64);
        out.send(3, 0u64);
        match exchange(vec![out], None, &p, &mut RunMetrics::default()) {
            Err(Error::Routing { dst, seq, .. }) => assert_eq!((dst, seq), (3, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn check_combiner<C: Combiner<u64>>(c: &C, a: u64, b: u64, d: u64) -> bool {
        c.combine(a, b) == c.combine(b, a)
            && c.combine(c.combine(a, b), d) == c.combine(a, c.combine(b, d))
    }

    proptest! {
        #[test]
        fn registered_combiners_are_associative_and_commutative(
            a in 0u64..1 << 40, b in 0u64..1 << 40, d in 0u64..1 << 40,
            x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3,
        ) {
            prop_assert!(check_combiner(&SumCombiner, a, b, d));
            prop_assert!(check_combiner(&MinCombiner, a, b, d));
            let (x, y, z) = (ExactSum::from(x), ExactSum::from(y), ExactSum::from(z));
            prop_assert_eq!(SumCombiner.combine(x, y), SumCombiner.combine(y, x));
            prop_assert_eq!(
                SumCombiner.combine(SumCombiner.combine(x, y), z),
                SumCombiner.combine(x, SumCombiner.combine(y, z))
            );
        }

        #[test]
        fn combining_preserves_the_receivers_aggregate(
            msgs in proptest::collection::vec((0usize..3, 0usize..12, 0u64..1000), 0..200),
        ) {
            let owners: Vec<usize> = (0..12).map(|v| v % 3).collect();
            let p = PartitionAssignment::from_owners(3, owners).unwrap();
            let build = || {
                let mut outs: Vec<Outbox<u64>> = (0..3).map(Outbox::new).collect();
                for &(w, dst, x) in &msgs {
                    outs[w].send(dst, x);
                }
                outs
            };
            let mut raw_m = RunMetrics::default();
            let raw = exchange(build(), None, &p, &mut raw_m).unwrap();
            let mut comb_m = RunMetrics::default();
            let comb = exchange(build(), Some(&MinCombiner), &p, &mut comb_m).unwrap();
            for v in 0..12 {
                prop_assert_eq!(raw[v].iter().min(), comb[v].first());
                prop_assert!(comb[v].len() <= 1);
            }
            prop_assert!(comb_m.messages_delivered <= raw_m.messages_delivered);
            prop_assert_eq!(comb_m.messages_sent, raw_m.messages_sent);
            prop_assert_eq!(comb_m.messages_local + comb_m.messages_remote, comb_m.messages_delivered);
        }
    }
}
