//! PACT-style dataflow engine.
//!
//! A [`Plan`] is a DAG of second-order operators over tuple datasets:
//! sources, maps, equi-joins, group-bys, unions, bulk iterations and
//! sinks. The plan is type-checked while it is built, so an invalid plan
//! never starts executing. At run time every dataset is split into
//! `parallelism` partitions and joins and group-bys hash-repartition on
//! their keys; each moved tuple is counted as a message.

mod dataset;
mod exec;

use std::fmt;
use std::sync::Arc;

pub use dataset::{Dataset, FieldType, Tuple, Value};
pub use exec::{execute_dag, DagOutput, IterationReport};

use crate::error::{Error, Result};

pub type MapFn = Arc<dyn Fn(&[Value]) -> Vec<Tuple> + Send + Sync>;
pub type JoinFn = Arc<dyn Fn(&[Value], &[Value]) -> Vec<Tuple> + Send + Sync>;
/// Receives the group key and the group's tuples in sorted order.
pub type ReduceFn = Arc<dyn Fn(&[Value], &[Tuple]) -> Vec<Tuple> + Send + Sync>;
/// Receives the previous and the next partial solution, both sorted.
pub type CriterionFn = Arc<dyn Fn(&Dataset, &Dataset) -> bool + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

/// Per-group aggregation. Output tuples are the key fields followed by
/// the aggregate, except for `Reduce`, which emits whatever it likes.
#[derive(Clone)]
pub enum Aggregate {
    /// Int fields sum as `i64`; float fields sum exactly, so the result
    /// does not depend on partitioning.
    Sum(usize),
    Count,
    Min(usize),
    /// Most frequent value of an int field, ties to the smallest.
    MostFrequent(usize),
    Reduce { schema: Vec<FieldType>, f: ReduceFn },
}

impl fmt::Debug for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregate::Sum(i) => write!(f, "Sum({i})"),
            Aggregate::Count => f.write_str("Count"),
            Aggregate::Min(i) => write!(f, "Min({i})"),
            Aggregate::MostFrequent(i) => write!(f, "MostFrequent({i})"),
            Aggregate::Reduce { schema, .. } => write!(f, "Reduce({schema:?})"),
        }
    }
}

/// When a bulk iteration stops before its iteration budget.
#[derive(Clone)]
pub enum Convergence {
    /// Always runs the full budget.
    Fixed,
    /// Stops once an iteration reproduces its input multiset.
    Unchanged,
    Custom(CriterionFn),
}

#[derive(Clone)]
pub(crate) enum Node {
    Source {
        name: String,
    },
    Map {
        input: NodeId,
        f: MapFn,
    },
    Join {
        left: NodeId,
        right: NodeId,
        left_keys: Vec<usize>,
        right_keys: Vec<usize>,
        f: JoinFn,
    },
    Group {
        input: NodeId,
        keys: Vec<usize>,
        agg: Aggregate,
    },
    Union {
        left: NodeId,
        right: NodeId,
    },
    Iterate {
        initial: NodeId,
        bindings: Vec<(String, NodeId)>,
        body: Box<Plan>,
        max_iterations: u64,
        convergence: Convergence,
    },
    Sink {
        input: NodeId,
        name: String,
    },
}

/// Name of the body source that receives the current partial solution.
pub const PARTIAL: &str = "partial";
/// Name of the body sink that produces the next partial solution.
pub const NEXT: &str = "next";

/// Operator DAG. Nodes can only refer to earlier nodes, so insertion
/// order is a topological order.
#[derive(Clone, Default)]
pub struct Plan {
    pub(crate) nodes: Vec<Node>,
    pub(crate) schemas: Vec<Vec<FieldType>>,
}

impl Plan {
    pub fn new() -> Self {
        Plan::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn schema(&self, node: NodeId) -> &[FieldType] {
        &self.schemas[node.0]
    }

    pub fn sources(&self) -> impl Iterator<Item = (&str, &[FieldType])> {
        self.nodes.iter().zip(&self.schemas).filter_map(|(n, s)| match n {
            Node::Source { name } => Some((name.as_str(), s.as_slice())),
            _ => None,
        })
    }

    pub fn sinks(&self) -> impl Iterator<Item = (&str, &[FieldType])> {
        self.nodes.iter().zip(&self.schemas).filter_map(|(n, s)| match n {
            Node::Sink { name, .. } => Some((name.as_str(), s.as_slice())),
            _ => None,
        })
    }

    fn push(&mut self, node: Node, schema: Vec<FieldType>) -> NodeId {
        self.nodes.push(node);
        self.schemas.push(schema);
        NodeId(self.nodes.len() - 1)
    }

    fn check_node(&self, id: NodeId) -> Result<&[FieldType]> {
        match self.nodes.get(id.0) {
            Some(Node::Sink { .. }) => Err(Error::plan(format!("node {} is a sink and has no output", id.0))),
            Some(_) => Ok(&self.schemas[id.0]),
            None => Err(Error::plan(format!("node {} does not exist in this plan", id.0))),
        }
    }

    fn check_keys(schema: &[FieldType], keys: &[usize], what: &str) -> Result<()> {
        for &k in keys {
            if k >= schema.len() {
                return Err(Error::plan(format!(
                    "{what} key field {k} is out of range for arity {}",
                    schema.len()
                )));
            }
        }
        Ok(())
    }

    pub fn source(&mut self, name: &str, schema: Vec<FieldType>) -> Result<NodeId> {
        if self.sources().any(|(n, _)| n == name) {
            return Err(Error::plan(format!("duplicate source {name:?}")));
        }
        Ok(self.push(Node::Source { name: name.to_string() }, schema))
    }

    /// Tuple-at-a-time user function emitting any number of tuples.
    pub fn map<F>(&mut self, input: NodeId, schema: Vec<FieldType>, f: F) -> Result<NodeId>
    where
        F: Fn(&[Value]) -> Vec<Tuple> + Send + Sync + 'static,
    {
        self.check_node(input)?;
        Ok(self.push(Node::Map { input, f: Arc::new(f) }, schema))
    }

    /// Equi-join on composite keys; `f` sees every matching pair.
    pub fn join<F>(
        &mut self,
        left: NodeId,
        right: NodeId,
        left_keys: &[usize],
        right_keys: &[usize],
        schema: Vec<FieldType>,
        f: F,
    ) -> Result<NodeId>
    where
        F: Fn(&[Value], &[Value]) -> Vec<Tuple> + Send + Sync + 'static,
    {
        let ls = self.check_node(left)?.to_vec();
        let rs = self.check_node(right)?.to_vec();
        if left_keys.is_empty() || left_keys.len() != right_keys.len() {
            return Err(Error::plan("join needs the same non-zero number of keys on both sides"));
        }
        Self::check_keys(&ls, left_keys, "left join")?;
        Self::check_keys(&rs, right_keys, "right join")?;
        for (&a, &b) in left_keys.iter().zip(right_keys) {
            if ls[a] != rs[b] {
                return Err(Error::plan(format!(
                    "join key types differ: left field {a} is {}, right field {b} is {}",
                    ls[a], rs[b]
                )));
            }
        }
        Ok(self.push(
            Node::Join {
                left,
                right,
                left_keys: left_keys.to_vec(),
                right_keys: right_keys.to_vec(),
                f: Arc::new(f),
            },
            schema,
        ))
    }

    pub fn group(&mut self, input: NodeId, keys: &[usize], agg: Aggregate) -> Result<NodeId> {
        let s = self.check_node(input)?.to_vec();
        Self::check_keys(&s, keys, "group")?;
        let mut out: Vec<FieldType> = keys.iter().map(|&k| s[k]).collect();
        match &agg {
            Aggregate::Count => out.push(FieldType::Int),
            Aggregate::Sum(f) | Aggregate::Min(f) | Aggregate::MostFrequent(f) => {
                let t = *s
                    .get(*f)
                    .ok_or_else(|| Error::plan(format!("aggregate field {f} is out of range")))?;
                let ok = match agg {
                    Aggregate::Sum(_) => t != FieldType::List,
                    Aggregate::MostFrequent(_) => t == FieldType::Int,
                    _ => true,
                };
                if !ok {
                    return Err(Error::plan(format!("{agg:?} cannot aggregate a {t} field")));
                }
                out.push(t);
            }
            Aggregate::Reduce { schema, .. } => out = schema.clone(),
        }
        Ok(self.push(
            Node::Group {
                input,
                keys: keys.to_vec(),
                agg,
            },
            out,
        ))
    }

    /// Multiset union; both inputs must have the same schema.
    pub fn union(&mut self, left: NodeId, right: NodeId) -> Result<NodeId> {
        let ls = self.check_node(left)?.to_vec();
        let rs = self.check_node(right)?;
        if ls != rs {
            return Err(Error::plan(format!("union of differing schemas {ls:?} and {rs:?}")));
        }
        Ok(self.push(Node::Union { left, right }, ls))
    }

    /// Runs `body` repeatedly. The body reads the current solution from a
    /// source named [`PARTIAL`], loop-invariant inputs from sources named
    /// after `bindings`, and writes the next solution to a sink named
    /// [`NEXT`].
    pub fn iterate(
        &mut self,
        initial: NodeId,
        bindings: &[(&str, NodeId)],
        body: Plan,
        max_iterations: u64,
        convergence: Convergence,
    ) -> Result<NodeId> {
        let schema = self.check_node(initial)?.to_vec();
        let mut bound = Vec::with_capacity(bindings.len());
        for &(name, node) in bindings {
            if name == PARTIAL {
                return Err(Error::plan(format!("{PARTIAL:?} is reserved for the iteration input")));
            }
            bound.push((name.to_string(), node, self.check_node(node)?.to_vec()));
        }
        for (name, s) in body.sources() {
            let expected = if name == PARTIAL {
                Some(&schema)
            } else {
                bound.iter().find(|b| b.0 == name).map(|b| &b.2)
            };
            match expected {
                None => return Err(Error::plan(format!("iteration body source {name:?} is not bound"))),
                Some(e) if e.as_slice() != s => {
                    return Err(Error::plan(format!(
                        "iteration body source {name:?} expects {s:?}, bound input has {e:?}"
                    )))
                }
                _ => {}
            }
        }
        let nexts: Vec<_> = body.sinks().filter(|(n, _)| *n == NEXT).collect();
        match nexts.as_slice() {
            [(_, s)] if *s == schema.as_slice() => {}
            [(_, s)] => {
                return Err(Error::plan(format!(
                    "iteration produces {s:?} but its input is {schema:?}"
                )))
            }
            _ => return Err(Error::plan(format!("iteration body needs exactly one {NEXT:?} sink"))),
        }
        if max_iterations == 0 {
            return Err(Error::plan("an iteration needs a budget of at least one"));
        }
        Ok(self.push(
            Node::Iterate {
                initial,
                bindings: bound.into_iter().map(|(n, id, _)| (n, id)).collect(),
                body: Box::new(body),
                max_iterations,
                convergence,
            },
            schema,
        ))
    }

    pub fn sink(&mut self, input: NodeId, name: &str) -> Result<()> {
        let s = self.check_node(input)?.to_vec();
        if self.sinks().any(|(n, _)| n == name) {
            return Err(Error::plan(format!("duplicate sink {name:?}")));
        }
        self.push(
            Node::Sink {
                input,
                name: name.to_string(),
            },
            s,
        );
        Ok(())
    }
}
