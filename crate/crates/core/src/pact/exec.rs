use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use super::dataset::check_tuple;
use super::{Aggregate, Convergence, Dataset, FieldType, Node, NodeId, Plan, Tuple, Value, NEXT, PARTIAL};
use crate::cluster::{ExactSum, ExecMode, RunMetrics};
use crate::error::{Error, Result};

type Parts = Vec<Vec<Tuple>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationReport {
    pub iterations: u64,
    /// False when the budget ran out first. Always true for
    /// [`Convergence::Fixed`].
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DagOutput {
    /// Sink contents, sorted.
    pub outputs: BTreeMap<String, Dataset>,
    /// Shuffled tuples count as messages; bulk iterations as supersteps.
    pub metrics: RunMetrics,
    /// One report per executed iteration operator, in execution order.
    pub iterations: Vec<IterationReport>,
}

pub fn execute_dag(plan: &Plan, sources: &BTreeMap<String, Dataset>, parallelism: usize) -> Result<DagOutput> {
    if parallelism == 0 {
        return Err(Error::argument("parallelism must be at least 1"));
    }
    let mut inputs = BTreeMap::new();
    for (name, schema) in plan.sources() {
        let data = sources
            .get(name)
            .ok_or_else(|| Error::plan(format!("no dataset supplied for source {name:?}")))?;
        if data.schema() != schema {
            return Err(Error::plan(format!(
                "source {name:?} declared as {schema:?} but the dataset is {:?}",
                data.schema()
            )));
        }
        let mut parts: Parts = vec![Vec::new(); parallelism];
        for (i, t) in data.tuples().iter().enumerate() {
            parts[i % parallelism].push(t.clone());
        }
        inputs.insert(name.to_string(), Arc::new(parts));
    }
    let started = Instant::now();
    let mut exec = Exec {
        p: parallelism,
        mode: if parallelism > 1 {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        },
        metrics: RunMetrics::default(),
        iterations: Vec::new(),
    };
    let sinks = exec.run(plan, &inputs)?;
    let mut outputs = BTreeMap::new();
    for (name, schema) in plan.sinks() {
        let parts = &sinks[name];
        let tuples: Vec<Tuple> = parts.iter().flatten().cloned().collect();
        outputs.insert(
            name.to_string(),
            Dataset::from_parts_unchecked(schema.to_vec(), tuples).sorted(),
        );
    }
    exec.metrics.wall_time = started.elapsed();
    Ok(DagOutput {
        outputs,
        metrics: exec.metrics,
        iterations: exec.iterations,
    })
}

struct Exec {
    p: usize,
    mode: ExecMode,
    metrics: RunMetrics,
    iterations: Vec<IterationReport>,
}

fn key_hash(t: &[Value], keys: &[usize]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut h = 0u64;
    for &k in keys {
        h = match &t[k] {
            Value::Int(i) => mix(h ^ *i as u64),
            Value::Float(x) => mix(h ^ x.to_bits()),
            Value::List(l) => l.iter().fold(mix(h ^ l.len() as u64), |a, &x| mix(a ^ x as u64)),
        };
    }
    h
}

fn key_of(t: &[Value], keys: &[usize]) -> Vec<Value> {
    keys.iter().map(|&k| t[k].clone()).collect()
}

fn tuple_size(t: &[Value]) -> usize {
    t.iter().map(Value::wire_size).sum()
}

fn checked(schema: &[FieldType], out: Vec<Tuple>) -> Result<Vec<Tuple>> {
    for t in &out {
        check_tuple(schema, t).map_err(|e| Error::plan(format!("user function output does not match its schema: {e}")))?;
    }
    Ok(out)
}

impl Exec {
    fn run(&mut self, plan: &Plan, inputs: &BTreeMap<String, Arc<Parts>>) -> Result<BTreeMap<String, Arc<Parts>>> {
        let mut results: Vec<Option<Arc<Parts>>> = vec![None; plan.nodes.len()];
        let mut sinks = BTreeMap::new();
        let get = |results: &[Option<Arc<Parts>>], id: NodeId| results[id.0].clone().expect("inputs precede their users");
        for (i, node) in plan.nodes.iter().enumerate() {
            let schema = &plan.schemas[i];
            let out = match node {
                Node::Source { name } => inputs[name].clone(),
                Node::Map { input, f } => {
                    let data = get(&results, *input);
                    let parts: Vec<&Vec<Tuple>> = data.iter().collect();
                    let done = self.mode.map(parts, |part| {
                        let mut out = Vec::new();
                        for t in part {
                            out.extend(checked(schema, f(t))?);
                        }
                        Ok((out, part.len() as u64))
                    });
                    Arc::new(self.collect(done)?)
                }
                Node::Join {
                    left,
                    right,
                    left_keys,
                    right_keys,
                    f,
                } => {
                    let l = self.shuffle(&get(&results, *left), left_keys);
                    let r = self.shuffle(&get(&results, *right), right_keys);
                    let pairs: Vec<(Vec<Tuple>, Vec<Tuple>)> = l.into_iter().zip(r).collect();
                    let done = self.mode.map(pairs, |(l, r)| {
                        let mut table: HashMap<Vec<Value>, Vec<&Tuple>> = HashMap::new();
                        for t in &r {
                            table.entry(key_of(t, right_keys)).or_default().push(t);
                        }
                        let mut out = Vec::new();
                        let mut calls = 0;
                        for a in &l {
                            if let Some(matches) = table.get(&key_of(a, left_keys)) {
                                for b in matches {
                                    calls += 1;
                                    out.extend(checked(schema, f(a, b))?);
                                }
                            }
                        }
                        Ok((out, calls))
                    });
                    Arc::new(self.collect(done)?)
                }
                Node::Group { input, keys, agg } => {
                    let shuffled = self.shuffle(&get(&results, *input), keys);
                    let done = self.mode.map(shuffled, |part| {
                        let mut groups: BTreeMap<Vec<Value>, Vec<Tuple>> = BTreeMap::new();
                        for t in part {
                            groups.entry(key_of(&t, keys)).or_default().push(t);
                        }
                        let mut out = Vec::with_capacity(groups.len());
                        let mut calls = 0;
                        for (key, mut group) in groups {
                            match agg {
                                Aggregate::Reduce { f, .. } => {
                                    group.sort();
                                    calls += 1;
                                    out.extend(checked(schema, f(&key, &group))?);
                                }
                                _ => {
                                    let v = aggregate(agg, &group);
                                    let mut t = key;
                                    t.push(v);
                                    out.push(t);
                                }
                            }
                        }
                        Ok((out, calls))
                    });
                    Arc::new(self.collect(done)?)
                }
                Node::Union { left, right } => {
                    let (l, r) = (get(&results, *left), get(&results, *right));
                    Arc::new(
                        l.iter()
                            .zip(r.iter())
                            .map(|(a, b)| a.iter().chain(b).cloned().collect())
                            .collect(),
                    )
                }
                Node::Iterate {
                    initial,
                    bindings,
                    body,
                    max_iterations,
                    convergence,
                } => {
                    let mut env: BTreeMap<String, Arc<Parts>> = bindings
                        .iter()
                        .map(|(name, id)| (name.clone(), get(&results, *id)))
                        .collect();
                    let mut current = get(&results, *initial);
                    let mut report = IterationReport {
                        iterations: 0,
                        converged: matches!(convergence, Convergence::Fixed),
                    };
                    while report.iterations < *max_iterations {
                        env.insert(PARTIAL.to_string(), current.clone());
                        let next = self.run(body, &env)?.remove(NEXT).expect("validated next sink");
                        report.iterations += 1;
                        self.metrics.supersteps += 1;
                        let done = match convergence {
                            Convergence::Fixed => false,
                            Convergence::Unchanged => gather(schema, &current) == gather(schema, &next),
                            Convergence::Custom(f) => f(&gather(schema, &current), &gather(schema, &next)),
                        };
                        current = next;
                        if done {
                            report.converged = true;
                            break;
                        }
                    }
                    if !report.converged {
                        self.metrics.step_limit_reached = true;
                    }
                    self.iterations.push(report);
                    current
                }
                Node::Sink { input, name } => {
                    sinks.insert(name.clone(), get(&results, *input));
                    continue;
                }
            };
            results[i] = Some(out);
        }
        Ok(sinks)
    }

    fn collect(&mut self, done: Vec<Result<(Vec<Tuple>, u64)>>) -> Result<Parts> {
        let mut parts = Vec::with_capacity(done.len());
        for r in done {
            let (out, calls) = r?;
            self.metrics.compute_calls += calls;
            parts.push(out);
        }
        Ok(parts)
    }

    /// Hash-repartitions on `keys`, counting every tuple as a message.
    fn shuffle(&mut self, parts: &Parts, keys: &[usize]) -> Parts {
        let mut out: Parts = vec![Vec::new(); self.p];
        for (i, part) in parts.iter().enumerate() {
            for t in part {
                let dst = (key_hash(t, keys) % self.p as u64) as usize;
                self.metrics.record_message(dst == i, tuple_size(t));
                out[dst].push(t.clone());
            }
        }
        out
    }
}

fn gather(schema: &[FieldType], parts: &Parts) -> Dataset {
    Dataset::from_parts_unchecked(schema.to_vec(), parts.iter().flatten().cloned().collect()).sorted()
}

fn aggregate(agg: &Aggregate, group: &[Tuple]) -> Value {
    match *agg {
        Aggregate::Count => Value::Int(group.len() as i64),
        Aggregate::Sum(f) => match group[0][f] {
            Value::Int(_) => Value::Int(group.iter().map(|t| t[f].as_int().unwrap_or(0)).sum()),
            _ => Value::Float(
                group
                    .iter()
                    .map(|t| ExactSum::from_f64(t[f].as_float().unwrap_or(0.0)))
                    .sum::<ExactSum>()
                    .to_f64(),
            ),
        },
        Aggregate::Min(f) => group.iter().map(|t| &t[f]).min().cloned().expect("groups are non-empty"),
        Aggregate::MostFrequent(f) => {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for t in group {
                *counts.entry(t[f].as_int().unwrap_or(0)).or_default() += 1;
            }
            let mut best = (0, i64::MAX);
            for (v, c) in counts {
                if c > best.0 {
                    best = (c, v);
                }
            }
            Value::Int(best.1)
        }
        Aggregate::Reduce { .. } => unreachable!("reduce is applied by the caller"),
    }
}
