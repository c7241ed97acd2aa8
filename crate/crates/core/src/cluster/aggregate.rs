use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ExactSum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AggValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Sum(ExactSum),
}

impl AggValue {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            AggValue::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_i64(self) -> Option<i64> {
        match self {
            AggValue::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            AggValue::Float(x) => Some(x),
            AggValue::Sum(s) => Some(s.to_f64()),
            AggValue::Int(i) => Some(i as f64),
            AggValue::Bool(_) => None,
        }
    }
}

/// Reduction used by an aggregator. All of them are associative and
/// commutative; floating sums go through [`ExactSum`] to keep that true.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggOp {
    And,
    Or,
    IntSum,
    IntMax,
    IntMin,
    FloatSum,
    FloatMax,
    FloatMin,
}

impl AggOp {
    pub fn identity(self) -> AggValue {
        match self {
            AggOp::And => AggValue::Bool(true),
            AggOp::Or => AggValue::Bool(false),
            AggOp::IntSum => AggValue::Int(0),
            AggOp::IntMax => AggValue::Int(i64::MIN),
            AggOp::IntMin => AggValue::Int(i64::MAX),
            AggOp::FloatSum => AggValue::Sum(ExactSum::ZERO),
            AggOp::FloatMax => AggValue::Float(f64::NEG_INFINITY),
            AggOp::FloatMin => AggValue::Float(f64::INFINITY),
        }
    }

    fn normalize(self, v: AggValue) -> Option<AggValue> {
        use AggValue::*;
        Some(match (self, v) {
            (AggOp::And | AggOp::Or, Bool(b)) => Bool(b),
            (AggOp::IntSum | AggOp::IntMax | AggOp::IntMin, Int(i)) => Int(i),
            (AggOp::FloatSum, Float(x)) => Sum(ExactSum::from_f64(x)),
            (AggOp::FloatSum, Sum(s)) => Sum(s),
            (AggOp::FloatMax | AggOp::FloatMin, Float(x)) if !x.is_nan() => Float(x),
            _ => return None,
        })
    }

    /// Both operands must already be normalized for this op.
    fn reduce(self, a: AggValue, b: AggValue) -> AggValue {
        use AggValue::*;
        match (self, a, b) {
            (AggOp::And, Bool(x), Bool(y)) => Bool(x && y),
            (AggOp::Or, Bool(x), Bool(y)) => Bool(x || y),
            (AggOp::IntSum, Int(x), Int(y)) => Int(x.wrapping_add(y)),
            (AggOp::IntMax, Int(x), Int(y)) => Int(x.max(y)),
            (AggOp::IntMin, Int(x), Int(y)) => Int(x.min(y)),
            (AggOp::FloatSum, Sum(x), Sum(y)) => Sum(x + y),
            (AggOp::FloatMax, Float(x), Float(y)) => Float(x.max(y)),
            (AggOp::FloatMin, Float(x), Float(y)) => Float(x.min(y)),
            _ => unreachable!("operands normalized for {self:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct AggSpec {
    op: AggOp,
    sticky: bool,
}

/// Registry and committed values of named global aggregators.
///
/// Values committed at the end of superstep `s` are what vertices read
/// during superstep `s + 1`. Non-sticky aggregators restart from the
/// identity every superstep; sticky ones keep accumulating.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregators {
    specs: BTreeMap<String, AggSpec>,
    values: BTreeMap<String, AggValue>,
}

impl Aggregators {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, op: AggOp) -> &mut Self {
        self.insert(name, op, false, op.identity())
    }

    pub fn register_sticky(&mut self, name: &str, op: AggOp) -> &mut Self {
        self.insert(name, op, true, op.identity())
    }

    /// Like [`register`](Self::register) but with an explicit value visible
    /// before the first commit.
    pub fn register_with_initial(&mut self, name: &str, op: AggOp, initial: AggValue) -> &mut Self {
        let initial = op
            .normalize(initial)
            .unwrap_or_else(|| panic!("initial value {initial:?} does not fit {op:?}"));
        self.insert(name, op, false, initial)
    }

    fn insert(&mut self, name: &str, op: AggOp, sticky: bool, initial: AggValue) -> &mut Self {
        self.specs.insert(name.to_owned(), AggSpec { op, sticky });
        self.values.insert(name.to_owned(), initial);
        self
    }

    pub fn get(&self, name: &str) -> Option<AggValue> {
        self.values.get(name).copied()
    }

    pub fn values(&self) -> &BTreeMap<String, AggValue> {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn partials(&self) -> AggPartials {
        AggPartials::default()
    }

    /// Folds every worker's partial values into the committed values.
    pub fn commit(&mut self, partials: Vec<AggPartials>) -> Result<&BTreeMap<String, AggValue>> {
        let mut next: BTreeMap<String, AggValue> = self
            .specs
            .iter()
            .map(|(name, spec)| {
                let start = if spec.sticky {
                    self.values[name]
                } else {
                    spec.op.identity()
                };
                (name.clone(), start)
            })
            .collect();
        for partial in partials {
            for (name, contributions) in partial.values {
                let spec = self.specs.get(&name).ok_or_else(|| {
                    Error::Config(format!("aggregator {name:?} is not registered"))
                })?;
                let slot = next.get_mut(&name).expect("registered");
                for value in contributions {
                    let value = spec.op.normalize(value).ok_or_else(|| {
                        Error::Config(format!(
                            "value {value:?} does not fit aggregator {name:?} ({:?})",
                            spec.op
                        ))
                    })?;
                    *slot = spec.op.reduce(*slot, value);
                }
            }
        }
        self.values = next;
        Ok(&self.values)
    }
}

/// One worker's contributions during a superstep.
#[derive(Debug, Clone, Default)]
pub struct AggPartials {
    values: BTreeMap<String, Vec<AggValue>>,
}

impl AggPartials {
    pub fn contribute(&mut self, name: &str, value: AggValue) {
        match self.values.get_mut(name) {
            Some(list) => list.push(value),
            None => {
                self.values.insert(name.to_owned(), vec![value]);
            }
        }
    }

    /// Pre-reduces contributions so a partial stays one value per name.
    pub(crate) fn compact(&mut self, registry: &Aggregators) {
        for (name, list) in self.values.iter_mut() {
            let Some(spec) = registry.specs.get(name) else {
                continue;
            };
            if list.len() < 2 {
                continue;
            }
            let mut acc = spec.op.identity();
            let mut ok = true;
            for &v in list.iter() {
                match spec.op.normalize(v) {
                    Some(v) => acc = spec.op.reduce(acc, v),
                    None => ok = false,
                }
            }
            if ok {
                *list = vec![acc];
            }
        }
    }
}
