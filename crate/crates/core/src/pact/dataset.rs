use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldType {
    Int,
    Float,
    List,
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldType::Int => "int",
            FieldType::Float => "float",
            FieldType::List => "list",
        })
    }
}

/// One tuple field. Floats compare and hash by bit pattern so datasets
/// can be treated as exact multisets.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    List(Vec<i64>),
}

impl Value {
    pub fn field_type(&self) -> FieldType {
        match self {
            Value::Int(_) => FieldType::Int,
            Value::Float(_) => FieldType::Float,
            Value::List(_) => FieldType::List,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[i64]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }

    /// Declared wire size, for shuffle traffic accounting.
    pub(crate) fn wire_size(&self) -> usize {
        match self {
            Value::Int(_) | Value::Float(_) => 8,
            Value::List(l) => 8 + 8 * l.len(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Float(_) => 1,
            Value::List(_) => 2,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::List(a), Value::List(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Int(i) => i.hash(state),
            Value::Float(x) => x.to_bits().hash(state),
            Value::List(l) => l.hash(state),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

pub type Tuple = Vec<Value>;

pub(crate) fn check_tuple(schema: &[FieldType], tuple: &[Value]) -> Result<()> {
    if tuple.len() != schema.len() {
        return Err(Error::plan(format!(
            "tuple of arity {} where the schema has {} fields",
            tuple.len(),
            schema.len()
        )));
    }
    for (i, (v, t)) in tuple.iter().zip(schema).enumerate() {
        if v.field_type() != *t {
            return Err(Error::plan(format!(
                "field {i} holds a {} value, schema says {t}",
                v.field_type()
            )));
        }
    }
    Ok(())
}

/// A multiset of tuples sharing one schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Vec<FieldType>,
    tuples: Vec<Tuple>,
}

impl Dataset {
    pub fn new(schema: Vec<FieldType>, tuples: Vec<Tuple>) -> Result<Self> {
        for t in &tuples {
            check_tuple(&schema, t)?;
        }
        Ok(Dataset { schema, tuples })
    }

    pub fn empty(schema: Vec<FieldType>) -> Self {
        Dataset {
            schema,
            tuples: Vec::new(),
        }
    }

    pub(crate) fn from_parts_unchecked(schema: Vec<FieldType>, tuples: Vec<Tuple>) -> Self {
        Dataset { schema, tuples }
    }

    pub fn schema(&self) -> &[FieldType] {
        &self.schema
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn into_tuples(self) -> Vec<Tuple> {
        self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Canonical order, so equal multisets compare equal.
    pub fn sorted(mut self) -> Self {
        self.tuples.sort();
        self
    }

    pub fn same_multiset(&self, other: &Dataset) -> bool {
        self.schema == other.schema && self.clone().sorted().tuples == other.clone().sorted().tuples
    }

    /// One tuple per line, fields separated by commas, list items by `;`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.tuples {
            let fields: Vec<String> = t
                .iter()
                .map(|v| match v {
                    Value::Int(i) => i.to_string(),
                    Value::Float(x) => format!("{x:?}"),
                    Value::List(l) => l.iter().map(i64::to_string).collect::<Vec<_>>().join(";"),
                })
                .collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(schema: Vec<FieldType>, input: R) -> Result<Self> {
        let mut tuples = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != schema.len() {
                return Err(parse_err(format!(
                    "expected {} fields, found {}",
                    schema.len(),
                    fields.len()
                )));
            }
            let mut tuple = Vec::with_capacity(fields.len());
            for (f, t) in fields.iter().zip(&schema) {
                let f = f.trim();
                let v = match t {
                    FieldType::Int => Value::Int(f.parse().map_err(|_| parse_err(format!("bad int {f:?}")))?),
                    FieldType::Float => {
                        Value::Float(f.parse().map_err(|_| parse_err(format!("bad float {f:?}")))?)
                    }
                    FieldType::List if f.is_empty() => Value::List(Vec::new()),
                    FieldType::List => Value::List(
                        f.split(';')
                            .map(|x| x.trim().parse())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| parse_err(format!("bad list {f:?}")))?,
                    ),
                };
                tuple.push(v);
            }
            tuples.push(tuple);
        }
        Ok(Dataset { schema, tuples })
    }
}
