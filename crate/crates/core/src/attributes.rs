//! Per-object attribute observations.
//!
//! Each attribute is stored column-wise as a flat list of entries grouped by
//! owning object. A categorical entry is `(term, count)`; a numerical entry is
//! one observed value. Objects with no entries simply do not hold the
//! attribute, which is the normal case.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::graph::ObjectIx;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttributeKind {
    Categorical { vocab: usize },
    Numerical,
}

impl AttributeKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttributeKind::Categorical { .. } => "categorical",
            AttributeKind::Numerical => "numerical",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
}

/// Observations of one attribute across all objects.
#[derive(Clone, Debug, PartialEq)]
pub struct Attribute {
    spec: AttributeSpec,
    offsets: Vec<usize>,
    owners: Vec<ObjectIx>,
    /// term index (0-based) for categorical entries, the value for numerical ones
    values: Vec<f64>,
    /// term count for categorical entries, 1 for numerical ones
    weights: Vec<f64>,
}

impl Attribute {
    pub fn spec(&self) -> &AttributeSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn kind(&self) -> AttributeKind {
        self.spec.kind
    }

    pub fn num_objects(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.values.len()
    }

    pub fn entries(&self, v: ObjectIx) -> Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    /// Whether `v` belongs to V_X, i.e. holds at least one observation.
    pub fn holds(&self, v: ObjectIx) -> bool {
        self.offsets[v + 1] > self.offsets[v]
    }

    pub fn holders(&self) -> impl Iterator<Item = ObjectIx> + '_ {
        (0..self.num_objects()).filter(|&v| self.holds(v))
    }

    pub fn owner(&self, entry: usize) -> ObjectIx {
        self.owners[entry]
    }

    pub fn value(&self, entry: usize) -> f64 {
        self.values[entry]
    }

    pub fn weight(&self, entry: usize) -> f64 {
        self.weights[entry]
    }

    pub fn term(&self, entry: usize) -> usize {
        self.values[entry] as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Numerical observations of `v`.
    pub fn observations(&self, v: ObjectIx) -> &[f64] {
        &self.values[self.entries(v)]
    }

    /// Total observation mass (sum of counts, or number of values).
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeTable {
    n_objects: usize,
    attributes: Vec<Attribute>,
}

impl AttributeTable {
    pub fn empty(n_objects: usize) -> Self {
        AttributeTable {
            n_objects,
            attributes: Vec::new(),
        }
    }

    pub fn num_objects(&self) -> usize {
        self.n_objects
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name() == name)
    }

    /// Table restricted to the named attributes, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<AttributeTable> {
        let attributes = names
            .iter()
            .map(|n| {
                self.get(n.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::UnknownAttribute(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AttributeTable {
            n_objects: self.n_objects,
            attributes,
        })
    }
}

#[derive(Debug)]
enum PendingColumn {
    Categorical(Vec<BTreeMap<u32, u64>>),
    Numerical(Vec<Vec<f64>>),
}

#[derive(Debug)]
pub struct AttributeTableBuilder {
    n_objects: usize,
    specs: Vec<AttributeSpec>,
    columns: Vec<PendingColumn>,
}

impl AttributeTableBuilder {
    pub fn new(n_objects: usize) -> Self {
        AttributeTableBuilder {
            n_objects,
            specs: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn declare(&mut self, name: &str, kind: AttributeKind) -> Result<usize> {
        if let Some(i) = self.specs.iter().position(|s| s.name == name) {
            if self.specs[i].kind != kind {
                return Err(Error::Config(format!("attribute `{name}` declared twice with different kinds")));
            }
            return Ok(i);
        }
        if let AttributeKind::Categorical { vocab: 0 } = kind {
            return Err(Error::Config(format!("attribute `{name}` has an empty vocabulary")));
        }
        self.specs.push(AttributeSpec {
            name: name.to_string(),
            kind,
        });
        self.columns.push(match kind {
            AttributeKind::Categorical { .. } => PendingColumn::Categorical(vec![BTreeMap::new(); self.n_objects]),
            AttributeKind::Numerical => PendingColumn::Numerical(vec![Vec::new(); self.n_objects]),
        });
        Ok(self.specs.len() - 1)
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn spec(&self, attr: usize) -> &AttributeSpec {
        &self.specs[attr]
    }

    /// Adds `count` occurrences of the 0-based `term`. Repeated terms accumulate.
    pub fn add_count(&mut self, v: ObjectIx, attr: usize, term: usize, count: u64) -> Result<()> {
        let spec = &self.specs[attr];
        let AttributeKind::Categorical { vocab } = spec.kind else {
            return Err(Error::AttributeKind {
                attribute: spec.name.clone(),
                expected: "numerical",
                found: "categorical",
            });
        };
        if term >= vocab {
            return Err(Error::TermOutOfRange {
                attribute: spec.name.clone(),
                term: term + 1,
                vocab,
            });
        }
        if v >= self.n_objects {
            return Err(Error::UnknownObject(v.to_string()));
        }
        if count == 0 {
            return Ok(());
        }
        if let PendingColumn::Categorical(col) = &mut self.columns[attr] {
            *col[v].entry(term as u32).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn add_value(&mut self, v: ObjectIx, attr: usize, value: f64) -> Result<()> {
        let spec = &self.specs[attr];
        if spec.kind != AttributeKind::Numerical {
            return Err(Error::AttributeKind {
                attribute: spec.name.clone(),
                expected: "categorical",
                found: "numerical",
            });
        }
        if !value.is_finite() {
            return Err(Error::Config(format!("non-finite observation for `{}`", spec.name)));
        }
        if v >= self.n_objects {
            return Err(Error::UnknownObject(v.to_string()));
        }
        if let PendingColumn::Numerical(col) = &mut self.columns[attr] {
            col[v].push(value);
        }
        Ok(())
    }

    pub fn build(self) -> AttributeTable {
        let n = self.n_objects;
        let attributes = self
            .specs
            .into_iter()
            .zip(self.columns)
            .map(|(spec, column)| {
                let mut offsets = Vec::with_capacity(n + 1);
                let mut owners = Vec::new();
                let mut values = Vec::new();
                let mut weights = Vec::new();
                offsets.push(0);
                match column {
                    PendingColumn::Categorical(col) => {
                        for (v, terms) in col.into_iter().enumerate() {
                            for (term, count) in terms {
                                owners.push(v);
                                values.push(f64::from(term));
                                weights.push(count as f64);
                            }
                            offsets.push(values.len());
                        }
                    }
                    PendingColumn::Numerical(col) => {
                        for (v, obs) in col.into_iter().enumerate() {
                            for x in obs {
                                owners.push(v);
                                values.push(x);
                                weights.push(1.0);
                            }
                            offsets.push(values.len());
                        }
                    }
                }
                Attribute {
                    spec,
                    offsets,
                    owners,
                    values,
                    weights,
                }
            })
            .collect();
        AttributeTable {
            n_objects: n,
            attributes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_counts_merge_per_term() {
        let mut b = AttributeTableBuilder::new(2);
        let a = b.declare("text", AttributeKind::Categorical { vocab: 3 }).unwrap();
        b.add_count(0, a, 2, 1).unwrap();
        b.add_count(0, a, 0, 2).unwrap();
        b.add_count(0, a, 2, 4).unwrap();
        let t = b.build();
        let text = t.get("text").unwrap();
        let e = text.entries(0);
        let got: Vec<_> = e.map(|i| (text.term(i), text.weight(i))).collect();
        assert_eq!(got, vec![(0, 2.0), (2, 5.0)]);
        assert!(!text.holds(1));
        assert_eq!(text.holders().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn kind_mismatch_and_range_errors() {
        let mut b = AttributeTableBuilder::new(1);
        let text = b.declare("text", AttributeKind::Categorical { vocab: 2 }).unwrap();
        let temp = b.declare("temp", AttributeKind::Numerical).unwrap();
        assert!(matches!(b.add_value(0, text, 1.0), Err(Error::AttributeKind { .. })));
        assert!(matches!(b.add_count(0, temp, 0, 1), Err(Error::AttributeKind { .. })));
        assert!(matches!(b.add_count(0, text, 2, 1), Err(Error::TermOutOfRange { term: 3, .. })));
    }

    #[test]
    fn select_reports_missing_attribute() {
        let mut b = AttributeTableBuilder::new(1);
        b.declare("temp", AttributeKind::Numerical).unwrap();
        let t = b.build();
        match t.select(&["temp", "rain"]) {
            Err(Error::UnknownAttribute(name)) => assert_eq!(name, "rain"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(t.select(&["temp"]).unwrap().len(), 1);
    }
}
