//! Typed, weighted, directed heterogeneous network.
//!
//! Objects carry an opaque string id and a type; links carry a relation and a
//! positive weight. Ids are mapped to dense indices in insertion order, and
//! out-links are stored contiguously per source, sorted by relation, so that
//! sums over typed out-links are a single forward scan.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type ObjectIx = usize;
pub type TypeIx = usize;
pub type RelationIx = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub source_type: TypeIx,
    pub target_type: TypeIx,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub target: ObjectIx,
    pub relation: RelationIx,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct HinGraph {
    ids: Vec<String>,
    index: HashMap<String, ObjectIx>,
    object_types: Vec<TypeIx>,
    labels: Vec<Option<String>>,
    type_names: Vec<String>,
    relations: Vec<Relation>,
    offsets: Vec<usize>,
    links: Vec<Link>,
}

impl PartialEq for HinGraph {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
            && self.object_types == other.object_types
            && self.labels == other.labels
            && self.type_names == other.type_names
            && self.relations == other.relations
            && self.offsets == other.offsets
            && self.links == other.links
    }
}

impl HinGraph {
    pub fn num_objects(&self) -> usize {
        self.ids.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_types(&self) -> usize {
        self.type_names.len()
    }

    pub fn id(&self, v: ObjectIx) -> &str {
        &self.ids[v]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<ObjectIx> {
        self.index.get(id).copied()
    }

    pub fn object_type(&self, v: ObjectIx) -> TypeIx {
        self.object_types[v]
    }

    pub fn label(&self, v: ObjectIx) -> Option<&str> {
        self.labels[v].as_deref()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }

    pub fn type_name(&self, t: TypeIx) -> &str {
        &self.type_names[t]
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn type_index(&self, name: &str) -> Option<TypeIx> {
        self.type_names.iter().position(|n| n == name)
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, r: RelationIx) -> &Relation {
        &self.relations[r]
    }

    pub fn relation_index(&self, name: &str) -> Option<RelationIx> {
        self.relations.iter().position(|r| r.name == name)
    }

    /// Out-links of `v`, sorted by (relation, target).
    pub fn out_links(&self, v: ObjectIx) -> &[Link] {
        &self.links[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Out-links of `v` grouped into one contiguous slice per relation.
    pub fn out_links_by_relation(&self, v: ObjectIx) -> impl Iterator<Item = (RelationIx, &[Link])> {
        self.out_links(v)
            .chunk_by(|a, b| a.relation == b.relation)
            .map(|chunk| (chunk[0].relation, chunk))
    }

    /// All links as `(source, link)` pairs in storage order.
    pub fn links(&self) -> impl Iterator<Item = (ObjectIx, &Link)> {
        (0..self.num_objects()).flat_map(move |v| self.out_links(v).iter().map(move |l| (v, l)))
    }

    pub fn objects_of_type(&self, t: TypeIx) -> Vec<ObjectIx> {
        (0..self.num_objects()).filter(|&v| self.object_types[v] == t).collect()
    }

    /// Copy of the graph keeping only the links accepted by `keep`.
    pub fn filter_links(&self, mut keep: impl FnMut(ObjectIx, &Link) -> bool) -> HinGraph {
        let mut offsets = Vec::with_capacity(self.offsets.len());
        let mut links = Vec::with_capacity(self.links.len());
        offsets.push(0);
        for v in 0..self.num_objects() {
            links.extend(self.out_links(v).iter().filter(|l| keep(v, l)).copied());
            offsets.push(links.len());
        }
        HinGraph {
            offsets,
            links,
            ..self.clone()
        }
    }

    /// Adds `R⁻¹` with reversed edges for every relation that has no inverse yet.
    ///
    /// A relation counts as already inverted when some relation (itself
    /// included) runs between the swapped types and holds exactly the reversed
    /// edge multiset. Calling this twice adds nothing the second time.
    pub fn materialize_inverse_relations(&self) -> HinGraph {
        let n_rel = self.num_relations();
        let mut per_relation: Vec<Vec<(ObjectIx, ObjectIx, u64)>> = vec![Vec::new(); n_rel];
        for (src, link) in self.links() {
            per_relation[link.relation].push((src, link.target, link.weight.to_bits()));
        }
        let reversed: Vec<Vec<(ObjectIx, ObjectIx, u64)>> = per_relation
            .iter()
            .map(|edges| {
                let mut r: Vec<_> = edges.iter().map(|&(s, t, w)| (t, s, w)).collect();
                r.sort_unstable();
                r
            })
            .collect();
        let sorted: Vec<Vec<(ObjectIx, ObjectIx, u64)>> = per_relation
            .iter()
            .map(|edges| {
                let mut e = edges.clone();
                e.sort_unstable();
                e
            })
            .collect();

        let mut builder = GraphBuilder::from_graph(self);
        for r in 0..n_rel {
            let rel = &self.relations[r];
            let has_inverse = (0..n_rel).any(|q| {
                let cand = &self.relations[q];
                cand.source_type == rel.target_type
                    && cand.target_type == rel.source_type
                    && sorted[q] == reversed[r]
            });
            if has_inverse {
                continue;
            }
            let mut name = format!("{}_inv", rel.name);
            while builder.relation_index.contains_key(&name) {
                name.push_str("_inv");
            }
            let inv = builder
                .add_relation(&name, &self.type_names[rel.target_type], &self.type_names[rel.source_type])
                .expect("fresh relation name");
            for &(src, dst, w) in &per_relation[r] {
                builder
                    .add_link_ix(dst, src, inv, f64::from_bits(w))
                    .expect("reversed edge of a valid edge is valid");
            }
        }
        builder.build()
    }
}

/// Incremental construction of a [`HinGraph`] with validation on every insert.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    ids: Vec<String>,
    index: HashMap<String, ObjectIx>,
    object_types: Vec<TypeIx>,
    labels: Vec<Option<String>>,
    type_names: Vec<String>,
    type_index: HashMap<String, TypeIx>,
    relations: Vec<Relation>,
    relation_index: HashMap<String, RelationIx>,
    edges: Vec<(ObjectIx, Link)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn from_graph(g: &HinGraph) -> Self {
        GraphBuilder {
            ids: g.ids.clone(),
            index: g.index.clone(),
            object_types: g.object_types.clone(),
            labels: g.labels.clone(),
            type_names: g.type_names.clone(),
            type_index: g.type_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect(),
            relations: g.relations.clone(),
            relation_index: g.relations.iter().enumerate().map(|(i, r)| (r.name.clone(), i)).collect(),
            edges: g.links().map(|(s, l)| (s, *l)).collect(),
        }
    }

    pub fn add_type(&mut self, name: &str) -> TypeIx {
        if let Some(&t) = self.type_index.get(name) {
            return t;
        }
        let t = self.type_names.len();
        self.type_names.push(name.to_string());
        self.type_index.insert(name.to_string(), t);
        t
    }

    /// Declares a relation; re-declaring with identical endpoint types is a no-op.
    pub fn add_relation(&mut self, name: &str, source_type: &str, target_type: &str) -> Result<RelationIx> {
        let source_type = self.add_type(source_type);
        let target_type = self.add_type(target_type);
        if let Some(&r) = self.relation_index.get(name) {
            let rel = &self.relations[r];
            if rel.source_type != source_type || rel.target_type != target_type {
                return Err(Error::Config(format!("relation `{name}` declared twice with different types")));
            }
            return Ok(r);
        }
        let r = self.relations.len();
        self.relations.push(Relation {
            name: name.to_string(),
            source_type,
            target_type,
        });
        self.relation_index.insert(name.to_string(), r);
        Ok(r)
    }

    pub fn add_object(&mut self, id: &str, type_name: &str, label: Option<&str>) -> Result<ObjectIx> {
        if self.index.contains_key(id) {
            return Err(Error::DuplicateObject(id.to_string()));
        }
        let t = self.add_type(type_name);
        let v = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), v);
        self.object_types.push(t);
        self.labels.push(label.map(str::to_string));
        Ok(v)
    }

    pub fn object_index(&self, id: &str) -> Option<ObjectIx> {
        self.index.get(id).copied()
    }

    pub fn num_objects(&self) -> usize {
        self.ids.len()
    }

    pub fn relation_index(&self, name: &str) -> Option<RelationIx> {
        self.relation_index.get(name).copied()
    }

    pub fn add_link(&mut self, src: &str, dst: &str, relation: &str, weight: f64) -> Result<()> {
        let s = self.object_index(src).ok_or_else(|| Error::UnknownObject(src.to_string()))?;
        let t = self.object_index(dst).ok_or_else(|| Error::UnknownObject(dst.to_string()))?;
        let r = self
            .relation_index(relation)
            .ok_or_else(|| Error::UnknownRelation(relation.to_string()))?;
        self.add_link_ix(s, t, r, weight)
    }

    /// Adds a link by dense indices. Zero-weight links are dropped.
    pub fn add_link_ix(&mut self, src: ObjectIx, dst: ObjectIx, relation: RelationIx, weight: f64) -> Result<()> {
        if src >= self.ids.len() {
            return Err(Error::UnknownObject(src.to_string()));
        }
        if dst >= self.ids.len() {
            return Err(Error::UnknownObject(dst.to_string()));
        }
        let rel = self
            .relations
            .get(relation)
            .ok_or_else(|| Error::UnknownRelation(relation.to_string()))?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidWeight {
                src: self.ids[src].clone(),
                dst: self.ids[dst].clone(),
                weight,
            });
        }
        if self.object_types[src] != rel.source_type || self.object_types[dst] != rel.target_type {
            return Err(Error::TypeMismatch {
                src: self.ids[src].clone(),
                dst: self.ids[dst].clone(),
                relation: rel.name.clone(),
                src_type: self.type_names[self.object_types[src]].clone(),
                dst_type: self.type_names[self.object_types[dst]].clone(),
                expected_src: self.type_names[rel.source_type].clone(),
                expected_dst: self.type_names[rel.target_type].clone(),
            });
        }
        if weight == 0.0 {
            return Ok(());
        }
        self.edges.push((
            src,
            Link {
                target: dst,
                relation,
                weight,
            },
        ));
        Ok(())
    }

    pub fn build(mut self) -> HinGraph {
        // stable: parallel edges keep their insertion order
        self.edges
            .sort_by_key(|&(s, l)| (s, l.relation, l.target));
        let n = self.ids.len();
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in &self.edges {
            offsets[s + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        HinGraph {
            ids: self.ids,
            index: self.index,
            object_types: self.object_types,
            labels: self.labels,
            type_names: self.type_names,
            relations: self.relations,
            offsets,
            links: self.edges.into_iter().map(|(_, l)| l).collect(),
        }
    }
}
