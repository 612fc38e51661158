//! Network file formats.
//!
//! * nodes (TSV): `object_id<TAB>type_name[<TAB>ground_truth_label]`
//! * edges (TSV): `src_id<TAB>dst_id<TAB>relation_name<TAB>weight`
//! * attributes (TSV): `object_id<TAB>attr_name<TAB>term:count[,term:count…]`
//!   for categorical attributes (1-based terms), `object_id<TAB>attr_name<TAB>value`
//!   for numerical ones; repeated numerical rows are repeated observations
//! * schema (key=value): `attr.<name>.kind = categorical|numerical`,
//!   `attr.<name>.vocab = m`, `rel.<name> = SrcType->DstType`
//!
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::attributes::{AttributeKind, AttributeTable, AttributeTableBuilder};
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, HinGraph};

pub const NODES_FILE: &str = "nodes.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const ATTRIBUTES_FILE: &str = "attributes.tsv";
pub const SCHEMA_FILE: &str = "schema.txt";

/// The four files that describe one network.
#[derive(Clone, Debug)]
pub struct NetworkPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub attributes: PathBuf,
    pub schema: PathBuf,
}

impl NetworkPaths {
    /// Standard file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        NetworkPaths {
            nodes: dir.join(NODES_FILE),
            edges: dir.join(EDGES_FILE),
            attributes: dir.join(ATTRIBUTES_FILE),
            schema: dir.join(SCHEMA_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.nodes, &self.edges, &self.attributes, &self.schema]
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-comment, non-blank lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Ordered `key = value` pairs with their line numbers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    pub entries: Vec<(String, String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (line, l) in content_lines(text) {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(path, line, format!("expected key = value, got `{l}`")))?;
            entries.push((k.trim().to_string(), v.trim().to_string(), line));
        }
        Ok(KeyValues { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schema {
    /// (name, source type, target type) in declaration order
    pub relations: Vec<(String, String, String)>,
    pub attributes: Vec<(String, AttributeKind)>,
}

impl Schema {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text, path)?;
        let mut schema = Schema::default();
        let mut pending: Vec<(String, Option<String>, Option<usize>, usize)> = Vec::new();
        for (key, value, line) in &kv.entries {
            if let Some(name) = key.strip_prefix("rel.") {
                let (src, dst) = value
                    .split_once("->")
                    .ok_or_else(|| Error::parse(path, *line, format!("relation `{name}` must be Src->Dst")))?;
                let (src, dst) = (src.trim(), dst.trim());
                if name.is_empty() || src.is_empty() || dst.is_empty() {
                    return Err(Error::parse(path, *line, "empty relation or type name"));
                }
                if schema.relations.iter().any(|(n, _, _)| n == name) {
                    return Err(Error::parse(path, *line, format!("relation `{name}` declared twice")));
                }
                schema.relations.push((name.to_string(), src.to_string(), dst.to_string()));
            } else if let Some(rest) = key.strip_prefix("attr.") {
                let (name, field) = rest
                    .rsplit_once('.')
                    .ok_or_else(|| Error::parse(path, *line, format!("bad attribute key `{key}`")))?;
                let slot = match pending.iter().position(|p| p.0 == name) {
                    Some(i) => i,
                    None => {
                        pending.push((name.to_string(), None, None, *line));
                        pending.len() - 1
                    }
                };
                match field {
                    "kind" => pending[slot].1 = Some(value.clone()),
                    "vocab" => {
                        let m: usize = value
                            .parse()
                            .map_err(|_| Error::parse(path, *line, format!("bad vocabulary size `{value}`")))?;
                        pending[slot].2 = Some(m);
                    }
                    other => return Err(Error::parse(path, *line, format!("unknown attribute field `{other}`"))),
                }
            } else {
                return Err(Error::parse(path, *line, format!("unknown schema key `{key}`")));
            }
        }
        for (name, kind, vocab, line) in pending {
            let kind = match kind.as_deref() {
                Some("categorical") => AttributeKind::Categorical {
                    vocab: vocab.ok_or_else(|| {
                        Error::parse(path, line, format!("categorical attribute `{name}` needs attr.{name}.vocab"))
                    })?,
                },
                Some("numerical") => AttributeKind::Numerical,
                Some(other) => return Err(Error::parse(path, line, format!("unknown attribute kind `{other}`"))),
                None => return Err(Error::parse(path, line, format!("attribute `{name}` has no kind"))),
            };
            schema.attributes.push((name, kind));
        }
        Ok(schema)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, src, dst) in &self.relations {
            let _ = writeln!(out, "rel.{name} = {src}->{dst}");
        }
        for (name, kind) in &self.attributes {
            let _ = writeln!(out, "attr.{name}.kind = {}", kind.name());
            if let AttributeKind::Categorical { vocab } = kind {
                let _ = writeln!(out, "attr.{name}.vocab = {vocab}");
            }
        }
        out
    }
}

fn with_line(path: &Path, line: usize) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Parse { .. } => e,
        other => Error::parse(path, line, other.to_string()),
    }
}

fn field<'a>(fields: &[&'a str], i: usize, path: &Path, line: usize, what: &str) -> Result<&'a str> {
    fields
        .get(i)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::parse(path, line, format!("missing {what}")))
}

/// Reads and validates a network from its four files.
pub fn load_network(paths: &NetworkPaths) -> Result<(HinGraph, AttributeTable)> {
    let schema = Schema::parse(&read_text(&paths.schema)?, &paths.schema)?;
    let mut gb = GraphBuilder::new();

    let path = &paths.nodes;
    for (line, l) in content_lines(&read_text(path)?) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() > 3 {
            return Err(Error::parse(path, line, "expected 2 or 3 tab-separated fields"));
        }
        let id = field(&f, 0, path, line, "object id")?;
        let ty = field(&f, 1, path, line, "type name")?;
        let label = f.get(2).map(|s| s.trim()).filter(|s| !s.is_empty());
        gb.add_object(id, ty, label).map_err(with_line(path, line))?;
    }
    for (name, src, dst) in &schema.relations {
        gb.add_relation(name, src, dst)?;
    }

    let path = &paths.edges;
    for (line, l) in content_lines(&read_text(path)?) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::parse(path, line, "expected 4 tab-separated fields"));
        }
        let src = field(&f, 0, path, line, "source id")?;
        let dst = field(&f, 1, path, line, "target id")?;
        let rel = field(&f, 2, path, line, "relation")?;
        let w_text = field(&f, 3, path, line, "weight")?;
        let w: f64 = w_text
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad weight `{w_text}`")))?;
        gb.add_link(src, dst, rel, w).map_err(with_line(path, line))?;
    }

    let n_objects = gb.num_objects();
    let mut ab = AttributeTableBuilder::new(n_objects);
    for (name, kind) in &schema.attributes {
        ab.declare(name, *kind)?;
    }
    let path = &paths.attributes;
    for (line, l) in content_lines(&read_text(path)?) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(path, line, "expected 3 tab-separated fields"));
        }
        let id = field(&f, 0, path, line, "object id")?;
        let name = field(&f, 1, path, line, "attribute name")?;
        let value = field(&f, 2, path, line, "value")?;
        let v = gb
            .object_index(id)
            .ok_or_else(|| Error::parse(path, line, Error::UnknownObject(id.to_string()).to_string()))?;
        let a = ab
            .attribute_index(name)
            .ok_or_else(|| Error::parse(path, line, Error::UnknownAttribute(name.to_string()).to_string()))?;
        let categorical_row = value.contains(':');
        match (ab.spec(a).kind, categorical_row) {
            (AttributeKind::Categorical { .. }, true) => {
                for pair in value.split(',') {
                    let (t, c) = pair
                        .split_once(':')
                        .ok_or_else(|| Error::parse(path, line, format!("bad term:count pair `{pair}`")))?;
                    let term: usize = t
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(path, line, format!("bad term index `{t}`")))?;
                    let count: u64 = c
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(path, line, format!("bad count `{c}`")))?;
                    if term == 0 {
                        return Err(Error::parse(path, line, "term indices are 1-based"));
                    }
                    ab.add_count(v, a, term - 1, count).map_err(with_line(path, line))?;
                }
            }
            (AttributeKind::Numerical, false) => {
                let x: f64 = value
                    .parse()
                    .map_err(|_| Error::parse(path, line, format!("bad numerical value `{value}`")))?;
                ab.add_value(v, a, x).map_err(with_line(path, line))?;
            }
            (kind, _) => {
                let found = if categorical_row { "categorical" } else { "numerical" };
                let e = Error::AttributeKind {
                    attribute: name.to_string(),
                    expected: kind.name(),
                    found,
                };
                return Err(Error::parse(path, line, e.to_string()));
            }
        }
    }
    Ok((gb.build(), ab.build()))
}

/// Schema describing the relations of `graph` and the attributes of `table`.
pub fn schema_of(graph: &HinGraph, table: &AttributeTable) -> Schema {
    Schema {
        relations: graph
            .relations()
            .iter()
            .map(|r| {
                (
                    r.name.clone(),
                    graph.type_name(r.source_type).to_string(),
                    graph.type_name(r.target_type).to_string(),
                )
            })
            .collect(),
        attributes: table
            .attributes()
            .iter()
            .map(|a| (a.name().to_string(), a.kind()))
            .collect(),
    }
}

/// Writes the four network files. Floats use Rust's shortest round-trip form.
pub fn save_network(graph: &HinGraph, table: &AttributeTable, paths: &NetworkPaths) -> Result<()> {
    let mut nodes = String::new();
    for v in 0..graph.num_objects() {
        let ty = graph.type_name(graph.object_type(v));
        match graph.label(v) {
            Some(label) => writeln!(nodes, "{}\t{ty}\t{label}", graph.id(v)),
            None => writeln!(nodes, "{}\t{ty}", graph.id(v)),
        }
        .expect("write to string");
    }
    write_text(&paths.nodes, &nodes)?;

    let mut edges = String::new();
    for (src, l) in graph.links() {
        let _ = writeln!(
            edges,
            "{}\t{}\t{}\t{}",
            graph.id(src),
            graph.id(l.target),
            graph.relation(l.relation).name,
            l.weight
        );
    }
    write_text(&paths.edges, &edges)?;

    let mut attrs = String::new();
    for v in 0..table.num_objects() {
        for a in table.attributes() {
            let entries = a.entries(v);
            if entries.is_empty() {
                continue;
            }
            match a.kind() {
                AttributeKind::Categorical { .. } => {
                    let pairs: Vec<String> = entries
                        .map(|e| format!("{}:{}", a.term(e) + 1, a.weight(e) as u64))
                        .collect();
                    let _ = writeln!(attrs, "{}\t{}\t{}", graph.id(v), a.name(), pairs.join(","));
                }
                AttributeKind::Numerical => {
                    for &x in a.observations(v) {
                        let _ = writeln!(attrs, "{}\t{}\t{x}", graph.id(v), a.name());
                    }
                }
            }
        }
    }
    write_text(&paths.attributes, &attrs)?;
    write_text(&paths.schema, &schema_of(graph, table).to_text())
}
