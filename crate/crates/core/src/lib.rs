//! Clustering of heterogeneous information networks guided by user-selected
//! attributes, with automatic learning of per-relation link strengths.

pub mod attributes;
pub mod baseline;
pub mod bundle;
pub mod driver;
pub mod em;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod mixture;
pub mod model;
pub mod rng;
pub mod special;
pub mod strength;
pub mod synth;

pub use attributes::{Attribute, AttributeKind, AttributeSpec, AttributeTable, AttributeTableBuilder};
pub use error::{Error, Result};
pub use graph::{GraphBuilder, HinGraph, Link, Relation};
pub use model::{CategoricalParams, ComponentParams, GaussianParams, Membership, StrengthVector};
