//! Bayesian networks in the HUGIN `.net` format.
//!
//! Supported subset: a `net { }` block, `node NAME { states = (...); }`
//! blocks, and `potential ( CHILD | P1 P2 ... ) { data = (...); }` blocks.
//! `%` starts a line comment and unknown attributes such as `label` or
//! `position` are skipped. Continuous, decision and utility nodes and
//! `model_data` tables are rejected as unsupported rather than ignored.
//!
//! `data` lists parent configurations with the last parent in the header
//! varying fastest and the child states innermost, which is exactly the
//! crate's row-major layout for dims `[|P1|, …, |Pm|, |CHILD|]`.

mod parse;
mod write;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use write::to_net_string;

/// Default tolerance on the per-configuration sum of child probabilities.
pub const CPT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub states: Vec<String>,
    /// In potential-header order.
    pub parents: Vec<String>,
    /// Probabilities in file order.
    #[serde(rename = "cpt")]
    pub cpt_data: Vec<f64>,
}

impl NodeSpec {
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    name: String,
    nodes: Vec<NodeSpec>,
    index: HashMap<String, usize>,
}

#[derive(Debug)]
pub(crate) struct RawNetwork {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
}

/// A parent configuration whose child probabilities do not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CptViolation {
    pub node: String,
    pub configuration: usize,
    pub sum: f64,
}

impl fmt::Display for CptViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node `{}`: parent configuration {} sums to {}",
            self.node, self.configuration, self.sum
        )
    }
}

impl From<CptViolation> for Error {
    fn from(v: CptViolation) -> Self {
        Error::Validation {
            node: v.node,
            configuration: v.configuration,
            sum: v.sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub tolerance: f64,
    /// Report CPT sum violations as warnings instead of failing.
    pub lenient: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            tolerance: CPT_TOLERANCE,
            lenient: false,
        }
    }
}

impl Network {
    /// Build a network, checking names, parents and table lengths. CPT sums
    /// are not checked here; see [`Network::cpt_violations`].
    pub fn new(name: impl Into<String>, nodes: Vec<NodeSpec>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.states.is_empty() {
                return Err(Error::structural(format!("node `{}` has no states", n.name)));
            }
            if index.insert(n.name.clone(), i).is_some() {
                return Err(Error::structural(format!("duplicate node `{}`", n.name)));
            }
        }
        for n in &nodes {
            let mut expected = n.states.len();
            for p in &n.parents {
                let pi = index
                    .get(p)
                    .ok_or_else(|| Error::structural(format!("unknown parent `{p}` of `{}`", n.name)))?;
                expected *= nodes[*pi].states.len();
            }
            if n.cpt_data.len() != expected {
                return Err(Error::structural(format!(
                    "node `{}`: expected {expected} probabilities, found {}",
                    n.name,
                    n.cpt_data.len()
                )));
            }
        }
        Ok(Network {
            name: name.into(),
            nodes,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    /// Tensor dims of a node's CPT: parent cardinalities, then the child's.
    pub fn cpt_dims(&self, node: &NodeSpec) -> Vec<usize> {
        let mut dims: Vec<usize> = node
            .parents
            .iter()
            .map(|p| self.node(p).map_or(0, NodeSpec::cardinality))
            .collect();
        dims.push(node.cardinality());
        dims
    }

    /// Every parent configuration whose child probabilities are negative or
    /// do not sum to one within `tolerance`.
    pub fn cpt_violations(&self, tolerance: f64) -> Vec<CptViolation> {
        let mut out = Vec::new();
        for n in &self.nodes {
            for (c, column) in n.cpt_data.chunks(n.cardinality()).enumerate() {
                let sum: f64 = column.iter().sum();
                if (sum - 1.0).abs() > tolerance || column.iter().any(|&p| p < 0.0) {
                    out.push(CptViolation {
                        node: n.name.clone(),
                        configuration: c,
                        sum,
                    });
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkJson {
            name: self.name.clone(),
            nodes: self.nodes.clone(),
        })?)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    #[serde(default)]
    name: String,
    nodes: Vec<NodeSpec>,
}

/// Parse a `.net` document, rejecting CPTs whose columns do not sum to one
/// within [`CPT_TOLERANCE`].
pub fn parse_net(text: &str) -> Result<Network> {
    parse_net_with(text, &ParseOptions::default()).map(|(net, _)| net)
}

/// Parse a `.net` document. In lenient mode CPT sum violations are returned
/// alongside the network; otherwise the first one is an error.
pub fn parse_net_with(text: &str, options: &ParseOptions) -> Result<(Network, Vec<CptViolation>)> {
    let raw = parse::parse(text)?;
    let net = Network::new(raw.name, raw.nodes)?;
    finish(net, options)
}

/// Parse the JSON interchange form:
/// `{"name": …, "nodes": [{"name", "states", "parents", "cpt"}]}`.
pub fn parse_json_network(text: &str, options: &ParseOptions) -> Result<(Network, Vec<CptViolation>)> {
    let raw: NetworkJson = serde_json::from_str(text)?;
    finish(Network::new(raw.name, raw.nodes)?, options)
}

fn finish(net: Network, options: &ParseOptions) -> Result<(Network, Vec<CptViolation>)> {
    let violations = net.cpt_violations(options.tolerance);
    if !options.lenient {
        if let Some(v) = violations.into_iter().next() {
            return Err(v.into());
        }
        return Ok((net, Vec::new()));
    }
    Ok((net, violations))
}

/// Load a network file. `.json` files use the interchange format, anything
/// else is read as `.net`. A network without a name takes the file stem.
pub fn load_network(path: &Path, options: &ParseOptions) -> Result<(Network, Vec<CptViolation>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (mut net, warnings) = if is_json {
        parse_json_network(&text, options)?
    } else {
        parse_net_with(&text, options)?
    };
    if net.name.is_empty() {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        net.set_name(stem);
    }
    Ok((net, warnings))
}

/// The CPT of `node` as a tensor with dims `[|P1|, …, |Pm|, |child|]`.
pub fn cpt_to_tensor(node: &NodeSpec, net: &Network) -> Result<Tensor> {
    Tensor::from_flat(net.cpt_dims(node), node.cpt_data.clone())
}

/// Nodes with at least `min_parents` parents, in network order.
pub fn select_cpts(net: &Network, min_parents: usize) -> Vec<&NodeSpec> {
    net.nodes.iter().filter(|n| n.parents.len() >= min_parents).collect()
}
