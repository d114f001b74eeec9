use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrustError;
use crate::ids::DeviceId;

/// The five social-object relationship types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationshipKind {
    /// Parental: same producer, same period.
    #[serde(rename = "POR")]
    Parental,
    /// Co-location: always work in the same place.
    #[serde(rename = "CLOR")]
    CoLocation,
    /// Co-work: collaborate on a common goal.
    #[serde(rename = "CWOR")]
    CoWork,
    /// Ownership: same owner.
    #[serde(rename = "OOR")]
    Ownership,
    /// Social: the owners meet.
    #[serde(rename = "SOR")]
    Social,
}

impl RelationshipKind {
    pub const ALL: [RelationshipKind; 5] = [
        RelationshipKind::Parental,
        RelationshipKind::CoLocation,
        RelationshipKind::CoWork,
        RelationshipKind::Ownership,
        RelationshipKind::Social,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RelationshipKind::Parental => "POR",
            RelationshipKind::CoLocation => "CLOR",
            RelationshipKind::CoWork => "CWOR",
            RelationshipKind::Ownership => "OOR",
            RelationshipKind::Social => "SOR",
        }
    }
}

impl fmt::Display for RelationshipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RelationshipKind {
    type Err = TrustError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        RelationshipKind::ALL
            .into_iter()
            .find(|k| k.code() == norm)
            .ok_or_else(|| TrustError::UnknownRelationship(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocialEdge {
    pub node_a: DeviceId,
    pub node_b: DeviceId,
    pub kind: RelationshipKind,
    pub weight: f64,
}

impl SocialEdge {
    pub fn new(
        node_a: DeviceId,
        node_b: DeviceId,
        kind: RelationshipKind,
        weight: f64,
    ) -> Result<Self, TrustError> {
        if node_a == node_b {
            return Err(TrustError::SelfEdge(node_a));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(TrustError::WeightOutOfRange(weight));
        }
        Ok(Self {
            node_a,
            node_b,
            kind,
            weight,
        })
    }

    pub fn touches(&self, device: DeviceId) -> bool {
        self.node_a == device || self.node_b == device
    }
}

/// Per-kind multipliers applied to edge weights before averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KindCoefficients {
    pub por: f64,
    pub clor: f64,
    pub cwor: f64,
    pub oor: f64,
    pub sor: f64,
}

impl Default for KindCoefficients {
    fn default() -> Self {
        Self {
            por: 1.0,
            clor: 1.0,
            cwor: 1.0,
            oor: 1.0,
            sor: 1.0,
        }
    }
}

impl KindCoefficients {
    /// Coefficients above 1 could push an SRF out of [0, 1].
    pub fn validate(&self) -> Result<(), TrustError> {
        for v in [self.por, self.clor, self.cwor, self.oor, self.sor] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TrustError::WeightOutOfRange(v));
            }
        }
        Ok(())
    }

    pub fn get(&self, kind: RelationshipKind) -> f64 {
        match kind {
            RelationshipKind::Parental => self.por,
            RelationshipKind::CoLocation => self.clor,
            RelationshipKind::CoWork => self.cwor,
            RelationshipKind::Ownership => self.oor,
            RelationshipKind::Social => self.sor,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SocialGraph {
    nodes: BTreeSet<DeviceId>,
    edges: Vec<SocialEdge>,
}

#[derive(Deserialize)]
struct EdgeRecord {
    node_a: String,
    node_b: String,
    kind: String,
    weight: f64,
}

impl SocialGraph {
    pub fn new(nodes: impl IntoIterator<Item = DeviceId>) -> Self {
        Self {
            nodes: nodes.into_iter().collect(),
            edges: Vec::new(),
        }
    }

    pub fn add_node(&mut self, device: DeviceId) {
        self.nodes.insert(device);
    }

    pub fn add_edge(&mut self, edge: SocialEdge) {
        self.nodes.insert(edge.node_a);
        self.nodes.insert(edge.node_b);
        self.edges.push(edge);
    }

    pub fn contains(&self, device: DeviceId) -> bool {
        self.nodes.contains(&device)
    }

    pub fn edges(&self) -> &[SocialEdge] {
        &self.edges
    }

    pub fn edges_of(&self, device: DeviceId) -> impl Iterator<Item = &SocialEdge> {
        self.edges.iter().filter(move |e| e.touches(device))
    }

    /// Reads CSV records `node_a,node_b,kind,weight` with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, TrustError> {
        let mut graph = SocialGraph::default();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (line, rec) in rdr.deserialize::<EdgeRecord>().enumerate() {
            let rec = rec.map_err(|e| TrustError::GraphFormat {
                record: line + 1,
                reason: e.to_string(),
            })?;
            let parse_id = |s: &str| {
                s.parse::<DeviceId>().map_err(|e| TrustError::GraphFormat {
                    record: line + 1,
                    reason: format!("bad device id {s:?}: {e}"),
                })
            };
            let edge = SocialEdge::new(
                parse_id(&rec.node_a)?,
                parse_id(&rec.node_b)?,
                rec.kind.parse()?,
                rec.weight,
            )?;
            graph.add_edge(edge);
        }
        Ok(graph)
    }

    pub fn load(path: &Path) -> Result<Self, TrustError> {
        let file = std::fs::File::open(path).map_err(|e| TrustError::GraphFormat {
            record: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::from_csv_reader(file)
    }

    /// SRF of every node.
    pub fn srf_table(&self, coefficients: &KindCoefficients) -> BTreeMap<DeviceId, f64> {
        self.nodes
            .iter()
            .map(|&d| (d, srf_of(self.edges_of(d), coefficients)))
            .collect()
    }
}

fn srf_of<'a>(edges: impl Iterator<Item = &'a SocialEdge>, coefficients: &KindCoefficients) -> f64 {
    let (sum, n) = edges.fold((0.0, 0usize), |(s, n), e| {
        (s + e.weight * coefficients.get(e.kind), n + 1)
    });
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).clamp(0.0, 1.0)
    }
}

/// Social Relationships Factor: mean of coefficient-scaled incident edge
/// weights; 0 for a node with no relationships.
pub fn compute_srf(
    device: DeviceId,
    graph: &SocialGraph,
    coefficients: &KindCoefficients,
) -> Result<f64, TrustError> {
    if !graph.contains(device) {
        return Err(TrustError::UnknownDevice(device));
    }
    Ok(srf_of(graph.edges_of(device), coefficients))
}
