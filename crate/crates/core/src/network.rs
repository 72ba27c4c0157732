//! Compilation of a rule base into a weighted belief network.
//!
//! Every rule becomes one premise node (`<rule-id>#premise`) fed by clamped
//! unit-weight connections from its premise atoms, plus exactly one weighted
//! connection from that premise node to the conclusion. The weight of that
//! connection is the rule strength. With `data_error_mode` each attribute
//! additionally gets an observed twin (`<attr>'`) linked to the actual-input
//! node with an adjustable weight that starts at 1.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::{self, Write};

use thiserror::Error;

use crate::rulebase::RuleBase;
use crate::sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConnId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    ObservedInput,
    ActualInput,
    Middle,
    Output,
    PremiseAux,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::ObservedInput => "observed_input",
            NodeKind::ActualInput => "actual_input",
            NodeKind::Middle => "middle",
            NodeKind::Output => "output",
            NodeKind::PremiseAux => "premise_aux",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Stable identifier: the concept name, `<attr>'` for observed twins,
    /// `<rule-id>#premise` for premise nodes.
    pub key: String,
    pub kind: NodeKind,
    /// Concept name; empty for premise nodes.
    pub concept: String,
    /// Premise structure for premise nodes: clauses of atom nodes.
    pub premise: Option<Vec<Vec<NodeId>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Rule(String),
    DataLink(String),
    PremiseStructure,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Rule(id) => write!(f, "rule({id})"),
            Origin::DataLink(attr) => write!(f, "data_link({attr})"),
            Origin::PremiseStructure => f.write_str("premise_structure"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
    /// Structurally frozen. Only premise-structure connections carry this.
    pub clamped: bool,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombineMode {
    /// Pairwise certainty-factor combination.
    #[default]
    Mycin,
    /// Plain sum clamped to [-1, 1].
    ClippedSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub data_error_mode: bool,
    pub combine: CombineMode,
    /// Contribution cutoff used when inference thresholding is on.
    pub threshold: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { data_error_mode: false, combine: CombineMode::Mycin, threshold: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("network and rule base disagree: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNetwork {
    nodes: Vec<Node>,
    connections: Vec<Connection>,
    incoming: Vec<Vec<ConnId>>,
    outgoing: Vec<Vec<ConnId>>,
    topo_order: Vec<NodeId>,
    index: HashMap<String, NodeId>,
    /// (rule id, connection), sorted by rule id.
    rule_connections: Vec<(String, ConnId)>,
    /// Attribute name -> (actual node, observed node if any), declaration order.
    inputs: Vec<(String, NodeId, Option<NodeId>)>,
    outputs: Vec<(String, NodeId)>,
    config: NetworkConfig,
}

impl BeliefNetwork {
    pub fn compile(rb: &RuleBase, config: NetworkConfig) -> BeliefNetwork {
        let mut b = Builder::default();

        let mut inputs = Vec::new();
        if config.data_error_mode {
            for a in rb.attributes() {
                b.node(format!("{a}'"), NodeKind::ObservedInput, a.clone(), None);
            }
        }
        for a in rb.attributes() {
            let actual = b.node(a.clone(), NodeKind::ActualInput, a.clone(), None);
            let observed = config.data_error_mode.then(|| b.index[&format!("{a}'")]);
            inputs.push((a.clone(), actual, observed));
        }
        for m in rb.intermediates() {
            b.node(m.clone(), NodeKind::Middle, m, None);
        }
        let outputs: Vec<(String, NodeId)> =
            rb.hypotheses().iter().map(|h| (h.clone(), b.node(h.clone(), NodeKind::Output, h.clone(), None))).collect();

        for (attr, actual, observed) in &inputs {
            if let Some(obs) = observed {
                b.connect(*obs, *actual, 1.0, false, Origin::DataLink(attr.clone()));
            }
        }

        let mut rule_connections = Vec::with_capacity(rb.rules().len());
        for rule in rb.rules() {
            let clauses: Vec<Vec<NodeId>> =
                rule.premise.clauses().iter().map(|c| c.atoms().iter().map(|a| b.index[a]).collect()).collect();
            let aux = b.node(format!("{}#premise", rule.id), NodeKind::PremiseAux, String::new(), Some(clauses));
            for atom in rule.premise.distinct_atoms() {
                let from = b.index[atom];
                b.connect(from, aux, 1.0, true, Origin::PremiseStructure);
            }
            let head = b.index[&rule.conclusion];
            let conn = b.connect(aux, head, rule.strength, false, Origin::Rule(rule.id.clone()));
            rule_connections.push((rule.id.clone(), conn));
        }

        let topo_order = b.topo_order();
        BeliefNetwork {
            nodes: b.nodes,
            connections: b.connections,
            incoming: b.incoming,
            outgoing: b.outgoing,
            topo_order,
            index: b.index,
            rule_connections,
            inputs,
            outputs,
            config,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn set_combine_mode(&mut self, mode: CombineMode) {
        self.config.combine = mode;
    }

    pub fn set_threshold(&mut self, k: f64) {
        self.config.threshold = k;
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_id(&self, key: &str) -> Option<NodeId> {
        self.index.get(key).copied()
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn connection(&self, id: ConnId) -> &Connection {
        &self.connections[id.0]
    }

    pub fn incoming(&self, node: NodeId) -> &[ConnId] {
        &self.incoming[node.0]
    }

    pub fn outgoing(&self, node: NodeId) -> &[ConnId] {
        &self.outgoing[node.0]
    }

    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo_order
    }

    /// (rule id, connection) pairs sorted by rule id.
    pub fn rule_connections(&self) -> &[(String, ConnId)] {
        &self.rule_connections
    }

    pub fn rule_connection(&self, rule_id: &str) -> Option<ConnId> {
        self.rule_connections
            .binary_search_by(|(id, _)| id.as_str().cmp(rule_id))
            .ok()
            .map(|i| self.rule_connections[i].1)
    }

    /// Data-link connection for an attribute (data-error mode only).
    pub fn data_link(&self, attribute: &str) -> Option<ConnId> {
        let (_, actual, observed) = self.inputs.iter().find(|(a, _, _)| a == attribute)?;
        let observed = (*observed)?;
        self.incoming[actual.0].iter().copied().find(|c| self.connections[c.0].from == observed)
    }

    /// (attribute, actual node, observed node) in declaration order.
    pub fn inputs(&self) -> &[(String, NodeId, Option<NodeId>)] {
        &self.inputs
    }

    /// (hypothesis, output node) in declaration order.
    pub fn outputs(&self) -> &[(String, NodeId)] {
        &self.outputs
    }

    pub fn weight(&self, conn: ConnId) -> f64 {
        self.connections[conn.0].weight
    }

    pub fn set_weight(&mut self, conn: ConnId, weight: f64) {
        self.connections[conn.0].weight = weight;
    }

    pub fn weights(&self) -> Vec<f64> {
        self.connections.iter().map(|c| c.weight).collect()
    }

    /// Copies each rule connection's weight into the matching rule strength.
    pub fn sync_strengths(&self, rb: &RuleBase) -> Result<RuleBase, CompileError> {
        if rb.rules().len() != self.rule_connections.len() {
            return Err(CompileError::Mismatch(format!(
                "{} rules but {} rule connections",
                rb.rules().len(),
                self.rule_connections.len()
            )));
        }
        let mut strengths = HashMap::with_capacity(rb.rules().len());
        for (rule, (id, conn)) in rb.rules().iter().zip(&self.rule_connections) {
            if rule.id != *id {
                return Err(CompileError::Mismatch(format!("rule `{}` has no connection (found `{id}`)", rule.id)));
            }
            strengths.insert(rule.id.as_str(), self.connections[conn.0].weight);
        }
        let mut out = rb.clone();
        out.set_strengths(&strengths);
        Ok(out)
    }

    /// Line-oriented dump: one `node <id> <kind>` per node, then one
    /// `conn <from> <to> <weight> <clamped> <origin>` per connection.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            writeln!(out, "node {} {}", n.key, n.kind.as_str()).unwrap();
        }
        for c in &self.connections {
            writeln!(
                out,
                "conn {} {} {} {} {}",
                self.nodes[c.from.0].key,
                self.nodes[c.to.0].key,
                sig9(c.weight),
                c.clamped,
                c.origin
            )
            .unwrap();
        }
        out
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    connections: Vec<Connection>,
    incoming: Vec<Vec<ConnId>>,
    outgoing: Vec<Vec<ConnId>>,
    index: HashMap<String, NodeId>,
}

impl Builder {
    fn node(&mut self, key: String, kind: NodeKind, concept: String, premise: Option<Vec<Vec<NodeId>>>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.index.insert(key.clone(), id);
        self.nodes.push(Node { key, kind, concept, premise });
        self.incoming.push(Vec::new());
        self.outgoing.push(Vec::new());
        id
    }

    fn connect(&mut self, from: NodeId, to: NodeId, weight: f64, clamped: bool, origin: Origin) -> ConnId {
        let id = ConnId(self.connections.len());
        self.connections.push(Connection { from, to, weight, clamped, origin });
        self.outgoing[from.0].push(id);
        self.incoming[to.0].push(id);
        id
    }

    // Kahn's algorithm, smallest node index first.
    fn topo_order(&self) -> Vec<NodeId> {
        let mut indegree: Vec<usize> = self.incoming.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..self.nodes.len()).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(i)) = ready.pop() {
            order.push(NodeId(i));
            for c in &self.outgoing[i] {
                let to = self.connections[c.0].to.0;
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    ready.push(Reverse(to));
                }
            }
        }
        // rule bases are validated acyclic
        debug_assert_eq!(order.len(), self.nodes.len());
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_rulebase;

    fn single() -> RuleBase {
        parse_rulebase("attr fever. hypo flu. rule r1: IF fever THEN flu (0.8).").unwrap()
    }

    fn count_origin(net: &BeliefNetwork, pred: impl Fn(&Origin) -> bool) -> usize {
        net.connections().iter().filter(|c| pred(&c.origin)).count()
    }

    #[test]
    fn minimal_network() {
        let net = BeliefNetwork::compile(&single(), NetworkConfig::default());
        let kinds: Vec<NodeKind> = net.nodes().iter().map(|n| n.kind).collect();
        assert_eq!(kinds, [NodeKind::ActualInput, NodeKind::Output, NodeKind::PremiseAux]);
        assert_eq!(net.connections().len(), 2);
        assert_eq!(count_origin(&net, |o| *o == Origin::PremiseStructure), 1);
        assert_eq!(count_origin(&net, |o| matches!(o, Origin::Rule(_))), 1);
        assert_eq!(net.node_id("r1#premise"), Some(NodeId(2)));
    }

    #[test]
    fn data_error_mode_adds_twin_layer() {
        let net = BeliefNetwork::compile(&single(), NetworkConfig { data_error_mode: true, ..Default::default() });
        assert_eq!(net.nodes().len(), 4);
        assert_eq!(net.connections().len(), 3);
        let link = net.data_link("fever").unwrap();
        let c = net.connection(link);
        assert_eq!(c.weight, 1.0);
        assert_eq!(c.origin, Origin::DataLink("fever".into()));
        assert!(!c.clamped);
        let observed = net.node_id("fever'").unwrap();
        assert_eq!(net.outgoing(observed), [link]);
        assert!(net.incoming(observed).is_empty());
    }

    #[test]
    fn topo_order_respects_edges() {
        let rb = parse_rulebase(
            "attr a. attr b. hypo h.\n\
             rule r1: IF a AND (b OR a) THEN m (0.5).\n\
             rule r2: IF m THEN h (0.7).\n\
             rule r3: IF b THEN h (0.1).",
        )
        .unwrap();
        let net = BeliefNetwork::compile(&rb, NetworkConfig { data_error_mode: true, ..Default::default() });
        let mut pos = vec![0; net.nodes().len()];
        for (i, n) in net.topo_order().iter().enumerate() {
            pos[n.0] = i;
        }
        for c in net.connections() {
            assert!(pos[c.from.0] < pos[c.to.0]);
        }
        // `a` appears twice in r1 but is wired once
        let aux = net.node_id("r1#premise").unwrap();
        assert_eq!(net.incoming(aux).len(), 2);
        assert!(net
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::PremiseAux)
            .all(|n| { net.outgoing(net.node_id(&n.key).unwrap()).len() == 1 }));
    }

    #[test]
    fn sync_copies_weights() {
        let rb = single();
        let mut net = BeliefNetwork::compile(&rb, NetworkConfig::default());
        assert_eq!(net.sync_strengths(&rb).unwrap(), rb);
        let conn = net.rule_connection("r1").unwrap();
        net.set_weight(conn, 0.55);
        assert_eq!(net.sync_strengths(&rb).unwrap().rules()[0].strength, 0.55);
    }

    #[test]
    fn sync_detects_mismatch() {
        let net = BeliefNetwork::compile(&single(), NetworkConfig::default());
        let other = parse_rulebase("attr fever. hypo flu. rule q1: IF fever THEN flu (0.8).").unwrap();
        assert!(net.sync_strengths(&other).is_err());
    }

    #[test]
    fn dump_format() {
        let net = BeliefNetwork::compile(&single(), NetworkConfig::default());
        assert_eq!(
            net.dump(),
            "node fever actual_input\nnode flu output\nnode r1#premise premise_aux\n\
             conn fever r1#premise 1.00000000 true premise_structure\n\
             conn r1#premise flu 0.800000000 false rule(r1)\n"
        );
    }
}
