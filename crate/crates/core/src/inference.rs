//! Forward propagation of belief values.
//!
//! Premises evaluate conjunction as a product and disjunction as a sum
//! clamped to [-1, 1]. Each rule contributes `weight * premise belief`;
//! contributions arriving at a concept are folded with the network's
//! combining function. Thresholding, when on, zeroes each individual
//! contribution whose magnitude is below the cutoff before combination.

use thiserror::Error;

use crate::dsl::CaseInstance;
use crate::network::{BeliefNetwork, CombineMode, ConnId, NodeId, NodeKind, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("certainty factors {x} and {y} cannot be combined (opposite signs, unit magnitude)")]
pub struct Singularity {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("node `{node}`: {source}")]
    Singularity {
        node: String,
        #[source]
        source: Singularity,
    },
}

/// Product over clauses of the clamped sum of each clause's atom beliefs.
pub fn eval_premise<C: AsRef<[f64]>>(clauses: &[C]) -> f64 {
    clauses.iter().map(|c| c.as_ref().iter().sum::<f64>().clamp(-1.0, 1.0)).product()
}

/// Zero when `|c| < k`; the boundary itself is kept.
pub fn threshold_contribution(c: f64, k: f64) -> f64 {
    if c.abs() < k {
        0.0
    } else {
        c
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Branch {
    Positive,
    Negative,
    Mixed,
}

// zero counts as positive
fn branch(x: f64, y: f64) -> Branch {
    match (x >= 0.0, y >= 0.0) {
        (true, true) => Branch::Positive,
        (false, false) => Branch::Negative,
        _ => Branch::Mixed,
    }
}

/// The certainty-factor combining function for two pieces of evidence.
pub fn combine_pair(x: f64, y: f64) -> Result<f64, Singularity> {
    match branch(x, y) {
        Branch::Positive => Ok(x + y - x * y),
        Branch::Negative => Ok(x + y + x * y),
        Branch::Mixed => {
            let m = x.abs().min(y.abs());
            if m >= 1.0 {
                return Err(Singularity { x, y });
            }
            Ok((x + y) / (1.0 - m))
        }
    }
}

/// Partial derivatives of `combine_pair` with respect to `x` and `y`.
fn combine_pair_partials(x: f64, y: f64) -> Result<(f64, f64), Singularity> {
    match branch(x, y) {
        Branch::Positive => Ok((1.0 - y, 1.0 - x)),
        Branch::Negative => Ok((1.0 + y, 1.0 + x)),
        Branch::Mixed => {
            let (ax, ay) = (x.abs(), y.abs());
            let m = ax.min(ay);
            if m >= 1.0 {
                return Err(Singularity { x, y });
            }
            let den = 1.0 - m;
            let s = x + y;
            let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
            if ax <= ay {
                Ok((1.0 / den + s * sign(x) / (den * den), 1.0 / den))
            } else {
                Ok((1.0 / den, 1.0 / den + s * sign(y) / (den * den)))
            }
        }
    }
}

/// Folds contributions left to right. An empty list yields 0.
pub fn combine(mode: CombineMode, contributions: &[f64]) -> Result<f64, Singularity> {
    match mode {
        CombineMode::Mycin => {
            let Some((&first, rest)) = contributions.split_first() else {
                return Ok(0.0);
            };
            rest.iter().try_fold(first, |acc, &c| combine_pair(acc, c))
        }
        CombineMode::ClippedSum => Ok(contributions.iter().sum::<f64>().clamp(-1.0, 1.0)),
    }
}

/// Partial derivative of `combine(mode, contributions)` with respect to each
/// contribution, through the same left-to-right fold.
pub fn combine_partials(mode: CombineMode, contributions: &[f64]) -> Result<Vec<f64>, Singularity> {
    let n = contributions.len();
    match mode {
        CombineMode::ClippedSum => {
            let s: f64 = contributions.iter().sum();
            let d = if s.abs() > 1.0 { 0.0 } else { 1.0 };
            Ok(vec![d; n])
        }
        CombineMode::Mycin => {
            if n == 0 {
                return Ok(Vec::new());
            }
            let mut prefix = Vec::with_capacity(n);
            prefix.push(contributions[0]);
            for t in 1..n {
                let acc = combine_pair(prefix[t - 1], contributions[t])?;
                prefix.push(acc);
            }
            let mut out = vec![0.0; n];
            let mut upstream = 1.0;
            for t in (1..n).rev() {
                let (dx, dy) = combine_pair_partials(prefix[t - 1], contributions[t])?;
                out[t] = upstream * dy;
                upstream *= dx;
            }
            out[0] = upstream;
            Ok(out)
        }
    }
}

/// Observed input beliefs aligned with `BeliefNetwork::inputs()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn from_case(net: &BeliefNetwork, case: &CaseInstance) -> Self {
        Observation(net.inputs().iter().map(|(a, _, _)| case.observed_belief(a)).collect())
    }

    /// Missing attributes default to 0.
    pub fn from_pairs<'a>(net: &BeliefNetwork, pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        let mut values = vec![0.0; net.inputs().len()];
        for (name, v) in pairs {
            if let Some(i) = net.inputs().iter().position(|(a, _, _)| a == name) {
                values[i] = v;
            }
        }
        Observation(values)
    }
}

/// Belief value of every node after propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefAssignment(pub Vec<f64>);

impl BeliefAssignment {
    pub fn get(&self, node: NodeId) -> f64 {
        self.0[node.0]
    }

    pub fn by_key(&self, net: &BeliefNetwork, key: &str) -> Option<f64> {
        net.node_id(key).map(|id| self.0[id.0])
    }

    /// Output beliefs in hypothesis declaration order.
    pub fn outputs(&self, net: &BeliefNetwork) -> Vec<f64> {
        net.outputs().iter().map(|(_, id)| self.0[id.0]).collect()
    }
}

pub fn infer(
    net: &BeliefNetwork,
    observed: &Observation,
    thresholding: bool,
) -> Result<BeliefAssignment, InferenceError> {
    let mut values = Vec::new();
    infer_into(net, &observed.0, thresholding, &mut values)?;
    Ok(BeliefAssignment(values))
}

/// Allocation-reusing form of [`infer`]; `out` is resized to the node count.
pub fn infer_into(
    net: &BeliefNetwork,
    observed: &[f64],
    thresholding: bool,
    out: &mut Vec<f64>,
) -> Result<(), InferenceError> {
    let config = net.config();
    out.clear();
    out.resize(net.nodes().len(), 0.0);
    for ((_, actual, twin), &v) in net.inputs().iter().zip(observed) {
        out[twin.unwrap_or(*actual).0] = v;
    }

    let mut contributions = Vec::new();
    let mut clause_buf: Vec<f64> = Vec::new();
    for &id in net.topo_order() {
        let node = net.node(id);
        let value = match node.kind {
            NodeKind::ObservedInput => continue,
            NodeKind::ActualInput => match net.incoming(id).first() {
                Some(&link) => {
                    let c = net.connection(link);
                    c.weight * out[c.from.0]
                }
                None => continue,
            },
            NodeKind::PremiseAux => {
                let clauses = node.premise.as_deref().unwrap_or(&[]);
                let mut product = 1.0;
                for clause in clauses {
                    clause_buf.clear();
                    clause_buf.extend(clause.iter().map(|a| out[a.0]));
                    product *= clause_buf.iter().sum::<f64>().clamp(-1.0, 1.0);
                }
                product
            }
            NodeKind::Middle | NodeKind::Output => {
                contributions.clear();
                for &cid in net.incoming(id) {
                    let c = net.connection(cid);
                    if let Origin::Rule(_) = c.origin {
                        let v = c.weight * out[c.from.0];
                        contributions.push(if thresholding { threshold_contribution(v, config.threshold) } else { v });
                    }
                }
                combine(config.combine, &contributions)
                    .map_err(|source| InferenceError::Singularity { node: node.key.clone(), source })?
            }
        };
        out[id.0] = value;
    }
    Ok(())
}

/// Rule connections into `node` with their unthresholded contributions.
pub(crate) fn rule_contributions(net: &BeliefNetwork, beliefs: &[f64], node: NodeId) -> Vec<(ConnId, f64)> {
    net.incoming(node)
        .iter()
        .filter_map(|&cid| {
            let c = net.connection(cid);
            matches!(c.origin, Origin::Rule(_)).then(|| (cid, c.weight * beliefs[c.from.0]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_rulebase;
    use crate::network::NetworkConfig;
    use approx::assert_abs_diff_eq;

    #[test]
    fn premise_examples() {
        assert_abs_diff_eq!(eval_premise(&[vec![0.9], vec![0.8]]), 0.72, epsilon = 1e-15);
        for x in [-1.0, -0.3, 0.0, 0.42, 1.0] {
            assert_eq!(eval_premise(&[vec![1.0], vec![x]]), x);
        }
        assert_abs_diff_eq!(eval_premise(&[vec![0.5], vec![0.3, 0.4]]), 0.35, epsilon = 1e-15);
        assert_eq!(eval_premise(&[vec![0.8, 0.7]]), 1.0);
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine(CombineMode::Mycin, &[]).unwrap(), 0.0);
        assert_eq!(combine(CombineMode::ClippedSum, &[]).unwrap(), 0.0);
        assert_abs_diff_eq!(combine(CombineMode::Mycin, &[0.6, 0.5]).unwrap(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(combine(CombineMode::Mycin, &[0.6, -0.4]).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(combine(CombineMode::Mycin, &[-0.6, -0.5]).unwrap(), -0.8, epsilon = 1e-15);
        assert_eq!(combine(CombineMode::ClippedSum, &[0.6, 0.5]).unwrap(), 1.0);
        assert_eq!(combine(CombineMode::Mycin, &[1.0, -1.0]), Err(Singularity { x: 1.0, y: -1.0 }));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_contribution(0.15, 0.2), 0.0);
        assert_eq!(threshold_contribution(-0.15, 0.2), 0.0);
        assert_eq!(threshold_contribution(0.2, 0.2), 0.2);
        assert_eq!(threshold_contribution(-0.2, 0.2), -0.2);
    }

    #[test]
    fn partials_single_and_pair() {
        assert_eq!(combine_partials(CombineMode::Mycin, &[0.25]).unwrap(), [1.0]);
        let p = combine_partials(CombineMode::Mycin, &[0.25, 0.3]).unwrap();
        assert_abs_diff_eq!(p[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.75, epsilon = 1e-15);
        assert_eq!(combine_partials(CombineMode::ClippedSum, &[0.9, 0.5]).unwrap(), [0.0, 0.0]);
        assert_eq!(combine_partials(CombineMode::ClippedSum, &[0.4, 0.5]).unwrap(), [1.0, 1.0]);
    }

    fn chain() -> BeliefNetwork {
        let rb = parse_rulebase("attr a. hypo c.\nrule r1: IF a THEN b (0.8).\nrule r2: IF b THEN c (0.5).").unwrap();
        BeliefNetwork::compile(&rb, NetworkConfig::default())
    }

    #[test]
    fn chain_products() {
        let net = chain();
        let beliefs = infer(&net, &Observation(vec![1.0]), false).unwrap();
        assert_abs_diff_eq!(beliefs.by_key(&net, "b").unwrap(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(beliefs.by_key(&net, "c").unwrap(), 0.4, epsilon = 1e-15);

        let zero = infer(&net, &Observation(vec![0.0]), false).unwrap();
        assert!(zero.0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn weak_rule_thresholded_away() {
        let rb = parse_rulebase("attr a. hypo h. rule r1: IF a THEN h (0.15).").unwrap();
        let net = BeliefNetwork::compile(&rb, NetworkConfig::default());
        let on = infer(&net, &Observation(vec![1.0]), true).unwrap();
        assert_eq!(on.by_key(&net, "h"), Some(0.0));
        let off = infer(&net, &Observation(vec![1.0]), false).unwrap();
        assert_eq!(off.by_key(&net, "h"), Some(0.15));
    }

    #[test]
    fn data_links_scale_observations() {
        let rb = parse_rulebase("attr a. hypo h. rule r1: IF a THEN h (0.5).").unwrap();
        let mut net = BeliefNetwork::compile(&rb, NetworkConfig { data_error_mode: true, ..Default::default() });
        let link = net.data_link("a").unwrap();
        net.set_weight(link, 0.5);
        let beliefs = infer(&net, &Observation(vec![0.8]), false).unwrap();
        assert_abs_diff_eq!(beliefs.by_key(&net, "a").unwrap(), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(beliefs.by_key(&net, "h").unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn singularity_names_node() {
        let rb =
            parse_rulebase("attr a. attr b. hypo h.\nrule r1: IF a THEN h (1).\nrule r2: IF b THEN h (-1).").unwrap();
        let net = BeliefNetwork::compile(&rb, NetworkConfig::default());
        let err = infer(&net, &Observation(vec![1.0, 1.0]), false).unwrap_err();
        assert!(matches!(err, InferenceError::Singularity { ref node, .. } if node == "h"));
    }
}
