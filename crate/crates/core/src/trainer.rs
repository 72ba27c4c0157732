//! Back-propagation of belief discrepancies.
//!
//! Output discrepancies are `target - belief`. A non-output node's
//! discrepancy is the weight-weighted sum of the discrepancies of the nodes
//! it feeds. A connection into node `j` moves by
//! `learning_rate * D_j * dO_j/dW`, where the derivative runs through `j`'s
//! combining function. Weights of frozen connections never change.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dsl::CaseInstance;
use crate::inference::{
    combine_partials, infer_into, rule_contributions, BeliefAssignment, InferenceError, Observation,
};
use crate::network::{BeliefNetwork, ConnId, NodeKind, Origin};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// A training set is resolved when every output discrepancy is within this.
    pub eps_train: f64,
    /// A reference case stays consistent while every output discrepancy is within this.
    pub eps_ref: f64,
    /// Clamp weights to [-1, 1] after each update.
    pub weight_clip: bool,
    /// Shuffle the training order each epoch with this seed.
    pub shuffle_seed: Option<u64>,
    /// Accumulate an epoch's deltas and apply them once instead of per case.
    pub batch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            max_epochs: 1000,
            eps_train: 0.05,
            eps_ref: 0.1,
            weight_clip: true,
            shuffle_seed: None,
            batch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Config("max_epochs must be positive".into()));
        }
        if !unit(self.eps_train) || !unit(self.eps_ref) {
            return Err(TrainError::Config("tolerances must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("epoch {epoch}, case `{case}`: {source}")]
    Inference {
        epoch: usize,
        case: String,
        #[source]
        source: InferenceError,
    },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

/// Which connection family is frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampPolicy {
    /// Rule connections frozen; only data links adjust.
    KnowledgeBase,
    /// Data links frozen; only rule connections adjust.
    Data,
    /// Everything adjusts.
    None,
}

/// Per-connection frozen flags. Premise-structure connections are always frozen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClampMask {
    frozen: Vec<bool>,
}

impl ClampMask {
    pub fn for_policy(net: &BeliefNetwork, policy: ClampPolicy) -> Self {
        let frozen = net
            .connections()
            .iter()
            .map(|c| {
                c.clamped
                    || matches!(
                        (&c.origin, policy),
                        (Origin::Rule(_), ClampPolicy::KnowledgeBase)
                            | (Origin::DataLink(_), ClampPolicy::Data)
                            | (Origin::PremiseStructure, _)
                    )
            })
            .collect();
        ClampMask { frozen }
    }

    /// Custom mask; structural clamps are added regardless of `frozen`.
    pub fn from_frozen(net: &BeliefNetwork, frozen: Vec<bool>) -> Self {
        assert_eq!(frozen.len(), net.connections().len(), "mask length");
        let frozen = frozen
            .into_iter()
            .zip(net.connections())
            .map(|(f, c)| f || c.clamped || c.origin == Origin::PremiseStructure)
            .collect();
        ClampMask { frozen }
    }

    pub fn is_frozen(&self, conn: ConnId) -> bool {
        self.frozen[conn.0]
    }

    pub fn adjustable(&self) -> impl Iterator<Item = ConnId> + '_ {
        self.frozen.iter().enumerate().filter(|(_, f)| !**f).map(|(i, _)| ConnId(i))
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Largest |target - belief| over training cases after this epoch.
    pub max_abs_discrepancy: f64,
    /// Mean signed discrepancy per hypothesis (declaration order) over training cases.
    pub mean_discrepancy: Vec<f64>,
    /// Reference cases promoted into the training set during this epoch.
    pub promoted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub resolved: bool,
    pub epochs_used: usize,
    pub final_max_discrepancy: f64,
    /// Reference case ids that became inconsistent and joined the training set.
    pub reference_violations: Vec<String>,
    /// Every reference case is within `eps_ref` at termination.
    pub reference_consistent: bool,
    /// Euclidean norm of the total weight change.
    pub weight_delta_norm: f64,
    pub hypotheses: Vec<String>,
    pub trace: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
struct Prepared {
    id: String,
    observed: Vec<f64>,
    targets: Vec<f64>,
}

impl Prepared {
    fn new(net: &BeliefNetwork, case: &CaseInstance) -> Self {
        Prepared {
            id: case.id.clone(),
            observed: Observation::from_case(net, case).0,
            targets: net.outputs().iter().map(|(h, _)| case.target_belief(h)).collect(),
        }
    }
}

pub fn output_discrepancy(target: f64, actual: f64) -> f64 {
    target - actual
}

/// Discrepancy of every node given the output discrepancies (aligned with
/// `net.outputs()`), computed in reverse topological order.
pub fn propagate_discrepancy(net: &BeliefNetwork, output_discrepancies: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; net.nodes().len()];
    let mut own = vec![0.0; net.nodes().len()];
    for ((_, id), &v) in net.outputs().iter().zip(output_discrepancies) {
        own[id.0] = v;
    }
    for &id in net.topo_order().iter().rev() {
        let downstream: f64 = net
            .outgoing(id)
            .iter()
            .map(|&c| {
                let c = net.connection(c);
                c.weight * d[c.to.0]
            })
            .sum();
        d[id.0] = own[id.0] + downstream;
    }
    d
}

/// dO_head / dW for one connection, evaluated at `beliefs` (which should come
/// from unthresholded inference).
pub fn weight_gradient(net: &BeliefNetwork, beliefs: &BeliefAssignment, conn: ConnId) -> Result<f64, InferenceError> {
    let c = net.connection(conn);
    match c.origin {
        Origin::PremiseStructure => Ok(0.0),
        Origin::DataLink(_) => Ok(beliefs.get(c.from)),
        Origin::Rule(_) => {
            let contributions = rule_contributions(net, &beliefs.0, c.to);
            let values: Vec<f64> = contributions.iter().map(|(_, v)| *v).collect();
            let partials = combine_partials(net.config().combine, &values)
                .map_err(|source| InferenceError::Singularity { node: net.node(c.to).key.clone(), source })?;
            let i = contributions.iter().position(|(id, _)| *id == conn).expect("rule connection feeds its head");
            Ok(partials[i] * beliefs.get(c.from))
        }
    }
}

/// Unapplied weight deltas for one case. Returns the output discrepancies too.
fn case_deltas(
    net: &BeliefNetwork,
    case: &Prepared,
    mask: &ClampMask,
    learning_rate: f64,
    beliefs: &mut Vec<f64>,
    deltas: &mut [f64],
) -> Result<(), InferenceError> {
    infer_into(net, &case.observed, false, beliefs)?;
    let out_d: Vec<f64> =
        net.outputs().iter().zip(&case.targets).map(|((_, id), &t)| output_discrepancy(t, beliefs[id.0])).collect();
    let d = propagate_discrepancy(net, &out_d);

    for &id in net.topo_order() {
        let node = net.node(id);
        match node.kind {
            NodeKind::Middle | NodeKind::Output => {
                let contributions = rule_contributions(net, beliefs, id);
                if contributions.iter().all(|(c, _)| mask.is_frozen(*c)) {
                    continue;
                }
                let values: Vec<f64> = contributions.iter().map(|(_, v)| *v).collect();
                let partials = combine_partials(net.config().combine, &values)
                    .map_err(|source| InferenceError::Singularity { node: node.key.clone(), source })?;
                for ((cid, _), p) in contributions.iter().zip(partials) {
                    if !mask.is_frozen(*cid) {
                        let tail = beliefs[net.connection(*cid).from.0];
                        deltas[cid.0] += learning_rate * d[id.0] * p * tail;
                    }
                }
            }
            NodeKind::ActualInput => {
                if let Some(&link) = net.incoming(id).first() {
                    if !mask.is_frozen(link) {
                        let tail = beliefs[net.connection(link).from.0];
                        deltas[link.0] += learning_rate * d[id.0] * tail;
                    }
                }
            }
            NodeKind::ObservedInput | NodeKind::PremiseAux => {}
        }
    }
    Ok(())
}

fn apply_deltas(net: &mut BeliefNetwork, mask: &ClampMask, deltas: &[f64], clip: bool) -> Vec<f64> {
    let mut applied = vec![0.0; deltas.len()];
    for conn in mask.adjustable() {
        let old = net.weight(conn);
        let mut w = old + deltas[conn.0];
        if clip {
            w = w.clamp(-1.0, 1.0);
        }
        net.set_weight(conn, w);
        applied[conn.0] = w - old;
    }
    applied
}

/// One online update on a single case. Returns the applied change per
/// connection (zero for frozen ones).
pub fn apply_update(
    net: &mut BeliefNetwork,
    case: &CaseInstance,
    mask: &ClampMask,
    cfg: &TrainConfig,
) -> Result<Vec<f64>, InferenceError> {
    let prepared = Prepared::new(net, case);
    let mut deltas = vec![0.0; net.connections().len()];
    case_deltas(net, &prepared, mask, cfg.learning_rate, &mut Vec::new(), &mut deltas)?;
    Ok(apply_deltas(net, mask, &deltas, cfg.weight_clip))
}

/// (max |D|, mean D per output) over `cases`.
fn evaluate(
    net: &BeliefNetwork,
    cases: &[&Prepared],
    beliefs: &mut Vec<f64>,
) -> Result<(f64, Vec<f64>), (String, InferenceError)> {
    let mut max = 0.0f64;
    let mut sums = vec![0.0; net.outputs().len()];
    for case in cases {
        infer_into(net, &case.observed, false, beliefs).map_err(|e| (case.id.clone(), e))?;
        for (i, ((_, id), &t)) in net.outputs().iter().zip(&case.targets).enumerate() {
            let d = output_discrepancy(t, beliefs[id.0]);
            max = max.max(d.abs());
            sums[i] += d;
        }
    }
    let n = cases.len().max(1) as f64;
    Ok((max, sums.into_iter().map(|s| s / n).collect()))
}

pub fn train(
    net: &mut BeliefNetwork,
    training: &[CaseInstance],
    reference: &[CaseInstance],
    mask: &ClampMask,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_observed(net, training, reference, mask, cfg, |_, _| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_observed(
    net: &mut BeliefNetwork,
    training: &[CaseInstance],
    reference: &[CaseInstance],
    mask: &ClampMask,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord, &BeliefNetwork),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let initial = net.weights();
    let mut pool: Vec<Prepared> = training.iter().map(|c| Prepared::new(net, c)).collect();
    let references: Vec<Prepared> = reference.iter().map(|c| Prepared::new(net, c)).collect();
    let mut promoted = vec![false; references.len()];
    let mut violations = Vec::new();
    let mut trace = Vec::new();
    let mut rng = cfg.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
    let mut beliefs = Vec::new();
    let mut deltas = vec![0.0; net.connections().len()];

    let wrap =
        |epoch: usize| move |(case, source): (String, InferenceError)| TrainError::Inference { epoch, case, source };

    let (mut max_d, _) = evaluate(net, &pool.iter().collect::<Vec<_>>(), &mut beliefs).map_err(wrap(0))?;
    let mut resolved = max_d <= cfg.eps_train;
    let mut epochs_used = 0;

    while !resolved && epochs_used < cfg.max_epochs {
        epochs_used += 1;
        let epoch = epochs_used;
        let mut order: Vec<usize> = (0..pool.len()).collect();
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        if cfg.batch {
            deltas.iter_mut().for_each(|d| *d = 0.0);
        }
        for &i in &order {
            if !cfg.batch {
                deltas.iter_mut().for_each(|d| *d = 0.0);
            }
            case_deltas(net, &pool[i], mask, cfg.learning_rate, &mut beliefs, &mut deltas)
                .map_err(|source| TrainError::Inference { epoch, case: pool[i].id.clone(), source })?;
            if !cfg.batch {
                apply_deltas(net, mask, &deltas, cfg.weight_clip);
            }
        }
        if cfg.batch {
            apply_deltas(net, mask, &deltas, cfg.weight_clip);
        }

        let mut newly = Vec::new();
        for (i, r) in references.iter().enumerate() {
            if promoted[i] {
                continue;
            }
            let (worst, _) = evaluate(net, &[r], &mut beliefs).map_err(wrap(epoch))?;
            if worst > cfg.eps_ref {
                promoted[i] = true;
                newly.push(r.id.clone());
                pool.push(r.clone());
            }
        }
        violations.extend(newly.iter().cloned());

        let (m, means) = evaluate(net, &pool.iter().collect::<Vec<_>>(), &mut beliefs).map_err(wrap(epoch))?;
        max_d = m;
        resolved = max_d <= cfg.eps_train;
        let record = EpochRecord { epoch, max_abs_discrepancy: max_d, mean_discrepancy: means, promoted: newly };
        observer(&record, net);
        trace.push(record);
    }

    let mut reference_consistent = true;
    for r in &references {
        let (worst, _) = evaluate(net, &[r], &mut beliefs).map_err(wrap(epochs_used))?;
        reference_consistent &= worst <= cfg.eps_ref;
    }

    let weight_delta_norm = net.weights().iter().zip(&initial).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();

    Ok(TrainOutcome {
        resolved,
        epochs_used,
        final_max_discrepancy: max_d,
        reference_violations: violations,
        reference_consistent,
        weight_delta_norm,
        hypotheses: net.outputs().iter().map(|(h, _)| h.clone()).collect(),
        trace,
    })
}
