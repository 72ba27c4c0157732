#![allow(dead_code)]

use std::collections::BTreeMap;

use cfrefine::{Clause, Premise, Rule, RuleBase};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Knobs for the test-side random rule base generator. Independent of the
/// harness generator: allows OR clauses, chains of intermediates and weak
/// strengths.
#[derive(Clone, Copy)]
pub struct Shape {
    pub attributes: (usize, usize),
    pub middle: (usize, usize),
    pub hypotheses: (usize, usize),
    pub extra_rules: (usize, usize),
    pub max_clauses: usize,
    pub or_probability: f64,
    /// Probability that a strength is drawn below 0.2 in magnitude.
    pub weak_probability: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            attributes: (2, 6),
            middle: (0, 3),
            hypotheses: (1, 3),
            extra_rules: (0, 6),
            max_clauses: 3,
            or_probability: 0.3,
            weak_probability: 0.3,
        }
    }
}

fn strength(rng: &mut ChaCha8Rng, weak: f64) -> f64 {
    let m: f64 = if rng.gen_bool(weak) { rng.gen_range(0.0..0.2) } else { rng.gen_range(0.2..=1.0) };
    let m = (m * 1000.0).round() / 1000.0;
    if rng.gen_bool(0.3) {
        -m
    } else {
        m
    }
}

fn premise(rng: &mut ChaCha8Rng, pool: &[String], shape: &Shape, must: Option<&String>) -> Premise {
    let n = rng.gen_range(1..=shape.max_clauses);
    let mut clauses = Vec::with_capacity(n);
    for i in 0..n {
        let width = if pool.len() > 1 && rng.gen_bool(shape.or_probability) { 2 } else { 1 };
        let mut atoms: Vec<String> = pool.choose_multiple(rng, width).cloned().collect();
        if i == 0 {
            if let Some(m) = must {
                atoms[0] = m.clone();
                atoms.dedup();
            }
        }
        clauses.push(Clause(atoms));
    }
    Premise(clauses)
}

pub fn random_rulebase(seed: u64, shape: &Shape) -> RuleBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = rng.gen_range(shape.attributes.0..=shape.attributes.1);
    let nm = rng.gen_range(shape.middle.0..=shape.middle.1);
    let nh = rng.gen_range(shape.hypotheses.0..=shape.hypotheses.1);
    let attrs: Vec<String> = (0..na).map(|i| format!("a{i}")).collect();
    let mids: Vec<String> = (0..nm).map(|i| format!("m{i}")).collect();
    let hyps: Vec<String> = (0..nh).map(|i| format!("h{i}")).collect();

    // mid i may read attributes and mids < i; hypotheses read anything
    let mut rules = Vec::new();
    let mut next_id = 0;
    let mut add = |rules: &mut Vec<Rule>, p: Premise, c: &String, s: f64| {
        next_id += 1;
        rules.push(Rule::new(format!("r{next_id}"), p, c.clone(), s));
    };
    for (i, m) in mids.iter().enumerate() {
        let pool: Vec<String> = attrs.iter().chain(&mids[..i]).cloned().collect();
        let p = premise(&mut rng, &pool, shape, None);
        let s = strength(&mut rng, shape.weak_probability);
        add(&mut rules, p, m, s);
    }
    for (i, m) in mids.iter().enumerate() {
        let later: Vec<&String> = mids[i + 1..].iter().chain(&hyps).collect();
        let head = later[rng.gen_range(0..later.len())];
        let pool: Vec<String> = attrs.iter().chain(&mids[..=i]).cloned().collect();
        let p = premise(&mut rng, &pool, shape, Some(m));
        let s = strength(&mut rng, shape.weak_probability);
        add(&mut rules, p, head, s);
    }
    for h in &hyps {
        if rng.gen_bool(0.8) {
            let p = premise(&mut rng, &attrs, shape, None);
            let s = strength(&mut rng, shape.weak_probability);
            add(&mut rules, p, h, s);
        }
    }
    let extra = rng.gen_range(shape.extra_rules.0..=shape.extra_rules.1);
    for _ in 0..extra {
        let heads: Vec<&String> = mids.iter().chain(&hyps).collect();
        let head = heads[rng.gen_range(0..heads.len())];
        let limit = mids.iter().position(|m| m == head).unwrap_or(mids.len());
        let pool: Vec<String> = attrs.iter().chain(&mids[..limit]).cloned().collect();
        let p = premise(&mut rng, &pool, shape, None);
        let s = strength(&mut rng, shape.weak_probability);
        add(&mut rules, p, head, s);
    }
    RuleBase::new(format!("random-{seed}"), attrs, hyps, rules).expect("generator builds valid bases")
}

/// Random sparse probe over the base's attributes.
pub fn random_probe(rng: &mut ChaCha8Rng, rb: &RuleBase) -> BTreeMap<String, f64> {
    rb.attributes()
        .iter()
        .filter_map(|a| {
            let v: f64 = rng.gen_range(-1.0..=1.0);
            rng.gen_bool(0.7).then(|| (a.clone(), v))
        })
        .collect()
}

pub struct GradientCheck {
    pub checked: usize,
    pub worst_relative: f64,
    pub failures: Vec<String>,
}

/// Small network for gradient checks; `None` when the draw exceeds
/// `max_nodes` nodes.
pub fn small_network(
    seed: u64,
    combine: cfrefine::CombineMode,
    data_error_mode: bool,
    max_nodes: usize,
) -> Option<cfrefine::BeliefNetwork> {
    let shape = Shape {
        attributes: (1, 3),
        middle: (0, 1),
        hypotheses: (1, 2),
        extra_rules: (0, 2),
        max_clauses: 2,
        or_probability: 0.3,
        weak_probability: 0.1,
    };
    let rb = random_rulebase(seed, &shape);
    let cfg = cfrefine::NetworkConfig { data_error_mode, combine, threshold: 0.2 };
    let mut net = cfrefine::BeliefNetwork::compile(&rb, cfg);
    if net.nodes().len() > max_nodes {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDA7A);
    let links: Vec<_> = rb.attributes().iter().filter_map(|a| net.data_link(a)).collect();
    for link in links {
        net.set_weight(link, rng.gen_range(0.3..=1.0));
    }
    Some(net)
}

/// Compares `weight_gradient` with central differences of the head belief
/// for every adjustable connection, skipping heads near a nonsmooth point.
pub fn gradient_check(net: &cfrefine::BeliefNetwork, probe: &[f64], h: f64) -> GradientCheck {
    use cfrefine::trainer::weight_gradient;
    use cfrefine::{infer, CombineMode, Observation, Origin};

    let mut out = GradientCheck { checked: 0, worst_relative: 0.0, failures: Vec::new() };
    let obs = Observation(probe.to_vec());
    let Ok(beliefs) = infer(net, &obs, false) else { return out };

    for (i, conn) in net.connections().iter().enumerate() {
        if conn.origin == Origin::PremiseStructure {
            continue;
        }
        if matches!(conn.origin, Origin::Rule(_)) {
            let contributions: Vec<f64> = net
                .incoming(conn.to)
                .iter()
                .map(|&c| net.connection(c))
                .filter(|c| matches!(c.origin, Origin::Rule(_)))
                .map(|c| c.weight * beliefs.get(c.from))
                .collect();
            let smooth = match net.config().combine {
                CombineMode::Mycin => contributions.iter().all(|c| c.abs() <= 0.9),
                CombineMode::ClippedSum => (contributions.iter().sum::<f64>().abs() - 1.0).abs() > 1e-3,
            };
            if !smooth {
                continue;
            }
        }
        let id = cfrefine::ConnId(i);
        let analytic = weight_gradient(net, &beliefs, id).expect("smooth point");
        let head = |w: f64| {
            let mut n = net.clone();
            n.set_weight(id, w);
            infer(&n, &obs, false).map(|b| b.get(conn.to))
        };
        let (Ok(up), Ok(down)) = (head(conn.weight + h), head(conn.weight - h)) else { continue };
        let fd = (up - down) / (2.0 * h);
        let abs = (analytic - fd).abs();
        let scale = analytic.abs().max(fd.abs());
        let rel = if scale > 0.0 { abs / scale } else { 0.0 };
        out.checked += 1;
        out.worst_relative = out.worst_relative.max(rel);
        if abs >= 1e-6 && rel >= 1e-3 {
            out.failures.push(format!("{}: analytic {analytic} vs fd {fd}", conn.origin));
        }
    }
    out
}
