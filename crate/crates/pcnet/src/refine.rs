//! Greedy cover refinement.
//!
//! Starting from an initial cover, the controller evaluates every single
//! specialization and generalization move, scores each candidate by
//! expected utility minus representation cost, and takes the best move as
//! long as it improves the current net value. Candidates are generated in
//! a fixed order (specializations first, targets sorted by id), and exact
//! ties fall to the earliest candidate, so traces are deterministic.

use std::collections::{BTreeMap, BTreeSet};

use crate::abstraction::ConceptualCover;
use crate::builder::{CategorizationDecisionModel, CategorizationPid, PreferenceModel};
use crate::error::{Error, Result};
use crate::exec;
use crate::inference::{EvidenceSet, SolveResult};
use crate::model::PcNet;
use crate::numfmt::significant;

/// Smallest net-value gain that counts as an improvement. Mathematically
/// equal covers can differ by a few ulps when their expected utilities are
/// computed along different factorizations; gains below this threshold are
/// treated as noise and do not justify a move.
pub const MIN_IMPROVEMENT: f64 = 1e-9;

/// Cost weights: price per stored CPT entry and per cover member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    kappa_table: f64,
    kappa_concept: f64,
}

impl CostParams {
    pub fn new(kappa_table: f64, kappa_concept: f64) -> Result<CostParams> {
        if kappa_table < 0.0 || kappa_concept < 0.0 {
            return Err(Error::NegativeCost);
        }
        Ok(CostParams {
            kappa_table,
            kappa_concept,
        })
    }

    pub fn free() -> CostParams {
        CostParams {
            kappa_table: 0.0,
            kappa_concept: 0.0,
        }
    }

    pub fn kappa_table(&self) -> f64 {
        self.kappa_table
    }

    pub fn kappa_concept(&self) -> f64 {
        self.kappa_concept
    }

    fn cost(&self, entries: u64, members: usize) -> f64 {
        self.kappa_table * entries as f64 + self.kappa_concept * members as f64
    }
}

/// Representation cost of the categorization model a cover would build.
pub fn model_cost(net: &PcNet, cover: &ConceptualCover, params: &CostParams) -> Result<f64> {
    let pid = CategorizationPid::build(net, cover)?;
    Ok(params.cost(pid.cpt_entry_count(), cover.members().len()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefineMove {
    Init,
    Specialize(String),
    Generalize(String),
}

impl RefineMove {
    fn label(&self) -> String {
        match self {
            RefineMove::Init => "init".to_string(),
            RefineMove::Specialize(id) => format!("specialize:{id}"),
            RefineMove::Generalize(id) => format!("generalize:{id}"),
        }
    }
}

/// One accepted state of the refinement walk.
#[derive(Debug, Clone)]
pub struct RefineStep {
    pub mv: RefineMove,
    pub cover: Vec<String>,
    pub best_action: String,
    pub best_eu: f64,
    pub cost: f64,
    pub net_value: f64,
}

/// The accepted steps in order; the last one is the final cover.
#[derive(Debug, Clone)]
pub struct RefinementTrace {
    pub steps: Vec<RefineStep>,
}

impl RefinementTrace {
    pub fn final_step(&self) -> &RefineStep {
        self.steps.last().expect("at least the initial step")
    }

    /// One JSON object per line, twelve significant digits.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!(
                "{{\"move\": \"{}\", \"cover\": [{}], \"best_action\": \"{}\", \"best_eu\": {}, \"cost\": {}, \"net_value\": {}}}\n",
                s.mv.label(),
                s.cover
                    .iter()
                    .map(|m| format!("\"{m}\""))
                    .collect::<Vec<_>>()
                    .join(", "),
                s.best_action,
                significant(s.best_eu, 12),
                significant(s.cost, 12),
                significant(s.net_value, 12),
            ));
        }
        out
    }
}

fn evaluate(
    net: &PcNet,
    pref: &PreferenceModel,
    cover: &ConceptualCover,
    e: &EvidenceSet,
    params: &CostParams,
) -> Result<(SolveResult, f64)> {
    let model = CategorizationDecisionModel::with_preference(net, cover, pref)?;
    let solved = model.solve(e)?;
    let cost = params.cost(model.pid().cpt_entry_count(), cover.members().len());
    Ok((solved, cost))
}

fn candidate_moves(net: &PcNet, cover: &ConceptualCover) -> Result<Vec<(RefineMove, ConceptualCover)>> {
    let mut out = Vec::new();
    let mut internal: Vec<&String> = cover
        .members()
        .iter()
        .filter(|id| !net.is_leaf(id).unwrap_or(true))
        .collect();
    internal.sort();
    for id in internal {
        out.push((RefineMove::Specialize(id.clone()), cover.specialize(net, id)?));
    }

    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in cover.members() {
        if let Some(parent) = net.parent_of(id)? {
            groups.entry(parent.to_string()).or_default().push(id.clone());
        }
    }
    for (parent, group) in groups {
        if group.len() == net.most_general_subsumees(&parent)?.len() {
            let ids: Vec<&str> = group.iter().map(String::as_str).collect();
            out.push((RefineMove::Generalize(parent), cover.generalize(net, &ids)?));
        }
    }
    Ok(out)
}

/// Greedy best-improvement refinement under the net's own preferences.
pub fn refine(
    net: &PcNet,
    e: &EvidenceSet,
    params: &CostParams,
    init: &ConceptualCover,
) -> Result<RefinementTrace> {
    let pref = net.preference().ok_or(Error::NoPreference)?;
    refine_with(net, pref, e, params, init)
}

/// Greedy best-improvement refinement under explicit preferences.
pub fn refine_with(
    net: &PcNet,
    pref: &PreferenceModel,
    e: &EvidenceSet,
    params: &CostParams,
    init: &ConceptualCover,
) -> Result<RefinementTrace> {
    let init = ConceptualCover::from_ids(
        net,
        &init.members().iter().map(String::as_str).collect::<Vec<_>>(),
    )
    .map_err(|e| Error::InitInvalid(e.to_string()))?;

    let (solved, cost) = evaluate(net, pref, &init, e, params)?;
    let mut current = init;
    let mut current_value = solved.best_eu - cost;
    let mut steps = vec![RefineStep {
        mv: RefineMove::Init,
        cover: current.members().to_vec(),
        best_action: solved.best_action,
        best_eu: solved.best_eu,
        cost,
        net_value: current_value,
    }];
    let mut visited: BTreeSet<String> = BTreeSet::new();
    visited.insert(current.key());

    loop {
        let candidates: Vec<(RefineMove, ConceptualCover)> = candidate_moves(net, &current)?
            .into_iter()
            .filter(|(_, c)| !visited.contains(&c.key()))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let scored = exec::map_collect(candidates, |(mv, cover)| {
            evaluate(net, pref, &cover, e, params).map(|(solved, cost)| (mv, cover, solved, cost))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let mut best: Option<(usize, f64)> = None;
        for (i, (_, _, solved, cost)) in scored.iter().enumerate() {
            let value = solved.best_eu - cost;
            if best.map_or(true, |(_, bv)| value > bv) {
                best = Some((i, value));
            }
        }
        let (bi, value) = best.expect("candidates scored");
        if value <= current_value + MIN_IMPROVEMENT {
            break;
        }
        let (mv, cover, solved, cost) = scored.into_iter().nth(bi).expect("index in range");
        visited.insert(cover.key());
        steps.push(RefineStep {
            mv,
            cover: cover.members().to_vec(),
            best_action: solved.best_action,
            best_eu: solved.best_eu,
            cost,
            net_value: value,
        });
        current = cover;
        current_value = value;
    }
    Ok(RefinementTrace { steps })
}
