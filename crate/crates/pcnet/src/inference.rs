//! Exact solving of categorization decision models, plus a brute-force
//! joint-table oracle for cross-checking them.
//!
//! Solving runs variable elimination separately per cover member: every
//! feature contributes one factor, evidence restricts them, and the
//! unobserved features sum out from the most specific rank downward. The
//! member likelihoods then combine with the cover priors into a posterior
//! and expected utilities.
//!
//! The oracle materializes p(features | member) tables outright and is
//! refused beyond [`JOINT_TABLE_LIMIT`](crate::JOINT_TABLE_LIMIT) entries.

use std::collections::BTreeMap;

use crate::abstraction::ConceptualCover;
use crate::builder::{member_diagrams, resolve_cover, CategorizationDecisionModel, CategorizationPid, ModelFeature};
use crate::error::{Error, Result};
use crate::exec;
use crate::model::{PcDiagram, PcNet};
use crate::numfmt::significant;
use crate::{EVIDENCE_MASS_THRESHOLD, JOINT_TABLE_LIMIT, NORMALIZATION_TOLERANCE};

/// Observed feature states, keyed by feature.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvidenceSet {
    states: BTreeMap<usize, usize>,
}

impl EvidenceSet {
    pub fn empty() -> EvidenceSet {
        EvidenceSet::default()
    }

    /// Resolves feature and state names. Assigning one feature two
    /// different states is a conflict; repeating an assignment is not.
    pub fn from_pairs(net: &PcNet, pairs: &[(&str, &str)]) -> Result<EvidenceSet> {
        let mut states = BTreeMap::new();
        for (feature, state) in pairs {
            let fi = net.feature_index(feature)?;
            let s = net.feature(fi).state_index(state).ok_or_else(|| Error::UnknownState {
                feature: feature.to_string(),
                state: state.to_string(),
            })?;
            if let Some(&prev) = states.get(&fi) {
                if prev != s {
                    return Err(Error::ConflictingEvidence(feature.to_string()));
                }
            }
            states.insert(fi, s);
        }
        Ok(EvidenceSet { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states.iter().map(|(&f, &s)| (f, s))
    }

    /// Feature and state names, ascending by feature rank.
    pub fn ids(&self, net: &PcNet) -> Vec<(String, String)> {
        self.states
            .iter()
            .map(|(&f, &s)| {
                let decl = net.feature(f);
                (decl.id.clone(), decl.domain[s].clone())
            })
            .collect()
    }
}

/// A nonnegative table over a sorted set of feature variables. The first
/// variable is the most significant index digit.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn scalar(&self) -> f64 {
        debug_assert!(self.vars.is_empty());
        self.values[0]
    }

    fn position(&self, var: usize) -> Option<usize> {
        self.vars.binary_search(&var).ok()
    }

    /// Fixes one variable to a state and drops it.
    fn restrict(&self, var: usize, state: usize) -> Factor {
        let pos = self.position(var).expect("restricted variable present");
        let inner: usize = self.dims[pos + 1..].iter().product();
        let outer: usize = self.dims[..pos].iter().product();
        let dim = self.dims[pos];
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * dim + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut vars = self.vars.clone();
        let mut dims = self.dims.clone();
        vars.remove(pos);
        dims.remove(pos);
        Factor { vars, dims, values }
    }

    /// Sums one variable out.
    fn sum_out(&self, var: usize) -> Factor {
        let pos = self.position(var).expect("eliminated variable present");
        let inner: usize = self.dims[pos + 1..].iter().product();
        let outer: usize = self.dims[..pos].iter().product();
        let dim = self.dims[pos];
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..dim {
                let base = (o * dim + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut dims = self.dims.clone();
        vars.remove(pos);
        dims.remove(pos);
        Factor { vars, dims, values }
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut dims = self.dims.clone();
        for (&v, &d) in other.vars.iter().zip(&other.dims) {
            if let Err(at) = vars.binary_search(&v) {
                vars.insert(at, v);
                dims.insert(at, d);
            }
        }
        let total: usize = dims.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut states = vec![0usize; vars.len()];
        for cfg in 0..total {
            let mut rest = cfg;
            for k in (0..vars.len()).rev() {
                states[k] = rest % dims[k];
                rest /= dims[k];
            }
            let index = |f: &Factor| -> usize {
                let mut idx = 0;
                for (&v, &d) in f.vars.iter().zip(&f.dims) {
                    let k = vars.binary_search(&v).expect("var in union");
                    idx = idx * d + states[k];
                }
                idx
            };
            values.push(self.values[index(self)] * other.values[index(other)]);
        }
        Factor { vars, dims, values }
    }
}

/// Likelihood of the evidence under one member: variable elimination over
/// that member's CPT slices.
fn member_likelihood(features: &[ModelFeature], member: usize, e: &EvidenceSet) -> f64 {
    let mut factors: Vec<Factor> = features
        .iter()
        .map(|mf| {
            let mut vars = mf.parents.clone();
            let mut dims = mf.parent_dims.clone();
            vars.push(mf.feature);
            dims.push(mf.states);
            Factor {
                vars,
                dims,
                values: mf.slices[member].clone(),
            }
        })
        .collect();

    for (var, state) in e.entries() {
        for f in &mut factors {
            if f.position(var).is_some() {
                *f = f.restrict(var, state);
            }
        }
    }

    let mut pending: Vec<usize> = Vec::new();
    for f in &factors {
        for &v in &f.vars {
            if let Err(at) = pending.binary_search(&v) {
                pending.insert(at, v);
            }
        }
    }
    for &var in pending.iter().rev() {
        let (mut with, without): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.position(var).is_some());
        let mut joined = with.remove(0);
        for f in &with {
            joined = joined.product(f);
        }
        factors = without;
        factors.push(joined.sum_out(var));
    }
    factors.iter().map(Factor::scalar).product()
}

impl<'a> CategorizationPid<'a> {
    /// Evidence likelihood per member, in cover order.
    pub fn likelihoods(&self, e: &EvidenceSet) -> Vec<f64> {
        (0..self.member_ids().len())
            .map(|j| member_likelihood(&self.features, j, e))
            .collect()
    }

    /// Posterior over the cover members given evidence.
    pub fn posterior(&self, e: &EvidenceSet) -> Result<Vec<f64>> {
        let like = self.likelihoods(e);
        let mut mass = 0.0;
        for (l, p) in like.iter().zip(self.priors()) {
            mass += l * p;
        }
        if mass <= EVIDENCE_MASS_THRESHOLD {
            return Err(Error::EvidenceImpossible {
                mass,
                threshold: EVIDENCE_MASS_THRESHOLD,
            });
        }
        Ok(like
            .iter()
            .zip(self.priors())
            .map(|(l, p)| l * p / mass)
            .collect())
    }
}

/// The outcome of solving one categorization decision model.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub cover: Vec<String>,
    pub posterior: Vec<(String, f64)>,
    pub action_values: Vec<(String, f64)>,
    pub best_action: String,
    pub best_eu: f64,
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl SolveResult {
    /// Canonical JSON at twelve significant digits.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        out.push_str("  \"cover\": [");
        for (i, m) in self.cover.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("\"{}\"", escape(m)));
        }
        out.push_str("],\n  \"posterior\": {");
        for (i, (m, p)) in self.posterior.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(" \"{}\": {}", escape(m), significant(*p, 12)));
        }
        out.push_str(" },\n  \"action_values\": {");
        for (i, (a, v)) in self.action_values.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(" \"{}\": {}", escape(a), significant(*v, 12)));
        }
        out.push_str(" },\n");
        out.push_str(&format!("  \"best_action\": \"{}\",\n", escape(&self.best_action)));
        out.push_str(&format!("  \"best_eu\": {}\n}}", significant(self.best_eu, 12)));
        out
    }
}

impl<'a> CategorizationDecisionModel<'a> {
    fn check_observed(&self, e: &EvidenceSet) -> Result<()> {
        for (var, _) in e.entries() {
            if !self.observed().contains(&var) {
                return Err(Error::UnobservedFeatureInEvidence(
                    self.net().feature_id(var).to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Posterior over cover members; evidence must stay within the
    /// observable features.
    pub fn posterior(&self, e: &EvidenceSet) -> Result<Vec<(String, f64)>> {
        self.check_observed(e)?;
        let post = self.pid().posterior(e)?;
        Ok(self
            .member_ids()
            .iter()
            .cloned()
            .zip(post)
            .collect())
    }

    /// Expected utility of every action under the posterior, in action
    /// declaration order.
    pub fn expected_utilities(&self, e: &EvidenceSet) -> Result<Vec<(String, f64)>> {
        self.check_observed(e)?;
        let post = self.pid().posterior(e)?;
        Ok(self
            .action_ids()
            .iter()
            .zip(self.utility_table())
            .map(|(a, row)| {
                let eu = row.iter().zip(&post).map(|(u, p)| u * p).sum();
                (a.clone(), eu)
            })
            .collect())
    }

    /// Solves the model: posterior, expected utilities and the best
    /// action. Exact ties fall to the lexicographically smaller action.
    pub fn solve(&self, e: &EvidenceSet) -> Result<SolveResult> {
        self.check_observed(e)?;
        let post = self.pid().posterior(e)?;
        let mut action_values = Vec::with_capacity(self.action_ids().len());
        let mut best: Option<(usize, f64)> = None;
        for (i, (a, row)) in self.action_ids().iter().zip(self.utility_table()).enumerate() {
            let eu: f64 = row.iter().zip(&post).map(|(u, p)| u * p).sum();
            action_values.push((a.clone(), eu));
            best = match best {
                None => Some((i, eu)),
                Some((bi, beu)) => {
                    if eu > beu || (eu == beu && a < &self.action_ids()[bi]) {
                        Some((i, eu))
                    } else {
                        Some((bi, beu))
                    }
                }
            };
        }
        let (bi, beu) = best.expect("at least one action");
        Ok(SolveResult {
            cover: self.member_ids().to_vec(),
            posterior: self.member_ids().iter().cloned().zip(post).collect(),
            action_values,
            best_action: self.action_ids()[bi].clone(),
            best_eu: beu,
        })
    }
}

/// Solves one model for many evidence sets; parallel under the `parallel`
/// feature, with results in input order.
pub fn solve_batch(
    model: &CategorizationDecisionModel<'_>,
    evidences: &[EvidenceSet],
) -> Result<Vec<SolveResult>> {
    exec::map_collect(evidences.to_vec(), |e| model.solve(&e))
        .into_iter()
        .collect()
}

/// Sequential twin of [`solve_batch`].
pub fn solve_batch_seq(
    model: &CategorizationDecisionModel<'_>,
    evidences: &[EvidenceSet],
) -> Result<Vec<SolveResult>> {
    exec::map_collect_seq(evidences.to_vec(), |e| model.solve(&e))
        .into_iter()
        .collect()
}

/// Dense p(features | member) tables for a cover, enumerated outright.
#[derive(Debug, Clone)]
pub struct JointTable {
    member_ids: Vec<String>,
    priors: Vec<f64>,
    features: Vec<usize>,
    dims: Vec<usize>,
    values: Vec<Vec<f64>>,
}

/// One member's full table, built feature by feature. The first feature is
/// the most significant index digit.
fn member_table(net: &PcNet, d: &PcDiagram) -> Vec<f64> {
    let feats = d.features();
    let dims: Vec<usize> = feats.iter().map(|&f| net.feature(f).domain.len()).collect();
    let mut table = vec![1.0f64];
    for (fpos, _) in feats.iter().enumerate() {
        let states = dims[fpos];
        let cpt = d.cpt_at(fpos);
        let projections: Vec<(usize, usize)> = cpt
            .parents()
            .iter()
            .map(|&p| {
                let pos = feats.binary_search(&p).expect("parent precedes child");
                let stride: usize = dims[pos + 1..fpos].iter().product();
                (stride, dims[pos])
            })
            .collect();
        let size = table.len();
        let mut next = vec![0.0; size * states];
        for cfg in 0..size {
            let mut pcfg = 0;
            for &(stride, dim) in &projections {
                pcfg = pcfg * dim + (cfg / stride) % dim;
            }
            let row = cpt.row(pcfg);
            let base = cfg * states;
            for (s, &p) in row.iter().enumerate() {
                next[base + s] = table[cfg] * p;
            }
        }
        table = next;
    }
    table
}

fn joint_oracle_with(
    net: &PcNet,
    cover: &ConceptualCover,
    run: fn(Vec<PcDiagram>, &PcNet) -> Vec<Vec<f64>>,
) -> Result<JointTable> {
    let members = resolve_cover(net, cover)?;
    let diagrams = member_diagrams(net, &members)?;
    let features = diagrams[0].features().to_vec();
    let dims: Vec<usize> = features.iter().map(|&f| net.feature(f).domain.len()).collect();
    let mut entries: u128 = members.len() as u128;
    for &d in &dims {
        entries = entries.saturating_mul(d as u128);
    }
    if entries > JOINT_TABLE_LIMIT as u128 {
        return Err(Error::JointTooLarge {
            entries,
            limit: JOINT_TABLE_LIMIT,
        });
    }
    let values = run(diagrams, net);
    Ok(JointTable {
        member_ids: cover.members().to_vec(),
        priors: members.iter().map(|&m| net.prior_idx(m)).collect(),
        features,
        dims,
        values,
    })
}

/// Builds the oracle tables for a cover, one table per member.
pub fn joint_oracle(net: &PcNet, cover: &ConceptualCover) -> Result<JointTable> {
    joint_oracle_with(net, cover, |diagrams, net| {
        exec::map_collect(diagrams, |d| member_table(net, &d))
    })
}

/// Sequential twin of [`joint_oracle`].
pub fn joint_oracle_seq(net: &PcNet, cover: &ConceptualCover) -> Result<JointTable> {
    joint_oracle_with(net, cover, |diagrams, net| {
        exec::map_collect_seq(diagrams, |d| member_table(net, &d))
    })
}

impl JointTable {
    pub fn member_ids(&self) -> &[String] {
        &self.member_ids
    }

    pub fn entry_count(&self) -> u64 {
        (self.values.len() * self.values.first().map_or(0, Vec::len)) as u64
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    /// p(features = cfg | member), the raw table row.
    pub fn values(&self, member: usize) -> &[f64] {
        &self.values[member]
    }

    fn stride_of(&self, feature: usize) -> (usize, usize) {
        let pos = self.features.binary_search(&feature).expect("feature in table");
        let stride: usize = self.dims[pos + 1..].iter().product();
        (stride, self.dims[pos])
    }

    /// Marginal p(F | member) summed straight out of the table.
    pub fn feature_marginal(&self, member: usize, feature: usize) -> Vec<f64> {
        let (stride, dim) = self.stride_of(feature);
        let mut out = vec![0.0; dim];
        for (cfg, &v) in self.values[member].iter().enumerate() {
            out[(cfg / stride) % dim] += v;
        }
        out
    }

    /// Joint mass of every observed-feature configuration per member:
    /// rows index members, columns the mixed-radix observed assignment.
    pub fn observed_marginals(&self, observed: &[usize]) -> Vec<Vec<f64>> {
        let projections: Vec<(usize, usize)> =
            observed.iter().map(|&f| self.stride_of(f)).collect();
        let buckets: usize = projections.iter().map(|&(_, d)| d).product();
        self.values
            .iter()
            .map(|vals| {
                let mut out = vec![0.0; buckets];
                for (cfg, &v) in vals.iter().enumerate() {
                    let mut b = 0;
                    for &(stride, dim) in &projections {
                        b = b * dim + (cfg / stride) % dim;
                    }
                    out[b] += v;
                }
                out
            })
            .collect()
    }

    /// Posterior over members by direct summation.
    pub fn posterior(&self, e: &EvidenceSet) -> Result<Vec<(String, f64)>> {
        let checks: Vec<(usize, usize, usize)> = e
            .entries()
            .map(|(f, s)| {
                let (stride, dim) = self.stride_of(f);
                (stride, dim, s)
            })
            .collect();
        let mut weighted: Vec<f64> = Vec::with_capacity(self.member_ids.len());
        for (vals, &prior) in self.values.iter().zip(&self.priors) {
            let mut acc = 0.0;
            'cfg: for (cfg, &v) in vals.iter().enumerate() {
                for &(stride, dim, s) in &checks {
                    if (cfg / stride) % dim != s {
                        continue 'cfg;
                    }
                }
                acc += v;
            }
            weighted.push(acc * prior);
        }
        let mass: f64 = weighted.iter().sum();
        if mass <= EVIDENCE_MASS_THRESHOLD {
            return Err(Error::EvidenceImpossible {
                mass,
                threshold: EVIDENCE_MASS_THRESHOLD,
            });
        }
        Ok(self
            .member_ids
            .iter()
            .cloned()
            .zip(weighted.into_iter().map(|w| w / mass))
            .collect())
    }
}

/// How far a cover's categorization model strays from the leaf-level
/// ground truth.
#[derive(Debug, Clone)]
pub struct SoundnessReport {
    /// Largest absolute deviation between the model joint and the
    /// prior-weighted leaf mixture, over all members and configurations.
    pub model_vs_mixture: f64,
    /// Largest absolute deviation of any single-feature marginal.
    pub marginal_vs_leaf: f64,
    pub joint_entries: u64,
    pub sound: bool,
}

/// Compares a cover's model against the exhaustive leaf-level joint.
pub fn check_soundness(net: &PcNet, cover: &ConceptualCover) -> Result<SoundnessReport> {
    let pid = CategorizationPid::build(net, cover)?;
    let leaf_cover = net.leaf_cover();
    let leaves = joint_oracle(net, &leaf_cover)?;
    let members = resolve_cover(net, cover)?;
    let diagrams = member_diagrams(net, &members)?;
    let model_tables: Vec<Vec<f64>> =
        exec::map_collect(diagrams, |d| member_table(net, &d));

    let leaf_pos: BTreeMap<&str, usize> = leaves
        .member_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut model_vs_mixture = 0.0f64;
    let mut marginal_vs_leaf = 0.0f64;
    for (j, &m) in members.iter().enumerate() {
        let under: Vec<usize> = if net.children_idx(m).is_empty() {
            vec![leaf_pos[net.concept_id(m)]]
        } else {
            net.descendant_leaves(m)
                .into_iter()
                .map(|l| leaf_pos[net.concept_id(l)])
                .collect()
        };
        let prior_j = pid.priors()[j];
        for (cfg, &pm) in model_tables[j].iter().enumerate() {
            let mut truth = 0.0;
            for &l in &under {
                truth += leaves.priors[l] * leaves.values[l][cfg];
            }
            let dev = (prior_j * pm - truth).abs();
            model_vs_mixture = model_vs_mixture.max(dev);
        }

        for (fpos, &fi) in leaves.features().iter().enumerate() {
            let dim = leaves.dims[fpos];
            let stride: usize = leaves.dims[fpos + 1..].iter().product();
            let mut model_marg = vec![0.0; dim];
            for (cfg, &pm) in model_tables[j].iter().enumerate() {
                model_marg[(cfg / stride) % dim] += pm;
            }
            for s in 0..dim {
                let mut mix = 0.0;
                for &l in &under {
                    let w = if prior_j > 0.0 {
                        leaves.priors[l] / prior_j
                    } else {
                        1.0 / under.len() as f64
                    };
                    mix += w * leaves.feature_marginal(l, fi)[s];
                }
                marginal_vs_leaf = marginal_vs_leaf.max((model_marg[s] - mix).abs());
            }
        }
    }
    let joint_entries = (model_tables.len() * model_tables[0].len()) as u64;
    Ok(SoundnessReport {
        model_vs_mixture,
        marginal_vs_leaf,
        joint_entries,
        sound: model_vs_mixture <= NORMALIZATION_TOLERANCE
            && marginal_vs_leaf <= NORMALIZATION_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = include_str!("../../../fixtures/tiny.pcnet.json");
    const MACHINING: &str = include_str!("../../../fixtures/machining.pcnet.json");
    const DOMINANCE: &str = include_str!("../../../fixtures/dominance.pcnet.json");

    fn tiny() -> PcNet {
        PcNet::from_json(TINY).unwrap()
    }

    fn cover<'n>(net: &'n PcNet, ids: &[&str]) -> ConceptualCover {
        ConceptualCover::from_ids(net, ids).unwrap()
    }

    fn ev<'n>(net: &'n PcNet, pairs: &[(&str, &str)]) -> EvidenceSet {
        EvidenceSet::from_pairs(net, pairs).unwrap()
    }

    #[test]
    fn posteriors_match_hand_computation() {
        let net = tiny();
        let model =
            CategorizationDecisionModel::build(&net, &cover(&net, &["A", "B"])).unwrap();
        let post = model.posterior(&ev(&net, &[("F", "hi")])).unwrap();
        assert_eq!(post[0].0, "A");
        assert!((post[0].1 - 3.0 / 11.0).abs() < 1e-12);
        assert!((post[1].1 - 8.0 / 11.0).abs() < 1e-12);

        let post = model.posterior(&ev(&net, &[("F", "lo")])).unwrap();
        assert!((post[0].1 - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn solving_picks_the_best_action() {
        let net = tiny();
        let model =
            CategorizationDecisionModel::build(&net, &cover(&net, &["A", "B"])).unwrap();

        let hi = model.solve(&ev(&net, &[("F", "hi")])).unwrap();
        assert_eq!(hi.best_action, "stop");
        assert_eq!(hi.best_eu, 0.0);
        let continue_eu = hi.action_values[0].1;
        assert!((continue_eu - (-290.0 / 11.0)).abs() < 1e-12);

        let lo = model.solve(&ev(&net, &[("F", "lo")])).unwrap();
        assert_eq!(lo.best_action, "continue");
        assert!((lo.best_eu - 20.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn leaf_cover_solution_is_exact() {
        let net = tiny();
        let model = CategorizationDecisionModel::build(&net, &net.leaf_cover()).unwrap();
        let lo = model.solve(&ev(&net, &[("F", "lo")])).unwrap();
        assert_eq!(lo.best_action, "continue");
        assert!((lo.best_eu - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_evidence_gives_the_same_value_at_every_cover() {
        let net = tiny();
        let mut values = Vec::new();
        for c in net.enumerate_covers().unwrap() {
            let model = CategorizationDecisionModel::build(&net, &c).unwrap();
            values.push(model.solve(&EvidenceSet::empty()).unwrap().best_eu);
        }
        for v in &values[1..] {
            assert!((v - values[0]).abs() < 1e-9, "{values:?}");
        }
    }

    #[test]
    fn exact_ties_fall_to_the_lexicographically_smaller_action() {
        let mut file: serde_json::Value = serde_json::from_str(TINY).unwrap();
        file["preference"]["actions"] = serde_json::json!(["s-act", "r-act"]);
        file["preference"]["utility"] = serde_json::json!({
            "s-act": { "A": 0, "B1": 0, "B2": 0 },
            "r-act": { "A": 0, "B1": 0, "B2": 0 }
        });
        let net = PcNet::from_json(&serde_json::to_string(&file).unwrap()).unwrap();
        let model = CategorizationDecisionModel::build(&net, &net.root_cover()).unwrap();
        let result = model.solve(&EvidenceSet::empty()).unwrap();
        assert_eq!(result.action_values[0].1, result.action_values[1].1);
        assert_eq!(result.best_action, "r-act");
    }

    #[test]
    fn impossible_evidence_is_reported_with_its_mass() {
        let text = r#"{
  "features": [ { "id": "x", "domain": ["x0", "x1"], "rank": 0 } ],
  "concepts": [
    { "id": "root" },
    { "id": "a", "parent": "root", "prior": 0.5 },
    { "id": "b", "parent": "root", "prior": 0.5 }
  ],
  "diagrams": [
    { "concept": "a", "features": ["x"], "cpt": { "x": [ { "given": {}, "p": { "x0": 1.0, "x1": 0.0 } } ] } },
    { "concept": "b", "features": ["x"], "cpt": { "x": [ { "given": {}, "p": { "x0": 1.0, "x1": 0.0 } } ] } }
  ],
  "preference": {
    "actions": ["go"],
    "utility": { "go": { "a": 1, "b": 2 } },
    "observed": ["x"]
  }
}
"#;
        let net = PcNet::from_json(text).unwrap();
        let model = CategorizationDecisionModel::build(&net, &net.leaf_cover()).unwrap();
        let err = model.solve(&ev(&net, &[("x", "x1")])).unwrap_err();
        match err {
            Error::EvidenceImpossible { mass, threshold } => {
                assert_eq!(mass, 0.0);
                assert_eq!(threshold, 1e-12);
            }
            other => panic!("expected impossible evidence, got {other:?}"),
        }
    }

    #[test]
    fn evidence_outside_the_observable_set_is_rejected() {
        let net = PcNet::from_json(MACHINING).unwrap();
        let model = CategorizationDecisionModel::build(&net, &net.leaf_cover()).unwrap();
        let err = model.solve(&ev(&net, &[("AE-freq", "high")])).unwrap_err();
        assert!(matches!(err, Error::UnobservedFeatureInEvidence(_)));
    }

    #[test]
    fn evidence_resolution_errors_are_specific() {
        let net = tiny();
        assert!(matches!(
            EvidenceSet::from_pairs(&net, &[("G", "hi")]),
            Err(Error::UnknownFeature(_))
        ));
        assert!(matches!(
            EvidenceSet::from_pairs(&net, &[("F", "mid")]),
            Err(Error::UnknownState { .. })
        ));
        assert!(matches!(
            EvidenceSet::from_pairs(&net, &[("F", "hi"), ("F", "lo")]),
            Err(Error::ConflictingEvidence(_))
        ));
        assert!(EvidenceSet::from_pairs(&net, &[("F", "hi"), ("F", "hi")]).is_ok());
    }

    #[test]
    fn oracle_and_elimination_agree_on_the_machining_net() {
        let net = PcNet::from_json(MACHINING).unwrap();
        let e = ev(
            &net,
            &[
                ("AE-mag", "high"),
                ("AE-peak", "high"),
                ("dyn-peak-x", "high"),
                ("dyn-peak-y", "high"),
                ("current", "low"),
            ],
        );
        for ids in [
            vec!["machine-state"],
            vec!["within-variability-limits", "out-of-variability-limits"],
            vec![
                "within-variability-limits",
                "tool-failure",
                "sensor-failure",
                "transient-state",
            ],
        ] {
            let c = cover(&net, &ids);
            let model = CategorizationDecisionModel::build(&net, &c).unwrap();
            let fast = model.posterior(&e).unwrap();
            let slow = joint_oracle(&net, &c).unwrap().posterior(&e).unwrap();
            for ((mi, pi), (mj, pj)) in fast.iter().zip(&slow) {
                assert_eq!(mi, mj);
                assert!((pi - pj).abs() < 1e-12, "{mi}: {pi} vs {pj}");
            }
        }
    }

    #[test]
    fn machining_leaf_solution_matches_the_frozen_profile() {
        let net = PcNet::from_json(MACHINING).unwrap();
        let model = CategorizationDecisionModel::build(&net, &net.leaf_cover()).unwrap();
        let e = ev(
            &net,
            &[
                ("AE-mag", "high"),
                ("AE-peak", "high"),
                ("dyn-peak-x", "high"),
                ("dyn-peak-y", "high"),
                ("current", "low"),
            ],
        );
        let result = model.solve(&e).unwrap();
        assert_eq!(result.best_action, "replace-tool");
        assert!((result.best_eu - 16.7279).abs() < 1e-3, "{}", result.best_eu);
        let p: BTreeMap<&str, f64> = result
            .posterior
            .iter()
            .map(|(m, p)| (m.as_str(), *p))
            .collect();
        assert!((p["within-variability-limits"] - 0.3913).abs() < 1e-3);
        assert!((p["tool-chatter"] - 0.2699).abs() < 1e-3);
        assert!((p["tool-breakage"] - 0.2136).abs() < 1e-3);
    }

    #[test]
    fn batch_solving_is_deterministic_across_execution_modes() {
        let net = PcNet::from_json(MACHINING).unwrap();
        let model = CategorizationDecisionModel::build(&net, &net.leaf_cover()).unwrap();
        let evidences: Vec<EvidenceSet> = vec![
            EvidenceSet::empty(),
            ev(&net, &[("AE-mag", "low"), ("current", "low")]),
            ev(&net, &[("AE-mag", "high"), ("AE-peak", "high")]),
            ev(&net, &[("dyn-peak-x", "high"), ("dyn-peak-y", "high"), ("current", "low")]),
        ];
        let par = solve_batch(&model, &evidences).unwrap();
        let seq = solve_batch_seq(&model, &evidences).unwrap();
        let join = |rs: &[SolveResult]| {
            rs.iter().map(SolveResult::to_json).collect::<Vec<_>>().join("\n")
        };
        assert_eq!(join(&par), join(&seq));
    }

    #[test]
    fn solve_result_json_is_canonical() {
        let net = tiny();
        let model =
            CategorizationDecisionModel::build(&net, &cover(&net, &["A", "B"])).unwrap();
        let json = model.solve(&ev(&net, &[("F", "hi")])).unwrap().to_json();
        assert_eq!(
            json,
            "{\n  \"cover\": [\"A\", \"B\"],\n  \"posterior\": { \"A\": 0.272727272727, \"B\": 0.727272727273 },\n  \"action_values\": { \"continue\": -26.3636363636, \"stop\": 0 },\n  \"best_action\": \"stop\",\n  \"best_eu\": 0\n}"
        );
    }

    #[test]
    fn derived_covers_stay_sound() {
        let net = PcNet::from_json(MACHINING).unwrap();
        for c in net.enumerate_covers().unwrap() {
            let report = check_soundness(&net, &c).unwrap();
            assert!(
                report.sound,
                "cover {}: joint {} marginal {}",
                c.key(),
                report.model_vs_mixture,
                report.marginal_vs_leaf
            );
            assert!(report.model_vs_mixture < 1e-12);
        }
    }

    #[test]
    fn corrupted_derived_diagrams_fail_the_soundness_check() {
        let net = tiny().propagate().unwrap();
        let mut file: serde_json::Value = serde_json::from_str(&net.to_json()).unwrap();
        let b = file["diagrams"]
            .as_array_mut()
            .unwrap()
            .iter_mut()
            .find(|d| d["concept"] == "B")
            .unwrap();
        b["cpt"]["F"][0]["p"] = serde_json::json!({ "hi": 0.78, "lo": 0.22 });
        let net = PcNet::from_json(&serde_json::to_string(&file).unwrap()).unwrap();
        let c = cover(&net, &["A", "B"]);
        let report = check_soundness(&net, &c).unwrap();
        assert!(!report.sound);
        assert!((report.model_vs_mixture - 0.008).abs() < 1e-12);
        // Per-feature marginals break by the same amount here.
        assert!(report.marginal_vs_leaf > 1e-3);
    }

    #[test]
    fn oversized_joints_are_refused() {
        let mut features = String::new();
        let mut cpts = String::new();
        for i in 0..24 {
            if i > 0 {
                features.push_str(", ");
                cpts.push_str(", ");
            }
            features.push_str(&format!(
                "{{ \"id\": \"f{i:02}\", \"domain\": [\"n\", \"y\"], \"rank\": {i} }}"
            ));
            cpts.push_str(&format!(
                "\"f{i:02}\": [ {{ \"given\": {{}}, \"p\": {{ \"n\": 0.5, \"y\": 0.5 }} }} ]"
            ));
        }
        let all: Vec<String> = (0..24).map(|i| format!("\"f{i:02}\"")).collect();
        let text = format!(
            "{{ \"features\": [ {features} ], \"concepts\": [ {{ \"id\": \"root\" }}, {{ \"id\": \"a\", \"parent\": \"root\", \"prior\": 0.5 }}, {{ \"id\": \"b\", \"parent\": \"root\", \"prior\": 0.5 }} ], \"diagrams\": [ {{ \"concept\": \"a\", \"features\": [ {feats} ], \"cpt\": {{ {cpts} }} }}, {{ \"concept\": \"b\", \"features\": [ {feats} ], \"cpt\": {{ {cpts} }} }} ] }}",
            feats = all.join(", ")
        );
        let net = PcNet::from_json(&text).unwrap();
        match joint_oracle(&net, &net.leaf_cover()) {
            Err(Error::JointTooLarge { entries, limit }) => {
                assert_eq!(entries, 2 * (1 << 24));
                assert_eq!(limit, 10_000_000);
            }
            other => panic!("expected size refusal, got {other:?}"),
        }
    }

    #[test]
    fn dominance_gap_appears_only_at_the_fine_cover() {
        let net = PcNet::from_json(DOMINANCE).unwrap();
        let e = ev(&net, &[("F", "hi")]);
        let coarse = CategorizationDecisionModel::build(&net, &cover(&net, &["A", "B"]))
            .unwrap()
            .solve(&e)
            .unwrap();
        let fine = CategorizationDecisionModel::build(&net, &net.leaf_cover())
            .unwrap()
            .solve(&e)
            .unwrap();
        assert_eq!(coarse.best_action, "act-b");
        assert_eq!(fine.best_action, "act-a");
        assert!(fine.best_eu > coarse.best_eu + 1.0);
    }
}
