//! Construction of categorization decision models.
//!
//! A conceptual cover turns into one probabilistic influence diagram: the
//! concept node becomes a chance variable ranging over the cover members,
//! each feature keeps one CPT slice per member, and slices extend
//! constantly over global parents a member does not condition on. The
//! preference side abstracts leaf utilities to cover members by
//! expectation under the subsumption weights.

use std::collections::BTreeMap;

use crate::abstraction::{derive_idx, ConceptualCover};
use crate::error::{Error, Result};
use crate::model::{PcDiagram, PcNet};
use crate::numfmt::significant;

/// Actions, a leaf-level utility table and the set of observable features.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel {
    actions: Vec<String>,
    utility: Vec<Vec<f64>>,
    leaf_ids: Vec<String>,
    observed: Vec<usize>,
}

impl PreferenceModel {
    /// Checks and assembles a preference model against a net: the utility
    /// table must cover exactly actions times leaves, and observed entries
    /// must name distinct features.
    pub fn new(
        net: &PcNet,
        actions: Vec<String>,
        utility: &BTreeMap<String, BTreeMap<String, f64>>,
        observed: Vec<String>,
    ) -> Result<PreferenceModel> {
        if actions.is_empty() {
            return Err(Error::Schema("preference declares no actions".into()));
        }
        for (i, a) in actions.iter().enumerate() {
            if actions[..i].contains(a) {
                return Err(Error::Schema(format!("duplicate action {a}")));
            }
        }
        let leaf_ids: Vec<String> = net.leaf_ids().into_iter().map(str::to_string).collect();
        for a in utility.keys() {
            if !actions.contains(a) {
                return Err(Error::Schema(format!("utility listed for undeclared action {a}")));
            }
        }
        let mut table = Vec::with_capacity(actions.len());
        for a in &actions {
            let per_leaf = utility
                .get(a)
                .ok_or_else(|| Error::Schema(format!("no utility row for action {a}")))?;
            for c in per_leaf.keys() {
                if !leaf_ids.contains(c) {
                    return Err(Error::Schema(format!(
                        "utility of {a} names {c}, which is not a leaf concept"
                    )));
                }
            }
            let mut row = Vec::with_capacity(leaf_ids.len());
            for l in &leaf_ids {
                let u = per_leaf.get(l).ok_or_else(|| {
                    Error::Schema(format!("utility of {a} misses leaf {l}"))
                })?;
                row.push(*u);
            }
            table.push(row);
        }
        let mut obs = Vec::with_capacity(observed.len());
        for f in &observed {
            let fi = net
                .feature_index(f)
                .map_err(|_| Error::Schema(format!("observed names unknown feature {f}")))?;
            if obs.contains(&fi) {
                return Err(Error::Schema(format!("observed lists feature {f} twice")));
            }
            obs.push(fi);
        }
        obs.sort_unstable();
        Ok(PreferenceModel {
            actions,
            utility: table,
            leaf_ids,
            observed: obs,
        })
    }

    pub fn action_ids(&self) -> &[String] {
        &self.actions
    }

    pub fn action_index(&self, action: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == action)
            .ok_or_else(|| Error::UnknownAction(action.to_string()))
    }

    pub fn leaf_ids(&self) -> &[String] {
        &self.leaf_ids
    }

    pub fn utility_by_ids(&self, action: &str, leaf: &str) -> Result<f64> {
        let a = self.action_index(action)?;
        let l = self
            .leaf_ids
            .binary_search_by(|x| x.as_str().cmp(leaf))
            .map_err(|_| Error::UnknownConcept(leaf.to_string()))?;
        Ok(self.utility[a][l])
    }

    pub(crate) fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn observed_ids(&self, net: &PcNet) -> Vec<String> {
        self.observed.iter().map(|&f| net.feature_id(f).to_string()).collect()
    }

    /// The same preferences under a positive affine rescaling.
    pub fn affine(&self, scale: f64, shift: f64) -> PreferenceModel {
        let mut out = self.clone();
        for row in &mut out.utility {
            for u in row.iter_mut() {
                *u = scale * *u + shift;
            }
        }
        out
    }

    /// Utility of an action at any concept: the expectation of the leaf
    /// utilities over the subsumed leaves, weighted by their priors. A
    /// zero-prior concept falls back to the unweighted leaf mean.
    pub fn cover_utility(&self, net: &PcNet, concept: &str, action: &str) -> Result<f64> {
        let a = self.action_index(action)?;
        let idx = net.concept_index(concept)?;
        let leaves = if net.children_idx(idx).is_empty() {
            vec![idx]
        } else {
            net.descendant_leaves(idx)
        };
        let total = net.prior_idx(idx);
        let mut acc = 0.0;
        for l in leaves.iter() {
            let pos = self
                .leaf_ids
                .binary_search_by(|x| x.as_str().cmp(net.concept_id(*l)))
                .map_err(|_| Error::UnknownConcept(net.concept_id(*l).to_string()))?;
            let w = if total > 0.0 {
                net.prior_idx(*l) / total
            } else {
                1.0 / leaves.len() as f64
            };
            acc += w * self.utility[a][pos];
        }
        Ok(acc)
    }
}

/// Resolves cover member ids against a net and re-checks the partition
/// property.
pub(crate) fn resolve_cover(net: &PcNet, cover: &ConceptualCover) -> Result<Vec<usize>> {
    let mut members = Vec::with_capacity(cover.members().len());
    for id in cover.members() {
        members.push(net.concept_index(id)?);
    }
    if let Some(leaf) = net.cover_defect(&members) {
        return Err(Error::CoverInvalid(format!(
            "leaf {} is not covered exactly once",
            net.concept_id(leaf)
        )));
    }
    Ok(members)
}

/// One diagram per member: stored ones as-is, internal members without one
/// derived on the fly. All must agree on the feature set.
pub(crate) fn member_diagrams(net: &PcNet, members: &[usize]) -> Result<Vec<PcDiagram>> {
    let mut diagrams: Vec<PcDiagram> = Vec::with_capacity(members.len());
    for &m in members {
        match net.diagram_idx(m) {
            Some(d) => diagrams.push(d.clone()),
            None if net.children_idx(m).is_empty() => {
                return Err(Error::DiagramMissing(net.concept_id(m).to_string()))
            }
            None => diagrams.push(derive_idx(net, m)?),
        }
    }
    let features = diagrams[0].features();
    for (i, d) in diagrams.iter().enumerate().skip(1) {
        if d.features() != features {
            return Err(Error::FeatureSetMismatch(format!(
                "cover members disagree on the feature set ({} differs)",
                net.concept_id(members[i])
            )));
        }
    }
    Ok(diagrams)
}

/// One feature of a categorization model: its global parent set and one
/// CPT slice per cover member, laid out over the merged parent space.
#[derive(Debug, Clone)]
pub(crate) struct ModelFeature {
    pub(crate) feature: usize,
    pub(crate) parents: Vec<usize>,
    pub(crate) parent_dims: Vec<usize>,
    pub(crate) states: usize,
    pub(crate) slices: Vec<Vec<f64>>,
}

/// The probabilistic part of a categorization model for one cover.
#[derive(Debug, Clone)]
pub struct CategorizationPid<'a> {
    net: &'a PcNet,
    cover: ConceptualCover,
    priors: Vec<f64>,
    pub(crate) features: Vec<ModelFeature>,
}

impl<'a> CategorizationPid<'a> {
    /// Assembles the influence diagram for a cover. Internal members
    /// without a stored diagram get one derived on the fly.
    pub fn build(net: &'a PcNet, cover: &ConceptualCover) -> Result<CategorizationPid<'a>> {
        let members = resolve_cover(net, cover)?;
        let diagrams = member_diagrams(net, &members)?;
        let features = diagrams[0].features().to_vec();

        let mut model_features = Vec::with_capacity(features.len());
        for (fpos, &fi) in features.iter().enumerate() {
            let mut parents: Vec<usize> = Vec::new();
            for d in &diagrams {
                for &p in d.cpt_at(fpos).parents() {
                    if let Err(at) = parents.binary_search(&p) {
                        parents.insert(at, p);
                    }
                }
            }
            let parent_dims: Vec<usize> =
                parents.iter().map(|&p| net.feature(p).domain.len()).collect();
            let states = net.feature(fi).domain.len();
            let configs: usize = parent_dims.iter().product();

            let mut slices = Vec::with_capacity(diagrams.len());
            for d in &diagrams {
                let cpt = d.cpt_at(fpos);
                let mut slice = vec![0.0; configs * states];
                let mut assignment = vec![0usize; parents.len()];
                for cfg in 0..configs {
                    let mut rest = cfg;
                    for k in (0..parents.len()).rev() {
                        assignment[k] = rest % parent_dims[k];
                        rest /= parent_dims[k];
                    }
                    for s in 0..states {
                        slice[cfg * states + s] = cpt.probability(
                            |f| assignment[parents.binary_search(&f).expect("merged parent")],
                            s,
                        );
                    }
                }
                slices.push(slice);
            }
            model_features.push(ModelFeature {
                feature: fi,
                parents,
                parent_dims,
                states,
                slices,
            });
        }

        let priors = members.iter().map(|&m| net.prior_idx(m)).collect();
        Ok(CategorizationPid {
            net,
            cover: cover.clone(),
            priors,
            features: model_features,
        })
    }

    pub fn net(&self) -> &'a PcNet {
        self.net
    }

    pub fn cover(&self) -> &ConceptualCover {
        &self.cover
    }

    pub fn member_ids(&self) -> &[String] {
        self.cover.members()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Stored probability entries across all feature CPTs, counting one
    /// slice per member.
    pub fn cpt_entry_count(&self) -> u64 {
        self.features
            .iter()
            .map(|f| (f.slices.len() * f.slices[0].len()) as u64)
            .sum()
    }
}

/// A categorization decision model: the influence diagram of a cover plus
/// the abstracted utility table and the observable feature set.
#[derive(Debug, Clone)]
pub struct CategorizationDecisionModel<'a> {
    pid: CategorizationPid<'a>,
    actions: Vec<String>,
    utility: Vec<Vec<f64>>,
    observed: Vec<usize>,
}

impl<'a> CategorizationDecisionModel<'a> {
    /// Builds the model for a cover using the net's own preference model.
    pub fn build(net: &'a PcNet, cover: &ConceptualCover) -> Result<CategorizationDecisionModel<'a>> {
        let pref = net.preference().ok_or(Error::NoPreference)?;
        Self::with_preference(net, cover, pref)
    }

    /// Builds the model for a cover under an explicit preference model.
    pub fn with_preference(
        net: &'a PcNet,
        cover: &ConceptualCover,
        pref: &PreferenceModel,
    ) -> Result<CategorizationDecisionModel<'a>> {
        let pid = CategorizationPid::build(net, cover)?;
        let mut utility = Vec::with_capacity(pref.action_ids().len());
        for a in pref.action_ids() {
            let mut row = Vec::with_capacity(pid.member_ids().len());
            for m in pid.member_ids() {
                row.push(pref.cover_utility(net, m, a)?);
            }
            utility.push(row);
        }
        Ok(CategorizationDecisionModel {
            pid,
            actions: pref.action_ids().to_vec(),
            utility,
            observed: pref.observed().to_vec(),
        })
    }

    pub fn pid(&self) -> &CategorizationPid<'a> {
        &self.pid
    }

    pub fn net(&self) -> &'a PcNet {
        self.pid.net()
    }

    pub fn cover(&self) -> &ConceptualCover {
        self.pid.cover()
    }

    pub fn member_ids(&self) -> &[String] {
        self.pid.member_ids()
    }

    pub fn action_ids(&self) -> &[String] {
        &self.actions
    }

    /// Abstracted utility of an action at a cover member.
    pub fn utility(&self, action: &str, member: &str) -> Result<f64> {
        let a = self
            .actions
            .iter()
            .position(|x| x == action)
            .ok_or_else(|| Error::UnknownAction(action.to_string()))?;
        let m = self
            .member_ids()
            .iter()
            .position(|x| x == member)
            .ok_or_else(|| Error::NotInCover(member.to_string()))?;
        Ok(self.utility[a][m])
    }

    pub(crate) fn utility_table(&self) -> &[Vec<f64>] {
        &self.utility
    }

    pub(crate) fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn observed_ids(&self) -> Vec<String> {
        self.observed
            .iter()
            .map(|&f| self.net().feature_id(f).to_string())
            .collect()
    }

    /// Canonical JSON description of the model: cover, priors, per-feature
    /// structure and the abstracted utility table.
    pub fn to_json(&self) -> String {
        let net = self.net();
        let pid = self.pid();
        let quote = |xs: &[String]| -> String {
            xs.iter().map(|x| format!("\"{x}\"")).collect::<Vec<_>>().join(", ")
        };
        let mut out = String::from("{\n");
        out.push_str(&format!("  \"cover\": [{}],\n", quote(self.member_ids())));
        let priors: Vec<String> = self
            .member_ids()
            .iter()
            .zip(pid.priors())
            .map(|(m, p)| format!("\"{}\": {}", m, significant(*p, 12)))
            .collect();
        out.push_str(&format!("  \"priors\": {{ {} }},\n", priors.join(", ")));
        out.push_str(&format!("  \"observed\": [{}],\n", quote(&self.observed_ids())));
        out.push_str("  \"features\": [\n");
        for (i, mf) in pid.features.iter().enumerate() {
            let parents: Vec<String> = mf
                .parents
                .iter()
                .map(|&p| format!("\"{}\"", net.feature_id(p)))
                .collect();
            let entries = mf.slices.len() * mf.slices[0].len();
            out.push_str(&format!(
                "    {{ \"id\": \"{}\", \"parents\": [{}], \"entries\": {} }}{}\n",
                net.feature_id(mf.feature),
                parents.join(", "),
                entries,
                if i + 1 < pid.features.len() { "," } else { "" }
            ));
        }
        out.push_str("  ],\n");
        out.push_str(&format!("  \"cpt_entries\": {},\n", pid.cpt_entry_count()));
        out.push_str(&format!("  \"actions\": [{}],\n", quote(self.action_ids())));
        out.push_str("  \"utility\": {\n");
        for (ai, a) in self.actions.iter().enumerate() {
            let row: Vec<String> = self
                .member_ids()
                .iter()
                .zip(&self.utility[ai])
                .map(|(m, u)| format!("\"{}\": {}", m, significant(*u, 12)))
                .collect();
            out.push_str(&format!(
                "    \"{}\": {{ {} }}{}\n",
                a,
                row.join(", "),
                if ai + 1 < self.actions.len() { "," } else { "" }
            ));
        }
        out.push_str("  }\n}");
        out
    }
}
