//! Core data model: the concept hierarchy, feature declarations and the
//! per-concept probabilistic diagrams.
//!
//! A net is immutable once loaded. Priors are asserted on leaves only;
//! every internal concept carries the sum of its descendant leaves, and the
//! probability that a subconcept holds given one of its ancestors is the
//! ratio of their priors.

use std::collections::HashMap;

use crate::builder::PreferenceModel;
use crate::error::{Error, Result};

/// A discrete feature: an identifier, an ordered state domain and a rank
/// inside the single global feature ordering. Conditioning arcs always point
/// from lower to higher rank, which keeps every diagram union acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDecl {
    pub id: String,
    pub domain: Vec<String>,
    pub rank: usize,
}

impl FeatureDecl {
    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.domain.iter().position(|s| s == label)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConceptNode {
    pub(crate) id: String,
    pub(crate) parent: Option<usize>,
    pub(crate) children: Vec<usize>,
    pub(crate) asserted_prior: Option<f64>,
    pub(crate) prior: f64,
    pub(crate) depth: usize,
    pub(crate) preorder: usize,
}

/// Conditional probability table for one feature of one diagram.
///
/// Rows are stored densely: parent configurations enumerate in mixed-radix
/// order with the first (lowest-ranked) parent most significant, and each
/// configuration holds one probability per feature state.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub(crate) parents: Vec<usize>,
    pub(crate) parent_dims: Vec<usize>,
    pub(crate) states: usize,
    pub(crate) table: Vec<f64>,
}

impl Cpt {
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn config_count(&self) -> usize {
        self.table.len() / self.states
    }

    pub fn entry_count(&self) -> usize {
        self.table.len()
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.table[config * self.states..(config + 1) * self.states]
    }

    /// Mixed-radix index of the parent configuration selected by `state_of`.
    pub(crate) fn config_index(&self, state_of: impl Fn(usize) -> usize) -> usize {
        let mut idx = 0;
        for (p, d) in self.parents.iter().zip(&self.parent_dims) {
            idx = idx * d + state_of(*p);
        }
        idx
    }

    pub(crate) fn probability(&self, state_of: impl Fn(usize) -> usize, state: usize) -> f64 {
        self.table[self.config_index(state_of) * self.states + state]
    }
}

/// Local influence diagram of one concept: a deterministic concept node plus
/// one chance node per feature, each carrying p(feature | concept, parents).
#[derive(Debug, Clone, PartialEq)]
pub struct PcDiagram {
    pub(crate) concept: usize,
    pub(crate) features: Vec<usize>,
    pub(crate) cpts: Vec<Cpt>,
}

impl PcDiagram {
    pub fn concept_index(&self) -> usize {
        self.concept
    }

    /// Feature positions covered by this diagram, ascending by rank.
    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn cpt(&self, feature: usize) -> Option<&Cpt> {
        let at = self.features.binary_search(&feature).ok()?;
        Some(&self.cpts[at])
    }

    /// CPT by position in [`features`](Self::features).
    pub fn cpt_at(&self, at: usize) -> &Cpt {
        &self.cpts[at]
    }

    pub fn parents_of(&self, feature: usize) -> Option<&[usize]> {
        self.cpt(feature).map(|c| c.parents())
    }

    /// Total number of stored probabilities.
    pub fn entry_count(&self) -> usize {
        self.cpts.iter().map(Cpt::entry_count).sum()
    }
}

///// A probabilistic conceptual network: one concept tree, a global feature
/// ordering, a diagram per leaf (plus derived diagrams after propagation)
/// and an optional preference model.
#[derive(Debug, Clone)]
pub struct PcNet {
    pub(crate) features: Vec<FeatureDecl>,
    pub(crate) concepts: Vec<ConceptNode>,
    pub(crate) root: usize,
    pub(crate) feature_by_id: HashMap<String, usize>,
    pub(crate) concept_by_id: HashMap<String, usize>,
    pub(crate) diagrams: Vec<Option<PcDiagram>>,
    pub(crate) preference: Option<PreferenceModel>,
}

impl PcNet {
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    /// Feature declarations in rank order.
    pub fn features(&self) -> &[FeatureDecl] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureDecl {
        &self.features[index]
    }

    pub fn feature_id(&self, index: usize) -> &str {
        &self.features[index].id
    }

    pub fn feature_index(&self, id: &str) -> Result<usize> {
        self.feature_by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownFeature(id.to_string()))
    }

    /// Concept identifiers in lexicographic order.
    pub fn concept_ids(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(|c| c.id.as_str())
    }

    pub fn concept_id(&self, index: usize) -> &str {
        &self.concepts[index].id
    }

    pub fn concept_index(&self, id: &str) -> Result<usize> {
        self.concept_by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }

    pub fn root_id(&self) -> &str {
        &self.concepts[self.root].id
    }

    pub fn parent_of(&self, id: &str) -> Result<Option<&str>> {
        let c = self.concept_index(id)?;
        Ok(self.concepts[c].parent.map(|p| self.concepts[p].id.as_str()))
    }

    pub fn is_leaf(&self, id: &str) -> Result<bool> {
        let c = self.concept_index(id)?;
        Ok(self.concepts[c].children.is_empty())
    }

    /// Leaf identifiers in lexicographic order.
    pub fn leaf_ids(&self) -> Vec<&str> {
        self.concepts
            .iter()
            .filter(|c| c.children.is_empty())
            .map(|c| c.id.as_str())
            .collect()
    }

    /// True iff `sub` is a proper subconcept of `sup`. A concept never
    /// subsumes itself.
    pub fn subsumes(&self, sub: &str, sup: &str) -> Result<bool> {
        let sub = self.concept_index(sub)?;
        let sup = self.concept_index(sup)?;
        Ok(self.is_proper_descendant(sub, sup))
    }

    pub(crate) fn is_proper_descendant(&self, sub: usize, sup: usize) -> bool {
        let mut cur = self.concepts[sub].parent;
        while let Some(c) = cur {
            if c == sup {
                return true;
            }
            cur = self.concepts[c].parent;
        }
        false
    }

    /// Immediate children: the most general proper subconcepts, in
    /// lexicographic order.
    pub fn most_general_subsumees(&self, id: &str) -> Result<Vec<&str>> {
        let c = self.concept_index(id)?;
        Ok(self.concepts[c]
            .children
            .iter()
            .map(|&ch| self.concepts[ch].id.as_str())
            .collect())
    }

    /// Most specific concept subsuming (or equal to) every listed concept.
    pub fn most_specific_subsumer(&self, ids: &[&str]) -> Result<&str> {
        let mut it = ids.iter();
        let first = it.next().ok_or(Error::EmptyConceptSet)?;
        let mut acc = self.concept_index(first)?;
        for id in it {
            let c = self.concept_index(id)?;
            acc = self.lca(acc, c);
        }
        Ok(&self.concepts[acc].id)
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.concepts[a].depth > self.concepts[b].depth {
            a = self.concepts[a].parent.expect("depth implies parent");
        }
        while self.concepts[b].depth > self.concepts[a].depth {
            b = self.concepts[b].parent.expect("depth implies parent");
        }
        while a != b {
            a = self.concepts[a].parent.expect("distinct roots");
            b = self.concepts[b].parent.expect("distinct roots");
        }
        a
    }

    /// Probability that `sub` holds given that its proper ancestor `sup`
    /// holds: the ratio of their priors.
    pub fn subsumption_probability(&self, sub: &str, sup: &str) -> Result<f64> {
        let si = self.concept_index(sub)?;
        let pi = self.concept_index(sup)?;
        if !self.is_proper_descendant(si, pi) {
            return Err(Error::NotASubconcept {
                child: sub.to_string(),
                ancestor: sup.to_string(),
            });
        }
        if self.concepts[pi].prior <= 0.0 {
            return Err(Error::ZeroPriorAncestor(sup.to_string()));
        }
        Ok(self.concepts[si].prior / self.concepts[pi].prior)
    }

    /// Prior mass of a concept: asserted on leaves, the sum of its leaves
    /// otherwise.
    pub fn prior(&self, id: &str) -> Result<f64> {
        let c = self.concept_index(id)?;
        Ok(self.concepts[c].prior)
    }

    pub fn has_diagram(&self, id: &str) -> Result<bool> {
        let c = self.concept_index(id)?;
        Ok(self.diagrams[c].is_some())
    }

    pub fn diagram(&self, id: &str) -> Result<&PcDiagram> {
        let c = self.concept_index(id)?;
        self.diagrams[c]
            .as_ref()
            .ok_or_else(|| Error::DiagramMissing(id.to_string()))
    }

    /// Diagrams attached to leaf concepts, in lexicographic concept order.
    pub fn leaf_diagrams(&self) -> impl Iterator<Item = (&str, &PcDiagram)> {
        self.concepts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.children.is_empty())
            .filter_map(move |(i, c)| self.diagrams[i].as_ref().map(|d| (c.id.as_str(), d)))
    }

    /// Diagrams attached to internal concepts (loaded or propagated).
    pub fn derived_diagrams(&self) -> impl Iterator<Item = (&str, &PcDiagram)> {
        self.concepts
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.children.is_empty())
            .filter_map(move |(i, c)| self.diagrams[i].as_ref().map(|d| (c.id.as_str(), d)))
    }

    pub fn preference(&self) -> Option<&PreferenceModel> {
        self.preference.as_ref()
    }

    // ---- crate-internal index-based accessors ----

    pub(crate) fn node(&self, idx: usize) -> &ConceptNode {
        &self.concepts[idx]
    }

    pub(crate) fn children_idx(&self, idx: usize) -> &[usize] {
        &self.concepts[idx].children
    }

    pub(crate) fn prior_idx(&self, idx: usize) -> f64 {
        self.concepts[idx].prior
    }

    pub(crate) fn preorder_idx(&self, idx: usize) -> usize {
        self.concepts[idx].preorder
    }

    pub(crate) fn diagram_idx(&self, idx: usize) -> Option<&PcDiagram> {
        self.diagrams[idx].as_ref()
    }

    pub(crate) fn leaf_indices(&self) -> Vec<usize> {
        (0..self.concepts.len())
            .filter(|&i| self.concepts[i].children.is_empty())
            .collect()
    }

    /// Indices of the leaves underneath `idx` (or `idx` itself for a leaf),
    /// in preorder.
    pub(crate) fn descendant_leaves(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![idx];
        while let Some(c) = stack.pop() {
            if self.concepts[c].children.is_empty() {
                out.push(c);
            } else {
                for &ch in self.concepts[c].children.iter().rev() {
                    stack.push(ch);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PcNet;

    const TINY: &str = include_str!("../../../fixtures/tiny.pcnet.json");
    const MACHINING: &str = include_str!("../../../fixtures/machining.pcnet.json");

    fn tiny() -> PcNet {
        PcNet::from_json(TINY).unwrap()
    }

    #[test]
    fn tiny_shape() {
        let net = tiny();
        assert_eq!(net.concept_count(), 5);
        assert_eq!(net.feature_count(), 1);
        assert_eq!(net.root_id(), "R");
        assert_eq!(net.leaf_ids(), vec!["A", "B1", "B2"]);
        assert_eq!(net.leaf_diagrams().count(), 3);
        assert_eq!(net.derived_diagrams().count(), 0);
    }

    #[test]
    fn derived_priors() {
        let net = tiny();
        assert!((net.prior("B").unwrap() - 0.4).abs() < 1e-12);
        assert!((net.prior("R").unwrap() - 1.0).abs() < 1e-12);
        assert!((net.prior("A").unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn subsumption_is_proper() {
        let net = tiny();
        assert!(net.subsumes("B1", "B").unwrap());
        assert!(net.subsumes("B1", "R").unwrap());
        assert!(!net.subsumes("B", "B").unwrap());
        assert!(!net.subsumes("B", "B1").unwrap());
        assert!(!net.subsumes("A", "B").unwrap());
        assert!(matches!(
            net.subsumes("Q", "B"),
            Err(Error::UnknownConcept(_))
        ));
    }

    #[test]
    fn link_probabilities_are_prior_ratios() {
        let net = tiny();
        assert!((net.subsumption_probability("B1", "B").unwrap() - 0.75).abs() < 1e-12);
        assert!((net.subsumption_probability("B2", "B").unwrap() - 0.25).abs() < 1e-12);
        assert!((net.subsumption_probability("A", "R").unwrap() - 0.6).abs() < 1e-12);
        assert!((net.subsumption_probability("B", "R").unwrap() - 0.4).abs() < 1e-12);
        assert!((net.subsumption_probability("B1", "R").unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn subsumption_probability_rejects_non_subconcepts() {
        let net = tiny();
        assert!(matches!(
            net.subsumption_probability("A", "B"),
            Err(Error::NotASubconcept { .. })
        ));
        assert!(matches!(
            net.subsumption_probability("B", "B"),
            Err(Error::NotASubconcept { .. })
        ));
    }

    #[test]
    fn zero_prior_ancestor_rejected() {
        let text = TINY.replace("\"prior\": 0.3", "\"prior\": 0.0").replace(
            "\"prior\": 0.1",
            "\"prior\": 0.0",
        );
        let net = PcNet::from_json(&text).unwrap();
        assert_eq!(net.prior("B").unwrap(), 0.0);
        assert!(matches!(
            net.subsumption_probability("B1", "B"),
            Err(Error::ZeroPriorAncestor(_))
        ));
    }

    #[test]
    fn most_specific_subsumer_folds_to_lca() {
        let net = tiny();
        assert_eq!(net.most_specific_subsumer(&["B1", "B2"]).unwrap(), "B");
        assert_eq!(net.most_specific_subsumer(&["A", "B1"]).unwrap(), "R");
        assert_eq!(net.most_specific_subsumer(&["B1"]).unwrap(), "B1");
        assert_eq!(net.most_specific_subsumer(&["B", "B1"]).unwrap(), "B");
        assert!(matches!(
            net.most_specific_subsumer(&[]),
            Err(Error::EmptyConceptSet)
        ));
    }

    #[test]
    fn children_are_sorted() {
        let net = tiny();
        assert_eq!(net.most_general_subsumees("B").unwrap(), vec!["B1", "B2"]);
        assert_eq!(net.most_general_subsumees("R").unwrap(), vec!["A", "B"]);
        assert!(net.most_general_subsumees("A").unwrap().is_empty());
    }

    #[test]
    fn machining_hierarchy() {
        let net = PcNet::from_json(MACHINING).unwrap();
        assert_eq!(net.concept_count(), 9);
        assert_eq!(net.feature_count(), 15);
        assert_eq!(net.leaf_diagrams().count(), 6);
        assert!(net.subsumes("tool-chatter", "tool-failure").unwrap());
        assert!(net
            .subsumes("tool-chatter", "out-of-variability-limits")
            .unwrap());
        assert_eq!(
            net.most_specific_subsumer(&["tool-wear", "sensor-failure"])
                .unwrap(),
            "out-of-variability-limits"
        );
        assert_eq!(
            net.most_general_subsumees("tool-failure").unwrap(),
            vec!["tool-breakage", "tool-chatter", "tool-wear"]
        );
        assert!((net.prior("out-of-variability-limits").unwrap() - 0.1).abs() < 1e-12);
        assert!((net.prior("machine-state").unwrap() - 1.0).abs() < 1e-12);
        assert!(
            (net.subsumption_probability("tool-wear", "tool-failure")
                .unwrap()
                - 0.625)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn nets_are_shareable_across_threads() {
        fn assert_sync<T: Send + Sync>() {}
        assert_sync::<PcNet>();
    }
}
