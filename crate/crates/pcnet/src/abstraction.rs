//! Abstraction machinery: derived diagrams for internal concepts and
//! conceptual covers over the taxonomy.
//!
//! A derived diagram mixes the children's CPTs weighted by the
//! child-given-parent link probabilities. Parent sets merge by union and
//! each child's CPT extends constantly over parents it does not mention.
//! Propagation applies this bottom-up so every internal concept ends up
//! with a diagram.

use crate::error::{Error, Result};
use crate::model::{Cpt, PcDiagram, PcNet};
use crate::COVER_SPACE_LIMIT;

/// Builds the mixture diagram for one internal concept from its children's
/// diagrams, deriving those recursively where they are not stored. Children
/// must end up with diagrams over the same feature set.
pub fn derived_diagram(net: &PcNet, concept: &str) -> Result<PcDiagram> {
    derive_idx(net, net.concept_index(concept)?)
}

pub(crate) fn derive_idx(net: &PcNet, idx: usize) -> Result<PcDiagram> {
    let children = net.children_idx(idx);
    if children.is_empty() {
        return Err(Error::NotInternal(net.concept_id(idx).to_string()));
    }
    let mut child_diagrams: Vec<PcDiagram> = Vec::with_capacity(children.len());
    for &ch in children {
        match net.diagram_idx(ch) {
            Some(d) => child_diagrams.push(d.clone()),
            None if !net.children_idx(ch).is_empty() => {
                child_diagrams.push(derive_idx(net, ch)?)
            }
            None => {
                return Err(Error::ChildDiagramMissing {
                    parent: net.concept_id(idx).to_string(),
                    child: net.concept_id(ch).to_string(),
                })
            }
        }
    }
    let features = child_diagrams[0].features().to_vec();
    for (&ch, d) in children.iter().zip(&child_diagrams).skip(1) {
        if d.features() != features.as_slice() {
            return Err(Error::FeatureSetMismatch(format!(
                "children of {} disagree on the feature set ({} differs)",
                net.concept_id(idx),
                net.concept_id(ch)
            )));
        }
    }

    let parent_prior = net.prior_idx(idx);
    let weights: Vec<f64> = if parent_prior > 0.0 {
        children.iter().map(|&ch| net.prior_idx(ch) / parent_prior).collect()
    } else {
        vec![1.0 / children.len() as f64; children.len()]
    };

    let mut cpts = Vec::with_capacity(features.len());
    for (fpos, &fi) in features.iter().enumerate() {
        let mut parents: Vec<usize> = Vec::new();
        for d in &child_diagrams {
            for &p in d.cpts[fpos].parents() {
                if let Err(at) = parents.binary_search(&p) {
                    parents.insert(at, p);
                }
            }
        }
        let parent_dims: Vec<usize> =
            parents.iter().map(|&p| net.features[p].domain.len()).collect();
        let states = net.features[fi].domain.len();
        let configs: usize = parent_dims.iter().product();

        let mut table = vec![0.0; configs * states];
        let mut assignment = vec![0usize; parents.len()];
        for cfg in 0..configs {
            let mut rest = cfg;
            for k in (0..parents.len()).rev() {
                assignment[k] = rest % parent_dims[k];
                rest /= parent_dims[k];
            }
            for s in 0..states {
                let mut acc = 0.0;
                for (d, &w) in child_diagrams.iter().zip(&weights) {
                    let p = d.cpts[fpos].probability(
                        |f| assignment[parents.binary_search(&f).expect("merged parent")],
                        s,
                    );
                    acc += w * p;
                }
                table[cfg * states + s] = acc;
            }
        }
        cpts.push(Cpt {
            parents,
            parent_dims,
            states,
            table,
        });
    }
    Ok(PcDiagram {
        concept: idx,
        features,
        cpts,
    })
}

impl PcNet {
    /// Returns a copy of the net in which every internal concept carries a
    /// freshly derived diagram. Validation errors abort the propagation.
    pub fn propagate(&self) -> Result<PcNet> {
        let report = self.validate();
        if report.has_errors() {
            return Err(Error::Invalid(report.to_string().trim_end().to_string()));
        }
        let mut work = self.clone();
        let mut internals: Vec<usize> = (0..work.concepts.len())
            .filter(|&i| !work.concepts[i].children.is_empty())
            .collect();
        internals.sort_by_key(|&i| std::cmp::Reverse(work.concepts[i].depth));
        for idx in internals {
            let d = derive_idx(&work, idx)?;
            work.diagrams[idx] = Some(d);
        }
        Ok(work)
    }

    /// Number of distinct conceptual covers of the taxonomy.
    pub fn cover_count(&self) -> u128 {
        fn count(net: &PcNet, idx: usize) -> u128 {
            let children = net.children_idx(idx);
            if children.is_empty() {
                return 1;
            }
            let mut product: u128 = 1;
            for &ch in children {
                product = product.saturating_mul(count(net, ch));
            }
            product.saturating_add(1)
        }
        count(self, self.root)
    }

    /// Checks whether the given concepts form a cover: every leaf must have
    /// exactly one of them on its root path (itself included). Duplicated
    /// ids collapse; unknown ids are errors.
    pub fn is_cover(&self, ids: &[&str]) -> Result<bool> {
        let mut members = Vec::with_capacity(ids.len());
        for id in ids {
            let idx = self.concept_index(id)?;
            if !members.contains(&idx) {
                members.push(idx);
            }
        }
        Ok(self.cover_defect(&members).is_none())
    }

    /// Returns a leaf covered not exactly once, if any.
    pub(crate) fn cover_defect(&self, members: &[usize]) -> Option<usize> {
        let mut hits = vec![0u32; self.concepts.len()];
        for &m in members {
            if self.concepts[m].children.is_empty() {
                hits[m] += 1;
            } else {
                for leaf in self.descendant_leaves(m) {
                    hits[leaf] += 1;
                }
            }
        }
        self.leaf_indices().into_iter().find(|&l| hits[l] != 1)
    }

    /// Enumerates every conceptual cover, most abstract first within each
    /// subtree, sorted by the members' depth-first positions.
    pub fn enumerate_covers(&self) -> Result<Vec<ConceptualCover>> {
        let count = self.cover_count();
        if count > COVER_SPACE_LIMIT as u128 {
            return Err(Error::CoverSpaceTooLarge {
                count,
                limit: COVER_SPACE_LIMIT,
            });
        }
        fn covers(net: &PcNet, idx: usize) -> Vec<Vec<usize>> {
            let children = net.children_idx(idx);
            let mut out = vec![vec![idx]];
            if children.is_empty() {
                return out;
            }
            let mut partial: Vec<Vec<usize>> = vec![Vec::new()];
            for &ch in children {
                let sub = covers(net, ch);
                let mut next = Vec::with_capacity(partial.len() * sub.len());
                for left in &partial {
                    for right in &sub {
                        let mut row = left.clone();
                        row.extend_from_slice(right);
                        next.push(row);
                    }
                }
                partial = next;
            }
            out.extend(partial);
            out
        }
        let mut rows = covers(self, self.root);
        for row in &mut rows {
            row.sort_by_key(|&m| self.preorder_idx(m));
        }
        rows.sort_by(|a, b| {
            a.iter()
                .map(|&m| self.preorder_idx(m))
                .cmp(b.iter().map(|&m| self.preorder_idx(m)))
        });
        Ok(rows
            .into_iter()
            .map(|row| ConceptualCover {
                members: row.into_iter().map(|m| self.concept_id(m).to_string()).collect(),
            })
            .collect())
    }

    /// The one-member cover at the root.
    pub fn root_cover(&self) -> ConceptualCover {
        ConceptualCover {
            members: vec![self.concept_id(self.root).to_string()],
        }
    }

    /// The finest cover, listing every leaf.
    pub fn leaf_cover(&self) -> ConceptualCover {
        let mut leaves = self.leaf_indices();
        leaves.sort_by_key(|&l| self.preorder_idx(l));
        ConceptualCover {
            members: leaves.into_iter().map(|l| self.concept_id(l).to_string()).collect(),
        }
    }
}

/// A set of concepts that partitions the leaves: each leaf has exactly one
/// cover member on its path to the root. Members are kept in depth-first
/// order of the taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConceptualCover {
    members: Vec<String>,
}

impl ConceptualCover {
    /// Builds and checks a cover from concept ids.
    pub fn from_ids(net: &PcNet, ids: &[&str]) -> Result<ConceptualCover> {
        let mut members = Vec::with_capacity(ids.len());
        for id in ids {
            let idx = net.concept_index(id)?;
            if members.contains(&idx) {
                return Err(Error::CoverInvalid(format!("concept {id} listed twice")));
            }
            members.push(idx);
        }
        if let Some(leaf) = net.cover_defect(&members) {
            return Err(Error::CoverInvalid(format!(
                "leaf {} is not covered exactly once",
                net.concept_id(leaf)
            )));
        }
        members.sort_by_key(|&m| net.preorder_idx(m));
        Ok(ConceptualCover {
            members: members.into_iter().map(|m| net.concept_id(m).to_string()).collect(),
        })
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    /// Stable one-line form, used for traces and keys.
    pub fn key(&self) -> String {
        self.members.join(",")
    }

    /// Replaces an internal member by its children.
    pub fn specialize(&self, net: &PcNet, id: &str) -> Result<ConceptualCover> {
        let idx = net.concept_index(id)?;
        if !self.members.iter().any(|m| m == id) {
            return Err(Error::NotInCover(id.to_string()));
        }
        if net.children_idx(idx).is_empty() {
            return Err(Error::LeafNotSpecializable(id.to_string()));
        }
        let mut members: Vec<usize> = Vec::with_capacity(self.members.len() + 1);
        for m in &self.members {
            let mi = net.concept_index(m)?;
            if mi == idx {
                members.extend_from_slice(net.children_idx(idx));
            } else {
                members.push(mi);
            }
        }
        members.sort_by_key(|&m| net.preorder_idx(m));
        Ok(ConceptualCover {
            members: members.into_iter().map(|m| net.concept_id(m).to_string()).collect(),
        })
    }

    /// Replaces a complete set of sibling members by their parent.
    pub fn generalize(&self, net: &PcNet, ids: &[&str]) -> Result<ConceptualCover> {
        if ids.is_empty() {
            return Err(Error::EmptyConceptSet);
        }
        let mut group = Vec::with_capacity(ids.len());
        for id in ids {
            let idx = net.concept_index(id)?;
            if !self.members.iter().any(|m| m == id) {
                return Err(Error::NotInCover(id.to_string()));
            }
            if group.contains(&idx) {
                return Err(Error::NotSiblingComplete(format!("{id} listed twice")));
            }
            group.push(idx);
        }
        let parent = match net.node(group[0]).parent {
            Some(p) => p,
            None => return Err(Error::NotSiblingComplete("the root has no siblings".to_string())),
        };
        let mut wanted: Vec<usize> = net.children_idx(parent).to_vec();
        wanted.sort_unstable();
        let mut got = group.clone();
        got.sort_unstable();
        if got != wanted {
            return Err(Error::NotSiblingComplete(format!(
                "the group does not list every child of {}",
                net.concept_id(parent)
            )));
        }
        let mut members: Vec<usize> = Vec::new();
        let mut inserted = false;
        for m in &self.members {
            let mi = net.concept_index(m)?;
            if group.contains(&mi) {
                if !inserted {
                    members.push(parent);
                    inserted = true;
                }
            } else {
                members.push(mi);
            }
        }
        members.sort_by_key(|&m| net.preorder_idx(m));
        Ok(ConceptualCover {
            members: members.into_iter().map(|m| net.concept_id(m).to_string()).collect(),
        })
    }
}
