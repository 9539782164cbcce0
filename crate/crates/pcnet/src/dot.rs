//! GraphViz rendering of taxonomies, local diagrams and decision models.
//! Output is fully deterministic: nodes in depth-first taxonomy order,
//! features ascending by rank, link probabilities at four decimals.

use crate::builder::CategorizationDecisionModel;
use crate::error::{Error, Result};
use crate::model::PcNet;

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// The concept taxonomy with link probabilities on the edges.
pub fn net_to_dot(net: &PcNet) -> String {
    let mut order: Vec<usize> = (0..net.concept_count()).collect();
    order.sort_by_key(|&c| net.preorder_idx(c));
    let mut out = String::from("digraph taxonomy {\n  rankdir=TB;\n  node [shape=ellipse];\n");
    for &c in &order {
        out.push_str(&format!("  {};\n", quoted(net.concept_id(c))));
    }
    for &c in &order {
        let prior = net.prior_idx(c);
        for &ch in net.children_idx(c) {
            let weight = if prior > 0.0 {
                net.prior_idx(ch) / prior
            } else {
                0.0
            };
            out.push_str(&format!(
                "  {} -> {} [label=\"{weight:.4}\"];\n",
                quoted(net.concept_id(c)),
                quoted(net.concept_id(ch))
            ));
        }
    }
    out.push_str("}\n");
    out
}

/// The stored local diagrams of the given concepts, one cluster each.
pub fn diagrams_to_dot(net: &PcNet, ids: &[&str]) -> Result<String> {
    if ids.is_empty() {
        return Err(Error::EmptyConceptSet);
    }
    let mut out = String::from("digraph diagrams {\n  node [shape=ellipse];\n");
    for id in ids {
        let diagram = net.diagram(id)?;
        let scoped = |name: &str| quoted(&format!("{id}/{name}"));
        out.push_str(&format!("  subgraph {} {{\n", quoted(&format!("cluster_{id}"))));
        out.push_str(&format!("    label={};\n", quoted(id)));
        out.push_str(&format!(
            "    {} [peripheries=2, label={}];\n",
            scoped("concept"),
            quoted(id)
        ));
        for &fi in diagram.features() {
            let fid = net.feature_id(fi);
            out.push_str(&format!("    {} [label={}];\n", scoped(fid), quoted(fid)));
        }
        for &fi in diagram.features() {
            out.push_str(&format!(
                "    {} -> {} [style=dashed];\n",
                scoped("concept"),
                scoped(net.feature_id(fi))
            ));
        }
        for (fpos, &fi) in diagram.features().iter().enumerate() {
            for &p in diagram.cpt_at(fpos).parents() {
                out.push_str(&format!(
                    "    {} -> {};\n",
                    scoped(net.feature_id(p)),
                    scoped(net.feature_id(fi))
                ));
            }
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    Ok(out)
}

/// A categorization decision model: the cover variable, the feature
/// network, the decision box and the value diamond. Observed features
/// point at the decision with dashed informational arcs.
pub fn model_to_dot(model: &CategorizationDecisionModel<'_>) -> String {
    let net = model.net();
    let members = model.member_ids().join(", ");
    let mut out = String::from("digraph model {\n");
    out.push_str(&format!(
        "  \"concept\" [shape=ellipse, peripheries=2, label=\"{{{members}}}\"];\n"
    ));
    out.push_str("  \"action\" [shape=box];\n  \"value\" [shape=diamond];\n");
    for mf in &model.pid().features {
        let fid = net.feature_id(mf.feature);
        out.push_str(&format!("  {} [shape=ellipse];\n", quoted(fid)));
    }
    for mf in &model.pid().features {
        out.push_str(&format!(
            "  \"concept\" -> {};\n",
            quoted(net.feature_id(mf.feature))
        ));
    }
    for mf in &model.pid().features {
        for &p in &mf.parents {
            out.push_str(&format!(
                "  {} -> {};\n",
                quoted(net.feature_id(p)),
                quoted(net.feature_id(mf.feature))
            ));
        }
    }
    for &f in model.observed() {
        out.push_str(&format!(
            "  {} -> \"action\" [style=dashed];\n",
            quoted(net.feature_id(f))
        ));
    }
    out.push_str("  \"concept\" -> \"value\";\n  \"action\" -> \"value\";\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::ConceptualCover;

    const TINY: &str = include_str!("../../../fixtures/tiny.pcnet.json");
    const MACHINING: &str = include_str!("../../../fixtures/machining.pcnet.json");

    #[test]
    fn taxonomy_rendering_is_frozen() {
        let net = PcNet::from_json(TINY).unwrap();
        assert_eq!(
            net_to_dot(&net),
            "digraph taxonomy {\n  rankdir=TB;\n  node [shape=ellipse];\n  \"R\";\n  \"A\";\n  \"B\";\n  \"B1\";\n  \"B2\";\n  \"R\" -> \"A\" [label=\"0.6000\"];\n  \"R\" -> \"B\" [label=\"0.4000\"];\n  \"B\" -> \"B1\" [label=\"0.7500\"];\n  \"B\" -> \"B2\" [label=\"0.2500\"];\n}\n"
        );
    }

    #[test]
    fn diagram_clusters_carry_cpt_arcs() {
        let net = PcNet::from_json(MACHINING).unwrap();
        let dot = diagrams_to_dot(&net, &["tool-chatter"]).unwrap();
        assert!(dot.contains("subgraph \"cluster_tool-chatter\""));
        assert!(dot.contains("\"tool-chatter/concept\" [peripheries=2"));
        assert!(dot.contains("\"tool-chatter/AE-mag\" -> \"tool-chatter/AE-peak\";"));
        assert!(dot.contains("\"tool-chatter/concept\" -> \"tool-chatter/AE-mag\" [style=dashed];"));
    }

    #[test]
    fn diagram_rendering_errors_are_specific() {
        let net = PcNet::from_json(TINY).unwrap();
        assert!(matches!(
            diagrams_to_dot(&net, &[]),
            Err(Error::EmptyConceptSet)
        ));
        assert!(matches!(
            diagrams_to_dot(&net, &["Z"]),
            Err(Error::UnknownConcept(_))
        ));
        assert!(matches!(
            diagrams_to_dot(&net, &["B"]),
            Err(Error::DiagramMissing(_))
        ));
        assert!(diagrams_to_dot(&net.propagate().unwrap(), &["B"]).is_ok());
    }

    #[test]
    fn model_rendering_marks_observed_features() {
        let net = PcNet::from_json(MACHINING).unwrap();
        let cover = ConceptualCover::from_ids(
            &net,
            &["within-variability-limits", "out-of-variability-limits"],
        )
        .unwrap();
        let model = CategorizationDecisionModel::build(&net, &cover).unwrap();
        let dot = model_to_dot(&model);
        assert!(dot.contains("label=\"{out-of-variability-limits, within-variability-limits}\""));
        assert!(dot.contains("\"current\" -> \"action\" [style=dashed];"));
        assert!(!dot.contains("\"AE-freq\" -> \"action\""));
        assert!(dot.contains("\"AE-mag\" -> \"AE-peak\";"));
        assert!(dot.contains("\"concept\" -> \"value\";"));
    }
}
