//! JSON file format.
//!
//! A net file carries four top-level keys: `features`, `concepts`,
//! `diagrams` and an optional `preference`. Serialization is canonical so
//! that identical nets produce identical bytes: features sort by rank,
//! concepts and diagrams by identifier, CPT rows by parent configuration.
//!
//! Syntactically broken input reports a parse error with line and column;
//! structurally broken input (dangling references, duplicate ids, missing
//! or repeated CPT rows) reports a schema error. Numeric range and
//! normalization problems are left to validation so that they can all be
//! reported together.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::builder::PreferenceModel;
use crate::error::{Error, Result};
use crate::model::{ConceptNode, Cpt, FeatureDecl, PcDiagram, PcNet};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNet {
    features: Vec<FileFeature>,
    concepts: Vec<FileConcept>,
    #[serde(default)]
    diagrams: Vec<FileDiagram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preference: Option<FilePreference>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFeature {
    id: String,
    domain: Vec<String>,
    rank: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConcept {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDiagram {
    concept: String,
    features: Vec<String>,
    #[serde(default)]
    parents: BTreeMap<String, Vec<String>>,
    cpt: BTreeMap<String, Vec<FileCptRow>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCptRow {
    given: BTreeMap<String, String>,
    p: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePreference {
    actions: Vec<String>,
    utility: BTreeMap<String, BTreeMap<String, f64>>,
    observed: Vec<String>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

impl PcNet {
    /// Parses a net from JSON text.
    pub fn from_json(text: &str) -> Result<PcNet> {
        let file: FileNet = serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => Error::Schema(e.to_string()),
            _ => Error::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
        })?;
        resolve(file)
    }

    /// Canonical JSON serialization, including any derived diagrams.
    pub fn to_json(&self) -> String {
        let file = lower(self);
        let mut text = serde_json::to_string_pretty(&file).expect("net serialization");
        text.push('\n');
        text
    }
}

fn resolve(file: FileNet) -> Result<PcNet> {
    // Features, ordered by rank.
    let mut feature_order: Vec<usize> = (0..file.features.len()).collect();
    feature_order.sort_by(|&a, &b| {
        let fa = &file.features[a];
        let fb = &file.features[b];
        fa.rank.cmp(&fb.rank).then_with(|| fa.id.cmp(&fb.id))
    });
    let features: Vec<FeatureDecl> = feature_order
        .into_iter()
        .map(|i| {
            let f = &file.features[i];
            FeatureDecl {
                id: f.id.clone(),
                domain: f.domain.clone(),
                rank: f.rank,
            }
        })
        .collect();
    let mut feature_by_id = HashMap::new();
    for (i, f) in features.iter().enumerate() {
        if feature_by_id.insert(f.id.clone(), i).is_some() {
            return Err(schema(format!("duplicate feature id {}", f.id)));
        }
    }

    // Concepts, ordered by id.
    let mut file_concepts = file.concepts;
    file_concepts.sort_by(|a, b| a.id.cmp(&b.id));
    let mut concept_by_id = HashMap::new();
    for (i, c) in file_concepts.iter().enumerate() {
        if concept_by_id.insert(c.id.clone(), i).is_some() {
            return Err(schema(format!("duplicate concept id {}", c.id)));
        }
    }
    let mut concepts: Vec<ConceptNode> = Vec::with_capacity(file_concepts.len());
    for c in &file_concepts {
        let parent = match &c.parent {
            None => None,
            Some(p) => Some(
                *concept_by_id
                    .get(p)
                    .ok_or_else(|| schema(format!("concept {} names unknown parent {}", c.id, p)))?,
            ),
        };
        concepts.push(ConceptNode {
            id: c.id.clone(),
            parent,
            children: Vec::new(),
            asserted_prior: c.prior,
            prior: 0.0,
            depth: 0,
            preorder: 0,
        });
    }
    for i in 0..concepts.len() {
        if let Some(p) = concepts[i].parent {
            if p == i {
                return Err(schema(format!("concept {} is its own parent", concepts[i].id)));
            }
            concepts[p].children.push(i);
        }
    }
    let roots: Vec<usize> = (0..concepts.len())
        .filter(|&i| concepts[i].parent.is_none())
        .collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(schema("no root concept")),
        many => {
            let ids: Vec<&str> = many.iter().map(|&i| concepts[i].id.as_str()).collect();
            return Err(schema(format!("multiple root concepts: {}", ids.join(", "))));
        }
    };

    // Depth and preorder via DFS; doubling as a reachability check, which
    // rules out parent cycles.
    let mut order = Vec::with_capacity(concepts.len());
    let mut stack = vec![root];
    while let Some(c) = stack.pop() {
        concepts[c].preorder = order.len();
        order.push(c);
        let depth = concepts[c].depth;
        for &ch in concepts[c].children.clone().iter().rev() {
            concepts[ch].depth = depth + 1;
            stack.push(ch);
        }
    }
    if order.len() != concepts.len() {
        let stranded = (0..concepts.len())
            .find(|&i| !order.contains(&i))
            .expect("some concept unreached");
        return Err(schema(format!(
            "concept {} is not reachable from the root (parent cycle?)",
            concepts[stranded].id
        )));
    }

    // Prior rules and derived priors, children before parents.
    for c in &concepts {
        if c.children.is_empty() && c.asserted_prior.is_none() {
            return Err(schema(format!("leaf concept {} requires a prior", c.id)));
        }
        if !c.children.is_empty() && c.asserted_prior.is_some() {
            return Err(schema(format!(
                "internal concept {} must not assert a prior",
                c.id
            )));
        }
    }
    for &c in order.iter().rev() {
        concepts[c].prior = match concepts[c].asserted_prior {
            Some(p) => p,
            None => concepts[c].children.iter().map(|&ch| concepts[ch].prior).sum(),
        };
    }

    // Diagrams.
    let mut diagrams: Vec<Option<PcDiagram>> = vec![None; concepts.len()];
    for d in &file.diagrams {
        let concept = *concept_by_id
            .get(&d.concept)
            .ok_or_else(|| schema(format!("diagram names unknown concept {}", d.concept)))?;
        if diagrams[concept].is_some() {
            return Err(schema(format!("duplicate diagram for concept {}", d.concept)));
        }
        diagrams[concept] = Some(resolve_diagram(d, concept, &features, &feature_by_id)?);
    }

    let mut net = PcNet {
        features,
        concepts,
        root,
        feature_by_id,
        concept_by_id,
        diagrams,
        preference: None,
    };

    if let Some(p) = file.preference {
        let pref = PreferenceModel::new(&net, p.actions, &p.utility, p.observed)?;
        net.preference = Some(pref);
    }
    Ok(net)
}

fn resolve_diagram(
    d: &FileDiagram,
    concept: usize,
    features: &[FeatureDecl],
    feature_by_id: &HashMap<String, usize>,
) -> Result<PcDiagram> {
    let where_ = format!("diagram {}", d.concept);
    let mut feats = Vec::with_capacity(d.features.len());
    for f in &d.features {
        let fi = *feature_by_id
            .get(f)
            .ok_or_else(|| schema(format!("{where_} references unknown feature {f}")))?;
        feats.push(fi);
    }
    feats.sort_unstable();
    if feats.windows(2).any(|w| w[0] == w[1]) {
        return Err(schema(format!("{where_} repeats a feature")));
    }
    for key in d.parents.keys().chain(d.cpt.keys()) {
        let fi = feature_by_id
            .get(key)
            .ok_or_else(|| schema(format!("{where_} references unknown feature {key}")))?;
        if feats.binary_search(fi).is_err() {
            return Err(schema(format!(
                "{where_} keys feature {key} outside its feature list"
            )));
        }
    }

    let mut cpts = Vec::with_capacity(feats.len());
    for &fi in &feats {
        let fid = &features[fi].id;
        let states = features[fi].domain.len();
        let mut parents: Vec<usize> = Vec::new();
        if let Some(ps) = d.parents.get(fid) {
            for p in ps {
                let pi = *feature_by_id.get(p).ok_or_else(|| {
                    schema(format!("{where_} conditions {fid} on unknown feature {p}"))
                })?;
                parents.push(pi);
            }
            parents.sort_unstable();
            if parents.windows(2).any(|w| w[0] == w[1]) {
                return Err(schema(format!("{where_} repeats a parent of {fid}")));
            }
        }
        let parent_dims: Vec<usize> = parents.iter().map(|&p| features[p].domain.len()).collect();
        let configs: usize = parent_dims.iter().product();
        let rows = d
            .cpt
            .get(fid)
            .ok_or_else(|| schema(format!("{where_} is missing the CPT for {fid}")))?;

        let mut table = vec![0.0; configs * states];
        let mut seen = vec![false; configs];
        for row in rows {
            if row.given.len() != parents.len() {
                return Err(schema(format!(
                    "{where_}: a CPT row for {fid} does not assign exactly its parents"
                )));
            }
            let mut cfg = 0usize;
            for (&p, &dim) in parents.iter().zip(&parent_dims) {
                let pid = &features[p].id;
                let label = row.given.get(pid).ok_or_else(|| {
                    schema(format!("{where_}: a CPT row for {fid} misses parent {pid}"))
                })?;
                let s = features[p].state_index(label).ok_or_else(|| {
                    schema(format!(
                        "{where_}: CPT row for {fid} uses unknown state {label:?} of {pid}"
                    ))
                })?;
                cfg = cfg * dim + s;
            }
            if seen[cfg] {
                return Err(schema(format!(
                    "{where_}: duplicate CPT row for {fid} (configuration repeated)"
                )));
            }
            seen[cfg] = true;
            if row.p.len() != states {
                return Err(schema(format!(
                    "{where_}: CPT row for {fid} must assign every state exactly once"
                )));
            }
            for (label, &prob) in &row.p {
                let s = features[fi].state_index(label).ok_or_else(|| {
                    schema(format!(
                        "{where_}: CPT row for {fid} uses unknown state {label:?}"
                    ))
                })?;
                table[cfg * states + s] = prob;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(schema(format!(
                "{where_}: CPT for {fid} misses configuration {missing}"
            )));
        }
        cpts.push(Cpt {
            parents,
            parent_dims,
            states,
            table,
        });
    }
    Ok(PcDiagram {
        concept,
        features: feats,
        cpts,
    })
}

fn lower(net: &PcNet) -> FileNet {
    let features = net
        .features
        .iter()
        .map(|f| FileFeature {
            id: f.id.clone(),
            domain: f.domain.clone(),
            rank: f.rank,
        })
        .collect();
    let concepts = net
        .concepts
        .iter()
        .map(|c| FileConcept {
            id: c.id.clone(),
            parent: c.parent.map(|p| net.concepts[p].id.clone()),
            prior: c.asserted_prior,
        })
        .collect();
    let mut diagrams = Vec::new();
    for (ci, d) in net.diagrams.iter().enumerate() {
        let Some(d) = d else { continue };
        let mut parents = BTreeMap::new();
        let mut cpt = BTreeMap::new();
        for (&fi, c) in d.features.iter().zip(&d.cpts) {
            let fid = net.features[fi].id.clone();
            if !c.parents.is_empty() {
                parents.insert(
                    fid.clone(),
                    c.parents.iter().map(|&p| net.features[p].id.clone()).collect(),
                );
            }
            let mut rows = Vec::with_capacity(c.config_count());
            for cfg in 0..c.config_count() {
                let mut given = BTreeMap::new();
                let mut rest = cfg;
                for (&p, &dim) in c.parents.iter().zip(&c.parent_dims).rev() {
                    let s = rest % dim;
                    rest /= dim;
                    given.insert(net.features[p].id.clone(), net.features[p].domain[s].clone());
                }
                let p = net.features[fi]
                    .domain
                    .iter()
                    .cloned()
                    .zip(c.row(cfg).iter().copied())
                    .collect();
                rows.push(FileCptRow { given, p });
            }
            cpt.insert(fid, rows);
        }
        diagrams.push(FileDiagram {
            concept: net.concepts[ci].id.clone(),
            features: d.features.iter().map(|&f| net.features[f].id.clone()).collect(),
            parents,
            cpt,
        });
    }
    let preference = net.preference.as_ref().map(|p| FilePreference {
        actions: p.action_ids().to_vec(),
        utility: p
            .action_ids()
            .iter()
            .map(|a| {
                let per_leaf = p
                    .leaf_ids()
                    .iter()
                    .map(|l| (l.clone(), p.utility_by_ids(a, l).expect("total table")))
                    .collect();
                (a.clone(), per_leaf)
            })
            .collect(),
        observed: p.observed_ids(net),
    });
    FileNet {
        features,
        concepts,
        diagrams,
        preference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = include_str!("../../../fixtures/tiny.pcnet.json");
    const MACHINING: &str = include_str!("../../../fixtures/machining.pcnet.json");

    #[test]
    fn parse_error_carries_position() {
        let err = PcNet::from_json("{ \"features\": [ }").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 1);
                assert!(column > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_top_level_key_is_schema_error() {
        let err = PcNet::from_json("{ \"features\": [], \"concepts\": [], \"bogus\": 1 }")
            .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn dangling_references_are_schema_errors() {
        let cases = [
            TINY.replace("\"parent\": \"B\"", "\"parent\": \"Z\""),
            TINY.replace("\"concept\": \"B1\"", "\"concept\": \"Z\""),
            TINY.replace("\"features\": [\"F\"]", "\"features\": [\"G\"]"),
            TINY.replace("\"observed\": [\"F\"]", "\"observed\": [\"G\"]"),
        ];
        for text in cases {
            assert!(
                matches!(PcNet::from_json(&text), Err(Error::Schema(_))),
                "case: {text}"
            );
        }
    }

    #[test]
    fn prior_placement_is_enforced() {
        let leafless = TINY.replace("{ \"id\": \"A\", \"parent\": \"R\", \"prior\": 0.6 }", "{ \"id\": \"A\", \"parent\": \"R\" }");
        assert!(matches!(PcNet::from_json(&leafless), Err(Error::Schema(_))));
        let internal = TINY.replace("{ \"id\": \"B\", \"parent\": \"R\" }", "{ \"id\": \"B\", \"parent\": \"R\", \"prior\": 0.4 }");
        assert!(matches!(PcNet::from_json(&internal), Err(Error::Schema(_))));
    }

    #[test]
    fn tree_shape_is_enforced() {
        let two_roots = TINY.replace("{ \"id\": \"B\", \"parent\": \"R\" }", "{ \"id\": \"B\" }");
        assert!(matches!(PcNet::from_json(&two_roots), Err(Error::Schema(_))));

        let cycle = TINY.replace("{ \"id\": \"R\" }", "{ \"id\": \"R\", \"parent\": \"B1\" }");
        assert!(matches!(PcNet::from_json(&cycle), Err(Error::Schema(_))));
    }

    #[test]
    fn cpt_rows_enumerate_each_configuration_once() {
        let missing_state = TINY.replace("\"p\": { \"hi\": 0.2, \"lo\": 0.8 }", "\"p\": { \"hi\": 0.2 }");
        assert!(matches!(PcNet::from_json(&missing_state), Err(Error::Schema(_))));

        let dup_row = TINY.replace(
            "\"F\": [ { \"given\": {}, \"p\": { \"hi\": 0.2, \"lo\": 0.8 } } ]",
            "\"F\": [ { \"given\": {}, \"p\": { \"hi\": 0.2, \"lo\": 0.8 } }, { \"given\": {}, \"p\": { \"hi\": 0.2, \"lo\": 0.8 } } ]",
        );
        assert!(matches!(PcNet::from_json(&dup_row), Err(Error::Schema(_))));
    }

    #[test]
    fn utility_table_must_be_total() {
        let missing_pair = TINY.replace("\"B2\": -10", "\"X\": -10");
        assert!(matches!(PcNet::from_json(&missing_pair), Err(Error::Schema(_))));
    }

    #[test]
    fn serialization_is_stable() {
        for text in [TINY, MACHINING] {
            let net = PcNet::from_json(text).unwrap();
            let once = net.to_json();
            let again = PcNet::from_json(&once).unwrap().to_json();
            assert_eq!(once, again);
        }
    }

    #[test]
    fn round_trip_preserves_the_data_model() {
        let net = PcNet::from_json(MACHINING).unwrap();
        let back = PcNet::from_json(&net.to_json()).unwrap();
        assert_eq!(net.concept_count(), back.concept_count());
        assert_eq!(net.feature_count(), back.feature_count());
        for id in ["tool-wear", "sensor-failure", "within-variability-limits"] {
            assert_eq!(net.diagram(id).unwrap(), back.diagram(id).unwrap());
            assert_eq!(net.prior(id).unwrap(), back.prior(id).unwrap());
        }
        let (p, q) = (net.preference().unwrap(), back.preference().unwrap());
        assert_eq!(p.action_ids(), q.action_ids());
        assert_eq!(
            p.utility_by_ids("replace-tool", "tool-breakage").unwrap(),
            q.utility_by_ids("replace-tool", "tool-breakage").unwrap()
        );
    }
}
