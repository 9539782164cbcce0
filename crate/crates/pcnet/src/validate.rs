//! Structural and numeric validation.
//!
//! Parsing already guarantees resolvable references and densely filled
//! CPTs. Validation covers everything else: rank ordering, domain sizes,
//! branching, prior ranges, normalization and arc direction. All findings
//! come back in one report instead of failing at the first.

use std::fmt;

use crate::model::PcNet;
use crate::NORMALIZATION_TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.severity, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn issues(&self) -> &[Issue] {
        &self.issues
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    fn error(&mut self, message: String) {
        self.issues.push(Issue {
            severity: Severity::Error,
            message,
        });
    }

    fn warning(&mut self, message: String) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl PcNet {
    /// Checks the whole net and reports every finding.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        self.check_features(&mut report);
        self.check_taxonomy(&mut report);
        self.check_diagrams(&mut report);
        report
    }

    fn check_features(&self, report: &mut ValidationReport) {
        let n = self.feature_count();
        let mut seen = vec![false; n];
        for f in 0..n {
            let decl = self.feature(f);
            if decl.domain.len() < 2 {
                report.error(format!("feature {} has fewer than two states", decl.id));
            }
            for (i, s) in decl.domain.iter().enumerate() {
                if decl.domain[..i].contains(s) {
                    report.error(format!("feature {} repeats state {s:?}", decl.id));
                }
            }
            if decl.rank >= n {
                report.error(format!(
                    "feature {} has rank {}, outside 0..{}",
                    decl.id, decl.rank, n
                ));
            } else if seen[decl.rank] {
                report.error(format!("feature {} repeats rank {}", decl.id, decl.rank));
            } else {
                seen[decl.rank] = true;
            }
        }
    }

    fn check_taxonomy(&self, report: &mut ValidationReport) {
        for idx in 0..self.concept_count() {
            let id = self.concept_id(idx);
            let children = self.children_idx(idx);
            if children.len() == 1 {
                report.error(format!("concept {id} has a single child"));
            }
            if children.is_empty() {
                let prior = self.prior_idx(idx);
                if !(0.0..=1.0).contains(&prior) {
                    report.error(format!("leaf {id} has prior {prior}, outside [0, 1]"));
                } else if prior == 0.0 {
                    report.warning(format!("leaf {id} has zero prior"));
                }
            }
        }
        let root = self.root_id();
        let total = self.prior(root).expect("root prior");
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            report.error(format!("leaf priors sum to {total}, not 1, at root {root}"));
        }
    }

    fn check_diagrams(&self, report: &mut ValidationReport) {
        let mut reference: Option<(usize, &[usize])> = None;
        for idx in 0..self.concept_count() {
            let id = self.concept_id(idx);
            let diagram = match self.diagram_idx(idx) {
                Some(d) => d,
                None => {
                    if self.children_idx(idx).is_empty() {
                        report.error(format!("leaf {id} has no diagram"));
                    }
                    continue;
                }
            };
            match reference {
                None => reference = Some((idx, diagram.features())),
                Some((first, feats)) => {
                    if diagram.features() != feats {
                        report.error(format!(
                            "diagrams of {} and {id} cover different feature sets",
                            self.concept_id(first)
                        ));
                    }
                }
            }
            for (fpos, &fi) in diagram.features().iter().enumerate() {
                let decl = self.feature(fi);
                let cpt = diagram.cpt_at(fpos);
                for &p in cpt.parents() {
                    if diagram.features().binary_search(&p).is_err() {
                        report.error(format!(
                            "diagram {id}: {} conditions on {}, which the diagram does not cover",
                            decl.id,
                            self.feature_id(p)
                        ));
                    }
                    if self.feature(p).rank >= decl.rank {
                        report.error(format!(
                            "diagram {id}: arc from {} to {} does not point up the feature order",
                            self.feature_id(p),
                            decl.id
                        ));
                    }
                }
                for cfg in 0..cpt.config_count() {
                    let row = cpt.row(cfg);
                    let mut sum = 0.0;
                    let mut in_range = true;
                    for &p in row {
                        sum += p;
                        in_range &= (0.0..=1.0).contains(&p);
                    }
                    if !in_range {
                        report.error(format!(
                            "diagram {id}: {} has an entry outside [0, 1]",
                            self.describe_row(diagram, fpos, cfg)
                        ));
                    }
                    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                        report.error(format!(
                            "diagram {id}: {} sums to {sum}",
                            self.describe_row(diagram, fpos, cfg)
                        ));
                    }
                }
            }
        }
    }

    fn describe_row(&self, diagram: &crate::model::PcDiagram, fpos: usize, cfg: usize) -> String {
        let cpt = diagram.cpt_at(fpos);
        let fid = self.feature_id(diagram.features()[fpos]);
        if cpt.parents().is_empty() {
            return format!("p({fid})");
        }
        let dims: Vec<usize> = cpt
            .parents()
            .iter()
            .map(|&p| self.feature(p).domain.len())
            .collect();
        let mut rest = cfg;
        let mut parts = vec![String::new(); cpt.parents().len()];
        for k in (0..cpt.parents().len()).rev() {
            let s = rest % dims[k];
            rest /= dims[k];
            let p = cpt.parents()[k];
            parts[k] = format!("{}={}", self.feature_id(p), self.feature(p).domain[s]);
        }
        format!("p({fid} | {})", parts.join(", "))
    }
}
