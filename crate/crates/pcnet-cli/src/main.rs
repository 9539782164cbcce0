//! Command-line front end for probabilistic conceptual networks.
//!
//! Every command is a pure function of the input file bytes and the flags:
//! identical invocations produce byte-identical output. Results go to
//! stdout unless `--output PATH` redirects them; diagnostics go to stderr.
//! Exit codes: 0 success, 1 domain errors (validation, covers, evidence),
//! 2 usage and parse errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcnet::dot::{diagrams_to_dot, model_to_dot, net_to_dot};
use pcnet::{
    refine, CategorizationDecisionModel, ConceptualCover, CostParams, Error, EvidenceSet, PcNet,
};

#[derive(Parser)]
#[command(
    name = "pcnet",
    version,
    about = "Build, solve and refine categorization decision models over pc-net files"
)]
struct Cli {
    /// Path to the pc-net JSON file.
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Where to write the result.
    #[arg(long, global = true, value_name = "PATH|stdout", default_value = "stdout")]
    output: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the file and report every problem found.
    Validate,
    /// Derive a diagram for every internal concept and write the net back out.
    Propagate,
    /// List every conceptual cover, one per line, in canonical order.
    Covers,
    /// Construct the decision model for a cover and describe it as JSON.
    Build {
        /// Comma-separated concept ids forming the cover.
        #[arg(long, value_name = "IDS")]
        cover: String,
    },
    /// Solve the decision model for a cover under evidence.
    Solve {
        /// Comma-separated concept ids forming the cover.
        #[arg(long, value_name = "IDS")]
        cover: String,
        /// Observed feature state, repeatable.
        #[arg(long, value_name = "FEATURE=STATE")]
        evidence: Vec<String>,
    },
    /// Greedy cost-aware refinement from an initial cover; emits the trace
    /// as JSON lines.
    Refine {
        /// Comma-separated concept ids forming the initial cover.
        #[arg(long, value_name = "IDS")]
        init: String,
        /// Cost per model CPT entry.
        #[arg(long, value_name = "COST", default_value_t = 0.0)]
        kappa_table: f64,
        /// Cost per cover member.
        #[arg(long, value_name = "COST", default_value_t = 0.0)]
        kappa_concept: f64,
        /// Observed feature state, repeatable.
        #[arg(long, value_name = "FEATURE=STATE")]
        evidence: Vec<String>,
    },
    /// Emit DOT for the taxonomy, for concept diagrams, or for a model.
    #[command(name = "export-dot")]
    ExportDot {
        /// What to render: net, cover or model.
        #[arg(long, value_name = "net|cover|model")]
        target: String,
        /// Comma-separated concept ids (cover and model targets).
        #[arg(long, value_name = "IDS")]
        cover: Option<String>,
    },
}

/// Exit code plus the message for stderr.
type Failure = (u8, String);

fn usage(msg: impl Into<String>) -> Failure {
    (2, format!("error: {}", msg.into()))
}

fn domain(e: Error) -> Failure {
    let code = match e {
        Error::Parse { .. } => 2,
        _ => 1,
    };
    (code, format!("error: {e}"))
}

fn load(input: &Option<PathBuf>) -> Result<PcNet, Failure> {
    let path = input.as_ref().ok_or_else(|| usage("--input is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    PcNet::from_json(&text).map_err(domain)
}

fn parse_cover(net: &PcNet, spec: &str) -> Result<ConceptualCover, Failure> {
    let ids: Vec<&str> = spec.split(',').map(str::trim).collect();
    ConceptualCover::from_ids(net, &ids).map_err(domain)
}

fn parse_evidence(net: &PcNet, flags: &[String]) -> Result<EvidenceSet, Failure> {
    let mut pairs = Vec::with_capacity(flags.len());
    for flag in flags {
        let (feature, state) = flag
            .split_once('=')
            .ok_or_else(|| usage(format!("evidence `{flag}` is not FEATURE=STATE")))?;
        pairs.push((feature.trim(), state.trim()));
    }
    EvidenceSet::from_pairs(net, &pairs).map_err(domain)
}

/// Runs one command and returns the stdout text with its exit code.
fn run(cli: &Cli) -> Result<(String, u8), Failure> {
    match &cli.command {
        Command::Validate => {
            let net = load(&cli.input)?;
            let report = net.validate();
            if report.is_clean() {
                Ok(("ok\n".to_string(), 0))
            } else {
                let code = if report.has_errors() { 1 } else { 0 };
                Ok((report.to_string(), code))
            }
        }
        Command::Propagate => {
            let net = load(&cli.input)?.propagate().map_err(domain)?;
            Ok((net.to_json(), 0))
        }
        Command::Covers => {
            let net = load(&cli.input)?;
            let covers = net.enumerate_covers().map_err(domain)?;
            let mut out = String::new();
            for cover in &covers {
                out.push_str(&cover.members().join(","));
                out.push('\n');
            }
            Ok((out, 0))
        }
        Command::Build { cover } => {
            let net = load(&cli.input)?;
            let cover = parse_cover(&net, cover)?;
            let model = CategorizationDecisionModel::build(&net, &cover).map_err(domain)?;
            let mut out = model.to_json();
            out.push('\n');
            Ok((out, 0))
        }
        Command::Solve { cover, evidence } => {
            let net = load(&cli.input)?;
            let cover = parse_cover(&net, cover)?;
            let model = CategorizationDecisionModel::build(&net, &cover).map_err(domain)?;
            let e = parse_evidence(&net, evidence)?;
            let result = model.solve(&e).map_err(domain)?;
            let mut out = result.to_json();
            out.push('\n');
            Ok((out, 0))
        }
        Command::Refine {
            init,
            kappa_table,
            kappa_concept,
            evidence,
        } => {
            let net = load(&cli.input)?;
            let init = parse_cover(&net, init)?;
            let e = parse_evidence(&net, evidence)?;
            let params = CostParams::new(*kappa_table, *kappa_concept).map_err(domain)?;
            let trace = refine(&net, &e, &params, &init).map_err(domain)?;
            Ok((trace.to_json_lines(), 0))
        }
        Command::ExportDot { target, cover } => {
            let net = load(&cli.input)?;
            match target.as_str() {
                "net" => Ok((net_to_dot(&net), 0)),
                "cover" => {
                    let spec = cover
                        .as_ref()
                        .ok_or_else(|| usage("--cover is required for target `cover`"))?;
                    let ids: Vec<&str> = spec.split(',').map(str::trim).collect();
                    let full = net.propagate().map_err(domain)?;
                    Ok((diagrams_to_dot(&full, &ids).map_err(domain)?, 0))
                }
                "model" => {
                    let spec = cover
                        .as_ref()
                        .ok_or_else(|| usage("--cover is required for target `model`"))?;
                    let cover = parse_cover(&net, spec)?;
                    let model =
                        CategorizationDecisionModel::build(&net, &cover).map_err(domain)?;
                    Ok((model_to_dot(&model), 0))
                }
                other => Err((
                    1,
                    format!("error: unknown export target `{other}` (expected net, cover or model)"),
                )),
            }
        }
    }
}

fn write_result(output: &str, text: &str) -> Result<(), Failure> {
    if output == "stdout" {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| usage(format!("cannot write to stdout: {e}")))
    } else {
        std::fs::write(output, text).map_err(|e| usage(format!("cannot write {output}: {e}")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli).and_then(|(text, code)| {
        write_result(&cli.output, &text)?;
        Ok(code)
    }) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}
