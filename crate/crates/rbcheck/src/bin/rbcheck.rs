//! Command-line entry point: template/spec parsing, pipeline stages, report
//! formats. Exit codes: 0 = property holds / query succeeded, 1 = property
//! violated, 2 = usage, parse or internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rbcheck::automata::{check_liveness, check_safety, CheckOptions, Status, Verdict};
use rbcheck::classifier::classify;
use rbcheck::manifest::RunManifest;
use rbcheck::model::ProcessTemplate;
use rbcheck::oracle::{
    enumerate, exec_fin, find_loading_run, find_pseudo_cycle, realize_lasso, CycleKind,
    SearchBudget,
};
use rbcheck::parse::{parse_edge_ref, parse_input, parse_spec, render_template, Input};
use rbcheck::timed::{reduce_to_rb, ReduceOptions, RelabelMap};
use rbcheck::unwinding::build_unwinding;

#[derive(Parser)]
#[command(name = "rbcheck", version, about = "Parameterized model checker for rendezvous/broadcast networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Number of worker threads for classification and independent checks.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Include wall-clock timings in reports (off keeps output byte-stable).
    #[arg(long, global = true)]
    timings: bool,
    /// Write a run manifest (inputs, options, verdicts) to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BudgetArgs {
    /// Largest instance size the oracle searches.
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    /// Depth cap for oracle searches.
    #[arg(long, default_value_t = 64)]
    max_depth: usize,
    /// State cap for oracle searches.
    #[arg(long, default_value_t = 200_000)]
    max_states: usize,
    /// Time cap in milliseconds (RBCHECK_BUDGET_MS overrides).
    #[arg(long, default_value_t = 5_000)]
    max_ms: u64,
}

impl BudgetArgs {
    fn to_budget(&self) -> SearchBudget {
        let max_millis = std::env::var("RBCHECK_BUDGET_MS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(self.max_ms);
        SearchBudget {
            max_n: self.max_n,
            max_depth: self.max_depth,
            max_states: self.max_states,
            max_millis,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a timed template to an equivalent rendezvous/broadcast template.
    Reduce {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Where to write the relabel map (JSON).
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        state_cap: usize,
        #[arg(long, default_value_t = 100_000)]
        action_cap: usize,
        /// Override every clock's max constant.
        #[arg(long)]
        cmax: Option<u32>,
    },
    /// Build the reachability-unwinding and report its lasso structure.
    Unwind {
        file: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Classify every unwinding edge (red/blue/green/orange) with witnesses.
    Classify {
        file: PathBuf,
        /// Restrict the report to one unwinding edge id.
        #[arg(long)]
        edge: Option<String>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Check a bad-prefix (finite word) specification against all sizes.
    Safety {
        file: PathBuf,
        #[arg(long, required = true)]
        spec: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Skip confirming counterexamples on concrete instances.
        #[arg(long)]
        no_realize: bool,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Check a bad-behavior NBW specification against all sizes.
    Liveness {
        file: PathBuf,
        #[arg(long, required = true)]
        spec: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        no_realize: bool,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Explicit-state queries on concrete instance sizes.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Search for a pseudo-cycle through an unwinding edge.
    PseudoCycle {
        file: PathBuf,
        /// Unwinding edge id, e.g. `q:c.1:r@comp0`.
        #[arg(long)]
        edge: String,
        /// Instance size to search.
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Only broadcast-free cycles.
        #[arg(long, conflicts_with = "with_broadcasts")]
        no_broadcasts: bool,
        /// Only cycles containing a broadcast.
        #[arg(long)]
        with_broadcasts: bool,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// The finite-execution language at a fixed size and length bound.
    ExecFin {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        max_len: usize,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Realize `prefix.cycle^omega` (or a finite word) at some instance size.
    Realize {
        file: PathBuf,
        /// Comma-separated base edge ids; `-` for empty.
        #[arg(long, default_value = "-")]
        prefix: String,
        /// Comma-separated base edge ids; `-` checks the prefix alone.
        #[arg(long, default_value = "-")]
        cycle: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Find a run with exactly b broadcasts loading every component state.
    Loading {
        file: PathBuf,
        #[arg(long)]
        broadcasts: usize,
        #[arg(long)]
        n_target: u32,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Materialize the reachable state graph of one instance.
    Enumerate {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

/// Loads an input file, auto-reducing timed templates; returns the template
/// and the relabel map when a reduction happened.
fn load_template(path: &Path) -> Result<(ProcessTemplate, Option<RelabelMap>, String), String> {
    let text = read(path)?;
    match parse_input(&text).map_err(|e| format!("{}: {e}", path.display()))? {
        Input::Rb(t) => Ok((t, None, text)),
        Input::Timed(tt) => {
            let red = reduce_to_rb(&tt, &ReduceOptions::default())
                .map_err(|e| format!("{}: {e}", path.display()))?;
            Ok((red.template, Some(red.map), text))
        }
    }
}

fn write_manifest(cli_manifest: &Option<PathBuf>, m: &RunManifest) -> Result<(), String> {
    if let Some(path) = cli_manifest {
        let body = serde_json::to_string_pretty(&m.to_json()).unwrap();
        fs::write(path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => fail(msg),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    match &cli.command {
        Command::Reduce { file, output, map, state_cap, action_cap, cmax } => {
            let text = read(file)?;
            let timed = match parse_input(&text).map_err(|e| format!("{}: {e}", file.display()))? {
                Input::Timed(t) => t,
                Input::Rb(_) => return Err("reduce expects a `system timed` input".into()),
            };
            let opts = ReduceOptions {
                state_cap: *state_cap,
                action_cap: *action_cap,
                global_cmax: *cmax,
            };
            let red = reduce_to_rb(&timed, &opts).map_err(|e| e.to_string())?;
            fs::write(output, render_template(&red.template))
                .map_err(|e| format!("cannot write {}: {e}", output.display()))?;
            fs::write(map, serde_json::to_string_pretty(&red.map.to_json()).unwrap())
                .map_err(|e| format!("cannot write {}: {e}", map.display()))?;
            let mut manifest = RunManifest::new("reduce");
            manifest.record_input(&file.display().to_string(), &text);
            write_manifest(&cli.manifest, &manifest)?;
            println!(
                "reduced {} -> {} ({} states, {} actions); map at {}",
                file.display(),
                output.display(),
                red.template.states.len(),
                red.template.actions.len(),
                map.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Unwind { file, json, dot } => {
            let (t, _, text) = load_template(file)?;
            let diags = t.validate(false);
            if !diags.is_empty() {
                return Err(format!("template is not well-formed: {}", diags[0]));
            }
            let u = build_unwinding(&t);
            if let Some(path) = dot {
                fs::write(path, u.to_dot())
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            if *json {
                println!("{}", serde_json::to_string_pretty(&u.to_json()).unwrap());
            } else {
                println!(
                    "unwinding: prefix n={}, period r={}, components m+1={}",
                    u.prefix,
                    u.period,
                    u.components.len()
                );
            }
            let mut manifest = RunManifest::new("unwind");
            manifest.record_input(&file.display().to_string(), &text);
            write_manifest(&cli.manifest, &manifest)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Classify { file, edge, json, dot } => {
            let (t, _, text) = load_template(file)?;
            let diags = t.validate(true);
            if !diags.is_empty() {
                return Err(format!("template is not well-formed: {}", diags[0]));
            }
            let u = build_unwinding(&t);
            let cls = classify(&u).map_err(|e| e.to_string())?;
            if let Some(path) = dot {
                fs::write(path, cls.to_dot(&u))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            let mut report = cls.to_json(&u);
            if let Some(id) = edge {
                let key = id.clone();
                let obj = report.as_object().unwrap();
                let Some(entry) = obj.get(&key) else {
                    return Err(format!("unknown edge id `{key}`"));
                };
                report = json!({ key: entry });
            }
            if *json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                for (id, entry) in report.as_object().unwrap() {
                    println!("{id}: {}", entry["color"].as_str().unwrap());
                }
            }
            let mut manifest = RunManifest::new("classify");
            manifest.record_input(&file.display().to_string(), &text);
            write_manifest(&cli.manifest, &manifest)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Safety { file, spec, json, no_realize, budget } => {
            run_checks(cli, file, spec, *json, *no_realize, budget, true)
        }
        Command::Liveness { file, spec, json, no_realize, budget } => {
            run_checks(cli, file, spec, *json, *no_realize, budget, false)
        }

        Command::Oracle(cmd) => run_oracle(cli, cmd),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_checks(
    cli: &Cli,
    file: &Path,
    specs: &[PathBuf],
    json: bool,
    no_realize: bool,
    budget: &BudgetArgs,
    safety: bool,
) -> Result<ExitCode, String> {
    let (t, map, text) = load_template(file)?;
    let opts = CheckOptions { realize: !no_realize, budget: budget.to_budget() };
    let mut manifest = RunManifest::new(if safety { "safety" } else { "liveness" });
    manifest.record_input(&file.display().to_string(), &text);

    let mut any_violated = false;
    let mut reports = Vec::new();
    for spec_path in specs {
        let spec_text = read(spec_path)?;
        let spec = parse_spec(&spec_text).map_err(|e| format!("{}: {e}", spec_path.display()))?;
        manifest.record_input(&spec_path.display().to_string(), &spec_text);
        let started = Instant::now();
        let mut verdict: Verdict = if safety {
            check_safety(&t, &spec, map.as_ref(), &opts).map_err(|e| e.to_string())?
        } else {
            check_liveness(&t, &spec, map.as_ref(), &opts).map_err(|e| e.to_string())?
        };
        if cli.timings {
            verdict.stats.ms = started.elapsed().as_millis() as u64;
        }
        any_violated |= verdict.status == Status::Violated;
        let v = verdict.to_json(&t);
        manifest.verdicts.push(v.clone());
        reports.push((spec_path.display().to_string(), v, verdict.status));
    }
    write_manifest(&cli.manifest, &manifest)?;

    if json {
        let body: Vec<serde_json::Value> = reports
            .iter()
            .map(|(name, v, _)| json!({ "spec": name, "verdict": v }))
            .collect();
        let out = if body.len() == 1 { body[0]["verdict"].clone() } else { json!(body) };
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        for (name, v, status) in &reports {
            let label = if *status == Status::Holds { "holds" } else { "violated" };
            print!("{name}: {label}");
            if let Some(ce) = v.get("counterexample").filter(|c| !c.is_null()) {
                print!(" (counterexample prefix={}, cycle={})", ce["prefix"], ce["cycle"]);
                match v["realized_at_n"].as_u64() {
                    Some(n) => print!(" realized at n={n}"),
                    None => print!(" (not realized within budget)"),
                }
            }
            println!();
        }
    }
    Ok(if any_violated { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn run_oracle(cli: &Cli, cmd: &OracleCommand) -> Result<ExitCode, String> {
    match cmd {
        OracleCommand::PseudoCycle { file, edge, n, no_broadcasts, with_broadcasts, budget } => {
            let (t, _, text) = load_template(file)?;
            let u = build_unwinding(&t);
            let ut = u.to_template();
            let target = u.parse_edge_ref(edge).map_err(|e| e.to_string())?;
            let kind = if *no_broadcasts {
                CycleKind::NoBroadcasts
            } else if *with_broadcasts {
                CycleKind::WithBroadcasts
            } else {
                CycleKind::Any
            };
            let got = find_pseudo_cycle(&u, &ut, target, *n, kind, &budget.to_budget());
            let report = match &got.found {
                Some(found) => {
                    let path: Vec<String> = found
                        .run
                        .steps
                        .iter()
                        .map(|s| match &s.label {
                            rbcheck::model::TransitionLabel::Broadcast => "b".to_string(),
                            rbcheck::model::TransitionLabel::Rendezvous { action, participants } => {
                                format!(
                                    "{}({})",
                                    ut.template.actions[action.0].name,
                                    participants
                                        .iter()
                                        .map(|p| p.to_string())
                                        .collect::<Vec<_>>()
                                        .join(",")
                                )
                            }
                        })
                        .collect();
                    json!({
                        "found": true,
                        "truncated": got.truncated,
                        "n": found.n,
                        "broadcasts": found.broadcasts,
                        "steps": path,
                    })
                }
                None => json!({ "found": false, "truncated": got.truncated }),
            };
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            let mut manifest = RunManifest::new("oracle pseudo-cycle");
            manifest.record_input(&file.display().to_string(), &text);
            write_manifest(&cli.manifest, &manifest)?;
            Ok(ExitCode::SUCCESS)
        }

        OracleCommand::ExecFin { file, n, max_len, budget } => {
            let (t, _, _) = load_template(file)?;
            let (words, truncated) = exec_fin(&t, *n, *max_len, &budget.to_budget());
            let report = json!({
                "truncated": truncated,
                "words": words
                    .iter()
                    .map(|w| w.iter().map(|e| t.edge_display(*e)).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(ExitCode::SUCCESS)
        }

        OracleCommand::Realize { file, prefix, cycle, budget } => {
            let (t, _, _) = load_template(file)?;
            let parse_word = |s: &str| -> Result<Vec<rbcheck::model::EdgeId>, String> {
                if s == "-" || s.is_empty() {
                    return Ok(Vec::new());
                }
                s.split(',')
                    .map(|part| {
                        parse_edge_ref(&t, part.trim())
                            .ok_or_else(|| format!("unknown edge id `{part}`"))
                    })
                    .collect()
            };
            let prefix = parse_word(prefix)?;
            let cycle = parse_word(cycle)?;
            let got = if cycle.is_empty() {
                rbcheck::oracle::realize_word(&t, &prefix, &budget.to_budget())
            } else {
                realize_lasso(&t, &prefix, &cycle, &budget.to_budget())
            };
            let report = json!({
                "realized_at_n": got.found,
                "truncated": got.truncated,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(ExitCode::SUCCESS)
        }

        OracleCommand::Loading { file, broadcasts, n_target, budget } => {
            let (t, _, _) = load_template(file)?;
            let u = build_unwinding(&t);
            let ut = u.to_template();
            let got = find_loading_run(&u, &ut, *broadcasts, *n_target, &budget.to_budget());
            let report = match &got.found {
                Some((n, run)) => json!({
                    "found": true,
                    "truncated": got.truncated,
                    "n": n,
                    "steps": run.len(),
                    "broadcasts": run.broadcast_count(),
                }),
                None => json!({ "found": false, "truncated": got.truncated }),
            };
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(ExitCode::SUCCESS)
        }

        OracleCommand::Enumerate { file, n, dot, budget } => {
            let (t, _, _) = load_template(file)?;
            let g = enumerate(&t, *n, &budget.to_budget());
            if let Some(path) = dot {
                fs::write(path, g.to_dot(&t))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            let report = json!({
                "states": g.vertices.len(),
                "transitions": g.edges.len(),
                "initial": g.initial.len(),
                "truncated": g.truncated,
                "depth_reached": g.depth_reached,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(ExitCode::SUCCESS)
        }
    }
}
