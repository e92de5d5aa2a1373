use clap::{Args, Parser, Subcommand};
use demuth_lab::fuzz::trial_seeds;
use demuth_lab::*;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "demuth-lab", version, about = "Run, fuzz and replay Demuth randomness constructions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a test to a clopen test and a quick test, checking the bounds.
    Transform(RunArgs),
    /// Run the box-promotion engine.
    RunSjt(RunArgs),
    /// Run the priority-tree engine.
    RunBase(RunArgs),
    /// Generate and run seeded scenarios.
    Fuzz(FuzzArgs),
    /// Validate a scenario without running it.
    Check { scenario: PathBuf },
    /// Re-run a scenario and byte-compare with a previous --out directory.
    Replay {
        scenario: PathBuf,
        #[arg(long)]
        against: PathBuf,
    },
    /// Write one generated scenario.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    horizon: Option<u64>,
    /// Directory for the report, snapshots and artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<u64>,
    #[arg(long, value_enum)]
    fault: Option<Fault>,
    #[arg(long, default_value_t = 1)]
    fault_stage: u64,
    /// Check change counts against the recursion without its `1 +` terms.
    #[arg(long)]
    weakened_k: bool,
    /// Use ℓ > 2^n instead of ℓ > 2^(n+2) for the infinite outcome.
    #[arg(long)]
    verbatim_n_rule: bool,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Corpus directory for failing scenarios.
    #[arg(long, default_value = "corpus")]
    out: PathBuf,
    #[arg(long)]
    weakened_k: bool,
    #[arg(long)]
    verbatim_n_rule: bool,
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(2, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("demuth-lab: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path, horizon: Option<u64>) -> Result<(ScenarioScript, Scenario), Failure> {
    let mut script = ScenarioScript::load(path)?;
    if let Some(h) = horizon {
        script.horizon = h;
    }
    let sc = script.scenario()?;
    Ok((script, sc))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure(2, format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure(2, format!("{}: {e}", path.display())))
}

/// Every file a run writes, by relative path.
fn files(out: &RunOutput, script: &ScenarioScript, opts: &RunOptions) -> Vec<(String, String)> {
    let mut v = vec![
        ("scenario.json".to_string(), script.to_pretty() + "\n"),
        ("run.json".to_string(), serde_json::to_string_pretty(&serde_json::to_value(opts).unwrap()).unwrap() + "\n"),
        ("report.jsonl".to_string(), out.report_text()),
    ];
    for (s, text) in &out.snapshots {
        let name = match s {
            Some(s) => format!("snapshots/stage-{s:06}.json"),
            None => "snapshot.json".to_string(),
        };
        v.push((name, text.clone()));
    }
    v.extend(out.artifacts.iter().map(|(k, t)| (k.clone(), t.clone())));
    v
}

fn cmd_run(kind: Kind, a: RunArgs) -> Result<u8, Failure> {
    let (script, sc) = load(&a.scenario, a.horizon)?;
    if sc.kind() != kind {
        return Err(Failure(2, format!("expected a {} scenario, found {}", kind.name(), sc.kind().name())));
    }
    let opts = RunOptions {
        fault: a.fault,
        fault_stage: a.fault_stage,
        weakened_k: a.weakened_k,
        verbatim_n_rule: a.verbatim_n_rule,
        snapshot_every: a.snapshot_every,
    };
    let t = Instant::now();
    let out = run(&sc, &opts)?;
    let wall = t.elapsed().as_millis() as u64;
    if let Some(dir) = &a.out {
        for (name, text) in files(&out, &script, &opts) {
            write(&dir.join(name), &text)?;
        }
    }
    let mut summary = out.report.summary(kind);
    summary["wall_ms"] = json!(wall);
    println!("{summary}");
    Ok(if out.clean() { 0 } else { 1 })
}

fn cmd_fuzz(a: FuzzArgs) -> Result<u8, Failure> {
    let mut lim = FuzzLimits::default_for(a.kind);
    lim.horizon = a.horizon.unwrap_or(lim.horizon);
    lim.depth = a.depth.unwrap_or(lim.depth);
    let opts = RunOptions { weakened_k: a.weakened_k, verbatim_n_rule: a.verbatim_n_rule, ..RunOptions::default() };
    let t = Instant::now();
    let sum = fuzz(a.kind, a.trials, a.seed, lim, &opts, Some(&a.out))?;
    for tr in &sum.trials {
        println!("{}", serde_json::to_value(tr).unwrap());
    }
    let failing = sum.trials.iter().filter(|t| !t.breaches.is_empty()).count();
    let unsettled = sum.trials.iter().filter(|t| t.unsettled).count();
    println!(
        "{}",
        json!({ "clean": sum.clean(), "failing": failing, "kind": a.kind.name(), "notes": sum.notes, "seed": a.seed, "trials": a.trials, "unsettled": unsettled, "wall_ms": t.elapsed().as_millis() as u64 })
    );
    Ok(if sum.clean() { 0 } else { 1 })
}

fn cmd_replay(scenario: &Path, against: &Path) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(against.join("run.json")).map_err(|e| Failure(2, format!("run.json: {e}")))?;
    let opts: RunOptions = serde_json::from_str(&text)?;
    let (script, sc) = load(scenario, None)?;
    let out = run(&sc, &opts)?;
    let mut diffs = Vec::new();
    for (name, text) in files(&out, &script, &opts) {
        match std::fs::read(against.join(&name)) {
            Ok(old) if old == text.as_bytes() => {}
            Ok(_) => diffs.push(name),
            Err(_) => diffs.push(format!("{name} (missing)")),
        }
    }
    println!("{}", json!({ "identical": diffs.is_empty(), "differs": diffs }));
    Ok(if diffs.is_empty() { 0 } else { 1 })
}

fn dispatch(cmd: Cmd) -> Result<u8, Failure> {
    match cmd {
        Cmd::Transform(a) => cmd_run(Kind::Transform, a),
        Cmd::RunSjt(a) => cmd_run(Kind::Sjt, a),
        Cmd::RunBase(a) => cmd_run(Kind::Base, a),
        Cmd::Fuzz(a) => cmd_fuzz(a),
        Cmd::Check { scenario } => {
            let (_, sc) = load(&scenario, None)?;
            println!("{}", json!({ "depth": sc.depth(), "horizon": sc.horizon(), "kind": sc.kind().name(), "valid": true }));
            Ok(0)
        }
        Cmd::Replay { scenario, against } => cmd_replay(&scenario, &against),
        Cmd::Generate { kind, seed, horizon, depth, out } => {
            let mut lim = FuzzLimits::default_for(kind);
            lim.horizon = horizon.unwrap_or(lim.horizon);
            lim.depth = depth.unwrap_or(lim.depth);
            let s = trial_seeds(seed, 1)[0];
            let text = ScenarioScript::wrap(&generate(kind, s, lim), Some(s)).to_pretty() + "\n";
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}
