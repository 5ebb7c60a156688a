use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semnav::harness::{
    builtin, load_scenario, render_report, render_world, run_trials, trials_jsonl, Report,
    ReportFormat, Scenario, WorldFormat, BUILTIN_SCENARIOS, EXPERIMENT_SCENARIOS,
};
use semnav::llm_client::{ClientConfig, LiveProvider, RecordingProvider, ReplayProvider};
use semnav::planner::astar;
use semnav::semantic::{DecisionProvider, OracleProvider};

#[derive(Parser)]
#[command(name = "semnav", about = "Semantic navigation scenario runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run trials of a scenario (builtin name, "all", or a TOML file path).
    Run {
        scenario: String,
        #[arg(long, default_value = "oracle", value_parser = ["oracle", "live", "replay"])]
        provider: String,
        /// Trial count; defaults to the scenario's own default.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "text")]
        report: ReportFormat,
        /// Record provider exchanges to a transcript file.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Replay provider exchanges from a transcript file.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Override the scenario's grid resolution (metres per cell).
        #[arg(long)]
        resolution: Option<f64>,
        /// Override the buffers offered for candidate generation, e.g. "0,20".
        #[arg(long)]
        buffers: Option<String>,
        /// Also write per-trial results as line-delimited JSON.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        /// Live provider endpoint URL.
        #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
        endpoint: String,
        /// Live provider model name.
        #[arg(long, default_value = "gpt-4")]
        model: String,
        /// Environment variable holding the API key.
        #[arg(long, default_value = "OPENAI_API_KEY")]
        api_key_env: String,
        /// Request timeout in seconds for the live provider.
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
    },
    /// Render a scenario world (with its unbuffered shortest paths) for
    /// debugging.
    Render {
        scenario: String,
        #[arg(long, default_value = "ascii")]
        format: WorldFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin scenarios.
    Scenarios,
}

fn resolve_scenario(name: &str) -> Result<Scenario, String> {
    let path = PathBuf::from(name);
    if path.exists() {
        return load_scenario(&path).map_err(|e| e.to_string());
    }
    builtin(name).map_err(|e| e.to_string())
}

fn parse_buffers(spec: &str) -> Result<Vec<usize>, String> {
    spec.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad buffer {s:?}: {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Scenarios => {
            for name in BUILTIN_SCENARIOS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Render { scenario, format, out } => {
            let s = resolve_scenario(&scenario)?;
            let grid = semnav::grid::build_grid(&s.world, s.mission.resolution_m)
                .map_err(|e| e.to_string())?;
            let start = semnav::grid::validate_start(&s.world, &grid).map_err(|e| e.to_string())?;
            let mut paths = Vec::new();
            for goal in &s.world.goals {
                if let Ok(cell) = semnav::grid::world_to_cell(goal.position, &grid) {
                    if let Ok(path) = astar(&grid, start, cell) {
                        paths.push(path);
                    }
                }
            }
            let refs: Vec<&semnav::planner::Path> = paths.iter().collect();
            let bytes = render_world(&s.world, &refs, s.mission.resolution_m, format);
            match out {
                Some(path) => std::fs::write(path, bytes).map_err(|e| e.to_string())?,
                None => {
                    if format == WorldFormat::Ascii {
                        print!("{}", String::from_utf8_lossy(&bytes));
                    } else {
                        return Err("binary output needs --out".to_string());
                    }
                }
            }
            Ok(())
        }
        Command::Run {
            scenario,
            provider,
            trials,
            seed,
            report,
            record,
            replay,
            resolution,
            buffers,
            jsonl,
            endpoint,
            model,
            api_key_env,
            timeout,
        } => {
            let names: Vec<String> = if scenario == "all" {
                EXPERIMENT_SCENARIOS.iter().map(|s| s.to_string()).collect()
            } else {
                vec![scenario]
            };
            let mut scenarios = Vec::new();
            for name in &names {
                let mut s = resolve_scenario(name)?;
                if let Some(res) = resolution {
                    s.mission.resolution_m = res;
                }
                if let Some(buffer_spec) = &buffers {
                    s.mission.buffers_offered = parse_buffers(buffer_spec)?;
                }
                scenarios.push(s);
            }

            let base: Box<dyn DecisionProvider> = match provider.as_str() {
                "oracle" => Box::new(OracleProvider::default()),
                "live" => {
                    let config = ClientConfig {
                        endpoint_url: endpoint,
                        model_name: model,
                        api_key_env,
                        timeout_s: timeout,
                        ..ClientConfig::default()
                    };
                    Box::new(LiveProvider::new(config).map_err(|e| e.to_string())?)
                }
                "replay" => {
                    let path = replay.ok_or("--replay FILE is required with provider=replay")?;
                    Box::new(ReplayProvider::from_file(&path).map_err(|e| e.to_string())?)
                }
                other => return Err(format!("unknown provider {other:?}")),
            };
            let provider: Box<dyn DecisionProvider> = match record {
                Some(path) => {
                    Box::new(RecordingProvider::create(base, &path).map_err(|e| e.to_string())?)
                }
                None => base,
            };

            let mut reports = Vec::new();
            for s in &scenarios {
                let n = trials.unwrap_or(s.trials_default);
                reports.push(run_trials(s, n, provider.as_ref(), seed));
            }
            let merged = Report::merge(reports);
            if let Some(path) = jsonl {
                std::fs::write(path, trials_jsonl(&merged)).map_err(|e| e.to_string())?;
            }
            print!("{}", render_report(&merged, report));
            Ok(())
        }
    }
}
