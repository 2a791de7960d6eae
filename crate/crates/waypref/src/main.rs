use std::collections::BTreeMap;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use waypref::bridge::{replay, Bridge};
use waypref::config::{load_profile, load_world_file, world_name, LearnerConfig, RunConfig};
use waypref::report::{self, Curve};
use waypref::session::SessionSettings;
use waypref::store::ModelStore;
use waypref_core::usersim::{builtin_profile, UserProfile};
use waypref_core::WorldMap;

#[derive(Parser)]
#[command(
    name = "waypref",
    version,
    about = "Waypoint preference learning from verbal feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start the message bridge.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// World files or directories of `.world` files.
        #[arg(long = "world", default_value = "data/worlds")]
        worlds: Vec<PathBuf>,
        /// Directory for user models (`models/`) and transcripts (`transcripts/`).
        #[arg(long, default_value = "out/serve")]
        out: PathBuf,
    },
    /// Run curricula from a config file and write metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the number of seeds.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
        /// Profile file or built-in name; replaces the config's profiles.
        #[arg(long = "profile")]
        profiles: Vec<String>,
    },
    /// Re-execute a transcript and compare the outbound stream.
    Replay {
        transcript: PathBuf,
        #[arg(long = "world", default_value = "data/worlds")]
        worlds: Vec<PathBuf>,
    },
    /// Render summaries and plot data from a run's episode records.
    Report {
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
    },
    /// Validate world files.
    Worlds {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve { listen, worlds, out } => serve(&listen, &worlds, &out),
        Command::Run {
            config,
            seeds,
            out,
            profiles,
        } => batch(&config, seeds, &out, &profiles),
        Command::Replay { transcript, worlds } => replay_file(&transcript, &worlds),
        Command::Report { out } => {
            let path = out.join(report::EPISODES_FILE);
            let text = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
            let records = report::parse_episodes(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            let curves = report::write_reports(&out, &records)?;
            print_summary(&curves);
            Ok(ExitCode::SUCCESS)
        }
        Command::Worlds { files } => {
            let mut ok = true;
            for f in &files {
                match load_world_file(f) {
                    Ok(w) => println!(
                        "{}: ok, {}x{} cells at {} m, {} landmarks",
                        f.display(),
                        w.width(),
                        w.height(),
                        w.resolution(),
                        w.landmarks().len()
                    ),
                    Err(e) => {
                        eprintln!("{e}");
                        ok = false;
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn load_worlds(paths: &[PathBuf]) -> Result<BTreeMap<String, Arc<WorldMap>>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| p.display().to_string())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "world"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    let mut worlds = BTreeMap::new();
    for f in files {
        let w = load_world_file(&f)?;
        if worlds.insert(world_name(&f), Arc::new(w)).is_some() {
            bail!("{}: world name `{}` given twice", f.display(), world_name(&f));
        }
    }
    if worlds.is_empty() {
        bail!("no world files given");
    }
    Ok(worlds)
}

fn serve(listen: &str, worlds: &[PathBuf], out: &Path) -> Result<ExitCode> {
    let worlds = load_worlds(worlds)?;
    let bridge = Bridge::new(
        worlds,
        ModelStore::new(out.join("models")),
        Some(out.join("transcripts")),
        SessionSettings::default(),
        LearnerConfig::default(),
    );
    let listener = TcpListener::bind(listen).with_context(|| format!("binding {listen}"))?;
    let names: Vec<&str> = bridge.world_names().collect();
    println!("listening on {} (worlds: {})", listener.local_addr()?, names.join(", "));
    Arc::new(bridge).serve(listener)?;
    Ok(ExitCode::SUCCESS)
}

fn resolve_profile(spec: &str) -> Result<UserProfile> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(load_profile(path)?);
    }
    builtin_profile(spec).with_context(|| format!("`{spec}` is neither a profile file nor a built-in profile"))
}

fn batch(config: &Path, seeds: Option<u64>, out: &Path, profiles: &[String]) -> Result<ExitCode> {
    let cfg = RunConfig::load(config)?;
    let world = Arc::new(load_world_file(&cfg.world)?);
    let profiles = if profiles.is_empty() {
        cfg.profiles
            .iter()
            .map(|p| load_profile(p))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        profiles
            .iter()
            .map(|p| resolve_profile(p))
            .collect::<Result<Vec<_>>>()?
    };
    let seeds = seeds.unwrap_or(cfg.seeds);
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let records = report::run_batch(&cfg, world, &profiles, seeds)?;
    let curves = report::write_all(out, &records)?;
    print_summary(&curves);
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_summary(curves: &[Curve]) {
    for c in curves {
        println!(
            "{:<12} {:<8} corrections {:.2} -> {:.2}, sim_time {:.1} -> {:.1} s",
            c.profile,
            c.arm.as_str(),
            c.first_corrections(),
            c.last_corrections(),
            c.first_sim_time(),
            c.last_sim_time()
        );
    }
}

fn replay_file(transcript: &Path, worlds: &[PathBuf]) -> Result<ExitCode> {
    let worlds = load_worlds(worlds)?;
    let text = fs::read_to_string(transcript).with_context(|| transcript.display().to_string())?;
    let r = replay(&text, &worlds, &SessionSettings::default()).with_context(|| transcript.display().to_string())?;
    match r.first_mismatch() {
        None => {
            println!(
                "{}: {} outbound messages reproduced",
                transcript.display(),
                r.recorded.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Some(i) => {
            eprintln!("{}: outbound message {} differs", transcript.display(), i + 1);
            eprintln!("recorded: {}", r.recorded.get(i).map_or("<none>", String::as_str));
            eprintln!("replayed: {}", r.replayed.get(i).map_or("<none>", String::as_str));
            Ok(ExitCode::FAILURE)
        }
    }
}
