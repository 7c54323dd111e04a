use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use carefulbot::classifier::ClassifierModel;
use carefulbot::experiment::{
    analyze, make_schedule, perception_classifier, run_study, study_markdown, trial_rows_csv, DeploymentSet, SessionReport,
    StudyReport,
};
use carefulbot::gan::{self, GanConfig};
use carefulbot::human::TrialParticipant;
use carefulbot::kinematics::{CarefulnessClass, VelocityProfile};
use carefulbot::robot::{run_trial, TrialMeta};
use carefulbot::rng::{derive_seed, substream};
use carefulbot::surrogate::{build_dataset, sample_profile, Dataset};
use carefulbot::Error;
use carefulbot_service::protocol::Calibration;
use carefulbot_service::{router, AppState, ServiceConfig, ServiceError, SessionStore, StudySetup};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::FileConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "carefulbot", version, about = "Careful and not-careful robot handovers: data, models, simulated studies")]
pub struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file with optional `surrogate`, `gan`, `study` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassArg {
    C,
    Nc,
    Both,
}

impl ClassArg {
    fn classes(self) -> Vec<CarefulnessClass> {
        match self {
            ClassArg::C => vec![CarefulnessClass::Careful],
            ClassArg::Nc => vec![CarefulnessClass::NotCareful],
            ClassArg::Both => CarefulnessClass::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a labeled surrogate dataset.
    GenData {
        #[arg(long, default_value_t = 500)]
        n_per_class: usize,
    },
    /// Train one generative model per class.
    Train {
        /// Dataset directory from `gen-data`; a fresh surrogate set otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ClassArg::Both)]
        class: ClassArg,
        #[arg(long, default_value_t = 500)]
        n_per_class: usize,
    },
    /// Sample profiles from a trained model as CSV files.
    Sample {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(short = 'n', default_value_t = 10)]
        n: usize,
    },
    /// Compare analytic and finite-difference gradients on random small models.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        configs: usize,
    },
    /// Run a single trial with the scripted participant.
    Simulate {
        /// Profile CSV (`t,speed`); a surrogate profile of `--class` otherwise.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ClassArg::C)]
        class: ClassArg,
    },
    /// Run a full scripted study and write its reports.
    Run {
        #[arg(long)]
        participants: Option<usize>,
        /// Directory with `C.bin` and `NC.bin`; surrogate profiles otherwise.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Pool session reports into a study report.
    Analyze {
        /// Directory searched recursively for `report.json` session files.
        #[arg(long)]
        sessions: PathBuf,
    },
    /// Serve live and scripted sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Wall-clock seconds per simulated second; 0 runs unpaced.
        #[arg(long, default_value_t = 1.0)]
        pace: f64,
        /// Pause between blocks, s.
        #[arg(long, default_value_t = 3.0)]
        block_pause: f64,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    fs::write(path, contents).map_err(io(path))?;
    Ok(())
}

fn model_path(dir: &Path, class: CarefulnessClass) -> PathBuf {
    dir.join(format!("{}.bin", class.code()))
}

fn deployment(cfg: &FileConfig, models: Option<&Path>, seed: u64) -> Result<DeploymentSet> {
    let n = cfg.deploy_per_class;
    Ok(match models {
        Some(dir) => {
            let c = gan::load(&model_path(dir, CarefulnessClass::Careful))?;
            let nc = gan::load(&model_path(dir, CarefulnessClass::NotCareful))?;
            DeploymentSet::from_models(&c, &nc, n, seed)?
        }
        None => DeploymentSet::from_surrogate(&cfg.surrogate, n, seed)?,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    let Common { seed, config, out } = cli.common;
    let mut cfg = FileConfig::load(config.as_deref())?;
    match cli.command {
        Command::GenData { n_per_class } => {
            let data = build_dataset(n_per_class, &cfg.surrogate, seed.unwrap_or(0))?;
            data.write(&out)?;
            println!("{}", json!({ "profiles": data.len(), "out": out }));
        }
        Command::Train { data, class, n_per_class } => {
            if let Some(s) = seed {
                cfg.gan.seed = s;
            }
            let dataset = match data {
                Some(dir) => Dataset::read(&dir)?,
                None => build_dataset(n_per_class, &cfg.surrogate, cfg.gan.seed)?,
            };
            fs::create_dir_all(&out).map_err(io(&out))?;
            for class in class.classes() {
                let model = gan::train(&dataset.profiles, class, &cfg.gan)?;
                gan::save(&model, &model_path(&out, class))?;
                gan::write_loss_curve(&model, &out.join(format!("{}_loss.csv", class.code())))?;
                let losses: serde_json::Map<String, serde_json::Value> = ["recon", "supervised", "g_moment", "d_loss"]
                    .into_iter()
                    .map(|name| (name.to_string(), json!(model.final_loss(name))))
                    .collect();
                println!("{}", json!({ "class": class, "model": model_path(&out, class), "final_loss": losses }));
            }
        }
        Command::Sample { models, class, n } => {
            let seed = seed.unwrap_or(0);
            let mut set = DeploymentSet::default();
            for class in class.classes() {
                let model = gan::load(&model_path(&models, class))?;
                for (i, p) in gan::sample(&model, n, derive_seed(seed, "sample", class as u64))?.into_iter().enumerate() {
                    set.insert(format!("{}{i:02}", class.code()), p)?;
                }
            }
            set.write(&out)?;
            println!("{}", json!({ "profiles": set.profiles.len(), "out": out }));
        }
        Command::Gradcheck { configs } => {
            let seed = seed.unwrap_or(0);
            let mut worst: f64 = 0.0;
            for k in 0..configs {
                let s = derive_seed(seed, "gradcheck-config", k as u64);
                let config = GanConfig::random_small(s);
                let report = gan::gradient_check(&config, s)?;
                worst = worst.max(report.max_relative_error);
                println!(
                    "{}",
                    json!({
                        "config": { "seq_len": config.seq_len, "latent_dim": config.latent_dim, "hidden_dim": config.hidden_dim, "batch_size": config.batch_size },
                        "max_relative_error": report.max_relative_error,
                        "worst_parameter": report.worst_parameter,
                    })
                );
            }
            println!("max relative error {worst:.3e}");
        }
        Command::Simulate { profile, class } => {
            let seed = seed.unwrap_or(0);
            let profile = match profile {
                Some(path) => VelocityProfile::read_csv(&path)?,
                None => {
                    let class = *class.classes().first().expect("at least one class");
                    sample_profile(class, &cfg.surrogate, &mut substream(seed, "simulate", 0))?.profile
                }
            };
            let study = &cfg.study;
            let clf = perception_classifier(&study.perception, &study.sim)?;
            let params = study.participant_params(0)?;
            let mut who = TrialParticipant::new(&params, &clf, 0, study.sim.tick_rate, substream(seed, "trial", 0))?;
            let meta = TrialMeta {
                trial: 0,
                profile_id: "simulated".into(),
                class: profile.label(),
            };
            let trace = run_trial(&profile, &mut who, &study.sim, meta)?;
            let behavior = who.behavior()?;
            let path = out.join("trial.jsonl");
            write(&path, trace.to_jsonl())?;
            let chain: Vec<&str> = trace.phase_chain().iter().map(|p| p.name()).collect();
            println!(
                "{}",
                json!({
                    "trace": path,
                    "ticks": trace.ticks.len(),
                    "phases": chain,
                    "release_time": trace.release_time,
                    "decision": behavior.decision.zone,
                    "posterior": behavior.posterior,
                    "aborted": trace.aborted,
                })
            );
        }
        Command::Run { participants, models } => {
            let study = &mut cfg.study;
            if let Some(s) = seed {
                study.seed = s;
            }
            if let Some(n) = participants {
                study.participants = n;
            }
            let set = deployment(&cfg, models.as_deref(), derive_seed(cfg.study.seed, "deployment", 0))?;
            let clf = perception_classifier(&cfg.study.perception, &cfg.study.sim)?;
            let output = run_study(&cfg.study, &set, &clf)?;
            set.write(&out.join("profiles"))?;
            write(&out.join("schedule.json"), serde_json::to_string_pretty(&output.schedule).map_err(Error::from)?)?;
            let mut reports = Vec::with_capacity(output.sessions.len());
            for (i, session) in output.sessions.iter().enumerate() {
                let dir = out.join("sessions").join(format!("p{i:02}"));
                write(&dir.join("report.json"), session.report.to_json()?)?;
                for trace in &session.traces {
                    write(&dir.join("trials").join(format!("{:02}.jsonl", trace.trial)), trace.to_jsonl())?;
                }
                reports.push(session.report.clone());
            }
            write_study(&out, &output.report, &reports)?;
            print_summary(&output.report, &out);
        }
        Command::Analyze { sessions } => {
            let mut reports = Vec::new();
            for entry in walkdir::WalkDir::new(&sessions).sort_by_file_name() {
                let entry = entry.map_err(|e| CliError::Usage(format!("{}: {e}", sessions.display())))?;
                if entry.file_name() != "report.json" {
                    continue;
                }
                let path = entry.path();
                let text = fs::read_to_string(path).map_err(io(path))?;
                let report: SessionReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                reports.push(report);
            }
            let report = analyze(&reports)?;
            write_study(&out, &report, &reports)?;
            print_summary(&report, &out);
        }
        Command::Serve {
            addr,
            models,
            pace,
            block_pause,
        } => {
            if let Some(s) = seed {
                cfg.study.seed = s;
            }
            if !(pace.is_finite() && pace >= 0.0 && block_pause.is_finite() && block_pause >= 0.0) {
                return Err(CliError::Usage("--pace and --block-pause must be >= 0".into()));
            }
            let study = cfg.study.clone();
            let set = deployment(&cfg, models.as_deref(), derive_seed(study.seed, "deployment", 0))?;
            let clf = perception_classifier(&study.perception, &study.sim)?;
            let state = service_state(&study, set, clf, &out, pace, block_pause)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(format!("tokio runtime: {e}")))?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| CliError::Usage(format!("bind {addr}: {e}")))?;
                println!("{}", json!({ "listening": listener.local_addr().map(|a| a.to_string()).unwrap_or(addr), "store": out.join("sessions") }));
                axum::serve(listener, router(state))
                    .await
                    .map_err(|e| CliError::Usage(format!("server: {e}")))
            })?;
        }
    }
    Ok(())
}

fn service_state(
    study: &carefulbot::experiment::StudyConfig,
    set: DeploymentSet,
    clf: ClassifierModel,
    out: &Path,
    pace: f64,
    block_pause: f64,
) -> Result<AppState> {
    let schedule = make_schedule(
        &set.ids(CarefulnessClass::Careful),
        &set.ids(CarefulnessClass::NotCareful),
        derive_seed(study.seed, "schedule", 0),
    )?;
    let h = study.sim.handover_point;
    let rate = study.sim.tick_rate;
    let setup = StudySetup {
        schedule,
        profiles: Arc::new(set),
        sim: study.sim.clone(),
        classifier: Arc::new(clf),
        calibration: Calibration {
            origin_px: [400.0, 300.0],
            origin_m: [h.x, h.y],
            meters_per_px: 0.001,
            table_height: h.z,
        },
        block_pause_ticks: (block_pause * rate).round() as usize,
    };
    Ok(AppState::new(ServiceConfig {
        setup: Arc::new(setup),
        study: study.clone(),
        store: SessionStore::new(out.join("sessions"))?,
        tick_interval: Duration::from_secs_f64((pace / rate).max(1e-3)),
    }))
}

fn write_study(out: &Path, report: &StudyReport, sessions: &[SessionReport]) -> Result<()> {
    write(&out.join("study_report.json"), report.to_json()?)?;
    write(&out.join("study_report.md"), study_markdown(report))?;
    write(&out.join("trials.csv"), trial_rows_csv(sessions)?)?;
    Ok(())
}

fn print_summary(report: &StudyReport, out: &Path) {
    let d = &report.effects.reach_duration;
    let s = &report.effects.reach_median_speed;
    println!(
        "{}",
        json!({
            "participants": report.n_participants,
            "accuracy": report.accuracy_percent,
            "duration_effect": { "estimate": d.estimate, "p": d.p },
            "speed_effect": { "estimate": s.estimate, "p": s.p },
            "report": out.join("study_report.json"),
        })
    );
}
