use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use essg_core::actionspace::{ActionVariant, StageMask};
use essg_core::env::EnvConfig;
use essg_core::expert::{generate_dataset, read_jsonl, write_jsonl};
use essg_core::harness::{evaluate, window_stats, write_trajectories, EvalPolicy, EvalReport};
use essg_core::policynet::PolicyParams;
use essg_core::trainer::{
    build_scenes, il_pretrain, read_block_log, scene_contexts, train_with_progress, IlConfig, RunConfig,
};

#[derive(Parser)]
#[command(name = "essg", version, about = "Embodied scene-graph exploration lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p).with_context(|| format!("reading config {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write generated scenes as JSON.
    GenScenes {
        #[command(flatten)]
        common: Common,
        /// Number of consecutive scene seeds starting at --seed. Without it
        /// the training and evaluation scenes of the config are written.
        #[arg(long)]
        count: Option<u64>,
    },
    /// Write expert demonstrations for the training scenes as JSONL.
    GenExpert {
        #[command(flatten)]
        common: Common,
        /// Demonstrations per scene; defaults to the `il_starts` key.
        #[arg(long)]
        per_scene: Option<usize>,
    },
    /// Behaviour-clone a 16-action policy on expert demonstrations.
    PretrainIl {
        #[command(flatten)]
        common: Common,
        /// Demonstration JSONL; generated from the config when absent.
        #[arg(long)]
        demos: Option<PathBuf>,
    },
    /// Run the training block loop.
    Train {
        #[command(flatten)]
        common: Common,
        /// Suppress per-block progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a checkpoint (or the random policy) on the evaluation scenes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "random")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        random: bool,
        /// Evaluation variant and depth for --random.
        #[arg(long, default_value = "sh16")]
        variant: String,
        #[arg(long)]
        depth: bool,
    },
    /// Print the tuning objective over the last 50 blocks of a training log.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
    },
    /// Write per-episode pose lists from an evaluation report.
    ExportTraj {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report: PathBuf,
    },
}

fn env_for(policy: &PolicyParams, cfg: &RunConfig) -> EnvConfig {
    let l = &policy.config.layout;
    EnvConfig { variant: policy.config.variant, depth: l.depth, slots: l.slots, ..cfg.env_config() }
}

fn full_masks(env: &EnvConfig) -> Vec<Vec<bool>> {
    let spec = env.actions();
    StageMask::full(&spec).head_masks(&spec)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenScenes { common, count } => {
            let cfg = common.run_config()?;
            let seeds: Vec<u64> = match count {
                Some(n) => {
                    let s = common.seed.unwrap_or(1);
                    (s..s + n).collect()
                }
                None => cfg.train_scenes.iter().chain(&cfg.eval_scenes).copied().collect(),
            };
            let out = common.out_dir()?;
            for scene in build_scenes(&seeds)? {
                let path = out.join(format!("{}.json", scene.scene_id));
                std::fs::write(&path, scene.to_json()?)?;
                println!("{}", path.display());
            }
        }
        Cmd::GenExpert { common, per_scene } => {
            let cfg = common.run_config()?;
            let scenes = build_scenes(&cfg.train_scenes)?;
            let demos = generate_dataset(&scenes, per_scene.unwrap_or(cfg.il_starts), &cfg.expert, cfg.seed)?;
            let path = common.out_dir()?.join("demos.jsonl");
            write_jsonl(&path, &demos)?;
            let good = demos.iter().filter(|d| d.coverage >= cfg.expert.coverage_target).count();
            println!("{} demonstrations, {good} at target coverage -> {}", demos.len(), path.display());
        }
        Cmd::PretrainIl { common, demos } => {
            let cfg = common.run_config()?;
            let scenes = build_scenes(&cfg.train_scenes)?;
            let demos = match demos {
                Some(p) => read_jsonl(&p).with_context(|| format!("reading {}", p.display()))?,
                None => generate_dataset(&scenes, cfg.il_starts, &cfg.expert, cfg.seed)?,
            };
            let env = EnvConfig { variant: ActionVariant::Sh16, ..cfg.env_config() };
            let ctxs = scene_contexts(&scenes, &env)?.into_iter().map(|c| (c.scene().scene_id.clone(), c)).collect();
            let mut params = PolicyParams::init(cfg.policy_config(&env), cfg.seed);
            let il_cfg = IlConfig { seed: cfg.seed, ..cfg.il_cfg.clone() };
            let rep = il_pretrain(&mut params, &demos, &ctxs, &env, &il_cfg)?;
            let path = common.out_dir()?.join("il_policy.json");
            params.save(&path)?;
            println!(
                "{} sequences, {} samples, loss {:.4}, accuracy {:.4} -> {}",
                rep.sequences,
                rep.samples,
                rep.final_loss,
                rep.accuracy,
                path.display()
            );
        }
        Cmd::Train { common, quiet } => {
            let cfg = common.run_config()?;
            let out = common.out_dir()?;
            let res = train_with_progress(&cfg, Some(out), |r, e| {
                if !quiet {
                    eprintln!(
                        "block {:>5} stage {} node_recall {:.3} return {:.3}",
                        r.block, r.stage, r.node_recall, r.episodic_return
                    );
                }
                if let Some(e) = e {
                    eprintln!("  eval @{}: node_recall {:.3} +- {:.3}", e.block, e.node_recall, e.node_recall_std);
                }
            })?;
            println!(
                "{} blocks, {} evaluations, {} checkpoints -> {}",
                res.rows.len(),
                res.evals.len(),
                res.checkpoints.len(),
                out.display()
            );
        }
        Cmd::Eval { common, checkpoint, random, variant, depth } => {
            let cfg = common.run_config()?;
            let seed = common.seed.unwrap_or(cfg.eval_seed);
            let (report, env) = if random {
                let env = EnvConfig { variant: variant.parse()?, depth, ..cfg.env_config() };
                let ctx = scene_contexts(&build_scenes(&cfg.eval_scenes)?, &env)?;
                (evaluate(EvalPolicy::Random, &ctx, &env, &full_masks(&env), cfg.eval_episodes, seed)?, env)
            } else {
                let Some(ck) = checkpoint else { bail!("--checkpoint is required without --random") };
                let p = PolicyParams::load(&ck).with_context(|| format!("loading {}", ck.display()))?;
                let env = env_for(&p, &cfg);
                let ctx = scene_contexts(&build_scenes(&cfg.eval_scenes)?, &env)?;
                (evaluate(EvalPolicy::Greedy(&p), &ctx, &env, &full_masks(&env), cfg.eval_episodes, seed)?, env)
            };
            let path = common.out_dir()?.join("eval_report.json");
            report.save(&path)?;
            let a = &report.aggregate;
            println!(
                "{} {} episodes: node_recall {:.4} +- {:.4}, move_success_rate {}, episode_length {:.2} -> {}",
                env.variant.name(),
                a.episodes,
                a.node_recall.mean,
                a.node_recall.std,
                a.move_success_rate.map_or("n/a".to_string(), |m| format!("{m:.4}")),
                a.episode_length.mean,
                path.display()
            );
        }
        Cmd::Score { common, log } => {
            let rows = read_block_log(&log).with_context(|| format!("reading {}", log.display()))?;
            if rows.is_empty() {
                bail!("{} has no rows", log.display());
            }
            let w = window_stats(&rows);
            let j = w.objective();
            if common.config.is_some() || common.out != Path::new(".") {
                std::fs::write(
                    common.out_dir()?.join("score.json"),
                    serde_json::to_string_pretty(&serde_json::json!({"window": w, "objective": j}))?,
                )?;
            }
            println!("{j}");
        }
        Cmd::ExportTraj { common, report } => {
            let rep = EvalReport::load(&report).with_context(|| format!("reading {}", report.display()))?;
            let files = write_trajectories(common.out_dir()?, &rep)?;
            println!("{} trajectories -> {}", files.len(), common.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
