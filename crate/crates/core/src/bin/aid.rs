use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use aid_tpr::analysis::ForestConfig;
use aid_tpr::config::Settings;
use aid_tpr::run::{self, EvalRequest, Which};
use aid_tpr::sar::{generate_episode, read_word_list, word_sets_for, Split};
use aid_tpr::train::{mean_std, EvalPoint};
use aid_tpr::verify::full_suite;
use aid_tpr::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aid", version, about = "AID + fast-weight memory on systematic associative recall")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Settings shared by every command that builds an experiment. Each flag
/// overrides the same key in `--config`.
#[derive(Args, Default)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["desk", "full"])]
    scale: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    n_pairs: Option<String>,
    #[arg(long)]
    n_inputs: Option<String>,
    #[arg(long)]
    n_iter: Option<String>,
    #[arg(long)]
    n_iter_test: Option<String>,
    #[arg(long, value_parser = ["true", "false"])]
    use_aid: Option<String>,
    #[arg(long)]
    no_query_residual: bool,
    #[arg(long)]
    no_final_concat: bool,
    #[arg(long, value_parser = ["elu", "none", "relu"])]
    attn_activation: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
    #[arg(long)]
    eval_episodes: Option<String>,
    #[arg(long)]
    grad_clip: Option<String>,
    /// A count (`5` = seeds 0..5) or a list (`1,4,9`).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    word_seed: Option<String>,
    /// Output root; defaults to $AID_OUT_DIR or `out`.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    run_name: Option<String>,
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long, value_parser = ["f32", "f64"])]
    precision: Option<String>,
}

impl Common {
    fn settings(&self, default_name: Option<&str>) -> Result<Settings> {
        let mut flags: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                flags.push((k.to_string(), v.clone()));
            }
        };
        put("scale", &self.scale);
        put("p", &self.p);
        put("n_pairs", &self.n_pairs);
        put("n_inputs", &self.n_inputs);
        put("n_iter", &self.n_iter);
        put("n_iter_test", &self.n_iter_test);
        put("use_aid", &self.use_aid);
        put("attn_activation", &self.attn_activation);
        put("iters", &self.iters);
        put("batch", &self.batch);
        put("lr", &self.lr);
        put("eval_every", &self.eval_every);
        put("eval_episodes", &self.eval_episodes);
        put("grad_clip", &self.grad_clip);
        put("seeds", &self.seeds);
        put("word_seed", &self.word_seed);
        put("out", &self.out);
        put("run_name", &self.run_name);
        put("jobs", &self.jobs);
        put("precision", &self.precision);
        if self.no_query_residual {
            flags.push(("no_query_residual".into(), "true".into()));
        }
        if self.no_final_concat {
            flags.push(("no_final_concat".into(), "true".into()));
        }
        let file = self.config.as_ref().map(std::fs::read_to_string).transpose()?;
        if let Some(name) = default_name {
            let in_file = file.as_deref().map(aid_tpr::config::parse_config).transpose()?.is_some_and(|m| m.contains_key("run_name"));
            if self.run_name.is_none() && !in_file {
                flags.push(("run_name".into(), name.to_string()));
            }
        }
        Settings::resolve(file.as_deref(), &flags)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write episodes as JSON lines.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["train", "eval"], default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Word list (one token per line) used to spell out pairs.
        #[arg(long)]
        words: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train every seed of a run.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Accuracy of a trained seed directory on unseen combinations.
    Eval {
        /// Seed directory `<out>/<run>/<seed>`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        best: bool,
        #[arg(long)]
        n_iter_test: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        ablate_memory: bool,
    },
    /// Block-level DCI of the encoder components.
    Dci {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
    },
    /// Role / unbinding-operator cosine similarities.
    Ortho {
        #[arg(long)]
        run: PathBuf,
        /// Fixed y word id; defaults to the first word of Y2.
        #[arg(long)]
        y: Option<usize>,
        #[arg(long, default_value_t = 10)]
        n_x: usize,
    },
    /// Finite-difference checks of every primitive and the full model.
    Gradcheck {
        #[arg(long, value_parser = ["f64"], default_value = "f64")]
        precision: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// One run per value of a setting.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["p", "n_inputs", "n-inputs", "n_iter", "n-iter", "n_pairs", "n-pairs"])]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Train with AID components switched off.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
}

fn progress(seed: u64, p: &EvalPoint) {
    eprintln!("seed={seed} iter={} loss={:.5} eval_acc={:.4}", p.iter, p.loss, p.eval_acc);
}

fn train_and_report(s: &Settings) -> Result<()> {
    let outcomes = run::train_settings(s, &progress)?;
    let finals: Vec<f64> = outcomes.iter().filter_map(|o| o.metrics.final_acc()).collect();
    for o in &outcomes {
        println!("{} seed={} final_acc={:.4}", o.dir.display(), o.seed, o.metrics.final_acc().unwrap_or(f64::NAN));
    }
    let (m, sd) = mean_std(&finals);
    println!("run={} seeds={} final_acc_mean={m:.4} final_acc_std={sd:.4}", s.run_name, finals.len());
    Ok(())
}

fn execute(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Gen { common, split, count, seed, words, output } => {
            let s = common.settings(None)?;
            let ws = word_sets_for(&s.exp.sar)?;
            let split = if split == "eval" { Split::Eval } else { Split::Train };
            let vocab = words.as_deref().map(read_word_list).transpose()?;
            if let Some(v) = &vocab {
                if v.len() < ws.n_words() {
                    return Err(Error::Config(format!("word list has {} tokens, the task needs {}", v.len(), ws.n_words())));
                }
            }
            let mut out: Box<dyn Write> = match output {
                Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            for i in 0..count {
                let ep = generate_episode(&ws, &s.exp.sar, split, seed, i)?;
                let mut rec = serde_json::to_value(&ep)?;
                if let Some(v) = &vocab {
                    let spelled: Vec<[&str; 2]> = ep.discovery.iter().map(|&(x, y)| [v[x].as_str(), v[y].as_str()]).collect();
                    rec["pair_words"] = serde_json::to_value(spelled)?;
                }
                writeln!(out, "{rec}")?;
            }
            out.flush()?;
        }
        Cmd::Train { common } => train_and_report(&common.settings(None)?)?,
        Cmd::Ablate { common } => {
            let s = common.settings(Some("ablate"))?;
            let a = &s.exp.model.aid_enc;
            println!(
                "ablation query_residual={} final_concat={} attn_activation={}",
                a.use_query_residual, a.use_final_concat, a.attn_activation
            );
            train_and_report(&s)?;
        }
        Cmd::Sweep { common, param, values } => {
            let base = common.settings(Some("sweep"))?;
            for s in run::sweep_settings(&base, &param, &values)? {
                train_and_report(&s)?;
            }
        }
        Cmd::Eval { run: dir, best, n_iter_test, episodes, ablate_memory } => {
            let which = if best { Which::Best } else { Which::Final };
            let acc = run::eval_run(&dir, EvalRequest { which, n_iter_test, episodes, ablate_memory })?;
            println!("eval_acc={acc:.6}");
        }
        Cmd::Dci { run: dir, episodes, trees } => {
            let forest = ForestConfig { n_trees: trees, ..ForestConfig::default() };
            let (s, _) = run::dci_run(&dir, episodes, forest)?;
            println!("D={:.4} C={:.4} I={:.4}", s.d, s.c, s.i);
        }
        Cmd::Ortho { run: dir, y, n_x } => {
            let r = run::ortho_run(&dir, y, n_x)?;
            println!(
                "y={} mean_offdiag_role_role={:.4} mean_diag_role_unbind={:.4} mean_offdiag_role_unbind={:.4}",
                r.y, r.mean_offdiag_role_role, r.mean_diag_role_unbind, r.mean_offdiag_role_unbind
            );
        }
        Cmd::Gradcheck { precision: _, seed } => {
            let results = full_suite(seed)?;
            let mut ok = true;
            for r in &results {
                let verdict = if r.pass() { "PASS" } else { "FAIL" };
                println!("{verdict} {:<34} max_rel_err={:.3e} tol={:.0e}", r.name, r.report.max_rel_err, r.tol);
                ok &= r.pass();
            }
            let worst = results.iter().map(|r| r.report.max_rel_err).fold(0.0, f64::max);
            println!("{} max_rel_err={worst:.3e} checks={}", if ok { "PASS" } else { "FAIL" }, results.len());
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} msg={msg}", e.kind());
            ExitCode::from(1)
        }
    }
}
