//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use fluxmp_core::baselines::{brw_balance_batch, noise_benchmark, NoiseBenchConfig};
use fluxmp_core::metrics::{evaluate, pearson_with_p, Pearson};
use fluxmp_core::mpo::run_mpo_batch_traced;
use fluxmp_core::nn::Checkpoint;
use fluxmp_core::synth::{generate_test_graph, simulate_dataset, DatasetOptions, GraphSpec};
use fluxmp_core::trainer::{predict, train, EpochRecord, StopReason, TrainData};
use fluxmp_core::{DirectedFactorGraph, Error, FluxMatrix, Norm, DEFAULT_CYCLE_CAP};
use toml::Value;

use crate::config::{load_config, parse_assignment, GraphShape, Override, RunConfig};
use crate::io::{
    check_dataset_names, fmt_f64, read_dataset, read_graph, read_graph_flux, write_csv,
    write_dataset, write_flux_csv, write_text,
};
use crate::{
    Arch, Cli, CliError, CliResult, Command, Eta, EvaluateArgs, Method, MpoArgs, Nlf, Rules,
    SplitName,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const PRED_FILE: &str = "flux_pred.csv";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_CONFIG_FILE: &str = "run_config.toml";

struct Overrides(Vec<Override>);

impl Overrides {
    fn put(&mut self, key: &str, value: Option<impl Into<Value>>) {
        if let Some(v) = value {
            self.0.push((key.to_string(), v.into()));
        }
    }

    fn path(&mut self, key: &str, value: &Option<PathBuf>) {
        self.put(key, value.as_ref().map(|p| p.to_string_lossy().into_owned()));
    }

    fn int(&mut self, key: &str, value: Option<usize>) -> CliResult<()> {
        match value {
            Some(v) => {
                let v = i64::try_from(v)
                    .map_err(|_| CliError::Usage(format!("{key}: {v} is too large")))?;
                self.put(key, Some(v));
                Ok(())
            }
            None => Ok(()),
        }
    }

    fn mpo(&mut self, a: &MpoArgs) -> CliResult<()> {
        self.put("mpo.beta", a.beta);
        self.put("mpo.alpha", a.alpha);
        self.int("mpo.max_epochs", a.max_epochs)?;
        self.put(
            "mpo.eta_mode",
            a.eta.map(|e| match e {
                Eta::Uniform => "uniform",
                Eta::ImbalanceWeighted => "imbalance_weighted",
            }),
        );
        if let Some(r) = a.rules {
            let (v, f, s) = match r {
                Rules::Default => ("current_weight", "rectified", "backtracking"),
                Rules::Reference => ("blended", "absolute", "fixed"),
            };
            self.put("mpo.variable_messages", Some(v));
            self.put("mpo.factor_messages", Some(f));
            self.put("mpo.step_control", Some(s));
        }
        Ok(())
    }

    fn graph_spec(&mut self, text: &Option<String>) -> CliResult<()> {
        if let Some(t) = text {
            let v = parse_list::<usize>(t, "--graph-spec")?;
            if v.len() != 3 {
                return Err(CliError::Usage(format!(
                    "--graph-spec wants factors,variables,cycles, got `{t}`"
                )));
            }
            self.int("generator.graph.factors", Some(v[0]))?;
            self.int("generator.graph.variables", Some(v[1]))?;
            self.int("generator.graph.cycles", Some(v[2]))?;
        }
        Ok(())
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("{flag}: cannot parse `{s}` in `{text}`")))
        })
        .collect()
}

fn float_array(values: Vec<f64>) -> Value {
    Value::Array(values.into_iter().map(Value::Float).collect())
}

fn command_overrides(cmd: &Command, ov: &mut Overrides) -> CliResult<()> {
    match cmd {
        Command::Validate(a) => {
            ov.path("paths.graph", &a.graph);
            ov.path("paths.flux", &a.flux);
        }
        Command::Simulate(a) => {
            ov.path("paths.graph", &a.graph);
            ov.graph_spec(&a.graph_spec)?;
            if let Some(f) = &a.features {
                let v = parse_list::<usize>(f, "--features")?;
                if v.len() != 2 {
                    return Err(CliError::Usage(format!("--features wants min,max, got `{f}`")));
                }
                ov.int("generator.min_features", Some(v[0]))?;
                ov.int("generator.max_features", Some(v[1]))?;
            }
            ov.int("generator.samples", a.samples)?;
            ov.put(
                "generator.nlf",
                a.nlf.map(|n| match n {
                    Nlf::One => "nlf1",
                    Nlf::Two => "nlf2",
                }),
            );
            ov.put("generator.sparsity", a.sparsity);
            ov.put("generator.min_flux", a.min_flux);
            if let Some(s) = &a.split {
                ov.put("generator.split", Some(float_array(parse_list(s, "--split")?)));
            }
            ov.mpo(&a.mpo)?;
            ov.path("paths.out", &a.out);
        }
        Command::Balance(a) => {
            ov.path("paths.graph", &a.graph);
            ov.path("paths.flux", &a.flux);
            ov.mpo(&a.mpo)?;
            ov.int("brw.epochs", a.epochs)?;
            ov.path("paths.out", &a.out);
            ov.path("paths.trace", &a.trace);
        }
        Command::Train(a) => {
            ov.path("paths.dataset", &a.dataset);
            ov.path("paths.out", &a.out);
            ov.int("train.max_epochs", a.max_epochs)?;
            ov.put("train.lr", a.lr);
            ov.put("train.lambda_anchor", a.lambda_anchor);
            ov.put("train.lambda_l2", a.lambda_l2);
            ov.put("train.lambda_gate", a.lambda_gate);
            ov.int("train.mpo_every", a.mpo_every)?;
            ov.int("train.patience", a.patience)?;
            if let Some(arch) = a.arch {
                let (variant, activation) = match arch {
                    Arch::Main => ("main", "leaky_relu"),
                    Arch::Appendix => ("appendix", "tanhshrink"),
                };
                ov.put("train.arch.variant", Some(variant));
                ov.put("train.arch.activation", Some(activation));
            }
            ov.put("train.arch.dropout_rate", a.dropout);
        }
        Command::Predict(a) => {
            ov.path("paths.checkpoint", &a.checkpoint);
            ov.path("paths.dataset", &a.dataset);
            ov.path("paths.out", &a.out);
        }
        Command::Evaluate(a) => {
            ov.path("paths.dataset", &a.dataset);
            ov.path("paths.graph", &a.graph);
            ov.path("paths.pred", &a.pred);
            ov.path("paths.truth", &a.truth);
            ov.path("paths.out", &a.out);
        }
        Command::NoiseBench(a) => {
            ov.path("paths.graph", &a.graph);
            ov.graph_spec(&a.graph_spec)?;
            if let Some(g) = &a.gammas {
                ov.put("noise_bench.gammas", Some(float_array(parse_list(g, "--gammas")?)));
            }
            ov.int("noise_bench.seeds", a.seeds)?;
            ov.int("brw.epochs", a.brw_epochs)?;
            ov.mpo(&a.mpo)?;
            ov.path("paths.out", &a.out);
        }
    }
    Ok(())
}

/// Resolves the configuration and runs the parsed command.
pub fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut ov = Overrides(Vec::new());
    for s in &cli.set {
        ov.0.push(parse_assignment(s)?);
    }
    if let Some(seed) = cli.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| CliError::Usage(format!("--seed {seed} is too large")))?;
        ov.put("seed", Some(seed));
    }
    command_overrides(&cli.command, &mut ov)?;
    let cfg = load_config(cli.config.as_deref(), &ov.0)?;
    log::info!("resolved configuration:\n{}", cfg.to_toml());

    // Output is buffered so the command can run inside a worker pool.
    let mut buf: Vec<u8> = Vec::new();
    let result = match cli.threads.or(cfg.threads) {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| run(&cli.command, &cfg, &mut buf))
        }
        None => run(&cli.command, &cfg, &mut buf),
    };
    out.write_all(&buf).map_err(|e| CliError::file("<stdout>", e))?;
    result
}

fn run(cmd: &Command, cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Validate(_) => validate(cfg, out),
        Command::Simulate(_) => simulate(cfg, out),
        Command::Balance(a) => balance(a.method.unwrap_or(Method::Mpo), cfg, out),
        Command::Train(_) => train_cmd(cfg, out),
        Command::Predict(_) => predict_cmd(cfg, out),
        Command::Evaluate(a) => evaluate_cmd(a, cfg, out),
        Command::NoiseBench(_) => noise_bench(cfg, out),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing {flag} (or the matching paths key)")))
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> CliResult<()> {
    writeln!(out, "{text}").map_err(|e| CliError::file("<stdout>", e))
}

/// A graph file or a generated graph, never both.
fn graph_source(cfg: &RunConfig) -> CliResult<(DirectedFactorGraph, Option<GraphShape>)> {
    match (&cfg.paths.graph, cfg.generator.graph) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "give either --graph or --graph-spec, not both".into(),
        )),
        (Some(p), None) => Ok((read_graph(p)?, None)),
        (None, Some(shape)) => {
            let spec = GraphSpec::new(shape.factors, shape.variables, shape.cycles, cfg.seed)
                .with_features(cfg.generator.min_features, cfg.generator.max_features);
            Ok((generate_test_graph(&spec)?, Some(shape)))
        }
        (None, None) => Err(CliError::Usage("missing --graph or --graph-spec".into())),
    }
}

fn validate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let path = required(&cfg.paths.graph, "--graph")?;
    let g = read_graph(path)?;
    let cycles = g.count_cycles(DEFAULT_CYCLE_CAP);
    say(out, format_args!("factors: {}", g.n_factors()))?;
    say(out, format_args!("variables: {}", g.n_variables()))?;
    say(out, format_args!("edges: {}", g.n_edges()))?;
    let bound = if cycles.capped { ">= " } else { "" };
    say(out, format_args!("cycles: {bound}{}", cycles.count))?;
    if let Some(fp) = &cfg.paths.flux {
        let flux = read_graph_flux(fp, &g)?;
        let l1: Vec<f64> = flux
            .rows_iter()
            .map(|r| g.imbalance_loss(r, Norm::L1))
            .collect::<Result<_, Error>>()?;
        let max = l1.iter().copied().fold(0.0, f64::max);
        let mean = if l1.is_empty() { 0.0 } else { l1.iter().sum::<f64>() / l1.len() as f64 };
        say(out, format_args!("flux rows: {}", flux.nrows()))?;
        say(out, format_args!("l1 imbalance mean: {}", fmt_f64(mean)))?;
        say(out, format_args!("l1 imbalance max: {}", fmt_f64(max)))?;
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let dir = required(&cfg.paths.out, "--out")?;
    let (g, shape) = graph_source(cfg)?;
    check_dataset_names(&g)?;
    let gen = &cfg.generator;
    let opts = DatasetOptions {
        samples: gen.samples,
        kind: gen.nlf,
        seed: cfg.seed,
        sparsity: gen.sparsity,
        fractions: gen.split,
        mpo: cfg.mpo,
        min_flux: gen.min_flux,
    };
    let ds = simulate_dataset(&g, &opts)?;
    write_dataset(dir, &ds, gen.min_flux, gen.split, shape)?;
    say(
        out,
        format_args!(
            "wrote {} samples over {} variables to {} (max truth L1 imbalance {})",
            ds.n_samples(),
            g.n_variables(),
            dir.display(),
            fmt_f64(ds.max_truth_imbalance())
        ),
    )
}

fn default_trace_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_trace.csv"))
}

fn balance(method: Method, cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let g = read_graph(required(&cfg.paths.graph, "--graph")?)?;
    let flux = read_graph_flux(required(&cfg.paths.flux, "--flux")?, &g)?;
    let dest = required(&cfg.paths.out, "--out")?;
    let names = g.variable_names();
    let balanced = match method {
        Method::Mpo => {
            let (balanced, traces) = run_mpo_batch_traced(&g, &flux, &cfg.mpo)?;
            let mut rows = Vec::new();
            for (j, t) in traces.iter().enumerate() {
                let start = g.imbalance_loss(flux.row(j), Norm::L1)?;
                rows.push(vec![j.to_string(), "0".into(), fmt_f64(start)]);
                for (e, l1) in t.l1_imbalance.iter().enumerate() {
                    rows.push(vec![j.to_string(), (e + 1).to_string(), fmt_f64(*l1)]);
                }
            }
            let trace_path = cfg.paths.trace.clone().unwrap_or_else(|| default_trace_path(dest));
            let header: Vec<String> =
                ["sample", "epoch", "l1_imbalance"].iter().map(|s| s.to_string()).collect();
            write_csv(&trace_path, &header, &rows)?;
            let stuck = traces.iter().filter(|t| !t.converged).count();
            if stuck > 0 {
                log::warn!("{stuck} of {} rows did not reach alpha", traces.len());
            }
            say(out, format_args!("not converged: {stuck}"))?;
            balanced
        }
        Method::Brw => brw_balance_batch(&g, &flux, cfg.brw.epochs)?,
    };
    write_flux_csv(dest, &balanced, &names)?;
    let max = balanced
        .rows_iter()
        .map(|r| g.imbalance_loss(r, Norm::L1))
        .collect::<Result<Vec<f64>, Error>>()?
        .into_iter()
        .fold(0.0, f64::max);
    say(
        out,
        format_args!("balanced {} rows, max L1 imbalance {}", balanced.nrows(), fmt_f64(max)),
    )
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn history_row(r: &EpochRecord) -> Vec<String> {
    vec![
        r.epoch.to_string(),
        fmt_f64(r.train_coherency),
        fmt_f64(r.train_coherency_per_sample),
        opt_cell(r.val_coherency),
        opt_cell(r.val_coherency_per_sample),
        fmt_f64(r.parsimony),
        fmt_f64(r.anchor),
        fmt_f64(r.zero_guard),
        fmt_f64(r.total),
        fmt_f64(r.mean_pred_norm),
        opt_cell(r.val_cosine),
    ]
}

const HISTORY_HEADER: [&str; 11] = [
    "epoch",
    "train_coherency",
    "train_coherency_per_sample",
    "val_coherency",
    "val_coherency_per_sample",
    "parsimony",
    "anchor",
    "zero_guard",
    "total",
    "mean_pred_norm",
    "val_cosine",
];

fn train_cmd(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let ds = read_dataset(required(&cfg.paths.dataset, "--dataset")?)?;
    let dir = required(&cfg.paths.out, "--out")?;
    let split = ds.split(cfg.seed, cfg.generator.split)?;
    let train_obs = ds.observations.select_rows(&split.train);
    let val_obs = ds.observations.select_rows(&split.val);
    let val_truth = ds.truth.as_ref().map(|t| t.select_rows(&split.val));
    let has_val = !split.val.is_empty();
    let data = TrainData {
        train: &train_obs,
        val: has_val.then_some(&val_obs),
        val_truth: if has_val { val_truth.as_ref() } else { None },
    };
    let outcome = train(&ds.graph, data, &cfg.train)?;

    std::fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;

    outcome.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    let header: Vec<String> = HISTORY_HEADER.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = outcome.history.records.iter().map(history_row).collect();
    write_csv(&dir.join(HISTORY_FILE), &header, &rows)?;
    let pred = predict(&outcome.checkpoint.ensemble, &ds.observations)?;
    write_flux_csv(&dir.join(PRED_FILE), &pred, &ds.graph.variable_names())?;
    write_text(&dir.join(RUN_CONFIG_FILE), &cfg.to_toml())?;

    let stop = serde_json::to_value(outcome.stop)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    say(
        out,
        format_args!(
            "trained {} epochs, best epoch {}, stop: {stop}",
            outcome.history.records.len(),
            outcome.best_epoch
        ),
    )?;
    if outcome.stop == StopReason::Diverged {
        return Err(Error::Diverged {
            context: "training".into(),
            epoch: outcome.history.records.len(),
        }
        .into());
    }
    Ok(())
}

fn predict_cmd(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let ckpt = Checkpoint::load(required(&cfg.paths.checkpoint, "--checkpoint")?)?;
    let ds = read_dataset(required(&cfg.paths.dataset, "--dataset")?)?;
    let dest = required(&cfg.paths.out, "--out")?;
    if ckpt.ensemble.nets.len() != ds.graph.n_variables() {
        return Err(CliError::Core(Error::ShapeMismatch {
            what: "checkpoint networks",
            expected: ds.graph.n_variables(),
            found: ckpt.ensemble.nets.len(),
        }));
    }
    let pred = predict(&ckpt.ensemble, &ds.observations)?;
    write_flux_csv(dest, &pred, &ds.graph.variable_names())?;
    say(out, format_args!("predicted {} rows", pred.nrows()))
}

fn evaluate_cmd(a: &EvaluateArgs, cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let pred_path = required(&cfg.paths.pred, "--pred")?;
    let dataset = match &cfg.paths.dataset {
        Some(d) => Some(read_dataset(d)?),
        None => None,
    };
    let g = match (&dataset, &cfg.paths.graph) {
        (Some(ds), _) => ds.graph.clone(),
        (None, Some(p)) => read_graph(p)?,
        (None, None) => return Err(CliError::Usage("missing --dataset or --graph".into())),
    };
    let pred = read_graph_flux(pred_path, &g)?;
    let truth = match (&cfg.paths.truth, &dataset) {
        (Some(p), _) => Some(read_graph_flux(p, &g)?),
        (None, Some(ds)) => ds.truth.clone(),
        (None, None) => None,
    };
    if let Some(t) = &truth {
        if t.nrows() != pred.nrows() {
            return Err(CliError::Core(Error::ShapeMismatch {
                what: "truth rows",
                expected: pred.nrows(),
                found: t.nrows(),
            }));
        }
    }
    let split = a.split.unwrap_or(if dataset.is_some() { SplitName::Test } else { SplitName::All });
    let rows: Option<Vec<usize>> = match split {
        SplitName::All => None,
        s => {
            let ds = dataset
                .as_ref()
                .ok_or_else(|| CliError::Usage("--split needs --dataset".into()))?;
            if pred.nrows() != ds.n_samples() {
                return Err(CliError::Core(Error::ShapeMismatch {
                    what: "prediction rows",
                    expected: ds.n_samples(),
                    found: pred.nrows(),
                }));
            }
            let sp = ds.split(cfg.seed, cfg.generator.split)?;
            Some(match s {
                SplitName::Train => sp.train,
                SplitName::Val => sp.val,
                _ => sp.test,
            })
        }
    };
    let pick = |m: &FluxMatrix| match &rows {
        Some(r) => m.select_rows(r),
        None => m.clone(),
    };
    let pred = pick(&pred);
    let truth = truth.as_ref().map(pick);
    let mut report = evaluate(&g, &pred, truth.as_ref())?;
    if let Some(var) = &a.pearson {
        let t = truth
            .as_ref()
            .ok_or_else(|| CliError::Usage("--pearson needs ground truth".into()))?;
        let col = g
            .variables()
            .iter()
            .position(|v| &v.name == var)
            .ok_or_else(|| CliError::Usage(format!("unknown variable `{var}`")))?;
        let (r, p) = pearson_with_p(&pred.column(col), &t.column(col))?;
        report.pearson = Some(Pearson { r, p });
    }
    let dest = cfg.paths.out.clone().unwrap_or_else(|| {
        pred_path
            .parent()
            .map(|p| p.join(REPORT_FILE))
            .unwrap_or_else(|| PathBuf::from(REPORT_FILE))
    });
    write_text(&dest, &report.to_json())?;
    let cos = report
        .rounded()
        .mean_cosine
        .map(|c| format!(", mean cosine {c}"))
        .unwrap_or_default();
    say(
        out,
        format_args!("evaluated {} rows{cos}, report at {}", report.n_samples, dest.display()),
    )
}

fn noise_bench(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let dest = required(&cfg.paths.out, "--out")?;
    let (g, _) = graph_source(cfg)?;
    let nb = NoiseBenchConfig {
        gammas: cfg.noise_bench.gammas.clone(),
        seeds: (0..cfg.noise_bench.seeds as u64).map(|i| cfg.seed.wrapping_add(i)).collect(),
        mpo: cfg.mpo,
        brw_epochs: cfg.brw.epochs,
        min_flux: cfg.generator.min_flux,
    };
    let trials = noise_benchmark(&g, &nb)?;
    let header: Vec<String> = ["gamma", "seed", "cos_noisy", "cos_mpo", "cos_brw"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = trials
        .iter()
        .map(|t| {
            vec![
                fmt_f64(t.gamma),
                t.seed.to_string(),
                fmt_f64(t.cos_noisy),
                fmt_f64(t.cos_mpo),
                fmt_f64(t.cos_brw),
            ]
        })
        .collect();
    write_csv(dest, &header, &rows)?;
    let wins = trials.iter().filter(|t| t.cos_mpo >= t.cos_brw).count();
    say(out, format_args!("MPO >= BRW in {wins} of {} trials", trials.len()))
}
