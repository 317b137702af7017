//! The `bartlab` command-line front end.
//!
//! Every subcommand writes its CSV / SVG outputs plus a `manifest.json`
//! into `--out` (default `$BARTLAB_OUT`, else `bartlab-out`). A
//! `--config FILE` of `key = value` lines supplies flags; flags given on the
//! command line win.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical or diagnostic failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;

use crate::compare::{prior_width_sweep, write_sweep_csv, BridgeConfig, SweepConfig, SweepMethod, SweepRow};
use crate::data::{load_csv, permute_conditions, save_csv, synth_george, SynthConfig};
use crate::infer::{
    fit_model, parameter_recovery, sbc, Design, Fit, RecoveryTruth, SamplerConfig, SbcOptions,
};
use crate::model::{BartModel, PriorSpec, SubjectParams};
use crate::plot::{Chart, Line, Ribbon};
use crate::simulate::{
    prior_predictive_flat, prior_predictive_hier, tail_sensitivity_sweep, write_hier_csv, write_summaries_csv,
    write_tail_csv, DesignMode, HierPredictive, PredictiveSummary, SimConfig,
};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bartlab", version, about = "Bayesian workflow for BART cognitive models")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Prior predictive check with or without the popping mechanism.
    PriorCheck(PriorCheckArgs),
    /// Prior predictive quantiles across prior widths.
    TailSweep(TailSweepArgs),
    /// Fit one model to a dataset.
    Fit(FitArgs),
    /// Bayes factors and PSIS-LOO across prior widths.
    Compare(CompareArgs),
    /// Shuffle trials across conditions.
    Permute(PermuteArgs),
    /// Generate the synthetic three-condition dataset.
    Synth(SynthArgs),
    /// Parameter recovery from simulated data.
    Recover(RecoverArgs),
    /// Simulation-based calibration.
    Sbc(SbcArgs),
}

#[derive(Debug, Args, Serialize)]
struct Common {
    /// Output directory.
    #[arg(long, env = "BARTLAB_OUT", default_value = "bartlab-out")]
    out: PathBuf,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Skip SVG output.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Debug, Args, Serialize)]
struct SamplerArgs {
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 4000)]
    warmup: usize,
    /// Retained draws per chain.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    thin: usize,
    #[arg(long, default_value_t = 1.05)]
    rhat: f64,
    #[arg(long, default_value_t = 100.0)]
    ess: f64,
}

impl SamplerArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_chains: self.chains,
            warmup: self.warmup,
            samples: self.samples,
            thin: self.thin,
            seed,
            rhat_threshold: self.rhat,
            ess_threshold: self.ess,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct PriorCheckArgs {
    #[arg(long, default_value = "flat")]
    model: BartModel,
    /// likelihood, experiment, or both.
    #[arg(long, default_value = "both")]
    design: String,
    #[arg(long, default_value_t = 10.0)]
    upper: f64,
    #[arg(long, default_value_t = 200)]
    n_sims: usize,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Pop probabilities.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.15,0.2")]
    p: Vec<f64>,
    /// Conditions for the hierarchical model.
    #[arg(long, default_value_t = 3)]
    conditions: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct TailSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,50")]
    uppers: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    n_sims: usize,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    p: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[arg(long, default_value = "hier")]
    model: BartModel,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    upper: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    uppers: Vec<f64>,
    /// bf, loo or both.
    #[arg(long, default_value = "both")]
    method: SweepMethod,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct PermuteArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// File name inside the output directory.
    #[arg(long, default_value = "permuted.csv")]
    name: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value = "synth.csv")]
    name: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct RecoverArgs {
    #[arg(long, default_value = "flat")]
    model: BartModel,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// True gamma_plus for the flat model (the hierarchical model uses the
    /// synthetic-data parameters).
    #[arg(long, default_value_t = 0.6)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 10.0)]
    upper: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args, Serialize)]
struct SbcArgs {
    #[arg(long, default_value = "flat")]
    model: BartModel,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 16)]
    bins: usize,
    #[arg(long, default_value_t = 1023)]
    max_draws: usize,
    /// Shift added to posterior draws before ranking (negative control).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    draw_offset: f64,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 10.0)]
    upper: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 4)]
    thin: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub versions: serde_json::Value,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Collects output files and writes the manifest last.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    svg: bool,
}

impl Outputs {
    fn new(common: &Common) -> Result<Self> {
        fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
        Ok(Outputs {
            dir: common.out.clone(),
            files: Vec::new(),
            svg: !common.no_svg,
        })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn chart(&mut self, name: &str, chart: &Chart) -> Result<()> {
        if !self.svg {
            return Ok(());
        }
        let svg = chart.to_svg();
        self.write(name, |w| w.write_all(svg.as_bytes()).map_err(|e| Error::io(name, e)))
    }

    fn finish(self, command: &Command, seed: u64, started: Instant) -> Result<()> {
        let manifest = RunManifest {
            command: command_name(command).to_string(),
            config: serde_json::to_value(command).map_err(|e| Error::Numerical(e.to_string()))?,
            seed,
            versions: serde_json::json!({ "bartlab": env!("CARGO_PKG_VERSION") }),
            outputs: self.files,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::PriorCheck(_) => "prior-check",
        Command::TailSweep(_) => "tail-sweep",
        Command::Fit(_) => "fit",
        Command::Compare(_) => "compare",
        Command::Permute(_) => "permute",
        Command::Synth(_) => "synth",
        Command::Recover(_) => "recover",
        Command::Sbc(_) => "sbc",
    }
}

/// Moves `--config FILE` (anywhere after the subcommand) into flags placed
/// right after the subcommand, so explicit flags override the file.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config: Option<PathBuf> = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let v = it.next().ok_or_else(|| Error::InvalidInput("--config needs a file".into()))?;
            config = Some(PathBuf::from(v));
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Csv {
            path: path.clone(),
            line: n as u64 + 1,
            message: "expected key = value".into(),
        })?;
        let key = key.trim().replace('_', "-");
        match value.trim() {
            "false" => {}
            "true" | "" => flags.push(OsString::from(format!("--{key}"))),
            v => {
                flags.push(OsString::from(format!("--{key}")));
                flags.push(OsString::from(v));
            }
        }
    }
    let at = rest.len().min(2);
    rest.splice(at..at, flags);
    Ok(rest)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let sub = args.get(1).map(|a| a.to_string_lossy().into_owned()).unwrap_or_default();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            print_usage(&sub);
            return EXIT_VALIDATION;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => {
                    print_usage(&sub);
                    EXIT_VALIDATION
                }
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                print_usage(&sub);
                EXIT_VALIDATION
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn print_usage(sub: &str) {
    let mut cmd = Cli::command();
    cmd.build();
    let usage = match cmd.find_subcommand_mut(sub) {
        Some(s) => s.render_usage(),
        None => cmd.render_usage(),
    };
    eprintln!("\n{usage}");
}

fn common(command: &Command) -> &Common {
    match command {
        Command::PriorCheck(a) => &a.common,
        Command::TailSweep(a) => &a.common,
        Command::Fit(a) => &a.common,
        Command::Compare(a) => &a.common,
        Command::Permute(a) => &a.common,
        Command::Synth(a) => &a.common,
        Command::Recover(a) => &a.common,
        Command::Sbc(a) => &a.common,
    }
}

fn run(command: &Command) -> Result<()> {
    let threads = common(command).threads;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(e.to_string()))?;
    pool.install(|| match command {
        Command::PriorCheck(a) => prior_check(command, a),
        Command::TailSweep(a) => tail_sweep(command, a),
        Command::Fit(a) => fit_cmd(command, a),
        Command::Compare(a) => compare(command, a),
        Command::Permute(a) => permute(command, a),
        Command::Synth(a) => synth(command, a),
        Command::Recover(a) => recover(command, a),
        Command::Sbc(a) => sbc_cmd(command, a),
    })
}

fn modes(design: &str) -> Result<Vec<DesignMode>> {
    match design {
        "both" => Ok(DesignMode::BOTH.to_vec()),
        other => Ok(vec![other.parse()?]),
    }
}

fn sim_config(n_sims: usize, trials: usize, p: &[f64], seed: u64) -> Result<SimConfig> {
    SimConfig {
        n_sims,
        trials_per_sim: trials,
        seed,
        ..SimConfig::default()
    }
    .with_pop_probs(p)
}

fn flat_chart(summaries: &[PredictiveSummary], mode: DesignMode, upper: f64) -> Chart {
    let x: Vec<f64> = summaries.iter().map(|s| s.p).collect();
    let q = |f: fn(&crate::simulate::Quantiles) -> f64| summaries.iter().map(|s| f(&s.quantiles)).collect::<Vec<_>>();
    Chart {
        title: format!("Prior predictive mean pumps ({mode}, U = {upper})"),
        x_label: "pop probability".into(),
        y_label: "mean pumps".into(),
        ribbons: vec![
            Ribbon {
                label: "95%".into(),
                x: x.clone(),
                lower: q(|q| q.q025),
                upper: q(|q| q.q975),
                center: None,
            },
            Ribbon {
                label: "50%".into(),
                x,
                lower: q(|q| q.q25),
                upper: q(|q| q.q75),
                center: Some(q(|q| q.q50)),
            },
        ],
        ..Chart::default()
    }
}

fn hier_chart(h: &HierPredictive) -> Chart {
    let mut x = Vec::new();
    let (mut lo, mut hi, mut mid, mut lo50, mut hi50) = (vec![], vec![], vec![], vec![], vec![]);
    for c in 1..h.n_conditions() {
        let q = crate::simulate::Quantiles::of(&h.mean_differences(c));
        x.push((c + 1) as f64);
        lo.push(q.q025);
        hi.push(q.q975);
        lo50.push(q.q25);
        hi50.push(q.q75);
        mid.push(q.q50);
    }
    Chart {
        title: format!("Condition differences in mean pumps ({}, U = {})", h.mode, h.upper),
        x_label: "condition (minus condition 1)".into(),
        y_label: "difference in mean pumps".into(),
        ribbons: vec![
            Ribbon {
                label: "95%".into(),
                x: x.clone(),
                lower: lo,
                upper: hi,
                center: None,
            },
            Ribbon {
                label: "50%".into(),
                x,
                lower: lo50,
                upper: hi50,
                center: Some(mid),
            },
        ],
        hlines: vec![0.0],
        ..Chart::default()
    }
}

fn prior_check(command: &Command, a: &PriorCheckArgs) -> Result<()> {
    let started = Instant::now();
    let prior = PriorSpec::new(a.upper)?;
    let cfg = sim_config(a.n_sims, a.trials, &a.p, a.seed)?;
    let modes = modes(&a.design)?;
    let mut out = Outputs::new(&a.common)?;
    for mode in modes {
        let stem = format!("prior_check_{}_{mode}", a.model);
        match a.model {
            BartModel::Flat => {
                let s = prior_predictive_flat(prior, &cfg, mode)?;
                out.write(&format!("{stem}.csv"), |w| write_summaries_csv(&s, w))?;
                out.chart(&format!("{stem}.svg"), &flat_chart(&s, mode, a.upper))?;
                for x in &s {
                    println!(
                        "{mode} p={}: median {:.3}, max {:.3}",
                        x.p,
                        x.quantiles.q50,
                        x.max_mean()
                    );
                }
            }
            BartModel::Hier => {
                let h = prior_predictive_hier(prior, &cfg, mode, a.conditions)?;
                out.write(&format!("{stem}.csv"), |w| write_hier_csv(&h, w))?;
                out.chart(&format!("{stem}.svg"), &hier_chart(&h))?;
                println!("{mode}: {} sims, {} floored draws", h.records.len(), h.floored_draws());
            }
        }
    }
    out.finish(command, a.seed, started)
}

fn tail_sweep(command: &Command, a: &TailSweepArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = sim_config(a.n_sims, a.trials, &a.p, a.seed)?;
    let rows = tail_sensitivity_sweep(&a.uppers, &cfg)?;
    let mut out = Outputs::new(&a.common)?;
    out.write("tail_sweep.csv", |w| write_tail_csv(&rows, w))?;
    let mut lines = Vec::new();
    for &p in &a.p {
        for mode in DesignMode::BOTH {
            let mine: Vec<_> = rows.iter().filter(|r| r.p == p && r.mode == mode).collect();
            lines.push(Line {
                label: format!("{mode} median, p={p}"),
                points: mine.iter().map(|r| (r.upper, r.quantiles.q50)).collect(),
            });
            lines.push(Line {
                label: format!("{mode} q99, p={p}"),
                points: mine.iter().map(|r| (r.upper, r.q99)).collect(),
            });
        }
    }
    let chart = Chart {
        title: "Prior width and predicted mean pumps".into(),
        x_label: "prior upper bound U".into(),
        y_label: "mean pumps".into(),
        lines,
        ..Chart::default()
    };
    out.chart("tail_sweep.svg", &chart)?;
    out.finish(command, a.seed, started)
}

fn write_fit(out: &mut Outputs, fit: &Fit) -> Result<()> {
    out.write("posterior.csv", |w| fit.samples.write_csv(w))?;
    let json = serde_json::json!({
        "model": fit.samples.kind.label(),
        "parameters": fit.diagnostics.names.iter().enumerate().map(|(i, n)| serde_json::json!({
            "name": n,
            "mean": fit.samples.mean(i),
            "q05": fit.samples.quantile(i, 0.05),
            "q95": fit.samples.quantile(i, 0.95),
            "rhat": fit.diagnostics.rhat[i],
            "ess_bulk": fit.diagnostics.ess_bulk[i],
        })).collect::<Vec<_>>(),
        "acceptance_rate": fit.diagnostics.acceptance_rate,
        "max_rhat": fit.diagnostics.max_rhat(),
        "min_ess_bulk": fit.diagnostics.min_ess(),
    });
    let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Numerical(e.to_string()))?;
    out.write("diagnostics.json", |w| {
        writeln!(w, "{text}").map_err(|e| Error::io("diagnostics.json", e))
    })
}

fn fit_cmd(command: &Command, a: &FitArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_csv(&a.data)?;
    let prior = PriorSpec::new(a.upper)?;
    let cfg = a.sampler.config(a.seed);
    let mut out = Outputs::new(&a.common)?;
    let result = fit_model(a.model, &data, prior, &cfg);
    let fit = match &result {
        Ok(f) => f,
        Err(Error::Convergence { fit, issues }) => {
            for i in issues {
                eprintln!("not converged: {i}");
            }
            fit
        }
        Err(_) => return result.map(|_| ()),
    };
    write_fit(&mut out, fit)?;
    for (i, n) in fit.diagnostics.names.iter().enumerate() {
        println!("{n:>16} mean {:>10.4}  rhat {:?}", fit.samples.mean(i), fit.diagnostics.rhat[i]);
    }
    out.finish(command, a.seed, started)?;
    result.map(|_| ())
}

fn sweep_chart(rows: &[SweepRow], method: SweepMethod) -> Chart {
    let mut chart = Chart {
        title: "Hierarchical vs complete pooling across prior widths".into(),
        x_label: "prior upper bound U".into(),
        y_label: "log Bayes factor / elpd difference".into(),
        hlines: vec![0.0],
        ..Chart::default()
    };
    if method != SweepMethod::Loo {
        chart.lines.push(Line {
            label: "log BF (hier vs flat)".into(),
            points: rows.iter().filter_map(|r| r.log_bf.map(|b| (r.upper, b))).collect(),
        });
    }
    if method != SweepMethod::Bf {
        let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.elpd_diff.is_some() && r.se_diff.is_some()).collect();
        chart.ribbons.push(Ribbon {
            label: "elpd difference ± SE".into(),
            x: ok.iter().map(|r| r.upper).collect(),
            lower: ok.iter().map(|r| r.elpd_diff.unwrap() - r.se_diff.unwrap()).collect(),
            upper: ok.iter().map(|r| r.elpd_diff.unwrap() + r.se_diff.unwrap()).collect(),
            center: Some(ok.iter().map(|r| r.elpd_diff.unwrap()).collect()),
        });
    }
    chart
}

fn compare(command: &Command, a: &CompareArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_csv(&a.data)?;
    let cfg = SweepConfig {
        uppers: a.uppers.clone(),
        method: a.method,
        sampler: a.sampler.config(a.seed),
        bridge: BridgeConfig {
            seed: a.seed,
            ..BridgeConfig::default()
        },
    };
    let rows = prior_width_sweep(&data, &cfg)?;
    let mut out = Outputs::new(&a.common)?;
    out.write("sweep.csv", |w| write_sweep_csv(&rows, a.method, w))?;
    out.chart("sweep.svg", &sweep_chart(&rows, a.method))?;
    let mut failed = 0;
    for r in &rows {
        println!(
            "U={}: log BF {:?}, elpd diff {:?} (SE {:?})",
            r.upper, r.log_bf, r.elpd_diff, r.se_diff
        );
        for e in &r.errors {
            eprintln!("U={}: {e}", r.upper);
            failed += 1;
        }
    }
    out.finish(command, a.seed, started)?;
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} sweep cells failed; see sweep.csv for the rest")));
    }
    Ok(())
}

fn permute(command: &Command, a: &PermuteArgs) -> Result<()> {
    let started = Instant::now();
    let data = load_csv(&a.data)?;
    let permuted = permute_conditions(&data, a.seed)?;
    let mut out = Outputs::new(&a.common)?;
    save_into(&mut out, &a.name, &permuted)?;
    out.finish(command, a.seed, started)
}

fn synth(command: &Command, a: &SynthArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = SynthConfig {
        trials_per_condition: a.trials,
        ..SynthConfig::george(a.seed)
    };
    let data = synth_george(&cfg)?;
    let mut out = Outputs::new(&a.common)?;
    save_into(&mut out, &a.name, &data)?;
    out.finish(command, a.seed, started)
}

fn save_into(out: &mut Outputs, name: &str, data: &crate::data::Dataset) -> Result<()> {
    if Path::new(name).file_name().map(|f| f != name).unwrap_or(true) {
        return Err(Error::InvalidInput(format!("output name {name:?} must be a plain file name")));
    }
    save_csv(data, out.dir.join(name))?;
    out.files.push(name.to_string());
    Ok(())
}

fn recover(command: &Command, a: &RecoverArgs) -> Result<()> {
    let started = Instant::now();
    let george = SynthConfig::george(a.seed);
    let design = Design {
        pop_probs: george.conditions.iter().map(|c| c.p).collect(),
        trials_per_condition: a.trials,
    };
    let truth = match a.model {
        BartModel::Flat => RecoveryTruth::Shared(SubjectParams::new(a.gamma, a.beta)?),
        BartModel::Hier => RecoveryTruth::PerCondition(george.conditions.iter().map(|c| c.params).collect()),
    };
    let report = parameter_recovery(
        a.model,
        &truth,
        &design,
        a.replicates,
        PriorSpec::new(a.upper)?,
        &a.sampler.config(a.seed),
    )?;
    let mut out = Outputs::new(&a.common)?;
    out.write("recovery.csv", |w| report.write_csv(w))?;
    for p in &report.params {
        println!(
            "{:>14} truth {:.3} mean {:.3} rmse {:.3} coverage {:.2}",
            p.name, p.truth, p.mean_estimate, p.rmse, p.coverage
        );
    }
    out.finish(command, a.seed, started)
}

fn sbc_cmd(command: &Command, a: &SbcArgs) -> Result<()> {
    let started = Instant::now();
    let design = Design {
        pop_probs: SynthConfig::george(a.seed).conditions.iter().map(|c| c.p).collect(),
        trials_per_condition: a.trials,
    };
    let cfg = SamplerConfig {
        n_chains: a.chains,
        warmup: a.warmup,
        samples: a.samples,
        thin: a.thin,
        seed: a.seed,
        ..SamplerConfig::default()
    };
    let opts = SbcOptions {
        bins: a.bins,
        max_draws: a.max_draws,
        draw_offset: a.draw_offset,
    };
    let report = sbc(a.model, &design, a.replicates, PriorSpec::new(a.upper)?, &cfg, &opts)?;
    let mut out = Outputs::new(&a.common)?;
    out.write("sbc_summary.csv", |w| report.write_summary_csv(w))?;
    out.write("sbc_ranks.csv", |w| report.write_ranks_csv(w))?;
    let chart = Chart {
        title: format!("SBC rank histograms ({})", a.model),
        x_label: "rank bin".into(),
        y_label: "count".into(),
        lines: report
            .params
            .iter()
            .map(|p| Line {
                label: p.name.clone(),
                points: p.histogram.iter().enumerate().map(|(i, &c)| (i as f64, c as f64)).collect(),
            })
            .collect(),
        hlines: report.params.first().map(|p| p.expected.iter().sum::<f64>() / a.bins as f64).into_iter().collect(),
        ..Chart::default()
    };
    out.chart("sbc_ranks.svg", &chart)?;
    for p in &report.params {
        println!("{:>14} chi2 {:.2} p {:.4}", p.name, p.chi_square, p.p_value);
    }
    if report.failed > 0 {
        println!("{} of {} replicates dropped (not converged)", report.failed, report.replicates);
    }
    out.finish(command, a.seed, started)
}
