//! Batch experiment runner. Every subcommand resolves its parameters from
//! defaults, an optional `key=value` file, an optional manifest and flags (in
//! increasing precedence), writes its artifacts into `--out`, and echoes the
//! resolved parameters into `manifest.json`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgMatches, Command};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::data_gen::{
    dataset_from_text, dataset_to_text, gen_dictionary, gen_manifold_s2, gen_regular_decodable, gen_subspace, matrix_to_text, sample_subspace, FAMILIES,
};
use crate::dictionary::{
    dict_csv, group_experiment, single_experiment, srw_of, ConvexDenoiser, GammaHeuristicDenoiser, QsosDenoiser, WidthSet,
};
use crate::error::{Error, Result};
use crate::framework::{fmt_real, gen_report_csv, generalization_report, rademacher_estimate, LossKind};
use crate::pca::{fit_kernel_pca, pca_loss, pca_pair, pca_rademacher_sup};
use crate::rng::{derive_seed, SplitMix64};
use crate::sos::{build_program, pexp_check, point_pexp, solve_sdp, BForm, DictLayout, DictProgramParams, QsosConfig, SolverOptions};
use crate::spectral::{
    factorize, fw_nonsmooth, fw_smooth_schatten, sign_invariant_error, spectral_decode, spectral_encode, FwOptions, Linearization,
    SmoothFwOptions,
};

pub const THREADS_ENV: &str = "RELAXLEARN_THREADS";

#[derive(Debug, Clone, Copy)]
enum Kind {
    Int,
    Float,
    Choice(&'static [&'static str]),
    Path,
    IntList,
}

#[derive(Debug, Clone, Copy)]
struct Param {
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    help: &'static str,
}

const fn p(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Param {
    Param { name, kind, default: Some(default), help }
}

const fn required(name: &'static str, kind: Kind, help: &'static str) -> Param {
    Param { name, kind, default: None, help }
}

const BOOL: &[&str] = &["true", "false"];
const DENOISERS: &[&str] = &["qsos", "gamma_heuristic"];
const FORMS: &[&str] = &["substituted", "explicit"];

const SEED: Param = p("seed", Kind::Int, "0", "master seed");

const GEN: &[Param] = &[
    p("family", Kind::Choice(&FAMILIES), "subspace", "data family"),
    p("d", Kind::Int, "8", "ambient dimension"),
    p("k", Kind::Int, "2", "subspace dimension, planted rank, code sparsity or variety span"),
    p("m", Kind::Int, "200", "sample count (N for the dictionary family)"),
    p("r", Kind::Int, "4", "dictionary size"),
    p("noise", Kind::Float, "0", "noise scale"),
    p("eps", Kind::Float, "0", "operator-norm perturbation of the planted witness"),
    p("tau", Kind::Float, "1", "radius slack of the planted witness"),
    p("name", Kind::Choice(&[]), "data", "output basename"),
    SEED,
];

const PCA: &[Param] = &[
    required("in", Kind::Path, "dataset file"),
    p("k", Kind::Int, "2", "number of components"),
    p("s", Kind::Int, "1", "lifting degree"),
    SEED,
];

const SPECTRAL: &[Param] = &[
    required("in", Kind::Path, "dataset file"),
    p("variant", Kind::Choice(&["nonsmooth", "smooth"]), "nonsmooth", "objective"),
    p("radius", Kind::Float, "2", "Schatten-1 radius"),
    p("steps", Kind::Int, "400", "Frank-Wolfe steps"),
    p("window", Kind::Int, "1", "averaging window (non-smooth)"),
    p("batch", Kind::Int, "0", "minibatch size, 0 for full batch (non-smooth)"),
    p("eta", Kind::Float, "0.5", "weight of accumulated subgradients, 0 for the plain linearization"),
    p("p", Kind::Int, "4", "Schatten exponent (smooth)"),
    p("line-search", Kind::Choice(BOOL), "true", "exact line search (smooth)"),
    p("rank-cap", Kind::Int, "0", "encoder rank cap, 0 keeps every atom"),
    SEED,
];

const DICT: &[Param] = &[
    p("d", Kind::Int, "3", "rows"),
    p("r", Kind::Int, "2", "dictionary size"),
    p("k", Kind::Int, "1", "code sparsity and budget"),
    p("n", Kind::Int, "3", "group size N"),
    p("noise", Kind::Float, "0", "noise scale"),
    p("rho", Kind::Float, "0.8", "sampling probability"),
    p("denoiser", Kind::Choice(DENOISERS), "qsos", "convex set"),
    p("p", Kind::Int, "4", "relaxation exponent"),
    p("degree", Kind::Int, "4", "relaxation degree"),
    p("form", Kind::Choice(FORMS), "substituted", "treatment of B = b^(p-1)"),
    p("radius", Kind::Float, "0", "heuristic column budget, 0 uses k"),
    p("max-iter", Kind::Int, "100000", "solver iteration budget"),
    p("tol", Kind::Float, "1e-6", "solver tolerance"),
    p("trials", Kind::Int, "1", "number of seeds (seed, seed+1, ...)"),
    SEED,
];

const SRW: &[Param] = &[
    p("set", Kind::Choice(&["zero", "linf", "schatten", "qsos"]), "schatten", "set W"),
    p("d", Kind::Int, "4", "rows"),
    p("n", Kind::Int, "4", "columns"),
    p("m", Kind::IntList, "4,8,16", "sample sizes"),
    p("trials", Kind::Int, "50", "trials per sample size"),
    p("p", Kind::Float, "1", "Schatten exponent"),
    p("radius", Kind::Float, "1", "Schatten radius"),
    p("r", Kind::Int, "1", "dictionary size (qsos)"),
    p("k", Kind::Int, "1", "column budget (qsos)"),
    p("degree", Kind::Int, "4", "relaxation degree (qsos)"),
    SEED,
];

const RADEMACHER: &[Param] = &[
    p("class", Kind::Choice(&["pca"]), "pca", "hypothesis class"),
    p("d", Kind::Int, "8", "dimension of the uniform unit-sphere data"),
    p("m", Kind::IntList, "50,200,800", "sample sizes"),
    p("k", Kind::Int, "2", "PCA components"),
    p("s", Kind::Int, "1", "lifting degree"),
    p("trials", Kind::Int, "200", "sign draws per sample size"),
    SEED,
];

const SOS_CHECK: &[Param] = &[
    p("d", Kind::Int, "1", "rows"),
    p("r", Kind::Int, "1", "inner dimension"),
    p("n", Kind::Int, "1", "columns"),
    p("p", Kind::Int, "4", "exponent"),
    p("k", Kind::Float, "1", "column budget"),
    p("degree", Kind::Int, "8", "relaxation degree"),
    p("form", Kind::Choice(FORMS), "explicit", "treatment of B = b^(p-1)"),
    p("max-iter", Kind::Int, "100000", "solver iteration budget"),
    p("tol", Kind::Float, "1e-6", "solver tolerance"),
    SEED,
];

const REPORT: &[Param] = &[
    p("d", Kind::Int, "8", "dimension"),
    p("k", Kind::Int, "2", "subspace dimension and PCA components"),
    p("noise", Kind::Float, "0.1", "noise scale"),
    p("m", Kind::IntList, "50,100,200,400,800", "training sizes"),
    p("holdout", Kind::Int, "2000", "holdout size"),
    p("s", Kind::Int, "1", "lifting degree"),
    SEED,
];

struct Sub {
    name: &'static str,
    about: &'static str,
    params: &'static [Param],
    run: fn(&Config, &mut Outputs) -> Result<Status>,
}

const SUBS: &[Sub] = &[
    Sub { name: "gen", about: "Generate a dataset and its planted witness", params: GEN, run: run_gen },
    Sub { name: "pca", about: "Fit (kernel) PCA", params: PCA, run: run_pca },
    Sub { name: "spectral", about: "Train a spectral autoencoder by Frank-Wolfe", params: SPECTRAL, run: run_spectral },
    Sub { name: "dict-group", about: "Group encoding and decoding of dictionary data", params: DICT, run: run_dict_group },
    Sub { name: "dict-single", about: "Single-example encoding and decoding", params: DICT, run: run_dict_single },
    Sub { name: "srw", about: "Sampling Rademacher width estimates", params: SRW, run: run_srw },
    Sub { name: "rademacher", about: "Rademacher complexity estimates", params: RADEMACHER, run: run_rademacher },
    Sub { name: "sos-check", about: "Feasibility checks for the moment relaxation", params: SOS_CHECK, run: run_sos_check },
    Sub { name: "report", about: "Generalization gap across training sizes", params: REPORT, run: run_report },
];

/// Outcome of a run that did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok,
    BudgetExhausted,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn canonical(param: &Param, raw: &str) -> Result<String> {
    let raw = raw.trim();
    let bad = |what: &str| config_err(format!("parameter `{}`: {what} `{raw}`", param.name));
    match param.kind {
        Kind::Int => raw.parse::<u64>().map(|v| v.to_string()).map_err(|_| bad("expected a nonnegative integer, got")),
        Kind::Float => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(format!("{v:?}")),
            _ => Err(bad("expected a finite number, got")),
        },
        Kind::Choice(options) => {
            if options.is_empty() || options.contains(&raw) {
                if raw.is_empty() {
                    Err(bad("empty value"))
                } else {
                    Ok(raw.to_string())
                }
            } else {
                Err(bad(&format!("expected one of {options:?}, got")))
            }
        }
        Kind::Path => {
            if raw.is_empty() {
                Err(bad("empty path"))
            } else {
                Ok(raw.to_string())
            }
        }
        Kind::IntList => {
            let vals: std::result::Result<Vec<u64>, _> = raw.split(',').map(|t| t.trim().parse::<u64>()).collect();
            match vals {
                Ok(v) if !v.is_empty() => Ok(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
                _ => Err(bad("expected comma-separated integers, got")),
            }
        }
    }
}

/// Resolved parameters of one run.
#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("parameter declared in table")
    }

    fn usize(&self, key: &str) -> usize {
        self.get(key).parse().expect("validated integer")
    }

    fn u64(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated integer")
    }

    fn f64(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated number")
    }

    fn list(&self, key: &str) -> Vec<usize> {
        self.get(key).split(',').map(|t| t.parse().expect("validated list")).collect()
    }

    fn flag(&self, key: &str) -> bool {
        self.get(key) == "true"
    }
}

fn parse_kv_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("{}:{}: expected key=value", path.display(), no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_manifest(path: &Path, sub: &str) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| config_err(format!("manifest {}: {e}", path.display())))?;
    if v.get("subcommand").and_then(Value::as_str) != Some(sub) {
        return Err(config_err(format!("manifest {} was not written by `{sub}`", path.display())));
    }
    let cfg = v
        .get("config")
        .and_then(Value::as_object)
        .ok_or_else(|| config_err("manifest has no config object"))?;
    cfg.iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k.clone(), s.clone())),
            other => Ok((k.clone(), other.to_string())),
        })
        .collect()
}

fn resolve(sub: &Sub, m: &ArgMatches) -> Result<Config> {
    let mut values: BTreeMap<String, String> = BTreeMap::new();
    let find = |k: &str| sub.params.iter().find(|p| p.name == k);
    let set = |k: &str, v: &str, origin: &str, values: &mut BTreeMap<String, String>| -> Result<()> {
        let param = find(k).ok_or_else(|| config_err(format!("unknown key `{k}` in {origin}")))?;
        values.insert(k.to_string(), canonical(param, v)?);
        Ok(())
    };
    for param in sub.params {
        if let Some(d) = param.default {
            values.insert(param.name.to_string(), canonical(param, d)?);
        }
    }
    if let Some(path) = m.get_one::<String>("config") {
        for (k, v) in parse_kv_file(Path::new(path))? {
            set(&k, &v, path, &mut values)?;
        }
    }
    if let Some(path) = m.get_one::<String>("manifest") {
        for (k, v) in parse_manifest(Path::new(path), sub.name)? {
            set(&k, &v, path, &mut values)?;
        }
    }
    for param in sub.params {
        if let Some(v) = m.get_one::<String>(param.name) {
            set(param.name, v, "flags", &mut values)?;
        }
    }
    for param in sub.params {
        if !values.contains_key(param.name) {
            return Err(config_err(format!("missing required parameter `{}`", param.name)));
        }
    }
    Ok(Config { values })
}

fn command() -> Command {
    let mut cmd = Command::new("relaxlearn")
        .about("Unsupervised learning by reconstruction loss, with convex relaxations")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBS {
        let mut c = Command::new(sub.name)
            .about(sub.about)
            .arg(Arg::new("out").long("out").value_name("DIR").default_value("out").help("output directory"))
            .arg(Arg::new("config").long("config").value_name("FILE").help("key=value parameter file"))
            .arg(Arg::new("manifest").long("manifest").value_name("FILE").help("re-run from a manifest.json"))
            .arg(
                Arg::new("threads")
                    .long("threads")
                    .value_name("N")
                    .value_parser(clap::value_parser!(usize))
                    .help(format!("worker threads (falls back to {THREADS_ENV})")),
            );
        for param in sub.params {
            let mut help = param.help.to_string();
            if let Some(d) = param.default {
                let _ = write!(help, " [default: {d}]");
            }
            c = c.arg(Arg::new(param.name).long(param.name).value_name("VALUE").help(help));
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

/// Files written by a run, in write order.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn configure_threads(m: &ArgMatches) -> Result<()> {
    let n = match m.get_one::<usize>("threads") {
        Some(&n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| config_err(format!("{THREADS_ENV} must be an integer, got `{v}`")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(config_err("thread count must be positive"));
        }
        // A pool may already exist when called twice in one process; the
        // first configuration wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolverBudget(_) | Error::NoConvergence(_) | Error::RejectionBudget(_) => 2,
        _ => 1,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code: 0 on success, 1 on configuration or input errors, 2 when a solver
/// exhausted its budget.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, sm) = matches.subcommand().expect("subcommand required");
    let sub = SUBS.iter().find(|s| s.name == name).expect("registered subcommand");
    match execute(sub, sm) {
        Ok(Status::Ok) => 0,
        Ok(Status::BudgetExhausted) => {
            eprintln!("relaxlearn {name}: solver budget exhausted before reaching tolerance; outputs hold the last iterate");
            2
        }
        Err(e) => {
            eprintln!("relaxlearn {name}: {e}");
            exit_code(&e)
        }
    }
}

fn execute(sub: &Sub, m: &ArgMatches) -> Result<Status> {
    configure_threads(m)?;
    let cfg = resolve(sub, m)?;
    let dir = PathBuf::from(m.get_one::<String>("out").expect("has default"));
    std::fs::create_dir_all(&dir)?;
    let mut out = Outputs { dir, files: Vec::new() };
    let status = (sub.run)(&cfg, &mut out)?;
    let manifest = json!({
        "subcommand": sub.name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.values,
        "outputs": out.files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))? + "\n";
    std::fs::write(out.dir.join("manifest.json"), text)?;
    Ok(status)
}

fn run_gen(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    let (d, k, m, seed) = (cfg.usize("d"), cfg.usize("k"), cfg.usize("m"), cfg.u64("seed"));
    let name = cfg.get("name");
    match cfg.get("family") {
        "subspace" => {
            let (ds, u) = gen_subspace(d, k, m, cfg.f64("noise"), seed)?;
            out.write(&format!("{name}.txt"), &dataset_to_text(&ds))?;
            out.write(&format!("{name}.witness.txt"), &matrix_to_text("basis", &u))?;
        }
        "regular_decodable" => {
            let (ds, model) = gen_regular_decodable(d, k, m, cfg.f64("eps"), cfg.f64("tau"), seed)?;
            out.write(&format!("{name}.txt"), &dataset_to_text(&ds))?;
            out.write(&format!("{name}.witness.txt"), &model.to_text())?;
        }
        "dictionary" => {
            let data = gen_dictionary(d, cfg.usize("r"), k, m, cfg.f64("noise"), seed)?;
            out.write(&format!("{name}.txt"), &dataset_to_text(&data.to_dataset()))?;
            out.write(&format!("{name}.witness.txt"), &matrix_to_text("astar", &data.spec.a_star))?;
            out.write(&format!("{name}.codes.txt"), &matrix_to_text("codes", &data.codes))?;
        }
        "manifold_s2" => {
            let (ds, cons) = gen_manifold_s2(d, k, m, seed)?;
            out.write(&format!("{name}.txt"), &dataset_to_text(&ds))?;
            let c = DMatrix::from_fn(cons.c.len(), d * d, |i, j| cons.c[i][j]);
            out.write(&format!("{name}.witness.txt"), &matrix_to_text("constraints", &c))?;
        }
        other => unreachable!("validated family {other}"),
    }
    Ok(Status::Ok)
}

fn load_dataset(cfg: &Config) -> Result<crate::framework::DataSet> {
    dataset_from_text(&std::fs::read_to_string(cfg.get("in"))?)
}

fn run_pca(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    let data = load_dataset(cfg)?;
    let (k, s) = (cfg.usize("k"), cfg.usize("s") as u32);
    let model = fit_kernel_pca(&data, k, s)?;
    let losses = data.samples.iter().map(|x| pca_loss(&model, x)).collect::<Result<Vec<f64>>>()?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    out.write("pca_model.txt", &model.to_text())?;
    out.write("pca_report.csv", &format!("k,s,m,train_loss\n{k},{s},{},{}\n", data.len(), fmt_real(mean)))?;
    Ok(Status::Ok)
}

fn run_spectral(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    let data = load_dataset(cfg)?;
    let seed = cfg.u64("seed");
    let res = match cfg.get("variant") {
        "nonsmooth" => {
            let eta = cfg.f64("eta");
            let batch = cfg.usize("batch");
            fw_nonsmooth(
                &data,
                &FwOptions {
                    radius: cfg.f64("radius"),
                    steps: cfg.usize("steps"),
                    averaging_window: cfg.usize("window"),
                    batch: (batch > 0).then_some(batch),
                    seed,
                    linearization: if eta > 0.0 { Linearization::Regularized { eta } } else { Linearization::Current },
                },
            )?
        }
        _ => fw_smooth_schatten(
            &data,
            &SmoothFwOptions {
                radius: cfg.f64("radius"),
                p: cfg.usize("p"),
                steps: cfg.usize("steps"),
                line_search: cfg.flag("line-search"),
                gap_tol: 0.0,
                seed,
            },
        )?,
    };
    let cap = match cfg.usize("rank-cap") {
        0 => usize::MAX,
        c => c,
    };
    let factors = factorize(&res.model, cap);
    let mut errs = String::from("sample,error\n");
    let (mut max_err, mut sum_err) = (0.0f64, 0.0);
    for (i, x) in data.samples.iter().enumerate() {
        let e = match spectral_encode(&factors, x).and_then(|y| spectral_decode(&factors, &y)) {
            Ok(xhat) => sign_invariant_error(xhat.as_slice(), x),
            Err(Error::ZeroInput) => crate::linalg::norm2(x),
            Err(e) => return Err(e),
        };
        max_err = max_err.max(e);
        sum_err += e;
        let _ = writeln!(errs, "{i},{}", fmt_real(e));
    }
    out.write("fw_trace.csv", &res.trace.to_csv())?;
    out.write("spectral_model.txt", &res.model.to_text())?;
    out.write("spectral_decode.csv", &errs)?;
    out.write(
        "spectral_summary.csv",
        &format!(
            "final_objective,mean_decode_error,max_decode_error,rank,dropped_weight\n{},{},{},{},{}\n",
            fmt_real(res.objective),
            fmt_real(sum_err / data.len() as f64),
            fmt_real(max_err),
            res.model.rank(),
            fmt_real(factors.dropped_weight.max(0.0))
        ),
    )?;
    Ok(Status::Ok)
}

fn denoiser(cfg: &Config, seed: u64) -> Result<Box<dyn ConvexDenoiser>> {
    let k = cfg.usize("k") as f64;
    Ok(match cfg.get("denoiser") {
        "qsos" => Box::new(QsosDenoiser {
            cfg: QsosConfig {
                r: cfg.usize("r"),
                p: cfg.usize("p"),
                k,
                degree: cfg.usize("degree"),
                form: if cfg.get("form") == "explicit" { BForm::Explicit } else { BForm::Substituted },
                solver: SolverOptions { max_iter: cfg.usize("max-iter"), tol: cfg.f64("tol"), seed, ..SolverOptions::default() },
            },
        }),
        _ => {
            let radius = match cfg.f64("radius") {
                r if r > 0.0 => r,
                _ => k,
            };
            let mut g = GammaHeuristicDenoiser::new(cfg.usize("r"), radius);
            g.seed = seed;
            Box::new(g)
        }
    })
}

fn run_dict(cfg: &Config, out: &mut Outputs, single: bool) -> Result<Status> {
    let (d, r, k, n) = (cfg.usize("d"), cfg.usize("r"), cfg.usize("k"), cfg.usize("n"));
    let rho = cfg.f64("rho");
    let mut rows = Vec::new();
    let mut status = Status::Ok;
    for t in 0..cfg.u64("trials").max(1) {
        let seed = cfg.u64("seed") + t;
        let data = gen_dictionary(d, r, k, n, cfg.f64("noise"), seed)?;
        let den = denoiser(cfg, seed)?;
        let row = if single {
            single_experiment(&data, den.as_ref(), rho, seed)?
        } else {
            let e = group_experiment(&data, den.as_ref(), rho, seed)?;
            out.write(&format!("code_{seed}.txt"), &e.code.to_text())?;
            e.row
        };
        if !row.converged {
            status = Status::BudgetExhausted;
        }
        rows.push(row);
    }
    out.write(if single { "dict_single.csv" } else { "dict_group.csv" }, &dict_csv(&rows))?;
    Ok(status)
}

fn run_dict_group(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    run_dict(cfg, out, false)
}

fn run_dict_single(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    run_dict(cfg, out, true)
}

fn run_srw(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    let (d, n) = (cfg.usize("d"), cfg.usize("n"));
    let set = match cfg.get("set") {
        "zero" => WidthSet::Zero,
        "linf" => WidthSet::LInfBall,
        "schatten" => WidthSet::SchattenBall { p: cfg.f64("p"), radius: cfg.f64("radius") },
        _ => WidthSet::Qsos(QsosConfig { r: cfg.usize("r"), k: cfg.usize("k") as f64, degree: cfg.usize("degree"), ..QsosConfig::default() }),
    };
    let mut summary = String::from("m,mean,std_error,trials\n");
    let mut trials = String::from("m,trial,value\n");
    for m in cfg.list("m") {
        let t = srw_of(&set, d, n, m, cfg.usize("trials"), derive_seed(cfg.u64("seed"), m as u64))?;
        let _ = writeln!(summary, "{m},{},{},{}", fmt_real(t.estimate.mean), fmt_real(t.estimate.std_error), t.estimate.trials);
        for (i, v) in t.values.iter().enumerate() {
            let _ = writeln!(trials, "{m},{i},{}", fmt_real(*v));
        }
    }
    out.write("srw.csv", &summary)?;
    out.write("srw_trials.csv", &trials)?;
    Ok(Status::Ok)
}

fn run_rademacher(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    let (d, k, s) = (cfg.usize("d"), cfg.usize("k"), cfg.usize("s") as u32);
    let mut summary = String::from("m,mean,std_error,trials,sqrt_d_over_m\n");
    for m in cfg.list("m") {
        let seed = derive_seed(cfg.u64("seed"), m as u64);
        let (data, _) = gen_subspace(d, d, m, 0.0, seed)?;
        let t = rademacher_estimate(|sigma, ds| pca_rademacher_sup(sigma, ds, k, s), &data, cfg.usize("trials"), seed)?;
        let _ = writeln!(
            summary,
            "{m},{},{},{},{}",
            fmt_real(t.estimate.mean),
            fmt_real(t.estimate.std_error),
            t.estimate.trials,
            fmt_real((d as f64 / m as f64).sqrt())
        );
    }
    out.write("rademacher.csv", &summary)?;
    Ok(Status::Ok)
}

fn run_sos_check(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    let (d, r, n, p) = (cfg.usize("d"), cfg.usize("r"), cfg.usize("n"), cfg.usize("p"));
    let k = cfg.f64("k");
    let form = if cfg.get("form") == "explicit" { BForm::Explicit } else { BForm::Substituted };
    let layout = DictLayout { d, r, n, p, k, form };
    // A feasible assignment: A = 1 and b = 1 on the 1×1 instance, random
    // otherwise with columns of b scaled into the budget.
    let mut rng = SplitMix64::new(cfg.u64("seed"));
    let (a, b) = if d * r * n == 1 {
        (DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, k.powf(1.0 / (p as f64 - 1.0))))
    } else {
        let a = DMatrix::from_fn(d, r, |_, _| rng.uniform_range(-1.0, 1.0));
        let mut b = DMatrix::from_fn(r, n, |_, _| rng.uniform_range(-1.0, 1.0));
        let bound = layout.column_bound();
        for j in 0..n {
            let sum: f64 = b.column(j).iter().map(|v| v.powi(p as i32)).sum();
            if sum > bound {
                let f = (bound / sum).powf(1.0 / p as f64) * (1.0 - 1e-9);
                b.column_mut(j).scale_mut(f);
            }
        }
        (a, b)
    };
    let big_b = b.map(|v| v.powi(p as i32 - 1));
    let c = &a * &big_b;
    let program = build_program(Some(&c), &DictProgramParams::new(layout, cfg.usize("degree")))?;
    let point = point_pexp(&program, &a, &big_b, &b)?;
    let point_rep = pexp_check(&point, &program, 1e-10);
    let opts = SolverOptions { max_iter: cfg.usize("max-iter"), tol: cfg.f64("tol"), seed: cfg.u64("seed"), ..SolverOptions::default() };
    let solved = solve_sdp(&program, &[], &opts)?;
    let solved_rep = pexp_check(&solved.pexp, &program, 1e-5);
    let report = json!({
        "moments": program.moment_count(),
        "equalities": program.equalities.len(),
        "blocks": program.blocks.iter().map(|b| b.size).collect::<Vec<_>>(),
        "point": {
            "passed": point_rep.passed,
            "normalization_err": fmt_real(point_rep.normalization_err),
            "moment_min_eig": fmt_real(point_rep.moment_min_eig),
            "max_linear_residual": fmt_real(point_rep.max_linear_residual),
            "max_localizing_violation": fmt_real(point_rep.max_localizing_violation),
        },
        "solver": {
            "converged": solved.converged,
            "iterations": solved.iterations,
            "residual": fmt_real(solved.residual),
            "best_residual": fmt_real(solved.best_residual),
            "check_passed": solved_rep.passed,
            "moment_min_eig": fmt_real(solved_rep.moment_min_eig),
            "max_linear_residual": fmt_real(solved_rep.max_linear_residual),
        },
    });
    out.write("sos_check.json", &(serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))? + "\n"))?;
    out.write("pexp_point.txt", &point.to_dump(&program.var_names))?;
    out.write("pexp_solved.txt", &solved.pexp.to_dump(&program.var_names))?;
    Ok(if solved.converged { Status::Ok } else { Status::BudgetExhausted })
}

fn run_report(cfg: &Config, out: &mut Outputs) -> Result<Status> {
    let (d, k, s) = (cfg.usize("d"), cfg.usize("k"), cfg.usize("s") as u32);
    let noise = cfg.f64("noise");
    let grid = cfg.list("m");
    let (_, u) = gen_subspace(d, k, 0, noise, derive_seed(cfg.u64("seed"), 0))?;
    let rows = generalization_report(
        |train| Ok(pca_pair(&fit_kernel_pca(train, k, s)?)),
        |m, seed| sample_subspace(&u, m, noise, seed),
        &grid,
        cfg.usize("holdout"),
        LossKind::SquaredEuclidean,
        cfg.u64("seed"),
    )?;
    out.write("gen_report.csv", &gen_report_csv(&rows))?;
    Ok(Status::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(name: &str) -> &'static Sub {
        SUBS.iter().find(|s| s.name == name).unwrap()
    }

    #[test]
    fn tables_have_valid_defaults_and_unique_names() {
        for s in SUBS {
            let mut names: Vec<&str> = s.params.iter().map(|p| p.name).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), s.params.len(), "{}", s.name);
            for p in s.params {
                if let Some(d) = p.default {
                    canonical(p, d).unwrap();
                }
            }
        }
        command().debug_assert();
    }

    #[test]
    fn canonical_forms() {
        let f = Param { name: "x", kind: Kind::Float, default: None, help: "" };
        assert_eq!(canonical(&f, "1e-6").unwrap(), "1e-6");
        assert_eq!(canonical(&f, "0.50").unwrap(), "0.5");
        assert_eq!(canonical(&f, "2").unwrap(), "2.0");
        assert!(canonical(&f, "nan").is_err());
        let l = Param { name: "m", kind: Kind::IntList, default: None, help: "" };
        assert_eq!(canonical(&l, "4, 8,16").unwrap(), "4,8,16");
        assert!(canonical(&l, "4,x").is_err());
    }

    #[test]
    fn precedence_and_unknown_keys() {
        let dir = std::env::temp_dir().join(format!("relaxlearn-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("cfg.txt");
        std::fs::write(&file, "# comment\nd = 5\nk=3\n").unwrap();
        let m = command()
            .try_get_matches_from(["relaxlearn", "report", "--config", file.to_str().unwrap(), "--k", "4"])
            .unwrap();
        let cfg = resolve(sub("report"), m.subcommand().unwrap().1).unwrap();
        assert_eq!(cfg.usize("d"), 5);
        assert_eq!(cfg.usize("k"), 4);
        assert_eq!(cfg.get("m"), "50,100,200,400,800");
        std::fs::write(&file, "bogus=1\n").unwrap();
        let m = command().try_get_matches_from(["relaxlearn", "report", "--config", file.to_str().unwrap()]).unwrap();
        assert!(resolve(sub("report"), m.subcommand().unwrap().1).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["relaxlearn", "report", "--d", "abc"]), 1);
        assert_eq!(run(["relaxlearn", "nope"]), 1);
        assert_eq!(exit_code(&Error::SolverBudget("x".into())), 2);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 1);
    }
}
