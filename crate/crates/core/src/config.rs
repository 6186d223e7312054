//! Run configuration: a small INI-like grammar with `[problem]`,
//! `[algorithm]` and `[output]` sections, strict key checking, a canonical
//! rendering and the shipped presets.
//!
//! ```text
//! # comment
//! [problem]
//! name = synthetic
//! clients = 10
//! [algorithm]
//! variant = fgda, adafgda-adam
//! gamma = 0.1
//! [output]
//! dir = out
//! seeds = 0, 1, 2
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::algorithms::{HyperParams, Variant};
use crate::error::{Error, Result};
use crate::federation::PartitionScheme;
use crate::metrics::MetricOptions;
use crate::problems::{AucSpec, ProblemInstance, ProblemKind, RobustSpec, SyntheticSpec};

/// Key reference printed by `--help`.
pub const CONFIG_HELP: &str = "\
Config file grammar: `[section]` headers, `key = value` lines, `#` comments.
Unknown or repeated keys are errors. Any key can be overridden on the command
line as `--section.key value`.

[problem]
  name = synthetic | auc | robust              (default synthetic)
  clients = 10, dim = 20 (robust: 10), seed = 0
  synthetic: s = 1, tau = 10, noise_sigma = 0, samples_per_client = 100, recenter = true
  auc:       n_per_client = 200, pos_ratio = 0.05, test_size = 2000,
             score_noise = 0.3, partition = group | iid | dirichlet:<beta>
  robust:    n_per_client = 100, test_size = 2000, radius = 1, robust_signal = 1.2,
             brittle_signal = 0.5, brittle_noise = 0.01, partition = group
[algorithm]
  variant = fgda | adafgda-adam | adafgda-adabelief | local-sgda | momentum-local-sgda
            (comma list runs each; default fgda)
  gamma = 0.1, lambda = 0.1, q = 20, T = 4000, c1 = 10, c2 = 10,
  eta_n = 1, eta_m = auto, rho = 0.01, rho_u = 1, varrho = 0.9, varrho_tied = false,
  momentum_beta = 0.9, eta_const = none, momentum_const = none,
  freeze_accumulators = false
[output]
  dir = out, seeds = 0, heavy_every_step = false
";

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Synthetic(SyntheticSpec),
    Auc(AucSpec),
    Robust(RobustSpec),
}

impl ProblemConfig {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemConfig::Synthetic(_) => ProblemKind::Synthetic,
            ProblemConfig::Auc(_) => ProblemKind::Auc,
            ProblemConfig::Robust(_) => ProblemKind::Robust,
        }
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemConfig::Synthetic(s) => s.clone().build(),
            ProblemConfig::Auc(s) => s.clone().build(),
            ProblemConfig::Robust(s) => s.clone().build(),
        }
    }

    pub fn clients(&self) -> usize {
        match self {
            ProblemConfig::Synthetic(s) => s.clients,
            ProblemConfig::Auc(s) => s.clients,
            ProblemConfig::Robust(s) => s.clients,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub seeds: Vec<u64>,
    pub heavy_every_step: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            seeds: vec![0],
            heavy_every_step: false,
        }
    }
}

impl OutputConfig {
    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            heavy_every_step: self.heavy_every_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// `variant` and `seed` hold the first entries of `variants` and `output.seeds`.
    pub algorithm: HyperParams,
    pub variants: Vec<Variant>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemConfig::Synthetic(SyntheticSpec::default()),
            algorithm: HyperParams::default(),
            variants: vec![Variant::Fgda],
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Hyperparameters for one (variant, seed) run.
    pub fn hyper_params(&self, variant: Variant, seed: u64) -> HyperParams {
        HyperParams {
            variant,
            seed,
            ..self.algorithm.clone()
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
struct RawConfig {
    problem: Vec<Entry>,
    algorithm: Vec<Entry>,
    output: Vec<Entry>,
}

impl RawConfig {
    fn section_mut(&mut self, name: &str) -> Option<&mut Vec<Entry>> {
        match name {
            "problem" => Some(&mut self.problem),
            "algorithm" => Some(&mut self.algorithm),
            "output" => Some(&mut self.output),
            _ => None,
        }
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn lex(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    let mut current: Option<String> = None;
    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let body = full.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line, "unterminated section header"))?
                .trim();
            if raw.section_mut(name).is_none() {
                return Err(cfg_err(line, format!("unknown section [{name}]")));
            }
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| cfg_err(line, format!("expected `key = value`, found `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(cfg_err(line, "missing key"));
        }
        if value.is_empty() {
            return Err(cfg_err(line, format!("missing value for `{key}`")));
        }
        // `problem = <name>` before any header is shorthand for the problem name
        let (section, key) = match (&current, key) {
            (Some(s), k) => (s.clone(), k),
            (None, "problem") => ("problem".to_string(), "name"),
            (None, k) => return Err(cfg_err(line, format!("key `{k}` outside of a section"))),
        };
        let entries = raw.section_mut(&section).expect("known section");
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(cfg_err(
                line,
                format!("duplicate key `{key}` in [{section}] (first set on line {})", prev.line),
            ));
        }
        entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(raw)
}

/// Typed reader over one section's entries; every key must be consumed.
struct Section<'a> {
    name: &'static str,
    entries: &'a [Entry],
    used: Vec<bool>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, entries: &'a [Entry]) -> Self {
        Section {
            name,
            entries,
            used: vec![false; entries.len()],
        }
    }

    fn take_raw(&mut self, key: &str) -> Option<(&'a str, usize)> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some((self.entries[i].value.as_str(), self.entries[i].line))
    }

    fn get<T: FromStr>(&mut self, key: &str, target: &mut T) -> Result<()> {
        if let Some((v, line)) = self.take_raw(key) {
            *target = v.parse().map_err(|_| {
                cfg_err(
                    line,
                    format!("invalid value `{v}` for `{key}` ({})", std::any::type_name::<T>()),
                )
            })?;
        }
        Ok(())
    }

    fn get_opt(&mut self, key: &str, target: &mut Option<f64>, none_word: &str) -> Result<()> {
        if let Some((v, line)) = self.take_raw(key) {
            *target = if v == none_word {
                None
            } else {
                Some(v.parse().map_err(|_| {
                    cfg_err(
                        line,
                        format!("invalid value `{v}` for `{key}` (number or `{none_word}`)"),
                    )
                })?)
            };
        }
        Ok(())
    }

    fn get_with<T>(&mut self, key: &str, target: &mut T, parse: impl Fn(&str) -> Result<T>) -> Result<()> {
        if let Some((v, line)) = self.take_raw(key) {
            *target = parse(v).map_err(|e| cfg_err(line, format!("invalid value for `{key}`: {e}")))?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        match self.used.iter().position(|u| !u) {
            Some(i) => Err(cfg_err(
                self.entries[i].line,
                format!("unknown key `{}` in [{}]", self.entries[i].key, self.name),
            )),
            None => Ok(()),
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|e| Error::Parse(format!("`{}`: {e}", p.trim())))
        })
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Parse("empty list".into()));
    }
    Ok(items)
}

fn problem_from(entries: &[Entry]) -> Result<ProblemConfig> {
    let mut s = Section::new("problem", entries);
    let mut name = "synthetic".to_string();
    let name_line = entries.iter().find(|e| e.key == "name").map_or(0, |e| e.line);
    s.get("name", &mut name)?;
    let cfg = match name.as_str() {
        "synthetic" => {
            let mut p = SyntheticSpec::default();
            s.get("clients", &mut p.clients)?;
            s.get("dim", &mut p.dim)?;
            s.get("seed", &mut p.seed)?;
            s.get("s", &mut p.s)?;
            s.get("tau", &mut p.tau)?;
            s.get("noise_sigma", &mut p.noise_sigma)?;
            s.get("samples_per_client", &mut p.samples_per_client)?;
            s.get("recenter", &mut p.recenter)?;
            ProblemConfig::Synthetic(p)
        }
        "auc" => {
            let mut p = AucSpec::default();
            s.get("clients", &mut p.clients)?;
            s.get("dim", &mut p.dim)?;
            s.get("seed", &mut p.seed)?;
            s.get("n_per_client", &mut p.n_per_client)?;
            s.get("pos_ratio", &mut p.pos_ratio)?;
            s.get("test_size", &mut p.test_size)?;
            s.get("score_noise", &mut p.score_noise)?;
            s.get_with("partition", &mut p.partition, PartitionScheme::from_str)?;
            ProblemConfig::Auc(p)
        }
        "robust" => {
            let mut p = RobustSpec::default();
            s.get("clients", &mut p.clients)?;
            s.get("dim", &mut p.dim)?;
            s.get("seed", &mut p.seed)?;
            s.get("n_per_client", &mut p.n_per_client)?;
            s.get("test_size", &mut p.test_size)?;
            s.get("radius", &mut p.radius)?;
            s.get("robust_signal", &mut p.robust_signal)?;
            s.get("brittle_signal", &mut p.brittle_signal)?;
            s.get("brittle_noise", &mut p.brittle_noise)?;
            s.get_with("partition", &mut p.partition, PartitionScheme::from_str)?;
            ProblemConfig::Robust(p)
        }
        other => {
            return Err(cfg_err(
                name_line,
                format!("unknown problem `{other}` (expected synthetic, auc or robust)"),
            ))
        }
    };
    s.finish()?;
    Ok(cfg)
}

fn algorithm_from(entries: &[Entry]) -> Result<(HyperParams, Vec<Variant>)> {
    let mut s = Section::new("algorithm", entries);
    let mut hp = HyperParams::default();
    let mut variants = vec![hp.variant];
    s.get_with("variant", &mut variants, parse_list::<Variant>)?;
    s.get("gamma", &mut hp.gamma)?;
    s.get("lambda", &mut hp.lambda)?;
    s.get("eta_n", &mut hp.eta_n)?;
    s.get_opt("eta_m", &mut hp.eta_m, "auto")?;
    s.get("c1", &mut hp.c1)?;
    s.get("c2", &mut hp.c2)?;
    s.get("q", &mut hp.q)?;
    s.get("T", &mut hp.steps)?;
    s.get("rho", &mut hp.rho)?;
    s.get("rho_u", &mut hp.rho_u)?;
    s.get("varrho", &mut hp.varrho)?;
    s.get("varrho_tied", &mut hp.varrho_tied)?;
    s.get("momentum_beta", &mut hp.momentum_beta)?;
    s.get_opt("eta_const", &mut hp.eta_const, "none")?;
    s.get_opt("momentum_const", &mut hp.momentum_const, "none")?;
    s.get("freeze_accumulators", &mut hp.freeze_accumulators)?;
    s.finish()?;
    hp.variant = variants[0];
    Ok((hp, variants))
}

fn output_from(entries: &[Entry]) -> Result<OutputConfig> {
    let mut s = Section::new("output", entries);
    let mut o = OutputConfig::default();
    let mut dir = o.dir.to_string_lossy().into_owned();
    s.get("dir", &mut dir)?;
    o.dir = PathBuf::from(dir);
    s.get_with("seeds", &mut o.seeds, parse_list::<u64>)?;
    s.get("heavy_every_step", &mut o.heavy_every_step)?;
    s.finish()?;
    Ok(o)
}

/// Parses config text; missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parses config text, then applies `section.key = value` overrides.
pub fn parse_config_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut raw = lex(text)?;
    for (path, value) in overrides {
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| Error::InvalidArgument(format!("override `{path}` must look like section.key")))?;
        let entries = raw
            .section_mut(section)
            .ok_or_else(|| Error::InvalidArgument(format!("override `{path}`: unknown section [{section}]")))?;
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value.clone(),
            None => entries.push(Entry {
                key: key.to_string(),
                value: value.clone(),
                line: 0,
            }),
        }
    }
    interpret(&raw).map_err(|e| match e {
        Error::Config { line: 0, msg } => Error::InvalidArgument(format!("command-line override: {msg}")),
        other => other,
    })
}

fn interpret(raw: &RawConfig) -> Result<RunConfig> {
    let problem = problem_from(&raw.problem)?;
    let (mut algorithm, variants) = algorithm_from(&raw.algorithm)?;
    let output = output_from(&raw.output)?;
    algorithm.seed = output.seeds[0];
    algorithm.validate()?;
    Ok(RunConfig {
        problem,
        algorithm,
        variants,
        output,
    })
}

/// Canonical text with every key spelled out; `parse_config` inverts it.
pub fn render_config(cfg: &RunConfig) -> String {
    let mut out = String::from("[problem]\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    match &cfg.problem {
        ProblemConfig::Synthetic(p) => {
            kv("name", "synthetic".into());
            kv("clients", p.clients.to_string());
            kv("dim", p.dim.to_string());
            kv("seed", p.seed.to_string());
            kv("s", p.s.to_string());
            kv("tau", p.tau.to_string());
            kv("noise_sigma", p.noise_sigma.to_string());
            kv("samples_per_client", p.samples_per_client.to_string());
            kv("recenter", p.recenter.to_string());
        }
        ProblemConfig::Auc(p) => {
            kv("name", "auc".into());
            kv("clients", p.clients.to_string());
            kv("dim", p.dim.to_string());
            kv("seed", p.seed.to_string());
            kv("n_per_client", p.n_per_client.to_string());
            kv("pos_ratio", p.pos_ratio.to_string());
            kv("test_size", p.test_size.to_string());
            kv("score_noise", p.score_noise.to_string());
            kv("partition", p.partition.to_string());
        }
        ProblemConfig::Robust(p) => {
            kv("name", "robust".into());
            kv("clients", p.clients.to_string());
            kv("dim", p.dim.to_string());
            kv("seed", p.seed.to_string());
            kv("n_per_client", p.n_per_client.to_string());
            kv("test_size", p.test_size.to_string());
            kv("radius", p.radius.to_string());
            kv("robust_signal", p.robust_signal.to_string());
            kv("brittle_signal", p.brittle_signal.to_string());
            kv("brittle_noise", p.brittle_noise.to_string());
            kv("partition", p.partition.to_string());
        }
    }
    let hp = &cfg.algorithm;
    let opt = |v: Option<f64>, none: &str| v.map_or(none.to_string(), |x| x.to_string());
    let names: Vec<&str> = cfg.variants.iter().map(|v| v.name()).collect();
    let seeds: Vec<String> = cfg.output.seeds.iter().map(u64::to_string).collect();
    let _ = write!(
        out,
        "\n[algorithm]\nvariant = {}\ngamma = {}\nlambda = {}\neta_n = {}\neta_m = {}\nc1 = {}\nc2 = {}\nq = {}\nT = {}\nrho = {}\nrho_u = {}\nvarrho = {}\nvarrho_tied = {}\nmomentum_beta = {}\neta_const = {}\nmomentum_const = {}\nfreeze_accumulators = {}\n",
        names.join(", "),
        hp.gamma,
        hp.lambda,
        hp.eta_n,
        opt(hp.eta_m, "auto"),
        hp.c1,
        hp.c2,
        hp.q,
        hp.steps,
        hp.rho,
        hp.rho_u,
        hp.varrho,
        hp.varrho_tied,
        hp.momentum_beta,
        opt(hp.eta_const, "none"),
        opt(hp.momentum_const, "none"),
        hp.freeze_accumulators,
    );
    let _ = write!(
        out,
        "\n[output]\ndir = {}\nseeds = {}\nheavy_every_step = {}\n",
        cfg.output.dir.display(),
        seeds.join(", "),
        cfg.output.heavy_every_step
    );
    out
}

pub const PRESET_NAMES: [&str; 6] = [
    "synthetic-s1",
    "synthetic-s10",
    "auc-imbalanced",
    "robust-q6",
    "robust-q12",
    "synthetic-theory",
];

/// Config text of a shipped preset. One epoch is `q` steps, so 200 epochs
/// at `q = 20` is `T = 4000`.
pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "synthetic-s1" => {
            "[problem]\nname = synthetic\nclients = 10\ndim = 20\ns = 1\ntau = 10\nnoise_sigma = 0.1\n\
             [algorithm]\nvariant = fgda, adafgda-adam\ngamma = 0.01\nlambda = 0.01\nq = 20\nT = 4000\nrho = 1\n\
             [output]\ndir = out/synthetic-s1\nseeds = 0, 1, 2\n"
        }
        "synthetic-s10" => {
            "[problem]\nname = synthetic\nclients = 10\ndim = 20\ns = 10\ntau = 10\nnoise_sigma = 0.1\n\
             [algorithm]\nvariant = fgda, adafgda-adam\ngamma = 0.01\nlambda = 0.01\nq = 20\nT = 4000\nrho = 1\n\
             [output]\ndir = out/synthetic-s10\nseeds = 0, 1, 2\n"
        }
        "auc-imbalanced" => {
            "[problem]\nname = auc\nclients = 10\ndim = 20\nn_per_client = 200\npos_ratio = 0.05\n\
             [algorithm]\nvariant = local-sgda, momentum-local-sgda, fgda, adafgda-adam\ngamma = 0.1\nlambda = 0.1\nq = 20\nT = 2000\nrho = 0.3\n\
             [output]\ndir = out/auc-imbalanced\nseeds = 0, 1, 2\n"
        }
        "robust-q6" => {
            "[problem]\nname = robust\nclients = 10\ndim = 10\nn_per_client = 100\n\
             [algorithm]\nvariant = adafgda-adam\ngamma = 0.1\nlambda = 0.1\nq = 6\nT = 1200\nrho = 0.01\n\
             [output]\ndir = out/robust-q6\nseeds = 0, 1, 2\n"
        }
        "robust-q12" => {
            "[problem]\nname = robust\nclients = 10\ndim = 10\nn_per_client = 100\n\
             [algorithm]\nvariant = adafgda-adam\ngamma = 0.1\nlambda = 0.1\nq = 12\nT = 1200\nrho = 0.01\n\
             [output]\ndir = out/robust-q12\nseeds = 0, 1, 2\n"
        }
        // Closest point found to the adaptive-matrix constraint system for
        // this instance: every constraint holds except tau_upper, which no
        // choice can satisfy together with gamma_upper.
        "synthetic-theory" => {
            "[problem]\nname = synthetic\nclients = 10\ndim = 20\ns = 1\ntau = 10\nnoise_sigma = 0.1\n\
             [algorithm]\nvariant = adafgda-adam\ngamma = 0.00005\nlambda = 0.2\neta_n = 1\neta_m = 20000000000\n\
             c1 = 1000\nc2 = 5\nq = 20\nT = 4000\nrho = 1\nrho_u = 2.1\n\
             [output]\ndir = out/synthetic-theory\nseeds = 0\n"
        }
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown preset `{name}` (available: {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    parse_config(text)
}
