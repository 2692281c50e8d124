//! Command-line front end.
//!
//! Every subcommand reads its settings from built-in defaults, then an
//! optional `--config` file, then flags, later sources winning. The resolved
//! settings are checked in full before any simulation starts and are echoed
//! to `manifest.txt` in the output directory; passing that manifest back as
//! `--config` reproduces the run exactly.
//!
//! Exit status is 0 on success, 1 for usage and validation errors and 2 for
//! failures while running.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches};

use crate::config::{load_config_file, render_config};
use crate::error::{invalid_param, Error, Result};
use crate::experiments::{
    cluster_scenario, compare_rules_with_lambda, grid, invasion_scenario, run_replicates,
    run_trajectory, sweep_b, sweep_population, sweep_rho0, EquilibriumStats, RunConfig,
};
use crate::fitting::{compare_fits, positive_only};
use crate::lattice::{GameParams, Pattern};
use crate::meanfield::mf_integrate;
use crate::output::{read_xy, save_pgm, Table};
use crate::rules::RuleKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Seed,
    Text,
    Reals,
    Counts,
    Switch,
}

impl Kind {
    fn expected(self) -> &'static str {
        match self {
            Kind::Real => "a real number",
            Kind::Count => "a non-negative integer",
            Kind::Seed => "a 64-bit unsigned integer",
            Kind::Text => "text",
            Kind::Reals => "a comma-separated list of real numbers",
            Kind::Counts => "a comma-separated list of non-negative integers",
            Kind::Switch => "true or false",
        }
    }
}

type Check = (&'static str, fn(f64) -> bool);

struct KeySpec {
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    range: Option<Check>,
    help: &'static str,
}

const TEMPTATION: Check = ("(1, 2]", |x| x > 1.0 && x <= 2.0);
const UNIT: Check = ("[0, 1]", |x| (0.0..=1.0).contains(&x));
const OPEN_UNIT: Check = ("(0, 1)", |x| x > 0.0 && x < 1.0);
const HALF_OPEN_UNIT: Check = ("(0, 1]", |x| x > 0.0 && x <= 1.0);
const POSITIVE: Check = ("(0, inf)", |x| x > 0.0 && x.is_finite());
const SIDE: Check = ("[3, inf)", |x| x >= 3.0);
const AT_LEAST_ONE: Check = ("[1, inf)", |x| x >= 1.0);

const KEYS: &[KeySpec] = &[
    KeySpec {
        name: "rule",
        kind: Kind::Text,
        default: Some("mc"),
        range: None,
        help: "update rule: mc, ui, rd or fermi",
    },
    KeySpec {
        name: "lambda",
        kind: Kind::Real,
        default: Some("0.0625"),
        range: Some(POSITIVE),
        help: "Fermi noise",
    },
    KeySpec {
        name: "b",
        kind: Kind::Real,
        default: Some("1.10"),
        range: Some(TEMPTATION),
        help: "temptation to defect",
    },
    KeySpec {
        name: "l",
        kind: Kind::Count,
        default: Some("100"),
        range: Some(SIDE),
        help: "lattice side length",
    },
    KeySpec {
        name: "rho0",
        kind: Kind::Real,
        default: Some("0.5"),
        range: Some(UNIT),
        help: "initial cooperator fraction",
    },
    KeySpec {
        name: "rounds",
        kind: Kind::Count,
        default: Some("2000"),
        range: Some(AT_LEAST_ONE),
        help: "rounds per replicate",
    },
    KeySpec {
        name: "window",
        kind: Kind::Count,
        default: Some("200"),
        range: Some(AT_LEAST_ONE),
        help: "trailing rounds averaged for the equilibrium",
    },
    KeySpec {
        name: "replicates",
        kind: Kind::Count,
        default: Some("100"),
        range: Some(AT_LEAST_ONE),
        help: "independent replicates",
    },
    KeySpec {
        name: "seed",
        kind: Kind::Seed,
        default: None,
        range: None,
        help: "master seed (drawn from system entropy when absent)",
    },
    KeySpec {
        name: "snapshots",
        kind: Kind::Counts,
        default: Some("0,20,100,200,400,600,800,1000"),
        range: None,
        help: "rounds at which replicate 0 is saved as PGM",
    },
    KeySpec {
        name: "b-start",
        kind: Kind::Real,
        default: Some("1.02"),
        range: Some(TEMPTATION),
        help: "first temptation of the sweep",
    },
    KeySpec {
        name: "b-end",
        kind: Kind::Real,
        default: Some("1.40"),
        range: Some(TEMPTATION),
        help: "last temptation of the sweep",
    },
    KeySpec {
        name: "b-step",
        kind: Kind::Real,
        default: Some("0.02"),
        range: Some(POSITIVE),
        help: "temptation increment",
    },
    KeySpec {
        name: "fractions",
        kind: Kind::Reals,
        default: Some("0.04,0.0625,0.1089"),
        range: Some(OPEN_UNIT),
        help: "invading defector fractions",
    },
    KeySpec {
        name: "width",
        kind: Kind::Count,
        default: Some("4"),
        range: Some(AT_LEAST_ONE),
        help: "cooperator cluster width",
    },
    KeySpec {
        name: "rho0-values",
        kind: Kind::Reals,
        default: Some("0.2,0.4,0.6,0.8,0.99"),
        range: Some(HALF_OPEN_UNIT),
        help: "initial cooperator fractions to compare",
    },
    KeySpec {
        name: "sides",
        kind: Kind::Counts,
        default: Some("10,20,40,60,100"),
        range: Some(SIDE),
        help: "lattice sides to compare",
    },
    KeySpec {
        name: "degree",
        kind: Kind::Count,
        default: Some("4"),
        range: Some(AT_LEAST_ONE),
        help: "neighbors per player",
    },
    KeySpec {
        name: "dt",
        kind: Kind::Real,
        default: Some("0.01"),
        range: Some(POSITIVE),
        help: "integration step",
    },
    KeySpec {
        name: "horizon",
        kind: Kind::Real,
        default: Some("1000"),
        range: Some(POSITIVE),
        help: "integration end time",
    },
    KeySpec {
        name: "input",
        kind: Kind::Text,
        default: None,
        range: None,
        help: "CSV with b and rho_mean columns",
    },
    KeySpec {
        name: "starts",
        kind: Kind::Count,
        default: Some("50"),
        range: None,
        help: "random starts per fitted family",
    },
    KeySpec {
        name: "positive-only",
        kind: Kind::Switch,
        default: Some("false"),
        range: None,
        help: "fit only points with rho > 0",
    },
    KeySpec {
        name: "threads",
        kind: Kind::Count,
        default: Some("0"),
        range: None,
        help: "worker threads (0 uses every core)",
    },
    KeySpec {
        name: "out",
        kind: Kind::Text,
        default: Some("out"),
        range: None,
        help: "output directory",
    },
];

fn items(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn spec(name: &str) -> &'static KeySpec {
    KEYS.iter()
        .find(|k| k.name == name)
        .expect("key listed in KEYS")
}

/// The subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    SweepB,
    Invade,
    Cluster,
    SweepRho0,
    SweepN,
    CompareRules,
    MeanField,
    Fit,
}

const RUN: [&str; 7] = [
    "rounds",
    "window",
    "replicates",
    "seed",
    "threads",
    "out",
    "lambda",
];

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::SweepB,
        Command::Invade,
        Command::Cluster,
        Command::SweepRho0,
        Command::SweepN,
        Command::CompareRules,
        Command::MeanField,
        Command::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SweepB => "sweep-b",
            Command::Invade => "invade",
            Command::Cluster => "cluster",
            Command::SweepRho0 => "sweep-rho0",
            Command::SweepN => "sweep-n",
            Command::CompareRules => "compare-rules",
            Command::MeanField => "meanfield",
            Command::Fit => "fit",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }

    fn about(self) -> &'static str {
        match self {
            Command::Simulate => "Replicated run from a random initial lattice",
            Command::SweepB => "Equilibrium density and returns across temptation values",
            Command::Invade => "Centered defector blocks invading an all-cooperator lattice",
            Command::Cluster => "Spread of a small cooperator cluster among defectors",
            Command::SweepRho0 => "Sensitivity to the initial cooperator fraction",
            Command::SweepN => "Sensitivity to the population size",
            Command::CompareRules => "The four update rules from identical initial lattices",
            Command::MeanField => "Well-mixed density trajectory",
            Command::Fit => "Fit power-law, quadratic and trigonometric curves to rho(b)",
        }
    }

    /// Keys accepted by this command, in manifest order.
    pub fn keys(self) -> Vec<&'static str> {
        let mut keys: Vec<&'static str> = match self {
            Command::Simulate => vec!["rule", "b", "l", "rho0", "snapshots"],
            Command::SweepB => vec!["rule", "l", "rho0", "b-start", "b-end", "b-step"],
            Command::Invade => vec!["rule", "b", "l", "fractions", "snapshots"],
            Command::Cluster => vec!["rule", "b", "l", "width", "snapshots"],
            Command::SweepRho0 => vec!["rule", "b", "l", "rho0-values"],
            Command::SweepN => vec!["rule", "b", "rho0", "sides"],
            Command::CompareRules => vec!["b", "l", "rho0"],
            Command::MeanField => {
                return vec!["b", "rho0", "degree", "dt", "horizon", "out"];
            }
            Command::Fit => {
                return vec!["input", "starts", "seed", "positive-only", "out"];
            }
        };
        keys.extend(RUN);
        keys
    }
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    values: BTreeMap<&'static str, String>,
}

impl CliConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Output directory.
    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("out"))
    }

    /// Manifest text: the command followed by every resolved key.
    pub fn manifest(&self) -> String {
        let mut text = String::from("# gridgame run manifest\n");
        let mut pairs = vec![("command", self.command.name())];
        pairs.extend(
            self.command
                .keys()
                .into_iter()
                .filter_map(|k| self.get(k).map(|v| (k, v))),
        );
        text.push_str(&render_config(pairs));
        text
    }

    fn raw(&self, key: &'static str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            invalid_param(
                key,
                format!("`{key}` is required for {}", self.command.name()),
            )
        })
    }

    fn type_error(key: &str, value: &str) -> Error {
        Error::TypeError {
            key: key.to_string(),
            value: value.to_string(),
            expected: spec(key).kind.expected(),
        }
    }

    fn check(key: &'static str, value: f64, text: &str) -> Result<()> {
        match spec(key).range {
            Some((range, ok)) if !ok(value) => Err(Error::RangeError {
                key: key.to_string(),
                value: text.to_string(),
                range,
            }),
            _ => Ok(()),
        }
    }

    pub fn real(&self, key: &'static str) -> Result<f64> {
        let text = self.raw(key)?;
        let value: f64 = text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Self::type_error(key, text))?;
        Self::check(key, value, text)?;
        Ok(value)
    }

    pub fn count(&self, key: &'static str) -> Result<usize> {
        let text = self.raw(key)?;
        let value: usize = text.parse().map_err(|_| Self::type_error(key, text))?;
        Self::check(key, value as f64, text)?;
        Ok(value)
    }

    pub fn seed(&self) -> Result<u64> {
        let text = self.raw("seed")?;
        text.parse().map_err(|_| Self::type_error("seed", text))
    }

    pub fn switch(&self, key: &'static str) -> Result<bool> {
        let text = self.raw(key)?;
        text.parse().map_err(|_| Self::type_error(key, text))
    }

    pub fn reals(&self, key: &'static str) -> Result<Vec<f64>> {
        let text = self.raw(key)?;
        items(text)
            .map(|item| {
                let v: f64 = item
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| Self::type_error(key, text))?;
                Self::check(key, v, item)?;
                Ok(v)
            })
            .collect()
    }

    pub fn counts(&self, key: &'static str) -> Result<Vec<usize>> {
        let text = self.raw(key)?;
        items(text)
            .map(|item| {
                let v: usize = item.parse().map_err(|_| Self::type_error(key, text))?;
                Self::check(key, v as f64, item)?;
                Ok(v)
            })
            .collect()
    }

    pub fn rule(&self) -> Result<RuleKind> {
        let name = self.get("rule").unwrap_or("mc");
        let lambda = self.real("lambda")?;
        RuleKind::parse(name, lambda).map_err(|e| match e {
            Error::InvalidParameter { name: "rule", .. } => Error::RangeError {
                key: "rule".into(),
                value: name.to_string(),
                range: "{mc, ui, rd, fermi}",
            },
            other => other,
        })
    }

    fn base_run(&self, b: f64) -> Result<RunConfig> {
        let rule = self.rule()?;
        let side = match self.get("l") {
            Some(_) => self.count("l")?,
            None => 100,
        };
        let rho0 = match self.get("rho0") {
            Some(_) => self.real("rho0")?,
            None => 0.5,
        };
        Ok(RunConfig::new(side, GameParams::new(b, rule)?)
            .pattern(Pattern::Bernoulli(rho0))
            .rounds(self.count("rounds")?, self.count("window")?)
            .replicates(self.count("replicates")?)
            .seed(self.seed()?))
    }
}

/// Typed work order derived from a [`CliConfig`].
#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Simulate {
        config: RunConfig,
        snapshots: Vec<usize>,
    },
    SweepB {
        base: RunConfig,
        b_values: Vec<f64>,
    },
    Invade {
        base: RunConfig,
        /// Requested fraction, block width and realized fraction.
        scenarios: Vec<(f64, usize, f64)>,
        snapshots: Vec<usize>,
    },
    Cluster {
        config: RunConfig,
        snapshots: Vec<usize>,
    },
    SweepRho0 {
        base: RunConfig,
        values: Vec<f64>,
    },
    SweepN {
        base: RunConfig,
        sides: Vec<usize>,
    },
    CompareRules {
        base: RunConfig,
        lambda: f64,
    },
    MeanField {
        rho0: f64,
        b: f64,
        degree: usize,
        dt: f64,
        horizon: f64,
    },
    Fit {
        input: PathBuf,
        starts: usize,
        seed: u64,
        positive_only: bool,
    },
}

impl Plan {
    /// Checks every setting of `config` and builds the work order.
    pub fn from_config(config: &CliConfig) -> Result<Plan> {
        for key in config.command.keys() {
            if config.get(key).is_none() {
                continue;
            }
            match spec(key).kind {
                Kind::Real => drop(config.real(key)?),
                Kind::Count => drop(config.count(key)?),
                Kind::Seed => drop(config.seed()?),
                Kind::Reals => drop(config.reals(key)?),
                Kind::Counts => drop(config.counts(key)?),
                Kind::Switch => drop(config.switch(key)?),
                Kind::Text => {}
            }
        }
        let plan = match config.command {
            Command::Simulate => Plan::Simulate {
                config: config.base_run(config.real("b")?)?,
                snapshots: config.counts("snapshots")?,
            },
            Command::SweepB => {
                let (start, end) = (config.real("b-start")?, config.real("b-end")?);
                let b_values = grid(start, end, config.real("b-step")?)?;
                Plan::SweepB {
                    base: config.base_run(start)?,
                    b_values,
                }
            }
            Command::Invade => {
                let base = config.base_run(config.real("b")?)?;
                let scenarios = config
                    .reals("fractions")?
                    .into_iter()
                    .map(|f| {
                        let (pattern, exact) = invasion_scenario(base.side, f)?;
                        let Pattern::AllCooperatorsWithDefectorBlock(w) = pattern else {
                            unreachable!("invasion scenarios use defector blocks")
                        };
                        Ok((f, w, exact))
                    })
                    .collect::<Result<_>>()?;
                Plan::Invade {
                    base,
                    scenarios,
                    snapshots: config.counts("snapshots")?,
                }
            }
            Command::Cluster => {
                let base = config.base_run(config.real("b")?)?;
                let pattern = cluster_scenario(base.side, config.count("width")?)?;
                Plan::Cluster {
                    config: base.pattern(pattern),
                    snapshots: config.counts("snapshots")?,
                }
            }
            Command::SweepRho0 => Plan::SweepRho0 {
                base: config.base_run(config.real("b")?)?,
                values: config.reals("rho0-values")?,
            },
            Command::SweepN => Plan::SweepN {
                base: config.base_run(config.real("b")?)?,
                sides: config.counts("sides")?,
            },
            Command::CompareRules => Plan::CompareRules {
                base: config.base_run(config.real("b")?)?,
                lambda: config.real("lambda")?,
            },
            Command::MeanField => Plan::MeanField {
                rho0: config.real("rho0")?,
                b: config.real("b")?,
                degree: config.count("degree")?,
                dt: config.real("dt")?,
                horizon: config.real("horizon")?,
            },
            Command::Fit => {
                let input = PathBuf::from(config.raw("input")?);
                if !input.is_file() {
                    return Err(Error::MissingFile(input));
                }
                Plan::Fit {
                    input,
                    starts: config.count("starts")?,
                    seed: config.seed()?,
                    positive_only: config.switch("positive-only")?,
                }
            }
        };
        plan.validate()?;
        Ok(plan)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Plan::Simulate { config, .. } | Plan::Cluster { config, .. } => config.validate(),
            Plan::SweepB { base, b_values } => {
                if b_values.is_empty() {
                    return Err(invalid_param("b-end", "must not precede b-start"));
                }
                base.validate()
            }
            Plan::Invade {
                base, scenarios, ..
            } => {
                if scenarios.is_empty() {
                    return Err(invalid_param("fractions", "need at least one fraction"));
                }
                base.validate()
            }
            Plan::SweepRho0 { base, values } => {
                if values.is_empty() {
                    return Err(invalid_param("rho0-values", "need at least one value"));
                }
                base.validate()
            }
            Plan::SweepN { base, sides } => {
                if sides.is_empty() {
                    return Err(invalid_param("sides", "need at least one side"));
                }
                base.validate()
            }
            Plan::CompareRules { base, .. } => base.validate(),
            Plan::MeanField { .. } | Plan::Fit { .. } => Ok(()),
        }
    }
}

fn command_line() -> clap::Command {
    let mut app = clap::Command::new("gridgame")
        .about("Spatial prisoner's dilemma simulations and fits")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for command in Command::ALL {
        let mut sub = clap::Command::new(command.name())
            .about(command.about())
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("key=value settings file; flags take precedence"),
            );
        for key in command.keys() {
            let spec = spec(key);
            let arg = Arg::new(key).long(key);
            let arg = if spec.kind == Kind::Switch {
                arg.action(ArgAction::SetTrue).help(spec.help)
            } else {
                let help = match spec.default {
                    Some(d) if !d.is_empty() => format!("{} [default: {d}]", spec.help),
                    _ => spec.help.to_string(),
                };
                arg.value_name("VALUE").help(help)
            };
            sub = sub.arg(arg);
        }
        app = app.subcommand(sub);
    }
    app
}

fn merge(command: Command, matches: &ArgMatches, file: Option<&Path>) -> Result<CliConfig> {
    let keys = command.keys();
    let mut values: BTreeMap<&'static str, String> = keys
        .iter()
        .filter_map(|k| spec(k).default.map(|d| (*k, d.to_string())))
        .collect();
    if let Some(path) = file {
        for entry in load_config_file(path)? {
            if entry.key == "command" {
                if entry.value != command.name() {
                    return Err(invalid_param(
                        "command",
                        format!(
                            "{} holds settings for `{}`, not `{}`",
                            path.display(),
                            entry.value,
                            command.name()
                        ),
                    ));
                }
                continue;
            }
            let key = keys
                .iter()
                .find(|k| **k == entry.key)
                .ok_or_else(|| Error::UnknownKey(entry.key.clone()))?;
            values.insert(key, entry.value);
        }
    }
    for key in &keys {
        if spec(key).kind == Kind::Switch {
            if matches.get_flag(key) {
                values.insert(key, "true".into());
            }
        } else if let Some(v) = matches.get_one::<String>(key) {
            values.insert(key, v.clone());
        }
    }
    if keys.contains(&"seed") && !values.contains_key("seed") {
        values.insert("seed", rand::random::<u64>().to_string());
    }
    Ok(CliConfig { command, values })
}

/// Outcome of argument parsing: a config to run, or text to print.
#[derive(Debug)]
pub enum Parsed {
    Run(CliConfig),
    /// Help or version requested explicitly.
    Info(String),
}

/// Parses `args` (including the program name) into a resolved config.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Parsed, String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command_line().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Ok(Parsed::Info(e.render().to_string()))
                }
                _ => Err(e.render().to_string()),
            }
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let command = Command::from_name(name).expect("registered subcommand");
    let file = sub.get_one::<String>("config").map(PathBuf::from);
    merge(command, sub, file.as_deref())
        .map(Parsed::Run)
        .map_err(|e| format!("error: {e}\n"))
}

fn emit(table: &Table, dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    table.save(&path)?;
    written.push(path);
    Ok(())
}

fn snapshot_files(
    config: &RunConfig,
    rounds: &[usize],
    dir: &Path,
    prefix: &str,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    if rounds.is_empty() {
        return Ok(());
    }
    let trajectory = run_trajectory(config, 0, rounds)?;
    for (round, lattice) in &trajectory.snapshots {
        let path = dir.join(format!("{prefix}_t{round:04}.pgm"));
        save_pgm(&path, lattice)?;
        written.push(path);
    }
    Ok(())
}

fn summary(stats: &EquilibriumStats) -> Table {
    let mut table = Table::new(&[
        "replicates",
        "rho_mean",
        "rho_sd",
        "rho_se",
        "drift",
        "U_C",
        "U_D",
        "defector_cores",
    ]);
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    table.push(vec![
        stats.replicates().to_string(),
        stats.rho_mean.to_string(),
        stats.rho_stddev.to_string(),
        stats.standard_error().to_string(),
        stats.trailing_drift().to_string(),
        opt(stats.avg_return_c),
        opt(stats.avg_return_d),
        stats.defector_core_mean.to_string(),
    ]);
    table
}

/// Runs a validated plan, writing every file inside `dir`. Returns the
/// files written and a short report.
pub fn execute(plan: &Plan, dir: &Path) -> Result<(Vec<PathBuf>, String)> {
    let mut written = Vec::new();
    let report = match plan {
        Plan::Simulate { config, snapshots } | Plan::Cluster { config, snapshots } => {
            let stats = run_replicates(config)?;
            emit(
                &Table::series(&stats.series_mean),
                dir,
                "series.csv",
                &mut written,
            )?;
            emit(&summary(&stats), dir, "summary.csv", &mut written)?;
            snapshot_files(config, snapshots, dir, "snapshot", &mut written)?;
            format!(
                "rho_mean={:.4} sd={:.4} over {} replicates\n",
                stats.rho_mean,
                stats.rho_stddev,
                stats.replicates()
            )
        }
        Plan::SweepB { base, b_values } => {
            let rows = sweep_b(base, b_values)?;
            emit(&Table::sweep(&rows), dir, "sweep.csv", &mut written)?;
            rows.iter()
                .map(|r| format!("b={} rho={:.4}\n", r.b, r.stats.rho_mean))
                .collect()
        }
        Plan::Invade {
            base,
            scenarios,
            snapshots,
        } => {
            let mut table = Table::new(&[
                "fraction",
                "block",
                "realized_fraction",
                "rho_mean",
                "rho_sd",
                "defector_cores",
            ]);
            let mut report = String::new();
            for &(fraction, w, exact) in scenarios {
                let config = base
                    .clone()
                    .pattern(Pattern::AllCooperatorsWithDefectorBlock(w));
                let stats = run_replicates(&config)?;
                emit(
                    &Table::series(&stats.series_mean),
                    dir,
                    &format!("series_w{w}.csv"),
                    &mut written,
                )?;
                snapshot_files(
                    &config,
                    snapshots,
                    dir,
                    &format!("invade_w{w}"),
                    &mut written,
                )?;
                table.push(vec![
                    fraction.to_string(),
                    w.to_string(),
                    exact.to_string(),
                    stats.rho_mean.to_string(),
                    stats.rho_stddev.to_string(),
                    stats.defector_core_mean.to_string(),
                ]);
                report.push_str(&format!(
                    "block {w}x{w}: rho={:.4} cores={:.1}\n",
                    stats.rho_mean, stats.defector_core_mean
                ));
            }
            emit(&table, dir, "invasion.csv", &mut written)?;
            report
        }
        Plan::SweepRho0 { base, values } => {
            let rows = sweep_rho0(base, values)?;
            emit(&Table::rho0(&rows), dir, "rho0.csv", &mut written)?;
            rows.iter()
                .map(|r| format!("rho0={} rho={:.4}\n", r.rho0, r.stats.rho_mean))
                .collect()
        }
        Plan::SweepN { base, sides } => {
            let rows = sweep_population(base, sides)?;
            emit(
                &Table::population(&rows),
                dir,
                "population.csv",
                &mut written,
            )?;
            rows.iter()
                .map(|r| format!("N={} rho={:.4}\n", r.population, r.stats.rho_mean))
                .collect()
        }
        Plan::CompareRules { base, lambda } => {
            let rows = compare_rules_with_lambda(base, *lambda)?;
            emit(&Table::rules(&rows), dir, "rules.csv", &mut written)?;
            let mut header = vec!["t"];
            header.extend(rows.iter().map(|r| r.rule.name()));
            let mut series = Table::new(&header);
            for t in 0..=base.rounds {
                let mut row = vec![t.to_string()];
                row.extend(rows.iter().map(|r| r.stats.series_mean[t].to_string()));
                series.push(row);
            }
            emit(&series, dir, "rules_series.csv", &mut written)?;
            rows.iter()
                .map(|r| format!("{}: rho={:.4}\n", r.rule.name(), r.stats.rho_mean))
                .collect()
        }
        Plan::MeanField {
            rho0,
            b,
            degree,
            dt,
            horizon,
        } => {
            let states = mf_integrate(*rho0, *b, *degree, *dt, *horizon)?;
            emit(
                &Table::meanfield(&states),
                dir,
                "meanfield.csv",
                &mut written,
            )?;
            let last = states.last().expect("at least the initial state");
            format!("rho({})={:.6}\n", last.t, last.rho)
        }
        Plan::Fit {
            input,
            starts,
            seed,
            positive_only: only_positive,
        } => {
            let (mut xs, mut ys) = read_xy(input)?;
            if *only_positive {
                (xs, ys) = positive_only(&xs, &ys);
            }
            let table = Table::fit_report(&compare_fits(&xs, &ys, *starts, *seed));
            emit(&table, dir, "fit.csv", &mut written)?;
            table.to_csv_string()
        }
    };
    Ok((written, report))
}

/// Entry point: parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(args) {
        Ok(Parsed::Run(config)) => config,
        Ok(Parsed::Info(text)) => {
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
        Err(text) => {
            let _ = write!(stderr, "{text}");
            return EXIT_USAGE;
        }
    };
    let plan = match Plan::from_config(&config) {
        Ok(plan) => plan,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let threads = config.count("threads").unwrap_or(0);
    let dir = config.out_dir();
    let outcome = (|| -> Result<(Vec<PathBuf>, String)> {
        fs::create_dir_all(&dir)?;
        let manifest = dir.join(MANIFEST_FILE);
        fs::write(&manifest, config.manifest())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        let (mut written, report) = pool.install(|| execute(&plan, &dir))?;
        written.insert(0, manifest);
        Ok((written, report))
    })();
    match outcome {
        Ok((written, report)) => {
            let _ = write!(stdout, "{report}");
            for path in written {
                let _ = writeln!(stdout, "wrote {}", path.display());
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: &[&str]) -> CliConfig {
        let mut argv = vec!["gridgame"];
        argv.extend(args);
        match parse_args(argv).unwrap() {
            Parsed::Run(c) => c,
            Parsed::Info(_) => panic!("unexpected info"),
        }
    }

    #[test]
    fn every_key_has_a_spec() {
        for command in Command::ALL {
            for key in command.keys() {
                spec(key);
            }
            assert_eq!(Command::from_name(command.name()), Some(command));
        }
    }

    #[test]
    fn defaults_and_flags() {
        let c = resolve(&["simulate", "--b", "1.2", "--seed", "3"]);
        assert_eq!(c.real("b").unwrap(), 1.2);
        assert_eq!(c.count("l").unwrap(), 100);
        assert_eq!(c.seed().unwrap(), 3);
        assert_eq!(c.rule().unwrap(), RuleKind::MonteCarlo);
    }

    #[test]
    fn missing_seed_is_drawn() {
        let c = resolve(&["simulate"]);
        assert!(c.seed().is_ok());
        assert!(c.manifest().contains("\nseed="));
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(parse_args(["gridgame", "simulate", "--bogus", "1"]).is_err());
        assert!(parse_args(["gridgame", "meanfield", "--rule", "mc"]).is_err());
        assert!(parse_args(["gridgame", "frobnicate"]).is_err());
    }

    #[test]
    fn empty_arguments_are_a_usage_error() {
        let err = parse_args(["gridgame"]).unwrap_err();
        assert!(err.contains("Usage"));
    }

    #[test]
    fn range_error_cites_interval() {
        let c = resolve(&["simulate", "--b", "2.5", "--seed", "1"]);
        match Plan::from_config(&c).unwrap_err() {
            Error::RangeError { key, range, .. } => {
                assert_eq!(key, "b");
                assert_eq!(range, "(1, 2]");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_error_names_key() {
        let c = resolve(&["simulate", "--l", "ten", "--seed", "1"]);
        assert!(matches!(
            Plan::from_config(&c),
            Err(Error::TypeError { ref key, .. }) if key == "l"
        ));
    }

    #[test]
    fn unknown_rule_is_a_range_error() {
        let c = resolve(&["simulate", "--rule", "best", "--seed", "1"]);
        assert!(matches!(
            Plan::from_config(&c),
            Err(Error::RangeError { ref key, .. }) if key == "rule"
        ));
    }

    #[test]
    fn window_must_fit_in_run() {
        let c = resolve(&[
            "simulate", "--rounds", "100", "--window", "200", "--seed", "1",
        ]);
        assert!(Plan::from_config(&c).is_err());
    }

    #[test]
    fn manifest_lists_command_and_keys() {
        let c = resolve(&["meanfield", "--b", "1.3"]);
        let m = c.manifest();
        assert!(m.contains("command=meanfield\n"));
        assert!(m.contains("b=1.3\n"));
        assert!(m.contains("dt=0.01\n"));
        assert!(!m.contains("seed"));
    }
}
