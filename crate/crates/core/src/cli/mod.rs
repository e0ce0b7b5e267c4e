//! Batch command-line front end. Every subcommand prints one JSON document
//! (schema version [`json::SCHEMA_VERSION`]) to stdout; errors go to stderr
//! as a single-line JSON object.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver or quadrature failure.

pub mod json;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::criteria::{
    check_necessary_conditions, evaluate_criterion, CriterionKind, DesignMeasure, DesignRegion,
    DEFAULT_TAU_HALF_WIDTH, OPTIMALITY_TOL,
};
use crate::error::{Error, Result};
use crate::gpcm::{
    approx_locally_optimal_item, category_probabilities, d_m_d_alpha, d_m_d_tau, d_pi_d_alpha,
    d_pi_d_tau, fisher_information, hessian_m_tau, Ability, ItemParams,
};
use crate::reproduce::{run_criterion, TITLES};
use crate::search::{optimize_design, sensitivity_grid, support_clusters, CandidateSet};
use crate::sim::{cramer_rao_check, SimConfig};
use crate::solvers::{alpha_plus, critical_scale, estimate_s_tilde, one_point_never_bayes_optimal, optimal_alpha};
use crate::weights::{Family, WeightDistribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Comma-separated list of reals, e.g. `-1,0,1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Floats(pub Vec<f64>);

fn parse_floats(s: &str) -> std::result::Result<Floats, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Floats)
}

/// Comma-separated acceptance criterion ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Ids(pub Vec<u8>);

fn parse_ids(s: &str) -> std::result::Result<Ids, String> {
    s.split(',')
        .map(|t| match t.trim().parse::<u8>() {
            Ok(id) if (1..=TITLES.len() as u8).contains(&id) => Ok(id),
            _ => Err(format!("`{t}` is not a criterion id in 1..={}", TITLES.len())),
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Ids)
}

#[derive(Debug, Parser)]
#[command(
    name = "gpcm-design",
    version,
    about = "Optimal test designs for the generalized partial credit model"
)]
struct Cli {
    /// Worker threads (default: one per hardware thread). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON object of flag values for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ItemArgs {
    /// Thresholds, comma separated.
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    tau: Floats,
    /// Discriminations, comma separated (default: all ones).
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    alpha: Option<Floats>,
}

impl ItemArgs {
    fn item(&self) -> Result<ItemParams> {
        let alpha = match &self.alpha {
            Some(a) => a.0.clone(),
            None => vec![1.0; self.tau.0.len()],
        };
        ItemParams::new(self.tau.0.clone(), alpha)
    }
}

#[derive(Debug, Args)]
struct WeightArgs {
    /// Weight as `family:location:scale`, e.g. `normal:0:1`.
    #[arg(long, conflicts_with_all = ["family", "scale"])]
    weight: Option<String>,
    /// Weight family: uniform, normal or logistic.
    #[arg(long)]
    family: Option<Family>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    location: f64,
    /// Half-width (uniform), standard deviation (normal) or scale (logistic).
    #[arg(long)]
    scale: Option<f64>,
}

impl WeightArgs {
    fn weight(&self) -> Result<WeightDistribution> {
        match (&self.weight, self.family, self.scale) {
            (Some(spec), _, _) => spec.parse(),
            (None, Some(family), Some(scale)) => WeightDistribution::new(family, self.location, scale),
            _ => Err(Error::invalid("give --weight family:location:scale, or --family and --scale")),
        }
    }
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// One-point design: thresholds of the single item.
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    tau: Option<Floats>,
    /// Discriminations of the single item (default: all ones).
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    alpha: Option<Floats>,
    /// Design measure as JSON: `{"points": [{"point": {...}, "weight": w}, ...]}`.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["tau", "locally_optimal"])]
    design: Option<PathBuf>,
    /// Limiting locally optimal one-point design with these discriminations.
    #[arg(long, value_parser = parse_floats, conflicts_with = "tau")]
    locally_optimal: Option<Floats>,
    /// Ability at which the locally optimal design is centred.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    design_location: f64,
}

impl DesignArgs {
    fn design(&self) -> Result<DesignMeasure> {
        if let Some(path) = &self.design {
            return read_design(path);
        }
        if let Some(alphas) = &self.locally_optimal {
            return DesignMeasure::locally_optimal(&alphas.0, self.design_location);
        }
        match &self.tau {
            Some(tau) => {
                let item = ItemArgs {
                    tau: tau.clone(),
                    alpha: self.alpha.clone(),
                }
                .item()?;
                Ok(DesignMeasure::one_point(item))
            }
            None => Err(Error::invalid("give a design: --tau/--alpha, --design FILE or --locally-optimal")),
        }
    }
}

fn read_design(path: &Path) -> Result<DesignMeasure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Category probabilities of one item at one or more abilities.
    Probs {
        /// Abilities, comma separated.
        #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
        theta: Floats,
        #[command(flatten)]
        item: ItemArgs,
    },
    /// Fisher information of one item, optionally with derivatives.
    Info {
        #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
        theta: Floats,
        #[command(flatten)]
        item: ItemArgs,
        /// Include first derivatives in thresholds and discriminations.
        #[arg(long)]
        derivatives: bool,
        /// Include the threshold Hessian of the information.
        #[arg(long)]
        hessian: bool,
    },
    /// Bayesian criterion value of a design.
    Criterion {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long)]
        criterion: CriterionKind,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Sensitivity function of a design over a (tau1, tau2) grid.
    SensitivityGrid {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long)]
        criterion: CriterionKind,
        /// Fixed discriminations of the candidate items.
        #[arg(long, value_parser = parse_floats, default_value = "1,1")]
        alpha: Floats,
        /// Threshold range `lo,hi` used for both axes.
        #[arg(long, value_parser = parse_floats, allow_hyphen_values = true, default_value = "-12,12")]
        tau_range: Floats,
        /// Grid nodes per axis.
        #[arg(long, default_value_t = 201)]
        resolution: usize,
        /// Design under test (default: locally optimal at the weight location).
        #[arg(long, value_name = "FILE")]
        design: Option<PathBuf>,
        /// Write PREFIX.csv and PREFIX.json instead of printing.
        #[arg(long, value_name = "PREFIX")]
        out: Option<PathBuf>,
    },
    /// Necessary conditions for one-point Bayes optimality.
    CheckConditions {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long, default_value_t = 1.0)]
        a_total: f64,
    },
    /// Largest weight scale allowed by the necessary condition.
    CriticalScale {
        #[arg(long)]
        family: Family,
        /// Criterion (default: both).
        #[arg(long)]
        criterion: Option<CriterionKind>,
        #[arg(long, default_value_t = 1.0)]
        a_total: f64,
    },
    /// Optimal discrimination of the one-point design.
    OptimalAlpha {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long)]
        criterion: CriterionKind,
    },
    /// Largest discrimination satisfying the necessary condition.
    AlphaPlus {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long)]
        criterion: CriterionKind,
    },
    /// Compares alpha* with alpha+ over a list of scales.
    EvidenceTable {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        criterion: CriterionKind,
        #[arg(long, value_parser = parse_floats)]
        scales: Floats,
    },
    /// Largest scale at which the one-point design is still optimal.
    STilde {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        criterion: CriterionKind,
        /// Fixed discriminations of the design and the candidates.
        #[arg(long, value_parser = parse_floats, default_value = "1,1")]
        alpha: Floats,
        #[arg(long, default_value_t = DEFAULT_TAU_HALF_WIDTH)]
        tau_half_width: f64,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        /// Bisection tolerance on the scale.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Multiplicative-weight optimisation over a threshold grid.
    OptimizeDesign {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long)]
        criterion: CriterionKind,
        /// Fixed discriminations; their count sets the number of thresholds.
        #[arg(long, value_parser = parse_floats, default_value = "1")]
        alpha: Floats,
        #[arg(long, value_parser = parse_floats, allow_hyphen_values = true, default_value = "-8,8")]
        tau_range: Floats,
        #[arg(long, default_value_t = 161)]
        resolution: usize,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value_t = OPTIMALITY_TOL)]
        tol: f64,
        /// Include the per-iteration criterion history.
        #[arg(long)]
        history: bool,
    },
    /// Monte Carlo check of the Cramer-Rao bound for the MLE.
    Simulate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        n_items: usize,
        #[arg(long, default_value_t = 2000)]
        n_replications: usize,
        #[arg(long, allow_hyphen_values = true)]
        theta_true: f64,
        /// Use the near-optimal item with this `c`, centred at the true ability.
        #[arg(long, conflicts_with_all = ["tau", "design", "locally_optimal"])]
        optimal_c: Option<f64>,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Recomputes the published results and prints pass/fail per criterion.
    ReproducePaper {
        /// Criterion ids, comma separated (default: all).
        #[arg(long, value_parser = parse_ids)]
        only: Option<Ids>,
        /// Print JSON instead of one line per criterion.
        #[arg(long)]
        json: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Probs { .. } => "probs",
            Command::Info { .. } => "info",
            Command::Criterion { .. } => "criterion",
            Command::SensitivityGrid { .. } => "sensitivity-grid",
            Command::CheckConditions { .. } => "check-conditions",
            Command::CriticalScale { .. } => "critical-scale",
            Command::OptimalAlpha { .. } => "optimal-alpha",
            Command::AlphaPlus { .. } => "alpha-plus",
            Command::EvidenceTable { .. } => "evidence-table",
            Command::STilde { .. } => "s-tilde",
            Command::OptimizeDesign { .. } => "optimize-design",
            Command::Simulate { .. } => "simulate",
            Command::ReproducePaper { .. } => "reproduce-paper",
        }
    }
}

/// What a subcommand produced.
enum Output {
    Json(Value),
    Text(String),
    /// Everything was written to files.
    Nothing,
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn th(x: f64) -> Result<Ability> {
    Ability::new(x)
}

fn range(r: &Floats, what: &str) -> Result<(f64, f64)> {
    match r.0[..] {
        [lo, hi] if lo < hi => Ok((lo, hi)),
        _ => Err(Error::invalid(format!("{what} must be `lo,hi` with lo < hi"))),
    }
}

fn execute(cmd: &Command) -> Result<Output> {
    let value = match cmd {
        Command::Probs { theta, item } => {
            let item = item.item()?;
            let rows = theta
                .0
                .iter()
                .map(|&t| {
                    let p = category_probabilities(th(t)?, &item);
                    Ok(json!({"theta": t, "probabilities": p.as_slice()}))
                })
                .collect::<Result<Vec<_>>>()?;
            json!({"item": to_value(&item)?, "rows": rows})
        }
        Command::Info {
            theta,
            item,
            derivatives,
            hessian,
        } => {
            let item = item.item()?;
            let rows = theta
                .0
                .iter()
                .map(|&t| {
                    let a = th(t)?;
                    let mut row = json!({"theta": t, "information": fisher_information(a, &item)});
                    if *derivatives {
                        row["d_pi_d_tau"] = json!(d_pi_d_tau(a, &item));
                        row["d_m_d_tau"] = json!(d_m_d_tau(a, &item));
                        row["d_pi_d_alpha"] = json!(d_pi_d_alpha(a, &item));
                        row["d_m_d_alpha"] = json!(d_m_d_alpha(a, &item));
                    }
                    if *hessian {
                        row["hessian_m_tau"] = json!(hessian_m_tau(a, &item));
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            json!({"item": to_value(&item)?, "rows": rows})
        }
        Command::Criterion {
            weight,
            criterion,
            design,
        } => {
            let w = weight.weight()?;
            let design = design.design()?;
            let e = evaluate_criterion(&design, &w, *criterion)?;
            json!({
                "weight": to_value(&w)?,
                "criterion": criterion.to_string(),
                "design": to_value(&design)?,
                "value": e.value,
                "nodes": e.nodes,
                "converged": e.converged,
                "warning": e.warning(),
            })
        }
        Command::SensitivityGrid {
            weight,
            criterion,
            alpha,
            tau_range,
            resolution,
            design,
            out,
        } => {
            let w = weight.weight()?;
            let (lo, hi) = range(tau_range, "--tau-range")?;
            let region = DesignRegion::new(
                vec![(lo, hi); alpha.0.len()],
                alpha.0.iter().map(|&a| (a, a)).collect(),
            )?;
            let design = match design {
                Some(path) => read_design(path)?,
                None => DesignMeasure::locally_optimal(&alpha.0, w.location())?,
            };
            let grid = sensitivity_grid(&design, &w, *criterion, &region, *resolution)?;
            let metadata = to_value(&grid.metadata)?;
            match out {
                Some(prefix) => {
                    let csv = path_with_suffix(prefix, "csv");
                    let file = std::io::BufWriter::new(std::fs::File::create(&csv)?);
                    grid.write_csv(file)?;
                    let mut doc = json!({"metadata": metadata, "csv": csv.display().to_string()});
                    stamp(&mut doc, cmd.name());
                    std::fs::write(path_with_suffix(prefix, "json"), json::to_pretty(&doc))?;
                    return Ok(Output::Nothing);
                }
                None => json!({
                    "metadata": metadata,
                    "tau1_axis": grid.tau1_axis,
                    "tau2_axis": grid.tau2_axis,
                    "values": grid.values,
                }),
            }
        }
        Command::CheckConditions { weight, a_total } => {
            let w = weight.weight()?;
            let report = check_necessary_conditions(*a_total, &w)?;
            json!({"weight": to_value(&w)?, "report": to_value(&report)?})
        }
        Command::CriticalScale {
            family,
            criterion,
            a_total,
        } => {
            let kinds = match criterion {
                Some(k) => vec![*k],
                None => CriterionKind::ALL.to_vec(),
            };
            let rows = kinds
                .iter()
                .map(|&k| Ok(json!({"criterion": k.to_string(), "value": critical_scale(*family, k, *a_total)?})))
                .collect::<Result<Vec<_>>>()?;
            json!({"family": family.to_string(), "a_total": a_total, "scales": rows})
        }
        Command::OptimalAlpha { weight, criterion } | Command::AlphaPlus { weight, criterion } => {
            let w = weight.weight()?;
            let a = if matches!(cmd, Command::OptimalAlpha { .. }) {
                optimal_alpha(&w, *criterion)?
            } else {
                alpha_plus(&w, *criterion)?
            };
            json!({
                "weight": to_value(&w)?,
                "criterion": criterion.to_string(),
                "value": a.value,
                "residual": a.residual,
            })
        }
        Command::EvidenceTable {
            family,
            criterion,
            scales,
        } => to_value(&one_point_never_bayes_optimal(*family, *criterion, &scales.0)?)?,
        Command::STilde {
            family,
            criterion,
            alpha,
            tau_half_width,
            resolution,
            tol,
        } => {
            let region = DesignRegion::thresholds(&alpha.0, *tau_half_width)?;
            let mut v = to_value(&estimate_s_tilde(*family, *criterion, &region, *resolution, *tol)?)?;
            // The threshold s-tilde is only defined for psi0; flag the analogue.
            v["extension"] = json!(*criterion != CriterionKind::Psi0);
            v
        }
        Command::OptimizeDesign {
            weight,
            criterion,
            alpha,
            tau_range,
            resolution,
            max_iter,
            tol,
            history,
        } => {
            let w = weight.weight()?;
            let (lo, hi) = range(tau_range, "--tau-range")?;
            let region = DesignRegion::new(
                vec![(lo, hi); alpha.0.len()],
                alpha.0.iter().map(|&a| (a, a)).collect(),
            )?;
            let candidates = CandidateSet::grid(&region, *resolution)?;
            let result = optimize_design(&candidates, &w, *criterion, *max_iter, *tol)?;
            let spacing = (hi - lo) / (resolution.max(&2) - 1) as f64;
            let clusters = support_clusters(&result.design, 2.0 * spacing, 1e-2);
            let mut r = to_value(&result)?;
            if !history {
                if let Some(obj) = r.as_object_mut() {
                    obj.remove("history");
                }
            }
            json!({
                "weight": to_value(&w)?,
                "criterion": criterion.to_string(),
                "candidates": candidates.len(),
                "result": r,
                "clusters": to_value(&clusters)?,
            })
        }
        Command::Simulate {
            seed,
            n_items,
            n_replications,
            theta_true,
            optimal_c,
            design,
        } => {
            let d = match optimal_c {
                Some(c) => {
                    let alphas = design.alpha.as_ref().map(|a| a.0.clone()).unwrap_or_else(|| vec![1.0; 3]);
                    DesignMeasure::one_point(approx_locally_optimal_item(*c, &alphas)?.shifted(*theta_true)?)
                }
                None => design.design()?,
            };
            let cfg = SimConfig::new(*seed, *n_items, *n_replications, th(*theta_true)?, d)?;
            let report = cramer_rao_check(&cfg)?;
            json!({"design": to_value(&cfg.design)?, "report": to_value(&report)?})
        }
        Command::ReproducePaper { only, json: as_json } => {
            let ids: Vec<u8> = match only {
                Some(ids) => ids.0.clone(),
                None => (1..=TITLES.len() as u8).collect(),
            };
            let outcomes = ids.iter().map(|&id| run_criterion(id)).collect::<Result<Vec<_>>>()?;
            if !as_json {
                let mut text: String = outcomes.iter().map(|o| o.summary() + "\n").collect();
                let passed = outcomes.iter().filter(|o| o.passed).count();
                text.push_str(&format!("{passed}/{} criteria passed\n", outcomes.len()));
                return Ok(Output::Text(text));
            }
            json!({
                "all_passed": outcomes.iter().all(|o| o.passed),
                "criteria": to_value(&outcomes)?,
            })
        }
    };
    Ok(Output::Json(value))
}

fn path_with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn stamp(doc: &mut Value, command: &str) {
    if let Some(obj) = doc.as_object_mut() {
        obj.insert("schema_version".into(), json!(json::SCHEMA_VERSION));
        obj.insert("command".into(), json!(command));
    }
}

fn error_line(kind: &str, message: &str) -> String {
    json::to_line(&json!({
        "schema_version": json::SCHEMA_VERSION,
        "error": {"kind": kind, "message": message},
    }))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() || matches!(e, Error::Io(_)) {
        EXIT_VALIDATION
    } else {
        EXIT_SOLVER
    }
}

/// Index of the subcommand token in `args` (after the program name),
/// skipping the global options and their values.
fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--threads" || a == "--config" {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let idx = args.iter().position(|a| a == "--config");
    if let Some(i) = idx {
        return args.get(i + 1).map(PathBuf::from);
    }
    args.iter()
        .find_map(|a| a.to_str().and_then(|s| s.strip_prefix("--config=")).map(PathBuf::from))
}

/// Turns a JSON object of flag values into `--flag=value` tokens.
fn config_tokens(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
    let map: Map<String, Value> = serde_json::from_str(&text)?;
    let scalar = |key: &str, v: &Value| -> Result<String> {
        match v {
            Value::Number(n) => Ok(n.to_string()),
            Value::String(s) => Ok(s.clone()),
            _ => Err(Error::invalid(format!("config key `{key}`: expected a number or string"))),
        }
    };
    let mut tokens = Vec::new();
    for (key, v) in &map {
        if key == "config" {
            return Err(Error::invalid("config files cannot include other config files"));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => tokens.push(OsString::from(flag)),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts = items.iter().map(|x| scalar(key, x)).collect::<Result<Vec<_>>>()?;
                tokens.push(format!("{flag}={}", parts.join(",")).into());
            }
            other => tokens.push(format!("{flag}={}", scalar(key, other)?).into()),
        }
    }
    Ok(tokens)
}

fn command() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.allow_negative_numbers(true).args_override_self(true))
}

/// Runs the CLI on `args` (including the program name) with the given streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.is_empty() {
        args.push("gpcm-design".into());
    }
    let fail = |stderr: &mut dyn Write, code: i32, kind: &str, msg: &str| {
        let _ = writeln!(stderr, "{}", error_line(kind, msg));
        code
    };

    if let (Some(path), Some(at)) = (config_path(&args), subcommand_index(&args)) {
        match config_tokens(&path) {
            Ok(tokens) => {
                let tail = args.split_off(at + 1);
                args.extend(tokens);
                args.extend(tail);
            }
            Err(e) => return fail(stderr, exit_code(&e), "validation", &e.to_string()),
        }
    }

    let cli = match command()
        .try_get_matches_from(&args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return EXIT_OK;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_VALIDATION;
            }
            let msg = e.render().to_string();
            let msg = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return fail(stderr, EXIT_VALIDATION, "validation", msg.trim_start_matches("error: "));
        }
    };

    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Solver(format!("cannot start thread pool: {e}")))
            .and_then(|pool| pool.install(|| execute(&cli.command))),
        None => execute(&cli.command),
    };

    match result {
        Ok(Output::Json(mut doc)) => {
            stamp(&mut doc, cli.command.name());
            let _ = stdout.write_all(json::to_pretty(&doc).as_bytes());
            EXIT_OK
        }
        Ok(Output::Text(text)) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Ok(Output::Nothing) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == EXIT_VALIDATION { "validation" } else { "solver" };
            fail(stderr, code, kind, &e.to_string())
        }
    }
}

/// Runs the CLI against the process streams and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    let code = run_with(args, &mut out, &mut err);
    let _ = out.flush();
    code
}
