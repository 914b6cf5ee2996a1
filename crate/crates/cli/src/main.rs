//! `qbcharge`: charging dynamics, sweeps and figure data for the cavity battery.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use cavity_battery::figures::{self, FigureOptions, FIGURE_NAMES};
use cavity_battery::metrics::{self, DEFAULT_BLP_SPACING};
use cavity_battery::output::{self, format_number, Format, Table};
use cavity_battery::propagator;
use cavity_battery::sweep::{self, parse_axis};
use cavity_battery::{InitialState, ModelParams, Quantity, SpectralWidth, SweepSpec};
use clap::{Args, Parser, Subcommand};

const DEFAULT_STEPS: usize = 1001;
const DEFAULT_AXIS: &str = "0.1:10:21:log";

#[derive(Parser, Debug)]
#[command(name = "qbcharge", version, about = "Qubit battery charged through a leaky cavity")]
struct Cli {
    /// key=value file supplying defaults for any long flag (flags win).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for sweeps and figures.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time trace of kappa, population, stored energy and ergotropy.
    Evolve {
        #[command(flatten)]
        params: ParamArgs,
        /// Horizon in units of Omega*tau.
        #[arg(long)]
        tmax: Option<f64>,
        /// Number of output points including both ends.
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Scalar quantity over a (gamma/Omega, lambda/Omega) grid.
    Sweep {
        /// start:stop:count[:log|lin] or a comma list.
        #[arg(long)]
        gamma_axis: Option<String>,
        /// start:stop:count[:log|lin] or a comma list; entries may be inf.
        #[arg(long)]
        lambda_axis: Option<String>,
        /// stored_energy_max, ergotropy_max, nonmarkovianity or trajectory.
        #[arg(long)]
        quantity: Option<Quantity>,
        #[arg(long)]
        omega0: Option<f64>,
        /// Horizon in units of Omega*tau.
        #[arg(long)]
        tmax: Option<f64>,
        /// Scan intervals (nonmarkovianity) or points (trajectory).
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Best stored energy and ergotropy over the charging time.
    Maxima {
        #[command(flatten)]
        params: ParamArgs,
        /// Horizon in units of Omega*tau.
        #[arg(long)]
        tmax: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Trace-distance non-Markovianity. Exits 4 if the horizon truncates it.
    Nonmarkov {
        #[command(flatten)]
        params: ParamArgs,
        /// Horizon in units of Omega*tau.
        #[arg(long)]
        tmax: Option<f64>,
        /// Scan intervals over the horizon.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Data and manifest for one figure.
    Figure {
        name: String,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
        /// Points per heatmap axis.
        #[arg(long)]
        grid_points: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long = "Omega")]
    omega: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Reservoir width, or inf for the memoryless limit.
    #[arg(long)]
    lambda: Option<SpectralWidth>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<cavity_battery::Error> for CliError {
    fn from(e: cavity_battery::Error) -> Self {
        use cavity_battery::Error as E;
        match e {
            E::Io(_) | E::Json(_) => CliError::Io(e.to_string()),
            E::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Values from `--config`, keyed by long flag name without dashes.
struct Config(BTreeMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Config(BTreeMap::new()));
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1))
            })?;
            let k = k.trim().trim_start_matches("--").replace('_', "-");
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown key {k:?}",
                    path.display(),
                    n + 1
                )));
            }
            map.insert(k, v.trim().to_string());
        }
        Ok(Config(map))
    }

    /// Flag value if given, else the config entry, else `default`.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.0
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Usage(format!("config {key}={v}: {e}")))
            })
            .transpose()
    }
}

const CONFIG_KEYS: [&str; 14] = [
    "omega0",
    "Omega",
    "gamma",
    "lambda",
    "tmax",
    "steps",
    "grid",
    "format",
    "out",
    "jobs",
    "gamma-axis",
    "lambda-axis",
    "quantity",
    "grid-points",
];

fn model_params(args: ParamArgs, cfg: &Config) -> CliResult<ModelParams> {
    let omega0 = cfg.pick(args.omega0, "omega0", 1.0)?;
    let omega = cfg.pick(args.omega, "Omega", 1.0)?;
    let gamma = cfg.pick(args.gamma, "gamma", 0.1)?;
    let lambda = cfg.pick(args.lambda, "lambda", SpectralWidth::Finite(0.1))?;
    Ok(ModelParams::new(omega0, omega, gamma, lambda)?)
}

struct Sink {
    format: Format,
    out: Option<PathBuf>,
}

impl Sink {
    fn new(args: OutputArgs, cfg: &Config) -> CliResult<Self> {
        Ok(Sink {
            format: cfg.pick(args.format, "format", Format::Csv)?,
            out: cfg.pick_opt(args.out, "out")?,
        })
    }

    fn write(&self, text: &str) -> CliResult<()> {
        match &self.out {
            Some(path) => fs::write(path, text)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
            None => {
                let mut stdout = io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
            }
        }
    }
}

fn params_table(columns: &[&str], p: &ModelParams) -> Table {
    Table::new(columns)
        .meta("tool", format!("cavity-battery {}", cavity_battery::VERSION))
        .meta("omega0", format_number(p.omega0()))
        .meta("Omega", format_number(p.coupling_qb_cavity()))
        .meta("gamma", format_number(p.coupling_cavity_env()))
        .meta("lambda", sweep::width_label(p.spectral_width()))
}

fn json_text(value: &impl serde::Serialize) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Io(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(jobs) = cfg.pick_opt(cli.jobs, "jobs")? {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Evolve { params, tmax, steps, output } => {
            let p = model_params(params, &cfg)?;
            let sink = Sink::new(output, &cfg)?;
            let tmax = cfg.pick(tmax, "tmax", Quantity::Trajectory.default_horizon())?;
            let steps = cfg.pick(steps, "steps", DEFAULT_STEPS)?;
            let traj = propagator::trajectory(
                &p,
                &InitialState::empty_battery(),
                tmax / p.coupling_qb_cavity(),
                steps,
            )?;
            sink.write(&output::trajectory_table(&traj).encode(sink.format)?)
        }

        Command::Sweep { gamma_axis, lambda_axis, quantity, omega0, tmax, grid, output } => {
            let sink = Sink::new(output, &cfg)?;
            let gamma_axis = cfg.pick(gamma_axis, "gamma-axis", DEFAULT_AXIS.to_string())?;
            let lambda_axis = cfg.pick(lambda_axis, "lambda-axis", DEFAULT_AXIS.to_string())?;
            let gammas = parse_axis(&gamma_axis)?
                .into_iter()
                .map(|w| {
                    w.finite()
                        .ok_or_else(|| CliError::Usage("gamma axis must be finite".into()))
                })
                .collect::<CliResult<Vec<f64>>>()?;
            let lambdas = parse_axis(&lambda_axis)?;
            let quantity = cfg.pick(quantity, "quantity", Quantity::StoredEnergyMax)?;
            let mut spec = SweepSpec::new(gammas, lambdas, quantity);
            spec.omega0 = cfg.pick(omega0, "omega0", 1.0)?;
            if let Some(t) = cfg.pick_opt(tmax, "tmax")? {
                spec.tmax = t;
                spec.grid = quantity.default_grid(t);
            }
            spec.grid = cfg.pick(grid, "grid", spec.grid)?;

            if quantity == Quantity::Trajectory {
                let trajs = sweep::run_trajectory_sweep(&spec)?;
                let text = match sink.format {
                    Format::Csv => sweep::trajectories_csv(&spec, &trajs),
                    Format::Json => json_text(&trajs)?,
                };
                return sink.write(&text);
            }
            let result = sweep::run_sweep(&spec)?;
            let text = match sink.format {
                Format::Csv => result.to_csv(),
                Format::Json => result.to_json()?,
            };
            sink.write(&text)
        }

        Command::Maxima { params, tmax, output } => {
            let p = model_params(params, &cfg)?;
            let sink = Sink::new(output, &cfg)?;
            let tmax = cfg.pick(tmax, "tmax", Quantity::StoredEnergyMax.default_horizon())?;
            let r = metrics::maximize_over_tau(
                &p,
                &InitialState::empty_battery(),
                tmax / p.coupling_qb_cavity(),
            )?;
            let text = match sink.format {
                Format::Csv => {
                    let mut t = params_table(
                        &[
                            "delta_e_max",
                            "w_max",
                            "Omega_tau_at_e_max",
                            "Omega_tau_at_w_max",
                            "at_boundary",
                        ],
                        &p,
                    )
                    .meta("tmax (Omega*tau)", format_number(tmax));
                    t.push(vec![
                        r.delta_e_max,
                        r.w_max,
                        r.tau_at_e_max,
                        r.tau_at_w_max,
                        if r.at_boundary { 1.0 } else { 0.0 },
                    ]);
                    t.to_csv()
                }
                Format::Json => json_text(&serde_json::json!({
                    "version": cavity_battery::VERSION,
                    "params": p,
                    "tmax": tmax,
                    "maxima": r,
                }))?,
            };
            sink.write(&text)
        }

        Command::Nonmarkov { params, tmax, grid, output } => {
            let p = model_params(params, &cfg)?;
            let sink = Sink::new(output, &cfg)?;
            let tmax = cfg.pick(tmax, "tmax", Quantity::Nonmarkovianity.default_horizon())?;
            let grid = cfg.pick(grid, "grid", (tmax / DEFAULT_BLP_SPACING).ceil() as usize)?;
            let r = metrics::blp_nonmarkovianity(&p, tmax / p.coupling_qb_cavity(), grid)?;
            let text = match sink.format {
                Format::Csv => {
                    let mut t = params_table(
                        &["measure", "final_distance", "horizon", "truncated", "divergent"],
                        &p,
                    );
                    for (a, b) in &r.backflow_intervals {
                        t.metadata.push((
                            "backflow (Omega*t)".into(),
                            format!("{} {}", format_number(*a), format_number(*b)),
                        ));
                    }
                    let flag = |b: bool| if b { 1.0 } else { 0.0 };
                    t.push(vec![
                        r.measure,
                        r.final_distance,
                        r.horizon,
                        flag(r.truncated),
                        flag(r.divergent),
                    ]);
                    t.to_csv()
                }
                Format::Json => json_text(&serde_json::json!({
                    "version": cavity_battery::VERSION,
                    "params": p,
                    "report": r,
                }))?,
            };
            sink.write(&text)?;
            if r.truncated || r.divergent {
                return Err(CliError::Numerical(format!(
                    "trace distance {:.3e} at the horizon Omega*t = {}; measure is a partial sum",
                    r.final_distance, r.horizon
                )));
            }
            Ok(())
        }

        Command::Figure { name, out, format, grid_points } => {
            if !FIGURE_NAMES.contains(&name.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown figure {name:?}; valid names: {}",
                    FIGURE_NAMES.join(", ")
                )));
            }
            let defaults = FigureOptions::default();
            let opts = FigureOptions {
                format: cfg.pick(format, "format", defaults.format)?,
                grid_points: cfg.pick(grid_points, "grid-points", defaults.grid_points)?,
                ..defaults
            };
            let dir = cfg.pick(out, "out", PathBuf::from("."))?;
            let bundle = figures::build_figure(&name, &opts)?;
            let written = bundle.write_to(&dir).map_err(|e| {
                CliError::Io(format!("cannot write figure data to {}: {e}", dir.display()))
            })?;
            for path in written {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbcharge: {e}");
            ExitCode::from(e.code())
        }
    }
}
