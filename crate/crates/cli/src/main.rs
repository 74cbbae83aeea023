use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epgrav_cli::commands::{execute, plan};
use epgrav_cli::config::{parse_config, Format, Override, OverrideValue, RunMode};
use epgrav_cli::error::CliError;

/// Exceptional-point gravimeter model: spectra, shift sweeps, G inversion
/// and mean-field simulation.
///
/// Dimensional values take a unit suffix, e.g. "1e-2 w_r" or "2e9 rad_s".
/// Bare numbers on flags are read in SI units (rad_s, m, kg, ...), except
/// --delta-omega, which is in units of w_r.
#[derive(Debug, Parser)]
#[command(name = "epgrav", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $EPGRAV_OUT, then ./epgrav-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reference case X, Y or Z.
    #[arg(long, global = true)]
    case: Option<String>,
    /// Suppress the summary line and override notes.
    #[arg(long, global = true)]
    quiet: bool,
    /// csv: text summary and CSV data. json: JSON summary and JSON data.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Supermode eigenvalues of the effective Hamiltonian.
    Eigen(SystemArgs),
    /// Drive amplitude of the exceptional point.
    Ep(SystemArgs),
    /// Coalescence and shift sweeps over the drive amplitude.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Enhancement ratio study.
    Gamma {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Frequency shifts produced by a source sphere.
    Gravity {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        sphere: SphereArgs,
        /// Newtonian constant (m3_kg_s2); defaults to CODATA 2014.
        #[arg(long, allow_hyphen_values = true)]
        big_g: Option<String>,
    },
    /// Invert a measured shift into G.
    InvertG {
        #[command(flatten)]
        system: SystemArgs,
        /// Measured |dnu_-| (rad_s).
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<String>,
        /// One-sigma uncertainty of the shift (rad_s).
        #[arg(long, allow_hyphen_values = true)]
        sigma_shift: Option<String>,
        /// Source density (kg_m3).
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<String>,
    },
    /// Integrate the mean-field equations and extract the locked frequency.
    Simulate {
        #[command(flatten)]
        system: SystemArgs,
        /// Run length (s, w_r^-1 or periods).
        #[arg(long, allow_hyphen_values = true)]
        t_end: Option<String>,
        /// Relative tolerance of the integrator.
        #[arg(long, allow_hyphen_values = true)]
        tol: Option<String>,
        /// sqrt_kappa or sqrt_gamma_m.
        #[arg(long)]
        drive_coupling: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        samples_per_period: Option<String>,
    },
    /// Regenerate every figure table.
    Figures {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// Mechanical frequency (rad_s or Hz).
    #[arg(long, allow_hyphen_values = true)]
    omega_r: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_m: Option<String>,
    /// Membrane coupling.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta2: Option<String>,
    /// Drive amplitude (rad_s^1/2 or w_r^1/2).
    #[arg(long, allow_hyphen_values = true)]
    alpha_in: Option<String>,
    /// Optomechanical coupling.
    #[arg(long, allow_hyphen_values = true)]
    g: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta2: Option<String>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// N, lo:hi:N (w_r^1/2) or "lo:hi:N alpha_ep".
    #[arg(long)]
    grid: Option<String>,
    /// Membrane shifts in units of w_r; repeat or separate with commas.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    delta_omega: Vec<String>,
    /// Cases to include; repeat or separate with commas.
    #[arg(long = "cases", value_delimiter = ',')]
    cases: Vec<String>,
}

#[derive(Debug, Args)]
struct SphereArgs {
    /// Density (kg_m3).
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    /// Sphere radius (m).
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<String>,
    /// Distance to membrane 1 (m).
    #[arg(long, allow_hyphen_values = true)]
    a1: Option<String>,
    /// Distance to membrane 2 (m).
    #[arg(long, allow_hyphen_values = true)]
    a2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    m1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    m2: Option<String>,
}

struct Collector(Vec<Override>);

impl Collector {
    fn one(&mut self, key: &'static str, flag: &'static str, value: &Option<String>) {
        if let Some(v) = value {
            self.0.push(Override {
                key,
                flag,
                value: OverrideValue::One(v.clone()),
            });
        }
    }

    fn list(&mut self, key: &'static str, flag: &'static str, values: &[String]) {
        if !values.is_empty() {
            self.0.push(Override {
                key,
                flag,
                value: OverrideValue::List(values.to_vec()),
            });
        }
    }

    fn system(&mut self, s: &SystemArgs) {
        self.one("system.omega_r", "--omega-r", &s.omega_r);
        self.one("system.gamma_m", "--gamma-m", &s.gamma_m);
        self.one("system.epsilon", "--epsilon", &s.epsilon);
        self.one("system.eta1", "--eta1", &s.eta1);
        self.one("system.eta2", "--eta2", &s.eta2);
        self.one("system.alpha_in", "--alpha-in", &s.alpha_in);
        self.one("system.g", "--g", &s.g);
        self.one("system.kappa", "--kappa", &s.kappa);
        self.one("system.delta1", "--delta1", &s.delta1);
        self.one("system.delta2", "--delta2", &s.delta2);
    }

    fn study(&mut self, s: &StudyArgs) {
        self.one("study.grid", "--grid", &s.grid);
        self.list("study.delta_omegas", "--delta-omega", &s.delta_omega);
        self.list("study.cases", "--cases", &s.cases);
    }
}

fn overrides(cli: &Cli) -> (RunMode, Vec<Override>) {
    let mut c = Collector(Vec::new());
    c.one("case", "--case", &cli.case);
    c.one(
        "out",
        "--out",
        &cli.out.as_ref().map(|p| p.display().to_string()),
    );
    c.one(
        "format",
        "--format",
        &cli.format.map(|f| match f {
            Format::Csv => "csv".to_string(),
            Format::Json => "json".to_string(),
        }),
    );
    let mode = match &cli.command {
        Command::Eigen(s) => {
            c.system(s);
            RunMode::Eigen
        }
        Command::Ep(s) => {
            c.system(s);
            RunMode::Ep
        }
        Command::Sweep { system, study } => {
            c.system(system);
            c.study(study);
            RunMode::Sweep
        }
        Command::Gamma { system, study } => {
            c.system(system);
            c.study(study);
            RunMode::Gamma
        }
        Command::Gravity {
            system,
            sphere,
            big_g,
        } => {
            c.system(system);
            c.one("sphere.rho", "--rho", &sphere.rho);
            c.one("sphere.radius", "--radius", &sphere.radius);
            c.one("sphere.a1", "--a1", &sphere.a1);
            c.one("sphere.a2", "--a2", &sphere.a2);
            c.one("sphere.m1", "--m1", &sphere.m1);
            c.one("sphere.m2", "--m2", &sphere.m2);
            c.one("gravity.big_g", "--big-g", big_g);
            RunMode::Gravity
        }
        Command::InvertG {
            system,
            shift,
            sigma_shift,
            rho,
        } => {
            c.system(system);
            c.one("gravity.shift", "--shift", shift);
            c.one("gravity.sigma_shift", "--sigma-shift", sigma_shift);
            c.one("sphere.rho", "--rho", rho);
            RunMode::InvertG
        }
        Command::Simulate {
            system,
            t_end,
            tol,
            drive_coupling,
            samples_per_period,
        } => {
            c.system(system);
            c.one("simulate.t_end", "--t-end", t_end);
            c.one("simulate.tol", "--tol", tol);
            c.one(
                "simulate.drive_coupling",
                "--drive-coupling",
                drive_coupling,
            );
            c.one(
                "simulate.samples_per_period",
                "--samples-per-period",
                samples_per_period,
            );
            RunMode::Simulate
        }
        Command::Figures { system, study } => {
            c.system(system);
            c.study(study);
            RunMode::Figures
        }
    };
    c.one("mode", "subcommand", &Some(mode.to_string()));
    (mode, c.0)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let (_, overrides) = overrides(cli);
    let parsed = parse_config(cli.config.as_deref(), &overrides)?;
    if !cli.quiet {
        for note in &parsed.notes {
            eprintln!("note: {note}");
        }
    }
    let plan = plan(&parsed.config)?;
    let outcome = execute(&plan)?;
    if !cli.quiet {
        match (plan.format, &outcome.record) {
            (Format::Json, Some(record)) => println!("{record}"),
            (Format::Json, None) => println!(
                "{}",
                serde_json::json!({ "summary": outcome.summary, "files": outcome.files })
            ),
            (Format::Csv, _) => println!("{}", outcome.summary),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}
