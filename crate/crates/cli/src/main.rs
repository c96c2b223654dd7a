//! `qclat`: runs lattice coarse-graining cases from TOML configurations or
//! built-in presets and writes CSV/VTK outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use qc_lattice::harness::{
    export_outputs, export_suite, presets, run_case, run_convergence_suite, CaseConfig, CaseResult,
    Reference, SuiteResult,
};
use qc_lattice::{QcError, Result, Scheme};

#[derive(Parser, Debug)]
#[command(name = "qclat", version, about = "Coarse-grained truss lattice experiments")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one case.
    Run {
        /// Path to a TOML configuration, or the name of a built-in preset.
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a static case for several element sizes and fit convergence orders.
    Suite {
        config: String,
        /// Element sizes in lattice pitches, e.g. `24,16,12`.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<f64>,
        /// Schemes to compare; all five by default.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    /// List preset names.
    List,
    /// Print the TOML source of a preset.
    Show { name: String },
}

#[derive(clap::Args, Debug)]
struct Overrides {
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reference solutions: fr, fs or none.
    #[arg(long)]
    reference: Option<String>,
    /// Sampling scheme: fs, ess, iss, nas or nss.
    #[arg(long)]
    scheme: Option<String>,
}

fn load_config(arg: &str) -> Result<CaseConfig> {
    let path = Path::new(arg);
    if path.exists() {
        CaseConfig::from_file(path)
    } else if presets::source(arg).is_some() {
        presets::load(arg)
    } else {
        Err(QcError::Config(format!(
            "'{arg}' is neither a file nor a preset (available: {})",
            presets::list().join(", ")
        )))
    }
}

fn apply(config: &mut CaseConfig, o: &Overrides) -> Result<PathBuf> {
    if let Some(r) = &o.reference {
        config.reference = r.parse::<Reference>()?;
    }
    if let Some(s) = &o.scheme {
        config.scheme = s.parse::<Scheme>()?;
    }
    Ok(o.out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out")))
}

fn print_case(r: &CaseResult) {
    let c = &r.counts;
    println!("case {} scheme {}", r.name, r.scheme);
    println!(
        "  nodes {} elements {} dofs {} sampling nodes {} (psn {} ssn {})",
        c.nodes, c.elements, c.dofs, c.sampling_nodes, c.psn, c.ssn
    );
    if let Some(e) = &r.errors {
        println!(
            "  e_disp {:.6e} (disc {:.6e}, sam {:.6e})",
            e.e_disp, e.e_disp_disc, e.e_disp_sam
        );
        println!("  e_U    {:.6e} (disc {:.6e}, sam {:.6e})", e.e_u, e.e_u_disc, e.e_u_sam);
    }
    if let Some(h) = &r.fracture {
        println!(
            "  failed struts {} external work {:.6e}{}",
            h.failed.len(),
            h.external_work,
            if h.terminated { " (load path severed)" } else { "" }
        );
    }
    if let Some(cmp) = &r.fracture_comparison {
        println!(
            "  vs FR: work ratio {:.4} final reaction ratio {:.4} max step deviation {:.4} failed overlap {:.3}",
            cmp.work_ratio, cmp.final_reaction_ratio, cmp.max_step_deviation, cmp.failed_overlap
        );
    }
}

fn print_suite(s: &SuiteResult) {
    println!("suite {}", s.name);
    for r in &s.rows {
        println!(
            "  {:>4} size {:>5} dofs {:>6} e_disp {:.6e} e_U {:.6e}",
            r.scheme, r.element_size, r.dofs, r.errors.e_disp, r.errors.e_u
        );
    }
    for f in &s.fits {
        println!(
            "  {:>4} order disp {:.4} (r² {:.4}) energy {:.4} (r² {:.4})",
            f.scheme,
            f.displacement.order,
            f.displacement.r_squared,
            f.energy.order,
            f.energy.r_squared
        );
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("  wrote {}", p.display());
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, overrides } => {
            let mut cfg = load_config(&config)?;
            let out = apply(&mut cfg, &overrides)?;
            let result = run_case(&cfg)?;
            info!("{}: solved in {:?}", cfg.name, result.timing.solve);
            print_case(&result);
            print_written(&export_outputs(&result, &out, &cfg.output)?);
        }
        Command::Suite {
            config,
            sizes,
            schemes,
            overrides,
        } => {
            let mut cfg = load_config(&config)?;
            let out = apply(&mut cfg, &overrides)?;
            let schemes = if schemes.is_empty() {
                Scheme::ALL.to_vec()
            } else {
                schemes.iter().map(|s| s.parse()).collect::<Result<Vec<Scheme>>>()?
            };
            let suite = run_convergence_suite(&cfg, &sizes, &schemes)?;
            print_suite(&suite);
            print_written(&export_suite(&suite, &out)?);
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for name in presets::list() {
                    println!("{name}");
                }
            }
            PresetAction::Show { name } => {
                let text = presets::source(&name)
                    .ok_or_else(|| QcError::Config(format!("unknown preset '{name}'")))?;
                print!("{text}");
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
