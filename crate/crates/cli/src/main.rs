//! `reslab`: file-in, file-out front end. Every run writes `report.tsv`,
//! `report.json`, any command-specific artifacts and `manifest.json` into
//! `--out-dir`, and echoes the TSV table on stdout.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Output;
use manifest::{digest_file, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "reslab", version, about = "Approximation resistance workbench")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed; overrides any seed stored in input files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel kernels.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Numerical tolerance for float checks.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, global = true, default_value = "reslab-out")]
    pub out_dir: PathBuf,
    /// Cap on LP variables and enumerated strategies.
    #[arg(long, global = true, env = "RESLAB_SIZE_BUDGET", default_value = "1e7")]
    pub size_budget: String,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Predicate tables.
    #[command(subcommand)]
    Predicate(PredicateCmd),
    /// Vanishing-measure search.
    #[command(subcommand)]
    Vanishing(VanishingCmd),
    /// Membership in the bias-measure class.
    #[command(subcommand)]
    Charlp(CharlpCmd),
    /// The discretized game.
    #[command(subcommand)]
    Game(GameCmd),
    /// Integrality gap instances.
    #[command(subcommand)]
    Gap(GapCmd),
    /// Rounding of relaxation solutions.
    #[command(subcommand)]
    Round(RoundCmd),
    /// Checks of stored artifacts.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Sherali-Adams programs.
    #[command(subcommand)]
    Sa(SaCmd),
}

#[derive(Subcommand, Debug)]
pub enum PredicateCmd {
    /// Density, symmetry and Fourier coefficients.
    Analyze { file: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyArg {
    Pairwise,
    PointMasses,
    Symmetrized,
}

#[derive(Subcommand, Debug)]
pub enum VanishingCmd {
    /// Searches a vanishing measure on a finite support.
    Search {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Pairwise)]
        strategy: StrategyArg,
    },
}

#[derive(Subcommand, Debug)]
pub enum CharlpCmd {
    Check { file: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum GameCmd {
    /// Values over a grid of dev refinements `p` and partitions `q`.
    Value {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',')]
        p_grid: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        q_grid: Option<Vec<u32>>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GapCmd {
    /// Layered instance with its tree-model local distributions.
    Sa {
        config: PathBuf,
        /// Remove constraints until the girth exceeds this length.
        #[arg(long)]
        girth: Option<usize>,
        /// Also assemble and correct the local distribution family.
        #[arg(long)]
        family: bool,
    },
    /// Gaussian instance with its basic-relaxation solution.
    Sdp {
        config: PathBuf,
        /// Also snap onto a coarse net of this many points.
        #[arg(long)]
        collapse: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
pub enum RoundCmd {
    Sdp { instance: PathBuf, basic: PathBuf, scheme: PathBuf },
    Lp { instance: PathBuf, family: PathBuf, scheme: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    /// Brute-force satisfaction range, or the value of one assignment.
    Instance {
        instance: PathBuf,
        /// Assignment string such as `+-+`.
        #[arg(long)]
        assignment: Option<String>,
    },
    Basic { instance: PathBuf, basic: PathBuf },
    Family { family: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum SaCmd {
    /// Solves the `r`-round program exactly.
    Build {
        instance: PathBuf,
        #[arg(long)]
        r: usize,
    },
    /// Objective and consistency of a stored family.
    Objective { instance: PathBuf, family: PathBuf },
}

fn write_outputs(global: &Global, out: &Output, manifest: &mut RunManifest) -> reslab_core::Result<()> {
    let dir = &global.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut files: Vec<(String, String)> = vec![
        ("report.tsv".into(), out.tsv.clone()),
        ("report.json".into(), serde_json::to_string_pretty(&out.json)? + "\n"),
    ];
    files.extend(out.files.iter().cloned());
    for (name, text) in &files {
        let path = dir.join(name);
        reslab_core::io::write_text(&path, text)?;
        manifest.outputs.push(digest_file(&path)?);
    }
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    reslab_core::io::write_text(&dir.join("manifest.json"), &text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let budget = match commands::parse_budget(&cli.global.size_budget) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = commands::run(&cli.cmd, &cli.global, budget).and_then(|out| {
        let argv: Vec<String> = std::env::args().skip(1).collect();
        let mut manifest = RunManifest::new(argv, out.config.clone(), out.seed);
        manifest.record_inputs(&out.inputs)?;
        write_outputs(&cli.global, &out, &mut manifest)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            print!("{}", out.tsv);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
