use nonlocal_lab::config::Pipeline;
use nonlocal_lab::runner::{run_config_file, Options, RunError};
use nonlocal_lab::{catalog, OUT_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
nonlocal-lab: nonlocal diffusion decay laboratory

Usage:
  nonlocal-lab <simulate|verify-inequality|envelope|dispersal|constants>
               --config <FILE> [--seed <N>] [--threads <N>] [--out <DIR>]
  nonlocal-lab constants [--dim <N>] [--p <P>] [--k <K>] [--out <DIR>]
  nonlocal-lab catalog [--write <DIR>]

The config names its pipeline; the subcommand must match it. `catalog`
lists the bundled experiment configs (one per decay/inequality check);
`catalog --write DIR` copies them out. The default output directory is
$NONLOCAL_LAB_OUT/<label>, falling back to ./out/<label>.

Exit codes: 0 all checks pass, 1 check failure, 2 config error, 3 runtime error.
";

struct Args {
    subcommand: String,
    config: Option<PathBuf>,
    seed: Option<u64>,
    threads: usize,
    out: Option<PathBuf>,
    write: Option<PathBuf>,
    dim: Option<usize>,
    p: Option<f64>,
    k: Option<f64>,
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let subcommand = argv.next().ok_or_else(|| USAGE.to_string())?;
    let mut args = Args {
        subcommand,
        config: None,
        seed: None,
        threads: 1,
        out: None,
        write: None,
        dim: None,
        p: None,
        k: None,
    };
    while let Some(flag) = argv.next() {
        let mut value = |name: &str| {
            argv.next()
                .ok_or_else(|| format!("flag {name} expects a value"))
        };
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(value("--config")?)),
            "--seed" => {
                args.seed = Some(
                    value("--seed")?
                        .parse()
                        .map_err(|_| "--seed expects an unsigned integer".to_string())?,
                )
            }
            "--threads" => {
                args.threads = value("--threads")?
                    .parse()
                    .map_err(|_| "--threads expects a positive integer".to_string())?;
                if args.threads == 0 {
                    return Err("--threads must be at least 1".into());
                }
            }
            "--out" => args.out = Some(PathBuf::from(value("--out")?)),
            "--write" => args.write = Some(PathBuf::from(value("--write")?)),
            "--dim" => {
                args.dim = Some(
                    value("--dim")?
                        .parse()
                        .map_err(|_| "--dim expects 1, 2 or 3".to_string())?,
                )
            }
            "--p" => {
                args.p = Some(
                    value("--p")?
                        .parse()
                        .map_err(|_| "--p expects a number".to_string())?,
                )
            }
            "--k" => {
                args.k = Some(
                    value("--k")?
                        .parse()
                        .map_err(|_| "--k expects a number".to_string())?,
                )
            }
            "--help" | "-h" => return Err(USAGE.to_string()),
            other => return Err(format!("unknown flag `{other}`\n\n{USAGE}")),
        }
    }
    Ok(args)
}

fn expected_pipeline(subcommand: &str) -> Option<Pipeline> {
    match subcommand {
        "simulate" => Some(Pipeline::Simulate),
        "verify-inequality" => Some(Pipeline::VerifyInequality),
        "envelope" => Some(Pipeline::Envelope),
        "dispersal" => Some(Pipeline::Dispersal),
        "constants" => Some(Pipeline::Constants),
        _ => None,
    }
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(args) => args,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };

    if args.subcommand == "catalog" {
        return run_catalog(&args);
    }
    let Some(expected) = expected_pipeline(&args.subcommand) else {
        eprintln!("unknown subcommand `{}`\n\n{USAGE}", args.subcommand);
        return ExitCode::from(2);
    };

    // `constants` works without a config file
    let synthesized;
    let config_path = match (&args.config, expected) {
        (Some(path), _) => path.clone(),
        (None, Pipeline::Constants) => {
            let text = format!(
                "pipeline = constants\nlabel = constants\nconstants.dim = {}\nconstants.p = {}\nconstants.k = {}\n",
                args.dim.unwrap_or(1),
                args.p.unwrap_or(2.0),
                args.k.unwrap_or(0.0),
            );
            let dir =
                std::env::temp_dir().join(format!("nonlocal-lab-constants-{}", std::process::id()));
            if let Err(e) = std::fs::create_dir_all(&dir) {
                eprintln!("cannot create temp dir: {e}");
                return ExitCode::from(3);
            }
            synthesized = dir.join("constants.conf");
            if let Err(e) = std::fs::write(&synthesized, text) {
                eprintln!("cannot write temp config: {e}");
                return ExitCode::from(3);
            }
            synthesized.clone()
        }
        (None, _) => {
            eprintln!("subcommand `{}` needs --config <FILE>", args.subcommand);
            return ExitCode::from(2);
        }
    };

    let opts = Options {
        seed: args.seed,
        out: args.out.clone(),
        threads: args.threads,
    };
    match run_config_file(&config_path, &opts) {
        Ok(output) => {
            if output.pipeline != expected {
                eprintln!(
                    "config declares pipeline `{}` but the subcommand is `{}`",
                    output.pipeline.name(),
                    args.subcommand
                );
                return ExitCode::from(2);
            }
            for check in &output.checks {
                println!(
                    "[{}] {}: {}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            println!(
                "{} artifacts in {}",
                output.artifacts.len(),
                output.out_dir.display()
            );
            if output.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(RunError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run_catalog(args: &Args) -> ExitCode {
    if let Some(dir) = &args.write {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("cannot create {}: {e}", dir.display());
            return ExitCode::from(3);
        }
        for entry in catalog::ENTRIES {
            let path = dir.join(format!("{}.conf", entry.name));
            if let Err(e) = std::fs::write(&path, entry.text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(3);
            }
            println!("wrote {}", path.display());
        }
        return ExitCode::SUCCESS;
    }
    println!("bundled experiment configs (run with the pipeline named inside):");
    for entry in catalog::ENTRIES {
        let pipeline = entry
            .text
            .lines()
            .find_map(|l| l.trim().strip_prefix("pipeline ="))
            .unwrap_or("")
            .trim();
        println!("  {:<20} [{pipeline}] {}", entry.name, entry.summary);
    }
    println!("\ndefault output directory: ${OUT_ENV} or ./out");
    ExitCode::SUCCESS
}
