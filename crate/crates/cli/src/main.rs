mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use polycf::PolyCfError;

use config::{RunConfig, KEYS};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 1.
    Usage(String),
    /// Command-line parse failure, printed by clap itself; exit code 1.
    Clap(clap::Error),
    /// Anything that fails while running; exit code 2.
    Runtime(PolyCfError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Clap(e) => write!(f, "{e}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<PolyCfError> for CliError {
    fn from(e: PolyCfError) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Clap(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn checkpoint_arg() -> Arg {
    Arg::new("checkpoint")
        .long("checkpoint")
        .value_name("PATH")
        .required(true)
        .value_parser(value_parser!(PathBuf))
        .help("checkpoint JSON written by `train`")
}

fn command() -> Command {
    let mut cmd = Command::new("polycf")
        .about("Polynomial spectral filters for implicit-feedback recommendation")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .global(true)
                .value_parser(value_parser!(PathBuf))
                .help("flat `key = value` config file"),
        );
    for key in KEYS {
        let mut arg = Arg::new(key.name)
            .long(key.name)
            .help(key.help)
            .global(true)
            .overrides_with(key.name);
        arg = if key.switch {
            arg.action(ArgAction::SetTrue)
        } else {
            arg.value_name("VALUE").num_args(1)
        };
        if key.name.contains('_') {
            arg = arg.alias(key.name.replace('_', "-"));
        }
        cmd = cmd.arg(arg);
    }
    cmd.subcommand(Command::new("train").about("Train the kernel coefficients and write a checkpoint"))
        .subcommand(
            Command::new("eval")
                .about("Evaluate a checkpoint with Recall@k and NDCG@k")
                .arg(checkpoint_arg()),
        )
        .subcommand(
            Command::new("recommend")
                .about("Print the top-k unseen items for one user")
                .arg(checkpoint_arg())
                .arg(
                    Arg::new("user")
                        .long("user")
                        .required(true)
                        .value_parser(value_parser!(usize)),
                ),
        )
        .subcommand(
            Command::new("diagnose")
                .about("Desk-scale checks and reports")
                .subcommand_required(true)
                .subcommand(
                    Command::new("theorem2")
                        .about("Shared spectrum of the generalized Gram operators")
                        .arg(
                            Arg::new("pairs")
                                .long("pairs")
                                .default_value("0,1;0.2,0.8;0.5,0.5")
                                .help("gamma pairs, `a,b;c,d`"),
                        )
                        .arg(
                            Arg::new("random")
                                .long("random")
                                .action(ArgAction::SetTrue)
                                .help("use a random interaction matrix instead of the dataset (datasets are limited to 100 items)"),
                        )
                        .arg(Arg::new("users").long("users").default_value("20").value_parser(value_parser!(usize)))
                        .arg(Arg::new("items").long("items").default_value("20").value_parser(value_parser!(usize)))
                        .arg(Arg::new("density").long("density").default_value("0.3").value_parser(value_parser!(f64))),
                )
                .subcommand(
                    Command::new("rankbound")
                        .about("Rank of embedding-propagation score matrices")
                        .arg(Arg::new("dim").long("dim").default_value("4").value_parser(value_parser!(usize)))
                        .arg(Arg::new("order").long("order").default_value("2").value_parser(value_parser!(usize)))
                        .arg(Arg::new("trials").long("trials").default_value("100").value_parser(value_parser!(usize))),
                )
                .subcommand(
                    Command::new("response")
                        .about("Write the learned response curves as CSV")
                        .arg(checkpoint_arg())
                        .arg(Arg::new("points").long("points").default_value("101").value_parser(value_parser!(usize))),
                )
                .subcommand(
                    Command::new("transfer")
                        .about("Evaluate a checkpoint on another dataset against random kernels")
                        .arg(checkpoint_arg()),
                )
                .subcommand(Command::new("ablation").about("Train and evaluate the reduced variants")),
        )
}

fn leaf(m: &ArgMatches) -> &ArgMatches {
    match m.subcommand() {
        Some((_, sub)) => leaf(sub),
        None => m,
    }
}

fn resolve(m: &ArgMatches) -> Result<RunConfig, CliError> {
    let m = leaf(m);
    let mut cfg = RunConfig::default();
    if let Some(path) = m.get_one::<PathBuf>("config") {
        cfg.merge_file(path)?;
    }
    for key in KEYS {
        if m.value_source(key.name) != Some(ValueSource::CommandLine) {
            continue;
        }
        let value = if key.switch {
            "true".to_string()
        } else {
            m.get_one::<String>(key.name).cloned().unwrap_or_default()
        };
        cfg.set(key.name, &value).map_err(CliError::Usage)?;
    }
    Ok(cfg)
}

fn run(args: Vec<OsString>) -> Result<(), CliError> {
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Ok(());
            }
            return Err(CliError::Clap(e));
        }
    };
    let cfg = resolve(&matches)?;
    match matches.subcommand() {
        Some(("train", _)) => commands::train(&cfg),
        Some(("eval", m)) => {
            commands::eval(&cfg, m.get_one::<PathBuf>("checkpoint").expect("required"))
        }
        Some(("recommend", m)) => commands::recommend(
            &cfg,
            m.get_one::<PathBuf>("checkpoint").expect("required"),
            *m.get_one::<usize>("user").expect("required"),
        ),
        Some(("diagnose", m)) => match m.subcommand() {
            Some(("theorem2", d)) => commands::theorem2(
                &cfg,
                d.get_one::<String>("pairs").expect("default"),
                d.get_flag("random").then(|| {
                    (
                        *d.get_one::<usize>("users").expect("default"),
                        *d.get_one::<usize>("items").expect("default"),
                        *d.get_one::<f64>("density").expect("default"),
                    )
                }),
            ),
            Some(("rankbound", d)) => commands::rankbound(
                &cfg,
                *d.get_one::<usize>("dim").expect("default"),
                *d.get_one::<usize>("order").expect("default"),
                *d.get_one::<usize>("trials").expect("default"),
            ),
            Some(("response", d)) => commands::response(
                &cfg,
                d.get_one::<PathBuf>("checkpoint").expect("required"),
                *d.get_one::<usize>("points").expect("default"),
            ),
            Some(("transfer", d)) => {
                commands::transfer(&cfg, d.get_one::<PathBuf>("checkpoint").expect("required"))
            }
            Some(("ablation", _)) => commands::ablation(&cfg),
            _ => unreachable!("subcommand required"),
        },
        _ => unreachable!("subcommand required"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Clap(inner) => {
                    let _ = inner.print();
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<OsString> {
        list.iter().map(OsString::from).collect()
    }

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn flags_override_defaults_after_the_subcommand() {
        let m = command()
            .try_get_matches_from(args(&[
                "polycf",
                "train",
                "--K",
                "3",
                "--fast",
                "--batch-users",
                "7",
            ]))
            .unwrap();
        let cfg = resolve(&m).unwrap();
        assert_eq!(cfg.raw("K"), "3");
        assert_eq!(cfg.raw("fast"), "true");
        assert_eq!(cfg.raw("batch_users"), "7");
        assert_eq!(cfg.raw("omega"), "1");
    }
}
