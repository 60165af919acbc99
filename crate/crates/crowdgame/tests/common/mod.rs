#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.csv"))
}

pub fn crowdgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdgame"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// A CLI invocation with a golden CSV and its expected exit code.
pub struct Case {
    pub name: &'static str,
    pub args: Vec<String>,
    pub exit: i32,
}

/// One reduced-size run of every CSV-producing subcommand.
pub fn cases() -> Vec<Case> {
    let case = |name, args: &[&str], exit| Case {
        name,
        args: args.iter().map(|s| s.to_string()).collect(),
        exit,
    };
    vec![
        case(
            "simulate_truthful_majority",
            &[
                "simulate",
                "--config",
                &scenario("truthful_majority"),
                "--trials",
                "200",
            ],
            0,
        ),
        case(
            "simulate_all_prejudice",
            &[
                "simulate",
                "--config",
                &scenario("all_prejudice"),
                "--trials",
                "100",
            ],
            0,
        ),
        case(
            "equilibrium_all_randomise",
            &[
                "equilibrium",
                "--config",
                &scenario("all_randomise"),
                "--trials",
                "200",
            ],
            0,
        ),
        case(
            "equilibrium_gold_repair",
            &[
                "equilibrium",
                "--config",
                &scenario("gold_repair"),
                "--trials",
                "200",
            ],
            1,
        ),
        case(
            "impossibility_pair",
            &[
                "impossibility",
                "--config",
                &scenario("impossibility_pair"),
                "--trials",
                "200",
            ],
            0,
        ),
        case(
            "gold_sweep",
            &[
                "gold-sweep",
                "--config",
                &scenario("gold_repair"),
                "--trials",
                "200",
            ],
            0,
        ),
        case(
            "entropy_sweep",
            &[
                "entropy-sweep",
                "--config",
                &scenario("entropy_sweep"),
                "--restarts",
                "4",
                "--steps",
                "5",
                "--trials",
                "100",
                "--p-u",
                "1,0",
                "--p-u",
                "0.8,0.2",
            ],
            0,
        ),
    ]
}

pub fn run_case(case: &Case, threads: usize) -> Output {
    let mut args: Vec<&str> = case.args.iter().map(String::as_str).collect();
    let threads = threads.to_string();
    args.extend(["--threads", &threads]);
    crowdgame(&args)
}
