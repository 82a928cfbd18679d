//! Runs the thirteen acceptance criteria and prints one line per criterion.
//!
//! `FLV_ACCEPTANCE_SCALE` multiplies the replica counts (default 1),
//! `FLV_ACCEPTANCE_ONLY` takes a comma-separated list of criteria, and
//! `FLV_SEED` / `FLV_PARALLEL` set the seed and the worker count.

use std::process::ExitCode;

use flv_core::verify::{run_criterion, Exec, Settings};

fn env<T: std::str::FromStr>(key: &str) -> Option<T> {
    std::env::var(key).ok().and_then(|v| v.parse().ok())
}

fn main() -> ExitCode {
    // Under `cargo test -- --list` and similar, there is nothing to run.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let threads = env("FLV_PARALLEL").unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let seed = env("FLV_SEED").unwrap_or(20_240_601u64);
    let scale = env("FLV_ACCEPTANCE_SCALE").unwrap_or(1.0);
    let only: Vec<u8> = std::env::var("FLV_ACCEPTANCE_ONLY")
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_default();
    let settings = Settings::new(Exec::parallel(seed, threads)).with_scale(scale);
    println!("acceptance suite: seed {seed}, threads {threads}, scale {scale}");

    let mut failed = 0;
    for id in 1..=13u8 {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        match run_criterion(id, &settings) {
            Ok(c) => {
                println!("{}", c.summary_line());
                for r in &c.reports {
                    let se = r.se.map_or(String::new(), |s| format!(" se {s:.3e}"));
                    let mark = if r.pass { "ok  " } else { "FAIL" };
                    println!("    {mark} {}: estimate {:.6}{se} reference {:.6}", r.name, r.estimate, r.reference);
                }
                failed += usize::from(!c.pass());
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL (error) {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance suite: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
