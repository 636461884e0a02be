use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::process::ExitCode;

use clap::{Args, ValueEnum};
use cuedr_core::entropy::{entropy_grid, EntropyRow};
use cuedr_core::store::kdf::{bench, BenchStats, DEFAULT_PBKDF2_ITERATIONS};
use cuedr_core::store::{KdfFloor, KdfParams};
use serde::Serialize;

use crate::output::Output;
use crate::CmdResult;

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let a: usize = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
    if a == 0 || a > b {
        return Err(format!("{s}: expected LOW-HIGH with 1 <= LOW <= HIGH"));
    }
    Ok(a..=b)
}

#[derive(Args)]
pub struct EntropyArgs {
    /// Keywords per portfolio (k).
    #[arg(long, default_value_t = 26)]
    keys: usize,
    /// Portfolios per credential (m).
    #[arg(long, default_value_t = 6)]
    length: usize,
    /// Report every (k, m) pair in --key-range x --length-range instead.
    #[arg(long)]
    grid: bool,
    #[arg(long, default_value = "2-26", value_parser = parse_range)]
    key_range: RangeInclusive<usize>,
    #[arg(long, default_value = "1-8", value_parser = parse_range)]
    length_range: RangeInclusive<usize>,
    /// Mark rows reaching this many bits.
    #[arg(long, default_value_t = 20.0)]
    target_bits: f64,
    /// Attempts an attacker gets before lockout, for the per-account bound.
    #[arg(long, default_value_t = 10)]
    lockout: u32,
    /// With --grid, list only the rows reaching --target-bits.
    #[arg(long)]
    meeting_only: bool,
}

fn entropy_table(rows: &[EntropyRow]) -> String {
    let mut s = format!(
        "{:>3} {:>3} {:>8} {:>14} {:>14} {:>6}\n",
        "k", "m", "bits", "p(guess)", "p(lockout)", "target"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>3} {:>3} {:>8.2} {:>14.4e} {:>14.4e} {:>6}",
            r.k,
            r.m,
            r.bits,
            r.guess_probability,
            r.lockout_bound.unwrap_or(f64::NAN),
            match r.meets_target {
                Some(true) => "yes",
                Some(false) => "no",
                None => "-",
            }
        );
    }
    s
}

pub fn entropy(args: EntropyArgs, out: &Output) -> CmdResult {
    if args.keys == 0 || args.length == 0 {
        return Err("k and m must be positive".into());
    }
    let target = Some(args.target_bits);
    let rows = if args.grid {
        let mut rows = entropy_grid(
            args.key_range,
            args.length_range,
            Some(args.lockout),
            target,
        );
        if args.meeting_only {
            rows.retain(|r| r.meets_target == Some(true));
        }
        rows
    } else {
        vec![EntropyRow::new(
            args.keys,
            args.length,
            Some(args.lockout),
            target,
        )]
    };
    out.emit(&rows, || entropy_table(&rows))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    #[value(name = "pbkdf2-sha256")]
    Pbkdf2,
    Argon2id,
}

#[derive(Clone, Copy, ValueEnum)]
enum FloorProfile {
    Production,
    Test,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "pbkdf2-sha256")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = DEFAULT_PBKDF2_ITERATIONS)]
    iterations: u32,
    #[arg(long, default_value_t = 19 * 1024)]
    memory_kib: u32,
    #[arg(long, default_value_t = 2)]
    passes: u32,
    #[arg(long, default_value_t = 1)]
    lanes: u32,
    #[arg(long, default_value_t = 5)]
    samples: usize,
    /// Also time the same parameters at double cost and report the ratio.
    #[arg(long)]
    compare_doubled: bool,
    /// Floor the parameters and measured time are checked against.
    #[arg(long, value_enum, default_value = "production")]
    floor: FloorProfile,
    /// Exit 1 when the floor is not met.
    #[arg(long)]
    enforce_floor: bool,
}

#[derive(Serialize)]
struct BenchReport {
    stats: BenchStats,
    doubled: Option<BenchStats>,
    median_ratio: Option<f64>,
    floor: KdfFloor,
    params_meet_floor: bool,
    floor_error: Option<String>,
    time_meets_floor: bool,
}

pub fn kdf_bench(args: BenchArgs, out: &Output) -> CmdResult {
    if args.samples == 0 {
        return Err("--samples must be positive".into());
    }
    let params = match args.algorithm {
        Algorithm::Pbkdf2 => KdfParams::Pbkdf2Sha256 {
            iterations: args.iterations,
        },
        Algorithm::Argon2id => KdfParams::Argon2id {
            memory_kib: args.memory_kib,
            passes: args.passes,
            lanes: args.lanes,
        },
    };
    let floor = match args.floor {
        FloorProfile::Production => KdfFloor::production(),
        FloorProfile::Test => KdfFloor::test(),
    };
    let stats = bench(&params, args.samples)?;
    let doubled = if args.compare_doubled {
        Some(bench(&params.scaled(2), args.samples)?)
    } else {
        None
    };
    let floor_check = params.check_floor(&floor);
    let report = BenchReport {
        median_ratio: doubled.as_ref().map(|d| d.median_ms / stats.median_ms),
        time_meets_floor: stats.median_ms >= floor.min_verify_millis as f64,
        params_meet_floor: floor_check.is_ok(),
        floor_error: floor_check.err().map(|e| e.to_string()),
        stats,
        doubled,
        floor,
    };
    out.emit(&report, || {
        let mut s = String::new();
        let line = |s: &mut String, b: &BenchStats| {
            let _ = writeln!(
                s,
                "{:<14} {:?} samples={} min={:.2}ms median={:.2}ms mean={:.2}ms max={:.2}ms",
                b.algorithm, b.params, b.samples, b.min_ms, b.median_ms, b.mean_ms, b.max_ms
            );
        };
        line(&mut s, &report.stats);
        if let (Some(d), Some(r)) = (&report.doubled, report.median_ratio) {
            line(&mut s, d);
            let _ = writeln!(s, "doubled/base median ratio {r:.2}");
        }
        let _ = writeln!(
            s,
            "floor: parameters {}, median {} {} ms",
            report.floor_error.as_deref().unwrap_or("ok"),
            if report.time_meets_floor {
                "meets"
            } else {
                "is below"
            },
            report.floor.min_verify_millis
        );
        s
    })?;
    let ok = report.params_meet_floor && report.time_meets_floor;
    Ok(if ok || !args.enforce_floor {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
