//! Command-line front end. Four subcommands:
//!
//!   verify  randomized equivalence sweep against the direct reference
//!   bench   grid sweep, CSV report
//!   plan    tune one problem, print the candidate table
//!   fft     transform a stored tensor file (forward or inverse)
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

use std::process::exit;

use fftconv::autotuner::{tune, PlanCache, TuneConfig};
use fftconv::bench::{
    fft_file_forward, fft_file_inverse, run_bench, run_verify, to_csv, BenchConfig, GridSpec,
    VerifyConfig,
};
use fftconv::conv_engine::Pass;
use fftconv::direct_conv::ConvProblem;
use fftconv::tensor::{read_tensor, write_tensor, StoredTensor};

fn print_usage() {
    eprintln!("Usage: fftconv <subcommand> [flags]");
    eprintln!();
    eprintln!("Subcommands:");
    eprintln!("  verify   --seed <n> --trials <n>");
    eprintln!("           Check every FFT path against the direct reference on random");
    eprintln!("           problems. Exits 1 on any mismatch.");
    eprintln!("  bench    --grid <file> --out <file> --seed <n> --trials <n> --force");
    eprintln!("           Sweep a configuration grid and write a CSV report. Runs a");
    eprintln!("           quick verify first and refuses on failure unless --force.");
    eprintln!("           Without --grid a small built-in grid is used; without --out");
    eprintln!("           the CSV goes to stdout.");
    eprintln!("  plan     --s --f --fp --h --w --kh --kw [--ph --pw] [--pass <p>]");
    eprintln!("           [--trials <n>] [--seed <n>] [--cache <file>]");
    eprintln!("           Time every candidate plan for one problem and print the");
    eprintln!("           table. With --cache, plans persist across invocations.");
    eprintln!("  fft      --in <file> --out <file> [--inverse] [--nw <n>]");
    eprintln!("           Transform a stored real tensor to its half spectrum, or");
    eprintln!("           invert a stored spectrum (--nw picks the original width");
    eprintln!("           when it was odd; default assumes even).");
    eprintln!();
    eprintln!("Grid file: one `key = v1,v2,...` line per axis; keys S, f, fp, k, y.");
    eprintln!("Input extent is derived as h = y + k - 1 so output size stays fixed");
    eprintln!("while kernels vary.");
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 2 {
        print_usage();
        exit(2);
    }
    let code = match args[1].as_str() {
        "verify" => cmd_verify(&args[2..]),
        "bench" => cmd_bench(&args[2..]),
        "plan" => cmd_plan(&args[2..]),
        "fft" => cmd_fft(&args[2..]),
        "--help" | "-h" | "help" => {
            print_usage();
            0
        }
        other => {
            eprintln!("unknown subcommand: {other}");
            print_usage();
            2
        }
    };
    exit(code);
}

// Shared flag-parsing helpers. Every flag takes a value except the listed
// booleans; a missing value or a bad number is a usage error.

fn flag_value<'a>(args: &'a [String], i: &mut usize, flag: &str) -> Result<&'a str, String> {
    *i += 1;
    args.get(*i)
        .map(|s| s.as_str())
        .ok_or_else(|| format!("{flag} needs a value"))
}

fn parse_num<T: std::str::FromStr>(s: &str, flag: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("bad value {s:?} for {flag}"))
}

fn usage_error(message: &str) -> i32 {
    eprintln!("error: {message}");
    eprintln!("run `fftconv --help` for usage");
    2
}

fn cmd_verify(args: &[String]) -> i32 {
    let mut cfg = VerifyConfig::default();
    let mut i = 0;
    while i < args.len() {
        let r = match args[i].as_str() {
            "--seed" => flag_value(args, &mut i, "--seed")
                .and_then(|v| parse_num(v, "--seed").map(|n| cfg.seed = n)),
            "--trials" => flag_value(args, &mut i, "--trials")
                .and_then(|v| parse_num(v, "--trials").map(|n| cfg.trials = n)),
            other => Err(format!("unknown flag {other}")),
        };
        if let Err(m) = r {
            return usage_error(&m);
        }
        i += 1;
    }
    if cfg.trials == 0 {
        return usage_error("--trials must be at least 1");
    }

    let report = match run_verify(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("verify could not run: {e}");
            return 1;
        }
    };
    println!(
        "verify: {} random problems, seed {}",
        report.problems, cfg.seed
    );
    for s in &report.stats {
        println!(
            "  {:<8} {:>4} checks, max rel err {:.3e}",
            s.pass.name(),
            s.checks,
            s.max_rel
        );
    }
    if report.passed() {
        println!("verify: PASS");
        0
    } else {
        for f in &report.failures {
            eprintln!("  FAIL {f}");
        }
        println!("verify: FAIL ({} mismatches)", report.failures.len());
        1
    }
}

fn cmd_bench(args: &[String]) -> i32 {
    let mut cfg = BenchConfig::default();
    let mut grid_path: Option<String> = None;
    let mut out_path: Option<String> = None;
    let mut force = false;
    let mut i = 0;
    while i < args.len() {
        let r = match args[i].as_str() {
            "--seed" => flag_value(args, &mut i, "--seed")
                .and_then(|v| parse_num(v, "--seed").map(|n| cfg.seed = n)),
            "--trials" => flag_value(args, &mut i, "--trials")
                .and_then(|v| parse_num(v, "--trials").map(|n| cfg.trials = n)),
            "--grid" => {
                flag_value(args, &mut i, "--grid").map(|v| grid_path = Some(v.to_string()))
            }
            "--out" => flag_value(args, &mut i, "--out").map(|v| out_path = Some(v.to_string())),
            "--force" => {
                force = true;
                Ok(())
            }
            other => Err(format!("unknown flag {other}")),
        };
        if let Err(m) = r {
            return usage_error(&m);
        }
        i += 1;
    }
    if cfg.trials == 0 {
        return usage_error("--trials must be at least 1");
    }

    let grid = match grid_path {
        None => GridSpec::desk_default(),
        Some(p) => {
            let text = match std::fs::read_to_string(&p) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read grid file {p}: {e}");
                    return 1;
                }
            };
            match GridSpec::parse(&text) {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("grid file {p}: {e}");
                    return 1;
                }
            }
        }
    };

    if !force {
        // Bench output is meaningless if the implementations disagree.
        let check = VerifyConfig {
            seed: cfg.seed,
            trials: 8,
        };
        match run_verify(&check) {
            Ok(r) if r.passed() => {
                eprintln!("preflight verify: PASS ({} problems)", r.problems);
            }
            Ok(r) => {
                for f in &r.failures {
                    eprintln!("  FAIL {f}");
                }
                eprintln!("preflight verify failed; refusing to bench (use --force to override)");
                return 1;
            }
            Err(e) => {
                eprintln!("preflight verify could not run: {e}");
                return 1;
            }
        }
    }

    let records = match run_bench(&grid, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("bench failed: {e}");
            return 1;
        }
    };
    let csv = to_csv(&records, &cfg);
    match out_path {
        None => print!("{csv}"),
        Some(p) => {
            if let Err(e) = std::fs::write(&p, csv) {
                eprintln!("cannot write {p}: {e}");
                return 1;
            }
            eprintln!("wrote {} rows to {p}", records.len());
        }
    }
    0
}

fn cmd_plan(args: &[String]) -> i32 {
    let (mut s, mut f, mut fp) = (1usize, 1usize, 1usize);
    let (mut h, mut w) = (0usize, 0usize);
    let (mut k_h, mut k_w) = (0usize, 0usize);
    let (mut p_h, mut p_w) = (0usize, 0usize);
    let mut pass = Pass::Fprop;
    let mut tune_cfg = TuneConfig::default();
    let mut cache_path: Option<String> = None;

    let mut i = 0;
    while i < args.len() {
        let flag = args[i].clone();
        let r = match flag.as_str() {
            "--s" => flag_value(args, &mut i, "--s").and_then(|v| parse_num(v, "--s").map(|n| s = n)),
            "--f" => flag_value(args, &mut i, "--f").and_then(|v| parse_num(v, "--f").map(|n| f = n)),
            "--fp" => flag_value(args, &mut i, "--fp").and_then(|v| parse_num(v, "--fp").map(|n| fp = n)),
            "--h" => flag_value(args, &mut i, "--h").and_then(|v| parse_num(v, "--h").map(|n| h = n)),
            "--w" => flag_value(args, &mut i, "--w").and_then(|v| parse_num(v, "--w").map(|n| w = n)),
            "--kh" => flag_value(args, &mut i, "--kh").and_then(|v| parse_num(v, "--kh").map(|n| k_h = n)),
            "--kw" => flag_value(args, &mut i, "--kw").and_then(|v| parse_num(v, "--kw").map(|n| k_w = n)),
            "--ph" => flag_value(args, &mut i, "--ph").and_then(|v| parse_num(v, "--ph").map(|n| p_h = n)),
            "--pw" => flag_value(args, &mut i, "--pw").and_then(|v| parse_num(v, "--pw").map(|n| p_w = n)),
            "--pass" => flag_value(args, &mut i, "--pass").and_then(|v| {
                Pass::parse(v)
                    .map(|p| pass = p)
                    .ok_or_else(|| format!("bad pass {v:?} (fprop, bprop, accgrad)"))
            }),
            "--trials" => flag_value(args, &mut i, "--trials")
                .and_then(|v| parse_num(v, "--trials").map(|n| tune_cfg.budget = n)),
            "--seed" => flag_value(args, &mut i, "--seed")
                .and_then(|v| parse_num(v, "--seed").map(|n| tune_cfg.seed = n)),
            "--cache" => {
                flag_value(args, &mut i, "--cache").map(|v| cache_path = Some(v.to_string()))
            }
            other => Err(format!("unknown flag {other}")),
        };
        if let Err(m) = r {
            return usage_error(&m);
        }
        i += 1;
    }
    if h == 0 || w == 0 || k_h == 0 || k_w == 0 {
        return usage_error("--h, --w, --kh, --kw are required and must be >= 1");
    }
    if tune_cfg.budget == 0 {
        return usage_error("--trials must be at least 1");
    }

    let problem = ConvProblem::new(s, f, fp, h, w, k_h, k_w).with_padding(p_h, p_w);
    if let Err(e) = problem.validate() {
        return usage_error(&format!("invalid problem: {e}"));
    }

    let mut cache = match &cache_path {
        Some(p) if std::path::Path::new(p).exists() => match PlanCache::load(p.as_ref()) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("cannot load cache {p}: {e}");
                return 1;
            }
        },
        _ => PlanCache::new(),
    };

    let report = match tune(&mut cache, &problem, pass, &tune_cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("tuning failed: {e}");
            return 1;
        }
    };

    println!(
        "plan for s={s} f={f} fp={fp} h={h} w={w} kh={k_h} kw={k_w} ph={p_h} pw={p_w} pass={}",
        pass.name()
    );
    if !report.candidates.is_empty() {
        println!(
            "  {:>4} {:>4}  {:<7} {:<10} {:<6} {:>10}",
            "n_h", "n_w", "path", "gemm", "tile", "time_us"
        );
        for c in &report.candidates {
            let tile = match c.plan.tiling {
                None => "-".to_string(),
                Some(t) => format!("{}x{}", t.d_h, t.d_w),
            };
            println!(
                "  {:>4} {:>4}  {:<7} {:<10} {:<6} {:>10.2}",
                c.plan.n_h,
                c.plan.n_w,
                c.plan.fft_path.name(),
                c.plan.gemm.name(),
                tile,
                c.micros
            );
        }
    }
    let wp = &report.winner.plan;
    let tile = match wp.tiling {
        None => "-".to_string(),
        Some(t) => format!("{}x{}", t.d_h, t.d_w),
    };
    println!(
        "winner: {}x{} {} {} {} {:.2} us{}",
        wp.n_h,
        wp.n_w,
        wp.fft_path.name(),
        wp.gemm.name(),
        tile,
        report.winner.micros,
        if report.cached { " (cached)" } else { "" }
    );

    if let Some(p) = cache_path {
        if let Err(e) = cache.save(p.as_ref()) {
            eprintln!("cannot save cache {p}: {e}");
            return 1;
        }
    }
    0
}

fn cmd_fft(args: &[String]) -> i32 {
    let mut in_path: Option<String> = None;
    let mut out_path: Option<String> = None;
    let mut inverse = false;
    let mut n_w: Option<usize> = None;
    let mut i = 0;
    while i < args.len() {
        let r = match args[i].as_str() {
            "--in" => flag_value(args, &mut i, "--in").map(|v| in_path = Some(v.to_string())),
            "--out" => flag_value(args, &mut i, "--out").map(|v| out_path = Some(v.to_string())),
            "--inverse" => {
                inverse = true;
                Ok(())
            }
            "--nw" => flag_value(args, &mut i, "--nw")
                .and_then(|v| parse_num(v, "--nw").map(|n| n_w = Some(n))),
            other => Err(format!("unknown flag {other}")),
        };
        if let Err(m) = r {
            return usage_error(&m);
        }
        i += 1;
    }
    let (in_path, out_path) = match (in_path, out_path) {
        (Some(a), Some(b)) => (a, b),
        _ => return usage_error("fft needs --in and --out"),
    };

    let stored = match read_tensor(&in_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {in_path}: {e}");
            return 1;
        }
    };

    let result = match (stored, inverse) {
        (StoredTensor::Real(t), false) => {
            fft_file_forward(&t).map(StoredTensor::Complex)
        }
        (StoredTensor::Complex(spec), true) => {
            let width = n_w.unwrap_or_else(|| 2 * (spec.dims[3].max(1) - 1));
            fft_file_inverse(&spec, width).map(StoredTensor::Real)
        }
        (StoredTensor::Complex(_), false) => {
            eprintln!("{in_path} holds a spectrum; pass --inverse to invert it");
            return 1;
        }
        (StoredTensor::Real(_), true) => {
            eprintln!("{in_path} holds real planes; --inverse needs a spectrum file");
            return 1;
        }
    };
    let result = match result {
        Ok(t) => t,
        Err(e) => {
            eprintln!("transform failed: {e}");
            return 1;
        }
    };

    if let Err(e) = write_tensor(&out_path, &result) {
        eprintln!("cannot write {out_path}: {e}");
        return 1;
    }
    let what = match &result {
        StoredTensor::Complex(t) => format!("spectrum {:?}", t.dims),
        StoredTensor::Real(t) => format!("planes {:?}", t.dims),
    };
    eprintln!("wrote {what} to {out_path}");
    0
}
