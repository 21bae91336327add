//! Measurement harness behind the CLI: randomized equivalence checking,
//! grid sweeps, and CSV reporting.
//!
//! Speedups here are against this library's own time-domain reference, not
//! against any external implementation, and every timing is a median of a
//! few wall-clock runs on whatever machine this happens to be. Treat the
//! numbers as trends, not benchmarks of record. The one column with exact
//! semantics is tred_per_s: the direct method's multiply-add count divided
//! by measured time, a throughput yardstick that stays comparable across
//! methods and problem sizes because the numerator never changes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autotuner::median;
use crate::conv_engine::{
    direct_pass, next_7smooth, ConvEngine, ConvPlan, FftPath, Pass, TilePair,
};
use crate::direct_conv::{flop_count, max_rel_error, ConvProblem};
use crate::tensor::{random_tensor, RealTensor4};
use crate::tiling::optimal_tile;
use crate::{Error, Result};

/// How a convolution was computed in a bench row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Direct,
    FftRadix2,
    FftSmooth,
    FftTiled,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Direct,
        Method::FftRadix2,
        Method::FftSmooth,
        Method::FftTiled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::FftRadix2 => "fft_radix2",
            Method::FftSmooth => "fft_smooth",
            Method::FftTiled => "fft_tiled",
        }
    }
}

/// One CSV row: a problem, a pass, a method, and its measurements.
#[derive(Debug, Clone, Copy)]
pub struct BenchRecord {
    pub problem: ConvProblem,
    pub pass: Pass,
    pub method: Method,
    /// Transform extents, zero for the direct method.
    pub plan_nh: usize,
    pub plan_nw: usize,
    pub time_us: f64,
    pub speedup_vs_direct: f64,
    pub tred_per_s: f64,
    /// S*f*f', the figure-axis problem size.
    pub problem_size: usize,
}

/// The canonical throughput formula; bench rows and their auditors must
/// both call this so recomputation is exact.
pub fn tred_per_s(flops: u64, time_us: f64) -> f64 {
    flops as f64 / (time_us * 1e-6)
}

/// A sweep grid: the cross product of these axes, one problem per element.
/// Problems are square with input extent h = y + k - 1, parameterized on
/// output size y so kernel sweeps hold the output fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub s: Vec<usize>,
    pub f: Vec<usize>,
    pub fp: Vec<usize>,
    pub k: Vec<usize>,
    pub y: Vec<usize>,
}

impl GridSpec {
    /// Desk-scale default, small enough for a full sweep in minutes.
    pub fn desk_default() -> Self {
        GridSpec {
            s: vec![1, 4],
            f: vec![4, 16],
            fp: vec![4, 16],
            k: vec![3, 9],
            y: vec![8, 16],
        }
    }

    /// Parse the grid file format: one `key = v1,v2,...` line per axis,
    /// keys S, f, fp, k, y, each required exactly once. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut axes: [(&str, Option<Vec<usize>>); 5] = [
            ("S", None),
            ("f", None),
            ("fp", None),
            ("k", None),
            ("y", None),
        ];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, values) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected `key = values`, found {line:?}"),
            })?;
            let key = key.trim();
            let slot = axes
                .iter_mut()
                .find(|(name, _)| *name == key)
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("unknown grid key {key:?} (expected S, f, fp, k, y)"),
                })?;
            if slot.1.is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate grid key {key:?}"),
                });
            }
            let mut parsed = Vec::new();
            for v in values.split(',') {
                let v = v.trim();
                let n: usize = v.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad value {v:?} for key {key:?}"),
                })?;
                if n == 0 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("grid values must be >= 1, got 0 for {key:?}"),
                    });
                }
                parsed.push(n);
            }
            if parsed.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("no values for key {key:?}"),
                });
            }
            slot.1 = Some(parsed);
        }
        let mut take = |i: usize| -> Result<Vec<usize>> {
            axes[i].1.take().ok_or_else(|| Error::FileFormat {
                message: format!("grid file is missing the {:?} axis", axes[i].0),
            })
        };
        Ok(GridSpec {
            s: take(0)?,
            f: take(1)?,
            fp: take(2)?,
            k: take(3)?,
            y: take(4)?,
        })
    }

    /// Expand to concrete problems, outer axes varying slowest.
    pub fn problems(&self) -> Vec<ConvProblem> {
        let mut out = Vec::new();
        for &s in &self.s {
            for &f in &self.f {
                for &fp in &self.fp {
                    for &k in &self.k {
                        for &y in &self.y {
                            let h = y + k - 1;
                            out.push(ConvProblem::new(s, f, fp, h, h, k, k));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { trials: 3, seed: 42 }
    }
}

fn time_median_us(trials: usize, mut run: impl FnMut()) -> f64 {
    run(); // warmup, discarded
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let t0 = Instant::now();
        run();
        samples.push(t0.elapsed().as_secs_f64() * 1e6);
    }
    median(&mut samples)
}

/// The tiled plan the bench sweeps: per-axis tile lengths at the cost
/// model's argmin, clamped to the output, over power-of-two windows.
pub fn tiled_bench_plan(p: &ConvProblem) -> Result<ConvPlan> {
    let d_h = optimal_tile(p.padded_h(), p.k_h).min(p.out_h());
    let d_w = optimal_tile(p.padded_w(), p.k_w).min(p.out_w());
    let tile = TilePair { d_h, d_w };
    ConvPlan::tiled(
        *p,
        FftPath::Radix2Elided,
        (d_h + p.k_h - 1).next_power_of_two(),
        (d_w + p.k_w - 1).next_power_of_two(),
        tile,
    )
}

/// Sweep the grid: one record per (problem, pass, method), methods in
/// [`Method::ALL`] order with direct first so every row's speedup divides
/// by a baseline measured in the same block.
pub fn run_bench(grid: &GridSpec, cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let trials = cfg.trials.max(1);
    let mut records = Vec::new();
    let mut engine = ConvEngine::new();
    for (pi, problem) in grid.problems().into_iter().enumerate() {
        problem.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (pi as u64) << 16);
        let x = random_tensor(problem.x_dims(), &mut rng);
        let wgt = random_tensor(problem.w_dims(), &mut rng);
        let gy = random_tensor(problem.y_dims(), &mut rng);
        let flops = flop_count(&problem);
        let problem_size = problem.s * problem.f * problem.fp;

        let plans = [
            (Method::FftRadix2, ConvPlan::minimal(problem, FftPath::Radix2Elided)?),
            (Method::FftSmooth, ConvPlan::minimal(problem, FftPath::SmoothNatural)?),
            (Method::FftTiled, tiled_bench_plan(&problem)?),
        ];

        for pass in Pass::ALL {
            let direct_us = time_median_us(trials, || {
                direct_pass(pass, &problem, &x, &wgt, &gy).expect("validated problem");
            });
            records.push(BenchRecord {
                problem,
                pass,
                method: Method::Direct,
                plan_nh: 0,
                plan_nw: 0,
                time_us: direct_us,
                speedup_vs_direct: 1.0,
                tred_per_s: tred_per_s(flops, direct_us),
                problem_size,
            });
            for (method, plan) in &plans {
                let us = time_median_us(trials, || {
                    engine
                        .run_pass(pass, plan, &x, &wgt, &gy)
                        .expect("validated plan");
                });
                records.push(BenchRecord {
                    problem,
                    pass,
                    method: *method,
                    plan_nh: plan.n_h,
                    plan_nw: plan.n_w,
                    time_us: us,
                    speedup_vs_direct: direct_us / us,
                    tred_per_s: tred_per_s(flops, us),
                    problem_size,
                });
            }
        }
    }
    Ok(records)
}

pub const CSV_COLUMNS: &str =
    "S,f,fp,h,w,kh,kw,pass,method,plan_nh,plan_nw,time_us,speedup_vs_direct,tred_per_s,problem_size";

/// Render records as CSV with a commented preamble documenting the
/// measurement setup and the column semantics.
pub fn to_csv(records: &[BenchRecord], cfg: &BenchConfig) -> String {
    let mut out = String::new();
    out.push_str("# fftconv bench report\n");
    out.push_str(&format!(
        "# timing: median of {} runs after one discarded warmup; single worker, methods run sequentially\n",
        cfg.trials.max(1)
    ));
    out.push_str("# speedup_vs_direct = direct_time_us / time_us for the same problem and pass;\n");
    out.push_str("#   the baseline is this library's time-domain reference, not an external implementation\n");
    out.push_str("# tred_per_s = flop_count / time, where flop_count is the direct method's\n");
    out.push_str("#   multiply-add count for the problem regardless of the method measured\n");
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for r in records {
        let p = &r.problem;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.s,
            p.f,
            p.fp,
            p.h,
            p.w,
            p.k_h,
            p.k_w,
            r.pass.name(),
            r.method.name(),
            r.plan_nh,
            r.plan_nw,
            r.time_us,
            r.speedup_vs_direct,
            r.tred_per_s,
            r.problem_size,
        ));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub seed: u64,
    pub trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 1, trials: 25 }
    }
}

/// Aggregate of one pass's checks across the whole verify run.
#[derive(Debug, Clone, Copy)]
pub struct PassStats {
    pub pass: Pass,
    pub checks: usize,
    pub max_rel: f32,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub problems: usize,
    pub stats: [PassStats; 3],
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Randomized equivalence sweep: `trials` random problems, every pass
/// through both FFT paths and one tiled configuration, all compared to the
/// direct reference at plan tolerance.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stats = Pass::ALL.map(|pass| PassStats {
        pass,
        checks: 0,
        max_rel: 0.0,
    });
    let mut failures = Vec::new();

    for trial in 0..cfg.trials {
        let k_h = rng.gen_range(1..=5);
        let k_w = rng.gen_range(1..=5);
        let problem = ConvProblem::new(
            rng.gen_range(1..=4),
            rng.gen_range(1..=4),
            rng.gen_range(1..=4),
            rng.gen_range(k_h..=16),
            rng.gen_range(k_w..=16),
            k_h,
            k_w,
        )
        .with_padding(rng.gen_range(0..k_h), rng.gen_range(0..k_w));
        let x = random_tensor(problem.x_dims(), &mut rng);
        let wgt = random_tensor(problem.w_dims(), &mut rng);
        let gy = random_tensor(problem.y_dims(), &mut rng);

        let mut plans = vec![
            ConvPlan::minimal(problem, FftPath::Radix2Elided)?,
            ConvPlan::minimal(problem, FftPath::SmoothNatural)?,
        ];
        // One random tiled configuration per problem.
        let d_h = rng.gen_range(1..=problem.out_h());
        let d_w = rng.gen_range(1..=problem.out_w());
        plans.push(ConvPlan::tiled(
            problem,
            FftPath::SmoothNatural,
            next_7smooth(d_h + problem.k_h - 1),
            next_7smooth(d_w + problem.k_w - 1),
            TilePair { d_h, d_w },
        )?);

        let mut engine = ConvEngine::new();
        for plan in &plans {
            for (slot, pass) in Pass::ALL.into_iter().enumerate() {
                let want = direct_pass(pass, &problem, &x, &wgt, &gy)?;
                let got = engine.run_pass(pass, plan, &x, &wgt, &gy)?;
                let rel = max_rel_error(&got, &want);
                stats[slot].checks += 1;
                stats[slot].max_rel = stats[slot].max_rel.max(rel);
                let tol = plan.tolerance() * if plan.tiling.is_some() { 2.0 } else { 1.0 };
                if rel > tol {
                    failures.push(format!(
                        "trial {trial}: {} via {} n=({},{}) tile={:?} on {:?}: rel {rel:e} > tol {tol:e}",
                        pass.name(),
                        plan.fft_path.name(),
                        plan.n_h,
                        plan.n_w,
                        plan.tiling,
                        problem,
                    ));
                }
            }
        }
    }

    Ok(VerifyReport {
        problems: cfg.trials,
        stats,
        failures,
    })
}

/// Transform a stored real tensor to its half spectrum, or invert a stored
/// spectrum back to planes. The inverse needs the original width because a
/// half spectrum with b bins may come from width 2b-2 or 2b-1; `n_w` breaks
/// the tie (callers default it to the even choice).
pub fn fft_file_forward(t: &RealTensor4) -> Result<crate::tensor::FreqTensor> {
    let [_, _, h, w] = t.dims;
    let plan = crate::rfft::RfftPlan::new(
        next_7smooth(h),
        next_7smooth(w),
        crate::rfft::FreqLayout::RowMajorFreq,
    )?;
    crate::rfft::rfft2d_batched(t, &plan)
}

pub fn fft_file_inverse(spec: &crate::tensor::FreqTensor, n_w: usize) -> Result<RealTensor4> {
    let [_, _, n_h, bins] = spec.dims;
    if n_w / 2 + 1 != bins {
        return Err(Error::LenMismatch {
            context: "inverse width does not produce the stored bin count",
            expected: bins,
            got: n_w / 2 + 1,
        });
    }
    let plan = crate::rfft::RfftPlan::new(n_h, n_w, crate::rfft::FreqLayout::RowMajorFreq)?;
    crate::rfft::irfft2d_batched(spec, &plan, n_h, n_w)
}
