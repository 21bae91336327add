//! Plan search. For a given problem and pass, enumerate every transform
//! recipe worth considering (interpolation sizes, FFT path, contraction
//! strategy, optional tiling), probe each for correctness, time the
//! survivors on synthetic data, and cache the fastest.
//!
//! The size axis follows a simple rule: per axis, every 7-smooth integer
//! between the padded extent and the next power of two. A power-of-two
//! extent collapses the axis to a single point. Non-smooth extents are never
//! used directly; the nearest smooth size up is always at most the next
//! power of two away, and supporting arbitrary lengths would buy nothing
//! the interval does not already cover.
//!
//! Measurements are wall-clock medians and inherently machine- and
//! moment-specific, so cached winners are a heuristic, not a contract. What
//! IS contractual: a tuned plan always reproduces the direct reference
//! (losers on correctness are dropped no matter how fast), and a cache hit
//! is returned without re-measurement.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cgemm::GemmStrategy;
use crate::conv_engine::{
    direct_pass, next_7smooth, ConvEngine, ConvPlan, FftPath, Pass, TilePair,
};
use crate::direct_conv::{max_rel_error, ConvProblem};
use crate::fft1d::is_7smooth;
use crate::tensor::random_tensor;
use crate::tiling::optimal_tile;
use crate::{Error, Result};

/// All 7-smooth sizes in [n, next_pow2(n)], ascending. The upper end is
/// always a member, so the list is never empty; a power of two is its own
/// upper end and yields a singleton.
pub fn smooth_sizes(n: usize) -> Vec<usize> {
    let n = n.max(1);
    (n..=n.next_power_of_two()).filter(|&m| is_7smooth(m)).collect()
}

/// The search space for one problem: a size grid and the strategy axes.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub problem: ConvProblem,
    pub sizes: Vec<(usize, usize)>,
    pub paths: Vec<FftPath>,
    pub gemms: Vec<GemmStrategy>,
    pub tiles: Vec<Option<TilePair>>,
}

impl CandidateSet {
    pub fn for_problem(problem: &ConvProblem) -> Self {
        let hs = smooth_sizes(problem.padded_h());
        let ws = smooth_sizes(problem.padded_w());
        let sizes = hs
            .iter()
            .flat_map(|&a| ws.iter().map(move |&b| (a, b)))
            .collect();
        // One tiled candidate, with per-axis tile lengths at the cost
        // model's argmin. Only offered when it actually splits the output.
        let mut tiles = vec![None];
        let d_h = optimal_tile(problem.padded_h(), problem.k_h).min(problem.out_h());
        let d_w = optimal_tile(problem.padded_w(), problem.k_w).min(problem.out_w());
        if d_h < problem.out_h() || d_w < problem.out_w() {
            tiles.push(Some(TilePair { d_h, d_w }));
        }
        CandidateSet {
            problem: *problem,
            sizes,
            paths: FftPath::ALL.to_vec(),
            gemms: GemmStrategy::ALL.to_vec(),
            tiles,
        }
    }

    /// Expand the axes into concrete plans. Size/path combinations the path
    /// cannot drive (non-power-of-two under the elided path) are skipped;
    /// tiled candidates pick their own minimal extents for the tile window.
    pub fn plans(&self) -> Vec<ConvPlan> {
        let mut out = Vec::new();
        for tile in &self.tiles {
            for &path in &self.paths {
                for &gemm in &self.gemms {
                    match tile {
                        None => {
                            for &(n_h, n_w) in &self.sizes {
                                if let Ok(p) = ConvPlan::new(self.problem, path, n_h, n_w) {
                                    out.push(p.with_gemm(gemm));
                                }
                            }
                        }
                        Some(t) => {
                            let need_h = t.d_h + self.problem.k_h - 1;
                            let need_w = t.d_w + self.problem.k_w - 1;
                            let (n_h, n_w) = match path {
                                FftPath::Radix2Elided => {
                                    (need_h.next_power_of_two(), need_w.next_power_of_two())
                                }
                                FftPath::SmoothNatural => {
                                    (next_7smooth(need_h), next_7smooth(need_w))
                                }
                            };
                            if let Ok(p) = ConvPlan::tiled(self.problem, path, n_h, n_w, *t) {
                                out.push(p.with_gemm(gemm));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// What a cached plan is filed under. Plans are per pass; the best recipe
/// for a forward pass is routinely wrong for the weight gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlanKey {
    pub problem: ConvProblem,
    pub pass: Pass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedPlan {
    pub plan: ConvPlan,
    pub micros: f64,
}

/// In-memory plan store. Reads are plain lookups; in this single-threaded
/// library, write serialization per key is the &mut borrow.
#[derive(Debug, Default)]
pub struct PlanCache {
    entries: HashMap<PlanKey, CachedPlan>,
}

const CACHE_HEADER: &str = "fftconv-plancache v1";
const CACHE_FIELDS: usize = 16;

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &PlanKey) -> Option<&CachedPlan> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: PlanKey, entry: CachedPlan) {
        self.entries.insert(key, entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PlanKey, &CachedPlan)> {
        self.entries.iter()
    }

    /// Serialize to the line format under the `fftconv-plancache v1` header.
    /// Entries are sorted by key so identical caches produce identical
    /// files. Microsecond values print in shortest round-trip form and
    /// reload bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut rows: Vec<_> = self.entries.iter().collect();
        rows.sort_by_key(|(k, _)| {
            let p = &k.problem;
            (
                p.s, p.f, p.fp, p.h, p.w, p.k_h, p.k_w, p.p_h, p.p_w,
                k.pass.name(),
            )
        });
        let mut text = String::from(CACHE_HEADER);
        text.push('\n');
        for (key, entry) in rows {
            let p = &key.problem;
            let plan = &entry.plan;
            let tile = match plan.tiling {
                None => "-".to_string(),
                Some(t) => format!("{}x{}", t.d_h, t.d_w),
            };
            writeln!(
                text,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.s, p.f, p.fp, p.h, p.w, p.k_h, p.k_w, p.p_h, p.p_w,
                key.pass.name(),
                plan.n_h, plan.n_w,
                plan.fft_path.name(),
                plan.gemm.name(),
                tile,
                entry.micros,
            )
            .expect("write to String cannot fail");
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(CACHE_HEADER) => {}
            Some(other) => {
                return Err(Error::FileFormat {
                    message: format!("expected header {CACHE_HEADER:?}, found {other:?}"),
                })
            }
            None => {
                return Err(Error::FileFormat {
                    message: "empty cache file".to_string(),
                })
            }
        }
        let mut cache = PlanCache::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            if line.is_empty() {
                continue;
            }
            let (key, entry) = parse_entry(line_no, line)?;
            cache.insert(key, entry);
        }
        Ok(cache)
    }
}

fn parse_entry(line_no: usize, line: &str) -> Result<(PlanKey, CachedPlan)> {
    let bad = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != CACHE_FIELDS {
        return Err(bad(format!(
            "expected {CACHE_FIELDS} tab-separated fields, found {}",
            fields.len()
        )));
    }
    let num = |idx: usize, what: &str| -> Result<usize> {
        fields[idx]
            .parse()
            .map_err(|_| bad(format!("bad {what} {:?}", fields[idx])))
    };
    let problem = ConvProblem::new(
        num(0, "batch count")?,
        num(1, "input planes")?,
        num(2, "output planes")?,
        num(3, "height")?,
        num(4, "width")?,
        num(5, "kernel height")?,
        num(6, "kernel width")?,
    )
    .with_padding(num(7, "height padding")?, num(8, "width padding")?);
    let pass = Pass::parse(fields[9]).ok_or_else(|| bad(format!("bad pass {:?}", fields[9])))?;
    let n_h = num(10, "transform height")?;
    let n_w = num(11, "transform width")?;
    let fft_path =
        FftPath::parse(fields[12]).ok_or_else(|| bad(format!("bad path {:?}", fields[12])))?;
    let gemm = GemmStrategy::parse(fields[13])
        .ok_or_else(|| bad(format!("bad gemm strategy {:?}", fields[13])))?;
    let tiling = match fields[14] {
        "-" => None,
        spec => {
            let (a, b) = spec
                .split_once('x')
                .ok_or_else(|| bad(format!("bad tile spec {spec:?}")))?;
            let d_h = a.parse().map_err(|_| bad(format!("bad tile height {a:?}")))?;
            let d_w = b.parse().map_err(|_| bad(format!("bad tile width {b:?}")))?;
            Some(TilePair { d_h, d_w })
        }
    };
    let micros: f64 = fields[15]
        .parse()
        .map_err(|_| bad(format!("bad time {:?}", fields[15])))?;
    if !micros.is_finite() || micros < 0.0 {
        return Err(bad(format!("bad time {micros}")));
    }
    let plan = ConvPlan {
        problem,
        n_h,
        n_w,
        fft_path,
        gemm,
        tiling,
    };
    plan.validate().map_err(|e| bad(e.to_string()))?;
    Ok((
        PlanKey { problem, pass },
        CachedPlan { plan, micros },
    ))
}

/// Measurement knobs: timed runs per candidate (median taken) and the seed
/// for the synthetic operands.
#[derive(Debug, Clone, Copy)]
pub struct TuneConfig {
    pub budget: usize,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            budget: 5,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CandidateTiming {
    pub plan: ConvPlan,
    pub micros: f64,
}

/// tune's full story: the winner plus every candidate it beat.
/// `candidates` is empty on a cache hit.
#[derive(Debug, Clone)]
pub struct TuneReport {
    pub key: PlanKey,
    pub winner: CachedPlan,
    pub cached: bool,
    pub candidates: Vec<CandidateTiming>,
}

/// Find the fastest plan for (problem, pass). A cache hit returns
/// immediately with no measurement. Otherwise each candidate is first run
/// once against the direct reference (this doubles as the discarded warmup)
/// and dropped on mismatch, then timed `budget` times; the median decides.
pub fn tune(
    cache: &mut PlanCache,
    problem: &ConvProblem,
    pass: Pass,
    cfg: &TuneConfig,
) -> Result<TuneReport> {
    problem.validate()?;
    let key = PlanKey {
        problem: *problem,
        pass,
    };
    if let Some(hit) = cache.get(&key) {
        return Ok(TuneReport {
            key,
            winner: *hit,
            cached: true,
            candidates: Vec::new(),
        });
    }

    let budget = cfg.budget.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = random_tensor(problem.x_dims(), &mut rng);
    let wgt = random_tensor(problem.w_dims(), &mut rng);
    let gy = random_tensor(problem.y_dims(), &mut rng);
    let reference = direct_pass(pass, problem, &x, &wgt, &gy)?;

    let mut engine = ConvEngine::new();
    let mut candidates = Vec::new();
    for plan in CandidateSet::for_problem(problem).plans() {
        let probe = match engine.run_pass(pass, &plan, &x, &wgt, &gy) {
            Ok(out) => out,
            Err(_) => continue,
        };
        if max_rel_error(&probe, &reference) > 2.0 * plan.tolerance() {
            continue;
        }
        let mut samples = Vec::with_capacity(budget);
        for _ in 0..budget {
            let t0 = Instant::now();
            engine.run_pass(pass, &plan, &x, &wgt, &gy)?;
            samples.push(t0.elapsed().as_secs_f64() * 1e6);
        }
        candidates.push(CandidateTiming {
            plan,
            micros: median(&mut samples),
        });
    }

    let best = candidates
        .iter()
        .min_by(|a, b| a.micros.total_cmp(&b.micros))
        .ok_or(Error::NoViablePlan)?;
    let winner = CachedPlan {
        plan: best.plan,
        micros: best.micros,
    };
    cache.insert(key, winner);
    Ok(TuneReport {
        key,
        winner,
        cached: false,
        candidates,
    })
}

pub(crate) fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}
