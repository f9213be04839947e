//! Deterministic replicate engine: empirical sizes, power curves, kernel
//! comparisons, and normality diagnostics for the studentized two-sample
//! statistic.
//!
//! An experiment is described by an [`ExperimentConfig`]: two generative
//! models, a grid of `(n, m, p)` sample settings, one or more kernel/bandwidth
//! combinations, a list of test levels, and a replicate count. For every grid
//! point the engine draws `replicates` independent sample pairs, runs the
//! studentized test once per kernel against shared Gram blocks, and aggregates
//! the outcomes into per-(grid, kernel) summaries: rejection rates with 99%
//! Wilson intervals, z-score moments and quantiles, the Kolmogorov–Smirnov
//! distance of the z-scores to `N(0, 1)`, and — in power-curve mode — the
//! rejection probability predicted by the mean/variance expansions.
//!
//! # Determinism and concurrency
//!
//! Replicates are the unit of parallelism: each one derives its own generator
//! from `(seed, grid index, replicate index, sample role)` and runs its
//! statistics single-threaded, so the work is embarrassingly parallel.
//! Outcomes land in a pre-sized table indexed by replicate and every
//! aggregate walks that table in index order, which makes the full output —
//! records and summaries — bit-identical for any worker-thread count.
//!
//! # Failed replicates
//!
//! A replicate can fail at runtime (for example [`Error::DegenerateVariance`]
//! when duplicate observations zero the variance estimate while the statistic
//! is positive). Such replicates are kept in the record table with their
//! error message and excluded from every rate denominator and diagnostic;
//! silently dropping them would bias size estimates, and aborting would waste
//! the rest of the run. Configuration mistakes, by contrast, abort before any
//! sampling starts.

use serde::{Deserialize, Serialize};

use crate::datagen::{ModelSpec, Sampler};
use crate::error::{Error, Result};
use crate::kernels::{resolve_bandwidth, BandwidthPolicy, KernelFamily, KernelSpec};
use crate::mmd::TestContext;
use crate::normal::{normal_cdf, normal_quantile};
use crate::rng::{derive_rng, derive_seed};
use crate::sample::SampleMatrix;
use crate::theory::{
    delta0, population_mmd_monte_carlo, power_higher_order, power_local, t1_frobenius,
    ts_monte_carlo, var_delta1_components, TheoryInput,
};
use crate::threads::{effective_threads, for_each_chunk_mut};

/// Default base seed for experiment configs (and the command-line front end).
/// Fixed rather than drawn from the clock so that published numbers reproduce
/// by default; randomness is opt-in at the call site.
pub const DEFAULT_SEED: u64 = 1729;

/// What an experiment is for. The empirical machinery is identical in every
/// mode; the mode decides which extras are computed and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Size under the null: rejection rates should sit near the levels and
    /// the z-scores near `N(0, 1)`.
    NullCalibration,
    /// Power against a fixed alternative across the sample grid, with the
    /// expansion-based prediction computed per grid point.
    PowerCurve,
    /// Same empirical sweep for several kernel/bandwidth choices, for
    /// side-by-side power comparison.
    KernelImpact,
}

/// One kernel/bandwidth combination to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    /// Resolved per replicate against the drawn data (only the median
    /// heuristic actually looks at it).
    #[serde(default = "default_bandwidth")]
    pub bandwidth: BandwidthPolicy,
}

fn default_bandwidth() -> BandwidthPolicy {
    BandwidthPolicy::ScaledDimension(2.0)
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: KernelFamily::Gaussian,
            bandwidth: default_bandwidth(),
        }
    }
}

/// One sample-size setting. `n` and `m` are the two sample sizes, `p` the
/// dimension; balance (`n = m`) is common but not required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

/// Full description of a simulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    /// Generative model for the first sample.
    pub model_x: ModelSpec,
    /// Generative model for the second sample.
    pub model_y: ModelSpec,
    /// Kernel/bandwidth combinations, all evaluated on every replicate
    /// against the same drawn data (the Gram blocks are shared, so extra
    /// kernels are cheap).
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelConfig>,
    pub sample_grid: Vec<GridPoint>,
    /// Test levels; each replicate records one rejection flag per level.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Include the mean-difference and norm-fluctuation variance components
    /// in the theoretical power denominator instead of the leading trace
    /// term alone. Off by default: near the null the extra terms are lower
    /// order, and the leading term is what the plug-in estimator targets.
    #[serde(default)]
    pub extra_variance_terms: bool,
    /// Monte Carlo draws behind theory predictions that need simulation
    /// (population-statistic estimates and second-order mean terms outside
    /// their closed-form hypotheses).
    #[serde(default = "default_theory_reps")]
    pub theory_reps: usize,
}

fn default_kernels() -> Vec<KernelConfig> {
    vec![KernelConfig::default()]
}

fn default_alphas() -> Vec<f64> {
    vec![0.05]
}

fn default_replicates() -> usize {
    1000
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_theory_reps() -> usize {
    100_000
}

impl ExperimentConfig {
    /// Check every field against its invariants.
    ///
    /// # Errors
    ///
    /// [`Error::Config`] naming the offending field; model errors are
    /// whatever the model validation produces.
    pub fn validate(&self) -> Result<()> {
        if self.sample_grid.is_empty() {
            return Err(Error::Config {
                message: "field sample_grid: must not be empty".into(),
            });
        }
        if self.kernels.is_empty() {
            return Err(Error::Config {
                message: "field kernels: must not be empty".into(),
            });
        }
        if self.alphas.is_empty() {
            return Err(Error::Config {
                message: "field alphas: must not be empty".into(),
            });
        }
        for &a in &self.alphas {
            if !a.is_finite() || a <= 0.0 || a >= 1.0 {
                return Err(Error::Config {
                    message: format!("field alphas: levels must lie strictly in (0, 1), got {a}"),
                });
            }
        }
        if self.replicates < 100 {
            return Err(Error::Config {
                message: format!(
                    "field replicates: need at least 100 for stable rates, got {}",
                    self.replicates
                ),
            });
        }
        if self.theory_reps < 10_000 {
            return Err(Error::Config {
                message: format!(
                    "field theory_reps: need at least 10000 draws, got {}",
                    self.theory_reps
                ),
            });
        }
        for (i, gp) in self.sample_grid.iter().enumerate() {
            if gp.n < 4 || gp.m < 4 {
                return Err(Error::Config {
                    message: format!(
                        "field sample_grid[{i}]: the studentized test needs n, m >= 4, \
                         got ({}, {})",
                        gp.n, gp.m
                    ),
                });
            }
            let p = self.model_x.effective_p(Some(gp.p))?;
            self.model_x.validate_at(p)?;
            let p = self.model_y.effective_p(Some(gp.p))?;
            self.model_y.validate_at(p)?;
        }
        Ok(())
    }
}

/// Outcome of one (replicate, kernel) evaluation, flat for CSV export.
/// Failed replicates keep their row with `error` set and `NaN` statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub grid_index: usize,
    pub kernel_index: usize,
    pub replicate: usize,
    /// Resolved bandwidth `γ`; `None` if resolution itself failed.
    pub bandwidth: Option<f64>,
    pub mmd_stat: f64,
    pub var_hat: f64,
    pub z_score: f64,
    /// One flag per configured level, in config order.
    pub reject: Vec<bool>,
    pub error: Option<String>,
}

/// Rejection count at one level, with a 99% Wilson score interval (which
/// always contains the observed rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RejectionSummary {
    pub alpha: f64,
    pub rejections: usize,
    pub rate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// One point of the z-score QQ summary: the empirical quantile of the
/// replicate z-scores against the standard-normal quantile at `prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantilePair {
    pub prob: f64,
    pub theoretical: f64,
    pub empirical: f64,
}

/// Predicted rejection probability at one level. `lower`/`upper` bracket the
/// prediction by re-evaluating it at the signal estimate ± 3 standard errors;
/// they collapse onto `power` when the signal is closed-form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerPrediction {
    pub alpha: f64,
    pub power: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Expansion-based power prediction for one (grid point, kernel).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheorySummary {
    /// Which expansion carries the signal: `"local"` when the first two
    /// moments differ (signal `Δ₀ + T₁`), `"higher_order"` when they match
    /// but the models differ (signal = population statistic, estimated by
    /// Monte Carlo), `"null"` for identical models (signal exactly zero, so
    /// predicted power equals the level).
    pub regime: String,
    /// The mean shift entering the power formula, in statistic units.
    pub signal: f64,
    /// Monte Carlo standard error of `signal`; zero for closed forms.
    pub signal_se: f64,
    /// Variance of the statistic's linear term used as the denominator.
    pub var_linear: f64,
    pub predictions: Vec<PowerPrediction>,
}

/// Aggregates for one (grid point, kernel) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub grid_index: usize,
    pub kernel_index: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub kernel: KernelConfig,
    /// Mean resolved bandwidth over completed replicates (constant unless
    /// the policy is data-dependent).
    pub bandwidth_mean: Option<f64>,
    /// Replicates that produced a test outcome.
    pub completed: usize,
    /// Replicates excluded for a runtime error (their rows carry the error).
    pub failed: usize,
    /// Completed replicates whose z-score is non-finite (duplicate-data
    /// degeneracies); they count toward rates but not z diagnostics.
    pub nonfinite_z: usize,
    /// One entry per configured level; empty when nothing completed.
    pub rejection: Vec<RejectionSummary>,
    pub z_mean: Option<f64>,
    pub z_var: Option<f64>,
    /// Sup-distance of the z-score ECDF from `N(0, 1)`; needs ≥ 100 finite
    /// z-scores.
    pub ks_distance: Option<f64>,
    /// Percentile grid (1%–99%) for QQ plotting.
    pub z_quantiles: Vec<QuantilePair>,
    /// Present in power-curve mode.
    pub theory: Option<TheorySummary>,
}

/// Experiment-level echo plus all per-cell summaries, grid-major
/// (`grid_index` outer, `kernel_index` inner).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub mode: ExperimentMode,
    pub alphas: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub grid: Vec<GridSummary>,
}

/// Everything an experiment produces: the summary table and the full
/// replicate-level record table (grid-major, then replicate, then kernel).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub records: Vec<ReplicateRecord>,
}

/// Per-(replicate, kernel) working result before indices are attached.
#[derive(Debug, Clone)]
struct KernelOut {
    bandwidth: Option<f64>,
    mmd: f64,
    var: f64,
    z: f64,
    reject: Vec<bool>,
    error: Option<String>,
}

impl KernelOut {
    fn failed(bandwidth: Option<f64>, message: String, levels: usize) -> Self {
        KernelOut {
            bandwidth,
            mmd: f64::NAN,
            var: f64::NAN,
            z: f64::NAN,
            reject: vec![false; levels],
            error: Some(message),
        }
    }
}

/// Run the experiment with the default worker count
/// (see [`crate::threads::effective_threads`]).
///
/// # Errors
///
/// [`Error::Config`] (or a model validation error) for a bad configuration;
/// theory-prediction errors in power-curve mode. Per-replicate runtime
/// failures do not abort — they come back flagged in the records.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_threaded(config, effective_threads())
}

/// [`run_experiment`] with an explicit worker-thread count. Output is
/// bit-identical for every `threads ≥ 1`.
pub fn run_experiment_threaded(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let threads = threads.max(1);
    let thresholds = config
        .alphas
        .iter()
        .map(|&a| normal_quantile(1.0 - a))
        .collect::<Result<Vec<f64>>>()?;
    let cells = config.sample_grid.len() * config.kernels.len();
    let mut summaries = Vec::with_capacity(cells);
    let mut records = Vec::with_capacity(cells * config.replicates);
    for (gi, gp) in config.sample_grid.iter().enumerate() {
        let sampler_x = Sampler::new(&config.model_x, gp.p)?;
        let sampler_y = Sampler::new(&config.model_y, gp.p)?;
        let mut outcomes: Vec<Vec<KernelOut>> =
            (0..config.replicates).map(|_| Vec::new()).collect();
        for_each_chunk_mut(&mut outcomes, 1, threads, |rep, slot| {
            slot[0] = run_replicate(config, &sampler_x, &sampler_y, &thresholds, gi, gp, rep);
        });
        for ki in 0..config.kernels.len() {
            summaries.push(summarize_cell(config, gi, ki, gp, &outcomes)?);
        }
        for (rep, outs) in outcomes.into_iter().enumerate() {
            for (ki, o) in outs.into_iter().enumerate() {
                records.push(ReplicateRecord {
                    grid_index: gi,
                    kernel_index: ki,
                    replicate: rep,
                    bandwidth: o.bandwidth,
                    mmd_stat: o.mmd,
                    var_hat: o.var,
                    z_score: o.z,
                    reject: o.reject,
                    error: o.error,
                });
            }
        }
    }
    Ok(ExperimentOutput {
        summary: ExperimentSummary {
            mode: config.mode,
            alphas: config.alphas.clone(),
            replicates: config.replicates,
            seed: config.seed,
            grid: summaries,
        },
        records,
    })
}

fn run_replicate(
    config: &ExperimentConfig,
    sampler_x: &Sampler,
    sampler_y: &Sampler,
    thresholds: &[f64],
    gi: usize,
    gp: &GridPoint,
    rep: usize,
) -> Vec<KernelOut> {
    let levels = thresholds.len();
    let draw = |sampler: &Sampler, n: usize, role: u64| {
        let mut rng = derive_rng(config.seed, &[gi as u64, rep as u64, role]);
        let mut buf = vec![0.0; n * gp.p];
        sampler.fill_rows(&mut rng, &mut buf);
        SampleMatrix::new(n, gp.p, buf)
    };
    let all_failed = |e: &Error| {
        (0..config.kernels.len())
            .map(|_| KernelOut::failed(None, e.to_string(), levels))
            .collect::<Vec<_>>()
    };
    let x = match draw(sampler_x, gp.n, 0) {
        Ok(s) => s,
        Err(e) => return all_failed(&e),
    };
    let y = match draw(sampler_y, gp.m, 1) {
        Ok(s) => s,
        Err(e) => return all_failed(&e),
    };
    // Per-replicate statistics are single-threaded by design: parallelism
    // lives at the replicate level, which keeps determinism trivial.
    let ctx = match TestContext::new(&x, &y, 1) {
        Ok(c) => c,
        Err(e) => return all_failed(&e),
    };
    config
        .kernels
        .iter()
        .map(|kc| {
            let gamma = match resolve_bandwidth(&kc.bandwidth, &[&x, &y]) {
                Ok(g) => g,
                Err(e) => return KernelOut::failed(None, e.to_string(), levels),
            };
            let spec = match KernelSpec::new(kc.family, gamma) {
                Ok(s) => s,
                Err(e) => return KernelOut::failed(Some(gamma), e.to_string(), levels),
            };
            match ctx.test(&spec, config.alphas[0]) {
                Ok(r) => KernelOut {
                    bandwidth: Some(gamma),
                    mmd: r.mmd_stat,
                    var: r.var_hat,
                    z: r.z_score,
                    reject: thresholds.iter().map(|&q| r.z_score > q).collect(),
                    error: None,
                },
                Err(e) => KernelOut::failed(Some(gamma), e.to_string(), levels),
            }
        })
        .collect()
}

fn summarize_cell(
    config: &ExperimentConfig,
    gi: usize,
    ki: usize,
    gp: &GridPoint,
    outcomes: &[Vec<KernelOut>],
) -> Result<GridSummary> {
    let levels = config.alphas.len();
    let mut completed = 0usize;
    let mut failed = 0usize;
    let mut nonfinite_z = 0usize;
    let mut rejections = vec![0usize; levels];
    let mut finite_z = Vec::with_capacity(outcomes.len());
    let mut bw_sum = 0.0;
    let mut bw_count = 0usize;
    for outs in outcomes {
        let o = &outs[ki];
        if o.error.is_some() {
            failed += 1;
            continue;
        }
        completed += 1;
        if let Some(b) = o.bandwidth {
            bw_sum += b;
            bw_count += 1;
        }
        if o.z.is_finite() {
            finite_z.push(o.z);
        } else {
            nonfinite_z += 1;
        }
        for (count, &flag) in rejections.iter_mut().zip(&o.reject) {
            *count += usize::from(flag);
        }
    }
    let z99 = normal_quantile(0.995)?;
    let rejection = if completed > 0 {
        config
            .alphas
            .iter()
            .zip(&rejections)
            .map(|(&alpha, &k)| {
                let (ci_lower, ci_upper) = wilson_interval(k, completed, z99);
                RejectionSummary {
                    alpha,
                    rejections: k,
                    rate: k as f64 / completed as f64,
                    ci_lower,
                    ci_upper,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    finite_z.sort_by(f64::total_cmp);
    let k = finite_z.len();
    let z_mean = (k >= 1).then(|| finite_z.iter().sum::<f64>() / k as f64);
    let z_var = (k >= 2).then(|| {
        let mean = z_mean.unwrap_or(0.0);
        finite_z.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (k - 1) as f64
    });
    let ks = if k >= 100 {
        Some(ks_distance(&finite_z)?)
    } else {
        None
    };
    let z_quantiles = if k >= 1 {
        (1..=99)
            .map(|c| {
                let prob = c as f64 / 100.0;
                Ok(QuantilePair {
                    prob,
                    theoretical: normal_quantile(prob)?,
                    empirical: empirical_quantile(&finite_z, prob),
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let bandwidth_mean = (bw_count > 0).then(|| bw_sum / bw_count as f64);
    let theory = if config.mode == ExperimentMode::PowerCurve {
        Some(theory_summary(config, gi, ki, gp, bandwidth_mean)?)
    } else {
        None
    };
    Ok(GridSummary {
        grid_index: gi,
        kernel_index: ki,
        n: gp.n,
        m: gp.m,
        p: gp.p,
        kernel: config.kernels[ki],
        bandwidth_mean,
        completed,
        failed,
        nonfinite_z,
        rejection,
        z_mean,
        z_var,
        ks_distance: ks,
        z_quantiles,
        theory,
    })
}

/// Expansion-based prediction for one cell. The regime is chosen from the
/// population moments: when the first two moments differ the signal is the
/// closed-form `Δ₀ + T₁` (falling back to the Monte Carlo second-order term
/// when the Frobenius form's hypotheses fail); when they match but the
/// models differ, the signal is the population statistic estimated by Monte
/// Carlo; identical models short-circuit to power = level.
fn theory_summary(
    config: &ExperimentConfig,
    gi: usize,
    ki: usize,
    gp: &GridPoint,
    bandwidth_mean: Option<f64>,
) -> Result<TheorySummary> {
    let kc = &config.kernels[ki];
    let gamma = match kc.bandwidth {
        BandwidthPolicy::Fixed(g) => g,
        BandwidthPolicy::ScaledDimension(c) => c * gp.p as f64,
        // Data-dependent policy: plug in the mean resolved value.
        BandwidthPolicy::MedianHeuristic => bandwidth_mean.ok_or_else(|| Error::Config {
            message: "median-heuristic theory prediction needs at least one completed replicate"
                .into(),
        })?,
    };
    let kernel = KernelSpec::new(kc.family, gamma)?;
    // The Monte Carlo helpers resolve the dimension from the specs alone, so
    // pin the grid dimension onto them; `validate()` already checked that an
    // explicit model `p` agrees with the grid.
    let mut gen1 = config.model_x.clone();
    let mut gen2 = config.model_y.clone();
    gen1.p = Some(gp.p);
    gen2.p = Some(gp.p);
    let ti = TheoryInput::from_model_specs(&gen1, &gen2, gp.p)?;
    let (v11, v12, v13) = var_delta1_components(&ti, &kernel, gp.n, gp.m)?;
    let var_linear = if config.extra_variance_terms {
        v11 + v12 + v13
    } else {
        v11
    };
    let s = ti.summary();
    let tr_scale = s.tr_sigma1 + s.tr_sigma2;
    let sq_scale = s.tr_sigma1_sq + s.tr_sigma2_sq;
    let first_two_match = s.mean_diff_sq <= 1e-8 * tr_scale
        && (s.tr_sigma1 - s.tr_sigma2).abs() <= 1e-8 * tr_scale
        && ti.summary().frob_diff() <= 1e-8 * sq_scale;
    let (regime, base, signal, signal_se) = if !first_two_match {
        let d0 = delta0(&ti, &kernel)?;
        let (t1, t1_se) = match t1_frobenius(&ti, &kernel) {
            Ok(v) => (v, 0.0),
            Err(Error::HypothesisViolated { .. }) => ts_monte_carlo(
                2,
                &gen1,
                &gen2,
                &kernel,
                config.theory_reps,
                derive_seed(config.seed, &[gi as u64, ki as u64, 9001]),
            )?,
            Err(e) => return Err(e),
        };
        ("local", d0, d0 + t1, t1_se)
    } else if gen1 == gen2 {
        ("null", 0.0, 0.0, 0.0)
    } else {
        let (mmd_pop, se) = population_mmd_monte_carlo(
            &gen1,
            &gen2,
            &kernel,
            config.theory_reps,
            derive_seed(config.seed, &[gi as u64, ki as u64, 9002]),
        )?;
        ("higher_order", 0.0, mmd_pop, se)
    };
    let predictions = config
        .alphas
        .iter()
        .map(|&alpha| {
            let at = |sig: f64| match regime {
                "higher_order" => power_higher_order(sig, var_linear, alpha),
                // `base` is Δ₀, carried separately only for readability.
                _ => power_local(base, sig - base, var_linear, alpha),
            };
            let power = at(signal)?;
            let (lower, upper) = if signal_se > 0.0 {
                // Power is monotone in the signal, so the band endpoints are
                // the power at the signal estimate ∓ 3 standard errors.
                (at(signal - 3.0 * signal_se)?, at(signal + 3.0 * signal_se)?)
            } else {
                (power, power)
            };
            Ok(PowerPrediction {
                alpha,
                power,
                lower,
                upper,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheorySummary {
        regime: regime.to_string(),
        signal,
        signal_se,
        var_linear,
        predictions,
    })
}

/// Theory prediction for one cell of [`predict_power`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedCell {
    pub grid_index: usize,
    pub kernel_index: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub kernel: KernelConfig,
    /// Bandwidth the prediction was evaluated at.
    pub bandwidth: f64,
    pub theory: TheorySummary,
}

/// Evaluate the expansion-based power predictions for every
/// (grid point, kernel) cell of `config` without drawing any data. The
/// numbers are identical to what [`run_experiment`] reports in power-curve
/// mode (`config.mode` itself is ignored here); Monte Carlo signal estimates
/// use the same derived seeds.
///
/// # Errors
///
/// Configuration errors as in [`run_experiment`]; additionally
/// [`Error::Config`] for a median-heuristic bandwidth, which cannot be
/// resolved without data.
pub fn predict_power(config: &ExperimentConfig) -> Result<Vec<PredictedCell>> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.sample_grid.len() * config.kernels.len());
    for (gi, gp) in config.sample_grid.iter().enumerate() {
        for (ki, kc) in config.kernels.iter().enumerate() {
            let bandwidth = match kc.bandwidth {
                BandwidthPolicy::Fixed(g) => g,
                BandwidthPolicy::ScaledDimension(c) => c * gp.p as f64,
                BandwidthPolicy::MedianHeuristic => {
                    return Err(Error::Config {
                        message: format!(
                            "field kernels[{ki}].bandwidth: the median heuristic is \
                             data-dependent; run a simulation instead"
                        ),
                    });
                }
            };
            cells.push(PredictedCell {
                grid_index: gi,
                kernel_index: ki,
                n: gp.n,
                m: gp.m,
                p: gp.p,
                kernel: *kc,
                bandwidth,
                theory: theory_summary(config, gi, ki, gp, None)?,
            });
        }
    }
    Ok(cells)
}

/// 99% Wilson score interval for `k` successes in `n` trials; always
/// contains `k/n` and stays inside `[0, 1]`.
fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let rate = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (rate + z2 / (2.0 * nf)) / denom;
    let half = z * (rate * (1.0 - rate) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Empirical quantile at `prob` from an ascending-sorted sample, inverting
/// the `(i + ½)/k` plotting convention.
fn empirical_quantile(sorted: &[f64], prob: f64) -> f64 {
    let k = sorted.len();
    let idx = (prob * k as f64 - 0.5).round().max(0.0) as usize;
    sorted[idx.min(k - 1)]
}

/// Sup-norm distance between the empirical CDF of `z_scores` and the
/// standard normal CDF: `sup_x |F̂(x) − Φ(x)|`, evaluated at the jump points
/// from both sides. Infinite values are allowed (they contribute their CDF
/// limits); the sample may be in any order.
///
/// # Errors
///
/// [`Error::TooFewValues`] below 100 values — the distance is meaningless
/// on tiny samples; [`Error::NonFinite`] if any value is NaN.
pub fn ks_distance(z_scores: &[f64]) -> Result<f64> {
    if z_scores.len() < 100 {
        return Err(Error::TooFewValues {
            needed: 100,
            got: z_scores.len(),
        });
    }
    if z_scores.iter().any(|z| z.is_nan()) {
        return Err(Error::NonFinite { what: "z-scores" });
    }
    let mut sorted = z_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &z) in sorted.iter().enumerate() {
        let phi = normal_cdf(z);
        let below = i as f64 / n;
        let above = (i + 1) as f64 / n;
        sup = sup.max((phi - below).abs()).max((above - phi).abs());
    }
    Ok(sup)
}
