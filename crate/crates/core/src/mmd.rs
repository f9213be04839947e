//! The unbiased MMD statistic, its studentizer, and the one-sided test.
//!
//! For samples `X₁..X_n ~ P` and `Y₁..Y_m ~ Q` and a kernel `k`, the
//! statistic is the two-sample U-statistic
//!
//! ```text
//! MMD² = Σ_{i≠j} k(Xᵢ,Xⱼ)/(n(n−1)) + Σ_{i≠j} k(Yᵢ,Yⱼ)/(m(m−1))
//!        − 2 Σ_{i,j} k(Xᵢ,Yⱼ)/(nm)
//! ```
//!
//! with within-sample diagonals excluded, so its expectation is exactly the
//! squared population MMD (zero under `P = Q`). The studentizer plugs
//! moment estimators into the leading variance term of the statistic's
//! high-dimensional expansion:
//!
//! ```text
//! var̂ = (8/γ²)[ f′(û₁)² tr̂Σ₁²/(n(n−1)) + f′(û₂)² tr̂Σ₂²/(m(m−1))
//!               + 2 f′(û₃)² tr̂Σ₁Σ₂/(nm) ]
//! ```
//!
//! where `ûᵢ` are plug-in estimates of the mean squared distances divided by
//! the bandwidth and the trace estimators are the leave-out forms of
//! Chen & Qin (2010). The test rejects `P = Q` at level `α` when
//! `MMD²/√var̂ > z_{1−α}`; under bandwidths growing like the dimension this
//! one-sided normal calibration is accurate without permutation resampling.
//!
//! # Determinism
//!
//! Kernel sums accumulate per fixed-size row block, and the block partials
//! are reduced in index order, so every quantity here is bit-identical
//! across thread counts. The cross-sample sum pairs the `(i,j)` and `(j,i)`
//! entries commutatively, which makes `mmd_unbiased(X, Y)` equal
//! `mmd_unbiased(Y, X)` exactly, not merely to rounding.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{profile_value, KernelSpec};
use crate::linalg::Matrix;
use crate::normal::{normal_quantile, normal_sf};
use crate::pairwise::{dot, gram_rect, gram_sym, row_sq_norms};
use crate::sample::SampleMatrix;
use crate::threads::{effective_threads, for_each_chunk_mut};

/// Plug-in estimates of the three mean squared-distance parameters
/// `τ₁ = E‖X−X′‖²/p`, `τ₂ = E‖Y−Y′‖²/p`, `τ₃ = E‖X−Y‖²/p`
/// (each `2·tr Σ/p`-scale under the null).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauHats {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

/// Leave-out estimates of `tr(Σ₁²)`, `tr(Σ₂²)`, and `tr(Σ₁Σ₂)`.
///
/// The estimators are unbiased and can be slightly negative in small
/// samples; values are reported as computed, and the variance estimator
/// floors them at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceHats {
    pub tr_s1_sq: f64,
    pub tr_s2_sq: f64,
    pub tr_s1_s2: f64,
}

/// Outcome of the studentized two-sample test.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    /// Unbiased squared-MMD statistic (can be negative).
    pub mmd_stat: f64,
    /// Plug-in variance estimate (≥ 0).
    pub var_hat: f64,
    /// `mmd_stat / √var_hat`; `-inf` in the degenerate zero-variance case
    /// with a non-positive statistic.
    pub z_score: f64,
    /// One-sided upper-tail p-value `1 − Φ(z)`.
    pub p_value: f64,
    /// `z_score > z_{1−α}`.
    pub reject: bool,
    /// Test level.
    pub alpha: f64,
    pub tau_hats: TauHats,
    pub trace_hats: TraceHats,
}

/// Shared per-pair-of-samples state: Gram blocks, norms, and the marginal
/// sums every downstream quantity reads. Building it costs the `O(n²p)`
/// inner products once; each kernel evaluated afterwards reuses them, which
/// is what makes multi-kernel experiment sweeps affordable.
pub(crate) struct TestContext<'a> {
    x: &'a SampleMatrix,
    y: &'a SampleMatrix,
    threads: usize,
    gxx: Matrix,
    gyy: Matrix,
    gxy: Matrix,
    sqx: Vec<f64>,
    sqy: Vec<f64>,
    /// Row sums of `gxx` / `gyy` including the diagonal.
    rsx: Vec<f64>,
    rsy: Vec<f64>,
    /// `u_j = Σ_k gxy[j,k]` and `v_k = Σ_j gxy[j,k]`.
    cross_row: Vec<f64>,
    cross_col: Vec<f64>,
}

impl<'a> TestContext<'a> {
    pub(crate) fn new(
        x: &'a SampleMatrix,
        y: &'a SampleMatrix,
        threads: usize,
    ) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                what: "sample dimension",
                expected: x.dim(),
                got: y.dim(),
            });
        }
        require_samples(x, y, 2)?;
        let gxx = gram_sym(x, threads);
        let gyy = gram_sym(y, threads);
        let gxy = gram_rect(x, y, threads);
        let sqx = row_sq_norms(x);
        let sqy = row_sq_norms(y);
        let rsx = row_sums(&gxx);
        let rsy = row_sums(&gyy);
        let cross_row = row_sums(&gxy);
        let cross_col = col_sums(&gxy);
        Ok(TestContext {
            x,
            y,
            threads,
            gxx,
            gyy,
            gxy,
            sqx,
            sqy,
            rsx,
            rsy,
            cross_row,
            cross_col,
        })
    }

    fn n(&self) -> usize {
        self.x.n()
    }

    fn m(&self) -> usize {
        self.y.n()
    }

    fn p(&self) -> usize {
        self.x.dim()
    }

    /// The unbiased squared-MMD statistic for one kernel.
    pub(crate) fn mmd(&self, kernel: &KernelSpec) -> f64 {
        let (n, m) = (self.n() as f64, self.m() as f64);
        let sxx = within_kernel_sum(kernel, &self.gxx, &self.sqx, self.threads);
        let syy = within_kernel_sum(kernel, &self.gyy, &self.sqy, self.threads);
        let sxy = cross_kernel_sum(kernel, &self.gxy, &self.sqx, &self.sqy, self.threads);
        2.0 * sxx / (n * (n - 1.0)) + 2.0 * syy / (m * (m - 1.0)) - 2.0 * sxy / (n * m)
    }

    /// Plug-in `τ̂` estimates (bandwidth-free, scaled by `p`).
    pub(crate) fn tau_hats(&self) -> TauHats {
        let p = self.p() as f64;
        let parts = self.tau_parts();
        TauHats {
            tau1: 2.0 * parts.a_x / p,
            tau2: 2.0 * parts.a_y / p,
            tau3: (parts.a_x + parts.a_y + parts.b_x + parts.b_y - 2.0 * parts.c_xy) / p,
        }
    }

    fn tau_parts(&self) -> TauParts {
        let (n, m) = (self.n() as f64, self.m() as f64);
        // Within a sample, with S₁ = Σ‖Xᵢ‖² and G = ‖ΣᵢXᵢ‖²:
        //   (1/n) Σᵢ Xᵢᵀ(Xᵢ − X̄₋ᵢ) = S₁/n − (G − S₁)/(n(n−1)),
        // because Σᵢ Xᵢᵀ X̄₋ᵢ = (G − S₁)/(n−1).
        let s1x: f64 = self.sqx.iter().sum();
        let s1y: f64 = self.sqy.iter().sum();
        let gx: f64 = self.rsx.iter().sum();
        let gy: f64 = self.rsy.iter().sum();
        let cx: f64 = self.cross_row.iter().sum();
        TauParts {
            a_x: s1x / n - (gx - s1x) / (n * (n - 1.0)),
            a_y: s1y / m - (gy - s1y) / (m * (m - 1.0)),
            b_x: (gx - s1x) / (n * (n - 1.0)),
            b_y: (gy - s1y) / (m * (m - 1.0)),
            c_xy: cx / (n * m),
        }
    }

    /// Leave-out trace estimates; needs `n, m ≥ 4`.
    pub(crate) fn trace_hats(&self) -> Result<TraceHats> {
        require_samples(self.x, self.y, 4)?;
        let (n, m) = (self.n(), self.m());
        Ok(TraceHats {
            tr_s1_sq: within_trace(&self.gxx, &self.rsx, n),
            tr_s2_sq: within_trace(&self.gyy, &self.rsy, m),
            tr_s1_s2: cross_trace(&self.gxy, &self.cross_row, &self.cross_col, n, m),
        })
    }

    /// Plug-in variance estimate for one kernel. Errors with
    /// [`Error::DegenerateVariance`] when the estimate collapses to zero,
    /// and propagates derivative-domain errors when a `τ̂` is non-positive
    /// for a kernel whose derivative is singular at zero.
    pub(crate) fn variance(&self, kernel: &KernelSpec) -> Result<f64> {
        let traces = self.trace_hats()?;
        self.variance_from(kernel, &traces)
    }

    pub(crate) fn variance_from(
        &self,
        kernel: &KernelSpec,
        traces: &TraceHats,
    ) -> Result<f64> {
        let (n, m) = (self.n() as f64, self.m() as f64);
        let gamma = kernel.bandwidth;
        let taus = self.tau_hats();
        let p = self.p() as f64;
        // Arguments on the kernel's own scale: û = p·τ̂/γ estimates
        // E‖X−X′‖²/γ, the point where the profile derivative is taken.
        let u1 = p * taus.tau1 / gamma;
        let u2 = p * taus.tau2 / gamma;
        let u3 = p * taus.tau3 / gamma;
        let f1 = crate::kernels::f_deriv(&kernel.family, 1, u1)?;
        let f2 = crate::kernels::f_deriv(&kernel.family, 1, u2)?;
        let f3 = crate::kernels::f_deriv(&kernel.family, 1, u3)?;
        let var = (8.0 / (gamma * gamma))
            * (f1 * f1 * traces.tr_s1_sq.max(0.0) / (n * (n - 1.0))
                + f2 * f2 * traces.tr_s2_sq.max(0.0) / (m * (m - 1.0))
                + 2.0 * f3 * f3 * traces.tr_s1_s2.max(0.0) / (n * m));
        if var <= 0.0 {
            return Err(Error::DegenerateVariance);
        }
        Ok(var)
    }

    /// Full studentized test at level `alpha`.
    pub(crate) fn test(&self, kernel: &KernelSpec, alpha: f64) -> Result<TestResult> {
        validate_alpha(alpha)?;
        let mmd = self.mmd(kernel);
        let taus = self.tau_hats();
        let traces = self.trace_hats()?;
        let (var_hat, z_score) = finalize_z(mmd, self.variance_from(kernel, &traces))?;
        let p_value = normal_sf(z_score);
        let z_crit = normal_quantile(1.0 - alpha)?;
        Ok(TestResult {
            mmd_stat: mmd,
            var_hat,
            z_score,
            p_value,
            reject: z_score > z_crit,
            alpha,
            tau_hats: taus,
            trace_hats: traces,
        })
    }
}

struct TauParts {
    a_x: f64,
    a_y: f64,
    b_x: f64,
    b_y: f64,
    c_xy: f64,
}

/// Map a variance result to `(var_hat, z)`: a zero variance pairs with a
/// non-positive statistic as "nothing to reject" (z = −∞, p = 1), and with a
/// positive statistic as an explicit error, since no meaningful z exists.
pub(crate) fn finalize_z(mmd: f64, var: Result<f64>) -> Result<(f64, f64)> {
    match var {
        Ok(v) => Ok((v, mmd / v.sqrt())),
        Err(Error::DegenerateVariance) if mmd <= 0.0 => Ok((0.0, f64::NEG_INFINITY)),
        Err(e) => Err(e),
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("level must lie strictly in (0, 1), got {alpha}"),
        });
    }
    Ok(())
}

fn require_samples(x: &SampleMatrix, y: &SampleMatrix, needed: usize) -> Result<()> {
    for s in [x, y] {
        if s.n() < needed {
            return Err(Error::TooFewSamples {
                what: if needed >= 4 {
                    "trace estimation"
                } else {
                    "mmd statistic"
                },
                needed,
                got: s.n(),
            });
        }
    }
    Ok(())
}

fn row_sums(g: &Matrix) -> Vec<f64> {
    (0..g.rows()).map(|i| g.row(i).iter().sum()).collect()
}

fn col_sums(g: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; g.cols()];
    for i in 0..g.rows() {
        for (o, v) in out.iter_mut().zip(g.row(i)) {
            *o += v;
        }
    }
    out
}

/// Number of rows per accumulation block in the kernel sums. Partial sums
/// are stored per block and reduced in block order, making totals
/// independent of the worker count.
const SUM_BLOCK: usize = 32;

/// `Σ_{i<j} f(‖a_i − a_j‖²/γ)` over the strict upper triangle.
fn within_kernel_sum(kernel: &KernelSpec, g: &Matrix, sq: &[f64], threads: usize) -> f64 {
    let n = g.rows();
    let inv_gamma = 1.0 / kernel.bandwidth;
    let family = kernel.family;
    let blocks = n.div_ceil(SUM_BLOCK);
    let mut partials = vec![0.0f64; blocks];
    for_each_chunk_mut(&mut partials, 1, threads, |bi, slot| {
        let i0 = bi * SUM_BLOCK;
        let i1 = (i0 + SUM_BLOCK).min(n);
        let mut acc = 0.0;
        for i in i0..i1 {
            let gi = g.row(i);
            let si = sq[i];
            for j in (i + 1)..n {
                let d2 = (si + sq[j] - 2.0 * gi[j]).max(0.0);
                acc += profile_value(&family, d2 * inv_gamma);
            }
        }
        slot[0] = acc;
    });
    partials.iter().sum()
}

/// `Σ_{i,j} f(‖a_i − b_j‖²/γ)` over the full rectangle, accumulated so the
/// result is exactly symmetric in the two samples: the mirror entries
/// `(i,j)` and `(j,i)` are added to each other first (commutative), and the
/// resulting per-pair terms are folded in an order that does not depend on
/// which sample came first.
fn cross_kernel_sum(
    kernel: &KernelSpec,
    g: &Matrix,
    sqa: &[f64],
    sqb: &[f64],
    threads: usize,
) -> f64 {
    let (na, nb) = (g.rows(), g.cols());
    let top = na.max(nb);
    let inv_gamma = 1.0 / kernel.bandwidth;
    let family = kernel.family;
    let eval = |i: usize, j: usize| {
        let d2 = (sqa[i] + sqb[j] - 2.0 * g.at(i, j)).max(0.0);
        profile_value(&family, d2 * inv_gamma)
    };
    let blocks = top.div_ceil(SUM_BLOCK);
    let mut partials = vec![0.0f64; blocks];
    for_each_chunk_mut(&mut partials, 1, threads, |bu, slot| {
        let u0 = bu * SUM_BLOCK;
        let u1 = (u0 + SUM_BLOCK).min(top);
        let mut acc = 0.0;
        for u in u0..u1 {
            if u < na && u < nb {
                acc += eval(u, u);
            }
            for v in (u + 1)..top {
                // Unordered index pair {u, v}: add both orientations that
                // exist. When both do, their sum commutes, so swapping the
                // samples (which transposes g) leaves every addend and the
                // fold order unchanged.
                let lo_hi = if u < na && v < nb { Some(eval(u, v)) } else { None };
                let hi_lo = if v < na && u < nb { Some(eval(v, u)) } else { None };
                match (lo_hi, hi_lo) {
                    (Some(a), Some(b)) => acc += a + b,
                    (Some(a), None) | (None, Some(a)) => acc += a,
                    (None, None) => {}
                }
            }
        }
        slot[0] = acc;
    });
    partials.iter().sum()
}

/// Leave-two-out estimator of `tr(Σ²)` from a within-sample Gram matrix:
///
/// ```text
/// tr̂Σ² = [n(n−1)]⁻¹ Σ_{j≠k} [(X_j − X̄_{(j,k)})ᵀX_k]·[(X_k − X̄_{(j,k)})ᵀX_j]
/// ```
///
/// with `X̄_{(j,k)}` the mean of the other `n−2` rows. Using
/// `X̄_{(j,k)}ᵀX_k = (s_k − G_jk − G_kk)/(n−2)` (where `s_k` is the k-th Gram
/// row sum) keeps the whole estimator `O(n²)` after the Gram matrix.
fn within_trace(g: &Matrix, rs: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    let c = nf - 2.0;
    let mut acc = 0.0;
    for j in 0..n {
        let gj = g.row(j);
        let sj = rs[j];
        let gjj = g.at(j, j);
        for k in (j + 1)..n {
            let gjk = gj[k];
            let a = gjk - (rs[k] - gjk - g.at(k, k)) / c;
            let b = gjk - (sj - gjk - gjj) / c;
            acc += a * b;
        }
    }
    // The (j,k) and (k,j) summands are equal, so the off-diagonal sum is
    // twice the upper triangle.
    2.0 * acc / (nf * (nf - 1.0))
}

/// Leave-one-out estimator of `tr(Σ₁Σ₂)` from the cross Gram matrix:
///
/// ```text
/// tr̂Σ₁Σ₂ = (nm)⁻¹ Σ_{j,k} [(X_j − X̄_{(j)})ᵀY_k]·[(Y_k − Ȳ_{(k)})ᵀX_j]
/// ```
///
/// with `u_j = (ΣY)ᵀX_j` (row sums) and `v_k = (ΣX)ᵀY_k` (column sums)
/// supplying the leave-one-out means in `O(nm)`.
fn cross_trace(g: &Matrix, row_s: &[f64], col_s: &[f64], n: usize, m: usize) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let mut acc = 0.0;
    for j in 0..n {
        let gj = g.row(j);
        let uj = row_s[j];
        for k in 0..m {
            let h = gj[k];
            let a = h - (col_s[k] - h) / (nf - 1.0);
            let b = h - (uj - h) / (mf - 1.0);
            acc += a * b;
        }
    }
    acc / (nf * mf)
}

/// Unbiased squared-MMD statistic. See the module docs for the formula.
///
/// # Errors
///
/// [`Error::TooFewSamples`] if `n < 2` or `m < 2`;
/// [`Error::DimensionMismatch`] if the samples disagree in dimension.
pub fn mmd_unbiased(x: &SampleMatrix, y: &SampleMatrix, kernel: &KernelSpec) -> Result<f64> {
    mmd_unbiased_threaded(x, y, kernel, effective_threads())
}

/// [`mmd_unbiased`] with an explicit worker-thread count. Results are
/// bit-identical for every `threads ≥ 1`.
pub fn mmd_unbiased_threaded(
    x: &SampleMatrix,
    y: &SampleMatrix,
    kernel: &KernelSpec,
    threads: usize,
) -> Result<f64> {
    let ctx = TestContext::new(x, y, threads)?;
    Ok(ctx.mmd(kernel))
}

/// Plug-in estimates of the mean squared-distance parameters `(τ̂₁, τ̂₂, τ̂₃)`.
///
/// `τ̂₁ = (2/p)·(1/n) Σᵢ Xᵢᵀ(Xᵢ − X̄₋ᵢ)` with `X̄₋ᵢ` the leave-one-out mean
/// (`τ̂₂` likewise on `Y`), and `τ̂₃` adds the between-sample mean term so
/// that `p·τ̂₃` estimates `tr Σ₁ + tr Σ₂ + ‖μ₁ − μ₂‖²`.
pub fn tau_hats(x: &SampleMatrix, y: &SampleMatrix) -> Result<TauHats> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            what: "sample dimension",
            expected: x.dim(),
            got: y.dim(),
        });
    }
    require_samples(x, y, 2)?;
    // O(np): only norms, column totals, and the two sum vectors are needed.
    let p = x.dim();
    let (n, m) = (x.n() as f64, y.n() as f64);
    let s1x: f64 = (0..x.n()).map(|i| dot(x.row(i), x.row(i))).sum();
    let s1y: f64 = (0..y.n()).map(|i| dot(y.row(i), y.row(i))).sum();
    let sum_x = column_total(x);
    let sum_y = column_total(y);
    let gx = dot(&sum_x, &sum_x);
    let gy = dot(&sum_y, &sum_y);
    let c = dot(&sum_x, &sum_y);
    let a_x = s1x / n - (gx - s1x) / (n * (n - 1.0));
    let a_y = s1y / m - (gy - s1y) / (m * (m - 1.0));
    let b_x = (gx - s1x) / (n * (n - 1.0));
    let b_y = (gy - s1y) / (m * (m - 1.0));
    let c_xy = c / (n * m);
    let pf = p as f64;
    Ok(TauHats {
        tau1: 2.0 * a_x / pf,
        tau2: 2.0 * a_y / pf,
        tau3: (a_x + a_y + b_x + b_y - 2.0 * c_xy) / pf,
    })
}

fn column_total(s: &SampleMatrix) -> Vec<f64> {
    let mut out = vec![0.0; s.dim()];
    for i in 0..s.n() {
        for (o, v) in out.iter_mut().zip(s.row(i)) {
            *o += v;
        }
    }
    out
}

/// Leave-out estimators of `tr(Σ₁²)`, `tr(Σ₂²)`, `tr(Σ₁Σ₂)`; see the
/// formulas on [`TraceHats`]' helpers. Needs `n, m ≥ 4`.
pub fn trace_estimators(x: &SampleMatrix, y: &SampleMatrix) -> Result<TraceHats> {
    let ctx = TestContext::new(x, y, effective_threads())?;
    ctx.trace_hats()
}

/// Plug-in estimate of the leading variance term of the statistic under the
/// null; the studentizer of [`two_sample_test`].
///
/// # Errors
///
/// [`Error::TooFewSamples`] below `n, m ≥ 4`; [`Error::DegenerateVariance`]
/// if the estimate is exactly zero; derivative-domain errors when a `τ̂` is
/// non-positive for kernels with singular derivatives (Laplace, energy).
pub fn variance_estimate(
    x: &SampleMatrix,
    y: &SampleMatrix,
    kernel: &KernelSpec,
) -> Result<f64> {
    let ctx = TestContext::new(x, y, effective_threads())?;
    ctx.variance(kernel)
}

/// One-sided studentized two-sample test: reject `P = Q` at level `alpha`
/// when `MMD²/√var̂ > z_{1−α}`.
///
/// A zero variance estimate together with a non-positive statistic yields
/// `reject = false`, `p_value = 1` (duplicate-data degeneracy); a zero
/// variance with a positive statistic is [`Error::DegenerateVariance`].
pub fn two_sample_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    kernel: &KernelSpec,
    alpha: f64,
) -> Result<TestResult> {
    let ctx = TestContext::new(x, y, effective_threads())?;
    ctx.test(kernel, alpha)
}
