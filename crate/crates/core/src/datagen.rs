//! Reproducible samplers for the benchmark data-generating processes.
//!
//! The workhorse is the linear-map model `X = Γ U + μ`, where `U` has i.i.d.
//! entries from a chosen distribution and `Γ Γᵀ = Σ` for a structured
//! covariance (identity, AR(1), banded Toeplitz, or explicit). Two
//! non-linear models used for null-calibration stress tests ride along: rows
//! uniform on the simplex scaled to sum `p` (a `p·Dirichlet(1,…,1)` draw)
//! and rows uniform on the radius-`√p` sphere.
//!
//! Sampling is deterministic: a `(spec, n, seed)` triple always produces the
//! same bits, because entries are drawn row-major from a ChaCha8 stream
//! seeded through [`crate::rng::derive_rng`] and every transform consumes
//! the stream in a fixed order.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, is_near_psd, symmetric_eigen, Matrix};
use crate::sample::SampleMatrix;

/// Distribution of the i.i.d. entries of `U` in the linear-map model.
///
/// The first four are standardized (mean 0, variance 1) and are the ones the
/// high-dimensional theory assumes; `ShiftedNormal` and `Poisson` are raw
/// (uncentered) coordinate distributions for benchmarks that compare, e.g.,
/// normal against Poisson coordinates with matched mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDistribution {
    StdNormal,
    /// `Poisson(λ) − λ`: mean 0, variance λ (standardized at λ = 1).
    CenteredPoisson { lambda: f64 },
    /// `Exp(rate) − 1/rate`: mean 0, variance 1/rate² (standardized at 1).
    CenteredExponential { rate: f64 },
    /// `±1` with probability ½ each.
    Rademacher,
    /// `N(mean, var)`, uncentered.
    ShiftedNormal { mean: f64, var: f64 },
    /// Raw `Poisson(λ)`, uncentered.
    Poisson { lambda: f64 },
}

impl EntryDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            EntryDistribution::CenteredPoisson { lambda }
            | EntryDistribution::Poisson { lambda } => lambda.is_finite() && *lambda > 0.0,
            EntryDistribution::CenteredExponential { rate } => rate.is_finite() && *rate > 0.0,
            EntryDistribution::ShiftedNormal { mean, var } => {
                mean.is_finite() && var.is_finite() && *var >= 0.0
            }
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config {
                message: format!("invalid entry distribution parameters: {self:?}"),
            })
        }
    }

    /// Mean of one raw entry.
    pub fn mean(&self) -> f64 {
        match self {
            EntryDistribution::ShiftedNormal { mean, .. } => *mean,
            EntryDistribution::Poisson { lambda } => *lambda,
            _ => 0.0,
        }
    }

    /// Variance of one entry.
    pub fn variance(&self) -> f64 {
        match self {
            EntryDistribution::StdNormal | EntryDistribution::Rademacher => 1.0,
            EntryDistribution::CenteredPoisson { lambda }
            | EntryDistribution::Poisson { lambda } => *lambda,
            EntryDistribution::CenteredExponential { rate } => 1.0 / (rate * rate),
            EntryDistribution::ShiftedNormal { var, .. } => *var,
        }
    }

    /// Third central moment of one entry.
    pub fn third_central_moment(&self) -> f64 {
        match self {
            EntryDistribution::StdNormal
            | EntryDistribution::Rademacher
            | EntryDistribution::ShiftedNormal { .. } => 0.0,
            EntryDistribution::CenteredPoisson { lambda }
            | EntryDistribution::Poisson { lambda } => *lambda,
            EntryDistribution::CenteredExponential { rate } => 2.0 / rate.powi(3),
        }
    }

    /// Excess kurtosis `E(U − EU)⁴/var² − 3` of one entry.
    pub fn kurtosis_excess(&self) -> f64 {
        match self {
            EntryDistribution::StdNormal | EntryDistribution::ShiftedNormal { .. } => 0.0,
            EntryDistribution::CenteredPoisson { lambda }
            | EntryDistribution::Poisson { lambda } => 1.0 / lambda,
            EntryDistribution::CenteredExponential { .. } => 6.0,
            EntryDistribution::Rademacher => -2.0,
        }
    }
}

impl Default for EntryDistribution {
    fn default() -> Self {
        EntryDistribution::StdNormal
    }
}

/// Covariance structure of the linear-map model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSpec {
    Identity,
    /// `σ_ij = ρ^{|i−j|}`, `|ρ| < 1`.
    Ar1 { rho: f64 },
    /// Toeplitz band: `σ_ii = diag`, `σ_ij = band_values[|i−j|−1]` for
    /// `1 ≤ |i−j| ≤ width`, zero beyond.
    Banded {
        diag: f64,
        band_values: Vec<f64>,
        width: usize,
    },
    /// Arbitrary symmetric PSD matrix given entrywise.
    Explicit { matrix: Vec<Vec<f64>> },
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        CovarianceSpec::Identity
    }
}

/// Mean vector of the linear-map model. `Constant` keeps dimension-sweeping
/// configs compact (`μ = c·𝟙` at any `p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSpec {
    Zero,
    Constant(f64),
    Vector(Vec<f64>),
}

impl Default for MeanSpec {
    fn default() -> Self {
        MeanSpec::Zero
    }
}

impl MeanSpec {
    /// Materialize as a length-`p` vector.
    pub fn to_vector(&self, p: usize) -> Result<Vec<f64>> {
        match self {
            MeanSpec::Zero => Ok(vec![0.0; p]),
            MeanSpec::Constant(c) => Ok(vec![*c; p]),
            MeanSpec::Vector(v) => {
                if v.len() != p {
                    return Err(Error::DimensionMismatch {
                        what: "mean vector length",
                        expected: p,
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            MeanSpec::Zero => true,
            MeanSpec::Constant(c) => *c == 0.0,
            MeanSpec::Vector(v) => v.iter().all(|x| *x == 0.0),
        }
    }
}

/// How the i.i.d. entry matrix turns into observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `X = Γ U + μ`.
    LinearMap,
    /// `p · Dirichlet(1,…,1)` rows (normalized i.i.d. Exp(1) draws).
    DirichletScaled,
    /// `√p ·` (standard normal row / its norm).
    SphereUniform,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::LinearMap
    }
}

/// Full description of one data-generating process.
///
/// `p` may be omitted when the dimension comes from the surrounding context
/// (an experiment grid point or an explicit function argument); when both
/// are given they must agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default)]
    pub entry_dist: EntryDistribution,
    #[serde(default)]
    pub covariance: CovarianceSpec,
    #[serde(default)]
    pub mean: MeanSpec,
    #[serde(default)]
    pub transform: Transform,
}

impl ModelSpec {
    /// Resolve the effective dimension against an optional context `p`.
    pub fn effective_p(&self, context_p: Option<usize>) -> Result<usize> {
        let p = match (self.p, context_p) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config {
                    message: format!("model p = {a} conflicts with grid p = {b}"),
                });
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(Error::Config {
                    message: "model field p: required (no dimension in context)".into(),
                });
            }
        };
        if p == 0 {
            return Err(Error::Config {
                message: "model field p: must be >= 1".into(),
            });
        }
        Ok(p)
    }

    /// Validate all fields at a concrete dimension.
    pub fn validate_at(&self, p: usize) -> Result<()> {
        self.entry_dist.validate()?;
        if self.transform != Transform::LinearMap {
            // The simplex and sphere models fully determine their law; any
            // non-default linear-map field is a config mistake, not a knob.
            if self.covariance != CovarianceSpec::Identity
                || !self.mean.is_zero()
                || self.entry_dist != EntryDistribution::StdNormal
            {
                return Err(Error::Config {
                    message: format!(
                        "transform {:?} ignores entry_dist/covariance/mean; \
                         leave them at defaults",
                        self.transform
                    ),
                });
            }
            return Ok(());
        }
        self.mean.to_vector(p).map(|_| ())?;
        match &self.covariance {
            CovarianceSpec::Ar1 { rho } => {
                if !rho.is_finite() || rho.abs() >= 1.0 {
                    return Err(Error::Config {
                        message: format!("covariance field rho: need |rho| < 1, got {rho}"),
                    });
                }
            }
            CovarianceSpec::Banded {
                diag,
                band_values,
                width,
            } => {
                if band_values.len() != *width {
                    return Err(Error::Config {
                        message: format!(
                            "covariance field band_values: expected {} values for width {}, \
                             got {}",
                            width,
                            width,
                            band_values.len()
                        ),
                    });
                }
                if !diag.is_finite() || band_values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config {
                        message: "covariance band entries must be finite".into(),
                    });
                }
            }
            CovarianceSpec::Explicit { matrix } => {
                if matrix.len() != p || matrix.iter().any(|r| r.len() != p) {
                    return Err(Error::Config {
                        message: format!("covariance field matrix: must be {p}x{p}"),
                    });
                }
            }
            CovarianceSpec::Identity => {}
        }
        Ok(())
    }
}

/// Materialize the model's covariance matrix `Σ` at dimension `p`.
///
/// # Errors
///
/// [`Error::Config`] for invalid parameters or a non-linear-map transform;
/// [`Error::NotPositiveSemiDefinite`] if a banded or explicit structure
/// fails the eigenvalue check (`λ_min ≥ −1e−8`).
pub fn covariance_matrix(spec: &ModelSpec, p: usize) -> Result<Matrix> {
    if spec.transform != Transform::LinearMap {
        return Err(Error::Config {
            message: "covariance_matrix applies to the linear-map transform only".into(),
        });
    }
    spec.validate_at(p)?;
    let m = match &spec.covariance {
        CovarianceSpec::Identity => Matrix::identity(p),
        CovarianceSpec::Ar1 { rho } => {
            let mut m = Matrix::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    m.set(i, j, rho.powi((i as i64 - j as i64).unsigned_abs() as i32));
                }
            }
            m
        }
        CovarianceSpec::Banded {
            diag,
            band_values,
            width,
        } => {
            let mut m = Matrix::zeros(p, p);
            for i in 0..p {
                m.set(i, i, *diag);
                for d in 1..=*width {
                    if i + d < p {
                        m.set(i, i + d, band_values[d - 1]);
                        m.set(i + d, i, band_values[d - 1]);
                    }
                }
            }
            if !is_near_psd(&m, 1e-8) {
                return Err(Error::NotPositiveSemiDefinite {
                    what: "banded covariance",
                });
            }
            m
        }
        CovarianceSpec::Explicit { matrix } => {
            let m = Matrix::from_rows(matrix)?;
            if m.asymmetry() > 1e-8 {
                return Err(Error::Config {
                    message: "covariance field matrix: not symmetric".into(),
                });
            }
            if !is_near_psd(&m, 1e-8) {
                return Err(Error::NotPositiveSemiDefinite {
                    what: "explicit covariance",
                });
            }
            m
        }
    };
    Ok(m)
}

/// A factor `Γ` with `Γ Γᵀ = Σ`: the Cholesky factor when `Σ` is positive
/// definite, otherwise the symmetric eigendecomposition square root (with
/// negative eigenvalues within tolerance clipped to zero). The
/// reconstruction residual `‖ΓΓᵀ − Σ‖_max` is at most `1e-8`.
///
/// # Errors
///
/// [`Error::NotPositiveSemiDefinite`] if `λ_min < −1e−8`.
pub fn factor_root(sigma: &Matrix) -> Result<Matrix> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            what: "covariance (square)",
            expected: sigma.rows(),
            got: sigma.cols(),
        });
    }
    if let Some(l) = cholesky(sigma) {
        return Ok(l);
    }
    if !is_near_psd(sigma, 1e-8) {
        return Err(Error::NotPositiveSemiDefinite {
            what: "factor_root input",
        });
    }
    // Semidefinite fallback: Γ = V·diag(√λ⁺) so that ΓΓᵀ = V diag(λ⁺) Vᵀ.
    let p = sigma.rows();
    let (vals, v) = symmetric_eigen(sigma)?;
    let mut gamma = Matrix::zeros(p, p);
    for j in 0..p {
        let s = vals[j].max(0.0).sqrt();
        for i in 0..p {
            gamma.set(i, j, v.at(i, j) * s);
        }
    }
    // The clipped spectrum can only move entries by O(1e-8); verify.
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += gamma.at(i, k) * gamma.at(j, k);
            }
            worst = worst.max((acc - sigma.at(i, j)).abs());
        }
    }
    if worst > 1e-8 {
        return Err(Error::NotPositiveSemiDefinite {
            what: "factor_root reconstruction",
        });
    }
    Ok(gamma)
}

/// Draw `n` observations from the model at its own dimension
/// (`spec.p` must be set).
pub fn sample(spec: &ModelSpec, n: usize, seed: u64) -> Result<SampleMatrix> {
    let p = spec.effective_p(None)?;
    sample_at(spec, p, n, seed)
}

/// Draw `n` observations at an explicit dimension `p` (which must match
/// `spec.p` when that is set). Same `(spec, p, n, seed)` in, same bits out.
pub fn sample_at(spec: &ModelSpec, p: usize, n: usize, seed: u64) -> Result<SampleMatrix> {
    let sampler = Sampler::new(spec, p)?;
    if n == 0 {
        return Err(Error::EmptyInput {
            what: "sample size n",
        });
    }
    let mut rng = crate::rng::derive_rng(seed, &[]);
    let mut data = vec![0.0f64; n * sampler.p()];
    sampler.fill_rows(&mut rng, &mut data);
    SampleMatrix::new(n, sampler.p(), data)
}

enum SamplerKind {
    /// Identity covariance: entries plus the mean.
    Shift,
    /// AR(1) recursion `x_k = ρ x_{k−1} + √(1−ρ²) u_k`, which is exactly the
    /// Cholesky factor of the AR(1) covariance applied to `u`, in O(p)/row.
    Ar1 { rho: f64, c: f64 },
    /// Dense factor: `x = Γ u + μ`.
    Dense { gamma: Matrix },
    Dirichlet,
    Sphere,
}

/// A model compiled for repeated drawing: any covariance factorization is
/// done once here, so per-replicate loops (experiments, Monte Carlo
/// integration) pay only the O(n·p) or O(n·p²) sampling cost.
pub struct Sampler {
    p: usize,
    entry_dist: EntryDistribution,
    mean: Vec<f64>,
    kind: SamplerKind,
}

impl Sampler {
    /// Validate the model at dimension `p` and precompute its factor.
    pub fn new(spec: &ModelSpec, p: usize) -> Result<Self> {
        let p = spec.effective_p(Some(p))?;
        spec.validate_at(p)?;
        let (kind, mean) = match spec.transform {
            Transform::LinearMap => {
                let mean = spec.mean.to_vector(p)?;
                let kind = match &spec.covariance {
                    CovarianceSpec::Identity => SamplerKind::Shift,
                    CovarianceSpec::Ar1 { rho } => SamplerKind::Ar1 {
                        rho: *rho,
                        c: (1.0 - rho * rho).sqrt(),
                    },
                    _ => {
                        let sigma = covariance_matrix(spec, p)?;
                        SamplerKind::Dense {
                            gamma: factor_root(&sigma)?,
                        }
                    }
                };
                (kind, mean)
            }
            Transform::DirichletScaled => (SamplerKind::Dirichlet, Vec::new()),
            Transform::SphereUniform => (SamplerKind::Sphere, Vec::new()),
        };
        Ok(Sampler {
            p,
            entry_dist: spec.entry_dist,
            mean,
            kind,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Fill `out` (length a multiple of `p`) with consecutive observations,
    /// drawing entries row-major from `rng`.
    pub fn fill_rows(&self, rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
        let p = self.p;
        assert!(
            out.len() % p == 0,
            "output length {} not a multiple of p = {p}",
            out.len()
        );
        match &self.kind {
            SamplerKind::Shift => {
                let mut row = vec![0.0f64; p];
                for out in out.chunks_exact_mut(p) {
                    draw_entries(&self.entry_dist, rng, &mut row);
                    for (o, (u, mu)) in out.iter_mut().zip(row.iter().zip(&self.mean)) {
                        *o = u + mu;
                    }
                }
            }
            SamplerKind::Ar1 { rho, c } => {
                let mut row = vec![0.0f64; p];
                for out in out.chunks_exact_mut(p) {
                    draw_entries(&self.entry_dist, rng, &mut row);
                    let mut prev = row[0];
                    out[0] = prev + self.mean[0];
                    for k in 1..p {
                        prev = rho * prev + c * row[k];
                        out[k] = prev + self.mean[k];
                    }
                }
            }
            SamplerKind::Dense { gamma } => {
                let mut row = vec![0.0f64; p];
                for out in out.chunks_exact_mut(p) {
                    draw_entries(&self.entry_dist, rng, &mut row);
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = crate::pairwise::dot(gamma.row(j), &row) + self.mean[j];
                    }
                }
            }
            SamplerKind::Dirichlet => {
                let exp = Exp::new(1.0).expect("rate 1 is valid");
                for out in out.chunks_exact_mut(p) {
                    let mut total = 0.0;
                    for o in out.iter_mut() {
                        let e: f64 = exp.sample(rng);
                        *o = e;
                        total += e;
                    }
                    let scale = p as f64 / total;
                    for o in out.iter_mut() {
                        *o *= scale;
                    }
                }
            }
            SamplerKind::Sphere => {
                let radius = (p as f64).sqrt();
                for out in out.chunks_exact_mut(p) {
                    loop {
                        let mut norm_sq = 0.0;
                        for o in out.iter_mut() {
                            let g: f64 = StandardNormal.sample(rng);
                            *o = g;
                            norm_sq += g * g;
                        }
                        // A zero draw has probability zero; guard anyway so
                        // the normalization cannot divide by zero.
                        if norm_sq > 0.0 {
                            let scale = radius / norm_sq.sqrt();
                            for o in out.iter_mut() {
                                *o *= scale;
                            }
                            break;
                        }
                    }
                }
            }
        }
    }
}

fn draw_entries(dist: &EntryDistribution, rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
    match dist {
        EntryDistribution::StdNormal => {
            for o in out.iter_mut() {
                *o = StandardNormal.sample(rng);
            }
        }
        EntryDistribution::CenteredPoisson { lambda } => {
            let d = Poisson::new(*lambda).expect("validated lambda > 0");
            for o in out.iter_mut() {
                let v: f64 = d.sample(rng);
                *o = v - lambda;
            }
        }
        EntryDistribution::CenteredExponential { rate } => {
            let d = Exp::new(*rate).expect("validated rate > 0");
            for o in out.iter_mut() {
                let v: f64 = d.sample(rng);
                *o = v - 1.0 / rate;
            }
        }
        EntryDistribution::Rademacher => {
            for o in out.iter_mut() {
                *o = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
        }
        EntryDistribution::ShiftedNormal { mean, var } => {
            let sd = var.sqrt();
            for o in out.iter_mut() {
                let g: f64 = StandardNormal.sample(rng);
                *o = mean + sd * g;
            }
        }
        EntryDistribution::Poisson { lambda } => {
            let d = Poisson::new(*lambda).expect("validated lambda > 0");
            for o in out.iter_mut() {
                *o = d.sample(rng);
            }
        }
    }
}

/// Population mean vector of the model at dimension `p`.
///
/// For the linear map this is `μ + m₀·Γ𝟙` with `m₀` the raw entry mean
/// (zero for the standardized distributions, so usually just `μ`); the
/// simplex model has mean `𝟙` and the sphere model mean `0`.
pub fn population_mean(spec: &ModelSpec, p: usize) -> Result<Vec<f64>> {
    let p = spec.effective_p(Some(p))?;
    spec.validate_at(p)?;
    match spec.transform {
        Transform::LinearMap => {
            let mut mean = spec.mean.to_vector(p)?;
            let m0 = spec.entry_dist.mean();
            if m0 != 0.0 {
                let sigma = covariance_matrix(spec, p)?;
                let gamma = factor_root(&sigma)?;
                let ones = vec![1.0; p];
                let shift = gamma.mul_vec(&ones)?;
                for (m, s) in mean.iter_mut().zip(&shift) {
                    *m += m0 * s;
                }
            }
            Ok(mean)
        }
        Transform::DirichletScaled => Ok(vec![1.0; p]),
        Transform::SphereUniform => Ok(vec![0.0; p]),
    }
}

/// Population covariance matrix of the model at dimension `p`.
///
/// Linear map: `v₀·Σ` with `v₀` the entry variance. Scaled simplex:
/// `(p/(p+1))(I − 𝟙𝟙ᵀ/p)`. Sphere of radius `√p`: exactly `I`.
pub fn population_covariance(spec: &ModelSpec, p: usize) -> Result<Matrix> {
    let p = spec.effective_p(Some(p))?;
    spec.validate_at(p)?;
    match spec.transform {
        Transform::LinearMap => {
            let mut sigma = covariance_matrix(spec, p)?;
            let v0 = spec.entry_dist.variance();
            if v0 != 1.0 {
                for i in 0..p {
                    for j in 0..p {
                        sigma.set(i, j, sigma.at(i, j) * v0);
                    }
                }
            }
            Ok(sigma)
        }
        Transform::DirichletScaled => {
            let pf = p as f64;
            let mut m = Matrix::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    let v = if i == j {
                        (pf - 1.0) / (pf + 1.0)
                    } else {
                        -1.0 / (pf + 1.0)
                    };
                    m.set(i, j, v);
                }
            }
            Ok(m)
        }
        Transform::SphereUniform => Ok(Matrix::identity(p)),
    }
}

/// Whether samples from the model are exactly multivariate normal (the
/// condition for the Gaussian closed-form population MMD to apply).
pub fn is_gaussian(spec: &ModelSpec) -> bool {
    spec.transform == Transform::LinearMap
        && matches!(
            spec.entry_dist,
            EntryDistribution::StdNormal | EntryDistribution::ShiftedNormal { .. }
        )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(covariance: CovarianceSpec, p: usize) -> ModelSpec {
        ModelSpec {
            p: Some(p),
            covariance,
            ..ModelSpec::default()
        }
    }

    #[test]
    fn ar1_covariance_matches_hand_matrix() {
        let spec = model(CovarianceSpec::Ar1 { rho: 0.5 }, 3);
        let m = covariance_matrix(&spec, 3).unwrap();
        let expect = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.at(i, j), expect[i][j]);
            }
        }
    }

    #[test]
    fn banded_covariance_matches_description() {
        let spec = model(
            CovarianceSpec::Banded {
                diag: 1.0,
                band_values: vec![0.25, 0.25],
                width: 2,
            },
            5,
        );
        let m = covariance_matrix(&spec, 5).unwrap();
        for i in 0..5usize {
            for j in 0..5usize {
                let d = i.abs_diff(j);
                let expect = match d {
                    0 => 1.0,
                    1 | 2 => 0.25,
                    _ => 0.0,
                };
                assert_eq!(m.at(i, j), expect, "({i},{j})");
            }
        }
    }

    #[test]
    fn non_psd_banded_is_rejected() {
        // width-1 band 0.9: eigenvalues 1 ± 0.9√2 dip below zero at p = 3.
        let spec = model(
            CovarianceSpec::Banded {
                diag: 1.0,
                band_values: vec![0.9],
                width: 1,
            },
            3,
        );
        assert!(matches!(
            covariance_matrix(&spec, 3),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }

    #[test]
    fn factor_root_known_cases() {
        let id = Matrix::identity(4);
        let g = factor_root(&id).unwrap();
        assert_eq!(g.as_slice(), id.as_slice());

        let d = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let g = factor_root(&d).unwrap();
        assert_eq!(g.at(0, 0), 2.0);
        assert_eq!(g.at(1, 1), 3.0);
        assert_eq!(g.at(0, 1), 0.0);

        let spec = model(CovarianceSpec::Ar1 { rho: 0.5 }, 10);
        let sigma = covariance_matrix(&spec, 10).unwrap();
        let g = factor_root(&sigma).unwrap();
        let back = g.mul_nt(&g).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!((back.at(i, j) - sigma.at(i, j)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn factor_root_semidefinite_fallback_and_rejection() {
        // Rank-1 PSD: eigenvalues {2, 0} force the eigen path.
        let semi = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let g = factor_root(&semi).unwrap();
        let back = g.mul_nt(&g).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((back.at(i, j) - semi.at(i, j)).abs() <= 1e-8);
            }
        }
        let indef = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            factor_root(&indef),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }

    #[test]
    fn ar1_recursion_agrees_with_explicit_factor() {
        // Same seed drives both paths, so they consume identical entry
        // draws; the recursion must reproduce the dense Cholesky map.
        let p = 12;
        let rho = 0.6;
        let fast = model(CovarianceSpec::Ar1 { rho }, p);
        let sigma = covariance_matrix(&fast, p).unwrap();
        let rows: Vec<Vec<f64>> = (0..p).map(|i| sigma.row(i).to_vec()).collect();
        let dense = model(CovarianceSpec::Explicit { matrix: rows }, p);
        let a = sample(&fast, 8, 77).unwrap();
        let b = sample(&dense, 8, 77).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let spec = model(CovarianceSpec::Ar1 { rho: 0.5 }, 20);
        let a = sample(&spec, 15, 42).unwrap();
        let b = sample(&spec, 15, 42).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = sample(&spec, 15, 43).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn lln_mean_and_covariance_identity_model() {
        let n = 10_000;
        let p = 5;
        let spec = model(CovarianceSpec::Identity, p);
        let s = sample(&spec, n, 7).unwrap();
        let nf = n as f64;
        let mut means = vec![0.0; p];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(s.row(i)) {
                *m += v / nf;
            }
        }
        for m in &means {
            assert!(m.abs() < 4.0 / nf.sqrt(), "mean {m}");
        }
        for a in 0..p {
            for b in 0..p {
                let mut cov = 0.0;
                for i in 0..n {
                    cov += (s.row(i)[a] - means[a]) * (s.row(i)[b] - means[b]);
                }
                cov /= nf - 1.0;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((cov - expect).abs() < 0.1, "cov({a},{b}) = {cov}");
            }
        }
    }

    #[test]
    fn standardized_entry_distributions_have_mean_zero_var_one() {
        let n = 4000;
        let p = 30; // np = 1.2e5
        for dist in [
            EntryDistribution::CenteredPoisson { lambda: 1.0 },
            EntryDistribution::CenteredExponential { rate: 1.0 },
            EntryDistribution::Rademacher,
        ] {
            let spec = ModelSpec {
                p: Some(p),
                entry_dist: dist,
                ..ModelSpec::default()
            };
            let s = sample(&spec, n, 9).unwrap();
            let total = (n * p) as f64;
            let mean: f64 = s.as_slice().iter().sum::<f64>() / total;
            let var: f64 =
                s.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (total - 1.0);
            assert!(mean.abs() <= 4.0 / total.sqrt(), "{dist:?} mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "{dist:?} var {var}");
        }
    }

    #[test]
    fn empirical_trace_tracks_population_trace() {
        let p = 20;
        let n = 10_000;
        let spec = model(CovarianceSpec::Ar1 { rho: 0.5 }, p);
        let s = sample(&spec, n, 11).unwrap();
        let nf = n as f64;
        let mut means = vec![0.0; p];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(s.row(i)) {
                *m += v / nf;
            }
        }
        let mut tr = 0.0;
        for a in 0..p {
            let mut v = 0.0;
            for i in 0..n {
                let d = s.row(i)[a] - means[a];
                v += d * d;
            }
            tr += v / (nf - 1.0);
        }
        let expect = p as f64; // AR(1) has unit diagonal
        assert!((tr - expect).abs() < 0.05 * expect, "tr {tr}");
    }

    #[test]
    fn dirichlet_rows_sum_to_p() {
        let p = 64;
        let spec = ModelSpec {
            p: Some(p),
            transform: Transform::DirichletScaled,
            ..ModelSpec::default()
        };
        let s = sample(&spec, 50, 13).unwrap();
        for i in 0..s.n() {
            let total: f64 = s.row(i).iter().sum();
            assert!((total - p as f64).abs() <= 1e-9, "row {i} sums to {total}");
            assert!(s.row(i).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn sphere_rows_have_norm_sqrt_p() {
        let p = 48;
        let spec = ModelSpec {
            p: Some(p),
            transform: Transform::SphereUniform,
            ..ModelSpec::default()
        };
        let s = sample(&spec, 50, 15).unwrap();
        let radius = (p as f64).sqrt();
        for i in 0..s.n() {
            let norm: f64 = s.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - radius).abs() <= 1e-9, "row {i} norm {norm}");
        }
    }

    #[test]
    fn shifted_and_raw_poisson_models_match_their_moments() {
        let p = 40;
        let n = 4000;
        for (dist, mean, var) in [
            (
                EntryDistribution::ShiftedNormal { mean: 1.0, var: 1.0 },
                1.0,
                1.0,
            ),
            (EntryDistribution::Poisson { lambda: 1.0 }, 1.0, 1.0),
        ] {
            let spec = ModelSpec {
                p: Some(p),
                entry_dist: dist,
                ..ModelSpec::default()
            };
            let s = sample(&spec, n, 17).unwrap();
            let total = (n * p) as f64;
            let m: f64 = s.as_slice().iter().sum::<f64>() / total;
            let v: f64 =
                s.as_slice().iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (total - 1.0);
            assert!((m - mean).abs() < 4.0 / total.sqrt() + 0.01, "{dist:?} mean {m}");
            assert!((v - var).abs() < 0.05, "{dist:?} var {v}");
        }
    }

    #[test]
    fn entry_moment_table() {
        let cases = [
            (EntryDistribution::StdNormal, 0.0, 1.0, 0.0, 0.0),
            (
                EntryDistribution::CenteredPoisson { lambda: 1.0 },
                0.0,
                1.0,
                1.0,
                1.0,
            ),
            (
                EntryDistribution::CenteredExponential { rate: 1.0 },
                0.0,
                1.0,
                2.0,
                6.0,
            ),
            (EntryDistribution::Rademacher, 0.0, 1.0, 0.0, -2.0),
            (
                EntryDistribution::ShiftedNormal { mean: 2.0, var: 3.0 },
                2.0,
                3.0,
                0.0,
                0.0,
            ),
            (EntryDistribution::Poisson { lambda: 4.0 }, 4.0, 4.0, 4.0, 0.25),
        ];
        for (d, mean, var, m3, kx) in cases {
            assert_eq!(d.mean(), mean, "{d:?}");
            assert_eq!(d.variance(), var, "{d:?}");
            assert_eq!(d.third_central_moment(), m3, "{d:?}");
            assert_eq!(d.kurtosis_excess(), kx, "{d:?}");
        }
    }

    #[test]
    fn population_summaries_for_nonlinear_transforms() {
        let p = 6;
        let dir = ModelSpec {
            p: Some(p),
            transform: Transform::DirichletScaled,
            ..ModelSpec::default()
        };
        assert_eq!(population_mean(&dir, p).unwrap(), vec![1.0; p]);
        let cov = population_covariance(&dir, p).unwrap();
        // Rows of the simplex covariance sum to zero (sum constraint).
        for i in 0..p {
            let row_sum: f64 = (0..p).map(|j| cov.at(i, j)).sum();
            assert!(row_sum.abs() < 1e-12);
        }
        // Empirical check of the diagonal.
        let s = sample(&dir, 20_000, 19).unwrap();
        let nf = s.n() as f64;
        let mut var0 = 0.0;
        let mut mean0 = 0.0;
        for i in 0..s.n() {
            mean0 += s.row(i)[0] / nf;
        }
        for i in 0..s.n() {
            let d = s.row(i)[0] - mean0;
            var0 += d * d / (nf - 1.0);
        }
        assert!((var0 - cov.at(0, 0)).abs() < 0.05, "simplex var {var0}");

        let sph = ModelSpec {
            p: Some(p),
            transform: Transform::SphereUniform,
            ..ModelSpec::default()
        };
        let cov = population_covariance(&sph, p).unwrap();
        assert_eq!(cov.as_slice(), Matrix::identity(p).as_slice());
    }

    #[test]
    fn population_mean_includes_entry_mean_through_factor() {
        // Poisson(2) entries through AR(1): mean = λ·Γ𝟙.
        let p = 8;
        let spec = ModelSpec {
            p: Some(p),
            entry_dist: EntryDistribution::Poisson { lambda: 2.0 },
            covariance: CovarianceSpec::Ar1 { rho: 0.5 },
            ..ModelSpec::default()
        };
        let mu = population_mean(&spec, p).unwrap();
        let s = sample(&spec, 40_000, 23).unwrap();
        let nf = s.n() as f64;
        for j in [0usize, 3, 7] {
            let mut m = 0.0;
            for i in 0..s.n() {
                m += s.row(i)[j] / nf;
            }
            assert!((m - mu[j]).abs() < 0.05, "coord {j}: {m} vs {}", mu[j]);
        }
    }

    #[test]
    fn config_validation_errors() {
        // Conflicting p.
        let spec = model(CovarianceSpec::Identity, 5);
        assert!(spec.effective_p(Some(6)).is_err());
        assert!(ModelSpec::default().effective_p(None).is_err());
        // |rho| >= 1.
        let bad = model(CovarianceSpec::Ar1 { rho: 1.0 }, 4);
        assert!(sample(&bad, 5, 1).is_err());
        // Band width / value count mismatch.
        let bad = model(
            CovarianceSpec::Banded {
                diag: 1.0,
                band_values: vec![0.2],
                width: 2,
            },
            5,
        );
        assert!(sample(&bad, 5, 1).is_err());
        // Mean length mismatch.
        let bad = ModelSpec {
            p: Some(3),
            mean: MeanSpec::Vector(vec![1.0, 2.0]),
            ..ModelSpec::default()
        };
        assert!(sample(&bad, 5, 1).is_err());
        // Non-default linear fields with a transform that ignores them.
        let bad = ModelSpec {
            p: Some(3),
            transform: Transform::SphereUniform,
            mean: MeanSpec::Constant(1.0),
            ..ModelSpec::default()
        };
        assert!(sample(&bad, 5, 1).is_err());
    }

    #[test]
    fn model_spec_json_round_trip() {
        let spec = ModelSpec {
            p: Some(50),
            entry_dist: EntryDistribution::CenteredPoisson { lambda: 1.0 },
            covariance: CovarianceSpec::Banded {
                diag: 1.0,
                band_values: vec![0.25, 0.25],
                width: 2,
            },
            mean: MeanSpec::Constant(1.0),
            transform: Transform::LinearMap,
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        // Defaults: a bare object is the standard normal model.
        let minimal: ModelSpec = serde_json::from_str(r#"{"p": 10}"#).unwrap();
        assert_eq!(minimal.entry_dist, EntryDistribution::StdNormal);
        assert_eq!(minimal.covariance, CovarianceSpec::Identity);
        assert_eq!(minimal.transform, Transform::LinearMap);
        // Unknown fields are rejected, naming the offender.
        let err = serde_json::from_str::<ModelSpec>(r#"{"p": 10, "nope": 1}"#);
        assert!(err.is_err());
    }
}
