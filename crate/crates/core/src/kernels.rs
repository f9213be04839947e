//! Translation-invariant kernel profiles and their derivatives.
//!
//! Every kernel here has the form `k(x, y) = f(‖x − y‖² / γ)` for a scalar
//! profile `f` and bandwidth `γ > 0`:
//!
//! | family               | profile `f(u)`        | notes                        |
//! |----------------------|-----------------------|------------------------------|
//! | Gaussian             | `exp(−u)`             |                              |
//! | Laplace              | `exp(−√u)`            | exponent uses the distance   |
//! | Rational quadratic   | `(1 + u)^(−α)`, α > 0 | Student-type heavy tail      |
//! | Energy               | `−√u`                 | negative-type, not PSD       |
//!
//! The energy profile is not positive semidefinite, but the two-sample
//! statistic built from it (the energy distance of Székely & Rizzo) is a
//! valid homogeneity statistic, so it is admitted alongside the PSD kernels.
//!
//! The asymptotic expansions behind the power formulas consume `f` through
//! its derivatives at moments of the squared distance, so [`f_deriv`] exposes
//! closed forms up to order 4. Laplace and energy derivatives blow up at 0
//! (the profiles are not smooth at the origin); evaluating them there is a
//! hard error rather than a silently large number.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleMatrix;

/// Highest derivative order [`f_deriv`] supports.
pub const MAX_DERIV_ORDER: usize = 4;

/// Kernel profile family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
    RationalQuadratic { alpha: f64 },
    Energy,
}

impl KernelFamily {
    /// Short lowercase name used in output tables.
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplace => "laplace",
            KernelFamily::RationalQuadratic { .. } => "rational_quadratic",
            KernelFamily::Energy => "energy",
        }
    }

    fn validate(&self) -> Result<()> {
        if let KernelFamily::RationalQuadratic { alpha } = self {
            if !alpha.is_finite() || *alpha <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "alpha",
                    reason: format!("rational quadratic exponent must be > 0, got {alpha}"),
                });
            }
        }
        Ok(())
    }
}

/// A kernel family with a resolved bandwidth, ready to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Bandwidth `γ` dividing the squared distance; strictly positive.
    pub bandwidth: f64,
}

impl KernelSpec {
    /// Validate and build a kernel spec.
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        family.validate()?;
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidBandwidth { value: bandwidth });
        }
        Ok(KernelSpec { family, bandwidth })
    }

    /// Evaluate `k(x, y) = f(‖x − y‖² / γ)`.
    ///
    /// # Errors
    ///
    /// [`Error::DimensionMismatch`] if the two points differ in length.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "kernel arguments",
                expected: x.len(),
                got: y.len(),
            });
        }
        let mut d2 = 0.0;
        for (a, b) in x.iter().zip(y) {
            let d = a - b;
            d2 += d * d;
        }
        f_value(&self.family, d2 / self.bandwidth)
    }
}

/// Evaluate the profile `f(u)` at `u ≥ 0`.
pub fn f_value(family: &KernelFamily, u: f64) -> Result<f64> {
    f_deriv(family, 0, u)
}

/// Unchecked profile evaluation for hot loops. The distance pipeline clamps
/// its arguments at zero, so the domain check of [`f_value`] would be dead
/// weight there; a unit test pins this to `f_value` on a grid.
#[inline]
pub(crate) fn profile_value(family: &KernelFamily, u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    match family {
        KernelFamily::Gaussian => (-u).exp(),
        KernelFamily::Laplace => (-u.sqrt()).exp(),
        KernelFamily::RationalQuadratic { alpha } => (1.0 + u).powf(-*alpha),
        KernelFamily::Energy => -u.sqrt(),
    }
}

/// Evaluate the `order`-th derivative of the profile, `f⁽ˢ⁾(u)`, at `u ≥ 0`.
///
/// Closed forms, with `r = √u`:
///
/// * Gaussian: `f⁽ˢ⁾(u) = (−1)ˢ e^{−u}`.
/// * Laplace: `f′ = −e^{−r}/(2r)`, `f″ = e^{−r}(r⁻² + r⁻³)/4`,
///   `f‴ = −e^{−r}(r⁻³ + 3r⁻⁴ + 3r⁻⁵)/8`,
///   `f⁗ = e^{−r}(r⁻⁴ + 6r⁻⁵ + 15r⁻⁶ + 15r⁻⁷)/16`.
/// * Rational quadratic: `f⁽ˢ⁾(u) = (−1)ˢ α(α+1)⋯(α+s−1)(1+u)^{−α−s}`.
/// * Energy: `f′ = −u^{−1/2}/2`, `f″ = u^{−3/2}/4`, `f‴ = −3u^{−5/2}/8`,
///   `f⁗ = 15u^{−7/2}/16`.
///
/// # Errors
///
/// * [`Error::UnsupportedOrder`] for `order > 4`.
/// * [`Error::InvalidParameter`] for `u < 0` or non-finite `u`.
/// * [`Error::DerivativeSingularity`] for Laplace/energy derivatives at
///   `u = 0`, where the one-sided limits diverge.
pub fn f_deriv(family: &KernelFamily, order: usize, u: f64) -> Result<f64> {
    family.validate()?;
    if order > MAX_DERIV_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            max: MAX_DERIV_ORDER,
        });
    }
    if !u.is_finite() || u < 0.0 {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: format!("profile argument must be finite and >= 0, got {u}"),
        });
    }
    match family {
        KernelFamily::Gaussian => {
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * (-u).exp())
        }
        KernelFamily::RationalQuadratic { alpha } => {
            let mut coeff = 1.0;
            for s in 0..order {
                coeff *= alpha + s as f64;
            }
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * coeff * (1.0 + u).powf(-(alpha + order as f64)))
        }
        KernelFamily::Laplace => {
            if order == 0 {
                return Ok((-u.sqrt()).exp());
            }
            if u == 0.0 {
                return Err(Error::DerivativeSingularity {
                    family: "laplace",
                    order,
                });
            }
            let r = u.sqrt();
            let e = (-r).exp();
            Ok(match order {
                1 => -e / (2.0 * r),
                2 => e * (r.powi(-2) + r.powi(-3)) / 4.0,
                3 => -e * (r.powi(-3) + 3.0 * r.powi(-4) + 3.0 * r.powi(-5)) / 8.0,
                4 => {
                    e * (r.powi(-4) + 6.0 * r.powi(-5) + 15.0 * r.powi(-6) + 15.0 * r.powi(-7))
                        / 16.0
                }
                _ => unreachable!(),
            })
        }
        KernelFamily::Energy => {
            if order == 0 {
                return Ok(-u.sqrt());
            }
            if u == 0.0 {
                return Err(Error::DerivativeSingularity {
                    family: "energy",
                    order,
                });
            }
            Ok(match order {
                1 => -0.5 * u.powf(-0.5),
                2 => 0.25 * u.powf(-1.5),
                3 => -0.375 * u.powf(-2.5),
                4 => 0.9375 * u.powf(-3.5),
                _ => unreachable!(),
            })
        }
    }
}

/// How a bandwidth is chosen before testing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Use the given `γ` as-is.
    Fixed(f64),
    /// `γ = c · p`, tracking the data dimension; the scaling that keeps the
    /// high-dimensional expansions honest.
    ScaledDimension(f64),
    /// Median of the pooled pairwise **squared** distances (the common
    /// median heuristic, applied on the squared scale).
    MedianHeuristic,
}

/// Resolve a bandwidth policy against data. `samples` are pooled for the
/// median heuristic; the dimension of the first sample drives
/// [`BandwidthPolicy::ScaledDimension`].
///
/// # Errors
///
/// * [`Error::InvalidBandwidth`] / [`Error::InvalidParameter`] for
///   non-positive fixed values or scale factors.
/// * [`Error::EmptyInput`] if the pooled data holds fewer than two rows.
/// * [`Error::DegenerateBandwidth`] if all pooled pairwise distances are 0.
/// * [`Error::DimensionMismatch`] if the samples disagree in dimension.
pub fn resolve_bandwidth(policy: &BandwidthPolicy, samples: &[&SampleMatrix]) -> Result<f64> {
    match policy {
        BandwidthPolicy::Fixed(g) => {
            if !g.is_finite() || *g <= 0.0 {
                return Err(Error::InvalidBandwidth { value: *g });
            }
            Ok(*g)
        }
        BandwidthPolicy::ScaledDimension(c) => {
            if !c.is_finite() || *c <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "bandwidth scale",
                    reason: format!("must be finite and > 0, got {c}"),
                });
            }
            let p = samples
                .first()
                .map(|s| s.dim())
                .ok_or(Error::EmptyInput {
                    what: "bandwidth data",
                })?;
            Ok(c * p as f64)
        }
        BandwidthPolicy::MedianHeuristic => {
            if samples.is_empty() {
                return Err(Error::EmptyInput {
                    what: "bandwidth data",
                });
            }
            let p = samples[0].dim();
            for s in samples {
                if s.dim() != p {
                    return Err(Error::DimensionMismatch {
                        what: "pooled sample dimension",
                        expected: p,
                        got: s.dim(),
                    });
                }
            }
            let rows: Vec<&[f64]> = samples
                .iter()
                .flat_map(|s| (0..s.n()).map(move |i| s.row(i)))
                .collect();
            if rows.len() < 2 {
                return Err(Error::EmptyInput {
                    what: "bandwidth data (need at least two pooled rows)",
                });
            }
            let mut d2: Vec<f64> = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
            for i in 0..rows.len() {
                for j in (i + 1)..rows.len() {
                    let mut acc = 0.0;
                    for (a, b) in rows[i].iter().zip(rows[j]) {
                        let d = a - b;
                        acc += d * d;
                    }
                    d2.push(acc);
                }
            }
            d2.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
            // Even count: average of the two middle values.
            let mid = d2.len() / 2;
            let median = if d2.len() % 2 == 1 {
                d2[mid]
            } else {
                0.5 * (d2[mid - 1] + d2[mid])
            };
            if median <= 0.0 {
                return Err(Error::DegenerateBandwidth);
            }
            Ok(median)
        }
    }
}
