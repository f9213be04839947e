//! Randomized property tests across the crate's public surface: kernel
//! profile shape, scale invariance, statistic symmetry, nonnegativity and
//! nesting guarantees of the test, closed forms against generic derivative
//! evaluation, and bit-level reproducibility of the experiment engine.

use hd_mmd_core::kernels::{f_deriv, f_value, BandwidthPolicy, KernelFamily, KernelSpec};
use hd_mmd_core::linalg::Matrix;
use hd_mmd_core::mmd::{mmd_unbiased, two_sample_test, variance_estimate};
use hd_mmd_core::montecarlo::{
    run_experiment_threaded, ExperimentConfig, ExperimentMode, GridPoint, KernelConfig,
};
use hd_mmd_core::theory::{delta0, h2, power_higher_order, power_local, TheoryInput};
use hd_mmd_core::{Error, SampleMatrix};
use proptest::prelude::*;

/// The four kernel families at exercise-friendly parameters.
fn families() -> Vec<KernelFamily> {
    vec![
        KernelFamily::Gaussian,
        KernelFamily::Laplace,
        KernelFamily::RationalQuadratic { alpha: 0.5 },
        KernelFamily::RationalQuadratic { alpha: 2.0 },
        KernelFamily::Energy,
    ]
}

/// Σ = AᵀA from a row-major factor, so the result is symmetric PSD by
/// construction.
fn psd_from_factor(p: usize, factor: &[f64]) -> Matrix {
    let mut data = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += factor[k * p + i] * factor[k * p + j];
            }
            data[i * p + j] = s;
        }
    }
    Matrix::from_vec(p, p, data).unwrap()
}

fn sample_from(values: &[f64], n: usize, p: usize) -> SampleMatrix {
    SampleMatrix::new(n, p, values[..n * p].to_vec()).unwrap()
}

proptest! {
    /// Every profile is strictly decreasing and midpoint-convex on the scale
    /// the statistics evaluate it at.
    #[test]
    fn profiles_decrease_strictly_and_are_convex(
        u1 in 0.0_f64..9.0,
        gap in 0.01_f64..1.0,
    ) {
        let u3 = u1 + 2.0 * gap;
        let mid = u1 + gap;
        for family in families() {
            let f1 = f_value(&family, u1).unwrap();
            let fm = f_value(&family, mid).unwrap();
            let f3 = f_value(&family, u3).unwrap();
            prop_assert!(f1 > fm && fm > f3, "{family:?} not decreasing at {u1}", );
            prop_assert!(
                fm <= (f1 + f3) / 2.0 + 1e-12,
                "{family:?} not convex at {u1}: {fm} vs {}",
                (f1 + f3) / 2.0
            );
        }
    }

    /// Scaling squared distances and the bandwidth together changes nothing:
    /// the kernel only sees their ratio.
    #[test]
    fn kernel_value_depends_only_on_distance_bandwidth_ratio(
        x in proptest::collection::vec(-10.0_f64..10.0, 1..8),
        shift in proptest::collection::vec(-5.0_f64..5.0, 1..8),
        gamma in 0.1_f64..100.0,
        c in 0.01_f64..100.0,
    ) {
        let p = x.len().min(shift.len());
        let y: Vec<f64> = x[..p].iter().zip(&shift[..p]).map(|(a, b)| a + b).collect();
        let root = c.sqrt();
        let xs: Vec<f64> = x[..p].iter().map(|v| v * root).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * root).collect();
        for family in families() {
            let base = KernelSpec::new(family, gamma).unwrap().value(&x[..p], &y).unwrap();
            let scaled = KernelSpec::new(family, c * gamma)
                .unwrap()
                .value(&xs, &ys)
                .unwrap();
            prop_assert!(
                (base - scaled).abs() <= 1e-12 * base.abs().max(1.0),
                "{family:?}: {base} vs {scaled}"
            );
        }
    }

    /// The statistic is exactly symmetric in its two samples, and the
    /// variance estimate never goes negative (failures must be the
    /// documented degeneracies, not silent sign errors).
    #[test]
    fn statistic_symmetric_and_variance_nonnegative(
        values in proptest::collection::vec(-3.0_f64..3.0, 40..80),
        n in 4_usize..8,
        m in 4_usize..8,
        p in 1_usize..4,
    ) {
        prop_assume!(values.len() >= (n + m) * p);
        let x = sample_from(&values, n, p);
        let y = sample_from(&values[n * p..], m, p);
        for family in [KernelFamily::Gaussian, KernelFamily::Energy] {
            let kernel = KernelSpec::new(family, 2.0 * p as f64).unwrap();
            let xy = mmd_unbiased(&x, &y, &kernel).unwrap();
            let yx = mmd_unbiased(&y, &x, &kernel).unwrap();
            prop_assert_eq!(xy, yx);
            match variance_estimate(&x, &y, &kernel) {
                Ok(v) => prop_assert!(v >= 0.0, "negative variance {v}"),
                Err(Error::DegenerateVariance | Error::DerivativeSingularity { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            }
        }
    }

    /// Rejections are nested across levels: rejecting at a stricter level
    /// implies rejecting at every looser one, and p-values are probabilities.
    #[test]
    fn rejections_nest_across_levels(
        values in proptest::collection::vec(-3.0_f64..3.0, 60..100),
        strict in 0.01_f64..0.2,
        spread in 1.5_f64..5.0,
    ) {
        let (n, m, p) = (6, 6, 2);
        prop_assume!(values.len() >= (n + m) * p);
        let loose = (strict * spread).min(0.99);
        let x = sample_from(&values, n, p);
        let y = sample_from(&values[n * p..], m, p);
        let kernel = KernelSpec::new(KernelFamily::Gaussian, 2.0 * p as f64).unwrap();
        let at_strict = two_sample_test(&x, &y, &kernel, strict).unwrap();
        let at_loose = two_sample_test(&x, &y, &kernel, loose).unwrap();
        prop_assert!((0.0..=1.0).contains(&at_strict.p_value));
        prop_assert!(!at_strict.reject || at_loose.reject);
        prop_assert_eq!(at_strict.z_score, at_loose.z_score);
    }

    /// The second-order mean gap is nonnegative for every family, zero
    /// exactly on matched means and traces, and strictly positive once
    /// either moment separates.
    #[test]
    fn mean_gap_nonnegative_with_equality_on_matched_moments(
        factor1 in proptest::collection::vec(-2.0_f64..2.0, 36),
        factor2 in proptest::collection::vec(-2.0_f64..2.0, 36),
        mu1 in proptest::collection::vec(-2.0_f64..2.0, 6),
        mu2 in proptest::collection::vec(-2.0_f64..2.0, 6),
        p in 2_usize..=6,
    ) {
        let sigma1 = psd_from_factor(p, &factor1);
        let sigma2 = psd_from_factor(p, &factor2);
        let ti = TheoryInput::from_matrices(&mu1[..p], &sigma1, &mu2[..p], &sigma2).unwrap();
        let mean_gap_sq: f64 = mu1[..p]
            .iter()
            .zip(&mu2[..p])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let trace_gap = (sigma1.trace() - sigma2.trace()).abs();
        for family in families() {
            let kernel = KernelSpec::new(family, p as f64).unwrap();
            let d0 = delta0(&ti, &kernel).unwrap();
            prop_assert!(d0 >= -1e-12, "{family:?}: delta0 = {d0}");
            if mean_gap_sq + trace_gap > 0.01 {
                prop_assert!(d0 > 0.0, "{family:?}: separated moments but delta0 = {d0}");
            }
        }

        // Matching the second sample's moments to the first collapses the
        // gap to zero for every family.
        prop_assume!(sigma2.trace() > 0.1);
        let scale = sigma1.trace() / sigma2.trace();
        let matched = Matrix::from_vec(
            p,
            p,
            sigma2.as_slice().iter().map(|v| v * scale).collect(),
        )
        .unwrap();
        let ti0 = TheoryInput::from_matrices(&mu1[..p], &sigma1, &mu1[..p], &matched).unwrap();
        for family in families() {
            let kernel = KernelSpec::new(family, p as f64).unwrap();
            let d0 = delta0(&ti0, &kernel).unwrap();
            prop_assert!(d0.abs() <= 1e-12, "{family:?}: matched moments but delta0 = {d0}");
        }
    }

    /// Both power maps send zero signal to the level exactly and increase
    /// with the signal.
    #[test]
    fn power_is_level_at_zero_signal_and_monotone(
        var in 1e-8_f64..10.0,
        alpha in 0.001_f64..0.5,
        s1 in -2.0_f64..2.0,
        bump in 0.0_f64..3.0,
    ) {
        for f in [
            power_local as fn(f64, f64, f64, f64) -> hd_mmd_core::Result<f64>,
            |s0, s, v, a| power_higher_order(s0 + s, v, a),
        ] {
            let at_zero = f(0.0, 0.0, var, alpha).unwrap();
            prop_assert!((at_zero - alpha).abs() <= 1e-12);
            let lo = f(0.0, s1, var, alpha).unwrap();
            let hi = f(0.0, s1 + bump, var, alpha).unwrap();
            prop_assert!(hi >= lo - 1e-15);
            prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    /// The per-family closed forms of the bandwidth-response ratio agree
    /// with generic derivative evaluation.
    #[test]
    fn h2_closed_forms_match_generic_derivatives(
        gamma in 0.1_f64..500.0,
        tr_sigma1 in 0.05_f64..300.0,
        rq_alpha in 0.2_f64..5.0,
    ) {
        let families = [
            KernelFamily::Gaussian,
            KernelFamily::Laplace,
            KernelFamily::RationalQuadratic { alpha: rq_alpha },
            KernelFamily::Energy,
        ];
        for family in families {
            let closed = h2(&family, gamma, tr_sigma1).unwrap();
            let u = 2.0 * tr_sigma1 / gamma;
            let generic =
                f_deriv(&family, 2, u).unwrap() / (f_deriv(&family, 1, u).unwrap().abs() * gamma);
            prop_assert!(
                (closed - generic).abs() <= 1e-10 * closed.abs().max(1e-30),
                "{family:?}: {closed} vs {generic}"
            );
        }
    }

    /// 12-significant-digit plain decimal survives a parse round trip and
    /// never falls back to exponent notation.
    #[test]
    fn formatted_numbers_parse_back_losslessly(
        mantissa in -1.0_f64..1.0,
        exponent in -12_i32..12,
    ) {
        let x = mantissa * 10f64.powi(exponent);
        let s = hd_mmd_core::numfmt::format_significant(x, 12);
        prop_assert!(!s.contains('e') && !s.contains('E'), "{s}");
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= x.abs() * 1e-11, "{x} -> {s} -> {back}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    /// The experiment engine is bit-reproducible regardless of worker-thread
    /// count, for arbitrary seeds and small grids.
    #[test]
    fn experiments_are_bit_identical_across_thread_counts(
        seed in any::<u64>(),
        n in 6_usize..10,
        p in 2_usize..5,
    ) {
        let config = ExperimentConfig {
            mode: ExperimentMode::NullCalibration,
            model_x: Default::default(),
            model_y: Default::default(),
            kernels: vec![
                KernelConfig::default(),
                KernelConfig {
                    family: KernelFamily::Energy,
                    bandwidth: BandwidthPolicy::MedianHeuristic,
                },
            ],
            sample_grid: vec![GridPoint { n, m: n, p }],
            alphas: vec![0.05],
            replicates: 100,
            seed,
            extra_variance_terms: false,
            theory_reps: 10_000,
        };
        let single = run_experiment_threaded(&config, 1).unwrap();
        let multi = run_experiment_threaded(&config, 3).unwrap();
        prop_assert_eq!(single.records, multi.records);
        prop_assert_eq!(single.summary, multi.summary);
    }
}
