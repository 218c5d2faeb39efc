use std::f64::consts::{PI, SQRT_2};

use proptest::prelude::*;

use singlap::geometry::{
    builtin_metric, extendability_check, AngularProfile, ConformalMetric2D, Extendability,
    ScalarField,
};
use singlap::harness::{
    run_counterexample, run_experiment, run_table1, run_table2, Diagnostics, Experiment,
    ExperimentConfig,
};
use singlap::operators::{
    continuous_extrinsic_laplacian, continuous_intrinsic_laplacian, discrete_graph_laplacian,
    sample_density, total_volume, truncation_tail_bound, IntrinsicDistanceModel, KernelSpec,
    SampleDistance,
};
use singlap::quadrature::{
    gaussian_moment_ck, integrate_interval, integrate_polar, truncation_radius, QuadratureSpec,
    TruncationPolicy,
};

fn quick() -> QuadratureSpec {
    QuadratureSpec::new(64, 128, 1e-8).unwrap()
}

fn quadratic(c: [f64; 6]) -> ScalarField {
    ScalarField::quadratic(c[0], [c[1], c[2]], [[c[3], c[4]], [c[4], c[5]]])
}

fn sum_field(a: f64, f: ScalarField, b: f64, g: ScalarField) -> ScalarField {
    ScalarField::from_value(move |x| a * f.value(x) + b * g.value(x))
}

#[test]
fn ck_matches_truncated_radial_integral() {
    for k in 0..=8u32 {
        let direct = integrate_interval(|r| (-r * r).exp() * r.powi(k as i32), 0.0, 12.0, 200)
            .unwrap()
            .value;
        let ck = gaussian_moment_ck(k);
        assert!((direct - ck).abs() <= 1e-10 * ck, "k={k}: {direct} vs {ck}");
    }
}

#[test]
fn truncated_tail_mass_is_below_bound() {
    let d = 2.0;
    for eta in [0.3, 0.45, 0.49] {
        for t in [1e-1f64, 1e-2, 1e-3, 1e-4] {
            let r0: f64 = t.powf(eta);
            let bound = t.powf(-d / 2.0 - 1.0) * (-t.powf(2.0 * eta - 1.0)).exp();
            for j in 0..=2 {
                let tail = integrate_interval(
                    |r| (-r * r / t).exp() * r.powi(1 + j),
                    r0,
                    r0 + 40.0 * t.sqrt(),
                    400,
                )
                .unwrap()
                .value
                    / t.powf(d / 2.0 + 1.0);
                assert!(tail <= bound, "η={eta} t={t} j={j}: {tail:e} > {bound:e}");
            }
        }
    }
}

#[test]
fn refinement_changes_table_integral_less_than_estimate() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Table1);
    cfg.t_values = vec![1e-2];
    let (metric, model) = (
        builtin_metric("disk-a04").unwrap(),
        IntrinsicDistanceModel::radial_geodesic(AngularProfile::cosine_scale(0.4)),
    );
    let f = ScalarField::quadratic(0.0, [1.2, 0.7], [[0.1, 0.0], [0.0, -0.05]]);
    let p = ScalarField::constant(1.0);
    let eval = |spec: &QuadratureSpec| {
        continuous_intrinsic_laplacian(&f, &p, &metric, &model, 1e-2, &cfg.truncation, spec)
            .unwrap()
    };
    let base = eval(&cfg.quad);
    let fine = eval(&cfg.quad.refined());
    assert!(
        (fine.value - base.value).abs() <= base.quad_err.max(1e-14 * base.value.abs()),
        "{} vs {} (err_est {:e})",
        fine.value,
        base.value,
        base.quad_err
    );
}

#[test]
fn cone_value_is_t_independent() {
    let f = ScalarField::radial_square();
    let p = ScalarField::constant(1.0);
    let kernel = KernelSpec::extrinsic_cone(TruncationPolicy::BandwidthMultiple(10.0));
    for t in [0.9, 0.3, 1e-3, 1e-6, 1e-9] {
        let v = continuous_extrinsic_laplacian(&f, &p, &kernel, t, &quick()).unwrap();
        assert!(
            (v.value + PI * SQRT_2 / 4.0).abs() < 1e-10,
            "t={t}: {}",
            v.value
        );
    }
}

#[test]
fn harness_table_invariants() {
    let rows = run_table1(&ExperimentConfig::defaults(Experiment::Table1)).unwrap();
    assert!(rows.windows(2).all(|w| w[1].abs_error < w[0].abs_error));

    let rows = run_table2(&ExperimentConfig::defaults(Experiment::Table2)).unwrap();
    for r in &rows {
        let want = format!("{:.6}", r.t.sqrt() * (-PI * SQRT_2 / 4.0));
        assert_eq!(format!("{:.6}", r.scaled), want, "t={}", r.t);
    }
}

#[test]
fn blow_up_and_cone_slopes_differ() {
    let (_, fit) =
        run_counterexample(&ExperimentConfig::defaults(Experiment::Counterexample)).unwrap();
    assert!((fit.slope + 0.5).abs() < 0.02);
    let out = run_experiment(&ExperimentConfig::defaults(Experiment::Table2)).unwrap();
    match out.diagnostics {
        Diagnostics::Table2 { fit: Some(cone) } => {
            assert!(cone.slope.abs() < 1e-6, "{}", cone.slope)
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn truncation_change_is_within_ten_tail_bounds() {
    // Plane-embedded counterexample: ambient distance is r, so the bound
    // applies with ‖p‖₁ = 1 and ‖fp‖₁ = ∫|x| p dvol_g.
    let metric = builtin_metric("angular-cos").unwrap();
    let spec = QuadratureSpec::new(256, 400, 1e-10).unwrap();
    let vol = total_volume(&metric, &spec).unwrap().value;
    let f = ScalarField::quadratic(0.0, [1.0, 0.0], [[0.0; 2]; 2]);
    let p = ScalarField::constant(1.0 / vol);
    let fp_l1 = integrate_polar(
        |r, th| (r * th.cos()).abs() / vol * metric.volume_weight(r, th) * r,
        0.0,
        1.0,
        &spec,
    )
    .unwrap()
    .value;
    for t in [1e-2, 3e-3, 1e-3, 3e-4, 1e-4] {
        let at = |policy| {
            let k = KernelSpec::extrinsic_plane(metric.clone(), policy);
            continuous_extrinsic_laplacian(&f, &p, &k, t, &spec)
                .unwrap()
                .value
        };
        let wide = at(TruncationPolicy::BandwidthMultiple(10.0));
        let narrow = at(TruncationPolicy::BandwidthPower(0.45));
        let bound = truncation_tail_bound(0.0, 1.0, fp_l1, t, 0.45, 2).unwrap();
        assert!(
            (wide - narrow).abs() < 10.0 * bound,
            "t={t}: |Δ| = {:e}, bound {bound:e}",
            (wide - narrow).abs()
        );
    }
}

#[test]
fn radius_multiple_past_ten_changes_nothing() {
    let f = ScalarField::quadratic(0.0, [1.2, 0.7], [[0.1, 0.0], [0.0, -0.05]]);
    let p = ScalarField::constant(1.0);
    let kernel = |c| KernelSpec::extrinsic_cone(TruncationPolicy::BandwidthMultiple(c));
    for t in [1e-2, 1e-4] {
        let a = continuous_extrinsic_laplacian(&f, &p, &kernel(10.0), t, &quick())
            .unwrap()
            .value;
        let b = continuous_extrinsic_laplacian(&f, &p, &kernel(14.0), t, &quick())
            .unwrap()
            .value;
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    assert!(truncation_radius(1e-2, &TruncationPolicy::BandwidthMultiple(10.0)).unwrap() == 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polar_quadrature_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, k in 1u32..4, s in 0.1..2.0f64) {
        let spec = quick();
        let f = |r: f64, th: f64| (k as f64 * th).cos().exp() * r * (-r * r / s).exp();
        let g = |r: f64, th: f64| (th.sin() + 2.0) * r * r;
        let lhs = integrate_polar(|r, th| a * f(r, th) + b * g(r, th), 0.0, 1.0, &spec).unwrap().value;
        let rhs = a * integrate_polar(f, 0.0, 1.0, &spec).unwrap().value
            + b * integrate_polar(g, 0.0, 1.0, &spec).unwrap().value;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn continuous_operator_is_linear(
        cf in prop::array::uniform6(-2.0..2.0f64),
        cg in prop::array::uniform6(-2.0..2.0f64),
        a in -2.0..2.0f64, b in -2.0..2.0f64,
        log_t in -4.0..-1.0f64,
    ) {
        let t = 10f64.powf(log_t);
        let metric = builtin_metric("disk-a04").unwrap();
        let model = IntrinsicDistanceModel::radial_geodesic(AngularProfile::cosine_scale(0.4));
        let p = ScalarField::constant(1.0);
        let trunc = TruncationPolicy::FixedRadius(1.0);
        let eval = |h: &ScalarField| continuous_intrinsic_laplacian(h, &p, &metric, &model, t, &trunc, &quick()).unwrap().value;
        let (f, g) = (quadratic(cf), quadratic(cg));
        let lhs = eval(&sum_field(a, f.clone(), b, g.clone()));
        let rhs = a * eval(&f) + b * eval(&g);
        let scale = a.abs() * eval(&f).abs() + b.abs() * eval(&g).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1e-300) + 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn discrete_operator_is_linear(
        cf in prop::array::uniform6(-2.0..2.0f64),
        cg in prop::array::uniform6(-2.0..2.0f64),
        a in -2.0..2.0f64, b in -2.0..2.0f64, seed in 0u64..1000,
    ) {
        let s = sample_density(&builtin_metric("angular-cos").unwrap(), &ScalarField::constant(1.0), 2000, seed).unwrap();
        let eval = |h: &ScalarField| discrete_graph_laplacian(h, &s, 0.05, 2, &SampleDistance::Ambient).unwrap().value;
        let (f, g) = (quadratic(cf), quadratic(cg));
        let lhs = eval(&sum_field(a, f.clone(), b, g.clone()));
        let rhs = a * eval(&f) + b * eval(&g);
        let scale = a.abs() * eval(&f).abs() + b.abs() * eval(&g).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale + 1e-300);
    }

    #[test]
    fn constants_are_annihilated(c in -1e3..1e3f64, log_t in -6.0..-0.5f64, seed in 0u64..100) {
        let t = 10f64.powf(log_t);
        let f = ScalarField::constant(c);
        let p = ScalarField::quadratic(1.0, [0.3, -0.2], [[0.0; 2]; 2]);
        let metric = builtin_metric("angular-cos").unwrap();
        let model = IntrinsicDistanceModel::radial_geodesic(AngularProfile::constant(1.0));
        let trunc = TruncationPolicy::FixedRadius(1.0);
        prop_assert_eq!(continuous_intrinsic_laplacian(&f, &p, &metric, &model, t, &trunc, &quick()).unwrap().value, 0.0);
        let k = KernelSpec::extrinsic_plane(metric.clone(), trunc);
        prop_assert_eq!(continuous_extrinsic_laplacian(&f, &p, &k, t, &quick()).unwrap().value, 0.0);
        let s = sample_density(&metric, &ScalarField::constant(1.0), 500, seed).unwrap();
        prop_assert_eq!(discrete_graph_laplacian(&f, &s, t, 2, &SampleDistance::Ambient).unwrap().value, 0.0);
    }

    #[test]
    fn scaled_is_root_t_times_value(log_t in -8.0..-0.5f64) {
        let t = 10f64.powf(log_t);
        let f = ScalarField::quadratic(0.0, [1.0, 0.0], [[0.0; 2]; 2]);
        let k = KernelSpec::extrinsic_plane(builtin_metric("angular-cos").unwrap(), TruncationPolicy::FixedRadius(1.0));
        let v = continuous_extrinsic_laplacian(&f, &ScalarField::constant(1.0), &k, t, &quick()).unwrap();
        prop_assert!((v.scaled - t.sqrt() * v.value).abs() <= 1e-15 * v.scaled.abs());
    }

    #[test]
    fn constant_factor_always_extends(c in -50.0..50.0f64, log_tol in -14.0..0.0f64) {
        let e = extendability_check(&AngularProfile::constant(c), 10f64.powf(log_tol)).unwrap();
        prop_assert_eq!(e, Extendability::Extends);
    }

    #[test]
    fn sampler_draws_stay_in_the_punctured_disk(radius in 0.1..3.0f64, seed in 0u64..1000) {
        let m = ConformalMetric2D::angular(AngularProfile::harmonic(1.0, 2, 0.3), radius);
        let s = sample_density(&m, &ScalarField::constant(1.0), 300, seed).unwrap();
        prop_assert_eq!(s.points.len(), 300);
        prop_assert!(s.points.iter().all(|&[r, th]| r > 0.0 && r < radius && (0.0..2.0 * PI).contains(&th)));
    }
}
