use codazzi_core::metric_lab::{christoffels, MetricSpec, YMetric};
use codazzi_core::state_space::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scale(u: f64, v: f64) -> f64 {
    1.0 + u.abs().max(v.abs()).max(1.0 / v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn uv_round_trip(u in -1e3..1e3f64, v in 1e-3..1e3f64) {
        let (u2, v2) = to_uv(&from_uv(u, v).unwrap()).unwrap();
        prop_assert!((u2 - u).abs() <= 1e-14 * u.abs().max(1.0), "{u} {u2}");
        prop_assert!((v2 - v).abs() <= 1e-14 * v.max(1.0), "{v} {v2}");
    }

    #[test]
    fn gauss_constraint_is_algebraic(u in -1e3..1e3f64, v in 1e-3..1e3f64) {
        let f = from_uv(u, v).unwrap();
        let mag = 1.0 + f.mt * f.mt;
        prop_assert!(f.gauss_defect().abs() <= 1e-12 * mag);
    }

    #[test]
    fn rescale_keeps_signs_and_curvature(u in -50.0..50.0f64, v in 1e-2..50.0f64, gamma in 1e-2..10.0f64) {
        let t = from_uv(u, v).unwrap();
        let p = rescale(&t, gamma);
        prop_assert_eq!(p.l.signum(), t.lt.signum());
        prop_assert_eq!(p.n.signum(), t.nt.signum());
        let k = p.l * p.n - p.m * p.m;
        prop_assert!((k + gamma * gamma).abs() <= 1e-12 * gamma * gamma * (1.0 + t.mt * t.mt));
    }

    #[test]
    fn eigenvalue_representations_agree(u in -100.0..100.0f64, v in 1e-2..100.0f64) {
        let (a, b) = eigenvalues_uv(u, v);
        let (c, d) = eigenvalues_forms(&from_uv(u, v).unwrap());
        prop_assert!((a - c).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((b - d).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

fn compare_sources(spec: &MetricSpec, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class = spec.class();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let y = rng.random_range(-spec.y0..0.0);
        let u = rng.random_range(-3.0..3.0);
        let v = rng.random_range(0.05..3.0);
        let s = spec.sample(y);
        let (f, g) = source_terms(u, v, &christoffels(&s).unwrap());
        let (fs, gs) = match class {
            codazzi_core::metric_lab::MetricClass::Catenoid { c, .. } => {
                source_terms_catenoid(u, v, s.e, s.e_y, c, class.alpha())
            }
            codazzi_core::metric_lab::MetricClass::Helicoid { a, .. } => source_terms_helicoid(u, v, s.b, s.b_y(), a),
        };
        let mag = 1.0 + f.abs().max(g.abs()) + scale(u, v).powi(3) * s.e_y.abs() / s.e;
        worst = worst.max((f - fs).abs() / mag).max((g - gs).abs() / mag);
    }
    assert!(worst <= 1e-12, "worst relative source mismatch {worst:e}");
}

#[test]
fn catenoid_sources_general_vs_specialized() {
    compare_sources(&MetricSpec::catenoid(1.0, 2f64.sqrt(), 1.0).unwrap(), 1);
    compare_sources(&MetricSpec::catenoid(0.7, 2.0, 1.0).unwrap(), 2);
}

#[test]
fn helicoid_sources_general_vs_specialized() {
    compare_sources(&MetricSpec::helicoid(1.0, 1.0).unwrap(), 3);
    compare_sources(&MetricSpec::helicoid(2.5, 0.8).unwrap(), 4);
}

#[test]
fn state_field_text_round_trip() {
    let f = StateField::periodic(-0.25, 6.0, vec![0.1, -0.2, 0.3], vec![1.0, 2.0, 0.5]).unwrap();
    let text = f.to_text(&["metric = catenoid".to_string()]);
    assert!(text.starts_with("# metric = catenoid"));
    assert_eq!(StateField::from_text(&text).unwrap(), f);
}
