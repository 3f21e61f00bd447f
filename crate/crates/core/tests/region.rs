use codazzi_core::invariant_region::*;
use codazzi_core::metric_lab::{christoffels, generate_metric_ode, MetricClass, MetricSpec, YMetric};
use codazzi_core::solver::{invariant_scale, region_for};
use codazzi_core::state_space::source_terms;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_family(rng: &mut ChaCha8Rng) -> RegionFamily {
    if rng.random_bool(0.5) {
        let alpha = if rng.random_bool(0.2) { -1.0 } else { rng.random_range(-4.0..-1.0) };
        RegionFamily::CatenoidAlpha { alpha, c: rng.random_range(0.1..5.0) }
    } else {
        RegionFamily::HelicoidScaled { a: rng.random_range(-5.0..-2.0) }
    }
}

/// Positive root of `u -> sign_pair(u, u + δ).0` by bisection.
fn bracketed_root(family: &RegionFamily, delta: f64) -> f64 {
    let f = |u: f64| family.sign_pair(u, u + delta).0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    assert!(f(lo) > 0.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn corner_formula_matches_root_finder() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let family = random_family(&mut rng);
        let delta = family.delta_upper() * rng.random_range(0.01..0.99);
        let u0 = corner_u0(&family, delta);
        let oracle = bracketed_root(&family, delta);
        worst = worst.max((u0 - oracle).abs() / oracle.max(1.0));
    }
    assert!(worst <= 1e-10, "worst corner mismatch {worst:e}");
}

#[test]
fn corner_decreases_with_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let family = random_family(&mut rng);
        let upper = family.delta_upper();
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let u0 = corner_u0(&family, upper * k as f64 / 50.0);
            assert!(u0 < prev, "{family:?} at step {k}");
            prev = u0;
        }
    }
}

#[test]
fn membership_is_mirror_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let family = random_family(&mut rng);
        let region = build_region(family, 0.5 * family.delta_upper()).unwrap();
        let (wl, wh) = region.w_range();
        for _ in 0..100 {
            let u = rng.random_range(-1.5 * wh..1.5 * wh);
            let v = rng.random_range(0.0..1.5 * wh) + 0.5 * wl;
            assert_eq!(region.contains(u, v, 1.0), region.contains(-u, v, 1.0));
            let (w, z) = (u + v, u - v);
            assert_eq!(region.violation_wz(w, z), region.violation_wz(-z, -w));
        }
    }
}

/// Sources of the (scaled) invariants at `(u, v)` on level `y`.
fn invariant_sources(spec: &MetricSpec, y: f64, u: f64, v: f64) -> (f64, f64) {
    let s = spec.sample(y);
    let (f, g) = source_terms(u, v, &christoffels(&s).unwrap());
    let (b, ratio) = invariant_scale(&spec.class(), &s);
    (b * (f + g) + ratio * b * (u + v), b * (f - g) + ratio * b * (u - v))
}

fn check_edges(spec: &MetricSpec, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = region_for(spec, None).unwrap();
    let (wl, wh) = region.w_range();
    let (zl, zh) = region.z_range();
    for _ in 0..1000 {
        let y = rng.random_range(-spec.y0..-1e-3);
        assert!(spec.sample(y).e_y < 0.0);
        let b = if region.scaled { spec.sample(y).b } else { 1.0 };
        let t: f64 = rng.random_range(0.0..1.0);
        let w_mid = wl + t * (wh - wl);
        let z_mid = zl + t * (zh - zl);
        for (w, z, edge) in [(wh, z_mid, 0), (wl, z_mid, 1), (w_mid, zh, 2), (w_mid, zl, 3)] {
            let (u, v) = ((w + z) / (2.0 * b), (w - z) / (2.0 * b));
            let (sw, sz) = invariant_sources(spec, y, u, v);
            let tol = 1e-12 * (1.0 + sw.abs().max(sz.abs()));
            match edge {
                0 => assert!(sw <= tol, "w-max edge: source {sw:e} at y={y} (w,z)=({w},{z})"),
                1 => assert!(sw >= -tol, "w-min edge: source {sw:e} at y={y} (w,z)=({w},{z})"),
                2 => assert!(sz <= tol, "z-max edge: source {sz:e} at y={y} (w,z)=({w},{z})"),
                _ => assert!(sz >= -tol, "z-min edge: source {sz:e} at y={y} (w,z)=({w},{z})"),
            }
        }
    }
}

#[test]
fn boundary_sources_point_inward_catenoid() {
    check_edges(&MetricSpec::catenoid(1.0, 2f64.sqrt(), 1.0).unwrap(), 21);
    check_edges(&MetricSpec::catenoid(1.0, 2.0, 1.0).unwrap(), 22);
}

#[test]
fn boundary_sources_point_inward_helicoid() {
    check_edges(&MetricSpec::helicoid(1.0, 1.0).unwrap(), 23);
    let class = MetricClass::Helicoid { k0: 1.0, a: -3.0 };
    let table = generate_metric_ode(class, 1.0, 1.0, 0.0, None).unwrap();
    check_edges(&MetricSpec::tabulated(table).unwrap(), 24);
}

#[test]
fn delta_out_of_range_rejected() {
    let fam = RegionFamily::CatenoidAlpha { alpha: -1.0, c: 1.0 };
    assert!(matches!(build_region(fam, 1.0), Err(codazzi_core::Error::DeltaOutOfRange { .. })));
    assert!(matches!(build_region(fam, 0.0), Err(codazzi_core::Error::DeltaOutOfRange { .. })));
    assert!(build_region(fam, 0.999).is_ok());
}
