//! Invariant squares `ACBD` for the Riemann invariants.
//!
//! In `(w, z) = (u + v, u - v)` the region is the axis-parallel square
//! `δ ≤ w ≤ 2u0 + δ`, `-(2u0 + δ) ≤ z ≤ -δ` with corners
//! `C = (0, δ)`, `A = (u0, u0 + δ)`, `B = (-u0, u0 + δ)`, `D = (0, 2u0 + δ)`
//! in the `(u, v)` plane. Helicoid regions apply to `(Bu, Bv)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::metric_lab::MetricClass;
use crate::state_space::StateField;

/// `(φ1, φ2)`, whose signs fix the signs of `f + g` and `f - g` when `E' < 0`.
pub fn phi(u: f64, v: f64, alpha: f64, c: f64) -> (f64, f64) {
    let d = u * u - v * v;
    let k = c * (2.0 * alpha + 1.0);
    (c * u - k * v + d * (u + v), c * u + k * v + d * (u - v))
}

/// `(ψ1, ψ2)` in scaled variables; equal to [`phi`] with `c = 1`, `α = a/2`.
pub fn psi(ut: f64, vt: f64, a: f64) -> (f64, f64) {
    let d = ut * ut - vt * vt;
    (ut - (a + 1.0) * vt + d * (ut + vt), ut + (a + 1.0) * vt + d * (ut - vt))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionFamily {
    CatenoidAlpha { alpha: f64, c: f64 },
    HelicoidScaled { a: f64 },
}

impl RegionFamily {
    pub fn from_class(class: &MetricClass) -> Self {
        match *class {
            MetricClass::Catenoid { c, beta, .. } => {
                // β = √2 squares to slightly more than 2
                let alpha = -0.5 * beta * beta;
                let alpha = if (alpha + 1.0).abs() < 4.0 * f64::EPSILON { -1.0 } else { alpha };
                RegionFamily::CatenoidAlpha { alpha, c }
            }
            MetricClass::Helicoid { a, .. } => RegionFamily::HelicoidScaled { a },
        }
    }

    /// `(α, c)` of the equivalent catenoid problem.
    fn reduced(&self) -> (f64, f64) {
        match *self {
            RegionFamily::CatenoidAlpha { alpha, c } => (alpha, c),
            RegionFamily::HelicoidScaled { a } => (0.5 * a, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionFamily::CatenoidAlpha { alpha, c } => {
                if !(c > 0.0) {
                    return Err(Error::Domain(format!("c must be positive, got {c}")));
                }
                if !(alpha <= -1.0 + 1e-12) {
                    return Err(Error::Domain(format!("alpha must be <= -1, got {alpha}")));
                }
            }
            RegionFamily::HelicoidScaled { a } => {
                if !(a <= -2.0 + 1e-12) {
                    return Err(Error::Domain(format!("a must be <= -2, got {a}")));
                }
            }
        }
        Ok(())
    }

    /// Supremum of admissible `δ`: `√(-c(2α+1))` (`√c` at `α = -1`,
    /// `√(-a-1)` for helicoid regions).
    pub fn delta_upper(&self) -> f64 {
        let (alpha, c) = self.reduced();
        (-c * (2.0 * alpha + 1.0)).sqrt()
    }

    pub fn default_delta(&self) -> f64 {
        0.5 * self.delta_upper()
    }

    /// Sign-determining pair at a (scaled, for helicoid) state.
    pub fn sign_pair(&self, u: f64, v: f64) -> (f64, f64) {
        match *self {
            RegionFamily::CatenoidAlpha { alpha, c } => phi(u, v, alpha, c),
            RegionFamily::HelicoidScaled { a } => psi(u, v, a),
        }
    }

    pub fn is_scaled(&self) -> bool {
        matches!(self, RegionFamily::HelicoidScaled { .. })
    }
}

/// Closed-form corner abscissa `u0` (`ũ0` for helicoid regions).
pub fn corner_u0(family: &RegionFamily, delta: f64) -> f64 {
    let (alpha, c) = family.reduced();
    if (alpha + 1.0).abs() < 1e-12 {
        return (c - delta * delta) / (2.0 * delta);
    }
    let d2 = delta * delta;
    -(c * alpha + 2.0 * d2 - (c * c * alpha * alpha - 4.0 * c * alpha * d2 - 4.0 * c * d2).sqrt()) / (4.0 * delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantRegion {
    pub family: RegionFamily,
    pub delta: f64,
    pub u0: f64,
    pub bounds: Bounds,
    /// Bounds apply to `(Bu, Bv)` rather than `(u, v)`.
    pub scaled: bool,
}

/// Builds the square and checks `φ1(A) = φ2(B) = 0` (`ψ` for helicoid).
pub fn build_region(family: RegionFamily, delta: f64) -> Result<InvariantRegion> {
    family.validate()?;
    let upper = family.delta_upper();
    if !(delta > 0.0 && delta < upper) {
        return Err(Error::DeltaOutOfRange { delta, upper });
    }
    let u0 = corner_u0(&family, delta);
    let v_top = u0 + delta;
    let (r1, _) = family.sign_pair(u0, v_top);
    let (_, r2) = family.sign_pair(-u0, v_top);
    let (alpha, c) = family.reduced();
    // size of the individual terms, to make the root check scale-free
    let scale = 1.0 + c * u0 + (c * (2.0 * alpha + 1.0) * v_top).abs() + (u0 * u0 + v_top * v_top) * (u0 + v_top);
    let residual = r1.abs().max(r2.abs());
    if !(residual <= 1e-10 * scale) {
        return Err(Error::CornerInconsistency { residual });
    }
    Ok(InvariantRegion {
        family,
        delta,
        u0,
        bounds: Bounds { u_min: -u0, u_max: u0, v_min: delta, v_max: 2.0 * u0 + delta },
        scaled: family.is_scaled(),
    })
}

/// Largest containment defect in a field and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorReport {
    pub max_violation: f64,
    pub worst_index: usize,
}

impl InvariantRegion {
    pub fn w_range(&self) -> (f64, f64) {
        (self.delta, 2.0 * self.u0 + self.delta)
    }

    pub fn z_range(&self) -> (f64, f64) {
        (-(2.0 * self.u0 + self.delta), -self.delta)
    }

    /// Corners `A, C, B, D` in the (scaled) `(u, v)` plane.
    pub fn corners(&self) -> [(char, f64, f64); 4] {
        let (u0, d) = (self.u0, self.delta);
        [('A', u0, u0 + d), ('C', 0.0, d), ('B', -u0, u0 + d), ('D', 0.0, 2.0 * u0 + d)]
    }

    /// Scale applied before the containment test: `B` for helicoid regions,
    /// `1` otherwise.
    pub fn scale_for(&self, b: f64) -> f64 {
        if self.scaled {
            b
        } else {
            1.0
        }
    }

    /// Distance outside the square in the max-norm of `(w, z)`; zero inside.
    pub fn violation_wz(&self, w: f64, z: f64) -> f64 {
        let (w_lo, w_hi) = self.w_range();
        let (z_lo, z_hi) = self.z_range();
        let d = (w_lo - w).max(w - w_hi).max(z_lo - z).max(z - z_hi);
        if d.is_nan() {
            f64::INFINITY
        } else {
            d.max(0.0)
        }
    }

    /// Violation at `(u, v)`; `b` is used only for scaled regions.
    pub fn violation(&self, u: f64, v: f64, b: f64) -> f64 {
        let s = self.scale_for(b);
        self.violation_wz(s * (u + v), s * (u - v))
    }

    /// Closed-square membership; `b` is used only for scaled regions.
    pub fn contains(&self, u: f64, v: f64, b: f64) -> bool {
        self.violation(u, v, b) == 0.0
    }

    /// State at fractions `(s, t) ∈ [0, 1]²` of the `w` and `z` ranges.
    pub fn from_unit(&self, s: f64, t: f64, b: f64) -> (f64, f64) {
        let (w_lo, w_hi) = self.w_range();
        let (z_lo, z_hi) = self.z_range();
        let w = w_lo + s.clamp(0.0, 1.0) * (w_hi - w_lo);
        let z = z_lo + t.clamp(0.0, 1.0) * (z_hi - z_lo);
        let k = 2.0 * self.scale_for(b);
        ((w + z) / k, (w - z) / k)
    }

    pub fn monitor(&self, field: &StateField, b_of_y: impl Fn(f64) -> f64) -> MonitorReport {
        let b = b_of_y(field.y);
        let mut report = MonitorReport { max_violation: 0.0, worst_index: 0 };
        for (i, (&u, &v)) in field.u.iter().zip(&field.v).enumerate() {
            let d = self.violation(u, v, b);
            if d > report.max_violation {
                report = MonitorReport { max_violation: d, worst_index: i };
            }
        }
        report
    }
}

impl fmt::Display for InvariantRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = if self.scaled { "scaled " } else { "" };
        match self.family {
            RegionFamily::CatenoidAlpha { alpha, c } => writeln!(f, "family catenoid alpha={alpha:.17e} c={c:.17e}")?,
            RegionFamily::HelicoidScaled { a } => writeln!(f, "family helicoid a={a:.17e}")?,
        }
        writeln!(f, "delta {:.17e}", self.delta)?;
        writeln!(f, "u0 {:.17e}", self.u0)?;
        for (name, u, v) in self.corners() {
            writeln!(f, "{prefix}corner {name} {u:.17e} {v:.17e}")?;
        }
        let (w_lo, w_hi) = self.w_range();
        let (z_lo, z_hi) = self.z_range();
        writeln!(f, "{prefix}w {w_lo:.17e} {w_hi:.17e}")?;
        write!(f, "{prefix}z {z_lo:.17e} {z_hi:.17e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cat(alpha: f64) -> RegionFamily {
        RegionFamily::CatenoidAlpha { alpha, c: 1.0 }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0, 1.0, -1.0, 1.0), (0.0, 0.0));
        let (p1, p2) = phi(0.0, 0.5, -1.0, 1.0);
        assert_relative_eq!(p1, 0.375, epsilon = 1e-15);
        assert_relative_eq!(p2, -0.375, epsilon = 1e-15);
        // factorized form at alpha = -1
        let (u, v, c) = (0.3, 0.9, 1.7);
        let (p1, p2) = phi(u, v, -1.0, c);
        assert_relative_eq!(p1, (u * u - v * v + c) * (u + v), epsilon = 1e-14);
        assert_relative_eq!(p2, (u * u - v * v + c) * (u - v), epsilon = 1e-14);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.0, 1.0, -2.0).0, 0.0);
        assert_relative_eq!(psi(0.5, 1.0, -2.0).0, 0.375, epsilon = 1e-15);
        assert_eq!(psi(0.0, 1.0, -3.0), (1.0, -1.0));
        assert_eq!(psi(0.4, 0.7, -2.6), phi(0.4, 0.7, -1.3, 1.0));
    }

    #[test]
    fn region_examples() {
        let r = build_region(cat(-1.0), 0.5).unwrap();
        assert_relative_eq!(r.u0, 0.75, epsilon = 1e-15);
        assert_relative_eq!(r.bounds.v_max, 2.0, epsilon = 1e-15);

        let r = build_region(cat(-2.0), 0.5).unwrap();
        assert_relative_eq!(r.u0, 1.868_033_988_749_895, max_relative = 1e-14);
        assert_relative_eq!(r.u0, (1.5 + 5f64.sqrt()) / 2.0, max_relative = 1e-14);

        let r = build_region(RegionFamily::HelicoidScaled { a: -2.0 }, 0.5).unwrap();
        assert_relative_eq!(r.u0, 0.75, epsilon = 1e-15);
        assert_relative_eq!(r.bounds.v_max, 2.0, epsilon = 1e-15);
        assert!(r.scaled);
    }

    #[test]
    fn delta_admissibility() {
        assert!(matches!(build_region(cat(-1.0), 1.0), Err(Error::DeltaOutOfRange { .. })));
        assert!(matches!(build_region(cat(-1.0), 0.0), Err(Error::DeltaOutOfRange { .. })));
        assert!(matches!(
            build_region(RegionFamily::HelicoidScaled { a: -3.0 }, 2f64.sqrt()),
            Err(Error::DeltaOutOfRange { .. })
        ));
        assert!(build_region(cat(-0.5), 0.1).is_err());
    }

    #[test]
    fn containment_examples() {
        let r = build_region(cat(-1.0), 0.5).unwrap();
        assert!(r.contains(0.0, 1.0, 1.0));
        assert!(!r.contains(0.0, 0.4, 1.0));
        assert!(r.contains(0.75, 1.25, 1.0));
        for (_, u, v) in r.corners() {
            assert!(r.contains(u, v, 1.0));
        }
    }

    #[test]
    fn monitor_examples() {
        let r = build_region(cat(-1.0), 0.5).unwrap();
        let mut f = StateField::periodic(0.0, 1.0, vec![0.0; 8], vec![1.0; 8]).unwrap();
        assert_eq!(r.monitor(&f, |_| 1.0).max_violation, 0.0);
        f.v[5] = 0.4;
        let m = r.monitor(&f, |_| 1.0);
        assert_relative_eq!(m.max_violation, 0.1, epsilon = 1e-15);
        assert_eq!(m.worst_index, 5);
        let f = StateField::periodic(0.0, 1.0, vec![0.75; 4], vec![1.25; 4]).unwrap();
        assert_eq!(r.monitor(&f, |_| 1.0).max_violation, 0.0);
    }

    #[test]
    fn scaled_region_uses_b() {
        let r = build_region(RegionFamily::HelicoidScaled { a: -2.0 }, 0.5).unwrap();
        let b = 2f64.sqrt();
        assert!(r.contains(0.0, 1.0 / b, b));
        assert!(!r.contains(0.0, 1.0 / b, 4.0));
    }

    #[test]
    fn display_lists_corners() {
        let text = build_region(cat(-1.0), 0.5).unwrap().to_string();
        for name in ["corner A", "corner C", "corner B", "corner D", "w ", "z "] {
            assert!(text.contains(name), "{text}");
        }
    }
}
