//! State variables of the viscous system and the maps between them.
//!
//! `(L, M, N)` are the second fundamental form entries divided by `√|g|`,
//! `(L̃, M̃, Ñ)` the same divided by `γ = √(-K)`, and `(u, v)` the
//! parametrization `L̃ = 1/v`, `M̃ = -u/v`, `Ñ = (u² - v²)/v` that satisfies
//! the Gauss equation `L̃Ñ - M̃² = -1` identically.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metric_lab::ChristoffelSet;

/// Second fundamental form data, physical and curvature-normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundForms {
    pub l: f64,
    pub m: f64,
    pub n: f64,
    pub lt: f64,
    pub mt: f64,
    pub nt: f64,
}

impl FundForms {
    /// `L̃Ñ - M̃² + 1`.
    pub fn gauss_defect(&self) -> f64 {
        self.lt * self.nt - self.mt * self.mt + 1.0
    }
}

/// Normalized forms from `(u, v)`; the physical fields are filled as if
/// `γ = 1` until [`rescale`] is applied.
pub fn from_uv(u: f64, v: f64) -> Result<FundForms> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("v must be positive, got {v}")));
    }
    let lt = 1.0 / v;
    let mt = -u / v;
    let nt = (u * u - v * v) / v;
    Ok(FundForms { l: lt, m: mt, n: nt, lt, mt, nt })
}

/// Inverse of [`from_uv`] on the branch `L̃ > 0`.
pub fn to_uv(forms: &FundForms) -> Result<(f64, f64)> {
    if !(forms.lt > 0.0) {
        return Err(Error::Domain(format!("L~ must be positive, got {}", forms.lt)));
    }
    Ok((-forms.mt / forms.lt, 1.0 / forms.lt))
}

/// Physical `(L, M, N) = γ (L̃, M̃, Ñ)`.
pub fn rescale(forms: &FundForms, gamma: f64) -> FundForms {
    FundForms { l: gamma * forms.lt, m: gamma * forms.mt, n: gamma * forms.nt, ..*forms }
}

/// `(λ1, λ2) = (u - v, u + v)`.
pub fn eigenvalues_uv(u: f64, v: f64) -> (f64, f64) {
    (u - v, u + v)
}

/// `((-M̃ - 1)/L̃, (-M̃ + 1)/L̃)`, the eigenvalues in normalized-form variables.
pub fn eigenvalues_forms(forms: &FundForms) -> (f64, f64) {
    ((-forms.mt - 1.0) / forms.lt, (-forms.mt + 1.0) / forms.lt)
}

/// General source terms `(f, g)` of the `(u, v)` system.
pub fn source_terms(u: f64, v: f64, gt: &ChristoffelSet) -> (f64, f64) {
    let d = u * u - v * v;
    let f = -gt.t1_22
        + (gt.t2_22 - 2.0 * gt.t1_12) * u
        + (2.0 * gt.t2_12 - gt.t1_11) * u * u
        + gt.t1_11 * v * v
        + gt.t2_11 * d * u;
    let g = gt.t2_22 * v + 2.0 * gt.t2_12 * u * v + gt.t2_11 * d * v;
    (f, g)
}

/// Partial derivatives `[[f_u, f_v], [g_u, g_v]]` of [`source_terms`].
pub fn source_jacobian(u: f64, v: f64, gt: &ChristoffelSet) -> [[f64; 2]; 2] {
    let f_u = gt.t2_22 - 2.0 * gt.t1_12 + 2.0 * (2.0 * gt.t2_12 - gt.t1_11) * u + gt.t2_11 * (3.0 * u * u - v * v);
    let f_v = 2.0 * gt.t1_11 * v - 2.0 * gt.t2_11 * u * v;
    let g_u = 2.0 * gt.t2_12 * v + 2.0 * gt.t2_11 * u * v;
    let g_v = gt.t2_22 + 2.0 * gt.t2_12 * u + gt.t2_11 * (u * u - 3.0 * v * v);
    [[f_u, f_v], [g_u, g_v]]
}

/// Source terms for `G = cE` with `γ'/γ = α E'/E`.
pub fn source_terms_catenoid(u: f64, v: f64, e: f64, e_y: f64, c: f64, alpha: f64) -> (f64, f64) {
    let r = e_y / e;
    let d = u * u - v * v;
    let f = -0.5 * r * u - r / (2.0 * c) * d * u;
    let g = r * (alpha + 0.5) * v - r / (2.0 * c) * d * v;
    (f, g)
}

/// Source terms for `G = 1` with `γ'/γ = a B'/B`, `B = √E`.
pub fn source_terms_helicoid(u: f64, v: f64, b: f64, b_y: f64, a: f64) -> (f64, f64) {
    let d = u * u - v * v;
    let f = -2.0 * b_y / b * u - b * b_y * d * u;
    let g = a * b_y / b * v - b * b_y * d * v;
    (f, g)
}

/// Riemann invariants `w = u + v`, `z = u - v`, optionally premultiplied by
/// the scale `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannPair {
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub scaled: bool,
}

pub fn riemann(u: &[f64], v: &[f64]) -> RiemannPair {
    RiemannPair {
        w: u.iter().zip(v).map(|(a, b)| a + b).collect(),
        z: u.iter().zip(v).map(|(a, b)| a - b).collect(),
        scaled: false,
    }
}

pub fn scaled_riemann(u: &[f64], v: &[f64], b: f64) -> Result<RiemannPair> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("scale B must be positive, got {b}")));
    }
    Ok(RiemannPair {
        w: u.iter().zip(v).map(|(x, y)| b * x + b * y).collect(),
        z: u.iter().zip(v).map(|(x, y)| b * x - b * y).collect(),
        scaled: true,
    })
}

/// Maps an upper-branch state to the mirrored lower branch `(u, v) → (u, -v)`.
pub fn lower_branch(u: f64, v: f64) -> (f64, f64) {
    (u, -v)
}

/// `(u, v)` on a uniform x-grid at one level `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub y: f64,
    pub nx: usize,
    pub dx: f64,
    pub periodic: bool,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateField {
    /// Periodic field on `[0, period)` with `u.len()` nodes.
    pub fn periodic(y: f64, period: f64, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() || u.is_empty() {
            return Err(Error::Grid(format!("u and v lengths differ or are empty ({} vs {})", u.len(), v.len())));
        }
        if !(period > 0.0) {
            return Err(Error::Grid(format!("period must be positive, got {period}")));
        }
        if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Domain(format!("v[{i}] = {} is not positive", v[i])));
        }
        let nx = u.len();
        Ok(Self { y, nx, dx: period / nx as f64, periodic: true, u, v })
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn period(&self) -> f64 {
        self.dx * self.nx as f64
    }

    /// Neighbour indices `(i-1, i+1)` with periodic wrap.
    #[inline]
    pub fn neighbours(&self, i: usize) -> (usize, usize) {
        let n = self.nx;
        ((i + n - 1) % n, (i + 1) % n)
    }

    pub fn forms(&self) -> Result<Vec<FundForms>> {
        self.u.iter().zip(&self.v).map(|(&u, &v)| from_uv(u, v)).collect()
    }

    /// Text format: `# y Nx dx periodic` followed by a `#` line with those
    /// values, then one `i x u v` row per node.
    pub fn to_text(&self, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("# y Nx dx periodic\n");
        let _ = writeln!(out, "# {:.17e} {} {:.17e} {}", self.y, self.nx, self.dx, self.periodic);
        out.push_str("# i x u v\n");
        for i in 0..self.nx {
            let _ = writeln!(out, "{} {:.17e} {:.17e} {:.17e}", i, self.x(i), self.u[i], self.v[i]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let mut meta = None;
        while let Some((_, line)) = lines.next() {
            if line.trim() == "# y Nx dx periodic" {
                let (no, values) = lines.next().ok_or_else(|| Error::Parse("missing grid line".into()))?;
                let toks: Vec<&str> = values.trim_start_matches('#').split_whitespace().collect();
                if toks.len() != 4 {
                    return Err(Error::Parse(format!("line {}: expected `# y Nx dx periodic` values", no + 1)));
                }
                let perr = |e: &dyn std::fmt::Display| Error::Parse(format!("line {}: {e}", no + 1));
                let y: f64 = toks[0].parse().map_err(|e| perr(&e))?;
                let nx: usize = toks[1].parse().map_err(|e| perr(&e))?;
                let dx: f64 = toks[2].parse().map_err(|e| perr(&e))?;
                let periodic: bool = toks[3].parse().map_err(|e| perr(&e))?;
                meta = Some((y, nx, dx, periodic));
                break;
            }
        }
        let (y, nx, dx, periodic) = meta.ok_or_else(|| Error::Parse("missing `# y Nx dx periodic` header".into()))?;
        let mut u = Vec::with_capacity(nx);
        let mut v = Vec::with_capacity(nx);
        for (no, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected `i x u v`", no + 1)));
            }
            let idx: usize = toks[0].parse().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
            if idx != u.len() {
                return Err(Error::Parse(format!("line {}: row index {idx} out of order", no + 1)));
            }
            let parse = |t: &str| t.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)));
            u.push(parse(toks[2])?);
            v.push(parse(toks[3])?);
        }
        if u.len() != nx {
            return Err(Error::Parse(format!("expected {nx} rows, found {}", u.len())));
        }
        if let Some(i) = v.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Domain(format!("v[{i}] = {} is not positive", v[i])));
        }
        Ok(Self { y, nx, dx, periodic, u, v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_lab::{christoffels, eval_catenoid_example, eval_helicoid_example};
    use approx::assert_relative_eq;

    #[test]
    fn from_uv_examples() {
        let f = from_uv(0.0, 1.0).unwrap();
        assert_eq!((f.lt, f.mt, f.nt), (1.0, 0.0, -1.0));
        let f = from_uv(1.0, 2.0).unwrap();
        assert_eq!((f.lt, f.mt, f.nt), (0.5, -0.5, -1.5));
        assert_eq!(f.gauss_defect(), 0.0);
        let f = from_uv(-0.5, 0.5).unwrap();
        assert_eq!((f.lt, f.mt, f.nt), (2.0, 1.0, 0.0));
        assert!(matches!(from_uv(0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(from_uv(0.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn to_uv_examples() {
        for (u, v) in [(0.0, 1.0), (1.0, 2.0), (-0.5, 0.5)] {
            assert_eq!(to_uv(&from_uv(u, v).unwrap()).unwrap(), (u, v));
        }
        let bad = FundForms { l: 0.0, m: 0.0, n: 0.0, lt: 0.0, mt: 1.0, nt: 0.0 };
        assert!(matches!(to_uv(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn rescale_examples() {
        let f = rescale(&from_uv(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(f.l * f.n - f.m * f.m, -1.0);

        let s = eval_catenoid_example(-1.0, 1.0, std::f64::consts::SQRT_2).unwrap();
        let f = rescale(&from_uv(0.0, 1.0).unwrap(), s.gamma);
        let sech2 = 1.0 / 1.0f64.cosh().powi(2);
        assert_relative_eq!(f.l, sech2, max_relative = 1e-14);
        assert_eq!(f.m, 0.0);
        assert_relative_eq!(f.n, -sech2, max_relative = 1e-14);

        let f = rescale(&from_uv(1.0, 2.0).unwrap(), 2.0);
        assert_relative_eq!(f.l * f.n - f.m * f.m, -4.0, epsilon = 1e-14);
    }

    #[test]
    fn eigenvalue_representations_agree() {
        assert_eq!(eigenvalues_uv(0.0, 1.0), (-1.0, 1.0));
        assert_eq!(eigenvalues_uv(1.0, 2.0), (-1.0, 3.0));
        let (lm, lp) = eigenvalues_forms(&from_uv(1.0, 2.0).unwrap());
        assert_relative_eq!(lm, -1.0, epsilon = 1e-15);
        assert_relative_eq!(lp, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn catenoid_stationary_state_has_zero_source() {
        let class = crate::metric_lab::MetricClass::Catenoid { c: 1.0, k0: 1.0, beta: std::f64::consts::SQRT_2 };
        for &y in &[-1.0, -0.5, -0.1] {
            let s = class.sample(y, y.cosh().powi(2), 2.0 * y.cosh() * y.sinh());
            let (f, g) = source_terms(0.0, 1.0, &christoffels(&s).unwrap());
            assert!(f.abs() < 1e-15 && g.abs() < 1e-15, "{f} {g}");
            let (f, g) = source_terms_catenoid(0.0, 1.0, s.e, s.e_y, 1.0, -1.0);
            assert_eq!((f, g), (0.0, 0.0));
        }
    }

    #[test]
    fn zero_christoffels_give_zero_source() {
        let z = ChristoffelSet::default();
        assert_eq!(source_terms(0.3, 1.7, &z), (0.0, 0.0));
    }

    #[test]
    fn helicoid_general_and_specialized_agree() {
        let s = eval_helicoid_example(-1.0, 1.0).unwrap();
        let gt = christoffels(&s).unwrap();
        let (u, v) = (0.0, 1.0 / 2f64.sqrt());
        let (f1, g1) = source_terms(u, v, &gt);
        let (f2, g2) = source_terms_helicoid(u, v, s.b, s.b_y(), -2.0);
        assert_eq!(f1, 0.0);
        assert!((f1 - f2).abs() < 1e-12 && (g1 - g2).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = eval_catenoid_example(-0.7, 1.2, 1.6).unwrap();
        let gt = christoffels(&s).unwrap();
        let (u, v, h) = (0.3, 0.8, 1e-6);
        let jac = source_jacobian(u, v, &gt);
        let (fp, gp) = source_terms(u + h, v, &gt);
        let (fm, gm) = source_terms(u - h, v, &gt);
        assert_relative_eq!(jac[0][0], (fp - fm) / (2.0 * h), max_relative = 1e-7);
        assert_relative_eq!(jac[1][0], (gp - gm) / (2.0 * h), max_relative = 1e-7);
        let (fp, gp) = source_terms(u, v + h, &gt);
        let (fm, gm) = source_terms(u, v - h, &gt);
        assert_relative_eq!(jac[0][1], (fp - fm) / (2.0 * h), max_relative = 1e-7);
        assert_relative_eq!(jac[1][1], (gp - gm) / (2.0 * h), max_relative = 1e-7);
    }

    #[test]
    fn riemann_examples() {
        let p = riemann(&[0.0, 1.0], &[1.0, 2.0]);
        assert_eq!(p.w, vec![1.0, 3.0]);
        assert_eq!(p.z, vec![-1.0, -1.0]);
        let p = scaled_riemann(&[1.0], &[2.0], 2.0).unwrap();
        assert_eq!((p.w[0], p.z[0], p.scaled), (6.0, -2.0, true));
        assert!(scaled_riemann(&[1.0], &[2.0], 0.0).is_err());
    }

    #[test]
    fn state_field_text_round_trip() {
        let u: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).sin() * 0.1).collect();
        let v: Vec<f64> = (0..16).map(|i| 1.0 + 0.05 * (i as f64).cos()).collect();
        let f = StateField::periodic(-0.25, std::f64::consts::TAU, u, v).unwrap();
        let text = f.to_text(&["eps=0.001".into()]);
        assert!(text.contains("# y Nx dx periodic\n"));
        assert_eq!(StateField::from_text(&text).unwrap(), f);
    }

    #[test]
    fn state_field_rejects_nonpositive_v() {
        assert!(StateField::periodic(0.0, 1.0, vec![0.0; 3], vec![1.0, 0.0, 1.0]).is_err());
    }
}
