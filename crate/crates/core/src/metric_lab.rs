//! Catenoid-type and helicoid-type metric families.
//!
//! Every metric here has `F = 0` and coefficients depending on `y` only:
//!
//! * catenoid class: `ds² = E dx² + c E dy²`, `K = -k0 E^{-β²}`
//! * helicoid class: `ds² = E dx² + dy²`, `K = -k0 E^{a}`
//!
//! Closed-form representatives of each class are provided, together with a
//! generator that builds `E(y)` from the curvature ODE and a quadrature
//! profile that solves the same ODE by separation of variables.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative slack allowed when checking `β ≥ √2`, so that a value typed with
/// seven decimals (1.4142135) is still accepted.
pub const BETA_SLACK: f64 = 1e-7;

/// `β` within [`BETA_SLACK`] of `√2` becomes exactly `√2`; anything else is
/// returned unchanged.
pub fn snap_beta(beta: f64) -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    if (beta - r2).abs() <= r2 * BETA_SLACK {
        r2
    } else {
        beta
    }
}

/// Default number of ODE steps / Simpson panels over a profile.
pub const DEFAULT_RESOLUTION: usize = 4096;

/// Structural class of a metric: which coefficient relation and which
/// curvature law it obeys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricClass {
    /// `G = c E`, `K = -k0 E^{-β²}`.
    Catenoid { c: f64, k0: f64, beta: f64 },
    /// `G = 1`, `K = -k0 E^{a}`.
    Helicoid { k0: f64, a: f64 },
}

impl MetricClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MetricClass::Catenoid { c, k0, beta } => {
                if !(c > 0.0) {
                    return Err(Error::Domain(format!("catenoid metric needs c > 0, got {c}")));
                }
                if !(k0 > 0.0) {
                    return Err(Error::Domain(format!("k0 must be positive, got {k0}")));
                }
                if !(beta >= std::f64::consts::SQRT_2 * (1.0 - BETA_SLACK)) {
                    return Err(Error::Domain(format!("catenoid metric needs beta >= sqrt(2), got {beta}")));
                }
            }
            MetricClass::Helicoid { k0, a } => {
                if !(k0 > 0.0) {
                    return Err(Error::Domain(format!("k0 must be positive, got {k0}")));
                }
                if !(a <= -2.0) {
                    return Err(Error::Domain(format!("helicoid metric needs a <= -2, got {a}")));
                }
            }
        }
        Ok(())
    }

    /// Exponent `p` in `K = -k0 E^p`.
    pub fn curvature_exponent(&self) -> f64 {
        match *self {
            MetricClass::Catenoid { beta, .. } => -beta * beta,
            MetricClass::Helicoid { a, .. } => a,
        }
    }

    /// `α` with `γ'/γ = α E'/E`; equals `-β²/2` (catenoid) or `a/2` (helicoid).
    pub fn alpha(&self) -> f64 {
        0.5 * self.curvature_exponent()
    }

    pub fn k0(&self) -> f64 {
        match *self {
            MetricClass::Catenoid { k0, .. } | MetricClass::Helicoid { k0, .. } => k0,
        }
    }

    pub fn curvature(&self, e: f64) -> f64 {
        -self.k0() * e.powf(self.curvature_exponent())
    }

    /// `(G, G')` from `(E, E')`.
    pub fn second_coefficient(&self, e: f64, e_y: f64) -> (f64, f64) {
        match *self {
            MetricClass::Catenoid { c, .. } => (c * e, c * e_y),
            MetricClass::Helicoid { .. } => (1.0, 0.0),
        }
    }

    /// `E''` implied by the curvature law, given `E` and `E'`.
    pub fn second_derivative(&self, e: f64, e_y: f64) -> f64 {
        match *self {
            MetricClass::Catenoid { c, k0, beta } => {
                let r = e_y / e;
                e * (r * r + 2.0 * c * k0 * e.powf(1.0 - beta * beta))
            }
            MetricClass::Helicoid { k0, a } => e_y * e_y / (2.0 * e) + 2.0 * k0 * e.powf(a + 1.0),
        }
    }

    /// Full sample at `y` from the first coefficient and its slope.
    pub fn sample(&self, y: f64, e: f64, e_y: f64) -> MetricSample {
        let (g, g_y) = self.second_coefficient(e, e_y);
        let k = self.curvature(e);
        MetricSample {
            y,
            e,
            e_y,
            e_yy: self.second_derivative(e, e_y),
            f: 0.0,
            g,
            g_y,
            k,
            gamma: (-k).sqrt(),
            gamma_ratio: self.alpha() * e_y / e,
            b: e.sqrt(),
        }
    }

    /// Right-hand side of the second-order ODE for the substitution variable
    /// (`E = e^w` for catenoid, `E = w²` for helicoid).
    fn ode_rhs(&self, w: f64) -> f64 {
        match *self {
            MetricClass::Catenoid { c, k0, beta } => 2.0 * c * k0 * ((1.0 - beta * beta) * w).exp(),
            MetricClass::Helicoid { k0, a } => k0 * w.powf(2.0 * a + 1.0),
        }
    }

    fn e_from_w(&self, w: f64, w_y: f64) -> (f64, f64) {
        match self {
            MetricClass::Catenoid { .. } => {
                let e = w.exp();
                (e, e * w_y)
            }
            MetricClass::Helicoid { .. } => (w * w, 2.0 * w * w_y),
        }
    }

    /// `(w')²` as a function of `w` minus the integration constant:
    /// `(w')² = C1 + first_integral(w)`.
    fn first_integral(&self, w: f64) -> f64 {
        match *self {
            MetricClass::Catenoid { c, k0, beta } => {
                let p = beta * beta - 1.0;
                -4.0 * c * k0 / p * (-p * w).exp()
            }
            MetricClass::Helicoid { k0, a } => k0 / (a + 1.0) * w.powf(2.0 * a + 2.0),
        }
    }
}

/// Metric coefficients and curvature data at one `y` level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub y: f64,
    pub e: f64,
    pub e_y: f64,
    pub e_yy: f64,
    pub f: f64,
    pub g: f64,
    pub g_y: f64,
    /// Gauss curvature (negative for both families).
    pub k: f64,
    /// `γ = √(-K)`.
    pub gamma: f64,
    /// `γ'/γ`.
    pub gamma_ratio: f64,
    /// `B = √E`.
    pub b: f64,
}

impl MetricSample {
    /// `|g| = EG - F²`.
    pub fn det(&self) -> f64 {
        self.e * self.g - self.f * self.f
    }

    /// `B' = E'/(2B)`.
    pub fn b_y(&self) -> f64 {
        self.e_y / (2.0 * self.b)
    }
}

/// Anything that can report metric data at a given `y`.
pub trait YMetric: Send + Sync {
    fn sample(&self, y: f64) -> MetricSample;
}

/// Christoffel symbols `Γ^k_ij` (fields `g{k}_{ij}`) and their
/// curvature-rescaled counterparts (fields `t{k}_{ij}`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChristoffelSet {
    pub g1_11: f64,
    pub g2_11: f64,
    pub g1_12: f64,
    pub g2_12: f64,
    pub g1_22: f64,
    pub g2_22: f64,
    pub t1_11: f64,
    pub t2_11: f64,
    pub t1_12: f64,
    pub t2_12: f64,
    pub t1_22: f64,
    pub t2_22: f64,
}

/// Christoffel symbols for an `F = 0`, `y`-only metric.
///
/// The tilde set adds `γ_y/γ` to `Γ²₂₂` and `γ_y/(2γ)` to `Γ¹₁₂`; the
/// `γ_x` corrections vanish.
pub fn christoffels(s: &MetricSample) -> Result<ChristoffelSet> {
    if !(s.e > 0.0) || !(s.g > 0.0) {
        return Err(Error::Domain(format!("metric not positive at y = {}: E = {}, G = {}", s.y, s.e, s.g)));
    }
    let g2_22 = s.g_y / (2.0 * s.g);
    let g2_11 = -s.e_y / (2.0 * s.g);
    let g1_12 = s.e_y / (2.0 * s.e);
    Ok(ChristoffelSet {
        g1_11: 0.0,
        g2_11,
        g1_12,
        g2_12: 0.0,
        g1_22: 0.0,
        g2_22,
        t1_11: 0.0,
        t2_11: g2_11,
        t1_12: g1_12 + 0.5 * s.gamma_ratio,
        t2_12: 0.0,
        t1_22: 0.0,
        t2_22: g2_22 + s.gamma_ratio,
    })
}

/// Closed-form catenoid-type example:
/// `E = (c cosh(y/c))^{2/(β²-1)}`, `G = E / (c²(β²-1)²)`,
/// `K = -c²(β²-1) E^{-β²}`.
pub fn eval_catenoid_example(y: f64, c_shape: f64, beta: f64) -> Result<MetricSample> {
    check_catenoid_params(c_shape, beta)?;
    let p = beta * beta - 1.0;
    let t = y / c_shape;
    let e = (c_shape * t.cosh()).powf(2.0 / p);
    let log_slope = 2.0 / p * t.tanh() / c_shape;
    let sech2 = 1.0 / (t.cosh() * t.cosh());
    let e_y = e * log_slope;
    let e_yy = e * (log_slope * log_slope + 2.0 / p * sech2 / (c_shape * c_shape));
    let scale = 1.0 / (c_shape * c_shape * p * p);
    let k = -c_shape * c_shape * p * e.powf(-beta * beta);
    Ok(MetricSample {
        y,
        e,
        e_y,
        e_yy,
        f: 0.0,
        g: scale * e,
        g_y: scale * e_y,
        k,
        gamma: (-k).sqrt(),
        gamma_ratio: -0.5 * beta * beta * e_y / e,
        b: e.sqrt(),
    })
}

fn check_catenoid_params(c_shape: f64, beta: f64) -> Result<()> {
    if !(c_shape > 0.0) {
        return Err(Error::Domain(format!("catenoid shape constant must be positive, got {c_shape}")));
    }
    if (beta * beta - 1.0).abs() < f64::EPSILON {
        return Err(Error::Domain("beta^2 = 1 makes the exponent singular".into()));
    }
    if !(beta >= std::f64::consts::SQRT_2 * (1.0 - BETA_SLACK)) {
        return Err(Error::Domain(format!("beta must be >= sqrt(2), got {beta}")));
    }
    Ok(())
}

/// Closed-form helicoid example: `E = c² + y²`, `G = 1`, `K = -c²/(c²+y²)²`.
pub fn eval_helicoid_example(y: f64, c: f64) -> Result<MetricSample> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Domain(format!("helicoid constant must be nonzero, got {c}")));
    }
    let e = c * c + y * y;
    let k = -c * c / (e * e);
    Ok(MetricSample {
        y,
        e,
        e_y: 2.0 * y,
        e_yy: 2.0,
        f: 0.0,
        g: 1.0,
        g_y: 0.0,
        k,
        gamma: c.abs() / e,
        gamma_ratio: -2.0 * y / e,
        b: e.sqrt(),
    })
}

/// Values of a function on a uniform grid `start + i * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSamples {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl UniformSamples {
    pub fn from_fn(start: f64, step: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(start + i as f64 * step)).collect();
        Self { start, step, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len()
            && (self.start - other.start).abs() <= 1e-12 * (1.0 + self.start.abs())
            && (self.step - other.step).abs() <= 1e-12 * self.step.abs()
    }
}

/// Five-point first and second derivatives at node `k` (requires two
/// neighbours on either side).
fn fd5(v: &[f64], k: usize, h: f64) -> (f64, f64) {
    let (m2, m1, c, p1, p2) = (v[k - 2], v[k - 1], v[k], v[k + 1], v[k + 2]);
    let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    let d2 = (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h);
    (d1, d2)
}

fn curvature_at_node(e: &[f64], g: &[f64], k: usize, h: f64) -> f64 {
    let (e1, e2) = fd5(e, k, h);
    let (g1, _) = fd5(g, k, h);
    let p = e[k] * g[k];
    let sp = p.sqrt();
    let p1 = e1 * g[k] + e[k] * g1;
    let inner = e2 / sp - e1 * p1 / (2.0 * p * sp);
    -inner / (2.0 * sp)
}

/// Gauss curvature of `E dx² + G dy²` from tabulated `E(y)`, `G(y)`:
/// `K = -(1/(2√(EG))) d/dy (E_y/√(EG))` with fourth-order centred
/// differences. Off-node queries interpolate the nodal values cubically.
pub fn gauss_curvature_fd(e: &UniformSamples, g: &UniformSamples, y: f64) -> Result<f64> {
    if !e.same_grid(g) {
        return Err(Error::Grid("E and G tables are not on the same grid".into()));
    }
    let n = e.len();
    let h = e.step;
    if n < 5 || !(h > 0.0) {
        return Err(Error::Grid(format!("need at least 5 samples on an increasing grid, got {n}")));
    }
    let t = (y - e.start) / h;
    let nearest = t.round();
    let interior = |k: isize| k >= 2 && (k as usize) + 2 < n;
    if (t - nearest).abs() < 1e-9 {
        let k = nearest as isize;
        if !interior(k) {
            return Err(Error::Grid(format!("y = {y} has fewer than 5 samples around it")));
        }
        return Ok(curvature_at_node(&e.values, &g.values, k as usize, h));
    }
    let base = t.floor() as isize;
    let nodes = [base - 1, base, base + 1, base + 2];
    if !nodes.iter().all(|&k| interior(k)) {
        return Err(Error::Grid(format!("y = {y} has fewer than 5 samples around it")));
    }
    let s = t - base as f64;
    let w = lagrange4_weights(s);
    Ok(nodes.iter().zip(w).map(|(&k, wk)| wk * curvature_at_node(&e.values, &g.values, k as usize, h)).sum())
}

/// Curvature at every node with a full five-point stencil; boundary nodes
/// are `None`.
pub fn gauss_curvature_fd_nodes(e: &UniformSamples, g: &UniformSamples) -> Result<Vec<Option<f64>>> {
    if !e.same_grid(g) {
        return Err(Error::Grid("E and G tables are not on the same grid".into()));
    }
    let n = e.len();
    if n < 5 {
        return Err(Error::Grid(format!("need at least 5 samples, got {n}")));
    }
    Ok((0..n).map(|k| (k >= 2 && k + 2 < n).then(|| curvature_at_node(&e.values, &g.values, k, e.step))).collect())
}

/// Cubic Lagrange weights for nodes at -1, 0, 1, 2 evaluated at `s ∈ [0,1]`.
pub(crate) fn lagrange4_weights(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

/// First fundamental form coefficient tabulated on a uniform `y` grid.
///
/// Only `E` and `E'` are stored; the remaining columns follow from the
/// metric class. Off-node queries use cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub class: MetricClass,
    pub y_start: f64,
    pub step: f64,
    pub e: Vec<f64>,
    pub e_y: Vec<f64>,
}

impl MetricTable {
    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y_start + i as f64 * self.step
    }

    pub fn y_end(&self) -> f64 {
        self.y(self.len() - 1)
    }

    pub fn e_samples(&self) -> UniformSamples {
        UniformSamples { start: self.y_start, step: self.step, values: self.e.clone() }
    }

    pub fn g_samples(&self) -> UniformSamples {
        let values = self.e.iter().zip(&self.e_y).map(|(&e, &ey)| self.class.second_coefficient(e, ey).0).collect();
        UniformSamples { start: self.y_start, step: self.step, values }
    }

    /// Cubic Hermite interpolation of `(E, E')`.
    pub fn interpolate(&self, y: f64) -> (f64, f64) {
        let n = self.len();
        let h = self.step;
        let t = ((y - self.y_start) / h).clamp(0.0, (n - 1) as f64);
        let j = (t.floor() as usize).min(n - 2);
        let s = t - j as f64;
        let (e0, e1, d0, d1) = (self.e[j], self.e[j + 1], self.e_y[j], self.e_y[j + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let e = (2.0 * s3 - 3.0 * s2 + 1.0) * e0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * e1
            + (s3 - s2) * h * d1;
        let de = ((6.0 * s2 - 6.0 * s) * e0 + (-6.0 * s2 + 6.0 * s) * e1) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (3.0 * s2 - 2.0 * s) * d1;
        (e, de)
    }

    /// Plain-text column format: `# y E Ey G K gamma`, one row per node,
    /// 17 significant digits. `header` lines are emitted as `#` comments first.
    pub fn to_text(&self, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("# y E Ey G K gamma\n");
        for i in 0..self.len() {
            let s = self.class.sample(self.y(i), self.e[i], self.e_y[i]);
            let _ =
                writeln!(out, "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}", s.y, s.e, s.e_y, s.g, s.k, s.gamma);
        }
        out
    }

    /// Parses the column format back. `G`, `K` and `γ` columns are checked
    /// against `class` to relative tolerance `1e-6`.
    pub fn from_text(text: &str, class: MetricClass) -> Result<Self> {
        class.validate()?;
        let mut ys = Vec::new();
        let mut e = Vec::new();
        let mut e_y = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|err| Error::Parse(format!("line {}: {err}", lineno + 1)))?;
            if cols.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 columns, got {}", lineno + 1, cols.len())));
            }
            let s = class.sample(cols[0], cols[1], cols[2]);
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-300);
            if !rel(cols[3], s.g) || !rel(cols[4], s.k) || !rel(cols[5], s.gamma) {
                return Err(Error::Consistency(format!(
                    "line {}: G/K/gamma columns do not match the metric class",
                    lineno + 1
                )));
            }
            ys.push(cols[0]);
            e.push(cols[1]);
            e_y.push(cols[2]);
        }
        if ys.len() < 5 {
            return Err(Error::Grid(format!("table has {} rows, need at least 5", ys.len())));
        }
        let step = (ys[ys.len() - 1] - ys[0]) / (ys.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::Grid("table y column must increase".into()));
        }
        for (i, &y) in ys.iter().enumerate() {
            if (y - (ys[0] + i as f64 * step)).abs() > 1e-9 * step.max(1.0) {
                return Err(Error::Grid(format!("table row {i} is off the uniform grid")));
            }
        }
        Ok(Self { class, y_start: ys[0], step, e, e_y })
    }
}

/// Which metric the solver and immersion code run on.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricFamily {
    /// Closed-form catenoid-type example with shape constant `c_shape`.
    CatenoidType { c_shape: f64, beta: f64 },
    /// Closed-form helicoid example `E = c² + y²`.
    HelicoidType { c: f64 },
    /// Metric known on a grid (generated or loaded from file).
    Tabulated(Arc<MetricTable>),
}

/// A metric on the strip `y ∈ [-y0, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub family: MetricFamily,
    pub y0: f64,
}

impl MetricSpec {
    pub fn catenoid(c_shape: f64, beta: f64, y0: f64) -> Result<Self> {
        let spec = Self { family: MetricFamily::CatenoidType { c_shape, beta }, y0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn helicoid(c: f64, y0: f64) -> Result<Self> {
        let spec = Self { family: MetricFamily::HelicoidType { c }, y0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tabulated(table: MetricTable) -> Result<Self> {
        let y0 = -table.y_start;
        let spec = Self { family: MetricFamily::Tabulated(Arc::new(table)), y0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y0 > 0.0) {
            return Err(Error::Domain(format!("y0 must be positive, got {}", self.y0)));
        }
        match &self.family {
            MetricFamily::CatenoidType { c_shape, beta } => check_catenoid_params(*c_shape, *beta),
            MetricFamily::HelicoidType { c } => {
                if *c == 0.0 || !c.is_finite() {
                    Err(Error::Domain(format!("helicoid constant must be nonzero, got {c}")))
                } else {
                    Ok(())
                }
            }
            MetricFamily::Tabulated(t) => {
                t.class.validate()?;
                if t.len() < 5 {
                    return Err(Error::Grid("tabulated metric needs at least 5 rows".into()));
                }
                let tol = 1e-9 * t.step.max(1.0);
                if t.y_start > -self.y0 + tol || t.y_end() < -tol {
                    return Err(Error::Domain(format!(
                        "table covers [{}, {}], which does not contain [-{}, 0]",
                        t.y_start,
                        t.y_end(),
                        self.y0
                    )));
                }
                Ok(())
            }
        }
    }

    /// The structural class (coefficient relation and curvature law).
    pub fn class(&self) -> MetricClass {
        match &self.family {
            MetricFamily::CatenoidType { c_shape, beta } => {
                let p = beta * beta - 1.0;
                MetricClass::Catenoid { c: 1.0 / (c_shape * c_shape * p * p), k0: c_shape * c_shape * p, beta: *beta }
            }
            MetricFamily::HelicoidType { c } => MetricClass::Helicoid { k0: c * c, a: -2.0 },
            MetricFamily::Tabulated(t) => t.class,
        }
    }

    /// Tabulates the metric on `n` uniform nodes over `[-y0, 0]`.
    pub fn to_table(&self, n: usize) -> MetricTable {
        let step = self.y0 / (n - 1) as f64;
        let (e, e_y) = (0..n)
            .map(|i| {
                let s = self.sample(-self.y0 + i as f64 * step);
                (s.e, s.e_y)
            })
            .unzip();
        MetricTable { class: self.class(), y_start: -self.y0, step, e, e_y }
    }
}

impl YMetric for MetricSpec {
    fn sample(&self, y: f64) -> MetricSample {
        match &self.family {
            // Parameters were validated on construction.
            MetricFamily::CatenoidType { c_shape, beta } => {
                eval_catenoid_example(y, *c_shape, *beta).expect("validated catenoid parameters")
            }
            MetricFamily::HelicoidType { c } => eval_helicoid_example(y, *c).expect("validated helicoid parameters"),
            MetricFamily::Tabulated(t) => {
                let (e, e_y) = t.interpolate(y);
                t.class.sample(y, e, e_y)
            }
        }
    }
}

/// Builds `E(y)` on `[-y0, 0]` by integrating the curvature ODE backwards
/// from `y = 0` with classical RK4.
///
/// Catenoid class: `E = e^w`, `w'' = 2 c k0 e^{(1-β²) w}`.
/// Helicoid class: `E = w²`, `w'' = k0 w^{2a+1}`.
///
/// `w0`, `w0_prime` are `w(0)`, `w'(0)`. The result is re-checked against
/// the curvature law through [`gauss_curvature_fd`].
pub fn generate_metric_ode(
    class: MetricClass,
    y0: f64,
    w0: f64,
    w0_prime: f64,
    step: Option<f64>,
) -> Result<MetricTable> {
    class.validate()?;
    if !(y0 > 0.0) {
        return Err(Error::Domain(format!("y0 must be positive, got {y0}")));
    }
    if w0_prime > 0.0 {
        return Err(Error::Domain(format!("w'(0) must be <= 0 so that E' < 0 for y < 0, got {w0_prime}")));
    }
    if matches!(class, MetricClass::Helicoid { .. }) && !(w0 > 0.0) {
        return Err(Error::Domain(format!("helicoid class needs w(0) = sqrt(E(0)) > 0, got {w0}")));
    }
    let h = step.unwrap_or(y0 / DEFAULT_RESOLUTION as f64);
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let n = (y0 / h).round() as usize;
    if n < 4 || (n as f64 * h - y0).abs() > 1e-9 * y0 {
        return Err(Error::Domain(format!("step {h} does not divide the interval length {y0}")));
    }
    let h = y0 / n as f64;

    let rhs = |w: f64, p: f64| (p, class.ode_rhs(w));
    let mut w = w0;
    let mut p = w0_prime;
    let mut e = vec![0.0; n + 1];
    let mut e_y = vec![0.0; n + 1];
    let store = |i: usize, w: f64, p: f64, e: &mut [f64], e_y: &mut [f64]| -> Result<()> {
        let y = -(i as f64) * h;
        let (ev, dv) = class.e_from_w(w, p);
        let bad_w = matches!(class, MetricClass::Helicoid { .. }) && !(w > 0.0);
        if !ev.is_finite() || !dv.is_finite() || !(ev > 0.0) || bad_w {
            return Err(Error::Blowup { y });
        }
        e[n - i] = ev;
        e_y[n - i] = dv;
        Ok(())
    };
    store(0, w, p, &mut e, &mut e_y)?;
    let dt = -h;
    for i in 1..=n {
        let (k1w, k1p) = rhs(w, p);
        let (k2w, k2p) = rhs(w + 0.5 * dt * k1w, p + 0.5 * dt * k1p);
        let (k3w, k3p) = rhs(w + 0.5 * dt * k2w, p + 0.5 * dt * k2p);
        let (k4w, k4p) = rhs(w + dt * k3w, p + dt * k3p);
        w += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        store(i, w, p, &mut e, &mut e_y)?;
    }

    let table = MetricTable { class, y_start: -y0, step: h, e, e_y };
    check_curvature_law(&table)?;
    Ok(table)
}

/// Re-derives `K` from the tabulated `E`, `G` by finite differences and
/// compares with the class curvature law at interior nodes.
pub fn check_curvature_law(table: &MetricTable) -> Result<()> {
    let es = table.e_samples();
    let gs = table.g_samples();
    let k_fd = gauss_curvature_fd_nodes(&es, &gs)?;
    let h = table.step;
    for (i, kf) in k_fd.iter().enumerate() {
        let Some(kf) = *kf else { continue };
        let k = table.class.curvature(table.e[i]);
        // Roundoff floor of the five-point second difference.
        let floor = 16.0 * f64::EPSILON / (h * h * gs.values[i]);
        if (kf - k).abs() > 1e-6 * k.abs() + floor {
            return Err(Error::Consistency(format!(
                "generated metric violates K = -k0 E^p at y = {}: finite differences give {kf}, law gives {k}",
                table.y(i)
            )));
        }
    }
    Ok(())
}

/// Constant `C1` in `(w')² = C1 + I(w)` matching `w(0)`, `w'(0)`.
pub fn integration_constant(class: MetricClass, w0: f64, w0_prime: f64) -> f64 {
    w0_prime * w0_prime - class.first_integral(w0)
}

/// Tabulated inverse profile `y = h(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureProfile {
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    panels: usize,
    integrand_sq: IntegrandSq,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum IntegrandSq {
    Class { class: MetricClass, c1: f64 },
    Constant(f64),
}

impl IntegrandSq {
    fn eval(&self, w: f64) -> f64 {
        match *self {
            IntegrandSq::Class { class, c1 } => c1 + class.first_integral(w),
            IntegrandSq::Constant(v) => v,
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let m = panels.max(2) + panels % 2;
    let h = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for k in 1..m {
        let x = a + k as f64 * h;
        sum += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}

impl QuadratureProfile {
    fn build(integrand_sq: IntegrandSq, c2: f64, w_grid: &[f64]) -> Result<Self> {
        if w_grid.len() < 2 {
            return Err(Error::Grid("w grid needs at least two nodes".into()));
        }
        let increasing = w_grid[1] > w_grid[0];
        if !w_grid.windows(2).all(|p| (p[1] > p[0]) == increasing && p[1] != p[0]) {
            return Err(Error::Grid("w grid must be strictly monotone".into()));
        }
        let panels = DEFAULT_RESOLUTION.div_ceil(w_grid.len() - 1).max(2);
        let panels = panels + panels % 2;
        let mut y = Vec::with_capacity(w_grid.len());
        y.push(c2);
        for pair in w_grid.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            for k in 0..=panels {
                let w = a + (b - a) * k as f64 / panels as f64;
                let v = integrand_sq.eval(w);
                if !(v > 0.0) {
                    return Err(Error::Domain(format!("integrand argument {v} is not positive at w = {w}")));
                }
            }
            let integral = simpson(|w| 1.0 / integrand_sq.eval(w).sqrt(), a, b, panels);
            let last = *y.last().expect("nonempty");
            y.push(last - integral);
        }
        Ok(Self { w: w_grid.to_vec(), y, panels, integrand_sq })
    }

    /// `y = C2 - ∫_{w_grid[0]}^{w} dw / √(C1 + I(w))` where `(w')² = C1 + I(w)`
    /// is the first integral of the metric ODE.
    pub fn for_class(class: MetricClass, c1: f64, c2: f64, w_grid: &[f64]) -> Result<Self> {
        class.validate()?;
        Self::build(IntegrandSq::Class { class, c1 }, c2, w_grid)
    }

    /// Profile with a constant integrand argument `value` (so `dy/dw = -1/√value`).
    pub fn constant(value: f64, c2: f64, w_grid: &[f64]) -> Result<Self> {
        Self::build(IntegrandSq::Constant(value), c2, w_grid)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.w.iter().copied().zip(self.y.iter().copied())
    }

    /// Continuous `h(w)` for `w` inside the grid.
    pub fn h(&self, w: f64) -> f64 {
        let n = self.w.len();
        let increasing = self.w[1] > self.w[0];
        let mut j = 0;
        while j + 2 < n && ((increasing && self.w[j + 1] <= w) || (!increasing && self.w[j + 1] >= w)) {
            j += 1;
        }
        let integrand = |x: f64| 1.0 / self.integrand_sq.eval(x).sqrt();
        self.y[j] - simpson(integrand, self.w[j], w, self.panels)
    }

    /// `w = h⁻¹(y)` by bisection; `h` is monotone on the grid.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let (mut lo, mut hi) = (self.w[0], *self.w.last().expect("nonempty"));
        let (ylo, yhi) = (self.y[0], *self.y.last().expect("nonempty"));
        let (ymin, ymax) = if ylo < yhi { (ylo, yhi) } else { (yhi, ylo) };
        let slack = 1e-12 * (1.0 + ymax.abs());
        if y < ymin - slack || y > ymax + slack {
            return Err(Error::Domain(format!("y = {y} outside the profile range [{ymin}, {ymax}]")));
        }
        let mut flo = ylo - y;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = self.h(mid) - y;
            if fm == 0.0 {
                return Ok(mid);
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
            if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Composite-Simpson profile `y = h(w)` for the class ODE.
pub fn quadrature_profile(class: MetricClass, c1: f64, c2: f64, w_grid: &[f64]) -> Result<QuadratureProfile> {
    QuadratureProfile::for_class(class, c1, c2, w_grid)
}

/// `E` from the substitution variable.
pub fn e_from_w(class: MetricClass, w: f64) -> f64 {
    class.e_from_w(w, 0.0).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;

    #[test]
    fn catenoid_example_values() {
        let s = eval_catenoid_example(0.0, 1.0, SQRT_2).unwrap();
        assert_relative_eq!(s.e, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.g, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.k, -1.0, epsilon = 1e-15);

        let s = eval_catenoid_example(-1.0, 1.0, SQRT_2).unwrap();
        assert_relative_eq!(s.e, 2.381_097_845_541_815_7, max_relative = 1e-14);
        assert_relative_eq!(s.k, -0.176_378_447_614_134_7, max_relative = 1e-12);

        let s = eval_catenoid_example(-0.5, 1.0, 2.0).unwrap();
        let e = 0.5f64.cosh().powf(2.0 / 3.0);
        assert_relative_eq!(s.e, e, max_relative = 1e-15);
        assert_relative_eq!(s.k, -3.0 * e.powi(-4), max_relative = 1e-14);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn catenoid_example_rejects_bad_beta() {
        assert!(matches!(eval_catenoid_example(0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eval_catenoid_example(0.0, 1.0, 1.3), Err(Error::Domain(_))));
        assert!(eval_catenoid_example(0.0, 1.0, 1.414_213_5).is_ok());
        assert_eq!(snap_beta(1.414_213_5), SQRT_2);
        assert_eq!(snap_beta(1.5), 1.5);
    }

    #[test]
    fn helicoid_example_values() {
        let s = eval_helicoid_example(0.0, 1.0).unwrap();
        assert_eq!((s.e, s.k, s.b), (1.0, -1.0, 1.0));
        let s = eval_helicoid_example(-1.0, 1.0).unwrap();
        assert_eq!(s.e, 2.0);
        assert_relative_eq!(s.k, -0.25, epsilon = 1e-15);
        let s = eval_helicoid_example(-0.5, 2.0).unwrap();
        assert_relative_eq!(s.e, 4.25, epsilon = 1e-15);
        assert_relative_eq!(s.k, -0.221_453_287_197_231_84, max_relative = 1e-14);
    }

    #[test]
    fn curvature_fd_matches_closed_forms() {
        let h = 1.0 / 4096.0;
        let hel_e = UniformSamples::from_fn(-2.0, h, 8193, |y| 1.0 + y * y);
        let ones = UniformSamples::from_fn(-2.0, h, 8193, |_| 1.0);
        let k = gauss_curvature_fd(&hel_e, &ones, -1.0).unwrap();
        assert!((k + 0.25).abs() < 1e-6, "{k}");

        let cat_e = UniformSamples::from_fn(-2.0, h, 8193, |y| y.cosh().powi(2));
        let k = gauss_curvature_fd(&cat_e, &cat_e, -1.0).unwrap();
        assert!((k + 1.0f64.cosh().powi(-4)).abs() < 1e-6, "{k}");

        let k = gauss_curvature_fd(&ones, &ones, -1.0).unwrap();
        assert_eq!(k, 0.0);

        // off-node query
        let k = gauss_curvature_fd(&hel_e, &ones, -1.0 + 0.3 * h).unwrap();
        let y: f64 = -1.0 + 0.3 * h;
        assert!((k + 1.0 / (1.0 + y * y).powi(2)).abs() < 1e-6);
    }

    #[test]
    fn curvature_fd_needs_stencil() {
        let s = UniformSamples::from_fn(0.0, 0.1, 4, |y| 1.0 + y);
        assert!(matches!(gauss_curvature_fd(&s, &s, 0.1), Err(Error::Grid(_))));
        let s = UniformSamples::from_fn(0.0, 0.1, 10, |y| 1.0 + y);
        assert!(matches!(gauss_curvature_fd(&s, &s, 0.1), Err(Error::Grid(_))));
        assert!(gauss_curvature_fd(&s, &s, 0.4).is_ok());
    }

    #[test]
    fn christoffel_examples() {
        let s = eval_helicoid_example(-1.0, 1.0).unwrap();
        let c = christoffels(&s).unwrap();
        assert_relative_eq!(c.g2_11, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c.g1_12, -0.5, epsilon = 1e-15);
        assert_relative_eq!(c.t2_22, 1.0, epsilon = 1e-15);
        assert!(c.t1_12.abs() < 1e-15);
        assert_eq!((c.g1_11, c.g2_12, c.g1_22, c.g2_22), (0.0, 0.0, 0.0, 0.0));

        let s = eval_catenoid_example(-1.0, 1.0, SQRT_2).unwrap();
        let c = christoffels(&s).unwrap();
        assert_relative_eq!(c.g2_22, (-1.0f64).tanh(), max_relative = 1e-14);
        assert_relative_eq!(c.g1_12, (-1.0f64).tanh(), max_relative = 1e-14);
        assert_relative_eq!(c.g2_11, -(-1.0f64).tanh(), max_relative = 1e-14);

        let flat = MetricSample {
            y: 0.0,
            e: 1.0,
            e_y: 0.0,
            e_yy: 0.0,
            f: 0.0,
            g: 1.0,
            g_y: 0.0,
            k: 0.0,
            gamma: 0.0,
            gamma_ratio: 0.0,
            b: 1.0,
        };
        assert_eq!(christoffels(&flat).unwrap(), ChristoffelSet::default());

        let bad = MetricSample { e: 0.0, ..flat };
        assert!(matches!(christoffels(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn tilde_relations_hold() {
        for &y in &[-0.9, -0.3, -0.01] {
            for s in [eval_catenoid_example(y, 1.3, 1.7).unwrap(), eval_helicoid_example(y, 0.7).unwrap()] {
                let c = christoffels(&s).unwrap();
                assert_relative_eq!(c.t2_22, c.g2_22 + s.gamma_ratio, max_relative = 1e-14);
                assert_relative_eq!(c.t1_12, c.g1_12 + 0.5 * s.gamma_ratio, max_relative = 1e-14);
                assert_eq!(c.t1_11, c.g1_11);
                assert_eq!(c.t2_11, c.g2_11);
            }
        }
    }

    #[test]
    fn class_sample_matches_closed_forms() {
        let spec = MetricSpec::catenoid(0.8, 1.9, 1.0).unwrap();
        let class = spec.class();
        for &y in &[-1.0, -0.4, 0.0] {
            let s = spec.sample(y);
            let t = class.sample(y, s.e, s.e_y);
            assert_relative_eq!(t.g, s.g, max_relative = 1e-13);
            assert_relative_eq!(t.k, s.k, max_relative = 1e-13);
            assert_relative_eq!(t.e_yy, s.e_yy, max_relative = 1e-12);
            assert_relative_eq!(t.gamma_ratio, s.gamma_ratio, max_relative = 1e-13, epsilon = 1e-15);
        }
        let spec = MetricSpec::helicoid(1.5, 1.0).unwrap();
        let class = spec.class();
        for &y in &[-1.0, -0.4] {
            let s = spec.sample(y);
            let t = class.sample(y, s.e, s.e_y);
            assert_relative_eq!(t.k, s.k, max_relative = 1e-13);
            assert_relative_eq!(t.e_yy, s.e_yy, max_relative = 1e-13);
            assert_relative_eq!(t.gamma_ratio, s.gamma_ratio, max_relative = 1e-13);
        }
    }

    #[test]
    fn generated_helicoid_matches_example() {
        let class = MetricClass::Helicoid { k0: 1.0, a: -2.0 };
        let t = generate_metric_ode(class, 1.0, 1.0, 0.0, None).unwrap();
        let (e, _) = t.interpolate(-0.5);
        assert!((e - 1.25).abs() < 1e-6);
        for i in 0..t.len() {
            let y = t.y(i);
            assert!((t.e[i] - (1.0 + y * y)).abs() < 1e-9);
        }
    }

    #[test]
    fn generated_catenoid_matches_example() {
        let class = MetricClass::Catenoid { c: 1.0, k0: 1.0, beta: SQRT_2 };
        let t = generate_metric_ode(class, 1.0, 0.0, 0.0, None).unwrap();
        let (e, _) = t.interpolate(-0.5);
        assert!((e - 0.5f64.cosh().powi(2)).abs() < 1e-6);
    }

    #[test]
    fn generated_metric_with_vanishing_curvature_is_flat() {
        for class in
            [MetricClass::Catenoid { c: 1.0, k0: 1e-14, beta: 2.0 }, MetricClass::Helicoid { k0: 1e-14, a: -3.0 }]
        {
            let t = generate_metric_ode(class, 1.0, 1.0, 0.0, Some(1.0 / 256.0)).unwrap();
            let e0 = t.e[t.len() - 1];
            assert!(t.e.iter().all(|e| (e - e0).abs() < 1e-12));
        }
    }

    #[test]
    fn generated_metric_decreases_on_negative_y() {
        let class = MetricClass::Catenoid { c: 0.5, k0: 2.0, beta: 1.8 };
        let t = generate_metric_ode(class, 1.5, 0.3, -0.2, None).unwrap();
        assert!(t.e_y[..t.len() - 1].iter().all(|&d| d < 0.0));
    }

    #[test]
    fn generator_rejects_bad_inputs() {
        let class = MetricClass::Helicoid { k0: 1.0, a: -2.0 };
        assert!(matches!(generate_metric_ode(class, 1.0, 1.0, 0.5, None), Err(Error::Domain(_))));
        assert!(matches!(generate_metric_ode(class, 1.0, 1.0, 0.0, Some(0.3)), Err(Error::Domain(_))));
        assert!(matches!(generate_metric_ode(class, 1.0, -1.0, 0.0, None), Err(Error::Domain(_))));
        // e^w overflows long before y = -10
        let cat = MetricClass::Catenoid { c: 1.0, k0: 1.0, beta: SQRT_2 };
        let r = generate_metric_ode(cat, 10.0, 700.0, -10.0, None);
        assert!(matches!(r, Err(Error::Blowup { .. })), "{r:?}");
    }

    #[test]
    fn constant_profile_is_linear() {
        let grid: Vec<f64> = (0..11).map(|i| 0.5 + 0.1 * i as f64).collect();
        let p = QuadratureProfile::constant(1.0, 2.0, &grid).unwrap();
        for (w, y) in p.pairs() {
            assert!((y - (2.0 - (w - 0.5))).abs() < 1e-14);
        }
        assert!((p.invert(1.75).unwrap() - 0.75).abs() < 1e-13);
    }

    #[test]
    fn profile_rejects_nonpositive_integrand() {
        let class = MetricClass::Helicoid { k0: 1.0, a: -2.0 };
        // C1 = 1: integrand 1 - w^-2 vanishes at w = 1
        let grid = [0.9, 1.0, 1.1];
        assert!(matches!(quadrature_profile(class, 1.0, 0.0, &grid), Err(Error::Domain(_))));
    }

    #[test]
    fn helicoid_profile_inverts_to_example() {
        let class = MetricClass::Helicoid { k0: 1.0, a: -2.0 };
        let c1 = integration_constant(class, 1.0, 0.0);
        assert_relative_eq!(c1, 1.0, epsilon = 1e-15);
        let ys: Vec<f64> = (0..=40).map(|i| -0.2 - 0.02 * i as f64).collect();
        let grid: Vec<f64> = ys.iter().map(|y| (1.0 + y * y).sqrt()).collect();
        let p = quadrature_profile(class, c1, ys[0], &grid).unwrap();
        for (y_exact, (_, y)) in ys.iter().zip(p.pairs()) {
            assert!((y - y_exact).abs() < 1e-6, "{y} vs {y_exact}");
        }
        let w = p.invert(-0.5).unwrap();
        assert!((e_from_w(class, w) - 1.25).abs() < 1e-6);
    }

    #[test]
    fn table_text_round_trip() {
        let class = MetricClass::Helicoid { k0: 1.0, a: -3.0 };
        let t = generate_metric_ode(class, 1.0, 1.0, 0.0, Some(1.0 / 64.0)).unwrap();
        let text = t.to_text(&["metric=test".to_string()]);
        assert!(text.lines().nth(1).unwrap() == "# y E Ey G K gamma");
        let back = MetricTable::from_text(&text, class).unwrap();
        assert_eq!(back.e, t.e);
        assert_eq!(back.e_y, t.e_y);
        assert!(matches!(
            MetricTable::from_text(&text, MetricClass::Helicoid { k0: 2.0, a: -3.0 }),
            Err(Error::Consistency(_))
        ));
    }
}
