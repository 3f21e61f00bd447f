//! Flat `key = value` run configuration.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use codazzi_core::invariant_region::InvariantRegion;
use codazzi_core::metric_lab::{generate_metric_ode, snap_beta, MetricClass, MetricSpec, MetricTable};
use codazzi_core::solver::{region_for, Scheme, SolverConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricKind {
    /// Closed-form catenoid-type metric, parametrized by the class `c` and `β`.
    Catenoid,
    /// Closed-form helicoid-type metric `E = c² + y²`.
    Helicoid,
    /// Catenoid class integrated from `(w0, w0')`.
    OdeCatenoid,
    /// Helicoid class integrated from `(w0, w0')`.
    OdeHelicoid,
    /// Table file as written by `codazzi metric`, read with class `table_class`.
    Tabulated(String),
}

impl MetricKind {
    fn name(&self) -> String {
        match self {
            MetricKind::Catenoid => "catenoid".into(),
            MetricKind::Helicoid => "helicoid".into(),
            MetricKind::OdeCatenoid => "ode-catenoid".into(),
            MetricKind::OdeHelicoid => "ode-helicoid".into(),
            MetricKind::Tabulated(p) => format!("tabulated:{p}"),
        }
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "catenoid" => MetricKind::Catenoid,
            "helicoid" => MetricKind::Helicoid,
            "ode-catenoid" => MetricKind::OdeCatenoid,
            "ode-helicoid" => MetricKind::OdeHelicoid,
            _ => match s.strip_prefix("tabulated:") {
                Some(p) if !p.is_empty() => MetricKind::Tabulated(p.into()),
                _ => {
                    return Err(format!(
                        "unknown metric `{s}` (catenoid, helicoid, ode-catenoid, ode-helicoid, tabulated:PATH)"
                    ))
                }
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitKind {
    /// The spatially constant state fixed by the sources.
    Stationary,
    /// Stationary state plus one Fourier mode.
    Perturbed,
    /// Smooth seeded field filling the invariant region.
    Random,
    /// A stored level in the state-field text format.
    File(String),
}

impl InitKind {
    fn name(&self) -> String {
        match self {
            InitKind::Stationary => "stationary".into(),
            InitKind::Perturbed => "perturbed".into(),
            InitKind::Random => "random".into(),
            InitKind::File(p) => format!("file:{p}"),
        }
    }
}

impl FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "stationary" => InitKind::Stationary,
            "perturbed" => InitKind::Perturbed,
            "random" => InitKind::Random,
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => InitKind::File(p.into()),
                _ => return Err(format!("unknown init `{s}` (stationary, perturbed, perturb:AMP, random, file:PATH)")),
            },
        })
    }
}

/// Structural class assumed for a tabulated metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableClass {
    Catenoid,
    Helicoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub metric: MetricKind,
    pub table_class: TableClass,
    pub beta: f64,
    pub c: f64,
    pub k0: f64,
    pub a: f64,
    /// `None` selects `0` for catenoid classes and `1` for helicoid classes.
    pub w0: Option<f64>,
    pub w0p: f64,
    pub y0: f64,
    pub eps: f64,
    pub nx: usize,
    pub period: f64,
    pub cfl_advect: f64,
    pub cfl_source: f64,
    pub mollifier: Option<f64>,
    pub v_floor: f64,
    pub scheme: Scheme,
    pub delta: Option<f64>,
    pub init: InitKind,
    pub amplitude: f64,
    pub mode: u32,
    pub seed: u64,
    pub levels: usize,
    pub prefix: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metric: MetricKind::Catenoid,
            table_class: TableClass::Catenoid,
            beta: std::f64::consts::SQRT_2,
            c: 1.0,
            k0: 1.0,
            a: -2.0,
            w0: None,
            w0p: 0.0,
            y0: 1.0,
            eps: 1e-3,
            nx: 256,
            period: TAU,
            cfl_advect: 0.4,
            cfl_source: 0.25,
            mollifier: None,
            v_floor: 1e-8,
            scheme: Scheme::SemiImplicit,
            delta: None,
            init: InitKind::Perturbed,
            amplitude: 0.1,
            mode: 1,
            seed: 0,
            levels: 5,
            prefix: "run".into(),
        }
    }
}

/// Every recognized key, in serialization order.
pub const KEYS: &[&str] = &[
    "metric",
    "table_class",
    "beta",
    "c",
    "k0",
    "a",
    "w0",
    "w0p",
    "y0",
    "eps",
    "nx",
    "period",
    "cfl_advect",
    "cfl_source",
    "mollifier",
    "v_floor",
    "scheme",
    "delta",
    "init",
    "amplitude",
    "mode",
    "seed",
    "levels",
    "prefix",
];

fn auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

fn normalize_key(key: &str) -> String {
    let k = key.trim().to_ascii_lowercase().replace('-', "_");
    match k.as_str() {
        "epsilon" => "eps".into(),
        "w0_prime" => "w0p".into(),
        "out" => "prefix".into(),
        _ => k,
    }
}

/// One `key = value` assignment with a location for error messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub key: String,
    pub value: String,
    pub origin: String,
}

/// Splits a config file into assignments; `#` starts a comment.
pub fn parse_config_text(text: &str, source: &str) -> Result<Vec<Assignment>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{source}:{}", no + 1);
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{origin}: expected `key = value`, got `{line}`")))?;
        out.push(Assignment { key: k.trim().to_string(), value: v.trim().to_string(), origin });
    }
    Ok(out)
}

fn parse_num<T: FromStr>(a: &Assignment) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    a.value
        .parse::<T>()
        .map_err(|e| CliError::Config(format!("{}: bad value `{}` for `{}`: {e}", a.origin, a.value, a.key)))
}

fn parse_auto(a: &Assignment) -> Result<Option<f64>, CliError> {
    if a.value == "auto" {
        Ok(None)
    } else {
        parse_num(a).map(Some)
    }
}

impl RunConfig {
    /// Defaults overridden by `assignments` in order; unknown keys are errors.
    pub fn from_assignments(assignments: &[Assignment]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for a in assignments {
            let key = normalize_key(&a.key);
            let bad = |msg: String| CliError::Config(format!("{}: {msg}", a.origin));
            match key.as_str() {
                "metric" => cfg.metric = a.value.parse().map_err(bad)?,
                "table_class" => {
                    cfg.table_class = match a.value.as_str() {
                        "catenoid" => TableClass::Catenoid,
                        "helicoid" => TableClass::Helicoid,
                        other => return Err(bad(format!("unknown table class `{other}` (catenoid, helicoid)"))),
                    }
                }
                "beta" => cfg.beta = parse_num(a)?,
                "c" => cfg.c = parse_num(a)?,
                "k0" => cfg.k0 = parse_num(a)?,
                "a" => cfg.a = parse_num(a)?,
                "w0" => cfg.w0 = parse_auto(a)?,
                "w0p" => cfg.w0p = parse_num(a)?,
                "y0" => cfg.y0 = parse_num(a)?,
                "eps" => cfg.eps = parse_num(a)?,
                "nx" => cfg.nx = parse_num(a)?,
                "period" => cfg.period = parse_num(a)?,
                "cfl_advect" => cfg.cfl_advect = parse_num(a)?,
                "cfl_source" => cfg.cfl_source = parse_num(a)?,
                "mollifier" => cfg.mollifier = parse_auto(a)?,
                "v_floor" => cfg.v_floor = parse_num(a)?,
                "scheme" => {
                    cfg.scheme = match a.value.as_str() {
                        "semi-implicit" => Scheme::SemiImplicit,
                        "explicit" => Scheme::FullyExplicit,
                        other => return Err(bad(format!("unknown scheme `{other}` (semi-implicit, explicit)"))),
                    }
                }
                "delta" => cfg.delta = parse_auto(a)?,
                "init" => match a.value.strip_prefix("perturb:") {
                    Some(amp) => {
                        cfg.init = InitKind::Perturbed;
                        cfg.amplitude =
                            amp.parse().map_err(|e| bad(format!("bad amplitude `{amp}` in `{}`: {e}", a.value)))?;
                    }
                    None => cfg.init = a.value.parse().map_err(bad)?,
                },
                "amplitude" => cfg.amplitude = parse_num(a)?,
                "mode" => cfg.mode = parse_num(a)?,
                "seed" => cfg.seed = parse_num(a)?,
                "levels" => cfg.levels = parse_num(a)?,
                "prefix" => cfg.prefix = a.value.clone(),
                _ => return Err(bad(format!("unknown key `{}`", a.key))),
            }
        }
        Ok(cfg)
    }

    /// Serialized form, one `key = value` per entry of [`KEYS`].
    pub fn to_lines(&self) -> Vec<String> {
        let scheme = match self.scheme {
            Scheme::SemiImplicit => "semi-implicit",
            Scheme::FullyExplicit => "explicit",
        };
        let values: Vec<String> = vec![
            self.metric.name(),
            match self.table_class {
                TableClass::Catenoid => "catenoid".into(),
                TableClass::Helicoid => "helicoid".into(),
            },
            self.beta.to_string(),
            self.c.to_string(),
            self.k0.to_string(),
            self.a.to_string(),
            auto(self.w0),
            self.w0p.to_string(),
            self.y0.to_string(),
            self.eps.to_string(),
            self.nx.to_string(),
            self.period.to_string(),
            self.cfl_advect.to_string(),
            self.cfl_source.to_string(),
            auto(self.mollifier),
            self.v_floor.to_string(),
            scheme.into(),
            auto(self.delta),
            self.init.name(),
            self.amplitude.to_string(),
            self.mode.to_string(),
            self.seed.to_string(),
            self.levels.to_string(),
            self.prefix.clone(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}")).collect()
    }

    /// Recovers a config from `# key = value` comment lines of an output file.
    pub fn from_header(text: &str, source: &str) -> Result<Self, CliError> {
        let mut assignments = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let Some(body) = line.strip_prefix("# ") else { continue };
            if let Some((k, v)) = body.split_once(" = ") {
                if KEYS.contains(&k.trim()) {
                    assignments.push(Assignment {
                        key: k.trim().into(),
                        value: v.trim().into(),
                        origin: format!("{source}:{}", no + 1),
                    });
                }
            }
        }
        if assignments.is_empty() {
            return Err(CliError::Config(format!("{source}: no configuration header found")));
        }
        Self::from_assignments(&assignments)
    }

    fn w0_value(&self) -> f64 {
        self.w0.unwrap_or(match self.metric {
            MetricKind::OdeHelicoid => 1.0,
            _ => 0.0,
        })
    }

    pub fn metric_spec(&self) -> Result<MetricSpec, CliError> {
        let adm = |e: codazzi_core::Error| CliError::Admissibility(e.to_string());
        match &self.metric {
            MetricKind::Catenoid => {
                let beta = snap_beta(self.beta);
                let b2 = beta * beta - 1.0;
                if !(self.c > 0.0) || !(b2 > 0.0) {
                    return Err(CliError::Admissibility(format!(
                        "catenoid metric needs c > 0 and beta > 1, got c = {}, beta = {}",
                        self.c, self.beta
                    )));
                }
                let c_shape = 1.0 / (self.c.sqrt() * b2);
                MetricSpec::catenoid(c_shape, beta, self.y0).map_err(adm)
            }
            MetricKind::Helicoid => MetricSpec::helicoid(self.c, self.y0).map_err(adm),
            MetricKind::OdeCatenoid | MetricKind::OdeHelicoid => {
                let class = if self.metric == MetricKind::OdeCatenoid {
                    MetricClass::Catenoid { c: self.c, k0: self.k0, beta: snap_beta(self.beta) }
                } else {
                    MetricClass::Helicoid { k0: self.k0, a: self.a }
                };
                let table = generate_metric_ode(class, self.y0, self.w0_value(), self.w0p, None).map_err(adm)?;
                MetricSpec::tabulated(table).map_err(adm)
            }
            MetricKind::Tabulated(path) => {
                let class = match self.table_class {
                    TableClass::Catenoid => {
                        MetricClass::Catenoid { c: self.c, k0: self.k0, beta: snap_beta(self.beta) }
                    }
                    TableClass::Helicoid => MetricClass::Helicoid { k0: self.k0, a: self.a },
                };
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read metric table {path}: {e}")))?;
                let table = MetricTable::from_text(&text, class).map_err(adm)?;
                if (table.y_start + self.y0).abs() > 1e-9 * self.y0.max(1.0) {
                    return Err(CliError::Config(format!(
                        "metric table {path} starts at y = {}, but y0 = {}",
                        table.y_start, self.y0
                    )));
                }
                MetricSpec::tabulated(table).map_err(adm)
            }
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            x_period: self.period,
            cfl_advect: self.cfl_advect,
            cfl_source: self.cfl_source,
            mollifier_width: self.mollifier,
            v_floor: self.v_floor,
            scheme: self.scheme,
            delta: self.delta,
            ..SolverConfig::new(self.eps, self.nx, self.y0)
        }
    }

    /// Checks family admissibility, `δ` and the solver parameters.
    pub fn validate(&self) -> Result<(MetricSpec, InvariantRegion), CliError> {
        if self.levels == 0 {
            return Err(CliError::Config("levels must be at least 1".into()));
        }
        if self.mode == 0 {
            return Err(CliError::Config("mode must be at least 1".into()));
        }
        let metric = self.metric_spec()?;
        let region = region_for(&metric, self.delta).map_err(|e| CliError::Admissibility(e.to_string()))?;
        self.solver_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok((metric, region))
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.to_lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
