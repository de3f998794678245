//! Run configuration: SI parameters, validation, conversion to internal units
//! and the `key=value` file format.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::units::{UnitSystem, HE3_MASS_KG};

/// Which x-edge of the grid carries the sigmoidal absorber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsorberSide {
    /// The surface side (x < 0), where the transmitted wave goes.
    #[default]
    Lower,
    Upper,
}

/// Sigmoidal absorber. `None` fields are derived from the grid at validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorberConfig {
    pub enabled: bool,
    pub side: AbsorberSide,
    /// Centre of the logistic ramp, metres.
    pub center: Option<f64>,
    /// Ramp width, metres.
    pub width: Option<f64>,
}

impl Default for AbsorberConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            side: AbsorberSide::Lower,
            center: None,
            width: None,
        }
    }
}

/// Plateau detection for R(t). `None` fields are derived from the packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityConfig {
    /// Seconds.
    pub window: Option<f64>,
    /// Relative spread of R allowed over one window.
    pub tolerance: f64,
    /// Seconds.
    pub min_time: Option<f64>,
    /// Stop the run as soon as the plateau is detected.
    pub stop_early: bool,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        Self {
            window: None,
            tolerance: 1e-3,
            min_time: None,
            stop_early: true,
        }
    }
}

/// All physical and numerical parameters of one run, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub x_min: f64,
    pub x_max: f64,
    /// Corrugation period, equal to the y extent of the grid.
    pub period: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub dt: f64,
    /// Defaults to 2.2·|x0|/|v_x0|.
    pub t_max: Option<f64>,
    pub mass: f64,
    /// Interaction constant in J·m³.
    pub c3: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub cutoff: f64,
    pub sigma_x: f64,
    /// May be `f64::INFINITY` for a profile that is flat along y.
    pub sigma_y: f64,
    pub x0: f64,
    pub y0: f64,
    pub v_x0: f64,
    pub v_y0: f64,
    /// Observation stride in time steps.
    pub observe_every: usize,
    pub absorber: AbsorberConfig,
    pub stationarity: StationarityConfig,
}

impl SimConfig {
    /// Full-resolution reference parameters (³He on Au, L = 100 nm, A/L = 0.1).
    pub fn reference() -> Self {
        Self {
            x_min: -1.5e-6,
            x_max: 5.0e-6,
            period: 100e-9,
            n_x: 1 << 15,
            n_y: 1 << 7,
            dt: 5.0e-9,
            t_max: None,
            mass: HE3_MASS_KG,
            c3: 4.0e-50,
            amplitude: 10e-9,
            phase: 0.0,
            cutoff: 10e-9,
            sigma_x: 80e-9,
            sigma_y: 8e-9,
            x0: 2.0e-6,
            y0: 0.0,
            v_x0: -2.0,
            v_y0: 0.0,
            observe_every: 20,
            absorber: AbsorberConfig::default(),
            stationarity: StationarityConfig::default(),
        }
    }

    /// Scaled-down grid that runs in well under a minute on one core.
    pub fn desk() -> Self {
        Self {
            x_min: -0.75e-6,
            x_max: 2.5e-6,
            n_x: 1 << 13,
            n_y: 1 << 5,
            x0: 1.0e-6,
            ..Self::reference()
        }
    }

    /// Same as [`SimConfig::desk`] with a flat surface.
    pub fn desk_flat() -> Self {
        Self {
            amplitude: 0.0,
            ..Self::desk()
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::reference()
    }
}

/// Every quantity of a run expressed in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalParams {
    pub units: UnitSystem,
    pub hbar: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub period: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub dt: f64,
    pub t_max: f64,
    pub mass: f64,
    pub c3: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub cutoff: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub x0: f64,
    pub y0: f64,
    pub v_x0: f64,
    pub v_y0: f64,
    pub observe_every: usize,
    pub absorber_enabled: bool,
    pub absorber_side: AbsorberSide,
    pub absorber_center: f64,
    pub absorber_width: f64,
    pub stationarity_window: f64,
    pub stationarity_tolerance: f64,
    pub stationarity_min_time: f64,
    pub stop_early: bool,
}

impl InternalParams {
    /// Converts back to a fully resolved SI configuration.
    pub fn to_si(&self) -> SimConfig {
        let u = &self.units;
        SimConfig {
            x_min: u.length_to_si(self.x_min),
            x_max: u.length_to_si(self.x_max),
            period: u.length_to_si(self.period),
            n_x: self.n_x,
            n_y: self.n_y,
            dt: u.time_to_si(self.dt),
            t_max: Some(u.time_to_si(self.t_max)),
            mass: u.mass_to_si(self.mass),
            c3: u.c3_to_si(self.c3),
            amplitude: u.length_to_si(self.amplitude),
            phase: self.phase,
            cutoff: u.length_to_si(self.cutoff),
            sigma_x: u.length_to_si(self.sigma_x),
            sigma_y: u.length_to_si(self.sigma_y),
            x0: u.length_to_si(self.x0),
            y0: u.length_to_si(self.y0),
            v_x0: u.velocity_to_si(self.v_x0),
            v_y0: u.velocity_to_si(self.v_y0),
            observe_every: self.observe_every,
            absorber: AbsorberConfig {
                enabled: self.absorber_enabled,
                side: self.absorber_side,
                center: Some(u.length_to_si(self.absorber_center)),
                width: Some(u.length_to_si(self.absorber_width)),
            },
            stationarity: StationarityConfig {
                window: Some(u.time_to_si(self.stationarity_window)),
                tolerance: self.stationarity_tolerance,
                min_time: Some(u.time_to_si(self.stationarity_min_time)),
                stop_early: self.stop_early,
            },
        }
    }

    /// Kinetic energy of the mean incident momentum, internal units.
    pub fn incident_energy(&self) -> f64 {
        0.5 * self.mass * self.v_x0 * self.v_x0
    }
}

/// A configuration whose invariants hold, with all defaults resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: SimConfig,
    internal: InternalParams,
}

impl ValidatedConfig {
    /// The SI configuration with derived defaults filled in.
    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn internal(&self) -> &InternalParams {
        &self.internal
    }

    pub fn units(&self) -> &UnitSystem {
        &self.internal.units
    }
}

/// ln(1e6): logistic argument at which the absorber reaches 1e-6 of unity.
const ABSORBER_DECADES: f64 = 13.815_510_557_964_274;

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn check_finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn check_positive(field: &'static str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be > 0, got {v}")))
    }
}

/// Checks every invariant of `config` and resolves derived defaults, using
/// the default (nano) unit system.
pub fn validate(config: &SimConfig) -> Result<ValidatedConfig> {
    validate_with_units(config, UnitSystem::nano())
}

pub fn validate_with_units(config: &SimConfig, units: UnitSystem) -> Result<ValidatedConfig> {
    let c = config;
    check_finite("x_min", c.x_min)?;
    check_finite("x_max", c.x_max)?;
    if !(c.x_min < 0.0) {
        return Err(invalid("x_min", "must be negative (surface sits at x = 0)"));
    }
    if !(c.x_max > 0.0) {
        return Err(invalid("x_max", "must be positive"));
    }
    check_positive("period", c.period)?;
    if c.n_x < 8 || !c.n_x.is_power_of_two() {
        return Err(invalid(
            "n_x",
            format!("must be a power of two >= 8, got {}", c.n_x),
        ));
    }
    if c.n_y < 4 || !c.n_y.is_power_of_two() {
        return Err(invalid(
            "n_y",
            format!("must be a power of two >= 4, got {}", c.n_y),
        ));
    }
    check_positive("dt", c.dt)?;
    check_positive("mass", c.mass)?;
    check_positive("c3", c.c3)?;
    check_finite("amplitude", c.amplitude)?;
    if c.amplitude < 0.0 {
        return Err(invalid("amplitude", "must be >= 0"));
    }
    check_finite("phase", c.phase)?;
    check_positive("cutoff", c.cutoff)?;
    if !(c.amplitude + c.cutoff < c.x_max) {
        return Err(invalid(
            "cutoff",
            "amplitude + cutoff must lie inside the grid (< x_max)",
        ));
    }
    check_positive("sigma_x", c.sigma_x)?;
    if c.sigma_y.is_nan() || !(c.sigma_y > 0.0) {
        return Err(invalid(
            "sigma_y",
            format!("must be > 0, got {}", c.sigma_y),
        ));
    }
    check_finite("x0", c.x0)?;
    check_finite("y0", c.y0)?;
    check_finite("v_x0", c.v_x0)?;
    check_finite("v_y0", c.v_y0)?;
    if !(c.v_x0 < 0.0) {
        return Err(invalid(
            "v_x0",
            "must be negative (packet approaches the surface)",
        ));
    }
    let shell = c.amplitude + c.cutoff + 3.0 * c.sigma_x;
    if !(c.x0 > shell) {
        return Err(invalid(
            "x0",
            format!("packet must start outside the interaction shell: x0 > A + cutoff + 3 sigma_x = {shell:e} m"),
        ));
    }
    if !(c.x0 < c.x_max) {
        return Err(invalid("x0", "must lie inside the grid (< x_max)"));
    }
    if c.observe_every == 0 {
        return Err(invalid("observe_every", "must be >= 1"));
    }

    let t_max = match c.t_max {
        Some(t) => {
            check_positive("t_max", t)?;
            t
        }
        None => 2.2 * c.x0.abs() / c.v_x0.abs(),
    };

    let (edge, inner) = match c.absorber.side {
        AbsorberSide::Lower => (c.x_min, 0.0),
        AbsorberSide::Upper => (c.x_max, c.x0 + 3.0 * c.sigma_x),
    };
    let absorber_center = c.absorber.center.unwrap_or(0.5 * (edge + inner));
    check_finite("absorber_center", absorber_center)?;
    let absorber_width = match c.absorber.width {
        Some(w) => w,
        None => {
            let room = (absorber_center - edge)
                .abs()
                .min((inner - absorber_center).abs());
            room / (ABSORBER_DECADES + 0.2)
        }
    };
    if c.absorber.enabled {
        check_positive("absorber_width", absorber_width)?;
        let ok = match c.absorber.side {
            AbsorberSide::Lower => c.x_min < absorber_center && absorber_center < 0.0,
            AbsorberSide::Upper => inner < absorber_center && absorber_center < c.x_max,
        };
        if !ok {
            return Err(invalid(
                "absorber_center",
                "must lie strictly between the grid edge and the physical region",
            ));
        }
    }

    let speed = c.v_x0.abs();
    let window = c.stationarity.window.unwrap_or(8.0 * c.sigma_x / speed);
    check_positive("stationarity_window", window)?;
    check_positive("stationarity_tolerance", c.stationarity.tolerance)?;
    let min_time = c
        .stationarity
        .min_time
        .unwrap_or((c.x0 + 3.0 * c.sigma_x) / speed);
    check_finite("stationarity_min_time", min_time)?;
    if min_time < 0.0 {
        return Err(invalid("stationarity_min_time", "must be >= 0"));
    }

    let mut resolved = c.clone();
    resolved.t_max = Some(t_max);
    resolved.absorber.center = Some(absorber_center);
    resolved.absorber.width = Some(absorber_width);
    resolved.stationarity.window = Some(window);
    resolved.stationarity.min_time = Some(min_time);

    let internal = to_internal_with(&resolved, units);
    Ok(ValidatedConfig {
        config: resolved,
        internal,
    })
}

/// Internal-unit view of a validated configuration.
pub fn to_internal(config: &ValidatedConfig) -> InternalParams {
    config.internal.clone()
}

fn to_internal_with(c: &SimConfig, u: UnitSystem) -> InternalParams {
    InternalParams {
        units: u,
        hbar: u.hbar(),
        x_min: u.length(c.x_min),
        x_max: u.length(c.x_max),
        period: u.length(c.period),
        n_x: c.n_x,
        n_y: c.n_y,
        dt: u.time(c.dt),
        t_max: u.time(c.t_max.expect("resolved")),
        mass: u.mass(c.mass),
        c3: u.c3(c.c3),
        amplitude: u.length(c.amplitude),
        phase: c.phase,
        cutoff: u.length(c.cutoff),
        sigma_x: u.length(c.sigma_x),
        sigma_y: u.length(c.sigma_y),
        x0: u.length(c.x0),
        y0: u.length(c.y0),
        v_x0: u.velocity(c.v_x0),
        v_y0: u.velocity(c.v_y0),
        observe_every: c.observe_every,
        absorber_enabled: c.absorber.enabled,
        absorber_side: c.absorber.side,
        absorber_center: u.length(c.absorber.center.expect("resolved")),
        absorber_width: u.length(c.absorber.width.expect("resolved")),
        stationarity_window: u.time(c.stationarity.window.expect("resolved")),
        stationarity_tolerance: c.stationarity.tolerance,
        stationarity_min_time: u.time(c.stationarity.min_time.expect("resolved")),
        stop_early: c.stationarity.stop_early,
    }
}

// ---------------------------------------------------------------------------
// key=value file format

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Length,
    Time,
    Velocity,
    Mass,
    C3,
    Angle,
    Count,
    Ratio,
    Flag,
    Side,
}

impl Kind {
    /// Accepted suffixes with their SI scale, longest first.
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Length => &[
                ("nm", 1e-9),
                ("um", 1e-6),
                ("µm", 1e-6),
                ("mm", 1e-3),
                ("m", 1.0),
            ],
            Kind::Time => &[
                ("ns", 1e-9),
                ("us", 1e-6),
                ("µs", 1e-6),
                ("ms", 1e-3),
                ("s", 1.0),
            ],
            Kind::Velocity => &[("mm/s", 1e-3), ("m/s", 1.0)],
            Kind::Mass => &[("kg", 1.0)],
            Kind::C3 => &[("J*m^3", 1.0)],
            Kind::Angle => &[("rad", 1.0)],
            Kind::Count | Kind::Ratio | Kind::Flag | Kind::Side => &[],
        }
    }
}

const KEYS: &[(&str, Kind)] = &[
    ("x_min", Kind::Length),
    ("x_max", Kind::Length),
    ("period", Kind::Length),
    ("n_x", Kind::Count),
    ("n_y", Kind::Count),
    ("dt", Kind::Time),
    ("t_max", Kind::Time),
    ("mass", Kind::Mass),
    ("c3", Kind::C3),
    ("amplitude", Kind::Length),
    ("phase", Kind::Angle),
    ("cutoff", Kind::Length),
    ("sigma_x", Kind::Length),
    ("sigma_y", Kind::Length),
    ("x0", Kind::Length),
    ("y0", Kind::Length),
    ("v_x0", Kind::Velocity),
    ("v_y0", Kind::Velocity),
    ("observe_every", Kind::Count),
    ("absorber", Kind::Flag),
    ("absorber_side", Kind::Side),
    ("absorber_center", Kind::Length),
    ("absorber_width", Kind::Length),
    ("stationarity_window", Kind::Time),
    ("stationarity_tolerance", Kind::Ratio),
    ("stationarity_min_time", Kind::Time),
    ("stop_early", Kind::Flag),
];

/// Names of every key accepted by [`SimConfig::set`].
pub fn config_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}

#[derive(Debug, Clone, Copy)]
enum Value {
    Real(f64),
    Count(usize),
    Flag(bool),
    Side(AbsorberSide),
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Some((base, exp)) = s.split_once('^') {
        let base: usize = base.trim().parse().map_err(|e| format!("{e}"))?;
        let exp: u32 = exp.trim().parse().map_err(|e| format!("{e}"))?;
        base.checked_pow(exp).ok_or_else(|| "overflow".to_string())
    } else {
        s.parse().map_err(|e| format!("{e}"))
    }
}

fn parse_value(kind: Kind, raw: &str) -> std::result::Result<Value, String> {
    let s = raw.trim();
    match kind {
        Kind::Count => parse_count(s).map(Value::Count),
        Kind::Ratio => s
            .parse::<f64>()
            .map(Value::Real)
            .map_err(|e| format!("{e}")),
        Kind::Flag => match s {
            "true" | "on" | "yes" | "1" => Ok(Value::Flag(true)),
            "false" | "off" | "no" | "0" => Ok(Value::Flag(false)),
            _ => Err(format!("expected true/false, got `{s}`")),
        },
        Kind::Side => match s {
            "lower" => Ok(Value::Side(AbsorberSide::Lower)),
            "upper" => Ok(Value::Side(AbsorberSide::Upper)),
            _ => Err(format!("expected lower/upper, got `{s}`")),
        },
        _ => {
            for (suffix, scale) in kind.suffixes() {
                if let Some(num) = s.strip_suffix(suffix) {
                    let num = num.trim();
                    let v: f64 = num
                        .parse()
                        .map_err(|_| format!("`{num}` is not a number"))?;
                    return Ok(Value::Real(v * scale));
                }
            }
            let allowed: Vec<&str> = kind.suffixes().iter().map(|(s, _)| *s).collect();
            Err(format!(
                "missing or unknown unit suffix; expected one of {allowed:?}"
            ))
        }
    }
}

impl SimConfig {
    /// Applies one `key=value` assignment. `line` is reported in errors.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let kind = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, kind)| *kind)
            .ok_or_else(|| Error::UnknownKey {
                line,
                key: key.to_string(),
            })?;
        let v = parse_value(kind, value).map_err(|reason| Error::Parse {
            line,
            key: key.to_string(),
            reason,
        })?;
        let real = |v: Value| match v {
            Value::Real(r) => r,
            _ => unreachable!(),
        };
        let count = |v: Value| match v {
            Value::Count(n) => n,
            _ => unreachable!(),
        };
        let flag = |v: Value| match v {
            Value::Flag(b) => b,
            _ => unreachable!(),
        };
        match key {
            "x_min" => self.x_min = real(v),
            "x_max" => self.x_max = real(v),
            "period" => self.period = real(v),
            "n_x" => self.n_x = count(v),
            "n_y" => self.n_y = count(v),
            "dt" => self.dt = real(v),
            "t_max" => self.t_max = Some(real(v)),
            "mass" => self.mass = real(v),
            "c3" => self.c3 = real(v),
            "amplitude" => self.amplitude = real(v),
            "phase" => self.phase = real(v),
            "cutoff" => self.cutoff = real(v),
            "sigma_x" => self.sigma_x = real(v),
            "sigma_y" => self.sigma_y = real(v),
            "x0" => self.x0 = real(v),
            "y0" => self.y0 = real(v),
            "v_x0" => self.v_x0 = real(v),
            "v_y0" => self.v_y0 = real(v),
            "observe_every" => self.observe_every = count(v),
            "absorber" => self.absorber.enabled = flag(v),
            "absorber_side" => {
                if let Value::Side(s) = v {
                    self.absorber.side = s;
                }
            }
            "absorber_center" => self.absorber.center = Some(real(v)),
            "absorber_width" => self.absorber.width = Some(real(v)),
            "stationarity_window" => self.stationarity.window = Some(real(v)),
            "stationarity_tolerance" => self.stationarity.tolerance = real(v),
            "stationarity_min_time" => self.stationarity.min_time = Some(real(v)),
            "stop_early" => self.stationarity.stop_early = flag(v),
            _ => unreachable!("key table and match out of sync"),
        }
        Ok(())
    }

    /// Applies a `key=value` string such as a command-line override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| Error::Parse {
            line: 0,
            key: assignment.to_string(),
            reason: "expected key=value".into(),
        })?;
        self.set(k.trim(), v, 0)
    }

    /// Serialises every explicitly set field in the `key=value` format, with
    /// base SI suffixes so that parsing the output reproduces `self` exactly.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("x_min", format!("{:e} m", self.x_min));
        put("x_max", format!("{:e} m", self.x_max));
        put("period", format!("{:e} m", self.period));
        put("n_x", self.n_x.to_string());
        put("n_y", self.n_y.to_string());
        put("dt", format!("{:e} s", self.dt));
        if let Some(t) = self.t_max {
            put("t_max", format!("{t:e} s"));
        }
        put("mass", format!("{:e} kg", self.mass));
        put("c3", format!("{:e} J*m^3", self.c3));
        put("amplitude", format!("{:e} m", self.amplitude));
        put("phase", format!("{:e} rad", self.phase));
        put("cutoff", format!("{:e} m", self.cutoff));
        put("sigma_x", format!("{:e} m", self.sigma_x));
        put("sigma_y", format!("{:e} m", self.sigma_y));
        put("x0", format!("{:e} m", self.x0));
        put("y0", format!("{:e} m", self.y0));
        put("v_x0", format!("{:e} m/s", self.v_x0));
        put("v_y0", format!("{:e} m/s", self.v_y0));
        put("observe_every", self.observe_every.to_string());
        put("absorber", self.absorber.enabled.to_string());
        put(
            "absorber_side",
            match self.absorber.side {
                AbsorberSide::Lower => "lower".into(),
                AbsorberSide::Upper => "upper".into(),
            },
        );
        if let Some(c) = self.absorber.center {
            put("absorber_center", format!("{c:e} m"));
        }
        if let Some(w) = self.absorber.width {
            put("absorber_width", format!("{w:e} m"));
        }
        if let Some(w) = self.stationarity.window {
            put("stationarity_window", format!("{w:e} s"));
        }
        put(
            "stationarity_tolerance",
            format!("{:e}", self.stationarity.tolerance),
        );
        if let Some(t) = self.stationarity.min_time {
            put("stationarity_min_time", format!("{t:e} s"));
        }
        put("stop_early", self.stationarity.stop_early.to_string());
        s
    }
}

/// Parses a configuration file body on top of `base`. Blank lines and lines
/// starting with `#` are ignored; a key may appear at most once.
pub fn parse_config(text: &str, base: SimConfig) -> Result<SimConfig> {
    let mut cfg = base;
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            key: body.to_string(),
            reason: "expected key=value".into(),
        })?;
        let k = k.trim();
        if !seen.insert(k.to_string()) {
            return Err(Error::Parse {
                line,
                key: k.to_string(),
                reason: "duplicate key".into(),
            });
        }
        cfg.set(k, v, line)?;
    }
    Ok(cfg)
}
