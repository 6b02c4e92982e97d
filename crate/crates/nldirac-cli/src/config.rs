//! Experiment configuration: a flat key-value text format with `[section]`
//! headers, one canonical example shipped per command under `configs/`.
//!
//! Precedence: per-command defaults, then the `--config` file, then
//! command-line flags. The merged ("effective") configuration is validated
//! once, embedded into every JSON summary, and serialized back to canonical
//! text in the run record, so any artifact can be reproduced from the text
//! it carries.

use serde::Serialize;

use nldirac::grid::GridScheme;
use nldirac::nls::check_admissible;

/// How the `r_max` value is interpreted when building grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RmaxRule {
    /// `r_max` is the domain half-width in the coordinates the command
    /// works in (physical for waves, rescaled for the limiting problem).
    Fixed,
    /// `r_max` is the half-width of the rescaled domain; the physical
    /// domain grows like `r_max / ε` as the frequency approaches the mass.
    Rescaled,
    /// `r_max` is the rescaled span of a frequency sweep; the shared
    /// physical half-width is `r_max / ε_max` over the swept range.
    SweepSpan,
}

impl RmaxRule {
    pub fn as_str(self) -> &'static str {
        match self {
            RmaxRule::Fixed => "fixed",
            RmaxRule::Rescaled => "rescaled",
            RmaxRule::SweepSpan => "sweep-span",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "fixed" => Ok(RmaxRule::Fixed),
            "rescaled" => Ok(RmaxRule::Rescaled),
            "sweep-span" => Ok(RmaxRule::SweepSpan),
            other => Err(format!(
                "unknown r_max_rule '{other}' (expected fixed | rescaled | sweep-span)"
            )),
        }
    }
}

/// Grid discretization scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    UniformCentered,
    Chebyshev,
}

impl SchemeChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeChoice::UniformCentered => "uniform-centered",
            SchemeChoice::Chebyshev => "chebyshev",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "uniform-centered" => Ok(SchemeChoice::UniformCentered),
            "chebyshev" => Ok(SchemeChoice::Chebyshev),
            other => Err(format!(
                "unknown scheme '{other}' (expected uniform-centered | chebyshev)"
            )),
        }
    }

    pub fn to_library(self) -> GridScheme {
        match self {
            SchemeChoice::UniformCentered => GridScheme::UniformCentered,
            SchemeChoice::Chebyshev => GridScheme::Chebyshev,
        }
    }
}

/// Inclusive frequency range swept with `count` equally spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Numerical tolerances. `newton` bounds the accepted residual of every
/// solved profile; the remaining four drive eigenvalue classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub newton: f64,
    pub eig_real: f64,
    pub eig_imag: f64,
    pub band_margin: f64,
    pub refine_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton: 1e-7,
            eig_real: 1e-6,
            eig_imag: 1e-6,
            band_margin: 0.02,
            refine_match: 0.01,
        }
    }
}

/// The full, effective configuration of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(rename = "n")]
    pub n_dim: usize,
    pub k: u32,
    #[serde(rename = "m")]
    pub mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_range: Option<OmegaRange>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub epsilon_list: Vec<f64>,
    pub npts: usize,
    pub r_max: f64,
    pub r_max_rule: RmaxRule,
    pub scheme: SchemeChoice,
    pub tolerances: Tolerances,
    pub out_dir: String,
    pub svg: bool,
    pub refine: bool,
}

/// Per-command defaults; every field can be overridden by the config file
/// and then by flags.
pub fn default_for(command: &str) -> ExperimentConfig {
    let (npts, r_max, r_max_rule, out_dir) = match command {
        "nls" => (800, 25.0, RmaxRule::Fixed, "out/nls"),
        "wave" => (600, 25.0, RmaxRule::Rescaled, "out/wave"),
        "spectrum" => (300, 25.0, RmaxRule::Rescaled, "out/spectrum"),
        "vk" => (300, 60.0, RmaxRule::SweepSpan, "out/vk"),
        "limit" => (350, 25.0, RmaxRule::Rescaled, "out/limit"),
        other => panic!("internal error: unknown command '{other}'"),
    };
    ExperimentConfig {
        command: command.to_string(),
        n_dim: 1,
        k: 3,
        mass: 1.0,
        omega: None,
        omega_range: None,
        epsilon_list: Vec::new(),
        npts,
        r_max,
        r_max_rule,
        scheme: SchemeChoice::UniformCentered,
        tolerances: Tolerances::default(),
        out_dir: out_dir.to_string(),
        svg: false,
        refine: false,
    }
}

/// Parse `lo:hi:count`, e.g. `0.9:0.99:7`.
pub fn parse_omega_range(s: &str) -> Result<OmegaRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("omega range '{s}' is not of the form lo:hi:count"));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad range endpoint '{}'", parts[0]))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad range endpoint '{}'", parts[1]))?;
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad range count '{}'", parts[2]))?;
    Ok(OmegaRange { lo, hi, count })
}

/// Parse a comma-separated list of positive floats, e.g. `0.2,0.1,0.05`.
pub fn parse_epsilon_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let value: f64 = item
            .parse()
            .map_err(|_| format!("bad epsilon value '{item}'"))?;
        out.push(value);
    }
    if out.is_empty() {
        return Err("epsilon list is empty".into());
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("bad boolean '{other}' (expected true | false)")),
    }
}

/// Apply a config file's contents on top of `cfg`. Unknown sections or keys
/// are errors: a typo must never silently fall back to a default.
pub fn apply_text(cfg: &mut ExperimentConfig, text: &str) -> Result<(), String> {
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(format!("line {lineno}: expected 'key = value', got '{line}'"))?;
        let key = key.trim();
        let value = value.trim();
        let fail = |msg: String| format!("line {lineno}: {msg}");
        let num = |what: &str| format!("line {lineno}: bad {what} '{value}'");
        match (section.as_str(), key) {
            ("run", "command") => {
                if value != cfg.command {
                    return Err(fail(format!(
                        "config is for command '{value}' but '{}' was invoked",
                        cfg.command
                    )));
                }
            }
            ("model", "n") => cfg.n_dim = value.parse().map_err(|_| num("n"))?,
            ("model", "k") => cfg.k = value.parse().map_err(|_| num("k"))?,
            ("model", "m") => cfg.mass = value.parse().map_err(|_| num("m"))?,
            ("frequencies", "omega") => {
                cfg.omega = Some(value.parse().map_err(|_| num("omega"))?)
            }
            ("frequencies", "omega_range") => {
                cfg.omega_range = Some(parse_omega_range(value).map_err(fail)?)
            }
            ("frequencies", "epsilon_list") => {
                cfg.epsilon_list = parse_epsilon_list(value).map_err(fail)?
            }
            ("grid", "npts") => cfg.npts = value.parse().map_err(|_| num("npts"))?,
            ("grid", "r_max") => cfg.r_max = value.parse().map_err(|_| num("r_max"))?,
            ("grid", "r_max_rule") => cfg.r_max_rule = RmaxRule::parse(value).map_err(fail)?,
            ("grid", "scheme") => cfg.scheme = SchemeChoice::parse(value).map_err(fail)?,
            ("tolerances", "newton") => {
                cfg.tolerances.newton = value.parse().map_err(|_| num("newton"))?
            }
            ("tolerances", "eig_real") => {
                cfg.tolerances.eig_real = value.parse().map_err(|_| num("eig_real"))?
            }
            ("tolerances", "eig_imag") => {
                cfg.tolerances.eig_imag = value.parse().map_err(|_| num("eig_imag"))?
            }
            ("tolerances", "band_margin") => {
                cfg.tolerances.band_margin = value.parse().map_err(|_| num("band_margin"))?
            }
            ("tolerances", "refine_match") => {
                cfg.tolerances.refine_match = value.parse().map_err(|_| num("refine_match"))?
            }
            ("output", "dir") => cfg.out_dir = value.to_string(),
            ("output", "svg") => cfg.svg = parse_bool(value).map_err(fail)?,
            ("output", "refine") => cfg.refine = parse_bool(value).map_err(fail)?,
            (sec, key) => {
                return Err(fail(format!("unknown configuration key '[{sec}] {key}'")))
            }
        }
    }
    Ok(())
}

/// Serialize the effective configuration back to canonical text. The text
/// reparses to an identical configuration (round-trip property).
pub fn canonical_text(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    s.push_str("# nldirac experiment configuration (flat key-value, '#' comments)\n");
    s.push_str("[run]\n");
    s.push_str(&format!("command = {}\n\n", cfg.command));
    s.push_str("[model]\n");
    s.push_str(&format!("n = {}\n", cfg.n_dim));
    s.push_str(&format!("k = {}\n", cfg.k));
    s.push_str(&format!("m = {:?}\n\n", cfg.mass));
    s.push_str("[frequencies]\n");
    if let Some(omega) = cfg.omega {
        s.push_str(&format!("omega = {omega:?}\n"));
    }
    if let Some(r) = cfg.omega_range {
        s.push_str(&format!("omega_range = {:?}:{:?}:{}\n", r.lo, r.hi, r.count));
    }
    if !cfg.epsilon_list.is_empty() {
        let items: Vec<String> = cfg.epsilon_list.iter().map(|e| format!("{e:?}")).collect();
        s.push_str(&format!("epsilon_list = {}\n", items.join(",")));
    }
    s.push('\n');
    s.push_str("[grid]\n");
    s.push_str(&format!("npts = {}\n", cfg.npts));
    s.push_str(&format!("r_max = {:?}\n", cfg.r_max));
    s.push_str(&format!("r_max_rule = {}\n", cfg.r_max_rule.as_str()));
    s.push_str(&format!("scheme = {}\n\n", cfg.scheme.as_str()));
    s.push_str("[tolerances]\n");
    s.push_str(&format!("newton = {:?}\n", cfg.tolerances.newton));
    s.push_str(&format!("eig_real = {:?}\n", cfg.tolerances.eig_real));
    s.push_str(&format!("eig_imag = {:?}\n", cfg.tolerances.eig_imag));
    s.push_str(&format!("band_margin = {:?}\n", cfg.tolerances.band_margin));
    s.push_str(&format!("refine_match = {:?}\n\n", cfg.tolerances.refine_match));
    s.push_str("[output]\n");
    s.push_str(&format!("dir = {}\n", cfg.out_dir));
    s.push_str(&format!("svg = {}\n", cfg.svg));
    s.push_str(&format!("refine = {}\n", cfg.refine));
    s
}

/// Validate the merged configuration against the admissibility table and
/// the per-command requirements. Every failure here is a usage error.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), String> {
    check_admissible(cfg.n_dim, cfg.k).map_err(|e| e.to_string())?;
    if !(cfg.mass.is_finite() && cfg.mass > 0.0) {
        return Err(format!("mass must be positive (got {})", cfg.mass));
    }
    if cfg.npts < 16 {
        return Err(format!("npts must be at least 16 (got {})", cfg.npts));
    }
    if !(cfg.r_max.is_finite() && cfg.r_max > 0.0) {
        return Err(format!("r_max must be positive (got {})", cfg.r_max));
    }
    let t = &cfg.tolerances;
    for (name, value) in [
        ("newton", t.newton),
        ("eig_real", t.eig_real),
        ("eig_imag", t.eig_imag),
        ("band_margin", t.band_margin),
        ("refine_match", t.refine_match),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(format!("tolerance {name} must be positive (got {value})"));
        }
    }
    if cfg.out_dir.is_empty() {
        return Err("output directory must not be empty".into());
    }

    let require_rule = |allowed: &[RmaxRule]| -> Result<(), String> {
        if allowed.contains(&cfg.r_max_rule) {
            Ok(())
        } else {
            let names: Vec<&str> = allowed.iter().map(|r| r.as_str()).collect();
            Err(format!(
                "command '{}' requires r_max_rule {} (got {})",
                cfg.command,
                names.join(" | "),
                cfg.r_max_rule.as_str()
            ))
        }
    };
    let require_single_omega = || -> Result<(), String> {
        let omega = cfg
            .omega
            .ok_or(format!("command '{}' needs --omega", cfg.command))?;
        if cfg.omega_range.is_some() {
            return Err(format!(
                "command '{}' takes a single --omega, not --omega-range",
                cfg.command
            ));
        }
        if !(omega.is_finite() && omega > 0.0 && omega < cfg.mass) {
            return Err(format!(
                "frequency must satisfy 0 < omega < m (got omega = {omega}, m = {})",
                cfg.mass
            ));
        }
        Ok(())
    };

    match cfg.command.as_str() {
        "nls" => {
            require_rule(&[RmaxRule::Fixed])?;
            if cfg.omega.is_some() || cfg.omega_range.is_some() || !cfg.epsilon_list.is_empty() {
                return Err(
                    "command 'nls' takes no frequency parameters: the limiting profile is \
                     frequency-independent in rescaled coordinates"
                        .into(),
                );
            }
        }
        "wave" | "spectrum" => {
            require_rule(&[RmaxRule::Fixed, RmaxRule::Rescaled])?;
            require_single_omega()?;
            if !cfg.epsilon_list.is_empty() {
                return Err(format!(
                    "command '{}' takes --omega, not --epsilon-list",
                    cfg.command
                ));
            }
        }
        "vk" => {
            require_rule(&[RmaxRule::SweepSpan])?;
            let r = cfg
                .omega_range
                .ok_or("command 'vk' needs --omega-range LO:HI:COUNT")?;
            if cfg.omega.is_some() || !cfg.epsilon_list.is_empty() {
                return Err("command 'vk' takes --omega-range only".into());
            }
            if !(r.lo.is_finite() && r.hi.is_finite())
                || r.lo <= 0.0
                || r.lo > r.hi
                || r.hi >= cfg.mass
            {
                return Err(format!(
                    "frequency range must satisfy 0 < lo <= hi < m (got [{}, {}], m = {})",
                    r.lo, r.hi, cfg.mass
                ));
            }
            if r.count == 0 {
                return Err("sweep needs at least one point".into());
            }
            if r.count > 1 && r.lo == r.hi {
                return Err("multi-point sweep needs a nondegenerate frequency range".into());
            }
        }
        "limit" => {
            require_rule(&[RmaxRule::Rescaled])?;
            if cfg.epsilon_list.is_empty() {
                return Err("command 'limit' needs --epsilon-list E1,E2,...".into());
            }
            if cfg.omega.is_some() || cfg.omega_range.is_some() {
                return Err("command 'limit' takes --epsilon-list, not frequencies".into());
            }
            for &eps in &cfg.epsilon_list {
                if !(eps.is_finite() && eps > 0.0 && eps < cfg.mass) {
                    return Err(format!(
                        "every epsilon must satisfy 0 < epsilon < m (got {eps}, m = {})",
                        cfg.mass
                    ));
                }
            }
        }
        other => return Err(format!("unknown command '{other}'")),
    }
    Ok(())
}
