//! Flat `section.key = value` run configurations.
//!
//! Scientific runs carry ~20 parameters, so the batch front end reads them
//! from a config file instead of positional flags. Unknown keys are hard
//! errors: a silently ignored typo in a convergence study is worse than a
//! failed run. `#` starts a comment; values may be double-quoted.
//!
//! Recognized keys (defaults in parentheses):
//!
//! ```text
//! geometry.a            body width, required
//! geometry.l            rod length, required
//! geometry.h            relative rod thickness in (0,1), required
//! geometry.n            rod count, required
//! geometry.gamma        top boundary expression in x1 ("1")
//! geometry.nx_rod       element columns per rod width (4)
//! geometry.ny_rod       element rows per rod length (32)
//! geometry.ny_body      element rows through the body (16)
//! data.f                volume load expression, required
//! data.g                obstacle expression, required
//! data.d                Signorini density expression, required
//! data.g_mode           standard | unconstrained (standard)
//! solver.method         psor | pdas (pdas)
//! solver.omega          PSOR relaxation (1.5)
//! solver.tol            update tolerance (1e-10)
//! solver.tol_kkt        KKT tolerance (1e-8 * (1 + |b|_inf))
//! solver.max_iter       iteration cap (200*dim PSOR, 50 PDAS)
//! run.n_list            comma-separated rod counts (empty)
//! run.output_dir        artifact directory (overridden by --out)
//! run.threshold         pass bound of the check commands (1e-8)
//! run.v_exprs           semicolon-separated fields for identity-check
//! run.test_functions    semicolon-separated battery override
//! run.limit_refine      limit-mesh refinement multiple (4)
//! run.oracle_m          1D oracle interval count (4096)
//! ```

use std::path::PathBuf;

use crate::expr::{parse_expression, Expr, ParseError};
use crate::geometry::JunctionConfig;
use crate::problem_data::{GMode, ProblemData};
use crate::vi_solver::{Method, SolverOptions};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected 'section.key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("key '{key}': {message}")]
    BadValue { key: String, message: String },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("key '{key}': {source}")]
    Expr {
        key: String,
        #[source]
        source: ParseError,
    },
    #[error("run.n_list must be strictly increasing positive integers")]
    BadNList,
}

/// A fully parsed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: JunctionConfig,
    pub data: ProblemData,
    pub method: Method,
    pub solver: SolverOptions,
    pub n_list: Vec<usize>,
    pub output_dir: Option<PathBuf>,
    pub threshold: f64,
    pub v_exprs: Vec<(String, Expr)>,
    pub test_functions: Option<Vec<(String, Expr)>>,
    pub limit_refine: usize,
    pub oracle_m: usize,
}

fn unquote(value: &str) -> &str {
    let v = value.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        message: format!("'{value}' is not a number"),
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        message: format!("'{value}' is not a non-negative integer"),
    })
}

fn parse_expr_value(key: &str, value: &str) -> Result<Expr, ConfigError> {
    parse_expression(value).map_err(|source| ConfigError::Expr {
        key: key.to_string(),
        source,
    })
}

fn parse_expr_list(key: &str, value: &str) -> Result<Vec<(String, Expr)>, ConfigError> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_expr_value(key, s).map(|e| (s.to_string(), e)))
        .collect()
}

/// Parse a configuration from text. See the module docs for the key table.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut a = None;
    let mut l = None;
    let mut h = None;
    let mut n = None;
    let mut gamma = None;
    let mut nx_rod = 4usize;
    let mut ny_rod = 32usize;
    let mut ny_body = 16usize;
    let mut f = None;
    let mut g = None;
    let mut d = None;
    let mut g_mode = GMode::Standard;
    let mut method = Method::Pdas;
    let mut solver = SolverOptions::default();
    let mut n_list = Vec::new();
    let mut output_dir = None;
    let mut threshold = 1e-8;
    let mut v_exprs = Vec::new();
    let mut test_functions = None;
    let mut limit_refine = 4usize;
    let mut oracle_m = 4096usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            text: raw.trim().to_string(),
        })?;
        let key = key.trim();
        let value = unquote(value);
        match key {
            "geometry.a" => a = Some(parse_f64(key, value)?),
            "geometry.l" => l = Some(parse_f64(key, value)?),
            "geometry.h" => h = Some(parse_f64(key, value)?),
            "geometry.n" => n = Some(parse_usize(key, value)?),
            "geometry.gamma" => gamma = Some(parse_expr_value(key, value)?),
            "geometry.nx_rod" => nx_rod = parse_usize(key, value)?,
            "geometry.ny_rod" => ny_rod = parse_usize(key, value)?,
            "geometry.ny_body" => ny_body = parse_usize(key, value)?,
            "data.f" => f = Some(parse_expr_value(key, value)?),
            "data.g" => g = Some(parse_expr_value(key, value)?),
            "data.d" => d = Some(parse_expr_value(key, value)?),
            "data.g_mode" => {
                g_mode = match value {
                    "standard" => GMode::Standard,
                    "unconstrained" => GMode::Unconstrained,
                    other => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            message: format!("'{other}' is not standard|unconstrained"),
                        })
                    }
                }
            }
            "solver.method" => {
                method = value.parse().map_err(|e: String| ConfigError::BadValue {
                    key: key.to_string(),
                    message: e,
                })?
            }
            "solver.omega" => solver.omega = parse_f64(key, value)?,
            "solver.tol" => solver.tol = parse_f64(key, value)?,
            "solver.tol_kkt" => solver.tol_kkt = Some(parse_f64(key, value)?),
            "solver.max_iter" => {
                let v = parse_usize(key, value)?;
                solver.max_iter = if v == 0 { None } else { Some(v) };
            }
            "run.n_list" => {
                n_list = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_usize(key, s))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            "run.output_dir" => output_dir = Some(PathBuf::from(value)),
            "run.threshold" => threshold = parse_f64(key, value)?,
            "run.v_exprs" => v_exprs = parse_expr_list(key, value)?,
            "run.test_functions" => test_functions = Some(parse_expr_list(key, value)?),
            "run.limit_refine" => limit_refine = parse_usize(key, value)?,
            "run.oracle_m" => oracle_m = parse_usize(key, value)?,
            other => {
                return Err(ConfigError::UnknownKey {
                    line: line_no,
                    key: other.to_string(),
                })
            }
        }
    }

    if n_list.iter().any(|&n| n == 0) || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::BadNList);
    }

    let geometry = JunctionConfig {
        a: a.ok_or(ConfigError::MissingKey("geometry.a"))?,
        l: l.ok_or(ConfigError::MissingKey("geometry.l"))?,
        h: h.ok_or(ConfigError::MissingKey("geometry.h"))?,
        n_rods: n.ok_or(ConfigError::MissingKey("geometry.n"))?,
        gamma: gamma.unwrap_or_else(|| parse_expression("1").unwrap()),
        nx_rod,
        ny_rod,
        ny_body,
    };
    let data = ProblemData::new(
        f.ok_or(ConfigError::MissingKey("data.f"))?,
        g.ok_or(ConfigError::MissingKey("data.g"))?,
        d.ok_or(ConfigError::MissingKey("data.d"))?,
        g_mode,
    );
    Ok(RunConfig {
        geometry,
        data,
        method,
        solver,
        n_list,
        output_dir,
        threshold,
        v_exprs,
        test_functions,
        limit_refine,
        oracle_m,
    })
}

/// Read and parse a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
