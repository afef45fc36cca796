//! Flat `section.key = value` experiment files.
//!
//! Values are numbers, bare or quoted strings, lists `[a, b, c]` and lists of
//! tuples `[(1, 0.5, 0), (2, 0, 0.1)]`. `#` starts a comment.

use displab::potentials::{Atom, SeparablePotential, SpatialPotential, TimeProfile};
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("duplicate config key `{0}`")]
    Duplicate(String),
    #[error("config key `{key}`: {msg}")]
    BadValue { key: String, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
    List(Vec<Value>),
    Tuple(Vec<f64>),
}

impl Value {
    fn canonical(&self) -> String {
        match self {
            Value::Num(x) => format!("{x:e}"),
            Value::Str(s) => format!("{s:?}"),
            Value::List(v) => format!("[{}]", v.iter().map(Value::canonical).collect::<Vec<_>>().join(", ")),
            Value::Tuple(v) => format!("({})", v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ")),
        }
    }
}

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "space.kind",
    "space.amplitude",
    "space.width",
    "space.radius",
    "space.eps",
    "space.breakpoints",
    "space.values",
    "time.atoms",
    "grid.n",
    "grid.L",
    "solver.s",
    "solver.dt",
    "solver.t_final",
    "solver.snap_every",
    "initial.a",
    "initial.center",
    "sweep.family",
    "sweep.count",
    "thresholds.c0",
    "thresholds.constants",
    "born.x",
    "born.y",
    "stein_tomas.lambdas",
    "stein_tomas.width",
    "stein_tomas.support",
];

/// Parsed key/value map; every key is validated against [`KNOWN_KEYS`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Value>,
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::Syntax { line: self.line, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn atom(&mut self) -> Result<String, ConfigError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && !b",[]()".contains(&self.s[self.pos]) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap().trim().to_string();
        if text.is_empty() {
            return Err(self.err("empty value"));
        }
        Ok(text)
    }

    fn number(&mut self) -> Result<f64, ConfigError> {
        let a = self.atom()?;
        a.parse().map_err(|_| self.err(format!("`{a}` is not a number")))
    }

    /// Comma-separated items up to `close`, each parsed by `item`.
    fn items<T>(&mut self, close: u8, mut item: impl FnMut(&mut Self) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
        let mut out = Vec::new();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.err(format!("expected `,` or `{}`", close as char))),
            }
        }
    }

    fn value(&mut self) -> Result<Value, ConfigError> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                Ok(Value::List(self.items(b']', |c| c.value())?))
            }
            Some(b'(') => {
                self.pos += 1;
                Ok(Value::Tuple(self.items(b')', |c| c.number())?))
            }
            Some(b'"') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos] != b'"' {
                    self.pos += 1;
                }
                if self.pos == self.s.len() {
                    return Err(self.err("unterminated string"));
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                self.pos += 1;
                Ok(Value::Str(text))
            }
            Some(_) => {
                let a = self.atom()?;
                Ok(a.parse::<f64>().map(Value::Num).unwrap_or(Value::Str(a)))
            }
            None => Err(self.err("missing value")),
        }
    }
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1, msg: "expected `key = value`".into() })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            let mut c = Cursor { s: rest.as_bytes(), pos: 0, line: i + 1 };
            let value = c.value()?;
            if c.peek().is_some() {
                return Err(c.err("trailing characters after value"));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Duplicate(key));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical `key = value` listing, lowercase hex.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(format!("{k} = {}\n", v.canonical()).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn bad(key: &str, msg: &str) -> ConfigError {
        ConfigError::BadValue { key: key.into(), msg: msg.into() }
    }

    pub fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Num(x)) => Ok(Some(*x)),
            Some(_) => Err(Self::bad(key, "expected a number")),
        }
    }

    pub fn num_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.num(key)? {
            None => Ok(default),
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e15 => Ok(x as usize),
            Some(_) => Err(Self::bad(key, "expected a nonnegative integer")),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Str(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Self::bad(key, "expected a string")),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::List(v)) => v
                .iter()
                .map(|x| match x {
                    Value::Num(x) => Ok(*x),
                    _ => Err(Self::bad(key, "expected a list of numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(Self::bad(key, "expected a list")),
        }
    }

    pub fn point(&self, key: &str, default: [f64; 3]) -> Result<[f64; 3], ConfigError> {
        match self.list(key)? {
            None => Ok(default),
            Some(v) if v.len() == 3 => Ok([v[0], v[1], v[2]]),
            Some(_) => Err(Self::bad(key, "expected three coordinates")),
        }
    }

    pub fn tuples(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::List(v)) => v
                .iter()
                .map(|x| match x {
                    Value::Tuple(t) => Ok(t.clone()),
                    _ => Err(Self::bad(key, "expected a list of tuples")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(Self::bad(key, "expected a list of tuples")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBlock {
    pub n: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverBlock {
    pub s: f64,
    pub dt: f64,
    pub t_final: f64,
    pub snap_every: usize,
}

/// Fully validated experiment description. Missing blocks take defaults.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub potential: SeparablePotential,
    pub grid: GridBlock,
    pub solver: SolverBlock,
    pub initial_a: f64,
    pub initial_center: [f64; 3],
    pub sweep_family: Option<String>,
    pub sweep_count: usize,
    pub c0: f64,
    pub constants: Option<String>,
    pub born_x: [f64; 3],
    pub born_y: [f64; 3],
    pub st_lambdas: Vec<f64>,
    pub st_width: f64,
    pub st_support: f64,
    pub seed: Option<u64>,
    pub hash: String,
}

fn spatial(raw: &RawConfig) -> Result<SpatialPotential, ConfigError> {
    let kind = raw.string("space.kind")?.unwrap_or_else(|| "gaussian".into());
    let amp = raw.num_or("space.amplitude", 0.1)?;
    let built = match kind.as_str() {
        "gaussian" => SpatialPotential::gaussian(amp, raw.num_or("space.width", 1.0)?),
        "ball" => SpatialPotential::ball(amp, raw.num_or("space.radius", 1.0)?),
        "inverse_power" => SpatialPotential::inverse_power(amp, raw.num_or("space.eps", 1.0)?),
        "piecewise" => {
            let b = raw.list("space.breakpoints")?.ok_or_else(|| RawConfig::bad("space.breakpoints", "required for piecewise"))?;
            let v = raw.list("space.values")?.ok_or_else(|| RawConfig::bad("space.values", "required for piecewise"))?;
            SpatialPotential::piecewise(b, v)
        }
        other => return Err(RawConfig::bad("space.kind", &format!("unknown profile `{other}`"))),
    };
    built.map_err(|e| RawConfig::bad("space", &e.to_string()))
}

fn time_profile(raw: &RawConfig) -> Result<TimeProfile, ConfigError> {
    let Some(atoms) = raw.tuples("time.atoms")? else {
        return Ok(TimeProfile::constant());
    };
    let atoms = atoms
        .into_iter()
        .map(|t| match t.as_slice() {
            [f, re, im] => Ok(Atom::new(*f, Complex64::new(*re, *im))),
            _ => Err(RawConfig::bad("time.atoms", "each atom is (freq, re, im)")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    TimeProfile::new(atoms).map_err(|e| RawConfig::bad("time.atoms", &e.to_string()))
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let potential = SeparablePotential::new(time_profile(raw)?, spatial(raw)?).map_err(|e| RawConfig::bad("time.atoms", &e.to_string()))?;
        let n = raw.count_or("grid.n", 64)?;
        if n < 16 || !n.is_power_of_two() {
            return Err(RawConfig::bad("grid.n", "must be a power of two, at least 16"));
        }
        let half_width = raw.num_or("grid.L", 20.0)?;
        if !(half_width > 0.0) {
            return Err(RawConfig::bad("grid.L", "must be positive"));
        }
        let solver = SolverBlock {
            s: raw.num_or("solver.s", 0.0)?,
            dt: raw.num_or("solver.dt", 0.05)?,
            t_final: raw.num_or("solver.t_final", 4.0)?,
            snap_every: raw.count_or("solver.snap_every", 20)?,
        };
        if !(solver.dt > 0.0) || solver.snap_every == 0 {
            return Err(RawConfig::bad("solver", "dt must be positive and snap_every at least 1"));
        }
        let initial_a = raw.num_or("initial.a", 1.0)?;
        if !(initial_a > 0.0) {
            return Err(RawConfig::bad("initial.a", "must be positive"));
        }
        let c0 = raw.num_or("thresholds.c0", displab::norms::DEFAULT_C0)?;
        if !(c0 > 0.0) {
            return Err(RawConfig::bad("thresholds.c0", "must be positive"));
        }
        let sweep_family = raw.string("sweep.family")?;
        if let Some(f) = &sweep_family {
            if displab::oscillatory::SweepFamily::parse(f).is_none() {
                return Err(RawConfig::bad("sweep.family", "expected lambda, u or statphase"));
            }
        }
        let st_lambdas = raw.list("stein_tomas.lambdas")?.unwrap_or_else(|| vec![1.0, 4.0, 16.0, 64.0, 256.0]);
        if st_lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(RawConfig::bad("stein_tomas.lambdas", "must be positive"));
        }
        let seed = match raw.num("seed")? {
            None => None,
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x <= 2f64.powi(53) => Some(x as u64),
            Some(_) => return Err(RawConfig::bad("seed", "expected a nonnegative integer")),
        };
        Ok(ExperimentConfig {
            potential,
            grid: GridBlock { n, half_width },
            solver,
            initial_a,
            initial_center: raw.point("initial.center", [0.0; 3])?,
            sweep_family,
            sweep_count: raw.count_or("sweep.count", 1000)?,
            c0,
            constants: raw.string("thresholds.constants")?,
            born_x: raw.point("born.x", [0.0; 3])?,
            born_y: raw.point("born.y", [1.0, 0.0, 0.0])?,
            st_lambdas,
            st_width: raw.num_or("stein_tomas.width", 1.0)?,
            st_support: raw.num_or("stein_tomas.support", 7.0)?,
            seed,
            hash: raw.hash(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let raw = match path {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        Self::from_raw(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_lists_and_tuples() {
        let raw = RawConfig::parse(
            "# comment\nspace.kind = ball\nspace.radius = 2.5 # trailing\ntime.atoms = [(1, 0.5, 0), (-1, 0.5, 0)]\ninitial.center = [0, 1, -2]\nthresholds.constants = \"a b.cfg\"\n",
        )
        .unwrap();
        assert_eq!(raw.string("space.kind").unwrap().unwrap(), "ball");
        assert_eq!(raw.num("space.radius").unwrap(), Some(2.5));
        assert_eq!(raw.tuples("time.atoms").unwrap().unwrap(), vec![vec![1.0, 0.5, 0.0], vec![-1.0, 0.5, 0.0]]);
        assert_eq!(raw.point("initial.center", [9.0; 3]).unwrap(), [0.0, 1.0, -2.0]);
        assert_eq!(raw.string("thresholds.constants").unwrap().unwrap(), "a b.cfg");
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.potential.time().atoms().len(), 2);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RawConfig::parse("grid.n = 32\ngrid.bogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("grid.bogus"));
    }

    #[test]
    fn syntax_errors_report_lines() {
        for bad in ["grid.n 32", "grid.n = [1, 2", "grid.n = (1, x)", "grid.n = 1 2]", "grid.n = 1\ngrid.n = 2"] {
            assert!(RawConfig::parse(bad).is_err(), "{bad}");
        }
        assert!(ExperimentConfig::from_raw(&RawConfig::parse("grid.n = 48").unwrap()).is_err());
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = RawConfig::parse("grid.n = 32\ngrid.L=10").unwrap();
        let b = RawConfig::parse("grid.L = 10.0   # same\n\ngrid.n = 32").unwrap();
        let c = RawConfig::parse("grid.n = 32\ngrid.L = 11").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
