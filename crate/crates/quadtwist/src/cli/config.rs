//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`, `#` starts a comment. Sizes are plain numbers or
//! powers written `2^k`; sweeps are comma lists or `2^a..2^b` (doubling).
//! Tolerances are `tol.<check> = <value>`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::arith::{gcd, mobius};
use crate::characters::{enumerate_characters, even_primitive_of_order, DirichletCharacter};
use crate::predictions::{Conventions, DiagConvention, NondiagPhase};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Lvalue,
    Moment1,
    Moment2,
    Predict,
    Compare,
    Verify,
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lvalue" => Self::Lvalue,
            "moment1" => Self::Moment1,
            "moment2" => Self::Moment2,
            "predict" => Self::Predict,
            "compare" => Self::Compare,
            "verify" => Self::Verify,
            _ => return Err(Error::Config(format!("unknown command {s}"))),
        })
    }
}

/// Which moments `compare` checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentSelection {
    First,
    Second,
    Both,
}

impl MomentSelection {
    pub fn first(self) -> bool {
        self != Self::Second
    }

    pub fn second(self) -> bool {
        self != Self::First
    }
}

/// How Y is chosen for each X.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum YChoice {
    /// ⌊X^{1/8}⌋.
    Auto,
    Fixed(f64),
}

impl YChoice {
    pub fn at(self, x: f64) -> f64 {
        match self {
            Self::Auto => x.powf(0.125).floor().max(1.0),
            Self::Fixed(y) => y,
        }
    }
}

/// The fully resolved configuration. Serialized verbatim into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub q: u64,
    /// Character label `N:e1,...`; empty means the smallest even primitive
    /// character of order `psi_order`.
    pub psi: String,
    pub psi_order: u64,
    pub r: u64,
    pub h: u64,
    pub l: u64,
    #[serde(rename = "X")]
    pub x_sweep: Vec<f64>,
    #[serde(rename = "Y")]
    pub y: YChoice,
    pub delta: f64,
    pub moment: MomentSelection,
    /// Discriminant parameters d for `lvalue`.
    pub d: Vec<u64>,
    /// Vertical line for the non-diagonal contour integral.
    pub contour_c: f64,
    pub conventions: Conventions,
    pub tolerances: BTreeMap<String, f64>,
    /// Largest allowed |empirical|/envelope when the prediction vanishes.
    pub envelope_constant: f64,
    // execution settings: reported with the runtime metadata, outside the
    // compared body, so that worker counts and paths do not change it
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<String>,
    #[serde(skip)]
    pub csv: Option<String>,
    /// Suites run by `verify`, in order.
    pub suites: Vec<String>,
    /// Suite whose first case is deliberately corrupted.
    pub inject_fault: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Verify,
            q: 17,
            psi: String::new(),
            psi_order: 4,
            r: 34,
            h: 1,
            l: 1,
            x_sweep: vec![65536.0],
            y: YChoice::Auto,
            delta: 0.01,
            moment: MomentSelection::Both,
            d: vec![5, 13, 21],
            contour_c: 0.25,
            conventions: Conventions::default(),
            tolerances: default_tolerances(),
            envelope_constant: 10.0,
            workers: 1,
            out: None,
            csv: None,
            suites: super::suites::SUITES.iter().map(|s| s.to_string()).collect(),
            inject_fault: None,
        }
    }
}

pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("gauss", 1e-9),
        ("poisson", 1e-8),
        ("afe", 1e-8),
        ("afe_sq", 1e-7),
        ("funceq", 1e-8),
        ("omega_small", 1e-5),
        ("omega_closed", 1e-8),
        ("omega_large", 1e-10),
        ("omega_shift", 1e-10),
        ("eta", 1e-8),
        ("k_alpha", 1e-8),
        ("h_star", 1e-10),
        ("script_g", 1e-6),
        ("quartic", 1e-6),
        ("j_symmetry", 1e-8),
        ("orthogonality", 1e-12),
        ("h_average", 1e-8),
        ("determinism", 0.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?} as a number")))
}

/// A size: `65536`, `6.5e4` or `2^16`.
fn parse_size(key: &str, v: &str) -> Result<f64> {
    if let Some((b, e)) = v.split_once('^') {
        let b: f64 = parse_num(key, b.trim())?;
        let e: i32 = parse_num(key, e.trim())?;
        return Ok(b.powi(e));
    }
    parse_num(key, v)
}

fn parse_sweep(key: &str, v: &str) -> Result<Vec<f64>> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b) = (parse_size(key, a.trim())?, parse_size(key, b.trim())?);
        if !(a > 1.0 && b >= a) {
            return Err(Error::Config(format!("{key}: empty sweep {v}")));
        }
        let mut out = vec![];
        let mut x = a;
        while x <= b * (1.0 + 1e-12) {
            out.push(x);
            x *= 2.0;
        }
        return Ok(out);
    }
    v.split(',').map(|p| parse_size(key, p.trim())).collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "command" => self.command = v.parse()?,
            "q" => self.q = parse_num(key, v)?,
            "psi" => self.psi = v.to_string(),
            "psi_order" => self.psi_order = parse_num(key, v)?,
            "r" => self.r = parse_num(key, v)?,
            "h" => self.h = parse_num(key, v)?,
            "l" => self.l = parse_num(key, v)?,
            "X" => self.x_sweep = parse_sweep(key, v)?,
            "Y" => {
                self.y = if v == "auto" { YChoice::Auto } else { YChoice::Fixed(parse_size(key, v)?) };
            }
            "delta" => self.delta = parse_num(key, v)?,
            "moment" => {
                self.moment = match v {
                    "1" | "first" => MomentSelection::First,
                    "2" | "second" => MomentSelection::Second,
                    "both" => MomentSelection::Both,
                    _ => return Err(Error::Config(format!("moment must be 1, 2 or both, got {v}"))),
                }
            }
            "d" => self.d = v.split(',').map(|p| parse_num(key, p.trim())).collect::<Result<_>>()?,
            "contour_c" => self.contour_c = parse_num(key, v)?,
            "diag_convention" => self.conventions.diag = v.parse::<DiagConvention>()?,
            "nondiag_phase" => self.conventions.nondiag = v.parse::<NondiagPhase>()?,
            "envelope_constant" => self.envelope_constant = parse_num(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            "out" => self.out = Some(v.to_string()),
            "csv" => self.csv = Some(v.to_string()),
            "suites" => {
                let names: Vec<String> = v.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect();
                if let Some(bad) = names.iter().find(|n| !super::suites::SUITES.contains(&n.as_str())) {
                    return Err(Error::Config(format!("unknown suite {bad}")));
                }
                self.suites = names;
            }
            "inject_fault" => self.inject_fault = if v.is_empty() || v == "none" { None } else { Some(v.to_string()) },
            _ => {
                if let Some(name) = key.strip_prefix("tol.") {
                    if !self.tolerances.contains_key(name) {
                        return Err(Error::Config(format!("unknown tolerance {name}")));
                    }
                    self.tolerances.insert(name.to_string(), parse_num(key, v)?);
                } else {
                    return Err(Error::Config(format!("unknown key {key}")));
                }
            }
        }
        Ok(())
    }

    /// Applies every setting of a config text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Self::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    /// The character ψ named by the config.
    pub fn character(&self) -> Result<DirichletCharacter> {
        if self.psi.is_empty() {
            return even_primitive_of_order(self.q, self.psi_order).ok_or_else(|| {
                Error::Config(format!("no even primitive character of order {} mod {}", self.psi_order, self.q))
            });
        }
        enumerate_characters(self.q)
            .into_iter()
            .find(|c| c.label() == self.psi)
            .ok_or_else(|| Error::Config(format!("no character with label {} mod {}", self.psi, self.q)))
    }

    /// Checks the family constraints with readable messages.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.q % 2 == 0 {
            return bad(format!("q = {} must be odd", self.q));
        }
        if self.r == 0 || self.r % 2 != 0 || mobius(self.r) == 0 {
            return bad(format!("r = {} must be even and squarefree", self.r));
        }
        if self.r % self.q != 0 {
            return bad(format!("q = {} must divide r = {}", self.q, self.r));
        }
        if self.h % 2 == 0 || gcd(self.h, self.r) != 1 {
            return bad(format!("h = {} must be odd and coprime to r = {}", self.h, self.r));
        }
        if self.l == 0 {
            return bad("l must be positive".into());
        }
        if self.x_sweep.is_empty() || self.x_sweep.iter().any(|&x| !(x > 1.0)) {
            return bad("every X must exceed 1".into());
        }
        if let YChoice::Fixed(y) = self.y {
            if !(y >= 1.0) {
                return bad(format!("Y = {y} must be at least 1"));
            }
        }
        if !(self.contour_c > 0.0 && self.contour_c < 0.5) {
            return bad(format!("contour_c = {} must lie in (0, 1/2)", self.contour_c));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.tolerances.values().any(|t| !(*t >= 0.0)) {
            return bad("tolerances must be non-negative".into());
        }
        let psi = self.character()?;
        let k = psi.classify();
        if !(k.is_primitive && k.is_even) {
            return bad(format!("ψ = {} must be even and primitive", psi.label()));
        }
        Ok(())
    }
}
