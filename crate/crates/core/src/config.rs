//! Line-oriented system definition files.
//!
//! ```text
//! # full two-shift with the dyadic realization
//! version = 1
//! alphabet = 2
//! matrix = 1 1 ; 1 1
//! branch 0 = affine 0.5 0
//! branch 1 = affine 0.5 0.5
//! constants = 1 2 2
//! potential zero = const 0
//! potential bern = depth1 values -1.0986122886681098 -0.4054651081081644
//! roof quad = expr 1 + x^2/2 ; tau_min 1
//! observable eh = expr cos(2*pi*h) ; im sin(2*pi*h)
//! a_max = 0.1
//! ```
//!
//! Branches are `affine a b` (`x ↦ a·x + b`) or `expr lo hi <expression>` with
//! derivative bounds `lo ≤ g' ≤ hi`. Fields are `const v`, `depth<d> values …`
//! (lexicographic order of admissible words) or `expr <expression>` in `x`.
//! Observables are expressions in `x` and the flow height `h`, with an
//! optional imaginary part.

use std::collections::BTreeMap;
use std::fmt;

use crate::correlations::Observable;
use crate::expr::Expression;
use crate::field::FieldSpec;
use crate::symbolic::{Branch, ExpansionConstants, RealizationSpec, SymbolicSystem};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_A_MAX: f64 = 0.1;

/// A rejected system file: the offending key and, when known, its line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: key `{}`: {}", self.key, self.message),
            None => write!(f, "key `{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RoofDef {
    pub spec: FieldSpec,
    pub tau_min: f64,
}

#[derive(Debug, Clone)]
pub struct SystemFile {
    pub version: u32,
    pub system: SymbolicSystem,
    pub potentials: BTreeMap<String, FieldSpec>,
    pub roofs: BTreeMap<String, RoofDef>,
    pub observables: BTreeMap<String, Observable>,
    pub a_max: f64,
    canonical: String,
}

struct Ctx {
    line: usize,
    key: String,
}

impl Ctx {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError { line: Some(self.line), key: self.key.clone(), message: message.into() }
    }

    fn num(&self, s: &str) -> Result<f64, ConfigError> {
        s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| self.err(format!("`{s}` is not a finite number")))
    }
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn words(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits `rhs` into `;`-separated clauses.
fn clauses(rhs: &str) -> Vec<&str> {
    rhs.split(';').map(str::trim).collect()
}

fn expression(ctx: &Ctx, src: &str) -> Result<Expression, ConfigError> {
    Expression::parse(src).map_err(|e| ctx.err(e.to_string()))
}

/// Field spec and its canonical text.
fn field(ctx: &Ctx, clause: &str) -> Result<(FieldSpec, String), ConfigError> {
    let (head, rest) = clause.split_once(char::is_whitespace).unwrap_or((clause, ""));
    let rest = rest.trim();
    match head {
        "const" => Ok((FieldSpec::Const(ctx.num(rest)?), format!("const {}", words(rest)))),
        "expr" => {
            let e = expression(ctx, rest)?;
            Ok((FieldSpec::Expr(e), format!("expr {}", squash(rest))))
        }
        h if h.starts_with("depth") => {
            let depth: usize = h[5..].parse().ok().filter(|d| *d >= 1).ok_or_else(|| ctx.err(format!("bad depth `{h}`")))?;
            let vals = rest.strip_prefix("values").ok_or_else(|| ctx.err("expected `values` after the depth"))?;
            let values = vals.split_whitespace().map(|v| ctx.num(v)).collect::<Result<Vec<_>, _>>()?;
            Ok((FieldSpec::Table { depth, values }, format!("depth{depth} values {}", words(vals))))
        }
        other => Err(ctx.err(format!("unknown field kind `{other}` (expected const, depth<d> values, expr)"))),
    }
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut version = None;
        let mut alphabet: Option<usize> = None;
        let mut matrix: Option<(usize, Vec<Vec<u8>>)> = None;
        let mut branches: BTreeMap<usize, (usize, Branch)> = BTreeMap::new();
        let mut constants = None;
        let mut potentials = BTreeMap::new();
        let mut roofs = BTreeMap::new();
        let mut observables = BTreeMap::new();
        let mut a_max = None;
        let mut canonical = Vec::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let (lhs, rhs) = line.split_once('=').ok_or_else(|| ConfigError {
                line: Some(lineno),
                key: line.split_whitespace().next().unwrap_or("").to_string(),
                message: "expected `key = value`".into(),
            })?;
            let lhs: Vec<&str> = lhs.split_whitespace().collect();
            let rhs = rhs.trim();
            let key = lhs.first().copied().unwrap_or("").to_string();
            let ctx = Ctx { line: lineno, key: lhs.join(" ") };
            if let Some(prev) = seen.insert(ctx.key.clone(), lineno) {
                return Err(ctx.err(format!("duplicate definition (first on line {prev})")));
            }
            let named = |n: usize| -> Result<String, ConfigError> {
                if lhs.len() != n {
                    return Err(ctx.err(format!("expected {} name(s) after `{key}`", n - 1)));
                }
                Ok(lhs[n - 1].to_string())
            };
            let canon_rhs = match key.as_str() {
                "version" => {
                    named(1)?;
                    let v: u32 = rhs.parse().map_err(|_| ctx.err(format!("`{rhs}` is not a version number")))?;
                    if v != SCHEMA_VERSION {
                        return Err(ctx.err(format!("unsupported schema version {v} (this build reads {SCHEMA_VERSION})")));
                    }
                    version = Some(v);
                    v.to_string()
                }
                "alphabet" => {
                    named(1)?;
                    let k: usize = rhs.parse().ok().filter(|k| (1..=255).contains(k)).ok_or_else(|| ctx.err("alphabet size must be in 1..=255"))?;
                    alphabet = Some(k);
                    k.to_string()
                }
                "matrix" => {
                    named(1)?;
                    let rows = rhs
                        .split(';')
                        .map(|r| {
                            r.split_whitespace()
                                .map(|v| match v {
                                    "0" => Ok(0u8),
                                    "1" => Ok(1u8),
                                    _ => Err(ctx.err(format!("entry `{v}` is not 0 or 1"))),
                                })
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let text = rows
                        .iter()
                        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                        .collect::<Vec<_>>()
                        .join(" ; ");
                    matrix = Some((lineno, rows));
                    text
                }
                "branch" => {
                    let s = named(2)?;
                    let sym: usize = s.parse().map_err(|_| ctx.err(format!("`{s}` is not a symbol index")))?;
                    let (head, rest) = rhs.split_once(char::is_whitespace).unwrap_or((rhs, ""));
                    let (branch, text) = match head {
                        "affine" => {
                            let p: Vec<&str> = rest.split_whitespace().collect();
                            if p.len() != 2 {
                                return Err(ctx.err("`affine` takes two numbers: a b"));
                            }
                            (Branch::Affine { a: ctx.num(p[0])?, b: ctx.num(p[1])? }, format!("affine {} {}", p[0], p[1]))
                        }
                        "expr" => {
                            let mut it = rest.trim().splitn(3, char::is_whitespace);
                            let (lo, hi, src) = match (it.next(), it.next(), it.next()) {
                                (Some(lo), Some(hi), Some(src)) => (lo, hi, src),
                                _ => return Err(ctx.err("`expr` takes derivative bounds and an expression: expr lo hi <expression>")),
                            };
                            let map = expression(&ctx, src)?;
                            (
                                Branch::Expr { map, deriv_min: ctx.num(lo)?, deriv_max: ctx.num(hi)? },
                                format!("expr {lo} {hi} {}", squash(src)),
                            )
                        }
                        other => return Err(ctx.err(format!("unknown branch kind `{other}` (expected affine, expr)"))),
                    };
                    branches.insert(sym, (lineno, branch));
                    text
                }
                "constants" => {
                    named(1)?;
                    let p: Vec<f64> = rhs.split_whitespace().map(|v| ctx.num(v)).collect::<Result<_, _>>()?;
                    if p.len() != 3 {
                        return Err(ctx.err("expected three numbers: c0 gamma gamma1"));
                    }
                    constants = Some(ExpansionConstants { c0: p[0], gamma: p[1], gamma1: p[2] });
                    words(rhs)
                }
                "potential" => {
                    let name = named(2)?;
                    let (f, text) = field(&ctx, rhs)?;
                    potentials.insert(name, (lineno, f));
                    text
                }
                "roof" => {
                    let name = named(2)?;
                    let cl = clauses(rhs);
                    let (f, text) = field(&ctx, cl[0])?;
                    let tau_min = cl[1..]
                        .iter()
                        .find_map(|c| c.strip_prefix("tau_min"))
                        .ok_or_else(|| ctx.err("roofs must declare `; tau_min <value>`"))?;
                    let tau_min = ctx.num(tau_min.trim())?;
                    if !(tau_min > 0.0) {
                        return Err(ctx.err("tau_min must be positive"));
                    }
                    if let Some(bad) = cl[1..].iter().find(|c| !c.starts_with("tau_min")) {
                        return Err(ctx.err(format!("unknown roof clause `{bad}`")));
                    }
                    roofs.insert(name, (lineno, RoofDef { spec: f, tau_min }));
                    format!("{text} ; tau_min {tau_min}")
                }
                "observable" => {
                    let name = named(2)?;
                    let cl = clauses(rhs);
                    let re = cl[0].strip_prefix("expr").ok_or_else(|| ctx.err("observables start with `expr <expression>`"))?;
                    let im = match cl.get(1) {
                        Some(c) => Some(c.strip_prefix("im").ok_or_else(|| ctx.err(format!("unknown observable clause `{c}`")))?),
                        None => None,
                    };
                    if cl.len() > 2 {
                        return Err(ctx.err("observables take at most an `im` clause"));
                    }
                    let obs = Observable { re: expression(&ctx, re)?, im: im.map(|s| expression(&ctx, s)).transpose()? };
                    let text = match im {
                        Some(im) => format!("expr {} ; im {}", squash(re), squash(im)),
                        None => format!("expr {}", squash(re)),
                    };
                    observables.insert(name, obs);
                    text
                }
                "a_max" => {
                    named(1)?;
                    let v = ctx.num(rhs)?;
                    if !(v > 0.0) {
                        return Err(ctx.err("a_max must be positive"));
                    }
                    a_max = Some(v);
                    words(rhs)
                }
                other => return Err(ctx.err(format!("unknown key `{other}`"))),
            };
            canonical.push(format!("{} = {canon_rhs}", ctx.key));
        }

        let missing = |key: &str| ConfigError { line: None, key: key.into(), message: "required key is missing".into() };
        let version = version.ok_or_else(|| missing("version"))?;
        let k = alphabet.ok_or_else(|| missing("alphabet"))?;
        let (m_line, rows) = matrix.ok_or_else(|| missing("matrix"))?;
        let realization = if branches.is_empty() {
            None
        } else {
            if let Some((&s, (l, _))) = branches.iter().find(|(s, _)| **s >= k) {
                return Err(ConfigError { line: Some(*l), key: format!("branch {s}"), message: format!("symbol {s} is outside the alphabet of size {k}") });
            }
            if branches.len() != k {
                let gap = (0..k).find(|s| !branches.contains_key(s)).unwrap();
                return Err(ConfigError { line: None, key: format!("branch {gap}"), message: "every symbol needs a branch once any is given".into() });
            }
            Some(RealizationSpec { branches: branches.values().map(|(_, b)| b.clone()).collect(), constants })
        };
        let system = SymbolicSystem::build(k, rows, realization).map_err(|e| {
            use crate::error::Error as E;
            let (line, key) = match &e {
                E::InvalidBranch { symbol, .. } => (branches.get(symbol).map(|b| b.0), format!("branch {symbol}")),
                E::RealizationOverlap { .. } => (None, "branch".to_string()),
                _ => (Some(m_line), "matrix".to_string()),
            };
            ConfigError { line, key, message: e.to_string() }
        })?;
        for (name, (line, f)) in &potentials {
            f.validate(&system).map_err(|e| ConfigError { line: Some(*line), key: format!("potential {name}"), message: e.to_string() })?;
        }
        for (name, (line, r)) in &roofs {
            r.spec
                .validate(&system)
                .map_err(|e| ConfigError { line: Some(*line), key: format!("roof {name}"), message: e.to_string() })?;
        }
        Ok(SystemFile {
            version,
            system,
            potentials: potentials.into_iter().map(|(n, (_, f))| (n, f)).collect(),
            roofs: roofs.into_iter().map(|(n, (_, r))| (n, r)).collect(),
            observables,
            a_max: a_max.unwrap_or(DEFAULT_A_MAX),
            canonical: canonical.join("\n"),
        })
    }

    /// One normalized statement per line, in file order; comments and
    /// insignificant whitespace removed.
    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    pub fn potential(&self, name: &str) -> Result<&FieldSpec, ConfigError> {
        self.potentials.get(name).ok_or_else(|| unknown("potential", name, self.potentials.keys()))
    }

    pub fn roof(&self, name: &str) -> Result<&RoofDef, ConfigError> {
        self.roofs.get(name).ok_or_else(|| unknown("roof", name, self.roofs.keys()))
    }

    pub fn observable(&self, name: &str) -> Result<&Observable, ConfigError> {
        self.observables.get(name).ok_or_else(|| unknown("observable", name, self.observables.keys()))
    }
}

fn unknown<'a>(kind: &str, name: &str, known: impl Iterator<Item = &'a String>) -> ConfigError {
    let known: Vec<&str> = known.map(String::as_str).collect();
    ConfigError {
        line: None,
        key: format!("{kind} {name}"),
        message: format!("no {kind} named `{name}` (defined: {})", if known.is_empty() { "none".into() } else { known.join(", ") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL2: &str = "version = 1\nalphabet = 2\nmatrix = 1 1 ; 1 1\nbranch 0 = affine 0.5 0\nbranch 1 = affine 0.5 0.5\n\
                         potential zero = const 0\nroof quad = expr 1 + x^2/2 ; tau_min 1\n";

    #[test]
    fn parses_full_shift() {
        let f = SystemFile::parse(FULL2).unwrap();
        assert_eq!(f.system.alphabet_size(), 2);
        assert!(f.system.realization().is_some());
        assert_eq!(f.roof("quad").unwrap().tau_min, 1.0);
        assert_eq!(f.a_max, DEFAULT_A_MAX);
    }

    #[test]
    fn errors_name_key_and_line() {
        let bad = FULL2.replace("matrix = 1 1 ; 1 1", "matrix = 1 2 ; 1 1");
        let e = SystemFile::parse(&bad).unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(3), "matrix"));
        let e = SystemFile::parse(&FULL2.replace(" ; tau_min 1", "")).unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(7), "roof quad"));
        let e = SystemFile::parse(&FULL2.replace("version = 1\n", "")).unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (None, "version"));
        let e = SystemFile::parse(&format!("{FULL2}colour = red\n")).unwrap_err();
        assert_eq!(e.key, "colour");
        let e = SystemFile::parse(&FULL2.replace("1 1 ; 1 1", "1 1 ; 1 0").replace("1 1 ; 1 0", "0 1 ; 1 0")).unwrap_err();
        assert!(e.message.contains("aperiodic"), "{e}");
    }

    #[test]
    fn canonical_ignores_whitespace_and_comments() {
        let a = SystemFile::parse(FULL2).unwrap();
        let spaced = FULL2.replace("1 1 ; 1 1", "1   1;1 1").replace("1 + x^2/2", "1+x^2 / 2") + "# trailing comment\n\n";
        let b = SystemFile::parse(&spaced).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        let c = SystemFile::parse(&FULL2.replace("x^2/2", "x^2/3")).unwrap();
        assert_ne!(a.canonical(), c.canonical());
    }

    #[test]
    fn tables_and_observables() {
        let text = format!("{FULL2}potential bern = depth1 values -1.1 -0.4\nobservable eh = expr cos(2*pi*h) ; im sin(2*pi*h)\n");
        let f = SystemFile::parse(&text).unwrap();
        assert_eq!(f.potential("bern").unwrap(), &FieldSpec::Table { depth: 1, values: vec![-1.1, -0.4] });
        let o = f.observable("eh").unwrap();
        assert!((o.eval(0.3, 0.25).im - 1.0).abs() < 1e-15);
        let e = SystemFile::parse(&format!("{FULL2}potential bad = depth2 values 1 2\n")).unwrap_err();
        assert_eq!(e.key, "potential bad");
        assert!(f.roof("nope").unwrap_err().message.contains("quad"));
    }
}
