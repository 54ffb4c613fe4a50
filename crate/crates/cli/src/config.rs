//! Campaign configuration: line-based `key = value` text.
//!
//! Top-level keys (`precision_bits`, `cache_dir`, `checks`, `output`,
//! `threads`) come first; each `[check-name]` line opens a parameter block
//! for that check. `#` starts a comment. Missing parameters take the values
//! of the default acceptance grid.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use rug::Float;
use twistlab_core::catalog::{catalog, CATALOG_NAMES};
use twistlab_core::mp::{Cx, Prec};

use crate::parse;

pub const CHECK_NAMES: [&str; 11] = [
    "invariants",
    "kluyver",
    "sum-lemma",
    "twist-decomp",
    "gk",
    "expansion",
    "decay",
    "tau-search",
    "extract-euler",
    "probe",
    "mellin",
];

const TOP_KEYS: [&str; 5] = ["precision_bits", "cache_dir", "checks", "output", "threads"];

#[derive(Clone, Debug)]
pub struct Config {
    pub precision_bits: Prec,
    pub cache_dir: PathBuf,
    pub output: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug)]
pub enum Check {
    Invariants { functions: Vec<String>, tol: f64 },
    Kluyver { bound: u64, tol: f64 },
    SumLemma { pairs: Vec<(String, u64)>, points: Vec<Cx>, residual_tol: f64, tail_tol: f64 },
    TwistDecomp { functions: Vec<String>, primes: Vec<u64>, points: Vec<Cx>, residual_tol: f64, tail_tol: f64 },
    Gk { pairs: Vec<(String, u64)>, points: Vec<Cx>, heights: Vec<Float>, residual_tol: f64, tail_tol: f64 },
    Expansion { functions: Vec<String>, nu_max: usize, tol: f64 },
    Decay { functions: Vec<String>, m_max: usize },
    TauSearch { moduli: Vec<u64>, k: u64, shifts: Vec<i64>, denominator: i64 },
    ExtractEuler {
        cases: Vec<(String, u64, usize)>,
        point: Cx,
        grid: usize,
        k: u64,
        tol: f64,
        compare_k: Option<(u64, u64)>,
        compare_slack: f64,
    },
    Probe { function: String, alphas: Vec<(i64, u64)>, ks: Vec<usize>, sigma: f64, t_max: f64, grid_points: usize, tol: f64 },
    Mellin { function: String, points: Vec<Cx>, alpha: (i64, u64), xs: Vec<f64>, tol: f64 },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Invariants { .. } => "invariants",
            Check::Kluyver { .. } => "kluyver",
            Check::SumLemma { .. } => "sum-lemma",
            Check::TwistDecomp { .. } => "twist-decomp",
            Check::Gk { .. } => "gk",
            Check::Expansion { .. } => "expansion",
            Check::Decay { .. } => "decay",
            Check::TauSearch { .. } => "tau-search",
            Check::ExtractEuler { .. } => "extract-euler",
            Check::Probe { .. } => "probe",
            Check::Mellin { .. } => "mellin",
        }
    }
}

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug)]
struct Block {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn split_blocks(text: &str) -> Result<(Vec<Entry>, Vec<Block>)> {
    let mut top = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| anyhow!("line {line}: unterminated block header"))?.trim();
            if !CHECK_NAMES.contains(&name) {
                bail!("line {line}: unknown check block [{name}]");
            }
            if blocks.iter().any(|b| b.name == name) {
                bail!("line {line}: duplicate block [{name}]");
            }
            blocks.push(Block { name: name.to_string(), line, entries: Vec::new() });
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| anyhow!("line {line}: expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            bail!("line {line}: empty key");
        }
        let target = match blocks.last_mut() {
            Some(b) => &mut b.entries,
            None => &mut top,
        };
        if target.iter().any(|e| e.key == key) {
            bail!("line {line}: duplicate key `{key}`");
        }
        target.push(Entry { key: key.to_string(), value: value.trim().to_string(), line });
    }
    Ok((top, blocks))
}

/// Typed access to one block with line-numbered errors.
struct Params<'a> {
    block: Option<&'a Block>,
    prec: Prec,
}

impl<'a> Params<'a> {
    fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.block.and_then(|b| b.entries.iter().find(|e| e.key == key))
    }

    fn get<T>(&self, key: &str, default: T, f: impl Fn(&str) -> Result<T>) -> Result<T> {
        match self.entry(key) {
            Some(e) => f(&e.value).map_err(|err| anyhow!("line {}: key `{key}`: {err}", e.line)),
            None => Ok(default),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key, default, number)
    }

    fn int<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.get(key, default, integer)
    }

    fn ints<T: std::str::FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: Clone,
    {
        self.get(key, default.to_vec(), |v| parse::list(v).into_iter().map(integer).collect())
    }

    fn f64s(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        self.get(key, default.to_vec(), |v| parse::list(v).into_iter().map(number).collect())
    }

    fn points(&self, key: &str, default: &[&str]) -> Result<Vec<Cx>> {
        let prec = self.prec;
        let parse_all = |items: Vec<&str>| items.into_iter().map(|p| parse::complex(p, prec)).collect::<Result<Vec<_>>>();
        self.get(key, parse_all(default.to_vec())?, |v| parse_all(parse::list(v)))
    }

    fn point(&self, key: &str, default: &str) -> Result<Cx> {
        let prec = self.prec;
        self.get(key, parse::complex(default, prec)?, |v| parse::complex(v, prec))
    }

    fn functions(&self, key: &str, default: &[&str]) -> Result<Vec<String>> {
        let prec = self.prec;
        self.get(key, default.iter().map(|s| s.to_string()).collect(), |v| {
            parse::list(v).into_iter().map(|n| known_function(n, prec)).collect()
        })
    }

    fn function(&self, key: &str, default: &str) -> Result<String> {
        let prec = self.prec;
        self.get(key, default.to_string(), |v| known_function(v.trim(), prec))
    }

    /// `name:q` items.
    fn pairs(&self, key: &str, default: &[(&str, u64)]) -> Result<Vec<(String, u64)>> {
        let prec = self.prec;
        self.get(key, default.iter().map(|(n, q)| (n.to_string(), *q)).collect(), |v| {
            parse::list(v)
                .into_iter()
                .map(|item| {
                    let (n, q) = item.split_once(':').ok_or_else(|| anyhow!("expected name:modulus, got {item:?}"))?;
                    Ok((known_function(n.trim(), prec)?, integer(q)?))
                })
                .collect()
        })
    }

    fn fractions(&self, key: &str, default: &[(i64, u64)]) -> Result<Vec<(i64, u64)>> {
        self.get(key, default.to_vec(), |v| parse::list(v).into_iter().map(parse::fraction).collect())
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        if let Some(b) = self.block {
            for e in &b.entries {
                if !allowed.contains(&e.key.as_str()) {
                    bail!("line {}: unknown key `{}` in block [{}] (allowed: {})", e.line, e.key, b.name, allowed.join(", "));
                }
            }
        }
        Ok(())
    }
}

fn number(v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| anyhow!("not a number: {v:?}"))
}

fn integer<T: std::str::FromStr>(v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| anyhow!("not an integer: {v:?}"))
}

fn known_function(name: &str, prec: Prec) -> Result<String> {
    catalog(name, prec).map_err(|_| anyhow!("unknown L-function `{name}` (known: {})", CATALOG_NAMES.join(", ")))?;
    Ok(name.to_string())
}

fn build_check(name: &str, p: &Params) -> Result<Check> {
    let all: Vec<&str> = CATALOG_NAMES.to_vec();
    let check = match name {
        "invariants" => {
            p.check_keys(&["functions", "tol"])?;
            Check::Invariants { functions: p.functions("functions", &all)?, tol: p.f64("tol", 1e-20)? }
        }
        "kluyver" => {
            p.check_keys(&["bound", "tol"])?;
            Check::Kluyver { bound: p.int("bound", 200)?, tol: p.f64("tol", 1e-20)? }
        }
        "sum-lemma" => {
            p.check_keys(&["pairs", "points", "residual_tol", "tail_tol"])?;
            Check::SumLemma {
                pairs: p.pairs(
                    "pairs",
                    &[("zeta2", 2), ("zeta2", 6), ("zeta_chi3", 3), ("zeta_chi3", 6), ("level11", 11)],
                )?,
                points: p.points("points", &["2", "3", "1.8+3i", "2+50i"])?,
                residual_tol: p.f64("residual_tol", 1e-12)?,
                tail_tol: p.f64("tail_tol", 1e-15)?,
            }
        }
        "twist-decomp" => {
            p.check_keys(&["functions", "primes", "points", "residual_tol", "tail_tol"])?;
            Check::TwistDecomp {
                functions: p.functions("functions", &["zeta2", "zeta_chi3"])?,
                primes: p.ints("primes", &[2, 3, 5, 7])?,
                points: p.points("points", &["2", "1.8+3i"])?,
                residual_tol: p.f64("residual_tol", 1e-12)?,
                tail_tol: p.f64("tail_tol", 1e-12)?,
            }
        }
        "gk" => {
            p.check_keys(&["pairs", "points", "heights", "residual_tol", "tail_tol"])?;
            let prec = p.prec;
            let heights = p.f64s("heights", &[0.0, 1.0, 100.0, 480.4])?;
            Check::Gk {
                pairs: p.pairs("pairs", &[("zeta_chi3", 3), ("level11", 11)])?,
                points: p.points("points", &["2", "2+1i"])?,
                heights: heights.iter().map(|&h| Float::with_val(prec, h)).collect(),
                residual_tol: p.f64("residual_tol", 1e-12)?,
                tail_tol: p.f64("tail_tol", 1e-12)?,
            }
        }
        "expansion" => {
            p.check_keys(&["functions", "nu_max", "tol"])?;
            Check::Expansion {
                functions: p.functions("functions", &all)?,
                nu_max: p.int("nu_max", 10)?,
                tol: p.f64("tol", 1e-30)?,
            }
        }
        "decay" => {
            p.check_keys(&["functions", "m_max"])?;
            Check::Decay {
                functions: p.functions("functions", &["zeta2", "zeta_chi3", "level11"])?,
                m_max: p.int("m_max", 6)?,
            }
        }
        "tau-search" => {
            p.check_keys(&["moduli", "k", "shifts", "denominator"])?;
            Check::TauSearch {
                moduli: p.ints("moduli", &[6, 15, 33])?,
                k: p.int("k", 100)?,
                shifts: p.ints("shifts", &[0, 1, 2, 3])?,
                denominator: p.int("denominator", 7)?,
            }
        }
        "extract-euler" => {
            p.check_keys(&["cases", "point", "grid", "k", "tol", "compare_k", "compare_slack"])?;
            let prec = p.prec;
            let default: Vec<(String, u64, usize)> =
                vec![("zeta_chi3".into(), 3, 1), ("zeta_chi3".into(), 3, 2), ("level11".into(), 11, 1)];
            let cases = p.get("cases", default, |v| {
                parse::list(v)
                    .into_iter()
                    .map(|item| {
                        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
                        let [n, pr, m] = parts[..] else {
                            bail!("expected name:p:m, got {item:?}");
                        };
                        Ok((known_function(n, prec)?, integer(pr)?, integer(m)?))
                    })
                    .collect()
            })?;
            let compare_k = p.get("compare_k", Some((10, 250)), |v| {
                let ks = parse::list(v);
                match ks[..] {
                    [] => Ok(None),
                    [lo, hi] => Ok(Some((integer(lo)?, integer(hi)?))),
                    _ => bail!("expected two values or nothing"),
                }
            })?;
            Check::ExtractEuler {
                cases,
                point: p.point("point", "2")?,
                grid: p.int("grid", 64)?,
                k: p.int("k", 50)?,
                tol: p.f64("tol", 5e-2)?,
                compare_k,
                compare_slack: p.f64("compare_slack", 1e-3)?,
            }
        }
        "probe" => {
            p.check_keys(&["function", "alphas", "ks", "sigma", "t_max", "grid_points", "tol"])?;
            Check::Probe {
                function: p.function("function", "zeta2")?,
                alphas: p.fractions("alphas", &[(1, 1), (1, 3)])?,
                ks: p.ints("ks", &[2, 4])?,
                sigma: p.f64("sigma", 2.0)?,
                t_max: p.f64("t_max", 50.0)?,
                grid_points: p.int("grid_points", 6)?,
                tol: p.f64("tol", 2f64.powi(-128))?,
            }
        }
        "mellin" => {
            p.check_keys(&["function", "points", "alpha", "x", "tol"])?;
            let alpha = p.get("alpha", (1, 3), parse::fraction)?;
            Check::Mellin {
                function: p.function("function", "zeta2")?,
                points: p.points("points", &["1.5"])?,
                alpha,
                xs: p.f64s("x", &[1.0, 10.0, 100.0])?,
                tol: p.f64("tol", 1e-12)?,
            }
        }
        other => unreachable!("check {other} filtered earlier"),
    };
    Ok(check)
}

pub fn parse_config(text: &str) -> Result<Config> {
    let (top, blocks) = split_blocks(text)?;
    for e in &top {
        if !TOP_KEYS.contains(&e.key.as_str()) {
            bail!("line {}: unknown key `{}` (allowed: {})", e.line, e.key, TOP_KEYS.join(", "));
        }
    }
    let find = |k: &str| top.iter().find(|e| e.key == k);
    let precision_bits: Prec = match find("precision_bits") {
        Some(e) => {
            let v: Prec = integer(&e.value).map_err(|err| anyhow!("line {}: key `precision_bits`: {err}", e.line))?;
            if !(64..=4096).contains(&v) {
                bail!("line {}: key `precision_bits`: {v} outside 64..=4096", e.line);
            }
            v
        }
        None => 256,
    };
    let cache_dir = find("cache_dir").map_or_else(|| PathBuf::from("twistlab-cache"), |e| PathBuf::from(&e.value));
    let output = find("output").map(|e| PathBuf::from(&e.value));
    let threads = match find("threads") {
        Some(e) => integer(&e.value).map_err(|err| anyhow!("line {}: key `threads`: {err}", e.line))?,
        None => 0,
    };
    let mut names: Vec<&str> = Vec::new();
    if let Some(e) = find("checks") {
        for item in parse::list(&e.value) {
            if item == "all" {
                names.extend(CHECK_NAMES);
            } else if let Some(n) = CHECK_NAMES.iter().find(|n| **n == item) {
                names.push(n);
            } else {
                bail!("line {}: key `checks`: unknown check `{item}` (known: all, {})", e.line, CHECK_NAMES.join(", "));
            }
        }
    }
    let mut checks = Vec::new();
    for b in &blocks {
        // parse every block, listed or not, so mistakes surface early
        let params = Params { block: Some(b), prec: precision_bits };
        let check = build_check(&b.name, &params)
            .map_err(|e| if e.to_string().starts_with("line ") { e } else { anyhow!("line {}: {e}", b.line) })?;
        if names.contains(&b.name.as_str()) {
            checks.push(check);
        }
    }
    let mut ordered = Vec::new();
    for n in names {
        if ordered.iter().any(|c: &Check| c.name() == n) {
            continue;
        }
        match checks.iter().position(|c| c.name() == n) {
            Some(i) => ordered.push(checks.remove(i)),
            None => ordered.push(build_check(n, &Params { block: None, prec: precision_bits })?),
        }
    }
    Ok(Config { precision_bits, cache_dir, output, threads, checks: ordered })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_blocks() {
        let cfg = parse_config(
            "# demo\nprecision_bits = 128\nchecks = sum-lemma, gk\n\n[sum-lemma]\npairs = zeta2:6\npoints = 2+1i, 3\n",
        )
        .unwrap();
        assert_eq!(cfg.precision_bits, 128);
        assert_eq!(cfg.checks.len(), 2);
        match &cfg.checks[0] {
            Check::SumLemma { pairs, points, tail_tol, .. } => {
                assert_eq!(pairs, &vec![("zeta2".to_string(), 6)]);
                assert_eq!(points.len(), 2);
                assert_eq!(*tail_tol, 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.checks[1].name(), "gk");
        assert_eq!(parse_config("checks = all").unwrap().checks.len(), CHECK_NAMES.len());
    }

    #[test]
    fn shipped_configs_parse() {
        let full = parse_config(include_str!("../../../configs/acceptance.conf")).unwrap();
        assert_eq!(full.checks.len(), CHECK_NAMES.len());
        match &full.checks[9] {
            Check::Probe { tol, .. } => assert_eq!(*tol, 2f64.powi(-128)),
            other => panic!("{other:?}"),
        }
        parse_config(include_str!("../../../configs/quick.conf")).unwrap();
    }

    #[test]
    fn empty_check_list() {
        assert!(parse_config("checks =\n").unwrap().checks.is_empty());
        assert!(parse_config("").unwrap().checks.is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = |t: &str| parse_config(t).unwrap_err().to_string();
        assert!(err("checks = gk\n\n[gk]\npairs = zeta3:3\n").starts_with("line 4: key `pairs`: unknown L-function `zeta3`"));
        assert!(err("precision_bits = lots").starts_with("line 1: key `precision_bits`"));
        assert!(err("checks = gk\nnonsense\n").starts_with("line 2: expected"));
        assert!(err("checks = gk, foo").contains("unknown check `foo`"));
        assert!(err("\n[mellin]\nalpha = 1/0\n").starts_with("line 3: key `alpha`"));
        assert!(err("[probe]\nk = 3\n").starts_with("line 2: unknown key `k`"));
        assert!(err("[probe]\n[probe]\n").starts_with("line 2: duplicate block"));
        assert!(err("[gk\n").starts_with("line 1: unterminated"));
    }
}
