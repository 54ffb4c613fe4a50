//! Literal parsers shared by the subcommands and the campaign config.

use anyhow::{anyhow, bail, Result};
use rug::Float;
use twistlab_core::mp::{parse_real, Cx, Prec};

/// `re,im`, `a+bi`, `a-bi`, `bi` or a plain real.
pub fn complex(text: &str, prec: Prec) -> Result<Cx> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        bail!("empty complex literal");
    }
    if let Some((re, im)) = t.split_once(',') {
        return Ok(Cx::new(real(re, prec)?, real(im, prec)?));
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Cx::from_real(real(&t, prec)?));
    };
    // split before the last sign that is not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    Ok(Cx::new(real(re, prec)?, real(im, prec)?))
}

pub fn real(text: &str, prec: Prec) -> Result<Float> {
    parse_real(prec, text).map_err(|_| anyhow!("not a real number: {text:?}"))
}

/// `p/q` or an integer, returned in lowest terms with a positive denominator.
pub fn fraction(text: &str) -> Result<(i64, u64)> {
    let t = text.trim();
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: i64 = n.parse().map_err(|_| anyhow!("bad numerator in {t:?}"))?;
    let d: u64 = d.parse().map_err(|_| anyhow!("bad denominator in {t:?}"))?;
    if d == 0 {
        bail!("zero denominator in {t:?}");
    }
    let g = twistlab_core::arith::gcd(n.unsigned_abs(), d).max(1);
    Ok((n / g as i64, d / g))
}

/// Comma-separated items, blanks dropped.
pub fn list(text: &str) -> Vec<&str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}
