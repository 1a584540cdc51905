//! Plain-text formats for signals, observation batches and invariant
//! estimates. Numbers are written with Rust's shortest round-trip
//! formatting, so reading back gives identical values.
//!
//! Signal:
//! ```text
//! # N=4 kind=real
//! 0.5
//! ...
//! ```
//! Complex entries are written as `re im`.
//!
//! Batch: a header `# N=.. M=.. sigma=.. kind=.. seed=.. shifts=yes|no`,
//! then one observation per line. With `shifts=yes` each line starts with
//! the true shift. Entries follow separated by spaces (pairs for complex).
//!
//! Estimates: lines `N=`, `M=`, `sigma=`, `kind=`, then `mu_hat` as
//! `re im`, N power spectrum lines, and N² bispectrum lines `re im` in
//! row-major order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{MraError, Result};
use crate::invariants::{CMat, InvariantEstimates};
use crate::observations::ObservationBatch;
use crate::signal::Signal;

fn kind_name(is_real: bool) -> &'static str {
    if is_real {
        "real"
    } else {
        "complex"
    }
}

fn parse_kind(s: &str, line: usize) -> Result<bool> {
    match s {
        "real" => Ok(true),
        "complex" => Ok(false),
        _ => Err(MraError::Parse { line, msg: format!("unknown kind '{s}'") }),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| MraError::Parse { line, msg: format!("bad {what} '{s}'") })
}

/// `key=value` pairs of a header such as `# N=4 kind=real`.
fn header_fields(text: &str, line: usize) -> Result<HashMap<String, String>> {
    let body = text.trim().strip_prefix('#').ok_or(MraError::Parse { line, msg: "missing '#' header".into() })?;
    let mut out = HashMap::new();
    for tok in body.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or(MraError::Parse { line, msg: format!("bad header field '{tok}'") })?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

fn field<'a>(h: &'a HashMap<String, String>, key: &str, line: usize) -> Result<&'a str> {
    h.get(key).map(|s| s.as_str()).ok_or(MraError::Parse { line, msg: format!("missing '{key}'") })
}

fn push_value(out: &mut String, v: C64, is_real: bool) {
    if is_real {
        let _ = write!(out, "{}", v.re);
    } else {
        let _ = write!(out, "{} {}", v.re, v.im);
    }
}

fn parse_values(toks: &[&str], is_real: bool, line: usize) -> Result<Vec<C64>> {
    if is_real {
        toks.iter().map(|t| parse_num::<f64>(t, line, "number").map(|v| C64::new(v, 0.0))).collect()
    } else {
        if toks.len() % 2 != 0 {
            return Err(MraError::Parse { line, msg: "complex entries need 're im' pairs".into() });
        }
        toks.chunks(2)
            .map(|p| Ok(C64::new(parse_num(p[0], line, "number")?, parse_num(p[1], line, "number")?)))
            .collect()
    }
}

/// Non-empty lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

pub fn signal_to_string(x: &Signal) -> String {
    let mut out = format!("# N={} kind={}\n", x.len(), kind_name(x.is_real()));
    for v in x.values() {
        push_value(&mut out, *v, x.is_real());
        out.push('\n');
    }
    out
}

pub fn signal_from_str(text: &str) -> Result<Signal> {
    let mut it = lines(text);
    let (l0, head) = it.next().ok_or(MraError::Parse { line: 1, msg: "empty signal file".into() })?;
    let h = header_fields(head, l0)?;
    let n: usize = parse_num(field(&h, "N", l0)?, l0, "N")?;
    let is_real = parse_kind(field(&h, "kind", l0)?, l0)?;
    let mut values = Vec::with_capacity(n);
    for (ln, l) in it {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let want = if is_real { 1 } else { 2 };
        if toks.len() != want {
            return Err(MraError::Parse { line: ln, msg: format!("expected {want} number(s)") });
        }
        values.extend(parse_values(&toks, is_real, ln)?);
    }
    if values.len() != n {
        return Err(MraError::LengthMismatch { expected: n, got: values.len() });
    }
    Signal::new(values, is_real)
}

pub fn batch_to_string(b: &ObservationBatch) -> String {
    let mut out = format!(
        "# N={} M={} sigma={} kind={} seed={} shifts={}\n",
        b.n,
        b.len(),
        b.sigma,
        kind_name(b.is_real),
        b.seed,
        if b.true_shifts.is_some() { "yes" } else { "no" }
    );
    for (j, o) in b.observations.iter().enumerate() {
        let mut parts = Vec::with_capacity(o.len() + 1);
        if let Some(s) = &b.true_shifts {
            parts.push(s[j].to_string());
        }
        for v in o {
            let mut s = String::new();
            push_value(&mut s, *v, b.is_real);
            parts.push(s);
        }
        out.push_str(&parts.join(" "));
        out.push('\n');
    }
    out
}

pub fn batch_from_str(text: &str) -> Result<ObservationBatch> {
    let mut it = lines(text);
    let (l0, head) = it.next().ok_or(MraError::Parse { line: 1, msg: "empty batch file".into() })?;
    let h = header_fields(head, l0)?;
    let n: usize = parse_num(field(&h, "N", l0)?, l0, "N")?;
    let m: usize = parse_num(field(&h, "M", l0)?, l0, "M")?;
    let sigma: f64 = parse_num(field(&h, "sigma", l0)?, l0, "sigma")?;
    let is_real = parse_kind(field(&h, "kind", l0)?, l0)?;
    let seed: u64 = h.get("seed").map(|s| parse_num(s, l0, "seed")).transpose()?.unwrap_or(0);
    let with_shifts = h.get("shifts").map(|s| s == "yes").unwrap_or(false);
    let mut obs = Vec::with_capacity(m);
    let mut shifts = Vec::new();
    for (ln, l) in it {
        let mut toks: Vec<&str> = l.split_whitespace().collect();
        if with_shifts {
            if toks.is_empty() {
                return Err(MraError::Parse { line: ln, msg: "missing shift".into() });
            }
            let s: usize = parse_num(toks.remove(0), ln, "shift")?;
            if s >= n {
                return Err(MraError::Parse { line: ln, msg: format!("shift {s} out of range") });
            }
            shifts.push(s);
        }
        let v = parse_values(&toks, is_real, ln)?;
        if v.len() != n {
            return Err(MraError::Parse { line: ln, msg: format!("expected {n} entries, got {}", v.len()) });
        }
        obs.push(v);
    }
    if obs.len() != m {
        return Err(MraError::LengthMismatch { expected: m, got: obs.len() });
    }
    let mut b = ObservationBatch::new(obs, sigma, is_real)?;
    b.seed = seed;
    if with_shifts {
        b.true_shifts = Some(shifts);
    }
    Ok(b)
}

pub fn estimates_to_string(e: &InvariantEstimates) -> String {
    let mut out = format!("N={}\nM={}\nsigma={}\nkind={}\n", e.n, e.count, e.sigma, kind_name(e.is_real));
    let _ = writeln!(out, "{} {}", e.mu_hat.re, e.mu_hat.im);
    for p in &e.power_hat {
        let _ = writeln!(out, "{p}");
    }
    for k1 in 0..e.n {
        for k2 in 0..e.n {
            let v = e.bispec_hat[(k1, k2)];
            let _ = writeln!(out, "{} {}", v.re, v.im);
        }
    }
    out
}

pub fn estimates_from_str(text: &str) -> Result<InvariantEstimates> {
    let all: Vec<(usize, &str)> = lines(text).collect();
    let get = |i: usize, key: &str| -> Result<(usize, String)> {
        let (ln, l) = *all.get(i).ok_or(MraError::Parse { line: i + 1, msg: format!("missing '{key}='") })?;
        let v = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or(MraError::Parse { line: ln, msg: format!("expected '{key}='") })?;
        Ok((ln, v.to_string()))
    };
    let (ln, v) = get(0, "N")?;
    let n: usize = parse_num(&v, ln, "N")?;
    let (ln, v) = get(1, "M")?;
    let count: u64 = parse_num(&v, ln, "M")?;
    let (ln, v) = get(2, "sigma")?;
    let sigma: f64 = parse_num(&v, ln, "sigma")?;
    let (ln, v) = get(3, "kind")?;
    let is_real = parse_kind(&v, ln)?;
    let expected = 4 + 1 + n + n * n;
    if all.len() != expected {
        return Err(MraError::Parse { line: all.last().map_or(1, |l| l.0), msg: format!("expected {expected} lines, got {}", all.len()) });
    }
    let pair = |i: usize| -> Result<C64> {
        let (ln, l) = all[i];
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(MraError::Parse { line: ln, msg: "expected 're im'".into() });
        }
        Ok(C64::new(parse_num(toks[0], ln, "number")?, parse_num(toks[1], ln, "number")?))
    };
    let mu_hat = pair(4)?;
    let power_hat = (0..n).map(|k| parse_num(all[5 + k].1, all[5 + k].0, "power")).collect::<Result<Vec<f64>>>()?;
    let mut bispec_hat = CMat::zeros(n, n);
    for k1 in 0..n {
        for k2 in 0..n {
            bispec_hat[(k1, k2)] = pair(5 + n + k1 * n + k2)?;
        }
    }
    Ok(InvariantEstimates { n, count, sigma, is_real, mu_hat, power_hat, bispec_hat })
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    signal_from_str(&fs::read_to_string(path)?)
}

pub fn write_signal(path: &Path, x: &Signal) -> Result<()> {
    Ok(fs::write(path, signal_to_string(x))?)
}

pub fn read_batch(path: &Path) -> Result<ObservationBatch> {
    batch_from_str(&fs::read_to_string(path)?)
}

pub fn write_batch(path: &Path, b: &ObservationBatch) -> Result<()> {
    Ok(fs::write(path, batch_to_string(b))?)
}

pub fn read_estimates(path: &Path) -> Result<InvariantEstimates> {
    estimates_from_str(&fs::read_to_string(path)?)
}

pub fn write_estimates(path: &Path, e: &InvariantEstimates) -> Result<()> {
    Ok(fs::write(path, estimates_to_string(e))?)
}
