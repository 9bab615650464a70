//! Text container for a solve result.
//!
//! ```text
//! cadloop-result v1
//! converged <true|false>
//! iterations <n>
//! relative_residual <r>
//! displacements <n>
//! <ux> <uy> <uz>                  (n lines)
//! stresses <n>
//! <sxx> <syy> <szz> <txy> <tyz> <tzx>   (n lines)
//! log <n>
//! <text line>                     (n lines)
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::ResultField;
use crate::error::{Error, Result};

pub const MAGIC: &str = "cadloop-result v1";

pub fn write_result(r: &ResultField) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "converged {}", r.converged);
    let _ = writeln!(s, "iterations {}", r.iterations);
    let _ = writeln!(s, "relative_residual {}", r.relative_residual);
    let _ = writeln!(s, "displacements {}", r.nodal_displacements.len());
    for u in &r.nodal_displacements {
        let _ = writeln!(s, "{} {} {}", u[0], u[1], u[2]);
    }
    let _ = writeln!(s, "stresses {}", r.stress_tensors.len());
    for t in &r.stress_tensors {
        let _ = writeln!(s, "{} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5]);
    }
    let log: Vec<&str> = r.solver_log.lines().collect();
    let _ = writeln!(s, "log {}", log.len());
    for l in log {
        let _ = writeln!(s, "{l}");
    }
    s.push_str("end\n");
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn read_result(text: &str) -> Result<ResultField> {
    let mut lines = text.lines();
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("missing {what}")));
    if next("header")? != MAGIC {
        return Err(bad("not a result file"));
    }
    fn value<'a>(line: &'a str, key: &str) -> Result<&'a str> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| bad(format!("expected `{key}`")))
    }
    fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
        s.trim().parse().map_err(|_| bad(format!("cannot parse `{s}`")))
    }
    let converged: bool = num(value(next("converged")?, "converged")?)?;
    let iterations: usize = num(value(next("iterations")?, "iterations")?)?;
    let relative_residual: f64 = num(value(next("relative_residual")?, "relative_residual")?)?;
    let n: usize = num(value(next("displacements")?, "displacements")?)?;
    let mut nodal_displacements = Vec::with_capacity(n);
    for _ in 0..n {
        let v = next("displacement")?
            .split_whitespace()
            .map(num::<f64>)
            .collect::<Result<Vec<_>>>()?;
        if v.len() != 3 {
            return Err(bad("displacement needs 3 components"));
        }
        nodal_displacements.push([v[0], v[1], v[2]]);
    }
    let n: usize = num(value(next("stresses")?, "stresses")?)?;
    let mut stress_tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let v = next("stress")?
            .split_whitespace()
            .map(num::<f64>)
            .collect::<Result<Vec<_>>>()?;
        if v.len() != 6 {
            return Err(bad("stress needs 6 components"));
        }
        stress_tensors.push([v[0], v[1], v[2], v[3], v[4], v[5]]);
    }
    let n: usize = num(value(next("log")?, "log")?)?;
    let mut solver_log = String::new();
    for _ in 0..n {
        solver_log.push_str(next("log line")?);
        solver_log.push('\n');
    }
    if next("end")? != "end" {
        return Err(bad("expected `end`"));
    }
    Ok(ResultField {
        nodal_displacements,
        stress_tensors,
        iterations,
        relative_residual,
        converged,
        solver_log,
    })
}

pub fn save(r: &ResultField, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_result(r))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ResultField> {
    read_result(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let r = ResultField {
            nodal_displacements: vec![[0.0, -1.25e-3, 3.0], [1.0 / 3.0, 0.0, 0.0]],
            stress_tensors: vec![[1.0, 2.0, 3.0, 4.0, 5.0, 6.5e-7]],
            iterations: 17,
            relative_residual: 3.2e-9,
            converged: true,
            solver_log: "line one\nline two\n".into(),
        };
        let text = write_result(&r);
        assert_eq!(read_result(&text).unwrap(), r);
        assert!(read_result(&text.replace("end\n", "")).is_err());
    }
}
