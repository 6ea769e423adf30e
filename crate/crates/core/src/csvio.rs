//! Dataset CSV formats.
//!
//! Cox variants (right-censored and current status) share the header
//! `y,delta,z1[,z2,...]`; partly linear data uses `c,delta,w,z`. Floats are
//! printed with 17 significant digits so files round-trip bit-exactly.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{CoxObservation, Dataset, PartlyLinearObservation};

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    if data.is_cox() {
        let obs = data.cox()?;
        out.push_str("y,delta");
        for j in 1..=obs[0].z.len() {
            out.push_str(&format!(",z{j}"));
        }
        out.push('\n');
        for o in obs {
            out.push_str(&fmt_f64(o.y));
            out.push_str(if o.delta { ",1" } else { ",0" });
            for z in &o.z {
                out.push(',');
                out.push_str(&fmt_f64(*z));
            }
            out.push('\n');
        }
    } else {
        out.push_str("c,delta,w,z\n");
        for o in data.partly_linear()? {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(o.c),
                if o.delta { 1 } else { 0 },
                fmt_f64(o.w),
                fmt_f64(o.z)
            ));
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number '{tok}'"),
    })
}

fn parse_delta(tok: &str, line: usize) -> Result<bool> {
    match tok.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            line,
            message: format!("indicator must be 0 or 1, got '{other}'"),
        }),
    }
}

/// Read a dataset, inferring the variant from the header row.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();

    if cols.first() == Some(&"y") && cols.get(1) == Some(&"delta") && cols.len() >= 3 {
        let d = cols.len() - 2;
        let mut obs = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = raw.split(',').collect();
            if toks.len() != d + 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, got {}", d + 2, toks.len()),
                });
            }
            let y = parse_f64(toks[0], line)?;
            let delta = parse_delta(toks[1], line)?;
            let z = toks[2..]
                .iter()
                .map(|t| parse_f64(t, line))
                .collect::<Result<Vec<f64>>>()?;
            obs.push(CoxObservation::new(y, delta, z)?);
        }
        Dataset::from_cox(obs)
    } else if cols == ["c", "delta", "w", "z"] {
        let mut obs = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = raw.split(',').collect();
            if toks.len() != 4 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 4 fields, got {}", toks.len()),
                });
            }
            obs.push(PartlyLinearObservation::new(
                parse_f64(toks[0], line)?,
                parse_delta(toks[1], line)?,
                parse_f64(toks[2], line)?,
                parse_f64(toks[3], line)?,
            )?);
        }
        Dataset::from_partly_linear(obs)
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!("unrecognized header '{header}'"),
        })
    }
}
