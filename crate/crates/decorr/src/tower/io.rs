//! Versioned tower files: a self-describing text header followed by the
//! cell table, either as text rows or as a raw little-endian block for
//! large towers.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::systems::SystemSpec;
use crate::tower::{TailLaw, TowerCell, TowerKind, TowerModel};

const MAGIC: &str = "decorr-tower v1";

/// Write a tower. With `binary_cells` the cell table is a raw block of
/// little-endian records (lo f64, hi f64, return u32, weight f64); text rows
/// otherwise.
pub fn write_tower<R: Real, W: Write>(
    w: &mut W,
    tower: &TowerModel<R>,
    binary_cells: bool,
) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    match tower.kind() {
        TowerKind::Induced { system, base } => {
            writeln!(w, "kind: induced")?;
            writeln!(
                w,
                "system: {}",
                serde_json::to_string(&to_f64_system(system)).expect("system is serializable")
            )?;
            writeln!(w, "base: {:?} {:?}", base.0.as_f64(), base.1.as_f64())?;
        }
        TowerKind::Synthetic { law, branching } => {
            writeln!(w, "kind: synthetic")?;
            writeln!(
                w,
                "law: {}",
                serde_json::to_string(&to_f64_law(law)).expect("law is serializable")
            )?;
            writeln!(w, "branching: {branching}")?;
        }
    }
    writeln!(w, "cells: {}", tower.cells().len())?;
    writeln!(w, "remainder: {:?}", tower.remainder_mass().as_f64())?;
    writeln!(w, "truncation: {:?}", tower.truncation_mass().as_f64())?;
    writeln!(w, "entry_diams: {}", tower.entry_diams().len())?;
    for d in tower.entry_diams() {
        writeln!(w, "{:?}", d.as_f64())?;
    }
    if binary_cells {
        writeln!(w, "encoding: binary")?;
        writeln!(w, "---")?;
        for c in tower.cells() {
            let (lo, hi) = c
                .interval
                .map(|(a, b)| (a.as_f64(), b.as_f64()))
                .unwrap_or((f64::NAN, f64::NAN));
            w.write_all(&lo.to_le_bytes())?;
            w.write_all(&hi.to_le_bytes())?;
            w.write_all(&c.return_time.to_le_bytes())?;
            w.write_all(&c.weight.as_f64().to_le_bytes())?;
        }
    } else {
        writeln!(w, "encoding: text")?;
        writeln!(w, "---")?;
        for c in tower.cells() {
            match c.interval {
                Some((lo, hi)) => writeln!(
                    w,
                    "{:?} {:?} {} {:?}",
                    lo.as_f64(),
                    hi.as_f64(),
                    c.return_time,
                    c.weight.as_f64()
                )?,
                None => writeln!(w, "- - {} {:?}", c.return_time, c.weight.as_f64())?,
            }
        }
    }
    Ok(())
}

fn to_f64_system<R: Real>(s: &SystemSpec<R>) -> SystemSpec<f64> {
    match *s {
        SystemSpec::Henon { a, b } => SystemSpec::Henon {
            a: a.as_f64(),
            b: b.as_f64(),
        },
        SystemSpec::IntermittentCircle { gamma, d } => SystemSpec::IntermittentCircle {
            gamma: gamma.as_f64(),
            d,
        },
        SystemSpec::IntermittentSolenoid { gamma, d } => SystemSpec::IntermittentSolenoid {
            gamma: gamma.as_f64(),
            d,
        },
        SystemSpec::Doubling => SystemSpec::Doubling,
    }
}

fn to_f64_law<R: Real>(l: &TailLaw<R>) -> TailLaw<f64> {
    match *l {
        TailLaw::ExpTail { theta } => TailLaw::ExpTail {
            theta: theta.as_f64(),
        },
        TailLaw::StretchedTail { c, eta } => TailLaw::StretchedTail {
            c: c.as_f64(),
            eta: eta.as_f64(),
        },
        TailLaw::PolyTail { alpha } => TailLaw::PolyTail {
            alpha: alpha.as_f64(),
        },
    }
}

fn from_f64_system<R: Real>(s: SystemSpec<f64>) -> SystemSpec<R> {
    match s {
        SystemSpec::Henon { a, b } => SystemSpec::Henon {
            a: R::of(a),
            b: R::of(b),
        },
        SystemSpec::IntermittentCircle { gamma, d } => SystemSpec::IntermittentCircle {
            gamma: R::of(gamma),
            d,
        },
        SystemSpec::IntermittentSolenoid { gamma, d } => SystemSpec::IntermittentSolenoid {
            gamma: R::of(gamma),
            d,
        },
        SystemSpec::Doubling => SystemSpec::Doubling,
    }
}

fn from_f64_law<R: Real>(l: TailLaw<f64>) -> TailLaw<R> {
    match l {
        TailLaw::ExpTail { theta } => TailLaw::ExpTail {
            theta: R::of(theta),
        },
        TailLaw::StretchedTail { c, eta } => TailLaw::StretchedTail {
            c: R::of(c),
            eta: R::of(eta),
        },
        TailLaw::PolyTail { alpha } => TailLaw::PolyTail {
            alpha: R::of(alpha),
        },
    }
}

struct HeaderLine {
    key: String,
    value: String,
}

fn parse_header_line(line: &str) -> Result<HeaderLine> {
    let (key, value) = line
        .split_once(':')
        .ok_or_else(|| Error::Format(format!("expected `key: value`, got {line:?}")))?;
    Ok(HeaderLine {
        key: key.trim().to_string(),
        value: value.trim().to_string(),
    })
}

/// Read a tower written by `write_tower`.
pub fn read_tower<R: Real, Rd: Read>(r: Rd) -> Result<TowerModel<R>> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();

    let mut next_line = |reader: &mut BufReader<Rd>| -> Result<String> {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::Format("unexpected end of file".into()));
        }
        Ok(line.trim_end().to_string())
    };

    let magic = next_line(&mut reader)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic line {magic:?}")));
    }
    let kind_line = parse_header_line(&next_line(&mut reader)?)?;
    if kind_line.key != "kind" {
        return Err(Error::Format("missing kind".into()));
    }
    let kind: TowerKind<R> = match kind_line.value.as_str() {
        "induced" => {
            let sys = parse_header_line(&next_line(&mut reader)?)?;
            let system: SystemSpec<f64> = serde_json::from_str(&sys.value)
                .map_err(|e| Error::Format(format!("system json: {e}")))?;
            let base_line = parse_header_line(&next_line(&mut reader)?)?;
            let parts: Vec<&str> = base_line.value.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Format("base needs two endpoints".into()));
            }
            let lo: f64 = parts[0]
                .parse()
                .map_err(|e| Error::Format(format!("base lo: {e}")))?;
            let hi: f64 = parts[1]
                .parse()
                .map_err(|e| Error::Format(format!("base hi: {e}")))?;
            TowerKind::Induced {
                system: from_f64_system(system),
                base: (R::of(lo), R::of(hi)),
            }
        }
        "synthetic" => {
            let law_line = parse_header_line(&next_line(&mut reader)?)?;
            let law: TailLaw<f64> = serde_json::from_str(&law_line.value)
                .map_err(|e| Error::Format(format!("law json: {e}")))?;
            let br = parse_header_line(&next_line(&mut reader)?)?;
            let branching: u32 = br
                .value
                .parse()
                .map_err(|e| Error::Format(format!("branching: {e}")))?;
            TowerKind::Synthetic {
                law: from_f64_law(law),
                branching,
            }
        }
        other => return Err(Error::Format(format!("unknown kind {other:?}"))),
    };

    let n_cells: usize = parse_header_line(&next_line(&mut reader)?)?
        .value
        .parse()
        .map_err(|e| Error::Format(format!("cells: {e}")))?;
    let remainder: f64 = parse_header_line(&next_line(&mut reader)?)?
        .value
        .parse()
        .map_err(|e| Error::Format(format!("remainder: {e}")))?;
    let truncation: f64 = parse_header_line(&next_line(&mut reader)?)?
        .value
        .parse()
        .map_err(|e| Error::Format(format!("truncation: {e}")))?;
    let n_entries: usize = parse_header_line(&next_line(&mut reader)?)?
        .value
        .parse()
        .map_err(|e| Error::Format(format!("entry_diams: {e}")))?;
    let mut entry_diams = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let v: f64 = next_line(&mut reader)?
            .parse()
            .map_err(|e| Error::Format(format!("entry diameter: {e}")))?;
        entry_diams.push(R::of(v));
    }
    let encoding = parse_header_line(&next_line(&mut reader)?)?;
    let sep = next_line(&mut reader)?;
    if sep != "---" {
        return Err(Error::Format("missing table separator".into()));
    }

    let mut cells = Vec::with_capacity(n_cells);
    match encoding.value.as_str() {
        "text" => {
            for _ in 0..n_cells {
                let row = next_line(&mut reader)?;
                let parts: Vec<&str> = row.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(Error::Format(format!("bad cell row {row:?}")));
                }
                let interval = if parts[0] == "-" {
                    None
                } else {
                    let lo: f64 = parts[0]
                        .parse()
                        .map_err(|e| Error::Format(format!("cell lo: {e}")))?;
                    let hi: f64 = parts[1]
                        .parse()
                        .map_err(|e| Error::Format(format!("cell hi: {e}")))?;
                    Some((R::of(lo), R::of(hi)))
                };
                let return_time: u32 = parts[2]
                    .parse()
                    .map_err(|e| Error::Format(format!("return time: {e}")))?;
                let weight: f64 = parts[3]
                    .parse()
                    .map_err(|e| Error::Format(format!("weight: {e}")))?;
                cells.push(TowerCell {
                    interval,
                    return_time,
                    weight: R::of(weight),
                });
            }
        }
        "binary" => {
            let mut buf = [0u8; 8 + 8 + 4 + 8];
            for _ in 0..n_cells {
                reader.read_exact(&mut buf)?;
                let lo = f64::from_le_bytes(buf[0..8].try_into().unwrap());
                let hi = f64::from_le_bytes(buf[8..16].try_into().unwrap());
                let return_time = u32::from_le_bytes(buf[16..20].try_into().unwrap());
                let weight = f64::from_le_bytes(buf[20..28].try_into().unwrap());
                let interval = if lo.is_nan() {
                    None
                } else {
                    Some((R::of(lo), R::of(hi)))
                };
                cells.push(TowerCell {
                    interval,
                    return_time,
                    weight: R::of(weight),
                });
            }
        }
        other => return Err(Error::Format(format!("unknown encoding {other:?}"))),
    }

    TowerModel::assemble(kind, cells, R::of(remainder), R::of(truncation), entry_diams)
}
