//! Field serialization: CSV of nodal values with a geometry header so any
//! consumer can reconstruct the grid, plus trace/residual/plot writers.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{DomainSpec, Point, RegionShape};
use crate::field::DiscreteField;
use crate::minimize::IterRecord;

#[derive(Debug, Error)]
pub enum IoFormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Domain(#[from] crate::error::DomainError),
    #[error(transparent)]
    Field(#[from] crate::error::FieldError),
}

/// Write a field as CSV with geometry metadata in `#`-prefixed header
/// lines. Floats use the shortest round-trip representation.
pub fn write_field_csv(w: &mut impl Write, field: &DiscreteField) -> io::Result<()> {
    let dom = field.domain();
    writeln!(w, "# fracvar-field v1")?;
    writeln!(w, "# dim,{}", dom.dim())?;
    let c = dom.cells_per_axis();
    writeln!(w, "# cells,{},{}", c[0], c[1])?;
    let bmin = dom.b_min();
    let bmax = dom.b_max();
    writeln!(w, "# b_min,{},{}", bmin[0], bmin[1])?;
    writeln!(w, "# b_max,{},{}", bmax[0], bmax[1])?;
    let mask: String = dom
        .omega_mask()
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect();
    writeln!(w, "# omega_mask,{mask}")?;
    match dom.shape() {
        RegionShape::Box { min, max } => {
            writeln!(w, "# shape,box,{},{},{},{}", min[0], min[1], max[0], max[1])?;
        }
        RegionShape::CellUnion => writeln!(w, "# shape,cells")?,
    }
    writeln!(w, "node,x0,x1,value")?;
    for node in 0..dom.num_nodes() {
        let x = dom.node_coords(node);
        writeln!(w, "{},{},{},{}", node, x[0], x[1], field.values()[node])?;
    }
    Ok(())
}

/// Read a field written by [`write_field_csv`].
pub fn read_field_csv(r: impl BufRead) -> Result<DiscreteField, IoFormatError> {
    let mut dim = None;
    let mut cells = None;
    let mut b_min: Option<Point> = None;
    let mut b_max: Option<Point> = None;
    let mut mask: Option<Vec<bool>> = None;
    let mut shape = RegionShape::CellUnion;
    let mut values: Vec<(usize, f64)> = Vec::new();
    let mut header_seen = false;

    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let parts: Vec<&str> = meta.trim().split(',').collect();
            match parts[0] {
                "fracvar-field v1" => {}
                "dim" => dim = Some(parse::<usize>(parts.get(1))?),
                "cells" => {
                    cells = Some([parse::<usize>(parts.get(1))?, parse::<usize>(parts.get(2))?])
                }
                "b_min" => b_min = Some([parse::<f64>(parts.get(1))?, parse::<f64>(parts.get(2))?]),
                "b_max" => b_max = Some([parse::<f64>(parts.get(1))?, parse::<f64>(parts.get(2))?]),
                "omega_mask" => {
                    mask = Some(
                        parts
                            .get(1)
                            .ok_or_else(|| IoFormatError::Format("missing mask".into()))?
                            .chars()
                            .map(|c| c == '1')
                            .collect(),
                    )
                }
                "shape" => {
                    if parts.get(1) == Some(&"box") {
                        shape = RegionShape::Box {
                            min: [parse::<f64>(parts.get(2))?, parse::<f64>(parts.get(3))?],
                            max: [parse::<f64>(parts.get(4))?, parse::<f64>(parts.get(5))?],
                        };
                    }
                }
                other => {
                    return Err(IoFormatError::Format(format!("unknown header '{other}'")));
                }
            }
            continue;
        }
        if !header_seen {
            // column header line
            header_seen = true;
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(IoFormatError::Format(format!("bad row '{line}'")));
        }
        values.push((parse::<usize>(parts.first())?, parse::<f64>(parts.get(3))?));
    }

    let dim = dim.ok_or_else(|| IoFormatError::Format("missing dim".into()))?;
    let cells = cells.ok_or_else(|| IoFormatError::Format("missing cells".into()))?;
    let b_min = b_min.ok_or_else(|| IoFormatError::Format("missing b_min".into()))?;
    let b_max = b_max.ok_or_else(|| IoFormatError::Format("missing b_max".into()))?;
    let mask = mask.ok_or_else(|| IoFormatError::Format("missing omega_mask".into()))?;
    let dom = Arc::new(DomainSpec::from_parts(dim, b_min, b_max, cells, mask, shape)?);
    let mut nodal = vec![0.0; dom.num_nodes()];
    if values.len() != nodal.len() {
        return Err(IoFormatError::Format(format!(
            "expected {} rows, found {}",
            nodal.len(),
            values.len()
        )));
    }
    for (node, v) in values {
        if node >= nodal.len() {
            return Err(IoFormatError::Format(format!("node {node} out of range")));
        }
        nodal[node] = v;
    }
    Ok(DiscreteField::from_values(dom, nodal)?)
}

fn parse<T: std::str::FromStr>(s: Option<&&str>) -> Result<T, IoFormatError> {
    s.ok_or_else(|| IoFormatError::Format("missing value".into()))?
        .trim()
        .parse::<T>()
        .map_err(|_| IoFormatError::Format(format!("cannot parse '{}'", s.unwrap())))
}

/// Iteration trace as CSV.
pub fn write_trace_csv(w: &mut impl Write, trace: &[IterRecord]) -> io::Result<()> {
    writeln!(w, "iter,energy,grad_norm,step")?;
    for r in trace {
        writeln!(w, "{},{},{},{}", r.iter, r.energy, r.grad_norm, r.step)?;
    }
    Ok(())
}

/// Gnuplot-friendly convergence data: whitespace-separated columns with a
/// comment header.
pub fn write_plotdata(w: &mut impl Write, trace: &[IterRecord]) -> io::Result<()> {
    writeln!(w, "# iter energy grad_norm step")?;
    for r in trace {
        writeln!(w, "{} {} {} {}", r.iter, r.energy, r.grad_norm, r.step)?;
    }
    Ok(())
}

/// Residual vectors as CSV `(index, r_u, r_v)`.
pub fn write_residual_csv(w: &mut impl Write, r_u: &[f64], r_v: &[f64]) -> io::Result<()> {
    writeln!(w, "index,r_u,r_v")?;
    for (i, (a, b)) in r_u.iter().zip(r_v.iter()).enumerate() {
        writeln!(w, "{i},{a},{b}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_csv_roundtrip_is_exact() {
        let dom = Arc::new(DomainSpec::line(0.0, 1.0, 8, 2.0).unwrap());
        let u = DiscreteField::hat(dom.clone(), [0.5, 0.0], 0.25, 0.123456789012345);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &u).unwrap();
        let back = read_field_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(back.domain().cells_per_axis(), dom.cells_per_axis());
        assert_eq!(back.domain().b_min(), dom.b_min());
    }

    #[test]
    fn rejects_malformed_input() {
        let garbage = "# fracvar-field v1\n# dim,1\nnode,x0,x1,value\n0,0,0,1\n";
        assert!(read_field_csv(garbage.as_bytes()).is_err());
    }
}
