//! Fact-table CSV ingestion and export.
//!
//! Input is UTF-8 CSV with a header row. The schema selects `d` dimension
//! columns and an optional measure column, each by name or 0-based index. A
//! missing measure column (or an empty measure field) means measure 1.

use std::io::{Read, Write};

use crate::cube::{Cube, CubeBuilder};
use crate::error::{Error, Result};

/// A column selected by header name or 0-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// Parses a bare integer as an index, anything else as a name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_owned()),
        }
    }

    fn resolve(&self, header: &csv::StringRecord) -> Result<usize> {
        match self {
            ColumnRef::Index(i) if *i < header.len() => Ok(*i),
            ColumnRef::Index(i) => Err(Error::Ingest {
                row: 1,
                message: format!("column index {i} out of range ({} columns)", header.len()),
            }),
            ColumnRef::Name(n) => header.iter().position(|h| h == n).ok_or_else(|| Error::Ingest {
                row: 1,
                message: format!("no column named '{n}'"),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactSchema {
    /// Dimension columns in dimension order. Empty means every column except
    /// the measure.
    pub dims: Vec<ColumnRef>,
    pub measure: Option<ColumnRef>,
}

impl FactSchema {
    pub fn new(dims: Vec<ColumnRef>, measure: Option<ColumnRef>) -> Self {
        Self { dims, measure }
    }
}

/// Reads a fact table into a cube, merging duplicate coordinates by summing
/// their measures.
pub fn ingest_csv<R: Read>(reader: R, schema: &FactSchema) -> Result<Cube> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Ingest {
            row: 1,
            message: "missing header row".into(),
        });
    }
    let measure_col = schema.measure.as_ref().map(|m| m.resolve(&header)).transpose()?;
    let dim_cols: Vec<usize> = if schema.dims.is_empty() {
        (0..header.len()).filter(|&i| Some(i) != measure_col).collect()
    } else {
        schema.dims.iter().map(|c| c.resolve(&header)).collect::<Result<_>>()?
    };
    if dim_cols.is_empty() {
        return Err(Error::Ingest {
            row: 1,
            message: "no dimension columns".into(),
        });
    }

    let mut builder = CubeBuilder::new(dim_cols.iter().map(|&i| header[i].to_owned()));
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Ingest {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let measure = match measure_col.map(|i| record[i].trim()) {
            None | Some("") => 1.0,
            Some(raw) => raw.parse::<f64>().ok().filter(|m| m.is_finite()).ok_or_else(|| Error::Ingest {
                row,
                message: format!("unparseable measure '{raw}'"),
            })?,
        };
        let values: Vec<&str> = dim_cols.iter().map(|&i| &record[i]).collect();
        builder.add(&values, measure)?;
    }
    Ok(builder.build())
}

/// Writes a cube in the same CSV schema: one column per dimension followed by
/// a measure column named `measure_name`.
pub fn write_csv<W: Write>(cube: &Cube, writer: W, measure_name: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = cube.dims().iter().map(|d| d.name()).collect();
    header.push(measure_name);
    wtr.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(cube.dim_count() + 1);
    for cell in cube.cells() {
        fields.clear();
        for (dim, &id) in cube.dims().iter().zip(cell.coords) {
            fields.push(dim.value(id).unwrap_or_default().to_owned());
        }
        fields.push(format_measure(cell.measure));
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Integers print without a fractional part; other values use the shortest
/// representation that round-trips.
pub fn format_measure(m: f64) -> String {
    if m.fract() == 0.0 && m.abs() < 1e15 {
        format!("{}", m as i64)
    } else {
        format!("{m}")
    }
}
