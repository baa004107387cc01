//! CSV ingestion: header row required, columns picked by name or by
//! 0-based index.

use std::path::Path;

use crate::CliError;

/// A column given by header name, or by position when it parses as an
/// integer and no header has that exact name.
#[derive(Debug, Clone)]
pub struct ColumnSpec(pub String);

pub struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
    source: String,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let source = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        let headers = reader
            .headers()
            .map_err(|e| CliError::Input(format!("{source}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        Ok(Self {
            headers,
            rows,
            source,
        })
    }

    fn index_of(&self, spec: &ColumnSpec) -> Result<usize, CliError> {
        if let Some(i) = self.headers.iter().position(|h| h == &spec.0) {
            return Ok(i);
        }
        match spec.0.parse::<usize>() {
            Ok(i) if i < self.headers.len() => Ok(i),
            _ => Err(CliError::Input(format!(
                "{}: no column `{}` (columns: {})",
                self.source,
                spec.0,
                self.headers.join(", ")
            ))),
        }
    }

    pub fn column(&self, spec: &ColumnSpec) -> Result<Vec<f64>, CliError> {
        let i = self.index_of(spec)?;
        let name = &self.headers[i];
        let values = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, rec)| {
                let cell = rec.get(i).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        CliError::Input(format!(
                            "{}: row {}, column `{name}`: `{cell}` is not a finite number",
                            self.source,
                            r + 2
                        ))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(CliError::Input(format!("{}: no data rows", self.source)));
        }
        Ok(values)
    }
}

/// Risk aversions parsed from one command-line value.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaGrid(pub Vec<f64>);

/// `lo:hi:step` (inclusive) or a comma-separated list.
pub fn parse_gamma_grid(text: &str) -> Result<GammaGrid, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{s}` is not a number"))
    };
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (num(lo)?, num(hi)?, 1.0),
            [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
            _ => return Err("expected lo:hi or lo:hi:step".into()),
        };
        if step.is_nan() || step <= 0.0 || hi < lo {
            return Err("range needs lo <= hi and a positive step".into());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| lo + step * i as f64).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if grid.is_empty()
        || grid
            .iter()
            .any(|g| g.is_nan() || *g <= 0.0 || !g.is_finite())
    {
        return Err("risk aversions must be positive".into());
    }
    Ok(GammaGrid(grid))
}
