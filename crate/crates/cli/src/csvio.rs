//! Minimal CSV: comma separators, '.' decimals, one header row, LF line
//! endings. Cells are numbers printed in their shortest round-tripping
//! form, so parsing a file recovers the written values exactly. Every
//! writer re-reads its own output and fails loudly on any mismatch.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        assert!(!columns.is_empty(), "a table needs at least one column");
        for c in columns {
            assert!(
                !c.is_empty() && !c.contains(',') && !c.contains('\n'),
                "bad column name {c:?}"
            );
        }
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| anyhow!("no column '{name}' in {:?}", self.columns))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Bitwise table equality, except that any NaN matches any NaN.
pub fn tables_equal(a: &Table, b: &Table) -> bool {
    a.columns == b.columns
        && a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| {
            x.len() == y.len()
                && x.iter()
                    .zip(y)
                    .all(|(p, q)| p.to_bits() == q.to_bits() || (p.is_nan() && q.is_nan()))
        })
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let mut text = String::new();
    text.push_str(&table.columns.join(","));
    text.push('\n');
    for row in &table.rows {
        assert_eq!(row.len(), table.columns.len(), "ragged row in table");
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                text.push(',');
            }
            // Display for f64 is the shortest string that parses back to
            // the same value; no locale, '.' decimal point.
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
    let back = read_csv(path)?;
    if !tables_equal(table, &back) {
        bail!("CSV round-trip mismatch for {}", path.display());
    }
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_csv(&text).with_context(|| format!("malformed CSV in {}", path.display()))
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty file"))?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    if columns.iter().any(String::is_empty) {
        bail!("empty column name in header {header:?}");
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| anyhow!("line {}: unparsable number {cell:?}", i + 2))
            })
            .collect::<Result<_>>()?;
        if row.len() != columns.len() {
            bail!("line {}: {} cells for {} columns", i + 2, row.len(), columns.len());
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}
