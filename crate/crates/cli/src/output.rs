use std::io::{self, Write};

use serde_json::{Map, Value};

pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
    /// A value that is undefined for this row.
    Missing,
}

impl Cell {
    fn tsv(&self, precision: usize) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) if x.is_finite() => format!("{x:.precision$}"),
            Cell::Num(_) | Cell::Missing => "NA".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<u32> for Cell {
    fn from(i: u32) -> Self {
        Cell::Int(i as u64)
    }
}

/// Rows of one shape. In TSV a tagged table prints its tag as the second
/// column so that several tables can share one stream.
pub struct Table {
    pub tag: Option<&'static str>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Table {
        Table {
            tag: None,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn tagged(tag: &'static str, columns: &[&'static str]) -> Table {
        Table {
            tag: Some(tag),
            ..Table::new(columns)
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn tsv_line(&self, cells: Vec<String>) -> String {
        let mut cells = cells;
        if let Some(tag) = self.tag {
            cells.insert(1.min(cells.len()), tag.to_string());
        }
        cells.join("\t")
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

pub struct Format {
    pub json: bool,
    pub precision: usize,
    pub header: bool,
}

/// Writes the tables to stdout. JSON output is a single array of row
/// objects, or an object keyed by tag when there are several tables.
pub fn emit(tables: &[Table], format: &Format) -> io::Result<()> {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    if format.json {
        let value = match tables {
            [one] => one.json_rows(),
            many => Value::Object(
                many.iter()
                    .map(|t| (t.tag.unwrap_or("rows").to_string(), t.json_rows()))
                    .collect(),
            ),
        };
        serde_json::to_writer_pretty(&mut out, &value)?;
        writeln!(out)?;
    } else {
        for t in tables {
            if format.header {
                let names = t.columns.iter().map(|c| c.to_string()).collect();
                writeln!(out, "#{}", t.tsv_line(names))?;
            }
            for row in &t.rows {
                let cells = row.iter().map(|c| c.tsv(format.precision)).collect();
                writeln!(out, "{}", t.tsv_line(cells))?;
            }
        }
    }
    out.flush()
}
