//! Tabular result emission as CSV or JSON.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::OutputFormat;
use crate::error::{Error, Result};

/// One table cell. Numeric cells carry their print precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    /// Six significant digits.
    Distance(f64),
    /// Nine significant digits.
    Rate(f64),
    /// Shortest round-trip representation (grid values).
    Plain(f64),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Distance(x) => format_significant(*x, 6),
            Cell::Rate(x) => format_significant(*x, 9),
            Cell::Plain(x) => x.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(n) => json!(n),
            Cell::Distance(x) | Cell::Rate(x) | Cell::Plain(x) => {
                serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number)
            }
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Formats `x` with exactly `digits` significant digits, in plain decimal
/// notation for moderate magnitudes and scientific notation otherwise.
/// Always uses `.` as the decimal point.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..15).contains(&exp) {
        return sci;
    }
    let negative = mantissa.starts_with('-');
    let digits_only: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp >= 0 {
        let int_len = exp as usize + 1;
        if digits_only.len() <= int_len {
            out.push_str(&digits_only);
            out.extend(std::iter::repeat_n('0', int_len - digits_only.len()));
        } else {
            out.push_str(&digits_only[..int_len]);
            out.push('.');
            out.push_str(&digits_only[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits_only);
    }
    out
}

pub fn write_csv<W: Write>(table: &Table, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(table: &Table, metadata: &Value, mut out: W) -> Result<()> {
    let records: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .header
                .iter()
                .zip(row)
                .map(|(k, c)| ((*k).to_owned(), c.to_json()))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let doc = json!({ "metadata": metadata, "records": records });
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_table<W: Write>(table: &Table, metadata: &Value, format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(table, out),
        OutputFormat::Json => write_json(table, metadata, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(44.123456789, 6), "44.1235");
        assert_eq!(format_significant(0.8, 9), "0.800000000");
        assert_eq!(format_significant(10000.0, 6), "10000.0");
        assert_eq!(format_significant(123456.7, 6), "123457");
        assert_eq!(format_significant(9.9999996, 6), "10.0000");
        assert_eq!(format_significant(-0.00123456789, 6), "-0.00123457");
        assert_eq!(format_significant(1.5e-9, 3), "1.50e-9");
        assert_eq!(format_significant(0.0, 6), "0.00000");
    }

    #[test]
    fn csv_quoting_and_header() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![Cell::text("x,y"), Cell::Distance(1.0)]);
        t.push(vec![Cell::text("say \"hi\""), Cell::Empty]);
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "a,b\n\"x,y\",1.00000\n\"say \"\"hi\"\"\",\n"
        );
    }

    #[test]
    fn json_has_records_and_metadata() {
        let mut t = Table::new(vec!["protocol", "rate_bps_hz"]);
        t.push(vec![Cell::text("noma"), Cell::Rate(0.5)]);
        let mut buf = Vec::new();
        write_json(&t, &json!({"seed": 42}), &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["metadata"]["seed"], 42);
        assert_eq!(v["records"][0]["protocol"], "noma");
        assert_eq!(v["records"][0]["rate_bps_hz"], 0.5);
    }
}
