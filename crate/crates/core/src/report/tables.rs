use super::ReportError;

/// Shortest representation that reads back to the same value; `-0` prints as `0`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x}")
}

/// An in-memory CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        let r: Vec<String> = fields.into_iter().collect();
        debug_assert_eq!(r.len(), self.header.len());
        self.rows.push(r);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn into_bytes(self) -> Result<Vec<u8>, ReportError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let internal = |e: csv::Error| ReportError::Internal(e.to_string());
        w.write_record(&self.header).map_err(internal)?;
        for r in &self.rows {
            w.write_record(r).map_err(internal)?;
        }
        w.into_inner().map_err(|e| ReportError::Internal(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_and_layout() {
        let mut t = CsvTable::new(&["city", "n"]);
        t.row(["San Francisco, CA".to_string(), "3".to_string()]);
        let text = String::from_utf8(t.into_bytes().unwrap()).unwrap();
        assert_eq!(text, "city,n\n\"San Francisco, CA\",3\n");
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-12, 12345.678, -2.5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
    }
}
