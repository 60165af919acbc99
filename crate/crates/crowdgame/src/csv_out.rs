//! Versioned CSV output.

/// First line of every CSV file the harness writes.
pub const CSV_VERSION_LINE: &str = "# crowdgame-csv v1";

/// Collects rows in memory and renders them with the version line first.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let body = self.writer.into_inner().expect("in-memory flush");
        format!(
            "{CSV_VERSION_LINE}\n{}",
            String::from_utf8(body).expect("csv output is utf-8")
        )
    }
}

/// Shortest round-trip formatting; undefined values become empty fields.
pub fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn real(x: f64) -> String {
    x.to_string()
}

/// Space-separated probability vector, e.g. `0.9 0.1`.
pub fn vector(p: &[f64]) -> String {
    p.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits a CSV document produced by [`Table`] into header and rows.
pub fn parse(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let body = text
        .strip_prefix(CSV_VERSION_LINE)
        .and_then(|rest| rest.strip_prefix('\n'))
        .ok_or_else(|| format!("missing `{CSV_VERSION_LINE}` line"))?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}
