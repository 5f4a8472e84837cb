use std::io::Write;
use std::path::Path;

use serde::Serialize;
use xvar::report::{format_float, to_json_string};
use xvar::Result;

/// Rendered command output.
pub struct Output(pub String);

impl Output {
    pub fn json<T: Serialize>(value: &T) -> Result<Self> {
        Ok(Output(to_json_string(value)?))
    }

    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => std::fs::write(p, &self.0)?,
            None => std::io::stdout().lock().write_all(self.0.as_bytes())?,
        }
        Ok(())
    }
}

/// CSV writer whose floats go through [`format_float`].
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Csv { writer }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let record = cells.iter().map(|c| match c {
            Cell::Num(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        });
        self.writer.write_record(record).expect("writing to memory");
    }

    pub fn finish(self) -> Output {
        let bytes = self.writer.into_inner().expect("flushing to memory");
        Output(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub enum Cell {
    Num(f64),
    Text(String),
}
