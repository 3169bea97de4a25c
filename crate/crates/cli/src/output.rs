/// 17 significant digits, enough to recover every f64 exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// In-memory CSV table with a fixed header.
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref())).expect("in-memory write");
        Csv { writer }
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("csv is utf-8")
    }
}
