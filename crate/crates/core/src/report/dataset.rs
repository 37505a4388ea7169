use crate::data::{Dataset, FeatureValue};
use crate::ingest::IngestConfig;

/// Writes `dataset` in the ingest file format with the default layout.
pub fn serialize_dataset(dataset: &Dataset) -> String {
    serialize_dataset_with(dataset, &IngestConfig::default())
}

/// Header `student,time,<features...>`, rows in dataset order. Numbers use the
/// shortest text that parses back to the same value; missing cells use the
/// first missing token.
pub fn serialize_dataset_with(dataset: &Dataset, config: &IngestConfig) -> String {
    let missing = config.missing_tokens.first().map_or("", String::as_str);
    let mut w = csv::WriterBuilder::new()
        .delimiter(config.delimiter)
        .from_writer(Vec::new());
    let mut header = vec![config.student_column.clone(), config.time_column.clone()];
    header.extend(dataset.schema().features().iter().map(|f| f.name.clone()));
    w.write_record(&header).expect("in-memory write");
    for row in dataset.rows() {
        let mut record = Vec::with_capacity(row.values.len() + 2);
        record.push(row.student.clone());
        record.push(dataset.times()[row.step].to_string());
        for v in &row.values {
            record.push(match v {
                FeatureValue::Numeric(x) => x.to_string(),
                FeatureValue::Category(c) => c.clone(),
                FeatureValue::Missing => missing.to_string(),
            });
        }
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}
