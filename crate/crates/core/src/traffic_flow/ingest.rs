use std::io::Read;

use serde::Deserialize;

use super::TrafficError;

/// Vehicle counts observed at one site for one directed flow, one sample per
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    pub site_id: String,
    pub flow_id: String,
    pub interval_minutes: u32,
    /// `(epoch seconds, vehicle count)`
    pub samples: Vec<(i64, u64)>,
}

impl FlowSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn counts(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1 as f64).collect()
    }
}

/// A row that could not be parsed. Kept so callers can report it.
#[derive(Debug, Clone, PartialEq)]
pub struct MalformedRow {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub series: Vec<FlowSeries>,
    pub malformed: Vec<MalformedRow>,
}

#[derive(Debug, Deserialize)]
struct CountRow {
    site_id: String,
    flow_id: String,
    interval_minutes: u32,
    timestamp: i64,
    count: u64,
}

/// Parses `site_id,flow_id,interval_minutes,timestamp,count` rows, grouping
/// consecutive rows per `(site_id, flow_id)`.
pub fn ingest_counts<R: Read>(reader: R) -> Result<IngestReport, TrafficError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut report = IngestReport::default();
    let mut seen_rows = 0usize;

    for (idx, rec) in rdr.deserialize::<CountRow>().enumerate() {
        let row_no = idx + 1;
        seen_rows += 1;
        let row = match rec {
            Ok(r) => r,
            Err(e) => {
                report.malformed.push(MalformedRow {
                    row: row_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if row.interval_minutes == 0 {
            report.malformed.push(MalformedRow {
                row: row_no,
                reason: "interval_minutes must be positive".into(),
            });
            continue;
        }

        let pos = report
            .series
            .iter()
            .position(|s| s.site_id == row.site_id && s.flow_id == row.flow_id);
        let series = match pos {
            Some(p) => &mut report.series[p],
            None => {
                report.series.push(FlowSeries {
                    site_id: row.site_id.clone(),
                    flow_id: row.flow_id.clone(),
                    interval_minutes: row.interval_minutes,
                    samples: Vec::new(),
                });
                report.series.last_mut().unwrap()
            }
        };

        if row.interval_minutes != series.interval_minutes {
            return Err(TrafficError::IntervalMismatch(row_no));
        }
        if let Some(&(prev, _)) = series.samples.last() {
            if row.timestamp <= prev {
                return Err(TrafficError::NonMonotonicTimestamps(row.flow_id));
            }
            if row.timestamp - prev != i64::from(series.interval_minutes) * 60 {
                return Err(TrafficError::IntervalMismatch(row_no));
            }
        }
        series.samples.push((row.timestamp, row.count));
    }

    if seen_rows == 0 {
        return Err(TrafficError::EmptyInput);
    }
    Ok(report)
}
