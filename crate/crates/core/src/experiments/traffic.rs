use std::fs::File;
use std::path::Path;

use super::{csv_writer, io_err, ExperimentError, TrafficSection};
use crate::traffic_flow::{
    aggregate_capacity, classify_los, fit_linear_values, ingest_counts, write_regression_rows,
    LosGrade, RegressionModel, DEFAULT_PER_VEHICLE_RATE_MBPS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummary {
    pub flow_id: String,
    pub mean_count: f64,
    /// veh/mi/lane
    pub density: f64,
    pub grade: LosGrade,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrafficReport {
    /// lag-1 fit of each flow on itself: `count[t+1]` against `count[t]`
    pub regressions: Vec<(String, RegressionModel)>,
    pub flows: Vec<FlowSummary>,
    pub malformed_rows: usize,
    /// flows too short or too flat to fit
    pub skipped: Vec<String>,
}

/// Reads interval counts and writes `traffic_report.csv`, `los.csv` and
/// `capacity.csv` into `out_dir`.
pub fn traffic_report(
    counts_csv: &Path,
    section: &TrafficSection,
    out_dir: &Path,
) -> Result<TrafficReport, ExperimentError> {
    if !(section.lanes > 0.0 && section.mean_speed > 0.0) {
        return Err(ExperimentError::ConfigInvalid("traffic lanes and mean_speed must be positive".into()));
    }
    let file = File::open(counts_csv)
        .map_err(|e| ExperimentError::Input(format!("{}: {e}", counts_csv.display())))?;
    let ingest = ingest_counts(file).map_err(|e| ExperimentError::Input(e.to_string()))?;
    for m in &ingest.malformed {
        log::warn!("skipping row {}: {}", m.row, m.reason);
    }

    let mut report = TrafficReport {
        malformed_rows: ingest.malformed.len(),
        ..Default::default()
    };
    for s in &ingest.series {
        let counts = s.counts();
        let id = format!("{}/{}", s.site_id, s.flow_id);
        if counts.len() > 1 {
            match fit_linear_values(&counts[..counts.len() - 1], &counts[1..]) {
                Ok(m) => report.regressions.push((id.clone(), m)),
                Err(e) => {
                    log::warn!("{id}: {e}");
                    report.skipped.push(id.clone());
                }
            }
        } else {
            report.skipped.push(id.clone());
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let hourly = mean * 60.0 / s.interval_minutes as f64;
        let density = hourly / section.mean_speed / section.lanes;
        report.flows.push(FlowSummary {
            flow_id: id,
            mean_count: mean,
            density,
            grade: classify_los(density).map_err(|e| ExperimentError::Input(e.to_string()))?,
            capacity_mbps: aggregate_capacity(mean.round() as u64, DEFAULT_PER_VEHICLE_RATE_MBPS),
        });
    }

    let path = out_dir.join("traffic_report.csv");
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let f = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_regression_rows(f, &report.regressions).map_err(|e| io_err(&path, e))?;

    let path = out_dir.join("los.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["flow_id", "density", "grade"]).map_err(|e| io_err(&path, e))?;
    for f in &report.flows {
        w.write_record([f.flow_id.clone(), f.density.to_string(), f.grade.to_string()])
            .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = out_dir.join("capacity.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["flow_id", "mean_count", "capacity_mbps"]).map_err(|e| io_err(&path, e))?;
    for f in &report.flows {
        w.write_record([f.flow_id.clone(), f.mean_count.to_string(), f.capacity_mbps.to_string()])
            .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_files() {
        let dir = std::env::temp_dir().join(format!("vfc-traffic-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let input = dir.join("counts.csv");
        let mut text = String::from("site_id,flow_id,interval_minutes,timestamp,count\n");
        for i in 0..10 {
            text.push_str(&format!("s1,nb,5,{},{}\n", i * 300, 20 + (i * 7) % 5));
        }
        text.push_str("bad,row\n");
        std::fs::write(&input, text).unwrap();
        let r = traffic_report(&input, &TrafficSection::default(), &dir).unwrap();
        assert_eq!(r.regressions.len(), 1);
        assert_eq!(r.flows.len(), 1);
        // mean 22 per 5 min -> 264 veh/h -> 264/45/2 veh/mi/lane
        assert!((r.flows[0].density - 264.0 / 90.0).abs() < 1e-12);
        assert_eq!(r.flows[0].grade, LosGrade::A);
        let los = std::fs::read_to_string(dir.join("los.csv")).unwrap();
        assert!(los.starts_with("flow_id,density,grade\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_input_is_an_error() {
        let dir = std::env::temp_dir().join(format!("vfc-traffic-empty-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let input = dir.join("counts.csv");
        std::fs::write(&input, "site_id,flow_id,interval_minutes,timestamp,count\n").unwrap();
        let e = traffic_report(&input, &TrafficSection::default(), &dir).unwrap_err();
        assert_eq!(e.exit_code(), 4);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
