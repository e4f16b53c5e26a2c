//! Comma-separated log tables with the header
//! `well_id,depth,density,resistivity,gamma,dts,dtp`, one row per depth sample.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use log::warn;

use super::{Dataset, WellRecord, WellSample};
use crate::error::{Error, Result};

pub const TABLE_HEADER: [&str; 7] = [
    "well_id",
    "depth",
    "density",
    "resistivity",
    "gamma",
    "dts",
    "dtp",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RowRejection {
    pub line: u64,
    pub well_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rejected: Vec<RowRejection>,
    /// Wells whose rows were not in increasing depth order.
    pub resorted_wells: Vec<String>,
}

pub fn write_table(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(TABLE_HEADER)?;
    for well in ds.wells() {
        for s in &well.samples {
            w.write_record([
                well.well_id.clone(),
                s.depth.to_string(),
                s.density.to_string(),
                s.resistivity.to_string(),
                s.gamma.to_string(),
                s.dts.to_string(),
                s.dtp.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_table(path: &Path) -> Result<(Dataset, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let header = reader.headers()?.clone();
    if header.iter().ne(TABLE_HEADER) {
        return Err(parse_err(
            1,
            format!(
                "expected header {:?}, found {:?}",
                TABLE_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut report = LoadReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(u64, WellSample)>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        report.rows_read += 1;
        let field = |i: usize| -> Result<f64> {
            let raw = &record[i];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    parse_err(
                        line,
                        format!("column {}: invalid number {raw:?}", TABLE_HEADER[i]),
                    )
                })
        };
        let well_id = record[0].to_string();
        if well_id.is_empty() {
            return Err(parse_err(line, "empty well_id".into()));
        }
        let sample = WellSample {
            depth: field(1)?,
            density: field(2)?,
            resistivity: field(3)?,
            gamma: field(4)?,
            dts: field(5)?,
            dtp: field(6)?,
        };
        if let Err(e) = sample.sonic().validate() {
            report.rejected.push(RowRejection {
                line,
                well_id,
                reason: e.to_string(),
            });
            continue;
        }
        if !rows.contains_key(&well_id) {
            order.push(well_id.clone());
        }
        rows.entry(well_id).or_default().push((line, sample));
    }

    // Wells whose every row was rejected.
    for r in &report.rejected {
        if !rows.contains_key(&r.well_id) {
            return Err(Error::EmptyWell(r.well_id.clone()));
        }
    }
    if order.is_empty() {
        return Err(parse_err(1, "table has no data rows".into()));
    }

    let mut wells = Vec::with_capacity(order.len());
    for id in order {
        let mut samples = rows.remove(&id).unwrap_or_default();
        if samples.windows(2).any(|p| !(p[1].1.depth > p[0].1.depth)) {
            if samples.windows(2).any(|p| p[1].1.depth < p[0].1.depth) {
                warn!("well {id}: rows not in depth order; sorting");
                report.resorted_wells.push(id.clone());
            }
            samples.sort_by(|a, b| a.1.depth.total_cmp(&b.1.depth));
            let mut kept: Vec<(u64, WellSample)> = Vec::with_capacity(samples.len());
            for (line, s) in samples {
                if kept.last().is_some_and(|(_, k)| k.depth == s.depth) {
                    report.rejected.push(RowRejection {
                        line,
                        well_id: id.clone(),
                        reason: format!("duplicate depth {}", s.depth),
                    });
                } else {
                    kept.push((line, s));
                }
            }
            samples = kept;
        }
        wells.push(WellRecord {
            well_id: id,
            samples: samples.into_iter().map(|(_, s)| s).collect(),
        });
    }
    if !report.rejected.is_empty() {
        warn!(
            "rejected {} rows from {}",
            report.rejected.len(),
            path.display()
        );
    }
    Ok((Dataset::new(wells)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic_field;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    const HEADER: &str = "well_id,depth,density,resistivity,gamma,dts,dtp\n";

    #[test]
    fn synthetic_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_synthetic_field(3, 3, 250).unwrap();
        let path = dir.path().join("field.csv");
        write_table(&ds, &path).unwrap();
        let (back, report) = load_table(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(report.rows_read, 750);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn unsorted_well_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}a,3,2.4,10,50,0.5,0.3\na,1,2.4,10,50,0.5,0.3\na,2,2.5,10,50,0.5,0.3\nb,1,2.4,10,50,0.5,0.3\n"
        );
        let (ds, report) = load_table(&write(dir.path(), "t.csv", &body)).unwrap();
        let depths: Vec<f64> = ds.wells()[0].samples.iter().map(|s| s.depth).collect();
        assert_eq!(depths, [1.0, 2.0, 3.0]);
        assert_eq!(report.resorted_wells, ["a"]);
        assert_eq!(ds.well_ids(), ["a", "b"]);
    }

    #[test]
    fn non_physical_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}a,1,2.4,10,50,0.5,0.3\na,2,2.4,10,50,0.3,0.3\na,3,2.4,10,50,0.5,0.3\n"
        );
        let (ds, report) = load_table(&write(dir.path(), "t.csv", &body)).unwrap();
        assert_eq!(ds.wells()[0].len(), 2);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].line, 3);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}a,1,2.4,10,50,0.5,0.3\na,2,oops,10,50,0.5,0.3\n");
        match load_table(&write(dir.path(), "t.csv", &body)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let body = "well,depth\nx,1\n";
        assert!(matches!(
            load_table(&write(dir.path(), "h.csv", body)),
            Err(Error::Parse { line: 1, .. })
        ));
        let body = format!("{HEADER}a,1,2.4,10,50,0.5,0.3\na,2,2.4\n");
        assert!(matches!(
            load_table(&write(dir.path(), "short.csv", &body)),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn fully_rejected_well_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}a,1,2.4,10,50,0.5,0.3\nb,1,2.4,10,50,0.3,0.3\n");
        assert!(matches!(
            load_table(&write(dir.path(), "t.csv", &body)),
            Err(Error::EmptyWell(id)) if id == "b"
        ));
    }
}
