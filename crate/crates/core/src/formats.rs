//! File formats: dataset CSV, partition JSON, estimator tables and
//! coverage reports.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::partition::{DataRole, Dataset, EstimatorTable, Partition};
use crate::simulate::{CoverageReport, EventCoverage};

/// Reads a dataset with header `x0,...,x{d-1},w,y`.
pub fn read_dataset<R: Read>(reader: R, role: DataRole) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let width = header.len();
    if width < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header needs at least the columns w,y".into(),
        });
    }
    let d = width - 2;
    for (j, name) in header.iter().enumerate() {
        let expected = match j {
            j if j < d => format!("x{j}"),
            j if j == d => "w".to_string(),
            _ => "y".to_string(),
        };
        if name != expected {
            return Err(Error::Parse {
                line: 1,
                message: format!("column {} is named '{name}', expected '{expected}'", j + 1),
            });
        }
    }

    let mut data = Dataset::new(d, role);
    let mut x = vec![0.0; d];
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(e, line)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        for (j, slot) in x.iter_mut().enumerate() {
            *slot = parse_finite(&record[j]).map_err(|m| bad(format!("x{j}: {m}")))?;
        }
        let arm: usize = record[d]
            .parse()
            .map_err(|_| bad(format!("arm '{}' is not a positive integer", &record[d])))?;
        if arm == 0 {
            return Err(bad("arms are numbered from 1".into()));
        }
        let y = parse_finite(&record[d + 1]).map_err(|m| bad(format!("y: {m}")))?;
        data.push(&x, arm, y)?;
    }
    Ok(data)
}

fn csv_error(e: csv::Error, line: u64) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn parse_finite(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("non-finite value {v}")),
        Err(_) => Err(format!("'{s}' is not a number")),
    }
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let d = data.n_features();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("w".into());
    header.push("y".into());
    wtr.write_record(&header).map_err(io_error)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.x(i).iter().map(|v| v.to_string()).collect();
        row.push(data.arm(i).to_string());
        row.push(data.y(i).to_string());
        wtr.write_record(&row).map_err(io_error)?;
    }
    wtr.flush()?;
    Ok(())
}

fn io_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Pretty JSON with a trailing newline; floats use the shortest text that
/// parses back exactly.
pub fn partition_to_string(partition: &Partition) -> Result<String> {
    let mut s = serde_json::to_string_pretty(partition).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn partition_from_str(s: &str) -> Result<Partition> {
    serde_json::from_str(s).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// `arm,leaf,count,mean`; empty cells leave `mean` blank.
pub fn table_to_csv(table: &EstimatorTable) -> String {
    let mut out = String::from("arm,leaf,count,mean\n");
    for arm in 1..=table.arms() {
        for leaf in 0..table.leaves() {
            let count = table.count(arm, leaf).expect("in range");
            let mean = table
                .mean(arm, leaf)
                .expect("in range")
                .map_or(String::new(), |m| m.to_string());
            let _ = writeln!(out, "{arm},{leaf},{count},{mean}");
        }
    }
    out
}

/// Long format: `replicate,event,coverage`, six rows per replicate.
pub fn report_to_csv(report: &CoverageReport) -> String {
    let mut out = String::from("replicate,event,coverage\n");
    for rec in &report.records {
        for (name, value) in EventCoverage::NAMES.iter().zip(rec.coverage.values()) {
            let _ = writeln!(out, "{},{name},{value}", rec.index);
        }
    }
    out
}

/// Realized per-replicate parameters.
pub fn params_to_csv(report: &CoverageReport) -> String {
    let mut out =
        String::from("replicate,leaf_count,min_cell_size,max_sd,median_sd,implication_violations,min_cell_check\n");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.index, r.leaf_count, r.min_cell_size, r.max_sd, r.median_sd, r.implication_violations, r.min_cell_check
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let text = "x0,x1,w,y\n0.5,1,1,0\n-2.25,3e-3,2,1.5\n";
        let d = read_dataset(text.as_bytes(), DataRole::Unspecified).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.x(1), &[-2.25, 0.003]);
        assert_eq!(d.arm(1), 2);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let again = read_dataset(buf.as_slice(), DataRole::Unspecified).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn dataset_errors_carry_lines() {
        let cases = [
            ("x0,w,y\n0.1,1,0\n0.2,0,1\n", 3),
            ("x0,w,y\n0.1,1,0\n0.2,1,NaN\n", 3),
            ("x0,w,y\n0.1,1.5,0\n", 2),
            ("x0,w,y\n0.1,1,0\n0.1,1\n", 3),
            ("x0,w,y\n0.1,1,0\n0.2,1,abc\n", 3),
            ("x1,w,y\n", 1),
            ("x0,y,w\n", 1),
        ];
        for (text, line) in cases {
            match read_dataset(text.as_bytes(), DataRole::Unspecified) {
                Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn partition_round_trip_is_byte_identical() {
        use crate::partition::Node;
        let p = Partition::new(
            2,
            Node::split(
                1,
                0.1 + 0.2,
                Node::Leaf { leaf: 0 },
                Node::split(0, -3.0, Node::Leaf { leaf: 1 }, Node::Leaf { leaf: 2 }),
            ),
        )
        .unwrap();
        let s = partition_to_string(&p).unwrap();
        assert!(s.contains("0.30000000000000004"));
        let q = partition_from_str(&s).unwrap();
        assert_eq!(q, p);
        assert_eq!(partition_to_string(&q).unwrap(), s);
    }

    #[test]
    fn malformed_partition() {
        assert!(matches!(partition_from_str("{\"n_features\": 1}"), Err(Error::Parse { .. })));
    }
}
