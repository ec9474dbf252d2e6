use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FaultLabel, Recording, SignalError};

/// Contents of the `<name>.meta.json` sidecar next to a recording CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMeta {
    pub sample_rate_hz: f64,
    pub rpm: f64,
    pub label: FaultLabel,
    #[serde(default)]
    pub id: Option<String>,
}

/// `dir/rec.csv` -> `dir/rec.meta.json`
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SignalError + '_ {
    move |source| SignalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads `index,linear_x[,linear_y],angular` CSV plus its JSON sidecar.
///
/// Row numbers in errors count data rows from 1 (the header is not counted).
pub fn load_recording(path: &Path) -> Result<Recording, SignalError> {
    let meta_file = meta_path(path);
    let meta_text = fs::read_to_string(&meta_file).map_err(io_err(&meta_file))?;
    let meta: RecordingMeta = serde_json::from_str(&meta_text).map_err(|e| SignalError::Sidecar {
        path: meta_file.display().to_string(),
        reason: e.to_string(),
    })?;

    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| SignalError::Header {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let expected_two = ["index", "linear_x", "linear_y", "angular"];
    let expected_one = ["index", "linear_x", "angular"];
    let n_linear = if header == expected_one {
        1
    } else if header == expected_two {
        2
    } else {
        return Err(SignalError::Header {
            path: path.display().to_string(),
            reason: format!(
                "expected `index,linear_x[,linear_y],angular`, got `{}`",
                header.join(",")
            ),
        });
    };

    let mut linear = vec![Vec::new(); n_linear];
    let mut angular = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| SignalError::Row {
            row,
            reason: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(SignalError::Row {
                row,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (col, field) in record.iter().enumerate().skip(1) {
            let value: f64 = field.parse().map_err(|_| SignalError::Row {
                row,
                reason: format!("cannot parse `{field}` in column `{}`", header[col]),
            })?;
            if !value.is_finite() {
                return Err(SignalError::NonFinite {
                    row,
                    column: header[col].clone(),
                });
            }
            if col <= n_linear {
                linear[col - 1].push(value);
            } else {
                angular.push(value);
            }
        }
    }

    let id = meta.id.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Recording::new(id, meta.sample_rate_hz, meta.rpm, meta.label, linear, angular)
}

/// Writes the CSV and its sidecar. Values use the shortest decimal text that
/// parses back to the same `f64`, so save/load is lossless.
pub fn save_recording(rec: &Recording, path: &Path) -> Result<(), SignalError> {
    rec.validate()?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    let mut out = String::with_capacity(rec.len() * 48);
    out.push_str(if rec.linear.len() == 2 {
        "index,linear_x,linear_y,angular\n"
    } else {
        "index,linear_x,angular\n"
    });
    for i in 0..rec.len() {
        out.push_str(&i.to_string());
        for ch in &rec.linear {
            out.push(',');
            out.push_str(&ch[i].to_string());
        }
        out.push(',');
        out.push_str(&rec.angular[i].to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))?;

    let meta = RecordingMeta {
        sample_rate_hz: rec.sample_rate_hz,
        rpm: rec.rpm,
        label: rec.label,
        id: Some(rec.id.clone()),
    };
    let meta_file = meta_path(path);
    let text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&meta_file, text).map_err(io_err(&meta_file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, csv: &str, meta: &str) -> PathBuf {
        let p = dir.join(format!("{name}.csv"));
        fs::write(&p, csv).unwrap();
        fs::write(dir.join(format!("{name}.meta.json")), meta).unwrap();
        p
    }

    const META: &str = r#"{"sample_rate_hz": 10, "rpm": 60, "label": "Normal"}"#;

    #[test]
    fn loads_four_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r",
            "index,linear_x,angular\n0,1.0,0.5\n1,2.0,0.25\n2,-1,0\n3,0,1e-3\n",
            META,
        );
        let rec = load_recording(&p).unwrap();
        assert_eq!(rec.len(), 4);
        assert_eq!(rec.linear.len(), 1);
        assert_eq!(rec.linear[0], vec![1.0, 2.0, -1.0, 0.0]);
        assert_eq!(rec.angular[3], 1e-3);
        assert_eq!(rec.label, FaultLabel::Normal);
        assert_eq!(rec.id, "r");
        assert_eq!(rec.sample_rate_hz, 10.0);
    }

    #[test]
    fn nan_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r",
            "index,linear_x,angular\n0,1,1\n1,2,2\n2,NaN,3\n3,4,4\n",
            META,
        );
        let err = load_recording(&p).unwrap_err();
        assert!(matches!(err, SignalError::NonFinite { row: 3, .. }), "{err}");
        assert!(err.to_string().contains("row 3"));
    }

    #[test]
    fn ragged_and_header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a", "index,linear_x,angular\n0,1,1\n1,2\n", META);
        assert!(matches!(load_recording(&p), Err(SignalError::Row { row: 2, .. })));
        let p = write(dir.path(), "b", "idx,lin,ang\n0,1,1\n1,2,2\n", META);
        assert!(matches!(load_recording(&p), Err(SignalError::Header { .. })));
        assert!(matches!(
            load_recording(&dir.path().join("missing.csv")),
            Err(SignalError::Io { .. })
        ));
    }

    #[test]
    fn two_axis_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = Recording::new(
            "two",
            31175.0,
            1200.0,
            FaultLabel::Ball,
            vec![vec![0.1, 1.0 / 3.0, -2.5e-17], vec![1.0, 2.0, 3.0]],
            vec![std::f64::consts::PI, 0.0, -0.0],
        )
        .unwrap();
        let p = dir.path().join("two.csv");
        save_recording(&rec, &p).unwrap();
        let back = load_recording(&p).unwrap();
        assert_eq!(back, rec);
    }
}
