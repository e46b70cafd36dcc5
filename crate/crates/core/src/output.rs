//! Plot-ready persistence: CSV series and JSON reports.
//!
//! # CSV layout
//!
//! A series file starts with `#`-prefixed `key = value` provenance lines,
//! then a header row, then data rows with the time column first:
//!
//! ```text
//! # otoclab series v1
//! # kind = C
//! # beta = 1.1
//! # base_seed = 7
//! # n_realizations = 100
//! time,mean,stderr
//! 0.0000000000000000e0,1.2297839797305895e-2,3.1018587669111408e-4
//! ...
//! ```
//!
//! Real-valued kinds carry a single `mean` column; complex kinds split it
//! into a `mean_re,mean_im` pair. Floats are printed with 17 significant
//! digits, so parsing a file returns bit-identical values and a rerun of
//! the producing config is byte-identical. The comment lines make a file
//! self-describing enough to re-fit without the original config; strict
//! CSV consumers can drop them with `grep -v '^#'`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::correlators::{EnsembleResult, SeriesKind};
use crate::error::{Error, Result};
use crate::C64;

/// Format with 17 significant digits; parsing the result reproduces the
/// exact bit pattern.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Canonical artifact name for one (kind, β) series, e.g. `C_beta1.1.csv`.
/// β uses the shortest exact decimal, so names parse back losslessly.
pub fn series_file_name(kind: SeriesKind, beta: f64) -> String {
    format!("{}_beta{}.csv", kind.label(), beta)
}

/// Render one disorder-averaged series in the documented CSV layout.
pub fn ensemble_csv(series: &EnsembleResult) -> String {
    let complex = !series.kind().is_real();
    let mut out = String::new();
    out.push_str("# otoclab series v1\n");
    out.push_str(&format!("# kind = {}\n", series.kind().label()));
    out.push_str(&format!("# beta = {}\n", series.beta()));
    out.push_str(&format!("# base_seed = {}\n", series.base_seed()));
    out.push_str(&format!(
        "# n_realizations = {}\n",
        series.n_realizations()
    ));
    out.push_str(if complex {
        "time,mean_re,mean_im,stderr\n"
    } else {
        "time,mean,stderr\n"
    });
    for ((&t, m), &e) in series
        .times()
        .iter()
        .zip(series.mean().iter())
        .zip(series.stderr().iter())
    {
        out.push_str(&format_float(t));
        out.push(',');
        out.push_str(&format_float(m.re));
        if complex {
            out.push(',');
            out.push_str(&format_float(m.im));
        }
        out.push(',');
        out.push_str(&format_float(e));
        out.push('\n');
    }
    out
}

/// Write one series; the parent directory must exist.
pub fn write_ensemble_csv(path: &Path, series: &EnsembleResult) -> Result<()> {
    fs::write(path, ensemble_csv(series)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse a file produced by [`write_ensemble_csv`] back into an ensemble,
/// re-validating every invariant.
pub fn read_ensemble_csv(path: &Path) -> Result<EnsembleResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_ensemble_csv(&text).map_err(|message| Error::Parse {
        path: path.display().to_string(),
        message,
    })
}

fn parse_ensemble_csv(text: &str) -> std::result::Result<EnsembleResult, String> {
    let mut kind: Option<SeriesKind> = None;
    let mut beta: Option<f64> = None;
    let mut base_seed: Option<u64> = None;
    let mut n_realizations: Option<usize> = None;
    let mut header: Option<&str> = None;
    let mut times = Vec::new();
    let mut mean = Vec::new();
    let mut stderr = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let Some((key, value)) = comment.split_once('=') else {
                continue; // free-form comment
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "kind" => {
                    kind = Some(
                        SeriesKind::from_label(value)
                            .ok_or_else(|| format!("line {}: unknown kind {value:?}", idx + 1))?,
                    )
                }
                "beta" => beta = Some(parse_num(value, "beta", idx)?),
                "base_seed" => base_seed = Some(parse_num(value, "base_seed", idx)?),
                "n_realizations" => {
                    n_realizations = Some(parse_num(value, "n_realizations", idx)?)
                }
                _ => {}
            }
            continue;
        }
        let Some(header) = header else {
            header = Some(line);
            let kind = kind.ok_or("missing `# kind = ...` before the header row")?;
            let expected = if kind.is_real() {
                "time,mean,stderr"
            } else {
                "time,mean_re,mean_im,stderr"
            };
            if line != expected {
                return Err(format!(
                    "line {}: header {line:?} does not match {expected:?} for kind {kind}",
                    idx + 1
                ));
            }
            continue;
        };
        let fields: Vec<&str> = line.split(',').collect();
        let want = header.split(',').count();
        if fields.len() != want {
            return Err(format!(
                "line {}: expected {want} fields, got {}",
                idx + 1,
                fields.len()
            ));
        }
        let mut nums = fields
            .iter()
            .map(|f| parse_num::<f64>(f, "field", idx))
            .collect::<std::result::Result<Vec<f64>, String>>()?
            .into_iter();
        times.push(nums.next().expect("time field"));
        let re = nums.next().expect("mean field");
        let im = if want == 4 {
            nums.next().expect("mean_im field")
        } else {
            0.0
        };
        mean.push(C64::new(re, im));
        stderr.push(nums.next().expect("stderr field"));
    }

    let kind = kind.ok_or("missing `# kind = ...`")?;
    let beta = beta.ok_or("missing `# beta = ...`")?;
    let base_seed = base_seed.ok_or("missing `# base_seed = ...`")?;
    let n_realizations = n_realizations.ok_or("missing `# n_realizations = ...`")?;
    if header.is_none() {
        return Err("missing header row".into());
    }
    EnsembleResult::from_parts(kind, beta, base_seed, n_realizations, times, mean, stderr)
        .map_err(|e| e.to_string())
}

fn parse_num<T: std::str::FromStr>(
    value: &str,
    what: &str,
    line_idx: usize,
) -> std::result::Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("line {}: bad {what} value {value:?}", line_idx + 1))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::TimeSeries;

    fn ensemble(kind: SeriesKind, values: &[(f64, f64)]) -> EnsembleResult {
        let times: Vec<f64> = (0..values.len()).map(|i| 0.317 * i as f64).collect();
        let series: Vec<TimeSeries> = (0..3)
            .map(|k| {
                let vals = values
                    .iter()
                    .map(|&(re, im)| C64::new(re + 1e-3 * k as f64, im))
                    .collect();
                TimeSeries::new(kind, 1.1, 7 + k, times.clone(), vals).unwrap()
            })
            .collect();
        EnsembleResult::from_series(&series, 7).unwrap()
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        for &x in &[
            0.0,
            -0.0,
            1.0 / 3.0,
            std::f64::consts::PI,
            1.234567890123456e-300,
            -9.87654321e250,
            f64::MIN_POSITIVE,
        ] {
            let back: f64 = format_float(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn file_names_encode_kind_and_beta() {
        assert_eq!(series_file_name(SeriesKind::C, 1.1), "C_beta1.1.csv");
        assert_eq!(series_file_name(SeriesKind::R, 0.0), "R_beta0.csv");
        assert_eq!(
            series_file_name(SeriesKind::C2Normalized, 4.0),
            "C2_normalized_beta4.csv"
        );
    }

    #[test]
    fn real_series_round_trips_through_csv() {
        let ens = ensemble(
            SeriesKind::C,
            &[(0.0, 0.0), (1.0 / 3.0, 0.0), (1.99999, 0.0)],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(series_file_name(ens.kind(), ens.beta()));
        write_ensemble_csv(&path, &ens).unwrap();

        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("time,mean,stderr\n"));
        assert!(text.starts_with("# otoclab series v1\n# kind = C\n# beta = 1.1\n"));

        let back = read_ensemble_csv(&path).unwrap();
        assert_eq!(back.kind(), ens.kind());
        assert_eq!(back.beta(), ens.beta());
        assert_eq!(back.base_seed(), ens.base_seed());
        assert_eq!(back.n_realizations(), ens.n_realizations());
        assert_eq!(back.times(), ens.times());
        assert_eq!(back.mean(), ens.mean());
        assert_eq!(back.stderr(), ens.stderr());
    }

    #[test]
    fn complex_series_use_re_im_columns() {
        let ens = ensemble(SeriesKind::F2, &[(0.9, -0.1), (0.4, 0.2), (0.1, 0.05)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f2.csv");
        write_ensemble_csv(&path, &ens).unwrap();

        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("time,mean_re,mean_im,stderr\n"));

        let back = read_ensemble_csv(&path).unwrap();
        assert_eq!(back.mean(), ens.mean());
        assert_eq!(back.stderr(), ens.stderr());
    }

    #[test]
    fn rewriting_a_parsed_series_is_byte_identical() {
        let ens = ensemble(SeriesKind::F, &[(0.3, 0.7), (-0.2, 0.1), (0.0, -0.9)]);
        let first = ensemble_csv(&ens);
        let back = parse_ensemble_csv(&first).unwrap();
        assert_eq!(ensemble_csv(&back), first);
    }

    #[test]
    fn parse_rejects_malformed_files() {
        let good = ensemble_csv(&ensemble(SeriesKind::C, &[(0.1, 0.0), (0.2, 0.0)]));

        let no_kind = good.replace("# kind = C\n", "");
        assert!(parse_ensemble_csv(&no_kind)
            .unwrap_err()
            .contains("missing `# kind"));

        let bad_kind = good.replace("# kind = C\n", "# kind = Q\n");
        assert!(parse_ensemble_csv(&bad_kind)
            .unwrap_err()
            .contains("unknown kind"));

        let bad_header = good.replace("time,mean,stderr", "t,y,e");
        assert!(parse_ensemble_csv(&bad_header)
            .unwrap_err()
            .contains("header"));

        let short_row = format!("{good}0.9\n");
        assert!(parse_ensemble_csv(&short_row)
            .unwrap_err()
            .contains("expected 3 fields"));

        let bad_value = good.replace("3.1700000000000000e-1", "oops");
        assert_ne!(bad_value, good);
        assert!(parse_ensemble_csv(&bad_value).unwrap_err().contains("bad"));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_ensemble_csv(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let window = crate::analysis::FitWindow {
            t_lo: 0.5,
            t_hi: 3.25,
        };
        write_json(&path, &window).unwrap();
        let back: crate::analysis::FitWindow = read_json(&path).unwrap();
        assert_eq!(back, window);
        assert!(fs::read_to_string(&path).unwrap().ends_with("}\n"));
    }
}
