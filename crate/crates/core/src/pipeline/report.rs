//! Evaluation reports and training-history persistence.
//!
//! Both files are plain UTF-8 CSV. Floats are written with Rust's shortest
//! round-trip formatting, so identical runs produce identical bytes and the
//! history can be replayed exactly when resuming a run.

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::inversion::LossReport;

/// Per-image metric row of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub index: usize,
    pub ssim: f64,
    /// `None` when Pearson correlation is undefined (constant image).
    pub pcc: Option<f64>,
    pub mse: f64,
}

/// Per-image metrics plus aggregate means for one evaluated set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_ssim: f64,
    /// Mean over images where PCC is defined; `None` if there are none.
    pub mean_pcc: Option<f64>,
    pub mean_mse: f64,
    /// Number of images whose PCC was undefined and excluded from the mean.
    pub undefined_pcc: usize,
    /// Model dimensions (out side, in side) used for the evaluation.
    pub model_dims: (usize, usize),
}

impl EvalReport {
    /// CSV body: `index,ssim,pcc,mse` header, one row per image, and a
    /// one-line `mean,...` footer. Undefined PCC renders as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,ssim,pcc,mse\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.index,
                row.ssim,
                fmt_opt(row.pcc),
                row.mse
            ));
        }
        out.push_str(&format!(
            "mean,{},{},{}\n",
            self.mean_ssim,
            fmt_opt(self.mean_pcc),
            self.mean_mse
        ));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".to_string(),
    }
}

const HISTORY_HEADER: &str = "epoch,train_loss,val_loss,lr";

/// Serialize one epoch row of the training history.
pub fn history_line(report: &LossReport) -> String {
    format!(
        "{},{},{},{}",
        report.epoch, report.train_loss, report.val_loss, report.learning_rate
    )
}

pub fn write_history(path: &Path, history: &[LossReport]) -> Result<()> {
    let mut text = String::from(HISTORY_HEADER);
    text.push('\n');
    for report in history {
        text.push_str(&history_line(report));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<LossReport>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HISTORY_HEADER => {}
        _ => {
            return Err(FormatError::Header(format!(
                "history must start with `{HISTORY_HEADER}`"
            ))
            .into())
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(FormatError::Header(format!(
                "history line {} has {} fields",
                lineno + 2,
                fields.len()
            ))
            .into());
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Format(FormatError::Header(format!("bad {what}: `{s}`"))))
        };
        out.push(LossReport {
            epoch: fields[0]
                .parse()
                .map_err(|_| Error::Format(FormatError::Header("bad epoch".into())))?,
            train_loss: parse_f(fields[1], "train loss")?,
            val_loss: parse_f(fields[2], "val loss")?,
            learning_rate: parse_f(fields[3], "learning rate")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_nan() {
        let report = EvalReport {
            rows: vec![
                EvalRow {
                    index: 0,
                    ssim: 0.5,
                    pcc: Some(0.25),
                    mse: 0.125,
                },
                EvalRow {
                    index: 1,
                    ssim: 1.0,
                    pcc: None,
                    mse: 0.0,
                },
            ],
            mean_ssim: 0.75,
            mean_pcc: Some(0.25),
            mean_mse: 0.0625,
            undefined_pcc: 1,
            model_dims: (2, 3),
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,ssim,pcc,mse");
        assert_eq!(lines[1], "0,0.5,0.25,0.125");
        assert_eq!(lines[2], "1,1,NaN,0");
        assert_eq!(lines[3], "mean,0.75,0.25,0.0625");
    }

    #[test]
    fn history_round_trip_preserves_floats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let history = vec![
            LossReport {
                epoch: 0,
                train_loss: 0.1 + 1e-17,
                val_loss: f64::NAN,
                learning_rate: 1e-5,
            },
            LossReport {
                epoch: 1,
                train_loss: 0.09321847123,
                val_loss: 0.0812,
                learning_rate: 1e-6,
            },
        ];
        write_history(&path, &history).unwrap();
        let back = read_history(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in history.iter().zip(&back) {
            assert_eq!(a.epoch, b.epoch);
            assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            assert_eq!(a.learning_rate.to_bits(), b.learning_rate.to_bits());
            assert_eq!(a.val_loss.is_nan(), b.val_loss.is_nan());
        }
    }

    #[test]
    fn history_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "nope\n1,2,3,4\n").unwrap();
        assert!(read_history(&path).is_err());
    }
}
