//! CSV tables. Column names are part of the public format; floats are
//! written in shortest round-trip form, missing values as empty cells.

use std::io::{Read, Write};

use kgstitch_core::align::{EsHistogram, EsMatrix};
use kgstitch_core::train::{SweepRow, SweepRun};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T]) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| LabError::Run(e.to_string()))?;
    }
    w.flush().map_err(|e| LabError::Run(e.to_string()))
}

pub fn read_rows<T: DeserializeOwned, R: Read>(input: R) -> LabResult<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| LabError::Config(e.to_string()))
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> LabResult<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub axis_value: f64,
    pub repeat: usize,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub failed: bool,
}

impl From<&SweepRun> for SweepCsvRow {
    fn from(r: &SweepRun) -> Self {
        SweepCsvRow {
            axis_value: r.axis_value,
            repeat: r.repeat,
            seed: r.seed,
            train_acc: r.train_acc,
            test_acc: r.test_acc,
            train_loss: r.train_loss,
            test_loss: r.test_loss,
            failed: r.failed,
        }
    }
}

impl From<SweepCsvRow> for SweepRun {
    fn from(r: SweepCsvRow) -> Self {
        SweepRun {
            axis_value: r.axis_value,
            repeat: r.repeat,
            seed: r.seed,
            train_acc: r.train_acc,
            test_acc: r.test_acc,
            train_loss: r.train_loss,
            test_loss: r.test_loss,
            failed: r.failed,
        }
    }
}

/// One row of `sweep_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryCsvRow {
    pub axis_value: f64,
    pub train_mean: f64,
    pub train_sd: f64,
    pub test_mean: f64,
    pub test_sd: f64,
    pub completed: usize,
    pub failed: usize,
}

impl From<&SweepRow> for SweepSummaryCsvRow {
    fn from(r: &SweepRow) -> Self {
        SweepSummaryCsvRow {
            axis_value: r.axis_value,
            train_mean: r.train_mean,
            train_sd: r.train_sd,
            test_mean: r.test_mean,
            test_sd: r.test_sd,
            completed: r.completed,
            failed: r.failed,
        }
    }
}

/// One cell of `es_matrix.csv`, in long form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsCsvRow {
    pub source: String,
    pub target: String,
    pub es: Option<f64>,
    pub source_flagged: bool,
    pub target_flagged: bool,
    pub chance: f64,
}

pub fn es_matrix_rows(m: &EsMatrix) -> Vec<EsCsvRow> {
    let mut rows = Vec::with_capacity(m.len() * m.len());
    for i in 0..m.len() {
        for j in 0..m.len() {
            rows.push(EsCsvRow {
                source: m.run_ids[i].clone(),
                target: m.run_ids[j].clone(),
                es: m.scores[i][j],
                source_flagged: m.flagged[i],
                target_flagged: m.flagged[j],
                chance: m.chance,
            });
        }
    }
    rows
}

pub fn es_matrix_from_rows(rows: &[EsCsvRow]) -> LabResult<EsMatrix> {
    let mut ids: Vec<String> = Vec::new();
    for r in rows {
        if !ids.contains(&r.source) {
            ids.push(r.source.clone());
        }
    }
    let k = ids.len();
    if rows.len() != k * k {
        return Err(LabError::Config(format!(
            "{} cells for {k} runs",
            rows.len()
        )));
    }
    let pos = |id: &str| {
        ids.iter()
            .position(|x| x == id)
            .ok_or_else(|| LabError::Config(format!("target `{id}` never appears as a source")))
    };
    let mut scores = vec![vec![None; k]; k];
    let mut flagged = vec![false; k];
    let mut chance = f64::NAN;
    for r in rows {
        let (i, j) = (pos(&r.source)?, pos(&r.target)?);
        scores[i][j] = r.es;
        flagged[i] = r.source_flagged;
        chance = r.chance;
    }
    Ok(EsMatrix {
        run_ids: ids,
        scores,
        flagged,
        chance,
    })
}

/// One trial of `baseline_es.csv`; failed trials have an empty `es`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCsvRow {
    pub trial: usize,
    pub es: Option<f64>,
}

pub fn histogram_rows(h: &EsHistogram) -> Vec<BaselineCsvRow> {
    h.values
        .iter()
        .map(|&v| Some(v))
        .chain(std::iter::repeat_n(None, h.failed))
        .enumerate()
        .map(|(trial, es)| BaselineCsvRow { trial, es })
        .collect()
}

pub fn histogram_from_rows(rows: &[BaselineCsvRow]) -> EsHistogram {
    EsHistogram {
        values: rows.iter().filter_map(|r| r.es).collect(),
        failed: rows.iter().filter(|r| r.es.is_none()).count(),
    }
}

/// One bin of `baseline_bins.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCsvRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

/// One pair of `cka_matrix.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkaCsvRow {
    pub source: String,
    pub target: String,
    pub cka: Option<f64>,
}

/// One run of `certify_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyCsvRow {
    pub run: String,
    pub seed: u64,
    pub converged: bool,
    pub train_acc: Option<f64>,
    pub reference_acc: Option<f64>,
    pub reference_pass: bool,
    pub violations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn round_trip<T: Serialize + DeserializeOwned>(rows: &[T]) -> Vec<T> {
        let s = to_csv_string(rows).unwrap();
        read_rows(s.as_bytes()).unwrap()
    }

    #[test]
    fn sweep_header() {
        let row = SweepCsvRow {
            axis_value: 50.0,
            repeat: 1,
            seed: 9,
            train_acc: 1.0,
            test_acc: 0.9,
            train_loss: 0.01,
            test_loss: 0.2,
            failed: false,
        };
        let s = to_csv_string(&[row]).unwrap();
        assert_eq!(
            s.lines().next().unwrap(),
            "axis_value,repeat,seed,train_acc,test_acc,train_loss,test_loss,failed"
        );
    }

    #[test]
    fn es_matrix_round_trip() {
        let m = EsMatrix {
            run_ids: vec!["a".into(), "b".into(), "c".into()],
            scores: vec![
                vec![Some(1.0), Some(0.25), None],
                vec![Some(0.5), Some(0.875), Some(0.1 + 0.2)],
                vec![None, Some(1e-300), Some(0.0)],
            ],
            flagged: vec![false, true, false],
            chance: 0.9,
        };
        let rows = round_trip(&es_matrix_rows(&m));
        assert_eq!(es_matrix_from_rows(&rows).unwrap(), m);
    }

    #[test]
    fn histogram_round_trip() {
        let h = EsHistogram {
            values: vec![0.5, 0.75, 1.0 / 3.0],
            failed: 2,
        };
        assert_eq!(histogram_from_rows(&round_trip(&histogram_rows(&h))), h);
    }

    proptest! {
        #[test]
        fn sweep_rows_round_trip(
            rows in prop::collection::vec(
                (any::<f64>().prop_filter("finite", |v| v.is_finite()),
                 0usize..100, any::<u64>(), 0.0f64..=1.0, 0.0f64..=1.0,
                 0.0f64..1e6, 0.0f64..1e6, any::<bool>()),
                0..20)
        ) {
            let rows: Vec<SweepCsvRow> = rows
                .into_iter()
                .map(|(axis_value, repeat, seed, train_acc, test_acc, train_loss, test_loss, failed)| SweepCsvRow {
                    axis_value, repeat, seed, train_acc, test_acc, train_loss, test_loss, failed,
                })
                .collect();
            prop_assert_eq!(round_trip(&rows), rows);
        }
    }
}
