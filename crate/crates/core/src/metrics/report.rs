//! Text table and CSV rendering of metric rows.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{GenerationMetrics, TrackingMetrics};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            other => Err(Error::invalid(format!(
                "unknown report format {other:?} (expected table or csv)"
            ))),
        }
    }
}

/// A named row of optional numeric cells with a fixed column order.
pub trait MetricRecord: Sized {
    const COLUMNS: &'static [&'static str];
    fn name(&self) -> &str;
    fn cells(&self) -> Vec<Option<f64>>;
    fn from_cells(name: &str, cells: &[Option<f64>]) -> Result<Self>;
}

impl MetricRecord for GenerationMetrics {
    const COLUMNS: &'static [&'static str] = &[
        "T_s", "T_e", "T_xy", "H_feet", "FS", "C_prec", "C_rec", "C_F1", "C_%", "P_hand", "MPJPE",
        "T_root", "T_obj", "O_obj",
    ];

    fn name(&self) -> &str {
        &self.name
    }

    fn cells(&self) -> Vec<Option<f64>> {
        vec![
            self.t_s,
            self.t_e,
            self.t_xy,
            self.h_feet,
            self.fs,
            self.c_prec,
            self.c_rec,
            self.c_f1,
            self.c_pct,
            self.p_hand,
            self.mpjpe,
            self.t_root,
            self.t_obj,
            self.o_obj,
        ]
    }

    fn from_cells(name: &str, c: &[Option<f64>]) -> Result<Self> {
        check_width::<Self>(c)?;
        Ok(Self {
            name: name.to_string(),
            t_s: c[0],
            t_e: c[1],
            t_xy: c[2],
            h_feet: c[3],
            fs: c[4],
            c_prec: c[5],
            c_rec: c[6],
            c_f1: c[7],
            c_pct: c[8],
            p_hand: c[9],
            mpjpe: c[10],
            t_root: c[11],
            t_obj: c[12],
            o_obj: c[13],
        })
    }
}

impl MetricRecord for TrackingMetrics {
    const COLUMNS: &'static [&'static str] = &[
        "Succ_cont",
        "Succ_tgt",
        "TTR",
        "E_pos",
        "E_pos_obj",
        "E_rot",
        "E_rot_obj",
        "E_acc_obj",
        "E_vel_obj",
    ];

    fn name(&self) -> &str {
        &self.name
    }

    fn cells(&self) -> Vec<Option<f64>> {
        let b = |v: bool| Some(if v { 1.0 } else { 0.0 });
        vec![
            b(self.succ_cont),
            b(self.succ_tgt),
            Some(self.ttr),
            Some(self.e_pos),
            Some(self.e_pos_obj),
            Some(self.e_rot),
            Some(self.e_rot_obj),
            Some(self.e_acc_obj),
            Some(self.e_vel_obj),
        ]
    }

    fn from_cells(name: &str, c: &[Option<f64>]) -> Result<Self> {
        check_width::<Self>(c)?;
        let num =
            |i: usize| c[i].ok_or_else(|| Error::format(format!("missing {}", Self::COLUMNS[i])));
        let flag = |i: usize| -> Result<bool> {
            match num(i)? {
                v if v == 1.0 => Ok(true),
                v if v == 0.0 => Ok(false),
                v => Err(Error::format(format!(
                    "{} must be 0 or 1, got {v}",
                    Self::COLUMNS[i]
                ))),
            }
        };
        Ok(Self {
            name: name.to_string(),
            succ_cont: flag(0)?,
            succ_tgt: flag(1)?,
            ttr: num(2)?,
            e_pos: num(3)?,
            e_pos_obj: num(4)?,
            e_rot: num(5)?,
            e_rot_obj: num(6)?,
            e_acc_obj: num(7)?,
            e_vel_obj: num(8)?,
        })
    }
}

fn check_width<R: MetricRecord>(cells: &[Option<f64>]) -> Result<()> {
    if cells.len() != R::COLUMNS.len() {
        return Err(Error::format(format!(
            "expected {} metric cells, got {}",
            R::COLUMNS.len(),
            cells.len()
        )));
    }
    Ok(())
}

/// Column means over the rows where a value is present.
fn means<R: MetricRecord>(records: &[R]) -> Vec<Option<f64>> {
    (0..R::COLUMNS.len())
        .map(|c| {
            let vals: Vec<f64> = records.iter().filter_map(|r| r.cells()[c]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

/// Renders rows in the fixed column order. The table adds a trailing `mean`
/// row; CSV holds exactly the rows, with values that parse back bit-exact.
pub fn emit_report<R: MetricRecord>(records: &[R], format: ReportFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::invalid("no metric records to report"));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(std::iter::once("name").chain(R::COLUMNS.iter().copied()))?;
            for r in records {
                let cells = r
                    .cells()
                    .into_iter()
                    .map(|c| c.map_or_else(|| "-".to_string(), |v| v.to_string()));
                w.write_record(std::iter::once(r.name().to_string()).chain(cells))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::format(e.to_string()))
        }
        ReportFormat::Table => {
            let mut rows: Vec<Vec<String>> = vec![std::iter::once("name")
                .chain(R::COLUMNS.iter().copied())
                .map(String::from)
                .collect()];
            let fmt = |c: &[Option<f64>]| {
                c.iter()
                    .map(|v| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}")))
                    .collect::<Vec<_>>()
            };
            for r in records {
                rows.push(
                    std::iter::once(r.name().to_string())
                        .chain(fmt(&r.cells()))
                        .collect(),
                );
            }
            rows.push(
                std::iter::once("mean".to_string())
                    .chain(fmt(&means(records)))
                    .collect(),
            );
            let widths: Vec<usize> = (0..rows[0].len())
                .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for (i, row) in rows.iter().enumerate() {
                let line: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (s, w))| {
                        if c == 0 {
                            format!("{s:<w$}")
                        } else {
                            format!("{s:>w$}")
                        }
                    })
                    .collect();
                writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
                if i == 0 || i + 2 == rows.len() {
                    writeln!(
                        out,
                        "{}",
                        "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
                    )
                    .unwrap();
                }
            }
            Ok(out)
        }
    }
}

/// Parses CSV written by [`emit_report`].
pub fn parse_csv<R: MetricRecord>(text: &str) -> Result<Vec<R>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    let expected: Vec<&str> = std::iter::once("name")
        .chain(R::COLUMNS.iter().copied())
        .collect();
    if header != expected {
        return Err(Error::format(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let cells = rec
            .iter()
            .skip(1)
            .map(|s| match s {
                "-" => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::format(format!("bad number {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(R::from_cells(&rec[0], &cells)?);
    }
    Ok(out)
}
