//! Control-loop logs: one record per controller cycle, CSV on disk.

use std::io::{self, BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::Vec2;
use crate::numfmt::fmt_g6;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed log: {0}")]
    Parse(String),
}

/// One controller cycle. Measurement fields are `None` on cycles where no
/// STATE frame had arrived yet (written as `nan` in the CSV).
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRecord {
    /// Nominal cycle time, microseconds since motion start.
    pub t_us: u64,
    pub target: Vec2,
    /// Commanded cable lengths sent this cycle (mm).
    pub cmd_lengths: Vec<f64>,
    pub meas_pose: Option<Vec2>,
    pub meas_lengths: Option<Vec<f64>>,
    pub tensions: Option<Vec<f64>>,
    /// Age of the measurement used this cycle: controller cycle time minus
    /// the plant-side emission time of the STATE frame.
    pub state_age_us: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopLog {
    pub cycle_us: u64,
    pub cable_count: usize,
    pub records: Vec<LoopRecord>,
    /// True when the run ended early (connection lost); the CSV carries a
    /// trailing `# truncated` marker.
    pub truncated: bool,
}

impl LoopLog {
    pub fn header(&self) -> String {
        let m = self.cable_count;
        let mut cols = vec!["t_us".into(), "target_x".into(), "target_y".into()];
        cols.extend((1..=m).map(|i| format!("cmd_l{i}")));
        cols.push("meas_x".into());
        cols.push("meas_y".into());
        cols.extend((1..=m).map(|i| format!("meas_l{i}")));
        cols.extend((1..=m).map(|i| format!("t{i}")));
        cols.push("state_age_us".into());
        cols.join(",")
    }

    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "{}", self.header())?;
        let m = self.cable_count;
        for r in &self.records {
            let mut cols = Vec::with_capacity(6 + 3 * m);
            cols.push(r.t_us.to_string());
            cols.push(fmt_g6(r.target.x));
            cols.push(fmt_g6(r.target.y));
            for v in &r.cmd_lengths {
                cols.push(fmt_g6(*v));
            }
            match &r.meas_pose {
                Some(p) => {
                    cols.push(fmt_g6(p.x));
                    cols.push(fmt_g6(p.y));
                }
                None => {
                    cols.push("nan".into());
                    cols.push("nan".into());
                }
            }
            push_opt_vec(&mut cols, r.meas_lengths.as_deref(), m);
            push_opt_vec(&mut cols, r.tensions.as_deref(), m);
            match r.state_age_us {
                Some(a) => cols.push(a.to_string()),
                None => cols.push("nan".into()),
            }
            writeln!(w, "{}", cols.join(","))?;
        }
        if self.truncated {
            writeln!(w, "# truncated")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)
    }

    pub fn read_csv(r: impl io::Read) -> Result<LoopLog, LogError> {
        let reader = io::BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| LogError::Parse("empty file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 9 || !(cols.len() - 6).is_multiple_of(3) {
            return Err(LogError::Parse(format!(
                "unexpected column count {}",
                cols.len()
            )));
        }
        let m = (cols.len() - 6) / 3;
        if cols[0] != "t_us"
            || cols[1] != "target_x"
            || cols[2] != "target_y"
            || cols[3 + m] != "meas_x"
            || *cols.last().unwrap() != "state_age_us"
        {
            return Err(LogError::Parse(format!("unexpected header {header:?}")));
        }
        let mut records = Vec::new();
        let mut truncated = false;
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                if line.contains("truncated") {
                    truncated = true;
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 + 3 * m {
                return Err(LogError::Parse(format!(
                    "row has {} fields, expected {}",
                    f.len(),
                    6 + 3 * m
                )));
            }
            let num = |s: &str| -> Result<f64, LogError> {
                s.parse::<f64>()
                    .map_err(|_| LogError::Parse(format!("bad number {s:?}")))
            };
            let t_us: u64 = f[0]
                .parse()
                .map_err(|_| LogError::Parse(format!("bad t_us {:?}", f[0])))?;
            let target = Vec2::new(num(f[1])?, num(f[2])?);
            let cmd: Result<Vec<f64>, _> = f[3..3 + m].iter().map(|s| num(s)).collect();
            let mx = num(f[3 + m])?;
            let my = num(f[4 + m])?;
            let meas_pose = if mx.is_nan() || my.is_nan() {
                None
            } else {
                Some(Vec2::new(mx, my))
            };
            let ml: Vec<f64> = f[5 + m..5 + 2 * m]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_, _>>()?;
            let tn: Vec<f64> = f[5 + 2 * m..5 + 3 * m]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_, _>>()?;
            let age_s = f[5 + 3 * m];
            let state_age_us = if age_s == "nan" {
                None
            } else {
                Some(age_s.parse::<i64>().map_err(|_| {
                    LogError::Parse(format!("bad state_age_us {age_s:?}"))
                })?)
            };
            records.push(LoopRecord {
                t_us,
                target,
                cmd_lengths: cmd?,
                meas_pose,
                meas_lengths: if ml.iter().any(|v| v.is_nan()) { None } else { Some(ml) },
                tensions: if tn.iter().any(|v| v.is_nan()) { None } else { Some(tn) },
                state_age_us,
            });
        }
        let cycle_us = match records.len() {
            0 | 1 => 0,
            _ => records[1].t_us - records[0].t_us,
        };
        Ok(LoopLog {
            cycle_us,
            cable_count: m,
            records,
            truncated,
        })
    }

    pub fn load(path: &Path) -> Result<LoopLog, LogError> {
        LoopLog::read_csv(std::fs::File::open(path)?)
    }
}

fn push_opt_vec(cols: &mut Vec<String>, vals: Option<&[f64]>, m: usize) {
    match vals {
        Some(vs) => {
            debug_assert_eq!(vs.len(), m);
            for v in vs {
                cols.push(fmt_g6(*v));
            }
        }
        None => {
            for _ in 0..m {
                cols.push("nan".into());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_log() -> LoopLog {
        LoopLog {
            cycle_us: 10_000,
            cable_count: 2,
            records: vec![
                LoopRecord {
                    t_us: 0,
                    target: Vec2::new(650.0, 750.0),
                    cmd_lengths: vec![990.0, 962.0],
                    meas_pose: None,
                    meas_lengths: None,
                    tensions: None,
                    state_age_us: None,
                },
                LoopRecord {
                    t_us: 10_000,
                    target: Vec2::new(651.0, 750.0),
                    cmd_lengths: vec![990.5, 961.5],
                    meas_pose: Some(Vec2::new(650.2, 750.1)),
                    meas_lengths: Some(vec![990.1, 961.9]),
                    tensions: Some(vec![7.1, 6.4]),
                    state_age_us: Some(10_000),
                },
            ],
            truncated: false,
        }
    }

    #[test]
    fn header_matches_layout() {
        assert_eq!(
            sample_log().header(),
            "t_us,target_x,target_y,cmd_l1,cmd_l2,meas_x,meas_y,meas_l1,meas_l2,t1,t2,state_age_us"
        );
    }

    #[test]
    fn round_trips_through_csv() {
        let log = sample_log();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("0,650,750,990,962,nan,nan"));
        let back = LoopLog::read_csv(&buf[..]).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn truncation_marker_round_trips() {
        let mut log = sample_log();
        log.truncated = true;
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).ends_with("# truncated\n"));
        let back = LoopLog::read_csv(&buf[..]).unwrap();
        assert!(back.truncated);
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = "t_us,bogus\n";
        assert!(LoopLog::read_csv(text.as_bytes()).is_err());
    }
}
