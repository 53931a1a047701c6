//! Post-run analysis of loop logs: time-delay estimation between commanded
//! and measured axis signals, and position-error statistics over trajectory
//! segments.
//!
//! Everything here is pure post-processing over immutable [`LoopLog`] data;
//! reports are deterministic, so rerunning an analysis on the same log yields
//! byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::netloop::{LoopLog, LoopRecord};
use crate::numfmt::fmt_g6;
use crate::trajectory::TrajectoryPlan;

/// Fewest samples a pair of series may have for delay estimation.
pub const MIN_DELAY_SAMPLES: usize = 100;
/// Fewest usable samples a window may hold for segment statistics.
pub const MIN_WINDOW_SAMPLES: usize = 10;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("constant (zero-variance) series: delay is undefined")]
    DegenerateSignal,
    #[error("window [{start_s} s, {end_s} s] holds {got} usable samples, need {needed}")]
    WindowTooSparse {
        start_s: f64,
        end_s: f64,
        got: usize,
        needed: usize,
    },
    #[error("log `{label}` ends at {log_end_s} s, before window end {end_s} s")]
    WindowNotCovered {
        label: String,
        log_end_s: f64,
        end_s: f64,
    },
    #[error("mean target is zero over the window; error % is undefined")]
    ZeroMeanTarget,
    #[error("log has no measured samples")]
    NoMeasurements,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// Delay estimation
// ---------------------------------------------------------------------------

/// Outcome of one cross-correlation delay fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    /// Refined delay in milliseconds (non-negative).
    pub delay_ms: f64,
    /// Integer-lag correlation peak, in samples, before refinement.
    pub lag: usize,
    /// Sub-sample lag after parabolic refinement.
    pub refined_lag: f64,
    /// Normalized correlation value at the integer peak (1 = perfect).
    pub peak_corr: f64,
    /// True when some negative lag correlates better than every non-negative
    /// one, i.e. the "delayed" signal actually leads. The reported delay is
    /// still taken from the non-negative peak; this flag is the warning.
    pub negative_peak: bool,
}

/// Estimates how far `measured` lags behind `target`, in milliseconds.
///
/// Both series must be uniformly sampled every `cycle_s` seconds and at least
/// [`MIN_DELAY_SAMPLES`] long. The estimate is the arg-max over integer lags
/// `0..=len/2` of the correlation between the first half of `target` and the
/// equal-length window of `measured` starting `k` samples in, refined to
/// sub-sample resolution by a parabolic fit through the three points around
/// the peak.
pub fn estimate_delay(
    target: &[f64],
    measured: &[f64],
    cycle_s: f64,
) -> Result<f64, AnalysisError> {
    estimate_delay_detailed(target, measured, cycle_s).map(|d| d.delay_ms)
}

/// [`estimate_delay`] plus the peak diagnostics used in delay reports.
pub fn estimate_delay_detailed(
    target: &[f64],
    measured: &[f64],
    cycle_s: f64,
) -> Result<DelayEstimate, AnalysisError> {
    if target.len() != measured.len() {
        return Err(AnalysisError::LengthMismatch(target.len(), measured.len()));
    }
    let n = target.len();
    if n < MIN_DELAY_SAMPLES {
        return Err(AnalysisError::TooShort {
            needed: MIN_DELAY_SAMPLES,
            got: n,
        });
    }
    if !(cycle_s.is_finite() && cycle_s > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "cycle must be positive, got {cycle_s}"
        )));
    }
    if target.iter().chain(measured).any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidParameter(
            "series contain non-finite samples".into(),
        ));
    }

    let variance = |s: &[f64]| -> f64 {
        let mean = s.iter().sum::<f64>() / n as f64;
        s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
    };
    if variance(target) <= 0.0 || variance(measured) <= 0.0 {
        return Err(AnalysisError::DegenerateSignal);
    }

    // Every lag compares windows of the same length: the leading series'
    // first `len` samples against the other series' window starting `k`
    // samples in. A shrinking overlap would penalize large lags and drag
    // the peak toward zero on smooth, slowly varying signals.
    let kmax = n / 2;
    let len = n - kmax;
    let pearson = |a: &[f64], b: &[f64]| -> f64 {
        let (ma, mb) = (
            a.iter().sum::<f64>() / len as f64,
            b.iter().sum::<f64>() / len as f64,
        );
        let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            let (x, y) = (x - ma, y - mb);
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        let norm = (na * nb).sqrt();
        if norm > 0.0 && norm.is_finite() {
            dot / norm
        } else {
            f64::NEG_INFINITY
        }
    };
    // r(k) > 0 means `measured` repeats `target` k samples later; the swapped
    // form probes the opposite ordering and only feeds the warning flag.
    let r = |k: usize| pearson(&target[..len], &measured[k..k + len]);
    let r_lead = |k: usize| pearson(&measured[..len], &target[k..k + len]);

    let mut lag = 0usize;
    let mut peak = f64::NEG_INFINITY;
    for k in 0..=kmax {
        let v = r(k);
        if v > peak {
            peak = v;
            lag = k;
        }
    }
    let mut neg_peak = f64::NEG_INFINITY;
    for k in 1..=kmax {
        neg_peak = neg_peak.max(r_lead(k));
    }

    let refined_lag = if lag > 0 && lag < kmax {
        let (a, b, c) = (r(lag - 1), peak, r(lag + 1));
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() < 1e-30 {
            0.0
        } else {
            ((a - c) / (2.0 * denom)).clamp(-0.5, 0.5)
        };
        lag as f64 + delta
    } else {
        lag as f64
    };

    Ok(DelayEstimate {
        delay_ms: refined_lag * cycle_s * 1e3,
        lag,
        refined_lag,
        peak_corr: peak,
        negative_peak: neg_peak > peak,
    })
}

// ---------------------------------------------------------------------------
// Measurement realignment
// ---------------------------------------------------------------------------

/// Measured samples in a log are stamped with the cycle that *used* them;
/// their physical time is the plant-side emission `t_us - state_age_us`.
/// This places each measured value at its emission slot on the cycle grid,
/// so delay fits see only the command-to-plant path and not the return trip.
/// Slots nobody reported are zero-order-held from the previous value; leading
/// gaps take the first known value when `backfill_leading` is set, else stay
/// `None`.
fn aligned_axis(
    log: &LoopLog,
    n: usize,
    extract: impl Fn(&LoopRecord) -> Option<f64>,
    backfill_leading: bool,
) -> Vec<Option<f64>> {
    let cycle = log.cycle_us as i64;
    let mut slots: Vec<Option<f64>> = vec![None; n];
    for rec in &log.records {
        let (Some(v), Some(age)) = (extract(rec), rec.state_age_us) else {
            continue;
        };
        let emission = rec.t_us as i64 - age;
        if emission < 0 || cycle <= 0 {
            continue;
        }
        // Emissions land on exact cycle multiples in simulated time; round
        // covers the realtime jitter case.
        let slot = ((emission as f64) / (cycle as f64)).round() as usize;
        if slot < n {
            slots[slot] = Some(v);
        }
    }
    let mut last = None;
    for s in slots.iter_mut() {
        match *s {
            Some(v) => last = Some(v),
            None => *s = last,
        }
    }
    if backfill_leading {
        if let Some(first) = slots.iter().flatten().next().copied() {
            for s in slots.iter_mut() {
                if s.is_none() {
                    *s = Some(first);
                }
            }
        }
    }
    slots
}

/// Number of leading records sitting exactly on the cycle grid. The final
/// sample of a plan lands at the plan duration, which need not be a cycle
/// multiple; correlation works on the uniform prefix.
fn uniform_rows(log: &LoopLog) -> usize {
    log.records
        .iter()
        .enumerate()
        .take_while(|(k, r)| r.t_us == *k as u64 * log.cycle_us)
        .count()
}

// ---------------------------------------------------------------------------
// Delay report
// ---------------------------------------------------------------------------

/// Per-axis delay fit between commanded and measured cable length.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisDelay {
    pub axis: String,
    pub delay_ms: f64,
    pub peak_corr: f64,
    pub negative_peak: bool,
}

/// Delay of every cable axis in one log, Table-1 style.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayReport {
    pub label: String,
    pub cycle_s: f64,
    /// Samples per series after trimming to the uniform cycle grid.
    pub samples: usize,
    pub axes: Vec<AxisDelay>,
}

/// Fits a delay per cable axis: commanded length against measured length
/// realigned to its plant-side emission time.
pub fn delay_report(log: &LoopLog, label: &str) -> Result<DelayReport, AnalysisError> {
    let n = uniform_rows(log);
    if n < MIN_DELAY_SAMPLES {
        return Err(AnalysisError::TooShort {
            needed: MIN_DELAY_SAMPLES,
            got: n,
        });
    }
    let cycle_s = log.cycle_us as f64 * 1e-6;
    let mut axes = Vec::with_capacity(log.cable_count);
    for i in 0..log.cable_count {
        let cmd: Vec<f64> = log.records[..n].iter().map(|r| r.cmd_lengths[i]).collect();
        let meas = aligned_axis(
            log,
            n,
            |r| r.meas_lengths.as_ref().map(|l| l[i]),
            true,
        );
        if meas.iter().any(|s| s.is_none()) {
            return Err(AnalysisError::NoMeasurements);
        }
        let meas: Vec<f64> = meas.into_iter().map(Option::unwrap).collect();
        let fit = estimate_delay_detailed(&cmd, &meas, cycle_s)?;
        axes.push(AxisDelay {
            axis: format!("l{}", i + 1),
            delay_ms: fit.delay_ms,
            peak_corr: fit.peak_corr,
            negative_peak: fit.negative_peak,
        });
    }
    Ok(DelayReport {
        label: label.to_string(),
        cycle_s,
        samples: n,
        axes,
    })
}

// ---------------------------------------------------------------------------
// Segment errors
// ---------------------------------------------------------------------------

/// End-effector coordinate a segment statistic is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn pick(self, v: crate::model::Vec2) -> f64 {
        match self {
            Axis::X => v.x,
            Axis::Y => v.y,
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

/// Closed time window `[start_s, end_s]` in seconds since motion start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start_s: f64,
    pub end_s: f64,
}

impl Window {
    pub fn new(start_s: f64, end_s: f64) -> Result<Window, AnalysisError> {
        if !(start_s.is_finite() && end_s.is_finite() && start_s < end_s && start_s >= 0.0) {
            return Err(AnalysisError::InvalidParameter(format!(
                "window bounds must satisfy 0 <= start < end, got [{start_s}, {end_s}]"
            )));
        }
        Ok(Window { start_s, end_s })
    }

    fn contains(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s <= self.end_s
    }
}

/// Mean target, mean measured and position error of one coordinate over a
/// window: `error % = |mean_measured - mean_target| / mean_target * 100`.
///
/// Only records carrying a measured pose count; the window must hold at
/// least [`MIN_WINDOW_SAMPLES`] of them.
pub fn segment_error(
    log: &LoopLog,
    axis: Axis,
    window: Window,
) -> Result<(f64, f64, f64), AnalysisError> {
    let mut sum_t = 0.0;
    let mut sum_m = 0.0;
    let mut count = 0usize;
    for rec in &log.records {
        if !window.contains(rec.t_us as f64 * 1e-6) {
            continue;
        }
        let Some(pose) = rec.meas_pose else { continue };
        sum_t += axis.pick(rec.target);
        sum_m += axis.pick(pose);
        count += 1;
    }
    if count < MIN_WINDOW_SAMPLES {
        return Err(AnalysisError::WindowTooSparse {
            start_s: window.start_s,
            end_s: window.end_s,
            got: count,
            needed: MIN_WINDOW_SAMPLES,
        });
    }
    let mean_t = sum_t / count as f64;
    let mean_m = sum_m / count as f64;
    if mean_t == 0.0 {
        return Err(AnalysisError::ZeroMeanTarget);
    }
    let error_pct = (mean_m - mean_t).abs() / mean_t * 100.0;
    Ok((mean_t, mean_m, error_pct))
}

/// One labelled window to compare logs over.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    pub label: String,
    pub axis: Axis,
    pub window: Window,
}

/// Cruise-phase windows of the horizontal segments of a plan, one `(window,
/// segment height)` pair each, upper rows first.
///
/// Ramps are excluded and a further 10 % of the segment duration is trimmed
/// from both ends (capped at 40 % so a window always survives).
pub fn horizontal_segment_windows(plan: &TrajectoryPlan) -> Vec<(Window, f64)> {
    let mut out = Vec::new();
    let mut t0 = 0.0;
    for (i, seg) in plan.segments.iter().enumerate() {
        let prof = plan.profile(i);
        let dur = prof.duration();
        if (seg.start.y - seg.end.y).abs() < 1e-9 && seg.length() > 0.0 {
            let margin = (0.1 * dur).max(prof.ramp_time).min(0.4 * dur);
            out.push((
                Window {
                    start_s: t0 + margin,
                    end_s: t0 + dur - margin,
                },
                seg.start.y,
            ));
        }
        t0 += dur;
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

/// [`horizontal_segment_windows`] packaged as y-axis [`SegmentSpec`]s labelled
/// `upper`/`lower` (falling back to the height for other layouts).
pub fn horizontal_segments(plan: &TrajectoryPlan) -> Vec<SegmentSpec> {
    let windows = horizontal_segment_windows(plan);
    windows
        .iter()
        .enumerate()
        .map(|(i, (window, y))| {
            let label = if windows.len() == 2 {
                ["upper", "lower"][i].to_string()
            } else {
                format!("y={}", fmt_g6(*y))
            };
            SegmentSpec {
                label,
                axis: Axis::Y,
                window: *window,
            }
        })
        .collect()
}

/// One row of an [`ErrorReport`]: both logs' means and errors over one
/// segment plus the signed error difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub label: String,
    pub mean_target_a: f64,
    pub mean_measured_a: f64,
    pub error_a_pct: f64,
    pub mean_target_b: f64,
    pub mean_measured_b: f64,
    pub error_b_pct: f64,
    /// `error_a_pct - error_b_pct`, computed from the unrounded errors.
    pub error_diff_pct: f64,
}

/// Segment-wise position errors of two logs side by side, Table-2 style.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ErrorRow>,
}

/// Runs [`segment_error`] over both logs for every segment and keeps the
/// signed difference `error_a - error_b`.
pub fn compare_logs(
    log_a: &LoopLog,
    log_b: &LoopLog,
    segments: &[SegmentSpec],
) -> Result<ErrorReport, AnalysisError> {
    let check_coverage = |log: &LoopLog, which: &str, w: Window| -> Result<(), AnalysisError> {
        let log_end_s = log.records.last().map_or(0.0, |r| r.t_us as f64 * 1e-6);
        if log_end_s + 1e-9 < w.end_s {
            return Err(AnalysisError::WindowNotCovered {
                label: which.to_string(),
                log_end_s,
                end_s: w.end_s,
            });
        }
        Ok(())
    };
    let mut rows = Vec::with_capacity(segments.len());
    for seg in segments {
        check_coverage(log_a, "a", seg.window)?;
        check_coverage(log_b, "b", seg.window)?;
        let (ta, ma, ea) = segment_error(log_a, seg.axis, seg.window)?;
        let (tb, mb, eb) = segment_error(log_b, seg.axis, seg.window)?;
        rows.push(ErrorRow {
            label: seg.label.clone(),
            mean_target_a: ta,
            mean_measured_a: ma,
            error_a_pct: ea,
            mean_target_b: tb,
            mean_measured_b: mb,
            error_b_pct: eb,
            error_diff_pct: ea - eb,
        });
    }
    Ok(ErrorReport {
        label_a: "a".to_string(),
        label_b: "b".to_string(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

impl DelayReport {
    pub fn csv_header() -> &'static str {
        "log,axis,delay_ms,peak_corr,negative_peak"
    }

    pub fn write_csv_rows(&self, w: &mut impl Write) -> io::Result<()> {
        for ax in &self.axes {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.label,
                ax.axis,
                fmt_g6(ax.delay_ms),
                fmt_g6(ax.peak_corr),
                u8::from(ax.negative_peak),
            )?;
        }
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "Axis time delay — {} ({} samples @ {} s)\n",
            self.label,
            self.samples,
            fmt_g6(self.cycle_s)
        );
        s.push_str(&format!("{:<8}{:>12}{:>12}\n", "axis", "delay [ms]", "corr"));
        for ax in &self.axes {
            s.push_str(&format!(
                "{:<8}{:>12.1}{:>12.4}{}\n",
                ax.axis,
                ax.delay_ms,
                ax.peak_corr,
                if ax.negative_peak {
                    "  (warning: stronger negative-lag peak)"
                } else {
                    ""
                }
            ));
        }
        s
    }
}

impl ErrorReport {
    pub fn csv_header() -> &'static str {
        "segment,mean_target_a_mm,mean_measured_a_mm,error_a_pct,\
         mean_target_b_mm,mean_measured_b_mm,error_b_pct,error_diff_pct"
    }

    pub fn write_csv_rows(&self, w: &mut impl Write) -> io::Result<()> {
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.label,
                fmt_g6(r.mean_target_a),
                fmt_g6(r.mean_measured_a),
                fmt_g6(r.error_a_pct),
                fmt_g6(r.mean_target_b),
                fmt_g6(r.mean_measured_b),
                fmt_g6(r.error_b_pct),
                fmt_g6(r.error_diff_pct),
            )?;
        }
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "Position error — {} vs {}\n",
            self.label_a, self.label_b
        );
        s.push_str(&format!(
            "{:<10}{:>12}{:>12}{:>9}{:>12}{:>12}{:>9}{:>9}\n",
            "segment", "target a", "meas a", "err a%", "target b", "meas b", "err b%", "diff%"
        ));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10}{:>12.3}{:>12.3}{:>9.3}{:>12.3}{:>12.3}{:>9.3}{:>9.3}\n",
                r.label,
                r.mean_target_a,
                r.mean_measured_a,
                r.error_a_pct,
                r.mean_target_b,
                r.mean_measured_b,
                r.error_b_pct,
                r.error_diff_pct,
            ));
        }
        s
    }
}

/// Per-sample plotting CSV: targets and commands straight from the log,
/// measured values realigned to their emission slot (leading gaps stay nan).
pub fn write_aligned_series_csv(log: &LoopLog, w: &mut impl Write) -> io::Result<()> {
    let m = log.cable_count;
    let n = log.records.len();
    let mut cols = vec!["t_us".to_string(), "target_x".into(), "target_y".into()];
    cols.extend((1..=m).map(|i| format!("cmd_l{i}")));
    cols.push("meas_x".into());
    cols.push("meas_y".into());
    cols.extend((1..=m).map(|i| format!("meas_l{i}")));
    writeln!(w, "{}", cols.join(","))?;

    let mut aligned = Vec::with_capacity(m + 2);
    aligned.push(aligned_axis(log, n, |r| r.meas_pose.map(|p| p.x), false));
    aligned.push(aligned_axis(log, n, |r| r.meas_pose.map(|p| p.y), false));
    for i in 0..m {
        aligned.push(aligned_axis(
            log,
            n,
            |r| r.meas_lengths.as_ref().map(|l| l[i]),
            false,
        ));
    }
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), fmt_g6);
    for (k, rec) in log.records.iter().enumerate() {
        let mut row = Vec::with_capacity(2 * m + 5);
        row.push(rec.t_us.to_string());
        row.push(fmt_g6(rec.target.x));
        row.push(fmt_g6(rec.target.y));
        for v in &rec.cmd_lengths {
            row.push(fmt_g6(*v));
        }
        for series in &aligned {
            row.push(fmt_opt(series[k]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes every given report under `dir` and returns the created paths:
/// `delays.csv` (all delay reports), `errors.csv` (all error reports),
/// `report.txt` (human-readable tables) and one `series_<name>.csv` per log.
/// Output depends only on the inputs, so a rerun is byte-identical.
pub fn emit_report(
    delays: &[DelayReport],
    errors: &[ErrorReport],
    series: &[(&str, &LoopLog)],
    dir: &Path,
) -> Result<Vec<PathBuf>, AnalysisError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    if !delays.is_empty() {
        let path = dir.join("delays.csv");
        let mut buf = Vec::new();
        writeln!(buf, "{}", DelayReport::csv_header())?;
        for d in delays {
            d.write_csv_rows(&mut buf)?;
        }
        fs::write(&path, buf)?;
        written.push(path);
    }
    if !errors.is_empty() {
        let path = dir.join("errors.csv");
        let mut buf = Vec::new();
        writeln!(buf, "{}", ErrorReport::csv_header())?;
        for e in errors {
            e.write_csv_rows(&mut buf)?;
        }
        fs::write(&path, buf)?;
        written.push(path);
    }
    if !delays.is_empty() || !errors.is_empty() {
        let path = dir.join("report.txt");
        let mut text = String::new();
        for d in delays {
            text.push_str(&d.render_text());
            text.push('\n');
        }
        for e in errors {
            text.push_str(&e.render_text());
            text.push('\n');
        }
        fs::write(&path, text)?;
        written.push(path);
    }
    for (name, log) in series {
        let path = dir.join(format!("series_{name}.csv"));
        let mut buf = Vec::new();
        write_aligned_series_csv(log, &mut buf)?;
        fs::write(&path, buf)?;
        written.push(path);
    }
    Ok(written)
}
