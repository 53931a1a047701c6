//! Cyclic controller: samples the trajectory each cycle, streams SETPOINT
//! frames open-loop, and records the newest STATE into a [`LoopLog`].
//!
//! In simulated time the loop is lockstepped through the frames themselves:
//! each row sends its setpoint stamped at the cycle's virtual time, then
//! consumes STATE frames whose (gateway-rewritten) stamps have arrived by
//! now. STATE emission times are recovered by counting — the plant emits
//! exactly one STATE per cycle boundary, so the j-th STATE read was emitted
//! at j·cycle — which is what `state_age_us` records and what lets the
//! analysis realign measurements to plant time. In real-time mode the rows
//! are paced by the wall clock and a TIMESYNC exchange (midpoint method)
//! aligns the plant's stamps to the controller clock.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use crate::model::{robot_hash, RobotDescription, Vec2};
use crate::trajectory::{Setpoint, TrajectoryPlan};

use super::frame::{
    read_frame, Frame, FrameError, FrameSender, msg_name, MSG_CONFIG, MSG_HELLO, MSG_SETPOINT,
    MSG_START, MSG_STATE, MSG_STOP, MSG_TIMESYNC_REP, MSG_TIMESYNC_REQ,
};
use super::gateway::TimeMode;
use super::log::{LoopLog, LoopRecord};
use super::transport::SplitStream;
use super::{remote_err, NetError};

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub cycle_s: f64,
    pub mode: TimeMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            cycle_s: 0.01,
            mode: TimeMode::Simulated,
        }
    }
}

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
const TIMESYNC_ROUNDS: usize = 8;

/// Runs one full experiment over an established connection and returns the
/// log (also written to `log_path` when given). A connection lost mid-run
/// still yields the partial log, marked truncated.
pub fn run_controller<S: SplitStream>(
    desc: &RobotDescription,
    plan: &TrajectoryPlan,
    ccfg: &ControllerConfig,
    stream: S,
    log_path: Option<&Path>,
) -> Result<LoopLog, NetError> {
    if !(ccfg.cycle_s.is_finite() && (0.001..=0.05).contains(&ccfg.cycle_s)) {
        return Err(NetError::Config(format!(
            "cycle {} s outside the supported 1–50 ms",
            ccfg.cycle_s
        )));
    }
    let cycle_exact = ccfg.cycle_s * 1e6;
    let cycle_us = cycle_exact.round() as u64;
    if (cycle_exact - cycle_us as f64).abs() > 1e-3 {
        return Err(NetError::Config(format!(
            "cycle {} s is not a whole microsecond count",
            ccfg.cycle_s
        )));
    }
    let samples = plan.sample(desc, ccfg.cycle_s)?;
    let (r, w) = stream.into_split()?;
    let log = match ccfg.mode {
        TimeMode::Simulated => run_simulated(desc, &samples, cycle_us, r, w)?,
        TimeMode::Realtime => run_realtime(desc, &samples, cycle_us, ccfg.cycle_s, r, w)?,
    };
    if let Some(path) = log_path {
        log.save(path)?;
    }
    Ok(log)
}

/// Connects over TCP and runs the experiment. A connect failure is an error
/// before any log output exists.
pub fn run_controller_tcp(
    desc: &RobotDescription,
    plan: &TrajectoryPlan,
    ccfg: &ControllerConfig,
    addr: impl ToSocketAddrs,
    log_path: Option<&Path>,
) -> Result<LoopLog, NetError> {
    let stream = TcpStream::connect(addr)?;
    let _ = stream.set_nodelay(true);
    run_controller(desc, plan, ccfg, stream, log_path)
}

fn expect_reply(r: &mut impl Read, wanted: u8) -> Result<Frame, NetError> {
    match read_frame(r) {
        Ok(f) if f.msg_type == wanted => Ok(f),
        Ok(f) if f.msg_type == super::frame::MSG_ERROR => Err(remote_err(&f)),
        Ok(f) => Err(NetError::Protocol(format!(
            "unexpected {} while waiting for {}",
            msg_name(f.msg_type),
            msg_name(wanted)
        ))),
        Err(FrameError::Closed) => Err(NetError::ConnectionLost),
        Err(e) => Err(e.into()),
    }
}

fn check_hello(desc: &RobotDescription, reply: &Frame) -> Result<(), NetError> {
    let local = robot_hash(desc);
    if reply.payload.len() != 1 {
        return Err(NetError::Protocol("HELLO payload must be 1 double".into()));
    }
    if reply.payload[0] != local as f64 {
        return Err(NetError::HashMismatch {
            local,
            remote: reply.payload[0] as u64,
        });
    }
    Ok(())
}

fn state_record(
    t_us: u64,
    sp: &Setpoint,
    newest: &Option<(u64, Frame)>,
    m: usize,
) -> LoopRecord {
    match newest {
        None => LoopRecord {
            t_us,
            target: sp.pose,
            cmd_lengths: sp.lengths.clone(),
            meas_pose: None,
            meas_lengths: None,
            tensions: None,
            state_age_us: None,
        },
        Some((emission_us, f)) => LoopRecord {
            t_us,
            target: sp.pose,
            cmd_lengths: sp.lengths.clone(),
            meas_pose: Some(Vec2::new(f.payload[0], f.payload[1])),
            meas_lengths: Some(f.payload[2..2 + m].to_vec()),
            tensions: Some(f.payload[2 + m..2 + 2 * m].to_vec()),
            state_age_us: Some(t_us as i64 - *emission_us as i64),
        },
    }
}

fn run_simulated(
    desc: &RobotDescription,
    samples: &[Setpoint],
    cycle_us: u64,
    mut r: impl Read,
    w: impl Write,
) -> Result<LoopLog, NetError> {
    let m = desc.cable_count();
    let mut tx = FrameSender::new(w);
    let start = samples[0].pose;

    tx.send(MSG_HELLO, 0, vec![robot_hash(desc) as f64])?;
    check_hello(desc, &expect_reply(&mut r, MSG_HELLO)?)?;
    tx.send(
        MSG_CONFIG,
        0,
        vec![cycle_us as f64 / 1e6, 1.0, start.x, start.y],
    )?;
    expect_reply(&mut r, MSG_CONFIG)?;
    tx.send(MSG_START, 0, vec![])?;
    expect_reply(&mut r, MSG_START)?;

    let mut records = Vec::with_capacity(samples.len());
    let mut truncated = false;
    // STATE frames carry gateway-rewritten stamps = virtual arrival times;
    // emission times are recovered by counting (one STATE per cycle).
    let mut pending: Option<(u64, u64, Frame)> = None; // arrival, emission, frame
    let mut states_read: u64 = 0;
    let mut newest: Option<(u64, Frame)> = None; // emission, frame

    'rows: for sp in samples {
        let t_us = (sp.t * 1e6).round() as u64;
        if tx.send(MSG_SETPOINT, t_us, sp.lengths.clone()).is_err() {
            truncated = true;
            break 'rows;
        }
        // every emission up to this row's virtual time must eventually
        // arrive (the plant has advanced at least this far), so block for
        // them; anything later stays pending for future rows
        let expected_states = t_us / cycle_us + 1;
        loop {
            if let Some((arrival, emission, f)) = pending.take() {
                if arrival <= t_us {
                    newest = Some((emission, f));
                    continue;
                }
                pending = Some((arrival, emission, f));
                break;
            }
            if states_read >= expected_states {
                break;
            }
            match read_frame(&mut r) {
                Ok(f) => match f.msg_type {
                    MSG_STATE => {
                        if f.payload.len() != 2 + 2 * m {
                            return Err(NetError::Protocol(format!(
                                "STATE payload has {} doubles, expected {}",
                                f.payload.len(),
                                2 + 2 * m
                            )));
                        }
                        let emission = states_read * cycle_us;
                        states_read += 1;
                        pending = Some((f.t_send_us, emission, f));
                    }
                    super::frame::MSG_ERROR => return Err(remote_err(&f)),
                    other => {
                        return Err(NetError::Protocol(format!(
                            "unexpected {} mid-run",
                            msg_name(other)
                        )))
                    }
                },
                Err(FrameError::Closed) | Err(FrameError::Truncated { .. }) => {
                    truncated = true;
                    records.push(state_record(t_us, sp, &newest, m));
                    break 'rows;
                }
                Err(e) => return Err(e.into()),
            }
        }
        records.push(state_record(t_us, sp, &newest, m));
    }

    if !truncated {
        let t_end = records.last().map_or(0, |rec| rec.t_us) + cycle_us;
        if tx.send(MSG_STOP, t_end, vec![]).is_err() {
            truncated = true;
        } else {
            loop {
                match read_frame(&mut r) {
                    Ok(f) => match f.msg_type {
                        MSG_STATE => continue, // in-flight frames drain out
                        MSG_STOP => break,
                        super::frame::MSG_ERROR => return Err(remote_err(&f)),
                        other => {
                            return Err(NetError::Protocol(format!(
                                "unexpected {} during shutdown",
                                msg_name(other)
                            )))
                        }
                    },
                    Err(FrameError::Closed) => {
                        truncated = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }

    Ok(LoopLog {
        cycle_us,
        cable_count: m,
        records,
        truncated,
    })
}

enum Inbound {
    Frame(Frame),
    Gone(NetError),
}

fn await_reply(rx: &Receiver<Inbound>, wanted: u8) -> Result<Frame, NetError> {
    let deadline = Instant::now() + HANDSHAKE_TIMEOUT;
    loop {
        let left = deadline
            .checked_duration_since(Instant::now())
            .ok_or(NetError::Timeout)?;
        match rx.recv_timeout(left) {
            Ok(Inbound::Frame(f)) if f.msg_type == wanted => return Ok(f),
            // measurements may stream during shutdown; skip them
            Ok(Inbound::Frame(f)) if f.msg_type == MSG_STATE => continue,
            Ok(Inbound::Frame(f)) if f.msg_type == super::frame::MSG_ERROR => {
                return Err(remote_err(&f))
            }
            Ok(Inbound::Frame(f)) => {
                return Err(NetError::Protocol(format!(
                    "unexpected {} while waiting for {}",
                    msg_name(f.msg_type),
                    msg_name(wanted)
                )))
            }
            Ok(Inbound::Gone(e)) => return Err(e),
            Err(RecvTimeoutError::Timeout) => return Err(NetError::Timeout),
            Err(RecvTimeoutError::Disconnected) => return Err(NetError::ConnectionLost),
        }
    }
}

fn run_realtime(
    desc: &RobotDescription,
    samples: &[Setpoint],
    cycle_us: u64,
    cycle_s: f64,
    mut r: impl Read + Send + 'static,
    w: impl Write,
) -> Result<LoopLog, NetError> {
    let m = desc.cable_count();
    let mut tx = FrameSender::new(w);
    let epoch = Instant::now();
    let now_us = move || epoch.elapsed().as_micros() as u64;

    let (itx, irx) = channel();
    thread::Builder::new()
        .name("ctrl-rx".into())
        .spawn(move || loop {
            let msg = match read_frame(&mut r) {
                Ok(f) => Inbound::Frame(f),
                Err(FrameError::Closed) => Inbound::Gone(NetError::ConnectionLost),
                Err(e) => Inbound::Gone(e.into()),
            };
            let gone = matches!(msg, Inbound::Gone(_));
            if itx.send(msg).is_err() || gone {
                return;
            }
        })
        .expect("spawn controller reader");

    let start = samples[0].pose;
    tx.send(MSG_HELLO, now_us(), vec![robot_hash(desc) as f64])?;
    check_hello(desc, &await_reply(&irx, MSG_HELLO)?)?;

    // midpoint clock alignment: offset ≈ plant_clock − controller_clock
    let mut offsets = Vec::with_capacity(TIMESYNC_ROUNDS);
    for _ in 0..TIMESYNC_ROUNDS {
        let t0 = now_us();
        tx.send(MSG_TIMESYNC_REQ, t0, vec![])?;
        let rep = await_reply(&irx, MSG_TIMESYNC_REP)?;
        let t3 = now_us();
        if rep.payload.len() != 2 {
            return Err(NetError::Protocol("TIMESYNC reply must be 2 doubles".into()));
        }
        let (t1, t2) = (rep.payload[0], rep.payload[1]);
        offsets.push(((t1 - t0 as f64) + (t2 - t3 as f64)) / 2.0);
    }
    offsets.sort_by(|a, b| a.total_cmp(b));
    let offset = offsets[offsets.len() / 2];

    tx.send(MSG_CONFIG, now_us(), vec![cycle_s, 0.0, start.x, start.y])?;
    await_reply(&irx, MSG_CONFIG)?;
    tx.send(MSG_START, now_us(), vec![])?;
    await_reply(&irx, MSG_START)?;

    let motion_start = now_us();
    let mut records = Vec::with_capacity(samples.len());
    let mut truncated = false;
    let mut newest: Option<Frame> = None;

    'rows: for sp in samples {
        let t_us = (sp.t * 1e6).round() as u64;
        loop {
            let n = now_us().saturating_sub(motion_start);
            if n >= t_us {
                break;
            }
            thread::sleep(Duration::from_micros((t_us - n).min(500)));
        }
        if tx.send(MSG_SETPOINT, now_us(), sp.lengths.clone()).is_err() {
            truncated = true;
            break 'rows;
        }
        loop {
            match irx.try_recv() {
                Ok(Inbound::Frame(f)) if f.msg_type == MSG_STATE => {
                    if f.payload.len() != 2 + 2 * m {
                        return Err(NetError::Protocol(format!(
                            "STATE payload has {} doubles, expected {}",
                            f.payload.len(),
                            2 + 2 * m
                        )));
                    }
                    newest = Some(f);
                }
                Ok(Inbound::Frame(f)) if f.msg_type == super::frame::MSG_ERROR => {
                    return Err(remote_err(&f))
                }
                Ok(Inbound::Frame(f)) => {
                    return Err(NetError::Protocol(format!(
                        "unexpected {} mid-run",
                        msg_name(f.msg_type)
                    )))
                }
                Ok(Inbound::Gone(_)) => {
                    truncated = true;
                    records.push(realtime_record(t_us, sp, &newest, m, now_us(), offset));
                    break 'rows;
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    truncated = true;
                    records.push(realtime_record(t_us, sp, &newest, m, now_us(), offset));
                    break 'rows;
                }
            }
        }
        records.push(realtime_record(t_us, sp, &newest, m, now_us(), offset));
    }

    if !truncated {
        if tx.send(MSG_STOP, now_us(), vec![]).is_err() {
            truncated = true;
        } else {
            match await_reply(&irx, MSG_STOP) {
                Ok(_) => {}
                Err(NetError::ConnectionLost) => truncated = true,
                Err(e) => return Err(e),
            }
        }
    }

    Ok(LoopLog {
        cycle_us,
        cable_count: m,
        records,
        truncated,
    })
}

fn realtime_record(
    t_us: u64,
    sp: &Setpoint,
    newest: &Option<Frame>,
    m: usize,
    now_us: u64,
    offset: f64,
) -> LoopRecord {
    match newest {
        None => LoopRecord {
            t_us,
            target: sp.pose,
            cmd_lengths: sp.lengths.clone(),
            meas_pose: None,
            meas_lengths: None,
            tensions: None,
            state_age_us: None,
        },
        Some(f) => {
            // plant stamp mapped onto the controller clock
            let emission_local = f.t_send_us as f64 - offset;
            LoopRecord {
                t_us,
                target: sp.pose,
                cmd_lengths: sp.lengths.clone(),
                meas_pose: Some(Vec2::new(f.payload[0], f.payload[1])),
                meas_lengths: Some(f.payload[2..2 + m].to_vec()),
                tensions: Some(f.payload[2 + m..2 + 2 * m].to_vec()),
                state_age_us: Some((now_us as f64 - emission_local).round() as i64),
            }
        }
    }
}
