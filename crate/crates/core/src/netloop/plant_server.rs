//! Plant server: one protocol session driving the simulated plant.
//!
//! Session shape: HELLO / CONFIG / START handshake, then SETPOINT frames
//! command cable lengths while the plant steps at `cfg.dt_s` and emits one
//! STATE frame per controller cycle; STOP ends the session.
//!
//! The CONFIG payload is four doubles: `[cycle_s, sim_flag, start_x,
//! start_y]`. `sim_flag` = 1 selects simulated time: the plant's clock is
//! virtual and advances only when a SETPOINT arrives, stepping up to the
//! frame's (gateway-rewritten) arrival stamp — exactly cycle/dt steps per
//! setpoint once the stream is in steady state, which makes whole runs
//! deterministic. `sim_flag` = 0 runs the plant off the wall clock.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc::{channel, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use crate::model::{robot_hash, RobotDescription, Vec2};
use crate::plant::{init_state, measure, step, PlantConfig, PlantState};

use super::frame::{
    read_frame, Frame, FrameError, FrameSender, msg_name, ERR_CONFIG, ERR_HASH_MISMATCH,
    ERR_PLANT, ERR_PROTOCOL, MSG_CONFIG, MSG_ERROR, MSG_HELLO, MSG_SETPOINT, MSG_START,
    MSG_STATE, MSG_STOP, MSG_TIMESYNC_REP, MSG_TIMESYNC_REQ,
};
use super::transport::SplitStream;
use super::{remote_err, NetError};

enum Expected {
    Got(Frame),
    Stopped,
}

/// Reads until the wanted message type arrives. TIMESYNC requests are
/// answered in place; STOP is honored as a clean shutdown from any phase.
fn expect<R: Read, W: Write>(
    r: &mut R,
    tx: &mut FrameSender<W>,
    wanted: u8,
    now_us: u64,
) -> Result<Expected, NetError> {
    loop {
        let f = match read_frame(r) {
            Ok(f) => f,
            Err(FrameError::Closed) => return Err(NetError::ConnectionLost),
            Err(e) => {
                let _ = tx.send(MSG_ERROR, now_us, vec![ERR_PROTOCOL]);
                return Err(e.into());
            }
        };
        match f.msg_type {
            t if t == wanted => return Ok(Expected::Got(f)),
            MSG_TIMESYNC_REQ => {
                tx.send(MSG_TIMESYNC_REP, now_us, vec![now_us as f64, now_us as f64])?;
            }
            MSG_STOP => {
                tx.send(MSG_STOP, now_us, vec![])?;
                return Ok(Expected::Stopped);
            }
            MSG_ERROR => return Err(remote_err(&f)),
            other => {
                let _ = tx.send(MSG_ERROR, now_us, vec![ERR_PROTOCOL]);
                return Err(NetError::Protocol(format!(
                    "unexpected {} while waiting for {}",
                    msg_name(other),
                    msg_name(wanted)
                )));
            }
        }
    }
}

struct SessionSetup {
    simulated: bool,
    state: PlantState,
    dt_us: u64,
    cycle_us: u64,
    steps_per_cycle: u64,
}

fn parse_config<W: Write>(
    desc: &RobotDescription,
    cfg: &PlantConfig,
    f: &Frame,
    tx: &mut FrameSender<W>,
) -> Result<SessionSetup, NetError> {
    let bail_cfg = |tx: &mut FrameSender<W>, msg: String| {
        let _ = tx.send(MSG_ERROR, 0, vec![ERR_CONFIG]);
        Err(NetError::Config(msg))
    };
    if f.payload.len() != 4 {
        let _ = tx.send(MSG_ERROR, 0, vec![ERR_PROTOCOL]);
        return Err(NetError::Protocol(format!(
            "CONFIG payload has {} doubles, expected 4",
            f.payload.len()
        )));
    }
    let cycle_s = f.payload[0];
    let sim_flag = f.payload[1];
    let start = Vec2::new(f.payload[2], f.payload[3]);
    if !(cycle_s.is_finite() && cycle_s > 0.0) {
        return bail_cfg(tx, format!("non-positive cycle {cycle_s}"));
    }
    if sim_flag != 0.0 && sim_flag != 1.0 {
        return bail_cfg(tx, format!("bad sim flag {sim_flag}"));
    }
    if let Err(e) = cfg.validate(desc) {
        let _ = tx.send(MSG_ERROR, 0, vec![ERR_CONFIG]);
        return Err(e.into());
    }
    let dt_exact = cfg.dt_s * 1e6;
    let dt_us = dt_exact.round() as u64;
    if dt_us == 0 || (dt_exact - dt_us as f64).abs() > 1e-3 {
        return bail_cfg(tx, format!("dt {} s is not a whole microsecond count", cfg.dt_s));
    }
    let cycle_exact = cycle_s * 1e6;
    let cycle_us = cycle_exact.round() as u64;
    if (cycle_exact - cycle_us as f64).abs() > 1e-3 {
        return bail_cfg(tx, format!("cycle {cycle_s} s is not a whole microsecond count"));
    }
    if !cycle_us.is_multiple_of(dt_us) {
        return bail_cfg(
            tx,
            format!("cycle {cycle_s} s is not a whole number of dt = {} s steps", cfg.dt_s),
        );
    }
    let state = match init_state(desc, start) {
        Ok(s) => s,
        Err(e) => {
            let _ = tx.send(MSG_ERROR, 0, vec![ERR_PLANT]);
            return Err(e.into());
        }
    };
    Ok(SessionSetup {
        simulated: sim_flag == 1.0,
        state,
        dt_us,
        cycle_us,
        steps_per_cycle: cycle_us / dt_us,
    })
}

fn emit_state<W: Write>(
    tx: &mut FrameSender<W>,
    t_us: u64,
    state: &PlantState,
) -> Result<(), NetError> {
    let (pose, lengths, tensions, _) = measure(state);
    let mut payload = Vec::with_capacity(2 + 2 * lengths.len());
    payload.push(pose.x);
    payload.push(pose.y);
    payload.extend_from_slice(lengths);
    payload.extend_from_slice(tensions);
    tx.send(MSG_STATE, t_us, payload)?;
    Ok(())
}

/// Serves exactly one control session over an established connection.
/// Returns once the peer sends STOP (or on error, after a best-effort
/// ERROR frame).
pub fn serve_plant<S: SplitStream>(
    desc: &RobotDescription,
    cfg: &PlantConfig,
    stream: S,
) -> Result<(), NetError> {
    let (mut r, w) = stream.into_split()?;
    let mut tx = FrameSender::new(w);
    let my_hash = robot_hash(desc);

    let hello = match expect(&mut r, &mut tx, MSG_HELLO, 0)? {
        Expected::Got(f) => f,
        Expected::Stopped => return Ok(()),
    };
    if hello.payload.len() != 1 {
        let _ = tx.send(MSG_ERROR, 0, vec![ERR_PROTOCOL]);
        return Err(NetError::Protocol("HELLO payload must be 1 double".into()));
    }
    if hello.payload[0] != my_hash as f64 {
        let _ = tx.send(MSG_ERROR, 0, vec![ERR_HASH_MISMATCH]);
        return Err(NetError::HashMismatch {
            local: my_hash,
            remote: hello.payload[0] as u64,
        });
    }
    tx.send(MSG_HELLO, 0, vec![my_hash as f64])?;

    let config = match expect(&mut r, &mut tx, MSG_CONFIG, 0)? {
        Expected::Got(f) => f,
        Expected::Stopped => return Ok(()),
    };
    let setup = parse_config(desc, cfg, &config, &mut tx)?;
    tx.send(MSG_CONFIG, 0, config.payload.clone())?;

    match expect(&mut r, &mut tx, MSG_START, 0)? {
        Expected::Got(_) => {}
        Expected::Stopped => return Ok(()),
    }
    tx.send(MSG_START, 0, vec![])?;

    if setup.simulated {
        run_simulated(&mut r, &mut tx, desc, cfg, setup)
    } else {
        run_realtime(r, tx, desc.clone(), *cfg, setup)
    }
}

fn run_simulated<R: Read, W: Write>(
    r: &mut R,
    tx: &mut FrameSender<W>,
    desc: &RobotDescription,
    cfg: &PlantConfig,
    setup: SessionSetup,
) -> Result<(), NetError> {
    let m = desc.cable_count();
    let mut state = setup.state;
    let mut commanded = state.axis.clone();
    let mut vt: u64 = 0;
    emit_state(tx, vt, &state)?;
    loop {
        let f = match read_frame(r) {
            Ok(f) => f,
            Err(FrameError::Closed) => return Err(NetError::ConnectionLost),
            Err(e) => {
                let _ = tx.send(MSG_ERROR, vt, vec![ERR_PROTOCOL]);
                return Err(e.into());
            }
        };
        match f.msg_type {
            MSG_SETPOINT => {
                if f.payload.len() != m {
                    let _ = tx.send(MSG_ERROR, vt, vec![ERR_PROTOCOL]);
                    return Err(NetError::Protocol(format!(
                        "SETPOINT carries {} lengths for {m} cables",
                        f.payload.len()
                    )));
                }
                // advance the virtual clock to this frame's arrival,
                // emitting one STATE per crossed cycle boundary, then let
                // the new command take effect
                while vt < f.t_send_us {
                    state = match step(desc, cfg, &state, &commanded) {
                        Ok(s) => s,
                        Err(e) => {
                            let _ = tx.send(MSG_ERROR, vt, vec![ERR_PLANT]);
                            return Err(e.into());
                        }
                    };
                    vt += setup.dt_us;
                    if vt.is_multiple_of(setup.cycle_us) {
                        emit_state(tx, vt, &state)?;
                    }
                }
                commanded = f.payload;
            }
            MSG_STOP => {
                tx.send(MSG_STOP, vt, vec![])?;
                return Ok(());
            }
            MSG_TIMESYNC_REQ => {
                tx.send(MSG_TIMESYNC_REP, vt, vec![vt as f64, vt as f64])?;
            }
            MSG_ERROR => return Err(remote_err(&f)),
            other => {
                let _ = tx.send(MSG_ERROR, vt, vec![ERR_PROTOCOL]);
                return Err(NetError::Protocol(format!(
                    "unexpected {} mid-session",
                    msg_name(other)
                )));
            }
        }
    }
}

fn run_realtime<R: Read + Send + 'static, W: Write>(
    mut r: R,
    mut tx: FrameSender<W>,
    desc: RobotDescription,
    cfg: PlantConfig,
    setup: SessionSetup,
) -> Result<(), NetError> {
    enum Inbound {
        Frame(Frame),
        Gone(NetError),
    }
    let (itx, irx) = channel();
    thread::Builder::new()
        .name("plant-rx".into())
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
        .expect("spawn plant reader");

    let m = desc.cable_count();
    let mut state = setup.state;
    let mut commanded = state.axis.clone();
    let epoch = Instant::now();
    let now_us = |epoch: Instant| epoch.elapsed().as_micros() as u64;
    let mut steps: u64 = 0;
    emit_state(&mut tx, now_us(epoch), &state)?;
    loop {
        loop {
            match irx.try_recv() {
                Ok(Inbound::Frame(f)) => match f.msg_type {
                    MSG_SETPOINT => {
                        if f.payload.len() != m {
                            let _ = tx.send(MSG_ERROR, now_us(epoch), vec![ERR_PROTOCOL]);
                            return Err(NetError::Protocol(format!(
                                "SETPOINT carries {} lengths for {m} cables",
                                f.payload.len()
                            )));
                        }
                        commanded = f.payload;
                    }
                    MSG_STOP => {
                        tx.send(MSG_STOP, now_us(epoch), vec![])?;
                        return Ok(());
                    }
                    MSG_TIMESYNC_REQ => {
                        let n = now_us(epoch) as f64;
                        tx.send(MSG_TIMESYNC_REP, now_us(epoch), vec![n, n])?;
                    }
                    MSG_ERROR => return Err(remote_err(&f)),
                    other => {
                        let _ = tx.send(MSG_ERROR, now_us(epoch), vec![ERR_PROTOCOL]);
                        return Err(NetError::Protocol(format!(
                            "unexpected {} mid-session",
                            msg_name(other)
                        )));
                    }
                },
                Ok(Inbound::Gone(e)) => return Err(e),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Err(NetError::ConnectionLost),
            }
        }
        let due = Duration::from_micros((steps + 1) * setup.dt_us);
        let now = epoch.elapsed();
        if now >= due {
            state = match step(&desc, &cfg, &state, &commanded) {
                Ok(s) => s,
                Err(e) => {
                    let _ = tx.send(MSG_ERROR, now_us(epoch), vec![ERR_PLANT]);
                    return Err(e.into());
                }
            };
            steps += 1;
            if steps.is_multiple_of(setup.steps_per_cycle) {
                emit_state(&mut tx, now_us(epoch), &state)?;
            }
        } else {
            thread::sleep((due - now).min(Duration::from_micros(200)));
        }
    }
}

/// Accepts one connection on the listener and serves one session.
pub fn serve_plant_tcp(
    desc: &RobotDescription,
    cfg: &PlantConfig,
    listener: &TcpListener,
) -> Result<(), NetError> {
    let (stream, _) = listener.accept()?;
    let _ = stream.set_nodelay(true);
    serve_plant(desc, cfg, stream)
}
