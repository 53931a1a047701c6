//! Wire frame codec.
//!
//! Every message on the wire is one frame with a fixed 22-byte header, all
//! fields little-endian:
//!
//! | offset | size | field       |
//! |-------:|-----:|-------------|
//! |      0 |    4 | magic `CDPR`|
//! |      4 |    1 | version (1) |
//! |      5 |    1 | msg_type    |
//! |      6 |    2 | flags (0)   |
//! |      8 |    4 | seq         |
//! |     12 |    8 | t_send_us   |
//! |     20 |    2 | payload_len |
//!
//! The payload is an array of 8-byte little-endian IEEE-754 doubles
//! (`payload_len` = 8 × count). `t_send_us` is the sender's monotonic clock
//! in microseconds — the *virtual* clock in simulated-time runs, where the
//! delay gateway rewrites it to the frame's virtual arrival time.
//!
//! Message types:
//!
//! | code | name         | payload doubles                          |
//! |-----:|--------------|------------------------------------------|
//! | 0x01 | HELLO        | robot-description hash (48-bit integer)  |
//! | 0x02 | CONFIG       | cycle_s, sim_flag, start_x, start_y      |
//! | 0x03 | START        | —                                        |
//! | 0x04 | SETPOINT     | commanded lengths l_1..l_m (mm)          |
//! | 0x05 | STATE        | x, y, l_1..l_m, T_1..T_m                 |
//! | 0x06 | STOP         | —                                        |
//! | 0x07 | TIMESYNC req | —                                        |
//! | 0x08 | TIMESYNC rep | t_recv_us, t_reply_us (server clock)     |
//! | 0x7F | ERROR        | error code                               |

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"CDPR";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 22;

pub const MSG_HELLO: u8 = 0x01;
pub const MSG_CONFIG: u8 = 0x02;
pub const MSG_START: u8 = 0x03;
pub const MSG_SETPOINT: u8 = 0x04;
pub const MSG_STATE: u8 = 0x05;
pub const MSG_STOP: u8 = 0x06;
pub const MSG_TIMESYNC_REQ: u8 = 0x07;
pub const MSG_TIMESYNC_REP: u8 = 0x08;
pub const MSG_ERROR: u8 = 0x7F;

/// Error codes carried by ERROR frames.
pub const ERR_PROTOCOL: f64 = 1.0;
pub const ERR_HASH_MISMATCH: f64 = 2.0;
pub const ERR_CONFIG: f64 = 3.0;
pub const ERR_PLANT: f64 = 4.0;

pub fn msg_name(t: u8) -> &'static str {
    match t {
        MSG_HELLO => "HELLO",
        MSG_CONFIG => "CONFIG",
        MSG_START => "START",
        MSG_SETPOINT => "SETPOINT",
        MSG_STATE => "STATE",
        MSG_STOP => "STOP",
        MSG_TIMESYNC_REQ => "TIMESYNC-REQ",
        MSG_TIMESYNC_REP => "TIMESYNC-REP",
        MSG_ERROR => "ERROR",
        _ => "UNKNOWN",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub msg_type: u8,
    pub flags: u16,
    pub seq: u32,
    pub t_send_us: u64,
    pub payload: Vec<f64>,
}

impl Frame {
    pub fn new(msg_type: u8, seq: u32, t_send_us: u64, payload: Vec<f64>) -> Frame {
        Frame {
            msg_type,
            flags: 0,
            seq,
            t_send_us,
            payload,
        }
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unknown protocol version {0}")]
    UnknownVersion(u8),
    #[error("payload length {0} is not a multiple of 8")]
    BadPayloadLen(u16),
    #[error("truncated frame: wanted {wanted} bytes, got {got}")]
    Truncated { wanted: usize, got: usize },
    #[error("connection closed")]
    Closed,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub fn encode_frame(f: &Frame) -> Vec<u8> {
    let payload_len = f.payload.len() * 8;
    debug_assert!(payload_len <= u16::MAX as usize);
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(f.msg_type);
    out.extend_from_slice(&f.flags.to_le_bytes());
    out.extend_from_slice(&f.seq.to_le_bytes());
    out.extend_from_slice(&f.t_send_us.to_le_bytes());
    out.extend_from_slice(&(payload_len as u16).to_le_bytes());
    for d in &f.payload {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

/// Decodes exactly one frame occupying the whole buffer.
pub fn decode_frame(buf: &[u8]) -> Result<Frame, FrameError> {
    if buf.len() < HEADER_LEN {
        return Err(FrameError::Truncated {
            wanted: HEADER_LEN,
            got: buf.len(),
        });
    }
    let magic: [u8; 4] = buf[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    let version = buf[4];
    if version != VERSION {
        return Err(FrameError::UnknownVersion(version));
    }
    let msg_type = buf[5];
    let flags = u16::from_le_bytes(buf[6..8].try_into().unwrap());
    let seq = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    let t_send_us = u64::from_le_bytes(buf[12..20].try_into().unwrap());
    let payload_len = u16::from_le_bytes(buf[20..22].try_into().unwrap());
    if payload_len % 8 != 0 {
        return Err(FrameError::BadPayloadLen(payload_len));
    }
    let wanted = HEADER_LEN + payload_len as usize;
    if buf.len() != wanted {
        return Err(FrameError::Truncated {
            wanted,
            got: buf.len(),
        });
    }
    let payload = buf[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Frame {
        msg_type,
        flags,
        seq,
        t_send_us,
        payload,
    })
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], at_boundary: bool) -> Result<(), FrameError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => {
                return if got == 0 && at_boundary {
                    Err(FrameError::Closed)
                } else {
                    Err(FrameError::Truncated {
                        wanted: buf.len(),
                        got,
                    })
                };
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(FrameError::Io(e)),
        }
    }
    Ok(())
}

/// Reads one frame from a byte stream. A clean EOF on a frame boundary is
/// [`FrameError::Closed`]; EOF mid-frame is a truncation.
pub fn read_frame(r: &mut impl Read) -> Result<Frame, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_or(r, &mut header, true)?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if header[4] != VERSION {
        return Err(FrameError::UnknownVersion(header[4]));
    }
    let payload_len = u16::from_le_bytes(header[20..22].try_into().unwrap());
    if payload_len % 8 != 0 {
        return Err(FrameError::BadPayloadLen(payload_len));
    }
    let mut rest = vec![0u8; payload_len as usize];
    read_exact_or(r, &mut rest, false)?;
    let mut whole = Vec::with_capacity(HEADER_LEN + rest.len());
    whole.extend_from_slice(&header);
    whole.extend_from_slice(&rest);
    decode_frame(&whole)
}

pub fn write_frame(w: &mut impl Write, f: &Frame) -> io::Result<()> {
    w.write_all(&encode_frame(f))?;
    w.flush()
}

/// Outbound frame writer for one sender. Maintains the per-sender frame
/// invariants: seq increments by one per frame and `t_send_us` stays
/// monotonic (clamped to never run backwards).
pub struct FrameSender<W: Write> {
    w: W,
    seq: u32,
    last_stamp: u64,
}

impl<W: Write> FrameSender<W> {
    pub fn new(w: W) -> FrameSender<W> {
        FrameSender {
            w,
            seq: 0,
            last_stamp: 0,
        }
    }

    pub fn send(&mut self, msg_type: u8, t_us: u64, payload: Vec<f64>) -> Result<(), FrameError> {
        self.seq += 1;
        let stamp = t_us.max(self.last_stamp);
        self.last_stamp = stamp;
        write_frame(&mut self.w, &Frame::new(msg_type, self.seq, stamp, payload))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setpoint_round_trips_bit_exactly() {
        let f = Frame::new(
            MSG_SETPOINT,
            7,
            123_456,
            vec![975.8073, 975.8073],
        );
        let bytes = encode_frame(&f);
        assert_eq!(bytes.len(), HEADER_LEN + 16);
        let back = decode_frame(&bytes).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn empty_stop_frame_is_header_only() {
        let f = Frame::new(MSG_STOP, 9, 42, vec![]);
        let bytes = encode_frame(&f);
        // header carries everything; field widths sum to 22
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(bytes.len(), 22);
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let f = Frame::new(MSG_STOP, 1, 0, vec![]);
        let mut bytes = encode_frame(&f);
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode_frame(&bytes),
            Err(FrameError::BadMagic(m)) if &m == b"XXXX"
        ));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let mut bytes = encode_frame(&Frame::new(MSG_STOP, 1, 0, vec![]));
        bytes[4] = 9;
        assert!(matches!(
            decode_frame(&bytes),
            Err(FrameError::UnknownVersion(9))
        ));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = encode_frame(&Frame::new(MSG_STATE, 1, 0, vec![1.0, 2.0]));
        assert!(matches!(
            decode_frame(&bytes[..bytes.len() - 3]),
            Err(FrameError::Truncated { .. })
        ));
    }

    #[test]
    fn stream_reader_handles_back_to_back_frames_and_eof() {
        let a = Frame::new(MSG_HELLO, 1, 10, vec![42.0]);
        let b = Frame::new(MSG_STATE, 2, 20, vec![1.0, 2.0, 3.0]);
        let mut buf = encode_frame(&a);
        buf.extend(encode_frame(&b));
        let mut cursor = std::io::Cursor::new(buf);
        assert_eq!(read_frame(&mut cursor).unwrap(), a);
        assert_eq!(read_frame(&mut cursor).unwrap(), b);
        assert!(matches!(read_frame(&mut cursor), Err(FrameError::Closed)));
    }

    #[test]
    fn eof_mid_frame_is_truncation_not_closed() {
        let bytes = encode_frame(&Frame::new(MSG_STATE, 1, 0, vec![5.0]));
        let mut cursor = std::io::Cursor::new(&bytes[..HEADER_LEN + 4]);
        assert!(matches!(
            read_frame(&mut cursor),
            Err(FrameError::Truncated { .. })
        ));
    }

    #[test]
    fn nan_payloads_survive_bit_for_bit() {
        let weird = f64::from_bits(0x7ff8_dead_beef_0001);
        let f = Frame::new(MSG_STATE, 3, 5, vec![weird, -0.0]);
        let back = decode_frame(&encode_frame(&f)).unwrap();
        assert_eq!(back.payload[0].to_bits(), weird.to_bits());
        assert_eq!(back.payload[1].to_bits(), (-0.0f64).to_bits());
    }
}
