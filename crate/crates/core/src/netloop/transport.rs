//! Byte-stream transports for the control loop.
//!
//! Components are written against plain [`Read`]/[`Write`] streams plus a
//! split operation so reads and writes can live on different threads. Two
//! transports are provided: real TCP sockets, and an in-memory duplex pipe
//! used by tests and the simulated-time harness (same byte semantics, no
//! sockets, fully deterministic).

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, Sender};

/// A full-duplex byte stream that can be split into independently owned
/// read and write halves.
pub trait SplitStream: Read + Write + Send + Sized {
    type ReadHalf: Read + Send + 'static;
    type WriteHalf: Write + Send + 'static;

    fn into_split(self) -> io::Result<(Self::ReadHalf, Self::WriteHalf)>;
}

impl SplitStream for TcpStream {
    type ReadHalf = TcpStream;
    type WriteHalf = TcpStream;

    fn into_split(self) -> io::Result<(TcpStream, TcpStream)> {
        let w = self.try_clone()?;
        Ok((self, w))
    }
}

/// Reading end of an in-memory pipe.
pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: VecDeque<u8>,
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        while self.buf.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.buf.extend(chunk),
                // all writers gone: clean EOF
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len());
        for slot in out.iter_mut().take(n) {
            *slot = self.buf.pop_front().unwrap();
        }
        Ok(n)
    }
}

/// Writing end of an in-memory pipe.
pub struct PipeWriter {
    tx: Sender<Vec<u8>>,
}

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        if data.is_empty() {
            return Ok(0);
        }
        self.tx
            .send(data.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// One endpoint of an in-memory duplex connection.
pub struct DuplexStream {
    reader: PipeReader,
    writer: PipeWriter,
}

impl Read for DuplexStream {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        self.reader.read(out)
    }
}

impl Write for DuplexStream {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.writer.write(data)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

impl SplitStream for DuplexStream {
    type ReadHalf = PipeReader;
    type WriteHalf = PipeWriter;

    fn into_split(self) -> io::Result<(PipeReader, PipeWriter)> {
        Ok((self.reader, self.writer))
    }
}

/// Creates a connected pair of in-memory duplex endpoints. Bytes written to
/// one endpoint are read from the other, in order. Dropping an endpoint
/// closes its outgoing direction (the peer reads EOF).
pub fn duplex_pair() -> (DuplexStream, DuplexStream) {
    let (tx_ab, rx_ab) = channel();
    let (tx_ba, rx_ba) = channel();
    let a = DuplexStream {
        reader: PipeReader {
            rx: rx_ba,
            buf: VecDeque::new(),
        },
        writer: PipeWriter { tx: tx_ab },
    };
    let b = DuplexStream {
        reader: PipeReader {
            rx: rx_ab,
            buf: VecDeque::new(),
        },
        writer: PipeWriter { tx: tx_ba },
    };
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netloop::frame::{read_frame, write_frame, Frame, FrameError, MSG_STATE};

    #[test]
    fn duplex_carries_frames_both_ways() {
        let (mut a, mut b) = duplex_pair();
        let f1 = Frame::new(MSG_STATE, 1, 100, vec![1.5]);
        let f2 = Frame::new(MSG_STATE, 2, 200, vec![2.5, 3.5]);
        write_frame(&mut a, &f1).unwrap();
        write_frame(&mut b, &f2).unwrap();
        assert_eq!(read_frame(&mut b).unwrap(), f1);
        assert_eq!(read_frame(&mut a).unwrap(), f2);
    }

    #[test]
    fn drop_closes_the_stream() {
        let (a, mut b) = duplex_pair();
        drop(a);
        assert!(matches!(read_frame(&mut b), Err(FrameError::Closed)));
    }

    #[test]
    fn split_halves_work_across_threads() {
        let (a, mut b) = duplex_pair();
        let (mut ar, mut aw) = a.into_split().unwrap();
        let t = std::thread::spawn(move || {
            let f = read_frame(&mut ar).unwrap();
            assert_eq!(f.seq, 9);
            f.t_send_us
        });
        write_frame(&mut b, &Frame::new(MSG_STATE, 9, 77, vec![])).unwrap();
        assert_eq!(t.join().unwrap(), 77);
        write_frame(&mut aw, &Frame::new(MSG_STATE, 10, 88, vec![])).unwrap();
        assert_eq!(read_frame(&mut b).unwrap().t_send_us, 88);
    }
}
