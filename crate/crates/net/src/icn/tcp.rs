//! Length-prefixed stream framing and the TCP face transport.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use parking_lot::Mutex;

use super::face::Transport;
use super::node::Node;
use super::packet::Packet;
use super::tables::FaceId;

/// Frames larger than this are rejected as corrupt.
pub const MAX_FRAME: usize = 64 << 20;

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

struct TcpTransport(Mutex<TcpStream>);

impl Transport for TcpTransport {
    fn send(&self, packet: Packet) {
        let mut s = self.0.lock();
        if let Err(e) = write_frame(&mut *s, &packet.encode()).and_then(|_| s.flush()) {
            log::debug!("tcp face write failed: {e}");
        }
    }
}

/// Attaches a connected stream as a new face of `node`.
pub fn attach_stream(node: &Node, stream: TcpStream) -> io::Result<FaceId> {
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    let inlet = node.add_face(Arc::new(TcpTransport(Mutex::new(stream))));
    let face = inlet.face();
    let owner = node.clone();
    thread::Builder::new().name(format!("tcp-face-{}", face.0)).spawn(move || {
        let mut r = io::BufReader::new(reader);
        loop {
            match read_frame(&mut r) {
                Ok(Some(buf)) => match Packet::decode(&buf) {
                    Ok(p) => inlet.deliver(p),
                    Err(e) => log::warn!("tcp face {face}: bad packet: {e}"),
                },
                Ok(None) => break,
                Err(e) => {
                    log::debug!("tcp face {face}: {e}");
                    break;
                }
            }
        }
        owner.remove_face(face);
    })?;
    Ok(face)
}

pub fn connect(node: &Node, addr: impl ToSocketAddrs) -> io::Result<FaceId> {
    attach_stream(node, TcpStream::connect(addr)?)
}

/// Accepts connections on `addr`, attaching each as a face of `node` and
/// reporting it to `on_face`. Returns the bound address.
pub fn listen(
    node: &Node,
    addr: impl ToSocketAddrs,
    on_face: impl Fn(FaceId) + Send + 'static,
) -> io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let node = node.clone();
    thread::Builder::new().name(format!("tcp-listen-{local}")).spawn(move || {
        for stream in listener.incoming() {
            match stream.and_then(|s| attach_stream(&node, s)) {
                Ok(face) => on_face(face),
                Err(e) => log::warn!("tcp accept failed: {e}"),
            }
        }
    })?;
    Ok(local)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"hello").unwrap();
        write_frame(&mut buf, b"").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 5]);
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"hello");
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"");
        assert!(read_frame(&mut r).unwrap().is_none());
    }

    #[test]
    fn oversized_frame_rejected() {
        let buf = (MAX_FRAME as u32 + 1).to_be_bytes();
        assert!(read_frame(&mut &buf[..]).is_err());
    }
}
