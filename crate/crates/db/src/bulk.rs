//! Bulk-insert stream protocol.
//!
//! The client sends one frame per encoded OGB-Data packet and closes the
//! batch with an empty frame; the engine answers with a single frame holding
//! one status byte per object, in order.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpStream};

use geoicn_net::icn::tcp::{read_frame, write_frame};
use geoicn_net::icn::{Data, Packet};
use parking_lot::Mutex;

use crate::{DbError, InsertStatus};

/// Objects per batch on the wire; larger pushes are split.
pub const MAX_BATCH: usize = 8192;

/// Reads one batch; `None` on a clean close before the batch starts.
pub fn read_batch(r: &mut impl io::Read) -> io::Result<Option<Vec<Vec<u8>>>> {
    let mut frames = Vec::new();
    loop {
        match read_frame(r)? {
            None if frames.is_empty() => return Ok(None),
            None => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "batch not terminated")),
            Some(f) if f.is_empty() => return Ok(Some(frames)),
            Some(f) => frames.push(f),
        }
    }
}

pub fn write_statuses(w: &mut impl Write, statuses: &[InsertStatus]) -> io::Result<()> {
    let bytes: Vec<u8> = statuses.iter().map(|s| *s as u8).collect();
    write_frame(w, &bytes)?;
    w.flush()
}

/// Client side: one persistent connection per engine address.
#[derive(Default)]
pub struct BulkClient {
    conns: Mutex<HashMap<SocketAddr, TcpStream>>,
}

impl BulkClient {
    pub fn new() -> BulkClient {
        BulkClient::default()
    }

    /// Pushes `objects` to the engine at `addr`; statuses come back in order.
    pub fn push(&self, addr: SocketAddr, objects: &[Data]) -> Result<Vec<InsertStatus>, DbError> {
        let mut conn = match self.conns.lock().remove(&addr) {
            Some(c) => c,
            None => {
                let c = TcpStream::connect(addr)?;
                c.set_nodelay(true)?;
                c
            }
        };
        let mut out = Vec::with_capacity(objects.len());
        for chunk in objects.chunks(MAX_BATCH) {
            out.extend(push_batch(&mut conn, chunk)?);
        }
        self.conns.lock().insert(addr, conn);
        Ok(out)
    }
}

fn push_batch(conn: &mut TcpStream, objects: &[Data]) -> Result<Vec<InsertStatus>, DbError> {
    {
        let mut w = BufWriter::new(&mut *conn);
        for d in objects {
            write_frame(&mut w, &Packet::Data(d.clone()).encode())?;
        }
        write_frame(&mut w, &[])?;
        w.flush()?;
    }
    let reply = read_frame(&mut BufReader::new(&mut *conn))?.ok_or(DbError::Io("engine closed the stream".into()))?;
    if reply.len() != objects.len() {
        return Err(DbError::Malformed("bulk status frame"));
    }
    reply
        .into_iter()
        .map(|b| InsertStatus::from_u8(b).ok_or(DbError::Malformed("bulk status byte")))
        .collect()
}
