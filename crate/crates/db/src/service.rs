//! Line-delimited JSON front-end service over TCP.
//!
//! Requests, one per line:
//!
//! ```text
//! {"op":"range_query","bbox":[w,s,e,n],"tid":"Foo","cid":"Shop","mode":"intersect","interval":[t0,t1],"k":50,"use_bf":true,"parallelism":16}
//! {"op":"insert","features":[<GeoJSON Feature>, ...]}
//! {"op":"delete","feature":<GeoJSON Feature>}
//! ```
//!
//! A box with `w > e` crosses the antimeridian and is split in two.
//! Replies are one JSON object per line with `"ok": true|false`.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use geoicn_core::{BBox, Feature};
use geoicn_net::trust::Identity;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::frontend::{Frontend, Mode, ObjectId, RangeQuery, DEFAULT_K};
use crate::DbError;

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    RangeQuery {
        bbox: [f64; 4],
        tid: String,
        cid: String,
        #[serde(default = "intersect")]
        mode: Mode,
        #[serde(default)]
        interval: Option<(i64, i64)>,
        /// 0 means unconstrained.
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        use_bf: bool,
        #[serde(default = "default_parallelism")]
        parallelism: usize,
    },
    Insert {
        features: Vec<Value>,
    },
    Delete {
        feature: Value,
    },
}

fn intersect() -> Mode {
    Mode::Intersect
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_parallelism() -> usize {
    16
}

/// Executes one request for `user`.
pub fn execute(fe: &Frontend, user: &Arc<Identity>, req: Request) -> Result<Value, DbError> {
    match req {
        Request::RangeQuery { bbox, tid, cid, mode, interval, k, use_bf, parallelism } => {
            let [w, s, e, n] = bbox;
            let boxes = BBox::split_antimeridian(w, s, e, n)?;
            let mut objects = Vec::new();
            let mut stats = Vec::new();
            for b in boxes {
                let q = RangeQuery {
                    bbox: b,
                    mode,
                    tid: tid.clone(),
                    cid: cid.clone(),
                    interval,
                    k: (k > 0).then_some(k),
                    use_bf,
                    parallelism,
                };
                let r = fe.range_query(user, &q)?;
                objects.extend(r.objects.into_iter().map(|f| f.raw));
                stats.push(r.stats);
            }
            Ok(json!({"ok": true, "objects": objects, "stats": stats}))
        }
        Request::Insert { features } => {
            let fs = features.into_iter().map(Feature::from_value).collect::<Result<Vec<_>, _>>()?;
            let r = fe.insert_batch(user, &fs)?;
            let rejected: Vec<Value> = r.rejected.iter().map(|(n, s)| json!([n.to_uri(), s])).collect();
            Ok(json!({"ok": rejected.is_empty(), "objects": r.objects, "stored": r.stored, "rejected": rejected}))
        }
        Request::Delete { feature } => {
            let f = Feature::from_value(feature)?;
            let status = fe.delete(user, &ObjectId::of(&f), &f.geometry)?.status()?;
            Ok(json!({"ok": true, "status": status}))
        }
    }
}

fn handle_line(fe: &Frontend, user: &Arc<Identity>, line: &str) -> Value {
    let res = serde_json::from_str::<Request>(line)
        .map_err(|e| DbError::Invalid(e.to_string()))
        .and_then(|r| execute(fe, user, r));
    res.unwrap_or_else(|e| json!({"ok": false, "error": e.to_string()}))
}

fn serve_conn(fe: Arc<Frontend>, user: Arc<Identity>, conn: TcpStream) -> std::io::Result<()> {
    let mut out = conn.try_clone()?;
    for line in BufReader::new(conn).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reply = serde_json::to_vec(&handle_line(&fe, &user, &line)).expect("JSON value serializes");
        reply.push(b'\n');
        out.write_all(&reply)?;
    }
    Ok(())
}

/// Serves requests as `user` on `addr`; returns the bound address.
pub fn serve(fe: Arc<Frontend>, user: Arc<Identity>, addr: &str) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    thread::Builder::new().name(format!("fe-service-{local}")).spawn(move || {
        for conn in listener.incoming().flatten() {
            let (fe, user) = (fe.clone(), user.clone());
            let _ = thread::Builder::new().name("fe-conn".into()).spawn(move || {
                if let Err(e) = serve_conn(fe, user, conn) {
                    log::debug!("service connection closed: {e}");
                }
            });
        }
    })?;
    Ok(local)
}
