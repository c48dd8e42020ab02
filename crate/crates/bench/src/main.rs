use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use geoicn_bench::runner::{
    area_sweep, cache_sweep, lab_config, max_rate_search, probe_rate, tessellation_sweep, tile_batch_sweep, write_csv,
    AreaSweep, BenchCluster, RateProbe, REFERENCE_COST,
};
use geoicn_bench::workload::{dense_points, sparse_multipoints, Region, AREA_SWEEP_KM2};
use geoicn_db::cluster::ClusterConfig;
use geoicn_db::{service, Cluster};
use geoicn_net::icn::SigScheme;
use geoicn_net::trust::{default_validity, Did, Identity, KeyPair, Permission, Role};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "geoicn", about = "Geo-sharded spatial database over an ICN fabric")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cluster management.
    Cluster {
        #[command(subcommand)]
        cmd: ClusterCmd,
    },
    /// Inserts a GeoJSON FeatureCollection (or one Feature per line) through
    /// a running front-end service.
    Ingest {
        file: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        #[arg(long, default_value_t = 1000)]
        chunk: usize,
    },
    /// Benchmarks on an in-process cluster; CSV goes to stdout or --out.
    Bench {
        #[command(subcommand)]
        kind: BenchCmd,
    },
    /// Generates an identity file (hex) holding a key pair and certificate.
    Keygen(Keygen),
}

#[derive(Subcommand)]
enum ClusterCmd {
    /// Starts every component in this process and serves line-delimited
    /// JSON requests for one user.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// `tid:cid:uid` of a configured user; defaults to the first one.
        #[arg(long)]
        user: Option<String>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disables the injected processing cost.
    #[arg(long)]
    no_cost: bool,
    #[arg(long, default_value_t = 16)]
    parallelism: usize,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Tile-query batch duration vs batch size, tile level and engine count.
    TileBatch {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        engines: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "100,250,500,1000")]
        nq: Vec<usize>,
        /// 2 queries 1×1 km tiles, 1 queries 10×10 km tiles.
        #[arg(long, value_delimiter = ',', default_value = "2,1")]
        levels: Vec<u8>,
        /// Side of the dense square region in degrees.
        #[arg(long, default_value_t = 4)]
        side: i64,
    },
    /// Batch duration vs engine cache hit probability.
    CacheSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        engines: usize,
        #[arg(long, default_value_t = 500)]
        nq: usize,
        #[arg(long, default_value_t = 1)]
        level: u8,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        h: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        side: i64,
    },
    /// Range-query time breakdown vs area on a sparse multipoint dataset.
    AreaSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        engines: usize,
        #[arg(long, default_value_t = 20_000)]
        features: usize,
        #[arg(long, default_value_t = 20_000)]
        non_void: usize,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long)]
        bf: bool,
        #[arg(long, default_value_t = 20)]
        queries: usize,
        #[arg(long, value_delimiter = ',')]
        areas: Option<Vec<f64>>,
    },
    /// Highest Poisson query rate with no increasing latency trend.
    MaxRate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        engines: usize,
        #[arg(long, default_value_t = 20_000)]
        features: usize,
        #[arg(long, default_value_t = 100_000.0)]
        area: f64,
        #[arg(long, default_value_t = 1.0)]
        lo: f64,
        #[arg(long, default_value_t = 200.0)]
        hi: f64,
        #[arg(long, default_value_t = 2.0)]
        resolution: f64,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 8)]
        workers: usize,
        #[arg(long)]
        bf: bool,
    },
    /// Constrained tessellation size and stretch vs area and budget.
    TessellationSweep {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, value_delimiter = ',')]
        areas: Option<Vec<f64>>,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum KeyRole {
    Anchor,
    Tenant,
    User,
}

#[derive(Copy, Clone, ValueEnum)]
enum SchemeArg {
    Ed25519,
    Hmac,
}

#[derive(Args)]
struct Keygen {
    role: KeyRole,
    #[arg(long, value_enum, default_value = "ed25519")]
    scheme: SchemeArg,
    /// Identity file of the issuer (anchor for tenants, tenant for users).
    #[arg(long)]
    issuer: Option<PathBuf>,
    #[arg(long)]
    tid: Option<String>,
    #[arg(long)]
    cid: Option<String>,
    #[arg(long)]
    uid: Option<String>,
    #[arg(long, default_value = "rw")]
    perm: String,
    #[arg(long)]
    out: PathBuf,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn cost(c: &Common) -> Option<geoicn_db::CostModel> {
    (!c.no_cost).then_some(REFERENCE_COST)
}

fn dense_cluster(engines: usize, side: i64, c: &Common) -> Result<(BenchCluster, Region)> {
    let region = Region { sw: Region::LAB.sw, width: side, height: side };
    let bc = BenchCluster::start(lab_config(engines, region, cost(c)))?;
    let pts = dense_points(region);
    log::info!("ingesting {} points on {engines} engine(s)", pts.len());
    bc.ingest(&pts, 4000)?;
    Ok((bc, region))
}

fn sparse_cluster(engines: usize, features: usize, non_void: usize, c: &Common) -> Result<BenchCluster> {
    let region = Region::EUROPE;
    let bc = BenchCluster::start(lab_config(engines, region, cost(c)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let fs = sparse_multipoints(&mut rng, region, non_void, features, 3);
    bc.ingest(&fs, 4000)?;
    assert!(bc.cluster.wait_bf_quiescent(std::time::Duration::from_secs(30)), "Bloom filter updates still pending");
    Ok(bc)
}

fn bench(kind: BenchCmd) -> Result<()> {
    match kind {
        BenchCmd::TileBatch { common, engines, nq, levels, side } => {
            let mut rows = Vec::new();
            for n_db in engines {
                let (bc, region) = dense_cluster(n_db, side, &common)?;
                let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
                rows.extend(tile_batch_sweep(&bc, region, &nq, &levels, common.parallelism, &mut rng)?);
            }
            write_csv(&rows, output(&common.out)?)
        }
        BenchCmd::CacheSweep { common, engines, nq, level, h, side } => {
            let (bc, region) = dense_cluster(engines, side, &common)?;
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let rows = cache_sweep(&bc, region, nq, level, &h, common.parallelism, &mut rng)?;
            write_csv(&rows, output(&common.out)?)
        }
        BenchCmd::AreaSweep { common, engines, features, non_void, k, bf, queries, areas } => {
            let bc = sparse_cluster(engines, features, non_void, &common)?;
            let s = AreaSweep {
                areas: areas.unwrap_or_else(|| AREA_SWEEP_KM2.to_vec()),
                k,
                use_bf: bf,
                queries,
                within: Region::EUROPE.bbox(),
                parallelism: common.parallelism,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            write_csv(&area_sweep(&bc, &s, &mut rng)?, output(&common.out)?)
        }
        BenchCmd::MaxRate { common, engines, features, area, lo, hi, resolution, queries, workers, bf } => {
            let bc = sparse_cluster(engines, features, features, &common)?;
            let p = RateProbe {
                queries,
                area_km2: area,
                within: Region::EUROPE.bbox(),
                k: 50,
                use_bf: bf,
                parallelism: common.parallelism,
                workers,
                alpha: 0.05,
                seed: common.seed,
            };
            let (rate, rows) = max_rate_search(lo, hi, resolution, |r| probe_rate(&bc, &p, r));
            eprintln!("max stable rate: {rate:.2} queries/s");
            write_csv(&rows, output(&common.out)?)
        }
        BenchCmd::TessellationSweep { seed, out, k, queries, areas } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let areas = areas.unwrap_or_else(|| AREA_SWEEP_KM2.to_vec());
            let rows = tessellation_sweep(&areas, &k, queries, &Region::EUROPE.bbox(), &mut rng)?;
            write_csv(&rows, output(&out)?)
        }
    }
}

fn cluster_run(config: &Path, listen: &str, user: Option<String>) -> Result<()> {
    let cfg = ClusterConfig::load(config)?;
    let spec = match user {
        Some(u) => {
            let parts: Vec<&str> = u.split(':').collect();
            let [tid, cid, uid] = parts.as_slice() else { bail!("--user expects tid:cid:uid") };
            (tid.to_string(), cid.to_string(), uid.to_string())
        }
        None => {
            let u = cfg.users.first().ok_or_else(|| anyhow!("the configuration declares no user"))?;
            (u.tid.clone(), u.cid.clone(), u.uid.clone())
        }
    };
    let cluster = Cluster::start(cfg)?;
    let id = cluster
        .user(&spec.0, &spec.1, &spec.2, Permission::ReadWrite)
        .or_else(|| cluster.user(&spec.0, &spec.1, &spec.2, Permission::Read))
        .ok_or_else(|| anyhow!("user {}:{}:{} is not configured", spec.0, spec.1, spec.2))?;
    let addr = service::serve(cluster.frontend().clone(), id, listen)?;
    for e in &cluster.engines {
        eprintln!("engine {} owns {} level-0 tiles, bulk insert on {}", e.id(), e.config().tiles.len(), e.bulk_addr());
    }
    eprintln!("front-end service listening on {addr}");
    loop {
        std::thread::park();
    }
}

fn read_features(path: &Path) -> Result<Vec<Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(v) = serde_json::from_str::<Value>(&text) {
        return match v.get("type").and_then(Value::as_str) {
            Some("FeatureCollection") => Ok(v["features"].as_array().cloned().unwrap_or_default()),
            Some("Feature") => Ok(vec![v]),
            _ => bail!("expected a Feature or FeatureCollection"),
        };
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).context("parsing feature line"))
        .collect()
}

fn ingest(path: &Path, addr: &str, chunk: usize) -> Result<()> {
    let features = read_features(path)?;
    let stream = TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?;
    let mut out = stream.try_clone()?;
    let mut replies = BufReader::new(stream).lines();
    let (mut stored, mut rejected) = (0u64, 0usize);
    for c in features.chunks(chunk.max(1)) {
        let mut line = serde_json::to_vec(&json!({"op": "insert", "features": c}))?;
        line.push(b'\n');
        out.write_all(&line)?;
        let reply: Value = serde_json::from_str(&replies.next().ok_or_else(|| anyhow!("service closed"))??)?;
        if let Some(e) = reply.get("error") {
            bail!("insert failed: {e}");
        }
        stored += reply["stored"].as_u64().unwrap_or(0);
        rejected += reply["rejected"].as_array().map_or(0, Vec::len);
    }
    println!("{} features, {stored} objects stored, {rejected} rejected", features.len());
    Ok(())
}

fn keygen(k: Keygen) -> Result<()> {
    let scheme = match k.scheme {
        SchemeArg::Ed25519 => SigScheme::Ed25519,
        SchemeArg::Hmac => SigScheme::HmacSha256,
    };
    let now = SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs();
    let (nb, na) = default_validity(now);
    let key = KeyPair::generate(scheme, &mut rand::rngs::OsRng);
    let issuer = || -> Result<Identity> {
        let p = k.issuer.as_ref().ok_or_else(|| anyhow!("--issuer is required"))?;
        let hex_text = std::fs::read_to_string(p)?;
        Ok(Identity::from_bytes(&hex::decode(hex_text.trim())?)?)
    };
    let need = |v: &Option<String>, what: &str| v.clone().ok_or_else(|| anyhow!("--{what} is required"));
    let id = match k.role {
        KeyRole::Anchor => Identity::self_signed(Role::Anchor.name(), key, nb, na),
        KeyRole::Tenant => issuer()?.issue(Role::Tenant(need(&k.tid, "tid")?).name(), key, nb, na),
        KeyRole::User => {
            let perm = Permission::parse(&k.perm).ok_or_else(|| anyhow!("--perm must be r or rw"))?;
            let role = Role::User { did: Did::new(need(&k.tid, "tid")?, need(&k.cid, "cid")?), uid: need(&k.uid, "uid")?, perm };
            issuer()?.issue(role.name(), key, nb, na)
        }
    };
    std::fs::write(&k.out, hex::encode(id.to_bytes()) + "\n")?;
    println!("{}", id.name().to_uri());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Cluster { cmd: ClusterCmd::Run { config, listen, user } } => cluster_run(&config, &listen, user),
        Cmd::Ingest { file, addr, chunk } => ingest(&file, &addr, chunk),
        Cmd::Bench { kind } => bench(kind),
        Cmd::Keygen(k) => keygen(k),
    }
}
