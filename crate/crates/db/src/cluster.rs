//! In-process cluster: engines, a Bloom-filter server, front-ends and a
//! certificate repository joined through a core forwarder.
//!
//! Every component runs on its own node with one link to the core. The
//! core routes each engine's level-0 prefixes to it, `/OGB/BF` to the BF
//! server and `/OGB` as a default to the first engine, which answers void
//! tiles for areas nobody owns. `/CERT` is served by a repository on the
//! core itself.

use std::collections::HashMap;
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::Name;
use geoicn_net::icn::{tcp, Clock, Endpoint, FaceId, ForwarderConfig, GetOptions, LinkConfig, Node, SigScheme, SystemClock};
use geoicn_net::trust::{
    default_validity, network_fetcher, serve_certificates, Certificate, Did, Identity, KeyPair, Permission, Role, TrustStore,
};
use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloom::BloomParams;
use crate::bloomsvc::BloomServer;
use crate::engine::{Engine, EngineConfig, BF_PREFIX};
use crate::frontend::{Frontend, FrontendConfig};
use crate::{CostModel, DbError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Ed25519,
    Hmac,
}

impl From<Scheme> for SigScheme {
    fn from(s: Scheme) -> SigScheme {
        match s {
            Scheme::Ed25519 => SigScheme::Ed25519,
            Scheme::Hmac => SigScheme::HmacSha256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    #[default]
    Memory,
    Tcp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BloomConfig {
    pub capacity: usize,
    pub fp: f64,
}

impl Default for BloomConfig {
    fn default() -> Self {
        BloomConfig { capacity: 100_000, fp: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    pub id: String,
    /// South-west corners `[lng, lat]` of the owned level-0 tiles.
    pub tiles: Vec<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub tid: String,
    pub cid: String,
    pub uid: String,
    /// `r` or `rw`.
    pub perm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub scheme: Scheme,
    pub seed: u64,
    pub transport: Transport,
    /// Rate of every component-to-core link; unlimited when absent.
    pub link_rate_bps: Option<u64>,
    pub tile_freshness_ms: u32,
    pub object_freshness_ms: u32,
    pub qcache_capacity: usize,
    pub engine_workers: usize,
    pub frontends: usize,
    pub lifetime_ms: u32,
    pub retries: u32,
    pub cost: Option<CostModel>,
    pub bloom: BloomConfig,
    #[serde(rename = "engine")]
    pub engines: Vec<EngineSpec>,
    #[serde(rename = "tenant")]
    pub tenants: Vec<String>,
    #[serde(rename = "user")]
    pub users: Vec<UserSpec>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            scheme: Scheme::Ed25519,
            seed: 1,
            transport: Transport::Memory,
            link_rate_bps: None,
            tile_freshness_ms: 0,
            object_freshness_ms: 0,
            qcache_capacity: 4096,
            engine_workers: 1,
            frontends: 1,
            lifetime_ms: 2000,
            retries: 2,
            cost: None,
            bloom: BloomConfig::default(),
            engines: Vec::new(),
            tenants: Vec::new(),
            users: Vec::new(),
        }
    }
}

impl ClusterConfig {
    pub fn from_toml(s: &str) -> Result<ClusterConfig, DbError> {
        let c: ClusterConfig = toml::from_str(s).map_err(|e| DbError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ClusterConfig, DbError> {
        ClusterConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), DbError> {
        let bad = |m: String| Err(DbError::Config(m));
        if self.engines.is_empty() {
            return bad("at least one engine is required".into());
        }
        let mut owners = HashMap::new();
        for e in &self.engines {
            for t in &e.tiles {
                if let Some(prev) = owners.insert(*t, &e.id) {
                    return bad(format!("tile {t:?} owned by both {prev} and {}", e.id));
                }
                if GridSpec::OGB.tile(0, t[0], t[1]).is_err() {
                    return bad(format!("tile {t:?} is outside the world"));
                }
            }
        }
        for u in &self.users {
            if Permission::parse(&u.perm).is_none() {
                return bad(format!("user {} has permission `{}`, expected r or rw", u.uid, u.perm));
            }
            if !self.tenants.contains(&u.tid) {
                return bad(format!("user {} belongs to undeclared tenant {}", u.uid, u.tid));
            }
        }
        if !(self.bloom.fp > 0.0 && self.bloom.fp < 1.0) {
            return bad("bloom.fp must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// `n` engines splitting the level-0 tiles of `region` (south-west corner,
    /// width and height in degrees) into contiguous column bands.
    pub fn with_grid_engines(mut self, n: usize, sw: [i64; 2], width: i64, height: i64) -> ClusterConfig {
        let tiles: Vec<[i64; 2]> = (0..width).flat_map(|x| (0..height).map(move |y| [sw[0] + x, sw[1] + y])).collect();
        let per = tiles.len().div_ceil(n.max(1));
        self.engines = tiles
            .chunks(per.max(1))
            .enumerate()
            .map(|(i, c)| EngineSpec { id: format!("e{i}"), tiles: c.to_vec() })
            .collect();
        self
    }
}

pub struct Cluster {
    pub config: ClusterConfig,
    pub core: Node,
    pub engines: Vec<Engine>,
    pub bloom: BloomServer,
    pub frontends: Vec<Arc<Frontend>>,
    pub anchor: Identity,
    nodes: Vec<Node>,
    tenants: HashMap<String, Identity>,
    users: RwLock<HashMap<Name, Arc<Identity>>>,
    repo: Arc<RwLock<HashMap<Name, Certificate>>>,
    _repo_endpoint: Endpoint,
    clock: Arc<dyn Clock>,
    rng: parking_lot::Mutex<ChaCha8Rng>,
}

fn tcp_link(a: &Node, b: &Node) -> std::io::Result<(FaceId, FaceId)> {
    let l = TcpListener::bind("127.0.0.1:0")?;
    let out = TcpStream::connect(l.local_addr()?)?;
    let (inc, _) = l.accept()?;
    Ok((tcp::attach_stream(a, out)?, tcp::attach_stream(b, inc)?))
}

impl Cluster {
    pub fn start(config: ClusterConfig) -> Result<Cluster, DbError> {
        config.validate()?;
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::new());
        let now = clock.now_secs();
        let (nb, na) = default_validity(now);
        let scheme: SigScheme = config.scheme.into();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let anchor = Identity::self_signed(Role::Anchor.name(), KeyPair::generate(scheme, &mut rng), nb, na);
        let mut certs: HashMap<Name, Certificate> = HashMap::new();
        let mut tenants = HashMap::new();
        for t in &config.tenants {
            let id = anchor.issue(Role::Tenant(t.clone()).name(), KeyPair::generate(scheme, &mut rng), nb, na);
            certs.insert(id.name().clone(), id.cert.clone());
            tenants.insert(t.clone(), id);
        }
        let mut users = HashMap::new();
        for u in &config.users {
            let perm = Permission::parse(&u.perm).expect("validated");
            let role = Role::User { did: Did::new(&u.tid, &u.cid), uid: u.uid.clone(), perm };
            let id = tenants[&u.tid].issue(role.name(), KeyPair::generate(scheme, &mut rng), nb, na);
            certs.insert(id.name().clone(), id.cert.clone());
            users.insert(id.name().clone(), Arc::new(id));
        }
        let mut node_identity = |id: &str, certs: &mut HashMap<Name, Certificate>| {
            let i = anchor.issue(Role::Node(id.to_string()).name(), KeyPair::generate(scheme, &mut rng), nb, na);
            certs.insert(i.name().clone(), i.cert.clone());
            Arc::new(i)
        };
        let engine_ids: Vec<Arc<Identity>> = config.engines.iter().map(|e| node_identity(&e.id, &mut certs)).collect();
        let bf_identity = node_identity("bf", &mut certs);

        let fwd = ForwarderConfig::default();
        let core = Node::new("core", fwd, clock.clone());
        let repo = Arc::new(RwLock::new(certs));
        let repo_endpoint = Endpoint::new(&core);
        serve_certificates(&repo_endpoint, repo.clone(), 60_000);

        let link = |x: &Node| -> Result<(FaceId, FaceId), DbError> {
            match config.transport {
                Transport::Memory => Ok(Node::connect(&core, x, LinkConfig { rate_bps: config.link_rate_bps })),
                Transport::Tcp => Ok(tcp_link(&core, x)?),
            }
        };
        let cert_prefix = Name::new().child(geoicn_net::trust::access::CERT);
        let ogb = Name::new().child(geoicn_core::geogrid::ROOT);
        let bf_prefix: Name = BF_PREFIX.parse().expect("static name");
        let trust_for = |node: &Node| {
            let t = Arc::new(TrustStore::new(anchor.cert.clone(), clock.clone()));
            let opts = GetOptions::default().with_lifetime(1000).with_retries(2);
            t.set_fetcher(network_fetcher(Endpoint::new(node), opts));
            t
        };
        let mut nodes = Vec::new();

        let bloom_params = BloomParams::for_capacity(config.bloom.capacity, config.bloom.fp);
        let bf_node = Node::new("bf", fwd, clock.clone());
        let (core_face, bf_face) = link(&bf_node)?;
        core.add_route(bf_prefix.clone(), core_face);
        bf_node.add_route(cert_prefix.clone(), bf_face);
        let engine_names: Vec<String> = config.engines.iter().map(|e| e.id.clone()).collect();
        let bloom = BloomServer::start(&bf_node, bloom_params, &engine_names, bf_identity, trust_for(&bf_node));
        nodes.push(bf_node);

        let mut engines = Vec::new();
        for (i, (spec, identity)) in config.engines.iter().zip(engine_ids).enumerate() {
            let node = Node::new(spec.id.clone(), fwd, clock.clone());
            let (core_face, face) = link(&node)?;
            let tiles: Vec<TileId> = spec.tiles.iter().map(|t| GridSpec::OGB.tile(0, t[0], t[1]).expect("validated")).collect();
            for t in &tiles {
                core.add_route(GridSpec::OGB.tile_prefix(*t).prefix(3), core_face);
            }
            if i == 0 {
                core.add_route(ogb.clone(), core_face);
            }
            node.add_route(cert_prefix.clone(), face);
            node.add_route(bf_prefix.clone(), face);
            let mut ec = EngineConfig::new(spec.id.clone(), tiles);
            ec.tile_freshness_ms = config.tile_freshness_ms;
            ec.object_freshness_ms = config.object_freshness_ms;
            ec.qcache_capacity = config.qcache_capacity;
            ec.workers = config.engine_workers;
            ec.cost = config.cost;
            ec.bloom = bloom_params;
            ec.default_responder = i == 0;
            engines.push(Engine::start(&node, ec, identity, trust_for(&node))?);
            nodes.push(node);
        }

        let mut frontends = Vec::new();
        for i in 0..config.frontends.max(1) {
            let node = Node::new(format!("fe{i}"), fwd, clock.clone());
            let (_, face) = link(&node)?;
            node.add_route(ogb.clone(), face);
            node.add_route(cert_prefix.clone(), face);
            let fc = FrontendConfig {
                lifetime_ms: config.lifetime_ms,
                retries: config.retries,
                cost: config.cost,
                ..FrontendConfig::default()
            };
            frontends.push(Arc::new(Frontend::new(&node, trust_for(&node), fc)));
            nodes.push(node);
        }

        Ok(Cluster {
            config,
            core,
            engines,
            bloom,
            frontends,
            anchor,
            nodes,
            tenants,
            users: RwLock::new(users),
            repo,
            _repo_endpoint: repo_endpoint,
            clock,
            rng: parking_lot::Mutex::new(rng),
        })
    }

    pub fn frontend(&self) -> &Arc<Frontend> {
        &self.frontends[0]
    }

    pub fn engine(&self, id: &str) -> Option<&Engine> {
        self.engines.iter().find(|e| e.id() == id)
    }

    /// The configured user with `perm`.
    pub fn user(&self, tid: &str, cid: &str, uid: &str, perm: Permission) -> Option<Arc<Identity>> {
        let role = Role::User { did: Did::new(tid, cid), uid: uid.into(), perm };
        self.users.read().get(&role.name()).cloned()
    }

    /// Issues (or returns) a user certificate under a configured tenant and
    /// publishes it in the repository.
    pub fn issue_user(&self, tid: &str, cid: &str, uid: &str, perm: Permission) -> Result<Arc<Identity>, DbError> {
        if let Some(u) = self.user(tid, cid, uid, perm) {
            return Ok(u);
        }
        let tenant = self.tenants.get(tid).ok_or_else(|| DbError::Config(format!("unknown tenant {tid}")))?;
        let role = Role::User { did: Did::new(tid, cid), uid: uid.into(), perm };
        let (nb, na) = default_validity(self.clock.now_secs());
        let key = KeyPair::generate(self.anchor.key.scheme(), &mut *self.rng.lock());
        let id = Arc::new(tenant.issue(role.name(), key, nb, na));
        self.repo.write().insert(id.name().clone(), id.cert.clone());
        self.users.write().insert(id.name().clone(), id.clone());
        Ok(id)
    }

    pub fn tenant(&self, tid: &str) -> Option<&Identity> {
        self.tenants.get(tid)
    }

    /// Waits until every engine's BF updates are acknowledged.
    pub fn wait_bf_quiescent(&self, timeout: Duration) -> bool {
        self.engines.iter().all(|e| e.wait_bf_quiescent(timeout))
    }

    /// Empties engine qData caches and every forwarder content store.
    pub fn clear_caches(&self) {
        for e in &self.engines {
            e.clear_qcache();
        }
        self.core.clear_cache();
        for n in &self.nodes {
            n.clear_cache();
        }
    }

    pub fn set_cost(&self, cost: Option<CostModel>) {
        for e in &self.engines {
            e.set_cost(cost);
        }
        for f in &self.frontends {
            f.set_cost(cost);
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}
