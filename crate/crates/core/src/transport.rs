//! Message passing between ranks.
//!
//! A rank is a [`RankProgram`]: it computes until it needs to exchange, hands
//! back the messages it sends and the ones it expects, and resumes once they
//! are delivered. Two drivers run the same programs:
//!
//! * [`run_virtual`] steps every rank in lockstep on one thread and charges
//!   modeled compute and link costs to per-rank clocks.
//! * [`run_wall`] gives each rank its own thread and real channels, and can
//!   hold messages back to inject link latency.

use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("invalid link model: {0}")]
    InvalidLink(String),
    #[error("rank {rank} does not exist (rank count {ranks})")]
    NoSuchRank { rank: usize, ranks: usize },
    #[error("unmatched message {src} -> {dst} tag {tag}")]
    Unmatched { src: usize, dst: usize, tag: u64 },
    #[error("rank {rank} expects tag {tag} from {src}, which is never sent")]
    NeverSent { src: usize, rank: usize, tag: u64 },
    #[error("rank {rank} timed out after {seconds} s waiting for {missing} message(s)")]
    Deadlock {
        rank: usize,
        seconds: f64,
        missing: usize,
    },
    #[error("channel to rank {0} closed")]
    Disconnected(usize),
    #[error("duplicate in-flight message {src} -> {dst} tag {tag}")]
    Duplicate { src: usize, dst: usize, tag: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub src: usize,
    pub dst: usize,
    pub tag: u64,
    pub payload: Vec<f64>,
}

impl Envelope {
    pub fn new(src: usize, dst: usize, tag: u64, payload: Vec<f64>) -> Self {
        Envelope {
            src,
            dst,
            tag,
            payload,
        }
    }

    pub fn bytes(&self) -> u64 {
        (self.payload.len() * std::mem::size_of::<f64>()) as u64
    }

    pub fn is_local(&self) -> bool {
        self.src == self.dst
    }
}

/// Uniform link: a fixed cost per message plus a cost per byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Seconds per message.
    pub latency: f64,
    /// Bytes per second.
    pub bandwidth: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            latency: 1e-5,
            bandwidth: 1e9,
        }
    }
}

impl LinkModel {
    pub fn new(latency: f64, bandwidth: f64) -> Result<Self, TransportError> {
        let link = LinkModel { latency, bandwidth };
        link.check()?;
        Ok(link)
    }

    pub fn check(&self) -> Result<(), TransportError> {
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(TransportError::InvalidLink(format!("latency {} must be >= 0", self.latency)));
        }
        if !(self.bandwidth > 0.0) {
            return Err(TransportError::InvalidLink(format!("bandwidth {} must be > 0", self.bandwidth)));
        }
        Ok(())
    }

    pub fn cost(&self, bytes: u64) -> f64 {
        self.latency + bytes as f64 / self.bandwidth
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankLedger {
    pub message_count: u64,
    pub bytes_sent: u64,
    pub modeled_comm_seconds: f64,
    pub modeled_compute_seconds: f64,
    /// Largest single message, in bytes.
    pub max_message_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub ranks: Vec<RankLedger>,
}

impl CostLedger {
    pub fn new(ranks: usize) -> Self {
        CostLedger {
            ranks: vec![RankLedger::default(); ranks],
        }
    }

    /// Charges one send. Local sends are free and not counted.
    pub fn record_send(&mut self, env: &Envelope, link: &LinkModel) {
        if env.is_local() {
            return;
        }
        let r = &mut self.ranks[env.src];
        r.message_count += 1;
        r.bytes_sent += env.bytes();
        r.modeled_comm_seconds += link.cost(env.bytes());
        r.max_message_bytes = r.max_message_bytes.max(env.bytes());
    }

    pub fn messages(&self) -> u64 {
        self.ranks.iter().map(|r| r.message_count).sum()
    }

    pub fn bytes(&self) -> u64 {
        self.ranks.iter().map(|r| r.bytes_sent).sum()
    }

    pub fn comm_seconds(&self) -> f64 {
        self.ranks.iter().map(|r| r.modeled_comm_seconds).sum()
    }

    pub fn compute_seconds(&self) -> f64 {
        self.ranks.iter().map(|r| r.modeled_compute_seconds).sum()
    }
}

/// Messages a rank sends at one exchange, and the `(src, tag)` pairs it
/// waits for before continuing.
#[derive(Debug, Clone, Default)]
pub struct Post {
    pub sends: Vec<Envelope>,
    pub expected: Vec<(usize, u64)>,
}

pub trait RankProgram: Send {
    type Error: From<TransportError> + Send;

    /// Runs to the next exchange. `None` once the program is finished.
    fn advance(&mut self) -> Result<Option<Post>, Self::Error>;

    /// Hands over the messages named in the last post's `expected`, in that order.
    fn deliver(&mut self, recvs: Vec<Envelope>) -> Result<(), Self::Error>;

    /// Compute time accumulated since the last call, in seconds.
    fn take_compute_seconds(&mut self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualOutcome {
    pub ledger: CostLedger,
    pub clocks: Vec<f64>,
    pub rounds: usize,
}

impl VirtualOutcome {
    pub fn makespan(&self) -> f64 {
        self.clocks.iter().cloned().fold(0.0, f64::max)
    }
}

fn check_dst(env: &Envelope, ranks: usize) -> Result<(), TransportError> {
    if env.dst >= ranks {
        return Err(TransportError::NoSuchRank {
            rank: env.dst,
            ranks,
        });
    }
    Ok(())
}

/// Delivers one bulk-synchronous round, updating clocks and ledger.
///
/// Each rank's clock becomes the latest of its own clock and the clocks of the
/// ranks sending to it, plus the larger of its summed outgoing and summed
/// incoming non-local message costs (one port per direction).
pub fn exchange_round(
    posts: Vec<Option<Post>>,
    clocks: &mut [f64],
    ledger: &mut CostLedger,
    link: &LinkModel,
) -> Result<Vec<Vec<Envelope>>, TransportError> {
    let ranks = posts.len();
    let mut inbox: HashMap<(usize, usize, u64), Envelope> = HashMap::new();
    let mut waits: Vec<Vec<(usize, u64)>> = vec![Vec::new(); ranks];
    for (rank, post) in posts.into_iter().enumerate() {
        let Some(post) = post else { continue };
        for env in post.sends {
            check_dst(&env, ranks)?;
            let key = (env.src, env.dst, env.tag);
            if inbox.contains_key(&key) {
                return Err(TransportError::Duplicate {
                    src: env.src,
                    dst: env.dst,
                    tag: env.tag,
                });
            }
            inbox.insert(key, env);
        }
        waits[rank] = post.expected;
    }

    let mut out_cost = vec![0.0f64; ranks];
    let mut in_cost = vec![0.0f64; ranks];
    let mut ready = clocks.to_vec();
    let mut keys: Vec<_> = inbox.keys().copied().collect();
    keys.sort_unstable();
    for key in &keys {
        let env = &inbox[key];
        ledger.record_send(env, link);
        if env.is_local() {
            continue;
        }
        let c = link.cost(env.bytes());
        out_cost[env.src] += c;
        in_cost[env.dst] += c;
        ready[env.dst] = ready[env.dst].max(clocks[env.src]);
    }

    let mut out = vec![Vec::new(); ranks];
    for (rank, wanted) in waits.into_iter().enumerate() {
        for (src, tag) in wanted {
            match inbox.remove(&(src, rank, tag)) {
                Some(env) => out[rank].push(env),
                None => return Err(TransportError::NeverSent { src, rank, tag }),
            }
        }
    }
    if let Some((src, dst, tag)) = inbox.keys().min().copied() {
        return Err(TransportError::Unmatched { src, dst, tag });
    }
    for r in 0..ranks {
        clocks[r] = ready[r] + out_cost[r].max(in_cost[r]);
    }
    Ok(out)
}

/// Runs all programs to completion on the calling thread.
pub fn run_virtual<P: RankProgram>(
    programs: &mut [P],
    link: &LinkModel,
) -> Result<VirtualOutcome, P::Error> {
    link.check()?;
    let ranks = programs.len();
    let mut clocks = vec![0.0; ranks];
    let mut ledger = CostLedger::new(ranks);
    let mut done = vec![false; ranks];
    let mut rounds = 0;
    loop {
        let mut posts = Vec::with_capacity(ranks);
        for (r, p) in programs.iter_mut().enumerate() {
            if done[r] {
                posts.push(None);
                continue;
            }
            let post = p.advance()?;
            let dt = p.take_compute_seconds();
            clocks[r] += dt;
            ledger.ranks[r].modeled_compute_seconds += dt;
            if post.is_none() {
                done[r] = true;
            }
            posts.push(post);
        }
        if posts.iter().all(|p| p.is_none()) {
            break;
        }
        let active: Vec<bool> = posts.iter().map(|p| p.is_some()).collect();
        let recvd = exchange_round(posts, &mut clocks, &mut ledger, link)?;
        for (r, msgs) in recvd.into_iter().enumerate() {
            if active[r] {
                programs[r].deliver(msgs)?;
            }
        }
        rounds += 1;
    }
    Ok(VirtualOutcome {
        ledger,
        clocks,
        rounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallOptions {
    /// Hold every non-local message back for its modeled link cost.
    pub inject: bool,
    pub timeout: Duration,
}

impl Default for WallOptions {
    fn default() -> Self {
        WallOptions {
            inject: false,
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallOutcome {
    pub ledger: CostLedger,
    pub wall_seconds: f64,
    pub rank_seconds: Vec<f64>,
}

struct Wire {
    env: Envelope,
    deliver_at: Option<Instant>,
}

/// One rank's end of the wall-clock network.
pub struct WallEndpoint {
    rank: usize,
    peers: Vec<mpsc::Sender<Wire>>,
    inbox: mpsc::Receiver<Wire>,
    pending: BTreeMap<(usize, u64), Wire>,
    link: LinkModel,
    options: WallOptions,
    ledger: RankLedger,
}

/// Channels between `ranks` endpoints.
pub fn wall_network(ranks: usize, link: LinkModel, options: WallOptions) -> Vec<WallEndpoint> {
    let (txs, rxs): (Vec<_>, Vec<_>) = (0..ranks).map(|_| mpsc::channel::<Wire>()).unzip();
    rxs.into_iter()
        .enumerate()
        .map(|(rank, inbox)| WallEndpoint {
            rank,
            peers: txs.clone(),
            inbox,
            pending: BTreeMap::new(),
            link,
            options,
            ledger: RankLedger::default(),
        })
        .collect()
}

impl WallEndpoint {
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Sends `post.sends`, then blocks until every expected message has arrived.
    pub fn exchange(&mut self, post: Post) -> Result<Vec<Envelope>, TransportError> {
        let ranks = self.peers.len();
        let start = Instant::now();
        let mut queued = 0.0;
        for env in post.sends {
            check_dst(&env, ranks)?;
            let deliver_at = if self.options.inject && !env.is_local() {
                queued += self.link.cost(env.bytes());
                Some(start + Duration::from_secs_f64(queued))
            } else {
                None
            };
            if !env.is_local() {
                let r = &mut self.ledger;
                r.message_count += 1;
                r.bytes_sent += env.bytes();
                r.modeled_comm_seconds += self.link.cost(env.bytes());
                r.max_message_bytes = r.max_message_bytes.max(env.bytes());
            }
            let dst = env.dst;
            self.peers[dst]
                .send(Wire { env, deliver_at })
                .map_err(|_| TransportError::Disconnected(dst))?;
        }

        let deadline = Instant::now() + self.options.timeout;
        let mut latest: Option<Instant> = None;
        let mut out = Vec::with_capacity(post.expected.len());
        for (i, &(src, tag)) in post.expected.iter().enumerate() {
            let wire = loop {
                if let Some(w) = self.pending.remove(&(src, tag)) {
                    break w;
                }
                let left = deadline.saturating_duration_since(Instant::now());
                match self.inbox.recv_timeout(left) {
                    Ok(w) => {
                        let key = (w.env.src, w.env.tag);
                        if key == (src, tag) {
                            break w;
                        }
                        if self.pending.insert(key, w).is_some() {
                            return Err(TransportError::Duplicate {
                                src: key.0,
                                dst: self.rank,
                                tag: key.1,
                            });
                        }
                    }
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        return Err(TransportError::Deadlock {
                            rank: self.rank,
                            seconds: self.options.timeout.as_secs_f64(),
                            missing: post.expected.len() - i,
                        })
                    }
                    Err(mpsc::RecvTimeoutError::Disconnected) => {
                        return Err(TransportError::Disconnected(self.rank))
                    }
                }
            };
            if let Some(t) = wire.deliver_at {
                latest = Some(latest.map_or(t, |l| l.max(t)));
            }
            out.push(wire.env);
        }
        if let Some(t) = latest {
            let now = Instant::now();
            if t > now {
                std::thread::sleep(t - now);
            }
        }
        Ok(out)
    }

    pub fn into_ledger(self) -> RankLedger {
        self.ledger
    }
}

/// Runs every program on its own thread.
pub fn run_wall<P: RankProgram>(
    programs: &mut [P],
    link: &LinkModel,
    options: WallOptions,
) -> Result<WallOutcome, P::Error> {
    link.check()?;
    let endpoints = wall_network(programs.len(), *link, options);
    let start = Instant::now();
    let results: Vec<Result<(RankLedger, f64), P::Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = programs
            .iter_mut()
            .zip(endpoints)
            .map(|(p, mut ep)| {
                s.spawn(move || {
                    let mut compute = 0.0;
                    loop {
                        let post = p.advance()?;
                        compute += p.take_compute_seconds();
                        let Some(post) = post else { break };
                        let recvs = ep.exchange(post)?;
                        p.deliver(recvs)?;
                    }
                    let mut ledger = ep.into_ledger();
                    ledger.modeled_compute_seconds = compute;
                    Ok((ledger, start.elapsed().as_secs_f64()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank thread panicked"))
            .collect()
    });
    let wall_seconds = start.elapsed().as_secs_f64();
    let mut ledger = CostLedger::new(programs.len());
    let mut rank_seconds = Vec::with_capacity(programs.len());
    for (r, res) in results.into_iter().enumerate() {
        let (l, t) = res?;
        ledger.ranks[r] = l;
        rank_seconds.push(t);
    }
    Ok(WallOutcome {
        ledger,
        wall_seconds,
        rank_seconds,
    })
}

/// Communication pattern of a standard and a swept run of the same problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommProfile {
    pub ranks: usize,
    /// Sub-step levels the standard run advances.
    pub standard_levels: usize,
    /// Sub-step levels the swept run advances (its flat level).
    pub swept_levels: usize,
    /// Communication events in the swept run.
    pub shifts: usize,
    /// Bytes in one standard halo message.
    pub halo_bytes: u64,
    /// Bytes in one swept shift message.
    pub shift_bytes: u64,
}

impl CommProfile {
    /// Cost of one standard exchange: two halo messages through one port.
    pub fn halo_cost(&self, link: &LinkModel) -> f64 {
        if self.ranks <= 1 {
            0.0
        } else {
            2.0 * link.cost(self.halo_bytes)
        }
    }

    pub fn shift_cost(&self, link: &LinkModel) -> f64 {
        if self.ranks <= 1 {
            0.0
        } else {
            link.cost(self.shift_bytes)
        }
    }

    pub fn standard_seconds(&self, link: &LinkModel, tau: f64) -> f64 {
        self.standard_levels as f64 * (tau + self.halo_cost(link))
    }

    pub fn swept_seconds(&self, link: &LinkModel, tau: f64) -> f64 {
        self.swept_levels as f64 * tau + self.shifts as f64 * self.shift_cost(link)
    }

    /// Standard to swept message-count ratio, per rank.
    pub fn message_ratio(&self) -> f64 {
        2.0 * self.standard_levels as f64 / self.shifts as f64
    }
}

/// Predicted speedup `M (tau + lambda) / (M tau + (m + 1) lambda')`, where
/// `tau` is the compute time of one level on the slowest rank, `lambda` one
/// halo exchange and `lambda'` one shift exchange.
pub fn predict_speedup(profile: &CommProfile, link: &LinkModel, tau: f64) -> f64 {
    let sw = profile.swept_seconds(link, tau);
    if sw <= 0.0 {
        return 1.0;
    }
    profile.standard_seconds(link, tau) / sw
}

/// Latency above which the swept run is predicted to be faster, under the
/// same costs as [`predict_speedup`].
///
/// `shift_overhead` is a fixed local cost charged to every swept
/// communication event on top of the link cost. `None` if swept never wins
/// (no fewer messages per rank) and `Some(0.0)` if it always does.
pub fn crossover_latency(
    profile: &CommProfile,
    bandwidth: f64,
    tau: f64,
    shift_overhead: f64,
) -> Option<f64> {
    let m_std = profile.standard_levels as f64;
    let events = profile.shifts as f64;
    // Two halo messages per standard level against one shift per event.
    if 2.0 * m_std <= events {
        return None;
    }
    let extra = profile.swept_levels as f64 * tau - m_std * tau
        + events * (shift_overhead + profile.shift_bytes as f64 / bandwidth)
        - 2.0 * m_std * profile.halo_bytes as f64 / bandwidth;
    Some((extra / (2.0 * m_std - events)).max(0.0))
}
