//! Conflict-structure topologies.
//!
//! A [`Topology`] is the simulator's ground truth: a set of links plus three
//! relations over ordered link pairs.
//!
//! * `sense(a, b)`: the transmitter of `a` carrier-senses an ongoing
//!   transmission of `b`.
//! * `interferes(a, b)`: a transmission on `a` corrupts a concurrent reception
//!   on `b`. This also means `a`'s transmitter hears `b`'s CTS.
//! * `captures(a, b)`: when `a` and `b` overlap at `a`'s receiver, `a`'s frame
//!   survives.
//!
//! Geometric generators ([`make_grid`], [`make_random`]) compile node
//! placements into these relations with a disk model.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Default link rate in Mb/s.
pub const DEFAULT_CAPACITY_MBPS: f64 = 6.0;

/// Disk radius shared by sensing and interference in the geometric generators.
pub const DEFAULT_RANGE_M: f64 = 280.0;

/// Node spacing of the square grid generator.
pub const DEFAULT_GRID_SPACING_M: f64 = 250.0;

/// Index of the central link in [`make_fim`] topologies.
pub const FIM_CENTER: usize = 1;

pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub label: String,
    pub capacity_mbps: f64,
    /// (transmitter node, receiver node) for geometric topologies.
    pub endpoints: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    name: String,
    links: Vec<Link>,
    sense: Vec<Vec<bool>>,
    interfere: Vec<Vec<bool>>,
    capture: Vec<Vec<bool>>,
    nodes: Vec<Point>,
}

impl Topology {
    /// Builds a topology from explicit relation lists and validates it.
    pub fn from_relations(
        name: impl Into<String>,
        capacities_mbps: &[f64],
        sense: &[(LinkId, LinkId)],
        interfere: &[(LinkId, LinkId)],
        capture: &[(LinkId, LinkId)],
    ) -> Result<Self> {
        let n = capacities_mbps.len();
        let mut topo = Self::empty(name, n);
        for (i, &c) in capacities_mbps.iter().enumerate() {
            topo.links[i].capacity_mbps = c;
        }
        let check = |what: &str, &(a, b): &(LinkId, LinkId)| -> Result<()> {
            if a >= n || b >= n {
                return Err(SimError::InvalidTopology(format!(
                    "{what} pair ({a}, {b}) references a link outside 0..{n}"
                )));
            }
            Ok(())
        };
        for p in sense {
            check("sense", p)?;
            topo.sense[p.0][p.1] = true;
        }
        for p in interfere {
            check("interfere", p)?;
            topo.interfere[p.0][p.1] = true;
        }
        for p in capture {
            check("capture", p)?;
            topo.capture[p.0][p.1] = true;
        }
        topo.validate()?;
        Ok(topo)
    }

    fn empty(name: impl Into<String>, n: usize) -> Self {
        Self {
            name: name.into(),
            links: (0..n)
                .map(|id| Link {
                    id,
                    label: (id + 1).to_string(),
                    capacity_mbps: DEFAULT_CAPACITY_MBPS,
                    endpoints: None,
                })
                .collect(),
            sense: vec![vec![false; n]; n],
            interfere: vec![vec![false; n]; n],
            capture: vec![vec![false; n]; n],
            nodes: Vec::new(),
        }
    }

    fn connect_both(&mut self, a: LinkId, b: LinkId) {
        self.sense[a][b] = true;
        self.sense[b][a] = true;
        self.interfere[a][b] = true;
        self.interfere[b][a] = true;
    }

    /// Checks the structural invariants every topology must satisfy.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(SimError::InvalidTopology("no links".into()));
        }
        for l in &self.links {
            if !(l.capacity_mbps > 0.0 && l.capacity_mbps.is_finite()) {
                return Err(SimError::InvalidTopology(format!(
                    "link {} has non-positive capacity {}",
                    l.id, l.capacity_mbps
                )));
            }
        }
        for a in 0..n {
            if self.sense[a][a] || self.interfere[a][a] || self.capture[a][a] {
                return Err(SimError::InvalidTopology(format!(
                    "link {a} relates to itself"
                )));
            }
            for b in 0..n {
                if self.capture[a][b] {
                    if !(self.interfere[a][b] || self.interfere[b][a]) {
                        return Err(SimError::InvalidTopology(format!(
                            "capture ({a}, {b}) is defined on a non-interfering pair"
                        )));
                    }
                    if self.capture[b][a] {
                        return Err(SimError::InvalidTopology(format!(
                            "capture between {a} and {b} goes both ways"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn capacity(&self, l: LinkId) -> f64 {
        self.links[l].capacity_mbps
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.capacity_mbps).collect()
    }

    pub fn set_capacity(&mut self, l: LinkId, mbps: f64) -> Result<()> {
        if !(mbps > 0.0 && mbps.is_finite()) {
            return Err(SimError::InvalidArgument(format!(
                "capacity must be positive, got {mbps}"
            )));
        }
        self.links[l].capacity_mbps = mbps;
        Ok(())
    }

    pub fn senses(&self, a: LinkId, b: LinkId) -> bool {
        self.sense[a][b]
    }

    pub fn interferes(&self, a: LinkId, b: LinkId) -> bool {
        self.interfere[a][b]
    }

    pub fn captures(&self, a: LinkId, b: LinkId) -> bool {
        self.capture[a][b]
    }

    /// Symmetric closure of sense ∪ interfere: the pair cannot be scheduled
    /// together without corrupting a receiver.
    pub fn conflicts(&self, a: LinkId, b: LinkId) -> bool {
        a != b
            && (self.sense[a][b] || self.sense[b][a] || self.interfere[a][b] || self.interfere[b][a])
    }

    pub fn conflict_degree(&self, l: LinkId) -> usize {
        (0..self.len()).filter(|&k| self.conflicts(l, k)).count()
    }

    /// True when some conflicting pair lacks mutual carrier sensing
    /// (hidden terminals, information asymmetry).
    pub fn has_imperfect_sensing(&self) -> bool {
        let n = self.len();
        (0..n).any(|a| {
            (0..n).any(|b| {
                a != b
                    && (self.interfere[a][b] || self.interfere[b][a])
                    && !(self.sense[a][b] && self.sense[b][a])
            })
        })
    }

    /// Sensed pairs that do not also interfere.
    pub fn sensed_without_interference(&self) -> Vec<(LinkId, LinkId)> {
        self.pairs(|a, b| self.sense[a][b] && !self.interfere[a][b])
    }

    pub fn sense_pairs(&self) -> Vec<(LinkId, LinkId)> {
        self.pairs(|a, b| self.sense[a][b])
    }

    pub fn interfere_pairs(&self) -> Vec<(LinkId, LinkId)> {
        self.pairs(|a, b| self.interfere[a][b])
    }

    pub fn capture_pairs(&self) -> Vec<(LinkId, LinkId)> {
        self.pairs(|a, b| self.capture[a][b])
    }

    fn pairs(&self, pred: impl Fn(usize, usize) -> bool) -> Vec<(LinkId, LinkId)> {
        let n = self.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && pred(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// Fully connected contention: every pair senses and interferes.
pub fn make_fc(n: usize) -> Result<Topology> {
    if n < 2 {
        return Err(SimError::InvalidArgument(format!(
            "FC needs at least 2 links, got {n}"
        )));
    }
    let mut t = Topology::empty(format!("fc{n}"), n);
    for a in 0..n {
        for b in a + 1..n {
            t.connect_both(a, b);
        }
    }
    Ok(t)
}

/// Flow-in-the-middle: a central link (index [`FIM_CENTER`]) conflicts with
/// every outer link; outer links are mutually independent.
pub fn make_fim(outer: usize) -> Result<Topology> {
    if outer < 2 {
        return Err(SimError::InvalidArgument(format!(
            "FIM needs at least 2 outer links, got {outer}"
        )));
    }
    let n = outer + 1;
    let mut t = Topology::empty(format!("fim{outer}"), n);
    for l in 0..n {
        if l != FIM_CENTER {
            t.connect_both(FIM_CENTER, l);
        }
    }
    t.links[FIM_CENTER].label = "c".into();
    let mut k = 1;
    for l in 0..n {
        if l != FIM_CENTER {
            t.links[l].label = k.to_string();
            k += 1;
        }
    }
    Ok(t)
}

/// Hidden terminals: no sensing, mutual interference.
pub fn make_ht() -> Topology {
    let mut t = Topology::empty("ht", 2);
    t.interfere[0][1] = true;
    t.interfere[1][0] = true;
    t
}

/// Information asymmetry: link 0 (advantaged) corrupts link 1's reception,
/// but not the other way round, and neither transmitter senses the other.
pub fn make_ia() -> Topology {
    let mut t = Topology::empty("ia", 2);
    t.interfere[0][1] = true;
    t.links[0].label = "adv".into();
    t.links[1].label = "dis".into();
    t
}

/// Hidden terminals where link 0's frames capture link 1's receiver.
pub fn make_ht_capture() -> Topology {
    let mut t = make_ht();
    t.name = "ht_capture".into();
    t.capture[0][1] = true;
    t.links[0].label = "strong".into();
    t.links[1].label = "weak".into();
    t
}

/// Nine flows: flows 1-6 form a fully connected group and flow 6 is also the
/// centre of a FIM with flows 7, 8 and 9.
pub fn make_mixed_fim_fc() -> Topology {
    let mut t = Topology::empty("mixed_fim_fc", 9);
    for a in 0..6 {
        for b in a + 1..6 {
            t.connect_both(a, b);
        }
    }
    for outer in 6..9 {
        t.connect_both(5, outer);
    }
    t
}

/// Ten flows: flows 1-6 form a fully connected group acting as the centre of
/// a FIM, and each of the outer flows 7-10 conflicts with every flow of the
/// group while the outer flows stay mutually independent.
///
/// The drawing this reproduces has no edge labels; this adjacency is our
/// reading of it.
pub fn make_fc_in_fim() -> Topology {
    let mut t = Topology::empty("fc_in_fim", 10);
    for a in 0..6 {
        for b in a + 1..6 {
            t.connect_both(a, b);
        }
    }
    for outer in 6..10 {
        for inner in 0..6 {
            t.connect_both(inner, outer);
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    pub side: usize,
    pub spacing_m: f64,
    pub range_m: f64,
    pub flows: usize,
    pub seed: u64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            side: 4,
            spacing_m: DEFAULT_GRID_SPACING_M,
            range_m: DEFAULT_RANGE_M,
            flows: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomParams {
    pub nodes: usize,
    pub area_m: f64,
    pub range_m: f64,
    pub flows: usize,
    pub seed: u64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            nodes: 30,
            area_m: 1000.0,
            range_m: DEFAULT_RANGE_M,
            flows: 12,
            seed: 0,
        }
    }
}

pub fn make_grid(p: &GridParams) -> Result<Topology> {
    if p.side < 2 {
        return Err(SimError::InvalidArgument(format!(
            "grid side must be >= 2, got {}",
            p.side
        )));
    }
    if !(p.spacing_m > 0.0 && p.range_m > 0.0) {
        return Err(SimError::InvalidArgument(
            "grid spacing and range must be positive".into(),
        ));
    }
    let nodes: Vec<Point> = (0..p.side * p.side)
        .map(|i| Point {
            x: (i % p.side) as f64 * p.spacing_m,
            y: (i / p.side) as f64 * p.spacing_m,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    from_placement(
        format!("grid{}x{}_s{}", p.side, p.side, p.seed),
        nodes,
        p.range_m,
        p.flows,
        &mut rng,
    )
}

pub fn make_random(p: &RandomParams) -> Result<Topology> {
    if p.nodes < 2 {
        return Err(SimError::InvalidArgument(format!(
            "random topology needs >= 2 nodes, got {}",
            p.nodes
        )));
    }
    if !(p.area_m > 0.0 && p.range_m > 0.0) {
        return Err(SimError::InvalidArgument(
            "area and range must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let nodes: Vec<Point> = (0..p.nodes)
        .map(|_| Point {
            x: rng.gen_range(0.0..=p.area_m),
            y: rng.gen_range(0.0..=p.area_m),
        })
        .collect();
    from_placement(
        format!("random{}_s{}", p.nodes, p.seed),
        nodes,
        p.range_m,
        p.flows,
        &mut rng,
    )
}

/// Picks `flows` single-hop flows with distinct transmitters and compiles the
/// placement into sense/interfere relations with a disk of radius `range_m`.
fn from_placement(
    name: String,
    nodes: Vec<Point>,
    range_m: f64,
    flows: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Topology> {
    if flows == 0 {
        return Err(SimError::InvalidArgument("flows must be >= 1".into()));
    }
    let in_range = |a: usize, b: usize| nodes[a].dist(&nodes[b]) <= range_m;
    let neighbors: Vec<Vec<usize>> = (0..nodes.len())
        .map(|a| (0..nodes.len()).filter(|&b| b != a && in_range(a, b)).collect())
        .collect();
    let mut senders: Vec<usize> = (0..nodes.len())
        .filter(|&a| !neighbors[a].is_empty())
        .collect();
    if senders.len() < flows {
        return Err(SimError::Generation(format!(
            "{name}: only {} of {} nodes have a neighbour within {range_m} m, \
             cannot place {flows} flows with distinct transmitters",
            senders.len(),
            nodes.len()
        )));
    }
    senders.shuffle(rng);
    senders.truncate(flows);
    let endpoints: Vec<(usize, usize)> = senders
        .into_iter()
        .map(|tx| {
            let rx = *neighbors[tx].choose(rng).expect("non-empty neighbour list");
            (tx, rx)
        })
        .collect();

    let mut t = Topology::empty(name, flows);
    for (l, &(tx, rx)) in endpoints.iter().enumerate() {
        t.links[l].endpoints = Some((tx, rx));
        t.links[l].label = format!("{tx}->{rx}");
    }
    for a in 0..flows {
        for b in 0..flows {
            if a == b {
                continue;
            }
            let (tx_a, _) = endpoints[a];
            let (tx_b, rx_b) = endpoints[b];
            t.sense[a][b] = in_range(tx_a, tx_b);
            t.interfere[a][b] = in_range(tx_a, rx_b);
        }
    }
    t.nodes = nodes;
    t.validate()?;
    Ok(t)
}
