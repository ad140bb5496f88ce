//! The elements of a stage: tagged tuples carrying rank, weight, age,
//! predecessor and defining average. Identity is a content hash of the
//! canonical serialization, so registration is idempotent and ids are
//! reproducible across runs.

use std::fmt;
use std::str::FromStr;

use num::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Content-hash identity of a node.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub [u8; 32]);

impl NodeId {
    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
    /// Shortened form for messages.
    pub fn short(&self) -> String {
        self.hex()[..12].to_string()
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({})", self.short())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

impl FromStr for NodeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 64 {
            return Err(Error::Parse(format!("node id must be 64 hex chars, got {}", s.len())));
        }
        let mut bytes = [0u8; 32];
        for i in 0..32 {
            bytes[i] = u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::Parse(format!("bad hex in node id {s:?}")))?;
        }
        Ok(NodeId(bytes))
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.hex())
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A closed interval of ranks, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RankInterval {
    pub lo: u32,
    pub hi: u32,
}

impl RankInterval {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo < 1 || lo > hi {
            return Err(Error::Parse(format!("bad interval [{lo},{hi}]")));
        }
        Ok(RankInterval { lo, hi })
    }
    pub fn point(r: u32) -> Self {
        RankInterval { lo: r, hi: r }
    }
    pub fn contains(&self, r: u32) -> bool {
        self.lo <= r && r <= self.hi
    }
    pub fn intersect(&self, other: &RankInterval) -> Option<RankInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(RankInterval { lo, hi })
    }
}

impl fmt::Display for RankInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Kind of an average: Plain has no conditional structure, the others carry
/// classification evidence (Basic structurally, IC/CO/IR via the coding tree).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AvgKind {
    Plain,
    Basic,
    IC,
    CO,
    IR,
}

impl fmt::Display for AvgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AvgKind::Plain => "Plain",
            AvgKind::Basic => "Basic",
            AvgKind::IC => "IC",
            AvgKind::CO => "CO",
            AvgKind::IR => "IR",
        };
        f.write_str(s)
    }
}

/// Evidence backing an IC/CO/IR classification. Comparable and irrelevant
/// certificates point into the coding registry by the canonical serialization
/// of the special sequence and the matched positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    Basic,
    Incomparable,
    Comparable { special: String, positions: Vec<usize> },
    Irrelevant { special: String, positions: Vec<usize> },
}

impl Certificate {
    pub fn kind(&self) -> AvgKind {
        match self {
            Certificate::Basic => AvgKind::Basic,
            Certificate::Incomparable => AvgKind::IC,
            Certificate::Comparable { .. } => AvgKind::CO,
            Certificate::Irrelevant { .. } => AvgKind::IR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvgEntry {
    /// +1 or -1
    pub sign: i8,
    pub node: NodeId,
    pub interval: RankInterval,
}

impl AvgEntry {
    pub fn new(sign: i8, node: NodeId, interval: RankInterval) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidAverage(format!("sign must be +-1, got {sign}")));
        }
        Ok(AvgEntry { sign, node, interval })
    }
}

/// An average b* = (1/n) sum_i eps_i e*_{gamma_i}.P_{E_i} with size n,
/// window (p, q] and classification evidence. The certificate is carried for
/// verification; identity hashes only the functional content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaAverage {
    pub size: BigUint,
    pub entries: Vec<AvgEntry>,
    /// b* lies in B_{p,q}; window = (p, q)
    pub window: (u32, u32),
    pub kind: AvgKind,
    pub certificate: Option<Certificate>,
}

impl AlphaAverage {
    pub fn d(&self) -> usize {
        self.entries.len()
    }

    /// Structural constraints common to every average: 1 <= d <= n, entries
    /// carry successive intervals lying strictly inside the window.
    pub fn check_structure(&self) -> Result<()> {
        let (p, q) = self.window;
        if p >= q {
            return Err(Error::InvalidAverage(format!("empty window ({p},{q}]")));
        }
        let d = self.d();
        if d == 0 {
            return Err(Error::InvalidAverage("average has no entries".into()));
        }
        if BigUint::from(d) > self.size {
            return Err(Error::InvalidAverage(format!("d = {d} exceeds size n = {}", self.size)));
        }
        let mut prev_hi = 0u32;
        for e in &self.entries {
            if e.sign != 1 && e.sign != -1 {
                return Err(Error::InvalidAverage("sign must be +-1".into()));
            }
            if e.interval.lo <= prev_hi {
                return Err(Error::InvalidAverage(format!(
                    "intervals not successive at {}",
                    e.interval
                )));
            }
            prev_hi = e.interval.hi;
        }
        let lo = self.entries.first().unwrap().interval.lo;
        let hi = self.entries.last().unwrap().interval.hi;
        if lo <= p || hi > q {
            return Err(Error::InvalidAverage(format!(
                "intervals [{lo},{hi}] escape window ({p},{q}]"
            )));
        }
        Ok(())
    }

    /// Canonical serialization of the functional content (no kind, no
    /// certificate: those are classifications of the same functional).
    pub fn canonical(&self) -> String {
        let mut s = format!("n={};w={},{};e=", self.size, self.window.0, self.window.1);
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            s.push(if e.sign >= 0 { '+' } else { '-' });
            s.push_str(&e.node.hex());
            s.push_str(&format!("@{},{}", e.interval.lo, e.interval.hi));
        }
        s
    }

    /// Restriction b*.P_E: intersect every entry interval with E and drop the
    /// entries that die. Returns None if nothing survives.
    pub fn restrict(&self, e: &RankInterval) -> Option<AlphaAverage> {
        let entries: Vec<AvgEntry> = self
            .entries
            .iter()
            .filter_map(|a| {
                a.interval
                    .intersect(e)
                    .map(|iv| AvgEntry { sign: a.sign, node: a.node, interval: iv })
            })
            .collect();
        if entries.is_empty() {
            return None;
        }
        Some(AlphaAverage {
            size: self.size.clone(),
            entries,
            window: self.window,
            kind: self.kind,
            certificate: self.certificate.clone(),
        })
    }
}

/// An element of a stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaNode {
    /// the unique rank-1 node
    Base,
    /// (q+1, 1/m_j, b*): age one
    AgeOne { rank: u32, weight_index: u32, avg: AlphaAverage },
    /// (q+1, xi, 1/m_j, b*): extends the chain through pred
    Succ { rank: u32, weight_index: u32, pred: NodeId, avg: AlphaAverage },
}

impl GammaNode {
    pub fn rank(&self) -> u32 {
        match self {
            GammaNode::Base => 1,
            GammaNode::AgeOne { rank, .. } | GammaNode::Succ { rank, .. } => *rank,
        }
    }

    pub fn weight_index(&self) -> Option<u32> {
        match self {
            GammaNode::Base => None,
            GammaNode::AgeOne { weight_index, .. } | GammaNode::Succ { weight_index, .. } => {
                Some(*weight_index)
            }
        }
    }

    pub fn avg(&self) -> Option<&AlphaAverage> {
        match self {
            GammaNode::Base => None,
            GammaNode::AgeOne { avg, .. } | GammaNode::Succ { avg, .. } => Some(avg),
        }
    }

    pub fn pred(&self) -> Option<NodeId> {
        match self {
            GammaNode::Succ { pred, .. } => Some(*pred),
            _ => None,
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            GammaNode::Base => "B".into(),
            GammaNode::AgeOne { rank, weight_index, avg } => {
                format!("A|r={rank}|j={weight_index}|{}", avg.canonical())
            }
            GammaNode::Succ { rank, weight_index, pred, avg } => {
                format!("S|r={rank}|j={weight_index}|p={}|{}", pred.hex(), avg.canonical())
            }
        }
    }

    pub fn id(&self) -> NodeId {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        NodeId(h.finalize().into())
    }
}
