//! A materialized stage of a Bourgain-Delbaen space: an append-only node
//! registry plus the memoized coordinate recursion e*_g = c*_g + d*_g.
//!
//! Levels are astronomically large, so the registry holds only nodes that
//! were explicitly constructed; legality is a predicate, never an
//! enumeration. Completeness up to a small rank (relative to a declared node
//! menu) is a flag set by the enumerator.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::RwLock;

use num::{BigRational, BigUint, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{AlphaAverage, AvgKind, Certificate, GammaNode, NodeId, RankInterval};
use crate::nthreshold::{n_bound, NPolicy, NSource};
use crate::rational::{rat_one, rat_zero};
use crate::schedule::WeightSchedule;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceTag {
    Bmt,
    Xnr,
    Quotient(String),
    Generic,
}

#[derive(Debug)]
struct RegEntry {
    node: GammaNode,
    age: u64,
    /// position in global registration order
    seq: usize,
}

#[derive(Debug)]
pub struct SpaceStage {
    pub tag: SpaceTag,
    pub schedule: WeightSchedule,
    pub npolicy: NPolicy,
    nodes: HashMap<NodeId, RegEntry>,
    order: Vec<NodeId>,
    /// Set by the enumerator when every node admitted by its menu is present
    /// up to this rank; horizon bounds are two-sided only relative to it.
    pub complete_upto: Option<u32>,
    coord_cache: RwLock<HashMap<(NodeId, NodeId), BigRational>>,
}

impl SpaceStage {
    pub fn new(tag: SpaceTag, schedule: WeightSchedule, npolicy: NPolicy) -> Self {
        SpaceStage {
            tag,
            schedule,
            npolicy,
            nodes: HashMap::new(),
            order: Vec::new(),
            complete_upto: None,
            coord_cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &NodeId) -> Result<&GammaNode> {
        self.nodes
            .get(id)
            .map(|e| &e.node)
            .ok_or_else(|| Error::Unregistered(id.short()))
    }

    pub fn rank(&self, id: &NodeId) -> Result<u32> {
        Ok(self.node(id)?.rank())
    }

    pub fn age(&self, id: &NodeId) -> Result<u64> {
        self.nodes
            .get(id)
            .map(|e| e.age)
            .ok_or_else(|| Error::Unregistered(id.short()))
    }

    pub fn weight_index(&self, id: &NodeId) -> Result<Option<u32>> {
        Ok(self.node(id)?.weight_index())
    }

    /// we(g) = 1/m_j, None for the base node.
    pub fn weight(&self, id: &NodeId) -> Result<Option<BigRational>> {
        Ok(self.node(id)?.weight_index().map(|j| self.schedule.weight(j)))
    }

    /// Ids in registration order (deterministic across runs).
    pub fn ids(&self) -> impl Iterator<Item = &NodeId> {
        self.order.iter()
    }

    /// Ids of rank <= q in registration order.
    pub fn ids_upto(&self, q: u32) -> Vec<NodeId> {
        self.order
            .iter()
            .filter(|id| self.nodes[*id].node.rank() <= q)
            .copied()
            .collect()
    }

    pub fn ids_at_rank(&self, q: u32) -> Vec<NodeId> {
        self.order
            .iter()
            .filter(|id| self.nodes[*id].node.rank() == q)
            .copied()
            .collect()
    }

    pub fn max_rank(&self) -> u32 {
        self.order
            .iter()
            .map(|id| self.nodes[id].node.rank())
            .max()
            .unwrap_or(0)
    }

    fn count_below(&self, rank: u32) -> u64 {
        self.order
            .iter()
            .filter(|id| self.nodes[*id].node.rank() < rank)
            .count() as u64
    }

    /// The threshold N_r as the given source sees it on this stage.
    pub fn nbound(&self, source: &NSource, rank: u32) -> crate::nthreshold::NBound {
        n_bound(source, rank, self.count_below(rank))
    }

    /// The predecessor chain xi_1, ..., xi_a = g (ranks increasing).
    pub fn chain(&self, id: &NodeId) -> Result<Vec<NodeId>> {
        let mut chain = vec![*id];
        let mut cur = *id;
        while let Some(p) = self.node(&cur)?.pred() {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Structural legality for the mixed-Tsirelson base space. Returns the
    /// violated constraint by name; `Ok` means the node may be registered on
    /// a bmt-tagged stage.
    pub fn check_legal_bmt(&self, node: &GammaNode) -> Result<()> {
        match node {
            GammaNode::Base => Ok(()),
            GammaNode::AgeOne { rank, weight_index, avg } => {
                if *rank < 2 {
                    return Err(Error::IllegalNode("age-one node needs rank >= 2".into()));
                }
                let q = rank - 1;
                if *weight_index < 1 || *weight_index > *rank {
                    return Err(Error::IllegalNode(format!(
                        "weight index {weight_index} outside [1,{rank}]"
                    )));
                }
                self.check_avg(avg, 0, q, *rank)
            }
            GammaNode::Succ { rank, weight_index, pred, avg } => {
                if *rank < 4 {
                    return Err(Error::IllegalNode(
                        "successor nodes first appear at rank 4".into(),
                    ));
                }
                let q = rank - 1;
                let pentry = self
                    .nodes
                    .get(pred)
                    .ok_or_else(|| Error::Unregistered(pred.short()))?;
                let p = pentry.node.rank();
                if p > q - 1 {
                    return Err(Error::IllegalNode(format!(
                        "pred rank {p} exceeds {} (needs a skipped level)",
                        q - 1
                    )));
                }
                match pentry.node.weight_index() {
                    Some(j) if j == *weight_index => {}
                    Some(j) => {
                        return Err(Error::IllegalNode(format!(
                            "weight mismatch with pred: {weight_index} vs {j}"
                        )))
                    }
                    None => {
                        return Err(Error::IllegalNode("pred carries no weight".into()));
                    }
                }
                let nj = self.schedule.n(*weight_index)?;
                if BigUint::from(pentry.age) >= nj {
                    return Err(Error::IllegalNode(format!(
                        "age bound: ag(pred) = {} must stay below n_{} = {}",
                        pentry.age, weight_index, nj
                    )));
                }
                self.check_avg(avg, p, q, *rank)
            }
        }
    }

    /// avg must lie in B_{p,q}: entries registered with ranks in (p,q],
    /// intervals inside (p,q], and size dividing the denominator threshold
    /// N_{rank}.
    fn check_avg(&self, avg: &AlphaAverage, p: u32, q: u32, rank: u32) -> Result<()> {
        avg.check_structure()?;
        let (wp, wq) = avg.window;
        if wp < p || wq > q {
            return Err(Error::IllegalNode(format!(
                "declared window ({wp},{wq}] escapes B_({p},{q}]"
            )));
        }
        let mut prev_rank: Option<u32> = None;
        let mut prev_weight: Option<u32> = None;
        for e in &avg.entries {
            let ent = self
                .nodes
                .get(&e.node)
                .ok_or_else(|| Error::Unregistered(e.node.short()))?;
            let er = ent.node.rank();
            if er <= wp || er > wq {
                return Err(Error::IllegalNode(format!(
                    "entry rank {er} outside window ({wp},{wq}]"
                )));
            }
            match avg.kind {
                AvgKind::Basic => {
                    if e.interval != RankInterval::point(er) {
                        return Err(Error::IllegalNode(format!(
                            "basic entry must restrict to its own rank, got {}",
                            e.interval
                        )));
                    }
                    if let Some(pr) = prev_rank {
                        if er <= pr {
                            return Err(Error::IllegalNode(
                                "basic entry ranks must strictly increase".into(),
                            ));
                        }
                    }
                    prev_rank = Some(er);
                }
                _ => {
                    if er < e.interval.lo {
                        return Err(Error::IllegalNode(format!(
                            "entry rank {er} below its interval {}",
                            e.interval
                        )));
                    }
                    if matches!(avg.kind, AvgKind::IC | AvgKind::CO | AvgKind::IR) {
                        let j = ent.node.weight_index().ok_or_else(|| {
                            Error::IllegalNode("weighted kinds need weighted entries".into())
                        })?;
                        if let Some(pj) = prev_weight {
                            if j <= pj {
                                return Err(Error::IllegalNode(
                                    "entry weights must strictly decrease".into(),
                                ));
                            }
                        }
                        prev_weight = Some(j);
                    }
                }
            }
        }
        let bound = self.nbound(&self.npolicy.denom, rank);
        match bound.divisible_by(&avg.size) {
            Some(true) => Ok(()),
            Some(false) => Err(Error::IllegalNode(format!(
                "size {} does not divide the denominator threshold N_{rank}",
                avg.size
            ))),
            None => Err(Error::IllegalNode(format!(
                "size {} cannot be certified against N_{rank}",
                avg.size
            ))),
        }
    }

    /// Extra constraints registered nodes must satisfy on an xnr-tagged
    /// stage and that are checkable without the coding registry: the average
    /// carries a classification with evidence, and successor sizes reach the
    /// growth threshold N_{ra(pred)}. Certificate contents are verified by
    /// the conditional-structure module.
    fn check_xnr_structural(&self, node: &GammaNode) -> Result<()> {
        let Some(avg) = node.avg() else { return Ok(()) };
        if avg.kind == AvgKind::Plain {
            return Err(Error::IllegalNode(
                "xnr stage requires a classified average (Basic/IC/CO/IR)".into(),
            ));
        }
        match (&avg.certificate, avg.kind) {
            (Some(c), k) if c.kind() == k => {}
            (Some(_), _) => {
                return Err(Error::IllegalNode("certificate kind mismatch".into()));
            }
            (None, AvgKind::Basic) => {}
            (None, _) => {
                return Err(Error::IllegalNode("missing classification certificate".into()));
            }
        }
        if let GammaNode::Succ { pred, .. } = node {
            let p = self.rank(pred)?;
            let bound = self.nbound(&self.npolicy.growth, p);
            if !bound.met_by(&avg.size) {
                return Err(Error::IllegalNode(format!(
                    "successor size {} below growth threshold N_{p}",
                    avg.size
                )));
            }
        }
        Ok(())
    }

    /// Registers a node; idempotent (same canonical content, same id).
    pub fn register(&mut self, node: GammaNode) -> Result<NodeId> {
        let id = node.id();
        if self.nodes.contains_key(&id) {
            return Ok(id);
        }
        self.check_legal_bmt(&node)?;
        if self.tag == SpaceTag::Xnr {
            self.check_xnr_structural(&node)?;
        }
        let age = match &node {
            GammaNode::Base => 1,
            GammaNode::AgeOne { .. } => 1,
            GammaNode::Succ { pred, .. } => self.nodes[pred].age + 1,
        };
        let seq = self.order.len();
        self.order.push(id);
        self.nodes.insert(id, RegEntry { node, age, seq });
        Ok(id)
    }

    pub fn register_base(&mut self) -> NodeId {
        self.register(GammaNode::Base).expect("base node is always legal")
    }

    /// The node (q, 1/m_1, basic average on the base coordinate) that every
    /// level contains.
    pub fn canonical_age_one(&self, rank: u32) -> GammaNode {
        GammaNode::AgeOne {
            rank,
            weight_index: 1,
            avg: AlphaAverage {
                size: BigUint::from(1u32),
                entries: vec![crate::node::AvgEntry {
                    sign: 1,
                    node: GammaNode::Base.id(),
                    interval: RankInterval::point(1),
                }],
                window: (0, rank - 1),
                kind: AvgKind::Basic,
                certificate: Some(Certificate::Basic),
            },
        }
    }

    /// e*_g(d_x), memoized. The recursion: e*_g = c*_g + d*_g with c*_g
    /// acting strictly below rank(g), so the matrix is triangular with unit
    /// diagonal in rank order.
    pub fn coordinate(&self, gamma: &NodeId, xi: &NodeId) -> Result<BigRational> {
        if !self.contains(gamma) {
            return Err(Error::Unregistered(gamma.short()));
        }
        if !self.contains(xi) {
            return Err(Error::Unregistered(xi.short()));
        }
        Ok(self.coord_inner(gamma, xi))
    }

    fn coord_inner(&self, gamma: &NodeId, xi: &NodeId) -> BigRational {
        if gamma == xi {
            return rat_one();
        }
        let (rg, rx) = (self.nodes[gamma].node.rank(), self.nodes[xi].node.rank());
        if rx >= rg {
            return rat_zero();
        }
        if let Some(v) = self.coord_cache.read().unwrap().get(&(*gamma, *xi)) {
            return v.clone();
        }
        let v = self.c_star_on(gamma, xi);
        self.coord_cache
            .write()
            .unwrap()
            .insert((*gamma, *xi), v.clone());
        v
    }

    /// c*_g(d_x).
    pub fn c_star_on(&self, gamma: &NodeId, xi: &NodeId) -> BigRational {
        match &self.nodes[gamma].node {
            GammaNode::Base => rat_zero(),
            GammaNode::AgeOne { weight_index, avg, .. } => {
                self.schedule.weight(*weight_index) * self.avg_on(avg, xi)
            }
            GammaNode::Succ { weight_index, pred, avg, .. } => {
                self.coord_inner(pred, xi)
                    + self.schedule.weight(*weight_index) * self.avg_on(avg, xi)
            }
        }
    }

    /// b*(d_x) for an average over registered entries.
    pub fn avg_on(&self, avg: &AlphaAverage, xi: &NodeId) -> BigRational {
        let rx = self.nodes[xi].node.rank();
        let mut sum = rat_zero();
        for e in &avg.entries {
            if e.interval.contains(rx) {
                let c = self.coord_inner(&e.node, xi);
                if e.sign >= 0 {
                    sum += c;
                } else {
                    sum -= c;
                }
            }
        }
        sum / crate::rational::rat_from_biguint(&avg.size)
    }

    /// Drops every memoized coordinate (the recursion is deterministic, so
    /// recomputation must reproduce the cache bit for bit).
    pub fn clear_coord_cache(&self) {
        self.coord_cache.write().unwrap().clear();
    }

    pub fn cache_len(&self) -> usize {
        self.coord_cache.read().unwrap().len()
    }

    /// Resolves a (possibly shortened) hex id against the registry.
    pub fn resolve(&self, prefix: &str) -> Result<NodeId> {
        let matches: Vec<NodeId> = self
            .order
            .iter()
            .filter(|id| id.hex().starts_with(prefix))
            .copied()
            .collect();
        match matches.len() {
            1 => Ok(matches[0]),
            0 => Err(Error::Unregistered(prefix.into())),
            n => Err(Error::Parse(format!("id prefix {prefix:?} is ambiguous ({n} matches)"))),
        }
    }

    /// Line-delimited dump in registration order; one canonical record per
    /// node. Reloading re-registers and reproduces identical ids.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        for id in &self.order {
            let rec = serde_json::to_string(&self.nodes[id].node)
                .map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(w, "{rec}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(&mut self, r: R) -> Result<Vec<NodeId>> {
        let mut ids = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let node: GammaNode =
                serde_json::from_str(&line).map_err(|e| Error::Parse(e.to_string()))?;
            ids.push(self.register(node)?);
        }
        Ok(ids)
    }

    /// Registration order of a node (stable tiebreak for deterministic
    /// reports).
    pub fn seq(&self, id: &NodeId) -> Result<usize> {
        self.nodes
            .get(id)
            .map(|e| e.seq)
            .ok_or_else(|| Error::Unregistered(id.short()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::node::AvgEntry;
    use crate::rational::rat_frac;
    use crate::schedule::{schedule_t1, ScheduleMode};

    fn bmt_stage() -> SpaceStage {
        SpaceStage::new(SpaceTag::Bmt, schedule_t1(ScheduleMode::Toy), NPolicy::toy())
    }

    #[test]
    fn base_node_is_unique_rank_one() {
        let mut st = bmt_stage();
        let a = st.register_base();
        let b = st.register_base();
        assert_eq!(a, b);
        assert_eq!(st.len(), 1);
        assert_eq!(st.rank(&a).unwrap(), 1);
    }

    #[test]
    fn canonical_age_one_is_legal_everywhere() {
        let mut st = bmt_stage();
        st.register_base();
        for q in 2..=6 {
            let id = st.register(st.canonical_age_one(q)).unwrap();
            assert_eq!(st.age(&id).unwrap(), 1);
            assert_eq!(st.weight_index(&id).unwrap(), Some(1));
        }
    }

    #[test]
    fn coordinate_examples() {
        let mut st = bmt_stage();
        let base = st.register_base();
        let g = st.register(st.canonical_age_one(2)).unwrap();
        // biorthogonality on the diagonal
        assert_eq!(st.coordinate(&g, &g).unwrap(), rat_frac(1, 1));
        // one-step hand evaluation: e*_g(d_0) = (1/m_1) * 1 = 1/8
        assert_eq!(st.coordinate(&g, &base).unwrap(), rat_frac(1, 8));
        // higher rank is annihilated
        assert_eq!(st.coordinate(&base, &g).unwrap(), rat_frac(0, 1));
    }

    #[test]
    fn succ_age_bound_enforced() {
        // n_1 = 2 with a tiny list schedule would violate n >= m; instead use
        // a chain long enough to exhaust a small n_j on a custom schedule.
        let ws = crate::schedule::WeightSchedule::new(
            8,
            crate::schedule::NRule::List { values: vec![8, 64] },
            ScheduleMode::Toy,
            2,
        )
        .unwrap();
        let mut st = SpaceStage::new(SpaceTag::Bmt, ws, NPolicy::toy());
        let base = st.register_base();
        let mut pred = st.register(st.canonical_age_one(2)).unwrap();
        let mut rank = 4;
        // ages 2..8 are fine, the 9th must be rejected (n_1 = 8)
        for expect_age in 2..=9u64 {
            let avg = AlphaAverage {
                size: BigUint::from(1u32),
                entries: vec![AvgEntry {
                    sign: 1,
                    node: base,
                    interval: RankInterval::point(1),
                }],
                window: (0, rank - 1),
                kind: AvgKind::Basic,
                certificate: None,
            };
            // window must sit inside (p, q]: rebuild with a legal window
            let p = st.rank(&pred).unwrap();
            let mid = st
                .register(st.canonical_age_one(p + 1))
                .unwrap();
            let avg = AlphaAverage {
                entries: vec![AvgEntry {
                    sign: 1,
                    node: mid,
                    interval: RankInterval::point(p + 1),
                }],
                window: (p, rank - 1),
                ..avg
            };
            let node = GammaNode::Succ { rank, weight_index: 1, pred, avg };
            let res = st.register(node);
            if expect_age <= 8 {
                let id = res.unwrap();
                assert_eq!(st.age(&id).unwrap(), expect_age);
                pred = id;
                rank += 2;
            } else {
                let err = res.unwrap_err().to_string();
                assert!(err.contains("age bound"), "unexpected error: {err}");
            }
        }
    }

    #[test]
    fn succ_window_violation_named() {
        let mut st = bmt_stage();
        let base = st.register_base();
        let pred = st.register(st.canonical_age_one(2)).unwrap();
        // avg interval [1,1] meets [1,p] with p = 2: must be rejected
        let avg = AlphaAverage {
            size: BigUint::from(1u32),
            entries: vec![AvgEntry { sign: 1, node: base, interval: RankInterval::point(1) }],
            window: (2, 3),
            kind: AvgKind::Basic,
            certificate: None,
        };
        let node = GammaNode::Succ { rank: 4, weight_index: 1, pred, avg };
        let err = st.register(node).unwrap_err().to_string();
        assert!(err.contains("intervals"), "got: {err}");
    }

    #[test]
    fn dump_load_reproduces_ids() {
        let mut st = bmt_stage();
        st.register_base();
        for q in 2..=5 {
            st.register(st.canonical_age_one(q)).unwrap();
        }
        let mut buf = Vec::new();
        st.dump(&mut buf).unwrap();
        let mut st2 = bmt_stage();
        let ids = st2.load(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(ids, st.ids().copied().collect::<Vec<_>>());
    }

    #[test]
    fn cache_recomputation_is_identical() {
        let mut st = bmt_stage();
        let base = st.register_base();
        let g2 = st.register(st.canonical_age_one(2)).unwrap();
        let g3 = st.register(st.canonical_age_one(3)).unwrap();
        let mut vals = Vec::new();
        for g in [&base, &g2, &g3] {
            for x in [&base, &g2, &g3] {
                vals.push(st.coordinate(g, x).unwrap());
            }
        }
        st.clear_coord_cache();
        let mut again = Vec::new();
        for g in [&base, &g2, &g3] {
            for x in [&base, &g2, &g3] {
                again.push(st.coordinate(g, x).unwrap());
            }
        }
        assert_eq!(vals, again);
    }
}
