//! Finitely supported exact-rational vectors over the basis (d_g) and dual
//! functionals built from the atoms e*_g.P_E (d*_g is the singleton-interval
//! case, kept in that canonical form).

use std::collections::BTreeMap;

use num::{BigRational, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{NodeId, RankInterval};
use crate::rational::{rat_parse, rat_to_string, rat_zero};
use crate::stage::SpaceStage;

/// A finite linear combination of basis vectors d_g; coefficients are kept
/// nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockVector {
    coeffs: BTreeMap<NodeId, BigRational>,
}

impl BlockVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(id: NodeId) -> Self {
        let mut v = Self::default();
        v.set(id, BigRational::from_integer(1.into()));
        v
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn set(&mut self, id: NodeId, c: BigRational) {
        if c.is_zero() {
            self.coeffs.remove(&id);
        } else {
            self.coeffs.insert(id, c);
        }
    }

    pub fn add_term(&mut self, id: NodeId, c: &BigRational) {
        let cur = self.coeffs.get(&id).cloned().unwrap_or_else(rat_zero);
        self.set(id, cur + c);
    }

    pub fn coeff(&self, id: &NodeId) -> BigRational {
        self.coeffs.get(id).cloned().unwrap_or_else(rat_zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NodeId, &BigRational)> {
        self.coeffs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &NodeId> {
        self.coeffs.keys()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self, c: &BigRational) -> BlockVector {
        if c.is_zero() {
            return BlockVector::zero();
        }
        let mut out = BlockVector::default();
        for (id, v) in &self.coeffs {
            out.coeffs.insert(*id, v * c);
        }
        out
    }

    pub fn add(&self, other: &BlockVector) -> BlockVector {
        let mut out = self.clone();
        for (id, c) in &other.coeffs {
            out.add_term(*id, c);
        }
        out
    }

    pub fn sub(&self, other: &BlockVector) -> BlockVector {
        self.add(&other.scale(&BigRational::from_integer((-1).into())))
    }

    /// supp x as ranks, sorted ascending (needs the stage for rank lookup).
    pub fn support_ranks(&self, stage: &SpaceStage) -> Result<Vec<u32>> {
        let mut ranks: Vec<u32> = self
            .coeffs
            .keys()
            .map(|id| stage.rank(id))
            .collect::<Result<_>>()?;
        ranks.sort_unstable();
        ranks.dedup();
        Ok(ranks)
    }

    /// ran x = [min rank, max rank], None for the zero vector.
    pub fn range(&self, stage: &SpaceStage) -> Result<Option<RankInterval>> {
        let ranks = self.support_ranks(stage)?;
        Ok(match (ranks.first(), ranks.last()) {
            (Some(&lo), Some(&hi)) => Some(RankInterval { lo, hi }),
            _ => None,
        })
    }

    pub fn max_coeff_abs(&self) -> BigRational {
        self.coeffs
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(rat_zero)
    }

    /// Keeps exactly the d_g terms with rank(g) in E.
    pub fn project(&self, stage: &SpaceStage, e: &RankInterval) -> Result<BlockVector> {
        let mut out = BlockVector::default();
        for (id, c) in &self.coeffs {
            if e.contains(stage.rank(id)?) {
                out.coeffs.insert(*id, c.clone());
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, String> = self
            .coeffs
            .iter()
            .map(|(id, c)| (id.hex(), rat_to_string(c)))
            .collect();
        serde_json::json!({ "coeffs": map })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let obj = v
            .get("coeffs")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::Parse("vector json needs a coeffs object".into()))?;
        let mut out = BlockVector::default();
        for (k, val) in obj {
            let id: NodeId = k.parse()?;
            let c = rat_parse(
                val.as_str()
                    .ok_or_else(|| Error::Parse("coefficients are rational strings".into()))?,
            )?;
            out.set(id, c);
        }
        Ok(out)
    }
}

/// One atom of a dual functional: e*_g composed with an interval projection.
/// d*_g is stored as the singleton case E = {rank g}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub node: NodeId,
    pub interval: RankInterval,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DualFunctional {
    pub terms: Vec<(BigRational, Atom)>,
}

impl DualFunctional {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn e_star(node: NodeId, rank: u32) -> Self {
        DualFunctional {
            terms: vec![(
                BigRational::from_integer(1.into()),
                Atom { node, interval: RankInterval { lo: 1, hi: rank } },
            )],
        }
    }

    /// d*_g in its canonical form e*_g . P_{rank g}.
    pub fn d_star(node: NodeId, rank: u32) -> Self {
        DualFunctional {
            terms: vec![(
                BigRational::from_integer(1.into()),
                Atom { node, interval: RankInterval::point(rank) },
            )],
        }
    }

    pub fn push(&mut self, c: BigRational, node: NodeId, interval: RankInterval) {
        if !c.is_zero() {
            self.terms.push((c, Atom { node, interval }));
        }
    }

    pub fn add(&self, other: &DualFunctional) -> DualFunctional {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        DualFunctional { terms }
    }

    pub fn scale(&self, c: &BigRational) -> DualFunctional {
        DualFunctional {
            terms: self
                .terms
                .iter()
                .filter(|_| !c.is_zero())
                .map(|(a, at)| (a * c, at.clone()))
                .collect(),
        }
    }

    /// f . P_E, by intersecting atom intervals with E.
    pub fn compose_projection(&self, e: &RankInterval) -> DualFunctional {
        DualFunctional {
            terms: self
                .terms
                .iter()
                .filter_map(|(c, at)| {
                    at.interval
                        .intersect(e)
                        .map(|iv| (c.clone(), Atom { node: at.node, interval: iv }))
                })
                .collect(),
        }
    }
}

/// Exact evaluation f(x) = sum of coefficient * e*_g(P_E x).
pub fn evaluate(stage: &SpaceStage, f: &DualFunctional, x: &BlockVector) -> Result<BigRational> {
    let mut total = rat_zero();
    for (c, atom) in &f.terms {
        if !stage.contains(&atom.node) {
            return Err(Error::Unregistered(atom.node.short()));
        }
        let mut part = rat_zero();
        for (id, v) in x.terms() {
            if atom.interval.contains(stage.rank(id)?) {
                part += v * stage.coordinate(&atom.node, id)?;
            }
        }
        total += c * part;
    }
    Ok(total)
}

/// e*_g(x).
pub fn eval_e_star(stage: &SpaceStage, gamma: &NodeId, x: &BlockVector) -> Result<BigRational> {
    let mut total = rat_zero();
    for (id, v) in x.terms() {
        total += v * stage.coordinate(gamma, id)?;
    }
    Ok(total)
}

/// e*_g(P_E x).
pub fn eval_e_star_proj(
    stage: &SpaceStage,
    gamma: &NodeId,
    e: &RankInterval,
    x: &BlockVector,
) -> Result<BigRational> {
    let mut total = rat_zero();
    for (id, v) in x.terms() {
        if e.contains(stage.rank(id)?) {
            total += v * stage.coordinate(gamma, id)?;
        }
    }
    Ok(total)
}

/// b*(x) for an alpha-average (entries must be registered).
pub fn eval_average(
    stage: &SpaceStage,
    avg: &crate::node::AlphaAverage,
    x: &BlockVector,
) -> Result<BigRational> {
    let mut sum = rat_zero();
    for e in &avg.entries {
        let mut part = rat_zero();
        for (id, v) in x.terms() {
            if e.interval.contains(stage.rank(id)?) {
                part += v * stage.coordinate(&e.node, id)?;
            }
        }
        if e.sign >= 0 {
            sum += part;
        } else {
            sum -= part;
        }
    }
    Ok(sum / crate::rational::rat_from_biguint(&avg.size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nthreshold::NPolicy;
    use crate::rational::rat_frac;
    use crate::schedule::{schedule_t1, ScheduleMode};
    use crate::stage::{SpaceStage, SpaceTag};

    fn demo() -> (SpaceStage, NodeId, NodeId, NodeId) {
        let mut st = SpaceStage::new(SpaceTag::Bmt, schedule_t1(ScheduleMode::Toy), NPolicy::toy());
        let base = st.register_base();
        let g2 = st.register(st.canonical_age_one(2)).unwrap();
        let g3 = st.register(st.canonical_age_one(3)).unwrap();
        (st, base, g2, g3)
    }

    #[test]
    fn biorthogonality() {
        let (st, base, g2, g3) = demo();
        for (g, r) in [(base, 1), (g2, 2), (g3, 3)] {
            let f = DualFunctional::d_star(g, r);
            for (x, xr) in [(base, 1), (g2, 2), (g3, 3)] {
                let got = evaluate(&st, &f, &BlockVector::basis(x)).unwrap();
                let expect = if g == x { rat_frac(1, 1) } else { rat_frac(0, 1) };
                assert_eq!(got, expect, "d*({r}) on d({xr})");
            }
        }
    }

    #[test]
    fn projection_annihilates_disjoint_support() {
        let (st, base, g2, _) = demo();
        let f = DualFunctional::e_star(g2, 2).compose_projection(&RankInterval::point(3));
        let x = BlockVector::basis(base);
        assert_eq!(evaluate(&st, &f, &x).unwrap(), rat_frac(0, 1));
    }

    #[test]
    fn linearity_example() {
        // c*_g for the canonical age-one node at rank 2 applied to 3 d_0
        let (st, base, g2, _) = demo();
        let x = BlockVector::basis(base).scale(&rat_frac(3, 1));
        let c = st.c_star_on(&g2, &base) * rat_frac(3, 1);
        assert_eq!(c, rat_frac(3, 8));
        // and the full coordinate evaluation agrees
        assert_eq!(eval_e_star(&st, &g2, &x).unwrap(), rat_frac(3, 8));
    }

    #[test]
    fn project_identities() {
        let (st, base, g2, g3) = demo();
        let mut x = BlockVector::zero();
        x.set(base, rat_frac(1, 2));
        x.set(g2, rat_frac(-2, 3));
        x.set(g3, rat_frac(5, 1));
        let full = RankInterval { lo: 1, hi: 5 };
        assert_eq!(x.project(&st, &full).unwrap(), x);
        let empty = RankInterval { lo: 4, hi: 5 };
        assert!(x.project(&st, &empty).unwrap().is_zero());
        // P_E . P_F = P_{E cap F}
        let e = RankInterval { lo: 1, hi: 2 };
        let f = RankInterval { lo: 2, hi: 3 };
        let lhs = x.project(&st, &f).unwrap().project(&st, &e).unwrap();
        let rhs = x.project(&st, &e.intersect(&f).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn vector_json_roundtrip() {
        let (_, base, g2, _) = demo();
        let mut x = BlockVector::zero();
        x.set(base, rat_frac(-7, 12));
        x.set(g2, rat_frac(22, 7));
        let j = x.to_json();
        assert_eq!(BlockVector::from_json(&j).unwrap(), x);
    }

    #[test]
    fn decomposition_identity_e_equals_c_plus_d() {
        let (st, base, g2, g3) = demo();
        let mut x = BlockVector::zero();
        x.set(base, rat_frac(2, 3));
        x.set(g2, rat_frac(-1, 5));
        x.set(g3, rat_frac(7, 2));
        for (g, _r) in [(g2, 2u32), (g3, 3u32)] {
            let e = eval_e_star(&st, &g, &x).unwrap();
            let d = x.coeff(&g); // d*_g(x)
            let c: BigRational = x
                .terms()
                .map(|(id, v)| v * st.c_star_on(&g, id))
                .sum();
            assert_eq!(e, c + d);
        }
    }
}
