//! Weight sequences (m_j, n_j). The m_j are geometric, m_j = base^j with
//! base >= 8, so every infinite-tail condition the estimates consume has an
//! exact closed form. The n_j come from a rule validated at construction.

use num::{BigRational, BigUint, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{rat_frac, rat_from_biguint, rat_inv, rat_to_string};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NRule {
    /// n_j = coeff * base^j
    Power { coeff: u64, base: u64 },
    /// explicit finite list, n_j = values[j-1]
    List { values: Vec<u64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Toy,
    Strict,
}

/// The sequences (m_j, n_j)_{j>=1}. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSchedule {
    pub base: u64,
    pub n_rule: NRule,
    pub mode: ScheduleMode,
    pub depth: u32,
}

impl WeightSchedule {
    pub fn new(base: u64, n_rule: NRule, mode: ScheduleMode, depth: u32) -> Result<Self> {
        if base < 8 {
            return Err(Error::Schedule(format!("m_1 = base = {base} < 8")));
        }
        let ws = WeightSchedule { base, n_rule, mode, depth };
        let bound = match &ws.n_rule {
            NRule::Power { coeff, base } => {
                if *coeff == 0 || *base < 2 {
                    return Err(Error::Schedule(
                        "power rule needs coeff >= 1 and base >= 2".into(),
                    ));
                }
                depth.max(4)
            }
            NRule::List { values } => {
                if values.is_empty() {
                    return Err(Error::Schedule("empty n_j list".into()));
                }
                values.len() as u32
            }
        };
        let mut prev = BigUint::zero();
        for j in 1..=bound {
            let n = ws.n(j)?;
            if n <= prev {
                return Err(Error::Schedule(format!("n_{j} not strictly increasing")));
            }
            if n < ws.m(j) {
                return Err(Error::Schedule(format!("n_{j} = {n} < m_{j} = {}", ws.m(j))));
            }
            prev = n;
        }
        Ok(ws)
    }

    /// m_j = base^j.
    pub fn m(&self, j: u32) -> BigUint {
        assert!(j >= 1, "weight indices start at 1");
        BigUint::from(self.base).pow(j)
    }

    /// we_j = 1/m_j, the weight carried by a coordinate of weight index j.
    pub fn weight(&self, j: u32) -> BigRational {
        rat_inv(&self.m(j))
    }

    pub fn n(&self, j: u32) -> Result<BigUint> {
        assert!(j >= 1, "weight indices start at 1");
        match &self.n_rule {
            NRule::Power { coeff, base } => {
                Ok(BigUint::from(*coeff) * BigUint::from(*base).pow(j))
            }
            NRule::List { values } => values
                .get((j - 1) as usize)
                .map(|v| BigUint::from(*v))
                .ok_or_else(|| Error::Schedule(format!("n_{j} beyond list depth"))),
        }
    }

    /// Exact tail sum over j in (i, horizon]; the closed form
    /// sum_{j>i} 1/m_j = 1/((base-1) base^i) bounds every finite tail.
    pub fn tail_sum_closed_form(&self, i: u32) -> BigRational {
        let denom = BigUint::from(self.base - 1) * BigUint::from(self.base).pow(i);
        rat_inv(&denom)
    }

    /// Both closed-form tail conditions, returned as exact (lhs, rhs) pairs:
    /// sum_j 1/m_j = 1/(base-1) < 1/3 and sum_{j>i} 1/m_j < 1/m_i.
    pub fn tail_conditions_hold(&self, upto: u32) -> bool {
        let total = rat_inv(&BigUint::from(self.base - 1));
        if total >= rat_frac(1, 3) {
            return false;
        }
        (0..=upto).all(|i| {
            if i == 0 {
                true
            } else {
                self.tail_sum_closed_form(i) < self.weight(i)
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrictItem {
    /// which inequality: "a" (tail of decreasing weights), "b" (lacunarity
    /// consumed by the vfg-family estimate), "c" (n_j > m_j^2 n_{j-1})
    pub rule: String,
    pub i: u32,
    pub j: u32,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrictReport {
    pub mode: ScheduleMode,
    pub depth: u32,
    pub items: Vec<StrictItem>,
}

impl StrictReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|it| it.pass)
    }
    pub fn failures(&self) -> Vec<&StrictItem> {
        self.items.iter().filter(|it| !it.pass).collect()
    }
}

/// Evaluates, exactly, every lacunarity inequality the estimates consume, for
/// all index pairs up to `depth`. Always produces a report; nothing is thrown.
pub fn validate_strict(ws: &WeightSchedule, depth: u32) -> Result<StrictReport> {
    let mut items = Vec::new();
    // (a) sum_{k=i}^{j} 1/m_k <= 2/m_i: the worst run of strictly decreasing
    // weights is the one through consecutive indices.
    for i in 1..=depth {
        let mut sum = BigRational::zero();
        for k in i..=depth {
            sum += ws.weight(k);
            items.push(StrictItem {
                rule: "a".into(),
                i,
                j: k,
                lhs: rat_to_string(&sum),
                rhs: rat_to_string(&(ws.weight(i) * rat_frac(2, 1))),
                pass: sum <= ws.weight(i) * rat_frac(2, 1),
            });
        }
    }
    // (b) 10 n_i m_i / n_j + 10 m_i / m_j + 4 n_i m_i m_j / n_j < 24 m_i / m_j
    for i in 1..depth {
        for j in (i + 1)..=depth {
            let (mi, mj) = (rat_from_biguint(&ws.m(i)), rat_from_biguint(&ws.m(j)));
            let (ni, nj) = (rat_from_biguint(&ws.n(i)?), rat_from_biguint(&ws.n(j)?));
            let lhs = rat_frac(10, 1) * &ni * &mi / &nj
                + rat_frac(10, 1) * &mi / &mj
                + rat_frac(4, 1) * &ni * &mi * &mj / &nj;
            let rhs = rat_frac(24, 1) * &mi / &mj;
            items.push(StrictItem {
                rule: "b".into(),
                i,
                j,
                lhs: rat_to_string(&lhs),
                rhs: rat_to_string(&rhs),
                pass: lhs < rhs,
            });
        }
    }
    // (c) n_j > m_j^2 n_{j-1}, strict mode only.
    if ws.mode == ScheduleMode::Strict {
        for j in 2..=depth {
            let lhs = ws.n(j)?;
            let rhs = ws.m(j).pow(2) * ws.n(j - 1)?;
            items.push(StrictItem {
                rule: "c".into(),
                i: j - 1,
                j,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
                pass: lhs > rhs,
            });
        }
    }
    Ok(StrictReport { mode: ws.mode, depth, items })
}

/// The schedule used throughout the toy-scale suites: base 8, n_j = 8^{2j}.
pub fn schedule_t1(mode: ScheduleMode) -> WeightSchedule {
    WeightSchedule::new(8, NRule::Power { coeff: 1, base: 64 }, mode, 8).unwrap()
}

/// Minimal toy schedule with n_j = m_j = 8^j, used where n_j-length sums must
/// stay materializable.
pub fn schedule_toy_min() -> WeightSchedule {
    WeightSchedule::new(8, NRule::Power { coeff: 1, base: 8 }, ScheduleMode::Toy, 8).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::traits::ToPrimitive;

    #[test]
    fn t1_values() {
        let ws = schedule_t1(ScheduleMode::Toy);
        assert_eq!(ws.m(1).to_u64().unwrap(), 8);
        assert_eq!(ws.n(1).unwrap().to_u64().unwrap(), 64);
        assert_eq!(ws.m(2).to_u64().unwrap(), 64);
        assert_eq!(ws.n(2).unwrap().to_u64().unwrap(), 4096);
    }

    #[test]
    fn base_below_eight_rejected() {
        let err = WeightSchedule::new(7, NRule::Power { coeff: 1, base: 64 }, ScheduleMode::Toy, 4);
        assert!(err.is_err());
    }

    #[test]
    fn n_below_m_rejected() {
        let err = WeightSchedule::new(
            8,
            NRule::List { values: vec![8, 32] },
            ScheduleMode::Toy,
            2,
        );
        assert!(err.is_err(), "n_2 = 32 < m_2 = 64 must be rejected");
    }

    #[test]
    fn non_increasing_n_rejected() {
        let err = WeightSchedule::new(
            8,
            NRule::List { values: vec![64, 64] },
            ScheduleMode::Toy,
            2,
        );
        assert!(err.is_err());
    }

    // Oracle: brute-force the geometric sums and compare with the closed form.
    #[test]
    fn tail_closed_form_matches_brute_force_partial_sums() {
        let ws = schedule_t1(ScheduleMode::Toy);
        for i in 0..5u32 {
            let closed = if i == 0 {
                rat_inv(&BigUint::from(ws.base - 1))
            } else {
                ws.tail_sum_closed_form(i)
            };
            // partial sums approach the closed form from below
            let mut partial = BigRational::zero();
            for j in (i + 1)..=(i + 40) {
                partial += ws.weight(j);
            }
            assert!(partial < closed);
            let gap = &closed - &partial;
            // the remainder after 40 terms is exactly closed_form(i+40)
            assert_eq!(gap, ws.tail_sum_closed_form(i + 40));
        }
        assert!(ws.tail_conditions_hold(6));
    }

    #[test]
    fn strict_item_a_passes_for_t1_depth3() {
        let ws = schedule_t1(ScheduleMode::Toy);
        let report = validate_strict(&ws, 3).unwrap();
        assert!(report.items.iter().filter(|it| it.rule == "a").all(|it| it.pass));
    }

    #[test]
    fn strict_item_c_fails_for_t1_at_j2() {
        let ws = schedule_t1(ScheduleMode::Strict);
        let report = validate_strict(&ws, 2).unwrap();
        let item = report
            .items
            .iter()
            .find(|it| it.rule == "c" && it.j == 2)
            .expect("item (c) for j=2");
        assert!(!item.pass);
        assert_eq!(item.lhs, "4096");
        assert_eq!(item.rhs, "262144");
    }

    #[test]
    fn depth_zero_gives_empty_report() {
        let ws = schedule_t1(ScheduleMode::Strict);
        let report = validate_strict(&ws, 0).unwrap();
        assert!(report.items.is_empty());
    }

    #[test]
    fn failures_are_monotone_in_depth() {
        let ws = WeightSchedule::new(
            8,
            NRule::Power { coeff: 4, base: 8 },
            ScheduleMode::Strict,
            6,
        )
        .unwrap();
        assert_eq!(ws.n(1).unwrap().to_u64().unwrap(), 32);
        let shallow = validate_strict(&ws, 3).unwrap();
        let deep = validate_strict(&ws, 5).unwrap();
        for f in shallow.failures() {
            assert!(
                deep.items
                    .iter()
                    .any(|it| it.rule == f.rule && it.i == f.i && it.j == f.j && !it.pass),
                "failure {f:?} must persist at greater depth"
            );
        }
    }

    #[test]
    fn schedule_config_roundtrip() {
        let ws = schedule_t1(ScheduleMode::Strict);
        let json = serde_json::to_string(&ws).unwrap();
        let back: WeightSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(ws, back);
    }
}
