//! Quantile-grid discretization and the equal-weight percent-change atom set.
//!
//! A grid posterior is a union of blocks. Each block pairs `D` treatment
//! nodes with `D` control nodes and contributes all `D²` cross-product
//! atoms `100·t/c - 100`. The post-only model has one block; the pre-post
//! model has one block per pre-period mean node.
//!
//! Quantiles over the union are exact order statistics. Small sets are
//! materialized. Mid-sized sets use one counting pass over brackets placed
//! by a deterministic sample. Above [`MATERIALIZE_LIMIT`] a bisection on the
//! value never holds more than a small bracket of atoms. All three agree bit
//! for bit.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::{select_quantiles, QuantilePlan};
use crate::student_t::{standard_quantile, StudentT};
use libm::{ceil, sqrt};

/// Atom count above which quantiles switch to streaming selection
/// (`200³`).
pub const MATERIALIZE_LIMIT: usize = 8_000_000;

/// Atoms collected in the final pass of the streaming selection.
const BRACKET_BUDGET: usize = 1 << 14;

/// Atoms sampled to place the brackets of the single-pass selection.
const SAMPLE_SIZE: usize = 4096;

/// Fractional part of the golden ratio, for a low-discrepancy index
/// sequence.
const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_8;

/// Probability level of grid node `d` (1-based) out of `count`.
pub fn node_probability(d: usize, count: usize) -> f64 {
    (2 * d - 1) as f64 / (2 * count) as f64
}

/// Standard-t quantiles at the `D` midpoint probabilities. Reusable across
/// every location/scale that shares the degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardNodes {
    df: f64,
    values: Vec<f64>,
}

impl StandardNodes {
    pub fn new(df: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("node count must be at least 1"));
        }
        let values = (1..=count)
            .map(|d| standard_quantile(df, node_probability(d, count)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { df, values })
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn standard(&self) -> &[f64] {
        &self.values
    }

    /// Nodes of `t_df(location, scale)`, appended to `out`.
    pub fn extend_scaled(&self, location: f64, scale: f64, out: &mut Vec<f64>) {
        out.extend(self.values.iter().map(|z| location + scale * z));
    }

    pub fn scaled(&self, location: f64, scale: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        self.extend_scaled(location, scale, &mut out);
        out
    }
}

/// `D` equal-probability nodes of `dist`: node `d` is its
/// `(2d - 1) / 2D` quantile.
pub fn discretize(dist: &StudentT, count: usize) -> Result<Vec<f64>> {
    Ok(StandardNodes::new(dist.df(), count)?.scaled(dist.location(), dist.scale()))
}

#[inline]
pub(crate) fn raw_percent_change(treatment: f64, control: f64) -> f64 {
    // Exactly 0 when the arguments are equal; `100·t/c - 100` is not.
    100.0 * ((treatment - control) / control)
}

/// Equal-weight multiset of percent-change atoms, stored implicitly as
/// blocks of node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSet {
    nodes: usize,
    treatment: Vec<f64>,
    control: Vec<f64>,
}

impl AtomSet {
    /// `treatment` and `control` hold the same number of blocks of `nodes`
    /// values each; every treatment block must be sorted ascending.
    pub fn new(nodes: usize, treatment: Vec<f64>, control: Vec<f64>) -> Result<Self> {
        if nodes == 0 || treatment.is_empty() {
            return Err(Error::InvalidInput("atom set needs at least one node"));
        }
        if treatment.len() != control.len() || !treatment.len().is_multiple_of(nodes) {
            return Err(Error::InvalidInput("treatment and control blocks do not line up"));
        }
        if control.contains(&0.0) {
            return Err(Error::DivisionByZero);
        }
        if treatment.iter().chain(&control).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid nodes must be finite"));
        }
        if treatment
            .chunks_exact(nodes)
            .any(|block| block.windows(2).any(|w| w[0] > w[1]))
        {
            return Err(Error::InvalidInput(
                "treatment nodes must be sorted within each block",
            ));
        }
        Ok(Self {
            nodes,
            treatment,
            control,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn blocks(&self) -> usize {
        self.treatment.len() / self.nodes
    }

    pub fn len(&self) -> usize {
        self.treatment.len() * self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    /// `(treatment nodes, control nodes)` of each block.
    pub fn block_pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.treatment
            .chunks_exact(self.nodes)
            .zip(self.control.chunks_exact(self.nodes))
    }

    /// Every atom in block-major, control-major, treatment-minor order.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.block_pairs().flat_map(|(ts, cs)| {
            cs.iter()
                .flat_map(move |&c| ts.iter().map(move |&t| raw_percent_change(t, c)))
        })
    }

    /// Equal-weight quantiles of the atom multiset.
    pub fn quantiles(&self, ps: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if n <= 4 * SAMPLE_SIZE {
            self.materialized_quantiles(ps)
        } else if n <= MATERIALIZE_LIMIT {
            self.bracketed_quantiles(ps)
        } else {
            self.streaming_quantiles(ps)
        }
    }

    /// Atom `i` in [`AtomSet::iter`] order.
    fn atom_at(&self, i: usize) -> f64 {
        let d = self.nodes;
        let (block, within) = (i / (d * d), i % (d * d));
        raw_percent_change(
            self.treatment[block * d + within % d],
            self.control[block * d + within / d],
        )
    }

    /// Same result as [`AtomSet::materialized_quantiles`], bit for bit, from
    /// a single counting pass. Ranks are bracketed using a sorted sample of
    /// atoms; if a bracket misses its rank the set is materialized instead.
    pub fn bracketed_quantiles(&self, ps: &[f64]) -> Result<Vec<f64>> {
        check_probabilities(ps)?;
        let n = self.len();
        let plans: Vec<QuantilePlan> = ps.iter().map(|&p| QuantilePlan::new(n, p)).collect();
        let mut ranks: Vec<usize> = plans.iter().flat_map(|p| [p.lower, p.upper]).collect();
        ranks.sort_unstable();
        ranks.dedup();

        let s = SAMPLE_SIZE.min(n);
        let mut sample: Vec<i64> = (0..s)
            .map(|k| {
                let u = ((k as f64 + 0.5) * GOLDEN_FRACTION).fract();
                order_key(self.atom_at(((u * n as f64) as usize).min(n - 1)))
            })
            .collect();
        sample.sort_unstable();

        let mut spans: Vec<(i64, i64)> = ranks
            .iter()
            .map(|&r| {
                let q = (r as f64 + 0.5) / n as f64;
                let pos = q * s as f64;
                let margin = 4.0 * sqrt(s as f64 * q * (1.0 - q)) + 8.0;
                let lo = if pos - margin < 0.0 {
                    i64::MIN
                } else {
                    sample[(pos - margin) as usize]
                };
                let hi = if pos + margin >= (s - 1) as f64 {
                    i64::MAX
                } else {
                    sample[ceil(pos + margin) as usize]
                };
                (lo, hi)
            })
            .collect();
        spans.sort_unstable();
        // Disjoint sorted bounds `lo_0 <= hi_0 < lo_1 <= hi_1 < ...`.
        let mut bounds: Vec<(i64, i64)> = Vec::new();
        for (lo, hi) in spans {
            match bounds.last_mut() {
                Some(b) if lo <= b.1 => b.1 = b.1.max(hi),
                _ => bounds.push((lo, hi)),
            }
        }

        // An atom's slot is even (`2b`) in the gap before bracket `b` and
        // odd (`2b + 1`) inside it, i.e. the number of `edges` below its key.
        // Rows are monotone in the treatment node, so the slot is tracked
        // along each row and only runs are counted. Bracket members are
        // written unconditionally and kept only when the slot is odd.
        let edges: Vec<i64> = bounds
            .iter()
            .flat_map(|&(lo, hi)| [lo.saturating_sub(1), hi])
            .collect();
        let top = edges.len();
        let mut counts = alloc::vec![0usize; top + 1];
        let mut inside: Vec<i64> = Vec::new();
        let mut scratch = alloc::vec![0i64; self.nodes * self.nodes];
        let mut slot = 0;
        for (ts, cs) in self.block_pairs() {
            let mut kept = 0;
            for &c in cs {
                let mut start = 0;
                for (j, &t) in ts.iter().enumerate() {
                    let k = order_key(raw_percent_change(t, c));
                    if (slot < top && k > edges[slot]) || (slot > 0 && k <= edges[slot - 1]) {
                        counts[slot] += j - start;
                        start = j;
                        while slot < top && k > edges[slot] {
                            slot += 1;
                        }
                        while slot > 0 && k <= edges[slot - 1] {
                            slot -= 1;
                        }
                    }
                    scratch[kept] = k;
                    kept += slot & 1;
                }
                counts[slot] += ts.len() - start;
            }
            inside.extend_from_slice(&scratch[..kept]);
        }

        // Brackets concatenated in value order: rank `r` in bracket `b` sits
        // at `r` minus the atoms in gaps `0..=b`.
        let mut values = Vec::with_capacity(ranks.len());
        let mut from = 0;
        for &r in &ranks {
            let (mut below, mut gaps) = (0, 0);
            let mut hit = None;
            for b in 0..bounds.len() {
                below += counts[2 * b];
                gaps += counts[2 * b];
                if r >= below && r < below + counts[2 * b + 1] {
                    hit = Some(r - gaps);
                    break;
                }
                below += counts[2 * b + 1];
            }
            let Some(index) = hit else {
                return self.materialized_quantiles(ps);
            };
            let (_, &mut key, _) = inside[from..].select_nth_unstable(index - from);
            values.push(from_order_key(key));
            from = index;
        }
        let at = |r: usize| values[ranks.binary_search(&r).expect("rank was requested")];
        Ok(plans
            .iter()
            .map(|p| p.interpolate(at(p.lower), at(p.upper)))
            .collect())
    }

    pub fn materialized_quantiles(&self, ps: &[f64]) -> Result<Vec<f64>> {
        let mut atoms: Vec<f64> = self.iter().collect();
        select_quantiles(&mut atoms, ps)
    }

    /// Same result as [`AtomSet::materialized_quantiles`], bit for bit,
    /// with memory bounded by the bracket budget.
    pub fn streaming_quantiles(&self, ps: &[f64]) -> Result<Vec<f64>> {
        check_probabilities(ps)?;
        let n = self.len();
        let mut out = Vec::with_capacity(ps.len());
        for &p in ps {
            let plan = QuantilePlan::new(n, p);
            let (lower, next) = self.select_rank(plan.lower);
            let upper = if plan.upper == plan.lower { lower } else { next };
            out.push(plan.interpolate(lower, upper));
        }
        Ok(out)
    }

    /// The order statistic of 0-based `rank` and its successor (equal to it
    /// at the top rank).
    fn select_rank(&self, rank: usize) -> (f64, f64) {
        let (min, max) = self.extremes();
        let mut lo = order_key(min) - 1;
        let mut hi = order_key(max);
        let mut count_lo = 0usize;
        let mut count_hi = self.len();
        let target = rank + 1;

        while count_hi - count_lo > BRACKET_BUDGET && (hi as i128 - lo as i128) > 1 {
            let mid = ((lo as i128 + hi as i128) / 2) as i64;
            let c = self.count_at_most(from_order_key(mid));
            if c >= target {
                hi = mid;
                count_hi = c;
            } else {
                lo = mid;
                count_lo = c;
            }
        }

        let mut bracket = self.collect_between(from_order_key(lo), from_order_key(hi));
        debug_assert_eq!(bracket.len(), count_hi - count_lo);
        bracket.sort_unstable_by(f64::total_cmp);
        let idx = rank - count_lo;
        let value = bracket[idx];
        let next = match bracket.get(idx + 1) {
            Some(&v) => v,
            None if rank + 1 < self.len() => self.min_above(from_order_key(hi)),
            None => value,
        };
        (value, next)
    }

    fn extremes(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for (ts, cs) in self.block_pairs() {
            let (first, last) = (ts[0], ts[ts.len() - 1]);
            for &c in cs {
                for v in [raw_percent_change(first, c), raw_percent_change(last, c)] {
                    if v.total_cmp(&min).is_lt() {
                        min = v;
                    }
                    if v.total_cmp(&max).is_gt() {
                        max = v;
                    }
                }
            }
        }
        (min, max)
    }

    /// Number of treatment nodes in `ts` whose atom with `c` is `<= v`
    /// in total order.
    fn count_row(ts: &[f64], c: f64, v: f64) -> usize {
        if c > 0.0 {
            ts.partition_point(|&t| raw_percent_change(t, c).total_cmp(&v).is_le())
        } else {
            ts.len() - ts.partition_point(|&t| raw_percent_change(t, c).total_cmp(&v).is_gt())
        }
    }

    fn count_at_most(&self, v: f64) -> usize {
        self.block_pairs()
            .map(|(ts, cs)| cs.iter().map(|&c| Self::count_row(ts, c, v)).sum::<usize>())
            .sum()
    }

    /// Atoms in the half-open total-order interval `(lo, hi]`.
    fn collect_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (ts, cs) in self.block_pairs() {
            for &c in cs {
                let below = Self::count_row(ts, c, lo);
                let upto = Self::count_row(ts, c, hi);
                let range = if c > 0.0 {
                    below..upto
                } else {
                    ts.len() - upto..ts.len() - below
                };
                out.extend(ts[range].iter().map(|&t| raw_percent_change(t, c)));
            }
        }
        out
    }

    fn min_above(&self, v: f64) -> f64 {
        let mut best = f64::INFINITY;
        for (ts, cs) in self.block_pairs() {
            for &c in cs {
                let k = Self::count_row(ts, c, v);
                if k == ts.len() {
                    continue;
                }
                let t = if c > 0.0 { ts[k] } else { ts[ts.len() - 1 - k] };
                let a = raw_percent_change(t, c);
                if a.total_cmp(&best).is_lt() {
                    best = a;
                }
            }
        }
        best
    }
}

fn check_probabilities(ps: &[f64]) -> Result<()> {
    if ps.iter().all(|&p| p > 0.0 && p < 1.0) {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "probability must lie strictly between 0 and 1",
        ))
    }
}

/// Maps `f64` onto `i64` so that integer order equals `f64::total_cmp`.
fn order_key(x: f64) -> i64 {
    let bits = x.to_bits() as i64;
    bits ^ ((((bits >> 63) as u64) >> 1) as i64)
}

fn from_order_key(k: i64) -> f64 {
    let bits = k ^ ((((k >> 63) as u64) >> 1) as i64);
    f64::from_bits(bits as u64)
}
