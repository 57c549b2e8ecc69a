//! Two-class sampling-rate allocation.
//!
//! Important blocks take rate `x1`, all other blocks rate `x2`, and the pair
//! maximizes the number of samples `f = I*w*h*x1 + O*w*h*x2` subject to
//! `f <= S`, `x1 >= 1.1 x2` and box bounds on both rates. The feasible
//! region is a convex polygon in the plane, so the optimum is found exactly by
//! enumerating pairwise intersections of the six constraint lines.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::geometry::{BlockGeometry, BlockIndex, BlockSet, BLOCK_LEN, FRAME_LEN, N_BLOCKS};

/// Rates for which the rate bounds are defined.
pub const STANDARD_RATES: [f64; 3] = [0.10, 0.20, 0.30];
/// Upper bound on the important-block rate.
pub const X1_UPPER: f64 = 0.55;
/// Lower bound on the other-block rate, keeping every block reconstructible.
pub const X2_LOWER: f64 = 0.07;
/// Required ratio `x1 / x2`.
pub const IMPORTANCE_RATIO: f64 = 1.1;

const RATE_EPS: f64 = 1e-9;

pub fn is_standard_rate(rate: f64) -> bool {
    STANDARD_RATES.iter().any(|r| (r - rate).abs() < RATE_EPS)
}

/// Per-frame sample budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleBudget {
    pub samples: usize,
    /// False for rates other than 10/20/30 %.
    pub standard: bool,
}

/// `S = round(rate * 400 * 576)`.
pub fn budget_for_rate(rate: f64) -> Result<SampleBudget> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Parameter(alloc::format!("sampling rate {rate} is not in (0, 1]")));
    }
    Ok(SampleBudget {
        samples: libm::round(rate * FRAME_LEN as f64) as usize,
        standard: is_standard_rate(rate),
    })
}

/// Box bounds on the two rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBounds {
    pub x1_lower: f64,
    pub x1_upper: f64,
    pub x2_lower: f64,
    pub x2_upper: f64,
}

/// Bounds for a standard rate: important blocks at least the uniform rate,
/// other blocks at most the uniform rate.
pub fn bounds_for_rate(rate: f64) -> Result<RateBounds> {
    if !is_standard_rate(rate) {
        return Err(Error::UnsupportedRate(rate));
    }
    Ok(RateBounds {
        x1_lower: rate,
        x1_upper: X1_UPPER,
        x2_lower: X2_LOWER,
        x2_upper: rate,
    })
}

/// A constraint of [`BudgetLp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// `x1 >= ratio * x2`
    Ratio,
    /// `f(x) <= S`
    Budget,
    X1Lower,
    X1Upper,
    X2Lower,
    X2Upper,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::Ratio => "x1 >= 1.1 x2",
            Constraint::Budget => "f(x) <= S",
            Constraint::X1Lower => "x1 >= x1_lower",
            Constraint::X1Upper => "x1 <= x1_upper",
            Constraint::X2Lower => "x2 >= x2_lower",
            Constraint::X2Upper => "x2 <= x2_upper",
        };
        f.write_str(s)
    }
}

const ALL_CONSTRAINTS: [Constraint; 6] = [
    Constraint::Ratio,
    Constraint::Budget,
    Constraint::X1Lower,
    Constraint::X1Upper,
    Constraint::X2Lower,
    Constraint::X2Upper,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetLp {
    /// Number of important blocks `I`.
    pub important: usize,
    /// Number of other blocks `O`.
    pub other: usize,
    /// Block width in range bins.
    pub block_w: usize,
    /// Block height in azimuth bins.
    pub block_h: usize,
    /// Sample budget `S`.
    pub budget: f64,
    pub bounds: RateBounds,
    pub ratio: f64,
}

impl BudgetLp {
    /// LP for `important` of the 240 blocks at a standard rate.
    pub fn for_rate(important: usize, rate: f64) -> Result<Self> {
        if important > N_BLOCKS {
            return Err(Error::Parameter(alloc::format!(
                "{important} important blocks exceeds the 240-block grid"
            )));
        }
        Ok(Self {
            important,
            other: N_BLOCKS - important,
            block_w: BlockGeometry::WIDTH,
            block_h: BlockGeometry::HEIGHT,
            budget: budget_for_rate(rate)?.samples as f64,
            bounds: bounds_for_rate(rate)?,
            ratio: IMPORTANCE_RATIO,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !(unit(b.x1_lower) && unit(b.x1_upper) && unit(b.x2_lower) && unit(b.x2_upper)) {
            return Err(Error::Parameter("rate bounds must lie in (0, 1]".into()));
        }
        if b.x1_lower > b.x1_upper || b.x2_lower > b.x2_upper {
            return Err(Error::Parameter("rate bounds are inverted".into()));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::Parameter("budget must be non-negative".into()));
        }
        if !(self.ratio > 0.0) {
            return Err(Error::Parameter("importance ratio must be positive".into()));
        }
        Ok(())
    }

    /// Objective coefficients `(I*w*h, O*w*h)`.
    pub fn weights(&self) -> (f64, f64) {
        let px = (self.block_w * self.block_h) as f64;
        (self.important as f64 * px, self.other as f64 * px)
    }

    pub fn objective(&self, x1: f64, x2: f64) -> f64 {
        let (a, b) = self.weights();
        a * x1 + b * x2
    }

    /// Signed slack of a constraint at `(x1, x2)`; negative means violated.
    pub fn slack(&self, c: Constraint, x1: f64, x2: f64) -> f64 {
        let b = &self.bounds;
        match c {
            Constraint::Ratio => x1 - self.ratio * x2,
            Constraint::Budget => self.budget - self.objective(x1, x2),
            Constraint::X1Lower => x1 - b.x1_lower,
            Constraint::X1Upper => b.x1_upper - x1,
            Constraint::X2Lower => x2 - b.x2_lower,
            Constraint::X2Upper => b.x2_upper - x2,
        }
    }

    /// Tolerance used when testing a constraint, scaled to its magnitude.
    fn tolerance(&self, c: Constraint) -> f64 {
        match c {
            Constraint::Budget => 1e-9 * self.budget.max(1.0),
            _ => 1e-12,
        }
    }

    pub fn is_feasible(&self, x1: f64, x2: f64) -> bool {
        ALL_CONSTRAINTS
            .iter()
            .all(|&c| self.slack(c, x1, x2) >= -self.tolerance(c))
    }

    /// Constraint line `p x1 + q x2 = r`.
    fn line(&self, c: Constraint) -> (f64, f64, f64) {
        let b = &self.bounds;
        let (wa, wb) = self.weights();
        match c {
            Constraint::Ratio => (1.0, -self.ratio, 0.0),
            Constraint::Budget => (wa, wb, self.budget),
            Constraint::X1Lower => (1.0, 0.0, b.x1_lower),
            Constraint::X1Upper => (1.0, 0.0, b.x1_upper),
            Constraint::X2Lower => (0.0, 1.0, b.x2_lower),
            Constraint::X2Upper => (0.0, 1.0, b.x2_upper),
        }
    }

    /// First constraint that makes the region empty, checked at the
    /// least-demanding corner of the box.
    fn infeasibility_cause(&self) -> Constraint {
        let b = &self.bounds;
        if b.x1_upper < self.ratio * b.x2_lower {
            return Constraint::Ratio;
        }
        let x2 = b.x2_lower;
        let x1 = b.x1_lower.max(self.ratio * x2);
        if self.slack(Constraint::Budget, x1, x2) < -self.tolerance(Constraint::Budget) {
            return Constraint::Budget;
        }
        Constraint::Ratio
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSolution {
    pub x1: f64,
    pub x2: f64,
    /// `f(x)` at the solution.
    pub achieved_budget: f64,
    pub feasible: bool,
    /// Constraints active at the solution (empty when infeasible).
    pub binding: Vec<Constraint>,
    /// Reason for infeasibility.
    pub violated: Option<Constraint>,
}

/// Exact optimum of the two-variable LP.
///
/// Ties along the budget face are broken toward the largest `x1`, then the
/// largest `x2`. With no important blocks `x1` does not enter the objective
/// and is reported at its smallest feasible value.
pub fn solve_rates(lp: &BudgetLp) -> Result<RateSolution> {
    lp.validate()?;
    let obj_tol = 1e-9 * lp.budget.max(1.0);
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &ci) in ALL_CONSTRAINTS.iter().enumerate() {
        for &cj in &ALL_CONSTRAINTS[i + 1..] {
            let (p1, q1, r1) = lp.line(ci);
            let (p2, q2, r2) = lp.line(cj);
            let det = p1 * q2 - p2 * q1;
            if det.abs() < 1e-14 * (p1.abs() + q1.abs()).max(1.0) * (p2.abs() + q2.abs()).max(1.0) {
                continue;
            }
            let x1 = (r1 * q2 - r2 * q1) / det;
            let x2 = (p1 * r2 - p2 * r1) / det;
            if !lp.is_feasible(x1, x2) {
                continue;
            }
            let f = lp.objective(x1, x2);
            let better = match best {
                None => true,
                Some((bf, bx1, bx2)) => {
                    if f > bf + obj_tol {
                        true
                    } else if f >= bf - obj_tol {
                        x1 > bx1 + 1e-12 || ((x1 - bx1).abs() <= 1e-12 && x2 > bx2)
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((f, x1, x2));
            }
        }
    }

    let Some((_, mut x1, mut x2)) = best else {
        return Ok(RateSolution {
            x1: lp.bounds.x1_lower,
            x2: lp.bounds.x2_lower,
            achieved_budget: lp.objective(lp.bounds.x1_lower, lp.bounds.x2_lower),
            feasible: false,
            binding: Vec::new(),
            violated: Some(lp.infeasibility_cause()),
        });
    };

    // Snap round-off onto the box.
    let b = &lp.bounds;
    x1 = x1.clamp(b.x1_lower, b.x1_upper);
    x2 = x2.clamp(b.x2_lower, b.x2_upper);
    if lp.important == 0 {
        x1 = b.x1_lower.max(lp.ratio * x2).min(b.x1_upper);
    } else if x1 < lp.ratio * x2 {
        // vertex on the ratio line, off by rounding
        x1 = lp.ratio * x2;
    }
    let binding = ALL_CONSTRAINTS
        .iter()
        .copied()
        .filter(|&c| lp.slack(c, x1, x2).abs() <= lp.tolerance(c).max(1e-9))
        .collect();
    Ok(RateSolution {
        x1,
        x2,
        achieved_budget: lp.objective(x1, x2),
        feasible: true,
        binding,
        violated: None,
    })
}

/// Solve, and when the region is empty lower `x1_lower` to
/// `ratio * x2_lower` and solve again. The flag reports the relaxation.
pub fn solve_rates_relaxed(lp: &BudgetLp) -> Result<(RateSolution, bool)> {
    let sol = solve_rates(lp)?;
    if sol.feasible {
        return Ok((sol, false));
    }
    let mut relaxed = *lp;
    relaxed.bounds.x1_lower = (lp.ratio * lp.bounds.x2_lower).min(lp.bounds.x1_upper);
    Ok((solve_rates(&relaxed)?, true))
}

/// How a plan's rates were chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanKind {
    /// Every block stored raw.
    Full,
    /// One rate for every block.
    Uniform,
    /// Two-class rates from the LP.
    Adaptive {
        solution: RateSolution,
        /// Whether the infeasibility fallback was used.
        relaxed: bool,
    },
}

/// Per-block sampling rates and measurement counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub kind: PlanKind,
    rates: Vec<f64>,
    counts: Vec<usize>,
    important: BlockSet,
    target_budget: usize,
}

/// Rates this close to 1 are stored raw.
pub const RAW_RATE: f64 = 0.999;

fn samples_for_rate(rate: f64) -> usize {
    if rate >= RAW_RATE {
        return BLOCK_LEN;
    }
    (libm::floor(BLOCK_LEN as f64 * rate + RATE_EPS) as usize).clamp(1, BLOCK_LEN)
}

impl SamplingPlan {
    /// Every block stored raw (230400 values).
    pub fn full() -> Self {
        Self {
            kind: PlanKind::Full,
            rates: vec![1.0; N_BLOCKS],
            counts: vec![BLOCK_LEN; N_BLOCKS],
            important: BlockSet::new(),
            target_budget: FRAME_LEN,
        }
    }

    /// Standard-CS plan: `floor(960 * rate)` samples in every block.
    pub fn uniform(rate: f64) -> Result<Self> {
        let budget = budget_for_rate(rate)?.samples;
        let m = samples_for_rate(rate);
        Ok(Self {
            kind: PlanKind::Uniform,
            rates: vec![rate; N_BLOCKS],
            counts: vec![m; N_BLOCKS],
            important: BlockSet::new(),
            target_budget: budget,
        })
    }

    /// Build a plan from arbitrary per-block counts.
    pub fn from_counts(rates: Vec<f64>, counts: Vec<usize>, important: BlockSet, target_budget: usize, kind: PlanKind) -> Result<Self> {
        if rates.len() != N_BLOCKS || counts.len() != N_BLOCKS {
            return Err(Error::Plan(alloc::format!(
                "plan needs 240 entries, got {} rates and {} counts",
                rates.len(),
                counts.len()
            )));
        }
        if let Some(m) = counts.iter().find(|&&m| m == 0 || m > BLOCK_LEN) {
            return Err(Error::Plan(alloc::format!("block count {m} outside 1..=960")));
        }
        Ok(Self {
            kind,
            rates,
            counts,
            important,
            target_budget,
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, idx: BlockIndex) -> usize {
        self.counts[idx.linear()]
    }

    pub fn rate(&self, idx: BlockIndex) -> f64 {
        self.rates[idx.linear()]
    }

    pub fn important(&self) -> &BlockSet {
        &self.important
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn target_budget(&self) -> usize {
        self.target_budget
    }

    /// Blocks stored raw rather than compressively sensed.
    pub fn is_raw(&self, idx: BlockIndex) -> bool {
        self.count(idx) == BLOCK_LEN
    }
}

/// Turn LP rates into integer counts: `floor(960 * rate)` per block, then
/// hand any unused budget to important blocks one sample at a time in linear
/// order (never above 960 per block). The total never exceeds `budget`.
pub fn plan_from_rates(important: &BlockSet, sol: &RateSolution, budget: usize) -> Result<SamplingPlan> {
    if !sol.feasible {
        return Err(Error::Plan("rate solution is infeasible".into()));
    }
    let mut rates = Vec::with_capacity(N_BLOCKS);
    let mut counts = Vec::with_capacity(N_BLOCKS);
    for idx in BlockIndex::all() {
        let rate = if important.contains(idx) { sol.x1 } else { sol.x2 };
        rates.push(rate);
        counts.push(samples_for_rate(rate));
    }
    let mut total: usize = counts.iter().sum();

    // Guard the budget against floor round-up at exact integers.
    while total > budget {
        let (i, _) = counts
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 1)
            .max_by_key(|(i, &m)| (m, *i))
            .ok_or_else(|| Error::Plan("budget below one sample per block".into()))?;
        counts[i] -= 1;
        total -= 1;
    }

    let members: Vec<usize> = important.iter().map(|b| b.linear()).collect();
    let mut leftover = budget - total;
    while leftover > 0 && !members.is_empty() {
        let mut progressed = false;
        for &i in &members {
            if leftover == 0 {
                break;
            }
            if counts[i] < BLOCK_LEN {
                counts[i] += 1;
                leftover -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    SamplingPlan::from_counts(
        rates,
        counts,
        *important,
        budget,
        PlanKind::Adaptive {
            solution: sol.clone(),
            relaxed: false,
        },
    )
}

/// LP-driven plan for a set of important blocks at a standard rate.
pub fn adaptive_plan(important: &BlockSet, rate: f64) -> Result<SamplingPlan> {
    let lp = BudgetLp::for_rate(important.len(), rate)?;
    let (sol, relaxed) = solve_rates_relaxed(&lp)?;
    let mut plan = plan_from_rates(important, &sol, lp.budget as usize)?;
    plan.kind = PlanKind::Adaptive {
        solution: sol,
        relaxed,
    };
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(important: usize, rate: f64) -> BudgetLp {
        BudgetLp::for_rate(important, rate).unwrap()
    }

    #[test]
    fn budgets() {
        assert_eq!(budget_for_rate(0.10).unwrap().samples, 23040);
        assert_eq!(budget_for_rate(0.20).unwrap().samples, 46080);
        assert_eq!(budget_for_rate(0.30).unwrap().samples, 69120);
        let full = budget_for_rate(1.0).unwrap();
        assert_eq!(full.samples, 230400);
        assert!(!full.standard);
        assert!(budget_for_rate(0.0).is_err());
        assert!(budget_for_rate(1.5).is_err());
    }

    #[test]
    fn bounds() {
        for r in STANDARD_RATES {
            assert_eq!(
                bounds_for_rate(r).unwrap(),
                RateBounds {
                    x1_lower: r,
                    x1_upper: 0.55,
                    x2_lower: 0.07,
                    x2_upper: r
                }
            );
        }
        assert_eq!(bounds_for_rate(0.15), Err(Error::UnsupportedRate(0.15)));
    }

    #[test]
    fn no_important_blocks_caps_x2() {
        let sol = solve_rates(&lp(0, 0.10)).unwrap();
        assert!(sol.feasible);
        assert!((sol.x2 - 0.10).abs() < 1e-12);
        assert!((sol.achieved_budget - 23040.0).abs() < 1e-6);
        // x1 unused: smallest feasible value
        assert!((sol.x1 - 0.11).abs() < 1e-12);
    }

    #[test]
    fn nine_important_blocks() {
        let sol = solve_rates(&lp(9, 0.10)).unwrap();
        assert!((sol.x1 - 0.55).abs() < 1e-12);
        let expected = (23040.0 - 0.55 * 9.0 * 960.0) / (231.0 * 960.0);
        assert!((sol.x2 - expected).abs() < 1e-12);
        assert!((sol.x2 - 0.0825).abs() < 1e-3);
        assert!(sol.binding.contains(&Constraint::Budget));
        assert!(sol.binding.contains(&Constraint::X1Upper));
    }

    #[test]
    fn all_important_blocks() {
        let sol = solve_rates(&lp(240, 0.10)).unwrap();
        assert!(sol.feasible);
        assert!((sol.x1 - 0.10).abs() < 1e-12);
        assert!((sol.achieved_budget - 23040.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_region_reported_and_relaxed() {
        let mut p = lp(100, 0.10);
        p.bounds.x1_lower = 0.5;
        let sol = solve_rates(&p).unwrap();
        assert!(!sol.feasible);
        assert_eq!(sol.violated, Some(Constraint::Budget));
        let (sol, relaxed) = solve_rates_relaxed(&p).unwrap();
        assert!(relaxed);
        assert!(sol.feasible);
        assert!(sol.achieved_budget <= p.budget + 1e-6);
    }

    #[test]
    fn ratio_infeasibility_identified() {
        let mut p = lp(10, 0.10);
        p.bounds.x1_upper = 0.07;
        p.bounds.x1_lower = 0.07;
        let sol = solve_rates(&p).unwrap();
        assert!(!sol.feasible);
        assert_eq!(sol.violated, Some(Constraint::Ratio));
    }

    #[test]
    fn uniform_plans() {
        for (rate, m, total) in [(0.1, 96, 23040), (0.2, 192, 46080), (0.3, 288, 69120)] {
            let p = SamplingPlan::uniform(rate).unwrap();
            assert!(p.counts().iter().all(|&c| c == m));
            assert_eq!(p.total(), total);
        }
        let full = SamplingPlan::full();
        assert_eq!(full.total(), 230400);
    }

    #[test]
    fn plan_all_other_at_ten_percent() {
        let sol = solve_rates(&lp(0, 0.10)).unwrap();
        let plan = plan_from_rates(&BlockSet::new(), &sol, 23040).unwrap();
        assert!(plan.counts().iter().all(|&m| m == 96));
        assert_eq!(plan.total(), 23040);
    }

    #[test]
    fn plan_nine_important() {
        let important: BlockSet = (0..9).map(|a| BlockIndex::new(a, 3).unwrap()).collect();
        let sol = solve_rates(&lp(9, 0.10)).unwrap();
        let plan = plan_from_rates(&important, &sol, 23040).unwrap();
        for b in important.iter() {
            assert!(plan.count(b) >= 528);
        }
        assert!(plan.total() <= 23040);
        // the floor loss goes to the important blocks
        assert_eq!(plan.total(), 23040);
    }

    #[test]
    fn plan_at_lower_bound() {
        let sol = RateSolution {
            x1: 0.077,
            x2: 0.07,
            achieved_budget: 0.0,
            feasible: true,
            binding: Vec::new(),
            violated: None,
        };
        let plan = plan_from_rates(&BlockSet::new(), &sol, 23040).unwrap();
        assert_eq!(plan.total(), 240 * 67);
    }

    #[test]
    fn infeasible_solution_cannot_plan() {
        let mut p = lp(100, 0.10);
        p.bounds.x1_lower = 0.5;
        let sol = solve_rates(&p).unwrap();
        assert!(plan_from_rates(&BlockSet::new(), &sol, 23040).is_err());
    }
}
