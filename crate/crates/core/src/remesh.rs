//! Mesh correction near old extremes (the lambda rule) and the solution update
//! by piecewise-linear interpolation.

use crate::error::{MasError, Result};
use crate::estimator::{adapted_mesh, equidistribution_defect, EstimatorParams};
use crate::grid::{extremes_of, ExtremeKind, GridSolution, Mesh};
use crate::scalar::Real;

/// Parameters of the lambda-rule correction loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaRuleParams<T> {
    /// Evolution constant `C` of the active scheme.
    pub evolution_constant: T,
    /// Fraction `eps` of its distance from the extreme by which a node is pushed.
    pub correction_factor: T,
    pub max_rounds: usize,
}

pub const DEFAULT_CORRECTION_FACTOR: f64 = 0.2;
pub const DEFAULT_MAX_ROUNDS: usize = 50;

/// Multiplicative rounds tried before the remaining violations are projected.
pub const PUSH_ROUNDS: usize = 8;

impl<T: Real> LambdaRuleParams<T> {
    pub fn new(evolution_constant: T, correction_factor: T, max_rounds: usize) -> Result<Self> {
        if !(evolution_constant >= T::zero()) || !evolution_constant.is_finite() {
            return Err(MasError::Config(format!(
                "evolution constant must be >= 0, got {evolution_constant}"
            )));
        }
        if !(correction_factor > T::zero() && correction_factor < T::one()) {
            return Err(MasError::Config(format!(
                "correction factor must lie in (0, 1), got {correction_factor}"
            )));
        }
        Ok(Self {
            evolution_constant,
            correction_factor,
            max_rounds,
        })
    }

    pub fn with_constant(evolution_constant: T) -> Result<Self> {
        Self::new(
            evolution_constant,
            T::lit(DEFAULT_CORRECTION_FACTOR),
            DEFAULT_MAX_ROUNDS,
        )
    }

    /// Threshold factor `1 + 3C`.
    pub fn amplification(&self) -> T {
        T::one() + T::lit(3.0) * self.evolution_constant
    }
}

/// `A_j` of one new node lying in an old interval next to an old extreme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AValue<T> {
    /// Index of the new node.
    pub node: usize,
    /// Old interval `[x_i, x_{i+1})` that contains it.
    pub interval: usize,
    /// Old node carrying the extreme the value refers to.
    pub extreme: usize,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaRuleReport<T> {
    pub a_values: Vec<T>,
    pub max_a: T,
    pub avg_a: T,
    /// Correction rounds in which at least one node moved.
    pub corrections_applied: usize,
}

impl<T: Real> LambdaRuleReport<T> {
    fn from_values(values: &[AValue<T>], corrections_applied: usize) -> Self {
        let a_values: Vec<T> = values.iter().map(|a| a.value).collect();
        let max_a = a_values.iter().copied().fold(T::zero(), T::max);
        let avg_a = if a_values.is_empty() {
            T::zero()
        } else {
            a_values.iter().copied().fold(T::zero(), |s, a| s + a) / T::from_count(a_values.len())
        };
        Self {
            a_values,
            max_a,
            avg_a,
            corrections_applied,
        }
    }

    /// `max_A / (1 + 3C)`: the largest closeness fraction to an old extreme.
    pub fn observed_lambda(&self, evolution_constant: T) -> T {
        self.max_a / (T::one() + T::lit(3.0) * evolution_constant)
    }
}

/// `A_j` for every interior new node that falls into an old interval with
/// an extreme at one of its ends. When both ends are extremes the larger
/// value is kept and attributed to the nearer extreme.
pub fn compute_a_values<T: Real>(
    old: &GridSolution<T>,
    proposed: &Mesh<T>,
    evolution_constant: T,
) -> Vec<AValue<T>> {
    let values = old.values();
    let extremes = extremes_of(values);
    if extremes.is_empty() {
        return Vec::new();
    }
    let mut is_extreme = vec![false; values.len()];
    for e in &extremes {
        is_extreme[e.index] = true;
    }
    a_values_with(old.mesh(), &is_extreme, proposed, evolution_constant)
}

fn a_values_with<T: Real>(
    old_mesh: &Mesh<T>,
    is_extreme: &[bool],
    proposed: &Mesh<T>,
    evolution_constant: T,
) -> Vec<AValue<T>> {
    let x = old_mesh.nodes();
    let amp = T::one() + T::lit(3.0) * evolution_constant;
    let y = proposed.nodes();
    let mut out = Vec::new();
    // New nodes are sorted, so the containing interval only moves forward.
    let mut i = 0;
    for (j, &xj) in y.iter().enumerate().take(y.len() - 1).skip(1) {
        while i + 2 < x.len() && x[i + 1] <= xj {
            i += 1;
        }
        let (left, right) = (is_extreme[i], is_extreme[i + 1]);
        if !left && !right {
            continue;
        }
        let width = x[i + 1] - x[i];
        let from_left = ((x[i + 1] - xj) / width) * amp;
        let from_right = ((xj - x[i]) / width) * amp;
        let (value, extreme) = match (left, right) {
            (true, false) => (from_left, i),
            (false, true) => (from_right, i + 1),
            _ => {
                let nearer = if xj - x[i] <= x[i + 1] - xj { i } else { i + 1 };
                (from_left.max(from_right), nearer)
            }
        };
        out.push(AValue {
            node: j,
            interval: i,
            extreme,
            value,
        });
    }
    out
}

/// Pushes every new node with `A_j >= 1` away from its extreme by the
/// correction factor times its current distance, until all `A_j < 1`.
///
/// A node closer to its extreme than the correction factor times the
/// interval width is first moved out to that distance. A round whose moves
/// would reorder the nodes or more than halve a gap, a round facing a node
/// between two extremes that no position can satisfy, and the round after
/// [`PUSH_ROUNDS`] (or the last allowed one) are replaced by
/// [`project_out_of_zones`].
pub fn enforce_lambda_rule<T: Real>(
    old: &GridSolution<T>,
    proposed: &Mesh<T>,
    params: &LambdaRuleParams<T>,
) -> Result<(Mesh<T>, LambdaRuleReport<T>)> {
    if !old.mesh().same_endpoints(proposed) {
        return Err(MasError::InvalidMesh(
            "proposed mesh does not share the old endpoints".into(),
        ));
    }
    let values = old.values();
    let mut is_extreme = vec![false; values.len()];
    let extremes = extremes_of(values);
    for e in &extremes {
        is_extreme[e.index] = true;
    }
    let x = old.nodes();
    let eps = params.correction_factor;
    let amp = params.amplification();
    let half = T::lit(0.5);
    let mut mesh = proposed.clone();
    for round in 0..=params.max_rounds {
        let a = if extremes.is_empty() {
            Vec::new()
        } else {
            a_values_with(old.mesh(), &is_extreme, &mesh, params.evolution_constant)
        };
        let report = LambdaRuleReport::from_values(&a, round);
        if report.max_a < T::one() {
            return Ok((mesh, report));
        }
        if round == params.max_rounds {
            return Err(MasError::LambdaRuleNotConverged {
                rounds: round,
                max_a: report.max_a.as_f64(),
            });
        }

        let y = mesh.nodes();
        let mut next = y.to_vec();
        let mut hopeless = false;
        for av in a.iter().filter(|av| av.value >= T::one()) {
            let i = av.interval;
            hopeless |= is_extreme[i] && is_extreme[i + 1] && amp * half >= T::one();
            let d = y[av.node] - x[av.extreme];
            let reach = eps * (x[i + 1] - x[i]);
            next[av.node] = if d.abs() < reach {
                let away = if d > T::zero() || (d == T::zero() && av.extreme == i) {
                    T::one()
                } else {
                    -T::one()
                };
                x[av.extreme] + away * reach * (T::one() + eps)
            } else {
                y[av.node] + eps * d
            };
        }
        let obstructed = hopeless
            || round + 1 >= params.max_rounds.min(PUSH_ROUNDS)
            || next
                .windows(2)
                .zip(y.windows(2))
                .any(|(w, v)| !(w[1] - w[0] > (v[1] - v[0]) * half));
        if obstructed {
            next = project_out_of_zones(old.mesh(), &is_extreme, y, amp);
        }
        if let Some(w) = next.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(MasError::OrderingViolated { index: w + 1 });
        }
        mesh = Mesh::new(next)?;
    }
    unreachable!("loop returns on its last round")
}

/// Moves every interior node out of the closed zones where `A_j >= 1`.
///
/// The zone of an extreme reaches `theta = 1 - 1/(1 + 3C)` of each adjacent
/// old interval; overlapping zones merge. Nodes inside a zone leave through
/// the side they are on (relative to the extreme, or to the zone midpoint
/// for merged zones) and are spread evenly between the zone boundary and
/// the first node already outside it. Order is preserved by construction.
pub fn project_out_of_zones<T: Real>(old_mesh: &Mesh<T>, is_extreme: &[bool], nodes: &[T], amplification: T) -> Vec<T> {
    let x = old_mesh.nodes();
    let n = nodes.len();
    if !(amplification > T::one()) {
        return nodes.to_vec();
    }
    // Placing nodes exactly on the boundary would give A = 1.
    let theta = T::one() - (T::one() - T::lit(1e-6)) / amplification;
    let mut zones: Vec<(T, T, T, usize)> = Vec::new();
    for e in (1..x.len() - 1).filter(|&e| is_extreme[e]) {
        let lo = x[e] - theta * (x[e] - x[e - 1]);
        let hi = x[e] + theta * (x[e + 1] - x[e]);
        match zones.last_mut() {
            Some(z) if lo <= z.1 => {
                z.1 = hi;
                z.3 += 1;
                z.2 = (z.0 + z.1) * T::lit(0.5);
            }
            _ => zones.push((lo, hi, x[e], 1)),
        }
    }
    if zones.is_empty() {
        return nodes.to_vec();
    }

    // Stretch s lies between zone s-1 and zone s.
    let stretches = zones.len() + 1;
    let mut head = vec![Vec::new(); stretches];
    let mut middle = vec![Vec::new(); stretches];
    let mut tail = vec![Vec::new(); stretches];
    let mut z = 0;
    for (j, &yj) in nodes.iter().enumerate().take(n - 1).skip(1) {
        while z < zones.len() && zones[z].1 < yj {
            z += 1;
        }
        if z < zones.len() && zones[z].0 <= yj {
            if yj < zones[z].2 {
                tail[z].push(j);
            } else {
                head[z + 1].push(j);
            }
        } else {
            middle[z].push(j);
        }
    }

    let mut out = nodes.to_vec();
    let spread = |out: &mut Vec<T>, idx: &[usize], lo: T, hi: T| {
        let parts = T::from_count(idx.len() + 1);
        for (t, &j) in idx.iter().enumerate() {
            out[j] = lo + (hi - lo) * (T::from_count(t + 1) / parts);
        }
    };
    for s in 0..stretches {
        let lo = if s == 0 { nodes[0] } else { zones[s - 1].1 };
        let hi = if s == zones.len() { nodes[n - 1] } else { zones[s].0 };
        match (middle[s].first(), middle[s].last()) {
            (Some(&first), Some(&last)) => {
                spread(&mut out, &head[s], lo, nodes[first]);
                spread(&mut out, &tail[s], nodes[last], hi);
            }
            _ => {
                let all: Vec<usize> = head[s].iter().chain(&tail[s]).copied().collect();
                spread(&mut out, &all, lo, hi);
            }
        }
    }
    out
}

/// Evaluates the piecewise-linear interpolant of `old` at the nodes of `new_mesh`.
pub fn interpolate_update<T: Real>(old: &GridSolution<T>, new_mesh: &Mesh<T>) -> Result<GridSolution<T>> {
    let x = old.nodes();
    let u = old.values();
    let last = x.len() - 1;
    if new_mesh.a() < x[0] || new_mesh.b() > x[last] {
        return Err(MasError::InvalidMesh(format!(
            "new mesh [{}, {}] leaves [{}, {}]",
            new_mesh.a(),
            new_mesh.b(),
            x[0],
            x[last]
        )));
    }
    let mut values = Vec::with_capacity(new_mesh.len());
    let mut i = 0;
    for &y in new_mesh.nodes() {
        while i + 1 < last && x[i + 1] <= y {
            i += 1;
        }
        let v = if y == x[i] {
            u[i]
        } else if y == x[i + 1] {
            u[i + 1]
        } else {
            let t = (y - x[i]) / (x[i + 1] - x[i]);
            u[i] + (u[i + 1] - u[i]) * t
        };
        values.push(v);
    }
    GridSolution::new(new_mesh.clone(), values)
}

/// Outcome of re-projecting an old node onto the chord between two new nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionCheck<T> {
    /// Chord value obtained by interpolating twice.
    pub lhs: T,
    /// `u_i + h1 h2 / (h1 + h2) * (slope_right - slope_left)`.
    pub rhs: T,
    pub residual: T,
}

/// Interpolates `old` at `new_left` and `new_right` (on either side of
/// node `i`) and projects node `i` back onto that chord.
pub fn diffusion_identity_check<T: Real>(
    old: &GridSolution<T>,
    i: usize,
    new_left: T,
    new_right: T,
) -> Result<DiffusionCheck<T>> {
    let x = old.nodes();
    let u = old.values();
    if i == 0 || i + 1 >= x.len() {
        return Err(MasError::Domain(format!("node {i} is not interior")));
    }
    if !(new_left >= x[i - 1] && new_left <= x[i] && new_right >= x[i] && new_right <= x[i + 1])
        || !(new_right > new_left)
    {
        return Err(MasError::Domain(format!(
            "new nodes {new_left}, {new_right} do not bracket node {i}"
        )));
    }
    let slope_left = (u[i] - u[i - 1]) / (x[i] - x[i - 1]);
    let slope_right = (u[i + 1] - u[i]) / (x[i + 1] - x[i]);
    let h1 = x[i] - new_left;
    let h2 = new_right - x[i];
    let u_left = u[i] - slope_left * h1;
    let u_right = u[i] + slope_right * h2;
    let lhs = u_left + (u_right - u_left) * (h1 / (new_right - new_left));
    let rhs = u[i] + h1 * h2 / (h1 + h2) * (slope_right - slope_left);
    Ok(DiffusionCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Clipping of one old extreme observed at its nearest new node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtremeClip<T> {
    pub extreme: usize,
    pub kind: ExtremeKind,
    /// Measurement level: the neighbouring value closer to the extreme.
    pub level: T,
    /// `1 - distance / interval length` for the nearest new node.
    pub lambda: T,
    pub old_value: T,
    pub new_value: T,
}

impl<T: Real> ExtremeClip<T> {
    /// Signed overshoot beyond the level shrank at least by `lambda`.
    pub fn holds(&self, tol: T) -> bool {
        let sign = match self.kind {
            ExtremeKind::Max => T::one(),
            ExtremeKind::Min => -T::one(),
        };
        sign * (self.new_value - self.level) <= self.lambda * sign * (self.old_value - self.level) + tol
    }
}

/// For every strict extreme of `old`, the value the updated solution takes at
/// the new node nearest to it. Extremes whose nearest new node lies beyond
/// the adjacent old intervals are skipped.
pub fn extreme_clipping<T: Real>(old: &GridSolution<T>, updated: &GridSolution<T>) -> Vec<ExtremeClip<T>> {
    let x = old.nodes();
    let u = old.values();
    let y = updated.nodes();
    let v = updated.values();
    let mut out = Vec::new();
    for e in extremes_of(u) {
        let i = e.index;
        let k = y.partition_point(|&yj| yj < x[i]);
        let candidates = [k.checked_sub(1), (k < y.len()).then_some(k)];
        let Some(j) = candidates
            .into_iter()
            .flatten()
            .min_by(|&p, &q| {
                (y[p] - x[i])
                    .abs()
                    .partial_cmp(&(y[q] - x[i]).abs())
                    .expect("finite nodes")
            })
        else {
            continue;
        };
        let width = if y[j] >= x[i] { x[i + 1] - x[i] } else { x[i] - x[i - 1] };
        let dist = (y[j] - x[i]).abs();
        if dist > width {
            continue;
        }
        let level = match e.kind {
            ExtremeKind::Max => u[i - 1].max(u[i + 1]),
            ExtremeKind::Min => u[i - 1].min(u[i + 1]),
        };
        out.push(ExtremeClip {
            extreme: i,
            kind: e.kind,
            level,
            lambda: T::one() - dist / width,
            old_value: u[i],
            new_value: v[j],
        });
    }
    out
}

/// One pass of mesh reconstruction followed by the solution update.
#[derive(Clone, Debug, PartialEq)]
pub struct RemeshOutcome<T> {
    pub solution: GridSolution<T>,
    pub report: LambdaRuleReport<T>,
    /// Equidistribution defect of the uncorrected proposal, relative to the
    /// total monitor value.
    pub defect: T,
}

pub fn remesh_step<T: Real>(
    u: &GridSolution<T>,
    est: &EstimatorParams<T>,
    lam: &LambdaRuleParams<T>,
) -> Result<RemeshOutcome<T>> {
    let (proposed, monitor) = adapted_mesh(u, est)?;
    let defect = equidistribution_defect(&monitor, &proposed);
    let (mesh, report) = enforce_lambda_rule(u, &proposed, lam)?;
    let solution = interpolate_update(u, &mesh)?;
    Ok(RemeshOutcome {
        solution,
        report,
        defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_jump_initial, total_variation};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sol(nodes: &[f64], values: &[f64]) -> GridSolution<f64> {
        GridSolution::<f64>::new(Mesh::<f64>::new(nodes.to_vec()).unwrap(), values.to_vec()).unwrap()
    }

    fn mesh(nodes: &[f64]) -> Mesh<f64> {
        Mesh::<f64>::new(nodes.to_vec()).unwrap()
    }

    #[test]
    fn no_extremes_no_values() {
        let old = sol(&[0.0, 0.5, 1.0, 1.5], &[0.0, 1.0, 2.0, 3.0]);
        assert!(compute_a_values(&old, &mesh(&[0.0, 0.2, 0.9, 1.5]), 1.0).is_empty());
    }

    #[test]
    fn a_value_measures_closeness_to_the_extreme() {
        // peak at x = 1, intervals [0,1) and [1,2)
        let old = sol(&[-1.0, 0.0, 1.0, 2.0], &[0.0, 2.0, 1.0, 1.5]);
        // node 0 is not interior; extremes at old nodes 1 (max) and 2 (min)
        let a = compute_a_values(&old, &mesh(&[-1.0, -0.5, 0.5, 2.0]), 1.0);
        assert_eq!(a.len(), 2);
        // -0.5 in [-1, 0) with the extreme at the right end
        assert_eq!(a[0].extreme, 1);
        assert!((a[0].value - 0.5 * 4.0).abs() < 1e-15);
        // 0.5 in [0, 1), both ends extreme, tie goes to the left end
        assert_eq!(a[1].extreme, 1);
        assert!((a[1].value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn a_value_examples() {
        let old = sol(&[-1.0, 0.0, 1.0, 2.0], &[0.0, 1.0, 0.5, 0.0]);
        let a = compute_a_values(&old, &mesh(&[-1.0, 0.5, 1.0, 2.0]), 1.0);
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].node, a[0].interval, a[0].extreme), (1, 1, 1));
        assert!((a[0].value - 2.0).abs() < 1e-15);
        // node on the non-extreme end sits in the next interval, which is not adjacent
        assert!(a.iter().all(|v| v.node != 2));
        let b = compute_a_values(&old, &mesh(&[-1.0, 0.999_999_999, 2.0]), 1.0);
        assert!(b[0].value < 1e-8);
        // a node on the extreme itself
        let c = compute_a_values(&old, &mesh(&[-1.0, 0.0, 2.0]), 1.0);
        assert_eq!(c[0].value, 4.0);
    }

    #[test]
    fn lambda_rule_noop_when_satisfied() {
        let old = sol(&[-1.0, 0.0, 1.0, 2.0], &[0.0, 1.0, 0.5, 0.0]);
        let proposed = mesh(&[-1.0, 0.9, 1.5, 2.0]);
        let p = LambdaRuleParams::with_constant(1.0).unwrap();
        let (out, report) = enforce_lambda_rule(&old, &proposed, &p).unwrap();
        assert_eq!(out, proposed);
        assert_eq!(report.corrections_applied, 0);
        assert!(report.max_a < 1.0);
    }

    /// Scripted iteration of the multiplicative correction.
    fn rounds_oracle(mut d: f64, c: f64, eps: f64) -> usize {
        let mut rounds = 0;
        while (1.0 - d) * (1.0 + 3.0 * c) >= 1.0 {
            d *= 1.0 + eps;
            rounds += 1;
        }
        rounds
    }

    #[test]
    fn single_violation_takes_three_rounds() {
        let old = sol(&[-1.0, 0.0, 1.0, 2.0], &[0.0, 1.0, 0.5, 0.0]);
        let proposed = mesh(&[-1.0, 0.5, 1.8, 2.0]);
        let p = LambdaRuleParams::with_constant(1.0).unwrap();
        let (out, report) = enforce_lambda_rule(&old, &proposed, &p).unwrap();
        assert_eq!(rounds_oracle(0.5, 1.0, 0.2), 3);
        assert_eq!(report.corrections_applied, 3);
        assert!((out.nodes()[1] - 0.5 * 1.2f64.powi(3)).abs() < 1e-14);
        assert!(report.max_a < 1.0);
    }

    #[test]
    fn zero_constant_leaves_mesh_alone() {
        let old = sol(&[-1.0, 0.0, 1.0, 2.0], &[0.0, 1.0, 0.5, 0.0]);
        let proposed = mesh(&[-1.0, 0.1, 1.2, 2.0]);
        let p = LambdaRuleParams::with_constant(0.0).unwrap();
        let (out, report) = enforce_lambda_rule(&old, &proposed, &p).unwrap();
        assert_eq!(out, proposed);
        assert_eq!(report.corrections_applied, 0);
    }

    #[test]
    fn node_on_extreme_is_moved() {
        let old = sol(&[-1.0, 0.0, 1.0, 2.0], &[0.0, 1.0, 0.5, 0.0]);
        let proposed = mesh(&[-1.0, 0.0, 2.0]);
        let p = LambdaRuleParams::with_constant(1.0).unwrap();
        let (out, report) = enforce_lambda_rule(&old, &proposed, &p).unwrap();
        assert!(out.nodes()[1] > 0.75);
        assert!(report.max_a < 1.0);
    }

    #[test]
    fn crowded_nodes_keep_their_order() {
        let old = sol(&[0.0, 0.5, 1.0, 1.5, 2.0], &[0.0, 1.0, 0.8, 0.6, 0.0]);
        let proposed = mesh(&[0.0, 0.5, 0.501, 0.5011, 0.502, 0.9, 2.0]);
        let p = LambdaRuleParams::with_constant(0.5).unwrap();
        let (out, report) = enforce_lambda_rule(&old, &proposed, &p).unwrap();
        assert!(report.max_a < 1.0);
        assert!(out.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn node_between_two_extremes_is_projected() {
        // Max at 1 and min at 2 with C = 1: every point of (1, 2) has A >= 2.
        let old = sol(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, -1.0, 0.0]);
        let proposed = mesh(&[0.0, 1.5, 3.0]);
        let p = LambdaRuleParams::with_constant(1.0).unwrap();
        let (out, report) = enforce_lambda_rule(&old, &proposed, &p).unwrap();
        assert!(report.max_a < 1.0);
        assert_eq!(report.corrections_applied, 1);
        // The node sits at the split point and leaves to the right.
        let y = out.nodes()[1];
        assert!(y > 2.0 + 0.75 - 1e-9 && y < 3.0);
    }

    #[test]
    fn projection_spreads_and_preserves_order() {
        let old = mesh(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let is_extreme = [false, false, true, false, false];
        // amp = 2 gives a zone of half an interval on each side of 2.
        let nodes = [0.0, 1.0, 1.6, 1.9, 2.1, 2.2, 3.0, 4.0];
        let out = project_out_of_zones(&old, &is_extreme, &nodes, 2.0);
        assert!(out.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(&out[..2], &nodes[..2]);
        assert_eq!(&out[6..], &nodes[6..]);
        assert!(out[2] < 1.5 && out[3] < 1.5 && out[2] > 1.0);
        assert!(out[4] > 2.5 && out[5] > out[4] && out[5] < 3.0);
        let unaffected = project_out_of_zones(&old, &is_extreme, &nodes, 1.0);
        assert_eq!(unaffected, nodes.to_vec());
    }

    #[test]
    fn exhausted_rounds_are_reported() {
        let old = sol(&[-1.0, 0.0, 1.0, 2.0], &[0.0, 1.0, 0.5, 0.0]);
        let proposed = mesh(&[-1.0, 0.01, 2.0]);
        let p = LambdaRuleParams::new(1.0, 0.2, 0).unwrap();
        assert!(matches!(
            enforce_lambda_rule(&old, &proposed, &p),
            Err(MasError::LambdaRuleNotConverged { rounds: 0, .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(LambdaRuleParams::new(1.0, 0.0, 50).is_err());
        assert!(LambdaRuleParams::new(1.0, 1.0, 50).is_err());
        assert!(LambdaRuleParams::new(-1.0, 0.2, 50).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let old = sol(&[0.0, 0.25, 0.75, 1.0], &[1.0, -2.0, 4.0, 0.5]);
        let same = interpolate_update(&old, old.mesh()).unwrap();
        assert_eq!(same.values(), old.values());
        let mid = interpolate_update(&old, &mesh(&[0.0, 0.5, 1.0])).unwrap();
        assert_eq!(mid.values()[1], 1.0);
        assert_eq!(mid.values()[0], 1.0);
        assert_eq!(mid.values()[2], 0.5);
    }

    #[test]
    fn interpolation_onto_jump_cluster() {
        let m = Mesh::<f64>::uniform(0.0, 1.0, 50).unwrap();
        let old = make_jump_initial(&m, 0.5, 1.0, 0.0).unwrap();
        let mut nodes: Vec<f64> = (0..40).map(|k| 0.45 + 0.1 * k as f64 / 39.0).collect();
        nodes.insert(0, 0.0);
        nodes.push(1.0);
        let new = interpolate_update(&old, &mesh(&nodes)).unwrap();
        assert!(total_variation(&new) <= total_variation(&old) + 1e-15);
    }

    #[test]
    fn diffusion_identity_examples() {
        let peak = sol(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        let c = diffusion_identity_check(&peak, 1, 0.25, 0.75).unwrap();
        assert!((c.rhs - 0.5).abs() < 1e-15);
        assert!((c.lhs - 0.5).abs() < 1e-15);
        let edge = diffusion_identity_check(&peak, 1, 0.5, 0.75).unwrap();
        assert_eq!(edge.rhs, 1.0);
        let line = sol(&[0.0, 0.4, 1.0], &[0.0, 0.8, 2.0]);
        let c = diffusion_identity_check(&line, 1, 0.1, 0.9).unwrap();
        assert!((c.rhs - 0.8).abs() < 1e-15);
        assert!(diffusion_identity_check(&peak, 1, 0.6, 0.7).is_err());
        assert!(diffusion_identity_check(&peak, 0, 0.0, 0.1).is_err());
    }

    #[test]
    fn diffusion_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x0 = rng.gen_range(-1.0..0.0);
            let x2 = rng.gen_range(0.01..1.0);
            let u1 = rng.gen_range(-2.0..2.0);
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let old = sol(
                &[x0, 0.0, x2],
                &[u1 - s * rng.gen_range(0.01..3.0), u1, u1 - s * rng.gen_range(0.01..3.0)],
            );
            let l = rng.gen_range(x0..0.0);
            let r = rng.gen_range(0.0..x2);
            let c = diffusion_identity_check(&old, 1, l, r).unwrap();
            assert!(c.residual <= 1e-12 * u1.abs() + 1e-14, "{c:?}");
        }
    }

    #[test]
    fn remesh_constant_solution() {
        let m = Mesh::<f64>::new(vec![0.0, 0.1, 0.15, 0.5, 0.9, 1.0]).unwrap();
        let u = GridSolution::<f64>::constant(m, 2.0).unwrap();
        let out = remesh_step(
            &u,
            &EstimatorParams::default(),
            &LambdaRuleParams::with_constant(1.0).unwrap(),
        )
        .unwrap();
        let uni = Mesh::<f64>::uniform(0.0, 1.0, 6).unwrap();
        for (a, b) in out.solution.nodes().iter().zip(uni.nodes()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(out.solution.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn remesh_jump_refines_near_the_jump() {
        let m = Mesh::<f64>::uniform(0.0, 1.0, 100).unwrap();
        let u = make_jump_initial(&m, 0.5, 1.0, 0.0).unwrap();
        let out = remesh_step(
            &u,
            &EstimatorParams::default(),
            &LambdaRuleParams::with_constant(1.0).unwrap(),
        )
        .unwrap();
        let x = out.solution.nodes();
        let near = x
            .windows(2)
            .filter(|w| (w[0] - 0.5).abs() < 0.05)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        assert!(out.solution.mesh().max_gap() >= 5.0 * near);
        assert!(out.defect <= 1e-12);
    }

    #[test]
    fn remesh_preserves_monotone_ramp_variation() {
        let m = Mesh::<f64>::uniform(0.0, 1.0, 60).unwrap();
        let values: Vec<f64> = m.nodes().iter().map(|&x| (3.0 * x).tanh()).collect();
        let u = GridSolution::<f64>::new(m, values).unwrap();
        let out = remesh_step(
            &u,
            &EstimatorParams::default(),
            &LambdaRuleParams::with_constant(1.0).unwrap(),
        )
        .unwrap();
        assert!((total_variation(&out.solution) - total_variation(&u)).abs() < 1e-12);
    }

    fn random_solution(gaps: &[f64], values: &[f64]) -> GridSolution<f64> {
        let mut nodes = vec![0.0];
        for g in gaps {
            let last = *nodes.last().unwrap();
            nodes.push(last + g);
        }
        let n = nodes.len();
        GridSolution::<f64>::new(Mesh::<f64>::new(nodes).unwrap(), values[..n].to_vec()).unwrap()
    }

    proptest! {
        #[test]
        fn interpolation_never_increases_variation(
            gaps in prop::collection::vec(0.01f64..1.0, 3..30),
            values in prop::collection::vec(-5.0f64..5.0, 31),
            probes in prop::collection::vec(0.0f64..1.0, 1..40),
        ) {
            let old = random_solution(&gaps, &values);
            let (a, b) = (old.mesh().a(), old.mesh().b());
            let mut nodes: Vec<f64> = probes.iter().map(|t| a + t * (b - a)).collect();
            nodes.push(a);
            nodes.push(b);
            nodes.sort_by(|p, q| p.partial_cmp(q).unwrap());
            nodes.dedup();
            prop_assume!(nodes.len() >= 3);
            let new = interpolate_update(&old, &Mesh::<f64>::new(nodes).unwrap()).unwrap();
            prop_assert!(total_variation(&new) <= total_variation(&old) * (1.0 + 1e-14) + 1e-14);
            prop_assert!(new.min_value() >= old.min_value());
            prop_assert!(new.max_value() <= old.max_value());
        }

        #[test]
        fn lambda_rule_outcome(
            gaps in prop::collection::vec(0.05f64..1.0, 5..30),
            values in prop::collection::vec(-1.0f64..1.0, 31),
            c in 0.0f64..2.0,
        ) {
            let old = random_solution(&gaps, &values);
            let est = EstimatorParams::new(1e-3, 0.9).unwrap();
            let lam = LambdaRuleParams::with_constant(c).unwrap();
            let (proposed, _) = adapted_mesh(&old, &est).unwrap();
            match enforce_lambda_rule(&old, &proposed, &lam) {
                Ok((mesh, report)) => {
                    prop_assert!(report.max_a < 1.0);
                    prop_assert!(report.observed_lambda(c) * (1.0 + 3.0 * c) < 1.0);
                    let updated = interpolate_update(&old, &mesh).unwrap();
                    for clip in extreme_clipping(&old, &updated) {
                        prop_assert!(clip.holds(1e-12), "{:?}", clip);
                    }
                }
                Err(MasError::LambdaRuleNotConverged { .. }) => {}
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }
}
