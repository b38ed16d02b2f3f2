//! Curvature estimator, monitor function and equidistribution.
//!
//! The estimator measures how far the discrete solution is from being
//! locally linear. Its piecewise-linear interpolant is integrated into a
//! strictly increasing monitor function, and the new mesh places one equal
//! share of the total monitor value in every interval.

use crate::error::{MasError, Result};
use crate::grid::{GridSolution, Mesh};
use crate::scalar::Real;

/// Regularisation applied to raw estimator values: clamp, floor, then power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorParams<T> {
    pub floor: T,
    pub power: T,
    /// Upper clamp applied before the floor.
    pub ceiling: T,
}

impl<T: Real> EstimatorParams<T> {
    pub fn new(floor: T, power: T) -> Result<Self> {
        if !(floor > T::zero()) || !floor.is_finite() {
            return Err(MasError::Config(format!("estimator floor must be > 0, got {floor}")));
        }
        if !(power > T::zero() && power <= T::one()) {
            return Err(MasError::Config(format!(
                "estimator power must lie in (0, 1], got {power}"
            )));
        }
        Ok(Self {
            floor,
            power,
            ceiling: T::lit(DEFAULT_CEILING).max(floor),
        })
    }

    pub fn with_ceiling(self, ceiling: T) -> Result<Self> {
        if !(ceiling >= self.floor) {
            return Err(MasError::Config(format!(
                "estimator ceiling must be >= floor {}, got {ceiling}",
                self.floor
            )));
        }
        Ok(Self { ceiling, ..self })
    }
}

impl<T: Real> Default for EstimatorParams<T> {
    fn default() -> Self {
        Self {
            floor: T::lit(DEFAULT_FLOOR),
            power: T::lit(0.9),
            ceiling: T::lit(DEFAULT_CEILING),
        }
    }
}

pub const DEFAULT_FLOOR: f64 = 0.1;
/// About the curvature of a fully resolved jump corner; larger values only
/// come from oscillations on tiny gaps.
pub const DEFAULT_CEILING: f64 = 2.0;

/// Discrete curvature at every node. Interior values follow the
/// three-point formula; the two endpoints copy their interior neighbour.
pub fn curvature_estimator<T: Real>(u: &GridSolution<T>) -> Vec<T> {
    let x = u.nodes();
    let v = u.values();
    let n = x.len();
    let one = T::one();
    let two = T::lit(2.0);
    let mut k = vec![T::zero(); n];
    for i in 1..n - 1 {
        let left = (v[i] - v[i - 1]) / (x[i] - x[i - 1]);
        let right = (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
        let chord = (v[i + 1] - v[i - 1]) / (x[i + 1] - x[i - 1]);
        let numerator = two / (x[i + 1] - x[i - 1]) * (left - right).abs();
        // Factor the square root so that steep slopes do not overflow.
        let denominator =
            (one + left * left).sqrt() * (one + right * right).sqrt() * (one + chord * chord).sqrt();
        k[i] = numerator / denominator;
    }
    k[0] = k[1];
    k[n - 1] = k[n - 2];
    k
}

/// `max(min(K_i, ceiling), floor)^power` for every entry.
pub fn regularize<T: Real>(k: &[T], params: &EstimatorParams<T>) -> Vec<T> {
    k.iter()
        .map(|&ki| ki.min(params.ceiling).max(params.floor).powf(params.power))
        .collect()
}

/// Nodal values of the monitor function `M(x_i) = \int_a^{x_i} I_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorTable<T> {
    nodes: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> MonitorTable<T> {
    #[inline]
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    #[inline]
    pub fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    pub fn total(&self) -> T {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Piecewise-linear monitor value at `x`, clamped to the domain.
    pub fn eval(&self, x: T) -> T {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.cumulative[0];
        }
        if x >= self.nodes[n - 1] {
            return self.cumulative[n - 1];
        }
        let i = self.nodes.partition_point(|&node| node <= x) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (m0, m1) = (self.cumulative[i], self.cumulative[i + 1]);
        m0 + (m1 - m0) * ((x - x0) / (x1 - x0))
    }
}

/// Exact trapezoid integration of the piecewise-linear estimator interpolant.
pub fn build_monitor<T: Real>(mesh: &Mesh<T>, k: &[T]) -> Result<MonitorTable<T>> {
    let x = mesh.nodes();
    if k.len() != x.len() {
        return Err(MasError::InvalidSolution(format!(
            "{} estimator values for {} nodes",
            k.len(),
            x.len()
        )));
    }
    if let Some(i) = k.iter().position(|&ki| !(ki > T::zero()) || !ki.is_finite()) {
        return Err(MasError::InvalidSolution(format!(
            "estimator value {i} is not strictly positive ({})",
            k[i]
        )));
    }
    let half = T::lit(0.5);
    let mut cumulative = Vec::with_capacity(x.len());
    cumulative.push(T::zero());
    for i in 1..x.len() {
        let prev = cumulative[i - 1];
        let next = prev + (x[i] - x[i - 1]) * (k[i - 1] + k[i]) * half;
        // Increments below the resolution of the running sum leave it flat.
        if next < prev {
            return Err(MasError::NonIncreasingMonitor { index: i });
        }
        cumulative.push(next);
    }
    Ok(MonitorTable {
        nodes: x.to_vec(),
        cumulative,
    })
}

/// New mesh of `n` nodes carrying equal monitor increments `M_total / (n - 1)`.
///
/// Single forward sweep over the monitor breakpoints, O(n + nodes).
pub fn equidistribute<T: Real>(monitor: &MonitorTable<T>, n: usize) -> Result<Mesh<T>> {
    let x = monitor.nodes();
    let m = monitor.cumulative();
    if n < 3 {
        return Err(MasError::InvalidMesh(format!("need at least 3 nodes, got {n}")));
    }
    if let Some(i) = m.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(MasError::NonIncreasingMonitor { index: i + 1 });
    }
    let total = monitor.total();
    if !(total > m[0]) {
        return Err(MasError::NonIncreasingMonitor { index: m.len() - 1 });
    }
    let intervals = T::from_count(n - 1);
    let mut out = Vec::with_capacity(n);
    out.push(x[0]);
    let mut i = 0;
    for k in 1..n - 1 {
        let level = total * T::from_count(k) / intervals;
        while m[i + 1] < level {
            i += 1;
        }
        let xk = if m[i] == level {
            x[i]
        } else if m[i + 1] == level {
            x[i + 1]
        } else {
            x[i] + (x[i + 1] - x[i]) * ((level - m[i]) / (m[i + 1] - m[i]))
        };
        out.push(xk);
    }
    out.push(x[x.len() - 1]);
    Mesh::new(out)
}

/// Largest deviation of the monitor increments over `mesh` from the equal
/// share, relative to the total monitor value.
pub fn equidistribution_defect<T: Real>(monitor: &MonitorTable<T>, mesh: &Mesh<T>) -> T {
    let total = monitor.total();
    let share = total / T::from_count(mesh.len() - 1);
    let levels: Vec<T> = mesh.nodes().iter().map(|&x| monitor.eval(x)).collect();
    levels
        .windows(2)
        .map(|w| ((w[1] - w[0]) - share).abs())
        .fold(T::zero(), T::max)
        / total
}

/// Estimator, regularisation, monitor and equidistribution in one call.
pub fn adapted_mesh<T: Real>(
    u: &GridSolution<T>,
    params: &EstimatorParams<T>,
) -> Result<(Mesh<T>, MonitorTable<T>)> {
    let k = regularize(&curvature_estimator(u), params);
    let monitor = build_monitor(u.mesh(), &k)?;
    let mesh = equidistribute(&monitor, u.len())?;
    Ok((mesh, monitor))
}
