//! Meshes, nodal solutions, derived cell geometry and problem definitions.

use std::fmt;
use std::sync::Arc;

use crate::error::{MasError, Result};
use crate::scalar::Real;

/// Strictly increasing node sequence covering `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    nodes: Vec<T>,
}

impl<T: Real> Mesh<T> {
    pub fn new(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(MasError::InvalidMesh(format!(
                "need at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if let Some(i) = nodes.iter().position(|x| !x.is_finite()) {
            return Err(MasError::InvalidMesh(format!("node {i} is not finite")));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(MasError::InvalidMesh(format!(
                "nodes {} and {} are not strictly increasing ({} >= {})",
                i,
                i + 1,
                nodes[i],
                nodes[i + 1]
            )));
        }
        Ok(Self { nodes })
    }

    pub fn uniform(a: T, b: T, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(MasError::InvalidMesh(format!("need at least 3 nodes, got {n}")));
        }
        if !(b > a) {
            return Err(MasError::InvalidMesh(format!("empty domain [{a}, {b}]")));
        }
        let step = (b - a) / T::from_count(n - 1);
        let mut nodes: Vec<T> = (0..n).map(|i| a + step * T::from_count(i)).collect();
        nodes[n - 1] = b;
        Self::new(nodes)
    }

    #[inline]
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn a(&self) -> T {
        self.nodes[0]
    }

    #[inline]
    pub fn b(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    /// Node gaps `x_{i+1} - x_i`, length `N - 1`.
    pub fn gaps(&self) -> Vec<T> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn min_gap(&self) -> T {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::infinity(), T::min)
    }

    pub fn max_gap(&self) -> T {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), T::max)
    }

    /// Index `i` of the half-open interval `[x_i, x_{i+1})` containing `x`.
    /// Points at or beyond `b` map to the last interval.
    pub fn locate(&self, x: T) -> usize {
        let n = self.nodes.len();
        let upper = self.nodes.partition_point(|&node| node <= x);
        upper.saturating_sub(1).min(n - 2)
    }

    pub fn same_endpoints(&self, other: &Mesh<T>) -> bool {
        self.a() == other.a() && self.b() == other.b()
    }
}

/// Nodal values paired with the mesh they live on.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution<T> {
    mesh: Mesh<T>,
    values: Vec<T>,
}

impl<T: Real> GridSolution<T> {
    pub fn new(mesh: Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(MasError::InvalidSolution(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MasError::InvalidSolution(format!("value {i} is not finite")));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Mesh<T>, value: T) -> Result<Self> {
        let values = vec![value; mesh.len()];
        Self::new(mesh, values)
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    #[inline]
    pub fn nodes(&self) -> &[T] {
        self.mesh.nodes()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_parts(self) -> (Mesh<T>, Vec<T>) {
        (self.mesh, self.values)
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// How cell widths were derived from the nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellLayout {
    /// Nodes are the exact midpoints of their cells.
    Centered,
    /// Cell interfaces sit at the midpoints of node gaps; boundary cells are
    /// mirrored across the domain ends.
    Dual,
}

/// Cell widths `h_i` attached to the nodes of a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry<T> {
    widths: Vec<T>,
    centers: Vec<T>,
    layout: CellLayout,
}

impl<T: Real> CellGeometry<T> {
    /// Cells whose midpoints are exactly the mesh nodes, so that
    /// `x_i - x_{i-1} = (h_i + h_{i-1}) / 2`.
    ///
    /// The widths are fixed by the nodes up to one alternating mode
    /// `(-1)^i t`; `t` is chosen to maximise the smallest width. Fails when no
    /// choice yields strictly positive widths.
    pub fn centered(mesh: &Mesh<T>) -> Result<Self> {
        let x = mesh.nodes();
        let n = x.len();
        let two = T::lit(2.0);
        let mut q = vec![T::zero(); n];
        for i in 1..n {
            q[i] = two * (x[i] - x[i - 1]) - q[i - 1];
        }
        let min_even = q.iter().step_by(2).copied().fold(T::infinity(), T::min);
        let min_odd = q.iter().skip(1).step_by(2).copied().fold(T::infinity(), T::min);
        let shift = (min_odd - min_even) / two;
        let widths: Vec<T> = q
            .iter()
            .enumerate()
            .map(|(i, &qi)| if i % 2 == 0 { qi + shift } else { qi - shift })
            .collect();
        let min_width = widths.iter().copied().fold(T::infinity(), T::min);
        if !(min_width > T::zero()) {
            return Err(MasError::InvalidMesh(format!(
                "no cell-centred geometry with positive widths (best minimum width {min_width})"
            )));
        }
        Ok(Self {
            widths,
            centers: x.to_vec(),
            layout: CellLayout::Centered,
        })
    }

    /// Cells bounded by the midpoints of consecutive node gaps:
    /// `h_i = (x_{i+1} - x_{i-1}) / 2`, with `h_0 = x_1 - x_0` and
    /// `h_{N-1} = x_{N-1} - x_{N-2}` at the ends.
    pub fn dual(mesh: &Mesh<T>) -> Self {
        let x = mesh.nodes();
        let n = x.len();
        let half = T::lit(0.5);
        let mut widths = Vec::with_capacity(n);
        widths.push(x[1] - x[0]);
        for i in 1..n - 1 {
            widths.push((x[i + 1] - x[i - 1]) * half);
        }
        widths.push(x[n - 1] - x[n - 2]);
        Self {
            widths,
            centers: x.to_vec(),
            layout: CellLayout::Dual,
        }
    }

    /// Geometry used by the time-stepping schemes.
    pub fn for_mesh(mesh: &Mesh<T>) -> Self {
        Self::dual(mesh)
    }

    #[inline]
    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    #[inline]
    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    #[inline]
    pub fn layout(&self) -> CellLayout {
        self.layout
    }

    pub fn min_width(&self) -> T {
        self.widths.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Flux function of a scalar conservation law `u_t + f(u)_x = 0`.
pub trait Flux<T>: Send + Sync {
    fn flux(&self, u: T) -> T;
    /// Wave speed `f'(u)`.
    fn speed(&self, u: T) -> T;
    fn name(&self) -> &str;
}

/// Linear transport `f(u) = c u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transport<T> {
    pub velocity: T,
}

impl<T: Real> Flux<T> for Transport<T> {
    fn flux(&self, u: T) -> T {
        self.velocity * u
    }
    fn speed(&self, _u: T) -> T {
        self.velocity
    }
    fn name(&self) -> &str {
        "transport"
    }
}

/// Inviscid Burgers `f(u) = u^2 / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Burgers;

impl<T: Real> Flux<T> for Burgers {
    fn flux(&self, u: T) -> T {
        u * u * T::lit(0.5)
    }
    fn speed(&self, u: T) -> T {
        u
    }
    fn name(&self) -> &str {
        "burgers"
    }
}

/// Riemann data `high` for `x <= x0`, `low` for `x > x0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpInitial<T> {
    pub x0: T,
    pub high: T,
    pub low: T,
}

impl<T: Real> JumpInitial<T> {
    pub fn eval(&self, x: T) -> T {
        if x <= self.x0 {
            self.high
        } else {
            self.low
        }
    }

    /// Total variation of the continuous initial condition.
    pub fn variation(&self) -> T {
        (self.high - self.low).abs()
    }
}

/// A scalar conservation law on `[a, b]` with jump initial data.
#[derive(Clone)]
pub struct Problem<T> {
    pub flux: Arc<dyn Flux<T>>,
    pub initial: JumpInitial<T>,
    pub a: T,
    pub b: T,
    pub final_time: T,
}

impl<T: Real> fmt::Debug for Problem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("flux", &self.flux.name())
            .field("initial", &self.initial)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("final_time", &self.final_time)
            .finish()
    }
}

impl<T: Real> Problem<T> {
    pub fn new(
        flux: Arc<dyn Flux<T>>,
        initial: JumpInitial<T>,
        a: T,
        b: T,
        final_time: T,
    ) -> Result<Self> {
        if !(b > a) {
            return Err(MasError::Domain(format!("empty domain [{a}, {b}]")));
        }
        if !(initial.x0 > a && initial.x0 < b) {
            return Err(MasError::Domain(format!(
                "jump location {} outside ({a}, {b})",
                initial.x0
            )));
        }
        if !(final_time >= T::zero()) || !final_time.is_finite() {
            return Err(MasError::Domain(format!("final time {final_time} must be >= 0")));
        }
        // f' must be non-decreasing on the data range for a convex flux.
        let lo = initial.high.min(initial.low);
        let hi = initial.high.max(initial.low);
        let samples = 16;
        let mut prev = flux.speed(lo);
        for k in 1..=samples {
            let u = lo + (hi - lo) * T::from_count(k) / T::from_count(samples);
            let s = flux.speed(u);
            if s < prev {
                return Err(MasError::Domain(format!(
                    "flux '{}' is not convex on [{lo}, {hi}]",
                    flux.name()
                )));
            }
            prev = s;
        }
        Ok(Self {
            flux,
            initial,
            a,
            b,
            final_time,
        })
    }

    /// Transport with unit velocity and the unit jump at `x0` on `[0, 1]`.
    pub fn transport(x0: T, final_time: T) -> Result<Self> {
        Self::new(
            Arc::new(Transport { velocity: T::one() }),
            JumpInitial {
                x0,
                high: T::one(),
                low: T::zero(),
            },
            T::zero(),
            T::one(),
            final_time,
        )
    }

    /// Burgers with the unit jump at `x0` on `[0, 1]`.
    pub fn burgers(x0: T, final_time: T) -> Result<Self> {
        Self::new(
            Arc::new(Burgers),
            JumpInitial {
                x0,
                high: T::one(),
                low: T::zero(),
            },
            T::zero(),
            T::one(),
            final_time,
        )
    }
}

/// Samples the jump `high`/`low` at the nodes of `mesh`.
pub fn make_jump_initial<T: Real>(mesh: &Mesh<T>, x0: T, high: T, low: T) -> Result<GridSolution<T>> {
    if !(x0 > mesh.a() && x0 < mesh.b()) {
        return Err(MasError::Domain(format!(
            "jump location {x0} outside ({}, {})",
            mesh.a(),
            mesh.b()
        )));
    }
    let init = JumpInitial { x0, high, low };
    let values = mesh.nodes().iter().map(|&x| init.eval(x)).collect();
    GridSolution::new(mesh.clone(), values)
}

/// Discrete total variation `sum |u_{i+1} - u_i|`.
pub fn total_variation<T: Real>(u: &GridSolution<T>) -> T {
    variation_of(u.values())
}

pub(crate) fn variation_of<T: Real>(values: &[T]) -> T {
    values
        .windows(2)
        .fold(T::zero(), |acc, w| acc + (w[1] - w[0]).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtremeKind {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Extreme {
    pub index: usize,
    pub kind: ExtremeKind,
}

/// Strict interior local extremes. Plateaus and endpoints never qualify.
pub fn detect_extremes<T: Real>(u: &GridSolution<T>) -> Vec<Extreme> {
    extremes_of(u.values())
}

pub(crate) fn extremes_of<T: Real>(v: &[T]) -> Vec<Extreme> {
    let mut out = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] > v[i - 1] && v[i] > v[i + 1] {
            out.push(Extreme {
                index: i,
                kind: ExtremeKind::Max,
            });
        } else if v[i] < v[i - 1] && v[i] < v[i + 1] {
            out.push(Extreme {
                index: i,
                kind: ExtremeKind::Min,
            });
        }
    }
    out
}
