use crate::error::{validation, Result};
use nalgebra::DVector;

/// Uniform discretization of the horizon `[0, T]` into `num_steps` steps.
///
/// Node `k` sits at `(k / N) * T`, so the first and last nodes are exactly
/// `0` and `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    num_steps: usize,
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Builds a uniform grid with `num_steps + 1` nodes over `[0, horizon]`.
    pub fn uniform(horizon: f64, num_steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(validation(format!(
                "grid horizon must be finite and positive, got {horizon}"
            )));
        }
        if num_steps < 2 {
            return Err(validation(format!(
                "grid needs at least 2 steps, got {num_steps}"
            )));
        }
        let n = num_steps as f64;
        let nodes = (0..=num_steps).map(|k| (k as f64 / n) * horizon).collect();
        Ok(TimeGrid {
            horizon,
            num_steps,
            nodes,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    /// Number of nodes, `num_steps + 1`.
    pub fn num_nodes(&self) -> usize {
        self.num_steps + 1
    }

    /// Constant step size `T / N`.
    pub fn spacing(&self) -> f64 {
        self.horizon / self.num_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the node closest to `t`; errors when `t` is outside the grid.
    pub fn nearest_node(&self, t: f64) -> Result<usize> {
        let h = self.spacing();
        if !t.is_finite() || t < -0.5 * h || t > self.horizon + 0.5 * h {
            return Err(validation(format!(
                "time {t} outside grid range [0, {}]",
                self.horizon
            )));
        }
        Ok(((t / h).round() as usize).min(self.num_steps))
    }
}

/// Time-indexed samples of a vector signal on a [`TimeGrid`].
///
/// Immutable after construction; solvers always produce fresh trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    values: Vec<DVector<f64>>,
    dim: usize,
}

impl Trajectory {
    /// One value per grid node, all of the same dimension `>= 1`.
    pub fn new(grid: TimeGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(validation(format!(
                "trajectory needs {} samples (one per node), got {}",
                grid.num_nodes(),
                values.len()
            )));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(validation("trajectory samples must have dimension >= 1"));
        }
        if let Some(bad) = values.iter().position(|v| v.len() != dim) {
            return Err(validation(format!(
                "trajectory sample {bad} has dimension {}, expected {dim}",
                values[bad].len()
            )));
        }
        Ok(Trajectory { grid, values, dim })
    }

    /// Constant signal `value` at every node.
    pub fn constant(grid: TimeGrid, value: DVector<f64>) -> Result<Self> {
        let values = vec![value; grid.num_nodes()];
        Trajectory::new(grid, values)
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Result<Self> {
        Trajectory::constant(grid, DVector::zeros(dim))
    }

    /// Scalar trajectory from raw samples.
    pub fn from_scalar_samples(grid: TimeGrid, samples: Vec<f64>) -> Result<Self> {
        let values = samples.into_iter().map(|v| DVector::from_vec(vec![v])).collect();
        Trajectory::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples (= number of grid nodes).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, k: usize) -> &DVector<f64> {
        &self.values[k]
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub(crate) fn same_layout(&self, other: &Trajectory) -> Result<()> {
        if self.grid != other.grid {
            return Err(validation("trajectories live on different grids"));
        }
        if self.dim != other.dim {
            return Err(validation(format!(
                "trajectory dimensions differ: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// Max over nodes of the Euclidean norm of the pointwise difference.
pub fn trajectory_sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    a.same_layout(b)?;
    let mut sup: f64 = 0.0;
    for (va, vb) in a.values.iter().zip(&b.values) {
        sup = sup.max((va - vb).norm());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_traj(grid: TimeGrid, samples: &[f64]) -> Trajectory {
        Trajectory::from_scalar_samples(grid, samples.to_vec()).unwrap()
    }

    #[test]
    fn uniform_grid_nodes() {
        let g = TimeGrid::uniform(6.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.5, 3.0, 4.5, 6.0]);
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn uniform_grid_rejects_bad_inputs() {
        assert!(TimeGrid::uniform(0.0, 10).is_err());
        assert!(TimeGrid::uniform(-1.0, 10).is_err());
        assert!(TimeGrid::uniform(f64::NAN, 10).is_err());
        assert!(TimeGrid::uniform(1.0, 1).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
    }

    #[test]
    fn grid_endpoints_are_exact() {
        for &(t, n) in &[(6.0, 2400), (1.0, 7), (0.3, 13), (1e-3, 999)] {
            let g = TimeGrid::uniform(t, n).unwrap();
            assert_eq!(g.node(0), 0.0);
            assert_eq!(g.node(n), t);
        }
    }

    #[test]
    fn sup_distance_examples() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let a = scalar_traj(g.clone(), &[0.0, 1.0, 0.0]);
        assert_eq!(trajectory_sup_distance(&a, &a).unwrap(), 0.0);

        let b = scalar_traj(g.clone(), &[0.1, 1.1, 0.1]);
        assert!((trajectory_sup_distance(&a, &b).unwrap() - 0.1).abs() < 1e-15);

        let c = scalar_traj(g, &[0.0, 0.0, 2.0]);
        assert_eq!(trajectory_sup_distance(&a, &c).unwrap(), 2.0);
    }

    #[test]
    fn sup_distance_rejects_mismatches() {
        let g1 = TimeGrid::uniform(1.0, 2).unwrap();
        let g2 = TimeGrid::uniform(1.0, 3).unwrap();
        let a = scalar_traj(g1.clone(), &[0.0, 0.0, 0.0]);
        let b = scalar_traj(g2, &[0.0; 4]);
        assert!(trajectory_sup_distance(&a, &b).is_err());

        let c = Trajectory::zeros(g1, 2).unwrap();
        assert!(trajectory_sup_distance(&a, &c).is_err());
    }

    #[test]
    fn trajectory_validates_shape() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        assert!(Trajectory::new(g.clone(), vec![DVector::zeros(1); 2]).is_err());
        let mixed = vec![DVector::zeros(1), DVector::zeros(2), DVector::zeros(1)];
        assert!(Trajectory::new(g.clone(), mixed).is_err());
        assert!(Trajectory::new(g, vec![DVector::zeros(0); 3]).is_err());
    }

    #[test]
    fn nearest_node_rounds_and_bounds() {
        let g = TimeGrid::uniform(6.0, 4).unwrap();
        assert_eq!(g.nearest_node(0.0).unwrap(), 0);
        assert_eq!(g.nearest_node(1.4).unwrap(), 1);
        assert_eq!(g.nearest_node(6.0).unwrap(), 4);
        assert!(g.nearest_node(7.0).is_err());
        assert!(g.nearest_node(-1.0).is_err());
    }

    proptest! {
        // Node spacing stays within 4 ulps (at the horizon's scale) of T/N.
        #[test]
        fn spacing_is_uniform(t in 1e-6..1e6f64, n in 2usize..2000) {
            let g = TimeGrid::uniform(t, n).unwrap();
            let h = g.spacing();
            let ulp = t * f64::EPSILON;
            for k in 0..n {
                let dk = g.node(k + 1) - g.node(k);
                prop_assert!((dk - h).abs() <= 4.0 * ulp,
                    "step {k}: {dk} vs {h}");
            }
        }

        // Sup distance is a metric: symmetric, zero iff equal, triangle.
        #[test]
        fn sup_distance_is_a_metric(
            a in proptest::collection::vec(-1e3..1e3f64, 5),
            b in proptest::collection::vec(-1e3..1e3f64, 5),
            c in proptest::collection::vec(-1e3..1e3f64, 5),
        ) {
            let g = TimeGrid::uniform(1.0, 4).unwrap();
            let ta = scalar_traj(g.clone(), &a);
            let tb = scalar_traj(g.clone(), &b);
            let tc = scalar_traj(g, &c);
            let dab = trajectory_sup_distance(&ta, &tb).unwrap();
            let dba = trajectory_sup_distance(&tb, &ta).unwrap();
            let dac = trajectory_sup_distance(&ta, &tc).unwrap();
            let dcb = trajectory_sup_distance(&tc, &tb).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(dab == 0.0, a == b);
            prop_assert!(dab <= dac + dcb + 1e-12 * (1.0 + dab));
        }
    }
}
