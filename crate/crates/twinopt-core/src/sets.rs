use crate::error::{validation, Result};
use nalgebra::DVector;

/// Admissible control set: nonempty, closed, and convex by construction.
#[derive(Clone, Debug, PartialEq)]
pub enum AdmissibleSet {
    /// Scalar interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// Componentwise box `[lo_i, hi_i]`.
    Box { lo: DVector<f64>, hi: DVector<f64> },
    /// Euclidean ball around `center`.
    Ball { center: DVector<f64>, radius: f64 },
    /// All of control space.
    Unbounded { dim: usize },
}

impl AdmissibleSet {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(validation(format!(
                "interval needs finite lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(AdmissibleSet::Interval { lo, hi })
    }

    pub fn box_bounds(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(validation("box bounds need equal nonzero dimensions"));
        }
        for i in 0..lo.len() {
            if !lo[i].is_finite() || !hi[i].is_finite() || lo[i] > hi[i] {
                return Err(validation(format!(
                    "box component {i} needs finite lo <= hi, got [{}, {}]",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(AdmissibleSet::Box { lo, hi })
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(validation("ball center must have dimension >= 1"));
        }
        if !radius.is_finite() || radius <= 0.0 {
            return Err(validation(format!("ball radius must be positive, got {radius}")));
        }
        Ok(AdmissibleSet::Ball { center, radius })
    }

    pub fn unbounded(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(validation("control dimension must be >= 1"));
        }
        Ok(AdmissibleSet::Unbounded { dim })
    }

    pub fn dimension(&self) -> usize {
        match self {
            AdmissibleSet::Interval { .. } => 1,
            AdmissibleSet::Box { lo, .. } => lo.len(),
            AdmissibleSet::Ball { center, .. } => center.len(),
            AdmissibleSet::Unbounded { dim } => *dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, AdmissibleSet::Unbounded { .. })
    }

    /// True when the set contains exactly one point.
    pub fn is_singleton(&self) -> bool {
        match self {
            AdmissibleSet::Interval { lo, hi } => lo == hi,
            AdmissibleSet::Box { lo, hi } => lo == hi,
            _ => false,
        }
    }

    /// Bounds of component `i` for Interval/Box sets.
    pub(crate) fn component_bounds(&self, i: usize) -> Option<(f64, f64)> {
        match self {
            AdmissibleSet::Interval { lo, hi } => (i == 0).then_some((*lo, *hi)),
            AdmissibleSet::Box { lo, hi } => Some((lo[i], hi[i])),
            _ => None,
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            AdmissibleSet::Interval { lo, hi } => {
                DVector::from_vec(vec![u[0].clamp(*lo, *hi)])
            }
            AdmissibleSet::Box { lo, hi } => {
                DVector::from_fn(lo.len(), |i, _| u[i].clamp(lo[i], hi[i]))
            }
            AdmissibleSet::Ball { center, radius } => {
                let offset = u - center;
                let dist = offset.norm();
                if dist <= *radius {
                    u.clone()
                } else {
                    center + offset * (*radius / dist)
                }
            }
            AdmissibleSet::Unbounded { .. } => u.clone(),
        }
    }

    /// Membership via projection idempotence.
    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        u.len() == self.dimension() && (self.project(u) - u).norm() <= tol
    }
}
