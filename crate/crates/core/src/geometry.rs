//! Ambient spaces, their metrics, and homogeneous Poisson point sets.
//!
//! The cube `[0,1]^n` carries the maximum metric. The sphere is the unit
//! 2-sphere embedded in R^3 with the geodesic (great-circle) metric, and its
//! total point count is Poisson with mean equal to the intensity, i.e. the
//! sphere is treated as having unit volume.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceSpec {
    Cube { dimension: usize },
    Sphere2,
}

impl SpaceSpec {
    pub fn cube(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(invalid("cube dimension must be at least 1"));
        }
        Ok(SpaceSpec::Cube { dimension })
    }

    /// Number of coordinates stored per point.
    pub fn coords(&self) -> usize {
        match *self {
            SpaceSpec::Cube { dimension } => dimension,
            SpaceSpec::Sphere2 => 3,
        }
    }

    /// Intrinsic dimension (the `n` in the scaling laws).
    pub fn dimension(&self) -> usize {
        match *self {
            SpaceSpec::Cube { dimension } => dimension,
            SpaceSpec::Sphere2 => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpaceSpec::Cube { dimension: 0 } => Err(invalid("cube dimension must be at least 1")),
            _ => Ok(()),
        }
    }

    /// Reference point used to pick the initially infected vertex: the
    /// cube's center, or the north pole on the sphere.
    pub fn center<T: Scalar>(&self) -> Vec<T> {
        match *self {
            SpaceSpec::Cube { dimension } => vec![T::of(0.5); dimension],
            SpaceSpec::Sphere2 => vec![T::zero(), T::zero(), T::one()],
        }
    }

    /// Checks that `p` is a valid point of this space.
    pub fn check_point<T: Scalar>(&self, p: &[T]) -> Result<()> {
        if p.len() != self.coords() {
            return Err(invalid(format!(
                "point has {} coordinates, space needs {}",
                p.len(),
                self.coords()
            )));
        }
        match self {
            SpaceSpec::Cube { .. } => {
                if p.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
                    return Err(invalid("cube coordinates must lie in [0,1]"));
                }
            }
            SpaceSpec::Sphere2 => {
                let norm2 = dot(p, p);
                if (norm2 - T::one()).abs() > T::NORM_TOL {
                    return Err(invalid("sphere points must be unit vectors"));
                }
            }
        }
        Ok(())
    }
}

fn dot<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// Distance without validation; both slices must have the space's arity.
#[inline]
pub fn distance_unchecked<T: Scalar>(space: &SpaceSpec, p: &[T], q: &[T]) -> T {
    match space {
        SpaceSpec::Cube { .. } => p
            .iter()
            .zip(q)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs())),
        SpaceSpec::Sphere2 => dot(p, q).max(-T::one()).min(T::one()).acos(),
    }
}

/// Max-metric distance on the cube, geodesic angle on the sphere.
pub fn distance<T: Scalar>(space: &SpaceSpec, p: &[T], q: &[T]) -> Result<T> {
    let k = space.coords();
    if p.len() != k || q.len() != k {
        return Err(invalid(format!(
            "dimension mismatch: {} and {} coordinates in a space of {}",
            p.len(),
            q.len(),
            k
        )));
    }
    Ok(distance_unchecked(space, p, q))
}

/// Maps two uniforms to a point on the unit sphere by inverse transform
/// sampling of the polar angles.
pub fn sphere_point_from_uniforms(u1: f64, u2: f64) -> [f64; 3] {
    let theta = 2.0 * std::f64::consts::PI * u1;
    let phi = (1.0 - 2.0 * u2).clamp(-1.0, 1.0).acos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [sp * ct, sp * st, cp]
}

/// Host locations: a realization of a homogeneous Poisson point process.
#[derive(Clone, Debug)]
pub struct PointSet<T> {
    space: SpaceSpec,
    intensity: f64,
    coords: Vec<T>,
}

impl<T: Scalar> PointSet<T> {
    /// Builds a point set from explicit positions (flat, `space.coords()`
    /// values per point). Positions are validated.
    pub fn from_positions(space: SpaceSpec, intensity: f64, positions: &[Vec<T>]) -> Result<Self> {
        space.validate()?;
        let mut coords = Vec::with_capacity(positions.len() * space.coords());
        for p in positions {
            space.check_point(p)?;
            coords.extend_from_slice(p);
        }
        Ok(PointSet {
            space,
            intensity,
            coords,
        })
    }

    pub(crate) fn from_flat(space: SpaceSpec, intensity: f64, coords: Vec<T>) -> Self {
        debug_assert_eq!(coords.len() % space.coords(), 0);
        PointSet {
            space,
            intensity,
            coords,
        }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.space.coords()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        let k = self.space.coords();
        &self.coords[i * k..(i + 1) * k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.coords.chunks_exact(self.space.coords())
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> T {
        distance_unchecked(&self.space, self.point(i), self.point(j))
    }

    /// Writes `id,x0,...` (cube) or `id,x,y,z` (sphere) rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        match self.space {
            SpaceSpec::Cube { dimension } => header.extend((0..dimension).map(|i| format!("x{i}"))),
            SpaceSpec::Sphere2 => header.extend(["x", "y", "z"].map(String::from)),
        }
        w.write_record(&header)?;
        for (i, p) in self.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(p.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples a homogeneous Poisson point process of the given intensity.
pub fn sample_point_set<T: Scalar, R: Rng + ?Sized>(
    space: SpaceSpec,
    intensity: f64,
    rng: &mut R,
) -> Result<PointSet<T>> {
    space.validate()?;
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(invalid(format!("intensity must be positive, got {intensity}")));
    }
    let count = Poisson::new(intensity)
        .map_err(|e| invalid(format!("intensity {intensity}: {e}")))?
        .sample(rng) as usize;
    let k = space.coords();
    let mut coords = Vec::with_capacity(count * k);
    match space {
        SpaceSpec::Cube { .. } => {
            for _ in 0..count * k {
                coords.push(T::of(rng.random::<f64>()));
            }
        }
        SpaceSpec::Sphere2 => {
            for _ in 0..count {
                let (u1, u2) = (rng.random::<f64>(), rng.random::<f64>());
                coords.extend(sphere_point_from_uniforms(u1, u2).map(T::of));
            }
        }
    }
    Ok(PointSet::from_flat(space, intensity, coords))
}
