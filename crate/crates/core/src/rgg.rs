//! Implicit random geometric graphs.

use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance_unchecked, sample_point_set, PointSet, SpaceSpec};
use crate::index::{Candidates, GridIndex};
use crate::scalar::Scalar;

/// Scaling parameters of a graph with intensity `N` and exponent `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RggParams {
    pub intensity: f64,
    pub beta: f64,
    pub dimension: usize,
    pub radius: f64,
    pub expected_degree: f64,
}

impl RggParams {
    /// On the cube `r_N = N^((beta-1)/n) / 2`, so a box of side `2 r_N`
    /// holds `N^beta` points on average. On the unit sphere the radius is
    /// the geodesic cap radius holding `N^beta` of `N` uniform points.
    pub fn new(space: &SpaceSpec, intensity: f64, beta: f64) -> Result<Self> {
        space.validate()?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid(format!("beta must lie in (0,1), got {beta}")));
        }
        if !(intensity >= 1.0 && intensity.is_finite()) {
            return Err(invalid(format!("intensity must be at least 1, got {intensity}")));
        }
        let dimension = space.dimension();
        let (radius, expected_degree) = match space {
            SpaceSpec::Cube { dimension } => {
                let n = *dimension as f64;
                let r = 0.5 * intensity.powf((beta - 1.0) / n);
                (r, (2.0 * r).powf(n) * intensity)
            }
            SpaceSpec::Sphere2 => {
                let r = (1.0 - 2.0 * intensity.powf(beta - 1.0)).acos();
                (r, intensity.powf(beta))
            }
        };
        Ok(RggParams {
            intensity,
            beta,
            dimension,
            radius,
            expected_degree,
        })
    }

    /// Smallest number of generations needed to cross the cube from its
    /// center: `floor(1 / (2 r_N))`.
    pub fn crossing_generations(&self) -> u64 {
        (1.0 / (2.0 * self.radius)).floor() as u64
    }
}

/// Degree summary over interior vertices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegreeStats {
    pub interior: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

/// Points, scaling parameters and neighbor index. Edges are implicit:
/// two vertices are adjacent iff their distance is at most `r_N`.
#[derive(Clone, Debug)]
pub struct GeometricGraph<T> {
    points: PointSet<T>,
    params: RggParams,
    index: GridIndex<T>,
}

impl<T: Scalar> GeometricGraph<T> {
    pub fn from_points(points: PointSet<T>, params: RggParams) -> Result<Self> {
        let index = GridIndex::build(&points, T::of(params.radius))?;
        Ok(GeometricGraph {
            points,
            params,
            index,
        })
    }

    /// Graph on explicit points with an explicit radius (the scaling
    /// fields are filled from the radius).
    pub fn with_radius(points: PointSet<T>, radius: f64) -> Result<Self> {
        let n = points.space().dimension();
        let params = RggParams {
            intensity: points.intensity(),
            beta: f64::NAN,
            dimension: n,
            radius,
            expected_degree: match points.space() {
                SpaceSpec::Cube { .. } => (2.0 * radius).powi(n as i32) * points.intensity(),
                SpaceSpec::Sphere2 => points.intensity() * (1.0 - radius.cos()) / 2.0,
            },
        };
        Self::from_points(points, params)
    }

    pub fn points(&self) -> &PointSet<T> {
        &self.points
    }

    pub fn params(&self) -> &RggParams {
        &self.params
    }

    pub fn index(&self) -> &GridIndex<T> {
        &self.index
    }

    pub fn space(&self) -> &SpaceSpec {
        self.points.space()
    }

    pub fn radius(&self) -> T {
        self.index.cell_size()
    }

    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.vertex_count() {
            return Err(invalid(format!("unknown vertex {v}")));
        }
        Ok(())
    }

    pub fn neighbors(&self, v: usize) -> Result<Vec<usize>> {
        self.index.neighbors_within(v, self.radius())
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.check_vertex(v)?;
        self.index.degree(v)
    }

    /// Vertex nearest to the space's reference point, lowest index on ties.
    pub fn closest_to_center(&self) -> Result<usize> {
        let center = self.space().center::<T>();
        let space = *self.space();
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (distance_unchecked(&space, p, &center), i))
            .fold(None, |best: Option<(T, usize)>, (d, i)| match best {
                Some((bd, _)) if bd <= d => best,
                _ => Some((d, i)),
            })
            .map(|(_, i)| i)
            .ok_or(Error::EmptyGraph)
    }

    /// Whether vertex `v` is at distance more than `r_N` from the cube's
    /// boundary. Every sphere vertex is interior.
    pub fn is_interior(&self, v: usize) -> bool {
        match self.space() {
            SpaceSpec::Cube { .. } => {
                let r = self.radius();
                self.points.point(v).iter().all(|&x| x > r && T::one() - x > r)
            }
            SpaceSpec::Sphere2 => true,
        }
    }

    /// Degree extremes and mean over interior vertices; `None` if there
    /// are none.
    pub fn degree_stats(&self) -> Option<DegreeStats> {
        let mut cand = Candidates::default();
        let mut stats: Option<DegreeStats> = None;
        let mut sum = 0u64;
        for v in (0..self.vertex_count()).filter(|&v| self.is_interior(v)) {
            let d = self.index.degree_with(v, &mut cand);
            sum += d as u64;
            let s = stats.get_or_insert(DegreeStats {
                interior: 0,
                min: d,
                max: d,
                mean: 0.0,
            });
            s.interior += 1;
            s.min = s.min.min(d);
            s.max = s.max.max(d);
        }
        stats.map(|mut s| {
            s.mean = sum as f64 / s.interior as f64;
            s
        })
    }

    /// Calls `f(v, degree)` for every interior vertex.
    pub fn for_each_interior_degree(&self, mut f: impl FnMut(usize, usize)) {
        let mut cand = Candidates::default();
        for v in (0..self.vertex_count()).filter(|&v| self.is_interior(v)) {
            f(v, self.index.degree_with(v, &mut cand));
        }
    }

    /// Breadth-first search over the implicit edges.
    ///
    /// On the cube, cells have side `r_N` so each cell is a clique under the
    /// max metric; the search runs over cells and only has to find one
    /// crossing pair per adjacent cell. On the sphere the search is over
    /// vertices, visiting each unvisited candidate at most once.
    pub fn is_connected(&self) -> Result<bool> {
        let n = self.vertex_count();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut cand = Candidates::default();
        let mut nbrs = Vec::new();
        let mut reached = 1usize;
        match self.space() {
            SpaceSpec::Cube { .. } => {
                let buckets: Vec<&[u32]> = self.index.buckets().map(|(_, ids)| ids).collect();
                let mut bucket_seen = vec![false; buckets.len()];
                let first = self.index.bucket_position_of_slot(self.index.slot_of(0));
                bucket_seen[first] = true;
                reached = buckets[first].len();
                let mut bqueue = VecDeque::from([first]);
                while let Some(b) = bqueue.pop_front() {
                    for &v in buckets[b] {
                        let v = v as usize;
                        self.index.candidates(self.index.coords_of(v), &mut cand);
                        for &(lo, hi) in cand.ranges() {
                            let wb = self.index.bucket_position_of_slot(lo as usize);
                            if !bucket_seen[wb] && self.index.any_within(v, lo as usize, hi as usize) {
                                bucket_seen[wb] = true;
                                reached += buckets[wb].len();
                                bqueue.push_back(wb);
                            }
                        }
                    }
                    if reached == n {
                        return Ok(true);
                    }
                }
            }
            SpaceSpec::Sphere2 => {
                let mut seen = vec![false; n];
                let mut queue = VecDeque::from([0usize]);
                seen[0] = true;
                while let Some(v) = queue.pop_front() {
                    self.index.neighbors_into(v, self.radius(), &mut cand, &mut nbrs);
                    for &w in &nbrs {
                        if !seen[w] {
                            seen[w] = true;
                            reached += 1;
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
        Ok(reached == n)
    }
}

/// Samples a fresh point set and builds its graph.
pub fn build_rgg<T: Scalar, R: Rng + ?Sized>(
    space: SpaceSpec,
    intensity: f64,
    beta: f64,
    rng: &mut R,
) -> Result<GeometricGraph<T>> {
    let params = RggParams::new(&space, intensity, beta)?;
    let points = sample_point_set(space, intensity, rng)?;
    GeometricGraph::from_points(points, params)
}

/// The `N^beta +/- c N^(((n-1) beta + gamma)/n)` band for the number of
/// points in an `r_N`-ball around an interior vertex (the vertex included),
/// with `gamma = 3 beta / (3 + n)`. The lower width uses `c = n + 1`, the
/// upper `c = 2n + 1`.
pub fn degree_band(intensity: f64, beta: f64, dimension: usize) -> (f64, f64) {
    let n = dimension as f64;
    let gamma = 3.0 * beta / (3.0 + n);
    let width = intensity.powf(((n - 1.0) * beta + gamma) / n);
    let centre = intensity.powf(beta);
    (centre - (n + 1.0) * width, centre + (2.0 * n + 1.0) * width)
}
