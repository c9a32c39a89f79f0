//! Fixed-radius neighbor search on a uniform grid.
//!
//! Points are bucketed into cells whose side equals the query radius, and
//! within a cell they are kept sorted by a one-dimensional key (the first
//! coordinate on the cube, the longitude on the sphere). A query therefore
//! turns into a handful of contiguous ranges of the sorted point array,
//! found by binary search, followed by an exact distance filter. On the unit
//! interval the ranges are exact and no filtering is needed.
//!
//! Edges are never stored: neighbor lists are recomputed on demand, and
//! uniform neighbor sampling is done by rejection from the candidate ranges.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::geometry::{distance_unchecked, PointSet, SpaceSpec};
use crate::scalar::Scalar;

/// Consecutive rejections tolerated before falling back to an explicit
/// neighbor list.
const MAX_REJECTIONS: u32 = 64;

/// Angular slack added to sphere search windows; the exact distance filter
/// removes anything the widening lets in.
const SPHERE_SLACK: f64 = 1e-9;

/// Partition of a space into cells of a given side: an axis-aligned grid
/// on the cube, latitude bands split into longitude cells on the sphere.
#[derive(Clone, Debug)]
pub enum CellLayout {
    Cube {
        per_axis: u64,
        side: f64,
    },
    Sphere {
        side: f64,
        band_height: f64,
        /// Longitude cells per band.
        lon_cells: Vec<u64>,
        /// Id of the first cell of each band.
        band_start: Vec<u64>,
    },
}

impl CellLayout {
    pub fn new(space: &SpaceSpec, r: f64) -> Result<Self> {
        space.validate()?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("cell side must be positive, got {r}")));
        }
        let layout = match *space {
            SpaceSpec::Cube { dimension } => {
                let per_axis = (1.0 / r).floor() as u64 + 1;
                if per_axis.checked_pow(dimension as u32).is_none() {
                    return Err(invalid("radius too small for the cell id space"));
                }
                CellLayout::Cube { per_axis, side: r }
            }
            SpaceSpec::Sphere2 => {
                if r >= PI / 2.0 {
                    return Err(invalid("sphere radius must be below pi/2"));
                }
                let bands = ((PI / r).floor() as u64).max(1);
                let band_height = PI / bands as f64;
                let mut lon_cells = Vec::with_capacity(bands as usize);
                let mut band_start = Vec::with_capacity(bands as usize);
                let mut next = 0u64;
                for b in 0..bands {
                    // Widest circle of latitude in the band.
                    let lo = b as f64 * band_height;
                    let hi = lo + band_height;
                    let widest = if lo <= PI / 2.0 && hi >= PI / 2.0 {
                        1.0
                    } else {
                        lo.sin().max(hi.sin())
                    };
                    let m = ((2.0 * PI * widest / r).floor() as u64).max(1);
                    band_start.push(next);
                    lon_cells.push(m);
                    next += m;
                }
                CellLayout::Sphere {
                    side: r,
                    band_height,
                    lon_cells,
                    band_start,
                }
            }
        };
        Ok(layout)
    }

    /// Id of the cell containing `p`.
    pub fn cell_of<T: Scalar>(&self, p: &[T]) -> u64 {
        match self {
            CellLayout::Cube { per_axis, side } => p.iter().rev().fold(0u64, |acc, &x| {
                acc * per_axis + cube_cell(x.as_f64(), *side, *per_axis)
            }),
            CellLayout::Sphere {
                band_height,
                lon_cells,
                band_start,
                ..
            } => {
                let z = p[2].as_f64().clamp(-1.0, 1.0);
                let band = ((z.acos() / band_height).floor() as usize).min(lon_cells.len() - 1);
                let m = lon_cells[band];
                let lon = longitude(p[0].as_f64(), p[1].as_f64());
                let cell = ((lon / (2.0 * PI / m as f64)).floor() as u64).min(m - 1);
                band_start[band] + cell
            }
        }
    }
}

#[inline]
fn cube_cell(x: f64, side: f64, per_axis: u64) -> u64 {
    let c = (x / side).floor();
    (c.max(0.0) as u64).min(per_axis - 1)
}

/// Immutable bucket grid over a point set.
#[derive(Clone, Debug)]
pub struct GridIndex<T> {
    space: SpaceSpec,
    cell_size: T,
    layout: CellLayout,
    /// Occupied cell ids, ascending.
    cells: Vec<u64>,
    /// `offsets[c]..offsets[c + 1]` is the slot range of `cells[c]`.
    offsets: Vec<u32>,
    /// Point id stored in each slot.
    order: Vec<u32>,
    /// Slot of each point id.
    slot: Vec<u32>,
    /// Sort key of each slot.
    keys: Vec<T>,
    /// Coordinates in slot order.
    coords: Vec<T>,
}

/// Candidate slot ranges for one query; reusable scratch space.
#[derive(Clone, Debug, Default)]
pub struct Candidates {
    ranges: Vec<(u32, u32)>,
    total: u32,
}

impl Candidates {
    pub fn len(&self) -> usize {
        self.total as usize
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    fn clear(&mut self) {
        self.ranges.clear();
        self.total = 0;
    }

    fn push(&mut self, lo: usize, hi: usize) {
        if hi > lo {
            self.ranges.push((lo as u32, hi as u32));
            self.total += (hi - lo) as u32;
        }
    }

    /// Slot of the `k`-th candidate.
    #[inline]
    fn nth(&self, mut k: u32) -> usize {
        for &(lo, hi) in &self.ranges {
            let n = hi - lo;
            if k < n {
                return (lo + k) as usize;
            }
            k -= n;
        }
        unreachable!("candidate index out of range")
    }

    pub(crate) fn ranges(&self) -> &[(u32, u32)] {
        &self.ranges
    }

    fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranges.iter().flat_map(|&(lo, hi)| lo as usize..hi as usize)
    }
}

fn longitude(x: f64, y: f64) -> f64 {
    let l = y.atan2(x);
    if l < 0.0 {
        l + 2.0 * PI
    } else {
        l
    }
}

impl<T: Scalar> GridIndex<T> {
    /// Buckets every point of `points` into cells of side `radius`.
    pub fn build(points: &PointSet<T>, radius: T) -> Result<Self> {
        let space = *points.space();
        let r = radius.as_f64();
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {r}")));
        }
        if points.len() > u32::MAX as usize {
            return Err(invalid("too many points for a 32-bit index"));
        }
        let layout = CellLayout::new(&space, r)?;

        let mut index = GridIndex {
            space,
            cell_size: radius,
            layout,
            cells: Vec::new(),
            offsets: Vec::new(),
            order: Vec::new(),
            slot: Vec::new(),
            keys: Vec::new(),
            coords: Vec::new(),
        };

        let mut entries: Vec<(u64, T, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (index.cell_of(p), index.key_of(p), i as u32))
            .collect();
        entries.sort_unstable_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.partial_cmp(&b.1).expect("coordinates are not NaN"))
                .then(a.2.cmp(&b.2))
        });

        let k = space.coords();
        index.order = entries.iter().map(|e| e.2).collect();
        index.keys = entries.iter().map(|e| e.1).collect();
        index.slot = vec![0; entries.len()];
        index.coords = Vec::with_capacity(entries.len() * k);
        for (s, e) in entries.iter().enumerate() {
            index.slot[e.2 as usize] = s as u32;
            index.coords.extend_from_slice(points.point(e.2 as usize));
            if index.cells.last() != Some(&e.0) {
                index.cells.push(e.0);
                index.offsets.push(s as u32);
            }
        }
        index.offsets.push(entries.len() as u32);
        Ok(index)
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Number of occupied buckets.
    pub fn bucket_count(&self) -> usize {
        self.cells.len()
    }

    /// Point ids of each occupied bucket, in ascending cell order.
    pub fn buckets(&self) -> impl Iterator<Item = (u64, &[u32])> + '_ {
        self.cells.iter().enumerate().map(move |(c, &id)| {
            (
                id,
                &self.order[self.offsets[c] as usize..self.offsets[c + 1] as usize],
            )
        })
    }

    /// Bucket id of point `id`.
    pub fn bucket_of(&self, id: usize) -> Result<u64> {
        self.check_id(id)?;
        Ok(self.cell_of(self.slot_coords(self.slot[id] as usize)))
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id >= self.order.len() {
            return Err(invalid(format!(
                "unknown point id {id} (index holds {})",
                self.order.len()
            )));
        }
        Ok(())
    }

    #[inline]
    fn slot_coords(&self, s: usize) -> &[T] {
        let k = self.space.coords();
        &self.coords[s * k..(s + 1) * k]
    }

    pub(crate) fn slot_of(&self, id: usize) -> usize {
        self.slot[id] as usize
    }

    /// Coordinates of point `id`.
    #[inline]
    pub fn coords_of(&self, id: usize) -> &[T] {
        self.slot_coords(self.slot[id] as usize)
    }

    fn cell_of(&self, p: &[T]) -> u64 {
        self.layout.cell_of(p)
    }

    fn key_of(&self, p: &[T]) -> T {
        match self.space {
            SpaceSpec::Cube { .. } => p[0],
            SpaceSpec::Sphere2 => T::of(longitude(p[0].as_f64(), p[1].as_f64())),
        }
    }

    fn cell_range(&self, cell: u64) -> Option<(usize, usize)> {
        self.cells
            .binary_search(&cell)
            .ok()
            .map(|c| (self.offsets[c] as usize, self.offsets[c + 1] as usize))
    }

    /// Pushes the slots of `cell` whose key satisfies the window predicates.
    fn push_window(
        &self,
        out: &mut Candidates,
        cell: u64,
        below: impl Fn(T) -> bool,
        within_upper: impl Fn(T) -> bool,
    ) {
        if let Some((lo, hi)) = self.cell_range(cell) {
            let keys = &self.keys[lo..hi];
            let a = keys.partition_point(|&k| below(k));
            let b = keys.partition_point(|&k| within_upper(k));
            if b > a {
                out.push(lo + a, lo + b);
            }
        }
    }

    /// Collects candidate slot ranges for a query centered at `p`: a
    /// superset of the points within `cell_size` of `p`, which on the unit
    /// interval is exact.
    pub fn candidates(&self, p: &[T], out: &mut Candidates) {
        out.clear();
        let r = self.cell_size;
        match &self.layout {
            CellLayout::Cube { per_axis, side } => {
                let n = p.len();
                let home: Vec<u64> = p
                    .iter()
                    .map(|&x| cube_cell(x.as_f64(), *side, *per_axis))
                    .collect();
                let x0 = p[0];
                // Same arithmetic as the max metric, so window ends are exact.
                let below = |k: T| x0 - k > r;
                let within = |k: T| k - x0 <= r;
                let mut offset = vec![-1i64; n];
                'cells: loop {
                    let mut id = 0u64;
                    let mut valid = true;
                    for axis in (0..n).rev() {
                        let c = home[axis] as i64 + offset[axis];
                        if c < 0 || c >= *per_axis as i64 {
                            valid = false;
                            break;
                        }
                        id = id * per_axis + c as u64;
                    }
                    if valid {
                        self.push_window(out, id, below, within);
                    }
                    for o in offset.iter_mut().take(n) {
                        *o += 1;
                        if *o <= 1 {
                            continue 'cells;
                        }
                        *o = -1;
                    }
                    break;
                }
            }
            CellLayout::Sphere {
                band_height,
                lon_cells,
                band_start,
                ..
            } => {
                let rf = r.as_f64();
                let z = p[2].as_f64().clamp(-1.0, 1.0);
                let colat = z.acos();
                let lon = longitude(p[0].as_f64(), p[1].as_f64());
                let lat_lo = colat - rf - SPHERE_SLACK;
                let lat_hi = colat + rf + SPHERE_SLACK;
                // Longitude half-width of the cap; the whole ring near a pole.
                let half_width = if lat_lo <= 0.0 || lat_hi >= PI {
                    PI
                } else {
                    let s = rf.sin() / colat.sin();
                    if s >= 1.0 {
                        PI
                    } else {
                        s.asin() + SPHERE_SLACK
                    }
                };
                let bands = lon_cells.len();
                let b_lo = ((lat_lo.max(0.0) / band_height).floor() as usize).min(bands - 1);
                let b_hi = ((lat_hi.min(PI) / band_height).floor() as usize).min(bands - 1);
                let mut windows: Vec<(f64, f64)> = Vec::with_capacity(2);
                if half_width >= PI {
                    windows.push((0.0, 2.0 * PI));
                } else {
                    let (a, b) = (lon - half_width, lon + half_width);
                    if a < 0.0 {
                        windows.push((a + 2.0 * PI, 2.0 * PI));
                        windows.push((0.0, b));
                    } else if b >= 2.0 * PI {
                        windows.push((a, 2.0 * PI));
                        windows.push((0.0, b - 2.0 * PI));
                    } else {
                        windows.push((a, b));
                    }
                }
                for band in b_lo..=b_hi {
                    let m = lon_cells[band];
                    let width = 2.0 * PI / m as f64;
                    for &(a, b) in &windows {
                        let c_lo = ((a / width).floor() as u64).min(m - 1);
                        let c_hi = ((b / width).floor() as u64).min(m - 1);
                        let (ka, kb) = (T::of(a), T::of(b));
                        for c in c_lo..=c_hi {
                            self.push_window(out, band_start[band] + c, |k| k < ka, |k| k <= kb);
                        }
                    }
                }
            }
        }
    }

    /// Position (in ascending cell order) of the bucket holding `slot`.
    pub(crate) fn bucket_position_of_slot(&self, slot: usize) -> usize {
        self.offsets.partition_point(|&o| o as usize <= slot) - 1
    }

    /// Whether any slot in `lo..hi` lies within the cell size of point `id`.
    pub(crate) fn any_within(&self, id: usize, lo: usize, hi: usize) -> bool {
        let own = self.slot[id] as usize;
        let p = self.slot_coords(own);
        if self.ranges_are_exact() {
            return (lo..hi).any(|s| s != own);
        }
        (lo..hi).any(|s| s != own && self.slot_within(p, s, self.cell_size))
    }

    pub(crate) fn ranges_are_exact(&self) -> bool {
        matches!(self.space, SpaceSpec::Cube { dimension: 1 })
    }

    #[inline]
    fn slot_within(&self, p: &[T], s: usize, radius: T) -> bool {
        distance_unchecked(&self.space, p, self.slot_coords(s)) <= radius
    }

    fn check_radius(&self, radius: T) -> Result<()> {
        if !(radius > T::zero() && radius <= self.cell_size) {
            return Err(invalid(format!(
                "query radius {radius} must be positive and at most the cell size {}",
                self.cell_size
            )));
        }
        Ok(())
    }

    /// Ids `j != id` at distance at most `radius` from point `id`, in slot
    /// order (deterministic for a fixed build).
    pub fn neighbors_within(&self, id: usize, radius: T) -> Result<Vec<usize>> {
        self.check_id(id)?;
        self.check_radius(radius)?;
        let mut cand = Candidates::default();
        let mut out = Vec::new();
        self.neighbors_into(id, radius, &mut cand, &mut out);
        Ok(out)
    }

    pub(crate) fn neighbors_into(&self, id: usize, radius: T, cand: &mut Candidates, out: &mut Vec<usize>) {
        out.clear();
        let own = self.slot[id] as usize;
        let p = self.slot_coords(own);
        self.candidates(p, cand);
        let exact = self.ranges_are_exact() && radius == self.cell_size;
        for s in cand.slots() {
            if s != own && (exact || self.slot_within(p, s, radius)) {
                out.push(self.order[s] as usize);
            }
        }
    }

    /// Number of neighbors of point `id` at the index radius.
    pub fn degree(&self, id: usize) -> Result<usize> {
        self.check_id(id)?;
        let mut cand = Candidates::default();
        Ok(self.degree_with(id, &mut cand))
    }

    pub(crate) fn degree_with(&self, id: usize, cand: &mut Candidates) -> usize {
        let own = self.slot[id] as usize;
        let p = self.slot_coords(own);
        self.candidates(p, cand);
        if self.ranges_are_exact() {
            return cand.len() - 1;
        }
        cand.slots()
            .filter(|&s| s != own && self.slot_within(p, s, self.cell_size))
            .count()
    }

    /// Draws `count` independent uniform neighbors of point `id` (with
    /// replacement) and hands each to `sink`. Nothing is drawn for an
    /// isolated point.
    pub fn sample_neighbors<R: Rng + ?Sized>(
        &self,
        id: usize,
        count: u32,
        rng: &mut R,
        cand: &mut Candidates,
        fallback: &mut Vec<usize>,
        mut sink: impl FnMut(usize),
    ) {
        if count == 0 {
            return;
        }
        let own = self.slot[id] as usize;
        let p = self.slot_coords(own);
        self.candidates(p, cand);
        if cand.len() <= 1 {
            return;
        }
        let exact = self.ranges_are_exact();
        let total = cand.total;
        let mut explicit = false;
        'draws: for _ in 0..count {
            if !explicit {
                for _ in 0..MAX_REJECTIONS {
                    let s = cand.nth(rng.random_range(0..total));
                    if s != own && (exact || self.slot_within(p, s, self.cell_size)) {
                        sink(self.order[s] as usize);
                        continue 'draws;
                    }
                }
                // Sparse neighborhood: switch to the explicit list. Both
                // routes are uniform over the neighbors.
                explicit = true;
                fallback.clear();
                fallback.extend(
                    cand.slots()
                        .filter(|&s| s != own && self.slot_within(p, s, self.cell_size))
                        .map(|s| self.order[s] as usize),
                );
            }
            if fallback.is_empty() {
                return;
            }
            sink(fallback[rng.random_range(0..fallback.len())]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_point_set, sphere_point_from_uniforms};
    use crate::rng::stream;
    use std::collections::BTreeSet;

    fn line(xs: &[f64]) -> PointSet<f64> {
        let pos: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        PointSet::from_positions(SpaceSpec::cube(1).unwrap(), 1.0, &pos).unwrap()
    }

    fn brute(points: &PointSet<f64>, id: usize, r: f64) -> BTreeSet<usize> {
        (0..points.len())
            .filter(|&j| j != id && points.distance(id, j) <= r)
            .collect()
    }

    #[test]
    fn empty_index() {
        let idx = GridIndex::build(&line(&[]), 0.1).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.bucket_count(), 0);
    }

    #[test]
    fn nonpositive_radius_rejected() {
        assert!(GridIndex::build(&line(&[0.5]), 0.0).is_err());
        assert!(GridIndex::build(&line(&[0.5]), -1.0).is_err());
        let ps = PointSet::from_positions(SpaceSpec::Sphere2, 1.0, &[vec![0.0, 0.0, 1.0]]).unwrap();
        assert!(GridIndex::build(&ps, 2.0).is_err());
    }

    #[test]
    fn distinct_buckets_on_line() {
        let idx = GridIndex::build(&line(&[0.05, 0.96]), 0.1).unwrap();
        assert_ne!(idx.bucket_of(0).unwrap(), idx.bucket_of(1).unwrap());
        assert_eq!(idx.bucket_count(), 2);
    }

    #[test]
    fn every_point_in_exactly_one_bucket() {
        let mut rng = stream(3, 0, 0);
        let ps = sample_point_set::<f64, _>(SpaceSpec::cube(2).unwrap(), 1000.0, &mut rng).unwrap();
        let idx = GridIndex::build(&ps, 0.1).unwrap();
        let mut seen = vec![0u32; ps.len()];
        for (cell, ids) in idx.buckets() {
            for &i in ids {
                seen[i as usize] += 1;
                assert_eq!(idx.bucket_of(i as usize).unwrap(), cell);
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn line_neighbors() {
        let idx = GridIndex::build(&line(&[0.10, 0.15, 0.90]), 0.1).unwrap();
        assert_eq!(idx.neighbors_within(0, 0.1).unwrap(), vec![1]);
        assert_eq!(idx.neighbors_within(2, 0.1).unwrap(), Vec::<usize>::new());
        assert!(idx.neighbors_within(3, 0.1).is_err());
        assert!(idx.neighbors_within(0, 0.2).is_err());
    }

    #[test]
    fn faces_do_not_wrap() {
        let ps = line(&[0.0, 0.05, 0.95, 1.0]);
        let idx = GridIndex::build(&ps, 0.1).unwrap();
        assert_eq!(idx.neighbors_within(0, 0.1).unwrap(), vec![1]);
        assert_eq!(idx.neighbors_within(3, 0.1).unwrap(), vec![2]);
        let sq = PointSet::from_positions(
            SpaceSpec::cube(2).unwrap(),
            1.0,
            &[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.02, 0.98]],
        )
        .unwrap();
        let idx = GridIndex::build(&sq, 0.05).unwrap();
        assert!(idx.neighbors_within(0, 0.05).unwrap().is_empty());
        assert_eq!(idx.neighbors_within(2, 0.05).unwrap(), vec![3]);
    }

    #[test]
    fn closed_ball_on_line() {
        let idx = GridIndex::build(&line(&[0.25, 0.5]), 0.25).unwrap();
        assert_eq!(idx.degree(0).unwrap(), 1);
        assert_eq!(idx.degree(1).unwrap(), 1);
    }

    #[test]
    fn square_matches_brute_force() {
        let mut rng = stream(4, 0, 0);
        let ps = sample_point_set::<f64, _>(SpaceSpec::cube(2).unwrap(), 500.0, &mut rng).unwrap();
        let idx = GridIndex::build(&ps, 0.07).unwrap();
        for i in 0..ps.len() {
            let got: BTreeSet<usize> = idx.neighbors_within(i, 0.07).unwrap().into_iter().collect();
            assert_eq!(got, brute(&ps, i, 0.07), "point {i}");
            assert!(!got.contains(&i));
            assert_eq!(idx.degree(i).unwrap(), got.len());
        }
    }

    #[test]
    fn sphere_poles_and_seam() {
        // Points straddling the north pole and the longitude seam.
        let raw = [
            sphere_point_from_uniforms(0.0, 0.0005),
            sphere_point_from_uniforms(0.5, 0.0005),
            sphere_point_from_uniforms(0.001, 0.5),
            sphere_point_from_uniforms(0.999, 0.5),
            sphere_point_from_uniforms(0.25, 0.9995),
            sphere_point_from_uniforms(0.75, 0.9995),
        ];
        let pos: Vec<Vec<f64>> = raw.iter().map(|p| p.to_vec()).collect();
        let ps = PointSet::from_positions(SpaceSpec::Sphere2, 1.0, &pos).unwrap();
        let r = 0.1;
        let idx = GridIndex::build(&ps, r).unwrap();
        for i in 0..ps.len() {
            let got: BTreeSet<usize> = idx.neighbors_within(i, r).unwrap().into_iter().collect();
            assert_eq!(got, brute(&ps, i, r));
        }
        assert_eq!(idx.neighbors_within(0, r).unwrap(), vec![1]);
        assert_eq!(idx.neighbors_within(2, r).unwrap(), vec![3]);
    }

    #[test]
    fn sampling_is_uniform_over_neighbors() {
        let mut rng = stream(5, 0, 0);
        let ps = sample_point_set::<f64, _>(SpaceSpec::cube(2).unwrap(), 400.0, &mut rng).unwrap();
        let idx = GridIndex::build(&ps, 0.1).unwrap();
        let id = (0..ps.len()).max_by_key(|&i| idx.degree(i).unwrap()).unwrap();
        let nbrs = idx.neighbors_within(id, 0.1).unwrap();
        let mut hits = std::collections::HashMap::new();
        let mut cand = Candidates::default();
        let mut fb = Vec::new();
        let draws = 20_000 * nbrs.len() as u32 / 10;
        idx.sample_neighbors(id, draws, &mut rng, &mut cand, &mut fb, |j| {
            *hits.entry(j).or_insert(0u32) += 1
        });
        assert_eq!(hits.len(), nbrs.len());
        let expect = draws as f64 / nbrs.len() as f64;
        let chi2: f64 = hits.values().map(|&h| (h as f64 - expect).powi(2) / expect).sum();
        // Loose bound: chi-square with k-1 dof has sd sqrt(2(k-1)).
        let dof = (nbrs.len() - 1) as f64;
        assert!(chi2 < dof + 6.0 * (2.0 * dof).sqrt(), "chi2 {chi2} dof {dof}");
    }

    #[test]
    fn isolated_point_releases_nothing() {
        let idx = GridIndex::build(&line(&[0.1, 0.9]), 0.1).unwrap();
        let mut rng = stream(6, 0, 0);
        let mut n = 0;
        idx.sample_neighbors(
            0,
            10,
            &mut rng,
            &mut Candidates::default(),
            &mut Vec::new(),
            |_| n += 1,
        );
        assert_eq!(n, 0);
    }

    #[test]
    fn sparse_sphere_fallback_path() {
        // Two close points in a cell crowded with far ones force rejections.
        let mut pos = vec![
            vec![0.0, 0.0, 1.0],
            sphere_point_from_uniforms(0.0, 0.0001).to_vec(),
        ];
        for k in 0..200 {
            pos.push(sphere_point_from_uniforms(k as f64 / 200.0, 0.003).to_vec());
        }
        let ps = PointSet::from_positions(SpaceSpec::Sphere2, 1.0, &pos).unwrap();
        let r = 0.03;
        let idx = GridIndex::build(&ps, r).unwrap();
        let expected: BTreeSet<usize> = brute(&ps, 0, r);
        let mut rng = stream(7, 0, 0);
        let mut got = BTreeSet::new();
        idx.sample_neighbors(
            0,
            500,
            &mut rng,
            &mut Candidates::default(),
            &mut Vec::new(),
            |j| {
                got.insert(j);
            },
        );
        assert!(got.is_subset(&expected));
    }
}
