//! Generation-synchronous invasion dynamics.
//!
//! Every host infected in generation `g` dies and releases `v` parasites.
//! Each parasite independently moves to a uniformly chosen neighbor of its
//! birth vertex. A susceptible host attacked by at least two parasites in
//! the same generation becomes infected; a lone attacker dies, as does any
//! parasite landing on a vertex whose host is already infected or dead.
//!
//! Parasites are never materialized: destinations are drawn per origin and
//! tallied per target vertex in reusable dense buffers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::distance_unchecked;
use crate::index::{Candidates, CellLayout};
use crate::rgg::GeometricGraph;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Any two attackers infect.
    #[default]
    Full,
    /// Only pairs of parasites from the same origin infect.
    CoSameOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpidemicParams {
    /// Parasites released per infection (`v`).
    pub parasites_per_infection: u32,
    /// The `a` in `v = round(a * sqrt(degree scale))`, when `v` was derived that way.
    pub cooperativity: Option<f64>,
    /// Proportion `u` of hosts whose infection counts as invasion.
    pub target_proportion: f64,
    pub mode: Mode,
    pub generation_cap: u64,
}

impl EpidemicParams {
    pub fn new(parasites_per_infection: u32, generation_cap: u64) -> Result<Self> {
        let p = EpidemicParams {
            parasites_per_infection,
            cooperativity: None,
            target_proportion: 1.0,
            mode: Mode::Full,
            generation_cap,
        };
        p.validate()?;
        Ok(p)
    }

    /// `v = round(a * sqrt(degree_scale))`, at least 1.
    pub fn from_cooperativity(a: f64, degree_scale: f64, generation_cap: u64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid(format!("cooperativity must be positive, got {a}")));
        }
        let v = parasites_for(a, degree_scale);
        let mut p = Self::new(v, generation_cap)?;
        p.cooperativity = Some(a);
        Ok(p)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_target(mut self, u: f64) -> Result<Self> {
        self.target_proportion = u;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parasites_per_infection == 0 {
            return Err(invalid("at least one parasite per infection is required"));
        }
        if !(self.target_proportion > 0.0 && self.target_proportion <= 1.0) {
            return Err(invalid(format!(
                "target proportion must lie in (0,1], got {}",
                self.target_proportion
            )));
        }
        if self.generation_cap == 0 {
            return Err(invalid("generation cap must be positive"));
        }
        Ok(())
    }
}

/// `round(a * sqrt(degree_scale))`, clamped to at least one parasite.
pub fn parasites_for(a: f64, degree_scale: f64) -> u32 {
    ((a * degree_scale.sqrt()).round() as u32).max(1)
}

/// Scratch buffers for neighbor sampling.
#[derive(Debug, Default)]
pub struct ScatterScratch {
    candidates: Candidates,
    fallback: Vec<usize>,
}

/// A host population graph on which the dynamics can run.
pub trait Topology: Sync {
    fn vertex_count(&self) -> usize;

    /// The vertex infected in generation 0.
    fn initial_vertex(&self) -> Result<usize>;

    /// Draws `count` independent uniform neighbors of `origin`.
    fn scatter<R: Rng + ?Sized>(
        &self,
        origin: usize,
        count: u32,
        rng: &mut R,
        scratch: &mut ScatterScratch,
        sink: &mut dyn FnMut(usize),
    );

    fn neighbors(&self, v: usize) -> Vec<usize>;

    fn default_generation_cap(&self) -> u64;

    /// Index of the `r_N/2` distance shell of `v` around `origin`; `None`
    /// without geometry.
    fn box_distance(&self, _v: usize, _origin: usize) -> Option<u64> {
        None
    }

    /// Cell of `v` in the fixed partition into boxes of side `r_N/2`.
    fn half_box(&self, _v: usize) -> Option<u64> {
        None
    }
}

/// Complete graph on `size` vertices; edges are implicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompleteGraph {
    size: usize,
}

pub fn build_complete_graph(size: usize) -> Result<CompleteGraph> {
    if size < 2 {
        return Err(invalid(format!(
            "complete graph needs at least 2 vertices, got {size}"
        )));
    }
    if size > u32::MAX as usize {
        return Err(invalid("complete graph too large"));
    }
    Ok(CompleteGraph { size })
}

impl CompleteGraph {
    pub fn degree(&self, _v: usize) -> usize {
        self.size - 1
    }
}

impl Topology for CompleteGraph {
    fn vertex_count(&self) -> usize {
        self.size
    }

    /// Vertex-transitive, so vertex 0.
    fn initial_vertex(&self) -> Result<usize> {
        Ok(0)
    }

    #[inline]
    fn scatter<R: Rng + ?Sized>(
        &self,
        origin: usize,
        count: u32,
        rng: &mut R,
        _scratch: &mut ScatterScratch,
        sink: &mut dyn FnMut(usize),
    ) {
        let others = self.size - 1;
        for _ in 0..count {
            let j = rng.random_range(0..others);
            sink(if j >= origin { j + 1 } else { j });
        }
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.size).filter(|&w| w != v).collect()
    }

    fn default_generation_cap(&self) -> u64 {
        10_000
    }
}

/// Geometric graph together with its `r_N/2` box partition.
#[derive(Clone, Debug)]
pub struct GeometricTopology<'g, T> {
    graph: &'g GeometricGraph<T>,
    half_boxes: CellLayout,
}

impl<'g, T: Scalar> GeometricTopology<'g, T> {
    pub fn new(graph: &'g GeometricGraph<T>) -> Result<Self> {
        let half_boxes = CellLayout::new(graph.space(), graph.params().radius / 2.0)?;
        Ok(GeometricTopology { graph, half_boxes })
    }

    pub fn graph(&self) -> &GeometricGraph<T> {
        self.graph
    }
}

impl<T: Scalar> Topology for GeometricTopology<'_, T> {
    fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    fn initial_vertex(&self) -> Result<usize> {
        self.graph.closest_to_center()
    }

    #[inline]
    fn scatter<R: Rng + ?Sized>(
        &self,
        origin: usize,
        count: u32,
        rng: &mut R,
        scratch: &mut ScatterScratch,
        sink: &mut dyn FnMut(usize),
    ) {
        self.graph.index().sample_neighbors(
            origin,
            count,
            rng,
            &mut scratch.candidates,
            &mut scratch.fallback,
            sink,
        );
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        self.graph.neighbors(v).expect("vertex of this graph")
    }

    /// `10 * ceil(1 / (2 r_N))`.
    fn default_generation_cap(&self) -> u64 {
        10 * (1.0 / (2.0 * self.graph.params().radius)).ceil().max(1.0) as u64
    }

    fn box_distance(&self, v: usize, origin: usize) -> Option<u64> {
        let pts = self.graph.points();
        let d = distance_unchecked(pts.space(), pts.point(v), pts.point(origin)).as_f64();
        Some((d / (self.graph.params().radius / 2.0)).floor() as u64)
    }

    fn half_box(&self, v: usize) -> Option<u64> {
        Some(self.half_boxes.cell_of(self.graph.points().point(v)))
    }
}

/// Where parasites go: live random draws or a pre-recorded tape.
pub trait Destinations {
    fn scatter<G: Topology>(&mut self, graph: &G, origin: usize, count: u32, sink: &mut dyn FnMut(usize));
}

/// Draws destinations from a random stream.
pub struct Sampled<'r, R: ?Sized> {
    rng: &'r mut R,
    scratch: ScatterScratch,
}

impl<'r, R: Rng + ?Sized> Sampled<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Sampled {
            rng,
            scratch: ScatterScratch::default(),
        }
    }
}

impl<R: Rng + ?Sized> Destinations for Sampled<'_, R> {
    #[inline]
    fn scatter<G: Topology>(&mut self, graph: &G, origin: usize, count: u32, sink: &mut dyn FnMut(usize)) {
        graph.scatter(origin, count, self.rng, &mut self.scratch, sink);
    }
}

/// Pre-drawn parasite destinations for every vertex. A vertex is infected
/// at most once per run, so replaying the tape couples two runs on the same
/// randomness.
#[derive(Clone, Debug)]
pub struct DestinationTape {
    per_vertex: Vec<Vec<usize>>,
}

impl DestinationTape {
    pub fn record<G: Topology, R: Rng + ?Sized>(graph: &G, parasites: u32, rng: &mut R) -> Self {
        let mut scratch = ScatterScratch::default();
        let per_vertex = (0..graph.vertex_count())
            .map(|v| {
                let mut dests = Vec::with_capacity(parasites as usize);
                graph.scatter(v, parasites, rng, &mut scratch, &mut |w| dests.push(w));
                dests
            })
            .collect();
        DestinationTape { per_vertex }
    }

    pub fn destinations(&self, v: usize) -> &[usize] {
        &self.per_vertex[v]
    }
}

impl Destinations for DestinationTape {
    fn scatter<G: Topology>(&mut self, _graph: &G, origin: usize, count: u32, sink: &mut dyn FnMut(usize)) {
        for &w in self.per_vertex[origin].iter().take(count as usize) {
            sink(w);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Susceptible,
    Infected,
    Removed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GenerationReport {
    pub g: u64,
    pub newly_infected: u64,
    pub cumulative: u64,
    /// Farthest `r_N/2` shell reached so far (geometric graphs only).
    pub max_box_distance: Option<u64>,
    /// New infections with some single origin contributing two or more attackers.
    pub cosame_count: u64,
    pub codiff_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Extinct {
        generation: u64,
        cumulative: u64,
    },
    TargetReached {
        generation: u64,
        cumulative: u64,
    },
    FullInvasion {
        generation: u64,
    },
    CapExceeded {
        generation: u64,
        cumulative: u64,
        infected: u64,
    },
}

impl Outcome {
    /// Whether the target proportion of hosts was reached.
    pub fn invaded(&self) -> bool {
        matches!(self, Outcome::TargetReached { .. } | Outcome::FullInvasion { .. })
    }

    /// The invasion time `T` for full invasions.
    pub fn invasion_time(&self) -> Option<u64> {
        match *self {
            Outcome::FullInvasion { generation } => Some(generation),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
struct BoxTracker {
    /// Box id of every vertex.
    box_of: Vec<u64>,
    /// Vertex total per box, keyed by sorted box id.
    ids: Vec<u64>,
    totals: Vec<u32>,
    hit: Vec<u32>,
    completed_at: Option<u64>,
}

impl BoxTracker {
    fn new<G: Topology>(graph: &G) -> Result<Self> {
        let box_of = (0..graph.vertex_count())
            .map(|v| {
                graph
                    .half_box(v)
                    .ok_or(Error::UnsupportedTopology("box tracking needs geometry"))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ids = box_of.clone();
        ids.sort_unstable();
        ids.dedup();
        let mut totals = vec![0u32; ids.len()];
        for b in &box_of {
            totals[ids.binary_search(b).expect("box listed")] += 1;
        }
        let hit = vec![0; ids.len()];
        Ok(BoxTracker {
            box_of,
            ids,
            totals,
            hit,
            completed_at: None,
        })
    }

    fn mark(&mut self, v: usize, generation: u64) {
        let k = self.ids.binary_search(&self.box_of[v]).expect("box listed");
        self.hit[k] += 1;
        if self.hit[k] == self.totals[k] && self.completed_at.is_none() {
            self.completed_at = Some(generation);
        }
    }
}

const NO_ORIGIN: u32 = u32::MAX;

/// The `(S_g, I_g, R_g)` partition plus bookkeeping.
#[derive(Clone, Debug)]
pub struct EpidemicState {
    generation: u64,
    status: Vec<Status>,
    infected: Vec<u32>,
    susceptible: u64,
    removed: u64,
    origin: usize,
    max_box: Option<u64>,
    boxes: Option<BoxTracker>,
    // Per-generation attack tallies, reset after each step.
    tally: Vec<u32>,
    last_origin: Vec<u32>,
    run: Vec<u32>,
    same_origin_pair: Vec<bool>,
    touched: Vec<u32>,
}

impl EpidemicState {
    /// `I_0 = {x_0}` with `x_0` the topology's initial vertex.
    pub fn new<G: Topology>(graph: &G) -> Result<Self> {
        if graph.vertex_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        let origin = graph.initial_vertex()?;
        Self::with_origin(graph, origin)
    }

    pub fn with_origin<G: Topology>(graph: &G, origin: usize) -> Result<Self> {
        let n = graph.vertex_count();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if origin >= n {
            return Err(invalid(format!(
                "origin {origin} outside a graph of {n} vertices"
            )));
        }
        let mut status = vec![Status::Susceptible; n];
        status[origin] = Status::Infected;
        Ok(EpidemicState {
            generation: 0,
            status,
            infected: vec![origin as u32],
            susceptible: n as u64 - 1,
            removed: 0,
            origin,
            max_box: graph.box_distance(origin, origin),
            boxes: None,
            tally: vec![0; n],
            last_origin: vec![NO_ORIGIN; n],
            run: vec![0; n],
            same_origin_pair: vec![false; n],
            touched: Vec::new(),
        })
    }

    /// Enables tracking of the first generation at which some `r_N/2` box
    /// is entirely infected or removed.
    pub fn track_boxes<G: Topology>(mut self, graph: &G) -> Result<Self> {
        let mut tracker = BoxTracker::new(graph)?;
        for (v, s) in self.status.iter().enumerate() {
            if *s != Status::Susceptible {
                tracker.mark(v, self.generation);
            }
        }
        self.boxes = Some(tracker);
        Ok(self)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn vertex_count(&self) -> usize {
        self.status.len()
    }

    pub fn status(&self, v: usize) -> Status {
        self.status[v]
    }

    pub fn infected(&self) -> impl Iterator<Item = usize> + '_ {
        self.infected.iter().map(|&v| v as usize)
    }

    pub fn infected_count(&self) -> u64 {
        self.infected.len() as u64
    }

    pub fn susceptible_count(&self) -> u64 {
        self.susceptible
    }

    pub fn removed_count(&self) -> u64 {
        self.removed
    }

    /// `I_0 + ... + I_g`, which equals `|I_g| + |R_g|`.
    pub fn cumulative(&self) -> u64 {
        self.infected.len() as u64 + self.removed
    }

    pub fn is_extinct(&self) -> bool {
        self.infected.is_empty()
    }

    /// Farthest `r_N/2` shell reached so far, if the graph has geometry.
    pub fn max_box_distance(&self) -> Option<u64> {
        self.max_box
    }

    /// First generation at which a whole `r_N/2` box was infected or
    /// removed, when box tracking is on.
    pub fn first_full_box(&self) -> Option<u64> {
        self.boxes.as_ref().and_then(|b| b.completed_at)
    }

    /// Checks the partition and counting invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let (mut s, mut i, mut r) = (0u64, 0u64, 0u64);
        for st in &self.status {
            match st {
                Status::Susceptible => s += 1,
                Status::Infected => i += 1,
                Status::Removed => r += 1,
            }
        }
        let ok = s == self.susceptible
            && i == self.infected.len() as u64
            && r == self.removed
            && s + i + r == self.status.len() as u64
            && self
                .infected
                .iter()
                .all(|&v| self.status[v as usize] == Status::Infected);
        if ok {
            Ok(())
        } else {
            Err(Error::IllegalState(format!(
                "partition broken at generation {}: S={s}/{}, I={i}/{}, R={r}/{}",
                self.generation,
                self.susceptible,
                self.infected.len(),
                self.removed
            )))
        }
    }

    /// One generation with live random destinations.
    pub fn step_generation<G: Topology, R: Rng + ?Sized>(
        &mut self,
        graph: &G,
        params: &EpidemicParams,
        rng: &mut R,
    ) -> Result<GenerationReport> {
        self.step_with(graph, params, &mut Sampled::new(rng))
    }

    /// One generation drawing destinations from `dest`.
    pub fn step_with<G: Topology, D: Destinations>(
        &mut self,
        graph: &G,
        params: &EpidemicParams,
        dest: &mut D,
    ) -> Result<GenerationReport> {
        if self.infected.is_empty() {
            return Err(Error::IllegalState("no infected hosts left".into()));
        }
        if graph.vertex_count() != self.status.len() {
            return Err(invalid("state belongs to a different graph"));
        }
        let v = params.parasites_per_infection;
        for k in 0..self.infected.len() {
            let x = self.infected[k];
            let status = &self.status;
            let tally = &mut self.tally;
            let last_origin = &mut self.last_origin;
            let run = &mut self.run;
            let same = &mut self.same_origin_pair;
            let touched = &mut self.touched;
            dest.scatter(graph, x as usize, v, &mut |y| {
                if status[y] != Status::Susceptible {
                    return;
                }
                if tally[y] == 0 {
                    touched.push(y as u32);
                }
                tally[y] += 1;
                if last_origin[y] == x {
                    run[y] += 1;
                    if run[y] >= 2 {
                        same[y] = true;
                    }
                } else {
                    last_origin[y] = x;
                    run[y] = 1;
                }
            });
        }

        for &x in &self.infected {
            self.status[x as usize] = Status::Removed;
        }
        self.removed += self.infected.len() as u64;
        self.infected.clear();
        self.generation += 1;

        let (mut cosame, mut codiff) = (0u64, 0u64);
        for k in 0..self.touched.len() {
            let y = self.touched[k] as usize;
            let same = self.same_origin_pair[y];
            let infect = match params.mode {
                Mode::Full => self.tally[y] >= 2,
                Mode::CoSameOnly => same,
            };
            self.tally[y] = 0;
            self.last_origin[y] = NO_ORIGIN;
            self.run[y] = 0;
            self.same_origin_pair[y] = false;
            if infect {
                if same {
                    cosame += 1;
                } else {
                    codiff += 1;
                }
                self.status[y] = Status::Infected;
                self.infected.push(y as u32);
                if let Some(b) = graph.box_distance(y, self.origin) {
                    self.max_box = Some(self.max_box.map_or(b, |m| m.max(b)));
                }
                if let Some(t) = self.boxes.as_mut() {
                    t.mark(y, self.generation);
                }
            }
        }
        self.touched.clear();
        self.susceptible -= self.infected.len() as u64;

        Ok(GenerationReport {
            g: self.generation,
            newly_infected: self.infected.len() as u64,
            cumulative: self.cumulative(),
            max_box_distance: self.max_box,
            cosame_count: cosame,
            codiff_count: codiff,
        })
    }

    fn absorbed(&self, params: &EpidemicParams) -> Option<Outcome> {
        let n = self.status.len() as u64;
        let cumulative = self.cumulative();
        if cumulative as f64 >= params.target_proportion * n as f64 {
            return Some(if cumulative == n && params.target_proportion >= 1.0 {
                Outcome::FullInvasion {
                    generation: self.generation,
                }
            } else {
                Outcome::TargetReached {
                    generation: self.generation,
                    cumulative,
                }
            });
        }
        if self.infected.is_empty() {
            return Some(Outcome::Extinct {
                generation: self.generation,
                cumulative,
            });
        }
        if self.generation >= params.generation_cap {
            return Some(Outcome::CapExceeded {
                generation: self.generation,
                cumulative,
                infected: self.infected.len() as u64,
            });
        }
        None
    }

    /// Steps until extinction, the target proportion, or the generation cap.
    pub fn run_to_absorption<G: Topology, R: Rng + ?Sized>(
        &mut self,
        graph: &G,
        params: &EpidemicParams,
        rng: &mut R,
    ) -> Result<(Outcome, Vec<GenerationReport>)> {
        self.run_with(graph, params, &mut Sampled::new(rng))
    }

    pub fn run_with<G: Topology, D: Destinations>(
        &mut self,
        graph: &G,
        params: &EpidemicParams,
        dest: &mut D,
    ) -> Result<(Outcome, Vec<GenerationReport>)> {
        params.validate()?;
        let mut reports = Vec::new();
        loop {
            if let Some(outcome) = self.absorbed(params) {
                return Ok((outcome, reports));
            }
            reports.push(self.step_with(graph, params, dest)?);
        }
    }
}

/// Validates `params` and infects the topology's initial vertex.
pub fn init_epidemic<G: Topology>(graph: &G, params: &EpidemicParams) -> Result<EpidemicState> {
    params.validate()?;
    EpidemicState::new(graph)
}

/// Farthest `r_N/2` shell around `x_0` reached by `I_g` and `R_g`.
pub fn wavefront_distance<G: Topology>(state: &EpidemicState, _graph: &G) -> Result<u64> {
    state.max_box_distance().ok_or(Error::UnsupportedTopology(
        "wavefront distance needs a geometric graph",
    ))
}

/// Writes `g,new_infected,cumulative,box_distance,cosame,codiff` rows.
pub fn write_trace<W: std::io::Write>(out: W, reports: &[GenerationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "g",
        "new_infected",
        "cumulative",
        "box_distance",
        "cosame",
        "codiff",
    ])?;
    for r in reports {
        w.write_record([
            r.g.to_string(),
            r.newly_infected.to_string(),
            r.cumulative.to_string(),
            r.max_box_distance.map(|b| b.to_string()).unwrap_or_default(),
            r.cosame_count.to_string(),
            r.codiff_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
