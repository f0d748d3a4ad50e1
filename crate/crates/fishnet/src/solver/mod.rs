//! Event-by-event simulation of a softening fishnet under displacement
//! control.
//!
//! Every event solves one linear problem: a unit displacement is applied to
//! the prescribed column with the current secant stiffnesses, and the load
//! factor bringing exactly one link to its residual strength is found. That
//! link takes one discrete softening jump, the structure is treated as brand
//! new (total secant formulation, loaded from the stress-free state), and
//! the loop repeats. The control variable is the event count, not load or
//! displacement, so snap-back needs no special handling.
//!
//! The factorization of the reduced stiffness matrix is reused across
//! events through rank-one downdates (one link changed), with a periodic
//! full refactorization to bound drift. Correctness of the fast path is
//! defined by agreement with a fresh factorization every event.

mod cholesky;

pub use cholesky::{DenseCholesky, NotPositiveDefinite};

use crate::mesh::{FishnetTopology, MeshError, SofteningLaw};

/// Relative floor under which the transmitted unit-displacement stress is
/// treated as zero (specimen separation).
const TRANSMISSION_FLOOR: f64 = 1e-12;

/// Errors from the event loop.
#[derive(Debug)]
pub enum SolverError {
    /// Strength field length must equal the link count.
    StrengthCountMismatch { expected: usize, got: usize },
    /// No link sees tensile stress before any damage occurred.
    DegenerateLoad,
    /// The event budget (`links * jumps`) ran out before termination; the
    /// partial record is attached.
    BudgetExhausted { record: Box<SimulationRecord> },
    /// Invalid mesh or law configuration.
    Mesh(MeshError),
}

impl std::fmt::Display for SolverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverError::StrengthCountMismatch { expected, got } => {
                write!(f, "expected {expected} strengths, got {got}")
            }
            SolverError::DegenerateLoad => {
                write!(f, "no tensile load path in the undamaged net")
            }
            SolverError::BudgetExhausted { record } => {
                write!(
                    f,
                    "event budget exhausted after {} events without termination",
                    record.events.len()
                )
            }
            SolverError::Mesh(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SolverError {}

impl From<MeshError> for SolverError {
    fn from(e: MeshError) -> Self {
        SolverError::Mesh(e)
    }
}

/// One softening event.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Event {
    /// Zero-based event index.
    pub index: u32,
    /// Distinct damaged links after this event.
    pub distinct_count: u32,
    /// Nominal stress at which the event occurs (MPa).
    pub sigma_n: f64,
    /// Link that softens.
    pub link: u32,
    /// True when the link had already been damaged before this event.
    pub localized: bool,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TerminationReason {
    /// No load path remains across the net.
    Separation,
    /// Nominal stress fell below the configured fraction of the peak.
    PostPeakDrop,
}

/// Full outcome of one replica.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimulationRecord {
    pub events: Vec<Event>,
    /// Peak nominal stress (MPa).
    pub sigma_max: f64,
    /// Distinct damaged links at the first event attaining the peak.
    pub n_c: u32,
    /// Index of that event.
    pub peak_event: u32,
    /// Entry `m` is the ratio of the (m+1)-th smallest strength to the
    /// nominal stress of the scattering event that damaged the (m+1)-th
    /// distinct link, over events up to and including the peak. Localized
    /// events (repeat damage on an already-damaged link) carry no trace
    /// entry.
    pub ratio_trace: Vec<f64>,
    pub termination: TerminationReason,
    /// Linear solves performed (one per event).
    pub solves: u64,
    /// Full factorizations performed.
    pub refactorizations: u64,
}

/// Knobs of the event loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimulationConfig {
    /// Stop once the nominal stress falls below this fraction of the
    /// running peak.
    pub termination_fraction: f64,
    /// Full refactorization cadence of the fast path; `1` factors fresh on
    /// every event.
    pub refactor_interval: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            termination_fraction: 0.05,
            refactor_interval: 64,
        }
    }
}

/// Outcome of a single [`Simulation::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Damaged(Event),
    Finished(TerminationReason),
}

/// Damage-field snapshot for JSON export.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DamageSnapshot {
    pub stage: String,
    pub event: Option<u32>,
    pub distinct_count: u32,
    pub sigma_n: Option<f64>,
    pub rows: usize,
    pub gaps: usize,
    pub nodes: Vec<SnapshotNode>,
    pub links: Vec<SnapshotLink>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SnapshotNode {
    pub id: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SnapshotLink {
    pub id: usize,
    pub a: usize,
    pub b: usize,
    pub gap: usize,
    pub strength: f64,
    pub jumps: u32,
    /// Damage level `jumps / total_jumps` in `[0, 1]`.
    pub dmg: f64,
}

/// In-flight event loop for one replica.
pub struct Simulation<'a> {
    topo: &'a FishnetTopology,
    law: SofteningLaw,
    strengths: &'a [f64],
    kr_table: Vec<f64>,
    jumps: Vec<u32>,
    adjacency: Vec<Vec<(u32, u32)>>,
    reachable: Vec<bool>,
    grounded: Vec<bool>,
    config: SimulationConfig,
    factor: Option<DenseCholesky>,
    events_since_refactor: usize,
    // scratch buffers, one allocation each for the whole run
    displacements: Vec<f64>,
    rhs: Vec<f64>,
    stresses: Vec<f64>,
    update_vec: Vec<f64>,
    // bookkeeping
    events: Vec<Event>,
    distinct_count: u32,
    sigma_max: f64,
    peak_event: u32,
    sigma_n_unit: f64,
    solves: u64,
    refactorizations: u64,
}

impl<'a> Simulation<'a> {
    pub fn new(
        topo: &'a FishnetTopology,
        strengths: &'a [f64],
        law: SofteningLaw,
        config: SimulationConfig,
    ) -> Result<Self, SolverError> {
        if strengths.len() != topo.link_count() {
            return Err(SolverError::StrengthCountMismatch {
                expected: topo.link_count(),
                got: strengths.len(),
            });
        }
        let mut adjacency: Vec<Vec<(u32, u32)>> = (0..topo.node_count())
            .map(|_| Vec::with_capacity(4))
            .collect();
        for (id, link) in topo.links().iter().enumerate() {
            adjacency[link.a].push((id as u32, link.b as u32));
            adjacency[link.b].push((id as u32, link.a as u32));
        }
        Ok(Simulation {
            kr_table: law.stiffness_table(),
            jumps: vec![0; topo.link_count()],
            adjacency,
            reachable: vec![true; topo.node_count()],
            grounded: vec![false; topo.interior_count()],
            config,
            factor: None,
            events_since_refactor: 0,
            displacements: vec![0.0; topo.node_count()],
            rhs: vec![0.0; topo.interior_count()],
            stresses: vec![0.0; topo.link_count()],
            update_vec: vec![0.0; topo.interior_count()],
            events: Vec::new(),
            distinct_count: 0,
            sigma_max: f64::NEG_INFINITY,
            peak_event: 0,
            sigma_n_unit: 0.0,
            solves: 0,
            refactorizations: 0,
            topo,
            law,
            strengths,
        })
    }

    pub fn law(&self) -> &SofteningLaw {
        &self.law
    }

    pub fn jumps(&self) -> &[u32] {
        &self.jumps
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Per-link stresses of the last unit-displacement solve.
    pub fn unit_stresses(&self) -> &[f64] {
        &self.stresses
    }

    /// Full nodal displacement field of the last unit solve (boundary
    /// entries included).
    pub fn unit_displacements(&self) -> &[f64] {
        &self.displacements
    }

    /// Nominal stress transmitted under the last unit solve (MPa).
    pub fn sigma_n_unit(&self) -> f64 {
        self.sigma_n_unit
    }

    fn link_stiffness(&self, link: usize) -> f64 {
        self.kr_table[self.jumps[link] as usize]
    }

    fn stiffness_vector(&self) -> Vec<f64> {
        (0..self.topo.link_count())
            .map(|i| self.link_stiffness(i))
            .collect()
    }

    fn factorize_fresh(&mut self) -> Result<DenseCholesky, NotPositiveDefinite> {
        let stiffness = self.stiffness_vector();
        let (matrix, _) =
            self.topo
                .assemble_unit_system(&stiffness, &self.grounded, self.topo.k0());
        self.refactorizations += 1;
        DenseCholesky::factor(&matrix, self.topo.interior_count())
    }

    /// Assembles and solves the current state from scratch, bypassing the
    /// incremental factor. Reference path for validating the fast path.
    pub fn fresh_unit_displacements(&self) -> Result<Vec<f64>, NotPositiveDefinite> {
        let stiffness = self.stiffness_vector();
        let (matrix, mut rhs) =
            self.topo
                .assemble_unit_system(&stiffness, &self.grounded, self.topo.k0());
        let chol = DenseCholesky::factor(&matrix, self.topo.interior_count())?;
        chol.solve_in_place(&mut rhs);
        Ok(rhs)
    }

    fn build_rhs(&mut self) {
        self.rhs.iter_mut().for_each(|x| *x = 0.0);
        let first_prescribed = self.topo.gaps() * self.topo.rows();
        for (id, link) in self.topo.links().iter().enumerate() {
            if link.b >= first_prescribed {
                if let Some(dof) = self.topo.interior_dof(link.a) {
                    self.rhs[dof] += self.kr_table[self.jumps[id] as usize];
                }
            }
        }
    }

    /// Solves the unit problem and fills displacement/stress buffers.
    /// Returns `false` when the system is no longer positive definite.
    fn solve_unit(&mut self) -> bool {
        if self.factor.is_none() || self.events_since_refactor >= self.config.refactor_interval {
            match self.factorize_fresh() {
                Ok(f) => {
                    self.factor = Some(f);
                    self.events_since_refactor = 0;
                }
                Err(_) => return false,
            }
        }
        self.build_rhs();
        let factor = self.factor.as_ref().expect("ensured above");
        factor.solve_in_place(&mut self.rhs);
        self.solves += 1;

        let rows = self.topo.rows();
        let first_prescribed = self.topo.gaps() * rows;
        for node in 0..self.topo.node_count() {
            self.displacements[node] = match self.topo.interior_dof(node) {
                Some(dof) => self.rhs[dof],
                None => {
                    if node >= first_prescribed {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        let area = self.topo.link_area();
        let mut reaction = 0.0;
        for (id, link) in self.topo.links().iter().enumerate() {
            let k = self.kr_table[self.jumps[id] as usize];
            let force = k * (self.displacements[link.b] - self.displacements[link.a]);
            self.stresses[id] = force / area;
            if link.gap == self.topo.gaps() - 1 {
                reaction += force;
            }
        }
        self.sigma_n_unit = reaction / (2.0 * rows as f64 * area);
        true
    }

    /// Finds the load factor and link of the next softening event:
    /// the minimum over live tensile links of residual strength over unit
    /// stress, ties broken by lowest link id.
    fn critical_link(&self) -> Option<(f64, usize)> {
        let total = self.law.total_jumps();
        let mut best: Option<(f64, usize)> = None;
        for (id, &stress) in self.stresses.iter().enumerate() {
            let j = self.jumps[id];
            if j >= total || stress <= 0.0 {
                continue;
            }
            let residual = self.strengths[id] * (total - j) as f64 / total as f64;
            let factor = residual / stress;
            if best.map_or(true, |(f, _)| factor < f) {
                best = Some((factor, id));
            }
        }
        best
    }

    /// Marks nodes cut off from both boundaries by dead links and grounds
    /// them so the reduced system stays positive definite. Returns the dofs
    /// that changed. Connectivity only shrinks, so this runs only when a
    /// link dies.
    fn refresh_reachability(&mut self) -> Vec<usize> {
        let total = self.law.total_jumps();
        let mut seen = vec![false; self.topo.node_count()];
        let mut stack: Vec<u32> = self
            .topo
            .fixed_nodes()
            .chain(self.topo.prescribed_nodes())
            .map(|n| n as u32)
            .collect();
        for &n in &stack {
            seen[n as usize] = true;
        }
        while let Some(node) = stack.pop() {
            for &(link, other) in &self.adjacency[node as usize] {
                if self.jumps[link as usize] < total && !seen[other as usize] {
                    seen[other as usize] = true;
                    stack.push(other);
                }
            }
        }
        let mut newly_grounded = Vec::new();
        for node in 0..self.topo.node_count() {
            if self.reachable[node] && !seen[node] {
                self.reachable[node] = false;
                if let Some(dof) = self.topo.interior_dof(node) {
                    self.grounded[dof] = true;
                    newly_grounded.push(dof);
                }
            }
        }
        newly_grounded
    }

    /// Applies one jump to `link` and patches the factor by rank-one
    /// modifications. Any modification failure invalidates the factor so the
    /// next event refactorizes.
    fn apply_jump(&mut self, link: usize) {
        let j = self.jumps[link] as usize;
        self.jumps[link] += 1;
        let delta = self.kr_table[j + 1] - self.kr_table[j];
        debug_assert!(delta < 0.0);

        if self.factor.is_some() {
            let scale = (-delta).sqrt();
            self.update_vec.iter_mut().for_each(|x| *x = 0.0);
            let l = self.topo.links()[link];
            if let Some(dof) = self.topo.interior_dof(l.a) {
                self.update_vec[dof] = scale;
            }
            if let Some(dof) = self.topo.interior_dof(l.b) {
                self.update_vec[dof] = -scale;
            }
            let ok = self
                .factor
                .as_mut()
                .expect("checked above")
                .rank_one_modify(&mut self.update_vec, -1.0)
                .is_ok();
            if !ok {
                self.factor = None;
            }
        }

        if self.jumps[link] == self.law.total_jumps() {
            let grounded = self.refresh_reachability();
            if self.factor.is_some() {
                let ground_scale = self.topo.k0().sqrt();
                for dof in grounded {
                    self.update_vec.iter_mut().for_each(|x| *x = 0.0);
                    self.update_vec[dof] = ground_scale;
                    let ok = self
                        .factor
                        .as_mut()
                        .expect("checked above")
                        .rank_one_modify(&mut self.update_vec, 1.0)
                        .is_ok();
                    if !ok {
                        self.factor = None;
                        break;
                    }
                }
            }
        }
        self.events_since_refactor += 1;
    }

    /// Runs one event. The first call on a net with no tensile path reports
    /// a degenerate load; afterwards a vanished load path means separation.
    pub fn step(&mut self) -> Result<StepOutcome, SolverError> {
        let transmission_floor =
            TRANSMISSION_FLOOR * self.topo.modulus() / (self.topo.gaps() as f64 * self.topo.link_length());
        if !self.solve_unit() || self.sigma_n_unit <= transmission_floor {
            return if self.events.is_empty() {
                Err(SolverError::DegenerateLoad)
            } else {
                Ok(StepOutcome::Finished(TerminationReason::Separation))
            };
        }
        let Some((load_factor, link)) = self.critical_link() else {
            return if self.events.is_empty() {
                Err(SolverError::DegenerateLoad)
            } else {
                Ok(StepOutcome::Finished(TerminationReason::Separation))
            };
        };
        let sigma_n = load_factor * self.sigma_n_unit;
        let localized = self.jumps[link] >= 1;
        if !localized {
            self.distinct_count += 1;
        }
        let event = Event {
            index: self.events.len() as u32,
            distinct_count: self.distinct_count,
            sigma_n,
            link: link as u32,
            localized,
        };
        self.events.push(event);
        if sigma_n > self.sigma_max {
            self.sigma_max = sigma_n;
            self.peak_event = event.index;
        }
        self.apply_jump(link);

        if sigma_n < self.config.termination_fraction * self.sigma_max {
            return Ok(StepOutcome::Finished(TerminationReason::PostPeakDrop));
        }
        Ok(StepOutcome::Damaged(event))
    }

    /// Distinct damaged links so far.
    pub fn distinct_count(&self) -> u32 {
        self.distinct_count
    }

    /// Damage-field snapshot of the current state.
    pub fn snapshot(&self, stage: &str) -> DamageSnapshot {
        let last = self.events.last();
        DamageSnapshot {
            stage: stage.to_string(),
            event: last.map(|e| e.index),
            distinct_count: self.distinct_count,
            sigma_n: last.map(|e| e.sigma_n),
            rows: self.topo.rows(),
            gaps: self.topo.gaps(),
            nodes: (0..self.topo.node_count())
                .map(|id| {
                    let (row, col) = self.topo.node_row_col(id);
                    SnapshotNode { id, row, col }
                })
                .collect(),
            links: self
                .topo
                .links()
                .iter()
                .enumerate()
                .map(|(id, l)| SnapshotLink {
                    id,
                    a: l.a,
                    b: l.b,
                    gap: l.gap,
                    strength: self.strengths[id],
                    jumps: self.jumps[id],
                    dmg: self.jumps[id] as f64 / self.law.total_jumps() as f64,
                })
                .collect(),
        }
    }

    fn into_record(self, termination: TerminationReason) -> SimulationRecord {
        let peak = self.peak_event as usize;
        let n_c = self.events[peak].distinct_count;
        let mut sorted = self.strengths.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ratio_trace = self.events[..=peak]
            .iter()
            .filter(|e| !e.localized)
            .map(|e| sorted[e.distinct_count as usize - 1] / e.sigma_n)
            .collect();
        SimulationRecord {
            sigma_max: self.sigma_max,
            n_c,
            peak_event: self.peak_event,
            ratio_trace,
            termination,
            solves: self.solves,
            refactorizations: self.refactorizations,
            events: self.events,
        }
    }

    /// Drives the loop to termination. The event budget is `links * jumps`
    /// (every link fully failed); exhausting it without termination is an
    /// error carrying the partial record.
    pub fn run_to_end(self) -> Result<SimulationRecord, SolverError> {
        self.run_with_observer(|_, _| {})
    }

    /// Like [`run_to_end`](Self::run_to_end), calling `observe` after every
    /// applied event. Used for damage-field snapshots and event-by-event
    /// validation.
    pub fn run_with_observer<F>(mut self, mut observe: F) -> Result<SimulationRecord, SolverError>
    where
        F: FnMut(&Simulation<'_>, &Event),
    {
        let budget = self.topo.link_count() * self.law.total_jumps() as usize;
        while self.events.len() <= budget {
            match self.step()? {
                StepOutcome::Damaged(event) => observe(&self, &event),
                StepOutcome::Finished(reason) => {
                    if reason == TerminationReason::PostPeakDrop {
                        // The terminating event was applied in this step.
                        let last = *self.events.last().expect("drop implies an event");
                        observe(&self, &last);
                    }
                    return Ok(self.into_record(reason));
                }
            }
        }
        Err(SolverError::BudgetExhausted {
            record: Box::new(self.into_record(TerminationReason::Separation)),
        })
    }
}

/// Convenience wrapper: build a [`Simulation`] and run it to termination.
pub fn run_simulation(
    topo: &FishnetTopology,
    strengths: &[f64],
    law: SofteningLaw,
    config: SimulationConfig,
) -> Result<SimulationRecord, SolverError> {
    Simulation::new(topo, strengths, law, config)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::FishnetTopology;

    fn uniform_strengths(topo: &FishnetTopology, value: f64) -> Vec<f64> {
        vec![value; topo.link_count()]
    }

    #[test]
    fn undamaged_uniform_net_has_uniform_stress() {
        let topo = FishnetTopology::with_default_constants(4, 5).unwrap();
        let strengths = uniform_strengths(&topo, 10.0);
        let law = SofteningLaw::from_ratio(topo.k0(), 0.2, 20).unwrap();
        let mut sim = Simulation::new(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        sim.step().unwrap();
        // Expected uniform link stress under unit end displacement: E/(C*L).
        let expected = topo.modulus() / (topo.gaps() as f64 * topo.link_length());
        for &s in sim.unit_stresses() {
            assert!((s - expected).abs() < 1e-9 * expected);
        }
        assert!((sim.sigma_n_unit() - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn tie_break_picks_lowest_link_id() {
        // On a two-row net the reduced system is diagonal, so the unit
        // solve gives bitwise-identical stresses for every link and uniform
        // strengths tie exactly.
        let topo = FishnetTopology::with_default_constants(2, 2).unwrap();
        let strengths = uniform_strengths(&topo, 8.0);
        let law = SofteningLaw::from_ratio(topo.k0(), 0.3, 10).unwrap();
        let mut sim = Simulation::new(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        let stresses = {
            let mut probe =
                Simulation::new(&topo, &strengths, law, SimulationConfig::default()).unwrap();
            probe.step().unwrap();
            probe.unit_stresses().to_vec()
        };
        assert!(
            stresses.windows(2).all(|w| w[0] == w[1]),
            "stresses must tie bitwise for this test to be meaningful"
        );
        match sim.step().unwrap() {
            StepOutcome::Damaged(e) => assert_eq!(e.link, 0),
            other => panic!("expected event, got {other:?}"),
        }
    }

    #[test]
    fn first_event_stress_is_minimum_strength() {
        let topo = FishnetTopology::with_default_constants(4, 4).unwrap();
        let dist = crate::strength::StrengthDistribution::default();
        let strengths = dist.sample_strengths(topo.link_count(), 11).unwrap();
        let law = SofteningLaw::from_ratio(topo.k0(), 0.2, 20).unwrap();
        let record = run_simulation(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        let min = strengths.iter().cloned().fold(f64::INFINITY, f64::min);
        let first = record.events[0].sigma_n;
        assert!(
            ((first - min) / min).abs() <= 1e-9,
            "first event {first} vs min strength {min}"
        );
        assert!(!record.events[0].localized);
        assert_eq!(record.events[0].distinct_count, 1);
    }

    #[test]
    fn brittle_limit_runs_to_completion() {
        let topo = FishnetTopology::with_default_constants(4, 4).unwrap();
        let dist = crate::strength::StrengthDistribution::default();
        let strengths = dist.sample_strengths(topo.link_count(), 5).unwrap();
        let law = SofteningLaw::from_ratio(topo.k0(), 0.5, 1).unwrap();
        let record = run_simulation(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        let min = strengths.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(record.sigma_max >= record.events[0].sigma_n);
        assert!((record.events[0].sigma_n - min).abs() <= 1e-9 * min);
    }

    #[test]
    fn identical_inputs_give_bitwise_identical_records() {
        let topo = FishnetTopology::with_default_constants(4, 6).unwrap();
        let dist = crate::strength::StrengthDistribution::default();
        let strengths = dist.sample_strengths(topo.link_count(), 21).unwrap();
        let law = SofteningLaw::from_ratio(topo.k0(), 0.2, 10).unwrap();
        let a = run_simulation(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        let b = run_simulation(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_count_increments_exactly_on_scattered_events() {
        let topo = FishnetTopology::with_default_constants(4, 4).unwrap();
        let dist = crate::strength::StrengthDistribution::default();
        let strengths = dist.sample_strengths(topo.link_count(), 33).unwrap();
        let law = SofteningLaw::from_ratio(topo.k0(), 0.3, 8).unwrap();
        let record = run_simulation(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        let mut k = 0;
        for e in &record.events {
            if !e.localized {
                k += 1;
            }
            assert_eq!(e.distinct_count, k, "event {}", e.index);
        }
        assert_eq!(
            record.n_c,
            record.events[record.peak_event as usize].distinct_count
        );
        let max = record
            .events
            .iter()
            .map(|e| e.sigma_n)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, record.sigma_max);
    }

    #[test]
    fn ratio_trace_starts_at_one() {
        let topo = FishnetTopology::with_default_constants(4, 4).unwrap();
        let dist = crate::strength::StrengthDistribution::default();
        for seed in 0..8 {
            let strengths = dist.sample_strengths(topo.link_count(), seed).unwrap();
            let law = SofteningLaw::from_ratio(topo.k0(), 0.1, 20).unwrap();
            let record =
                run_simulation(&topo, &strengths, law, SimulationConfig::default()).unwrap();
            assert!(
                (record.ratio_trace[0] - 1.0).abs() < 1e-9,
                "seed {seed}: {}",
                record.ratio_trace[0]
            );
            assert_eq!(record.ratio_trace.len(), record.n_c as usize);
        }
    }

    #[test]
    fn rank_one_path_matches_fresh_solve_on_small_net() {
        let topo = FishnetTopology::with_default_constants(2, 2).unwrap();
        let dist = crate::strength::StrengthDistribution::default();
        let strengths = dist.sample_strengths(topo.link_count(), 3).unwrap();
        let law = SofteningLaw::from_ratio(topo.k0(), 0.2, 10).unwrap();
        let config = SimulationConfig {
            refactor_interval: usize::MAX,
            ..SimulationConfig::default()
        };
        let mut sim = Simulation::new(&topo, &strengths, law, config).unwrap();
        for _ in 0..30 {
            let fresh = match sim.fresh_unit_displacements() {
                Ok(f) => f,
                Err(_) => break,
            };
            match sim.step().unwrap() {
                StepOutcome::Finished(_) => break,
                StepOutcome::Damaged(_) => {}
            }
            let scale = fresh.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            let fast = &sim.unit_displacements();
            for (dof, expect) in fresh.iter().enumerate() {
                // interior dofs start after the fixed column
                let got = fast[topo.rows() + dof];
                assert!(
                    (got - expect).abs() <= 1e-8 * scale.max(1.0),
                    "dof {dof}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn stress_redistribution_perturbs_neighbors_most() {
        // 2x2 net: after the first jump at link l, the stress change must be
        // largest (in magnitude) among links sharing a node with l.
        let topo = FishnetTopology::with_default_constants(2, 2).unwrap();
        let mut strengths = uniform_strengths(&topo, 10.0);
        strengths[3] = 5.0; // unique weakest
        let law = SofteningLaw::from_ratio(topo.k0(), 0.5, 4).unwrap();
        let mut sim = Simulation::new(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        sim.step().unwrap();
        let before: Vec<f64> = sim.unit_stresses().to_vec();
        sim.step().unwrap();
        let after: Vec<f64> = sim.unit_stresses().to_vec();
        let damaged = topo.links()[3];
        let mut neighbor_max = 0.0f64;
        let mut other_max = 0.0f64;
        for (id, l) in topo.links().iter().enumerate() {
            if id == 3 {
                continue;
            }
            let delta = (after[id] - before[id]).abs();
            let touches = l.a == damaged.a || l.a == damaged.b || l.b == damaged.a || l.b == damaged.b;
            if touches {
                neighbor_max = neighbor_max.max(delta);
            } else {
                other_max = other_max.max(delta);
            }
        }
        assert!(
            neighbor_max >= other_max,
            "neighbors {neighbor_max} vs rest {other_max}"
        );
    }

    #[test]
    fn unit_reaction_is_nonnegative_every_event() {
        let topo = FishnetTopology::with_default_constants(4, 4).unwrap();
        let dist = crate::strength::StrengthDistribution::default();
        let strengths = dist.sample_strengths(topo.link_count(), 17).unwrap();
        let law = SofteningLaw::from_ratio(topo.k0(), 0.2, 10).unwrap();
        let mut sim = Simulation::new(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        loop {
            match sim.step().unwrap() {
                StepOutcome::Damaged(_) => assert!(sim.sigma_n_unit() >= 0.0),
                StepOutcome::Finished(_) => break,
            }
        }
    }
}
