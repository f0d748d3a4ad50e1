//! Hand-worked and cross-checked oracles for the event-driven solver.

use fishnet::mesh::{FishnetTopology, SofteningLaw};
use fishnet::solver::{
    run_simulation, DenseCholesky, Simulation, SimulationConfig, StepOutcome, TerminationReason,
};
use fishnet::strength::StrengthDistribution;

#[test]
fn parallel_springs_by_hand() {
    // Two springs side by side: displacement equals force over the summed
    // stiffness.
    let k1 = 3.0;
    let k2 = 5.0;
    let force = 4.0;
    let chol = DenseCholesky::factor(&[k1 + k2], 1).unwrap();
    let mut rhs = [force];
    chol.solve_in_place(&mut rhs);
    assert!((rhs[0] - force / (k1 + k2)).abs() < 1e-15);
}

#[test]
fn two_by_two_net_matches_explicit_algebra() {
    // On the 2-row, 2-gap net the reduced system is diagonal: each interior
    // node carries four links of stiffness k, two of them tied to the
    // prescribed column. Unit end displacement gives u = 2k/4k = 1/2 and
    // every link stress k/(2A).
    let topo = FishnetTopology::with_default_constants(2, 2).unwrap();
    let strengths = vec![10.0; topo.link_count()];
    let law = SofteningLaw::from_ratio(topo.k0(), 0.5, 4).unwrap();
    let mut sim = Simulation::new(&topo, &strengths, law, SimulationConfig::default()).unwrap();
    sim.step().unwrap();
    for node in 2..4 {
        assert_eq!(sim.unit_displacements()[node], 0.5);
    }
    let expected_stress = topo.k0() * 0.5 / topo.link_area();
    for &s in sim.unit_stresses() {
        assert_eq!(s, expected_stress);
    }
    assert_eq!(sim.sigma_n_unit(), expected_stress);
}

#[test]
fn separation_terminates_every_replica() {
    // With no post-peak stress floor the run must end by separation, and
    // the specimen must have at least one fully failed gap region.
    let topo = FishnetTopology::with_default_constants(4, 4).unwrap();
    let dist = StrengthDistribution::default();
    let law = SofteningLaw::from_ratio(topo.k0(), 0.3, 5).unwrap();
    for seed in 0..10u64 {
        let strengths = dist.sample_strengths_stream(topo.link_count(), 0xD0, seed).unwrap();
        let config = SimulationConfig {
            termination_fraction: 0.0,
            ..SimulationConfig::default()
        };
        let record = run_simulation(&topo, &strengths, law, config).unwrap();
        assert_eq!(record.termination, TerminationReason::Separation, "seed {seed}");
    }
}

#[test]
fn peak_dominates_later_events() {
    let topo = FishnetTopology::with_default_constants(8, 8).unwrap();
    let dist = StrengthDistribution::default();
    let law = SofteningLaw::from_ratio(topo.k0(), 0.2, 20).unwrap();
    for seed in 0..10u64 {
        let strengths = dist.sample_strengths_stream(topo.link_count(), 0xD1, seed).unwrap();
        let record = run_simulation(&topo, &strengths, law, SimulationConfig::default()).unwrap();
        let peak = record.peak_event as usize;
        assert_eq!(record.events[peak].sigma_n, record.sigma_max);
        for event in &record.events[peak + 1..] {
            assert!(event.sigma_n <= record.sigma_max);
        }
        assert_eq!(record.n_c, record.events[peak].distinct_count);
    }
}

#[test]
fn stale_factor_recovers_by_refactorization() {
    // Run with an effectively infinite refactor interval; the conditioning
    // alarm alone must keep the run consistent with the fresh path.
    let topo = FishnetTopology::with_default_constants(4, 6).unwrap();
    let dist = StrengthDistribution::default();
    let strengths = dist.sample_strengths(topo.link_count(), 77).unwrap();
    let law = SofteningLaw::from_ratio(topo.k0(), 0.3, 10).unwrap();
    let never = SimulationConfig {
        refactor_interval: usize::MAX,
        ..SimulationConfig::default()
    };
    let always = SimulationConfig {
        refactor_interval: 1,
        ..SimulationConfig::default()
    };
    let a = run_simulation(&topo, &strengths, law, never).unwrap();
    let b = run_simulation(&topo, &strengths, law, always).unwrap();
    assert_eq!(a.events.len(), b.events.len());
    assert_eq!(a.n_c, b.n_c);
    for (x, y) in a.events.iter().zip(&b.events) {
        assert_eq!(x.link, y.link, "event {} diverged", x.index);
        assert!(
            ((x.sigma_n - y.sigma_n) / y.sigma_n).abs() < 1e-8,
            "event {}: {} vs {}",
            x.index,
            x.sigma_n,
            y.sigma_n
        );
    }
}

#[test]
fn snapshot_reflects_damage_state() {
    let topo = FishnetTopology::with_default_constants(4, 4).unwrap();
    let dist = StrengthDistribution::default();
    let strengths = dist.sample_strengths(topo.link_count(), 5).unwrap();
    let law = SofteningLaw::from_ratio(topo.k0(), 0.3, 10).unwrap();
    let mut sim = Simulation::new(&topo, &strengths, law, SimulationConfig::default()).unwrap();
    for _ in 0..5 {
        match sim.step().unwrap() {
            StepOutcome::Damaged(_) => {}
            StepOutcome::Finished(_) => break,
        }
    }
    let snapshot = sim.snapshot("probe");
    assert_eq!(snapshot.links.len(), topo.link_count());
    assert_eq!(snapshot.nodes.len(), topo.node_count());
    let total_jumps: u32 = snapshot.links.iter().map(|l| l.jumps).sum();
    assert_eq!(total_jumps as usize, sim.events().len());
    for link in &snapshot.links {
        assert!((link.dmg - link.jumps as f64 / 10.0).abs() < 1e-15);
    }
}
