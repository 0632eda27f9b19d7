use super::*;
use crate::macro_solver::InitialProfile;
use crate::poisson_field::{sample_field, FieldStream, PointField, Region};
use crate::rng::{stream_seed, Purpose};
use rand::Rng;

fn sol(p: InitialProfile) -> MacroSolution {
    MacroSolution::new(p)
}

fn field_for(state: &ParticleState, t: f64, seed: u64, extra: f64) -> PointField {
    let z = state.positions();
    let nt = state.n() as f64 * t;
    let region = Region::new(z[0] - 1.0, z[z.len() - 1] + extra + 1.0, 0.0, nt).unwrap();
    sample_field(seed, region, 1.0).unwrap()
}

#[test]
fn window_validation() {
    assert!(WindowSpec::new(0, 0, 5, 1).is_err());
    assert!(WindowSpec::new(10, 0, 5, 5).is_err());
    assert!(WindowSpec::new(10, 0, 5, -1).is_err());
    let w = WindowSpec::new(10, -3, 5, 2).unwrap();
    assert_eq!(w.len(), 9);
    assert_eq!(w.guard_end(), -1);
    let s = sol(InitialProfile::step(0.0, 1.0, 0.0).unwrap());
    let w = WindowSpec::for_queries(&s, 100, &[(0.0, 1.0), (1.0, 1.0)], 10, 0.5).unwrap();
    // y⁻(0,1) = -2
    assert_eq!(w.i_min, -250 - 10);
    assert_eq!(w.i_max, 100);
}

#[test]
fn deterministic_initial_data() {
    let w = WindowSpec::new(4, -3, 3, 0).unwrap();
    let zero = init_deterministic(&sol(InitialProfile::constant(0.0).unwrap()), w).unwrap();
    assert!(zero.positions().iter().all(|&z| z == 0.0));
    let one = init_deterministic(&sol(InitialProfile::constant(1.0).unwrap()), w).unwrap();
    assert_eq!(one.positions(), &[-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    assert_eq!(one.sticks(), vec![1.0; 6]);
    let bdj = init_bdj_step(w).unwrap();
    assert_eq!(bdj.last_present(), 0);
    assert_eq!(bdj.position(1), None);
    assert_eq!(bdj.position(-3), Some(0.0));
    assert!(!bdj.all_present());
}

#[test]
fn local_equilibrium_moments() {
    let s = sol(InitialProfile::constant(1.0).unwrap());
    let w = WindowSpec::new(1, 0, 100_000, 0).unwrap();
    let st = init_local_equilibrium(&s, w, 11).unwrap();
    let sticks = st.sticks();
    let m = sticks.len() as f64;
    let mean = sticks.iter().sum::<f64>() / m;
    let var = sticks.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
    // sd of the sample mean is 1/sqrt(m); of the variance about sqrt(8/m)
    assert!((mean - 1.0).abs() < 3.0 / m.sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 3.0 * (8.0 / m).sqrt(), "{var}");
    assert_eq!(st.position(0), Some(0.0));
    assert_eq!(st, init_local_equilibrium(&s, w, 11).unwrap());
    assert_ne!(st, init_local_equilibrium(&s, w, 12).unwrap());
}

#[test]
fn local_equilibrium_anchor_and_zero_means() {
    let s = sol(InitialProfile::constant(2.0).unwrap());
    let w = WindowSpec::new(10, 5, 20, 0).unwrap();
    let st = init_local_equilibrium(&s, w, 1).unwrap();
    assert_eq!(st.position(5), Some(10.0 * 2.0 * 0.5));
    let step = sol(InitialProfile::step(0.0, 1.0, 0.0).unwrap());
    let w = WindowSpec::new(10, -5, 5, 0).unwrap();
    assert!(init_local_equilibrium(&step, w, 1).is_err());
    let st = init_local_equilibrium_with(&step, w, 1, ZeroMeanPolicy::PointMass).unwrap();
    assert!(st.positions()[5..].iter().all(|&z| z == 0.0));
    assert!(st.positions()[..5].iter().all(|&z| z < 0.0));
}

fn check_against_brute(state0: &ParticleState, field: &PointField, t: f64) {
    let brute = evolve_variational_brute(state0, field, t).unwrap();
    let w = state0.window;
    let targets: Vec<i64> = (w.guard_end() + 1..=w.i_max).collect();
    let fast = evolve_variational(state0, field, t, &EvolveOptions::default()).unwrap();
    assert_eq!(fast.positions(), brute.positions());
    for &k in &targets {
        let opts = EvolveOptions::targets(vec![k]).with_argmins();
        let expected = brute.argmin(k).unwrap();
        match evolve_variational(state0, field, t, &opts) {
            Ok(s) => {
                assert_eq!(s.argmin(k), Some(expected), "label {k}");
                assert!(expected > w.guard_end());
            }
            Err(Error::WindowTooSmall { label, .. }) => {
                assert_eq!(label, k);
                assert!(expected <= w.guard_end(), "label {k} flagged but minimized at {expected}");
            }
            Err(e) => panic!("{e}"),
        }
        // without argmins only labels minimized solely in the guard fail
        if let Err(e) = evolve_variational(state0, field, t, &EvolveOptions::targets(vec![k])) {
            assert!(matches!(e, Error::WindowTooSmall { .. }));
            assert!(expected <= w.guard_end());
        }
    }
}

#[test]
fn sweep_matches_brute_force_equilibrium() {
    let s = sol(InitialProfile::constant(1.0).unwrap());
    for rep in 0..40 {
        let w = WindowSpec::new(5, -12, 12, 3).unwrap();
        let st = init_local_equilibrium(&s, w, stream_seed(1, rep, Purpose::InitialSticks)).unwrap();
        let f = field_for(&st, 1.0, stream_seed(1, rep, Purpose::Field), 0.0);
        check_against_brute(&st, &f, 1.0);
        check_against_brute(&st, &f, 0.3);
    }
}

#[test]
fn sweep_matches_brute_force_with_stacks() {
    let s = sol(InitialProfile::new(vec![-1.0, 0.5], vec![2.0, 0.0, 0.7]).unwrap());
    for rep in 0..40 {
        let w = WindowSpec::new(8, -16, 10, 2).unwrap();
        let st = init_local_equilibrium_with(&s, w, stream_seed(2, rep, Purpose::InitialSticks), ZeroMeanPolicy::PointMass)
            .unwrap();
        let f = field_for(&st, 0.8, stream_seed(2, rep, Purpose::Field), 0.0);
        check_against_brute(&st, &f, 0.8);
    }
    let det = init_deterministic(&s, WindowSpec::new(8, -16, 10, 2).unwrap()).unwrap();
    let f = field_for(&det, 0.8, 99, 0.0);
    check_against_brute(&det, &f, 0.8);
}

#[test]
fn sweep_matches_brute_force_step_data() {
    for rep in 0..20 {
        let w = WindowSpec::new(10, -4, 12, 1).unwrap();
        let st = init_bdj_step(w).unwrap();
        let f = field_for(&st, 1.0, stream_seed(3, rep, Purpose::Field), 40.0);
        let fast = evolve_variational(&st, &f, 1.0, &EvolveOptions::targets(vec![10])).unwrap();
        let brute = evolve_variational_brute(&st, &f, 1.0).unwrap();
        assert_eq!(fast.positions(), brute.positions());
        assert!(fast.all_present());
    }
    // a field too short to reach the last label
    let st = init_bdj_step(WindowSpec::new(10, -4, 12, 1).unwrap()).unwrap();
    let f = sample_field(5, Region::new(-1.0, 0.5, 0.0, 10.0).unwrap(), 1.0).unwrap();
    assert!(matches!(
        evolve_variational(&st, &f, 1.0, &EvolveOptions::default()),
        Err(Error::FieldExhausted { .. })
    ));
}

#[test]
fn lazy_and_materialised_fields_agree() {
    let s = sol(InitialProfile::constant(1.0).unwrap());
    let w = WindowSpec::new(50, -100, 50, 5).unwrap();
    let st = init_local_equilibrium(&s, w, 4).unwrap();
    let region = Region::new(st.positions()[0] - 1.0, st.positions()[w.len() - 1] + 1.0, 0.0, 50.0).unwrap();
    let lazy = FieldStream::new(8, region, 1.0).unwrap();
    let full = sample_field(8, region, 1.0).unwrap();
    let opts = EvolveOptions::targets(vec![0, 50]);
    let a = evolve_variational(&st, &lazy, 1.0, &opts).unwrap();
    let b = evolve_variational(&st, &full, 1.0, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trivial_evolutions() {
    let s = sol(InitialProfile::constant(1.0).unwrap());
    let w = WindowSpec::new(3, -5, 5, 0).unwrap();
    let st = init_local_equilibrium(&s, w, 2).unwrap();
    // no points below the tiny height
    let empty = PointField::from_points(0, Region::new(-100.0, 100.0, 0.0, 1.0).unwrap(), 1.0, vec![]).unwrap();
    let out = evolve_variational(&st, &empty, 1e-9, &EvolveOptions::default()).unwrap();
    assert_eq!(out.positions(), st.positions());
    // a one-label window never moves
    let one = ParticleState::from_positions(WindowSpec::new(3, 4, 5, 0).unwrap(), 0.0, vec![2.5]).unwrap();
    let f = sample_field(1, Region::new(0.0, 10.0, 0.0, 3.0).unwrap(), 1.0).unwrap();
    let res = evolve_variational(&one, &f, 1.0, &EvolveOptions::default());
    assert!(matches!(res, Err(Error::FieldExhausted { .. })) || res.unwrap().position(4) == Some(2.5));
    // evolution never chains
    let moved = evolve_direct(&st, 0.5, 1).unwrap();
    let f = field_for(&st, 1.0, 3, 0.0);
    assert!(evolve_variational(&moved, &f, 0.5, &EvolveOptions::default()).is_err());
}

#[test]
fn guard_violation_is_reported() {
    // label 30 at t = 1 with density 1 is minimized about 2n labels left
    let s = sol(InitialProfile::constant(1.0).unwrap());
    let w = WindowSpec::new(10, 20, 30, 3).unwrap();
    let st = init_local_equilibrium(&s, w, 1).unwrap();
    let f = field_for(&st, 1.0, 2, 0.0);
    match evolve_variational(&st, &f, 1.0, &EvolveOptions::targets(vec![30])) {
        Err(Error::WindowTooSmall {
            label,
            suggested_i_min,
            ..
        }) => {
            assert_eq!(label, 30);
            assert!(suggested_i_min < 20);
        }
        other => panic!("{other:?}"),
    }
    let wide = WindowSpec::for_queries(&s, 10, &[(3.0, 1.0)], 3, 0.5).unwrap();
    let st = init_local_equilibrium(&s, wide, 1).unwrap();
    let f = field_for(&st, 1.0, 2, 0.0);
    assert!(evolve_variational(&st, &f, 1.0, &EvolveOptions::targets(vec![30])).is_ok());
}

#[test]
fn argmins_monotone_in_label() {
    let s = sol(InitialProfile::new(vec![0.0], vec![1.5, 0.4]).unwrap());
    for rep in 0..30 {
        let w = WindowSpec::new(10, -30, 20, 0).unwrap();
        let st = init_local_equilibrium(&s, w, stream_seed(9, rep, Purpose::InitialSticks)).unwrap();
        let f = field_for(&st, 1.0, stream_seed(9, rep, Purpose::Field), 0.0);
        let b = evolve_variational_brute(&st, &f, 1.0).unwrap();
        let args: Vec<i64> = b.argmins().values().copied().collect();
        assert!(args.windows(2).all(|p| p[0] <= p[1]), "{args:?}");
    }
}

#[test]
fn tagged_particle_moves_left() {
    let s = sol(InitialProfile::constant(1.0).unwrap());
    let wide = WindowSpec::for_queries(&s, 20, &[(0.0, 2.0)], 5, 0.5).unwrap();
    let st = init_local_equilibrium(&s, wide, 5).unwrap();
    let f = field_for(&st, 2.0, 6, 0.0);
    let grid = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0];
    let traj = tagged_trajectory_with_argmins(&st, &f, 0, &grid, true).unwrap();
    assert_eq!(traj[0].0, st.position(0).unwrap());
    assert!(traj.windows(2).all(|p| p[1].0 <= p[0].0));
    let args: Vec<i64> = traj.iter().map(|p| p.1.unwrap()).collect();
    assert!(args.windows(2).all(|p| p[1] <= p[0]), "{args:?}");
    assert_eq!(tagged_trajectory(&st, &f, 0, &[0.0]).unwrap(), vec![st.position(0).unwrap()]);
}

#[test]
fn direct_dynamics_basics() {
    let w = WindowSpec::new(1, 0, 4, 0).unwrap();
    let flat = ParticleState::from_positions(w, 0.0, vec![1.0; 5]).unwrap();
    let (out, log) = evolve_direct_logged(&flat, 10.0, 1).unwrap();
    assert!(log.is_empty());
    assert_eq!(out.positions(), flat.positions());
    // first event time is exponential with the total rate
    let st = ParticleState::from_positions(w, 0.0, vec![0.0, 0.5, 1.0, 2.5, 4.0]).unwrap();
    let mut total = 0.0;
    let reps = 20_000;
    for seed in 0..reps {
        let (_, log) = evolve_direct_logged(&st, 100.0, seed).unwrap();
        total += log[0].time;
    }
    let mean = total / reps as f64;
    assert!((mean - 0.25).abs() < 4.0 * 0.25 / (reps as f64).sqrt(), "{mean}");
    assert!(evolve_direct(&init_bdj_step(WindowSpec::new(1, -2, 2, 0).unwrap()).unwrap(), 1.0, 1).is_err());
}

#[test]
fn stick_bookkeeping_under_jumps() {
    let s = sol(InitialProfile::constant(1.0).unwrap());
    let w = WindowSpec::new(1, 0, 30, 0).unwrap();
    let st = init_local_equilibrium(&s, w, 3).unwrap();
    let (out, log) = evolve_direct_logged(&st, 5.0, 4).unwrap();
    assert!(!log.is_empty());
    // interior sticks 11..=20 change only through jumps of labels 10 and 20
    let interior = |z: &ParticleState| z.position(20).unwrap() - z.position(10).unwrap();
    let mut flux = 0.0;
    for e in &log {
        assert!(e.to < e.from);
        if e.label == 20 {
            flux += e.to - e.from;
        } else if e.label == 10 {
            flux -= e.to - e.from;
        }
    }
    assert!((interior(&out) - interior(&st) - flux).abs() < 1e-9);
    let sticks = out.sticks();
    assert!(sticks.iter().all(|&e| e >= 0.0));
    let total: f64 = sticks.iter().sum();
    assert!((total - (out.positions()[30] - out.positions()[0])).abs() < 1e-9);
}

#[test]
fn trajectory_rows() {
    let w = WindowSpec::new(1, 0, 2, 0).unwrap();
    let st = ParticleState::from_positions(w, 0.0, vec![0.0, 1.5, 2.0]).unwrap();
    let mut buf = Vec::new();
    st.write_trajectory_rows(&mut buf, 7).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "7,0,0,0\n7,1,0,1.5\n7,2,0,2\n");
}

#[test]
fn random_small_windows_match_brute() {
    let mut rng = crate::rng::stream(77, 0, Purpose::Auxiliary);
    for rep in 0..60 {
        let k = rng.random_range(1..4);
        let mut bp: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        bp.sort_by(f64::total_cmp);
        let rho: Vec<f64> = (0..=k).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.2..2.0) }).collect();
        let s = sol(InitialProfile::new(bp, rho).unwrap());
        let n = rng.random_range(2..8);
        let w = WindowSpec::new(n, -(2 * n as i64), 2 * n as i64, 1).unwrap();
        let st = init_local_equilibrium_with(&s, w, rep, ZeroMeanPolicy::PointMass).unwrap();
        let t = rng.random_range(0.2..1.5);
        let f = field_for(&st, t, rep + 1000, 0.0);
        check_against_brute(&st, &f, t);
    }
}
