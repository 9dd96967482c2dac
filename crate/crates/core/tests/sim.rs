use wf_intertwine::analytics::{hypoexp_cdf, HypoexpSpec, DEFAULT_N_TRUNC};
use wf_intertwine::expm::expm;
use wf_intertwine::poly::build_h_matrix;
use wf_intertwine::sim::{
    birth_ensemble, check_moments, coupled_ensemble, map_paths, path_rng, simulate_coupled, Executor, Salt, SimConfig,
};
use wf_intertwine::Level;

fn config(n_paths: usize, t_max: f64) -> SimConfig {
    SimConfig { n_paths, t_max, master_seed: 20_240_611, level_cap: 128, ..Default::default() }
}

#[test]
fn level_marginal_follows_the_birth_semigroup() {
    let ts = [0.1, 0.3];
    let cfg = config(20_000, 0.3);
    let recs = coupled_ensemble(0.0, &cfg, &ts, Executor::Parallel).unwrap();
    let h = build_h_matrix::<f64>(40).matrix;
    for (k, &t) in ts.iter().enumerate() {
        let p = expm(&h, t, 1e-15).unwrap();
        for z in 0..6u64 {
            let expected = *p.get(0, z as usize);
            let hits = recs.iter().filter(|r| r.samples[k].y == Level::Finite(z)).count();
            let emp = hits as f64 / recs.len() as f64;
            let se = (expected * (1.0 - expected) / recs.len() as f64).sqrt();
            assert!((emp - expected).abs() <= 3.0 * se + 1e-4, "t={t}, y={z}: {emp} vs {expected} (se {se})");
        }
    }
}

#[test]
fn explosion_times_follow_the_analytic_law() {
    let cfg = SimConfig { n_paths: 1_000_000, master_seed: 99, ..Default::default() };
    let times = birth_ensemble(0, &cfg, Executor::Parallel).unwrap();
    let spec = HypoexpSpec::new(0, DEFAULT_N_TRUNC).unwrap();
    let n = times.len() as f64;
    for &t in &[0.1, 0.5, 1.0, 2.0] {
        let (lo, hi) = hypoexp_cdf(t, &spec).unwrap();
        let emp = times.iter().filter(|&&s| s <= t).count() as f64 / n;
        let mid = 0.5 * (lo + hi);
        let se = (mid * (1.0 - mid) / n).sqrt();
        assert!(emp >= lo - 3.0 * se && emp <= hi + 3.0 * se, "t={t}: {emp} outside [{lo}, {hi}] ± 3·{se}");
    }
}

#[test]
fn coupled_x_marginal_has_the_diffusion_moments() {
    let ts = [0.1, 0.4];
    let cfg = config(20_000, 0.4);
    let recs = coupled_ensemble(0.3, &cfg, &ts, Executor::Parallel).unwrap();
    let rep = check_moments(&recs, 0.3, &ts).unwrap();
    assert!(rep.within(3.0, 0.005), "{rep:?}");
}

#[test]
fn ensembles_are_reproducible_across_executors() {
    let ts = [0.05, 0.2];
    let cfg = config(600, 0.2);
    let a = coupled_ensemble(0.4, &cfg, &ts, Executor::Sequential).unwrap();
    let b = coupled_ensemble(0.4, &cfg, &ts, Executor::Parallel).unwrap();
    assert_eq!(a, b);
    for r in &a {
        r.check_invariants(true).unwrap();
    }
}

#[test]
fn a_path_depends_only_on_its_stream() {
    let cfg = SimConfig { record_jumps: true, ..config(1, 0.5) };
    let direct = {
        let mut rng = path_rng(cfg.master_seed, Salt::Coupled, 417);
        simulate_coupled(0.6, &cfg, &[0.25], 417, &mut rng, &mut ()).unwrap()
    };
    let via_ensemble = map_paths(418, Executor::Parallel, |i| {
        let mut rng = path_rng(cfg.master_seed, Salt::Coupled, i);
        simulate_coupled(0.6, &cfg, &[0.25], i, &mut rng, &mut ())
    })
    .unwrap();
    assert_eq!(direct, via_ensemble[417]);
}
