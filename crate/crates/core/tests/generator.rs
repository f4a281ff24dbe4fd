use ssvortex_core::grid::{lq_norm_samples, LogGrid, ModeFunction, Rep};
use ssvortex_core::params::VortexParams;
use ssvortex_core::resolvent::{default_pad, resolved_interior, solve_k0, solve_mode, SolveConfig, SpectralPoint};
use ssvortex_core::spectrum::{assemble_generator, eig_scan, evolve, max_stable_dt};
use ssvortex_core::C64;

fn sets() -> Vec<VortexParams> {
    vec![
        VortexParams::new(0.5, 1.0, 2, 2.0).unwrap(),
        VortexParams::new(0.8, 1.0, 2, 2.5).unwrap(),
        VortexParams::new(0.5, 0.7, 3, 4.0).unwrap(),
    ]
}

#[test]
fn generator_and_resolvent_agree() {
    let grid = LogGrid::new(-12.0, 60.0, 14401).unwrap();
    for p in sets() {
        for k in [0u32, 1] {
            let g = ModeFunction::from_fn(grid, k, Rep::G, p.q(), p.m(), |t| C64::new((-(t - 2.0) * (t - 2.0)).exp(), 0.3))
                .unwrap();
            let gen = assemble_generator(k, &p, grid).unwrap();
            for d in [0.5, 1.0, 2.0] {
                let lam = SpectralPoint::new(p.a0() + d, 0.5);
                let sol = if k == 0 { solve_k0(&g, lam, &p) } else { solve_mode(&g, lam, k, &p, &SolveConfig::default()) }
                    .unwrap();
                let lu = gen.apply_u(sol.u.samples());
                let (lo, hi) = resolved_interior(&grid, &p, k, default_pad(&p, k));
                assert!(hi > lo + 100);
                let res: Vec<C64> =
                    (lo..hi).map(|i| lu[i] - sol.u.samples()[i] * lam.value() - g.samples()[i]).collect();
                let rel = lq_norm_samples(&res, grid.h(), p.q()) / lq_norm_samples(g.samples(), grid.h(), p.q());
                assert!(rel < 1e-4, "alpha={} k={k} d={d}: {rel:e}", p.alpha());
            }
        }
    }
}

#[test]
fn zero_beta_matches_k0() {
    let p = VortexParams::new(0.5, 0.0, 2, 2.0).unwrap();
    let grid = LogGrid::new(-8.0, 24.0, 128).unwrap();
    let rep = eig_scan(&[0, 1, 5], &p, grid, 0.05).unwrap();
    for m in &rep.modes[1..] {
        assert_eq!(m.eigenvalues, rep.modes[0].eigenvalues);
    }
    assert!(rep.modes[0].max_re <= p.a0());
}

#[test]
fn refinement_keeps_spectrum_left_of_a0() {
    // max Re moves right as the upwind dissipation shrinks, by less each time
    let p = VortexParams::new(0.5, 1.0, 2, 2.0).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for n in [128usize, 256, 512] {
        let grid = LogGrid::new(-8.0, 24.0, n).unwrap();
        let m = eig_scan(&[1], &p, grid, 0.05).unwrap().modes[0].max_re;
        assert!(m < p.a0() - 0.5, "n={n}: {m}");
        if let Some((last, step)) = prev {
            assert!((m - last).abs() < step.max(1.0), "n={n}");
            prev = Some((m, (m - last).abs()));
        } else {
            prev = Some((m, f64::INFINITY));
        }
    }
}

#[test]
fn mode_one_decays_at_least_like_a0() {
    let p = VortexParams::new(0.5, 1.0, 2, 2.0).unwrap();
    let grid = LogGrid::new(-8.0, 24.0, 1024).unwrap();
    let gen = assemble_generator(1, &p, grid).unwrap();
    let u0 = ModeFunction::from_fn(grid, 1, Rep::U, 2.0, 2, |t| C64::new((-(t - 14.0) * (t - 14.0)).exp(), 0.0)).unwrap();
    let tr = evolve(&u0, 6.0, 0.9 * max_stable_dt(&gen), &gen).unwrap();
    assert!(tr.fitted_rate.unwrap() <= p.a0() + 0.05);
    assert!(tr.norms.iter().all(|x| *x > 0.0));
}
