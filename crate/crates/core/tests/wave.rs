use paraexp::fitwave::{EPS0, MU0};
use paraexp::{
    dormand_prince, global_grid, integrate, paraexp_solve, reference_cavity, AdaptiveOptions, ExpmConfig, StepperKind,
};

#[test]
fn masked_edges_stay_zero_under_driving() {
    let wp = reference_cavity().unwrap();
    let n_h = wp.ops.n_h();
    for kind in [StepperKind::Rk4, StepperKind::Leapfrog] {
        let sol = integrate(&wp.system, (0.0, 100.0 * 2e-10), 2e-10, kind).unwrap();
        assert_eq!(sol.len(), 101);
        for u in &sol.states {
            for (k, &masked) in wp.ops.pec_mask().iter().enumerate() {
                if masked {
                    assert_eq!(u[n_h + k].to_bits(), 0.0f64.to_bits(), "{kind}: edge {k}");
                }
            }
        }
    }
}

fn rotation_asymmetry(ez: &[(usize, usize, usize, f64)], n: usize) -> f64 {
    let at = |ix: usize, iy: usize| ez.iter().find(|s| s.0 == ix && s.1 == iy && s.2 == 0).unwrap().3;
    let peak = ez.iter().map(|s| s.3.abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            worst = worst.max((at(ix, iy) - at(n - 1 - iy, ix)).abs());
        }
    }
    worst / peak
}

#[test]
fn ez_is_symmetric_under_quarter_turns() {
    let wp = reference_cavity().unwrap();
    for kind in [StepperKind::Rk4, StepperKind::Leapfrog] {
        let sol = integrate(&wp.system, (0.0, 4.4e-8), 2e-10, kind).unwrap();
        let ez = wp.ez_snapshot(sol.last_state().unwrap()).unwrap();
        let asym = rotation_asymmetry(&ez, 21);
        assert!(asym <= 1e-11, "{kind}: {asym:e}");
    }
}

#[test]
fn field_stays_behind_the_light_cone() {
    // measured: the discrete pulse falls below 1e-12 of its peak 7 cells ahead of c·t
    const MARGIN_CELLS: f64 = 7.0;
    let wp = reference_cavity().unwrap();
    let c0 = 1.0 / (EPS0 * MU0).sqrt();
    let (cx, cy) = wp.grid.center_column();
    for kind in [StepperKind::Rk4, StepperKind::Leapfrog] {
        for t_end in [1e-8, 2e-8] {
            let sol = integrate(&wp.system, (0.0, t_end), 2e-10, kind).unwrap();
            let ez = wp.ez_snapshot(sol.last_state().unwrap()).unwrap();
            let peak = ez.iter().map(|s| s.3.abs()).fold(0.0, f64::max);
            let front = c0 * t_end / wp.grid.dx + MARGIN_CELLS;
            for &(ix, iy, _, v) in &ez {
                let r = ((ix as f64 - cx as f64).powi(2) + (iy as f64 - cy as f64).powi(2)).sqrt();
                if r >= front {
                    assert!(v.abs() <= 1e-12 * peak, "{kind} t = {t_end:e} r = {r:.2}: {:e}", v.abs() / peak);
                }
            }
        }
    }
}

#[test]
fn first_interval_matches_sequential_rk4_bitwise() {
    let wp = reference_cavity().unwrap();
    let grid = global_grid(0.0, 6e-8, 2e-9).unwrap();
    let seq = paraexp::integrate_on_grid(&wp.system, wp.system.u0(), &grid, StepperKind::Rk4).unwrap();
    let run = paraexp_solve(&wp.system, 6e-8, 3, 2e-9, StepperKind::Rk4, ExpmConfig::TaylorAuto).unwrap();
    assert_eq!(run.total.times, grid);
    for k in 0..=10 {
        assert_eq!(run.total.states[k], seq.states[k], "sample {k}");
    }
    assert!(!run.metadata.cfl.violated());
}

#[test]
fn reference_tolerance_refinement_is_stable() {
    let wp = reference_cavity().unwrap();
    let grid = global_grid(0.0, 6e-8, 2e-9).unwrap();
    let w = |opts: &AdaptiveOptions| -> Vec<f64> {
        let sol = dormand_prince(&wp.system, &grid, opts).unwrap();
        sol.states.iter().map(|u| wp.energy(u).unwrap()).collect()
    };
    let base = w(&AdaptiveOptions::default());
    let tight = w(&AdaptiveOptions { rtol: 1e-12, ..AdaptiveOptions::default() });
    let scale = tight.iter().cloned().fold(0.0, f64::max);
    let change = base.iter().zip(&tight).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    assert!(change < 1e-9, "{change:e}");
}
