use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::control::ControlField;
use vortexctl_core::finsler::FinslerSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let grid = TorusGrid::new(1.0, 16).unwrap();
    let params = EnergyParams::new(0.2, 1.0, FinslerSpec::euclidean(1.0), ControlField::zero(1.0)).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut st = FieldState::vacuum(grid);
    for idx in 0..grid.num_nodes() {
        st.psi[idx] = Complex64::new(1.0 + 1e-3*rng.gen_range(-1.0..1.0), 1e-3*rng.gen_range(-1.0..1.0));
        st.a[2*idx] = 1e-3*rng.gen_range(-1.0..1.0);
        st.a[2*idx+1] = 1e-3*rng.gen_range(-1.0..1.0);
    }
    let (_, tr) = minimize(&st, &model, MinimizeOpts { max_iters: 2000, grad_tol: 1e-9, trace_every: 1, ..Default::default() }).unwrap();
    println!("converged={} iters={} E={:.3e} gmax={:.3e}", tr.converged, tr.iterations, tr.final_energy, tr.final_grad_norm);
    for r in tr.rows.iter().step_by(100) {
        println!("it {} E {:.6e} g {:.3e}", r.iter, r.energy, r.grad_norm);
    }
    let n = tr.rows.len();
    for r in tr.rows[n.saturating_sub(5)..].iter() {
        println!("tail it {} E {:.6e} g {:.3e}", r.iter, r.energy, r.grad_norm);
    }
}
