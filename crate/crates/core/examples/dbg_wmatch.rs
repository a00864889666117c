use vortexctl_core::energy::*;
use vortexctl_core::grid::*;
use vortexctl_core::green::*;
use vortexctl_core::control::ControlField;
use vortexctl_core::finsler::FinslerSpec;
use vortexctl_core::algebra::{Point, SymMat2};

fn main() {
    let n = 128usize;
    let eps = 0.03;
    let grid = TorusGrid::new(1.0, n).unwrap();
    let params = EnergyParams::new(eps, 0.1, FinslerSpec::euclidean(1.0), ControlField::zero(1.0)).unwrap();
    let model = EnergyModel::compile(grid, params).unwrap();
    let table = GreenTable::solve_constant(grid, SymMat2::IDENTITY, 1.0, EvalMode::Bilinear).unwrap();
    println!("sep(diag s)   kinetic(seed)   W_impl(pair+harm)   [differences vs s=0.45]");
    let mut base: Option<(f64, f64)> = None;
    for s in [0.45f64, 0.40, 0.35, 0.30, 0.25, 0.20] {
        let cfg = VortexConfig::new(1.0, vec![
            (Point::new(0.25, 0.25), 1),
            (Point::new(0.25 + s, 0.25 + s), -1),
        ]).unwrap();
        let st = seed_vortices(grid, &cfg, eps).unwrap();
        let e = model.energy(&st).unwrap();
        let w = renormalized_energy(&table, &cfg).unwrap();
        let wval = w.pair_term + w.harmonic_term;
        match base {
            None => { base = Some((e.kinetic, wval)); println!("{:.2}  {:>10.5}  {:>10.5}   (ref)", s, e.kinetic, wval); }
            Some((k0, w0)) => println!("{:.2}  {:>10.5}  {:>10.5}   dK={:+.4} dW={:+.4}", s, e.kinetic, wval, e.kinetic - k0, wval - w0),
        }
    }
    println!("\nx-separated pair:");
    let mut base: Option<(f64, f64)> = None;
    for s in [0.45f64, 0.40, 0.35, 0.30, 0.25] {
        let cfg = VortexConfig::new(1.0, vec![
            (Point::new(0.2, 0.4), 1),
            (Point::new(0.2 + s, 0.4), -1),
        ]).unwrap();
        let st = seed_vortices(grid, &cfg, eps).unwrap();
        let e = model.energy(&st).unwrap();
        let w = renormalized_energy(&table, &cfg).unwrap();
        let wval = w.pair_term + w.harmonic_term;
        match base {
            None => { base = Some((e.kinetic, wval)); println!("{:.2}  {:>10.5}  {:>10.5}   (ref)", s, e.kinetic, wval); }
            Some((k0, w0)) => println!("{:.2}  {:>10.5}  {:>10.5}   dK={:+.4} dW={:+.4}", s, e.kinetic, wval, e.kinetic - k0, wval - w0),
        }
    }
}
