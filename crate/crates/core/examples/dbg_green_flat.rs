use vortexctl_core::grid::test_hooks::lattice_green_column;

fn main() {
    let n = 256usize;
    let g = lattice_green_column(n); // G_an offsets, unit torus, mean zero
    let at = |fx: f64, fy: f64| -> f64 {
        let ix = ((fx * n as f64).round() as usize) % n;
        let iy = ((fy * n as f64).round() as usize) % n;
        g[iy * n + ix]
    };
    println!("G(1/2,0)  = {:+.8}", at(0.5, 0.0));
    println!("G(0,1/2)  = {:+.8}", at(0.0, 0.5));
    println!("G(1/2,1/2)= {:+.8}", at(0.5, 0.5));
    println!("G(1/4,0)  = {:+.8}", at(0.25, 0.0));
    println!("G(1/4,1/4)= {:+.8}", at(0.25, 0.25));
    let h = 1.0 / n as f64;
    // second derivatives by centered differences at offsets
    let d2 = |fx: f64, fy: f64, dx: f64, dy: f64| -> f64 {
        (at(fx + dx*h, fy + dy*h) - 2.0*at(fx, fy) + at(fx - dx*h, fy - dy*h)) / (h*h)
    };
    println!("G_yy(0,1/2)   = {:+.4}", d2(0.0, 0.5, 0.0, 1.0));
    println!("G_xx(0,1/2)   = {:+.4}", d2(0.0, 0.5, 1.0, 0.0));
    println!("G_yy(1/2,1/2) = {:+.4}", d2(0.5, 0.5, 0.0, 1.0));
    println!("G_xx(1/2,1/2) = {:+.4}", d2(0.5, 0.5, 1.0, 0.0));

    // Checkerboard 4-vortex configuration: W0(positions) Hessian spectrum.
    // W0 = (2pi)^2 * (1/2) sum_{i != j} d_i d_j G_an(a_i - a_j)  (impl-scaled pair part)
    let pos0 = [(0.25, 0.25, 1.0), (0.75, 0.75, 1.0), (0.75, 0.25, -1.0), (0.25, 0.75, -1.0)];
    let gc = |mut fx: f64, mut fy: f64| -> f64 {
        fx = fx.rem_euclid(1.0); fy = fy.rem_euclid(1.0);
        // bilinear interp of the green column
        let xx = fx * n as f64; let yy = fy * n as f64;
        let i0 = xx.floor() as usize % n; let j0 = yy.floor() as usize % n;
        let tx = xx - xx.floor(); let ty = yy - yy.floor();
        let i1 = (i0 + 1) % n; let j1 = (j0 + 1) % n;
        g[j0*n+i0]*(1.0-tx)*(1.0-ty) + g[j0*n+i1]*tx*(1.0-ty) + g[j1*n+i0]*(1.0-tx)*ty + g[j1*n+i1]*tx*ty
    };
    let w0 = |p: &[(f64, f64, f64)]| -> f64 {
        let s2 = (2.0*std::f64::consts::PI).powi(2);
        let mut w = 0.0;
        for i in 0..p.len() { for j in 0..p.len() { if i != j {
            w += 0.5 * p[i].2 * p[j].2 * gc(p[i].0 - p[j].0, p[i].1 - p[j].1);
        }}}
        s2 * w
    };
    println!("W0(checkerboard) = {:+.6}", w0(&pos0));
    // FD Hessian in the 8 coordinates
    let fd = 2.0 * h;
    let mut hess = [[0.0f64; 8]; 8];
    let perturb = |p0: &[(f64,f64,f64)], k: usize, d: f64| -> Vec<(f64,f64,f64)> {
        let mut p = p0.to_vec();
        if k % 2 == 0 { p[k/2].0 += d; } else { p[k/2].1 += d; }
        p
    };
    for i in 0..8 { for j in 0..8 {
        let pp = perturb(&perturb(&pos0, i, fd), j, fd);
        let pm = perturb(&perturb(&pos0, i, fd), j, -fd);
        let mp = perturb(&perturb(&pos0, i, -fd), j, fd);
        let mm = perturb(&perturb(&pos0, i, -fd), j, -fd);
        hess[i][j] = (w0(&pp) - w0(&pm) - w0(&mp) + w0(&mm)) / (4.0*fd*fd);
    }}
    // crude eigenvalue estimate: power iteration on shifted matrix for min eig via Jacobi... just print Gershgorin + diag
    // use simple symmetric Jacobi eigensolver
    let mut a = hess;
    let mut v = [[0.0f64;8];8];
    for i in 0..8 { v[i][i] = 1.0; }
    for _sweep in 0..100 {
        for p in 0..8 { for q in (p+1)..8 {
            if a[p][q].abs() < 1e-12 { continue; }
            let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
            let t = theta.signum() / (theta.abs() + (theta*theta + 1.0).sqrt());
            let c = 1.0 / (t*t + 1.0).sqrt();
            let s = t * c;
            for k in 0..8 {
                let akp = a[k][p]; let akq = a[k][q];
                a[k][p] = c*akp - s*akq; a[k][q] = s*akp + c*akq;
            }
            for k in 0..8 {
                let apk = a[p][k]; let aqk = a[q][k];
                a[p][k] = c*apk - s*aqk; a[q][k] = s*apk + c*aqk;
            }
        }}
    }
    let mut eigs: Vec<f64> = (0..8).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    println!("checkerboard W0 Hessian eigenvalues: {:?}", eigs.iter().map(|e| format!("{:+.3}", e)).collect::<Vec<_>>());
}
