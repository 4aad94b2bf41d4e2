use approx::assert_relative_eq;
use harvest_core::averaging::{
    self, energy_spd, joint_spd, joint_spd_with, loop_average_at, GridSpec, StationaryModel,
};
use harvest_core::freq::{self, orbit_integral, period_integral, Separatrix};
use harvest_core::model::{effective_coeffs, Feedback};
use harvest_core::{MotionRegime, NoiseParams, SystemParams};

fn params(mu: f64, nu: f64, tau1: f64, tau2: f64) -> SystemParams {
    SystemParams::baseline().with_feedback(Feedback::new(mu, nu, tau1, tau2)).unwrap()
}

fn controlled() -> SystemParams {
    params(0.01, 0.01, 1.3, 0.5)
}

#[test]
fn density_is_symmetric() {
    let p = controlled();
    let g = GridSpec::default();
    let m = StationaryModel::for_grid(p, NoiseParams::baseline(), &g).unwrap();
    let f = joint_spd_with(&m, &g, false).unwrap();
    let max = f.values.iter().copied().fold(0.0, f64::max);
    for i in 0..g.nx {
        for j in 0..g.nv {
            let a = f.values[g.index(i, j)];
            for b in [f.values[g.index(g.nx - 1 - i, j)], f.values[g.index(i, g.nv - 1 - j)]] {
                // relative where the density is resolvable at all
                if a > 1e-200 * max {
                    assert!((a - b).abs() <= 1e-10 * a, "{i} {j}: {a} {b}");
                }
            }
        }
    }
}

#[test]
fn density_normalised_and_bimodal() {
    let p = controlled();
    let g = GridSpec::default();
    let m = StationaryModel::for_grid(p, NoiseParams::baseline(), &g).unwrap();
    let f = joint_spd(&m, &g).unwrap();
    assert!(f.values.iter().all(|v| *v >= 0.0));
    assert!((f.total() - 1.0).abs() <= 1e-3);
    assert!(f.boundary_ratio() < averaging::BOUNDARY_TOL);
    let g = f.grid;
    let (mut best, mut bi, mut bj) = (0.0, 0, 0);
    for i in 0..g.nx / 2 {
        for j in 0..g.nv {
            if f.values[g.index(i, j)] > best {
                best = f.values[g.index(i, j)];
                bi = i;
                bj = j;
            }
        }
    }
    // oracle: minimiser of the exponent at v = 0 by a fine scan over x < 0
    let scan = |x: f64| {
        let s = m.point(x, 0.0).unwrap();
        s.log_density
    };
    let mut xo = -1.0;
    let mut lo = f64::NEG_INFINITY;
    for k in 0..=40_000 {
        let x = -2.0 + 2.0 * k as f64 / 40_000.0;
        let l = scan(x);
        if l > lo {
            lo = l;
            xo = x;
        }
    }
    assert!((g.v(bj)).abs() <= g.dv());
    assert!((g.x(bi) - xo).abs() <= g.dx(), "{} vs {}", g.x(bi), xo);
    // and it sits at the shifted minimum of the potential at that frequency
    let s = m.point(xo, 0.0).unwrap();
    let xm = ((3.0 - s.delta_eff) / 3.0).sqrt();
    assert!((xo + xm).abs() <= g.dx());
}

#[test]
fn adaptive_normaliser_agrees_with_trapezoid() {
    let p = controlled();
    let g = GridSpec::default();
    let m = StationaryModel::for_grid(p, NoiseParams::baseline(), &g).unwrap();
    let f = joint_spd_with(&m, &g, false).unwrap();
    // shift so the integrand peaks near 1
    let shift = m.point(-0.95, 0.0).unwrap().log_density;
    let est = m.adaptive_normalizer(&g, shift, 1e-8).unwrap();
    assert!(est.error <= 1e-6 * est.value);
    let z_adaptive = est.value;
    let z_trap = (-f.log_norm_const - shift).exp();
    assert_relative_eq!(z_trap, z_adaptive, max_relative = 1e-3);
}

#[test]
fn energy_density_matches_joint_density_when_damping_is_flat() {
    // κ = μ = ν = 0 and c → 0 make β̃(1+c²ω²) independent of H, which is
    // when p(H)/T(H) and the joint form coincide
    let p = SystemParams::new(3.0, 3.0, 0.0, 0.05, 0.02).unwrap();
    let np = NoiseParams::new(0.005, 1e-4).unwrap();
    let sep = Separatrix::new(&p).unwrap();
    let mut grid: Vec<f64> = (1..400).map(|i| sep.bottom_energy * (1.0 - i as f64 / 400.0)).collect();
    grid.retain(|h| !sep.contains(*h));
    grid.extend((1..=200).map(|i| 0.002 * i as f64));
    let ph = energy_spd(&p, &np, &grid).unwrap();

    let g = GridSpec::default();
    let m = StationaryModel::for_grid(p, np, &g).unwrap();
    let field = joint_spd(&m, &g).unwrap();
    // joint density on the orbit through (x, 0) for a few energies
    let probe = |h: f64| -> (f64, f64) {
        let k = grid.iter().position(|e| *e == h).unwrap();
        let regime = if h < 0.0 { MotionRegime::RightWell } else { MotionRegime::CrossWell };
        let w = freq::solve_frequency(h, &p, regime).unwrap();
        let t = period_integral(h, &p, w, regime).unwrap();
        // both wells together below the saddle
        let orbit_time = if h < 0.0 { 2.0 * t } else { t };
        let x = freq::turning_points(h, &p, w, regime).unwrap().x_b;
        let joint = (m.point(x, 0.0).unwrap().log_density + field.log_norm_const).exp();
        (ph[k] / orbit_time, joint)
    };
    let picks = [grid[50], grid[200], grid[350], grid[grid.len() - 150], grid[grid.len() - 60]];
    let (a0, b0) = probe(picks[0]);
    for h in picks {
        let (a, b) = probe(h);
        // the two normalisations cover different domains; compare shapes
        assert_relative_eq!(a / a0, b / b0, max_relative = 1e-3);
    }
}

#[test]
fn generalized_potential_reproduces_density() {
    let p = controlled();
    let np = NoiseParams::baseline();
    let g = GridSpec::default();
    let m = StationaryModel::for_grid(p, np, &g).unwrap();
    let f = joint_spd_with(&m, &g, false).unwrap();
    let d = np.intensity();
    for &(i, j) in &[(40, 100), (60, 90), (100, 100), (150, 70)] {
        let (x, v) = (g.x(i), g.v(j));
        let s = m.point(x, v).unwrap();
        let u = m.effective_generalized_potential(x, v, 0.0).unwrap();
        let att = np.attenuation(s.omega);
        let pv = f.values[g.index(i, j)];
        // Ũ = −D ln(p D/(N₀(1+c²ω²)))
        let back = -d * (pv.ln() + (d / att).ln() - f.log_norm_const);
        assert!((u - back).abs() <= 1e-10 * u.abs().max(1.0), "{u} {back}");
        assert_relative_eq!((-u / d).exp() * att / d, s.log_density.exp(), max_relative = 1e-10);
    }
    // wells below the saddle
    let u0 = m.effective_generalized_potential(0.0, 0.0, 0.0).unwrap();
    assert_eq!(u0, 0.0);
    let xs = (3.0 - effective_coeffs(&p, m.table().separatrix().omega_bottom).unwrap().delta_eff) / 3.0;
    for x in [xs.sqrt(), -xs.sqrt()] {
        assert!(m.effective_generalized_potential(x, 0.0, 0.0).unwrap() < u0);
    }
}

#[test]
fn voltage_converges_under_refinement() {
    let p = params(-0.01, 0.01, 0.5, 0.5);
    let np = NoiseParams::baseline();
    let coarse = GridSpec { nx: 101, nv: 101, ..GridSpec::default() };
    let fine = GridSpec { nx: 201, nv: 201, ..GridSpec::default() };
    let m = StationaryModel::for_grid(p, np, &fine).unwrap();
    let a = joint_spd(&m, &coarse).unwrap().mean_square_voltage(&p);
    let b = joint_spd(&m, &fine).unwrap().mean_square_voltage(&p);
    assert!(((a - b) / b).abs() <= 0.01, "{a} {b}");
}

#[test]
fn voltage_finite_for_strong_coupling() {
    let np = NoiseParams::baseline();
    let g = GridSpec { nx: 64, nv: 64, ..GridSpec::default() };
    let mut prev = None;
    for kappa in [0.3, 0.6, 0.9, 1.2] {
        let p = SystemParams::new(3.0, 3.0, kappa, 0.05, 0.02).unwrap();
        let v = averaging::mean_square_voltage(&p, &np, &g).unwrap();
        assert!(v.is_finite() && v > 0.0);
        if let Some(q) = prev {
            let r: f64 = v / q;
            assert!(r > 0.5 && r < 2.0);
        }
        prev = Some(v);
    }
}

#[test]
fn no_coupling_no_power() {
    let p = SystemParams::new(3.0, 3.0, 0.0, 0.05, 0.02).unwrap();
    assert_eq!(averaging::mean_power(&p, &NoiseParams::baseline(), &GridSpec::default()).unwrap(), 0.0);
}

#[test]
fn power_monotone_in_gains() {
    let np = NoiseParams::baseline();
    let g = GridSpec::default();
    let ep = |mu: f64, nu: f64| averaging::mean_power(&params(mu, nu, 0.5, 0.5), &np, &g).unwrap();
    let gains = [-0.01, 0.0, 0.01];
    for nu in gains {
        let row: Vec<f64> = gains.iter().map(|mu| ep(*mu, nu)).collect();
        assert!(row[0] > row[1] && row[1] > row[2], "mu: {row:?}");
    }
    for mu in gains {
        let col: Vec<f64> = gains.iter().map(|nu| ep(mu, *nu)).collect();
        assert!(col[0] < col[1] && col[1] < col[2], "nu: {col:?}");
    }
}

#[test]
fn energy_action_identity() {
    // d/dH ln(T⟨v²⟩) = 1/⟨v²⟩ for the potential frozen at ω(H)
    let p = controlled();
    let sep = Separatrix::new(&p).unwrap();
    let check = |h: f64, r: MotionRegime| {
        let w = freq::solve_frequency(h, &p, r).unwrap();
        let step = 1e-4 * h.abs().min((h - sep.bottom_energy).abs()).max(1e-7);
        let action = |e: f64| orbit_integral(e, &p, w, r, |_, v| v * v).unwrap();
        let fd = (action(h + step).ln() - action(h - step).ln()) / (2.0 * step);
        let v2 = loop_average_at(|_, v| v * v, h, &p, w, r).unwrap();
        let t = period_integral(h, &p, w, r).unwrap();
        // ⟨v²⟩ at frozen ω uses the period at that ω
        let v2_frozen = action(h) / t;
        assert_relative_eq!(v2, v2_frozen, max_relative = 1e-8);
        assert_relative_eq!(fd, 1.0 / v2_frozen, max_relative = 1e-3);
    };
    for k in 1..20 {
        let h = sep.bottom_energy * k as f64 / 20.0;
        check(h, MotionRegime::RightWell);
        check(h, MotionRegime::LeftWell);
        check(0.05 * k as f64, MotionRegime::CrossWell);
    }
}
