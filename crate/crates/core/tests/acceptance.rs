//! End-to-end acceptance checks. Each test prints one line of the form
//! `criterion NN <name>: PASS|FAIL <details>` and then asserts the outcome,
//! so `cargo test --test acceptance -- --nocapture --test-threads=1` gives a
//! readable report.

use qreflect::banded::BandedMatrix;
use qreflect::config::{validate, SimConfig, ValidatedConfig};
use qreflect::grid::{init_gaussian, make_grid, GridGeometry, PacketSpec};
use qreflect::hamiltonian::{CayleySystem, Hamiltonian};
use qreflect::observables::{effective_reflectivity, log_spaced, position_x_moments};
use qreflect::oracle1d::{packet_averaged_reflectivity, reflectivity_1d, Potential1D};
use qreflect::potential::{
    evaluate, evaluate_dx, evaluate_field, CorrugationParams, PotentialField, Region,
};
use qreflect::propagator::{run, Absorber, PropagationState, Propagator, RunReport};
use qreflect::{memory_model, Complex, UnitSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

fn report(id: u32, name: &str, pass: bool, details: String) {
    println!(
        "criterion {id:02} {name}: {} {details}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.5e}")).collect();
    format!("[{}]", items.join(", "))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Propagation horizon for desk-grid runs. At dt = 5 ns the Cayley phase
/// error slows the packet's large-p_y components, so R keeps creeping up
/// past the default t_max of 1.1 us.
const DESK_T_MAX: f64 = 1.6e-6;

fn desk_flat(cutoff_nm: f64) -> SimConfig {
    SimConfig {
        cutoff: cutoff_nm * 1e-9,
        t_max: Some(DESK_T_MAX),
        ..SimConfig::desk_flat()
    }
}

fn run64(c: &SimConfig) -> RunReport<f64> {
    run::<f64>(&validate(c).expect("valid config")).expect("run succeeds")
}

/// Oracle pair (mono-energetic, packet-averaged) for the flat surface.
fn oracle(cfg: &ValidatedConfig) -> (f64, f64) {
    let p = cfg.internal();
    let pot = Potential1D::new(p.c3, p.cutoff).unwrap();
    let mono = reflectivity_1d(&pot, p.mass, p.hbar, p.incident_energy()).unwrap();
    let avg = packet_averaged_reflectivity(&pot, p.mass, p.hbar, p.v_x0, p.sigma_x).unwrap();
    (mono, avg)
}

fn zero_potential(g: &GridGeometry<f64>) -> PotentialField<f64> {
    PotentialField {
        values: vec![0.0; g.len()],
        regions: vec![Region::Far; g.len()],
        params: CorrugationParams::new(1.0, 0.0, g.period, 0.0, 1.0).unwrap(),
        n_x: g.n_x,
        n_y: g.n_y,
    }
}

#[test]
fn c01_norm_preservation() {
    let mut c = SimConfig::desk();
    c.n_x = 1 << 12;
    c.absorber.enabled = false;
    let cfg = validate(&c).unwrap();
    let p = cfg.internal();
    let grid = make_grid::<f64>(p);
    let params = CorrugationParams::from_params(p).unwrap();
    let h = Hamiltonian::assemble(&grid, &evaluate_field(&grid, &params), p.mass, p.hbar).unwrap();
    let sys = CayleySystem::build(h, p.dt, p.hbar).unwrap();
    let field = init_gaussian(&grid, &PacketSpec::from_params(p), p.mass, p.hbar).unwrap();
    let mut state = PropagationState::new(field);
    let mut prop = Propagator::new(&sys, Absorber::disabled(grid.n_x));
    let t0 = std::time::Instant::now();
    for _ in 0..2000 {
        prop.step(&mut state).unwrap();
    }
    let drift = (state.field.norm() - 1.0).abs();
    let secs = t0.elapsed().as_secs_f64();
    let pass = drift <= 1e-9;
    report(
        1,
        "norm preservation",
        pass,
        format!("|norm-1| = {drift:.3e} after 2000 steps on 2^12 x 2^5 ({secs:.1} s)"),
    );
    assert!(pass);
}

/// Dense LU with partial pivoting, independent of the banded code path.
fn dense_solve(mut a: Vec<Vec<C>>, mut b: Vec<C>) -> Vec<C> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let t = a[k][j];
                a[i][j] -= f * t;
            }
            let t = b[k];
            b[i] -= f * t;
        }
    }
    let mut x = vec![C::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let s: C = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[test]
fn c02_banded_vs_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let (mut worst_solve, mut worst_fill) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.gen_range(2..=128);
        let b = rng.gen_range(1..=16usize.min(n - 1));
        let mut m = BandedMatrix::<f64>::zeros(n, b);
        for i in 0..n {
            let mut off = 0.0;
            for j in i.saturating_sub(b)..i {
                let v = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.set(i, j, v);
                off += v.norm();
            }
            // strict dominance over both the row and the mirrored column
            let d = C::new(2.0 * b as f64 + 1.0 + off, rng.gen_range(-3.0..3.0));
            m.set(i, i, d);
        }
        let dense = m.to_dense();
        let rhs: Vec<C> = (0..n)
            .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let factor = m.factorize().unwrap();
        let x = factor.solve(&rhs).unwrap();
        let y = dense_solve(dense.clone(), rhs);
        let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / scale;
        worst_solve = worst_solve.max(err);
        // LLᵀ must reproduce A everywhere, including exact zeros outside the band
        let llt = factor.reconstruct_dense();
        for i in 0..n {
            for j in 0..n {
                let d = (llt[i][j] - dense[i][j]).norm();
                if i.abs_diff(j) > b {
                    assert_eq!(factor.get(i.max(j), i.min(j)), C::new(0.0, 0.0));
                }
                worst_fill = worst_fill.max(d);
            }
        }
    }
    let pass = worst_solve <= 1e-10 && worst_fill <= 1e-10;
    report(2, "banded vs dense", pass, format!("max rel solve error {worst_solve:.2e}, max |LL^T - A| {worst_fill:.2e} over 200 systems"));
    assert!(pass);
}

fn free_width(v_x0: f64, dt_ns: f64) -> (f64, f64) {
    let u = UnitSystem::nano();
    let (mass, hbar) = (u.mass(qreflect::units::HE3_MASS_KG), u.hbar());
    let g = GridGeometry::new(1 << 12, 4, -1000.0, 1000.0, 100.0);
    let h = Hamiltonian::assemble(&g, &zero_potential(&g), mass, hbar).unwrap();
    let sys = CayleySystem::build(h, dt_ns, hbar).unwrap();
    let sigma0 = 80.0;
    let v = u.velocity(v_x0);
    let t_total = 500.0;
    let x0 = -0.5 * v * t_total;
    let spec = PacketSpec {
        x0,
        y0: 0.0,
        sigma_x: sigma0,
        sigma_y: f64::INFINITY,
        v_x0: v,
        v_y0: 0.0,
    };
    let mut state = PropagationState::new(init_gaussian(&g, &spec, mass, hbar).unwrap());
    let mut prop = Propagator::new(&sys, Absorber::disabled(g.n_x));
    let n = (t_total / dt_ns).round() as usize;
    for _ in 0..n {
        prop.step(&mut state).unwrap();
    }
    let (_, s) = position_x_moments(&state.field);
    let expect = sigma0 * (1.0 + (hbar * t_total / (2.0 * mass * sigma0 * sigma0)).powi(2)).sqrt();
    (s, expect)
}

#[test]
fn c03_free_packet_dispersion() {
    let (s_rest, expect) = free_width(0.0, 5.0);
    let (s_moving, _) = free_width(-2.0, 0.5);
    let (e1, e2) = (rel(s_rest, expect), rel(s_moving, expect));
    let pass = e1 <= 5e-3 && e2 <= 5e-3;
    report(
        3,
        "free-packet dispersion",
        pass,
        format!(
            "analytic sigma_x(0.5 us) = {expect:.4} nm; at rest (dt 5 ns) {s_rest:.4} nm, rel {e1:.2e}; v = -2 m/s (dt 0.5 ns) {s_moving:.4} nm, rel {e2:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn c04_cutoff_continuity() {
    let u = UnitSystem::nano();
    let c3 = u.c3(4.0e-50);
    let mut worst_v = 0.0f64;
    let mut worst_dv = 0.0f64;
    for &(amp, cutoff) in &[(0.0, 3.0), (10.0, 10.0), (10.0, 30.0), (5.0, 7.0)] {
        let p = CorrugationParams::new(c3, amp, 100.0, 0.4, cutoff).unwrap();
        for k in 0..64 {
            let y = 100.0 * k as f64 / 64.0;
            let s = amp * (std::f64::consts::TAU * y / 100.0 + 0.4).sin();
            let x = s + cutoff;
            let eps = cutoff * 1e-13;
            let (lo, hi) = (evaluate(x - eps, y, &p), evaluate(x + eps, y, &p));
            let (dlo, dhi) = (evaluate_dx(x - eps, y, &p), evaluate_dx(x + eps, y, &p));
            worst_v = worst_v.max(rel(lo, hi));
            worst_dv = worst_dv.max(rel(dlo, dhi));
            // the junction value and slope are the far-field ones
            worst_v = worst_v.max(rel(evaluate(x, y, &p), -c3 / cutoff.powi(3)));
            worst_dv = worst_dv.max(rel(evaluate_dx(x, y, &p), 3.0 * c3 / cutoff.powi(4)));
        }
    }
    let pass = worst_v <= 1e-10 && worst_dv <= 1e-10;
    report(
        4,
        "cutoff continuity",
        pass,
        format!("max rel jump: V {worst_v:.2e}, dV/dx {worst_dv:.2e}"),
    );
    assert!(pass);
}

#[test]
fn c05_flat_surface_vs_oracle() {
    let c = desk_flat(10.0);
    let cfg = validate(&c).unwrap();
    let r = run64(&c);
    let (mono, avg) = oracle(&cfg);
    let e = rel(r.r_final, avg);
    let pass = e <= 0.02;
    report(
        5,
        "flat surface vs 1D oracle",
        pass,
        format!(
            "R_2D = {:.6e} ({:?}); packet-averaged oracle {avg:.6e} (rel {e:.2e}); mono-energetic oracle {mono:.6e} (rel {:.2e})",
            r.r_final,
            r.outcome,
            rel(r.r_final, mono)
        ),
    );
    assert!(pass);
}

/// Documented fine-grid run (n_x = 2^15, about 0.6 GB). Run with `--ignored`.
#[test]
#[ignore]
fn c05b_flat_surface_fine_grid() {
    let mut c = desk_flat(10.0);
    c.n_x = 1 << 15;
    let cfg = validate(&c).unwrap();
    let r = run64(&c);
    let (mono, avg) = oracle(&cfg);
    let e = rel(r.r_final, avg);
    let pass = e <= 0.01;
    report(
        5,
        "flat surface vs 1D oracle, n_x = 2^15",
        pass,
        format!(
            "R_2D = {:.6e}; packet-averaged {avg:.6e} (rel {e:.2e}); mono {mono:.6e} (rel {:.2e})",
            r.r_final,
            rel(r.r_final, mono)
        ),
    );
    assert!(pass);
}

#[test]
fn c06_time_step_convergence() {
    let mut c = SimConfig::desk();
    c.t_max = Some(DESK_T_MAX);
    let coarse = run64(&c);
    c.dt = 2.5e-9;
    c.observe_every *= 2;
    let fine = run64(&c);
    let (a, b) = (coarse.r_final, fine.r_final);
    let e = rel(a, b);
    let pass = e <= 1e-3;
    report(
        6,
        "time-step convergence",
        pass,
        format!(
            "corrugated desk grid: R(5 ns) = {a:.6e} ({:?}), R(2.5 ns) = {b:.6e} ({:?}), rel {e:.2e}",
            coarse.outcome, fine.outcome
        ),
    );
    assert!(pass);
}

#[test]
fn c07_memory_model() {
    let table = [
        ((1usize << 5, 1usize << 14), 0.4),
        ((1 << 7, 1 << 15), 9.0),
        ((1 << 8, 1 << 16), 69.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for ((ny, nx), gb) in table {
        let m = memory_model(nx, ny);
        let total = m.total() as f64 / 1e9;
        let factor = m.factor_bytes as f64 / 1e9;
        let ratio = (total / gb).max(gb / total);
        pass &= ratio <= 1.3;
        parts.push(format!(
            "(2^{}, 2^{}): total {total:.3} GB, factor {factor:.3} GB vs {gb} GB, ratio {ratio:.3}",
            ny.trailing_zeros(),
            nx.trailing_zeros()
        ));
    }
    report(7, "memory model", pass, parts.join("; "));
    assert!(pass);
}

#[test]
fn c08_corrugation_coupling() {
    let base = SimConfig {
        t_max: Some(DESK_T_MAX),
        ..SimConfig::desk()
    };
    let sigmas = [8e-9, 16e-9, 32e-9];
    let corrugated: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            run64(&SimConfig {
                sigma_y: s,
                ..base.clone()
            })
            .r_final
        })
        .collect();
    let flat: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            run64(&SimConfig {
                sigma_y: s,
                amplitude: 0.0,
                ..base.clone()
            })
            .r_final
        })
        .collect();
    let plane = run64(&SimConfig {
        sigma_y: f64::INFINITY,
        ..base.clone()
    })
    .r_final;
    let monotone = corrugated.windows(2).all(|w| w[1] >= w[0]);
    let fmax = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let fmin = flat.iter().cloned().fold(f64::INFINITY, f64::min);
    let flat_spread = (fmax - fmin) / fmin;
    let bounded = corrugated.iter().all(|r| *r <= plane);
    let pass = monotone && flat_spread <= 0.01 && bounded;
    report(
        8,
        "corrugation coupling",
        pass,
        format!(
            "A/L = 0.1: R(sigma_y = 8, 16, 32 nm) = {}, flat profile {plane:.5e}; monotone {monotone}, bounded {bounded}; A = 0: {}, spread {flat_spread:.2e}",
            list(&corrugated),
            list(&flat)
        ),
    );
    assert!(pass);
}

#[test]
fn c09_periodic_band_structure() {
    let c = validate(&SimConfig::desk()).unwrap();
    let p = c.internal();
    let mut g = make_grid::<f64>(p);
    g.n_x = 64;
    let params = CorrugationParams::from_params(p).unwrap();
    let h = Hamiltonian::assemble(&g, &evaluate_field(&g, &params), p.mass, p.hbar).unwrap();
    let m = h.to_banded();
    let ny = g.n_y;
    // largest offset of any nonzero, and the offsets of the wrap couplings
    let mut max_offset = 0;
    let mut wrap_ok = true;
    for r in 0..g.len() {
        for col in r.saturating_sub(ny)..=r {
            if m.get(r, col) != C::new(0.0, 0.0) {
                max_offset = max_offset.max(r - col);
            }
        }
        for col in 0..r.saturating_sub(ny) {
            assert_eq!(m.get(r, col), C::new(0.0, 0.0));
        }
    }
    for i in 0..g.n_x {
        let (first, last) = (g.index(i, 0), g.index(i, ny - 1));
        wrap_ok &= last - first == ny - 1 && m.get(last, first).re == h.coupling_y;
    }
    // without the wrap, the x coupling alone already spans n_y
    let open_bandwidth = ny;
    let pass = wrap_ok && m.bandwidth() == open_bandwidth && max_offset == open_bandwidth;
    report(
        9,
        "periodic band structure",
        pass,
        format!("wrap entries at offset {} (n_y - 1 = {}), bandwidth {} periodic vs {open_bandwidth} open", ny - 1, ny - 1, m.bandwidth()),
    );
    assert!(pass);
}

#[test]
fn c10_cutoff_averaging() {
    // synthetic: R(Δ) = R0 (1 + ε sin(k ln Δ)) over two full periods
    let (r0, eps) = (0.01, 0.4);
    let span = 30f64.ln() - 3f64.ln();
    let k = 2.0 * std::f64::consts::TAU / span;
    let n = 16;
    let synthetic: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let l = 3f64.ln() + span * i as f64 / n as f64;
            (l.exp(), r0 * (1.0 + eps * (k * l).sin()))
        })
        .collect();
    let r_syn = effective_reflectivity(&synthetic).unwrap();
    let syn_ok = (r_syn - r0).abs() <= eps * eps * r0;

    // physical: flat-surface runs over log-spaced Δ against the oracle
    let deltas = log_spaced(3.0, 30.0, 7);
    let mut sim = Vec::new();
    let mut orc = Vec::new();
    let mut orc_mono = Vec::new();
    for &d in &deltas {
        let c = desk_flat(d);
        let cfg = validate(&c).unwrap();
        let (mono, avg) = oracle(&cfg);
        sim.push((d, run64(&c).r_final));
        orc.push((d, avg));
        orc_mono.push((d, mono));
    }
    let r_sim = effective_reflectivity(&sim).unwrap();
    let r_orc = effective_reflectivity(&orc).unwrap();
    let r_mono = effective_reflectivity(&orc_mono).unwrap();
    let e = rel(r_sim, r_orc);
    let pass = syn_ok && e <= 0.02;
    let rows: Vec<String> = sim
        .iter()
        .zip(&orc)
        .map(|((d, s), (_, o))| format!("{d:.2} nm: {s:.4e}/{o:.4e}"))
        .collect();
    report(
        10,
        "cutoff averaging",
        pass,
        format!(
            "synthetic mean {r_syn:.6e} vs {r0:e}; 2D average {r_sim:.5e} vs packet-averaged oracle {r_orc:.5e} (rel {e:.2e}), mono {r_mono:.5e}; [{}]",
            rows.join(", ")
        ),
    );
    assert!(pass);
}
