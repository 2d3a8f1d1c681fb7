use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ymlab::algebra::StructureSpec;
use ymlab::spectral::bilinear::{bilinear_w, null_form_n, null_form_q, NullFormVariant, Pairing, WMode};
use ymlab::spectral::field::{vec_sub, AlgField, VecField};
use ymlab::spectral::ops::*;
use ymlab::spectral::random::{random_smooth_field, random_smooth_vec};
use ymlab::spectral::{Grid, Spectral};

fn max_diff(a: &AlgField, b: &AlgField) -> f64 {
    a.sub(b).max_abs()
}

fn vmax(v: &VecField) -> f64 {
    v.iter().fold(0.0, |m, f| m.max(f.max_abs()))
}

/// A few fixed Fourier modes evaluated in closed form.
struct Trig {
    modes: Vec<([f64; 3], f64, f64)>,
}

impl Trig {
    fn random(seed: u64, kmax: i32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (0..6)
            .map(|_| {
                let k = [
                    rng.gen_range(-kmax..=kmax) as f64,
                    rng.gen_range(-kmax..=kmax) as f64,
                    rng.gen_range(-kmax..=kmax) as f64,
                ];
                (k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        Self { modes }
    }

    fn value(&self, x: [f64; 3]) -> f64 {
        self.modes
            .iter()
            .map(|(k, a, b)| {
                let p = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                a * p.cos() + b * p.sin()
            })
            .sum()
    }
}

fn fd6(f: &[f64], g: &Grid, axis: usize) -> Vec<f64> {
    let n = g.n() as i64;
    let h = g.dx();
    let c = [(1, 45.0), (2, -9.0), (3, 1.0)];
    (0..g.n3())
        .map(|idx| {
            let (x, y, z) = g.coords(idx);
            let mut p = [x as i64, y as i64, z as i64];
            let base = p[axis];
            let mut acc = 0.0;
            for (o, w) in c {
                p[axis] = (base + o).rem_euclid(n);
                let fp = f[g.site(p[0] as usize, p[1] as usize, p[2] as usize)];
                p[axis] = (base - o).rem_euclid(n);
                let fm = f[g.site(p[0] as usize, p[1] as usize, p[2] as usize)];
                acc += w * (fp - fm);
            }
            acc / (60.0 * h)
        })
        .collect()
}

#[test]
fn derivative_of_cosine_and_constant() {
    let g = Grid::new(16, 3.0).unwrap();
    let sp = Spectral::new(g);
    let kk = 2.0 * PI / g.length();
    let f = AlgField::from_comps(vec![g.sample(|x| (kk * x[0]).cos())]);
    let d = derivative(&sp, 0, &f).unwrap();
    let expect = AlgField::from_comps(vec![g.sample(|x| -kk * (kk * x[0]).sin())]);
    assert!(max_diff(&d, &expect) < 1e-12);
    let c = AlgField::from_comps(vec![vec![3.0; g.n3()]]);
    assert!(derivative(&sp, 2, &c).unwrap().max_abs() < 1e-12);
    assert!(derivative(&sp, 3, &c).is_err());
}

#[test]
fn derivative_matches_sixth_order_differences() {
    let trig = Trig::random(5, 2);
    let mut errs = Vec::new();
    for n in [32, 64] {
        let g = Grid::standard(n).unwrap();
        let sp = Spectral::new(g);
        let f = g.sample(|x| trig.value(x));
        let d = derivative(&sp, 1, &AlgField::from_comps(vec![f.clone()])).unwrap();
        let fd = fd6(&f, &g, 1);
        let e = d.comps[0]
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        errs.push(e);
    }
    // sixth order: halving h divides the error by 64
    let ratio = errs[0] / errs[1];
    assert!(errs[0] < 1e-3, "{errs:?}");
    assert!(ratio > 40.0 && ratio < 90.0, "ratio {ratio}, errors {errs:?}");
}

#[test]
fn inverse_laplacian_conventions() {
    let g = Grid::new(16, 4.0).unwrap();
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_smooth_field(&sp, 3, &mut rng, 1.0, 16);
    let shifted = f.add(&AlgField::from_comps(vec![vec![0.7; g.n3()]; 3]));
    let back = inverse_laplacian(&sp, &laplacian(&sp, &shifted));
    assert!(max_diff(&back, &f) < 1e-12);
    let c = AlgField::from_comps(vec![vec![2.0; g.n3()]]);
    assert!(inverse_laplacian(&sp, &c).max_abs() < 1e-14);
    let kv = [2.0 * PI / 4.0, 2.0 * 2.0 * PI / 4.0, 0.0];
    let k2 = kv[0] * kv[0] + kv[1] * kv[1];
    let cosf = AlgField::from_comps(vec![g.sample(|x| (kv[0] * x[0] + kv[1] * x[1]).cos())]);
    let expect = cosf.scale(-1.0 / k2);
    assert!(max_diff(&inverse_laplacian(&sp, &cosf), &expect) < 1e-12);
}

#[test]
fn heat_semigroup_and_mode_decay() {
    let g = Grid::standard(16).unwrap();
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_smooth_field(&sp, 3, &mut rng, 0.5, 16);
    assert!(max_diff(&heat_propagate(&sp, &f, 0.0).unwrap(), &f) < 1e-14);
    let a = heat_propagate(&sp, &heat_propagate(&sp, &f, 0.03).unwrap(), 0.05).unwrap();
    let b = heat_propagate(&sp, &f, 0.08).unwrap();
    assert!(max_diff(&a, &b) < 1e-12);
    assert!(heat_propagate(&sp, &f, -1e-3).is_err());
    let single = AlgField::from_comps(vec![g.sample(|x| (2.0 * x[0] - x[2]).cos())]);
    let s = 0.17;
    let out = heat_propagate(&sp, &single, s).unwrap();
    let expect = single.scale((-s * 5.0f64).exp());
    assert!(max_diff(&out, &expect) < 1e-13);
}

#[test]
fn i_multiplier_endpoints_and_monotonicity() {
    let g = Grid::standard(32).unwrap();
    let sp = Spectral::new(g);
    let (n_freq, sigma) = (4.0, 5.0 / 6.0);
    let low = AlgField::from_comps(vec![g.sample(|x| (3.0 * x[1]).cos())]);
    assert!(max_diff(&i_multiplier(&sp, &low, n_freq, sigma).unwrap(), &low) < 1e-13);
    let high = AlgField::from_comps(vec![g.sample(|x| (8.0 * x[0]).sin())]);
    let out = i_multiplier(&sp, &high, n_freq, sigma).unwrap();
    let factor = 0.5f64.powf(1.0 / 6.0);
    assert!((factor - 0.8909).abs() < 1e-4);
    assert!(max_diff(&out, &high.scale(factor)) < 1e-12);
    assert!(i_multiplier(&sp, &high, n_freq, 1.2).is_err());
    assert!(i_multiplier(&sp, &high, n_freq, 0.0).is_err());
    let zero = AlgField::zeros(3, g.n3());
    assert!(i_multiplier(&sp, &zero, n_freq, sigma).unwrap().is_zero());
    let mut prev = f64::INFINITY;
    for i in 0..400 {
        let xi = i as f64 * 0.1;
        let m = i_symbol(xi, n_freq, sigma);
        assert!(m <= prev);
        if xi <= n_freq {
            assert_eq!(m, 1.0);
        }
        prev = m;
    }
}

#[test]
fn littlewood_paley_partition() {
    let g = Grid::standard(32).unwrap();
    let sp = Spectral::new(g);
    // single mode at |ξ| = 4 = 2^2
    let f = AlgField::from_comps(vec![g.sample(|x| (4.0 * x[2]).cos())]);
    assert!(max_diff(&lp_project(&sp, &f, 2), &f) < 1e-13);
    assert!(lp_project(&sp, &f, 1).max_abs() < 1e-13);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = random_smooth_field(&sp, 2, &mut rng, 0.0, 32)
        .add(&AlgField::from_comps(vec![vec![0.3; g.n3()]; 2]));
    let mut sum = lp_low_block(&sp, &f);
    let kmax = lp_max_index(&sp);
    let mut shells = 0.0;
    let spec = StructureSpec::u1();
    for k in 0..=kmax {
        let p = lp_project(&sp, &f, k);
        shells += p.l2_norm_sq(&spec, &g);
        sum = sum.add(&p);
    }
    assert!(max_diff(&sum, &f) < 1e-12);
    let low = lp_low_block(&sp, &f).l2_norm_sq(&spec, &g);
    let total = f.l2_norm_sq(&spec, &g);
    let rel = ((shells + low) - total).abs() / total;
    assert!(rel < 0.02, "almost orthogonality defect {rel}");
    // lowpass is the partial sum
    let lp3 = lp_lowpass(&sp, &f, 3);
    let mut partial = lp_low_block(&sp, &f);
    for k in 0..3 {
        partial = partial.add(&lp_project(&sp, &f, k));
    }
    assert!(max_diff(&lp3, &partial) < 1e-12);
    // both conventions for the lowest block are exposed
    let unit = AlgField::from_comps(vec![g.sample(|x| x[0].cos())]);
    assert!(max_diff(&lp_project(&sp, &unit, 0), &unit) < 1e-13);
    assert!(lp_low_block(&sp, &unit).max_abs() < 1e-13);
}

#[test]
fn leray_projections() {
    let g = Grid::new(16, 5.0).unwrap();
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phi = random_smooth_field(&sp, 3, &mut rng, 1.0, 16);
    let grad = gradient(&sp, &phi);
    assert!(vmax(&leray_df(&sp, &grad)) < 1e-12);
    assert!(vmax(&vec_sub(&leray_cf(&sp, &grad), &grad)) < 1e-12);

    let kk = 2.0 * PI / 5.0;
    let pol = [
        AlgField::from_comps(vec![g.sample(|x| (kk * (x[0] + x[1])).cos())]),
        AlgField::from_comps(vec![g.sample(|x| -(kk * (x[0] + x[1])).cos())]),
        AlgField::from_comps(vec![g.sample(|x| 0.5 * (kk * (x[0] + x[1])).cos())]),
    ];
    assert!(vmax(&vec_sub(&leray_df(&sp, &pol), &pol)) < 1e-12);

    let v = random_smooth_vec(&sp, 3, &mut rng, 0.0, 16);
    let df = leray_df(&sp, &v);
    let cf = leray_cf(&sp, &v);
    let sum = [df[0].add(&cf[0]), df[1].add(&cf[1]), df[2].add(&cf[2])];
    assert!(vmax(&vec_sub(&sum, &v)) < 1e-12);
    assert!(divergence(&sp, &df).max_abs() < 1e-11);
    assert!(vmax(&curl(&sp, &cf)) < 1e-11);
    assert!(vmax(&vec_sub(&leray_df(&sp, &df), &df)) < 1e-12);
    // commutation with the heat semigroup
    let a = heat_propagate_vec(&sp, &df, 0.1).unwrap();
    let b = leray_df(&sp, &heat_propagate_vec(&sp, &v, 0.1).unwrap());
    assert!(vmax(&vec_sub(&a, &b)) < 1e-12);
}

#[test]
fn heat_commutes_with_derivative() {
    let g = Grid::standard(16).unwrap();
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = random_smooth_field(&sp, 3, &mut rng, 0.0, 16);
    let a = heat_propagate(&sp, &derivative(&sp, 2, &f).unwrap(), 0.2).unwrap();
    let b = derivative(&sp, 2, &heat_propagate(&sp, &f, 0.2).unwrap()).unwrap();
    assert!(max_diff(&a, &b) < 1e-12);
}

/// Naive three-dimensional DFT.
fn naive_dft(f: &[f64], g: &Grid) -> Vec<Complex64> {
    let n = g.n();
    (0..g.n3())
        .map(|k| {
            let (kx, ky, kz) = g.coords(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..g.n3() {
                let (a, b, c) = g.coords(x);
                let ph = -2.0 * PI * ((kx * a + ky * b + kz * c) % n) as f64 / n as f64;
                acc += f[x] * Complex64::from_polar(1.0, ph);
            }
            acc
        })
        .collect()
}

#[test]
fn sobolev_norm_against_direct_mode_sum() {
    let g = Grid::new(8, 1.5).unwrap();
    let sp = Spectral::new(g);
    let spec = StructureSpec::u1();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let f = AlgField::from_comps(vec![(0..g.n3()).map(|_| rng.gen_range(-1.0..1.0)).collect()]);
    let fh = naive_dft(&f.comps[0], &g);
    let s = 0.75;
    let mut oracle = 0.0;
    for (idx, c) in fh.iter().enumerate() {
        let (x, y, z) = g.coords(idx);
        let k2: f64 = [x, y, z].iter().map(|&i| g.wavenumber(i).powi(2)).sum();
        oracle += (1.0 + k2).powf(s) * c.norm_sqr();
    }
    oracle *= g.volume() / (g.n3() as f64).powi(2);
    let got = sobolev_norm(&sp, &spec, &f, s, false);
    assert!((got * got - oracle).abs() < 1e-12 * oracle);
    let l2 = sobolev_norm(&sp, &spec, &f, 0.0, false);
    assert!((l2 - f.l2_norm(&spec, &g)).abs() < 1e-12 * l2);

    let g = Grid::standard(16).unwrap();
    let sp = Spectral::new(g);
    let c = AlgField::from_comps(vec![g.sample(|x| (2.0 * x[0] + x[1]).cos())]);
    let h1 = sobolev_norm(&sp, &spec, &c, 1.0, true);
    let l2 = c.l2_norm(&spec, &g);
    assert!((h1 - 5f64.sqrt() * l2).abs() < 1e-12 * h1);
}

#[test]
fn dealias_is_idempotent_and_alias_free() {
    let g = Grid::standard(16).unwrap();
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let raw = AlgField::from_comps(vec![(0..g.n3()).map(|_| rng.gen_range(-1.0..1.0)).collect()]);
    let d = dealias(&sp, &raw);
    assert!(max_diff(&dealias(&sp, &d), &d) < 1e-14);
    let low = AlgField::from_comps(vec![g.sample(|x| (5.0 * x[0]).sin() * (2.0 * x[2]).cos())]);
    assert!(max_diff(&dealias(&sp, &low), &low) < 1e-13);

    // the truncated product equals the exact product (computed on a doubled grid) truncated
    let f = random_smooth_field(&sp, 1, &mut rng, 0.0, 16);
    let h = random_smooth_field(&sp, 1, &mut rng, 0.0, 16);
    let coarse = product_dealiased(&sp, &f.comps[0], &h.comps[0]);
    let fine_g = Grid::standard(32).unwrap();
    let fine = Spectral::new(fine_g);
    let up = |v: &[f64]| -> Vec<f64> {
        let vh = sp.forward(v);
        let mut out = vec![Complex64::new(0.0, 0.0); fine_g.n3()];
        for (idx, c) in vh.iter().enumerate() {
            let (x, y, z) = g.coords(idx);
            let m = [g.mode(x), g.mode(y), g.mode(z)];
            if m.iter().any(|v| v.abs() >= 8) {
                continue;
            }
            let j = fine_g.site(
                fine_g.index_of_mode(m[0]),
                fine_g.index_of_mode(m[1]),
                fine_g.index_of_mode(m[2]),
            );
            out[j] = c * 8.0;
        }
        fine.inverse(out)
    };
    let pf: Vec<f64> = up(&f.comps[0]).iter().zip(up(&h.comps[0])).map(|(a, b)| a * b).collect();
    let pfh = fine.forward(&pf);
    let ch = sp.forward(&coarse);
    let cut = g.dealias_cutoff();
    for (idx, c) in ch.iter().enumerate() {
        let (x, y, z) = g.coords(idx);
        let m = [g.mode(x), g.mode(y), g.mode(z)];
        let j = fine_g.site(
            fine_g.index_of_mode(m[0]),
            fine_g.index_of_mode(m[1]),
            fine_g.index_of_mode(m[2]),
        );
        let expect = if m.iter().all(|v| v.abs() <= cut) {
            pfh[j] / 8.0
        } else {
            Complex64::new(0.0, 0.0)
        };
        assert!((c - expect).norm() < 1e-10, "mode {m:?}: {c} vs {expect}");
    }
}

#[test]
fn null_form_q_properties() {
    let g = Grid::standard(16).unwrap();
    let sp = Spectral::new(g);
    let su2 = StructureSpec::su2();
    let lie = Pairing::lie(&su2);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let f = random_smooth_field(&sp, 3, &mut rng, 1.0, 4);
    let h = random_smooth_field(&sp, 3, &mut rng, 1.0, 4);
    let a = null_form_q(&sp, &lie, 0, 2, &f, &h).unwrap();
    let b = null_form_q(&sp, &lie, 2, 0, &f, &h).unwrap();
    assert_eq!(a.add(&b).max_abs(), 0.0);

    let u1 = Pairing::lie(&StructureSpec::u1());
    let s = random_smooth_field(&sp, 1, &mut rng, 1.0, 4);
    assert!(null_form_q(&sp, &u1, 0, 1, &s, &s).unwrap().max_abs() < 1e-14);

    // plane waves e1 cos(k.x), e2 cos(l.x)
    let k = [1.0, 0.0, 0.0];
    let l = [0.0, 2.0, 1.0];
    let dot = |v: [f64; 3], x: [f64; 3]| v[0] * x[0] + v[1] * x[1] + v[2] * x[2];
    let f = AlgField::along(3, 0, g.sample(|x| dot(k, x).cos()));
    let h = AlgField::along(3, 1, g.sample(|x| dot(l, x).cos()));
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let q = null_form_q(&sp, &lie, i, j, &f, &h).unwrap();
        let coef = k[i] * l[j] - k[j] * l[i];
        let expect = AlgField::along(3, 2, g.sample(|x| coef * dot(k, x).sin() * dot(l, x).sin()));
        assert!(max_diff(&q, &expect) < 1e-12);
    }
}

#[test]
fn null_form_identities() {
    let g = Grid::new(16, 3.0).unwrap();
    let sp = Spectral::new(g);
    let scalar = Pairing::scalar();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let phi = random_smooth_field(&sp, 1, &mut rng, 0.5, 16);
    let psi = random_smooth_field(&sp, 1, &mut rng, 0.5, 16);
    // P_j(φ ∂ψ) = Δ^{-1} ∂^i Q_ij(φ, ψ)
    let grad = gradient(&sp, &psi);
    let prod: VecField = std::array::from_fn(|j| {
        AlgField::from_comps(vec![product_dealiased(&sp, &phi.comps[0], &grad[j].comps[0])])
    });
    let lhs = leray_df(&sp, &prod);
    for j in 0..3 {
        let rhs = null_form_n(&sp, &scalar, NullFormVariant::InvLapDivQ { j }, &[phi.clone()], &psi).unwrap();
        assert!(max_diff(&lhs[j], &rhs) < 1e-10 * lhs[j].max_abs().max(1e-300));
    }
    // (PA)·∇φ = Σ Q_ij(Δ^{-1}∂_i A_j, φ)
    let a = random_smooth_vec(&sp, 1, &mut rng, 0.5, 16);
    let pa = leray_df(&sp, &a);
    let gphi = gradient(&sp, &phi);
    let mut lhs = AlgField::zeros(1, g.n3());
    for j in 0..3 {
        lhs = lhs.add(&AlgField::from_comps(vec![product_dealiased(
            &sp,
            &pa[j].comps[0],
            &gphi[j].comps[0],
        )]));
    }
    let rhs = null_form_n(&sp, &scalar, NullFormVariant::QInvLapDiv, &a, &phi).unwrap();
    assert!(max_diff(&lhs, &rhs) < 1e-10 * lhs.max_abs());
    // zero second input
    let zero = AlgField::zeros(1, g.n3());
    // paired transforms leak round-off between the two packed lattices
    let n2 = null_form_n(&sp, &scalar, NullFormVariant::QInvLapDiv, &a, &zero).unwrap();
    assert!(n2.max_abs() < 1e-14);
    let n1 = null_form_n(&sp, &scalar, NullFormVariant::InvLapDivQ { j: 1 }, &[phi.clone()], &zero).unwrap();
    assert!(n1.max_abs() < 1e-14);
}

#[test]
fn w_modes_agree_and_w_is_symmetric() {
    let g = Grid::new(8, 4.0).unwrap();
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let scalar = Pairing::scalar();
    let lie = Pairing::lie(&StructureSpec::su2());
    for &s in &[0.01, 0.1, 1.0] {
        let f = random_smooth_field(&sp, 1, &mut rng, 0.0, 8);
        let h = random_smooth_field(&sp, 1, &mut rng, 0.0, 8);
        let d = bilinear_w(&sp, &scalar, &f, &h, s, WMode::Duhamel).unwrap();
        let y = bilinear_w(&sp, &scalar, &f, &h, s, WMode::Symbol).unwrap();
        assert!(max_diff(&d, &y) < 1e-8 * y.max_abs(), "s = {s}");
        let swapped = bilinear_w(&sp, &scalar, &h, &f, s, WMode::Duhamel).unwrap();
        assert!(max_diff(&d, &swapped) < 1e-12 * d.max_abs());

        let f = random_smooth_field(&sp, 3, &mut rng, 0.0, 8);
        let h = random_smooth_field(&sp, 3, &mut rng, 0.0, 8);
        let d = bilinear_w(&sp, &lie, &f, &h, s, WMode::Duhamel).unwrap();
        let y = bilinear_w(&sp, &lie, &f, &h, s, WMode::Symbol).unwrap();
        assert!(max_diff(&d, &y) < 1e-8 * y.max_abs(), "lie, s = {s}");
    }
    let f = random_smooth_field(&sp, 1, &mut rng, 0.0, 8);
    assert!(bilinear_w(&sp, &scalar, &f, &f, 0.0, WMode::Duhamel).unwrap().is_zero());
}
