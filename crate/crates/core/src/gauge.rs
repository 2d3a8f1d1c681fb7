//! Connections, curvature, gauge transformations and the Gauss constraint.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{exp_map, log_map, maurer_cartan_coeff, quat_mul, rotate, GroupElem, GroupKind};
use crate::error::{invalid, Result, YmError};
use crate::lattice::Lattice;
use crate::spectral::field::{vec_add, vec_sub, AlgField, VecField};
use crate::spectral::random::random_smooth_field;

/// Warning threshold for the non-tangent part of `(∂U) U^{-1}`.
pub const MAURER_CARTAN_WARN: f64 = 1e-8;

/// Spatial connection `A_i` with an optional temporal component `A_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection {
    pub a: VecField,
    pub a0: Option<AlgField>,
}

impl Connection {
    pub fn spatial(a: VecField) -> Self {
        Self { a, a0: None }
    }

    pub fn zeros(lat: &Lattice) -> Self {
        Self::spatial(lat.vzeros())
    }

    pub fn check(&self, lat: &Lattice) -> Result<()> {
        for f in &self.a {
            f.check_shape(lat.dim(), lat.grid())?;
        }
        if let Some(a0) = &self.a0 {
            a0.check_shape(lat.dim(), lat.grid())?;
        }
        if !self.a.iter().all(AlgField::is_finite) {
            return invalid("connection has non-finite entries");
        }
        Ok(())
    }
}

/// Storage slot and sign of `F_ij` inside [`Curvature::mag`].
pub(crate) fn pair_slot(i: usize, j: usize) -> Option<(usize, f64)> {
    match (i, j) {
        (0, 1) => Some((0, 1.0)),
        (0, 2) => Some((1, 1.0)),
        (1, 2) => Some((2, 1.0)),
        (1, 0) => Some((0, -1.0)),
        (2, 0) => Some((1, -1.0)),
        (2, 1) => Some((2, -1.0)),
        _ => None,
    }
}

/// Curvature components `F_12, F_13, F_23` and, when known, `F_0i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature {
    pub mag: [AlgField; 3],
    pub electric: Option<VecField>,
}

impl Curvature {
    /// `F_ij` for spatial indices in `0..3`; zero on the diagonal.
    pub fn f(&self, i: usize, j: usize) -> AlgField {
        match pair_slot(i, j) {
            Some((k, s)) if s > 0.0 => self.mag[k].clone(),
            Some((k, _)) => self.mag[k].scale(-1.0),
            None => AlgField::zeros(self.mag[0].dim(), self.mag[0].n3()),
        }
    }

    /// `½ Σ_{α<β} ‖F_αβ‖²`.
    pub fn energy(&self, lat: &Lattice) -> f64 {
        let m: f64 = self.mag.iter().map(|f| lat.l2_sq(f)).sum();
        let e: f64 = self.electric.as_ref().map_or(0.0, |e| lat.vl2_sq(e));
        0.5 * (m + e)
    }

    pub fn magnetic_energy(&self, lat: &Lattice) -> f64 {
        0.5 * self.mag.iter().map(|f| lat.l2_sq(f)).sum::<f64>()
    }
}

/// `F_ij = ∂_i A_j − ∂_j A_i + [A_i, A_j]`, `F_0i = E_i`.
pub fn curvature(lat: &Lattice, a: &VecField, e: Option<&VecField>) -> Curvature {
    let da: [[AlgField; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| lat.d(&a[j], i)));
    let ab = lat.vband(a);
    let mk = |i: usize, j: usize| {
        let mut f = da[i][j].sub(&da[j][i]);
        f.axpy(1.0, &lat.bracket_band(&ab[i], &ab[j]));
        f
    };
    Curvature {
        mag: [mk(0, 1), mk(0, 2), mk(1, 2)],
        electric: e.cloned(),
    }
}

/// `D_α B = ∂_α B + [A_α, B]`. For `α = 0` the time derivative of `B` must be supplied.
pub fn covariant_derivative(
    lat: &Lattice,
    conn: &Connection,
    b: &AlgField,
    alpha: usize,
    dt_b: Option<&AlgField>,
) -> Result<AlgField> {
    match alpha {
        0 => {
            let Some(dtb) = dt_b else {
                return invalid("D_0 needs the time derivative of its argument");
            };
            let mut out = dtb.clone();
            if let Some(a0) = &conn.a0 {
                out.axpy(1.0, &lat.bracket(a0, b));
            }
            Ok(out)
        }
        1..=3 => {
            let i = alpha - 1;
            let mut out = lat.d(b, i);
            out.axpy(1.0, &lat.bracket(&conn.a[i], b));
            Ok(out)
        }
        _ => invalid(format!("index {alpha} out of range 0..=3")),
    }
}

/// Spatial covariant derivative `D_i B`, `i ∈ 0..3`.
pub fn cov_d(lat: &Lattice, a: &VecField, b: &AlgField, i: usize) -> AlgField {
    let mut out = lat.d(b, i);
    out.axpy(1.0, &lat.bracket(&a[i], b));
    out
}

/// Covariant divergence `D^ℓ X_ℓ`.
pub fn cov_div(lat: &Lattice, a: &VecField, x: &VecField) -> AlgField {
    let mut out = lat.div(x);
    for l in 0..3 {
        out.axpy(1.0, &lat.bracket(&a[l], &x[l]));
    }
    out
}

/// A field of group elements stored as unit quaternions.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupField {
    pub q: Vec<[f64; 4]>,
}

impl GroupField {
    pub fn identity(n3: usize) -> Self {
        Self {
            q: vec![[1.0, 0.0, 0.0, 0.0]; n3],
        }
    }

    /// Pointwise `exp(X)`.
    pub fn exp(lat: &Lattice, x: &AlgField) -> Self {
        let n3 = x.n3();
        Self {
            q: (0..n3)
                .map(|i| exp_map(&x.at(i), lat.spec()).map(|g| g.q).unwrap_or([1.0, 0.0, 0.0, 0.0]))
                .collect(),
        }
    }

    pub fn at(&self, site: usize) -> GroupElem {
        GroupElem { q: self.q[site] }
    }

    /// Pointwise product `self · other`, renormalized.
    pub fn mul(&self, other: &GroupField) -> GroupField {
        GroupField {
            q: self
                .q
                .iter()
                .zip(&other.q)
                .map(|(a, b)| GroupElem { q: quat_mul(*a, *b) }.normalized().q)
                .collect(),
        }
    }

    pub fn inverse(&self) -> GroupField {
        GroupField {
            q: self.q.iter().map(|q| [q[0], -q[1], -q[2], -q[3]]).collect(),
        }
    }

    /// Largest deviation of `|q|` from 1.
    pub fn norm_defect(&self) -> f64 {
        self.q
            .iter()
            .map(|q| (q.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_distance_to_identity(&self) -> f64 {
        self.q
            .iter()
            .map(|q| GroupElem { q: *q }.distance_to_identity())
            .fold(0.0, f64::max)
    }

    fn component(&self, c: usize) -> Vec<f64> {
        self.q.iter().map(|q| q[c]).collect()
    }
}

/// Pointwise `Ad_U X = U X U^{-1}`.
pub fn adjoint_field(lat: &Lattice, u: &GroupField, x: &AlgField) -> AlgField {
    match lat.spec().kind() {
        GroupKind::U1 => x.clone(),
        GroupKind::Su2 => {
            let mut out = x.clone();
            for (i, q) in u.q.iter().enumerate() {
                let r = rotate(*q, [x.comps[0][i], x.comps[1][i], x.comps[2][i]]);
                for a in 0..3 {
                    out.comps[a][i] = r[a];
                }
            }
            out
        }
    }
}

pub fn adjoint_vec(lat: &Lattice, u: &GroupField, v: &VecField) -> VecField {
    std::array::from_fn(|i| adjoint_field(lat, u, &v[i]))
}

/// Largest `|log U|` for which the logarithm chart is used.
const CHART_LIMIT: f64 = 0.9 * 2.0 * std::f64::consts::PI;

/// `(∂_i U) U^{-1}` from spectral derivatives of the quaternion components,
/// with the largest non-tangent residual.
fn maurer_cartan_quaternion(lat: &Lattice, u: &GroupField) -> (VecField, f64) {
    let sp = lat.sp();
    let comps: Vec<Vec<f64>> = (0..4).map(|c| u.component(c)).collect();
    let refs: Vec<&[f64]> = comps.iter().map(Vec::as_slice).collect();
    let hats = sp.forward_many(&refs);
    let mut residual = 0.0f64;
    let out: VecField = std::array::from_fn(|axis| {
        let dh: Vec<_> = hats.iter().map(|h| sp.deriv_hat(h, axis)).collect();
        let du = sp.inverse_many(&dh);
        let mut f = lat.zeros();
        for site in 0..lat.n3() {
            let mc = maurer_cartan_coeff(
                &u.at(site),
                [du[0][site], du[1][site], du[2][site], du[3][site]],
                lat.spec(),
            );
            residual = residual.max(mc.residual);
            f.set(site, &mc.value);
        }
        f
    });
    (out, residual)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `(∂ e^X) e^{-X} = Σ_k ad_X^k ∂X / (k+1)!` in closed form for su(2).
fn dexp_su2(x: [f64; 3], dx: [f64; 3]) -> [f64; 3] {
    let t2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let t = t2.sqrt();
    let (c1, c2) = if t < 1e-3 {
        (0.5 - t2 / 24.0 + t2 * t2 / 720.0, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0)
    } else {
        ((1.0 - t.cos()) / t2, (t - t.sin()) / (t2 * t))
    };
    let xy = cross(x, dx);
    let xxy = cross(x, xy);
    [
        dx[0] + c1 * xy[0] + c2 * xxy[0],
        dx[1] + c1 * xy[1] + c2 * xxy[1],
        dx[2] + c1 * xy[2] + c2 * xxy[2],
    ]
}

/// `(∂_i U) U^{-1}` for each axis, with a residual measuring how well `U` is resolved.
///
/// Where the principal logarithm `X = log U` stays inside its chart, the derivative is
/// taken spectrally on `X` and mapped through `dexp`, which is exact for `U = exp(X)`
/// with band-limited `X`. Otherwise the quaternion components are differentiated
/// directly and projected onto the algebra. The residual is the larger of the
/// non-tangent part of the quaternion route and the disagreement between routes.
pub fn maurer_cartan_field(lat: &Lattice, u: &GroupField) -> (VecField, f64) {
    let (quat, tangent) = maurer_cartan_quaternion(lat, u);
    let spec = lat.spec();
    let x = AlgField::from_comps({
        let mut comps = vec![vec![0.0; lat.n3()]; lat.dim()];
        for site in 0..lat.n3() {
            let l = log_map(&u.at(site), spec);
            for (c, v) in comps.iter_mut().zip(&l.coeffs) {
                c[site] = *v;
            }
        }
        comps
    });
    let xmax = x.sup_norm(spec) / spec.metric().sqrt();
    if xmax >= CHART_LIMIT {
        return (quat, tangent);
    }
    let chart: VecField = std::array::from_fn(|axis| {
        let dx = lat.d(&x, axis);
        match spec.kind() {
            GroupKind::U1 => dx,
            GroupKind::Su2 => {
                let mut f = dx.clone();
                for site in 0..lat.n3() {
                    let v = dexp_su2(
                        [x.comps[0][site], x.comps[1][site], x.comps[2][site]],
                        [dx.comps[0][site], dx.comps[1][site], dx.comps[2][site]],
                    );
                    for a in 0..3 {
                        f.comps[a][site] = v[a];
                    }
                }
                f
            }
        }
    });
    let gap = (0..3).fold(0.0f64, |m, i| m.max(chart[i].sub(&quat[i]).max_abs()));
    (chart, tangent.max(gap))
}

/// Result of [`gauge_transform`].
#[derive(Clone, Debug, PartialEq)]
pub struct Transformed {
    pub conn: Connection,
    pub e: Option<VecField>,
    /// Largest non-tangent residual of `(∂U) U^{-1}`.
    pub mc_residual: f64,
}

/// `Ã_i = Ad_U A_i − (∂_i U) U^{-1}`, `Ẽ_i = Ad_U E_i`, `Ã_0 = Ad_U A_0` for time-independent `U`.
pub fn gauge_transform(lat: &Lattice, conn: &Connection, e: Option<&VecField>, u: &GroupField) -> Transformed {
    let (mc, mc_residual) = maurer_cartan_field(lat, u);
    if mc_residual > MAURER_CARTAN_WARN {
        warn!("gauge transform: Maurer-Cartan residual {mc_residual:.3e}");
    }
    let a = vec_sub(&adjoint_vec(lat, u, &conn.a), &mc);
    Transformed {
        conn: Connection {
            a,
            a0: conn.a0.as_ref().map(|a0| adjoint_field(lat, u, a0)),
        },
        e: e.map(|e| adjoint_vec(lat, u, e)),
        mc_residual,
    }
}

/// Gauss residual `D^ℓ E_ℓ` and its `L²` norm.
pub fn gauss_residual(lat: &Lattice, a: &VecField, e: &VecField) -> (AlgField, f64) {
    let r = cov_div(lat, a, e);
    let n = lat.l2_sq(&r).sqrt();
    (r, n)
}

/// `R(φ) = Δ_A φ − Δφ = ∂^ℓ[A_ℓ,φ] + [A^ℓ,∂_ℓφ] + [A^ℓ,[A_ℓ,φ]]`.
fn cov_lap_remainder(lat: &Lattice, ab: &VecField, phi: &AlgField) -> AlgField {
    let mut out = lat.zeros();
    if lat.spec().is_abelian() {
        return out;
    }
    let pb = lat.band(phi);
    for l in 0..3 {
        let ap = lat.bracket_band(&ab[l], &pb);
        out.axpy(1.0, &lat.d(&ap, l));
        out.axpy(1.0, &lat.bracket_band(&ab[l], &lat.d(&pb, l)));
        out.axpy(1.0, &lat.bracket_band(&ab[l], &ap));
    }
    out
}

fn remove_mean(f: &mut AlgField) -> Vec<f64> {
    let n = f.n3() as f64;
    f.comps
        .iter_mut()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n;
            c.iter_mut().for_each(|x| *x -= m);
            m
        })
        .collect()
}

fn mean(f: &AlgField) -> Vec<f64> {
    let n = f.n3() as f64;
    f.comps.iter().map(|c| c.iter().sum::<f64>() / n).collect()
}

/// Report of [`constraint_repair`].
#[derive(Clone, Debug, PartialEq)]
pub struct Repair {
    pub e: VecField,
    pub phi: AlgField,
    pub iterations: usize,
    pub residual: f64,
    /// Successive Picard update sizes of the main problem.
    pub history: Vec<f64>,
}

/// Picard solve of `Δψ = Π(src − R(ψ))` for mean-free `ψ`.
fn picard_mean_free(
    lat: &Lattice,
    ab: &VecField,
    src: &AlgField,
    tol: f64,
    max_iter: usize,
) -> Result<(AlgField, Vec<f64>)> {
    let sp = lat.sp();
    let solve = |rhs: &AlgField| {
        let h = sp.forward_field(rhs);
        let out: Vec<_> = h.iter().map(|c| sp.inv_lap_hat(c)).collect();
        sp.inverse_field(&out)
    };
    let mut psi = solve(src);
    let mut history = Vec::new();
    if lat.spec().is_abelian() {
        return Ok((psi, history));
    }
    let scale = psi.max_abs().max(src.max_abs()).max(1e-300);
    for it in 0..max_iter {
        let mut rhs = src.sub(&cov_lap_remainder(lat, ab, &psi));
        remove_mean(&mut rhs);
        let next = solve(&rhs);
        let change = next.sub(&psi).max_abs() / scale;
        history.push(change);
        psi = next;
        if change < tol {
            return Ok((psi, history));
        }
        if it >= 3 && change > history[it - 1] && change > 1.0 {
            break;
        }
    }
    Err(YmError::Convergence {
        what: "covariant Poisson solve",
        iterations: history.len(),
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Solves a small dense system by Gaussian elimination; singular directions are set to zero.
fn solve_small(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    let scale = m.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut used = vec![false; n];
    for col in 0..n {
        let piv = (0..n)
            .filter(|&r| !used[r])
            .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()));
        let Some(p) = piv else { continue };
        if m[p][col].abs() <= 1e-13 * scale.max(1e-300) {
            continue;
        }
        used[p] = true;
        pivots.push((col, p));
        for r in 0..n {
            if r != p {
                let f = m[r][col] / m[p][col];
                for c in 0..n {
                    m[r][c] -= f * m[p][c];
                }
                b[r] -= f * b[p];
            }
        }
    }
    let mut sol = vec![0.0; n];
    for (col, p) in pivots {
        sol[col] = b[p] / m[p][col];
    }
    sol
}

/// Builds `E = Ẽ + D φ` satisfying `D^ℓ E_ℓ = 0` to within `tol` in `L²`.
///
/// The non-constant modes of `φ` are found by Picard iteration on
/// `Δφ = −D^ℓẼ_ℓ − R(φ)`. On the torus the constant mode of the equation is
/// not automatically solvable, so `φ` carries a constant part `c` fixed by the
/// mean of the equation; the mean-free part is affine in `c` and is obtained
/// from `dim + 1` Picard solves.
pub fn constraint_repair(lat: &Lattice, a: &VecField, e_tilde: &VecField, tol: f64, max_iter: usize) -> Result<Repair> {
    let ab = lat.vband(a);
    let g = cov_div(lat, a, e_tilde);
    let e_scale = lat.vl2_sq(e_tilde).sqrt().max(1e-300);
    let inner_tol = (1e-3 * tol / e_scale).clamp(1e-15, 1e-10);

    let mut src0 = g.scale(-1.0);
    let neg_g_mean = remove_mean(&mut src0);
    let (psi0, history) = picard_mean_free(lat, &ab, &src0, inner_tol, max_iter)?;
    let mut phi = psi0.clone();

    if !lat.spec().is_abelian() {
        let dim = lat.dim();
        // mean of R(c + ψ) must cancel the mean of g
        let r0 = mean(&cov_lap_remainder(lat, &ab, &psi0));
        let mut cols = Vec::with_capacity(dim);
        let mut psis = Vec::with_capacity(dim);
        for a_dir in 0..dim {
            let ea = AlgField::along(dim, a_dir, vec![1.0; lat.n3()]);
            let mut src = cov_lap_remainder(lat, &ab, &ea).scale(-1.0);
            remove_mean(&mut src);
            let (psi_a, _) = picard_mean_free(lat, &ab, &src, inner_tol, max_iter)?;
            let full = ea.add(&psi_a);
            cols.push(mean(&cov_lap_remainder(lat, &ab, &full)));
            psis.push(full);
        }
        let m: Vec<Vec<f64>> = (0..dim).map(|r| (0..dim).map(|c| cols[c][r]).collect()).collect();
        // `neg_g_mean` is the mean of −g
        let rhs: Vec<f64> = (0..dim).map(|r| neg_g_mean[r] - r0[r]).collect();
        let c = solve_small(m, rhs);
        for (ca, full) in c.iter().zip(&psis) {
            phi.axpy(*ca, full);
        }
    }

    let dphi: VecField = std::array::from_fn(|i| cov_d(lat, a, &phi, i));
    let e = vec_add(e_tilde, &dphi);
    let (_, residual) = gauss_residual(lat, a, &e);
    if residual > tol {
        return Err(YmError::Convergence {
            what: "constraint repair",
            iterations: history.len(),
            residual,
            history,
        });
    }
    Ok(Repair {
        e,
        phi,
        iterations: history.len(),
        residual,
        history,
    })
}

/// Report of [`coulomb_project`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoulombProjection {
    pub a: VecField,
    pub u: GroupField,
    /// `‖div A‖_{L²}` before each step and after the last.
    pub history: Vec<f64>,
}

/// Iterates `U ← exp(Δ^{-1} div A) U`, `A ← U·A` until `‖div A‖ ≤ tol`.
pub fn coulomb_project(lat: &Lattice, a: &VecField, tol: f64, max_iter: usize) -> Result<CoulombProjection> {
    let sp = lat.sp();
    let mut a = a.clone();
    let mut u = GroupField::identity(lat.n3());
    let mut history = Vec::new();
    for _ in 0..=max_iter {
        let div = lat.div(&a);
        let nd = lat.l2_sq(&div).sqrt();
        history.push(nd);
        if nd <= tol {
            return Ok(CoulombProjection { a, u, history });
        }
        let n = history.len();
        if n >= 3 && history[n - 1] > history[n - 2] && history[n - 2] > history[n - 3] {
            break;
        }
        let h = sp.forward_field(&div);
        let v = sp.inverse_field(&h.iter().map(|c| sp.inv_lap_hat(c)).collect());
        let step = GroupField::exp(lat, &v);
        a = gauge_transform(lat, &Connection::spatial(a), None, &step).conn.a;
        u = step.mul(&u);
    }
    Err(YmError::Convergence {
        what: "Coulomb projection",
        iterations: history.len(),
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// `U = exp(X)` for a random generator `X` on modes `|m_i| ≤ max_mode` with spectral
/// amplitude `(1 + |ξ|²)^{-decay/2}`, scaled to `max |X_a| = amplitude`.
pub fn random_gauge(lat: &Lattice, seed: u64, amplitude: f64, decay: f64, max_mode: i64) -> GroupField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_smooth_field(lat.sp(), lat.dim(), &mut rng, decay, max_mode).scale(amplitude);
    GroupField::exp(lat, &x)
}
