//! Finite-dimensional Lie algebra and Lie group arithmetic.
//!
//! Algebra elements are stored as coefficients in a basis that is orthonormal
//! for the bi-invariant inner product. For su(2) the basis is `e_a = i_a / 2`
//! in terms of the unit imaginary quaternions, which gives `[e_a, e_b] = ε_abc e_c`
//! and makes the quaternion conjugation `q X q*` the adjoint action.
//!
//! The abelian u(1) mode has a one-dimensional algebra. Its group elements are
//! stored as unit quaternions on the circle generated by `i_1`, so the same
//! [`GroupElem`] type serves both groups.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Su2,
    U1,
}

impl GroupKind {
    pub fn name(self) -> &'static str {
        match self {
            GroupKind::Su2 => "su2",
            GroupKind::U1 => "u1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "su2" | "su(2)" => Some(GroupKind::Su2),
            "u1" | "u(1)" => Some(GroupKind::U1),
            _ => None,
        }
    }
}

/// Structure constants and metric of the gauge algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureSpec {
    kind: GroupKind,
    dim: usize,
    constants: Vec<f64>,
    metric: f64,
    terms: Vec<(usize, usize, usize, f64)>,
}

impl StructureSpec {
    pub fn su2() -> Self {
        let dim = 3;
        let mut constants = vec![0.0; dim * dim * dim];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    constants[(a * dim + b) * dim + c] = levi_civita(a, b, c);
                }
            }
        }
        Self::from_parts(GroupKind::Su2, dim, constants, 1.0)
    }

    pub fn u1() -> Self {
        Self::from_parts(GroupKind::U1, 1, vec![0.0], 1.0)
    }

    pub fn for_kind(kind: GroupKind) -> Self {
        match kind {
            GroupKind::Su2 => Self::su2(),
            GroupKind::U1 => Self::u1(),
        }
    }

    /// Rescales the inner product, `(X, Y) = metric · Σ X_a Y_a`.
    pub fn with_metric(mut self, metric: f64) -> Result<Self> {
        if !(metric > 0.0 && metric.is_finite()) {
            return invalid(format!("metric normalization must be positive, got {metric}"));
        }
        self.metric = metric;
        Ok(self)
    }

    fn from_parts(kind: GroupKind, dim: usize, constants: Vec<f64>, metric: f64) -> Self {
        let mut terms = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let v = constants[(a * dim + b) * dim + c];
                    if v != 0.0 {
                        terms.push((a, b, c, v));
                    }
                }
            }
        }
        Self {
            kind,
            dim,
            constants,
            metric,
            terms,
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> f64 {
        self.metric
    }

    pub fn is_abelian(&self) -> bool {
        self.terms.is_empty()
    }

    /// `f[a][b][c]` with `[e_a, e_b] = Σ_c f[a][b][c] e_c`.
    pub fn constant(&self, a: usize, b: usize, c: usize) -> f64 {
        self.constants[(a * self.dim + b) * self.dim + c]
    }

    /// Nonzero structure constants as `(a, b, c, f_abc)`.
    pub fn terms(&self) -> &[(usize, usize, usize, f64)] {
        &self.terms
    }
}

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// A Lie-algebra value in the orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgElem {
    pub coeffs: Vec<f64>,
}

impl AlgElem {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: vec![0.0; dim],
        }
    }

    pub fn basis(dim: usize, a: usize) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[a] = 1.0;
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &AlgElem) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &AlgElem) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }
}

fn check_dim(x: &AlgElem, spec: &StructureSpec) -> Result<()> {
    if x.dim() != spec.dim() {
        return invalid(format!(
            "algebra element has dimension {}, expected {}",
            x.dim(),
            spec.dim()
        ));
    }
    Ok(())
}

pub fn bracket(x: &AlgElem, y: &AlgElem, spec: &StructureSpec) -> Result<AlgElem> {
    check_dim(x, spec)?;
    check_dim(y, spec)?;
    let mut out = AlgElem::zero(spec.dim());
    for &(a, b, c, f) in spec.terms() {
        out.coeffs[c] += f * x.coeffs[a] * y.coeffs[b];
    }
    Ok(out)
}

pub fn inner(x: &AlgElem, y: &AlgElem, spec: &StructureSpec) -> Result<f64> {
    check_dim(x, spec)?;
    check_dim(y, spec)?;
    let s: f64 = x.coeffs.iter().zip(&y.coeffs).map(|(a, b)| a * b).sum();
    Ok(spec.metric() * s)
}

pub fn norm(x: &AlgElem, spec: &StructureSpec) -> Result<f64> {
    Ok(inner(x, x, spec)?.sqrt())
}

/// A structure-group element, stored as a unit quaternion `(q0, q1, q2, q3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElem {
    pub q: [f64; 4],
}

impl Default for GroupElem {
    fn default() -> Self {
        Self::identity()
    }
}

impl GroupElem {
    pub const fn identity() -> Self {
        Self {
            q: [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Builds a normalized element from raw quaternion components.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        Self { q }.normalized()
    }

    /// U(1) element `e^{iθ}`.
    pub fn from_phase(theta: f64) -> Self {
        let h = 0.5 * theta;
        Self {
            q: [h.cos(), h.sin(), 0.0, 0.0],
        }
    }

    /// Phase angle of a U(1) element, in `(-2π, 2π]`.
    pub fn phase(&self) -> f64 {
        2.0 * self.q[1].atan2(self.q[0])
    }

    pub fn norm(&self) -> f64 {
        self.q.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n < 1e-300 {
            return Self::identity();
        }
        Self {
            q: [self.q[0] / n, self.q[1] / n, self.q[2] / n, self.q[3] / n],
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            q: [self.q[0], -self.q[1], -self.q[2], -self.q[3]],
        }
    }

    /// Group product, renormalized onto the unit sphere.
    pub fn mul(&self, other: &GroupElem) -> GroupElem {
        GroupElem {
            q: quat_mul(self.q, other.q),
        }
        .normalized()
    }

    /// Distance to the identity in quaternion components, insensitive to `q ↦ -q`.
    pub fn distance_to_identity(&self) -> f64 {
        let a = ((self.q[0] - 1.0).powi(2)
            + self.q[1].powi(2)
            + self.q[2].powi(2)
            + self.q[3].powi(2))
        .sqrt();
        let b = ((self.q[0] + 1.0).powi(2)
            + self.q[1].powi(2)
            + self.q[2].powi(2)
            + self.q[3].powi(2))
        .sqrt();
        a.min(b)
    }
}

/// Hamilton product of two quaternions.
#[inline]
pub fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

#[inline]
pub(crate) fn quat_conj(a: [f64; 4]) -> [f64; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

/// Closed-form exponential (half-angle formula).
pub fn exp_map(x: &AlgElem, spec: &StructureSpec) -> Result<GroupElem> {
    check_dim(x, spec)?;
    if !x.is_finite() {
        return invalid("exp_map of a non-finite algebra element");
    }
    Ok(match spec.kind() {
        GroupKind::Su2 => exp_su2([x.coeffs[0], x.coeffs[1], x.coeffs[2]]),
        GroupKind::U1 => GroupElem::from_phase(x.coeffs[0]),
    })
}

#[inline]
pub(crate) fn exp_su2(v: [f64; 3]) -> GroupElem {
    let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let h = 0.5 * theta;
    // sin(h)/theta = sinc(h)/2
    let s = if h < 1e-4 {
        0.5 * (1.0 - h * h / 6.0 + h.powi(4) / 120.0)
    } else {
        h.sin() / theta
    };
    GroupElem {
        q: [h.cos(), s * v[0], s * v[1], s * v[2]],
    }
}

/// Inverse of [`exp_map`] on the principal branch (rotation angle below 2π).
pub fn log_map(u: &GroupElem, spec: &StructureSpec) -> AlgElem {
    match spec.kind() {
        GroupKind::Su2 => {
            let v = [u.q[1], u.q[2], u.q[3]];
            let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let h = s.atan2(u.q[0]);
            let scale = if s < 1e-12 { 2.0 / u.q[0] } else { 2.0 * h / s };
            AlgElem::new(v.iter().map(|c| c * scale).collect())
        }
        GroupKind::U1 => AlgElem::new(vec![u.phase()]),
    }
}

/// `U X U^{-1}`.
pub fn adjoint(u: &GroupElem, x: &AlgElem, spec: &StructureSpec) -> Result<AlgElem> {
    check_dim(x, spec)?;
    Ok(match spec.kind() {
        GroupKind::Su2 => {
            let r = rotate(u.q, [x.coeffs[0], x.coeffs[1], x.coeffs[2]]);
            AlgElem::new(r.to_vec())
        }
        GroupKind::U1 => x.clone(),
    })
}

/// Rotation of a 3-vector by a unit quaternion, `q v q*`.
#[inline]
pub(crate) fn rotate(q: [f64; 4], v: [f64; 3]) -> [f64; 3] {
    let (w, ux, uy, uz) = (q[0], q[1], q[2], q[3]);
    // t = 2 u × v
    let tx = 2.0 * (uy * v[2] - uz * v[1]);
    let ty = 2.0 * (uz * v[0] - ux * v[2]);
    let tz = 2.0 * (ux * v[1] - uy * v[0]);
    [
        v[0] + w * tx + (uy * tz - uz * ty),
        v[1] + w * ty + (uz * tx - ux * tz),
        v[2] + w * tz + (ux * ty - uy * tx),
    ]
}

/// Result of extracting `dU · U^{-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaurerCartan {
    pub value: AlgElem,
    /// Size of the component of `dU U^{-1}` outside the algebra.
    pub residual: f64,
}

/// Projects `dU · U^{-1}` onto the algebra basis. `du` is the quaternion
/// increment of `U` along some direction at the same site.
pub fn maurer_cartan_coeff(u: &GroupElem, du: [f64; 4], spec: &StructureSpec) -> MaurerCartan {
    let p = quat_mul(du, quat_conj(u.q));
    match spec.kind() {
        GroupKind::Su2 => MaurerCartan {
            value: AlgElem::new(vec![2.0 * p[1], 2.0 * p[2], 2.0 * p[3]]),
            residual: p[0].abs(),
        },
        GroupKind::U1 => MaurerCartan {
            value: AlgElem::new(vec![2.0 * p[1]]),
            residual: (p[0] * p[0] + p[2] * p[2] + p[3] * p[3]).sqrt(),
        },
    }
}

/// Largest residuals of the algebra identities over random samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureAudit {
    pub samples: usize,
    /// `|[x,[y,z]] + [y,[z,x]] + [z,[x,y]]|`.
    pub jacobi: f64,
    /// `|([x,y], z) + (y, [x,z])|`.
    pub ad_invariance: f64,
    /// `| |Ad_U x| − |x| |`.
    pub adjoint_isometry: f64,
}

impl StructureAudit {
    pub fn max(&self) -> f64 {
        self.jacobi.max(self.ad_invariance).max(self.adjoint_isometry)
    }
}

/// Checks the algebra identities on `samples` seeded draws with entries in `[-1, 1]`
/// and group elements `exp(X)` with `|X_a| ≤ π`.
pub fn structure_audit(spec: &StructureSpec, samples: usize, seed: u64) -> Result<StructureAudit> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.dim();
    let mut draw = |scale: f64| AlgElem::new((0..dim).map(|_| rng.gen_range(-scale..=scale)).collect());
    let mut out = StructureAudit {
        samples,
        jacobi: 0.0,
        ad_invariance: 0.0,
        adjoint_isometry: 0.0,
    };
    for _ in 0..samples {
        let (x, y, z) = (draw(1.0), draw(1.0), draw(1.0));
        let u = exp_map(&draw(std::f64::consts::PI), spec)?;
        let b = |p: &AlgElem, q: &AlgElem| bracket(p, q, spec);
        let jac = b(&x, &b(&y, &z)?)?.add(&b(&y, &b(&z, &x)?)?).add(&b(&z, &b(&x, &y)?)?);
        let inv = inner(&b(&x, &y)?, &z, spec)? + inner(&y, &b(&x, &z)?, spec)?;
        let iso = norm(&adjoint(&u, &x, spec)?, spec)? - norm(&x, spec)?;
        out.jacobi = out.jacobi.max(jac.max_abs());
        out.ad_invariance = out.ad_invariance.max(inv.abs());
        out.adjoint_isometry = out.adjoint_isometry.max(iso.abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_elem(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> AlgElem {
        AlgElem::new((0..dim).map(|_| rng.gen_range(-scale..scale)).collect())
    }

    #[test]
    fn su2_basis_brackets() {
        let spec = StructureSpec::su2();
        let e = |a| AlgElem::basis(3, a);
        assert_eq!(bracket(&e(0), &e(1), &spec).unwrap(), e(2));
        assert_eq!(bracket(&e(1), &e(2), &spec).unwrap(), e(0));
        assert_eq!(bracket(&e(2), &e(0), &spec).unwrap(), e(1));
    }

    #[test]
    fn self_bracket_vanishes() {
        let spec = StructureSpec::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = rand_elem(&mut rng, 3, 2.0);
            assert_eq!(bracket(&x, &x, &spec).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn invariance_on_all_basis_triples() {
        let spec = StructureSpec::su2();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let (ea, eb, ec) = (
                        AlgElem::basis(3, a),
                        AlgElem::basis(3, b),
                        AlgElem::basis(3, c),
                    );
                    let lhs = inner(&bracket(&ea, &eb, &spec).unwrap(), &ec, &spec).unwrap();
                    let rhs = inner(&ea, &bracket(&eb, &ec, &spec).unwrap(), &spec).unwrap();
                    assert!((lhs - rhs).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn structure_constants_antisymmetric() {
        let spec = StructureSpec::su2();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert_eq!(spec.constant(a, b, c), -spec.constant(b, a, c));
                    assert_eq!(spec.constant(a, b, c), spec.constant(b, c, a));
                }
            }
        }
        assert!(StructureSpec::u1().is_abelian());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = StructureSpec::su2();
        let x = AlgElem::zero(1);
        assert!(bracket(&x, &AlgElem::zero(3), &spec).is_err());
        assert!(inner(&x, &x, &spec).is_err());
        assert!(exp_map(&x, &spec).is_err());
    }

    #[test]
    fn inner_product_normalization() {
        let spec = StructureSpec::su2().with_metric(2.5).unwrap();
        let e0 = AlgElem::basis(3, 0);
        let e1 = AlgElem::basis(3, 1);
        assert_eq!(inner(&e0, &e0, &spec).unwrap(), 2.5);
        assert_eq!(inner(&e0, &e1, &spec).unwrap(), 0.0);
        assert!(StructureSpec::su2().with_metric(0.0).is_err());
    }

    #[test]
    fn exp_of_zero_and_inverse_pair() {
        let spec = StructureSpec::su2();
        assert_eq!(exp_map(&AlgElem::zero(3), &spec).unwrap(), GroupElem::identity());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = rand_elem(&mut rng, 3, 3.0);
            let u = exp_map(&x, &spec).unwrap();
            let v = exp_map(&x.scale(-1.0), &spec).unwrap();
            assert!(u.mul(&v).distance_to_identity() < 1e-13);
        }
    }

    #[test]
    fn log_inverts_exp() {
        let spec = StructureSpec::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x = rand_elem(&mut rng, 3, 1.5);
            let y = log_map(&exp_map(&x, &spec).unwrap(), &spec);
            assert!(x.sub(&y).max_abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_and_isometry() {
        let spec = StructureSpec::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = rand_elem(&mut rng, 3, 1.0);
            assert_eq!(adjoint(&GroupElem::identity(), &x, &spec).unwrap(), x);
            let u = exp_map(&rand_elem(&mut rng, 3, 4.0), &spec).unwrap();
            let ax = adjoint(&u, &x, &spec).unwrap();
            let (n0, n1) = (norm(&x, &spec).unwrap(), norm(&ax, &spec).unwrap());
            assert!((n0 - n1).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_is_a_homomorphism() {
        let spec = StructureSpec::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = rand_elem(&mut rng, 3, 1.0);
            let y = rand_elem(&mut rng, 3, 1.0);
            let u = exp_map(&rand_elem(&mut rng, 3, 4.0), &spec).unwrap();
            let lhs = adjoint(&u, &bracket(&x, &y, &spec).unwrap(), &spec).unwrap();
            let rhs = bracket(
                &adjoint(&u, &x, &spec).unwrap(),
                &adjoint(&u, &y, &spec).unwrap(),
                &spec,
            )
            .unwrap();
            assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_matches_exp_conjugation() {
        // Ad_{exp(X)} Y = exp(X) exp(Y) exp(-X) read through the logarithm
        let spec = StructureSpec::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = rand_elem(&mut rng, 3, 1.0);
            let y = rand_elem(&mut rng, 3, 0.5);
            let u = exp_map(&x, &spec).unwrap();
            let conj = u
                .mul(&exp_map(&y, &spec).unwrap())
                .mul(&u.inverse());
            let lhs = log_map(&conj, &spec);
            let rhs = adjoint(&u, &y, &spec).unwrap();
            assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        }
    }

    #[test]
    fn u1_mode_is_abelian() {
        let spec = StructureSpec::u1();
        let x = AlgElem::new(vec![0.7]);
        let y = AlgElem::new(vec![-1.3]);
        assert_eq!(bracket(&x, &y, &spec).unwrap().coeffs, vec![0.0]);
        let u = exp_map(&x, &spec).unwrap();
        assert!((u.phase() - 0.7).abs() < 1e-15);
        assert_eq!(adjoint(&u, &y, &spec).unwrap(), y);
    }

    #[test]
    fn maurer_cartan_basics() {
        let spec = StructureSpec::su2();
        let x = AlgElem::new(vec![0.3, -0.2, 0.9]);
        // U = identity, dU = X as a pure quaternion (0, X/2)
        let du = [0.0, 0.15, -0.1, 0.45];
        let mc = maurer_cartan_coeff(&GroupElem::identity(), du, &spec);
        assert!(mc.value.sub(&x).max_abs() < 1e-15);
        assert!(mc.residual < 1e-15);
        let zero = maurer_cartan_coeff(&exp_map(&x, &spec).unwrap(), [0.0; 4], &spec);
        assert_eq!(zero.value.max_abs(), 0.0);
    }

    #[test]
    fn maurer_cartan_along_exponential_path() {
        // d/dt exp(tX) · exp(tX)^{-1} = X, derivative by central differences
        let spec = StructureSpec::su2();
        let x = AlgElem::new(vec![0.4, 1.1, -0.6]);
        let t = 0.8;
        let h = 1e-4;
        let up = exp_map(&x.scale(t + h), &spec).unwrap();
        let um = exp_map(&x.scale(t - h), &spec).unwrap();
        let up2 = exp_map(&x.scale(t + 2.0 * h), &spec).unwrap();
        let um2 = exp_map(&x.scale(t - 2.0 * h), &spec).unwrap();
        let mut du = [0.0; 4];
        for k in 0..4 {
            du[k] = (8.0 * (up.q[k] - um.q[k]) - (up2.q[k] - um2.q[k])) / (12.0 * h);
        }
        let u = exp_map(&x.scale(t), &spec).unwrap();
        let mc = maurer_cartan_coeff(&u, du, &spec);
        assert!(mc.value.sub(&x).max_abs() < 1e-10);
        assert!(mc.residual < 1e-10);
    }
}
