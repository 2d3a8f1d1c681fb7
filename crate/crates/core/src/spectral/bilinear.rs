//! Null forms and the bilinear heat-Duhamel operator `W`.

use num_complex::Complex64;

use crate::algebra::StructureSpec;
use crate::error::{invalid, Result, YmError};
use crate::quadrature::composite_gauss;

use super::field::{AlgField, SpecField};
use super::transform::Spectral;

/// A pointwise bilinear product `out_c = Σ t·f_a·g_b` over `(a, b, c, t)` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Pairing {
    pub dim_f: usize,
    pub dim_g: usize,
    pub dim_out: usize,
    pub terms: Vec<(usize, usize, usize, f64)>,
}

impl Pairing {
    /// The Lie bracket of the given algebra.
    pub fn lie(spec: &StructureSpec) -> Self {
        Self {
            dim_f: spec.dim(),
            dim_g: spec.dim(),
            dim_out: spec.dim(),
            terms: spec.terms().to_vec(),
        }
    }

    /// Product of two real scalars.
    pub fn scalar() -> Self {
        Self {
            dim_f: 1,
            dim_g: 1,
            dim_out: 1,
            terms: vec![(0, 0, 0, 1.0)],
        }
    }

    /// `Im(p·conj(q))` for complex scalars stored as `(re, im)`.
    pub fn complex_im() -> Self {
        Self {
            dim_f: 2,
            dim_g: 2,
            dim_out: 1,
            terms: vec![(1, 0, 0, 1.0), (0, 1, 0, -1.0)],
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.terms.iter().all(|&(a, b, c, t)| {
            self.terms
                .iter()
                .any(|&(a2, b2, c2, t2)| a2 == b && b2 == a && c2 == c && t2 == t)
        })
    }

    fn check(&self, f: &AlgField, g: &AlgField) -> Result<()> {
        if f.dim() != self.dim_f || g.dim() != self.dim_g {
            return invalid(format!(
                "pairing expects inputs of dimension ({}, {}), got ({}, {})",
                self.dim_f,
                self.dim_g,
                f.dim(),
                g.dim()
            ));
        }
        Ok(())
    }

    /// Pointwise product without any truncation.
    pub fn apply(&self, f: &AlgField, g: &AlgField) -> AlgField {
        let n3 = f.n3();
        let mut out = AlgField::zeros(self.dim_out, n3);
        for &(a, b, c, t) in &self.terms {
            let (x, y) = (&f.comps[a], &g.comps[b]);
            for (o, (p, q)) in out.comps[c].iter_mut().zip(x.iter().zip(y)) {
                *o += t * p * q;
            }
        }
        out
    }
}

fn truncated(sp: &Spectral, f: &AlgField) -> SpecField {
    let mut fh = sp.forward_field(f);
    sp.truncate_field(&mut fh);
    fh
}

/// Alias-free product of two fields given by (already truncated) spectra.
fn product_hat(sp: &Spectral, pairing: &Pairing, fh: &SpecField, gh: &SpecField) -> SpecField {
    let mut fields = sp.inverse_fields(&[fh, gh]).into_iter();
    let (f, g) = (fields.next().unwrap(), fields.next().unwrap());
    let mut ph = sp.forward_field(&pairing.apply(&f, &g));
    sp.truncate_field(&mut ph);
    ph
}

fn deriv_field_hat(sp: &Spectral, fh: &SpecField, axis: usize) -> SpecField {
    fh.iter().map(|c| sp.deriv_hat(c, axis)).collect()
}

fn add_hat(acc: &mut SpecField, x: &SpecField, a: f64) {
    for (o, c) in acc.iter_mut().zip(x) {
        for (p, q) in o.iter_mut().zip(c) {
            *p += a * q;
        }
    }
}

/// `Q_ij(f, g) = (∂_i f, ∂_j g) − (∂_j f, ∂_i g)` with alias-free products.
pub fn null_form_q(
    sp: &Spectral,
    pairing: &Pairing,
    i: usize,
    j: usize,
    f: &AlgField,
    g: &AlgField,
) -> Result<AlgField> {
    pairing.check(f, g)?;
    if i > 2 || j > 2 {
        return invalid(format!("null form indices ({i}, {j}) out of range 0..3"));
    }
    let fh = truncated(sp, f);
    let gh = truncated(sp, g);
    Ok(sp.inverse_field(&null_form_q_hat(sp, pairing, i, j, &fh, &gh)))
}

pub(crate) fn null_form_q_hat(
    sp: &Spectral,
    pairing: &Pairing,
    i: usize,
    j: usize,
    fh: &SpecField,
    gh: &SpecField,
) -> SpecField {
    let mut out = product_hat(
        sp,
        pairing,
        &deriv_field_hat(sp, fh, i),
        &deriv_field_hat(sp, gh, j),
    );
    let second = product_hat(
        sp,
        pairing,
        &deriv_field_hat(sp, fh, j),
        &deriv_field_hat(sp, gh, i),
    );
    add_hat(&mut out, &second, -1.0);
    out
}

/// The two model null forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullFormVariant {
    /// `Δ^{-1} ∂^i Q_ij(f, g)` for a scalar-indexed `f`; one input field.
    InvLapDivQ { j: usize },
    /// `Σ_{i,j} Q_ij(Δ^{-1} ∂_i f_j, g)` for a vector `f`; three input fields.
    QInvLapDiv,
}

pub fn null_form_n(
    sp: &Spectral,
    pairing: &Pairing,
    variant: NullFormVariant,
    f: &[AlgField],
    g: &AlgField,
) -> Result<AlgField> {
    match variant {
        NullFormVariant::InvLapDivQ { j } => {
            if f.len() != 1 {
                return invalid("InvLapDivQ takes a single first input");
            }
            if j > 2 {
                return invalid(format!("index {j} out of range 0..3"));
            }
            pairing.check(&f[0], g)?;
            let fh = truncated(sp, &f[0]);
            let gh = truncated(sp, g);
            let mut acc: SpecField = vec![vec![Complex64::new(0.0, 0.0); sp.n3()]; pairing.dim_out];
            for i in 0..3 {
                if i == j {
                    continue;
                }
                let q = null_form_q_hat(sp, pairing, i, j, &fh, &gh);
                add_hat(&mut acc, &deriv_field_hat(sp, &q, i), 1.0);
            }
            let out: SpecField = acc.iter().map(|c| sp.inv_lap_hat(c)).collect();
            Ok(sp.inverse_field(&out))
        }
        NullFormVariant::QInvLapDiv => {
            if f.len() != 3 {
                return invalid("QInvLapDiv takes a three-component first input");
            }
            for fj in f {
                pairing.check(fj, g)?;
            }
            let gh = truncated(sp, g);
            let mut acc: SpecField = vec![vec![Complex64::new(0.0, 0.0); sp.n3()]; pairing.dim_out];
            for (j, fj) in f.iter().enumerate() {
                let fjh = truncated(sp, fj);
                for i in 0..3 {
                    if i == j {
                        continue;
                    }
                    let pot: SpecField = deriv_field_hat(sp, &fjh, i)
                        .iter()
                        .map(|c| sp.inv_lap_hat(c))
                        .collect();
                    add_hat(&mut acc, &null_form_q_hat(sp, pairing, i, j, &pot, &gh), 1.0);
                }
            }
            Ok(sp.inverse_field(&acc))
        }
    }
}

/// Evaluation strategy for [`bilinear_w`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WMode {
    /// Gauss-Legendre quadrature of the Duhamel integral in physical space.
    Duhamel,
    /// Direct double loop over modes with the closed-form symbol.
    Symbol,
}

const W_GL_ORDER: usize = 16;
const W_TOL: f64 = 1e-9;
const W_MAX_PANELS: usize = 256;
const W_SYMBOL_MAX_N: usize = 16;

/// `expm1(x)/x`, continuous at `x = 0`.
fn expm1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

/// Closed-form symbol `W(ξ, η, s) = ∫_0^s e^{-(s-s')|ξ+η|²} e^{-s'(|ξ|²+|η|²)} ds'`.
pub fn w_symbol(xi: [f64; 3], eta: [f64; 3], s: f64) -> f64 {
    let dot = xi[0] * eta[0] + xi[1] * eta[1] + xi[2] * eta[2];
    let sum2: f64 = (0..3).map(|a| (xi[a] + eta[a]).powi(2)).sum();
    let x = 2.0 * s * dot;
    if x > 0.0 {
        // factor the growing exponential into the decaying one
        s * (-s * sum2 + x).exp() * expm1_over_x(-x)
    } else {
        s * (-s * sum2).exp() * expm1_over_x(x)
    }
}

/// `W(f, g, s) = ∫_0^s e^{(s-s')Δ}(e^{s'Δ}f · e^{s'Δ}g) ds'` with alias-free products.
pub fn bilinear_w(
    sp: &Spectral,
    pairing: &Pairing,
    f: &AlgField,
    g: &AlgField,
    s: f64,
    mode: WMode,
) -> Result<AlgField> {
    bilinear_w_sum(sp, pairing, &[(f, g)], s, mode)
}

/// `Σ_p W(f_p, g_p, s)`, sharing the quadrature across pairs.
pub fn bilinear_w_sum(
    sp: &Spectral,
    pairing: &Pairing,
    pairs: &[(&AlgField, &AlgField)],
    s: f64,
    mode: WMode,
) -> Result<AlgField> {
    if !(s >= 0.0) || !s.is_finite() {
        return invalid(format!("W requires finite s >= 0, got {s}"));
    }
    for (f, g) in pairs {
        pairing.check(f, g)?;
    }
    let spectra: Vec<(SpecField, SpecField)> = pairs
        .iter()
        .map(|(f, g)| (truncated(sp, f), truncated(sp, g)))
        .collect();
    let out = match mode {
        WMode::Duhamel => w_duhamel(sp, pairing, &spectra, s)?,
        WMode::Symbol => w_symbol_loop(sp, pairing, &spectra, s)?,
    };
    Ok(sp.inverse_field(&out))
}

fn w_duhamel_panels(
    sp: &Spectral,
    pairing: &Pairing,
    spectra: &[(SpecField, SpecField)],
    s: f64,
    panels: usize,
) -> SpecField {
    let mut acc: SpecField = vec![vec![Complex64::new(0.0, 0.0); sp.n3()]; pairing.dim_out];
    for (sn, wn) in composite_gauss(0.0, s, W_GL_ORDER, panels) {
        for (fh, gh) in spectra {
            let fs: SpecField = fh.iter().map(|c| sp.heat_hat(c, sn)).collect();
            let gs: SpecField = gh.iter().map(|c| sp.heat_hat(c, sn)).collect();
            let p = product_hat(sp, pairing, &fs, &gs);
            for (o, c) in acc.iter_mut().zip(&p) {
                for (q, v) in o.iter_mut().zip(sp.heat_hat(c, s - sn)) {
                    *q += wn * v;
                }
            }
        }
    }
    acc
}

fn spec_norm(x: &SpecField) -> f64 {
    x.iter()
        .flat_map(|c| c.iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn w_duhamel(
    sp: &Spectral,
    pairing: &Pairing,
    spectra: &[(SpecField, SpecField)],
    s: f64,
) -> Result<SpecField> {
    if s == 0.0 {
        return Ok(vec![vec![Complex64::new(0.0, 0.0); sp.n3()]; pairing.dim_out]);
    }
    let mut panels = 1;
    let mut prev = w_duhamel_panels(sp, pairing, spectra, s, panels);
    let mut history = Vec::new();
    while panels < W_MAX_PANELS {
        panels *= 2;
        let next = w_duhamel_panels(sp, pairing, spectra, s, panels);
        let diff: SpecField = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let scale = spec_norm(&next);
        let rel = if scale == 0.0 { 0.0 } else { spec_norm(&diff) / scale };
        history.push(rel);
        if rel < W_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(YmError::Convergence {
        what: "W quadrature",
        iterations: history.len(),
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

fn w_symbol_loop(
    sp: &Spectral,
    pairing: &Pairing,
    spectra: &[(SpecField, SpecField)],
    s: f64,
) -> Result<SpecField> {
    let grid = *sp.grid();
    if grid.n() > W_SYMBOL_MAX_N {
        return invalid(format!(
            "symbol-mode W is limited to n <= {W_SYMBOL_MAX_N}, got {}",
            grid.n()
        ));
    }
    let n3 = sp.n3();
    let kept: Vec<usize> = (0..n3).filter(|&i| sp.is_kept(i)).collect();
    let norm = 1.0 / n3 as f64;
    let mut out: SpecField = vec![vec![Complex64::new(0.0, 0.0); n3]; pairing.dim_out];
    for (fh, gh) in spectra {
        for &p in &kept {
            let (px, py, pz) = grid.coords(p);
            let xi = sp.k(p);
            for &q in &kept {
                let (qx, qy, qz) = grid.coords(q);
                let m = [
                    grid.mode(px) + grid.mode(qx),
                    grid.mode(py) + grid.mode(qy),
                    grid.mode(pz) + grid.mode(qz),
                ];
                let c = grid.dealias_cutoff();
                if m.iter().any(|v| v.abs() > c) {
                    continue;
                }
                let r = grid.site(
                    grid.index_of_mode(m[0]),
                    grid.index_of_mode(m[1]),
                    grid.index_of_mode(m[2]),
                );
                let w = w_symbol(xi, sp.k(q), s) * norm;
                for &(a, b, cc, t) in &pairing.terms {
                    out[cc][r] += fh[a][p] * gh[b][q] * (t * w);
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of the frequency-localization sweep for `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct WLocalization {
    /// Largest normalized ratio found; the bound claims it is at most a fixed constant.
    pub max_ratio: f64,
    /// `(k, k1, k2, s)` at which the maximum occurs.
    pub argmax: (i32, i32, i32, f64),
    pub samples: usize,
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Single-mode sweep of `|W(ξ,η,s)| ⟨s2^{2k}⟩^{10} ⟨s^{-1}2^{-2k_max}⟩ 2^{2k_max}`
/// with `|ξ| = 2^{k1}`, `|η| = 2^{k2}`, `|ξ+η| = 2^k`.
pub fn w_localization_sweep(ks: &[i32], ss: &[f64]) -> WLocalization {
    let mut best = WLocalization {
        max_ratio: 0.0,
        argmax: (0, 0, 0, 0.0),
        samples: 0,
    };
    for &k in ks {
        for &k1 in ks {
            for &k2 in ks {
                let (r, r1, r2) = (2f64.powi(k), 2f64.powi(k1), 2f64.powi(k2));
                if r < (r1 - r2).abs() || r > r1 + r2 {
                    continue;
                }
                // place η so that |ξ + η| = r
                let dot = 0.5 * (r * r - r1 * r1 - r2 * r2);
                let c = (dot / (r1 * r2)).clamp(-1.0, 1.0);
                let xi = [r1, 0.0, 0.0];
                let eta = [r2 * c, r2 * (1.0 - c * c).max(0.0).sqrt(), 0.0];
                let kmax = k.max(k1).max(k2);
                let big = 2f64.powi(2 * kmax);
                for &s in ss {
                    let w = w_symbol(xi, eta, s).abs();
                    let weight = japanese(s * 2f64.powi(2 * k)).powi(10) * japanese(1.0 / (s * big)) * big;
                    let ratio = w * weight;
                    best.samples += 1;
                    if ratio > best.max_ratio {
                        best.max_ratio = ratio;
                        best.argmax = (k, k1, k2, s);
                    }
                }
            }
        }
    }
    best
}
