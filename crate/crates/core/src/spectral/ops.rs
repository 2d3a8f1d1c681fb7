//! Fourier multipliers on lattice fields.
//!
//! Every operator here is diagonal in Fourier space. Derivatives and the
//! Laplacian use the derivative wavenumber (Nyquist zeroed); the I-multiplier,
//! Littlewood-Paley bumps and Sobolev weights use the true frequency `|ξ|`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::algebra::StructureSpec;
use crate::error::{invalid, Result};

use super::field::{AlgField, SpecField, VecField};
use super::transform::Spectral;

/// Half-width, in units of `log2 |ξ|`, of the cosine taper between neighbouring shells.
pub const LP_TAPER: f64 = 0.03;

fn map_spec(fh: &SpecField, f: impl Fn(&[Complex64]) -> Vec<Complex64>) -> SpecField {
    fh.iter().map(|c| f(c)).collect()
}

fn check_grid(sp: &Spectral, f: &AlgField) -> Result<()> {
    if f.comps.iter().any(|c| c.len() != sp.n3()) {
        return invalid(format!(
            "field has {} sites, grid has {}",
            f.n3(),
            sp.n3()
        ));
    }
    Ok(())
}

pub fn transform(sp: &Spectral, f: &AlgField) -> Result<SpecField> {
    check_grid(sp, f)?;
    Ok(sp.forward_field(f))
}

pub fn inverse_transform(sp: &Spectral, fh: &SpecField) -> Result<AlgField> {
    if fh.iter().any(|c| c.len() != sp.n3()) {
        return invalid("spectral field size does not match grid");
    }
    Ok(sp.inverse_field(fh))
}

/// Applies a real per-mode symbol.
pub fn multiplier(sp: &Spectral, f: &AlgField, symbol: impl Fn(usize) -> f64) -> AlgField {
    let fh = sp.forward_field(f);
    let out = map_spec(&fh, |c| sp.apply_real_symbol(c, &symbol));
    sp.inverse_field(&out)
}

/// `∂_axis f`, axis in `0..3`.
pub fn derivative(sp: &Spectral, axis: usize, f: &AlgField) -> Result<AlgField> {
    if axis > 2 {
        return invalid(format!("axis {axis} out of range 0..3"));
    }
    check_grid(sp, f)?;
    let fh = sp.forward_field(f);
    Ok(sp.inverse_field(&map_spec(&fh, |c| sp.deriv_hat(c, axis))))
}

pub fn gradient(sp: &Spectral, f: &AlgField) -> VecField {
    let fh = sp.forward_field(f);
    let parts: Vec<SpecField> = (0..3)
        .map(|a| map_spec(&fh, |c| sp.deriv_hat(c, a)))
        .collect();
    let mut out = sp.inverse_fields(&parts.iter().collect::<Vec<_>>()).into_iter();
    [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()]
}

pub fn divergence(sp: &Spectral, v: &VecField) -> AlgField {
    let vh = sp.forward_vec(v);
    sp.inverse_field(&divergence_hat(sp, &vh))
}

pub fn divergence_hat(sp: &Spectral, vh: &[SpecField; 3]) -> SpecField {
    let dim = vh[0].len();
    (0..dim)
        .map(|a| {
            let mut acc = sp.deriv_hat(&vh[0][a], 0);
            for (axis, comp) in vh.iter().enumerate().skip(1) {
                for (o, d) in acc.iter_mut().zip(sp.deriv_hat(&comp[a], axis)) {
                    *o += d;
                }
            }
            acc
        })
        .collect()
}

pub fn curl(sp: &Spectral, v: &VecField) -> VecField {
    let vh = sp.forward_vec(v);
    // (curl v)_i = ∂_j v_k − ∂_k v_j for cyclic (i, j, k)
    let comp = |j: usize, k: usize| -> SpecField {
        vh[k]
            .iter()
            .zip(&vh[j])
            .map(|(vk, vj)| {
                sp.deriv_hat(vk, j)
                    .into_iter()
                    .zip(sp.deriv_hat(vj, k))
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect()
    };
    sp.inverse_vec(&[comp(1, 2), comp(2, 0), comp(0, 1)])
}

pub fn laplacian(sp: &Spectral, f: &AlgField) -> AlgField {
    let fh = sp.forward_field(f);
    sp.inverse_field(&map_spec(&fh, |c| sp.lap_hat(c)))
}

/// `Δ^{-1}` with the zero mode mapped to zero.
pub fn inverse_laplacian(sp: &Spectral, f: &AlgField) -> AlgField {
    let fh = sp.forward_field(f);
    sp.inverse_field(&map_spec(&fh, |c| sp.inv_lap_hat(c)))
}

/// `e^{sΔ} f`.
pub fn heat_propagate(sp: &Spectral, f: &AlgField, s: f64) -> Result<AlgField> {
    if !(s >= 0.0) || !s.is_finite() {
        return invalid(format!("heat time must be finite and non-negative, got {s}"));
    }
    let fh = sp.forward_field(f);
    Ok(sp.inverse_field(&map_spec(&fh, |c| sp.heat_hat(c, s))))
}

pub fn heat_propagate_vec(sp: &Spectral, v: &VecField, s: f64) -> Result<VecField> {
    Ok([
        heat_propagate(sp, &v[0], s)?,
        heat_propagate(sp, &v[1], s)?,
        heat_propagate(sp, &v[2], s)?,
    ])
}

fn check_i_params(n_freq: f64, sigma: f64) -> Result<()> {
    if !(n_freq > 0.0 && n_freq.is_finite()) {
        return invalid(format!("frequency threshold must be positive, got {n_freq}"));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return invalid(format!("sigma must lie in (0, 1), got {sigma}"));
    }
    Ok(())
}

/// Symbol of the I-operator: 1 below `N`, `(N/|ξ|)^{1−σ}` above.
pub fn i_symbol(xi: f64, n_freq: f64, sigma: f64) -> f64 {
    if xi <= n_freq {
        1.0
    } else {
        (n_freq / xi).powf(1.0 - sigma)
    }
}

pub fn i_multiplier(sp: &Spectral, f: &AlgField, n_freq: f64, sigma: f64) -> Result<AlgField> {
    check_i_params(n_freq, sigma)?;
    check_grid(sp, f)?;
    Ok(multiplier(sp, f, |i| i_symbol(sp.kabs(i), n_freq, sigma)))
}

/// Weight of the dyadic shell `k` at frequency `ξ`.
pub fn lp_weight(xi: f64, k: i32) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    let a = (xi.log2() - k as f64).abs();
    let lo = 0.5 - LP_TAPER;
    if a <= lo {
        1.0
    } else if a >= 0.5 + LP_TAPER {
        0.0
    } else {
        let c = (FRAC_PI_2 * (a - lo) / (2.0 * LP_TAPER)).cos();
        c * c
    }
}

/// Weight of the low block, `1 − Σ_{k≥0} φ_k(ξ)`.
pub fn lp_low_weight(xi: f64) -> f64 {
    if xi <= 0.0 {
        return 1.0;
    }
    let t = xi.log2();
    if t <= -0.5 - LP_TAPER {
        1.0
    } else if t >= -0.5 + LP_TAPER {
        0.0
    } else {
        1.0 - lp_weight(xi, 0)
    }
}

/// Largest shell index with nonzero weight on this grid.
pub fn lp_max_index(sp: &Spectral) -> i32 {
    let kmax = (0..sp.n3()).fold(0.0f64, |m, i| m.max(sp.kabs(i)));
    if kmax <= 0.0 {
        return 0;
    }
    (kmax.log2() + 0.5 + LP_TAPER).ceil().max(0.0) as i32
}

/// `P_k f`, the smooth shell at `|ξ| ≈ 2^k`.
pub fn lp_project(sp: &Spectral, f: &AlgField, k: i32) -> AlgField {
    multiplier(sp, f, |i| lp_weight(sp.kabs(i), k))
}

/// The low block `|ξ| ≲ 1/√2`, complementing the shells `k ≥ 0`.
pub fn lp_low_block(sp: &Spectral, f: &AlgField) -> AlgField {
    multiplier(sp, f, |i| lp_low_weight(sp.kabs(i)))
}

/// `P_{<k} f`: the low block plus every shell below `k`.
pub fn lp_lowpass(sp: &Spectral, f: &AlgField, k: i32) -> AlgField {
    multiplier(sp, f, |i| {
        let xi = sp.kabs(i);
        lp_low_weight(xi) + (0..k).map(|j| lp_weight(xi, j)).sum::<f64>()
    })
}

fn leray_hat(sp: &Spectral, vh: &[SpecField; 3], df: bool) -> [SpecField; 3] {
    let dim = vh[0].len();
    let n3 = sp.n3();
    let mut out: [SpecField; 3] = std::array::from_fn(|_| vec![vec![Complex64::new(0.0, 0.0); n3]; dim]);
    for a in 0..dim {
        for idx in 0..n3 {
            let k = sp.k(idx);
            let k2 = sp.k2(idx);
            let v = [vh[0][a][idx], vh[1][a][idx], vh[2][a][idx]];
            let proj = if k2 > 0.0 {
                let kv = (v[0] * k[0] + v[1] * k[1] + v[2] * k[2]) / k2;
                [kv * k[0], kv * k[1], kv * k[2]]
            } else {
                // P annihilates the modes with no derivative, P^⊥ keeps them
                v
            };
            for i in 0..3 {
                out[i][a][idx] = if df { v[i] - proj[i] } else { proj[i] };
            }
        }
    }
    out
}

/// Projection onto divergence-free fields.
pub fn leray_df_hat(sp: &Spectral, vh: &[SpecField; 3]) -> [SpecField; 3] {
    leray_hat(sp, vh, true)
}

/// Projection onto curl-free fields (complement of [`leray_df_hat`]).
pub fn leray_cf_hat(sp: &Spectral, vh: &[SpecField; 3]) -> [SpecField; 3] {
    leray_hat(sp, vh, false)
}

pub fn leray_df(sp: &Spectral, v: &VecField) -> VecField {
    sp.inverse_vec(&leray_df_hat(sp, &sp.forward_vec(v)))
}

pub fn leray_cf(sp: &Spectral, v: &VecField) -> VecField {
    sp.inverse_vec(&leray_cf_hat(sp, &sp.forward_vec(v)))
}

/// Weighted spectral sum `Σ w(ξ)² |f̂|²` scaled to an `L²` norm squared.
fn weighted_norm_sq(sp: &Spectral, spec: &StructureSpec, fh: &SpecField, w: impl Fn(usize) -> f64) -> f64 {
    let n3 = sp.n3() as f64;
    let scale = sp.grid().volume() / (n3 * n3) * spec.metric();
    let mut s = 0.0;
    for c in fh {
        for (i, z) in c.iter().enumerate() {
            let wi = w(i);
            s += wi * wi * z.norm_sqr();
        }
    }
    s * scale
}

/// `‖⟨ξ⟩^s f̂‖`, or `‖|ξ|^s f̂‖` without the zero mode when `homogeneous`.
pub fn sobolev_norm(sp: &Spectral, spec: &StructureSpec, f: &AlgField, s: f64, homogeneous: bool) -> f64 {
    sobolev_norm_sq_hat(sp, spec, &sp.forward_field(f), s, homogeneous).sqrt()
}

pub fn sobolev_norm_sq_hat(
    sp: &Spectral,
    spec: &StructureSpec,
    fh: &SpecField,
    s: f64,
    homogeneous: bool,
) -> f64 {
    weighted_norm_sq(sp, spec, fh, |i| {
        let xi = sp.kabs(i);
        if homogeneous {
            if xi == 0.0 {
                0.0
            } else {
                xi.powf(s)
            }
        } else {
            (1.0 + xi * xi).powf(0.5 * s)
        }
    })
}

pub fn vec_sobolev_norm(sp: &Spectral, spec: &StructureSpec, v: &VecField, s: f64, homogeneous: bool) -> f64 {
    v.iter()
        .map(|f| sobolev_norm_sq_hat(sp, spec, &sp.forward_field(f), s, homogeneous))
        .sum::<f64>()
        .sqrt()
}

/// Zeroes every mode with some `|m_i| > n/3`.
pub fn dealias(sp: &Spectral, f: &AlgField) -> AlgField {
    let mut fh = sp.forward_field(f);
    sp.truncate_field(&mut fh);
    sp.inverse_field(&fh)
}

pub fn dealias_vec(sp: &Spectral, v: &VecField) -> VecField {
    [dealias(sp, &v[0]), dealias(sp, &v[1]), dealias(sp, &v[2])]
}

/// Alias-free pointwise bracket: both inputs and the product are truncated.
pub fn bracket_dealiased(sp: &Spectral, spec: &StructureSpec, f: &AlgField, g: &AlgField) -> AlgField {
    let (f, g) = (dealias(sp, f), dealias(sp, g));
    dealias(sp, &f.bracket(&g, spec))
}

/// Alias-free pointwise product of two real scalar lattices.
pub fn product_dealiased(sp: &Spectral, f: &[f64], g: &[f64]) -> Vec<f64> {
    let (mut fh, mut gh) = sp.forward_pair(f, g);
    sp.truncate_in_place(&mut fh);
    sp.truncate_in_place(&mut gh);
    let (f, g) = sp.inverse_pair(&fh, &gh);
    let p: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a * b).collect();
    let mut ph = sp.forward(&p);
    sp.truncate_in_place(&mut ph);
    sp.inverse(ph)
}
