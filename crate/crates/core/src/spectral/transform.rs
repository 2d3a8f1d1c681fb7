//! Three-dimensional FFT engine and Fourier multiplier tables.
//!
//! The forward transform is unnormalized, `f̂(k) = Σ_x f(x) e^{-ik·x}`; the
//! inverse carries the `1/n³`. Real fields are transformed two at a time by
//! packing them into the real and imaginary parts of one complex lattice.
//!
//! Differential multipliers use the derivative wavenumber with the Nyquist
//! entry zeroed, and the Laplacian symbol is `-|k_d|²` for the same vector, so
//! that `Δ = Σ ∂_j ∂_j` holds exactly on every mode.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::field::{AlgField, SpecField, VecField};
use super::grid::Grid;

pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kvec: Vec<[f64; 3]>,
    kabs: Vec<f64>,
    lap: Vec<f64>,
    neg: Vec<usize>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        let kd: Vec<f64> = (0..n)
            .map(|i| {
                if grid.mode(i) == (n / 2) as i64 {
                    0.0
                } else {
                    grid.wavenumber(i)
                }
            })
            .collect();
        let kt: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
        let cutoff = grid.dealias_cutoff();

        let n3 = grid.n3();
        let mut kvec = Vec::with_capacity(n3);
        let mut kabs = Vec::with_capacity(n3);
        let mut lap = Vec::with_capacity(n3);
        let mut neg = Vec::with_capacity(n3);
        let mut keep = Vec::with_capacity(n3);
        for idx in 0..n3 {
            let (ix, iy, iz) = grid.coords(idx);
            let k = [kd[ix], kd[iy], kd[iz]];
            kvec.push(k);
            lap.push(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            kabs.push((kt[ix] * kt[ix] + kt[iy] * kt[iy] + kt[iz] * kt[iz]).sqrt());
            let ni = |i: usize| (n - i) % n;
            neg.push(grid.site(ni(ix), ni(iy), ni(iz)));
            keep.push(
                grid.mode(ix).abs() <= cutoff
                    && grid.mode(iy).abs() <= cutoff
                    && grid.mode(iz).abs() <= cutoff,
            );
        }
        Self {
            grid,
            fwd,
            inv,
            kvec,
            kabs,
            lap,
            neg,
            keep,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n3(&self) -> usize {
        self.grid.n3()
    }

    /// Derivative wavenumber vector of a mode.
    #[inline]
    pub fn k(&self, idx: usize) -> [f64; 3] {
        self.kvec[idx]
    }

    /// `|k_d|²`, the negated Laplacian symbol.
    #[inline]
    pub fn k2(&self, idx: usize) -> f64 {
        self.lap[idx]
    }

    /// Frequency magnitude `|ξ|` (true wavenumber, Nyquist included).
    #[inline]
    pub fn kabs(&self, idx: usize) -> f64 {
        self.kabs[idx]
    }

    #[inline]
    pub fn is_kept(&self, idx: usize) -> bool {
        self.keep[idx]
    }

    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    /// Largest `|k_d|` among modes that survive dealiasing.
    pub fn k_max(&self) -> f64 {
        self.lap
            .iter()
            .zip(&self.keep)
            .filter(|(_, k)| **k)
            .fold(0.0f64, |m, (l, _)| m.max(*l))
            .sqrt()
    }

    fn fft3(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.grid.n();
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // x lines are contiguous
        plan.process_with_scratch(buf, &mut scratch);
        // y lines
        let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
        for z in 0..n {
            let plane = &mut buf[z * n * n..(z + 1) * n * n];
            for y in 0..n {
                for x in 0..n {
                    tmp[x * n + y] = plane[x + n * y];
                }
            }
            plan.process_with_scratch(&mut tmp, &mut scratch);
            for y in 0..n {
                for x in 0..n {
                    plane[x + n * y] = tmp[x * n + y];
                }
            }
        }
        // z lines, one x-z plane at a time
        for y in 0..n {
            for z in 0..n {
                let row = &buf[n * y + n * n * z..n * y + n * n * z + n];
                for (x, v) in row.iter().enumerate() {
                    tmp[x * n + z] = *v;
                }
            }
            plan.process_with_scratch(&mut tmp, &mut scratch);
            for z in 0..n {
                let row = &mut buf[n * y + n * n * z..n * y + n * n * z + n];
                for (x, v) in row.iter_mut().enumerate() {
                    *v = tmp[x * n + z];
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft3(&mut buf, false);
        buf
    }

    /// Transforms two real lattices with one complex FFT.
    pub fn forward_pair(&self, f: &[f64], g: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut z: Vec<Complex64> = f
            .iter()
            .zip(g)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        self.fft3(&mut z, false);
        let n3 = z.len();
        let mut fh = vec![Complex64::new(0.0, 0.0); n3];
        let mut gh = vec![Complex64::new(0.0, 0.0); n3];
        for k in 0..n3 {
            let zk = z[k];
            let zm = z[self.neg[k]].conj();
            fh[k] = 0.5 * (zk + zm);
            // (zk - zm) / 2i
            let d = zk - zm;
            gh[k] = Complex64::new(0.5 * d.im, -0.5 * d.re);
        }
        (fh, gh)
    }

    pub fn forward_many(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let pairs: Vec<(usize, Option<usize>)> = (0..fields.len())
            .step_by(2)
            .map(|i| (i, if i + 1 < fields.len() { Some(i + 1) } else { None }))
            .collect();
        let out: Vec<Vec<Vec<Complex64>>> = pairs
            .par_iter()
            .map(|&(i, j)| match j {
                Some(j) => {
                    let (a, b) = self.forward_pair(fields[i], fields[j]);
                    vec![a, b]
                }
                None => vec![self.forward(fields[i])],
            })
            .collect();
        out.into_iter().flatten().collect()
    }

    /// Inverse transform of a Hermitian spectrum, returning the real lattice.
    pub fn inverse(&self, mut fh: Vec<Complex64>) -> Vec<f64> {
        self.fft3(&mut fh, true);
        let s = 1.0 / fh.len() as f64;
        fh.iter().map(|c| c.re * s).collect()
    }

    /// Inverse transform of two Hermitian spectra with one complex FFT.
    pub fn inverse_pair(&self, fh: &[Complex64], gh: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<Complex64> = fh
            .iter()
            .zip(gh)
            .map(|(a, b)| a + Complex64::new(-b.im, b.re))
            .collect();
        self.fft3(&mut z, true);
        let s = 1.0 / z.len() as f64;
        (
            z.iter().map(|c| c.re * s).collect(),
            z.iter().map(|c| c.im * s).collect(),
        )
    }

    pub fn inverse_many<S: AsRef<[Complex64]> + Sync>(&self, spectra: &[S]) -> Vec<Vec<f64>> {
        let pairs: Vec<(usize, Option<usize>)> = (0..spectra.len())
            .step_by(2)
            .map(|i| (i, if i + 1 < spectra.len() { Some(i + 1) } else { None }))
            .collect();
        let out: Vec<Vec<Vec<f64>>> = pairs
            .par_iter()
            .map(|&(i, j)| match j {
                Some(j) => {
                    let (a, b) = self.inverse_pair(spectra[i].as_ref(), spectra[j].as_ref());
                    vec![a, b]
                }
                None => vec![self.inverse(spectra[i].as_ref().to_vec())],
            })
            .collect();
        out.into_iter().flatten().collect()
    }

    pub fn forward_field(&self, f: &AlgField) -> SpecField {
        let refs: Vec<&[f64]> = f.comps.iter().map(Vec::as_slice).collect();
        self.forward_many(&refs)
    }

    pub fn inverse_field(&self, fh: &SpecField) -> AlgField {
        AlgField::from_comps(self.inverse_many(fh))
    }

    /// Transforms several algebra fields in one batch.
    pub fn forward_fields(&self, fields: &[&AlgField]) -> Vec<SpecField> {
        let refs: Vec<&[f64]> = fields
            .iter()
            .flat_map(|f| f.comps.iter().map(Vec::as_slice))
            .collect();
        let flat = self.forward_many(&refs);
        split_flat(flat, fields.iter().map(|f| f.dim()))
    }

    pub fn inverse_fields(&self, spectra: &[&SpecField]) -> Vec<AlgField> {
        let dims: Vec<usize> = spectra.iter().map(|s| s.len()).collect();
        let flat: Vec<&[Complex64]> = spectra.iter().flat_map(|s| s.iter().map(Vec::as_slice)).collect();
        let real = self.inverse_many(&flat);
        split_flat(real, dims.into_iter())
            .into_iter()
            .map(AlgField::from_comps)
            .collect()
    }

    pub fn forward_vec(&self, v: &VecField) -> [SpecField; 3] {
        let mut out = self.forward_fields(&[&v[0], &v[1], &v[2]]).into_iter();
        [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()]
    }

    pub fn inverse_vec(&self, v: &[SpecField; 3]) -> VecField {
        let mut out = self.inverse_fields(&[&v[0], &v[1], &v[2]]).into_iter();
        [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()]
    }

    /// Multiplies every mode of `fh` by `symbol(mode)`.
    pub fn apply_symbol(&self, fh: &[Complex64], symbol: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
        fh.iter().enumerate().map(|(i, c)| c * symbol(i)).collect()
    }

    pub fn apply_real_symbol(&self, fh: &[Complex64], symbol: impl Fn(usize) -> f64) -> Vec<Complex64> {
        fh.iter().enumerate().map(|(i, c)| c * symbol(i)).collect()
    }

    /// `∂_axis` in Fourier space.
    pub fn deriv_hat(&self, fh: &[Complex64], axis: usize) -> Vec<Complex64> {
        fh.iter()
            .zip(&self.kvec)
            .map(|(c, k)| Complex64::new(-c.im * k[axis], c.re * k[axis]))
            .collect()
    }

    pub fn lap_hat(&self, fh: &[Complex64]) -> Vec<Complex64> {
        fh.iter().zip(&self.lap).map(|(c, l)| -c * *l).collect()
    }

    /// `Δ^{-1}`, with the zero mode (and any mode where the symbol vanishes) mapped to zero.
    pub fn inv_lap_hat(&self, fh: &[Complex64]) -> Vec<Complex64> {
        fh.iter()
            .zip(&self.lap)
            .map(|(c, l)| if *l > 0.0 { -c / *l } else { Complex64::new(0.0, 0.0) })
            .collect()
    }

    pub fn heat_hat(&self, fh: &[Complex64], s: f64) -> Vec<Complex64> {
        fh.iter()
            .zip(&self.lap)
            .map(|(c, l)| c * (-s * l).exp())
            .collect()
    }

    pub fn truncate_in_place(&self, fh: &mut [Complex64]) {
        for (c, keep) in fh.iter_mut().zip(&self.keep) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn truncate_field(&self, fh: &mut SpecField) {
        for c in fh.iter_mut() {
            self.truncate_in_place(c);
        }
    }

    /// `∫ f g dx` for two real fields given by their spectra.
    pub fn parseval_inner(&self, fh: &[Complex64], gh: &[Complex64]) -> f64 {
        let n3 = self.n3() as f64;
        let s: f64 = fh.iter().zip(gh).map(|(a, b)| (a * b.conj()).re).sum();
        s * self.grid.volume() / (n3 * n3)
    }
}

fn split_flat<T>(flat: Vec<T>, dims: impl Iterator<Item = usize>) -> Vec<Vec<T>> {
    let mut it = flat.into_iter();
    dims.map(|d| (&mut it).take(d).collect()).collect()
}
