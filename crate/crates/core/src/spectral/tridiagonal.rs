//! Householder reduction to tridiagonal form and the tridiagonal
//! eigensolvers built on it.
//!
//! Only the lower triangle of the input is read or written.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;

struct Reflector {
    /// First row/column the reflector acts on.
    start: usize,
    v: Vec<f64>,
    tau: f64,
}

/// `A = Q T Qᵀ` with `T` tridiagonal and `Q` a product of reflectors.
pub(crate) struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    reflectors: Vec<Reflector>,
}

/// Four-lane dot product; the split accumulators let the compiler vectorise.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Tridiagonal {
    pub fn reduce(mut a: Matrix) -> Self {
        let n = a.rows();
        debug_assert!(a.is_square());
        let s = a.as_mut_slice();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut p = vec![0.0; n];

        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let base = k + 1;
            diag[k] = s[k * n + k];
            let mut v: Vec<f64> = (0..m).map(|t| s[(base + t) * n + k]).collect();
            let tail = libm::sqrt(dot4(&v[1..], &v[1..]));
            if tail == 0.0 {
                off[k] = v[0];
                continue;
            }
            let alpha = -libm::copysign(libm::hypot(v[0], tail), v[0]);
            v[0] -= alpha;
            let tau = 2.0 / (v[0] * v[0] + tail * tail);
            off[k] = alpha;

            // p = A22 v using the lower triangle of the trailing block
            let p = &mut p[..m];
            p.fill(0.0);
            for i in 0..m {
                let row = &s[(base + i) * n + base..(base + i) * n + base + i + 1];
                let (left, d) = row.split_at(i);
                let vi = v[i];
                p[i] += dot4(left, &v[..i]) + d[0] * vi;
                for (pj, lj) in p[..i].iter_mut().zip(left) {
                    *pj += lj * vi;
                }
            }
            p.iter_mut().for_each(|x| *x *= tau);
            let half = 0.5 * tau * dot4(p, &v);
            for (pj, vj) in p.iter_mut().zip(&v) {
                *pj -= half * vj;
            }
            // A22 -= v wᵀ + w vᵀ
            for i in 0..m {
                let row = &mut s[(base + i) * n + base..(base + i) * n + base + i + 1];
                let (vi, wi) = (v[i], p[i]);
                for ((r, vj), wj) in row.iter_mut().zip(&v[..=i]).zip(&p[..=i]) {
                    *r -= vi * wj + wi * vj;
                }
            }
            reflectors.push(Reflector {
                start: base,
                v,
                tau,
            });
        }
        if n >= 2 {
            diag[n - 2] = s[(n - 2) * n + n - 2];
            off[n - 2] = s[(n - 1) * n + n - 2];
        }
        if n >= 1 {
            diag[n - 1] = s[(n - 1) * n + n - 1];
        }
        Self {
            diag,
            off,
            reflectors,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Infinity norm of `T`.
    fn norm(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Maps an eigenvector of `T` to one of `A`.
    fn back_transform(&self, x: &mut [f64]) {
        for r in self.reflectors.iter().rev() {
            let seg = &mut x[r.start..];
            let s = r.tau * dot4(&r.v, seg);
            for (xi, vi) in seg.iter_mut().zip(&r.v) {
                *xi -= s * vi;
            }
        }
    }

    /// Every eigenpair by implicit QL. Returns ascending values and the
    /// matching eigenvectors of `A` as rows.
    pub fn full(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        let mut zt: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                r
            })
            .collect();

        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() + dd == dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 200 {
                    log::warn!("tridiagonal QL did not converge for index {l}");
                    break;
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = libm::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + libm::copysign(r, g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut deflated = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = libm::hypot(f, g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    let (lo, hi) = zt.split_at_mut(i + 1);
                    for (zi, zi1) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
                        let t = *zi1;
                        *zi1 = s * *zi + c * t;
                        *zi = c * *zi - s * t;
                    }
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        let values = order.iter().map(|&i| d[i]).collect();
        let vectors = order
            .into_iter()
            .map(|i| {
                let mut x = core::mem::take(&mut zt[i]);
                self.back_transform(&mut x);
                x
            })
            .collect();
        (values, vectors)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    fn count_below(&self, off_sq: &[f64], x: f64, pivmin: f64) -> usize {
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        let mut count = usize::from(q < 0.0);
        for i in 1..self.len() {
            q = self.diag[i] - x - off_sq[i - 1] / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            count += usize::from(q < 0.0);
        }
        count
    }

    /// Eigenpairs with ascending indices in `range`, by bisection and
    /// inverse iteration.
    pub fn selected(&self, range: core::ops::Range<usize>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.len();
        let off_sq: Vec<f64> = self.off.iter().map(|e| e * e).collect();
        let tnorm = self.norm().max(f64::MIN_POSITIVE);
        let pivmin = f64::MIN_POSITIVE * off_sq.iter().copied().fold(1.0, f64::max);
        let (mut glo, mut ghi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            glo = glo.min(self.diag[i] - r);
            ghi = ghi.max(self.diag[i] + r);
        }
        let pad = 4.0 * f64::EPSILON * tnorm + 2.0 * pivmin;
        glo -= pad;
        ghi += pad;

        let values: Vec<f64> = range
            .clone()
            .map(|j| {
                let (mut lo, mut hi) = (glo, ghi);
                for _ in 0..256 {
                    let tol = 2.0 * f64::EPSILON * (lo.abs().max(hi.abs()) + tnorm) + pivmin;
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.count_below(&off_sq, mid, pivmin) > j {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();

        let cluster_tol = 1e-3 * tnorm;
        let sep = 10.0 * f64::EPSILON * tnorm;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut shifts: Vec<f64> = Vec::with_capacity(values.len());
        for (idx, &lambda) in values.iter().enumerate() {
            let mut shift = lambda;
            if let Some(&prev) = shifts.last() {
                if shift - prev < sep {
                    shift = prev + sep;
                }
            }
            shifts.push(shift);
            let lu = TridiagonalLu::factor(&self.diag, &self.off, shift, f64::EPSILON * tnorm);
            let cluster_start = values[..idx]
                .iter()
                .rposition(|&v| lambda - v > cluster_tol)
                .map_or(0, |p| p + 1);
            let mut x = start_vector(n, (range.start + idx) as u64);
            for _ in 0..5 {
                lu.solve(&mut x);
                for q in &vectors[cluster_start..idx] {
                    let c = dot4(q, &x);
                    x.iter_mut().zip(q).for_each(|(xi, qi)| *xi -= c * qi);
                }
                let norm = libm::sqrt(dot4(&x, &x));
                if !(norm > 0.0 && norm.is_finite()) {
                    x = start_vector(n, 7919 + idx as u64);
                    continue;
                }
                x.iter_mut().for_each(|xi| *xi /= norm);
            }
            vectors.push(x);
        }
        for x in &mut vectors {
            self.back_transform(x);
        }
        (values, vectors)
    }
}

/// Deterministic pseudo-random start vector in `[-1, 1]`.
fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

/// LU factors of `T - σI` with partial pivoting.
struct TridiagonalLu {
    diag: Vec<f64>,
    sup: Vec<f64>,
    sup2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(d: &[f64], e: &[f64], shift: f64, tiny: f64) -> Self {
        let n = d.len();
        let mut a: Vec<f64> = d.iter().map(|x| x - shift).collect();
        let mut b = e.to_vec();
        let c = e;
        let mut sup2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let tiny = tiny.max(f64::MIN_POSITIVE);
        for k in 0..n.saturating_sub(1) {
            if a[k].abs() >= c[k].abs() {
                if a[k].abs() < tiny {
                    a[k] = tiny;
                }
                let m = c[k] / a[k];
                mult[k] = m;
                a[k + 1] -= m * b[k];
            } else {
                let m = a[k] / c[k];
                swapped[k] = true;
                mult[k] = m;
                a[k] = c[k];
                let t = a[k + 1];
                a[k + 1] = b[k] - m * t;
                if k + 2 < n {
                    sup2[k] = b[k + 1];
                    b[k + 1] = -m * sup2[k];
                }
                b[k] = t;
            }
        }
        if n > 0 && a[n - 1].abs() < tiny {
            a[n - 1] = tiny;
        }
        Self {
            diag: a,
            sup: b,
            sup2,
            mult,
            swapped,
        }
    }

    fn solve(&self, y: &mut [f64]) {
        let n = y.len();
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                let t = y[k];
                y[k] = y[k + 1];
                y[k + 1] = t - self.mult[k] * y[k];
            } else {
                y[k + 1] -= self.mult[k] * y[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            if k + 1 < n {
                s -= self.sup[k] * y[k + 1];
            }
            if k + 2 < n {
                s -= self.sup2[k] * y[k + 2];
            }
            y[k] = s / self.diag[k];
        }
    }
}
