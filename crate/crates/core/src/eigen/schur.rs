//! Real Schur decomposition of a dense real matrix.
//!
//! Balancing, Householder reduction to upper Hessenberg form, then the
//! Francis implicit double-shift QR iteration. The reduction and the QR sweeps
//! follow the EISPACK routines `balanc`, `orthes` and `hqr2` (the Schur part;
//! no eigenvector back-substitution). The radix-2 balancing is followed by a
//! global diagonal scaling step and the shift strategy borrows two LAPACK
//! safeguards; both are described where they are implemented.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// QR sweeps allowed per unit of dimension before giving up.
pub const SWEEPS_PER_DIM: usize = 40;

const EPS: f64 = f64::EPSILON;

/// Quasi-triangular factorisation `B Q = Q T` of the balanced matrix `B`.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub n: usize,
    /// Quasi upper-triangular factor, row-major.
    pub t: Vec<f64>,
    /// Orthogonal factor, row-major.
    pub q: Vec<f64>,
    /// Balanced input, row-major.
    pub balanced: Vec<f64>,
    /// Diagonal scaling `B = D^{-1} A D`.
    pub scale: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub sweeps: usize,
}

impl RealSchur {
    /// `||B Q - Q T||_F / ||B||_F`.
    pub fn relative_residual(&self) -> f64 {
        let n = self.n;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut bq = 0.0;
                let mut qt = 0.0;
                for k in 0..n {
                    bq += self.balanced[i * n + k] * self.q[k * n + j];
                    qt += self.q[i * n + k] * self.t[k * n + j];
                }
                num += (bq - qt) * (bq - qt);
                den += self.balanced[i * n + j] * self.balanced[i * n + j];
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Diagonal similarity scaling by powers of two, equalising row and column
/// 1-norms. Returns the scale factors; `a` is overwritten by `D^{-1} A D`.
pub fn balance(n: usize, a: &mut [f64]) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    const SQRDX: f64 = RADIX * RADIX;
    let mut scale = vec![1.0; n];
    let mut passes = 0;
    let mut noconv = true;
    while noconv && passes < 1000 {
        noconv = false;
        passes += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            while c < g {
                f *= RADIX;
                c *= SQRDX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= SQRDX;
            }
            if (c + r) / f < 0.95 * s {
                noconv = true;
                let g = 1.0 / f;
                scale[i] *= f;
                for j in 0..n {
                    a[i * n + j] *= g;
                }
                for j in 0..n {
                    a[j * n + i] *= f;
                }
            }
        }
    }
    scale
}

/// Sum of squared off-diagonal entries of `D^{-1} A D` with `D = diag(e^x)`.
fn offdiag_energy(n: usize, a: &[f64], x: &[f64]) -> f64 {
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = a[i * n + j];
            if i != j && v != 0.0 {
                f += (v * (x[j] - x[i]).exp()).powi(2);
            }
        }
    }
    f
}

/// Solves `m y = b` for symmetric positive definite `m` by Cholesky; `None`
/// if a pivot is not positive.
fn cholesky_solve(n: usize, mut m: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= m[j * n + k] * m[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        m[j * n + j] = d;
        for i in j + 1..n {
            let mut v = m[i * n + j];
            for k in 0..j {
                v -= m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = v / d;
        }
    }
    for i in 0..n {
        for k in 0..i {
            b[i] -= m[i * n + k] * b[k];
        }
        b[i] /= m[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            b[i] -= m[k * n + i] * b[k];
        }
        b[i] /= m[i * n + i];
    }
    Some(b)
}

/// Global diagonal scaling minimising the off-diagonal Frobenius norm.
///
/// Row/column balancing is local: on a chain whose rows each hold both
/// `e^{g}` and `e^{-g}` every row already matches its column, yet the matrix
/// is `e^{g L}` away from normal. The objective is convex in `log D`, so a
/// damped Newton iteration on the weighted graph Laplacian finds the global
/// optimum. The scaling is applied only when it lowers the norm by more than
/// 1%, which leaves matrices that are already optimally scaled untouched
/// bit for bit. Returns the extra factors when applied.
fn refine_balance(n: usize, a: &mut [f64]) -> Option<Vec<f64>> {
    const MAX_NEWTON: usize = 100;
    if n < 3 {
        return None;
    }
    let mut x = vec![0.0; n];
    let f0 = offdiag_energy(n, a, &x);
    if f0 == 0.0 || !f0.is_finite() {
        return None;
    }
    let mut f = f0;
    for _ in 0..MAX_NEWTON {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j];
                if i == j || v == 0.0 {
                    continue;
                }
                let b2 = (v * (x[j] - x[i]).exp()).powi(2);
                grad[j] += 2.0 * b2;
                grad[i] -= 2.0 * b2;
                hess[i * n + i] += 4.0 * b2;
                hess[j * n + j] += 4.0 * b2;
                hess[i * n + j] -= 4.0 * b2;
                hess[j * n + i] -= 4.0 * b2;
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= 1e-13 * f {
            break;
        }
        // the Laplacian is singular along constant shifts
        let mu = 1e-10 * (0..n).map(|i| hess[i * n + i]).fold(0.0, f64::max);
        for i in 0..n {
            hess[i * n + i] += mu;
        }
        let step = cholesky_solve(n, hess, grad.iter().map(|g| -g).collect())?;
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi + t * si).collect();
            let ft = offdiag_energy(n, a, &trial);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                x = trial;
                moved = ft < f;
                f = ft;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !(f < 0.99 * f0) {
        return None;
    }
    let d: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[i * n + j] *= (x[j] - x[i]).exp();
            }
        }
    }
    Some(d)
}

/// Householder reduction to upper Hessenberg form. On return `h` is
/// Hessenberg (entries below the subdiagonal are exactly zero) and `v` holds
/// the accumulated orthogonal transformation.
fn hessenberg(n: usize, h: &mut [f64], v: &mut [f64]) {
    let mut ort = vec![0.0; n];
    let high = n - 1;
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i * n + m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i * n + m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i * n + j];
            }
            f /= hh;
            for i in m..=high {
                h[i * n + j] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[i * n + j];
            }
            f /= hh;
            for j in m..=high {
                h[i * n + j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m * n + m - 1] = scale * g;
    }

    v.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for m in (1..high).rev() {
        let sub = h[m * n + m - 1];
        if sub == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[i * n + m - 1];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[i * n + j];
            }
            // two divisions avoid underflow
            g = (g / ort[m]) / sub;
            for i in m..=high {
                v[i * n + j] += g * ort[i];
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[i * n + j] = 0.0;
        }
    }
}

/// Real Schur form of `a` (row-major, `n x n`). `tol` is the relative
/// deflation threshold: `h[i+1][i]` is dropped once it is at most
/// `tol * (|h[i][i]| + |h[i+1][i+1]|)`.
pub fn real_schur(n: usize, a: &[f64], tol: f64) -> Result<RealSchur> {
    assert_eq!(a.len(), n * n);
    let mut balanced = a.to_vec();
    let mut scale = balance(n, &mut balanced);
    if let Some(extra) = refine_balance(n, &mut balanced) {
        scale.iter_mut().zip(extra).for_each(|(s, e)| *s *= e);
    }
    let mut h = balanced.clone();
    let mut v = vec![0.0; n * n];
    if n == 0 {
        return Ok(RealSchur {
            n,
            t: h,
            q: v,
            balanced,
            scale,
            eigenvalues: Vec::new(),
            sweeps: 0,
        });
    }
    hessenberg(n, &mut h, &mut v);

    let nn = n;
    let low = 0usize;
    let high = nn - 1;
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let (mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i * nn + j].abs();
        }
    }

    let max_sweeps = SWEEPS_PER_DIM * nn;
    let mut sweeps = 0usize;
    let mut iter = 0usize;
    // `top` is one past the active block's last row (`n` in EISPACK).
    let mut top = nn as isize - 1;
    let ix = |i: usize, j: usize| i * nn + j;

    while top >= low as isize {
        let n = top as usize;
        let mut l = n;
        while l > low {
            s = h[ix(l - 1, l - 1)].abs() + h[ix(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[ix(l, l - 1)].abs() <= tol * s {
                h[ix(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }

        if l == n {
            // one root
            h[ix(n, n)] += exshift;
            d[n] = h[ix(n, n)];
            e[n] = 0.0;
            top -= 1;
            iter = 0;
        } else if l == n - 1 {
            // two roots
            w = h[ix(n, n - 1)] * h[ix(n - 1, n)];
            p = (h[ix(n - 1, n - 1)] - h[ix(n, n)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[ix(n, n)] += exshift;
            h[ix(n - 1, n - 1)] += exshift;
            x = h[ix(n, n)];

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[n - 1] = x + z;
                d[n] = d[n - 1];
                if z != 0.0 {
                    d[n] = x - w / z;
                }
                e[n - 1] = 0.0;
                e[n] = 0.0;
                x = h[ix(n, n - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in n - 1..nn {
                    z = h[ix(n - 1, j)];
                    h[ix(n - 1, j)] = q * z + p * h[ix(n, j)];
                    h[ix(n, j)] = q * h[ix(n, j)] - p * z;
                }
                for i in 0..=n {
                    z = h[ix(i, n - 1)];
                    h[ix(i, n - 1)] = q * z + p * h[ix(i, n)];
                    h[ix(i, n)] = q * h[ix(i, n)] - p * z;
                }
                for i in low..=high {
                    z = v[ix(i, n - 1)];
                    v[ix(i, n - 1)] = q * z + p * v[ix(i, n)];
                    v[ix(i, n)] = q * v[ix(i, n)] - p * z;
                }
                h[ix(n, n - 1)] = 0.0;
            } else {
                d[n - 1] = x + p;
                d[n] = x + p;
                e[n - 1] = z;
                e[n] = -z;
            }
            top -= 2;
            iter = 0;
        } else {
            if sweeps >= max_sweeps {
                return Err(Error::NoConvergence { n: nn, sweeps });
            }
            x = h[ix(n, n)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[ix(n - 1, n - 1)];
                w = h[ix(n, n - 1)] * h[ix(n - 1, n)];
            }

            // exceptional shifts after stagnation, alternating between the
            // two classical choices every ten sweeps
            if iter > 0 && iter % 20 == 10 {
                exshift += x;
                for i in low..=n {
                    h[ix(i, i)] -= x;
                }
                s = h[ix(n, n - 1)].abs() + h[ix(n - 1, n - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            } else if iter > 0 && iter % 20 == 0 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h[ix(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            } else {
                // Two real shifts: use the one nearer h[n][n] twice. Otherwise
                // a block holding two clusters of nearly equal eigenvalues
                // gets one shift per cluster and never converges.
                let half = (y - x) / 2.0;
                let disc = half * half + w;
                if disc > 0.0 {
                    let mid = x + half;
                    let root = disc.sqrt();
                    let sigma = if (mid + root - x).abs() <= (mid - root - x).abs() {
                        mid + root
                    } else {
                        mid - root
                    };
                    x = sigma;
                    y = sigma;
                    w = 0.0;
                }
            }
            iter += 1;
            sweeps += 1;

            // two consecutive small subdiagonal elements
            let mut m = n - 2;
            loop {
                z = h[ix(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[ix(m + 1, m)] + h[ix(m, m + 1)];
                q = h[ix(m + 1, m + 1)] - z - r - s;
                r = h[ix(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[ix(m, m - 1)].abs() * (q.abs() + r.abs())
                    < EPS * (p.abs() * (h[ix(m - 1, m - 1)].abs() + z.abs() + h[ix(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=n {
                h[ix(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[ix(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n, columns m..=n
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[ix(k, k - 1)];
                    q = h[ix(k + 1, k - 1)];
                    r = if notlast { h[ix(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[ix(k, k - 1)] = -s * x;
                    h[ix(k + 1, k - 1)] = 0.0;
                    if notlast {
                        h[ix(k + 2, k - 1)] = 0.0;
                    }
                } else if l != m {
                    h[ix(k, k - 1)] = -h[ix(k, k - 1)];
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    p = h[ix(k, j)] + q * h[ix(k + 1, j)];
                    if notlast {
                        p += r * h[ix(k + 2, j)];
                        h[ix(k + 2, j)] -= p * z;
                    }
                    h[ix(k, j)] -= p * x;
                    h[ix(k + 1, j)] -= p * y;
                }
                for i in 0..=n.min(k + 3) {
                    p = x * h[ix(i, k)] + y * h[ix(i, k + 1)];
                    if notlast {
                        p += z * h[ix(i, k + 2)];
                        h[ix(i, k + 2)] -= p * r;
                    }
                    h[ix(i, k)] -= p;
                    h[ix(i, k + 1)] -= p * q;
                }
                for i in low..=high {
                    p = x * v[ix(i, k)] + y * v[ix(i, k + 1)];
                    if notlast {
                        p += z * v[ix(i, k + 2)];
                        v[ix(i, k + 2)] -= p * r;
                    }
                    v[ix(i, k)] -= p;
                    v[ix(i, k + 1)] -= p * q;
                }
            }
        }
    }

    let eigenvalues = d
        .iter()
        .zip(&e)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();

    Ok(RealSchur {
        n: nn,
        t: h,
        q: v,
        balanced,
        scale,
        eigenvalues,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balancing_is_a_similarity_by_powers_of_two() {
        let a = vec![1.0, 1e6, 0.0, 1e-6, 2.0, 1e3, 0.0, 1e-3, 3.0];
        let mut b = a.clone();
        let d = balance(3, &mut b);
        for i in 0..3 {
            assert_eq!(d[i].log2().fract(), 0.0);
            for j in 0..3 {
                let want = a[i * 3 + j] * d[j] / d[i];
                assert!((b[i * 3 + j] - want).abs() <= 1e-15 * want.abs());
            }
        }
        let rowmax = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(rowmax < 1e3);
    }

    #[test]
    fn schur_factor_is_consistent() {
        let a: Vec<f64> = (0..36).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let s = real_schur(6, &a, f64::EPSILON).unwrap();
        assert!(s.relative_residual() < 1e-13, "{}", s.relative_residual());
        // orthogonality of q
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = (0..6).map(|k| s.q[k * 6 + i] * s.q[k * 6 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-13);
            }
        }
        // quasi-triangular
        for i in 2..6 {
            for j in 0..i - 1 {
                assert_eq!(s.t[i * 6 + j], 0.0);
            }
        }
    }

    #[test]
    fn two_by_two_blocks() {
        let s = real_schur(2, &[0.0, 1.0, -1.0, 0.0], 1e-13).unwrap();
        let mut ev = s.eigenvalues.clone();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_eq!(ev, vec![Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0)]);

        let s = real_schur(2, &[2.0, 1.0, 1.0, 2.0], 1e-13).unwrap();
        let mut re: Vec<f64> = s.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - 1.0).abs() < 1e-15 && (re[1] - 3.0).abs() < 1e-15);
        assert!(s.eigenvalues.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn one_by_one_and_zero() {
        let s = real_schur(1, &[2.5], 1e-13).unwrap();
        assert_eq!(s.eigenvalues, vec![Complex64::new(2.5, 0.0)]);
        let s = real_schur(3, &[0.0; 9], 1e-13).unwrap();
        assert!(s.eigenvalues.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    fn chain(n: usize, g: f64, periodic: bool, diag: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for m in 0..n {
            a[m * n + m] = diag(m);
            if m + 1 < n {
                a[m * n + m + 1] = -g.exp();
                a[(m + 1) * n + m] = -(-g).exp();
            }
        }
        if periodic {
            a[(n - 1) * n] = -g.exp();
            a[n - 1] = -(-g).exp();
        }
        a
    }

    #[test]
    fn global_scaling_symmetrises_open_chain() {
        let n = 40;
        let a = chain(n, 1.0, false, |m| (m as f64 * 0.7).cos());
        let mut b = a.clone();
        let d = refine_balance(n, &mut b).expect("scaling applies");
        for m in 0..n - 1 {
            let (up, down) = (b[m * n + m + 1], b[(m + 1) * n + m]);
            assert!((up - down).abs() <= 1e-12, "{m}: {up} {down}");
            assert!((d[m + 1] / d[m] - (-1.0f64).exp()).abs() < 1e-12);
        }
        let s = real_schur(n, &a, 1e-13).unwrap();
        assert!(s.eigenvalues.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn global_scaling_leaves_rings_alone() {
        let n = 30;
        let a = chain(n, 0.6, true, |m| (m as f64).sin());
        let mut b = a.clone();
        assert!(refine_balance(n, &mut b).is_none());
        assert_eq!(a, b);
    }

    #[test]
    fn clustered_conjugate_pairs_converge() {
        // nearly degenerate pairs on a slightly non-Hermitian ring used to
        // stall with one real shift in each cluster
        for g in [1e-9, 4.048376602284337e-8, 1e-4] {
            let a = chain(10, g, true, |_| -2.0);
            let s = real_schur(10, &a, 1e-13).unwrap();
            assert!(s.sweeps <= 40, "{g}: {} sweeps", s.sweeps);
            assert!(s.relative_residual() < 1e-12);
        }
    }
}
