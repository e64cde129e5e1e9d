//! Dense complex linear algebra: products, a Householder QR, a one-sided
//! Jacobi SVD and the truncated Moore-Penrose pseudoinverse built on them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_traits::{One, Zero};

use crate::error::{invalid, Result};
use crate::scalar::{abs2, Cx, Real};

/// Relative singular-value cutoff used when none is given.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 80;

pub fn conj_transpose<T: Real>(a: ArrayView2<'_, Cx<T>>) -> Array2<Cx<T>> {
    let (r, c) = a.dim();
    Array2::from_shape_fn((c, r), |(i, j)| a[[j, i]].conj())
}

/// Plain `a * b`.
pub fn matmul<T: Real>(a: ArrayView2<'_, Cx<T>>, b: ArrayView2<'_, Cx<T>>) -> Array2<Cx<T>> {
    let (n, k) = a.dim();
    let (k2, m) = b.dim();
    assert_eq!(k, k2, "inner dimensions differ");
    let mut out = Array2::<Cx<T>>::zeros((n, m));
    for i in 0..n {
        let mut row = out.row_mut(i);
        for p in 0..k {
            let aip = a[[i, p]];
            if aip.is_zero() {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(b.row(p).iter()) {
                *o += aip * bv;
            }
        }
    }
    out
}

pub fn matvec<T: Real>(a: ArrayView2<'_, Cx<T>>, x: ArrayView1<'_, Cx<T>>) -> Array1<Cx<T>> {
    assert_eq!(a.ncols(), x.len(), "matvec shape");
    Array1::from_iter(
        a.rows()
            .into_iter()
            .map(|row| row.iter().zip(x.iter()).fold(Cx::zero(), |s, (&m, &v)| s + m * v)),
    )
}

pub fn frobenius_norm<T: Real>(a: ArrayView2<'_, Cx<T>>) -> T {
    a.iter().map(|&z| abs2(z)).sum::<T>().sqrt()
}

pub fn vector_norm<T: Real>(x: ArrayView1<'_, Cx<T>>) -> T {
    x.iter().map(|&z| abs2(z)).sum::<T>().sqrt()
}

/// Truncated pseudoinverse together with the factors it was built from.
#[derive(Debug, Clone)]
pub struct Pseudoinverse<T: Real> {
    pub pinv: Array2<Cx<T>>,
    /// Singular values in descending order (all of them, including the
    /// ones below the cutoff).
    pub singular_values: Vec<T>,
    /// Number of singular values kept.
    pub rank: usize,
    /// Right singular vectors as columns, ordered like `singular_values`.
    /// Only the first `rank` columns are meaningful.
    pub right_vectors: Array2<Cx<T>>,
}

impl<T: Real> Pseudoinverse<T> {
    /// `A^+ (A^+)^H`, formed as `V S^-2 V^H` over the kept singular triplets.
    pub fn gram(&self) -> Array2<Cx<T>> {
        let n = self.right_vectors.nrows();
        let v = &self.right_vectors;
        let mut g = Array2::<Cx<T>>::zeros((n, n));
        for k in 0..self.rank {
            let w = T::one() / (self.singular_values[k] * self.singular_values[k]);
            for i in 0..n {
                let vik = v[[i, k]] * w;
                for j in 0..n {
                    g[[i, j]] += vik * v[[j, k]].conj();
                }
            }
        }
        g
    }

    pub fn condition_number(&self) -> T {
        match (self.singular_values.first(), self.rank) {
            (Some(&s0), r) if r > 0 => s0 / self.singular_values[r - 1],
            _ => T::infinity(),
        }
    }
}

/// Moore-Penrose pseudoinverse with singular values below
/// `tol * sigma_max` treated as zero.
pub fn pseudoinverse<T: Real>(m: ArrayView2<'_, Cx<T>>, tol: T) -> Result<Array2<Cx<T>>> {
    Ok(pseudoinverse_full(m, tol)?.pinv)
}

pub fn pseudoinverse_full<T: Real>(m: ArrayView2<'_, Cx<T>>, tol: T) -> Result<Pseudoinverse<T>> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Err(invalid("pseudoinverse of an empty matrix"));
    }
    if !(tol >= T::zero()) {
        return Err(invalid("pseudoinverse tolerance must be non-negative"));
    }
    if rows >= cols {
        return Ok(tall_pinv(m, tol));
    }
    // Wide input: (A^H)^+ = (A^+)^H. With A^H = U S W^H the right vectors
    // of A are the columns of U = A^H W S^-1.
    let mh = conj_transpose(m);
    let tall = tall_pinv(mh.view(), tol);
    let w = &tall.right_vectors;
    let mut right = Array2::<Cx<T>>::zeros((cols, rows));
    for k in 0..tall.rank {
        let inv = T::one() / tall.singular_values[k];
        for j in 0..cols {
            let mut acc = Cx::zero();
            for i in 0..rows {
                acc += m[[i, j]].conj() * w[[i, k]];
            }
            right[[j, k]] = acc * inv;
        }
    }
    Ok(Pseudoinverse {
        pinv: conj_transpose(tall.pinv.view()),
        singular_values: tall.singular_values,
        rank: tall.rank,
        right_vectors: right,
    })
}

/// Residuals of the four Penrose identities, each relative to the norm of
/// the matrix it is compared against.
pub fn moore_penrose_residuals<T: Real>(a: ArrayView2<'_, Cx<T>>, p: ArrayView2<'_, Cx<T>>) -> [T; 4] {
    let ap = matmul(a, p);
    let pa = matmul(p, a);
    let apa = matmul(ap.view(), a);
    let pap = matmul(pa.view(), p);
    let rel = |x: &Array2<Cx<T>>, y: ArrayView2<'_, Cx<T>>| {
        let d = x - &y;
        let scale = frobenius_norm(y).max(T::min_positive_value());
        frobenius_norm(d.view()) / scale
    };
    let herm = |x: &Array2<Cx<T>>| {
        let xh = conj_transpose(x.view());
        rel(x, xh.view())
    };
    [rel(&apa, a), rel(&pap, p), herm(&ap), herm(&pa)]
}

struct Jacobi<T: Real> {
    u: Array2<Cx<T>>,
    sv: Vec<T>,
    v: Array2<Cx<T>>,
}

/// One-sided (Hestenes) Jacobi SVD of a square or tall matrix. Returns the
/// thin factors with singular values sorted descending; left vectors of
/// zero singular values are left as zero columns.
fn jacobi_svd<T: Real>(a: ArrayView2<'_, Cx<T>>) -> Jacobi<T> {
    let (m, n) = a.dim();
    let mut cols: Vec<Vec<Cx<T>>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut vcols: Vec<Vec<Cx<T>>> = (0..n)
        .map(|j| {
            let mut e = vec![Cx::zero(); n];
            e[j] = Cx::one();
            e
        })
        .collect();
    let eps = T::epsilon() * T::lit(2.0);
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut al = T::zero();
                    let mut be = T::zero();
                    let mut ga = Cx::zero();
                    for i in 0..m {
                        al += abs2(cp[i]);
                        be += abs2(cq[i]);
                        ga += cp[i].conj() * cq[i];
                    }
                    (al, be, ga)
                };
                let g = gamma.norm();
                if g <= eps * (alpha * beta).sqrt() || g <= T::min_positive_value() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (g + g);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                // phase that makes a_p^H (e^{-i phi} a_q) real and positive
                let ph = gamma.conj() / Cx::new(g, T::zero());
                rotate_pair(&mut cols, p, q, c, s, ph);
                rotate_pair(&mut vcols, p, q, c, s, ph);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = cols
        .iter()
        .map(|c| c.iter().map(|&z| abs2(z)).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = Array2::<Cx<T>>::zeros((m, n));
    let mut v = Array2::<Cx<T>>::zeros((n, n));
    let mut sv = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sv.push(s);
        if s > T::zero() {
            let inv = T::one() / s;
            for i in 0..m {
                u[[i, dst]] = cols[src][i] * inv;
            }
        }
        for i in 0..n {
            v[[i, dst]] = vcols[src][i];
        }
    }
    Jacobi { u, sv, v }
}

fn rotate_pair<T: Real>(cols: &mut [Vec<Cx<T>>], p: usize, q: usize, c: T, s: T, ph: Cx<T>) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * ph;
        let nx = *x * c - yq * s;
        let ny = *x * s + yq * c;
        *x = nx;
        *y = ny;
    }
}

/// Householder QR followed by a Jacobi SVD of the triangular factor.
fn tall_pinv<T: Real>(m: ArrayView2<'_, Cx<T>>, tol: T) -> Pseudoinverse<T> {
    let (rows, cols) = m.dim();
    // column-major working copy
    let mut a: Vec<Cx<T>> = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        a.extend(m.column(j).iter().copied());
    }
    let mut reflectors: Vec<Vec<Cx<T>>> = Vec::with_capacity(cols);
    let two = Cx::new(T::lit(2.0), T::zero());
    for k in 0..cols {
        let (head, tail) = a.split_at_mut((k + 1) * rows);
        let colk = &mut head[k * rows..];
        let x = &colk[k..];
        let norm = x.iter().map(|&z| abs2(z)).sum::<T>().sqrt();
        if norm <= T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let x0 = x[0];
        let x0n = x0.norm();
        let phase = if x0n > T::zero() {
            x0 / Cx::new(x0n, T::zero())
        } else {
            Cx::one()
        };
        let alpha = -phase * norm;
        let mut v: Vec<Cx<T>> = x.to_vec();
        v[0] -= alpha;
        let vn = v.iter().map(|&z| abs2(z)).sum::<T>().sqrt();
        if vn <= T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let inv = T::one() / vn;
        for z in v.iter_mut() {
            *z *= inv;
        }
        colk[k] = alpha;
        for z in colk[k + 1..].iter_mut() {
            *z = Cx::zero();
        }
        for j in (k + 1)..cols {
            let cj = &mut tail[(j - k - 1) * rows + k..(j - k) * rows];
            let s: Cx<T> = v
                .iter()
                .zip(cj.iter())
                .fold(Cx::zero(), |acc, (&vi, &ci)| acc + vi.conj() * ci);
            let s2: Cx<T> = s * two;
            for (ci, &vi) in cj.iter_mut().zip(v.iter()) {
                *ci -= vi * s2;
            }
        }
        reflectors.push(v);
    }
    let r = Array2::from_shape_fn((cols, cols), |(i, j)| if i <= j { a[j * rows + i] } else { Cx::zero() });
    drop(a);

    let jac = jacobi_svd(r.view());
    let smax = jac.sv.first().copied().unwrap_or(T::zero());
    let cutoff = tol * smax;
    let rank = jac.sv.iter().take_while(|&&s| s > cutoff && s > T::zero()).count();

    // Z = Q [ (R^+)^H ; 0 ],  (R^+)^H = U S^+ V^H
    let mut z: Vec<Cx<T>> = vec![Cx::zero(); rows * cols];
    for c in 0..cols {
        let zc = &mut z[c * rows..c * rows + cols];
        for k in 0..rank {
            let w = Cx::new(T::one() / jac.sv[k], T::zero()) * jac.v[[c, k]].conj();
            for (i, zi) in zc.iter_mut().enumerate() {
                *zi += jac.u[[i, k]] * w;
            }
        }
    }
    for k in (0..cols).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for c in 0..cols {
            let zc = &mut z[c * rows + k..(c + 1) * rows];
            let s: Cx<T> = v
                .iter()
                .zip(zc.iter())
                .fold(Cx::zero(), |acc, (&vi, &zi)| acc + vi.conj() * zi);
            let s2: Cx<T> = s * two;
            for (zi, &vi) in zc.iter_mut().zip(v.iter()) {
                *zi -= vi * s2;
            }
        }
    }
    let pinv = Array2::from_shape_fn((cols, rows), |(i, j)| z[i * rows + j].conj());
    Pseudoinverse {
        pinv,
        singular_values: jac.sv,
        rank,
        right_vectors: jac.v,
    }
}

#[cfg(test)]
pub(crate) fn cx<T: Real>(re: f64, im: f64) -> Cx<T> {
    num_complex::Complex::new(T::lit(re), T::lit(im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<Cx<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| {
            Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn identity_is_its_own_pseudoinverse() {
        let eye = Array2::from_shape_fn((5, 5), |(i, j)| if i == j { cx::<f64>(1.0, 0.0) } else { cx(0.0, 0.0) });
        let p = pseudoinverse(eye.view(), 1e-10).unwrap();
        for ((i, j), z) in p.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((z.re - want).abs() < 1e-14 && z.im.abs() < 1e-14);
        }
    }

    #[test]
    fn column_of_ones_gives_half_row() {
        let m = Array2::from_elem((2, 1), cx::<f64>(1.0, 0.0));
        let p = pseudoinverse(m.view(), 1e-10).unwrap();
        assert_eq!(p.dim(), (1, 2));
        for z in p.iter() {
            assert!((z.re - 0.5).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn full_column_rank_left_inverse() {
        let m = random_matrix(8, 4, 7);
        let p = pseudoinverse(m.view(), 1e-10).unwrap();
        let pm = matmul(p.view(), m.view());
        let mut dev: f64 = 0.0;
        for ((i, j), z) in pm.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((z - cx(want, 0.0)).norm());
        }
        assert!(dev < 1e-10, "||P M - I|| = {dev}");
    }

    #[test]
    fn penrose_identities_on_rank_deficient_input() {
        // rank 2 product of 9x2 and 2x5 factors
        let a = random_matrix(9, 2, 1);
        let b = random_matrix(2, 5, 2);
        let m = matmul(a.view(), b.view());
        let full = pseudoinverse_full(m.view(), 1e-10).unwrap();
        assert_eq!(full.rank, 2);
        for r in moore_penrose_residuals(m.view(), full.pinv.view()) {
            assert!(r < 1e-10, "residual {r}");
        }
    }

    #[test]
    fn wide_matrix_matches_transpose_route() {
        let m = random_matrix(3, 7, 11);
        let p = pseudoinverse(m.view(), 1e-10).unwrap();
        assert_eq!(p.dim(), (7, 3));
        for r in moore_penrose_residuals(m.view(), p.view()) {
            assert!(r < 1e-10, "residual {r}");
        }
    }

    #[test]
    fn gram_matches_explicit_product() {
        let m = random_matrix(12, 5, 3);
        let full = pseudoinverse_full(m.view(), 1e-10).unwrap();
        let explicit = matmul(full.pinv.view(), conj_transpose(full.pinv.view()).view());
        let g = full.gram();
        let d = frobenius_norm((&g - &explicit).view()) / frobenius_norm(explicit.view());
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn single_precision_pinv() {
        let m = random_matrix(10, 3, 5).mapv(|z| Complex::new(z.re as f32, z.im as f32));
        let p = pseudoinverse(m.view(), 1e-5f32).unwrap();
        for r in moore_penrose_residuals(m.view(), p.view()) {
            assert!(r < 1e-4, "residual {r}");
        }
    }

    #[test]
    fn empty_matrix_rejected() {
        let m = Array2::<Cx<f64>>::zeros((0, 3));
        assert!(pseudoinverse(m.view(), 1e-10).is_err());
    }
}
