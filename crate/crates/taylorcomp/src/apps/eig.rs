//! Eigenvalues of general (nonsymmetric) real matrices, for closed-loop
//! stability checks: Hessenberg reduction by Householder reflectors followed
//! by the implicit double-shift QR iteration with deflation. Matrices here
//! are small (tens of rows), so no balancing or blocking is attempted.

use crate::linalg::{LinalgError, Matrix};
use crate::scalar::Scalar;

/// Reduce to upper Hessenberg form in place (similarity transform).
fn hessenberg<T: Scalar>(a: &mut Matrix<T>) {
    let n = a.rows();
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k below the subdiagonal
        let mut alpha = T::zero();
        for i in k + 1..n {
            alpha = alpha + a[(i, k)] * a[(i, k)];
        }
        alpha = alpha.sqrt();
        if alpha == T::zero() {
            continue;
        }
        if a[(k + 1, k)] > T::zero() {
            alpha = -alpha;
        }
        let mut v = vec![T::zero(); n];
        v[k + 1] = a[(k + 1, k)] - alpha;
        for i in k + 2..n {
            v[i] = a[(i, k)];
        }
        let vnorm2: T = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::of(2.0);
        // A ← (I − 2vvᵀ/‖v‖²) A
        for j in 0..n {
            let mut s = T::zero();
            for i in k + 1..n {
                s = s + v[i] * a[(i, j)];
            }
            let f = two * s / vnorm2;
            for i in k + 1..n {
                a[(i, j)] = a[(i, j)] - f * v[i];
            }
        }
        // A ← A (I − 2vvᵀ/‖v‖²)
        for i in 0..n {
            let mut s = T::zero();
            for j in k + 1..n {
                s = s + a[(i, j)] * v[j];
            }
            let f = two * s / vnorm2;
            for j in k + 1..n {
                a[(i, j)] = a[(i, j)] - f * v[j];
            }
        }
        // enforce the exact zeros
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = T::zero();
        }
    }
}

fn two_by_two_eigs<T: Scalar>(a: T, b: T, c: T, d: T) -> [(T, T); 2] {
    let half = T::of(0.5);
    let tr = (a + d) * half;
    let det = a * d - b * c;
    let disc = tr * tr - det;
    if disc >= T::zero() {
        let s = disc.sqrt();
        [(tr + s, T::zero()), (tr - s, T::zero())]
    } else {
        let s = (-disc).sqrt();
        [(tr, s), (tr, -s)]
    }
}

/// Eigenvalues of a general real square matrix as `(re, im)` pairs, in no
/// particular order.
pub fn eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<(T, T)>, LinalgError> {
    assert!(a.is_square(), "eigenvalues of a square matrix only");
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![(a[(0, 0)], T::zero())]);
    }
    let mut h = a.clone();
    hessenberg(&mut h);

    let eps = T::epsilon();
    let tiny = T::of(1e-300);
    let mut eigs: Vec<(T, T)> = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut its_total = 0usize;
    let max_total = 60 * n;

    'outer: loop {
        // deflate negligible subdiagonals
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].abs() + h[(lo, lo)].abs();
            let s = if s == T::zero() { T::one() } else { s };
            if h[(lo, lo - 1)].abs() <= eps * s + tiny {
                h[(lo, lo - 1)] = T::zero();
                break;
            }
            lo -= 1;
        }

        if lo == hi {
            // 1x1 block
            eigs.push((h[(hi, hi)], T::zero()));
            if hi == 0 {
                break 'outer;
            }
            hi -= 1;
            continue;
        }
        if lo + 1 == hi {
            // 2x2 block
            let block =
                two_by_two_eigs(h[(lo, lo)], h[(lo, hi)], h[(hi, lo)], h[(hi, hi)]);
            eigs.extend_from_slice(&block);
            if lo == 0 {
                break 'outer;
            }
            hi = lo - 1;
            continue;
        }

        its_total += 1;
        if its_total > max_total {
            return Err(LinalgError::NoConvergence { kernel: "francis qr", iterations: max_total });
        }

        // shift from the trailing 2x2; exceptional shift every 10 sweeps
        let (h11, h12, h21, h22) = if its_total % 11 == 10 {
            let s = h[(hi, hi - 1)].abs() + h[(hi - 1, hi - 2)].abs();
            (T::of(0.75) * s + h[(hi, hi)], T::of(-0.4375) * s, s, T::of(0.75) * s + h[(hi, hi)])
        } else {
            (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        let shift_sum = h11 + h22;
        let shift_prod = h11 * h22 - h12 * h21;

        // first column of (H − aI)(H − bI) in the active window
        let mut x = h[(lo, lo)] * h[(lo, lo)] + h[(lo, lo + 1)] * h[(lo + 1, lo)]
            - shift_sum * h[(lo, lo)]
            + shift_prod;
        let mut y = h[(lo + 1, lo)] * (h[(lo, lo)] + h[(lo + 1, lo + 1)] - shift_sum);
        let mut z = if lo + 2 <= hi { h[(lo + 2, lo + 1)] * h[(lo + 1, lo)] } else { T::zero() };

        // bulge chase: 3-wide reflectors, ending with a 2-wide one at hi−1
        for k in lo..hi {
            let last = (k + 3).min(hi + 1); // reflector touches rows k..last-1
            let m = last - k;
            let mut v = [x, y, z];
            if m == 2 {
                v[2] = T::zero();
            }
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if norm > tiny {
                let alpha = if v[0] >= T::zero() { -norm } else { norm };
                v[0] = v[0] - alpha;
                let vnorm2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                if vnorm2 > tiny {
                    let two = T::of(2.0);
                    // left: rows k..last-1, columns from k-1 (bulge) to hi
                    let c0 = k.saturating_sub(1).max(lo);
                    for j in c0..=hi {
                        let mut s = T::zero();
                        for (t, vi) in v.iter().enumerate().take(m) {
                            s = s + *vi * h[(k + t, j)];
                        }
                        let f = two * s / vnorm2;
                        for (t, vi) in v.iter().enumerate().take(m) {
                            h[(k + t, j)] = h[(k + t, j)] - f * *vi;
                        }
                    }
                    // right: columns k..last-1, rows lo..min(k+4, hi)
                    let r1 = (k + 4).min(hi + 1);
                    for i in lo..r1 {
                        let mut s = T::zero();
                        for (t, vi) in v.iter().enumerate().take(m) {
                            s = s + h[(i, k + t)] * *vi;
                        }
                        let f = two * s / vnorm2;
                        for (t, vi) in v.iter().enumerate().take(m) {
                            h[(i, k + t)] = h[(i, k + t)] - f * *vi;
                        }
                    }
                }
            }
            // next bulge column
            if k + 2 <= hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
                z = if k + 3 <= hi { h[(k + 3, k)] } else { T::zero() };
            }
        }
        // clean entries that should be zero below the first subdiagonal
        for i in lo + 2..=hi {
            for j in lo..i - 1 {
                h[(i, j)] = T::zero();
            }
        }
    }

    Ok(eigs)
}

/// Spectral abscissa `max_i Re λ_i(A)`; negative means the matrix is Hurwitz
/// stable.
pub fn spectral_abscissa<T: Scalar>(a: &Matrix<T>) -> Result<T, LinalgError> {
    let eigs = eigenvalues(a)?;
    Ok(eigs.into_iter().map(|(re, _)| re).fold(T::neg_infinity(), |acc, re| acc.max(re)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eigen, SymMatrix};

    #[test]
    fn trivial_cases() {
        let neg_id = Matrix::<f64>::identity(3).scale(-1.0);
        assert!((spectral_abscissa(&neg_id).unwrap() + 1.0).abs() < 1e-12);

        let nilpotent = Matrix::from_rows(2, 2, vec![0.0f64, 1.0, 0.0, 0.0]);
        assert!(spectral_abscissa(&nilpotent).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rotation_block_has_complex_pair() {
        // [[0, 1], [-1, 0]] has eigenvalues ±i
        let rot = Matrix::from_rows(2, 2, vec![0.0f64, 1.0, -1.0, 0.0]);
        let eigs = eigenvalues(&rot).unwrap();
        assert_eq!(eigs.len(), 2);
        for (re, im) in eigs {
            assert!(re.abs() < 1e-12);
            assert!((im.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn companion_matrix_known_roots() {
        // p(x) = (x − 1)(x + 2)(x − 3) = x³ − 2x² − 5x + 6
        // companion (roots 1, −2, 3)
        let c = Matrix::from_rows(3, 3, vec![2.0, 5.0, -6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let mut re: Vec<f64> = eigenvalues(&c).unwrap().into_iter().map(|(r, _)| r).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-2.0, 1.0, 3.0];
        for (r, e) in re.iter().zip(&expect) {
            assert!((r - e).abs() < 1e-9, "root {r} vs {e}");
        }
    }

    #[test]
    fn agrees_with_jacobi_on_symmetric_input() {
        let mut state = 0xc0ffee_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for trial in 0..5 {
            let n = 4 + trial;
            let raw = Matrix::from_fn(n, n, |_, _| next());
            let sym = SymMatrix::new(raw);
            let jac = sym_eigen(&sym).unwrap();
            let mut francis: Vec<f64> =
                eigenvalues(sym.as_matrix()).unwrap().into_iter().map(|(r, _)| r).collect();
            francis.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (f, j) in francis.iter().zip(&jac.eigenvalues) {
                assert!((f - j).abs() < 1e-8 * (1.0 + j.abs()), "francis {f} vs jacobi {j}");
            }
        }
    }

    #[test]
    fn larger_random_matrix_spectrum_sums_to_trace() {
        let mut state = 0xabcdef_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let n = 24;
        let a = Matrix::from_fn(n, n, |_, _| next());
        let eigs = eigenvalues(&a).unwrap();
        assert_eq!(eigs.len(), n);
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let re_sum: f64 = eigs.iter().map(|(r, _)| r).sum();
        let im_sum: f64 = eigs.iter().map(|(_, i)| i).sum();
        assert!((re_sum - trace).abs() < 1e-7 * (1.0 + trace.abs()), "{re_sum} vs {trace}");
        assert!(im_sum.abs() < 1e-7);
    }
}
