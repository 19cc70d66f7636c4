//! Small dense complex eigenproblems (3×3, 4×4).
//!
//! Eigenvalues come from nalgebra's complex Schur decomposition after a
//! diagonal similarity balancing; eigenvectors from inverse iteration.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Diagonal similarity scaling (Parlett–Reinsch, powers of two) so that row
/// and column norms are comparable. Returns the balanced matrix and scaling.
pub fn balance(m: &CMat) -> (CMat, Vec<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut scale = vec![1.0; n];
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].norm();
                    r += a[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                scale[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    (a, scale)
}

/// All eigenvalues, sorted by ascending real part (ties by imaginary part).
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let (b, _) = balance(m);
    let schur =
        Schur::try_new(b, 1e-15, 10_000).ok_or_else(|| Error::Domain("Schur iteration did not converge".into()))?;
    let ev = schur.eigenvalues().ok_or_else(|| Error::Domain("Schur form not triangular".into()))?;
    let mut v: Vec<Complex64> = ev.iter().copied().collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(v)
}

/// Eigenvector for a (computed) eigenvalue, normalized to sup-norm 1 with its
/// largest entry real positive.
pub fn eigenvector(m: &CMat, lambda: Complex64) -> Result<CVec> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let a = m - CMat::identity(n, n) * shift;
    let lu = a.lu();
    let mut x = CVec::from_fn(n, |i, _| Complex64::new(1.0, 0.1 * (i as f64 + 1.0)));
    for _ in 0..4 {
        x = lu.solve(&x).ok_or_else(|| Error::Domain("singular inverse iteration".into()))?;
        normalize_sup(&mut x);
    }
    Ok(x)
}

pub fn normalize_sup(x: &mut CVec) {
    let (imax, _) =
        x.iter().enumerate().fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let piv = x[imax];
    if piv.norm() > 0.0 {
        *x /= piv;
    }
}

/// Eigenpairs sorted by ascending real part.
pub fn eigenpairs(m: &CMat) -> Result<Vec<(Complex64, CVec)>> {
    eigenvalues(m)?.into_iter().map(|l| Ok((l, eigenvector(m, l)?))).collect()
}

/// Coefficients of `det(mu I - M)`, highest power first (Faddeev–LeVerrier).
pub fn char_poly(m: &CMat) -> Vec<Complex64> {
    let n = m.nrows();
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    let mut mk = CMat::zeros(n, n);
    let id = CMat::identity(n, n);
    let mut c = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        mk = m * (&mk + &id * c);
        c = -mk.trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

pub fn poly_eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}
