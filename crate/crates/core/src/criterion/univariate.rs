//! Real univariate polynomials: roots, division, resultants.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

/// Coefficients in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct UniPoly {
    pub c: Vec<f64>,
}

impl UniPoly {
    pub fn new(mut c: Vec<f64>) -> UniPoly {
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        UniPoly { c }
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.c.last().unwrap()
    }

    pub fn norm1(&self) -> f64 {
        self.c.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        self.c.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &k| acc * z + k)
    }

    /// `Σ |c_k| |x|^k`, the natural scale of `p(x)`.
    pub fn magnitude(&self, r: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &k| acc * r + k.abs())
    }

    /// `|p(z)| / Σ |c_k| |z|^k`.
    pub fn relative_residual(&self, z: Complex<f64>) -> f64 {
        let scale = self.magnitude(z.norm());
        if scale == 0.0 {
            return 0.0;
        }
        self.eval_complex(z).norm() / scale
    }

    pub fn derivative(&self) -> UniPoly {
        if self.c.len() == 1 {
            return UniPoly::new(vec![0.0]);
        }
        UniPoly::new(self.c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect())
    }

    pub fn monic(&self) -> UniPoly {
        let l = self.leading();
        UniPoly { c: self.c.iter().map(|v| v / l).collect() }
    }

    pub fn mul(&self, o: &UniPoly) -> UniPoly {
        let mut c = vec![0.0; self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        UniPoly::new(c)
    }

    /// Quotient and remainder.
    pub fn div_rem(&self, d: &UniPoly) -> (UniPoly, UniPoly) {
        let n = self.degree();
        let m = d.degree();
        if n < m {
            return (UniPoly::new(vec![0.0]), self.clone());
        }
        let mut r = self.c.clone();
        let mut qc = vec![0.0; n - m + 1];
        let lead = d.leading();
        for k in (0..=n - m).rev() {
            let t = r[k + m] / lead;
            qc[k] = t;
            for (j, dj) in d.c.iter().enumerate() {
                r[k + j] -= t * dj;
            }
        }
        r.truncate(m.max(1));
        (UniPoly::new(qc), UniPoly::new(r))
    }

    /// All complex roots: companion eigenvalues on a rescaled variable, then Newton polish.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let n = self.degree();
        if n == 0 {
            return vec![];
        }
        let p = self.monic();
        // Cauchy-type scale so that the rescaled coefficients are O(1)
        if p.c.iter().any(|v| !v.is_finite()) {
            return vec![Complex::new(f64::NAN, f64::NAN); n];
        }
        let s = (0..n).map(|k| p.c[k].abs().powf(1.0 / (n - k) as f64)).fold(0.0f64, f64::max);
        let s = if s > 1e-100 && s < 1e100 { s } else { 1.0 };
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for k in 0..n {
            comp[(k, n - 1)] = -p.c[k] / s.powi((n - k) as i32);
        }
        let eig: Vec<Complex<f64>> = match Schur::try_new(comp, 1e-15, 2000) {
            Some(schur) => schur.complex_eigenvalues().iter().map(|z| z * s).collect(),
            None => aberth(&p),
        };
        let dp = p.derivative();
        eig.into_iter()
            .map(|mut z| {
                for _ in 0..4 {
                    let f = p.eval_complex(z);
                    let g = dp.eval_complex(z);
                    if g.norm() == 0.0 {
                        break;
                    }
                    let step = f / g;
                    if !(step.norm() < 1e-2 * (1.0 + z.norm())) {
                        break;
                    }
                    z -= step;
                }
                z
            })
            .collect()
    }

    /// Real roots, those with imaginary part below `tol·(1 + |z|)`, sorted.
    pub fn real_roots(&self, tol: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.roots().into_iter().filter(|z| z.im.abs() <= tol * (1.0 + z.norm())).map(|z| z.re).collect();
        r.sort_by(f64::total_cmp);
        r
    }
}

/// Simultaneous Aberth–Ehrlich iteration for a monic polynomial.
fn aberth(p: &UniPoly) -> Vec<Complex<f64>> {
    let n = p.degree();
    let dp = p.derivative();
    let radius = 1.0 + p.c[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut z: Vec<Complex<f64>> =
        (0..n).map(|k| Complex::from_polar(radius.min(1e3) * 0.5, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let ratio = p.eval_complex(z[i]) / dp.eval_complex(z[i]);
            let repulse: Complex<f64> = (0..n).filter(|&j| j != i).map(|j| Complex::new(1.0, 0.0) / (z[i] - z[j])).sum();
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulse);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    z
}

/// Sylvester matrix of `a` (degree n) and `b` (degree m), size `(n+m)²`.
pub fn sylvester(a: &UniPoly, b: &UniPoly) -> DMatrix<f64> {
    let n = a.degree();
    let m = b.degree();
    let size = n + m;
    let mut s = DMatrix::<f64>::zeros(size, size);
    for i in 0..m {
        for k in 0..=n {
            s[(i, i + k)] = a.c[n - k];
        }
    }
    for i in 0..n {
        for k in 0..=m {
            s[(m + i, i + k)] = b.c[m - k];
        }
    }
    s
}

/// `Res(a, b)` as a Sylvester determinant (LU with partial pivoting).
pub fn resultant(a: &UniPoly, b: &UniPoly) -> f64 {
    if a.degree() + b.degree() == 0 {
        return 1.0;
    }
    sylvester(a, b).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(rs: &[f64]) -> UniPoly {
        rs.iter().fold(UniPoly::new(vec![1.0]), |p, r| p.mul(&UniPoly::new(vec![-r, 1.0])))
    }

    #[test]
    fn roots_of_products() {
        let p = from_roots(&[-3.0, 0.5, 2.0, 1e-3]).mul(&UniPoly::new(vec![1.0, 0.0, 1.0]));
        let r = p.real_roots(1e-8);
        assert_eq!(r.len(), 4);
        for (a, b) in r.iter().zip([-3.0, 1e-3, 0.5, 2.0]) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
        // all roots at zero
        let r = from_roots(&[0.0, 0.0, 0.0]).roots();
        assert!(r.iter().all(|z| z.norm() < 1e-12));
        // badly scaled coefficients
        let p = from_roots(&[1e4, -2e4, 3.0]).mul(&UniPoly::new(vec![5400.0]));
        let r = p.real_roots(1e-8);
        assert!((r[0] + 2e4).abs() < 1e-7 && (r[1] - 3.0).abs() < 1e-12 && (r[2] - 1e4).abs() < 1e-8);
    }

    #[test]
    fn symmetric_quartic() {
        let p = UniPoly::new(vec![56.054069144497966, 0.0, 45.219628791602176, 0.0, 85.64323634773123]);
        let r = p.roots();
        assert_eq!(r.len(), 4);
        for z in &r {
            assert!(p.relative_residual(*z) < 1e-14);
        }
        let a = aberth(&p.monic());
        for z in &a {
            assert!(p.relative_residual(*z) < 1e-14);
        }
    }

    #[test]
    fn division() {
        let a = from_roots(&[1.0, 2.0, 3.0]);
        let (q, r) = a.div_rem(&from_roots(&[2.0]));
        assert!(r.max_abs() < 1e-14);
        assert_eq!(q, from_roots(&[1.0, 3.0]));
        let (_, r) = a.div_rem(&from_roots(&[0.0]));
        assert!((r.c[0] + 6.0).abs() < 1e-14);
    }

    #[test]
    fn resultant_two_routes() {
        // Res(a, b) = lc(a)^m Π b(r_i) over roots of a
        let a = from_roots(&[0.3, -1.2, 2.5]).mul(&UniPoly::new(vec![2.0]));
        let b = UniPoly::new(vec![1.0, -2.0, 0.5, 3.0]);
        let prod: f64 = [0.3, -1.2, 2.5].iter().map(|&r| b.eval(r)).product();
        let expect = 2.0f64.powi(3) * prod;
        let got = resultant(&a, &b);
        assert!((got - expect).abs() < 1e-12 * expect.abs(), "{got} {expect}");
        // common root
        let c = from_roots(&[0.3, 7.0]);
        assert!(resultant(&a, &c).abs() < 1e-12);
    }
}
