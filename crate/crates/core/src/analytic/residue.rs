//! Inverse Laplace transforms of proper rational functions by residues.
//!
//! The transform is `N(s) / prod_k (s - p_k)^{m_k}` with a monic
//! denominator. Residues at poles of any multiplicity come out of a
//! truncated Taylor expansion around the pole.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Polynomial with ascending complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn real(coeffs: &[f64]) -> Self {
        Poly(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![Complex64::new(0.0, 0.0); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let zero = Complex64::new(0.0, 0.0);
        Poly((0..n).map(|i| *self.0.get(i).unwrap_or(&zero) + *o.0.get(i).unwrap_or(&zero)).collect())
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly(self.0.iter().map(|a| a * c).collect())
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c)
    }

    /// First `n` Taylor coefficients around `p`: `N(p + h) = sum_k c_k h^k`.
    pub fn taylor(&self, p: Complex64, n: usize) -> Vec<Complex64> {
        let mut c = self.0.clone();
        let deg = c.len();
        // Repeated synthetic division (Taylor shift).
        for k in 0..deg {
            for j in (k..deg - 1).rev() {
                let next = c[j + 1];
                c[j] += p * next;
            }
        }
        c.resize(n.max(deg), Complex64::new(0.0, 0.0));
        c.truncate(n);
        c
    }
}

fn series_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Residue of `N(s) e^{st} / prod (s - p_k)^{m_k}` at `poles[idx]`.
pub fn residue(numer: &Poly, poles: &[Pole], idx: usize, t: f64) -> Complex64 {
    let Pole { value: p, multiplicity: m } = poles[idx];
    let mut series = numer.taylor(p, m);

    let ept = (p * t).exp();
    let mut exp_series = Vec::with_capacity(m);
    let mut term = ept;
    for j in 0..m {
        exp_series.push(term);
        term = term * t / (j + 1) as f64;
    }
    series = series_mul(&series, &exp_series);

    for (k, q) in poles.iter().enumerate() {
        if k == idx {
            continue;
        }
        // (d + h)^{-mq} = d^{-mq} sum_j binom(-mq, j) (h/d)^j
        let d = p - q.value;
        let inv_d = d.inv();
        let mq = q.multiplicity as f64;
        let mut f = Vec::with_capacity(m);
        let mut coef = inv_d.powi(q.multiplicity as i32);
        for j in 0..m {
            f.push(coef);
            coef = coef * (-(mq + j as f64) / (j + 1) as f64) * inv_d;
        }
        series = series_mul(&series, &f);
    }
    series[m - 1]
}

/// Sum of residues: the inverse Laplace transform at time `t`.
pub fn inverse_laplace(numer: &Poly, poles: &[Pole], t: f64) -> Complex64 {
    (0..poles.len()).map(|i| residue(numer, poles, i, t)).sum()
}

/// Merges roots closer than `tol` into poles with multiplicity.
pub fn group_roots(roots: &[Complex64], tol: f64) -> Vec<Pole> {
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        match groups.iter_mut().find(|(c, n)| (*c / *n as f64 - r).norm() <= tol) {
            Some((sum, n)) => {
                *sum += r;
                *n += 1;
            }
            None => groups.push((r, 1)),
        }
    }
    groups.into_iter().map(|(sum, n)| Pole { value: sum / n as f64, multiplicity: n }).collect()
}

/// Smallest distance between two distinct poles (infinity for fewer than two).
pub fn min_separation(poles: &[Pole]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            best = best.min((poles[i].value - poles[j].value).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn taylor_shift() {
        // (s)^2 at p = 3: 9 + 6h + h^2.
        let p = Poly::real(&[0.0, 0.0, 1.0]);
        assert_eq!(p.taylor(c(3.0), 3), vec![c(9.0), c(6.0), c(1.0)]);
        assert_eq!(p.taylor(c(3.0), 1), vec![c(9.0)]);
        assert_eq!(p.taylor(c(3.0), 5)[3], c(0.0));
    }

    #[test]
    fn simple_poles() {
        // 1/(s (s + a)) -> (1 - e^{-a t}) / a
        let a = 0.7;
        let poles = [Pole { value: c(0.0), multiplicity: 1 }, Pole { value: c(-a), multiplicity: 1 }];
        for t in [0.0, 0.5, 3.0] {
            let v = inverse_laplace(&Poly::real(&[1.0]), &poles, t);
            assert!((v.re - (1.0 - (-a * t).exp()) / a).abs() < 1e-14);
            assert!(v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn repeated_pole() {
        // 1/(s+a)^3 -> t^2 e^{-a t} / 2
        let a = 1.3;
        let poles = [Pole { value: c(-a), multiplicity: 3 }];
        for t in [0.0, 0.4, 2.0] {
            let v = inverse_laplace(&Poly::real(&[1.0]), &poles, t);
            assert!((v.re - t * t * (-a * t).exp() / 2.0).abs() < 1e-14);
        }
        // s/(s+a)^2 -> (1 - a t) e^{-a t}
        let poles = [Pole { value: c(-a), multiplicity: 2 }];
        let v = inverse_laplace(&Poly::real(&[0.0, 1.0]), &poles, 0.8);
        assert!((v.re - (1.0 - a * 0.8) * (-a * 0.8f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn mixed_multiplicity() {
        // 1/(s (s+1)^2) -> 1 - e^{-t} - t e^{-t}
        let poles = [Pole { value: c(0.0), multiplicity: 1 }, Pole { value: c(-1.0), multiplicity: 2 }];
        let t = 1.7;
        let v = inverse_laplace(&Poly::real(&[1.0]), &poles, t);
        assert!((v.re - (1.0 - (-t).exp() - t * (-t).exp())).abs() < 1e-14);
    }

    #[test]
    fn complex_pair() {
        // 1/((s+1)^2 + 4) -> e^{-t} sin(2t) / 2
        let poles = [
            Pole { value: Complex64::new(-1.0, 2.0), multiplicity: 1 },
            Pole { value: Complex64::new(-1.0, -2.0), multiplicity: 1 },
        ];
        let t = 0.9;
        let v = inverse_laplace(&Poly::real(&[1.0]), &poles, t);
        assert!((v.re - (-t).exp() * (2.0 * t).sin() / 2.0).abs() < 1e-14);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn grouping() {
        let roots = [c(0.0), c(-1.0), c(-1.0 + 1e-12), c(-2.0), c(-1.0 - 1e-12)];
        let g = group_roots(&roots, 1e-9);
        assert_eq!(g.len(), 3);
        assert_eq!(g.iter().map(|p| p.multiplicity).sum::<usize>(), 5);
        assert_eq!(g[1].multiplicity, 3);
        assert!((min_separation(&g) - 1.0).abs() < 1e-9);
    }
}
