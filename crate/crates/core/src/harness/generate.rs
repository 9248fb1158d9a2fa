//! Data generators for the three simulation designs.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::data::{Column, Dataset};
use crate::scalar::Scalar;
use crate::stats::logistic;

fn uniform_pm3<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let u = Uniform::new(-3.0, 3.0).expect("finite bounds");
    (0..n).map(|_| u.sample(rng)).collect()
}

fn quadratic_outcome<R: Rng + ?Sized>(rng: &mut R, x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let e: f64 = StandardNormal.sample(rng);
            v + v * v + e
        })
        .collect()
}

fn continuous<S: Scalar>(name: &str, v: &[f64]) -> Column<S> {
    Column::continuous(name, v.iter().map(|&a| S::of(a)).collect()).expect("finite values")
}

fn build<S: Scalar>(columns: Vec<Column<S>>) -> Dataset<S> {
    Dataset::new(columns).expect("columns share one length")
}

/// `x ~ U(−3, 3)`, `x2 = x²`, `y = x + x² + N(0, 1)`.
pub fn gen_scenario1<S: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dataset<S> {
    let x = uniform_pm3(rng, n);
    let y = quadratic_outcome(rng, &x);
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    build(vec![continuous("x", &x), continuous("x2", &x2), continuous("y", &y)])
}

/// `x ~ N(0, 1)`, `x2 = x²`, `y = x + x² + N(0, 1)`.
pub fn gen_scenario2<S: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dataset<S> {
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let y = quadratic_outcome(rng, &x);
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    build(vec![continuous("x", &x), continuous("x2", &x2), continuous("y", &y)])
}

/// `x ~ U(−3, 3)`, `z ~ N(1, 1)`, binary `y ~ Bernoulli(logistic(x + z))`.
pub fn gen_scenario3<S: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dataset<S> {
    let x = uniform_pm3(rng, n);
    let normal = Normal::new(1.0, 1.0).expect("unit sd");
    let z: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
    let y: Vec<S> = x
        .iter()
        .zip(&z)
        .map(|(&a, &b)| if rng.random::<f64>() < logistic(a + b) { S::one() } else { S::zero() })
        .collect();
    build(vec![
        continuous("x", &x),
        continuous("z", &z),
        Column::binary("y", y).expect("0/1 values"),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn col(d: &Dataset<f64>, name: &str) -> Vec<f64> {
        d.column(name).unwrap().values().to_vec()
    }

    #[test]
    fn scenario1_shape_and_range() {
        let d: Dataset<f64> = gen_scenario1(5000, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(d.names().collect::<Vec<_>>(), ["x", "x2", "y"]);
        let x = col(&d, "x");
        assert!(x.iter().all(|v| (-3.0..3.0).contains(v)));
        assert!(col(&d, "x2").iter().zip(&x).all(|(a, b)| *a == b * b));
    }

    #[test]
    fn scenario1_residual_variance_is_one() {
        let d: Dataset<f64> = gen_scenario1(1_000_000, &mut ChaCha8Rng::seed_from_u64(2));
        let (x, y) = (col(&d, "x"), col(&d, "y"));
        let r: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - a - a * a).collect();
        assert!((crate::stats::sample_variance(&r) - 1.0).abs() < 0.02);
        // E[y | x ≈ 0] = 0.
        let near: Vec<f64> = x.iter().zip(&y).filter(|(a, _)| a.abs() < 0.05).map(|(_, b)| *b).collect();
        assert!(crate::stats::mean(&near).abs() < 0.05);
    }

    #[test]
    fn scenario2_moments() {
        let d: Dataset<f64> = gen_scenario2(1_000_000, &mut ChaCha8Rng::seed_from_u64(3));
        let (x, y) = (col(&d, "x"), col(&d, "y"));
        assert!(crate::stats::mean(&x).abs() < 0.01);
        assert!(col(&d, "x2").iter().zip(&x).all(|(a, b)| *a == b * b));
        let r: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - a - a * a).collect();
        assert!((crate::stats::sample_variance(&r) - 1.0).abs() < 0.02);
    }

    #[test]
    fn scenario3_symmetry_and_prevalence() {
        let d: Dataset<f64> = gen_scenario3(1_000_000, &mut ChaCha8Rng::seed_from_u64(4));
        let (x, z, y) = (col(&d, "x"), col(&d, "z"), col(&d, "y"));
        assert!((crate::stats::mean(&z) - 1.0).abs() < 0.01);
        let near: Vec<f64> =
            (0..x.len()).filter(|&i| (x[i] + z[i]).abs() < 0.05).map(|i| y[i]).collect();
        assert!((crate::stats::mean(&near) - 0.5).abs() < 0.02);

        // P(y = 1) by midpoint quadrature over x ∈ (−3, 3) and z ∈ 1 ± 8.
        let (nx, nz) = (600, 1600);
        let (hx, hz) = (6.0 / nx as f64, 16.0 / nz as f64);
        let mut p = 0.0;
        for i in 0..nx {
            let xv = -3.0 + (i as f64 + 0.5) * hx;
            for j in 0..nz {
                let zv = -7.0 + (j as f64 + 0.5) * hz;
                let dens = (-0.5 * (zv - 1.0).powi(2)).exp() / (2.0 * std::f64::consts::PI).sqrt();
                p += logistic(xv + zv) * dens * hx * hz / 6.0;
            }
        }
        assert!((crate::stats::mean(&y) - p).abs() < 0.01, "{} vs {p}", crate::stats::mean(&y));
    }
}
