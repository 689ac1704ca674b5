use mmtrust_core::stats::{paired_t, student_t_cdf, welch_t, Alternative};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mean = rng.random_range(-2.0..2.0);
    let sd = rng.random_range(0.2..3.0);
    (0..n).map(|_| mean + sd * (rng.random::<f64>() - 0.5) * 3.46).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn reference_p(t: f64, df: f64, alternative: Alternative) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    match alternative {
        Alternative::TwoSided => 2.0 * dist.cdf(-t.abs()),
        Alternative::Greater => 1.0 - dist.cdf(t),
        Alternative::Less => dist.cdf(t),
    }
}

#[test]
fn t_tests_match_reference_implementation() {
    let alternatives = [Alternative::TwoSided, Alternative::Greater, Alternative::Less];
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let na = rng.random_range(3..40);
        let nb = rng.random_range(3..40);
        let a = sample(&mut rng, na);
        let b = sample(&mut rng, nb);
        let alternative = alternatives[seed as usize % 3];

        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let (sa, sb) = (va / na as f64, vb / nb as f64);
        let t = (ma - mb) / (sa + sb).sqrt();
        let df = (sa + sb).powi(2) / (sa * sa / (na as f64 - 1.0) + sb * sb / (nb as f64 - 1.0));
        let r = welch_t(&a, &b, alternative).unwrap();
        assert!((r.t - t).abs() < 1e-6, "seed {seed}");
        assert!((r.df - df).abs() < 1e-6, "seed {seed}");
        assert!((r.p_value - reference_p(t, df, alternative)).abs() < 1e-4, "seed {seed}");

        let n = na.min(nb);
        let diffs: Vec<f64> = a[..n].iter().zip(&b[..n]).map(|(x, y)| y - x).collect();
        let (md, vd) = mean_var(&diffs);
        let t = md / (vd / n as f64).sqrt();
        let r = paired_t(&a[..n], &b[..n], alternative).unwrap();
        assert!((r.t - t).abs() < 1e-6, "seed {seed}");
        assert_eq!(r.df, n as f64 - 1.0);
        assert!((r.p_value - reference_p(t, n as f64 - 1.0, alternative)).abs() < 1e-4, "seed {seed}");
    }
}

#[test]
fn t_cdf_is_accurate_against_reference() {
    for df in [1.0, 2.5, 7.0, 30.0, 200.0] {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for t in [-8.0, -2.0, -0.3, 0.0, 0.9, 3.1, 12.0] {
            let want = dist.cdf(t);
            let got = student_t_cdf(t, df);
            assert!((got - want).abs() <= 1e-8 * want.max(1e-300) + 1e-15, "df {df} t {t}: {got} vs {want}");
        }
    }
}

#[test]
fn t_cdf_matches_monte_carlo() {
    let df = 5.0;
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dist = StudentT::new(df).unwrap();
    let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    for q in [-2.0, -0.5, 0.0, 1.0, 2.5] {
        let empirical = draws.iter().filter(|x| **x <= q).count() as f64 / n as f64;
        let p = student_t_cdf(q, df);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((empirical - p).abs() < 3.0 * se, "q {q}: {empirical} vs {p}");
    }
}
