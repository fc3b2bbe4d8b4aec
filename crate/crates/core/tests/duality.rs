use efmix::bregman::{bregman, bregman_natural, kl_divergence, Conjugate};
use efmix::exp_family::{average_log_likelihood, log_density, log_density_bregman, mle, sample};
use efmix::families::*;
use efmix::{ExpFamily, Natural, SampleSet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn gaussian_source(d: usize) -> impl Strategy<Value = GaussianSource> {
    (
        prop::collection::vec(-3.0..3.0f64, d),
        prop::collection::vec(-1.0..1.0f64, d * d),
        0.2..1.5f64,
    )
        .prop_map(move |(mu, a, lift)| {
            let a = DMatrix::from_row_slice(d, d, &a);
            let cov = &a * a.transpose() + DMatrix::identity(d, d) * lift;
            GaussianSource::new(DVector::from_vec(mu), cov).unwrap()
        })
}

/// (family, θ) pairs across every shipped family.
fn any_family() -> impl Strategy<Value = (Family, Natural)> {
    prop_oneof![
        (1usize..=3).prop_flat_map(|d| gaussian_source(d).prop_map(move |s| {
            let g = Gaussian::new(d);
            let theta = g.to_natural(&s).unwrap();
            (Family::Gaussian(g), theta)
        })),
        (0.2..5.0f64).prop_map(|s| (
            Family::Rayleigh(Rayleigh),
            Rayleigh.to_natural(RayleighSource::new(s).unwrap())
        )),
        (0.1..30.0f64).prop_map(|r| (
            Family::Poisson(Poisson),
            Poisson.to_natural(PoissonSource::new(r).unwrap())
        )),
    ]
}

fn scale(v: &[f64]) -> f64 {
    v.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn legendre_involution((fam, theta) in any_family()) {
        let th = theta.as_slice();
        let back = fam.gradient_inverse_at(&fam.gradient_at(th));
        let s = scale(th);
        for (a, b) in back.iter().zip(th) {
            prop_assert!((a - b).abs() <= 1e-8 * s, "{a} vs {b}");
        }
    }

    #[test]
    fn young_equality((fam, theta) in any_family()) {
        let th = theta.as_slice();
        let eta = fam.gradient_at(th);
        let f = fam.log_normalizer_at(th);
        let fs = fam.conjugate_at(&eta);
        let inner: f64 = th.iter().zip(&eta).map(|(a, b)| a * b).sum();
        let gap = f + fs - inner;
        prop_assert!(gap.abs() <= 1e-8 * (1.0 + f.abs() + fs.abs() + inner.abs()), "gap {gap}");
    }

    #[test]
    fn gradient_matches_finite_differences((fam, theta) in any_family()) {
        let th = theta.as_slice().to_vec();
        let grad = fam.gradient_at(&th);
        for i in 0..th.len() {
            let h = 1e-6 * th[i].abs().max(1.0);
            let mut up = th.clone();
            let mut down = th.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (fam.log_normalizer_at(&up) - fam.log_normalizer_at(&down)) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1.0), "{fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn bregman_form_of_the_density((fam, theta) in any_family(), seed in 0u64..1000) {
        let xs = sample(&fam, &theta, 5, seed).unwrap();
        for x in xs.points() {
            let a = log_density(&fam, x, &theta).unwrap();
            let b = log_density_bregman(&fam, x, &theta).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn kl_is_swapped_bregman((fam, t1) in any_family(), seed in 0u64..1000) {
        // A second parameter of the same family and shape.
        let xs = sample(&fam, &t1, 50, seed).unwrap();
        let Ok((_, t2)) = mle(&fam, &xs) else { return Ok(()); };
        let kl = kl_divergence(&fam, &t1, &t2).unwrap();
        let b = bregman_natural(&fam, &t2, &t1).unwrap();
        prop_assert_eq!(kl, b);
        prop_assert!(kl >= 0.0);
    }

    #[test]
    fn gaussian_kl_closed_form(
        (d, p, q) in (1usize..=3).prop_flat_map(|d| (Just(d), gaussian_source(d), gaussian_source(d)))
    ) {
        let g = Gaussian::new(d);
        let closed = gaussian_kl(&p, &q).unwrap();
        let generic = bregman_natural(&g, &g.to_natural(&q).unwrap(), &g.to_natural(&p).unwrap()).unwrap();
        prop_assert!((closed - generic).abs() <= 1e-8 * closed.abs().max(1.0), "{closed} vs {generic}");
    }

    #[test]
    fn rayleigh_dual_divergence_is_itakura_saito(a in 0.01..50.0f64, b in 0.01..50.0f64) {
        let g = Conjugate::new(&Rayleigh);
        let d = bregman(&g, &[a], &[b]).unwrap();
        prop_assert!((d - itakura_saito(a, b)).abs() <= 1e-12 * itakura_saito(a, b).max(1.0));
    }

    #[test]
    fn poisson_dual_divergence_is_i_divergence(a in 0.0..50.0f64, b in 0.01..50.0f64) {
        let g = Conjugate::new(&Poisson);
        let d = bregman(&g, &[a], &[b]).unwrap();
        let want = i_divergence(a, b);
        prop_assert!((d - want).abs() <= 1e-12 * want.max(1.0) * 10.0, "{d} vs {want}");
    }

    #[test]
    fn mle_maximizes_average_likelihood((fam, theta) in any_family(), seed in 0u64..1000, bump in -0.3..0.3f64) {
        let xs = sample(&fam, &theta, 80, seed).unwrap();
        let Ok((_, hat)) = mle(&fam, &xs) else { return Ok(()); };
        let best = average_log_likelihood(&fam, &xs, &hat).unwrap();
        // Move θ̂ towards the generating parameter and beyond.
        let other: Vec<f64> = hat
            .as_slice()
            .iter()
            .zip(theta.as_slice())
            .map(|(h, t)| h + bump * (t - h))
            .collect();
        let other = Natural::new(other);
        if fam.check_natural(other.as_slice()).is_ok() {
            let ll = average_log_likelihood(&fam, &xs, &other).unwrap();
            prop_assert!(ll <= best + 1e-12 * best.abs().max(1.0));
        }
    }
}

#[test]
fn kl_reference_values() {
    let g = Gaussian::new(1);
    let n = |m: f64, v: f64| GaussianSource::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, v)).unwrap();
    let kl = gaussian_kl(&n(0.0, 1.0), &n(1.0, 1.0)).unwrap();
    assert!((kl - 0.5).abs() < 1e-12);
    let generic = kl_divergence(&g, &g.to_natural(&n(0.0, 1.0)).unwrap(), &g.to_natural(&n(1.0, 1.0)).unwrap()).unwrap();
    assert!((generic - 0.5).abs() < 1e-12);
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn densities_integrate_to_one() {
    for sigma in [0.3, 1.0, 4.0] {
        let theta = Rayleigh.to_natural(RayleighSource::new(sigma).unwrap());
        let total = simpson(
            |x| if x == 0.0 { 0.0 } else { log_density(&Rayleigh, &[x], &theta).unwrap().exp() },
            0.0,
            15.0 * sigma,
            20_000,
        );
        assert!((total - 1.0).abs() < 1e-9, "rayleigh σ={sigma}: {total}");
    }
    let g = Gaussian::new(1);
    for (m, v) in [(0.0, 1.0), (-3.0, 0.04), (2.0, 9.0)] {
        let src = GaussianSource::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, v)).unwrap();
        let theta = g.to_natural(&src).unwrap();
        let s = f64::sqrt(v);
        let total = simpson(|x| log_density(&g, &[x], &theta).unwrap().exp(), m - 15.0 * s, m + 15.0 * s, 20_000);
        assert!((total - 1.0).abs() < 1e-9, "gaussian ({m}, {v}): {total}");
    }
    let g2 = Gaussian::new(2);
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    let theta = g2.to_natural(&GaussianSource::new(DVector::from_vec(vec![0.5, -1.0]), cov).unwrap()).unwrap();
    let total = simpson(
        |x| simpson(|y| log_density(&g2, &[x, y], &theta).unwrap().exp(), -13.0, 11.0, 600),
        -11.5,
        12.5,
        600,
    );
    assert!((total - 1.0).abs() < 1e-6, "bivariate: {total}");
}

#[test]
fn empirical_statistic_mean_converges() {
    let g = Gaussian::new(2);
    let src = GaussianSource::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
    let theta = g.to_natural(&src).unwrap();
    let xs = sample(&g, &theta, 100_000, 5).unwrap();
    let mean = efmix::exp_family::mean_statistic(&xs.statistics(&g));
    let eta = g.gradient_at(theta.as_slice());
    let err = mean.iter().zip(&eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 0.05, "{err}");
}

#[test]
fn sampling_is_deterministic() {
    for fam in [Family::Gaussian(Gaussian::new(3)), Family::Rayleigh(Rayleigh), Family::Poisson(Poisson)] {
        let theta = Natural::new(fam.natural_start());
        let a: SampleSet = sample(&fam, &theta, 50, 42).unwrap();
        let b = sample(&fam, &theta, 50, 42).unwrap();
        assert_eq!(a.points(), b.points());
    }
}
