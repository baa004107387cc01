use box_muller::standard_normals;
use npquad::experiments::{reference_mixture, replication_rng, sample_mixture, Method};
use npquad::returns::{compare_portfolios, plot_data, ReturnsDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod box_muller {
    use rand::distr::Open01;
    use rand::Rng;

    /// Standard normals by Box–Muller, independent of the library sampler.
    pub fn standard_normals<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.sample(Open01);
                let v: f64 = rng.sample(Open01);
                (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
            })
            .collect()
    }
}

#[test]
fn lognormal_returns_show_no_gaussian_overweight() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rf = 1.01f64;
    let stock: Vec<f64> = standard_normals(&mut rng, 100_000)
        .into_iter()
        .map(|z| rf * (0.05 + 0.17 * z).exp())
        .collect();
    let data = ReturnsDataset::new(stock, vec![rf; 100_000], None).unwrap();
    let rows =
        compare_portfolios(&data, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 5, Method::NpGq).unwrap();
    for row in rows {
        let err = row.error().unwrap();
        assert!(err.abs() < 0.02, "{row:?}");
    }
}

#[test]
fn crash_tail_makes_the_gaussian_investor_overweight() {
    let x = sample_mixture(
        &reference_mixture(),
        100_000,
        &mut replication_rng(4, 100_000, 0),
    );
    let rf = 1.0045;
    let stock: Vec<f64> = x.iter().map(|v| rf * v.exp()).collect();
    let data = ReturnsDataset::new(stock, vec![rf; x.len()], None).unwrap();
    let rows = compare_portfolios(&data, &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 5, Method::NpGq).unwrap();
    for row in rows {
        assert!(row.error().unwrap() > 0.0, "{row:?}");
    }
}

#[test]
fn kernel_density_has_a_heavier_left_tail_than_the_normal_fit() {
    let x = sample_mixture(&reference_mixture(), 5000, &mut replication_rng(8, 5000, 0));
    let p = plot_data(&x, 40).unwrap();
    let cut = p.gaussian_mean - 2.0 * p.gaussian_std;
    let mass = |ys: &[f64]| -> f64 {
        p.grid
            .iter()
            .zip(ys)
            .filter(|(g, _)| **g < cut)
            .map(|(_, y)| y)
            .sum()
    };
    assert!(mass(&p.kde) > mass(&p.gaussian));
}
