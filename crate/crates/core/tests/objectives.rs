use dgan_core::objectives::{compose, d_loss, g_loss, kl_divergence, recon_loss, LossReport, LossWeights};
use dgan_core::stmap::StMap;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn adversarial_loss_values() {
    assert_eq!(d_loss(&[1.0], &[0.0], &[1.0], 1.0), 0.0);
    assert_eq!(d_loss(&[0.5], &[0.5], &[0.5], 1.0), 0.75);
    assert_eq!(d_loss(&[0.0], &[1.0], &[0.0], 1.0), 3.0);
    assert_eq!(g_loss(&[1.0], &[1.0]), 0.0);
    assert_eq!(g_loss(&[0.5], &[0.5]), 0.5);
    assert_eq!(g_loss(&[0.0], &[0.0]), 2.0);
    // Encoded pairs labelled 0 instead of 1.
    assert_eq!(d_loss(&[1.0], &[0.0], &[0.0], 0.0), 0.0);
}

#[test]
fn kl_closed_forms() {
    assert_eq!(kl_divergence(&[0.0; 7], &[1.0; 7]).unwrap(), 0.0);
    assert_eq!(kl_divergence(&[1.0], &[1.0]).unwrap(), 0.5);
    assert!(kl_divergence(&[0.0], &[0.0]).is_err());
    assert!(kl_divergence(&[0.0], &[-1.0]).is_err());
}

/// `E_q[ln q(z) − ln p(z)]` estimated from `n` draws, with its standard error.
fn kl_monte_carlo(mu: &[f64], sigma: &[f64], n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let mut v = 0.0;
        for (m, s) in mu.iter().zip(sigma) {
            let e: f64 = StandardNormal.sample(rng);
            let z = m + s * e;
            // ln N(z; m, s²) − ln N(z; 0, 1); the 2π terms cancel.
            v += -s.ln() - 0.5 * e * e + 0.5 * z * z;
        }
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let d = rng.random_range(1..6);
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sigma: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..2.0)).collect();
        let exact = kl_divergence(&mu, &sigma).unwrap();
        let (est, se) = kl_monte_carlo(&mu, &sigma, 100_000, &mut rng);
        assert!((exact - est).abs() <= 3.0 * se, "exact {exact} est {est} se {se}");
    }
}

#[test]
fn recon_values() {
    let a = StMap::new(1, 2, 0, vec![0.0, 0.0]).unwrap();
    let b = StMap::new(1, 2, 0, vec![1.0, 2.0]).unwrap();
    assert_eq!(recon_loss(&a, &a).unwrap(), 0.0);
    assert!((recon_loss(&a, &b).unwrap() - 5f64.sqrt() / 2.0).abs() < 1e-15);
    assert_eq!(recon_loss(&a, &b).unwrap(), recon_loss(&b, &a).unwrap());
    let c = StMap::new(2, 1, 0, vec![1.0, 2.0]).unwrap();
    assert!(recon_loss(&a, &c).is_err());
}

#[test]
fn composition() {
    let w = LossWeights::default();
    assert_eq!(compose(0.0, 0.0, 0.0, 0.0, w), (0.0, 0.0));
    let (d, eg) = compose(0.75, 0.5, 2.0, 0.25, w);
    assert_eq!(d, 0.75);
    assert_eq!(eg, 2.75);
    // At unit weights both objectives add up to the full hybrid loss.
    assert_eq!(d + eg, 0.75 + 0.5 + 2.0 + 0.25);
    let w = LossWeights { kl: 0.5, recon: 4.0 };
    assert_eq!(compose(0.0, 0.5, 2.0, 0.25, w).1, 2.5);
    let r = LossReport::new(0.75, 0.5, 2.0, 0.25, LossWeights::default());
    assert_eq!(r.total_eg, 2.75);
    assert_eq!(r.csv_row(3), "3,0.75,0.5,2.0,0.25,2.75");
}

proptest! {
    #[test]
    fn kl_is_non_negative(
        ms in prop::collection::vec((-5.0f64..5.0, 0.01f64..10.0), 1..16),
    ) {
        let (mu, sigma): (Vec<f64>, Vec<f64>) = ms.into_iter().unzip();
        prop_assert!(kl_divergence(&mu, &sigma).unwrap() >= 0.0);
    }

    #[test]
    fn adversarial_losses_are_bounded(
        p in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..16),
    ) {
        let r: Vec<f64> = p.iter().map(|x| x.0).collect();
        let f: Vec<f64> = p.iter().map(|x| x.1).collect();
        let e: Vec<f64> = p.iter().map(|x| x.2).collect();
        let d = d_loss(&r, &f, &e, 1.0);
        let g = g_loss(&f, &e);
        prop_assert!((0.0..=3.0).contains(&d));
        prop_assert!((0.0..=2.0).contains(&g));
    }
}
