mod common;

use irs_noma::linalg::{herm_inner, hermitian_part, CMatrix, C64};
use irs_noma::opac::dinkelbach_outer;
use irs_noma::orca::{dc_linearize, f2};
use irs_noma::SystemConfig;
use rand::Rng;

fn config() -> SystemConfig {
    SystemConfig {
        num_irs_elements: 8,
        ..SystemConfig::default()
    }
}

fn random_direction<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    hermitian_part(&a)
}

#[test]
fn gradient_matches_central_differences() {
    let cfg = config();
    let mut rng = common::rng(5);
    let mut checked = 0;
    for seed in 0..10 {
        let inst = common::instance(&cfg, seed);
        let beta = dinkelbach_outer(&inst.links, &cfg).unwrap().beta;
        for _ in 0..10 {
            let anchor = common::random_psd(cfg.num_irs_elements, 1 + checked % 4, &mut rng);
            let (i, k) = (rng.random_range(0..cfg.num_clusters), rng.random_range(0..cfg.users_per_cluster));
            let lin = dc_linearize(&inst.lifted, i, k, &beta, &anchor).unwrap();
            let d = random_direction(cfg.num_irs_elements, &mut rng);
            let h = 1e-6 * anchor.norm() / d.norm();
            let fd = (f2(&inst.lifted, i, k, &beta, &(&anchor + &d * C64::from(h)))
                - f2(&inst.lifted, i, k, &beta, &(&anchor - &d * C64::from(h))))
                / (2.0 * h);
            let analytic = herm_inner(&lin.gradient, &d);
            let rel = (fd - analytic).abs() / analytic.abs().max(1e-12);
            assert!(rel < 1e-4, "seed {seed}: fd {fd} vs {analytic}");
            checked += 1;
        }
    }
    assert_eq!(checked, 100);
}

#[test]
fn tangent_majorizes_f2() {
    let cfg = config();
    let mut rng = common::rng(6);
    for seed in 0..4 {
        let inst = common::instance(&cfg, 100 + seed);
        let beta = dinkelbach_outer(&inst.links, &cfg).unwrap().beta;
        let anchor = common::random_psd(cfg.num_irs_elements, 2, &mut rng);
        for i in 0..cfg.num_clusters {
            for k in 0..cfg.users_per_cluster {
                let lin = dc_linearize(&inst.lifted, i, k, &beta, &anchor).unwrap();
                assert!((lin.f2_bar(&anchor) - lin.f2_anchor).abs() < 1e-12 * lin.f2_anchor.abs().max(1.0));
                for _ in 0..25 {
                    let b = common::random_psd(cfg.num_irs_elements, rng.random_range(1..4), &mut rng);
                    let exact = f2(&inst.lifted, i, k, &beta, &b);
                    assert!(exact <= lin.f2_bar(&b) + 1e-9 * exact.abs().max(1.0), "{exact} > {}", lin.f2_bar(&b));
                }
            }
        }
    }
}
