use iiot_netsim::queueing::{erlang_c_probability, mean_wait_in_queue, simulate_mmc, QueueParams};
use iiot_netsim::rng::RngStream;
use proptest::prelude::*;

#[test]
fn single_server_example() {
    let p = QueueParams::new(1.0, 2.0, 1);
    let est = simulate_mmc(&p, 1_000_000, &mut RngStream::new(1, 0)).unwrap();
    assert!((est.mean_wait - 0.5).abs() <= 0.01, "{est:?}");
}

#[test]
fn two_server_wait_probability() {
    let p = QueueParams::new(1.5, 1.0, 2);
    let est = simulate_mmc(&p, 1_000_000, &mut RngStream::new(2, 0)).unwrap();
    assert!((est.wait_probability - 0.6429).abs() <= 0.01, "{est:?}");
}

/// Agreement judged against the run's own batch-means standard error, which
/// is the honest yardstick near saturation where the wait is heavily
/// autocorrelated.
#[test]
fn simulation_agrees_with_closed_forms_on_grid() {
    for c in [1u32, 2, 4] {
        for util in [0.3, 0.6, 0.9] {
            let p = QueueParams::new(util * c as f64, 1.0, c);
            let mut rng = RngStream::new(97, u64::from(c) * 10 + (util * 10.0) as u64);
            let est = simulate_mmc(&p, 400_000, &mut rng).unwrap();
            let wq = mean_wait_in_queue(&p).unwrap();
            let pc = erlang_c_probability(&p).unwrap();
            assert!(
                (est.mean_wait - wq).abs() <= 4.0 * est.mean_wait_std_error,
                "c={c} util={util}: {est:?} vs {wq}"
            );
            assert!(
                (est.wait_probability - pc).abs() <= 0.01,
                "c={c} util={util}"
            );
        }
    }
}

#[test]
fn saturation_blows_up_the_wait() {
    for c in [1u32, 3, 8] {
        let at =
            |u: f64| mean_wait_in_queue(&QueueParams::new(u * c as f64 * 2.0, 2.0, c)).unwrap();
        assert!(at(0.99) >= 5.0 * at(0.9));
    }
}

proptest! {
    #[test]
    fn single_server_closed_form(mu in 0.01f64..1e4, frac in 0.001f64..0.999) {
        let lambda = frac * mu;
        let wq = mean_wait_in_queue(&QueueParams::new(lambda, mu, 1)).unwrap();
        let want = lambda / (mu * (mu - lambda));
        prop_assert!((wq / want - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn erlang_c_is_a_probability_increasing_in_load(
        c in 1u32..80, a in 0.001f64..0.998, step in 0.0005f64..0.001
    ) {
        let at = |u: f64| erlang_c_probability(&QueueParams::new(u * c as f64, 1.0, c)).unwrap();
        let lo = at(a);
        let hi = at(a + step);
        prop_assert!(lo > 0.0 && lo < 1.0);
        prop_assert!(hi > lo);
    }
}
