use treedyn::analytic::{chi_iterate, log_slope, GridParams, FlowModel};
use treedyn::clocks::ClockStream;
use treedyn::mc::sum_counts;
use treedyn::stats::correlation;
use treedyn::tree::TreeWindow;
use treedyn::voter::*;
use treedyn::CostGuards;

#[test]
fn opinions_are_symmetric() {
    let w = TreeWindow::new(3, 4, 0).unwrap();
    let n = 100_000u64;
    let sum = sum_counts(n, 21, 1, |_, s| {
        let mut q = OpinionQuery::new(w, ClockStream::new(s))?;
        Ok(vec![i64::from(q.opinion_of(w.root_node(), 0.0)?.value())])
    })
    .unwrap()[0];
    let mean = sum as f64 / n as f64;
    assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean opinion {mean}");
}

#[test]
fn base_vertex_autocorrelation_is_exponential() {
    let e = estimate_autocorr(0, 1.0, 100_000, 22, &CostGuards::default()).unwrap();
    let want = (-1.0f64).exp();
    assert!(e.agrees_with(want, 3.0), "{} vs {want}", e.value);
}

#[test]
fn autocorrelation_matches_quadrature() {
    let g = CostGuards::default();
    let lags = [0.5, 1.0, 2.0];
    let iterates = chi_iterate(&FlowModel::voter(), 6, GridParams::default()).unwrap();
    for n in 1..=6u32 {
        let est = estimate_autocorr_curve(n, &lags, 20_000, 300 + u64::from(n), &g).unwrap();
        for (t, e) in lags.iter().zip(&est) {
            let want = 1.0 - iterates[n as usize - 1].value_at(*t);
            assert!(e.agrees_with(want, 3.0), "n={n} T={t}: {} vs {want}", e.value);
            assert!((-1.0..=1.0).contains(&e.value));
        }
    }
}

#[test]
fn autocorrelation_decays_exponentially() {
    let lags = [2.0, 3.0, 4.0, 5.0, 6.0];
    let est = estimate_autocorr_curve(6, &lags, 50_000, 23, &CostGuards::default()).unwrap();
    let points: Vec<(f64, f64)> = lags.iter().zip(&est).map(|(t, e)| (*t, e.value)).collect();
    let slope = log_slope(&points).unwrap();
    assert!((-1.0..=-0.25).contains(&slope), "slope {slope}");
}

#[test]
fn separate_subtrees_are_independent() {
    let g = CostGuards::default();
    let two = layer_independence_stat(4, 2, 100_000, 24, &g).unwrap();
    assert!(two.max_abs_correlation < 3.0 / 100_000f64.sqrt());
    let five = layer_independence_stat(3, 5, 100_000, 25, &g).unwrap();
    assert_eq!(five.pairs.len(), 10);
    assert!(five.max_abs_correlation < 3.0 / 100_000f64.sqrt());
}

#[test]
fn a_vertex_is_fully_correlated_with_itself() {
    let w = TreeWindow::new(3, 3, 0).unwrap();
    let xs: Vec<f64> = (0..500)
        .map(|s| {
            let mut q = OpinionQuery::new(w, ClockStream::new(s)).unwrap();
            f64::from(q.opinion_of(w.root_node(), 0.0).unwrap().value())
        })
        .collect();
    assert!((correlation(&xs, &xs) - 1.0).abs() < 1e-12);
}

#[test]
fn majority_perturbation_matches_enumeration() {
    for i in 0..=10 {
        let p = f64::from(i) / 10.0;
        let mut brute = 0.0;
        for coins in 0..8u32 {
            for flips in 0..8u32 {
                let k = flips.count_ones() as i32;
                let weight = p.powi(k) * (1.0 - p).powi(3 - k) / 8.0;
                let before = (coins.count_ones() >= 2) as u8;
                let after = ((coins ^ flips).count_ones() >= 2) as u8;
                if before != after {
                    brute += weight;
                }
            }
        }
        assert!((majority_flip_prob(p) - brute).abs() < 1e-12, "p={p}");
    }
}
