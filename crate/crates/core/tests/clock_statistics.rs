use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
use treedyn::clocks::ClockStream;

const N: u64 = 100_000;

#[test]
fn ring_counts_are_poisson() {
    let mut c = ClockStream::new(2024);
    let counts: Vec<u64> = (0..N).map(|v| c.ring_indices_in(v, 0.0, 2.0).count() as u64).collect();
    let n = N as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let var = counts.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 2.0).abs() < 3.0 * (2.0 / n).sqrt(), "mean {mean}");
    // Var of the sample variance for Poisson(2) is about (mu + 2 mu^2) / n.
    assert!((var - 2.0).abs() < 3.0 * (10.0 / n).sqrt(), "variance {var}");

    let poisson = Poisson::new(2.0).unwrap();
    let bins = 9usize;
    let mut observed = vec![0f64; bins];
    for &k in &counts {
        observed[(k as usize).min(bins - 1)] += 1.0;
    }
    let mut stat = 0.0;
    let mut tail = 1.0;
    for (k, obs) in observed.iter().enumerate() {
        let p = if k + 1 == bins { tail } else { poisson.pmf(k as u64) };
        tail -= p;
        let expected = p * n;
        stat += (obs - expected).powi(2) / expected;
    }
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn disjoint_interval_counts_are_uncorrelated() {
    let mut c = ClockStream::new(77);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for v in 0..N {
        xs.push(c.ring_indices_in(v, -1.5, 0.0).count() as f64);
        ys.push(c.ring_indices_in(v, 0.0, 1.0).count() as f64);
        zs.push(c.ring_indices_in(v, 1.0, 2.5).count() as f64);
    }
    let bound = 3.0 / (N as f64).sqrt();
    assert!(treedyn::stats::correlation(&xs, &ys).abs() < bound);
    assert!(treedyn::stats::correlation(&ys, &zs).abs() < bound);
    assert!(treedyn::stats::correlation(&xs, &zs).abs() < bound);
}

#[test]
fn no_ring_in_unit_interval_has_probability_e_inverse() {
    let hits = (0..N)
        .filter(|&s| ClockStream::new(s).last_ring_before(0, 1.0).time < 0.0)
        .count() as f64;
    let p = (-1.0f64).exp();
    let freq = hits / N as f64;
    let se = (p * (1.0 - p) / N as f64).sqrt();
    assert!((freq - p).abs() < 3.0 * se, "frequency {freq}");
}

#[test]
fn coins_are_fair() {
    let mut c = ClockStream::new(5);
    let sum: i64 = (0..N).map(|v| i64::from(c.coin_at(v, (v % 5) as i64 - 2).value())).sum();
    let mean = sum as f64 / N as f64;
    assert!(mean.abs() < 3.0 / (N as f64).sqrt(), "coin mean {mean}");
}

#[test]
fn uniforms_pass_kolmogorov_smirnov() {
    let mut c = ClockStream::new(31);
    let n = 10_000usize;
    let mut u: Vec<f64> = (0..n as u64).map(|v| c.uniform_at(v, 1 + (v % 3) as i64)).collect();
    u.sort_by(f64::total_cmp);
    let d = u
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let lo = x - i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64 - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max);
    // Asymptotic 1% critical value.
    assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    assert!(u.iter().all(|x| (0.0..1.0).contains(x)));
}

#[test]
fn streams_agree_across_threads() {
    let reference: Vec<f64> = {
        let mut c = ClockStream::new(9);
        (0..64).map(|v| c.last_ring_before(v, 0.5).time).collect()
    };
    let handles: Vec<_> = (0..4)
        .map(|k| {
            std::thread::spawn(move || {
                let mut c = ClockStream::new(9);
                (0..64u64)
                    .rev()
                    .map(|v| (v, c.last_ring_before((v + k) % 64, 0.5).time))
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    for (k, h) in handles.into_iter().enumerate() {
        for (v, t) in h.join().unwrap() {
            assert_eq!(t, reference[((v + k as u64) % 64) as usize]);
        }
    }
}
