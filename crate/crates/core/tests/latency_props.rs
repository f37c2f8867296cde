use proptest::prelude::*;
use umi_core::latency::{
    camera_latency, estimate_lag, exec_latency, generate_probe, half_rtt, proprio_latency, ProbeParams, QrDecode,
};
use umi_core::stream::{Sample, TimedStream};

fn delayed(params: &ProbeParams, lag: f64, gain: f64) -> TimedStream<f64> {
    let probe = generate_probe(params).unwrap();
    let samples = (0..(params.duration * params.sample_rate) as usize)
        .map(|k| {
            let t = k as f64 / params.sample_rate;
            Sample { t, value: gain * probe.meta.value_at(t - lag) + 0.3 }
        })
        .collect();
    TimedStream::new("measured", 0.0, samples).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recovers_lag_under_gain_and_offset(lag in 0.0f64..0.3, gain in 0.2f64..3.0) {
        let params = ProbeParams::chirp(0.3, 2.0, 12.0, 100.0);
        let est = estimate_lag(&generate_probe(&params).unwrap(), &delayed(&params, lag, gain), 0.4, 0.001).unwrap();
        prop_assert!((est.lag - lag).abs() < 0.002, "{} vs {lag}", est.lag);
        prop_assert!(est.score > 0.99);
    }
}

#[test]
fn latency_arithmetic() {
    let c = camera_latency(&[QrDecode { t_recv: 10.250, t_display: 10.100 }], 0.020).unwrap();
    assert!((c.latency - 0.130).abs() < 1e-12);
    assert!((proprio_latency(5.000, 5.004).unwrap() - 0.004).abs() < 1e-12);
    assert_eq!(half_rtt(0.010).unwrap(), 0.005);
    assert!((exec_latency(0.145, 0.005).unwrap() - 0.140).abs() < 1e-12);
    assert_eq!(exec_latency(0.004, 0.005).unwrap_err().kind(), "measurement_inconsistency");
    assert_eq!(
        camera_latency(&[QrDecode { t_recv: 1.0, t_display: 1.1 }], 0.0).unwrap_err().kind(),
        "clock_skew"
    );
}
