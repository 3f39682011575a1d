use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use cocoon_core::io::config::{Overrides, RunConfig};
use cocoon_core::io::dataset::{from_csv, from_json, to_csv, to_json, EventRow};
use cocoon_core::sweep::{g_sweep, GSweepPoint, SweepPoint};

fn random_value(rng: &mut ChaCha20Rng) -> f64 {
    match rng.next_u64() % 6 {
        0 => 0.0,
        1 => -4.0,
        2 => f64::from_bits(rng.next_u64() >> 2) * 1e-300,
        _ => ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 8.0,
    }
}

fn rows(n: usize) -> Vec<SweepPoint> {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    (0..n)
        .map(|i| SweepPoint {
            q: i / 100,
            p: (i / 10) % 10,
            eigen_index: i % 10,
            re: random_value(&mut rng),
            im: random_value(&mut rng),
        })
        .collect()
}

#[test]
fn csv_round_trip_is_exact() {
    let data = rows(1000);
    let text = to_csv(&data);
    assert_eq!(text.lines().count(), 1001);
    assert!(!text.contains('\r'));
    let back: Vec<SweepPoint> = from_csv(&text).unwrap();
    assert_eq!(back.len(), data.len());
    for (a, b) in data.iter().zip(&back) {
        assert_eq!(a, b);
        if a.re != 0.0 {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
        }
    }
    assert_eq!(to_csv(&back), text);
}

#[test]
fn json_round_trip() {
    let cfg = RunConfig::resolve("butterfly", Overrides::default(), None).unwrap();
    let data = rows(50);
    let text = to_json(&data, &cfg);
    let file = from_json::<SweepPoint>(&text).unwrap();
    assert_eq!(file.rows, data);
    assert_eq!(file.kind, "flux");
    assert_eq!(file.config["L"], 50);
    assert!(from_json::<GSweepPoint>(&text).is_err());
}

#[test]
fn g_sweep_rows_round_trip() {
    let data = g_sweep(6, 1, &[0.0, 0.2, 0.4], &[0, 3], 2).unwrap();
    let text = to_csv(&data.points);
    assert!(text.starts_with("g,q,p,eigen_index,re,im\n"));
    assert_eq!(from_csv::<GSweepPoint>(&text).unwrap(), data.points);
}

#[test]
fn malformed_csv() {
    assert!(from_csv::<SweepPoint>("q,p,re,im\n1,2,3,4\n").is_err());
    assert!(from_csv::<SweepPoint>("q,p,eigen_index,re,im\n1,2,3,x,4\n").is_err());
    assert!(from_csv::<EventRow>("").is_err());
}
