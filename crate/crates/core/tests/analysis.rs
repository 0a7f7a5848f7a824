mod common;

use common::*;
use gprb_core::analysis::{fraction_negative, select_foils, CaptionSample};
use gprb_core::captioner::ArchitectureKind;
use gprb_core::report::{read_curves_csv, read_sensitivity_csv, write_curves_csv, write_sensitivity_csv};
use gprb_core::{aggregate, cosine_distance, js_divergence, omission_scoring, select_foil, Error, Metric, SensitivityRecord, Tensor};
use proptest::prelude::*;
use rand::Rng;

fn oracle_cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

#[test]
fn foil_selection_matches_exhaustive_scan_including_ties() {
    let mut r = rng(404);
    for trial in 0..100 {
        let mut feats: Vec<Vec<f64>> = (0..50).map(|_| random_vec(&mut r, 8, 1.0)).collect();
        let target = r.random_range(0..50usize);
        if trial % 2 == 0 {
            // exact duplicates of the farthest image create a tie
            let far = (0..50)
                .filter(|&i| i != target)
                .max_by(|&a, &b| oracle_cos(&feats[target], &feats[a]).total_cmp(&oracle_cos(&feats[target], &feats[b])))
                .unwrap();
            let dup = (0..50).filter(|&i| i != target && i != far).nth(r.random_range(0..48)).unwrap();
            feats[dup] = feats[far].clone();
        }
        let tensors: Vec<Tensor> = feats.iter().map(|f| Tensor::vector(f.clone())).collect();
        // ids deliberately not in index order
        let ids: Vec<u64> = (0..50).map(|i| 1000 - 7 * i as u64).collect();
        let images: Vec<(u64, &Tensor)> = ids.iter().copied().zip(&tensors).collect();
        let dists: Vec<(u64, f64)> = (0..50)
            .filter(|&i| i != target)
            .map(|i| (ids[i], oracle_cos(&feats[target], &feats[i])))
            .collect();
        let best = dists.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
        let expected = dists.iter().filter(|d| d.1 == best).map(|d| d.0).min().unwrap();
        assert_eq!(select_foil(ids[target], &images).unwrap(), expected, "trial {trial}");
    }
}

#[test]
fn foil_selection_errors() {
    let a = Tensor::vector(vec![1.0, 0.0]);
    let z = Tensor::vector(vec![0.0, 0.0]);
    assert!(matches!(select_foil(0, &[(0, &a)]), Err(Error::NoFoil(_))));
    assert!(matches!(select_foil(5, &[(0, &a), (1, &a)]), Err(Error::NoFoil(_))));
    assert!(matches!(select_foil(0, &[(0, &a), (1, &z)]), Err(Error::NoFoil(_))));
    let foils = select_foils(&[(0, &a), (1, &Tensor::vector(vec![-1.0, 0.0])), (2, &z)]).err();
    assert!(foils.is_some());
}

fn random_records(r: &mut rand_chacha::ChaCha8Rng, n_captions: usize) -> Vec<SensitivityRecord> {
    let mut out = Vec::new();
    for id in 0..n_captions as u64 {
        let len = r.random_range(3..7);
        for position in 0..=len {
            out.push(SensitivityRecord {
                caption_id: id,
                caption_len: len,
                position,
                mean_abs_grad_image: r.random_range(0.0..1.0),
                mean_abs_grad_prevword: r.random_range(0.0..10.0),
            });
        }
    }
    out
}

#[test]
fn aggregation_matches_independent_summation() {
    let mut r = rng(8);
    let records = random_records(&mut r, 100);
    for len in 3..7 {
        for metric in Metric::SENSITIVITY {
            let curve = aggregate(&records, len, metric).unwrap();
            assert_eq!(curve.points.len(), len + 1);
            for p in &curve.points {
                let vals: Vec<f64> = records
                    .iter()
                    .filter(|x| x.caption_len == len && x.position == p.position)
                    .map(|x| match metric {
                        Metric::GradImage => x.mean_abs_grad_image,
                        _ => x.mean_abs_grad_prevword,
                    })
                    .collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
                assert_eq!(p.count, vals.len());
                assert!((p.mean - mean).abs() < 1e-12);
                assert!((p.std - var.max(0.0).sqrt()).abs() < 1e-9);
            }
        }
    }
    assert!(matches!(aggregate(&records, 40, Metric::GradImage), Err(Error::NoCaptionsOfLength(40))));
}

#[test]
fn curves_survive_a_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(9);
    let records = random_records(&mut r, 30);
    let p = dir.path().join("sensitivity.csv");
    write_sensitivity_csv(&p, &records).unwrap();
    let back = read_sensitivity_csv(&p).unwrap();
    assert_eq!(back, records);
    let curves: Vec<_> = Metric::SENSITIVITY.iter().map(|&m| aggregate(&back, 4, m).unwrap()).collect();
    let cp = dir.path().join("curves_L4.csv");
    write_curves_csv(&cp, &curves).unwrap();
    let rows = read_curves_csv(&cp).unwrap();
    assert_eq!(rows.len(), 10);
    for (row, point) in rows.iter().zip(curves.iter().flat_map(|c| &c.points)) {
        assert_eq!(row.mean.to_bits(), point.mean.to_bits());
        assert_eq!(row.count, point.count);
    }
}

#[test]
fn self_foil_gives_zero_distances() {
    let p = random_params(ArchitectureKind::InitInject, micro_dims(), 2);
    let mut r = rng(2);
    let samples: Vec<CaptionSample> = (0..5)
        .map(|i| CaptionSample {
            caption_id: i,
            image_id: i,
            image: Tensor::vector(random_vec(&mut r, 10, 1.0)),
            tokens: random_caption(&mut r, 12, 4),
        })
        .collect();
    let foils = samples.iter().map(|s| (s.image_id, s.image.clone())).collect();
    for rec in omission_scoring(&p, &samples, &foils).unwrap() {
        assert!(rec.cos_dist_multimodal <= 1e-12 && rec.cos_dist_softmax <= 1e-12);
        assert!(rec.jsd_softmax <= 1e-12 && rec.cos_dist_logits <= 1e-12);
        assert_eq!(rec.frac_neg_logits_orig, rec.frac_neg_logits_foil);
    }
}

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..20).prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..12)
        .prop_filter("positive mass", |v| v.iter().sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cosine_is_symmetric_and_bounded(a in vec_strategy(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let b: Vec<f64> = a.iter().map(|x| x + r.random_range(-5.0..5.0)).collect();
        prop_assume!(b.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let ab = cosine_distance(&a, &b).unwrap();
        prop_assert!((ab - cosine_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=2.0).contains(&ab));
        prop_assert!((ab - oracle_cos(&a, &b).clamp(0.0, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn jsd_is_symmetric_and_bounded(
        (p, q) in (2usize..10).prop_flat_map(|n| (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(0.01f64..1.0, n),
        ))
    ) {
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); v.into_iter().map(|x| x / s).collect::<Vec<_>>() };
        let (p, q) = (norm(p), norm(q));
        let pq = js_divergence(&p, &q).unwrap();
        prop_assert!((pq - js_divergence(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&pq));
    }

    #[test]
    fn jsd_of_a_distribution_with_itself_is_zero(p in distribution()) {
        prop_assert!(js_divergence(&p, &p).unwrap() <= 1e-12);
    }

    #[test]
    fn fraction_negative_is_scale_invariant(v in prop::collection::vec(-5.0f64..5.0, 1..30), k in 0.01f64..100.0) {
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        prop_assert_eq!(fraction_negative(&v), fraction_negative(&scaled));
        let direct = v.iter().filter(|x| **x < 0.0).count() as f64 / v.len() as f64;
        prop_assert_eq!(fraction_negative(&v), direct);
    }
}
