use gaitcorrupt_core::metrics::{
    evaluate, mask_iou, mean_average_precision, rank_k_accuracy, robustness, AccuracyPair, Distance,
    EmbeddingRecord,
};
use gaitcorrupt_core::occlusion::BinaryMask;
use proptest::prelude::*;

// Independent oracle: every quantity is counted pairwise instead of sorting.
fn ahead(p: &EmbeddingRecord, g: &[EmbeddingRecord], j: usize, dist: Distance) -> usize {
    let dj = dist.between(&p.vector, &g[j].vector);
    (0..g.len())
        .filter(|&i| !g[i].same_sequence(p))
        .filter(|&i| {
            let di = dist.between(&p.vector, &g[i].vector);
            di < dj || (di == dj && i < j)
        })
        .count()
}

fn oracle(probes: &[EmbeddingRecord], g: &[EmbeddingRecord], k: usize, dist: Distance) -> (f64, f64) {
    let mut hits = 0;
    let (mut ap_sum, mut ap_n) = (0.0, 0);
    for p in probes {
        let matches: Vec<usize> =
            (0..g.len()).filter(|&j| !g[j].same_sequence(p) && g[j].identity == p.identity).collect();
        if matches.iter().any(|&j| ahead(p, g, j, dist) < k) {
            hits += 1;
        }
        if !matches.is_empty() {
            let mut ap = 0.0;
            for &j in &matches {
                let pos = ahead(p, g, j, dist) + 1;
                let better = matches.iter().filter(|&&m| ahead(p, g, m, dist) < pos - 1).count() + 1;
                ap += better as f64 / pos as f64;
            }
            ap_sum += ap / matches.len() as f64;
            ap_n += 1;
        }
    }
    let map = if ap_n == 0 { 0.0 } else { 100.0 * ap_sum / ap_n as f64 };
    (100.0 * hits as f64 / probes.len() as f64, map)
}

fn record() -> impl Strategy<Value = EmbeddingRecord> {
    (0..6usize, 0..3usize, prop::collection::vec(-3i8..=3, 4)).prop_map(|(id, cond, v)| {
        // Small integer grid so exact distance ties actually occur.
        EmbeddingRecord::new(format!("{id}"), format!("c{cond}"), "000", v.into_iter().map(f64::from).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_and_map_match_oracle(
        probes in prop::collection::vec(record(), 1..12),
        gallery in prop::collection::vec(record(), 1..30),
        k in 1..6usize,
        cosine in any::<bool>(),
    ) {
        let dist = if cosine { Distance::Cosine } else { Distance::Euclidean };
        let (r, m) = oracle(&probes, &gallery, k, dist);
        prop_assert_eq!(rank_k_accuracy(&probes, &gallery, k, dist).unwrap(), r);
        prop_assert!((mean_average_precision(&probes, &gallery, dist).unwrap() - m).abs() < 1e-9);
    }

    #[test]
    fn rank_is_monotone_in_k(
        probes in prop::collection::vec(record(), 1..10),
        gallery in prop::collection::vec(record(), 1..25),
    ) {
        let s = evaluate(&probes, &gallery, &[1, 2, 3, 5, 10, 20], Distance::NormalizedEuclidean).unwrap();
        for w in s.ranks.windows(2) {
            prop_assert!(w[0].accuracy <= w[1].accuracy);
        }
    }

    #[test]
    fn scores_survive_rotation_and_scale(
        probes in prop::collection::vec(record(), 1..8),
        gallery in prop::collection::vec(record(), 2..20),
        theta in 0.0..std::f64::consts::TAU,
    ) {
        let (c, s) = (theta.cos(), theta.sin());
        let rot = |r: &EmbeddingRecord| {
            let v = &r.vector;
            let mut out = r.clone();
            out.vector = vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2], v[3]];
            out
        };
        let rp: Vec<_> = probes.iter().map(rot).collect();
        let rg: Vec<_> = gallery.iter().map(rot).collect();
        let a = evaluate(&probes, &gallery, &[1, 5], Distance::Euclidean).unwrap();
        let b = evaluate(&rp, &rg, &[1, 5], Distance::Euclidean).unwrap();
        // Rotation can split exact ties by rounding, so compare on tie-free draws only.
        let tie_free = probes.iter().all(|p| {
            let mut d: Vec<f64> = gallery.iter().map(|g| Distance::Euclidean.between(&p.vector, &g.vector)).collect();
            d.sort_by(f64::total_cmp);
            d.windows(2).all(|w| w[1] - w[0] > 1e-6)
        });
        if tie_free {
            prop_assert_eq!(a.ranks.clone(), b.ranks);
        }
        let scaled = |r: &EmbeddingRecord| {
            let mut out = r.clone();
            out.vector.iter_mut().for_each(|v| *v *= 4.0);
            out
        };
        let sp: Vec<_> = probes.iter().map(scaled).collect();
        let sg: Vec<_> = gallery.iter().map(scaled).collect();
        prop_assert_eq!(a, evaluate(&sp, &sg, &[1, 5], Distance::Euclidean).unwrap());
        // Power-of-two scaling is exact, so cosine scores must not move at all.
        prop_assert_eq!(
            evaluate(&probes, &gallery, &[1, 5], Distance::Cosine).unwrap(),
            evaluate(&sp, &gallery, &[1, 5], Distance::Cosine).unwrap()
        );
    }

    #[test]
    fn relative_drop_never_below_absolute(clean in 0.01..100.0f64, frac in 0.0..=1.0f64) {
        let r = robustness(AccuracyPair::new(clean, clean * frac).unwrap()).unwrap();
        prop_assert!(r.delta_r <= r.delta_a + 1e-12);
        prop_assert!(r.delta_r >= 0.0 && r.delta_a <= 1.0);
    }

    #[test]
    fn iou_symmetric_and_bounded(a in prop::collection::vec(any::<bool>(), 48), b in prop::collection::vec(any::<bool>(), 48)) {
        let a = BinaryMask::new(6, 8, a).unwrap();
        let b = BinaryMask::new(6, 8, b).unwrap();
        let ab = mask_iou(&a, &b).unwrap();
        prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
    }
}

#[test]
fn unmatched_probe_counts_as_miss() {
    let g = vec![EmbeddingRecord::new("a", "nm", "0", vec![1.0, 0.0])];
    let p = vec![
        EmbeddingRecord::new("a", "bg", "0", vec![1.0, 0.1]),
        EmbeddingRecord::new("z", "bg", "0", vec![1.0, 0.1]),
    ];
    let s = evaluate(&p, &g, &[1], Distance::Euclidean).unwrap();
    assert_eq!(s.rank1(), 50.0);
    assert_eq!(s.map, 100.0);
}

#[test]
fn own_sequence_is_not_a_match() {
    let r = EmbeddingRecord::new("a", "nm-01", "0", vec![1.0, 0.0]);
    let other = EmbeddingRecord::new("b", "nm-02", "0", vec![1.0, 0.05]);
    let far = EmbeddingRecord::new("a", "nm-03", "0", vec![-1.0, 0.0]);
    let s = evaluate(std::slice::from_ref(&r), &[r.clone(), other, far], &[1, 2], Distance::Euclidean).unwrap();
    assert_eq!(s.rank1(), 0.0);
    assert_eq!(s.rank(2), Some(100.0));
}
