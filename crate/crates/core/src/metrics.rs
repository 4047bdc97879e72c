//! Retrieval accuracy (Rank-k, mAP), robustness scores and mask IoU.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occlusion::BinaryMask;
use crate::severity::{CorruptionFamily, CorruptionKind, Severity};

/// One embedded sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub identity: String,
    pub condition: String,
    pub view: String,
    /// Distinguishes several sequences sharing identity, condition and view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_id: Option<String>,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn new(
        identity: impl Into<String>,
        condition: impl Into<String>,
        view: impl Into<String>,
        vector: Vec<f64>,
    ) -> Self {
        Self {
            identity: identity.into(),
            condition: condition.into(),
            view: view.into(),
            sequence_id: None,
            vector,
        }
    }

    pub fn with_sequence(mut self, id: impl Into<String>) -> Self {
        self.sequence_id = Some(id.into());
        self
    }

    /// True when both records describe the same recorded sequence.
    pub fn same_sequence(&self, other: &EmbeddingRecord) -> bool {
        self.identity == other.identity
            && self.condition == other.condition
            && self.view == other.view
            && self.sequence_id == other.sequence_id
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distance {
    Euclidean,
    Cosine,
    /// Euclidean distance after scaling each vector to unit length.
    #[default]
    NormalizedEuclidean,
}

impl core::str::FromStr for Distance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Distance::Euclidean),
            "cosine" => Ok(Distance::Cosine),
            "normalized-euclidean" | "euclidean-normalized" => Ok(Distance::NormalizedEuclidean),
            other => Err(Error::InvalidConfig(format!("unknown distance `{other}`"))),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

impl Distance {
    pub fn between(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Euclidean => {
                libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            }
            Distance::Cosine => {
                let d = norm(a) * norm(b);
                if d == 0.0 {
                    1.0
                } else {
                    1.0 - dot(a, b) / d
                }
            }
            Distance::NormalizedEuclidean => {
                let (na, nb) = (norm(a), norm(b));
                let sa = if na == 0.0 { 0.0 } else { 1.0 / na };
                let sb = if nb == 0.0 { 0.0 } else { 1.0 / nb };
                libm::sqrt(
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| {
                            let d = x * sa - y * sb;
                            d * d
                        })
                        .sum::<f64>(),
                )
            }
        }
    }
}

fn check_sets(probes: &[EmbeddingRecord], gallery: &[EmbeddingRecord]) -> Result<usize> {
    let first = gallery.first().ok_or(Error::EmptyGallery)?;
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    let dim = first.vector.len();
    if dim == 0 {
        return Err(Error::DimMismatch { expected: "d > 0".into(), found: "0".into() });
    }
    for r in probes.iter().chain(gallery) {
        if r.vector.len() != dim {
            return Err(Error::DimMismatch {
                expected: format!("{dim}"),
                found: format!("{} for identity `{}`", r.vector.len(), r.identity),
            });
        }
        if r.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite embedding value for identity `{}`",
                r.identity
            )));
        }
    }
    Ok(dim)
}

/// Gallery indices ordered by distance to `probe`, ties by index; entries for
/// the probe's own sequence are left out.
pub fn ranked_gallery(probe: &EmbeddingRecord, gallery: &[EmbeddingRecord], distance: Distance) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = gallery
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.same_sequence(probe))
        .map(|(i, g)| (distance.between(&probe.vector, &g.vector), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Top-k accuracy for one k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankScore {
    pub k: usize,
    /// Percentage in `[0, 100]`.
    pub accuracy: f64,
}

/// Rank-k accuracies and mAP for one probe/gallery evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScores {
    pub ranks: Vec<RankScore>,
    /// Mean average precision in percent.
    pub map: f64,
    pub probes: usize,
    pub gallery: usize,
}

impl RetrievalScores {
    pub fn rank(&self, k: usize) -> Option<f64> {
        self.ranks.iter().find(|r| r.k == k).map(|r| r.accuracy)
    }

    pub fn rank1(&self) -> f64 {
        self.rank(1).expect("rank-1 is always evaluated")
    }
}

/// Average precision of one ranked list; `None` when it holds no match.
fn average_precision(ranked: &[usize], is_match: impl Fn(usize) -> bool) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &g) in ranked.iter().enumerate() {
        if is_match(g) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Evaluates Rank-k for every `k` in `ks` (1 is always added) plus mAP.
///
/// Probes without any matching gallery record count as misses for Rank-k and
/// are left out of the mAP mean.
pub fn evaluate(
    probes: &[EmbeddingRecord],
    gallery: &[EmbeddingRecord],
    ks: &[usize],
    distance: Distance,
) -> Result<RetrievalScores> {
    check_sets(probes, gallery)?;
    if ks.contains(&0) {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let mut ks: Vec<usize> = ks.to_vec();
    ks.push(1);
    ks.sort_unstable();
    ks.dedup();
    let mut hits = alloc::vec![0usize; ks.len()];
    let (mut ap_sum, mut ap_n) = (0.0, 0usize);
    for p in probes {
        let ranked = ranked_gallery(p, gallery, distance);
        let is_match = |g: usize| gallery[g].identity == p.identity;
        if let Some(first) = ranked.iter().position(|&g| is_match(g)) {
            for (h, &k) in hits.iter_mut().zip(&ks) {
                if first < k {
                    *h += 1;
                }
            }
        }
        if let Some(ap) = average_precision(&ranked, is_match) {
            ap_sum += ap;
            ap_n += 1;
        }
    }
    let n = probes.len() as f64;
    Ok(RetrievalScores {
        ranks: ks
            .iter()
            .zip(&hits)
            .map(|(&k, &h)| RankScore { k, accuracy: 100.0 * h as f64 / n })
            .collect(),
        map: if ap_n == 0 { 0.0 } else { 100.0 * ap_sum / ap_n as f64 },
        probes: probes.len(),
        gallery: gallery.len(),
    })
}

/// Percentage of probes whose `k` nearest gallery records include their identity.
pub fn rank_k_accuracy(
    probes: &[EmbeddingRecord],
    gallery: &[EmbeddingRecord],
    k: usize,
    distance: Distance,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    Ok(evaluate(probes, gallery, &[k], distance)?.rank(k).expect("requested"))
}

pub fn mean_average_precision(
    probes: &[EmbeddingRecord],
    gallery: &[EmbeddingRecord],
    distance: Distance,
) -> Result<f64> {
    Ok(evaluate(probes, gallery, &[1], distance)?.map)
}

/// Clean and perturbed accuracy, both in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPair {
    pub clean: f64,
    pub perturbed: f64,
}

impl AccuracyPair {
    pub fn new(clean: f64, perturbed: f64) -> Result<Self> {
        if !clean.is_finite() || !perturbed.is_finite() {
            return Err(Error::InvalidAccuracy(format!("non-finite pair ({clean}, {perturbed})")));
        }
        if clean <= 0.0 {
            return Err(Error::InvalidBaseline(clean));
        }
        if clean > 100.0 || !(0.0..=100.0).contains(&perturbed) {
            return Err(Error::InvalidAccuracy(format!("({clean}, {perturbed}) outside [0, 100]")));
        }
        Ok(Self { clean, perturbed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    /// `1 - (clean - perturbed) / 100`
    pub delta_a: f64,
    /// `1 - (clean - perturbed) / clean`
    pub delta_r: f64,
}

pub fn robustness(pair: AccuracyPair) -> Result<Robustness> {
    if pair.clean.is_nan() || pair.clean <= 0.0 {
        return Err(Error::InvalidBaseline(pair.clean));
    }
    let drop = pair.clean - pair.perturbed;
    Ok(Robustness { delta_a: 1.0 - drop / 100.0, delta_r: 1.0 - drop / pair.clean })
}

/// Intersection over union; two empty masks score 1.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::DimMismatch {
            expected: format!("{}x{}", a.height(), a.width()),
            found: format!("{}x{}", b.height(), b.width()),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GalleryMode {
    #[default]
    Clean,
    Noisy,
}

/// Provenance carried by every report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub model: String,
    pub extractor: String,
    pub protocol: String,
    pub distance: Distance,
    pub gallery_mode: GalleryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy_gallery_manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// How family aggregates were formed.
    pub aggregation: String,
    /// Every resolved configuration value, stringified.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: CorruptionKind,
    pub family: CorruptionFamily,
    pub severity: Severity,
    pub scores: RetrievalScores,
    pub delta_a: f64,
    pub delta_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAggregate {
    pub family: CorruptionFamily,
    pub delta_a: f64,
    pub delta_r: f64,
    /// Number of (kind, severity) cells averaged.
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub metadata: ReportMetadata,
    pub clean: RetrievalScores,
    pub rows: Vec<ReportRow>,
    pub families: Vec<FamilyAggregate>,
}

/// Aggregation rule recorded in [`ReportMetadata::aggregation`].
pub const FAMILY_AGGREGATION: &str = "arithmetic mean of delta over all (kind, severity) cells present in the family";

impl RobustnessReport {
    /// Derives deltas from Rank-1 against the clean baseline and aggregates
    /// per family. Rows are ordered by kind then severity.
    pub fn build(
        mut metadata: ReportMetadata,
        clean: RetrievalScores,
        cells: Vec<(CorruptionKind, Severity, RetrievalScores)>,
    ) -> Result<Self> {
        metadata.aggregation = FAMILY_AGGREGATION.into();
        let mut rows = Vec::with_capacity(cells.len());
        for (kind, severity, scores) in cells {
            let r = robustness(AccuracyPair::new(clean.rank1(), scores.rank1())?)?;
            rows.push(ReportRow {
                kind,
                family: kind.family(),
                severity,
                scores,
                delta_a: r.delta_a,
                delta_r: r.delta_r,
            });
        }
        rows.sort_by_key(|r| (r.kind.ordinal(), r.severity));
        let families = aggregate_families(&rows);
        Ok(Self { metadata, clean, rows, families })
    }

    /// Re-derives every delta and aggregate from the accuracy columns.
    pub fn verify(&self, tol: f64) -> Result<()> {
        for row in &self.rows {
            let r = robustness(AccuracyPair::new(self.clean.rank1(), row.scores.rank1())?)?;
            if (r.delta_a - row.delta_a).abs() > tol || (r.delta_r - row.delta_r).abs() > tol {
                return Err(Error::InvalidConfig(format!(
                    "row {} s{} deltas disagree with its accuracies",
                    row.kind, row.severity
                )));
            }
        }
        let expect = aggregate_families(&self.rows);
        if expect.len() != self.families.len()
            || expect.iter().zip(&self.families).any(|(a, b)| {
                a.family != b.family
                    || a.cells != b.cells
                    || (a.delta_a - b.delta_a).abs() > tol
                    || (a.delta_r - b.delta_r).abs() > tol
            })
        {
            return Err(Error::InvalidConfig("family aggregates disagree with rows".into()));
        }
        Ok(())
    }
}

fn aggregate_families(rows: &[ReportRow]) -> Vec<FamilyAggregate> {
    CorruptionFamily::ALL
        .iter()
        .filter_map(|&family| {
            let members: Vec<&ReportRow> = rows.iter().filter(|r| r.family == family).collect();
            if members.is_empty() {
                return None;
            }
            let n = members.len() as f64;
            Some(FamilyAggregate {
                family,
                delta_a: members.iter().map(|r| r.delta_a).sum::<f64>() / n,
                delta_r: members.iter().map(|r| r.delta_r).sum::<f64>() / n,
                cells: members.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(id: &str, v: &[f64]) -> EmbeddingRecord {
        EmbeddingRecord::new(id, "nm-01", "000", v.to_vec())
    }

    #[test]
    fn two_point_nearest_neighbour() {
        let gallery = vec![rec("A", &[1.0, 0.0]), rec("B", &[0.0, 1.0])];
        let probes = vec![
            EmbeddingRecord::new("A", "nm-05", "000", vec![0.9, 0.1]),
            EmbeddingRecord::new("B", "nm-05", "000", vec![0.2, 0.8]),
        ];
        assert_eq!(rank_k_accuracy(&probes, &gallery, 1, Distance::Euclidean).unwrap(), 100.0);
    }

    #[test]
    fn self_match_excluded_duplicates_found() {
        let mut set = Vec::new();
        for (i, id) in ["a", "b", "c"].iter().enumerate() {
            let v = vec![i as f64, 1.0 + i as f64 * 3.0];
            set.push(rec(id, &v).with_sequence("1"));
            set.push(rec(id, &v).with_sequence("2"));
        }
        for d in [Distance::Euclidean, Distance::Cosine, Distance::NormalizedEuclidean] {
            assert_eq!(rank_k_accuracy(&set, &set, 1, d).unwrap(), 100.0);
            assert_eq!(mean_average_precision(&set, &set, d).unwrap(), 100.0);
        }
    }

    #[test]
    fn ap_half_when_match_second() {
        let gallery = vec![rec("x", &[0.0, 0.0]), rec("p", &[5.0, 0.0])];
        let probe = vec![EmbeddingRecord::new("p", "q", "0", vec![1.0, 0.0])];
        assert_eq!(mean_average_precision(&probe, &gallery, Distance::Euclidean).unwrap(), 50.0);
    }

    #[test]
    fn errors() {
        let g = vec![rec("a", &[1.0, 2.0])];
        let p = vec![rec("a", &[1.0])];
        assert!(matches!(rank_k_accuracy(&p, &g, 1, Distance::Euclidean), Err(Error::DimMismatch { .. })));
        assert_eq!(rank_k_accuracy(&g, &[], 1, Distance::Euclidean), Err(Error::EmptyGallery));
        assert_eq!(rank_k_accuracy(&[], &g, 1, Distance::Euclidean), Err(Error::EmptyProbes));
        assert!(rank_k_accuracy(&g, &g, 0, Distance::Euclidean).is_err());
    }

    #[test]
    fn robustness_examples() {
        let r = robustness(AccuracyPair::new(50.0, 50.0).unwrap()).unwrap();
        assert_eq!((r.delta_a, r.delta_r), (1.0, 1.0));
        let r = robustness(AccuracyPair::new(86.5, 72.5).unwrap()).unwrap();
        assert!((r.delta_a - 0.86).abs() < 1e-9);
        assert!((r.delta_r - 0.838150289).abs() < 1e-6);
        let r = robustness(AccuracyPair::new(50.0, 0.0).unwrap()).unwrap();
        assert_eq!((r.delta_a, r.delta_r), (0.5, 0.0));
        assert_eq!(AccuracyPair::new(0.0, 0.0), Err(Error::InvalidBaseline(0.0)));
        assert_eq!(
            robustness(AccuracyPair { clean: -1.0, perturbed: 0.0 }),
            Err(Error::InvalidBaseline(-1.0))
        );
    }

    #[test]
    fn iou_examples() {
        let top = BinaryMask::from_fn(2, 2, |y, _| y == 0);
        let left = BinaryMask::from_fn(2, 2, |_, x| x == 0);
        assert!((mask_iou(&top, &left).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mask_iou(&top, &top).unwrap(), 1.0);
        let bottom = BinaryMask::from_fn(2, 2, |y, _| y == 1);
        assert_eq!(mask_iou(&top, &bottom).unwrap(), 0.0);
        assert_eq!(mask_iou(&BinaryMask::empty(2, 2), &BinaryMask::empty(2, 2)).unwrap(), 1.0);
        assert!(mask_iou(&top, &BinaryMask::empty(3, 2)).is_err());
    }

    #[test]
    fn report_deltas_and_families() {
        let s = |r1: f64| RetrievalScores { ranks: vec![RankScore { k: 1, accuracy: r1 }], map: r1, probes: 1, gallery: 1 };
        let sev = |l| Severity::new(l).unwrap();
        let report = RobustnessReport::build(
            ReportMetadata::default(),
            s(80.0),
            vec![
                (CorruptionKind::Fog, sev(2), s(40.0)),
                (CorruptionKind::GaussianNoise, sev(1), s(80.0)),
                (CorruptionKind::Fog, sev(1), s(60.0)),
            ],
        )
        .unwrap();
        assert_eq!(report.rows[0].kind, CorruptionKind::GaussianNoise);
        assert_eq!(report.rows[1].severity, sev(1));
        let env = report.families.iter().find(|f| f.family == CorruptionFamily::Environmental).unwrap();
        assert_eq!(env.cells, 2);
        assert!((env.delta_a - 0.7).abs() < 1e-12);
        assert!((env.delta_r - 0.625).abs() < 1e-12);
        report.verify(1e-12).unwrap();
        let mut broken = report.clone();
        broken.rows[0].delta_a = 0.5;
        assert!(broken.verify(1e-12).is_err());
    }
}
