//! Probe/gallery protocols, noisy-gallery assignment and clean/noisy training mixes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::round_half_away;
use crate::metrics::EmbeddingRecord;
use crate::rng::SeededRng;
use crate::severity::{CorruptionKind, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "CASIA-B")]
    CasiaB,
    #[serde(rename = "CCPG")]
    Ccpg,
    #[serde(rename = "SUSTech1K")]
    Sustech1k,
    #[serde(rename = "MEVID")]
    Mevid,
    #[serde(rename = "custom")]
    Custom,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::CasiaB => "CASIA-B",
            Dataset::Ccpg => "CCPG",
            Dataset::Sustech1k => "SUSTech1K",
            Dataset::Mevid => "MEVID",
            Dataset::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub dataset: Dataset,
    pub gallery_conditions: Vec<String>,
    pub probe_conditions: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl ProtocolSpec {
    pub fn new(dataset: Dataset, gallery: Vec<String>, probe: Vec<String>) -> Result<Self> {
        let spec = Self { dataset, gallery_conditions: gallery, probe_conditions: probe };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gallery_conditions.is_empty() || self.probe_conditions.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "{} protocol needs nonempty gallery and probe condition lists",
                self.dataset.name()
            )));
        }
        Ok(())
    }

    pub fn casia_b() -> Self {
        Self {
            dataset: Dataset::CasiaB,
            gallery_conditions: strings(&["nm-01", "nm-02", "nm-03", "nm-04"]),
            probe_conditions: strings(&["nm-05", "nm-06", "bg-01", "bg-02", "cl-01", "cl-02"]),
        }
    }

    pub fn sustech1k() -> Self {
        Self {
            dataset: Dataset::Sustech1k,
            gallery_conditions: strings(&["00-nm"]),
            probe_conditions: strings(&[
                "01-nm", "bg", "cl", "cr", "ub", "uf", "oc", "nt", "01", "02", "03", "04",
            ]),
        }
    }

    fn in_gallery(&self, c: &str) -> bool {
        self.gallery_conditions.iter().any(|g| g == c)
    }

    fn in_probe(&self, c: &str) -> bool {
        self.probe_conditions.iter().any(|p| p == c)
    }
}

/// Anything carrying a condition label.
pub trait Conditioned {
    fn condition(&self) -> &str;
}

impl Conditioned for EmbeddingRecord {
    fn condition(&self) -> &str {
        &self.condition
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split<T> {
    pub gallery: Vec<T>,
    pub probe: Vec<T>,
    /// Records whose condition is in neither list.
    pub excluded: usize,
    /// Records whose condition is in both lists; these go to the gallery.
    pub ambiguous: usize,
    /// Distinct conditions that matched neither list, sorted.
    pub unknown_conditions: Vec<String>,
}

/// Partitions records by condition. Unknown conditions are dropped and
/// counted; a condition listed on both sides goes to the gallery.
pub fn split<T: Clone + Conditioned>(records: &[T], spec: &ProtocolSpec) -> Result<Split<T>> {
    spec.validate()?;
    let mut out = Split {
        gallery: Vec::new(),
        probe: Vec::new(),
        excluded: 0,
        ambiguous: 0,
        unknown_conditions: Vec::new(),
    };
    let mut unknown = BTreeSet::new();
    for r in records {
        let c = r.condition();
        match (spec.in_gallery(c), spec.in_probe(c)) {
            (true, both) => {
                out.ambiguous += usize::from(both);
                out.gallery.push(r.clone());
            }
            (false, true) => out.probe.push(r.clone()),
            (false, false) => {
                out.excluded += 1;
                unknown.insert(c.to_string());
            }
        }
    }
    out.unknown_conditions = unknown.into_iter().collect();
    if out.gallery.is_empty() {
        return Err(Error::EmptySplit("gallery"));
    }
    if out.probe.is_empty() {
        return Err(Error::EmptySplit("probe"));
    }
    Ok(out)
}

/// The corruption applied to a manifest entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionTag {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

/// One line of a sequence manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sequence_id: String,
    pub identity: String,
    pub condition: String,
    pub view: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionTag>,
}

impl Conditioned for ManifestRecord {
    fn condition(&self) -> &str {
        &self.condition
    }
}

/// Probabilities over severities 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityDistribution {
    probabilities: [f64; 5],
}

impl Default for SeverityDistribution {
    fn default() -> Self {
        Self { probabilities: [0.6, 0.3, 0.1, 0.0, 0.0] }
    }
}

impl SeverityDistribution {
    pub fn new(probabilities: [f64; 5]) -> Result<Self> {
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(format!("invalid severity probabilities {probabilities:?}")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("severity probabilities sum to {total}, not 1")));
        }
        Ok(Self { probabilities })
    }

    /// From `(level, probability)` pairs; unlisted levels get 0.
    pub fn from_pairs(pairs: &[(u8, f64)]) -> Result<Self> {
        let mut p = [0.0; 5];
        for &(level, prob) in pairs {
            p[Severity::new(level)?.index()] += prob;
        }
        Self::new(p)
    }

    pub fn probabilities(&self) -> [f64; 5] {
        self.probabilities
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Severity {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut last = Severity::ALL[0];
        for (s, &p) in Severity::ALL.iter().zip(&self.probabilities) {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = *s;
            if u < acc {
                return *s;
            }
        }
        last
    }
}

/// Assigns one corruption (kind uniform over `kinds`, severity from `dist`)
/// to each gallery sequence. Entry `i` depends only on `(seed, i)`.
pub fn build_noisy_gallery(
    gallery: &[ManifestRecord],
    kinds: &[CorruptionKind],
    dist: &SeverityDistribution,
    seed: u64,
) -> Result<Vec<ManifestRecord>> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    if kinds.is_empty() {
        return Err(Error::InvalidConfig("noisy gallery needs at least one corruption kind".into()));
    }
    let root = SeededRng::new(seed);
    Ok(gallery
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut rng = root.child(i as u64);
            let kind = kinds[rng.below(kinds.len() as u64) as usize];
            let severity = dist.sample(&mut rng);
            let seed = rand_core::RngCore::next_u64(&mut rng);
            ManifestRecord { corruption: Some(CorruptionTag { kind, severity, seed }), ..rec.clone() }
        })
        .collect())
}

/// Clean:noisy proportions of a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixRatio {
    pub clean_fraction: f64,
    pub noisy_fraction: f64,
}

impl MixRatio {
    pub fn new(clean_fraction: f64, noisy_fraction: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !ok(clean_fraction) || !ok(noisy_fraction) || (clean_fraction + noisy_fraction - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "mix ratio {clean_fraction}:{noisy_fraction} must be two fractions summing to 1"
            )));
        }
        Ok(Self { clean_fraction, noisy_fraction })
    }

    /// Parses `"80:20"` style ratios (any positive scale).
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse mix ratio `{s}`"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        if a < 0.0 || b < 0.0 || a + b <= 0.0 {
            return Err(bad());
        }
        Self::new(a / (a + b), b / (a + b))
    }

    /// `round(noisy_fraction * n)`, halves away from zero.
    pub fn replaced_count(&self, n: usize) -> usize {
        round_half_away(self.noisy_fraction * n as f64) as usize
    }
}

/// Corruptions seen during noise-aware training unless configured otherwise:
/// one per family plus a second digital kind.
pub const DEFAULT_SEEN_KINDS: [CorruptionKind; 5] = [
    CorruptionKind::GaussianNoise,
    CorruptionKind::DefocusBlur,
    CorruptionKind::Freeze,
    CorruptionKind::Fog,
    CorruptionKind::Occlusion,
];

/// Kinds not in `seen`, in canonical order.
pub fn unseen_kinds(seen: &[CorruptionKind]) -> Vec<CorruptionKind> {
    CorruptionKind::ALL.iter().copied().filter(|k| !seen.contains(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingMix {
    /// Clean manifest order, with replaced entries swapped for their noisy counterpart.
    pub records: Vec<ManifestRecord>,
    /// Sequence ids that were replaced, sorted.
    pub replaced: Vec<String>,
}

/// Replaces `round(noisy_fraction * N)` clean sequences with their corrupted
/// counterparts (matched by `sequence_id`), spreading replacements so each
/// identity receives `floor` or `ceil` of its proportional share.
pub fn build_training_mix(
    clean: &[ManifestRecord],
    noisy: &[ManifestRecord],
    ratio: MixRatio,
    seed: u64,
) -> Result<TrainingMix> {
    if clean.is_empty() {
        return Err(Error::InvalidConfig("clean manifest is empty".into()));
    }
    let total = ratio.replaced_count(clean.len());
    if total > 0 && noisy.is_empty() {
        return Err(Error::InvalidConfig("noisy manifest is empty".into()));
    }
    let counterparts: BTreeMap<&str, &ManifestRecord> =
        noisy.iter().map(|r| (r.sequence_id.as_str(), r)).collect();

    let mut by_identity: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in clean.iter().enumerate() {
        by_identity.entry(r.identity.as_str()).or_default().push(i);
    }
    let mut rng = SeededRng::new(seed);
    // Largest-remainder quotas; remainder ties broken by a seeded shuffle.
    let f = ratio.noisy_fraction;
    let mut quotas: Vec<(&str, usize, f64)> = by_identity
        .iter()
        .map(|(id, members)| {
            let exact = f * members.len() as f64;
            let base = libm::floor(exact) as usize;
            (*id, base, exact - base as f64)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    rng.shuffle(&mut order);
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2));
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        quotas[i].1 += 1;
    }

    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for (id, quota, _) in &quotas {
        let members = &by_identity[id];
        for pick in rng.choose_distinct(members.len(), (*quota).min(members.len())) {
            chosen.insert(members[pick]);
        }
    }
    let mut records = clean.to_vec();
    let mut replaced = Vec::with_capacity(chosen.len());
    for i in chosen {
        let id = &clean[i].sequence_id;
        let noisy = counterparts.get(id.as_str()).ok_or_else(|| Error::MissingCounterpart(id.clone()))?;
        records[i] = (*noisy).clone();
        replaced.push(id.clone());
    }
    replaced.sort();
    Ok(TrainingMix { records, replaced })
}
