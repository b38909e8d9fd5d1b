//! Class-aware two-stage sampling: draw a category uniformly over the
//! categories present in the dataset, then an image uniformly over the
//! images containing that category. Both stages are with replacement, so
//! rare categories are trained as often as frequent ones.
//!
//! Streams are reproducible: the same seed and index always produce the same
//! draws on every platform (ChaCha8 generator, sorted index internals).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::boxes::GroundTruthBox;
use crate::labelspace::LabelId;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingError {
    EmptyIndex,
    /// A category with no images; cannot happen for indexes built by
    /// [`build_index`].
    EmptyCategory(LabelId),
    ZeroDraws,
}

impl fmt::Display for SamplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingError::EmptyIndex => write!(f, "dataset index has no categories"),
            SamplingError::EmptyCategory(id) => write!(f, "category {id} lists no images"),
            SamplingError::ZeroDraws => write!(f, "draw count must be at least 1"),
        }
    }
}

/// Category-to-images and image-to-categories maps over a ground-truth set.
/// Image lists are sorted and deduplicated so sampling is deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetIndex {
    categories: Vec<LabelId>,
    images: BTreeMap<LabelId, Vec<String>>,
    image_categories: BTreeMap<String, BTreeSet<LabelId>>,
}

impl DatasetIndex {
    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn categories(&self) -> &[LabelId] {
        &self.categories
    }

    pub fn images_for(&self, category: &LabelId) -> Option<&[String]> {
        self.images.get(category).map(Vec::as_slice)
    }

    pub fn categories_for_image(&self, image: &str) -> Option<&BTreeSet<LabelId>> {
        self.image_categories.get(image)
    }

    pub fn num_images(&self) -> usize {
        self.image_categories.len()
    }
}

/// Builds the index from annotations. Images are listed once per category no
/// matter how many boxes of that category they contain.
pub fn build_index(gts: &[GroundTruthBox]) -> DatasetIndex {
    let mut images: BTreeMap<LabelId, BTreeSet<String>> = BTreeMap::new();
    let mut image_categories: BTreeMap<String, BTreeSet<LabelId>> = BTreeMap::new();
    for gt in gts {
        images
            .entry(gt.label.clone())
            .or_default()
            .insert(gt.image_id.clone());
        image_categories
            .entry(gt.image_id.clone())
            .or_default()
            .insert(gt.label.clone());
    }
    let categories: Vec<LabelId> = images.keys().cloned().collect();
    let images = images
        .into_iter()
        .map(|(label, set)| (label, set.into_iter().collect()))
        .collect();
    DatasetIndex {
        categories,
        images,
        image_categories,
    }
}

/// One two-stage draw: category uniform over indexed categories, image
/// uniform over that category's images.
pub fn sample_one(
    index: &DatasetIndex,
    rng: &mut impl Rng,
) -> Result<(LabelId, String), SamplingError> {
    if index.is_empty() {
        return Err(SamplingError::EmptyIndex);
    }
    let category = &index.categories[rng.gen_range(0..index.categories.len())];
    let images = index
        .images
        .get(category)
        .filter(|list| !list.is_empty())
        .ok_or_else(|| SamplingError::EmptyCategory(category.clone()))?;
    let image = images[rng.gen_range(0..images.len())].clone();
    Ok((category.clone(), image))
}

/// A reproducible sequence of draws: pure function of (index, seed, n).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub seed: u64,
    pub draws: Vec<(LabelId, String)>,
}

/// `n` independent two-stage draws from a seed-initialized generator.
pub fn sample_epoch(
    index: &DatasetIndex,
    n: usize,
    seed: u64,
) -> Result<SampleStream, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroDraws);
    }
    let mut rng = seeded(seed);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        draws.push(sample_one(index, &mut rng)?);
    }
    Ok(SampleStream { seed, draws })
}

/// Stage-1 category counts over the stream; zero entries for indexed
/// categories that were never drawn. Uniform sampling makes these counts
/// multinomial-uniform.
pub fn exposure_histogram(stream: &SampleStream, index: &DatasetIndex) -> BTreeMap<LabelId, u64> {
    let mut histogram: BTreeMap<LabelId, u64> =
        index.categories.iter().map(|c| (c.clone(), 0)).collect();
    for (category, _) in &stream.draws {
        *histogram.entry(category.clone()).or_insert(0) += 1;
    }
    histogram
}

/// Exact image marginal under the two-stage scheme:
/// `P(image) = (1/|categories|) * sum_{c containing image} 1/|images(c)|`.
/// The enumeration oracle for distribution tests.
pub fn exact_image_marginal(index: &DatasetIndex) -> BTreeMap<String, f64> {
    let c = index.num_categories() as f64;
    let mut marginal: BTreeMap<String, f64> = BTreeMap::new();
    for images in index.images.values() {
        let p_image = 1.0 / (c * images.len() as f64);
        for image in images {
            *marginal.entry(image.clone()).or_insert(0.0) += p_image;
        }
    }
    marginal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::BBox;

    fn lid(s: &str) -> LabelId {
        LabelId::new(s).unwrap()
    }

    fn gt(image: &str, label: &str) -> GroundTruthBox {
        GroundTruthBox {
            image_id: image.into(),
            label: lid(label),
            bbox: BBox::new(0.1, 0.1, 0.4, 0.4).unwrap(),
        }
    }

    #[test]
    fn empty_input_builds_empty_index() {
        let index = build_index(&[]);
        assert!(index.is_empty());
        assert_eq!(index.num_images(), 0);
    }

    #[test]
    fn duplicate_boxes_list_image_once() {
        let index = build_index(&[gt("im", "a"), gt("im", "a")]);
        assert_eq!(index.images_for(&lid("a")).unwrap(), ["im"]);
    }

    #[test]
    fn shared_label_lists_both_images() {
        let index = build_index(&[gt("im1", "a"), gt("im2", "a")]);
        assert_eq!(index.images_for(&lid("a")).unwrap(), ["im1", "im2"]);
        assert!(index
            .categories_for_image("im1")
            .unwrap()
            .contains(&lid("a")));
    }

    #[test]
    fn single_pair_always_drawn() {
        let index = build_index(&[gt("im", "a")]);
        let mut rng = seeded(3);
        for _ in 0..16 {
            assert_eq!(
                sample_one(&index, &mut rng).unwrap(),
                (lid("a"), "im".into())
            );
        }
    }

    #[test]
    fn empty_index_rejected() {
        let index = build_index(&[]);
        let mut rng = seeded(3);
        assert_eq!(
            sample_one(&index, &mut rng).unwrap_err(),
            SamplingError::EmptyIndex
        );
        assert_eq!(
            sample_epoch(&index, 5, 3).unwrap_err(),
            SamplingError::EmptyIndex
        );
    }

    #[test]
    fn zero_draws_rejected() {
        let index = build_index(&[gt("im", "a")]);
        assert_eq!(
            sample_epoch(&index, 0, 3).unwrap_err(),
            SamplingError::ZeroDraws
        );
    }

    #[test]
    fn same_seed_same_stream() {
        let index = build_index(&[gt("a", "c1"), gt("b", "c1"), gt("b", "c2")]);
        let s1 = sample_epoch(&index, 100, 42).unwrap();
        let s2 = sample_epoch(&index, 100, 42).unwrap();
        assert_eq!(s1, s2);
        let s3 = sample_epoch(&index, 100, 43).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn two_disjoint_categories_split_evenly() {
        // {c1: {a}, c2: {b}} -> P(a) = P(b) = 0.5
        let index = build_index(&[gt("a", "c1"), gt("b", "c2")]);
        let marginal = exact_image_marginal(&index);
        assert!((marginal["a"] - 0.5).abs() < 1e-15);
        assert!((marginal["b"] - 0.5).abs() < 1e-15);
        let stream = sample_epoch(&index, 20_000, 11).unwrap();
        let count_a = stream
            .draws
            .iter()
            .filter(|(_, image)| image == "a")
            .count() as f64;
        assert!((count_a / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn overlapping_categories_enumeration_oracle() {
        // {c1: {a, b}, c2: {b}} -> P(a) = 0.25, P(b) = 0.75
        let index = build_index(&[gt("a", "c1"), gt("b", "c1"), gt("b", "c2")]);
        let marginal = exact_image_marginal(&index);
        assert!((marginal["a"] - 0.25).abs() < 1e-15);
        assert!((marginal["b"] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn histogram_counts_stage_one_draws() {
        let index = build_index(&[gt("a", "c1"), gt("b", "c2"), gt("c", "c3")]);
        let stream = SampleStream {
            seed: 0,
            draws: alloc::vec![],
        };
        let histogram = exposure_histogram(&stream, &index);
        assert_eq!(histogram.len(), 3);
        assert!(histogram.values().all(|&v| v == 0));

        let stream = sample_epoch(&index, 300, 5).unwrap();
        let histogram = exposure_histogram(&stream, &index);
        assert_eq!(histogram.values().sum::<u64>(), 300);
    }

    #[test]
    fn single_category_takes_all_draws() {
        let index = build_index(&[gt("a", "c1"), gt("b", "c1")]);
        let stream = sample_epoch(&index, 50, 9).unwrap();
        let histogram = exposure_histogram(&stream, &index);
        assert_eq!(histogram[&lid("c1")], 50);
    }
}
