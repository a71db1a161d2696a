//! The five-axis formal manifold: pole-prompt directions, Gram–Schmidt basis,
//! projection, pole probabilities, artist signatures and manifold distance.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{EmbeddingMatrix, StoreError};

pub const AXIS_COUNT: usize = 5;
/// Residual norms below this during orthogonalization mean linear dependence.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Default pole prompts, positive pole first, in the fixed opposition order.
pub const DEFAULT_POLE_PROMPTS: [(&str, &str); AXIS_COUNT] = [
    ("a painterly artwork with blurred, merging masses of tone", "a linear artwork with crisp, clearly drawn contours"),
    ("a recessional composition organized in depth along diagonals", "a planar composition organized in parallel layers"),
    ("an open form composition that extends beyond the frame", "a closed form composition contained within the frame"),
    ("a unified composition where parts merge into a single whole", "a composition of multiple independent, self-contained parts"),
    ("a relatively unclear image with partly hidden forms", "an absolutely clear image with fully revealed forms"),
];

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("axis {axis} is linearly dependent on the preceding axes (residual {residual:e})")]
    DegenerateAxis { axis: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("patch weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("patch field has {patches} patches but {weights} weights")]
    LengthMismatch { patches: usize, weights: usize },
    #[error("empty portfolio")]
    EmptyPortfolio,
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("axis index {0} out of range")]
    UnknownAxis(usize),
    #[error("invalid axis order {0:?}")]
    InvalidOrder(Vec<usize>),
    #[error("prompt file: {0}")]
    PromptFile(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

/// One opposition: the two pole embeddings and their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleAxis {
    /// 1-based opposition index.
    pub axis_index: usize,
    pub positive_prompt_key: String,
    pub negative_prompt_key: String,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
    pub raw_direction: Vec<f64>,
}

impl PoleAxis {
    pub fn new(axis_index: usize, positive: Vec<f64>, negative: Vec<f64>) -> Result<Self> {
        if positive.len() != negative.len() {
            return Err(ManifoldError::DimMismatch {
                expected: positive.len(),
                found: negative.len(),
            });
        }
        let raw_direction = positive.iter().zip(&negative).map(|(p, n)| p - n).collect();
        Ok(Self {
            axis_index,
            positive_prompt_key: format!("axis{axis_index}+"),
            negative_prompt_key: format!("axis{axis_index}-"),
            positive,
            negative,
            raw_direction,
        })
    }

    /// Reads `axis{k}+` and `axis{k}-` from a prompt-embedding store.
    pub fn from_store(store: &EmbeddingMatrix, axis_index: usize) -> Result<Self> {
        let pos = store.row_f64(&format!("axis{axis_index}+"))?;
        let neg = store.row_f64(&format!("axis{axis_index}-"))?;
        Self::new(axis_index, pos, neg)
    }

    /// Direct orthonormal-free construction from a raw direction (tests, synthetic data).
    pub fn from_direction(axis_index: usize, direction: Vec<f64>) -> Self {
        let zeros = vec![0.0; direction.len()];
        Self::new(axis_index, direction, zeros).expect("equal lengths")
    }

    pub fn dim(&self) -> usize {
        self.raw_direction.len()
    }
}

/// Loads all five axes from a prompt-embedding store.
pub fn axes_from_store(store: &EmbeddingMatrix) -> Result<Vec<PoleAxis>> {
    (1..=AXIS_COUNT).map(|k| PoleAxis::from_store(store, k)).collect()
}

/// Parses a pole prompt file: five lines of `positive<TAB>negative`.
pub fn read_pole_prompts(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| ManifoldError::PromptFile(e.to_string()))?;
    parse_pole_prompts(&text)
}

pub fn parse_pole_prompts(text: &str) -> Result<Vec<(String, String)>> {
    let pairs: Vec<(String, String)> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let (p, n) = line
                .split_once('\t')
                .ok_or_else(|| ManifoldError::PromptFile(format!("line {} has no TAB", i + 1)))?;
            Ok((p.trim().to_string(), n.trim().to_string()))
        })
        .collect::<Result<_>>()?;
    if pairs.len() != AXIS_COUNT {
        return Err(ManifoldError::PromptFile(format!(
            "expected {AXIS_COUNT} prompt pairs, found {}",
            pairs.len()
        )));
    }
    Ok(pairs)
}

/// Orthonormal basis of the formal subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WolfflinBasis {
    pub axes: Vec<Vec<f64>>,
    /// `source_axis_order[i]` is the input-axis position orthogonalized i-th.
    pub source_axis_order: Vec<usize>,
    pub dim: usize,
}

/// Gram–Schmidt in the given axis order (identity order by default).
pub fn build_basis(axes: &[PoleAxis]) -> Result<WolfflinBasis> {
    let order: Vec<usize> = (0..axes.len()).collect();
    build_basis_with_order(axes, &order)
}

pub fn build_basis_with_order(axes: &[PoleAxis], order: &[usize]) -> Result<WolfflinBasis> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..axes.len()).collect::<Vec<_>>() {
        return Err(ManifoldError::InvalidOrder(order.to_vec()));
    }
    let dim = axes.first().map_or(0, PoleAxis::dim);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(axes.len());
    for &src in order {
        let axis = &axes[src];
        if axis.dim() != dim {
            return Err(ManifoldError::DimMismatch {
                expected: dim,
                found: axis.dim(),
            });
        }
        let mut v = axis.raw_direction.clone();
        // two passes of classical Gram–Schmidt keep the Gram matrix at machine precision
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let residual = l2(&v);
        if residual < DEGENERACY_TOLERANCE {
            return Err(ManifoldError::DegenerateAxis {
                axis: axis.axis_index,
                residual,
            });
        }
        v.iter_mut().for_each(|x| *x /= residual);
        basis.push(v);
    }
    Ok(WolfflinBasis {
        axes: basis,
        source_axis_order: order.to_vec(),
        dim,
    })
}

impl WolfflinBasis {
    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.axes
            .iter()
            .map(|a| self.axes.iter().map(|b| dot(a, b)).collect())
            .collect()
    }

    /// Largest absolute deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.gram().iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Formal coordinates of one artwork.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WolfflinCoord(pub Vec<f64>);

impl WolfflinCoord {
    pub fn norm(&self) -> f64 {
        l2(&self.0)
    }
}

pub fn project(z: &[f64], basis: &WolfflinBasis) -> Result<WolfflinCoord> {
    if z.len() != basis.dim {
        return Err(ManifoldError::DimMismatch {
            expected: basis.dim,
            found: z.len(),
        });
    }
    Ok(WolfflinCoord(basis.axes.iter().map(|b| dot(z, b)).collect()))
}

pub fn project_f32(z: &[f32], basis: &WolfflinBasis) -> Result<WolfflinCoord> {
    let z: Vec<f64> = z.iter().map(|&x| x as f64).collect();
    project(&z, basis)
}

/// Weighted aggregation of per-patch projections; weights must sum to one.
pub fn project_patches(
    patch_field: &[Vec<f64>],
    weights: &[f64],
    basis: &WolfflinBasis,
) -> Result<WolfflinCoord> {
    if patch_field.len() != weights.len() {
        return Err(ManifoldError::LengthMismatch {
            patches: patch_field.len(),
            weights: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ManifoldError::WeightSum(total));
    }
    let mut w = vec![0.0; basis.len()];
    for (phi, &alpha) in patch_field.iter().zip(weights) {
        let c = project(phi, basis)?;
        for (wk, ck) in w.iter_mut().zip(&c.0) {
            *wk += alpha * ck;
        }
    }
    Ok(WolfflinCoord(w))
}

/// Uniform patch weights `1/|patches|`.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureConfig {
    pub kappa: f64,
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

/// Probability of the positive pole: a two-way softmax over the raw pole
/// similarities `<z, f(p+)>/kappa` and `<z, f(p-)>/kappa`.
pub fn pole_probability(z: &[f64], axis: &PoleAxis, temperature: TemperatureConfig) -> Result<f64> {
    if !(temperature.kappa > 0.0) {
        return Err(ManifoldError::InvalidTemperature(temperature.kappa));
    }
    if z.len() != axis.dim() {
        return Err(ManifoldError::DimMismatch {
            expected: axis.dim(),
            found: z.len(),
        });
    }
    let gap = (dot(z, &axis.positive) - dot(z, &axis.negative)) / temperature.kappa;
    Ok(sigmoid(gap))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtistSignature {
    pub artist_id: String,
    pub mu: Vec<f64>,
    pub n_works: usize,
}

/// Componentwise mean of a portfolio's coordinates.
pub fn artist_signature(artist_id: &str, coords: &[WolfflinCoord]) -> Result<ArtistSignature> {
    let first = coords.first().ok_or(ManifoldError::EmptyPortfolio)?;
    let k = first.0.len();
    let mut mu = vec![0.0; k];
    for c in coords {
        if c.0.len() != k {
            return Err(ManifoldError::DimMismatch {
                expected: k,
                found: c.0.len(),
            });
        }
        for (m, x) in mu.iter_mut().zip(&c.0) {
            *m += x;
        }
    }
    let n = coords.len() as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    Ok(ArtistSignature {
        artist_id: artist_id.to_string(),
        mu,
        n_works: coords.len(),
    })
}

/// Euclidean distance between signature means.
pub fn manifold_distance(a: &ArtistSignature, b: &ArtistSignature) -> f64 {
    a.mu.iter()
        .zip(&b.mu)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(dim: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    fn canonical_basis(dim: usize) -> WolfflinBasis {
        let axes: Vec<PoleAxis> = (0..5).map(|i| PoleAxis::from_direction(i + 1, e(dim, i))).collect();
        build_basis(&axes).unwrap()
    }

    #[test]
    fn reduced_two_axis_gram_schmidt() {
        let axes = vec![
            PoleAxis::from_direction(1, vec![1.0, 0.0, 0.0]),
            PoleAxis::from_direction(2, vec![1.0, 1.0, 0.0]),
        ];
        let b = build_basis(&axes).unwrap();
        assert_eq!(b.axes[0], vec![1.0, 0.0, 0.0]);
        assert!((b.axes[1][0]).abs() < 1e-15);
        assert!((b.axes[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_input_is_fixed_point() {
        let b = canonical_basis(7);
        for (i, axis) in b.axes.iter().enumerate() {
            for (a, x) in axis.iter().zip(e(7, i)) {
                assert!((a - x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identical_directions_are_degenerate() {
        let axes = vec![
            PoleAxis::from_direction(1, vec![1.0, 2.0, 3.0]),
            PoleAxis::from_direction(2, vec![1.0, 2.0, 3.0]),
        ];
        assert!(matches!(
            build_basis(&axes),
            Err(ManifoldError::DegenerateAxis { axis: 2, .. })
        ));
    }

    #[test]
    fn pole_embeddings_differenced() {
        let a = PoleAxis::new(3, vec![1.0, 2.0], vec![0.5, -1.0]).unwrap();
        assert_eq!(a.raw_direction, vec![0.5, 3.0]);
        assert_eq!(a.positive_prompt_key, "axis3+");
    }

    #[test]
    fn projection_examples() {
        let b = canonical_basis(8);
        assert_eq!(project(&b.axes[0], &b).unwrap().0, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(project(&e(8, 6), &b).unwrap().0, vec![0.0; 5]);
        let z: Vec<f64> = b.axes[0].iter().zip(&b.axes[1]).map(|(x, y)| 2.0 * x + 3.0 * y).collect();
        let w = project(&z, &b).unwrap();
        for (a, x) in w.0.iter().zip([2.0, 3.0, 0.0, 0.0, 0.0]) {
            assert!((a - x).abs() < 1e-9);
        }
        assert!(matches!(project(&[1.0], &b), Err(ManifoldError::DimMismatch { .. })));
    }

    #[test]
    fn patch_projection_examples() {
        let b = canonical_basis(6);
        let phi = vec![0.3, -0.2, 0.1, 0.0, 0.9, 0.4];
        assert_eq!(
            project_patches(std::slice::from_ref(&phi), &[1.0], &b).unwrap(),
            project(&phi, &b).unwrap()
        );
        let two = project_patches(&[phi.clone(), phi.clone()], &uniform_weights(2), &b).unwrap();
        for (a, x) in two.0.iter().zip(project(&phi, &b).unwrap().0) {
            assert!((a - x).abs() < 1e-12);
        }
        let w = project_patches(&[e(6, 0), e(6, 1)], &[0.25, 0.75], &b).unwrap();
        assert_eq!(w.0, vec![0.25, 0.75, 0.0, 0.0, 0.0]);
        assert!(matches!(
            project_patches(&[e(6, 0)], &[0.9], &b),
            Err(ManifoldError::WeightSum(_))
        ));
        assert!(matches!(
            project_patches(&[e(6, 0)], &[0.5, 0.5], &b),
            Err(ManifoldError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pole_probability_examples() {
        let axis = PoleAxis::new(1, vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let t = TemperatureConfig::default();
        assert_eq!(pole_probability(&[0.5, 0.5], &axis, t).unwrap(), 0.5);

        let kappa = 0.7;
        let gap = kappa * 3.0f64.ln();
        let q = pole_probability(&[gap, 0.0], &axis, TemperatureConfig { kappa }).unwrap();
        assert!((q - 0.75).abs() < 1e-6);

        let mut prev = 1.0;
        for kappa in [0.5, 1.0, 2.0, 8.0, 64.0, 1e6] {
            let q = pole_probability(&[1.0, 0.0], &axis, TemperatureConfig { kappa }).unwrap();
            assert!(q < prev && q > 0.5);
            prev = q;
        }
        assert!((prev - 0.5).abs() < 1e-6);
        assert!(pole_probability(&[1.0, 0.0], &axis, TemperatureConfig { kappa: 0.0 }).is_err());
    }

    #[test]
    fn signature_examples() {
        let w = WolfflinCoord(vec![0.3, -0.1, 0.2, 0.5, -0.7]);
        assert_eq!(artist_signature("a", std::slice::from_ref(&w)).unwrap().mu, w.0);
        let neg = WolfflinCoord(w.0.iter().map(|x| -x).collect());
        assert_eq!(artist_signature("a", &[w, neg]).unwrap().mu, vec![0.0; 5]);
        let s = artist_signature(
            "a",
            &[
                WolfflinCoord(vec![1.0, 0.0, 0.0, 0.0, 0.0]),
                WolfflinCoord(vec![0.0, 1.0, 0.0, 0.0, 0.0]),
            ],
        )
        .unwrap();
        assert_eq!(s.mu, vec![0.5, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(s.n_works, 2);
        assert!(matches!(artist_signature("a", &[]), Err(ManifoldError::EmptyPortfolio)));
    }

    #[test]
    fn distance_examples() {
        let sig = |mu: Vec<f64>| ArtistSignature { artist_id: "x".into(), mu, n_works: 1 };
        let a = sig(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let b = sig(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(manifold_distance(&a, &a), 0.0);
        assert!((manifold_distance(&a, &b) - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn prompt_file_parsing() {
        let text: String = DEFAULT_POLE_PROMPTS
            .iter()
            .map(|(p, n)| format!("{p}\t{n}\n"))
            .collect();
        assert_eq!(parse_pole_prompts(&text).unwrap().len(), 5);
        assert!(parse_pole_prompts("a\tb\n").is_err());
        assert!(parse_pole_prompts("no tab here\n").is_err());
    }

    proptest! {
        #[test]
        fn pole_probability_is_complementary(gap in -20.0f64..20.0) {
            let axis = PoleAxis::new(1, vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
            let t = TemperatureConfig::default();
            let q = pole_probability(&[gap, 0.0], &axis, t).unwrap();
            let r = pole_probability(&[0.0, gap], &axis, t).unwrap();
            prop_assert!((q + r - 1.0).abs() < 1e-12);
        }

        #[test]
        fn distance_triangle_inequality(
            a in proptest::collection::vec(-3.0f64..3.0, 5),
            b in proptest::collection::vec(-3.0f64..3.0, 5),
            c in proptest::collection::vec(-3.0f64..3.0, 5),
        ) {
            let s = |mu: Vec<f64>| ArtistSignature { artist_id: String::new(), mu, n_works: 1 };
            let (a, b, c) = (s(a), s(b), s(c));
            prop_assert!(manifold_distance(&a, &c) <= manifold_distance(&a, &b) + manifold_distance(&b, &c) + 1e-12);
            prop_assert_eq!(manifold_distance(&a, &b), manifold_distance(&b, &a));
        }
    }
}
