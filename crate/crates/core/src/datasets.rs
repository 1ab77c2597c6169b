//! Concept-annotated datasets, synthetic generators and the Bayes oracle of
//! the noisy-XOR distribution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{HcmrError, Result};

/// Row-major inputs and concept labels with an observation mask.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub input_dim: usize,
    pub n_concepts: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<bool>,
    pub observed: Vec<bool>,
}

impl Dataset {
    pub fn new(input_dim: usize, n_concepts: usize) -> Self {
        Dataset {
            input_dim,
            n_concepts,
            inputs: Vec::new(),
            labels: Vec::new(),
            observed: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], labels: &[bool], observed: &[bool]) -> Result<()> {
        if x.len() != self.input_dim || labels.len() != self.n_concepts || observed.len() != self.n_concepts {
            return Err(HcmrError::Shape(format!(
                "example with {} features and {} labels does not fit a dataset of {} features and {} concepts",
                x.len(),
                labels.len(),
                self.input_dim,
                self.n_concepts
            )));
        }
        self.inputs.extend_from_slice(x);
        self.labels.extend_from_slice(labels);
        self.observed.extend_from_slice(observed);
        Ok(())
    }

    pub fn len(&self) -> usize {
        if self.n_concepts == 0 {
            if self.input_dim == 0 {
                0
            } else {
                self.inputs.len() / self.input_dim
            }
        } else {
            self.labels.len() / self.n_concepts
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, e: usize) -> &[f64] {
        &self.inputs[e * self.input_dim..(e + 1) * self.input_dim]
    }

    pub fn labels(&self, e: usize) -> &[bool] {
        &self.labels[e * self.n_concepts..(e + 1) * self.n_concepts]
    }

    pub fn observed(&self, e: usize) -> &[bool] {
        &self.observed[e * self.n_concepts..(e + 1) * self.n_concepts]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.inputs.len() != n * self.input_dim
            || self.labels.len() != n * self.n_concepts
            || self.observed.len() != n * self.n_concepts
        {
            return Err(HcmrError::Shape("dataset buffers disagree on the number of examples".into()));
        }
        Ok(())
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut d = Dataset::new(self.input_dim, self.n_concepts);
        for &e in indices {
            d.inputs.extend_from_slice(self.x(e));
            d.labels.extend_from_slice(self.labels(e));
            d.observed.extend_from_slice(self.observed(e));
        }
        d
    }

    /// First `n` examples and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let all: Vec<usize> = (0..self.len()).collect();
        (self.subset(&all[..n]), self.subset(&all[n..]))
    }

    /// Seeded random permutation of the examples.
    pub fn shuffled(&self, seed: u64) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.subset(&idx)
    }

    /// Copy where only the listed concepts keep their labels.
    pub fn observe_only(&self, concepts: &[usize]) -> Dataset {
        let mut d = self.clone();
        for e in 0..self.len() {
            for i in 0..self.n_concepts {
                d.observed[e * self.n_concepts + i] = self.observed[e * self.n_concepts + i] && concepts.contains(&i);
            }
        }
        d
    }
}

/// Parameters of the noisy-XOR distribution over seven concepts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticXorSpec {
    pub n_examples: usize,
    /// `p(C0 = 1 | first bit = 1)`, likewise for `C1`.
    pub p_digit: f64,
    /// `p(a ⊕' b = 1)` when `a = b`.
    pub p_flip: f64,
    /// Standard deviation of the Gaussian input noise.
    pub noise: f64,
}

impl SyntheticXorSpec {
    pub fn new(n_examples: usize) -> Self {
        SyntheticXorSpec {
            n_examples,
            p_digit: 0.7,
            p_flip: 0.05,
            noise: 0.1,
        }
    }
}

pub const XOR_CONCEPTS: usize = 7;
pub const XOR_INPUT_DIM: usize = 4;

/// Parents of each noisy-XOR concept (`None` for `C0`, `C1`).
pub const XOR_PARENTS: [Option<(usize, usize)>; XOR_CONCEPTS] =
    [None, None, Some((0, 1)), Some((0, 2)), Some((1, 2)), Some((3, 4)), Some((0, 1))];

fn noisy_xor(spec: &SyntheticXorSpec, a: bool, b: bool) -> f64 {
    if a != b {
        1.0
    } else {
        spec.p_flip
    }
}

/// `p(C_i = 1 | latent bits, parent values)`.
pub fn xor_conditional(spec: &SyntheticXorSpec, i: usize, bits: [bool; 2], c: &[bool]) -> f64 {
    match XOR_PARENTS[i] {
        None => {
            if bits[i] {
                spec.p_digit
            } else {
                0.0
            }
        }
        Some((a, b)) => noisy_xor(spec, c[a], c[b]),
    }
}

/// Two latent bits (uniform), each encoded as two features `bit + N(0, noise²)`.
pub fn gen_synthetic_xor(spec: &SyntheticXorSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spec.noise.max(0.0)).expect("finite standard deviation");
    let mut d = Dataset::new(XOR_INPUT_DIM, XOR_CONCEPTS);
    for _ in 0..spec.n_examples {
        let bits = [rng.random::<bool>(), rng.random::<bool>()];
        let mut c = [false; XOR_CONCEPTS];
        for i in 0..XOR_CONCEPTS {
            let p = xor_conditional(spec, i, bits, &c);
            c[i] = rng.random::<f64>() < p;
        }
        let mut x = [0.0; XOR_INPUT_DIM];
        for (f, v) in x.iter_mut().enumerate() {
            let bit = if bits[f / 2] { 1.0 } else { 0.0 };
            *v = bit + normal.sample(&mut rng);
        }
        d.inputs.extend_from_slice(&x);
        d.labels.extend_from_slice(&c);
        d.observed.extend_from_slice(&[true; XOR_CONCEPTS]);
    }
    d
}

/// Exact joint distribution of the noisy-XOR generator.
#[derive(Debug, Clone, PartialEq)]
pub struct XorBayesOracle {
    pub spec: SyntheticXorSpec,
    /// `(latent bits, concept values, probability)` for every outcome with positive probability.
    pub joint: Vec<([bool; 2], [bool; XOR_CONCEPTS], f64)>,
    /// Accuracy of the Bayes-optimal per-concept prediction from the input.
    pub accuracies: [f64; XOR_CONCEPTS],
}

pub fn xor_bayes_oracle(spec: &SyntheticXorSpec) -> XorBayesOracle {
    let mut joint = Vec::new();
    for b in 0..4u32 {
        let bits = [b & 1 == 1, b & 2 == 2];
        for m in 0..(1u32 << XOR_CONCEPTS) {
            let mut c = [false; XOR_CONCEPTS];
            for (i, ci) in c.iter_mut().enumerate() {
                *ci = m >> i & 1 == 1;
            }
            let mut p = 0.25;
            for i in 0..XOR_CONCEPTS {
                let q = xor_conditional(spec, i, bits, &c);
                p *= if c[i] { q } else { 1.0 - q };
            }
            if p > 0.0 {
                joint.push((bits, c, p));
            }
        }
    }
    let mut oracle = XorBayesOracle {
        spec: *spec,
        joint,
        accuracies: [0.0; XOR_CONCEPTS],
    };
    oracle.accuracies = oracle.accuracies_given(&[]);
    oracle
}

impl XorBayesOracle {
    pub fn mean_accuracy(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / XOR_CONCEPTS as f64
    }

    /// Bayes-optimal per-concept accuracy when the latent bits and the true
    /// values of `known` are available (known concepts count as exact).
    pub fn accuracies_given(&self, known: &[usize]) -> [f64; XOR_CONCEPTS] {
        let mut acc = [0.0; XOR_CONCEPTS];
        // group outcomes by (bits, known values)
        let key = |bits: &[bool; 2], c: &[bool; XOR_CONCEPTS]| -> u32 {
            let mut k = (bits[0] as u32) | (bits[1] as u32) << 1;
            for (t, &j) in known.iter().enumerate() {
                k |= (c[j] as u32) << (2 + t);
            }
            k
        };
        let groups = 1u32 << (2 + known.len());
        for i in 0..XOR_CONCEPTS {
            if known.contains(&i) {
                acc[i] = 1.0;
                continue;
            }
            let mut p1 = vec![0.0; groups as usize];
            let mut total = vec![0.0; groups as usize];
            for (bits, c, p) in &self.joint {
                let g = key(bits, c) as usize;
                total[g] += p;
                if c[i] {
                    p1[g] += p;
                }
            }
            acc[i] = p1.iter().zip(&total).map(|(&a, &t)| a.max(t - a)).sum();
        }
        acc
    }

    /// `p(C_i = 1 | latent bits, parent values)`.
    pub fn conditional(&self, i: usize, bits: [bool; 2], c: &[bool]) -> f64 {
        xor_conditional(&self.spec, i, bits, c)
    }
}

/// Digits are concepts `0..10` (first) and `10..20` (second); sums `0..=18` are concepts `20..39`.
pub const ADDITION_CONCEPTS: usize = 39;
pub const ADDITION_INPUT_DIM: usize = 20;

/// Two uniform digits; input is their noisy one-hot encoding.
pub fn gen_symbolic_addition(n_examples: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite standard deviation");
    let mut d = Dataset::new(ADDITION_INPUT_DIM, ADDITION_CONCEPTS);
    for _ in 0..n_examples {
        let a = rng.random_range(0..10usize);
        let b = rng.random_range(0..10usize);
        let mut x = [0.0; ADDITION_INPUT_DIM];
        x[a] = 1.0;
        x[10 + b] = 1.0;
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        let mut c = [false; ADDITION_CONCEPTS];
        c[a] = true;
        c[10 + b] = true;
        c[20 + a + b] = true;
        d.inputs.extend_from_slice(&x);
        d.labels.extend_from_slice(&c);
        d.observed.extend_from_slice(&[true; ADDITION_CONCEPTS]);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noisy_xor_table() {
        let spec = SyntheticXorSpec::new(0);
        let mut c = [false; 7];
        c[0] = true;
        assert_eq!(xor_conditional(&spec, 2, [true, false], &c), 1.0);
        c[1] = true;
        assert_eq!(xor_conditional(&spec, 2, [true, true], &c), 0.05);
        assert_eq!(xor_conditional(&spec, 0, [false, true], &c), 0.0);
    }

    #[test]
    fn generation_is_seeded() {
        let spec = SyntheticXorSpec::new(50);
        assert_eq!(gen_synthetic_xor(&spec, 3), gen_synthetic_xor(&spec, 3));
        assert_ne!(gen_synthetic_xor(&spec, 3), gen_synthetic_xor(&spec, 4));
    }

    #[test]
    fn oracle_joint_sums_to_one() {
        let o = xor_bayes_oracle(&SyntheticXorSpec::new(0));
        let total: f64 = o.joint.iter().map(|e| e.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // C0 is predictable from the first bit: 0.5 * 1 + 0.5 * 0.7
        assert!((o.accuracies[0] - 0.85).abs() < 1e-12);
    }

    #[test]
    fn addition_labels_follow_the_sum() {
        let d = gen_symbolic_addition(200, 0.1, 1);
        for e in 0..d.len() {
            let l = d.labels(e);
            let a = (0..10).find(|&i| l[i]).unwrap();
            let b = (0..10).find(|&i| l[10 + i]).unwrap();
            assert_eq!(l[..10].iter().filter(|&&v| v).count(), 1);
            assert_eq!(l[10..20].iter().filter(|&&v| v).count(), 1);
            assert_eq!((20..39).filter(|&i| l[i]).collect::<Vec<_>>(), vec![20 + a + b]);
        }
    }

    #[test]
    fn observe_only_masks_other_concepts() {
        let d = gen_synthetic_xor(&SyntheticXorSpec::new(5), 0).observe_only(&[0, 1]);
        for e in 0..d.len() {
            assert_eq!(d.observed(e), &[true, true, false, false, false, false, false]);
        }
    }
}
