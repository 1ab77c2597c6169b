//! Scalar helpers over `libm` so the crate stays `no_std`.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p / (1.0 - p))
}

/// In-place numerically stable softmax.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = exp(*x - max);
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// Backward pass of softmax: given probabilities `p` and upstream gradient `g`
/// w.r.t. `p`, writes the gradient w.r.t. the logits into `out`.
pub fn softmax_backward(p: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, &pi), &gi) in out.iter_mut().zip(p).zip(g) {
        *o = pi * (gi - dot);
    }
}

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_equal_logits_is_uniform() {
        let mut v = [0.0; 3];
        softmax_in_place(&mut v);
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_is_symmetric_and_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let logits = [0.3, -1.2, 0.8];
        let g = [0.5, -2.0, 1.5];
        let f = |l: &[f64]| {
            let mut p = [l[0], l[1], l[2]];
            softmax_in_place(&mut p);
            p.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut p = logits;
        softmax_in_place(&mut p);
        let mut out = [0.0; 3];
        softmax_backward(&p, &g, &mut out);
        for i in 0..3 {
            let mut hi = logits;
            let mut lo = logits;
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let fd = (f(&hi) - f(&lo)) / 2e-6;
            assert!((fd - out[i]).abs() < 1e-8);
        }
    }
}
