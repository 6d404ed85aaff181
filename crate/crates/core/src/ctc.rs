//! Connectionist temporal classification: loss, gradient and best-path decoding.
//!
//! The blank occupies the last class index. All recursions run in log space
//! with pairwise log-add.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordered output symbols; the CTC blank is implicit at index `len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAlphabet {
    symbols: Vec<char>,
}

impl LabelAlphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(Error::Config("alphabet must not be empty".into()));
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(Error::Config(format!("duplicate alphabet symbol {c:?}")));
            }
            if c.is_whitespace() {
                return Err(Error::Config("alphabet symbols must not be whitespace".into()));
            }
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        self.symbols.len()
    }

    /// Output layer width: symbols plus blank.
    pub fn num_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    /// Labels from a transcript; whitespace is ignored.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| Error::format("transcript", format!("symbol {c:?} not in alphabet")))
            })
            .collect()
    }

    /// Space-separated transcript, one word per label.
    pub fn to_words(&self, labels: &[usize]) -> String {
        labels
            .iter()
            .map(|&l| self.symbols[l].to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// `T x C` log-probabilities, rows normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbSeq {
    frames: usize,
    classes: usize,
    values: Vec<f64>,
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Numerically stable log-softmax of one row, written into `out`.
pub fn log_softmax_into(logits: &[f64], out: &mut [f64]) {
    let lse = log_sum_exp(logits);
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = z - lse;
    }
}

impl LogProbSeq {
    /// Validate pre-normalized log-probabilities.
    pub fn new(frames: usize, classes: usize, values: Vec<f64>) -> Result<Self> {
        if classes < 2 || values.len() != frames * classes {
            return Err(Error::format(
                "log-prob sequence",
                format!("{} values for {frames}x{classes}", values.len()),
            ));
        }
        for (t, row) in values.chunks_exact(classes).enumerate() {
            let lse = log_sum_exp(row);
            if !(lse.abs() <= 1e-6) || row.iter().any(|v| v.is_nan() || *v > 1e-12) {
                return Err(Error::format("log-prob sequence", format!("row {t} is not normalized")));
            }
        }
        Ok(Self {
            frames,
            classes,
            values,
        })
    }

    /// Log-softmax of pre-activation logits.
    pub fn from_logits(frames: usize, classes: usize, logits: &[f64]) -> Result<Self> {
        if classes < 2 || logits.len() != frames * classes {
            return Err(Error::format(
                "logits",
                format!("{} values for {frames}x{classes}", logits.len()),
            ));
        }
        let mut values = vec![0.0; logits.len()];
        for (src, dst) in logits.chunks_exact(classes).zip(values.chunks_exact_mut(classes)) {
            log_softmax_into(src, dst);
        }
        Ok(Self {
            frames,
            classes,
            values,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn blank(&self) -> usize {
        self.classes - 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.classes..(t + 1) * self.classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn at(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.classes + k]
    }
}

/// Minimum number of frames needed to emit `labels`.
pub fn min_frames(labels: &[usize]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Result of [`ctc_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtcLoss {
    /// Negative log-likelihood; `+inf` when infeasible.
    pub nll: f64,
    pub feasible: bool,
}

fn check_labels(p: &LogProbSeq, labels: &[usize]) -> Result<()> {
    match labels.iter().find(|&&l| l >= p.blank()) {
        Some(&l) => Err(Error::LabelOutOfRange(l)),
        None => Ok(()),
    }
}

/// Blank-interleaved label sequence `[-, y1, -, y2, ..., yL, -]`.
fn extend(labels: &[usize], blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(blank);
    for &l in labels {
        ext.push(l);
        ext.push(blank);
    }
    ext
}

/// Whether the skip transition `s-2 -> s` is allowed.
fn can_skip(ext: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]
}

/// Log forward variables `alpha[t][s]` (emission at `t` included).
fn forward(p: &LogProbSeq, ext: &[usize]) -> Vec<f64> {
    let (frames, states, blank) = (p.frames(), ext.len(), p.blank());
    let mut alpha = vec![f64::NEG_INFINITY; frames * states];
    alpha[0] = p.at(0, ext[0]);
    if states > 1 {
        alpha[1] = p.at(0, ext[1]);
    }
    for t in 1..frames {
        let (prev, cur) = alpha.split_at_mut(t * states);
        let prev = &prev[(t - 1) * states..];
        let cur = &mut cur[..states];
        for s in 0..states {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(ext, s, blank) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = acc + p.at(t, ext[s]);
        }
    }
    alpha
}

/// Log backward variables `beta[t][s]` (emission at `t` excluded).
fn backward(p: &LogProbSeq, ext: &[usize]) -> Vec<f64> {
    let (frames, states, blank) = (p.frames(), ext.len(), p.blank());
    let mut beta = vec![f64::NEG_INFINITY; frames * states];
    let last = (frames - 1) * states;
    beta[last + states - 1] = 0.0;
    if states > 1 {
        beta[last + states - 2] = 0.0;
    }
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * states);
        let cur = &mut cur[t * states..];
        let next = &next[..states];
        for s in 0..states {
            let mut acc = next[s] + p.at(t + 1, ext[s]);
            if s + 1 < states {
                acc = log_add(acc, next[s + 1] + p.at(t + 1, ext[s + 1]));
            }
            if s + 2 < states && can_skip(ext, s + 2, blank) {
                acc = log_add(acc, next[s + 2] + p.at(t + 1, ext[s + 2]));
            }
            cur[s] = acc;
        }
    }
    beta
}

fn log_likelihood(alpha: &[f64], frames: usize, states: usize) -> f64 {
    let last = &alpha[(frames - 1) * states..];
    if states > 1 {
        log_add(last[states - 1], last[states - 2])
    } else {
        last[0]
    }
}

/// Negative log-likelihood of `labels` summed over all alignments.
pub fn ctc_loss(p: &LogProbSeq, labels: &[usize]) -> Result<CtcLoss> {
    check_labels(p, labels)?;
    if p.frames() == 0 || p.frames() < min_frames(labels) {
        return Ok(CtcLoss {
            nll: f64::INFINITY,
            feasible: false,
        });
    }
    let ext = extend(labels, p.blank());
    let alpha = forward(p, &ext);
    Ok(CtcLoss {
        nll: -log_likelihood(&alpha, p.frames(), ext.len()),
        feasible: true,
    })
}

/// Loss and its gradient with respect to the pre-softmax logits, `T x C`.
pub fn ctc_grad(p: &LogProbSeq, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_labels(p, labels)?;
    let required = min_frames(labels);
    if p.frames() == 0 || p.frames() < required {
        return Err(Error::Infeasible {
            frames: p.frames(),
            required,
        });
    }
    let ext = extend(labels, p.blank());
    let (frames, states, classes) = (p.frames(), ext.len(), p.classes());
    let alpha = forward(p, &ext);
    let beta = backward(p, &ext);
    let log_p = log_likelihood(&alpha, frames, states);
    let mut grad = vec![0.0; frames * classes];
    let mut occupancy = vec![f64::NEG_INFINITY; classes];
    for t in 0..frames {
        occupancy.iter_mut().for_each(|o| *o = f64::NEG_INFINITY);
        for s in 0..states {
            let k = ext[s];
            occupancy[k] = log_add(occupancy[k], alpha[t * states + s] + beta[t * states + s]);
        }
        let row = &mut grad[t * classes..(t + 1) * classes];
        for k in 0..classes {
            row[k] = p.at(t, k).exp() - (occupancy[k] - log_p).exp();
        }
    }
    Ok((-log_p, grad))
}

/// Per-frame argmax (ties toward the lower index), collapse repeats, drop blanks.
pub fn best_path_decode(p: &LogProbSeq) -> Vec<usize> {
    let blank = p.blank();
    let mut out = Vec::new();
    let mut prev = None;
    for t in 0..p.frames() {
        let row = p.row(t);
        let mut best = 0;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        if Some(best) != prev && best != blank {
            out.push(best);
        }
        prev = Some(best);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_probs(rows: &[Vec<f64>]) -> LogProbSeq {
        let classes = rows[0].len();
        LogProbSeq::new(rows.len(), classes, rows.iter().flatten().map(|p| p.ln()).collect()).unwrap()
    }

    fn random_logits(frames: usize, classes: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..frames * classes).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    /// Collapse a path: drop repeats, then blanks.
    fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
        let mut dedup: Vec<usize> = Vec::new();
        for &k in path {
            if dedup.last() != Some(&k) {
                dedup.push(k);
            }
        }
        dedup.into_iter().filter(|&k| k != blank).collect()
    }

    /// Sum of path probabilities over all C^T paths.
    fn brute_force_prob(p: &LogProbSeq, labels: &[usize]) -> f64 {
        let (t, c) = (p.frames(), p.classes());
        let mut total = 0.0;
        let mut path = vec![0usize; t];
        for code in 0..c.pow(t as u32) {
            let mut rest = code;
            for slot in path.iter_mut() {
                *slot = rest % c;
                rest /= c;
            }
            if collapse(&path, p.blank()) == labels {
                total += path.iter().enumerate().map(|(i, &k)| p.row(i)[k].exp()).product::<f64>();
            }
        }
        total
    }

    #[test]
    fn single_frame_single_label() {
        let p = from_probs(&[vec![0.6, 0.4]]);
        let loss = ctc_loss(&p, &[0]).unwrap();
        assert!(loss.feasible);
        assert!((loss.nll + 0.6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_frames_three_alignments() {
        let p = from_probs(&[vec![0.7, 0.3], vec![0.2, 0.8]]);
        let expect = -(0.7 * 0.2 + 0.7 * 0.8 + 0.3 * 0.2f64).ln();
        assert!((ctc_loss(&p, &[0]).unwrap().nll - expect).abs() < 1e-12);
    }

    #[test]
    fn infeasible_targets() {
        let p = from_probs(&[vec![0.5, 0.25, 0.25], vec![0.5, 0.25, 0.25]]);
        // "aa" needs a blank in between: 3 frames
        let loss = ctc_loss(&p, &[0, 0]).unwrap();
        assert!(!loss.feasible && loss.nll == f64::INFINITY);
        assert!(matches!(ctc_grad(&p, &[0, 0]), Err(Error::Infeasible { frames: 2, required: 3 })));
        assert!(ctc_loss(&p, &[0, 1]).unwrap().feasible);
        assert!(matches!(ctc_loss(&p, &[2]), Err(Error::LabelOutOfRange(2))));
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let frames = rng.random_range(1..=6);
            let classes = rng.random_range(2..=4);
            let p = LogProbSeq::from_logits(frames, classes, &random_logits(frames, classes, &mut rng)).unwrap();
            let len = rng.random_range(0..=3);
            let labels: Vec<usize> = (0..len).map(|_| rng.random_range(0..classes - 1)).collect();
            let loss = ctc_loss(&p, &labels).unwrap();
            let brute = brute_force_prob(&p, &labels);
            if loss.feasible {
                assert!((loss.nll + brute.ln()).abs() < 1e-9, "{labels:?} {} vs {}", loss.nll, -brute.ln());
            } else {
                assert_eq!(brute, 0.0);
            }
        }
    }

    #[test]
    fn probabilities_over_all_targets_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for frames in 1..=4 {
            let classes = 3;
            let p = LogProbSeq::from_logits(frames, classes, &random_logits(frames, classes, &mut rng)).unwrap();
            let mut total = 0.0;
            for len in 0..=frames {
                for code in 0..2usize.pow(len as u32) {
                    let labels: Vec<usize> = (0..len).map(|i| (code >> i) & 1).collect();
                    let loss = ctc_loss(&p, &labels).unwrap();
                    if loss.feasible {
                        total += (-loss.nll).exp();
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-12, "T={frames}: {total}");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (frames, classes) = (5, 4);
        for labels in [vec![0, 1], vec![2, 2], vec![1, 0, 2], vec![]] {
            let logits = random_logits(frames, classes, &mut rng);
            let p = LogProbSeq::from_logits(frames, classes, &logits).unwrap();
            let (_, grad) = ctc_grad(&p, &labels).unwrap();
            let h = 1e-5;
            for i in 0..logits.len() {
                let mut plus = logits.clone();
                plus[i] += h;
                let mut minus = logits.clone();
                minus[i] -= h;
                let lp = ctc_loss(&LogProbSeq::from_logits(frames, classes, &plus).unwrap(), &labels).unwrap().nll;
                let lm = ctc_loss(&LogProbSeq::from_logits(frames, classes, &minus).unwrap(), &labels).unwrap().nll;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
                assert!(rel <= 1e-4, "labels {labels:?} idx {i}: fd {fd} analytic {}", grad[i]);
            }
        }
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = LogProbSeq::from_logits(8, 5, &random_logits(8, 5, &mut rng)).unwrap();
        let (_, grad) = ctc_grad(&p, &[0, 3, 3, 1]).unwrap();
        for row in grad.chunks(5) {
            assert!(row.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_gradient_is_symmetric_under_relabeling() {
        // target "ab" vs "ba" under uniform outputs: swapping symbols 0 and 1 maps one to the other
        let p = LogProbSeq::from_logits(4, 3, &[0.0; 12]).unwrap();
        let (la, ga) = ctc_grad(&p, &[0, 1]).unwrap();
        let (lb, gb) = ctc_grad(&p, &[1, 0]).unwrap();
        assert!((la - lb).abs() < 1e-12);
        for t in 0..4 {
            assert!((ga[t * 3] - gb[t * 3 + 1]).abs() < 1e-12);
            assert!((ga[t * 3 + 1] - gb[t * 3]).abs() < 1e-12);
            assert!((ga[t * 3 + 2] - gb[t * 3 + 2]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_when_posterior_equals_output() {
        // a single dominant alignment "a b -": posterior and softmax are both near one-hot
        let strong = 30.0;
        let mut logits = vec![0.0; 9];
        logits[0] = strong;
        logits[3 + 1] = strong;
        logits[6 + 2] = strong;
        let p = LogProbSeq::from_logits(3, 3, &logits).unwrap();
        let (_, grad) = ctc_grad(&p, &[0, 1]).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-10), "{grad:?}");
        // moving away from the fixed point gives a non-zero gradient
        let q = LogProbSeq::from_logits(3, 3, &[1.0, 0.0, 0.5, 0.2, 0.3, 0.1, 0.0, 0.0, 0.0]).unwrap();
        let (_, grad) = ctc_grad(&q, &[0, 1]).unwrap();
        assert!(grad.iter().any(|g| g.abs() > 1e-3));
    }

    #[test]
    fn tiny_probabilities_stay_finite() {
        let tiny = 1e-30f64;
        let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![tiny, tiny, 1.0 - 2.0 * tiny]).collect();
        let p = from_probs(&rows);
        let loss = ctc_loss(&p, &[0, 1, 0]).unwrap();
        assert!(loss.nll.is_finite());
        let (_, g) = ctc_grad(&p, &[0, 1, 0]).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn best_path_collapse() {
        // argmax sequence a a - b b
        let hi = 0.9;
        let lo = 0.05;
        let rows = vec![
            vec![hi, lo, lo],
            vec![hi, lo, lo],
            vec![lo, lo, hi],
            vec![lo, hi, lo],
            vec![lo, hi, lo],
        ];
        assert_eq!(best_path_decode(&from_probs(&rows)), vec![0, 1]);
        let blanks = vec![vec![lo, lo, hi]; 4];
        assert!(best_path_decode(&from_probs(&blanks)).is_empty());
        // a - a keeps both
        let rows = vec![vec![hi, lo, lo], vec![lo, lo, hi], vec![hi, lo, lo]];
        assert_eq!(best_path_decode(&from_probs(&rows)), vec![0, 0]);
        // tie resolves to the lower index
        let tie = vec![vec![0.4, 0.4, 0.2]];
        assert_eq!(best_path_decode(&from_probs(&tie)), vec![0]);
    }

    #[test]
    fn best_path_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let p = LogProbSeq::from_logits(8, 4, &random_logits(8, 4, &mut rng)).unwrap();
            let argmax: Vec<usize> = (0..8)
                .map(|t| {
                    let row = p.row(t);
                    (0..4).fold(0, |b, k| if row[k] > row[b] { k } else { b })
                })
                .collect();
            assert_eq!(best_path_decode(&p), collapse(&argmax, 3));
        }
    }

    #[test]
    fn alphabet_validation_and_words() {
        let a = LabelAlphabet::new("abcd".chars()).unwrap();
        assert_eq!(a.blank_index(), 4);
        assert_eq!(a.num_classes(), 5);
        assert_eq!(a.encode("a c d").unwrap(), vec![0, 2, 3]);
        assert_eq!(a.to_words(&[0, 2, 3]), "a c d");
        assert!(a.encode("z").is_err());
        assert!(LabelAlphabet::new("aba".chars()).is_err());
    }

    proptest! {
        #[test]
        fn loss_is_permutation_covariant(seed in 0u64..5000, frames in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let classes = 4;
            let logits = random_logits(frames, classes, &mut rng);
            let labels: Vec<usize> = (0..rng.random_range(0..=3)).map(|_| rng.random_range(0..3)).collect();
            let perm = [2usize, 0, 1];
            let mut permuted = logits.clone();
            for t in 0..frames {
                for k in 0..3 {
                    permuted[t * classes + perm[k]] = logits[t * classes + k];
                }
            }
            let mapped: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
            let a = ctc_loss(&LogProbSeq::from_logits(frames, classes, &logits).unwrap(), &labels).unwrap();
            let b = ctc_loss(&LogProbSeq::from_logits(frames, classes, &permuted).unwrap(), &mapped).unwrap();
            prop_assert_eq!(a.feasible, b.feasible);
            if a.feasible {
                prop_assert!((a.nll - b.nll).abs() < 1e-12);
            }
        }
    }
}
