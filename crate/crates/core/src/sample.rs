//! Stable sampling primitives shared by the rounding schemes and the
//! coupled-run harness.
//!
//! Everything here is driven by a [`RandomTape`], and the draw pattern of each
//! primitive is part of its contract: coupled executions on perturbed inputs
//! read the same stream, so any data-dependent draw count would desynchronize
//! them. The exponential-mechanism sampler therefore runs its rejection loop
//! on a forked child tape (one parent draw, always).

use crate::tape::RandomTape;

/// Inverse-CDF draw from [l, r) on one shared uniform. For constant
/// endpoints this is a 1-stable sampling process: equal tapes give equal
/// samples.
pub fn stable_sample_uniform(l: f64, r: f64, tape: &mut RandomTape) -> f64 {
    debug_assert!(l < r, "need l < r");
    l + (r - l) * tape.draw()
}

/// Inverse-CDF index draw over explicit probabilities (fixed index order).
pub fn sample_discrete(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Exponential-mechanism distribution: p_i ∝ exp(−eta · score_i).
/// Scores of +∞ get probability exactly 0 (used for infeasible branches).
pub fn exp_mech_probs(scores: &[f64], eta: f64) -> Vec<f64> {
    let min = scores
        .iter()
        .cloned()
        .filter(|s| s.is_finite())
        .fold(f64::INFINITY, f64::min);
    assert!(min.is_finite(), "all exponential-mechanism scores are infinite");
    let raw: Vec<f64> = scores
        .iter()
        .map(|&s| {
            if s.is_finite() {
                (-eta * (s - min)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

/// Rejection rounds are geometric with success rate 1/k; this cap is hit with
/// probability about exp(−64), where the sampler falls back to one
/// inverse-CDF draw.
fn rejection_cap(k: usize) -> usize {
    64 * k + 256
}

/// Sample an index with probability proportional to exp(−eta · score_i),
/// consuming exactly one draw of `tape` (the rejection loop runs on a fork).
///
/// The rejection construction (propose j uniform, accept iff v ≤ p_j, both
/// from the shared fork) makes two coupled executions disagree with
/// probability at most ‖p − p̃‖₁ / (1 + ‖p − p̃‖₁/2): each round either
/// accepts both runs on the same index (probability Σ min(p_j, p̃_j)/k),
/// decouples them (probability ‖p − p̃‖₁/k) or rejects both.
pub fn exp_mech_sample(scores: &[f64], eta: f64, tape: &mut RandomTape) -> usize {
    let probs = exp_mech_probs(scores, eta);
    let mut child = tape.fork();
    sample_by_rejection(&probs, &mut child)
}

/// Rejection sampling from explicit probabilities (uniform proposal, accept
/// iff v ≤ p_j). Exact marginals; two executions sharing the stream disagree
/// with probability at most ‖p − p̃‖₁. Callers that must keep a parent tape
/// aligned run this on a fork.
pub(crate) fn rejection_sample(probs: &[f64], tape: &mut RandomTape) -> usize {
    sample_by_rejection(probs, tape)
}

fn sample_by_rejection(probs: &[f64], tape: &mut RandomTape) -> usize {
    let k = probs.len();
    for _ in 0..rejection_cap(k) {
        let j = ((tape.draw() * k as f64) as usize).min(k - 1);
        let v = tape.draw();
        if v < probs[j] {
            return j;
        }
    }
    sample_discrete(probs, tape.draw())
}

/// Run the exponential mechanism on `scores` and `scores_tilde` under the
/// shared-randomness coupling (one fork, both chains read the same stream).
/// Marginals are exact; the disagreement probability is bounded by
/// ‖p − p̃‖₁.
pub fn coupled_exp_mech(
    scores: &[f64],
    scores_tilde: &[f64],
    eta: f64,
    tape: &mut RandomTape,
) -> (usize, usize) {
    assert_eq!(scores.len(), scores_tilde.len());
    let p = exp_mech_probs(scores, eta);
    let pt = exp_mech_probs(scores_tilde, eta);
    let k = p.len();
    let mut child = tape.fork();
    let mut a: Option<usize> = None;
    let mut b: Option<usize> = None;
    for _ in 0..rejection_cap(k) {
        if a.is_some() && b.is_some() {
            break;
        }
        let j = ((child.draw() * k as f64) as usize).min(k - 1);
        let v = child.draw();
        if a.is_none() && v < p[j] {
            a = Some(j);
        }
        if b.is_none() && v < pt[j] {
            b = Some(j);
        }
    }
    let a = a.unwrap_or_else(|| sample_discrete(&p, child.draw()));
    let b = b.unwrap_or_else(|| sample_discrete(&pt, child.draw()));
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_sampler_is_identity_coupled() {
        // constant interval + same tape position => identical samples
        let mut t1 = RandomTape::new(10);
        let mut t2 = RandomTape::new(10);
        for _ in 0..100 {
            let a = stable_sample_uniform(-1.0, 3.0, &mut t1);
            let b = stable_sample_uniform(-1.0, 3.0, &mut t2);
            assert_eq!(a.to_bits(), b.to_bits());
            assert!((-1.0..3.0).contains(&a));
        }
    }

    #[test]
    fn exp_mech_probs_basic() {
        let p = exp_mech_probs(&[0.0, 0.0], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-15);
        // score ln2/eta lands at exactly 1/3 vs 2/3
        let p = exp_mech_probs(&[0.0, std::f64::consts::LN_2], 1.0);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
        // infinite scores get exactly zero
        let p = exp_mech_probs(&[1.0, f64::INFINITY, 2.0], 0.5);
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp_mech_marginals_match() {
        let scores = [0.3, 0.0, 1.1, 0.6];
        let eta = 1.7;
        let probs = exp_mech_probs(&scores, eta);
        let trials = 200_000;
        let mut counts = [0usize; 4];
        let mut tape = RandomTape::new(99);
        for _ in 0..trials {
            counts[exp_mech_sample(&scores, eta, &mut tape)] += 1;
        }
        for i in 0..4 {
            let freq = counts[i] as f64 / trials as f64;
            let sem = (probs[i] * (1.0 - probs[i]) / trials as f64).sqrt();
            assert!(
                (freq - probs[i]).abs() <= 5.0 * sem + 1e-4,
                "index {i}: freq {freq} vs p {}",
                probs[i]
            );
        }
    }

    #[test]
    fn exp_mech_concentrates_on_clear_winner() {
        // one score 0, others far above log(1/gamma)/eta: winner chosen
        // with probability >= 1 - gamma
        let gamma: f64 = 0.25;
        let eta = 2.0;
        let spread = (1.0 / gamma).ln() / eta * 50.0;
        let scores = [spread, 0.0, spread, spread];
        let mut tape = RandomTape::new(3);
        let trials = 20_000;
        let wins = (0..trials)
            .filter(|_| exp_mech_sample(&scores, eta, &mut tape) == 1)
            .count();
        assert!(wins as f64 / trials as f64 >= 1.0 - gamma);
    }

    #[test]
    fn equal_scores_give_uniform_choice() {
        let scores = [2.0, 2.0, 2.0];
        let mut tape = RandomTape::new(8);
        let trials = 90_000;
        let mut counts = [0usize; 3];
        for _ in 0..trials {
            counts[exp_mech_sample(&scores, 1.0, &mut tape)] += 1;
        }
        for c in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn coupled_identical_scores_always_agree() {
        let scores = [0.5, 1.0, 0.2];
        let mut tape = RandomTape::new(4);
        for _ in 0..5_000 {
            let (a, b) = coupled_exp_mech(&scores, &scores, 1.3, &mut tape);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn coupled_disagreement_bounded_by_l1() {
        // x = (0,0), x̃ = (0, ln2/eta): p = (1/2,1/2), p̃ = (2/3,1/3),
        // ‖p−p̃‖₁ = 1/3
        let eta = 2.0;
        let x = [0.0, 0.0];
        let xt = [0.0, std::f64::consts::LN_2 / eta];
        let mut tape = RandomTape::new(12);
        let trials = 200_000;
        let disagreements = (0..trials)
            .filter(|_| {
                let (a, b) = coupled_exp_mech(&x, &xt, eta, &mut tape);
                a != b
            })
            .count();
        let rate = disagreements as f64 / trials as f64;
        let sem = (rate * (1.0 - rate) / trials as f64).sqrt();
        assert!(rate <= 1.0 / 3.0 + 3.0 * sem, "rate {rate}");
    }

    #[test]
    fn coupled_marginals_are_correct() {
        let eta = 1.0;
        let x = [0.0, 0.4, 0.9];
        let xt = [0.1, 0.4, 0.7];
        let p = exp_mech_probs(&x, eta);
        let pt = exp_mech_probs(&xt, eta);
        let mut tape = RandomTape::new(21);
        let trials = 300_000;
        let mut ca = [0usize; 3];
        let mut cb = [0usize; 3];
        for _ in 0..trials {
            let (a, b) = coupled_exp_mech(&x, &xt, eta, &mut tape);
            ca[a] += 1;
            cb[b] += 1;
        }
        for i in 0..3 {
            assert!((ca[i] as f64 / trials as f64 - p[i]).abs() < 0.005);
            assert!((cb[i] as f64 / trials as f64 - pt[i]).abs() < 0.005);
        }
    }
}
