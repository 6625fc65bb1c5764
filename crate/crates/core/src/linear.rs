//! Exact solutions of the linearized rescaled flow dv/ds = Δv + 2v on
//! S^n(√n) and the three-interval growth/decay comparisons.
//!
//! Every solution has ||v(s)||² = Σ a_k² e^{2λ_k s}, a positive sum of
//! exponentials, so ln ||v(s)|| is convex in s. The interval suprema
//! therefore sit at interval endpoints, and at most one interior critical
//! point (a minimum) separates a decreasing from an increasing segment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spectral::{degree_of, mode_index, operator_eigenvalue, ZonalSpectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalSolution {
    pub n: usize,
    /// Amplitudes at s = 0 in the spectrum layout of the grid.
    pub initial: ZonalSpectrum,
}

impl ModalSolution {
    pub fn new(initial: ZonalSpectrum) -> Self {
        Self { n: initial.n, initial }
    }

    /// (λ_k, a_k²) for every nonzero amplitude.
    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.initial
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(i, a)| (operator_eigenvalue(self.n, degree_of(self.n, i)), a * a))
    }

    pub fn at(&self, s: f64) -> ZonalSpectrum {
        evolve_linear(&self.initial, s)
    }

    pub fn norm_sq(&self, s: f64) -> f64 {
        self.terms().map(|(l, c)| c * (2.0 * l * s).exp()).sum()
    }

    pub fn norm(&self, s: f64) -> f64 {
        self.norm_sq(s).sqrt()
    }

    fn norm_sq_slope(&self, s: f64) -> f64 {
        self.terms().map(|(l, c)| 2.0 * l * c * (2.0 * l * s).exp()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms().next().is_none()
    }

    pub fn up(&self) -> Self {
        Self::new(split_modes(&self.initial).0)
    }

    pub fn down(&self) -> Self {
        Self::new(split_modes(&self.initial).1)
    }
}

/// a_k ↦ a_k e^{λ_k s}.
pub fn evolve_linear(initial: &ZonalSpectrum, s: f64) -> ZonalSpectrum {
    let n = initial.n;
    let coeffs = initial
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| a * (operator_eigenvalue(n, degree_of(n, i)) * s).exp())
        .collect();
    ZonalSpectrum { n, coeffs }
}

/// Splits into the growing part (degrees 0 and 1) and the decaying part
/// (degrees ≥ 2). No eigenvalue vanishes, so nothing else remains.
pub fn split_modes(spec: &ZonalSpectrum) -> (ZonalSpectrum, ZonalSpectrum) {
    let mut up = ZonalSpectrum::zeros(spec.n, spec.coeffs.len());
    let mut down = up.clone();
    for (i, a) in spec.coeffs.iter().enumerate() {
        if operator_eigenvalue(spec.n, degree_of(spec.n, i)) > 0.0 {
            up.coeffs[i] = *a;
        } else {
            down.coeffs[i] = *a;
        }
    }
    (up, down)
}

/// sup over [a, b] of ||v(s)||.
pub fn interval_sup_norm(sol: &ModalSolution, a: f64, b: f64) -> f64 {
    assert!(a < b, "empty interval");
    let mut candidates = vec![a, b];
    if let Some(c) = critical_point(sol, a, b) {
        candidates.push(c);
    }
    candidates.into_iter().map(|s| sol.norm(s)).fold(0.0, f64::max)
}

/// Interior zero of d/ds ||v||², located by bisection. Since ||v||² is
/// convex the zero is unique when it exists.
pub fn critical_point(sol: &ModalSolution, a: f64, b: f64) -> Option<f64> {
    let (fa, fb) = (sol.norm_sq_slope(a), sol.norm_sq_slope(b));
    if !(fa < 0.0 && fb > 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sol.norm_sq_slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Largest α valid for every solution in dimension n on intervals of
/// length K: the slowest growth rate is λ_1 = 1 and the slowest decay rate
/// is −λ_2 = 2/n, so α = exp(K min(1, 2/n)). For n ≥ 2 this is e^{2K/n}.
pub fn lemma_alpha_constant(n: usize, k: f64) -> f64 {
    let growth = operator_eigenvalue(n, 1);
    let decay = -operator_eigenvalue(n, 2);
    (k * growth.min(decay)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaAlpha {
    pub growth_ok: bool,
    pub decay_ok: bool,
}

/// Relative slack allowed in the comparisons, covering rounding in the
/// exponentials (the pure degree-2 case is an exact equality).
const REL_SLACK: f64 = 1e-12;

pub fn check_lemma_alpha(sol: &ModalSolution, k: f64) -> LemmaAlpha {
    assert!(k > 0.0, "interval length must be positive");
    let alpha = lemma_alpha_constant(sol.n, k);
    let (up, down) = (sol.up(), sol.down());
    let growth_ok = up.is_zero()
        || interval_sup_norm(&up, k, 2.0 * k) >= alpha * interval_sup_norm(&up, 0.0, k) * (1.0 - REL_SLACK);
    let decay_ok = down.is_zero()
        || interval_sup_norm(&down, k, 2.0 * k) <= interval_sup_norm(&down, 0.0, k) / alpha * (1.0 + REL_SLACK);
    LemmaAlpha { growth_ok, decay_ok }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Implication {
    /// The premise is false.
    Vacuous,
    Holds,
    Fails,
}

impl Implication {
    fn from(premise: bool, conclusion: bool) -> Self {
        match (premise, conclusion) {
            (false, _) => Implication::Vacuous,
            (true, true) => Implication::Holds,
            (true, false) => Implication::Fails,
        }
    }

    pub fn is_ok(self) -> bool {
        self != Implication::Fails
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaBeta {
    /// Growth by β from [0,K] to [K,2K] persists to [2K,3K].
    pub forward: Implication,
    /// Decay by β from [K,2K] to [2K,3K] was already present on [0,K] to [K,2K].
    pub backward: Implication,
    /// At least one of the two conclusions holds outright.
    pub at_least_one: bool,
}

pub fn check_lemma_beta(sol: &ModalSolution, k: f64, beta: f64) -> LemmaBeta {
    assert!(k > 0.0 && beta > 1.0, "need K > 0 and β > 1");
    let m0 = interval_sup_norm(sol, 0.0, k);
    let m1 = interval_sup_norm(sol, k, 2.0 * k);
    let m2 = interval_sup_norm(sol, 2.0 * k, 3.0 * k);
    let grow = |late: f64, early: f64| late >= beta * early * (1.0 - REL_SLACK);
    let decay = |late: f64, early: f64| late <= early / beta * (1.0 + REL_SLACK);
    let impl2 = grow(m2, m1);
    let impl4 = decay(m1, m0);
    LemmaBeta {
        forward: Implication::from(grow(m1, m0), impl2),
        backward: Implication::from(decay(m2, m1), impl4),
        at_least_one: impl2 || impl4,
    }
}

/// A β(n, K) > 1 for which the disjunction holds for every solution with
/// both growing and decaying parts.
///
/// With the slowest decay rate a = 2/n and the slowest growth rate b = 1,
/// the worst case is the two-mode solution A e^{−2as} + B e^{2bs}. If
/// neither conclusion held the minimum of ||v|| would sit inside [K, 2K],
/// and the growth over the last interval or the decay over the first one
/// is bounded below by exp I(a, b, K) or exp I(b, a, K), where
///
///   I(a, b, K) = −aK + ½ ln((1 + (a/b) e^{2(a+b)K}) / (1 + a/b)).
///
/// Taking the smaller of the two gives a uniform constant.
pub fn lemma_beta_uniform(n: usize, k: f64) -> f64 {
    let a = -operator_eigenvalue(n, 2);
    let b = operator_eigenvalue(n, 1);
    let i = |a: f64, b: f64| -a * k + 0.5 * ((1.0 + a / b * (2.0 * (a + b) * k).exp()) / (1.0 + a / b)).ln();
    i(a, b).min(i(b, a)).exp()
}

/// One randomized case that violated a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub case: usize,
    pub k: f64,
    pub beta: f64,
    pub initial: ZonalSpectrum,
    pub alpha: LemmaAlpha,
    pub lemma_beta: LemmaBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub cases: usize,
    /// Cases with both growing and decaying modes.
    pub mixed: usize,
    pub failures: Vec<SweepFailure>,
}

/// Random modal solution: one to four nonzero amplitudes of degree ≤ 6
/// with magnitudes spread over three decades.
pub fn sample_solution<R: Rng>(rng: &mut R, n: usize) -> ModalSolution {
    let len = mode_index(n, 6) + 1;
    let mut initial = ZonalSpectrum::zeros(n, len);
    for _ in 0..rng.random_range(1..=4) {
        let i = rng.random_range(0..len);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        initial.coeffs[i] = sign * 10f64.powf(rng.random_range(-3.0..0.0));
    }
    ModalSolution::new(initial)
}

/// Checks both lemmas on `cases` random solutions in dimensions 1..=5 with
/// interval lengths in [0.1, 2]. β is the uniform constant of
/// `lemma_beta_uniform`.
pub fn lemma_sweep(cases: usize, seed: u64) -> SweepReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut mixed = 0;
    for case in 0..cases {
        let n = rng.random_range(1..=5);
        let k = rng.random_range(0.1..2.0);
        let sol = sample_solution(&mut rng, n);
        if !sol.up().is_zero() && !sol.down().is_zero() {
            mixed += 1;
        }
        let beta = lemma_beta_uniform(n, k);
        let alpha = check_lemma_alpha(&sol, k);
        let lemma_beta = check_lemma_beta(&sol, k, beta);
        let ok = alpha.growth_ok
            && alpha.decay_ok
            && lemma_beta.at_least_one
            && lemma_beta.forward.is_ok()
            && lemma_beta.backward.is_ok();
        if !ok {
            failures.push(SweepFailure { case, k, beta, initial: sol.initial, alpha, lemma_beta });
        }
    }
    SweepReport { seed, cases, mixed, failures }
}
