//! Independent reference computations used as test oracles.

use oreo_core::lagrangian::Multipliers;
use oreo_core::problem::Problem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Golden-section refinement around the best point of a log-spaced scan.
pub fn scan_minimizer(f: impl Fn(f64) -> f64, floor: f64) -> f64 {
    let offsets: Vec<f64> = (0..4001).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 4000.0)).collect();
    let mut best = 0;
    for i in 1..offsets.len() {
        if f(floor + offsets[i]) < f(floor + offsets[best]) {
            best = i;
        }
    }
    let mut a = floor + offsets[best.saturating_sub(1)];
    let mut b = floor + offsets[(best + 1).min(offsets.len() - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / 2.0
}

pub fn psi_l1(p: &Problem, m: &Multipliers, z: &[Option<usize>]) -> f64 {
    let mut v = 0.0;
    for (s, svc) in p.services.iter().enumerate() {
        for c in 0..svc.configs.len() {
            let zc = if z[s] == Some(c) { 1.0 } else { 0.0 };
            let beta: f64 = m.beta[s][c].iter().sum();
            v += zc * (svc.priority - m.gamma[s][c] * svc.target_quality - p.big_m * m.delta[s][c] - beta);
            v += m.delta[s][c] * (p.big_m + svc.target_latency);
        }
    }
    v
}

pub fn random_multipliers(p: &Problem, rng: &mut ChaCha8Rng) -> Multipliers {
    let mut m = Multipliers::zeros(p);
    for s in 0..p.services.len() {
        for c in 0..p.services[s].configs.len() {
            for b in m.beta[s][c].iter_mut() {
                *b = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.5) };
            }
            m.gamma[s][c] = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..3.0) };
            m.delta[s][c] = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..3.0) / p.big_m };
        }
    }
    m
}

/// Exhaustive argmax of Ψ_L1 over every joint choice; ties go to the
/// lexicographically smallest choice vector with `None` ranked after every config.
pub fn brute_force_lr1(p: &Problem, m: &Multipliers) -> (Vec<Option<usize>>, f64) {
    let radix: Vec<usize> = p.services.iter().map(|s| s.configs.len() + 1).collect();
    let mut digits = vec![0usize; radix.len()];
    let decode = |d: &[usize]| -> Vec<Option<usize>> {
        d.iter().zip(&radix).map(|(&x, &r)| (x + 1 < r).then_some(x)).collect()
    };
    let mut best = (decode(&digits), f64::NEG_INFINITY);
    loop {
        let z = decode(&digits);
        let v = psi_l1(p, m, &z);
        if v > best.1 + 1e-12 {
            best = (z, v);
        }
        let mut i = 0;
        while i < digits.len() {
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == digits.len() {
            return best;
        }
    }
}
