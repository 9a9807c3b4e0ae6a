//! Shared instance generators and independent reference implementations.
#![allow(dead_code)]

use qapool::sampling::{self, sample_rng};
use qapool::{Family, Forecast, RuleSpec, WeightedForecast};
use rand::Rng;

/// Every family with convex exposure at all `n` used in the suites.
pub fn convex_rules() -> Vec<RuleSpec> {
    vec![
        RuleSpec::quadratic(),
        RuleSpec::logarithmic(),
        RuleSpec::neglog(),
        RuleSpec::power(0.5).unwrap(),
        RuleSpec::power(-1.0).unwrap(),
        RuleSpec::spherical(2.0).unwrap(),
        RuleSpec::spherical(3.0).unwrap(),
        RuleSpec::tsallis(1.5).unwrap(),
        RuleSpec::tsallis(2.0).unwrap(),
        RuleSpec::hs(),
    ]
}

pub struct Instance {
    pub n: usize,
    pub inputs: Vec<WeightedForecast>,
}

impl Instance {
    pub fn normalized_weights(&self) -> Vec<f64> {
        let total: f64 = self.inputs.iter().map(|x| x.weight).sum();
        self.inputs.iter().map(|x| x.weight / total).collect()
    }

    pub fn forecasts(&self) -> Vec<Forecast> {
        self.inputs.iter().map(|x| x.forecast.clone()).collect()
    }
}

/// `n` uniform in `ns`, `m` uniform in `ms`, Dirichlet(1) forecasts, weights in (0, 1].
pub fn random_instance(seed: u64, index: u64, ns: (usize, usize), ms: (usize, usize)) -> Instance {
    let mut rng = sample_rng(seed, index);
    let n = rng.random_range(ns.0..=ns.1);
    let m = rng.random_range(ms.0..=ms.1);
    let inputs = (0..m)
        .map(|_| {
            let p = sampling::dirichlet(&mut rng, n);
            WeightedForecast::new(p, sampling::weight(&mut rng))
        })
        .collect();
    Instance { n, inputs }
}

/// [`random_instance`] with every forecast shrunk by `eps` towards uniform,
/// keeping exposures of steep rules within a range where an f64 forecast can
/// reproduce them to ~1e-8.
pub fn interior_instance(seed: u64, index: u64, ns: (usize, usize), ms: (usize, usize), eps: f64) -> Instance {
    let mut inst = random_instance(seed, index, ns, ms);
    let n = inst.n as f64;
    for x in &mut inst.inputs {
        let shrunk = x.forecast.probs().iter().map(|p| (1.0 - eps) * p + eps / n).collect();
        x.forecast = Forecast::new(shrunk).unwrap();
    }
    inst
}

/// Expected reward written out per family, independent of the library.
pub fn reward(rule: &RuleSpec, x: &[f64]) -> f64 {
    match rule.family() {
        Family::Quadratic => x.iter().map(|v| v * v).sum(),
        Family::Logarithmic => x.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum(),
        Family::NegLog => x.iter().map(|v| -v.ln()).sum(),
        Family::Power(g) if g < 0.0 => x.iter().map(|v| v.powf(g)).sum(),
        Family::Power(g) => -x.iter().map(|v| v.powf(g)).sum::<f64>(),
        Family::Spherical(a) => x.iter().map(|v| v.powf(a)).sum::<f64>().powf(1.0 / a),
        Family::Tsallis(g) => x.iter().map(|v| v.powf(g)).sum(),
        Family::Hs => -x.iter().product::<f64>().powf(1.0 / x.len() as f64),
    }
}

/// Central-difference gradient of [`reward`] in `R^n`, projected to sum zero.
pub fn numeric_exposure(rule: &RuleSpec, x: &[f64], h: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..x.len())
        .map(|k| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            (reward(rule, &a) - reward(rule, &b)) / (2.0 * h)
        })
        .collect();
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    g.iter_mut().for_each(|v| *v -= mean);
    g
}

pub fn arithmetic_pool(inst: &Instance) -> Vec<f64> {
    let w = inst.normalized_weights();
    (0..inst.n)
        .map(|j| inst.inputs.iter().zip(&w).map(|(x, wi)| wi * x.forecast.probs()[j]).sum())
        .collect()
}

pub fn geometric_pool(inst: &Instance) -> Vec<f64> {
    let w = inst.normalized_weights();
    let raw: Vec<f64> = (0..inst.n)
        .map(|j| {
            inst.inputs
                .iter()
                .zip(&w)
                .map(|(x, wi)| x.forecast.probs()[j].powf(*wi))
                .product()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// `Σ ŵ_i D_G(x ‖ p_i)` from [`reward`] and numeric gradients.
pub fn bregman_objective(rule: &RuleSpec, x: &[f64], inputs: &[WeightedForecast], grads: &[Vec<f64>]) -> f64 {
    let total: f64 = inputs.iter().map(|i| i.weight).sum();
    let gx = reward(rule, x);
    inputs
        .iter()
        .zip(grads)
        .map(|(inp, g)| {
            let p = inp.forecast.probs();
            let lin: f64 = g.iter().zip(x.iter().zip(p)).map(|(gk, (a, b))| gk * (a - b)).sum();
            inp.weight / total * (gx - reward(rule, p) - lin)
        })
        .sum()
}

/// Raw gradient of the Tsallis reward, `γ x^{γ-1}`, valid on the closed simplex.
pub fn tsallis_gradient(gamma: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| gamma * v.powf(gamma - 1.0)).collect()
}

/// Brute-force minimizer of `Σ ŵ_i D_G(x ‖ p_i)` on the grid of step `1/steps`
/// over the 3-outcome simplex.
pub fn grid_argmin_3(rule: &RuleSpec, inputs: &[WeightedForecast], grads: &[Vec<f64>], steps: usize) -> Vec<f64> {
    let mut best = (f64::INFINITY, vec![0.0; 3]);
    for a in 0..=steps {
        for b in 0..=(steps - a) {
            let x = [
                a as f64 / steps as f64,
                b as f64 / steps as f64,
                (steps - a - b) as f64 / steps as f64,
            ];
            let v = bregman_objective(rule, &x, inputs, grads);
            if v < best.0 {
                best = (v, x.to_vec());
            }
        }
    }
    best.1
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
