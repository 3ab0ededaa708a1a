use serde::{Deserialize, Serialize};

use super::dgp::DgpSpec;
use crate::policy::{enumerate_grid, ParamBox, PolicyParams, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub params: PolicyParams,
    pub value: f64,
    pub method: OracleMethod,
}

/// Treated sub-intervals of `(0, w)` under `1(x < beta1 or x > beta2)`.
pub fn treated_intervals(w: f64, policy: &ThresholdPolicy) -> Vec<(f64, f64)> {
    if policy.beta1 >= policy.beta2 {
        return vec![(0.0, w)];
    }
    let mut out = Vec::with_capacity(2);
    let left = policy.beta1.clamp(0.0, w);
    if left > 0.0 {
        out.push((0.0, left));
    }
    let right = policy.beta2.clamp(0.0, w);
    if right < w {
        out.push((right, w));
    }
    out
}

fn baseline(spec: &DgpSpec) -> f64 {
    spec.gamma0 + spec.gamma1 * spec.w / 2.0
}

/// Closed-form `E[Y(d)]`.
pub fn oracle_value(spec: &DgpSpec, policy: &ThresholdPolicy) -> OracleValue {
    let effect: f64 = treated_intervals(spec.w, policy)
        .iter()
        .map(|(l, u)| spec.tau_antiderivative(*u) - spec.tau_antiderivative(*l))
        .sum();
    OracleValue {
        params: PolicyParams(vec![policy.beta1, policy.beta2]),
        value: baseline(spec) + effect / spec.w,
        method: OracleMethod::ClosedForm,
    }
}

/// The same value by adaptive Simpson quadrature of `tau` over the treated
/// region. Used to cross-check the closed form.
pub fn oracle_value_quadrature(spec: &DgpSpec, policy: &ThresholdPolicy) -> OracleValue {
    let mut effect = 0.0;
    for (l, u) in treated_intervals(spec.w, policy) {
        let mut cuts = vec![l];
        cuts.extend(spec.breakpoints().iter().copied().filter(|b| *b > l && *b < u));
        cuts.push(u);
        for win in cuts.windows(2) {
            effect += adaptive_simpson(&|x| spec.tau(x), win[0], win[1], 1e-13, 50);
        }
    }
    OracleValue {
        params: PolicyParams(vec![policy.beta1, policy.beta2]),
        value: baseline(spec) + effect / spec.w,
        method: OracleMethod::Quadrature,
    }
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Best oracle value over a `resolution x resolution` lattice of `[0,1]^2`.
pub fn grid_optimum(spec: &DgpSpec, resolution: usize) -> OracleValue {
    let grid = enumerate_grid(&ParamBox::unit_square(), &[resolution, resolution])
        .expect("resolution >= 2");
    let mut best: Option<OracleValue> = None;
    for p in grid {
        let v = oracle_value(spec, &ThresholdPolicy::new(p.0[0], p.0[1]));
        if best.as_ref().is_none_or(|b| v.value > b.value) {
            best = Some(v);
        }
    }
    best.expect("nonempty grid")
}
