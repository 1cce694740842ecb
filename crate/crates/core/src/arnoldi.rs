//! Reduced-order interconnect model: per-sink two-sided Lanczos on the RC
//! tree, giving a small tridiagonal whose first 2q moments match the exact
//! network. Pole/residue form drives a closed-form ramp response for delay
//! and slew extraction; anything numerically suspect falls back to Elmore.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::delay::elmore;
use crate::rc::RcTree;

/// Pole/residue reduction for one sink.
#[derive(Debug, Clone)]
pub struct SinkModel {
    /// Diagonal of the Lanczos tridiagonal.
    pub alpha: Vec<f64>,
    /// Products of the paired off-diagonals (length q−1).
    pub beta: Vec<f64>,
    /// Time constants of the reduced pencil, ps (poles at −1/λ).
    pub lambda: Vec<f64>,
    /// Residues; non-negative for a symmetrizable reduction.
    pub residues: Vec<f64>,
    pub stable: bool,
    /// Elmore values for this sink, kept as the fallback.
    pub elmore_delay: f64,
    pub elmore_impulse: f64,
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    /// Requested order (achieved order per sink may be smaller on breakdown).
    pub q: usize,
    /// (tree node index, model) per sink node carrying a pin.
    pub sinks: Vec<(u32, SinkModel)>,
    pub total_cap: f64,
}

impl ReducedModel {
    pub fn sink(&self, node: u32) -> Option<&SinkModel> {
        self.sinks.iter().find(|(n, _)| *n == node).map(|(_, m)| m)
    }
}

/// Solve G·y = f on the grounded tree (root fixed at 0): the branch current
/// into a subtree equals the injection sum below it, so one upward pass
/// accumulates and one downward pass integrates. O(n).
pub fn tree_solve(tree: &RcTree, f: &[f64], y: &mut [f64]) {
    let n = tree.order.len();
    debug_assert_eq!(f.len(), n);
    let mut sub = f.to_vec();
    for &v in tree.order.iter().rev() {
        let p = tree.parent[v as usize];
        if p != v {
            sub[p as usize] += sub[v as usize];
        }
    }
    for &v in tree.order.iter() {
        let p = tree.parent[v as usize];
        y[v as usize] = if p == v {
            0.0
        } else {
            y[p as usize] + tree.parent_res[v as usize] * sub[v as usize]
        };
    }
}

/// x ← A·x with A = G⁻¹C: scale by node caps, then one tree solve.
fn apply_a(tree: &RcTree, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    for i in 0..x.len() {
        scratch[i] = tree.cap[i] * x[i];
    }
    tree_solve(tree, scratch, out);
}

/// x ← Aᵀ·x = C·G⁻¹·x.
fn apply_at(tree: &RcTree, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    tree_solve(tree, x, scratch);
    for i in 0..x.len() {
        out[i] = tree.cap[i] * scratch[i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-sided Lanczos for H(s) = eₛᵀ(I + sA)⁻¹·1. Right space starts from
/// the all-ones vector (unit DC transfer), left from the sink selector;
/// their inner product is exactly 1, so H(s) ≈ e₁ᵀ(I + sT_q)⁻¹e₁.
fn lanczos_sink(tree: &RcTree, sink: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = tree.order.len();
    let mut alpha = Vec::with_capacity(q);
    let mut beta: Vec<f64> = Vec::with_capacity(q.saturating_sub(1));

    let mut vs: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut ws: Vec<Vec<f64>> = vec![{
        let mut w = vec![0.0; n];
        w[sink] = 1.0;
        w
    }];
    let mut scratch = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut atw = vec![0.0; n];

    for j in 0..q {
        apply_a(tree, &vs[j], &mut scratch, &mut av);
        alpha.push(dot(&ws[j], &av));
        if j + 1 == q {
            break;
        }
        apply_at(tree, &ws[j], &mut scratch, &mut atw);
        let mut vhat = av.clone();
        let mut what = atw.clone();
        // Project out the whole history (two passes). With the pairs kept
        // biorthonormal this subsumes the classical three-term recurrence
        // and keeps the moment match tight.
        for _ in 0..2 {
            for k in 0..=j {
                let cv = dot(&ws[k], &vhat);
                let cw = dot(&vs[k], &what);
                for i in 0..n {
                    vhat[i] -= cv * vs[k][i];
                    what[i] -= cw * ws[k][i];
                }
            }
        }
        let delta = dot(&what, &vhat);
        let vnorm = dot(&vhat, &vhat).sqrt();
        let wnorm = dot(&what, &what).sqrt();
        let vscale = dot(&av, &av).sqrt().max(1e-300);
        let wscale = dot(&atw, &atw).sqrt().max(1e-300);
        if !delta.is_finite() || vnorm < 1e-10 * vscale || wnorm < 1e-10 * wscale {
            break; // invariant subspace reached: the model is already exact
        }
        if delta.abs() < 1e-14 * vnorm * wnorm {
            break; // serious breakdown: truncate to the achieved order
        }
        // Split |δ| evenly; a negative product is kept in beta and caught
        // by the stability check.
        let b = delta.abs().sqrt();
        let g = delta / b;
        beta.push(delta);
        for i in 0..n {
            vhat[i] /= b;
            what[i] /= g;
        }
        vs.push(vhat);
        ws.push(what);
    }
    (alpha, beta)
}

/// Pole/residue extraction from the (generally unsymmetric) tridiagonal.
/// Off-diagonal products may be negative — sink-side transfers have
/// mixed-sign residues — so the spectrum comes from the general small
/// eigenproblem, with a symmetric fast path when the products allow it.
/// Residues are recovered from the model's own moments μ_k = e₁ᵀTᵏe₁ by a
/// Vandermonde solve; the shared characteristic recurrence then carries the
/// match to every higher moment. Returns None when a pole is non-real or
/// non-positive (model unstable for an RC tree).
fn pole_residue(alpha: &[f64], beta_prod: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let q = alpha.len();
    if q == 0 {
        return None;
    }
    let mut t = DMatrix::<f64>::zeros(q, q);
    for (i, &a) in alpha.iter().enumerate() {
        t[(i, i)] = a;
    }
    let symmetric = beta_prod.iter().all(|&p| p >= 0.0);
    for (i, &p) in beta_prod.iter().enumerate() {
        if symmetric {
            let s = p.sqrt();
            t[(i, i + 1)] = s;
            t[(i + 1, i)] = s;
        } else {
            let b = p.abs().sqrt().max(1e-300);
            t[(i, i + 1)] = p / b;
            t[(i + 1, i)] = b;
        }
    }
    let lambda: Vec<f64> = if symmetric {
        SymmetricEigen::new(t.clone()).eigenvalues.iter().copied().collect()
    } else {
        let eigs = t.complex_eigenvalues();
        let scale = eigs.iter().map(|c| c.norm()).fold(1e-30, f64::max);
        let mut out = Vec::with_capacity(q);
        for c in eigs.iter() {
            if c.im.abs() > 1e-8 * scale {
                return None; // complex pair: not an RC-like reduction
            }
            out.push(c.re);
        }
        out
    };
    if lambda.iter().any(|&l| l <= 0.0) {
        return None;
    }
    // Moments of the reduced model, μ_k = e₁ᵀTᵏe₁ for k = 0..q−1.
    let mut mu = Vec::with_capacity(q);
    let mut x = DMatrix::<f64>::zeros(q, 1);
    x[(0, 0)] = 1.0;
    mu.push(x[(0, 0)]);
    for _ in 1..q {
        x = &t * x;
        mu.push(x[(0, 0)]);
    }
    // Solve Σᵢ wᵢ λᵢᵏ = μ_k (Vandermonde, small q).
    let mut v = DMatrix::<f64>::zeros(q, q);
    for k in 0..q {
        for (i, &l) in lambda.iter().enumerate() {
            v[(k, i)] = l.powi(k as i32);
        }
    }
    let rhs = DMatrix::<f64>::from_column_slice(q, 1, &mu);
    let w = v.lu().solve(&rhs)?;
    let residues: Vec<f64> = (0..q).map(|i| w[(i, 0)]).collect();
    if residues.iter().any(|r| !r.is_finite()) {
        return None;
    }
    Some((lambda, residues))
}

/// Reduce every sink of the tree to order ≤ q.
pub fn arnoldi_reduce(tree: &RcTree, q: usize) -> ReducedModel {
    let n = tree.order.len();
    let q = q.clamp(1, n.max(1));
    let elm = elmore(tree);
    let total_cap = tree.cap.iter().sum();
    let mut sinks = Vec::new();
    for node in 0..n {
        if tree.pin[node].is_none() || node as u32 == tree.root {
            continue;
        }
        let (alpha, beta) = lanczos_sink(tree, node, q);
        let (lambda, residues, stable) = match pole_residue(&alpha, &beta) {
            Some((l, r)) => (l, r, true),
            None => (Vec::new(), Vec::new(), false),
        };
        sinks.push((
            node as u32,
            SinkModel {
                alpha,
                beta,
                lambda,
                residues,
                stable,
                elmore_delay: elm.delay[node],
                elmore_impulse: elm.impulse[node],
            },
        ));
    }
    ReducedModel { q, sinks, total_cap }
}

/// Reduced-model response at time t to a saturated ramp of duration ramp
/// (unit final value). Residues are non-negative, so this is monotone.
fn ramp_response(m: &SinkModel, ramp: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut y = 0.0;
    if ramp <= 0.0 {
        for (&l, &w) in m.lambda.iter().zip(&m.residues) {
            y += w * (1.0 - (-t / l).exp());
        }
    } else if t <= ramp {
        for (&l, &w) in m.lambda.iter().zip(&m.residues) {
            y += w * (t - l * (1.0 - (-t / l).exp())) / ramp;
        }
    } else {
        for (&l, &w) in m.lambda.iter().zip(&m.residues) {
            y += w * (1.0 - l / ramp * ((-(t - ramp) / l).exp() - (-t / l).exp()));
        }
    }
    y
}

/// First t with response ≥ target, by doubling bracket + bisection.
fn crossing(m: &SinkModel, ramp: f64, target: f64) -> f64 {
    let gain: f64 = m.residues.iter().sum();
    debug_assert!(target < gain * (1.0 + 1e-9));
    let mut hi = m.lambda.iter().cloned().fold(ramp.max(1e-3), f64::max);
    let mut guard = 0;
    while ramp_response(m, ramp, hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return hi;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if ramp_response(m, ramp, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Delay (input 50% to output 50%) and output slew (20–80 width) for one
/// sink under a driver ramp of the given slew. Unstable models use Elmore.
/// Returns (delay, out_slew, used_fallback).
pub fn arnoldi_delay(m: &SinkModel, drv_slew: f64) -> (f64, f64, bool) {
    let gain: f64 = m.residues.iter().sum();
    if !m.stable || gain <= 0.5 {
        // Unstable or degenerate reduction (lost the DC path): fall back.
        return (
            m.elmore_delay,
            crate::delay::net_slew(drv_slew, m.elmore_impulse),
            true,
        );
    }
    let ramp = (drv_slew / 0.8).max(0.0);
    // Targets scale with the achieved DC gain (≈1) so truncation roundoff
    // cannot strand the bracketing search.
    let t50 = crossing(m, ramp, 0.5 * gain);
    let t20 = crossing(m, ramp, 0.2 * gain);
    let t80 = crossing(m, ramp, 0.8 * gain);
    let delay = (t50 - 0.5 * ramp).max(0.0);
    let slew = (t80 - t20).max(1e-3);
    (delay, slew, false)
}

/// k-th transfer moments at every node: m₀ = 1, m_{k+1} = −G⁻¹C·m_k.
/// The exact-moment oracle the reduction is tested against.
pub fn exact_moments(tree: &RcTree, count: usize) -> Vec<Vec<f64>> {
    let n = tree.order.len();
    let mut out = Vec::with_capacity(count);
    let mut cur = vec![1.0; n];
    out.push(cur.clone());
    let mut scratch = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 1..count {
        apply_a(tree, &cur, &mut scratch, &mut next);
        for v in next.iter_mut() {
            *v = -*v;
        }
        std::mem::swap(&mut cur, &mut next);
        out.push(cur.clone());
    }
    out
}

/// Moments of the reduced model, straight from the tridiagonal:
/// m_k = (−1)ᵏ e₁ᵀTᵏe₁. Defined whether or not the pole/residue form is
/// stable; equals Σᵢ wᵢ(−λᵢ)ᵏ when it is.
pub fn model_moments(m: &SinkModel, count: usize) -> Vec<f64> {
    let q = m.alpha.len();
    // Balanced off-diagonals: e₁ᵀTᵏe₁ only sees the products.
    let off: Vec<(f64, f64)> = m
        .beta
        .iter()
        .map(|&p| {
            let b = p.abs().sqrt().max(1e-300);
            (b, p / b)
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    let mut x = vec![0.0; q];
    if q > 0 {
        x[0] = 1.0;
    }
    let mut sign = 1.0;
    for _ in 0..count {
        out.push(sign * x.first().copied().unwrap_or(0.0));
        sign = -sign;
        let mut next = vec![0.0; q];
        for i in 0..q {
            let mut v = m.alpha[i] * x[i];
            if i > 0 {
                v += off[i - 1].0 * x[i - 1];
            }
            if i + 1 < q {
                v += off[i].1 * x[i + 1];
            }
            next[i] = v;
        }
        x = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rc::{RcNet, RcNode, RcRes};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize, r: f64, c: f64) -> RcTree {
        let mut nodes = vec![RcNode { cap: 0.0, pin: Some(0) }];
        let mut ress = Vec::new();
        for i in 1..=n {
            nodes.push(RcNode { cap: c, pin: Some(i as u32) });
            ress.push(RcRes { a: i as u32 - 1, b: i as u32, r });
        }
        RcNet { nodes, resistors: ress, root: 0 }.tree().unwrap()
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> RcTree {
        let mut nodes = vec![RcNode { cap: 0.0, pin: Some(0) }];
        let mut ress = Vec::new();
        for i in 1..n {
            let parent = rng.gen_range(0..i) as u32;
            nodes.push(RcNode {
                cap: rng.gen_range(1.0..4.0),
                pin: Some(i as u32),
            });
            ress.push(RcRes { a: parent, b: i as u32, r: rng.gen_range(0.5..2.0) });
        }
        RcNet { nodes, resistors: ress, root: 0 }.tree().unwrap()
    }

    #[test]
    fn single_segment_is_exact() {
        // One RC: pole at −1/(RC), unit residue.
        let t = chain(1, 2.0, 3.0); // RC = 6 ps
        let m = arnoldi_reduce(&t, 1);
        let sink = m.sink(1).unwrap();
        assert!(sink.stable);
        assert_eq!(sink.lambda.len(), 1);
        assert!((sink.lambda[0] - 6.0).abs() < 1e-9);
        assert!((sink.residues[0] - 1.0).abs() < 1e-9);
        // Step input: delay = RC·ln 2.
        let (d, _, fb) = arnoldi_delay(sink, 0.0);
        assert!(!fb);
        assert!((d - 6.0 * std::f64::consts::LN_2).abs() < 1e-5, "{d}");
    }

    #[test]
    fn chain_moments_match_exact() {
        // 20-node chain at q=3: first 5 moments to 1e-9 relative.
        let t = chain(20, 1.0, 1.0);
        let model = arnoldi_reduce(&t, 3);
        let exact = exact_moments(&t, 5);
        for (node, sink) in &model.sinks {
            let got = model_moments(sink, 5);
            for k in 0..5 {
                let want = exact[k][*node as usize];
                let scale = want.abs().max(1e-30);
                assert!(
                    ((got[k] - want) / scale).abs() < 1e-9,
                    "node {node} moment {k}: {} vs {want}",
                    got[k]
                );
            }
        }
    }

    #[test]
    fn random_trees_match_two_q_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(3..12);
            let q = rng.gen_range(1..4usize);
            let t = random_tree(&mut rng, n);
            let model = arnoldi_reduce(&t, q);
            let exact = exact_moments(&t, 2 * q);
            for (node, sink) in &model.sinks {
                let got = model_moments(sink, 2 * q);
                for k in 0..2 * q {
                    let want = exact[k][*node as usize];
                    let scale = want.abs().max(1e-12);
                    assert!(
                        ((got[k] - want) / scale).abs() < 1e-7,
                        "n={n} q={q} node {node} moment {k}: {} vs {want}",
                        got[k]
                    );
                }
            }
        }
    }

    #[test]
    fn breakdown_truncates_order() {
        // 2-node network asked for order 5: achieved order is capped by the
        // state dimension, not an error.
        let t = chain(2, 1.0, 1.0);
        let m = arnoldi_reduce(&t, 5);
        for (_, sink) in &m.sinks {
            assert!(sink.alpha.len() <= 2 + 1); // breakdown leaves ≤ n terms
            assert!(sink.stable);
        }
    }

    #[test]
    fn unstable_model_falls_back_to_elmore() {
        let t = chain(1, 1.0, 1.0);
        let m = arnoldi_reduce(&t, 1);
        let mut sink = m.sink(1).unwrap().clone();
        sink.stable = false;
        let (d, _, fb) = arnoldi_delay(&sink, 10.0);
        assert!(fb);
        assert!((d - sink.elmore_delay).abs() < 1e-12);
    }

    #[test]
    fn delay_within_coarse_rc_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(2..10);
            let t = random_tree(&mut rng, n);
            let sum_r: f64 = t.parent_res.iter().sum();
            let sum_c: f64 = t.cap.iter().sum();
            let model = arnoldi_reduce(&t, 4);
            for (_, sink) in &model.sinks {
                let (d, s, _) = arnoldi_delay(sink, rng.gen_range(0.0..20.0));
                assert!(d >= 0.0 && d <= sum_r * sum_c + 1e-6, "{d} vs {}", sum_r * sum_c);
                assert!(s > 0.0);
            }
        }
    }

    #[test]
    fn ramp_limit_matches_step() {
        let t = chain(3, 1.0, 2.0);
        let model = arnoldi_reduce(&t, 3);
        let sink = model.sink(3).unwrap();
        let (d_step, _, _) = arnoldi_delay(sink, 0.0);
        let (d_ramp, _, _) = arnoldi_delay(sink, 1e-6);
        assert!((d_step - d_ramp).abs() < 1e-4);
    }
}
