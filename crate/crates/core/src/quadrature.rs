//! Gauss–Kronrod 7/15 rules: adaptive scalar integration and vector-valued panel grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kronrod abscissae on [0, 1], descending; odd indices are the Gauss points.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// The 15 Kronrod nodes and weights mapped onto [a, b], in ascending order.
pub fn gk15_nodes(a: f64, b: f64) -> ([f64; 15], [f64; 15]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    let mut w = [0.0; 15];
    for j in 0..7 {
        x[j] = c - h * XGK[j];
        w[j] = h * WGK[j];
        x[14 - j] = c + h * XGK[j];
        w[14 - j] = h * WGK[j];
    }
    x[7] = c;
    w[7] = h * WGK[7];
    (x, w)
}

/// Gauss-7 weights aligned with `gk15_nodes` ordering (zero at pure Kronrod points).
fn gauss_weights(h: f64) -> [f64; 15] {
    let mut g = [0.0; 15];
    for j in 0..3 {
        let idx = 2 * j + 1;
        g[idx] = h * WG[j];
        g[14 - idx] = h * WG[j];
    }
    g[7] = h * WG[3];
    g
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15_complex<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Segment {
    let (x, w) = gk15_nodes(a, b);
    let g = gauss_weights(0.5 * (b - a));
    let mut k = Complex64::new(0.0, 0.0);
    let mut gs = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for i in 0..15 {
        let v = f(x[i]);
        k += v * w[i];
        gs += v * g[i];
        abs += v.norm() * w[i];
    }
    let error = (k - gs).norm().max(50.0 * f64::EPSILON * abs);
    Segment { a, b, value: k, error, abs }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

/// Globally adaptive GK15 over consecutive breakpoints. Stops once the summed
/// error estimate is below `max(abs_tol, rel_tol·|I|)` or at the roundoff floor.
pub fn integrate_complex<F: Fn(f64) -> Complex64>(
    f: F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15_complex(&f, w[0], w[1]));
        }
    }
    loop {
        let value: Complex64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        let roundoff: f64 = 100.0 * f64::EPSILON * heap.iter().map(|s| s.abs).sum::<f64>();
        if error <= abs_tol.max(rel_tol * value.norm()).max(roundoff) {
            return Ok(Estimate { value, error });
        }
        if heap.len() >= max_segments {
            return Err(Error::Quadrature { residual: error });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature { residual: error });
        }
        heap.push(gk15_complex(&f, worst.a, mid));
        heap.push(gk15_complex(&f, mid, worst.b));
    }
}

/// Real-valued convenience wrapper around [`integrate_complex`].
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let e = integrate_complex(|x| Complex64::new(f(x), 0.0), breakpoints, abs_tol, rel_tol, 10_000)?;
    Ok((e.value.re, e.error))
}

/// One quadrature node of a panel grid together with its evaluated payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridNode<T> {
    pub omega: f64,
    pub weight: f64,
    pub payload: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelGrid<T> {
    pub nodes: Vec<GridNode<T>>,
    pub panels: Vec<(f64, f64)>,
    /// Integrals of the control components.
    pub integrals: Vec<f64>,
    /// Summed |K15 − G7| over components and panels.
    pub error: f64,
    pub converged: bool,
}

struct Panel<T> {
    a: f64,
    b: f64,
    nodes: Vec<GridNode<T>>,
    k: Vec<f64>,
    err: f64,
}

/// Builds a composite GK15 grid for a vector-valued integrand. Each round
/// evaluates all new panels in parallel, then bisects every panel whose error
/// exceeds its length share of `rel_tol · Σ_c |∫ f_c|`.
///
/// `f` returns the node payload and the control components; their count must
/// not vary between nodes.
pub fn adaptive_grid<T, F>(
    breakpoints: &[f64],
    initial_panels: usize,
    max_panels: usize,
    rel_tol: f64,
    f: F,
) -> Result<PanelGrid<T>>
where
    T: Send,
    F: Fn(f64) -> Result<(T, Vec<f64>)> + Sync,
{
    let mut pending: Vec<(f64, f64)> = Vec::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            let h = (w[1] - w[0]) / initial_panels as f64;
            for i in 0..initial_panels {
                let a = w[0] + h * i as f64;
                let b = if i + 1 == initial_panels { w[1] } else { a + h };
                pending.push((a, b));
            }
        }
    }
    let total_len: f64 = pending.iter().map(|(a, b)| b - a).sum();
    let mut done: Vec<Panel<T>> = Vec::new();
    loop {
        let jobs: Vec<(usize, usize, f64, f64)> = pending
            .iter()
            .enumerate()
            .flat_map(|(p, &(a, b))| {
                let (x, w) = gk15_nodes(a, b);
                (0..15).map(move |i| (p, i, x[i], w[i]))
            })
            .collect();
        let evaluated: Vec<Result<(T, Vec<f64>)>> = jobs.par_iter().map(|&(_, _, x, _)| f(x)).collect();
        let mut fresh: Vec<Panel<T>> = pending
            .iter()
            .map(|&(a, b)| Panel { a, b, nodes: Vec::with_capacity(15), k: Vec::new(), err: 0.0 })
            .collect();
        let mut comps: Vec<Vec<Vec<f64>>> = pending.iter().map(|_| Vec::with_capacity(15)).collect();
        for ((p, _, x, w), r) in jobs.into_iter().zip(evaluated) {
            let (payload, c) = r?;
            fresh[p].nodes.push(GridNode { omega: x, weight: w, payload });
            comps[p].push(c);
        }
        for (panel, c) in fresh.iter_mut().zip(comps) {
            let nc = c[0].len();
            let g = gauss_weights(0.5 * (panel.b - panel.a));
            let mut k = vec![0.0; nc];
            let mut gs = vec![0.0; nc];
            for (i, row) in c.iter().enumerate() {
                if row.len() != nc {
                    return Err(Error::Quadrature { residual: f64::NAN });
                }
                for j in 0..nc {
                    k[j] += panel.nodes[i].weight * row[j];
                    gs[j] += g[i] * row[j];
                }
            }
            panel.err = k.iter().zip(&gs).map(|(a, b)| (a - b).abs()).sum();
            panel.k = k;
        }
        done.extend(fresh);
        done.sort_by(|x, y| x.a.total_cmp(&y.a));

        let nc = done[0].k.len();
        let mut integrals = vec![0.0; nc];
        for p in &done {
            for j in 0..nc {
                integrals[j] += p.k[j];
            }
        }
        let scale: f64 = integrals.iter().map(|v| v.abs()).sum();
        let error: f64 = done.iter().map(|p| p.err).sum();
        let target = rel_tol * scale;
        let finished = error <= target || scale == 0.0;
        let exhausted = done.len() >= max_panels;
        if finished || exhausted {
            let panels = done.iter().map(|p| (p.a, p.b)).collect();
            let nodes = done.into_iter().flat_map(|p| p.nodes).collect();
            return Ok(PanelGrid { nodes, panels, integrals, error, converged: finished });
        }
        let mut keep = Vec::with_capacity(done.len());
        pending.clear();
        for p in done {
            let share = target * (p.b - p.a) / total_len;
            let mid = 0.5 * (p.a + p.b);
            if p.err > share && mid > p.a && mid < p.b && keep.len() + pending.len() + 2 <= max_panels + 1 {
                pending.push((p.a, mid));
                pending.push((mid, p.b));
            } else {
                keep.push(p);
            }
        }
        if pending.is_empty() {
            let panels = keep.iter().map(|p| (p.a, p.b)).collect();
            let nodes = keep.into_iter().flat_map(|p| p.nodes).collect();
            return Ok(PanelGrid { nodes, panels, integrals, error, converged: false });
        }
        done = keep;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_weights_sum_to_length() {
        let (_, w) = gk15_nodes(-1.0, 3.0);
        assert_relative_eq!(w.iter().sum::<f64>(), 4.0, max_relative = 1e-15);
        let g = gauss_weights(2.0);
        assert_relative_eq!(g.iter().sum::<f64>(), 4.0, max_relative = 1e-15);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let (v, _) = integrate(|x| x.powi(20), &[0.0, 1.0], 0.0, 1e-14).unwrap();
        assert_relative_eq!(v, 1.0 / 21.0, max_relative = 1e-14);
    }

    #[test]
    fn resolves_a_sharp_peak() {
        let eps: f64 = 1e-4;
        let (v, _) = integrate(|x| eps / (x * x + eps * eps), &[-1.0, 0.0, 1.0], 0.0, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0 * (1.0 / eps).atan(), max_relative = 1e-11);
    }

    #[test]
    fn grid_integrates_vector_components() {
        let g = adaptive_grid(&[0.0, 2.0, 30.0], 2, 4000, 1e-12, |x| {
            Ok(((), vec![(-x).exp(), x * (-x).exp(), (x - 1.0).abs()]))
        })
        .unwrap();
        assert!(g.converged);
        let sum = |c: usize| -> f64 {
            g.nodes
                .iter()
                .map(|n| {
                    n.weight
                        * match c {
                            0 => (-n.omega).exp(),
                            _ => n.omega * (-n.omega).exp(),
                        }
                })
                .sum()
        };
        assert_relative_eq!(sum(0), -(-30f64).exp_m1(), max_relative = 1e-12);
        assert_relative_eq!(sum(1), 1.0 - 31.0 * (-30f64).exp(), max_relative = 1e-12);
        assert!(g.nodes.windows(2).all(|w| w[0].omega < w[1].omega));
    }
}
