//! Adaptive cubature on the unit cube `[0,1]³` with the degree-7/5 embedded
//! Genz–Malik rule.
//!
//! Cells are bisected along the axis with the largest fourth divided difference.
//! Refinement proceeds in rounds: each round splits the worst cells (error, then
//! creation id as tie-break), evaluates the children concurrently and merges them
//! back in creation order, so the result does not depend on the worker count. The
//! final value is a compensated sum over cells in id order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::Result;
use crate::numeric::KahanSum;

const DIM: usize = 3;

// Genz–Malik nodes (fractions of the half-width) and weights for n = 3.
const L2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const L4: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const L5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)
const W1: f64 = (12824.0 - 9120.0 * 3.0 + 400.0 * 9.0) / 19683.0;
const W2: f64 = 980.0 / 6561.0;
const W3: f64 = (1820.0 - 400.0 * 3.0) / 19683.0;
const W4: f64 = 200.0 / 19683.0;
const W5: f64 = 6859.0 / 19683.0 / 8.0;
const E1: f64 = (729.0 - 950.0 * 3.0 + 50.0 * 9.0) / 729.0;
const E2: f64 = 245.0 / 486.0;
const E3: f64 = (265.0 - 100.0 * 3.0) / 1458.0;
const E4: f64 = 25.0 / 729.0;
const FOURTH_DIFF_RATIO: f64 = (L2 * L2) / (L4 * L4);

#[derive(Debug, Clone, Copy)]
pub struct CubatureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_cells: usize,
    /// Cells per axis in the initial partition.
    pub initial_divisions: usize,
}

impl Default for CubatureConfig {
    fn default() -> Self {
        CubatureConfig { rel_tol: 1e-6, abs_tol: 0.0, max_cells: 2_000_000, initial_divisions: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct CubatureResult<const K: usize> {
    /// Per-component integrals.
    pub components: [f64; K],
    /// Integral of the component sum.
    pub value: f64,
    pub abs_error: f64,
    pub cells: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct Cell<const K: usize> {
    center: [f64; DIM],
    half: [f64; DIM],
    values: [f64; K],
    err: f64,
    split_axis: usize,
    id: u64,
}

impl<const K: usize> PartialEq for Cell<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const K: usize> Eq for Cell<K> {}
impl<const K: usize> PartialOrd for Cell<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Cell<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then_with(|| other.id.cmp(&self.id))
    }
}

const POINTS_PER_CELL: usize = 33;

/// Applies the rule to one cell.
fn evaluate<const K: usize, F>(f: &F, center: [f64; DIM], half: [f64; DIM], id: u64) -> Result<Cell<K>>
where
    F: Fn(&[f64; DIM]) -> Result<[f64; K]>,
{
    let at = |offsets: [f64; DIM]| -> Result<[f64; K]> {
        let mut x = center;
        for i in 0..DIM {
            x[i] += offsets[i] * half[i];
        }
        f(&x)
    };
    let add = |acc: &mut [f64; K], v: &[f64; K]| {
        for k in 0..K {
            acc[k] += v[k];
        }
    };

    let f0 = at([0.0; DIM])?;
    let mut s2 = [0.0; K];
    let mut s3 = [0.0; K];
    let mut fourth = [0.0f64; DIM];
    let total = |v: &[f64; K]| v.iter().sum::<f64>();
    let f0_total = total(&f0);
    for i in 0..DIM {
        let mut o = [0.0; DIM];
        o[i] = L2;
        let a = at(o)?;
        o[i] = -L2;
        let b = at(o)?;
        o[i] = L4;
        let c = at(o)?;
        o[i] = -L4;
        let e = at(o)?;
        add(&mut s2, &a);
        add(&mut s2, &b);
        add(&mut s3, &c);
        add(&mut s3, &e);
        fourth[i] = (total(&a) + total(&b) - 2.0 * f0_total
            - FOURTH_DIFF_RATIO * (total(&c) + total(&e) - 2.0 * f0_total))
            .abs();
    }
    let mut s4 = [0.0; K];
    for i in 0..DIM {
        for j in i + 1..DIM {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut o = [0.0; DIM];
                o[i] = si * L4;
                o[j] = sj * L4;
                add(&mut s4, &at(o)?);
            }
        }
    }
    let mut s5 = [0.0; K];
    for mask in 0..8u32 {
        let mut o = [0.0; DIM];
        for (i, oi) in o.iter_mut().enumerate() {
            *oi = if mask & (1 << i) != 0 { L5 } else { -L5 };
        }
        add(&mut s5, &at(o)?);
    }

    let volume: f64 = half.iter().map(|h| 2.0 * h).product();
    let mut values = [0.0; K];
    let mut err = 0.0;
    for k in 0..K {
        let r7 = W1 * f0[k] + W2 * s2[k] + W3 * s3[k] + W4 * s4[k] + W5 * s5[k];
        let r5 = E1 * f0[k] + E2 * s2[k] + E3 * s3[k] + E4 * s4[k];
        values[k] = volume * r7;
        err += volume * (r7 - r5).abs();
    }

    // Split along the largest fourth difference; near-ties go to the widest axis.
    let max_diff = fourth.iter().cloned().fold(0.0, f64::max);
    let mut split_axis = 0;
    let mut best_width = -1.0;
    for i in 0..DIM {
        if fourth[i] >= max_diff * (1.0 - 1e-10) && half[i] > best_width {
            best_width = half[i];
            split_axis = i;
        }
    }
    Ok(Cell { center, half, values, err, split_axis, id })
}

/// Integrates a `K`-component function over `[0,1]³`; the error target applies
/// to the component sum.
pub fn integrate_cube<const K: usize, F>(f: &F, cfg: &CubatureConfig) -> Result<CubatureResult<K>>
where
    F: Fn(&[f64; DIM]) -> Result<[f64; K]> + Sync,
{
    let m = cfg.initial_divisions.max(1);
    let h = 0.5 / m as f64;
    let mut specs = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let c = [(2 * i + 1) as f64 * h, (2 * j + 1) as f64 * h, (2 * k + 1) as f64 * h];
                specs.push((c, [h; DIM]));
            }
        }
    }
    let mut next_id = 0u64;
    let initial = eval_batch(f, &specs, &mut next_id)?;
    let mut heap: BinaryHeap<Cell<K>> = initial.into_iter().collect();
    let mut evaluations = heap.len() * POINTS_PER_CELL;

    let converged = loop {
        let (value, err) = totals(&heap);
        if err <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            break true;
        }
        if heap.len() >= cfg.max_cells {
            break false;
        }
        let batch = (heap.len() / 32).clamp(1, cfg.max_cells - heap.len());
        let mut specs = Vec::with_capacity(2 * batch);
        for _ in 0..batch {
            let cell = heap.pop().expect("non-empty heap");
            let ax = cell.split_axis;
            let mut half = cell.half;
            half[ax] *= 0.5;
            let mut lo = cell.center;
            lo[ax] -= half[ax];
            let mut hi = cell.center;
            hi[ax] += half[ax];
            specs.push((lo, half));
            specs.push((hi, half));
        }
        let children = eval_batch(f, &specs, &mut next_id)?;
        evaluations += children.len() * POINTS_PER_CELL;
        heap.extend(children);
    };

    let mut cells: Vec<Cell<K>> = heap.into_vec();
    cells.sort_by_key(|c| c.id);
    let mut comp = [KahanSum::default(); K];
    let mut err = KahanSum::default();
    for c in &cells {
        for (acc, v) in comp.iter_mut().zip(c.values) {
            acc.add(v);
        }
        err.add(c.err);
    }
    let components: [f64; K] = std::array::from_fn(|k| comp[k].sum());
    let value = components.iter().copied().collect::<KahanSum>().sum();
    Ok(CubatureResult { components, value, abs_error: err.sum(), cells: cells.len(), evaluations, converged })
}

fn eval_batch<const K: usize, F>(f: &F, specs: &[([f64; DIM], [f64; DIM])], next_id: &mut u64) -> Result<Vec<Cell<K>>>
where
    F: Fn(&[f64; DIM]) -> Result<[f64; K]> + Sync,
{
    let base = *next_id;
    *next_id += specs.len() as u64;
    specs
        .par_iter()
        .enumerate()
        .map(|(i, (c, h))| evaluate(f, *c, *h, base + i as u64))
        .collect()
}

fn totals<const K: usize>(heap: &BinaryHeap<Cell<K>>) -> (f64, f64) {
    let mut v = KahanSum::default();
    let mut e = 0.0;
    for c in heap.iter() {
        for k in 0..K {
            v.add(c.values[k]);
        }
        e += c.err;
    }
    (v.sum(), e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_degree_seven() {
        let f = |x: &[f64; 3]| Ok([x[0].powi(7) + x[1].powi(3) * x[2].powi(4), x[0] * x[1] * x[2]]);
        let cfg = CubatureConfig { initial_divisions: 1, max_cells: 1, ..Default::default() };
        let r = integrate_cube(&f, &cfg).unwrap();
        assert!((r.components[0] - (1.0 / 8.0 + 1.0 / 20.0)).abs() < 1e-14);
        assert!((r.components[1] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn no_split_for_degree_five() {
        let f = |x: &[f64; 3]| Ok([x[0].powi(5) + x[1] * x[1] * x[2].powi(3)]);
        let cfg = CubatureConfig { initial_divisions: 1, ..Default::default() };
        let r = integrate_cube(&f, &cfg).unwrap();
        assert_eq!(r.cells, 1);
        assert!((r.value - (1.0 / 6.0 + 1.0 / 12.0)).abs() < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn smooth_function_to_tolerance() {
        let f = |x: &[f64; 3]| Ok([(x[0] + 2.0 * x[1] - x[2]).cos()]);
        let cfg = CubatureConfig { rel_tol: 1e-10, ..Default::default() };
        let r = integrate_cube(&f, &cfg).unwrap();
        // ∫cos(x+2y−z) over the unit cube = Re ∏ (e^{ia}−1)/(ia)
        let one = |a: f64| num_c(a);
        let (p1, p2, p3) = (one(1.0), one(2.0), one(-1.0));
        let re = mul(mul(p1, p2), p3).0;
        assert!((r.value - re).abs() < 1e-9, "{} vs {}", r.value, re);
        assert!(r.converged);
    }

    fn num_c(a: f64) -> (f64, f64) {
        // (e^{ia} − 1)/(ia) = (sin a)/a + i (1 − cos a)/a
        (a.sin() / a, (1.0 - a.cos()) / a)
    }
    fn mul(x: (f64, f64), y: (f64, f64)) -> (f64, f64) {
        (x.0 * y.0 - x.1 * y.1, x.0 * y.1 + x.1 * y.0)
    }

    #[test]
    fn corner_singularity() {
        // ∫ (x+y+z)^{-1} over the unit cube is finite; compare two tolerances.
        let f = |x: &[f64; 3]| Ok([1.0 / (x[0] + x[1] + x[2])]);
        let coarse = integrate_cube(&f, &CubatureConfig { rel_tol: 1e-4, ..Default::default() }).unwrap();
        let fine = integrate_cube(&f, &CubatureConfig { rel_tol: 1e-7, ..Default::default() }).unwrap();
        assert!(fine.converged);
        assert!((coarse.value - fine.value).abs() < 3e-4 * fine.value);
    }

    #[test]
    fn budget_exhaustion_reports_non_convergence() {
        let f = |x: &[f64; 3]| Ok([(x[0] * x[1]).powf(-0.9)]);
        let r = integrate_cube(&f, &CubatureConfig { rel_tol: 1e-12, max_cells: 500, ..Default::default() }).unwrap();
        assert!(!r.converged);
        assert!(r.cells <= 500 + 64);
    }

    #[test]
    fn independent_of_worker_count() {
        let f = |x: &[f64; 3]| Ok([(x[0] * x[1] + 1e-3).ln() * x[2], x[0].sqrt()]);
        let cfg = CubatureConfig { rel_tol: 1e-8, ..Default::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| integrate_cube(&f, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.components[1].to_bits(), b.components[1].to_bits());
        assert_eq!(a.cells, b.cells);
    }
}
