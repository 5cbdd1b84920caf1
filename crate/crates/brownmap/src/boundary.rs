//! Tracing the domain boundary and its image.
//!
//! The domain boundary is the zero set of the limit ratio. A marching
//! squares pass over a sign grid finds every crossing cell, each crossing
//! point is then refined by bisection along its grid edge until the ratio
//! is below the boundary tolerance, and the resulting segments are chained
//! into polylines. The image boundary is the pointwise image of the traced
//! domain boundary under h, since h carries the domain boundary onto the
//! image boundary.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::config::Window;
use crate::error::{Error, Result};
use crate::hmap::FreeSum;

const BISECT_MAX_ITERS: usize = 80;

/// Traced boundary: polylines as vertex lists, plus a counter of ratio
/// evaluations that needed the one-sided limit on the real axis (atoms or
/// points of the a.c. support), where the ratio is not a plain integral.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub polylines: Vec<Vec<(f64, f64)>>,
    pub limit_path_evals: usize,
}

impl BoundaryTrace {
    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(Vec::len).sum()
    }
}

impl<'a> FreeSum<'a> {
    /// Trace the zero set of the limit ratio inside the window.
    ///
    /// `resolution` is the cell count per side; every polyline vertex v
    /// satisfies |ratio(v)| < `boundary_tol` (up to the bisection cap).
    pub fn trace_domain_boundary(
        &self,
        window: Window,
        resolution: usize,
        boundary_tol: f64,
    ) -> Result<BoundaryTrace> {
        if resolution < 2 {
            return Err(Error::InvalidConfig("boundary resolution must be at least 2".into()));
        }
        let n = resolution;
        let axis_hits = AtomicUsize::new(0);
        let xs: Vec<f64> =
            (0..=n).map(|i| window.x0 + window.width() * (i as f64) / (n as f64)).collect();
        let ys: Vec<f64> =
            (0..=n).map(|j| window.y0 + window.height() * (j as f64) / (n as f64)).collect();

        // Node values of the ratio field, row-major by j.
        let values: Vec<Vec<f64>> = ys
            .par_iter()
            .map(|&beta| xs.iter().map(|&alpha| self.ratio_counted(alpha, beta, &axis_hits)).collect())
            .collect::<Result<_>>()?;

        // Lazily refined edge crossings, keyed by (node index, direction).
        let mut crossings: HashMap<(usize, usize, u8), usize> = HashMap::new();
        let mut vertices: Vec<(f64, f64)> = Vec::new();
        let mut segments: Vec<(usize, usize)> = Vec::new();

        let mut crossing = |i: usize, j: usize, horizontal: bool| -> Result<usize> {
            let key = (i, j, horizontal as u8);
            if let Some(&id) = crossings.get(&key) {
                return Ok(id);
            }
            let (pa, ga, pb, gb) = if horizontal {
                ((xs[i], ys[j]), values[j][i], (xs[i + 1], ys[j]), values[j][i + 1])
            } else {
                ((xs[i], ys[j]), values[j][i], (xs[i], ys[j + 1]), values[j + 1][i])
            };
            let v = self.bisect_edge(pa, ga, pb, gb, boundary_tol, &axis_hits)?;
            let id = vertices.len();
            vertices.push(v);
            crossings.insert(key, id);
            Ok(id)
        };

        for j in 0..n {
            for i in 0..n {
                let inside = [
                    values[j][i] < 0.0,
                    values[j][i + 1] < 0.0,
                    values[j + 1][i + 1] < 0.0,
                    values[j + 1][i] < 0.0,
                ];
                let mask = (inside[0] as u8)
                    | (inside[1] as u8) << 1
                    | (inside[2] as u8) << 2
                    | (inside[3] as u8) << 3;
                if mask == 0 || mask == 15 {
                    continue;
                }
                // Edge ids within the cell: 0 bottom, 1 right, 2 top, 3 left.
                let edge = |e: u8, cr: &mut dyn FnMut(usize, usize, bool) -> Result<usize>| match e {
                    0 => cr(i, j, true),
                    1 => cr(i + 1, j, false),
                    2 => cr(i, j + 1, true),
                    _ => cr(i, j, false),
                };
                let pairs: &[(u8, u8)] = match mask {
                    1 | 14 => &[(3, 0)],
                    2 | 13 => &[(0, 1)],
                    3 | 12 => &[(3, 1)],
                    4 | 11 => &[(1, 2)],
                    6 | 9 => &[(0, 2)],
                    7 | 8 => &[(2, 3)],
                    5 | 10 => {
                        // Saddle: resolve the pairing by the cell center.
                        let center = self.ratio_counted(
                            0.5 * (xs[i] + xs[i + 1]),
                            0.5 * (ys[j] + ys[j + 1]),
                            &axis_hits,
                        )?;
                        let center_inside = center < 0.0;
                        if (mask == 5) == center_inside {
                            &[(3, 2), (0, 1)]
                        } else {
                            &[(3, 0), (1, 2)]
                        }
                    }
                    _ => unreachable!("masks 0 and 15 are skipped"),
                };
                for &(ea, eb) in pairs {
                    let a = edge(ea, &mut crossing)?;
                    let b = edge(eb, &mut crossing)?;
                    segments.push((a, b));
                }
            }
        }

        if segments.is_empty() {
            return Err(Error::EmptyBoundary);
        }
        let polylines = chain_segments(&vertices, &segments);
        Ok(BoundaryTrace { polylines, limit_path_evals: axis_hits.load(Ordering::Relaxed) })
    }

    /// Image of a traced boundary under h, polyline by polyline.
    pub fn map_boundary(&self, trace: &BoundaryTrace) -> Result<BoundaryTrace> {
        let polylines = trace
            .polylines
            .par_iter()
            .map(|poly| {
                poly.iter()
                    .map(|&(a, b)| {
                        let z = self.h_map(num_complex::Complex64::new(a, b))?;
                        Ok((z.re, z.im))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(BoundaryTrace { polylines, limit_path_evals: trace.limit_path_evals })
    }

    fn ratio_counted(&self, alpha: f64, beta: f64, hits: &AtomicUsize) -> Result<f64> {
        if beta == 0.0 {
            let on_atom = self.measure().atom_at(alpha).is_some();
            let in_support = self
                .measure()
                .ac_support()
                .map(|(lo, hi)| alpha >= lo && alpha <= hi)
                .unwrap_or(false);
            if on_atom || in_support {
                hits.fetch_add(1, Ordering::Relaxed);
            }
        }
        self.limit_ratio(alpha, beta)
    }

    /// Bisection along a grid edge with a sign change, to |ratio| < tol.
    fn bisect_edge(
        &self,
        pa: (f64, f64),
        ga: f64,
        pb: (f64, f64),
        gb: f64,
        tol: f64,
        hits: &AtomicUsize,
    ) -> Result<(f64, f64)> {
        debug_assert!((ga < 0.0) != (gb < 0.0));
        let (mut lo, mut hi) = if ga < 0.0 { (pa, pb) } else { (pb, pa) };
        let mut mid = (0.5 * (lo.0 + hi.0), 0.5 * (lo.1 + hi.1));
        for _ in 0..BISECT_MAX_ITERS {
            mid = (0.5 * (lo.0 + hi.0), 0.5 * (lo.1 + hi.1));
            let g = self.ratio_counted(mid.0, mid.1, hits)?;
            if g.abs() < tol {
                return Ok(mid);
            }
            if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

/// Join segments that share endpoint vertices into polylines. Each vertex
/// id is shared by at most two segments (marching squares guarantees it),
/// so the walk is unambiguous. Closed loops repeat the first vertex last.
fn chain_segments(vertices: &[(f64, f64)], segments: &[(usize, usize)]) -> Vec<Vec<(f64, f64)>> {
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(k);
        adjacency.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();

    // Open chains first (endpoints with a single segment), then loops.
    let mut starts: Vec<usize> = adjacency
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(&v, _)| v)
        .collect();
    starts.sort_unstable();

    let walk = |start_vertex: usize, used: &mut Vec<bool>| -> Vec<(f64, f64)> {
        let mut path = vec![vertices[start_vertex]];
        let mut current = start_vertex;
        loop {
            let Some(&seg) = adjacency[&current].iter().find(|&&k| !used[k]) else { break };
            used[seg] = true;
            let (a, b) = segments[seg];
            current = if a == current { b } else { a };
            path.push(vertices[current]);
        }
        path
    };

    for v in starts {
        if adjacency[&v].iter().all(|&k| used[k]) {
            continue;
        }
        polylines.push(walk(v, &mut used));
    }
    for k in 0..segments.len() {
        if !used[k] {
            polylines.push(walk(segments[k].0, &mut used));
        }
    }
    polylines
}
