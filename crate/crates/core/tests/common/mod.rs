//! Reference implementations used only by the tests. None of them share
//! code with the library paths they check.
#![allow(dead_code, clippy::needless_range_loop)]

use folt::synthetic::SquareSequence;
use folt::GrayGrid;

/// Exact minimum barrier distance by exhaustive enumeration of simple
/// 4-adjacent paths from each pixel to any seed. Paths stop at the first
/// seed they reach: extending past it can only widen the barrier.
pub fn exact_mbd(img: &GrayGrid, seeds: &[(usize, usize)]) -> Vec<f32> {
    let (w, h) = img.dims();
    let mut is_seed = vec![false; w * h];
    for &(r, c) in seeds {
        is_seed[r * w + c] = true;
    }
    let mut out = vec![f32::INFINITY; w * h];
    for z in 0..w * h {
        let mut visited = vec![false; w * h];
        let v = img.data()[z];
        let mut best = f32::INFINITY;
        dfs(img, &is_seed, z, v, v, &mut visited, &mut best);
        out[z] = best;
    }
    out
}

fn dfs(img: &GrayGrid, is_seed: &[bool], at: usize, hi: u8, lo: u8, visited: &mut [bool], best: &mut f32) {
    let cost = (hi - lo) as f32;
    if cost >= *best {
        return;
    }
    if is_seed[at] {
        *best = cost;
        return;
    }
    visited[at] = true;
    let (w, h) = img.dims();
    let (x, y) = (at % w, at / w);
    let mut next = Vec::with_capacity(4);
    if x > 0 {
        next.push(at - 1);
    }
    if x + 1 < w {
        next.push(at + 1);
    }
    if y > 0 {
        next.push(at - w);
    }
    if y + 1 < h {
        next.push(at + w);
    }
    for n in next {
        if !visited[n] {
            let v = img.data()[n];
            dfs(img, is_seed, n, hi.max(v), lo.min(v), visited, best);
        }
    }
    visited[at] = false;
}

/// Exact MBD on a single row: the only simple path to a seed is the
/// straight segment.
pub fn exact_mbd_line(values: &[u8], seeds: &[usize]) -> Vec<f32> {
    (0..values.len())
        .map(|z| {
            seeds
                .iter()
                .map(|&s| {
                    let seg = &values[s.min(z)..=s.max(z)];
                    (seg.iter().max().unwrap() - seg.iter().min().unwrap()) as f32
                })
                .fold(f32::INFINITY, f32::min)
        })
        .collect()
}

/// Naive local-mean threshold: re-sums every clipped block from scratch.
pub fn naive_threshold(
    g: &GrayGrid,
    x0: usize,
    y0: usize,
    rw: usize,
    rh: usize,
    block: usize,
    lambda: f64,
) -> Vec<bool> {
    let (w, h) = g.dims();
    let r = block / 2;
    let mut out = vec![false; w * h];
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            let mut sum = 0u64;
            let mut count = 0u64;
            for yy in y.saturating_sub(r)..=y + r {
                for xx in x.saturating_sub(r)..=x + r {
                    if yy >= y0 && yy < y0 + rh && xx >= x0 && xx < x0 + rw {
                        sum += g.get(xx, yy) as u64;
                        count += 1;
                    }
                }
            }
            let mean = sum as f64 / count as f64;
            out[y * w + x] = g.get(x, y) as f64 >= mean - lambda;
        }
    }
    out
}

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for i in 0..n {
        m[i][i] = 1.0;
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut out = zeros(a.len(), b[0].len());
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            for k in 0..b.len() {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for i in 0..a.len() {
        for j in 0..a[0].len() {
            out[j][i] = a[i][j];
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .zip(eye(n))
        .map(|(r, e)| r.iter().cloned().chain(e).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                let pivot_row = m[col].clone();
                for (v, pv) in m[row].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Measurement matrix picking x, y, w, h out of (x, y, u, v, w, h).
pub fn selector() -> Mat {
    let mut c = zeros(4, 6);
    c[0][0] = 1.0;
    c[1][1] = 1.0;
    c[2][4] = 1.0;
    c[3][5] = 1.0;
    c
}

/// Textbook gain `P C^T (C P C^T + R)^-1` with an explicit inverse.
pub fn reference_gain(p: &Mat, r: f64) -> Mat {
    let c = selector();
    let pct = matmul(p, &transpose(&c));
    let mut s = matmul(&c, &pct);
    for i in 0..4 {
        s[i][i] += r;
    }
    matmul(&pct, &inverse(&s))
}

/// Textbook correction with sizes clamped to one pixel; returns (state,
/// covariance).
pub fn reference_correct(s: &[f64; 6], p: &Mat, y: &[f64; 4], r: f64) -> ([f64; 6], Mat) {
    let c = selector();
    let k = reference_gain(p, r);
    let pred = [s[0], s[1], s[4], s[5]];
    let mut out = *s;
    for i in 0..6 {
        for j in 0..4 {
            out[i] += k[i][j] * (y[j] - pred[j]);
        }
    }
    out[4] = out[4].max(1.0);
    out[5] = out[5].max(1.0);
    let g = matmul(&sub(&eye(6), &matmul(&k, &c)), p);
    let g = add(&g, &transpose(&g))
        .into_iter()
        .map(|r| r.into_iter().map(|v| v / 2.0).collect())
        .collect();
    (out, g)
}

/// The moving-square sequence the tracking checks use.
pub fn moving_square() -> SquareSequence {
    SquareSequence::default()
}
