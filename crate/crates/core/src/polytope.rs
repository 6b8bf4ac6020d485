//! Vertex enumeration of small bounded polytopes `{x : A x <= b}` by the
//! double-description method. Intended for dimensions up to about a dozen.

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;

#[derive(Clone)]
struct Ray {
    z: Vec<f64>,
    zeros: Vec<u64>,
}

fn set(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn normalize(z: &mut [f64]) {
    let m = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        for v in z.iter_mut() {
            *v /= m;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Vertices of the bounded polytope `{x : A x <= b}`. Errors if the system is
/// unbounded, lower-dimensional in a way that leaves no pointed cone, or empty.
pub fn vertices(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = a.first().map_or(0, Vec::len);
    if a.len() != b.len() || a.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("polytope rows".into()));
    }
    // Homogenized cone {(t, x) : b t - A x >= 0, t >= 0}.
    let mut h: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = Vec::with_capacity(d + 1);
            r.push(bi);
            r.extend(row.iter().map(|v| -v));
            r
        })
        .collect();
    let mut t_row = vec![0.0; d + 1];
    t_row[0] = 1.0;
    h.push(t_row);
    let m = h.len();
    let words = m.div_ceil(64);

    let basis = independent_rows(&h, d + 1)
        .ok_or_else(|| Error::InvalidParameter("polytope is unbounded or has no vertex".into()))?;
    let inv = invert(&basis.iter().map(|&i| h[i].clone()).collect::<Vec<_>>())
        .ok_or_else(|| Error::Invariant("singular initial basis".into()))?;
    let mut rays: Vec<Ray> = (0..=d)
        .map(|k| {
            let mut z: Vec<f64> = (0..=d).map(|r| inv[r][k]).collect();
            normalize(&mut z);
            let mut zeros = vec![0u64; words];
            for (j, &row) in basis.iter().enumerate() {
                if j != k {
                    set(&mut zeros, row);
                }
            }
            Ray { z, zeros }
        })
        .collect();

    let in_basis = {
        let mut v = vec![false; m];
        for &i in &basis {
            v[i] = true;
        }
        v
    };
    for (i, row) in h.iter().enumerate() {
        if in_basis[i] {
            continue;
        }
        let scale = row.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
        let vals: Vec<f64> = rays.iter().map(|r| dot(row, &r.z)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] > EPS * scale).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] < -EPS * scale).collect();
        let mut next: Vec<Ray> = Vec::new();
        for (k, ray) in rays.iter().enumerate() {
            if vals[k] >= -EPS * scale {
                let mut r = ray.clone();
                if vals[k] <= EPS * scale {
                    set(&mut r.zeros, i);
                }
                next.push(r);
            }
        }
        for &p in &pos {
            for &q in &neg {
                let common: Vec<u64> = rays[p].zeros.iter().zip(&rays[q].zeros).map(|(a, b)| a & b).collect();
                let count: u32 = common.iter().map(|w| w.count_ones()).sum();
                if (count as usize) + 1 < d {
                    continue;
                }
                let adjacent = (0..rays.len()).all(|k| k == p || k == q || !subset(&common, &rays[k].zeros));
                if !adjacent {
                    continue;
                }
                let (vp, vq) = (vals[p], vals[q]);
                let mut z: Vec<f64> = rays[q].z.iter().zip(&rays[p].z).map(|(zq, zp)| vp * zq - vq * zp).collect();
                normalize(&mut z);
                let mut zeros = common;
                set(&mut zeros, i);
                next.push(Ray { z, zeros });
            }
        }
        rays = next;
    }

    let mut out = Vec::with_capacity(rays.len());
    for r in rays {
        if r.z[0] <= EPS {
            return Err(Error::InvalidParameter("polytope is unbounded".into()));
        }
        let x: Vec<f64> = r.z[1..].iter().map(|v| v / r.z[0]).collect();
        out.push(x);
    }
    // Degenerate inputs can produce duplicate rays.
    out.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-9));
    Ok(out)
}

/// Greedy choice of `k` linearly independent rows (Gram–Schmidt with pivoting).
fn independent_rows(h: &[Vec<f64>], k: usize) -> Option<Vec<usize>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut chosen = Vec::new();
    // The t >= 0 row first keeps the initial cone inside t >= 0.
    let order = std::iter::once(h.len() - 1).chain(0..h.len() - 1);
    for i in order {
        let mut v = h[i].clone();
        for u in &basis {
            let c = dot(&v, u);
            for (a, b) in v.iter_mut().zip(u) {
                *a -= c * b;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-9 * dot(&h[i], &h[i]).sqrt().max(1e-300) {
            for a in v.iter_mut() {
                *a /= norm;
            }
            basis.push(v);
            chosen.push(i);
            if chosen.len() == k {
                return Some(chosen);
            }
        }
    }
    None
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; d];
                r[i] = s;
                a.push(r);
                b.push(1.0);
            }
        }
        (a, b)
    }

    #[test]
    fn cube_has_two_to_the_d_vertices() {
        for d in 1..=6 {
            let (a, b) = cube(d);
            let v = vertices(&a, &b).unwrap();
            assert_eq!(v.len(), 1 << d);
            assert!(v.iter().all(|x| x.iter().all(|c| (c.abs() - 1.0).abs() < 1e-12)));
        }
    }

    #[test]
    fn cross_polytope_and_degenerate_pyramid() {
        // |x| + |y| + |z| <= 1: 8 facets, 6 vertices.
        let mut a = Vec::new();
        for s in 0..8 {
            a.push((0..3).map(|i| if s >> i & 1 == 1 { 1.0 } else { -1.0 }).collect());
        }
        let v = vertices(&a, &vec![1.0; 8]).unwrap();
        assert_eq!(v.len(), 6);
        // Square pyramid: apex lies on four facets (degenerate in 3D).
        let a = vec![
            vec![0.0, 0.0, -1.0],
            vec![1.0, 0.0, 1.0],
            vec![-1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, -1.0, 1.0],
        ];
        let v = vertices(&a, &[0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn redundant_constraints_are_harmless() {
        let (mut a, mut b) = cube(3);
        a.push(vec![1.0, 1.0, 1.0]);
        b.push(10.0);
        a.push(vec![1.0, 1.0, 0.0]);
        b.push(1.0);
        // Cutting the (1,1,·) edge removes two vertices and adds four.
        let v = vertices(&a, &b).unwrap();
        assert_eq!(v.len(), 10);
        assert!(v.iter().all(|x| x[0] + x[1] <= 1.0 + 1e-12));
    }

    #[test]
    fn unbounded_is_rejected() {
        assert!(vertices(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).is_err());
    }
}
