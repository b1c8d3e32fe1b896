//! Convex "reach probability vs. remaining cost" polygons.
//!
//! A polygon is the set of pairs `(p, E)` lying on or above its lower
//! boundary, extended flat to the left of the first vertex and closed
//! upwards. Only the boundary vertices are stored: strictly increasing in
//! both coordinates, with strictly increasing slopes.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPolygon<T> {
    vertices: Vec<(T, T)>,
}

impl<T: Scalar> ParetoPolygon<T> {
    pub fn point(p: T, e: T) -> Self {
        ParetoPolygon {
            vertices: vec![(p, e)],
        }
    }

    /// Accepts a vertex list that already satisfies the invariants.
    pub fn from_vertices(vertices: Vec<(T, T)>) -> Result<Self> {
        let poly = ParetoPolygon { vertices };
        if poly.vertices.is_empty() || !poly.is_well_formed() {
            return Err(Error::Argument(
                "polygon vertices must be strictly increasing and convex".into(),
            ));
        }
        Ok(poly)
    }

    /// Lower-left convex hull of arbitrary points.
    pub fn hull_of(points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("hull of an empty point set".into()));
        }
        let tagged = points.into_iter().map(|v| (v, ())).collect();
        Ok(ParetoPolygon {
            vertices: lower_hull(tagged).into_iter().map(|(v, _)| v).collect(),
        })
    }

    pub fn vertices(&self) -> &[(T, T)] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Largest achievable reach probability.
    pub fn max_p(&self) -> &T {
        &self.vertices.last().expect("polygon is nonempty").0
    }

    /// Strictly increasing coordinates and slopes.
    pub fn is_well_formed(&self) -> bool {
        let v = &self.vertices;
        let increasing = v.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
        let convex = v.windows(3).all(|w| {
            let (a, b, c) = (&w[0], &w[1], &w[2]);
            cross(a, b, c) > T::zero()
        });
        increasing && convex
    }

    /// Multiplies every vertex by `w` in both coordinates.
    pub fn scale(&self, w: &T) -> Result<Self> {
        if !w.is_positive() {
            return Err(Error::Argument(format!("scale factor {w} is not positive")));
        }
        Ok(self.scaled(w))
    }

    pub(crate) fn scaled(&self, w: &T) -> Self {
        if w.is_one() {
            return self.clone();
        }
        ParetoPolygon {
            vertices: self
                .vertices
                .iter()
                .map(|(p, e)| (p.clone() * w.clone(), e.clone() * w.clone()))
                .collect(),
        }
    }

    /// Smallest `E` with `(p, E)` in the polygon, or `None` if `p` exceeds
    /// every achievable probability.
    pub fn query_min_e(&self, p: &T) -> Option<T> {
        let v = &self.vertices;
        let tol = T::default_tolerance();
        if *p <= v[0].0 {
            return Some(v[0].1.clone());
        }
        let last = v.last().unwrap();
        if *p >= last.0 {
            return (*p <= last.0.clone() + tol).then(|| last.1.clone());
        }
        let k = v.partition_point(|(q, _)| q <= p);
        let (a, b) = (&v[k - 1], &v[k]);
        let frac = (p.clone() - a.0.clone()) / (b.0.clone() - a.0.clone());
        Some(a.1.clone() + frac * (b.1.clone() - a.1.clone()))
    }

    /// Whether `(p, e)` lies in the polygon (up to the scalar tolerance).
    pub fn contains(&self, p: &T, e: &T) -> bool {
        match self.query_min_e(p) {
            Some(min) => min <= e.clone() + T::default_tolerance(),
            None => false,
        }
    }

    /// Whether every vertex of `other` lies in `self`.
    pub fn covers(&self, other: &Self) -> bool {
        other.vertices.iter().all(|(p, e)| self.contains(p, e))
    }
}

/// Minkowski sum of two polygons.
pub fn minkowski_sum<T: Scalar>(a: &ParetoPolygon<T>, b: &ParetoPolygon<T>) -> ParetoPolygon<T> {
    minkowski_sum_all(&[a, b])
}

/// Minkowski sum of any number of polygons by merging their edges by slope.
pub fn minkowski_sum_all<T: Scalar>(polys: &[&ParetoPolygon<T>]) -> ParetoPolygon<T> {
    minkowski_tracked(polys).0
}

/// Hull of the union of polygons.
pub fn hull_union<T: Scalar>(polys: &[ParetoPolygon<T>]) -> Result<ParetoPolygon<T>> {
    ParetoPolygon::hull_of(polys.iter().flat_map(|p| p.vertices.iter().cloned()).collect())
}

/// Drops vertices whose removal raises the boundary by at most `tol` at
/// every abscissa. The first and last vertex are always kept; `tol = 0`
/// only removes exactly collinear vertices.
pub fn merge_vertices<T: Scalar>(poly: &ParetoPolygon<T>, tol: &T) -> ParetoPolygon<T> {
    ParetoPolygon {
        vertices: merge_indices(poly, tol)
            .into_iter()
            .map(|i| poly.vertices[i].clone())
            .collect(),
    }
}

/// Indices of the vertices kept by [`merge_vertices`].
pub(crate) fn merge_indices<T: Scalar>(poly: &ParetoPolygon<T>, tol: &T) -> Vec<usize> {
    let v = &poly.vertices;
    if v.len() <= 2 {
        return (0..v.len()).collect();
    }
    let mut kept = vec![0];
    let mut anchor = 0;
    while anchor < v.len() - 1 {
        let mut reach = anchor + 1;
        while reach + 1 < v.len()
            && (anchor + 1..=reach).all(|i| deviation(&v[anchor], &v[reach + 1], &v[i]) <= *tol)
        {
            reach += 1;
        }
        kept.push(reach);
        anchor = reach;
    }
    kept
}

/// How far the chord `a -> c` lies above `b` at `b`'s abscissa.
fn deviation<T: Scalar>(a: &(T, T), c: &(T, T), b: &(T, T)) -> T {
    let frac = (b.0.clone() - a.0.clone()) / (c.0.clone() - a.0.clone());
    a.1.clone() + frac * (c.1.clone() - a.1.clone()) - b.1.clone()
}

/// `(b - a) x (c - a)`; positive iff `b` lies strictly below the chord `a -> c`
/// (for increasing abscissae).
fn cross<T: Scalar>(a: &(T, T), b: &(T, T), c: &(T, T)) -> T {
    (b.0.clone() - a.0.clone()) * (c.1.clone() - a.1.clone())
        - (b.1.clone() - a.1.clone()) * (c.0.clone() - a.0.clone())
}

/// Threshold below which a float cross product counts as collinear.
fn collinear_tolerance<T: Scalar>() -> T {
    if T::EXACT {
        T::zero()
    } else {
        T::default_tolerance() * T::default_tolerance()
    }
}

/// Lower-left hull of tagged points: the start is the lowest point (the
/// rightmost among ties), then the lower convex chain up to the rightmost
/// point. Tags travel with their points.
pub(crate) fn lower_hull<T: Scalar, P>(mut points: Vec<((T, T), P)>) -> Vec<((T, T), P)> {
    let start = points
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| {
            x.0 .1
                .partial_cmp(&y.0 .1)
                .unwrap_or(Ordering::Equal)
                .then(y.0 .0.partial_cmp(&x.0 .0).unwrap_or(Ordering::Equal))
        })
        .map(|(i, _)| i)
        .expect("nonempty point set");
    let start_p = points[start].0 .0.clone();
    let start_point = points.swap_remove(start);
    points.retain(|((p, _), _)| *p > start_p);
    points.sort_by(|x, y| {
        x.0 .0
            .partial_cmp(&y.0 .0)
            .unwrap_or(Ordering::Equal)
            .then(x.0 .1.partial_cmp(&y.0 .1).unwrap_or(Ordering::Equal))
    });
    let tol = collinear_tolerance::<T>();
    let mut chain: Vec<((T, T), P)> = vec![start_point];
    for point in points {
        if chain.last().is_some_and(|last| last.0 .0 == point.0 .0) {
            continue; // same abscissa, larger E
        }
        while chain.len() >= 2 {
            let k = chain.len();
            if cross(&chain[k - 2].0, &chain[k - 1].0, &point.0) > tol {
                break;
            }
            chain.pop();
        }
        chain.push(point);
    }
    chain
}

/// Minkowski sum with, for each output vertex, the index of the vertex
/// taken from every summand.
pub(crate) fn minkowski_tracked<T: Scalar>(
    polys: &[&ParetoPolygon<T>],
) -> (ParetoPolygon<T>, Vec<Vec<u32>>) {
    let mut p = T::zero();
    let mut e = T::zero();
    for poly in polys {
        p = p + poly.vertices[0].0.clone();
        e = e + poly.vertices[0].1.clone();
    }
    // Edges as (dp, dE, summand).
    let mut edges: Vec<(T, T, usize)> = Vec::new();
    for (j, poly) in polys.iter().enumerate() {
        for w in poly.vertices.windows(2) {
            edges.push((w[1].0.clone() - w[0].0.clone(), w[1].1.clone() - w[0].1.clone(), j));
        }
    }
    edges.sort_by(|x, y| {
        let lhs = x.1.clone() * y.0.clone();
        let rhs = y.1.clone() * x.0.clone();
        lhs.partial_cmp(&rhs).unwrap_or(Ordering::Equal).then(x.2.cmp(&y.2))
    });
    let mut picks = vec![0u32; polys.len()];
    let mut out: Vec<((T, T), Vec<u32>)> = vec![((p.clone(), e.clone()), picks.clone())];
    for (dp, de, j) in edges {
        p = p + dp;
        e = e + de;
        picks[j] += 1;
        out.push(((p.clone(), e.clone()), picks.clone()));
    }
    let out = drop_collinear(out);
    let (vertices, picks) = out.into_iter().unzip();
    (ParetoPolygon { vertices }, picks)
}

/// Removes interior vertices that are not strictly below their neighbours'
/// chord. Input must already be sorted and convex up to collinearity.
fn drop_collinear<T: Scalar, P>(points: Vec<((T, T), P)>) -> Vec<((T, T), P)> {
    let tol = collinear_tolerance::<T>();
    let mut chain: Vec<((T, T), P)> = Vec::with_capacity(points.len());
    for point in points {
        if chain.last().is_some_and(|last| last.0 .0 >= point.0 .0) {
            continue;
        }
        while chain.len() >= 2 {
            let k = chain.len();
            if cross(&chain[k - 2].0, &chain[k - 1].0, &point.0) > tol {
                break;
            }
            chain.pop();
        }
        chain.push(point);
    }
    chain
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn poly(v: &[(i64, i64, i64)]) -> ParetoPolygon<BigRational> {
        // (p numerator, p denominator, E)
        ParetoPolygon::from_vertices(v.iter().map(|(a, b, e)| (q(*a, *b), q(*e, 1))).collect()).unwrap()
    }

    #[test]
    fn scaling() {
        let a = poly(&[(0, 1, 2), (1, 1, 5)]);
        assert_eq!(a.scale(&q(1, 1)).unwrap(), a);
        assert_eq!(
            a.scale(&q(1, 2)).unwrap().vertices(),
            &[(q(0, 1), q(1, 1)), (q(1, 2), q(5, 2))]
        );
        assert!(a.scale(&q(0, 1)).is_err());
        assert_eq!(
            ParetoPolygon::point(q(1, 1), q(0, 1)).scale(&q(1, 2)).unwrap(),
            ParetoPolygon::point(q(1, 2), q(0, 1))
        );
    }

    #[test]
    fn sums() {
        let a = poly(&[(0, 1, 0), (1, 1, 2)]);
        let b = poly(&[(0, 1, 0), (1, 1, 3)]);
        assert_eq!(minkowski_sum(&a, &ParetoPolygon::point(q(0, 1), q(0, 1))), a);
        assert_eq!(
            minkowski_sum(&a, &b).vertices(),
            &[(q(0, 1), q(0, 1)), (q(1, 1), q(2, 1)), (q(2, 1), q(5, 1))]
        );
        let half_goal = ParetoPolygon::point(q(1, 2), q(0, 1));
        let half_stay = ParetoPolygon::point(q(0, 1), q(1, 1));
        assert_eq!(minkowski_sum(&half_goal, &half_stay), ParetoPolygon::point(q(1, 2), q(1, 1)));
    }

    #[test]
    fn unions() {
        let a = poly(&[(0, 1, 1), (1, 1, 4)]);
        assert_eq!(hull_union(std::slice::from_ref(&a)).unwrap(), a);
        let low = ParetoPolygon::point(q(1, 2), q(1, 1));
        let high = ParetoPolygon::point(q(1, 2), q(2, 1));
        assert_eq!(hull_union(&[low.clone(), high]).unwrap(), low);
        let mid = ParetoPolygon::point(q(1, 2), q(3, 2));
        assert_eq!(hull_union(&[a, mid]).unwrap().len(), 3);
        assert!(hull_union::<BigRational>(&[]).is_err());
    }

    #[test]
    fn queries() {
        let single = ParetoPolygon::point(q(1, 2), q(1, 1));
        assert_eq!(single.query_min_e(&q(1, 2)), Some(q(1, 1)));
        assert_eq!(single.query_min_e(&q(1, 4)), Some(q(1, 1)));
        assert_eq!(single.query_min_e(&q(3, 4)), None);
        let seg = poly(&[(0, 1, 1), (1, 1, 3)]);
        assert_eq!(seg.query_min_e(&q(1, 2)), Some(q(2, 1)));
    }

    #[test]
    fn merging() {
        let p = poly(&[(0, 1, 1), (1, 2, 2), (1, 1, 4)]);
        assert_eq!(merge_vertices(&p, &q(0, 1)), p);
        let collinear = ParetoPolygon {
            vertices: vec![(q(0, 1), q(1, 1)), (q(1, 2), q(2, 1)), (q(1, 1), q(3, 1))],
        };
        assert_eq!(merge_vertices(&collinear, &q(0, 1)).len(), 2);
        let near = ParetoPolygon::from_vertices(vec![(0.0, 1.0), (0.5, 2.0 - 1e-10), (1.0, 3.0)]).unwrap();
        assert_eq!(merge_vertices(&near, &1e-9).len(), 2);
        assert_eq!(merge_vertices(&near, &1e-11).len(), 3);
    }
}
