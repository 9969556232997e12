//! Incremental 3-D Delaunay tetrahedralization (Bowyer–Watson).
//!
//! The convex hull is closed off with "ghost" tetrahedra that share a
//! vertex at infinity, so points outside the current hull are inserted the
//! same way as interior points and the finite tetrahedra always tile the
//! hull exactly. Orientation and in-sphere tests use adaptive exact
//! arithmetic. Input points receive a tiny deterministic jitter so that
//! coplanar or cospherical subsets of quantized colors do not need
//! special treatment; barycentric coordinates are still reported against
//! the original coordinates.

use std::collections::HashMap;

use robust::Coord3D;

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Jitter amplitude relative to the bounding-box diagonal.
pub const JITTER_SCALE: f64 = 1e-7;
/// A cloud thinner than this (relative to its diagonal) in some direction
/// is treated as flat.
const FLAT_TOLERANCE: f64 = 1e-6;
/// Coefficient floor for points located outside the hull.
pub const EXTRAPOLATION_FLOOR: f64 = -0.05;

const INF: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

/// Where a query point fell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    /// Index into [`Triangulation::simplices`] order (finite tetrahedra).
    pub simplex: usize,
    /// Barycentric coefficients for the simplex vertices, summing to 1.
    pub coefficients: [f64; 4],
    /// True when the point lay outside the hull and was extrapolated from
    /// the nearest hull simplex.
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    original: Vec<Point3>,
    jittered: Vec<Point3>,
    jitter: f64,
    tets: Vec<[u32; 4]>,
    nbrs: Vec<[u32; 4]>,
    alive: Vec<bool>,
    free: Vec<u32>,
    mark: Vec<u32>,
    epoch: u32,
    hint: u32,
    rng: u64,
    /// Finite tetrahedra in a stable order, rebuilt after each batch of
    /// insertions, and the reverse map from slot to simplex id.
    finite: Vec<u32>,
    slot_to_simplex: Vec<u32>,
}

fn coord(p: &Point3) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

fn orient(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    robust::orient3d(coord(a), coord(b), coord(c), coord(d))
}

fn insphere(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> f64 {
    robust::insphere(coord(a), coord(b), coord(c), coord(d), coord(e))
}

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm2(a: &Point3) -> f64 {
    dot(a, a)
}

fn xorshift(state: &mut u64) -> u64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    *state
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic offset in `[-1, 1)³` for point `index`.
fn jitter_offset(index: usize) -> Point3 {
    let mut out = [0.0; 3];
    for (axis, v) in out.iter_mut().enumerate() {
        let h = splitmix((index as u64) * 3 + axis as u64);
        *v = (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
    }
    out
}

fn bbox_diagonal(points: &[Point3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    norm2(&sub(&hi, &lo)).sqrt()
}

/// Four affinely independent points, or `None` for a flat cloud.
fn initial_simplex(points: &[Point3], tol: f64) -> Option<[usize; 4]> {
    let p0 = 0;
    let p1 = (0..points.len()).max_by(|&a, &b| {
        norm2(&sub(&points[a], &points[p0])).total_cmp(&norm2(&sub(&points[b], &points[p0])))
    })?;
    let axis = sub(&points[p1], &points[p0]);
    let axis_len = norm2(&axis).sqrt();
    if axis_len <= tol {
        return None;
    }
    let line_dist = |i: usize| norm2(&cross(&axis, &sub(&points[i], &points[p0]))).sqrt() / axis_len;
    let p2 = (0..points.len()).max_by(|&a, &b| line_dist(a).total_cmp(&line_dist(b)))?;
    if line_dist(p2) <= tol {
        return None;
    }
    let normal = cross(&axis, &sub(&points[p2], &points[p0]));
    let nlen = norm2(&normal).sqrt();
    let plane_dist = |i: usize| dot(&normal, &sub(&points[i], &points[p0])).abs() / nlen;
    let p3 = (0..points.len()).max_by(|&a, &b| plane_dist(a).total_cmp(&plane_dist(b)))?;
    if plane_dist(p3) <= tol {
        return None;
    }
    Some([p0, p1, p2, p3])
}

/// Morton code of a point quantized to a 10-bit grid per axis.
fn morton(p: &Point3, lo: &Point3, scale: &Point3) -> u32 {
    let mut code = 0u32;
    let q: [u32; 3] = std::array::from_fn(|d| (((p[d] - lo[d]) * scale[d]) as u32).min(1023));
    for bit in (0..10).rev() {
        for qd in q {
            code = (code << 1) | ((qd >> bit) & 1);
        }
    }
    code
}

/// Indices of `points` in Morton order, for coherent walks.
pub fn spatial_order(points: &[Point3]) -> Vec<usize> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let scale: Point3 = std::array::from_fn(|d| {
        let ext = hi[d] - lo[d];
        if ext > 0.0 {
            1023.0 / ext
        } else {
            0.0
        }
    });
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (morton(&points[i], &lo, &scale), i));
    order
}

impl Triangulation {
    /// Delaunay tetrahedralization of `points` (after jitter).
    pub fn new(points: &[Point3]) -> Result<Self> {
        if points.len() < 4 || points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateColorCloud);
        }
        let diag = bbox_diagonal(points);
        if diag <= 0.0 {
            return Err(Error::DegenerateColorCloud);
        }
        let seed = initial_simplex(points, FLAT_TOLERANCE * diag).ok_or(Error::DegenerateColorCloud)?;
        let jitter = JITTER_SCALE * diag;
        let mut tri = Triangulation {
            original: Vec::with_capacity(points.len()),
            jittered: Vec::with_capacity(points.len()),
            jitter,
            tets: Vec::new(),
            nbrs: Vec::new(),
            alive: Vec::new(),
            free: Vec::new(),
            mark: Vec::new(),
            epoch: 0,
            hint: 0,
            rng: 0x2545_F491_4F6C_DD1D,
            finite: Vec::new(),
            slot_to_simplex: Vec::new(),
        };
        for p in points {
            tri.push_vertex(*p);
        }
        tri.seed(seed);
        let used: std::collections::HashSet<usize> = seed.into_iter().collect();
        for i in spatial_order(&tri.jittered) {
            if !used.contains(&i) {
                tri.insert_vertex(i as u32);
            }
        }
        tri.rebuild_index();
        Ok(tri)
    }

    fn push_vertex(&mut self, p: Point3) -> u32 {
        let index = self.original.len();
        let off = jitter_offset(index);
        self.original.push(p);
        self.jittered
            .push([p[0] + off[0] * self.jitter, p[1] + off[1] * self.jitter, p[2] + off[2] * self.jitter]);
        index as u32
    }

    /// Adds a vertex to an existing triangulation and returns its index.
    pub fn insert(&mut self, p: Point3) -> usize {
        let v = self.push_vertex(p);
        self.insert_vertex(v);
        self.rebuild_index();
        v as usize
    }

    /// Adds several vertices; returns their indices.
    pub fn insert_many(&mut self, points: &[Point3]) -> Vec<usize> {
        let ids: Vec<u32> = points.iter().map(|&p| self.push_vertex(p)).collect();
        let js: Vec<Point3> = ids.iter().map(|&v| self.jittered[v as usize]).collect();
        for k in spatial_order(&js) {
            self.insert_vertex(ids[k]);
        }
        self.rebuild_index();
        ids.into_iter().map(|v| v as usize).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.original.len()
    }

    /// Original (unjittered) vertex coordinates.
    pub fn vertices(&self) -> &[Point3] {
        &self.original
    }

    /// Coordinates the predicates actually saw.
    pub fn jittered_vertices(&self) -> &[Point3] {
        &self.jittered
    }

    /// Finite tetrahedra as vertex-index quadruples.
    pub fn simplices(&self) -> Vec<[usize; 4]> {
        self.finite
            .iter()
            .map(|&t| self.tets[t as usize].map(|v| v as usize))
            .collect()
    }

    pub fn simplex(&self, id: usize) -> [usize; 4] {
        self.tets[self.finite[id] as usize].map(|v| v as usize)
    }

    pub fn simplex_count(&self) -> usize {
        self.finite.len()
    }

    fn rebuild_index(&mut self) {
        self.finite.clear();
        self.slot_to_simplex = vec![NONE; self.tets.len()];
        for (t, tet) in self.tets.iter().enumerate() {
            if self.alive[t] && !tet.contains(&INF) {
                self.slot_to_simplex[t] = self.finite.len() as u32;
                self.finite.push(t as u32);
            }
        }
    }

    fn alloc(&mut self, verts: [u32; 4]) -> u32 {
        if let Some(t) = self.free.pop() {
            self.tets[t as usize] = verts;
            self.nbrs[t as usize] = [NONE; 4];
            self.alive[t as usize] = true;
            t
        } else {
            self.tets.push(verts);
            self.nbrs.push([NONE; 4]);
            self.alive.push(true);
            self.mark.push(0);
            (self.tets.len() - 1) as u32
        }
    }

    fn is_ghost(&self, t: u32) -> bool {
        self.tets[t as usize].contains(&INF)
    }

    fn seed(&mut self, s: [usize; 4]) {
        let [a, b, mut c, mut d] = s.map(|v| v as u32);
        let p = &self.jittered;
        if orient(&p[a as usize], &p[b as usize], &p[c as usize], &p[d as usize]) < 0.0 {
            std::mem::swap(&mut c, &mut d);
        }
        let base = [a, b, c, d];
        let mut created = vec![self.alloc(base)];
        for i in 0..4 {
            let mut g = base;
            g[i] = INF;
            // Swap two finite vertices: the ghost faces outward.
            let (x, y) = match i {
                0 => (1, 2),
                _ => (0, if i == 1 { 2 } else { 1 }),
            };
            g.swap(x, y);
            created.push(self.alloc(g));
        }
        self.link(&created);
        self.hint = created[0];
    }

    /// Pairs up unset neighbor slots among `created` by shared face.
    fn link(&mut self, created: &[u32]) {
        let mut open: HashMap<[u32; 3], (u32, usize)> = HashMap::with_capacity(created.len() * 2);
        for &t in created {
            for i in 0..4 {
                if self.nbrs[t as usize][i] != NONE {
                    continue;
                }
                let mut key = [0u32; 3];
                let mut k = 0;
                for (j, &v) in self.tets[t as usize].iter().enumerate() {
                    if j != i {
                        key[k] = v;
                        k += 1;
                    }
                }
                key.sort_unstable();
                if let Some((u, ui)) = open.remove(&key) {
                    self.nbrs[t as usize][i] = u;
                    self.nbrs[u as usize][ui] = t;
                } else {
                    open.insert(key, (t, i));
                }
            }
        }
        debug_assert!(open.is_empty(), "unmatched faces after linking");
    }

    fn point(&self, v: u32) -> &Point3 {
        &self.jittered[v as usize]
    }

    /// Orientation of tet `t` with vertex slot `i` replaced by `q`.
    fn orient_replaced(&self, t: u32, i: usize, q: &Point3) -> f64 {
        let tet = self.tets[t as usize];
        let pts: [&Point3; 4] = std::array::from_fn(|j| if j == i { q } else { self.point(tet[j]) });
        orient(pts[0], pts[1], pts[2], pts[3])
    }

    fn finite_conflict(&self, t: u32, q: &Point3) -> bool {
        let [a, b, c, d] = self.tets[t as usize];
        insphere(self.point(a), self.point(b), self.point(c), self.point(d), q) > 0.0
    }

    fn conflict(&self, t: u32, q: &Point3) -> bool {
        let tet = self.tets[t as usize];
        match tet.iter().position(|&v| v == INF) {
            None => self.finite_conflict(t, q),
            Some(g) => {
                let o = self.orient_replaced(t, g, q);
                if o != 0.0 {
                    o > 0.0
                } else {
                    self.finite_conflict(self.nbrs[t as usize][g], q)
                }
            }
        }
    }

    /// Visibility walk from the hint. Returns a finite tet containing `q`
    /// or the ghost tet whose hull facet `q` was seen through.
    fn walk(&self, q: &Point3, hint: u32, rng: &mut u64) -> u32 {
        let mut t = hint;
        if !self.alive[t as usize] || self.is_ghost(t) {
            t = (0..self.tets.len() as u32)
                .find(|&s| self.alive[s as usize] && !self.is_ghost(s))
                .expect("triangulation has a finite tet");
        }
        let limit = 4 * self.tets.len() + 64;
        'outer: for _ in 0..limit {
            let start = (xorshift(rng) % 4) as usize;
            for k in 0..4 {
                let i = (start + k) % 4;
                if self.orient_replaced(t, i, q) < 0.0 {
                    t = self.nbrs[t as usize][i];
                    if self.is_ghost(t) {
                        return t;
                    }
                    continue 'outer;
                }
            }
            return t;
        }
        // Should be unreachable for a Delaunay mesh; fall back to a scan.
        (0..self.tets.len() as u32)
            .find(|&s| {
                self.alive[s as usize]
                    && !self.is_ghost(s)
                    && (0..4).all(|i| self.orient_replaced(s, i, q) >= 0.0)
            })
            .unwrap_or_else(|| {
                (0..self.tets.len() as u32)
                    .find(|&s| self.alive[s as usize] && self.is_ghost(s) && self.conflict(s, q))
                    .expect("point is inside a tet or beyond a hull facet")
            })
    }

    fn insert_vertex(&mut self, v: u32) {
        let q = *self.point(v);
        let mut rng = self.rng;
        let mut start = self.walk(&q, self.hint, &mut rng);
        self.rng = rng;
        if !self.conflict(start, &q) {
            match (0..self.tets.len() as u32).find(|&s| self.alive[s as usize] && self.conflict(s, &q)) {
                Some(s) => start = s,
                // Duplicate of an existing vertex: nothing to do.
                None => return,
            }
        }

        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let mut cavity = vec![start];
        self.mark[start as usize] = epoch;
        let mut boundary: Vec<(u32, usize, u32)> = Vec::new();
        let mut cursor = 0;
        while cursor < cavity.len() {
            let t = cavity[cursor];
            cursor += 1;
            for i in 0..4 {
                let n = self.nbrs[t as usize][i];
                if self.mark[n as usize] == epoch {
                    continue;
                }
                if self.conflict(n, &q) {
                    self.mark[n as usize] = epoch;
                    cavity.push(n);
                } else {
                    boundary.push((t, i, n));
                }
            }
        }

        // Resolve everything that refers to cavity slot ids before the
        // slots are recycled.
        let faces: Vec<([u32; 4], usize, u32, usize)> = boundary
            .iter()
            .map(|&(t, i, n)| {
                let mut verts = self.tets[t as usize];
                let slot = self.nbrs[n as usize]
                    .iter()
                    .position(|&x| x == t)
                    .expect("outer neighbor points back into the cavity");
                verts[i] = v;
                (verts, i, n, slot)
            })
            .collect();
        for &t in &cavity {
            self.alive[t as usize] = false;
            self.free.push(t);
        }
        let mut created = Vec::with_capacity(faces.len());
        for (verts, i, n, slot) in faces {
            let t = self.alloc(verts);
            // Recycled slots must not look like cavity members.
            self.mark[t as usize] = 0;
            self.nbrs[t as usize][i] = n;
            self.nbrs[n as usize][slot] = t;
            created.push(t);
        }
        self.link(&created);
        if let Some(&t) = created.iter().find(|&&t| !self.is_ghost(t)) {
            self.hint = t;
        }
    }

    /// Barycentric coefficients of `q` in simplex `id`, against the
    /// original vertex coordinates. Falls back to the jittered geometry if
    /// the original tetrahedron is too flat to resolve `q`.
    pub fn barycentric(&self, id: usize, q: &Point3) -> [f64; 4] {
        let verts = self.simplex(id);
        let orig = verts.map(|v| self.original[v]);
        match solve_barycentric(&orig, q) {
            Some(c) if c.iter().all(|&x| x >= -1e-6) => c,
            other => {
                let jit = verts.map(|v| self.jittered[v]);
                solve_barycentric(&jit, q).or(other).unwrap_or([0.25; 4])
            }
        }
    }

    /// A point locator starting from the most recent insertion.
    pub fn locator(&self) -> Locator<'_> {
        Locator {
            tri: self,
            hint: self.hint,
            rng: 0x9E37_79B9_7F4A_7C15,
        }
    }

    pub fn locate(&self, q: &Point3) -> Location {
        self.locator().locate(q)
    }

    /// True if `q` lies outside the (jittered) hull.
    pub fn is_outside(&self, q: &Point3) -> bool {
        self.locator().is_outside(q)
    }

    fn nearest_hull_simplex(&self, q: &Point3) -> usize {
        let mut best = (f64::INFINITY, 0usize);
        for (t, tet) in self.tets.iter().enumerate() {
            if !self.alive[t] {
                continue;
            }
            let Some(g) = tet.iter().position(|&v| v == INF) else {
                continue;
            };
            let tri: Vec<&Point3> = (0..4).filter(|&j| j != g).map(|j| &self.original[tet[j] as usize]).collect();
            let d = point_triangle_dist2(q, tri[0], tri[1], tri[2]);
            if d < best.0 {
                let inner = self.nbrs[t][g];
                best = (d, self.slot_to_simplex[inner as usize] as usize);
            }
        }
        best.1
    }
}

/// Walk state for a sequence of queries. Spatially coherent queries
/// (see [`spatial_order`]) keep walks short.
pub struct Locator<'a> {
    tri: &'a Triangulation,
    hint: u32,
    rng: u64,
}

impl Locator<'_> {
    /// Locates `q`. Points outside the hull are assigned to the hull
    /// simplex with the nearest boundary facet and extrapolated, with
    /// coefficients floored at [`EXTRAPOLATION_FLOOR`] and renormalized.
    pub fn locate(&mut self, q: &Point3) -> Location {
        let tri = self.tri;
        let t = tri.walk(q, self.hint, &mut self.rng);
        if !tri.is_ghost(t) {
            self.hint = t;
            let simplex = tri.slot_to_simplex[t as usize] as usize;
            return Location {
                simplex,
                coefficients: tri.barycentric(simplex, q),
                extrapolated: false,
            };
        }
        let simplex = tri.nearest_hull_simplex(q);
        let mut c = tri.barycentric(simplex, q);
        for v in &mut c {
            *v = v.max(EXTRAPOLATION_FLOOR);
        }
        let s: f64 = c.iter().sum();
        c.iter_mut().for_each(|v| *v /= s);
        Location {
            simplex,
            coefficients: c,
            extrapolated: true,
        }
    }

    pub fn is_outside(&mut self, q: &Point3) -> bool {
        let t = self.tri.walk(q, self.hint, &mut self.rng);
        if self.tri.is_ghost(t) {
            true
        } else {
            self.hint = t;
            false
        }
    }
}

/// Solves `Σ c_i v_i = q`, `Σ c_i = 1`. `None` for a singular simplex.
pub fn solve_barycentric(v: &[Point3; 4], q: &Point3) -> Option<[f64; 4]> {
    let e1 = sub(&v[1], &v[0]);
    let e2 = sub(&v[2], &v[0]);
    let e3 = sub(&v[3], &v[0]);
    let r = sub(q, &v[0]);
    let det = dot(&e1, &cross(&e2, &e3));
    let scale = norm2(&e1).sqrt() * norm2(&e2).sqrt() * norm2(&e3).sqrt();
    if !(det.abs() > 1e-14 * scale) {
        return None;
    }
    // Cramer's rule on [e1 e2 e3] c = r.
    let c1 = dot(&r, &cross(&e2, &e3)) / det;
    let c2 = dot(&e1, &cross(&r, &e3)) / det;
    let c3 = dot(&e1, &cross(&e2, &r)) / det;
    let c = [1.0 - c1 - c2 - c3, c1, c2, c3];
    c.iter().all(|x| x.is_finite()).then_some(c)
}

fn point_triangle_dist2(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    // Ericson, closest point on triangle.
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    let closest = if d1 <= 0.0 && d2 <= 0.0 {
        *a
    } else {
        let bp = sub(p, b);
        let d3 = dot(&ab, &bp);
        let d4 = dot(&ac, &bp);
        if d3 >= 0.0 && d4 <= d3 {
            *b
        } else {
            let vc = d1 * d4 - d3 * d2;
            if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
                let t = d1 / (d1 - d3);
                [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]]
            } else {
                let cp = sub(p, c);
                let d5 = dot(&ab, &cp);
                let d6 = dot(&ac, &cp);
                if d6 >= 0.0 && d5 <= d6 {
                    *c
                } else {
                    let vb = d5 * d2 - d1 * d6;
                    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
                        let t = d2 / (d2 - d6);
                        [a[0] + t * ac[0], a[1] + t * ac[1], a[2] + t * ac[2]]
                    } else {
                        let va = d3 * d6 - d5 * d4;
                        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
                            let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
                            let bc = sub(c, b);
                            [b[0] + t * bc[0], b[1] + t * bc[1], b[2] + t * bc[2]]
                        } else {
                            let denom = 1.0 / (va + vb + vc);
                            let v = vb * denom;
                            let w = vc * denom;
                            [
                                a[0] + ab[0] * v + ac[0] * w,
                                a[1] + ab[1] * v + ac[1] * w,
                                a[2] + ab[2] * v + ac[2] * w,
                            ]
                        }
                    }
                }
            }
        }
    };
    norm2(&sub(p, &closest))
}
