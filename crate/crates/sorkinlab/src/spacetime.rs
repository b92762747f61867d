//! Causal sets, causal regions and Poisson sprinkling into 1+1 Minkowski space.
//!
//! The order is stored strictly (`x ≺ y`); reflexive `≼` is handled by the
//! query functions. Point sets are passed as index slices and returned sorted.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpacetimeError {
    #[error("relation has a directed cycle through point {0}")]
    Cyclic(usize),
    #[error("point index {index} out of range for a causal set of {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("relation matrix has {got} entries, expected {expected}")]
    BadShape { got: usize, expected: usize },
    #[error("density must be positive and finite, got {0}")]
    BadDensity(f64),
    #[error("causet text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// An event in 1+1 Minkowski space, natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event2D {
    pub t: f64,
    pub x: f64,
}

impl Event2D {
    pub fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }

    pub fn from_lightcone(u: f64, v: f64) -> Self {
        Self { t: 0.5 * (u + v), x: 0.5 * (v - u) }
    }

    pub fn u(&self) -> f64 {
        self.t - self.x
    }

    pub fn v(&self) -> f64 {
        self.t + self.x
    }

    /// `self ≼ other`: other lies in the causal future of self (lightlike included).
    pub fn precedes_eq(&self, other: &Event2D) -> bool {
        let dt = other.t - self.t;
        let dx = other.x - self.x;
        dt >= 0.0 && dt * dt >= dx * dx
    }

    pub fn spacelike_to(&self, other: &Event2D) -> bool {
        let dt = other.t - self.t;
        let dx = other.x - self.x;
        dt * dt < dx * dx
    }

    /// Squared proper time to `other`, positive for timelike separation.
    pub fn interval2(&self, other: &Event2D) -> f64 {
        let dt = other.t - self.t;
        let dx = other.x - self.x;
        dt * dt - dx * dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Future,
    Past,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InOut {
    /// K⁻ = S ∖ J⁺(K)
    In,
    /// K⁺ = S ∖ J⁻(K)
    Out,
}

/// Outcome of the transitivity test.
///
/// A subset K is transitive when every x ∉ K in the causal past of K is in
/// the causal past of every y ∉ K in the causal future of K. The witness
/// records x ≼ z_past, z_future ≼ y with x ⋠ y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transitivity {
    Transitive,
    NonTransitive { x: usize, z_past: usize, z_future: usize, y: usize },
}

impl Transitivity {
    pub fn is_transitive(&self) -> bool {
        matches!(self, Transitivity::Transitive)
    }
}

/// Finite partially ordered set.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalSet {
    n: usize,
    rel: Vec<bool>,
    coords: Option<Vec<Event2D>>,
}

impl CausalSet {
    pub fn empty() -> Self {
        Self { n: 0, rel: vec![], coords: None }
    }

    /// Builds from a strict relation (row-major, `rel[x*n+y]` iff x ≺ y),
    /// taking the transitive closure. Fails on cycles.
    pub fn from_relation(n: usize, rel: Vec<bool>) -> Result<Self, SpacetimeError> {
        if rel.len() != n * n {
            return Err(SpacetimeError::BadShape { got: rel.len(), expected: n * n });
        }
        let mut cs = Self { n, rel, coords: None };
        cs.close()?;
        Ok(cs)
    }

    /// Builds from covering pairs `(a, b)` meaning a ≺ b.
    pub fn from_links(n: usize, links: &[(usize, usize)]) -> Result<Self, SpacetimeError> {
        let mut rel = vec![false; n * n];
        for &(a, b) in links {
            for i in [a, b] {
                if i >= n {
                    return Err(SpacetimeError::IndexOutOfRange { index: i, n });
                }
            }
            if a == b {
                return Err(SpacetimeError::Cyclic(a));
            }
            rel[a * n + b] = true;
        }
        Self::from_relation(n, rel)
    }

    pub fn chain(n: usize) -> Self {
        let links: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_links(n, &links).expect("a chain is acyclic")
    }

    pub fn antichain(n: usize) -> Self {
        Self { n, rel: vec![false; n * n], coords: None }
    }

    /// Attaches coordinates; the relation is left untouched.
    pub fn with_coords(mut self, coords: Vec<Event2D>) -> Result<Self, SpacetimeError> {
        if coords.len() != self.n {
            return Err(SpacetimeError::BadShape { got: coords.len(), expected: self.n });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    /// Causal set induced by the lightcone order on a list of events.
    pub fn from_events(events: Vec<Event2D>) -> Self {
        let n = events.len();
        let mut rel = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (&events[i], &events[j]);
                rel[i * n + j] = b.t > a.t && a.precedes_eq(b);
            }
        }
        Self { n, rel, coords: Some(events) }
    }

    fn close(&mut self) -> Result<(), SpacetimeError> {
        let n = self.n;
        let order = self.topological_order()?;
        // Process in reverse topological order: each row absorbs the rows of its successors.
        for &x in order.iter().rev() {
            for y in 0..n {
                if self.rel[x * n + y] {
                    for z in 0..n {
                        if self.rel[y * n + z] {
                            self.rel[x * n + z] = true;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn topological_order(&self) -> Result<Vec<usize>, SpacetimeError> {
        let n = self.n;
        let mut indeg = vec![0usize; n];
        for x in 0..n {
            for y in 0..n {
                if self.rel[x * n + y] {
                    indeg[y] += 1;
                }
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&x| indeg[x] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(x) = stack.pop() {
            order.push(x);
            for y in (0..n).rev() {
                if self.rel[x * n + y] {
                    indeg[y] -= 1;
                    if indeg[y] == 0 {
                        stack.push(y);
                    }
                }
            }
        }
        if order.len() != n {
            let bad = (0..n).find(|&x| indeg[x] > 0).unwrap_or(0);
            return Err(SpacetimeError::Cyclic(bad));
        }
        Ok(order)
    }

    /// A linear extension of the order (labels compatible with ≺).
    pub fn natural_labelling(&self) -> Vec<usize> {
        self.topological_order().expect("stored relations are acyclic")
    }

    /// True when x ≺ y implies x < y for the stored indices.
    pub fn is_naturally_labelled(&self) -> bool {
        (0..self.n).all(|x| (0..=x).all(|y| !self.rel[x * self.n + y]))
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> Option<&[Event2D]> {
        self.coords.as_deref()
    }

    /// Strict order x ≺ y.
    pub fn precedes(&self, x: usize, y: usize) -> bool {
        self.rel[x * self.n + y]
    }

    /// Reflexive order x ≼ y.
    pub fn precedes_eq(&self, x: usize, y: usize) -> bool {
        x == y || self.rel[x * self.n + y]
    }

    pub fn spacelike(&self, x: usize, y: usize) -> bool {
        x != y && !self.precedes(x, y) && !self.precedes(y, x)
    }

    pub fn relation(&self) -> &[bool] {
        &self.rel
    }

    /// Covering relations (transitive reduction).
    pub fn links(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut out = Vec::new();
        for x in 0..n {
            for y in 0..n {
                if self.precedes(x, y) && !(0..n).any(|z| self.precedes(x, z) && self.precedes(z, y)) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    fn check(&self, s: &[usize]) {
        for &i in s {
            assert!(i < self.n, "point index {i} out of range for {} points", self.n);
        }
    }

    /// J⁺(S) or J⁻(S), reflexive.
    ///
    /// # Panics
    /// If an index is out of range.
    pub fn future_past(&self, s: &[usize], dir: Direction) -> Vec<usize> {
        self.check(s);
        let mut mark = vec![false; self.n];
        for &x in s {
            mark[x] = true;
            for y in 0..self.n {
                let r = match dir {
                    Direction::Future => self.precedes(x, y),
                    Direction::Past => self.precedes(y, x),
                };
                if r {
                    mark[y] = true;
                }
            }
        }
        (0..self.n).filter(|&i| mark[i]).collect()
    }

    /// K⁻ = S∖J⁺(K) or K⁺ = S∖J⁻(K).
    pub fn in_out_region(&self, k: &[usize], which: InOut) -> Vec<usize> {
        let j = match which {
            InOut::In => self.future_past(k, Direction::Future),
            InOut::Out => self.future_past(k, Direction::Past),
        };
        complement(self.n, &j)
    }

    pub fn is_transitive(&self, k: &[usize]) -> Transitivity {
        self.check(k);
        let mut in_k = vec![false; self.n];
        for &z in k {
            in_k[z] = true;
        }
        let outside: Vec<usize> = (0..self.n).filter(|&i| !in_k[i]).collect();
        for &x in &outside {
            let Some(&zp) = k.iter().find(|&&z| self.precedes_eq(x, z)) else { continue };
            for &y in &outside {
                if self.precedes_eq(x, y) {
                    continue;
                }
                if let Some(&zf) = k.iter().find(|&&z| self.precedes_eq(z, y)) {
                    return Transitivity::NonTransitive { x, z_past: zp, z_future: zf, y };
                }
            }
        }
        Transitivity::Transitive
    }

    pub fn is_causally_convex(&self, r: &[usize]) -> bool {
        self.check(r);
        let mut in_r = vec![false; self.n];
        for &z in r {
            in_r[z] = true;
        }
        for &x in r {
            for &y in r {
                if !self.precedes(x, y) {
                    continue;
                }
                for z in 0..self.n {
                    if !in_r[z] && self.precedes(x, z) && self.precedes(z, y) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Connected components of the comparability graph, each sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![s];
            comp[s] = id;
            let mut members = vec![];
            while let Some(x) = stack.pop() {
                members.push(x);
                for y in 0..n {
                    if comp[y] == usize::MAX && (self.precedes(x, y) || self.precedes(y, x)) {
                        comp[y] = id;
                        stack.push(y);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Restriction to a subset, re-indexed in the given order.
    pub fn subcauset(&self, pts: &[usize]) -> CausalSet {
        self.check(pts);
        let m = pts.len();
        let mut rel = vec![false; m * m];
        for (i, &a) in pts.iter().enumerate() {
            for (j, &b) in pts.iter().enumerate() {
                rel[i * m + j] = self.precedes(a, b);
            }
        }
        let coords = self.coords.as_ref().map(|c| pts.iter().map(|&p| c[p]).collect());
        CausalSet { n: m, rel, coords }
    }

    /// Plain-text form: `causet n=<N>`, `id t x` lines, then `a<b` covering pairs.
    pub fn to_text(&self) -> String {
        let mut s = format!("causet n={}\n", self.n);
        for i in 0..self.n {
            match &self.coords {
                Some(c) => {
                    let _ = writeln!(s, "{} {} {}", i, crate::format::g17(c[i].t), crate::format::g17(c[i].x));
                }
                None => {
                    let _ = writeln!(s, "{i} nan nan");
                }
            }
        }
        for (a, b) in self.links() {
            let _ = writeln!(s, "{a}<{b}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SpacetimeError> {
        let perr = |line: usize, msg: &str| SpacetimeError::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let n: usize = header
            .trim()
            .strip_prefix("causet n=")
            .ok_or_else(|| perr(hl + 1, "expected `causet n=<N>`"))?
            .trim()
            .parse()
            .map_err(|_| perr(hl + 1, "bad point count"))?;
        let mut coords = vec![Event2D::new(f64::NAN, f64::NAN); n];
        let mut seen = vec![false; n];
        let mut links = Vec::new();
        for (ln, line) in lines {
            let line = line.trim();
            if let Some((a, b)) = line.split_once('<') {
                let a: usize = a.trim().parse().map_err(|_| perr(ln + 1, "bad edge"))?;
                let b: usize = b.trim().parse().map_err(|_| perr(ln + 1, "bad edge"))?;
                links.push((a, b));
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr(ln + 1, "expected `id t x` or `a<b`"));
            }
            let id: usize = f[0].parse().map_err(|_| perr(ln + 1, "bad id"))?;
            if id >= n {
                return Err(perr(ln + 1, "id out of range"));
            }
            let t: f64 = f[1].parse().map_err(|_| perr(ln + 1, "bad t"))?;
            let x: f64 = f[2].parse().map_err(|_| perr(ln + 1, "bad x"))?;
            coords[id] = Event2D::new(t, x);
            seen[id] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(perr(0, &format!("point {missing} has no coordinate line")));
        }
        let cs = Self::from_links(n, &links)?;
        if coords.iter().all(|e| e.t.is_nan() && e.x.is_nan()) {
            Ok(cs)
        } else {
            cs.with_coords(coords)
        }
    }
}

/// Sorted complement of `s` in {0..n}.
pub fn complement(n: usize, s: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; n];
    for &i in s {
        mark[i] = true;
    }
    (0..n).filter(|&i| !mark[i]).collect()
}

/// Poisson sprinkling into a coordinate rectangle [t0,t1]×[x0,x1].
///
/// Points are labelled in increasing time, which is a natural labelling.
pub fn sprinkle(t_range: (f64, f64), x_range: (f64, f64), density: f64, seed: u64) -> Result<CausalSet, SpacetimeError> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(SpacetimeError::BadDensity(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = (t_range.1 - t_range.0).max(0.0) * (x_range.1 - x_range.0).max(0.0);
    if area <= 0.0 {
        return Ok(CausalSet::from_events(vec![]));
    }
    let count = Poisson::new(density * area).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
    let mut events: Vec<Event2D> = (0..count)
        .map(|_| {
            let t = t_range.0 + (t_range.1 - t_range.0) * rng.gen::<f64>();
            let x = x_range.0 + (x_range.1 - x_range.0) * rng.gen::<f64>();
            Event2D::new(t, x)
        })
        .collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.x.total_cmp(&b.x)));
    Ok(CausalSet::from_events(events))
}

/// Continuum lab regions in 1+1 Minkowski space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuumRegion {
    /// Coordinate rectangle [t0,t1]×[x0,x1].
    Rect { t0: f64, t1: f64, x0: f64, x1: f64 },
    /// Causal diamond u ∈ [u0,u1], v ∈ [v0,v1].
    Diamond { u0: f64, u1: f64, v0: f64, v1: f64 },
}

impl ContinuumRegion {
    /// Smallest causal diamond containing a disk.
    pub fn diamond_around(center: Event2D, radius: f64) -> Self {
        let r = radius * std::f64::consts::SQRT_2;
        ContinuumRegion::Diamond { u0: center.u() - r, u1: center.u() + r, v0: center.v() - r, v1: center.v() + r }
    }

    pub fn contains(&self, e: &Event2D) -> bool {
        match *self {
            ContinuumRegion::Rect { t0, t1, x0, x1 } => e.t >= t0 && e.t <= t1 && e.x >= x0 && e.x <= x1,
            ContinuumRegion::Diamond { u0, u1, v0, v1 } => e.u() >= u0 && e.u() <= u1 && e.v() >= v0 && e.v() <= v1,
        }
    }

    /// e ∈ J⁻(region)
    pub fn in_causal_past(&self, e: &Event2D) -> bool {
        match *self {
            ContinuumRegion::Rect { t1, x0, x1, .. } => x0.max(e.v() - t1) <= x1.min(t1 - e.u()),
            ContinuumRegion::Diamond { u1, v1, .. } => e.u() <= u1 && e.v() <= v1,
        }
    }

    /// e ∈ J⁺(region)
    pub fn in_causal_future(&self, e: &Event2D) -> bool {
        match *self {
            ContinuumRegion::Rect { t0, x0, x1, .. } => x0.max(t0 - e.u()) <= x1.min(e.v() - t0),
            ContinuumRegion::Diamond { u0, v0, .. } => e.u() >= u0 && e.v() >= v0,
        }
    }

    pub fn in_out(&self, e: &Event2D, which: InOut) -> bool {
        match which {
            InOut::In => !self.in_causal_future(e),
            InOut::Out => !self.in_causal_past(e),
        }
    }

    pub fn is_causally_convex(&self) -> bool {
        match *self {
            ContinuumRegion::Rect { t0, t1, .. } => t0 == t1,
            ContinuumRegion::Diamond { .. } => true,
        }
    }
}
