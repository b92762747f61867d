//! Resolutions of the real line into bins, the overlap sets
//! R_t = ∪ₙ Bₙ ∩ (Bₙ + t), windowed Lebesgue measure and the search for a
//! shift at which R_t is neither null nor full.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ResolutionError {
    #[error("invalid resolution: {0}")]
    Invalid(String),
    #[error("cannot parse resolution literal `{0}`: {1}")]
    Parse(String, String),
    #[error("window must be a bounded interval with lo < hi, got [{0}, {1})")]
    BadWindow(f64, f64),
    #[error("no shift with 0 < L(t) < L(0) found; scanned profile has {} points", profile.len())]
    SearchFailed { profile: Vec<(f64, f64)> },
}

/// Finite union of half-open intervals [a, b), kept sorted, disjoint and merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    iv: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self { iv: vec![] }
    }

    pub fn full() -> Self {
        Self { iv: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self::new(vec![(a, b)])
    }

    /// Canonicalizes an arbitrary list; empty and reversed pieces are dropped.
    pub fn new(mut iv: Vec<(f64, f64)>) -> Self {
        iv.retain(|&(a, b)| a < b);
        iv.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
        for (a, b) in iv {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { iv: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.iv
    }

    pub fn is_empty(&self) -> bool {
        self.iv.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.iv.iter().all(|&(a, b)| a < b) && self.iv.windows(2).all(|w| w[0].1 < w[1].0)
    }

    pub fn contains(&self, x: f64) -> bool {
        // Binary search on left endpoints.
        let i = self.iv.partition_point(|&(a, _)| a <= x);
        i > 0 && x < self.iv[i - 1].1
    }

    pub fn measure(&self) -> f64 {
        self.iv.iter().map(|&(a, b)| b - a).sum()
    }

    pub fn is_bounded(&self) -> bool {
        self.iv.iter().all(|&(a, b)| a.is_finite() && b.is_finite())
    }

    pub fn inf(&self) -> Option<f64> {
        self.iv.first().map(|p| p.0)
    }

    pub fn sup(&self) -> Option<f64> {
        self.iv.last().map(|p| p.1)
    }

    pub fn translate(&self, t: f64) -> Self {
        Self::new(self.iv.iter().map(|&(a, b)| (a + t, b + t)).collect())
    }

    /// Scales by a positive factor.
    pub fn scale(&self, c: f64) -> Self {
        assert!(c > 0.0, "scale factor must be positive");
        Self::new(self.iv.iter().map(|&(a, b)| (a * c, b * c)).collect())
    }

    pub fn union(&self, o: &Self) -> Self {
        let mut v = self.iv.clone();
        v.extend_from_slice(&o.iv);
        Self::new(v)
    }

    pub fn intersect(&self, o: &Self) -> Self {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.iv.len() && j < o.iv.len() {
            let (a1, b1) = self.iv[i];
            let (a2, b2) = o.iv[j];
            let lo = a1.max(a2);
            let hi = b1.min(b2);
            if lo < hi {
                out.push((lo, hi));
            }
            if b1 < b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { iv: out }
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cur = f64::NEG_INFINITY;
        for &(a, b) in &self.iv {
            if cur < a {
                out.push((cur, a));
            }
            cur = b;
        }
        if cur < f64::INFINITY {
            out.push((cur, f64::INFINITY));
        }
        Self { iv: out }
    }

    pub fn difference(&self, o: &Self) -> Self {
        self.intersect(&o.complement())
    }

    /// All finite endpoints, sorted.
    pub fn endpoints(&self) -> Vec<f64> {
        self.iv.iter().flat_map(|&(a, b)| [a, b]).filter(|x| x.is_finite()).collect()
    }
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.iv.is_empty() {
            return write!(f, "empty");
        }
        let parts: Vec<String> = self.iv.iter().map(|&(a, b)| format!("[{},{})", fmt_num(a), fmt_num(b))).collect();
        write!(f, "{}", parts.join("|"))
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

impl std::str::FromStr for IntervalSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "empty" {
            return Ok(Self::empty());
        }
        let mut iv = Vec::new();
        for part in s.split('|') {
            let p = part.trim();
            let inner = p
                .strip_prefix('[')
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(|| format!("interval `{p}` must look like [a,b)"))?;
            let (a, b) = inner.split_once(',').ok_or_else(|| format!("interval `{p}` needs two endpoints"))?;
            let a = parse_num(a).ok_or_else(|| format!("bad endpoint `{a}`"))?;
            let b = parse_num(b).ok_or_else(|| format!("bad endpoint `{b}`"))?;
            if !(a < b) {
                return Err(format!("interval `{p}` is empty"));
            }
            iv.push((a, b));
        }
        Ok(Self::new(iv))
    }
}

/// Smith–Volterra–Cantor set at finite depth inside [0, 1): at step n the
/// middle 4⁻ⁿ of every remaining interval is removed.
pub fn svc_set(depth: u32) -> IntervalSet {
    let mut cur = vec![(0.0f64, 1.0f64)];
    for n in 1..=depth {
        let gap = 0.25f64.powi(n as i32);
        let mut next = Vec::with_capacity(cur.len() * 2);
        for &(a, b) in &cur {
            let c = 0.5 * (a + b);
            next.push((a, c - 0.5 * gap));
            next.push((c + 0.5 * gap, b));
        }
        cur = next;
    }
    IntervalSet::new(cur)
}

pub const SVC_MAX_DEPTH: u32 = 20;

/// A cover of ℝ by disjoint bins of positive measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    /// Bins [o + n·w, o + (n+1)·w), n ∈ ℤ.
    Uniform { width: f64, offset: f64 },
    /// Bins (−∞, c₁), [c₁, c₂), …, [c_k, ∞).
    Threshold { cuts: Vec<f64> },
    /// Two bins: the depth-d fat Cantor set in [0,1) and its complement.
    Svc { depth: u32, set: IntervalSet },
    Explicit { bins: Vec<IntervalSet> },
}

impl Resolution {
    pub fn uniform(width: f64, offset: f64) -> Result<Self, ResolutionError> {
        if !(width > 0.0 && width.is_finite() && offset.is_finite()) {
            return Err(ResolutionError::Invalid(format!("uniform bins need finite width > 0, got w={width}, o={offset}")));
        }
        Ok(Resolution::Uniform { width, offset })
    }

    pub fn threshold(mut cuts: Vec<f64>) -> Result<Self, ResolutionError> {
        if cuts.is_empty() {
            return Err(ResolutionError::Invalid("threshold resolution needs at least one cut".into()));
        }
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(ResolutionError::Invalid("threshold cuts must be finite".into()));
        }
        cuts.sort_by(f64::total_cmp);
        if cuts.windows(2).any(|w| w[0] == w[1]) {
            return Err(ResolutionError::Invalid("threshold cuts must be distinct".into()));
        }
        Ok(Resolution::Threshold { cuts })
    }

    pub fn svc(depth: u32) -> Result<Self, ResolutionError> {
        if depth > SVC_MAX_DEPTH {
            return Err(ResolutionError::Invalid(format!("svc depth {depth} exceeds {SVC_MAX_DEPTH}")));
        }
        Ok(Resolution::Svc { depth, set: svc_set(depth) })
    }

    pub fn explicit(bins: Vec<IntervalSet>) -> Result<Self, ResolutionError> {
        if bins.len() < 2 {
            return Err(ResolutionError::Invalid("a resolution needs at least two bins".into()));
        }
        let mut union = IntervalSet::empty();
        let mut total_pieces = 0;
        for (i, b) in bins.iter().enumerate() {
            if !(b.measure() > 0.0) {
                return Err(ResolutionError::Invalid(format!("bin {i} has zero measure")));
            }
            if !union.intersect(b).is_empty() {
                return Err(ResolutionError::Invalid(format!("bin {i} overlaps an earlier bin")));
            }
            union = union.union(b);
            total_pieces += b.intervals().len();
        }
        if union != IntervalSet::full() {
            return Err(ResolutionError::Invalid(format!("bins do not cover the real line (union {union})")));
        }
        let _ = total_pieces;
        Ok(Resolution::Explicit { bins })
    }

    /// Index of the bin containing x.
    pub fn bin_index(&self, x: f64) -> i64 {
        match self {
            Resolution::Uniform { width, offset } => ((x - offset) / width).floor() as i64,
            Resolution::Threshold { cuts } => cuts.partition_point(|&c| c <= x) as i64,
            Resolution::Svc { set, .. } => {
                if set.contains(x) {
                    0
                } else {
                    1
                }
            }
            Resolution::Explicit { bins } => bins.iter().position(|b| b.contains(x)).map(|i| i as i64).unwrap_or(-1),
        }
    }

    /// Full bin with the given index.
    pub fn bin(&self, n: i64) -> IntervalSet {
        match self {
            Resolution::Uniform { width, offset } => {
                let a = offset + n as f64 * width;
                IntervalSet::interval(a, a + width)
            }
            Resolution::Threshold { cuts } => {
                let k = cuts.len() as i64;
                let lo = if n <= 0 { f64::NEG_INFINITY } else { cuts[(n - 1) as usize] };
                let hi = if n >= k { f64::INFINITY } else { cuts[n as usize] };
                IntervalSet::interval(lo, hi)
            }
            Resolution::Svc { set, .. } => {
                if n == 0 {
                    set.clone()
                } else {
                    set.complement()
                }
            }
            Resolution::Explicit { bins } => bins[n as usize].clone(),
        }
    }

    /// Bins that meet the window [lo, hi), with their indices.
    pub fn bins_meeting(&self, lo: f64, hi: f64) -> Vec<(i64, IntervalSet)> {
        let w = IntervalSet::interval(lo, hi);
        match self {
            Resolution::Uniform { width, offset } => {
                let first = ((lo - offset) / width).floor() as i64;
                let last = ((hi - offset) / width).floor() as i64;
                (first..=last).map(|n| (n, self.bin(n))).filter(|(_, b)| !b.intersect(&w).is_empty()).collect()
            }
            Resolution::Threshold { cuts } => {
                let first = self.bin_index(lo);
                let last = cuts.partition_point(|&c| c < hi) as i64;
                (first..=last).map(|n| (n, self.bin(n))).filter(|(_, b)| !b.intersect(&w).is_empty()).collect()
            }
            Resolution::Svc { .. } => (0..2).map(|n| (n, self.bin(n))).filter(|(_, b)| !b.intersect(&w).is_empty()).collect(),
            Resolution::Explicit { bins } => bins
                .iter()
                .enumerate()
                .filter(|(_, b)| !b.intersect(&w).is_empty())
                .map(|(i, b)| (i as i64, b.clone()))
                .collect(),
        }
    }

    /// Largest diameter among bounded bins meeting the window, or the window
    /// length when every such bin is unbounded.
    pub fn max_bin_width(&self, lo: f64, hi: f64) -> f64 {
        let d = self
            .bins_meeting(lo, hi)
            .iter()
            .filter(|(_, b)| b.is_bounded())
            .map(|(_, b)| b.sup().unwrap() - b.inf().unwrap())
            .fold(0.0, f64::max);
        if d > 0.0 {
            d
        } else {
            hi - lo
        }
    }

    /// Every finite bin edge inside [lo, hi).
    pub fn edges_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .bins_meeting(lo, hi)
            .iter()
            .flat_map(|(_, b)| b.endpoints())
            .filter(|&x| x >= lo && x < hi)
            .collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    pub fn parse(lit: &str) -> Result<Self, ResolutionError> {
        let perr = |m: &str| ResolutionError::Parse(lit.to_string(), m.to_string());
        let (kind, rest) = lit.trim().split_once(':').ok_or_else(|| perr("expected <kind>:<params>"))?;
        match kind {
            "uniform" => {
                let (mut w, mut o) = (None, 0.0);
                for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(|| perr("expected key=value"))?;
                    let v: f64 = v.trim().parse().map_err(|_| perr("bad number"))?;
                    match k.trim() {
                        "w" => w = Some(v),
                        "o" => o = v,
                        other => return Err(perr(&format!("unknown key `{other}`"))),
                    }
                }
                Self::uniform(w.ok_or_else(|| perr("missing w"))?, o)
            }
            "threshold" => {
                let cuts: Result<Vec<f64>, _> = rest.split(',').map(|c| c.trim().parse::<f64>()).collect();
                Self::threshold(cuts.map_err(|_| perr("bad cut"))?)
            }
            "svc" => {
                let d = rest.trim().strip_prefix("d=").ok_or_else(|| perr("expected d=<depth>"))?;
                Self::svc(d.trim().parse().map_err(|_| perr("bad depth"))?)
            }
            "explicit" => {
                let bins: Result<Vec<IntervalSet>, String> = rest.split(';').map(|b| b.parse()).collect();
                Self::explicit(bins.map_err(|m| perr(&m))?)
            }
            other => Err(perr(&format!("unknown kind `{other}`"))),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Uniform { width, offset } => write!(f, "uniform:w={},o={}", fmt_num(*width), fmt_num(*offset)),
            Resolution::Threshold { cuts } => {
                let c: Vec<String> = cuts.iter().map(|&c| fmt_num(c)).collect();
                write!(f, "threshold:{}", c.join(","))
            }
            Resolution::Svc { depth, .. } => write!(f, "svc:d={depth}"),
            Resolution::Explicit { bins } => {
                let b: Vec<String> = bins.iter().map(|b| b.to_string()).collect();
                write!(f, "explicit:{}", b.join(";"))
            }
        }
    }
}

fn window(lo: f64, hi: f64) -> Result<IntervalSet, ResolutionError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ResolutionError::BadWindow(lo, hi));
    }
    Ok(IntervalSet::interval(lo, hi))
}

/// D ∩ ∪ₙ Bₙ ∩ (Bₙ + t) for the window D = [lo, hi).
pub fn r_t(res: &Resolution, t: f64, lo: f64, hi: f64) -> Result<IntervalSet, ResolutionError> {
    let d = window(lo, hi)?;
    let mut pieces = Vec::new();
    for (_, b) in res.bins_meeting(lo, hi) {
        let part = b.intersect(&d).intersect(&b.translate(t));
        pieces.extend_from_slice(part.intervals());
    }
    Ok(IntervalSet::new(pieces))
}

pub fn measure(s: &IntervalSet) -> f64 {
    s.measure()
}

/// L(t) = λ(D ∩ R_t).
pub fn overlap_measure(res: &Resolution, t: f64, lo: f64, hi: f64) -> Result<f64, ResolutionError> {
    Ok(r_t(res, t, lo, hi)?.measure())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nontriviality {
    pub t_star: f64,
    pub measure_ratio: f64,
}

pub const SEARCH_SCAN_POINTS: usize = 10_000;
pub const SEARCH_BISECTIONS: usize = 60;

/// Finds t* with 0 < λ(D∩R_t*) < λ(D), aiming for λ(D)/2.
pub fn nontriviality_search(res: &Resolution, lo: f64, hi: f64) -> Result<Nontriviality, ResolutionError> {
    let total = window(lo, hi)?.measure();
    let target = 0.5 * total;
    let tmax = 2.0 * res.max_bin_width(lo, hi);
    let l = |t: f64| overlap_measure(res, t, lo, hi).expect("window already validated");
    let mut profile = Vec::with_capacity(SEARCH_SCAN_POINTS);
    let (mut prev_t, mut prev_l) = (0.0, total);
    let mut crossing = None;
    for k in 1..=SEARCH_SCAN_POINTS {
        let t = tmax * k as f64 / SEARCH_SCAN_POINTS as f64;
        let lt = l(t);
        profile.push((t, lt));
        if prev_l > target && lt <= target {
            crossing = Some((prev_t, t));
            break;
        }
        prev_t = t;
        prev_l = lt;
    }
    let strictly_inside = |x: f64| x > 1e-12 * total && x < total * (1.0 - 1e-12);
    if let Some((mut a, mut b)) = crossing {
        for _ in 0..SEARCH_BISECTIONS {
            let m = 0.5 * (a + b);
            if l(m) > target {
                a = m;
            } else {
                b = m;
            }
        }
        let (la, lb) = (l(a), l(b));
        let best = if (la - target).abs() < (lb - target).abs() && strictly_inside(la) { (a, la) } else { (b, lb) };
        if strictly_inside(best.1) {
            return Ok(Nontriviality { t_star: best.0, measure_ratio: best.1 / total });
        }
    }
    let best = profile
        .iter()
        .filter(|(_, lt)| strictly_inside(*lt))
        .min_by(|p, q| (p.1 - target).abs().total_cmp(&(q.1 - target).abs()));
    match best {
        Some(&(t, lt)) => Ok(Nontriviality { t_star: t, measure_ratio: lt / total }),
        None => Err(ResolutionError::SearchFailed { profile }),
    }
}

/// |L(t+δ) − L(t)| for each δ.
pub fn continuity_probe(res: &Resolution, lo: f64, hi: f64, t: f64, deltas: &[f64]) -> Result<Vec<f64>, ResolutionError> {
    let base = overlap_measure(res, t, lo, hi)?;
    deltas.iter().map(|&d| Ok((overlap_measure(res, t + d, lo, hi)? - base).abs())).collect()
}
