//! Difference bound matrices over integer constants.
//!
//! A [`Zone`] of dimension `n + 1` describes a convex set of valuations of
//! `n` clocks. Entry `(i, j)` bounds `x_i - x_j`, with `x_0` the constant-zero
//! reference clock. All public operations return canonical zones; the empty
//! zone is an ordinary value.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ZoneError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Upper bound `(c, <)` or `(c, <=)`, or `+inf`.
///
/// Packed as `2c + 1` for non-strict and `2c` for strict bounds, so that the
/// natural integer order is the bound order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bound(i32);

impl Bound {
    pub const INFINITY: Bound = Bound(i32::MAX);
    pub const ZERO: Bound = Bound(1);

    pub fn le(c: i32) -> Bound {
        Bound((c << 1) | 1)
    }

    pub fn lt(c: i32) -> Bound {
        Bound(c << 1)
    }

    pub fn new(c: i32, strict: bool) -> Bound {
        if strict {
            Bound::lt(c)
        } else {
            Bound::le(c)
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Bound::INFINITY
    }

    /// Constant part; meaningless for infinity.
    pub fn value(self) -> i32 {
        self.0 >> 1
    }

    pub fn is_strict(self) -> bool {
        !self.is_infinite() && self.0 & 1 == 0
    }

    pub fn add(self, other: Bound) -> Bound {
        if self.is_infinite() || other.is_infinite() {
            return Bound::INFINITY;
        }
        Bound(((self.value() + other.value()) << 1) | (self.0 & other.0 & 1))
    }

    /// The bound of the complementary constraint on the reversed difference:
    /// `not (x - y < c)` is `y - x <= -c`.
    pub fn negate(self) -> Bound {
        debug_assert!(!self.is_infinite());
        Bound::new(-self.value(), !self.is_strict())
    }

    /// Whether the scaled value `d / scale` satisfies this bound.
    pub fn admits_scaled(self, d: i64, scale: i64) -> bool {
        if self.is_infinite() {
            return true;
        }
        let c = self.value() as i64 * scale;
        if self.is_strict() {
            d < c
        } else {
            d <= c
        }
    }
}

impl fmt::Debug for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "<inf")
        } else if self.is_strict() {
            write!(f, "<{}", self.value())
        } else {
            write!(f, "<={}", self.value())
        }
    }
}

/// A single difference constraint `x_i - x_j ≺ c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClockAtom {
    pub i: usize,
    pub j: usize,
    pub bound: Bound,
}

impl ClockAtom {
    pub fn new(i: usize, j: usize, bound: Bound) -> Self {
        ClockAtom { i, j, bound }
    }

    /// `x ≤ c` or `x < c`
    pub fn upper(x: usize, bound: Bound) -> Self {
        ClockAtom { i: x, j: 0, bound }
    }

    /// `x ≥ c` (non-strict) or `x > c` (strict).
    pub fn lower(x: usize, c: i32, strict: bool) -> Self {
        ClockAtom { i: 0, j: x, bound: Bound::new(-c, strict) }
    }

    pub fn holds_scaled(&self, vals: &[i64], scale: i64) -> bool {
        let vi = if self.i == 0 { 0 } else { vals[self.i - 1] };
        let vj = if self.j == 0 { 0 } else { vals[self.j - 1] };
        self.bound.admits_scaled(vi - vj, scale)
    }

    /// The complement, as a constraint on the reversed difference.
    pub fn negated(&self) -> ClockAtom {
        ClockAtom { i: self.j, j: self.i, bound: self.bound.negate() }
    }
}

/// Conjunction of difference constraints.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ClockConstraint {
    pub atoms: Vec<ClockAtom>,
}

impl ClockConstraint {
    pub fn new(atoms: Vec<ClockAtom>) -> Self {
        ClockConstraint { atoms }
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_clock(&self) -> usize {
        self.atoms.iter().map(|a| a.i.max(a.j)).max().unwrap_or(0)
    }

    pub fn holds_scaled(&self, vals: &[i64], scale: i64) -> bool {
        self.atoms.iter().all(|a| a.holds_scaled(vals, scale))
    }
}

impl From<Vec<ClockAtom>> for ClockConstraint {
    fn from(atoms: Vec<ClockAtom>) -> Self {
        ClockConstraint { atoms }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Zone {
    dim: usize,
    m: Vec<Bound>,
}

impl Zone {
    /// All clocks equal to zero.
    pub fn init(num_clocks: usize) -> Zone {
        let dim = num_clocks + 1;
        Zone { dim, m: vec![Bound::ZERO; dim * dim] }
    }

    /// Every non-negative valuation.
    pub fn unconstrained(num_clocks: usize) -> Zone {
        let dim = num_clocks + 1;
        let mut m = vec![Bound::INFINITY; dim * dim];
        for k in 0..dim {
            m[k * dim + k] = Bound::ZERO;
            m[k] = Bound::ZERO;
        }
        Zone { dim, m }
    }

    pub fn empty(num_clocks: usize) -> Zone {
        let mut z = Zone::init(num_clocks);
        z.mark_empty();
        z
    }

    /// Builds a zone from a raw matrix (row-major) and canonicalizes it.
    pub fn from_matrix(dim: usize, m: Vec<Bound>) -> Zone {
        assert_eq!(m.len(), dim * dim, "matrix size");
        let mut z = Zone { dim, m };
        z.canonicalize();
        z
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_clocks(&self) -> usize {
        self.dim - 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Bound {
        self.m[i * self.dim + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, b: Bound) {
        self.m[i * self.dim + j] = b;
    }

    fn mark_empty(&mut self) {
        self.m.fill(Bound::ZERO);
        self.m[0] = Bound::le(-1);
    }

    pub fn is_empty(&self) -> bool {
        self.m[0] < Bound::ZERO
    }

    /// Floyd-Warshall closure. Marks the zone empty on a negative cycle.
    pub fn canonicalize(&mut self) {
        if self.is_empty() {
            return;
        }
        let n = self.dim;
        for k in 0..n {
            for i in 0..n {
                let ik = self.m[i * n + k];
                if ik.is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let cand = ik.add(self.m[k * n + j]);
                    if cand < self.m[i * n + j] {
                        self.m[i * n + j] = cand;
                    }
                }
            }
        }
        if (0..n).any(|i| self.m[i * n + i] < Bound::ZERO) {
            self.mark_empty();
        }
    }

    /// Tightens `x_i - x_j` to `b` and restores canonical form in O(n^2).
    pub fn constrain(&mut self, i: usize, j: usize, b: Bound) {
        if self.is_empty() || b >= self.get(i, j) {
            return;
        }
        if b.add(self.get(j, i)) < Bound::ZERO {
            self.mark_empty();
            return;
        }
        self.set(i, j, b);
        let n = self.dim;
        for p in 0..n {
            let pi = self.get(p, i);
            let pj_via = pi.add(b);
            for q in 0..n {
                let cand = pj_via.add(self.get(j, q));
                if cand < self.get(p, q) {
                    self.set(p, q, cand);
                }
            }
        }
    }

    pub fn and_atom(&self, atom: &ClockAtom) -> Zone {
        let mut z = self.clone();
        z.constrain(atom.i, atom.j, atom.bound);
        z
    }

    pub fn and(&self, g: &ClockConstraint) -> Zone {
        let mut z = self.clone();
        for a in &g.atoms {
            if z.is_empty() {
                break;
            }
            z.constrain(a.i, a.j, a.bound);
        }
        z
    }

    pub fn intersection(&self, other: &Zone) -> Zone {
        assert_eq!(self.dim, other.dim);
        if self.is_empty() || other.is_empty() {
            return Zone::empty(self.num_clocks());
        }
        let m = self.m.iter().zip(&other.m).map(|(a, b)| *a.min(b)).collect();
        Zone::from_matrix(self.dim, m)
    }

    /// Delay closure.
    pub fn up(&self) -> Zone {
        let mut z = self.clone();
        if z.is_empty() {
            return z;
        }
        for i in 1..z.dim {
            z.set(i, 0, Bound::INFINITY);
        }
        z
    }

    /// Past closure, restricted to non-negative valuations.
    pub fn down(&self) -> Zone {
        let mut z = self.clone();
        if z.is_empty() {
            return z;
        }
        for j in 1..z.dim {
            z.set(0, j, Bound::ZERO);
        }
        z.canonicalize();
        z
    }

    /// Pins `clock` to `value`; other differences are kept.
    pub fn reset(&self, clock: usize, value: i32) -> Zone {
        assert!(clock > 0 && clock < self.dim, "clock index {clock} out of range");
        let mut z = self.clone();
        if z.is_empty() {
            return z;
        }
        for j in 0..z.dim {
            if j == clock {
                continue;
            }
            let up = Bound::le(value).add(z.get(0, j));
            let down = z.get(j, 0).add(Bound::le(-value));
            z.set(clock, j, up);
            z.set(j, clock, down);
        }
        z.set(clock, clock, Bound::ZERO);
        z
    }

    /// Drops every constraint on `clock` except non-negativity.
    pub fn free(&self, clock: usize) -> Zone {
        assert!(clock > 0 && clock < self.dim, "clock index {clock} out of range");
        let mut z = self.clone();
        if z.is_empty() {
            return z;
        }
        for j in 0..z.dim {
            if j != clock {
                z.set(clock, j, Bound::INFINITY);
                let b = z.get(j, 0);
                z.set(j, clock, b);
            }
        }
        z
    }

    /// True iff every valuation of `other` lies in `self`.
    pub fn includes(&self, other: &Zone) -> Result<bool, ZoneError> {
        if self.dim != other.dim {
            return Err(ZoneError::DimensionMismatch(self.dim, other.dim));
        }
        if other.is_empty() {
            return Ok(true);
        }
        if self.is_empty() {
            return Ok(false);
        }
        Ok(other.m.iter().zip(&self.m).all(|(o, s)| o <= s))
    }

    /// Classic maximal-constant extrapolation. `max_const[k]` applies to
    /// clock `k`; index 0 is ignored.
    pub fn extrapolate(&self, max_const: &[i32]) -> Zone {
        let mut z = self.clone();
        if z.is_empty() {
            return z;
        }
        let bound_of = |k: usize| if k == 0 { 0 } else { max_const.get(k).copied().unwrap_or(0) };
        let mut changed = false;
        for i in 0..z.dim {
            let mi = bound_of(i);
            for j in 0..z.dim {
                if i == j {
                    continue;
                }
                let b = z.get(i, j);
                if b.is_infinite() {
                    continue;
                }
                if b > Bound::le(mi) {
                    z.set(i, j, Bound::INFINITY);
                    changed = true;
                } else {
                    let floor = Bound::lt(-bound_of(j));
                    if b < floor {
                        z.set(i, j, floor);
                        changed = true;
                    }
                }
            }
        }
        if changed {
            z.canonicalize();
        }
        z
    }

    /// `self \ other` as a list of pairwise-disjoint zones.
    pub fn subtract(&self, other: &Zone) -> Vec<Zone> {
        assert_eq!(self.dim, other.dim);
        if self.is_empty() {
            return Vec::new();
        }
        if other.is_empty() {
            return vec![self.clone()];
        }
        if self.intersection(other).is_empty() {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rest = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i == j {
                    continue;
                }
                let b = other.get(i, j);
                if b.is_infinite() || rest.get(i, j) <= b {
                    continue;
                }
                let outside = {
                    let mut z = rest.clone();
                    z.constrain(j, i, b.negate());
                    z
                };
                if !outside.is_empty() {
                    out.push(outside);
                }
                rest.constrain(i, j, b);
                if rest.is_empty() {
                    return out;
                }
            }
        }
        out
    }

    /// Membership of the valuation `vals / scale` (clock `k` at `vals[k-1]`).
    pub fn contains_scaled(&self, vals: &[i64], scale: i64) -> bool {
        assert_eq!(vals.len(), self.num_clocks());
        if self.is_empty() {
            return false;
        }
        let v = |k: usize| if k == 0 { 0 } else { vals[k - 1] };
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j).admits_scaled(v(i) - v(j), scale)))
    }

    pub fn contains_integer(&self, vals: &[i64]) -> bool {
        self.contains_scaled(vals, 1)
    }

    /// Whether some clock can grow without bound.
    pub fn is_unbounded(&self) -> bool {
        !self.is_empty() && (1..self.dim).any(|i| self.get(i, 0).is_infinite())
    }

    /// Non-trivial constraints of the canonical matrix, in row-major order.
    pub fn constraints(&self) -> Vec<ClockAtom> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let b = self.get(i, j);
                if i == j || b.is_infinite() || (i == 0 && b == Bound::ZERO) {
                    continue;
                }
                out.push(ClockAtom::new(i, j, b));
            }
        }
        out
    }

    /// Renders the zone with the given clock names (index 0 unused).
    pub fn render(&self, names: &[String]) -> String {
        if self.is_empty() {
            return "false".to_string();
        }
        let parts: Vec<String> = self.constraints().iter().map(|a| render_atom(a, names)).collect();
        if parts.is_empty() {
            "true".to_string()
        } else {
            parts.join(", ")
        }
    }
}

pub fn render_atom(a: &ClockAtom, names: &[String]) -> String {
    let name = |k: usize| names.get(k).cloned().unwrap_or_else(|| format!("x{k}"));
    let op = if a.bound.is_strict() { "<" } else { "<=" };
    if a.j == 0 {
        format!("{}{}{}", name(a.i), op, a.bound.value())
    } else if a.i == 0 {
        let op = if a.bound.is_strict() { ">" } else { ">=" };
        format!("{}{}{}", name(a.j), op, -a.bound.value())
    } else {
        format!("{}-{}{}{}", name(a.i), name(a.j), op, a.bound.value())
    }
}

impl fmt::Debug for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        write!(f, "Zone{{{}}}", self.render(&names))
    }
}

impl PartialOrd for Zone {
    /// Inclusion order; `None` for incomparable zones.
    fn partial_cmp(&self, other: &Zone) -> Option<Ordering> {
        let a = self.includes(other).ok()?;
        let b = other.includes(self).ok()?;
        match (a, b) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Greater),
            (false, true) => Some(Ordering::Less),
            (false, false) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(z: &Zone, v: &[i64]) -> bool {
        z.contains_integer(v)
    }

    #[test]
    fn bound_order_and_sum() {
        assert!(Bound::lt(3) < Bound::le(3));
        assert!(Bound::le(3) < Bound::lt(4));
        assert!(Bound::le(100) < Bound::INFINITY);
        assert_eq!(Bound::le(2).add(Bound::lt(3)), Bound::lt(5));
        assert_eq!(Bound::le(-2).add(Bound::le(3)), Bound::le(1));
        assert_eq!(Bound::lt(-4).value(), -4);
        assert!(Bound::lt(-4).is_strict());
    }

    #[test]
    fn init_is_origin() {
        let z = Zone::init(2);
        assert!(x(&z, &[0, 0]));
        assert!(!x(&z, &[1, 0]));
        assert!(!z.is_empty());
        let z0 = Zone::init(0);
        assert_eq!(z0.dim(), 1);
        assert!(!z0.is_empty());
        let z1 = Zone::init(1);
        assert!(x(&z1, &[0]));
        assert!(!x(&z1, &[1]));
    }

    #[test]
    fn up_from_origin_keeps_clocks_equal() {
        let z = Zone::init(2).up();
        assert!(x(&z, &[7, 7]));
        assert!(!x(&z, &[7, 6]));
        let shifted = Zone::init(2).reset(1, 1).up();
        assert!(x(&shifted, &[4, 3]));
        assert!(!x(&shifted, &[0, 0]));
        assert_eq!(shifted.get(1, 2), Bound::le(1));
        assert_eq!(shifted.get(2, 1), Bound::le(-1));
    }

    #[test]
    fn and_cases() {
        let z = Zone::unconstrained(1).and(&vec![ClockAtom::upper(1, Bound::le(5))].into());
        assert!(x(&z, &[5]) && !x(&z, &[6]) && x(&z, &[0]));
        let e = Zone::init(1).and(&vec![ClockAtom::lower(1, 2, false)].into());
        assert!(e.is_empty());
    }

    #[test]
    fn reset_keeps_other_differences() {
        // {1 <= x <= 3, y = x}
        let z = Zone::init(2).up().and(&vec![ClockAtom::lower(1, 1, false), ClockAtom::upper(1, Bound::le(3))].into());
        let r = z.reset(1, 0);
        assert!(x(&r, &[0, 1]) && x(&r, &[0, 3]));
        assert!(!x(&r, &[0, 0]) && !x(&r, &[1, 2]));
        assert!(Zone::empty(2).reset(1, 0).is_empty());
    }

    #[test]
    fn inclusion() {
        let a = Zone::unconstrained(1).and(&vec![ClockAtom::upper(1, Bound::le(5))].into());
        let b = Zone::unconstrained(1).and(&vec![ClockAtom::upper(1, Bound::le(3))].into());
        assert_eq!(a.includes(&b), Ok(true));
        assert_eq!(b.includes(&a), Ok(false));
        let origin = Zone::init(1);
        let c = Zone::unconstrained(1).and(&vec![ClockAtom::upper(1, Bound::le(1))].into());
        assert_eq!(origin.includes(&c), Ok(false));
        assert_eq!(origin.includes(&Zone::init(2)), Err(ZoneError::DimensionMismatch(2, 3)));
    }

    #[test]
    fn extrapolation() {
        let seven = Zone::init(1).up().and(&vec![ClockAtom::upper(1, Bound::le(7)), ClockAtom::lower(1, 7, false)].into());
        let e = seven.extrapolate(&[0, 5]);
        assert_eq!(e.get(1, 0), Bound::INFINITY);
        assert_eq!(e.get(0, 1), Bound::lt(-5));
        assert!(!x(&e, &[5]) && x(&e, &[6]) && x(&e, &[100]));
        let three = Zone::init(1).up().and(&vec![ClockAtom::upper(1, Bound::le(3)), ClockAtom::lower(1, 3, false)].into());
        assert_eq!(three.extrapolate(&[0, 5]), three);
    }

    #[test]
    fn subtract_partitions() {
        let a = Zone::unconstrained(1).and(&vec![ClockAtom::upper(1, Bound::le(10))].into());
        let b = Zone::unconstrained(1).and(&vec![ClockAtom::lower(1, 3, false), ClockAtom::upper(1, Bound::lt(5))].into());
        let parts = a.subtract(&b);
        for v in 0..=22 {
            let inside_a = a.contains_scaled(&[v], 2);
            let inside_b = b.contains_scaled(&[v], 2);
            let hits = parts.iter().filter(|p| p.contains_scaled(&[v], 2)).count();
            assert_eq!(hits, usize::from(inside_a && !inside_b), "v={v}/2");
        }
    }

    #[test]
    fn down_reaches_origin() {
        let z = Zone::init(2).up().and(&vec![ClockAtom::lower(1, 4, false)].into());
        let d = z.down();
        assert!(x(&d, &[0, 0]) && x(&d, &[9, 9]) && !x(&d, &[1, 0]));
    }
}
