//! DBM operations against an explicit enumeration of clock valuations.
//!
//! Zones are built from random difference constraints with constants in
//! [-10, 10] over two clocks. The oracle keeps those constraints and decides
//! membership directly; the existential operations (up, down, reset, free)
//! are decided by solving the one-dimensional constraint system exactly.
//! Valuations are enumerated on a grid of step 1/3, which meets every
//! region of two clocks, so set equality on the grid is set equality.

use std::cmp::Ordering;
use std::collections::HashSet;

use platoon_core::zones::{Bound, ClockAtom, Zone};
use proptest::prelude::*;
use proptest::test_runner::TestRunner;

const N: usize = 2;
const S: i64 = 3;
const BOX: i64 = 30;

#[derive(Clone, Debug)]
struct Atom {
    i: usize,
    j: usize,
    c: i64,
    strict: bool,
}

fn at(p: &[i64], k: usize) -> i64 {
    if k == 0 {
        0
    } else {
        p[k - 1]
    }
}

fn sat(atoms: &[Atom], p: &[i64]) -> bool {
    p.iter().all(|&v| v >= 0)
        && atoms.iter().all(|a| {
            let d = at(p, a.i) - at(p, a.j);
            if a.strict {
                d < a.c * S
            } else {
                d <= a.c * S
            }
        })
}

/// `t ≺ num/den` or `t ≻ num/den`, `den > 0`.
#[derive(Clone, Copy)]
struct Frac {
    num: i64,
    den: i64,
    strict: bool,
}

fn cmp(a: Frac, b: Frac) -> Ordering {
    (a.num * b.den).cmp(&(b.num * a.den))
}

/// Is there a real `t >= 0` with `base + coef * t` satisfying `atoms`?
fn exists(atoms: &[Atom], base: &[i64], coef: &[i64]) -> bool {
    let mut lo = Frac { num: 0, den: 1, strict: false };
    let mut hi: Option<Frac> = None;
    let mut rows: Vec<(usize, usize, i64, bool)> = atoms.iter().map(|a| (a.i, a.j, a.c * S, a.strict)).collect();
    for k in 1..=N {
        rows.push((0, k, 0, false));
    }
    for (i, j, c, strict) in rows {
        let a = at(coef, i) - at(coef, j);
        let r = c - (at(base, i) - at(base, j));
        match a.cmp(&0) {
            Ordering::Equal => {
                if (strict && r <= 0) || (!strict && r < 0) {
                    return false;
                }
            }
            Ordering::Greater => {
                let f = Frac { num: r, den: a, strict };
                hi = Some(match hi {
                    Some(h) if cmp(h, f) == Ordering::Less || (cmp(h, f) == Ordering::Equal && h.strict) => h,
                    _ => f,
                });
            }
            Ordering::Less => {
                let f = Frac { num: -r, den: -a, strict };
                if cmp(f, lo) == Ordering::Greater || (cmp(f, lo) == Ordering::Equal && strict) {
                    lo = f;
                }
            }
        }
    }
    match hi {
        None => true,
        Some(h) => match cmp(lo, h) {
            Ordering::Less => true,
            Ordering::Equal => !lo.strict && !h.strict,
            Ordering::Greater => false,
        },
    }
}

fn in_up(atoms: &[Atom], p: &[i64]) -> bool {
    exists(atoms, p, &[-1; N])
}

fn in_down(atoms: &[Atom], p: &[i64]) -> bool {
    exists(atoms, p, &[1; N])
}

fn in_free(atoms: &[Atom], p: &[i64], x: usize) -> bool {
    let mut base = p.to_vec();
    base[x - 1] = 0;
    let mut coef = [0; N];
    coef[x - 1] = 1;
    exists(atoms, &base, &coef)
}

fn in_reset(atoms: &[Atom], p: &[i64], x: usize, c: i64) -> bool {
    p[x - 1] == c * S && in_free(atoms, p, x)
}

fn zone_of(atoms: &[Atom]) -> Zone {
    atoms.iter().fold(Zone::unconstrained(N), |z, a| z.and_atom(&ClockAtom::new(a.i, a.j, Bound::new(a.c as i32, a.strict))))
}

fn grid() -> impl Iterator<Item = [i64; N]> {
    (0..=BOX * S).flat_map(|x| (0..=BOX * S).map(move |y| [x, y]))
}

fn canonical(z: &Zone) -> bool {
    let mut c = z.clone();
    c.canonicalize();
    c == *z
}

/// Region of `p` for per-clock maxima `m` (index 0 unused).
fn region(p: &[i64], m: &[i32]) -> Vec<i64> {
    let bounded: Vec<bool> = (0..N).map(|k| p[k] <= m[k + 1] as i64 * S).collect();
    let mut key = Vec::new();
    for k in 0..N {
        if bounded[k] {
            key.extend([p[k] / S, (p[k] % S == 0) as i64]);
        } else {
            key.extend([-1, -1]);
        }
    }
    for a in 0..N {
        for b in a + 1..N {
            if bounded[a] && bounded[b] {
                key.push((p[a] % S).cmp(&(p[b] % S)) as i64);
            }
        }
    }
    key
}

fn atom() -> impl Strategy<Value = Atom> {
    (0..=N, 0..=N, -10i64..=10, any::<bool>()).prop_filter("distinct clocks", |(i, j, _, _)| i != j).prop_map(|(i, j, c, strict)| Atom {
        i,
        j,
        c,
        strict,
    })
}

/// Runs `cases` random instances; the error names the first disagreement.
pub fn dbm_suite(cases: u32) -> Result<(), String> {
    let strategy = (prop::collection::vec(atom(), 0..5), prop::collection::vec(atom(), 0..5), 1..=N, 0i64..=10, prop::collection::vec(0i32..=10, N));
    let mut runner = TestRunner::new(ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() });
    runner
        .run(&strategy, |(a1, a2, x, c, m)| {
            let z1 = zone_of(&a1);
            let z2 = zone_of(&a2);
            let mut max = vec![0];
            max.extend(&m);
            let meet = z1.intersection(&z2);
            let up = z1.up();
            let down = z1.down();
            let reset = z1.reset(x, c as i32);
            let free = z1.free(x);
            let extra = z1.extrapolate(&max);
            let diff = z1.subtract(&z2);
            for z in [&z1, &z2, &meet, &up, &down, &reset, &free, &extra].into_iter().chain(&diff) {
                prop_assert!(canonical(z), "not canonical: {:?}", z);
            }

            let both: Vec<Atom> = a1.iter().chain(&a2).cloned().collect();
            let mut any1 = false;
            let mut sub = true;
            let mut sup = true;
            let mut regions1 = HashSet::new();
            let mut extra_points = Vec::new();
            for p in grid() {
                let s1 = sat(&a1, &p);
                let s2 = sat(&a2, &p);
                any1 |= s1;
                if s2 && !s1 {
                    sub = false;
                }
                if s1 && !s2 {
                    sup = false;
                }
                if s1 {
                    regions1.insert(region(&p, &max));
                }
                prop_assert_eq!(z1.contains_scaled(&p, S), s1, "member {:?}", p);
                prop_assert_eq!(meet.contains_scaled(&p, S), sat(&both, &p), "and {:?}", p);
                prop_assert_eq!(up.contains_scaled(&p, S), in_up(&a1, &p), "up {:?}", p);
                prop_assert_eq!(down.contains_scaled(&p, S), in_down(&a1, &p), "down {:?}", p);
                prop_assert_eq!(reset.contains_scaled(&p, S), in_reset(&a1, &p, x, c), "reset {:?}", p);
                prop_assert_eq!(free.contains_scaled(&p, S), in_free(&a1, &p, x), "free {:?}", p);
                let pieces = diff.iter().filter(|d| d.contains_scaled(&p, S)).count();
                prop_assert_eq!(pieces, (s1 && !s2) as usize, "subtract {:?}", p);
                let e = extra.contains_scaled(&p, S);
                prop_assert!(!s1 || e, "extrapolation lost {:?}", p);
                if e {
                    extra_points.push(p);
                }
            }
            prop_assert_eq!(z1.is_empty(), !any1);
            prop_assert_eq!(z2.includes(&z1).unwrap(), sup);
            prop_assert_eq!(z1.includes(&z2).unwrap(), sub);
            for p in extra_points {
                prop_assert!(regions1.contains(&region(&p, &max)), "extrapolation left the closure at {:?}", p);
            }

            // monotonicity of up and reset
            prop_assert!(z1.includes(&meet).unwrap());
            prop_assert!(up.includes(&meet.up()).unwrap());
            prop_assert!(reset.includes(&meet.reset(x, c as i32)).unwrap());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

#[test]
fn dbm_matches_enumeration() {
    dbm_suite(1000).unwrap();
}
