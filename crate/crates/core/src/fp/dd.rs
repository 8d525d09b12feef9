//! Double-double kernels built from error-free transformations.
//!
//! Every routine here uses plain binary64 additions and multiplications only
//! (Dekker splitting instead of fused multiply-add), so results are identical
//! on every IEEE-754 platform.

/// `2^27 + 1`, the Veltkamp splitter for binary64.
const SPLITTER: f64 = 134_217_729.0;
/// Above this magnitude `SPLITTER * a` would overflow.
const SPLIT_THRESHOLD: f64 = 6.696_928_794_914_17e299; // 2^996
const SPLIT_DOWN: f64 = 3.725_290_298_461_914e-9; // 2^-28
const SPLIT_UP: f64 = 268_435_456.0; // 2^28

#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

// requires |a| >= |b| (or a == 0)
#[inline]
pub(crate) fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
pub(crate) fn split(a: f64) -> (f64, f64) {
    if a.abs() > SPLIT_THRESHOLD {
        let scaled = a * SPLIT_DOWN;
        let t = SPLITTER * scaled;
        let hi = t - (t - scaled);
        let lo = scaled - hi;
        (hi * SPLIT_UP, lo * SPLIT_UP)
    } else {
        let t = SPLITTER * a;
        let hi = t - (t - a);
        let lo = a - hi;
        (hi, lo)
    }
}

/// Exact product `a * b = p + err`.
#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    // the cross terms are summed together first so the result is symmetric in (a, b)
    let err = ((ah * bh - p) + (ah * bl + al * bh)) + al * bl;
    (p, err)
}

#[inline]
pub(crate) fn add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (s1, s2) = two_sum(a.0, b.0);
    if !s1.is_finite() {
        return (s1, 0.0);
    }
    let (t1, t2) = two_sum(a.1, b.1);
    let s2 = s2 + t1;
    let (s1, s2) = quick_two_sum(s1, s2);
    let s2 = s2 + t2;
    quick_two_sum(s1, s2)
}

#[inline]
pub(crate) fn neg(a: (f64, f64)) -> (f64, f64) {
    (-a.0, -a.1)
}

#[inline]
pub(crate) fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    add(a, neg(b))
}

#[inline]
pub(crate) fn mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (p1, p2) = two_prod(a.0, b.0);
    if !p1.is_finite() {
        return (p1, 0.0);
    }
    let p2 = p2 + (a.0 * b.1 + a.1 * b.0);
    quick_two_sum(p1, p2)
}

pub(crate) fn div(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let q1 = a.0 / b.0;
    if !q1.is_finite() {
        return (q1, 0.0);
    }
    let r = sub(a, mul(b, (q1, 0.0)));
    let q2 = r.0 / b.0;
    let r = sub(r, mul(b, (q2, 0.0)));
    let q3 = r.0 / b.0;
    let (q1, q2) = quick_two_sum(q1, q2);
    add((q1, q2), (q3, 0.0))
}
