//! Complex-number helpers: continuous logarithms along paths and the
//! `[re, im]` JSON encoding used by every file format in this crate.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Continues a logarithm of the nonvanishing function `f` along the straight
/// segment `from -> to`, starting from the value `log_start` at `from`.
///
/// Steps are bisected whenever the argument increment exceeds 0.5 rad, so the
/// result is the analytic continuation as long as `f` has no zero near the
/// segment.
pub fn continue_log<F>(f: F, from: C64, to: C64, log_start: C64, steps: usize) -> C64
where
    F: Fn(C64) -> C64,
{
    let steps = steps.max(1);
    let mut prev = f(from);
    let mut arg = log_start.im;
    for k in 1..=steps {
        let t0 = (k - 1) as f64 / steps as f64;
        let t1 = k as f64 / steps as f64;
        let (v, d) = arg_increment(&f, from, to, t0, t1, prev, 0);
        arg += d;
        prev = v;
    }
    C64::new(prev.norm().ln(), arg)
}

fn arg_increment<F>(f: &F, from: C64, to: C64, t0: f64, t1: f64, v0: C64, depth: u32) -> (C64, f64)
where
    F: Fn(C64) -> C64,
{
    let v1 = f(from + (to - from) * t1);
    let d = (v1 / v0).arg();
    if d.abs() <= 0.5 || depth >= 24 {
        return (v1, d);
    }
    let tm = 0.5 * (t0 + t1);
    let (vm, d0) = arg_increment(f, from, to, t0, tm, v0, depth + 1);
    let (v1, d1) = arg_increment(f, from, to, tm, t1, vm, depth + 1);
    (v1, d0 + d1)
}

/// Serde adapter: a complex number as a two-element array `[re, im]`.
pub mod pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

/// Serde adapter: a sequence of complex numbers as `[[re, im], ...]`.
pub mod pairs {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}
