//! Arbitrary-precision binary floating point with directed rounding, and
//! closed intervals whose endpoints are rounded outward.
//!
//! A [`Float`] is an exact dyadic rational `±m·2^e`. Every arithmetic
//! operation takes a target precision (mantissa bits) and a [`Round`]
//! direction, so lower bounds can be rounded down and upper bounds up.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

/// Working precision in mantissa bits.
pub type Precision = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Round {
    Down,
    Up,
}

/// Exact dyadic rational `±mant·2^exp`, kept with an odd mantissa so that
/// structural equality is numeric equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Float {
    neg: bool,
    mant: BigUint,
    exp: i64,
}

impl Float {
    pub fn zero() -> Self {
        Float { neg: false, mant: BigUint::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Float::from_u64(1)
    }

    pub fn from_u64(v: u64) -> Self {
        Float::from_parts(false, BigUint::from(v), 0)
    }

    pub fn from_i64(v: i64) -> Self {
        Float::from_parts(v < 0, BigUint::from(v.unsigned_abs()), 0)
    }

    /// `2^e`.
    pub fn pow2(e: i64) -> Self {
        Float { neg: false, mant: BigUint::one(), exp: e }
    }

    pub fn from_parts(neg: bool, mant: BigUint, exp: i64) -> Self {
        let mut f = Float { neg, mant, exp };
        f.normalize();
        f
    }

    /// Exact conversion; panics on NaN or infinity.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite float");
        if x == 0.0 {
            return Float::zero();
        }
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        Float::from_parts(neg, BigUint::from(mant), exp)
    }

    fn normalize(&mut self) {
        match self.mant.trailing_zeros() {
            None => {
                self.neg = false;
                self.exp = 0;
            }
            Some(0) => {}
            Some(tz) => {
                self.mant >>= tz;
                self.exp += tz as i64;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn is_positive(&self) -> bool {
        !self.neg && !self.is_zero()
    }

    /// Number of significant mantissa bits.
    pub fn bits(&self) -> u64 {
        self.mant.bits()
    }

    /// Exponent of the leading bit: `|self|` lies in `[2^msb, 2^(msb+1))`.
    fn msb(&self) -> i64 {
        self.exp + self.mant.bits() as i64 - 1
    }

    pub fn neg(&self) -> Self {
        let mut f = self.clone();
        if !f.is_zero() {
            f.neg = !f.neg;
        }
        f
    }

    pub fn abs(&self) -> Self {
        Float { neg: false, mant: self.mant.clone(), exp: self.exp }
    }

    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Float::zero();
        }
        Float { neg: self.neg, mant: self.mant.clone(), exp: self.exp + k }
    }

    /// Rounds to at most `prec` significant bits in direction `dir`.
    pub fn round(mut self, prec: Precision, dir: Round) -> Self {
        debug_assert!(prec >= 1);
        let bits = self.mant.bits();
        if bits <= prec as u64 {
            return self;
        }
        let shift = bits - prec as u64;
        // Mantissa is odd, so any nonzero shift discards a set bit.
        let mut kept = &self.mant >> shift;
        let away = matches!((dir, self.neg), (Round::Up, false) | (Round::Down, true));
        if away {
            kept += 1u32;
        }
        self.mant = kept;
        self.exp += shift as i64;
        self.normalize();
        self
    }

    fn add_exact(a: &Float, b: &Float) -> Float {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        let e = a.exp.min(b.exp);
        let ma = &a.mant << (a.exp - e) as u64;
        let mb = &b.mant << (b.exp - e) as u64;
        if a.neg == b.neg {
            return Float::from_parts(a.neg, ma + mb, e);
        }
        match ma.cmp(&mb) {
            Ordering::Equal => Float::zero(),
            Ordering::Greater => Float::from_parts(a.neg, ma - mb, e),
            Ordering::Less => Float::from_parts(b.neg, mb - ma, e),
        }
    }

    pub fn add(&self, other: &Float, prec: Precision, dir: Round) -> Float {
        let (big, small) = if self.is_zero() || (!other.is_zero() && other.msb() > self.msb()) {
            (other, self)
        } else {
            (self, other)
        };
        // A summand far below the rounding granularity of a representable
        // `big` only decides the rounding side; replace it by a sticky bit.
        if !small.is_zero()
            && big.bits() <= prec as u64
            && small.msb() <= big.msb() - prec as i64 - 2
        {
            let sticky = Float { neg: small.neg, mant: BigUint::one(), exp: big.msb() - prec as i64 - 2 };
            return Float::add_exact(big, &sticky).round(prec, dir);
        }
        Float::add_exact(big, small).round(prec, dir)
    }

    pub fn sub(&self, other: &Float, prec: Precision, dir: Round) -> Float {
        self.add(&other.neg(), prec, dir)
    }

    pub fn mul(&self, other: &Float, prec: Precision, dir: Round) -> Float {
        if self.is_zero() || other.is_zero() {
            return Float::zero();
        }
        Float::from_parts(self.neg != other.neg, &self.mant * &other.mant, self.exp + other.exp)
            .round(prec, dir)
    }

    /// Quotient rounded in direction `dir`; `None` when dividing by zero.
    pub fn div(&self, other: &Float, prec: Precision, dir: Round) -> Option<Float> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Float::zero());
        }
        let want = prec as i64 + 2 + other.bits() as i64 - self.bits() as i64;
        let shift = want.max(0) as u64;
        let num = &self.mant << shift;
        let (q, r) = num.div_rem(&other.mant);
        let mut exp = self.exp - shift as i64 - other.exp;
        let mant = if r.is_zero() {
            q
        } else {
            // Sticky bit: strictly between q and q+1, below the rounding position.
            exp -= 1;
            (q << 1u32) + 1u32
        };
        Some(Float::from_parts(self.neg != other.neg, mant, exp).round(prec, dir))
    }

    /// `num/den` rounded in direction `dir`.
    pub fn from_ratio(num: &BigUint, den: &BigUint, prec: Precision, dir: Round) -> Option<Float> {
        Float::from_parts(false, num.clone(), 0).div(&Float::from_parts(false, den.clone(), 0), prec, dir)
    }

    /// Exact midpoint of two floats.
    pub fn midpoint(a: &Float, b: &Float) -> Float {
        Float::add_exact(a, b).mul_pow2(-1)
    }

    pub fn min(a: &Float, b: &Float) -> Float {
        if a <= b { a.clone() } else { b.clone() }
    }

    pub fn max(a: &Float, b: &Float) -> Float {
        if a >= b { a.clone() } else { b.clone() }
    }

    /// `floor(self · 2^p)` for nonnegative values; negative values give zero.
    pub fn floor_scaled(&self, p: u32) -> BigUint {
        if self.neg || self.is_zero() {
            return BigUint::zero();
        }
        let e = self.exp + p as i64;
        if e >= 0 {
            &self.mant << e as u64
        } else {
            &self.mant >> (-e) as u64
        }
    }

    /// Nearest-ish `f64` (truncates beyond 64 leading bits). Used for
    /// reporting and for the numeric tuning loop, never for certification.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits();
        let shift = bits.saturating_sub(64);
        let top = (&self.mant >> shift).to_u64().unwrap_or(u64::MAX) as f64;
        let v = ldexp(top, self.exp + shift as i64);
        if self.neg { -v } else { v }
    }

    /// `|self| · 10^scale`, rounded to an integer so that the rendered signed
    /// value lies on the `dir` side of `self`.
    fn scaled_decimal(&self, scale: i64, dir: Round) -> BigUint {
        let ten = BigUint::from(10u32);
        let (mut num, mut den) = (self.mant.clone(), BigUint::one());
        if scale >= 0 {
            num *= num_traits::pow(ten, scale as usize);
        } else {
            den *= num_traits::pow(ten, (-scale) as usize);
        }
        if self.exp >= 0 {
            num <<= self.exp as u64;
        } else {
            den <<= (-self.exp) as u64;
        }
        let (mut q, r) = num.div_rem(&den);
        let away = matches!((dir, self.neg), (Round::Up, false) | (Round::Down, true));
        if away && !r.is_zero() {
            q += 1u32;
        }
        q
    }

    /// Decimal rendering with `digits` significant digits, rounded in
    /// direction `dir` so that the printed value bounds `self`.
    pub fn to_decimal(&self, digits: u32, dir: Round) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let digits = digits.max(1) as i64;
        // Decimal exponent estimate of the leading digit, corrected below.
        let mut lead = <f64 as num_traits::Float>::floor(self.msb() as f64 * core::f64::consts::LOG10_2) as i64;
        let (q, scale) = loop {
            let scale = digits - 1 - lead;
            let q = self.scaled_decimal(scale, dir);
            let len = q.to_str_radix(10).len() as i64;
            if len > digits {
                lead += 1;
            } else if len < digits && lead > i64::MIN / 2 {
                let lower = self.scaled_decimal(scale + 1, dir);
                if lower.to_str_radix(10).len() as i64 > digits {
                    break (q, scale);
                }
                lead -= 1;
            } else {
                break (q, scale);
            }
        };
        let mut s = q.to_str_radix(10);
        let mut exp10 = -scale;
        // Drop trailing zeros into the exponent.
        while s.len() > 1 && s.ends_with('0') {
            s.pop();
            exp10 += 1;
        }
        let sign = if self.neg { "-" } else { "" };
        format_decimal(sign, &s, exp10)
    }
}

/// Renders `digits · 10^exp10`.
fn format_decimal(sign: &str, digits: &str, exp10: i64) -> String {
    let n = digits.len() as i64;
    let point = n + exp10; // position of the decimal point from the left
    if exp10 >= 0 && point <= 21 {
        let mut out = String::from(sign);
        out.push_str(digits);
        for _ in 0..exp10 {
            out.push('0');
        }
        out
    } else if point > 0 && exp10 < 0 {
        let (int, frac) = digits.split_at(point as usize);
        alloc::format!("{sign}{int}.{frac}")
    } else if point <= 0 && point > -6 {
        let mut out = alloc::format!("{sign}0.");
        for _ in 0..(-point) {
            out.push('0');
        }
        out.push_str(digits);
        out
    } else {
        let (first, rest) = digits.split_at(1);
        let e = point - 1;
        if rest.is_empty() {
            alloc::format!("{sign}{first}e{e}")
        } else {
            alloc::format!("{sign}{first}.{rest}e{e}")
        }
    }
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    let big = f64::from_bits(2046 << 52); // 2^1023
    let small = f64::from_bits(1 << 52); // 2^-1022
    while e > 1023 {
        x *= big;
        e -= 1023;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1022 {
        x *= small;
        e += 1022;
        if x == 0.0 {
            return x;
        }
    }
    x * f64::from_bits(((e + 1023) as u64) << 52)
}

impl Ord for Float {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return if other.neg { Ordering::Greater } else { Ordering::Less },
            (false, true) => return if self.neg { Ordering::Less } else { Ordering::Greater },
            _ => {}
        }
        if self.neg != other.neg {
            return if self.neg { Ordering::Less } else { Ordering::Greater };
        }
        let mag = match self.msb().cmp(&other.msb()) {
            Ordering::Equal => {
                let e = self.exp.min(other.exp);
                let a = &self.mant << (self.exp - e) as u64;
                let b = &other.mant << (other.exp - e) as u64;
                a.cmp(&b)
            }
            o => o,
        };
        if self.neg { mag.reverse() } else { mag }
    }
}

impl PartialOrd for Float {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Float {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(20, Round::Down))
    }
}

impl fmt::Display for Float {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(17, Round::Down))
    }
}

/// Closed interval `[lo, hi]` with outward-rounded endpoints.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Float,
    hi: Float,
}

impl Interval {
    pub fn new(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(v: Float) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn zero() -> Self {
        Interval::point(Float::zero())
    }

    pub fn one() -> Self {
        Interval::point(Float::one())
    }

    pub fn from_u64(v: u64) -> Self {
        Interval::point(Float::from_u64(v))
    }

    /// Enclosure of `num/den`, at most one unit in the last place wide.
    pub fn from_ratio(num: &BigUint, den: &BigUint, prec: Precision) -> Option<Self> {
        Some(Interval {
            lo: Float::from_ratio(num, den, prec, Round::Down)?,
            hi: Float::from_ratio(num, den, prec, Round::Up)?,
        })
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: &Float) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(&Float::zero())
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = Float::max(&self.lo, &other.lo);
        let hi = Float::min(&self.hi, &other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// `hi - lo`, rounded up.
    pub fn width(&self, prec: Precision) -> Float {
        self.hi.sub(&self.lo, prec, Round::Up)
    }

    pub fn midpoint(&self) -> Float {
        Float::midpoint(&self.lo, &self.hi)
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    pub fn add(&self, o: &Interval, prec: Precision) -> Interval {
        Interval {
            lo: self.lo.add(&o.lo, prec, Round::Down),
            hi: self.hi.add(&o.hi, prec, Round::Up),
        }
    }

    pub fn sub(&self, o: &Interval, prec: Precision) -> Interval {
        Interval {
            lo: self.lo.sub(&o.hi, prec, Round::Down),
            hi: self.hi.sub(&o.lo, prec, Round::Up),
        }
    }

    pub fn mul(&self, o: &Interval, prec: Precision) -> Interval {
        if !self.lo.is_negative() && !o.lo.is_negative() {
            return Interval {
                lo: self.lo.mul(&o.lo, prec, Round::Down),
                hi: self.hi.mul(&o.hi, prec, Round::Up),
            };
        }
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let lo = pairs.iter().map(|(a, b)| a.mul(b, prec, Round::Down)).min().unwrap();
        let hi = pairs.iter().map(|(a, b)| a.mul(b, prec, Round::Up)).max().unwrap();
        Interval { lo, hi }
    }

    /// Quotient enclosure; `None` if the divisor contains zero.
    pub fn div(&self, o: &Interval, prec: Precision) -> Option<Interval> {
        if o.contains_zero() {
            return None;
        }
        if !self.lo.is_negative() && o.lo.is_positive() {
            return Some(Interval {
                lo: self.lo.div(&o.hi, prec, Round::Down)?,
                hi: self.hi.div(&o.lo, prec, Round::Up)?,
            });
        }
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let d = a.div(b, prec, Round::Down)?;
            let u = a.div(b, prec, Round::Up)?;
            lo = Some(match lo { Some(l) if l <= d => l, _ => d });
            hi = Some(match hi { Some(h) if h >= u => h, _ => u });
        }
        Some(Interval { lo: lo?, hi: hi? })
    }

    /// Multiplies by a nonnegative integer.
    pub fn scale(&self, k: u64, prec: Precision) -> Interval {
        self.mul(&Interval::from_u64(k), prec)
    }

    /// Integer power of a nonnegative interval.
    pub fn pow(&self, k: u64, prec: Precision) -> Interval {
        debug_assert!(!self.lo.is_negative());
        let mut acc = Interval::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base, prec);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base, prec);
            }
        }
        acc
    }

    /// Coarsens both endpoints outward to `prec` bits.
    pub fn round_out(&self, prec: Precision) -> Interval {
        Interval { lo: self.lo.clone().round(prec, Round::Down), hi: self.hi.clone().round(prec, Round::Up) }
    }

    pub fn to_f64(&self) -> f64 {
        self.midpoint().to_f64()
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.to_decimal(20, Round::Down), self.hi.to_decimal(20, Round::Up))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.to_decimal(17, Round::Down), self.hi.to_decimal(17, Round::Up))
    }
}

/// Exact positive rational parsed from user input such as `0.48`, `1/3`
/// or `2.5e-3`. Binary floating-point literals never enter the engine.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: BigUint,
    den: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid number `{0}`: expected a decimal or `p/q` rational")]
pub struct RatioParseError(pub String);

impl Ratio {
    pub fn new(num: BigUint, den: BigUint) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        let g = num.gcd(&den);
        if g.is_zero() {
            return Some(Ratio { num, den });
        }
        Some(Ratio { num: &num / &g, den: &den / &g })
    }

    pub fn from_integer(n: u64) -> Self {
        Ratio { num: BigUint::from(n), den: BigUint::one() }
    }

    /// Exact value of a finite nonnegative double.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        let f = Float::from_f64(x);
        if f.exp >= 0 {
            Ratio::new(&f.mant << f.exp as u64, BigUint::one())
        } else {
            Ratio::new(f.mant.clone(), BigUint::one() << (-f.exp) as u64)
        }
    }

    /// Shortest decimal with `digits` significant digits closest to `x`.
    pub fn from_f64_decimal(x: f64, digits: u32) -> Option<Self> {
        let f = Float::from_f64(x);
        let text = f.to_decimal(digits, Round::Down);
        text.parse().ok()
    }

    pub fn numer(&self) -> &BigUint {
        &self.num
    }

    pub fn denom(&self) -> &BigUint {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn mul(&self, o: &Ratio) -> Ratio {
        Ratio::new(&self.num * &o.num, &self.den * &o.den).unwrap()
    }

    /// `ceil` of the value.
    pub fn ceil(&self) -> BigUint {
        let (q, r) = self.num.div_rem(&self.den);
        if r.is_zero() { q } else { q + 1u32 }
    }

    pub fn floor(&self) -> BigUint {
        &self.num / &self.den
    }

    pub fn enclose(&self, prec: Precision) -> Interval {
        Interval::from_ratio(&self.num, &self.den, prec).expect("nonzero denominator")
    }

    pub fn to_f64(&self) -> f64 {
        Float::from_ratio(&self.num, &self.den, 64, Round::Down).map(|f| f.to_f64()).unwrap_or(0.0)
    }
}

impl core::str::FromStr for Ratio {
    type Err = RatioParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RatioParseError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: BigUint = n.trim().parse().map_err(|_| err())?;
            let d: BigUint = d.trim().parse().map_err(|_| err())?;
            return Ratio::new(n, d).ok_or_else(err);
        }
        let (mantissa, exp10) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i64>().map_err(|_| err())?),
            None => (t, 0),
        };
        let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if (int.is_empty() && frac.is_empty())
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || exp10.unsigned_abs() > 10_000
        {
            return Err(err());
        }
        let mut digits = String::from(int);
        digits.push_str(frac);
        let num: BigUint = if digits.is_empty() { BigUint::zero() } else { digits.parse().map_err(|_| err())? };
        let e = exp10 - frac.len() as i64;
        let ten = BigUint::from(10u32);
        if e >= 0 {
            Ratio::new(num * num_traits::pow(ten, e as usize), BigUint::one()).ok_or_else(err)
        } else {
            Ratio::new(num, num_traits::pow(ten, (-e) as usize)).ok_or_else(err)
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Terminating decimals print as decimals, everything else as p/q.
        let mut d = self.den.clone();
        let mut twos = 0u64;
        let mut fives = 0u64;
        while (&d % 2u32).is_zero() {
            d /= 2u32;
            twos += 1;
        }
        while (&d % 5u32).is_zero() {
            d /= 5u32;
            fives += 1;
        }
        if !d.is_one() {
            return write!(f, "{}/{}", self.num, self.den);
        }
        let places = twos.max(fives);
        let scaled = &self.num * num_traits::pow(BigUint::from(10u32), places as usize) / &self.den;
        let mut s = scaled.to_str_radix(10);
        if places == 0 {
            return f.write_str(&s);
        }
        while s.len() <= places as usize {
            s.insert(0, '0');
        }
        let split = s.len() - places as usize;
        let digits: Vec<char> = s.chars().collect();
        let int: String = digits[..split].iter().collect();
        let frac: String = digits[split..].iter().collect();
        write!(f, "{int}.{frac}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn third(prec: Precision) -> Interval {
        Interval::from_ratio(&BigUint::from(1u32), &BigUint::from(3u32), prec).unwrap()
    }

    #[test]
    fn rounding_brackets_one_third() {
        for prec in [8, 24, 53, 200] {
            let t = third(prec);
            // lo < 1/3 < hi  <=>  3 lo < 1 < 3 hi
            assert!(t.lo().mul(&Float::from_u64(3), 1000, Round::Down) < Float::one());
            assert!(t.hi().mul(&Float::from_u64(3), 1000, Round::Up) > Float::one());
            assert!(t.lo().bits() <= prec as u64 && t.hi().bits() <= prec as u64);
            // one ulp apart
            let w = t.width(1000);
            assert!(w <= Float::pow2(-(prec as i64) - 1));
        }
    }

    #[test]
    fn exact_values_stay_exact() {
        let x: Ratio = "0.25".parse().unwrap();
        let e = x.enclose(8);
        assert!(e.is_point());
        assert_eq!(e.lo(), &Float::pow2(-2));
    }

    #[test]
    fn add_with_far_summand_rounds_correctly() {
        let one = Float::one();
        let tiny = Float::pow2(-500);
        assert_eq!(one.add(&tiny, 53, Round::Down), one);
        assert_eq!(one.add(&tiny, 53, Round::Up), Float::one().add(&Float::pow2(-52), 60, Round::Up));
        assert_eq!(one.sub(&tiny, 53, Round::Up), one);
        let below = one.sub(&tiny, 53, Round::Down);
        assert!(below < one && below == Float::one().sub(&Float::pow2(-53), 60, Round::Down));
    }

    #[test]
    fn division_is_directed() {
        let a = Float::from_u64(2);
        let b = Float::from_u64(3);
        let lo = a.div(&b, 30, Round::Down).unwrap();
        let hi = a.div(&b, 30, Round::Up).unwrap();
        assert!(lo < hi);
        assert!(lo.mul(&b, 100, Round::Down) < a);
        assert!(hi.mul(&b, 100, Round::Down) > a);
        assert_eq!(a.div(&Float::zero(), 30, Round::Down), None);
        let neg = a.neg().div(&b, 30, Round::Down).unwrap();
        assert_eq!(neg, hi.neg());
    }

    #[test]
    fn interval_mul_handles_signs() {
        let a = Interval::new(Float::from_i64(-2), Float::from_i64(3));
        let b = Interval::new(Float::from_i64(-5), Float::from_i64(1));
        let p = a.mul(&b, 53);
        assert_eq!(p.lo(), &Float::from_i64(-15));
        assert_eq!(p.hi(), &Float::from_i64(10));
        assert!(a.div(&b, 53).is_none());
    }

    #[test]
    fn decimal_rendering_bounds_value() {
        let t = third(53);
        assert_eq!(t.lo().to_decimal(10, Round::Down), "0.3333333333");
        assert_eq!(t.hi().to_decimal(10, Round::Up), "0.3333333334");
        assert_eq!(Float::from_u64(1000).to_decimal(5, Round::Down), "1000");
        assert_eq!(Float::pow2(-100).to_decimal(3, Round::Up), "7.89e-31");
        assert_eq!(Float::from_f64(-2.5).to_decimal(4, Round::Down), "-2.5");
    }

    #[test]
    fn ratio_parsing() {
        let r: Ratio = "0.48".parse().unwrap();
        assert_eq!((r.numer().clone(), r.denom().clone()), (BigUint::from(12u32), BigUint::from(25u32)));
        assert_eq!("1/3".parse::<Ratio>().unwrap().to_string(), "1/3");
        assert_eq!("2.5e-3".parse::<Ratio>().unwrap().to_string(), "0.0025");
        assert_eq!("1000".parse::<Ratio>().unwrap().to_string(), "1000");
        assert!("abc".parse::<Ratio>().is_err());
        assert!("1/0".parse::<Ratio>().is_err());
        assert!(".".parse::<Ratio>().is_err());
        assert_eq!(Ratio::from_f64(0.5).unwrap().to_string(), "0.5");
    }

    #[test]
    fn f64_round_trip() {
        for x in [0.1, 1e-300, 3.5e200, 0.48, 1.0 / 3.0] {
            assert_eq!(Float::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn floor_scaled_matches_bits() {
        let x = Float::from_f64(0.75);
        assert_eq!(x.floor_scaled(4), BigUint::from(12u32));
        assert_eq!(Float::from_f64(0.7).floor_scaled(1), BigUint::from(1u32));
    }
}
