//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries a value together with its gradient and (packed, symmetric)
//! Hessian with respect to up to [`MAX_DIM`] coordinates. Arithmetic on jets
//! propagates derivatives exactly, so composite fields (partner metrics, `L`
//! from a pair, Lie derivatives, ...) keep exact first and second partials.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest chart dimension supported by jets.
pub const MAX_DIM: usize = 6;
const HESS_LEN: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Derivative order carried by a jet or requested from a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Value = 0,
    First = 1,
    Second = 2,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// One order lower, saturating at `Value`.
    pub fn lower(self) -> Order {
        match self {
            Order::Second => Order::First,
            _ => Order::Value,
        }
    }

    pub fn raise(self) -> Order {
        match self {
            Order::Value => Order::First,
            _ => Order::Second,
        }
    }
}

#[inline]
pub(crate) fn hidx(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    // row-major packing of the upper triangle
    a * MAX_DIM - a * (a + 1) / 2 + b
}

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    d: [f64; MAX_DIM],
    h: [f64; HESS_LEN],
    order: Order,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet({}, d={:?}, {:?})", self.v, &self.d, self.order)
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::constant(0.0)
    }
}

impl Jet {
    pub fn constant(v: f64) -> Jet {
        Jet { v, d: [0.0; MAX_DIM], h: [0.0; HESS_LEN], order: Order::Value }
    }

    /// The coordinate function `x_index` evaluated at `v`.
    pub fn var(v: f64, index: usize, order: Order) -> Jet {
        let mut j = Jet::constant(v);
        j.order = order;
        if order >= Order::First {
            j.d[index] = 1.0;
        }
        j
    }

    /// Seeds one jet per coordinate of `x`.
    pub fn vars(x: &[f64], order: Order) -> Vec<Jet> {
        x.iter().enumerate().map(|(i, &v)| Jet::var(v, i, order)).collect()
    }

    pub fn from_parts(v: f64, grad: &[f64], hess: Option<&[Vec<f64>]>) -> Jet {
        let mut j = Jet::constant(v);
        j.order = Order::First;
        j.d[..grad.len()].copy_from_slice(grad);
        if let Some(h) = hess {
            j.order = Order::Second;
            for i in 0..h.len() {
                for k in i..h.len() {
                    j.h[hidx(i, k)] = h[i][k];
                }
            }
        }
        j
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn d(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.h[hidx(i, j)]
    }

    pub fn set_d(&mut self, i: usize, value: f64) {
        if self.order < Order::First {
            self.order = Order::First;
        }
        self.d[i] = value;
    }

    pub fn set_h(&mut self, i: usize, j: usize, value: f64) {
        self.order = Order::Second;
        self.h[hidx(i, j)] = value;
    }

    pub fn grad(&self, n: usize) -> Vec<f64> {
        self.d[..n].to_vec()
    }

    pub fn hessian(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| self.h(i, j)).collect()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d.iter().all(|x| x.is_finite()) && self.h.iter().all(|x| x.is_finite())
    }

    /// Drops derivative information above `order`.
    pub fn truncate(mut self, order: Order) -> Jet {
        if order < self.order {
            if order < Order::Second {
                self.h = [0.0; HESS_LEN];
            }
            if order < Order::First {
                self.d = [0.0; MAX_DIM];
            }
            self.order = order;
        }
        self
    }

    /// The partial derivative `∂_k` of this jet, one order lower.
    pub fn partial(&self, k: usize) -> Jet {
        let mut out = Jet::constant(self.d[k]);
        if self.order == Order::Second {
            out.order = Order::First;
            for i in 0..MAX_DIM {
                out.d[i] = self.h[hidx(k, i)];
            }
        }
        out
    }

    /// Re-indexes derivatives: local coordinate `a` becomes global coordinate `map[a]`.
    pub fn embed(&self, map: &[usize]) -> Jet {
        let mut out = Jet::constant(self.v);
        out.order = self.order;
        if self.order >= Order::First {
            for (a, &ga) in map.iter().enumerate() {
                out.d[ga] = self.d[a];
            }
        }
        if self.order == Order::Second {
            for (a, &ga) in map.iter().enumerate() {
                for (b, &gb) in map.iter().enumerate().skip(a) {
                    out.h[hidx(ga, gb)] = self.h[hidx(a, b)];
                }
            }
        }
        out
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0);
        out.order = self.order;
        if self.order >= Order::First {
            for i in 0..MAX_DIM {
                out.d[i] = f1 * self.d[i];
            }
        }
        if self.order == Order::Second {
            for i in 0..MAX_DIM {
                for j in i..MAX_DIM {
                    let k = hidx(i, j);
                    out.h[k] = f1 * self.h[k] + f2 * self.d[i] * self.d[j];
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powf(&self, e: f64) -> Jet {
        if e == 0.0 {
            return Jet::constant(1.0);
        }
        let v = self.v;
        self.chain(v.powf(e), e * v.powf(e - 1.0), e * (e - 1.0) * v.powf(e - 2.0))
    }

    pub fn powi(&self, e: i32) -> Jet {
        if e == 0 {
            return Jet::constant(1.0);
        }
        let v = self.v;
        let ef = e as f64;
        let d1 = if e == 1 { 1.0 } else { ef * v.powi(e - 1) };
        let d2 = match e {
            1 => 0.0,
            2 => 2.0,
            _ => ef * (ef - 1.0) * v.powi(e - 2),
        };
        self.chain(v.powi(e), d1, d2)
    }

    /// `self^other` for a jet exponent, via `exp(other * ln self)`.
    pub fn pow(&self, other: &Jet) -> Jet {
        if other.order == Order::Value {
            let e = other.v;
            if e.fract() == 0.0 && e.abs() < 64.0 {
                return self.powi(e as i32);
            }
            return self.powf(e);
        }
        (*other * self.ln()).exp()
    }

    pub fn exp(&self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Jet {
        let v = self.v;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(&self) -> Jet {
        let t = self.v.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }

    pub fn tanh(&self) -> Jet {
        let t = self.v.tanh();
        let s = 1.0 - t * t;
        self.chain(t, s, -2.0 * t * s)
    }

    pub fn asin(&self) -> Jet {
        let v = self.v;
        let q = 1.0 - v * v;
        let r = q.sqrt();
        self.chain(v.asin(), 1.0 / r, v / (q * r))
    }

    pub fn atan(&self) -> Jet {
        let v = self.v;
        let q = 1.0 + v * v;
        self.chain(v.atan(), 1.0 / q, -2.0 * v / (q * q))
    }

    pub fn abs(&self) -> Jet {
        let s = if self.v < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.v.abs(), s, 0.0)
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, rhs: Jet) {
        self.v += rhs.v;
        let order = self.order.max(rhs.order);
        if rhs.order >= Order::First {
            for i in 0..MAX_DIM {
                self.d[i] += rhs.d[i];
            }
        }
        if rhs.order == Order::Second {
            for k in 0..HESS_LEN {
                self.h[k] += rhs.h[k];
            }
        }
        self.order = order;
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    #[inline]
    fn sub_assign(&mut self, rhs: Jet) {
        self.v -= rhs.v;
        let order = self.order.max(rhs.order);
        if rhs.order >= Order::First {
            for i in 0..MAX_DIM {
                self.d[i] -= rhs.d[i];
            }
        }
        if rhs.order == Order::Second {
            for k in 0..HESS_LEN {
                self.h[k] -= rhs.h[k];
            }
        }
        self.order = order;
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.v = -self.v;
        for x in self.d.iter_mut() {
            *x = -*x;
        }
        for x in self.h.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.max(rhs.order);
        let mut out = Jet::constant(self.v * rhs.v);
        out.order = order;
        if order >= Order::First {
            for i in 0..MAX_DIM {
                out.d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
            }
        }
        if order == Order::Second {
            for i in 0..MAX_DIM {
                for j in i..MAX_DIM {
                    let k = hidx(i, j);
                    out.h[k] = self.h[k] * rhs.v
                        + self.v * rhs.h[k]
                        + self.d[i] * rhs.d[j]
                        + self.d[j] * rhs.d[i];
                }
            }
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        if rhs.order == Order::Value {
            return self * Jet::constant(1.0 / rhs.v);
        }
        self * rhs.recip()
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.v *= rhs;
        for x in self.d.iter_mut() {
            *x *= rhs;
        }
        for x in self.h.iter_mut() {
            *x *= rhs;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.v += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.v -= rhs;
        self
    }
}

/// Minimal scalar abstraction shared by `f64` and [`Jet`], so that the small
/// dense linear algebra in [`crate::linalg`] runs unchanged on both.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
{
    fn from_f64(v: f64) -> Self;
    fn val(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn powf(&self, e: f64) -> Self;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
}

impl Real for Jet {
    fn from_f64(v: f64) -> Self {
        Jet::constant(v)
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
    fn powf(&self, e: f64) -> Self {
        Jet::powf(self, e)
    }
}
