//! Float math routed through `std` when available and `libm` otherwise,
//! so the crate builds on `no_std` targets.

#![allow(dead_code)]

macro_rules! shim {
    ($name:ident, $std_method:ident, $libm_fn:ident) => {
        #[inline(always)]
        pub fn $name(x: f64) -> f64 {
            #[cfg(feature = "std")]
            {
                x.$std_method()
            }
            #[cfg(not(feature = "std"))]
            {
                libm::$libm_fn(x)
            }
        }
    };
}

shim!(sqrt, sqrt, sqrt);
shim!(cos, cos, cos);
shim!(sin, sin, sin);
shim!(tan, tan, tan);
shim!(asin, asin, asin);
shim!(atan, atan, atan);
shim!(floor, floor, floor);
shim!(ceil, ceil, ceil);
shim!(round, round, round);
shim!(exp, exp, exp);
shim!(ln, ln, log);

#[inline(always)]
pub fn abs(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !(1u64 << 63))
}

#[inline(always)]
pub fn atan2(y: f64, x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        y.atan2(x)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::atan2(y, x)
    }
}

#[inline(always)]
pub fn hypot(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.hypot(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::hypot(x, y)
    }
}

#[inline(always)]
pub fn powf(x: f64, e: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powf(e)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::pow(x, e)
    }
}

/// Remainder in `[0, m)` for `m > 0`.
#[inline(always)]
pub fn rem_euclid(x: f64, m: f64) -> f64 {
    let r = x % m;
    if r < 0.0 {
        r + m
    } else {
        r
    }
}
