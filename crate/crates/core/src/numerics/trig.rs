//! Branch-free sine and cosine for whole slices.
//!
//! `f64::sin_cos` is accurate but slow for the arguments sine networks
//! produce, and it does not vectorize. This kernel reduces by `π/2` with a
//! three-part Cody-Waite split and evaluates the usual minimax polynomials
//! on `[-π/4, π/4]`, staying within a couple of ulps of the libm result.
//! Arguments beyond [`FAST_LIMIT`] fall back to the standard library.

/// Largest `|x|` handled by the polynomial path. The reduction is exact up
/// to well beyond this.
pub const FAST_LIMIT: f64 = 1.0e5;

const PIO2_1: f64 = 1.570_796_326_734_125_614_17; // first 33 bits of π/2
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11; // next 33 bits
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21; // next 33 bits

// 1.5 · 2^52: adding it rounds to an integer held in the low mantissa bits.
const ROUNDER: f64 = 6_755_399_441_055_744.0;

const S1: f64 = -1.666_666_666_666_663_243_48e-1;
const S2: f64 = 8.333_333_333_322_489_461_24e-3;
const S3: f64 = -1.984_126_982_985_794_931_34e-4;
const S4: f64 = 2.755_731_370_707_006_767_89e-6;
const S5: f64 = -2.505_076_025_340_686_341_95e-8;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-2;
const C2: f64 = -1.388_888_888_887_410_957_49e-3;
const C3: f64 = 2.480_158_728_947_672_941_78e-5;
const C4: f64 = -2.755_731_435_139_066_330_35e-7;
const C5: f64 = 2.087_572_321_298_174_827_90e-9;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

#[inline(always)]
fn kernel(x: f64) -> (f64, f64) {
    let shifted = x * std::f64::consts::FRAC_2_PI + ROUNDER;
    let quadrant = shifted.to_bits();
    let q = shifted - ROUNDER;
    let r = ((x - q * PIO2_1) - q * PIO2_2) - q * PIO2_3;
    let z = r * r;
    let s = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    let c =
        w + (((1.0 - w) - hz) + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6))))));
    // Odd quadrants swap sine and cosine; signs follow the quadrant.
    let swap = 0u64.wrapping_sub(quadrant & 1);
    let (sb, cb) = (s.to_bits(), c.to_bits());
    let sin = (sb & !swap) | (cb & swap);
    let cos = (cb & !swap) | (sb & swap);
    let sin_sign = (quadrant & 2) << 62;
    let cos_sign = (quadrant.wrapping_add(1) & 2) << 62;
    (
        f64::from_bits(sin ^ sin_sign),
        f64::from_bits(cos ^ cos_sign),
    )
}

/// `(sin x, cos x)`.
pub fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() <= FAST_LIMIT {
        kernel(x)
    } else {
        x.sin_cos()
    }
}

/// Replaces each `v` by `sin(ω·v)` and writes `ω·cos(ω·v)` to `slope`.
pub fn sine_activation(values: &mut [f64], slope: &mut [f64], omega: f64) {
    assert_eq!(values.len(), slope.len());
    if !fast_activation(values, slope, omega) {
        for (v, s) in values.iter_mut().zip(slope.iter_mut()) {
            let (sn, cs) = (omega * *v).sin_cos();
            *v = sn;
            *s = omega * cs;
        }
    }
}

/// Leaves the inputs untouched and returns false if any argument is out
/// of range or not finite.
#[inline(always)]
fn activation_loop(values: &mut [f64], slope: &mut [f64], omega: f64) -> bool {
    let in_range = values
        .iter()
        .fold(true, |ok, v| ok & ((omega * v).abs() <= FAST_LIMIT));
    if !in_range {
        return false;
    }
    for (v, s) in values.iter_mut().zip(slope.iter_mut()) {
        let (sn, cs) = kernel(omega * *v);
        *v = sn;
        *s = omega * cs;
    }
    true
}

// Wider vectors only change throughput: no fused multiply-add is enabled,
// so every path rounds identically.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn activation_avx512(values: &mut [f64], slope: &mut [f64], omega: f64) -> bool {
    activation_loop(values, slope, omega)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn activation_avx2(values: &mut [f64], slope: &mut [f64], omega: f64) -> bool {
    activation_loop(values, slope, omega)
}

fn fast_activation(values: &mut [f64], slope: &mut [f64], omega: f64) -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { activation_avx512(values, slope, omega) };
        }
        if is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { activation_avx2(values, slope, omega) };
        }
    }
    activation_loop(values, slope, omega)
}
