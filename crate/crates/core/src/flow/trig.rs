//! Batched sine and cosine for the network activations.
//!
//! Three-part Cody–Waite reduction by π/2 followed by the classic minimax
//! kernels on [−π/4, π/4]. Arguments beyond `LIMIT` use the standard library.

const LIMIT: f64 = 1.0e5;
const INV_PIO2: f64 = std::f64::consts::FRAC_2_PI;
const PIO2_1: f64 = 1.570_796_326_734_125_6;
const PIO2_2: f64 = 6.077_100_506_303_966e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_5e-21;
const ROUND: f64 = 6_755_399_441_055_744.0;

const S1: f64 = -1.666_666_666_666_663_2e-1;
const S2: f64 = 8.333_333_333_322_49e-3;
const S3: f64 = -1.984_126_982_985_795e-4;
const S4: f64 = 2.755_731_370_707_006_8e-6;
const S5: f64 = -2.505_076_025_340_686_3e-8;
const S6: f64 = 1.589_690_995_211_55e-10;

const C1: f64 = 4.166_666_666_666_660_2e-2;
const C2: f64 = -1.388_888_888_887_411e-3;
const C3: f64 = 2.480_158_728_947_673e-5;
const C4: f64 = -2.755_731_435_139_066_3e-7;
const C5: f64 = 2.087_572_321_298_174_8e-9;
const C6: f64 = -1.135_964_755_778_819_5e-11;

#[inline(always)]
fn kernel(x: f64) -> (f64, f64) {
    let n = (x * INV_PIO2 + ROUND) - ROUND;
    let r = ((x - n * PIO2_1) - n * PIO2_2) - n * PIO2_3;
    let z = r * r;
    let s = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let c = 1.0 - 0.5 * z + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let q = n as i64;
    let odd = (q & 1) as f64;
    let sign = 1.0 - 2.0 * ((q >> 1) & 1) as f64;
    (sign * (s * (1.0 - odd) + c * odd), sign * (c * (1.0 - odd) - s * odd))
}

#[inline(always)]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() < LIMIT {
        kernel(x)
    } else {
        x.sin_cos()
    }
}

#[inline(always)]
pub(crate) fn sin(x: f64) -> f64 {
    sin_cos(x).0
}
