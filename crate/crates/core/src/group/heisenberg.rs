//! Exact sub-Riemannian geometry of the first Heisenberg group `H¹`.
//!
//! Coordinates `(x, y, t)` with product
//! `(x₁,y₁,t₁)·(x₂,y₂,t₂) = (x₁+x₂, y₁+y₂, t₁+t₂+(x₁y₂−y₁x₂)/2)`
//! and frame `X₁ = ∂x − (y/2)∂t`, `X₂ = ∂y + (x/2)∂t`.
//!
//! A length-minimizing curve from the identity projects to an arc of circle
//! in the `(x, y)` plane. If the arc has length `d` and turning angle
//! `φ ∈ [0, 2π]`, its endpoint has
//!
//! ```text
//! r = |(x, y)| = 2 d sin(φ/2) / φ,     |t| = d² (φ − sin φ) / (2 φ²),
//! ```
//!
//! so `|t| / r² = (φ − sin φ) / (8 sin²(φ/2))`, which is strictly increasing on
//! `(0, 2π)`. The distance is recovered from one scalar root-find in `φ`.

use core::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ROOT_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;

/// `φ − sin φ`, accurate for small `φ`.
fn phi_minus_sin(phi: f64) -> f64 {
    if phi < 1e-2 {
        let p2 = phi * phi;
        phi * p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0 * (1.0 - p2 / 72.0)))
    } else {
        phi - phi.sin()
    }
}

/// `sin(φ/2)`, accurate near `φ = 2π`.
fn half_sin(phi: f64) -> f64 {
    if phi > PI {
        ((TAU - phi) / 2.0).sin()
    } else {
        (phi / 2.0).sin()
    }
}

/// `|t| / r²` along the geodesic family, as a function of the turning angle.
pub fn area_ratio(phi: f64) -> f64 {
    if phi < 1e-4 {
        // φ/12 + φ³/360 + …
        return phi / 12.0 + phi * phi * phi / 360.0;
    }
    let s = half_sin(phi);
    phi_minus_sin(phi) / (8.0 * s * s)
}

fn area_ratio_derivative(phi: f64) -> f64 {
    if phi < 1e-4 {
        return 1.0 / 12.0 + phi * phi / 120.0;
    }
    // μ = N / Q with N = φ − sin φ, Q = 4(1 − cos φ) = 8 sin²(φ/2).
    // N' = Q/4 and Q' = 4 sin φ, so μ' = 1/4 − 4 N sin φ / Q².
    let s = half_sin(phi);
    let q = 8.0 * s * s;
    0.25 - 4.0 * phi_minus_sin(phi) * phi.sin() / (q * q)
}

/// Solves `area_ratio(φ) = target` for `φ ∈ (0, 2π)`: bisection down to a
/// narrow bracket, then safeguarded Newton.
pub fn solve_turning_angle(target: f64) -> Result<f64> {
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Domain(alloc::format!(
            "area ratio must be finite and nonnegative, got {target}"
        )));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = TAU;
    // For large targets φ ≈ 2π − √(π/target); tighten the bracket up front.
    if target > 10.0 {
        let guess = TAU - (PI / target).sqrt();
        let below = (guess - 4.0 * (TAU - guess)).max(0.0);
        if area_ratio(below) < target {
            lo = below;
        }
    }
    let mut iterations = 0;
    while hi - lo > 1e-3 && iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if area_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut phi = 0.5 * (lo + hi);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let residual = area_ratio(phi) - target;
        if residual < 0.0 {
            lo = lo.max(phi);
        } else {
            hi = hi.min(phi);
        }
        let slope = area_ratio_derivative(phi);
        let mut next = phi - residual / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - phi).abs();
        phi = next;
        if step <= ROOT_TOLERANCE * phi.max(1.0) {
            // One more Newton step from a converged iterate costs nothing and
            // takes the error well below the tolerance.
            let polish = phi - (area_ratio(phi) - target) / area_ratio_derivative(phi);
            if polish > lo && polish < hi {
                phi = polish;
            }
            return Ok(phi);
        }
    }
    Err(Error::RootFind {
        iterations,
        lower: lo,
        upper: hi,
    })
}

/// Carnot–Carathéodory distance from the identity to `(x, y, t)`.
pub fn distance_from_identity(x: f64, y: f64, t: f64) -> Result<f64> {
    let r = x.hypot(y);
    let at = t.abs();
    if at == 0.0 {
        return Ok(r);
    }
    // Purely vertical points are reached by full circles: |t| = d²/(4π).
    if r == 0.0 || at / (r * r) > 1e30 {
        return Ok(2.0 * (PI * at).sqrt());
    }
    let phi = solve_turning_angle(at / (r * r))?;
    if phi == 0.0 {
        return Ok(r);
    }
    Ok(r * phi / (2.0 * half_sin(phi)))
}

/// Endpoint of the arc-geodesic of length `d`, turning angle `φ ∈ [0, 2π]` and
/// initial direction angle `heading`, started at the identity.
pub fn geodesic_endpoint(d: f64, phi: f64, heading: f64) -> [f64; 3] {
    if phi == 0.0 {
        return [d * heading.cos(), d * heading.sin(), 0.0];
    }
    let rho = d / phi;
    let r = 2.0 * rho * half_sin(phi);
    let chord_heading = heading + phi / 2.0;
    let t = rho * rho * phi_minus_sin(phi) / 2.0;
    [r * chord_heading.cos(), r * chord_heading.sin(), t]
}

/// Monte-Carlo estimate of the Haar (Lebesgue) volume of the CC ball of
/// radius `radius` about the identity.
///
/// Samples are uniform in the bounding box `|x|,|y| ≤ r`, `|t| ≤ r²/(2π)`
/// (the largest height reachable at distance `r`, attained by half circles).
pub fn monte_carlo_ball_volume(radius: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(alloc::format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    if samples == 0 {
        return Err(Error::Domain("Monte-Carlo calibration needs samples".into()));
    }
    let t_extent = radius * radius / TAU;
    let box_volume = (2.0 * radius) * (2.0 * radius) * (2.0 * t_extent);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = 0usize;
    for _ in 0..samples {
        let x = radius * (2.0 * rng.random::<f64>() - 1.0);
        let y = radius * (2.0 * rng.random::<f64>() - 1.0);
        let t = t_extent * (2.0 * rng.random::<f64>() - 1.0);
        if x * x + y * y > radius * radius {
            continue;
        }
        if distance_from_identity(x, y, t)? <= radius {
            inside += 1;
        }
    }
    Ok(box_volume * inside as f64 / samples as f64)
}
