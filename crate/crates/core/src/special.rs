//! Special functions: modified Bessel function of the second kind, gamma
//! function and Legendre polynomials.
//!
//! `bessel_k` follows the classic Temme / Steed scheme: the fractional order
//! `mu = nu - round(nu)` is evaluated with Temme's series for `x <= 2` and
//! Steed's continued fraction for `x > 2`, then integer orders are reached by
//! forward recurrence, which is stable for `K`.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use statrs::function::gamma::{gamma, ln_gamma};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 20_000;
const TEMME_CUTOFF: f64 = 2.0;

// Chebyshev coefficients of g1(mu) = (1/G(1-mu) - 1/G(1+mu)) / (2 mu) and
// g2(mu) = (1/G(1-mu) + 1/G(1+mu)) / 2 on |mu| <= 1/2, argument 4|mu| - 1.
const G1_COEFFS: [f64; 14] = [
    -1.145_164_083_662_683_117_868_981_528_67,
    0.006_360_853_113_470_842_381_229_554_95,
    0.001_862_451_930_072_068_489_346_436_57,
    0.000_152_833_085_873_453_507_081_227_824,
    0.000_017_017_464_011_802_038_795_324_732,
    -6.459_750_292_334_725_435_466_832_645_1e-07,
    -5.181_984_843_251_938_089_410_431_296_8e-08,
    4.518_909_289_485_818_305_112_318_079_7e-10,
    3.243_322_737_102_087_304_366_625_918_0e-11,
    6.830_943_402_494_752_287_543_240_082_8e-13,
    2.835_350_275_517_210_151_311_962_813_0e-14,
    -7.988_390_576_932_359_287_563_808_754_1e-16,
    -3.372_667_730_077_194_983_334_121_345_7e-17,
    -3.658_633_480_921_052_074_405_443_710_4e-20,
];

const G2_COEFFS: [f64; 15] = [
    1.882_645_524_949_671_835_019_616_975_350,
    -0.077_490_658_396_167_518_329_547_945_212,
    -0.018_256_714_847_324_929_419_579_340_950,
    0.000_633_803_020_907_489_579_592_397_173_1,
    0.000_076_229_054_350_872_902_119_446_117_5,
    -9.550_164_756_172_044_351_985_399_352_6e-07,
    -8.892_726_810_788_635_191_243_151_295_5e-08,
    -1.952_133_477_231_961_374_051_188_013_2e-09,
    -9.400_305_273_588_516_211_176_957_977_1e-11,
    4.687_513_384_953_239_317_929_087_910_1e-12,
    2.265_853_574_692_575_958_244_754_514_5e-13,
    -1.172_550_969_848_801_511_187_873_525_1e-15,
    -7.044_133_820_024_522_253_084_315_587_7e-17,
    -2.437_787_831_010_769_365_065_974_022_8e-18,
    -7.522_524_321_825_390_172_716_467_501_1e-20,
];

fn chebyshev(coeffs: &[f64], x: f64) -> f64 {
    let y2 = 2.0 * x;
    let (mut d, mut dd) = (0.0, 0.0);
    for &c in coeffs[1..].iter().rev() {
        let tmp = d;
        d = y2 * d - dd + c;
        dd = tmp;
    }
    x * d - dd + 0.5 * coeffs[0]
}

/// Temme's auxiliary gamma values for |mu| <= 1/2:
/// `(g1, g2, 1/G(1+mu), 1/G(1-mu))`.
pub(crate) fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let t = 4.0 * mu.abs() - 1.0;
    let g1 = chebyshev(&G1_COEFFS, t);
    let g2 = chebyshev(&G2_COEFFS, t);
    (g1, g2, g2 - mu * g1, g2 + mu * g1)
}

/// `(K_mu(x), K_{mu+1}(x))` for |mu| <= 1/2 and 0 < x <= 2 by Temme's series.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let pi_mu = PI * mu;
    let fact = if pi_mu.abs() < EPS { 1.0 } else { pi_mu / pi_mu.sin() };
    let d = -half_x.ln();
    let e = mu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (g1, g2, inv_gamma_plus, inv_gamma_minus) = temme_gamma(mu);

    let mut ff = fact * (g1 * e.cosh() + g2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / inv_gamma_plus;
    let mut q = 0.5 / (e * inv_gamma_minus);
    let mut c = 1.0;
    let d = half_x * half_x;
    let mut sum1 = p;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// `(e^x K_mu(x), e^x K_{mu+1}(x))` for |mu| <= 1/2 and x > 2 by Steed's
/// continued fraction.
fn steed_scaled(mu: f64, x: f64) -> Result<(f64, f64)> {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    let mut converged = false;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Steed continued fraction for K did not converge at x = {x}"
        )));
    }
    let h = a1 * h;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    Ok((k_mu, k_mu1))
}

/// `e^x K_nu(x)`, the exponentially scaled Bessel function.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_k requires x > 0, got {x}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("bessel_k requires nu >= 0, got {nu}")));
    }
    let steps = (nu + 0.5).floor();
    let mu = nu - steps;
    let (mut k_mu, mut k_mu1) = if x <= TEMME_CUTOFF {
        let (a, b) = temme_series(mu, x);
        let ex = x.exp();
        (a * ex, b * ex)
    } else {
        steed_scaled(mu, x)?
    };
    for i in 1..=(steps as usize) {
        let next = (mu + i as f64) * (2.0 / x) * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    if k_mu.is_finite() {
        Ok(k_mu)
    } else {
        Err(Error::Domain(format!(
            "K_{nu}({x}) overflows; x is below the representable range for this order"
        )))
    }
}

/// Modified Bessel function of the second kind `K_nu(x)`.
///
/// Errors for `x <= 0` and whenever the value overflows `f64`; see
/// [`bessel_k_saturating`] for a variant that clamps instead.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(nu, x)?;
    Ok(scaled * (-x).exp())
}

/// Like [`bessel_k`] but returns `f64::MAX` where the true value overflows.
/// Still errors for `x <= 0`.
pub fn bessel_k_saturating(nu: f64, x: f64) -> Result<f64> {
    match bessel_k(nu, x) {
        Err(Error::Domain(_)) if x > 0.0 && nu >= 0.0 && x.is_finite() => Ok(f64::MAX),
        other => other,
    }
}

/// Legendre polynomial `P_ell(y)` by the three-term recurrence.
pub fn legendre_p(ell: usize, y: f64) -> Result<f64> {
    if !(y.abs() <= 1.0) {
        return Err(Error::Domain(format!("legendre_p requires |y| <= 1, got {y}")));
    }
    Ok(legendre_unchecked(ell, y))
}

pub(crate) fn legendre_unchecked(ell: usize, y: f64) -> f64 {
    match ell {
        0 => 1.0,
        1 => y,
        _ => {
            let (mut prev, mut cur) = (1.0, y);
            for l in 1..ell {
                let fl = l as f64;
                let next = ((2.0 * fl + 1.0) * y * cur - fl * prev) / (fl + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `sum_l coeffs[l] P_l(y)`, accumulating the recurrence once.
pub(crate) fn legendre_series(coeffs: &[f64], y: f64) -> f64 {
    let mut acc = 0.0;
    let (mut prev, mut cur) = (0.0, 1.0);
    for (l, &c) in coeffs.iter().enumerate() {
        acc += c * cur;
        let fl = l as f64;
        let next = ((2.0 * fl + 1.0) * y * cur - fl * prev) / (fl + 1.0);
        prev = cur;
        cur = next;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_half(x: f64) -> f64 {
        (PI / (2.0 * x)).sqrt() * (-x).exp()
    }

    #[test]
    fn closed_form_examples() {
        let v = bessel_k(0.5, 1.0).unwrap();
        assert!((v - k_half(1.0)).abs() < 1e-15, "{v}");
        assert!((v - 0.461_068_504_4).abs() < 1e-10, "{v}");
        let v = bessel_k(1.5, 2.0).unwrap();
        assert!((v - 0.179_906_657_9).abs() < 1e-10, "{v}");
    }

    #[test]
    fn temme_gamma_matches_gamma_function() {
        for &mu in &[-0.5, -0.31, -0.1, 0.05, 0.2, 0.37, 0.5] {
            let (g1, g2, gp, gm) = temme_gamma(mu);
            let inv_p = 1.0 / gamma(1.0 + mu);
            let inv_m = 1.0 / gamma(1.0 - mu);
            assert!((gp - inv_p).abs() < 1e-14);
            assert!((gm - inv_m).abs() < 1e-14);
            assert!((g2 - 0.5 * (inv_m + inv_p)).abs() < 1e-14);
            assert!((g1 - (inv_m - inv_p) / (2.0 * mu)).abs() < 1e-12);
        }
        // g1(0) = -Euler's constant
        let (g1, ..) = temme_gamma(0.0);
        assert!((g1 + 0.577_215_664_901_532_9).abs() < 1e-14);
    }

    #[test]
    fn both_branches_agree_at_cutoff() {
        for &nu in &[0.05, 0.5, 1.3, 2.5, 7.7] {
            let below = bessel_k(nu, TEMME_CUTOFF).unwrap();
            let above = bessel_k(nu, TEMME_CUTOFF * (1.0 + 1e-12)).unwrap();
            assert!(((below - above) / below).abs() < 1e-10, "nu {nu}");
        }
    }

    #[test]
    fn half_order_sweep() {
        let mut x = 1e-6;
        while x < 50.0 {
            let v = bessel_k(0.5, x).unwrap();
            assert!(((v - k_half(x)) / k_half(x)).abs() < 1e-12, "x {x}");
            x *= 1.37;
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_k(0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(0.5, -1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(-0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(10.0, 1e-40), Err(Error::Domain(_))));
        assert_eq!(bessel_k_saturating(10.0, 1e-40).unwrap(), f64::MAX);
        assert!(bessel_k_saturating(1.0, 0.0).is_err());
        assert!(matches!(legendre_p(3, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_p(0, 0.3).unwrap(), 1.0);
        assert_eq!(legendre_p(1, -0.7).unwrap(), -0.7);
        assert!((legendre_p(2, 0.5).unwrap() + 0.125).abs() < 1e-15);
        let coeffs = [0.3, -0.2, 0.7, 0.1];
        let y = 0.42;
        let direct: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| c * legendre_p(l, y).unwrap())
            .sum();
        assert!((legendre_series(&coeffs, y) - direct).abs() < 1e-15);
    }
}
