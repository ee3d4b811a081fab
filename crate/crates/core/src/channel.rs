//! Line-of-sight DC gain of a Lambertian LED seen by a photodiode receiver.
//!
//! The gain combines free-space spreading (`A / d^2`), the LED's generalized
//! Lambertian radiant intensity, the optical filter, a non-imaging
//! concentrator and the photodiode's projected area:
//!
//! ```text
//! h = A / d^2 * R0(irradiance) * Ts * g(incidence) * cos(incidence)
//! R0(phi) = (m + 1) / (2 pi) * cos^m(phi)
//! g       = n^2 / sin^2(FOV)
//! ```
//!
//! and `h = 0` outside the receiver field of view or behind the LED plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

fn sub<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

fn check_unit<T: Real>(v: &Vec3<T>, what: &str) -> Result<()> {
    let n = norm(v);
    if !n.is_finite() || (n - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(4.0)) {
        return Err(Error::Domain(format!("{what} must be a unit vector, |v| = {n}")));
    }
    Ok(())
}

/// Order `m` of the Lambertian emission pattern for a half-power semiangle.
///
/// `m = -ln 2 / ln(cos(semiangle))`, so a 60 degree semiangle gives `m = 1`.
pub fn lambertian_order<T: Real>(semiangle_half_power: T) -> Result<T> {
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    if !(semiangle_half_power > T::zero() && semiangle_half_power < half_pi) {
        return Err(Error::Domain(format!(
            "half-power semiangle must lie in (0, pi/2), got {semiangle_half_power}"
        )));
    }
    Ok(-T::lit(std::f64::consts::LN_2) / semiangle_half_power.cos().ln())
}

/// Gain `n^2 / sin^2(fov)` of the receiver's optical concentrator.
pub fn concentrator_gain<T: Real>(fov: T, refractive_index: T) -> Result<T> {
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    if !(fov > T::zero() && fov <= half_pi) {
        return Err(Error::Domain(format!("field of view must lie in (0, pi/2], got {fov}")));
    }
    if !(refractive_index >= T::one()) {
        return Err(Error::Domain(format!(
            "refractive index must be >= 1, got {refractive_index}"
        )));
    }
    let s = fov.sin();
    Ok(refractive_index * refractive_index / (s * s))
}

/// Lambertian radiant intensity `(m + 1) / (2 pi) * cos^m(angle)`, per steradian.
pub fn radiant_intensity<T: Real>(order: T, irradiance_angle: T) -> T {
    let c = irradiance_angle.cos().max(T::zero());
    (order + T::one()) / T::lit(std::f64::consts::TAU) * c.powf(order)
}

/// LED transmitter: position, emission axis and the derived Lambertian order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedConfig<T> {
    pub position: Vec3<T>,
    pub normal: Vec3<T>,
    pub semiangle_half_power: T,
    lambertian_order: T,
}

impl<T: Real> LedConfig<T> {
    pub fn new(position: Vec3<T>, normal: Vec3<T>, semiangle_half_power: T) -> Result<Self> {
        check_unit(&normal, "LED normal")?;
        let lambertian_order = lambertian_order(semiangle_half_power)?;
        Ok(Self { position, normal, semiangle_half_power, lambertian_order })
    }

    /// Ceiling-mounted LED pointing straight down with a 60 degree semiangle.
    pub fn ceiling(position: Vec3<T>) -> Self {
        Self::new(
            position,
            [T::zero(), T::zero(), -T::one()],
            T::lit(60f64.to_radians()),
        )
        .expect("default LED is valid")
    }

    pub fn lambertian_order(&self) -> T {
        self.lambertian_order
    }
}

/// Receiver optics: detector area (m^2), optical filter gain, concentrator
/// refractive index and field of view (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalFrontEnd<T> {
    pub detector_area: T,
    pub filter_gain: T,
    pub refractive_index: T,
    pub fov: T,
}

impl<T: Real> OpticalFrontEnd<T> {
    pub fn new(detector_area: T, filter_gain: T, refractive_index: T, fov: T) -> Result<Self> {
        if !(detector_area > T::zero()) {
            return Err(Error::Domain(format!("detector area must be > 0, got {detector_area}")));
        }
        if !(filter_gain > T::zero()) {
            return Err(Error::Domain(format!("filter gain must be > 0, got {filter_gain}")));
        }
        // validates fov and refractive index
        concentrator_gain(fov, refractive_index)?;
        Ok(Self { detector_area, filter_gain, refractive_index, fov })
    }

    pub fn concentrator_gain(&self) -> T {
        let s = self.fov.sin();
        self.refractive_index * self.refractive_index / (s * s)
    }
}

impl<T: Real> Default for OpticalFrontEnd<T> {
    /// 1 cm^2 detector, unit filter gain, n = 1.5, 60 degree FOV.
    fn default() -> Self {
        Self {
            detector_area: T::lit(1e-4),
            filter_gain: T::one(),
            refractive_index: T::lit(1.5),
            fov: T::lit(60f64.to_radians()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverPose<T> {
    pub position: Vec3<T>,
    pub normal: Vec3<T>,
}

impl<T: Real> ReceiverPose<T> {
    pub fn new(position: Vec3<T>, normal: Vec3<T>) -> Result<Self> {
        check_unit(&normal, "receiver normal")?;
        Ok(Self { position, normal })
    }

    /// Receiver facing straight up.
    pub fn facing_up(position: Vec3<T>) -> Self {
        Self { position, normal: [T::zero(), T::zero(), T::one()] }
    }
}

/// DC amplitude gain `h` and the power gain `g = h^2` used in SINRs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGain<T> {
    pub h: T,
    pub g: T,
}

impl<T: Real> ChannelGain<T> {
    pub fn from_dc(h: T) -> Self {
        Self { h, g: h * h }
    }

    pub fn zero() -> Self {
        Self { h: T::zero(), g: T::zero() }
    }
}

/// Line-of-sight DC gain between `led` and a receiver at `rx`.
pub fn channel_dc_gain<T: Real>(
    led: &LedConfig<T>,
    rx: &ReceiverPose<T>,
    fe: &OpticalFrontEnd<T>,
) -> Result<ChannelGain<T>> {
    let to_rx = sub(&rx.position, &led.position);
    let d = norm(&to_rx);
    if !(d > T::zero()) {
        return Err(Error::Geometry("receiver coincides with the LED".into()));
    }
    let cos_irradiance = dot(&led.normal, &to_rx) / d;
    // receiver -> LED is -to_rx
    let cos_incidence = -dot(&rx.normal, &to_rx) / d;
    if cos_irradiance < T::zero() || cos_incidence < T::zero() {
        return Ok(ChannelGain::zero());
    }
    let incidence = cos_incidence.min(T::one()).acos();
    if incidence > fe.fov {
        return Ok(ChannelGain::zero());
    }
    let m = led.lambertian_order;
    let r0 = (m + T::one()) / T::lit(std::f64::consts::TAU) * cos_irradiance.min(T::one()).powf(m);
    let h = fe.detector_area / (d * d) * r0 * fe.filter_gain * fe.concentrator_gain() * cos_incidence;
    Ok(ChannelGain::from_dc(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn lambertian_order_examples() {
        assert_relative_eq!(lambertian_order(deg(60.0)).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(lambertian_order(deg(45.0)).unwrap(), 2.0, max_relative = 1e-14);
        // mpmath, 40 digits
        assert_relative_eq!(
            lambertian_order(deg(30.0)).unwrap(),
            4.818_841_679_306_418,
            max_relative = 1e-13
        );
        assert!(lambertian_order(deg(20.0)).unwrap() > lambertian_order(deg(30.0)).unwrap());
    }

    #[test]
    fn lambertian_order_domain() {
        assert!(lambertian_order(0.0_f64).is_err());
        assert!(lambertian_order(PI / 2.0).is_err());
        assert!(lambertian_order(-0.1_f64).is_err());
    }

    #[test]
    fn concentrator_gain_examples() {
        assert_relative_eq!(concentrator_gain(deg(60.0), 1.5).unwrap(), 3.0, max_relative = 1e-14);
        assert_relative_eq!(concentrator_gain(deg(90.0), 1.5).unwrap(), 2.25, max_relative = 1e-14);
        assert_relative_eq!(
            concentrator_gain(deg(70.0), 1.5).unwrap(),
            2.548_067_245_721_537,
            max_relative = 1e-13
        );
        assert!(concentrator_gain(0.0, 1.5).is_err());
        assert!(concentrator_gain(deg(60.0), 0.9).is_err());
    }

    #[test]
    fn radiant_intensity_examples() {
        assert_relative_eq!(radiant_intensity(1.0, 0.0), 1.0 / PI, max_relative = 1e-14);
        assert!(radiant_intensity(1.0, deg(90.0)).abs() < 1e-16);
        assert_relative_eq!(radiant_intensity(1.0, deg(60.0)), 0.5 / PI, max_relative = 1e-14);
    }

    #[test]
    fn gain_directly_below() {
        let led = LedConfig::ceiling([0.0, 0.0, 2.5]);
        let rx = ReceiverPose::facing_up([0.0, 0.0, 0.0]);
        let fe = OpticalFrontEnd::default();
        let h = channel_dc_gain(&led, &rx, &fe).unwrap();
        let m = led.lambertian_order();
        let expected = fe.detector_area * (m + 1.0) / (2.0 * PI) * fe.filter_gain
            * (1.5 * 1.5 / deg(60.0).sin().powi(2))
            / (2.5 * 2.5);
        assert_relative_eq!(h.h, expected, max_relative = 1e-14);
        assert_eq!(h.g, h.h * h.h);
    }

    #[test]
    fn gain_reference_point() {
        // term-by-term mpmath evaluation
        let led = LedConfig::ceiling([5.0, 5.0, 3.0]);
        let rx = ReceiverPose::facing_up([6.0, 6.0, 0.0]);
        let h = channel_dc_gain(&led, &rx, &OpticalFrontEnd::default()).unwrap();
        assert_relative_eq!(h.h, 7.102_782_584_266_403e-6, max_relative = 1e-13);
        assert_relative_eq!(h.g, 5.044_952_043_935_813e-11, max_relative = 1e-13);
    }

    #[test]
    fn gain_outside_fov_is_zero() {
        let led = LedConfig::ceiling([0.0, 0.0, 3.0]);
        // horizontal offset 6 m at 3 m height: incidence ~63.4 deg > 60 deg
        let rx = ReceiverPose::facing_up([6.0, 0.0, 0.0]);
        let h = channel_dc_gain(&led, &rx, &OpticalFrontEnd::default()).unwrap();
        assert_eq!(h, ChannelGain::zero());
    }

    #[test]
    fn gain_behind_led_is_zero() {
        let led = LedConfig::ceiling([0.0, 0.0, 3.0]);
        let rx = ReceiverPose::new([0.0, 0.0, 4.0], [0.0, 0.0, -1.0]).unwrap();
        let h = channel_dc_gain(&led, &rx, &OpticalFrontEnd::default()).unwrap();
        assert_eq!(h, ChannelGain::zero());
    }

    #[test]
    fn coincident_positions_rejected() {
        let led = LedConfig::ceiling([1.0, 1.0, 1.0]);
        let rx = ReceiverPose::facing_up([1.0, 1.0, 1.0]);
        assert!(matches!(
            channel_dc_gain(&led, &rx, &OpticalFrontEnd::default()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn non_unit_normals_rejected() {
        assert!(LedConfig::new([0.0; 3], [0.0, 0.0, -2.0], deg(60.0)).is_err());
        assert!(ReceiverPose::new([0.0; 3], [0.0, 0.1, 1.0]).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let led = LedConfig::<f32>::ceiling([5.0, 5.0, 3.0]);
        let rx = ReceiverPose::facing_up([6.0, 6.0, 0.0]);
        let h = channel_dc_gain(&led, &rx, &OpticalFrontEnd::default()).unwrap();
        assert!((h.h as f64 / 7.102_782_584_266_403e-6 - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn inverse_square_along_ray(x in -1.5f64..1.5, y in -1.5f64..1.5, s in 0.2f64..3.0) {
            let led = LedConfig::ceiling([0.0, 0.0, 3.0]);
            let fe = OpticalFrontEnd::default();
            let base = ReceiverPose::facing_up([x, y, 0.0]);
            let h1 = channel_dc_gain(&led, &base, &fe).unwrap().h;
            let far = ReceiverPose::facing_up([x * s, y * s, 3.0 - 3.0 * s]);
            let h2 = channel_dc_gain(&led, &far, &fe).unwrap().h;
            prop_assert!(h1 > 0.0);
            prop_assert!(((h2 * s * s) / h1 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotation_about_led_axis(x in -4.0f64..4.0, y in -4.0f64..4.0, theta in 0.0f64..(2.0 * PI)) {
            let led = LedConfig::ceiling([0.0, 0.0, 3.0]);
            let fe = OpticalFrontEnd::default();
            let (s, c) = theta.sin_cos();
            let h1 = channel_dc_gain(&led, &ReceiverPose::facing_up([x, y, 0.0]), &fe).unwrap();
            let h2 = channel_dc_gain(
                &led,
                &ReceiverPose::facing_up([c * x - s * y, s * x + c * y, 0.0]),
                &fe,
            )
            .unwrap();
            if h1.h == 0.0 {
                // only ambiguous within rounding of the FOV boundary
                let r = (x * x + y * y).sqrt();
                prop_assert!(h2.h == 0.0 || (r.atan2(3.0) - deg(60.0)).abs() < 1e-9);
            } else {
                prop_assert!((h2.h / h1.h - 1.0).abs() < 1e-12);
            }
            prop_assert_eq!(h1.g, h1.h * h1.h);
        }
    }
}
