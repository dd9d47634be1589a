//! Velocity profiles for the modified Frenet system.
//!
//! A profile is built from an odd Fourier sine series
//! `h(t) = a * sum_k w_k sin(k t)` with odd `k`, which forces `h(t + pi) = -h(t)`.
//! The velocity is then either `sqrt(1 + h^2) - h` or `exp(h)`, and both satisfy
//! `v(t) * v(t + pi) = 1`. Torsion follows as `tau = kappa / v^2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("harmonic order {0} is even; only odd orders keep v(t + pi) = 1 / v(t)")]
    EvenHarmonic(u32),
    #[error("harmonic order must be positive")]
    ZeroHarmonic,
    #[error("non-finite profile coefficient")]
    NonFinite,
    #[error("curvature must be positive and finite, got {0}")]
    InvalidCurvature(f64),
}

/// How the velocity is derived from the generating function `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VelocityForm {
    /// `v = sqrt(1 + h^2) - h`
    #[default]
    Sqrt,
    /// `v = exp(h)`
    Exp,
}

impl VelocityForm {
    pub fn as_str(self) -> &'static str {
        match self {
            VelocityForm::Sqrt => "sqrt",
            VelocityForm::Exp => "exp",
        }
    }
}

impl std::str::FromStr for VelocityForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sqrt" => Ok(VelocityForm::Sqrt),
            "exp" => Ok(VelocityForm::Exp),
            other => Err(format!("unknown velocity form `{other}` (expected sqrt or exp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub weight: f64,
}

impl Harmonic {
    pub fn new(order: u32, weight: f64) -> Self {
        Self { order, weight }
    }
}

/// Generating function `h(t) = a * sum w_k sin(k t)` over odd harmonics, plus
/// the choice of velocity form.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierOddProfile {
    amplitude: f64,
    harmonics: Vec<Harmonic>,
    form: VelocityForm,
}

impl FourierOddProfile {
    pub fn new(
        amplitude: f64,
        harmonics: Vec<Harmonic>,
        form: VelocityForm,
    ) -> Result<Self, ProfileError> {
        if !amplitude.is_finite() {
            return Err(ProfileError::NonFinite);
        }
        for h in &harmonics {
            if h.order == 0 {
                return Err(ProfileError::ZeroHarmonic);
            }
            if h.order % 2 == 0 {
                return Err(ProfileError::EvenHarmonic(h.order));
            }
            if !h.weight.is_finite() {
                return Err(ProfileError::NonFinite);
            }
        }
        Ok(Self {
            amplitude,
            harmonics,
            form,
        })
    }

    /// The two-term base family `a (sin t + b3 sin 3t)`.
    pub fn base(amplitude: f64, b3: f64, form: VelocityForm) -> Result<Self, ProfileError> {
        Self::new(
            amplitude,
            vec![Harmonic::new(1, 1.0), Harmonic::new(3, b3)],
            form,
        )
    }

    /// Base family plus extra odd harmonics (orders other than 1 and 3).
    pub fn with_extra(
        amplitude: f64,
        b3: f64,
        extra: &[Harmonic],
        form: VelocityForm,
    ) -> Result<Self, ProfileError> {
        let mut harmonics = vec![Harmonic::new(1, 1.0), Harmonic::new(3, b3)];
        for h in extra {
            match h.order {
                1 => harmonics[0].weight += h.weight,
                3 => harmonics[1].weight += h.weight,
                _ => harmonics.push(*h),
            }
        }
        Self::new(amplitude, harmonics, form)
    }

    /// Builds a profile without the odd-order check. Only for negative-control
    /// experiments; the resulting velocity does not satisfy `v(t) v(t + pi) = 1`.
    #[doc(hidden)]
    pub fn new_unchecked(amplitude: f64, harmonics: Vec<Harmonic>, form: VelocityForm) -> Self {
        Self {
            amplitude,
            harmonics,
            form,
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    pub fn form(&self) -> VelocityForm {
        self.form
    }

    /// Total weight on `sin 3t`.
    pub fn b3(&self) -> f64 {
        self.weight_of(3)
    }

    pub fn weight_of(&self, order: u32) -> f64 {
        self.harmonics
            .iter()
            .filter(|h| h.order == order)
            .map(|h| h.weight)
            .sum()
    }

    /// Harmonics other than the base orders 1 and 3, merged per order.
    pub fn extra_harmonics(&self) -> Vec<Harmonic> {
        let mut out: Vec<Harmonic> = Vec::new();
        for h in self.harmonics.iter().filter(|h| h.order != 1 && h.order != 3) {
            match out.iter_mut().find(|o| o.order == h.order) {
                Some(o) => o.weight += h.weight,
                None => out.push(*h),
            }
        }
        out.sort_by_key(|h| h.order);
        out
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    /// Replaces the `sin 3t` weight, keeping everything else.
    pub fn with_b3(&self, b3: f64) -> Self {
        let mut harmonics: Vec<Harmonic> =
            self.harmonics.iter().copied().filter(|h| h.order != 3).collect();
        let pos = harmonics
            .iter()
            .position(|h| h.order > 3)
            .unwrap_or(harmonics.len());
        harmonics.insert(pos, Harmonic::new(3, b3));
        Self {
            harmonics,
            ..self.clone()
        }
    }

    pub fn h(&self, t: f64) -> f64 {
        let sum: f64 = self
            .harmonics
            .iter()
            .map(|h| h.weight * (h.order as f64 * t).sin())
            .sum();
        self.amplitude * sum
    }

    pub fn v(&self, t: f64) -> f64 {
        velocity_from_h(self.h(t), self.form)
    }
}

/// `sqrt(1 + h^2) - h` is evaluated as `1 / (sqrt(1 + h^2) + h)` for positive `h`
/// to avoid cancellation.
pub fn velocity_from_h(h: f64, form: VelocityForm) -> f64 {
    match form {
        VelocityForm::Sqrt => {
            let r = h.hypot(1.0);
            if h > 0.0 {
                1.0 / (r + h)
            } else {
                r - h
            }
        }
        VelocityForm::Exp => h.exp(),
    }
}

/// Curvature plus velocity profile: everything needed to integrate one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams {
    kappa: f64,
    profile: FourierOddProfile,
}

impl CurveParams {
    pub fn new(kappa: f64, profile: FourierOddProfile) -> Result<Self, ProfileError> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(ProfileError::InvalidCurvature(kappa));
        }
        Ok(Self { kappa, profile })
    }

    /// Convenience constructor for the `(kappa, a, b3)` family.
    pub fn base(kappa: f64, a: f64, b3: f64, form: VelocityForm) -> Result<Self, ProfileError> {
        Self::new(kappa, FourierOddProfile::base(a, b3, form)?)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn profile(&self) -> &FourierOddProfile {
        &self.profile
    }

    pub fn a(&self) -> f64 {
        self.profile.amplitude
    }

    pub fn b3(&self) -> f64 {
        self.profile.b3()
    }

    pub fn with_kappa_a(&self, kappa: f64, a: f64) -> Result<Self, ProfileError> {
        Self::new(kappa, self.profile.with_amplitude(a))
    }

    pub fn with_b3(&self, b3: f64) -> Self {
        Self {
            kappa: self.kappa,
            profile: self.profile.with_b3(b3),
        }
    }

    pub fn h(&self, t: f64) -> f64 {
        self.profile.h(t)
    }

    pub fn v(&self, t: f64) -> f64 {
        self.profile.v(t)
    }

    pub fn tau(&self, t: f64) -> f64 {
        let v = self.v(t);
        self.kappa / (v * v)
    }
}

/// `h(t)` for a profile.
pub fn eval_h(profile: &FourierOddProfile, t: f64) -> f64 {
    profile.h(t)
}

/// `v(t)` for a profile; always positive.
pub fn eval_v(profile: &FourierOddProfile, t: f64) -> f64 {
    profile.v(t)
}

/// `tau(t) = kappa / v(t)^2`.
pub fn eval_tau(params: &CurveParams, t: f64) -> f64 {
    params.tau(t)
}
