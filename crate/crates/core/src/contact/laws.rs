//! Built-in constitutive, contact and load laws, each with the constants its
//! structural bounds are stated in.

use serde::{Deserialize, Serialize};

use super::fem::{sym_norm, Sym};
use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Viscoelastic, thermal and conduction laws:
///
/// ```text
/// visc(θ, ε)  = 2μ_v ε + λ_v tr(ε) I + κ_v (1 + tanh θ)/2 · tanh∘ε
/// elast(ε)    = 2μ_e ε + λ_e tr(ε) I
/// relax(t)    = c_r e^{−r t} · identity
/// thermal(θ)  = −α θ I
/// conduct(ξ)  = k ξ + k_nl tanh∘ξ
/// heating(v)  = n · tanh(div v)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialLaw {
    pub visc_mu: f64,
    pub visc_lambda: f64,
    pub visc_thermal: f64,
    pub elast_mu: f64,
    pub elast_lambda: f64,
    pub relax_coef: f64,
    pub relax_rate: f64,
    pub expansion: f64,
    pub conduct: f64,
    pub conduct_nl: f64,
    pub heating: f64,
}

impl Default for MaterialLaw {
    fn default() -> Self {
        Self {
            visc_mu: 0.5,
            visc_lambda: 0.25,
            visc_thermal: 0.1,
            elast_mu: 1.0,
            elast_lambda: 0.5,
            relax_coef: 0.2,
            relax_rate: 1.0,
            expansion: 0.1,
            conduct: 1.0,
            conduct_nl: 0.2,
            heating: 0.1,
        }
    }
}

fn trace_identity(e: &Sym, lambda: f64) -> Sym {
    let tr = lambda * (e[0] + e[1]);
    [tr, tr, 0.0]
}

impl MaterialLaw {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("visc_lambda", self.visc_lambda),
            ("visc_thermal", self.visc_thermal),
            ("elast_mu", self.elast_mu),
            ("elast_lambda", self.elast_lambda),
            ("relax_coef", self.relax_coef),
            ("relax_rate", self.relax_rate),
            ("expansion", self.expansion),
            ("conduct_nl", self.conduct_nl),
            ("heating", self.heating),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("material.{name} must be finite and non-negative")));
            }
        }
        if !(self.visc_mu > 0.0 && self.conduct > 0.0 && self.visc_mu.is_finite() && self.conduct.is_finite()) {
            return Err(Error::config("material.visc_mu and material.conduct must be positive"));
        }
        Ok(())
    }

    pub fn visc(&self, theta: f64, e: &Sym) -> Sym {
        let tr = trace_identity(e, self.visc_lambda);
        let s = self.visc_thermal * 0.5 * (1.0 + theta.tanh());
        std::array::from_fn(|i| 2.0 * self.visc_mu * e[i] + tr[i] + s * e[i].tanh())
    }

    pub fn elast(&self, e: &Sym) -> Sym {
        let tr = trace_identity(e, self.elast_lambda);
        std::array::from_fn(|i| 2.0 * self.elast_mu * e[i] + tr[i])
    }

    pub fn relax(&self, lag: f64) -> f64 {
        self.relax_coef * (-self.relax_rate * lag).exp()
    }

    pub fn thermal(&self, theta: f64) -> Sym {
        [-self.expansion * theta, -self.expansion * theta, 0.0]
    }

    pub fn conduct(&self, g: [f64; 2]) -> [f64; 2] {
        g.map(|x| self.conduct * x + self.conduct_nl * x.tanh())
    }

    pub fn heating(&self, div: f64) -> f64 {
        self.heating * div.tanh()
    }

    /// Strong monotonicity constant of `visc(θ, ·)`.
    pub fn m_visc(&self) -> f64 {
        2.0 * self.visc_mu
    }

    /// Lipschitz constant of `visc(·, ε)`, uniform in `ε`.
    pub fn l_visc(&self) -> f64 {
        self.visc_thermal
    }

    pub fn growth_visc(&self) -> f64 {
        2.0 * self.visc_mu + 2.0 * self.visc_lambda + self.visc_thermal
    }

    pub fn l_elast(&self) -> f64 {
        2.0 * self.elast_mu + 2.0 * self.elast_lambda
    }

    pub fn l_thermal(&self) -> f64 {
        SQRT2 * self.expansion
    }

    pub fn m_conduct(&self) -> f64 {
        self.conduct
    }

    pub fn growth_conduct(&self) -> f64 {
        self.conduct + self.conduct_nl
    }

    /// Lipschitz constant of the heating term from strain energy to `L²`.
    pub fn l_heating(&self) -> f64 {
        SQRT2 * self.heating
    }

    pub fn visc_is_monotone_sample(&self, theta: f64, a: &Sym, b: &Sym) -> bool {
        let (sa, sb) = (self.visc(theta, a), self.visc(theta, b));
        let d: Sym = std::array::from_fn(|i| a[i] - b[i]);
        let ds: Sym = std::array::from_fn(|i| sa[i] - sb[i]);
        super::fem::sym_dot(&ds, &d) >= self.m_visc() * sym_norm(&d).powi(2) * (1.0 - 1e-12) - 1e-15
    }
}

/// Contact-zone laws:
///
/// ```text
/// normal selection   s(r)       = c̄₀ sin(r/δ)
/// damper             k(ρ, r)    = k₁ + (k₂ − k₁)(1 + tanh(σ(ρ + r)))/2
/// friction bound     F_b(ρ, y)  = μ (1 + tanh(ρ)/4 − tanh(y)/4)
/// heat exchange      j'(r)      = h r − m₀ clamp(r, −1, 1)
/// slip heating       h_τ(r)     = L_τ min(r, 1)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactLaw {
    pub normal_bound: f64,
    pub normal_scale: f64,
    pub damper_min: f64,
    pub damper_max: f64,
    pub damper_sensitivity: f64,
    pub friction: f64,
    pub exchange: f64,
    pub exchange_softening: f64,
    pub slip_heating: f64,
}

impl Default for ContactLaw {
    fn default() -> Self {
        Self {
            normal_bound: 0.05,
            normal_scale: 0.5,
            damper_min: 0.5,
            damper_max: 1.0,
            damper_sensitivity: 1.0,
            friction: 0.05,
            exchange: 0.5,
            exchange_softening: 0.1,
            slip_heating: 0.1,
        }
    }
}

impl ContactLaw {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("normal_bound", self.normal_bound),
            ("damper_sensitivity", self.damper_sensitivity),
            ("friction", self.friction),
            ("exchange", self.exchange),
            ("exchange_softening", self.exchange_softening),
            ("slip_heating", self.slip_heating),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("contact.{name} must be finite and non-negative")));
            }
        }
        if !(self.normal_scale > 0.0 && self.normal_scale.is_finite()) {
            return Err(Error::config("contact.normal_scale must be positive"));
        }
        if !(0.0 < self.damper_min && self.damper_min <= self.damper_max && self.damper_max.is_finite()) {
            return Err(Error::config("contact: need 0 < damper_min ≤ damper_max"));
        }
        // sampled bound checks on the declared ranges
        for i in 0..64 {
            let r = (i as f64 - 32.0) * 0.37;
            let k = self.damper(r, -r * 0.5);
            if !(self.damper_min <= k && k <= self.damper_max) {
                return Err(Error::config("contact: damper leaves [damper_min, damper_max]"));
            }
            if self.normal_selection(r).abs() > self.normal_bound {
                return Err(Error::config("contact: normal selection exceeds its bound"));
            }
        }
        Ok(())
    }

    pub fn normal_selection(&self, r: f64) -> f64 {
        self.normal_bound * (r / self.normal_scale).sin()
    }

    pub fn normal_potential(&self, r: f64) -> f64 {
        self.normal_bound * self.normal_scale * (1.0 - (r / self.normal_scale).cos())
    }

    /// Relaxed-monotonicity constant of the normal potential.
    pub fn beta(&self) -> f64 {
        self.normal_bound / self.normal_scale
    }

    pub fn damper(&self, reg_theta: f64, un: f64) -> f64 {
        let s = 0.5 * (1.0 + (self.damper_sensitivity * (reg_theta + un)).tanh());
        self.damper_min + (self.damper_max - self.damper_min) * s
    }

    pub fn l_damper(&self) -> f64 {
        0.5 * (self.damper_max - self.damper_min) * self.damper_sensitivity
    }

    pub fn friction_bound(&self, reg_theta: f64, slip: f64) -> f64 {
        self.friction * (1.0 + 0.25 * reg_theta.tanh() - 0.25 * slip.tanh())
    }

    pub fn l_friction(&self) -> f64 {
        0.25 * self.friction
    }

    pub fn exchange_selection(&self, r: f64) -> f64 {
        self.exchange * r - self.exchange_softening * r.clamp(-1.0, 1.0)
    }

    pub fn slip_heat(&self, r: f64) -> f64 {
        self.slip_heating * r.min(1.0)
    }
}

/// `Σ c · x^a · y^b · t^p` for terms `[c, a, b, p]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Poly {
    #[serde(default)]
    pub terms: Vec<[f64; 4]>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        Self { terms: vec![[c, 0.0, 0.0, 0.0]] }
    }

    pub fn eval(&self, p: [f64; 2], t: f64) -> f64 {
        self.terms.iter().map(|[c, a, b, q]| c * p[0].powf(*a) * p[1].powf(*b) * t.powf(*q)).sum()
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        for term in &self.terms {
            if term.iter().any(|x| !x.is_finite()) || term[1..].iter().any(|e| *e < 0.0 || e.fract() != 0.0) {
                return Err(Error::config(format!(
                    "{what}: terms need finite coefficients and non-negative integer exponents"
                )));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t[0] == 0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactLoads {
    /// Body force per unit volume.
    pub body: [Poly; 2],
    /// Traction on the loaded sides.
    pub traction: [Poly; 2],
    /// Volumetric heat source.
    pub heat: Poly,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactInitial {
    pub displacement: [Poly; 2],
    pub velocity: [Poly; 2],
    pub temperature: Poly,
}

impl ContactLoads {
    pub fn validate(&self) -> Result<()> {
        self.body[0].validate("loads.body[0]")?;
        self.body[1].validate("loads.body[1]")?;
        self.traction[0].validate("loads.traction[0]")?;
        self.traction[1].validate("loads.traction[1]")?;
        self.heat.validate("loads.heat")
    }
}

impl ContactInitial {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.displacement.iter().chain(&self.velocity).enumerate() {
            p.validate(&format!("initial field {i}"))?;
        }
        self.temperature.validate("initial.temperature")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn material_constants_hold_on_samples() {
        let m = MaterialLaw::default();
        let pts: Vec<Sym> = (0..20).map(|i| {
            let s = i as f64 * 0.7 - 7.0;
            [s, -0.3 * s, 0.1 * s * s]
        }).collect();
        for a in &pts {
            for b in &pts {
                assert!(m.visc_is_monotone_sample(0.3, a, b));
            }
            let d: Sym = std::array::from_fn(|i| m.visc(1.0, a)[i] - m.visc(-2.0, a)[i]);
            assert!(sym_norm(&d) <= m.l_visc() * 3.0 + 1e-12);
            assert!(sym_norm(&m.visc(5.0, a)) <= m.growth_visc() * sym_norm(a) + 1e-12);
        }
        assert_eq!(m.visc(0.7, &[0.0; 3]), [0.0; 3]);
    }

    #[test]
    fn contact_law_bounds() {
        let c = ContactLaw::default();
        c.validate().unwrap();
        for i in 0..100 {
            let (a, b) = (i as f64 * 0.13 - 6.0, i as f64 * -0.07 + 2.0);
            let relaxed = (c.normal_selection(a) - c.normal_selection(b)) * (a - b);
            assert!(relaxed >= -c.beta() * (a - b).powi(2) - 1e-15);
            assert!(c.friction_bound(a, b.abs()) >= 0.0);
            let ex = (c.exchange_selection(a) - c.exchange_selection(b)) * (a - b);
            assert!(ex >= -c.exchange_softening * (a - b).powi(2) - 1e-15);
        }
        let bad = ContactLaw { damper_min: 2.0, damper_max: 1.0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn polynomial_loads() {
        let p = Poly { terms: vec![[2.0, 1.0, 0.0, 1.0], [1.0, 0.0, 2.0, 0.0]] };
        assert_eq!(p.eval([3.0, 2.0], 0.5), 7.0);
        assert!(Poly { terms: vec![[1.0, 0.5, 0.0, 0.0]] }.validate("x").is_err());
    }
}
