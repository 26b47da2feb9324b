use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Log,
    Logit,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Log => "log",
            Link::Logit => "logit",
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative of the inverse link with respect to eta.
    pub fn inverse_deriv(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => eta.exp(),
            Link::Logit => {
                let p = self.inverse(eta);
                p * (1.0 - p)
            }
        }
    }

    pub fn apply(self, theta: f64) -> f64 {
        match self {
            Link::Identity => theta,
            Link::Log => theta.ln(),
            Link::Logit => (theta / (1.0 - theta)).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Poisson,
    ZeroInflatedPoisson,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::Gaussian,
        Family::Poisson,
        Family::ZeroInflatedPoisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Poisson => "poisson",
            Family::ZeroInflatedPoisson => "zero_inflated_poisson",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Distributional parameters, `mu` first.
    pub fn dpars(self) -> &'static [&'static str] {
        match self {
            Family::Gaussian => &["mu", "sigma"],
            Family::Poisson => &["mu"],
            Family::ZeroInflatedPoisson => &["mu", "zi"],
        }
    }

    pub fn has_dpar(self, name: &str) -> bool {
        self.dpars().contains(&name)
    }

    pub fn link(self, dpar: &str) -> Option<Link> {
        match (self, dpar) {
            (Family::Gaussian, "mu") => Some(Link::Identity),
            (Family::Gaussian, "sigma") => Some(Link::Log),
            (Family::Poisson | Family::ZeroInflatedPoisson, "mu") => Some(Link::Log),
            (Family::ZeroInflatedPoisson, "zi") => Some(Link::Logit),
            _ => None,
        }
    }

    pub fn is_count(self) -> bool {
        matches!(self, Family::Poisson | Family::ZeroInflatedPoisson)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
