use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    Identity,
    Pca,
    ClosedFormLinear,
    LinearAe,
    LinearEncOnly,
    LinearDecOnly,
    DropoutLinearAe,
    LinearVae,
    DeepVae,
}

impl AdapterKind {
    pub const ALL: [AdapterKind; 9] = [
        AdapterKind::Identity,
        AdapterKind::Pca,
        AdapterKind::ClosedFormLinear,
        AdapterKind::LinearAe,
        AdapterKind::LinearEncOnly,
        AdapterKind::LinearDecOnly,
        AdapterKind::DropoutLinearAe,
        AdapterKind::LinearVae,
        AdapterKind::DeepVae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::Identity => "identity",
            AdapterKind::Pca => "pca",
            AdapterKind::ClosedFormLinear => "closed_form_linear",
            AdapterKind::LinearAe => "linear_ae",
            AdapterKind::LinearEncOnly => "linear_enc_only",
            AdapterKind::LinearDecOnly => "linear_dec_only",
            AdapterKind::DropoutLinearAe => "dropout_linear_ae",
            AdapterKind::LinearVae => "linear_vae",
            AdapterKind::DeepVae => "deep_vae",
        }
    }

    pub fn is_vae(self) -> bool {
        matches!(self, AdapterKind::LinearVae | AdapterKind::DeepVae)
    }

    /// Kinds whose parameters are learned by gradient descent.
    pub fn is_trainable(self) -> bool {
        !matches!(self, AdapterKind::Identity | AdapterKind::Pca | AdapterKind::ClosedFormLinear)
    }

    /// Kinds whose forward pass draws random numbers.
    pub fn is_stochastic(self) -> bool {
        self.is_vae() || self == AdapterKind::DropoutLinearAe
    }
}

impl std::fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown adapter kind '{s}'")))
    }
}

/// Observation variance of the Gaussian likelihood: a fixed value, or
/// `auto` to have the decoder predict a per-cell log-variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Sigma2Repr", into = "Sigma2Repr")]
pub enum Sigma2 {
    Fixed(f64),
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Sigma2Repr {
    Value(f64),
    Name(String),
}

impl TryFrom<Sigma2Repr> for Sigma2 {
    type Error = String;

    fn try_from(r: Sigma2Repr) -> std::result::Result<Self, String> {
        match r {
            Sigma2Repr::Value(v) if v > 0.0 && v.is_finite() => Ok(Sigma2::Fixed(v)),
            Sigma2Repr::Value(v) => Err(format!("sigma2 must be > 0, got {v}")),
            Sigma2Repr::Name(n) if n == "auto" => Ok(Sigma2::Auto),
            Sigma2Repr::Name(n) => Err(format!("sigma2 must be a positive number or \"auto\", got \"{n}\"")),
        }
    }
}

impl From<Sigma2> for Sigma2Repr {
    fn from(s: Sigma2) -> Self {
        match s {
            Sigma2::Fixed(v) => Sigma2Repr::Value(v),
            Sigma2::Auto => Sigma2Repr::Name("auto".into()),
        }
    }
}

impl std::fmt::Display for Sigma2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sigma2::Fixed(v) => write!(f, "{v}"),
            Sigma2::Auto => f.write_str("auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdapterConfig {
    pub kind: AdapterKind,
    /// Latent width; defaults to the input channel count.
    pub d_latent: Option<usize>,
    /// KL weight for the VAE kinds.
    pub beta: f64,
    pub sigma2: Sigma2,
    pub dropout_p: f64,
    /// Hidden width of the deep VAE.
    pub hidden: usize,
    /// Hidden layers per side of the deep VAE.
    pub layers: usize,
    /// Ridge term of the closed-form adapter; 0 uses the pseudo-inverse.
    pub lambda: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            kind: AdapterKind::LinearAe,
            d_latent: None,
            beta: 0.5,
            sigma2: Sigma2::Fixed(1.0),
            dropout_p: 0.1,
            hidden: 128,
            layers: 2,
            lambda: 1e-4,
        }
    }
}

impl AdapterConfig {
    pub fn of_kind(kind: AdapterKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self, d_in: usize) -> Result<usize> {
        let d_latent = self.d_latent.unwrap_or(d_in);
        if d_in == 0 || d_latent == 0 {
            return Err(Error::InvalidArgument("adapter widths must be >= 1".into()));
        }
        let needs_square = matches!(
            self.kind,
            AdapterKind::Identity | AdapterKind::ClosedFormLinear | AdapterKind::LinearEncOnly | AdapterKind::LinearDecOnly
        );
        if needs_square && d_latent != d_in {
            return Err(Error::InvalidArgument(format!("{} requires d_latent = d_in = {d_in}, got {d_latent}", self.kind)));
        }
        if self.kind == AdapterKind::Pca && d_latent > d_in {
            return Err(Error::InvalidArgument(format!("pca d_latent must be <= {d_in}, got {d_latent}")));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!("dropout_p must be in [0, 1), got {}", self.dropout_p)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.kind == AdapterKind::DeepVae && (self.hidden == 0 || self.layers == 0) {
            return Err(Error::InvalidArgument("deep_vae needs hidden >= 1 and layers >= 1".into()));
        }
        Ok(d_latent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in AdapterKind::ALL {
            assert_eq!(k.as_str().parse::<AdapterKind>().unwrap(), k);
        }
        assert!("nope".parse::<AdapterKind>().is_err());
    }

    #[test]
    fn sigma2_serde() {
        #[derive(Serialize, Deserialize)]
        struct W {
            s: Sigma2,
        }
        let a: W = serde_json::from_str(r#"{"s": "auto"}"#).unwrap();
        assert_eq!(a.s, Sigma2::Auto);
        let b: W = serde_json::from_str(r#"{"s": 0.5}"#).unwrap();
        assert_eq!(b.s, Sigma2::Fixed(0.5));
        assert!(serde_json::from_str::<W>(r#"{"s": -1.0}"#).is_err());
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"s":"auto"}"#);
    }

    #[test]
    fn validation() {
        let mut c = AdapterConfig::of_kind(AdapterKind::LinearEncOnly);
        c.d_latent = Some(2);
        assert!(c.validate(3).is_err());
        let c = AdapterConfig { dropout_p: 1.0, ..AdapterConfig::default() };
        assert!(c.validate(3).is_err());
        assert_eq!(AdapterConfig::default().validate(4).unwrap(), 4);
    }
}
