use crate::error::{Error, Result};
use crate::nn::{Graph, ParamStore};
use crate::tensor::{Element, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegKind {
    Off,
    /// Constant coefficient, no annealing.
    Na,
    /// Exponential decay `alpha * lambda^k`.
    RegA,
    /// Inverse decay `alpha / k`.
    RegB,
}

impl std::str::FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(Self::Off),
            "na" => Ok(Self::Na),
            "reg_a" | "reg-a" | "a" => Ok(Self::RegA),
            "reg_b" | "reg-b" | "b" => Ok(Self::RegB),
            _ => Err(Error::Config(format!("unknown regularizer `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizerConfig {
    pub kind: RegKind,
    pub alpha: f64,
    pub lambda: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            kind: RegKind::RegA,
            alpha: 5.0,
            lambda: 0.998,
        }
    }
}

impl RegularizerConfig {
    pub fn off() -> Self {
        Self {
            kind: RegKind::Off,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "regularizer needs alpha > 0 and lambda in [0, 1), got {} and {}",
                self.alpha, self.lambda
            )));
        }
        Ok(())
    }

    /// Penalty weight at step `k`.
    pub fn coefficient(&self, k: u64) -> Result<f64> {
        self.validate()?;
        Ok(match self.kind {
            RegKind::Off => 0.0,
            RegKind::Na => self.alpha,
            RegKind::RegA => self.alpha * self.lambda.powf(k as f64),
            RegKind::RegB => {
                if k == 0 {
                    return Err(Error::invalid("REG-B is undefined at k = 0"));
                }
                self.alpha / k as f64
            }
        })
    }
}

/// Records `coefficient(k) * sum ||w - w★||²` over the tensors in `w_star`.
/// Returns `None` when the coefficient is zero or nothing was transferred.
pub fn reg_penalty<T: Element>(
    g: &mut Graph<T>,
    cfg: &RegularizerConfig,
    w_star: &ParamStore<T>,
    k: u64,
) -> Result<Option<Var>> {
    let c = cfg.coefficient(k)?;
    if c == 0.0 || w_star.is_empty() {
        return Ok(None);
    }
    let mut total: Option<Var> = None;
    for (name, reference) in w_star.iter() {
        let w = g.param(name)?;
        if g.tape.shape(w) != reference.shape() {
            return Err(Error::shape("reg_penalty", &[g.tape.shape(w), reference.shape()]));
        }
        let r = g.constant(reference.shape(), reference.data().to_vec())?;
        let d = g.tape.sub(w, r)?;
        let sq = g.tape.mul(d, d)?;
        let s = g.tape.sum(sq);
        total = Some(match total {
            Some(acc) => g.tape.add(acc, s)?,
            None => s,
        });
    }
    Ok(total.map(|t| g.tape.scale(t, T::from_f64_lossy(c))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: RegKind) -> RegularizerConfig {
        RegularizerConfig {
            kind,
            ..Default::default()
        }
    }

    #[test]
    fn coefficients() {
        assert_eq!(cfg(RegKind::Off).coefficient(7).unwrap(), 0.0);
        assert_eq!(cfg(RegKind::Na).coefficient(7).unwrap(), 5.0);
        assert_eq!(cfg(RegKind::RegA).coefficient(0).unwrap(), 5.0);
        assert_eq!(cfg(RegKind::RegB).coefficient(10).unwrap(), 0.5);
        assert!(cfg(RegKind::RegB).coefficient(0).is_err());
        let a = cfg(RegKind::RegA).coefficient(1000).unwrap();
        assert!((a - 5.0 * (1000.0 * 0.998f64.ln()).exp()).abs() < 1e-12, "{a}");
        assert!((a - 0.6753).abs() < 1e-4, "{a}");
    }

    #[test]
    fn invalid_hyperparameters() {
        let mut c = cfg(RegKind::RegA);
        c.lambda = 1.0;
        assert!(c.coefficient(1).is_err());
        c.lambda = 0.5;
        c.alpha = 0.0;
        assert!(c.coefficient(1).is_err());
    }

    #[test]
    fn zero_lambda_only_regularizes_first_step() {
        let c = RegularizerConfig {
            kind: RegKind::RegA,
            alpha: 5.0,
            lambda: 0.0,
        };
        assert_eq!(c.coefficient(0).unwrap(), 5.0);
        assert_eq!(c.coefficient(1).unwrap(), 0.0);
    }
}
