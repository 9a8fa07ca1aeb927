//! Per-triplet losses and the scalar weight of their canonical gradient.
//!
//! Both losses depend on the kernel only through the margin
//! `x = d²(a, b) − d²(a, c)`, and their gradient with respect to the kernel
//! is `f(K, t) · G(t)` with `G` the canonical gradient matrix. Everything here
//! is expressed through `x`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::triplet::Triplet;

/// Which relative-comparison loss to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossModel {
    /// Logistic: `−log p_t`, `p_t = e^{−d²(a,b)} / (e^{−d²(a,b)} + e^{−d²(a,c)})`.
    Ste,
    /// Hinge: `max(0, d²(a,b) − d²(a,c) + 1)`.
    Gnmds,
}

impl LossModel {
    /// Loss as a function of the margin `x`.
    pub fn loss_from_margin(self, x: f64) -> f64 {
        match self {
            LossModel::Ste => softplus(x),
            LossModel::Gnmds => (x + 1.0).max(0.0),
        }
    }

    /// Gradient weight `f` as a function of the margin `x`.
    ///
    /// GNMDS uses the hinge subgradient: active iff `x + 1 > 0`, with the
    /// boundary itself passive.
    pub fn weight_from_margin(self, x: f64) -> f64 {
        match self {
            LossModel::Ste => sigmoid(x),
            LossModel::Gnmds => {
                if x + 1.0 > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn loss(self, k: &Kernel, t: &Triplet) -> Result<f64> {
        Ok(self.loss_from_margin(k.margin(t)?))
    }

    pub fn total_loss(self, k: &Kernel, triplets: &[Triplet]) -> Result<f64> {
        let n = k.n();
        let mut total = 0.0;
        for t in triplets {
            t.check(n)?;
            total += self.loss_from_margin(k.margin_unchecked(t));
        }
        Ok(total)
    }

    pub fn grad_weight(self, k: &Kernel, t: &Triplet) -> Result<f64> {
        Ok(self.weight_from_margin(k.margin(t)?))
    }

    pub fn name(self) -> &'static str {
        match self {
            LossModel::Ste => "ste",
            LossModel::Gnmds => "gnmds",
        }
    }
}

impl fmt::Display for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ste" => Ok(LossModel::Ste),
            "gnmds" => Ok(LossModel::Gnmds),
            other => Err(Error::Config(format!("unknown loss model {other:?}"))),
        }
    }
}

/// Probability that the kernel satisfies `t` under the logistic model.
pub fn ste_prob(k: &Kernel, t: &Triplet) -> Result<f64> {
    Ok(prob_from_margin(k.margin(t)?))
}

/// `1 / (1 + e^x)` without overflow for large `|x|`.
#[inline]
pub(crate) fn prob_from_margin(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    prob_from_margin(-x)
}

/// `log(1 + e^x)`.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn t012() -> Triplet {
        Triplet::new(0, 1, 2).unwrap()
    }

    /// Kernel over three objects with prescribed d²(0,1) and d²(0,2).
    fn kernel_with_distances(dab: f64, dac: f64) -> Kernel {
        // Points on a line: x0 = 0, x1 = sqrt(dab), x2 = -sqrt(dac).
        let pts = [0.0, dab.sqrt(), -dac.sqrt()];
        Kernel::with_bound(SymMatrix::from_fn(3, |i, j| pts[i] * pts[j]), 0.0)
    }

    #[test]
    fn ste_prob_values() {
        let k = Kernel::identity(3);
        assert_eq!(ste_prob(&k, &t012()).unwrap(), 0.5);
        let expect = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((prob_from_margin(-1.0) - expect).abs() < 1e-15);
        assert!((prob_from_margin(-1.0) - 0.7311).abs() < 1e-4);
        let tiny = prob_from_margin(40.0);
        assert!(tiny > 0.0 && tiny <= 1e-15, "{tiny}");
        assert!(prob_from_margin(-800.0) == 1.0);
        assert!(prob_from_margin(800.0).is_finite());
    }

    #[test]
    fn losses_on_identity() {
        let k = Kernel::identity(3);
        let ste = LossModel::Ste.loss(&k, &t012()).unwrap();
        assert!((ste - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(LossModel::Gnmds.loss(&k, &t012()).unwrap(), 1.0);
    }

    #[test]
    fn gnmds_passive_when_margin_met() {
        let k = kernel_with_distances(1.0, 3.0);
        assert!((k.sq_distance(0, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((k.sq_distance(0, 2).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(LossModel::Gnmds.loss(&k, &t012()).unwrap(), 0.0);
        assert_eq!(LossModel::Gnmds.grad_weight(&k, &t012()).unwrap(), 0.0);
    }

    #[test]
    fn hinge_boundary_is_passive() {
        assert_eq!(LossModel::Gnmds.weight_from_margin(-1.0), 0.0);
        assert_eq!(LossModel::Gnmds.weight_from_margin(-1.0 + 1e-12), 1.0);
    }

    #[test]
    fn weights_on_identity() {
        let k = Kernel::identity(3);
        assert_eq!(LossModel::Ste.grad_weight(&k, &t012()).unwrap(), 0.5);
        assert_eq!(LossModel::Gnmds.grad_weight(&k, &t012()).unwrap(), 1.0);
    }

    #[test]
    fn total_loss_is_additive() {
        let k = Kernel::identity(4);
        assert_eq!(LossModel::Ste.total_loss(&k, &[]).unwrap(), 0.0);
        let t = t012();
        let one = LossModel::Ste.loss(&k, &t).unwrap();
        assert_eq!(LossModel::Ste.total_loss(&k, &[t, t]).unwrap(), 2.0 * one);
        let ts: Vec<Triplet> = [(0, 1, 2), (1, 2, 3), (2, 3, 0), (3, 0, 1), (0, 3, 2)]
            .iter()
            .map(|&(a, b, c)| Triplet::new(a, b, c).unwrap())
            .collect();
        assert_eq!(LossModel::Gnmds.total_loss(&k, &ts).unwrap(), 5.0);
        let bad = [Triplet::new(0, 1, 9).unwrap()];
        assert!(LossModel::Gnmds.total_loss(&k, &bad).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("STE".parse::<LossModel>().unwrap(), LossModel::Ste);
        assert_eq!("gnmds".parse::<LossModel>().unwrap(), LossModel::Gnmds);
        assert!("ckl".parse::<LossModel>().is_err());
    }
}
