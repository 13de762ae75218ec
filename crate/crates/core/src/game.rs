//! Shared quadratic cost, the machine's affine policy and the human's best response.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{cholesky_solve, Matrix};

/// Action-space dimensions: `human` for `h`, `machine` for `m`.
/// Serializes as the `"<human>x<machine>"` text form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    human: usize,
    machine: usize,
}

impl Dims {
    pub fn new(human: usize, machine: usize) -> Result<Self> {
        if human == 0 || machine == 0 {
            return Err(Error::InvalidParameter("action dimensions must be at least 1"));
        }
        Ok(Self { human, machine })
    }

    /// The four configurations run in the human-subject experiments.
    pub fn experiment_configurations() -> [Dims; 4] {
        [(1, 1), (1, 2), (2, 1), (2, 2)].map(|(h, m)| Dims { human: h, machine: m })
    }

    pub fn human(&self) -> usize {
        self.human
    }

    pub fn machine(&self) -> usize {
        self.machine
    }

    /// Number of gain entries, i.e. perturbation trials per iteration.
    pub fn gain_entries(&self) -> usize {
        self.human * self.machine
    }

    /// Length of the stacked estimate `(h_hat, m_hat)`.
    pub fn state_len(&self) -> usize {
        self.human + self.machine
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.human, self.machine)
    }
}

impl FromStr for Dims {
    type Err = Error;

    /// Parses `"<human>x<machine>"`, e.g. `"2x1"`.
    fn from_str(s: &str) -> Result<Self> {
        let (h, m) = s
            .trim()
            .split_once(['x', 'X'])
            .ok_or(Error::InvalidParameter("dims must look like <human>x<machine>"))?;
        let parse = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter("dims must be positive integers"))
        };
        Dims::new(parse(h)?, parse(m)?)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Dims {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Dims {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = alloc::string::String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `c(h, m) = ½‖h − h*‖² + ½‖m − m*‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    dims: Dims,
    h_opt: Vec<f64>,
    m_opt: Vec<f64>,
}

impl QuadraticCost {
    pub fn origin(dims: Dims) -> Self {
        Self {
            dims,
            h_opt: alloc::vec![0.0; dims.human],
            m_opt: alloc::vec![0.0; dims.machine],
        }
    }

    pub fn with_optimum(dims: Dims, h_opt: Vec<f64>, m_opt: Vec<f64>) -> Result<Self> {
        check_len("human optimum", &h_opt, dims.human)?;
        check_len("machine optimum", &m_opt, dims.machine)?;
        check_finite("optimum", &h_opt)?;
        check_finite("optimum", &m_opt)?;
        Ok(Self { dims, h_opt, m_opt })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn human_optimum(&self) -> &[f64] {
        &self.h_opt
    }

    pub fn machine_optimum(&self) -> &[f64] {
        &self.m_opt
    }

    pub fn evaluate(&self, h: &[f64], m: &[f64]) -> Result<f64> {
        check_len("human action", h, self.dims.human)?;
        check_len("machine action", m, self.dims.machine)?;
        let half_sq = |v: &[f64], o: &[f64]| -> f64 {
            v.iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5
        };
        Ok(half_sq(h, &self.h_opt) + half_sq(m, &self.m_opt))
    }

    /// The human's best response to `policy`:
    /// `argmin_h c(h, L (h − h_hat) + m_hat)`.
    ///
    /// For the origin optimum this is `(I + LᵀL)⁻¹ (LᵀL h_hat − Lᵀ m_hat)`; a
    /// general optimum is handled by shifting the estimates into coordinates
    /// centred on it and shifting the answer back.
    pub fn best_response(&self, policy: &AffinePolicy) -> Result<Vec<f64>> {
        if policy.dims() != self.dims {
            return Err(Error::Shape {
                what: "policy dims",
                expected: self.dims.gain_entries(),
                found: policy.dims().gain_entries(),
            });
        }
        let h_hat: Vec<f64> = policy.h_hat.iter().zip(&self.h_opt).map(|(a, b)| a - b).collect();
        let m_hat: Vec<f64> = policy.m_hat.iter().zip(&self.m_opt).map(|(a, b)| a - b).collect();
        let centred = best_response_at_origin(&policy.gain, &h_hat, &m_hat)?;
        Ok(centred.iter().zip(&self.h_opt).map(|(a, b)| a + b).collect())
    }
}

/// `(I + LᵀL)⁻¹ (LᵀL h_hat − Lᵀ m_hat)`, solved by Cholesky.
pub fn best_response_at_origin(gain: &Matrix, h_hat: &[f64], m_hat: &[f64]) -> Result<Vec<f64>> {
    let gram = gain.gram();
    let system = gram.add(&Matrix::identity(gain.cols()))?;
    let lhs = gram.mul_vec(h_hat)?;
    let rhs = gain.tr_mul_vec(m_hat)?;
    let b: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    cholesky_solve(&system, &b)
}

/// The machine's strategy `m = L (h − h_hat) + m_hat`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "PolicyParts"))]
pub struct AffinePolicy {
    gain: Matrix,
    h_hat: Vec<f64>,
    m_hat: Vec<f64>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyParts {
    gain: Matrix,
    h_hat: Vec<f64>,
    m_hat: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<PolicyParts> for AffinePolicy {
    type Error = Error;

    fn try_from(p: PolicyParts) -> Result<Self> {
        AffinePolicy::new(p.gain, p.h_hat, p.m_hat)
    }
}

impl AffinePolicy {
    /// `gain` must be `machine x human`.
    pub fn new(gain: Matrix, h_hat: Vec<f64>, m_hat: Vec<f64>) -> Result<Self> {
        check_len("policy human estimate", &h_hat, gain.cols())?;
        check_len("policy machine estimate", &m_hat, gain.rows())?;
        Dims::new(gain.cols(), gain.rows())?;
        if !gain.is_finite() {
            return Err(Error::NonFinite("policy gain"));
        }
        check_finite("policy estimate", &h_hat)?;
        check_finite("policy estimate", &m_hat)?;
        Ok(Self { gain, h_hat, m_hat })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            human: self.gain.cols(),
            machine: self.gain.rows(),
        }
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    pub fn h_hat(&self) -> &[f64] {
        &self.h_hat
    }

    pub fn m_hat(&self) -> &[f64] {
        &self.m_hat
    }

    pub fn machine_action(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len("human action", h, self.gain.cols())?;
        let dev: Vec<f64> = h.iter().zip(&self.h_hat).map(|(a, b)| a - b).collect();
        let mut m = self.gain.mul_vec(&dev)?;
        for (mi, off) in m.iter_mut().zip(&self.m_hat) {
            *mi += off;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d(h: usize, m: usize) -> Dims {
        Dims::new(h, m).unwrap()
    }

    #[test]
    fn dims_parse_and_display() {
        let dims: Dims = "2x1".parse().unwrap();
        assert_eq!((dims.human(), dims.machine()), (2, 1));
        assert_eq!(alloc::format!("{dims}"), "2x1");
        assert!("0x1".parse::<Dims>().is_err());
        assert!("2by2".parse::<Dims>().is_err());
        assert_eq!("3X4".parse::<Dims>().unwrap().gain_entries(), 12);
    }

    #[test]
    fn cost_examples() {
        assert_eq!(QuadraticCost::origin(d(1, 1)).evaluate(&[0.0], &[0.0]).unwrap(), 0.0);
        let c = QuadraticCost::origin(d(1, 1)).evaluate(&[0.65], &[0.0]).unwrap();
        assert!((c - 0.21125).abs() < 1e-15);
        let c = QuadraticCost::origin(d(2, 2))
            .evaluate(&[1.0, 1.0], &[1.0, 1.0])
            .unwrap();
        assert_eq!(c, 2.0);
    }

    #[test]
    fn cost_shape_error() {
        let err = QuadraticCost::origin(d(2, 1)).evaluate(&[0.0], &[0.0]);
        assert!(matches!(err, Err(Error::Shape { .. })));
    }

    #[test]
    fn machine_action_examples() {
        let p = AffinePolicy::new(Matrix::zeros(1, 1), vec![0.3], vec![0.4]).unwrap();
        assert_eq!(p.machine_action(&[-0.9]).unwrap(), vec![0.4]);

        let p = AffinePolicy::new(Matrix::from_rows(&[[1.0]]), vec![0.65], vec![0.0]).unwrap();
        assert!((p.machine_action(&[0.325]).unwrap()[0] + 0.325).abs() < 1e-15);

        let p = AffinePolicy::new(Matrix::from_rows(&[[1.0, 0.0]]), vec![0.2, 0.9], vec![0.1])
            .unwrap();
        assert!((p.machine_action(&[0.5, 0.0]).unwrap()[0] - 0.4).abs() < 1e-15);
        assert!(p.machine_action(&[0.5]).is_err());
    }

    #[test]
    fn policy_rejects_bad_shapes() {
        assert!(AffinePolicy::new(Matrix::zeros(1, 2), vec![0.0], vec![0.0]).is_err());
        assert!(AffinePolicy::new(Matrix::zeros(1, 1), vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn best_response_examples() {
        let cost = QuadraticCost::origin(d(2, 2));
        let p = AffinePolicy::new(Matrix::zeros(2, 2), vec![0.3, -0.2], vec![0.9, 0.1]).unwrap();
        assert_eq!(cost.best_response(&p).unwrap(), vec![0.0, 0.0]);

        let cost = QuadraticCost::origin(d(1, 1));
        let one = Matrix::from_rows(&[[1.0]]);
        let p = AffinePolicy::new(one.clone(), vec![0.65], vec![0.0]).unwrap();
        assert!((cost.best_response(&p).unwrap()[0] - 0.325).abs() < 1e-15);
        let p = AffinePolicy::new(one, vec![0.0], vec![0.65]).unwrap();
        assert!((cost.best_response(&p).unwrap()[0] + 0.325).abs() < 1e-15);
    }

    #[test]
    fn best_response_with_shifted_optimum() {
        let cost = QuadraticCost::with_optimum(d(1, 1), vec![0.2], vec![-0.1]).unwrap();
        let p = AffinePolicy::new(Matrix::from_rows(&[[1.0]]), vec![0.2], vec![-0.1]).unwrap();
        // the estimate already sits on the optimum
        assert!((cost.best_response(&p).unwrap()[0] - 0.2).abs() < 1e-15);
    }
}
